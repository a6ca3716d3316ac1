//! Hopcroft–Karp maximum-cardinality matching on an explicit bipartite graph.

use std::collections::VecDeque;

const NIL: usize = usize::MAX;

/// Returns, for each left vertex, its matched right vertex.
///
/// `adj[u]` lists the right neighbours of left vertex `u`; right vertices are
/// `0..n_right`. Runs in `O(E √V)`.
pub fn hopcroft_karp(n_right: usize, adj: &[Vec<usize>]) -> Vec<Option<usize>> {
    let n_left = adj.len();
    let mut match_l = vec![NIL; n_left];
    let mut match_r = vec![NIL; n_right];
    let mut dist = vec![0usize; n_left];
    let mut queue = VecDeque::new();
    // Per-vertex cursor into adj for the iterative DFS.
    let mut it = vec![0usize; n_left];

    loop {
        queue.clear();
        let mut found = false;
        for u in 0..n_left {
            if match_l[u] == NIL {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == NIL {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }
        it.iter_mut().for_each(|c| *c = 0);
        for root in 0..n_left {
            if match_l[root] != NIL {
                continue;
            }
            // Iterative layered DFS from `root`.
            let mut stack = vec![root];
            let mut augmented = false;
            while let Some(&u) = stack.last() {
                if it[u] == adj[u].len() {
                    dist[u] = usize::MAX;
                    stack.pop();
                    continue;
                }
                let v = adj[u][it[u]];
                let w = match_r[v];
                if w == NIL {
                    // Flip the path recorded on the stack.
                    let mut right = v;
                    while let Some(x) = stack.pop() {
                        let next = match_l[x];
                        match_l[x] = right;
                        match_r[right] = x;
                        right = next;
                    }
                    augmented = true;
                    break;
                }
                if dist[w] != usize::MAX && dist[w] == dist[u] + 1 {
                    stack.push(w);
                } else {
                    it[u] += 1;
                }
            }
            if !augmented {
                dist[root] = usize::MAX;
            }
        }
    }
    match_l
        .into_iter()
        .map(|v| if v == NIL { None } else { Some(v) })
        .collect()
}
