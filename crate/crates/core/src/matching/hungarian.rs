//! Maximum-weight assignment by shortest augmenting paths with potentials.

/// Maximizes `Σ w[i][assign[i]]` over injective assignments of the `n` rows
/// into `m >= n` columns. `w` is row-major `n × m`.
pub fn max_weight_assignment(n: usize, m: usize, w: &[f64]) -> Vec<usize> {
    assert!(n <= m, "assignment needs at least as many columns as rows");
    assert_eq!(w.len(), n * m);
    if n == 0 {
        return Vec::new();
    }
    // 1-indexed potentials; column 0 is the virtual start.
    let cost = |i: usize, j: usize| -w[(i - 1) * m + (j - 1)];
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_the_heavier_diagonal() {
        let w = [1.0, 5.0, 4.0, 1.0];
        assert_eq!(max_weight_assignment(2, 2, &w), vec![1, 0]);
        let w = [3.0, 1.0, 0.0];
        assert_eq!(max_weight_assignment(1, 3, &w), vec![0]);
    }
}
