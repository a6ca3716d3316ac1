use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instance::parse_json;
use crate::policies::PolicySpec;

/// A benchmark run described in a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Instance path; command-line arguments take precedence.
    #[serde(default)]
    pub instance: Option<String>,
    pub policies: Vec<PolicySpec>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "yes")]
    pub exact_benchmarks: bool,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        parse_json(text)
    }

    pub fn compare_config(&self) -> CompareConfig {
        CompareConfig {
            trials: self.trials,
            seed: self.seed,
            exact_benchmarks: self.exact_benchmarks,
        }
    }
}

/// Settings echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub trials: usize,
    pub seed: u64,
    /// Use enumeration for the benchmarks when the size guards allow it.
    #[serde(default = "yes")]
    pub exact_benchmarks: bool,
}

fn yes() -> bool {
    true
}

impl CompareConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        CompareConfig {
            trials,
            seed,
            exact_benchmarks: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchValue {
    pub mean: f64,
    pub stderr: f64,
    pub exact: bool,
}

impl BenchValue {
    pub fn exact(v: f64) -> Self {
        BenchValue {
            mean: v,
            stderr: 0.0,
            exact: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub policy: String,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    pub benchmark: String,
    pub bench_mean: f64,
    pub bench_stderr: f64,
    pub ratio: f64,
    pub ratio_lo95: f64,
    pub ratio_hi95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub instance_digest: String,
    pub seed: u64,
    pub trials: usize,
    pub config: CompareConfig,
    pub policies: Vec<PolicySummary>,
    pub opt_offline: BenchValue,
    pub opt_online: Option<f64>,
    pub rows: Vec<RatioRow>,
}

pub const CSV_HEADER: &str = "instance_digest,policy,trials,mean,stderr,benchmark,bench_mean,bench_stderr,ratio,ratio_lo95,ratio_hi95,seed";

/// `x` in plain decimal notation with 9 significant digits.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // The exponent after rounding to 9 digits fixes the number of decimals.
    let sci = format!("{x:.8e}");
    let exp: i32 = sci.rsplit_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    let decimals = (8 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// `x` rounded to 9 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Rounds every non-integer number in `v` to 9 significant digits.
pub fn round_json(v: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|f| serde_json::Number::from_f64(round_sig(f)))
            .map_or(Value::Null, Value::Number),
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

impl SimReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                self.instance_digest.clone(),
                r.policy.clone(),
                r.trials.to_string(),
                format_sig(r.mean),
                format_sig(r.stderr),
                r.benchmark.clone(),
                format_sig(r.bench_mean),
                format_sig(r.bench_stderr),
                format_sig(r.ratio),
                format_sig(r.ratio_lo95),
                format_sig(r.ratio_hi95),
                self.seed.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    /// Pretty JSON with every real rounded to 9 significant digits.
    pub fn to_json(&self) -> String {
        let v = serde_json::to_value(self).expect("report serializes");
        let mut s = serde_json::to_string_pretty(&round_json(v)).expect("report serializes");
        s.push('\n');
        s
    }
}
