//! Timing and accuracy harness.
//!
//! For every model and length the first decomposition is timed as the cold
//! run and the median of the following repeats as the warm run.

use std::fmt::Write as _;
use std::time::Instant;

use fcd_core::decompose::{decompose, DecomposeConfig};
use fcd_core::models::preset;
use serde::Serialize;

use crate::error::Result;
use crate::synthetic::bench_signal;

pub const DEFAULT_SIZES: &[usize] = &[10, 100, 1000, 10000];
pub const LARGE_SIZE: usize = 100_000;
pub const BENCH_SEED: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchOptions {
    pub sizes: Vec<usize>,
    pub models: Vec<String>,
    /// Warm repeats after the cold run.
    pub repeats: usize,
    pub seed: u64,
    pub config: DecomposeConfig,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            sizes: DEFAULT_SIZES.to_vec(),
            models: vec!["cubic".into(), "sin6".into()],
            repeats: 5,
            seed: BENCH_SEED,
            config: DecomposeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub model: String,
    pub n: usize,
    pub modes: usize,
    pub cold_s: f64,
    pub warm_median_s: f64,
    pub mean_srmse: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn run_bench(opts: &BenchOptions) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for name in &opts.models {
        let model = preset(name)?;
        for &n in &opts.sizes {
            let signal = bench_signal(n, opts.seed);
            let t = Instant::now();
            let d = decompose(&signal, &model, &opts.config)?;
            let cold = t.elapsed().as_secs_f64();
            let mut warm = Vec::with_capacity(opts.repeats);
            for _ in 0..opts.repeats {
                let t = Instant::now();
                std::hint::black_box(decompose(&signal, &model, &opts.config)?);
                warm.push(t.elapsed().as_secs_f64());
            }
            rows.push(BenchRow {
                model: name.clone(),
                n,
                modes: d.mode_count(),
                cold_s: cold,
                warm_median_s: if warm.is_empty() { cold } else { median(warm) },
                mean_srmse: d.aggregate_srmse().overall,
            });
        }
    }
    Ok(rows)
}

/// One table per model with rows by signal length.
pub fn render_table(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    let mut models: Vec<&str> = rows.iter().map(|r| r.model.as_str()).collect();
    models.dedup();
    for model in models {
        let _ = writeln!(out, "model {model}");
        out.push_str("       N  modes   first run (s)   subsequent (s)   mean SRMSE\n");
        for r in rows.iter().filter(|r| r.model == model) {
            let _ = writeln!(
                out,
                "{:>8}  {:>5}  {:>14.6}  {:>15.6}  {:>11.4}",
                r.n, r.modes, r.cold_s, r.warm_median_s, r.mean_srmse
            );
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn small_bench_has_one_row_per_model_and_size() {
        let opts = BenchOptions {
            sizes: vec![10, 100],
            repeats: 1,
            ..Default::default()
        };
        let rows = run_bench(&opts).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[1].modes, 4);
        let table = render_table(&rows);
        assert!(table.contains("model cubic") && table.contains("model sin6"));
    }
}
