//! Seeded synthetic signals for tests, acceptance checks and benchmarks.
//!
//! Every generator is a pure function of its length and seed (ChaCha8), so
//! the suites below are reproducible across platforms.

use fcd_core::signal::Signal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// A named signal of a suite.
#[derive(Debug, Clone)]
pub struct Case {
    pub name: String,
    pub seed: u64,
    pub signal: Signal,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn index_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64).collect()
}

fn build(x: Vec<f64>, y: Vec<f64>) -> Signal {
    Signal::new(x, y).expect("generated samples are finite and increasing")
}

/// One or two random sinusoids on a slope, plus Gaussian noise.
pub fn noisy_sine(n: usize, seed: u64) -> Signal {
    let mut r = rng(seed);
    let period = r.random_range(20.0..80.0);
    let amp = r.random_range(1.0..5.0);
    let phase = r.random_range(0.0..std::f64::consts::TAU);
    let second = r.random_range(0.0..0.5) * amp;
    let slope = r.random_range(-0.02..0.02);
    let offset = r.random_range(-10.0..10.0);
    let noise = Normal::new(0.0, 0.05 * amp).unwrap();
    let x = index_grid(n);
    let w = std::f64::consts::TAU / period;
    let y = x
        .iter()
        .map(|&t| {
            amp * (w * t + phase).sin() + second * (2.7 * w * t).sin() + slope * t + offset + noise.sample(&mut r)
        })
        .collect();
    build(x, y)
}

/// Gaussian random walk.
pub fn random_walk(n: usize, seed: u64) -> Signal {
    let mut r = rng(seed);
    let step = Normal::new(0.0, 1.0).unwrap();
    let mut level = r.random_range(-50.0..50.0);
    let y = (0..n)
        .map(|_| {
            level += step.sample(&mut r);
            level
        })
        .collect();
    build(index_grid(n), y)
}

/// Smooth polynomial trend with mild noise on an irregular grid.
pub fn trend(n: usize, seed: u64) -> Signal {
    let mut r = rng(seed);
    let mut x = Vec::with_capacity(n);
    let mut t = 0.0;
    for _ in 0..n {
        x.push(t);
        t += r.random_range(0.5..1.5);
    }
    let span = t;
    let (a, b, c) = (r.random_range(-3.0..3.0), r.random_range(-5.0..5.0), r.random_range(-2.0..2.0));
    let noise = Normal::new(0.0, 0.05).unwrap();
    let y = x
        .iter()
        .map(|&v| {
            let u = v / span;
            ((a * u + b) * u + c) * u * 10.0 + 100.0 + noise.sample(&mut r)
        })
        .collect();
    build(x, y)
}

/// EEG-like trace in microvolts sampled at 250 Hz: alpha and theta rhythms
/// with drifting amplitude, a slow baseline wander and noise.
pub fn eeg_like(n: usize, seed: u64) -> Signal {
    let mut r = rng(seed);
    let fs = 250.0;
    let alpha = r.random_range(8.0..12.0);
    let theta = r.random_range(4.0..7.0);
    let (pa, pt) = (r.random_range(0.0..6.3), r.random_range(0.0..6.3));
    let noise = Normal::new(0.0, 2.0).unwrap();
    let tau = std::f64::consts::TAU;
    let x: Vec<f64> = (0..n).map(|i| i as f64 / fs).collect();
    let y = x
        .iter()
        .map(|&t| {
            let env = 1.0 + 0.4 * (tau * 0.3 * t).sin();
            20.0 * env * (tau * alpha * t + pa).sin()
                + 8.0 * (tau * theta * t + pt).sin()
                + 5.0 * (tau * 0.2 * t).sin()
                + noise.sample(&mut r)
        })
        .collect();
    build(x, y)
}

/// The benchmark series: a noisy sine of period 94 samples with a slope.
pub fn bench_signal(n: usize, seed: u64) -> Signal {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let x = index_grid(n);
    let y = x
        .iter()
        .map(|&t| 3.0 * (t / 15.0).sin() + 0.01 * t + noise.sample(&mut r))
        .collect();
    build(x, y)
}

fn case(name: &str, seed: u64, signal: Signal) -> Case {
    Case {
        name: format!("{name}-{seed}"),
        seed,
        signal,
    }
}

/// 20 signals of 300 samples: seeds 1-7 noisy sines, 8-14 random walks,
/// 15-20 trends.
pub fn continuity_suite() -> Vec<Case> {
    (1..=20)
        .map(|seed| match seed {
            1..=7 => case("sine", seed, noisy_sine(300, seed)),
            8..=14 => case("walk", seed, random_walk(300, seed)),
            _ => case("trend", seed, trend(300, seed)),
        })
        .collect()
}

/// Sinusoidal-family signals of 400 samples, seeds 101-106.
pub fn sinusoidal_suite() -> Vec<Case> {
    (101..=106).map(|seed| case("sine", seed, noisy_sine(400, seed))).collect()
}

/// Sinusoidal suite plus random walks (seeds 111-113) and trends (seeds
/// 121-123), 400 samples each.
pub fn benchmark_suite() -> Vec<Case> {
    let mut out = sinusoidal_suite();
    out.extend((111..=113).map(|seed| case("walk", seed, random_walk(400, seed))));
    out.extend((121..=123).map(|seed| case("trend", seed, trend(400, seed))));
    out
}

/// Four-second EEG-like traces (1000 samples), seeds 201-205.
pub fn eeg_suite() -> Vec<Case> {
    (201..=205).map(|seed| case("eeg", seed, eeg_like(1000, seed))).collect()
}
