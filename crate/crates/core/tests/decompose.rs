use std::f64::consts::PI;

use fcd_core::decompose::{decompose, segment_srmse, DecomposeConfig, Decomposition, ReportSpace};
use fcd_core::error::Error;
use fcd_core::expr::Sym;
use fcd_core::models::preset;
use fcd_core::optimizer::MIN_SAMPLES_PER_PERIOD;
use fcd_core::signal::{Axis, Signal};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn signal(x: Vec<f64>, f: impl Fn(f64) -> f64) -> Signal {
    let y = x.iter().map(|&v| f(v)).collect();
    Signal::new(x, y).unwrap()
}

fn range(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn run(s: &Signal, model: &str) -> Decomposition {
    decompose(s, &preset(model).unwrap(), &DecomposeConfig::default()).unwrap()
}

fn noisy_sine(n: usize, seed: u64) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let y = x
        .iter()
        .map(|&t| 3.0 * (t / 9.0).sin() + 0.02 * t + rng.random_range(-0.3..0.3))
        .collect();
    Signal::new(x, y).unwrap()
}

#[test]
fn hundred_points_give_four_modes() {
    let d = run(&noisy_sine(100, 1), "cubic");
    let counts: Vec<usize> = d.modes.iter().map(|m| m.segments.len()).collect();
    assert_eq!(counts, vec![20, 10, 5, 1]);
    assert!(d.modes.last().unwrap().trend);
    assert!(d.modes[..3].iter().all(|m| !m.trend));
}

/// Least-squares cubic in local coordinates.
fn cubic_ls(t: &[f64], y: &[f64]) -> Vec<f64> {
    let a = nalgebra::DMatrix::from_fn(t.len(), 4, |i, j| t[i].powi(3 - j as i32));
    let b = nalgebra::DVector::from_column_slice(y);
    a.svd(true, true).solve(&b, 1e-14).unwrap().iter().copied().collect()
}

#[test]
fn exact_cubic_is_recovered_in_every_segment() {
    let s = signal(range(300, -2.0, 4.0), |t| 0.4 * t * t * t - 1.5 * t * t + t + 7.0);
    let d = run(&s, "cubic");
    let y = s.y();
    for (m, mode) in d.modes.iter().enumerate() {
        let fitted = d.fitted(m).unwrap();
        for seg in &mode.segments {
            if !seg.metrics.flat {
                assert!(seg.metrics.srmse < 1e-6, "mode {m} srmse {}", seg.metrics.srmse);
            }
            let (lo, hi) = seg.range;
            let t: Vec<f64> = s.x()[lo..hi].iter().map(|&v| v - seg.anchor_x).collect();
            let c = cubic_ls(&t, &y[lo..hi]);
            let scale = y[lo..hi].iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (i, &ti) in t.iter().enumerate() {
                let oracle = ((c[0] * ti + c[1]) * ti + c[2]) * ti + c[3];
                assert!((fitted[lo + i] - oracle).abs() <= 1e-8 * scale);
            }
        }
    }
}

#[test]
fn constant_signal_is_flat_everywhere() {
    let s = signal(range(120, 0.0, 10.0), |_| 4.2);
    for model in ["cubic", "sin6"] {
        let d = run(&s, model);
        for mode in &d.modes {
            for seg in &mode.segments {
                assert!(seg.metrics.flat);
                assert_eq!(seg.metrics.srmse, 1.0);
            }
        }
        let fitted = d.fitted(0).unwrap();
        assert!(fitted.iter().all(|v| (v - 4.2).abs() < 1e-12));
    }
}

fn knot_mismatch(d: &Decomposition, m: usize) -> (f64, f64) {
    let segs = &d.modes[m].segments;
    let (mut dv, mut ds) = (0.0f64, 0.0f64);
    for k in 1..segs.len() {
        let left = d.physical_expr(m, k - 1).unwrap();
        let right = d.physical_expr(m, k).unwrap();
        let t = segs[k].anchor_x - segs[k - 1].anchor_x;
        let vl = left.eval(t, &[], (0.0, 0.0));
        let sl = left.derivative(Sym::X).eval(t, &[], (0.0, 0.0));
        let vr = right.eval(0.0, &[], (0.0, 0.0));
        let sr = right.derivative(Sym::X).eval(0.0, &[], (0.0, 0.0));
        dv = dv.max((vl - vr).abs());
        ds = ds.max((sl - sr).abs());
    }
    (dv, ds)
}

#[test]
fn c1_modes_join_smoothly_and_cover_the_range() {
    let s = noisy_sine(400, 2);
    let max_y = s.y().iter().map(|v| v.abs()).fold(0.0, f64::max);
    for model in ["cubic", "sin6", "quadratic", "linear"] {
        let d = run(&s, model);
        let dense = range(4001, s.x()[0], s.x()[399]);
        for m in 0..d.mode_count() {
            let r = d.reconstruct(m, &dense).unwrap();
            assert!(r.iter().all(|v| v.is_finite()));
            let slopes: Vec<f64> = r.windows(2).map(|w| (w[1] - w[0]) / 0.1).collect();
            let max_slope = slopes.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
            let (dv, ds) = knot_mismatch(&d, m);
            assert!(dv <= 1e-8 * max_y, "{model} mode {m}: value jump {dv:e}");
            assert!(ds <= 1e-6 * max_slope, "{model} mode {m}: slope jump {ds:e}");
        }
    }
}

#[test]
fn physical_parameters_reproduce_the_fit() {
    let s = noisy_sine(250, 3);
    for model in ["cubic", "sin6", "decay"] {
        let d = run(&s, model);
        for m in 0..d.mode_count() {
            let a = d.fitted(m).unwrap();
            let b = d.reconstruct_physical(m, s.x()).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-8 * u.abs().max(1.0), "{model}: {u} vs {v}");
            }
        }
    }
}

#[test]
fn sine_frequencies_stay_below_the_sampling_limit() {
    let s = noisy_sine(400, 101);
    for model in ["sin4", "sin5", "sin7", "fourier"] {
        let spec = preset(model).unwrap();
        let (fi, harmonics) = spec.frequency().unwrap();
        let d = run(&s, model);
        let spacing = (d.state.scale(s.x()[1], Axis::X) - d.state.scale(s.x()[0], Axis::X)).abs();
        let cap = 2.0 * PI / (MIN_SAMPLES_PER_PERIOD * spacing * harmonics);
        let fine = &d.modes[0];
        for seg in &fine.segments {
            let w = seg.fit.params.values[fi];
            assert!(w.abs() <= cap * (1.0 + 1e-9), "{model} segment {}: {w} > {cap}", seg.index);
        }
        assert!(fine.mean_srmse() < 1.0, "{model}: {}", fine.mean_srmse());
    }
}

#[test]
fn trend_reconstruction_is_the_single_fit() {
    let s = noisy_sine(150, 4);
    let d = run(&s, "cubic");
    let t = d.mode_count() - 1;
    let e = d.physical_expr(t, 0).unwrap();
    let direct: Vec<f64> = s.x().iter().map(|&x| e.eval(x - s.x()[0], &[], (0.0, 0.0))).collect();
    let r = d.fitted(t).unwrap();
    for (a, b) in r.iter().zip(&direct) {
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }
}

#[test]
fn reconstruct_refuses_to_extrapolate() {
    let s = noisy_sine(100, 5);
    let d = run(&s, "cubic");
    assert!(matches!(d.reconstruct(0, &[-0.5]), Err(Error::ExtrapolationError { .. })));
    assert!(matches!(d.reconstruct(0, &[99.5]), Err(Error::ExtrapolationError { .. })));
    assert!(d.reconstruct(0, &[0.0, 99.0]).is_ok());
}

#[test]
fn scale_equivariance() {
    let s = noisy_sine(200, 6);
    let scaled = Signal::new(s.x().to_vec(), s.y().iter().map(|v| 3.0 * v).collect()).unwrap();
    let (a, b) = (run(&s, "sin6"), run(&scaled, "sin6"));
    for m in 0..a.mode_count() {
        let (ra, rb) = (a.fitted(m).unwrap(), b.fitted(m).unwrap());
        let scale = ra.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (u, v) in ra.iter().zip(&rb) {
            assert!((3.0 * u - v).abs() <= 1e-6 * 3.0 * scale);
        }
    }
}

#[test]
fn shift_equivariance() {
    let s = noisy_sine(200, 7);
    let shifted = Signal::new(s.x().iter().map(|v| v + 1000.0).collect(), s.y().to_vec()).unwrap();
    let (a, b) = (run(&s, "cubic"), run(&shifted, "cubic"));
    for m in 0..a.mode_count() {
        for (sa, sb) in a.modes[m].segments.iter().zip(&b.modes[m].segments) {
            for (u, v) in sa.fit.params.values.iter().zip(&sb.fit.params.values) {
                assert!((u - v).abs() <= 1e-6 * u.abs().max(1.0));
            }
            assert!((sb.anchor_x - sa.anchor_x - 1000.0).abs() < 1e-9);
        }
        let (ra, rb) = (a.fitted(m).unwrap(), b.fitted(m).unwrap());
        for (u, v) in ra.iter().zip(&rb) {
            assert!((u - v).abs() <= 1e-6 * u.abs().max(1.0));
        }
    }
}

#[test]
fn aggregates() {
    let d = run(&noisy_sine(100, 8), "cubic");
    let agg = d.aggregate_srmse();
    assert_eq!(agg.per_mode.len(), 4);
    let all: Vec<f64> = d.modes.iter().flat_map(|m| m.segments.iter().map(|s| s.metrics.srmse)).collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    assert!((agg.overall - mean).abs() < 1e-15);
    assert!(agg.overall <= 1.0);
    let trend = &d.modes[3];
    assert_eq!(agg.per_mode[3], trend.segments[0].metrics.srmse);
}

#[test]
fn report_layout() {
    let s = noisy_sine(450, 9);
    let cfg = DecomposeConfig {
        alpha_seg: 90,
        beta_min: 1,
        ..Default::default()
    };
    let d = decompose(&s, &preset("sin6").unwrap(), &cfg).unwrap();
    assert_eq!(d.modes[0].segments.len(), 5);
    let text = d.piecewise_report(0, ReportSpace::Absolute).unwrap();
    let ranges: Vec<&str> = text
        .lines()
        .filter_map(|l| l.rsplit_once(",  ").map(|(_, r)| r.split("  ").next().unwrap()))
        .collect();
    assert_eq!(ranges, ["[0, 90)", "[90, 180)", "[180, 270)", "[270, 360)", "[360, 449]"]);
    assert!(text.contains("(x - 89)"), "{text}");
    let local = d.piecewise_report(0, ReportSpace::Local).unwrap();
    assert!(local.contains("x_k = 269") && local.contains("sin("));

    let t = d.mode_count() - 1;
    let trend = d.piecewise_report(t, ReportSpace::Absolute).unwrap();
    assert_eq!(trend.lines().filter(|l| l.starts_with("  ")).count(), 1);
    assert!(trend.contains("[0, 449]"));
}

#[test]
fn cubic_report_style() {
    let s = signal(range(50, 0.0, 10.0), |t| -0.057 * t.powi(3) + 0.666 * t * t + 1.761 * t + 90.31);
    let d = run(&s, "cubic");
    let t = d.mode_count() - 1;
    let text = d.piecewise_report(t, ReportSpace::Local).unwrap();
    assert!(text.contains("-0.057t^3 + 0.666t^2 + 1.761t + 90.31"), "{text}");
}

#[test]
fn document_is_versioned_and_stable() {
    let s = noisy_sine(120, 10);
    let doc = run(&s, "sin6").document();
    assert_eq!(doc.format, "fcd/1");
    assert_eq!(doc.modes.len(), 4);
    assert_eq!(doc.model.fixed, vec!["C0", "C1"]);
    let seg = &doc.modes[1].segments[1];
    assert_eq!(seg.anchor.index, seg.range[0] - 1);
    assert!(seg.physical.is_some());
    let again = run(&s, "sin6").document();
    assert_eq!(serde_json::to_string(&doc).unwrap(), serde_json::to_string(&again).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn srmse_is_non_negative_and_capped_when_flat(
        y in prop::collection::vec(-1e3f64..1e3, 1..40),
        noise in prop::collection::vec(-1.0f64..1.0, 40),
        global in 0.0f64..1e4,
    ) {
        let fitted: Vec<f64> = y.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let m = segment_srmse(&y, &fitted, global).unwrap();
        prop_assert!(m.srmse >= 0.0);
        if m.flat {
            prop_assert!(m.srmse <= 1.0);
        }
        prop_assert_eq!(m.n_points, y.len());
    }

    #[test]
    fn every_sample_is_owned_by_its_range(n in 40usize..200, seed in 0u64..1000) {
        let d = run(&noisy_sine(n, seed), "quadratic");
        for m in 0..d.mode_count() {
            for seg in &d.modes[m].segments {
                for i in seg.range.0..seg.range.1 {
                    prop_assert_eq!(d.locate(m, d.signal.x()[i]).unwrap(), seg.index);
                }
            }
        }
    }
}
