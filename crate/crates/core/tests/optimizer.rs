use fcd_core::models::{preset, ModelSpec};
use fcd_core::optimizer::{
    fit_batch, fit_mode, fit_trend, lm_fit, lm_fit_bounded, segment_anchor, LMConfig,
    Termination,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn unconstrained(name: &str) -> ModelSpec {
    preset(name).unwrap()
}

#[test]
fn linear_data_is_recovered_exactly() {
    let m = unconstrained("linear");
    let x = grid(50, 0.0, 3.0);
    let y: Vec<f64> = x.iter().map(|&t| 2.0 * t + 1.0).collect();
    let (fit, trace) = lm_fit(&m, &x, &y, &[0.0, 0.0], None, &LMConfig::default()).unwrap();
    assert!((fit.params.values[0] - 2.0).abs() < 1e-8);
    assert!((fit.params.values[1] - 1.0).abs() < 1e-8);
    assert!(trace.iterations() <= 5, "{trace:?}");
    assert!(fit.flags.converged);
}

#[test]
fn optimal_start_stops_on_the_first_iteration() {
    let m = unconstrained("cubic");
    let x = grid(30, 0.0, 2.0);
    let p = [0.5, -1.0, 0.25, 3.0];
    let y = m.evaluate(&p, &x).unwrap();
    let (fit, trace) = lm_fit(&m, &x, &y, &p, None, &LMConfig::default()).unwrap();
    assert_eq!(trace.termination, Termination::LossTol);
    assert_eq!(trace.iterations(), 1);
    assert_eq!(fit.params.values, p.to_vec());
}

#[test]
fn noiseless_sin6_is_reproduced() {
    let m = unconstrained("sin6");
    let x = grid(200, 0.0, 4.0);
    let truth = [0.1, 1.0, 3.0, 0.5, 0.2, 0.0];
    let y = m.evaluate(&truth, &x).unwrap();
    let p0 = m.initial_guess(&x, &y);
    let (fit, trace) = lm_fit(&m, &x, &y, &p0, None, &LMConfig::default()).unwrap();
    assert!(fit.loss < 1e-12, "loss {} after {:?}", fit.loss, trace.termination);
}

#[test]
fn accepted_losses_decrease_and_solves_are_accurate() {
    let m = unconstrained("sin5");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = grid(120, 0.0, 6.0);
    let y: Vec<f64> = x
        .iter()
        .map(|&t| 1.3 * (2.1 * t + 0.3).sin() + 0.2 * t + rng.random_range(-0.1..0.1))
        .collect();
    let p0 = m.initial_guess(&x, &y);
    let (_, trace) = lm_fit(&m, &x, &y, &p0, None, &LMConfig::default()).unwrap();
    let mut last = trace.initial_loss;
    for s in trace.steps.iter().filter(|s| s.accepted) {
        assert!(s.loss < last);
        assert!(s.solve_residual <= 1e-8, "{}", s.solve_residual);
        last = s.loss;
    }
}

#[test]
fn continuity_holds_at_every_iterate() {
    let m = preset("sin6").unwrap();
    let x = grid(80, 0.0, 3.0);
    let y: Vec<f64> = x.iter().map(|&t| (1.7 * t).sin() * (1.0 + 0.2 * t) + 0.1 * t).collect();
    let (v, s) = (0.35, -0.8);
    let p0 = m.initial_guess(&x, &y);
    for iters in 1..=8 {
        let cfg = LMConfig {
            max_iters: iters,
            ..Default::default()
        };
        let (fit, _) = lm_fit(&m, &x, &y, &p0, Some((v, s)), &cfg).unwrap();
        let (f0, d0) = m.value_and_slope(&fit.params.values, 0.0);
        let scale = 1f64.max(v.abs()).max(s.abs());
        assert!((f0 - v).abs() <= 1e-10 * scale, "value {f0} vs {v}");
        assert!((d0 - s).abs() <= 1e-10 * scale, "slope {d0} vs {s}");
    }
}

#[test]
fn gradient_vanishes_at_convergence() {
    let m = unconstrained("cubic");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = grid(100, 0.0, 2.0);
    let y: Vec<f64> = x
        .iter()
        .map(|&t| t * t * t - t + 0.5 + rng.random_range(-0.05..0.05))
        .collect();
    let (fit, _) = lm_fit(&m, &x, &y, &[0.0; 4], None, &LMConfig::default()).unwrap();
    let f = m.evaluate(&fit.params.values, &x).unwrap();
    let r = nalgebra::DVector::from_iterator(x.len(), y.iter().zip(&f).map(|(a, b)| a - b));
    let j = m.jacobian(&fit.params.values, &x, None).unwrap();
    let g = j.tr_mul(&r).norm();
    assert!(g <= 1e-6 * (1.0 + fit.loss), "gradient norm {g}");
}

#[test]
fn bounds_are_respected() {
    let mut bounds = std::collections::BTreeMap::new();
    bounds.insert("A".to_string(), (0.0, f64::INFINITY));
    let m = unconstrained("sin4").with_bounds(&bounds).unwrap();
    let x = grid(100, 0.0, 5.0);
    let y: Vec<f64> = x.iter().map(|&t| 0.5 * (2.0 * t).sin() + 0.1 * t).collect();
    let (fit, _) = lm_fit_bounded(&m, &x, &y, &[-0.2, 2.1, 0.0, 0.0], None, &LMConfig::default())
        .unwrap();
    assert!(fit.params.values[0] >= 0.0);
    assert!(fit.flags.clamped);

    let mut pin = std::collections::BTreeMap::new();
    pin.insert("a".to_string(), (1.0, 1.0));
    let cubic = unconstrained("cubic").with_bounds(&pin).unwrap();
    let yc: Vec<f64> = x.iter().map(|&t| t * t * t + 2.0 * t).collect();
    let (fit, _) =
        lm_fit_bounded(&cubic, &x, &yc, &[1.0, 0.0, 0.0, 0.0], None, &LMConfig::default()).unwrap();
    assert_eq!(fit.params.values[0], 1.0);
    assert!((fit.params.values[2] - 2.0).abs() < 1e-6);
}

fn boundaries(n: usize, k: usize) -> Vec<usize> {
    fcd_core::layout::segment_boundaries(n, k).unwrap()
}

#[test]
fn batches_hand_off_kept_exit_states() {
    let m = preset("cubic").unwrap();
    let x = grid(100, 0.0, 5.0);
    let y: Vec<f64> = x.iter().map(|&t| (1.3 * t).sin() * 2.0).collect();
    let b = boundaries(100, 5);
    let cfg = LMConfig {
        batch_size: 2,
        ..Default::default()
    };
    let first = fit_batch(&m, &x, &y, &b, 0..3, None, None, 2, &cfg).unwrap();
    assert_eq!(first.kept.len(), 2);
    assert!(first.carry.is_some());
    let entry = first.kept[1].exit;
    let second =
        fit_batch(&m, &x, &y, &b, 2..5, Some(entry), first.carry.as_deref(), 2, &cfg).unwrap();
    let (v, s) = m.value_and_slope(&second.kept[0].params.values, 0.0);
    assert!((v - entry.0).abs() < 1e-10 && (s - entry.1).abs() < 1e-10);

    let mode = fit_mode(&m, &x, &y, &b, &cfg).unwrap();
    assert_eq!(mode.segments.len(), 5);
    assert_eq!(mode.segments[..2], first.kept[..]);
    assert_eq!(mode.segments[2..4], second.kept[..]);
    let ranges: Vec<_> = mode.segments.iter().map(|s| s.range).collect();
    assert_eq!(ranges, vec![(0, 20), (20, 40), (40, 60), (60, 80), (80, 100)]);
}

#[test]
fn single_batch_when_segments_fit() {
    let m = preset("quadratic").unwrap();
    let x = grid(60, 0.0, 1.0);
    let y: Vec<f64> = x.iter().map(|&t| t.exp()).collect();
    let b = boundaries(60, 3);
    let cfg = LMConfig::default();
    let out = fit_batch(&m, &x, &y, &b, 0..3, None, None, 3, &cfg).unwrap();
    assert!(out.carry.is_none());
    assert_eq!(fit_mode(&m, &x, &y, &b, &cfg).unwrap().segments, out.kept);
}

/// Least-squares cubic through the samples via the normal equations.
fn poly_ls(x: &[f64], y: &[f64]) -> Vec<f64> {
    let a = nalgebra::DMatrix::from_fn(x.len(), 4, |i, j| x[i].powi(3 - j as i32));
    let b = nalgebra::DVector::from_column_slice(y);
    let sol = a.svd(true, true).solve(&b, 1e-14).unwrap();
    sol.iter().copied().collect()
}

#[test]
fn pure_cubic_is_fitted_exactly_in_every_segment() {
    let m = preset("cubic").unwrap();
    let x = grid(240, -1.0, 2.0);
    let y: Vec<f64> = x.iter().map(|&t| 0.7 * t * t * t - t * t + 0.3 * t + 2.0).collect();
    for k in [1, 3, 8, 17] {
        let b = boundaries(240, k);
        let mode = fit_mode(&m, &x, &y, &b, &LMConfig::default()).unwrap();
        for (i, seg) in mode.segments.iter().enumerate() {
            assert!(seg.loss < 1e-10, "k={k} seg {i} loss {}", seg.loss);
            if i > 0 {
                let prev = &mode.segments[i - 1];
                let (v, s) = m.value_and_slope(&seg.params.values, 0.0);
                assert!((v - prev.exit.0).abs() < 1e-9);
                assert!((s - prev.exit.1).abs() < 1e-9);
            }
        }
        for (i, seg) in mode.segments.iter().enumerate() {
            let (lo, hi) = seg.range;
            let anchor = segment_anchor(&x, &b, i);
            let xs: Vec<f64> = x[lo..hi].iter().map(|&v| v - anchor).collect();
            let oracle = poly_ls(&xs, &y[lo..hi]);
            for (a, b) in oracle.iter().zip(&seg.params.values) {
                assert!((a - b).abs() < 1e-7 * a.abs().max(1.0), "k={k} seg {i} {oracle:?}");
            }
        }
    }
}

#[test]
fn flat_data_fits_the_zero_function() {
    let m = preset("sin6").unwrap();
    let x = grid(90, 0.0, 9.0);
    let y = vec![0.0; 90];
    let mode = fit_mode(&m, &x, &y, &boundaries(90, 6), &LMConfig::default()).unwrap();
    for seg in &mode.segments {
        assert!(seg.loss < 1e-20);
    }
}

#[test]
fn trend_fits() {
    let x = grid(200, -3.0, 3.0);
    let lin: Vec<f64> = x.iter().map(|&t| -1.5 * t + 4.0).collect();
    let fit = fit_trend(&preset("linear").unwrap(), &x, &lin, &LMConfig::default()).unwrap();
    // local coordinates start at x[0]
    let (a, b) = (fit.params.values[0], fit.params.values[1]);
    assert!((a + 1.5).abs() < 1e-8);
    assert!((b - (-1.5 * x[0] + 4.0)).abs() < 1e-8);

    let flat = vec![0.0; 200];
    let fit = fit_trend(&preset("cubic").unwrap(), &x, &flat, &LMConfig::default()).unwrap();
    assert!(fit.loss < 1e-12);

    let w = 2.0 * std::f64::consts::PI / 1.7;
    let seasonal: Vec<f64> = x.iter().map(|&t| 2.0 * (w * t + 0.4).sin() + 0.3 * t).collect();
    let m = preset("sin6").unwrap();
    let fit = fit_trend(&m, &x, &seasonal, &LMConfig::default()).unwrap();
    let b0 = fit.params.values[2].abs();
    assert!((b0 - w).abs() < 0.01 * w, "frequency {b0} vs {w}");
}

#[test]
fn forward_fit_is_deterministic() {
    let m = preset("sin6").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = grid(300, 0.0, 30.0);
    let y: Vec<f64> = x
        .iter()
        .map(|&t| (0.8 * t).sin() + 0.1 * t + rng.random_range(-0.2..0.2))
        .collect();
    let b = boundaries(300, 12);
    let a = fit_mode(&m, &x, &y, &b, &LMConfig::default()).unwrap();
    let c = fit_mode(&m, &x, &y, &b, &LMConfig::default()).unwrap();
    assert_eq!(format!("{a:?}"), format!("{c:?}"));
}
