use nlsysid_core::bmsb::{estimate_bmsb, log_grid, mc_smallball_prob, BmsbConfig};
use nlsysid_core::model::{linear_scalar_model, simulate, ControlPolicy, Feedback, SystemModel};
use nlsysid_core::stochastics::{NoiseSpec, SeedStream};
use nlsysid_core::CoreError;

/// Exact `P(|0.9 x + w| >= s)` for `w ~ U[-1, 1]`.
fn scalar_exact(x: f64, s: f64) -> f64 {
    let c = 0.9 * x;
    let lo = (-s - c).max(-1.0);
    let hi = (s - c).min(1.0);
    1.0 - (hi - lo).max(0.0) / 2.0
}

fn scalar() -> (SystemModel, ControlPolicy, NoiseSpec) {
    (
        linear_scalar_model(0.9).unwrap(),
        ControlPolicy::open_loop(NoiseSpec::uniform(1, 1.0)),
        NoiseSpec::uniform(1, 1.0),
    )
}

#[test]
fn degenerate_radii() {
    let (m, p, w) = scalar();
    let s = SeedStream::new(0);
    assert_eq!(mc_smallball_prob(&m, &p, &w, (&[0.3], &[0.0]), &[1.0], 0.0, 500, &s).unwrap(), 1.0);
    assert_eq!(mc_smallball_prob(&m, &p, &w, (&[0.3], &[0.0]), &[1.0], 1e18, 500, &s).unwrap(), 0.0);
    assert!(mc_smallball_prob(&m, &p, &w, (&[0.3], &[0.0]), &[2.0], 0.1, 500, &s).is_err());
}

#[test]
fn scalar_probability_within_binomial_band() {
    let (m, p, w) = scalar();
    let n = 4000;
    for (x, s) in [(0.0, 0.05), (0.5, 0.3), (-1.2, 0.8), (2.0, 0.5)] {
        let exact = scalar_exact(x, s);
        let sd = (exact * (1.0 - exact) / n as f64).sqrt();
        let est: Vec<f64> = (0..20)
            .map(|rep| {
                let st = SeedStream::new(rep).child("probe");
                mc_smallball_prob(&m, &p, &w, (&[x], &[0.0]), &[1.0], s, n, &st).unwrap()
            })
            .collect();
        // A 3σ excursion has probability 0.27% per repetition; allow one.
        let outside = est.iter().filter(|e| (*e - exact).abs() > 3.0 * sd + 1e-12).count();
        assert!(outside <= 1, "x={x} s={s}: {outside} of 20 outside the band");
        let mean = est.iter().sum::<f64>() / 20.0;
        assert!((mean - exact).abs() <= 3.0 * sd / 20f64.sqrt() + 1e-12, "x={x} s={s}: mean {mean}");
    }
}

#[test]
fn scalar_estimate_against_exact_minimum() {
    let (m, p, w) = scalar();
    let cfg = BmsbConfig {
        horizon: 20,
        n_traj: 5,
        n_dirs: 4,
        n_mc: 4000,
        s_grid: vec![0.05],
        max_points: 2000,
    };
    let stream = SeedStream::new(3).child("bmsb");
    let est = estimate_bmsb(&m, &p, &w, &cfg, &stream).unwrap();
    assert_eq!(est.s_phi, 0.05);
    assert!(est.p_phi >= 0.9);
    let mut exact = 1.0_f64;
    for i in 0..cfg.n_traj {
        let tr = simulate(&m, &p, &w, cfg.horizon, &stream.child("traj").child(i)).unwrap();
        for t in 0..cfg.horizon {
            exact = exact.min(scalar_exact(tr.state(t)[0], 0.05));
        }
    }
    let sd = (exact * (1.0 - exact) / cfg.n_mc as f64).sqrt();
    assert!((est.p_phi - exact).abs() <= 3.0 * sd, "{} vs {exact}", est.p_phi);
}

#[test]
fn profile_is_monotone_and_reproducible() {
    let m = SystemModel::builtin("pendulum").unwrap();
    let p = ControlPolicy::closed_loop(Feedback::damping(2.0), NoiseSpec::uniform(1, 1.0));
    let w = NoiseSpec::uniform(2, 1.0);
    let cfg = BmsbConfig {
        horizon: 20,
        n_traj: 4,
        n_dirs: 100,
        n_mc: 100,
        ..Default::default()
    };
    let s = SeedStream::new(1).child("bmsb");
    let a = estimate_bmsb(&m, &p, &w, &cfg, &s).unwrap();
    let b = estimate_bmsb(&m, &p, &w, &cfg, &s).unwrap();
    assert_eq!(a, b);
    assert!(a.p_phi > 0.0 && a.p_phi < 1.0);
    assert!(a.profile.windows(2).all(|q| q[1].1 <= q[0].1));
    assert_eq!(a.provenance.points_visited, 80);
    assert_eq!(a.provenance.model, "pendulum");
    assert!(a.b_phi > 0.0 && a.b_bar_phi > 0.0 && a.b_bar_phi <= a.b_phi * a.b_phi);
}

#[test]
fn radius_above_feature_ceiling_fails() {
    let (m, p, w) = scalar();
    let cfg = BmsbConfig {
        horizon: 10,
        n_traj: 2,
        n_dirs: 2,
        n_mc: 50,
        s_grid: log_grid(100.0, 1000.0, 3),
        max_points: 2000,
    };
    let err = estimate_bmsb(&m, &p, &w, &cfg, &SeedStream::new(0)).unwrap_err();
    assert!(matches!(err, CoreError::BmsbEstimation { .. }), "{err}");
}

#[test]
fn scalar_directions_do_not_matter() {
    let (m, p, w) = scalar();
    let base = BmsbConfig {
        horizon: 20,
        n_traj: 3,
        n_dirs: 8,
        n_mc: 200,
        ..Default::default()
    };
    let s = SeedStream::new(5);
    let a = estimate_bmsb(&m, &p, &w, &base, &s).unwrap();
    let b = estimate_bmsb(&m, &p, &w, &BmsbConfig { n_dirs: 16, ..base }, &s).unwrap();
    assert_eq!(a.profile, b.profile);
}

#[test]
fn subsampling_is_recorded() {
    let (m, p, w) = scalar();
    let cfg = BmsbConfig {
        horizon: 50,
        n_traj: 4,
        n_dirs: 2,
        n_mc: 50,
        max_points: 60,
        ..Default::default()
    };
    let e = estimate_bmsb(&m, &p, &w, &cfg, &SeedStream::new(2)).unwrap();
    assert!(e.provenance.subsampled);
    assert_eq!((e.provenance.points_visited, e.provenance.points_used), (200, 60));
}

