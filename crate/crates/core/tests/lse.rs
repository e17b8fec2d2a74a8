use nalgebra::{DMatrix, DVector};
use nlsysid_core::lse::{estimation_error, residual_sum_of_squares, row_system, solve_lse, LseResult};
use nlsysid_core::model::{linear_scalar_model, simulate, ControlPolicy, Feedback, SystemModel};
use nlsysid_core::stochastics::{NoiseSpec, SeedStream};
use nlsysid_core::CoreError;
use proptest::prelude::*;
use rand::Rng;

fn pendulum_traj(seed: u64, len: usize, w: f64) -> (SystemModel, nlsysid_core::model::Trajectory) {
    let m = SystemModel::builtin("pendulum").unwrap();
    let p = ControlPolicy::closed_loop(Feedback::damping(2.0), NoiseSpec::uniform(1, 1.0));
    let tr = simulate(&m, &p, &NoiseSpec::uniform(2, w), len, &SeedStream::new(seed)).unwrap();
    (m, tr)
}

#[test]
fn noiseless_pendulum_is_recovered() {
    let (m, tr) = pendulum_traj(5, 200, 1e-300);
    let r = solve_lse(&tr, &m).unwrap();
    for (row, col) in m.theta.unknown_entries() {
        let err = (r.estimate.get(row, col) - m.theta.get(row, col)).abs();
        assert!(err <= 1e-8, "entry ({row}, {col}) off by {err}");
    }
    assert!(!r.used_pseudo_inverse());
}

#[test]
fn known_entries_are_copied() {
    let (m, tr) = pendulum_traj(6, 300, 1.0);
    let r = solve_lse(&tr, &m).unwrap();
    for i in 0..2 {
        for j in 0..4 {
            if !m.theta.is_unknown(i, j) {
                assert_eq!(r.estimate.get(i, j).to_bits(), m.theta.get(i, j).to_bits());
            }
        }
    }
}

#[test]
fn estimation_error_examples() {
    let m = SystemModel::builtin("pendulum").unwrap();
    let exact = LseResult { estimate: m.theta.clone(), rows: vec![], samples: 0 };
    assert_eq!(estimation_error(&exact, &m), (0.0, 0.0));

    let mut vals = m.theta.unknown_values(1);
    vals[1] += 0.1;
    let off = LseResult {
        estimate: m.theta.with_row_unknowns(1, &vals).unwrap(),
        rows: vec![],
        samples: 0,
    };
    let (abs, norm) = estimation_error(&off, &m);
    assert!((abs - 0.1).abs() < 1e-12);
    assert!((norm - 0.1 / m.theta.spectral_norm()).abs() < 1e-15);
}

#[test]
fn too_few_samples_is_an_error() {
    let (m, tr) = pendulum_traj(1, 1, 1.0);
    assert!(matches!(solve_lse(&tr, &m), Err(CoreError::InsufficientData { .. })));
}

/// All unknown entries solved as one stacked least-squares problem.
fn joint_solution(m: &SystemModel, tr: &nlsysid_core::model::Trajectory) -> Vec<f64> {
    let entries = m.theta.unknown_entries();
    let n_x = m.dims().n_x;
    let mut a = DMatrix::zeros(tr.len * n_x, entries.len());
    let mut y = DVector::zeros(tr.len * n_x);
    for t in 0..tr.len {
        let phi = tr.feature(t);
        for r in 0..n_x {
            let mut target = tr.state(t + 1)[r];
            for (c, p) in phi.iter().enumerate() {
                if !m.theta.is_unknown(r, c) {
                    target -= m.theta.get(r, c) * p;
                }
            }
            y[t * n_x + r] = target;
            for (k, &(er, ec)) in entries.iter().enumerate() {
                if er == r {
                    a[(t * n_x + r, k)] = phi[ec];
                }
            }
        }
    }
    a.svd(true, true).solve(&y, 1e-14).unwrap().iter().copied().collect()
}

#[test]
fn rows_decouple() {
    let (m, tr) = pendulum_traj(9, 500, 1.0);
    let r = solve_lse(&tr, &m).unwrap();
    let joint = joint_solution(&m, &tr);
    for (k, (row, col)) in m.theta.unknown_entries().into_iter().enumerate() {
        let e = r.estimate.get(row, col);
        assert!((e - joint[k]).abs() <= 1e-8 * e.abs().max(1.0), "{e} vs {}", joint[k]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn scalar_estimate_is_the_ratio(seed in any::<u64>(), theta in -0.95f64..0.95, len in 5usize..400) {
        let m = linear_scalar_model(theta).unwrap();
        let p = ControlPolicy::open_loop(NoiseSpec::uniform(1, 1.0));
        let tr = simulate(&m, &p, &NoiseSpec::uniform(1, 1.0), len, &SeedStream::new(seed)).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for t in 0..len {
            num += tr.states[t] * tr.states[t + 1];
            den += tr.states[t] * tr.states[t];
        }
        let got = solve_lse(&tr, &m).unwrap().estimate.get(0, 0);
        prop_assert!((got - num / den).abs() <= 1e-12 * (num / den).abs().max(1.0));
    }

    #[test]
    fn estimate_is_stationary(seed in any::<u64>()) {
        let (m, tr) = pendulum_traj(seed, 400, 1.0);
        let r = solve_lse(&tr, &m).unwrap();
        let best = residual_sum_of_squares(&tr, r.estimate.entries());
        let mut rng = SeedStream::new(seed).child("probe").rng();
        for _ in 0..100 {
            let mut th = r.estimate.entries().clone();
            for (i, j) in m.theta.unknown_entries() {
                th[(i, j)] += rng.random_range(-1e-3..1e-3);
            }
            prop_assert!(best <= residual_sum_of_squares(&tr, &th) * (1.0 + 1e-12));
        }
        for fit in &r.rows {
            let sys = row_system(&tr, &m, fit.row);
            let th = DVector::from_vec(r.estimate.unknown_values(fit.row));
            let resid = &sys.gram * th - &sys.cross;
            prop_assert!(resid.norm() <= 1e-8 * sys.cross.norm());
        }
    }
}
