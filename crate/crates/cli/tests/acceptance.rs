//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nlsysid_core::bmsb::{estimate_bmsb, BmsbConfig, BmsbEstimate};
use nlsysid_core::bounds::{
    lse_burn_in, lse_error_bound, lse_error_bound_unchecked, sme_diameter_bound, sme_failure_prob,
    sme_m_choice, BoundInputs,
};
use nlsysid_core::experiments::{canned, run_sweep, ExperimentConfig, SweepResult};
use nlsysid_core::lse::solve_lse;
use nlsysid_core::model::{linear_scalar_model, simulate, ControlPolicy, SystemModel};
use nlsysid_core::stochastics::{NoiseSpec, SeedStream};
use nlsysid_geometry::{diameter, lp_maximize, width, HPolytope, Halfspace, LpStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: usize, title: &str, started: Instant, o: &Outcome) {
    // Written straight to the stream so the line survives output capture.
    let _ = writeln!(
        std::io::stderr(),
        "acceptance criterion {n:>2} [{}] {title}: {} ({:.1} s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        started.elapsed().as_secs_f64()
    );
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn timed_sweep(cfg: &ExperimentConfig) -> (SweepResult, f64) {
    let t0 = Instant::now();
    let r = single_thread(|| run_sweep(cfg, None)).unwrap();
    (r, t0.elapsed().as_secs_f64())
}

fn criterion_1() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for id in ["fig1a", "fig1b"] {
        let (r, secs) = timed_sweep(&canned(id).unwrap());
        let slope = r.lse_slope.unwrap_or(f64::NAN);
        let ok = (-0.65..=-0.35).contains(&slope) && secs < 120.0 && r.failed_trials.is_empty();
        pass &= ok;
        parts.push(format!("{id} slope {slope:.3} in {secs:.1} s single-threaded"));
    }
    Outcome { pass, detail: parts.join("; ") }
}

/// Runs the set-membership sweeps once; criteria 2-4 all read them.
fn sme_runs() -> Vec<(&'static str, SweepResult, f64)> {
    ["fig2a", "fig2b"]
        .into_iter()
        .map(|id| {
            let mut cfg = canned(id).unwrap();
            cfg.sweep.audit_every_step = true;
            let (r, secs) = timed_sweep(&cfg);
            (id, r, secs)
        })
        .collect()
}

fn criterion_2(runs: &[(&str, SweepResult, f64)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (id, r, secs) in runs {
        let slope = r.sme_slope.unwrap_or(f64::NAN);
        pass &= (-1.25..=-0.75).contains(&slope) && *secs < 300.0 && r.failed_trials.is_empty();
        parts.push(format!("{id} slope {slope:.3} in {secs:.1} s single-threaded"));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn criterion_3(runs: &[(&str, SweepResult, f64)]) -> Outcome {
    let (mut checked, mut failed) = (0u64, 0u64);
    for (_, r, _) in runs {
        for rec in &r.records {
            checked += 1;
            if rec.truth_member != Some(true) {
                failed += 1;
            }
        }
        let n = r.nesting.unwrap();
        checked += n.steps_checked;
        failed += n.truth_failures;
    }
    Outcome {
        pass: failed == 0 && checked > 0,
        detail: format!("{failed} exclusions over {checked} audit points"),
    }
}

fn criterion_4(runs: &[(&str, SweepResult, f64)]) -> Outcome {
    let (mut steps, mut bad, mut worst) = (0u64, 0u64, 0.0_f64);
    for (_, r, _) in runs {
        let n = r.nesting.unwrap();
        steps += n.steps_checked;
        bad += n.violations;
        worst = worst.max(n.max_increase);
    }
    Outcome {
        pass: bad == 0 && steps > 0,
        detail: format!("{bad} increases over {steps} steps (largest change {worst:.2e})"),
    }
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nlsysid")).args(args).output().unwrap()
}

fn criterion_5() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for id in ["fig1a", "fig1b"] {
        let cfg = canned(id).unwrap();
        let path = dir.path().join(format!("{id}.toml"));
        fs::write(&path, cfg.to_toml().unwrap()).unwrap();
        let out = dir.path().join(id);
        let o = cli(&["bmsb-estimate", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        if !o.status.success() {
            return Outcome { pass: false, detail: format!("bmsb-estimate failed: {}", String::from_utf8_lossy(&o.stderr)) };
        }
        let est: BmsbEstimate = serde_json::from_str(&fs::read_to_string(out.join("bmsb.json")).unwrap()).unwrap();
        let model = cfg.build_model().unwrap();
        let d = model.dims();
        let w = &cfg.noise.disturbance;
        let inp = BoundInputs::from_estimate(d.n_x, d.n_phi, w.std_dev(), 0.05, w.tightness_coefficient(), &est);
        let burn = lse_burn_in(&inp).unwrap();
        let spec = model.theta.spectral_norm();

        let (mut held, mut checked_pts, mut held_unchecked) = (0, 0, 0);
        for batch in 0..20u64 {
            let mut c = cfg.clone();
            c.seed = 1000 + batch;
            c.bmsb.estimate = false;
            let r = run_sweep(&c, Some(est.clone())).unwrap();
            let mut ok = true;
            let mut ok_unchecked = true;
            for a in &r.aggregates {
                let mean = a.lse_mean.unwrap() * spec;
                if a.t as u64 >= burn {
                    checked_pts += 1;
                    ok &= mean <= lse_error_bound(&inp, a.t as u64).unwrap();
                }
                ok_unchecked &= mean <= lse_error_bound_unchecked(&inp, a.t as u64);
            }
            held += ok as usize;
            held_unchecked += ok_unchecked as usize;
        }
        pass &= held >= 19;
        let vacuous = if checked_pts == 0 { ", vacuous: no grid T reaches the burn-in" } else { "" };
        parts.push(format!(
            "{id}: s={:.3e} p={} burn-in {burn}, dominated in {held}/20 batches over {checked_pts} points{vacuous}; \
             curve evaluated below burn-in dominates in {held_unchecked}/20",
            est.s_phi, est.p_phi
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn criterion_6() -> Outcome {
    let mut worst = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..100u64 {
        let theta = rng.random_range(-0.95..0.95);
        let len = rng.random_range(10..2000);
        let m = linear_scalar_model(theta).unwrap();
        let p = ControlPolicy::open_loop(NoiseSpec::uniform(1, 1.0));
        let tr = simulate(&m, &p, &NoiseSpec::uniform(1, 1.0), len, &SeedStream::new(i)).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for t in 0..len {
            num += tr.states[t] * tr.states[t + 1];
            den += tr.states[t] * tr.states[t];
        }
        let got = solve_lse(&tr, &m).unwrap().estimate.get(0, 0);
        worst = worst.max((got - num / den).abs());
    }
    Outcome { pass: worst <= 1e-12, detail: format!("max deviation {worst:.2e} over 100 trajectories") }
}

fn random_polygon(rng: &mut ChaCha8Rng) -> HPolytope {
    loop {
        let n = rng.random_range(3..12);
        let hs = (0..n)
            .map(|_| {
                let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let scale = rng.random_range(0.5..2.0);
                Halfspace::new(vec![scale * a.cos(), scale * a.sin()], scale * rng.random_range(0.2..1.5))
            })
            .collect();
        let mut p = HPolytope::new(2, hs).unwrap();
        if p.check_bounded().unwrap_or(false) {
            return p;
        }
    }
}

/// Every feasible pairwise intersection of constraint lines.
fn brute_vertices(p: &HPolytope) -> Vec<[f64; 2]> {
    let c = p.constraints();
    let mut out = Vec::new();
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            let (a, b) = (&c[i], &c[j]);
            let det = a.normal[0] * b.normal[1] - a.normal[1] * b.normal[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = (a.offset * b.normal[1] - b.offset * a.normal[1]) / det;
            let y = (a.normal[0] * b.offset - b.normal[0] * a.offset) / det;
            if c.iter().all(|h| h.normal[0] * x + h.normal[1] * y <= h.offset + 1e-9) {
                out.push([x, y]);
            }
        }
    }
    out
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut lp_err, mut prune_mismatch, mut sandwich_bad) = (0.0_f64, 0u64, 0u64);
    for _ in 0..200 {
        let p = random_polygon(&mut rng);
        let verts = brute_vertices(&p);
        for _ in 0..5 {
            let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let lp = lp_maximize(&c, &p).unwrap();
            assert_eq!(lp.status, LpStatus::Optimal);
            let brute = verts.iter().map(|v| c[0] * v[0] + c[1] * v[1]).fold(f64::MIN, f64::max);
            lp_err = lp_err.max((lp.value - brute).abs());
        }
        let pruned = p.prune().unwrap();
        for _ in 0..10_000 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            if p.contains(&x).unwrap() != pruned.contains(&x).unwrap() {
                prune_mismatch += 1;
            }
        }
        let exact = verts
            .iter()
            .flat_map(|a| verts.iter().map(move |b| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()))
            .fold(0.0, f64::max);
        let d = diameter(&p, 200, &mut rng).unwrap();
        let mut sampled = 0.0_f64;
        for _ in 0..200 {
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            sampled = sampled.max(width(&p, &[a.cos(), a.sin()]).unwrap());
        }
        if sampled > exact + 1e-9 || (d.value - exact).abs() > 1e-7 {
            sandwich_bad += 1;
        }
    }
    Outcome {
        pass: lp_err <= 1e-7 && prune_mismatch == 0 && sandwich_bad == 0,
        detail: format!(
            "LP vs brute force max error {lp_err:.2e}; {prune_mismatch} pruning mismatches over 2e6 probes; {sandwich_bad} sandwich violations"
        ),
    }
}

fn criterion_8() -> Outcome {
    let text = include_str!("../../core/tests/data/bounds_reference.csv");
    let mut worst = 0.0_f64;
    let mut int_mismatch = 0;
    let mut n = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let x = |i: usize| f[i].parse::<f64>().unwrap();
        let u = |i: usize| f[i].parse::<u64>().unwrap();
        let inp = BoundInputs {
            n_x: u(0) as usize,
            n_phi: u(1) as usize,
            s_phi: x(2),
            p_phi: x(3),
            b_bar_phi: x(4),
            b_phi: x(5),
            sigma_w: x(6),
            confidence: x(7),
            c_w: x(8),
        };
        let (t_lse, t_sme, delta) = (u(9), u(10), x(11));
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        int_mismatch += (lse_burn_in(&inp).unwrap() != u(12)) as usize;
        worst = worst.max(rel(lse_error_bound(&inp, t_lse).unwrap(), x(13)));
        let m = sme_m_choice(&inp, t_sme).unwrap();
        int_mismatch += (m != u(14)) as usize;
        worst = worst.max(rel(sme_diameter_bound(&inp, t_sme, u(14)).unwrap(), x(15)));
        worst = worst.max(rel(sme_failure_prob(&inp, t_sme, u(14), delta).unwrap(), x(16)));
        n += 1;
    }
    Outcome {
        pass: n == 50 && worst <= 1e-9 && int_mismatch == 0,
        detail: format!("{n} points, max relative error {worst:.2e}, {int_mismatch} integer mismatches"),
    }
}

fn criterion_9() -> Outcome {
    let specs = [
        NoiseSpec::uniform(1, 1.0),
        NoiseSpec::uniform(1, 0.5),
        NoiseSpec::truncated_gaussian(1, 0.5, 1.0),
        NoiseSpec::truncated_gaussian(1, 1.0, 1.0),
        NoiseSpec::truncated_gaussian(1, 2.0, 2.0),
    ];
    let n = 1_000_000;
    let mut worst_ratio = f64::INFINITY;
    for (k, spec) in specs.iter().enumerate() {
        let mut rng = SeedStream::new(9).child(k).rng();
        let x: Vec<f64> = (0..n).map(|_| spec.sample(&mut rng).unwrap()[0]).collect();
        let c = spec.tightness_coefficient();
        for frac in [0.05, 0.1, 0.2] {
            let ell = frac * spec.bound;
            let freq = x.iter().filter(|v| **v >= spec.bound - ell).count() as f64 / n as f64;
            worst_ratio = worst_ratio.min(freq / (c * ell));
        }
    }
    Outcome {
        pass: worst_ratio >= 0.8,
        detail: format!("smallest freq/(c_w l) = {worst_ratio:.3} over 5 specs x 3 levels (need >= 0.8)"),
    }
}

fn scalar_exact(x: f64, s: f64) -> f64 {
    let c = 0.9 * x;
    1.0 - ((s - c).min(1.0) - (-s - c).max(-1.0)).max(0.0) / 2.0
}

fn provenance_ok(e: &BmsbEstimate, model: &str, cfg: &BmsbConfig) -> bool {
    let p = &e.provenance;
    p.model == model
        && p.horizon == cfg.horizon
        && p.n_traj == cfg.n_traj
        && p.n_dirs == cfg.n_dirs
        && p.n_mc == cfg.n_mc
        && p.points_visited == cfg.horizon * cfg.n_traj
        && !p.label.is_empty()
        && e.profile.len() == cfg.s_grid.len()
}

fn criterion_10() -> Outcome {
    let m = linear_scalar_model(0.9).unwrap();
    let pol = ControlPolicy::open_loop(NoiseSpec::uniform(1, 1.0));
    let w = NoiseSpec::uniform(1, 1.0);
    let cfg = BmsbConfig { n_mc: 2000, ..Default::default() };
    let stream = SeedStream::new(10).child("bmsb");
    let est = estimate_bmsb(&m, &pol, &w, &cfg, &stream).unwrap();
    let mut exact = 1.0_f64;
    for i in 0..cfg.n_traj {
        let tr = simulate(&m, &pol, &w, cfg.horizon, &stream.child("traj").child(i)).unwrap();
        for t in 0..cfg.horizon {
            exact = exact.min(scalar_exact(tr.state(t)[0], est.s_phi));
        }
    }
    let sd = (exact * (1.0 - exact) / cfg.n_mc as f64).sqrt();
    let dev = (est.p_phi - exact).abs() / sd;
    let mut pass = dev <= 3.0 && provenance_ok(&est, "linear-scalar", &cfg);
    let mut parts = vec![format!(
        "scalar s={:.4} p={:.4} vs exact {exact:.4} ({dev:.2} sd)",
        est.s_phi, est.p_phi
    )];
    for id in ["fig1a", "fig1c"] {
        let c = canned(id).unwrap();
        let model: SystemModel = c.build_model().unwrap();
        let b = c.bmsb.to_config();
        let e = estimate_bmsb(&model, &c.build_policy().unwrap(), &c.noise.disturbance, &b, &SeedStream::new(0).child("bmsb")).unwrap();
        let ok = e.p_phi > 0.0 && e.p_phi < 1.0 && provenance_ok(&e, &model.name, &b);
        pass &= ok;
        parts.push(format!("{} s={:.3e} p={}", model.name, e.s_phi, e.p_phi));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn digest_dir(dir: &Path) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| {
            let h = Sha256::digest(fs::read(e.path()).unwrap());
            (e.file_name().to_string_lossy().into_owned(), hex::encode(h))
        })
        .collect();
    out.sort();
    out
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = canned("fig3b").unwrap();
    cfg.name = Some("det".into());
    cfg.sweep.t_grid = vec![100, 300, 1000];
    cfg.sweep.trials = 3;
    cfg.sme.projections = vec![["theta1".into(), "theta2".into()]];
    cfg.bmsb.n_dirs = 100;
    cfg.bmsb.n_traj = 5;
    cfg.simulate.horizon = 500;
    cfg.bounds.bmsb_file = Some("run/bmsb.json".into());
    let cfg_path = dir.path().join("det.toml");
    fs::write(&cfg_path, cfg.to_toml().unwrap()).unwrap();
    let c = cfg_path.to_str().unwrap();

    let commands: [&[&str]; 6] = [
        &["bmsb-estimate", "--config", c],
        &["simulate", "--config", c],
        &["lse-sweep", "--config", c],
        &["sme-sweep", "--config", c, "--format", "json"],
        &["bounds", "--config", c],
        &["reproduce", "fig3c"],
    ];
    let mut digests = Vec::new();
    let mut failures = Vec::new();
    for (rep, threads) in [(0, "1"), (1, "4")] {
        let out = dir.path().join(format!("rep{rep}"));
        for args in commands {
            // Later commands read the estimate bmsb-estimate wrote in the same run.
            let o = Command::new(env!("CARGO_BIN_EXE_nlsysid"))
                .args(args)
                .args(["--out", out.to_str().unwrap(), "--seed", "5"])
                .env("NLSYSID_THREADS", threads)
                .output()
                .unwrap();
            if !o.status.success() {
                failures.push(format!("{} exited {:?}", args[0], o.status.code()));
            }
            if args[0] == "bmsb-estimate" {
                let run = dir.path().join("run");
                fs::create_dir_all(&run).unwrap();
                fs::copy(out.join("bmsb.json"), run.join("bmsb.json")).unwrap();
            }
        }
        digests.push(digest_dir(&out));
    }
    let same = digests[0] == digests[1];
    Outcome {
        pass: failures.is_empty() && same && digests[0].len() >= 10,
        detail: format!(
            "{} files from 6 subcommands, identical sha256 across two runs (1 and 4 threads): {same}{}",
            digests[0].len(),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join(", ")) }
        ),
    }
}

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    let mut run = |n: usize, title: &str, f: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let o = f();
        report(n, title, t0, &o);
        if !o.pass {
            failed.push(n);
        }
    };
    run(1, "least-squares rate", &mut criterion_1);
    let t0 = Instant::now();
    let sme = sme_runs();
    let _ = writeln!(std::io::stderr(), "acceptance: set-membership sweeps took {:.1} s", t0.elapsed().as_secs_f64());
    run(2, "set-membership rate", &mut || criterion_2(&sme));
    run(3, "truth membership", &mut || criterion_3(&sme));
    run(4, "nesting", &mut || criterion_4(&sme));
    run(5, "least-squares bound dominance", &mut criterion_5);
    run(6, "scalar least-squares oracle", &mut criterion_6);
    run(7, "geometry oracles", &mut criterion_7);
    run(8, "bound formula fidelity", &mut criterion_8);
    run(9, "tightness coefficients", &mut criterion_9);
    run(10, "small-ball estimation", &mut criterion_10);
    run(11, "determinism", &mut criterion_11);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
