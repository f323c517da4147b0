use knotfit::beam::{solve_beam, BeamSpec};
use knotfit::config::RunConfig;
use knotfit::diagnostics::{convergence_length, posterior_summary};
use knotfit::experiment::{replica_dir, run_experiment};
use knotfit::generate::generate_example1;
use knotfit::{build_grid, BasisKind, KnotModel, PriorSpec, Problem, RunTrace, SamplerKind, SamplerSettings};

fn small_problem(basis: BasisKind) -> Problem {
    let data = generate_example1(60, 4).unwrap();
    let grid = build_grid(-2.0, 2.0, 31).unwrap();
    Problem::regression(grid, basis, PriorSpec::uniform(2, 31, -10.0, 10.0), data).unwrap()
}

fn settings(kind: SamplerKind, steps: u64) -> SamplerSettings {
    SamplerSettings {
        t0: 300,
        n_temperatures: 3,
        ..SamplerSettings::for_kind(kind, steps)
    }
}

#[test]
fn every_sampler_is_reproducible_and_respects_bounds() {
    let p = small_problem(BasisKind::Linear);
    for kind in [
        SamplerKind::Rjmcmc,
        SamplerKind::ApRjmcmc,
        SamplerKind::PtRjmcmc,
        SamplerKind::ApPtRjmcmc,
    ] {
        let s = settings(kind, 3000);
        let a = knotfit::run_sampler(&p, &s, 11).unwrap();
        let b = knotfit::run_sampler(&p, &s, 11).unwrap();
        assert_eq!(a.log_liks(), b.log_liks(), "{kind:?}");
        assert_eq!(a.len(), 300);
        assert_eq!(a.meta.total_steps, 3000);
        assert!(a.ns().iter().all(|&n| (2..=31).contains(&n)));
        assert!(a.curves().flatten().all(|v| (-10.0..=10.0).contains(v)));
        let c = &a.meta.counters;
        assert_eq!(c.attempts.iter().sum::<u64>(), 3000, "{kind:?}");
        assert_eq!(a.meta.temperatures.len(), if kind.tempered() { 3 } else { 1 });
    }
}

#[test]
fn trace_round_trips_through_disk() {
    let p = small_problem(BasisKind::Constant);
    let t = knotfit::run_sampler(&p, &settings(SamplerKind::ApRjmcmc, 2000), 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    t.write_dir(dir.path()).unwrap();
    let back = RunTrace::read_dir(dir.path()).unwrap();
    assert_eq!(back.log_liks(), t.log_liks());
    assert_eq!(back.ns(), t.ns());
    assert_eq!(back.meta, t.meta);
    assert!(back.curves().eq(t.curves()));
}

#[test]
fn identical_traces_converge_at_first_monitor() {
    let p = small_problem(BasisKind::Linear);
    let t = knotfit::run_sampler(&p, &settings(SamplerKind::Rjmcmc, 4000), 8).unwrap();
    let r = convergence_length(&t, &t, 1000);
    assert_eq!(r.monitor_steps, vec![1000, 2000, 3000, 4000]);
    assert_eq!(r.convergence_length, Some(1000));
}

#[test]
fn summary_is_consistent_with_trace() {
    let p = small_problem(BasisKind::Linear);
    let t = knotfit::run_sampler(&p, &settings(SamplerKind::ApRjmcmc, 4000), 1).unwrap();
    let s = posterior_summary(&t, 0.5, 16, (-10.0, 10.0)).unwrap();
    assert_eq!(s.retained, 200);
    for j in 0..31 {
        assert_eq!(s.column(j).iter().sum::<u64>(), 200);
        let col = &t.column(j)[200..];
        let mean = col.iter().sum::<f64>() / 200.0;
        assert!((s.mean[j] - mean).abs() < 1e-9);
    }
    let total: f64 = s.n_distribution().values().sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn beam_matches_cantilever_closed_forms() {
    let (l, ei) = (10.0, 5e4);
    let spec = BeamSpec::cantilever(l, 40, ei);
    let uniform = solve_beam(&spec, |_| 2.0).unwrap();
    assert!((uniform.deflection_at(&spec, l).abs() - 2.0 * l.powi(4) / (8.0 * ei)).abs() < 1e-9);
    // Linearly increasing load q0 * x / L: tip deflection 11 q0 L^4 / (120 EI).
    let ramp = solve_beam(&spec, |x| 3.0 * x / l).unwrap();
    assert!((ramp.deflection_at(&spec, l).abs() - 11.0 * 3.0 * l.powi(4) / (120.0 * ei)).abs() < 1e-9);
    assert_eq!(uniform.deflection_at(&spec, 0.0), 0.0);
}

#[test]
fn likelihood_of_perfect_fit() {
    let grid = build_grid(0.0, 1.0, 11).unwrap();
    let data = knotfit::Dataset::new(vec![0.25], vec![1.0], 0.3).unwrap();
    let p = Problem::regression(grid, BasisKind::Linear, PriorSpec::uniform(2, 11, -5.0, 5.0), data).unwrap();
    let m = KnotModel::new(vec![0, 10], vec![1.0, 1.0], p.grid()).unwrap();
    let want = -0.5 * (2.0 * std::f64::consts::PI * 0.09).ln();
    assert!((p.log_likelihood(&m).unwrap() - want).abs() < 1e-12);
}

#[test]
fn experiment_writes_replicas_and_is_thread_count_invariant() {
    let text = r#"{
        "schema_version": 1,
        "sampler": {"kind": "ap-pt-rjmcmc", "steps": 2000, "t0": 300, "n_temperatures": 3},
        "basis": "linear",
        "grid": {"x_lo": -2, "x_hi": 2, "n_points": 21},
        "prior": {"count": {"uniform": {"n_min": 2, "n_max": 21}}, "a_min": -10, "a_max": 10},
        "data": {"generator": {"kind": "example1", "k": 40, "seed": 2}},
        "monitor_stride": 500,
        "density_bins": 10,
        "replicas": 3,
        "output_dir": "unused"
    }"#;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut reports = Vec::new();
    for (dir, threads) in dirs.iter().zip([1, 3]) {
        let mut cfg = RunConfig::from_json(text).unwrap();
        cfg.output_dir = dir.path().to_path_buf();
        reports.push(run_experiment(&cfg, threads).unwrap());
    }
    assert_eq!(reports[0].meta, reports[1].meta);
    assert_eq!(reports[0].meta.replica_seeds.len(), 3);
    for i in 0..3 {
        assert_eq!(reports[0].traces[i].log_liks(), reports[1].traces[i].log_liks());
        let a = replica_dir(dirs[0].path(), i);
        let b = replica_dir(dirs[1].path(), i);
        for f in ["density.csv", "summary_mean.csv"] {
            assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
        }
    }
    assert_eq!(reports[0].meta.harness.as_ref().unwrap().pairs, 3);
}
