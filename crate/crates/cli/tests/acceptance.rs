//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! A FAIL line does not fail `cargo test` on its own; set
//! `KNOTFIT_ACCEPTANCE_STRICT=1` to turn failures into a non-zero exit.
//! Errors inside a check always exit non-zero. `KNOTFIT_ACCEPTANCE=1,5,9`
//! restricts the run to the listed criteria.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use knotfit::adapt::{AdaptSettings, AdaptiveState};
use knotfit::beam::{equivalent_nodal_forces, solve_beam, BeamSpec};
use knotfit::diagnostics::{pair_harness, posterior_summary};
use knotfit::experiment::replica_seed;
use knotfit::generate::{generate_example1, generate_step_data, StepProfile};
use knotfit::oracle::{
    birth_log_alpha, death_log_alpha, move_log_alpha, posterior_n_constant_exact, posterior_n_quadrature,
};
use knotfit::rjmcmc::{log_accept_ratio, propose, ChainState, FixedTuning, Proposal, ProposalKind, ProposalTuning};
use knotfit::sampler::run_sampler_with;
use knotfit::{
    build_grid, run_sampler, BasisKind, Dataset, KnotModel, PriorSpec, Problem, RunTrace, SamplerKind, SamplerSettings,
};
use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Check = Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn example1_problem(seed: u64) -> Result<Problem, String> {
    let grid = build_grid(-2.0, 2.0, 101).map_err(err)?;
    let data = generate_example1(200, seed).map_err(err)?;
    Problem::regression(grid, BasisKind::Linear, PriorSpec::uniform(2, 101, -10.0, 10.0), data).map_err(err)
}

fn n_distribution(ns: &[usize]) -> BTreeMap<usize, f64> {
    let mut counts = BTreeMap::new();
    for &n in ns {
        *counts.entry(n).or_insert(0usize) += 1;
    }
    counts.into_iter().map(|(n, c)| (n, c as f64 / ns.len() as f64)).collect()
}

fn tiny_oracle() -> Check {
    let grid = build_grid(0.0, 1.0, 5).map_err(err)?;
    let profile = StepProfile {
        domain: (0.0, 1.0),
        breakpoints: vec![0.5],
        levels: vec![1.0, -1.0],
        gap: None,
    };
    let data = generate_step_data(&profile, 5, 0.5, 7).map_err(err)?;
    let problem =
        Problem::regression(grid, BasisKind::Constant, PriorSpec::uniform(2, 5, -5.0, 5.0), data).map_err(err)?;
    let oracle = posterior_n_quadrature(&problem, 5, 8).map_err(err)?;
    let exact = posterior_n_constant_exact(&problem).map_err(err)?;
    let cross = (2..=5).map(|n| (oracle[&n] - exact[&n]).abs()).fold(0.0, f64::max);

    let mut worst = 0.0f64;
    let mut detail = format!(
        "oracle p(n|D) = [{}] (40-node quadrature vs exact {cross:.1e})",
        (2..=5).map(|n| format!("{:.4}", oracle[&n])).collect::<Vec<_>>().join(", ")
    );
    for (kind, temps) in [(SamplerKind::Rjmcmc, 1), (SamplerKind::ApPtRjmcmc, 2)] {
        let mut s = SamplerSettings::for_kind(kind, 500_000);
        s.thin = 1;
        s.n_temperatures = temps;
        let trace = run_sampler(&problem, &s, 2024).map_err(err)?;
        let ns = &trace.ns()[trace.len() / 10..];
        let est = n_distribution(ns);
        let dev = (2..=5)
            .map(|n| (est.get(&n).copied().unwrap_or(0.0) - oracle[&n]).abs())
            .fold(0.0, f64::max);
        worst = worst.max(dev);
        detail += &format!("; {} max |dp| {dev:.4}", kind.label());
    }
    Ok((worst <= 0.02 && cross < 1e-3, detail))
}

fn recursion_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dim = 6;
    let draws: Vec<Vec<f64>> = (0..10_000)
        .map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let settings = AdaptSettings::new(1e-8);
    let mut state = AdaptiveState::init_history(&draws[..2], settings).map_err(err)?;
    for d in &draws[2..] {
        state.update_history(d).map_err(err)?;
    }
    let mean_err = (0..dim)
        .map(|j| {
            let batch = draws.iter().map(|d| d[j]).sum::<f64>() / draws.len() as f64;
            (state.mean()[j] - batch).abs()
        })
        .fold(0.0, f64::max);

    let hand = AdaptiveState::init_history(&[vec![2.0], vec![4.0]], settings).map_err(err)?;
    let hand_ok = hand.cov_at(0, 0) == 2.0 && hand.mean()[0] == 3.0;

    let truth = Matrix3::new(2.0, 0.6, -0.3, 0.6, 1.0, 0.2, -0.3, 0.2, 0.5);
    let l = truth.cholesky().ok_or("reference covariance is not positive definite")?.l();
    let mut gauss = Vec::with_capacity(100_000);
    for _ in 0..100_000 {
        let z = nalgebra::Vector3::from_fn(|_, _| Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let x = l * z + nalgebra::Vector3::new(1.0, -2.0, 0.5);
        gauss.push(vec![x[0], x[1], x[2]]);
    }
    let mut g = AdaptiveState::init_history(&gauss[..2], settings).map_err(err)?;
    for d in &gauss[2..] {
        g.update_history(d).map_err(err)?;
    }
    let est = g.cov_matrix();
    let truth_d = DMatrix::from_fn(3, 3, |i, j| truth[(i, j)]);
    let frob = (&est - &truth_d).norm() / truth_d.norm();

    Ok((
        mean_err <= 1e-9 && hand_ok && frob <= 0.05,
        format!("running vs batch mean {mean_err:.1e}; hand case exact: {hand_ok}; Gaussian covariance rel. Frobenius error {frob:.4}"),
    ))
}

/// Both endpoints plus `n - 2` distinct interior sites drawn uniformly.
fn random_sites(rng: &mut ChaCha8Rng, n_grid: usize, n: usize) -> Vec<usize> {
    let mut interior: Vec<usize> = (1..n_grid - 1).collect();
    for i in 0..n - 2 {
        let j = rng.random_range(i..interior.len());
        interior.swap(i, j);
    }
    let mut sites = vec![0];
    sites.extend_from_slice(&interior[..n - 2]);
    sites.push(n_grid - 1);
    sites.sort_unstable();
    sites
}

fn analytic_acceptance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let bases = [BasisKind::Constant, BasisKind::Linear, BasisKind::CubicSpline];
    let mut checked = [0usize; 3];
    let mut worst = 0.0f64;
    let mut below_one = 0usize;
    let mut ulp_floor = 0usize;
    let mut worst_excess = 0.0f64;
    let mut attempts = 0usize;
    while checked.iter().sum::<usize>() < 10_000 {
        attempts += 1;
        if attempts > 200_000 {
            return Err("could not draw enough in-support cases".into());
        }
        let n_grid = rng.random_range(5..=120);
        let (a_min, a_max) = (-rng.random_range(1.0..20.0), rng.random_range(1.0..20.0));
        let basis = bases[rng.random_range(0..3)];
        let n = rng.random_range(2..=n_grid);
        let grid = build_grid(0.0, 1.0, n_grid).map_err(err)?;
        let sites = random_sites(&mut rng, n_grid, n);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(a_min * 0.5..a_max * 0.5)).collect();
        let model = KnotModel::new(sites, values, &grid).map_err(err)?;
        let k = rng.random_range(3..30);
        let xs: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let ds: Vec<f64> = xs.iter().map(|x| (6.0 * x).sin() + rng.random_range(-0.5..0.5)).collect();
        let sd = rng.random_range(0.3..2.0);
        let prior = PriorSpec::uniform(2, n_grid, a_min, a_max);
        let problem = Problem::regression(grid, basis, prior, Dataset::new(xs, ds, sd).map_err(err)?).map_err(err)?;
        let tuning = FixedTuning {
            birth_variance: rng.random_range(0.01..2.0),
            move_variance: rng.random_range(0.001..0.5),
        };
        let temperature = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.05..1.0) };
        let kind = ProposalKind::ALL[rng.random_range(0..3)];
        let state = ChainState::new(model, &problem).map_err(err)?;
        let outcome = match propose(kind, &state.model, &problem, &tuning, &mut rng).map_err(err)? {
            Proposal::Ready(o) => o,
            Proposal::Blocked(_) => continue,
        };
        if problem.log_prior(&outcome.candidate) == f64::NEG_INFINITY {
            continue;
        }
        let generic = log_accept_ratio(&state, &outcome, &problem, temperature).map_err(err)?;
        let ll_new = generic.candidate_log_lik.ok_or("in-support candidate without likelihood")?;
        let dll = temperature * (ll_new - state.log_lik);
        let range = problem.prior().value_range();
        let grid = problem.grid();
        let closed = match kind {
            ProposalKind::Birth => {
                let pos = (0..outcome.candidate.n())
                    .find(|&i| !state.model.is_occupied(outcome.candidate.indices()[i]))
                    .ok_or("birth without a new site")?;
                let site = outcome.candidate.indices()[pos];
                let value = outcome.candidate.values()[pos];
                let anchor = problem.curve(&state.model).eval(grid.coord(site)).map_err(err)?;
                let var = tuning.birth_variance(site);
                birth_log_alpha(dll, range, knotfit::rjmcmc::log_normal_pdf(value, anchor, var))
            }
            ProposalKind::Death => {
                let pos = (0..state.model.n())
                    .find(|&i| !outcome.candidate.is_occupied(state.model.indices()[i]))
                    .ok_or("death without a removed site")?;
                let site = state.model.indices()[pos];
                let value = state.model.values()[pos];
                let anchor = problem.curve(&outcome.candidate).eval(grid.coord(site)).map_err(err)?;
                let var = tuning.birth_variance(site);
                death_log_alpha(dll, range, knotfit::rjmcmc::log_normal_pdf(value, anchor, var))
            }
            ProposalKind::Move => move_log_alpha(dll),
        };
        // Below one ulp for |log alpha| > 4504, so the tolerance never drops under 4 ulps.
        let diff = (generic.log_alpha - closed).abs();
        let ulp = f64::EPSILON * closed.abs();
        if diff > 1e-12 {
            ulp_floor += 1;
        }
        worst_excess = worst_excess.max(diff / (1e-12f64).max(4.0 * ulp));
        worst = worst.max(diff);
        if closed < 0.0 {
            below_one += 1;
        }
        checked[kind.index()] += 1;
    }
    Ok((
        worst_excess <= 1.0,
        format!(
            "birth/death/move cases {}/{}/{}, {below_one} with alpha < 1; max |log alpha difference| {worst:.2e}; \
             {ulp_floor} cases above 1e-12 but within 4 ulps",
            checked[0], checked[1], checked[2]
        ),
    ))
}

fn scale_coercion() -> Check {
    let problem = example1_problem(1)?;
    let settings = SamplerSettings::for_kind(SamplerKind::ApRjmcmc, 200_000);
    let (mut tried, mut accepted) = (0u64, 0u64);
    let trace = run_sampler_with(&problem, &settings, 5, |sweep, info, _| {
        let rec = &info.steps[0].record;
        if sweep > 100_000 && rec.kind == ProposalKind::Move {
            tried += 1;
            accepted += rec.accepted as u64;
        }
    })
    .map_err(err)?;
    let rate = accepted as f64 / tried as f64;
    Ok((
        (rate - 0.234).abs() <= 0.05,
        format!(
            "Move acceptance over the last 1e5 steps {rate:.4} ({accepted}/{tried}); final s_c {:.3e}",
            trace.meta.final_log_scale.unwrap_or(f64::NAN).exp()
        ),
    ))
}

fn fem() -> Check {
    let (len, ei, q): (f64, f64, f64) = (10.0, 2.5e4, 7.0);
    let cant = BeamSpec::cantilever(len, 101, ei);
    let tip = *solve_beam(&cant, |_| q).map_err(err)?.nodal_deflections.last().ok_or("empty solution")?;
    let tip_exact = q * len.powi(4) / (8.0 * ei);
    let tip_err = ((tip - tip_exact) / tip_exact).abs();

    let ss = BeamSpec::simply_supported(len, 101, ei);
    let sol = solve_beam(&ss, |_| q).map_err(err)?;
    let mid = sol.deflection_at(&ss, len / 2.0);
    let mid_exact = 5.0 * q * len.powi(4) / (384.0 * ei);
    let mid_err = ((mid - mid_exact) / mid_exact).abs();

    let le = 0.37;
    let f = equivalent_nodal_forces(|_| q, 2.0, le);
    let expected = [q * le / 2.0, q * le * le / 12.0, q * le / 2.0, -q * le * le / 12.0];
    let load_err = f.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    Ok((
        tip_err <= 5e-3 && mid_err <= 5e-3 && load_err <= 1e-12,
        format!("cantilever tip rel. error {tip_err:.2e}; simply supported midspan {mid_err:.2e}; nodal loads {load_err:.1e}"),
    ))
}

fn efficiency_ordering() -> Check {
    let problem = example1_problem(1)?;
    let mut ok = true;
    let mut lines = Vec::new();
    for master in [1u64, 2, 3] {
        let mut medians = BTreeMap::new();
        let mut converged = BTreeMap::new();
        for kind in [SamplerKind::Rjmcmc, SamplerKind::ApRjmcmc, SamplerKind::ApPtRjmcmc] {
            let settings = SamplerSettings::for_kind(kind, 300_000);
            let traces: Vec<RunTrace> = std::thread::scope(|s| {
                let handles: Vec<_> = (0..4)
                    .map(|i| {
                        let (p, st) = (&problem, &settings);
                        s.spawn(move || run_sampler(p, st, replica_seed(master, i)))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("replica thread panicked")).collect::<Result<Vec<_>, _>>()
            })
            .map_err(err)?;
            let h = pair_harness(&traces, 10_000).map_err(err)?.summary;
            medians.insert(kind.label(), h.median_length);
            converged.insert(kind.label(), h.converged);
        }
        let (rj, ap, appt) = (
            SamplerKind::Rjmcmc.label(),
            SamplerKind::ApRjmcmc.label(),
            SamplerKind::ApPtRjmcmc.label(),
        );
        let ordered = matches!((medians[appt], medians[ap]), (Some(a), Some(b)) if a < b);
        let seed_ok = ordered && converged[ap] == 6 && converged[appt] == 6 && converged[rj] <= 3;
        ok &= seed_ok;
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.0}"));
        lines.push(format!(
            "seed {master}: converged RJ/AP/AP-PT {}/{}/{} of 6, median AP {} AP-PT {}",
            converged[rj],
            converged[ap],
            converged[appt],
            fmt(medians[ap]),
            fmt(medians[appt])
        ));
    }
    Ok((ok, lines.join("; ")))
}

fn example2_phenomenology() -> Check {
    let grid = build_grid(0.0, 10.0, 101).map_err(err)?;
    let data = generate_step_data(&StepProfile::example2(), 100, 5.0, 1).map_err(err)?;
    let problem =
        Problem::regression(grid, BasisKind::Constant, PriorSpec::uniform(2, 101, -300.0, 300.0), data).map_err(err)?;
    let settings = SamplerSettings::for_kind(SamplerKind::ApPtRjmcmc, 300_000);
    let trace = run_sampler(&problem, &settings, 7).map_err(err)?;
    let summary = posterior_summary(&trace, 0.5, 200, (-300.0, 300.0)).map_err(err)?;

    let transition: Vec<usize> = (0..summary.z.len()).filter(|&j| summary.z[j] > 4.0 && summary.z[j] < 6.0).collect();
    let contiguous = transition
        .iter()
        .filter(|&&j| {
            let col = summary.column(j);
            let max = *col.iter().max().unwrap_or(&0);
            let high: Vec<usize> = (0..col.len()).filter(|&b| col[b] as f64 > 0.1 * max as f64).collect();
            high.windows(2).all(|w| w[1] == w[0] + 1)
        })
        .count();
    let frac = contiguous as f64 / transition.len() as f64;

    let var = trace.meta.adaptive_variance.as_ref().ok_or("adaptive run without recorded variance")?;
    let (plateau, middle) = (20, 50);
    let ratio = var[middle].max(var[plateau]) / var[middle].min(var[plateau]);
    Ok((
        frac >= 0.95 && ratio > 5.0,
        format!(
            "contiguous high-density band in {contiguous}/{} transition columns ({:.1}%); adaptive variance z=5: {:.1}, z=2: {:.2} (ratio {ratio:.1})",
            transition.len(),
            100.0 * frac,
            var[middle],
            var[plateau]
        ),
    ))
}

fn diminishing_adaptation() -> Check {
    let problem = example1_problem(1)?;
    let settings = SamplerSettings::for_kind(SamplerKind::ApRjmcmc, 100_000);
    let max_delta = settings.target_accept.max(1.0 - settings.target_accept);
    let mut points = Vec::new();
    let mut updates = 0u64;
    let mut violations = 0u64;
    let mut gamma_mismatch = 0.0f64;
    run_sampler_with(&problem, &settings, 3, |sweep, info, _| {
        let step = &info.steps[0];
        if let Some(inc) = step.cov_increment {
            if inc > 0.0 {
                points.push(((sweep as f64).ln(), (inc * sweep as f64).ln()));
            }
        }
        if let Some(u) = step.scale_update {
            updates += 1;
            gamma_mismatch = gamma_mismatch.max((u.gamma - (updates as f64).powf(-0.5)).abs());
            if u.log_scale_change.abs() > u.gamma * max_delta + 1e-15 {
                violations += 1;
            }
        }
    })
    .map_err(err)?;
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok((
        slope <= 0.05 && violations == 0 && gamma_mismatch < 1e-12,
        format!(
            "slope of log(|dC|*t) vs log t = {slope:.4} over {} updates; {updates} scale updates, {violations} exceed gamma*max|delta|",
            points.len()
        ),
    ))
}

fn collect_csv(dir: &Path, base: &Path, out: &mut BTreeMap<String, Vec<u8>>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_csv(&path, base, out)?;
        } else if path.extension().is_some_and(|e| e == "csv") {
            let key = path.strip_prefix(base).expect("walked under base").display().to_string();
            out.insert(key, std::fs::read(&path)?);
        }
    }
    Ok(())
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let config = r#"{
        "schema_version": 1,
        "sampler": {"kind": "ap-pt-rjmcmc", "steps": 20000, "t0": 1000, "n_temperatures": 3},
        "basis": "linear",
        "grid": {"x_lo": -2, "x_hi": 2, "n_points": 101},
        "prior": {"count": {"uniform": {"n_min": 2, "n_max": 101}}, "a_min": -10, "a_max": 10},
        "data": {"generator": {"kind": "example1", "seed": 1}},
        "monitor_stride": 5000,
        "replicas": 3
    }"#;
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, config).map_err(err)?;
    let mut outputs = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "3")] {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_knotfit"))
            .args(["run", cfg.to_str().ok_or("non-UTF-8 temp path")?, "--seed", "77", "--threads", threads])
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(err)?;
        if !status.status.success() {
            return Err(format!("run failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        let mut files = BTreeMap::new();
        collect_csv(&out, &out, &mut files).map_err(err)?;
        outputs.push(files);
    }
    let same = outputs[0] == outputs[1];
    Ok((same && outputs[0].len() > 10, format!("{} CSV files compared, identical: {same}", outputs[0].len())))
}

fn main() {
    let criteria: [(usize, &str, fn() -> Check); 9] = [
        (1, "tiny-instance oracle", tiny_oracle),
        (2, "recursion oracles", recursion_oracles),
        (3, "analytic acceptance equivalence", analytic_acceptance),
        (4, "scale coercion", scale_coercion),
        (5, "FEM correctness", fem),
        (6, "efficiency ordering", efficiency_ordering),
        (7, "example-2 phenomenology", example2_phenomenology),
        (8, "diminishing adaptation", diminishing_adaptation),
        (9, "determinism", determinism),
    ];
    let only: Option<Vec<usize>> = std::env::var("KNOTFIT_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let strict = std::env::var("KNOTFIT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");

    let (mut failed, mut errored) = (0, 0);
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok((pass, detail)) => {
                failed += usize::from(!pass);
                println!("criterion {id} {}: {name}: {detail} [{secs:.1}s]", if pass { "PASS" } else { "FAIL" });
            }
            Err(e) => {
                errored += 1;
                println!("criterion {id} ERROR: {name}: {e} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {failed} failed, {errored} errored");
    if errored > 0 || (strict && failed > 0) {
        std::process::exit(1);
    }
}
