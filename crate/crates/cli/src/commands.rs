use rayon::prelude::*;
use rwre_core::env::{build_potential, sample_environment, solve_kappa, Environment, EnvironmentModel, Hypothesis};
use rwre_core::estimate::{
    annealed_probability, exponent_scan, figure_curve, kks_scaling_check, quenched_probability, transform_for,
    wilson_interval, EventSpec, Law, ScanTarget, DEFAULT_Z,
};
use rwre_core::rng::{mix64, StreamDomain};
use rwre_core::valleys::{check_events, decompose, max_depth_tail, ValleyDecomposition};
use rwre_core::walk::{crossing_probability, run, run_until_exit, ExitOutcome, WalkConfig};

use crate::config::{default_nu_grid, CrossingConfig};
use crate::{oracle, CliError, Command, Config, OutputSet, Report, StreamAllocation};

const DEFAULT_M: usize = 4;

pub(crate) fn dispatch(command: Command, config: &Config, out: &mut OutputSet) -> Result<Report, CliError> {
    match command {
        Command::EnvCheck => env_check(config, out),
        Command::Valleys => valleys(config, out),
        Command::Simulate => simulate(config, out),
        Command::Estimate => estimate(config, out),
        Command::ExponentCurve => exponent_curve(config, out),
        Command::OracleCheck => oracle::oracle_check(config, out),
    }
}

fn alloc(purpose: &str, seed: u64, streams: impl Into<String>) -> StreamAllocation {
    StreamAllocation { purpose: purpose.into(), seed, streams: streams.into() }
}

fn kappa_of(model: &EnvironmentModel) -> Result<f64, CliError> {
    solve_kappa(model)?.ok_or_else(|| CliError::Config("model: no kappa (E[rho^s] < 1 for all s > 0)".into()))
}

fn sample(config: &Config, model: &EnvironmentModel, lo: i64, hi: i64) -> Result<Environment, CliError> {
    Ok(sample_environment(model, lo, hi, config.env_seed(), StreamDomain::Environment.stream(0), false)?)
}

fn env_stream(config: &Config) -> StreamAllocation {
    alloc("environment", config.env_seed(), "environment stream 0, keyed by site")
}

fn env_check(config: &Config, out: &mut OutputSet) -> Result<Report, CliError> {
    let model = config.model()?;
    let report = model.validate_assumptions();
    out.write_json("report.json", &report)?;
    let h = &report.hypotheses;
    let failed = [h.transient, h.kappa_exists, h.negative_moment].contains(&Hypothesis::Fails);
    let failure = failed.then(|| {
        let why = report.notes.iter().find(|n| n.contains("fails")).cloned().unwrap_or_else(|| "hypothesis fails".into());
        CliError::Config(format!("model: {why}"))
    });
    Ok(Report { notes: report.notes.clone(), failure, ..Report::default() })
}

struct CrossingRow {
    i: usize,
    site: i64,
    lower: i64,
    upper: i64,
    p_exact: f64,
    backtracks: u64,
    trials: u64,
}

fn valleys(config: &Config, out: &mut OutputSet) -> Result<Report, CliError> {
    let model = config.model()?;
    let mut report = Report::default();
    if config.run.n.is_none() && config.run.tail_grid.is_none() {
        return Err(CliError::Config("run.n or run.tail_grid: one of them is required".into()));
    }
    if let Some(grid) = &config.run.tail_grid {
        let replicas = config.replicas()?;
        let fit = max_depth_tail(model, grid, replicas, config.run.seed);
        let mut csv = String::from("h,count,frequency,used_in_fit\n");
        for p in &fit.points {
            csv.push_str(&format!("{},{},{},{}\n", p.h, p.count, p.frequency, p.used_in_fit));
        }
        out.write("tail.csv", &csv)?;
        out.write_json("tail.json", &fit)?;
        report.replicas = Some(replicas);
        report.streams.push(alloc("potential tail", config.run.seed, "potential-tail stream r for replica r"));
    }
    let Some(n) = config.run.n else { return Ok(report) };
    if n < 2 {
        return Err(CliError::Config(format!("run.n: {n} must be at least 2")));
    }
    let kappa = kappa_of(model)?;
    let (lo, hi) = config.run.window.unwrap_or((-(n as i64), 20 * n as i64));
    let env = sample(config, model, lo, hi)?;
    let pot = build_potential(&env)?;
    let dec = decompose(&pot, n as f64, kappa)?;
    report.streams.push(env_stream(config));
    if let Some(d) = &dec.diagnostic {
        report.notes.push(d.clone());
    }
    out.write("environment.jsonl", &env.to_jsonl())?;
    out.write("valleys.csv", &dec.to_csv())?;
    out.write_json("decomposition.json", &dec)?;
    if let Some(ev) = &config.event {
        let nu = ev.nu.ok_or_else(|| CliError::Config("event.nu: missing".into()))?;
        let eps0 = model.validate_assumptions().epsilon0;
        let events = check_events(&env, &pot, &dec, nu, config.run.m.unwrap_or(DEFAULT_M), eps0);
        out.write_json("events.json", &events)?;
    }
    if let Some(cross) = &config.run.crossing {
        crossing(config, cross, &env, &dec, out, &mut report)?;
    }
    Ok(report)
}

/// Backtrack frequencies at certified interior boundaries against the exact
/// crossing probability.
fn crossing(
    config: &Config,
    cross: &CrossingConfig,
    env: &Environment,
    dec: &ValleyDecomposition,
    out: &mut OutputSet,
    report: &mut Report,
) -> Result<(), CliError> {
    if cross.trials == 0 {
        return Err(CliError::Config("run.crossing.trials: must be positive".into()));
    }
    let pot = build_potential(env)?;
    let chosen: Vec<usize> = (1..dec.boundaries.len().saturating_sub(1))
        .filter(|&i| dec.is_certified(i - 1) && dec.is_certified(i) && dec.is_certified(i + 1))
        .take(cross.boundaries)
        .collect();
    if chosen.len() < cross.boundaries {
        report.notes.push(format!("only {} certified interior boundaries in the window", chosen.len()));
    }
    let mut rows = Vec::new();
    let mut censored = 0u64;
    for &i in &chosen {
        let (lower, site, upper) = (dec.boundaries[i - 1].site, dec.boundaries[i].site, dec.boundaries[i + 1].site);
        let seed = mix64(config.run.seed ^ mix64(i as u64));
        let outcomes: Vec<ExitOutcome> = (0..cross.trials)
            .into_par_iter()
            .map(|t| run_until_exit(&mut &*env, site, lower, upper, false, seed, StreamDomain::Walk.stream(t), cross.budget))
            .collect::<Result<_, _>>()?;
        censored += outcomes.iter().filter(|o| matches!(o, ExitOutcome::Censored)).count() as u64;
        let backtracks = outcomes.iter().filter(|o| matches!(o, ExitOutcome::Lower { .. })).count() as u64;
        let p_exact = crossing_probability(&pot, dec, i)?;
        rows.push(CrossingRow { i, site, lower, upper, p_exact, backtracks, trials: cross.trials });
    }
    let mut csv = String::from("i,site,lower,upper,p_exact,backtracks,trials,p_hat,lo,hi\n");
    for r in &rows {
        let (lo, hi) = wilson_interval(r.backtracks, r.trials, DEFAULT_Z);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.i,
            r.site,
            r.lower,
            r.upper,
            r.p_exact,
            r.backtracks,
            r.trials,
            r.backtracks as f64 / r.trials as f64,
            lo,
            hi
        ));
    }
    out.write("crossing.csv", &csv)?;
    report.replicas = Some(cross.trials);
    report.streams.push(alloc("crossing", config.run.seed, "walk stream t of mix64(seed ^ mix64(i)) for trial t at boundary i"));
    if censored > 0 {
        report.failure = Some(CliError::Budget(format!("{censored} crossing trials censored at {} steps", cross.budget)));
    }
    Ok(())
}

fn simulate(config: &Config, out: &mut OutputSet) -> Result<Report, CliError> {
    let model = config.model()?;
    let steps = config.run.steps.ok_or_else(|| CliError::Config("run.steps: missing".into()))?;
    let replicas = config.run.replicas.unwrap_or(1);
    if replicas == 0 {
        return Err(CliError::Config("run.replicas: must be positive".into()));
    }
    let reach = steps.min(i64::MAX as u64) as i64;
    let (lo, hi) = config.run.window.unwrap_or((-reach, reach));
    let env = sample(config, model, lo, hi)?;
    let seed = config.run.seed;
    let trajectories = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut cfg = WalkConfig::new(steps, seed, StreamDomain::Walk.stream(r));
            cfg.reflected = config.run.reflected;
            cfg.targets = config.run.targets.clone();
            cfg.keep_path = config.run.keep_path;
            run(&mut &env, &cfg)
        })
        .collect::<Result<Vec<_>, _>>()?;
    out.write("environment.jsonl", &env.to_jsonl())?;
    let mut jsonl = String::new();
    for t in &trajectories {
        jsonl.push_str(&t.to_jsonl_line());
        jsonl.push('\n');
    }
    out.write("trajectories.jsonl", &jsonl)?;
    if config.run.keep_path {
        let mut csv = String::from("replica,t,X_t\n");
        for (r, t) in trajectories.iter().enumerate() {
            for line in t.path_csv()?.lines().skip(1) {
                csv.push_str(&format!("{r},{line}\n"));
            }
        }
        out.write("paths.csv", &csv)?;
    }
    Ok(Report {
        streams: vec![env_stream(config), alloc("walks", seed, "walk stream r for replica r")],
        replicas: Some(replicas),
        ..Report::default()
    })
}

fn estimate(config: &Config, out: &mut OutputSet) -> Result<Report, CliError> {
    let model = config.model()?;
    let ev = config.event()?;
    let replicas = config.replicas()?;
    let seed = config.run.seed;
    let n_single = ev.n.or(config.run.n);
    let mut report = Report { replicas: Some(replicas), ..Report::default() };

    let Some(kind) = ev.kind.kind() else {
        let n = n_single.ok_or_else(|| CliError::Config("event.n: missing".into()))?;
        if ev.law != Law::Annealed {
            return Err(CliError::Config("event.law: the kks statistic is annealed".into()));
        }
        let s = kks_scaling_check(model, n, replicas, seed)?;
        let csv = format!(
            "n,replicas,clamped,mean,median,q10,q25,q75,q90,target\n{},{},{},{},{},{},{},{},{},{}\n",
            s.n, s.replicas, s.clamped, s.mean, s.median, s.q10, s.q25, s.q75, s.q90, s.target
        );
        out.write("kks.csv", &csv)?;
        out.write_json("summary.json", &s)?;
        report.streams.push(alloc("environments", seed, "environment stream r for replica r"));
        report.streams.push(alloc("walks", seed, "walk stream r for replica r"));
        return Ok(report);
    };

    let budget_points = |wanted: usize| -> usize {
        match config.run.budget {
            Some(b) => ((b / replicas) as usize).min(wanted),
            None => wanted,
        }
    };

    if let Some(grid) = &config.run.nu_grid {
        // One horizon, several ν, identical streams for every ν.
        let n = n_single.ok_or_else(|| CliError::Config("event.n: missing for a nu grid".into()))?;
        let take = budget_points(grid.len());
        let env = match ev.law {
            Law::Quenched => Some(sample(config, model, -(n as i64), n as i64)?),
            Law::Annealed => None,
        };
        let transform = transform_for(kind, ev.law);
        let mut csv = String::from("nu,n,p_hat,lo,hi,transform_value\n");
        let mut estimates = Vec::new();
        for &nu in &grid[..take] {
            let spec = EventSpec::new(kind, nu, ev.reflected, n)?;
            let est = match &env {
                Some(env) => quenched_probability(env, &spec, replicas, seed)?,
                None => annealed_probability(model, &spec, replicas, seed)?,
            };
            let t = transform.apply(est.p_hat).map(|g| (g / (n as f64).ln()).to_string()).unwrap_or_default();
            csv.push_str(&format!("{},{},{},{},{},{}\n", nu, n, est.p_hat, est.lo, est.hi, t));
            estimates.push(est);
        }
        out.write("estimate.csv", &csv)?;
        out.write_json("summary.json", &estimates)?;
        if env.is_some() {
            report.streams.push(env_stream(config));
        } else {
            report.streams.push(alloc("environments", seed, "environment stream r for replica r"));
        }
        report.streams.push(alloc("walks", seed, "walk stream r for replica r, shared by every nu"));
        if take < grid.len() {
            report.partial = true;
            report.failure = Some(CliError::Budget(format!("run.budget covers {take} of {} nu values", grid.len())));
        }
        return Ok(report);
    }

    let ladder = match &config.ladder {
        Some(l) => l.values()?,
        None => vec![n_single.ok_or_else(|| CliError::Config("ladder or event.n: missing".into()))?],
    };
    let nu = ev.nu.ok_or_else(|| CliError::Config("event.nu: missing".into()))?;
    let template = EventSpec::new(kind, nu, ev.reflected, ladder[0])?;
    let take = budget_points(ladder.len());
    if take == 0 {
        return Err(CliError::Budget(format!("run.budget is below run.replicas = {replicas}")));
    }
    let n_max = *ladder[..take].iter().max().expect("non-empty ladder");
    let env = match ev.law {
        Law::Quenched => Some(sample(config, model, -(n_max as i64), n_max as i64)?),
        Law::Annealed => None,
    };
    let target = env.as_ref().map_or(ScanTarget::Annealed, ScanTarget::Quenched);
    let est = exponent_scan(model, target, &template, &ladder[..take], replicas, seed)?;
    out.write("estimate.csv", &est.to_csv())?;
    let mut summary = est.summary_json();
    summary["points"] = serde_json::to_value(&est.points).expect("points serialize");
    out.write_json("summary.json", &summary)?;
    if env.is_some() {
        report.streams.push(env_stream(config));
    } else {
        report.streams.push(alloc("environments", seed, "environment stream r of the point seed for replica r"));
    }
    report.streams.push(alloc("walks", seed, "walk stream r of mix64(seed ^ mix64(n)) for replica r at ladder point n"));
    report.notes.extend(est.diagnostics.iter().cloned());
    if take < ladder.len() {
        report.partial = true;
        report.failure = Some(CliError::Budget(format!("run.budget covers {take} of {} ladder points", ladder.len())));
    }
    Ok(report)
}

fn exponent_curve(config: &Config, out: &mut OutputSet) -> Result<Report, CliError> {
    let kappa = match (config.run.kappa, &config.model) {
        (Some(k), _) => k,
        (None, Some(m)) => kappa_of(m)?,
        (None, None) => return Err(CliError::Config("run.kappa or model: one of them is required".into())),
    };
    let grid = config.run.nu_grid.clone().unwrap_or_else(default_nu_grid);
    let mut csv = String::from("nu,f\n");
    for nu in grid {
        let f = figure_curve(kappa, nu).map_err(|e| CliError::Config(format!("run.nu_grid: {e}")))?;
        csv.push_str(&format!("{nu},{f}\n"));
    }
    out.write("curve.csv", &csv)?;
    Ok(Report { notes: vec![format!("kappa = {kappa}")], ..Report::default() })
}
