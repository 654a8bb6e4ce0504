//! The six commands. Each returns an [`Outcome`] and writes its artifacts to
//! the configured output directory (`check` and `threshold` also write a
//! JSON report there).

use std::path::PathBuf;

use pullback_core::constants::{
    check_dissipativity_gap_with, noise_threshold, noise_threshold_example, noise_threshold_with,
    GapForm,
};
use pullback_core::discretization::{h_norm_sq, StateVector};
use pullback_core::energy::{derive_gronwall_constants, GronwallConstants};
use pullback_core::estimators::{
    decay_rate_fit, estimate_mean_square, gronwall_residual, pullback_absorption, LMode,
};
use pullback_core::forcing::{absorbing_radius, tempered_integral};
use pullback_core::hypotheses::{
    sampled_check_drift_coercivity, sampled_check_h0, sampled_check_h2, sampled_check_h3,
    sampled_check_h4, sampled_check_h5, sampled_check_psi, CheckReport,
};
use pullback_core::discretization::DriftKind;
use pullback_core::integrator::PathIntegrator;
use pullback_core::noise::NoiseField;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConstantsSource, RunConfig};
use crate::report::{envelope, fmt6, write_csv, write_json};
use crate::CliError;

/// Result of a command that ran to completion.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// 0 on success, 1 on a scientific failure.
    pub code: i32,
    pub summary: String,
    pub report: Value,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Check,
    Threshold,
    Radius,
    Simulate,
    Absorb,
    Decay,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Threshold => "threshold",
            Command::Radius => "radius",
            Command::Simulate => "simulate",
            Command::Absorb => "absorb",
            Command::Decay => "decay",
        }
    }
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match command {
        Command::Check => cmd_check(cfg),
        Command::Threshold => cmd_threshold(cfg),
        Command::Radius => cmd_radius(cfg),
        Command::Simulate => cmd_simulate(cfg),
        Command::Absorb => cmd_absorb(cfg),
        Command::Decay => cmd_decay(cfg),
    }
}

#[derive(Serialize)]
struct CheckEntry {
    name: String,
    passed: bool,
    #[serde(flatten)]
    report: Option<CheckReport>,
    error: Option<String>,
}

fn entry(name: &str, r: pullback_core::Result<CheckReport>) -> CheckEntry {
    match r {
        Ok(report) => CheckEntry {
            name: name.into(),
            passed: report.passed(),
            report: Some(report),
            error: None,
        },
        Err(e) => CheckEntry {
            name: name.into(),
            passed: false,
            report: None,
            error: Some(e.to_string()),
        },
    }
}

pub fn cmd_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = cfg.grid()?;
    let model = cfg.model(&grid)?;
    let consts = cfg.constants(Some(&model))?;
    let profile = cfg.profile(Some(&model))?;
    let noise = NoiseField::new(&cfg.noise(&grid)?, &grid, &model.triple)?;
    let trials = cfg.check_trials();
    let seed = cfg.seed;
    let form = model.gap_form();
    let gap = check_dissipativity_gap_with(&consts, form);

    let mut checks = vec![
        entry("H0", sampled_check_h0(&model, &grid, &consts, trials, seed)),
        entry("H2", sampled_check_h2(&model, &grid, &noise, &consts, trials, seed)),
        entry("H3", sampled_check_h3(&model, &grid, &noise, &consts, &profile, trials, seed)),
        entry("H4", sampled_check_h4(&model, &grid, &consts, &profile, trials, seed)),
        entry("h5", sampled_check_h5(&model, &grid, &noise, &consts, &profile, trials, seed)),
    ];
    if form == GapForm::DriftOnly {
        checks.push(entry(
            "drift-coercivity",
            sampled_check_drift_coercivity(&model, &grid, &consts, trials, seed),
        ));
    }
    if model.kind == DriftKind::PorousMedium {
        checks.push(entry("Psi", sampled_check_psi(&model, trials, seed)));
    }

    let mut failed: Vec<String> = Vec::new();
    if !gap.holds {
        failed.push(match form {
            GapForm::Full => "(H5) gap lambda - (gamma2 + |gamma4|)/gamma5 > 0".into(),
            GapForm::DriftOnly => "(H5) gap lambda - gamma2/gamma5 > 0".into(),
        });
    }
    failed.extend(checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()));
    let passed = failed.is_empty();
    let report = envelope(
        "check",
        json!({
            "passed": passed,
            "failed": failed,
            "trials": trials,
            "seed": seed,
            "gap_form": form,
            "gap": gap,
            "constants": consts,
            "checks": checks,
        }),
    )?;
    let out = cfg.output_dir();
    let files = vec![write_json(&out, "check.json", &report)?];
    let summary = if passed {
        format!(
            "check passed: gap = {}, {} sampled checks with 0 violations",
            fmt6(gap.gap),
            checks.len()
        )
    } else {
        format!("check failed: {}", failed.join("; "))
    };
    Ok(Outcome {
        code: if passed { 0 } else { 1 },
        summary,
        report,
        files,
    })
}

pub fn cmd_threshold(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let model = match cfg.model {
        Some(_) => Some(cfg.model(&cfg.grid()?)?),
        None => None,
    };
    let consts = cfg.constants_with(model.as_ref(), false)?;
    let form = cfg.gap_form();
    let general = noise_threshold(&consts);
    let active = noise_threshold_with(&consts, form)?;
    let preset = cfg.constants.is_some_and(|c| c.source == ConstantsSource::Preset);
    let example = match (&model, preset) {
        (Some(m), true) => {
            let ex = cfg.example_model(&consts, m);
            Some((ex, noise_threshold_example(&ex)?))
        }
        _ => None,
    };
    let mut lines = Vec::new();
    let flag = |on: bool| if on { " (active)" } else { "" };
    match &general {
        Ok(v) => lines.push(format!(
            "eps0 general = {}{}",
            fmt6(*v),
            flag(form == GapForm::Full && example.is_none())
        )),
        Err(_) => lines.push("eps0 general: gap closed under (H5)".into()),
    }
    if form == GapForm::DriftOnly {
        lines.push(format!("eps0 drift-only = {}{}", fmt6(active), flag(example.is_none())));
    }
    if let Some((ex, v)) = &example {
        lines.push(format!("eps0 {} = {} (active)", ex.name(), fmt6(*v)));
    }
    let report = envelope(
        "threshold",
        json!({
            "gap_form": form,
            "general": general.as_ref().ok(),
            "active": active,
            "example": example.as_ref().map(|(ex, v)| json!({"model": ex, "value": v})),
            "constants": consts,
        }),
    )?;
    let files = vec![write_json(&cfg.output_dir(), "threshold.json", &report)?];
    Ok(Outcome {
        code: 0,
        summary: lines.join("\n"),
        report,
        files,
    })
}

fn resolve_l(
    mode: LMode,
    consts: &pullback_core::constants::StructuralConstants,
    form: GapForm,
) -> Result<(f64, Option<GronwallConstants>), CliError> {
    Ok(match mode {
        LMode::Derived => {
            let w = derive_gronwall_constants(consts, form)?;
            (w.l, Some(w))
        }
        LMode::Explicit { value } => (value, None),
    })
}

pub fn cmd_radius(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = cfg.grid()?;
    let model = cfg.model(&grid)?;
    let consts = cfg.constants(Some(&model))?;
    let mut profile = cfg.profile(Some(&model))?;
    profile.bind_discrete_norm(&grid, model.triple.is_l2_based());
    let (tau, mode, tol, mut taus) = match &cfg.experiment {
        Some(e) => (e.tau, e.l.unwrap_or(LMode::Derived), e.quad_tol, e.taus.clone()),
        None => (0.0, LMode::Derived, 1e-10, Vec::new()),
    };
    let (l, worksheet) = resolve_l(mode, &consts, model.gap_form())?;
    let decay = consts.decay_rate();
    let len = grid.domain_length;
    let radius = |t: f64| absorbing_radius(t, l, &profile, decay, consts.alpha, len, tol);
    let r = radius(tau)?;
    let integral = tempered_integral(&profile, tau, decay, consts.alpha, len, tol)?;
    if !taus.contains(&tau) {
        taus.push(tau);
    }
    taus.sort_by(f64::total_cmp);
    let table = taus
        .iter()
        .map(|&t| Ok((t, radius(t)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = envelope(
        "radius",
        json!({
            "tau": tau,
            "radius": r,
            "l": l,
            "l_derived": worksheet.is_some(),
            "decay": decay,
            "tempered_integral": integral,
            "worksheet": worksheet,
            "table": table.iter().map(|(t, r)| json!({"tau": t, "radius": r})).collect::<Vec<_>>(),
        }),
    )?;
    let out = cfg.output_dir();
    let files = vec![
        write_json(&out, "radius.json", &report)?,
        write_csv(&out, "radius.csv", &["tau", "radius"], table)?,
    ];
    Ok(Outcome {
        code: 0,
        summary: format!("R(tau)={} at tau={}, L={}", fmt6(r), fmt6(tau), fmt6(l)),
        report,
        files,
    })
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = cfg.grid()?;
    let model = cfg.model(&grid)?;
    let consts = cfg.constants(Some(&model))?;
    let profile = cfg.profile(Some(&model))?;
    let noise = NoiseField::new(&cfg.noise(&grid)?, &grid, &model.triple)?;
    let sim = cfg.sim(consts.epsilon)?;
    let init = cfg.initial.unwrap_or(crate::config::InitialSection {
        mode: 1,
        amplitude: 1.0,
    });
    if init.mode == 0 || init.mode > grid.n_interior {
        return Err(CliError::Config(format!(
            "initial.mode must lie in 1..={}, got {}",
            grid.n_interior, init.mode
        )));
    }
    let e = StateVector::new(grid, grid.sine_mode(init.mode));
    let u0 = e.scaled(init.amplitude / h_norm_sq(&e, &model.triple).sqrt());
    let paths = cfg.experiment.as_ref().and_then(|e| e.paths).unwrap_or(1).max(1);
    let integrator = PathIntegrator::new(&grid, &model, &profile, &noise, sim)?;

    let mut rows = Vec::new();
    let mut terminal = Vec::with_capacity(paths);
    let mut stiff = 0;
    let mut first = None;
    for path in 0..paths as u64 {
        let traj = integrator.run(&u0, path, path == 0)?;
        rows.extend(
            traj.times
                .iter()
                .zip(&traj.h_norm_sq_series)
                .map(|(t, n)| (path, *t, *n)),
        );
        terminal.push(*traj.h_norm_sq_series.last().unwrap());
        stiff += traj.stiff_steps;
        if path == 0 {
            first = Some(traj);
        }
    }
    let first = first.unwrap();
    let m = terminal.len() as f64;
    let mean = terminal.iter().sum::<f64>() / m;
    let std_err = if terminal.len() > 1 {
        (terminal.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
    } else {
        0.0
    };
    let mut states = Vec::new();
    for (t, s) in first.times.iter().zip(&first.states) {
        states.extend(s.to_csv_rows().into_iter().map(|(x, u)| (*t, x, u)));
    }
    let report = envelope(
        "simulate",
        json!({
            "sim": sim,
            "paths": paths,
            "seed": cfg.seed,
            "initial_norm_sq": h_norm_sq(&u0, &model.triple),
            "terminal_mean_sq": mean,
            "terminal_std_err": std_err,
            "stiff_steps": stiff,
        }),
    )?;
    let out = cfg.output_dir();
    let files = vec![
        write_json(&out, "simulate.json", &report)?,
        write_csv(&out, "trajectory.csv", &["path", "time", "h_norm_sq"], rows)?,
        write_csv(&out, "states.csv", &["time", "x", "u"], states)?,
    ];
    Ok(Outcome {
        code: 0,
        summary: format!(
            "simulated {paths} path(s) to t={}: mean |u|_H^2 = {}",
            fmt6(sim.t_end),
            fmt6(mean)
        ),
        report,
        files,
    })
}

pub fn cmd_absorb(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.experiment()?;
    let result = pullback_absorption(&spec)?;
    let report = envelope(
        "absorb",
        json!({
            "seed": cfg.seed,
            "absorbed": result.eventually_absorbed(),
            "result": result,
        }),
    )?;
    let out = cfg.output_dir();
    let rows = result
        .entries
        .iter()
        .map(|e| (e.t, e.initial_norm_sq, e.mean_sq, e.std_err, e.absorbed));
    let files = vec![
        write_json(&out, "absorb.json", &report)?,
        write_csv(
            &out,
            "absorb.csv",
            &["t", "initial_norm_sq", "mean_sq", "std_err", "absorbed"],
            rows,
        )?,
    ];
    let absorbed = result.eventually_absorbed();
    let entry = result.entry_time.map_or("none".into(), fmt6);
    Ok(Outcome {
        code: if spec.certified && !absorbed { 1 } else { 0 },
        summary: format!(
            "absorbed={absorbed} entry_time={entry} R(tau)={} monotone={}",
            fmt6(result.radius),
            result.monotone
        ),
        report,
        files,
    })
}

/// Fraction of residual points allowed above their three-sigma band.
pub const RESIDUAL_BUDGET: f64 = 0.05;

pub fn cmd_decay(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut spec = cfg.experiment()?;
    let e = cfg.experiment_section()?;
    let horizon = *spec
        .t_values
        .last()
        .ok_or_else(|| CliError::Config("missing key `t_values` in [experiment]".into()))?;
    spec.t_values = vec![horizon];
    if spec.record_every == 0 {
        return Err(CliError::Config("decay needs sim.record_every > 0".into()));
    }
    let series = estimate_mean_square(&spec, horizon)?;
    let window = e.window.unwrap_or((spec.tau - horizon, spec.tau));
    let fit = decay_rate_fit(&series, window)?;
    let mut profile = spec.profile.clone();
    profile.bind_discrete_norm(&spec.grid, spec.model.triple.is_l2_based());
    let worksheet = derive_gronwall_constants(&spec.consts, spec.model.gap_form())?;
    let residual = gronwall_residual(
        &series,
        &spec.consts,
        &profile,
        &worksheet.rhs(),
        spec.grid.domain_length,
    )?;
    let ok = residual.violation_fraction <= RESIDUAL_BUDGET;
    let report = envelope(
        "decay",
        json!({
            "seed": cfg.seed,
            "paths": series.paths,
            "window": window,
            "fit": fit,
            "certified_rate": -spec.consts.decay_rate(),
            "residual": {
                "points": residual.points,
                "violations": residual.violations,
                "violation_fraction": residual.violation_fraction,
                "max_excess": residual.max_excess,
                "within_budget": ok,
            },
            "worksheet": worksheet,
        }),
    )?;
    let out = cfg.output_dir();
    let rows = (0..series.times.len()).map(|i| (series.times[i], series.mean_sq[i], series.std_err[i]));
    let res_rows = residual
        .residuals
        .iter()
        .enumerate()
        .map(|(i, r)| (series.times[i + 1], *r));
    let files = vec![
        write_json(&out, "decay.json", &report)?,
        write_csv(&out, "series.csv", &["time", "mean_sq", "std_err"], rows)?,
        write_csv(&out, "residual.csv", &["time", "residual"], res_rows)?,
    ];
    Ok(Outcome {
        code: if ok { 0 } else { 1 },
        summary: format!(
            "decay rate={} (r^2={}), residual violations {}/{}",
            fmt6(fit.rate),
            fmt6(fit.r_squared),
            residual.violations,
            residual.points
        ),
        report,
        files,
    })
}
