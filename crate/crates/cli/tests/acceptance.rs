//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::{Duration, Instant};

use pullback_cli::{run, Command, RunConfig};
use pullback_core::constants::{
    check_dissipativity_gap_with, noise_threshold, noise_threshold_example, ExampleModel,
    StructuralConstants,
};
use pullback_core::discretization::{
    DriftKind, Grid, ModelSpec, PsiSpec, ReactionForm, ReactionSpec, StateVector,
};
use pullback_core::energy::derive_gronwall_constants;
use pullback_core::estimators::{
    discrete_poincare_constant, estimate_mean_square_from, gronwall_residual, pullback_absorption,
    ExperimentSpec, InitialLaw, LMode, MomentSeries,
};
use pullback_core::forcing::{
    tempered_integral, ForcingProfile, RadiusFamily, SpatialShape, TimeFn,
};
use pullback_core::hypotheses::{check_all, sampled_poincare_quotient};
use pullback_core::integrator::{integrate_path, Scheme, SimConfig};
use pullback_core::noise::{Diffusion, NoiseField, NoiseSpec, SigmaSchedule};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn tanh(g: f64) -> ReactionSpec {
    ReactionSpec {
        form: ReactionForm::Tanh,
        gamma1: g,
        gamma2: g,
    }
}

fn experiment(grid: Grid, model: ModelSpec, consts: StructuralConstants, noise: NoiseSpec) -> ExperimentSpec {
    ExperimentSpec {
        tau: 0.0,
        t_values: vec![1.0],
        paths: 2,
        rho: RadiusFamily::Constant { value: 1.0 },
        law: InitialLaw::ExtremePoint,
        grid,
        model,
        profile: ForcingProfile::zero(),
        noise,
        dt: 1e-3,
        scheme: Scheme::SemiImplicitEm,
        record_every: 0,
        consts,
        certified: false,
        l_mode: LMode::Derived,
        workers: 0,
        quad_tol: 1e-10,
    }
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let general = noise_threshold(&StructuralConstants {
        gamma1: 0.0,
        gamma2: 1.0,
        gamma3: 0.0,
        gamma4: 1.0,
        gamma5: 1.0,
        gamma6: 1.0,
        alpha: 2.0,
        lambda: 10.0,
        epsilon: 1.0,
    });
    let example = noise_threshold_example(&ExampleModel::ReactionDiffusion {
        lambda: 2.0,
        gamma2: 1.0,
    });
    let elapsed = start.elapsed();
    let (Ok(g), Ok(e)) = (general, example) else {
        return verdict(false, "threshold returned an error".into());
    };
    let (eg, ee) = (rel(g, (8.0f64 / 41.0).sqrt()), rel(e, (1.0f64 / 30.0).sqrt()));
    verdict(
        eg <= 1e-12 && ee <= 1e-12 && elapsed < Duration::from_millis(1),
        format!("rel err {eg:.1e} / {ee:.1e}, {:.3} ms", ms(elapsed)),
    )
}

/// Model, forcing and noise for each example; the additive noise enters `h1`.
fn hypothesis_cases(grid: &Grid) -> Vec<(&'static str, ModelSpec, ForcingProfile, NoiseSpec)> {
    let additive = |sigma: f64| NoiseSpec {
        modes: 8,
        diffusion: Diffusion::Additive,
        sigma: SigmaSchedule::Constant { value: sigma },
        master_seed: 0,
    };
    let rd = ModelSpec::new(DriftKind::Laplacian, 2.0, grid, tanh(0.5)).unwrap();
    let pl = ModelSpec::new(DriftKind::PowerLaw, 4.0, grid, tanh(0.5)).unwrap();
    let pp = ModelSpec::new(DriftKind::PLaplace, 3.0, grid, tanh(0.1)).unwrap();
    let pm = ModelSpec::new(
        DriftKind::PorousMedium,
        3.0,
        grid,
        ReactionSpec {
            form: ReactionForm::Linear,
            gamma1: 0.5,
            gamma2: 0.5,
        },
    )
    .unwrap()
    .with_psi(PsiSpec { linear: 0.5 });
    let mut out = vec![(
        "reaction-diffusion",
        rd,
        ForcingProfile::zero(),
        NoiseSpec::scalar_multiplicative(1.0, 0),
    )];
    for (name, m, sigma) in [("power-law", pl, 0.5), ("p-laplace", pp, 0.3), ("porous-medium", pm, 0.3)] {
        let noise = additive(sigma);
        let field = NoiseField::new(&noise, grid, &m.triple).unwrap();
        let hs = field.hs_norm_sq(&StateVector::zeros(*grid));
        let mut profile = ForcingProfile::zero();
        profile.h1 = TimeFn::Constant {
            value: m.structural_h1() + hs,
        };
        profile.h2 = TimeFn::Constant {
            value: m.structural_h2(),
        };
        out.push((name, m, profile, noise));
    }
    out
}

fn criterion_2() -> Verdict {
    let grid = Grid::new(63, 1.0).unwrap();
    let mut details = Vec::new();
    let mut ok = true;
    for (name, model, profile, noise) in hypothesis_cases(&grid) {
        let start = Instant::now();
        let consts = model.example_constants(1.0).unwrap();
        let field = NoiseField::new(&noise, &grid, &model.triple).unwrap();
        let gap = check_dissipativity_gap_with(&consts, model.gap_form());
        let reports = match check_all(&model, &grid, &field, &consts, &profile, 10_000, 2024) {
            Ok(r) => r,
            Err(e) => {
                ok = false;
                details.push(format!("{name}: {e}"));
                continue;
            }
        };
        let elapsed = start.elapsed();
        let violations: usize = reports.iter().map(|r| r.violations).sum();
        let passed = gap.holds && violations == 0 && elapsed < Duration::from_secs(10);
        ok &= passed;
        details.push(format!(
            "{name} {} violations in {} checks, {:.1} s",
            violations,
            reports.len(),
            elapsed.as_secs_f64()
        ));
    }
    verdict(ok, details.join("; "))
}

fn heat() -> (Grid, ModelSpec) {
    let grid = Grid::new(127, 1.0).unwrap();
    let model = ModelSpec::new(DriftKind::Laplacian, 2.0, &grid, ReactionSpec::zero()).unwrap();
    (grid, model)
}

fn criterion_3() -> Verdict {
    let (grid, model) = heat();
    let start = Instant::now();
    let noise = NoiseField::new(&NoiseSpec::zero(0), &grid, &model.triple).unwrap();
    let u0 = StateVector::new(grid, grid.sine_mode(1));
    let cfg = SimConfig {
        dt: 1e-4,
        scheme: Scheme::SemiImplicitEm,
        t_start: 0.0,
        t_end: 0.1,
        epsilon: 1.0,
        record_every: 0,
    };
    let traj = integrate_path(&u0, cfg, &model, &ForcingProfile::zero(), &noise, 0).unwrap();
    let elapsed = start.elapsed();
    let exact = (-2.0 * grid.lambda1() * 0.1).exp() * u0.l2_norm_sq();
    let err = rel(*traj.h_norm_sq_series.last().unwrap(), exact);
    verdict(
        err < 0.01 && elapsed < Duration::from_secs(5),
        format!("rel err {err:.2e}, {:.0} ms", ms(elapsed)),
    )
}

/// Heat run of criterion 3 as a moment series for the residual.
fn heat_series() -> (ExperimentSpec, MomentSeries) {
    let (grid, model) = heat();
    let consts = model.example_constants_with(0.0, 0.1, 1.0).unwrap();
    let mut spec = experiment(grid, model, consts, NoiseSpec::zero(0));
    spec.dt = 1e-4;
    spec.record_every = 20;
    let u0 = StateVector::new(grid, grid.sine_mode(1));
    let series = estimate_mean_square_from(&spec, &u0, 0.1).unwrap();
    (spec, series)
}

fn gbm_run(record_every: usize) -> (ExperimentSpec, StateVector, MomentSeries) {
    let grid = Grid::new(3, 1.0).unwrap();
    let model = ModelSpec::new(DriftKind::PowerLaw, 2.0, &grid, ReactionSpec::zero()).unwrap();
    let consts = model.example_constants_with(0.0, 0.1, 1.0).unwrap();
    let mut spec = experiment(grid, model, consts, NoiseSpec::scalar_multiplicative(1.0, 4242));
    spec.paths = 10_000;
    spec.record_every = record_every;
    let u0 = StateVector::new(grid, grid.sine_mode(1));
    let series = estimate_mean_square_from(&spec, &u0, 1.0).unwrap();
    (spec, u0, series)
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let (_, u0, series) = gbm_run(0);
    let elapsed = start.elapsed();
    // a = 1, eps sigma = 1
    let target = (-2.0f64 + 1.0).exp() * u0.l2_norm_sq();
    let (m, se) = (*series.mean_sq.last().unwrap(), *series.std_err.last().unwrap());
    let z = (m - target).abs() / se;
    verdict(
        z <= 3.0 && elapsed < Duration::from_secs(30),
        format!("mean {m:.5} vs {target:.5}, {z:.2} std errs, {:.1} s", elapsed.as_secs_f64()),
    )
}

fn criterion_5() -> Verdict {
    let grid = Grid::new(63, 1.0).unwrap();
    let model = ModelSpec::new(DriftKind::Laplacian, 2.0, &grid, tanh(0.5)).unwrap();
    let mut consts = model.example_constants(1.0).unwrap();
    let eps_tilde = noise_threshold_example(&ExampleModel::ReactionDiffusion {
        lambda: consts.lambda,
        gamma2: consts.gamma2,
    })
    .unwrap();
    consts.epsilon = 0.5 * eps_tilde;
    let mut spec = experiment(grid, model, consts, NoiseSpec::scalar_multiplicative(1.0, 99));
    spec.t_values = vec![1.0, 2.0, 4.0, 8.0];
    spec.paths = 2000;
    spec.certified = true;
    spec.profile = ForcingProfile::field(TimeFn::Constant { value: 1.0 }, SpatialShape::Constant);
    let start = Instant::now();
    let report = match pullback_absorption(&spec) {
        Ok(r) => r,
        Err(e) => return verdict(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let means: Vec<String> = report.entries.iter().map(|e| format!("{:.4}", e.mean_sq)).collect();
    verdict(
        report.eventually_absorbed() && report.monotone && elapsed < Duration::from_secs(120),
        format!(
            "R(tau) = {:.4} (L = {:.4}), E|u|^2 = [{}], entry t = {:?}, monotone = {}, {:.1} s",
            report.radius,
            report.l,
            means.join(", "),
            report.entry_time,
            report.monotone,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Verdict {
    let mut details = Vec::new();
    let mut ok = true;
    let (spec3, series3) = heat_series();
    let (spec4, _, series4) = gbm_run(10);
    for (name, spec, series) in [("run 3", &spec3, &series3), ("run 4", &spec4, &series4)] {
        let w = derive_gronwall_constants(&spec.consts, spec.model.gap_form()).unwrap();
        let r = gronwall_residual(series, &spec.consts, &spec.profile, &w.rhs(), spec.grid.domain_length)
            .unwrap();
        ok &= r.violation_fraction <= 0.05;
        details.push(format!("{name} {}/{} over band", r.violations, r.points));
    }
    verdict(ok, details.join("; "))
}

fn criterion_7() -> Verdict {
    let profile = ForcingProfile::with_g_norm_sq(TimeFn::Exponential { coef: 1.0, rate: 1.0 });
    let start = Instant::now();
    let v = tempered_integral(&profile, 0.0, 1.0, 2.0, 1.0, 1e-9);
    let elapsed = start.elapsed();
    match v {
        Ok(v) => verdict(
            (v - 0.5).abs() <= 1e-6 && elapsed < Duration::from_millis(10),
            format!("{v:.10}, {:.3} ms", ms(elapsed)),
        ),
        Err(e) => verdict(false, e.to_string()),
    }
}

fn criterion_8() -> Verdict {
    let mut ok = true;
    let mut details = Vec::new();
    for n in [15, 63, 255] {
        let grid = Grid::new(n, 1.0).unwrap();
        let model = ModelSpec::new(DriftKind::Laplacian, 2.0, &grid, ReactionSpec::zero()).unwrap();
        let h = grid.spacing;
        let closed = 2.0 / (h * h) * (1.0 - (std::f64::consts::PI * h).cos());
        let minimal = discrete_poincare_constant(&grid);
        let sampled = sampled_poincare_quotient(&model, &grid, 1000, 8);
        let paper = pullback_core::constants::poincare_lambda(&model.triple).unwrap();
        let err = rel(minimal, closed);
        ok &= err <= 1e-8 && minimal > paper && sampled >= minimal * (1.0 - 1e-12);
        details.push(format!("N={n} {minimal:.6} (rel err {err:.1e}) > {paper}"));
    }
    verdict(ok, details.join("; "))
}

fn criterion_9() -> Verdict {
    let text = |workers: usize, out: &std::path::Path| {
        format!(
            r#"
seed = 2718
output = "{}"
[grid]
n = 63
[model]
kind = "laplacian"
[reaction]
form = "tanh"
gamma1 = 0.5
gamma2 = 0.5
[constants]
source = "preset"
epsilon_fraction = 0.5
[forcing]
g = {{ kind = "field", amplitude = {{ kind = "constant", value = 1.0 }}, shape = {{ kind = "constant" }} }}
[noise]
diffusion = "scalar-multiplicative"
sigma = {{ kind = "constant", value = 1.0 }}
[sim]
dt = 1e-3
[experiment]
t_values = [1.0, 2.0]
paths = 200
rho = {{ kind = "constant", value = 1.0 }}
certified = true
workers = {workers}
"#,
            out.display()
        )
    };
    let dir = tempfile::TempDir::new().unwrap();
    let mut reports = Vec::new();
    for workers in [1, 4] {
        let out = dir.path().join(format!("w{workers}"));
        let cfg = RunConfig::from_toml(&text(workers, &out)).unwrap();
        if let Err(e) = run(Command::Absorb, &cfg) {
            return verdict(false, e.to_string());
        }
        reports.push(std::fs::read(out.join("absorb.json")).unwrap());
    }
    verdict(
        reports[0] == reports[1],
        format!("absorb.json {} bytes, workers 1 vs 4", reports[0].len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("threshold formulas", criterion_1),
        ("hypothesis suite", criterion_2),
        ("deterministic decay oracle", criterion_3),
        ("stochastic moment oracle", criterion_4),
        ("pullback absorption", criterion_5),
        ("Gronwall residual", criterion_6),
        ("tempered quadrature", criterion_7),
        ("discrete Poincare certification", criterion_8),
        ("reproducibility", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        let tag = if v.passed { "PASS" } else { "FAIL" };
        println!("criterion {} {name}: {tag} ({})", i + 1, v.detail);
        failed += usize::from(!v.passed);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
