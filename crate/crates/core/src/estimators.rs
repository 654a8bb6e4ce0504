//! Monte Carlo moment estimation, the pullback absorption experiment, the
//! energy-inequality residual and decay fits.
//!
//! Paths run in parallel but are collected in path order and reduced with a
//! sequential Welford pass, so every estimate is independent of the worker
//! count. Path `i` always uses increment stream `i`; horizons share noise on
//! their common steps (common random numbers).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{noise_threshold_with, StructuralConstants};
use crate::discretization::{h_norm_sq, Grid, ModelSpec, StateVector, Tridiagonal};
use crate::energy::{derive_gronwall_constants, RhsConstants};
use crate::error::{invalid, Error, Result};
use crate::forcing::{absorbing_radius, is_tempered_family, ForcingProfile, RadiusFamily};
use crate::hypotheses::sample_state;
use crate::integrator::{unit_first_mode, PathIntegrator, Scheme, SimConfig};
use crate::noise::{NoiseField, NoiseSpec};
use crate::rng::{standard_normal, stream, Purpose};

/// How `u0` is drawn from the ball of radius `rho(tau - t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitialLaw {
    /// `u0 = rho e1 / |e1|_H` for every path.
    #[default]
    ExtremePoint,
    /// Uniform in the `H`-ball, independently per path.
    UniformInBall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum LMode {
    Derived,
    Explicit { value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub tau: f64,
    pub t_values: Vec<f64>,
    pub paths: usize,
    pub rho: RadiusFamily,
    pub law: InitialLaw,
    pub grid: Grid,
    pub model: ModelSpec,
    pub profile: ForcingProfile,
    pub noise: NoiseSpec,
    pub dt: f64,
    pub scheme: Scheme,
    /// Series resolution in steps; 0 records the terminal value only.
    pub record_every: usize,
    pub consts: StructuralConstants,
    pub certified: bool,
    pub l_mode: LMode,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
    pub quad_tol: f64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 2 {
            return Err(invalid(format!("need at least 2 paths, got {}", self.paths)));
        }
        if self.t_values.is_empty() {
            return Err(invalid("t_values is empty"));
        }
        if self.t_values.iter().any(|t| !(*t >= 0.0)) {
            return Err(invalid("t_values must be nonnegative"));
        }
        if self.t_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("t_values must be strictly increasing"));
        }
        if let LMode::Explicit { value } = self.l_mode {
            if !(value > 0.0) {
                return Err(invalid(format!("L must be > 0, got {value}")));
            }
        }
        self.consts.validate()?;
        self.noise.validate()
    }

    fn sim_config(&self, t: f64, record_every: usize) -> SimConfig {
        SimConfig {
            dt: self.dt,
            scheme: self.scheme,
            t_start: self.tau - t,
            t_end: self.tau,
            epsilon: self.consts.epsilon,
            record_every,
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| invalid(format!("cannot start worker pool: {e}")))
    }
}

/// `E|u(r)|_H^2` estimates on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    pub mean_sq: Vec<f64>,
    pub std_err: Vec<f64>,
    pub paths: usize,
    pub stiff_steps: u64,
}

fn welford(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows[0].len();
    let mut mean = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    for (count, row) in rows.iter().enumerate() {
        let c = (count + 1) as f64;
        for i in 0..n {
            let d = row[i] - mean[i];
            mean[i] += d / c;
            m2[i] += d * (row[i] - mean[i]);
        }
    }
    let m = rows.len() as f64;
    let se = m2
        .iter()
        .map(|s| (s.max(0.0) / (m - 1.0)).sqrt() / m.sqrt())
        .collect();
    (mean, se)
}

fn initial_state(spec: &ExperimentSpec, radius: f64, path_id: u64, unit: &[f64]) -> StateVector {
    let grid = spec.grid;
    match spec.law {
        InitialLaw::ExtremePoint => StateVector::new(grid, unit.iter().map(|v| radius * v).collect()),
        InitialLaw::UniformInBall => {
            let mut rng = stream(spec.noise.master_seed, path_id, Purpose::InitialState);
            let dir: Vec<f64> = (0..grid.n_interior).map(|_| standard_normal(&mut rng)).collect();
            let n = h_norm_sq(&StateVector::new(grid, dir.clone()), &spec.model.triple).sqrt();
            let r = radius * rng.random::<f64>().powf(1.0 / grid.n_interior as f64);
            StateVector::new(grid, dir.iter().map(|v| r * v / n).collect())
        }
    }
}

fn run_ensemble<F>(spec: &ExperimentSpec, t: f64, record_every: usize, u0: F) -> Result<MomentSeries>
where
    F: Fn(u64) -> StateVector + Sync,
{
    spec.validate()?;
    let field = NoiseField::new(&spec.noise, &spec.grid, &spec.model.triple)?;
    let cfg = spec.sim_config(t, record_every);
    let integrator = PathIntegrator::new(&spec.grid, &spec.model, &spec.profile, &field, cfg)?;
    let results: Vec<Result<(Vec<f64>, Vec<f64>, u64)>> = spec.pool()?.install(|| {
        (0..spec.paths as u64)
            .into_par_iter()
            .map(|i| {
                integrator
                    .run(&u0(i), i, false)
                    .map(|tr| (tr.times, tr.h_norm_sq_series, tr.stiff_steps))
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(spec.paths);
    let mut times = Vec::new();
    let mut stiff = 0;
    for r in results {
        let (tm, row, s) = r?;
        times = tm;
        stiff += s;
        rows.push(row);
    }
    let (mean_sq, std_err) = welford(&rows);
    Ok(MomentSeries {
        times,
        mean_sq,
        std_err,
        paths: spec.paths,
        stiff_steps: stiff,
    })
}

/// Runs `spec.paths` paths from `tau - t` to `tau` with `u0` drawn from the
/// initial family, recording every `spec.record_every` steps.
pub fn estimate_mean_square(spec: &ExperimentSpec, t: f64) -> Result<MomentSeries> {
    let radius = spec.rho.eval(spec.tau - t);
    let unit = unit_first_mode(&spec.grid, &spec.model);
    run_ensemble(spec, t, spec.record_every, |i| initial_state(spec, radius, i, &unit))
}

/// As [`estimate_mean_square`] with a fixed initial state.
pub fn estimate_mean_square_from(
    spec: &ExperimentSpec,
    u0: &StateVector,
    t: f64,
) -> Result<MomentSeries> {
    if u0.grid != spec.grid {
        return Err(invalid("initial state lives on a different grid"));
    }
    run_ensemble(spec, t, spec.record_every, |_| u0.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbsorptionEntry {
    pub t: f64,
    pub initial_norm_sq: f64,
    pub mean_sq: f64,
    pub std_err: f64,
    pub absorbed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsorptionReport {
    pub tau: f64,
    pub radius: f64,
    pub l: f64,
    pub l_derived: bool,
    pub decay: f64,
    pub epsilon: f64,
    /// `eps0`, when the dissipativity gap is open.
    pub threshold: Option<f64>,
    pub certified: bool,
    pub paths: usize,
    pub entries: Vec<AbsorptionEntry>,
    /// Smallest tested `t` from which every tested horizon is absorbed.
    pub entry_time: Option<f64>,
    /// Terminal means non-increasing in `t` within three standard errors.
    pub monotone: bool,
}

impl AbsorptionReport {
    pub fn eventually_absorbed(&self) -> bool {
        self.entry_time.is_some()
    }
}

pub fn pullback_absorption(spec: &ExperimentSpec) -> Result<AbsorptionReport> {
    spec.validate()?;
    let consts = &spec.consts;
    let decay = consts.decay_rate();
    if !is_tempered_family(&spec.rho, decay)? {
        return Err(Error::Precondition(format!(
            "initial family is not tempered at rate lambda*gamma5 = {decay}"
        )));
    }
    let form = spec.model.gap_form();
    let threshold = noise_threshold_with(consts, form);
    if spec.certified {
        let eps0 = threshold.clone()?;
        if consts.epsilon > eps0 {
            return Err(Error::Precondition(format!(
                "certified run needs epsilon <= eps0 = {eps0}, got {}",
                consts.epsilon
            )));
        }
    }
    let (l, l_derived) = match spec.l_mode {
        LMode::Derived => (derive_gronwall_constants(consts, form)?.l, true),
        LMode::Explicit { value } => (value, false),
    };
    let mut profile = spec.profile.clone();
    profile.bind_discrete_norm(&spec.grid, spec.model.triple.is_l2_based());
    let radius = absorbing_radius(
        spec.tau,
        l,
        &profile,
        decay,
        consts.alpha,
        spec.grid.domain_length,
        spec.quad_tol,
    )?;
    let unit = unit_first_mode(&spec.grid, &spec.model);
    let mut entries = Vec::with_capacity(spec.t_values.len());
    for &t in &spec.t_values {
        let r0 = spec.rho.eval(spec.tau - t);
        let series = run_ensemble(spec, t, 0, |i| initial_state(spec, r0, i, &unit))?;
        let mean_sq = *series.mean_sq.last().unwrap();
        let std_err = *series.std_err.last().unwrap();
        entries.push(AbsorptionEntry {
            t,
            initial_norm_sq: r0 * r0,
            mean_sq,
            std_err,
            absorbed: mean_sq <= radius + 3.0 * std_err,
        });
    }
    let entry_time = entries
        .iter()
        .rposition(|e| !e.absorbed)
        .map_or(Some(0), |i| (i + 1 < entries.len()).then_some(i + 1))
        .map(|i| entries[i].t);
    let monotone = entries.windows(2).all(|w| {
        let band = 3.0 * (w[0].std_err.powi(2) + w[1].std_err.powi(2)).sqrt();
        w[1].mean_sq <= w[0].mean_sq + band
    });
    Ok(AbsorptionReport {
        tau: spec.tau,
        radius,
        l,
        l_derived,
        decay,
        epsilon: consts.epsilon,
        threshold: threshold.ok(),
        certified: spec.certified,
        paths: spec.paths,
        entries,
        entry_time,
        monotone,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub points: usize,
    pub violations: usize,
    pub violation_fraction: f64,
    /// Largest `residual - 3 sigma`.
    pub max_excess: f64,
    pub residuals: Vec<f64>,
}

/// Residual `dm/dr + lambda gamma5 m - RHS(r)` at interior points by central
/// differences, compared against three times its propagated standard error.
pub fn gronwall_residual(
    series: &MomentSeries,
    consts: &StructuralConstants,
    profile: &ForcingProfile,
    rhs: &RhsConstants,
    domain_length: f64,
) -> Result<ResidualReport> {
    let n = series.times.len();
    if n < 3 {
        return Err(invalid(format!("residual needs >= 3 points, got {n}")));
    }
    let decay = consts.decay_rate();
    let mut residuals = Vec::with_capacity(n - 2);
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    for i in 1..n - 1 {
        let (m, se, t) = (&series.mean_sq, &series.std_err, &series.times);
        let span = t[i + 1] - t[i - 1];
        let deriv = (m[i + 1] - m[i - 1]) / span;
        let r = t[i];
        let bound = rhs.eval(
            profile.g_norm_sq(r, domain_length),
            profile.h1.eval(r),
            profile.h2.eval(r),
            consts.alpha,
        );
        let residual = deriv + decay * m[i] - bound;
        let sigma = (se[i + 1].powi(2) + se[i - 1].powi(2)).sqrt() / span + decay * se[i];
        let slack = 1e-12 * (deriv.abs() + decay * m[i] + bound.abs());
        let excess = residual - 3.0 * sigma;
        if excess > slack {
            violations += 1;
        }
        max_excess = max_excess.max(excess);
        residuals.push(residual);
    }
    Ok(ResidualReport {
        points: n - 2,
        violations,
        violation_fraction: violations as f64 / (n - 2) as f64,
        max_excess,
        residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares slope of `log(mean_sq)` against time on `[from, to]`.
pub fn decay_rate_fit(series: &MomentSeries, window: (f64, f64)) -> Result<DecayFit> {
    let (from, to) = window;
    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.mean_sq)
        .filter(|(t, _)| **t >= from && **t <= to)
        .map(|(t, m)| (*t, *m))
        .collect();
    if pts.len() < 2 {
        return Err(invalid(format!(
            "window [{from}, {to}] holds {} points, need >= 2",
            pts.len()
        )));
    }
    if let Some((t, m)) = pts.iter().find(|(_, m)| !(*m > 0.0)) {
        return Err(Error::Domain(format!(
            "mean square {m} at t = {t} is not positive"
        )));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let rate = sxy / sxx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - rate * (x - mx)).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(DecayFit {
        rate,
        r_squared,
        points: pts.len(),
    })
}

fn lp_norm_sq(v: &[f64], h: f64, p: f64) -> f64 {
    (h * v.iter().map(|x| x.abs().powf(p)).sum::<f64>()).powf(2.0 / p)
}

/// Minimum of `|v|_{L^p}^2 / |v|_{H^-1}^2` over sampled and low-frequency
/// states on `grid`.
pub fn certify_lambda_hat(grid: &Grid, p: f64, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(invalid("samples must be >= 1"));
    }
    if !(p >= 2.0) {
        return Err(invalid(format!("p must be >= 2, got {p}")));
    }
    let h = grid.spacing;
    let t = Tridiagonal::dirichlet(grid);
    let quotient = |v: &[f64]| {
        let w = t.solve(v);
        let den = h * v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        if den > 0.0 {
            lp_norm_sq(v, h, p) / den
        } else {
            f64::INFINITY
        }
    };
    let mut best = (1..=4)
        .map(|k| quotient(&grid.sine_mode(k.min(grid.n_interior))))
        .fold(f64::INFINITY, f64::min);
    for i in 0..samples {
        let mut rng = stream(seed, i as u64, Purpose::Sampling);
        best = best.min(quotient(&sample_state(grid, &mut rng)));
    }
    Ok(best)
}

/// Number of eigenvalues of `T = (1/h^2) tridiag(-1, 2, -1)` below `x`.
fn sturm_count(n: usize, h2: f64, x: f64) -> usize {
    let diag = 2.0 / h2 - x;
    let off2 = 1.0 / (h2 * h2);
    let mut count = 0;
    let mut d = diag;
    for i in 0..n {
        if i > 0 {
            d = diag - off2 / d;
        }
        if d == 0.0 {
            d = f64::MIN_POSITIVE;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue of the discrete Dirichlet operator by Sturm bisection,
/// i.e. the minimum of the discrete Rayleigh quotient `|v|_{H01}^2 / |v|_{L2}^2`.
pub fn discrete_poincare_constant(grid: &Grid) -> f64 {
    let h2 = grid.spacing * grid.spacing;
    let n = grid.n_interior;
    let (mut lo, mut hi) = (0.0, 4.0 / h2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(n, h2, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}
