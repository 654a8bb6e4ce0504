//! Sampled verification of (H0), (H2)-(H4), the diffusion bound and the
//! `Psi` conditions on a discrete model.
//!
//! States are drawn from a fixed mixture: Gaussian nodal values at a random
//! scale, random low-frequency sine sums, large-amplitude Gaussians (x100),
//! sparse spikes, and occasionally the zero state. All draws come from the
//! `Sampling` stream of the seed, indexed by trial, so reports are
//! deterministic.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constants::{h2_young_constant, GapForm, StructuralConstants};
use crate::discretization::{
    apply_drift, apply_reaction, h_inner, h_norm_sq, v_norm, v_norm_alpha, DriftKind, Grid,
    ModelSpec, StateVector, Tridiagonal,
};
use crate::error::{invalid, Result};
use crate::forcing::ForcingProfile;
use crate::noise::{check_diffusion_bound, NoiseField};
use crate::rng::{standard_normal, stream, Purpose};

/// Relative slack for floating-point rounding in sampled inequalities.
pub const REL_TOL: f64 = 1e-9;

/// Outcome of a sampled inequality check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Smallest `rhs - lhs`.
    pub worst_margin: f64,
    /// Smallest `(rhs - lhs) / sum |terms|`.
    pub worst_relative_margin: f64,
    /// Best constant the samples admit, where one is meaningful.
    pub empirical_constant: Option<f64>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct Tally {
    name: &'static str,
    trials: usize,
    violations: usize,
    worst_margin: f64,
    worst_relative_margin: f64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            trials: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            worst_relative_margin: f64::INFINITY,
        }
    }

    /// Records `lhs <= rhs` where `scale` is the sum of absolute terms.
    fn record(&mut self, lhs: f64, rhs: f64, scale: f64) {
        let margin = rhs - lhs;
        let rel = if scale > 0.0 { margin / scale } else { 0.0 };
        self.trials += 1;
        if !(rel >= -REL_TOL) {
            self.violations += 1;
        }
        self.worst_margin = self.worst_margin.min(margin);
        self.worst_relative_margin = self.worst_relative_margin.min(rel);
    }

    fn finish(self, empirical_constant: Option<f64>) -> CheckReport {
        CheckReport {
            name: self.name.to_string(),
            trials: self.trials,
            violations: self.violations,
            worst_margin: self.worst_margin,
            worst_relative_margin: self.worst_relative_margin,
            empirical_constant: empirical_constant.filter(|c| c.is_finite()),
        }
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(invalid("trials must be >= 1"));
    }
    Ok(())
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    stream(seed, trial as u64, Purpose::Sampling)
}

fn gaussian(grid: &Grid, rng: &mut ChaCha8Rng, scale: f64) -> Vec<f64> {
    (0..grid.n_interior)
        .map(|_| scale * standard_normal(rng))
        .collect()
}

/// One state from the sampling mixture.
pub fn sample_state(grid: &Grid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let scale = 10f64.powf(rng.random_range(-2.0..1.0));
    match rng.random_range(0..20u32) {
        0 => vec![0.0; grid.n_interior],
        1..=5 => gaussian(grid, rng, scale),
        6..=10 => {
            let coeffs: Vec<f64> = (0..4).map(|_| scale * standard_normal(rng)).collect();
            let len = grid.domain_length;
            grid.nodes()
                .map(|x| {
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, c)| c * ((k + 1) as f64 * PI * x / len).sin())
                        .sum()
                })
                .collect()
        }
        11..=15 => gaussian(grid, rng, 100.0 * scale),
        _ => {
            let mut v = vec![0.0; grid.n_interior];
            for _ in 0..rng.random_range(1..=3usize) {
                let i = rng.random_range(0..grid.n_interior);
                v[i] += 10.0 * scale * standard_normal(rng);
            }
            v
        }
    }
}

fn sample_time(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-10.0..10.0)
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// (H0): `|F(u) - F(v)|_H <= gamma1 |u - v|_H` and `|F(u)|_H <= gamma2 (1 + |u|_H)`.
pub fn sampled_check_h0(
    model: &ModelSpec,
    grid: &Grid,
    consts: &StructuralConstants,
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    check_trials(trials)?;
    let mut tally = Tally::new("H0");
    let mut lipschitz: f64 = 0.0;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let u = StateVector::new(*grid, sample_state(grid, &mut rng));
        let v = StateVector::new(*grid, sample_state(grid, &mut rng));
        let fu = apply_reaction(&u, &model.reaction);
        let fv = apply_reaction(&v, &model.reaction);
        let du = StateVector::new(*grid, diff(&u.values, &v.values));
        let dfu = StateVector::new(*grid, diff(&fu.values, &fv.values));
        let d = h_norm_sq(&du, &model.triple).sqrt();
        let df = h_norm_sq(&dfu, &model.triple).sqrt();
        tally.record(df, consts.gamma1 * d, df + consts.gamma1 * d);
        if d > 0.0 {
            lipschitz = lipschitz.max(df / d);
        }
        let nf = h_norm_sq(&fu, &model.triple).sqrt();
        let nu = h_norm_sq(&u, &model.triple).sqrt();
        let rhs = consts.gamma2 * (1.0 + nu);
        tally.record(nf, rhs, nf + rhs);
    }
    Ok(tally.finish(Some(lipschitz)))
}

/// (H2): `2 gamma1 |d|^2 + 2 <A(v1) - A(v2), d> + |G(v1) - G(v2)|^2 <= gamma3 |d|^2`,
/// `d = v1 - v2`. The empirical constant is the smallest admissible `gamma3`.
pub fn sampled_check_h2(
    model: &ModelSpec,
    grid: &Grid,
    noise: &NoiseField,
    consts: &StructuralConstants,
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    check_trials(trials)?;
    let mut tally = Tally::new("H2");
    let mut gamma3: f64 = f64::NEG_INFINITY;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let v1 = sample_state(grid, &mut rng);
        let v2 = match rng.random_range(0..4u32) {
            0 => v1.clone(),
            1 => {
                let eps = 10f64.powf(rng.random_range(-6.0..-1.0));
                v1.iter()
                    .map(|x| x + eps * (1.0 + x.abs()) * standard_normal(&mut rng))
                    .collect()
            }
            _ => sample_state(grid, &mut rng),
        };
        let v1 = StateVector::new(*grid, v1);
        let v2 = StateVector::new(*grid, v2);
        let d = diff(&v1.values, &v2.values);
        let da = diff(&apply_drift(&v1, model).values, &apply_drift(&v2, model).values);
        let dn = h_norm_sq(&StateVector::new(*grid, d.clone()), &model.triple);
        let pairing = 2.0 * h_inner(&da, &d, grid, &model.triple);
        let hs = noise.hs_norm_sq_diff(&v1, &v2);
        let lhs = 2.0 * consts.gamma1 * dn + pairing + hs;
        let rhs = consts.gamma3 * dn;
        let scale = (2.0 * consts.gamma1 * dn).abs() + pairing.abs() + hs + rhs.abs();
        tally.record(lhs, rhs, scale);
        if dn > 0.0 {
            gamma3 = gamma3.max(lhs / dn);
        }
    }
    Ok(tally.finish(Some(gamma3)))
}

/// (H3): `2 <A(v), v> + |G(v)|^2 <= gamma4 |v|_H^2 - 3 gamma5 |v|_V^alpha + h1(t)`.
/// The empirical constant is the largest admissible `gamma5`.
pub fn sampled_check_h3(
    model: &ModelSpec,
    grid: &Grid,
    noise: &NoiseField,
    consts: &StructuralConstants,
    profile: &ForcingProfile,
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    check_trials(trials)?;
    let mut tally = Tally::new("H3");
    let mut gamma5 = f64::INFINITY;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let v = StateVector::new(*grid, sample_state(grid, &mut rng));
        let t = sample_time(&mut rng);
        let pairing = 2.0 * h_inner(&apply_drift(&v, model).values, &v.values, grid, &model.triple);
        let hs = noise.hs_norm_sq(&v);
        let hn = h_norm_sq(&v, &model.triple);
        let vn = v_norm_alpha(&v, model);
        let h1 = profile.h1.eval(t);
        let lhs = pairing + hs;
        let rhs = consts.gamma4 * hn - 3.0 * consts.gamma5 * vn + h1;
        let scale = pairing.abs() + hs + (consts.gamma4 * hn).abs() + 3.0 * consts.gamma5 * vn + h1.abs();
        tally.record(lhs, rhs, scale);
        if vn > 0.0 {
            gamma5 = gamma5.min((consts.gamma4 * hn + h1 - lhs) / (3.0 * vn));
        }
    }
    Ok(tally.finish(Some(gamma5)))
}

/// Drift-only coercivity `2 <A(v), v> <= -3 gamma5 |v|_V^alpha`, the hypothesis
/// behind [`GapForm::DriftOnly`].
pub fn sampled_check_drift_coercivity(
    model: &ModelSpec,
    grid: &Grid,
    consts: &StructuralConstants,
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    check_trials(trials)?;
    let mut tally = Tally::new("drift-coercivity");
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let v = StateVector::new(*grid, sample_state(grid, &mut rng));
        let pairing = 2.0 * h_inner(&apply_drift(&v, model).values, &v.values, grid, &model.triple);
        let rhs = -3.0 * consts.gamma5 * v_norm_alpha(&v, model);
        tally.record(pairing, rhs, pairing.abs() + rhs.abs());
    }
    Ok(tally.finish(None))
}

/// `<f, w> / |w|_V` maximized over a candidate set; a lower bound of `|f|_{V*}`.
pub fn dual_norm_lower_bound(
    f: &[f64],
    v: &StateVector,
    model: &ModelSpec,
    rng: &mut ChaCha8Rng,
    random_candidates: usize,
) -> f64 {
    let grid = &v.grid;
    let triple = &model.triple;
    let riesz = if triple.is_l2_based() {
        f.to_vec()
    } else {
        Tridiagonal::dirichlet(grid).solve(f)
    };
    let q = 1.0 / (model.p - 1.0);
    let mut candidates = vec![
        v.values.clone(),
        f.to_vec(),
        riesz.iter().map(|r| r.signum() * r.abs().powf(q)).collect(),
        Tridiagonal::dirichlet(grid).solve(f),
    ];
    candidates.extend((0..random_candidates).map(|_| gaussian(grid, rng, 1.0)));
    candidates
        .into_iter()
        .map(|w| {
            let w = StateVector::new(*grid, w);
            let n = v_norm(&w, model);
            if n > 0.0 {
                (h_inner(f, &w.values, grid, triple) / n).abs()
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// (H4): `|A(v)|_{V*} <= gamma6 |v|_V^{alpha-1} + h2(t)`, with the dual norm
/// replaced by a sampled lower bound (a necessary-condition check). The
/// empirical constant is the smallest admissible `gamma6`.
pub fn sampled_check_h4(
    model: &ModelSpec,
    grid: &Grid,
    consts: &StructuralConstants,
    profile: &ForcingProfile,
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    check_trials(trials)?;
    let mut tally = Tally::new("H4");
    let mut gamma6: f64 = f64::NEG_INFINITY;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let v = StateVector::new(*grid, sample_state(grid, &mut rng));
        let t = sample_time(&mut rng);
        let a = apply_drift(&v, model);
        let lhs = dual_norm_lower_bound(&a.values, &v, model, &mut rng, 4);
        let vn = v_norm(&v, model).powf(consts.alpha - 1.0);
        let h2 = profile.h2.eval(t);
        let rhs = consts.gamma6 * vn + h2;
        tally.record(lhs, rhs, lhs + consts.gamma6 * vn + h2.abs());
        if vn > 0.0 {
            gamma6 = gamma6.max((lhs - h2) / vn);
        }
    }
    Ok(tally.finish(Some(gamma6)))
}

/// The diffusion bound derived from (H3) and (H4) on sampled states and times.
pub fn sampled_check_h5(
    model: &ModelSpec,
    grid: &Grid,
    noise: &NoiseField,
    consts: &StructuralConstants,
    profile: &ForcingProfile,
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    check_trials(trials)?;
    let mut tally = Tally::new("diffusion-bound");
    let c = h2_young_constant(consts.gamma5, consts.alpha)?;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let v = StateVector::new(*grid, sample_state(grid, &mut rng));
        let t = sample_time(&mut rng);
        let b = check_diffusion_bound(&v, t, noise, model, consts, profile)?;
        let scale = b.lhs
            + consts.gamma4.abs() * h_norm_sq(&v, &model.triple)
            + 2.0 * consts.gamma6 * v_norm_alpha(&v, model)
            + c * profile.h2.eval(t).abs().powf(consts.h2_exponent())
            + profile.h1.eval(t).abs();
        tally.record(b.lhs, b.rhs, scale);
    }
    Ok(tally.finish(None))
}

/// Monotonicity, coercivity and growth of `Psi` on sampled scalars.
pub fn sampled_check_psi(model: &ModelSpec, trials: usize, seed: u64) -> Result<CheckReport> {
    check_trials(trials)?;
    let p = model.p;
    let b = model.psi.params();
    let mut tally = Tally::new("Psi");
    let mut rng = stream(seed, 0, Purpose::Sampling);
    for _ in 0..trials {
        let draw = |rng: &mut ChaCha8Rng| {
            10f64.powf(rng.random_range(-3.0..3.0)) * if rng.random::<bool>() { 1.0 } else { -1.0 }
        };
        let s = draw(&mut rng);
        let t = draw(&mut rng);
        let (ps, pt) = (model.psi.eval(s, p), model.psi.eval(t, p));
        let mono = (t - s) * (pt - ps);
        tally.record(0.0, mono, mono.abs());
        let coerc = b.beta1 * s.abs().powf(p) - b.beta2;
        tally.record(coerc, s * ps, coerc.abs() + (s * ps).abs());
        let growth = b.beta3 * s.abs().powf(p - 1.0) + b.beta4;
        tally.record(ps.abs(), growth, ps.abs() + growth);
    }
    Ok(tally.finish(None))
}

/// Every applicable check for `model`, in a fixed order.
pub fn check_all(
    model: &ModelSpec,
    grid: &Grid,
    noise: &NoiseField,
    consts: &StructuralConstants,
    profile: &ForcingProfile,
    trials: usize,
    seed: u64,
) -> Result<Vec<CheckReport>> {
    let mut out = vec![
        sampled_check_h0(model, grid, consts, trials, seed)?,
        sampled_check_h2(model, grid, noise, consts, trials, seed)?,
        sampled_check_h3(model, grid, noise, consts, profile, trials, seed)?,
        sampled_check_h4(model, grid, consts, profile, trials, seed)?,
        sampled_check_h5(model, grid, noise, consts, profile, trials, seed)?,
    ];
    if model.gap_form() == GapForm::DriftOnly {
        out.push(sampled_check_drift_coercivity(model, grid, consts, trials, seed)?);
    }
    if model.kind == DriftKind::PorousMedium {
        out.push(sampled_check_psi(model, trials, seed)?);
    }
    Ok(out)
}

/// Minimum of `|v|_V^2 / |v|_H^2` over sampled states plus the extremal first
/// mode; for `H01L2` this approaches the smallest eigenvalue of `T`.
pub fn sampled_poincare_quotient(model: &ModelSpec, grid: &Grid, trials: usize, seed: u64) -> f64 {
    let alpha = model.alpha();
    let quotient = |v: &StateVector| {
        let h = h_norm_sq(v, &model.triple);
        if h > 0.0 {
            v_norm_alpha(v, model).powf(2.0 / alpha) / h
        } else {
            f64::INFINITY
        }
    };
    let first = StateVector::new(*grid, grid.sine_mode(1));
    (0..trials)
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            quotient(&StateVector::new(*grid, sample_state(grid, &mut rng)))
        })
        .fold(quotient(&first), f64::min)
}
