//! Truncated cylindrical Wiener process on the sine eigenbasis and a catalog
//! of diffusion operators `G(t, u)` with exact Hilbert-Schmidt norms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{h2_young_constant, StructuralConstants, TripleKind};
use crate::discretization::{h_norm_sq, v_norm_alpha, Grid, ModelSpec, StateVector, Tridiagonal};
use crate::error::{invalid, Error, Result};
use crate::forcing::ForcingProfile;
use crate::rng::IncrementStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Diffusion {
    /// `G = 0`.
    Zero,
    /// `G(u) dW = sigma_1 u d beta_1`.
    ScalarMultiplicative,
    /// `G(u) e_k = sigma_k tanh(u) e_k`, nodewise product.
    DiagonalNemytskii,
    /// `G e_k = sigma_k e_k`.
    Additive,
}

/// Coefficients `sigma_k`, `k = 1..K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SigmaSchedule {
    Constant { value: f64 },
    /// `value / k^exponent`.
    PowerDecay { value: f64, exponent: f64 },
    List { values: Vec<f64> },
}

impl SigmaSchedule {
    /// `sigma_k` for the 1-based mode `k`.
    pub fn get(&self, k: usize) -> f64 {
        match self {
            SigmaSchedule::Constant { value } => *value,
            SigmaSchedule::PowerDecay { value, exponent } => value / (k as f64).powf(*exponent),
            SigmaSchedule::List { values } => values.get(k - 1).copied().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Truncation level `K`.
    pub modes: usize,
    pub diffusion: Diffusion,
    pub sigma: SigmaSchedule,
    pub master_seed: u64,
}

impl NoiseSpec {
    pub fn zero(master_seed: u64) -> Self {
        Self {
            modes: 1,
            diffusion: Diffusion::Zero,
            sigma: SigmaSchedule::Constant { value: 0.0 },
            master_seed,
        }
    }

    pub fn scalar_multiplicative(sigma: f64, master_seed: u64) -> Self {
        Self {
            modes: 1,
            diffusion: Diffusion::ScalarMultiplicative,
            sigma: SigmaSchedule::Constant { value: sigma },
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return Err(invalid("noise needs at least one mode"));
        }
        if self.modes > crate::rng::MAX_MODES {
            return Err(invalid(format!(
                "at most {} noise modes are supported",
                crate::rng::MAX_MODES
            )));
        }
        if (1..=self.modes).any(|k| !self.sigma.get(k).is_finite()) {
            return Err(invalid("sigma must be finite"));
        }
        Ok(())
    }

    /// Number of Brownian motions the diffusion actually uses.
    pub fn active_modes(&self) -> usize {
        match self.diffusion {
            Diffusion::Zero => 0,
            Diffusion::ScalarMultiplicative => 1,
            _ => self.modes,
        }
    }

    /// Exact `sum_k sigma_k^2`.
    pub fn sigma_sq_sum(&self) -> f64 {
        (1..=self.active_modes())
            .map(|k| self.sigma.get(k).powi(2))
            .sum()
    }
}

/// Index of the time step starting at `t` on the grid `dt Z`.
pub fn step_index(t: f64, dt: f64) -> i64 {
    (t / dt).round() as i64
}

/// Independent `N(0, dt)` increments, `steps x K`, for steps starting at `t0`.
pub fn wiener_increments(
    spec: &NoiseSpec,
    t0: f64,
    dt: f64,
    steps: usize,
    path_id: u64,
) -> Result<Vec<Vec<f64>>> {
    if !(dt > 0.0) {
        return Err(invalid(format!("dt must be > 0, got {dt}")));
    }
    spec.validate()?;
    steps
        .checked_mul(spec.modes)
        .filter(|n| *n <= isize::MAX as usize / 8)
        .ok_or_else(|| Error::Size(format!("{steps} steps x {} modes overflows", spec.modes)))?;
    let mut stream = IncrementStream::new(spec.master_seed, path_id);
    let k0 = step_index(t0, dt);
    let sqrt_dt = dt.sqrt();
    (0..steps)
        .map(|j| {
            let mut row = vec![0.0; spec.modes];
            stream.fill_step(k0 + j as i64, &mut row)?;
            row.iter_mut().for_each(|z| *z *= sqrt_dt);
            Ok(row)
        })
        .collect()
}

/// A noise specification bound to a grid and triple.
#[derive(Debug, Clone)]
pub struct NoiseField {
    pub spec: NoiseSpec,
    grid: Grid,
    triple: TripleKind,
    sigma: Vec<f64>,
    basis: Vec<Vec<f64>>,
    /// `H`-norm squared of each basis vector.
    basis_norm_sq: Vec<f64>,
    dirichlet: Tridiagonal,
}

/// `sqrt(2/|O|) sin(k pi x / |O|)`, `k = 1..K`.
pub fn sine_basis(grid: &Grid, modes: usize) -> Vec<Vec<f64>> {
    let len = grid.domain_length;
    let c = (2.0 / len).sqrt();
    (1..=modes)
        .map(|k| {
            grid.nodes()
                .map(|x| c * (k as f64 * PI * x / len).sin())
                .collect()
        })
        .collect()
}

fn b(s: f64) -> f64 {
    s.tanh()
}

impl NoiseField {
    pub fn new(spec: &NoiseSpec, grid: &Grid, triple: &TripleKind) -> Result<Self> {
        spec.validate()?;
        let active = spec.active_modes();
        let basis = match spec.diffusion {
            Diffusion::DiagonalNemytskii | Diffusion::Additive => sine_basis(grid, active),
            _ => Vec::new(),
        };
        let basis_norm_sq = basis
            .iter()
            .map(|e| h_norm_sq(&StateVector::new(*grid, e.clone()), triple))
            .collect();
        Ok(Self {
            spec: spec.clone(),
            grid: *grid,
            triple: *triple,
            sigma: (1..=active.max(1)).map(|k| spec.sigma.get(k)).collect(),
            basis,
            basis_norm_sq,
            dirichlet: Tridiagonal::dirichlet(grid),
        })
    }

    pub fn active_modes(&self) -> usize {
        self.spec.active_modes()
    }

    fn norm_sq(&self, v: &[f64]) -> f64 {
        let h = self.grid.spacing;
        if self.triple.is_l2_based() {
            h * v.iter().map(|x| x * x).sum::<f64>()
        } else {
            let w = self.dirichlet.solve(v);
            h * crate::discretization::dot(&w, v)
        }
    }

    /// Adds `scale * sum_k (G(u) e_k) dW_k` to `out`.
    pub fn add_diffusion(&self, u: &[f64], dw: &[f64], scale: f64, out: &mut [f64]) {
        match self.spec.diffusion {
            Diffusion::Zero => {}
            Diffusion::ScalarMultiplicative => {
                let c = scale * self.sigma[0] * dw[0];
                out.iter_mut().zip(u).for_each(|(o, x)| *o += c * x);
            }
            Diffusion::Additive | Diffusion::DiagonalNemytskii => {
                let mut field = vec![0.0; u.len()];
                for ((e, s), w) in self.basis.iter().zip(&self.sigma).zip(dw) {
                    let c = s * w;
                    field.iter_mut().zip(e).for_each(|(f, ei)| *f += c * ei);
                }
                if self.spec.diffusion == Diffusion::Additive {
                    out.iter_mut().zip(&field).for_each(|(o, f)| *o += scale * f);
                } else {
                    out.iter_mut()
                        .zip(&field)
                        .zip(u)
                        .for_each(|((o, f), x)| *o += scale * b(*x) * f);
                }
            }
        }
    }

    /// `sum_k (G(u) e_k) dW_k`.
    pub fn apply(&self, u: &StateVector, dw: &[f64]) -> StateVector {
        let mut out = vec![0.0; u.values.len()];
        self.add_diffusion(&u.values, dw, 1.0, &mut out);
        StateVector::new(u.grid, out)
    }

    /// `|G(u)|^2_{L_2(U, H)} = sum_k |G(u) e_k|_H^2`.
    pub fn hs_norm_sq(&self, u: &StateVector) -> f64 {
        match self.spec.diffusion {
            Diffusion::Zero => 0.0,
            Diffusion::ScalarMultiplicative => self.sigma[0].powi(2) * self.norm_sq(&u.values),
            Diffusion::Additive => self
                .sigma
                .iter()
                .zip(&self.basis_norm_sq)
                .map(|(s, n)| s * s * n)
                .sum(),
            Diffusion::DiagonalNemytskii => {
                let bu: Vec<f64> = u.values.iter().map(|&x| b(x)).collect();
                self.mode_sum(&bu)
            }
        }
    }

    /// `|G(u1) - G(u2)|^2_{L_2(U, H)}`.
    pub fn hs_norm_sq_diff(&self, u1: &StateVector, u2: &StateVector) -> f64 {
        match self.spec.diffusion {
            Diffusion::Zero | Diffusion::Additive => 0.0,
            Diffusion::ScalarMultiplicative => {
                let d: Vec<f64> = u1.values.iter().zip(&u2.values).map(|(a, b)| a - b).collect();
                self.sigma[0].powi(2) * self.norm_sq(&d)
            }
            Diffusion::DiagonalNemytskii => {
                let d: Vec<f64> = u1
                    .values
                    .iter()
                    .zip(&u2.values)
                    .map(|(&x, &y)| b(x) - b(y))
                    .collect();
                self.mode_sum(&d)
            }
        }
    }

    fn mode_sum(&self, weights: &[f64]) -> f64 {
        self.basis
            .iter()
            .zip(&self.sigma)
            .map(|(e, s)| {
                let v: Vec<f64> = e.iter().zip(weights).map(|(ei, w)| ei * w).collect();
                s * s * self.norm_sq(&v)
            })
            .sum()
    }
}

/// `sum_k (G(u) e_k) dW_k` for the catalog entry of `spec`.
pub fn apply_diffusion(
    u: &StateVector,
    dw: &[f64],
    spec: &NoiseSpec,
    triple: &TripleKind,
) -> Result<StateVector> {
    Ok(NoiseField::new(spec, &u.grid, triple)?.apply(u, dw))
}

pub fn hs_norm_sq(u: &StateVector, spec: &NoiseSpec, triple: &TripleKind) -> Result<f64> {
    Ok(NoiseField::new(spec, &u.grid, triple)?.hs_norm_sq(u))
}

/// Outcome of one inequality evaluation, `margin = rhs - lhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// `|G(t, v)|^2 <= gamma4 |v|_H^2 + 2 gamma6 |v|_V^alpha + C_{gamma5,alpha} |h2(t)|^{alpha'} + h1(t)`.
pub fn check_diffusion_bound(
    u: &StateVector,
    t: f64,
    field: &NoiseField,
    model: &ModelSpec,
    consts: &StructuralConstants,
    profile: &ForcingProfile,
) -> Result<BoundCheck> {
    let lhs = field.hs_norm_sq(u);
    let c = h2_young_constant(consts.gamma5, consts.alpha)?;
    let terms = [
        consts.gamma4 * h_norm_sq(u, &model.triple),
        2.0 * consts.gamma6 * v_norm_alpha(u, model),
        c * profile.h2.eval(t).abs().powf(consts.h2_exponent()),
        profile.h1.eval(t),
    ];
    let rhs: f64 = terms.iter().sum();
    let scale = lhs.abs() + terms.iter().map(|x| x.abs()).sum::<f64>();
    Ok(BoundCheck {
        holds: lhs <= rhs + crate::hypotheses::REL_TOL * scale,
        lhs,
        rhs,
        margin: rhs - lhs,
    })
}
