//! Euler-Maruyama and semi-implicit Euler-Maruyama stepping of
//! `du = (A(u) + F(u) + g(t)) dt + eps G(u) dW`.
//!
//! Step `j` of a run starting at `t_start` uses the global step index
//! `k = round(t_start/dt) + j`, the time `k dt` and the increments addressed
//! by `k`. Splitting a run at any grid time therefore reproduces the unsplit
//! run bitwise, and runs from different start times share increments on
//! their common steps.

use serde::{Deserialize, Serialize};

use crate::discretization::{
    apply_drift, h_norm_sq, DriftKind, Grid, ModelSpec, StateVector, Tridiagonal,
};
use crate::error::{invalid, Error, Result};
use crate::forcing::ForcingProfile;
use crate::noise::{step_index, NoiseField};
use crate::rng::IncrementStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ExplicitEm,
    #[default]
    SemiImplicitEm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub t_start: f64,
    pub t_end: f64,
    pub epsilon: f64,
    /// Record every `k` steps; 0 records the final state only.
    pub record_every: usize,
}

/// Largest `dt * |A_nl(u)|_H / |u|_H` tolerated before a step is counted as stiff.
pub const STIFFNESS_LIMIT: f64 = 1.0;

fn on_grid(t: f64, dt: f64) -> bool {
    let k = t / dt;
    (k - k.round()).abs() <= 1e-9 * k.abs().max(1.0)
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_start.is_finite() && self.t_end.is_finite()) {
            return Err(invalid("t_start and t_end must be finite"));
        }
        if self.t_end < self.t_start {
            return Err(invalid(format!(
                "t_end = {} precedes t_start = {}",
                self.t_end, self.t_start
            )));
        }
        if self.t_end > self.t_start && self.dt > self.t_end - self.t_start {
            return Err(invalid(format!(
                "dt = {} exceeds the interval length {}",
                self.dt,
                self.t_end - self.t_start
            )));
        }
        if !on_grid(self.t_start, self.dt) || !on_grid(self.t_end, self.dt) {
            return Err(invalid(format!(
                "t_start = {} and t_end = {} must be multiples of dt = {}",
                self.t_start, self.t_end, self.dt
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(invalid(format!(
                "epsilon must lie in (0, 1], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn first_step(&self) -> i64 {
        step_index(self.t_start, self.dt)
    }

    pub fn steps(&self) -> usize {
        (step_index(self.t_end, self.dt) - self.first_step()) as usize
    }
}

/// Explicit stepping of the Laplacian is stable for `dt <= h^2 / 2`.
pub fn check_stability(grid: &Grid, model: &ModelSpec, scheme: Scheme, dt: f64) -> Result<()> {
    let limit = 0.5 * grid.spacing * grid.spacing;
    if scheme == Scheme::ExplicitEm && model.kind == DriftKind::Laplacian && dt > limit {
        return Err(Error::Stability(format!(
            "explicit Euler-Maruyama on the Laplacian needs dt <= h^2/2 = {limit:.6e}, got dt = {dt}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Recorded states; empty when states are not kept.
    pub states: Vec<StateVector>,
    pub h_norm_sq_series: Vec<f64>,
    /// Steps whose explicit nonlinear drift exceeded [`STIFFNESS_LIMIT`].
    pub stiff_steps: u64,
}

/// Reusable per-run integrator; owns the precomputed solver and noise basis.
pub struct PathIntegrator<'a> {
    grid: Grid,
    model: &'a ModelSpec,
    profile: &'a ForcingProfile,
    noise: &'a NoiseField,
    cfg: SimConfig,
    implicit: Option<Tridiagonal>,
    unit_mode: Vec<f64>,
}

/// First sine mode scaled to unit `H`-norm.
pub fn unit_first_mode(grid: &Grid, model: &ModelSpec) -> Vec<f64> {
    let e1 = StateVector::new(*grid, grid.sine_mode(1));
    let n = h_norm_sq(&e1, &model.triple).sqrt();
    e1.values.iter().map(|v| v / n).collect()
}

impl<'a> PathIntegrator<'a> {
    pub fn new(
        grid: &Grid,
        model: &'a ModelSpec,
        profile: &'a ForcingProfile,
        noise: &'a NoiseField,
        cfg: SimConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        profile.validate()?;
        check_stability(grid, model, cfg.scheme, cfg.dt)?;
        let implicit = (cfg.scheme == Scheme::SemiImplicitEm && model.is_linear_diffusion())
            .then(|| Tridiagonal::implicit_heat(grid, cfg.dt));
        Ok(Self {
            grid: *grid,
            model,
            profile,
            noise,
            cfg,
            implicit,
            unit_mode: unit_first_mode(grid, model),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Advances `u` by one step from time `t`; returns the stiffness ratio of
    /// the explicit nonlinear drift (0 when none).
    fn step(&self, u: &mut Vec<f64>, t: f64, dw: &[f64]) -> f64 {
        let dt = self.cfg.dt;
        let state = StateVector::new(self.grid, std::mem::take(u));
        let mut next = state.values.clone();
        let mut ratio = 0.0;
        if self.implicit.is_none() {
            let a = apply_drift(&state, self.model);
            if !self.model.is_linear_diffusion() {
                let un = h_norm_sq(&state, &self.model.triple);
                if un > 0.0 {
                    ratio = dt * (h_norm_sq(&a, &self.model.triple) / un).sqrt();
                }
            }
            next.iter_mut().zip(&a.values).for_each(|(n, a)| *n += dt * a);
        }
        let reaction = &self.model.reaction;
        next.iter_mut()
            .zip(&state.values)
            .for_each(|(n, &s)| *n += dt * reaction.eval(s));
        if !self.profile.is_zero_g() {
            let g = self.profile.g_vector(t, &self.grid, &self.unit_mode);
            next.iter_mut().zip(&g).for_each(|(n, g)| *n += dt * g);
        }
        self.noise
            .add_diffusion(&state.values, dw, self.cfg.epsilon, &mut next);
        if let Some(solver) = &self.implicit {
            solver.solve_in_place(&mut next);
        }
        *u = next;
        ratio
    }

    /// Integrates from `cfg.t_start` to `cfg.t_end` using the increments of `path_id`.
    pub fn run(&self, u0: &StateVector, path_id: u64, keep_states: bool) -> Result<Trajectory> {
        if u0.grid != self.grid {
            return Err(invalid("initial state lives on a different grid"));
        }
        let cfg = &self.cfg;
        let k0 = cfg.first_step();
        let steps = cfg.steps();
        let mut stream = IncrementStream::new(self.noise.spec.master_seed, path_id);
        let modes = self.noise.active_modes();
        let mut dw = vec![0.0; modes.max(1)];
        let sqrt_dt = cfg.dt.sqrt();
        let mut u = u0.values.clone();
        let mut traj = Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            h_norm_sq_series: Vec::new(),
            stiff_steps: 0,
        };
        let record = |traj: &mut Trajectory, k: i64, u: &[f64]| {
            let s = StateVector::new(self.grid, u.to_vec());
            traj.times.push(k as f64 * cfg.dt);
            traj.h_norm_sq_series.push(h_norm_sq(&s, &self.model.triple));
            if keep_states {
                traj.states.push(s);
            }
        };
        if cfg.record_every > 0 || steps == 0 {
            record(&mut traj, k0, &u);
        }
        for j in 0..steps {
            let k = k0 + j as i64;
            if modes > 0 {
                stream.fill_step(k, &mut dw[..modes])?;
                dw.iter_mut().for_each(|z| *z *= sqrt_dt);
            }
            let ratio = self.step(&mut u, k as f64 * cfg.dt, &dw);
            if ratio > STIFFNESS_LIMIT {
                traj.stiff_steps += 1;
            }
            if !u.iter().all(|v| v.is_finite()) {
                return Err(Error::BlowUp {
                    path_id,
                    step: j as u64 + 1,
                    time: (k + 1) as f64 * cfg.dt,
                });
            }
            let done = j + 1 == steps;
            let due = cfg.record_every > 0 && (j + 1) % cfg.record_every == 0;
            if done || due {
                record(&mut traj, k + 1, &u);
            }
        }
        Ok(traj)
    }
}

/// One step from `t`; `dw` holds the increments of the active modes.
#[allow(clippy::too_many_arguments)]
pub fn em_step(
    u: &StateVector,
    t: f64,
    dt: f64,
    scheme: Scheme,
    model: &ModelSpec,
    profile: &ForcingProfile,
    noise: &NoiseField,
    dw: &[f64],
    eps: f64,
) -> Result<StateVector> {
    let cfg = SimConfig {
        dt,
        scheme,
        t_start: 0.0,
        t_end: dt,
        epsilon: eps,
        record_every: 0,
    };
    let integrator = PathIntegrator::new(&u.grid, model, profile, noise, cfg)?;
    let mut v = u.values.clone();
    integrator.step(&mut v, t, dw);
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::BlowUp {
            path_id: 0,
            step: step_index(t, dt).max(0) as u64,
            time: t + dt,
        });
    }
    Ok(StateVector::new(u.grid, v))
}

pub fn integrate_path(
    u0: &StateVector,
    cfg: SimConfig,
    model: &ModelSpec,
    profile: &ForcingProfile,
    noise: &NoiseField,
    path_id: u64,
) -> Result<Trajectory> {
    PathIntegrator::new(&u0.grid, model, profile, noise, cfg)?.run(u0, path_id, true)
}
