//! TOML run configuration.
//!
//! ```toml
//! seed = 42                 # master seed, overridden by --seed
//! output = "out"            # report directory, overridden by --out
//!
//! [grid]
//! n = 63                    # interior nodes
//! length = 1.0              # |O|, dimensionless length
//!
//! [model]
//! kind = "laplacian"        # laplacian | power-law | p-laplace | porous-medium
//! p = 2.0                   # growth exponent, ignored for laplacian
//! psi_linear = 0.0          # porous medium only: Psi(s) = s|s|^{p-2} + psi_linear s
//!
//! [reaction]
//! form = "tanh"             # zero | tanh | linear
//! gamma1 = 0.5              # Lipschitz constant of F
//! gamma2 = 0.5              # growth constant of F
//!
//! [constants]
//! source = "preset"         # preset | explicit
//! epsilon = 0.1             # noise intensity, or give epsilon_fraction
//! # epsilon_fraction = 0.5  # epsilon = fraction * eps0 of the active gap form
//! # explicit only: gamma1..gamma6, alpha, lambda
//!
//! [forcing]                 # optional, defaults to g = 0 and the structural h1, h2
//! g = { kind = "norm-sq", norm_sq = { kind = "constant", value = 1.0 } }
//! h1 = { kind = "zero" }
//! h2 = { kind = "zero" }
//!
//! [noise]                   # optional, defaults to G = 0
//! diffusion = "scalar-multiplicative"
//! sigma = { kind = "constant", value = 1.0 }
//! modes = 63                # defaults to grid.n
//!
//! [sim]
//! dt = 1e-3                 # time step, same time unit as t
//! scheme = "semi-implicit-em"
//! t_start = 0.0
//! t_end = 1.0
//! record_every = 10         # steps between recorded states, 0 = terminal only
//!
//! [initial]                 # simulate only: amplitude * unit-H-norm sine mode
//! mode = 1
//! amplitude = 1.0
//!
//! [experiment]
//! tau = 0.0
//! t_values = [1.0, 2.0, 4.0, 8.0]
//! paths = 2000
//! rho = { kind = "constant", value = 1.0 }
//! law = "extreme-point"     # extreme-point | uniform-in-ball
//! certified = true
//! l = { mode = "derived" }  # or { mode = "explicit", value = 5.0 }
//! workers = 0               # 0 = all cores, overridden by --workers
//! quad_tol = 1e-10
//! window = [-1.0, 0.0]      # decay only: fit window in absolute time
//! taus = [-2.0, 0.0, 2.0]   # radius only: extra evaluation points
//!
//! [check]
//! trials = 10000
//! ```

use std::path::{Path, PathBuf};

use pullback_core::constants::{ExampleModel, GapForm, StructuralConstants};
use pullback_core::discretization::{DriftKind, Grid, ModelSpec, PsiSpec, ReactionForm, ReactionSpec};
use pullback_core::estimators::{ExperimentSpec, InitialLaw, LMode};
use pullback_core::forcing::{ForcingProfile, GForcing, RadiusFamily, TimeFn};
use pullback_core::integrator::{Scheme, SimConfig};
use pullback_core::noise::{Diffusion, NoiseSpec, SigmaSchedule};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub grid: Option<GridSection>,
    pub model: Option<ModelSection>,
    pub reaction: Option<ReactionSection>,
    pub constants: Option<ConstantsSection>,
    pub forcing: Option<ForcingSection>,
    pub noise: Option<NoiseSection>,
    pub sim: Option<SimSection>,
    pub initial: Option<InitialSection>,
    pub experiment: Option<ExperimentSection>,
    pub check: Option<CheckSection>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    #[serde(default = "one")]
    pub length: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: DriftKind,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default)]
    pub psi_linear: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionSection {
    pub form: ReactionForm,
    #[serde(default)]
    pub gamma1: f64,
    #[serde(default)]
    pub gamma2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantsSource {
    Preset,
    Explicit,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    pub source: ConstantsSource,
    pub epsilon: Option<f64>,
    pub epsilon_fraction: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub gamma3: Option<f64>,
    pub gamma4: Option<f64>,
    pub gamma5: Option<f64>,
    pub gamma6: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSection {
    pub g: Option<GForcing>,
    pub h1: Option<TimeFn>,
    pub h2: Option<TimeFn>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub diffusion: Diffusion,
    pub sigma: SigmaSchedule,
    pub modes: Option<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub t_start: f64,
    pub t_end: Option<f64>,
    #[serde(default)]
    pub record_every: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default = "one_usize")]
    pub mode: usize,
    #[serde(default = "one")]
    pub amplitude: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default)]
    pub tau: f64,
    #[serde(default)]
    pub t_values: Vec<f64>,
    pub paths: Option<usize>,
    pub rho: Option<RadiusFamily>,
    #[serde(default)]
    pub law: InitialLaw,
    #[serde(default)]
    pub certified: bool,
    pub l: Option<LMode>,
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
    pub window: Option<(f64, f64)>,
    #[serde(default)]
    pub taus: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn one_usize() -> usize {
    1
}

fn default_quad_tol() -> f64 {
    1e-10
}

fn default_trials() -> usize {
    10_000
}

fn missing(section: &str) -> CliError {
    CliError::Config(format!("missing [{section}] section"))
}

fn missing_key(section: &str, key: &str) -> CliError {
    CliError::Config(format!("missing key `{key}` in [{section}]"))
}

/// Command line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.output = Some(out.clone());
        }
        if o.paths.is_some() || o.workers.is_some() {
            let e = self.experiment.get_or_insert_with(|| ExperimentSection {
                tau: 0.0,
                t_values: Vec::new(),
                paths: None,
                rho: None,
                law: InitialLaw::default(),
                certified: false,
                l: None,
                workers: 0,
                quad_tol: default_quad_tol(),
                window: None,
                taus: Vec::new(),
            });
            if let Some(p) = o.paths {
                e.paths = Some(p);
            }
            if let Some(w) = o.workers {
                e.workers = w;
            }
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        let g = self.grid.ok_or_else(|| missing("grid"))?;
        Ok(Grid::new(g.n, g.length)?)
    }

    pub fn reaction(&self) -> Result<ReactionSpec, CliError> {
        Ok(match self.reaction {
            None => ReactionSpec::zero(),
            Some(r) => ReactionSpec {
                form: r.form,
                gamma1: r.gamma1,
                gamma2: r.gamma2,
            },
        })
    }

    pub fn model(&self, grid: &Grid) -> Result<ModelSpec, CliError> {
        let m = self.model.ok_or_else(|| missing("model"))?;
        let mut spec = ModelSpec::new(m.kind, m.p, grid, self.reaction()?)?;
        if m.kind == DriftKind::PorousMedium {
            spec = spec.with_psi(PsiSpec { linear: m.psi_linear });
        }
        Ok(spec)
    }

    /// Gap form of the configured model, the full form without one.
    pub fn gap_form(&self) -> GapForm {
        self.model.map_or(GapForm::Full, |m| m.kind.gap_form())
    }

    /// Structural constants with epsilon resolved. `model` is required for
    /// preset constants.
    pub fn constants(&self, model: Option<&ModelSpec>) -> Result<StructuralConstants, CliError> {
        self.constants_with(model, true)
    }

    /// As [`Self::constants`]; without `require_epsilon` a missing epsilon
    /// becomes the placeholder 1.
    pub fn constants_with(
        &self,
        model: Option<&ModelSpec>,
        require_epsilon: bool,
    ) -> Result<StructuralConstants, CliError> {
        let c = self.constants.ok_or_else(|| missing("constants"))?;
        let mut consts = match c.source {
            ConstantsSource::Preset => {
                let model = model.ok_or_else(|| missing("model"))?;
                let g1 = c.gamma1.unwrap_or(model.reaction.gamma1);
                let g2 = c.gamma2.unwrap_or(model.reaction.gamma2);
                model.example_constants_with(g1, g2, 1.0)?
            }
            ConstantsSource::Explicit => {
                let req = |v: Option<f64>, key: &str| v.ok_or_else(|| missing_key("constants", key));
                StructuralConstants {
                    gamma1: c.gamma1.unwrap_or(0.0),
                    gamma2: req(c.gamma2, "gamma2")?,
                    gamma3: c.gamma3.unwrap_or(0.0),
                    gamma4: req(c.gamma4, "gamma4")?,
                    gamma5: req(c.gamma5, "gamma5")?,
                    gamma6: req(c.gamma6, "gamma6")?,
                    alpha: req(c.alpha, "alpha")?,
                    lambda: req(c.lambda, "lambda")?,
                    epsilon: 1.0,
                }
            }
        };
        consts.epsilon = match (c.epsilon, c.epsilon_fraction) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "give either `epsilon` or `epsilon_fraction` in [constants], not both".into(),
                ))
            }
            (Some(e), None) => e,
            (None, Some(f)) => {
                let form = model.map_or(GapForm::Full, |m| m.gap_form());
                f * pullback_core::constants::noise_threshold_with(&consts, form)?
            }
            (None, None) if require_epsilon => return Err(missing_key("constants", "epsilon")),
            (None, None) => 1.0,
        };
        consts.validate()?;
        Ok(consts)
    }

    /// The closed-form example threshold matching the configured model.
    pub fn example_model(&self, consts: &StructuralConstants, model: &ModelSpec) -> ExampleModel {
        let lambda = consts.lambda;
        let gamma2 = consts.gamma2;
        match model.kind {
            DriftKind::Laplacian => ExampleModel::ReactionDiffusion { lambda, gamma2 },
            DriftKind::PowerLaw => ExampleModel::PowerLaw {
                lambda0: lambda,
                gamma2,
            },
            DriftKind::PLaplace => ExampleModel::PLaplace {
                lambda_tilde: lambda,
                gamma2,
            },
            DriftKind::PorousMedium => ExampleModel::PorousMedium {
                beta1: model.psi.params().beta1,
                lambda_hat: lambda,
                gamma2,
            },
        }
    }

    /// Forcing profile; absent `h1`, `h2` default to the model's structural values.
    pub fn profile(&self, model: Option<&ModelSpec>) -> Result<ForcingProfile, CliError> {
        let structural = |v: f64| {
            if v == 0.0 {
                TimeFn::Zero
            } else {
                TimeFn::Constant { value: v }
            }
        };
        let f = self.forcing.clone().unwrap_or(ForcingSection {
            g: None,
            h1: None,
            h2: None,
        });
        let profile = ForcingProfile {
            g: f.g.unwrap_or(ForcingProfile::zero().g),
            h1: f
                .h1
                .unwrap_or_else(|| structural(model.map_or(0.0, |m| m.structural_h1()))),
            h2: f
                .h2
                .unwrap_or_else(|| structural(model.map_or(0.0, |m| m.structural_h2()))),
            shape_norm_sq: None,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn noise(&self, grid: &Grid) -> Result<NoiseSpec, CliError> {
        let spec = match &self.noise {
            None => NoiseSpec::zero(self.seed),
            Some(n) => NoiseSpec {
                modes: n.modes.unwrap_or(grid.n_interior),
                diffusion: n.diffusion,
                sigma: n.sigma.clone(),
                master_seed: self.seed,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sim(&self, epsilon: f64) -> Result<SimConfig, CliError> {
        let s = self.sim.ok_or_else(|| missing("sim"))?;
        let cfg = SimConfig {
            dt: s.dt,
            scheme: s.scheme,
            t_start: s.t_start,
            t_end: s.t_end.ok_or_else(|| missing_key("sim", "t_end"))?,
            epsilon,
            record_every: s.record_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn experiment_section(&self) -> Result<&ExperimentSection, CliError> {
        self.experiment.as_ref().ok_or_else(|| missing("experiment"))
    }

    pub fn check_trials(&self) -> usize {
        self.check.map_or_else(default_trials, |c| c.trials)
    }

    /// Full ensemble specification; `t_values` may be empty for commands
    /// that supply their own horizon.
    pub fn experiment(&self) -> Result<ExperimentSpec, CliError> {
        let grid = self.grid()?;
        let model = self.model(&grid)?;
        let consts = self.constants(Some(&model))?;
        let e = self.experiment_section()?;
        let s = self.sim.ok_or_else(|| missing("sim"))?;
        Ok(ExperimentSpec {
            tau: e.tau,
            t_values: e.t_values.clone(),
            paths: e.paths.ok_or_else(|| missing_key("experiment", "paths"))?,
            rho: e
                .rho
                .clone()
                .ok_or_else(|| missing_key("experiment", "rho"))?,
            law: e.law,
            grid,
            profile: self.profile(Some(&model))?,
            noise: self.noise(&grid)?,
            model,
            dt: s.dt,
            scheme: s.scheme,
            record_every: s.record_every,
            consts,
            certified: e.certified,
            l_mode: e.l.unwrap_or(LMode::Derived),
            workers: e.workers,
            quad_tol: e.quad_tol,
        })
    }
}
