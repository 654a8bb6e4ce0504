//! One-dimensional Dirichlet grids, discrete norms for each Gelfand triple and
//! the four drift operators.
//!
//! States hold the `N` interior nodal values; boundary (ghost) values are zero.
//! Nonlinear drifts act nodewise, and the p-Laplacian uses conservative flux
//! differencing over the `N + 1` cell edges.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{
    poincare_lambda, presets, GapForm, StructuralConstants, TripleKind, TripleTag,
};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_interior: usize,
    pub domain_length: f64,
    pub spacing: f64,
}

impl Grid {
    pub fn new(n_interior: usize, domain_length: f64) -> Result<Self> {
        if n_interior == 0 {
            return Err(invalid("grid needs at least one interior node"));
        }
        if !(domain_length > 0.0 && domain_length.is_finite()) {
            return Err(invalid(format!(
                "domain_length must be > 0, got {domain_length}"
            )));
        }
        Ok(Self {
            n_interior,
            domain_length,
            spacing: domain_length / (n_interior as f64 + 1.0),
        })
    }

    /// Interior node coordinates `x_i = (i + 1) h`.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.n_interior).map(move |i| i as f64 * self.spacing)
    }

    /// Smallest eigenvalue of the discrete Dirichlet operator `T = -Laplacian_h`,
    /// `(2/h^2)(1 - cos(pi h / |O|))`.
    pub fn lambda1(&self) -> f64 {
        self.laplacian_eigenvalue(1)
    }

    /// `k`-th eigenvalue `(4/h^2) sin^2(k pi h / (2|O|))` of `T`.
    pub fn laplacian_eigenvalue(&self, k: usize) -> f64 {
        let h = self.spacing;
        let s = (k as f64 * PI * h / (2.0 * self.domain_length)).sin();
        4.0 / (h * h) * s * s
    }

    /// Eigenvector `sin(k pi x_i / |O|)` of `T` (not normalized).
    pub fn sine_mode(&self, k: usize) -> Vec<f64> {
        self.nodes()
            .map(|x| (k as f64 * PI * x / self.domain_length).sin())
            .collect()
    }
}

/// Solver for the symmetric constant-coefficient tridiagonal system
/// `diag x_i + off (x_{i-1} + x_{i+1}) = rhs_i`.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    off: f64,
    c_prime: Vec<f64>,
    inv_denom: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(n: usize, diag: f64, off: f64) -> Self {
        let mut c_prime = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        let mut prev_c = 0.0;
        for i in 0..n {
            let denom = diag - off * prev_c;
            inv_denom[i] = 1.0 / denom;
            prev_c = off / denom;
            c_prime[i] = prev_c;
        }
        Self {
            off,
            c_prime,
            inv_denom,
        }
    }

    /// `T = (1/h^2) tridiag(-1, 2, -1)`.
    pub fn dirichlet(grid: &Grid) -> Self {
        let h2 = grid.spacing * grid.spacing;
        Self::new(grid.n_interior, 2.0 / h2, -1.0 / h2)
    }

    /// `I + dt T`, the implicit heat step.
    pub fn implicit_heat(grid: &Grid, dt: f64) -> Self {
        let r = dt / (grid.spacing * grid.spacing);
        Self::new(grid.n_interior, 1.0 + 2.0 * r, -r)
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        debug_assert_eq!(n, self.c_prime.len());
        if n == 0 {
            return;
        }
        rhs[0] *= self.inv_denom[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.off * rhs[i - 1]) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// `(T u)_i = (2 u_i - u_{i-1} - u_{i+1}) / h^2` with zero ghosts.
pub fn apply_dirichlet(grid: &Grid, u: &[f64]) -> Vec<f64> {
    let h2 = grid.spacing * grid.spacing;
    let n = u.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { u[i - 1] } else { 0.0 };
            let right = if i + 1 < n { u[i + 1] } else { 0.0 };
            (2.0 * u[i] - left - right) / h2
        })
        .collect()
}

/// Forward differences `(u_j - u_{j-1}) / h` on all `N + 1` edges.
fn edge_gradients(grid: &Grid, u: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..=n)
        .map(|j| {
            let right = if j < n { u[j] } else { 0.0 };
            let left = if j > 0 { u[j - 1] } else { 0.0 };
            (right - left) / grid.spacing
        })
        .collect()
}

/// Interior nodal values on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateVector {
    pub values: Vec<f64>,
    pub grid: Grid,
}

impl StateVector {
    pub fn new(grid: Grid, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            grid.n_interior,
            "state length must match the grid"
        );
        Self { values, grid }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::new(grid, vec![0.0; grid.n_interior])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.grid, self.values.iter().map(|v| c * v).collect())
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.spacing * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    /// `h <T^{-1} u, u>`.
    pub fn hminus1_norm_sq(&self) -> f64 {
        let w = Tridiagonal::dirichlet(&self.grid).solve(&self.values);
        self.grid.spacing * dot(&w, &self.values)
    }

    pub fn to_csv_rows(&self) -> Vec<(f64, f64)> {
        self.grid.nodes().zip(self.values.iter().copied()).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Squared `H`-norm of the triple.
pub fn h_norm_sq(u: &StateVector, triple: &TripleKind) -> f64 {
    if triple.is_l2_based() {
        u.l2_norm_sq()
    } else {
        u.hminus1_norm_sq()
    }
}

/// Discrete pairing `<f, w>_H` (also the `V*`-`V` duality on `V`).
pub fn h_inner(f: &[f64], w: &[f64], grid: &Grid, triple: &TripleKind) -> f64 {
    if triple.is_l2_based() {
        grid.spacing * dot(f, w)
    } else {
        let r = Tridiagonal::dirichlet(grid).solve(f);
        grid.spacing * dot(&r, w)
    }
}

/// Nodewise function `Psi` of the porous medium operator,
/// `Psi(s) = s|s|^{p-2} + linear * s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct PsiSpec {
    #[serde(default)]
    pub linear: f64,
}

/// Constants `(beta1, beta2, beta3, beta4)` of the `Psi` conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiParams {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
}

impl PsiSpec {
    pub fn eval(&self, s: f64, p: f64) -> f64 {
        s * s.abs().powf(p - 2.0) + self.linear * s
    }

    /// `s Psi(s) >= |s|^p`, and `|Psi(s)| <= (1 + c)|s|^{p-1} + c` since
    /// `|s| <= |s|^{p-1} + 1` for `p >= 2`.
    pub fn params(&self) -> PsiParams {
        PsiParams {
            beta1: 1.0,
            beta2: 0.0,
            beta3: 1.0 + self.linear,
            beta4: self.linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReactionForm {
    Zero,
    /// `F(s) = gamma2 tanh(s)`.
    Tanh,
    /// `F(s) = gamma2 s`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionSpec {
    pub form: ReactionForm,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl ReactionSpec {
    pub fn zero() -> Self {
        Self {
            form: ReactionForm::Zero,
            gamma1: 0.0,
            gamma2: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma1 < 0.0 || self.gamma2 < 0.0 {
            return Err(invalid("reaction constants must be nonnegative"));
        }
        if self.form != ReactionForm::Zero && self.gamma1 < self.gamma2 {
            return Err(invalid(format!(
                "reaction Lipschitz constant is gamma2 = {}, so gamma1 must be >= it (got {})",
                self.gamma2, self.gamma1
            )));
        }
        Ok(())
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self.form {
            ReactionForm::Zero => 0.0,
            ReactionForm::Tanh => self.gamma2 * s.tanh(),
            ReactionForm::Linear => self.gamma2 * s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftKind {
    /// `A u = u_xx` on `H_0^1 < L^2`.
    Laplacian,
    /// `A u = -u|u|^{p-2}` on `L^p < L^2`.
    PowerLaw,
    /// `A u = (|u_x|^{p-2} u_x)_x` on `W_0^{1,p} < L^2`.
    PLaplace,
    /// `A u = (Psi(u))_xx` on `L^p < H^{-1}`.
    PorousMedium,
}

impl DriftKind {
    pub fn triple_tag(self) -> TripleTag {
        match self {
            DriftKind::Laplacian => TripleTag::H01L2,
            DriftKind::PowerLaw => TripleTag::LpL2,
            DriftKind::PLaplace => TripleTag::W1pL2,
            DriftKind::PorousMedium => TripleTag::LpHminus1,
        }
    }

    /// The Laplacian is coercive on its own, so its gap drops `|gamma4|`.
    pub fn gap_form(self) -> GapForm {
        match self {
            DriftKind::Laplacian => GapForm::DriftOnly,
            _ => GapForm::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: DriftKind,
    pub p: f64,
    pub psi: PsiSpec,
    pub triple: TripleKind,
    pub reaction: ReactionSpec,
}

impl ModelSpec {
    pub fn new(kind: DriftKind, p: f64, grid: &Grid, reaction: ReactionSpec) -> Result<Self> {
        let p = if kind == DriftKind::Laplacian { 2.0 } else { p };
        let triple = TripleKind::new(kind.triple_tag(), p, grid.domain_length, 1)?;
        reaction.validate()?;
        Ok(Self {
            kind,
            p,
            psi: PsiSpec::default(),
            triple,
            reaction,
        })
    }

    pub fn with_psi(mut self, psi: PsiSpec) -> Self {
        self.psi = psi;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.triple.alpha()
    }

    pub fn gap_form(&self) -> GapForm {
        self.kind.gap_form()
    }

    /// `h1 = 2 beta2 |O|` for the porous medium operator, zero otherwise.
    pub fn structural_h1(&self) -> f64 {
        match self.kind {
            DriftKind::PorousMedium => 2.0 * self.psi.params().beta2 * self.triple.domain_length,
            _ => 0.0,
        }
    }

    /// `h2 = beta4 |O|^{p/(p-1)}` for the porous medium operator (raised to
    /// `|O|^{(p-1)/p}` when that is larger, i.e. `|O| < 1`), zero otherwise.
    pub fn structural_h2(&self) -> f64 {
        match self.kind {
            DriftKind::PorousMedium => {
                let len = self.triple.domain_length;
                let p = self.p;
                self.psi.params().beta4 * len.powf(p / (p - 1.0)).max(len.powf((p - 1.0) / p))
            }
            _ => 0.0,
        }
    }

    /// Constants under which this model satisfies (H0)-(H5), using the
    /// embedding constant of its triple.
    pub fn example_constants(&self, epsilon: f64) -> Result<StructuralConstants> {
        self.example_constants_with(self.reaction.gamma1, self.reaction.gamma2, epsilon)
    }

    /// As [`Self::example_constants`] with explicit reaction constants, e.g.
    /// for a model whose reaction is zero.
    pub fn example_constants_with(
        &self,
        gamma1: f64,
        gamma2: f64,
        epsilon: f64,
    ) -> Result<StructuralConstants> {
        let lambda = poincare_lambda(&self.triple)?;
        match self.kind {
            DriftKind::Laplacian => presets::reaction_diffusion(lambda, gamma1, gamma2, epsilon),
            DriftKind::PowerLaw => presets::power_law(lambda, self.p, gamma1, gamma2, epsilon),
            DriftKind::PLaplace => presets::p_laplace(lambda, self.p, gamma1, gamma2, epsilon),
            DriftKind::PorousMedium => {
                let b = self.psi.params();
                presets::porous_medium(lambda, self.p, b.beta1, b.beta3, gamma1, gamma2, epsilon)
            }
        }
    }

    /// Whether the drift has a linear stiff part treated implicitly.
    pub fn is_linear_diffusion(&self) -> bool {
        self.kind == DriftKind::Laplacian
    }
}

/// `|u|_V^alpha` for the triple of `model`.
pub fn v_norm_alpha(u: &StateVector, model: &ModelSpec) -> f64 {
    let grid = &u.grid;
    let h = grid.spacing;
    let p = model.p;
    match model.triple.tag {
        TripleTag::H01L2 => h * edge_gradients(grid, &u.values).iter().map(|d| d * d).sum::<f64>(),
        TripleTag::W1pL2 => {
            h * edge_gradients(grid, &u.values)
                .iter()
                .map(|d| d.abs().powf(p))
                .sum::<f64>()
        }
        TripleTag::LpL2 | TripleTag::LpHminus1 => {
            h * u.values.iter().map(|v| v.abs().powf(p)).sum::<f64>()
        }
    }
}

/// `|u|_V`.
pub fn v_norm(u: &StateVector, model: &ModelSpec) -> f64 {
    v_norm_alpha(u, model).powf(1.0 / model.alpha())
}

/// Discrete drift `A(u)`.
pub fn apply_drift(u: &StateVector, model: &ModelSpec) -> StateVector {
    let grid = &u.grid;
    let p = model.p;
    let values = match model.kind {
        DriftKind::Laplacian => apply_dirichlet(grid, &u.values)
            .into_iter()
            .map(|v| -v)
            .collect(),
        DriftKind::PowerLaw => u
            .values
            .iter()
            .map(|&s| -s * s.abs().powf(p - 2.0))
            .collect(),
        DriftKind::PLaplace => {
            let flux: Vec<f64> = edge_gradients(grid, &u.values)
                .into_iter()
                .map(|d| d * d.abs().powf(p - 2.0))
                .collect();
            flux.windows(2)
                .map(|w| (w[1] - w[0]) / grid.spacing)
                .collect()
        }
        DriftKind::PorousMedium => {
            let psi: Vec<f64> = u.values.iter().map(|&s| model.psi.eval(s, p)).collect();
            apply_dirichlet(grid, &psi).into_iter().map(|v| -v).collect()
        }
    };
    StateVector::new(*grid, values)
}

/// Nodewise reaction `F(u)`.
pub fn apply_reaction(u: &StateVector, spec: &ReactionSpec) -> StateVector {
    StateVector::new(u.grid, u.values.iter().map(|&s| spec.eval(s)).collect())
}
