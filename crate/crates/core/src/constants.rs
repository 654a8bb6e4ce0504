//! Structural constants, embedding constants of the four Gelfand triples and
//! the closed-form noise-intensity thresholds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// The constants of hypotheses (H0)-(H5) together with the embedding constant
/// `lambda` and the noise intensity `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralConstants {
    /// Lipschitz constant of the reaction `F`.
    pub gamma1: f64,
    /// Linear growth constant of `F`.
    pub gamma2: f64,
    /// Weak monotonicity constant.
    pub gamma3: f64,
    /// Coercivity constant of the `H` term.
    pub gamma4: f64,
    /// Coercivity constant of the `V` term.
    pub gamma5: f64,
    /// Growth constant of the drift.
    pub gamma6: f64,
    pub alpha: f64,
    /// Embedding constant, `|v|_V^2 >= lambda |v|_H^2`.
    pub lambda: f64,
    pub epsilon: f64,
}

impl StructuralConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.gamma1,
            self.gamma2,
            self.gamma3,
            self.gamma4,
            self.gamma5,
            self.gamma6,
            self.alpha,
            self.lambda,
            self.epsilon,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(invalid("structural constants must be finite"));
        }
        if self.gamma1 < 0.0 {
            return Err(invalid(format!("gamma1 must be >= 0, got {}", self.gamma1)));
        }
        if self.gamma2 <= 0.0 {
            return Err(invalid(format!("gamma2 must be > 0, got {}", self.gamma2)));
        }
        if self.gamma5 <= 0.0 {
            return Err(invalid(format!("gamma5 must be > 0, got {}", self.gamma5)));
        }
        if self.gamma6 <= 0.0 {
            return Err(invalid(format!("gamma6 must be > 0, got {}", self.gamma6)));
        }
        if self.alpha < 2.0 {
            return Err(invalid(format!("alpha must be >= 2, got {}", self.alpha)));
        }
        if self.lambda <= 0.0 {
            return Err(invalid(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(invalid(format!(
                "epsilon must lie in (0, 1], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Exponential rate `lambda * gamma5` of the energy estimate.
    pub fn decay_rate(&self) -> f64 {
        self.lambda * self.gamma5
    }

    /// Conjugate exponent `alpha / (alpha - 1)` applied to `h2`.
    pub fn h2_exponent(&self) -> f64 {
        self.alpha / (self.alpha - 1.0)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }
}

/// Which dissipativity gap governs the energy estimate.
///
/// `Full` is the general condition `(gamma2 + |gamma4|)/gamma5 < lambda`.
/// `DriftOnly` applies when the drift alone is coercive without the `gamma4`
/// term (`2<A v, v> <= -3 gamma5 |v|_V^alpha`), as for the Laplacian; then the
/// condition relaxes to `gamma2/gamma5 < lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GapForm {
    #[default]
    Full,
    DriftOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TripleTag {
    /// `V = H_0^1`, `H = L^2`.
    H01L2,
    /// `V = L^p`, `H = L^2`.
    LpL2,
    /// `V = W_0^{1,p}`, `H = L^2`.
    W1pL2,
    /// `V = L^p`, `H = H^{-1}`.
    LpHminus1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleKind {
    pub tag: TripleTag,
    pub p: f64,
    pub domain_length: f64,
    pub dim: u32,
}

impl TripleKind {
    pub fn new(tag: TripleTag, p: f64, domain_length: f64, dim: u32) -> Result<Self> {
        let triple = Self {
            tag,
            p,
            domain_length,
            dim,
        };
        triple.validate()?;
        Ok(triple)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.domain_length > 0.0 && self.domain_length.is_finite()) {
            return Err(invalid(format!(
                "domain_length must be > 0, got {}",
                self.domain_length
            )));
        }
        if !(self.p >= 2.0 && self.p.is_finite()) {
            return Err(invalid(format!("p must be >= 2, got {}", self.p)));
        }
        if self.dim == 0 {
            return Err(invalid("spatial dimension must be >= 1"));
        }
        Ok(())
    }

    /// Exponent `alpha` of the V-norm for this triple.
    pub fn alpha(&self) -> f64 {
        match self.tag {
            TripleTag::H01L2 => 2.0,
            _ => self.p,
        }
    }

    pub fn is_l2_based(&self) -> bool {
        self.tag != TripleTag::LpHminus1
    }
}

/// `Gamma(n/2)` for a positive integer `n`, by the half-integer recursion.
fn gamma_half(n: u32) -> f64 {
    let (mut value, mut x) = if n % 2 == 0 {
        (1.0, 1.0)
    } else {
        (PI.sqrt(), 0.5)
    };
    let target = f64::from(n) / 2.0;
    while x < target {
        value *= x;
        x += 1.0;
    }
    value
}

/// Volume of the unit ball in `R^n`, `2 pi^{n/2} / (n Gamma(n/2))`.
pub fn unit_ball_volume(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("unit ball volume needs n >= 1".into()));
    }
    let nf = f64::from(n);
    Ok(2.0 * PI.powf(nf / 2.0) / (nf * gamma_half(n)))
}

/// Embedding constant `lambda` with `|v|_V^2 >= lambda |v|_H^2`.
///
/// * `H01L2`, `W1pL2`: `(mu_n / |O|)^{1/n}`.
/// * `LpL2`: `|O|^{-(p-2)/p}` from Hölder's inequality.
/// * `LpHminus1`: `8 |O|^{-2} |O|^{-(p-2)/p}`, a lower bound valid on every
///   one-dimensional Dirichlet grid (the smallest discrete Laplacian eigenvalue
///   is at least `8/|O|^2`). `estimators::certify_lambda_hat` gives the sampled
///   grid value.
pub fn poincare_lambda(triple: &TripleKind) -> Result<f64> {
    triple.validate()?;
    let len = triple.domain_length;
    let holder = len.powf(-(triple.p - 2.0) / triple.p);
    match triple.tag {
        TripleTag::H01L2 | TripleTag::W1pL2 => {
            let mu = unit_ball_volume(triple.dim)?;
            Ok((mu / len).powf(1.0 / f64::from(triple.dim)))
        }
        TripleTag::LpL2 => Ok(holder),
        TripleTag::LpHminus1 => {
            if triple.dim != 1 {
                return Err(Error::Unsupported(
                    "the H^-1 embedding bound is only available for n = 1".into(),
                ));
            }
            Ok(8.0 / (len * len) * holder)
        }
    }
}

/// Smallest `C >= 0` with `C + r^alpha >= scale * r^2` for all `r >= 0`.
///
/// The maximum of `scale r^2 - r^alpha` sits at `r* = (2 scale / alpha)^{1/(alpha-2)}`.
pub fn young_gap_constant(scale: f64, alpha: f64) -> Result<f64> {
    if alpha < 2.0 || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be >= 2, got {alpha}")));
    }
    if scale <= 0.0 {
        return Ok(0.0);
    }
    if alpha == 2.0 {
        return if scale <= 1.0 {
            Ok(0.0)
        } else {
            Err(Error::Domain(
                "no finite constant: scale r^2 - r^2 is unbounded for scale > 1".into(),
            ))
        };
    }
    let r2 = (2.0 * scale / alpha).powf(2.0 / (alpha - 2.0));
    Ok((alpha - 2.0) / alpha * scale * r2)
}

/// `C_alpha` with `C_alpha + r^alpha >= r^2`; combined with
/// `|v|_V^2 >= lambda |v|_H^2` this yields `C_alpha + |v|_V^alpha >= lambda |v|_H^2`.
pub fn c_alpha(consts: &StructuralConstants) -> Result<f64> {
    young_gap_constant(1.0, consts.alpha)
}

/// Sharp Young constant `C` with `2 b r <= gamma5 r^alpha + C b^{alpha/(alpha-1)}`
/// for all `b, r >= 0`.
pub fn h2_young_constant(gamma5: f64, alpha: f64) -> Result<f64> {
    if alpha <= 1.0 || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be > 1, got {alpha}")));
    }
    if gamma5 <= 0.0 {
        return Err(Error::Domain(format!("gamma5 must be > 0, got {gamma5}")));
    }
    let conj = alpha / (alpha - 1.0);
    Ok((alpha - 1.0) / alpha * 2f64.powf(conj) * (alpha * gamma5).powf(-1.0 / (alpha - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapCheck {
    pub holds: bool,
    /// `lambda - (gamma2 + |gamma4|)/gamma5` (or without `|gamma4|` for `DriftOnly`).
    pub gap: f64,
}

fn gamma4_term(consts: &StructuralConstants, form: GapForm) -> f64 {
    match form {
        GapForm::Full => consts.gamma4.abs(),
        GapForm::DriftOnly => 0.0,
    }
}

pub fn check_dissipativity_gap(consts: &StructuralConstants) -> GapCheck {
    check_dissipativity_gap_with(consts, GapForm::Full)
}

pub fn check_dissipativity_gap_with(consts: &StructuralConstants, form: GapForm) -> GapCheck {
    let gap = consts.lambda - (consts.gamma2 + gamma4_term(consts, form)) / consts.gamma5;
    GapCheck {
        holds: gap > 0.0,
        gap,
    }
}

/// `lambda gamma5 - gamma2 - |gamma4|` (or without `|gamma4|` for `DriftOnly`).
pub fn energy_gap(consts: &StructuralConstants, form: GapForm) -> f64 {
    consts.lambda * consts.gamma5 - consts.gamma2 - gamma4_term(consts, form)
}

/// `eps0 = min{1, sqrt((lambda gamma5 - gamma2 - |gamma4|) / (4 lambda gamma6 + |gamma4|))}`.
pub fn noise_threshold(consts: &StructuralConstants) -> Result<f64> {
    noise_threshold_with(consts, GapForm::Full)
}

pub fn noise_threshold_with(consts: &StructuralConstants, form: GapForm) -> Result<f64> {
    let gap = energy_gap(consts, form);
    if !(gap > 0.0) {
        let cond = match form {
            GapForm::Full => "(H5) (gamma2 + |gamma4|)/gamma5 < lambda",
            GapForm::DriftOnly => "(H5) gamma2/gamma5 < lambda",
        };
        return Err(Error::Precondition(format!(
            "dissipativity condition {cond} fails (lambda*gamma5 - gamma2 - |gamma4| = {gap})"
        )));
    }
    let denom = 4.0 * consts.lambda * consts.gamma6 + consts.gamma4.abs();
    Ok((gap / denom).sqrt().min(1.0))
}

/// The four concrete equations with their per-example threshold formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ExampleModel {
    /// `A = Laplacian` on `H_0^1 < L^2`.
    ReactionDiffusion { lambda: f64, gamma2: f64 },
    /// `A(u) = -u|u|^{p-2}` on `L^p < L^2`.
    PowerLaw { lambda0: f64, gamma2: f64 },
    /// p-Laplacian on `W_0^{1,p} < L^2`.
    PLaplace { lambda_tilde: f64, gamma2: f64 },
    /// `A(u) = Laplacian Psi(u)` on `L^p < H^{-1}`.
    PorousMedium {
        beta1: f64,
        lambda_hat: f64,
        gamma2: f64,
    },
}

impl ExampleModel {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ReactionDiffusion { .. } => "reaction-diffusion",
            Self::PowerLaw { .. } => "power-law",
            Self::PLaplace { .. } => "p-laplace",
            Self::PorousMedium { .. } => "porous-medium",
        }
    }
}

/// Per-example threshold `eps~0`.
pub fn noise_threshold_example(model: &ExampleModel) -> Result<f64> {
    let (numer, denom, cond, bound) = match *model {
        ExampleModel::ReactionDiffusion { lambda, gamma2 } => (
            2.0 / 3.0 * lambda - gamma2,
            4.0 * lambda + 2.0,
            "0 <= gamma2 < (2/3) lambda",
            (gamma2, lambda),
        ),
        ExampleModel::PowerLaw { lambda0, gamma2 } => (
            2.0 / 3.0 * lambda0 - gamma2,
            4.0 * lambda0,
            "0 <= gamma2 < (2/3) lambda0",
            (gamma2, lambda0),
        ),
        ExampleModel::PLaplace {
            lambda_tilde,
            gamma2,
        } => (
            lambda_tilde / 6.0 * lambda_tilde.min(1.0) - gamma2,
            4.0 * lambda_tilde,
            "0 <= gamma2 < (lambda~/6) min{1, lambda~}",
            (gamma2, lambda_tilde),
        ),
        ExampleModel::PorousMedium {
            beta1,
            lambda_hat,
            gamma2,
        } => {
            if !(beta1 > 0.0) {
                return Err(invalid(format!("beta1 must be > 0, got {beta1}")));
            }
            (
                2.0 / 3.0 * beta1 * lambda_hat - gamma2,
                4.0 * lambda_hat,
                "0 <= gamma2 < (2/3) beta1 lambda",
                (gamma2, lambda_hat),
            )
        }
    };
    let (gamma2, lambda) = bound;
    if !(lambda > 0.0) {
        return Err(invalid(format!(
            "{}: embedding constant must be > 0, got {lambda}",
            model.name()
        )));
    }
    if gamma2 < 0.0 || !(numer > 0.0) {
        return Err(Error::Precondition(format!(
            "{}: condition {cond} fails (gamma2 = {gamma2})",
            model.name()
        )));
    }
    Ok((numer / denom).sqrt().min(1.0))
}

/// Constant choices under which each concrete equation satisfies (H0)-(H5).
pub mod presets {
    use super::*;

    fn build(c: StructuralConstants) -> Result<StructuralConstants> {
        c.validate()?;
        Ok(c)
    }

    /// `gamma3 = 2 gamma1, gamma4 = 2, gamma5 = 2/3, gamma6 = 1, alpha = 2`.
    pub fn reaction_diffusion(
        lambda: f64,
        gamma1: f64,
        gamma2: f64,
        epsilon: f64,
    ) -> Result<StructuralConstants> {
        build(StructuralConstants {
            gamma1,
            gamma2,
            gamma3: 2.0 * gamma1,
            gamma4: 2.0,
            gamma5: 2.0 / 3.0,
            gamma6: 1.0,
            alpha: 2.0,
            lambda,
            epsilon,
        })
    }

    /// `gamma3 = 2 gamma1, gamma4 = 0, gamma5 = 2/3, gamma6 = 1, alpha = p`.
    pub fn power_law(
        lambda0: f64,
        p: f64,
        gamma1: f64,
        gamma2: f64,
        epsilon: f64,
    ) -> Result<StructuralConstants> {
        build(StructuralConstants {
            gamma1,
            gamma2,
            gamma3: 2.0 * gamma1,
            gamma4: 0.0,
            gamma5: 2.0 / 3.0,
            gamma6: 1.0,
            alpha: p,
            lambda: lambda0,
            epsilon,
        })
    }

    /// `gamma4 = 0, gamma5 = min{1, lambda~}/6, gamma6 = 1, alpha = p, lambda = lambda~`.
    pub fn p_laplace(
        lambda_tilde: f64,
        p: f64,
        gamma1: f64,
        gamma2: f64,
        epsilon: f64,
    ) -> Result<StructuralConstants> {
        build(StructuralConstants {
            gamma1,
            gamma2,
            gamma3: 2.0 * gamma1,
            gamma4: 0.0,
            gamma5: lambda_tilde.min(1.0) / 6.0,
            gamma6: 1.0,
            alpha: p,
            lambda: lambda_tilde,
            epsilon,
        })
    }

    /// `gamma4 = 0, gamma5 = 2 beta1 / 3, gamma6 = beta3, alpha = p`.
    pub fn porous_medium(
        lambda_hat: f64,
        p: f64,
        beta1: f64,
        beta3: f64,
        gamma1: f64,
        gamma2: f64,
        epsilon: f64,
    ) -> Result<StructuralConstants> {
        build(StructuralConstants {
            gamma1,
            gamma2,
            gamma3: 2.0 * gamma1,
            gamma4: 0.0,
            gamma5: 2.0 / 3.0 * beta1,
            gamma6: beta3,
            alpha: p,
            lambda: lambda_hat,
            epsilon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn consts(lambda: f64, g2: f64, g4: f64, g5: f64, g6: f64) -> StructuralConstants {
        StructuralConstants {
            gamma1: 0.0,
            gamma2: g2,
            gamma3: 0.0,
            gamma4: g4,
            gamma5: g5,
            gamma6: g6,
            alpha: 2.0,
            lambda,
            epsilon: 1.0,
        }
    }

    #[test]
    fn unit_ball_volumes() {
        assert_relative_eq!(unit_ball_volume(1).unwrap(), 2.0, max_relative = 1e-12);
        assert_relative_eq!(unit_ball_volume(2).unwrap(), PI, max_relative = 1e-12);
        assert_relative_eq!(
            unit_ball_volume(3).unwrap(),
            4.0 * PI / 3.0,
            max_relative = 1e-12
        );
        assert!(matches!(unit_ball_volume(0), Err(Error::Domain(_))));
    }

    #[test]
    fn poincare_examples() {
        let t = TripleKind::new(TripleTag::H01L2, 2.0, 1.0, 1).unwrap();
        assert_relative_eq!(poincare_lambda(&t).unwrap(), 2.0, max_relative = 1e-12);
        let t = TripleKind::new(TripleTag::W1pL2, 3.0, 2.0, 1).unwrap();
        assert_relative_eq!(poincare_lambda(&t).unwrap(), 1.0, max_relative = 1e-12);
        let t = TripleKind::new(TripleTag::H01L2, 2.0, PI, 2).unwrap();
        assert_relative_eq!(poincare_lambda(&t).unwrap(), 1.0, max_relative = 1e-12);
        let t = TripleKind::new(TripleTag::LpL2, 4.0, 16.0, 1).unwrap();
        assert_relative_eq!(poincare_lambda(&t).unwrap(), 0.25, max_relative = 1e-12);
    }

    #[test]
    fn c_alpha_minimal_values() {
        let mut c = consts(1.0, 1.0, 0.0, 1.0, 1.0);
        assert_eq!(c_alpha(&c).unwrap(), 0.0);
        c.alpha = 4.0;
        assert_relative_eq!(c_alpha(&c).unwrap(), 0.25, max_relative = 1e-12);
        c.alpha = 3.0;
        assert_relative_eq!(c_alpha(&c).unwrap(), 4.0 / 27.0, max_relative = 1e-12);
        c.alpha = 1.5;
        assert!(c_alpha(&c).is_err());
    }

    #[test]
    fn dissipativity_gap_examples() {
        let g = check_dissipativity_gap(&consts(10.0, 1.0, 1.0, 1.0, 1.0));
        assert!(g.holds);
        assert_relative_eq!(g.gap, 8.0, max_relative = 1e-12);
        let g = check_dissipativity_gap(&consts(2.0, 1.0, 2.0, 2.0 / 3.0, 1.0));
        assert!(!g.holds);
        assert_relative_eq!(g.gap, -2.5, max_relative = 1e-12);
        let g = check_dissipativity_gap(&consts(1.0, 1e-300, 0.0, 1.0, 1.0));
        assert!(g.holds);
        assert_relative_eq!(g.gap, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn threshold_examples() {
        let e = noise_threshold(&consts(10.0, 1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_relative_eq!(e, (8.0f64 / 41.0).sqrt(), max_relative = 1e-12);
        let e = noise_threshold(&consts(3.7, 1e-300, 0.0, 4.0, 1.0)).unwrap();
        assert_relative_eq!(e, 1.0, max_relative = 1e-12);
        let e = noise_threshold(&consts(10.0, 9.99, 0.0, 1.0, 1.0)).unwrap();
        assert_relative_eq!(e, (0.01f64 / 40.0).sqrt(), max_relative = 1e-9);
        let err = noise_threshold(&consts(2.0, 1.0, 2.0, 2.0 / 3.0, 1.0)).unwrap_err();
        assert!(err.to_string().contains("(H5)"));
    }

    #[test]
    fn example_thresholds() {
        let e = noise_threshold_example(&ExampleModel::ReactionDiffusion {
            lambda: 2.0,
            gamma2: 1.0,
        })
        .unwrap();
        assert_relative_eq!(e, (1.0f64 / 30.0).sqrt(), max_relative = 1e-12);
        let e = noise_threshold_example(&ExampleModel::PLaplace {
            lambda_tilde: 1.0,
            gamma2: 0.0,
        })
        .unwrap();
        assert_relative_eq!(e, (1.0f64 / 24.0).sqrt(), max_relative = 1e-12);
        let e = noise_threshold_example(&ExampleModel::PorousMedium {
            beta1: 1.0,
            lambda_hat: 3.0,
            gamma2: 1.0,
        })
        .unwrap();
        assert_relative_eq!(e, (1.0f64 / 12.0).sqrt(), max_relative = 1e-12);
        let err = noise_threshold_example(&ExampleModel::ReactionDiffusion {
            lambda: 2.0,
            gamma2: 2.0,
        })
        .unwrap_err();
        assert!(err.to_string().contains("reaction-diffusion"));
    }

    #[test]
    fn reaction_diffusion_threshold_matches_general_form() {
        // drift-only gap with gamma4 = 2 in the denominator reproduces eps~0
        for &(lambda, g2) in &[(2.0, 1.0), (2.0, 0.3), (9.0, 4.0)] {
            let c = presets::reaction_diffusion(lambda, g2, g2, 1.0).unwrap();
            let general = noise_threshold_with(&c, GapForm::DriftOnly).unwrap();
            let example = noise_threshold_example(&ExampleModel::ReactionDiffusion {
                lambda,
                gamma2: g2,
            })
            .unwrap();
            assert_relative_eq!(general, example, max_relative = 1e-12);
        }
    }

    #[test]
    fn h2_young_constant_is_sharp_for_alpha_two() {
        // 2 b r <= g r^2 + b^2 / g
        assert_relative_eq!(h2_young_constant(0.5, 2.0).unwrap(), 2.0, max_relative = 1e-12);
    }
}
