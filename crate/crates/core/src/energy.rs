//! Explicit constants of the mean-square energy estimate.
//!
//! With `y = E|u|_H^2`, `V = E|u|_V^alpha`, `delta` the energy gap,
//! `D = 4 lambda gamma6 + |gamma4|` and `q = min(1, delta/D)` (so `eps^2 <= q`
//! whenever `eps <= eps0`), Ito's formula gives
//!
//! ```text
//! y' = 2<A u, u> + eps^2 |G|^2 + 2<F(u), u> + 2<g, u>.
//! ```
//!
//! Each term is bounded as follows.
//!
//! * Drift: (H3) without the `-|G|^2` term, `2<A u, u> <= gamma4 y - 3 gamma5 V + h1`;
//!   for a drift-only gap `2<A u, u> <= -3 gamma5 V`.
//! * Noise: the first line of the diffusion bound plus
//!   `2 h2 |u|_V <= gamma5 |u|_V^alpha + C_{gamma5,alpha} |h2|^{alpha'}` gives
//!   `eps^2 |G|^2 <= q (|gamma4| y + 2 (gamma6 - gamma5)^+ V + C_{gamma5,alpha} |h2|^{alpha'} + |h1|)`.
//! * Reaction: `2<F(u), u> <= 2 gamma2 |u| + 2 gamma2 y` and
//!   `2 gamma2 |u| <= (delta/4) y + 4 gamma2^2 / delta`.
//! * Forcing: `2<g, u> <= (delta/4) y + (4/delta) |g|^2`.
//! * Embedding: `-kappa V <= -kappa lambda y + kappa C_alpha` for `kappa >= 0`.
//!
//! Summing, with `kappa = 3 gamma5 - 2 q (gamma6 - gamma5)^+` and
//! `a_y = |gamma4| [full gap] + q |gamma4|`,
//!
//! ```text
//! y' + rho y <= c0 + c_g |g|^2 + c_h2 |h2|^{alpha'} + c_h1 |h1|,
//! rho = kappa lambda - a_y - 2 gamma2 - delta/2 >= lambda gamma5 + delta/2,
//! c0 = kappa C_alpha + 4 gamma2^2/delta, c_g = 4/delta,
//! c_h2 = q C_{gamma5,alpha}, c_h1 = 1 + q.
//! ```
//!
//! Grönwall with rate `lambda gamma5` then yields
//! `y(tau) <= e^{-lambda gamma5 t} y0 + c1 + c2 J` with `c1 = c0 / (lambda gamma5)`,
//! `c2 = max(c_g, c_h2, c_h1)` and `J` the shifted tempered integral, so
//! `L = 1 + c1 + c2` gives `R(tau) = L + L J`.

use serde::Serialize;

use crate::constants::{
    c_alpha, energy_gap, h2_young_constant, noise_threshold_with, GapForm, StructuralConstants,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GronwallConstants {
    pub form: GapForm,
    pub gap: f64,
    /// `eps0^2`.
    pub q: f64,
    pub kappa: f64,
    pub a_y: f64,
    /// Rate obtained before weakening to `lambda gamma5`.
    pub rho: f64,
    pub c_alpha: f64,
    pub c_young_h2: f64,
    pub c0: f64,
    pub c_g: f64,
    pub c_h2: f64,
    pub c_h1: f64,
    pub c1: f64,
    pub c2: f64,
    pub l: f64,
}

/// Right-hand side constants `(c0, c_g, c_h2, c_h1)` of the differential inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhsConstants {
    pub c0: f64,
    pub c_g: f64,
    pub c_h2: f64,
    pub c_h1: f64,
}

impl RhsConstants {
    pub fn eval(&self, g_norm_sq: f64, h1: f64, h2: f64, alpha: f64) -> f64 {
        self.c0
            + self.c_g * g_norm_sq
            + self.c_h2 * h2.abs().powf(alpha / (alpha - 1.0))
            + self.c_h1 * h1.abs()
    }
}

impl GronwallConstants {
    pub fn rhs(&self) -> RhsConstants {
        RhsConstants {
            c0: self.c0,
            c_g: self.c_g,
            c_h2: self.c_h2,
            c_h1: self.c_h1,
        }
    }
}

pub fn derive_gronwall_constants(
    consts: &StructuralConstants,
    form: GapForm,
) -> Result<GronwallConstants> {
    consts.validate()?;
    let eps0 = noise_threshold_with(consts, form)?;
    let gap = energy_gap(consts, form);
    let q = eps0 * eps0;
    let g4 = consts.gamma4.abs();
    let kappa = 3.0 * consts.gamma5 - 2.0 * q * (consts.gamma6 - consts.gamma5).max(0.0);
    let a_y = match form {
        GapForm::Full => g4,
        GapForm::DriftOnly => 0.0,
    } + q * g4;
    let rho = kappa * consts.lambda - a_y - 2.0 * consts.gamma2 - 0.5 * gap;
    let decay = consts.decay_rate();
    if !(rho >= decay + 0.5 * gap - 1e-12 * (decay + gap)) {
        return Err(Error::Precondition(format!(
            "energy rate {rho} falls below lambda*gamma5 + gap/2 = {}",
            decay + 0.5 * gap
        )));
    }
    let c_a = c_alpha(consts)?;
    let c_y = h2_young_constant(consts.gamma5, consts.alpha)?;
    let c0 = kappa * c_a + 4.0 * consts.gamma2 * consts.gamma2 / gap;
    let c_g = 4.0 / gap;
    let c_h2 = q * c_y;
    let c_h1 = 1.0 + q;
    let c1 = c0 / decay;
    let c2 = c_g.max(c_h2).max(c_h1);
    Ok(GronwallConstants {
        form,
        gap,
        q,
        kappa,
        a_y,
        rho,
        c_alpha: c_a,
        c_young_h2: c_y,
        c0,
        c_g,
        c_h2,
        c_h1,
        c1,
        c2,
        l: 1.0 + c1 + c2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::noise_threshold_with;
    use crate::discretization::{
        apply_drift, apply_reaction, h_inner, h_norm_sq, v_norm_alpha, DriftKind, Grid,
        ModelSpec, PsiSpec, ReactionForm, ReactionSpec, StateVector,
    };
    use crate::hypotheses::sample_state;
    use crate::noise::{NoiseField, NoiseSpec};
    use crate::rng::{standard_normal, stream, Purpose};

    fn within(lhs: f64, rhs: f64, scale: f64) -> bool {
        lhs <= rhs + 1e-9 * scale.max(1e-300)
    }

    /// Re-verifies each step of the worksheet on sampled states, forcing
    /// vectors and times.
    fn verify(model: &ModelSpec, noise: &NoiseSpec, h1: f64, h2: f64) {
        let g = Grid::new(31, 1.0).unwrap();
        let mut consts = model.example_constants(1.0).unwrap();
        let form = model.gap_form();
        consts.epsilon = noise_threshold_with(&consts, form).unwrap();
        let w = derive_gronwall_constants(&consts, form).unwrap();
        assert!(w.rho >= consts.decay_rate() + 0.5 * w.gap - 1e-12);
        let field = NoiseField::new(noise, &g, &model.triple).unwrap();
        let alpha = consts.alpha;
        let eps2 = consts.epsilon.powi(2);
        for trial in 0..2000 {
            let mut rng = stream(99, trial, Purpose::Sampling);
            let u = StateVector::new(g, sample_state(&g, &mut rng));
            let gv: Vec<f64> = (0..g.n_interior).map(|_| standard_normal(&mut rng)).collect();
            let y = h_norm_sq(&u, &model.triple);
            let vv = v_norm_alpha(&u, model);
            let gn = h_norm_sq(&StateVector::new(g, gv.clone()), &model.triple);

            let drift = 2.0 * h_inner(&apply_drift(&u, model).values, &u.values, &g, &model.triple);
            let hs = eps2 * field.hs_norm_sq(&u);
            let ag_rhs = -w.kappa * vv + w.a_y * y + w.c_h2 * h2.abs().powf(alpha / (alpha - 1.0))
                + w.c_h1 * h1.abs();
            assert!(within(drift + hs, ag_rhs, drift.abs() + hs + ag_rhs.abs() + w.kappa * vv));

            let fu = apply_reaction(&u, &model.reaction);
            let f_term = 2.0 * h_inner(&fu.values, &u.values, &g, &model.triple);
            let f_rhs = (2.0 * consts.gamma2 + 0.25 * w.gap) * y
                + 4.0 * consts.gamma2.powi(2) / w.gap;
            assert!(within(f_term, f_rhs, f_term.abs() + f_rhs));

            let g_term = 2.0 * h_inner(&gv, &u.values, &g, &model.triple);
            let g_rhs = 0.25 * w.gap * y + w.c_g * gn;
            assert!(within(g_term, g_rhs, g_term.abs() + g_rhs));

            let emb = consts.lambda * y;
            let emb_rhs = w.c_alpha + vv;
            assert!(within(emb, emb_rhs, emb + emb_rhs));

            let total = drift + hs + f_term + g_term;
            let bound = -w.rho * y
                + w.rhs().eval(gn, h1, h2, alpha);
            assert!(within(total, bound, total.abs() + bound.abs() + w.rho * y + w.kappa * w.c_alpha));
        }
    }

    fn tanh(g: f64) -> ReactionSpec {
        ReactionSpec {
            form: ReactionForm::Tanh,
            gamma1: g,
            gamma2: g,
        }
    }

    #[test]
    fn laplacian_worksheet_with_noise() {
        let g = Grid::new(31, 1.0).unwrap();
        let m = ModelSpec::new(DriftKind::Laplacian, 2.0, &g, tanh(0.5)).unwrap();
        verify(&m, &NoiseSpec::scalar_multiplicative(2f64.sqrt(), 0), 0.0, 0.0);
    }

    #[test]
    fn power_law_worksheet() {
        let g = Grid::new(31, 1.0).unwrap();
        let m = ModelSpec::new(DriftKind::PowerLaw, 3.0, &g, tanh(0.2)).unwrap();
        verify(&m, &NoiseSpec::zero(0), 0.0, 0.0);
    }

    #[test]
    fn p_laplace_worksheet() {
        let g = Grid::new(31, 1.0).unwrap();
        let m = ModelSpec::new(DriftKind::PLaplace, 4.0, &g, tanh(0.1)).unwrap();
        verify(&m, &NoiseSpec::zero(0), 0.0, 0.0);
    }

    #[test]
    fn porous_worksheet_with_structural_h() {
        let g = Grid::new(31, 1.0).unwrap();
        let m = ModelSpec::new(
            DriftKind::PorousMedium,
            3.0,
            &g,
            ReactionSpec {
                form: ReactionForm::Linear,
                gamma1: 0.5,
                gamma2: 0.5,
            },
        )
        .unwrap()
        .with_psi(PsiSpec { linear: 0.3 });
        verify(&m, &NoiseSpec::zero(0), m.structural_h1(), m.structural_h2());
    }

    #[test]
    fn derived_l_values() {
        let c = crate::constants::presets::reaction_diffusion(2.0, 0.5, 0.5, 0.1).unwrap();
        let w = derive_gronwall_constants(&c, GapForm::DriftOnly).unwrap();
        let gap = 4.0 / 3.0 - 0.5;
        assert!((w.gap - gap).abs() < 1e-15);
        assert!((w.q - gap / 10.0).abs() < 1e-15);
        assert!((w.c_g - 4.0 / gap).abs() < 1e-12);
        // alpha = 2: C_alpha = 0, so c0 comes from the reaction alone
        assert!((w.c0 - 1.0 / gap).abs() < 1e-12);
        assert!((w.l - (1.0 + w.c1 + w.c2)).abs() < 1e-15);
        assert!(w.l > 1.0);
    }

    #[test]
    fn closed_gap_is_rejected() {
        let c = crate::constants::presets::reaction_diffusion(2.0, 2.0, 2.0, 0.1).unwrap();
        assert!(matches!(
            derive_gronwall_constants(&c, GapForm::DriftOnly),
            Err(Error::Precondition(_))
        ));
    }
}
