//! Non-autonomous data `g(t)`, `h1(t)`, `h2(t)`, the tempered forcing
//! integral and the absorbing radius `R(tau)`.
//!
//! The improper integral over `(-inf, tau]` is split into a finite window,
//! integrated by adaptive Simpson quadrature, and an analytic tail bounded
//! from the decay envelope of each component. The window is widened until
//! the tail bound is below half the requested tolerance.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::discretization::{Grid, StateVector};
use crate::error::{invalid, Error, Result};

/// A scalar function of time given in parametric form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeFn {
    Zero,
    Constant { value: f64 },
    /// `coef * exp(rate * t)`.
    Exponential { coef: f64, rate: f64 },
    /// `sum_k coeffs[k] t^k`.
    Polynomial { coeffs: Vec<f64> },
    /// `offset + amplitude * sin(omega t + phase)`.
    Sinusoid {
        offset: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    /// `amplitude` on `[start, end]`, zero elsewhere.
    Pulse { amplitude: f64, start: f64, end: f64 },
    /// Piecewise-linear through `(time, value)` nodes, constant beyond the ends.
    Tabulated { points: Vec<(f64, f64)> },
}

/// Upper bound for `|f(s)|` as `s -> -inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Envelope {
    /// Zero for `s < start`.
    Compact { start: f64 },
    /// `c exp(rate s)`.
    Exponential { c: f64, rate: f64 },
    /// `c (1 + |s|)^degree`.
    Polynomial { c: f64, degree: f64 },
}

impl Envelope {
    fn pow(self, q: f64) -> Self {
        match self {
            Envelope::Compact { .. } => self,
            Envelope::Exponential { c, rate } => Envelope::Exponential {
                c: c.powf(q),
                rate: rate * q,
            },
            Envelope::Polynomial { c, degree } => Envelope::Polynomial {
                c: c.powf(q),
                degree: degree * q,
            },
        }
    }

    /// Bound on `int_{-inf}^{-t_cut} e^{decay x} env(tau + x) dx`.
    fn tail(self, tau: f64, decay: f64, t_cut: f64) -> Result<f64> {
        match self {
            Envelope::Compact { start } => Ok(if tau - t_cut <= start { 0.0 } else { f64::INFINITY }),
            Envelope::Exponential { c, rate } => {
                if c == 0.0 {
                    return Ok(0.0);
                }
                let k = decay + rate;
                if k <= 0.0 {
                    return Err(Error::Divergence(format!(
                        "exponential component with rate {rate} is not integrable against e^({decay} s)"
                    )));
                }
                Ok(c * (rate * tau - k * t_cut).exp() / k)
            }
            Envelope::Polynomial { c, degree } => {
                if c == 0.0 {
                    return Ok(0.0);
                }
                // y^k e^{-d y} <= Y^k e^{-d Y} e^{-(d/2)(y - Y)} once Y >= 2k/d
                let y = 1.0 + tau.abs() + t_cut;
                if y < 2.0 * degree / decay {
                    return Ok(f64::INFINITY);
                }
                Ok(2.0 * c * y.powf(degree) * (-decay * t_cut).exp() / decay)
            }
        }
    }
}

impl TimeFn {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFn::Zero => 0.0,
            TimeFn::Constant { value } => *value,
            TimeFn::Exponential { coef, rate } => coef * (rate * t).exp(),
            TimeFn::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
            TimeFn::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            } => offset + amplitude * (omega * t + phase).sin(),
            TimeFn::Pulse {
                amplitude,
                start,
                end,
            } => {
                if t >= *start && t <= *end {
                    *amplitude
                } else {
                    0.0
                }
            }
            TimeFn::Tabulated { points } => interpolate(points, t),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TimeFn::Pulse { start, end, .. } if !(start <= end) => {
                Err(invalid(format!("pulse needs start <= end, got [{start}, {end}]")))
            }
            TimeFn::Tabulated { points } => {
                if points.is_empty() {
                    return Err(invalid("tabulated profile needs at least one point"));
                }
                if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return Err(invalid("tabulated times must be strictly increasing"));
                }
                if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    return Err(invalid("tabulated profile must be finite"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn envelope(&self) -> Envelope {
        match self {
            TimeFn::Zero => Envelope::Compact {
                start: f64::INFINITY,
            },
            TimeFn::Constant { value } => Envelope::Polynomial {
                c: value.abs(),
                degree: 0.0,
            },
            TimeFn::Exponential { coef, rate } => Envelope::Exponential {
                c: coef.abs(),
                rate: *rate,
            },
            TimeFn::Polynomial { coeffs } => Envelope::Polynomial {
                c: coeffs.iter().map(|c| c.abs()).sum(),
                degree: coeffs.len().saturating_sub(1) as f64,
            },
            TimeFn::Sinusoid {
                offset, amplitude, ..
            } => Envelope::Polynomial {
                c: offset.abs() + amplitude.abs(),
                degree: 0.0,
            },
            TimeFn::Pulse { start, .. } => Envelope::Compact { start: *start },
            TimeFn::Tabulated { points } => Envelope::Polynomial {
                c: points.first().map_or(0.0, |p| p.1.abs()),
                degree: 0.0,
            },
        }
    }

    /// Points where the function is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            TimeFn::Pulse { start, end, .. } => vec![*start, *end],
            TimeFn::Tabulated { points } => points.iter().map(|p| p.0).collect(),
            _ => Vec::new(),
        }
    }
}

fn interpolate(points: &[(f64, f64)], t: f64) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    if t <= first.0 {
        return first.1;
    }
    let last = points[points.len() - 1];
    if t >= last.0 {
        return last.1;
    }
    let i = points.partition_point(|p| p.0 <= t);
    let (t0, v0) = points[i - 1];
    let (t1, v1) = points[i];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

/// Spatial profile of the deterministic forcing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpatialShape {
    /// `phi(x) = 1`.
    Constant,
    /// `phi(x) = sqrt(2/|O|) sin(k pi x / |O|)`.
    Sine { mode: u32 },
}

impl SpatialShape {
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        let len = grid.domain_length;
        grid.nodes()
            .map(|x| match *self {
                SpatialShape::Constant => 1.0,
                SpatialShape::Sine { mode } => {
                    (2.0 / len).sqrt() * (f64::from(mode) * PI * x / len).sin()
                }
            })
            .collect()
    }

    /// Continuous `L^2` norm squared.
    pub fn l2_norm_sq(&self, domain_length: f64) -> f64 {
        match self {
            SpatialShape::Constant => domain_length,
            SpatialShape::Sine { .. } => 1.0,
        }
    }
}

/// The deterministic forcing `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GForcing {
    /// `g(t, x) = amplitude(t) phi(x)`.
    Field { amplitude: TimeFn, shape: SpatialShape },
    /// Only `|g(t)|_H^2` is given; simulation realizes it along the first
    /// sine mode with unit `H`-norm.
    NormSq { norm_sq: TimeFn },
}

/// Forcing data `g, h1, h2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingProfile {
    pub g: GForcing,
    pub h1: TimeFn,
    pub h2: TimeFn,
    /// `|phi|_H^2` used for `|g(t)|_H^2`; defaults to the continuous `L^2` norm.
    #[serde(default)]
    pub shape_norm_sq: Option<f64>,
}

/// Decay class of a profile as `s -> -inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum DecayClass {
    CompactSupport,
    Exponential { rate: f64 },
    Polynomial { degree: f64 },
}

impl ForcingProfile {
    pub fn zero() -> Self {
        Self {
            g: GForcing::NormSq {
                norm_sq: TimeFn::Zero,
            },
            h1: TimeFn::Zero,
            h2: TimeFn::Zero,
            shape_norm_sq: None,
        }
    }

    /// `|g(s)|_H^2 = c`, no `h1`, `h2`.
    pub fn constant_norm_sq(c: f64) -> Self {
        Self::with_g_norm_sq(TimeFn::Constant { value: c })
    }

    pub fn with_g_norm_sq(norm_sq: TimeFn) -> Self {
        Self {
            g: GForcing::NormSq { norm_sq },
            ..Self::zero()
        }
    }

    pub fn field(amplitude: TimeFn, shape: SpatialShape) -> Self {
        Self {
            g: GForcing::Field { amplitude, shape },
            ..Self::zero()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.g {
            GForcing::Field { amplitude, .. } => amplitude.validate()?,
            GForcing::NormSq { norm_sq } => norm_sq.validate()?,
        }
        self.h1.validate()?;
        self.h2.validate()
    }

    /// Uses the discrete `H`-norm of the spatial shape on `grid`, so that
    /// `|g(t)|_H^2` matches what the simulation sees.
    pub fn bind_discrete_norm(&mut self, grid: &Grid, l2_based: bool) {
        if let GForcing::Field { shape, .. } = &self.g {
            let v = StateVector::new(*grid, shape.sample(grid));
            self.shape_norm_sq = Some(if l2_based {
                v.l2_norm_sq()
            } else {
                v.hminus1_norm_sq()
            });
        }
    }

    pub fn g_norm_sq(&self, t: f64, domain_length: f64) -> f64 {
        match &self.g {
            GForcing::Field { amplitude, shape } => {
                let a = amplitude.eval(t);
                a * a * self.shape_norm_sq.unwrap_or_else(|| shape.l2_norm_sq(domain_length))
            }
            GForcing::NormSq { norm_sq } => norm_sq.eval(t).abs(),
        }
    }

    /// Integrand `|g|^2 + |h1| + |h2|^{alpha/(alpha-1)}` of the tempered integral.
    pub fn intensity(&self, t: f64, alpha: f64, domain_length: f64) -> f64 {
        let q = alpha / (alpha - 1.0);
        self.g_norm_sq(t, domain_length) + self.h1.eval(t).abs() + self.h2.eval(t).abs().powf(q)
    }

    fn envelopes(&self, alpha: f64, domain_length: f64) -> Vec<Envelope> {
        let q = alpha / (alpha - 1.0);
        let g = match &self.g {
            GForcing::Field { amplitude, shape } => {
                let scale = self
                    .shape_norm_sq
                    .unwrap_or_else(|| shape.l2_norm_sq(domain_length));
                match amplitude.envelope().pow(2.0) {
                    Envelope::Exponential { c, rate } => Envelope::Exponential {
                        c: c * scale,
                        rate,
                    },
                    Envelope::Polynomial { c, degree } => Envelope::Polynomial {
                        c: c * scale,
                        degree,
                    },
                    e => e,
                }
            }
            GForcing::NormSq { norm_sq } => norm_sq.envelope(),
        };
        vec![g, self.h1.envelope(), self.h2.envelope().pow(q)]
    }

    /// Slowest-decaying component class as `s -> -inf`.
    pub fn decay_class(&self, alpha: f64, domain_length: f64) -> DecayClass {
        let mut class = DecayClass::CompactSupport;
        for env in self.envelopes(alpha, domain_length) {
            class = match (class, env) {
                (_, Envelope::Polynomial { c, degree }) if c > 0.0 => match class {
                    DecayClass::Polynomial { degree: d } => DecayClass::Polynomial {
                        degree: d.max(degree),
                    },
                    _ => DecayClass::Polynomial { degree },
                },
                (DecayClass::CompactSupport, Envelope::Exponential { c, rate }) if c > 0.0 => {
                    DecayClass::Exponential { rate }
                }
                (DecayClass::Exponential { rate: r }, Envelope::Exponential { c, rate })
                    if c > 0.0 =>
                {
                    DecayClass::Exponential { rate: r.min(rate) }
                }
                _ => class,
            };
        }
        class
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b = match &self.g {
            GForcing::Field { amplitude, .. } => amplitude.breakpoints(),
            GForcing::NormSq { norm_sq } => norm_sq.breakpoints(),
        };
        b.extend(self.h1.breakpoints());
        b.extend(self.h2.breakpoints());
        b
    }

    /// `g(t)` sampled on the grid.
    pub fn g_vector(&self, t: f64, grid: &Grid, h_unit_mode: &[f64]) -> Vec<f64> {
        match &self.g {
            GForcing::Field { amplitude, shape } => {
                let a = amplitude.eval(t);
                if a == 0.0 {
                    return vec![0.0; grid.n_interior];
                }
                shape.sample(grid).into_iter().map(|v| a * v).collect()
            }
            GForcing::NormSq { norm_sq } => {
                let a = norm_sq.eval(t).abs().sqrt();
                h_unit_mode.iter().map(|v| a * v).collect()
            }
        }
    }

    pub fn is_zero_g(&self) -> bool {
        match &self.g {
            GForcing::Field { amplitude, .. } => *amplitude == TimeFn::Zero,
            GForcing::NormSq { norm_sq } => *norm_sq == TimeFn::Zero,
        }
    }
}

const MAX_DEPTH: u32 = 48;

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `J = int_{-inf}^{tau} e^{decay (s - tau)} (|g|^2 + |h1| + |h2|^{alpha'}) ds`
/// to absolute accuracy `tol`.
pub fn shifted_tempered_integral(
    profile: &ForcingProfile,
    tau: f64,
    decay: f64,
    alpha: f64,
    domain_length: f64,
    tol: f64,
) -> Result<f64> {
    if !(decay > 0.0) {
        return Err(invalid(format!("decay must be > 0, got {decay}")));
    }
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be > 0, got {tol}")));
    }
    if alpha <= 1.0 {
        return Err(invalid(format!("alpha must be > 1, got {alpha}")));
    }
    profile.validate()?;
    let envelopes = profile.envelopes(alpha, domain_length);
    let tail = |t_cut: f64| -> Result<f64> {
        envelopes
            .iter()
            .map(|e| e.tail(tau, decay, t_cut))
            .sum::<Result<f64>>()
    };
    let mut t_cut = (1.0 / decay).max(1.0);
    loop {
        let bound = tail(t_cut)?;
        if bound <= 0.5 * tol {
            break;
        }
        t_cut *= 2.0;
        if t_cut > 1e9 {
            return Err(Error::Divergence(
                "tail bound does not fall below the tolerance".into(),
            ));
        }
    }
    let a = tau - t_cut;
    let mut cuts: Vec<f64> = profile
        .breakpoints()
        .into_iter()
        .filter(|&b| b > a && b < tau)
        .collect();
    cuts.push(a);
    cuts.push(tau);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let integrand = |s: f64| (decay * (s - tau)).exp() * profile.intensity(s, alpha, domain_length);
    let pieces = (cuts.len() - 1) as f64;
    let value = cuts
        .windows(2)
        .map(|w| simpson(&integrand, w[0], w[1], 0.5 * tol / pieces))
        .sum();
    Ok(value)
}

/// `int_{-inf}^{tau} e^{decay s}(|g|^2 + |h1| + |h2|^{alpha/(alpha-1)}) ds`.
pub fn tempered_integral(
    profile: &ForcingProfile,
    tau: f64,
    decay: f64,
    alpha: f64,
    domain_length: f64,
    tol: f64,
) -> Result<f64> {
    let scale = (decay * tau).exp();
    let j = shifted_tempered_integral(profile, tau, decay, alpha, domain_length, tol / scale)?;
    Ok(scale * j)
}

/// `R(tau) = L + L e^{-decay tau} int_{-inf}^{tau} e^{decay s}(...) ds`.
pub fn absorbing_radius(
    tau: f64,
    l: f64,
    profile: &ForcingProfile,
    decay: f64,
    alpha: f64,
    domain_length: f64,
    tol: f64,
) -> Result<f64> {
    if !(l > 0.0) {
        return Err(invalid(format!("L must be > 0, got {l}")));
    }
    let j = shifted_tempered_integral(profile, tau, decay, alpha, domain_length, tol / l)?;
    Ok(l + l * j)
}

/// Radius `rho(tau)` of a family of balls `D(tau)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RadiusFamily {
    Constant { value: f64 },
    /// `sum_k coeffs[k] |tau|^k`.
    Polynomial { coeffs: Vec<f64> },
    /// `coef * exp(-delta tau)`.
    Exponential { coef: f64, delta: f64 },
    Tabulated { points: Vec<(f64, f64)> },
}

impl RadiusFamily {
    pub fn eval(&self, tau: f64) -> f64 {
        match self {
            RadiusFamily::Constant { value } => value.abs(),
            RadiusFamily::Polynomial { coeffs } => coeffs
                .iter()
                .rev()
                .fold(0.0, |acc, c| acc * tau.abs() + c)
                .abs(),
            RadiusFamily::Exponential { coef, delta } => (coef * (-delta * tau).exp()).abs(),
            RadiusFamily::Tabulated { points } => interpolate(points, tau).abs(),
        }
    }
}

/// Decides analytically whether `e^{decay tau} rho(tau)^2 -> 0` as `tau -> -inf`.
pub fn is_tempered_family(rho: &RadiusFamily, decay: f64) -> Result<bool> {
    if !(decay > 0.0) {
        return Err(invalid(format!("decay must be > 0, got {decay}")));
    }
    match rho {
        RadiusFamily::Constant { .. } | RadiusFamily::Polynomial { .. } => Ok(true),
        RadiusFamily::Exponential { coef, delta } => Ok(*coef == 0.0 || decay - 2.0 * delta > 0.0),
        RadiusFamily::Tabulated { .. } => Err(Error::Unsupported(
            "temperedness of a tabulated radius cannot be decided".into(),
        )),
    }
}
