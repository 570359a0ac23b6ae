//! Ladder-height exponents, Wiener–Hopf factorisation and Vigon's identities.
//!
//! Normalisation: local time at the infimum is the Lebesgue time spent there,
//! local time at the supremum makes `κ(∞) = q + |Π_H| = 1` whenever the
//! ascending ladder has no drift. Together they fix the Wiener–Hopf constant
//! to 1, so `−ψ(λ) = κ(−λ)·κ̂(λ)`. For a spectrally positive model with
//! drift `−c` this gives `κ̂(λ) = cλ`.

mod renewal;

pub use renewal::{
    e0_residual, pk_first_passage, renewal_measure, FirstPassageTable, RenewalDensity, RenewalGrid,
    DEFAULT_RENEWAL_STEP,
};

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::law::JumpLaw;
use crate::model::{cramer_root, exp_moment, psi_eval, LevyModel, MomentClass, ModelKind, Side};
use crate::quad;
use crate::tails::TailFunction;

const QUAD_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LadderSide {
    Ascending,
    Descending,
}

/// Lévy measure of a ladder-height subordinator, stored through its tail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LadderMeasure {
    Zero,
    /// `Π̄(x) = mass·e^{−rate·x}`.
    Exponential { mass: f64, rate: f64 },
    /// `Π̄(x) = scale·∫_x^∞ S(u) du` with `S` the survival of `law`.
    IntegratedTail { law: JumpLaw, scale: f64 },
}

impl LadderMeasure {
    pub fn tail(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            Self::Zero => 0.0,
            Self::Exponential { mass, rate } => mass * (-rate * x).exp(),
            Self::IntegratedTail { law, scale } => scale * law.tail_integral(x),
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.tail(0.0)
    }

    /// Density of the measure; exact for every variant.
    pub fn density(&self, x: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Exponential { mass, rate } => mass * rate * (-rate * x).exp(),
            Self::IntegratedTail { law, scale } => scale * law.survival(x),
        }
    }

    /// `∫_0^∞ x Π(dx) = ∫_0^∞ Π̄(x) dx`.
    pub fn first_moment(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Exponential { mass, rate } => mass / rate,
            Self::IntegratedTail { law, scale } => {
                scale * quad::integrate_to_infinity(|u| u * law.survival(u), 0.0, QUAD_REL, 0.0).value
            }
        }
    }

    /// Tail values `Π̄(i·h)` for `i = 0..n`, accumulated cell by cell from the far end.
    pub fn tail_on_grid(&self, h: f64, n: usize) -> Vec<f64> {
        match self {
            Self::IntegratedTail { law, scale } => {
                let mut out = vec![0.0; n];
                if n == 0 {
                    return out;
                }
                let mut acc = law.tail_integral((n - 1) as f64 * h);
                out[n - 1] = scale * acc;
                for i in (0..n - 1).rev() {
                    acc += law.survival_integral(i as f64 * h, (i + 1) as f64 * h);
                    out[i] = scale * acc;
                }
                out
            }
            _ => (0..n).map(|i| self.tail(i as f64 * h)).collect(),
        }
    }
}

/// `(q, d, Π_H)` of a (possibly killed) ladder-height subordinator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderExponentData {
    pub q: f64,
    pub d: f64,
    pub measure: LadderMeasure,
    pub side: LadderSide,
}

impl LadderExponentData {
    pub fn pi_tail(&self, x: f64) -> f64 {
        self.measure.tail(x)
    }

    /// `Π̄_H` as a log-space tail function on `[0, x_max]`.
    pub fn pi_h(&self, x_max: f64) -> TailFunction {
        let m = self.measure.clone();
        TailFunction::new("ladder_tail", x_max, true, move |x| m.tail(x).ln())
    }

    /// `κ'(0) = d + ∫ x Π_H(dx)` (the mean of `H₁` when `q = 0`).
    pub fn mean_rate(&self) -> f64 {
        self.d + self.measure.first_moment()
    }
}

/// `κ(λ) = q + dλ + ∫(1 − e^{−λx}) Π_H(dx)`.
pub fn kappa_eval(ladder: &LadderExponentData, lambda: f64) -> Result<f64> {
    let base = ladder.q + ladder.d * lambda;
    match &ladder.measure {
        LadderMeasure::Zero => Ok(base),
        LadderMeasure::Exponential { mass, rate } => {
            if lambda <= -rate {
                return Err(LabError::Divergence(format!(
                    "∫ e^{{{}x}} Π_H(dx) diverges for an exponential ladder measure of rate {rate}",
                    -lambda
                )));
            }
            Ok(base + mass * lambda / (lambda + rate))
        }
        LadderMeasure::IntegratedTail { law, scale } => {
            if lambda < 0.0 && law.mgf(-lambda).is_infinite() {
                return Err(LabError::Divergence(format!(
                    "∫ e^{{{}x}} Π_H(dx) diverges",
                    -lambda
                )));
            }
            let q = quad::integrate_to_infinity(
                |x| {
                    if lambda >= 0.0 {
                        -(-lambda * x).exp_m1() * law.survival(x)
                    } else {
                        law.survival(x) - (-lambda * x + law.ln_survival(x)).exp()
                    }
                },
                0.0,
                QUAD_REL,
                0.0,
            );
            Ok(base + scale * q.value)
        }
    }
}

/// Splits `−ψ` into ascending and descending ladder exponents.
///
/// Catalog: Brownian motion with negative drift; spectrally positive compound
/// Poisson with drift `−c < 0`; two-sided compound Poisson with exponential
/// jumps both ways and drift `≤ 0`.
pub fn wh_factorize(model: &LevyModel) -> Result<(LadderExponentData, LadderExponentData)> {
    match model.kind {
        ModelKind::BrownianDrift => {
            if model.drift >= 0.0 {
                return Err(LabError::UnsupportedModel("Brownian factorisation needs negative drift".into()));
            }
            // −ψ(λ) = (σ²/2)·λ·(γ − λ); the drift factor is split evenly between the ladders
            let gamma = -2.0 * model.drift / (model.sigma * model.sigma);
            let d = model.sigma / std::f64::consts::SQRT_2;
            Ok((
                LadderExponentData { q: d * gamma, d, measure: LadderMeasure::Zero, side: LadderSide::Ascending },
                LadderExponentData { q: 0.0, d, measure: LadderMeasure::Zero, side: LadderSide::Descending },
            ))
        }
        ModelKind::CompoundPoissonDrift => {
            let c = -model.drift;
            match (&model.up, &model.down) {
                (Some(up), None) => {
                    if !(c > 0.0) {
                        return Err(LabError::UnsupportedModel(
                            "spectrally positive factorisation needs negative drift".into(),
                        ));
                    }
                    let q = -model.mean() / c;
                    if q < 0.0 {
                        return Err(LabError::UnsupportedModel(format!(
                            "E X₁ = {} > 0: ascending ladder is not a subordinator",
                            model.mean()
                        )));
                    }
                    let measure = match &up.law {
                        JumpLaw::Exponential { rate } => {
                            LadderMeasure::Exponential { mass: up.rate / (c * rate), rate: *rate }
                        }
                        law => LadderMeasure::IntegratedTail { law: law.clone(), scale: up.rate / c },
                    };
                    Ok((
                        LadderExponentData { q, d: 0.0, measure, side: LadderSide::Ascending },
                        LadderExponentData { q: 0.0, d: c, measure: LadderMeasure::Zero, side: LadderSide::Descending },
                    ))
                }
                (Some(up), Some(down)) => {
                    let (eta, mu) = match (&up.law, &down.law) {
                        (JumpLaw::Exponential { rate: a }, JumpLaw::Exponential { rate: b }) => (*a, *b),
                        _ => {
                            return Err(LabError::UnsupportedModel(
                                "two-sided factorisation needs exponential jumps on both sides".into(),
                            ))
                        }
                    };
                    two_sided_exponential(c, up.rate, eta, down.rate, mu)
                }
                _ => Err(LabError::UnsupportedModel("model has no upward jumps".into())),
            }
        }
    }
}

/// Rational factorisation for `X_t = −ct + Σ Exp(η) up − Σ Exp(μ) down`, `c ≥ 0`.
///
/// `−ψ(λ)(η−λ)(μ+λ) = λ·N(λ)`; `N` has the Cramér root `γ` and, when `c > 0`,
/// a second root `−β < −μ`.
fn two_sided_exponential(
    c: f64,
    rate_up: f64,
    eta: f64,
    rate_down: f64,
    mu: f64,
) -> Result<(LadderExponentData, LadderExponentData)> {
    if c < 0.0 {
        return Err(LabError::UnsupportedModel(
            "two-sided factorisation with positive drift is outside the catalog".into(),
        ));
    }
    let n0 = c * eta * mu - rate_up * mu + rate_down * eta;
    if !(n0 > 0.0) {
        return Err(LabError::UnsupportedModel("process does not drift to −∞".into()));
    }
    let (gamma, descending) = if c > 0.0 {
        // c λ² − bλ − n0 = 0
        let b = c * (eta - mu) - rate_up - rate_down;
        let disc = (b * b + 4.0 * c * n0).sqrt();
        let gamma = if b >= 0.0 { (b + disc) / (2.0 * c) } else { 2.0 * n0 / (disc - b) };
        let beta = n0 / (c * gamma);
        (
            gamma,
            LadderExponentData {
                q: 0.0,
                d: c,
                measure: LadderMeasure::Exponential { mass: c * (beta - mu) / mu, rate: mu },
                side: LadderSide::Descending,
            },
        )
    } else {
        let total = rate_up + rate_down;
        (
            n0 / total,
            LadderExponentData {
                q: 0.0,
                d: 0.0,
                measure: LadderMeasure::Exponential { mass: total, rate: mu },
                side: LadderSide::Descending,
            },
        )
    };
    let ascending = LadderExponentData {
        q: gamma / eta,
        d: 0.0,
        measure: LadderMeasure::Exponential { mass: (eta - gamma) / eta, rate: eta },
        side: LadderSide::Ascending,
    };
    Ok((ascending, descending))
}

fn renewal_of(descending: &LadderExponentData) -> Result<RenewalDensity> {
    RenewalDensity::from_ladder(descending).ok_or_else(|| {
        LabError::UnsupportedModel("descending renewal measure has no closed form for this ladder".into())
    })
}

/// `Π̄_H(x) = ∫_0^∞ V̂(dy) Π̄_X(x+y)`.
pub fn vigon_inverse(model: &LevyModel, descending: &LadderExponentData, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(crate::error::invalid("x", format!("must be positive, got {x}")));
    }
    let Some(up) = &model.up else {
        return Ok(0.0);
    };
    let v = renewal_of(descending)?;
    let law = &up.law;
    let mut total = v.atom * law.survival(x);
    for term in &v.terms {
        total += term.coef * damped_tail(law, term.decay, x)?;
    }
    Ok(up.rate * total)
}

/// `∫_0^∞ e^{−b y} S(x+y) dy`, truncated where the remainder is certified below 1e−12 relative.
fn damped_tail(law: &JumpLaw, b: f64, x: f64) -> Result<f64> {
    let mut upper = 8.0;
    let mut acc = 0.0;
    let mut from = 0.0;
    for _ in 0..60 {
        let part = quad::integrate(|y| (-b * y + law.ln_survival(x + y)).exp(), from, upper, QUAD_REL, 0.0);
        acc += part.value;
        let r = law.decay_rate_beyond(x + upper) + b;
        if r > 0.0 {
            let bound = (-b * upper + law.ln_survival(x + upper)).exp() / r;
            if bound <= 1e-12 * acc || (acc == 0.0 && bound == 0.0) {
                return Ok(acc);
            }
        }
        from = upper;
        upper *= 2.0;
    }
    Err(LabError::Truncation(format!("tail of ∫ e^{{-{b}y}} S({x}+y) dy not certified")))
}

/// Relative residual of `Π̄_X(t) = ∫Π_H(t+dy)Π̄_Ĥ(y) + d̂·Π′_H(t) + q̂·Π̄_H(t)`.
///
/// When `Π_H` comes from quadrature its density is recovered by a central
/// difference, so the residual audits the factorisation and the inverse
/// transform together.
pub fn vigon_forward_residual(
    model: &LevyModel,
    ascending: &LadderExponentData,
    descending: &LadderExponentData,
    t: f64,
) -> Result<f64> {
    if model.kind == ModelKind::BrownianDrift {
        return Err(LabError::NotApplicable("no jumps: both sides vanish identically".into()));
    }
    if !(t > 0.0) {
        return Err(crate::error::invalid("t", format!("must be positive, got {t}")));
    }
    let lhs = crate::model::pi_tail(model, t, Side::Up)?;
    let density = |s: f64| -> Result<f64> {
        match &ascending.measure {
            LadderMeasure::IntegratedTail { .. } => {
                let h = 1e-3 * s.min(1.0);
                let up = vigon_inverse(model, descending, s + h)?;
                let dn = vigon_inverse(model, descending, s - h)?;
                Ok((dn - up) / (2.0 * h))
            }
            m => Ok(m.density(s)),
        }
    };
    let mut rhs = descending.d * density(t)? + descending.q * ascending.pi_tail(t);
    if descending.measure != LadderMeasure::Zero {
        let m = &descending.measure;
        let q = match &ascending.measure {
            LadderMeasure::IntegratedTail { .. } => {
                return Err(LabError::UnsupportedModel("jumping descending ladder with quadrature Π_H".into()))
            }
            a => quad::integrate_to_infinity(|y| a.density(t + y) * m.tail(y), 0.0, QUAD_REL, 0.0),
        };
        rhs += q.value;
    }
    if lhs == 0.0 {
        return Ok(rhs.abs());
    }
    Ok((lhs - rhs).abs() / lhs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremConstants {
    pub alpha: f64,
    pub kappa_hat_alpha: f64,
    pub kappa_neg_alpha: f64,
    pub q: f64,
    /// `q / (κ̂(α) κ(−α)²)`; absent when `κ(−α) = 0`.
    #[serde(rename = "L")]
    pub l: Option<f64>,
    /// `1 − E e^{−γ|S_T̂₁|}` for the jump-epoch random walk, when `γ` exists.
    pub iglehart_factor: Option<f64>,
}

pub fn theorem_constants(model: &LevyModel, alpha: f64) -> Result<TheoremConstants> {
    let (asc, desc) = wh_factorize(model)?;
    let kappa_hat_alpha = kappa_eval(&desc, alpha)?;
    let moment = exp_moment(model, alpha)?;
    let kappa_neg_alpha = if moment.classification == MomentClass::Critical {
        0.0
    } else if model.is_spectrally_positive() || model.kind == ModelKind::BrownianDrift {
        // closed-form route through the factorisation identity
        let psi = psi_eval(model, alpha);
        if psi.is_infinite() {
            return Err(LabError::Divergence(format!("ψ({alpha}) = +∞, κ(−{alpha}) diverges")));
        }
        -psi / kappa_hat_alpha
    } else {
        kappa_eval(&asc, -alpha)?
    };
    let l = (kappa_neg_alpha != 0.0).then(|| asc.q / (kappa_hat_alpha * kappa_neg_alpha * kappa_neg_alpha));
    let iglehart_factor = match (cramer_root(model)?, model.kind) {
        (Some(gamma), ModelKind::CompoundPoissonDrift) => {
            // the walk's strict descending ladder height is exponential when the
            // downward part of a step is a single exponential variable
            let rate = match (&model.up, &model.down) {
                (Some(up), None) => Some(up.rate / -model.drift),
                (Some(_), Some(down)) if model.drift == 0.0 => match down.law {
                    JumpLaw::Exponential { rate } => Some(rate),
                    _ => None,
                },
                _ => None,
            };
            rate.map(|r| gamma / (gamma + r))
        }
        _ => None,
    };
    Ok(TheoremConstants {
        alpha,
        kappa_hat_alpha,
        kappa_neg_alpha,
        q: asc.q,
        l,
        iglehart_factor,
    })
}

#[cfg(test)]
mod tests;
