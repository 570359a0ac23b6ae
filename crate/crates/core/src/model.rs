//! Supported Lévy model families: Brownian motion with drift and two-sided
//! compound Poisson with drift.

use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::law::JumpLaw;

/// Tolerance on `|E e^{αX₁} - 1|` separating critical from sub/supercritical.
pub const CRITICALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModelKind {
    BrownianDrift,
    CompoundPoissonDrift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Up,
    Down,
}

/// Jumps in one direction: a Poisson rate and a law for the (positive) size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpComponent {
    pub rate: f64,
    pub law: JumpLaw,
}

impl JumpComponent {
    pub fn new(rate: f64, law: JumpLaw) -> Self {
        Self { rate, law }
    }
}

/// A Lévy process `X` with bounded-variation jump part.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevyModel {
    pub kind: ModelKind,
    pub drift: f64,
    pub sigma: f64,
    pub up: Option<JumpComponent>,
    pub down: Option<JumpComponent>,
}

impl LevyModel {
    pub fn brownian(drift: f64, sigma: f64) -> Result<Self> {
        let m = Self {
            kind: ModelKind::BrownianDrift,
            drift,
            sigma,
            up: None,
            down: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn compound_poisson(drift: f64, up: Option<JumpComponent>, down: Option<JumpComponent>) -> Result<Self> {
        let m = Self {
            kind: ModelKind::CompoundPoissonDrift,
            drift,
            sigma: 0.0,
            up: up.filter(|c| c.rate != 0.0),
            down: down.filter(|c| c.rate != 0.0),
        };
        m.validate()?;
        Ok(m)
    }

    /// The M/M/1-type model: drift −1, unit-rate Exp(2) up-jumps.
    pub fn mm1() -> Self {
        Self::compound_poisson(-1.0, Some(JumpComponent::new(1.0, JumpLaw::Exponential { rate: 2.0 })), None)
            .expect("valid parameters")
    }

    /// Drift −2 with unit-rate `TiltedPareto(1, 2)` up-jumps; no Cramér root.
    pub fn model_c() -> Self {
        Self::compound_poisson(
            -2.0,
            Some(JumpComponent::new(1.0, JumpLaw::TiltedPareto { alpha: 1.0, rho: 2.0 })),
            None,
        )
        .expect("valid parameters")
    }

    pub fn validate(&self) -> Result<()> {
        if !self.drift.is_finite() {
            return Err(invalid("drift", "must be finite"));
        }
        for (name, c) in [("jumps_up", &self.up), ("jumps_down", &self.down)] {
            if let Some(c) = c {
                if !(c.rate >= 0.0 && c.rate.is_finite()) {
                    return Err(invalid(name, format!("rate must be nonnegative, got {}", c.rate)));
                }
                c.law.validate()?;
            }
        }
        match self.kind {
            ModelKind::BrownianDrift => {
                if !(self.sigma > 0.0 && self.sigma.is_finite()) {
                    return Err(invalid("sigma", "Brownian models need sigma > 0"));
                }
                if self.rate_up() > 0.0 || self.rate_down() > 0.0 {
                    return Err(invalid("kind", "Brownian models carry no jumps"));
                }
            }
            ModelKind::CompoundPoissonDrift => {
                if self.sigma != 0.0 {
                    return Err(invalid("sigma", "compound Poisson models have sigma = 0"));
                }
                if !(self.rate_up() + self.rate_down() > 0.0) {
                    return Err(invalid("kind", "compound Poisson models need a positive jump rate"));
                }
            }
        }
        Ok(())
    }

    pub fn rate_up(&self) -> f64 {
        self.up.as_ref().map_or(0.0, |c| c.rate)
    }

    pub fn rate_down(&self) -> f64 {
        self.down.as_ref().map_or(0.0, |c| c.rate)
    }

    pub fn total_rate(&self) -> f64 {
        self.rate_up() + self.rate_down()
    }

    pub fn component(&self, side: Side) -> Option<&JumpComponent> {
        match side {
            Side::Up => self.up.as_ref(),
            Side::Down => self.down.as_ref(),
        }
    }

    /// `E X₁ = ψ'(0)`.
    pub fn mean(&self) -> f64 {
        let up = self.up.as_ref().map_or(0.0, |c| c.rate * c.law.mean());
        let down = self.down.as_ref().map_or(0.0, |c| c.rate * c.law.mean());
        self.drift + up - down
    }

    /// Right end of the interval `{λ > 0 : ψ(λ) < ∞}` (possibly attained).
    pub fn psi_abscissa(&self) -> f64 {
        self.up.as_ref().map_or(f64::INFINITY, |c| c.law.mgf_abscissa())
    }

    pub fn is_spectrally_positive(&self) -> bool {
        self.kind == ModelKind::CompoundPoissonDrift && self.down.is_none()
    }
}

/// Cumulant `ψ(λ) = log E e^{λX₁}`; `+∞` when a jump transform diverges.
pub fn psi_eval(model: &LevyModel, lambda: f64) -> f64 {
    let mut v = model.drift * lambda + 0.5 * model.sigma * model.sigma * lambda * lambda;
    if let Some(c) = &model.up {
        let m = c.law.mgf(lambda);
        if m.is_infinite() {
            return f64::INFINITY;
        }
        v += c.rate * (m - 1.0);
    }
    if let Some(c) = &model.down {
        let m = c.law.mgf(-lambda);
        if m.is_infinite() {
            return f64::INFINITY;
        }
        v += c.rate * (m - 1.0);
    }
    v
}

/// Positive root `γ` of `ψ(γ) = 0`, if one exists inside the finite domain of `ψ`.
///
/// `ψ` is convex with `ψ(0) = 0`, so a positive root exists iff `E X₁ < 0`
/// and `ψ` becomes positive before the transform boundary.
pub fn cramer_root(model: &LevyModel) -> Result<Option<f64>> {
    let boundary = model.psi_abscissa();
    if !(boundary > 0.0) {
        return Err(LabError::Domain("ψ(λ) = +∞ for every λ > 0".into()));
    }
    if model.mean() >= 0.0 {
        return Ok(None);
    }
    let psi = |l: f64| psi_eval(model, l);
    let mut hi = if boundary.is_finite() {
        let at = psi(boundary);
        if at < 0.0 {
            return Ok(None);
        }
        if at == 0.0 {
            return Ok(Some(boundary));
        }
        boundary
    } else {
        let mut h = 1.0;
        while psi(h) <= 0.0 {
            h *= 2.0;
            if h > 1e12 {
                return Ok(None);
            }
        }
        h
    };
    let mut lo = 0.0;
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if psi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut root = 0.5 * (lo + hi);
    // one Newton step; kept only if it improves the residual
    let h = 1e-7 * root.max(1e-3);
    if root + h < boundary {
        let slope = (psi(root + h) - psi(root - h)) / (2.0 * h);
        if slope.is_finite() && slope > 0.0 {
            let polished = root - psi(root) / slope;
            if polished > 0.0 && polished < boundary && psi(polished).abs() < psi(root).abs() {
                root = polished;
            }
        }
    }
    Ok(Some(root))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MomentClass {
    Subcritical,
    Critical,
    Supercritical,
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentReport {
    pub alpha: f64,
    pub value: f64,
    pub classification: MomentClass,
}

/// `E e^{αX₁} = e^{ψ(α)}` with its criticality class.
pub fn exp_moment(model: &LevyModel, alpha: f64) -> Result<MomentReport> {
    if !(alpha > 0.0) {
        return Err(invalid("alpha", format!("must be positive, got {alpha}")));
    }
    let value = psi_eval(model, alpha).exp();
    let classification = if value.is_infinite() {
        MomentClass::Infinite
    } else if (value - 1.0).abs() <= CRITICALITY_TOL {
        MomentClass::Critical
    } else if value < 1.0 {
        MomentClass::Subcritical
    } else {
        MomentClass::Supercritical
    };
    Ok(MomentReport { alpha, value, classification })
}

/// Lévy-measure tail `Π̄_X^±(x)`.
pub fn pi_tail(model: &LevyModel, x: f64, side: Side) -> Result<f64> {
    if !(x > 0.0) {
        return Err(invalid("x", format!("must be positive, got {x}")));
    }
    Ok(model.component(side).map_or(0.0, |c| c.rate * c.law.survival(x)))
}

/// `ln Π̄_X^±(x)`; `-∞` when there are no jumps on that side.
pub fn ln_pi_tail(model: &LevyModel, x: f64, side: Side) -> f64 {
    model
        .component(side)
        .map_or(f64::NEG_INFINITY, |c| c.rate.ln() + c.law.ln_survival(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegularityCase {
    /// 0 regular for both half-lines.
    I,
    /// 0 irregular for `[0, ∞)`.
    II,
    /// 0 irregular for `(-∞, 0)`.
    III,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityReport {
    pub reg_up: bool,
    pub reg_down: bool,
    pub n_finite: bool,
    /// `|n̂|` under the local-time-equals-time-at-the-minimum normalisation.
    pub n_mass: Option<f64>,
    pub case: RegularityCase,
}

/// Regularity of 0 for the half-lines and finiteness of the excursion measure.
pub fn classify_path_regularity(model: &LevyModel) -> Result<RegularityReport> {
    match model.kind {
        ModelKind::BrownianDrift => Ok(RegularityReport {
            reg_up: true,
            reg_down: true,
            n_finite: false,
            n_mass: None,
            case: RegularityCase::I,
        }),
        ModelKind::CompoundPoissonDrift => {
            let c = model.drift;
            if c >= 0.0 && model.down.is_none() {
                return Err(LabError::UnsupportedModel(
                    "nondecreasing compound Poisson path: excursions above the infimum never end".into(),
                ));
            }
            if c < 0.0 {
                Ok(RegularityReport {
                    reg_up: false,
                    reg_down: true,
                    n_finite: true,
                    n_mass: Some(model.rate_up()),
                    case: RegularityCase::II,
                })
            } else {
                Ok(RegularityReport {
                    reg_up: c > 0.0,
                    reg_down: false,
                    n_finite: true,
                    n_mass: (c == 0.0).then(|| model.total_rate()),
                    case: RegularityCase::III,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cp_exp_up(rate: f64, eta: f64, drift: f64) -> LevyModel {
        LevyModel::compound_poisson(drift, Some(JumpComponent::new(rate, JumpLaw::Exponential { rate: eta })), None).unwrap()
    }

    #[test]
    fn psi_closed_forms() {
        let bm = LevyModel::brownian(-1.0, 1.0).unwrap();
        assert_eq!(psi_eval(&bm, 2.0), 0.0);
        assert_eq!(psi_eval(&bm, 0.0), 0.0);
        let mm1 = LevyModel::mm1();
        assert!((psi_eval(&mm1, 0.5) + 1.0 / 6.0).abs() < 1e-15);
        assert!((psi_eval(&LevyModel::model_c(), 1.0) + 1.0).abs() < 1e-15);
        assert!(psi_eval(&LevyModel::model_c(), 1.5).is_infinite());
    }

    #[test]
    fn cramer_roots() {
        let g = cramer_root(&LevyModel::brownian(-1.0, 1.0).unwrap()).unwrap().unwrap();
        assert!((g - 2.0).abs() < 1e-10);
        let g = cramer_root(&LevyModel::mm1()).unwrap().unwrap();
        assert!((g - 1.0).abs() < 1e-10);
        assert!(psi_eval(&LevyModel::mm1(), g).abs() <= 1e-10);
        assert_eq!(cramer_root(&LevyModel::model_c()).unwrap(), None);
        // positive mean: no root
        assert_eq!(cramer_root(&cp_exp_up(1.0, 2.0, -0.1)).unwrap(), None);
    }

    #[test]
    fn root_of_two_sided_model_matches_rational_form() {
        // zero drift, Exp(2) up / Exp(1) down, unit rates: γ = (η − μ)/2 = 1/2
        let m = LevyModel::compound_poisson(
            0.0,
            Some(JumpComponent::new(1.0, JumpLaw::Exponential { rate: 2.0 })),
            Some(JumpComponent::new(1.0, JumpLaw::Exponential { rate: 1.0 })),
        )
        .unwrap();
        let g = cramer_root(&m).unwrap().unwrap();
        assert!((g - 0.5).abs() < 1e-10);
    }

    #[test]
    fn moment_classes() {
        let c = LevyModel::model_c();
        let r = exp_moment(&c, 1.0).unwrap();
        assert_eq!(r.classification, MomentClass::Subcritical);
        assert!((r.value - (-1.0f64).exp()).abs() < 1e-14);
        assert_eq!(exp_moment(&c, 1.5).unwrap().classification, MomentClass::Infinite);
        let bm = LevyModel::brownian(-1.0, 1.0).unwrap();
        assert_eq!(exp_moment(&bm, 2.0).unwrap().classification, MomentClass::Critical);
        assert_eq!(exp_moment(&bm, 3.0).unwrap().classification, MomentClass::Supercritical);
        assert!(exp_moment(&bm, 0.0).is_err());
    }

    #[test]
    fn tails() {
        let mm1 = LevyModel::mm1();
        assert!((pi_tail(&mm1, 1.0, Side::Up).unwrap() - (-2.0f64).exp()).abs() < 1e-16);
        assert_eq!(pi_tail(&mm1, 1.0, Side::Down).unwrap(), 0.0);
        let bm = LevyModel::brownian(-1.0, 1.0).unwrap();
        assert_eq!(pi_tail(&bm, 3.0, Side::Up).unwrap(), 0.0);
        assert!(pi_tail(&mm1, 0.0, Side::Up).is_err());
    }

    #[test]
    fn regularity_table() {
        let bm = classify_path_regularity(&LevyModel::brownian(-1.0, 1.0).unwrap()).unwrap();
        assert_eq!(bm.case, RegularityCase::I);
        assert!(!bm.n_finite);
        let mm1 = classify_path_regularity(&LevyModel::mm1()).unwrap();
        assert_eq!((mm1.case, mm1.n_mass), (RegularityCase::II, Some(1.0)));
        let two = LevyModel::compound_poisson(
            0.0,
            Some(JumpComponent::new(1.0, JumpLaw::Exponential { rate: 2.0 })),
            Some(JumpComponent::new(1.0, JumpLaw::Exponential { rate: 1.0 })),
        )
        .unwrap();
        let r = classify_path_regularity(&two).unwrap();
        assert_eq!(r.case, RegularityCase::III);
        assert!(r.n_finite);
        assert!(matches!(
            classify_path_regularity(&cp_exp_up(1.0, 2.0, 0.5)),
            Err(LabError::UnsupportedModel(_))
        ));
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(LevyModel::brownian(-1.0, 0.0).is_err());
        assert!(LevyModel::compound_poisson(-1.0, None, None).is_err());
        assert!(LevyModel::compound_poisson(
            -1.0,
            Some(JumpComponent::new(0.0, JumpLaw::Exponential { rate: 1.0 })),
            None
        )
        .is_err());
    }
}
