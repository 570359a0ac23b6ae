//! Jump-size laws on `(0, ∞)`.
//!
//! Every law is described through its log-survival function so that far-tail
//! evaluations never round to zero.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::quad;

const QUAD_REL: f64 = 1e-13;

/// Piecewise log-linear survival function through `(x_i, ln S(x_i))`.
///
/// The first node is `(0, 0)`; beyond the last node the final slope is
/// extended, so it must be strictly negative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabulatedLaw {
    x: Vec<f64>,
    ln_s: Vec<f64>,
    // -d ln S / dx on each segment, the last entry doubling as the extrapolation rate
    slopes: Vec<f64>,
}

impl TabulatedLaw {
    pub fn new(x: Vec<f64>, ln_s: Vec<f64>) -> Result<Self> {
        if x.len() != ln_s.len() || x.len() < 2 {
            return Err(invalid("tabulated", "need at least two (x, ln S) nodes of equal length"));
        }
        if x[0] != 0.0 || ln_s[0] != 0.0 {
            return Err(invalid("tabulated", "first node must be (0, 0)"));
        }
        let mut slopes = Vec::with_capacity(x.len() - 1);
        for i in 0..x.len() - 1 {
            let dx = x[i + 1] - x[i];
            if !(dx > 0.0) || !dx.is_finite() {
                return Err(invalid("tabulated", "abscissae must be strictly increasing"));
            }
            let s = -(ln_s[i + 1] - ln_s[i]) / dx;
            if !(s >= 0.0) || !s.is_finite() {
                return Err(invalid("tabulated", "log-survival must be nonincreasing and finite"));
            }
            slopes.push(s);
        }
        if !(*slopes.last().unwrap() > 0.0) {
            return Err(invalid("tabulated", "last segment must decay so that S(x) -> 0"));
        }
        Ok(Self { x, ln_s, slopes })
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.iter().copied().zip(self.ln_s.iter().copied())
    }

    fn segment(&self, x: f64) -> usize {
        let idx = self.x.partition_point(|&v| v <= x);
        (idx.max(1) - 1).min(self.slopes.len() - 1)
    }

    fn ln_survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let i = self.segment(x);
        self.ln_s[i] - self.slopes[i] * (x - self.x[i])
    }

    fn last_rate(&self) -> f64 {
        *self.slopes.last().unwrap()
    }

    fn min_rate_beyond(&self, x: f64) -> f64 {
        let i = if x <= 0.0 { 0 } else { self.segment(x) };
        self.slopes[i..].iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// ∫ e^{λ u} S(u) du over `[from, ∞)`, `None` when divergent.
    fn weighted_tail(&self, lambda: f64, from: f64) -> Option<f64> {
        if lambda >= self.last_rate() {
            return None;
        }
        let n = self.slopes.len();
        let first = self.segment(from.max(0.0));
        let mut acc = 0.0;
        for i in first..n {
            let a = if i == first { from.max(self.x[i]) } else { self.x[i] };
            let k = lambda - self.slopes[i];
            let base = (lambda * a + self.ln_survival(a)).exp();
            if i + 1 < n {
                let len = self.x[i + 1] - a;
                if len <= 0.0 {
                    continue;
                }
                acc += base * if k.abs() < 1e-300 { len } else { (k * len).exp_m1() / k };
            } else {
                acc += base / -k;
            }
        }
        Some(acc)
    }
}

/// Law of a jump size, supported on `(0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum JumpLaw {
    /// `S(x) = e^{-rate·x}`.
    Exponential { rate: f64 },
    /// `S(x) = e^{-alpha·x} (1+x)^{-rho}`.
    TiltedPareto { alpha: f64, rho: f64 },
    Tabulated(TabulatedLaw),
}

impl JumpLaw {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(invalid("rate", format!("exponential rate must be positive, got {rate}")));
        }
        Ok(Self::Exponential { rate })
    }

    pub fn tilted_pareto(alpha: f64, rho: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be positive, got {alpha}")));
        }
        if !(rho > 1.0 && rho.is_finite()) {
            return Err(invalid("rho", format!("must exceed 1, got {rho}")));
        }
        Ok(Self::TiltedPareto { alpha, rho })
    }

    pub fn tabulated(x: Vec<f64>, ln_s: Vec<f64>) -> Result<Self> {
        TabulatedLaw::new(x, ln_s).map(Self::Tabulated)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Exponential { rate } => Self::exponential(*rate).map(|_| ()),
            Self::TiltedPareto { alpha, rho } => Self::tilted_pareto(*alpha, *rho).map(|_| ()),
            Self::Tabulated(t) => TabulatedLaw::new(t.x.clone(), t.ln_s.clone()).map(|_| ()),
        }
    }

    pub fn ln_survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            Self::Exponential { rate } => -rate * x,
            Self::TiltedPareto { alpha, rho } => -alpha * x - rho * x.ln_1p(),
            Self::Tabulated(t) => t.ln_survival(x),
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        self.ln_survival(x).exp()
    }

    /// Density `-S'(x)` (right derivative at tabulation nodes).
    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            Self::Exponential { rate } => rate * (-rate * x).exp(),
            Self::TiltedPareto { alpha, rho } => self.survival(x) * (alpha + rho / (1.0 + x)),
            Self::Tabulated(t) => t.slopes[t.segment(x)] * t.ln_survival(x).exp(),
        }
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        match self {
            Self::Exponential { rate } => rate.ln() - rate * x,
            Self::TiltedPareto { alpha, rho } => self.ln_survival(x) + (alpha + rho / (1.0 + x)).ln(),
            Self::Tabulated(t) => t.slopes[t.segment(x)].ln() + t.ln_survival(x),
        }
    }

    /// `∫_x^∞ S(u) du`.
    pub fn tail_integral(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            Self::Exponential { rate } => (-rate * x).exp() / rate,
            Self::TiltedPareto { .. } => {
                quad::integrate_to_infinity(|u| self.survival(u), x, QUAD_REL, 0.0).value
            }
            Self::Tabulated(t) => t.weighted_tail(0.0, x).unwrap_or(f64::INFINITY),
        }
    }

    /// `∫_a^b S(u) du` for `0 <= a <= b`.
    pub fn survival_integral(&self, a: f64, b: f64) -> f64 {
        match self {
            Self::TiltedPareto { .. } => quad::integrate(|u| self.survival(u), a, b, QUAD_REL, 0.0).value,
            _ => self.tail_integral(a) - self.tail_integral(b),
        }
    }

    pub fn mean(&self) -> f64 {
        self.tail_integral(0.0)
    }

    /// Supremum of `{λ : E e^{λJ} < ∞}`.
    pub fn mgf_abscissa(&self) -> f64 {
        match self {
            Self::Exponential { rate } => *rate,
            Self::TiltedPareto { alpha, .. } => *alpha,
            Self::Tabulated(t) => t.last_rate(),
        }
    }

    /// `S(x+y) <= S(x) e^{-r y}` holds for all `y >= 0` with the returned `r`.
    pub fn decay_rate_beyond(&self, x: f64) -> f64 {
        match self {
            Self::Exponential { rate } => *rate,
            Self::TiltedPareto { alpha, .. } => *alpha,
            Self::Tabulated(t) => t.min_rate_beyond(x),
        }
    }

    /// `E e^{λJ}`, or `+∞` when the transform diverges.
    pub fn mgf(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 1.0;
        }
        match self {
            Self::Exponential { rate } => {
                if lambda < *rate {
                    rate / (rate - lambda)
                } else {
                    f64::INFINITY
                }
            }
            Self::TiltedPareto { alpha, rho } => {
                if lambda > *alpha {
                    f64::INFINITY
                } else if lambda == *alpha {
                    1.0 + alpha / (rho - 1.0)
                } else {
                    let s = alpha - lambda;
                    let q = quad::integrate_to_infinity(
                        |y| (-s * y - rho * y.ln_1p()).exp(),
                        0.0,
                        QUAD_REL,
                        0.0,
                    );
                    1.0 + lambda * q.value
                }
            }
            Self::Tabulated(t) => match t.weighted_tail(lambda, 0.0) {
                Some(v) => 1.0 + lambda * v,
                None => f64::INFINITY,
            },
        }
    }

    /// Sampler for the law exponentially tilted by `e^{tilt·y}` (`tilt = 0` is the law itself).
    pub fn sampler(&self, tilt: f64) -> Result<JumpSampler> {
        if tilt >= self.mgf_abscissa() {
            return Err(invalid("tilt", format!("tilt {tilt} outside the transform domain")));
        }
        Ok(match self {
            Self::Exponential { rate } => JumpSampler::Exponential { rate: rate - tilt },
            Self::TiltedPareto { alpha, rho } if tilt == 0.0 => {
                JumpSampler::MinExpLomax { alpha: *alpha, rho: *rho }
            }
            Self::TiltedPareto { alpha, rho } => JumpSampler::TiltedParetoRejection {
                theta: alpha - tilt,
                alpha: *alpha,
                rho: *rho,
            },
            Self::Tabulated(t) => JumpSampler::piecewise(t, tilt),
        })
    }
}

/// Prepared sampler; see [`JumpLaw::sampler`].
#[derive(Debug, Clone)]
pub enum JumpSampler {
    Exponential { rate: f64 },
    /// min of independent `Exp(alpha)` and `Lomax(rho)` has survival `e^{-αx}(1+x)^{-ρ}`.
    MinExpLomax { alpha: f64, rho: f64 },
    /// Proposal `Exp(theta)`, acceptance `(1+y)^{-ρ}(α + ρ/(1+y)) / (α+ρ)`.
    TiltedParetoRejection { theta: f64, alpha: f64, rho: f64 },
    Piecewise {
        starts: Vec<f64>,
        lengths: Vec<f64>,
        rates: Vec<f64>,
        cumulative: Vec<f64>,
    },
}

impl JumpSampler {
    fn piecewise(t: &TabulatedLaw, tilt: f64) -> Self {
        let n = t.slopes.len();
        let mut starts = Vec::with_capacity(n);
        let mut lengths = Vec::with_capacity(n);
        let mut rates = Vec::with_capacity(n);
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = 0.0;
        for i in 0..n {
            let a = t.x[i];
            let s = t.slopes[i];
            // density on the segment is ∝ e^{-(s - tilt) u}, u measured from its start
            let k = s - tilt;
            let base = s * (tilt * a + t.ln_s[i]).exp();
            let (len, mass) = if i + 1 < n {
                let len = t.x[i + 1] - a;
                let mass = if k.abs() < 1e-300 { len } else { -(-k * len).exp_m1() / k };
                (len, base * mass)
            } else {
                (f64::INFINITY, base / k)
            };
            acc += mass;
            starts.push(a);
            lengths.push(len);
            rates.push(k);
            cumulative.push(acc);
        }
        JumpSampler::Piecewise { starts, lengths, rates, cumulative }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            Self::MinExpLomax { alpha, rho } => {
                let e: f64 = Exp1.sample(rng);
                let u: f64 = Open01.sample(rng);
                (e / alpha).min(u.powf(-1.0 / rho) - 1.0)
            }
            Self::TiltedParetoRejection { theta, alpha, rho } => loop {
                let e: f64 = Exp1.sample(rng);
                let y = e / theta;
                let u: f64 = rng.gen();
                let accept = (-rho * y.ln_1p()).exp() * (alpha + rho / (1.0 + y)) / (alpha + rho);
                if u < accept {
                    break y;
                }
            },
            Self::Piecewise { starts, lengths, rates, cumulative } => {
                let total = *cumulative.last().unwrap();
                let target = rng.gen::<f64>() * total;
                let i = cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1);
                let k = rates[i];
                let len = lengths[i];
                let u: f64 = Open01.sample(rng);
                let offset = if len.is_infinite() {
                    -u.ln() / k
                } else if k.abs() < 1e-300 {
                    u * len
                } else {
                    // inverse of the truncated exponential on [0, len]
                    -(u * (-k * len).exp_m1()).ln_1p() / k
                };
                starts[i] + offset.min(len)
            }
        }
    }
}
