//! Diagnostics for the classes `L^(α)` and `S^(α)`.
//!
//! All evaluations go through log-tails; a probability of `1e−300` is as
//! usable as one of `0.3`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::law::JumpLaw;
use crate::quad;

/// A positive function on `[0, x_max]` given through `x ↦ ln f(x)`.
#[derive(Clone)]
pub struct TailFunction {
    pub label: String,
    pub x_max: f64,
    pub monotone: bool,
    ln_f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for TailFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TailFunction")
            .field("label", &self.label)
            .field("x_max", &self.x_max)
            .field("monotone", &self.monotone)
            .finish()
    }
}

impl TailFunction {
    pub fn new<F>(label: impl Into<String>, x_max: f64, monotone: bool, ln_f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { label: label.into(), x_max, monotone, ln_f: Arc::new(ln_f) }
    }

    /// Survival function of a jump law.
    pub fn from_law(law: &JumpLaw) -> Self {
        let law = law.clone();
        Self::new("survival", f64::INFINITY, true, move |x| law.ln_survival(x))
    }

    pub fn ln_eval(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0 && x <= self.x_max) {
            return Err(LabError::Domain(format!("{} evaluated at {x}, domain [0, {}]", self.label, self.x_max)));
        }
        Ok((self.ln_f)(x))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.ln_eval(x).map(f64::exp)
    }
}

/// A probability law on `[lower, ∞)` with a density, seen through logs.
pub trait TailLaw {
    fn ln_survival(&self, x: f64) -> f64;
    fn ln_density(&self, x: f64) -> f64;
    fn lower(&self) -> f64 {
        0.0
    }
    /// `∫ e^{αy} G(dy)`, `+∞` when divergent.
    fn mgf(&self, alpha: f64) -> f64;
}

impl TailLaw for JumpLaw {
    fn ln_survival(&self, x: f64) -> f64 {
        JumpLaw::ln_survival(self, x)
    }
    fn ln_density(&self, x: f64) -> f64 {
        JumpLaw::ln_density(self, x)
    }
    fn mgf(&self, alpha: f64) -> f64 {
        JumpLaw::mgf(self, alpha)
    }
}

/// `G(dy) = F(dy)/F̄(c)` on `(c, ∞)`: the normalization of a Lévy-measure tail beyond a cutoff.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffLaw {
    pub law: JumpLaw,
    pub cutoff: f64,
}

impl TailLaw for CutoffLaw {
    fn ln_survival(&self, x: f64) -> f64 {
        if x <= self.cutoff {
            0.0
        } else {
            self.law.ln_survival(x) - self.law.ln_survival(self.cutoff)
        }
    }
    fn ln_density(&self, x: f64) -> f64 {
        if x < self.cutoff {
            f64::NEG_INFINITY
        } else {
            self.law.ln_density(x) - self.law.ln_survival(self.cutoff)
        }
    }
    fn lower(&self) -> f64 {
        self.cutoff
    }
    fn mgf(&self, alpha: f64) -> f64 {
        let full = self.law.mgf(alpha);
        if !full.is_finite() {
            return f64::INFINITY;
        }
        let head = quad::integrate(|y| (alpha * y).exp() * self.law.density(y), 0.0, self.cutoff, 1e-13, 0.0);
        (full - head.value) / self.law.survival(self.cutoff)
    }
}

/// `e^{αy} f(x+y)/f(x)` for every `x` in `x_band` (rows) and `y` in `y_grid` (columns).
pub fn lalpha_profile(f: &TailFunction, alpha: f64, x_band: &[f64], y_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    x_band
        .iter()
        .map(|&x| {
            let base = f.ln_eval(x)?;
            y_grid
                .iter()
                .map(|&y| Ok((alpha * y + f.ln_eval(x + y)? - base).exp()))
                .collect()
        })
        .collect()
}

/// Smallest `A` with `f(x+y)/f(x) <= A·(e^{−(α−ε)y} ∨ e^{−(α+ε)y})` on the grid pairs
/// with `x >= 1`, `y >= 1 − x`. Never below 1, the value forced at `y = 0`.
/// Pairs leaving the domain of `f` are skipped.
#[allow(non_snake_case)]
pub fn potter_min_A(f: &TailFunction, alpha: f64, epsilon: f64, x_grid: &[f64], y_grid: &[f64]) -> f64 {
    potter_sup(|x| f.ln_eval(x).ok(), alpha, epsilon, x_grid, y_grid)
}

fn potter_sup<F: Fn(f64) -> Option<f64>>(ln_f: F, alpha: f64, epsilon: f64, x_grid: &[f64], y_grid: &[f64]) -> f64 {
    let mut ln_a: f64 = 0.0;
    for &x in x_grid.iter().filter(|&&x| x >= 1.0) {
        let Some(base) = ln_f(x) else { continue };
        for &y in y_grid.iter().filter(|&&y| y >= 1.0 - x) {
            let Some(top) = ln_f(x + y) else { continue };
            let ln_bound = (-(alpha - epsilon) * y).max(-(alpha + epsilon) * y);
            ln_a = ln_a.max(top - base - ln_bound);
        }
    }
    ln_a.exp()
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, cells: usize) -> f64 {
    let h = (b - a) / cells as f64;
    let mut s = f(a) + f(b);
    for i in 1..cells {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

const CONV_REL_TOL: f64 = 1e-4;
const CONV_MAX_HALVINGS: usize = 14;

/// `P(Z₁ + Z₂ > x) / P(Z₁ > x)` for independent copies of `g`.
///
/// The convolution integral is formed from log-values scaled by `Ḡ(x)`, so
/// the ratio stays of order one however small the tail is. Simpson's rule on
/// a uniform grid is halved until the Richardson estimate moves less than
/// `1e−4` relative.
pub fn conv_ratio<G: TailLaw + ?Sized>(g: &G, x: f64, grid_step: f64) -> Result<f64> {
    let a = g.lower();
    if x < 2.0 * a {
        return Ok((-g.ln_survival(x)).exp());
    }
    if !(grid_step > 0.0) {
        return Err(crate::error::invalid("grid_step", "must be positive"));
    }
    let ln_tail = g.ln_survival(x);
    let middle = if a > 0.0 { (g.ln_survival(x - a) - ln_tail).exp() - 1.0 } else { 0.0 };
    let (lo, hi) = (a, x - a);
    if hi <= lo {
        return Ok(1.0 + middle);
    }
    let integrand = |y: f64| (g.ln_density(y) + g.ln_survival(x - y) - ln_tail).exp();
    let mut cells = (((hi - lo) / grid_step).ceil() as usize).max(2);
    cells += cells % 2;
    let mut prev = simpson(&integrand, lo, hi, cells);
    let mut prev_extrapolated = f64::NAN;
    for _ in 0..CONV_MAX_HALVINGS {
        cells *= 2;
        let next = simpson(&integrand, lo, hi, cells);
        let extrapolated = next + (next - prev) / 15.0;
        let scale = 1.0 + middle + extrapolated.abs();
        if (next - prev).abs() < CONV_REL_TOL * scale
            || (extrapolated - prev_extrapolated).abs() < CONV_REL_TOL * scale
        {
            return Ok(1.0 + middle + extrapolated);
        }
        prev = next;
        prev_extrapolated = extrapolated;
    }
    Err(LabError::Step(format!("convolution tail at x={x} did not settle after {CONV_MAX_HALVINGS} halvings")))
}

/// `ln P(Z₁ + Z₂ > x)`.
pub fn ln_conv_tail<G: TailLaw + ?Sized>(g: &G, x: f64, grid_step: f64) -> Result<f64> {
    if x < 2.0 * g.lower() {
        return Ok(0.0);
    }
    Ok(g.ln_survival(x) + conv_ratio(g, x, grid_step)?.ln())
}

/// `P(Z₁ + Z₂ > x)`.
pub fn conv_tail<G: TailLaw + ?Sized>(g: &G, x: f64, grid_step: f64) -> Result<f64> {
    ln_conv_tail(g, x, grid_step).map(f64::exp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Member,
    NonMember,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvProbe {
    pub x: f64,
    pub ln_tail: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub alpha: f64,
    pub alpha_hat: f64,
    pub max_profile_dev: f64,
    pub potter_a: Option<f64>,
    pub s_alpha_limit: Option<f64>,
    pub mgf_integral: f64,
    pub verdict: Verdict,
    pub reason: String,
    pub probes: Vec<ConvProbe>,
}

/// Relative tolerance for matching the convolution limit to `2∫e^{αy}G(dy)`.
pub const SALPHA_TOL: f64 = 0.05;
const PROFILE_Y: [f64; 4] = [0.5, 1.0, 2.0, 5.0];
const PROFILE_DEV_MAX: f64 = 0.5;
const CONV_STEP: f64 = 0.05;

/// Probes `Ḡ∗Ḡ/Ḡ` along `x_probe` (ascending, at least two points) and compares the
/// limit, extrapolated linearly in `1/x` from the last two probes, with `2∫e^{αy}G(dy)`.
pub fn salpha_check<G: TailLaw + ?Sized>(g: &G, alpha: f64, x_probe: &[f64]) -> ClassReport {
    let mgf = g.mgf(alpha);
    let probes: Vec<ConvProbe> = x_probe
        .iter()
        .map(|&x| ConvProbe {
            x,
            ln_tail: g.ln_survival(x),
            ratio: conv_ratio(g, x, CONV_STEP).unwrap_or(f64::NAN),
        })
        .collect();

    let x_last = x_probe.last().copied().unwrap_or(f64::NAN);
    let max_profile_dev = PROFILE_Y
        .iter()
        .map(|&y| (alpha * y + g.ln_survival(x_last + y) - g.ln_survival(x_last)).exp() - 1.0)
        .fold(0.0_f64, |m, d| m.max(d.abs()));

    let alpha_hat = match probes.as_slice() {
        [.., p1, p2] => -(p2.ln_tail - p1.ln_tail) / (p2.x - p1.x),
        _ => f64::NAN,
    };

    let s_alpha_limit = match probes.as_slice() {
        [.., p1, p2] if p1.ratio.is_finite() && p2.ratio.is_finite() => {
            Some((p2.x * p2.ratio - p1.x * p1.ratio) / (p2.x - p1.x))
        }
        _ => None,
    };

    let potter_a = if x_last.is_finite() && x_last >= 1.0 {
        let xs: Vec<f64> = (0..=40).map(|i| 1.0 + (x_last - 1.0) * i as f64 / 40.0).collect();
        let ys: Vec<f64> = (-40..=40).map(|i| i as f64 * (x_last / 40.0)).collect();
        Some(potter_sup(|x| Some(g.ln_survival(x)), alpha, 0.5 * alpha, &xs, &ys))
    } else {
        None
    };

    let (verdict, reason) = if !mgf.is_finite() {
        (Verdict::NonMember, format!("∫e^{{αy}}G(dy) diverges at α={alpha}"))
    } else if !(max_profile_dev <= PROFILE_DEV_MAX) {
        (
            Verdict::NonMember,
            format!("e^{{αy}}Ḡ(x+y)/Ḡ(x) deviates from 1 by {max_profile_dev:.3} at x={x_last}: not in L^(α)"),
        )
    } else {
        match s_alpha_limit {
            None => (Verdict::Inconclusive, "convolution ratio unavailable".to_string()),
            Some(l) => {
                let rel = (l - 2.0 * mgf).abs() / (2.0 * mgf);
                if rel < SALPHA_TOL {
                    (Verdict::Member, format!("limit {l:.6} within {rel:.4} of 2∫e^{{αy}}G(dy) = {:.6}", 2.0 * mgf))
                } else {
                    let last = &probes[probes.len() - 1];
                    let prev = &probes[probes.len() - 2];
                    if (last.ratio - prev.ratio).abs() / last.ratio > SALPHA_TOL {
                        (Verdict::Inconclusive, format!("ratio still moving: {:.6} -> {:.6}", prev.ratio, last.ratio))
                    } else {
                        (Verdict::NonMember, format!("ratio settles at {l:.6}, not 2∫e^{{αy}}G(dy) = {:.6}", 2.0 * mgf))
                    }
                }
            }
        }
    };

    ClassReport {
        alpha,
        alpha_hat,
        max_profile_dev,
        potter_a,
        s_alpha_limit,
        mgf_integral: mgf,
        verdict,
        reason,
        probes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(ln_f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> TailFunction {
        TailFunction::new("t", f64::INFINITY, true, ln_f)
    }

    #[test]
    fn exponential_profile_is_flat() {
        let p = lalpha_profile(&tf(|x| -x), 1.0, &[1.0, 10.0, 100.0], &[0.5, 3.0]).unwrap();
        assert!(p.iter().flatten().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn tilted_pareto_profile_value() {
        let f = tf(|x| -x - 2.0 * x.ln_1p());
        let p = lalpha_profile(&f, 1.0, &[50.0], &[5.0]).unwrap();
        assert!((p[0][0] - (51.0_f64 / 56.0).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let f = TailFunction::new("t", 10.0, true, |x| -x);
        assert!(matches!(lalpha_profile(&f, 1.0, &[8.0], &[3.0]), Err(LabError::Domain(_))));
    }

    #[test]
    fn gaussian_profile_vanishes() {
        let p = lalpha_profile(&tf(|x| -x * x), 1.0, &[5.0, 10.0, 20.0], &[1.0]).unwrap();
        assert!(p[2][0] < p[1][0] && p[1][0] < p[0][0] && p[2][0] < 1e-15);
    }

    #[test]
    fn potter_constant_for_exponential_is_one() {
        let xs: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let ys: Vec<f64> = (-60..=60).map(|i| i as f64 * 0.5).collect();
        let a = potter_min_A(&tf(|x| -x), 1.0, 0.5, &xs, &ys);
        assert!((a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn potter_constant_for_gaussian_grows() {
        let f = tf(|x| -x * x);
        let ys: Vec<f64> = (-100..=100).map(|i| i as f64 * 0.5).collect();
        let grid = |n: usize| (1..=n).map(|i| i as f64).collect::<Vec<_>>();
        let a10 = potter_min_A(&f, 1.0, 0.5, &grid(10), &ys);
        let a20 = potter_min_A(&f, 1.0, 0.5, &grid(20), &ys);
        assert!(a20 > 1e10 * a10);
    }

    #[test]
    fn gamma_two_tail() {
        let g = JumpLaw::exponential(1.0).unwrap();
        let v = conv_tail(&g, 3.0, 0.1).unwrap();
        assert!((v - 4.0 * (-3.0_f64).exp()).abs() / v < 1e-10);
        assert_eq!(conv_tail(&g, 0.0, 0.1).unwrap(), 1.0);
        // Exp(2): P(Z1+Z2 > x) = (1+2x)e^{-2x}
        let g = JumpLaw::exponential(2.0).unwrap();
        let v = ln_conv_tail(&g, 30.0, 0.1).unwrap();
        assert!((v - (61.0_f64.ln() - 60.0)).abs() < 1e-6);
    }

    #[test]
    fn far_tail_keeps_relative_accuracy() {
        let g = JumpLaw::exponential(1.0).unwrap();
        let ln_v = ln_conv_tail(&g, 60.0, 0.1).unwrap();
        assert!((ln_v - (61.0_f64.ln() - 60.0)).abs() < 1e-4);
    }

    #[test]
    fn cutoff_law_of_exponential_is_shifted_exponential() {
        let g = CutoffLaw { law: JumpLaw::exponential(1.0).unwrap(), cutoff: 1.0 };
        // Z = 1 + E, so Z1 + Z2 = 2 + Gamma(2, 1)
        let v = conv_tail(&g, 5.0, 0.05).unwrap();
        assert!((v - 4.0 * (-3.0_f64).exp()).abs() / v < 1e-6);
        assert!((g.mgf(0.5) - 0.5_f64.exp() * 2.0).abs() < 1e-9);
        assert_eq!(conv_tail(&g, 1.5, 0.05).unwrap(), 1.0);
    }

    #[test]
    fn verdicts() {
        let tp = JumpLaw::tilted_pareto(1.0, 2.0).unwrap();
        let r = salpha_check(&tp, 1.0, &[20.0, 40.0, 80.0]);
        assert_eq!(r.verdict, Verdict::Member, "{}", r.reason);
        assert!((r.mgf_integral - 2.0).abs() < 1e-12);

        let e2 = JumpLaw::exponential(2.0).unwrap();
        assert_eq!(salpha_check(&e2, 1.0, &[20.0, 40.0, 80.0]).verdict, Verdict::NonMember);

        let e1 = JumpLaw::exponential(1.0).unwrap();
        let r = salpha_check(&e1, 1.0, &[20.0, 40.0]);
        assert_eq!(r.verdict, Verdict::NonMember);
        assert!(r.mgf_integral.is_infinite());
    }
}
