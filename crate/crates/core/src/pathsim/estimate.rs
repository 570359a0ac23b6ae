//! Monte Carlo estimators built on the exact simulator.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Closed, ExcursionTracker, StepSampler};
use crate::error::{LabError, Result};
use crate::ladder::{kappa_eval, wh_factorize, FirstPassageTable};
use crate::model::{classify_path_regularity, cramer_root, LevyModel, ModelKind, RegularityCase};
use crate::rng::{map_chunks, stream, LabRng, Moments};

const PATHS_PER_CHUNK: u64 = 1 << 14;
const CHUNK_TIME: f64 = 5_000.0;
/// Kill level `B` is the first multiple of this step with `P(τ_{x+B}<∞) <= KILL_REL·P(τ_x<∞)`.
const KILL_REL: f64 = 1e-12;
const KILL_STEP: f64 = 0.25;
const EXCURSION_STREAM_BASE: u64 = 1 << 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Crude,
    Tilted,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Crude => "crude",
            Self::Tilted => "tilted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: u64,
    pub seed: u64,
    pub method: Method,
}

impl McEstimate {
    fn from_moments(m: &Moments, seed: u64, method: Method) -> Self {
        Self { value: m.mean(), std_error: m.std_error(), n: m.n, seed, method }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstPassageEstimate {
    pub estimate: McEstimate,
    /// Paths neither absorbed nor killed within the step cap, scored 0.
    pub censored: u64,
    /// Paths are killed below `−kill_level` (crude only).
    pub kill_level: Option<f64>,
    /// Upper bound on the downward bias from killing and censoring.
    pub bias_bound: f64,
}

fn walk_sampler(model: &LevyModel, tilt: f64) -> Result<StepSampler> {
    if model.kind != ModelKind::CompoundPoissonDrift {
        return Err(LabError::UnsupportedModel(
            "Brownian first passage is available in closed form only".into(),
        ));
    }
    if model.drift > 0.0 {
        return Err(LabError::UnsupportedModel(
            "positive drift: the supremum is not attained at jump epochs".into(),
        ));
    }
    StepSampler::new(model, tilt)
}

fn step_cap(model: &LevyModel, sampler: &StepSampler, span: f64) -> u64 {
    let mean_step = (model.mean() / sampler.rate).abs();
    10_000 + (1_000.0 * span / mean_step).min(1e9) as u64
}

/// Passage table reaching far enough that killing at `−B` below 0 costs at most
/// `1e−12` of `P(τ_x < ∞)`; returns the table and `B`.
pub fn kill_level(model: &LevyModel, x: f64) -> Result<(FirstPassageTable, f64)> {
    let mut span = 32.0;
    for _ in 0..4 {
        let table = FirstPassageTable::new(model, x + span)?;
        let ln_target = table.ln_eval(x)? + KILL_REL.ln();
        let mut b = KILL_STEP;
        while x + b <= table.x_max() {
            if table.ln_eval(x + b)? <= ln_target {
                return Ok((table, b));
            }
            b += KILL_STEP;
        }
        span *= 2.0;
    }
    Err(LabError::Truncation(format!("no kill level within {span} above x={x}")))
}

fn chunked<T, F>(n: u64, per_path: F) -> Vec<T>
where
    T: Default + Send,
    F: Fn(&mut T, u64) + Sync + Send,
{
    let chunks = n.div_ceil(PATHS_PER_CHUNK) as usize;
    map_chunks(chunks, |c| {
        let lo = c as u64 * PATHS_PER_CHUNK;
        let hi = (lo + PATHS_PER_CHUNK).min(n);
        let mut acc = T::default();
        for i in lo..hi {
            per_path(&mut acc, i);
        }
        acc
    })
}

fn merged(parts: &[Moments]) -> Moments {
    let mut total = Moments::default();
    for p in parts {
        total.merge(p);
    }
    total
}

/// `P(τ_x < ∞)` by simulation of the jump-epoch skeleton.
///
/// `Crude` kills paths below `−B` (see [`kill_level`]); `Tilted` runs the path
/// under the Cramér-tilted law, where it drifts upward, and scores `e^{−γX_{τ_x}}`.
pub fn estimate_first_passage(
    model: &LevyModel,
    x: f64,
    n: u64,
    seed: u64,
    method: Method,
) -> Result<FirstPassageEstimate> {
    if !(x >= 0.0) || n == 0 {
        return Err(crate::error::invalid("x/n", "need x >= 0 and n > 0"));
    }
    if !(model.mean() < 0.0) {
        return Err(LabError::UnsupportedModel("X does not drift to −∞".into()));
    }
    match method {
        Method::Crude => {
            let sampler = walk_sampler(model, 0.0)?;
            let (table, b) = kill_level(model, x)?;
            let cap = step_cap(model, &sampler, x + b);
            let parts = chunked(n, |acc: &mut (Moments, u64), i| {
                let mut rng = stream(seed, i);
                let mut s = 0.0;
                for _ in 0..cap {
                    let (dt, j) = sampler.step(&mut rng);
                    s += sampler.slope * dt + j;
                    if s > x {
                        acc.0.push(1.0);
                        return;
                    }
                    if s < -b {
                        acc.0.push(0.0);
                        return;
                    }
                }
                acc.0.push(0.0);
                acc.1 += 1;
            });
            let m = merged(&parts.iter().map(|p| p.0).collect::<Vec<_>>());
            let censored: u64 = parts.iter().map(|p| p.1).sum();
            Ok(FirstPassageEstimate {
                estimate: McEstimate::from_moments(&m, seed, method),
                censored,
                kill_level: Some(b),
                bias_bound: table.eval(x + b)? + censored as f64 / n as f64,
            })
        }
        Method::Tilted => {
            let gamma = cramer_root(model)?
                .ok_or_else(|| LabError::MethodUnavailable("no Cramér root: tilted estimator undefined".into()))?;
            let sampler = walk_sampler(model, gamma)?;
            let tilted_mean = (sampler.slope + tilted_jump_mean(model, gamma)) / sampler.rate;
            let cap = 10_000 + (1_000.0 * (x + 1.0) / tilted_mean.abs()).min(1e9) as u64;
            let parts = chunked(n, |acc: &mut (Moments, u64), i| {
                let mut rng = stream(seed, i);
                let mut s = 0.0;
                for _ in 0..cap {
                    let (dt, j) = sampler.step(&mut rng);
                    s += sampler.slope * dt + j;
                    if s > x {
                        acc.0.push((-gamma * s).exp());
                        return;
                    }
                }
                acc.0.push(0.0);
                acc.1 += 1;
            });
            let m = merged(&parts.iter().map(|p| p.0).collect::<Vec<_>>());
            let censored: u64 = parts.iter().map(|p| p.1).sum();
            Ok(FirstPassageEstimate {
                estimate: McEstimate::from_moments(&m, seed, method),
                censored,
                kill_level: None,
                bias_bound: censored as f64 / n as f64 * (-gamma * x).exp(),
            })
        }
    }
}

/// `ψ'(γ) − drift`: jump part of the mean rate under the tilt.
fn tilted_jump_mean(model: &LevyModel, gamma: f64) -> f64 {
    let h = 1e-6 * gamma.max(1e-3);
    let psi = |l: f64| crate::model::psi_eval(model, l);
    (psi(gamma + h) - psi(gamma - h)) / (2.0 * h) - model.drift
}

/// Excursion-measure tail estimated from the counting clock.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcursionTail {
    /// `n̂(h > x)` estimated as `#{complete excursions with h > x} / local time`.
    pub rows: Vec<(f64, McEstimate)>,
    /// `|n̂|`: every excursion, trivial ones included, per unit local time.
    pub mass: McEstimate,
    pub local_time: f64,
    pub total_time: f64,
    pub excursions: u64,
    /// Excursions still open after the continuation cap (dropped).
    pub censored: u64,
}

struct ChunkCounts {
    local_time: f64,
    total: u64,
    above: Vec<u64>,
    censored: u64,
}

fn run_excursion_chunk(sampler: &StepSampler, horizon: f64, x_grid: &[f64], rng: &mut LabRng) -> ChunkCounts {
    let mut tracker = ExcursionTracker::new(sampler.slope);
    let mut out = ChunkCounts { local_time: 0.0, total: 0, above: vec![0; x_grid.len()], censored: 0 };
    let record = |c: Closed, out: &mut ChunkCounts| match c {
        Closed::Nothing => {}
        Closed::Trivial(_) => out.total += 1,
        Closed::Excursion(r) => {
            out.total += 1;
            for (k, &x) in x_grid.iter().enumerate() {
                if r.height > x {
                    out.above[k] += 1;
                }
            }
        }
    };
    let mut t = 0.0;
    loop {
        let (dt, j) = sampler.step(rng);
        t += dt;
        if t > horizon {
            break;
        }
        let (a, b) = tracker.push(t, j);
        record(a, &mut out);
        record(b, &mut out);
    }
    let (closed, _) = tracker.finish(horizon);
    if let Some(r) = closed {
        record(Closed::Excursion(r), &mut out);
    }
    out.local_time = tracker.local_time;
    // the excursion straddling the horizon is run to completion; the local-time
    // clock stops at its start, which is a stopping time
    if tracker.is_open() {
        let mut t = horizon;
        let closed = (0..10_000_000u64).find_map(|_| {
            let (dt, j) = sampler.step(rng);
            t += dt;
            match tracker.push(t, j) {
                (Closed::Excursion(r), _) | (_, Closed::Excursion(r)) => Some(r),
                _ => None,
            }
        });
        match closed {
            Some(r) => record(Closed::Excursion(r), &mut out),
            None => out.censored += 1,
        }
    }
    out
}

/// `n̂(h > x)` on `x_grid` from `total_time` units of simulated path.
pub fn estimate_excursion_tail(model: &LevyModel, x_grid: &[f64], total_time: f64, seed: u64) -> Result<ExcursionTail> {
    let reg = classify_path_regularity(model)?;
    if reg.case == RegularityCase::I || !reg.n_finite {
        return Err(LabError::UnsupportedModel("Case I: the excursion measure is infinite".into()));
    }
    if model.drift > 0.0 {
        return Err(LabError::UnsupportedModel(
            "positive drift: no time is spent at the infimum".into(),
        ));
    }
    if !(total_time > 0.0 && total_time.is_finite()) {
        return Err(crate::error::invalid("total_time", "must be positive and finite"));
    }
    let sampler = StepSampler::new(model, 0.0)?;
    let chunks = (total_time / CHUNK_TIME).ceil().max(1.0) as usize;
    let horizon = total_time / chunks as f64;
    let parts = map_chunks(chunks, |c| {
        let mut rng = stream(seed, EXCURSION_STREAM_BASE + c as u64);
        run_excursion_chunk(&sampler, horizon, x_grid, &mut rng)
    });
    let mut local = crate::rng::KahanSum::default();
    let (mut total, mut censored) = (0u64, 0u64);
    let mut above = vec![0u64; x_grid.len()];
    for p in &parts {
        local.add(p.local_time);
        total += p.total;
        censored += p.censored;
        for (a, b) in above.iter_mut().zip(&p.above) {
            *a += b;
        }
    }
    let ell = local.value();
    let rate = |k: u64| McEstimate {
        value: k as f64 / ell,
        std_error: (k as f64).sqrt() / ell,
        n: total,
        seed,
        method: Method::Crude,
    };
    Ok(ExcursionTail {
        rows: x_grid.iter().zip(&above).map(|(&x, &k)| (x, rate(k))).collect(),
        mass: rate(total),
        local_time: ell,
        total_time,
        excursions: total,
        censored,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityBReport {
    pub x: f64,
    pub n: u64,
    /// Mean of `1{τ_x<∞} − 1{h₁>x} − 1{h₁≤x}P(τ_{x+|S_T̂₁|}<∞)` over its standard error.
    pub residual: f64,
    pub mean: f64,
    pub std_error: f64,
    pub lhs: f64,
    pub first_term: f64,
    pub second_term: f64,
    pub censored: u64,
}

/// Checks `P(τ_x<∞) = P(h₁>x) + E[1{h₁≤x} P(τ_{x+|S_T̂₁|}<∞)]` on the random walk
/// `S_n = X_{T_n}` of post-jump values, all three terms from one sample.
pub fn identity_b_check(model: &LevyModel, x: f64, n: u64, seed: u64) -> Result<IdentityBReport> {
    if !(x >= 0.0) || n < 2 {
        return Err(crate::error::invalid("x/n", "need x >= 0 and n >= 2"));
    }
    if !(model.mean() < 0.0) {
        return Err(LabError::UnsupportedModel("X does not drift to −∞ (q = 0)".into()));
    }
    let sampler = walk_sampler(model, 0.0)?;
    let (table, b) = kill_level(model, x)?;
    let pk = |y: f64| table.eval(y).unwrap_or(0.0);
    let cap = step_cap(model, &sampler, x + b);
    #[derive(Default)]
    struct Acc {
        y: Moments,
        a: Moments,
        b: Moments,
        c: Moments,
        censored: u64,
    }
    let parts = chunked(n, |acc: &mut Acc, i| {
        let mut rng = stream(seed, i);
        match identity_b_sample(&sampler, x, b, cap, &pk, &mut rng) {
            Some((ai, bi, ci)) => {
                acc.y.push(ai - bi - ci);
                acc.a.push(ai);
                acc.b.push(bi);
                acc.c.push(ci);
            }
            None => acc.censored += 1,
        }
    });
    let pick = |f: fn(&Acc) -> Moments| merged(&parts.iter().map(f).collect::<Vec<_>>());
    let (y, a, bb, cc) = (pick(|p| p.y), pick(|p| p.a), pick(|p| p.b), pick(|p| p.c));
    let se = y.std_error();
    let mean = y.mean();
    Ok(IdentityBReport {
        x,
        n,
        residual: if se > 0.0 { mean / se } else { 0.0 },
        mean,
        std_error: se,
        lhs: a.mean(),
        first_term: bb.mean(),
        second_term: cc.mean(),
        censored: parts.iter().map(|p| p.censored).sum(),
    })
}

fn identity_b_sample(
    sampler: &StepSampler,
    x: f64,
    b: f64,
    cap: u64,
    pk: &dyn Fn(f64) -> f64,
    rng: &mut LabRng,
) -> Option<(f64, f64, f64)> {
    let mut s = 0.0_f64;
    let mut h = 0.0_f64;
    let mut steps = 0u64;
    // up to the first strict descending ladder epoch
    while s >= 0.0 {
        if steps == cap {
            return None;
        }
        let (dt, j) = sampler.step(rng);
        s += sampler.slope * dt + j;
        h = h.max(s);
        steps += 1;
    }
    if h > x {
        return Some((1.0, 1.0, 0.0));
    }
    let c = pk(x - s);
    while steps < cap {
        if s < -b {
            return Some((0.0, 0.0, c));
        }
        let (dt, j) = sampler.step(rng);
        s += sampler.slope * dt + j;
        if s > x {
            return Some((1.0, 0.0, c));
        }
        steps += 1;
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem1Row {
    pub x: f64,
    pub n_hat: McEstimate,
    pub first_passage: f64,
    pub ratio: f64,
    pub ratio_se: f64,
    pub target: f64,
    /// `(ratio − target)/ratio_se`.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Table {
    pub alpha: f64,
    pub target: f64,
    pub n_mass: f64,
    /// Simulated `|n̂|` (all excursions per unit local time).
    pub n_mass_estimate: McEstimate,
    pub total_time: f64,
    pub local_time: f64,
    pub excursions: u64,
    pub rows: Vec<Theorem1Row>,
    /// `|ratio − target|` never grows by more than 3 combined standard errors between neighbours.
    pub trend_nonincreasing: bool,
}

/// `n̂(h>x)/P(τ_x<∞)` against `κ̂(α)` from about `budget` simulated excursions.
pub fn theorem1_experiment(model: &LevyModel, alpha: f64, x_grid: &[f64], budget: u64, seed: u64) -> Result<Theorem1Table> {
    let reg = classify_path_regularity(model)?;
    let n_mass = reg
        .n_mass
        .ok_or_else(|| LabError::UnsupportedModel("excursion measure mass unavailable for this model".into()))?;
    let (asc, desc) = wh_factorize(model)?;
    let target = kappa_eval(&desc, alpha)?;
    let x_top = x_grid.iter().copied().fold(0.0, f64::max);
    let table = FirstPassageTable::from_ladder(asc, x_top + 1.0, crate::ladder::DEFAULT_RENEWAL_STEP)?;
    // excursions per unit time = |n̂| · (local time per unit time) = |n̂|·|E X₁|/κ̂'(0)
    let per_time = n_mass * model.mean().abs() / desc.mean_rate();
    let total_time = budget as f64 / per_time;
    let tail = estimate_excursion_tail(model, x_grid, total_time, seed)?;
    let rows: Vec<Theorem1Row> = tail
        .rows
        .iter()
        .map(|&(x, est)| {
            let pk = table.eval(x).unwrap_or(f64::NAN);
            let ratio = est.value / pk;
            let ratio_se = est.std_error / pk;
            Theorem1Row { x, n_hat: est, first_passage: pk, ratio, ratio_se, target, z: (ratio - target) / ratio_se }
        })
        .collect();
    let trend_nonincreasing = rows.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        (b.ratio - target).abs() <= (a.ratio - target).abs() + 3.0 * a.ratio_se.hypot(b.ratio_se)
    });
    Ok(Theorem1Table {
        alpha,
        target,
        n_mass,
        n_mass_estimate: tail.mass,
        total_time,
        local_time: tail.local_time,
        excursions: tail.excursions,
        rows,
        trend_nonincreasing,
    })
}
