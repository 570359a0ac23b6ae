//! Exact event-driven simulation of compound-Poisson-plus-drift paths,
//! reflection at the running infimum and excursion extraction.
//!
//! Between jumps the path is linear, so the infimum, the return times of
//! `R = X − inf X` to zero and the excursion heights are all read off the
//! event list with no time grid.

mod estimate;

pub use estimate::{
    estimate_excursion_tail, estimate_first_passage, identity_b_check, kill_level, theorem1_experiment,
    ExcursionTail, FirstPassageEstimate, IdentityBReport, McEstimate, Method, Theorem1Row, Theorem1Table,
};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::law::JumpSampler;
use crate::model::{LevyModel, ModelKind, Side};
use crate::rng::{stream, LabRng};

/// A compound-Poisson path with linear drift between events, started at 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventPath {
    pub slope: f64,
    /// `(time, jump)` in strictly increasing time order.
    pub events: Vec<(f64, f64)>,
    pub horizon: f64,
    /// `inf_{s ≤ t_i} X_s` right after event `i`.
    pub running_inf: Vec<f64>,
}

impl EventPath {
    pub fn new(slope: f64, events: Vec<(f64, f64)>, horizon: f64) -> Self {
        let mut running_inf = Vec::with_capacity(events.len());
        let (mut t_prev, mut x, mut inf) = (0.0, 0.0_f64, 0.0_f64);
        for &(t, j) in &events {
            x += slope * (t - t_prev);
            inf = inf.min(x);
            x += j;
            inf = inf.min(x);
            running_inf.push(inf);
            t_prev = t;
        }
        Self { slope, events, horizon, running_inf }
    }

    /// `X_t`, right-continuous.
    pub fn value_at(&self, t: f64) -> f64 {
        let (mut t_prev, mut x) = (0.0, 0.0);
        for &(te, j) in &self.events {
            if te > t {
                break;
            }
            x += self.slope * (te - t_prev) + j;
            t_prev = te;
        }
        x + self.slope * (t - t_prev)
    }
}

/// Waiting times and jumps of a model, optionally under an exponential tilt.
#[derive(Debug, Clone)]
pub(crate) struct StepSampler {
    pub slope: f64,
    pub rate: f64,
    p_up: f64,
    up: Option<JumpSampler>,
    down: Option<JumpSampler>,
}

impl StepSampler {
    /// `tilt = θ` reweights the path law by `e^{θX_t − tψ(θ)}`: up jumps get rate
    /// `λ₊m̂₊(θ)` and law `∝ e^{θy}`, down magnitudes rate `λ₋m̂₋(−θ)` and law `∝ e^{−θy}`.
    pub fn new(model: &LevyModel, tilt: f64) -> Result<Self> {
        if model.kind != ModelKind::CompoundPoissonDrift {
            return Err(LabError::UnsupportedModel("only compound-Poisson models are path-simulated".into()));
        }
        let prep = |side: Side, theta: f64| -> Result<(f64, Option<JumpSampler>)> {
            match model.component(side) {
                Some(c) if c.rate > 0.0 => Ok((c.rate * c.law.mgf(theta), Some(c.law.sampler(theta)?))),
                _ => Ok((0.0, None)),
            }
        };
        let (r_up, up) = prep(Side::Up, tilt)?;
        let (r_down, down) = prep(Side::Down, -tilt)?;
        let rate = r_up + r_down;
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(LabError::UnsupportedModel("no jumps to simulate".into()));
        }
        Ok(Self { slope: model.drift, rate, p_up: r_up / rate, up, down })
    }

    /// `(waiting time, signed jump)`.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let e: f64 = Exp1.sample(rng);
        let dt = e / self.rate;
        let up = match (&self.up, &self.down) {
            (Some(_), None) => true,
            (None, Some(_)) => false,
            _ => rng.gen::<f64>() < self.p_up,
        };
        let j = if up {
            self.up.as_ref().map_or(0.0, |s| s.sample(rng))
        } else {
            -self.down.as_ref().map_or(0.0, |s| s.sample(rng))
        };
        (dt, j)
    }
}

pub(crate) fn simulate_with(sampler: &StepSampler, horizon: f64, rng: &mut LabRng) -> EventPath {
    let mut events = Vec::with_capacity((sampler.rate * horizon * 1.1) as usize + 16);
    let mut t = 0.0;
    loop {
        let (dt, j) = sampler.step(rng);
        t += dt;
        if t > horizon {
            break;
        }
        events.push((t, j));
    }
    EventPath::new(sampler.slope, events, horizon)
}

/// Exact path on `[0, horizon]`, reproducible from `seed`.
pub fn simulate_path(model: &LevyModel, horizon: f64, seed: u64) -> Result<EventPath> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(crate::error::invalid("horizon", "must be positive and finite"));
    }
    let sampler = StepSampler::new(model, 0.0)?;
    Ok(simulate_with(&sampler, horizon, &mut stream(seed, 0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcursionRecord {
    pub start: f64,
    pub end: f64,
    pub height: f64,
    /// Undershoot below the previous infimum at the end (0 for a continuous return).
    pub terminal_drop: f64,
    pub complete: bool,
}

/// Excursions of `R` away from 0 together with the local time spent at the infimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub excursions: Vec<ExcursionRecord>,
    /// 0, every excursion end and every down jump taken from the infimum.
    pub ladder_epochs: Vec<f64>,
    /// Time spent at the infimum; with the normalisation used throughout it is the local time at 0.
    pub local_time: f64,
    /// Down jumps from the infimum: excursions of zero length and height.
    pub trivial: u64,
}

/// Streaming version of the reflection state machine; paths are fed event by event.
#[derive(Debug, Clone)]
pub(crate) struct ExcursionTracker {
    c: f64,
    t: f64,
    x: f64,
    base: f64,
    open: Option<(f64, f64)>,
    pub local_time: f64,
    pub trivial: u64,
}

pub(crate) enum Closed {
    Nothing,
    Trivial(f64),
    Excursion(ExcursionRecord),
}

impl ExcursionTracker {
    /// `slope` must be nonpositive.
    pub fn new(slope: f64) -> Self {
        Self { c: -slope, t: 0.0, x: 0.0, base: 0.0, open: None, local_time: 0.0, trivial: 0 }
    }

    pub fn is_open(&self) -> bool {
        self.open.is_some()
    }

    fn drift_to(&mut self, t: f64) -> Option<ExcursionRecord> {
        let dt = t - self.t;
        let mut closed = None;
        match self.open {
            None => {
                self.local_time += dt;
                self.x -= self.c * dt;
                self.base = self.x;
            }
            Some((start, height)) => {
                let fall = self.c * dt;
                if self.c > 0.0 && self.x - fall <= self.base {
                    let t_hit = self.t + (self.x - self.base) / self.c;
                    closed = Some(ExcursionRecord { start, end: t_hit, height, terminal_drop: 0.0, complete: true });
                    self.open = None;
                    self.local_time += t - t_hit;
                    self.x = self.base - self.c * (t - t_hit);
                    self.base = self.x;
                } else {
                    self.x -= fall;
                }
            }
        }
        self.t = t;
        closed
    }

    /// Feeds the event `(t, jump)`; returns what, if anything, ended at or before `t`.
    pub fn push(&mut self, t: f64, jump: f64) -> (Closed, Closed) {
        let by_drift = match self.drift_to(t) {
            Some(r) => Closed::Excursion(r),
            None => Closed::Nothing,
        };
        self.x += jump;
        let by_jump = match self.open {
            None if jump > 0.0 => {
                self.open = Some((t, self.x - self.base));
                Closed::Nothing
            }
            None => {
                self.base = self.x;
                self.trivial += 1;
                Closed::Trivial(t)
            }
            Some((start, height)) => {
                if self.x <= self.base {
                    let drop = self.base - self.x;
                    self.base = self.x;
                    self.open = None;
                    Closed::Excursion(ExcursionRecord { start, end: t, height, terminal_drop: drop, complete: true })
                } else {
                    self.open = Some((start, height.max(self.x - self.base)));
                    Closed::Nothing
                }
            }
        };
        (by_drift, by_jump)
    }

    /// Runs the drift to the horizon; returns the excursion it closes and the one left open.
    pub fn finish(&mut self, horizon: f64) -> (Option<ExcursionRecord>, Option<ExcursionRecord>) {
        let closed = self.drift_to(horizon);
        let open = self.open.map(|(start, height)| ExcursionRecord {
            start,
            end: horizon,
            height,
            terminal_drop: 0.0,
            complete: false,
        });
        (closed, open)
    }
}

/// Splits a path at its running infimum.
///
/// Excursions with positive height are listed in time order, the last flagged
/// incomplete if the horizon cuts it.
pub fn decompose_excursions(path: &EventPath) -> Result<Decomposition> {
    if path.slope > 0.0 {
        return Err(LabError::UnsupportedModel(
            "positive drift: the infimum is not attained on intervals".into(),
        ));
    }
    let mut tracker = ExcursionTracker::new(path.slope);
    let mut excursions = Vec::new();
    let mut ladder_epochs = vec![0.0];
    let take = |c: Closed, ex: &mut Vec<ExcursionRecord>, ep: &mut Vec<f64>| match c {
        Closed::Nothing => {}
        Closed::Trivial(t) => ep.push(t),
        Closed::Excursion(r) => {
            ep.push(r.end);
            ex.push(r);
        }
    };
    for &(t, j) in &path.events {
        let (a, b) = tracker.push(t, j);
        take(a, &mut excursions, &mut ladder_epochs);
        take(b, &mut excursions, &mut ladder_epochs);
    }
    let (closed, open) = tracker.finish(path.horizon);
    if let Some(r) = closed {
        ladder_epochs.push(r.end);
        excursions.push(r);
    }
    excursions.extend(open);
    Ok(Decomposition { excursions, ladder_epochs, local_time: tracker.local_time, trivial: tracker.trivial })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_jump_then_drift() {
        let p = EventPath::new(-1.0, vec![(1.0, 2.5)], 10.0);
        let d = decompose_excursions(&p).unwrap();
        assert_eq!(d.excursions.len(), 1);
        let e = d.excursions[0];
        assert_eq!((e.start, e.end, e.height, e.complete), (1.0, 3.5, 2.5, true));
        assert_eq!(d.ladder_epochs, vec![0.0, 3.5]);
        assert!((d.local_time - 7.5).abs() < 1e-12);
    }

    #[test]
    fn no_up_jumps_no_excursions() {
        let p = EventPath::new(-1.0, vec![(1.0, -0.5), (2.0, -1.0)], 5.0);
        let d = decompose_excursions(&p).unwrap();
        assert!(d.excursions.is_empty());
        assert_eq!(d.trivial, 2);
        assert_eq!(p.running_inf, vec![-1.5, -3.5]);
    }

    #[test]
    fn excursion_ending_by_a_jump_and_an_open_one() {
        // zero drift: up 1, up 0.5, down 2 (ends, undershoot 0.5), up 1 (open)
        let p = EventPath::new(0.0, vec![(1.0, 1.0), (2.0, 0.5), (3.0, -2.0), (4.0, 1.0)], 6.0);
        let d = decompose_excursions(&p).unwrap();
        assert_eq!(d.excursions.len(), 2);
        assert_eq!(d.excursions[0].height, 1.5);
        assert_eq!(d.excursions[0].terminal_drop, 0.5);
        assert!(!d.excursions[1].complete);
        assert!((d.local_time - 2.0).abs() < 1e-12);
    }

    #[test]
    fn brownian_is_not_simulated() {
        let m = LevyModel::brownian(-1.0, 1.0).unwrap();
        assert!(matches!(simulate_path(&m, 1.0, 1), Err(LabError::UnsupportedModel(_))));
    }
}
