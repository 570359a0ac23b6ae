//! Experiment orchestration.

use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use ladderlab_core::ladder::{e0_residual, kappa_eval, LadderMeasure};
use ladderlab_core::model::{classify_path_regularity, cramer_root, psi_eval};
use ladderlab_core::tails::{conv_ratio, CutoffLaw, TailLaw};
use ladderlab_core::{
    estimate_first_passage, identity_b_check, pi_tail, potter_min_A, salpha_check, theorem1_experiment,
    theorem_constants, vigon_forward_residual, vigon_inverse, wh_factorize, FirstPassageTable, LabError, Method,
    ModelKind, Side, TailFunction, Verdict,
};

use crate::config::{build_law, ExpectVerdict, ExperimentKind, LawKind, Scenario};

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub x: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub n: u64,
    pub method: String,
    pub seed: u64,
    pub target: f64,
    /// `None` for rows reported without a verdict.
    pub pass: Option<bool>,
}

/// A pass/fail statement not tied to a single row (trends, verdicts).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rule {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Passed,
    Failed,
    Skipped,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub status: Status,
    pub reason: Option<String>,
    pub seed: u64,
    #[serde(skip)]
    pub rows: Vec<Row>,
    pub rules: Vec<Rule>,
    pub details: Value,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub scenario: String,
    pub seed: u64,
    pub experiments: Vec<ExperimentReport>,
    pub wall_clock_s: f64,
}

impl ReportBundle {
    /// True when no experiment that ran has failed.
    pub fn passed(&self) -> bool {
        self.experiments.iter().all(|e| matches!(e.status, Status::Passed | Status::Skipped))
    }

    pub fn failed(&self) -> Vec<&str> {
        self.experiments
            .iter()
            .filter(|e| matches!(e.status, Status::Failed | Status::Error))
            .map(|e| e.name.as_str())
            .collect()
    }
}

/// Per-experiment seed: the scenario seed mixed with the experiment name, so
/// adding or removing experiments never changes the others.
pub fn experiment_seed(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    seed ^ h
}

struct Outcome {
    rows: Vec<Row>,
    rules: Vec<Rule>,
    details: Value,
}

enum Run {
    Done(Outcome),
    Skipped(String),
}

type ExpResult = Result<Run, LabError>;

fn row(x: f64, estimate: f64, method: &str, seed: u64, target: f64, pass: Option<bool>) -> Row {
    Row { x, estimate, std_error: 0.0, n: 0, method: method.to_string(), seed, target, pass }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Runs `only` (or every listed experiment) in name order.
pub fn run_experiment(s: &Scenario, only: Option<&[ExperimentKind]>) -> ReportBundle {
    let start = Instant::now();
    let experiments = s
        .experiments
        .iter()
        .filter(|e| only.is_none_or(|o| o.contains(e)))
        .map(|&kind| {
            let t0 = Instant::now();
            let seed = experiment_seed(s.seed, kind.name());
            let result = match kind {
                ExperimentKind::Analyze => analyze(s, seed),
                ExperimentKind::FirstPassage => first_passage(s, seed),
                ExperimentKind::Theorem1 => theorem1(s, seed),
                ExperimentKind::Theorem2 => theorem2(s, seed),
                ExperimentKind::Theorem3 => theorem3(s, seed),
                ExperimentKind::Tailclass => tailclass(s, seed),
                ExperimentKind::IdentityB => identity_b(s, seed),
            };
            let wall_clock_s = t0.elapsed().as_secs_f64();
            let name = kind.name().to_string();
            match result {
                Ok(Run::Done(o)) => {
                    let ok = o.rows.iter().all(|r| r.pass != Some(false)) && o.rules.iter().all(|r| r.pass);
                    ExperimentReport {
                        name,
                        status: if ok { Status::Passed } else { Status::Failed },
                        reason: None,
                        seed,
                        rows: o.rows,
                        rules: o.rules,
                        details: o.details,
                        wall_clock_s,
                    }
                }
                Ok(Run::Skipped(reason)) => ExperimentReport {
                    name,
                    status: Status::Skipped,
                    reason: Some(reason),
                    seed,
                    rows: vec![],
                    rules: vec![],
                    details: Value::Null,
                    wall_clock_s,
                },
                Err(e) => ExperimentReport {
                    name,
                    status: Status::Error,
                    reason: Some(e.to_string()),
                    seed,
                    rows: vec![],
                    rules: vec![],
                    details: Value::Null,
                    wall_clock_s,
                },
            }
        })
        .collect();
    ReportBundle { scenario: s.name.clone(), seed: s.seed, experiments, wall_clock_s: start.elapsed().as_secs_f64() }
}

fn alpha_of(s: &Scenario) -> Result<f64, LabError> {
    s.alpha.ok_or_else(|| LabError::Domain("no α given and no Cramér root".into()))
}

fn analyze(s: &Scenario, seed: u64) -> ExpResult {
    let c = &s.analyze;
    let m = &s.model;
    let (asc, desc) = wh_factorize(m)?;
    let reg = classify_path_regularity(m).ok();
    let gamma = cramer_root(m)?;
    let alpha = s.alpha.unwrap_or(1.0);
    let tc = theorem_constants(m, alpha)?;
    let mut rows = Vec::new();
    let expect = |v: Option<f64>, est: f64| v.map(|t| (t, (est - t).abs() <= c.tol));
    let mut scalar = |name: &str, x: f64, est: f64, want: Option<f64>| {
        let (target, pass) = expect(want, est).map_or((f64::NAN, None), |(t, p)| (t, Some(p)));
        rows.push(row(x, est, name, seed, target, pass));
    };
    scalar("cramer_root", 0.0, gamma.unwrap_or(f64::NAN), c.expect.gamma);
    scalar("q", 0.0, asc.q, c.expect.q);
    scalar("kappa_alpha", alpha, kappa_eval(&asc, alpha)?, c.expect.kappa_alpha);
    scalar("kappa_hat_alpha", alpha, tc.kappa_hat_alpha, c.expect.kappa_hat_alpha);
    scalar("kappa_neg_alpha", alpha, tc.kappa_neg_alpha, c.expect.kappa_neg_alpha);
    scalar("L", alpha, tc.l.unwrap_or(f64::NAN), c.expect.l);

    let abscissa = m.psi_abscissa();
    for &lambda in &c.lambda_grid {
        if lambda <= 0.0 || lambda >= abscissa {
            continue;
        }
        let psi = psi_eval(m, lambda);
        let prod = kappa_eval(&asc, -lambda).and_then(|a| Ok(a * kappa_eval(&desc, lambda)?));
        if let Ok(prod) = prod {
            let r = (-psi - prod).abs() / psi.abs();
            rows.push(row(lambda, r, "factorization_residual", seed, 0.0, Some(r < c.factorization_tol)));
        }
    }

    let mut vigon_note = Value::Null;
    if m.kind == ModelKind::CompoundPoissonDrift {
        for &t in &c.vigon_t {
            let r = vigon_forward_residual(m, &asc, &desc, t)?;
            rows.push(row(t, r, "vigon_forward_residual", seed, 0.0, Some(r < c.vigon_tol)));
        }
        for &x in &c.x_grid {
            let v = vigon_inverse(m, &desc, x)?;
            let exact = matches!(asc.measure, LadderMeasure::Exponential { .. });
            let target = asc.pi_tail(x);
            rows.push(row(x, v, "vigon_inverse", seed, target, exact.then(|| rel(v, target) < 1e-6)));
        }
    } else {
        vigon_note = json!("not applicable: no jumps");
    }

    let x_top = c.x_grid.iter().copied().fold(1.0, f64::max);
    let table = FirstPassageTable::from_ladder(asc.clone(), x_top + 1.0, ladderlab_core::ladder::DEFAULT_RENEWAL_STEP)?;
    for &x in &c.x_grid {
        rows.push(row(x, table.eval(x)?, "pk", seed, f64::NAN, None));
        match e0_residual(&table, x) {
            Ok(r) => rows.push(row(x, r, "e0_residual", seed, 0.0, Some(r < c.e0_tol))),
            Err(LabError::NotApplicable(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(Run::Done(Outcome {
        rows,
        rules: vec![],
        details: json!({
            "classification": reg,
            "cramer_root": gamma,
            "ascending": asc,
            "descending": desc,
            "theorem_constants": tc,
            "vigon": vigon_note,
        }),
    }))
}

fn first_passage(s: &Scenario, seed: u64) -> ExpResult {
    let c = &s.first_passage;
    if c.n == 0 {
        return Ok(Run::Skipped("budget n = 0".into()));
    }
    let m = &s.model;
    let method = c.method.unwrap_or(if cramer_root(m)?.is_some() { Method::Tilted } else { Method::Crude });
    let x_top = c.x_grid.iter().copied().fold(1.0, f64::max);
    let table = FirstPassageTable::new(m, x_top + 1.0)?;
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for (i, &x) in c.x_grid.iter().enumerate() {
        let sub_seed = seed.wrapping_add(i as u64);
        let est = estimate_first_passage(m, x, c.n, sub_seed, method)?;
        let target = table.eval(x)?;
        let e = est.estimate;
        let mut ok = (e.value - target).abs() <= c.tol_se * e.std_error;
        if let Some(max) = c.max_rel_se {
            ok &= e.std_error / e.value <= max;
        }
        ok &= (est.censored as f64) < c.max_censored_frac * c.n as f64;
        rows.push(Row {
            x,
            estimate: e.value,
            std_error: e.std_error,
            n: e.n,
            method: method.to_string(),
            seed: sub_seed,
            target,
            pass: Some(ok),
        });
        if let Ok(r) = e0_residual(&table, x) {
            rows.push(row(x, r, "e0_residual", seed, 0.0, Some(r < c.e0_tol)));
        }
        details.push(json!({
            "x": x,
            "z": (e.value - target) / e.std_error,
            "rel_se": e.std_error / e.value,
            "censored": est.censored,
            "kill_level": est.kill_level,
            "bias_bound": est.bias_bound,
        }));
    }
    Ok(Run::Done(Outcome { rows, rules: vec![], details: json!({ "method": method, "probes": details }) }))
}

fn theorem1(s: &Scenario, seed: u64) -> ExpResult {
    let c = &s.theorem1;
    if c.budget == 0 {
        return Ok(Run::Skipped("budget = 0".into()));
    }
    let alpha = alpha_of(s)?;
    let t = theorem1_experiment(&s.model, alpha, &c.x_grid, c.budget, seed)?;
    let mut rows: Vec<Row> = t
        .rows
        .iter()
        .map(|r| Row {
            x: r.x,
            estimate: r.ratio,
            std_error: r.ratio_se,
            n: r.n_hat.n,
            method: "excursion_ratio".into(),
            seed,
            target: r.target,
            pass: (r.x >= c.assert_from).then(|| (r.ratio - r.target).abs() <= c.tol_se * r.ratio_se),
        })
        .collect();
    let mass = t.n_mass_estimate;
    rows.push(Row {
        x: 0.0,
        estimate: mass.value,
        std_error: mass.std_error,
        n: mass.n,
        method: "n_mass".into(),
        seed,
        target: t.n_mass,
        pass: Some((mass.value - t.n_mass).abs() <= c.tol_se * mass.std_error),
    });
    let asserted: Vec<_> = t.rows.iter().filter(|r| r.x >= c.assert_from).collect();
    let trend = asserted.windows(2).all(|w| {
        (w[1].ratio - w[1].target).abs()
            <= (w[0].ratio - w[0].target).abs() + c.tol_se * w[0].ratio_se.hypot(w[1].ratio_se)
    });
    let devs: Vec<String> = asserted.iter().map(|r| format!("{}: {:.4e}", r.x, (r.ratio - r.target).abs())).collect();
    Ok(Run::Done(Outcome {
        rows,
        rules: vec![Rule {
            name: "deviation_nonincreasing".into(),
            pass: trend,
            detail: format!("|ratio − κ̂(α)| by x (up to {} combined SE): {}", c.tol_se, devs.join(", ")),
        }],
        details: json!({
            "alpha": alpha,
            "target": t.target,
            "n_mass": t.n_mass,
            "total_time": t.total_time,
            "local_time": t.local_time,
            "excursions": t.excursions,
            "rows": t.rows,
        }),
    }))
}

fn theorem2(s: &Scenario, seed: u64) -> ExpResult {
    let c = &s.theorem2;
    let m = &s.model;
    let alpha = alpha_of(s)?;
    let (_, desc) = wh_factorize(m)?;
    let target = kappa_eval(&desc, alpha)?;
    let mut rows = Vec::new();
    let mut devs = Vec::new();
    for &x in &c.x_grid {
        let ratio = pi_tail(m, x, Side::Up)? / vigon_inverse(m, &desc, x)?;
        devs.push((x, (ratio - target).abs()));
        let pass = (x == c.check_x).then(|| rel(ratio, target) <= c.rel_tol);
        rows.push(row(x, ratio, "levy_to_ladder_ratio", seed, target, pass));
    }
    let trend = devs.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(Run::Done(Outcome {
        rules: vec![Rule {
            name: "deviation_nonincreasing".into(),
            pass: trend,
            detail: format!("|Π̄_X/Π̄_H − κ̂(α)| by x: {devs:?}"),
        }],
        rows,
        details: json!({ "alpha": alpha, "target": target }),
    }))
}

fn theorem3(s: &Scenario, seed: u64) -> ExpResult {
    let c = &s.theorem3;
    let m = &s.model;
    let alpha = alpha_of(s)?;
    let tc = theorem_constants(m, alpha)?;
    let l = tc.l.ok_or_else(|| LabError::Domain("κ(−α) = 0: L undefined (Cramér case)".into()))?;
    let x_top = c.x_grid.iter().copied().fold(c.check_x, f64::max);
    let table = FirstPassageTable::new(m, x_top + 1.0)?;
    let mut rows = vec![Row {
        pass: c.expect_l.map(|t| (l - t).abs() <= c.l_tol),
        ..row(alpha, l, "L", seed, c.expect_l.unwrap_or(f64::NAN), None)
    }];
    let mut gaps = Vec::new();
    for &x in &c.x_grid {
        let ratio = table.eval(x)? / pi_tail(m, x, Side::Up)?;
        gaps.push((x, (ratio - l).abs()));
        let pass = (x == c.check_x).then(|| rel(ratio, l) <= c.rel_tol);
        rows.push(row(x, ratio, "first_passage_to_levy_ratio", seed, l, pass));
    }
    let shrinking = gaps.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(Run::Done(Outcome {
        rows,
        rules: vec![Rule { name: "gap_shrinking".into(), pass: shrinking, detail: format!("|ratio − L| by x: {gaps:?}") }],
        details: json!({ "theorem_constants": tc }),
    }))
}

fn tailclass(s: &Scenario, seed: u64) -> ExpResult {
    let c = &s.tailclass;
    let alpha = c.alpha.or(s.alpha).ok_or_else(|| LabError::Domain("no α for tailclass".into()))?;
    let mut rows = Vec::new();
    let mut rules = Vec::new();
    let mut reports = Vec::new();
    for subj in &c.subjects {
        let (law, tail): (Box<dyn TailLaw>, TailFunction) = match subj.kind {
            LawKind::ModelTail => {
                let up = s.model.up.as_ref().ok_or_else(|| LabError::Domain("model has no upward jumps".into()))?;
                let g = CutoffLaw { law: up.law.clone(), cutoff: 1.0 };
                let h = g.clone();
                let f = TailFunction::new(subj.name.clone(), f64::INFINITY, true, move |x| h.ln_survival(x));
                (Box::new(g), f)
            }
            k => {
                let g = build_law(k, &subj.params, &subj.name).map_err(LabError::Domain)?;
                let f = TailFunction::from_law(&g);
                (Box::new(g), f)
            }
        };
        let report = salpha_check(law.as_ref(), alpha, &c.x_probe);
        let target = 2.0 * report.mgf_integral;
        let method = format!("conv_ratio:{}", subj.name);
        for p in &report.probes {
            rows.push(row(p.x, p.ratio, &method, seed, target, None));
        }
        if subj.check_ratio {
            let r = conv_ratio(law.as_ref(), c.ratio_x, 0.05)?;
            rows.push(row(c.ratio_x, r, &format!("{method}:check"), seed, target, Some(rel(r, target) <= c.rel_tol)));
        }
        if subj.check_potter {
            let a = potter_min_A(&tail, alpha, c.potter_epsilon, &c.potter_x, &c.potter_y);
            rows.push(row(alpha, a, &format!("potter_A:{}", subj.name), seed, 1.0, Some((a - 1.0).abs() <= c.potter_tol)));
        }
        if let Some(want) = subj.expect {
            let got = match report.verdict {
                Verdict::Member => ExpectVerdict::Member,
                Verdict::NonMember => ExpectVerdict::NonMember,
                Verdict::Inconclusive => ExpectVerdict::Inconclusive,
            };
            rules.push(Rule {
                name: format!("verdict:{}", subj.name),
                pass: got == want,
                detail: format!("expected {want:?}, got {got:?}: {}", report.reason),
            });
        }
        reports.push(json!({ "name": subj.name, "report": report }));
    }
    Ok(Run::Done(Outcome { rows, rules, details: json!({ "alpha": alpha, "subjects": reports }) }))
}

fn identity_b(s: &Scenario, seed: u64) -> ExpResult {
    let c = &s.identity_b;
    if c.n == 0 {
        return Ok(Run::Skipped("budget n = 0".into()));
    }
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for (i, &x) in c.x_grid.iter().enumerate() {
        let sub_seed = seed.wrapping_add(i as u64);
        let r = identity_b_check(&s.model, x, c.n, sub_seed)?;
        rows.push(Row {
            x,
            estimate: r.residual,
            std_error: 1.0,
            n: r.n,
            method: "studentized_residual".into(),
            seed: sub_seed,
            target: 0.0,
            pass: Some(r.residual.abs() < c.max_abs_residual && r.censored == 0),
        });
        details.push(r);
    }
    Ok(Run::Done(Outcome { rows, rules: vec![], details: json!({ "probes": details }) }))
}
