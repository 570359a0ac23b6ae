//! Scenario files: a flat TOML key tree, validated in full before any compute.

use std::fmt;

use serde::Deserialize;

use ladderlab_core::model::{classify_path_regularity, cramer_root, exp_moment, RegularityCase};
use ladderlab_core::{wh_factorize, JumpComponent, JumpLaw, LevyModel, Method, MomentClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Analyze,
    FirstPassage,
    Theorem1,
    Theorem2,
    Theorem3,
    Tailclass,
    IdentityB,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Analyze => "analyze",
            Self::FirstPassage => "first_passage",
            Self::Theorem1 => "theorem1",
            Self::Theorem2 => "theorem2",
            Self::Theorem3 => "theorem3",
            Self::Tailclass => "tailclass",
            Self::IdentityB => "identity_b",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    #[serde(alias = "exp")]
    Exponential,
    TiltedPareto,
    Tabulated,
    /// Tail subjects only: the scenario model's upward Lévy tail beyond cutoff 1.
    ModelTail,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct LawParams {
    pub rate: Option<f64>,
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub ln_s: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct JumpSpec {
    pub rate: f64,
    pub law: LawKind,
    #[serde(default)]
    pub params: LawParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKindSpec {
    #[serde(alias = "BrownianDrift")]
    Brownian,
    #[serde(alias = "CompoundPoissonDrift")]
    CompoundPoisson,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKindSpec,
    pub drift: f64,
    pub sigma: Option<f64>,
    pub jumps_up: Option<JumpSpec>,
    pub jumps_down: Option<JumpSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct AnalyzeExpect {
    pub gamma: Option<f64>,
    pub q: Option<f64>,
    pub kappa_alpha: Option<f64>,
    pub kappa_hat_alpha: Option<f64>,
    pub kappa_neg_alpha: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct AnalyzeCfg {
    pub lambda_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub vigon_t: Vec<f64>,
    pub expect: AnalyzeExpect,
    pub tol: f64,
    pub factorization_tol: f64,
    pub vigon_tol: f64,
    pub e0_tol: f64,
}

impl Default for AnalyzeCfg {
    fn default() -> Self {
        Self {
            lambda_grid: vec![0.1, 0.25, 0.5, 0.75, 0.9],
            x_grid: vec![0.5, 1.0, 2.0, 4.0],
            vigon_t: vec![0.5, 1.0, 5.0],
            expect: AnalyzeExpect::default(),
            tol: 1e-8,
            factorization_tol: 1e-8,
            vigon_tol: 1e-5,
            e0_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct FirstPassageCfg {
    pub method: Option<Method>,
    pub n: u64,
    pub x_grid: Vec<f64>,
    pub tol_se: f64,
    pub max_rel_se: Option<f64>,
    pub max_censored_frac: f64,
    pub e0_tol: f64,
}

impl Default for FirstPassageCfg {
    fn default() -> Self {
        Self {
            method: None,
            n: 100_000,
            x_grid: vec![1.0, 2.0, 3.0],
            tol_se: 3.0,
            max_rel_se: None,
            max_censored_frac: 1e-3,
            e0_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct Theorem1Cfg {
    pub budget: u64,
    pub x_grid: Vec<f64>,
    /// Rows with `x` below this are reported without a verdict.
    pub assert_from: f64,
    pub tol_se: f64,
}

impl Default for Theorem1Cfg {
    fn default() -> Self {
        Self { budget: 1_000_000, x_grid: vec![0.5, 2.0, 4.0, 6.0], assert_from: 2.0, tol_se: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct Theorem2Cfg {
    pub x_grid: Vec<f64>,
    pub check_x: f64,
    pub rel_tol: f64,
}

impl Default for Theorem2Cfg {
    fn default() -> Self {
        Self { x_grid: vec![10.0, 20.0, 30.0], check_x: 30.0, rel_tol: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct Theorem3Cfg {
    pub x_grid: Vec<f64>,
    pub check_x: f64,
    pub rel_tol: f64,
    #[serde(rename = "expect_L")]
    pub expect_l: Option<f64>,
    pub l_tol: f64,
}

impl Default for Theorem3Cfg {
    fn default() -> Self {
        Self { x_grid: vec![20.0, 35.0, 50.0], check_x: 50.0, rel_tol: 0.15, expect_l: None, l_tol: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectVerdict {
    Member,
    NonMember,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TailSubject {
    pub name: String,
    pub kind: LawKind,
    #[serde(default)]
    pub params: LawParams,
    pub expect: Option<ExpectVerdict>,
    /// Assert `Ḡ∗Ḡ/Ḡ` at `ratio_x` within `rel_tol` of `2∫e^{αy}G(dy)`.
    #[serde(default)]
    pub check_ratio: bool,
    /// Assert the Potter constant equals 1 within `potter_tol`.
    #[serde(default)]
    pub check_potter: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct TailclassCfg {
    pub alpha: Option<f64>,
    pub x_probe: Vec<f64>,
    pub ratio_x: f64,
    pub rel_tol: f64,
    pub potter_epsilon: f64,
    pub potter_x: Vec<f64>,
    pub potter_y: Vec<f64>,
    pub potter_tol: f64,
    pub subjects: Vec<TailSubject>,
}

impl Default for TailclassCfg {
    fn default() -> Self {
        Self {
            alpha: None,
            x_probe: vec![20.0, 40.0, 80.0],
            ratio_x: 40.0,
            rel_tol: 0.05,
            potter_epsilon: 0.5,
            potter_x: (1..=40).map(f64::from).collect(),
            potter_y: (-78..=80).map(|i| f64::from(i) * 0.5).collect(),
            potter_tol: 1e-9,
            subjects: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct IdentityBCfg {
    pub n: u64,
    pub x_grid: Vec<f64>,
    pub max_abs_residual: f64,
}

impl Default for IdentityBCfg {
    fn default() -> Self {
        Self { n: 1_000_000, x_grid: vec![1.0, 2.0], max_abs_residual: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct ScenarioFile {
    name: String,
    #[serde(default = "default_seed")]
    seed: u64,
    alpha: Option<f64>,
    experiments: Vec<ExperimentKind>,
    model: ModelSpec,
    #[serde(default)]
    analyze: AnalyzeCfg,
    #[serde(default)]
    first_passage: FirstPassageCfg,
    #[serde(default)]
    theorem1: Theorem1Cfg,
    #[serde(default)]
    theorem2: Theorem2Cfg,
    #[serde(default)]
    theorem3: Theorem3Cfg,
    #[serde(default)]
    tailclass: TailclassCfg,
    #[serde(default)]
    identity_b: IdentityBCfg,
}

fn default_seed() -> u64 {
    1
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub model: LevyModel,
    /// The index `α`: given, or the Cramér root when one exists.
    pub alpha: Option<f64>,
    /// Sorted by name, duplicates removed.
    pub experiments: Vec<ExperimentKind>,
    pub analyze: AnalyzeCfg,
    pub first_passage: FirstPassageCfg,
    pub theorem1: Theorem1Cfg,
    pub theorem2: Theorem2Cfg,
    pub theorem3: Theorem3Cfg,
    pub tailclass: TailclassCfg,
    pub identity_b: IdentityBCfg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Parse,
    Validation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// `line N`, a dotted key path, or both.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ViolationKind::Parse => "ParseError",
            ViolationKind::Validation => "ValidationError",
        };
        write!(f, "{kind} at {}: {}", self.location, self.message)
    }
}

/// Every problem found in a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario rejected ({} problem(s)):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ScenarioError {}

const PARAMS: &[&str] = &["rate", "alpha", "rho", "x", "ln_s"];

fn allowed_keys(path: &str) -> Option<&'static [&'static str]> {
    Some(match path {
        "" => &[
            "name",
            "seed",
            "alpha",
            "experiments",
            "model",
            "analyze",
            "first_passage",
            "theorem1",
            "theorem2",
            "theorem3",
            "tailclass",
            "identity_b",
        ],
        "model" => &["kind", "drift", "sigma", "jumps_up", "jumps_down"],
        "model.jumps_up" | "model.jumps_down" => &["rate", "law", "params"],
        "model.jumps_up.params" | "model.jumps_down.params" | "tailclass.subjects[].params" => PARAMS,
        "analyze" => &["lambda_grid", "x_grid", "vigon_t", "expect", "tol", "factorization_tol", "vigon_tol", "e0_tol"],
        "analyze.expect" => &["gamma", "q", "kappa_alpha", "kappa_hat_alpha", "kappa_neg_alpha", "L"],
        "first_passage" => &["method", "n", "x_grid", "tol_se", "max_rel_se", "max_censored_frac", "e0_tol"],
        "theorem1" => &["budget", "x_grid", "assert_from", "tol_se"],
        "theorem2" => &["x_grid", "check_x", "rel_tol"],
        "theorem3" => &["x_grid", "check_x", "rel_tol", "expect_L", "l_tol"],
        "tailclass" => &[
            "alpha",
            "x_probe",
            "ratio_x",
            "rel_tol",
            "potter_epsilon",
            "potter_x",
            "potter_y",
            "potter_tol",
            "subjects",
        ],
        "tailclass.subjects[]" => &["name", "kind", "params", "expect", "check_ratio", "check_potter"],
        "identity_b" => &["n", "x_grid", "max_abs_residual"],
        _ => return None,
    })
}

fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let t = l.trim_start();
        t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
            || t.strip_prefix('"').and_then(|r| r.strip_prefix(key)).is_some_and(|r| r.starts_with('"'))
    })
    .map(|i| i + 1)
}

fn walk_keys(text: &str, path: &str, table: &toml::Table, out: &mut Vec<Violation>) {
    let Some(allowed) = allowed_keys(path) else { return };
    for (key, value) in table {
        let child = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
        if !allowed.contains(&key.as_str()) {
            let location = match line_of(text, key) {
                Some(n) => format!("line {n}, field `{child}`"),
                None => format!("field `{child}`"),
            };
            out.push(Violation {
                kind: ViolationKind::Parse,
                location,
                message: format!("unknown field `{key}`; expected one of: {}", allowed.join(", ")),
            });
            continue;
        }
        match value {
            toml::Value::Table(t) => walk_keys(text, &child, t, out),
            toml::Value::Array(items) => {
                for item in items {
                    if let toml::Value::Table(t) = item {
                        walk_keys(text, &format!("{child}[]"), t, out);
                    }
                }
            }
            _ => {}
        }
    }
}

fn line_from_span(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => format!("line {}", text[..r.start.min(text.len())].lines().count().max(1)),
        None => "input".to_string(),
    }
}

/// Builds a jump law from `(law, params)`; `at` names the location in messages.
pub fn build_law(kind: LawKind, p: &LawParams, at: &str) -> Result<JumpLaw, String> {
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| format!("{at}: `params.{name}` is required"));
    let law = match kind {
        LawKind::Exponential => JumpLaw::exponential(need(p.rate, "rate")?),
        LawKind::TiltedPareto => JumpLaw::tilted_pareto(need(p.alpha, "alpha")?, need(p.rho, "rho")?),
        LawKind::Tabulated => {
            let x = p.x.clone().ok_or_else(|| format!("{at}: `params.x` is required"))?;
            let ln_s = p.ln_s.clone().ok_or_else(|| format!("{at}: `params.ln_s` is required"))?;
            JumpLaw::tabulated(x, ln_s)
        }
        LawKind::ModelTail => return Err(format!("{at}: `model_tail` is only valid for tail subjects")),
    };
    law.map_err(|e| format!("{at}: {e}"))
}

fn build_model(spec: &ModelSpec) -> Result<LevyModel, Vec<String>> {
    let mut errs = Vec::new();
    let mut component = |j: &Option<JumpSpec>, at: &str| -> Option<JumpComponent> {
        let j = j.as_ref()?;
        match build_law(j.law, &j.params, at) {
            Ok(law) => Some(JumpComponent::new(j.rate, law)),
            Err(e) => {
                errs.push(e);
                None
            }
        }
    };
    let up = component(&spec.jumps_up, "model.jumps_up");
    let down = component(&spec.jumps_down, "model.jumps_down");
    if !errs.is_empty() {
        return Err(errs);
    }
    let model = match spec.kind {
        ModelKindSpec::Brownian => {
            if spec.jumps_up.is_some() || spec.jumps_down.is_some() {
                return Err(vec!["model: Brownian models carry no jumps".into()]);
            }
            LevyModel::brownian(spec.drift, spec.sigma.unwrap_or(f64::NAN))
        }
        ModelKindSpec::CompoundPoisson => {
            if spec.sigma.is_some_and(|s| s != 0.0) {
                return Err(vec!["model.sigma: compound Poisson models have sigma = 0".into()]);
            }
            LevyModel::compound_poisson(spec.drift, up, down)
        }
    };
    model.map_err(|e| vec![format!("model: {e}")])
}

fn check_grid(name: &str, grid: &[f64], min: f64, errs: &mut Vec<String>) {
    if grid.is_empty() {
        errs.push(format!("{name}: grid must not be empty"));
    } else if grid.iter().any(|&v| !(v >= min && v.is_finite())) {
        errs.push(format!("{name}: values must be finite and >= {min}"));
    }
}

fn validate(f: &ScenarioFile, model: &LevyModel) -> (Option<f64>, Vec<String>) {
    let mut errs = Vec::new();
    let reg = classify_path_regularity(model);
    let wh = wh_factorize(model);
    let root = cramer_root(model).ok().flatten();
    let alpha = f.alpha.or(root);
    if let Some(a) = f.alpha {
        if !(a > 0.0 && a.is_finite()) {
            errs.push(format!("alpha: must be positive, got {a}"));
        }
    }
    let case_text = match &reg {
        Ok(r) => format!("Case {:?}", r.case),
        Err(e) => e.to_string(),
    };
    let needs_wh = |what: &str, errs: &mut Vec<String>| {
        if let Err(e) = &wh {
            errs.push(format!("{what}: model outside the factorization catalog ({e})"));
        }
    };
    let needs_alpha = |what: &str, errs: &mut Vec<String>| {
        if alpha.is_none() {
            errs.push(format!("{what}: `alpha` is required (model has no Cramér root)"));
        }
    };
    let drifts_down = model.mean() < 0.0;
    let is_cp = model.kind == ladderlab_core::ModelKind::CompoundPoissonDrift;
    for &e in &f.experiments {
        match e {
            ExperimentKind::Analyze => {
                needs_wh("analyze", &mut errs);
                check_grid("analyze.lambda_grid", &f.analyze.lambda_grid, 0.0, &mut errs);
                if !drifts_down {
                    errs.push("analyze: first-passage tables need E X₁ < 0 (q > 0)".into());
                }
            }
            ExperimentKind::FirstPassage => {
                let c = &f.first_passage;
                needs_wh("first_passage", &mut errs);
                check_grid("first_passage.x_grid", &c.x_grid, 0.0, &mut errs);
                if !is_cp {
                    errs.push(format!("first_passage: Brownian paths are not simulated ({case_text}); use analyze"));
                } else if model.drift > 0.0 {
                    errs.push("first_passage: positive drift is outside the simulable catalog".into());
                }
                if !drifts_down {
                    errs.push("first_passage: X must drift to −∞".into());
                }
                if c.method == Some(Method::Tilted) && root.is_none() {
                    errs.push("first_passage: method `tilted` needs a Cramér root; this model has none".into());
                }
            }
            ExperimentKind::Theorem1 => {
                match &reg {
                    Ok(r) if r.case == RegularityCase::I => errs.push(
                        "theorem1: model is Case I (0 regular for both half-lines); the excursion measure is infinite and n̂(h>x) cannot be counted".into(),
                    ),
                    Ok(r) if r.n_mass.is_none() => {
                        errs.push(format!("theorem1: |n̂| unavailable for this {case_text} model"))
                    }
                    Ok(_) => {}
                    Err(e) => errs.push(format!("theorem1: {e}")),
                }
                needs_wh("theorem1", &mut errs);
                needs_alpha("theorem1", &mut errs);
                check_grid("theorem1.x_grid", &f.theorem1.x_grid, 0.0, &mut errs);
            }
            ExperimentKind::Theorem2 => {
                needs_wh("theorem2", &mut errs);
                needs_alpha("theorem2", &mut errs);
                if !is_cp {
                    errs.push("theorem2: needs a jump process".into());
                }
                check_grid("theorem2.x_grid", &f.theorem2.x_grid, 1e-12, &mut errs);
            }
            ExperimentKind::Theorem3 => {
                needs_wh("theorem3", &mut errs);
                needs_alpha("theorem3", &mut errs);
                if let Some(a) = alpha {
                    match exp_moment(model, a) {
                        Ok(m) if m.classification == MomentClass::Subcritical => {}
                        Ok(m) => errs.push(format!(
                            "theorem3: needs E e^{{αX₁}} < 1 at α={a}, got {:?} ({})",
                            m.classification, m.value
                        )),
                        Err(e) => errs.push(format!("theorem3: {e}")),
                    }
                }
                check_grid("theorem3.x_grid", &f.theorem3.x_grid, 1e-12, &mut errs);
            }
            ExperimentKind::Tailclass => {
                let t = &f.tailclass;
                if t.subjects.is_empty() {
                    errs.push("tailclass: at least one `[[tailclass.subjects]]` entry is required".into());
                }
                if t.alpha.or(alpha).is_none() {
                    errs.push("tailclass: `tailclass.alpha` or `alpha` is required".into());
                }
                if t.x_probe.len() < 2 {
                    errs.push("tailclass.x_probe: need at least two probe points".into());
                }
                for (i, s) in t.subjects.iter().enumerate() {
                    let at = format!("tailclass.subjects[{i}]");
                    if s.kind == LawKind::ModelTail {
                        if model.up.is_none() {
                            errs.push(format!("{at}: `model_tail` needs upward jumps in the model"));
                        }
                    } else if let Err(e) = build_law(s.kind, &s.params, &at) {
                        errs.push(e);
                    }
                }
            }
            ExperimentKind::IdentityB => {
                match &reg {
                    Ok(r) if matches!(r.case, RegularityCase::II | RegularityCase::III) => {}
                    Ok(_) => errs.push(format!(
                        "identity_b: needs a Case II or III model (h₁ and |S_T̂₁| simulable), got {case_text}"
                    )),
                    Err(e) => errs.push(format!("identity_b: {e}")),
                }
                if model.drift > 0.0 {
                    errs.push("identity_b: positive drift is outside the simulable catalog".into());
                }
                if !drifts_down {
                    errs.push("identity_b: needs q > 0 (X drifting to −∞)".into());
                }
                needs_wh("identity_b", &mut errs);
                check_grid("identity_b.x_grid", &f.identity_b.x_grid, 0.0, &mut errs);
            }
        }
    }
    (alpha, errs)
}

/// Parses and validates a scenario, reporting every violation found.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut violations = Vec::new();
    let table: toml::Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            let e: toml::de::Error = e;
            violations.push(Violation {
                kind: ViolationKind::Parse,
                location: line_from_span(text, e.span()),
                message: e.message().to_string(),
            });
            return Err(ScenarioError { violations });
        }
    };
    walk_keys(text, "", &table, &mut violations);
    let file: ScenarioFile = match toml::from_str(text) {
        Ok(f) => f,
        Err(e) => {
            violations.push(Violation {
                kind: ViolationKind::Parse,
                location: line_from_span(text, e.span()),
                message: e.message().to_string(),
            });
            return Err(ScenarioError { violations });
        }
    };
    let model = match build_model(&file.model) {
        Ok(m) => Some(m),
        Err(errs) => {
            violations.extend(errs.into_iter().map(|m| Violation {
                kind: ViolationKind::Validation,
                location: "model".into(),
                message: m,
            }));
            None
        }
    };
    let mut alpha = file.alpha;
    if let Some(model) = &model {
        let (a, errs) = validate(&file, model);
        alpha = a;
        violations.extend(errs.into_iter().map(|m| {
            let location = m.split(':').next().unwrap_or("scenario").to_string();
            Violation { kind: ViolationKind::Validation, location, message: m }
        }));
    }
    if !violations.is_empty() {
        return Err(ScenarioError { violations });
    }
    let mut experiments = file.experiments.clone();
    experiments.sort_by_key(|e| e.name());
    experiments.dedup();
    Ok(Scenario {
        name: file.name,
        seed: file.seed,
        model: model.expect("validated"),
        alpha,
        experiments,
        analyze: file.analyze,
        first_passage: file.first_passage,
        theorem1: file.theorem1,
        theorem2: file.theorem2,
        theorem3: file.theorem3,
        tailclass: file.tailclass,
        identity_b: file.identity_b,
    })
}
