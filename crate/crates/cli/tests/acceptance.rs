//! Acceptance gate: one line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ladderlab_core::ladder::{e0_residual, FirstPassageTable};
use ladderlab_core::tails::conv_ratio;
use ladderlab_core::{
    classify_path_regularity, cramer_root, estimate_excursion_tail, estimate_first_passage, identity_b_check,
    kappa_eval, pi_tail, pk_first_passage, potter_min_A, salpha_check, theorem1_experiment, theorem_constants,
    vigon_forward_residual, vigon_inverse, wh_factorize, JumpComponent, JumpLaw, LevyModel, Method, RegularityCase,
    Side, TailFunction, Verdict,
};

type Check = Result<Vec<String>, String>;

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn close(label: &str, got: f64, want: f64, tol: f64, notes: &mut Vec<String>) -> bool {
    let ok = (got - want).abs() <= tol;
    if !ok {
        notes.push(format!("{label} = {got:.12} (want {want}, tol {tol:e})"));
    }
    ok
}

fn verdict(ok: bool, notes: Vec<String>) -> Check {
    if ok {
        Ok(notes)
    } else {
        Err(notes.join("; "))
    }
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

fn two_sided_zero_drift() -> LevyModel {
    LevyModel::compound_poisson(
        0.0,
        Some(JumpComponent::new(1.0, JumpLaw::exponential(2.0).unwrap())),
        Some(JumpComponent::new(1.5, JumpLaw::exponential(1.0).unwrap())),
    )
    .unwrap()
}

fn c1_goldens() -> Check {
    let mm1 = LevyModel::mm1();
    let mut notes = Vec::new();
    let mut ok = true;
    let gamma = cramer_root(&mm1).map_err(e)?.ok_or("M/M/1 has no Cramér root")?;
    ok &= close("γ", gamma, 1.0, 1e-8, &mut notes);
    let k = theorem_constants(&mm1, 1.0).map_err(e)?;
    let (asc, _) = wh_factorize(&mm1).map_err(e)?;
    ok &= close("q", k.q, 0.5, 1e-8, &mut notes);
    ok &= close("κ(1)", kappa_eval(&asc, 1.0).map_err(e)?, 2.0 / 3.0, 1e-8, &mut notes);
    ok &= close("κ̂(1)", k.kappa_hat_alpha, 1.0, 1e-8, &mut notes);
    ok &= close("κ(−1)", k.kappa_neg_alpha, 0.0, 1e-8, &mut notes);
    let bm = LevyModel::brownian(-1.0, 1.0).map_err(e)?;
    let g = cramer_root(&bm).map_err(e)?.ok_or("Brownian drift has no Cramér root")?;
    ok &= close("γ_BM", g, 2.0, 1e-10, &mut notes);
    notes.push(format!("γ={gamma:.10} q={:.10} κ̂(1)={:.10} γ_BM={g:.12}", k.q, k.kappa_hat_alpha));
    verdict(ok, notes)
}

fn c2_vigon() -> Check {
    let mm1 = LevyModel::mm1();
    let (_, desc) = wh_factorize(&mm1).map_err(e)?;
    let mut worst_inv: f64 = 0.0;
    for i in 1..=100 {
        let x = f64::from(i) * 0.1;
        let got = vigon_inverse(&mm1, &desc, x).map_err(e)?;
        let want = 0.5 * (-2.0 * x).exp();
        worst_inv = worst_inv.max((got - want).abs() / want);
    }
    let catalog = [("mm1", LevyModel::mm1()), ("model_c", LevyModel::model_c()), ("two_sided", two_sided_zero_drift())];
    let mut worst_fwd: f64 = 0.0;
    for (_, m) in &catalog {
        let (asc, desc) = wh_factorize(m).map_err(e)?;
        for t in [0.5, 1.0, 2.0, 5.0] {
            worst_fwd = worst_fwd.max(vigon_forward_residual(m, &asc, &desc, t).map_err(e)?);
        }
    }
    let notes = vec![format!("inverse max rel err {worst_inv:.2e}, forward max residual {worst_fwd:.2e}")];
    verdict(worst_inv <= 1e-6 && worst_fwd < 1e-5, notes)
}

fn c3_theorem2() -> Check {
    let m = LevyModel::model_c();
    let (_, desc) = wh_factorize(&m).map_err(e)?;
    let target = kappa_eval(&desc, 1.0).map_err(e)?;
    let mut gaps = Vec::new();
    let mut ratios = Vec::new();
    for x in [10.0, 20.0, 30.0] {
        let r = pi_tail(&m, x, Side::Up).map_err(e)? / vigon_inverse(&m, &desc, x).map_err(e)?;
        ratios.push(format!("x={x}: {r:.5}"));
        gaps.push((r - target).abs());
    }
    let within = gaps[2] <= 0.02 * target;
    let trend = gaps.windows(2).all(|w| w[1] <= w[0]);
    let notes = vec![format!(
        "κ̂(1)={target:.6}; {}; rel gap at 30 = {:.4} (tol 0.02); trend {}",
        ratios.join(", "),
        gaps[2] / target,
        if trend { "nonincreasing" } else { "increasing" }
    )];
    verdict(within && trend, notes)
}

fn c4_first_passage() -> Check {
    let mm1 = LevyModel::mm1();
    let mut ok = true;
    let mut notes = Vec::new();
    for (i, x) in [1.0, 2.0, 3.0].into_iter().enumerate() {
        let r = estimate_first_passage(&mm1, x, 100_000, 41 + i as u64, Method::Tilted).map_err(e)?;
        let want = 0.5 * (-x).exp();
        let z = (r.estimate.value - want) / r.estimate.std_error;
        let rse = r.estimate.std_error / r.estimate.value;
        ok &= z.abs() <= 3.0 && rse < 0.01;
        notes.push(format!("mm1 x={x}: z={z:+.2} rse={rse:.4}"));
    }
    let mc = LevyModel::model_c();
    let r = estimate_first_passage(&mc, 4.0, 10_000_000, 97, Method::Crude).map_err(e)?;
    let want = pk_first_passage(&mc, 4.0).map_err(e)?;
    let z = (r.estimate.value - want) / r.estimate.std_error;
    let cens = r.censored as f64 / 1e7;
    ok &= z.abs() <= 3.0 && cens < 1e-3;
    notes.push(format!("model_c x=4: z={z:+.2} censored={cens:.1e}"));
    let mut worst: f64 = 0.0;
    for (m, probes) in [(&mm1, vec![1.0, 2.0, 3.0, 10.0, 50.0]), (&mc, vec![1.0, 4.0, 20.0, 50.0])] {
        let table = FirstPassageTable::new(m, 60.0).map_err(e)?;
        for x in probes {
            worst = worst.max(e0_residual(&table, x).map_err(e)?);
        }
    }
    ok &= worst < 1e-8;
    notes.push(format!("max E0 residual {worst:.2e}"));
    verdict(ok, notes)
}

fn c5_theorem1() -> Check {
    let t = theorem1_experiment(&LevyModel::mm1(), 1.0, &[2.0, 4.0, 6.0], 1_000_000, 2024).map_err(e)?;
    let mut ok = t.trend_nonincreasing;
    let mut notes = Vec::new();
    for r in &t.rows {
        ok &= r.z.abs() <= 3.0;
        notes.push(format!("x={}: ratio={:.4}±{:.4} z={:+.2}", r.x, r.ratio, r.ratio_se, r.z));
    }
    notes.push(format!("trend {}", if t.trend_nonincreasing { "ok" } else { "broken" }));
    verdict(ok, notes)
}

fn c6_theorem3() -> Check {
    let m = LevyModel::model_c();
    // E1(1), the exponential integral at 1
    let e1 = 0.219_383_934_395_520_27_f64;
    let ez = std::f64::consts::E * ((-1.0f64).exp() - e1);
    let q = (2.0 - ez) / 2.0;
    let l_ref = q / (2.0 * 0.25);
    let k = theorem_constants(&m, 1.0).map_err(e)?;
    let l = k.l.ok_or("L undefined")?;
    let mut ok = (l - l_ref).abs() <= 1e-6 * l_ref;
    let mut gaps = Vec::new();
    for x in [20.0, 35.0, 50.0] {
        let r = pk_first_passage(&m, x).map_err(e)? / pi_tail(&m, x, Side::Up).map_err(e)?;
        gaps.push((x, r, (r - l_ref).abs() / l_ref));
    }
    let within = gaps[2].2 <= 0.15;
    let shrinking = gaps.windows(2).all(|w| w[1].2 < w[0].2);
    ok &= within && shrinking;
    let rows: Vec<String> = gaps.iter().map(|(x, r, g)| format!("x={x}: {r:.4} ({:.1}%)", 100.0 * g)).collect();
    let notes = vec![format!(
        "L={l:.10} ref={l_ref:.10}; {}; gap {}",
        rows.join(", "),
        if shrinking { "shrinking" } else { "not shrinking" }
    )];
    verdict(ok, notes)
}

fn c7_salpha() -> Check {
    let tp = JumpLaw::tilted_pareto(1.0, 2.0).map_err(e)?;
    let r = conv_ratio(&tp, 40.0, 0.05).map_err(e)?;
    let ratio_ok = (r - 4.0).abs() <= 0.05 * 4.0;
    let exp2 = JumpLaw::exponential(2.0).map_err(e)?;
    let rep = salpha_check(&exp2, 1.0, &[20.0, 40.0, 80.0]);
    let exp_ok = rep.verdict == Verdict::NonMember;
    let exp1 = TailFunction::from_law(&JumpLaw::exponential(1.0).map_err(e)?);
    let xs: Vec<f64> = (1..=40).map(f64::from).collect();
    let ys: Vec<f64> = (-78..=80).map(|i| f64::from(i) * 0.5).collect();
    let a = potter_min_A(&exp1, 1.0, 0.5, &xs, &ys);
    let potter_ok = (a - 1.0).abs() <= 1e-9;
    let notes = vec![format!(
        "TiltedPareto conv ratio at 40 = {r:.4} ({:.1}% from 4, tol 5%); Exp(2) verdict {:?}; Potter A = {a:.12}",
        100.0 * (r - 4.0).abs() / 4.0,
        rep.verdict
    )];
    verdict(ratio_ok && exp_ok && potter_ok, notes)
}

fn c8_classification() -> Check {
    let cases = [
        ("brownian", LevyModel::brownian(-1.0, 1.0).map_err(e)?, RegularityCase::I, false),
        ("mm1", LevyModel::mm1(), RegularityCase::II, true),
        ("two_sided", two_sided_zero_drift(), RegularityCase::III, true),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, m, case, finite) in &cases {
        let r = classify_path_regularity(m).map_err(e)?;
        ok &= r.case == *case && r.n_finite == *finite;
        notes.push(format!("{name}: {:?} n_finite={}", r.case, r.n_finite));
    }
    let tail = estimate_excursion_tail(&LevyModel::mm1(), &[], 400_000.0, 8).map_err(e)?;
    let z = (tail.mass.value - 1.0) / tail.mass.std_error;
    ok &= z.abs() <= 3.0;
    notes.push(format!("|n̂| = {:.4}±{:.4} z={z:+.2}", tail.mass.value, tail.mass.std_error));
    verdict(ok, notes)
}

fn c9_identity_b() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, m) in [("mm1", LevyModel::mm1()), ("model_c", LevyModel::model_c())] {
        for x in [1.0, 2.0] {
            let r = identity_b_check(&m, x, 1_000_000, 313).map_err(e)?;
            ok &= r.residual.abs() < 3.0;
            notes.push(format!("{name} x={x}: {:+.2}", r.residual));
        }
    }
    verdict(ok, notes)
}

fn run_cli(threads: usize, out: &Path) -> Result<(), String> {
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/mm1.toml");
    let status = Command::new(env!("CARGO_BIN_EXE_ladderlab"))
        .arg("verify")
        .arg(&scenario)
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg(threads.to_string())
        .output()
        .map_err(e)?;
    match status.status.code() {
        Some(0) | Some(1) => Ok(()),
        _ => Err(format!("ladderlab exited with {:?}: {}", status.status, String::from_utf8_lossy(&status.stderr))),
    }
}

fn c10_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(e)?;
    let (one, eight) = (dir.path().join("t1"), dir.path().join("t8"));
    run_cli(1, &one)?;
    run_cli(8, &eight)?;
    let mut names: Vec<_> = std::fs::read_dir(&one)
        .map_err(e)?
        .filter_map(|d| d.ok().map(|d| d.file_name()))
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err("no CSVs written".into());
    }
    let mut diff = Vec::new();
    for n in &names {
        let a = std::fs::read(one.join(n)).map_err(e)?;
        let b = std::fs::read(eight.join(n)).map_err(e)?;
        if a != b {
            diff.push(n.to_string_lossy().into_owned());
        }
    }
    let notes = vec![format!("{} CSVs compared, {} differ {:?}", names.len(), diff.len(), diff)];
    verdict(diff.is_empty(), notes)
}

fn main() {
    let criteria = [
        Criterion { id: 1, title: "Cramér roots and factorization goldens", budget: Duration::from_secs(1), run: c1_goldens },
        Criterion { id: 2, title: "Vigon consistency", budget: Duration::from_secs(5), run: c2_vigon },
        Criterion { id: 3, title: "Π̄_X/Π̄_H ratio, Model C", budget: Duration::from_secs(10), run: c3_theorem2 },
        Criterion { id: 4, title: "first-passage oracle agreement", budget: Duration::from_secs(120), run: c4_first_passage },
        Criterion { id: 5, title: "excursion ratio, M/M/1", budget: Duration::from_secs(300), run: c5_theorem1 },
        Criterion { id: 6, title: "asymptotic constant L, Model C", budget: Duration::from_secs(60), run: c6_theorem3 },
        Criterion { id: 7, title: "S^(α) diagnostics", budget: Duration::from_secs(30), run: c7_salpha },
        Criterion { id: 8, title: "regularity classification and |n̂|", budget: Duration::from_secs(1), run: c8_classification },
        Criterion { id: 9, title: "identity (b) residual", budget: Duration::from_secs(120), run: c9_identity_b },
        Criterion { id: 10, title: "determinism across thread counts", budget: Duration::from_secs(120), run: c10_determinism },
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in &criteria {
        if !only.is_empty() && !only.contains(&c.id) {
            continue;
        }
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let slow = took > c.budget;
        let (pass, detail) = match outcome {
            Ok(notes) if !slow => (true, notes.join("; ")),
            Ok(notes) => (false, format!("{} [over budget {:?}]", notes.join("; "), c.budget)),
            Err(msg) => (false, msg),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {} ({:.2}s): {}",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.title,
            took.as_secs_f64(),
            detail
        );
    }
    println!("acceptance: {failed} failing");
    if failed > 0 {
        std::process::exit(1);
    }
}
