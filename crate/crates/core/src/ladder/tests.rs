use super::*;
use crate::law::JumpLaw;
use crate::model::{JumpComponent, LevyModel};

fn two_sided(drift: f64) -> LevyModel {
    LevyModel::compound_poisson(
        drift,
        Some(JumpComponent::new(1.0, JumpLaw::exponential(2.0).unwrap())),
        Some(JumpComponent::new(1.5, JumpLaw::exponential(1.0).unwrap())),
    )
    .unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}

#[test]
fn mm1_ladders() {
    let (asc, desc) = wh_factorize(&LevyModel::mm1()).unwrap();
    assert!((asc.q - 0.5).abs() < 1e-12);
    assert_eq!(asc.measure, LadderMeasure::Exponential { mass: 0.5, rate: 2.0 });
    assert_eq!((desc.q, desc.d), (0.0, 1.0));
    assert!((kappa_eval(&asc, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!(kappa_eval(&asc, -1.0).unwrap().abs() < 1e-12);
    assert!((kappa_eval(&desc, 1.0).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn factorisation_identity_on_catalog() {
    let models = [
        LevyModel::mm1(),
        LevyModel::model_c(),
        LevyModel::brownian(-1.0, 1.0).unwrap(),
        two_sided(-0.5),
        two_sided(0.0),
    ];
    for m in &models {
        let (asc, desc) = wh_factorize(m).unwrap();
        for lambda in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let psi = crate::model::psi_eval(m, lambda);
            let prod = kappa_eval(&asc, -lambda).unwrap() * kappa_eval(&desc, lambda).unwrap();
            assert!((-psi - prod).abs() / psi.abs() < 1e-8, "{m:?} λ={lambda}: {psi} vs {prod}");
        }
    }
}

#[test]
fn brownian_ladders() {
    let (asc, desc) = wh_factorize(&LevyModel::brownian(-1.0, 1.0).unwrap()).unwrap();
    assert!(close(kappa_eval(&asc, 1.0).unwrap() / kappa_eval(&asc, 0.0).unwrap(), 1.5, 1e-14));
    assert_eq!(kappa_eval(&desc, 0.0).unwrap(), 0.0);
}

#[test]
fn model_c_killing_rate() {
    let (asc, _) = wh_factorize(&LevyModel::model_c()).unwrap();
    // q = (2 − e·E₂(1))/2
    let ez = std::f64::consts::E * 0.14849550677592205;
    assert!(close(asc.q, (2.0 - ez) / 2.0, 1e-10), "{}", asc.q);
}

#[test]
fn positive_drift_two_sided_is_outside_catalog() {
    assert!(matches!(wh_factorize(&two_sided(0.5)), Err(LabError::UnsupportedModel(_))));
}

#[test]
fn kappa_diverges_beyond_exponential_moments() {
    let (asc, _) = wh_factorize(&LevyModel::mm1()).unwrap();
    assert!(matches!(kappa_eval(&asc, -2.5), Err(LabError::Divergence(_))));
    let (asc, _) = wh_factorize(&LevyModel::model_c()).unwrap();
    assert!(matches!(kappa_eval(&asc, -1.5), Err(LabError::Divergence(_))));
}

#[test]
fn vigon_inverse_mm1() {
    let m = LevyModel::mm1();
    let (_, desc) = wh_factorize(&m).unwrap();
    for x in [0.25, 1.0, 5.0, 10.0] {
        assert!(close(vigon_inverse(&m, &desc, x).unwrap(), 0.5 * (-2.0 * x).exp(), 1e-10));
    }
}

#[test]
fn vigon_round_trip() {
    for m in [LevyModel::mm1(), LevyModel::model_c(), two_sided(-0.5), two_sided(0.0)] {
        let (asc, desc) = wh_factorize(&m).unwrap();
        for t in [0.5, 1.0, 5.0] {
            let r = vigon_forward_residual(&m, &asc, &desc, t).unwrap();
            assert!(r < 1e-5, "{m:?} t={t}: {r}");
        }
    }
    let bm = LevyModel::brownian(-1.0, 1.0).unwrap();
    let (a, d) = wh_factorize(&bm).unwrap();
    assert!(matches!(vigon_forward_residual(&bm, &a, &d, 1.0), Err(LabError::NotApplicable(_))));
}

#[test]
fn two_sided_vigon_inverse_matches_ladder() {
    for drift in [-0.5, 0.0] {
        let m = two_sided(drift);
        let (asc, desc) = wh_factorize(&m).unwrap();
        for x in [0.5, 2.0] {
            assert!(close(vigon_inverse(&m, &desc, x).unwrap(), asc.pi_tail(x), 1e-9));
        }
    }
}

#[test]
fn renewal_density_inverts_kappa() {
    let (_, desc) = wh_factorize(&two_sided(-0.5)).unwrap();
    let v = RenewalDensity::from_ladder(&desc).unwrap();
    for lambda in [0.5, 1.0, 3.0] {
        assert!(close(v.laplace(lambda) * kappa_eval(&desc, lambda).unwrap(), 1.0, 1e-12));
    }
}

#[test]
fn renewal_grid_totals() {
    let (asc, desc) = wh_factorize(&LevyModel::mm1()).unwrap();
    let g = renewal_measure(&asc, 30.0, DEFAULT_RENEWAL_STEP).unwrap();
    assert!(close(*g.values.last().unwrap(), 2.0, 1e-4));
    assert_eq!(g.total, 2.0);
    let g = renewal_measure(&desc, 10.0, DEFAULT_RENEWAL_STEP).unwrap();
    assert!(close(g.at(7.3), 7.3, 1e-12));
    assert!(g.values.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn renewal_grid_transform_for_model_c() {
    let (asc, _) = wh_factorize(&LevyModel::model_c()).unwrap();
    let g = renewal_measure(&asc, 40.0, DEFAULT_RENEWAL_STEP).unwrap();
    let k1 = kappa_eval(&asc, 1.0).unwrap();
    assert!(close(g.laplace(1.0), 1.0 / k1, 1e-3));
    assert!(close(*g.values.last().unwrap(), 1.0 / asc.q, 1e-4));
}

#[test]
fn coarse_step_is_rejected() {
    let (asc, _) = wh_factorize(&LevyModel::mm1()).unwrap();
    assert!(matches!(renewal_measure(&asc, 30.0, 2.5), Err(LabError::Step(_))));
}

#[test]
fn first_passage_goldens() {
    let mm1 = LevyModel::mm1();
    assert!(close(pk_first_passage(&mm1, 2.0).unwrap(), 0.5 * (-2.0_f64).exp(), 1e-9));
    assert!(close(pk_first_passage(&mm1, 0.0).unwrap(), 0.5, 1e-12));
    let bm = LevyModel::brownian(-1.0, 1.0).unwrap();
    assert!(close(pk_first_passage(&bm, 3.0).unwrap(), (-6.0_f64).exp(), 1e-12));
    let c = LevyModel::model_c();
    let (asc, _) = wh_factorize(&c).unwrap();
    assert!(close(pk_first_passage(&c, 0.0).unwrap(), 1.0 - asc.q, 1e-12));
}

#[test]
fn two_sided_first_passage_closed_form() {
    // Ψ(x) = (1 − q)·e^{−qηx/(q+m)·…}: for an exponential ladder Ψ(x) = (m/(q+m)) e^{−k x}, k = qη/(q+m)
    let m = two_sided(-0.5);
    let (asc, _) = wh_factorize(&m).unwrap();
    let LadderMeasure::Exponential { mass, rate } = asc.measure else { panic!() };
    let k = asc.q * rate / (asc.q + mass);
    for x in [0.0, 1.0, 5.0] {
        let want = mass / (asc.q + mass) * (-k * x).exp();
        assert!(close(pk_first_passage(&m, x).unwrap(), want, 1e-9));
    }
}

#[test]
fn e0_residual_is_tiny() {
    for m in [LevyModel::mm1(), LevyModel::model_c()] {
        let t = FirstPassageTable::new(&m, 12.0).unwrap();
        for x in [0.5, 1.0, 4.0, 10.0] {
            assert!(e0_residual(&t, x).unwrap() < 1e-8);
        }
    }
    let t = FirstPassageTable::new(&LevyModel::brownian(-1.0, 1.0).unwrap(), 5.0).unwrap();
    assert!(matches!(e0_residual(&t, 1.0), Err(LabError::NotApplicable(_))));
}

#[test]
fn theorem_constants_model_c() {
    let tc = theorem_constants(&LevyModel::model_c(), 1.0).unwrap();
    assert!(close(tc.kappa_hat_alpha, 2.0, 1e-14));
    assert!(close(tc.kappa_neg_alpha, 0.5, 1e-14));
    assert!(close(tc.q, 0.7981736811615971, 1e-10));
    assert!(close(tc.l.unwrap(), 1.5963473623231943, 1e-10));
    assert_eq!(tc.iglehart_factor, None);
}

#[test]
fn theorem_constants_cramer_case() {
    let tc = theorem_constants(&LevyModel::mm1(), 1.0).unwrap();
    assert_eq!(tc.kappa_neg_alpha, 0.0);
    assert_eq!(tc.l, None);
    assert!(close(tc.kappa_hat_alpha, 1.0, 1e-14));
    assert!(close(tc.iglehart_factor.unwrap(), 0.5, 1e-12));
}
