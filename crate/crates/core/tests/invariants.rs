use ladderlab_core::ladder::FirstPassageTable;
use ladderlab_core::tails::conv_tail;
use ladderlab_core::{kappa_eval, pi_tail, psi_eval, wh_factorize, JumpComponent, JumpLaw, LevyModel, Side};
use proptest::prelude::*;

fn spectrally_positive() -> impl Strategy<Value = LevyModel> {
    (0.2f64..3.0, 1.5f64..5.0, prop::bool::ANY).prop_flat_map(|(rate, mu, pareto)| {
        let mean = if pareto { rate * 0.4 } else { rate / mu };
        (mean + 0.1..mean + 3.0).prop_map(move |c| {
            let law = if pareto { JumpLaw::tilted_pareto(1.0, 2.0).unwrap() } else { JumpLaw::exponential(mu).unwrap() };
            LevyModel::compound_poisson(-c, Some(JumpComponent::new(rate, law)), None).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn psi_is_convex(m in spectrally_positive(), a in -4.0f64..0.9, b in -4.0f64..0.9) {
        let mid = psi_eval(&m, 0.5 * (a + b));
        let avg = 0.5 * (psi_eval(&m, a) + psi_eval(&m, b));
        prop_assert!(mid <= avg + 1e-12 * (1.0 + avg.abs()));
    }

    #[test]
    fn kappa_nondecreasing_and_concave(m in spectrally_positive(), a in 0.0f64..5.0, d in 0.01f64..2.0) {
        let (asc, desc) = wh_factorize(&m).unwrap();
        for l in [&asc, &desc] {
            let k0 = kappa_eval(l, a).unwrap();
            let k1 = kappa_eval(l, a + d).unwrap();
            let k2 = kappa_eval(l, a + 2.0 * d).unwrap();
            prop_assert!(k1 >= k0 - 1e-10);
            prop_assert!(k1 - k0 >= k2 - k1 - 1e-8);
        }
    }

    #[test]
    fn first_passage_nonincreasing(m in spectrally_positive()) {
        let table = FirstPassageTable::new(&m, 20.0).unwrap();
        let mut prev = 1.0;
        for i in 0..=40 {
            let p = table.eval(f64::from(i) * 0.5).unwrap();
            prop_assert!(p <= prev * (1.0 + 1e-10));
            prop_assert!(p > 0.0);
            prev = p;
        }
    }

    #[test]
    fn convolution_tail_dominates(mu in 0.3f64..4.0, x in 0.5f64..40.0, pareto in prop::bool::ANY) {
        let law = if pareto { JumpLaw::tilted_pareto(mu, 1.0 + mu).unwrap() } else { JumpLaw::exponential(mu).unwrap() };
        let c = conv_tail(&law, x, 0.05).unwrap();
        prop_assert!(c >= law.survival(x));
    }

    #[test]
    fn levy_tail_monotone(m in spectrally_positive(), x in 0.01f64..30.0, dx in 0.0f64..5.0) {
        let a = pi_tail(&m, x, Side::Up).unwrap();
        let b = pi_tail(&m, x + dx, Side::Up).unwrap();
        prop_assert!(b <= a);
    }
}
