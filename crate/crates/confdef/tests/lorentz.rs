use confdef::grid::{Field, GridChart};
use confdef::lorentz::{edot, ldot, LightConeModel};
use proptest::prelude::*;

fn point(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, m)
}

fn model_and_pair() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
    (1usize..9).prop_flat_map(|m| (Just(m), point(m), point(m)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn psi_lands_on_the_slice((m, x, y) in model_and_pair()) {
        let md = LightConeModel::canonical(m);
        let (px, py) = (md.psi(&x), md.psi(&y));
        prop_assert!(ldot(&px, &px).abs() <= 1e-10);
        prop_assert!((ldot(&px, &md.w.0) - 1.0).abs() <= 1e-10);
        let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        prop_assert!((ldot(&px, &py) + 0.5 * edot(&d, &d)).abs() <= 1e-10);
    }

    #[test]
    fn push_forward_is_isometric((m, x, v) in model_and_pair()) {
        let md = LightConeModel::canonical(m);
        let pv = md.psi_push(&x, &v);
        prop_assert!((ldot(&pv, &pv) - edot(&v, &v)).abs() <= 1e-10 * (1.0 + edot(&v, &v)));
        prop_assert!(ldot(&pv, &md.psi(&x)).abs() <= 1e-10 * (1.0 + edot(&v, &v)));
    }

    #[test]
    fn projection_inverts_the_lift((m, x, _y) in model_and_pair(), phi in 0.1f64..10.0) {
        let md = LightConeModel::canonical(m);
        let chart = GridChart::centered(&["s"], &[5], 1.0);
        let f = Field::from_index_fn(chart.clone(), m, |_, o| o.copy_from_slice(&x));
        let p = Field::from_index_fn(chart, 1, |_, o| o[0] = phi);
        let big = md.lift_conformal(&f, &p).unwrap();
        let (g, q) = md.drop_isometric(&big).unwrap();
        for (a, b) in f.data.iter().zip(&g.data) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        prop_assert!((q.data[0] - phi).abs() <= 1e-10 * phi);
    }

    #[test]
    fn sphere_vectors_measure_distance((m, c, x) in model_and_pair(), r in 0.1f64..4.0) {
        // ⟨Ψ(x), S⟩ = (r² − |x − c|²)/(2r)
        let md = LightConeModel::canonical(m);
        let s = md.sphere(&c, r);
        let d: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
        let expected = (r * r - edot(&d, &d)) / (2.0 * r);
        prop_assert!((ldot(&md.psi(&x), &s) - expected).abs() <= 1e-10 * (1.0 + expected.abs()));
    }
}
