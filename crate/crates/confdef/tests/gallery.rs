use confdef::congruence::*;
use confdef::cs::*;
use confdef::grid::GridChart;

fn gallery(h: f64) -> (confdef::surface::SurfaceChart, confdef::surface::SurfaceGeometry) {
    let n = (1.6 / h).round() as usize + 1;
    let chart = GridChart::centered(&["u", "v"], &[n, n], h);
    let (s, _) = isothermal_reparam(ExampleSurfaceSpec::planar(9), chart).unwrap();
    let g = s.geometry().unwrap();
    (s, g)
}

#[test]
fn christoffels_converge() {
    let mut prev = None;
    for h in [0.04, 0.02, 0.01] {
        let (s, g) = gallery(h);
        let b = s.chart().interior(2);
        let mut e1: f64 = 0.0;
        let mut e2: f64 = 0.0;
        for idx in b.indices() {
            let x = s.chart().coords(&idx);
            let (g1, g2) = g.gamma_real(&idx);
            e1 = e1.max(g1.abs());
            e2 = e2.max((g2 + x[0].tanh()).abs());
        }
        println!("h {h} e1 {e1:e} e2 {e2:e} ratio {:?}", prev.map(|p: f64| p / e2));
        assert!(e2 <= 10.0 * h * h);
        prev = Some(e2);
    }
}

#[test]
fn membership_verdicts() {
    let (_, g) = gallery(0.01);
    let opts = CsOptions::default();
    let cases = [
        ("V=k", BoundaryFn::Polynomial { coeffs: vec![1.0, 0.0, 1.0] }, BoundaryFn::ConstV { k: 1.0 }),
        ("U half", BoundaryFn::UFromLambda { c: 2.0, scale: 0.5 }, BoundaryFn::Polynomial { coeffs: vec![1.0, 0.0, 1.0] }),
        ("U literal", BoundaryFn::UFromLambda { c: 2.0, scale: 1.0 }, BoundaryFn::Polynomial { coeffs: vec![1.0, 0.0, 1.0] }),
        ("non", BoundaryFn::Polynomial { coeffs: vec![1.0, 0.0, 1.0] }, BoundaryFn::Polynomial { coeffs: vec![1.0, 0.0, 1.0] }),
    ];
    for (name, u, v) in cases {
        let spec = CandidateSpec::Hyperbolic { u, v, normalize_by_conformal_factor: true };
        let c = evaluate_candidate(&spec, &g, &opts).unwrap();
        println!("{name}: {:?} res {:e} thr {:e}", c.status, c.residual, c.threshold);
    }
}
