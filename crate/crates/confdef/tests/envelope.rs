use confdef::congruence::*;
use confdef::grid::GridChart;
use confdef::hypersurface::{splitting_report, symmetry_residual, ShapeOptions};
use confdef::lorentz::LightConeModel;

#[test]
fn twisted_envelope_has_multiplicity_four() {
    let h = 0.05;
    let model = LightConeModel::canonical(7);
    let sc = GridChart::centered(&["u", "v"], &[14, 14], h);
    let (s, _) = isothermal_reparam(ExampleSurfaceSpec::twisted(9), sc.clone()).unwrap();
    let mc = m_chart(&sc, &[6, 5, 5, 5]);
    let env = envelope_reconstruct(&s, &mc, &model).unwrap();
    assert!(env.orthogonality < 1e-10, "{}", env.orthogonality);
    let region = slab_region(&mc, 1);
    let sf = env.hyper.geometry(&region, &ShapeOptions::default()).unwrap();
    let inner = sf.chart().interior(2).pin(3, 1).pin(4, 1).pin(5, 1);
    let glob = |b: &confdef::grid::IndexBox| {
        let mut g = b.clone();
        for d in 0..6 {
            g.lo[d] += region.lo[d];
            g.hi[d] += region.lo[d];
        }
        g
    };
    let tang = tangency_residual(&env, &s, &model, &glob(&inner));
    assert!(tang < 10.0 * h * h, "{tang}");
    let mut rel: f64 = 0.0;
    for idx in inner.indices() {
        let l = env.lambda.get(&idx[..2], 0);
        rel = rel.max((sf.lambda(&idx) - l).abs() / l.abs());
    }
    assert!(rel < 1e-3, "{rel}");
    assert!(symmetry_residual(&sf, &inner) < 10.0 * h * h);
    let rep = splitting_report(&sf, &inner, 1e-3, false);
    assert!(!rep.surface_like, "{rep:?}");
    let cg = build_congruence(&env.hyper, &sf, &model, &inner).unwrap();
    println!("{:?} tang {tang} rel {rel} split {rep:?}", cg.report);
    assert!(cg.report.unit_residual < 1e-10);
    assert!(cg.report.leaf_derivative < 10.0 * h * h);
    assert!(cg.report.metric_residual < 10.0 * h * h);
    assert!(cg.report.pushforward_residual < 10.0 * h * h);
}
