use confdef::congruence::*;
use confdef::cs::*;
use confdef::grid::GridChart;
use confdef::surface::SurfaceGeometry;
use confdef::triple::*;

fn gallery(h: f64) -> SurfaceGeometry {
    let n = (1.6 / h).round() as usize + 1;
    let chart = GridChart::centered(&["u", "v"], &[n, n], h);
    let (s, _) = isothermal_reparam(ExampleSurfaceSpec::planar(9), chart).unwrap();
    s.geometry().unwrap()
}

fn members() -> Vec<(&'static str, CandidateSpec)> {
    let quad = BoundaryFn::Polynomial { coeffs: vec![1.0, 0.0, 1.0] };
    vec![
        ("V=k", CandidateSpec::Hyperbolic { u: quad.clone(), v: BoundaryFn::ConstV { k: 1.0 }, normalize_by_conformal_factor: true }),
        ("U", CandidateSpec::Hyperbolic { u: BoundaryFn::UFromLambda { c: 2.0, scale: 0.5 }, v: quad, normalize_by_conformal_factor: true }),
    ]
}

#[test]
fn gallery_triples_satisfy_surface_conditions() {
    let opts = TripleOptions::default();
    let mut prev: Vec<Option<(f64, f64)>> = vec![None; 2];
    for h in [0.02, 0.01] {
        let g = gallery(h);
        let mut triples = Vec::new();
        for (k, (name, spec)) in members().into_iter().enumerate() {
            let c = evaluate_candidate(&spec, &g, &CsOptions::default()).unwrap();
            let t = reconstruct_bar_triple(&c, &g, &opts).unwrap();
            let r = verify_bar(&t, &g, &opts);
            println!("h {h} {name}: {r:?}");
            let eb = r.b[0].residual.max(r.b[1].residual);
            let ec = r.c.residual;
            assert!(r.det[0] <= 1e-12 && r.det[1] <= 1e-12);
            assert!(r.vieta <= 1e-12);
            assert!(eb <= 10.0 * h * h, "{eb}");
            assert!(ec <= 10.0 * h * h, "{ec}");
            assert!(r.d_margin > 0.0 && r.e_margin > 0.0);
            if let Some((pb, pc)) = prev[k] {
                println!("ratios b {} c {}", pb / eb, pc / ec);
            }
            prev[k] = Some((eb, ec));
            triples.push(t);
        }
        let dist = triple_distance(&triples[0], &triples[1]);
        println!("distance {dist}");
        assert!(dist > 1e-3);
    }
}
