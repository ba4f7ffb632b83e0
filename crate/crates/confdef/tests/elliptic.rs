use confdef::cs::*;
use confdef::grid::GridChart;
use confdef::surface::{ConjugateKind, SurfaceChart, SurfaceGeometry, SurfaceSource};
use confdef::triple::*;
use num_complex::Complex64;

/// Clifford torus in the unit sphere of the spacelike block, optionally in
/// coordinates rotated by 45°.
struct Clifford {
    rotated: bool,
}

impl SurfaceSource for Clifford {
    fn ambient_dim(&self) -> usize {
        5
    }
    fn eval(&self, a: f64, b: f64) -> Vec<f64> {
        let (u, v) = if self.rotated { (a + b, a - b) } else { (a, b) };
        let r = std::f64::consts::FRAC_1_SQRT_2;
        vec![0.0, r * u.cos(), r * u.sin(), r * v.cos(), r * v.sin()]
    }
}

#[test]
fn clifford_torus_coordinates_are_classified() {
    let h = 0.05;
    let chart = GridChart::centered(&["u", "v"], &[15, 15], h);
    for (rotated, kind) in [(false, ConjugateKind::Hyperbolic), (true, ConjugateKind::Elliptic)] {
        let s = SurfaceChart::sample(&Clifford { rotated }, chart.clone()).unwrap();
        let geo = s.geometry().unwrap();
        let cs = s.classify_conjugate(&geo, 10.0 * h * h);
        assert_eq!(cs.kind, kind, "{cs:?}");
        assert_eq!(cs.j_square_residual, 0.0);
    }
}

#[test]
fn constant_seed_on_flat_chart() {
    let phi = Complex64::new(-1.0, 0.3);
    let chart = GridChart::centered(&["u", "v"], &[21, 21], 0.05);
    let geo = SurfaceGeometry::from_fn(chart, |_| ([1.0, 0.0, 1.0], [0.0; 8]));
    let spec = CandidateSpec::Elliptic { zeta: ZetaFn { coeffs: vec![[phi.re, phi.im]] } };
    let mut cand = evaluate_candidate(&spec, &geo, &CsOptions::default()).unwrap();
    // constant ρ = √(−4 Re φ − 1) leaves Q(ρ) = ρ(E + G)/4
    let rho = (-(4.0 * phi.re + 1.0)).sqrt();
    assert_eq!(cand.status, CsStatus::NonMember);
    assert!((cand.residual - rho / 2.0).abs() < 1e-12);

    cand.status = CsStatus::Member;
    let opts = TripleOptions::default();
    let t = reconstruct_bar_triple(&cand, &geo, &opts).unwrap();
    assert_eq!(t.kind, ConjugateKind::Elliptic);
    let r = verify_bar(&t, &geo, &opts);
    assert!(r.det.iter().all(|&d| d < 1e-14) && r.vieta < 1e-14, "{r:?}");
    assert!(r.b.iter().all(|b| b.residual < 1e-13) && r.psi_consistency < 1e-13);
    for k in 0..t.psi.data.len() {
        assert!(t.psi.data[k].abs() < 1e-13);
    }
    // roots of τ² − ατ + α/ᾱ by the quadratic formula
    let al = 2.0 + 1.0 / phi;
    let disc = (al * al - 4.0 * al / al.conj()).sqrt();
    let (t1, t2) = ((al - disc) / 2.0, (al + disc) / 2.0);
    let expected = (t1.sqrt().conj() * t2.sqrt()).im.abs();
    assert!((r.c.residual - expected).abs() < 1e-12, "{} vs {expected}", r.c.residual);
    assert!(r.d_margin > 0.1 && r.e_margin > 0.1);
}
