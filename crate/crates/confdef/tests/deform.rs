mod common;

use common::*;
use confdef::deform::*;
use confdef::lorentz::LightConeModel;

#[test]
fn deformation_on_twisted_gallery() {
    let h = 0.05;
    let bar = 10.0 * h * h;
    let st = setup(h, 32);
    let b = build_bundle(&st.sf, &st.lt, bar).unwrap();
    assert!(b.compatibility <= 1e-12);
    assert!(b.leaf_parallel <= bar);
    let sr = structure_residuals(&b, &check_box(&b.chart));
    println!("{sr:?}");
    assert!(sr.gauss <= bar && sr.codazzi <= bar && sr.ricci <= bar);
    assert!(sr.ricci_mu_zeta <= 1e-5);
    let r = synthesize(&b, bar).unwrap();
    println!("{:?}", r.report);
    assert!(r.report.light_cone <= 1e-6);
    assert!(r.report.gram_drift <= 1e-8);
    assert!(r.report.path_mismatch <= bar);
    assert!(r.report.isometry <= bar);
    assert!(r.report.normal_orthogonality <= bar);
    let model = LightConeModel::canonical(st.sf.n + 2);
    let p = project_deformation(&r, &b, &model).unwrap();
    println!("conformality {:e}", p.conformality);
    assert!(p.conformality <= bar);
    let centre = [3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let rel = relative_conformality(&p.f, &p.phi, &b.metric);
    let exact = relative_conformality_inverted(&p.f, &p.phi, &b.metric, &centre, 1.0);
    let (fi, pi) = invert(&p.f, &p.phi, &centre, 1.0);
    let sampled = relative_conformality(&fi, &pi, &b.metric);
    println!("relative {rel:e} inverted {exact:e} resampled {sampled:e}");
    assert!((rel - exact).abs() <= 1e-8);
    assert!((rel - sampled).abs() <= bar);
}

#[test]
fn codazzi_spike_marks_corrupted_sample() {
    let h = 0.05;
    let mut st = setup(h, 32);
    let clean = build_bundle(&st.sf, &st.lt, 1.0).unwrap();
    let base = structure_residuals(&clean, &check_box(&clean.chart)).codazzi;
    let target = [16usize, 12usize];
    let d = st.lt.bar.d[0].at_mut(&target);
    // D + 0.01·J with J = [[0, −1], [1, 0]] in column-major order
    d[1] += 0.01;
    d[2] -= 0.01;
    let b = build_bundle(&st.sf, &st.lt, 1.0).unwrap();
    let sr = structure_residuals(&b, &check_box(&b.chart));
    println!("{sr:?}");
    let at = &sr.codazzi_at;
    assert!(at[0].abs_diff(target[0]) <= 1 && at[1].abs_diff(target[1]) <= 1, "{at:?}");
    assert!(sr.codazzi > 1.5 * base, "{base}");
}
