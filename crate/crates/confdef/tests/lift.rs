mod common;

use common::*;
use confdef::triple::*;

#[test]
fn lifted_conditions_converge_and_detect_faults() {
    let coarse = setup(0.05, 32);
    let fine = setup(0.025, 32);
    let rc = verify_conditions(&coarse.lt, &coarse.sf, &covering(&coarse, &fine));
    let rf = verify_conditions(&fine.lt, &fine.sf, &fine.eval);
    for ((name, a), (_, b)) in rc.differential().into_iter().zip(rf.differential()) {
        println!("{name}: {:e} -> {:e} ratio {:.2}", a.residual, b.residual, a.residual / b.residual);
        assert!(a.residual <= 10.0 * 0.05 * 0.05 && b.residual <= 10.0 * 0.025 * 0.025, "{name}");
        if a.residual > 1e-10 {
            assert!(a.residual / b.residual >= 3.5, "{name}");
        }
    }
    println!("asym {:?} -> {:?}", rc.asymmetry, rf.asymmetry);
    let base = verify_conditions(&coarse.lt, &coarse.sf, &coarse.eval);
    let mut bad = coarse.lt.clone();
    bad.perturb_psi(1, |x| 0.01 * x[0]);
    let r = verify_conditions(&bad, &coarse.sf, &coarse.eval);
    println!("vii {:e} -> {:e}", base.vii.residual, r.vii.residual);
    assert!(r.vii.residual >= 10.0 * base.vii.residual);
    let mut bad = coarse.lt.clone();
    bad.perturb_psi(0, |_| 0.01);
    let r = verify_conditions(&bad, &coarse.sf, &coarse.eval);
    println!("iv {:e} -> {:e}", base.iv[0].residual, r.iv[0].residual);
    assert!(r.iv[0].residual > 2.0 * base.iv[0].residual);
}

#[test]
fn lifted_conditions_on_twisted_gallery() {
    let t0 = std::time::Instant::now();
    let st = setup(0.05, 32);
    println!("setup {:?}", t0.elapsed());
    let r = verify_conditions(&st.lt, &st.sf, &st.eval);
    println!("{:?}", t0.elapsed());
    println!("{r:#?}");
    for (name, it) in r.differential() {
        assert!(it.residual <= 10.0 * 0.05 * 0.05, "{name}");
    }
    assert!(r.i.residual < 1e-12);
    assert!(r.ii.iter().all(|x| x.residual < 1e-12));
    assert!(r.viii_margin > 0.1 && r.ix_margin > 0.1);
    assert!(r.asymmetry.iter().all(|&x| x <= 10.0 * 0.05 * 0.05));
    let fl = flatness_check(&st.lt, &st.sf, &st.eval, 1e-8);
    println!("{fl:?}");
    assert!(fl.residual < 1e-10 && fl.flagged == 0);
}
