#![allow(dead_code)]

use confdef::congruence::*;
use confdef::cs::*;
use confdef::grid::{GridChart, IndexBox};
use confdef::hypersurface::{ShapeField, ShapeOptions};
use confdef::lorentz::LightConeModel;
use confdef::triple::*;

pub fn u_member() -> CandidateSpec {
    CandidateSpec::Hyperbolic {
        u: BoundaryFn::UFromLambda { c: 2.0, scale: 0.5 },
        v: BoundaryFn::Polynomial { coeffs: vec![1.0, 0.0, 1.0] },
        normalize_by_conformal_factor: true,
    }
}

pub struct Setup {
    pub sf: ShapeField,
    pub lt: LiftedTriple,
    pub eval: IndexBox,
}

pub fn setup(h: f64, n: usize) -> Setup {
    let model = LightConeModel::canonical(7);
    let sc = GridChart::centered(&["u", "v"], &[n, n], h);
    let (s, _) = isothermal_reparam(ExampleSurfaceSpec::twisted(9), sc.clone()).unwrap();
    let geo = s.geometry().unwrap();
    let cand = evaluate_candidate(&u_member(), &geo, &CsOptions::default()).unwrap();
    let bar = reconstruct_bar_triple(&cand, &geo, &TripleOptions::default()).unwrap();
    let mc = m_chart(&sc, &[8, 5, 5, 5]);
    let env = envelope_reconstruct(&s, &mc, &model).unwrap();
    let region = slab_region(&mc, 1);
    let rc = mc.sub(&region);
    let core = rc.full_box().pin(3, 1).pin(4, 1).pin(5, 1);
    let sf = env.hyper.geometry_with_core(&region, &core, &ShapeOptions::default()).unwrap();
    let lt = lift_to_m(&bar, &sf).unwrap();
    let mut eval = core.clone();
    for d in 0..3 {
        eval.lo[d] = 2;
        eval.hi[d] = rc.axes[d].count - 2;
    }
    Setup { sf, lt, eval }
}

/// Coarse-grid box covering the coordinates of a fine-grid box.
pub fn covering(coarse: &Setup, fine: &Setup) -> IndexBox {
    let cc = coarse.sf.chart();
    let fc = fine.sf.chart();
    let mut b = coarse.eval.clone();
    for d in 0..3 {
        let lo = fc.axes[d].value(fine.eval.lo[d]);
        let hi = fc.axes[d].value(fine.eval.hi[d] - 1);
        let ax = &cc.axes[d];
        b.lo[d] = (0..ax.count).find(|&i| ax.value(i) >= lo - 1e-12).unwrap();
        b.hi[d] = (0..ax.count).rev().find(|&i| ax.value(i) <= hi + 1e-12).unwrap() + 1;
    }
    b
}
