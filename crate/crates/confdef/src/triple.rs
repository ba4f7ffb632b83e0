//! Reconstruction of triples (D̄₁, D̄₂, ψ̄) on L² from C_s data, their lift to M,
//! and the pointwise verifiers of both condition sets.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cs::{CsCandidate, Transported};
use crate::error::{GeomError, Result};
use crate::grid::{max_over, Field, GridChart, IndexBox, Stencil};
use crate::hypersurface::{horizontal_lifts, ShapeField};
use crate::surface::{ConjugateKind, SurfaceGeometry};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TripleOptions {
    pub margin: usize,
    /// Largest admissible jump of a tracked square root between neighbours.
    pub branch_tol: f64,
    pub degenerate_tol: f64,
}

impl Default for TripleOptions {
    fn default() -> Self {
        TripleOptions { margin: 2, branch_tol: 0.5, degenerate_tol: 1e-10 }
    }
}

/// A triple on the surface chart.
///
/// `d[i]` holds D̄ᵢ as a column-major 2×2 matrix in the coordinate frame
/// {∂u, ∂v}; `psi` holds (ψ̄(∂u), ψ̄(∂v)). `tau` and `theta` store
/// (Re, Im) of the first and second root.
#[derive(Clone, Debug)]
pub struct BarTriple {
    pub kind: ConjugateKind,
    pub d: [Field; 2],
    pub psi: Field,
    pub tau: Field,
    pub theta: Field,
    /// Largest violation of the root identities.
    pub vieta: f64,
    /// ψ̄ from the second equation minus ψ̄ from the first, interior max.
    pub psi_consistency: f64,
}

impl BarTriple {
    pub fn chart(&self) -> &GridChart {
        &self.psi.chart
    }

    pub fn d_at(&self, i: usize, idx: &[usize]) -> Matrix2<f64> {
        Matrix2::from_column_slice(self.d[i].at(idx))
    }

    pub fn psi_at(&self, idx: &[usize]) -> [f64; 2] {
        let s = self.psi.at(idx);
        [s[0], s[1]]
    }
}

/// Roots τ₁, τ₂ of τ² − ατ + α/β (hyperbolic, β real) at one sample.
pub fn hyperbolic_roots(pu: f64, pv: f64, tol: f64) -> Option<(f64, f64)> {
    if pu == 0.0 || pv == 0.0 {
        return None;
    }
    let al = 2.0 + 1.0 / pu;
    let be = 2.0 + 1.0 / pv;
    let disc = al * be - 4.0;
    if !(al > tol && be > tol && disc > tol) {
        return None;
    }
    let r = (al / be * disc).sqrt();
    Some(((al - r) / 2.0, (al + r) / 2.0))
}

/// Roots τ₁, τ₂ of τ² − ατ + α/ᾱ with α = 2 + 1/φ.
pub fn elliptic_roots(phi: Complex64, tol: f64) -> Option<(Complex64, Complex64)> {
    if phi.norm() == 0.0 {
        return None;
    }
    let al = 2.0 + 1.0 / phi;
    let m = al.norm();
    if !(m > tol && 2.0 - m > tol) {
        return None;
    }
    let s = (4.0 - m * m).sqrt() / m;
    let t1 = al / 2.0 * Complex64::new(1.0, s);
    let t2 = al / 2.0 * Complex64::new(1.0, -s);
    Some((t1, t2))
}

fn c_at(f: &Field, idx: &[usize], k: usize) -> Complex64 {
    let s = f.at(idx);
    Complex64::new(s[2 * k], s[2 * k + 1])
}

/// Continuous square roots of a unit-modulus field, tracked outward from `anchor`.
fn track_sqrt(tau: &Field, k: usize, anchor: &[usize], tol: f64) -> Result<Vec<Complex64>> {
    let chart = &tau.chart;
    let (nu, nv) = (chart.axes[0].count, chart.axes[1].count);
    let mut out = vec![Complex64::new(0.0, 0.0); nu * nv];
    let pick = |i: usize, j: usize, prev: Complex64| -> Result<Complex64> {
        let r = c_at(tau, &[i, j], k).sqrt();
        let best = if (r - prev).norm() <= (-r - prev).norm() { r } else { -r };
        if (best - prev).norm() > tol {
            return Err(GeomError::BranchFlip { index: vec![i, j] });
        }
        Ok(best)
    };
    let (i0, j0) = (anchor[0], anchor[1]);
    out[i0 * nv + j0] = c_at(tau, anchor, k).sqrt();
    for j in (j0 + 1)..nv {
        out[i0 * nv + j] = pick(i0, j, out[i0 * nv + j - 1])?;
    }
    for j in (0..j0).rev() {
        out[i0 * nv + j] = pick(i0, j, out[i0 * nv + j + 1])?;
    }
    for j in 0..nv {
        for i in (i0 + 1)..nu {
            out[i * nv + j] = pick(i, j, out[(i - 1) * nv + j])?;
        }
        for i in (0..i0).rev() {
            out[i * nv + j] = pick(i, j, out[(i + 1) * nv + j])?;
        }
    }
    Ok(out)
}

/// Reconstruct (D̄₁, D̄₂, ψ̄) from a member of C_s.
pub fn reconstruct_bar_triple(cand: &CsCandidate, geo: &SurfaceGeometry, opts: &TripleOptions) -> Result<BarTriple> {
    if !cand.is_member() {
        return Err(GeomError::Stage {
            stage: "triple".into(),
            detail: format!("candidate is not a member of C_s ({:?})", cand.status),
        });
    }
    let chart = geo.chart().clone();
    let anchor = chart
        .origin()
        .ok_or_else(|| GeomError::InvalidGrid("surface chart has no node at the origin".into()))?;
    match &cand.fields {
        Transported::Hyperbolic(pu, pv) => hyperbolic_triple(pu, pv, geo, opts),
        Transported::Elliptic(pz) => elliptic_triple(pz, geo, &anchor, opts),
    }
}

fn degenerate(idx: &[usize], detail: &str) -> GeomError {
    GeomError::DegenerateCandidate { index: idx.to_vec(), detail: detail.into() }
}

fn hyperbolic_triple(pu: &Field, pv: &Field, geo: &SurfaceGeometry, opts: &TripleOptions) -> Result<BarTriple> {
    let chart = geo.chart().clone();
    // τ₁, τ₂, 1/τ₁, 1/τ₂ stored as (re, im) pairs
    let tau = Field::try_from_index_fn(chart.clone(), 8, |idx, out| {
        let (a, b) = hyperbolic_roots(pu.get(idx, 0), pv.get(idx, 0), opts.degenerate_tol)
            .ok_or_else(|| degenerate(idx, "alpha, beta or alpha*beta - 4 not positive"))?;
        out.copy_from_slice(&[a, 0.0, b, 0.0, 1.0 / a, 0.0, 1.0 / b, 0.0]);
        Ok(())
    })?;
    let mut vieta: f64 = 0.0;
    for q in 0..chart.len() {
        let (u, v) = (pu.data[q], pv.data[q]);
        let (al, be) = (2.0 + 1.0 / u, 2.0 + 1.0 / v);
        let s = tau.at_flat(q);
        vieta = vieta.max((s[0] + s[2] - al).abs() / al.abs().max(1.0));
        vieta = vieta.max((s[0] * s[2] - al / be).abs() / (al / be).abs().max(1.0));
    }
    let theta = Field::from_index_fn(chart.clone(), 4, |idx, out| {
        let s = tau.at(idx);
        out.copy_from_slice(&[s[0].sqrt(), 0.0, s[2].sqrt(), 0.0]);
    });
    let d = [0, 1].map(|k| {
        Field::from_index_fn(chart.clone(), 4, |idx, out| {
            let t = theta.get(idx, 2 * k);
            out.copy_from_slice(&[t / SQRT2, 0.0, 0.0, 1.0 / (SQRT2 * t)]);
        })
    });
    let solve = |idx: &[usize], k: usize| -> [f64; 2] {
        let (g1, g2) = geo.gamma_real(idx);
        let t12 = theta.get(idx, 0) * theta.get(idx, 2);
        let tk = tau.get(idx, 2 * k);
        let itk = tau.get(idx, 4 + 2 * k);
        let tk_v = tau.d1_at(idx, 1)[2 * k];
        let itk_u = tau.d1_at(idx, 0)[4 + 2 * k];
        let sgn = if k == 0 { 1.0 } else { -1.0 };
        [sgn * t12 * (itk_u + 2.0 * (itk - 1.0) * g2) / 2.0, sgn * (tk_v + 2.0 * (tk - 1.0) * g1) / (2.0 * t12)]
    };
    let psi = Field::from_index_fn(chart.clone(), 2, |idx, out| out.copy_from_slice(&solve(idx, 0)));
    let (psi_consistency, _) = max_over(&chart.interior(opts.margin), |idx| {
        let a = solve(idx, 0);
        let b = solve(idx, 1);
        (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
    });
    Ok(BarTriple {
        kind: ConjugateKind::Hyperbolic,
        d,
        psi,
        tau: pick_pairs(&tau),
        theta,
        vieta,
        psi_consistency,
    })
}

fn pick_pairs(tau8: &Field) -> Field {
    Field::from_index_fn(tau8.chart.clone(), 4, |idx, out| out.copy_from_slice(&tau8.at(idx)[..4]))
}

fn elliptic_triple(pz: &Field, geo: &SurfaceGeometry, anchor: &[usize], opts: &TripleOptions) -> Result<BarTriple> {
    let chart = geo.chart().clone();
    let tau = Field::try_from_index_fn(chart.clone(), 4, |idx, out| {
        let phi = c_at(pz, idx, 0);
        let (a, b) = elliptic_roots(phi, opts.degenerate_tol).ok_or_else(|| degenerate(idx, "|alpha| outside (0, 2)"))?;
        out.copy_from_slice(&[a.re, a.im, b.re, b.im]);
        Ok(())
    })?;
    let mut vieta: f64 = 0.0;
    for q in 0..chart.len() {
        let phi = Complex64::new(pz.data[2 * q], pz.data[2 * q + 1]);
        let al = 2.0 + 1.0 / phi;
        let s = tau.at_flat(q);
        let (a, b) = (Complex64::new(s[0], s[1]), Complex64::new(s[2], s[3]));
        vieta = vieta.max((a + b - al).norm()).max((a * b - al / al.conj()).norm());
        vieta = vieta.max((a.norm() - 1.0).abs()).max((b.norm() - 1.0).abs());
    }
    let th1 = track_sqrt(&tau, 0, anchor, opts.branch_tol)?;
    let th2 = track_sqrt(&tau, 1, anchor, opts.branch_tol)?;
    let nv = chart.axes[1].count;
    let theta = Field::from_index_fn(chart.clone(), 4, |idx, out| {
        let q = idx[0] * nv + idx[1];
        out.copy_from_slice(&[th1[q].re, th1[q].im, th2[q].re, th2[q].im]);
    });
    let d = [0, 1].map(|k| {
        Field::from_index_fn(chart.clone(), 4, |idx, out| {
            let t = c_at(&theta, idx, k);
            out.copy_from_slice(&[t.re / SQRT2, t.im / SQRT2, -t.im / SQRT2, t.re / SQRT2]);
        })
    });
    let solve = |idx: &[usize], k: usize| -> Complex64 {
        let gam = geo.gamma_complex(idx);
        let t12 = c_at(&theta, idx, 0) * c_at(&theta, idx, 1);
        let tk = c_at(&tau, idx, k);
        let du = tau.d1_at(idx, 0);
        let dv = tau.d1_at(idx, 1);
        let tk_zbar = (Complex64::new(du[2 * k], du[2 * k + 1]) + Complex64::i() * Complex64::new(dv[2 * k], dv[2 * k + 1])) / 2.0;
        let sgn = if k == 0 { 1.0 } else { -1.0 };
        sgn * (tk_zbar + 2.0 * (tk - 1.0) * gam) / (2.0 * t12)
    };
    let psi = Field::from_index_fn(chart.clone(), 2, |idx, out| {
        let z = solve(idx, 0);
        out.copy_from_slice(&[2.0 * z.re, 2.0 * z.im]);
    });
    let (psi_consistency, _) = max_over(&chart.interior(opts.margin), |idx| 2.0 * (solve(idx, 0) - solve(idx, 1)).norm());
    Ok(BarTriple { kind: ConjugateKind::Elliptic, d, psi, tau, theta, vieta, psi_consistency })
}

/// A residual maximum with its scale and location.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Item {
    pub residual: f64,
    pub scale: f64,
    pub at: Vec<usize>,
}

impl Item {
    fn from_max(r: (f64, Vec<usize>), scale: f64) -> Self {
        Item { residual: r.0, scale, at: r.1 }
    }
}

/// Residuals of the five surface conditions; (d) and (e) are margins.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BarReport {
    pub det: [f64; 2],
    pub vieta: f64,
    pub b: [Item; 2],
    pub c: Item,
    pub d_margin: f64,
    pub e_margin: f64,
    pub psi_consistency: f64,
}

/// Smallest of ‖D₂² − D₁²‖ and ‖D₂² + D₁²‖ (Frobenius).
pub fn pm_margin(d1: &Matrix2<f64>, d2: &Matrix2<f64>) -> f64 {
    let (a, b) = (d1 * d1, d2 * d2);
    (b - a).norm().min((b + a).norm())
}

/// Smallest singular value of D₁² + D₂² − I.
pub fn rank_margin(d1: &Matrix2<f64>, d2: &Matrix2<f64>) -> f64 {
    let m = d1 * d1 + d2 * d2 - Matrix2::identity();
    m.singular_values().min()
}

fn metric2(geo: &SurfaceGeometry, idx: &[usize]) -> Matrix2<f64> {
    let [e, f, g] = geo.efg(idx);
    Matrix2::new(e, f, f, g)
}

/// Check (a)–(e) on the interior of the surface chart.
pub fn verify_bar(t: &BarTriple, geo: &SurfaceGeometry, opts: &TripleOptions) -> BarReport {
    let chart = t.chart();
    let all = chart.full_box();
    let inner = chart.interior(opts.margin);
    let det = [0, 1].map(|i| max_over(&all, |idx| (t.d_at(i, idx).determinant() - 0.5).abs()).0);
    let b = [0usize, 1].map(|i| {
        let j = 1 - i;
        let sgn = if i == 0 { 1.0 } else { -1.0 };
        let lhs = |idx: &[usize]| -> nalgebra::Vector2<f64> {
            let d = t.d_at(i, idx);
            let du = t.d[i].d1_at(idx, 0);
            let dv = t.d[i].d1_at(idx, 1);
            // ∇_u(D∂v) − ∇_v(D∂u)
            let mut out = nalgebra::Vector2::new(du[2] - dv[0], du[3] - dv[1]);
            for c in 0..2 {
                for e in 0..2 {
                    out[c] += geo.gamma(idx, c, 0, e) * d[(e, 1)] - geo.gamma(idx, c, 1, e) * d[(e, 0)];
                }
            }
            out
        };
        let rhs = |idx: &[usize]| -> nalgebra::Vector2<f64> {
            let dj = t.d_at(j, idx);
            let [pu, pv] = t.psi_at(idx);
            (dj.column(1) * pu - dj.column(0) * pv) * sgn
        };
        let norm = |idx: &[usize], x: nalgebra::Vector2<f64>| (x.transpose() * metric2(geo, idx) * x)[0].abs().sqrt();
        let r = max_over(&inner, |idx| norm(idx, lhs(idx) - rhs(idx)));
        let s = max_over(&inner, |idx| norm(idx, lhs(idx))).0;
        Item::from_max(r, s)
    });
    let c_rhs = |idx: &[usize]| {
        let g = metric2(geo, idx);
        let (d1, d2) = (t.d_at(0, idx), t.d_at(1, idx));
        let ip = |x: nalgebra::Vector2<f64>, y: nalgebra::Vector2<f64>| (x.transpose() * g * y)[0];
        ip(d2.column(0).into(), d1.column(1).into()) - ip(d1.column(0).into(), d2.column(1).into())
    };
    let c_lhs = |idx: &[usize]| t.psi.d1_at(idx, 0)[1] - t.psi.d1_at(idx, 1)[0];
    let c = Item::from_max(
        max_over(&inner, |idx| (c_lhs(idx) - c_rhs(idx)).abs()),
        max_over(&inner, |idx| c_lhs(idx).abs().max(c_rhs(idx).abs())).0,
    );
    let d_margin = -max_over(&all, |idx| -pm_margin(&t.d_at(0, idx), &t.d_at(1, idx))).0;
    let e_margin = -max_over(&all, |idx| -rank_margin(&t.d_at(0, idx), &t.d_at(1, idx))).0;
    BarReport { det, vieta: t.vieta, b, c, d_margin, e_margin, psi_consistency: t.psi_consistency }
}

/// Normalised max-norm distance between two triples on the same chart.
pub fn triple_distance(a: &BarTriple, b: &BarTriple) -> f64 {
    let fields = |t: &BarTriple| [t.d[0].data.clone(), t.d[1].data.clone(), t.psi.data.clone()].concat();
    let (x, y) = (fields(a), fields(b));
    let num = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let den = x.iter().chain(&y).map(|p| p.abs()).fold(0.0, f64::max);
    num / den
}

/// Margins of the genuineness conditions over a set of sample pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Genuineness {
    /// min ‖D₂² ∓ D₁²‖.
    pub pm_margin: f64,
    /// min σ_min(D₁² + D₂² − I).
    pub rank_margin: f64,
    pub genuine: bool,
}

pub fn genuineness_diagnostics(pairs: &[(Matrix2<f64>, Matrix2<f64>)], tol: f64) -> Genuineness {
    let pm = pairs.iter().map(|(a, b)| pm_margin(a, b)).fold(f64::INFINITY, f64::min);
    let rk = pairs.iter().map(|(a, b)| rank_margin(a, b)).fold(f64::INFINITY, f64::min);
    Genuineness { pm_margin: pm, rank_margin: rk, genuine: pm > tol && rk > tol }
}

/// The horizontal lift of a surface triple to M.
///
/// D̄ᵢ is applied through the horizontal lifts X_u, X_v at each sample, so Dᵢ
/// annihilates the eigendistribution. ψ is stored as a coordinate one-form on
/// the region chart of the shape field it was lifted onto.
#[derive(Clone, Debug)]
pub struct LiftedTriple {
    pub bar: BarTriple,
    pub offset: Vec<usize>,
    pub psi: Field,
}

impl LiftedTriple {
    fn bar_index(&self, idx: &[usize]) -> [usize; 2] {
        [idx[0] + self.offset[0], idx[1] + self.offset[1]]
    }

    /// Dᵢ as an n×n matrix in coordinates at a region-local sample.
    pub fn d_matrix(&self, sf: &ShapeField, i: usize, idx: &[usize]) -> DMatrix<f64> {
        let n = sf.n;
        let [xu, xv] = horizontal_lifts(&sf.g(idx));
        let db = self.bar.d_at(i, &self.bar_index(idx));
        let mut m = DMatrix::zeros(n, n);
        for col in 0..2 {
            let y = &xu * db[(0, col)] + &xv * db[(1, col)];
            m.set_column(col, &y);
        }
        m
    }

    /// (A − λI)Dᵢ.
    pub fn b_matrix(&self, sf: &ShapeField, i: usize, idx: &[usize]) -> DMatrix<f64> {
        let n = sf.n;
        (sf.a(idx) - DMatrix::identity(n, n) * sf.lambda(idx)) * self.d_matrix(sf, i, idx)
    }

    pub fn psi_at(&self, idx: &[usize]) -> DVector<f64> {
        DVector::from_column_slice(self.psi.at(idx))
    }

    /// ωᵢ(X) = −⟨DᵢX, grad λ⟩/λ as a coordinate one-form.
    pub fn omega(&self, sf: &ShapeField, i: usize, idx: &[usize]) -> DVector<f64> {
        let dl = DVector::from_vec(sf.dlambda(idx));
        let d = self.d_matrix(sf, i, idx);
        -(d.transpose() * dl) / sf.lambda(idx)
    }

    /// Add `f(coords)` to coordinate component `axis` of ψ.
    pub fn perturb_psi<F: Fn(&[f64]) -> f64>(&mut self, axis: usize, f: F) {
        let chart = self.psi.chart.clone();
        for k in 0..chart.len() {
            let idx = chart.unflat(k);
            let x = chart.coords(&idx);
            self.psi.data[k * self.psi.ncomp + axis] += f(&x);
        }
    }
}

/// Lift a surface triple onto the region of a shape field.
pub fn lift_to_m(bar: &BarTriple, sf: &ShapeField) -> Result<LiftedTriple> {
    let mc = sf.chart();
    let bc = bar.chart();
    for a in 0..2 {
        let (x, y) = (&mc.axes[a], &bc.axes[a]);
        let start = y.value(sf.offset[a]);
        if (x.step - y.step).abs() > 1e-12 * y.step || (x.start - start).abs() > 1e-9 * y.step || sf.offset[a] + x.count > y.count {
            return Err(GeomError::InvalidGrid(format!("axis {a} of M does not match the surface chart")));
        }
    }
    let n = sf.n;
    let off = sf.offset.clone();
    let psi = Field::from_index_fn(mc.clone(), n, |idx, out| {
        let p = bar.psi_at(&[idx[0] + off[0], idx[1] + off[1]]);
        out[0] = p[0];
        out[1] = p[1];
    });
    Ok(LiftedTriple { bar: bar.clone(), offset: off, psi })
}

/// Christoffel matrix Γ_c with entries (a, d) = Γ^a_{cd}.
fn gamma_matrix(gam: &[f64], n: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |a, d| gam[a * n * n + c * n + d])
}

/// Coordinate derivative along `axis` of a matrix-valued sample function.
fn d1_matrix<F: Fn(&[usize]) -> DMatrix<f64>>(chart: &GridChart, idx: &[usize], axis: usize, f: &F) -> DMatrix<f64> {
    let ax = &chart.axes[axis];
    let st = Stencil::first(idx[axis], ax.count);
    let mut j = idx.to_vec();
    let mut out: Option<DMatrix<f64>> = None;
    for k in 0..st.len {
        j[axis] = (idx[axis] as isize + st.offsets[k]) as usize;
        let v = f(&j) * (st.weights[k] / ax.step);
        out = Some(match out {
            Some(o) => o + v,
            None => v,
        });
    }
    out.unwrap()
}

/// ∇_c T for a (1,1)-tensor valued sample function, c = 0..n.
fn covariant<F: Fn(&[usize]) -> DMatrix<f64>>(sf: &ShapeField, idx: &[usize], f: &F) -> Vec<DMatrix<f64>> {
    let n = sf.n;
    let gam = sf.gamma(idx);
    let t = f(idx);
    (0..n)
        .map(|c| {
            let gc = gamma_matrix(gam, n, c);
            d1_matrix(sf.chart(), idx, c, f) + &gc * &t - &t * &gc
        })
        .collect()
}

/// (∇_X T)Y from the components of ∇T.
fn apply_cov(nt: &[DMatrix<f64>], x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(y.len());
    for (c, m) in nt.iter().enumerate() {
        if x[c] != 0.0 {
            out += m * y * x[c];
        }
    }
    out
}

/// Frame coefficients of the horizontal projection of `y` onto span{X_u, X_v}.
fn horizontal_coeffs(g: &DMatrix<f64>, h: &DMatrix<f64>, y: &DVector<f64>) -> nalgebra::Vector2<f64> {
    let gram = h.transpose() * g * h;
    let c = gram.try_inverse().unwrap() * (h.transpose() * g * y);
    nalgebra::Vector2::new(c[0], c[1])
}

/// Residuals of the nine lifted conditions. (viii) and (ix) are margins.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LiftedReport {
    pub i: Item,
    pub ii: [Item; 2],
    pub iii_commutator: [Item; 2],
    pub iii_derivative: [Item; 2],
    pub iv: [Item; 2],
    pub v: [Item; 2],
    pub v_projected: [Item; 2],
    pub vi: Item,
    pub vii: Item,
    pub viii_margin: f64,
    pub ix_margin: f64,
    pub asymmetry: [f64; 2],
}

impl LiftedReport {
    /// Differential items (iii)–(vii) with their names.
    pub fn differential(&self) -> Vec<(String, &Item)> {
        let mut out = Vec::new();
        for i in 0..2 {
            out.push((format!("iii_commutator_{}", i + 1), &self.iii_commutator[i]));
            out.push((format!("iii_derivative_{}", i + 1), &self.iii_derivative[i]));
            out.push((format!("iv_{}", i + 1), &self.iv[i]));
            out.push((format!("v_{}", i + 1), &self.v[i]));
        }
        out.push(("vi".into(), &self.vi));
        out.push(("vii".into(), &self.vii));
        out
    }
}

struct Local {
    g: DMatrix<f64>,
    h: DMatrix<f64>,
    xu: DVector<f64>,
    xv: DVector<f64>,
    a: DMatrix<f64>,
    lam: f64,
    dl: DVector<f64>,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

fn local(sf: &ShapeField, idx: &[usize]) -> Local {
    let n = sf.n;
    let g = sf.g(idx);
    let gi = g.clone().try_inverse().unwrap();
    let [xu, xv] = horizontal_lifts(&g);
    let h = DMatrix::from_columns(&[xu.clone(), xv.clone()]);
    let dl = DVector::from_vec(sf.dlambda(idx));
    let grad = &gi * &dl;
    let gam = sf.gamma(idx);
    let lay = sf.layout.lambda;
    let hess = DMatrix::from_fn(n, n, |a, b| {
        let d2 = sf.data.d2_at(idx, a, b)[lay];
        d2 - (0..n).map(|c| gam[c * n * n + a * n + b] * dl[c]).sum::<f64>()
    });
    Local { a: sf.a(idx), lam: sf.lambda(idx), g, h, xu, xv, dl, grad, hess }
}

/// Evaluate (i)–(ix) on a region-local box inside the Christoffel core.
pub fn verify_conditions(lt: &LiftedTriple, sf: &ShapeField, b: &IndexBox) -> LiftedReport {
    let n = sf.n;
    let ip = |g: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>| (x.transpose() * g * y)[0];
    let gnorm = |g: &DMatrix<f64>, x: &DVector<f64>| ip(g, x, x).abs().sqrt();
    let frame = |l: &Local, m: &DMatrix<f64>| -> Matrix2<f64> {
        let c0 = horizontal_coeffs(&l.g, &l.h, &(m * &l.xu));
        let c1 = horizontal_coeffs(&l.g, &l.h, &(m * &l.xv));
        Matrix2::new(c0[0], c1[0], c0[1], c1[1])
    };
    let d_fn = |i: usize| move |j: &[usize]| lt.d_matrix(sf, i, j);
    let b_fn = |i: usize| move |j: &[usize]| lt.b_matrix(sf, i, j);

    let item = |f: &(dyn Fn(&[usize]) -> (f64, f64) + Sync)| {
        let r = max_over(b, |idx| f(idx).0);
        let s = max_over(b, |idx| f(idx).1).0;
        Item::from_max(r, s)
    };

    let i_item = item(&|idx| {
        let p = lt.psi_at(idx);
        let r = (2..n).map(|k| p[k].abs()).fold(0.0, f64::max);
        (r, p[0].abs().max(p[1].abs()))
    });
    let ii = [0, 1].map(|i| {
        item(&|idx| {
            let l = local(sf, idx);
            let d = frame(&l, &lt.d_matrix(sf, i, idx));
            ((d.determinant() - 0.5).abs(), 0.5)
        })
    });
    let iii_commutator = [0, 1].map(|i| {
        item(&|idx| {
            let l = local(sf, idx);
            let d = frame(&l, &lt.d_matrix(sf, i, idx));
            let r = sf.splitting(idx).iter().map(|c| (d * c - c * d).norm()).fold(0.0, f64::max);
            (r, d.norm())
        })
    });
    let iii_derivative = [0, 1].map(|i| {
        let f = d_fn(i);
        item(&|idx| {
            let l = local(sf, idx);
            let nd = covariant(sf, idx, &f);
            let mut r: f64 = 0.0;
            let mut s: f64 = 0.0;
            for k in 2..n {
                let mut t = DVector::zeros(n);
                t[k] = 1.0;
                let m = Matrix2::from_columns(&[
                    horizontal_coeffs(&l.g, &l.h, &apply_cov(&nd, &t, &l.xu)),
                    horizontal_coeffs(&l.g, &l.h, &apply_cov(&nd, &t, &l.xv)),
                ]);
                r = r.max(m.norm());
                s = s.max(d1_matrix(sf.chart(), idx, k, &f).norm());
            }
            (r, s)
        })
    });
    let iv = [0usize, 1].map(|i| {
        let j = 1 - i;
        let sgn = if i == 0 { 1.0 } else { -1.0 };
        let f = b_fn(i);
        item(&|idx| {
            let l = local(sf, idx);
            let nb = covariant(sf, idx, &f);
            let lhs = apply_cov(&nb, &l.xu, &l.xv) - apply_cov(&nb, &l.xv, &l.xu);
            let di = lt.d_matrix(sf, i, idx);
            let dj = lt.d_matrix(sf, j, idx);
            let gi = l.g.clone().try_inverse().unwrap();
            let dt_grad = &gi * (di.transpose() * (&l.g * &l.grad));
            let wedge = &l.xu * ip(&l.g, &l.xv, &dt_grad) - &l.xv * ip(&l.g, &l.xu, &dt_grad);
            let p = lt.psi_at(idx);
            let (pu, pv) = (p.dot(&l.xu), p.dot(&l.xv));
            let al = &l.a - DMatrix::identity(n, n) * l.lam;
            let rhs = wedge + al * (&dj * &l.xv * pu - &dj * &l.xu * pv) * sgn;
            (gnorm(&l.g, &(&lhs - rhs)), gnorm(&l.g, &lhs))
        })
    });
    let v_item = |i: usize, projected: bool| {
        let j = 1 - i;
        let sgn = if i == 0 { 1.0 } else { -1.0 };
        let f = d_fn(i);
        item(&|idx| {
            let l = local(sf, idx);
            let nd = covariant(sf, idx, &f);
            let proj = |y: DVector<f64>| if projected { &l.h * horizontal_coeffs(&l.g, &l.h, &y) } else { y };
            let di = lt.d_matrix(sf, i, idx);
            let dj = lt.d_matrix(sf, j, idx);
            let bi = lt.b_matrix(sf, i, idx);
            let p = lt.psi_at(idx);
            let (pu, pv) = (p.dot(&l.xu), p.dot(&l.xv));
            let hs = |x: &DVector<f64>, y: &DVector<f64>| (x.transpose() * &l.hess * y)[0];
            let t = (proj(apply_cov(&nd, &l.xv, &l.xu)) - proj(apply_cov(&nd, &l.xu, &l.xv))).dot(&l.dl)
                + hs(&(&di * &l.xu), &l.xv)
                - hs(&l.xu, &(&di * &l.xv))
                + sgn * pu * (&dj * &l.xv).dot(&l.dl)
                - sgn * pv * (&dj * &l.xu).dot(&l.dl);
            let r = l.lam * (ip(&l.g, &(&l.a * &l.xu), &(&bi * &l.xv)) - ip(&l.g, &(&bi * &l.xu), &(&l.a * &l.xv)));
            ((t - r).abs(), r.abs())
        })
    };
    let v = [v_item(0, false), v_item(1, false)];
    let v_projected = [v_item(0, true), v_item(1, true)];
    let dpsi = |idx: &[usize]| -> DMatrix<f64> {
        let cols: Vec<Vec<f64>> = (0..n).map(|a| lt.psi.d1_at(idx, a)).collect();
        DMatrix::from_fn(n, n, |a, bb| cols[a][bb] - cols[bb][a])
    };
    let vi = item(&|idx| {
        let dp = dpsi(idx);
        let mut r: f64 = 0.0;
        for a in 0..n {
            for k in 2..n {
                r = r.max(dp[(k, a)].abs());
            }
        }
        (r, dp.norm())
    });
    let vii = item(&|idx| {
        let l = local(sf, idx);
        let lhs = (l.xu.transpose() * dpsi(idx) * &l.xv)[0];
        let b1 = lt.b_matrix(sf, 0, idx);
        let b2 = lt.b_matrix(sf, 1, idx);
        let cm = &b1 * &b2 - &b2 * &b1;
        let rhs = ip(&l.g, &(cm * &l.xu), &l.xv);
        ((lhs - rhs).abs(), rhs.abs())
    });
    let margins = |f: &(dyn Fn(&Matrix2<f64>, &Matrix2<f64>) -> f64 + Sync)| {
        -max_over(b, |idx| {
            let l = local(sf, idx);
            let d1 = frame(&l, &lt.d_matrix(sf, 0, idx));
            let d2 = frame(&l, &lt.d_matrix(sf, 1, idx));
            -f(&d1, &d2)
        })
        .0
    };
    let viii_margin = margins(&pm_margin);
    let ix_margin = margins(&rank_margin);
    let asymmetry = [0, 1].map(|i| {
        max_over(b, |idx| {
            let gb = sf.g(idx) * lt.b_matrix(sf, i, idx);
            (&gb - gb.transpose()).abs().max()
        })
        .0
    });
    LiftedReport { i: i_item, ii, iii_commutator, iii_derivative, iv, v, v_projected, vi, vii, viii_margin, ix_margin, asymmetry }
}

/// det(A − λI)|Δ⊥ − det B₁|Δ⊥ − det B₂|Δ⊥ on a box.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Flatness {
    pub residual: f64,
    pub at: Vec<usize>,
    /// Samples where |det(A − λI)|Δ⊥| falls below the tolerance.
    pub flagged: usize,
}

pub fn flatness_check(lt: &LiftedTriple, sf: &ShapeField, b: &IndexBox, tol: f64) -> Flatness {
    let n = sf.n;
    let restrict = |idx: &[usize], m: &DMatrix<f64>| -> Matrix2<f64> {
        let g = sf.g(idx);
        let [xu, xv] = horizontal_lifts(&g);
        let h = DMatrix::from_columns(&[xu.clone(), xv.clone()]);
        Matrix2::from_columns(&[horizontal_coeffs(&g, &h, &(m * &xu)), horizontal_coeffs(&g, &h, &(m * &xv))])
    };
    let dets = |idx: &[usize]| {
        let al = sf.a(idx) - DMatrix::identity(n, n) * sf.lambda(idx);
        let a = restrict(idx, &al).determinant();
        let b1 = restrict(idx, &lt.b_matrix(sf, 0, idx)).determinant();
        let b2 = restrict(idx, &lt.b_matrix(sf, 1, idx)).determinant();
        (a, a - b1 - b2)
    };
    let (residual, at) = max_over(b, |idx| dets(idx).1.abs());
    let flagged = b.indices().iter().filter(|idx| dets(idx).0.abs() < tol).count();
    Flatness { residual, at, flagged }
}
