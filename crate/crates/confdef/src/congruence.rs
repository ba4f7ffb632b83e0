//! Sphere congruences, their de Sitter surfaces, envelope reconstruction and
//! the warped-product example surfaces.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::grid::{max_over, Axis, Field, GridChart, IndexBox};
use crate::hypersurface::{cofactor_normal, HypersurfaceChart, ShapeField};
use crate::lorentz::{axpy, ldot, lorentz_gram_schmidt, LightConeModel};
use crate::surface::{SurfaceChart, SurfaceSource};

/// Unit-speed curve α in the x1..x3 block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaCurve {
    GreatCircle,
    /// Circle of angular radius `radius` on the unit 2-sphere.
    SmallCircle { radius: f64 },
}

/// Unit-speed curve β with ⟨β, e⟩ = cos u.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaCurve {
    /// β(u) = (0, cos u, sin u).
    Planar,
    /// β(u) = cos u·e + sin u·γ(u), γ a null-speed curve of de Sitter space in
    /// the x0, x4, x5, x6 block with circle radius `r`.
    Twisted { r: f64 },
}

/// s(u,v) = β₁(u)·α(v) + (remaining components of β(u)) in 𝕃^{ambient_dim}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleSurfaceSpec {
    pub alpha: AlphaCurve,
    pub beta: BetaCurve,
    pub ambient_dim: usize,
}

impl ExampleSurfaceSpec {
    /// Great circle and planar β: the warped product over du² + cos²u dv².
    pub fn planar(ambient_dim: usize) -> Self {
        ExampleSurfaceSpec { alpha: AlphaCurve::GreatCircle, beta: BetaCurve::Planar, ambient_dim }
    }

    /// Same metric, non-vanishing second fundamental form; suitable for envelopes.
    pub fn twisted(ambient_dim: usize) -> Self {
        ExampleSurfaceSpec {
            alpha: AlphaCurve::SmallCircle { radius: 0.7 },
            beta: BetaCurve::Twisted { r: 0.5 },
            ambient_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ambient_dim < 7 {
            return Err(GeomError::Spec(format!("example surfaces need ambient dimension >= 7, got {}", self.ambient_dim)));
        }
        if let AlphaCurve::SmallCircle { radius } = self.alpha {
            if !(radius > 0.0 && radius < std::f64::consts::PI) {
                return Err(GeomError::Spec(format!("small-circle radius {radius} out of (0, pi)")));
            }
        }
        if let BetaCurve::Twisted { r } = self.beta {
            if !(r > 0.0 && r < 1.0) {
                return Err(GeomError::Spec(format!("twist radius {r} out of (0, 1)")));
            }
        }
        Ok(())
    }

    pub fn alpha(&self, v: f64) -> [f64; 3] {
        match self.alpha {
            AlphaCurve::GreatCircle => [v.cos(), v.sin(), 0.0],
            AlphaCurve::SmallCircle { radius } => {
                let s = radius.sin();
                [radius.cos(), s * (v / s).cos(), s * (v / s).sin()]
            }
        }
    }

    /// ρ(u) = ⟨β(u), e⟩.
    pub fn rho(&self, u: f64) -> f64 {
        u.cos()
    }

    /// Components of β(u) outside the α block, written into `out`.
    fn beta_rest(&self, u: f64, out: &mut [f64]) {
        match self.beta {
            BetaCurve::Planar => out[4] += u.sin(),
            BetaCurve::Twisted { r } => {
                let big = (1.0 - r * r).sqrt();
                let k = r / big;
                let s = u.sin();
                out[0] += s * big * (k * u).sinh();
                out[4] += s * r * u.cos();
                out[5] += s * r * u.sin();
                out[6] += s * big * (k * u).cosh();
            }
        }
    }

    /// Max |⟨α′,α′⟩ − 1| and |⟨β′,β′⟩ − 1| by central differences at a few samples.
    pub fn speed_residual(&self) -> f64 {
        let d = 1e-4;
        let mut r: f64 = 0.0;
        for k in -4..=4 {
            let t = 0.2 * k as f64;
            let a = |x: f64| self.alpha(x);
            let (a0, a1, a2, a3) = (a(t - 2.0 * d), a(t - d), a(t + d), a(t + 2.0 * d));
            let da: Vec<f64> = (0..3).map(|i| (a0[i] - 8.0 * a1[i] + 8.0 * a2[i] - a3[i]) / (12.0 * d)).collect();
            r = r.max((da.iter().map(|x| x * x).sum::<f64>() - 1.0).abs());
            let (su, _) = self.tangents(t, 0.0);
            r = r.max((ldot(&su, &su) - 1.0).abs());
        }
        r
    }
}

impl SurfaceSource for ExampleSurfaceSpec {
    fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    fn eval(&self, u: f64, v: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim];
        let a = self.alpha(v);
        let c = u.cos();
        for i in 0..3 {
            out[1 + i] = c * a[i];
        }
        self.beta_rest(u, &mut out);
        out
    }
}

/// A surface with metric du² + ρ(u)² dv².
pub trait WarpedSource: SurfaceSource {
    fn rho(&self, u: f64) -> f64;
}

impl WarpedSource for ExampleSurfaceSpec {
    fn rho(&self, u: f64) -> f64 {
        ExampleSurfaceSpec::rho(self, u)
    }
}

/// Isothermal reparametrisation (ũ, v) of a warped surface, ũ = ∫₀ᵘ dt/ρ(t).
#[derive(Clone, Debug)]
pub struct Isothermal<S> {
    pub base: S,
    /// Composite Simpson intervals per evaluation of ũ(u).
    pub intervals: usize,
}

impl<S: WarpedSource> Isothermal<S> {
    pub fn new(base: S) -> Self {
        Isothermal { base, intervals: 128 }
    }

    /// ũ(u) by composite Simpson.
    pub fn utilde(&self, u: f64) -> f64 {
        let n = self.intervals;
        let h = u / n as f64;
        let f = |t: f64| 1.0 / self.base.rho(t);
        let mut s = f(0.0) + f(u);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / 3.0
    }

    /// u(ũ) by Newton iteration on the quadrature.
    pub fn u_of(&self, ut: f64) -> Result<f64> {
        let mut u = ut * self.base.rho(0.0);
        for _ in 0..50 {
            let r = self.base.rho(u);
            if !(r > 0.0) {
                return Err(GeomError::Quadrature { u });
            }
            let du = (self.utilde(u) - ut) * r;
            u -= du;
            if du.abs() <= 1e-15 * (1.0 + u.abs()) {
                break;
            }
        }
        if !(self.base.rho(u) > 0.0) || (self.utilde(u) - ut).abs() > 1e-12 {
            return Err(GeomError::Quadrature { u });
        }
        Ok(u)
    }

    /// λ(ũ) with e^{λ} = ρ(u(ũ)).
    pub fn lambda(&self, ut: f64) -> Result<f64> {
        Ok(self.base.rho(self.u_of(ut)?).ln())
    }
}

impl<S: WarpedSource> SurfaceSource for Isothermal<S> {
    fn ambient_dim(&self) -> usize {
        self.base.ambient_dim()
    }

    fn eval(&self, ut: f64, v: f64) -> Vec<f64> {
        let u = self.u_of(ut).expect("isothermal chart validated before sampling");
        self.base.eval(u, v)
    }

    /// Chain rule: ∂ũ = ρ(u)·∂u.
    fn tangents(&self, ut: f64, v: f64) -> (Vec<f64>, Vec<f64>) {
        let u = self.u_of(ut).expect("isothermal chart validated before sampling");
        let r = self.base.rho(u);
        let (tu, tv) = self.base.tangents(u, v);
        (tu.into_iter().map(|x| r * x).collect(), tv)
    }
}

/// Sample the isothermal form of a warped surface on `chart`, checking that
/// the ũ range (with stencil padding) stays inside ρ > 0.
pub fn isothermal_reparam<S: WarpedSource>(base: S, chart: GridChart) -> Result<(SurfaceChart, Isothermal<S>)> {
    let iso = Isothermal::new(base);
    let a = &chart.axes[0];
    for x in [a.start - 0.01, a.end() + 0.01] {
        iso.u_of(x)?;
    }
    let s = SurfaceChart::sample(&iso, chart)?;
    Ok((s, iso))
}

/// Sample an example surface in its (u, v) coordinates, rejecting ρ ≤ 0.
pub fn example_surface(spec: &ExampleSurfaceSpec, chart: GridChart) -> Result<SurfaceChart> {
    spec.validate()?;
    for u in chart.axes[0].values() {
        if !(spec.rho(u) > 0.0) {
            return Err(GeomError::Quadrature { u });
        }
    }
    SurfaceChart::sample(spec, chart)
}

/// M-chart over a surface chart: (u, v) from the surface, then `leaf_counts`
/// centred samples at the same step on each sphere angle.
pub fn m_chart(surface: &GridChart, leaf_counts: &[usize]) -> GridChart {
    let h = surface.axes[0].step;
    let mut axes = surface.axes[..2].to_vec();
    for (k, &c) in leaf_counts.iter().enumerate() {
        axes.push(Axis::centered(&format!("t{}", k + 1), h, c));
    }
    GridChart::new(axes)
}

/// Slab t₂ = … = 0 of an M-chart with `layers` neighbour samples on each side.
pub fn slab_region(chart: &GridChart, layers: usize) -> IndexBox {
    let mut b = chart.full_box();
    for d in 3..chart.dim() {
        let mid = chart.axes[d].count / 2;
        b.lo[d] = mid.saturating_sub(layers);
        b.hi[d] = (mid + layers + 1).min(chart.axes[d].count);
    }
    b
}

/// Projection π: (u, v, t…) ↦ (u, v) of an adapted chart.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct QuotientMap;

impl QuotientMap {
    pub fn project(&self, idx: &[usize]) -> [usize; 2] {
        [idx[0], idx[1]]
    }

    /// Pull a (u, v) field back to an M-chart region, constant along leaves.
    pub fn lift(&self, f: &Field, chart: &GridChart, offset: &[usize]) -> Field {
        Field::from_index_fn(chart.clone(), f.ncomp, |idx, out| {
            out.copy_from_slice(f.at(&[idx[0] + offset[0], idx[1] + offset[1]]));
        })
    }
}

/// Per-(u,v) envelope frame.
#[derive(Clone, Debug)]
struct LeafFrame {
    e0: Vec<f64>,
    npw: f64,
    basis: Vec<Vec<f64>>,
}

/// Result of envelope reconstruction.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub hyper: HypersurfaceChart,
    /// ⟨s, w⟩ on the (u, v) chart: the congruence value of λ.
    pub lambda: Field,
    /// max |⟨Ψ∘f, s∘π⟩| over the chart.
    pub orthogonality: f64,
}

fn sigma(t: &[f64], basis: &[Vec<f64>], out: &mut [f64]) {
    let m = t.len();
    let mut prod = 1.0;
    for k in 0..m {
        axpy(prod * t[k].sin(), &basis[k + 1], out);
        prod *= t[k].cos();
    }
    axpy(prod, &basis[0], out);
}

fn leaf_frame(s: &[f64], su: &[f64], sv: &[f64], w: &[f64], order: Option<&[usize]>, nb: usize) -> Option<(LeafFrame, Vec<usize>)> {
    let gram = DMatrix::from_fn(3, 3, |i, j| {
        let v = [s, su, sv];
        ldot(v[i], v[j])
    });
    let ev = gram.symmetric_eigenvalues();
    if !(ev.min() > 1e-12) {
        return None;
    }
    let wb = lorentz_gram_schmidt(&[s.to_vec(), su.to_vec(), sv.to_vec()]);
    let proj = |y: &mut Vec<f64>| {
        for q in &wb {
            let c = ldot(y, q);
            axpy(-c, q, y);
        }
    };
    let mut pw = w.to_vec();
    proj(&mut pw);
    let nn = ldot(&pw, &pw);
    if !(nn < -1e-14) {
        return None;
    }
    let npw = (-nn).sqrt();
    let e0: Vec<f64> = pw.iter().map(|x| -x / npw).collect();
    let dim = s.len();
    let q = |k: usize| {
        let mut y = vec![0.0; dim];
        y[k] = 1.0;
        proj(&mut y);
        let c = ldot(&y, &e0);
        axpy(c, &e0, &mut y);
        y
    };
    let order: Vec<usize> = match order {
        Some(o) => o.to_vec(),
        None => {
            let mut chosen: Vec<usize> = Vec::new();
            let mut basis: Vec<Vec<f64>> = Vec::new();
            for _ in 0..nb {
                let mut best = (usize::MAX, -1.0, Vec::new());
                for k in 1..dim {
                    if chosen.contains(&k) {
                        continue;
                    }
                    let mut y = q(k);
                    for b in &basis {
                        let c = ldot(&y, b);
                        axpy(-c, b, &mut y);
                    }
                    let n = ldot(&y, &y);
                    if n > best.1 {
                        best = (k, n, y);
                    }
                }
                chosen.push(best.0);
                let n = best.1.sqrt();
                basis.push(best.2.iter().map(|x| x / n).collect());
            }
            chosen
        }
    };
    let basis = lorentz_gram_schmidt(&order.iter().map(|&k| q(k)).collect::<Vec<_>>());
    Some((LeafFrame { e0, npw, basis }, order))
}

/// Envelope of the congruence s over an M-chart whose first two axes are the
/// surface chart's; the remaining n − 2 axes are sphere angles on each leaf.
pub fn envelope_reconstruct(s: &SurfaceChart, chart: &GridChart, model: &LightConeModel) -> Result<Envelope> {
    chart.validate()?;
    let n = chart.dim();
    let dim = model.ambient_dim();
    if s.ambient_dim() != dim || dim != n + 3 {
        return Err(GeomError::Dimension { expected: n + 3, got: s.ambient_dim() });
    }
    if chart.axes[..2] != s.chart().axes[..2] {
        return Err(GeomError::InvalidGrid("M-chart (u, v) axes must match the surface chart".into()));
    }
    let sc = s.chart();
    let anchor = sc.origin().unwrap_or_else(|| sc.shape().iter().map(|c| c / 2).collect());
    let w = &model.w.0;
    let pos = &s.positions;
    let (tu, tv) = s.tangent_pair(&anchor);
    let (_, order) = leaf_frame(pos.at(&anchor), &tu, &tv, w, None, n - 1)
        .ok_or(GeomError::EnvelopeSignature { index: anchor.clone() })?;
    let mut frames = Vec::with_capacity(sc.len());
    for k in 0..sc.len() {
        let idx = sc.unflat(k);
        let (tu, tv) = s.tangent_pair(&idx);
        let (fr, _) = leaf_frame(pos.at(&idx), &tu, &tv, w, Some(&order), n - 1)
            .ok_or(GeomError::EnvelopeSignature { index: idx.clone() })?;
        frames.push(fr);
    }
    let positions = Field::from_index_fn(chart.clone(), n + 1, |idx, out| {
        let x = chart.coords(idx);
        let fr = &frames[sc.flat(&idx[..2])];
        let mut p = fr.e0.clone();
        sigma(&x[2..], &fr.basis, &mut p);
        for c in p.iter_mut() {
            *c /= fr.npw;
        }
        out.copy_from_slice(&model.to_euclidean(&p));
    });
    let lambda = Field::from_index_fn(sc.clone(), 1, |idx, o| o[0] = ldot(pos.at(idx), w));
    let mut hyper = HypersurfaceChart::new(positions)?;
    // orientation so that s = λΨ(f) + Ψ_*N at the anchor
    let m_anchor: Vec<usize> = chart.shape().iter().map(|c| c / 2).collect();
    let fa = hyper.first_jets(&m_anchor);
    let nrm = cofactor_normal(&fa);
    let f0 = hyper.positions.at(&m_anchor);
    let p = model.psi(f0);
    let sv = pos.at(&[m_anchor[0], m_anchor[1]]);
    let lam = ldot(sv, w);
    let mut r = sv.to_vec();
    axpy(-lam, &p, &mut r);
    let nref = model.c_transpose(&r);
    hyper.orientation = if nref.iter().zip(&nrm).map(|(a, b)| a * b).sum::<f64>() >= 0.0 { 1.0 } else { -1.0 };
    let orth = (0..chart.len())
        .map(|k| {
            let idx = chart.unflat(k);
            let p = model.psi(hyper.positions.at_flat(k));
            ldot(&p, pos.at(&idx[..2])).abs()
        })
        .fold(0.0, f64::max);
    Ok(Envelope { hyper, lambda, orthogonality: orth })
}

/// Max over `b` of |⟨Ψ_*f_*∂_a, s∘π⟩|: first-order envelope condition.
pub fn tangency_residual(env: &Envelope, s: &SurfaceChart, model: &LightConeModel, b: &IndexBox) -> f64 {
    let h = &env.hyper;
    max_over(b, |idx| {
        let f = h.positions.at(idx);
        let sv = s.positions.at(&idx[..2]);
        (0..h.n())
            .map(|a| ldot(&model.psi_push(f, &h.positions.d1_at(idx, a)), sv).abs())
            .fold(0.0, f64::max)
    })
    .0
}

/// S = λΨ∘f + Ψ_*N on a shape-field region, with its consistency residuals.
#[derive(Clone, Debug)]
pub struct SphereCongruence {
    pub spheres: Field,
    pub offset: Vec<usize>,
    pub report: CongruenceReport,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CongruenceReport {
    /// max |⟨S,S⟩ − 1|.
    pub unit_residual: f64,
    /// max over Δ-directions of ‖S_*T‖ (Euclidean coordinates of 𝕃).
    pub leaf_derivative: f64,
    /// max |⟨S_*X,S_*Y⟩ − ⟨(A−λI)X,(A−λI)Y⟩| over X, Y ∈ {∂u, ∂v}.
    pub metric_residual: f64,
    /// max ‖S_*Y + Ψ_*f_*(A−λI)Y − Y(λ)Ψ∘f‖ over coordinate Y.
    pub pushforward_residual: f64,
}

/// Build S on the shape-field region and measure it on region-local `b`.
pub fn build_congruence(h: &HypersurfaceChart, sf: &ShapeField, model: &LightConeModel, b: &IndexBox) -> Result<SphereCongruence> {
    let n = h.n();
    let off = sf.offset.clone();
    let glob = |idx: &[usize]| -> Vec<usize> { idx.iter().zip(&off).map(|(i, o)| i + o).collect() };
    for k in 0..sf.chart().len() {
        let idx = sf.chart().unflat(k);
        if sf.lambda(&idx).abs() < 1e-12 {
            return Err(GeomError::VanishingCurvature { index: glob(&idx) });
        }
    }
    let spheres = Field::from_index_fn(sf.chart().clone(), model.ambient_dim(), |idx, out| {
        let g = glob(idx);
        let f = h.positions.at(&g);
        let mut s = model.psi_push(f, sf.normal(idx));
        axpy(sf.lambda(idx), &model.psi(f), &mut s);
        out.copy_from_slice(&s);
    });
    let nrm = |x: &[f64]| x.iter().map(|t| t * t).sum::<f64>().sqrt();
    let unit = max_over(b, |idx| (ldot(spheres.at(idx), spheres.at(idx)) - 1.0).abs()).0;
    let leaf = max_over(b, |idx| (2..n).map(|k| nrm(&spheres.d1_at(idx, k))).fold(0.0, f64::max)).0;
    let metric = max_over(b, |idx| {
        let g = sf.g(idx);
        let al = sf.a(idx) - DMatrix::identity(n, n) * sf.lambda(idx);
        let ds = [spheres.d1_at(idx, 0), spheres.d1_at(idx, 1)];
        let mut r: f64 = 0.0;
        for x in 0..2 {
            for y in 0..2 {
                let rhs = (al.column(x).transpose() * &g * al.column(y))[0];
                r = r.max((ldot(&ds[x], &ds[y]) - rhs).abs());
            }
        }
        r
    })
    .0;
    let push = max_over(b, |idx| {
        let g = glob(idx);
        let f = h.positions.at(&g);
        let fa = h.first_jets(&g);
        let al = sf.a(idx) - DMatrix::identity(n, n) * sf.lambda(idx);
        let dl = sf.dlambda(idx);
        let p = model.psi(f);
        (0..n)
            .map(|y| {
                let mut r = spheres.d1_at(idx, y);
                let mut v = vec![0.0; n + 1];
                for c in 0..n {
                    axpy(al[(c, y)], &fa[c], &mut v);
                }
                axpy(1.0, &model.psi_push(f, &v), &mut r);
                axpy(-dl[y], &p, &mut r);
                nrm(&r)
            })
            .fold(0.0, f64::max)
    })
    .0;
    Ok(SphereCongruence {
        spheres,
        offset: off,
        report: CongruenceReport { unit_residual: unit, leaf_derivative: leaf, metric_residual: metric, pushforward_residual: push },
    })
}

/// s(u, v) = S(u, v, t₀) at the leaf sample `t0` (region-local), with the
/// max leaf dependence max ‖S(u,v,t) − S(u,v,t₀)‖.
pub fn quotient_surface(spheres: &Field, t0: &[usize], tol: f64) -> Result<(SurfaceChart, f64)> {
    let chart = &spheres.chart;
    let chart2 = GridChart::new(chart.axes[..2].to_vec());
    let at = |i: usize, j: usize| {
        let mut idx = vec![i, j];
        idx.extend_from_slice(t0);
        idx
    };
    let s = Field::from_index_fn(chart2, spheres.ncomp, |idx, out| out.copy_from_slice(spheres.at(&at(idx[0], idx[1]))));
    let dep = max_over(&chart.full_box(), |idx| {
        let a = spheres.at(idx);
        let r = s.at(&idx[..2]);
        a.iter().zip(r).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    })
    .0;
    if dep > tol {
        return Err(GeomError::NotTwoParameter { value: dep });
    }
    Ok((SurfaceChart::new(s)?, dep))
}

/// Projectability of a one-form ω (n components) on an adapted chart.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectabilityReport {
    /// max |ω(T)| over Δ-directions.
    pub vertical: f64,
    /// max |dω(T, X)| over Δ-directions T and X ∈ {∂u, ∂v}.
    pub exterior: f64,
    pub projectable: bool,
}

pub fn projectability_one_form(omega: &Field, b: &IndexBox, tol: f64) -> ProjectabilityReport {
    let n = omega.chart.dim();
    let vertical = max_over(b, |idx| (2..n).map(|t| omega.get(idx, t).abs()).fold(0.0, f64::max)).0;
    let exterior = max_over(b, |idx| {
        let mut r: f64 = 0.0;
        for t in 2..n {
            let dt = omega.d1_at(idx, t);
            for x in 0..2 {
                let dx = omega.d1_at(idx, x);
                r = r.max((dt[x] - dx[t]).abs());
            }
        }
        r
    })
    .0;
    ProjectabilityReport { vertical, exterior, projectable: vertical <= tol && exterior <= tol }
}

/// max over `b` and Δ-directions of ‖∇ʰ_T D − [D, C_T]‖ for a tensor on Δ^⊥
/// stored as 2×2 matrices (column-major, 4 components) in the frame {X_u, X_v}.
///
/// With horizontal coordinate lifts, (∇_T X)^h = −C_T X, so
/// ∇ʰ_T D = ∂_T D + [D, C_T] in that frame.
pub fn projectability_tensor(d: &Field, sf: &ShapeField, b: &IndexBox) -> f64 {
    let n = sf.n;
    max_over(b, |idx| {
        let dm = DMatrix::from_column_slice(2, 2, d.at(idx));
        let cts = sf.splitting(idx);
        let mut r: f64 = 0.0;
        for t in 2..n {
            let dt = DMatrix::from_column_slice(2, 2, &d.d1_at(idx, t));
            let c = &cts[t - 2];
            let comm = &dm * c - c * &dm;
            let lhs = dt + &comm;
            r = r.max((lhs - comm).norm());
        }
        r
    })
    .0
}
