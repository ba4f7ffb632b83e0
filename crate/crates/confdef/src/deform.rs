//! Moving-frame synthesis of the codimension-two conformal deformation.
//!
//! The frame E = [F̃_*e₁ … F̃_*eₙ, μ, ξ₁, ξ₂, ζ] of 𝕃^{n+4} satisfies
//! ∂ₐE = E Ωₐ on the slab chart (u, v, t₁). Ωₐ is assembled from the metric
//! connection, the second fundamental form α̂ and the normal connection ∇̂.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::grid::{max_over, Field, GridChart, IndexBox};
use crate::hypersurface::ShapeField;
use crate::lorentz::{ldot, LightConeModel};
use crate::triple::LiftedTriple;

/// Number of slab directions carried by the frame integration.
pub const SLAB_DIMS: usize = 3;

/// Bundle data on the slab chart.
#[derive(Clone, Debug)]
pub struct FrameBundle {
    pub n: usize,
    /// (u, v, t₁) chart of the slab.
    pub chart: GridChart,
    /// Region-local index of slab sample 0.
    pub offset: Vec<usize>,
    /// Orthonormal tangent frame: component a of e_k at `a + n·k`.
    pub frame: Field,
    /// Ωₐ for the slab directions, (n+4)² components each, column-major.
    pub omega: Vec<Field>,
    /// Metric on the slab directions, 3×3 column-major.
    pub metric: Field,
    pub lambda: Field,
    /// max |g(Bᵢ X, Y) − g(X, Bᵢ Y)|.
    pub asymmetry: [f64; 2],
    /// max |ΩₐᵀG + GΩₐ|.
    pub compatibility: f64,
    /// max over leaf directions T of |ωᵢ(T)| and |T(λ)/λ|.
    pub leaf_parallel: f64,
}

impl FrameBundle {
    pub fn dim(&self) -> usize {
        self.n + 4
    }

    pub fn omega_at(&self, a: usize, idx: &[usize]) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_column_slice(d, d, self.omega[a].at(idx))
    }
}

/// Signature of the frame: (+1, …, +1, −1) with ζ last.
pub fn frame_signature(d: usize) -> DMatrix<f64> {
    let mut g = DMatrix::identity(d, d);
    g[(d - 1, d - 1)] = -1.0;
    g
}

/// Gram–Schmidt of the coordinate fields in the order t₁ … t_{n−2}, u, v.
fn orthonormal_frame(g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    let mut e: Vec<DVector<f64>> = Vec::with_capacity(n);
    for k in (2..n).chain(0..2) {
        let mut x = DVector::zeros(n);
        x[k] = 1.0;
        for p in &e {
            let c = (x.transpose() * g * p)[0];
            x -= p * c;
        }
        let s = (x.transpose() * g * &x)[0].sqrt();
        e.push(x / s);
    }
    DMatrix::from_columns(&e)
}

/// Assemble Ωₐ on the slab of a shape field. `sf.core` must be the slab.
pub fn build_bundle(sf: &ShapeField, lt: &LiftedTriple, sym_tol: f64) -> Result<FrameBundle> {
    let n = sf.n;
    let d = n + 4;
    let core = sf.core.clone();
    let chart = GridChart::new(sf.chart().sub(&core).axes[..SLAB_DIMS].to_vec());
    let offset = core.lo.clone();
    let to_region = |idx: &[usize]| {
        let mut r = offset.clone();
        for a in 0..SLAB_DIMS {
            r[a] += idx[a];
        }
        r
    };
    let frame = Field::from_index_fn(chart.clone(), n * n, |idx, out| {
        out.copy_from_slice(orthonormal_frame(&sf.g(&to_region(idx))).as_slice());
    });
    let metric = Field::from_index_fn(chart.clone(), 9, |idx, out| {
        let g = sf.g(&to_region(idx));
        for a in 0..3 {
            for b in 0..3 {
                out[a + 3 * b] = g[(a, b)];
            }
        }
    });
    let lambda = Field::from_index_fn(chart.clone(), 1, |idx, out| out[0] = sf.lambda(&to_region(idx)));
    let asymmetry = [0, 1].map(|i| {
        max_over(&chart.full_box(), |idx| {
            let gb = sf.g(&to_region(idx)) * lt.b_matrix(sf, i, &to_region(idx));
            (&gb - gb.transpose()).abs().max()
        })
        .0
    });
    if let Some(i) = (0..2).find(|&i| asymmetry[i] > sym_tol) {
        return Err(GeomError::Asymmetric { which: i + 1, value: asymmetry[i] });
    }
    let omega: Vec<Field> = (0..SLAB_DIMS)
        .map(|a| {
            Field::from_index_fn(chart.clone(), d * d, |idx, out| {
                let r = to_region(idx);
                let g = sf.g(&r);
                let e = DMatrix::from_column_slice(n, n, frame.at(idx));
                let de = DMatrix::from_column_slice(n, n, &frame.d1_at(idx, a));
                let gam = sf.gamma(&r);
                let gam_a = DMatrix::from_fn(n, n, |c, b| gam[c * n * n + a * n + b]);
                let nab = de + gam_a * &e;
                let m = e.transpose() * &g * nab;
                let m = (&m - m.transpose()) * 0.5;
                let al = sf.a(&r) - DMatrix::identity(n, n) * sf.lambda(&r);
                let shapes = [sf.a(&r), lt.b_matrix(sf, 0, &r), lt.b_matrix(sf, 1, &r), -al];
                let mut o = DMatrix::zeros(d, d);
                o.view_mut((0, 0), (n, n)).copy_from(&m);
                let ge = &g * &e;
                for (nu, t) in shapes.iter().enumerate() {
                    let x = (t.column(a).transpose() * &ge).transpose();
                    let y = (g.row(a) * t * &e).transpose();
                    let k = (x + y) * 0.5;
                    let sign = if nu == 3 { 1.0 } else { -1.0 };
                    for kk in 0..n {
                        o[(n + nu, kk)] = k[kk];
                        o[(kk, n + nu)] = sign * k[kk];
                    }
                }
                let lam = sf.lambda(&r);
                let dl = sf.dlambda(&r);
                let ell = dl[a] / lam;
                let w = [0, 1].map(|i| -lt.d_matrix(sf, i, &r).column(a).iter().zip(&dl).map(|(x, y)| x * y).sum::<f64>() / lam);
                let ps = lt.psi_at(&r)[a];
                let (mu, x1, x2, ze) = (n, n + 1, n + 2, n + 3);
                o[(x1, mu)] = -w[0];
                o[(x2, mu)] = -w[1];
                o[(ze, mu)] = -ell;
                o[(mu, x1)] = w[0];
                o[(ze, x1)] = -w[0];
                o[(x2, x1)] = ps;
                o[(mu, x2)] = w[1];
                o[(ze, x2)] = -w[1];
                o[(x1, x2)] = -ps;
                o[(mu, ze)] = -ell;
                o[(x1, ze)] = -w[0];
                o[(x2, ze)] = -w[1];
                out.copy_from_slice(o.as_slice());
            })
        })
        .collect();
    let gsig = frame_signature(d);
    let mut compatibility: f64 = 0.0;
    for om in &omega {
        let (r, _) = max_over(&chart.full_box(), |idx| {
            let o = DMatrix::from_column_slice(d, d, om.at(idx));
            (o.transpose() * &gsig + &gsig * o).abs().max()
        });
        compatibility = compatibility.max(r);
    }
    let leaf_parallel = max_over(&chart.full_box(), |idx| {
        let r = to_region(idx);
        let lam = sf.lambda(&r);
        let dl = sf.dlambda(&r);
        let mut m: f64 = 0.0;
        for i in 0..2 {
            let om = lt.omega(sf, i, &r);
            for k in 2..n {
                m = m.max(om[k].abs());
            }
        }
        for k in 2..n {
            m = m.max((dl[k] / lam).abs());
        }
        m
    })
    .0;
    Ok(FrameBundle { n, chart, offset, frame, omega, metric, lambda, asymmetry, compatibility, leaf_parallel })
}

/// Maxima of the blocks of ∂ₐΩ_b − ∂_bΩₐ + [Ωₐ, Ω_b] over the slab directions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StructureResiduals {
    pub gauss: f64,
    pub codazzi: f64,
    pub ricci: f64,
    /// The (μ, ζ) entry of the normal block.
    pub ricci_mu_zeta: f64,
    /// Location of the largest Codazzi entry.
    pub codazzi_at: Vec<usize>,
}

/// Per-sample curvature blocks: (Gauss, Codazzi, Ricci, Ricci(μ,ζ)).
pub fn curvature_blocks(b: &FrameBundle, idx: &[usize]) -> [f64; 4] {
    let n = b.n;
    let d = b.dim();
    let mut out = [0.0f64; 4];
    for a in 0..SLAB_DIMS {
        for c in (a + 1)..SLAB_DIMS {
            let da = DMatrix::from_column_slice(d, d, &b.omega[c].d1_at(idx, a));
            let dc = DMatrix::from_column_slice(d, d, &b.omega[a].d1_at(idx, c));
            let (oa, oc) = (b.omega_at(a, idx), b.omega_at(c, idx));
            let r = da - dc + &oa * &oc - &oc * &oa;
            out[0] = out[0].max(r.view((0, 0), (n, n)).abs().max());
            out[1] = out[1].max(r.view((n, 0), (4, n)).abs().max());
            out[2] = out[2].max(r.view((n, n), (4, 4)).abs().max());
            out[3] = out[3].max(r[(n, n + 3)].abs());
        }
    }
    out
}

pub fn structure_residuals(b: &FrameBundle, bx: &IndexBox) -> StructureResiduals {
    let g = max_over(bx, |idx| curvature_blocks(b, idx)[0]).0;
    let (c, at) = max_over(bx, |idx| curvature_blocks(b, idx)[1]);
    let r = max_over(bx, |idx| curvature_blocks(b, idx)[2]).0;
    let m = max_over(bx, |idx| curvature_blocks(b, idx)[3]).0;
    StructureResiduals { gauss: g, codazzi: c, ricci: r, ricci_mu_zeta: m, codazzi_at: at }
}

const GC1: f64 = 0.5 - 0.288_675_134_594_812_9;
const GC2: f64 = 0.5 + 0.288_675_134_594_812_9;

/// Cubic Lagrange interpolation of matrices at position j + c.
fn lagrange_mat(vals: &[DMatrix<f64>], j: usize, c: f64) -> DMatrix<f64> {
    let n = vals.len();
    let s = j.saturating_sub(1).min(n.saturating_sub(4));
    let x = j as f64 + c;
    let nodes: Vec<usize> = (s..(s + 4).min(n)).collect();
    let mut out = DMatrix::zeros(vals[0].nrows(), vals[0].ncols());
    for &i in &nodes {
        let w: f64 = nodes.iter().filter(|&&k| k != i).map(|&k| (x - k as f64) / (i as f64 - k as f64)).product();
        out += &vals[i] * w;
    }
    out
}

fn magnus_step(a1: &DMatrix<f64>, a2: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let th = (a1 + a2) * (h / 2.0) + (a1 * a2 - a2 * a1) * (3f64.sqrt() / 12.0 * h * h);
    th.exp()
}

/// Integrate dE = EΩ along one line from node `j0`, 4th-order Magnus.
pub fn integrate_line(e0: &DMatrix<f64>, om: &[DMatrix<f64>], j0: usize, h: f64) -> Vec<DMatrix<f64>> {
    let n = om.len();
    let mut out = vec![DMatrix::zeros(0, 0); n];
    out[j0] = e0.clone();
    for j in j0..n - 1 {
        let (a1, a2) = (lagrange_mat(om, j, GC1), lagrange_mat(om, j, GC2));
        out[j + 1] = &out[j] * magnus_step(&a1, &a2, h);
    }
    for j in (1..=j0).rev() {
        let (a1, a2) = (lagrange_mat(om, j - 1, GC2), lagrange_mat(om, j - 1, GC1));
        out[j - 1] = &out[j] * magnus_step(&a1, &a2, -h);
    }
    out
}

/// Ambient frame at the anchor: e_k ↦ axis 2+k, μ ↦ −axis 1, ξ₁, ξ₂ ↦ the
/// last two axes, ζ ↦ axis 0.
pub fn anchor_frame(n: usize) -> DMatrix<f64> {
    let d = n + 4;
    let mut e = DMatrix::zeros(d, d);
    for k in 0..n {
        e[(2 + k, k)] = 1.0;
    }
    e[(1, n)] = -1.0;
    e[(n + 2, n + 1)] = 1.0;
    e[(n + 3, n + 2)] = 1.0;
    e[(0, n + 3)] = 1.0;
    e
}

/// Sweep order of the first two slab directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    UThenV,
    VThenU,
}

/// Integrated frame on the slab chart, (n+4)² components per sample.
pub fn integrate_frame(b: &FrameBundle, sweep: Sweep) -> Result<Field> {
    let chart = &b.chart;
    let d = b.dim();
    let anchor = chart
        .origin()
        .ok_or_else(|| GeomError::InvalidGrid("slab chart has no node at the origin".into()))?;
    let (a0, a1) = match sweep {
        Sweep::UThenV => (0, 1),
        Sweep::VThenU => (1, 0),
    };
    let h = chart.steps();
    let counts = chart.shape();
    let line_oms = |a: usize, base: &[usize]| -> Vec<DMatrix<f64>> {
        let mut idx = base.to_vec();
        (0..counts[a])
            .map(|i| {
                idx[a] = i;
                b.omega_at(a, &idx)
            })
            .collect()
    };
    let first = integrate_line(&anchor_frame(b.n), &line_oms(a0, &anchor), anchor[a0], h[a0]);
    let mut out = Field::zeros(chart.clone(), d * d);
    let columns: Vec<Vec<(Vec<usize>, DMatrix<f64>)>> = (0..counts[a0])
        .into_par_iter()
        .map(|i| {
            let mut base = anchor.clone();
            base[a0] = i;
            let second = integrate_line(&first[i], &line_oms(a1, &base), anchor[a1], h[a1]);
            let mut cells = Vec::new();
            for (j, ej) in second.iter().enumerate() {
                let mut b2 = base.clone();
                b2[a1] = j;
                let third = integrate_line(ej, &line_oms(2, &b2), anchor[2], h[2]);
                for (k, ek) in third.into_iter().enumerate() {
                    let mut idx = b2.clone();
                    idx[2] = k;
                    cells.push((idx, ek));
                }
            }
            cells
        })
        .collect();
    for (idx, e) in columns.into_iter().flatten() {
        out.at_mut(&idx).copy_from_slice(e.as_slice());
    }
    Ok(out)
}

/// Result of the frame integration with its checks.
#[derive(Clone, Debug)]
pub struct DeformationResult {
    pub n: usize,
    /// F̃ on the slab chart.
    pub f_tilde: Field,
    pub frame: Field,
    pub report: DeformationReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeformationReport {
    /// max |⟨F̃, F̃⟩|.
    pub light_cone: f64,
    /// max |EᵀηE − G|.
    pub gram_drift: f64,
    /// max |F̃(u→v) − F̃(v→u)|.
    pub path_mismatch: f64,
    /// max |⟨F̃_*∂ₐ, F̃_*∂_b⟩ − g_ab| (4th-order differences, orthonormalised).
    pub isometry: f64,
    /// max |⟨F̃_*∂ₐ, ν⟩| over normal frame sections.
    pub normal_orthogonality: f64,
}

fn f_tilde_of(frame: &Field, lambda: &Field, n: usize) -> Field {
    let d = n + 4;
    Field::from_index_fn(frame.chart.clone(), d, |idx, out| {
        let e = frame.at(idx);
        let l = lambda.get(idx, 0);
        for r in 0..d {
            out[r] = (e[r + d * (n + 3)] - e[r + d * n]) / l;
        }
    })
}

/// 4th-order jets of a grid map on the slab directions, or `None` near the boundary.
fn jets4(f: &Field, idx: &[usize]) -> Option<Vec<Vec<f64>>> {
    (0..SLAB_DIMS).map(|a| f.d1_at_4(idx, a)).collect()
}

/// Largest entry of L⁻¹(M − s·g)L⁻ᵀ with g = LLᵀ.
fn orthonormal_defect(m: &DMatrix<f64>, g: &DMatrix<f64>, s: f64) -> f64 {
    let l = g.clone().cholesky().expect("slab metric must be positive definite").l();
    let li = l.try_inverse().unwrap();
    (&li * (m - g * s) * li.transpose()).abs().max()
}

/// Interior box of the slab chart where 4th-order checks are defined.
pub fn check_box(chart: &GridChart) -> IndexBox {
    chart.interior(2)
}

/// Integrate both sweeps and evaluate the integration checks.
pub fn synthesize(b: &FrameBundle, path_tol: f64) -> Result<DeformationResult> {
    let n = b.n;
    let d = b.dim();
    let e1 = integrate_frame(b, Sweep::UThenV)?;
    let e2 = integrate_frame(b, Sweep::VThenU)?;
    let f1 = f_tilde_of(&e1, &b.lambda, n);
    let f2 = f_tilde_of(&e2, &b.lambda, n);
    let path_mismatch = f1.data.iter().zip(&f2.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    if !(path_mismatch <= path_tol) {
        return Err(GeomError::PathDependence { value: path_mismatch });
    }
    let all = b.chart.full_box();
    let eta = DMatrix::from_fn(d, d, |r, c| if r != c { 0.0 } else if r == 0 { -1.0 } else { 1.0 });
    let gsig = frame_signature(d);
    let gram_drift = max_over(&all, |idx| {
        let e = DMatrix::from_column_slice(d, d, e1.at(idx));
        (e.transpose() * &eta * e - &gsig).abs().max()
    })
    .0;
    let light_cone = max_over(&all, |idx| {
        let f = f1.at(idx);
        ldot(f, f).abs()
    })
    .0;
    let inner = check_box(&b.chart);
    let isometry = max_over(&inner, |idx| {
        let j = jets4(&f1, idx).unwrap();
        let m = DMatrix::from_fn(3, 3, |a, c| ldot(&j[a], &j[c]));
        let g = DMatrix::from_column_slice(3, 3, b.metric.at(idx));
        orthonormal_defect(&m, &g, 1.0)
    })
    .0;
    let normal_orthogonality = max_over(&inner, |idx| {
        let j = jets4(&f1, idx).unwrap();
        let e = e1.at(idx);
        let mut m: f64 = 0.0;
        for nu in n..d {
            let col = &e[nu * d..(nu + 1) * d];
            for ja in &j {
                m = m.max(ldot(ja, col).abs());
            }
        }
        m
    })
    .0;
    Ok(DeformationResult {
        n,
        f_tilde: f1,
        frame: e1,
        report: DeformationReport { light_cone, gram_drift, path_mismatch, isometry, normal_orthogonality },
    })
}

/// f̃ = 𝓒(F̃) with its conformality check.
#[derive(Clone, Debug)]
pub struct Projected {
    pub f: Field,
    pub phi: Field,
    pub conformality: f64,
    pub conformality_at: Vec<usize>,
}

/// Conformality residual of a Euclidean grid map against φ²g on the slab directions.
pub fn conformality_residual(f: &Field, phi: &Field, metric: &Field) -> (f64, Vec<usize>) {
    let inner = check_box(&f.chart);
    max_over(&inner, |idx| {
        let j = jets4(f, idx).unwrap();
        let m = DMatrix::from_fn(3, 3, |a, c| j[a].iter().zip(&j[c]).map(|(x, y)| x * y).sum());
        let g = DMatrix::from_column_slice(3, 3, metric.at(idx));
        let p = phi.get(idx, 0);
        orthonormal_defect(&m, &g, p * p)
    })
}

pub fn project_deformation(r: &DeformationResult, b: &FrameBundle, model: &LightConeModel) -> Result<Projected> {
    if model.ambient_dim() != r.n + 4 {
        return Err(GeomError::Dimension { expected: r.n + 4, got: model.ambient_dim() });
    }
    let (f, phi) = model.drop_isometric(&r.f_tilde)?;
    let (conformality, conformality_at) = conformality_residual(&f, &phi, &b.metric);
    Ok(Projected { f, phi, conformality, conformality_at })
}

/// Inversion x ↦ c + r²(x − c)/|x − c|² applied to a grid map; returns the map and
/// the new conformal factor.
pub fn invert(f: &Field, phi: &Field, centre: &[f64], radius: f64) -> (Field, Field) {
    let m = f.ncomp;
    let r2 = radius * radius;
    let g = Field::from_index_fn(f.chart.clone(), m, |idx, out| {
        let x = f.at(idx);
        let q: f64 = x.iter().zip(centre).map(|(a, c)| (a - c) * (a - c)).sum();
        for k in 0..m {
            out[k] = centre[k] + r2 * (x[k] - centre[k]) / q;
        }
    });
    let p = Field::from_index_fn(f.chart.clone(), 1, |idx, out| {
        let x = f.at(idx);
        let q: f64 = x.iter().zip(centre).map(|(a, c)| (a - c) * (a - c)).sum();
        out[0] = phi.get(idx, 0) * r2 / q;
    });
    (g, p)
}

/// Relative conformality of the inverted map, using the exact Jacobian of the
/// inversion on the finite-difference jets of `f`.
pub fn relative_conformality_inverted(f: &Field, phi: &Field, metric: &Field, centre: &[f64], radius: f64) -> f64 {
    let inner = check_box(&f.chart);
    let r2 = radius * radius;
    max_over(&inner, |idx| {
        let x = f.at(idx);
        let d: Vec<f64> = x.iter().zip(centre).map(|(a, c)| a - c).collect();
        let q: f64 = d.iter().map(|t| t * t).sum();
        let jac = |v: &[f64]| -> Vec<f64> {
            let dv: f64 = d.iter().zip(v).map(|(a, b)| a * b).sum();
            v.iter().zip(&d).map(|(vi, di)| r2 / q * (vi - 2.0 * dv * di / q)).collect()
        };
        let j: Vec<Vec<f64>> = jets4(f, idx).unwrap().iter().map(|v| jac(v)).collect();
        let m = DMatrix::from_fn(3, 3, |a, c| j[a].iter().zip(&j[c]).map(|(x, y)| x * y).sum());
        let g = DMatrix::from_column_slice(3, 3, metric.at(idx));
        let p = phi.get(idx, 0) * r2 / q;
        orthonormal_defect(&m, &g, p * p) / (p * p)
    })
    .0
}

/// Conformality relative to φ²: invariant under Möbius maps up to truncation.
pub fn relative_conformality(f: &Field, phi: &Field, metric: &Field) -> f64 {
    let inner = check_box(&f.chart);
    max_over(&inner, |idx| {
        let j = jets4(f, idx).unwrap();
        let m = DMatrix::from_fn(3, 3, |a, c| j[a].iter().zip(&j[c]).map(|(x, y)| x * y).sum());
        let g = DMatrix::from_column_slice(3, 3, metric.at(idx));
        let p = phi.get(idx, 0);
        orthonormal_defect(&m, &g, p * p) / (p * p)
    })
    .0
}
