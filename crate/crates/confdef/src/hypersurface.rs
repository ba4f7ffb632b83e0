//! Grid-sampled hypersurfaces f: Mⁿ → ℝⁿ⁺¹ in adapted charts (u, v, t₁, …, t_{n−2}).
//!
//! The eigendistribution Δ of the multiplicity-(n−2) principal curvature is the
//! span of the trailing coordinate fields.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::grid::{max_over, Field, GridChart, IndexBox};

/// Thresholds for the shape-operator stage.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapeOptions {
    /// Cluster spread must not exceed `rel_gap` times the gap to the other eigenvalues.
    pub rel_gap: f64,
    /// Upper bound on the condition number of the induced metric.
    pub max_cond: f64,
}

impl Default for ShapeOptions {
    fn default() -> Self {
        ShapeOptions { rel_gap: 1e-2, max_cond: 1e8 }
    }
}

/// f sampled on an n-dimensional chart, together with a normal orientation sign.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypersurfaceChart {
    pub positions: Field,
    pub orientation: f64,
}

/// Shape data at one sample.
#[derive(Clone, Debug)]
pub struct PointShape {
    pub g: DMatrix<f64>,
    pub normal: Vec<f64>,
    pub ii: DMatrix<f64>,
    pub a: DMatrix<f64>,
    /// Eigenvalues of A in ascending order.
    pub eigenvalues: Vec<f64>,
    pub cond: f64,
}

/// Index range `[start, start + n − 2)` of the tightest window of `n − 2` sorted eigenvalues.
fn cluster(eig: &[f64], mult: usize) -> (usize, f64, f64, f64) {
    let n = eig.len();
    let mut best = (0, f64::INFINITY);
    for s in 0..=n - mult {
        let w = eig[s + mult - 1] - eig[s];
        if w < best.1 {
            best = (s, w);
        }
    }
    let s = best.0;
    let lam = eig[s..s + mult].iter().sum::<f64>() / mult as f64;
    let spread = eig[s..s + mult].iter().map(|e| (e - lam).abs()).fold(0.0, f64::max);
    let gap = eig[..s]
        .iter()
        .chain(&eig[s + mult..])
        .map(|e| (e - lam).abs())
        .fold(f64::INFINITY, f64::min);
    (s, lam, spread, gap)
}

/// Multiplicity-(n−2) eigenvalue of a sorted spectrum: (λ, spread, gap).
pub fn principal_cluster(eig: &[f64]) -> (f64, f64, f64) {
    let (_, l, s, g) = cluster(eig, eig.len() - 2);
    (l, s, g)
}

/// Unit normal as the normalised generalised cross product of the n rows of `fa`.
pub fn cofactor_normal(fa: &[Vec<f64>]) -> Vec<f64> {
    let n = fa.len();
    let d = n + 1;
    let mut nv = vec![0.0; d];
    for k in 0..d {
        let m = DMatrix::from_fn(n, n, |r, c| fa[r][if c < k { c } else { c + 1 }]);
        let sign = if (n + k) % 2 == 0 { 1.0 } else { -1.0 };
        nv[k] = sign * m.determinant();
    }
    let s = nv.iter().map(|x| x * x).sum::<f64>().sqrt();
    nv.iter().map(|x| x / s).collect()
}

impl HypersurfaceChart {
    pub fn new(positions: Field) -> Result<Self> {
        positions.chart.validate()?;
        let n = positions.chart.dim();
        if n < 3 || positions.ncomp != n + 1 {
            return Err(GeomError::Dimension { expected: n + 1, got: positions.ncomp });
        }
        Ok(HypersurfaceChart { positions, orientation: 1.0 })
    }

    pub fn chart(&self) -> &GridChart {
        &self.positions.chart
    }

    pub fn n(&self) -> usize {
        self.positions.chart.dim()
    }

    pub fn first_jets(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        (0..self.n()).map(|a| self.positions.d1_at(idx, a)).collect()
    }

    pub fn second_jets(&self, idx: &[usize]) -> Vec<Vec<Vec<f64>>> {
        let n = self.n();
        let mut out = vec![vec![Vec::new(); n]; n];
        for a in 0..n {
            for b in a..n {
                let v = self.positions.d2_at(idx, a, b);
                out[b][a] = v.clone();
                out[a][b] = v;
            }
        }
        out
    }

    /// Metric, normal, second fundamental form and shape operator at one sample.
    pub fn shape_at(&self, idx: &[usize]) -> Result<PointShape> {
        let n = self.n();
        let fa = self.first_jets(idx);
        let fab = self.second_jets(idx);
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        let g = DMatrix::from_fn(n, n, |a, b| dot(&fa[a], &fa[b]));
        let normal: Vec<f64> = cofactor_normal(&fa).into_iter().map(|x| x * self.orientation).collect();
        let ii = DMatrix::from_fn(n, n, |a, b| dot(&fab[a][b], &normal));
        let chol = g.clone().cholesky().ok_or_else(|| GeomError::DegenerateMetric {
            index: idx.to_vec(),
            det: g.determinant(),
        })?;
        let l = chol.l();
        let linv = l.clone().try_inverse().ok_or(GeomError::DegenerateMetric { index: idx.to_vec(), det: 0.0 })?;
        let b = &linv * &ii * linv.transpose();
        let b = (&b + b.transpose()) * 0.5;
        let mut eigenvalues: Vec<f64> = SymmetricEigen::new(b).eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let ge = SymmetricEigen::new(g.clone()).eigenvalues;
        let cond = ge.max() / ge.min();
        let a = chol.solve(&ii);
        Ok(PointShape { g, normal, ii, a, eigenvalues, cond })
    }

    /// Shape data on the samples of `region`, with multiplicity detection.
    pub fn geometry(&self, region: &IndexBox, opts: &ShapeOptions) -> Result<ShapeField> {
        let core = GridChart::sub(self.chart(), region).full_box();
        self.geometry_with_core(region, &core, opts)
    }

    /// As [`geometry`](Self::geometry), with Christoffel symbols stored only on the
    /// region-local box `core`.
    pub fn geometry_with_core(&self, region: &IndexBox, core: &IndexBox, opts: &ShapeOptions) -> Result<ShapeField> {
        let n = self.n();
        let chart = self.chart().sub(region);
        let lo = region.lo.clone();
        let ncomp = 2 * n * n + (n + 1) + n + 4;
        let off = ShapeLayout::new(n);
        let data = Field::try_from_index_fn(chart, ncomp, |sub, out| {
            let idx: Vec<usize> = sub.iter().zip(&lo).map(|(i, l)| i + l).collect();
            let ps = self.shape_at(&idx)?;
            if !(ps.cond <= opts.max_cond) {
                return Err(GeomError::IllConditioned { index: idx, cond: ps.cond });
            }
            let (lam, spread, gap) = principal_cluster(&ps.eigenvalues);
            if !(gap > 1e-12) || spread > opts.rel_gap * gap {
                return Err(GeomError::Multiplicity { index: idx, mult: n - 2, spread, gap });
            }
            out[off.g..off.g + n * n].copy_from_slice(ps.g.as_slice());
            out[off.a..off.a + n * n].copy_from_slice(ps.a.as_slice());
            out[off.normal..off.normal + n + 1].copy_from_slice(&ps.normal);
            out[off.eig..off.eig + n].copy_from_slice(&ps.eigenvalues);
            out[off.lambda] = lam;
            out[off.spread] = spread;
            out[off.gap] = gap;
            out[off.cond] = ps.cond;
            Ok(())
        })?;
        let core_chart = data.chart.sub(core);
        let gamma = Field::from_index_fn(core_chart, n * n * n, |sub, out| {
            let idx: Vec<usize> = sub.iter().zip(&lo).zip(&core.lo).map(|((i, l), c)| i + l + c).collect();
            let fa = self.first_jets(&idx);
            let g = DMatrix::from_fn(n, n, |a, b| fa[a].iter().zip(&fa[b]).map(|(x, y)| x * y).sum());
            let gi = g.try_inverse().unwrap();
            out.copy_from_slice(&self.christoffel_at(&idx, &gi));
        });
        Ok(ShapeField { n, offset: region.lo.clone(), data, layout: off, gamma, core: core.clone() })
    }

    /// Christoffel symbols Γ^c_{ab} stored at `c*n*n + a*n + b`, from exact jet identities.
    pub fn christoffel_at(&self, idx: &[usize], gi: &DMatrix<f64>) -> Vec<f64> {
        let n = self.n();
        let fa = self.first_jets(idx);
        let fab = self.second_jets(idx);
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        // Γ_{d,ab} = ⟨f_ab, f_d⟩
        let mut low = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for d in 0..n {
                    low[d * n * n + a * n + b] = dot(&fab[a][b], &fa[d]);
                }
            }
        }
        let mut out = vec![0.0; n * n * n];
        for c in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let mut s = 0.0;
                    for d in 0..n {
                        s += gi[(c, d)] * low[d * n * n + a * n + b];
                    }
                    out[c * n * n + a * n + b] = s;
                }
            }
        }
        out
    }
}

/// Component offsets inside a [`ShapeField`] sample.
#[derive(Clone, Copy, Debug)]
pub struct ShapeLayout {
    pub g: usize,
    pub a: usize,
    pub normal: usize,
    pub eig: usize,
    pub lambda: usize,
    pub spread: usize,
    pub gap: usize,
    pub cond: usize,
}

impl ShapeLayout {
    fn new(n: usize) -> Self {
        let g = 0;
        let a = g + n * n;
        let normal = a + n * n;
        let eig = normal + n + 1;
        let lambda = eig + n;
        ShapeLayout { g, a, normal, eig, lambda, spread: lambda + 1, gap: lambda + 2, cond: lambda + 3 }
    }
}

/// Shape data on a region of a hypersurface chart.
///
/// Indices passed to accessors are region-local; `offset` maps them back to the
/// full chart. Christoffel symbols are kept on the sub-box `core` only.
#[derive(Clone, Debug)]
pub struct ShapeField {
    pub n: usize,
    pub offset: Vec<usize>,
    pub data: Field,
    pub layout: ShapeLayout,
    pub gamma: Field,
    pub core: IndexBox,
}

impl ShapeField {
    pub fn chart(&self) -> &GridChart {
        &self.data.chart
    }

    fn mat(&self, idx: &[usize], off: usize) -> DMatrix<f64> {
        let s = self.data.at(idx);
        DMatrix::from_column_slice(self.n, self.n, &s[off..off + self.n * self.n])
    }

    pub fn g(&self, idx: &[usize]) -> DMatrix<f64> {
        self.mat(idx, self.layout.g)
    }

    pub fn a(&self, idx: &[usize]) -> DMatrix<f64> {
        self.mat(idx, self.layout.a)
    }

    pub fn lambda(&self, idx: &[usize]) -> f64 {
        self.data.at(idx)[self.layout.lambda]
    }

    pub fn spread(&self, idx: &[usize]) -> f64 {
        self.data.at(idx)[self.layout.spread]
    }

    pub fn gap(&self, idx: &[usize]) -> f64 {
        self.data.at(idx)[self.layout.gap]
    }

    pub fn cond(&self, idx: &[usize]) -> f64 {
        self.data.at(idx)[self.layout.cond]
    }

    pub fn normal(&self, idx: &[usize]) -> &[f64] {
        let o = self.layout.normal;
        &self.data.at(idx)[o..o + self.n + 1]
    }

    pub fn eigenvalues(&self, idx: &[usize]) -> &[f64] {
        let o = self.layout.eig;
        &self.data.at(idx)[o..o + self.n]
    }

    /// Γ^c_{ab} at a region-local index inside `core`.
    pub fn gamma(&self, idx: &[usize]) -> &[f64] {
        assert!(self.core.contains(idx), "Christoffel symbols requested outside the core box");
        let sub: Vec<usize> = idx.iter().zip(&self.core.lo).map(|(i, c)| i - c).collect();
        self.gamma.at(&sub)
    }

    /// Gradient of λ as a coordinate one-form.
    pub fn dlambda(&self, idx: &[usize]) -> Vec<f64> {
        (0..self.n).map(|a| self.data.d1_at(idx, a)[self.layout.lambda]).collect()
    }

    /// Horizontal lifts X_u, X_v of ∂u, ∂v: the g-orthogonal projections onto Δ^⊥.
    pub fn horizontal(&self, idx: &[usize]) -> [DVector<f64>; 2] {
        horizontal_lifts(&self.g(idx))
    }

    /// Splitting tensors C_T for T = ∂t_k, as 2×2 matrices in the frame {X_u, X_v}.
    pub fn splitting(&self, idx: &[usize]) -> Vec<DMatrix<f64>> {
        let n = self.n;
        let g = self.g(idx);
        let gam = self.gamma(idx);
        let [xu, xv] = horizontal_lifts(&g);
        let h = DMatrix::from_columns(&[xu.clone(), xv.clone()]);
        let gram = h.transpose() * &g * &h;
        let gram_inv = gram.try_inverse().unwrap();
        (2..n)
            .map(|k| {
                let mut c = DMatrix::zeros(2, 2);
                for (j, x) in [&xu, &xv].iter().enumerate() {
                    // ∇_X ∂t_k = X^a Γ^c_{a k} ∂_c
                    let nab = DVector::from_fn(n, |cc, _| (0..n).map(|a| x[a] * gam[cc * n * n + a * n + k]).sum());
                    let coef = &gram_inv * (h.transpose() * &g * nab);
                    c[(0, j)] = -coef[0];
                    c[(1, j)] = -coef[1];
                }
                c
            })
            .collect()
    }

    /// ‖(A − λI)∂t_k‖ / ‖∂t_k‖ maximised over k: the adapted-chart residual.
    pub fn adapted_residual(&self, idx: &[usize]) -> f64 {
        let n = self.n;
        let g = self.g(idx);
        let al = self.a(idx) - DMatrix::identity(n, n) * self.lambda(idx);
        (2..n)
            .map(|k| {
                let y = al.column(k).into_owned();
                let ny = (y.transpose() * &g * &y)[0].sqrt();
                ny / g[(k, k)].sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// max_k |∂t_k λ|: derivative of λ along the eigendistribution.
    pub fn dupin_residual(&self, idx: &[usize]) -> f64 {
        let d = self.dlambda(idx);
        d[2..].iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

/// g-orthogonal projections of ∂u, ∂v onto the complement of the trailing coordinate fields.
pub fn horizontal_lifts(g: &DMatrix<f64>) -> [DVector<f64>; 2] {
    let n = g.nrows();
    let gtt = g.view((2, 2), (n - 2, n - 2)).into_owned();
    let chol = gtt.cholesky().expect("leaf metric must be positive definite");
    let mut out = [DVector::zeros(n), DVector::zeros(n)];
    for (j, o) in out.iter_mut().enumerate() {
        let rhs = g.view((2, j), (n - 2, 1)).into_owned();
        let c = chol.solve(&rhs);
        o[j] = 1.0;
        for k in 0..n - 2 {
            o[2 + k] = -c[k];
        }
    }
    out
}

/// Frobenius distance of a 2×2 matrix from span{I}.
pub fn span_i_residual(c: &DMatrix<f64>) -> f64 {
    let t = 0.5 * (c[(0, 0)] + c[(1, 1)]);
    ((c[(0, 0)] - t).powi(2) + (c[(1, 1)] - t).powi(2) + c[(0, 1)].powi(2) + c[(1, 0)].powi(2)).sqrt()
}

/// Frobenius distance of a 2×2 matrix from span{I, J}, for J of the given kind.
pub fn span_ij_residual(c: &DMatrix<f64>, elliptic: bool) -> f64 {
    if elliptic {
        // span{I,J} = {[[a,−b],[b,a]]}
        (0.5 * ((c[(0, 0)] - c[(1, 1)]).powi(2) + (c[(0, 1)] + c[(1, 0)]).powi(2))).sqrt()
    } else {
        (c[(0, 1)].powi(2) + c[(1, 0)].powi(2)).sqrt()
    }
}

/// Result of the splitting-tensor test: is Δ^⊥ umbilical (C_T ∈ span{I} everywhere)?
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplittingReport {
    /// Per-sample max over T of the span{I} distance, minimised over the region.
    pub min_span_i_distance: f64,
    /// Max over samples of that same per-sample quantity.
    pub max_span_i_distance: f64,
    /// Largest |C_T| in the region (the scale of the tensor).
    pub scale: f64,
    /// Largest distance from span{I,J} (hyperbolic J unless stated).
    pub max_span_ij_residual: f64,
    pub surface_like: bool,
}

/// Splitting-tensor test on region-local `b`. Surface-like when the span{I}
/// distance stays below `tol` on more than half of the samples.
pub fn splitting_report(sf: &ShapeField, b: &IndexBox, tol: f64, elliptic: bool) -> SplittingReport {
    let idxs = b.indices();
    let mut min_d = f64::INFINITY;
    let mut max_d: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut ij: f64 = 0.0;
    let mut below = 0usize;
    for idx in &idxs {
        let cs = sf.splitting(idx);
        let d = cs.iter().map(span_i_residual).fold(0.0, f64::max);
        scale = cs.iter().map(|c| c.amax()).fold(scale, f64::max);
        ij = cs.iter().map(|c| span_ij_residual(c, elliptic)).fold(ij, f64::max);
        min_d = min_d.min(d);
        max_d = max_d.max(d);
        if d <= tol {
            below += 1;
        }
    }
    SplittingReport {
        min_span_i_distance: min_d,
        max_span_i_distance: max_d,
        scale,
        max_span_ij_residual: ij,
        surface_like: 2 * below > idxs.len(),
    }
}

/// Max over `b` of |⟨A X, Y⟩ − ⟨X, A Y⟩| for coordinate fields: A's g-symmetry residual.
pub fn symmetry_residual(sf: &ShapeField, b: &IndexBox) -> f64 {
    max_over(b, |idx| {
        let g = sf.g(idx);
        let ga = &g * sf.a(idx);
        (&ga - ga.transpose()).amax()
    })
    .0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cylinder(n: usize, r: f64, h: f64, cnt: usize) -> HypersurfaceChart {
        let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let names: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let chart = GridChart::centered(&names, &vec![cnt; n], h);
        let f = Field::from_coord_fn(chart, n + 1, move |x, o| {
            o[0] = r * (x[0] / r).cos();
            o[1] = r * (x[0] / r).sin();
            for i in 1..n {
                o[i + 1] = x[i];
            }
        });
        HypersurfaceChart::new(f).unwrap()
    }

    #[test]
    fn round_cylinder_eigenvalues() {
        let err = |step: f64| {
            let ps = cylinder(4, 0.8, step, 5).shape_at(&[2, 2, 2, 2]).unwrap();
            let e = ps.eigenvalues.clone();
            let nonzero: Vec<_> = e.iter().filter(|x| x.abs() > 1e-3).collect();
            assert_eq!(nonzero.len(), 1, "{e:?}");
            (nonzero[0].abs() - 1.25).abs()
        };
        let (e1, e2) = (err(0.05), err(0.025));
        assert!(e1 < 5e-3);
        assert!((3.5..4.5).contains(&(e1 / e2)), "{e1} {e2}");
    }

    #[test]
    fn sphere_is_rejected() {
        let n = 4;
        let chart = GridChart::centered(&["a", "b", "c", "d"], &[5; 4], 0.05);
        let f = Field::from_coord_fn(chart, n + 1, |x, o| {
            // graph chart of the unit sphere near the north pole
            let r2: f64 = x.iter().map(|t| t * t).sum();
            o[..4].copy_from_slice(x);
            o[4] = (1.0 - r2).sqrt();
        });
        let h = HypersurfaceChart::new(f).unwrap();
        let r = h.geometry(&h.chart().full_box(), &ShapeOptions::default());
        assert!(matches!(r, Err(GeomError::Multiplicity { .. })));
    }

    #[test]
    fn cofactor_normal_is_orthogonal() {
        let fa = vec![vec![1.0, 0.2, 0.0, 0.1], vec![0.0, 1.0, 0.3, 0.0], vec![0.2, 0.0, 1.0, 0.5]];
        let nv = cofactor_normal(&fa);
        for r in &fa {
            assert!(r.iter().zip(&nv).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-14);
        }
        assert!((nv.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn span_residuals() {
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        assert_eq!(span_i_residual(&c), 0.0);
        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(span_i_residual(&d) > 0.5);
        assert_eq!(span_ij_residual(&d, false), 0.0);
        let e = DMatrix::from_row_slice(2, 2, &[1.0, -3.0, 3.0, 1.0]);
        assert!(span_ij_residual(&e, true) < 1e-15);
    }

    #[test]
    fn cluster_picks_tightest_window() {
        let (l, s, g) = principal_cluster(&[-1.0, 0.5, 0.5001, 0.4999, 0.5, 3.0]);
        assert!((l - 0.5).abs() < 1e-4);
        assert!(s < 2e-4);
        assert!((g - 1.5).abs() < 1e-3);
    }
}
