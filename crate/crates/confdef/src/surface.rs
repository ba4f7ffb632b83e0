//! Surfaces s: L² → 𝕊_{1,1} sampled on (u, v) charts: metric, Christoffel
//! symbols, the operator Q and the conjugate-structure classification.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::grid::{max_over, Field, GridChart, IndexBox};
use crate::lorentz::ldot;

/// An analytic surface in 𝕃^{dim}.
pub trait SurfaceSource: Sync {
    fn ambient_dim(&self) -> usize;
    fn eval(&self, u: f64, v: f64) -> Vec<f64>;

    /// Tangents by a fourth-order central difference of the source.
    fn tangents(&self, u: f64, v: f64) -> (Vec<f64>, Vec<f64>) {
        let d = 1e-3;
        let diff = |f: &dyn Fn(f64) -> Vec<f64>| -> Vec<f64> {
            let (a, b, c, e) = (f(-2.0 * d), f(-d), f(d), f(2.0 * d));
            (0..a.len()).map(|i| (a[i] - 8.0 * b[i] + 8.0 * c[i] - e[i]) / (12.0 * d)).collect()
        };
        (diff(&|t| self.eval(u + t, v)), diff(&|t| self.eval(u, v + t)))
    }
}

/// Kind of conjugate structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConjugateKind {
    Hyperbolic,
    Elliptic,
    Parabolic,
    None,
}

impl std::fmt::Display for ConjugateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ConjugateKind::Hyperbolic => "hyperbolic",
            ConjugateKind::Elliptic => "elliptic",
            ConjugateKind::Parabolic => "parabolic",
            ConjugateKind::None => "none",
        };
        f.write_str(s)
    }
}

/// Classification result with the residuals it was decided from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConjugateStructure {
    pub kind: ConjugateKind,
    /// J̄ in the coordinate frame, row-major; columns are J̄∂u, J̄∂v.
    pub j: [[f64; 2]; 2],
    /// Max of |J̄² − ε I| with ε = 1, −1 or 0 by kind.
    pub j_square_residual: f64,
    /// Max |α′(∂u,∂v)|.
    pub hyperbolic_residual: f64,
    /// Max |α′(∂z,∂z̄)| = max |α′_uu + α′_vv|/4.
    pub elliptic_residual: f64,
    /// Max |α′| over all components.
    pub scale: f64,
    pub tolerance: f64,
    pub note: String,
}

impl ConjugateStructure {
    pub fn require(&self, kind: ConjugateKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(GeomError::Conjugate { kind: self.kind.to_string(), detail: self.note.clone() })
        }
    }
}

/// s sampled on a two-dimensional chart, optionally with exact tangent grids.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfaceChart {
    pub positions: Field,
    #[serde(skip)]
    pub tangents: Option<(Field, Field)>,
}

/// Per-sample metric and Christoffel data of a surface chart.
///
/// Components: E, F, G, then Γ^c_{ab} at `3 + 4c + 2a + b`.
#[derive(Clone, Debug)]
pub struct SurfaceGeometry {
    pub data: Field,
}

impl SurfaceGeometry {
    /// Prescribed metric and Christoffels: `f(x)` returns ([E, F, G], Γ^c_{ab} at `4c + 2a + b`).
    pub fn from_fn<Fn_>(chart: GridChart, f: Fn_) -> Self
    where
        Fn_: Fn(&[f64]) -> ([f64; 3], [f64; 8]) + Sync,
    {
        let data = Field::from_coord_fn(chart, 11, |x, out| {
            let (m, g) = f(x);
            out[..3].copy_from_slice(&m);
            out[3..].copy_from_slice(&g);
        });
        SurfaceGeometry { data }
    }

    pub fn chart(&self) -> &GridChart {
        &self.data.chart
    }

    pub fn efg(&self, idx: &[usize]) -> [f64; 3] {
        let s = self.data.at(idx);
        [s[0], s[1], s[2]]
    }

    /// Γ^c_{ab}.
    pub fn gamma(&self, idx: &[usize], c: usize, a: usize, b: usize) -> f64 {
        self.data.at(idx)[3 + 4 * c + 2 * a + b]
    }

    /// (Γ¹, Γ²) with ∇_{∂u}∂v = Γ¹∂u + Γ²∂v.
    pub fn gamma_real(&self, idx: &[usize]) -> (f64, f64) {
        (self.gamma(idx, 0, 0, 1), self.gamma(idx, 1, 0, 1))
    }

    /// Γ with ∇_{∂z}∂z̄ = Γ∂z + Γ̄∂z̄.
    pub fn gamma_complex(&self, idx: &[usize]) -> Complex64 {
        let a = self.gamma(idx, 0, 0, 0) + self.gamma(idx, 0, 1, 1);
        let b = self.gamma(idx, 1, 0, 0) + self.gamma(idx, 1, 1, 1);
        Complex64::new(a / 4.0, b / 4.0)
    }

    /// √(EG − F²): the conformal factor e^{2λ} in isothermal charts.
    pub fn area_factor(&self, idx: &[usize]) -> f64 {
        let [e, f, g] = self.efg(idx);
        (e * g - f * f).sqrt()
    }
}

impl SurfaceChart {
    pub fn new(positions: Field) -> Result<Self> {
        positions.chart.validate()?;
        if positions.chart.dim() != 2 {
            return Err(GeomError::Dimension { expected: 2, got: positions.chart.dim() });
        }
        Ok(SurfaceChart { positions, tangents: None })
    }

    /// Sample an analytic source, keeping its tangents.
    pub fn sample(source: &dyn SurfaceSource, chart: GridChart) -> Result<Self> {
        let d = source.ambient_dim();
        let all = Field::from_coord_fn(chart.clone(), 3 * d, |x, o| {
            o[..d].copy_from_slice(&source.eval(x[0], x[1]));
            let (tu, tv) = source.tangents(x[0], x[1]);
            o[d..2 * d].copy_from_slice(&tu);
            o[2 * d..].copy_from_slice(&tv);
        });
        let part = |k: usize| Field::from_index_fn(chart.clone(), d, |idx, o| o.copy_from_slice(&all.at(idx)[k * d..(k + 1) * d]));
        let (pos, tu, tv) = (part(0), part(1), part(2));
        let mut s = SurfaceChart::new(pos)?;
        s.tangents = Some((tu, tv));
        Ok(s)
    }

    pub fn chart(&self) -> &GridChart {
        &self.positions.chart
    }

    pub fn ambient_dim(&self) -> usize {
        self.positions.ncomp
    }

    /// max |⟨s,s⟩ − 1|.
    pub fn unit_residual(&self) -> f64 {
        (0..self.chart().len())
            .map(|k| {
                let p = self.positions.at_flat(k);
                (ldot(p, p) - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Tangents at a sample: exact if available, else finite differences.
    pub fn tangent_pair(&self, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        match &self.tangents {
            Some((tu, tv)) => (tu.at(idx).to_vec(), tv.at(idx).to_vec()),
            None => (self.positions.d1_at(idx, 0), self.positions.d1_at(idx, 1)),
        }
    }

    /// Metric and Christoffels from finite-difference jets.
    pub fn geometry(&self) -> Result<SurfaceGeometry> {
        let chart = self.chart().clone();
        let data = Field::try_from_index_fn(chart, 11, |idx, out| {
            let su = self.positions.d1_at(idx, 0);
            let sv = self.positions.d1_at(idx, 1);
            let (e, f, g) = (ldot(&su, &su), ldot(&su, &sv), ldot(&sv, &sv));
            let det = e * g - f * f;
            if !(det > 1e-14) {
                return Err(GeomError::DegenerateMetric { index: idx.to_vec(), det });
            }
            out[0] = e;
            out[1] = f;
            out[2] = g;
            for a in 0..2 {
                for b in 0..2 {
                    let sab = self.positions.d2_at(idx, a, b);
                    let (p, q) = (ldot(&sab, &su), ldot(&sab, &sv));
                    // [E F; F G] [Γ^u; Γ^v] = [p; q]
                    out[3 + 2 * a + b] = (g * p - f * q) / det;
                    out[3 + 4 + 2 * a + b] = (e * q - f * p) / det;
                }
            }
            Ok(())
        })?;
        Ok(SurfaceGeometry { data })
    }

    /// Second fundamental form α^s(∂a,∂b) of s in 𝕊_{1,1} at a sample.
    pub fn second_form_at(&self, geo: &SurfaceGeometry, idx: &[usize]) -> [[Vec<f64>; 2]; 2] {
        let s = self.positions.at(idx);
        let su = self.positions.d1_at(idx, 0);
        let sv = self.positions.d1_at(idx, 1);
        let comp = |a: usize, b: usize| {
            let mut x = self.positions.d2_at(idx, a, b);
            let ss = ldot(&x, s) / ldot(s, s);
            let gu = geo.gamma(idx, 0, a, b);
            let gv = geo.gamma(idx, 1, a, b);
            for i in 0..x.len() {
                x[i] -= gu * su[i] + gv * sv[i] + ss * s[i];
            }
            x
        };
        [[comp(0, 0), comp(0, 1)], [comp(1, 0), comp(1, 1)]]
    }

    /// Classify coordinates as real-conjugate, complex-conjugate or degenerate on the interior.
    pub fn classify_conjugate(&self, geo: &SurfaceGeometry, tol: f64) -> ConjugateStructure {
        let b = self.chart().interior(2);
        let norm = |x: &[f64]| x.iter().map(|t| t * t).sum::<f64>().sqrt();
        let mut rh: f64 = 0.0;
        let mut re: f64 = 0.0;
        let mut scale: f64 = 0.0;
        let mut r11: f64 = 0.0;
        let mut r22: f64 = 0.0;
        for idx in b.indices() {
            let al = self.second_form_at(geo, &idx);
            let sum: Vec<f64> = al[0][0].iter().zip(&al[1][1]).map(|(x, y)| x + y).collect();
            rh = rh.max(norm(&al[0][1]));
            re = re.max(norm(&sum) / 4.0);
            r11 = r11.max(norm(&al[0][0]));
            r22 = r22.max(norm(&al[1][1]));
            scale = scale.max(norm(&al[0][0])).max(norm(&al[0][1])).max(norm(&al[1][1]));
        }
        let mut cs = ConjugateStructure {
            kind: ConjugateKind::None,
            j: [[0.0; 2]; 2],
            j_square_residual: 0.0,
            hyperbolic_residual: rh,
            elliptic_residual: re,
            scale,
            tolerance: tol,
            note: String::new(),
        };
        if scale <= tol {
            cs.note = "second fundamental form vanishes (totally geodesic): no conjugate structure".into();
        } else if rh <= tol {
            cs.kind = ConjugateKind::Hyperbolic;
            cs.j = [[1.0, 0.0], [0.0, -1.0]];
            cs.note = "real-conjugate coordinates".into();
        } else if re <= tol {
            cs.kind = ConjugateKind::Elliptic;
            cs.j = [[0.0, -1.0], [1.0, 0.0]];
            cs.note = "complex-conjugate coordinates".into();
        } else if r11 <= tol || r22 <= tol {
            cs.kind = ConjugateKind::Parabolic;
            cs.j = if r11 <= tol { [[0.0, 1.0], [0.0, 0.0]] } else { [[0.0, 0.0], [1.0, 0.0]] };
            cs.note = "nilpotent structure: excluded for genuine deformations".into();
        } else {
            cs.note = "coordinates are neither real- nor complex-conjugate".into();
        }
        let eps = match cs.kind {
            ConjugateKind::Hyperbolic => 1.0,
            ConjugateKind::Elliptic => -1.0,
            _ => 0.0,
        };
        let j = cs.j;
        let mut r: f64 = 0.0;
        for i in 0..2 {
            for k in 0..2 {
                let jj = j[i][0] * j[0][k] + j[i][1] * j[1][k];
                let id = if i == k { eps } else { 0.0 };
                r = r.max((jj - id).abs());
            }
        }
        cs.j_square_residual = r;
        cs
    }
}

/// Q(θ) = θ_uv − Γ¹θ_u − Γ²θ_v + Fθ at a sample.
pub fn q_real_at(theta: &Field, geo: &SurfaceGeometry, idx: &[usize]) -> f64 {
    let tu = theta.d1_at(idx, 0)[0];
    let tv = theta.d1_at(idx, 1)[0];
    let tuv = theta.d2_at(idx, 0, 1)[0];
    let (g1, g2) = geo.gamma_real(idx);
    let f = geo.efg(idx)[1];
    tuv - g1 * tu - g2 * tv + f * theta.get(idx, 0)
}

/// Q(θ) = θ_zz̄ − Γθ_z − Γ̄θ_z̄ + Fθ for real θ, with F = ⟨∂z,∂z̄⟩ = (E+G)/4.
pub fn q_elliptic_at(theta: &Field, geo: &SurfaceGeometry, idx: &[usize]) -> f64 {
    let tu = theta.d1_at(idx, 0)[0];
    let tv = theta.d1_at(idx, 1)[0];
    let lap = theta.d2_at(idx, 0, 0)[0] + theta.d2_at(idx, 1, 1)[0];
    let gm = geo.gamma_complex(idx);
    let [e, _, g] = geo.efg(idx);
    lap / 4.0 - (gm.re * tu + gm.im * tv) + 0.25 * (e + g) * theta.get(idx, 0)
}

/// Q(θ) on the whole chart.
pub fn q_operator(theta: &Field, geo: &SurfaceGeometry, elliptic: bool) -> Field {
    Field::from_index_fn(theta.chart.clone(), 1, |idx, o| {
        o[0] = if elliptic { q_elliptic_at(theta, geo, idx) } else { q_real_at(theta, geo, idx) };
    })
}

/// Max |Q(θ)| over `b` with its location.
pub fn max_q(theta: &Field, geo: &SurfaceGeometry, b: &IndexBox, elliptic: bool) -> (f64, Vec<usize>) {
    max_over(b, |idx| {
        if elliptic {
            q_elliptic_at(theta, geo, idx).abs()
        } else {
            q_real_at(theta, geo, idx).abs()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Flat torus in ℝ⁴ ⊂ 𝕃⁵ scaled onto the unit sphere: E = G = 1/2, F = 0.
    struct Torus;
    impl SurfaceSource for Torus {
        fn ambient_dim(&self) -> usize {
            5
        }
        fn eval(&self, u: f64, v: f64) -> Vec<f64> {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            vec![0.0, r * u.cos(), r * u.sin(), r * v.cos(), r * v.sin()]
        }
    }

    #[test]
    fn flat_torus_has_zero_christoffels() {
        let chart = GridChart::centered(&["u", "v"], &[11, 11], 0.05);
        let s = SurfaceChart::sample(&Torus, chart).unwrap();
        assert!(s.unit_residual() < 1e-14);
        let geo = s.geometry().unwrap();
        for idx in s.chart().full_box().indices() {
            let (g1, g2) = geo.gamma_real(&idx);
            assert!(g1.abs() < 1e-12 && g2.abs() < 1e-12);
            assert!((geo.efg(&idx)[0] - 0.5).abs() < 1e-3);
        }
    }

    #[test]
    fn torus_is_real_conjugate() {
        let chart = GridChart::centered(&["u", "v"], &[11, 11], 0.05);
        let s = SurfaceChart::sample(&Torus, chart).unwrap();
        let geo = s.geometry().unwrap();
        let cs = s.classify_conjugate(&geo, 10.0 * 0.05 * 0.05);
        assert_eq!(cs.kind, ConjugateKind::Hyperbolic);
        assert_eq!(cs.j_square_residual, 0.0);
    }

    #[test]
    fn q_of_zero_is_zero() {
        let chart = GridChart::centered(&["u", "v"], &[7, 7], 0.1);
        let s = SurfaceChart::sample(&Torus, chart.clone()).unwrap();
        let geo = s.geometry().unwrap();
        let z = Field::zeros(chart, 1);
        assert_eq!(max_q(&z, &geo, &s.chart().full_box(), false).0, 0.0);
        assert_eq!(max_q(&z, &geo, &s.chart().full_box(), true).0, 0.0);
    }

    #[test]
    fn source_tangents_are_accurate() {
        let (tu, tv) = Torus.tangents(0.3, -0.2);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((tu[1] + r * 0.3f64.sin()).abs() < 1e-11);
        assert!((tv[4] - r * (-0.2f64).cos()).abs() < 1e-11);
    }
}
