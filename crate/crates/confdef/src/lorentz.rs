//! Minkowski space 𝕃^{m+2} and the light-cone model of Euclidean space.

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::grid::Field;

/// Lorentzian product of signature (−,+,…,+) on raw slices.
#[inline]
pub fn ldot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = -a[0] * b[0];
    for i in 1..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Euclidean dot product.
#[inline]
pub fn edot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += s * x`
#[inline]
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// Lorentz-orthonormalise a list of non-null vectors in order (modified Gram–Schmidt).
pub fn lorentz_gram_schmidt(vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    for v in vs {
        let mut y = v.clone();
        for q in &out {
            let s = ldot(&y, q) / ldot(q, q);
            axpy(-s, q, &mut y);
        }
        let n = ldot(&y, &y).abs().sqrt();
        for c in &mut y {
            *c /= n;
        }
        out.push(y);
    }
    out
}

/// A vector of 𝕃^{m+2}; coordinate 0 is time-like.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LorentzVec(pub Vec<f64>);

impl LorentzVec {
    pub fn zeros(dim: usize) -> Self {
        LorentzVec(vec![0.0; dim])
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        LorentzVec(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, s: f64) -> Self {
        LorentzVec(self.0.iter().map(|x| s * x).collect())
    }

    pub fn add(&self, o: &LorentzVec) -> Self {
        LorentzVec(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }
}

/// ⟨a,b⟩ with a dimension check.
pub fn minkowski_dot(a: &LorentzVec, b: &LorentzVec) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(GeomError::Dimension { expected: a.dim(), got: b.dim() });
    }
    if a.dim() == 0 {
        return Err(GeomError::Dimension { expected: 1, got: 0 });
    }
    Ok(ldot(&a.0, &b.0))
}

/// The triple (p0, w, C) identifying ℝ^m with the slice 𝔼^m of the light cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LightConeModel {
    pub m: usize,
    pub p0: LorentzVec,
    pub w: LorentzVec,
    /// Columns of C, each a vector of 𝕃^{m+2}.
    pub c: Vec<LorentzVec>,
}

impl LightConeModel {
    /// p0 = (1,1,0…)/√2, w = (−1,1,0…)/√2, C onto coordinates 2…m+1.
    pub fn canonical(m: usize) -> Self {
        let d = m + 2;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut p0 = vec![0.0; d];
        p0[0] = r;
        p0[1] = r;
        let mut w = vec![0.0; d];
        w[0] = -r;
        w[1] = r;
        let c = (0..m).map(|i| LorentzVec::basis(d, 2 + i)).collect();
        LightConeModel { m, p0: LorentzVec(p0), w: LorentzVec(w), c }
    }

    /// Validate a user-supplied model against its invariants.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let d = self.m + 2;
        if self.p0.dim() != d || self.w.dim() != d || self.c.len() != self.m {
            return Err(GeomError::Spec("model dimensions inconsistent".into()));
        }
        let p = &self.p0.0;
        let w = &self.w.0;
        let bad = |what: &str| Err(GeomError::Spec(format!("light-cone model: {what}")));
        if ldot(p, p).abs() > tol || ldot(w, w).abs() > tol || (ldot(p, w) - 1.0).abs() > tol {
            return bad("need <p0,p0> = <w,w> = 0 and <p0,w> = 1");
        }
        if w[0] >= 0.0 {
            return bad("w must have negative time component");
        }
        for (i, ci) in self.c.iter().enumerate() {
            if ci.dim() != d {
                return bad("column dimension");
            }
            if ldot(&ci.0, p).abs() > tol || ldot(&ci.0, w).abs() > tol {
                return bad("columns of C must be orthogonal to p0 and w");
            }
            for (j, cj) in self.c.iter().enumerate() {
                let t = if i == j { 1.0 } else { 0.0 };
                if (ldot(&ci.0, &cj.0) - t).abs() > tol {
                    return bad("columns of C must be orthonormal");
                }
            }
        }
        Ok(())
    }

    pub fn ambient_dim(&self) -> usize {
        self.m + 2
    }

    /// Cx into a preallocated output.
    pub fn c_apply(&self, x: &[f64], out: &mut [f64]) {
        for (xi, ci) in x.iter().zip(&self.c) {
            axpy(*xi, &ci.0, out);
        }
    }

    /// Cᵀu: the Euclidean coordinates ⟨u, Ce_i⟩.
    pub fn c_transpose(&self, u: &[f64]) -> Vec<f64> {
        self.c.iter().map(|ci| ldot(u, &ci.0)).collect()
    }

    /// Ψ(x) = p0 + Cx − ½|x|²w.
    pub fn psi(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.p0.0.clone();
        self.c_apply(x, &mut out);
        axpy(-0.5 * edot(x, x), &self.w.0, &mut out);
        out
    }

    /// Ψ_*(x)v = Cv − ⟨x,v⟩w.
    pub fn psi_push(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim()];
        self.c_apply(v, &mut out);
        axpy(-edot(x, v), &self.w.0, &mut out);
        out
    }

    pub fn psi_embed(&self, x: &[f64]) -> Result<LorentzVec> {
        if x.len() != self.m {
            return Err(GeomError::Dimension { expected: self.m, got: x.len() });
        }
        Ok(LorentzVec(self.psi(x)))
    }

    /// Π(u) = u/⟨u,w⟩.
    pub fn psi_project(&self, u: &LorentzVec, tol: f64) -> Result<LorentzVec> {
        if u.dim() != self.ambient_dim() {
            return Err(GeomError::Dimension { expected: self.ambient_dim(), got: u.dim() });
        }
        let s = ldot(&u.0, &self.w.0);
        if s.abs() <= tol {
            return Err(GeomError::ForbiddenRay { value: s });
        }
        Ok(u.scaled(1.0 / s))
    }

    /// Euclidean point of a light-cone vector: 𝓒 at a single sample.
    pub fn to_euclidean(&self, u: &[f64]) -> Vec<f64> {
        let s = ldot(u, &self.w.0);
        self.c_transpose(u).into_iter().map(|x| x / s).collect()
    }

    /// 𝓘(f) = (1/φ)Ψ∘f on a grid.
    pub fn lift_conformal(&self, f: &Field, phi: &Field) -> Result<Field> {
        if f.ncomp != self.m {
            return Err(GeomError::Dimension { expected: self.m, got: f.ncomp });
        }
        if phi.ncomp != 1 || phi.chart.len() != f.chart.len() {
            return Err(GeomError::Dimension { expected: f.chart.len(), got: phi.data.len() });
        }
        for (k, &p) in phi.data.iter().enumerate() {
            if !(p > 0.0) {
                return Err(GeomError::NonPositiveFactor { index: phi.chart.unflat(k), value: p });
            }
        }
        let d = self.ambient_dim();
        Ok(Field::from_index_fn(f.chart.clone(), d, |idx, out| {
            let k = f.chart.flat(idx);
            let v = self.psi(f.at_flat(k));
            let s = 1.0 / phi.data[k];
            for (o, x) in out.iter_mut().zip(v) {
                *o = s * x;
            }
        }))
    }

    /// 𝓒(F): Euclidean points and conformal factor φ = 1/⟨F,w⟩.
    pub fn drop_isometric(&self, big_f: &Field) -> Result<(Field, Field)> {
        if big_f.ncomp != self.ambient_dim() {
            return Err(GeomError::Dimension { expected: self.ambient_dim(), got: big_f.ncomp });
        }
        let mut phi = Field::zeros(big_f.chart.clone(), 1);
        for k in 0..big_f.chart.len() {
            let s = ldot(big_f.at_flat(k), &self.w.0);
            if !(s > 0.0) {
                return Err(GeomError::NotUpperCone { index: big_f.chart.unflat(k), value: s });
            }
            phi.data[k] = 1.0 / s;
        }
        let f = Field::from_index_fn(big_f.chart.clone(), self.m, |idx, out| {
            out.copy_from_slice(&self.to_euclidean(big_f.at(idx)));
        });
        Ok((f, phi))
    }

    /// Euclidean sphere (centre, radius) as a unit space-like vector: (Ψ(c) + (r²/2)w)/r.
    pub fn sphere(&self, centre: &[f64], radius: f64) -> Vec<f64> {
        let mut v = self.psi(centre);
        axpy(0.5 * radius * radius, &self.w.0, &mut v);
        v.iter().map(|x| x / radius).collect()
    }
}
