//! Membership in C_s: transported functions, sign conditions, ρ and Q(ρ).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::grid::{Axis, Field, GridChart};
use crate::surface::{max_q, SurfaceGeometry};

/// A boundary function on one coordinate axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum BoundaryFn {
    Constant { value: f64 },
    /// Σ coeffs[k]·x^k.
    Polynomial { coeffs: Vec<f64> },
    /// V = k.
    ConstV { k: f64 },
    /// U = c − scale·e^{−2λ}, with e^{2λ} = √(EG − F²) sampled on v = 0.
    UFromLambda {
        c: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Samples { values: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl BoundaryFn {
    /// Values at the nodes of `axis`; `e2l` is e^{2λ} along the same nodes.
    pub fn values(&self, axis: &Axis, e2l: &[f64]) -> Result<Vec<f64>> {
        let xs = axis.values();
        Ok(match self {
            BoundaryFn::Constant { value } => vec![*value; xs.len()],
            BoundaryFn::ConstV { k } => vec![*k; xs.len()],
            BoundaryFn::Polynomial { coeffs } => xs.iter().map(|&x| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)).collect(),
            BoundaryFn::UFromLambda { c, scale } => e2l.iter().map(|e| c - scale / e).collect(),
            BoundaryFn::Samples { values } => {
                if values.len() != xs.len() {
                    return Err(GeomError::Dimension { expected: xs.len(), got: values.len() });
                }
                values.clone()
            }
        })
    }
}

/// Holomorphic seed ζ(z) = Σ coeffs[k]·z^k, coefficients as (re, im).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaFn {
    pub coeffs: Vec<[f64; 2]>,
}

impl ZetaFn {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + Complex64::new(c[0], c[1]))
    }
}

/// Candidate boundary data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateSpec {
    Hyperbolic {
        u: BoundaryFn,
        v: BoundaryFn,
        #[serde(default)]
        normalize_by_conformal_factor: bool,
    },
    Elliptic { zeta: ZetaFn },
}

/// Which alternative of the hyperbolic sign conditions holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// φ^U, φ^V > 0.
    Positive,
    /// 0 < 2φ^U < −(2φ^V + 1).
    UPositive,
    /// 0 < 2φ^V < −(2φ^U + 1).
    VPositive,
    /// 4 Re φ^ζ + 1 < 0 and φ^ζ ≠ −1/2.
    Elliptic,
}

pub fn hyperbolic_branch(pu: f64, pv: f64) -> Option<Branch> {
    if pu > 0.0 && pv > 0.0 {
        Some(Branch::Positive)
    } else if 0.0 < 2.0 * pu && 2.0 * pu < -(2.0 * pv + 1.0) {
        Some(Branch::UPositive)
    } else if 0.0 < 2.0 * pv && 2.0 * pv < -(2.0 * pu + 1.0) {
        Some(Branch::VPositive)
    } else {
        None
    }
}

pub fn elliptic_admissible(phi: Complex64) -> bool {
    4.0 * phi.re + 1.0 < 0.0 && (phi - Complex64::new(-0.5, 0.0)).norm() > 0.0
}

/// Per-sample sign check: the common branch, or the first failing sample.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SignReport {
    pub branch: Option<Branch>,
    pub first_failure: Option<Vec<usize>>,
    pub failures: usize,
}

/// Transported fields of a candidate.
#[derive(Clone, Debug)]
pub enum Transported {
    /// φ^U, φ^V.
    Hyperbolic(Field, Field),
    /// Re φ^ζ, Im φ^ζ.
    Elliptic(Field),
}

impl Transported {
    pub fn is_elliptic(&self) -> bool {
        matches!(self, Transported::Elliptic(_))
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CsOptions {
    /// Membership threshold C in C·h²·‖ρ‖_∞.
    pub c: f64,
    /// Interior margin of the residual.
    pub margin: usize,
    /// Radicand of ρ closer than this to 0 is degenerate.
    pub degenerate_tol: f64,
}

impl Default for CsOptions {
    fn default() -> Self {
        CsOptions { c: 10.0, margin: 2, degenerate_tol: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsStatus {
    Member,
    NonMember,
    SignFailure,
    Degenerate,
}

/// A candidate with its transported data and membership verdict.
#[derive(Clone, Debug)]
pub struct CsCandidate {
    pub spec: CandidateSpec,
    pub fields: Transported,
    pub signs: SignReport,
    pub rho: Option<Field>,
    pub residual: f64,
    pub residual_at: Vec<usize>,
    pub threshold: f64,
    pub status: CsStatus,
}

impl CsCandidate {
    pub fn is_member(&self) -> bool {
        self.status == CsStatus::Member
    }
}

/// Cubic Lagrange interpolation of node values at fractional position j + c.
pub fn lagrange4(vals: &[f64], j: usize, c: f64) -> f64 {
    let n = vals.len();
    let s = j.saturating_sub(1).min(n.saturating_sub(4));
    let x = j as f64 + c;
    let mut out = 0.0;
    for i in s..(s + 4).min(n) {
        let mut l = 1.0;
        for k in s..(s + 4).min(n) {
            if k != i {
                l *= (x - k as f64) / (i as f64 - k as f64);
            }
        }
        out += l * vals[i];
    }
    out
}

/// RK4 for φ′ = 2γφ on a grid line seeded at node `j0`.
pub fn transport_line(gamma: &[f64], h: f64, j0: usize, seed: f64) -> Vec<f64> {
    let n = gamma.len();
    let mut out = vec![0.0; n];
    out[j0] = seed;
    let rate = |j: usize, c: f64| 2.0 * lagrange4(gamma, j, c);
    for j in j0..n - 1 {
        let y = out[j];
        let (a, m, b) = (rate(j, 0.0), rate(j, 0.5), rate(j, 1.0));
        let k1 = a * y;
        let k2 = m * (y + 0.5 * h * k1);
        let k3 = m * (y + 0.5 * h * k2);
        let k4 = b * (y + h * k3);
        out[j + 1] = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    for j in (1..=j0).rev() {
        let y = out[j];
        let (a, m, b) = (rate(j - 1, 1.0), rate(j - 1, 0.5), rate(j - 1, 0.0));
        let hh = -h;
        let k1 = a * y;
        let k2 = m * (y + 0.5 * hh * k1);
        let k3 = m * (y + 0.5 * hh * k2);
        let k4 = b * (y + hh * k3);
        out[j - 1] = y + hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    out
}

fn seed_node(axis: &Axis) -> Result<usize> {
    axis.node_of(0.0)
        .ok_or_else(|| GeomError::InvalidGrid(format!("axis {} does not contain the seed line 0", axis.name)))
}

/// φ^U with φ^U_v = 2Γ¹φ^U, φ^U(u,0) = U(u); φ^V with φ^V_u = 2Γ²φ^V, φ^V(0,v) = V(v).
pub fn transport_hyperbolic(u_vals: &[f64], v_vals: &[f64], geo: &SurfaceGeometry) -> Result<(Field, Field)> {
    let chart = geo.chart().clone();
    let (nu, nv) = (chart.axes[0].count, chart.axes[1].count);
    if u_vals.len() != nu || v_vals.len() != nv {
        return Err(GeomError::Dimension { expected: nu, got: u_vals.len() });
    }
    let (i0, j0) = (seed_node(&chart.axes[0])?, seed_node(&chart.axes[1])?);
    let (hu, hv) = (chart.axes[0].step, chart.axes[1].step);
    let mut pu = Field::zeros(chart.clone(), 1);
    let mut pv = Field::zeros(chart, 1);
    for i in 0..nu {
        let g1: Vec<f64> = (0..nv).map(|j| geo.gamma_real(&[i, j]).0).collect();
        for (j, x) in transport_line(&g1, hv, j0, u_vals[i]).into_iter().enumerate() {
            pu.at_mut(&[i, j])[0] = x;
        }
    }
    for j in 0..nv {
        let g2: Vec<f64> = (0..nu).map(|i| geo.gamma_real(&[i, j]).1).collect();
        for (i, x) in transport_line(&g2, hu, i0, v_vals[j]).into_iter().enumerate() {
            pv.at_mut(&[i, j])[0] = x;
        }
    }
    Ok((pu, pv))
}

/// Solve ΔΦ = rhs with Φ = 0 on the chart boundary (5-point Laplacian, CG).
pub fn poisson_dirichlet(chart: &GridChart, rhs: &[f64]) -> Vec<f64> {
    let (nu, nv) = (chart.axes[0].count, chart.axes[1].count);
    let (hu, hv) = (chart.axes[0].step, chart.axes[1].step);
    let (mu, mv) = (nu - 2, nv - 2);
    let k = |i: usize, j: usize| i * mv + j;
    // A = −Δ restricted to interior nodes: symmetric positive definite
    let apply = |x: &[f64], y: &mut [f64]| {
        for i in 0..mu {
            for j in 0..mv {
                let c = x[k(i, j)];
                let l = if i > 0 { x[k(i - 1, j)] } else { 0.0 };
                let r = if i + 1 < mu { x[k(i + 1, j)] } else { 0.0 };
                let d = if j > 0 { x[k(i, j - 1)] } else { 0.0 };
                let t = if j + 1 < mv { x[k(i, j + 1)] } else { 0.0 };
                y[k(i, j)] = (2.0 * c - l - r) / (hu * hu) + (2.0 * c - d - t) / (hv * hv);
            }
        }
    };
    let b: Vec<f64> = (0..mu * mv).map(|q| -rhs[(q / mv + 1) * nv + q % mv + 1]).collect();
    let mut x = vec![0.0; mu * mv];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; mu * mv];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let bn = dot(&b, &b).sqrt().max(1e-300);
    let mut rr = dot(&r, &r);
    for _ in 0..10 * (mu + mv) * 10 {
        if rr.sqrt() <= 1e-14 * bn {
            break;
        }
        apply(&p, &mut ap);
        let a = rr / dot(&p, &ap);
        for q in 0..x.len() {
            x[q] += a * p[q];
            r[q] -= a * ap[q];
        }
        let rn = dot(&r, &r);
        let beta = rn / rr;
        rr = rn;
        for q in 0..p.len() {
            p[q] = r[q] + beta * p[q];
        }
    }
    let mut out = vec![0.0; nu * nv];
    for i in 0..mu {
        for j in 0..mv {
            out[(i + 1) * nv + j + 1] = x[k(i, j)];
        }
    }
    out
}

/// φ^ζ = ζ(z)·e^{H − H(anchor)} with H_z̄ = 2Γ, H = 2(Φ_u − iΦ_v), ΔΦ = 2Γ.
///
/// Returns Re, Im of φ^ζ as a two-component field.
pub fn transport_elliptic(zeta: &ZetaFn, geo: &SurfaceGeometry) -> Result<Field> {
    let chart = geo.chart().clone();
    let (i0, j0) = (seed_node(&chart.axes[0])?, seed_node(&chart.axes[1])?);
    let len = chart.len();
    let mut re = vec![0.0; len];
    let mut im = vec![0.0; len];
    for q in 0..len {
        let g = geo.gamma_complex(&chart.unflat(q));
        re[q] = 2.0 * g.re;
        im[q] = 2.0 * g.im;
    }
    let phi_re = Field::from_data(chart.clone(), 1, poisson_dirichlet(&chart, &re))?;
    let phi_im = Field::from_data(chart.clone(), 1, poisson_dirichlet(&chart, &im))?;
    let hfn = |idx: &[usize]| {
        let du = Complex64::new(phi_re.d1_at(idx, 0)[0], phi_im.d1_at(idx, 0)[0]);
        let dv = Complex64::new(phi_re.d1_at(idx, 1)[0], phi_im.d1_at(idx, 1)[0]);
        2.0 * (du - Complex64::i() * dv)
    };
    let h0 = hfn(&[i0, j0]);
    Ok(Field::from_index_fn(chart.clone(), 2, |idx, out| {
        let x = chart.coords(idx);
        let z = Complex64::new(x[0], x[1]);
        let p = zeta.eval(z) * (hfn(idx) - h0).exp();
        out[0] = p.re;
        out[1] = p.im;
    }))
}

pub fn sign_conditions(fields: &Transported) -> SignReport {
    let (chart, check): (&GridChart, Box<dyn Fn(usize) -> Option<Branch> + '_>) = match fields {
        Transported::Hyperbolic(pu, pv) => (&pu.chart, Box::new(move |q| hyperbolic_branch(pu.data[q], pv.data[q]))),
        Transported::Elliptic(pz) => (
            &pz.chart,
            Box::new(move |q| {
                let z = Complex64::new(pz.data[2 * q], pz.data[2 * q + 1]);
                elliptic_admissible(z).then_some(Branch::Elliptic)
            }),
        ),
    };
    let mut branch: Option<Branch> = None;
    let mut first = None;
    let mut failures = 0;
    for q in 0..chart.len() {
        let b = check(q);
        let ok = match (b, branch) {
            (None, _) => false,
            (Some(b), None) => {
                branch = Some(b);
                true
            }
            (Some(b), Some(c)) => b == c,
        };
        if !ok {
            failures += 1;
            if first.is_none() {
                first = Some(chart.unflat(q));
            }
        }
    }
    SignReport { branch: if failures == 0 { branch } else { None }, first_failure: first, failures }
}

/// ρ = √|2(φ^U + φ^V) + 1| or √(−(4 Re φ^ζ + 1)).
pub fn rho(fields: &Transported, tol: f64) -> Result<Field> {
    let (chart, rad): (&GridChart, Box<dyn Fn(usize) -> f64 + '_>) = match fields {
        Transported::Hyperbolic(pu, pv) => (&pu.chart, Box::new(move |q| (2.0 * (pu.data[q] + pv.data[q]) + 1.0).abs())),
        Transported::Elliptic(pz) => (&pz.chart, Box::new(move |q| -(4.0 * pz.data[2 * q] + 1.0))),
    };
    let mut data = Vec::with_capacity(chart.len());
    for q in 0..chart.len() {
        let r = rad(q);
        if !(r > tol) {
            return Err(GeomError::DegenerateCandidate { index: chart.unflat(q), detail: format!("radicand of rho = {r:e}") });
        }
        data.push(r.sqrt());
    }
    Field::from_data(chart.clone(), 1, data)
}

/// Transport a candidate on the surface geometry.
pub fn transport(spec: &CandidateSpec, geo: &SurfaceGeometry) -> Result<Transported> {
    match spec {
        CandidateSpec::Hyperbolic { u, v, normalize_by_conformal_factor } => {
            let chart = geo.chart();
            let j0 = seed_node(&chart.axes[1])?;
            let i0 = seed_node(&chart.axes[0])?;
            let e2l_u: Vec<f64> = (0..chart.axes[0].count).map(|i| geo.area_factor(&[i, j0])).collect();
            let e2l_v: Vec<f64> = (0..chart.axes[1].count).map(|j| geo.area_factor(&[i0, j])).collect();
            let uv = u.values(&chart.axes[0], &e2l_u)?;
            let vv = v.values(&chart.axes[1], &e2l_v)?;
            let (mut pu, pv) = transport_hyperbolic(&uv, &vv, geo)?;
            if *normalize_by_conformal_factor {
                for q in 0..chart.len() {
                    pu.data[q] *= geo.area_factor(&chart.unflat(q));
                }
            }
            Ok(Transported::Hyperbolic(pu, pv))
        }
        CandidateSpec::Elliptic { zeta } => Ok(Transported::Elliptic(transport_elliptic(zeta, geo)?)),
    }
}

/// max |Q(ρ)| over the interior and the membership threshold C·h²·‖ρ‖_∞.
pub fn membership_residual(rho: &Field, geo: &SurfaceGeometry, elliptic: bool, opts: &CsOptions) -> (f64, Vec<usize>, f64) {
    let b = rho.chart.interior(opts.margin);
    let (r, at) = max_q(rho, geo, &b, elliptic);
    let h = rho.chart.axes[0].step.max(rho.chart.axes[1].step);
    let rmax = rho.max_abs_in(&b, 0).0;
    (r, at, opts.c * h * h * rmax)
}

/// Full membership decision for one candidate.
pub fn evaluate_candidate(spec: &CandidateSpec, geo: &SurfaceGeometry, opts: &CsOptions) -> Result<CsCandidate> {
    let fields = transport(spec, geo)?;
    let signs = sign_conditions(&fields);
    let mut cand = CsCandidate {
        spec: spec.clone(),
        fields,
        signs,
        rho: None,
        residual: f64::NAN,
        residual_at: Vec::new(),
        threshold: f64::NAN,
        status: CsStatus::SignFailure,
    };
    if cand.signs.branch.is_none() {
        return Ok(cand);
    }
    let r = match rho(&cand.fields, opts.degenerate_tol) {
        Ok(r) => r,
        Err(GeomError::DegenerateCandidate { .. }) => {
            cand.status = CsStatus::Degenerate;
            return Ok(cand);
        }
        Err(e) => return Err(e),
    };
    let (res, at, thr) = membership_residual(&r, geo, cand.fields.is_elliptic(), opts);
    cand.residual = res;
    cand.residual_at = at;
    cand.threshold = thr;
    cand.status = if res <= thr { CsStatus::Member } else { CsStatus::NonMember };
    cand.rho = Some(r);
    Ok(cand)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branches() {
        assert_eq!(hyperbolic_branch(1.0, 1.0), Some(Branch::Positive));
        assert_eq!(hyperbolic_branch(0.1, -1.0), Some(Branch::UPositive));
        assert_eq!(hyperbolic_branch(-1.0, 0.1), Some(Branch::VPositive));
        assert_eq!(hyperbolic_branch(-0.25, -0.25), None);
        assert!(elliptic_admissible(Complex64::new(-1.0, 0.3)));
        assert!(!elliptic_admissible(Complex64::new(-0.2, 0.0)));
    }

    #[test]
    fn rk4_line_matches_exponential() {
        let h = 0.01;
        let n = 101;
        let g = vec![0.7; n];
        let out = transport_line(&g, h, 50, 1.5);
        for (j, x) in out.iter().enumerate() {
            let v = (j as f64 - 50.0) * h;
            let ex = 1.5 * (1.4 * v).exp();
            assert!(((x - ex) / ex).abs() < 1e-8);
        }
    }

    #[test]
    fn lagrange_reproduces_cubics() {
        let vals: Vec<f64> = (0..8).map(|i| {
            let x = i as f64;
            x * x * x - 2.0 * x + 1.0
        }).collect();
        for j in 0..7 {
            let x = j as f64 + 0.3;
            assert!((lagrange4(&vals, j, 0.3) - (x * x * x - 2.0 * x + 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn boundary_polynomial() {
        let ax = Axis::centered("u", 0.5, 5);
        let p = BoundaryFn::Polynomial { coeffs: vec![1.0, 0.0, 1.0] };
        assert_eq!(p.values(&ax, &[1.0; 5]).unwrap(), vec![2.0, 1.25, 1.0, 1.25, 2.0]);
        let l = BoundaryFn::UFromLambda { c: 2.0, scale: 0.5 };
        assert_eq!(l.values(&ax, &[0.5; 5]).unwrap(), vec![1.0; 5]);
    }

    #[test]
    fn poisson_recovers_quadratic_bubble() {
        // Φ = (1 − u²)(1 − v²)/… on [−1,1]²: exact for the 5-point stencil up to O(h²)
        let chart = GridChart::centered(&["u", "v"], &[41, 41], 0.05);
        let rhs: Vec<f64> = (0..chart.len())
            .map(|q| {
                let x = chart.coords(&chart.unflat(q));
                -2.0 * (1.0 - x[1] * x[1]) - 2.0 * (1.0 - x[0] * x[0])
            })
            .collect();
        let sol = poisson_dirichlet(&chart, &rhs);
        for q in 0..chart.len() {
            let x = chart.coords(&chart.unflat(q));
            let ex = (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]);
            assert!((sol[q] - ex).abs() < 1e-10);
        }
    }
}
