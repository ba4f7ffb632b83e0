//! Uniform tensor-product grids, sampled fields and finite-difference jets.
//!
//! Fields are stored row-major with the component index last. Derivative
//! stencils are second-order central differences in the interior and
//! second-order one-sided differences on the boundary.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};

/// Smallest admissible sample count per axis.
pub const MIN_SAMPLES: usize = 5;

/// One coordinate axis: `count` samples `start + i * step`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(name: &str, start: f64, step: f64, count: usize) -> Self {
        Axis { name: name.to_string(), start, step, count }
    }

    /// Axis with the node `count / 2` at coordinate zero.
    pub fn centered(name: &str, step: f64, count: usize) -> Self {
        Axis::new(name, -((count / 2) as f64) * step, step, count)
    }

    pub fn value(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.value(self.count - 1)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.value(i)).collect()
    }

    /// Index of the node closest to `x`, if `x` is a node up to round-off.
    pub fn node_of(&self, x: f64) -> Option<usize> {
        let r = (x - self.start) / self.step;
        let i = r.round();
        if i >= 0.0 && (i as usize) < self.count && (r - i).abs() < 1e-9 {
            Some(i as usize)
        } else {
            None
        }
    }
}

/// A uniform grid chart: the product of its axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridChart {
    pub axes: Vec<Axis>,
}

impl GridChart {
    pub fn new(axes: Vec<Axis>) -> Self {
        GridChart { axes }
    }

    /// Chart with every axis centred at zero and spacing `h`.
    pub fn centered(names: &[&str], counts: &[usize], h: f64) -> Self {
        GridChart::new(
            names.iter().zip(counts).map(|(n, &c)| Axis::centered(n, h, c)).collect(),
        )
    }

    /// Check sample counts and spacings.
    pub fn validate(&self) -> Result<()> {
        for (k, a) in self.axes.iter().enumerate() {
            if a.count < MIN_SAMPLES {
                return Err(GeomError::GridTooSmall { axis: k, count: a.count, need: MIN_SAMPLES });
            }
            if !(a.step > 0.0) || !a.step.is_finite() {
                return Err(GeomError::InvalidGrid(format!("axis {k} has step {}", a.step)));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn steps(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.step).collect()
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        let mut k = 0;
        for (a, &i) in self.axes.iter().zip(idx) {
            k = k * a.count + i;
        }
        k
    }

    pub fn unflat(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            let c = self.axes[d].count;
            idx[d] = k % c;
            k /= c;
        }
        idx
    }

    pub fn coords(&self, idx: &[usize]) -> Vec<f64> {
        self.axes.iter().zip(idx).map(|(a, &i)| a.value(i)).collect()
    }

    /// Index of the all-zero coordinate node, if the chart contains it.
    pub fn origin(&self) -> Option<Vec<usize>> {
        self.axes.iter().map(|a| a.node_of(0.0)).collect()
    }

    /// Sub-chart covering the index box `lo..hi` (exclusive) per axis.
    pub fn sub(&self, b: &IndexBox) -> GridChart {
        GridChart::new(
            self.axes
                .iter()
                .zip(b.lo.iter().zip(&b.hi))
                .map(|(a, (&l, &h))| Axis::new(&a.name, a.value(l), a.step, h - l))
                .collect(),
        )
    }

    pub fn full_box(&self) -> IndexBox {
        IndexBox { lo: vec![0; self.dim()], hi: self.shape() }
    }

    /// The index box with `margin` samples removed on every side of every axis.
    pub fn interior(&self, margin: usize) -> IndexBox {
        IndexBox {
            lo: vec![margin; self.dim()],
            hi: self.shape().iter().map(|&c| c.saturating_sub(margin).max(margin)).collect(),
        }
    }
}

/// Half-open index box `lo[d] <= i[d] < hi[d]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexBox {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

impl IndexBox {
    pub fn len(&self) -> usize {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h.saturating_sub(*l)).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, idx: &[usize]) -> bool {
        idx.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&i, (&l, &h))| i >= l && i < h)
    }

    /// Multi-indices of the box in row-major order.
    pub fn indices(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return out;
        }
        let mut idx = self.lo.clone();
        loop {
            out.push(idx.clone());
            let mut d = idx.len();
            loop {
                if d == 0 {
                    return out;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < self.hi[d] {
                    break;
                }
                idx[d] = self.lo[d];
            }
        }
    }

    /// Restrict axis `d` to the single index `i`.
    pub fn pin(mut self, d: usize, i: usize) -> Self {
        self.lo[d] = i;
        self.hi[d] = i + 1;
        self
    }

    pub fn intersect(&self, other: &IndexBox) -> IndexBox {
        IndexBox {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| *a.max(b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| *a.min(b)).collect(),
        }
    }
}

/// One-dimensional finite-difference stencil: offsets and weights (unscaled by h).
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub offsets: [isize; 4],
    pub weights: [f64; 4],
    pub len: usize,
}

impl Stencil {
    /// First-derivative stencil at index `i` of an axis with `n` samples.
    pub fn first(i: usize, n: usize) -> Stencil {
        if i == 0 {
            Stencil { offsets: [0, 1, 2, 0], weights: [-1.5, 2.0, -0.5, 0.0], len: 3 }
        } else if i + 1 == n {
            Stencil { offsets: [-2, -1, 0, 0], weights: [0.5, -2.0, 1.5, 0.0], len: 3 }
        } else {
            Stencil { offsets: [-1, 1, 0, 0], weights: [-0.5, 0.5, 0.0, 0.0], len: 2 }
        }
    }

    /// Second-derivative stencil at index `i` of an axis with `n` samples.
    pub fn second(i: usize, n: usize) -> Stencil {
        if i == 0 {
            Stencil { offsets: [0, 1, 2, 3], weights: [2.0, -5.0, 4.0, -1.0], len: 4 }
        } else if i + 1 == n {
            Stencil { offsets: [-3, -2, -1, 0], weights: [-1.0, 4.0, -5.0, 2.0], len: 4 }
        } else {
            Stencil { offsets: [-1, 0, 1, 0], weights: [1.0, -2.0, 1.0, 0.0], len: 3 }
        }
    }

    fn terms(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        self.offsets[..self.len].iter().copied().zip(self.weights[..self.len].iter().copied())
    }
}

/// Fourth-order central first-derivative weights on offsets -2..=2.
pub const CENTRAL4: [(isize, f64); 4] = [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];

/// A field of `ncomp` real components sampled on a grid chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub chart: GridChart,
    pub ncomp: usize,
    pub data: Vec<f64>,
}

impl Field {
    pub fn zeros(chart: GridChart, ncomp: usize) -> Self {
        let n = chart.len() * ncomp;
        Field { chart, ncomp, data: vec![0.0; n] }
    }

    pub fn from_data(chart: GridChart, ncomp: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != chart.len() * ncomp {
            return Err(GeomError::Dimension { expected: chart.len() * ncomp, got: data.len() });
        }
        Ok(Field { chart, ncomp, data })
    }

    /// Fill every sample in parallel from its multi-index.
    pub fn from_index_fn<F>(chart: GridChart, ncomp: usize, f: F) -> Self
    where
        F: Fn(&[usize], &mut [f64]) + Sync,
    {
        let mut data = vec![0.0; chart.len() * ncomp];
        data.par_chunks_mut(ncomp.max(1)).enumerate().for_each(|(k, out)| {
            let idx = chart.unflat(k);
            f(&idx, out);
        });
        Field { chart, ncomp, data }
    }

    /// Fill every sample in parallel from its coordinates.
    pub fn from_coord_fn<F>(chart: GridChart, ncomp: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        let c = chart.clone();
        Field::from_index_fn(chart, ncomp, move |idx, out| f(&c.coords(idx), out))
    }

    /// Fallible parallel fill; the first error in index order is returned.
    pub fn try_from_index_fn<F>(chart: GridChart, ncomp: usize, f: F) -> Result<Self>
    where
        F: Fn(&[usize], &mut [f64]) -> Result<()> + Sync,
    {
        let mut data = vec![0.0; chart.len() * ncomp];
        let errs: Vec<(usize, GeomError)> = data
            .par_chunks_mut(ncomp.max(1))
            .enumerate()
            .filter_map(|(k, out)| f(&chart.unflat(k), out).err().map(|e| (k, e)))
            .collect();
        if let Some((_, e)) = errs.into_iter().min_by_key(|(k, _)| *k) {
            return Err(e);
        }
        Ok(Field { chart, ncomp, data })
    }

    pub fn at(&self, idx: &[usize]) -> &[f64] {
        let k = self.chart.flat(idx) * self.ncomp;
        &self.data[k..k + self.ncomp]
    }

    pub fn at_mut(&mut self, idx: &[usize]) -> &mut [f64] {
        let k = self.chart.flat(idx) * self.ncomp;
        &mut self.data[k..k + self.ncomp]
    }

    pub fn at_flat(&self, k: usize) -> &[f64] {
        &self.data[k * self.ncomp..(k + 1) * self.ncomp]
    }

    /// Scalar component `c` at `idx`.
    pub fn get(&self, idx: &[usize], c: usize) -> f64 {
        self.data[self.chart.flat(idx) * self.ncomp + c]
    }

    pub fn component(&self, c: usize) -> Field {
        let data = self.data.chunks(self.ncomp).map(|s| s[c]).collect();
        Field { chart: self.chart.clone(), ncomp: 1, data }
    }

    /// Copy of the samples in `b`, on the corresponding sub-chart.
    pub fn restrict(&self, b: &IndexBox) -> Field {
        let chart = self.chart.sub(b);
        let mut data = Vec::with_capacity(b.len() * self.ncomp);
        for idx in b.indices() {
            data.extend_from_slice(self.at(&idx));
        }
        Field { chart, ncomp: self.ncomp, data }
    }

    fn shifted(&self, idx: &[usize], axis: usize, off: isize, buf: &mut Vec<usize>) -> usize {
        buf.clear();
        buf.extend_from_slice(idx);
        buf[axis] = (idx[axis] as isize + off) as usize;
        self.chart.flat(buf) * self.ncomp
    }

    /// First derivative along `axis` at `idx`.
    pub fn d1_at(&self, idx: &[usize], axis: usize) -> Vec<f64> {
        let a = &self.chart.axes[axis];
        let st = Stencil::first(idx[axis], a.count);
        let mut out = vec![0.0; self.ncomp];
        let mut buf = Vec::with_capacity(idx.len());
        for (o, w) in st.terms() {
            let k = self.shifted(idx, axis, o, &mut buf);
            for c in 0..self.ncomp {
                out[c] += w * self.data[k + c];
            }
        }
        for v in &mut out {
            *v /= a.step;
        }
        out
    }

    /// Second derivative along axes `a` and `b` at `idx`.
    pub fn d2_at(&self, idx: &[usize], a: usize, b: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.ncomp];
        let ha = self.chart.axes[a].step;
        let hb = self.chart.axes[b].step;
        let mut buf = Vec::with_capacity(idx.len());
        if a == b {
            let st = Stencil::second(idx[a], self.chart.axes[a].count);
            for (o, w) in st.terms() {
                let k = self.shifted(idx, a, o, &mut buf);
                for c in 0..self.ncomp {
                    out[c] += w * self.data[k + c];
                }
            }
            for v in &mut out {
                *v /= ha * ha;
            }
            return out;
        }
        let sa = Stencil::first(idx[a], self.chart.axes[a].count);
        let sb = Stencil::first(idx[b], self.chart.axes[b].count);
        let mut inner = idx.to_vec();
        for (oa, wa) in sa.terms() {
            inner[a] = (idx[a] as isize + oa) as usize;
            for (ob, wb) in sb.terms() {
                let k = self.shifted(&inner, b, ob, &mut buf);
                let w = wa * wb;
                for c in 0..self.ncomp {
                    out[c] += w * self.data[k + c];
                }
            }
        }
        for v in &mut out {
            *v /= ha * hb;
        }
        out
    }

    /// Fourth-order central first derivative; `None` within two samples of the boundary.
    pub fn d1_at_4(&self, idx: &[usize], axis: usize) -> Option<Vec<f64>> {
        let a = &self.chart.axes[axis];
        if idx[axis] < 2 || idx[axis] + 2 >= a.count {
            return None;
        }
        let mut out = vec![0.0; self.ncomp];
        let mut buf = Vec::with_capacity(idx.len());
        for (o, w) in CENTRAL4 {
            let k = self.shifted(idx, axis, o, &mut buf);
            for c in 0..self.ncomp {
                out[c] += w * self.data[k + c];
            }
        }
        for v in &mut out {
            *v /= a.step;
        }
        Some(out)
    }

    /// Whole-grid first derivative along `axis`.
    pub fn d1(&self, axis: usize) -> Field {
        let n = self.ncomp;
        Field::from_index_fn(self.chart.clone(), n, |idx, out| out.copy_from_slice(&self.d1_at(idx, axis)))
    }

    /// Whole-grid second derivative along `a`, `b`.
    pub fn d2(&self, a: usize, b: usize) -> Field {
        let n = self.ncomp;
        Field::from_index_fn(self.chart.clone(), n, |idx, out| out.copy_from_slice(&self.d2_at(idx, a, b)))
    }

    /// Maximum absolute value of component `c` over the box, with its location.
    pub fn max_abs_in(&self, b: &IndexBox, c: usize) -> (f64, Vec<usize>) {
        let mut best = (0.0, b.lo.clone());
        for idx in b.indices() {
            let v = self.get(&idx, c).abs();
            if v > best.0 || v.is_nan() {
                best = (v, idx);
            }
        }
        best
    }
}

/// Location of the maximum of a per-sample value over an index box.
pub fn max_over<F>(b: &IndexBox, f: F) -> (f64, Vec<usize>)
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    b.indices()
        .into_par_iter()
        .map(|idx| (f(&idx), idx))
        .reduce(
            || (f64::NEG_INFINITY, Vec::new()),
            |a, b| {
                if b.0 > a.0 || (b.0.is_nan() && !a.0.is_nan()) || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart2(h: f64, n: usize) -> GridChart {
        GridChart::centered(&["u", "v"], &[n, n], h)
    }

    #[test]
    fn centered_axis_contains_zero() {
        let a = Axis::centered("u", 0.1, 8);
        assert_eq!(a.node_of(0.0), Some(4));
        assert!((a.value(0) + 0.4).abs() < 1e-15);
        assert_eq!(Axis::centered("u", 0.1, 7).node_of(0.0), Some(3));
    }

    #[test]
    fn flat_unflat_roundtrip() {
        let c = GridChart::centered(&["a", "b", "c"], &[5, 6, 7], 0.1);
        for k in 0..c.len() {
            assert_eq!(c.flat(&c.unflat(k)), k);
        }
    }

    #[test]
    fn box_indices_row_major() {
        let b = IndexBox { lo: vec![1, 2], hi: vec![3, 4] };
        assert_eq!(b.indices(), vec![vec![1, 2], vec![1, 3], vec![2, 2], vec![2, 3]]);
        assert_eq!(b.len(), 4);
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let f = Field::from_coord_fn(chart2(0.1, 6), 1, |_, o| o[0] = 3.0);
        for idx in f.chart.full_box().indices() {
            assert!(f.d1_at(&idx, 0)[0].abs() < 1e-12);
            assert!(f.d2_at(&idx, 0, 1)[0].abs() < 1e-12);
            assert!(f.d2_at(&idx, 1, 1)[0].abs() < 1e-10);
        }
    }

    #[test]
    fn bilinear_cross_stencil_is_exact() {
        let f = Field::from_coord_fn(chart2(0.07, 7), 1, |x, o| o[0] = x[0] * x[1]);
        for idx in f.chart.full_box().indices() {
            assert!((f.d2_at(&idx, 0, 1)[0] - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn quadratics_are_exact_including_boundary() {
        let f = Field::from_coord_fn(chart2(0.1, 6), 1, |x, o| o[0] = 2.0 * x[0] * x[0] - x[1]);
        for idx in f.chart.full_box().indices() {
            let x = f.chart.coords(&idx);
            assert!((f.d1_at(&idx, 0)[0] - 4.0 * x[0]).abs() < 1e-11);
            assert!((f.d2_at(&idx, 0, 0)[0] - 4.0).abs() < 1e-9);
            assert!((f.d1_at(&idx, 1)[0] + 1.0).abs() < 1e-11);
        }
    }

    fn mixed_error(h: f64) -> f64 {
        let n = (1.0 / h).round() as usize + 1;
        let f = Field::from_coord_fn(chart2(h, n), 1, |x, o| o[0] = x[0].sin() * x[1].cos());
        let b = f.chart.interior(1);
        max_over(&b, |idx| {
            let x = f.chart.coords(idx);
            (f.d2_at(idx, 0, 1)[0] + x[0].cos() * x[1].sin()).abs()
        })
        .0
    }

    #[test]
    fn mixed_derivative_converges_at_order_two() {
        let r = mixed_error(0.05) / mixed_error(0.025);
        assert!((3.5..=4.5).contains(&r), "ratio {r}");
    }

    #[test]
    fn fourth_order_stencil() {
        let f = Field::from_coord_fn(chart2(0.1, 9), 1, |x, o| o[0] = x[0].powi(4));
        let idx = [4, 4];
        assert!(f.d1_at_4(&idx, 0).unwrap()[0].abs() < 1e-12);
        assert!(f.d1_at_4(&[1, 4], 0).is_none());
    }

    #[test]
    fn validate_rejects_small_axis() {
        let c = GridChart::centered(&["u"], &[4], 0.1);
        assert!(matches!(c.validate(), Err(GeomError::GridTooSmall { .. })));
    }
}
