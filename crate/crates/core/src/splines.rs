//! B-spline knot vectors and sampled basis matrices.
//!
//! Two knot layouts are supported. Normalized knots are clamped at both ends
//! of `[0, 1]` with uniformly spaced interior knots and are used for
//! full-horizon command parameterization. Open-ended knots are clamped only at
//! `t = 0` and then advance by a fixed multiple of the sample period, which is
//! what the windowed (limited-preview) solver needs since the trajectory end is
//! not known up front.
//!
//! Spans are half-open `[g_j, g_{j+1})` except at the final knot, where the
//! last nondegenerate span is closed so the curve end point is representable.

use alloc::vec::Vec;
use core::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnotMode {
    /// Clamped on `[0, 1]`, uniform interior knots.
    Normalized,
    /// Clamped at zero, then uniformly spaced in seconds with no fixed end.
    OpenEnded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    values: Vec<f64>,
    degree: usize,
    mode: KnotMode,
}

impl KnotVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn mode(&self) -> KnotMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of degree-`degree` basis functions this vector supports.
    pub fn basis_count(&self) -> usize {
        self.values.len().saturating_sub(self.degree + 1)
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Index `i` of the span `[g_i, g_{i+1})` containing `xi`, restricted to
    /// spans where all `degree + 1` overlapping basis functions exist.
    fn find_span(&self, xi: f64) -> Result<usize> {
        let g = &self.values;
        let m = self.degree;
        let n = self.basis_count() - 1;
        if !(xi >= g[m] && xi <= g[n + 1]) {
            return Err(Error::OutsideKnotRange {
                value: xi,
                lo: g[m],
                hi: g[n + 1],
            });
        }
        if xi >= g[n + 1] {
            // Closed final span: walk back over repeated end knots.
            let mut i = n;
            while i > m && g[i] >= g[n + 1] {
                i -= 1;
            }
            return Ok(i);
        }
        // Largest i in [m, n] with g[i] <= xi.
        let (mut lo, mut hi) = (m, n + 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if g[mid] <= xi {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// Values of the `degree + 1` basis functions that are nonzero at `xi`,
    /// along with the index of the first one.
    fn nonzero_basis(&self, xi: f64, out: &mut [f64]) -> Result<usize> {
        let m = self.degree;
        let g = &self.values;
        let span = self.find_span(xi)?;
        if xi == g[g.len() - 1] && g[span + 1] == xi && g[span + m] == xi {
            // Clamped right end: only the last function is nonzero, exactly 1.
            out[..m].fill(0.0);
            out[m] = 1.0;
            return Ok(span - m);
        }
        if xi == g[0] && g[span] == xi && g[span + 1 - m] == xi {
            // Clamped left end, likewise exact.
            out[0] = 1.0;
            out[1..=m].fill(0.0);
            return Ok(span - m);
        }
        let mut left = [0.0f64; 32];
        let mut right = [0.0f64; 32];
        out[0] = 1.0;
        for d in 1..=m {
            left[d] = xi - g[span + 1 - d];
            right[d] = g[span + d] - xi;
            let mut saved = 0.0;
            for r in 0..d {
                let denom = right[r + 1] + left[d - r];
                let temp = if denom == 0.0 { 0.0 } else { out[r] / denom };
                out[r] = saved + right[r + 1] * temp;
                saved = left[d - r] * temp;
            }
            out[d] = saved;
        }
        Ok(span - m)
    }
}

/// Largest supported degree for basis evaluation.
pub const MAX_DEGREE: usize = 30;

/// Clamped knot vector on `[0, 1]` for `n + 1` basis functions of degree `m`.
pub fn build_normalized_knots(m: usize, n: usize) -> Result<KnotVector> {
    if m == 0 || m > MAX_DEGREE {
        return Err(Error::InvalidParameter("degree must be in 1..=30"));
    }
    if n < m {
        return Err(Error::InvalidParameter("n must be at least the degree m"));
    }
    let interior = (n - m + 1) as f64;
    let values = (0..m + n + 2)
        .map(|j| {
            if j <= m {
                0.0
            } else if j <= n {
                (j - m) as f64 / interior
            } else {
                1.0
            }
        })
        .collect();
    Ok(KnotVector {
        values,
        degree: m,
        mode: KnotMode::Normalized,
    })
}

/// Open-ended knot vector: `m + 1` zeros followed by `(j - m)·L·Ts`.
pub fn build_open_knots(m: usize, spacing: usize, ts: f64, count: usize) -> Result<KnotVector> {
    if m == 0 || m > MAX_DEGREE {
        return Err(Error::InvalidParameter("degree must be in 1..=30"));
    }
    if !(ts > 0.0) || !ts.is_finite() {
        return Err(Error::InvalidParameter("sample period must be positive"));
    }
    if spacing == 0 {
        return Err(Error::InvalidParameter("knot spacing L must be at least 1"));
    }
    if count <= m + 1 {
        return Err(Error::InvalidParameter("knot count must exceed m + 1"));
    }
    let step = spacing as f64 * ts;
    let values = (0..count)
        .map(|j| if j <= m { 0.0 } else { (j - m) as f64 * step })
        .collect();
    Ok(KnotVector {
        values,
        degree: m,
        mode: KnotMode::OpenEnded,
    })
}

fn indicator(g: &[f64], j: usize, xi: f64) -> f64 {
    let (a, b) = (g[j], g[j + 1]);
    let last = g[g.len() - 1];
    if a < b && ((a <= xi && xi < b) || (xi == b && b == last)) {
        1.0
    } else {
        0.0
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn cox_de_boor(g: &[f64], j: usize, m: usize, xi: f64) -> f64 {
    if m == 0 {
        return indicator(g, j, xi);
    }
    let left = ratio(xi - g[j], g[j + m] - g[j]);
    let right = ratio(g[j + m + 1] - xi, g[j + m + 1] - g[j + 1]);
    let mut acc = 0.0;
    if left != 0.0 {
        acc += left * cox_de_boor(g, j, m - 1, xi);
    }
    if right != 0.0 {
        acc += right * cox_de_boor(g, j + 1, m - 1, xi);
    }
    acc
}

/// `N_{j,m}(xi)` by direct Cox–de Boor recursion over `knots`.
///
/// `m` may differ from the degree the knot vector was built for; the only
/// requirement is that knot `j + m + 1` exists.
pub fn eval_basis(j: usize, m: usize, xi: f64, knots: &KnotVector) -> Result<f64> {
    let g = knots.values();
    if j + m + 1 >= g.len() {
        return Err(Error::IndexOutOfRange {
            index: j,
            max: g.len().saturating_sub(m + 2),
        });
    }
    let (lo, hi) = (g[0], g[g.len() - 1]);
    if !(xi >= lo && xi <= hi) {
        return Err(Error::OutsideKnotRange { value: xi, lo, hi });
    }
    Ok(cox_de_boor(g, j, m, xi))
}

/// Sampled basis functions: entry `(k, j) = N_{j,m}(ξ_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    entries: DMatrix<f64>,
    knots: KnotVector,
    sample_parameters: Vec<f64>,
}

impl BasisMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn degree(&self) -> usize {
        self.knots.degree()
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn sample_parameters(&self) -> &[f64] {
        &self.sample_parameters
    }

    /// Number of rows, `E + 1`.
    pub fn samples(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of columns, `n + 1`.
    pub fn columns(&self) -> usize {
        self.entries.ncols()
    }
}

/// Basis values of columns `cols` sampled at `params`.
pub fn sample_basis(knots: &KnotVector, params: &[f64], cols: Range<usize>) -> Result<DMatrix<f64>> {
    let m = knots.degree();
    if cols.end > knots.basis_count() {
        return Err(Error::IndexOutOfRange {
            index: cols.end.saturating_sub(1),
            max: knots.basis_count().saturating_sub(1),
        });
    }
    let mut out = DMatrix::zeros(params.len(), cols.len());
    let mut vals = [0.0f64; MAX_DEGREE + 1];
    for (k, &xi) in params.iter().enumerate() {
        let first = knots.nonzero_basis(xi, &mut vals[..=m])?;
        for (d, &v) in vals[..=m].iter().enumerate() {
            let j = first + d;
            if cols.contains(&j) {
                out[(k, j - cols.start)] = v;
            }
        }
    }
    Ok(out)
}

/// Full-horizon basis matrix with `E + 1` uniform samples of `[0, 1]` and
/// `n + 1` degree-`m` basis functions on normalized knots.
pub fn build_basis_matrix(last_sample: usize, n: usize, m: usize) -> Result<BasisMatrix> {
    if last_sample < n {
        return Err(Error::InvalidParameter("E must be at least n"));
    }
    let knots = build_normalized_knots(m, n)?;
    let e = last_sample as f64;
    let sample_parameters: Vec<f64> = (0..=last_sample)
        .map(|k| if k == last_sample { 1.0 } else { k as f64 / e })
        .collect();
    let entries = sample_basis(&knots, &sample_parameters, 0..n + 1)?;
    Ok(BasisMatrix {
        entries,
        knots,
        sample_parameters,
    })
}

/// Basis matrix on open-ended knots, sampled at `t_k = k·Ts` for the given
/// sample range. Columns are the requested basis indices.
pub fn build_open_basis_matrix(
    knots: &KnotVector,
    ts: f64,
    samples: Range<usize>,
    cols: Range<usize>,
) -> Result<BasisMatrix> {
    if knots.mode() != KnotMode::OpenEnded {
        return Err(Error::InvalidParameter("open basis needs open-ended knots"));
    }
    let sample_parameters: Vec<f64> = samples.map(|k| k as f64 * ts).collect();
    let entries = sample_basis(knots, &sample_parameters, cols)?;
    Ok(BasisMatrix {
        entries,
        knots: knots.clone(),
        sample_parameters,
    })
}

impl BasisMatrix {
    /// Wrap an already sampled matrix. Used for custom sample grids.
    pub fn from_parts(entries: DMatrix<f64>, knots: KnotVector, sample_parameters: Vec<f64>) -> Result<Self> {
        if entries.nrows() != sample_parameters.len() {
            return Err(Error::DimensionMismatch {
                what: "basis rows vs sample parameters",
                expected: sample_parameters.len(),
                got: entries.nrows(),
            });
        }
        Ok(Self {
            entries,
            knots,
            sample_parameters,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_knot_examples() {
        assert_eq!(
            build_normalized_knots(2, 4).unwrap().values(),
            &[0.0, 0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0, 1.0]
        );
        assert_eq!(build_normalized_knots(1, 1).unwrap().values(), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(
            build_normalized_knots(5, 5).unwrap().values(),
            &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]
        );
        assert!(build_normalized_knots(3, 2).is_err());
    }

    #[test]
    fn open_knot_examples() {
        let k = build_open_knots(2, 20, 0.001, 6).unwrap();
        let expect = [0.0, 0.0, 0.0, 0.02, 0.04, 0.06];
        for (a, b) in k.values().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let k = build_open_knots(5, 20, 0.001, 10).unwrap();
        assert!((k.values()[7] - 0.04).abs() < 1e-15);
        assert_eq!(build_open_knots(1, 1, 1.0, 4).unwrap().values(), &[0.0, 0.0, 1.0, 2.0]);
        assert!(build_open_knots(1, 1, 0.0, 4).is_err());
        assert!(build_open_knots(1, 1, -1.0, 4).is_err());
        assert!(build_open_knots(2, 1, 1.0, 3).is_err());
    }

    #[test]
    fn degree_zero_indicator() {
        let k = build_normalized_knots(1, 5).unwrap();
        assert_eq!(k.values()[2], 0.2);
        assert_eq!(k.values()[3], 0.4);
        assert_eq!(eval_basis(2, 0, 0.3, &k).unwrap(), 1.0);
        assert_eq!(eval_basis(2, 0, 0.5, &k).unwrap(), 0.0);
    }

    #[test]
    fn linear_hat_peaks_at_center() {
        let k = build_normalized_knots(1, 5).unwrap();
        // N_{2,1} is supported on [0.2, 0.6] with its peak at 0.4.
        assert!((eval_basis(2, 1, 0.4, &k).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eval_basis_partition_of_unity() {
        let k = build_normalized_knots(3, 10).unwrap();
        let s: f64 = (0..=10).map(|j| eval_basis(j, 3, 0.37, &k).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eval_basis_errors() {
        let k = build_normalized_knots(2, 4).unwrap();
        assert!(matches!(eval_basis(5, 2, 0.5, &k), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(eval_basis(0, 2, 1.5, &k), Err(Error::OutsideKnotRange { .. })));
        assert!(matches!(eval_basis(0, 2, -0.1, &k), Err(Error::OutsideKnotRange { .. })));
    }

    #[test]
    fn endpoint_rows() {
        let b = build_basis_matrix(1, 1, 1).unwrap();
        assert_eq!(b.entries(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        let b = build_basis_matrix(40, 12, 5).unwrap();
        let first = b.entries().row(0);
        let last = b.entries().row(40);
        assert_eq!(first[0], 1.0);
        assert_eq!(last[12], 1.0);
        assert_eq!(first.iter().sum::<f64>(), 1.0);
        assert_eq!(last.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn basis_matrix_rejects_short_horizon() {
        assert!(build_basis_matrix(3, 5, 2).is_err());
        assert!(build_basis_matrix(10, 1, 2).is_err());
    }

    #[test]
    fn open_basis_matches_recursion() {
        let k = build_open_knots(3, 4, 0.5, 20).unwrap();
        let b = build_open_basis_matrix(&k, 0.5, 0..40, 0..10).unwrap();
        for r in 0..40 {
            for c in 0..10 {
                let t = r as f64 * 0.5;
                let want = eval_basis(c, 3, t, &k).unwrap();
                assert!((b.entries()[(r, c)] - want).abs() < 1e-13, "({r},{c})");
            }
        }
        assert_eq!(b.sample_parameters()[3], 1.5);
    }
}
