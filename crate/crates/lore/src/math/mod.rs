//! Dense matrices and small numeric kernels.
//!
//! The matrix type is generic over the scalar so the kernels stay usable at
//! `f32` as well, but the rest of the crate works through the `f64` aliases
//! at the crate root ([`crate::Real`], [`crate::Mat`]); the tolerances the
//! crate is tested under require double precision.
//!
//! Floating-point accumulation order is part of the contract here: matrix
//! products accumulate each output entry over the inner index in ascending
//! order, and reductions run left to right over row-major storage. Fixing
//! the order makes results bit-reproducible across runs and platforms.

mod rng;

pub use rng::Rng;

use crate::error::Error;

use num_traits::{Float, FromPrimitive, NumAssignOps};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Scalar bound for the numeric kernels: an IEEE float with the usual
/// assignment operators and conversions.
pub trait Scalar:
    Float + FromPrimitive + NumAssignOps + fmt::Debug + fmt::Display + Default + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + NumAssignOps
        + fmt::Debug
        + fmt::Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Dense row-major matrix.
///
/// Entry `(i, j)` lives at `data[i * cols + j]`. Zero-size dimensions are
/// allowed; a product with inner dimension zero is the zero matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenseMatrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<'de, S: Deserialize<'de>> Deserialize<'de> for DenseMatrix<S> {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw<S> {
            rows: usize,
            cols: usize,
            data: Vec<S>,
        }
        let raw = Raw::<S>::deserialize(deserializer)?;
        if raw.rows.checked_mul(raw.cols) != Some(raw.data.len()) {
            return Err(serde::de::Error::custom(format!(
                "matrix payload holds {} entries but claims {}x{}",
                raw.data.len(),
                raw.rows,
                raw.cols
            )));
        }
        Ok(DenseMatrix {
            rows: raw.rows,
            cols: raw.cols,
            data: raw.data,
        })
    }
}

impl<S: Scalar> DenseMatrix<S> {
    /// Wrap an existing row-major buffer.
    pub fn new(rows: usize, cols: usize, data: Vec<S>) -> Result<Self, Error> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::InvalidArgument(format!(
                "buffer of {} entries cannot be a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: S) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    /// Build from row vectors; all rows must share a length.
    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self, Error> {
        let cols = rows.first().map_or(0, Vec::len);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    /// Entry accessor; panics on out-of-range indices.
    pub fn get(&self, i: usize, j: usize) -> S {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of range");
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of range");
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Copy of column `j`.
    pub fn col_to_vec(&self, j: usize) -> Vec<S> {
        assert!(j < self.cols, "column {j} out of range");
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    /// Matrix product `self * other`.
    ///
    /// Each output entry accumulates its products over the inner index in
    /// ascending order, making the result a pure function of the operands
    /// (no platform- or blocking-dependent reassociation).
    pub fn matmul(&self, other: &Self) -> Result<Self, Error> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        let n = other.cols;
        for i in 0..self.rows {
            let arow = self.row(i);
            let orow = out.row_mut(i);
            for (k, &aik) in arow.iter().enumerate() {
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += aik * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * otherᵀ` without materializing the transpose.
    ///
    /// Accumulation order per entry matches `self.matmul(&other.transpose())`.
    pub fn matmul_nt(&self, other: &Self) -> Result<Self, Error> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                op: "matmul_nt",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let arow = self.row(i);
            for j in 0..other.rows {
                let brow = other.row(j);
                let mut acc = S::zero();
                for (&a, &b) in arow.iter().zip(brow) {
                    acc += a * b;
                }
                out.data[i * other.rows + j] = acc;
            }
        }
        Ok(out)
    }

    /// `selfᵀ * other` without materializing the transpose.
    ///
    /// Accumulation order per entry matches `self.transpose().matmul(other)`.
    pub fn matmul_tn(&self, other: &Self) -> Result<Self, Error> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul_tn",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        let n = other.cols;
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = other.row(k);
            for (i, &a) in arow.iter().enumerate() {
                let orow = &mut out.data[i * n..(i + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    fn zip_with(&self, other: &Self, op: &'static str, f: impl Fn(S, S) -> S) -> Result<Self, Error> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, other: &Self) -> Result<Self, Error> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    /// Elementwise division; a zero denominator entry is an error naming
    /// its position.
    pub fn elementwise_divide(&self, other: &Self) -> Result<Self, Error> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op: "elementwise_divide",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        for (idx, &d) in other.data.iter().enumerate() {
            if d == S::zero() {
                return Err(Error::SingularEntry {
                    row: idx / other.cols.max(1),
                    col: idx % other.cols.max(1),
                });
            }
        }
        self.zip_with(other, "elementwise_divide", |a, b| a / b)
    }

    pub fn add(&self, other: &Self) -> Result<Self, Error> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, Error> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// `self += scale * other`.
    pub fn axpy(&mut self, scale: S, other: &Self) -> Result<(), Error> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op: "axpy",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&self, s: S) -> Self {
        self.map(|x| x * s)
    }

    pub fn map(&self, mut f: impl FnMut(S) -> S) -> Self {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Scale column `j` of every row by `v[j]`.
    pub fn scale_cols(&self, v: &[S]) -> Result<Self, Error> {
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch {
                op: "scale_cols",
                lhs: self.shape(),
                rhs: (v.len(), 1),
            });
        }
        let mut out = self.clone();
        for i in 0..out.rows {
            for (o, &s) in out.row_mut(i).iter_mut().zip(v) {
                *o *= s;
            }
        }
        Ok(out)
    }

    /// Add `v` to every row in place.
    pub fn add_row_broadcast(&mut self, v: &[S]) -> Result<(), Error> {
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch {
                op: "add_row_broadcast",
                lhs: self.shape(),
                rhs: (v.len(), 1),
            });
        }
        for i in 0..self.rows {
            for (o, &s) in self.row_mut(i).iter_mut().zip(v) {
                *o += s;
            }
        }
        Ok(())
    }

    /// Column sums, accumulated top to bottom.
    pub fn col_sums(&self) -> Vec<S> {
        let mut sums = vec![S::zero(); self.cols];
        for i in 0..self.rows {
            for (s, &x) in sums.iter_mut().zip(self.row(i)) {
                *s += x;
            }
        }
        sums
    }

    pub fn frobenius_norm(&self) -> S {
        self.data
            .iter()
            .fold(S::zero(), |acc, &x| acc + x * x)
            .sqrt()
    }

    pub fn max_abs(&self) -> S {
        self.data
            .iter()
            .fold(S::zero(), |acc, &x| acc.max(x.abs()))
    }

    /// Numerical rank via Gaussian elimination with complete pivoting.
    ///
    /// At each step the largest-magnitude entry of the remaining submatrix
    /// becomes the pivot; elimination stops once the pivot magnitude falls
    /// to `tol` times the first (largest) pivot. The count of accepted
    /// pivots is the rank estimate. Complete pivoting keeps the pivot
    /// sequence within a modest factor of the singular values, which is all
    /// the constructions in this crate need.
    pub fn numerical_rank(&self, tol: S) -> Result<usize, Error> {
        if !(tol > S::zero()) || !tol.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "rank tolerance must be positive and finite, got {tol}"
            )));
        }
        if self.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "numerical_rank requires finite entries".into(),
            ));
        }
        let mut a = self.clone();
        let steps = a.rows.min(a.cols);
        let mut threshold = S::zero();
        for step in 0..steps {
            let mut best = S::zero();
            let (mut pi, mut pj) = (step, step);
            for i in step..a.rows {
                for j in step..a.cols {
                    let v = a.data[i * a.cols + j].abs();
                    if v > best {
                        best = v;
                        pi = i;
                        pj = j;
                    }
                }
            }
            if step == 0 {
                if best == S::zero() {
                    return Ok(0);
                }
                threshold = tol * best;
            }
            if best <= threshold {
                return Ok(step);
            }
            if pi != step {
                for j in 0..a.cols {
                    a.data.swap(step * a.cols + j, pi * a.cols + j);
                }
            }
            if pj != step {
                for i in 0..a.rows {
                    a.data.swap(i * a.cols + step, i * a.cols + pj);
                }
            }
            let pivot = a.data[step * a.cols + step];
            for i in step + 1..a.rows {
                let factor = a.data[i * a.cols + step] / pivot;
                if factor == S::zero() {
                    continue;
                }
                for j in step..a.cols {
                    let above = a.data[step * a.cols + j];
                    a.data[i * a.cols + j] -= factor * above;
                }
            }
        }
        Ok(steps)
    }
}

/// Outer product `u vᵀ`.
pub fn outer<S: Scalar>(u: &[S], v: &[S]) -> DenseMatrix<S> {
    DenseMatrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
}

/// Matrix-vector product `m v`, each entry accumulated left to right.
pub fn mat_vec<S: Scalar>(m: &DenseMatrix<S>, v: &[S]) -> Result<Vec<S>, Error> {
    if m.cols() != v.len() {
        return Err(Error::ShapeMismatch {
            op: "mat_vec",
            lhs: m.shape(),
            rhs: (v.len(), 1),
        });
    }
    Ok((0..m.rows())
        .map(|i| {
            m.row(i)
                .iter()
                .zip(v)
                .fold(S::zero(), |acc, (&a, &b)| acc + a * b)
        })
        .collect())
}

/// Matrix-vector product `mᵀ v`, accumulated top to bottom over rows.
pub fn mat_t_vec<S: Scalar>(m: &DenseMatrix<S>, v: &[S]) -> Result<Vec<S>, Error> {
    if m.rows() != v.len() {
        return Err(Error::ShapeMismatch {
            op: "mat_t_vec",
            lhs: m.shape(),
            rhs: (v.len(), 1),
        });
    }
    let mut out = vec![S::zero(); m.cols()];
    for (i, &s) in v.iter().enumerate() {
        for (o, &a) in out.iter_mut().zip(m.row(i)) {
            *o += s * a;
        }
    }
    Ok(out)
}

/// Numerically stable softmax: shifts by the maximum before exponentiating.
pub fn stable_softmax<S: Scalar>(logits: &[S]) -> Result<Vec<S>, Error> {
    if logits.is_empty() {
        return Err(Error::InvalidArgument("softmax of empty slice".into()));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "softmax requires finite logits".into(),
        ));
    }
    let max = logits.iter().fold(S::neg_infinity(), |a, &b| a.max(b));
    let exps: Vec<S> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum = exps.iter().fold(S::zero(), |a, &b| a + b);
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// `ln Σ exp(x_i)`, shifted by the maximum for stability.
pub fn log_sum_exp<S: Scalar>(xs: &[S]) -> S {
    let max = xs.iter().fold(S::neg_infinity(), |a, &b| a.max(b));
    let sum = xs
        .iter()
        .fold(S::zero(), |acc, &x| acc + (x - max).exp());
    max + sum.ln()
}

/// Matrix with i.i.d. `N(0, sigma^2)` entries, drawn row-major.
///
/// `sigma == 0` short-circuits to the exact zero matrix without consuming
/// generator state.
pub fn sample_gaussian<S: Scalar>(
    rng: &mut Rng,
    rows: usize,
    cols: usize,
    sigma: f64,
) -> Result<DenseMatrix<S>, Error> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "gaussian sigma must be finite and non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(DenseMatrix::zeros(rows, cols));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(S::from_f64(sigma * rng.normal()).unwrap());
    }
    DenseMatrix::new(rows, cols, data)
}

/// Kaiming-uniform weight init: entries i.i.d. `U(-b, b)` with
/// `b = sqrt(6 / fan_in)` and `fan_in = cols`, drawn row-major.
pub fn kaiming_uniform<S: Scalar>(
    rng: &mut Rng,
    rows: usize,
    cols: usize,
) -> Result<DenseMatrix<S>, Error> {
    if cols == 0 {
        return Err(Error::InvalidArgument(
            "kaiming init needs a positive fan-in".into(),
        ));
    }
    let bound = (6.0 / cols as f64).sqrt();
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(S::from_f64(rng.uniform(-bound, bound)).unwrap());
    }
    DenseMatrix::new(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = DenseMatrix<f64>;

    fn rand_mat(rng: &mut Rng, r: usize, c: usize) -> M {
        M::from_fn(r, c, |_, _| rng.uniform(-1.0, 1.0))
    }

    #[test]
    fn matmul_hand_example() {
        // [[1,2],[3,4]] * [[5,6],[7,8]] = [[19,22],[43,50]]
        let a = M::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = M::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_with_zero_inner_dim_is_zero_matrix() {
        let a = M::zeros(3, 0);
        let b = M::zeros(0, 2);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), (3, 2));
        assert!(c.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn matmul_shape_mismatch_errors() {
        let a = M::zeros(2, 3);
        let b = M::zeros(2, 3);
        assert!(matches!(
            a.matmul(&b),
            Err(Error::ShapeMismatch { op: "matmul", .. })
        ));
    }

    #[test]
    fn transpose_variants_match_explicit_transpose_bitwise() {
        let mut rng = Rng::new(11);
        for _ in 0..20 {
            let a = rand_mat(&mut rng, 5, 7);
            let b = rand_mat(&mut rng, 4, 7);
            let c = rand_mat(&mut rng, 5, 3);
            assert_eq!(
                a.matmul_nt(&b).unwrap(),
                a.matmul(&b.transpose()).unwrap()
            );
            assert_eq!(
                a.matmul_tn(&c).unwrap(),
                a.transpose().matmul(&c).unwrap()
            );
        }
    }

    #[test]
    fn hadamard_with_ones_is_identity_bitwise() {
        let mut rng = Rng::new(5);
        let a = rand_mat(&mut rng, 6, 4);
        let ones = M::filled(6, 4, 1.0);
        assert_eq!(a.hadamard(&ones).unwrap(), a);
    }

    #[test]
    fn divide_reports_zero_entry_position() {
        let a = M::filled(2, 3, 1.0);
        let mut b = M::filled(2, 3, 2.0);
        b.set(1, 2, 0.0);
        assert_eq!(
            a.elementwise_divide(&b),
            Err(Error::SingularEntry { row: 1, col: 2 })
        );
    }

    #[test]
    fn softmax_closed_form() {
        // softmax([ln 3, 0]) = (0.75, 0.25)
        let p = stable_softmax(&[3.0f64.ln(), 0.0]).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-15);
        assert!((p[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let p = stable_softmax(&[1000.0, 1000.0, 999.0]).unwrap();
        assert!(p.iter().all(|x| x.is_finite()));
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(stable_softmax(&[f64::NAN, 0.0]).is_err());
        assert!(stable_softmax(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn rank_examples() {
        let near_singular = M::from_rows(&[vec![1.0, 0.0], vec![0.0, 1e-12]]).unwrap();
        assert_eq!(near_singular.numerical_rank(1e-9).unwrap(), 1);

        let id = M::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.0 });
        assert_eq!(id.numerical_rank(1e-9).unwrap(), 4);

        assert_eq!(M::zeros(3, 5).numerical_rank(1e-9).unwrap(), 0);

        // s rᵀ - 1 has rank at most 2.
        let mut rng = Rng::new(2);
        for _ in 0..50 {
            let s: Vec<f64> = (0..5).map(|_| rng.uniform(0.5, 2.0)).collect();
            let r: Vec<f64> = (0..6).map(|_| rng.uniform(0.5, 2.0)).collect();
            let m = outer(&s, &r).map(|x| x - 1.0);
            assert!(m.numerical_rank(1e-9).unwrap() <= 2);
        }
    }

    #[test]
    fn gaussian_sigma_zero_is_exact_zero() {
        let mut rng = Rng::new(1);
        let m: M = sample_gaussian(&mut rng, 4, 5, 0.0).unwrap();
        assert!(m.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gaussian_rejects_bad_sigma() {
        let mut rng = Rng::new(1);
        assert!(sample_gaussian::<f64>(&mut rng, 2, 2, -1.0).is_err());
        assert!(sample_gaussian::<f64>(&mut rng, 2, 2, f64::NAN).is_err());
    }

    #[test]
    fn gaussian_moments_scale_with_sigma() {
        let mut rng = Rng::new(3);
        let m: M = sample_gaussian(&mut rng, 200, 200, 2.0).unwrap();
        let n = m.data().len() as f64;
        let mean: f64 = m.data().iter().sum::<f64>() / n;
        let var: f64 = m.data().iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 4.0).abs() < 0.15, "var {var}");
    }

    #[test]
    fn kaiming_bound_matches_fan_in() {
        let mut rng = Rng::new(4);
        let m: M = kaiming_uniform(&mut rng, 64, 64).unwrap();
        let bound = (6.0 / 64.0).sqrt();
        assert!((bound - 0.306).abs() < 1e-3);
        assert!(m.data().iter().all(|x| x.abs() < bound));
        // With 4096 draws the max should come close to the bound.
        assert!(m.max_abs() > 0.9 * bound);
    }

    #[test]
    fn kaiming_is_deterministic_per_seed() {
        let a: M = kaiming_uniform(&mut Rng::new(8), 5, 9).unwrap();
        let b: M = kaiming_uniform(&mut Rng::new(8), 5, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn matrix_serde_round_trip_is_exact() {
        let mut rng = Rng::new(12);
        let a = rand_mat(&mut rng, 3, 4);
        let text = serde_json::to_string(&a).unwrap();
        let back: M = serde_json::from_str(&text).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn matrix_deserialize_validates_length() {
        let bad = r#"{"rows": 2, "cols": 2, "data": [1.0, 2.0, 3.0]}"#;
        assert!(serde_json::from_str::<M>(bad).is_err());
    }
}
