//! Constructive layer-wise expressivity machinery: rank factorizations
//! with padding, the embedding of rank-1 mask layers into the rank-r
//! multiplicative family, the element-wise ratio-rank witness, and the
//! two-member counterexample showing the inclusion is strict.
//!
//! Everything here is about *effective weights*: a rank-1 mask member
//! realizes `W ⊙ (s rᵀ)`, a rank-r multiplicative member realizes
//! `W ⊙ (1 + A Bᵀ)`. A mask member embeds exactly whenever
//! `A Bᵀ = s rᵀ - 1`, a matrix of rank at most 2 — hence any rank budget
//! `r ≥ 2` suffices. Conversely, the ratio of two mask members' effective
//! weights is always rank 1, so a pair whose ratio has a nonvanishing 2×2
//! minor cannot come from masks; `build_counterexample` constructs such a
//! pair with zero and rank-2 adapters.

use crate::error::Error;
use crate::{Mat, Real};

use serde::{Deserialize, Serialize};

/// Shared weight plus per-member mask vectors (`W ⊙ s_k r_kᵀ` members).
/// The generic condition requires every entry of `W`, `s_k`, `r_k` to be
/// nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeParams {
    pub shared: Mat,
    /// Per member: output-side scale `s_k`, length = rows of `shared`.
    pub out_scales: Vec<Vec<Real>>,
    /// Per member: input-side scale `r_k`, length = cols of `shared`.
    pub in_scales: Vec<Vec<Real>>,
}

impl BeParams {
    pub fn members(&self) -> usize {
        self.out_scales.len()
    }

    pub fn validate(&self) -> Result<(), Error> {
        let (m, n) = self.shared.shape();
        if m == 0 || n == 0 {
            return Err(Error::InvalidArgument("empty shared weight".into()));
        }
        for i in 0..m {
            for j in 0..n {
                if self.shared.get(i, j) == 0.0 {
                    return Err(Error::SingularEntry { row: i, col: j });
                }
            }
        }
        if self.out_scales.is_empty() || self.out_scales.len() != self.in_scales.len() {
            return Err(Error::InvalidArgument(
                "need matching, nonempty scale lists".into(),
            ));
        }
        for (s, r) in self.out_scales.iter().zip(&self.in_scales) {
            if s.len() != m || r.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "scale lengths {}/{} do not match weight shape {m}x{n}",
                    s.len(),
                    r.len()
                )));
            }
            if s.iter().chain(r.iter()).any(|v| *v == 0.0) {
                return Err(Error::InvalidArgument(
                    "mask vectors must have nonzero entries".into(),
                ));
            }
        }
        Ok(())
    }

    /// `W ⊙ (s_k r_kᵀ)`.
    pub fn effective_weight(&self, k: usize) -> Result<Mat, Error> {
        if k >= self.members() {
            return Err(Error::MemberIndex {
                index: k,
                members: self.members(),
            });
        }
        let s = &self.out_scales[k];
        let r = &self.in_scales[k];
        Ok(Mat::from_fn(self.shared.rows(), self.shared.cols(), |i, j| {
            self.shared.get(i, j) * s[i] * r[j]
        }))
    }
}

/// Shared weight plus per-member rank-`r` multiplicative adapters
/// (`W ⊙ (1 + A_k B_kᵀ)` members).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LomeParams {
    pub shared: Mat,
    /// Per member: `A_k`, shape rows(shared) × rank.
    pub adapters_out: Vec<Mat>,
    /// Per member: `B_k`, shape cols(shared) × rank.
    pub adapters_in: Vec<Mat>,
    pub rank: usize,
}

impl LomeParams {
    pub fn members(&self) -> usize {
        self.adapters_out.len()
    }

    pub fn validate(&self) -> Result<(), Error> {
        let (m, n) = self.shared.shape();
        if self.adapters_out.is_empty() || self.adapters_out.len() != self.adapters_in.len() {
            return Err(Error::InvalidArgument(
                "need matching, nonempty adapter lists".into(),
            ));
        }
        for (a, b) in self.adapters_out.iter().zip(&self.adapters_in) {
            if a.shape() != (m, self.rank) || b.shape() != (n, self.rank) {
                return Err(Error::ShapeMismatch {
                    op: "lome_params",
                    lhs: a.shape(),
                    rhs: (m, self.rank),
                });
            }
        }
        Ok(())
    }

    /// `W ⊙ (1 + A_k B_kᵀ)`.
    pub fn effective_weight(&self, k: usize) -> Result<Mat, Error> {
        if k >= self.members() {
            return Err(Error::MemberIndex {
                index: k,
                members: self.members(),
            });
        }
        let low = self.adapters_out[k].matmul_nt(&self.adapters_in[k])?;
        self.shared.hadamard(&low.map(|x| 1.0 + x))
    }
}

/// Factor `M = A Bᵀ` with `A: m×r`, `B: n×r`, zero-padding unused
/// columns.
///
/// Greedy max-pivot deflation: pick the largest remaining entry, split off
/// the rank-1 term `(column) (row / pivot)ᵀ`, repeat up to `r` times. On
/// exact rank-ρ inputs with ρ ≤ r the residual vanishes to rounding; if a
/// residual above `1e-9 · max(1, ‖M‖_F)` survives, the input's rank
/// exceeds the budget and the call fails.
pub fn rank_factorize_padded(m: &Mat, r: usize) -> Result<(Mat, Mat), Error> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let mut residual = m.clone();
    let mut a = Mat::zeros(rows, r);
    let mut b = Mat::zeros(cols, r);
    let scale = residual.max_abs().max(1.0);
    for t in 0..r {
        let mut pi = 0;
        let mut pj = 0;
        let mut best = 0.0_f64;
        for i in 0..rows {
            for j in 0..cols {
                if residual.get(i, j).abs() > best {
                    best = residual.get(i, j).abs();
                    pi = i;
                    pj = j;
                }
            }
        }
        if best <= 1e-13 * scale {
            break;
        }
        let pivot = residual.get(pi, pj);
        let col: Vec<Real> = (0..rows).map(|i| residual.get(i, pj)).collect();
        let row: Vec<Real> = (0..cols).map(|j| residual.get(pi, j) / pivot).collect();
        for i in 0..rows {
            a.set(i, t, col[i]);
        }
        for j in 0..cols {
            b.set(j, t, row[j]);
        }
        for i in 0..rows {
            for j in 0..cols {
                residual.set(i, j, residual.get(i, j) - col[i] * row[j]);
            }
        }
    }
    let rel = residual.frobenius_norm() / m.frobenius_norm().max(1.0);
    if rel > 1e-9 {
        return Err(Error::RankTooHigh {
            required: m.numerical_rank(1e-9)?,
            allowed: r,
        });
    }
    Ok((a, b))
}

/// Embed mask members into the rank-`r` multiplicative family: for every
/// member, `A_k B_kᵀ = s_k r_kᵀ - 1` (a rank ≤ 2 matrix, so any `r ≥ 2`
/// works), giving the identical effective weight `W ⊙ (s_k r_kᵀ)`.
pub fn embed_be_into_lome(be: &BeParams, r: usize) -> Result<LomeParams, Error> {
    be.validate()?;
    if r < 2 {
        return Err(Error::RankTooHigh {
            required: 2,
            allowed: r,
        });
    }
    let (m, n) = be.shared.shape();
    let mut adapters_out = Vec::with_capacity(be.members());
    let mut adapters_in = Vec::with_capacity(be.members());
    for k in 0..be.members() {
        let s = &be.out_scales[k];
        let rv = &be.in_scales[k];
        let target = Mat::from_fn(m, n, |i, j| s[i] * rv[j] - 1.0);
        let (a, b) = rank_factorize_padded(&target, r)?;
        adapters_out.push(a);
        adapters_in.push(b);
    }
    Ok(LomeParams {
        shared: be.shared.clone(),
        adapters_out,
        adapters_in,
        rank: r,
    })
}

/// A nonvanishing 2×2 minor of the elementwise ratio of two effective
/// weights: rows `(i1, i2)`, cols `(j1, j2)`, and its determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioWitness {
    pub rows: (usize, usize),
    pub cols: (usize, usize),
    pub det: Real,
}

/// Lower-bound the rank of `Q = w1 ⊘ w2` by scanning 2×2 minors.
///
/// Returns `(1, None)` when every minor vanishes within `1e-9` relative to
/// the magnitude of its cross products, or `(2, Some(witness))` with the
/// first (row-major) nonvanishing minor otherwise. Any pair of mask-member
/// effective weights has a rank-1 ratio, so a returned witness certifies
/// the pair cannot be realized by masks over any shared weight.
pub fn ratio_rank_witness(w1: &Mat, w2: &Mat) -> Result<(usize, Option<RatioWitness>), Error> {
    if w1.shape() != w2.shape() {
        return Err(Error::ShapeMismatch {
            op: "ratio_rank_witness",
            lhs: w1.shape(),
            rhs: w2.shape(),
        });
    }
    let (m, n) = w1.shape();
    for i in 0..m {
        for j in 0..n {
            if w2.get(i, j) == 0.0 {
                return Err(Error::SingularEntry { row: i, col: j });
            }
        }
    }
    let q = w1.elementwise_divide(w2)?;
    for i1 in 0..m {
        for i2 in i1 + 1..m {
            for j1 in 0..n {
                for j2 in j1 + 1..n {
                    let main = q.get(i1, j1) * q.get(i2, j2);
                    let anti = q.get(i1, j2) * q.get(i2, j1);
                    let det = main - anti;
                    let scale = main.abs().max(anti.abs()).max(1e-300);
                    if det.abs() > 1e-9 * scale {
                        return Ok((
                            2,
                            Some(RatioWitness {
                                rows: (i1, i2),
                                cols: (j1, j2),
                                det,
                            }),
                        ));
                    }
                }
            }
        }
    }
    Ok((1, None))
}

/// Two-member rank-`r` multiplicative parameters no mask pair can
/// reproduce: member 1 carries `A B ᵀ = e₁f₁ᵀ + e₂f₂ᵀ` (first two
/// standard basis vectors on each side), member 2 carries zero adapters.
///
/// The effective-weight ratio then has the 2×2 identity-plus-ones pattern
/// `[[2,1],[1,2]]` in its top-left corner — determinant 3 — so
/// [`ratio_rank_witness`] returns lower bound 2 for any all-nonzero `W`.
pub fn build_counterexample(w: &Mat, r: usize) -> Result<LomeParams, Error> {
    let (m, n) = w.shape();
    if m < 2 || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "counterexample needs at least a 2x2 weight, got {m}x{n}"
        )));
    }
    if r < 2 {
        return Err(Error::RankTooHigh {
            required: 2,
            allowed: r,
        });
    }
    for i in 0..m {
        for j in 0..n {
            if w.get(i, j) == 0.0 {
                return Err(Error::SingularEntry { row: i, col: j });
            }
        }
    }
    let a1 = Mat::from_fn(m, r, |i, t| if i == t && t < 2 { 1.0 } else { 0.0 });
    let b1 = Mat::from_fn(n, r, |j, t| if j == t && t < 2 { 1.0 } else { 0.0 });
    Ok(LomeParams {
        shared: w.clone(),
        adapters_out: vec![a1, Mat::zeros(m, r)],
        adapters_in: vec![b1, Mat::zeros(n, r)],
        rank: r,
    })
}
