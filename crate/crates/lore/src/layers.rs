//! Ensemble linear layers, numeric embeddings, and fused ReLU/dropout.
//!
//! The central layer holds one shared weight `W` (`d_out x d_in`) plus `K`
//! cheap per-member adapters, giving each member its own effective weight:
//!
//! - [`AdapterKind::MultiplicativeLowRank`]:
//!   `W_k = W ⊙ (1 + A_k B_kᵀ)`, an identity-residual multiplicative mask
//!   of rank at most `r` around the shared weight;
//! - [`AdapterKind::Rank1Mask`]:
//!   `W_k = W ⊙ (s_k r_kᵀ)`, the classic rank-1 multiplicative mask with
//!   no identity residual;
//! - [`AdapterKind::AdditiveLowRank`]:
//!   `W_k = W + A_k B_kᵀ`, the additive (LoRA-style) counterpart.
//!
//! The training forward never materializes `W_k`. For a member input row
//! `h` the multiplicative adapter satisfies
//!
//! ```text
//! W_k h = W h + Σ_t a_t ⊙ (W (b_t ⊙ h))
//! ```
//!
//! where `a_t`, `b_t` are the `t`-th adapter columns, so one shared-`W`
//! product plus `r` rescaled shared-`W` products cover the whole ensemble.
//! [`EnsembleLinear::forward_materialized`] keeps the naive effective-weight
//! path as a reference oracle; the two paths agree to ~1e-10 relative and
//! the test suites assert exactly that.

use crate::error::Error;
use crate::math::{self, mat_t_vec, mat_vec, outer, Rng};
use crate::{Mat, Real};

use serde::{Deserialize, Serialize};

/// Member-adapter family for [`EnsembleLinear`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterKind {
    MultiplicativeLowRank,
    Rank1Mask,
    AdditiveLowRank,
}

impl AdapterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AdapterKind::MultiplicativeLowRank => "multiplicative_low_rank",
            AdapterKind::Rank1Mask => "rank1_mask",
            AdapterKind::AdditiveLowRank => "additive_low_rank",
        }
    }
}

impl std::str::FromStr for AdapterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "multiplicative_low_rank" | "multiplicative" => Ok(AdapterKind::MultiplicativeLowRank),
            "rank1_mask" | "rank1" => Ok(AdapterKind::Rank1Mask),
            "additive_low_rank" | "additive" => Ok(AdapterKind::AdditiveLowRank),
            other => Err(Error::InvalidArgument(format!(
                "unknown adapter kind {other:?}"
            ))),
        }
    }
}

/// One shared-weight linear layer with `K` member adapters.
///
/// Adapter shapes: `adapter_out[k]` is `d_out x r`, `adapter_in[k]` is
/// `d_in x r`. For [`AdapterKind::Rank1Mask`] the stored rank is 1
/// regardless of the configured rank: `adapter_out[k]` holds the output
/// scale `s_k` and `adapter_in[k]` the input scale `r_k` as one-column
/// matrices. The bias is shared across members.
///
/// Gradient slots mirror every parameter and are accumulated by
/// [`EnsembleLinear::backward`]; call [`EnsembleLinear::zero_grads`]
/// between optimization steps.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleLinear {
    pub kind: AdapterKind,
    pub shared: Mat,
    pub bias: Vec<Real>,
    pub adapter_out: Vec<Mat>,
    pub adapter_in: Vec<Mat>,
    pub grad_shared: Mat,
    pub grad_bias: Vec<Real>,
    pub grad_adapter_out: Vec<Mat>,
    pub grad_adapter_in: Vec<Mat>,
}

/// Per-member inputs captured by a training forward pass.
#[derive(Debug, Clone)]
pub struct EnsembleLinearCache {
    inputs: Vec<Mat>,
}

impl EnsembleLinear {
    /// Initialize a layer: `W` Kaiming-uniform, bias zero, adapter entries
    /// i.i.d. `N(0, sigma_init^2)`.
    pub fn init(
        kind: AdapterKind,
        d_in: usize,
        d_out: usize,
        members: usize,
        rank: usize,
        sigma_init: Real,
        rng: &mut Rng,
    ) -> Result<Self, Error> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::InvalidArgument(
                "layer dimensions must be positive".into(),
            ));
        }
        if members == 0 {
            return Err(Error::InvalidArgument(
                "ensemble needs at least one member".into(),
            ));
        }
        if rank == 0 {
            return Err(Error::InvalidArgument("adapter rank must be positive".into()));
        }
        if !(sigma_init >= 0.0) || !sigma_init.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sigma_init must be finite and non-negative, got {sigma_init}"
            )));
        }
        let stored_rank = match kind {
            AdapterKind::Rank1Mask => 1,
            _ => rank,
        };
        let shared = math::kaiming_uniform(rng, d_out, d_in)?;
        let mut adapter_out = Vec::with_capacity(members);
        let mut adapter_in = Vec::with_capacity(members);
        for _ in 0..members {
            adapter_out.push(math::sample_gaussian(rng, d_out, stored_rank, sigma_init)?);
            adapter_in.push(math::sample_gaussian(rng, d_in, stored_rank, sigma_init)?);
        }
        Ok(EnsembleLinear {
            kind,
            shared,
            bias: vec![0.0; d_out],
            grad_shared: Mat::zeros(d_out, d_in),
            grad_bias: vec![0.0; d_out],
            grad_adapter_out: adapter_out.iter().map(|m| Mat::zeros(m.rows(), m.cols())).collect(),
            grad_adapter_in: adapter_in.iter().map(|m| Mat::zeros(m.rows(), m.cols())).collect(),
            adapter_out,
            adapter_in,
        })
    }

    pub fn members(&self) -> usize {
        self.adapter_out.len()
    }

    pub fn d_out(&self) -> usize {
        self.shared.rows()
    }

    pub fn d_in(&self) -> usize {
        self.shared.cols()
    }

    /// Stored adapter rank (1 for [`AdapterKind::Rank1Mask`]).
    pub fn rank(&self) -> usize {
        self.adapter_out[0].cols()
    }

    /// Materialize member `k`'s effective weight.
    pub fn effective_weight(&self, k: usize) -> Result<Mat, Error> {
        if k >= self.members() {
            return Err(Error::MemberIndex {
                index: k,
                members: self.members(),
            });
        }
        let low_rank = self.adapter_out[k].matmul_nt(&self.adapter_in[k])?;
        match self.kind {
            AdapterKind::MultiplicativeLowRank => {
                self.shared.hadamard(&low_rank.map(|x| 1.0 + x))
            }
            AdapterKind::Rank1Mask => self.shared.hadamard(&low_rank),
            AdapterKind::AdditiveLowRank => self.shared.add(&low_rank),
        }
    }

    fn check_inputs(&self, inputs: &[Mat]) -> Result<(), Error> {
        if inputs.len() != self.members() {
            return Err(Error::InvalidArgument(format!(
                "expected {} member batches, got {}",
                self.members(),
                inputs.len()
            )));
        }
        for h in inputs {
            if h.cols() != self.d_in() {
                return Err(Error::ShapeMismatch {
                    op: "ensemble_linear_forward",
                    lhs: h.shape(),
                    rhs: self.shared.shape(),
                });
            }
        }
        Ok(())
    }

    /// Factored forward pass over all members.
    ///
    /// Batches are row-major samples (`n x d_in` per member). Returns one
    /// `n x d_out` output per member, plus the activation cache when
    /// `training` is set (and only then).
    pub fn forward(
        &self,
        inputs: &[Mat],
        training: bool,
    ) -> Result<(Vec<Mat>, Option<EnsembleLinearCache>), Error> {
        self.check_inputs(inputs)?;
        // One transpose of the shared weight serves every member and every
        // rank term; `h * Wᵀ` then runs on the fast row-streaming kernel.
        let shared_t = self.shared.transpose();
        let mut outputs = Vec::with_capacity(self.members());
        for (k, h) in inputs.iter().enumerate() {
            let mut z = match self.kind {
                AdapterKind::MultiplicativeLowRank => {
                    let mut z = h.matmul(&shared_t)?;
                    for t in 0..self.rank() {
                        let b_t = self.adapter_in[k].col_to_vec(t);
                        let a_t = self.adapter_out[k].col_to_vec(t);
                        let term = h.scale_cols(&b_t)?.matmul(&shared_t)?.scale_cols(&a_t)?;
                        z.axpy(1.0, &term)?;
                    }
                    z
                }
                AdapterKind::Rank1Mask => {
                    let in_scale = self.adapter_in[k].col_to_vec(0);
                    let out_scale = self.adapter_out[k].col_to_vec(0);
                    h.scale_cols(&in_scale)?
                        .matmul(&shared_t)?
                        .scale_cols(&out_scale)?
                }
                AdapterKind::AdditiveLowRank => {
                    let mut z = h.matmul(&shared_t)?;
                    let low = h.matmul(&self.adapter_in[k])?.matmul_nt(&self.adapter_out[k])?;
                    z.axpy(1.0, &low)?;
                    z
                }
            };
            z.add_row_broadcast(&self.bias)?;
            outputs.push(z);
        }
        let cache = training.then(|| EnsembleLinearCache {
            inputs: inputs.to_vec(),
        });
        Ok((outputs, cache))
    }

    /// Reference forward through the materialized effective weights.
    ///
    /// This is the oracle the factored path is checked against; it is not
    /// used for training.
    pub fn forward_materialized(&self, inputs: &[Mat]) -> Result<Vec<Mat>, Error> {
        self.check_inputs(inputs)?;
        let mut outputs = Vec::with_capacity(self.members());
        for (k, h) in inputs.iter().enumerate() {
            let wk = self.effective_weight(k)?;
            let mut z = h.matmul(&wk.transpose())?;
            z.add_row_broadcast(&self.bias)?;
            outputs.push(z);
        }
        Ok(outputs)
    }

    /// Backward pass: accumulates parameter gradients from the upstream
    /// output gradients and returns the per-member input gradients
    /// (omitted when `need_input_grads` is false, e.g. at the first block).
    ///
    /// With `P_k = G_kᵀ H_k` (output gradient against input, summed over
    /// the batch) the closed forms per kind are:
    ///
    /// ```text
    /// multiplicative: ∂W  += P_k ⊙ (1 + A_k B_kᵀ)
    ///                 ∂A_k = (P_k ⊙ W) B_k        ∂B_k = (P_k ⊙ W)ᵀ A_k
    /// rank-1 mask:    ∂W  += P_k ⊙ (s_k r_kᵀ)
    ///                 ∂s_k = (P_k ⊙ W) r_k        ∂r_k = (P_k ⊙ W)ᵀ s_k
    /// additive:       ∂W  += P_k
    ///                 ∂A_k = P_k B_k              ∂B_k = P_kᵀ A_k
    /// ```
    ///
    /// The shared bias accumulates every member's batch-summed gradient.
    /// Input gradients use the factored form of `G_k W_k`.
    pub fn backward(
        &mut self,
        cache: &EnsembleLinearCache,
        upstream: &[Mat],
        need_input_grads: bool,
    ) -> Result<Vec<Mat>, Error> {
        if upstream.len() != self.members() || cache.inputs.len() != self.members() {
            return Err(Error::InvalidArgument(
                "backward needs one cached input and one upstream gradient per member".into(),
            ));
        }
        let mut input_grads = Vec::with_capacity(if need_input_grads { self.members() } else { 0 });
        for k in 0..self.members() {
            let h = &cache.inputs[k];
            let g = &upstream[k];
            if g.rows() != h.rows() || g.cols() != self.d_out() {
                return Err(Error::ShapeMismatch {
                    op: "ensemble_linear_backward",
                    lhs: g.shape(),
                    rhs: (h.rows(), self.d_out()),
                });
            }
            let p = g.matmul_tn(h)?;
            for (gb, s) in self.grad_bias.iter_mut().zip(g.col_sums()) {
                *gb += s;
            }
            match self.kind {
                AdapterKind::MultiplicativeLowRank => {
                    let mask = self.adapter_out[k].matmul_nt(&self.adapter_in[k])?;
                    self.grad_shared
                        .axpy(1.0, &p.hadamard(&mask.map(|x| 1.0 + x))?)?;
                    let pw = p.hadamard(&self.shared)?;
                    self.grad_adapter_out[k].axpy(1.0, &pw.matmul(&self.adapter_in[k])?)?;
                    self.grad_adapter_in[k].axpy(1.0, &pw.matmul_tn(&self.adapter_out[k])?)?;
                    if need_input_grads {
                        let mut gin = g.matmul(&self.shared)?;
                        for t in 0..self.rank() {
                            let b_t = self.adapter_in[k].col_to_vec(t);
                            let a_t = self.adapter_out[k].col_to_vec(t);
                            let term =
                                g.scale_cols(&a_t)?.matmul(&self.shared)?.scale_cols(&b_t)?;
                            gin.axpy(1.0, &term)?;
                        }
                        input_grads.push(gin);
                    }
                }
                AdapterKind::Rank1Mask => {
                    let out_scale = self.adapter_out[k].col_to_vec(0);
                    let in_scale = self.adapter_in[k].col_to_vec(0);
                    self.grad_shared
                        .axpy(1.0, &p.hadamard(&outer(&out_scale, &in_scale))?)?;
                    let pw = p.hadamard(&self.shared)?;
                    for (o, v) in self.grad_adapter_out[k]
                        .data_mut()
                        .iter_mut()
                        .zip(mat_vec(&pw, &in_scale)?)
                    {
                        *o += v;
                    }
                    for (o, v) in self.grad_adapter_in[k]
                        .data_mut()
                        .iter_mut()
                        .zip(mat_t_vec(&pw, &out_scale)?)
                    {
                        *o += v;
                    }
                    if need_input_grads {
                        let gin =
                            g.scale_cols(&out_scale)?.matmul(&self.shared)?.scale_cols(&in_scale)?;
                        input_grads.push(gin);
                    }
                }
                AdapterKind::AdditiveLowRank => {
                    self.grad_shared.axpy(1.0, &p)?;
                    self.grad_adapter_out[k].axpy(1.0, &p.matmul(&self.adapter_in[k])?)?;
                    self.grad_adapter_in[k].axpy(1.0, &p.matmul_tn(&self.adapter_out[k])?)?;
                    if need_input_grads {
                        let mut gin = g.matmul(&self.shared)?;
                        let low = g.matmul(&self.adapter_out[k])?.matmul_nt(&self.adapter_in[k])?;
                        gin.axpy(1.0, &low)?;
                        input_grads.push(gin);
                    }
                }
            }
        }
        Ok(input_grads)
    }

    pub fn zero_grads(&mut self) {
        self.grad_shared.data_mut().fill(0.0);
        self.grad_bias.fill(0.0);
        for g in &mut self.grad_adapter_out {
            g.data_mut().fill(0.0);
        }
        for g in &mut self.grad_adapter_in {
            g.data_mut().fill(0.0);
        }
    }

    /// Visit every (parameter, gradient) slice pair in a fixed canonical
    /// order: shared weight, bias, then per member the output adapter and
    /// the input adapter. Optimizer state and parameter flattening rely on
    /// this order being stable.
    pub fn for_each_param_mut(&mut self, f: &mut impl FnMut(&mut [Real], &mut [Real])) {
        f(self.shared.data_mut(), self.grad_shared.data_mut());
        f(&mut self.bias, &mut self.grad_bias);
        for k in 0..self.adapter_out.len() {
            f(
                self.adapter_out[k].data_mut(),
                self.grad_adapter_out[k].data_mut(),
            );
            f(
                self.adapter_in[k].data_mut(),
                self.grad_adapter_in[k].data_mut(),
            );
        }
    }
}

/// Plain (single-member) linear layer, used for the per-member heads.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Mat,
    pub bias: Vec<Real>,
    pub grad_weight: Mat,
    pub grad_bias: Vec<Real>,
}

impl Linear {
    pub fn init(d_in: usize, d_out: usize, rng: &mut Rng) -> Result<Self, Error> {
        Ok(Linear {
            weight: math::kaiming_uniform(rng, d_out, d_in)?,
            bias: vec![0.0; d_out],
            grad_weight: Mat::zeros(d_out, d_in),
            grad_bias: vec![0.0; d_out],
        })
    }

    pub fn forward(&self, h: &Mat) -> Result<Mat, Error> {
        let mut z = h.matmul_nt(&self.weight)?;
        z.add_row_broadcast(&self.bias)?;
        Ok(z)
    }

    /// Accumulate gradients; returns the input gradient when requested.
    pub fn backward(&mut self, h: &Mat, g: &Mat, need_input_grads: bool) -> Result<Option<Mat>, Error> {
        self.grad_weight.axpy(1.0, &g.matmul_tn(h)?)?;
        for (gb, s) in self.grad_bias.iter_mut().zip(g.col_sums()) {
            *gb += s;
        }
        if need_input_grads {
            Ok(Some(g.matmul(&self.weight)?))
        } else {
            Ok(None)
        }
    }

    pub fn zero_grads(&mut self) {
        self.grad_weight.data_mut().fill(0.0);
        self.grad_bias.fill(0.0);
    }

    pub fn for_each_param_mut(&mut self, f: &mut impl FnMut(&mut [Real], &mut [Real])) {
        f(self.weight.data_mut(), self.grad_weight.data_mut());
        f(&mut self.bias, &mut self.grad_bias);
    }
}

/// Per-feature numeric encoding learned by [`PleEmbedding::fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NumericEncoder {
    /// Strictly increasing quantile edges `b_0 < ... < b_T`; the feature
    /// encodes into `T` components.
    Bins(Vec<Real>),
    /// Degenerate (constant) training feature: encoded as the raw value.
    Passthrough,
}

/// Piecewise-linear quantile embedding for numeric features, plus one-hot
/// encoding for categoricals.
///
/// Numeric feature with edges `b_0 < ... < b_T` maps to `T` components
///
/// ```text
/// e_t(x) = clamp((x - b_{t-1}) / (b_t - b_{t-1}), 0, 1)
/// ```
///
/// so `e(b_0) = (0,...,0)`, `e(b_T) = (1,...,1)`, and every component is a
/// nondecreasing, piecewise-linear function of `x`. Edges sit at the
/// empirical quantile levels `t/T` of the training split (linear
/// interpolation between order statistics); duplicate edges collapse, and
/// features with fewer than two distinct edges fall back to passing the
/// raw value through as a single component.
///
/// Categorical features one-hot encode against the training vocabulary
/// with one extra "unknown" slot that training rows never populate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PleEmbedding {
    numeric: Vec<NumericEncoder>,
    cat_cardinalities: Vec<usize>,
}

fn interpolated_quantile(sorted: &[Real], p: Real) -> Real {
    let n = sorted.len();
    let h = (n - 1) as Real * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as Real;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

impl PleEmbedding {
    /// Fit encoders from training-split numeric columns and categorical
    /// cardinalities (training vocabulary sizes, excluding the unknown
    /// slot).
    pub fn fit(
        numeric_columns: &[Vec<Real>],
        n_bins: usize,
        cat_cardinalities: Vec<usize>,
    ) -> Result<Self, Error> {
        if n_bins == 0 {
            return Err(Error::InvalidArgument("n_bins must be positive".into()));
        }
        let mut numeric = Vec::with_capacity(numeric_columns.len());
        for (j, col) in numeric_columns.iter().enumerate() {
            if col.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "numeric feature {j} has no training values"
                )));
            }
            if col.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "numeric feature {j} has non-finite training values"
                )));
            }
            let mut sorted = col.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut edges = Vec::with_capacity(n_bins + 1);
            for t in 0..=n_bins {
                let e = interpolated_quantile(&sorted, t as Real / n_bins as Real);
                if edges.last() != Some(&e) {
                    edges.push(e);
                }
            }
            if edges.len() < 2 {
                numeric.push(NumericEncoder::Passthrough);
            } else {
                numeric.push(NumericEncoder::Bins(edges));
            }
        }
        Ok(PleEmbedding {
            numeric,
            cat_cardinalities,
        })
    }

    pub fn numeric_encoders(&self) -> &[NumericEncoder] {
        &self.numeric
    }

    /// Total encoded width: deduped bin count per numeric feature (1 for
    /// degenerate features) plus `cardinality + 1` per categorical.
    pub fn width(&self) -> usize {
        let num: usize = self
            .numeric
            .iter()
            .map(|e| match e {
                NumericEncoder::Bins(edges) => edges.len() - 1,
                NumericEncoder::Passthrough => 1,
            })
            .sum();
        let cat: usize = self.cat_cardinalities.iter().map(|c| c + 1).sum();
        num + cat
    }

    /// Encode one row. `cats[c]` is a vocabulary index; the value
    /// `cardinality` denotes the unknown bucket.
    pub fn encode_row(&self, numeric: &[Real], cats: &[usize], out: &mut Vec<Real>) -> Result<(), Error> {
        if numeric.len() != self.numeric.len() || cats.len() != self.cat_cardinalities.len() {
            return Err(Error::SchemaMismatch(format!(
                "row has {}/{} numeric/categorical values, embedding expects {}/{}",
                numeric.len(),
                cats.len(),
                self.numeric.len(),
                self.cat_cardinalities.len()
            )));
        }
        for (x, enc) in numeric.iter().zip(&self.numeric) {
            match enc {
                NumericEncoder::Passthrough => out.push(*x),
                NumericEncoder::Bins(edges) => {
                    for t in 1..edges.len() {
                        let lo = edges[t - 1];
                        let hi = edges[t];
                        out.push(((x - lo) / (hi - lo)).clamp(0.0, 1.0));
                    }
                }
            }
        }
        for (&v, &card) in cats.iter().zip(&self.cat_cardinalities) {
            if v > card {
                return Err(Error::InvalidArgument(format!(
                    "categorical index {v} exceeds unknown bucket {card}"
                )));
            }
            let start = out.len();
            out.resize(start + card + 1, 0.0);
            out[start + v] = 1.0;
        }
        Ok(())
    }

    /// Encode a batch of rows into an `n x width` matrix.
    pub fn encode_batch(&self, numeric: &Mat, cats: &[Vec<usize>]) -> Result<Mat, Error> {
        let n = numeric.rows();
        if cats.len() != n && !(self.cat_cardinalities.is_empty() && cats.is_empty()) {
            return Err(Error::SchemaMismatch(format!(
                "{} numeric rows vs {} categorical rows",
                n,
                cats.len()
            )));
        }
        let empty: Vec<usize> = Vec::new();
        let mut data = Vec::with_capacity(n * self.width());
        for i in 0..n {
            let cat_row = if self.cat_cardinalities.is_empty() {
                &empty
            } else {
                &cats[i]
            };
            self.encode_row(numeric.row(i), cat_row, &mut data)?;
        }
        Mat::new(n, self.width(), data)
    }
}

/// Multiplier matrices from a training-mode [`relu_dropout`] call; backward
/// is an elementwise product with them.
#[derive(Debug, Clone)]
pub struct ReluDropoutCache {
    multipliers: Vec<Mat>,
}

/// Fused ReLU and inverted dropout over per-member activations.
///
/// Training mode multiplies each surviving positive entry by
/// `1 / (1 - p_drop)` so expected activation magnitude is preserved; masks
/// are drawn independently per member, row-major. Eval mode applies the
/// ReLU only. The cache is returned exactly when `training` is set.
pub fn relu_dropout(
    z: &[Mat],
    p_drop: Real,
    training: bool,
    rng: &mut Rng,
) -> Result<(Vec<Mat>, Option<ReluDropoutCache>), Error> {
    if !(0.0..1.0).contains(&p_drop) {
        return Err(Error::InvalidArgument(format!(
            "p_drop must lie in [0, 1), got {p_drop}"
        )));
    }
    if !training {
        let outputs = z.iter().map(|m| m.map(|x| x.max(0.0))).collect();
        return Ok((outputs, None));
    }
    let keep_scale = 1.0 / (1.0 - p_drop);
    let mut outputs = Vec::with_capacity(z.len());
    let mut multipliers = Vec::with_capacity(z.len());
    for m in z {
        let mult = if p_drop == 0.0 {
            m.map(|x| if x > 0.0 { 1.0 } else { 0.0 })
        } else {
            m.map(|x| {
                let keep = rng.next_f64() >= p_drop;
                if x > 0.0 && keep {
                    keep_scale
                } else {
                    0.0
                }
            })
        };
        outputs.push(m.hadamard(&mult)?);
        multipliers.push(mult);
    }
    Ok((outputs, Some(ReluDropoutCache { multipliers })))
}

/// Backward through [`relu_dropout`]: elementwise product with the cached
/// multipliers.
pub fn relu_dropout_backward(
    cache: &ReluDropoutCache,
    upstream: &[Mat],
) -> Result<Vec<Mat>, Error> {
    if upstream.len() != cache.multipliers.len() {
        return Err(Error::InvalidArgument(
            "upstream member count does not match cache".into(),
        ));
    }
    upstream
        .iter()
        .zip(&cache.multipliers)
        .map(|(g, m)| g.hadamard(m))
        .collect()
}
