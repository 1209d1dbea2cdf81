//! Evaluation and diversity measures over member prediction snapshots.
//!
//! Every metric here is a pure function of an immutable
//! [`MemberPredictions`] value, so they can run concurrently and each has
//! a brute-force-checkable definition (the ECE test keeps a regrouping
//! oracle next to the streaming implementation).

use crate::error::Error;
use crate::{Mat, Real};

use serde::{Deserialize, Serialize};

/// Floor for probabilities inside KL logarithms.
pub const PROB_CLAMP: Real = 1e-12;
/// Equal-width confidence bins used by [`ece`].
pub const ECE_BINS: usize = 15;

/// Frozen per-member predictions on one evaluation split.
///
/// Classification members carry one `n x C` probability matrix each
/// (rows sum to one); regression members carry one scalar per sample, in
/// the original target scale, along with the original-scale training
/// target variance when known (used by normalized ambiguity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum MemberPredictions {
    Classification {
        probs: Vec<Mat>,
        targets: Vec<usize>,
    },
    Regression {
        preds: Vec<Vec<Real>>,
        targets: Vec<Real>,
        train_target_variance: Option<Real>,
    },
}

impl MemberPredictions {
    pub fn members(&self) -> usize {
        match self {
            MemberPredictions::Classification { probs, .. } => probs.len(),
            MemberPredictions::Regression { preds, .. } => preds.len(),
        }
    }

    pub fn samples(&self) -> usize {
        match self {
            MemberPredictions::Classification { targets, .. } => targets.len(),
            MemberPredictions::Regression { targets, .. } => targets.len(),
        }
    }

    /// Structural and probabilistic sanity: consistent shapes, labels in
    /// range, probabilities non-negative with rows summing to 1 within
    /// 1e-9.
    pub fn validate(&self) -> Result<(), Error> {
        match self {
            MemberPredictions::Classification { probs, targets } => {
                if probs.is_empty() {
                    return Err(Error::InvalidArgument("no members".into()));
                }
                let (n, c) = probs[0].shape();
                if c == 0 {
                    return Err(Error::InvalidArgument("zero classes".into()));
                }
                if targets.len() != n {
                    return Err(Error::InvalidArgument(format!(
                        "{} targets for {n} prediction rows",
                        targets.len()
                    )));
                }
                for p in probs {
                    if p.shape() != (n, c) {
                        return Err(Error::ShapeMismatch {
                            op: "member_predictions",
                            lhs: p.shape(),
                            rhs: (n, c),
                        });
                    }
                    for i in 0..n {
                        let row = p.row(i);
                        if row.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                            return Err(Error::InvalidArgument(format!(
                                "negative or non-finite probability in row {i}"
                            )));
                        }
                        let s: Real = row.iter().sum();
                        if (s - 1.0).abs() > 1e-9 {
                            return Err(Error::InvalidArgument(format!(
                                "probability row {i} sums to {s}"
                            )));
                        }
                    }
                }
                for (i, y) in targets.iter().enumerate() {
                    if *y >= c {
                        return Err(Error::LabelOutOfRange {
                            label: *y,
                            classes: c,
                        });
                    }
                    let _ = i;
                }
                Ok(())
            }
            MemberPredictions::Regression { preds, targets, .. } => {
                if preds.is_empty() {
                    return Err(Error::InvalidArgument("no members".into()));
                }
                let n = targets.len();
                for f in preds {
                    if f.len() != n {
                        return Err(Error::InvalidArgument(format!(
                            "member has {} predictions for {n} targets",
                            f.len()
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

fn classification(preds: &MemberPredictions) -> Result<(&[Mat], &[usize]), Error> {
    match preds {
        MemberPredictions::Classification { probs, targets } => Ok((probs, targets)),
        MemberPredictions::Regression { .. } => Err(Error::InvalidArgument(
            "metric is defined for classification predictions".into(),
        )),
    }
}

fn regression(preds: &MemberPredictions) -> Result<(&[Vec<Real>], &[Real]), Error> {
    match preds {
        MemberPredictions::Regression { preds, targets, .. } => Ok((preds, targets)),
        MemberPredictions::Classification { .. } => Err(Error::InvalidArgument(
            "metric is defined for regression predictions".into(),
        )),
    }
}

/// Lowest index attaining the row maximum.
fn argmax(row: &[Real]) -> usize {
    let mut arg = 0;
    for (j, v) in row.iter().enumerate() {
        if *v > row[arg] {
            arg = j;
        }
    }
    arg
}

fn kl(p: &[Real], q: &[Real]) -> Real {
    let mut s = 0.0;
    for (pi, qi) in p.iter().zip(q) {
        let pc = pi.max(PROB_CLAMP);
        let qc = qi.max(PROB_CLAMP);
        s += pi * (pc / qc).ln();
    }
    s
}

/// Symmetric pairwise KL diversity:
///
/// ```text
/// (2 / (K(K-1))) Σ_{i<j} (1/N) Σ_n  ½ [ KL(p_i(x_n) ‖ p_j(x_n)) + KL(p_j ‖ p_i) ]
/// ```
///
/// Probabilities are clamped to `1e-12` inside the logarithms only, so
/// identical members give exactly zero.
pub fn pairwise_kl(preds: &MemberPredictions) -> Result<Real, Error> {
    let (probs, targets) = classification(preds)?;
    let k = probs.len();
    if k < 2 {
        return Err(Error::InvalidArgument(
            "pairwise KL needs at least two members".into(),
        ));
    }
    let n = targets.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let mut total = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            let mut pair = 0.0;
            for s in 0..n {
                let p = probs[i].row(s);
                let q = probs[j].row(s);
                pair += 0.5 * (kl(p, q) + kl(q, p));
            }
            total += pair / n as Real;
        }
    }
    Ok(total * 2.0 / (k as Real * (k - 1) as Real))
}

/// Mean pairwise argmax disagreement rate (ties to the lowest class).
pub fn argmax_disagreement(preds: &MemberPredictions) -> Result<Real, Error> {
    let (probs, targets) = classification(preds)?;
    let k = probs.len();
    if k < 2 {
        return Err(Error::InvalidArgument(
            "disagreement needs at least two members".into(),
        ));
    }
    let n = targets.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let labels: Vec<Vec<usize>> = probs
        .iter()
        .map(|p| (0..n).map(|i| argmax(p.row(i))).collect())
        .collect();
    let mut total = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            let diff = labels[i]
                .iter()
                .zip(&labels[j])
                .filter(|(a, b)| a != b)
                .count();
            total += diff as Real / n as Real;
        }
    }
    Ok(total * 2.0 / (k as Real * (k - 1) as Real))
}

/// Krogh–Vedelsby ambiguity: mean squared deviation of member predictions
/// from the ensemble mean, `A = (1/(NK)) Σ_n Σ_i (f_i(x_n) - f̄(x_n))²`,
/// in the original target scale.
pub fn ambiguity(preds: &MemberPredictions) -> Result<Real, Error> {
    let (fs, targets) = regression(preds)?;
    let k = fs.len();
    let n = targets.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let mut total = 0.0;
    for s in 0..n {
        let mean = fs.iter().map(|f| f[s]).sum::<Real>() / k as Real;
        for f in fs {
            let d = f[s] - mean;
            total += d * d;
        }
    }
    Ok(total / (n as Real * k as Real))
}

/// Ambiguity plus its normalized form `Ã = A / σ_y²` where `σ_y²` is the
/// raw training-target variance carried in the snapshot. Errors when that
/// variance is missing or zero.
pub fn kv_ambiguity(preds: &MemberPredictions) -> Result<(Real, Real), Error> {
    let a = ambiguity(preds)?;
    let var = match preds {
        MemberPredictions::Regression {
            train_target_variance,
            ..
        } => *train_target_variance,
        _ => unreachable!("ambiguity already rejected classification"),
    };
    match var {
        Some(v) if v > 0.0 => Ok((a, a / v)),
        Some(_) => Err(Error::InvalidArgument(
            "normalized ambiguity needs positive training-target variance".into(),
        )),
        None => Err(Error::InvalidArgument(
            "normalized ambiguity needs the training-target variance".into(),
        )),
    }
}

/// Max per-sample residual of the error decomposition
/// `(f̄ - y)² = (1/K) Σ_k (f_k - y)² - (1/K) Σ_k (f_k - f̄)²`.
pub fn kv_decomposition_check(preds: &MemberPredictions) -> Result<Real, Error> {
    let (fs, targets) = regression(preds)?;
    let k = fs.len() as Real;
    let mut worst = 0.0_f64;
    for (s, y) in targets.iter().enumerate() {
        let mean = fs.iter().map(|f| f[s]).sum::<Real>() / k;
        let ens_err = (mean - y) * (mean - y);
        let avg_err = fs.iter().map(|f| (f[s] - y) * (f[s] - y)).sum::<Real>() / k;
        let amb = fs.iter().map(|f| (f[s] - mean) * (f[s] - mean)).sum::<Real>() / k;
        worst = worst.max((ens_err - (avg_err - amb)).abs());
    }
    Ok(worst)
}

fn ensemble_probs(probs: &[Mat]) -> Result<Mat, Error> {
    let mut mean = Mat::zeros(probs[0].rows(), probs[0].cols());
    for p in probs {
        mean.axpy(1.0, p)?;
    }
    Ok(mean.scale(1.0 / probs.len() as Real))
}

/// Expected calibration error of the ensemble-averaged probabilities over
/// `n_bins` equal-width confidence bins.
///
/// Confidence is the max ensemble class probability; a confidence exactly
/// on a bin boundary lands in the higher bin, except 1.0 which stays in
/// the last bin. Empty bins contribute zero:
/// `ECE = Σ_m (|B_m|/N) |acc(B_m) - conf(B_m)|`.
pub fn ece(preds: &MemberPredictions, n_bins: usize) -> Result<Real, Error> {
    let (probs, targets) = classification(preds)?;
    if n_bins == 0 {
        return Err(Error::InvalidArgument("n_bins must be positive".into()));
    }
    let n = targets.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let mean = ensemble_probs(probs)?;
    let mut count = vec![0usize; n_bins];
    let mut conf_sum = vec![0.0; n_bins];
    let mut correct = vec![0usize; n_bins];
    for (i, y) in targets.iter().enumerate() {
        let row = mean.row(i);
        let pred = argmax(row);
        let conf = row[pred];
        let bin = ((conf * n_bins as Real).floor() as usize).min(n_bins - 1);
        count[bin] += 1;
        conf_sum[bin] += conf;
        correct[bin] += usize::from(pred == *y);
    }
    let mut e = 0.0;
    for b in 0..n_bins {
        if count[b] == 0 {
            continue;
        }
        let acc = correct[b] as Real / count[b] as Real;
        let conf = conf_sum[b] / count[b] as Real;
        e += count[b] as Real / n as Real * (acc - conf).abs();
    }
    Ok(e)
}

/// Primary task score of the ensemble prediction: RMSE in the original
/// target scale for regression (lower is better), argmax accuracy of the
/// mean probabilities for classification (higher is better).
pub fn task_score(preds: &MemberPredictions) -> Result<Real, Error> {
    match preds {
        MemberPredictions::Regression { preds, targets, .. } => {
            let k = preds.len() as Real;
            let n = targets.len();
            if n == 0 {
                return Err(Error::InvalidArgument("no samples".into()));
            }
            let mut se = 0.0;
            for (s, y) in targets.iter().enumerate() {
                let mean = preds.iter().map(|f| f[s]).sum::<Real>() / k;
                se += (mean - y) * (mean - y);
            }
            Ok((se / n as Real).sqrt())
        }
        MemberPredictions::Classification { probs, targets } => {
            let n = targets.len();
            if n == 0 {
                return Err(Error::InvalidArgument("no samples".into()));
            }
            let mean = ensemble_probs(probs)?;
            let correct = targets
                .iter()
                .enumerate()
                .filter(|(i, y)| argmax(mean.row(*i)) == **y)
                .count();
            Ok(correct as Real / n as Real)
        }
    }
}

/// Sign-corrected relative score difference in percent: positive always
/// means better than the reference. Higher-better scores use
/// `(score/ref - 1) * 100`; lower-better scores invert the ratio,
/// `(ref/score - 1) * 100`.
pub fn relative_score_to_reference(
    score: Real,
    ref_score: Real,
    higher_is_better: bool,
) -> Result<Real, Error> {
    if higher_is_better {
        if ref_score == 0.0 {
            return Err(Error::InvalidArgument("zero reference score".into()));
        }
        Ok((score / ref_score - 1.0) * 100.0)
    } else {
        if score == 0.0 || ref_score == 0.0 {
            return Err(Error::InvalidArgument(
                "zero score in lower-is-better ratio".into(),
            ));
        }
        Ok((ref_score / score - 1.0) * 100.0)
    }
}

/// Everything measured on one run; fields are per-task optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiversityReport {
    pub pairwise_kl: Option<Real>,
    pub disagreement: Option<Real>,
    pub ambiguity: Option<Real>,
    pub normalized_ambiguity: Option<Real>,
    pub ece: Option<Real>,
    pub accuracy: Option<Real>,
    pub rmse: Option<Real>,
}

/// Assemble the full report for a prediction snapshot. Pairwise metrics
/// are omitted when `K = 1`; normalized ambiguity is omitted when the
/// training-target variance is unknown or zero.
pub fn diversity_report(preds: &MemberPredictions) -> Result<DiversityReport, Error> {
    preds.validate()?;
    let mut report = DiversityReport::default();
    match preds {
        MemberPredictions::Classification { .. } => {
            if preds.members() >= 2 {
                report.pairwise_kl = Some(pairwise_kl(preds)?);
                report.disagreement = Some(argmax_disagreement(preds)?);
            }
            report.ece = Some(ece(preds, ECE_BINS)?);
            report.accuracy = Some(task_score(preds)?);
        }
        MemberPredictions::Regression { .. } => {
            report.ambiguity = Some(ambiguity(preds)?);
            report.normalized_ambiguity = kv_ambiguity(preds).ok().map(|(_, norm)| norm);
            report.rmse = Some(task_score(preds)?);
        }
    }
    Ok(report)
}
