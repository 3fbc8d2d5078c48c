//! Evaluation battery: rank-based AUC, F1-optimal threshold selection,
//! precision/recall reporting, Kendall tau-b with significance, and Pearson
//! correlation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("labels must contain both classes")]
    SingleClass,
    #[error("expected equal-length inputs, got {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} observations, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("correlation is undefined for an all-tied input")]
    ConstantInput,
}

/// Threshold-based classification metrics. `precision` is `None` when no
/// instance is predicted positive (the undefined case reported as n.a.).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub threshold: f64,
    pub f1: f64,
    pub precision: Option<f64>,
    pub recall: f64,
    pub auc: f64,
}

/// Area under the ROC curve via the rank-statistic formulation: the
/// probability that a positive outscores a negative, counting ties as 1/2.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // Mid-ranks over tie groups, 1-based.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let mid_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum_pos += mid_rank;
            }
        }
        i = j;
    }
    let n_pos_f = n_pos as f64;
    Ok((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> (usize, usize, usize) {
    let mut tp = 0;
    let mut fp = 0;
    let mut fne = 0;
    for (&s, &l) in scores.iter().zip(labels) {
        let predicted = s >= threshold;
        match (predicted, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
            (false, false) => {}
        }
    }
    (tp, fp, fne)
}

fn f1_from_confusion(tp: usize, fp: usize, fne: usize) -> f64 {
    let denom = 2 * tp + fp + fne;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Candidate decision thresholds: midpoints between consecutive distinct
/// sorted scores, bracketed by -inf (predict everything positive) and +inf
/// (predict nothing positive).
fn threshold_candidates(scores: &[f64]) -> Vec<f64> {
    let mut distinct = scores.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    distinct.dedup();
    let mut candidates = Vec::with_capacity(distinct.len() + 1);
    candidates.push(f64::NEG_INFINITY);
    for pair in distinct.windows(2) {
        candidates.push(0.5 * (pair[0] + pair[1]));
    }
    candidates.push(f64::INFINITY);
    candidates
}

/// The threshold maximizing F1 under the rule `predict positive iff score >=
/// threshold`. Ties between thresholds break toward the smallest (the
/// recall-maximizing choice). Labels that are all positive select the -inf
/// sentinel.
pub fn best_f1_threshold(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    if labels.is_empty() {
        return Err(MetricsError::TooFewValues { needed: 1, got: 0 });
    }
    let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for threshold in threshold_candidates(scores) {
        let (tp, fp, fne) = confusion(scores, labels, threshold);
        let f1 = f1_from_confusion(tp, fp, fne);
        if f1 > best.0 {
            best = (f1, threshold);
        }
    }
    Ok(best.1)
}

/// Precision/recall/F1 at a fixed threshold plus the threshold-free AUC.
pub fn report(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
) -> Result<ClassificationReport, MetricsError> {
    let auc = roc_auc(scores, labels)?;
    let (tp, fp, fne) = confusion(scores, labels, threshold);
    let precision = if tp + fp == 0 { None } else { Some(tp as f64 / (tp + fp) as f64) };
    let recall = tp as f64 / (tp + fne) as f64;
    Ok(ClassificationReport {
        threshold,
        f1: f1_from_confusion(tp, fp, fne),
        precision,
        recall,
        auc,
    })
}

/// Kendall rank correlation with significance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KendallTau {
    pub tau_b: f64,
    pub p_value: f64,
}

/// How the two-sided p-value is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KendallPValue {
    /// Exact enumeration for n <= 8 with no ties, normal approximation
    /// otherwise.
    Auto,
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, Default)]
struct TieCounts {
    /// sum t*(t-1)/2 over tie groups
    pairs: f64,
    /// sum t*(t-1)*(2t+5)
    v_term: f64,
    /// sum t*(t-1)
    t1: f64,
    /// sum t*(t-1)*(t-2)
    t2: f64,
}

fn tie_counts(values: &[f64]) -> TieCounts {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mut counts = TieCounts::default();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        counts.pairs += t * (t - 1.0) / 2.0;
        counts.v_term += t * (t - 1.0) * (2.0 * t + 5.0);
        counts.t1 += t * (t - 1.0);
        counts.t2 += t * (t - 1.0) * (t - 2.0);
        i = j;
    }
    counts
}

/// Concordant-minus-discordant count by sorting on x and merge-counting
/// discordant swaps in y, with the usual tie bookkeeping.
fn concordance_statistic(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0).expect("finite x").then(a.1.partial_cmp(&b.1).expect("finite y"))
    });

    // Pairs tied in both x and y.
    let mut tied_xy = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && pairs[j] == pairs[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tied_xy += t * (t - 1.0) / 2.0;
        i = j;
    }

    // Merge sort on y counting swaps; equal y values do not count.
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buffer = vec![0.0; n];
    let mut swaps = 0.0;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            if mid < hi {
                let (mut a, mut b, mut k) = (lo, mid, lo);
                while a < mid || b < hi {
                    if a < mid && (b >= hi || ys[a] <= ys[b]) {
                        buffer[k] = ys[a];
                        a += 1;
                    } else {
                        swaps += (mid - a) as f64;
                        buffer[k] = ys[b];
                        b += 1;
                    }
                    k += 1;
                }
                ys[lo..hi].copy_from_slice(&buffer[lo..hi]);
            }
            lo += 2 * width;
        }
        width *= 2;
    }

    let total = n as f64 * (n as f64 - 1.0) / 2.0;
    let tied_x = tie_counts(x).pairs;
    let tied_y = tie_counts(y).pairs;
    // concordant - discordant = total - tied_x - tied_y + tied_xy - 2*swaps
    total - tied_x - tied_y + tied_xy - 2.0 * swaps
}

fn tau_b_from_statistic(s: f64, n: usize, tied_x: f64, tied_y: f64) -> f64 {
    let total = n as f64 * (n as f64 - 1.0) / 2.0;
    let denom = ((total - tied_x) * (total - tied_y)).sqrt();
    (s / denom).clamp(-1.0, 1.0)
}

fn heaps_permutations(k: usize, items: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    if k <= 1 {
        visit(items);
        return;
    }
    for i in 0..k - 1 {
        heaps_permutations(k - 1, items, visit);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
    heaps_permutations(k - 1, items, visit);
}

/// Exact two-sided permutation p-value: the share of pairings with
/// |S| at least as large as observed, over all n! orderings of y.
fn exact_p_value(x: &[f64], y: &[f64], observed_s: f64) -> f64 {
    let n = x.len();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut extreme = 0u64;
    let mut total = 0u64;
    let threshold = observed_s.abs() - 1e-9;
    heaps_permutations(n, &mut indices, &mut |perm| {
        let mut s = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let product = (x[i] - x[j]) * (y[perm[i]] - y[perm[j]]);
                if product > 0.0 {
                    s += 1.0;
                } else if product < 0.0 {
                    s -= 1.0;
                }
            }
        }
        if s.abs() >= threshold {
            extreme += 1;
        }
        total += 1;
    });
    extreme as f64 / total as f64
}

/// Kendall tau-b with a two-sided p-value, choosing the method automatically.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<KendallTau, MetricsError> {
    kendall_tau_with(x, y, KendallPValue::Auto)
}

/// Tau-b with tie corrections. The exact p-value enumerates all orderings
/// (only valid without ties); the normal approximation uses the tie-corrected
/// variance of S with a continuity correction.
pub fn kendall_tau_with(
    x: &[f64],
    y: &[f64],
    method: KendallPValue,
) -> Result<KendallTau, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(MetricsError::TooFewValues { needed: 3, got: n });
    }
    let ties_x = tie_counts(x);
    let ties_y = tie_counts(y);
    let total = n as f64 * (n as f64 - 1.0) / 2.0;
    if ties_x.pairs == total || ties_y.pairs == total {
        return Err(MetricsError::ConstantInput);
    }

    let s = concordance_statistic(x, y);
    let tau_b = tau_b_from_statistic(s, n, ties_x.pairs, ties_y.pairs);

    let has_ties = ties_x.pairs > 0.0 || ties_y.pairs > 0.0;
    let use_exact = match method {
        KendallPValue::Exact => true,
        KendallPValue::NormalApprox => false,
        KendallPValue::Auto => n <= 8 && !has_ties,
    };
    let p_value = if use_exact {
        exact_p_value(x, y, s)
    } else {
        let nf = n as f64;
        let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
        let var_s = (v0 - ties_x.v_term - ties_y.v_term) / 18.0
            + ties_x.t1 * ties_y.t1 / (2.0 * nf * (nf - 1.0))
            + ties_x.t2 * ties_y.t2 / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
        if s == 0.0 || var_s <= 0.0 {
            1.0
        } else {
            // Continuity correction: |S| reduced by 1.
            let z = (s.abs() - 1.0).max(0.0) / var_s.sqrt();
            let normal = Normal::standard();
            (2.0 * normal.sf(z)).clamp(0.0, 1.0)
        }
    };
    Ok(KendallTau { tau_b, p_value })
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(MetricsError::TooFewValues { needed: 2, got: x.len() });
    }
    let mx = crate::math::mean(x);
    let my = crate::math::mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::ConstantInput);
    }
    Ok(sxy / (sxx * syy).sqrt())
}
