//! Detection quality and group fairness of anomaly scores.
//!
//! An instance is predicted abnormal when its score is strictly above the
//! threshold `t`.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate ratio at or above which a partition satisfies the 80% rule.
pub const EIGHTY_PERCENT_RULE: f64 = 0.8;

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Threshold with exactly the `k` largest scores strictly above it: the
/// midpoint of the k-th and (k+1)-th largest. `k = 0` gives `max + 1` and
/// `k = n` gives `min − 1`.
pub fn threshold_from_count(scores: &[f64], k: usize) -> Result<f64> {
    let n = scores.len();
    if n == 0 {
        return Err(Error::Empty("scores"));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot flag {k} anomalies among {n} scores"
        )));
    }
    let desc: Vec<f64> = sorted(scores).into_iter().rev().collect();
    if k == 0 {
        return Ok(desc[0] + 1.0);
    }
    if k == n {
        return Ok(desc[n - 1] - 1.0);
    }
    let (above, below) = (desc[k - 1], desc[k]);
    if above == below {
        return Err(Error::ThresholdTie {
            k,
            next: k + 1,
            value: above,
        });
    }
    let t = below + (above - below) / 2.0;
    // Adjacent floats: the midpoint can round up onto `above`.
    Ok(if t < above { t } else { below })
}

fn positive_rates(scores: &[f64], z: &[u8], t: f64) -> Result<[f64; 2]> {
    if scores.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: z.len(),
        });
    }
    let mut n = [0usize; 2];
    let mut pos = [0usize; 2];
    for (&s, &g) in scores.iter().zip(z) {
        let g = usize::from(g);
        if g > 1 {
            return Err(Error::InvalidArgument("PSV values must be 0 or 1".into()));
        }
        n[g] += 1;
        pos[g] += usize::from(s > t);
    }
    match n {
        [0, _] => return Err(Error::SinglePsvGroup(1)),
        [_, 0] => return Err(Error::SinglePsvGroup(0)),
        _ => {}
    }
    Ok([pos[0] as f64 / n[0] as f64, pos[1] as f64 / n[1] as f64])
}

/// Ratio of the per-group rates of predicted anomalies, the smaller over the
/// larger. No positives anywhere counts as 1; positives in one group only as 0.
pub fn p_rule(scores: &[f64], z: &[u8], t: f64) -> Result<f64> {
    let [r0, r1] = positive_rates(scores, z, t)?;
    Ok(p_rule_from_rates(r0, r1))
}

pub fn p_rule_from_rates(r0: f64, r1: f64) -> f64 {
    match (r0 == 0.0, r1 == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => (r1 / r0).min(r0 / r1),
    }
}

/// Exact Wasserstein-1 distance between two empirical distributions on the
/// line. Equal sizes use the mean gap of co-sorted samples; otherwise
/// `∫ |F_P(x) − F_Q(x)| dx` is summed over the merged support.
pub fn wasserstein1(samples_p: &[f64], samples_q: &[f64]) -> Result<f64> {
    if samples_p.is_empty() || samples_q.is_empty() {
        return Err(Error::Empty("Wasserstein sample set"));
    }
    if samples_p.iter().chain(samples_q).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("samples must be finite".into()));
    }
    let p = sorted(samples_p);
    let q = sorted(samples_q);
    if p.len() == q.len() {
        let total: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
        return Ok(total / p.len() as f64);
    }
    let (np, nq) = (p.len() as f64, q.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut total = 0.0;
    let mut x = p[0].min(q[0]);
    while i < p.len() || j < q.len() {
        let next = match (p.get(i), q.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        let gap = (i as f64 / np - j as f64 / nq).abs();
        total += gap * (next - x);
        x = next;
        while i < p.len() && p[i] == x {
            i += 1;
        }
        while j < q.len() && q[j] == x {
            j += 1;
        }
    }
    Ok(total)
}

/// Probability that a random abnormal instance outscores a random normal
/// one, ties counting one half. Computed from mid-ranks in `O(n log n)`.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    let n1 = labels.iter().filter(|&&y| y == 1).count();
    let n0 = labels.iter().filter(|&&y| y == 0).count();
    if n0 + n1 != labels.len() {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]].total_cmp(&scores[order[start]]) == Ordering::Equal {
            end += 1;
        }
        // Ranks start..end (1-based start+1..=end) share their mean.
        let mid = (start + 1 + end) as f64 / 2.0;
        let positives = order[start..end].iter().filter(|&&i| labels[i] == 1).count();
        rank_sum += mid * positives as f64;
        start = end;
    }
    let (n0, n1) = (n0 as f64, n1 as f64);
    Ok((rank_sum - n1 * (n1 + 1.0) / 2.0) / (n0 * n1))
}

/// How the abnormal/normal cut is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cut {
    /// Flag exactly this many instances.
    Count(usize),
    /// Flag as many instances as there are abnormal labels.
    LabelCount,
    Threshold(f64),
}

/// Predicted-group counts per PSV value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contingency {
    pub psv0_normal: usize,
    pub psv0_abnormal: usize,
    pub psv1_normal: usize,
    pub psv1_abnormal: usize,
}

impl Contingency {
    pub fn from_scores(scores: &[f64], z: &[u8], t: f64) -> Self {
        let mut c = Contingency {
            psv0_normal: 0,
            psv0_abnormal: 0,
            psv1_normal: 0,
            psv1_abnormal: 0,
        };
        for (&s, &g) in scores.iter().zip(z) {
            match (g, s > t) {
                (0, false) => c.psv0_normal += 1,
                (0, true) => c.psv0_abnormal += 1,
                (_, false) => c.psv1_normal += 1,
                (_, true) => c.psv1_abnormal += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.psv0_normal + self.psv0_abnormal + self.psv1_normal + self.psv1_abnormal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairnessReport {
    pub p_rule: f64,
    pub wasserstein: f64,
    pub auc: Option<f64>,
    pub threshold: f64,
    pub counts: Contingency,
}

impl FairnessReport {
    pub fn satisfies_eighty_percent_rule(&self) -> bool {
        self.p_rule >= EIGHTY_PERCENT_RULE
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// All metrics for one scored evaluation set. The Wasserstein distance
/// compares the two PSV groups' scores over every instance, normal and abnormal.
pub fn evaluate(scores: &[f64], z: &[u8], labels: Option<&[u8]>, cut: Cut) -> Result<FairnessReport> {
    if scores.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: z.len(),
        });
    }
    let threshold = match cut {
        Cut::Threshold(t) => t,
        Cut::Count(k) => threshold_from_count(scores, k)?,
        Cut::LabelCount => {
            let l = labels.ok_or_else(|| {
                Error::InvalidArgument("anomaly count requested from labels, but none given".into())
            })?;
            threshold_from_count(scores, l.iter().filter(|&&y| y == 1).count())?
        }
    };
    let p = p_rule(scores, z, threshold)?;
    let (g0, g1): (Vec<f64>, Vec<f64>) = {
        let mut g0 = Vec::new();
        let mut g1 = Vec::new();
        for (&s, &g) in scores.iter().zip(z) {
            if g == 0 { g0.push(s) } else { g1.push(s) }
        }
        (g0, g1)
    };
    let wasserstein = wasserstein1(&g0, &g1)?;
    let auc = labels.map(|l| auc(scores, l)).transpose()?;
    Ok(FairnessReport {
        p_rule: p,
        wasserstein,
        auc,
        threshold,
        counts: Contingency::from_scores(scores, z, threshold),
    })
}

/// Agreement between two models' top-`k` anomaly sets on the same data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub k: usize,
    /// Predicted anomalies per PSV value, model A.
    pub counts_a: [usize; 2],
    /// Predicted anomalies per PSV value, model B.
    pub counts_b: [usize; 2],
    pub overlap: usize,
    /// `overlap / k`.
    pub ratio: f64,
}

pub fn overlap(scores_a: &[f64], scores_b: &[f64], z: &[u8], k: usize) -> Result<OverlapReport> {
    if scores_a.len() != scores_b.len() || scores_a.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: scores_a.len(),
            found: if scores_b.len() != scores_a.len() { scores_b.len() } else { z.len() },
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("overlap needs k ≥ 1".into()));
    }
    let ta = threshold_from_count(scores_a, k)?;
    let tb = threshold_from_count(scores_b, k)?;
    let mut counts_a = [0; 2];
    let mut counts_b = [0; 2];
    let mut both = 0;
    for i in 0..z.len() {
        let (a, b) = (scores_a[i] > ta, scores_b[i] > tb);
        let g = usize::from(z[i].min(1));
        counts_a[g] += usize::from(a);
        counts_b[g] += usize::from(b);
        both += usize::from(a && b);
    }
    Ok(OverlapReport {
        k,
        counts_a,
        counts_b,
        overlap: both,
        ratio: both as f64 / k as f64,
    })
}

/// Spearman rank correlation with mid-ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument("spearman needs at least two points".into()));
    }
    let ra = mid_ranks(a);
    let rb = mid_ranks(b);
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - mean) * (y - mean);
        va += (x - mean) * (x - mean);
        vb += (y - mean) * (y - mean);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (va * vb).sqrt())
}

fn mid_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let mid = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        start = end;
    }
    ranks
}
