//! Gini impurity and exhaustive best-split search.
//!
//! Candidate splits are compared with exact integer arithmetic so that ties
//! resolve by the stated rule (lowest feature, then lowest threshold) rather
//! than by floating-point noise.

use std::cmp::Ordering;

use super::data::{Columns, TrainingSet};

/// `1 − Σ (n_k / N)²`. Zero for an empty vector.
pub fn gini(class_counts: &[u32]) -> f64 {
    let n: u64 = class_counts.iter().map(|&c| c as u64).sum();
    if n == 0 {
        return 0.0;
    }
    let sq: u64 = class_counts.iter().map(|&c| (c as u64) * (c as u64)).sum();
    1.0 - sq as f64 / (n as f64 * n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    /// Rows with `value <= threshold` go left.
    pub threshold: f64,
    /// `G(parent) − (n_L/n)·G(L) − (n_R/n)·G(R)`.
    pub impurity_decrease: f64,
    pub n_left: usize,
    pub n_right: usize,
}

/// `Σc_L²/n_L + Σc_R²/n_R` held as an exact fraction.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(sum_sq_left: u64, n_left: u64, sum_sq_right: u64, n_right: u64) -> Self {
        Score {
            num: sum_sq_left as u128 * n_right as u128 + sum_sq_right as u128 * n_left as u128,
            den: n_left as u128 * n_right as u128,
        }
    }

    fn cmp(&self, other: &Score) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }

    fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

struct Best {
    feature: usize,
    threshold: f64,
    score: Score,
    n_left: usize,
}

struct Search<'a> {
    parent_sum_sq: u64,
    n: u64,
    parent_counts: &'a [u32],
    min_leaf: usize,
    best: Option<Best>,
}

impl Search<'_> {
    /// Offers a candidate; keeps it only if strictly better than the best so far.
    fn offer(&mut self, feature: usize, threshold: f64, left: &[u32], n_left: usize) {
        let n_right = self.n as usize - n_left;
        if n_left < self.min_leaf || n_right < self.min_leaf || n_left == 0 || n_right == 0 {
            return;
        }
        let mut sl = 0u64;
        let mut sr = 0u64;
        for (&l, &p) in left.iter().zip(self.parent_counts) {
            let r = (p - l) as u64;
            sl += l as u64 * l as u64;
            sr += r * r;
        }
        let score = Score::new(sl, n_left as u64, sr, n_right as u64);
        // Δ > 0  ⇔  score > Σc_P² / n
        if score.num * self.n as u128 <= self.parent_sum_sq as u128 * score.den {
            return;
        }
        let better = match &self.best {
            None => true,
            Some(b) => score.cmp(&b.score) == Ordering::Greater,
        };
        if better {
            self.best = Some(Best {
                feature,
                threshold,
                score,
                n_left,
            });
        }
    }
}

pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}

pub fn class_counts(labels: &[usize], rows: &[usize], n_classes: usize) -> Vec<u32> {
    let mut counts = vec![0u32; n_classes];
    for &r in rows {
        counts[labels[r]] += 1;
    }
    counts
}

/// Maximizes the weighted Gini decrease over the candidate features and the
/// midpoints between consecutive distinct values. `rows` may repeat indices
/// (bootstrap draws count with multiplicity). Returns `None` when no split
/// leaves `min_samples_leaf` rows on both sides with a positive decrease.
pub fn best_split(
    data: &TrainingSet,
    rows: &[usize],
    candidate_features: &[usize],
    min_samples_leaf: usize,
) -> Option<SplitChoice> {
    if rows.len() < 2 || candidate_features.is_empty() {
        return None;
    }
    let k = data.n_classes();
    let labels = data.labels();
    let parent = class_counts(labels, rows, k);
    let n = rows.len() as u64;
    let parent_sum_sq: u64 = parent.iter().map(|&c| c as u64 * c as u64).sum();
    let mut search = Search {
        parent_sum_sq,
        n,
        parent_counts: &parent,
        min_leaf: min_samples_leaf.max(1),
        best: None,
    };

    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();

    match data.columns() {
        Columns::Bytes(cols) => {
            let mut hist = vec![0u32; 256 * k];
            for &f in &features {
                hist.iter_mut().for_each(|h| *h = 0);
                let col = &cols[f];
                for &r in rows {
                    hist[col[r] as usize * k + labels[r]] += 1;
                }
                let mut left = vec![0u32; k];
                let mut n_left = 0usize;
                let mut prev: Option<usize> = None;
                for v in 0..256 {
                    let bucket = &hist[v * k..(v + 1) * k];
                    let total: u32 = bucket.iter().sum();
                    if total == 0 {
                        continue;
                    }
                    if let Some(p) = prev {
                        search.offer(f, (p + v) as f64 / 2.0, &left, n_left);
                    }
                    for (l, &b) in left.iter_mut().zip(bucket) {
                        *l += b;
                    }
                    n_left += total as usize;
                    prev = Some(v);
                }
            }
        }
        Columns::Real(cols) => {
            let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
            for &f in &features {
                pairs.clear();
                pairs.extend(rows.iter().map(|&r| (cols[f][r], labels[r])));
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut left = vec![0u32; k];
                for i in 0..pairs.len() {
                    if i > 0 && pairs[i].0 > pairs[i - 1].0 {
                        let t = midpoint(pairs[i - 1].0, pairs[i].0);
                        search.offer(f, t, &left, i);
                    }
                    left[pairs[i].1] += 1;
                }
            }
        }
    }

    let parent_term = parent_sum_sq as f64 / n as f64;
    search.best.map(|b| SplitChoice {
        feature: b.feature,
        threshold: b.threshold,
        impurity_decrease: ((b.score.value() - parent_term) / n as f64).max(0.0),
        n_left: b.n_left,
        n_right: n as usize - b.n_left,
    })
}
