//! Exact greedy tree growth. Each node re-sorts its rows on every candidate
//! feature and scores a split at every midpoint between consecutive distinct
//! values. Single-threaded by design of the caller; the forest parallelises
//! across trees instead.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;

use super::split::{consider, gini_mass, Acc, Candidate, TIE_EPS};
use super::tree::TreeNode;

/// Per-row statistics, split scoring and leaf values for one tree type.
pub(crate) trait Criterion {
    fn acc(&self, row: usize) -> Acc;
    /// Score of splitting `parent` into `left` and `right`, or `None` when the
    /// split must be rejected.
    fn gain(&self, parent: &Acc, left: &Acc, right: &Acc) -> Option<f64>;
    fn is_pure(&self, node: &Acc) -> bool;
    fn leaf_value(&self, node: &Acc, rows: &[usize]) -> f64;
}

/// Weighted Gini classification criterion; leaves hold the class-1 weight fraction.
pub(crate) struct Gini<'a> {
    pub labels: &'a [u8],
    pub weights: Option<&'a [f64]>,
}

impl Criterion for Gini<'_> {
    #[inline]
    fn acc(&self, row: usize) -> Acc {
        let w = self.weights.map_or(1.0, |w| w[row]);
        Acc {
            a: w,
            b: if self.labels[row] == 1 { w } else { 0.0 },
        }
    }

    #[inline]
    fn gain(&self, parent: &Acc, left: &Acc, right: &Acc) -> Option<f64> {
        let g = gini_mass(parent) - gini_mass(left) - gini_mass(right);
        (g > TIE_EPS * parent.a).then_some(g)
    }

    fn is_pure(&self, node: &Acc) -> bool {
        node.b <= 0.0 || node.b >= node.a
    }

    fn leaf_value(&self, node: &Acc, _rows: &[usize]) -> f64 {
        if node.a > 0.0 {
            (node.b / node.a).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Squared-error regression on logistic residuals `r = y - p`, with each
/// leaf replaced by the one-step Newton estimate `sum r / sum p(1-p)`.
/// `hess` holds `p(1-p)` per row.
pub(crate) struct ResidualNewton<'a> {
    pub residuals: &'a [f64],
    pub hess: &'a [f64],
}

impl Criterion for ResidualNewton<'_> {
    #[inline]
    fn acc(&self, row: usize) -> Acc {
        Acc {
            a: 1.0,
            b: self.residuals[row],
        }
    }

    #[inline]
    fn gain(&self, parent: &Acc, left: &Acc, right: &Acc) -> Option<f64> {
        let s = |n: &Acc| n.b * n.b / n.a;
        let (sl, sr, sp) = (s(left), s(right), s(parent));
        let g = sl + sr - sp;
        (g > TIE_EPS * (sl + sr)).then_some(g)
    }

    fn is_pure(&self, _node: &Acc) -> bool {
        false
    }

    fn leaf_value(&self, _node: &Acc, rows: &[usize]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for &r in rows {
            num += self.residuals[r];
            den += self.hess[r];
        }
        if den.abs() < 1e-150 {
            0.0
        } else {
            num / den
        }
    }
}

pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features drawn per node; `None` scans every feature.
    pub max_features: Option<usize>,
}

pub(crate) struct ExactBuilder<'a, C: Criterion> {
    columns: &'a [Vec<f64>],
    crit: &'a C,
    params: &'a GrowParams,
    rng: Option<&'a mut ChaCha8Rng>,
    pairs: Vec<(f64, usize)>,
}

impl<'a, C: Criterion> ExactBuilder<'a, C> {
    pub fn new(
        columns: &'a [Vec<f64>],
        crit: &'a C,
        params: &'a GrowParams,
        rng: Option<&'a mut ChaCha8Rng>,
    ) -> Self {
        Self {
            columns,
            crit,
            params,
            rng,
            pairs: Vec::new(),
        }
    }

    /// Grows a tree over `rows`; a row index may repeat (bootstrap draws).
    pub fn build(mut self, rows: Vec<usize>) -> TreeNode {
        self.grow(rows, 0)
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> TreeNode {
        let mut total = Acc::ZERO;
        for &r in &rows {
            total.add(&self.crit.acc(r));
        }
        let n = rows.len();
        let leaf =
            |crit: &C, rows: &[usize]| TreeNode::leaf(crit.leaf_value(&total, rows), rows.len());
        if depth >= self.params.max_depth
            || n < 2 * self.params.min_samples_leaf.max(1)
            || self.crit.is_pure(&total)
        {
            return leaf(self.crit, &rows);
        }
        let Some(best) = self.best_split(&rows, &total) else {
            return leaf(self.crit, &rows);
        };
        let col = &self.columns[best.feature];
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| col[r] <= best.threshold);
        drop(rows);
        let left = self.grow(left, depth + 1);
        let right = self.grow(right, depth + 1);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.columns.len();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < p => {
                let mut f = sample(rng, p, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize], total: &Acc) -> Option<Candidate> {
        let msl = self.params.min_samples_leaf.max(1);
        let n = rows.len();
        let mut best: Option<Candidate> = None;
        for f in self.candidate_features() {
            let col = &self.columns[f];
            self.pairs.clear();
            self.pairs.extend(rows.iter().map(|&r| (col[r], r)));
            self.pairs
                .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

            let mut left = Acc::ZERO;
            let mut group = Acc::ZERO;
            let mut n_left = 0usize;
            let mut group_n = 0usize;
            let mut prev = self.pairs[0].0;
            for &(v, r) in &self.pairs {
                if v != prev {
                    left.add(&group);
                    n_left += group_n;
                    group = Acc::ZERO;
                    group_n = 0;
                    if n_left >= msl && n - n_left >= msl {
                        let right = total.minus(&left);
                        if let Some(gain) = self.crit.gain(total, &left, &right) {
                            consider(
                                &mut best,
                                Candidate {
                                    gain,
                                    feature: f,
                                    threshold: super::split::midpoint(prev, v),
                                },
                            );
                        }
                    }
                    prev = v;
                }
                group.add(&self.crit.acc(r));
                group_n += 1;
            }
        }
        best
    }
}
