//! Histogram-based, leaf-wise tree growth.
//!
//! Feature values are mapped once to at most `n_bins` equal-frequency bins.
//! Each leaf keeps a per-feature histogram of `(G, H, count)`; the best split
//! of a leaf is found by a prefix scan over its bins. Growth always expands
//! the live leaf with the largest gain until the leaf budget, the depth
//! limit, or the supply of positive-gain splits runs out.

use rayon::prelude::*;

use super::presorted::NewtonParams;
use super::split::{improves, midpoint, newton_gain, newton_leaf_weight, Acc, Candidate};
use super::tree::TreeNode;

/// Per-feature cut points; a value `x` falls in bin `b` when
/// `cuts[b - 1] < x <= cuts[b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinMapper {
    cuts: Vec<Vec<f64>>,
}

impl BinMapper {
    /// Equal-frequency bins over each column. When a column has no more
    /// distinct values than `n_bins`, every distinct value gets its own bin.
    pub fn fit(columns: &[Vec<f64>], n_bins: usize) -> Self {
        assert!(n_bins >= 2);
        let cuts = columns
            .par_iter()
            .map(|col| {
                let mut sorted = col.clone();
                sorted.sort_by(f64::total_cmp);
                let mut distinct: Vec<(f64, usize)> = Vec::new();
                for v in sorted {
                    match distinct.last_mut() {
                        Some((last, c)) if *last == v => *c += 1,
                        _ => distinct.push((v, 1)),
                    }
                }
                let mut cuts = Vec::new();
                if distinct.len() <= n_bins {
                    for w in distinct.windows(2) {
                        cuts.push(midpoint(w[0].0, w[1].0));
                    }
                } else {
                    let total = col.len() as f64;
                    let mut cum = 0usize;
                    for i in 0..distinct.len() - 1 {
                        cum += distinct[i].1;
                        let boundary = (cuts.len() + 1) as f64 * total / n_bins as f64;
                        if cum as f64 >= boundary && cuts.len() < n_bins - 1 {
                            cuts.push(midpoint(distinct[i].0, distinct[i + 1].0));
                        }
                    }
                }
                cuts
            })
            .collect();
        Self { cuts }
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.cuts[feature].len() + 1
    }

    pub fn cuts(&self, feature: usize) -> &[f64] {
        &self.cuts[feature]
    }

    #[inline]
    pub fn bin(&self, feature: usize, x: f64) -> u16 {
        self.cuts[feature].partition_point(|&c| c < x) as u16
    }

    /// Column-major bin indices.
    pub fn transform(&self, columns: &[Vec<f64>]) -> Vec<Vec<u16>> {
        columns
            .par_iter()
            .enumerate()
            .map(|(f, col)| col.iter().map(|&x| self.bin(f, x)).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Bin {
    acc: Acc,
    n: u32,
}

type Histogram = Vec<Vec<Bin>>;

pub(crate) struct LeafWiseParams {
    pub newton: NewtonParams,
    pub max_leaves: usize,
}

struct Leaf {
    id: usize,
    rows: Vec<u32>,
    depth: usize,
    hist: Histogram,
    best: Option<(Candidate, u16)>,
}

enum Node {
    Leaf {
        total: Acc,
        n: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

pub(crate) struct HistogramBuilder<'a> {
    pub mapper: &'a BinMapper,
    pub bins: &'a [Vec<u16>],
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub params: &'a LeafWiseParams,
}

impl HistogramBuilder<'_> {
    fn row_acc(&self, r: usize) -> Acc {
        Acc {
            a: self.hess[r],
            b: self.grad[r],
        }
    }

    fn histogram(&self, rows: &[u32]) -> Histogram {
        (0..self.bins.len())
            .into_par_iter()
            .map(|f| {
                let col = &self.bins[f];
                let mut h = vec![Bin::default(); self.mapper.n_bins(f)];
                for &r in rows {
                    let r = r as usize;
                    let b = &mut h[col[r] as usize];
                    b.acc.add(&self.row_acc(r));
                    b.n += 1;
                }
                h
            })
            .collect()
    }

    fn subtract(parent: &Histogram, child: &Histogram) -> Histogram {
        parent
            .iter()
            .zip(child)
            .map(|(p, c)| {
                p.iter()
                    .zip(c)
                    .map(|(p, c)| Bin {
                        acc: p.acc.minus(&c.acc),
                        n: p.n - c.n,
                    })
                    .collect()
            })
            .collect()
    }

    /// Best split of a leaf from its histogram, with the bin index of the
    /// last bin routed left.
    fn best_split(&self, hist: &Histogram, total: &Acc, n: usize) -> Option<(Candidate, u16)> {
        let p = &self.params.newton;
        let msl = p.min_samples_leaf.max(1);
        if n < 2 * msl {
            return None;
        }
        let mut best: Option<(Candidate, u16)> = None;
        for (f, h) in hist.iter().enumerate() {
            let cuts = self.mapper.cuts(f);
            let mut left = Acc::ZERO;
            let mut n_left = 0usize;
            let mut feature_best: Option<(Candidate, u16)> = None;
            for (b, bin) in h.iter().enumerate().take(h.len() - 1) {
                left.add(&bin.acc);
                n_left += bin.n as usize;
                if bin.n == 0 || n_left < msl || n - n_left < msl {
                    continue;
                }
                let right = total.minus(&left);
                let gain = newton_gain(total, &left, &right, p.lambda, p.gamma);
                if gain > 0.0 && improves(gain, feature_best.as_ref().map(|b| &b.0)) {
                    let cand = Candidate {
                        gain,
                        feature: f,
                        threshold: cuts[b],
                    };
                    feature_best = Some((cand, b as u16));
                }
            }
            if let Some(fb) = feature_best {
                if improves(fb.0.gain, best.as_ref().map(|b| &b.0)) {
                    best = Some(fb);
                }
            }
        }
        best
    }

    pub fn build(&self) -> TreeNode {
        let n = self.grad.len();
        let rows: Vec<u32> = (0..n as u32).collect();
        let mut total = Acc::ZERO;
        for r in 0..n {
            total.add(&self.row_acc(r));
        }
        let hist = self.histogram(&rows);
        let best = self.best_split(&hist, &total, n);
        let mut nodes = vec![Node::Leaf { total, n }];
        let mut live = vec![Leaf {
            id: 0,
            rows,
            depth: 0,
            hist,
            best,
        }];
        let max_leaves = self.params.max_leaves.max(1);
        let mut n_leaves = 1;

        while n_leaves < max_leaves {
            // largest gain first; ties go to the earlier-created leaf
            let mut order: Vec<usize> = (0..live.len()).collect();
            order.sort_unstable_by_key(|&i| live[i].id);
            let mut pick: Option<(usize, Candidate)> = None;
            for i in order {
                let leaf = &live[i];
                if leaf.depth >= self.params.newton.max_depth {
                    continue;
                }
                if let Some((c, _)) = leaf.best {
                    if improves(c.gain, pick.as_ref().map(|p| &p.1)) {
                        pick = Some((i, c));
                    }
                }
            }
            let Some((i, cand)) = pick else { break };
            let leaf = live.swap_remove(i);
            let (_, split_bin) = leaf.best.expect("picked leaf has a split");
            let col = &self.bins[cand.feature];
            let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = leaf
                .rows
                .iter()
                .partition(|&&r| col[r as usize] <= split_bin);

            let sum = |rows: &[u32]| {
                let mut t = Acc::ZERO;
                for &r in rows {
                    t.add(&self.row_acc(r as usize));
                }
                t
            };
            let (lt, rt) = (sum(&left_rows), sum(&right_rows));
            let (lh, rh) = if left_rows.len() <= right_rows.len() {
                let lh = self.histogram(&left_rows);
                let rh = Self::subtract(&leaf.hist, &lh);
                (lh, rh)
            } else {
                let rh = self.histogram(&right_rows);
                let lh = Self::subtract(&leaf.hist, &rh);
                (lh, rh)
            };
            let left_id = nodes.len();
            nodes.push(Node::Leaf {
                total: lt,
                n: left_rows.len(),
            });
            nodes.push(Node::Leaf {
                total: rt,
                n: right_rows.len(),
            });
            nodes[leaf.id] = Node::Split {
                feature: cand.feature,
                threshold: cand.threshold,
                left: left_id,
                right: left_id + 1,
            };
            let depth = leaf.depth + 1;
            let lb = self.best_split(&lh, &lt, left_rows.len());
            let rb = self.best_split(&rh, &rt, right_rows.len());
            live.push(Leaf {
                id: left_id,
                rows: left_rows,
                depth,
                hist: lh,
                best: lb,
            });
            live.push(Leaf {
                id: left_id + 1,
                rows: right_rows,
                depth,
                hist: rh,
                best: rb,
            });
            n_leaves += 1;
        }
        assemble(&nodes, 0, self.params.newton.lambda)
    }
}

fn assemble(nodes: &[Node], id: usize, lambda: f64) -> TreeNode {
    match nodes[id] {
        Node::Leaf { total, n } => TreeNode::leaf(newton_leaf_weight(total.b, total.a, lambda), n),
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => TreeNode::Split {
            feature,
            threshold,
            left: Box::new(assemble(nodes, left, lambda)),
            right: Box::new(assemble(nodes, right, lambda)),
        },
    }
}

/// Best split gain of an arbitrary row set, for the leaf-priority checks.
#[cfg(test)]
pub(crate) fn best_gain_for_rows(
    mapper: &BinMapper,
    bins: &[Vec<u16>],
    grad: &[f64],
    hess: &[f64],
    params: &LeafWiseParams,
    rows: &[u32],
) -> Option<f64> {
    let b = HistogramBuilder {
        mapper,
        bins,
        grad,
        hess,
        params,
    };
    let mut total = Acc::ZERO;
    for &r in rows {
        total.add(&b.row_acc(r as usize));
    }
    let hist = b.histogram(rows);
    b.best_split(&hist, &total, rows.len()).map(|(c, _)| c.gain)
}
