//! Exact second-order tree growth over column blocks sorted once per model.
//!
//! Trees grow level by level. For each level every feature column is scanned
//! once in sorted order, routing each row to the accumulator of the node it
//! currently sits in. Features are scanned in parallel and the per-feature
//! winners are reduced in feature order, so the tree does not depend on the
//! worker count.

use rayon::prelude::*;

use super::split::{consider, midpoint, newton_gain, newton_leaf_weight, Acc, Candidate};
use super::tree::TreeNode;

const INACTIVE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonParams {
    pub lambda: f64,
    pub gamma: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

/// Row indices of each column sorted by `(value, row)`.
pub(crate) fn presort(columns: &[Vec<f64>]) -> Vec<Vec<u32>> {
    columns
        .par_iter()
        .map(|col| {
            let mut idx: Vec<u32> = (0..col.len() as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            idx
        })
        .collect()
}

enum Slot {
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

#[derive(Clone, Copy)]
struct ScanState {
    left: Acc,
    group: Acc,
    n_left: usize,
    group_n: usize,
    prev: f64,
    started: bool,
}

impl Default for ScanState {
    fn default() -> Self {
        Self {
            left: Acc::ZERO,
            group: Acc::ZERO,
            n_left: 0,
            group_n: 0,
            prev: 0.0,
            started: false,
        }
    }
}

pub(crate) fn build_presorted(
    columns: &[Vec<f64>],
    sorted: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    p: &NewtonParams,
) -> TreeNode {
    let n = grad.len();
    let msl = p.min_samples_leaf.max(1);
    let row_acc = |r: usize| Acc {
        a: hess[r],
        b: grad[r],
    };

    let mut root = Acc::ZERO;
    for r in 0..n {
        root.add(&row_acc(r));
    }
    let mut slots = vec![Slot::Leaf { total: root, n }];
    // node id per row; INACTIVE once the row's node is final
    let mut row_node: Vec<u32> = vec![0; n];
    let mut frontier: Vec<usize> = vec![0];

    for _depth in 0..p.max_depth {
        // frontier position per node id
        let mut pos_of = vec![INACTIVE; slots.len()];
        let mut active = Vec::new();
        for &id in &frontier {
            if let Slot::Leaf { total, n } = slots[id] {
                if n >= 2 * msl {
                    pos_of[id] = active.len() as u32;
                    active.push((id, total, n));
                }
            }
        }
        if active.is_empty() {
            break;
        }

        let per_feature: Vec<Vec<Option<Candidate>>> = (0..columns.len())
            .into_par_iter()
            .map(|f| {
                let col = &columns[f];
                let mut state = vec![ScanState::default(); active.len()];
                let mut best: Vec<Option<Candidate>> = vec![None; active.len()];
                for &r in &sorted[f] {
                    let r = r as usize;
                    let node = row_node[r];
                    if node == INACTIVE {
                        continue;
                    }
                    let pos = pos_of[node as usize];
                    if pos == INACTIVE {
                        continue;
                    }
                    let pos = pos as usize;
                    let v = col[r];
                    let s = &mut state[pos];
                    if !s.started {
                        s.started = true;
                        s.prev = v;
                    } else if v != s.prev {
                        s.left.add(&s.group);
                        s.n_left += s.group_n;
                        s.group = Acc::ZERO;
                        s.group_n = 0;
                        let (_, total, count) = active[pos];
                        if s.n_left >= msl && count - s.n_left >= msl {
                            let right = total.minus(&s.left);
                            let gain = newton_gain(&total, &s.left, &right, p.lambda, p.gamma);
                            if gain > 0.0 {
                                consider(
                                    &mut best[pos],
                                    Candidate {
                                        gain,
                                        feature: f,
                                        threshold: midpoint(s.prev, v),
                                    },
                                );
                            }
                        }
                        s.prev = v;
                    }
                    s.group.add(&row_acc(r));
                    s.group_n += 1;
                }
                best
            })
            .collect();

        let mut next_frontier = Vec::new();
        let mut split_of: Vec<Option<(usize, f64, u32, u32)>> = vec![None; slots.len()];
        for (pos, &(id, _, _)) in active.iter().enumerate() {
            let mut winner: Option<Candidate> = None;
            for feature_best in &per_feature {
                if let Some(c) = feature_best[pos] {
                    consider(&mut winner, c);
                }
            }
            if let Some(c) = winner {
                let left = slots.len();
                slots.push(Slot::Leaf {
                    total: Acc::ZERO,
                    n: 0,
                });
                slots.push(Slot::Leaf {
                    total: Acc::ZERO,
                    n: 0,
                });
                split_of[id] = Some((c.feature, c.threshold, left as u32, left as u32 + 1));
                slots[id] = Slot::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right: left + 1,
                };
                next_frontier.push(left);
                next_frontier.push(left + 1);
            }
        }
        if next_frontier.is_empty() {
            break;
        }

        // route rows and accumulate child totals in row order
        let mut totals = vec![(Acc::ZERO, 0usize); slots.len()];
        for r in 0..n {
            let node = row_node[r];
            if node == INACTIVE {
                continue;
            }
            match split_of.get(node as usize).copied().flatten() {
                Some((f, thr, l, rt)) => {
                    let child = if columns[f][r] <= thr { l } else { rt };
                    row_node[r] = child;
                    let t = &mut totals[child as usize];
                    t.0.add(&row_acc(r));
                    t.1 += 1;
                }
                None => row_node[r] = INACTIVE,
            }
        }
        for &id in &next_frontier {
            let (total, count) = totals[id];
            slots[id] = Slot::Leaf { total, n: count };
        }
        frontier = next_frontier;
    }

    assemble(&slots, 0, p.lambda)
}

fn assemble(slots: &[Slot], id: usize, lambda: f64) -> TreeNode {
    match slots[id] {
        Slot::Leaf { total, n } => TreeNode::leaf(newton_leaf_weight(total.b, total.a, lambda), n),
        Slot::Split {
            feature,
            threshold,
            left,
            right,
        } => TreeNode::Split {
            feature,
            threshold,
            left: Box::new(assemble(slots, left, lambda)),
            right: Box::new(assemble(slots, right, lambda)),
        },
    }
}
