//! Split scoring shared by every tree builder.

/// Relative slack under which two gains count as tied. Ties keep the earlier
/// candidate, i.e. the lower feature index and then the lower threshold.
pub(crate) const TIE_EPS: f64 = 1e-12;

/// Additive node statistic. For Gini nodes `a` is the total weight and `b`
/// the positive weight; for squared-error nodes `a` is the weight and `b`
/// the weighted target sum; for Newton nodes `a` is the hessian sum `H` and
/// `b` the gradient sum `G`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Acc {
    pub a: f64,
    pub b: f64,
}

impl Acc {
    pub const ZERO: Acc = Acc { a: 0.0, b: 0.0 };

    #[inline]
    pub fn add(&mut self, o: &Acc) {
        self.a += o.a;
        self.b += o.b;
    }

    #[inline]
    pub fn minus(&self, o: &Acc) -> Acc {
        Acc {
            a: self.a - o.a,
            b: self.b - o.b,
        }
    }
}

/// A chosen split: rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Candidate {
    pub gain: f64,
    pub feature: usize,
    pub threshold: f64,
}

#[inline]
pub(crate) fn improves(gain: f64, best: Option<&Candidate>) -> bool {
    match best {
        None => true,
        Some(b) => gain > b.gain + TIE_EPS * b.gain.abs(),
    }
}

/// Keeps `cand` if it beats the incumbent.
#[inline]
pub(crate) fn consider(best: &mut Option<Candidate>, cand: Candidate) {
    if improves(cand.gain, best.as_ref()) {
        *best = Some(cand);
    }
}

/// Threshold between two consecutive distinct values `lo < hi`.
#[inline]
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = (lo + hi) / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}

/// Weighted Gini impurity times node weight: `w - (w_pos^2 + w_neg^2) / w`.
#[inline]
pub(crate) fn gini_mass(s: &Acc) -> f64 {
    if s.a <= 0.0 {
        return 0.0;
    }
    let neg = s.a - s.b;
    s.a - (s.b * s.b + neg * neg) / s.a
}

/// Second-order split gain with L2 penalty `lambda` and split cost `gamma`.
#[inline]
pub(crate) fn newton_gain(parent: &Acc, left: &Acc, right: &Acc, lambda: f64, gamma: f64) -> f64 {
    let score = |s: &Acc| s.b * s.b / (s.a + lambda);
    0.5 * (score(left) + score(right) - score(parent)) - gamma
}

/// Optimal leaf weight `-G / (H + lambda)`.
#[inline]
pub fn newton_leaf_weight(grad_sum: f64, hess_sum: f64, lambda: f64) -> f64 {
    let den = hess_sum + lambda;
    if den <= 0.0 {
        0.0
    } else {
        -grad_sum / den
    }
}
