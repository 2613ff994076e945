//! Binary logistic loss and its derivatives with respect to the raw score.

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` when the loss is evaluated.
pub const PROB_CLAMP: f64 = 1e-15;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow or cancellation.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Score at which the sigmoid reaches the probability clamp.
fn score_clamp() -> f64 {
    ((1.0 - PROB_CLAMP) / PROB_CLAMP).ln()
}

/// Negative log-likelihood of label `y` (0 or 1) under raw score `score`.
///
/// Written as `(1-y)*softplus(s) + y*softplus(-s)`, which equals
/// `-[y ln p + (1-y) ln(1-p)]` with `p = sigmoid(s)` clamped to the probability bounds.
pub fn logistic_loss(score: f64, y: f64) -> f64 {
    let c = score_clamp();
    let s = score.clamp(-c, c);
    (1.0 - y) * softplus(s) + y * softplus(-s)
}

/// Gradient and hessian of `logistic_loss` in the raw score.
#[inline]
pub fn grad_hess(score: f64, y: f64) -> (f64, f64) {
    let p = sigmoid(score);
    (p - y, p * (1.0 - p))
}

pub fn mean_logistic_loss(scores: &[f64], labels: &[u8]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| logistic_loss(s, f64::from(y)))
        .sum();
    total / scores.len().max(1) as f64
}
