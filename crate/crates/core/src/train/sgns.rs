//! Negative-sampling objective and its exact gradient step.
//!
//! For an input vector `u`, positive output vector `p` and negative output
//! vectors `n_k` the per-example log-likelihood is
//! `log σ(u·p) + Σ_k log σ(−u·n_k)`. The step ascends it with learning rate
//! `lr`. Every gradient is taken at the pre-update point.

use num_traits::Float;

#[inline]
pub fn sigmoid<T: Float>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus<T: Float>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub(crate) fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Scores one logistic target against `input`: updates `output` in place,
/// adds the input-side step into `input_step` and returns the loss
/// `−log σ(±u·v)`.
#[inline]
pub fn sgns_target<T: Float>(input: &[T], output: &mut [T], positive: bool, lr: T, input_step: &mut [T]) -> T {
    let score = dot(input, output);
    let label = if positive { T::one() } else { T::zero() };
    let g = (label - sigmoid(score)) * lr;
    for ((acc, out), &inp) in input_step.iter_mut().zip(output.iter_mut()).zip(input) {
        *acc = *acc + g * *out;
        *out = *out + g * inp;
    }
    if positive {
        softplus(-score)
    } else {
        softplus(score)
    }
}

/// One negative-sampling step on an explicit set of vectors. Returns the
/// loss `−log σ(u·p) − Σ log σ(−u·n_k)` evaluated before the update.
///
/// Panics if the vectors differ in length.
pub fn sgns_step<T: Float>(center: &mut [T], positive: &mut [T], negatives: &mut [&mut [T]], lr: T) -> T {
    let dim = center.len();
    assert_eq!(positive.len(), dim, "positive vector dimension");
    assert!(negatives.iter().all(|n| n.len() == dim), "negative vector dimension");
    let mut step = vec![T::zero(); dim];
    let mut loss = sgns_target(center, positive, true, lr, &mut step);
    for neg in negatives.iter_mut() {
        loss = loss + sgns_target(center, neg, false, lr, &mut step);
    }
    for (c, s) in center.iter_mut().zip(&step) {
        *c = *c + *s;
    }
    loss
}
