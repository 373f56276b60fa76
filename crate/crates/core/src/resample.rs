//! Particle weight bookkeeping: normalization, effective sample size and
//! systematic resampling.

use crate::scalar::{log_sum_exp, Scalar};

/// Linear-domain weights summing to one.
pub fn normalized_weights<T: Scalar>(log_weights: &[T]) -> Vec<T> {
    let norm = log_sum_exp(log_weights);
    log_weights.iter().map(|&w| (w - norm).exp()).collect()
}

/// `1 / Σ w²` over normalized weights.
pub fn effective_sample_size<T: Scalar>(log_weights: &[T]) -> T {
    let w = normalized_weights(log_weights);
    T::one() / w.iter().map(|&x| x * x).sum::<T>()
}

/// Systematic resampling: one uniform offset `u0 ∈ [0, 1)`, `N` evenly spaced
/// pointers. Returns the selected parent index for each output slot.
pub fn systematic_resample<T: Scalar>(weights: &[T], u0: T) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let nf = T::from_usize(n).expect("particle count representable");
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut j = 0;
    for i in 0..n {
        let pointer = (T::from_usize(i).expect("index representable") + u0) / nf;
        while pointer >= cumulative && j + 1 < n {
            j += 1;
            cumulative += weights[j];
        }
        out.push(j);
    }
    out
}
