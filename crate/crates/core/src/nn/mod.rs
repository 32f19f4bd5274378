//! Minimal feed-forward network engine: dense layers with ReLU hidden
//! activations, manual backpropagation, Adam updates, and a dueling
//! value/advantage head for the bandit agent.
//!
//! Everything is plain `f64` on the CPU. Forward passes on a frozen model
//! are pure; training mutates the model through explicit calls only.

mod adam;
mod dueling;
mod mlp;

pub use adam::{adam_step, AdamState};
pub use dueling::{DuelingGrads, DuelingHead, DuelingOptimizer, DuelingTrace};
pub use mlp::{Activation, ForwardTrace, Mlp, MlpGrads};

/// Dot product with independent accumulators so the reduction vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] += xa[k] * xb[k];
        }
    }
    let mut tail = 0.0;
    for (xa, xb) in ca.remainder().iter().zip(cb.remainder()) {
        tail += xa * xb;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// `y += alpha * x`, elementwise.
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
