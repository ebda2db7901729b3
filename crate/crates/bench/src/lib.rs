//! Deterministic inputs shared by the benchmarks.

use weanpred_core::pipeline::jittered_test_signal;
use weanpred_core::{Label, NonUniformSeries};

/// Jittered series of `n` samples at roughly 1 Hz.
pub fn jittered_series(n: usize) -> NonUniformSeries {
    jittered_test_signal(1, n, 1.0, 0.3, 0.08, 0.5, 0.3).expect("valid test signal")
}

/// Two Gaussian-ish clouds from a fixed linear congruential stream.
pub fn two_class_rows(n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut state: u64 = 0x2545_F491_4F6C_DD1D;
    let mut next = move || {
        state = state
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let labels: Vec<Label> = (0..n)
        .map(|i| if i % 5 < 2 { Label::Failure } else { Label::Success })
        .collect();
    let rows = labels
        .iter()
        .map(|l| {
            (0..dim)
                .map(|_| next() + next() + if l.is_positive() { 0.4 } else { 0.0 })
                .collect()
        })
        .collect();
    (rows, labels)
}
