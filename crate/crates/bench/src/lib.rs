//! Shared fixtures for the solver benchmarks.

use nalgebra::DMatrix;

use interp_core::model::{SparseLinearInstance, TrainingSet};
use interp_core::rng::{sample_noise, SeededRng};

/// Gaussian sparse-instance training set at a given size.
pub fn gaussian_training_set(seed: u64, n: usize, d: usize, k: usize, sigma2: f64) -> TrainingSet {
    let mut rng = SeededRng::new(seed);
    let a = DMatrix::from_fn(n, d, |_, _| rng.standard_normal());
    let support: Vec<usize> = (0..k.min(d)).collect();
    let inst = SparseLinearInstance::unit_signal(d, &support, sigma2).expect("valid instance");
    let w = sample_noise(&mut rng, n, sigma2);
    TrainingSet::assemble(a, &inst, w)
}
