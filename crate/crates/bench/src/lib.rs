//! Shared fixtures for the criterion benches.

use discriminer_core::benchgen::{generate, BenchSpec, Family};
use discriminer_core::labeling::label_corpus;
use discriminer_core::{Dataset, KChoice, PredicateMode};

/// A labeled `Pat(pattern)` corpus with `bits`-bit inputs.
pub fn pattern_dataset(pattern: &str, bits: usize, inputs: usize, k: KChoice) -> Dataset {
    let spec = BenchSpec::new(Family::pattern(pattern).unwrap(), bits, inputs, 17);
    let corpus = generate(&spec).unwrap();
    let labels = label_corpus(&corpus, k, 17).unwrap();
    Dataset::new(&corpus, &labels, &PredicateMode::CalledOnce).unwrap()
}

/// Mean times of an LSB0 corpus, for the clustering benches.
pub fn lsb0_means(inputs: usize) -> Vec<f64> {
    let spec = BenchSpec::new(Family::Lsb0, 10, inputs, 17);
    generate(&spec).unwrap().mean_times()
}
