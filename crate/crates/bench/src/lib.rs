//! Fixture instances shared by the criterion benches.

use bernsched::instance::{Instance, JobType};
use bernsched::Rational;

/// `n` equal jobs of size `size` with long-probability `q`.
pub fn uniform(machines: usize, eps_den: u64, size: u64, q: f64, n: usize) -> Instance {
    Instance::new(
        machines,
        eps_den,
        vec![JobType {
            size: Rational::from_int(size),
            probs: vec![q; n],
        }],
    )
    .expect("valid fixture")
}

/// Two ε²-separated types with mixed probabilities.
pub fn two_types(machines: usize, per_type: usize) -> Instance {
    let probs = |k: usize| (0..k).map(|i| 0.3 + 0.6 * i as f64 / k.max(1) as f64).collect();
    Instance::new(
        machines,
        13,
        vec![
            JobType {
                size: Rational::from_int(169 * 13),
                probs: probs(per_type),
            },
            JobType {
                size: Rational::from_int(13),
                probs: probs(per_type),
            },
        ],
    )
    .expect("valid fixture")
}
