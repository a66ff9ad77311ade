use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{FactorSet, KcpConfig, KcpWeight};

/// Standard deviation of every factor entry.
///
/// A dense entry is a sum of `C` products of `2d` independent factor
/// entries, so its variance is `C·σ^(4d)`. Matching the Glorot target
/// `σ_t² = 2/(M+N)` gives `σ = (σ_t²/C)^(1/(4d))`.
pub fn init_std(config: &KcpConfig) -> f64 {
    let target = 2.0 / (config.input_size() + config.output_size()) as f64;
    let d = config.order() as f64;
    (target / config.total_rank() as f64).powf(1.0 / (4.0 * d))
}

/// Gaussian factors, deterministic in `seed`. Entries are drawn in
/// serialization order.
pub fn random_init(config: &KcpConfig, seed: u64) -> KcpWeight {
    let std = init_std(config);
    let normal = Normal::new(0.0, std).expect("finite positive std");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for k in 0..config.kt_rank() {
        let mut ak = Vec::new();
        let mut bk = Vec::new();
        for i in 0..config.order() {
            for (rows, cols, out) in [
                (config.m()[i], config.ca()[k], &mut ak),
                (config.n()[i], config.cb()[k], &mut bk),
            ] {
                let data = (0..rows * cols).map(|_| normal.sample(&mut rng)).collect();
                out.push(
                    crate::tensor::DenseTensor::from_vec([rows, cols], data)
                        .expect("shape from config"),
                );
            }
        }
        a.push(ak);
        b.push(bk);
    }
    KcpWeight::new(FactorSet::from_owned(config.clone(), a, b).expect("shapes from config"))
}
