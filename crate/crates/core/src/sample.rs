//! Seeded random configurations, weights and inputs for property suites.

use rand::Rng;

use crate::format::{FactorSet, KcpConfig, KcpWeight};
use crate::tensor::DenseTensor;

/// Bounds for [`random_config`]. Mode sizes, KT rank and CP ranks are drawn
/// uniformly from `1..=max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigSpace {
    pub orders: Vec<usize>,
    pub max_mode: usize,
    pub max_k: usize,
    pub max_rank: usize,
}

impl ConfigSpace {
    pub fn new(orders: &[usize], max_mode: usize, max_k: usize, max_rank: usize) -> Self {
        Self {
            orders: orders.to_vec(),
            max_mode,
            max_k,
            max_rank,
        }
    }
}

pub fn random_config<R: Rng + ?Sized>(rng: &mut R, space: &ConfigSpace) -> KcpConfig {
    let d = space.orders[rng.random_range(0..space.orders.len())];
    let k = rng.random_range(1..=space.max_k);
    let mut draw = |len: usize, max: usize| -> Vec<usize> {
        (0..len).map(|_| rng.random_range(1..=max)).collect()
    };
    let m = draw(d, space.max_mode);
    let n = draw(d, space.max_mode);
    let ca = draw(k, space.max_rank);
    let cb = draw(k, space.max_rank);
    KcpConfig::new(m, n, ca, cb).expect("sampled bounds are valid")
}

/// Entries uniform in `[-1, 1)`.
pub fn random_tensor<R: Rng + ?Sized>(rng: &mut R, dims: &[usize]) -> DenseTensor {
    DenseTensor::from_fn(dims.to_vec(), |_| rng.random_range(-1.0..1.0)).expect("positive dims")
}

/// Factor entries uniform in `[-1, 1)`.
pub fn random_weight<R: Rng + ?Sized>(rng: &mut R, config: &KcpConfig) -> KcpWeight {
    KcpWeight::new(
        FactorSet::from_fn(config.clone(), |_, _, _, _, _| rng.random_range(-1.0..1.0))
            .expect("valid config"),
    )
}
