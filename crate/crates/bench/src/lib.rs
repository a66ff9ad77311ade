//! Fixed benchmark inputs: a weight configuration, its factors and an input
//! tensor, all drawn from one seed.

use kcp_core::complexity::{UCF11_M, UCF11_N};
use kcp_core::sample::{random_tensor, random_weight};
use kcp_core::{DenseTensor, KcpConfig, KcpWeight};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub name: String,
    pub config: KcpConfig,
    pub weight: KcpWeight,
    pub input: DenseTensor,
}

impl Fixture {
    pub fn new(name: impl Into<String>, config: KcpConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weight = random_weight(&mut rng, &config);
        let input = random_tensor(&mut rng, config.m());
        Self {
            name: name.into(),
            config,
            weight,
            input,
        }
    }
}

/// Small enough for the naive path (its intermediates grow as `C^d`).
pub fn small() -> Fixture {
    Fixture::new(
        "small-d4",
        KcpConfig::uniform(vec![4; 4], vec![4; 4], 2, 2, 2).unwrap(),
        1,
    )
}

/// The UCF11 input layer at CP rank `c` on both sides.
pub fn ucf11(c: usize) -> Fixture {
    Fixture::new(
        format!("ucf11-c{c}"),
        KcpConfig::uniform(UCF11_M.to_vec(), UCF11_N.to_vec(), 4, c, c).unwrap(),
        2,
    )
}
