use kcp_core::complexity::{UCF11_M, UCF11_N};
use kcp_core::format::init_std;
use kcp_core::multiply::count::{count_flops_relaxed, strict_cost_bound};
use kcp_core::multiply::relative_error;
use kcp_core::sample::{random_config, random_tensor, random_weight, ConfigSpace};
use kcp_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn init_variance_tracks_glorot_target() {
    let cfg = KcpConfig::uniform(vec![4, 4], vec![4, 4], 2, 2, 2).unwrap();
    let target = 2.0 / (cfg.input_size() + cfg.output_size()) as f64;
    let mut sum = 0.0;
    let mut sq = 0.0;
    let mut count = 0.0;
    for seed in 0..1000 {
        let dense = reconstruct_dense(&random_init(&cfg, seed)).unwrap();
        for &v in dense.data() {
            sum += v;
            sq += v * v;
            count += 1.0;
        }
    }
    let mean = sum / count;
    let var = sq / count - mean * mean;
    assert!(
        var > target / 3.0 && var < target * 3.0,
        "variance {var} vs target {target}"
    );
    // Entry variance is C·σ^(4d) exactly in expectation.
    let sigma = init_std(&cfg);
    let predicted = cfg.total_rank() as f64 * sigma.powi(4 * cfg.order() as i32);
    assert!((predicted - target).abs() < 1e-15);
}

#[test]
fn ucf11_shape_runs_through_strict() {
    let cfg = KcpConfig::uniform(UCF11_M.to_vec(), UCF11_N.to_vec(), 4, 4, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let w = random_weight(&mut rng, &cfg);
    let x = random_tensor(&mut rng, cfg.m());
    let strict = multiply_strict(&x, &w).unwrap();
    assert_eq!(strict.y.dims(), UCF11_N);
    assert_eq!(strict.flops, count_flops_strict(&cfg));
    let oracle = multiply_dense_oracle(&x, &w).unwrap();
    assert!(relative_error(&strict.y, &oracle).unwrap() <= 1e-10);
    let par = multiply_parallel(&x, &w, 4).unwrap();
    assert!(relative_error(&par.y, &oracle).unwrap() <= 1e-10);
}

#[test]
fn relaxed_count_against_strict_bound_for_larger_modes() {
    // Outside m = n = 2 the relaxed count stays below d·s^(d+1)·CA·CB·K.
    for d in [2usize, 4] {
        for s in 3..=6 {
            for c in 1..=4 {
                for k in 1..=3 {
                    let cfg = KcpConfig::uniform(vec![s; d], vec![s; d], k, c, c).unwrap();
                    assert!(
                        count_flops_relaxed(&cfg) <= strict_cost_bound(&cfg),
                        "{cfg:?}"
                    );
                }
            }
        }
    }
}

#[test]
fn seeded_suite_is_reproducible() {
    let space = ConfigSpace::new(&[2, 3, 4], 5, 3, 3);
    let draw = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = random_config(&mut rng, &space);
        let w = random_weight(&mut rng, &cfg);
        let x = random_tensor(&mut rng, cfg.m());
        multiply_strict(&x, &w).unwrap()
    };
    assert_eq!(draw(5), draw(5));
}
