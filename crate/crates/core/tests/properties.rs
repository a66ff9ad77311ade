use kcp_core::format::{split_weight_modes, weight_unfolding_modes, DEFAULT_RANK_TOL};
use kcp_core::multiply::count::count_flops_relaxed;
use kcp_core::multiply::relative_error;
use kcp_core::sample::{random_config, random_tensor, random_weight, ConfigSpace};
use kcp_core::tensor::{matricize, unmatricize};
use kcp_core::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 1..5)
}

/// Central difference of `f` along every entry of `x`.
fn central_diff(x: &mut [f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let keep = x[j];
            x[j] = keep + h;
            let up = f(x);
            x[j] = keep - h;
            let down = f(x);
            x[j] = keep;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    diff / scale.max(1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_bijection(dims in dims_strategy(), pick in any::<u64>()) {
        let count: usize = dims.iter().product();
        let flat = (pick % count as u64) as usize;
        let idx = split_index(flat, &dims).unwrap();
        prop_assert_eq!(multi_index(&idx, &dims).unwrap(), flat);
        prop_assert_eq!(idx[0], flat % dims[0]);
    }

    #[test]
    fn matricize_round_trip(dims in dims_strategy(), seed in any::<u64>(), split in any::<u64>()) {
        let t = random_tensor(&mut rng(seed), &dims);
        let mut order: Vec<usize> = (0..dims.len()).collect();
        order.rotate_left((split % dims.len() as u64) as usize);
        let cut = (split as usize / 7) % (dims.len() + 1);
        let (rows, cols) = order.split_at(cut);
        let m = matricize(&t, rows, cols).unwrap();
        prop_assert_eq!(unmatricize(&m, &dims, rows, cols).unwrap(), t);
    }

    #[test]
    fn kronecker_is_bilinear(seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let mut r = rng(seed);
        let a1 = random_tensor(&mut r, &[2, 3]);
        let a2 = random_tensor(&mut r, &[2, 3]);
        let b = random_tensor(&mut r, &[3, 2]);
        let mix = DenseTensor::from_vec(
            [2, 3],
            a1.data().iter().zip(a2.data()).map(|(x, y)| alpha * x + y).collect(),
        ).unwrap();
        let lhs = kronecker(&mix, &b).unwrap();
        let k1 = kronecker(&a1, &b).unwrap();
        let k2 = kronecker(&a2, &b).unwrap();
        let rhs: Vec<f64> = k1.data().iter().zip(k2.data()).map(|(x, y)| alpha * x + y).collect();
        prop_assert!(rel(lhs.data(), &rhs) < 1e-12);
    }

    #[test]
    fn kt_and_kcp_reconstructions_agree(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = random_config(&mut r, &ConfigSpace::new(&[1, 2, 3, 4], 4, 3, 3));
        let w = random_weight(&mut r, &cfg);
        let kt = reconstruct_kt_dense(&w.as_kt()).unwrap();
        let kcp = reconstruct_dense(&w).unwrap();
        prop_assert!(relative_error(&kcp, &kt).unwrap() <= 1e-12);
    }

    #[test]
    fn rank_k_matricization_matches_dense(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = random_config(&mut r, &ConfigSpace::new(&[2, 3, 4], 4, 3, 3));
        let w = random_weight(&mut r, &cfg);
        let split = split_weight_modes(&reconstruct_dense(&w).unwrap(), &cfg).unwrap();
        let (rows, cols) = weight_unfolding_modes(cfg.order());
        let dense = matricize(&split, &rows, &cols).unwrap();
        let direct = matricize_rank_k(&w.as_kt()).unwrap();
        prop_assert!(relative_error(&direct, &dense).unwrap() <= 1e-12);
    }

    #[test]
    fn matricized_rank_at_most_k(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = random_config(&mut r, &ConfigSpace::new(&[2, 4], 4, 4, 3));
        let w = random_weight(&mut r, &cfg);
        let rank = kt_rank_lower_bound(&matricize_rank_k(&w.as_kt()).unwrap(), DEFAULT_RANK_TOL).unwrap();
        prop_assert!(rank <= cfg.kt_rank(), "rank {} > K {}", rank, cfg.kt_rank());
    }

    #[test]
    fn serialization_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = random_config(&mut r, &ConfigSpace::new(&[1, 2, 3, 5], 6, 4, 4));
        let w = random_weight(&mut r, &cfg);
        let bytes = serialize(&w);
        prop_assert_eq!(deserialize(&bytes).unwrap(), w);
    }

    #[test]
    fn strict_product_is_linear(seed in any::<u64>(), alpha in -4.0f64..4.0) {
        let mut r = rng(seed);
        let cfg = random_config(&mut r, &ConfigSpace::new(&[1, 2, 3, 4], 5, 3, 3));
        let w = random_weight(&mut r, &cfg);
        let x1 = random_tensor(&mut r, cfg.m());
        let x2 = random_tensor(&mut r, cfg.m());
        let mix = DenseTensor::from_vec(
            cfg.m().to_vec(),
            x1.data().iter().zip(x2.data()).map(|(a, b)| alpha * a + b).collect(),
        ).unwrap();
        let y1 = multiply_strict(&x1, &w).unwrap().y;
        let y2 = multiply_strict(&x2, &w).unwrap().y;
        let expect = DenseTensor::from_vec(
            cfg.n().to_vec(),
            y1.data().iter().zip(y2.data()).map(|(a, b)| alpha * a + b).collect(),
        ).unwrap();
        let got = multiply_strict(&mix, &w).unwrap().y;
        prop_assert!(relative_error(&got, &expect).unwrap() <= 1e-12);
    }

    #[test]
    fn parallel_is_bitwise_deterministic(seed in any::<u64>(), workers in 1usize..9) {
        let mut r = rng(seed);
        let cfg = random_config(&mut r, &ConfigSpace::new(&[2, 3, 4], 5, 4, 3));
        let w = random_weight(&mut r, &cfg);
        let x = random_tensor(&mut r, cfg.m());
        let one = multiply_parallel(&x, &w, 1).unwrap();
        let many = multiply_parallel(&x, &w, workers).unwrap();
        prop_assert_eq!(one, many);
    }

    #[test]
    fn all_paths_agree(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = random_config(&mut r, &ConfigSpace::new(&[2, 4], 4, 3, 2));
        prop_assume!(multiply::naive_peak_scalars(&cfg) <= 1 << 20);
        let w = random_weight(&mut r, &cfg);
        let x = random_tensor(&mut r, cfg.m());
        let oracle = multiply_dense_oracle(&x, &w).unwrap();
        for y in [
            multiply_naive(&x, &w).unwrap().y,
            multiply_strict(&x, &w).unwrap().y,
            multiply_relaxed(&x, &w).unwrap().y,
            multiply_parallel(&x, &w, 2).unwrap().y,
        ] {
            prop_assert!(relative_error(&y, &oracle).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn measured_flops_match_counts(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = random_config(&mut r, &ConfigSpace::new(&[2, 4], 5, 3, 3));
        let w = random_weight(&mut r, &cfg);
        let x = random_tensor(&mut r, cfg.m());
        prop_assert_eq!(multiply_strict(&x, &w).unwrap().flops, count_flops_strict(&cfg));
        prop_assert_eq!(multiply_relaxed(&x, &w).unwrap().flops, count_flops_relaxed(&cfg));
    }

    #[test]
    fn naive_costs_more_than_strict(seed in any::<u64>()) {
        let cfg = random_config(&mut rng(seed), &ConfigSpace::new(&[2, 3, 4, 5], 6, 4, 3));
        prop_assume!(cfg.total_rank() >= 2);
        prop_assert!(count_flops_naive(&cfg) > count_flops_strict(&cfg));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn backward_matches_finite_differences(seed in any::<u64>(), d in prop::sample::select(vec![2usize, 4])) {
        let mut r = rng(seed);
        let cfg = random_config(&mut r, &ConfigSpace::new(&[d], 3, 2, 2));
        let w = random_weight(&mut r, &cfg);
        let x = random_tensor(&mut r, cfg.m());
        let dy = random_tensor(&mut r, cfg.n());
        let loss = |x: &DenseTensor, w: &KcpWeight| -> f64 {
            let y = multiply_dense_oracle(x, w).unwrap();
            y.data().iter().zip(dy.data()).map(|(a, b)| a * b).sum()
        };
        let g = multiply_backward(&x, &w, &dy).unwrap();
        let h = 1e-5;

        let mut xv = x.data().to_vec();
        let fd = central_diff(&mut xv, h, |v| loss(&DenseTensor::from_vec(cfg.m().to_vec(), v.to_vec()).unwrap(), &w));
        prop_assert!(rel(g.dx.data(), &fd) < 1e-5, "dx");

        for k in 0..cfg.kt_rank() {
            for i in 0..cfg.order() {
                for is_b in [false, true] {
                    let base = if is_b { w.b(k, i) } else { w.a(k, i) }.clone();
                    let mut v = base.data().to_vec();
                    let fd = central_diff(&mut v, h, |v| {
                        let mut p = w.clone();
                        *p.factors_mut().factor_mut(k, i, is_b) =
                            DenseTensor::from_vec(base.dims().to_vec(), v.to_vec()).unwrap();
                        loss(&x, &p)
                    });
                    let got = if is_b { &g.db[k][i] } else { &g.da[k][i] };
                    prop_assert!(rel(got.data(), &fd) < 1e-5, "k={} i={} b={}", k, i, is_b);
                }
            }
        }
    }
}
