//! Closed-form operation counts (one multiply = 1, one add = 1).
//!
//! A length-`L` dot product costs `2L − 1`; summing `L` values costs `L − 1`;
//! forming one Kronecker entry costs one multiply. Each function matches the
//! loops of the corresponding multiplication path exactly.

use crate::format::KcpConfig;

/// `(Π_{j>i} m_j, Π_{j<i} n_j)` for 0-based mode `i`.
fn around(cfg: &KcpConfig, i: usize) -> (u64, u64) {
    let rest: u64 = cfg.m()[i + 1..].iter().map(|&v| v as u64).product();
    let done: u64 = cfg.n()[..i].iter().map(|&v| v as u64).product();
    (rest, done)
}

fn assembly(cfg: &KcpConfig) -> u64 {
    let c = cfg.total_rank() as u64;
    (0..cfg.order())
        .map(|i| (cfg.m()[i] * cfg.n()[i]) as u64 * c)
        .sum()
}

/// Strict path: assemble every `W^(i)`, contract `m_i` keeping the rank
/// column, fuse the last contraction with the rank sum when `d` is even,
/// and sum the rank column at the end when `d` is odd.
pub fn count_flops_strict(cfg: &KcpConfig) -> u64 {
    let d = cfg.order();
    let c = cfg.total_rank() as u64;
    let big_n = cfg.output_size() as u64;
    let mut total = assembly(cfg);
    for i in 0..d {
        let m = cfg.m()[i] as u64;
        if i == d - 1 && d.is_multiple_of(2) {
            total += big_n * (2 * m * c - 1);
        } else {
            let (rest, done) = around(cfg, i);
            total += rest * done * cfg.n()[i] as u64 * c * (2 * m - 1);
        }
    }
    if d % 2 == 1 {
        total += big_n * (c - 1);
    }
    total
}

/// Parallel path: the strict count per branch plus the branch reduction,
/// which totals exactly the strict count.
pub fn count_flops_parallel(cfg: &KcpConfig) -> u64 {
    count_flops_strict(cfg)
}

/// Naive path: step `i` carries `C^i` rank entries; the superdiagonal kernel
/// then sums `C` entries per output. Saturates instead of overflowing.
pub fn count_flops_naive(cfg: &KcpConfig) -> u64 {
    let c = cfg.total_rank() as u128;
    let mut total = assembly(cfg) as u128;
    let mut ranks = 1u128;
    for i in 0..cfg.order() {
        ranks = ranks.saturating_mul(c);
        let (rest, done) = around(cfg, i);
        let m = cfg.m()[i] as u128;
        let step = (rest as u128 * done as u128 * cfg.n()[i] as u128)
            .saturating_mul(ranks)
            .saturating_mul(2 * m - 1);
        total = total.saturating_add(step);
    }
    total = total.saturating_add(cfg.output_size() as u128 * (c - 1));
    total.min(u64::MAX as u128) as u64
}

/// Relaxed path (even `d`): per branch, contract with `A` and expand with
/// `B` on every mode but the last, contract `(m_d, γ)` then `τ` on the last,
/// then add the K branch outputs.
pub fn count_flops_relaxed(cfg: &KcpConfig) -> u64 {
    let d = cfg.order();
    let big_n = cfg.output_size() as u64;
    let mut total = 0u64;
    for k in 0..cfg.kt_rank() {
        let (a, b) = (cfg.ca()[k] as u64, cfg.cb()[k] as u64);
        for i in 0..d {
            let (m, n) = (cfg.m()[i] as u64, cfg.n()[i] as u64);
            let (rest, done) = around(cfg, i);
            if i == 0 {
                total += rest * a * (2 * m - 1) + rest * a * n * b;
            } else if i < d - 1 {
                total += rest * done * a * b * (2 * m - 1) + rest * done * n * a * b;
            } else {
                total += done * b * (2 * m * a - 1) + big_n * (2 * b - 1);
            }
        }
    }
    total + (cfg.kt_rank() as u64 - 1) * big_n
}

/// Literal paired strict choreography: odd modes keep the rank column, even
/// modes contract `m_i` and the rank column together, odd `d` sums the last
/// rank column.
pub fn count_flops_strict_paired(cfg: &KcpConfig) -> u64 {
    let d = cfg.order();
    let c = cfg.total_rank() as u64;
    let mut total = assembly(cfg);
    for i in 0..d {
        let (rest, done) = around(cfg, i);
        let (m, n) = (cfg.m()[i] as u64, cfg.n()[i] as u64);
        if i % 2 == 0 {
            total += rest * done * n * c * (2 * m - 1);
        } else {
            total += rest * done * n * (2 * m * c - 1);
        }
    }
    if d % 2 == 1 {
        total += cfg.output_size() as u64 * (c - 1);
    }
    total
}

/// Literal paired relaxed choreography (even `d`): every mode pair is
/// processed per branch and the branches are summed after each pair.
pub fn count_flops_relaxed_paired(cfg: &KcpConfig) -> u64 {
    let d = cfg.order();
    let kk = cfg.kt_rank() as u64;
    let mut total = 0u64;
    for i in (0..d).step_by(2) {
        let (rest1, done1) = around(cfg, i);
        let (rest2, done2) = around(cfg, i + 1);
        let (m1, n1) = (cfg.m()[i] as u64, cfg.n()[i] as u64);
        let (m2, n2) = (cfg.m()[i + 1] as u64, cfg.n()[i + 1] as u64);
        for k in 0..cfg.kt_rank() {
            let (a, b) = (cfg.ca()[k] as u64, cfg.cb()[k] as u64);
            total += rest1 * done1 * a * (2 * m1 - 1) + rest1 * done1 * n1 * a * b;
            total += rest2 * done2 * b * (2 * m2 * a - 1) + rest2 * done2 * n2 * (2 * b - 1);
        }
        total += (kk - 1) * rest2 * done2 * n2;
    }
    total
}

/// Evaluates `d · s^(d+1) · CA · CB · K` with `s` the largest mode size and
/// `CA`, `CB` the largest branch ranks; the usual bound quoted for the
/// strict algorithm.
pub fn strict_cost_bound(cfg: &KcpConfig) -> u64 {
    let s = cfg.max_mode() as u64;
    let d = cfg.order() as u64;
    let ca = *cfg.ca().iter().max().expect("K ≥ 1") as u64;
    let cb = *cfg.cb().iter().max().expect("K ≥ 1") as u64;
    d * s.pow(d as u32 + 1) * ca * cb * cfg.kt_rank() as u64
}
