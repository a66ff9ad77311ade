//! Pairwise choreographies that remove the rank mode after every second mode.
//!
//! The strict variant keeps the shared rank column through an odd mode and
//! contracts it together with the following even mode; the relaxed variant
//! does the same per KT branch with separate `A`/`B` factors and sums the
//! branches after every pair. Both evaluate exactly the same expression,
//! which equals `Wᵀ·vec(x)` for `d ≤ 2`. For `d ≥ 3` with more than one rank
//! column the pairs decouple (each pair gets its own rank sum), so the
//! result is a different linear map; these functions are kept to exhibit
//! that and are not used by the rest of the crate.

use crate::error::{KcpError, Result};
use crate::format::{assemble_factor, KcpWeight};
use crate::tensor::DenseTensor;

use super::{check_input, fused_step, rank_step, sum_rank, MultiplyResult};

/// Strict product with the rank column summed at every even mode.
pub fn multiply_strict_paired(x: &DenseTensor, w: &KcpWeight) -> Result<MultiplyResult> {
    check_input(x, w)?;
    let cfg = w.config();
    let (m, n, c) = (cfg.m(), cfg.n(), cfg.total_rank());
    let d = cfg.order();
    let factors = (0..d)
        .map(|i| assemble_factor(w, i))
        .collect::<Result<Vec<_>>>()?;
    let mut flops: u64 = (0..d).map(|i| (m[i] * n[i] * c) as u64).sum();
    let mut t = x.data().to_vec();
    let mut p = 1usize;
    let mut r: usize = m.iter().product();
    for i in 0..d {
        let r_rest = r / m[i];
        let wf = factors[i].data();
        t = if i % 2 == 0 {
            rank_step(&t, false, p, m[i], n[i], r_rest, wf, c, 0, c, &mut flops)
        } else {
            fused_step(&t, p, m[i], n[i], r_rest, wf, c, 0, c, &mut flops)
        };
        p *= n[i];
        r = r_rest;
    }
    if d % 2 == 1 {
        t = sum_rank(&t, p, c, &mut flops);
    }
    Ok(MultiplyResult {
        y: DenseTensor::from_vec(n.to_vec(), t)?,
        flops,
    })
}

/// Relaxed product with the branch sum after every even mode. Needs an even order.
pub fn multiply_relaxed_paired(x: &DenseTensor, w: &KcpWeight) -> Result<MultiplyResult> {
    check_input(x, w)?;
    let cfg = w.config();
    let d = cfg.order();
    if !d.is_multiple_of(2) {
        return Err(KcpError::OddOrder(d));
    }
    let (m, n) = (cfg.m(), cfg.n());
    let mut flops = 0u64;
    let mut t = x.data().to_vec();
    let mut p = 1usize;
    let mut r: usize = m.iter().product();
    for i in (0..d).step_by(2) {
        let (m1, n1, m2, n2) = (m[i], n[i], m[i + 1], n[i + 1]);
        let r1 = r / m1;
        let r2 = r1 / m2;
        let mut sum: Option<Vec<f64>> = None;
        for k in 0..cfg.kt_rank() {
            let (ca, cb) = (cfg.ca()[k], cfg.cb()[k]);
            let (a1, b1) = (w.a(k, i).data(), w.b(k, i).data());
            let (a2, b2) = (w.a(k, i + 1).data(), w.b(k, i + 1).data());

            // Odd mode: u[p][r1][γ] = Σ_α t[p][(α,r1)] A1[α][γ].
            let mut u = vec![0.0; p * r1 * ca];
            for pi in 0..p {
                for rr in 0..r1 {
                    let dst = &mut u[(pi * r1 + rr) * ca..][..ca];
                    for alpha in 0..m1 {
                        let xv = t[pi * r + alpha * r1 + rr];
                        for (g, o) in dst.iter_mut().enumerate() {
                            if alpha == 0 {
                                *o = xv * a1[alpha * ca + g];
                            } else {
                                *o += xv * a1[alpha * ca + g];
                            }
                        }
                    }
                }
            }
            flops += (p * r1 * ca * (2 * m1 - 1)) as u64;
            // s[(p,β1)][r1][γ][τ] = u[p][r1][γ] B1[β1][τ].
            let ab = ca * cb;
            let mut s = vec![0.0; p * n1 * r1 * ab];
            for pi in 0..p {
                for beta in 0..n1 {
                    for rr in 0..r1 {
                        let dst = &mut s[((pi * n1 + beta) * r1 + rr) * ab..][..ab];
                        for g in 0..ca {
                            let uv = u[(pi * r1 + rr) * ca + g];
                            for tt in 0..cb {
                                dst[g * cb + tt] = uv * b1[beta * cb + tt];
                            }
                        }
                    }
                }
            }
            flops += (p * n1 * r1 * ab) as u64;

            // Even mode: v[q][r2][τ] = Σ_{α,γ} s[q][(α,r2)][γ][τ] A2[α][γ].
            let q = p * n1;
            let mut v = vec![0.0; q * r2 * cb];
            for qi in 0..q {
                for rr in 0..r2 {
                    let dst = &mut v[(qi * r2 + rr) * cb..][..cb];
                    for alpha in 0..m2 {
                        let src = &s[(qi * r1 + alpha * r2 + rr) * ab..][..ab];
                        for g in 0..ca {
                            let av = a2[alpha * ca + g];
                            for tt in 0..cb {
                                if alpha == 0 && g == 0 {
                                    dst[tt] = src[g * cb + tt] * av;
                                } else {
                                    dst[tt] += src[g * cb + tt] * av;
                                }
                            }
                        }
                    }
                }
            }
            flops += (q * r2 * cb * (2 * m2 * ca - 1)) as u64;
            // out[(q,β2)][r2] = Σ_τ v[q][r2][τ] B2[β2][τ].
            let mut out = vec![0.0; q * n2 * r2];
            for qi in 0..q {
                for beta in 0..n2 {
                    for rr in 0..r2 {
                        let vr = &v[(qi * r2 + rr) * cb..][..cb];
                        let mut acc = vr[0] * b2[beta * cb];
                        for tt in 1..cb {
                            acc += vr[tt] * b2[beta * cb + tt];
                        }
                        out[(qi * n2 + beta) * r2 + rr] = acc;
                    }
                }
            }
            flops += (q * n2 * r2 * (2 * cb - 1)) as u64;

            sum = Some(match sum {
                None => out,
                Some(mut acc) => {
                    for (a, b) in acc.iter_mut().zip(&out) {
                        *a += b;
                    }
                    flops += out.len() as u64;
                    acc
                }
            });
        }
        t = sum.expect("K ≥ 1");
        p *= n1 * n2;
        r = r2;
    }
    Ok(MultiplyResult {
        y: DenseTensor::from_vec(n.to_vec(), t)?,
        flops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{random_init, KcpConfig};
    use crate::multiply::count::{count_flops_relaxed_paired, count_flops_strict_paired};
    use crate::multiply::{multiply_dense_oracle, relative_error};

    fn input(dims: &[usize]) -> DenseTensor {
        DenseTensor::from_fn(dims.to_vec(), |ix| {
            ix.iter()
                .enumerate()
                .map(|(j, &v)| ((j + 1) * (v + 1)) as f64)
                .sum::<f64>()
                .sin()
        })
        .unwrap()
    }

    #[test]
    fn paired_variants_agree_with_each_other() {
        for (cfg, seed) in [
            (
                KcpConfig::new(vec![2, 3], vec![3, 2], vec![2, 1], vec![1, 2]).unwrap(),
                1,
            ),
            (
                KcpConfig::new(vec![2, 3, 2, 2], vec![3, 2, 2, 2], vec![2, 1], vec![1, 2]).unwrap(),
                2,
            ),
            (
                KcpConfig::uniform(vec![2, 2, 3, 2, 2, 2], vec![2, 2, 2, 2, 3, 2], 3, 2, 2)
                    .unwrap(),
                3,
            ),
        ] {
            let w = random_init(&cfg, seed);
            let x = input(cfg.m());
            let s = multiply_strict_paired(&x, &w).unwrap();
            let r = multiply_relaxed_paired(&x, &w).unwrap();
            assert!(relative_error(&r.y, &s.y).unwrap() < 1e-12);
            assert_eq!(s.flops, count_flops_strict_paired(&cfg));
            assert_eq!(r.flops, count_flops_relaxed_paired(&cfg));
        }
    }

    #[test]
    fn paired_equals_oracle_at_order_two() {
        let cfg = KcpConfig::new(vec![3, 2], vec![2, 4], vec![2, 3], vec![3, 1]).unwrap();
        let w = random_init(&cfg, 4);
        let x = input(cfg.m());
        let oracle = multiply_dense_oracle(&x, &w).unwrap();
        assert!(
            relative_error(&multiply_strict_paired(&x, &w).unwrap().y, &oracle).unwrap() < 1e-12
        );
    }

    #[test]
    fn paired_departs_from_oracle_at_order_four() {
        let cfg =
            KcpConfig::new(vec![2, 3, 2, 3], vec![3, 2, 2, 2], vec![2, 1], vec![1, 2]).unwrap();
        let w = random_init(&cfg, 5);
        let x = input(cfg.m());
        let oracle = multiply_dense_oracle(&x, &w).unwrap();
        let paired = multiply_strict_paired(&x, &w).unwrap();
        assert!(relative_error(&paired.y, &oracle).unwrap() > 1e-3);
    }

    #[test]
    fn paired_equals_oracle_with_single_rank_column() {
        let cfg = KcpConfig::uniform(vec![2, 3, 2, 2, 3], vec![2, 2, 3, 2, 2], 1, 1, 1).unwrap();
        let w = random_init(&cfg, 6);
        let x = input(cfg.m());
        let oracle = multiply_dense_oracle(&x, &w).unwrap();
        assert!(
            relative_error(&multiply_strict_paired(&x, &w).unwrap().y, &oracle).unwrap() < 1e-12
        );
    }
}
