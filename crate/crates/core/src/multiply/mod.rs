//! Input × weight multiplication `y = Wᵀ·vec(x)` for a weight in KCP form.
//!
//! Every path returns the output tensor of shape `(n_1, …, n_d)` and the
//! number of scalar multiplies and adds it executed (one each). The counts
//! are tallied by the loops themselves and must agree with the closed forms
//! in [`count`].
//!
//! Working buffers are row-major with layout `[p][r][c]`: `p` runs over the
//! output modes already produced (`n_1 … n_i`, first one slowest), `r` over
//! the input modes still to contract (`m_{i+1} … m_d`), and `c` over rank
//! columns carried along.

mod backward;
pub mod count;
mod paired;

pub use backward::{multiply_backward, Gradients};
pub use paired::{multiply_relaxed_paired, multiply_strict_paired};

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::{KcpError, Result};
use crate::format::{assemble_factor, matricize_rank_k, KcpConfig, KcpWeight};
use crate::tensor::{kronecker, tensorize, vectorize, DenseTensor};

/// Default cap on the intermediate size of [`multiply_naive`], in scalars.
pub const NAIVE_CAP: u128 = 100_000_000;

/// Scalars a strict-path intermediate may hold before columns are split into blocks.
const STRICT_BLOCK_BUDGET: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplyResult {
    pub y: DenseTensor,
    pub flops: u64,
}

pub(crate) fn check_input(x: &DenseTensor, w: &KcpWeight) -> Result<()> {
    if x.dims() != w.config().m() {
        return Err(KcpError::SizeMismatch(format!(
            "input shape {:?} does not match weight input modes {:?}",
            x.dims(),
            w.config().m()
        )));
    }
    Ok(())
}

/// Reference product through the `M × N` matricization of the weight.
pub fn multiply_dense_oracle(x: &DenseTensor, w: &KcpWeight) -> Result<DenseTensor> {
    check_input(x, w)?;
    let mat = matricize_rank_k(&w.as_kt())?;
    let xv = vectorize(x);
    let cols = mat.cols();
    let mut yv = vec![0.0; cols];
    for (r, &xr) in xv.iter().enumerate() {
        for (dst, &wv) in yv.iter_mut().zip(&mat.data()[r * cols..(r + 1) * cols]) {
            *dst += xr * wv;
        }
    }
    tensorize(&yv, w.config().n())
}

fn assembly_flops(w: &KcpWeight) -> u64 {
    let cfg = w.config();
    (0..cfg.order())
        .map(|i| (cfg.m()[i] * cfg.n()[i] * cfg.total_rank()) as u64)
        .sum()
}

/// One mode step that contracts `α` and keeps the rank column:
/// `out[(p,β)][r'][b] = Σ_α t[p][(α,r')][b] · w[(α + β·m)·stride + col0 + b]`.
/// With `t_has_rank == false` the input has no rank mode and is broadcast.
#[allow(clippy::too_many_arguments)]
fn rank_step(
    t: &[f64],
    t_has_rank: bool,
    p: usize,
    m: usize,
    n: usize,
    r_rest: usize,
    w: &[f64],
    stride: usize,
    col0: usize,
    width: usize,
    flops: &mut u64,
) -> Vec<f64> {
    let mut out = vec![0.0; p * n * r_rest * width];
    for pi in 0..p {
        for beta in 0..n {
            for r in 0..r_rest {
                let dst_at = ((pi * n + beta) * r_rest + r) * width;
                let dst = &mut out[dst_at..dst_at + width];
                for alpha in 0..m {
                    let wrow = &w[(alpha + beta * m) * stride + col0..][..width];
                    let src = pi * m * r_rest + alpha * r_rest + r;
                    if t_has_rank {
                        let trow = &t[src * width..(src + 1) * width];
                        if alpha == 0 {
                            for ((o, &a), &b) in dst.iter_mut().zip(trow).zip(wrow) {
                                *o = a * b;
                            }
                        } else {
                            for ((o, &a), &b) in dst.iter_mut().zip(trow).zip(wrow) {
                                *o += a * b;
                            }
                        }
                    } else {
                        let a = t[src];
                        if alpha == 0 {
                            for (o, &b) in dst.iter_mut().zip(wrow) {
                                *o = a * b;
                            }
                        } else {
                            for (o, &b) in dst.iter_mut().zip(wrow) {
                                *o += a * b;
                            }
                        }
                    }
                }
                *flops += (width * (2 * m - 1)) as u64;
            }
        }
    }
    out
}

/// Final step contracting `α` and the rank column together:
/// `out[(p,β)][r'] = Σ_{α,b} t[p][(α,r')][b] · w[(α + β·m)·stride + col0 + b]`.
#[allow(clippy::too_many_arguments)]
fn fused_step(
    t: &[f64],
    p: usize,
    m: usize,
    n: usize,
    r_rest: usize,
    w: &[f64],
    stride: usize,
    col0: usize,
    width: usize,
    flops: &mut u64,
) -> Vec<f64> {
    let mut out = vec![0.0; p * n * r_rest];
    for pi in 0..p {
        for beta in 0..n {
            for r in 0..r_rest {
                let mut acc = 0.0;
                let mut first = true;
                for alpha in 0..m {
                    let wrow = &w[(alpha + beta * m) * stride + col0..][..width];
                    let src = pi * m * r_rest + alpha * r_rest + r;
                    let trow = &t[src * width..(src + 1) * width];
                    for (&a, &b) in trow.iter().zip(wrow) {
                        if first {
                            acc = a * b;
                            first = false;
                        } else {
                            acc += a * b;
                        }
                    }
                }
                out[(pi * n + beta) * r_rest + r] = acc;
                *flops += (2 * m * width - 1) as u64;
            }
        }
    }
    out
}

/// Sums the trailing rank column: `out[p] = Σ_b t[p][b]`.
fn sum_rank(t: &[f64], rows: usize, width: usize, flops: &mut u64) -> Vec<f64> {
    *flops += (rows * (width - 1)) as u64;
    t.chunks_exact(width).map(|row| row.iter().sum()).collect()
}

/// Rank-carrying contraction of `x` against assembled factors, restricted to
/// rank columns `col0 .. col0 + width`. Returns the flat output.
#[allow(clippy::too_many_arguments)]
fn strict_columns(
    x: &[f64],
    m: &[usize],
    n: &[usize],
    factors: &[&[f64]],
    stride: usize,
    col0: usize,
    width: usize,
    flops: &mut u64,
) -> Vec<f64> {
    let d = m.len();
    let mut t: Vec<f64> = x.to_vec();
    let mut has_rank = false;
    let mut p = 1usize;
    let mut r: usize = m.iter().product();
    for i in 0..d {
        let r_rest = r / m[i];
        if i == d - 1 && d.is_multiple_of(2) {
            return fused_step(
                &t, p, m[i], n[i], r_rest, factors[i], stride, col0, width, flops,
            );
        }
        t = rank_step(
            &t, has_rank, p, m[i], n[i], r_rest, factors[i], stride, col0, width, flops,
        );
        has_rank = true;
        p *= n[i];
        r = r_rest;
    }
    sum_rank(&t, p, width, flops)
}

/// Rank-carrying product over all columns of the given assembled factors,
/// splitting columns into blocks so intermediates stay bounded.
fn strict_blocked(
    x: &[f64],
    m: &[usize],
    n: &[usize],
    factors: &[DenseTensor],
    flops: &mut u64,
) -> Vec<f64> {
    let cols = factors[0].cols();
    let mut widest = 1usize;
    let mut p = 1usize;
    let mut r: usize = m.iter().product();
    for i in 0..m.len() {
        r /= m[i];
        p *= n[i];
        widest = widest.max(p * r);
    }
    let block = (STRICT_BLOCK_BUDGET / widest).clamp(1, cols);
    let views: Vec<&[f64]> = factors.iter().map(|f| f.data()).collect();
    let mut y: Option<Vec<f64>> = None;
    let mut col0 = 0;
    while col0 < cols {
        let width = block.min(cols - col0);
        let part = strict_columns(x, m, n, &views, cols, col0, width, flops);
        y = Some(match y {
            None => part,
            Some(mut acc) => {
                for (a, b) in acc.iter_mut().zip(&part) {
                    *a += b;
                }
                *flops += part.len() as u64;
                acc
            }
        });
        col0 += width;
    }
    y.expect("at least one rank column")
}

/// Mode-by-mode product against the assembled factors `W^(i)`.
///
/// Each step contracts `m_i` and keeps the shared rank column, so the rank
/// mode never grows beyond one copy. When `d` is even the last step
/// contracts `m_d` and the rank column together; when `d` is odd the rank
/// column is summed against the all-ones kernel at the end.
pub fn multiply_strict(x: &DenseTensor, w: &KcpWeight) -> Result<MultiplyResult> {
    check_input(x, w)?;
    let cfg = w.config();
    let factors = (0..cfg.order())
        .map(|i| assemble_factor(w, i))
        .collect::<Result<Vec<_>>>()?;
    let mut flops = assembly_flops(w);
    let y = strict_blocked(x.data(), cfg.m(), cfg.n(), &factors, &mut flops);
    Ok(MultiplyResult {
        y: DenseTensor::from_vec(cfg.n().to_vec(), y)?,
        flops,
    })
}

/// Largest intermediate of [`multiply_naive`], in scalars.
pub fn naive_peak_scalars(cfg: &KcpConfig) -> u128 {
    let (m, n) = (cfg.m(), cfg.n());
    let c = cfg.total_rank() as u128;
    let mut p = 1u128;
    let mut r: u128 = m.iter().map(|&v| v as u128).product();
    let mut ranks = 1u128;
    let mut peak = 0u128;
    for i in 0..cfg.order() {
        r /= m[i] as u128;
        p *= n[i] as u128;
        ranks = ranks.saturating_mul(c);
        peak = peak.max(p.saturating_mul(r).saturating_mul(ranks));
    }
    peak
}

/// Left-to-right contraction that keeps every rank mode, so step `i` holds
/// `C^i` rank entries, followed by the superdiagonal-kernel contraction.
/// Fails with [`KcpError::TooLarge`] when any intermediate exceeds `cap`.
pub fn multiply_naive_capped(x: &DenseTensor, w: &KcpWeight, cap: u128) -> Result<MultiplyResult> {
    check_input(x, w)?;
    let cfg = w.config();
    let size = naive_peak_scalars(cfg);
    if size > cap {
        return Err(KcpError::TooLarge {
            required: size,
            cap,
        });
    }
    let (m, n, c) = (cfg.m(), cfg.n(), cfg.total_rank());
    let d = cfg.order();

    let factors = (0..d)
        .map(|i| assemble_factor(w, i))
        .collect::<Result<Vec<_>>>()?;
    let mut flops = assembly_flops(w);
    let mut t = x.data().to_vec();
    let mut p = 1usize;
    let mut r: usize = m.iter().product();
    let mut width = 1usize;
    for i in 0..d {
        let r_rest = r / m[i];
        let wf = factors[i].data();
        let mut out = vec![0.0; p * n[i] * r_rest * width * c];
        for pi in 0..p {
            for beta in 0..n[i] {
                for rr in 0..r_rest {
                    let dst_at = ((pi * n[i] + beta) * r_rest + rr) * width * c;
                    for s in 0..width {
                        let dst = &mut out[dst_at + s * c..dst_at + (s + 1) * c];
                        for alpha in 0..m[i] {
                            let src = (pi * m[i] * r_rest + alpha * r_rest + rr) * width + s;
                            let a = t[src];
                            let wrow = &wf[(alpha + beta * m[i]) * c..][..c];
                            if alpha == 0 {
                                for (o, &b) in dst.iter_mut().zip(wrow) {
                                    *o = a * b;
                                }
                            } else {
                                for (o, &b) in dst.iter_mut().zip(wrow) {
                                    *o += a * b;
                                }
                            }
                        }
                    }
                    flops += (width * c * (2 * m[i] - 1)) as u64;
                }
            }
        }
        t = out;
        width *= c;
        p *= n[i];
        r = r_rest;
    }
    // Superdiagonal kernel: keep entries whose d rank indices coincide.
    let diag_step: usize = (0..d).map(|j| c.pow(j as u32)).sum();
    let y: Vec<f64> = t
        .chunks_exact(width)
        .map(|row| {
            let mut acc = row[0];
            for cc in 1..c {
                acc += row[cc * diag_step];
            }
            acc
        })
        .collect();
    flops += (p * (c - 1)) as u64;
    Ok(MultiplyResult {
        y: DenseTensor::from_vec(n.to_vec(), y)?,
        flops,
    })
}

/// [`multiply_naive_capped`] with the default cap of 10^8 scalars.
pub fn multiply_naive(x: &DenseTensor, w: &KcpWeight) -> Result<MultiplyResult> {
    multiply_naive_capped(x, w, NAIVE_CAP)
}

/// One KT branch evaluated factor by factor, without assembling Kronecker
/// blocks: contract `A_k^(i)` keeping `γ`, expand along `B_k^(i)` keeping
/// `τ`, and at the last mode contract `(m_d, γ)` with `vec(A_k^(d))` then `τ`
/// with `B_k^(d)ᵀ`.
fn relaxed_branch(x: &[f64], w: &KcpWeight, k: usize, flops: &mut u64) -> Vec<f64> {
    let cfg = w.config();
    let (m, n) = (cfg.m(), cfg.n());
    let (ca, cb) = (cfg.ca()[k], cfg.cb()[k]);
    let d = cfg.order();
    let ab = ca * cb;

    // i = 1: contract α_1 against A, then expand by B.
    let a = w.a(k, 0).data();
    let b = w.b(k, 0).data();
    let r_rest = x.len() / m[0];
    let mut u = vec![0.0; r_rest * ca];
    for r in 0..r_rest {
        let dst = &mut u[r * ca..(r + 1) * ca];
        for alpha in 0..m[0] {
            let xv = x[alpha * r_rest + r];
            let arow = &a[alpha * ca..(alpha + 1) * ca];
            if alpha == 0 {
                for (o, &av) in dst.iter_mut().zip(arow) {
                    *o = xv * av;
                }
            } else {
                for (o, &av) in dst.iter_mut().zip(arow) {
                    *o += xv * av;
                }
            }
        }
    }
    *flops += (r_rest * ca * (2 * m[0] - 1)) as u64;
    let mut s = vec![0.0; n[0] * r_rest * ab];
    for beta in 0..n[0] {
        let brow = &b[beta * cb..(beta + 1) * cb];
        for r in 0..r_rest {
            let at = (beta * r_rest + r) * ab;
            for g in 0..ca {
                let uv = u[r * ca + g];
                for (t, &bv) in brow.iter().enumerate() {
                    s[at + g * cb + t] = uv * bv;
                }
            }
        }
    }
    *flops += (n[0] * r_rest * ab) as u64;
    let mut p = n[0];
    let mut r = r_rest;

    // Middle modes: contract α_i keeping γ, then scale along β_i keeping τ.
    for i in 1..d - 1 {
        let a = w.a(k, i).data();
        let b = w.b(k, i).data();
        let r_rest = r / m[i];
        let mut u = vec![0.0; p * r_rest * ab];
        for pi in 0..p {
            for rr in 0..r_rest {
                let dst = &mut u[(pi * r_rest + rr) * ab..][..ab];
                for alpha in 0..m[i] {
                    let src = &s[(pi * r + alpha * r_rest + rr) * ab..][..ab];
                    let arow = &a[alpha * ca..(alpha + 1) * ca];
                    for g in 0..ca {
                        let av = arow[g];
                        for t in 0..cb {
                            if alpha == 0 {
                                dst[g * cb + t] = src[g * cb + t] * av;
                            } else {
                                dst[g * cb + t] += src[g * cb + t] * av;
                            }
                        }
                    }
                }
            }
        }
        *flops += (p * r_rest * ab * (2 * m[i] - 1)) as u64;
        let mut next = vec![0.0; p * n[i] * r_rest * ab];
        for pi in 0..p {
            for beta in 0..n[i] {
                let brow = &b[beta * cb..(beta + 1) * cb];
                for rr in 0..r_rest {
                    let src = &u[(pi * r_rest + rr) * ab..][..ab];
                    let dst = &mut next[((pi * n[i] + beta) * r_rest + rr) * ab..][..ab];
                    for g in 0..ca {
                        for t in 0..cb {
                            dst[g * cb + t] = src[g * cb + t] * brow[t];
                        }
                    }
                }
            }
        }
        *flops += (p * n[i] * r_rest * ab) as u64;
        s = next;
        p *= n[i];
        r = r_rest;
    }

    // Last mode: contract (α_d, γ) with vec(A), then τ with Bᵀ.
    let i = d - 1;
    let a = w.a(k, i).data();
    let b = w.b(k, i).data();
    let mut v = vec![0.0; p * cb];
    for pi in 0..p {
        let dst = &mut v[pi * cb..(pi + 1) * cb];
        for alpha in 0..m[i] {
            let src = &s[(pi * m[i] + alpha) * ab..][..ab];
            for g in 0..ca {
                let av = a[alpha * ca + g];
                for t in 0..cb {
                    if alpha == 0 && g == 0 {
                        dst[t] = src[g * cb + t] * av;
                    } else {
                        dst[t] += src[g * cb + t] * av;
                    }
                }
            }
        }
    }
    *flops += (p * cb * (2 * m[i] * ca - 1)) as u64;
    let mut y = vec![0.0; p * n[i]];
    for pi in 0..p {
        for beta in 0..n[i] {
            let mut acc = v[pi * cb] * b[beta * cb];
            for t in 1..cb {
                acc += v[pi * cb + t] * b[beta * cb + t];
            }
            y[pi * n[i] + beta] = acc;
        }
    }
    *flops += (p * n[i] * (2 * cb - 1)) as u64;
    y
}

/// Factor-by-factor product: each branch passes `x` through `A_k^(i)` and
/// `B_k^(i)` separately (no Kronecker block is ever formed), and branch
/// outputs are summed in ascending `k`. Needs an even order.
pub fn multiply_relaxed(x: &DenseTensor, w: &KcpWeight) -> Result<MultiplyResult> {
    check_input(x, w)?;
    let cfg = w.config();
    if !cfg.order().is_multiple_of(2) {
        return Err(KcpError::OddOrder(cfg.order()));
    }
    let mut flops = 0u64;
    let mut y = relaxed_branch(x.data(), w, 0, &mut flops);
    for k in 1..cfg.kt_rank() {
        let part = relaxed_branch(x.data(), w, k, &mut flops);
        for (a, b) in y.iter_mut().zip(&part) {
            *a += b;
        }
        flops += part.len() as u64;
    }
    Ok(MultiplyResult {
        y: DenseTensor::from_vec(cfg.n().to_vec(), y)?,
        flops,
    })
}

/// Branch `k` of the parallel path: the strict product against
/// `A_k^(i) ⊗ B_k^(i)` alone.
type BranchSlot = Mutex<Option<Result<(Vec<f64>, u64)>>>;

fn parallel_branch(x: &[f64], w: &KcpWeight, k: usize) -> Result<(Vec<f64>, u64)> {
    let cfg = w.config();
    let mut flops = 0u64;
    let factors = (0..cfg.order())
        .map(|i| {
            flops += (cfg.m()[i] * cfg.n()[i] * cfg.branch_rank(k)) as u64;
            kronecker(w.a(k, i), w.b(k, i))
        })
        .collect::<Result<Vec<_>>>()?;
    let y = strict_blocked(x, cfg.m(), cfg.n(), &factors, &mut flops);
    Ok((y, flops))
}

/// Evaluates the K branches as independent tasks on up to `workers`
/// threads, then sums them in ascending `k`. The result does not depend on
/// the worker count or on completion order.
pub fn multiply_parallel(x: &DenseTensor, w: &KcpWeight, workers: usize) -> Result<MultiplyResult> {
    check_input(x, w)?;
    if workers == 0 {
        return Err(KcpError::ZeroWorkers);
    }
    let cfg = w.config();
    let kk = cfg.kt_rank();
    let slots: Vec<BranchSlot> = (0..kk).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let threads = workers.min(kk);
    let run = || loop {
        let k = next.fetch_add(1, Ordering::Relaxed);
        if k >= kk {
            break;
        }
        let out = parallel_branch(x.data(), w, k);
        *slots[k].lock().expect("slot lock") = Some(out);
    };
    if threads == 1 {
        run();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(run);
            }
        });
    }

    let mut y: Option<Vec<f64>> = None;
    let mut flops = 0u64;
    for slot in slots {
        let (part, f) = slot
            .into_inner()
            .expect("slot lock")
            .expect("every branch ran")?;
        flops += f;
        y = Some(match y {
            None => part,
            Some(mut acc) => {
                for (a, b) in acc.iter_mut().zip(&part) {
                    *a += b;
                }
                flops += part.len() as u64;
                acc
            }
        });
    }
    Ok(MultiplyResult {
        y: DenseTensor::from_vec(cfg.n().to_vec(), y.expect("K ≥ 1"))?,
        flops,
    })
}

/// Largest absolute entry-wise difference divided by `1 + max|reference|`.
pub fn relative_error(value: &DenseTensor, reference: &DenseTensor) -> Result<f64> {
    Ok(value.max_abs_diff(reference)? / (1.0 + reference.max_abs()))
}
