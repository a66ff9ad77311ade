use crate::error::{KcpError, Result};
use crate::format::{assemble_factor, KcpWeight};
use crate::tensor::DenseTensor;

use super::{check_input, rank_step};

/// Derivatives of `⟨dY, multiply_strict(x, w)⟩` with respect to the input
/// and to every factor matrix. `da[k][i]` matches `A_k^(i)`, `db[k][i]`
/// matches `B_k^(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub dx: DenseTensor,
    pub da: Vec<Vec<DenseTensor>>,
    pub db: Vec<Vec<DenseTensor>>,
}

/// Reverse pass through the rank-carrying contraction chain.
///
/// The forward chain is `T_i[(p,β)][r'][c] = Σ_α T_{i-1}[p][(α,r')][c]·W_i[(α,β)][c]`
/// with `y[p] = Σ_c T_d[p][c]`; gradients flow back step by step and the
/// gradient of each assembled `W^(i)` is split into its Kronecker blocks.
pub fn multiply_backward(x: &DenseTensor, w: &KcpWeight, dy: &DenseTensor) -> Result<Gradients> {
    check_input(x, w)?;
    let cfg = w.config();
    if dy.dims() != cfg.n() {
        return Err(KcpError::SizeMismatch(format!(
            "output gradient shape {:?} does not match weight output modes {:?}",
            dy.dims(),
            cfg.n()
        )));
    }
    let (m, n, c) = (cfg.m(), cfg.n(), cfg.total_rank());
    let d = cfg.order();
    let factors = (0..d)
        .map(|i| assemble_factor(w, i))
        .collect::<Result<Vec<_>>>()?;

    // Forward, keeping every intermediate. states[i] feeds mode i.
    let mut states: Vec<Vec<f64>> = vec![x.data().to_vec()];
    let mut shapes: Vec<(usize, usize)> = vec![(1, m.iter().product())];
    let mut scratch = 0u64;
    for i in 0..d {
        let (p, r) = shapes[i];
        let r_rest = r / m[i];
        let next = rank_step(
            &states[i],
            i > 0,
            p,
            m[i],
            n[i],
            r_rest,
            factors[i].data(),
            c,
            0,
            c,
            &mut scratch,
        );
        states.push(next);
        shapes.push((p * n[i], r_rest));
    }

    // y[p] = Σ_c T_d[p][c]  ⇒  G_d[p][c] = dY[p].
    let mut g: Vec<f64> = dy
        .data()
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v, c))
        .collect();
    let mut dws: Vec<Vec<f64>> = vec![Vec::new(); d];
    for i in (0..d).rev() {
        let (p, r) = shapes[i];
        let r_rest = r / m[i];
        let t = &states[i];
        let has_rank = i > 0;
        let wf = factors[i].data();
        let mut dw = vec![0.0; m[i] * n[i] * c];
        let mut gin = vec![0.0; if has_rank { p * r * c } else { p * r }];
        for pi in 0..p {
            for beta in 0..n[i] {
                for rr in 0..r_rest {
                    let grow = &g[((pi * n[i] + beta) * r_rest + rr) * c..][..c];
                    for alpha in 0..m[i] {
                        let wrow = &wf[(alpha + beta * m[i]) * c..][..c];
                        let dwrow = &mut dw[(alpha + beta * m[i]) * c..][..c];
                        let src = pi * r + alpha * r_rest + rr;
                        if has_rank {
                            let trow = &t[src * c..(src + 1) * c];
                            let girow = &mut gin[src * c..(src + 1) * c];
                            for cc in 0..c {
                                dwrow[cc] += trow[cc] * grow[cc];
                                girow[cc] += grow[cc] * wrow[cc];
                            }
                        } else {
                            let tv = t[src];
                            let mut acc = 0.0;
                            for cc in 0..c {
                                dwrow[cc] += tv * grow[cc];
                                acc += grow[cc] * wrow[cc];
                            }
                            gin[src] += acc;
                        }
                    }
                }
            }
        }
        dws[i] = dw;
        g = gin;
    }

    // W^(i)[(α,β)][off_k + γ + τ·CA_k] = A[α][γ]·B[β][τ].
    let mut da = Vec::with_capacity(cfg.kt_rank());
    let mut db = Vec::with_capacity(cfg.kt_rank());
    for k in 0..cfg.kt_rank() {
        let (ca, cb, off) = (cfg.ca()[k], cfg.cb()[k], cfg.column_offset(k));
        let mut dak = Vec::with_capacity(d);
        let mut dbk = Vec::with_capacity(d);
        for i in 0..d {
            let a = w.a(k, i).data();
            let b = w.b(k, i).data();
            let mut ga = vec![0.0; m[i] * ca];
            let mut gb = vec![0.0; n[i] * cb];
            for beta in 0..n[i] {
                for alpha in 0..m[i] {
                    let row = &dws[i][(alpha + beta * m[i]) * c + off..][..ca * cb];
                    for tau in 0..cb {
                        for gamma in 0..ca {
                            let v = row[gamma + tau * ca];
                            ga[alpha * ca + gamma] += v * b[beta * cb + tau];
                            gb[beta * cb + tau] += v * a[alpha * ca + gamma];
                        }
                    }
                }
            }
            dak.push(DenseTensor::from_vec([m[i], ca], ga)?);
            dbk.push(DenseTensor::from_vec([n[i], cb], gb)?);
        }
        da.push(dak);
        db.push(dbk);
    }
    Ok(Gradients {
        dx: DenseTensor::from_vec(m.to_vec(), g)?,
        da,
        db,
    })
}
