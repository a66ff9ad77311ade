//! Kronecker tensor (KT) and Kronecker-CP (KCP) weight representations.
//!
//! Both formats store the same numbers: for every branch `k` and mode `i` a
//! factor matrix `A[k][i]` of shape `m_i × CA_k` and `B[k][i]` of shape
//! `n_i × CB_k`. Read as KT, branch `k` is the pair of CP tensors
//! `𝒜_k = Σ_γ a_γ^(1) ∘ ⋯ ∘ a_γ^(d)` and `ℬ_k` likewise, and the weight is
//! `Σ_k 𝒜_k ⊗ ℬ_k`. Read as KCP, mode `i` has the single factor matrix
//! `W^(i) = [A_1^(i) ⊗ B_1^(i) ⋯ A_K^(i) ⊗ B_K^(i)]` (see [`assemble_factor`]).
//! CP kernels are all-ones and never stored.
//!
//! Dense weight tensors have modes of size `m_i·n_i` with the combined index
//! `ω_i = α_i + β_i·m_i`.

mod init;
mod io;
mod rank;

pub use init::{init_std, random_init};
pub use io::{deserialize, serialize, MAGIC};
pub use rank::{kt_rank_lower_bound, DEFAULT_RANK_TOL};

use std::ops::Deref;
use std::sync::Arc;

use crate::error::{KcpError, Result};
use crate::tensor::{for_each_index, kronecker, outer, split_index, strides, DenseTensor};

/// Largest dense tensor the reconstruction oracles will materialize.
pub const DENSE_LIMIT: usize = 1 << 26;

/// Mode sizes and ranks of a KCP / KT weight.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KcpConfig {
    m: Vec<usize>,
    n: Vec<usize>,
    ca: Vec<usize>,
    cb: Vec<usize>,
}

impl KcpConfig {
    /// `m`, `n`: input and output mode sizes (same length `d`).
    /// `ca`, `cb`: per-branch CP ranks (same length `K`).
    pub fn new(m: Vec<usize>, n: Vec<usize>, ca: Vec<usize>, cb: Vec<usize>) -> Result<Self> {
        if m.is_empty() {
            return Err(KcpError::InvalidConfig("order d must be at least 1".into()));
        }
        if m.len() != n.len() {
            return Err(KcpError::InvalidConfig(format!(
                "{} input modes but {} output modes",
                m.len(),
                n.len()
            )));
        }
        if ca.is_empty() {
            return Err(KcpError::InvalidConfig(
                "KT rank K must be at least 1".into(),
            ));
        }
        if ca.len() != cb.len() {
            return Err(KcpError::InvalidConfig(format!(
                "{} A-ranks but {} B-ranks",
                ca.len(),
                cb.len()
            )));
        }
        for (name, list) in [("m", &m), ("n", &n), ("cA", &ca), ("cB", &cb)] {
            if let Some(pos) = list.iter().position(|&v| v == 0) {
                return Err(KcpError::InvalidConfig(format!("{name}[{pos}] is 0")));
            }
        }
        let cfg = Self { m, n, ca, cb };
        for list in [&cfg.m, &cfg.n] {
            list.iter()
                .try_fold(1usize, |acc, &v| acc.checked_mul(v))
                .ok_or_else(|| KcpError::InvalidConfig("mode product overflows".into()))?;
        }
        Ok(cfg)
    }

    /// Same CP ranks on every branch.
    pub fn uniform(m: Vec<usize>, n: Vec<usize>, k: usize, ca: usize, cb: usize) -> Result<Self> {
        Self::new(m, n, vec![ca; k], vec![cb; k])
    }

    pub fn order(&self) -> usize {
        self.m.len()
    }

    pub fn kt_rank(&self) -> usize {
        self.ca.len()
    }

    pub fn m(&self) -> &[usize] {
        &self.m
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn ca(&self) -> &[usize] {
        &self.ca
    }

    pub fn cb(&self) -> &[usize] {
        &self.cb
    }

    /// `M = Π m_i`.
    pub fn input_size(&self) -> usize {
        self.m.iter().product()
    }

    /// `N = Π n_i`.
    pub fn output_size(&self) -> usize {
        self.n.iter().product()
    }

    /// `C_k = CA_k · CB_k`.
    pub fn branch_rank(&self, k: usize) -> usize {
        self.ca[k] * self.cb[k]
    }

    /// Column count of every assembled factor: `Σ_k CA_k·CB_k`.
    pub fn total_rank(&self) -> usize {
        (0..self.kt_rank()).map(|k| self.branch_rank(k)).sum()
    }

    /// First assembled column belonging to branch `k`.
    pub fn column_offset(&self, k: usize) -> usize {
        (0..k).map(|j| self.branch_rank(j)).sum()
    }

    /// Number of scalars stored in one weight.
    pub fn stored_scalars(&self) -> usize {
        (0..self.kt_rank())
            .map(|k| {
                self.m.iter().map(|&m| m * self.ca[k]).sum::<usize>()
                    + self.n.iter().map(|&n| n * self.cb[k]).sum::<usize>()
            })
            .sum()
    }

    /// Largest input or output mode size.
    pub fn max_mode(&self) -> usize {
        self.m.iter().chain(&self.n).copied().max().unwrap_or(1)
    }
}

/// Factor matrices shared by both weight views, indexed `[k][i]`.
///
/// Factors sit behind `Arc` so several weights can hold the very same
/// matrix (LSTM gates share their higher-mode factors this way).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    config: KcpConfig,
    a: Vec<Vec<Arc<DenseTensor>>>,
    b: Vec<Vec<Arc<DenseTensor>>>,
}

impl FactorSet {
    pub fn new(
        config: KcpConfig,
        a: Vec<Vec<Arc<DenseTensor>>>,
        b: Vec<Vec<Arc<DenseTensor>>>,
    ) -> Result<Self> {
        let kk = config.kt_rank();
        let d = config.order();
        if a.len() != kk || b.len() != kk {
            return Err(KcpError::InvalidConfig(format!(
                "expected {kk} branches, got {} A and {} B",
                a.len(),
                b.len()
            )));
        }
        for k in 0..kk {
            if a[k].len() != d || b[k].len() != d {
                return Err(KcpError::InvalidConfig(format!(
                    "branch {k}: expected {d} modes, got {} A and {} B",
                    a[k].len(),
                    b[k].len()
                )));
            }
            for i in 0..d {
                let want_a = [config.m[i], config.ca[k]];
                let want_b = [config.n[i], config.cb[k]];
                if a[k][i].dims() != want_a {
                    return Err(KcpError::InvalidConfig(format!(
                        "A[{k}][{i}] has shape {:?}, expected {want_a:?}",
                        a[k][i].dims()
                    )));
                }
                if b[k][i].dims() != want_b {
                    return Err(KcpError::InvalidConfig(format!(
                        "B[{k}][{i}] has shape {:?}, expected {want_b:?}",
                        b[k][i].dims()
                    )));
                }
            }
        }
        Ok(Self { config, a, b })
    }

    /// Builds factors from owned matrices.
    pub fn from_owned(
        config: KcpConfig,
        a: Vec<Vec<DenseTensor>>,
        b: Vec<Vec<DenseTensor>>,
    ) -> Result<Self> {
        let wrap = |v: Vec<Vec<DenseTensor>>| -> Vec<Vec<Arc<DenseTensor>>> {
            v.into_iter()
                .map(|row| row.into_iter().map(Arc::new).collect())
                .collect()
        };
        Self::new(config, wrap(a), wrap(b))
    }

    /// Factors filled by `f(k, i, is_b, row, col)`.
    pub fn from_fn(
        config: KcpConfig,
        mut f: impl FnMut(usize, usize, bool, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for k in 0..config.kt_rank() {
            let mut ak = Vec::new();
            let mut bk = Vec::new();
            for i in 0..config.order() {
                ak.push(Arc::new(DenseTensor::from_fn(
                    [config.m[i], config.ca[k]],
                    |ix| f(k, i, false, ix[0], ix[1]),
                )?));
                bk.push(Arc::new(DenseTensor::from_fn(
                    [config.n[i], config.cb[k]],
                    |ix| f(k, i, true, ix[0], ix[1]),
                )?));
            }
            a.push(ak);
            b.push(bk);
        }
        Self::new(config, a, b)
    }

    pub fn config(&self) -> &KcpConfig {
        &self.config
    }

    /// `A_k^(i)`, shape `m_i × CA_k`.
    pub fn a(&self, k: usize, i: usize) -> &DenseTensor {
        &self.a[k][i]
    }

    /// `B_k^(i)`, shape `n_i × CB_k`.
    pub fn b(&self, k: usize, i: usize) -> &DenseTensor {
        &self.b[k][i]
    }

    pub fn a_arc(&self, k: usize, i: usize) -> &Arc<DenseTensor> {
        &self.a[k][i]
    }

    pub fn b_arc(&self, k: usize, i: usize) -> &Arc<DenseTensor> {
        &self.b[k][i]
    }

    /// Replaces one factor. The new matrix must keep the old shape.
    pub fn set_factor(
        &mut self,
        k: usize,
        i: usize,
        is_b: bool,
        value: Arc<DenseTensor>,
    ) -> Result<()> {
        let slot = if is_b {
            &mut self.b[k][i]
        } else {
            &mut self.a[k][i]
        };
        if slot.dims() != value.dims() {
            return Err(KcpError::SizeMismatch(format!(
                "factor shape {:?} replaced by {:?}",
                slot.dims(),
                value.dims()
            )));
        }
        *slot = value;
        Ok(())
    }

    /// Mutable access to one factor entry (copy-on-write if shared).
    pub fn factor_mut(&mut self, k: usize, i: usize, is_b: bool) -> &mut DenseTensor {
        let slot = if is_b {
            &mut self.b[k][i]
        } else {
            &mut self.a[k][i]
        };
        Arc::make_mut(slot)
    }

    /// All factor scalars in serialization order.
    pub fn flat_factors(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.config.stored_scalars());
        for k in 0..self.config.kt_rank() {
            for i in 0..self.config.order() {
                out.extend_from_slice(self.a[k][i].data());
                out.extend_from_slice(self.b[k][i].data());
            }
        }
        out
    }
}

/// A weight read in the KCP sense (one CP decomposition with assembled factors).
#[derive(Debug, Clone, PartialEq)]
pub struct KcpWeight(FactorSet);

/// A weight read in the KT sense (a sum of Kronecker products of CP tensors).
#[derive(Debug, Clone, PartialEq)]
pub struct KtWeight(FactorSet);

impl KcpWeight {
    pub fn new(factors: FactorSet) -> Self {
        Self(factors)
    }

    pub fn factors(&self) -> &FactorSet {
        &self.0
    }

    pub fn factors_mut(&mut self) -> &mut FactorSet {
        &mut self.0
    }

    pub fn into_factors(self) -> FactorSet {
        self.0
    }

    /// The same numbers read as a KT weight.
    pub fn as_kt(&self) -> KtWeight {
        KtWeight(self.0.clone())
    }
}

impl KtWeight {
    pub fn new(factors: FactorSet) -> Self {
        Self(factors)
    }

    pub fn factors(&self) -> &FactorSet {
        &self.0
    }

    pub fn into_factors(self) -> FactorSet {
        self.0
    }
}

impl Deref for KcpWeight {
    type Target = FactorSet;
    fn deref(&self) -> &FactorSet {
        &self.0
    }
}

impl Deref for KtWeight {
    type Target = FactorSet;
    fn deref(&self) -> &FactorSet {
        &self.0
    }
}

/// Converts a KT weight to its KCP view. Storage is unchanged; the assembled
/// factors of [`assemble_factor`] realize the conversion on demand.
pub fn kt_to_kcp(kt: KtWeight) -> KcpWeight {
    KcpWeight(kt.0)
}

fn check_dense_count(dims: &[usize]) -> Result<()> {
    let mut count: u128 = 1;
    for &d in dims {
        count *= d as u128;
    }
    if count > DENSE_LIMIT as u128 {
        return Err(KcpError::TooLarge {
            required: count,
            cap: DENSE_LIMIT as u128,
        });
    }
    Ok(())
}

/// `W^(i)`: the `m_i·n_i × C` matrix whose column block `k` is `A_k^(i) ⊗ B_k^(i)`.
pub fn assemble_factor(w: &KcpWeight, i: usize) -> Result<DenseTensor> {
    let cfg = w.config();
    if i >= cfg.order() {
        return Err(KcpError::ModeOutOfRange {
            mode: i,
            order: cfg.order(),
        });
    }
    let rows = cfg.m[i] * cfg.n[i];
    let cols = cfg.total_rank();
    let mut out = vec![0.0; rows * cols];
    for k in 0..cfg.kt_rank() {
        let block = kronecker(w.a(k, i), w.b(k, i))?;
        let (off, width) = (cfg.column_offset(k), cfg.branch_rank(k));
        for r in 0..rows {
            out[r * cols + off..r * cols + off + width]
                .copy_from_slice(&block.data()[r * width..(r + 1) * width]);
        }
    }
    DenseTensor::from_vec([rows, cols], out)
}

/// Dense weight tensor from the KCP view: `Σ_c w_c^(1) ∘ ⋯ ∘ w_c^(d)` over
/// the columns of the assembled factors.
pub fn reconstruct_dense(w: &KcpWeight) -> Result<DenseTensor> {
    let cfg = w.config();
    let dims: Vec<usize> = (0..cfg.order()).map(|i| cfg.m[i] * cfg.n[i]).collect();
    check_dense_count(&dims)?;
    let factors = (0..cfg.order())
        .map(|i| assemble_factor(w, i))
        .collect::<Result<Vec<_>>>()?;
    let mut acc = DenseTensor::zeros(dims)?;
    for c in 0..cfg.total_rank() {
        let columns: Vec<Vec<f64>> = factors
            .iter()
            .map(|f| (0..f.rows()).map(|r| f.data()[r * f.cols() + c]).collect())
            .collect();
        let refs: Vec<&[f64]> = columns.iter().map(|v| v.as_slice()).collect();
        let term = outer(&refs)?;
        for (dst, src) in acc.data_mut().iter_mut().zip(term.data()) {
            *dst += src;
        }
    }
    Ok(acc)
}

/// Builds the CP tensor `Σ_γ f_γ^(1) ∘ ⋯ ∘ f_γ^(d)` from one factor per mode.
fn cp_tensor(factors: &[&DenseTensor]) -> Result<DenseTensor> {
    let dims: Vec<usize> = factors.iter().map(|f| f.rows()).collect();
    let rank = factors[0].cols();
    let mut acc = DenseTensor::zeros(dims)?;
    for g in 0..rank {
        let columns: Vec<Vec<f64>> = factors
            .iter()
            .map(|f| (0..f.rows()).map(|r| f.data()[r * rank + g]).collect())
            .collect();
        let refs: Vec<&[f64]> = columns.iter().map(|v| v.as_slice()).collect();
        let term = outer(&refs)?;
        for (dst, src) in acc.data_mut().iter_mut().zip(term.data()) {
            *dst += src;
        }
    }
    Ok(acc)
}

/// `𝒜_k` and `ℬ_k` of every branch as dense tensors of shape `m` and `n`.
pub fn kt_branch_tensors(kt: &KtWeight) -> Result<Vec<(DenseTensor, DenseTensor)>> {
    let cfg = kt.config();
    check_dense_count(&cfg.m)?;
    check_dense_count(&cfg.n)?;
    (0..cfg.kt_rank())
        .map(|k| {
            let a: Vec<&DenseTensor> = (0..cfg.order()).map(|i| kt.a(k, i)).collect();
            let b: Vec<&DenseTensor> = (0..cfg.order()).map(|i| kt.b(k, i)).collect();
            Ok((cp_tensor(&a)?, cp_tensor(&b)?))
        })
        .collect()
}

/// Dense weight tensor from the KT view: `Σ_k 𝒜_k ⊗ ℬ_k`, where entry
/// `(ω_1, …, ω_d)` with `ω_i = α_i + β_i·m_i` is `Σ_k 𝒜_k(α)·ℬ_k(β)`.
pub fn reconstruct_kt_dense(kt: &KtWeight) -> Result<DenseTensor> {
    let cfg = kt.config();
    let dims: Vec<usize> = (0..cfg.order()).map(|i| cfg.m[i] * cfg.n[i]).collect();
    check_dense_count(&dims)?;
    let branches = kt_branch_tensors(kt)?;
    let d = cfg.order();
    let mut alpha = vec![0usize; d];
    let mut beta = vec![0usize; d];
    let sa = strides(&cfg.m);
    let sb = strides(&cfg.n);
    let mut data = Vec::with_capacity(dims.iter().product());
    for_each_index(&dims, |omega| {
        for i in 0..d {
            let pair = split_index(omega[i], &[cfg.m[i], cfg.n[i]]).expect("ω within its mode");
            alpha[i] = pair[0];
            beta[i] = pair[1];
        }
        let oa: usize = alpha.iter().zip(&sa).map(|(x, s)| x * s).sum();
        let ob: usize = beta.iter().zip(&sb).map(|(x, s)| x * s).sum();
        data.push(
            branches
                .iter()
                .map(|(a, b)| a.data()[oa] * b.data()[ob])
                .sum(),
        );
    });
    DenseTensor::from_vec(dims, data)
}

/// `M × N` matricization `Σ_k vec(𝒜_k)·vec(ℬ_k)ᵀ`, rows and columns indexed
/// by the multi-indices of `α` over `m` and `β` over `n`.
pub fn matricize_rank_k(kt: &KtWeight) -> Result<DenseTensor> {
    let cfg = kt.config();
    let (rows, cols) = (cfg.input_size(), cfg.output_size());
    check_dense_count(&[rows, cols])?;
    let mut out = vec![0.0; rows * cols];
    for (a, b) in kt_branch_tensors(kt)? {
        let va = crate::tensor::vectorize(&a);
        let vb = crate::tensor::vectorize(&b);
        for (r, &x) in va.iter().enumerate() {
            for (dst, &y) in out[r * cols..(r + 1) * cols].iter_mut().zip(&vb) {
                *dst += x * y;
            }
        }
    }
    DenseTensor::from_vec([rows, cols], out)
}

/// Mode lists that unfold a dense weight (after splitting each mode into
/// `(n_i, m_i)`) into the `M × N` matricization: rows over the `m` modes.
pub fn weight_unfolding_modes(d: usize) -> (Vec<usize>, Vec<usize>) {
    (
        (0..d).map(|i| 2 * i + 1).collect(),
        (0..d).map(|i| 2 * i).collect(),
    )
}

/// Splits each dense weight mode `ω_i` of size `m_i·n_i` into the row-major
/// pair `(β_i, α_i)`, giving shape `(n_1, m_1, …, n_d, m_d)`.
pub fn split_weight_modes(t: &DenseTensor, cfg: &KcpConfig) -> Result<DenseTensor> {
    let dims: Vec<usize> = (0..cfg.order())
        .flat_map(|i| [cfg.n[i], cfg.m[i]])
        .collect();
    crate::tensor::reshape(t, crate::tensor::Shape::new(dims)?)
}
