//! LSTM cell whose four input-to-hidden matrices are KCP weights.
//!
//! Gates are ordered forget, input, cell input (`z`), output. Input vectors
//! of length `M` are tensorized to shape `m` (first mode fastest) before the
//! strict product; gate outputs are vectorized the same way, so the cell
//! computes `W_θᵀ·x` with `W_θ` the `M × N` matricization. Recurrent matrices
//! stay dense.

mod train;

pub use train::{generate_toy_task, train_toy, EpochRow, ToyConfig, ToyTask, TrainLog};

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{KcpError, Result};
use crate::format::{matricize_rank_k, random_init, FactorSet, KcpConfig, KcpWeight};
use crate::multiply::{multiply_backward, multiply_strict};
use crate::tensor::{tensorize, vectorize, DenseTensor};

pub const GATE_NAMES: [&str; 4] = ["f", "i", "z", "o"];
const FORGET: usize = 0;
const INPUT: usize = 1;
const CELL: usize = 2;
const OUTPUT: usize = 3;

/// Standard deviation of the recurrent matrix entries at initialization.
pub const RECURRENT_INIT_STD: f64 = 0.01;
/// Initial forget-gate bias.
pub const FORGET_BIAS: f64 = 1.0;

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Position of one factor matrix inside a cell: gate, branch, mode, and
/// whether it is the `B` (output side) factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FactorSlot {
    pub gate: usize,
    pub k: usize,
    pub i: usize,
    pub is_b: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellWeights {
    w: [KcpWeight; 4],
    u: [DenseTensor; 4],
    b: [Vec<f64>; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

fn gate_seeds(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x6c73_746d_5f63_656c)
}

fn recurrent_init(hidden: usize, rng: &mut ChaCha8Rng) -> ([DenseTensor; 4], [Vec<f64>; 4]) {
    let normal = Normal::new(0.0, RECURRENT_INIT_STD).expect("valid std");
    let u = std::array::from_fn(|_| {
        let data = (0..hidden * hidden).map(|_| normal.sample(rng)).collect();
        DenseTensor::from_vec([hidden, hidden], data).expect("square shape")
    });
    let b = std::array::from_fn(|g| vec![if g == FORGET { FORGET_BIAS } else { 0.0 }; hidden]);
    (u, b)
}

impl LstmCellWeights {
    /// All four input weights must share one configuration.
    pub fn new(w: [KcpWeight; 4], u: [DenseTensor; 4], b: [Vec<f64>; 4]) -> Result<Self> {
        let cfg = w[0].config();
        let hidden = cfg.output_size();
        for g in 0..4 {
            if w[g].config() != cfg {
                return Err(KcpError::InvalidConfig(format!(
                    "gate {} has a different weight configuration",
                    GATE_NAMES[g]
                )));
            }
            if u[g].dims() != [hidden, hidden] {
                return Err(KcpError::SizeMismatch(format!(
                    "recurrent matrix {} has shape {:?}, expected [{hidden}, {hidden}]",
                    GATE_NAMES[g],
                    u[g].dims()
                )));
            }
            if b[g].len() != hidden {
                return Err(KcpError::DimensionMismatch {
                    expected: hidden,
                    actual: b[g].len(),
                });
            }
        }
        Ok(Self { w, u, b })
    }

    /// Independent random factors per gate.
    pub fn random_unshared(config: &KcpConfig, seed: u64) -> Self {
        let mut rng = gate_seeds(seed);
        let w = std::array::from_fn(|_| random_init(config, rng.random()));
        let (u, b) = recurrent_init(config.output_size(), &mut rng);
        Self { w, u, b }
    }

    /// Random factors where modes `i ≥ 2` are one shared set and mode 1 is per gate.
    pub fn random_shared(config: &KcpConfig, seed: u64) -> Self {
        let mut rng = gate_seeds(seed);
        let shared = random_init(config, rng.random());
        let w = std::array::from_fn(|_| {
            let own = random_init(config, rng.random());
            let mut factors = shared.factors().clone();
            for k in 0..config.kt_rank() {
                factors
                    .set_factor(k, 0, false, own.a_arc(k, 0).clone())
                    .expect("same shape");
                factors
                    .set_factor(k, 0, true, own.b_arc(k, 0).clone())
                    .expect("same shape");
            }
            KcpWeight::new(factors)
        });
        let (u, b) = recurrent_init(config.output_size(), &mut rng);
        Self { w, u, b }
    }

    pub fn config(&self) -> &KcpConfig {
        self.w[0].config()
    }

    pub fn hidden_size(&self) -> usize {
        self.config().output_size()
    }

    pub fn input_size(&self) -> usize {
        self.config().input_size()
    }

    pub fn weight(&self, gate: usize) -> &KcpWeight {
        &self.w[gate]
    }

    pub fn recurrent(&self, gate: usize) -> &DenseTensor {
        &self.u[gate]
    }

    pub fn bias(&self, gate: usize) -> &[f64] {
        &self.b[gate]
    }

    fn factor_arc(&self, s: FactorSlot) -> &Arc<DenseTensor> {
        if s.is_b {
            self.w[s.gate].b_arc(s.k, s.i)
        } else {
            self.w[s.gate].a_arc(s.k, s.i)
        }
    }

    fn all_slots(&self) -> Vec<FactorSlot> {
        let cfg = self.config();
        let mut out = Vec::new();
        for gate in 0..4 {
            for k in 0..cfg.kt_rank() {
                for i in 0..cfg.order() {
                    for is_b in [false, true] {
                        out.push(FactorSlot { gate, k, i, is_b });
                    }
                }
            }
        }
        out
    }

    /// The distinct factor matrices (physically shared ones listed once), as
    /// the first slot holding each.
    pub fn factor_slots(&self) -> Vec<FactorSlot> {
        let mut unique: Vec<FactorSlot> = Vec::new();
        for s in self.all_slots() {
            let arc = self.factor_arc(s);
            if !unique.iter().any(|&u| Arc::ptr_eq(self.factor_arc(u), arc)) {
                unique.push(s);
            }
        }
        unique
    }

    /// For every slot of every gate, the index into [`Self::factor_slots`].
    fn slot_map(&self, unique: &[FactorSlot]) -> Vec<(FactorSlot, usize)> {
        self.all_slots()
            .into_iter()
            .map(|s| {
                let arc = self.factor_arc(s);
                let idx = unique
                    .iter()
                    .position(|&u| Arc::ptr_eq(self.factor_arc(u), arc))
                    .expect("every slot has a representative");
                (s, idx)
            })
            .collect()
    }

    pub fn factor(&self, slot: FactorSlot) -> &DenseTensor {
        self.factor_arc(slot)
    }

    /// Scalars held by the distinct KCP factor matrices.
    pub fn kcp_scalar_count(&self) -> usize {
        self.factor_slots()
            .iter()
            .map(|&s| self.factor(s).len())
            .sum()
    }

    /// KCP factors plus recurrent matrices plus biases.
    pub fn param_count(&self) -> usize {
        let h = self.hidden_size();
        self.kcp_scalar_count() + 4 * h * h + 4 * h
    }

    /// Replaces every distinct factor `j` by `f(j, old)`, preserving sharing.
    pub fn map_factors(
        &mut self,
        mut f: impl FnMut(usize, &DenseTensor) -> DenseTensor,
    ) -> Result<()> {
        let unique = self.factor_slots();
        let map = self.slot_map(&unique);
        let fresh: Vec<Arc<DenseTensor>> = unique
            .iter()
            .enumerate()
            .map(|(j, &s)| Arc::new(f(j, self.factor(s))))
            .collect();
        for (s, j) in map {
            self.w[s.gate]
                .factors_mut()
                .set_factor(s.k, s.i, s.is_b, fresh[j].clone())?;
        }
        Ok(())
    }

    pub fn recurrent_mut(&mut self, gate: usize) -> &mut DenseTensor {
        &mut self.u[gate]
    }

    pub fn bias_mut(&mut self, gate: usize) -> &mut Vec<f64> {
        &mut self.b[gate]
    }

    /// Each gate weight replaced by its `M × N` dense matricization.
    pub fn to_dense(&self) -> Result<DenseLstmCell> {
        let w = [0, 1, 2, 3].map(|g| matricize_rank_k(&self.w[g].as_kt()));
        let [w0, w1, w2, w3] = w;
        Ok(DenseLstmCell {
            w: [w0?, w1?, w2?, w3?],
            u: self.u.clone(),
            b: self.b.clone(),
        })
    }
}

/// Random cell with mode-1 factors per gate and all other factors shared.
/// `hidden` must equal the output size of `config`.
pub fn make_shared_weights(
    config: &KcpConfig,
    hidden: usize,
    seed: u64,
) -> Result<LstmCellWeights> {
    if hidden != config.output_size() {
        return Err(KcpError::InvalidConfig(format!(
            "hidden size {hidden} differs from the weight output size {}",
            config.output_size()
        )));
    }
    Ok(LstmCellWeights::random_shared(config, seed))
}

/// Reference cell with dense `M × N` input matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLstmCell {
    pub w: [DenseTensor; 4],
    pub u: [DenseTensor; 4],
    pub b: [Vec<f64>; 4],
}

fn recurrent_product(u: &DenseTensor, h: &[f64]) -> Vec<f64> {
    let n = h.len();
    (0..n)
        .map(|j| {
            u.data()[j * n..(j + 1) * n]
                .iter()
                .zip(h)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// Pre-activations, activations and states of one step.
#[derive(Debug, Clone)]
struct StepTrace {
    gates: [Vec<f64>; 4],
    c_prev: Vec<f64>,
    h_prev: Vec<f64>,
    c_tanh: Vec<f64>,
}

fn combine(
    input_part: [Vec<f64>; 4],
    state: &LstmState,
    u: &[DenseTensor; 4],
    b: &[Vec<f64>; 4],
) -> (LstmState, StepTrace) {
    let hidden = state.h.len();
    let gates: [Vec<f64>; 4] = std::array::from_fn(|g| {
        let rec = recurrent_product(&u[g], &state.h);
        (0..hidden)
            .map(|j| {
                let a = input_part[g][j] + rec[j] + b[g][j];
                if g == CELL {
                    a.tanh()
                } else {
                    sigmoid(a)
                }
            })
            .collect()
    });
    let c: Vec<f64> = (0..hidden)
        .map(|j| gates[FORGET][j] * state.c[j] + gates[INPUT][j] * gates[CELL][j])
        .collect();
    let c_tanh: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..hidden).map(|j| gates[OUTPUT][j] * c_tanh[j]).collect();
    let trace = StepTrace {
        gates,
        c_prev: state.c.clone(),
        h_prev: state.h.clone(),
        c_tanh,
    };
    (LstmState { h, c }, trace)
}

fn check_step(x: &[f64], state: &LstmState, m: usize, hidden: usize) -> Result<()> {
    if x.len() != m {
        return Err(KcpError::DimensionMismatch {
            expected: m,
            actual: x.len(),
        });
    }
    if state.h.len() != hidden || state.c.len() != hidden {
        return Err(KcpError::DimensionMismatch {
            expected: hidden,
            actual: state.h.len().max(state.c.len()),
        });
    }
    Ok(())
}

fn step_traced(
    x: &[f64],
    state: &LstmState,
    w: &LstmCellWeights,
) -> Result<(LstmState, StepTrace)> {
    check_step(x, state, w.input_size(), w.hidden_size())?;
    let xt = tensorize(x, w.config().m())?;
    let mut parts: [Vec<f64>; 4] = Default::default();
    for (g, part) in parts.iter_mut().enumerate() {
        *part = vectorize(&multiply_strict(&xt, &w.w[g])?.y);
    }
    Ok(combine(parts, state, &w.u, &w.b))
}

/// One LSTM step: logistic forget/input/output gates, `tanh` cell input and
/// cell squash.
pub fn lstm_step(x: &[f64], state: &LstmState, w: &LstmCellWeights) -> Result<LstmState> {
    Ok(step_traced(x, state, w)?.0)
}

/// The same step with dense input matrices.
pub fn lstm_step_dense(x: &[f64], state: &LstmState, w: &DenseLstmCell) -> Result<LstmState> {
    let (m, hidden) = (w.w[0].rows(), w.w[0].cols());
    check_step(x, state, m, hidden)?;
    let parts: [Vec<f64>; 4] = std::array::from_fn(|g| {
        let mut out = vec![0.0; hidden];
        for (r, &xv) in x.iter().enumerate() {
            for (o, &wv) in out
                .iter_mut()
                .zip(&w.w[g].data()[r * hidden..(r + 1) * hidden])
            {
                *o += xv * wv;
            }
        }
        out
    });
    Ok(combine(parts, state, &w.u, &w.b).0)
}

/// Runs the cell over a sequence and returns the state after every step.
pub fn forward_sequence(
    xs: &[Vec<f64>],
    w: &LstmCellWeights,
    init: &LstmState,
) -> Result<Vec<LstmState>> {
    if xs.is_empty() {
        return Err(KcpError::EmptyInput("input sequence"));
    }
    let mut out = Vec::with_capacity(xs.len());
    let mut state = init.clone();
    for x in xs {
        state = lstm_step(x, &state, w)?;
        out.push(state.clone());
    }
    Ok(out)
}

/// Logistic readout on the final hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Gradients of a scalar loss with respect to every cell and readout
/// parameter. `factors[j]` belongs to `LstmCellWeights::factor_slots()[j]`;
/// gradients of shared factors are summed over the gates using them.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGradients {
    pub factors: Vec<DenseTensor>,
    pub u: [DenseTensor; 4],
    pub b: [Vec<f64>; 4],
    pub readout: Vec<f64>,
    pub readout_bias: f64,
}

impl CellGradients {
    fn zeros(w: &LstmCellWeights, unique: &[FactorSlot]) -> Self {
        let h = w.hidden_size();
        Self {
            factors: unique
                .iter()
                .map(|&s| DenseTensor::zeros(w.factor(s).dims().to_vec()).expect("factor shape"))
                .collect(),
            u: std::array::from_fn(|_| DenseTensor::zeros([h, h]).expect("square")),
            b: std::array::from_fn(|_| vec![0.0; h]),
            readout: vec![0.0; h],
            readout_bias: 0.0,
        }
    }

    /// `self += alpha · other`.
    pub fn add_scaled(&mut self, other: &CellGradients, alpha: f64) {
        fn axpy(dst: &mut [f64], src: &[f64], alpha: f64) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
        for (d, s) in self.factors.iter_mut().zip(&other.factors) {
            axpy(d.data_mut(), s.data(), alpha);
        }
        for g in 0..4 {
            axpy(self.u[g].data_mut(), other.u[g].data(), alpha);
            axpy(&mut self.b[g], &other.b[g], alpha);
        }
        axpy(&mut self.readout, &other.readout, alpha);
        self.readout_bias += alpha * other.readout_bias;
    }
}

/// Binary cross-entropy of `σ(logit)` against a 0/1 label, computed stably.
fn bce(logit: f64, label: f64) -> f64 {
    logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p()
}

fn logit_of(readout: &Readout, h: &[f64]) -> f64 {
    readout
        .weights
        .iter()
        .zip(h)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        + readout.bias
}

/// Loss and final logit of one labelled sequence, starting from a zero state.
pub fn sequence_loss(
    w: &LstmCellWeights,
    readout: &Readout,
    xs: &[Vec<f64>],
    label: f64,
) -> Result<(f64, f64)> {
    let states = forward_sequence(xs, w, &LstmState::zeros(w.hidden_size()))?;
    let logit = logit_of(readout, &states.last().expect("non-empty").h);
    Ok((bce(logit, label), logit))
}

/// Loss of one labelled sequence and its exact gradient by backpropagation
/// through time.
pub fn sequence_backward(
    w: &LstmCellWeights,
    readout: &Readout,
    xs: &[Vec<f64>],
    label: f64,
) -> Result<(f64, f64, CellGradients)> {
    if xs.is_empty() {
        return Err(KcpError::EmptyInput("input sequence"));
    }
    let hidden = w.hidden_size();
    if readout.weights.len() != hidden {
        return Err(KcpError::DimensionMismatch {
            expected: hidden,
            actual: readout.weights.len(),
        });
    }
    let mut state = LstmState::zeros(hidden);
    let mut traces = Vec::with_capacity(xs.len());
    for x in xs {
        let (next, trace) = step_traced(x, &state, w)?;
        traces.push(trace);
        state = next;
    }
    let logit = logit_of(readout, &state.h);
    let loss = bce(logit, label);

    let unique = w.factor_slots();
    let map = w.slot_map(&unique);
    let mut grads = CellGradients::zeros(w, &unique);
    let dlogit = sigmoid(logit) - label;
    grads.readout = state.h.iter().map(|h| dlogit * h).collect();
    grads.readout_bias = dlogit;

    let mut dh: Vec<f64> = readout.weights.iter().map(|r| dlogit * r).collect();
    let mut dc = vec![0.0; hidden];
    for (t, trace) in traces.iter().enumerate().rev() {
        let [f, i, z, o] = &trace.gates;
        let mut da: [Vec<f64>; 4] = Default::default();
        for g in &mut da {
            *g = vec![0.0; hidden];
        }
        for j in 0..hidden {
            let tc = trace.c_tanh[j];
            da[OUTPUT][j] = dh[j] * tc * o[j] * (1.0 - o[j]);
            dc[j] += dh[j] * o[j] * (1.0 - tc * tc);
            da[FORGET][j] = dc[j] * trace.c_prev[j] * f[j] * (1.0 - f[j]);
            da[INPUT][j] = dc[j] * z[j] * i[j] * (1.0 - i[j]);
            da[CELL][j] = dc[j] * i[j] * (1.0 - z[j] * z[j]);
            dc[j] *= f[j];
        }
        let mut dh_prev = vec![0.0; hidden];
        let xt = tensorize(&xs[t], w.config().m())?;
        for (g, dag) in da.iter().enumerate() {
            let u = w.u[g].data();
            let du = grads.u[g].data_mut();
            for r in 0..hidden {
                let a = dag[r];
                grads.b[g][r] += a;
                for l in 0..hidden {
                    du[r * hidden + l] += a * trace.h_prev[l];
                    dh_prev[l] += u[r * hidden + l] * a;
                }
            }
            let dy = tensorize(dag, w.config().n())?;
            let fg = multiply_backward(&xt, &w.w[g], &dy)?;
            for &(s, j) in map.iter().filter(|(s, _)| s.gate == g) {
                let src = if s.is_b {
                    &fg.db[s.k][s.i]
                } else {
                    &fg.da[s.k][s.i]
                };
                for (d, v) in grads.factors[j].data_mut().iter_mut().zip(src.data()) {
                    *d += v;
                }
            }
        }
        dh = dh_prev;
    }
    Ok((loss, logit, grads))
}

/// Builds a weight whose factors are all taken from `f(k, i, is_b)`; handy
/// for constructing cells by hand.
pub fn weight_from_factors(
    config: &KcpConfig,
    mut f: impl FnMut(usize, usize, bool) -> DenseTensor,
) -> Result<KcpWeight> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for k in 0..config.kt_rank() {
        a.push((0..config.order()).map(|i| f(k, i, false)).collect());
        b.push((0..config.order()).map(|i| f(k, i, true)).collect());
    }
    Ok(KcpWeight::new(FactorSet::from_owned(config.clone(), a, b)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_cell(cfg: &KcpConfig) -> LstmCellWeights {
        let h = cfg.output_size();
        let w = std::array::from_fn(|_| {
            weight_from_factors(cfg, |k, i, is_b| {
                let rows = if is_b { cfg.n()[i] } else { cfg.m()[i] };
                let cols = if is_b { cfg.cb()[k] } else { cfg.ca()[k] };
                DenseTensor::zeros([rows, cols]).unwrap()
            })
            .unwrap()
        });
        let u = std::array::from_fn(|_| DenseTensor::zeros([h, h]).unwrap());
        let b = std::array::from_fn(|_| vec![0.0; h]);
        LstmCellWeights::new(w, u, b).unwrap()
    }

    #[test]
    fn zero_cell_keeps_zero_state() {
        let cfg = KcpConfig::uniform(vec![2, 3], vec![2, 2], 1, 1, 1).unwrap();
        let cell = zero_cell(&cfg);
        let s = lstm_step(&[0.3; 6], &LstmState::zeros(4), &cell).unwrap();
        assert_eq!(s, LstmState::zeros(4));
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let cfg = KcpConfig::uniform(vec![2, 2], vec![2, 2], 1, 1, 1).unwrap();
        let mut cell = zero_cell(&cfg);
        cell.bias_mut(FORGET).iter_mut().for_each(|v| *v = 20.0);
        let init = LstmState {
            h: vec![0.0; 4],
            c: vec![0.5, -1.0, 2.0, 0.0],
        };
        let s = lstm_step(&[0.0; 4], &init, &cell).unwrap();
        for (a, b) in s.c.iter().zip(&init.c) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn sharing_structure() {
        let cfg = KcpConfig::uniform(vec![2, 3, 2], vec![2, 2, 2], 2, 2, 1).unwrap();
        let cell = make_shared_weights(&cfg, 8, 3).unwrap();
        let a1 = cell.weight(0).a_arc(1, 1);
        for g in 1..4 {
            assert!(Arc::ptr_eq(a1, cell.weight(g).a_arc(1, 1)));
            assert!(!Arc::ptr_eq(
                cell.weight(0).a_arc(1, 0),
                cell.weight(g).a_arc(1, 0)
            ));
            assert!(!Arc::ptr_eq(
                cell.weight(0).b_arc(0, 0),
                cell.weight(g).b_arc(0, 0)
            ));
        }
        assert_eq!(
            cell.kcp_scalar_count() as u64,
            crate::complexity::kcp_param_count(&cfg, 4, true)
        );
        assert!(make_shared_weights(&cfg, 7, 3).is_err());
    }

    #[test]
    fn map_factors_preserves_sharing() {
        let cfg = KcpConfig::uniform(vec![2, 2], vec![2, 2], 1, 1, 1).unwrap();
        let mut cell = LstmCellWeights::random_shared(&cfg, 1);
        let before = cell.factor_slots().len();
        cell.map_factors(|_, t| t.scale(2.0)).unwrap();
        assert_eq!(cell.factor_slots().len(), before);
        assert!(Arc::ptr_eq(
            cell.weight(0).a_arc(0, 1),
            cell.weight(3).a_arc(0, 1)
        ));
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let cfg = KcpConfig::uniform(vec![2], vec![2], 1, 1, 1).unwrap();
        let cell = LstmCellWeights::random_unshared(&cfg, 0);
        assert!(matches!(
            forward_sequence(&[], &cell, &LstmState::zeros(2)),
            Err(KcpError::EmptyInput(_))
        ));
    }

    #[test]
    fn bce_is_stable() {
        assert!((bce(0.0, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce(800.0, 1.0).abs() < 1e-300);
        assert!((bce(-800.0, 1.0) - 800.0).abs() < 1e-9);
    }
}
