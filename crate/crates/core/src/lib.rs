//! Kronecker-CP (KCP) compressed weights: dense tensor substrate, the KT and
//! KCP weight formats, fast input × weight multiplication with exact
//! operation counts, complexity accounting against other tensor formats, and
//! an LSTM cell with KCP input weights.

pub mod complexity;
pub mod error;
pub mod format;
pub mod multiply;
pub mod rnn;
pub mod sample;
pub mod tensor;

pub use error::{KcpError, Result};
pub use format::{
    assemble_factor, deserialize, kt_rank_lower_bound, kt_to_kcp, matricize_rank_k, random_init,
    reconstruct_dense, reconstruct_kt_dense, serialize, FactorSet, KcpConfig, KcpWeight, KtWeight,
};
pub use multiply::count::{count_flops_naive, count_flops_relaxed, count_flops_strict};
pub use multiply::{
    multiply_backward, multiply_dense_oracle, multiply_naive, multiply_parallel, multiply_relaxed,
    multiply_strict, Gradients, MultiplyResult,
};
pub use rnn::{
    forward_sequence, lstm_step, make_shared_weights, train_toy, LstmCellWeights, LstmState,
    ToyConfig, TrainLog,
};
pub use tensor::{
    contract, kronecker, matricize, multi_index, outer, reshape, split_index, DenseTensor, Shape,
};
