//! Parameter and operation accounting for KCP and competing tensor formats.
//!
//! The comparison formulas for TT, BT, TR, HT and KCP are order expressions
//! evaluated with unit constants and with `m`, `n` taken as the largest mode
//! size; they are comparison curves. Exact counts exist only for KCP
//! ([`kcp_param_count`] and the multiplication counters).

use std::fmt;

use crate::error::{KcpError, Result};
use crate::format::KcpConfig;
use crate::multiply::count::count_flops_strict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Ori,
    TT,
    BT,
    TR,
    HT,
    KCP,
}

impl Format {
    /// The compressed formats, in reporting order.
    pub const COMPRESSED: [Format; 5] =
        [Format::TT, Format::BT, Format::TR, Format::HT, Format::KCP];

    pub fn name(self) -> &'static str {
        match self {
            Format::Ori => "Ori",
            Format::TT => "TT",
            Format::BT => "BT",
            Format::TR => "TR",
            Format::HT => "HT",
            Format::KCP => "KCP",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Inputs of the comparison formulas. `r` is the format rank (for KCP the
/// common CP rank of both factor tensors), `p` the BT block count and `k`
/// the KT rank; each format reads only the fields it needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormatSpec {
    pub format: Format,
    pub d: u32,
    pub m: u64,
    pub n: u64,
    pub r: u64,
    pub p: u64,
    pub k: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityReport {
    pub params: u64,
    pub flops: u64,
    pub compression_ratio: f64,
}

fn sat(v: u128) -> u64 {
    v.min(u64::MAX as u128) as u64
}

fn pow(base: u64, exp: u32) -> u128 {
    (base as u128).saturating_pow(exp)
}

/// Storage of a weight with mode sizes `m`, `n` in the given format.
pub fn table1_space(spec: &FormatSpec) -> u64 {
    let FormatSpec {
        d, m, n, r, p, k, ..
    } = *spec;
    let (m, n, r, p, k) = (m as u128, n as u128, r as u128, p as u128, k as u128);
    let dd = d as u128;
    sat(match spec.format {
        Format::Ori => pow((m * n) as u64, d),
        Format::TT => dd.saturating_sub(2) * m * n * r * r + 2 * m * n * r,
        Format::BT => (dd * m * n * r + pow(r as u64, d)) * p,
        Format::TR => dd * (m + n) * r * r,
        Format::HT => dd.saturating_sub(1) * r * r * r + dd * m * n * r,
        Format::KCP => dd * (m + n) * r * k,
    })
}

/// Operations of one input × weight product in the given format.
pub fn table1_flops(spec: &FormatSpec) -> u64 {
    let FormatSpec {
        d, m, n, r, p, k, ..
    } = *spec;
    let s = m.max(n);
    let dd = d as u128;
    sat(match spec.format {
        Format::Ori => pow(m * n, d),
        Format::TT => dd * pow(s, d + 1) * (r as u128).pow(2),
        Format::BT => (dd * pow(s, d + 1) + pow(n, d)) * pow(r, d) * p as u128,
        Format::TR => dd * (pow(m, d) + pow(n, d)) * (r as u128).pow(3),
        Format::HT => {
            let rank_term = (r as f64).powf(1.0 + (d as f64).log2()).round() as u128;
            (2 * dd - 1) * pow(s, d + 1) * rank_term
        }
        Format::KCP => dd * pow(s, d) * (r as u128 + (r as u128).pow(2)) * k as u128,
    })
}

/// Stored KCP scalars for `gates` input matrices. With sharing, only the
/// mode-1 factors (`A_k^(1)` and `B_k^(1)`) are per gate; the rest are stored once.
pub fn kcp_param_count(config: &KcpConfig, gates: u64, sharing: bool) -> u64 {
    let mode = |i: usize| -> u64 {
        (0..config.kt_rank())
            .map(|k| (config.m()[i] * config.ca()[k] + config.n()[i] * config.cb()[k]) as u64)
            .sum()
    };
    let all: u64 = (0..config.order()).map(mode).sum();
    if sharing {
        gates * mode(0) + (all - mode(0))
    } else {
        gates * all
    }
}

/// `dense_params / kcp_param_count`.
pub fn compression_ratio(
    config: &KcpConfig,
    gates: u64,
    sharing: bool,
    dense_params: u64,
) -> Result<f64> {
    if dense_params == 0 {
        return Err(KcpError::DivisionByZero("dense parameter count is 0"));
    }
    let params = kcp_param_count(config, gates, sharing);
    if params == 0 {
        return Err(KcpError::DivisionByZero("compressed parameter count is 0"));
    }
    Ok(dense_params as f64 / params as f64)
}

/// Parameters, input-product operations (strict path, one per gate) and
/// compression ratio against `gates` dense `M × N` matrices.
pub fn kcp_report(config: &KcpConfig, gates: u64, sharing: bool) -> Result<ComplexityReport> {
    let dense = gates * config.input_size() as u64 * config.output_size() as u64;
    Ok(ComplexityReport {
        params: kcp_param_count(config, gates, sharing),
        flops: gates * count_flops_strict(config),
        compression_ratio: compression_ratio(config, gates, sharing, dense)?,
    })
}

/// Operations of one LSTM step with KCP input weights under this crate's
/// counting: four strict input products, four dense `H × H` recurrent
/// products, the gate sums (`Wx + Uh + b`), one operation per nonlinearity,
/// and the cell and hidden updates.
pub fn lstm_cell_flops(config: &KcpConfig) -> u64 {
    let h = config.output_size() as u64;
    let input = 4 * count_flops_strict(config);
    let recurrent = 4 * h * (2 * h - 1);
    let gate_sums = 4 * 2 * h;
    let nonlinear = 4 * h + h;
    let updates = 3 * h + h;
    input + recurrent + gate_sums + nonlinear + updates
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurveRow {
    pub r: u64,
    pub format: Format,
    pub params: u64,
    pub flops: u64,
}

/// Space and operation curves of the compressed formats over a rank sweep,
/// one row per `(r, format)`.
pub fn figure4_curves(
    d: u32,
    m: u64,
    n: u64,
    ranks: impl IntoIterator<Item = u64>,
    p: u64,
    k: u64,
) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for r in ranks {
        for format in Format::COMPRESSED {
            let spec = FormatSpec {
                format,
                d,
                m,
                n,
                r,
                p,
                k,
            };
            rows.push(CurveRow {
                r,
                format,
                params: table1_space(&spec),
                flops: table1_flops(&spec),
            });
        }
    }
    rows
}

/// For each rank in `rows` at or above `from_r`, whether KCP is strictly
/// smallest in both columns. Returns the ranks where it is not.
pub fn kcp_not_minimal(rows: &[CurveRow], from_r: u64) -> Vec<u64> {
    let mut bad = Vec::new();
    let mut ranks: Vec<u64> = rows
        .iter()
        .map(|row| row.r)
        .filter(|&r| r >= from_r)
        .collect();
    ranks.dedup();
    for r in ranks {
        let at: Vec<&CurveRow> = rows.iter().filter(|row| row.r == r).collect();
        let Some(kcp) = at.iter().find(|row| row.format == Format::KCP) else {
            bad.push(r);
            continue;
        };
        let minimal = at
            .iter()
            .filter(|row| row.format != Format::KCP)
            .all(|row| kcp.params < row.params && kcp.flops < row.flops);
        if !minimal {
            bad.push(r);
        }
    }
    bad
}

/// KT rank that gives KCP the same storage as a BT weight with `p` blocks
/// (kernel excluded): `mn/(m+n)·p`, which is at least `p` when `m, n ≥ 2`.
pub fn bt_rank_parity(m: u64, n: u64, p: u64) -> f64 {
    (m * n) as f64 / (m + n) as f64 * p as f64
}

/// One published weight configuration with its reported figures.
#[derive(Debug, Clone, PartialEq)]
pub struct PaperEntry {
    pub dataset: &'static str,
    pub m: [usize; 4],
    pub n: [usize; 4],
    pub k: usize,
    pub ca: usize,
    pub cb: usize,
    pub sharing: bool,
    pub params: u64,
    pub ratio: u64,
    pub mflops: f64,
}

impl PaperEntry {
    pub fn config(&self) -> KcpConfig {
        KcpConfig::uniform(self.m.to_vec(), self.n.to_vec(), self.k, self.ca, self.cb)
            .expect("registry shapes are valid")
    }

    /// Dense parameter count of the four gate matrices.
    pub fn dense_params(&self) -> u64 {
        4 * self.m.iter().product::<usize>() as u64 * self.n.iter().product::<usize>() as u64
    }

    pub fn rank_triple(&self) -> String {
        format!("({},{},{})", self.k, self.ca, self.cb)
    }
}

pub const UCF11_M: [usize; 4] = [8, 20, 20, 18];
pub const UCF11_N: [usize; 4] = [4, 4, 4, 4];
pub const YCF_M: [usize; 4] = [4, 20, 20, 36];
pub const YCF_N: [usize; 4] = [4, 4, 4, 4];
pub const UCF50_M: [usize; 4] = [15, 16, 16, 15];
pub const UCF50_N: [usize; 4] = [8, 6, 6, 8];

/// The published LSTM configurations, without and with weights sharing.
pub fn paper_entries() -> Vec<PaperEntry> {
    let e = |dataset, m, n, (k, ca, cb), sharing, params, ratio, mflops| PaperEntry {
        dataset,
        m,
        n,
        k,
        ca,
        cb,
        sharing,
        params,
        ratio,
        mflops,
    };
    vec![
        e(
            "UCF11",
            UCF11_M,
            UCF11_N,
            (4, 4, 2),
            false,
            4_736,
            12_454,
            73.1,
        ),
        e(
            "UCF11",
            UCF11_M,
            UCF11_N,
            (4, 2, 2),
            false,
            2_624,
            22_478,
            37.9,
        ),
        e("YCF", YCF_M, YCF_N, (4, 4, 2), false, 5_632, 10_473, 122.4),
        e("YCF", YCF_M, YCF_N, (4, 2, 2), false, 3_072, 19_200, 63.1),
        e(
            "UCF50",
            UCF50_M,
            UCF50_N,
            (6, 4, 4),
            false,
            8_640,
            61_440,
            336.8,
        ),
        e(
            "UCF50",
            UCF50_M,
            UCF50_N,
            (6, 4, 2),
            false,
            7_296,
            72_758,
            252.0,
        ),
        e(
            "UCF50",
            UCF50_M,
            UCF50_N,
            (6, 2, 2),
            false,
            4_320,
            122_880,
            191.8,
        ),
        e(
            "UCF11",
            UCF11_M,
            UCF11_N,
            (4, 4, 2),
            true,
            1_664,
            35_446,
            52.6,
        ),
        e(
            "UCF11",
            UCF11_M,
            UCF11_N,
            (4, 2, 2),
            true,
            994,
            59_338,
            27.2,
        ),
        e("YCF", YCF_M, YCF_N, (4, 4, 2), true, 1_696, 34_777, 81.6),
        e("YCF", YCF_M, YCF_N, (4, 2, 2), true, 960, 61_440, 41.9),
        e(
            "UCF50",
            UCF50_M,
            UCF50_N,
            (6, 4, 4),
            true,
            3_816,
            139_109,
            257.8,
        ),
        e(
            "UCF50",
            UCF50_M,
            UCF50_N,
            (6, 4, 2),
            true,
            3_192,
            166_304,
            210.1,
        ),
        e(
            "UCF50",
            UCF50_M,
            UCF50_N,
            (6, 2, 2),
            true,
            1_908,
            278_219,
            169.3,
        ),
    ]
}

/// Whether a computed ratio agrees with a published whole number: the
/// published tables mix rounding and truncation, so one unit of slack is
/// allowed after truncating ours.
pub fn ratio_matches(ours: f64, published: u64) -> bool {
    (ours.trunc() as i64 - published as i64).abs() <= 1
}
