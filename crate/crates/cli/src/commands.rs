use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::time::Instant;

use kcp_core::complexity::{
    compression_ratio, figure4_curves, kcp_not_minimal, kcp_param_count, lstm_cell_flops,
    paper_entries, ratio_matches, UCF11_M, UCF11_N, UCF50_M, UCF50_N,
};
use kcp_core::sample::{random_tensor, random_weight};
use kcp_core::{
    deserialize, multiply_parallel, multiply_strict, random_init, serialize, train_toy, KcpConfig,
    KcpError, ToyConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::args::{
    Cli, Command, CurvesArgs, ShapeArgs, TablesArgs, TimingArgs, TrainArgs, VerifyArgs,
};
use crate::suites::{verify_all, Budget, Poison};

/// Accuracy `train-toy` must reach for a zero exit code.
pub const TOY_ACCURACY_TARGET: f64 = 0.9;

/// Default timing grid: log-spaced CP ranks over 2..100.
pub const DEFAULT_TIMING_GRID: [usize; 7] = [2, 4, 8, 16, 32, 64, 100];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Kcp(#[from] KcpError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Kcp(KcpError::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }
}

/// What a command produced: the report body and whether every check passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub body: String,
    /// Human-readable summary for stderr.
    pub summary: Vec<String>,
    pub ok: bool,
}

impl Report {
    fn ok(body: String) -> Self {
        Self {
            body,
            summary: Vec::new(),
            ok: true,
        }
    }
}

fn config_from(shape: &ShapeArgs) -> Result<KcpConfig, CliError> {
    let (Some(m), Some(n), Some(r)) = (&shape.shape_in, &shape.shape_out, &shape.ranks) else {
        return Err(CliError::Usage(
            "--shape-in, --shape-out and --ranks are all required".into(),
        ));
    };
    if r.len() != 3 {
        return Err(CliError::Usage(format!(
            "--ranks takes K,CA,CB, got {} values",
            r.len()
        )));
    }
    Ok(KcpConfig::uniform(m.clone(), n.clone(), r[0], r[1], r[2])?)
}

fn any_shape(shape: &ShapeArgs) -> bool {
    shape.shape_in.is_some() || shape.shape_out.is_some() || shape.ranks.is_some()
}

/// Runs one command. Binary outputs (weight files) are written directly;
/// text reports are returned for the caller to route.
pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    if cli.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    match &cli.command {
        Command::Verify(a) => verify(cli.seed, a),
        Command::Tables(a) => tables(a),
        Command::Curves(a) => curves(a),
        Command::Timing(a) => timing(cli.seed, cli.workers, a),
        Command::TrainToy(a) => train(cli.seed, a),
        Command::InitWeight(a) => {
            let cfg = config_from(&a.shape)?;
            let Some(path) = &cli.out else {
                return Err(CliError::Usage("init-weight needs --out <path>".into()));
            };
            let bytes = serialize(&random_init(&cfg, cli.seed));
            fs::write(path, &bytes)?;
            Ok(Report {
                body: String::new(),
                summary: vec![format!("wrote {} bytes to {}", bytes.len(), path.display())],
                ok: true,
            })
        }
        Command::InspectWeight(a) => inspect(&fs::read(&a.path)?),
    }
}

/// Executes and routes output: the report body to `--out` (or `stdout`),
/// summary lines to `stderr`. Returns the process exit code.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8 {
    match execute(cli) {
        Ok(report) => {
            let routed = match (&cli.out, &cli.command) {
                (_, Command::InitWeight(_)) => Ok(()),
                (Some(path), _) => fs::write(path, &report.body),
                (None, _) => stdout.write_all(report.body.as_bytes()),
            };
            if let Err(e) = routed {
                let _ = writeln!(stderr, "error: i/o: {e}");
                return 1;
            }
            for line in &report.summary {
                let _ = writeln!(stderr, "{line}");
            }
            if report.ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn verify(seed: u64, a: &VerifyArgs) -> Result<Report, CliError> {
    let budget = Budget {
        oracle: a.trials,
        ..Budget::default()
    };
    let poison = if a.poison {
        Poison::FactorEntry
    } else {
        Poison::None
    };
    let outcomes = verify_all(seed, budget, poison);
    let mut body = String::new();
    for o in &outcomes {
        writeln!(body, "{}", o.line()).expect("string write");
        for note in &o.notes {
            writeln!(body, "NOTE {}: {note}", o.name).expect("string write");
        }
    }
    let failed = outcomes.iter().filter(|o| !o.passed()).count();
    let elapsed: f64 = outcomes.iter().map(|o| o.elapsed.as_secs_f64()).sum();
    Ok(Report {
        body,
        summary: vec![format!(
            "{} properties, {failed} failed (seed {seed}, {elapsed:.2}s)",
            outcomes.len()
        )],
        ok: failed == 0,
    })
}

pub const TABLES_HEADER: &str = "dataset,ranks,sharing,params,paper_params,params_match,compression_ratio,paper_ratio,ratio_match,mflops,paper_mflops";

pub fn tables(a: &TablesArgs) -> Result<Report, CliError> {
    let mut body = String::from(TABLES_HEADER);
    body.push('\n');
    let mut summary = Vec::new();
    if any_shape(&a.shape) {
        if a.gates == 0 {
            return Err(CliError::Usage("--gates must be at least 1".into()));
        }
        let cfg = config_from(&a.shape)?;
        let dense = a.gates * cfg.input_size() as u64 * cfg.output_size() as u64;
        let params = kcp_param_count(&cfg, a.gates, a.sharing);
        let ratio = compression_ratio(&cfg, a.gates, a.sharing, dense)?;
        let r = &a.shape.ranks.as_ref().expect("checked by config_from");
        writeln!(
            body,
            "custom,\"({},{},{})\",{},{params},,,{ratio:.1},,,{:.1},",
            r[0],
            r[1],
            r[2],
            a.sharing,
            lstm_cell_flops(&cfg) as f64 / 1e6
        )
        .expect("string write");
        return Ok(Report::ok(body));
    }
    for e in paper_entries() {
        let cfg = e.config();
        let params = kcp_param_count(&cfg, 4, e.sharing);
        let ratio = compression_ratio(&cfg, 4, e.sharing, e.dense_params())?;
        let params_match = params == e.params;
        let ratio_match = ratio_matches(ratio, e.ratio);
        if !params_match {
            summary.push(format!(
                "mismatch: {} {} sharing={} params {params} vs published {}",
                e.dataset,
                e.rank_triple(),
                e.sharing,
                e.params
            ));
        }
        writeln!(
            body,
            "{},\"{}\",{},{params},{},{},{ratio:.1},{},{},{:.1},{:.1}",
            e.dataset,
            e.rank_triple(),
            e.sharing,
            e.params,
            if params_match { "match" } else { "mismatch" },
            e.ratio,
            if ratio_match { "match" } else { "mismatch" },
            lstm_cell_flops(&cfg) as f64 / 1e6,
            e.mflops
        )
        .expect("string write");
    }
    Ok(Report {
        body,
        summary,
        ok: true,
    })
}

pub fn curves(a: &CurvesArgs) -> Result<Report, CliError> {
    if a.r_min == 0 || a.r_min > a.r_max {
        return Err(CliError::Usage(format!(
            "empty rank sweep {}..={}",
            a.r_min, a.r_max
        )));
    }
    if a.d == 0 || a.m == 0 || a.n == 0 || a.p == 0 || a.k == 0 {
        return Err(CliError::Usage("d, m, n, p and k must be positive".into()));
    }
    let rows = figure4_curves(a.d, a.m, a.n, a.r_min..=a.r_max, a.p, a.k);
    let mut body = String::from("r,format,params,flops\n");
    for r in &rows {
        writeln!(body, "{},{},{},{}", r.r, r.format, r.params, r.flops).expect("string write");
    }
    let bad = kcp_not_minimal(&rows, a.minimal_from);
    let summary = if bad.is_empty() {
        format!(
            "KCP has the fewest params and flops at every r >= {}",
            a.minimal_from
        )
    } else {
        format!("KCP is not the cheapest format at r = {bad:?}")
    };
    Ok(Report {
        body,
        summary: vec![summary],
        ok: bad.is_empty(),
    })
}

/// A registered timing shape: modes and KT rank of one input layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimingShape {
    pub name: &'static str,
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub k: usize,
}

pub fn timing_shapes() -> Vec<TimingShape> {
    vec![
        TimingShape {
            name: "ucf11",
            m: UCF11_M.to_vec(),
            n: UCF11_N.to_vec(),
            k: 4,
        },
        TimingShape {
            name: "ucf50",
            m: UCF50_M.to_vec(),
            n: UCF50_N.to_vec(),
            k: 6,
        },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub shape: &'static str,
    pub c: usize,
    pub serial_ms: f64,
    pub parallel_ms: f64,
}

impl TimingRow {
    pub fn speedup(&self) -> f64 {
        self.serial_ms / self.parallel_ms
    }
}

fn best_ms(repeats: usize, mut f: impl FnMut() -> kcp_core::Result<()>) -> kcp_core::Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..repeats {
        let start = Instant::now();
        f()?;
        best = best.min(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(best)
}

/// Best-of-`repeats` wall clock of the strict and parallel products at
/// `CA = CB = c`.
pub fn time_point(
    shape: &TimingShape,
    c: usize,
    workers: usize,
    repeats: usize,
    seed: u64,
) -> Result<TimingRow, CliError> {
    let cfg = KcpConfig::uniform(shape.m.clone(), shape.n.clone(), shape.k, c, c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ c as u64);
    let w = random_weight(&mut rng, &cfg);
    let x = random_tensor(&mut rng, cfg.m());
    let serial_ms = best_ms(repeats, || multiply_strict(&x, &w).map(drop))?;
    let parallel_ms = best_ms(repeats, || multiply_parallel(&x, &w, workers).map(drop))?;
    Ok(TimingRow {
        shape: shape.name,
        c,
        serial_ms,
        parallel_ms,
    })
}

pub fn timing(seed: u64, workers: usize, a: &TimingArgs) -> Result<Report, CliError> {
    if a.repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let grid = a
        .grid
        .clone()
        .unwrap_or_else(|| DEFAULT_TIMING_GRID.to_vec());
    if grid.contains(&0) {
        return Err(CliError::Usage("timing grid ranks must be positive".into()));
    }
    let shapes: Vec<_> = timing_shapes()
        .into_iter()
        .filter(|t| {
            a.shape
                .as_deref()
                .is_none_or(|s| s.eq_ignore_ascii_case(t.name))
        })
        .collect();
    if shapes.is_empty() {
        return Err(CliError::Usage(format!(
            "unknown shape {:?}; use ucf11 or ucf50",
            a.shape
        )));
    }
    let mut body = String::from("shape,c,serial_ms,parallel_ms,speedup\n");
    for shape in &shapes {
        for &c in &grid {
            let row = time_point(shape, c, workers, a.repeats, seed)?;
            writeln!(
                body,
                "{},{},{:.3},{:.3},{:.3}",
                row.shape,
                row.c,
                row.serial_ms,
                row.parallel_ms,
                row.speedup()
            )
            .expect("string write");
        }
    }
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    Ok(Report {
        body,
        summary: vec![format!(
            "{workers} worker threads in one process, {threads} hardware threads available; timings are informational"
        )],
        ok: true,
    })
}

pub fn train(seed: u64, a: &TrainArgs) -> Result<Report, CliError> {
    let cfg = ToyConfig {
        seed,
        epochs: a.epochs,
        lr: a.lr,
        sequences: a.sequences,
        length: a.length,
        batch: a.batch,
    };
    let log = train_toy(&cfg)?;
    let acc = log.final_accuracy().unwrap_or(0.0);
    let ok = acc >= TOY_ACCURACY_TARGET;
    Ok(Report {
        body: log.to_csv(),
        summary: vec![format!(
            "final train accuracy {acc:.4} after {} epochs (target {TOY_ACCURACY_TARGET})",
            log.rows.len()
        )],
        ok,
    })
}

pub fn inspect(bytes: &[u8]) -> Result<Report, CliError> {
    let w = deserialize(bytes)?;
    let cfg = w.config();
    let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    let dense = cfg.input_size() as u64 * cfg.output_size() as u64;
    let mut body = String::from("field,value\n");
    for (field, value) in [
        ("order", cfg.order().to_string()),
        ("kt_rank", cfg.kt_rank().to_string()),
        ("shape_in", list(cfg.m())),
        ("shape_out", list(cfg.n())),
        ("rank_a", list(cfg.ca())),
        ("rank_b", list(cfg.cb())),
        ("stored_scalars", cfg.stored_scalars().to_string()),
        ("dense_params", dense.to_string()),
        (
            "compression_ratio",
            format!("{:.3}", dense as f64 / cfg.stored_scalars() as f64),
        ),
        (
            "max_abs",
            format!(
                "{:e}",
                w.flat_factors().iter().fold(0.0f64, |m, v| m.max(v.abs()))
            ),
        ),
    ] {
        writeln!(body, "{field},{value}").expect("string write");
    }
    Ok(Report::ok(body))
}
