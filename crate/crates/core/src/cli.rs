//! The `prbp` command line.
//!
//! Every command writes one JSON document to stdout. Exit codes: 0 success,
//! 1 usage error, 2 runtime failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::baseline::TurboSchedule;
use crate::channel::{Convention, NoiseSpec, PrTarget};
use crate::error::{Error, Result};
use crate::ldpc::{read_alist, CodeInfo};
use crate::oracle::tree_suite;
use crate::prbp::{write_trace_csv, LambdaMode};
use crate::sim::{
    bcjr_ops, predicted_ops, prbp_ops, resolve_fixture, sum_product_ops, sweep_with, DecoderChoice, SimConfig,
    Simulation,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "prbp", version, about = "Joint detection and LDPC decoding on partial-response channels")]
struct Cli {
    /// Worker threads for Monte Carlo trials (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Print the effective simulation configuration and exit.
    #[arg(long, global = true)]
    show_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dimensions, rate and degree profile of a code.
    CodeInfo {
        /// alist file or bundled fixture name
        code: String,
    },
    /// Transmit and decode a single random codeword.
    Decode {
        #[command(flatten)]
        sim: SimArgs,
        /// plotted SNR in dB
        #[arg(long, allow_hyphen_values = true)]
        snr: Option<f64>,
        /// write the per-iteration PR-BP trace as CSV
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Bit-error-rate sweep written as CSV plus a JSON sidecar.
    Ber {
        #[command(flatten)]
        sim: SimArgs,
        /// comma-separated plotted SNR grid in dB
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snr: Option<Vec<f64>>,
        #[arg(long)]
        min_bit_errors: Option<u64>,
        #[arg(long)]
        max_codewords: Option<u64>,
        #[arg(long)]
        batch: Option<usize>,
        /// output directory
        #[arg(long, default_value = "ber-out")]
        out: PathBuf,
        /// keep grid points already present in the output directory
        #[arg(long)]
        resume: bool,
    },
    /// Compare decoder beliefs with exhaustive enumeration on random trees.
    OracleCheck {
        #[arg(long, default_value_t = 12)]
        size: usize,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// ISI lags present in the instances
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        lags: Vec<usize>,
        /// instances without ISI nodes
        #[arg(long, conflicts_with = "lags")]
        memoryless: bool,
    },
    /// Operation counts per symbol for PR-BP, sum-product, BCJR and turbo.
    PredictOps {
        #[arg(long, default_value_t = 3)]
        q: u64,
        #[arg(long, default_value_t = 6)]
        p: u64,
        #[arg(long, default_value_t = 20)]
        iterations: usize,
        #[arg(long, default_value = "3x6")]
        schedule: TurboSchedule,
        #[arg(long, default_value = "1-D")]
        target: PrTarget,
    },
}

/// Overrides shared by `decode` and `ber`.
#[derive(Args, Debug, Default)]
struct SimArgs {
    /// JSON configuration file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// alist file or bundled fixture name
    #[arg(long)]
    code: Option<String>,
    /// PR polynomial, e.g. 1-D, 1-D^2, 1+0.5D
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    decoder: Option<DecoderChoice>,
    #[arg(long)]
    iterations: Option<usize>,
    /// turbo schedule TxS
    #[arg(long)]
    schedule: Option<TurboSchedule>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    convention: Option<Convention>,
    #[arg(long)]
    lambda: Option<LambdaMode>,
    /// plot against channel SNR (no 10 log10 R penalty)
    #[arg(long)]
    no_rate_penalty: bool,
    /// padding symbol, +1 or -1
    #[arg(long, allow_hyphen_values = true)]
    pad: Option<f64>,
}

impl SimArgs {
    fn resolve(&self) -> Result<SimConfig> {
        let mut c = match &self.config {
            Some(p) => SimConfig::from_json(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
            None => SimConfig::default(),
        };
        if let Some(v) = &self.code {
            c.code = v.clone();
        }
        if let Some(v) = &self.target {
            c.target = v.clone();
        }
        if let Some(v) = self.decoder {
            c.decoder = v;
        }
        if let Some(v) = self.iterations {
            c.iterations = v;
        }
        if let Some(v) = self.schedule {
            c.schedule = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.convention {
            c.convention = v;
        }
        if let Some(v) = self.lambda {
            c.lambda = v;
        }
        if self.no_rate_penalty {
            c.rate_penalty = false;
        }
        if let Some(v) = self.pad {
            c.pad = v;
        }
        Ok(c)
    }
}

/// `code-info` output.
#[derive(Serialize)]
pub struct CodeReport {
    pub path: String,
    #[serde(flatten)]
    pub info: CodeInfo,
}

pub fn code_info(code: &str) -> Result<CodeReport> {
    let path = resolve_fixture(code)?;
    let h = read_alist(&path)?;
    Ok(CodeReport { path: path.display().to_string(), info: h.info() })
}

#[derive(Serialize)]
struct DecodeReport {
    config: SimConfig,
    channel: String,
    snr_plot_db: f64,
    snr_channel_db: f64,
    converged: bool,
    iterations_used: usize,
    trellis_passes: usize,
    bit_errors: usize,
    transmitted: String,
    hard_bits: String,
    lambdas: Vec<f64>,
}

fn bits_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
}

fn cmd_decode(cfg: SimConfig, trace: Option<&Path>) -> Result<serde_json::Value> {
    let snr = cfg.snr_db[0];
    let sim = Simulation::new(&cfg)?;
    let snr_channel_db = sim.channel_snr(snr)?;
    let noise = NoiseSpec::from_snr_db(sim.target(), snr_channel_db);
    let (x, res) = sim.trial_detail(0, 0, &noise, trace.is_some())?;
    if let Some(p) = trace {
        let f = std::fs::File::create(p).map_err(|e| Error::io(p, e))?;
        write_trace_csv(std::io::BufWriter::new(f), &res.trace).map_err(|e| Error::io(p, e))?;
    }
    let report = DecodeReport {
        channel: sim.target().to_string(),
        snr_plot_db: snr,
        snr_channel_db,
        converged: res.converged,
        iterations_used: res.iterations_used,
        trellis_passes: res.trellis_passes,
        bit_errors: res.hard_bits.iter().zip(&x).filter(|(a, b)| a != b).count(),
        transmitted: bits_string(&x),
        hard_bits: bits_string(&res.hard_bits),
        lambdas: res.lambdas,
        config: cfg,
    };
    Ok(serde_json::to_value(report)?)
}

fn cmd_ber(cfg: SimConfig, out: &Path, resume: bool, err: &mut dyn Write) -> Result<serde_json::Value> {
    let sim = Simulation::new(&cfg)?;
    let meta = sweep_with(&sim, out, resume, |r| {
        let _ = writeln!(
            err,
            "snr {:>6.2} dB: {} codewords, {} bit errors, BER {:.3e}",
            r.snr_plot_db, r.codewords, r.bit_errors, r.ber
        );
    })?;
    Ok(serde_json::to_value(meta)?)
}

pub fn predict_ops_report(q: u64, p: u64, iterations: usize, schedule: TurboSchedule, target: &PrTarget) -> serde_json::Value {
    let lags = (1..=target.isi_len()).filter(|&l| target.autocorrelation(l) != 0.0).count() as u64;
    let states = 1u64 << target.isi_len();
    json!({
        "q": q,
        "p": p,
        "target": target.to_string(),
        "isi_per_symbol": 2 * lags,
        "trellis_states": states,
        "per_iteration": {
            "prbp": prbp_ops(q, p, 2 * lags),
            "sum_product": sum_product_ops(q, p),
            "bcjr": bcjr_ops(states),
        },
        "prbp": {
            "iterations": iterations,
            "per_symbol": predicted_ops(q, p, target, DecoderChoice::Prbp, iterations, schedule),
        },
        "sum_product": {
            "iterations": iterations,
            "per_symbol": predicted_ops(q, p, target, DecoderChoice::SumproductMemoryless, iterations, schedule),
        },
        "turbo": {
            "schedule": schedule.to_string(),
            "per_symbol": predicted_ops(q, p, target, DecoderChoice::Turbo, iterations, schedule),
        },
    })
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Target(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn execute(cli: Cli, err: &mut dyn Write) -> Result<serde_json::Value> {
    let Some(cmd) = cli.command else {
        return Ok(serde_json::to_value(SimConfig::default())?);
    };
    match cmd {
        Command::CodeInfo { code } => Ok(serde_json::to_value(code_info(&code)?)?),
        Command::Decode { sim, snr, trace } => {
            let mut cfg = sim.resolve()?;
            if let Some(s) = snr {
                cfg.snr_db = vec![s];
            }
            cfg.validate()?;
            if cli.show_config {
                return Ok(serde_json::to_value(cfg)?);
            }
            cmd_decode(cfg, trace.as_deref())
        }
        Command::Ber { sim, snr, min_bit_errors, max_codewords, batch, out, resume } => {
            let mut cfg = sim.resolve()?;
            if let Some(v) = snr {
                cfg.snr_db = v;
            }
            if let Some(v) = min_bit_errors {
                cfg.min_bit_errors = v;
            }
            if let Some(v) = max_codewords {
                cfg.max_codewords = v;
            }
            if let Some(v) = batch {
                cfg.batch = v;
            }
            cfg.validate()?;
            if cli.show_config {
                return Ok(serde_json::to_value(cfg)?);
            }
            cmd_ber(cfg, &out, resume, err)
        }
        Command::OracleCheck { size, count, seed, lags, memoryless } => {
            let lags = if memoryless { Vec::new() } else { lags };
            if lags.iter().any(|&l| l == 0) {
                return Err(Error::InvalidArgument("lags must be positive".into()));
            }
            if size == 0 || size > crate::oracle::TREE_SUITE_LIMIT {
                return Err(Error::InvalidArgument(format!(
                    "size must be in 1..={}",
                    crate::oracle::TREE_SUITE_LIMIT
                )));
            }
            Ok(serde_json::to_value(tree_suite(size, count, seed, &lags)?)?)
        }
        Command::PredictOps { q, p, iterations, schedule, target } => {
            Ok(predict_ops_report(q, p, iterations, schedule, &target))
        }
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Error::InvalidArgument("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => {
                // progress lines are buffered because the pool thread cannot borrow `err`
                let mut log = Vec::new();
                let r = pool.install(|| execute(cli, &mut log));
                let _ = err.write_all(&log);
                r
            }
            Err(e) => Err(Error::InvalidArgument(e.to_string())),
        },
        None => execute(cli, err),
    };
    match result {
        Ok(v) => {
            let text = serde_json::to_string_pretty(&v).expect("JSON values serialize");
            if writeln!(out, "{text}").is_err() {
                return EXIT_FAILURE;
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
