//! Seeded Monte Carlo BER/WER sweeps with operation accounting.

pub mod ops;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::baseline::{turbo_equalize_with, SumProductDecoder, SumProductOptions, Trellis, TurboSchedule};
use crate::channel::{apply_rate_penalty, compute_couplings, transmit, Convention, NoiseSpec, PrTarget};
use crate::error::{Error, Result};
use crate::ldpc::{derive_generator, parse_alist, to_bipolar, GeneratorSpec, ParityCheckMatrix};
use crate::prbp::{build_graph, DecodeResult, LambdaMode, PrbpDecoder, PrbpOptions};
use crate::rng::CounterRng;

pub use ops::{bcjr_ops, prbp_ops, sum_product_ops, OpCount, OpCounter};

/// Environment variable naming an extra fixture directory.
pub const FIXTURE_DIR_ENV: &str = "PRBP_FIXTURE_DIR";

/// 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderChoice {
    #[default]
    Prbp,
    Turbo,
    /// Sum-product on the ISI-free channel `h = (1)`.
    SumproductMemoryless,
}

impl std::str::FromStr for DecoderChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prbp" => Ok(DecoderChoice::Prbp),
            "turbo" => Ok(DecoderChoice::Turbo),
            "sumproduct-memoryless" | "sumproduct" => Ok(DecoderChoice::SumproductMemoryless),
            _ => Err(Error::InvalidArgument(format!("unknown decoder {s:?}"))),
        }
    }
}

impl std::fmt::Display for DecoderChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DecoderChoice::Prbp => "prbp",
            DecoderChoice::Turbo => "turbo",
            DecoderChoice::SumproductMemoryless => "sumproduct-memoryless",
        })
    }
}

/// Everything that determines the output of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// alist path or bundled fixture name
    pub code: String,
    pub target: String,
    pub decoder: DecoderChoice,
    /// iteration cap for `prbp` and `sumproduct-memoryless`
    pub iterations: usize,
    /// `TxS` for `turbo`
    pub schedule: TurboSchedule,
    /// plotted SNR grid in dB
    pub snr_db: Vec<f64>,
    pub rate_penalty: bool,
    pub convention: Convention,
    pub lambda: LambdaMode,
    pub seed: u64,
    pub min_bit_errors: u64,
    pub max_codewords: u64,
    /// codewords per parallel batch; the stop rule is checked between batches
    pub batch: usize,
    pub pad: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            code: "code_2640_1320".into(),
            target: "1-D".into(),
            decoder: DecoderChoice::Prbp,
            iterations: 20,
            schedule: TurboSchedule { outer: 3, inner: 6 },
            snr_db: vec![3.0],
            rate_penalty: true,
            convention: Convention::Paper,
            lambda: LambdaMode::Literal,
            seed: 1,
            min_bit_errors: 100,
            max_codewords: 10_000_000,
            batch: 64,
            pad: 1.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.snr_db.is_empty() {
            return bad("snr grid is empty");
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("snr grid has a non-finite entry");
        }
        if self.min_bit_errors == 0 || self.max_codewords == 0 || self.batch == 0 {
            return bad("stop rules and batch size must be positive");
        }
        if self.iterations == 0 && self.decoder != DecoderChoice::Turbo {
            return bad("iterations must be at least 1");
        }
        if self.pad != 1.0 && self.pad != -1.0 {
            return bad("pad must be +1 or -1");
        }
        self.target.parse::<PrTarget>()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: SimConfig = serde_json::from_str(text)?;
        Ok(c)
    }

    /// The grid in ascending order.
    pub fn sorted_grid(&self) -> Vec<f64> {
        let mut g = self.snr_db.clone();
        g.sort_by(f64::total_cmp);
        g
    }
}

/// Locate a code: an existing path, then `<name>` or `<name>.alist` in
/// `$PRBP_FIXTURE_DIR`, then in the bundled fixture directory.
pub fn resolve_fixture(name: &str) -> Result<PathBuf> {
    let direct = Path::new(name);
    if direct.is_file() {
        return Ok(direct.to_path_buf());
    }
    let mut dirs = Vec::new();
    if let Some(d) = std::env::var_os(FIXTURE_DIR_ENV) {
        dirs.push(PathBuf::from(d));
    }
    dirs.push(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    for d in &dirs {
        for cand in [d.join(name), d.join(format!("{name}.alist"))] {
            if cand.is_file() {
                return Ok(cand);
            }
        }
    }
    Err(Error::io(name, std::io::Error::new(std::io::ErrorKind::NotFound, "no such code file or fixture")))
}

/// SHA-1 of `bytes` as git hashes a blob.
pub fn git_blob_sha1(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Normal interval for the bit error rate treating codewords, not bits, as
/// the independent samples. `errors[t]` is the bit error count of codeword
/// `t` and `block` its length.
///
/// With no errors at all the interval is `[0, w]` where `w` is the Wilson
/// upper bound on the word error rate, which also bounds the bit error rate.
pub fn codeword_interval(errors: &[u64], block: u64, z: f64) -> (f64, f64) {
    let n = errors.len();
    if n == 0 || block == 0 {
        return (0.0, 1.0);
    }
    if errors.iter().all(|&e| e == 0) {
        return (0.0, wilson_interval(0, n as u64, z).1);
    }
    let rates: Vec<f64> = errors.iter().map(|&e| e as f64 / block as f64).collect();
    let mean = rates.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        mean * (1.0 - mean)
    };
    let half = z * (var / n as f64).sqrt();
    ((mean - half).max(0.0), (mean + half).min(1.0))
}

/// One grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub snr_plot_db: f64,
    pub snr_channel_db: f64,
    pub codewords: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub word_errors: u64,
    pub ber: f64,
    pub wer: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub mean_iters: f64,
    pub mults_per_sym: f64,
    pub adds_per_sym: f64,
}

/// Outcome of one codeword.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrialOutcome {
    pub bit_errors: u64,
    pub iterations: u64,
    pub ops: OpCount,
}

enum Engine {
    Prbp(PrbpDecoder),
    Turbo(SumProductDecoder, Trellis, TurboSchedule),
    SumProduct(SumProductDecoder),
}

/// A loaded code and decoder ready to run trials.
pub struct Simulation {
    config: SimConfig,
    h: ParityCheckMatrix,
    generator: GeneratorSpec,
    target: PrTarget,
    engine: Engine,
    fixture_path: PathBuf,
    fixture_sha1: String,
    /// modal column and row degree
    degrees: (u64, u64),
    isi_per_symbol: u64,
}

fn modal(values: &[usize]) -> u64 {
    let mut counts = std::collections::BTreeMap::new();
    for &v in values {
        *counts.entry(v).or_insert(0usize) += 1;
    }
    counts.into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).map_or(0, |(v, _)| v as u64)
}

impl Simulation {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let path = resolve_fixture(&config.code)?;
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let text = String::from_utf8_lossy(&bytes);
        let h = parse_alist(&text)?;
        Self::with_matrix(config, h, path, git_blob_sha1(&bytes))
    }

    /// Build around an in-memory matrix (the path is informational).
    pub fn with_matrix(config: &SimConfig, h: ParityCheckMatrix, path: PathBuf, sha1: String) -> Result<Self> {
        config.validate()?;
        let target = match config.decoder {
            DecoderChoice::SumproductMemoryless => PrTarget::memoryless(),
            _ => config.target.parse()?,
        };
        let generator = derive_generator(&h);
        let engine = match config.decoder {
            DecoderChoice::Prbp => {
                let opts = PrbpOptions { max_iter: config.iterations, lambda: config.lambda, ..Default::default() };
                Engine::Prbp(PrbpDecoder::new(build_graph(&h, &target), opts))
            }
            DecoderChoice::Turbo => {
                Engine::Turbo(SumProductDecoder::new(&h), Trellis::new(&target, config.pad)?, config.schedule)
            }
            DecoderChoice::SumproductMemoryless => Engine::SumProduct(SumProductDecoder::new(&h)),
        };
        let degrees = (modal(&h.column_degrees()), modal(&h.row_degrees()));
        let lags = (1..=target.isi_len()).filter(|&p| target.autocorrelation(p) != 0.0).count() as u64;
        Ok(Simulation {
            config: config.clone(),
            h,
            generator,
            target,
            engine,
            fixture_path: path,
            fixture_sha1: sha1,
            degrees,
            isi_per_symbol: 2 * lags,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn matrix(&self) -> &ParityCheckMatrix {
        &self.h
    }

    pub fn rate(&self) -> f64 {
        self.generator.rate()
    }

    /// The channel actually simulated.
    pub fn target(&self) -> &PrTarget {
        &self.target
    }

    pub fn fixture_path(&self) -> &Path {
        &self.fixture_path
    }

    pub fn fixture_sha1(&self) -> &str {
        &self.fixture_sha1
    }

    /// Channel SNR in dB for a plotted SNR.
    pub fn channel_snr(&self, snr_plot_db: f64) -> Result<f64> {
        if self.config.rate_penalty {
            apply_rate_penalty(snr_plot_db, self.rate())
        } else {
            Ok(snr_plot_db)
        }
    }

    /// Per-symbol operation cost of a decode that ran `res`.
    fn ops_of(&self, res: &DecodeResult) -> OpCount {
        let (q, p) = self.degrees;
        let it = res.iterations_used as u64;
        match &self.engine {
            Engine::Prbp(_) => prbp_ops(q, p, self.isi_per_symbol) * it,
            Engine::Turbo(_, tr, _) => {
                let passes = res.trellis_passes as u64;
                bcjr_ops(tr.n_states() as u64) * passes + sum_product_ops(q, p) * (it - passes)
            }
            Engine::SumProduct(_) => sum_product_ops(q, p) * it,
        }
    }

    /// Decode one received block.
    pub fn decode(&self, y: &[f64], noise: &NoiseSpec) -> Result<DecodeResult> {
        let c = &self.config;
        match &self.engine {
            Engine::Prbp(dec) => {
                let cp = compute_couplings(y, &self.target, noise, c.pad, c.convention)?;
                Ok(dec.decode(&cp))
            }
            Engine::Turbo(sp, tr, sched) => turbo_equalize_with(sp, tr, y, noise.precision(c.convention), *sched),
            Engine::SumProduct(sp) => {
                let cp = compute_couplings(y, &self.target, noise, c.pad, c.convention)?;
                sp.decode(&cp.u, &SumProductOptions { max_iter: c.iterations, ..Default::default() })
            }
        }
    }

    /// Transmitted codeword and decoder output of trial `t` at grid index
    /// `snr_index`; each trial has its own random stream.
    pub fn trial_detail(&self, snr_index: usize, t: u64, noise: &NoiseSpec, trace: bool) -> Result<(Vec<u8>, DecodeResult)> {
        let mut rng = CounterRng::for_stream(self.config.seed, &[snr_index as u64, t]);
        let msg: Vec<u8> = (0..self.generator.k()).map(|_| rng.next_bit()).collect();
        let x = self.generator.encode(&msg)?;
        let y = transmit(&to_bipolar(&x), &self.target, noise, &mut rng, self.config.pad);
        let res = match (&self.engine, trace) {
            (Engine::Prbp(dec), true) => {
                let c = &self.config;
                let cp = compute_couplings(&y, &self.target, noise, c.pad, c.convention)?;
                let opts = PrbpOptions { record_trace: true, ..*dec.options() };
                PrbpDecoder::new(dec.graph().clone(), opts).decode(&cp)
            }
            _ => self.decode(&y, noise)?,
        };
        Ok((x, res))
    }

    pub fn trial(&self, snr_index: usize, t: u64, noise: &NoiseSpec) -> Result<TrialOutcome> {
        let (x, res) = self.trial_detail(snr_index, t, noise, false)?;
        let bit_errors = res.hard_bits.iter().zip(&x).filter(|(a, b)| a != b).count() as u64;
        Ok(TrialOutcome { bit_errors, iterations: res.iterations_used as u64, ops: self.ops_of(&res) })
    }

    /// Run one grid point until the stop rule fires.
    pub fn run_point(&self, snr_index: usize, snr_plot_db: f64) -> Result<BerRecord> {
        let c = &self.config;
        let snr_channel_db = self.channel_snr(snr_plot_db)?;
        let noise = NoiseSpec::from_snr_db(&self.target, snr_channel_db);
        let n = self.h.n_vars() as u64;
        let (mut words, mut bit_err, mut word_err, mut iters) = (0u64, 0u64, 0u64, 0u64);
        let mut ops = OpCount::default();
        while words < c.max_codewords && bit_err < c.min_bit_errors {
            let take = (c.batch as u64).min(c.max_codewords - words);
            let outcomes: Vec<TrialOutcome> = (words..words + take)
                .into_par_iter()
                .map(|t| self.trial(snr_index, t, &noise))
                .collect::<Result<_>>()?;
            for o in outcomes {
                bit_err += o.bit_errors;
                word_err += u64::from(o.bit_errors > 0);
                iters += o.iterations;
                ops = ops + o.ops;
            }
            words += take;
        }
        let bits = words * n;
        let (ci_lo, ci_hi) = wilson_interval(bit_err, bits, Z_95);
        Ok(BerRecord {
            snr_plot_db,
            snr_channel_db,
            codewords: words,
            bits,
            bit_errors: bit_err,
            word_errors: word_err,
            ber: bit_err as f64 / bits as f64,
            wer: word_err as f64 / words as f64,
            ci_lo,
            ci_hi,
            mean_iters: iters as f64 / words as f64,
            mults_per_sym: ops.multiplies as f64 / words as f64,
            adds_per_sym: ops.adds as f64 / words as f64,
        })
    }
}

/// Closed-form per-symbol operation count of a whole decode on a
/// `(q, p)`-regular code: `iterations` PR-BP or sum-product iterations, or
/// the full turbo schedule.
pub fn predicted_ops(
    q: u64,
    p: u64,
    target: &PrTarget,
    decoder: DecoderChoice,
    iterations: usize,
    schedule: TurboSchedule,
) -> OpCount {
    let lags = (1..=target.isi_len()).filter(|&l| target.autocorrelation(l) != 0.0).count() as u64;
    match decoder {
        DecoderChoice::Prbp => prbp_ops(q, p, 2 * lags) * iterations as u64,
        DecoderChoice::SumproductMemoryless => sum_product_ops(q, p) * iterations as u64,
        DecoderChoice::Turbo => {
            let states = 1u64 << target.isi_len();
            (bcjr_ops(states) + sum_product_ops(q, p) * schedule.inner as u64) * schedule.outer as u64
        }
    }
}

/// Run one instrumented decode (no early stopping) of a random codeword at
/// 3 dB and return the modal per-symbol operation count.
pub fn measure_ops(
    h: &ParityCheckMatrix,
    target: &PrTarget,
    decoder: DecoderChoice,
    iterations: usize,
    schedule: TurboSchedule,
    seed: u64,
) -> Result<OpCount> {
    let target = match decoder {
        DecoderChoice::SumproductMemoryless => PrTarget::memoryless(),
        _ => target.clone(),
    };
    let gen = derive_generator(h);
    let mut rng = CounterRng::for_stream(seed, &[0x0b5]);
    let msg: Vec<u8> = (0..gen.k()).map(|_| rng.next_bit()).collect();
    let x = gen.encode(&msg)?;
    let noise = NoiseSpec::from_snr_db(&target, 3.0);
    let y = transmit(&to_bipolar(&x), &target, &noise, &mut rng, 1.0);
    let cp = compute_couplings(&y, &target, &noise, 1.0, Convention::Paper)?;
    let run = match decoder {
        DecoderChoice::Prbp => ops::prbp_run_counted(&build_graph(h, &target), &cp, iterations),
        DecoderChoice::SumproductMemoryless => {
            ops::sum_product_run_counted(&build_graph(h, &PrTarget::memoryless()), &cp.u, iterations)
        }
        DecoderChoice::Turbo => ops::turbo_run_counted(
            &build_graph(h, &PrTarget::memoryless()),
            &Trellis::new(&target, 1.0)?,
            &y,
            cp.precision,
            schedule.outer,
            schedule.inner,
        ),
    };
    Ok(run.ops.modal())
}

/// JSON sidecar of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub config: SimConfig,
    pub seed: u64,
    pub fixture: FixtureInfo,
    pub channel: String,
    pub rate: f64,
    pub complete: bool,
    pub records: Vec<BerRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureInfo {
    pub path: String,
    pub git_sha1: String,
}

pub const CSV_FILE: &str = "ber.csv";
pub const JSON_FILE: &str = "ber.json";

fn write_outputs(dir: &Path, meta: &SweepMeta) -> Result<()> {
    let csv_path = dir.join(CSV_FILE);
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &meta.records {
        w.serialize(r).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    if meta.records.is_empty() {
        w.write_record(CSV_HEADER).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    write_atomic(&csv_path, &bytes)?;
    let json = serde_json::to_vec_pretty(meta)?;
    write_atomic(&dir.join(JSON_FILE), &json)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub const CSV_HEADER: [&str; 13] = [
    "snr_plot_db",
    "snr_channel_db",
    "codewords",
    "bits",
    "bit_errors",
    "word_errors",
    "ber",
    "wer",
    "ci_lo",
    "ci_hi",
    "mean_iters",
    "mults_per_sym",
    "adds_per_sym",
];

/// Run every grid point in ascending SNR, rewriting `ber.csv` and
/// `ber.json` in `dir` after each one. With `resume`, points already in an
/// existing sidecar with the same configuration are kept.
pub fn sweep(config: &SimConfig, dir: &Path, resume: bool) -> Result<SweepMeta> {
    let sim = Simulation::new(config)?;
    sweep_with(&sim, dir, resume, |_| {})
}

/// [`sweep`] on a prepared simulation, calling `progress` after each point.
pub fn sweep_with(sim: &Simulation, dir: &Path, resume: bool, mut progress: impl FnMut(&BerRecord)) -> Result<SweepMeta> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let config = sim.config();
    let mut meta = SweepMeta {
        config: config.clone(),
        seed: config.seed,
        fixture: FixtureInfo {
            path: sim.fixture_path().display().to_string(),
            git_sha1: sim.fixture_sha1().to_string(),
        },
        channel: sim.target().to_string(),
        rate: sim.rate(),
        complete: false,
        records: Vec::new(),
    };
    let json_path = dir.join(JSON_FILE);
    if resume && json_path.is_file() {
        let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
        let old: SweepMeta = serde_json::from_str(&text)?;
        let same_config = SimConfig { snr_db: Vec::new(), ..old.config.clone() }
            == SimConfig { snr_db: Vec::new(), ..meta.config.clone() };
        if !same_config || old.fixture.git_sha1 != meta.fixture.git_sha1 {
            return Err(Error::InvalidArgument(format!(
                "{} was written by a different configuration",
                json_path.display()
            )));
        }
        // a point's random streams depend on its grid position, so only a
        // prefix of the new grid can be reused
        let grid = config.sorted_grid();
        let prefix = old.records.len() <= grid.len()
            && old.records.iter().zip(&grid).all(|(r, &s)| r.snr_plot_db == s);
        if !prefix {
            return Err(Error::InvalidArgument(format!(
                "{}: stored SNR points are not a prefix of the new grid",
                json_path.display()
            )));
        }
        meta.records = old.records;
    }
    let grid = config.sorted_grid();
    for (k, &snr) in grid.iter().enumerate().skip(meta.records.len()) {
        let rec = sim.run_point(k, snr)?;
        progress(&rec);
        meta.records.push(rec);
        meta.complete = meta.records.len() == grid.len();
        write_outputs(dir, &meta)?;
    }
    meta.complete = true;
    write_outputs(dir, &meta)?;
    Ok(meta)
}
