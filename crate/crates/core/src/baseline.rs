//! Reference decoders: memoryless sum-product, BCJR on the partial-response
//! trellis, and turbo equalization alternating the two.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::PrTarget;
use crate::error::{Error, Result};
use crate::ldpc::ParityCheckMatrix;
use crate::numerics::{atanh_clamped, leave_one_out_products, log_add, tanh_clamped};
use crate::prbp::DecodeResult;

/// Flooding sum-product on a Tanner graph, messages stored check-major.
#[derive(Clone, Debug)]
pub struct SumProductDecoder {
    h: ParityCheckMatrix,
    check_ptr: Vec<usize>,
    edge_var: Vec<usize>,
    var_edges: Vec<Vec<usize>>,
}

/// Variable-to-check and check-to-variable messages, check-major edge order.
#[derive(Clone, Debug, PartialEq)]
pub struct SumProductState {
    pub v2c: Vec<f64>,
    pub c2v: Vec<f64>,
    pub iteration: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct SumProductOptions {
    pub max_iter: usize,
    pub early_stop: bool,
    pub record_lambdas: bool,
}

impl Default for SumProductOptions {
    fn default() -> Self {
        SumProductOptions { max_iter: 20, early_stop: true, record_lambdas: false }
    }
}

impl SumProductDecoder {
    pub fn new(h: &ParityCheckMatrix) -> Self {
        let mut check_ptr = vec![0];
        let mut edge_var = Vec::new();
        let mut var_edges = vec![Vec::new(); h.n_vars()];
        for row in h.check_rows() {
            for &i in row {
                var_edges[i].push(edge_var.len());
                edge_var.push(i);
            }
            check_ptr.push(edge_var.len());
        }
        SumProductDecoder { h: h.clone(), check_ptr, edge_var, var_edges }
    }

    pub fn matrix(&self) -> &ParityCheckMatrix {
        &self.h
    }

    /// Fresh state: every outgoing message equals its channel field.
    pub fn initial_state(&self, llr: &[f64]) -> SumProductState {
        SumProductState {
            v2c: self.edge_var.iter().map(|&i| llr[i]).collect(),
            c2v: vec![0.0; self.edge_var.len()],
            iteration: 0,
        }
    }

    /// One iteration: variable update from the previous check messages, then
    /// new check messages.
    pub fn step(&self, llr: &[f64], st: &mut SumProductState) {
        if st.iteration > 0 {
            for (i, edges) in self.var_edges.iter().enumerate() {
                let total: f64 = edges.iter().map(|&e| st.c2v[e]).sum();
                for &e in edges {
                    st.v2c[e] = llr[i] + (total - st.c2v[e]);
                }
            }
        }
        let mut t = Vec::new();
        let mut loo = Vec::new();
        for w in self.check_ptr.windows(2) {
            let r = w[0]..w[1];
            t.clear();
            t.extend(st.v2c[r.clone()].iter().map(|&v| tanh_clamped(v)));
            loo.resize(t.len(), 0.0);
            leave_one_out_products(&t, &mut loo);
            for (e, &p) in r.zip(&loo) {
                st.c2v[e] = atanh_clamped(p);
            }
        }
        st.iteration += 1;
    }

    /// Posterior fields `llr_i + sum of incoming check messages`.
    pub fn posteriors(&self, llr: &[f64], st: &SumProductState) -> Vec<f64> {
        self.var_edges
            .iter()
            .zip(llr)
            .map(|(edges, &l)| l + edges.iter().map(|&e| st.c2v[e]).sum::<f64>())
            .collect()
    }

    pub fn decode(&self, llr: &[f64], opts: &SumProductOptions) -> Result<DecodeResult> {
        let n = self.h.n_vars();
        if llr.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: llr.len() });
        }
        let mut st = self.initial_state(llr);
        let mut res = DecodeResult::default();
        let mut lambdas = llr.to_vec();
        let mut bits = hard_decision(&lambdas);
        let mut ok = self.h.is_codeword(&bits);
        for _ in 0..opts.max_iter {
            self.step(llr, &mut st);
            lambdas = self.posteriors(llr, &st);
            bits = hard_decision(&lambdas);
            ok = self.h.is_codeword(&bits);
            if opts.record_lambdas {
                res.lambda_trace.push(lambdas.clone());
            }
            if opts.early_stop && ok {
                break;
            }
        }
        res.iterations_used = st.iteration;
        res.converged = ok;
        res.hard_bits = bits;
        res.lambdas = lambdas;
        Ok(res)
    }
}

/// Bit 0 for a nonnegative field, bit 1 otherwise.
pub fn hard_decision(fields: &[f64]) -> Vec<u8> {
    fields.iter().map(|&l| u8::from(l < 0.0)).collect()
}

/// Memoryless sum-product with early stopping.
pub fn sum_product_decode(h: &ParityCheckMatrix, llr: &[f64], max_iter: usize) -> Result<DecodeResult> {
    SumProductDecoder::new(h).decode(llr, &SumProductOptions { max_iter, ..Default::default() })
}

/// Trellis of the partial-response channel with known padding symbols.
///
/// State bit `k` is set when the symbol `k + 1` steps in the past is -1.
#[derive(Clone, Debug)]
pub struct Trellis {
    target: PrTarget,
    pad: f64,
    outputs: Vec<[f64; 2]>,
}

/// One trellis transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub input: f64,
    pub to: usize,
    pub output: f64,
}

fn sym(bit: usize) -> f64 {
    if bit == 1 {
        -1.0
    } else {
        1.0
    }
}

fn bit_of(x: f64) -> usize {
    usize::from(x < 0.0)
}

impl Trellis {
    pub fn new(target: &PrTarget, pad: f64) -> Result<Self> {
        if pad != 1.0 && pad != -1.0 {
            return Err(Error::InvalidArgument(format!("padding symbol must be +1 or -1, got {pad}")));
        }
        let l = target.isi_len();
        if l > 12 {
            return Err(Error::InvalidArgument(format!("ISI length {l} too long for a trellis")));
        }
        let h = target.coeffs();
        let outputs = (0..1usize << l)
            .map(|s| {
                let past: f64 = (1..=l).map(|j| h[j] * sym((s >> (j - 1)) & 1)).sum();
                [h[0] + past, -h[0] + past]
            })
            .collect();
        Ok(Trellis { target: target.clone(), pad, outputs })
    }

    pub fn target(&self) -> &PrTarget {
        &self.target
    }

    pub fn pad(&self) -> f64 {
        self.pad
    }

    pub fn memory(&self) -> usize {
        self.target.isi_len()
    }

    pub fn n_states(&self) -> usize {
        self.outputs.len()
    }

    /// State whose whole memory holds the padding symbol.
    pub fn pad_state(&self) -> usize {
        if self.pad < 0.0 {
            self.n_states() - 1
        } else {
            0
        }
    }

    pub fn next_state(&self, s: usize, input: f64) -> usize {
        ((s << 1) | bit_of(input)) & (self.n_states() - 1)
    }

    pub fn output(&self, s: usize, input: f64) -> f64 {
        self.outputs[s][bit_of(input)]
    }

    pub fn branches(&self) -> Vec<Branch> {
        (0..self.n_states())
            .flat_map(|s| {
                [1.0, -1.0].map(|x| Branch { from: s, input: x, to: self.next_state(s, x), output: self.output(s, x) })
            })
            .collect()
    }
}

/// BCJR posterior and extrinsic fields. `posterior = prior + extrinsic`.
#[derive(Clone, Debug, PartialEq)]
pub struct BcjrOutput {
    pub posterior: Vec<f64>,
    pub extrinsic: Vec<f64>,
}

/// Exact log-domain forward-backward pass.
///
/// `y` holds `N + L` observations (the last `L` driven by the padding
/// symbols), `priors` holds `N` bit fields and `precision` is the coefficient
/// `c` of the Gaussian log-likelihood `-(c/2)(y - out)^2`.
pub fn bcjr(trellis: &Trellis, y: &[f64], priors: &[f64], precision: f64) -> Result<BcjrOutput> {
    let n = priors.len();
    let l = trellis.memory();
    if y.len() != n + l {
        return Err(Error::LengthMismatch { expected: n + l, got: y.len() });
    }
    let ns = trellis.n_states();
    let total = n + l;
    let ninf = f64::NEG_INFINITY;
    let inputs = |t: usize| -> &'static [f64] {
        if t < n {
            &[1.0, -1.0]
        } else if trellis.pad > 0.0 {
            &[1.0]
        } else {
            &[-1.0]
        }
    };
    let chan = |t: usize, s: usize, x: f64| {
        let d = y[t] - trellis.output(s, x);
        -0.5 * precision * d * d
    };
    let prior = |t: usize, x: f64| if t < n { x * priors[t] } else { 0.0 };

    let mut alpha = vec![ninf; (total + 1) * ns];
    alpha[trellis.pad_state()] = 0.0;
    for t in 0..total {
        let (cur, next) = alpha.split_at_mut((t + 1) * ns);
        let cur = &cur[t * ns..];
        let next = &mut next[..ns];
        for s in 0..ns {
            if cur[s] == ninf {
                continue;
            }
            for &x in inputs(t) {
                let to = trellis.next_state(s, x);
                next[to] = log_add(next[to], cur[s] + chan(t, s, x) + prior(t, x));
            }
        }
        let m = next.iter().copied().fold(ninf, f64::max);
        next.iter_mut().for_each(|v| *v -= m);
    }
    let mut beta = vec![ninf; (total + 1) * ns];
    beta[total * ns + trellis.pad_state()] = 0.0;
    for t in (0..total).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * ns);
        let cur = &mut cur[t * ns..];
        let next = &next[..ns];
        for (s, c) in cur.iter_mut().enumerate() {
            for &x in inputs(t) {
                let to = trellis.next_state(s, x);
                if next[to] != ninf {
                    *c = log_add(*c, next[to] + chan(t, s, x) + prior(t, x));
                }
            }
        }
        let m = cur.iter().copied().fold(ninf, f64::max);
        cur.iter_mut().for_each(|v| *v -= m);
    }
    let mut extrinsic = Vec::with_capacity(n);
    for t in 0..n {
        let mut acc = [ninf; 2];
        for s in 0..ns {
            let a = alpha[t * ns + s];
            if a == ninf {
                continue;
            }
            for (k, x) in [1.0, -1.0].into_iter().enumerate() {
                let to = trellis.next_state(s, x);
                acc[k] = log_add(acc[k], a + chan(t, s, x) + beta[(t + 1) * ns + to]);
            }
        }
        extrinsic.push(0.5 * (acc[0] - acc[1]));
    }
    let posterior = extrinsic.iter().zip(priors).map(|(e, p)| e + p).collect();
    Ok(BcjrOutput { posterior, extrinsic })
}

/// `T` outer iterations, each one BCJR pass followed by `S` sum-product
/// iterations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TurboSchedule {
    pub outer: usize,
    pub inner: usize,
}

impl TurboSchedule {
    pub fn new(outer: usize, inner: usize) -> Result<Self> {
        if outer == 0 {
            return Err(Error::InvalidArgument("turbo schedule needs T >= 1".into()));
        }
        Ok(TurboSchedule { outer, inner })
    }

    /// Total iteration budget `T (S + 1)`.
    pub fn budget(&self) -> usize {
        self.outer * (self.inner + 1)
    }
}

impl FromStr for TurboSchedule {
    type Err = Error;

    /// Accepts `TxS` and `Tx(S+1)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad turbo schedule {s:?}, expected e.g. 3x6"));
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (t, rest) = compact.split_once(['x', 'X', '*', '×']).ok_or_else(bad)?;
        let inner = match rest.strip_prefix('(').and_then(|r| r.strip_suffix("+1)")) {
            Some(v) => v,
            None => rest,
        };
        let outer = t.parse().map_err(|_| bad())?;
        let inner = inner.parse().map_err(|_| bad())?;
        TurboSchedule::new(outer, inner)
    }
}

impl TryFrom<String> for TurboSchedule {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TurboSchedule> for String {
    fn from(s: TurboSchedule) -> String {
        s.to_string()
    }
}

impl fmt::Display for TurboSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.outer, self.inner)
    }
}

/// Turbo equalization. Each block hands on its output minus its own input;
/// the sum-product messages restart from zero on every pass and decoding
/// stops at the first valid codeword.
pub fn turbo_equalize(
    h: &ParityCheckMatrix,
    trellis: &Trellis,
    y: &[f64],
    precision: f64,
    schedule: TurboSchedule,
) -> Result<DecodeResult> {
    turbo_equalize_with(&SumProductDecoder::new(h), trellis, y, precision, schedule)
}

/// [`turbo_equalize`] reusing a prebuilt code decoder.
pub fn turbo_equalize_with(
    sp: &SumProductDecoder,
    trellis: &Trellis,
    y: &[f64],
    precision: f64,
    schedule: TurboSchedule,
) -> Result<DecodeResult> {
    let h = sp.matrix();
    let n = h.n_vars();
    let mut priors = vec![0.0; n];
    let mut res = DecodeResult::default();
    let mut sp_iters = 0;
    for _ in 0..schedule.outer {
        let out = bcjr(trellis, y, &priors, precision)?;
        res.trellis_passes += 1;
        let ext = out.extrinsic;
        let mut lambdas = out.posterior;
        let mut bits = hard_decision(&lambdas);
        let mut ok = h.is_codeword(&bits);
        if schedule.inner > 0 {
            let mut st = sp.initial_state(&ext);
            for _ in 0..schedule.inner {
                sp.step(&ext, &mut st);
                sp_iters += 1;
                lambdas = sp.posteriors(&ext, &st);
                bits = hard_decision(&lambdas);
                ok = h.is_codeword(&bits);
                if ok {
                    break;
                }
            }
            priors = lambdas.iter().zip(&ext).map(|(l, e)| l - e).collect();
        } else {
            priors = vec![0.0; n];
        }
        res.hard_bits = bits;
        res.lambdas = lambdas;
        res.converged = ok;
        if ok {
            break;
        }
    }
    res.iterations_used = res.trellis_passes + sp_iters;
    Ok(res)
}
