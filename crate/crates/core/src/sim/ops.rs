//! Arithmetic-operation accounting.
//!
//! The counted decoders below evaluate every quantity literally: each check
//! message used by a field is recomputed from scratch with its own
//! leave-one-out product, and tanh, atanh, exp and ln are table lookups that
//! cost nothing. Counts are attributed to the symbol whose fields (or
//! trellis section) are being computed.

use std::collections::HashMap;
use std::ops::{Add, Mul};

use serde::Serialize;

use crate::baseline::{hard_decision, Trellis};
use crate::channel::ChannelCouplings;
use crate::numerics::{atanh_clamped, tanh_clamped};
use crate::prbp::PrGraph;

/// Multiplications and additions (subtractions and divisions included).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct OpCount {
    pub multiplies: u64,
    pub adds: u64,
}

impl OpCount {
    pub const fn new(multiplies: u64, adds: u64) -> Self {
        OpCount { multiplies, adds }
    }
}

impl Add for OpCount {
    type Output = OpCount;
    fn add(self, o: OpCount) -> OpCount {
        OpCount::new(self.multiplies + o.multiplies, self.adds + o.adds)
    }
}

impl Mul<u64> for OpCount {
    type Output = OpCount;
    fn mul(self, k: u64) -> OpCount {
        OpCount::new(self.multiplies * k, self.adds * k)
    }
}

/// Per-symbol operation tallies of one decode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpCounter {
    per_symbol: Vec<OpCount>,
}

impl OpCounter {
    pub fn new(n: usize) -> Self {
        OpCounter { per_symbol: vec![OpCount::default(); n] }
    }

    pub fn mul(&mut self, i: usize, k: usize) {
        self.per_symbol[i].multiplies += k as u64;
    }

    pub fn add(&mut self, i: usize, k: usize) {
        self.per_symbol[i].adds += k as u64;
    }

    pub fn per_symbol(&self) -> &[OpCount] {
        &self.per_symbol
    }

    pub fn total(&self) -> OpCount {
        self.per_symbol.iter().fold(OpCount::default(), |a, &b| a + b)
    }

    /// Most frequent per-symbol count (smallest on ties). Block-edge symbols
    /// with fewer ISI neighbours differ from the bulk.
    pub fn modal(&self) -> OpCount {
        let mut hist: HashMap<OpCount, usize> = HashMap::new();
        for &c in &self.per_symbol {
            *hist.entry(c).or_default() += 1;
        }
        hist.into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(c, _)| c)
            .unwrap_or_default()
    }
}

/// Sum of `terms`, charging one addition per term after the first.
fn sum_counted(terms: impl IntoIterator<Item = f64>, ops: &mut OpCounter, i: usize) -> (f64, bool) {
    let mut acc = 0.0;
    let mut n = 0usize;
    for t in terms {
        acc += t;
        n += 1;
    }
    ops.add(i, n.saturating_sub(1));
    (acc, n > 0)
}

/// Product of `factors`, charging one multiplication per factor after the
/// first.
fn product_counted(factors: impl IntoIterator<Item = f64>, ops: &mut OpCounter, i: usize) -> f64 {
    let mut acc = 1.0;
    let mut n = 0usize;
    for f in factors {
        acc *= f;
        n += 1;
    }
    ops.mul(i, n.saturating_sub(1));
    acc
}

/// `base + sum(groups)` charging one explicit addition per nonempty group.
fn combine(base: f64, groups: &[(f64, bool)], ops: &mut OpCounter, i: usize) -> f64 {
    let mut v = base;
    for &(g, nonempty) in groups {
        if nonempty {
            v += g;
            ops.add(i, 1);
        }
    }
    v
}

/// Fields of the combined graph after one counted iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct CountedFields {
    pub eta_check: Vec<f64>,
    pub eta_isi: Vec<f64>,
}

impl CountedFields {
    /// Message-generating fields before the first iteration: all zero, so
    /// every message starts at zero.
    pub fn zero(graph: &PrGraph) -> Self {
        CountedFields { eta_check: vec![0.0; graph.n_edges()], eta_isi: vec![0.0; 2 * graph.isi().len()] }
    }
}

/// One PR-BP iteration with per-edge recomputation of every message.
pub fn prbp_iteration_counted(
    graph: &PrGraph,
    prev: &CountedFields,
    couplings: &ChannelCouplings,
    ops: &mut OpCounter,
) -> CountedFields {
    let isi = graph.isi();
    let tanh_q: Vec<f64> = isi.node_couplings(couplings).into_iter().map(tanh_clamped).collect();
    let mut next = CountedFields::zero(graph);
    for i in 0..graph.n() {
        let u = couplings.u[i];
        let edges = graph.var_edges(i);
        let slots = isi.slots_of(i);
        let mu_fresh = |e: usize, ops: &mut OpCounter| {
            let j = graph.edge_check(e);
            let t = graph.check_edges(j).filter(|&f| f != e).map(|f| tanh_clamped(prev.eta_check[f]));
            atanh_clamped(product_counted(t, ops, i))
        };
        let zeta: Vec<f64> = slots
            .iter()
            .map(|&s| {
                ops.mul(i, 1);
                atanh_clamped(tanh_clamped(prev.eta_isi[s ^ 1]) * tanh_q[s / 2])
            })
            .collect();
        // partial sum over all checks but the first, kept for the ISI fields
        let mut first_partial = None;
        let mut seen: Vec<Option<f64>> = vec![None; edges.len()];
        for (a, &e) in edges.iter().enumerate() {
            let mut mus = Vec::with_capacity(edges.len());
            for (b, &f) in edges.iter().enumerate() {
                if b != a {
                    let m = mu_fresh(f, ops);
                    seen[b] = Some(m);
                    mus.push(m);
                }
            }
            let m = sum_counted(mus, ops, i);
            let z = sum_counted(zeta.iter().map(|z| -z), ops, i);
            next.eta_check[e] = combine(u, &[m, z], ops, i);
            first_partial.get_or_insert(m);
        }
        // the message of the first check was already needed by the others
        let first = first_partial.map(|m| (m, seen[0].unwrap_or_else(|| mu_fresh(edges[0], ops))));
        for (k, &s) in slots.iter().enumerate() {
            let all_mu = match first {
                Some(((m, nonempty), mu0)) => {
                    if nonempty {
                        ops.add(i, 1);
                        (m + mu0, true)
                    } else {
                        (mu0, true)
                    }
                }
                None => (0.0, false),
            };
            let z = sum_counted(zeta.iter().enumerate().filter(|&(t, _)| t != k).map(|(_, z)| -z), ops, i);
            next.eta_isi[s] = combine(u, &[all_mu, z], ops, i);
        }
    }
    next
}

/// Check-to-variable messages from variable-to-check fields (uncounted).
fn check_messages(graph: &PrGraph, eta: &[f64]) -> Vec<f64> {
    (0..graph.n_edges())
        .map(|e| {
            let j = graph.edge_check(e);
            atanh_clamped(graph.check_edges(j).filter(|&f| f != e).map(|f| tanh_clamped(eta[f])).product())
        })
        .collect()
}

/// Sum-product variable update with literal message recomputation.
/// Returns the new variable-to-check fields in edge order.
pub fn sum_product_iteration_counted(graph: &PrGraph, prev: &[f64], llr: &[f64], ops: &mut OpCounter) -> Vec<f64> {
    let mut next = vec![0.0; graph.n_edges()];
    for i in 0..graph.n() {
        let edges = graph.var_edges(i);
        for &e in edges {
            let mus: Vec<f64> = edges
                .iter()
                .filter(|&&f| f != e)
                .map(|&f| {
                    let j = graph.edge_check(f);
                    let t = graph.check_edges(j).filter(|&g| g != f).map(|g| tanh_clamped(prev[g]));
                    atanh_clamped(product_counted(t, ops, i))
                })
                .collect();
            let (m, _) = sum_counted(std::iter::once(llr[i]).chain(mus), ops, i);
            next[e] = m;
        }
    }
    next
}

/// Posterior and extrinsic fields of the counted forward-backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct CountedBcjr {
    pub posterior: Vec<f64>,
    pub extrinsic: Vec<f64>,
}

/// Probability-domain BCJR charging the work of each trellis section.
///
/// Per section with `S` states and `B = 2S` branches: the complementary
/// prior (1 add), branch metrics times priors (`B` mults), forward sums
/// (`B` mults, `B - S` adds) and normalisation by the largest entry
/// (`S - 1` mults), the same for the backward pass, the two a-posteriori
/// sums reusing the forward products (`B` mults, `B - 2` adds), the
/// half-log ratio (1 add) and the extrinsic subtraction (1 add).
pub fn bcjr_counted(trellis: &Trellis, y: &[f64], priors: &[f64], precision: f64, ops: &mut OpCounter) -> CountedBcjr {
    let n = priors.len();
    let l = trellis.memory();
    let total = n + l;
    let ns = trellis.n_states();
    let sec = |t: usize| t.min(n.saturating_sub(1));
    let xs = [1.0, -1.0];
    // gamma[t][s][k] for input xs[k]
    let mut gamma = vec![[0.0f64; 2]; total * ns];
    for t in 0..total {
        let i = sec(t);
        let p = if t < n {
            let pp = 0.5 * (1.0 + priors[t].tanh());
            ops.add(i, 1);
            [pp, 1.0 - pp]
        } else if trellis.pad() > 0.0 {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        };
        for s in 0..ns {
            for k in 0..2 {
                let d = y[t] - trellis.output(s, xs[k]);
                gamma[t * ns + s][k] = (-0.5 * precision * d * d).exp() * p[k];
            }
        }
        ops.mul(i, 2 * ns);
    }
    let normalize = |v: &mut [f64], ops: &mut OpCounter, i: usize| {
        let (arg, m) = v.iter().copied().enumerate().fold((0, f64::MIN), |a, (k, x)| if x > a.1 { (k, x) } else { a });
        if m > 0.0 {
            for (k, x) in v.iter_mut().enumerate() {
                *x = if k == arg { 1.0 } else { *x / m };
            }
        }
        ops.mul(i, v.len() - 1);
    };
    let mut alpha = vec![0.0; (total + 1) * ns];
    alpha[trellis.pad_state()] = 1.0;
    // forward products alpha * gamma, kept for the a-posteriori sums
    let mut ag = vec![[0.0f64; 2]; total * ns];
    for t in 0..total {
        let i = sec(t);
        let mut next = vec![0.0; ns];
        let mut incoming = vec![0usize; ns];
        for s in 0..ns {
            for k in 0..2 {
                let v = alpha[t * ns + s] * gamma[t * ns + s][k];
                ag[t * ns + s][k] = v;
                let to = trellis.next_state(s, xs[k]);
                next[to] += v;
                incoming[to] += 1;
            }
        }
        ops.mul(i, 2 * ns);
        ops.add(i, incoming.iter().map(|c| c - 1).sum());
        normalize(&mut next, ops, i);
        alpha[(t + 1) * ns..(t + 2) * ns].copy_from_slice(&next);
    }
    let mut beta = vec![0.0; (total + 1) * ns];
    beta[total * ns + trellis.pad_state()] = 1.0;
    for t in (0..total).rev() {
        let i = sec(t);
        let mut cur = vec![0.0; ns];
        for (s, c) in cur.iter_mut().enumerate() {
            *c = (0..2).map(|k| gamma[t * ns + s][k] * beta[(t + 1) * ns + trellis.next_state(s, xs[k])]).sum();
        }
        ops.mul(i, 2 * ns);
        ops.add(i, ns);
        normalize(&mut cur, ops, i);
        beta[t * ns..(t + 1) * ns].copy_from_slice(&cur);
    }
    let mut posterior = Vec::with_capacity(n);
    let mut extrinsic = Vec::with_capacity(n);
    for t in 0..n {
        let mut acc = [0.0; 2];
        for s in 0..ns {
            for k in 0..2 {
                acc[k] += ag[t * ns + s][k] * beta[(t + 1) * ns + trellis.next_state(s, xs[k])];
            }
        }
        ops.mul(t, 2 * ns);
        ops.add(t, 2 * ns - 2);
        let post = 0.5 * acc[0].ln() - 0.5 * acc[1].ln();
        ops.add(t, 2);
        posterior.push(post);
        extrinsic.push(post - priors[t]);
    }
    CountedBcjr { posterior, extrinsic }
}

/// Per-symbol cost of one literal PR-BP iteration on a `(q, p)`-regular code
/// with `k` ISI nodes per symbol.
pub fn prbp_ops(q: u64, p: u64, k: u64) -> OpCount {
    OpCount::new(q * q.saturating_sub(1) * p.saturating_sub(2) + k, q * (q + k).saturating_sub(1) + k * (k + 1))
}

/// Per-symbol cost of one sum-product iteration on a `(q, p)`-regular code.
pub fn sum_product_ops(q: u64, p: u64) -> OpCount {
    OpCount::new(q * q.saturating_sub(1) * p.saturating_sub(2), q * q.saturating_sub(1))
}

/// Per-symbol cost of one BCJR pass on a trellis with `states` states.
pub fn bcjr_ops(states: u64) -> OpCount {
    OpCount::new(10 * states - 2, 4 * states + 1)
}

/// Operation counts of an instrumented decode and the hard decision reached.
#[derive(Clone, Debug)]
pub struct CountedRun {
    pub ops: OpCounter,
    pub hard_bits: Vec<u8>,
}

/// Literal PR-BP for `iterations` iterations without early stopping.
pub fn prbp_run_counted(graph: &PrGraph, couplings: &ChannelCouplings, iterations: usize) -> CountedRun {
    let mut ops = OpCounter::new(graph.n());
    let mut f = CountedFields::zero(graph);
    for _ in 0..iterations {
        f = prbp_iteration_counted(graph, &f, couplings, &mut ops);
    }
    let mu = check_messages(graph, &f.eta_check);
    let lambdas: Vec<f64> =
        (0..graph.n()).map(|i| couplings.u[i] + graph.var_edges(i).iter().map(|&e| mu[e]).sum::<f64>()).collect();
    CountedRun { ops, hard_bits: hard_decision(&lambdas) }
}

/// Literal turbo equalization, `outer` passes of BCJR plus `inner`
/// sum-product iterations, without early stopping.
pub fn turbo_run_counted(
    graph: &PrGraph,
    trellis: &Trellis,
    y: &[f64],
    precision: f64,
    outer: usize,
    inner: usize,
) -> CountedRun {
    let n = graph.n();
    let mut ops = OpCounter::new(n);
    let mut priors = vec![0.0; n];
    let mut lambdas = vec![0.0; n];
    for _ in 0..outer {
        let b = bcjr_counted(trellis, y, &priors, precision, &mut ops);
        let mut v2c = vec![0.0; graph.n_edges()];
        for _ in 0..inner {
            v2c = sum_product_iteration_counted(graph, &v2c, &b.extrinsic, &mut ops);
        }
        let mu = if inner == 0 { vec![0.0; graph.n_edges()] } else { check_messages(graph, &v2c) };
        for i in 0..n {
            priors[i] = graph.var_edges(i).iter().map(|&e| mu[e]).sum();
            lambdas[i] = b.extrinsic[i] + priors[i];
        }
    }
    CountedRun { ops, hard_bits: hard_decision(&lambdas) }
}

/// Literal sum-product for `iterations` iterations.
pub fn sum_product_run_counted(graph: &PrGraph, llr: &[f64], iterations: usize) -> CountedRun {
    let mut ops = OpCounter::new(graph.n());
    let mut v2c = vec![0.0; graph.n_edges()];
    for _ in 0..iterations {
        v2c = sum_product_iteration_counted(graph, &v2c, llr, &mut ops);
    }
    let mu = check_messages(graph, &v2c);
    let lambdas: Vec<f64> = (0..graph.n()).map(|i| llr[i] + graph.var_edges(i).iter().map(|&e| mu[e]).sum::<f64>()).collect();
    CountedRun { ops, hard_bits: hard_decision(&lambdas) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::{bcjr, SumProductDecoder};
    use crate::channel::{compute_couplings, Convention, NoiseSpec, PrTarget};
    use crate::ldpc::ParityCheckMatrix;
    use crate::prbp::{build_graph, update_fields, FieldState, IsiEdgeSet};
    use crate::rng::CounterRng;

    fn regular_36(n: usize, seed: u64) -> ParityCheckMatrix {
        crate::ldpc::construct::progressive_fill(&vec![3; n], &vec![6; n / 2], seed).unwrap()
    }

    fn noisy(n: usize, tgt: &PrTarget, seed: u64) -> (Vec<f64>, NoiseSpec) {
        let mut rng = CounterRng::new(seed);
        let x: Vec<f64> = (0..n).map(|_| if rng.next_bit() == 1 { -1.0 } else { 1.0 }).collect();
        let noise = NoiseSpec::from_snr_db(tgt, 2.0);
        (crate::channel::transmit(&x, tgt, &noise, &mut rng, 1.0), noise)
    }

    #[test]
    fn prbp_counts_and_values() {
        let h = regular_36(48, 1);
        let tgt: PrTarget = "1-D".parse().unwrap();
        let g = build_graph(&h, &tgt);
        let (y, noise) = noisy(48, &tgt, 5);
        let cp = compute_couplings(&y, &tgt, &noise, 1.0, Convention::Paper).unwrap();
        let mut fast = FieldState::initial(&g, &cp.u);
        let mut lit = CountedFields::zero(&g);
        for it in 1..=4 {
            let mut ops = OpCounter::new(48);
            lit = prbp_iteration_counted(&g, &lit, &cp, &mut ops);
            fast = update_fields(&g, &fast, &cp);
            for (a, b) in lit.eta_check.iter().zip(&fast.eta_check).chain(lit.eta_isi.iter().zip(&fast.eta_isi)) {
                assert!((a - b).abs() < 1e-9, "iteration {it}");
            }
            assert_eq!(ops.modal(), OpCount::new(26, 18));
            assert_eq!(ops.modal(), prbp_ops(3, 6, 2));
            // the two end symbols have one ISI neighbour
            assert_eq!(ops.per_symbol()[0], prbp_ops(3, 6, 1));
        }
    }

    #[test]
    fn sum_product_counts_and_values() {
        let h = regular_36(48, 2);
        let g = PrGraph::with_isi(&h, IsiEdgeSet::empty(48)).unwrap();
        let mut rng = CounterRng::new(8);
        let llr: Vec<f64> = (0..48).map(|_| 1.0 + rng.next_gaussian()).collect();
        let sp = SumProductDecoder::new(&h);
        let mut st = sp.initial_state(&llr);
        let mut v2c = vec![0.0; g.n_edges()];
        for _ in 0..3 {
            let mut ops = OpCounter::new(48);
            v2c = sum_product_iteration_counted(&g, &v2c, &llr, &mut ops);
            sp.step(&llr, &mut st);
            for (a, b) in v2c.iter().zip(&st.v2c) {
                assert!((a - b).abs() < 1e-9);
            }
            assert_eq!(ops.modal(), OpCount::new(24, 6));
            assert_eq!(ops.modal(), sum_product_ops(3, 6));
        }
    }

    #[test]
    fn bcjr_counts_and_values() {
        for (tgt, states) in [("1-D", 2u64), ("1+0.5D", 2), ("1-D^2", 4)] {
            let tgt: PrTarget = tgt.parse().unwrap();
            let (y, noise) = noisy(20, &tgt, 3);
            let c = noise.precision(Convention::Paper);
            let tr = Trellis::new(&tgt, 1.0).unwrap();
            let mut rng = CounterRng::new(4);
            let priors: Vec<f64> = (0..20).map(|_| 0.3 * rng.next_gaussian()).collect();
            let mut ops = OpCounter::new(20);
            let counted = bcjr_counted(&tr, &y, &priors, c, &mut ops);
            let exact = bcjr(&tr, &y, &priors, c).unwrap();
            for (a, b) in counted.posterior.iter().zip(&exact.posterior) {
                assert!((a - b).abs() < 1e-9);
            }
            for (a, b) in counted.extrinsic.iter().zip(&exact.extrinsic) {
                assert!((a - b).abs() < 1e-9);
            }
            assert_eq!(ops.modal(), bcjr_ops(states));
        }
        assert_eq!(bcjr_ops(2), OpCount::new(18, 9));
    }

    #[test]
    fn closed_forms() {
        assert_eq!(prbp_ops(3, 6, 2) * 20, OpCount::new(520, 360));
        assert_eq!((bcjr_ops(2) + sum_product_ops(3, 6) * 6) * 3, OpCount::new(486, 135));
        assert_eq!(prbp_ops(3, 6, 0), sum_product_ops(3, 6));
    }

    #[test]
    fn modal_prefers_bulk() {
        let mut c = OpCounter::new(4);
        c.mul(0, 1);
        c.mul(1, 2);
        c.mul(2, 2);
        c.mul(3, 2);
        assert_eq!(c.modal(), OpCount::new(2, 0));
        assert_eq!(c.total(), OpCount::new(7, 0));
    }
}
