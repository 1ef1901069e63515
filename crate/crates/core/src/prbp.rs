//! Joint detection and decoding by message passing on the tripartite graph
//! of variables, parity checks and pairwise ISI nodes.
//!
//! Each iteration is a flooding (Jacobi) step. With cached check messages
//! `mu` and ISI messages `zeta` from the previous iteration, the new fields
//! are
//!
//! ```text
//! eta_{i,a}  = u_i + sum_{b in checks(i), b != a} mu_{i,b} - sum_{k in isi(i)} zeta_{i,k}
//! eta_{i,k}  = u_i - sum_{m in isi(i), m != k} zeta_{i,m} + sum_{a in checks(i)} mu_{i,a}
//! ```
//!
//! and the messages are refreshed from them:
//!
//! ```text
//! mu_{i,b}   = atanh( prod_{j in b, j != i} tanh eta_{j,b} )
//! zeta_{i,k} = atanh( tanh eta_{j,k} * tanh Q_k )      (j: other endpoint of k)
//! ```
//!
//! After every iteration `Lambda_i = u_i + sum_a mu_{i,a}` is hard-decided and
//! the syndrome checked. All quantities are fields (see [`crate::numerics`]).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelCouplings, PrTarget};
use crate::error::{Error, Result};
use crate::ldpc::ParityCheckMatrix;
use crate::numerics::{atanh_clamped, leave_one_out_products, tanh_clamped};

/// A pairwise ISI factor `exp(-Q_lag x_a x_b)` with `b - a = lag`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IsiNode {
    pub a: usize,
    pub b: usize,
    pub lag: usize,
}

/// The ISI nodes of a block and, for each variable, its incident slots.
///
/// Node `k` owns slots `2k` (endpoint `a`) and `2k + 1` (endpoint `b`); a
/// slot carries the field from its endpoint to the node and the message from
/// the node back to that endpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct IsiEdgeSet {
    n: usize,
    nodes: Vec<IsiNode>,
    var_ptr: Vec<usize>,
    var_slots: Vec<usize>,
}

impl IsiEdgeSet {
    pub fn new(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut nodes = Vec::new();
        for (x, y) in pairs {
            let (a, b) = (x.min(y), x.max(y));
            if a == b || b >= n {
                return Err(Error::InvalidArgument(format!("bad ISI pair ({x}, {y}) for N = {n}")));
            }
            nodes.push(IsiNode { a, b, lag: b - a });
        }
        let mut counts = vec![0usize; n + 1];
        for nd in &nodes {
            counts[nd.a + 1] += 1;
            counts[nd.b + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let var_ptr = counts.clone();
        let mut fill = counts;
        let mut var_slots = vec![0; 2 * nodes.len()];
        for (k, nd) in nodes.iter().enumerate() {
            var_slots[fill[nd.a]] = 2 * k;
            fill[nd.a] += 1;
            var_slots[fill[nd.b]] = 2 * k + 1;
            fill[nd.b] += 1;
        }
        Ok(IsiEdgeSet { n, nodes, var_ptr, var_slots })
    }

    pub fn empty(n: usize) -> Self {
        Self::new(n, std::iter::empty()).expect("empty set is valid")
    }

    /// One node per lag with nonzero coupling per valid position.
    pub fn for_target(n: usize, target: &PrTarget) -> Self {
        let pairs = (1..=target.isi_len())
            .filter(|&p| target.autocorrelation(p) != 0.0)
            .flat_map(|p| (0..n.saturating_sub(p)).map(move |k| (k, k + p)));
        Self::new(n, pairs).expect("chain pairs are in range")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[IsiNode] {
        &self.nodes
    }

    /// Slots incident on variable `i`.
    pub fn slots_of(&self, i: usize) -> &[usize] {
        &self.var_slots[self.var_ptr[i]..self.var_ptr[i + 1]]
    }

    /// Variable at the endpoint owning `slot`.
    pub fn slot_var(&self, slot: usize) -> usize {
        let nd = &self.nodes[slot / 2];
        if slot % 2 == 0 {
            nd.a
        } else {
            nd.b
        }
    }

    /// Coupling per node taken from `Q_lag` of the block couplings.
    pub fn node_couplings(&self, cp: &ChannelCouplings) -> Vec<f64> {
        self.nodes.iter().map(|nd| cp.coupling(nd.lag)).collect()
    }

    /// True when the ISI nodes alone form no cycle.
    pub fn is_forest(&self) -> bool {
        let mut uf = UnionFind::new(self.n);
        self.nodes.iter().all(|nd| uf.union(nd.a, nd.b))
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merge; false if already connected.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Tanner graph edges in check-major order plus the ISI node set.
#[derive(Clone, Debug)]
pub struct PrGraph {
    n: usize,
    check_ptr: Vec<usize>,
    edge_var: Vec<usize>,
    edge_check: Vec<usize>,
    var_ptr: Vec<usize>,
    var_edges: Vec<usize>,
    isi: IsiEdgeSet,
}

/// Combined graph for code `h` on channel `target`.
pub fn build_graph(h: &ParityCheckMatrix, target: &PrTarget) -> PrGraph {
    PrGraph::with_isi(h, IsiEdgeSet::for_target(h.n_vars(), target)).expect("sizes agree")
}

impl PrGraph {
    pub fn with_isi(h: &ParityCheckMatrix, isi: IsiEdgeSet) -> Result<Self> {
        let n = h.n_vars();
        if isi.n() != n {
            return Err(Error::LengthMismatch { expected: n, got: isi.n() });
        }
        let mut check_ptr = vec![0];
        let mut edge_var = Vec::with_capacity(h.edge_count());
        let mut edge_check = Vec::with_capacity(h.edge_count());
        for (j, row) in h.check_rows().iter().enumerate() {
            edge_var.extend_from_slice(row);
            edge_check.extend(std::iter::repeat(j).take(row.len()));
            check_ptr.push(edge_var.len());
        }
        let mut var_ptr = vec![0usize; n + 1];
        for &i in &edge_var {
            var_ptr[i + 1] += 1;
        }
        for i in 0..n {
            var_ptr[i + 1] += var_ptr[i];
        }
        let mut fill = var_ptr.clone();
        let mut var_edges = vec![0; edge_var.len()];
        for (e, &i) in edge_var.iter().enumerate() {
            var_edges[fill[i]] = e;
            fill[i] += 1;
        }
        Ok(PrGraph { n, check_ptr, edge_var, edge_check, var_ptr, var_edges, isi })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_checks(&self) -> usize {
        self.check_ptr.len() - 1
    }

    pub fn n_edges(&self) -> usize {
        self.edge_var.len()
    }

    pub fn check_edges(&self, j: usize) -> std::ops::Range<usize> {
        self.check_ptr[j]..self.check_ptr[j + 1]
    }

    pub fn edge_var(&self, e: usize) -> usize {
        self.edge_var[e]
    }

    pub fn edge_check(&self, e: usize) -> usize {
        self.edge_check[e]
    }

    /// Edge ids incident on variable `i`, in increasing check order.
    pub fn var_edges(&self, i: usize) -> &[usize] {
        &self.var_edges[self.var_ptr[i]..self.var_ptr[i + 1]]
    }

    pub fn isi(&self) -> &IsiEdgeSet {
        &self.isi
    }

    /// Edge id of (variable `i`, check `j`).
    pub fn find_edge(&self, i: usize, j: usize) -> Option<usize> {
        self.var_edges(i).iter().copied().find(|&e| self.edge_check[e] == j)
    }

    /// Hard decisions from likelihoods and the number of unsatisfied checks.
    pub fn hard_decide(&self, lambdas: &[f64], bits: &mut [u8]) -> usize {
        for (b, &l) in bits.iter_mut().zip(lambdas) {
            *b = u8::from(l < 0.0);
        }
        (0..self.n_checks())
            .filter(|&j| self.check_edges(j).fold(0u8, |acc, e| acc ^ bits[self.edge_var[e]]) != 0)
            .count()
    }
}

/// All edge fields and cached messages at one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    /// eta_{i,a} per Tanner edge
    pub eta_check: Vec<f64>,
    /// eta_{i,k} per ISI slot
    pub eta_isi: Vec<f64>,
    /// mu_{i,b} per Tanner edge
    pub mu: Vec<f64>,
    /// zeta_{i,k} per ISI slot
    pub zeta: Vec<f64>,
    pub iteration: usize,
}

impl FieldState {
    /// Iteration 0: every field equals `u_i`, every message is zero.
    pub fn initial(graph: &PrGraph, u: &[f64]) -> Self {
        FieldState {
            eta_check: (0..graph.n_edges()).map(|e| u[graph.edge_var(e)]).collect(),
            eta_isi: (0..2 * graph.isi().len()).map(|s| u[graph.isi().slot_var(s)]).collect(),
            mu: vec![0.0; graph.n_edges()],
            zeta: vec![0.0; 2 * graph.isi().len()],
            iteration: 0,
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.eta_check, &self.eta_isi, &self.mu, &self.zeta]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    fn abs_stats(&self) -> (f64, f64, f64) {
        let all = self.eta_check.iter().chain(&self.eta_isi).map(|x| x.abs());
        let (mut lo, mut hi, mut sum, mut cnt) = (f64::INFINITY, 0.0f64, 0.0, 0usize);
        for v in all {
            lo = lo.min(v);
            hi = hi.max(v);
            sum += v;
            cnt += 1;
        }
        if cnt == 0 {
            (0.0, 0.0, 0.0)
        } else {
            (lo, hi, sum / cnt as f64)
        }
    }
}

/// `mu_{i,b}` on edge `e` recomputed directly from the current fields.
pub fn check_message(graph: &PrGraph, state: &FieldState, e: usize) -> f64 {
    let j = graph.edge_check(e);
    let prod: f64 = graph
        .check_edges(j)
        .filter(|&f| f != e)
        .map(|f| tanh_clamped(state.eta_check[f]))
        .product();
    atanh_clamped(prod)
}

/// `zeta` delivered through `slot` to its endpoint, given `tanh Q` of the node.
pub fn isi_message(state: &FieldState, slot: usize, tanh_q: f64) -> f64 {
    atanh_clamped(tanh_clamped(state.eta_isi[slot ^ 1]) * tanh_q)
}

/// Which likelihood is hard-decided after each iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaMode {
    /// `u_i + sum_a mu_{i,a}`
    #[default]
    Literal,
    /// `u_i + sum_a mu_{i,a} - sum_k zeta_{i,k}`
    FullPosterior,
}

impl std::str::FromStr for LambdaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(LambdaMode::Literal),
            "full-posterior" | "full" => Ok(LambdaMode::FullPosterior),
            _ => Err(Error::InvalidArgument(format!("unknown lambda mode {s:?}"))),
        }
    }
}

/// Scratch buffers and per-node constants for repeated iterations.
struct Workspace {
    tanh_q: Vec<f64>,
    t: Vec<f64>,
    loo: Vec<f64>,
}

impl Workspace {
    fn new(graph: &PrGraph, cp: &ChannelCouplings) -> Self {
        let max_deg = (0..graph.n_checks()).map(|j| graph.check_edges(j).len()).max().unwrap_or(0);
        Workspace {
            tanh_q: graph.isi().node_couplings(cp).into_iter().map(tanh_clamped).collect(),
            t: vec![0.0; max_deg],
            loo: vec![0.0; max_deg],
        }
    }
}

fn step(graph: &PrGraph, u: &[f64], st: &mut FieldState, ws: &mut Workspace) {
    let isi = graph.isi();
    // fields from the previous iteration's messages
    for i in 0..graph.n() {
        let tm: f64 = graph.var_edges(i).iter().map(|&e| st.mu[e]).sum();
        let tz: f64 = isi.slots_of(i).iter().map(|&s| st.zeta[s]).sum();
        for &e in graph.var_edges(i) {
            st.eta_check[e] = u[i] + (tm - st.mu[e]) - tz;
        }
        for &s in isi.slots_of(i) {
            st.eta_isi[s] = u[i] - (tz - st.zeta[s]) + tm;
        }
    }
    // messages from the new fields
    for j in 0..graph.n_checks() {
        let r = graph.check_edges(j);
        let d = r.len();
        for (k, e) in r.clone().enumerate() {
            ws.t[k] = tanh_clamped(st.eta_check[e]);
        }
        leave_one_out_products(&ws.t[..d], &mut ws.loo[..d]);
        for (k, e) in r.enumerate() {
            st.mu[e] = atanh_clamped(ws.loo[k]);
        }
    }
    for s in 0..st.zeta.len() {
        st.zeta[s] = atanh_clamped(tanh_clamped(st.eta_isi[s ^ 1]) * ws.tanh_q[s / 2]);
    }
    st.iteration += 1;
}

/// One flooding iteration: new fields from the cached messages, then fresh
/// messages from the new fields.
pub fn update_fields(graph: &PrGraph, state: &FieldState, couplings: &ChannelCouplings) -> FieldState {
    let mut next = state.clone();
    let mut ws = Workspace::new(graph, couplings);
    step(graph, &couplings.u, &mut next, &mut ws);
    next
}

/// `Lambda_i` from the cached messages.
pub fn likelihoods(graph: &PrGraph, state: &FieldState, couplings: &ChannelCouplings, mode: LambdaMode) -> Vec<f64> {
    let mut out = vec![0.0; graph.n()];
    fill_likelihoods(graph, state, &couplings.u, mode, &mut out);
    out
}

fn fill_likelihoods(graph: &PrGraph, st: &FieldState, u: &[f64], mode: LambdaMode, out: &mut [f64]) {
    for (i, l) in out.iter_mut().enumerate() {
        let tm: f64 = graph.var_edges(i).iter().map(|&e| st.mu[e]).sum();
        *l = u[i] + tm;
        if mode == LambdaMode::FullPosterior {
            let tz: f64 = graph.isi().slots_of(i).iter().map(|&s| st.zeta[s]).sum();
            *l -= tz;
        }
    }
}

/// Convergence diagnostics for one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub min_abs_eta: f64,
    pub max_abs_eta: f64,
    pub mean_abs_eta: f64,
    pub syndrome_weight: usize,
}

pub fn write_trace_csv<W: Write>(mut w: W, trace: &[IterationStats]) -> std::io::Result<()> {
    writeln!(w, "iteration,min_abs_eta,max_abs_eta,mean_abs_eta,syndrome_weight")?;
    for t in trace {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{}",
            t.iteration, t.min_abs_eta, t.max_abs_eta, t.mean_abs_eta, t.syndrome_weight
        )?;
    }
    Ok(())
}

/// Outcome of any decoder in the crate.
#[derive(Clone, Debug, Default)]
pub struct DecodeResult {
    pub hard_bits: Vec<u8>,
    pub lambdas: Vec<f64>,
    /// Iterations performed (for turbo: trellis passes plus inner iterations).
    pub iterations_used: usize,
    /// The hard decision satisfies every check.
    pub converged: bool,
    /// Trellis passes (turbo equalization only).
    pub trellis_passes: usize,
    pub field_snapshot: Option<FieldState>,
    pub trace: Vec<IterationStats>,
    /// Lambda after every iteration, when requested.
    pub lambda_trace: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug)]
pub struct PrbpOptions {
    pub max_iter: usize,
    /// Stop as soon as the hard decision is a codeword.
    pub early_stop: bool,
    pub lambda: LambdaMode,
    pub record_trace: bool,
    pub record_lambdas: bool,
    pub keep_state: bool,
}

impl Default for PrbpOptions {
    fn default() -> Self {
        PrbpOptions {
            max_iter: 20,
            early_stop: true,
            lambda: LambdaMode::Literal,
            record_trace: false,
            record_lambdas: false,
            keep_state: false,
        }
    }
}

impl PrbpOptions {
    pub fn with_max_iter(max_iter: usize) -> Self {
        PrbpOptions { max_iter, ..Default::default() }
    }
}

/// Decoder bound to one combined graph.
#[derive(Clone, Debug)]
pub struct PrbpDecoder {
    graph: PrGraph,
    options: PrbpOptions,
}

impl PrbpDecoder {
    pub fn new(graph: PrGraph, options: PrbpOptions) -> Self {
        PrbpDecoder { graph, options }
    }

    pub fn graph(&self) -> &PrGraph {
        &self.graph
    }

    pub fn options(&self) -> &PrbpOptions {
        &self.options
    }

    pub fn decode(&self, couplings: &ChannelCouplings) -> DecodeResult {
        self.decode_from(couplings, FieldState::initial(&self.graph, &couplings.u))
    }

    /// Continue iterating from a given state.
    pub fn decode_from(&self, couplings: &ChannelCouplings, mut st: FieldState) -> DecodeResult {
        let g = &self.graph;
        let opt = &self.options;
        let u = &couplings.u;
        let mut ws = Workspace::new(g, couplings);
        let mut lambdas = vec![0.0; g.n()];
        let mut bits = vec![0u8; g.n()];
        let mut res = DecodeResult::default();
        fill_likelihoods(g, &st, u, opt.lambda, &mut lambdas);
        let mut weight = g.hard_decide(&lambdas, &mut bits);
        for _ in 0..opt.max_iter {
            step(g, u, &mut st, &mut ws);
            fill_likelihoods(g, &st, u, opt.lambda, &mut lambdas);
            weight = g.hard_decide(&lambdas, &mut bits);
            if opt.record_trace {
                let (lo, hi, mean) = st.abs_stats();
                res.trace.push(IterationStats {
                    iteration: st.iteration,
                    min_abs_eta: lo,
                    max_abs_eta: hi,
                    mean_abs_eta: mean,
                    syndrome_weight: weight,
                });
            }
            if opt.record_lambdas {
                res.lambda_trace.push(lambdas.clone());
            }
            if opt.early_stop && weight == 0 {
                break;
            }
        }
        res.iterations_used = st.iteration;
        res.converged = weight == 0;
        res.hard_bits = bits;
        res.lambdas = lambdas;
        if opt.keep_state {
            res.field_snapshot = Some(st);
        }
        res
    }
}

/// Decode one block with default options and `max_iter` iterations.
pub fn decode(h: &ParityCheckMatrix, target: &PrTarget, couplings: &ChannelCouplings, max_iter: usize) -> DecodeResult {
    PrbpDecoder::new(build_graph(h, target), PrbpOptions::with_max_iter(max_iter)).decode(couplings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{compute_couplings, Convention, NoiseSpec};
    use crate::ldpc::{derive_generator, to_bipolar};
    use crate::rng::CounterRng;

    fn t(s: &str) -> PrTarget {
        s.parse().unwrap()
    }

    fn pairs(isi: &IsiEdgeSet) -> Vec<(usize, usize)> {
        isi.nodes().iter().map(|n| (n.a, n.b)).collect()
    }

    #[test]
    fn isi_node_layout() {
        assert_eq!(pairs(&IsiEdgeSet::for_target(4, &t("1-D"))), vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(pairs(&IsiEdgeSet::for_target(5, &t("1-D^2"))), vec![(0, 2), (1, 3), (2, 4)]);
        assert!(IsiEdgeSet::for_target(5, &t("1")).is_empty());
        let gen = IsiEdgeSet::for_target(4, &t("1+0.5D-0.2D^2"));
        assert_eq!(gen.len(), 3 + 2);
        assert!(!gen.is_forest());
        assert!(IsiEdgeSet::for_target(9, &t("1-D^2")).is_forest());
        for nd in gen.nodes() {
            assert!(nd.lag <= 2 && nd.lag >= 1);
        }
        assert!(IsiEdgeSet::new(3, [(1, 1)]).is_err());
        assert!(IsiEdgeSet::new(3, [(1, 3)]).is_err());
    }

    fn graph_for(h: &ParityCheckMatrix) -> PrGraph {
        PrGraph::with_isi(h, IsiEdgeSet::empty(h.n_vars())).unwrap()
    }

    #[test]
    fn check_message_examples() {
        // check over variables 0, 1, 2: message to 0 sees tanh values 0.5 and 0.8
        let h = ParityCheckMatrix::new(3, vec![vec![0, 1, 2]]).unwrap();
        let g = graph_for(&h);
        let mut st = FieldState::initial(&g, &[0.0, 0.5f64.atanh(), 0.8f64.atanh()]);
        let mu = check_message(&g, &st, 0);
        assert!((mu - 0.4f64.atanh()).abs() < 1e-12);
        assert!((mu - 0.423_648_930_193_601_8).abs() < 1e-12);
        // an erased neighbour annihilates the product
        st.eta_check[1] = 0.0;
        assert_eq!(check_message(&g, &st, 0), 0.0);
        // degree 2: the message is the other field
        let h2 = ParityCheckMatrix::new(2, vec![vec![0, 1]]).unwrap();
        let g2 = graph_for(&h2);
        let st2 = FieldState::initial(&g2, &[0.3, -1.7]);
        assert!((check_message(&g2, &st2, 0) + 1.7).abs() < 1e-12);
    }

    #[test]
    fn isi_message_examples() {
        let h = ParityCheckMatrix::new(2, vec![]).unwrap();
        let g = PrGraph::with_isi(&h, IsiEdgeSet::new(2, [(0, 1)]).unwrap()).unwrap();
        let st = FieldState::initial(&g, &[0.0, 0.5f64.atanh()]);
        let z = isi_message(&st, 0, -0.9);
        assert!((z - (-0.45f64).atanh()).abs() < 1e-12);
        assert!((z + 0.484_700_278_594_052_2).abs() < 1e-12);
        assert_eq!(isi_message(&st, 0, 0.0), 0.0);
        assert_eq!(isi_message(&st, 1, -0.9), 0.0);
    }

    #[test]
    fn first_iteration_fields_equal_u() {
        let h = ParityCheckMatrix::from_dense(&[[1u8, 1, 0, 1], [0, 1, 1, 1]]).unwrap();
        let g = build_graph(&h, &t("1-D"));
        let cp = ChannelCouplings { u: vec![0.3, -0.2, 1.1, 0.4], q: vec![-1.5], boundary: vec![0.0; 4], precision: 1.5 };
        let st0 = FieldState::initial(&g, &cp.u);
        assert!(st0.mu.iter().chain(&st0.zeta).all(|&m| m == 0.0));
        assert_eq!(likelihoods(&g, &st0, &cp, LambdaMode::Literal), cp.u);
        let st1 = update_fields(&g, &st0, &cp);
        assert_eq!(st1.iteration, 1);
        for e in 0..g.n_edges() {
            assert_eq!(st1.eta_check[e], cp.u[g.edge_var(e)]);
        }
        for s in 0..st1.eta_isi.len() {
            assert_eq!(st1.eta_isi[s], cp.u[g.isi().slot_var(s)]);
        }
    }

    #[test]
    fn isolated_bit_keeps_its_field() {
        let h = ParityCheckMatrix::new(2, vec![vec![1]]).unwrap();
        let g = graph_for(&h);
        let cp = ChannelCouplings::memoryless(vec![2.0, -0.5]);
        let res = PrbpDecoder::new(g, PrbpOptions { max_iter: 5, early_stop: false, ..Default::default() }).decode(&cp);
        assert_eq!(res.lambdas[0], 2.0);
    }

    fn repetition_with_checks() -> ParityCheckMatrix {
        ParityCheckMatrix::from_dense(&[
            [1u8, 1, 0, 0, 0, 0],
            [0, 1, 1, 0, 0, 0],
            [0, 0, 0, 1, 1, 0],
            [0, 0, 0, 0, 1, 1],
        ])
        .unwrap()
    }

    #[test]
    fn memoryless_noiseless_converges_in_one_iteration() {
        let h = repetition_with_checks();
        let g = derive_generator(&h);
        let x = g.encode(&[1, 0]).unwrap();
        let tgt = t("1");
        let noise = NoiseSpec::from_snr_db(&tgt, 60.0);
        let y = tgt.convolve(&to_bipolar(&x), 1.0);
        let cp = compute_couplings(&y, &tgt, &noise, 1.0, Convention::Paper).unwrap();
        let res = decode(&h, &tgt, &cp, 10);
        assert!(res.converged);
        assert_eq!(res.iterations_used, 1);
        assert_eq!(res.hard_bits, x);
    }

    #[test]
    fn dicode_noiseless_recovers_codeword() {
        let h = repetition_with_checks();
        let g = derive_generator(&h);
        let tgt = t("1-D");
        let noise = NoiseSpec::from_snr_db(&tgt, 30.0);
        for msg in [[0u8, 0], [1, 0], [0, 1], [1, 1]] {
            let x = g.encode(&msg).unwrap();
            let y = tgt.convolve(&to_bipolar(&x), 1.0);
            let cp = compute_couplings(&y, &tgt, &noise, 1.0, Convention::Paper).unwrap();
            let res = decode(&h, &tgt, &cp, 20);
            assert!(res.converged, "{msg:?}");
            assert_eq!(res.hard_bits, x);
        }
    }

    #[test]
    fn trace_records_each_iteration() {
        let h = repetition_with_checks();
        let tgt = t("1-D");
        let cp = ChannelCouplings { u: vec![0.1, -0.4, 0.3, 0.2, -0.1, 0.5], q: vec![-0.8], boundary: vec![0.0; 6], precision: 0.8 };
        let opts = PrbpOptions { max_iter: 4, early_stop: false, record_trace: true, ..Default::default() };
        let res = PrbpDecoder::new(build_graph(&h, &tgt), opts).decode(&cp);
        assert_eq!(res.trace.len(), 4);
        assert_eq!(res.trace[3].iteration, 4);
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &res.trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("iteration,min_abs_eta"));
    }

    #[test]
    fn flooding_is_independent_of_check_order() {
        let mut rng = CounterRng::new(11);
        let rows: Vec<Vec<usize>> = vec![vec![0, 1, 4], vec![1, 2, 5], vec![2, 3, 4], vec![0, 3, 5], vec![1, 3, 6]];
        let h = ParityCheckMatrix::new(7, rows.clone()).unwrap();
        let mut rev = rows.clone();
        rev.reverse();
        let hr = ParityCheckMatrix::new(7, rev).unwrap();
        let tgt = t("1-D");
        let u: Vec<f64> = (0..7).map(|_| rng.next_gaussian()).collect();
        let cp = ChannelCouplings { u, q: vec![-0.7], boundary: vec![0.0; 7], precision: 0.7 };
        let (g, gr) = (build_graph(&h, &tgt), build_graph(&hr, &tgt));
        let mut a = FieldState::initial(&g, &cp.u);
        let mut b = FieldState::initial(&gr, &cp.u);
        for _ in 0..6 {
            a = update_fields(&g, &a, &cp);
            b = update_fields(&gr, &b, &cp);
            for i in 0..7 {
                for j in h.col(i) {
                    let ea = g.find_edge(i, *j).unwrap();
                    let eb = gr.find_edge(i, 4 - *j).unwrap();
                    assert!((a.eta_check[ea] - b.eta_check[eb]).abs() < 1e-12);
                    assert!((a.mu[ea] - b.mu[eb]).abs() < 1e-12);
                }
            }
            for (x, y) in a.eta_isi.iter().zip(&b.eta_isi) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
