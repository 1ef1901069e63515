//! Ground truth for small instances: exhaustive marginals, Bethe free
//! energy, belief reconstruction from decoder fields, and a generator of
//! loop-free combined graphs.

use serde::Serialize;

use crate::channel::ChannelCouplings;
use crate::error::{Error, Result};
use crate::ldpc::ParityCheckMatrix;
use crate::numerics::{atanh_clamped, tanh_clamped};
use crate::prbp::{FieldState, IsiEdgeSet, PrGraph, PrbpDecoder, PrbpOptions, UnionFind};
use crate::rng::CounterRng;

/// Largest block handled by [`exact_marginals`].
pub const ENUMERATION_LIMIT: usize = 24;

/// Exact per-bit marginals of the joint distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactMarginals {
    /// P(x_i = +1)
    pub p_plus: Vec<f64>,
    pub log_z: f64,
}

impl ExactMarginals {
    /// Marginals as fields `0.5 ln(P+/P-)`.
    pub fn fields(&self) -> Vec<f64> {
        self.p_plus.iter().map(|&p| 0.5 * (p / (1.0 - p)).ln()).collect()
    }
}

/// Log-weight of the configuration `mask` (bit i set: x_i = -1), ignoring
/// parity.
fn log_weight(mask: u32, u: &[f64], nodes: &[(usize, usize, f64)]) -> f64 {
    let x = |i: usize| if (mask >> i) & 1 == 1 { -1.0 } else { 1.0 };
    let mut w: f64 = u.iter().enumerate().map(|(i, ui)| ui * x(i)).sum();
    for &(a, b, q) in nodes {
        w -= q * x(a) * x(b);
    }
    w
}

/// Enumerate all 2^N configurations of
/// `prod delta(checks) exp(sum u_i x_i - sum Q x_a x_b)`.
pub fn exact_marginals(h: &ParityCheckMatrix, couplings: &ChannelCouplings, isi: &IsiEdgeSet) -> Result<ExactMarginals> {
    let n = h.n_vars();
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge { n, limit: ENUMERATION_LIMIT });
    }
    if couplings.n() != n {
        return Err(Error::LengthMismatch { expected: n, got: couplings.n() });
    }
    if isi.n() != n {
        return Err(Error::LengthMismatch { expected: n, got: isi.n() });
    }
    let checks: Vec<u32> = h.check_rows().iter().map(|r| r.iter().fold(0u32, |m, &i| m | (1 << i))).collect();
    let nodes: Vec<(usize, usize, f64)> =
        isi.nodes().iter().map(|nd| (nd.a, nd.b, couplings.coupling(nd.lag))).collect();
    // running sums scaled by exp(-top)
    let mut top = f64::NEG_INFINITY;
    let mut z = 0.0;
    let mut zp = vec![0.0; n];
    for mask in 0..(1u32 << n) {
        if checks.iter().any(|&c| (c & mask).count_ones() % 2 == 1) {
            continue;
        }
        let w = log_weight(mask, &couplings.u, &nodes);
        if w > top {
            let s = (top - w).exp();
            z *= s;
            zp.iter_mut().for_each(|v| *v *= s);
            top = w;
        }
        let e = (w - top).exp();
        z += e;
        for (i, v) in zp.iter_mut().enumerate() {
            if (mask >> i) & 1 == 0 {
                *v += e;
            }
        }
    }
    if top == f64::NEG_INFINITY || !top.is_finite() {
        return Err(Error::ZeroSupport);
    }
    Ok(ExactMarginals { p_plus: zp.iter().map(|v| v / z).collect(), log_z: top + z.ln() })
}

/// Beliefs of every factor and variable of the combined graph.
///
/// Tables index configurations by bits: bit `k` set means the `k`-th member
/// (row order for checks, `(a, b)` for ISI nodes) is -1.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefSet {
    /// [P(+1), P(-1)]
    pub var: Vec<[f64; 2]>,
    pub check: Vec<Vec<f64>>,
    pub isi: Vec<[f64; 4]>,
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

/// Softmax of `w` in place.
fn softmax(w: &mut [f64]) {
    let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    w.iter_mut().for_each(|x| *x = (*x - m).exp());
    normalize(w);
}

fn bipolar(bits: usize, k: usize) -> f64 {
    if (bits >> k) & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

fn var_belief(field: f64) -> [f64; 2] {
    let mut w = [field, -field];
    softmax(&mut w);
    w
}

const TABLE_LIMIT: usize = 20;

/// Reconstruct beliefs from the fields of a decoder state.
pub fn beliefs_from_fields(graph: &PrGraph, state: &FieldState, couplings: &ChannelCouplings) -> Result<BeliefSet> {
    if !state.is_finite() {
        return Err(Error::NonFinite);
    }
    let isi = graph.isi();
    let mut check = Vec::with_capacity(graph.n_checks());
    for j in 0..graph.n_checks() {
        let r = graph.check_edges(j);
        let d = r.len();
        if d > TABLE_LIMIT {
            return Err(Error::TooLarge { n: d, limit: TABLE_LIMIT });
        }
        let mut w: Vec<f64> = (0..1usize << d)
            .map(|c| {
                if c.count_ones() % 2 == 1 {
                    f64::NEG_INFINITY
                } else {
                    r.clone().enumerate().map(|(k, e)| state.eta_check[e] * bipolar(c, k)).sum()
                }
            })
            .collect();
        softmax(&mut w);
        check.push(w);
    }
    let mut pair = Vec::with_capacity(isi.len());
    for (k, nd) in isi.nodes().iter().enumerate() {
        let q = couplings.coupling(nd.lag);
        let (ea, eb) = (state.eta_isi[2 * k], state.eta_isi[2 * k + 1]);
        let mut w = [0.0; 4];
        for (c, v) in w.iter_mut().enumerate() {
            let (xa, xb) = (bipolar(c, 0), bipolar(c, 1));
            *v = -q * xa * xb + ea * xa + eb * xb;
        }
        softmax(&mut w);
        pair.push(w);
    }
    let mut var = Vec::with_capacity(graph.n());
    for i in 0..graph.n() {
        let u = couplings.u[i];
        let edges = graph.var_edges(i);
        let slots = isi.slots_of(i);
        let q = edges.len();
        let d = q + slots.len();
        let field = if q == 0 || d <= 1 {
            u + edges.iter().map(|&e| state.mu[e]).sum::<f64>() - slots.iter().map(|&s| state.zeta[s]).sum::<f64>()
        } else {
            let lam: f64 = edges.iter().map(|&e| state.eta_check[e] - u / q as f64).sum::<f64>()
                + slots.iter().map(|&s| state.eta_isi[s]).sum::<f64>();
            lam / (d - 1) as f64
        };
        var.push(var_belief(field));
    }
    Ok(BeliefSet { var, check, isi: pair })
}

impl BeliefSet {
    /// Largest |sum - 1| over all tables.
    pub fn normalization_residual(&self) -> f64 {
        let v = self.var.iter().map(|b| (b[0] + b[1] - 1.0).abs());
        let c = self.check.iter().map(|b| (b.iter().sum::<f64>() - 1.0).abs());
        let p = self.isi.iter().map(|b| (b.iter().sum::<f64>() - 1.0).abs());
        v.chain(c).chain(p).fold(0.0, f64::max)
    }

    /// Largest deviation between a factor marginal and the variable belief.
    pub fn consistency_residual(&self, graph: &PrGraph) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, table) in self.check.iter().enumerate() {
            for (k, e) in graph.check_edges(j).enumerate() {
                let i = graph.edge_var(e);
                let plus: f64 = table.iter().enumerate().filter(|(c, _)| (c >> k) & 1 == 0).map(|(_, p)| p).sum();
                worst = worst.max((plus - self.var[i][0]).abs());
            }
        }
        for (table, nd) in self.isi.iter().zip(graph.isi().nodes()) {
            let pa = table[0] + table[2];
            let pb = table[0] + table[1];
            worst = worst.max((pa - self.var[nd.a][0]).abs()).max((pb - self.var[nd.b][0]).abs());
        }
        worst
    }
}

fn xlnx_over(b: f64, logf: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else if logf == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        b * (b.ln() - logf)
    }
}

/// Bethe free energy `U - H` of a belief set.
///
/// Each check factor carries `u_i / q_i` of every member's field; variables
/// without checks get a unary factor `exp(u_i x_i)`. Entropy weights use the
/// actual number of factors touching each variable.
pub fn bethe_free_energy(beliefs: &BeliefSet, graph: &PrGraph, couplings: &ChannelCouplings) -> f64 {
    let u = &couplings.u;
    let q_of = |i: usize| graph.var_edges(i).len();
    let mut f = 0.0;
    for (j, table) in beliefs.check.iter().enumerate() {
        let members: Vec<usize> = graph.check_edges(j).map(|e| graph.edge_var(e)).collect();
        for (c, &b) in table.iter().enumerate() {
            let logf = if c.count_ones() % 2 == 1 {
                f64::NEG_INFINITY
            } else {
                members.iter().enumerate().map(|(k, &i)| u[i] / q_of(i) as f64 * bipolar(c, k)).sum()
            };
            f += xlnx_over(b, logf);
        }
    }
    for (table, nd) in beliefs.isi.iter().zip(graph.isi().nodes()) {
        let q = couplings.coupling(nd.lag);
        for (c, &b) in table.iter().enumerate() {
            f += xlnx_over(b, -q * bipolar(c, 0) * bipolar(c, 1));
        }
    }
    for (i, b) in beliefs.var.iter().enumerate() {
        let unary = q_of(i) == 0;
        if unary {
            f += xlnx_over(b[0], u[i]) + xlnx_over(b[1], -u[i]);
        }
        let d = q_of(i) + graph.isi().slots_of(i).len() + usize::from(unary);
        let ent: f64 = b.iter().map(|&p| xlnx_over(p, 0.0)).sum();
        f -= (d as f64 - 1.0) * ent;
    }
    f
}

/// Largest deviation between the stored fields and the right-hand sides of
/// the fixed-point equations evaluated from those same fields.
pub fn stationarity_check(graph: &PrGraph, state: &FieldState, couplings: &ChannelCouplings) -> f64 {
    let isi = graph.isi();
    let mu: Vec<f64> = (0..graph.n_edges())
        .map(|e| {
            let j = graph.edge_check(e);
            let p: f64 = graph.check_edges(j).filter(|&f| f != e).map(|f| tanh_clamped(state.eta_check[f])).product();
            atanh_clamped(p)
        })
        .collect();
    let tq: Vec<f64> = isi.node_couplings(couplings).into_iter().map(tanh_clamped).collect();
    let zeta: Vec<f64> =
        (0..2 * isi.len()).map(|s| atanh_clamped(tanh_clamped(state.eta_isi[s ^ 1]) * tq[s / 2])).collect();
    let mut worst: f64 = 0.0;
    for i in 0..graph.n() {
        let u = couplings.u[i];
        for &e in graph.var_edges(i) {
            let rhs = u + graph.var_edges(i).iter().filter(|&&f| f != e).map(|&f| mu[f]).sum::<f64>()
                - isi.slots_of(i).iter().map(|&s| zeta[s]).sum::<f64>();
            worst = worst.max((rhs - state.eta_check[e]).abs());
        }
        for &s in isi.slots_of(i) {
            let rhs = u - isi.slots_of(i).iter().filter(|&&t| t != s).map(|&t| zeta[t]).sum::<f64>()
                + graph.var_edges(i).iter().map(|&f| mu[f]).sum::<f64>();
            worst = worst.max((rhs - state.eta_isi[s]).abs());
        }
    }
    worst
}

/// A combined graph with no cycles plus its couplings.
#[derive(Clone, Debug)]
pub struct TreeInstance {
    pub h: ParityCheckMatrix,
    pub isi: IsiEdgeSet,
    pub couplings: ChannelCouplings,
}

impl TreeInstance {
    pub fn graph(&self) -> PrGraph {
        PrGraph::with_isi(&self.h, self.isi.clone()).expect("generator sizes agree")
    }

    /// Longest path in the combined graph, counting variable-to-variable hops.
    pub fn diameter_bound(&self) -> usize {
        self.h.n_vars() + self.isi.len() + self.h.n_checks()
    }
}

/// Random loop-free instance on `n` variables.
///
/// Check trees are grown by attaching each new check to one variable already
/// in a tree plus fresh variables, or by starting a new tree. Labels are
/// shuffled, then chain ISI pairs `(k, k + p)` for `p = 1, 2` are added in
/// order whenever they join two separate components.
pub fn tree_instance(n: usize, seed: u64) -> TreeInstance {
    tree_instance_with(n, seed, &[1, 2])
}

/// [`tree_instance`] with ISI pairs only at the given lags (none for a
/// memoryless instance).
pub fn tree_instance_with(n: usize, seed: u64, lags: &[usize]) -> TreeInstance {
    let mut rng = CounterRng::for_stream(seed, &[n as u64, 0x7ee]);
    let mut rows: Vec<Vec<usize>> = Vec::new();
    let mut used = 0usize;
    while used + 1 < n && rng.below(5) != 0 {
        let fresh = 1 + rng.below(3).min(n - used - 1);
        let mut row = Vec::new();
        if used > 0 && rng.below(3) != 0 {
            row.push(rng.below(used));
            row.extend(used..used + fresh);
            used += fresh;
        } else {
            let take = (fresh + 1).min(n - used);
            row.extend(used..used + take);
            used += take;
        }
        rows.push(row);
    }
    let mut label: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut label);
    let rows: Vec<Vec<usize>> = rows.into_iter().map(|r| r.into_iter().map(|i| label[i]).collect()).collect();
    let mut uf = UnionFind::new(n);
    for r in &rows {
        for w in r.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    let mut pairs = Vec::new();
    for &p in lags {
        for k in 0..n.saturating_sub(p) {
            if rng.below(4) != 0 && uf.union(k, k + p) {
                pairs.push((k, k + p));
            }
        }
    }
    let u: Vec<f64> = (0..n).map(|_| 0.8 * rng.next_gaussian()).collect();
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    let q: Vec<f64> = (0..max_lag).map(|_| 1.2 * (2.0 * rng.next_open01() - 1.0)).collect();
    TreeInstance {
        h: ParityCheckMatrix::new(n, rows).expect("rows are in range"),
        isi: IsiEdgeSet::new(n, pairs).expect("pairs are in range"),
        couplings: ChannelCouplings { u, q, boundary: vec![0.0; n], precision: f64::NAN },
    }
}

/// Run the decoder on a tree instance past convergence and return the state.
pub fn converge(inst: &TreeInstance, couplings: &ChannelCouplings) -> (PrGraph, FieldState) {
    let graph = inst.graph();
    let opts = PrbpOptions { max_iter: inst.diameter_bound() + 2, early_stop: false, keep_state: true, ..Default::default() };
    let dec = PrbpDecoder::new(graph, opts);
    let state = dec.decode(couplings).field_snapshot.expect("state kept");
    (dec.graph().clone(), state)
}

pub const TREE_SUITE_LIMIT: usize = 16;

/// Worst-case deviations over a batch of random tree instances.
#[derive(Clone, Debug, Default, Serialize)]
pub struct OracleSummary {
    pub instances: usize,
    pub size: usize,
    pub seed: u64,
    pub lags: Vec<usize>,
    pub max_marginal_error: f64,
    pub max_free_energy_error: f64,
    pub max_stationarity_residual: f64,
    pub max_consistency_residual: f64,
    pub max_normalization_residual: f64,
    pub map_disagreements: usize,
}

/// Compare decoder beliefs with exhaustive enumeration on `count` random
/// loop-free instances of `size` variables.
pub fn tree_suite(size: usize, count: usize, seed: u64, lags: &[usize]) -> Result<OracleSummary> {
    if size == 0 || size > TREE_SUITE_LIMIT {
        return Err(Error::TooLarge { n: size, limit: TREE_SUITE_LIMIT });
    }
    let mut s = OracleSummary { instances: count, size, seed, lags: lags.to_vec(), ..Default::default() };
    for t in 0..count {
        let inst = tree_instance_with(size, seed.wrapping_add(t as u64), lags);
        let (graph, state) = converge(&inst, &inst.couplings);
        let exact = exact_marginals(&inst.h, &inst.couplings, &inst.isi)?;
        let beliefs = beliefs_from_fields(&graph, &state, &inst.couplings)?;
        for (b, p) in beliefs.var.iter().zip(&exact.p_plus) {
            s.max_marginal_error = s.max_marginal_error.max((b[0] - p).abs());
        }
        let lambdas = crate::prbp::likelihoods(&graph, &state, &inst.couplings, crate::prbp::LambdaMode::FullPosterior);
        s.map_disagreements += lambdas
            .iter()
            .zip(&exact.p_plus)
            .filter(|(l, p)| (**l >= 0.0) != (**p >= 0.5) && (**p - 0.5).abs() > 1e-9)
            .count();
        let f = bethe_free_energy(&beliefs, &graph, &inst.couplings);
        s.max_free_energy_error = s.max_free_energy_error.max((f + exact.log_z).abs());
        s.max_stationarity_residual = s.max_stationarity_residual.max(stationarity_check(&graph, &state, &inst.couplings));
        s.max_consistency_residual = s.max_consistency_residual.max(beliefs.consistency_residual(&graph));
        s.max_normalization_residual = s.max_normalization_residual.max(beliefs.normalization_residual());
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_isi(n: usize) -> IsiEdgeSet {
        IsiEdgeSet::empty(n)
    }

    #[test]
    fn single_bit_marginal() {
        let h = ParityCheckMatrix::new(1, vec![]).unwrap();
        let m = exact_marginals(&h, &ChannelCouplings::memoryless(vec![2.0]), &empty_isi(1)).unwrap();
        assert!((m.p_plus[0] - 0.982_013_790_037_908_4).abs() < 1e-12);
        assert!((m.log_z - (2f64.exp() + (-2f64).exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn coupled_pair_is_symmetric() {
        let h = ParityCheckMatrix::new(2, vec![]).unwrap();
        let cp = ChannelCouplings { u: vec![0.0, 0.0], q: vec![0.7], boundary: vec![0.0; 2], precision: 1.0 };
        let m = exact_marginals(&h, &cp, &IsiEdgeSet::new(2, [(0, 1)]).unwrap()).unwrap();
        assert!((m.p_plus[0] - 0.5).abs() < 1e-12 && (m.p_plus[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn repetition_code_marginal() {
        let h = ParityCheckMatrix::from_dense(&[[1u8, 1, 0], [0, 1, 1]]).unwrap();
        let t = 0.9;
        let m = exact_marginals(&h, &ChannelCouplings::memoryless(vec![t, 0.0, 0.0]), &empty_isi(3)).unwrap();
        assert!((m.p_plus[0] - t.exp() / (t.exp() + (-t).exp())).abs() < 1e-12);
    }

    #[test]
    fn enumeration_guard() {
        let h = ParityCheckMatrix::new(25, vec![]).unwrap();
        assert!(matches!(
            exact_marginals(&h, &ChannelCouplings::memoryless(vec![0.0; 25]), &empty_isi(25)),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn single_bit_free_energy() {
        let h = ParityCheckMatrix::new(1, vec![]).unwrap();
        let g = PrGraph::with_isi(&h, empty_isi(1)).unwrap();
        let u = 1.3;
        let cp = ChannelCouplings::memoryless(vec![u]);
        let st = FieldState::initial(&g, &cp.u);
        let b = beliefs_from_fields(&g, &st, &cp).unwrap();
        let expect = var_belief(u);
        assert!((b.var[0][0] - expect[0]).abs() < 1e-15);
        let f = bethe_free_energy(&b, &g, &cp);
        assert!((f + (u.exp() + (-u).exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn parity_violating_support_is_infinite() {
        let h = ParityCheckMatrix::from_dense(&[[1u8, 1]]).unwrap();
        let g = PrGraph::with_isi(&h, empty_isi(2)).unwrap();
        let cp = ChannelCouplings::memoryless(vec![0.2, -0.1]);
        let b = BeliefSet { var: vec![[0.5, 0.5]; 2], check: vec![vec![0.25; 4]], isi: vec![] };
        assert_eq!(bethe_free_energy(&b, &g, &cp), f64::INFINITY);
    }

    #[test]
    fn zero_coupling_pair_factorizes() {
        let h = ParityCheckMatrix::new(2, vec![]).unwrap();
        let isi = IsiEdgeSet::new(2, [(0, 1)]).unwrap();
        let g = PrGraph::with_isi(&h, isi).unwrap();
        let cp = ChannelCouplings { u: vec![0.4, -0.9], q: vec![0.0], boundary: vec![0.0; 2], precision: 1.0 };
        let dec = PrbpDecoder::new(g.clone(), PrbpOptions { max_iter: 3, early_stop: false, keep_state: true, ..Default::default() });
        let st = dec.decode(&cp).field_snapshot.unwrap();
        let b = beliefs_from_fields(&g, &st, &cp).unwrap();
        for c in 0..4 {
            let pa = b.var[0][c & 1];
            let pb = b.var[1][(c >> 1) & 1];
            assert!((b.isi[0][c] - pa * pb).abs() < 1e-10);
        }
    }

    #[test]
    fn stationarity_at_iteration_zero() {
        let inst = tree_instance(8, 4);
        let g = inst.graph();
        let st = FieldState::initial(&g, &inst.couplings.u);
        let r = stationarity_check(&g, &st, &inst.couplings);
        let st1 = crate::prbp::update_fields(&g, &crate::prbp::update_fields(&g, &st, &inst.couplings), &inst.couplings);
        let mut expect: f64 = 0.0;
        for e in 0..g.n_edges() {
            expect = expect.max((st1.eta_check[e] - st.eta_check[e]).abs());
        }
        for s in 0..st.eta_isi.len() {
            expect = expect.max((st1.eta_isi[s] - st.eta_isi[s]).abs());
        }
        assert!((r - expect).abs() < 1e-12);
    }

    #[test]
    fn generator_is_loop_free() {
        for seed in 0..50 {
            let inst = tree_instance(12, seed);
            let mut uf = UnionFind::new(12);
            for r in inst.h.check_rows() {
                for w in r.windows(2) {
                    assert!(uf.union(w[0], w[1]));
                }
            }
            for nd in inst.isi.nodes() {
                assert!(uf.union(nd.a, nd.b));
                assert!(nd.lag <= 2);
            }
        }
    }

    #[test]
    fn small_tree_suite() {
        let s = tree_suite(10, 20, 1, &[1, 2]).unwrap();
        assert!(s.max_marginal_error < 1e-8, "{s:?}");
        assert!(s.max_free_energy_error < 1e-6, "{s:?}");
        assert!(s.max_stationarity_residual < 1e-9, "{s:?}");
        assert!(s.max_consistency_residual < 1e-8, "{s:?}");
        assert_eq!(s.map_disagreements, 0);
    }
}
