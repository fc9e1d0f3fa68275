//! Exact oracle, manipulation fuzzers, INPA probes and ratio measurement.

use crate::cycle_graph::{CycleGraph, IndependentSet, NodeId, NodeSet};
use crate::error::{BxError, Result};
use crate::exact;
use crate::local_search::Algorithm;
use crate::mechanisms::{solve_wishes, DEFAULT_NODE_CAP};
use crate::model::{utility, AgentId, LengthFunction, TradingCycle, Utility, WishListVector};
use crate::rational::{fmt_rational, int, Rational};
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};

/// Strategy sets up to this size are enumerated exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 12;

/// Lexicographically first maximum-weight independent set.
pub fn oracle_max_weight_is(g: &CycleGraph, cap: usize) -> Result<IndependentSet> {
    check_cap(g, cap)?;
    let all: Vec<NodeId> = g.node_ids().collect();
    Ok(exact::lex_first_optimum(g, &all).0.into_iter().collect())
}

/// Maximum independent-set weight.
pub fn oracle_weight(g: &CycleGraph, cap: usize) -> Result<Rational> {
    check_cap(g, cap)?;
    let all: Vec<NodeId> = g.node_ids().collect();
    Ok(g.to_rational(exact::max_weight(g, &all)))
}

fn check_cap(g: &CycleGraph, cap: usize) -> Result<()> {
    if g.len() > cap {
        return Err(BxError::OracleCap { nodes: g.len(), cap });
    }
    Ok(())
}

/// Plain `2^|V|` enumeration; only for `|V| ≤ 20`.
pub fn naive_max_weight(g: &CycleGraph) -> Result<Rational> {
    if g.len() > 20 {
        return Err(BxError::OracleCap { nodes: g.len(), cap: 20 });
    }
    let mut best = 0i64;
    for bits in 0u32..(1u32 << g.len()) {
        let mut used = 0u128;
        let mut w = 0i64;
        let mut ok = true;
        for v in 0..g.len() {
            if bits >> v & 1 == 1 {
                let m = g.node(v).mask;
                if used & m != 0 {
                    ok = false;
                    break;
                }
                used |= m;
                w += g.int_weight(v);
            }
        }
        if ok {
            best = best.max(w);
        }
    }
    Ok(g.to_rational(best))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Strategy {
    /// Nodes of `α⁻¹(i)` hidden from the cycle graph.
    HideNodes(Vec<TradingCycle>),
    /// Reported wish list, a subset of the true one.
    Report(Vec<AgentId>),
}

/// A strict utility gain from deviating.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ManipulationFinding {
    pub agent: AgentId,
    pub strategy: Strategy,
    pub honest_utility: Utility,
    pub manipulated_utility: Utility,
}

impl ManipulationFinding {
    pub fn to_json(&self) -> Value {
        let strategy = match &self.strategy {
            Strategy::HideNodes(cs) => json!({"hide": cs.iter().map(TradingCycle::ids).collect::<Vec<_>>()}),
            Strategy::Report(r) => json!({"report": r.iter().map(|a| a.0).collect::<Vec<_>>()}),
        };
        json!({
            "agent": self.agent.0,
            "strategy": strategy,
            "honest_utility": self.honest_utility.to_string(),
            "manipulated_utility": self.manipulated_utility.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FuzzConfig {
    /// Samples per agent when the strategy space is too large to enumerate.
    pub budget: usize,
    pub seed: u64,
    pub exhaustive_limit: usize,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self { budget: 64, seed: 0, exhaustive_limit: EXHAUSTIVE_LIMIT }
    }
}

/// Non-empty subsets of `items`, exhaustive up to the limit, otherwise sampled.
fn strategy_subsets<T: Clone>(items: &[T], cfg: &FuzzConfig, salt: u64, include_empty: bool) -> Vec<Vec<T>> {
    let m = items.len();
    let pick = |bits: u64| -> Vec<T> { (0..m).filter(|&t| bits >> t & 1 == 1).map(|t| items[t].clone()).collect() };
    if m <= cfg.exhaustive_limit {
        let start = if include_empty { 0 } else { 1 };
        return (start..1u64 << m).map(pick).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    // single-item strategies first: they are the natural minimal deviations
    for (t, item) in items.iter().enumerate().take(cfg.budget) {
        seen.insert(vec![t]);
        out.push(vec![item.clone()]);
    }
    let mut tries = 0;
    while out.len() < cfg.budget && tries < cfg.budget * 8 {
        tries += 1;
        let size = rng.gen_range(1..=m);
        let mut idx: Vec<usize> = (0..m).collect();
        idx.shuffle(&mut rng);
        idx.truncate(size);
        idx.sort_unstable();
        if seen.insert(idx.clone()) {
            out.push(idx.into_iter().map(|t| items[t].clone()).collect());
        }
    }
    out
}

/// `u(i, I)` on the cycle graph: `λ(len)` of the node holding `i`, else 0.
pub fn graph_utility(g: &CycleGraph, set: &IndependentSet, i: AgentId) -> Utility {
    set.iter()
        .find(|&&v| g.node(v).cycle.contains(i))
        .map_or(Utility::Finite(Rational::zero()), |&v| Utility::Finite(g.lambda().lam(g.node(v).len())))
}

fn best_possible(g: &CycleGraph, i: AgentId) -> Utility {
    g.nodes_of(i)
        .iter()
        .map(|&v| Utility::Finite(g.lambda().lam(g.node(v).len())))
        .max()
        .unwrap_or(Utility::Finite(Rational::zero()))
}

/// For every agent `i` and hidden set `S ⊆ α⁻¹(i)`, reports each strict gain of
/// `u(i, Alg(G[V − S]))` over `u(i, Alg(G))`.
pub fn fuzz_truthfulness_nodes(
    alg: &dyn Algorithm,
    g: &CycleGraph,
    cfg: &FuzzConfig,
) -> Result<Vec<ManipulationFinding>> {
    let honest = alg.run(g)?.set;
    let mut findings = Vec::new();
    for a in 1..=g.n() as u32 {
        let i = AgentId(a);
        let base = graph_utility(g, &honest, i);
        if base >= best_possible(g, i) {
            continue;
        }
        for s in strategy_subsets(g.nodes_of(i), cfg, a as u64, false) {
            let hide: NodeSet = s.iter().copied().collect();
            let (sub, _) = g.remove_nodes(&hide)?;
            let out = alg.run(&sub)?.set;
            let u = graph_utility(&sub, &out, i);
            if u > base {
                findings.push(ManipulationFinding {
                    agent: i,
                    strategy: Strategy::HideNodes(s.iter().map(|&v| g.node(v).cycle.clone()).collect()),
                    honest_utility: base,
                    manipulated_utility: u,
                });
            }
        }
    }
    findings.sort();
    Ok(findings)
}

/// For every agent `i` and report `W_i ⊊ W*_i`, reports each strict gain in true utility.
pub fn fuzz_truthfulness_wishlists(
    alg: &dyn Algorithm,
    truth: &WishListVector,
    lambda: &LengthFunction,
    cfg: &FuzzConfig,
) -> Result<Vec<ManipulationFinding>> {
    let (honest, _) = solve_wishes(alg, truth, lambda)?;
    let g = CycleGraph::from_wishes(truth, lambda)?;
    let mut findings = Vec::new();
    for i in truth.agents() {
        let base = utility(i, &honest, truth, lambda)?;
        if base >= best_possible(&g, i) {
            continue;
        }
        let full: Vec<AgentId> = truth.wishes(i).iter().copied().collect();
        for report in strategy_subsets(&full, cfg, i.0 as u64, true) {
            if report.len() == full.len() {
                continue;
            }
            let w = truth.with_report(i, report.iter().copied().collect())?;
            let (ex, _) = solve_wishes(alg, &w, lambda)?;
            let u = utility(i, &ex, truth, lambda)?;
            if u > base {
                findings.push(ManipulationFinding {
                    agent: i,
                    strategy: Strategy::Report(report),
                    honest_utility: base,
                    manipulated_utility: u,
                });
            }
        }
    }
    findings.sort();
    Ok(findings)
}

/// A non-partaking agent whose hidden nodes changed the output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InpaViolation {
    pub agent: AgentId,
    pub hidden: Vec<TradingCycle>,
    pub before: BTreeSet<TradingCycle>,
    pub after: BTreeSet<TradingCycle>,
}

/// Every `(i ∉ α(Alg(G)), S ⊆ α⁻¹(i))` for which `Alg(G[V − S]) ≠ Alg(G)`.
pub fn inpa_violations(alg: &dyn Algorithm, g: &CycleGraph, cfg: &FuzzConfig) -> Result<Vec<InpaViolation>> {
    let out = alg.run(g)?.set;
    let before = g.cycles_of(&out);
    let partaking = g.agent_mask(&out);
    let mut bad = Vec::new();
    for a in 1..=g.n() as u32 {
        let i = AgentId(a);
        if partaking & i.bit() != 0 {
            continue;
        }
        for s in strategy_subsets(g.nodes_of(i), cfg, a as u64, false) {
            let hide: NodeSet = s.iter().copied().collect();
            let (sub, _) = g.remove_nodes(&hide)?;
            let after = sub.cycles_of(&alg.run(&sub)?.set);
            if after != before {
                bad.push(InpaViolation {
                    agent: i,
                    hidden: s.iter().map(|&v| g.node(v).cycle.clone()).collect(),
                    before: before.clone(),
                    after,
                });
            }
        }
    }
    Ok(bad)
}

pub fn test_inpa(alg: &dyn Algorithm, g: &CycleGraph, cfg: &FuzzConfig) -> Result<bool> {
    Ok(inpa_violations(alg, g, cfg)?.is_empty())
}

/// `oracle / mechanism`, infinite when the mechanism gets nothing but the optimum does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ratio {
    Finite(Rational),
    Infinite,
}

impl Ratio {
    pub fn of(oracle: Rational, mech: Rational) -> Self {
        if mech.is_zero() {
            if oracle.is_zero() {
                Ratio::Finite(int(1))
            } else {
                Ratio::Infinite
            }
        } else {
            Ratio::Finite(oracle / mech)
        }
    }

    pub fn within(self, bound: Rational) -> bool {
        matches!(self, Ratio::Finite(r) if r <= bound)
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ratio::Finite(r) => write!(f, "{}", fmt_rational(r)),
            Ratio::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatioReport {
    pub instance: String,
    pub mechanism: String,
    pub mechanism_weight: Rational,
    pub oracle_weight: Rational,
    pub ratio: Ratio,
    pub bound: Option<Rational>,
    pub within_bound: bool,
}

impl RatioReport {
    pub fn to_json(&self) -> Value {
        json!({
            "instance": self.instance,
            "mechanism": self.mechanism,
            "mechanism_weight": fmt_rational(&self.mechanism_weight),
            "oracle_weight": fmt_rational(&self.oracle_weight),
            "ratio": self.ratio.to_string(),
            "bound": self.bound.map(|b| fmt_rational(&b)),
            "within_bound": self.within_bound,
        })
    }
}

/// Runs `alg` and the oracle on `g`; with no bound, `within_bound` is vacuously true.
pub fn measure_ratio(
    instance: &str,
    alg: &dyn Algorithm,
    g: &CycleGraph,
    bound: Option<Rational>,
    cap: usize,
) -> Result<RatioReport> {
    let set = alg.run(g)?.set;
    ratio_report(instance, &alg.name(), g, &set, bound, cap)
}

/// [`measure_ratio`] for an already computed output.
pub fn ratio_report(
    instance: &str,
    mechanism: &str,
    g: &CycleGraph,
    set: &IndependentSet,
    bound: Option<Rational>,
    cap: usize,
) -> Result<RatioReport> {
    let mechanism_weight = g.weight(set);
    let oracle = oracle_weight(g, cap)?;
    let ratio = Ratio::of(oracle, mechanism_weight);
    Ok(RatioReport {
        instance: instance.to_string(),
        mechanism: mechanism.to_string(),
        mechanism_weight,
        oracle_weight: oracle,
        ratio,
        bound,
        within_bound: bound.is_none_or(|b| ratio.within(b)),
    })
}

pub fn default_cap() -> usize {
    DEFAULT_NODE_CAP
}

/// Connected bipartite graph `A ⊎ B` with integer weights in `2..=k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartite {
    pub k: usize,
    pub wa: Vec<usize>,
    pub wb: Vec<usize>,
    /// `(a, b)` index pairs.
    pub edges: BTreeSet<(usize, usize)>,
}

impl Bipartite {
    pub fn deg_a(&self) -> Vec<usize> {
        let mut d = vec![0; self.wa.len()];
        for &(a, _) in &self.edges {
            d[a] += 1;
        }
        d
    }

    pub fn is_connected(&self) -> bool {
        let na = self.wa.len();
        let total = na + self.wb.len();
        let mut adj = vec![Vec::new(); total];
        for &(a, b) in &self.edges {
            adj[a].push(na + b);
            adj[na + b].push(a);
        }
        let mut seen = vec![false; total];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// `deg(a) ≤ w(a)` everywhere and the graph is connected.
    pub fn meets_hypothesis(&self) -> bool {
        !self.wa.is_empty()
            && self.deg_a().iter().zip(&self.wa).all(|(d, w)| d <= w)
            && self.wa.iter().chain(&self.wb).all(|&w| (2..=self.k).contains(&w))
            && self.is_connected()
    }

    pub fn has_slack(&self) -> bool {
        self.deg_a().iter().zip(&self.wa).any(|(d, w)| d < w)
    }

    /// `w(B) ≤ w(A)(k − 1 + 1/|A|)`.
    pub fn main_bound_holds(&self) -> bool {
        let (wa, wb, na, k) = self.totals();
        wb * na <= wa * ((k - 1) * na + 1)
    }

    /// `w(B) ≤ w(A)(k − 1)`.
    pub fn slack_bound_holds(&self) -> bool {
        let (wa, wb, _, k) = self.totals();
        wb <= wa * (k - 1)
    }

    fn totals(&self) -> (i64, i64, i64, i64) {
        (
            self.wa.iter().sum::<usize>() as i64,
            self.wb.iter().sum::<usize>() as i64,
            self.wa.len() as i64,
            self.k as i64,
        )
    }

    /// Random instance: a capacity-respecting spanning tree plus extra edges.
    /// `tight` forces `deg(a) = w(a)` wherever the tree allows it.
    pub fn random(rng: &mut impl Rng, k: usize, max_a: usize, tight: bool) -> Self {
        let na = rng.gen_range(1..=max_a);
        let wa: Vec<usize> = (0..na).map(|_| rng.gen_range(2..=k)).collect();
        let cap: usize = wa.iter().sum::<usize>() - (na - 1);
        let nb = if tight { cap } else { rng.gen_range(1..=cap) };
        let wb: Vec<usize> = (0..nb).map(|_| if rng.gen_bool(0.5) { k } else { rng.gen_range(2..=k) }).collect();
        let mut deg = vec![0usize; na];
        let mut edges = BTreeSet::new();
        // B-nodes are attached to A-nodes with spare capacity; each new A-node joins via one
        // edge to an existing B-node, so the tree stays connected
        let mut placed_a = vec![0usize];
        let mut placed_b: Vec<usize> = Vec::new();
        let mut next_a = 1;
        let mut next_b = 0;
        while next_a < na || next_b < nb {
            let can_b = next_b < nb && placed_a.iter().any(|&a| deg[a] < wa[a]);
            let can_a = next_a < na && !placed_b.is_empty();
            let take_b = can_b && (!can_a || rng.gen_bool(0.6));
            if take_b {
                let open: Vec<usize> = placed_a.iter().copied().filter(|&a| deg[a] < wa[a]).collect();
                let a = open[rng.gen_range(0..open.len())];
                edges.insert((a, next_b));
                deg[a] += 1;
                placed_b.push(next_b);
                next_b += 1;
            } else if can_a {
                let b = placed_b[rng.gen_range(0..placed_b.len())];
                edges.insert((next_a, b));
                deg[next_a] += 1;
                placed_a.push(next_a);
                next_a += 1;
            } else {
                break;
            }
        }
        let wb = wb[..placed_b.len()].to_vec();
        let wa_final: Vec<usize> = placed_a.iter().map(|&a| wa[a]).collect();
        let mut g = Bipartite { k, wa: wa_final, wb, edges };
        if g.wb.is_empty() {
            return Bipartite { k, wa: vec![g.wa[0]], wb: vec![rng.gen_range(2..=k)], edges: [(0, 0)].into() };
        }
        let extra = rng.gen_range(0..=g.wa.len() * 2);
        for _ in 0..extra {
            let a = rng.gen_range(0..g.wa.len());
            let b = rng.gen_range(0..g.wb.len());
            let d = g.edges.iter().filter(|&&(x, _)| x == a).count();
            if d < g.wa[a] {
                g.edges.insert((a, b));
            }
        }
        g
    }
}

/// Per-agent utilities of an exchange under the true wish lists.
pub fn utilities(
    ex: &crate::model::Exchange,
    truth: &WishListVector,
    lambda: &LengthFunction,
) -> Result<BTreeMap<AgentId, Utility>> {
    truth.agents().map(|i| Ok((i, utility(i, ex, truth, lambda)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::greedy;

    #[test]
    fn ratio_edge_cases() {
        assert_eq!(Ratio::of(int(0), int(0)), Ratio::Finite(int(1)));
        assert_eq!(Ratio::of(int(3), int(0)), Ratio::Infinite);
        assert!(!Ratio::Infinite.within(int(100)));
        assert!(Ratio::of(int(5), int(2)).within(crate::rational::rat(5, 2)));
    }

    #[test]
    fn subsets_exhaustive_and_sampled() {
        let cfg = FuzzConfig::default();
        assert_eq!(strategy_subsets(&[1, 2, 3], &cfg, 0, false).len(), 7);
        assert_eq!(strategy_subsets(&[1, 2], &cfg, 0, true).len(), 4);
        let big: Vec<u32> = (0..20).collect();
        let s = strategy_subsets(&big, &cfg, 0, false);
        assert_eq!(s.len(), cfg.budget);
        assert_eq!(s, strategy_subsets(&big, &cfg, 0, false));
    }

    #[test]
    fn empty_graph_cases() {
        let u = LengthFunction::uniform(3).unwrap();
        let g = CycleGraph::new(vec![], 1, &u).unwrap();
        let alg = greedy(3).unwrap();
        assert!(oracle_max_weight_is(&g, 10).unwrap().is_empty());
        assert!(test_inpa(alg.as_ref(), &g, &FuzzConfig::default()).unwrap());
        assert!(fuzz_truthfulness_nodes(alg.as_ref(), &g, &FuzzConfig::default()).unwrap().is_empty());
        let w = WishListVector::empty(3).unwrap();
        assert!(fuzz_truthfulness_wishlists(alg.as_ref(), &w, &u, &FuzzConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn cap_is_enforced() {
        let u = LengthFunction::uniform(3).unwrap();
        let w = WishListVector::from_arcs(3, [(1, 2), (2, 1), (2, 3), (3, 2)]).unwrap();
        let g = CycleGraph::from_wishes(&w, &u).unwrap();
        assert_eq!(oracle_weight(&g, 1), Err(BxError::OracleCap { nodes: 2, cap: 1 }));
    }

    #[test]
    fn bipartite_generator_meets_hypothesis() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for t in 0..200 {
            let b = Bipartite::random(&mut rng, 3 + t % 4, 5, t % 2 == 0);
            assert!(b.meets_hypothesis(), "{b:?}");
        }
    }
}
