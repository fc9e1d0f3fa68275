//! The k-cycle conflict graph: nodes are trading cycles, edges join cycles sharing an agent.
//!
//! Node ids follow the node order, so comparing ids compares positions in that order.

use crate::error::{BxError, Result};
use crate::model::{mask_agents, AgentId, Exchange, LengthFunction, TradingCycle, WishListVector, MAX_AGENTS};
use crate::rational::{int, Rational};
use num_integer::Integer;
use std::collections::{BTreeSet, HashSet};

pub type NodeId = usize;
pub type NodeSet = BTreeSet<NodeId>;
/// A node set with no two adjacent members.
pub type IndependentSet = NodeSet;

/// Simple directed cycles of length `2..=k`, canonical, sorted by `(length, sequence)`.
pub fn enumerate_cycles(wishes: &WishListVector, k: usize) -> Vec<TradingCycle> {
    let n = wishes.n();
    let succ: Vec<Vec<u32>> = (1..=n as u32).map(|i| wishes.wishes(AgentId(i)).iter().map(|a| a.0).collect()).collect();
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(k);
    let mut on_path = vec![false; n + 1];
    for s in 1..=n as u32 {
        path.clear();
        path.push(s);
        on_path[s as usize] = true;
        extend(s, &succ, k, &mut path, &mut on_path, &mut out);
        on_path[s as usize] = false;
    }
    out.sort_by(default_order);
    out
}

// Only agents larger than the start are visited, so each cycle is found from its minimum.
fn extend(s: u32, succ: &[Vec<u32>], k: usize, path: &mut Vec<u32>, on_path: &mut [bool], out: &mut Vec<TradingCycle>) {
    let cur = *path.last().expect("path never empty");
    for &j in &succ[cur as usize - 1] {
        if j == s && path.len() >= 2 {
            out.push(TradingCycle::from_ids(path).expect("simple path"));
        } else if j > s && !on_path[j as usize] && path.len() < k {
            on_path[j as usize] = true;
            path.push(j);
            extend(s, succ, k, path, on_path, out);
            path.pop();
            on_path[j as usize] = false;
        }
    }
}

/// Default node order: by length, then canonical agent sequence.
pub fn default_order(a: &TradingCycle, b: &TradingCycle) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.agents().cmp(b.agents()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub cycle: TradingCycle,
    pub mask: u128,
    pub weight: Rational,
}

impl Node {
    pub fn len(&self) -> usize {
        self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycle.is_empty()
    }

    pub fn agents(&self) -> &[AgentId] {
        self.cycle.agents()
    }
}

/// Immutable conflict graph with cached masks, weights and adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleGraph {
    n: usize,
    lambda: LengthFunction,
    nodes: Vec<Node>,
    adj: Vec<Vec<NodeId>>,
    agent_index: Vec<Vec<NodeId>>,
    scale: i64,
    ilam: Vec<i64>,
    iw: Vec<i64>,
}

impl CycleGraph {
    /// Nodes sorted by the default order.
    pub fn new(mut cycles: Vec<TradingCycle>, n: usize, lambda: &LengthFunction) -> Result<Self> {
        cycles.sort_by(default_order);
        Self::with_order(cycles, n, lambda)
    }

    /// Nodes kept in the given order.
    pub fn with_order(cycles: Vec<TradingCycle>, n: usize, lambda: &LengthFunction) -> Result<Self> {
        if n > MAX_AGENTS {
            return Err(BxError::TooManyAgents(n));
        }
        let mut seen = HashSet::new();
        for c in &cycles {
            if !seen.insert(c.clone()) {
                return Err(BxError::DuplicateCycle(c.to_string()));
            }
            if c.len() > lambda.k() {
                return Err(BxError::CycleTooLong { len: c.len(), k: lambda.k() });
            }
            if let Some(a) = c.agents().iter().find(|a| a.index() > n) {
                return Err(BxError::AgentOutOfRange { agent: a.0, n });
            }
        }
        let scale = lambda.values().iter().fold(1i64, |acc, v| acc.lcm(v.denom()));
        let nodes: Vec<Node> = cycles
            .into_iter()
            .map(|c| {
                let len = c.len();
                Node { mask: c.mask(), weight: int(len as i64) * lambda.lam(len), cycle: c }
            })
            .collect();
        let ilam: Vec<i64> = nodes
            .iter()
            .map(|v| {
                let l = lambda.lam(v.len());
                l.numer() * (scale / l.denom())
            })
            .collect();
        let iw = nodes.iter().zip(&ilam).map(|(v, l)| v.len() as i64 * l).collect();
        let mut agent_index = vec![Vec::new(); n];
        for (id, v) in nodes.iter().enumerate() {
            for a in v.agents() {
                agent_index[a.index() - 1].push(id);
            }
        }
        let mut adj = vec![Vec::new(); nodes.len()];
        for u in 0..nodes.len() {
            for v in u + 1..nodes.len() {
                if nodes[u].mask & nodes[v].mask != 0 {
                    adj[u].push(v);
                    adj[v].push(u);
                }
            }
        }
        Ok(Self { n, lambda: lambda.clone(), nodes, adj, agent_index, scale, ilam, iw })
    }

    /// `G` for the cycles of `wishes` with length at most `λ.k`.
    pub fn from_wishes(wishes: &WishListVector, lambda: &LengthFunction) -> Result<Self> {
        Self::new(enumerate_cycles(wishes, lambda.k()), wishes.n(), lambda)
    }

    /// Like [`from_wishes`](Self::from_wishes) with an injected order, which must be a
    /// permutation of the enumerated cycles.
    pub fn from_wishes_ordered(
        wishes: &WishListVector,
        lambda: &LengthFunction,
        order: &[TradingCycle],
    ) -> Result<Self> {
        let found: BTreeSet<_> = enumerate_cycles(wishes, lambda.k()).into_iter().collect();
        let given: BTreeSet<_> = order.iter().cloned().collect();
        if found != given || given.len() != order.len() {
            return Err(BxError::NodeOrderMismatch);
        }
        Self::with_order(order.to_vec(), wishes.n(), lambda)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.lambda.k()
    }

    pub fn lambda(&self) -> &LengthFunction {
        &self.lambda
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, v: NodeId) -> &Node {
        &self.nodes[v]
    }

    pub fn node_ids(&self) -> std::ops::Range<NodeId> {
        0..self.nodes.len()
    }

    pub fn neighbors_of(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v]
    }

    /// `α⁻¹(i)`, ascending.
    pub fn nodes_of(&self, i: AgentId) -> &[NodeId] {
        &self.agent_index[i.index() - 1]
    }

    pub fn adjacent(&self, u: NodeId, v: NodeId) -> bool {
        u != v && self.nodes[u].mask & self.nodes[v].mask != 0
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn find(&self, c: &TradingCycle) -> Option<NodeId> {
        self.nodes.iter().position(|v| &v.cycle == c)
    }

    /// Common denominator of all weights; `weight(v) = int_weight(v) / scale`.
    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn int_weight(&self, v: NodeId) -> i64 {
        self.iw[v]
    }

    /// `λ(len v)·scale`, the per-agent share of `v`'s weight.
    pub fn int_lambda(&self, v: NodeId) -> i64 {
        self.ilam[v]
    }

    pub fn int_weight_of(&self, set: &NodeSet) -> i64 {
        set.iter().map(|&v| self.iw[v]).sum()
    }

    pub fn to_rational(&self, w: i64) -> Rational {
        Rational::new(w, self.scale)
    }

    pub fn weight(&self, set: &NodeSet) -> Rational {
        self.to_rational(self.int_weight_of(set))
    }

    pub fn check_ids(&self, set: &NodeSet) -> Result<()> {
        match set.iter().find(|&&v| v >= self.nodes.len()) {
            Some(&v) => Err(BxError::UnknownNode(v)),
            None => Ok(()),
        }
    }

    pub fn is_independent(&self, set: &NodeSet) -> bool {
        let mut used = 0u128;
        for &v in set {
            if v >= self.nodes.len() || used & self.nodes[v].mask != 0 {
                return false;
            }
            used |= self.nodes[v].mask;
        }
        true
    }

    /// `α(U)` as a mask.
    pub fn agent_mask(&self, set: &NodeSet) -> u128 {
        set.iter().fold(0, |m, &v| m | self.nodes[v].mask)
    }

    pub fn agents_of(&self, set: &NodeSet) -> BTreeSet<AgentId> {
        mask_agents(self.agent_mask(set)).collect()
    }

    /// `N(U) = ⋃_{v∈U} N(v)`.
    pub fn neighbors(&self, set: &NodeSet) -> NodeSet {
        set.iter().flat_map(|&v| self.adj[v].iter().copied()).collect()
    }

    pub fn cycles_of(&self, set: &NodeSet) -> BTreeSet<TradingCycle> {
        set.iter().map(|&v| self.nodes[v].cycle.clone()).collect()
    }

    pub fn to_exchange(&self, set: &NodeSet) -> Result<Exchange> {
        Exchange::new(set.iter().map(|&v| self.nodes[v].cycle.clone()))
    }

    /// Looks up the node set of an exchange; `None` if some cycle is not a node.
    pub fn from_exchange(&self, ex: &Exchange) -> Option<NodeSet> {
        ex.cycles().iter().map(|c| self.find(c)).collect()
    }

    /// Induced subgraph on `keep` with relative order preserved, plus the new→old id map.
    pub fn induced(&self, keep: &NodeSet) -> (CycleGraph, Vec<NodeId>) {
        let map: Vec<NodeId> = keep.iter().copied().filter(|&v| v < self.nodes.len()).collect();
        let cycles = map.iter().map(|&v| self.nodes[v].cycle.clone()).collect();
        let g = Self::with_order(cycles, self.n, &self.lambda).expect("subgraph of a valid graph");
        (g, map)
    }

    /// `G[V − S]` plus the new→old id map.
    pub fn remove_nodes(&self, s: &NodeSet) -> Result<(CycleGraph, Vec<NodeId>)> {
        self.check_ids(s)?;
        let keep = self.node_ids().filter(|v| !s.contains(v)).collect();
        Ok(self.induced(&keep))
    }

    /// Same nodes and order under another length function.
    pub fn relabel(&self, lambda: &LengthFunction) -> Result<CycleGraph> {
        let cycles = self.nodes.iter().map(|v| v.cycle.clone()).collect();
        Self::with_order(cycles, self.n, lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn complete(n: u32) -> WishListVector {
        let arcs = (1..=n).flat_map(|i| (1..=n).filter(move |&j| j != i).map(move |j| (i, j)));
        WishListVector::from_arcs(n as usize, arcs).unwrap()
    }

    fn cyc(ids: &[u32]) -> TradingCycle {
        TradingCycle::from_ids(ids).unwrap()
    }

    #[test]
    fn single_two_cycle() {
        let w = WishListVector::new(2, vec![vec![2], vec![1]]).unwrap();
        assert_eq!(enumerate_cycles(&w, 3), vec![cyc(&[1, 2])]);
    }

    #[test]
    fn complete_four_k3() {
        assert_eq!(enumerate_cycles(&complete(4), 3).len(), 6 + 8);
        assert_eq!(enumerate_cycles(&complete(4), 4).len(), 6 + 8 + 6);
    }

    #[test]
    fn acyclic_is_empty() {
        let w = WishListVector::from_arcs(3, [(1, 2), (2, 3)]).unwrap();
        assert!(enumerate_cycles(&w, 3).is_empty());
    }

    #[test]
    fn edges_follow_shared_agents() {
        let u = LengthFunction::uniform(3).unwrap();
        let g = CycleGraph::new(vec![cyc(&[1, 2]), cyc(&[3, 4])], 4, &u).unwrap();
        assert_eq!(g.edge_count(), 0);
        let g = CycleGraph::new(vec![cyc(&[2, 3]), cyc(&[1, 2])], 3, &u).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.node(0).cycle, cyc(&[1, 2]));
        assert_eq!(g.nodes_of(AgentId(2)), &[0, 1]);
        assert!(CycleGraph::new(vec![cyc(&[1, 2]), cyc(&[2, 1])], 2, &u).is_err());
    }

    #[test]
    fn weights_and_sets() {
        let l = LengthFunction::new(3, vec![int(1), rat(9, 10)]).unwrap();
        let g = CycleGraph::new(vec![cyc(&[1, 2, 3]), cyc(&[1, 4])], 4, &l).unwrap();
        assert_eq!(g.scale(), 10);
        let empty = NodeSet::new();
        assert!(g.is_independent(&empty));
        assert_eq!(g.weight(&empty), int(0));
        let v3: NodeSet = [1].into();
        assert_eq!(g.weight(&v3), rat(27, 10));
        assert!(!g.is_independent(&[0, 1].into()));
        assert_eq!(g.neighbors(&v3), [0].into());
    }

    #[test]
    fn remove_nodes_identity_and_all() {
        let u = LengthFunction::uniform(3).unwrap();
        let g = CycleGraph::from_wishes(&complete(4), &u).unwrap();
        let (same, _) = g.remove_nodes(&NodeSet::new()).unwrap();
        assert_eq!(same, g);
        let (none, map) = g.remove_nodes(&g.node_ids().collect()).unwrap();
        assert!(none.is_empty() && map.is_empty());
        assert_eq!(g.remove_nodes(&[99].into()), Err(BxError::UnknownNode(99)));
    }

    #[test]
    fn injected_order_is_checked() {
        let u = LengthFunction::uniform(3).unwrap();
        let w = WishListVector::from_arcs(3, [(1, 2), (2, 1), (2, 3), (3, 2)]).unwrap();
        let g = CycleGraph::from_wishes_ordered(&w, &u, &[cyc(&[2, 3]), cyc(&[1, 2])]).unwrap();
        assert_eq!(g.node(0).cycle, cyc(&[2, 3]));
        assert!(CycleGraph::from_wishes_ordered(&w, &u, &[cyc(&[2, 3])]).is_err());
    }
}
