//! Improvement rules, the local-search driver, and algorithm concatenation.

use crate::cycle_graph::{CycleGraph, IndependentSet, NodeId, NodeSet};
use crate::error::{BxError, Result};
use std::collections::BTreeMap;

/// Which node lengths a rule may add.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LengthFilter {
    Any,
    Exactly(usize),
    AtMost(usize),
    GreaterThan(usize),
}

impl LengthFilter {
    pub fn admits(self, len: usize) -> bool {
        match self {
            LengthFilter::Any => true,
            LengthFilter::Exactly(j) => len == j,
            LengthFilter::AtMost(j) => len <= j,
            LengthFilter::GreaterThan(j) => len > j,
        }
    }

    /// Inclusive admitted range within `2..=k`; `None` when empty.
    pub fn range(self, k: usize) -> Option<(usize, usize)> {
        let (lo, hi) = match self {
            LengthFilter::Any => (2, k),
            LengthFilter::Exactly(j) => (j, j),
            LengthFilter::AtMost(j) => (2, j),
            LengthFilter::GreaterThan(j) => (j + 1, k),
        };
        let (lo, hi) = (lo.max(2), hi.min(k));
        (lo <= hi).then_some((lo, hi))
    }

    fn suffix(self) -> String {
        match self {
            LengthFilter::Any => String::new(),
            LengthFilter::Exactly(j) => format!("^{j}"),
            LengthFilter::AtMost(j) => format!("^<={j}"),
            LengthFilter::GreaterThan(j) => format!("^>{j}"),
        }
    }
}

/// Partial map `(G, I) → I′` with `I′` independent and strictly heavier.
pub trait ImprovementRule: Send + Sync {
    fn name(&self) -> String;
    fn apply(&self, g: &CycleGraph, current: &IndependentSet) -> Option<IndependentSet>;
    /// Declared: `α(I) ⊆ α(I′)` on every application.
    fn loyal(&self) -> bool;
    /// Declared: the rule's behavior ignores nodes of non-partaking agents.
    fn inpa(&self) -> bool;
    fn filter(&self) -> LengthFilter;
    /// Same rule with its length filter replaced.
    fn with_filter(&self, filter: LengthFilter) -> Box<dyn ImprovementRule>;
}

/// `r_E`: add the first node (in node order) that keeps the set independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expansion {
    pub filter: LengthFilter,
}

impl Expansion {
    pub fn new() -> Self {
        Self { filter: LengthFilter::Any }
    }
}

impl Default for Expansion {
    fn default() -> Self {
        Self::new()
    }
}

impl ImprovementRule for Expansion {
    fn name(&self) -> String {
        format!("r_E{}", self.filter.suffix())
    }

    fn apply(&self, g: &CycleGraph, current: &IndependentSet) -> Option<IndependentSet> {
        let used = g.agent_mask(current);
        let v = g.node_ids().find(|&v| g.node(v).mask & used == 0 && self.filter.admits(g.node(v).len()))?;
        let mut next = current.clone();
        next.insert(v);
        Some(next)
    }

    fn loyal(&self) -> bool {
        true
    }

    fn inpa(&self) -> bool {
        true
    }

    fn filter(&self) -> LengthFilter {
        self.filter
    }

    fn with_filter(&self, filter: LengthFilter) -> Box<dyn ImprovementRule> {
        Box::new(Self { filter })
    }
}

/// `r_q`: `I′ = (I ∪ X) − (N(X) ∩ I)` for an independent `X ⊆ N(I)` with `|N(X) ∩ I| ≤ q`,
/// `α(I′) ⊋ α(I)` and `w(I′) > w(I)`. The first candidate by `(|X|, sorted X)` is taken.
///
/// With `loyal = false` the agent-superset requirement is dropped; that variant is not
/// truthful and exists to exercise the fuzzers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllForQ {
    pub q: usize,
    pub filter: LengthFilter,
    pub loyal: bool,
}

impl AllForQ {
    pub fn new(q: usize) -> Self {
        Self { q, filter: LengthFilter::Any, loyal: true }
    }

    pub fn disloyal(q: usize) -> Self {
        Self { q, filter: LengthFilter::Any, loyal: false }
    }
}

struct SwapSearch<'a> {
    g: &'a CycleGraph,
    q: usize,
    k: usize,
    loyal: bool,
    cand: Vec<NodeId>,
    // per candidate: bitmask over positions of `members` it touches
    touch: Vec<u64>,
    member_mask: Vec<u128>,
    member_iw: Vec<i64>,
    cap: usize,
    best: Option<Vec<NodeId>>,
    stack: Vec<NodeId>,
}

impl SwapSearch<'_> {
    fn removed_mask(&self, r: u64) -> (u128, i64) {
        let mut agents = 0u128;
        let mut w = 0i64;
        let mut bits = r;
        while bits != 0 {
            let p = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            agents |= self.member_mask[p];
            w += self.member_iw[p];
        }
        (agents, w)
    }

    fn dfs(&mut self, start: usize, xmask: u128, r: u64, xw: i64) {
        if !self.stack.is_empty() {
            let (ragents, rw) = self.removed_mask(r);
            let ok_agents = !self.loyal || (ragents & !xmask == 0 && xmask != ragents);
            if ok_agents && xw > rw {
                self.best = Some(self.stack.clone());
                // lexicographic DFS: nothing later at this size can win, and larger sizes never do
                return;
            }
        }
        let limit = match &self.best {
            Some(b) => b.len() - 1,
            None => self.cap,
        };
        if self.stack.len() >= limit {
            return;
        }
        if self.loyal {
            let (ragents, _) = self.removed_mask(r);
            let missing = (ragents & !xmask).count_ones() as usize;
            if missing > (limit - self.stack.len()) * self.k {
                return;
            }
        }
        for idx in start..self.cand.len() {
            let v = self.cand[idx];
            let m = self.g.node(v).mask;
            if m & xmask != 0 {
                continue;
            }
            let r2 = r | self.touch[idx];
            if r2.count_ones() as usize > self.q {
                continue;
            }
            self.stack.push(v);
            self.dfs(idx + 1, xmask | m, r2, xw + self.g.int_weight(v));
            self.stack.pop();
            if let Some(b) = &self.best {
                if self.stack.len() + 1 >= b.len() {
                    return;
                }
            }
        }
    }
}

impl ImprovementRule for AllForQ {
    fn name(&self) -> String {
        let base = if self.loyal { "r_q" } else { "r_q_disloyal" };
        format!("{base}{}[q={}]", self.filter.suffix(), self.q)
    }

    fn apply(&self, g: &CycleGraph, current: &IndependentSet) -> Option<IndependentSet> {
        if current.is_empty() || self.q == 0 {
            return None;
        }
        let members: Vec<NodeId> = current.iter().copied().collect();
        let used = g.agent_mask(current);
        let mut cand = Vec::new();
        let mut touch = Vec::new();
        for v in g.node_ids() {
            let m = g.node(v).mask;
            if m & used == 0 || current.contains(&v) || !self.filter.admits(g.node(v).len()) {
                continue;
            }
            let t = members
                .iter()
                .enumerate()
                .filter(|(_, &u)| g.node(u).mask & m != 0)
                .fold(0u64, |acc, (p, _)| acc | 1 << p);
            if t.count_ones() as usize <= self.q {
                cand.push(v);
                touch.push(t);
            }
        }
        let mut search = SwapSearch {
            g,
            q: self.q,
            k: g.k(),
            loyal: self.loyal,
            cand,
            touch,
            member_mask: members.iter().map(|&u| g.node(u).mask).collect(),
            member_iw: members.iter().map(|&u| g.int_weight(u)).collect(),
            cap: self.q * g.k(),
            best: None,
            stack: Vec::new(),
        };
        search.dfs(0, 0, 0, 0);
        let x = search.best?;
        let xmask = x.iter().fold(0u128, |m, &v| m | g.node(v).mask);
        let mut next: IndependentSet = current.iter().copied().filter(|&u| g.node(u).mask & xmask == 0).collect();
        next.extend(x);
        Some(next)
    }

    fn loyal(&self) -> bool {
        self.loyal
    }

    fn inpa(&self) -> bool {
        self.loyal
    }

    fn filter(&self) -> LengthFilter {
        self.filter
    }

    fn with_filter(&self, filter: LengthFilter) -> Box<dyn ImprovementRule> {
        Box::new(Self { filter, ..*self })
    }
}

/// Copy of `rule` whose candidates only add nodes admitted by `filter`.
pub fn restrict_rule(rule: &dyn ImprovementRule, filter: LengthFilter) -> Box<dyn ImprovementRule> {
    rule.with_filter(filter)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub rule: usize,
    pub set: IndependentSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LocalSearchTrace {
    pub steps: Vec<TraceStep>,
    pub final_set: IndependentSet,
}

impl LocalSearchTrace {
    /// `|I^t △ I^{t+1}|` for each step, starting from `∅`.
    pub fn symmetric_differences(&self) -> Vec<usize> {
        let mut prev = NodeSet::new();
        self.steps
            .iter()
            .map(|s| {
                let d = prev.symmetric_difference(&s.set).count();
                prev = s.set.clone();
                d
            })
            .collect()
    }
}

/// Starts from `∅`; each step applies the lowest-index applicable rule; stops when none applies.
pub fn run_local_search(g: &CycleGraph, rules: &[Box<dyn ImprovementRule>]) -> Result<LocalSearchTrace> {
    if rules.is_empty() {
        return Err(BxError::Params("local search needs at least one rule".into()));
    }
    let mut current = IndependentSet::new();
    let mut trace = LocalSearchTrace::default();
    'outer: loop {
        for (j, rule) in rules.iter().enumerate() {
            if let Some(next) = rule.apply(g, &current) {
                check_contract(g, rule.as_ref(), &current, &next)?;
                trace.steps.push(TraceStep { rule: j, set: next.clone() });
                current = next;
                continue 'outer;
            }
        }
        break;
    }
    trace.final_set = current;
    Ok(trace)
}

fn check_contract(
    g: &CycleGraph,
    rule: &dyn ImprovementRule,
    before: &IndependentSet,
    after: &IndependentSet,
) -> Result<()> {
    let fail = |reason: &str| Err(BxError::RuleContract { rule: rule.name(), reason: reason.into() });
    if !g.is_independent(after) {
        return fail("output is not independent");
    }
    if g.int_weight_of(after) <= g.int_weight_of(before) {
        return fail("output is not strictly heavier");
    }
    if rule.loyal() {
        let (a, b) = (g.agent_mask(before), g.agent_mask(after));
        if a & !b != 0 {
            return fail("partaking agent dropped by a loyal rule");
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunStats {
    pub iterations: usize,
    pub rule_firings: BTreeMap<String, usize>,
}

impl RunStats {
    pub fn merge(&mut self, other: &RunStats) {
        self.iterations += other.iterations;
        for (k, v) in &other.rule_firings {
            *self.rule_firings.entry(k.clone()).or_default() += v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlgRun {
    pub set: IndependentSet,
    pub stats: RunStats,
}

/// An algorithm for the maximum-weight cycle-graph independent set problem.
pub trait Algorithm: Send + Sync {
    fn name(&self) -> String;
    fn run(&self, g: &CycleGraph) -> Result<AlgRun>;
    /// Statically known `(min, max)` node length of any output, given `k`.
    fn length_bounds(&self, _k: usize) -> Option<(usize, usize)> {
        None
    }
}

/// Local search over an ordered rule list.
pub struct LocalSearch {
    name: String,
    rules: Vec<Box<dyn ImprovementRule>>,
}

impl LocalSearch {
    pub fn new(name: impl Into<String>, rules: Vec<Box<dyn ImprovementRule>>) -> Self {
        Self { name: name.into(), rules }
    }

    pub fn rules(&self) -> &[Box<dyn ImprovementRule>] {
        &self.rules
    }

    pub fn trace(&self, g: &CycleGraph) -> Result<LocalSearchTrace> {
        run_local_search(g, &self.rules)
    }
}

impl Algorithm for LocalSearch {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn run(&self, g: &CycleGraph) -> Result<AlgRun> {
        let trace = self.trace(g)?;
        let mut stats = RunStats { iterations: trace.steps.len(), ..Default::default() };
        for s in &trace.steps {
            *stats.rule_firings.entry(self.rules[s.rule].name()).or_default() += 1;
        }
        Ok(AlgRun { set: trace.final_set, stats })
    }

    fn length_bounds(&self, k: usize) -> Option<(usize, usize)> {
        let mut lo = usize::MAX;
        let mut hi = 0;
        for r in &self.rules {
            if let Some((a, b)) = r.filter().range(k) {
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

/// `(A₁·A₂)(G) = A₁(G) ∪ A₂(G[V − (A₁(G) ∪ N(A₁(G)))])`.
pub struct Concat {
    pub first: Box<dyn Algorithm>,
    pub second: Box<dyn Algorithm>,
}

impl Algorithm for Concat {
    fn name(&self) -> String {
        format!("{}·{}", self.first.name(), self.second.name())
    }

    fn run(&self, g: &CycleGraph) -> Result<AlgRun> {
        let a = self.first.run(g)?;
        let mut blocked = g.neighbors(&a.set);
        blocked.extend(a.set.iter().copied());
        let (rest, map) = g.remove_nodes(&blocked)?;
        let b = self.second.run(&rest)?;
        let mut set = a.set;
        set.extend(b.set.iter().map(|&v| map[v]));
        let mut stats = a.stats;
        stats.merge(&b.stats);
        Ok(AlgRun { set, stats })
    }

    fn length_bounds(&self, k: usize) -> Option<(usize, usize)> {
        match (self.first.length_bounds(k), self.second.length_bounds(k)) {
            (Some((a, b)), Some((c, d))) => Some((a.min(c), b.max(d))),
            _ => None,
        }
    }
}

pub fn concatenate(first: Box<dyn Algorithm>, second: Box<dyn Algorithm>) -> Box<dyn Algorithm> {
    Box::new(Concat { first, second })
}

/// Left fold of [`concatenate`]; `None` for an empty list.
pub fn concatenate_all(algs: Vec<Box<dyn Algorithm>>) -> Option<Box<dyn Algorithm>> {
    algs.into_iter().reduce(concatenate)
}

/// Empirical `A₁ ⪰ A₂`: the longest node `A₁` outputs on any sample is no longer than the
/// shortest node `A₂` outputs on any sample.
pub fn check_precedes(a1: &dyn Algorithm, a2: &dyn Algorithm, samples: &[CycleGraph]) -> Result<bool> {
    let mut max1 = 0;
    let mut min2 = usize::MAX;
    for g in samples {
        for v in a1.run(g)?.set {
            max1 = max1.max(g.node(v).len());
        }
        for v in a2.run(g)?.set {
            min2 = min2.min(g.node(v).len());
        }
    }
    Ok(max1 <= min2)
}

/// Static `A₁ ⪰ A₂` from declared length bounds; `None` if either is unknown.
pub fn certify_precedes(a1: &dyn Algorithm, a2: &dyn Algorithm, k: usize) -> Option<bool> {
    let (_, hi) = a1.length_bounds(k)?;
    let (lo, _) = a2.length_bounds(k)?;
    Some(hi <= lo)
}
