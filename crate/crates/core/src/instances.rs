//! Instance generators and the `bx-v1` on-disk format.

use crate::cycle_graph::{enumerate_cycles, CycleGraph, NodeSet};
use crate::error::{BxError, Result};
use crate::mechanisms::MechanismSpec;
use crate::model::{AgentId, LengthFunction, TradingCycle, WishListVector};
use crate::rational::{fmt_rational, int, parse_rational, Rational};
use crate::verification::{oracle_weight, Ratio};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use std::collections::{BTreeMap, BTreeSet};

pub const FORMAT: &str = "bx-v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstanceSource {
    Wishes(WishListVector),
    /// Nodes given directly; such graphs need not come from any wish-list vector.
    Direct(Vec<TradingCycle>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExpectedValue {
    Int(i64),
    Bool(bool),
    Rational(Rational),
    Cycles(Vec<TradingCycle>),
}

/// A known value and where it comes from (`closed-form`, `construction`, `oracle`, ...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expected {
    pub value: ExpectedValue,
    pub source: String,
}

/// Expected-block keys:
/// `agents`, `nodes` (Int); `oracle_weight` (Rational); `realizable` (Bool);
/// `set:<label>` (Cycles, an independent node group); `weight:<label>` (Rational, weight of
/// `set:<label>`); `output:<mechanism>` (Cycles); `weight:<mechanism>` and
/// `ratio:<mechanism>` (Rational).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceBundle {
    pub name: String,
    pub n: usize,
    pub lambda: LengthFunction,
    pub source: InstanceSource,
    pub node_order: Option<Vec<TradingCycle>>,
    pub expected: BTreeMap<String, Expected>,
}

fn cyc(ids: &[u32]) -> TradingCycle {
    TradingCycle::from_ids(ids).expect("generator builds simple cycles")
}

fn wishes_from_cycles(n: usize, cycles: &[TradingCycle]) -> Result<WishListVector> {
    WishListVector::from_arcs(n, cycles.iter().flat_map(|c| c.arcs().map(|(a, b)| (a.0, b.0)).collect::<Vec<_>>()))
}

impl InstanceBundle {
    fn new(name: String, n: usize, lambda: LengthFunction, source: InstanceSource) -> Self {
        Self { name, n, lambda, source, node_order: None, expected: BTreeMap::new() }
    }

    pub fn k(&self) -> usize {
        self.lambda.k()
    }

    pub fn wishes(&self) -> Option<&WishListVector> {
        match &self.source {
            InstanceSource::Wishes(w) => Some(w),
            InstanceSource::Direct(_) => None,
        }
    }

    pub fn expect(&mut self, key: &str, value: ExpectedValue, source: &str) {
        self.expected.insert(key.to_string(), Expected { value, source: source.to_string() });
    }

    pub fn group(&self, label: &str) -> Option<&[TradingCycle]> {
        match self.expected.get(&format!("set:{label}")).map(|e| &e.value) {
            Some(ExpectedValue::Cycles(c)) => Some(c),
            _ => None,
        }
    }

    /// The cycle graph, honoring any explicit node order.
    pub fn graph(&self) -> Result<CycleGraph> {
        self.graph_with(&self.lambda)
    }

    /// The cycle graph under another length function with the same `k`.
    pub fn graph_with(&self, lambda: &LengthFunction) -> Result<CycleGraph> {
        match (&self.source, &self.node_order) {
            (InstanceSource::Wishes(w), Some(order)) => CycleGraph::from_wishes_ordered(w, lambda, order),
            (InstanceSource::Wishes(w), None) => CycleGraph::from_wishes(w, lambda),
            (InstanceSource::Direct(nodes), Some(order)) => {
                let a: BTreeSet<_> = nodes.iter().collect();
                let b: BTreeSet<_> = order.iter().collect();
                if a != b || order.len() != nodes.len() {
                    return Err(BxError::NodeOrderMismatch);
                }
                CycleGraph::with_order(order.clone(), self.n, lambda)
            }
            (InstanceSource::Direct(nodes), None) => CycleGraph::new(nodes.clone(), self.n, lambda),
        }
    }

    /// Whether the node set equals the `k`-cycles of some wish-list vector.
    pub fn is_realizable(&self) -> Result<bool> {
        let g = self.graph()?;
        Ok(is_realizable(&g))
    }

    /// Re-checks every expected entry it knows how to check; returns `(key, holds)` pairs.
    pub fn verify_expected(&self, cap: usize) -> Result<Vec<(String, bool)>> {
        let g = self.graph()?;
        let mut out = Vec::new();
        for (key, e) in &self.expected {
            let ok = match (key.as_str(), &e.value) {
                ("agents", ExpectedValue::Int(v)) => self.n as i64 == *v,
                ("nodes", ExpectedValue::Int(v)) => g.len() as i64 == *v,
                ("oracle_weight", ExpectedValue::Rational(r)) => oracle_weight(&g, cap)? == *r,
                ("realizable", ExpectedValue::Bool(b)) => is_realizable(&g) == *b,
                (k, ExpectedValue::Cycles(cs)) if k.starts_with("set:") => {
                    node_set(&g, cs).is_some_and(|s| g.is_independent(&s))
                }
                (k, ExpectedValue::Cycles(cs)) if k.starts_with("output:") => {
                    let spec = MechanismSpec::parse(&k["output:".len()..])?;
                    let set = spec.algorithm(&g.lambda().clone(), cap)?.run(&g)?.set;
                    g.cycles_of(&set) == cs.iter().cloned().collect()
                }
                (k, ExpectedValue::Rational(r)) if k.starts_with("weight:") => {
                    let label = &k["weight:".len()..];
                    match self.group(label) {
                        Some(cs) => node_set(&g, cs).is_some_and(|s| g.weight(&s) == *r),
                        None => {
                            let spec = MechanismSpec::parse(label)?;
                            let set = spec.algorithm(g.lambda(), cap)?.run(&g)?.set;
                            g.weight(&set) == *r
                        }
                    }
                }
                (k, ExpectedValue::Rational(r)) if k.starts_with("ratio:") => {
                    let spec = MechanismSpec::parse(&k["ratio:".len()..])?;
                    let set = spec.algorithm(g.lambda(), cap)?.run(&g)?.set;
                    Ratio::of(oracle_weight(&g, cap)?, g.weight(&set)) == Ratio::Finite(*r)
                }
                _ => continue,
            };
            out.push((key.clone(), ok));
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("format".into(), json!(FORMAT));
        m.insert("name".into(), json!(self.name));
        m.insert("n".into(), json!(self.n));
        m.insert("k".into(), json!(self.k()));
        m.insert("lambda".into(), json!(self.lambda.values().iter().map(fmt_rational).collect::<Vec<_>>()));
        match &self.source {
            InstanceSource::Wishes(w) => {
                m.insert("wishes".into(), json!(w.as_lists()));
            }
            InstanceSource::Direct(nodes) => {
                m.insert("direct_nodes".into(), cycles_json(nodes));
            }
        }
        if let Some(order) = &self.node_order {
            m.insert("node_order".into(), cycles_json(order));
        }
        if !self.expected.is_empty() {
            let mut e = Map::new();
            for (k, v) in &self.expected {
                let value = match &v.value {
                    ExpectedValue::Int(i) => json!(i),
                    ExpectedValue::Bool(b) => json!(b),
                    ExpectedValue::Rational(r) => json!(fmt_rational(r)),
                    ExpectedValue::Cycles(cs) => cycles_json(cs),
                };
                e.insert(k.clone(), json!({"source": v.source, "value": value}));
            }
            m.insert("expected".into(), Value::Object(e));
        }
        Value::Object(m)
    }

    /// Canonical text: sorted keys, two-space indentation, trailing newline.
    pub fn to_canonical_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("json values serialize");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| BxError::Format(e.to_string()))?;
        Self::from_json(&v)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| BxError::Format(m.to_string());
        let obj = v.as_object().ok_or_else(|| bad("instance must be an object"))?;
        if obj.get("format").and_then(Value::as_str) != Some(FORMAT) {
            return Err(bad("missing or unsupported format tag"));
        }
        let n = obj.get("n").and_then(Value::as_u64).ok_or_else(|| bad("n"))? as usize;
        let k = obj.get("k").and_then(Value::as_u64).ok_or_else(|| bad("k"))? as usize;
        let name = obj.get("name").and_then(Value::as_str).unwrap_or("unnamed").to_string();
        let lambda_vals = obj
            .get("lambda")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("lambda"))?
            .iter()
            .map(|x| x.as_str().ok_or_else(|| bad("lambda entries are p/q strings")).and_then(parse_rational))
            .collect::<Result<Vec<_>>>()?;
        let lambda = LengthFunction::new(k, lambda_vals)?;
        let source = match (obj.get("wishes"), obj.get("direct_nodes")) {
            (Some(w), None) => {
                let lists = w
                    .as_array()
                    .ok_or_else(|| bad("wishes"))?
                    .iter()
                    .map(|l| {
                        l.as_array()
                            .ok_or_else(|| bad("wish list"))?
                            .iter()
                            .map(|a| a.as_u64().map(|a| a as u32).ok_or_else(|| bad("agent id")))
                            .collect::<Result<Vec<u32>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                InstanceSource::Wishes(WishListVector::new(n, lists)?)
            }
            (None, Some(d)) => InstanceSource::Direct(parse_cycles(d)?),
            _ => return Err(bad("exactly one of wishes / direct_nodes is required")),
        };
        let node_order = obj.get("node_order").map(parse_cycles).transpose()?;
        let mut expected = BTreeMap::new();
        if let Some(e) = obj.get("expected") {
            for (key, entry) in e.as_object().ok_or_else(|| bad("expected"))? {
                let source = entry.get("source").and_then(Value::as_str).unwrap_or("").to_string();
                let raw = entry.get("value").ok_or_else(|| bad("expected entry needs a value"))?;
                let value = match raw {
                    Value::Bool(b) => ExpectedValue::Bool(*b),
                    Value::Number(x) => ExpectedValue::Int(x.as_i64().ok_or_else(|| bad("integer"))?),
                    Value::String(s) => ExpectedValue::Rational(parse_rational(s)?),
                    Value::Array(_) => ExpectedValue::Cycles(parse_cycles(raw)?),
                    _ => return Err(bad("unsupported expected value")),
                };
                expected.insert(key.clone(), Expected { value, source });
            }
        }
        let b = Self { name, n, lambda, source, node_order, expected };
        b.graph()?;
        Ok(b)
    }
}

fn cycles_json(cs: &[TradingCycle]) -> Value {
    json!(cs.iter().map(TradingCycle::ids).collect::<Vec<_>>())
}

fn parse_cycles(v: &Value) -> Result<Vec<TradingCycle>> {
    let bad = || BxError::Format("cycle lists are arrays of agent-id arrays".into());
    v.as_array()
        .ok_or_else(bad)?
        .iter()
        .map(|c| {
            let ids = c
                .as_array()
                .ok_or_else(bad)?
                .iter()
                .map(|a| a.as_u64().map(|a| a as u32).ok_or_else(bad))
                .collect::<Result<Vec<u32>>>()?;
            TradingCycle::from_ids(&ids)
        })
        .collect()
}

fn node_set(g: &CycleGraph, cs: &[TradingCycle]) -> Option<NodeSet> {
    cs.iter().map(|c| g.find(c)).collect()
}

/// Every wish-list vector realizing `G` contains all node arcs, and extra arcs only add
/// cycles, so `G` is realizable iff the union of its own arcs yields exactly its nodes.
pub fn is_realizable(g: &CycleGraph) -> bool {
    let cycles: Vec<TradingCycle> = g.nodes().iter().map(|v| v.cycle.clone()).collect();
    let Ok(w) = wishes_from_cycles(g.n(), &cycles) else {
        return false;
    };
    let found: BTreeSet<_> = enumerate_cycles(&w, g.k()).into_iter().collect();
    found == cycles.into_iter().collect()
}

fn welfare(len: usize, count: usize, lambda: &LengthFunction) -> Rational {
    int((len * count) as i64) * lambda.lam(len)
}

fn check_comb_params(h: usize, v: usize, lambda: &LengthFunction) -> Result<()> {
    let k = lambda.k();
    if !(2 <= h && h < v && v <= k) {
        return Err(BxError::Params(format!("comb needs 2 <= h < v <= k, got h={h}, v={v}, k={k}")));
    }
    if lambda.lam(v) >= lambda.lam(h) {
        return Err(BxError::Params("comb needs lambda(v) < lambda(h)".into()));
    }
    Ok(())
}

/// Agent ids for a comb with `blacks` spine agents: spine agent `b` is `b`, and its vertical
/// cycle is `b → w(b,1) → … → w(b,v−1) → b`.
fn vertical(b: u32, blacks: u32, v: usize) -> TradingCycle {
    let base = blacks + (b - 1) * (v as u32 - 1);
    let mut ids = vec![b];
    ids.extend((1..v as u32).map(|t| base + t));
    cyc(&ids)
}

/// Comb: black agents `1..=h` on the horizontal cycle `(1, …, h)`, each with a vertical cycle
/// of length `v` through fresh white agents.
pub fn gen_comb(h: usize, v: usize, lambda: &LengthFunction) -> Result<InstanceBundle> {
    check_comb_params(h, v, lambda)?;
    let n = h * v;
    let hz = cyc(&(1..=h as u32).collect::<Vec<_>>());
    let verts: Vec<TradingCycle> = (1..=h as u32).map(|b| vertical(b, h as u32, v)).collect();
    let mut all = vec![hz.clone()];
    all.extend(verts.iter().cloned());
    let w = wishes_from_cycles(n, &all)?;
    let mut b =
        InstanceBundle::new(format!("comb:h={h},v={v},k={}", lambda.k()), n, lambda.clone(), InstanceSource::Wishes(w));
    b.expect("agents", ExpectedValue::Int(n as i64), "construction");
    b.expect("nodes", ExpectedValue::Int(h as i64 + 1), "construction");
    b.expect("set:horizontal", ExpectedValue::Cycles(vec![hz]), "construction");
    b.expect("set:verticals", ExpectedValue::Cycles(verts), "construction");
    b.expect("weight:horizontal", ExpectedValue::Rational(welfare(h, 1, lambda)), "closed-form");
    b.expect("weight:verticals", ExpectedValue::Rational(welfare(v, h, lambda)), "closed-form");
    Ok(b)
}

/// Deviation script `W⁰ … W^h` for the comb: in `W^i` black agents `1..=i` report only their
/// arc to the next black agent.
pub fn comb_script(h: usize, v: usize, lambda: &LengthFunction) -> Result<Vec<WishListVector>> {
    let base = gen_comb(h, v, lambda)?;
    let mut w = base.wishes().expect("comb has wishes").clone();
    let mut out = vec![w.clone()];
    for i in 1..=h as u32 {
        let next = if i as usize == h { 1 } else { i + 1 };
        w = w.with_report(AgentId(i), [AgentId(next)].into())?;
        out.push(w.clone());
    }
    Ok(out)
}

/// Double-comb agent ids: `l_i = i` for `i ∈ 1..=h`, `r_i = h + i` for `i ∈ 1..h`.
pub struct DoubleCombIds {
    pub h: usize,
}

impl DoubleCombIds {
    pub fn l(&self, i: usize) -> AgentId {
        AgentId(i as u32)
    }

    pub fn r(&self, i: usize) -> AgentId {
        AgentId((self.h + i) as u32)
    }
}

/// Double comb: `c_L = (l_1, …, l_h)`, `c_R = (l_h, r_1, …, r_{h−1})`, and a vertical cycle
/// of length `v` on each of the `2h − 1` black agents.
pub fn gen_double_comb(h: usize, v: usize, lambda: &LengthFunction) -> Result<InstanceBundle> {
    check_comb_params(h, v, lambda)?;
    let blacks = 2 * h - 1;
    let n = blacks * v;
    let ids = DoubleCombIds { h };
    let cl = cyc(&(1..=h as u32).collect::<Vec<_>>());
    let mut right = vec![ids.l(h).0];
    right.extend((1..h).map(|i| ids.r(i).0));
    let cr = cyc(&right);
    let verts: Vec<TradingCycle> = (1..=blacks as u32).map(|b| vertical(b, blacks as u32, v)).collect();
    let mut all = vec![cl.clone(), cr.clone()];
    all.extend(verts.iter().cloned());
    let w = wishes_from_cycles(n, &all)?;
    let mut b = InstanceBundle::new(
        format!("dcomb:h={h},v={v},k={}", lambda.k()),
        n,
        lambda.clone(),
        InstanceSource::Wishes(w),
    );
    let mixed: Vec<TradingCycle> = verts[..h - 1].iter().cloned().chain([cr.clone()]).collect();
    b.expect("agents", ExpectedValue::Int(n as i64), "construction");
    b.expect("nodes", ExpectedValue::Int(blacks as i64 + 2), "construction");
    b.expect("set:left", ExpectedValue::Cycles(vec![cl]), "construction");
    b.expect("set:right", ExpectedValue::Cycles(vec![cr]), "construction");
    b.expect("set:verticals", ExpectedValue::Cycles(verts), "construction");
    b.expect("set:mixed", ExpectedValue::Cycles(mixed), "construction");
    b.expect("weight:verticals", ExpectedValue::Rational(welfare(v, blacks, lambda)), "closed-form");
    let mixed_w = welfare(v, h - 1, lambda) + welfare(h, 1, lambda);
    b.expect("weight:mixed", ExpectedValue::Rational(mixed_w), "closed-form");
    Ok(b)
}

/// Double-comb script `W⁰ … W^{h−1}` (agents `r_1..r_i` keep only their next black arc),
/// followed by `W^h` where `l_h` also conceals her arc to `r_1`.
pub fn double_comb_script(h: usize, v: usize, lambda: &LengthFunction) -> Result<Vec<WishListVector>> {
    let base = gen_double_comb(h, v, lambda)?;
    let ids = DoubleCombIds { h };
    let mut w = base.wishes().expect("double comb has wishes").clone();
    let mut out = vec![w.clone()];
    for i in 1..h {
        let next = if i == h - 1 { ids.l(h) } else { ids.r(i + 1) };
        w = w.with_report(ids.r(i), [next].into())?;
        out.push(w.clone());
    }
    let lh = ids.l(h);
    let mut keep = w.wishes(lh).clone();
    keep.remove(&ids.r(1));
    out.push(w.with_report(lh, keep)?);
    Ok(out)
}

/// Tightness instance for `LS_q` at `k = 3`: blue cycles `b_j = (3j−2, 3j−1, 3j)` for
/// `j ∈ 1..=q+1`, and `2q + 3` disjoint red cycles covering all `6q + 9` agents, each red
/// cycle meeting the blue set. Low blue ids make `r_E` take the blue set first; covering any
/// blue cycle by reds then forces all `q + 1` of them out, so `r_q` stalls.
pub fn gen_g_bad(q: usize) -> Result<InstanceBundle> {
    if q == 0 {
        return Err(BxError::Params("gbad needs q >= 1".into()));
    }
    let q32 = q as u32;
    let blues: Vec<TradingCycle> = (1..=q32 + 1).map(|j| cyc(&[3 * j - 2, 3 * j - 1, 3 * j])).collect();
    let (l, m, r) = (|j: u32| 3 * j - 2, |j: u32| 3 * j - 1, |j: u32| 3 * j);
    let mut fresh = 3 * (q32 + 1);
    let mut next = || {
        fresh += 1;
        fresh
    };
    let mut reds = Vec::new();
    reds.push(cyc(&[l(1), next(), next()]));
    for j in 1..=q32 {
        reds.push(cyc(&[r(j), l(j + 1), next()]));
    }
    reds.push(cyc(&[r(q32 + 1), next(), next()]));
    for j in 1..=q32 + 1 {
        reds.push(cyc(&[m(j), next(), next()]));
    }
    let n = fresh as usize;
    debug_assert_eq!(n, 6 * q + 9);
    let all: Vec<TradingCycle> = blues.iter().chain(&reds).cloned().collect();
    let w = wishes_from_cycles(n, &all)?;
    let lambda = LengthFunction::uniform(3)?;
    let mut b = InstanceBundle::new(format!("gbad:q={q}"), n, lambda, InstanceSource::Wishes(w));
    let spec = MechanismSpec::Ls { q }.to_string();
    b.expect("agents", ExpectedValue::Int(n as i64), "closed-form");
    b.expect("nodes", ExpectedValue::Int(3 * q as i64 + 4), "construction");
    b.expect("set:blue", ExpectedValue::Cycles(blues.clone()), "construction");
    b.expect("set:red", ExpectedValue::Cycles(reds), "construction");
    b.expect("weight:blue", ExpectedValue::Rational(int(3 * (q as i64 + 1))), "closed-form");
    b.expect("weight:red", ExpectedValue::Rational(int(3 * (2 * q as i64 + 3))), "closed-form");
    b.expect("oracle_weight", ExpectedValue::Rational(int(3 * (2 * q as i64 + 3))), "closed-form");
    b.expect(&format!("output:{spec}"), ExpectedValue::Cycles(blues), "construction");
    b.expect(&format!("weight:{spec}"), ExpectedValue::Rational(int(3 * (q as i64 + 1))), "closed-form");
    let ratio = int(2) + Rational::new(1, q as i64 + 1);
    b.expect(&format!("ratio:{spec}"), ExpectedValue::Rational(ratio), "closed-form");
    Ok(b)
}

/// Gadget `H` cycles: `c_1 = (1, 2, …, k)` through the black agent `1`, and for `j ∈ 2..=k`,
/// `c_j` through agent `j` and `k − 1` fresh agents starting at `first_fresh`.
fn gadget_h_cycles(k: usize, first_fresh: u32) -> Vec<TradingCycle> {
    let mut cs = vec![cyc(&(1..=k as u32).collect::<Vec<_>>())];
    let mut f = first_fresh;
    for j in 2..=k as u32 {
        let mut ids = vec![j];
        for _ in 1..k {
            ids.push(f);
            f += 1;
        }
        cs.push(cyc(&ids));
    }
    cs
}

/// Gadget `H` on `k(k−1)+1` agents with node order `c_1, …, c_k`.
pub fn gen_gadget_h(k: usize, lambda: &LengthFunction) -> Result<InstanceBundle> {
    if k < 3 || lambda.k() != k {
        return Err(BxError::Params("gadget H needs k >= 3 and lambda over 2..=k".into()));
    }
    let n = k * (k - 1) + 1;
    let cs = gadget_h_cycles(k, k as u32 + 1);
    let w = wishes_from_cycles(n, &cs)?;
    let mut b = InstanceBundle::new(format!("h:k={k}"), n, lambda.clone(), InstanceSource::Wishes(w));
    b.node_order = Some(cs.clone());
    let opt = cs[1..].to_vec();
    b.expect("agents", ExpectedValue::Int(n as i64), "closed-form");
    b.expect("nodes", ExpectedValue::Int(k as i64), "construction");
    b.expect("set:c1", ExpectedValue::Cycles(vec![cs[0].clone()]), "construction");
    b.expect("set:optimum", ExpectedValue::Cycles(opt), "construction");
    let wopt = welfare(k, k - 1, lambda);
    b.expect("weight:optimum", ExpectedValue::Rational(wopt), "closed-form");
    b.expect("oracle_weight", ExpectedValue::Rational(wopt), "closed-form");
    Ok(b)
}

/// `G_N`: gadget `H` below `k − 1` rows, each a chain of `2N` length-`k` cycles
/// `A_1, B_1, …, A_N, B_N` where consecutive cycles share an endpoint; the vertical `b`
/// joins agent `1` to the left row ends and `a` joins one fresh agent to the right row ends.
/// Node order: `c_1, …, c_k, b, A_1, B_1, …, A_N, B_N, a`.
pub fn gen_gadget_gn(k: usize, big_n: usize, lambda: &LengthFunction) -> Result<InstanceBundle> {
    if k < 3 || big_n == 0 || lambda.k() != k {
        return Err(BxError::Params("G_N needs k >= 3, N >= 1 and lambda over 2..=k".into()));
    }
    let hcs = gadget_h_cycles(k, k as u32 + 1);
    let mut next_id = (k * (k - 1) + 1) as u32;
    let row_len = 2 * big_n * (k - 1) + 1;
    let rows: Vec<Vec<u32>> = (0..k - 1)
        .map(|_| {
            let r: Vec<u32> = (1..=row_len as u32).map(|t| next_id + t).collect();
            next_id += row_len as u32;
            r
        })
        .collect();
    let p = next_id + 1;
    let n = p as usize;
    debug_assert_eq!(n, (k - 1) * (k + 1 + 2 * big_n * (k - 1)) + 2);
    let mut bids = vec![1];
    bids.extend(rows.iter().map(|r| r[0]));
    let bcyc = cyc(&bids);
    let mut aids = vec![p];
    aids.extend(rows.iter().map(|r| r[row_len - 1]));
    let acyc = cyc(&aids);
    // column t of each row: agents (t−1)(k−1) ..= t(k−1)
    let column =
        |t: usize| -> Vec<TradingCycle> { rows.iter().map(|r| cyc(&r[(t - 1) * (k - 1)..=t * (k - 1)])).collect() };
    let mut order = hcs.clone();
    order.push(bcyc.clone());
    let mut a_set = Vec::new();
    let mut b_set = Vec::new();
    for j in 1..=big_n {
        let aj = column(2 * j - 1);
        let bj = column(2 * j);
        order.extend(aj.iter().cloned());
        order.extend(bj.iter().cloned());
        a_set.extend(aj);
        b_set.extend(bj);
    }
    order.push(acyc.clone());
    let w = wishes_from_cycles(n, &order)?;
    let mut b = InstanceBundle::new(format!("gn:k={k},N={big_n}"), n, lambda.clone(), InstanceSource::Wishes(w));
    b.node_order = Some(order.clone());
    let honest: Vec<TradingCycle> =
        [hcs[0].clone()].into_iter().chain(a_set.iter().cloned()).chain([acyc.clone()]).collect();
    let hidden: Vec<TradingCycle> =
        hcs[1..].iter().cloned().chain([bcyc.clone()]).chain(b_set.iter().cloned()).collect();
    b.expect("agents", ExpectedValue::Int(n as i64), "closed-form");
    b.expect("nodes", ExpectedValue::Int(order.len() as i64), "construction");
    b.expect("set:c1", ExpectedValue::Cycles(vec![hcs[0].clone()]), "construction");
    b.expect("set:greedy_prefix", ExpectedValue::Cycles(honest), "construction");
    b.expect("set:after_hiding_c1", ExpectedValue::Cycles(hidden), "construction");
    Ok(b)
}

/// The 3-cycle graph on 6 agents with nodes `{1,2}`, `{2,3}`, `{1,3}` (2-cycles) and
/// `(4,5,6)`; no wish-list vector has exactly these cycles.
pub fn gen_triangle_gadget() -> Result<InstanceBundle> {
    let nodes = vec![cyc(&[1, 2]), cyc(&[2, 3]), cyc(&[1, 3]), cyc(&[4, 5, 6])];
    let lambda = LengthFunction::uniform(3)?;
    let mut b = InstanceBundle::new("triangle".into(), 6, lambda, InstanceSource::Direct(nodes.clone()));
    b.node_order = Some(nodes);
    b.expect("nodes", ExpectedValue::Int(4), "construction");
    b.expect("realizable", ExpectedValue::Bool(false), "construction");
    Ok(b)
}

/// Each ordered pair `(i, j)`, `i ≠ j`, is an arc with probability `p`, drawn exactly from
/// `p`'s numerator and denominator.
pub fn gen_random(n: usize, p: Rational, seed: u64, lambda: &LengthFunction) -> Result<InstanceBundle> {
    if n < 2 {
        return Err(BxError::Params(format!("random instance needs n >= 2, got {n}")));
    }
    if p < Rational::zero() || p > Rational::one() {
        return Err(BxError::Params("arc density must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arcs = Vec::new();
    for i in 1..=n as u32 {
        for j in 1..=n as u32 {
            if i != j && rng.gen_range(0..*p.denom()) < *p.numer() {
                arcs.push((i, j));
            }
        }
    }
    let w = WishListVector::from_arcs(n, arcs)?;
    let name = format!("rand:n={n},p={},seed={seed},k={}", fmt_rational(&p), lambda.k());
    Ok(InstanceBundle::new(name, n, lambda.clone(), InstanceSource::Wishes(w)))
}
