//! Agents, wish lists, length functions, trading cycles, exchanges and utilities.

use crate::error::{BxError, Result};
use crate::rational::{int, Rational};
use num_traits::{One, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Largest supported agent count; agent sets are packed into `u128` masks.
pub const MAX_AGENTS: usize = 128;

/// 1-based agent index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub u32);

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Bit position in an agent mask.
    pub fn bit(self) -> u128 {
        1u128 << (self.0 - 1)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Iterates agent ids set in `mask`, ascending.
pub fn mask_agents(mut mask: u128) -> impl Iterator<Item = AgentId> {
    std::iter::from_fn(move || {
        if mask == 0 {
            return None;
        }
        let b = mask.trailing_zeros();
        mask &= mask - 1;
        Some(AgentId(b + 1))
    })
}

/// Out-arc sets of the agent digraph: `j ∈ wish(i)` iff agent `i` accepts the item of `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WishListVector {
    wish: Vec<BTreeSet<AgentId>>,
}

impl WishListVector {
    pub fn new(n: usize, lists: Vec<Vec<u32>>) -> Result<Self> {
        if lists.len() != n {
            return Err(BxError::Params(format!("expected {n} wish lists, got {}", lists.len())));
        }
        let sets = lists.into_iter().map(|l| l.into_iter().map(AgentId).collect()).collect();
        Self::from_sets(sets)
    }

    pub fn from_sets(wish: Vec<BTreeSet<AgentId>>) -> Result<Self> {
        let n = wish.len();
        if n > MAX_AGENTS {
            return Err(BxError::TooManyAgents(n));
        }
        for (idx, set) in wish.iter().enumerate() {
            let me = AgentId(idx as u32 + 1);
            for &j in set {
                if j.0 == 0 || j.index() > n {
                    return Err(BxError::AgentOutOfRange { agent: j.0, n });
                }
                if j == me {
                    return Err(BxError::SelfWish(me.0));
                }
            }
        }
        Ok(Self { wish })
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::from_sets(vec![BTreeSet::new(); n])
    }

    /// Builds the vector from arcs `(i, j)` meaning `j ∈ W_i`.
    pub fn from_arcs(n: usize, arcs: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut wish = vec![BTreeSet::new(); n];
        for (i, j) in arcs {
            if i == 0 || i as usize > n {
                return Err(BxError::AgentOutOfRange { agent: i, n });
            }
            wish[i as usize - 1].insert(AgentId(j));
        }
        Self::from_sets(wish)
    }

    pub fn n(&self) -> usize {
        self.wish.len()
    }

    pub fn wishes(&self, i: AgentId) -> &BTreeSet<AgentId> {
        &self.wish[i.index() - 1]
    }

    pub fn has_arc(&self, i: AgentId, j: AgentId) -> bool {
        i.0 >= 1 && i.index() <= self.n() && self.wish[i.index() - 1].contains(&j)
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (1..=self.n() as u32).map(AgentId)
    }

    pub fn arcs(&self) -> impl Iterator<Item = (AgentId, AgentId)> + '_ {
        self.wish.iter().enumerate().flat_map(|(i, s)| s.iter().map(move |&j| (AgentId(i as u32 + 1), j)))
    }

    pub fn arc_count(&self) -> usize {
        self.wish.iter().map(BTreeSet::len).sum()
    }

    /// `(W_{-i}, report)`; fails if `report` is not a valid list for `i`.
    pub fn with_report(&self, i: AgentId, report: BTreeSet<AgentId>) -> Result<Self> {
        let mut wish = self.wish.clone();
        wish[i.index() - 1] = report;
        Self::from_sets(wish)
    }

    pub fn as_lists(&self) -> Vec<Vec<u32>> {
        self.wish.iter().map(|s| s.iter().map(|a| a.0).collect()).collect()
    }
}

/// Non-increasing `λ: {2..k} → (0, 1]`; `values[0]` is `λ(2)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LengthFunction {
    k: usize,
    values: Vec<Rational>,
}

impl LengthFunction {
    pub fn new(k: usize, values: Vec<Rational>) -> Result<Self> {
        if k < 2 {
            return Err(BxError::InvalidLambda(format!("k must be at least 2, got {k}")));
        }
        if values.len() != k - 1 {
            return Err(BxError::InvalidLambda(format!("k={k} needs {} values, got {}", k - 1, values.len())));
        }
        for (i, v) in values.iter().enumerate() {
            if *v <= Rational::zero() || *v > Rational::one() {
                return Err(BxError::InvalidLambda(format!("lambda({}) = {v} not in (0,1]", i + 2)));
            }
            if i > 0 && values[i - 1] < *v {
                return Err(BxError::InvalidLambda(format!("lambda increases at length {}", i + 2)));
            }
        }
        Ok(Self { k, values })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(k, vec![int(1); k.saturating_sub(1)])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    /// `λ(len)`, or `None` outside `2..=k`.
    pub fn at(&self, len: usize) -> Option<Rational> {
        if (2..=self.k).contains(&len) {
            Some(self.values[len - 2])
        } else {
            None
        }
    }

    /// `λ(len)` for a length known to be in range.
    pub fn lam(&self, len: usize) -> Rational {
        self.values[len - 2]
    }

    pub fn is_uniform(&self) -> bool {
        self.values.iter().all(|v| *v == self.values[0])
    }

    /// `c·λ`; fails when a value leaves `(0, 1]`.
    pub fn scaled(&self, c: Rational) -> Result<Self> {
        Self::new(self.k, self.values.iter().map(|v| v * c).collect())
    }
}

/// Simple cycle `a0 → a1 → … → a0` where each arc `(a_t, a_{t+1})` means `a_t` receives
/// the item of `a_{t+1}`. Stored rotated so the smallest agent leads.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TradingCycle {
    agents: Vec<AgentId>,
}

impl TradingCycle {
    pub fn new(agents: Vec<AgentId>) -> Result<Self> {
        if agents.len() < 2 {
            return Err(BxError::InvalidCycle(format!("length {} < 2", agents.len())));
        }
        let distinct: BTreeSet<_> = agents.iter().collect();
        if distinct.len() != agents.len() {
            return Err(BxError::InvalidCycle("repeated agent".into()));
        }
        if agents.iter().any(|a| a.0 == 0) {
            return Err(BxError::InvalidCycle("agent id 0".into()));
        }
        let pos = (0..agents.len()).min_by_key(|&i| agents[i]).unwrap_or(0);
        let mut agents = agents;
        agents.rotate_left(pos);
        Ok(Self { agents })
    }

    pub fn from_ids(ids: &[u32]) -> Result<Self> {
        Self::new(ids.iter().copied().map(AgentId).collect())
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn agents(&self) -> &[AgentId] {
        &self.agents
    }

    pub fn agent_set(&self) -> BTreeSet<AgentId> {
        self.agents.iter().copied().collect()
    }

    pub fn mask(&self) -> u128 {
        self.agents.iter().fold(0, |m, a| m | a.bit())
    }

    pub fn contains(&self, i: AgentId) -> bool {
        self.agents.contains(&i)
    }

    /// `π(i)` along this cycle.
    pub fn successor(&self, i: AgentId) -> Option<AgentId> {
        let p = self.agents.iter().position(|&a| a == i)?;
        Some(self.agents[(p + 1) % self.agents.len()])
    }

    pub fn arcs(&self) -> impl Iterator<Item = (AgentId, AgentId)> + '_ {
        let l = self.agents.len();
        (0..l).map(move |t| (self.agents[t], self.agents[(t + 1) % l]))
    }

    pub fn respects(&self, w: &WishListVector) -> bool {
        self.arcs().all(|(a, b)| w.has_arc(a, b))
    }

    pub fn ids(&self) -> Vec<u32> {
        self.agents.iter().map(|a| a.0).collect()
    }
}

impl fmt::Display for TradingCycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (t, a) in self.agents.iter().enumerate() {
            if t > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Set of pairwise agent-disjoint trading cycles.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Exchange {
    cycles: BTreeSet<TradingCycle>,
}

impl Exchange {
    pub fn new(cycles: impl IntoIterator<Item = TradingCycle>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut set = BTreeSet::new();
        for c in cycles {
            for &a in c.agents() {
                if !seen.insert(a) {
                    return Err(BxError::NotDisjoint(a.0));
                }
            }
            set.insert(c);
        }
        Ok(Self { cycles: set })
    }

    /// The identity bijection.
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn cycles(&self) -> &BTreeSet<TradingCycle> {
        &self.cycles
    }

    pub fn is_identity(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn cycle_of(&self, i: AgentId) -> Option<&TradingCycle> {
        self.cycles.iter().find(|c| c.contains(i))
    }

    /// `π(i)`; fixed points map to themselves.
    pub fn image(&self, i: AgentId) -> AgentId {
        self.cycle_of(i).and_then(|c| c.successor(i)).unwrap_or(i)
    }

    pub fn partaking(&self) -> BTreeSet<AgentId> {
        self.cycles.iter().flat_map(|c| c.agents().iter().copied()).collect()
    }

    pub fn max_len(&self) -> usize {
        self.cycles.iter().map(TradingCycle::len).max().unwrap_or(0)
    }

    /// The bijection as `(i, π(i))` for every partaking agent.
    pub fn permutation(&self) -> BTreeMap<AgentId, AgentId> {
        self.cycles.iter().flat_map(|c| c.arcs()).collect()
    }
}

/// Agent utility; `NegInfinity` sorts below every finite value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Utility {
    NegInfinity,
    Finite(Rational),
}

impl Utility {
    pub fn finite(self) -> Option<Rational> {
        match self {
            Utility::Finite(r) => Some(r),
            Utility::NegInfinity => None,
        }
    }
}

impl fmt::Display for Utility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Utility::NegInfinity => write!(f, "-inf"),
            Utility::Finite(r) => write!(f, "{}", crate::rational::fmt_rational(r)),
        }
    }
}

fn check_lengths(exchange: &Exchange, lambda: &LengthFunction) -> Result<()> {
    let len = exchange.max_len();
    if len > lambda.k() {
        return Err(BxError::CycleTooLong { len, k: lambda.k() });
    }
    Ok(())
}

fn check_range(exchange: &Exchange, n: usize) -> Result<()> {
    for c in exchange.cycles() {
        for &a in c.agents() {
            if a.index() > n {
                return Err(BxError::AgentOutOfRange { agent: a.0, n });
            }
        }
    }
    Ok(())
}

/// True iff every arc `(i, π(i))` is a wish of `i`.
pub fn respects(exchange: &Exchange, wishes: &WishListVector) -> bool {
    exchange.cycles().iter().all(|c| c.respects(wishes))
}

/// `0` off-exchange, `λ(len c)` on a respecting arc, `−∞` otherwise.
pub fn utility(
    i: AgentId,
    exchange: &Exchange,
    true_wishes: &WishListVector,
    lambda: &LengthFunction,
) -> Result<Utility> {
    check_lengths(exchange, lambda)?;
    check_range(exchange, true_wishes.n())?;
    Ok(match exchange.cycle_of(i) {
        None => Utility::Finite(Rational::zero()),
        Some(c) => {
            let next = c.successor(i).expect("agent lies on its cycle");
            if true_wishes.has_arc(i, next) {
                Utility::Finite(lambda.lam(c.len()))
            } else {
                Utility::NegInfinity
            }
        }
    })
}

/// `Σ_c len(c)·λ(len(c))`; defined only for respecting exchanges.
pub fn social_welfare(exchange: &Exchange, wishes: &WishListVector, lambda: &LengthFunction) -> Result<Rational> {
    check_lengths(exchange, lambda)?;
    check_range(exchange, wishes.n())?;
    if !respects(exchange, wishes) {
        return Err(BxError::NotRespecting);
    }
    Ok(exchange.cycles().iter().map(|c| int(c.len() as i64) * lambda.lam(c.len())).sum())
}
