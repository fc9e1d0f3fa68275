//! Exact maximum-weight independent sets by agent branching with memoized residuals.
//!
//! Integer weights (`CycleGraph::int_weight`) keep every comparison exact.

use crate::cycle_graph::{CycleGraph, NodeId};
use std::collections::HashMap;

struct Residual {
    // per agent bit: (mask, weight) of candidate nodes containing it
    by_agent: Vec<Vec<(u128, i64)>>,
    universe: u128,
    memo: HashMap<u128, i64>,
}

impl Residual {
    fn new(g: &CycleGraph, cand: &[NodeId]) -> Self {
        let mut by_agent = vec![Vec::new(); 128];
        let mut universe = 0u128;
        for &v in cand {
            let node = g.node(v);
            universe |= node.mask;
            for a in node.agents() {
                by_agent[a.index() - 1].push((node.mask, g.int_weight(v)));
            }
        }
        Self { by_agent, universe, memo: HashMap::new() }
    }

    // best weight using only agents outside `used`; the lowest free agent is either
    // skipped or covered by exactly one node
    fn best(&mut self, used: u128) -> i64 {
        let free = self.universe & !used;
        if free == 0 {
            return 0;
        }
        if let Some(&w) = self.memo.get(&used) {
            return w;
        }
        let a = free.trailing_zeros() as usize;
        let bit = 1u128 << a;
        let mut best = self.best(used | bit);
        for t in 0..self.by_agent[a].len() {
            let (m, w) = self.by_agent[a][t];
            if m & used == 0 {
                best = best.max(w + self.best(used | m));
            }
        }
        self.memo.insert(used, best);
        best
    }
}

/// Maximum integer weight of an independent subset of `cand`.
pub fn max_weight(g: &CycleGraph, cand: &[NodeId]) -> i64 {
    Residual::new(g, cand).best(0)
}

/// The optimum of `cand` whose sorted node list is lexicographically smallest, with its weight.
///
/// `cand` must be ascending.
pub fn lex_first_optimum(g: &CycleGraph, cand: &[NodeId]) -> (Vec<NodeId>, i64) {
    let target = max_weight(g, cand);
    let mut chosen = Vec::new();
    let mut used = 0u128;
    let mut w = 0i64;
    for (idx, &v) in cand.iter().enumerate() {
        if w == target {
            break;
        }
        let m = g.node(v).mask;
        if m & used != 0 {
            continue;
        }
        let used2 = used | m;
        let rest: Vec<NodeId> = cand[idx + 1..].iter().copied().filter(|&u| g.node(u).mask & used2 == 0).collect();
        let head = w + g.int_weight(v);
        if head + upper_bound(g, &rest) < target {
            continue;
        }
        if head + max_weight(g, &rest) == target {
            chosen.push(v);
            used = used2;
            w = head;
        }
    }
    debug_assert_eq!(w, target);
    (chosen, target)
}

/// Sum over agents of the best per-agent share among nodes containing them.
fn upper_bound(g: &CycleGraph, cand: &[NodeId]) -> i64 {
    let mut share = [0i64; 128];
    for &v in cand {
        let l = g.int_lambda(v);
        for a in g.node(v).agents() {
            let s = &mut share[a.index() - 1];
            *s = (*s).max(l);
        }
    }
    share.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LengthFunction, TradingCycle};
    use crate::rational::{int, rat};

    fn g(cycles: &[&[u32]], n: usize, lam: &LengthFunction) -> CycleGraph {
        let cs = cycles.iter().map(|c| TradingCycle::from_ids(c).unwrap()).collect();
        CycleGraph::with_order(cs, n, lam).unwrap()
    }

    #[test]
    fn empty_and_single() {
        let u = LengthFunction::uniform(3).unwrap();
        let e = g(&[], 0, &u);
        assert_eq!(lex_first_optimum(&e, &[]), (vec![], 0));
        let s = g(&[&[1, 2, 3]], 3, &u);
        assert_eq!(lex_first_optimum(&s, &[0]), (vec![0], 3));
    }

    #[test]
    fn clique_tie_takes_first() {
        let u = LengthFunction::uniform(3).unwrap();
        let c = g(&[&[1, 2], &[1, 3], &[1, 4]], 4, &u);
        assert_eq!(lex_first_optimum(&c, &[0, 1, 2]), (vec![0], 2));
    }

    #[test]
    fn prefers_heavier_pair() {
        let l = LengthFunction::new(3, vec![int(1), rat(1, 2)]).unwrap();
        // (1,2,3)=3/2 vs (1,4)+(2,5)=4
        let c = g(&[&[1, 2, 3], &[1, 4], &[2, 5]], 5, &l);
        let (set, w) = lex_first_optimum(&c, &[0, 1, 2]);
        assert_eq!(set, vec![1, 2]);
        assert_eq!(c.to_rational(w), int(4));
    }
}
