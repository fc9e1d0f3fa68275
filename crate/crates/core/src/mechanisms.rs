//! Mechanism catalog and the quantities derived from the length function.

use crate::cycle_graph::{enumerate_cycles, CycleGraph, NodeId};
use crate::error::{BxError, Result};
use crate::exact;
use crate::local_search::{
    concatenate, concatenate_all, AlgRun, Algorithm, AllForQ, Expansion, ImprovementRule, LengthFilter, LocalSearch,
    RunStats,
};
use crate::model::{utility, AgentId, Exchange, LengthFunction, Utility, WishListVector};
use crate::rational::{fmt_rational, int, parse_rational, rat, Rational};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt;

/// Default node cap for exhaustive solves.
pub const DEFAULT_NODE_CAP: usize = 4096;

/// Everything the mechanisms derive from `λ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LambdaProfile {
    pub lambda: LengthFunction,
    /// Largest `ℓ ≤ k−1` with `λ(ℓ) > λ(k)`.
    pub ell_star: Option<usize>,
    /// Lengths just before a strict drop of `λ`, plus `k`; ascending.
    pub levels: Vec<usize>,
    /// `L_ℓ = {ℓ′ ≤ ℓ : λ(ℓ′) = λ(ℓ)}` for every `ℓ`.
    pub classes: BTreeMap<usize, Vec<usize>>,
    pub rho: Option<Rational>,
    pub rho1: Option<Rational>,
    pub rho2: Option<Rational>,
}

impl LambdaProfile {
    pub fn new(lambda: &LengthFunction) -> Self {
        let k = lambda.k();
        let lam = |l: usize| lambda.lam(l);
        let ell_star = (2..k).rev().find(|&l| lam(l) > lam(k));
        let mut levels: Vec<usize> = (2..k).filter(|&l| lam(l) > lam(l + 1)).collect();
        levels.push(k);
        let classes = (2..=k).map(|l| (l, (2..=l).filter(|&m| lam(m) == lam(l)).collect())).collect();
        let mut rho1: Option<Rational> = None;
        let mut rho2: Option<Rational> = None;
        for l in 2..=k {
            for lp in l + 1..=k {
                if lam(l) <= lam(lp) {
                    continue;
                }
                let base = int(lp as i64) * lam(lp) / lam(l);
                let second = rat(l as i64 - 1, l as i64) * base + Rational::one();
                rho1 = Some(rho1.map_or(base, |r| r.max(base)));
                rho2 = Some(rho2.map_or(second, |r| r.max(second)));
            }
        }
        let rho = match (rho1, rho2) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        Self { lambda: lambda.clone(), ell_star, levels, classes, rho, rho1, rho2 }
    }

    /// `ρ > k − 1`.
    pub fn rho_exceeds_k_minus_1(&self) -> Option<bool> {
        self.rho.map(|r| r > int(self.lambda.k() as i64 - 1))
    }

    /// `λ(k)/λ(ℓ*) > (k−1)/k`, the closed-form test for `ρ > k − 1`.
    pub fn tight_predicate(&self) -> Option<bool> {
        let k = self.lambda.k();
        let l = self.ell_star?;
        Some(self.lambda.lam(k) / self.lambda.lam(l) > rat(k as i64 - 1, k as i64))
    }
}

pub fn lambda_profile(lambda: &LengthFunction) -> LambdaProfile {
    LambdaProfile::new(lambda)
}

/// `Greedy^j`: local search with `r_E` restricted to length `j`.
pub fn greedy_phase(j: usize) -> Box<dyn Algorithm> {
    let ex = Expansion { filter: LengthFilter::Exactly(j) };
    Box::new(LocalSearch::new(format!("Greedy^{j}"), vec![Box::new(ex)]))
}

/// `Greedy^{lo} ⋯ Greedy^{hi}`.
pub fn greedy_range(lo: usize, hi: usize) -> Result<Box<dyn Algorithm>> {
    concatenate_all((lo..=hi).map(greedy_phase).collect())
        .ok_or_else(|| BxError::Params(format!("empty greedy range {lo}..={hi}")))
}

pub fn greedy(k: usize) -> Result<Box<dyn Algorithm>> {
    greedy_range(2, k)
}

/// Local search over `(r_E, r_q)` restricted to `filter`.
pub fn ls_filtered(q: usize, filter: LengthFilter, loyal: bool) -> Result<Box<dyn Algorithm>> {
    if q == 0 {
        return Err(BxError::Params("q must be at least 1".into()));
    }
    let ex = Expansion { filter };
    let swap = AllForQ { q, filter, loyal };
    let rules: Vec<Box<dyn ImprovementRule>> = vec![Box::new(ex), Box::new(swap)];
    let name = format!("LS_{q}{}", if loyal { "" } else { "_disloyal" });
    Ok(Box::new(LocalSearch::new(name, rules)))
}

pub fn ls_q(q: usize) -> Result<Box<dyn Algorithm>> {
    ls_filtered(q, LengthFilter::Any, true)
}

/// `Greedy^{≤ℓ*} · LS_q^{>ℓ*}`; undefined for uniform `λ`.
pub fn nu_q(q: usize, lambda: &LengthFunction) -> Result<Box<dyn Algorithm>> {
    let ls = LambdaProfile::new(lambda)
        .ell_star
        .ok_or_else(|| BxError::Undefined("NU_q needs a non-uniform length function".into()))?;
    Ok(concatenate(greedy_range(2, ls)?, ls_filtered(q, LengthFilter::GreaterThan(ls), true)?))
}

/// `OPT^ℓ`: lexicographically first optimum of `G[V^ℓ]`, `V^ℓ = {v : λ(|α(v)|) = λ(ℓ)}`.
pub struct OptEll {
    pub ell: usize,
    pub lambda: LengthFunction,
    pub cap: usize,
}

impl OptEll {
    pub fn in_class(&self, len: usize) -> bool {
        self.lambda.at(len) == self.lambda.at(self.ell)
    }
}

impl Algorithm for OptEll {
    fn name(&self) -> String {
        format!("OPT^{}", self.ell)
    }

    fn run(&self, g: &CycleGraph) -> Result<AlgRun> {
        let target = g.lambda().at(self.ell);
        let cand: Vec<NodeId> = g.node_ids().filter(|&v| g.lambda().at(g.node(v).len()) == target).collect();
        if cand.len() > self.cap {
            return Err(BxError::OracleCap { nodes: cand.len(), cap: self.cap });
        }
        let (set, _) = exact::lex_first_optimum(g, &cand);
        let mut stats = RunStats { iterations: 1, ..Default::default() };
        stats.rule_firings.insert(self.name(), 1);
        Ok(AlgRun { set: set.into_iter().collect(), stats })
    }

    fn length_bounds(&self, k: usize) -> Option<(usize, usize)> {
        let ls: Vec<usize> = (2..=k).filter(|&l| self.in_class(l)).collect();
        Some((*ls.first()?, *ls.last()?))
    }
}

pub fn opt_ell(ell: usize, lambda: &LengthFunction, cap: usize) -> Result<Box<dyn Algorithm>> {
    if !(2..=lambda.k()).contains(&ell) {
        return Err(BxError::Params(format!("OPT^l needs 2 <= l <= {}, got {ell}", lambda.k())));
    }
    Ok(Box::new(OptEll { ell, lambda: lambda.clone(), cap }))
}

/// `IO = OPT^{ℓ₁} ⋯ OPT^{ℓ_|L|}` over the levels in increasing order.
pub fn io(lambda: &LengthFunction, cap: usize) -> Result<Box<dyn Algorithm>> {
    let phases =
        LambdaProfile::new(lambda).levels.into_iter().map(|l| opt_ell(l, lambda, cap)).collect::<Result<Vec<_>>>()?;
    concatenate_all(phases).ok_or_else(|| BxError::Params("no levels".into()))
}

/// Parsed mechanism selector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MechanismSpec {
    Greedy,
    Ls {
        q: usize,
    },
    /// `r_q` without the agent-superset requirement; known not truthful.
    LsDisloyal {
        q: usize,
    },
    Nu {
        q: usize,
    },
    Io,
    Opt {
        l: usize,
    },
    Randomized {
        zeta: Rational,
        base: Box<MechanismSpec>,
    },
}

impl MechanismSpec {
    /// `greedy`, `ls:q=2`, `lsbad:q=2`, `nu:q=1`, `io`, `opt:l=3`, `rand:zeta=1/10:base=greedy`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |m: &str| BxError::Parse(format!("mechanism {s:?}: {m}"));
        if let Some(rest) = s.strip_prefix("rand:") {
            let rest = rest.strip_prefix("zeta=").ok_or_else(|| bad("expected zeta="))?;
            let (z, base) = rest.split_once(":base=").ok_or_else(|| bad("expected :base="))?;
            let zeta = parse_rational(z)?;
            if zeta <= Rational::zero() || zeta >= Rational::one() {
                return Err(bad("zeta must lie strictly between 0 and 1"));
            }
            let base = Self::parse(base)?;
            return Ok(Self::Randomized { zeta, base: Box::new(base) });
        }
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let int_arg = |key: &str| -> Result<usize> {
            let a = arg.ok_or_else(|| bad(&format!("missing {key}=")))?;
            let v = a
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .ok_or_else(|| bad(&format!("expected {key}=")))?;
            let v: usize = v.parse().map_err(|_| bad("not an integer"))?;
            if v == 0 {
                return Err(bad("must be positive"));
            }
            Ok(v)
        };
        let spec = match head {
            "greedy" if arg.is_none() => Self::Greedy,
            "io" if arg.is_none() => Self::Io,
            "ls" => Self::Ls { q: int_arg("q")? },
            "lsbad" => Self::LsDisloyal { q: int_arg("q")? },
            "nu" => Self::Nu { q: int_arg("q")? },
            "opt" => Self::Opt { l: int_arg("l")? },
            _ => return Err(bad("unknown mechanism")),
        };
        Ok(spec)
    }

    /// Graph-level algorithm; randomized specs have none.
    pub fn algorithm(&self, lambda: &LengthFunction, cap: usize) -> Result<Box<dyn Algorithm>> {
        match self {
            Self::Greedy => greedy(lambda.k()),
            Self::Ls { q } => ls_q(*q),
            Self::LsDisloyal { q } => ls_filtered(*q, LengthFilter::Any, false),
            Self::Nu { q } => nu_q(*q, lambda),
            Self::Io => io(lambda, cap),
            Self::Opt { l } => opt_ell(*l, lambda, cap),
            Self::Randomized { .. } => Err(BxError::Undefined("randomized mechanisms act on wish lists".into())),
        }
    }

    /// Approximation bound the theory claims, if any.
    pub fn claimed_ratio(&self, lambda: &LengthFunction) -> Option<Rational> {
        let k = lambda.k() as i64;
        let p = LambdaProfile::new(lambda);
        match self {
            Self::Greedy => Some(int(k)),
            Self::Ls { q } => Some(int(k - 1) + rat(1, *q as i64)),
            Self::Nu { q } => {
                let a = int(k - 1) + rat(1, *q as i64);
                p.rho.map(|r| a.max(r))
            }
            Self::Io => Some(p.rho.unwrap_or_else(Rational::one)),
            _ => None,
        }
    }

    /// Truthfulness the theory claims for this mechanism under `λ`.
    pub fn claimed_truthful(&self, lambda: &LengthFunction) -> bool {
        match self {
            Self::Greedy | Self::Io => true,
            Self::Nu { .. } => !lambda.is_uniform(),
            Self::Ls { .. } => lambda.is_uniform(),
            Self::Opt { .. } | Self::LsDisloyal { .. } | Self::Randomized { .. } => false,
        }
    }
}

impl fmt::Display for MechanismSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Greedy => write!(f, "greedy"),
            Self::Ls { q } => write!(f, "ls:q={q}"),
            Self::LsDisloyal { q } => write!(f, "lsbad:q={q}"),
            Self::Nu { q } => write!(f, "nu:q={q}"),
            Self::Io => write!(f, "io"),
            Self::Opt { l } => write!(f, "opt:l={l}"),
            Self::Randomized { zeta, base } => write!(f, "rand:zeta={}:base={base}", fmt_rational(zeta)),
        }
    }
}

/// Outcome of running a mechanism on a reported wish-list vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MechanismReport {
    pub mechanism: String,
    pub exchange: Exchange,
    pub welfare: Rational,
    pub utilities: BTreeMap<AgentId, Utility>,
    pub stats: RunStats,
}

/// Runs `alg` on the cycle graph of `reported` and maps the output back to an exchange.
pub fn solve_wishes(
    alg: &dyn Algorithm,
    reported: &WishListVector,
    lambda: &LengthFunction,
) -> Result<(Exchange, RunStats)> {
    let g = CycleGraph::from_wishes(reported, lambda)?;
    let run = alg.run(&g)?;
    Ok((g.to_exchange(&run.set)?, run.stats))
}

/// Lottery wrapper: with probability `1 − ζ` return `f(W)`, otherwise a uniform length
/// in `2..=k` and a uniform reported cycle of that length (identity if there is none).
/// Returns the exchange and whether the lottery branch fired.
pub fn randomized_wrapper(
    f: &dyn Fn(&WishListVector) -> Result<Exchange>,
    zeta: Rational,
    wishes: &WishListVector,
    lambda: &LengthFunction,
    seed: u64,
) -> Result<(Exchange, bool)> {
    if zeta <= Rational::zero() || zeta >= Rational::one() {
        return Err(BxError::Params("zeta must lie strictly between 0 and 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = rng.gen_range(0..*zeta.denom());
    if draw >= *zeta.numer() {
        return Ok((f(wishes)?, false));
    }
    let ell = rng.gen_range(2..=lambda.k());
    let of_len: Vec<_> = enumerate_cycles(wishes, lambda.k()).into_iter().filter(|c| c.len() == ell).collect();
    if of_len.is_empty() {
        return Ok((Exchange::identity(), true));
    }
    let c = of_len[rng.gen_range(0..of_len.len())].clone();
    Ok((Exchange::new([c])?, true))
}

/// Runs a mechanism end to end: `reported` drives the outcome, `truth` scores utilities.
pub fn run_mechanism(
    spec: &MechanismSpec,
    reported: &WishListVector,
    truth: &WishListVector,
    lambda: &LengthFunction,
    seed: u64,
    cap: usize,
) -> Result<MechanismReport> {
    let (exchange, stats) = match spec {
        MechanismSpec::Randomized { zeta, base } => {
            let alg = base.algorithm(lambda, cap)?;
            let f = |w: &WishListVector| solve_wishes(alg.as_ref(), w, lambda).map(|(e, _)| e);
            let (ex, lottery) = randomized_wrapper(&f, *zeta, reported, lambda, seed)?;
            let mut stats = RunStats::default();
            stats.rule_firings.insert(if lottery { "lottery" } else { "base" }.into(), 1);
            (ex, stats)
        }
        _ => solve_wishes(spec.algorithm(lambda, cap)?.as_ref(), reported, lambda)?,
    };
    let mut utilities = BTreeMap::new();
    let mut welfare = Rational::zero();
    for i in truth.agents() {
        let u = utility(i, &exchange, truth, lambda)?;
        if let Utility::Finite(x) = u {
            welfare += x;
        }
        utilities.insert(i, u);
    }
    Ok(MechanismReport { mechanism: spec.to_string(), exchange, welfare, utilities, stats })
}
