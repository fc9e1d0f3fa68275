//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion.
//!
//! A failure marked known-unattainable is a property the theory itself rules out; it is reported
//! as a failure but does not fail the process. Any other failure exits nonzero.

use bx_core::instances::{
    comb_script, gen_comb, gen_g_bad, gen_gadget_gn, gen_random, gen_triangle_gadget, is_realizable,
};
use bx_core::mechanisms::{greedy_phase, ls_q, nu_q, opt_ell, solve_wishes, MechanismSpec, DEFAULT_NODE_CAP};
use bx_core::rational::{int, rat};
use bx_core::verification::{
    fuzz_truthfulness_nodes, fuzz_truthfulness_wishlists, oracle_weight, test_inpa, Bipartite, FuzzConfig, Ratio,
};
use bx_core::{
    lambda_profile, utility, AgentId, Algorithm, CycleGraph, Exchange, InstanceBundle, LengthFunction, Rational,
    TradingCycle,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    known: Option<&'static str>,
    detail: String,
    elapsed: Duration,
}

struct Inst {
    bundle: InstanceBundle,
    graph: CycleGraph,
    oracle: Rational,
}

impl Inst {
    fn lam(&self) -> &LengthFunction {
        &self.bundle.lambda
    }
    fn k(&self) -> usize {
        self.bundle.k()
    }
}

fn lam(vals: &[(i64, i64)]) -> LengthFunction {
    LengthFunction::new(vals.len() + 1, vals.iter().map(|&(a, b)| rat(a, b)).collect()).unwrap()
}

fn lambdas(k: usize) -> Vec<LengthFunction> {
    match k {
        3 => vec![LengthFunction::uniform(3).unwrap(), lam(&[(1, 1), (9, 10)]), lam(&[(1, 1), (1, 2)])],
        _ => vec![LengthFunction::uniform(4).unwrap(), lam(&[(1, 1), (9, 10), (4, 5)]), lam(&[(1, 1), (1, 1), (1, 2)])],
    }
}

/// 504 seeded instances: k ∈ {3,4}, p ∈ {1/5, 2/5, 3/5}, uniform and two non-uniform λ,
/// n = 4..=10.
fn corpus() -> Vec<Inst> {
    let mut specs = Vec::new();
    for k in [3usize, 4] {
        for p in [rat(1, 5), rat(2, 5), rat(3, 5)] {
            for l in lambdas(k) {
                for seed in 0..28u64 {
                    specs.push((4 + (seed % 7) as usize, p, seed * 1000 + k as u64, l.clone()));
                }
            }
        }
    }
    specs
        .into_par_iter()
        .map(|(n, p, seed, l)| {
            let bundle = gen_random(n, p, seed, &l).unwrap();
            let graph = bundle.graph().unwrap();
            let oracle = oracle_weight(&graph, DEFAULT_NODE_CAP).unwrap();
            Inst { bundle, graph, oracle }
        })
        .collect()
}

fn timed(f: impl FnOnce() -> (bool, String)) -> (bool, String, Duration) {
    let t = Instant::now();
    let (pass, detail) = f();
    (pass, detail, t.elapsed())
}

// worst ratio and violation count of one algorithm family against a per-instance bound
fn ratio_sweep<'a>(
    insts: impl IntoParallelIterator<Item = &'a Inst>,
    alg: impl Fn(&Inst) -> Option<Box<dyn Algorithm>> + Sync,
    bound: impl Fn(&Inst) -> Rational + Sync,
) -> (usize, usize, Rational) {
    let rows: Vec<(bool, Rational)> = insts
        .into_par_iter()
        .filter_map(|inst| {
            let a = alg(inst)?;
            let w = inst.graph.weight(&a.run(&inst.graph).unwrap().set);
            let r = Ratio::of(inst.oracle, w);
            let worst = match r {
                Ratio::Finite(x) => x,
                Ratio::Infinite => int(i64::MAX),
            };
            Some((r.within(bound(inst)), worst))
        })
        .collect();
    let bad = rows.iter().filter(|(ok, _)| !ok).count();
    let worst = rows.iter().map(|(_, r)| *r).max().unwrap_or_else(|| int(1));
    (rows.len(), bad, worst)
}

fn criterion_1() -> (bool, String, Duration) {
    timed(|| {
        let mut ok = true;
        let mut parts = Vec::new();
        for q in 1..=4usize {
            let g = gen_g_bad(q).unwrap().graph().unwrap();
            let w = g.weight(&ls_q(q).unwrap().run(&g).unwrap().set);
            let o = oracle_weight(&g, DEFAULT_NODE_CAP).unwrap();
            let r = Ratio::of(o, w);
            let qi = q as i64;
            ok &= w == int(3 * (qi + 1)) && o == int(3 * (2 * qi + 3)) && r == Ratio::Finite(int(2) + rat(1, qi + 1));
            parts.push(format!("q={q}: {w}/{o}={r}"));
        }
        (ok, parts.join(", "))
    })
}

fn criterion_6(corpus: &[Inst]) -> Outcome {
    let t = Instant::now();
    let cfg = FuzzConfig::default();
    let cells: Vec<(String, usize)> = corpus
        .iter()
        .enumerate()
        .flat_map(|(i, inst)| {
            let mut m = vec!["greedy".to_string(), "ls:q=1".into(), "ls:q=2".into()];
            if !inst.lam().is_uniform() {
                m.extend(["nu:q=1".to_string(), "nu:q=2".into(), "io".into()]);
            }
            m.into_iter().map(move |s| (s, i))
        })
        .collect();
    // (mechanism, claimed truthful, node findings, wish-list findings)
    let results: Vec<(String, bool, usize, usize)> = cells
        .par_iter()
        .map(|(spec, i)| {
            let inst = &corpus[*i];
            let s = MechanismSpec::parse(spec).unwrap();
            let alg = s.algorithm(inst.lam(), DEFAULT_NODE_CAP).unwrap();
            let nodes = fuzz_truthfulness_nodes(alg.as_ref(), &inst.graph, &cfg).unwrap().len();
            let wishes = fuzz_truthfulness_wishlists(alg.as_ref(), inst.bundle.wishes().unwrap(), inst.lam(), &cfg)
                .unwrap()
                .len();
            (spec.clone(), s.claimed_truthful(inst.lam()), nodes, wishes)
        })
        .collect();
    let mut claimed: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut unclaimed: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (spec, truthful, nodes, wishes) in &results {
        if *truthful {
            let e = claimed.entry(spec.clone()).or_default();
            e.0 += nodes;
            e.1 += wishes;
        } else {
            let e = unclaimed.entry(spec.clone()).or_default();
            e.0 += nodes;
            e.1 += wishes;
            e.2 += usize::from(nodes + wishes > 0);
        }
    }
    let claimed_clean = claimed.values().all(|&(a, b)| a + b == 0);
    let u = LengthFunction::uniform(3).unwrap();
    let gn = gen_gadget_gn(3, 2, &u).unwrap();
    let bad = MechanismSpec::parse("lsbad:q=1").unwrap().algorithm(&u, DEFAULT_NODE_CAP).unwrap();
    let witness = fuzz_truthfulness_nodes(bad.as_ref(), &gn.graph().unwrap(), &cfg).unwrap().len()
        + fuzz_truthfulness_wishlists(bad.as_ref(), gn.wishes().unwrap(), &u, &cfg).unwrap().len();
    let literal_extra: usize = unclaimed.values().map(|&(a, b, _)| a + b).sum();
    let detail = format!(
        "claimed-truthful cells {}: {}; outside claim {}; disloyal witness on G_2: {witness} finding(s)",
        results.iter().filter(|r| r.1).count(),
        claimed.iter().map(|(m, (a, b))| format!("{m} {a}+{b}")).collect::<Vec<_>>().join(", "),
        unclaimed.iter().map(|(m, (a, b, c))| format!("{m} {a}+{b} on {c} instance(s)")).collect::<Vec<_>>().join(", "),
    );
    let pass = claimed_clean && witness >= 1 && literal_extra == 0;
    let harness_ok = claimed_clean && witness >= 1;
    Outcome {
        id: "6",
        title: "truthfulness fuzzing",
        pass,
        known: (!pass && harness_ok)
            .then_some("ls:q is manipulable under non-uniform lambda; its truthfulness holds for uniform lambda only"),
        detail,
        elapsed: t.elapsed(),
    }
}

fn criterion_7(corpus: &[Inst]) -> (bool, String, Duration) {
    let t = Instant::now();
    let cfg = FuzzConfig::default();
    let cells: Vec<(String, usize)> = corpus
        .iter()
        .enumerate()
        .flat_map(|(i, inst)| {
            let k = inst.k();
            let mut m: Vec<String> = (2..=k).map(|j| format!("greedy^{j}")).collect();
            m.extend((2..=k).map(|l| format!("opt^{l}")));
            m.extend(["ls:q=1".to_string(), "ls:q=2".into()]);
            if !inst.lam().is_uniform() {
                m.extend(["nu:q=1".to_string(), "nu:q=2".into()]);
            }
            m.into_iter().map(move |s| (s, i))
        })
        .collect();
    let build = |name: &str, inst: &Inst| -> Box<dyn Algorithm> {
        if let Some(j) = name.strip_prefix("greedy^") {
            greedy_phase(j.parse().unwrap())
        } else if let Some(l) = name.strip_prefix("opt^") {
            opt_ell(l.parse().unwrap(), inst.lam(), DEFAULT_NODE_CAP).unwrap()
        } else if let Some(q) = name.strip_prefix("ls:q=") {
            ls_q(q.parse().unwrap()).unwrap()
        } else {
            nu_q(name["nu:q=".len()..].parse().unwrap(), inst.lam()).unwrap()
        }
    };
    // (name, inpa passed, uniform, node findings when uniform and inpa passed)
    let rows: Vec<(String, bool, bool, usize)> = cells
        .par_iter()
        .map(|(name, i)| {
            let inst = &corpus[*i];
            let alg = build(name, inst);
            let inpa = test_inpa(alg.as_ref(), &inst.graph, &cfg).unwrap();
            let uniform = inst.lam().is_uniform();
            let found = if inpa && uniform {
                fuzz_truthfulness_nodes(alg.as_ref(), &inst.graph, &cfg).unwrap().len()
            } else {
                0
            };
            (name.clone(), inpa, uniform, found)
        })
        .collect();
    let mut failures: BTreeMap<String, usize> = BTreeMap::new();
    for (name, inpa, _, _) in &rows {
        if !inpa {
            *failures.entry(name.clone()).or_default() += 1;
        }
    }
    let implied: usize = rows.iter().map(|r| r.3).sum();
    let checked = rows.iter().filter(|r| r.1 && r.2).count();
    let pass = failures.is_empty() && implied == 0;
    let detail = format!(
        "{} INPA checks, failures {:?}; {checked} uniform INPA-pass cells with {implied} node-hiding finding(s)",
        rows.len(),
        failures
    );
    (pass, detail, t.elapsed())
}

fn criterion_8() -> (bool, bool, String, Duration) {
    let t = Instant::now();
    let hz = Exchange::new([TradingCycle::from_ids(&[1, 2]).unwrap()]).unwrap();
    let mut claimed_ok = true;
    let mut all_ok = true;
    let mut parts = Vec::new();
    for l in [lam(&[(1, 1), (9, 10)]), lam(&[(1, 1), (1, 2)])] {
        let b = gen_comb(2, 3, &l).unwrap();
        let w = b.wishes().unwrap();
        let script = comb_script(2, 3, &l).unwrap();
        for spec in ["greedy", "ls:q=1", "ls:q=2", "nu:q=1", "nu:q=2", "io"] {
            let s = MechanismSpec::parse(spec).unwrap();
            let alg = s.algorithm(&l, DEFAULT_NODE_CAP).unwrap();
            let out = solve_wishes(alg.as_ref(), w, &l).unwrap().0;
            let outs: Vec<Exchange> = script.iter().map(|x| solve_wishes(alg.as_ref(), x, &l).unwrap().0).collect();
            let forced = out == hz && outs.iter().all(|e| *e == hz);
            // step i: agent i moves from W^{i-1} to W^i and must not gain under W^{i-1}
            let consistent = (1..script.len()).all(|i| {
                let liar = AgentId(i as u32);
                utility(liar, &outs[i], &script[i - 1], &l).unwrap()
                    <= utility(liar, &outs[i - 1], &script[i - 1], &l).unwrap()
            });
            let ok = forced && consistent;
            all_ok &= ok;
            if s.claimed_truthful(&l) {
                claimed_ok &= ok;
            }
            if !ok {
                let cycles: Vec<String> = out.cycles().iter().map(ToString::to_string).collect();
                parts.push(format!("{spec} at lambda(3)={} -> {}", l.lam(3), cycles.join("")));
            }
        }
    }
    let detail = if parts.is_empty() {
        "every mechanism outputs pi_H on W^0..W^h".to_string()
    } else {
        format!("claimed-truthful mechanisms forced: {claimed_ok}; not forced: {}", parts.join(", "))
    };
    (all_ok, claimed_ok, detail, t.elapsed())
}

fn criterion_9() -> (bool, String, Duration) {
    timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (mut main_bad, mut slack_bad, mut slack_n, mut hyp_bad) = (0, 0, 0, 0);
        for t in 0..10_000 {
            let k = rng.gen_range(3..=6);
            let b = Bipartite::random(&mut rng, k, 6, t % 2 == 0);
            hyp_bad += usize::from(!b.meets_hypothesis());
            main_bad += usize::from(!b.main_bound_holds());
            if b.has_slack() {
                slack_n += 1;
                slack_bad += usize::from(!b.slack_bound_holds());
            }
        }
        (
            hyp_bad == 0 && main_bad == 0 && slack_bad == 0 && slack_n > 0,
            format!("10000 graphs, {main_bad} main violations, {slack_n} with slack and {slack_bad} slack violations"),
        )
    })
}

// the critical ratio evaluated straight from its defining max over length pairs
fn rho_direct(values: &[Rational]) -> Option<Rational> {
    let k = values.len() + 1;
    let lam = |l: usize| values[l - 2];
    let mut best: Option<Rational> = None;
    for l in 2..=k {
        for lp in (l + 1)..=k {
            if lam(l) > lam(lp) {
                let x = Rational::from_integer(lp as i64) * lam(lp) / lam(l);
                let y = Rational::new(l as i64 - 1, l as i64) * x + 1;
                let m = if x > y { x } else { y };
                best = Some(best.map_or(m, |b: Rational| if m > b { m } else { b }));
            }
        }
    }
    best
}

fn criterion_10() -> (bool, String, Duration) {
    timed(|| {
        let fixed = rho_direct(&[int(1), rat(9, 10)]) == Some(rat(27, 10))
            && rho_direct(&[int(1), rat(1, 2)]) == Some(rat(7, 4));
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (mut n, mut bad) = (0, 0);
        while n < 1000 {
            let k = rng.gen_range(3..=8);
            let mut vals = vec![rat(rng.gen_range(10..=20), 20)];
            for _ in 3..=k {
                let prev = *vals.last().unwrap();
                let next = prev - rat(rng.gen_range(0..=3), 20);
                vals.push(if next > Rational::from_integer(0) { next } else { prev });
            }
            let l = LengthFunction::new(k, vals.clone()).unwrap();
            if vals.iter().all(|v| *v == vals[0]) {
                continue;
            }
            n += 1;
            let p = lambda_profile(&l);
            let rho = p.rho.unwrap();
            let ok = rho < int(k as i64)
                && Some(rho) == rho_direct(&vals)
                && p.rho_exceeds_k_minus_1() == p.tight_predicate();
            bad += usize::from(!ok);
        }
        (
            fixed && bad == 0,
            format!("rho(1,9/10)=27/10 and rho(1,1/2)=7/4 re-derived: {fixed}; {n} random lambda, {bad} failures"),
        )
    })
}

fn criterion_11(corpus: &[Inst]) -> (bool, String, Duration) {
    timed(|| {
        let tri = gen_triangle_gadget().unwrap().graph().unwrap();
        let tri_false = !is_realizable(&tri);
        let unrealizable = corpus.par_iter().filter(|i| !is_realizable(&i.graph)).count();
        (
            tri_false && unrealizable == 0,
            format!(
                "triangle gadget realizable: {}; corpus graphs not realizable: {unrealizable} of {}",
                !tri_false,
                corpus.len()
            ),
        )
    })
}

fn criterion_12() -> (bool, String, Duration) {
    timed(|| {
        let dir = tempfile::tempdir().unwrap();
        let runs: [&[&str]; 4] = [
            &["solve", "gbad:q=2", "ls:q=2"],
            &["solve", "rand:n=7,p=1/2,seed=3", "rand:zeta=1/3:base=greedy"],
            &["sweep", "rand:n=7,p=2/5,seed=0..19,lambda=1,9/10", "greedy", "ls:q=2", "nu:q=1", "io"],
            &["fuzz", "rand:n=8,p=1/2,seed=0..4,lambda=1,9/10", "ls:q=1"],
        ];
        let mut same = 0;
        for (r, args) in runs.iter().enumerate() {
            let mut outs = Vec::new();
            for rep in 0..2 {
                let path = dir.path().join(format!("{r}-{rep}.out"));
                let status = Command::new(env!("CARGO_BIN_EXE_bx"))
                    .args(*args)
                    .args(["--seed", "5", "--out", path.to_str().unwrap()])
                    .output()
                    .unwrap()
                    .status;
                assert!(status.code().is_some_and(|c| c == 0 || c == 2), "{args:?}");
                outs.push(std::fs::read(&path).unwrap());
            }
            same += usize::from(outs[0] == outs[1] && !outs[0].is_empty());
        }
        (same == runs.len(), format!("{same} of {} repeated invocations byte-identical", runs.len()))
    })
}

fn main() {
    let t0 = Instant::now();
    let mut out: Vec<Outcome> = Vec::new();
    let push = |out: &mut Vec<Outcome>, id, title, (pass, detail, elapsed): (bool, String, Duration)| {
        out.push(Outcome { id, title, pass, known: None, detail, elapsed });
    };

    let (p, d, e) = criterion_1();
    push(&mut out, "1", "G_bad tightness", (p && e < Duration::from_secs(5), format!("{d} in {:.2?}", e), e));

    let t = Instant::now();
    let corpus = corpus();
    let corpus_time = t.elapsed();
    let greedy = || MechanismSpec::Greedy;
    let (n, bad, worst) =
        ratio_sweep(&corpus, |i| Some(greedy().algorithm(i.lam(), DEFAULT_NODE_CAP).unwrap()), |i| int(i.k() as i64));
    let e = t.elapsed();
    push(
        &mut out,
        "2",
        "Greedy bound",
        (
            n >= 500 && bad == 0 && e < Duration::from_secs(120),
            format!("{n} instances, {bad} violations, worst {worst}, oracle+greedy {e:.2?} (corpus {corpus_time:.2?})"),
            e,
        ),
    );

    let (p, d, e) = timed(|| {
        let mut ok = true;
        let mut parts = Vec::new();
        for q in [1usize, 2] {
            let (n, bad, worst) =
                ratio_sweep(&corpus, |_| Some(ls_q(q).unwrap()), |i| int(i.k() as i64 - 1) + rat(1, q as i64));
            ok &= bad == 0;
            parts.push(format!("q={q}: {n} instances, {bad} violations, worst {worst}"));
        }
        (ok, parts.join("; "))
    });
    push(&mut out, "3", "LS_q bound", (p, d, e));

    let (p, d, e) = timed(|| {
        let sub: Vec<&Inst> = corpus.iter().filter(|i| i.k() == 3 && !i.lam().is_uniform()).collect();
        let rho_ok = lambda_profile(&lam(&[(1, 1), (9, 10)])).rho == Some(rat(27, 10))
            && lambda_profile(&lam(&[(1, 1), (1, 2)])).rho == Some(rat(7, 4));
        let mut ok = rho_ok;
        let mut parts = Vec::new();
        for q in [1usize, 2] {
            let (n, bad, worst) = ratio_sweep(
                sub.clone(),
                |i| Some(nu_q(q, i.lam()).unwrap()),
                |i| (int(2) + rat(1, q as i64)).max(lambda_profile(i.lam()).rho.unwrap()),
            );
            ok &= bad == 0;
            parts.push(format!("q={q}: {n} instances, {bad} violations, worst {worst}"));
        }
        (ok, parts.join("; "))
    });
    push(&mut out, "4", "NU_q bound", (p, d, e));

    let (p, d, e) = timed(|| {
        let sub: Vec<&Inst> = corpus.iter().filter(|i| i.bundle.n <= 9 && !i.lam().is_uniform()).collect();
        let (n, bad, worst) = ratio_sweep(
            sub,
            |i| Some(MechanismSpec::Io.algorithm(i.lam(), DEFAULT_NODE_CAP).unwrap()),
            |i| lambda_profile(i.lam()).rho.unwrap(),
        );
        (bad == 0 && n > 0, format!("{n} instances, {bad} violations, worst {worst}"))
    });
    push(&mut out, "5", "IO bound", (p, d, e));

    out.push(criterion_6(&corpus));
    push(&mut out, "7", "INPA suite", criterion_7(&corpus));

    let (all_ok, claimed_ok, d, e) = criterion_8();
    out.push(Outcome {
        id: "8",
        title: "comb forcing",
        pass: all_ok,
        known: (!all_ok && claimed_ok)
            .then_some("ls:q is not truthful under non-uniform lambda, so the forcing argument does not bind it"),
        detail: d,
        elapsed: e,
    });

    push(&mut out, "9", "bipartite property", criterion_9());
    push(&mut out, "10", "rho sanity", criterion_10());
    push(&mut out, "11", "realizability", criterion_11(&corpus));
    push(&mut out, "12", "determinism", criterion_12());

    let mut unexpected = 0;
    for o in &out {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2} {}: {} ({:.2?})", o.id, o.title, o.detail, o.elapsed);
        if !o.pass {
            match o.known {
                Some(why) => println!("       known-unattainable: {why}"),
                None => unexpected += 1,
            }
        }
    }
    let passed = out.iter().filter(|o| o.pass).count();
    println!(
        "acceptance: {passed} passed, {} failed ({unexpected} unexpected) in {:.2?}",
        out.len() - passed,
        t0.elapsed()
    );
    if unexpected > 0 {
        std::process::exit(1);
    }
}
