//! Generator specs: `family:key=value,...`.
//!
//! A comma-separated token without `=` continues the previous value, so `lambda=1,9/10` is one
//! value. Integer values may be inclusive ranges `a..b`; a spec with ranges expands to the
//! cartesian product in key order.

use bx_core::instances::{
    gen_comb, gen_double_comb, gen_g_bad, gen_gadget_gn, gen_gadget_h, gen_random, gen_triangle_gadget,
};
use bx_core::rational::{int, parse_rational, rat};
use bx_core::{BxError, InstanceBundle, LengthFunction, Result};
use std::collections::BTreeMap;

const FAMILIES: &[(&str, &[&str])] = &[
    ("comb", &["h", "v", "k", "lambda"]),
    ("dcomb", &["h", "v", "k", "lambda"]),
    ("gbad", &["q"]),
    ("h", &["k", "lambda"]),
    ("gn", &["k", "N", "lambda"]),
    ("triangle", &[]),
    ("rand", &["n", "p", "seed", "k", "lambda"]),
];

/// A parsed spec before range expansion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSpec {
    pub family: String,
    pub params: Vec<(String, String)>,
}

/// One expanded instance together with the scalar parameters that produced it.
#[derive(Debug, Clone)]
pub struct Generated {
    pub params: BTreeMap<String, String>,
    pub bundle: InstanceBundle,
}

impl GenSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = |m: String| BxError::Parse(format!("generator {s:?}: {m}"));
        let (family, rest) = match s.split_once(':') {
            Some((f, r)) => (f.trim(), r),
            None => (s.trim(), ""),
        };
        let allowed = FAMILIES
            .iter()
            .find(|(f, _)| *f == family)
            .map(|(_, keys)| *keys)
            .ok_or_else(|| bad(format!("unknown family {family:?}")))?;
        let mut params: Vec<(String, String)> = Vec::new();
        for tok in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match tok.split_once('=') {
                Some((k, v)) => {
                    let k = k.trim();
                    if !allowed.contains(&k) {
                        return Err(bad(format!("unknown key {k:?}")));
                    }
                    if params.iter().any(|(p, _)| p == k) {
                        return Err(bad(format!("duplicate key {k:?}")));
                    }
                    params.push((k.to_string(), v.trim().to_string()));
                }
                None => match params.last_mut() {
                    Some((_, v)) => {
                        v.push(',');
                        v.push_str(tok);
                    }
                    None => return Err(bad(format!("value {tok:?} has no key"))),
                },
            }
        }
        Ok(Self { family: family.to_string(), params })
    }

    /// Every scalar assignment, ranges expanded, in lexicographic order of range positions.
    pub fn assignments(&self) -> Result<Vec<BTreeMap<String, String>>> {
        let mut out = vec![BTreeMap::new()];
        for (k, v) in &self.params {
            let values = expand(v)?;
            out = out
                .into_iter()
                .flat_map(|m| {
                    values.iter().map(move |x| {
                        let mut m = m.clone();
                        m.insert(k.clone(), x.clone());
                        m
                    })
                })
                .collect();
        }
        Ok(out)
    }

    pub fn generate(&self) -> Result<Vec<Generated>> {
        self.assignments()?
            .into_iter()
            .map(|params| {
                let bundle = build(&self.family, &params)?;
                Ok(Generated { params, bundle })
            })
            .collect()
    }
}

fn expand(v: &str) -> Result<Vec<String>> {
    let Some((a, b)) = v.split_once("..") else {
        return Ok(vec![v.to_string()]);
    };
    let parse = |x: &str| x.trim().parse::<u64>().map_err(|_| BxError::Parse(format!("bad range {v:?}")));
    let (a, b) = (parse(a)?, parse(b)?);
    if a > b {
        return Err(BxError::Parse(format!("empty range {v:?}")));
    }
    Ok((a..=b).map(|x| x.to_string()).collect())
}

fn get_usize(p: &BTreeMap<String, String>, key: &str) -> Result<Option<usize>> {
    p.get(key)
        .map(|v| v.parse::<usize>().map_err(|_| BxError::Parse(format!("{key}={v:?} is not a non-negative integer"))))
        .transpose()
}

fn need_usize(p: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    get_usize(p, key)?.ok_or_else(|| BxError::Params(format!("missing {key}=")))
}

/// `lambda=` values for lengths `2..=k`; `k` may be given, inferred, or defaulted.
pub fn parse_lambda(text: &str, k: Option<usize>) -> Result<LengthFunction> {
    let values = text.split(',').map(parse_rational).collect::<Result<Vec<_>>>()?;
    let k_inferred = values.len() + 1;
    if let Some(k) = k {
        if k != k_inferred {
            return Err(BxError::Params(format!("k={k} but lambda has {} values", values.len())));
        }
    }
    LengthFunction::new(k_inferred, values)
}

fn lambda_or(
    p: &BTreeMap<String, String>,
    default: impl FnOnce(usize) -> Result<LengthFunction>,
    k_default: usize,
) -> Result<LengthFunction> {
    let k = get_usize(p, "k")?;
    match p.get("lambda") {
        Some(text) => parse_lambda(text, k),
        None => default(k.unwrap_or(k_default)),
    }
}

// comb families default to λ(ℓ) = 1 − (ℓ − 2)/10, so λ(v) < λ(h) whenever h < v
fn decreasing(k: usize) -> Result<LengthFunction> {
    LengthFunction::new(k, (2..=k as i64).map(|l| int(1) - rat(l - 2, 10)).collect())
}

fn build(family: &str, p: &BTreeMap<String, String>) -> Result<InstanceBundle> {
    match family {
        "comb" | "dcomb" => {
            let h = need_usize(p, "h")?;
            let v = need_usize(p, "v")?;
            let lam = lambda_or(p, decreasing, v)?;
            if family == "comb" {
                gen_comb(h, v, &lam)
            } else {
                gen_double_comb(h, v, &lam)
            }
        }
        "gbad" => gen_g_bad(need_usize(p, "q")?),
        "h" => {
            let lam = lambda_or(p, LengthFunction::uniform, 3)?;
            gen_gadget_h(lam.k(), &lam)
        }
        "gn" => {
            let lam = lambda_or(p, LengthFunction::uniform, 3)?;
            gen_gadget_gn(lam.k(), need_usize(p, "N")?, &lam)
        }
        "triangle" => gen_triangle_gadget(),
        "rand" => {
            let n = need_usize(p, "n")?;
            let prob = parse_rational(p.get("p").map_or("1/2", String::as_str))?;
            let seed =
                p.get("seed").map_or(Ok(0), |s| s.parse::<u64>().map_err(|_| BxError::Parse(format!("seed={s:?}"))))?;
            let lam = lambda_or(p, LengthFunction::uniform, 3)?;
            gen_random(n, prob, seed, &lam)
        }
        _ => Err(BxError::Parse(format!("unknown family {family:?}"))),
    }
}

/// Substitutes `*` values in a mechanism template with the instance parameter of the same key,
/// as in `ls:q=*`.
pub fn bind_mechanism(template: &str, params: &BTreeMap<String, String>) -> Result<String> {
    if !template.contains('*') {
        return Ok(template.to_string());
    }
    let mut out = String::new();
    let mut rest = template;
    while let Some(pos) = rest.find("=*") {
        let head = &rest[..pos];
        let key_start = head.rfind([':', ',']).map_or(0, |i| i + 1);
        let key = &head[key_start..];
        let value = params.get(key).ok_or_else(|| {
            BxError::Params(format!("mechanism {template:?} binds {key:?}, which the generator does not set"))
        })?;
        out.push_str(head);
        out.push('=');
        out.push_str(value);
        rest = &rest[pos + 2..];
    }
    out.push_str(rest);
    if out.contains('*') {
        return Err(BxError::Parse(format!("mechanism {template:?}: stray '*'")));
    }
    Ok(out)
}
