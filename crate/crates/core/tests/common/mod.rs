//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

pub mod strategies;

use std::collections::BTreeSet;

use verbchunk::engine::{RuleSet, TextSpec};
use verbchunk::eval::GoldChunk;
use verbchunk::grammar::ChunkAnnotation;
use verbchunk::lexicon::FeatureValue;
use verbchunk::morph::Token;

pub fn tok(surface: &str, values: &[&str]) -> Token {
    let fvl = values
        .iter()
        .map(|v| FeatureValue::new("F", *v).unwrap())
        .collect();
    Token::new(surface, surface, fvl, (0, 1))
}

/// What the oracle compares: surface and the set of values of each token.
pub fn shape(tokens: &[Token]) -> Vec<(String, BTreeSet<String>)> {
    tokens
        .iter()
        .map(|t| {
            (
                t.surface.clone(),
                t.fvl.iter().map(|p| p.value.clone()).collect(),
            )
        })
        .collect()
}

/// One left-to-right pass, written directly from the rewriting rules:
/// at each position try every rule in (phase, file order); the first whose
/// fixed-length pattern fits replaces the matched tokens and scanning
/// resumes after them. Only handles rules without `+` and surfaces made of
/// plain words, which are joined with single spaces.
pub fn oracle_pass(rules: &RuleSet, tokens: &[Token]) -> (Vec<(String, BTreeSet<String>)>, bool) {
    let mut ordered: Vec<_> = rules.rules().iter().enumerate().collect();
    ordered.sort_by_key(|(i, r)| (r.phase, *i));

    let values =
        |t: &Token| -> BTreeSet<String> { t.fvl.iter().map(|p| p.value.clone()).collect() };
    let mut out = Vec::new();
    let mut fired = false;
    let mut pos = 0;
    'scan: while pos < tokens.len() {
        for (_, rule) in &ordered {
            assert!(rule.lhs.iter().all(|e| !e.kleene));
            let n = rule.lhs.len();
            if pos + n > tokens.len() {
                continue;
            }
            let window = &tokens[pos..pos + n];
            let fits = rule
                .lhs
                .iter()
                .zip(window)
                .all(|(el, t)| el.required.iter().all(|v| values(t).contains(v)));
            if !fits {
                continue;
            }
            for tpl in &rule.rhs {
                let surface = match &tpl.surface {
                    TextSpec::Literal(s) => s.clone(),
                    TextSpec::Concat(vars) => vars
                        .iter()
                        .map(|v| {
                            let k = rule.lhs.iter().position(|el| &el.var == v).unwrap();
                            window[k].surface.clone()
                        })
                        .collect::<Vec<_>>()
                        .join(" "),
                };
                let vals = tpl.fvl.iter().map(|p| p.value.clone()).collect();
                out.push((surface, vals));
            }
            fired = true;
            pos += n;
            continue 'scan;
        }
        out.push((tokens[pos].surface.clone(), values(&tokens[pos])));
        pos += 1;
    }
    (out, fired)
}

/// Error clusters by transitive closure of the overlap relation, as sorted
/// lists of (is_gold, index) members.
pub fn oracle_clusters(
    gold: &[GoldChunk],
    sys: &[ChunkAnnotation],
) -> BTreeSet<Vec<(bool, usize)>> {
    let nodes: Vec<(bool, usize, usize, (usize, usize))> = gold
        .iter()
        .enumerate()
        .map(|(i, g)| (true, i, g.sentence_index, g.token_span))
        .chain(
            sys.iter()
                .enumerate()
                .map(|(i, s)| (false, i, s.sentence_index, s.token_span)),
        )
        .collect();
    let n = nodes.len();
    let mut reach = vec![vec![false; n]; n];
    for a in 0..n {
        reach[a][a] = true;
        for b in 0..n {
            let (ga, _, sa, pa) = nodes[a];
            let (gb, _, sb, pb) = nodes[b];
            if ga != gb && sa == sb && pa.0 < pb.1 && pb.0 < pa.1 {
                reach[a][b] = true;
            }
        }
    }
    for k in 0..n {
        for a in 0..n {
            for b in 0..n {
                if reach[a][k] && reach[k][b] {
                    reach[a][b] = true;
                }
            }
        }
    }
    (0..n)
        .map(|a| {
            let mut members: Vec<_> = (0..n)
                .filter(|&b| reach[a][b])
                .map(|b| (nodes[b].0, nodes[b].1))
                .collect();
            members.sort();
            members
        })
        .collect()
}

pub fn data(name: &str) -> String {
    let path = format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn data_path(name: &str) -> String {
    format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// Reference/system file pair with the given corpus-level counts: `correct`
/// matching chunks, `possible - correct` reference chunks that the system
/// brackets with a shifted span, and the remaining system chunks alone.
pub fn count_fixture(possible: usize, actual: usize, correct: usize) -> (String, String) {
    assert!(correct <= possible && correct <= actual);
    let missed = possible - correct;
    let wrong = actual - correct;
    let shifted = missed.min(wrong);
    let mut gold = String::new();
    let mut sys = String::new();
    for _ in 0..correct {
        gold.push_str("Il [parle|fin] .\n");
        sys.push_str("Il [parle|vnfl-I] .\n");
    }
    for _ in 0..shifted {
        gold.push_str("Il [a mangé|fin] .\n");
        sys.push_str("Il [a|vnfl-I] mangé .\n");
    }
    for _ in shifted..missed {
        gold.push_str("Il [dort|fin] .\n");
        sys.push_str("Il dort .\n");
    }
    for _ in shifted..wrong {
        gold.push_str("Le juge note .\n");
        sys.push_str("Le juge [note|vnfl-II] .\n");
    }
    (gold, sys)
}
