//! Random rule sets and token sequences for the engine properties.

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::sample::select;

use super::tok;
use verbchunk::engine::{parse_rule, parse_rules_str, RuleSet};
use verbchunk::morph::Token;

pub const VALUES: [&str; 3] = ["a", "b", "c"];
pub const VARS: [&str; 3] = ["A", "B", "C"];

pub fn values() -> impl Strategy<Value = Vec<&'static str>> {
    proptest::sample::subsequence(VALUES.to_vec(), 0..=2)
}

pub fn tokens(max: usize) -> impl Strategy<Value = Vec<Token>> {
    prop::collection::vec((select(vec!["p", "q", "r", "s"]), values()), 1..=max)
        .prop_map(|v| v.into_iter().map(|(s, vals)| tok(s, &vals)).collect())
}

#[derive(Debug, Clone)]
pub enum Rhs {
    /// All variables regrouped into consecutive chunks, split at the given
    /// boundaries.
    Regroup(Vec<bool>, Vec<&'static str>),
    /// Variables copied one-to-one in reverse order.
    Reverse(&'static str),
    Literal(&'static str),
}

/// One random fixed-length rule, as text.
pub fn rule_line(kleene: bool) -> impl Strategy<Value = String> {
    (
        prop::collection::vec(proptest::sample::subsequence(VALUES.to_vec(), 1..=2), 1..=3),
        prop_oneof![
            (
                prop::collection::vec(any::<bool>(), 2),
                prop::collection::vec(select(vec!["a", "b", "c", "x"]), 3)
            )
                .prop_map(|(s, v)| Rhs::Regroup(s, v)),
            select(vec!["a", "x"]).prop_map(Rhs::Reverse),
            select(vec!["b", "x"]).prop_map(Rhs::Literal),
        ],
        any::<bool>(),
    )
        .prop_map(move |(lhs, rhs, plus)| {
            let n = lhs.len();
            let mut line = String::new();
            for (i, req) in lhs.iter().enumerate() {
                let star = if kleene && plus && i == 0 { "+" } else { "" };
                line.push_str(&format!("{}[{}]{} ", VARS[i], req.join(","), star));
            }
            line.push_str("->");
            match rhs {
                Rhs::Regroup(splits, vals) => {
                    let mut group = vec![VARS[0]];
                    let mut g = 0;
                    for i in 1..n {
                        if splits[i - 1] {
                            line.push_str(&format!(" {}[{}]", group.join("+"), vals[g]));
                            group.clear();
                            g += 1;
                        }
                        group.push(VARS[i]);
                    }
                    line.push_str(&format!(" {}[{}]", group.join("+"), vals[g]));
                }
                Rhs::Reverse(v) => {
                    for i in (0..n).rev() {
                        line.push_str(&format!(" {}[{v}]", VARS[i]));
                    }
                }
                Rhs::Literal(v) => line.push_str(&format!(" \"lit\"[{v}]")),
            }
            line
        })
}

/// Up to four rules spread over two phases; self-looping rules are dropped.
pub fn ruleset(kleene: bool, max: usize) -> impl Strategy<Value = RuleSet> {
    prop::collection::vec((rule_line(kleene), 1u32..=2), 1..=max).prop_map(|lines| {
        let mut src = String::new();
        for (i, (line, phase)) in lines.iter().enumerate() {
            if parse_rule(line).is_ok() {
                src.push_str(&format!("@phase {phase}\nr{i}: {line}\n"));
            }
        }
        parse_rules_str(&src).unwrap()
    })
}

pub fn conservative_ruleset() -> impl Strategy<Value = RuleSet> {
    ruleset(true, 4).prop_map(|rs| {
        let keep: Vec<_> = rs
            .rules()
            .iter()
            .filter(|r| r.is_conservative())
            .cloned()
            .collect();
        RuleSet::new(keep).unwrap()
    })
}

pub fn words(tokens: &[Token]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for t in tokens {
        for w in t.surface.split_whitespace() {
            *m.entry(w.to_owned()).or_default() += 1;
        }
    }
    m
}
