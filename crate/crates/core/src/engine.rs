//! Recomposition rules and their cyclic application.
//!
//! A rule rewrites a token sequence matching its left-hand side into the
//! tokens built by its right-hand side:
//!
//! ```text
//! @phase 2
//! cl_cl_v: X[cl] Y[cl] Z[v] -> X+Y+Z[vnfl]
//! incid:   X[vnfl,aux] C[virg] A[auf]+ D[virg] P[pp] -> X+C+A+D+P[vnfl]
//! ```
//!
//! A left-hand element `Var[v1,v2]` matches a token whose feature/value
//! list contains every listed value, under any feature name. A trailing `+`
//! makes the element match one or more tokens, greedily with backtracking.
//! Right-hand elements copy (`X[..]`) or concatenate (`X+Y[..]`) surfaces
//! and lemmas of bound tokens, or give a literal (`"txt"[..]`); their
//! feature/value lists are always literal. A bare value `v` is stored as the
//! pair `CAT=v`; `FEAT=v` sets the feature explicitly.
//!
//! At each position rules are tried by ascending phase, then file order.
//! A pass scans left to right and resumes after inserted material; passes
//! repeat until none fires.

use std::collections::HashSet;
use std::fmt;
use std::io::Read;

use thiserror::Error;

use crate::lexicon::{check_identifier, FeatureValue};
use crate::morph::{join_surfaces, Provenance, Token};

/// Feature name given to bare right-hand values.
pub const DEFAULT_FEATURE: &str = "CAT";

pub const DEFAULT_MAX_CYCLES: usize = 100;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("rule {rule:?}: variable {var:?} is not bound on the left-hand side")]
    UnboundVariable { rule: String, var: String },
    #[error("rule {rule:?}: variable {var:?} bound twice")]
    DuplicateVariable { rule: String, var: String },
    #[error("duplicate rule name {0:?}")]
    DuplicateName(String),
    #[error("rule {0:?}: empty left- or right-hand side")]
    Empty(String),
    #[error("rule {0:?} regenerates its own left-hand side")]
    SelfLoop(String),
    #[error("rule {rule:?}: bad value {value:?}")]
    BadValue { rule: String, value: String },
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<RuleError>,
    },
    #[error("cannot read rules: {0}")]
    Io(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("rule set did not reach a fixpoint within {max_cycles} cycles (last rule fired: {last_rule})")]
    CycleBudget {
        max_cycles: usize,
        last_rule: String,
    },
    #[error("max_cycles must be at least 1")]
    ZeroBudget,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternElement {
    pub var: String,
    /// Values the token must carry; empty means any token.
    pub required: Vec<String>,
    pub kleene: bool,
}

impl PatternElement {
    pub fn new(var: &str, required: &[&str], kleene: bool) -> Self {
        Self {
            var: var.to_owned(),
            required: required.iter().map(|s| (*s).to_owned()).collect(),
            kleene,
        }
    }

    pub fn matches(&self, token: &Token) -> bool {
        self.required.iter().all(|v| token.has_value(v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TextSpec {
    Literal(String),
    /// Concatenation of bound tokens, in the listed variable order.
    Concat(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputTemplate {
    pub surface: TextSpec,
    pub lemma: TextSpec,
    pub fvl: Vec<FeatureValue>,
}

impl OutputTemplate {
    /// `X+Y[values]`: concatenates both surface and lemma.
    pub fn concat(vars: &[&str], values: &[&str]) -> Self {
        let spec = TextSpec::Concat(vars.iter().map(|s| (*s).to_owned()).collect());
        Self {
            surface: spec.clone(),
            lemma: spec,
            fvl: values
                .iter()
                .map(|v| FeatureValue::raw(DEFAULT_FEATURE, v))
                .collect(),
        }
    }

    pub fn literal(text: &str, values: &[&str]) -> Self {
        let spec = TextSpec::Literal(text.to_owned());
        Self {
            surface: spec.clone(),
            lemma: spec,
            fvl: values
                .iter()
                .map(|v| FeatureValue::raw(DEFAULT_FEATURE, v))
                .collect(),
        }
    }

    fn vars(&self) -> impl Iterator<Item = &String> {
        [&self.surface, &self.lemma]
            .into_iter()
            .flat_map(|spec| match spec {
                TextSpec::Literal(_) => [].iter(),
                TextSpec::Concat(vars) => vars.iter(),
            })
    }

    fn copies_only(&self, var: &str) -> bool {
        let single = |s: &TextSpec| matches!(s, TextSpec::Concat(v) if v.len() == 1 && v[0] == var);
        single(&self.surface) && single(&self.lemma)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub lhs: Vec<PatternElement>,
    pub rhs: Vec<OutputTemplate>,
    pub phase: u32,
}

impl Rule {
    pub fn new(
        name: &str,
        lhs: Vec<PatternElement>,
        rhs: Vec<OutputTemplate>,
        phase: u32,
    ) -> Result<Self, RuleError> {
        let rule = Self {
            name: name.to_owned(),
            lhs,
            rhs,
            phase,
        };
        rule.check()?;
        Ok(rule)
    }

    fn check(&self) -> Result<(), RuleError> {
        if self.lhs.is_empty() || self.rhs.is_empty() {
            return Err(RuleError::Empty(self.name.clone()));
        }
        let mut bound = HashSet::new();
        for el in &self.lhs {
            if !bound.insert(el.var.as_str()) {
                return Err(RuleError::DuplicateVariable {
                    rule: self.name.clone(),
                    var: el.var.clone(),
                });
            }
            for v in &el.required {
                if check_identifier(v).is_err() {
                    return Err(RuleError::BadValue {
                        rule: self.name.clone(),
                        value: v.clone(),
                    });
                }
            }
        }
        for t in &self.rhs {
            if let Some(var) = t.vars().find(|v| !bound.contains(v.as_str())) {
                return Err(RuleError::UnboundVariable {
                    rule: self.name.clone(),
                    var: var.clone(),
                });
            }
            for p in &t.fvl {
                if check_identifier(&p.feature).is_err() || check_identifier(&p.value).is_err() {
                    return Err(RuleError::BadValue {
                        rule: self.name.clone(),
                        value: p.to_string(),
                    });
                }
            }
        }
        if self.is_self_loop() {
            return Err(RuleError::SelfLoop(self.name.clone()));
        }
        Ok(())
    }

    /// Each output copies the matching input unchanged and still satisfies
    /// its pattern, so the rule would fire forever.
    fn is_self_loop(&self) -> bool {
        self.lhs.len() == self.rhs.len()
            && self.lhs.iter().zip(&self.rhs).all(|(el, t)| {
                t.copies_only(&el.var)
                    && el
                        .required
                        .iter()
                        .all(|v| t.fvl.iter().any(|p| &p.value == v))
            })
    }

    /// Same patterns and templates, ignoring name and phase.
    pub fn same_shape(&self, other: &Rule) -> bool {
        self.lhs == other.lhs && self.rhs == other.rhs
    }

    /// Each left-hand variable appears exactly once, in order, across the
    /// right-hand surfaces and no literal is used: the rule only regroups
    /// tokens.
    pub fn is_conservative(&self) -> bool {
        let mut used = Vec::new();
        for t in &self.rhs {
            match &t.surface {
                TextSpec::Literal(_) => return false,
                TextSpec::Concat(vars) => used.extend(vars.iter().map(String::as_str)),
            }
        }
        used.len() == self.lhs.len() && used.iter().zip(&self.lhs).all(|(u, el)| *u == el.var)
    }
}

fn fmt_values(values: impl Iterator<Item = String>) -> String {
    values.collect::<Vec<_>>().join(",")
}

fn fmt_spec(spec: &TextSpec) -> String {
    match spec {
        TextSpec::Literal(s) => format!("{s:?}"),
        TextSpec::Concat(vars) => vars.join("+"),
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.name)?;
        for el in &self.lhs {
            write!(
                f,
                " {}[{}]{}",
                el.var,
                fmt_values(el.required.iter().cloned()),
                if el.kleene { "+" } else { "" }
            )?;
        }
        write!(f, " ->")?;
        for t in &self.rhs {
            let values = t.fvl.iter().map(|p| {
                if p.feature == DEFAULT_FEATURE {
                    p.value.clone()
                } else {
                    p.to_string()
                }
            });
            write!(f, " {}[{}]", fmt_spec(&t.surface), fmt_values(values))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<Rule>,
    /// Indices into `rules` by ascending phase, file order within a phase.
    order: Vec<usize>,
}

impl RuleSet {
    pub fn new(rules: Vec<Rule>) -> Result<Self, RuleError> {
        let mut seen = HashSet::new();
        for r in &rules {
            if !seen.insert(r.name.as_str()) {
                return Err(RuleError::DuplicateName(r.name.clone()));
            }
        }
        let mut order: Vec<usize> = (0..rules.len()).collect();
        order.sort_by_key(|&i| rules[i].phase);
        Ok(Self { rules, order })
    }

    /// Rules in file order.
    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Rules in matching priority order.
    pub fn by_priority(&self) -> impl Iterator<Item = &Rule> {
        self.order.iter().map(|&i| &self.rules[i])
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn phases(&self) -> Vec<u32> {
        let mut p: Vec<u32> = self.rules.iter().map(|r| r.phase).collect();
        p.sort_unstable();
        p.dedup();
        p
    }

    /// The rules whose phase satisfies `keep`, in file order.
    pub fn filter_phases(&self, keep: impl Fn(u32) -> bool) -> RuleSet {
        let rules = self
            .rules
            .iter()
            .filter(|r| keep(r.phase))
            .cloned()
            .collect();
        RuleSet::new(rules).expect("subset of a valid rule set")
    }
}

// ---------------------------------------------------------------------------
// Parsing

/// Reads a rule file.
pub fn parse_rules(mut source: impl Read) -> Result<RuleSet, RuleError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| RuleError::Io(e.to_string()))?;
    parse_rules_str(&text)
}

pub fn parse_rules_str(source: &str) -> Result<RuleSet, RuleError> {
    let mut rules = Vec::new();
    let mut phase = 0u32;
    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("@phase") {
            phase = rest.trim().parse().map_err(|_| RuleError::Syntax {
                line: line_no,
                message: format!("bad phase header {line:?}"),
            })?;
            continue;
        }
        let rule = parse_rule_line(line, line_no, phase).map_err(|e| match e {
            RuleError::Syntax { .. } => e,
            other => RuleError::AtLine {
                line: line_no,
                source: Box::new(other),
            },
        })?;
        rules.push(rule);
    }
    RuleSet::new(rules)
}

/// Parses a single rule such as `X[det] Y[ov] -> X[det] Y[not-v]`.
pub fn parse_rule(text: &str) -> Result<Rule, RuleError> {
    parse_rule_line(text.trim(), 1, 0)
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_rule_line(line: &str, line_no: usize, phase: u32) -> Result<Rule, RuleError> {
    let syntax = |message: String| RuleError::Syntax {
        line: line_no,
        message,
    };
    let (left, right) = line
        .split_once("-->")
        .or_else(|| line.split_once("->"))
        .ok_or_else(|| syntax("missing '->'".to_owned()))?;

    let (name, lhs_text) = match (left.find(':'), left.find('[')) {
        (Some(colon), Some(bracket)) if colon < bracket => {
            (left[..colon].trim().to_owned(), &left[colon + 1..])
        }
        _ => (format!("rule@{line_no}"), left),
    };
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return Err(syntax(format!("bad rule name {name:?}")));
    }

    let lhs = split_elements(lhs_text)
        .map_err(syntax)?
        .into_iter()
        .map(|(head, values, plus)| {
            if !is_var(&head) {
                return Err(syntax(format!("expected a variable, found {head:?}")));
            }
            if values.iter().any(|v| v.contains('=')) {
                return Err(syntax("left-hand values take no feature name".to_owned()));
            }
            Ok(PatternElement {
                var: head,
                required: values,
                kleene: plus,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let rhs = split_elements(right)
        .map_err(syntax)?
        .into_iter()
        .map(|(head, values, plus)| {
            if plus {
                return Err(syntax("'+' repetition only allowed on the left".to_owned()));
            }
            let spec = if let Some(lit) = head.strip_prefix('"') {
                let lit = lit
                    .strip_suffix('"')
                    .ok_or_else(|| syntax(format!("unterminated literal {head:?}")))?;
                TextSpec::Literal(lit.to_owned())
            } else {
                let vars: Vec<String> = head.split('+').map(str::to_owned).collect();
                if let Some(bad) = vars.iter().find(|v| !is_var(v)) {
                    return Err(syntax(format!("expected a variable, found {bad:?}")));
                }
                TextSpec::Concat(vars)
            };
            let fvl = values
                .iter()
                .map(|v| match v.split_once('=') {
                    Some((f, val)) => FeatureValue::new(f, val),
                    None => FeatureValue::new(DEFAULT_FEATURE, v.as_str()),
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(syntax)?;
            Ok(OutputTemplate {
                surface: spec.clone(),
                lemma: spec,
                fvl,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    Rule::new(&name, lhs, rhs, phase)
}

fn is_var(s: &str) -> bool {
    let mut chars = s.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Splits a side into `(head, values, plus)` triples: `head[values]+`.
fn split_elements(text: &str) -> Result<Vec<(String, Vec<String>, bool)>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    loop {
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        if i >= chars.len() {
            break;
        }
        let mut head = String::new();
        let mut in_quote = false;
        while i < chars.len() && (in_quote || chars[i] != '[') {
            if chars[i] == '"' {
                in_quote = !in_quote;
            } else if !in_quote && chars[i].is_whitespace() {
                return Err(format!("expected '[' after {head:?}"));
            }
            head.push(chars[i]);
            i += 1;
        }
        if i >= chars.len() {
            return Err(format!("expected '[' after {head:?}"));
        }
        i += 1;
        let close = chars[i..]
            .iter()
            .position(|&c| c == ']')
            .ok_or_else(|| format!("unclosed '[' after {head:?}"))?;
        let inner: String = chars[i..i + close].iter().collect();
        i += close + 1;
        let plus = chars.get(i) == Some(&'+');
        if plus {
            i += 1;
        }
        if i < chars.len() && !chars[i].is_whitespace() {
            return Err(format!("unexpected {:?} after element {head:?}", chars[i]));
        }
        let values: Vec<String> = inner
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(str::to_owned)
            .collect();
        if head.is_empty() {
            return Err("element without a head".to_owned());
        }
        out.push((head, values, plus));
    }
    if out.is_empty() {
        return Err("empty rule side".to_owned());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Matching and rewriting

/// A successful match of one rule at one position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Match {
    /// Index of the rule in file order.
    pub rule: usize,
    pub start: usize,
    pub len: usize,
    /// Token range bound by each left-hand element, absolute indices.
    pub bindings: Vec<(usize, usize)>,
}

/// Matches a single rule's left-hand side starting exactly at `pos`.
pub fn match_rule(rule: &Rule, tokens: &[Token], pos: usize) -> Option<Vec<(usize, usize)>> {
    // Cheap rejection before allocating: every element matches at least one token.
    if !tokens.get(pos).is_some_and(|t| rule.lhs[0].matches(t)) {
        return None;
    }
    let mut bindings = Vec::with_capacity(rule.lhs.len());
    match_from(&rule.lhs, tokens, pos, &mut bindings).then_some(bindings)
}

fn match_from(
    elems: &[PatternElement],
    tokens: &[Token],
    pos: usize,
    bindings: &mut Vec<(usize, usize)>,
) -> bool {
    let Some((el, rest)) = elems.split_first() else {
        return true;
    };
    if el.kleene {
        let run = tokens[pos.min(tokens.len())..]
            .iter()
            .take_while(|t| el.matches(t))
            .count();
        for len in (1..=run).rev() {
            bindings.push((pos, pos + len));
            if match_from(rest, tokens, pos + len, bindings) {
                return true;
            }
            bindings.pop();
        }
        false
    } else {
        match tokens.get(pos) {
            Some(t) if el.matches(t) => {
                bindings.push((pos, pos + 1));
                if match_from(rest, tokens, pos + 1, bindings) {
                    return true;
                }
                bindings.pop();
                false
            }
            _ => false,
        }
    }
}

/// First rule, by priority, whose left-hand side matches at `pos`.
///
/// # Panics
/// When `pos` is not a valid index into `tokens`.
pub fn match_at(rules: &RuleSet, tokens: &[Token], pos: usize) -> Option<Match> {
    assert!(pos < tokens.len(), "position {pos} out of range");
    rules.order.iter().find_map(|&ri| {
        match_rule(&rules.rules[ri], tokens, pos).map(|bindings| Match {
            rule: ri,
            start: pos,
            len: bindings.last().map_or(0, |b| b.1) - pos,
            bindings,
        })
    })
}

fn gather<'t>(rule: &Rule, m: &Match, tokens: &'t [Token], vars: &[String]) -> Vec<&'t Token> {
    vars.iter()
        .flat_map(|v| {
            let k = rule
                .lhs
                .iter()
                .position(|el| &el.var == v)
                .expect("variables checked at rule construction");
            let (s, e) = m.bindings[k];
            tokens[s..e].iter()
        })
        .collect()
}

fn build_text(spec: &TextSpec, parts: &[&Token], pick: fn(&Token) -> &str) -> String {
    match spec {
        TextSpec::Literal(s) => s.clone(),
        TextSpec::Concat(_) => parts
            .iter()
            .fold(String::new(), |acc, t| join_surfaces(&acc, pick(t))),
    }
}

fn union_span<'a>(tokens: impl IntoIterator<Item = &'a Token>) -> (usize, usize) {
    tokens
        .into_iter()
        .map(|t| t.span)
        .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
        .unwrap_or((0, 0))
}

/// Builds the right-hand tokens for a match.
pub fn instantiate(rule: &Rule, m: &Match, tokens: &[Token]) -> Vec<Token> {
    let matched = &tokens[m.start..m.start + m.len];
    rule.rhs
        .iter()
        .map(|t| {
            let surface_parts = match &t.surface {
                TextSpec::Concat(vars) => gather(rule, m, tokens, vars),
                TextSpec::Literal(_) => Vec::new(),
            };
            let lemma_parts = match &t.lemma {
                TextSpec::Concat(vars) => gather(rule, m, tokens, vars),
                TextSpec::Literal(_) => Vec::new(),
            };
            let span = if surface_parts.is_empty() {
                union_span(matched)
            } else {
                union_span(surface_parts.iter().copied())
            };
            Token {
                surface: build_text(&t.surface, &surface_parts, |t| &t.surface),
                lemma: build_text(&t.lemma, &lemma_parts, |t| &t.lemma),
                fvl: t.fvl.clone(),
                span,
                provenance: Provenance::Recomposed,
            }
        })
        .collect()
}

/// One rule application observed during a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Firing<'r> {
    /// 1-based pass number.
    pub cycle: usize,
    pub rule: &'r Rule,
    /// Token range rewritten, in the pass's input sequence.
    pub start: usize,
    pub end: usize,
}

fn pass<'r>(
    rules: &'r RuleSet,
    tokens: &[Token],
    cycle: usize,
    observer: &mut dyn FnMut(&Firing<'r>),
) -> (Vec<Token>, bool) {
    let mut out = Vec::with_capacity(tokens.len());
    let mut fired = false;
    let mut pos = 0;
    while pos < tokens.len() {
        match match_at(rules, tokens, pos) {
            Some(m) => {
                let rule = &rules.rules[m.rule];
                observer(&Firing {
                    cycle,
                    rule,
                    start: m.start,
                    end: m.start + m.len,
                });
                out.extend(instantiate(rule, &m, tokens));
                pos += m.len;
                fired = true;
            }
            None => {
                out.push(tokens[pos].clone());
                pos += 1;
            }
        }
    }
    (out, fired)
}

/// One left-to-right pass; reports whether any rule fired.
pub fn apply_once(rules: &RuleSet, tokens: &[Token]) -> (Vec<Token>, bool) {
    pass(rules, tokens, 1, &mut |_| {})
}

/// Repeats passes until none fires.
pub fn run_to_fixpoint(
    rules: &RuleSet,
    tokens: Vec<Token>,
    max_cycles: usize,
) -> Result<Vec<Token>, EngineError> {
    run_to_fixpoint_with(rules, tokens, max_cycles, &mut |_| {}).map(|(t, _)| t)
}

/// Like [`run_to_fixpoint`], reporting every firing to `observer`. Also
/// returns the number of passes run, including the final quiet one.
pub fn run_to_fixpoint_with<'r>(
    rules: &'r RuleSet,
    mut tokens: Vec<Token>,
    max_cycles: usize,
    observer: &mut dyn FnMut(&Firing<'r>),
) -> Result<(Vec<Token>, usize), EngineError> {
    if max_cycles == 0 {
        return Err(EngineError::ZeroBudget);
    }
    let mut last_rule = String::new();
    for cycle in 1..=max_cycles {
        let (next, fired) = pass(rules, &tokens, cycle, &mut |f| {
            last_rule.clear();
            last_rule.push_str(&f.rule.name);
            observer(f);
        });
        if !fired {
            return Ok((next, cycle));
        }
        tokens = next;
    }
    Err(EngineError::CycleBudget {
        max_cycles,
        last_rule,
    })
}
