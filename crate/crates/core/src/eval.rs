//! Scoring of system chunks against a hand-annotated reference.
//!
//! Both sides use the inline bracketed format, one sentence per non-blank
//! line: `Il [la juge|fin] .` for the reference and `Il [la juge|vnfl-I] .`
//! for system output. Spans count plain word positions of the unbracketed
//! line. A system chunk is correct iff the reference has a chunk with the
//! same sentence, the same span and the same coarse label.
//!
//! Unmatched chunks are grouped into error expressions: connected
//! components of the overlap graph between unmatched reference chunks and
//! unmatched system chunks of the same sentence. `EE` is the number of
//! counted error expressions divided by the number of reference chunks (a
//! ratio, not a percentage) and `SL = (1 - EE) * 100`.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::grammar::{ChunkAnnotation, CoarseLabel, FineLabel};
use crate::morph::{normalize_whitespace, tokenize_plain};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("sentence count mismatch: reference has {gold}, system has {sys}")]
    SentenceMismatch { gold: usize, sys: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GoldChunk {
    pub sentence_index: usize,
    pub token_span: (usize, usize),
    pub coarse_label: CoarseLabel,
}

/// A chunk as written in a bracketed line, before its label is interpreted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BracketedChunk {
    pub token_span: (usize, usize),
    pub label: String,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BracketedSentence {
    /// Line number in the source, 1-based.
    pub line: usize,
    /// The line with brackets and labels removed.
    pub text: String,
    pub chunks: Vec<BracketedChunk>,
}

pub fn overlaps(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// Parses one bracketed sentence per non-blank line.
pub fn parse_bracketed(source: &str) -> Result<Vec<BracketedSentence>, EvalError> {
    source
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_line(i + 1, l))
        .collect()
}

fn parse_line(line: usize, src: &str) -> Result<BracketedSentence, EvalError> {
    let err = |message: String| EvalError::Syntax { line, message };
    let mut text = String::new();
    // (start of content in `text`, label once `|` has been seen)
    let mut open: Option<(usize, Option<String>)> = None;
    let mut raw = Vec::new();
    for (col, c) in src.char_indices() {
        match (c, &mut open) {
            ('[', None) => open = Some((text.len(), None)),
            ('[', Some(_)) => return Err(err(format!("nested bracket at column {}", col + 1))),
            (']', None) => return Err(err(format!("unmatched ']' at column {}", col + 1))),
            (']', Some((start, label))) => {
                let label = label
                    .take()
                    .ok_or_else(|| err(format!("chunk without label at column {}", col + 1)))?;
                raw.push((*start, text.len(), label.trim().to_owned()));
                open = None;
            }
            ('|', Some((_, label @ None))) => *label = Some(String::new()),
            (c, Some((_, Some(label)))) => label.push(c),
            (c, _) => text.push(c),
        }
    }
    if open.is_some() {
        return Err(err("unclosed '['".into()));
    }

    let words = tokenize_plain(&text);
    let mut chunks = Vec::with_capacity(raw.len());
    for (start, end, label) in raw {
        if let Some(w) = words
            .iter()
            .find(|w| w.start < end && start < w.end && (w.start < start || w.end > end))
        {
            return Err(err(format!("chunk boundary splits {:?}", w.text)));
        }
        let first = words.iter().position(|w| w.start >= start && w.end <= end);
        let last = words.iter().rposition(|w| w.start >= start && w.end <= end);
        let (Some(first), Some(last)) = (first, last) else {
            return Err(err(format!("empty chunk labelled {label:?}")));
        };
        chunks.push(BracketedChunk {
            token_span: (first, last + 1),
            label,
            surface: normalize_whitespace(&text[start..end]),
        });
    }
    Ok(BracketedSentence {
        line,
        text: normalize_whitespace(&text),
        chunks,
    })
}

/// Reference chunks carry `fin` or `inf`; fine system labels are accepted
/// too and reduced to their coarse label.
pub fn gold_label(label: &str) -> Option<CoarseLabel> {
    CoarseLabel::ALL
        .into_iter()
        .find(|c| c.tag() == label)
        .or_else(|| label.parse::<FineLabel>().ok().map(FineLabel::coarse))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldCorpus {
    pub sentences: Vec<String>,
    pub chunks: Vec<GoldChunk>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SystemCorpus {
    pub sentences: Vec<String>,
    pub chunks: Vec<ChunkAnnotation>,
}

pub fn parse_gold(source: &str) -> Result<GoldCorpus, EvalError> {
    let mut corpus = GoldCorpus::default();
    for (i, s) in parse_bracketed(source)?.into_iter().enumerate() {
        for c in s.chunks {
            let coarse_label = gold_label(&c.label).ok_or(EvalError::UnknownLabel {
                line: s.line,
                label: c.label,
            })?;
            corpus.chunks.push(GoldChunk {
                sentence_index: i,
                token_span: c.token_span,
                coarse_label,
            });
        }
        corpus.sentences.push(s.text);
    }
    Ok(corpus)
}

pub fn parse_system(source: &str) -> Result<SystemCorpus, EvalError> {
    let mut corpus = SystemCorpus::default();
    for (i, s) in parse_bracketed(source)?.into_iter().enumerate() {
        for c in s.chunks {
            let fine_label = c.label.parse().map_err(|_| EvalError::UnknownLabel {
                line: s.line,
                label: c.label,
            })?;
            corpus.chunks.push(ChunkAnnotation {
                sentence_index: i,
                token_span: c.token_span,
                fine_label,
                surface: c.surface,
            });
        }
        corpus.sentences.push(s.text);
    }
    Ok(corpus)
}

/// Exclusion file: one error expression key (`s3:2..7`) per line; `#`
/// starts a comment.
pub fn parse_exclusions(source: &str) -> Vec<String> {
    source
        .lines()
        .filter_map(|l| l.split('#').next()?.split_whitespace().next())
        .map(str::to_owned)
        .collect()
}

/// A percentage kept in hundredths, rounded half up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent(pub i64);

impl Percent {
    /// `100 * num / den`, or `None` when `den` is zero.
    pub fn ratio(num: i64, den: i64) -> Option<Self> {
        (den > 0).then(|| Percent((20_000 * num + den).div_euclid(2 * den)))
    }

    pub fn hundredths(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let v = self.0.unsigned_abs();
        f.pad(&format!("{sign}{}.{:02}", v / 100, v % 100))
    }
}

fn cell(p: Option<Percent>) -> String {
    p.map_or_else(|| "n/a".to_owned(), |p| p.to_string())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub possible: usize,
    pub actual: usize,
    pub correct: usize,
}

impl Counts {
    pub fn new(possible: usize, actual: usize, correct: usize) -> Self {
        Self {
            possible,
            actual,
            correct,
        }
    }

    pub fn recall(&self) -> Option<Percent> {
        Percent::ratio(self.correct as i64, self.possible as i64)
    }

    pub fn precision(&self) -> Option<Percent> {
        Percent::ratio(self.correct as i64, self.actual as i64)
    }
}

impl std::ops::Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts::new(
            self.possible + o.possible,
            self.actual + o.actual,
            self.correct + o.correct,
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TagCounts {
    pub actual: usize,
    pub correct: usize,
}

impl TagCounts {
    pub fn precision(&self) -> Option<Percent> {
        Percent::ratio(self.correct as i64, self.actual as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorExpression {
    pub sentence_index: usize,
    pub gold_members: Vec<GoldChunk>,
    pub sys_members: Vec<ChunkAnnotation>,
}

impl ErrorExpression {
    pub fn recall_errors(&self) -> usize {
        self.gold_members.len()
    }

    pub fn precision_errors(&self) -> usize {
        self.sys_members.len()
    }

    /// Word span covered by all members.
    pub fn span(&self) -> (usize, usize) {
        let spans = self
            .gold_members
            .iter()
            .map(|g| g.token_span)
            .chain(self.sys_members.iter().map(|s| s.token_span));
        spans.fold((usize::MAX, 0), |(a, b), (s, e)| (a.min(s), b.max(e)))
    }

    /// Identifier used in exclusion files, e.g. `s3:2..7`.
    pub fn key(&self) -> String {
        let (s, e) = self.span();
        format!("s{}:{}..{}", self.sentence_index, s, e)
    }

    /// Distinct fine labels of the system members.
    pub fn provenance(&self) -> Vec<FineLabel> {
        let mut tags: Vec<_> = self.sys_members.iter().map(|s| s.fine_label).collect();
        tags.sort();
        tags.dedup();
        tags
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// Groups unmatched chunks into error expressions, ordered by sentence and
/// position.
pub fn cluster_errors(gold: &[GoldChunk], sys: &[ChunkAnnotation]) -> Vec<ErrorExpression> {
    let n = gold.len();
    let mut uf = UnionFind::new(n + sys.len());
    for (i, g) in gold.iter().enumerate() {
        for (j, s) in sys.iter().enumerate() {
            if g.sentence_index == s.sentence_index && overlaps(g.token_span, s.token_span) {
                uf.union(i, n + j);
            }
        }
    }
    let mut groups: HashMap<usize, ErrorExpression> = HashMap::new();
    for i in 0..n + sys.len() {
        let root = uf.find(i);
        let sentence_index = if i < n {
            gold[i].sentence_index
        } else {
            sys[i - n].sentence_index
        };
        let e = groups.entry(root).or_insert_with(|| ErrorExpression {
            sentence_index,
            gold_members: Vec::new(),
            sys_members: Vec::new(),
        });
        if i < n {
            e.gold_members.push(gold[i]);
        } else {
            e.sys_members.push(sys[i - n].clone());
        }
    }
    let mut out: Vec<_> = groups.into_values().collect();
    for e in &mut out {
        e.gold_members.sort();
        e.sys_members.sort_by_key(|s| s.token_span);
    }
    out.sort_by_key(|e| (e.sentence_index, e.span()));
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalReport {
    pub infinitive: Counts,
    pub finite: Counts,
    pub per_tag: Vec<(FineLabel, TagCounts)>,
    pub error_expressions: Vec<ErrorExpression>,
    /// Keys of error expressions left out of SL.
    pub excluded: Vec<String>,
}

impl EvalReport {
    pub fn counts(&self, label: CoarseLabel) -> Counts {
        match label {
            CoarseLabel::Infinitive => self.infinitive,
            CoarseLabel::Finite => self.finite,
        }
    }

    pub fn all(&self) -> Counts {
        self.infinitive + self.finite
    }

    pub fn tag(&self, label: FineLabel) -> TagCounts {
        self.per_tag
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, c)| *c)
            .unwrap_or_default()
    }

    pub fn is_excluded(&self, e: &ErrorExpression) -> bool {
        self.excluded.contains(&e.key())
    }

    /// Number of error expressions counted for SL.
    pub fn counted_expressions(&self) -> usize {
        self.error_expressions
            .iter()
            .filter(|e| !self.is_excluded(e))
            .count()
    }

    /// Marks error expressions as excluded from SL; returns the keys that
    /// name no error expression.
    pub fn apply_exclusions(&mut self, keys: &[String]) -> Vec<String> {
        let known: HashSet<String> = self.error_expressions.iter().map(|e| e.key()).collect();
        let mut unknown = Vec::new();
        for k in keys {
            if !known.contains(k) {
                unknown.push(k.clone());
            } else if !self.excluded.contains(k) {
                self.excluded.push(k.clone());
            }
        }
        unknown
    }

    pub fn ee(&self) -> Option<f64> {
        ee_ratio(self.counted_expressions(), self.all().possible)
    }

    pub fn sl(&self) -> Option<Percent> {
        sl_percent(self.counted_expressions(), self.all().possible)
    }
}

/// Error expressions per reference chunk.
pub fn ee_ratio(expressions: usize, possible: usize) -> Option<f64> {
    (possible > 0).then(|| expressions as f64 / possible as f64)
}

/// `(1 - expressions / possible) * 100`, computed exactly.
pub fn sl_percent(expressions: usize, possible: usize) -> Option<Percent> {
    Percent::ratio(possible as i64 - expressions as i64, possible as i64)
}

/// Scores system chunks against reference chunks of the same sentences.
pub fn score(gold: &[GoldChunk], sys: &[ChunkAnnotation]) -> EvalReport {
    let mut pending: HashMap<(usize, (usize, usize), CoarseLabel), usize> = HashMap::new();
    for g in gold {
        *pending
            .entry((g.sentence_index, g.token_span, g.coarse_label))
            .or_default() += 1;
    }
    let mut report = EvalReport {
        infinitive: Counts::default(),
        finite: Counts::default(),
        per_tag: FineLabel::ALL
            .into_iter()
            .map(|l| (l, TagCounts::default()))
            .collect(),
        error_expressions: Vec::new(),
        excluded: Vec::new(),
    };
    for g in gold {
        counts_mut(&mut report, g.coarse_label).possible += 1;
    }

    let mut wrong_sys = Vec::new();
    for s in sys {
        let coarse = s.fine_label.coarse();
        let key = (s.sentence_index, s.token_span, coarse);
        let hit = match pending.get_mut(&key) {
            Some(n) if *n > 0 => {
                *n -= 1;
                true
            }
            _ => false,
        };
        let tag = &mut report
            .per_tag
            .iter_mut()
            .find(|(l, _)| *l == s.fine_label)
            .expect("all fine labels present")
            .1;
        tag.actual += 1;
        tag.correct += usize::from(hit);
        let c = counts_mut(&mut report, coarse);
        c.actual += 1;
        if hit {
            c.correct += 1;
        } else {
            wrong_sys.push(s.clone());
        }
    }

    let mut missed = Vec::new();
    for g in gold {
        if let Some(n) = pending.get_mut(&(g.sentence_index, g.token_span, g.coarse_label)) {
            if *n > 0 {
                *n -= 1;
                missed.push(*g);
            }
        }
    }
    report.error_expressions = cluster_errors(&missed, &wrong_sys);
    report
}

fn counts_mut(report: &mut EvalReport, label: CoarseLabel) -> &mut Counts {
    match label {
        CoarseLabel::Infinitive => &mut report.infinitive,
        CoarseLabel::Finite => &mut report.finite,
    }
}

/// Parses both files and scores them.
pub fn evaluate(gold_src: &str, sys_src: &str) -> Result<EvalReport, EvalError> {
    let gold = parse_gold(gold_src)?;
    let sys = parse_system(sys_src)?;
    if gold.sentences.len() != sys.sentences.len() {
        return Err(EvalError::SentenceMismatch {
            gold: gold.sentences.len(),
            sys: sys.sentences.len(),
        });
    }
    Ok(score(&gold.chunks, &sys.chunks))
}

pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12}{:>10}{:>8}{:>9}{:>8}{:>11}",
        "", "possible", "actual", "correct", "recall", "precision"
    );
    for (name, c) in [
        ("infinitive", report.infinitive),
        ("finite", report.finite),
        ("all", report.all()),
    ] {
        let _ = writeln!(
            out,
            "{:<12}{:>10}{:>8}{:>9}{:>8}{:>11}",
            name,
            c.possible,
            c.actual,
            c.correct,
            cell(c.recall()),
            cell(c.precision())
        );
    }

    out.push('\n');
    let _ = writeln!(
        out,
        "{:<12}{:>9}{:>8}{:>11}",
        "label", "correct", "actual", "precision"
    );
    for (label, t) in &report.per_tag {
        let _ = writeln!(
            out,
            "{:<12}{:>9}{:>8}{:>11}",
            label.as_str(),
            t.correct,
            t.actual,
            cell(t.precision())
        );
    }

    out.push('\n');
    let total = report.error_expressions.len();
    let counted = report.counted_expressions();
    let _ = writeln!(
        out,
        "error expressions: {total} ({counted} counted, {} excluded)",
        total - counted
    );
    for e in &report.error_expressions {
        let gold: Vec<String> = e
            .gold_members
            .iter()
            .map(|g| {
                format!(
                    "{}..{} {}",
                    g.token_span.0,
                    g.token_span.1,
                    g.coarse_label.tag()
                )
            })
            .collect();
        let sys: Vec<String> = e
            .sys_members
            .iter()
            .map(|s| {
                format!(
                    "{}..{} {} {:?}",
                    s.token_span.0, s.token_span.1, s.fine_label, s.surface
                )
            })
            .collect();
        let _ = writeln!(
            out,
            "  {}{} recall={} precision={} gold=[{}] sys=[{}]",
            e.key(),
            if report.is_excluded(e) {
                " (excluded)"
            } else {
                ""
            },
            e.recall_errors(),
            e.precision_errors(),
            gold.join(", "),
            sys.join(", ")
        );
    }
    let possible = report.all().possible;
    match report.ee() {
        Some(ee) => {
            let _ = writeln!(out, "EE = {ee:.4} ({counted}/{possible})");
        }
        None => out.push_str("EE = n/a\n"),
    }
    let _ = writeln!(out, "SL = {}", cell(report.sl()));
    out
}

/// Line-oriented `key=value` dump of a report.
pub fn render_key_values(report: &EvalReport) -> String {
    let mut out = String::new();
    let rows = [
        ("inf", report.infinitive),
        ("fin", report.finite),
        ("all", report.all()),
    ];
    for (k, c) in rows {
        let _ = writeln!(out, "possible.{k}={}", c.possible);
        let _ = writeln!(out, "actual.{k}={}", c.actual);
        let _ = writeln!(out, "correct.{k}={}", c.correct);
        let _ = writeln!(out, "recall.{k}={}", cell(c.recall()));
        let _ = writeln!(out, "precision.{k}={}", cell(c.precision()));
    }
    for (label, t) in &report.per_tag {
        let _ = writeln!(out, "actual.{label}={}", t.actual);
        let _ = writeln!(out, "correct.{label}={}", t.correct);
        let _ = writeln!(out, "precision.{label}={}", cell(t.precision()));
    }
    let _ = writeln!(out, "error_expressions={}", report.error_expressions.len());
    let _ = writeln!(
        out,
        "error_expressions.counted={}",
        report.counted_expressions()
    );
    let _ = writeln!(
        out,
        "ee={}",
        report
            .ee()
            .map_or_else(|| "n/a".to_owned(), |v| format!("{v:.6}"))
    );
    let _ = writeln!(out, "sl={}", cell(report.sl()));
    out
}
