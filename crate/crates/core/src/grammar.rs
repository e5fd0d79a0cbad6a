//! The shipped French grammar and the chunking pipeline.
//!
//! Text is tokenized, analysed, split into sentences, and each sentence is
//! rewritten in two strata: the structural rules (phases below
//! [`HEURISTIC_PHASE`]) run together to a fixpoint, then the heuristic rules
//! run on the result; the two alternate until neither fires. Chunks already
//! present after the first structural stratum are labelled `-I`, all later
//! ones `-II`.
//!
//! Infinitive chunks may start with à, de, d', pour, sans or afin de.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use thiserror::Error;

use crate::engine::{
    parse_rules_str, run_to_fixpoint_with, EngineError, Firing, RuleSet, DEFAULT_MAX_CYCLES,
};
use crate::lexicon::{load_lexicon_str, Lexicon};
use crate::morph::{
    analyze, normalize_whitespace, segment, tokenize_plain, Sentence, Token, Tokenizer,
};

pub const SEED_LEXICON: &str = include_str!("../data/fr_seed.lex");
pub const CHUNK_RULES: &str = include_str!("../data/fr_chunks.rules");

/// Rules of this phase and above are heuristic.
pub const HEURISTIC_PHASE: u32 = 4;

pub const FINITE_VALUE: &str = "vnfl";
pub const INFINITIVE_VALUE: &str = "vninf";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoarseLabel {
    Infinitive,
    Finite,
}

impl CoarseLabel {
    pub const ALL: [CoarseLabel; 2] = [CoarseLabel::Infinitive, CoarseLabel::Finite];

    /// Short tag used in gold files.
    pub fn tag(self) -> &'static str {
        match self {
            CoarseLabel::Finite => "fin",
            CoarseLabel::Infinitive => "inf",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CoarseLabel::Finite => "finite",
            CoarseLabel::Infinitive => "infinitive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FineLabel {
    VninfI,
    VninfII,
    VnflI,
    VnflII,
}

impl FineLabel {
    pub const ALL: [FineLabel; 4] = [
        FineLabel::VninfI,
        FineLabel::VninfII,
        FineLabel::VnflI,
        FineLabel::VnflII,
    ];

    pub fn new(coarse: CoarseLabel, heuristic: bool) -> Self {
        match (coarse, heuristic) {
            (CoarseLabel::Finite, false) => FineLabel::VnflI,
            (CoarseLabel::Finite, true) => FineLabel::VnflII,
            (CoarseLabel::Infinitive, false) => FineLabel::VninfI,
            (CoarseLabel::Infinitive, true) => FineLabel::VninfII,
        }
    }

    pub fn coarse(self) -> CoarseLabel {
        match self {
            FineLabel::VnflI | FineLabel::VnflII => CoarseLabel::Finite,
            FineLabel::VninfI | FineLabel::VninfII => CoarseLabel::Infinitive,
        }
    }

    pub fn is_heuristic(self) -> bool {
        matches!(self, FineLabel::VnflII | FineLabel::VninfII)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FineLabel::VninfI => "vninf-I",
            FineLabel::VninfII => "vninf-II",
            FineLabel::VnflI => "vnfl-I",
            FineLabel::VnflII => "vnfl-II",
        }
    }
}

impl fmt::Display for FineLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FineLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FineLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown chunk label {s:?}"))
    }
}

/// A labelled chunk. `token_span` counts plain word positions (see
/// [`tokenize_plain`]) within the sentence, end exclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkAnnotation {
    pub sentence_index: usize,
    pub token_span: (usize, usize),
    pub fine_label: FineLabel,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkedSentence {
    pub index: usize,
    pub sentence: Sentence,
    /// Source text of the sentence.
    pub text: String,
    /// Tokens after rewriting.
    pub tokens: Vec<Token>,
    pub chunks: Vec<ChunkAnnotation>,
}

/// One rule firing, for `--trace` output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub sentence: usize,
    pub cycle: usize,
    pub phase: u32,
    pub rule: String,
    pub start: usize,
    pub end: usize,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cycle={} rule={} sent={} span={}..{}",
            self.cycle, self.rule, self.sentence, self.start, self.end
        )
    }
}

#[derive(Debug, Error)]
pub enum ChunkError {
    #[error("sentence {sentence}: {source}")]
    Engine {
        sentence: usize,
        #[source]
        source: EngineError,
    },
}

#[derive(Debug, Clone)]
pub struct Grammar {
    lexicon: Lexicon,
    rules: RuleSet,
    structural: RuleSet,
    heuristic: RuleSet,
    tokenizer: Tokenizer,
    pub max_cycles: usize,
}

impl Grammar {
    pub fn new(lexicon: Lexicon, rules: RuleSet) -> Self {
        let structural = rules.filter_phases(|p| p < HEURISTIC_PHASE);
        let heuristic = rules.filter_phases(|p| p >= HEURISTIC_PHASE);
        let tokenizer = Tokenizer::new(&lexicon);
        Self {
            lexicon,
            rules,
            structural,
            heuristic,
            tokenizer,
            max_cycles: DEFAULT_MAX_CYCLES,
        }
    }

    pub fn with_max_cycles(mut self, max_cycles: usize) -> Self {
        self.max_cycles = max_cycles;
        self
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn analyze_text(&self, text: &str) -> Vec<Token> {
        analyze(&self.tokenizer.tokenize(text), &self.lexicon)
    }

    pub fn sentences(&self, text: &str) -> Vec<Sentence> {
        segment(self.analyze_text(text))
    }

    /// Chunks every sentence of `text`.
    pub fn chunk_text(&self, text: &str) -> Result<Vec<ChunkedSentence>, ChunkError> {
        self.chunk_text_traced(text, false).map(|(s, _)| s)
    }

    /// Like [`Grammar::chunk_text`], also returning rule firings in sentence
    /// order when `trace` is set.
    pub fn chunk_text_traced(
        &self,
        text: &str,
        trace: bool,
    ) -> Result<(Vec<ChunkedSentence>, Vec<TraceEvent>), ChunkError> {
        #[cfg(feature = "parallel")]
        {
            self.chunk_text_parallel(text, trace)
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.chunk_text_sequential(text, trace)
        }
    }

    pub fn chunk_text_sequential(
        &self,
        text: &str,
        trace: bool,
    ) -> Result<(Vec<ChunkedSentence>, Vec<TraceEvent>), ChunkError> {
        let results: Vec<_> = self
            .sentences(text)
            .into_iter()
            .enumerate()
            .map(|(i, s)| self.chunk_sentence(i, s, text, trace))
            .collect();
        collect_results(results)
    }

    #[cfg(feature = "parallel")]
    pub fn chunk_text_parallel(
        &self,
        text: &str,
        trace: bool,
    ) -> Result<(Vec<ChunkedSentence>, Vec<TraceEvent>), ChunkError> {
        use rayon::prelude::*;

        let results: Vec<_> = self
            .sentences(text)
            .into_par_iter()
            .enumerate()
            .map(|(i, s)| self.chunk_sentence(i, s, text, trace))
            .collect();
        collect_results(results)
    }

    /// Rewrites one sentence and extracts its chunks.
    pub fn chunk_sentence(
        &self,
        index: usize,
        sentence: Sentence,
        source: &str,
        trace: bool,
    ) -> Result<(ChunkedSentence, Vec<TraceEvent>), ChunkError> {
        let mut events = Vec::new();
        let mut record = |offset: usize, f: &Firing<'_>| {
            if trace {
                events.push(TraceEvent {
                    sentence: index,
                    cycle: offset + f.cycle,
                    phase: f.rule.phase,
                    rule: f.rule.name.clone(),
                    start: f.start,
                    end: f.end,
                });
            }
        };
        let engine_err = |source| ChunkError::Engine {
            sentence: index,
            source,
        };

        let (mut tokens, mut offset) = run_to_fixpoint_with(
            &self.structural,
            sentence.tokens.clone(),
            self.max_cycles,
            &mut |f| record(0, f),
        )
        .map_err(engine_err)?;
        let decided: HashSet<((usize, usize), CoarseLabel)> = tokens
            .iter()
            .filter_map(|t| chunk_label(t).map(|l| (t.span, l)))
            .collect();
        // Heuristic decisions can enable further structural rules (a clitic
        // joining a promoted infinitive), so alternate until neither fires.
        let mut rounds = 0;
        loop {
            let (next, passes) =
                run_to_fixpoint_with(&self.heuristic, tokens, self.max_cycles, &mut |f| {
                    record(offset, f)
                })
                .map_err(engine_err)?;
            offset += passes;
            tokens = next;
            if passes == 1 {
                break;
            }
            rounds += 1;
            if rounds > self.max_cycles {
                return Err(engine_err(EngineError::CycleBudget {
                    max_cycles: self.max_cycles,
                    last_rule: "<strata>".into(),
                }));
            }
            let (next, passes) =
                run_to_fixpoint_with(&self.structural, tokens, self.max_cycles, &mut |f| {
                    record(offset, f)
                })
                .map_err(engine_err)?;
            offset += passes;
            tokens = next;
            if passes == 1 {
                break;
            }
        }

        let text = sentence.text(source).to_owned();
        let base = sentence.span.0;
        let words = tokenize_plain(&text);
        let chunks = tokens
            .iter()
            .filter_map(|t| {
                let coarse = chunk_label(t)?;
                let (start, end) = (t.span.0 - base, t.span.1 - base);
                let first = words.iter().position(|w| w.start >= start)?;
                let last = words.iter().rposition(|w| w.end <= end)?;
                Some(ChunkAnnotation {
                    sentence_index: index,
                    token_span: (first, last + 1),
                    fine_label: FineLabel::new(coarse, !decided.contains(&(t.span, coarse))),
                    surface: normalize_whitespace(&text[start..end]),
                })
            })
            .collect();
        Ok((
            ChunkedSentence {
                index,
                sentence,
                text,
                tokens,
                chunks,
            },
            events,
        ))
    }
}

fn collect_results(
    results: Vec<Result<(ChunkedSentence, Vec<TraceEvent>), ChunkError>>,
) -> Result<(Vec<ChunkedSentence>, Vec<TraceEvent>), ChunkError> {
    let mut sentences = Vec::with_capacity(results.len());
    let mut events = Vec::new();
    for r in results {
        let (s, e) = r?;
        sentences.push(s);
        events.extend(e);
    }
    Ok((sentences, events))
}

/// The chunk category a rewritten token carries, if any.
pub fn chunk_label(token: &Token) -> Option<CoarseLabel> {
    if token.has_value(FINITE_VALUE) {
        Some(CoarseLabel::Finite)
    } else if token.has_value(INFINITIVE_VALUE) {
        Some(CoarseLabel::Infinitive)
    } else {
        None
    }
}

/// Builds the shipped seed lexicon and rule set.
///
/// # Panics
/// If the embedded data files are invalid.
pub fn build_default_grammar() -> (Lexicon, RuleSet) {
    let lexicon = load_lexicon_str(SEED_LEXICON).expect("embedded lexicon is valid");
    let rules = parse_rules_str(CHUNK_RULES).expect("embedded rules are valid");
    (lexicon, rules)
}

/// Shared instance of the default grammar.
pub fn default_grammar() -> &'static Grammar {
    static GRAMMAR: OnceLock<Grammar> = OnceLock::new();
    GRAMMAR.get_or_init(|| {
        let (lexicon, rules) = build_default_grammar();
        Grammar::new(lexicon, rules)
    })
}

/// Chunks `text` with the default grammar.
pub fn chunk_text(text: &str) -> Result<Vec<ChunkedSentence>, ChunkError> {
    default_grammar().chunk_text(text)
}

/// One line per sentence, each chunk written as `[surface|label]`.
pub fn render_chunks(sentences: &[ChunkedSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        out.push_str(&render_sentence(s));
        out.push('\n');
    }
    out
}

pub fn render_sentence(s: &ChunkedSentence) -> String {
    let words = tokenize_plain(&s.text);
    let mut line = String::new();
    let mut cursor = 0;
    for c in &s.chunks {
        let start = words[c.token_span.0].start;
        let end = words[c.token_span.1 - 1].end;
        line.push_str(&s.text[cursor..start]);
        line.push('[');
        line.push_str(&s.text[start..end]);
        line.push('|');
        line.push_str(c.fine_label.as_str());
        line.push(']');
        cursor = end;
    }
    line.push_str(&s.text[cursor..]);
    normalize_whitespace(&line)
}
