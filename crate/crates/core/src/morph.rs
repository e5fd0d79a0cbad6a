//! Tokenization, lexical annotation and sentence segmentation.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::lexicon::{lower_first, FeatureValue, Lexicon};

/// Elided forms split off after their apostrophe.
const ELISIONS: &[&str] = &["n'", "l'", "d'", "j'", "s'", "m'", "t'", "qu'", "c'"];

/// Inverted clitics split off before their hyphen, longest first.
const HYPHEN_CLITICS: &[&str] = &[
    "-t-elle", "-t-il", "-t-on", "-elles", "-elle", "-nous", "-vous", "-ils", "-il", "-on", "-je",
    "-tu", "-ce",
];

/// Surfaces that close a sentence.
pub const SENTENCE_FINAL: &[&str] = &[".", "!", "?", "…", "..."];

const PUNCTUATION: &[char] = &[
    '.', ',', ';', ':', '!', '?', '…', '(', ')', '"', '«', '»', '[', ']', '{', '}',
];

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '’'
}

/// A token string with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawToken {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Lexical,
    Unknown,
    Recomposed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub fvl: Vec<FeatureValue>,
    /// Byte offsets into the source text, end exclusive.
    pub span: (usize, usize),
    pub provenance: Provenance,
}

impl Token {
    pub fn new(surface: &str, lemma: &str, fvl: Vec<FeatureValue>, span: (usize, usize)) -> Self {
        Self {
            surface: surface.to_owned(),
            lemma: lemma.to_owned(),
            fvl,
            span,
            provenance: Provenance::Lexical,
        }
    }

    pub fn unknown(surface: &str, span: (usize, usize)) -> Self {
        Self {
            surface: surface.to_owned(),
            lemma: surface.to_owned(),
            fvl: vec![
                FeatureValue::raw("au", "au"),
                FeatureValue::raw("TPASS", "auf"),
            ],
            span,
            provenance: Provenance::Unknown,
        }
    }

    /// True if any pair carries `value`, whatever its feature.
    pub fn has_value(&self, value: &str) -> bool {
        self.fvl.iter().any(|p| p.value == value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    /// Byte range of the sentence in the source text.
    pub span: (usize, usize),
}

impl Sentence {
    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        &source[self.span.0..self.span.1]
    }
}

/// Joins two surfaces: no space after an apostrophe or before a hyphen.
pub fn join_surfaces(left: &str, right: &str) -> String {
    let mut out = String::with_capacity(left.len() + right.len() + 1);
    out.push_str(left);
    if !(left.ends_with(is_apostrophe) || right.starts_with('-') || left.is_empty()) {
        out.push(' ');
    }
    out.push_str(right);
    out
}

/// Collapses every whitespace run to a single space and trims.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits text into raw tokens, merging lexicon multiword expressions.
#[derive(Debug, Clone, Default)]
pub struct Tokenizer {
    /// first word -> word sequences of multiword entries, longest first
    multiwords: HashMap<String, Vec<Vec<String>>>,
}

impl Tokenizer {
    /// A tokenizer that never merges multiword expressions.
    pub fn plain() -> Self {
        Self::default()
    }

    pub fn new(lex: &Lexicon) -> Self {
        let plain = Self::plain();
        let mut multiwords: HashMap<String, Vec<Vec<String>>> = HashMap::new();
        // elided forms such as d'ailleurs are single lexicon words but
        // several tokens
        for entry in lex.entries() {
            let words: Vec<String> = plain
                .tokenize(&entry.surface)
                .into_iter()
                .map(|t| t.text)
                .collect();
            if words.len() > 1 {
                let seqs = multiwords.entry(words[0].clone()).or_default();
                if !seqs.contains(&words) {
                    seqs.push(words);
                }
            }
        }
        for seqs in multiwords.values_mut() {
            seqs.sort_by_key(|s| std::cmp::Reverse(s.len()));
        }
        Self { multiwords }
    }

    pub fn tokenize(&self, text: &str) -> Vec<RawToken> {
        let mut words = Vec::new();
        for (start, chunk) in whitespace_chunks(text) {
            split_chunk(chunk, start, &mut words);
        }
        if self.multiwords.is_empty() {
            return words;
        }
        self.merge_multiwords(words)
    }

    fn merge_multiwords(&self, words: Vec<RawToken>) -> Vec<RawToken> {
        let mut out = Vec::with_capacity(words.len());
        let mut i = 0;
        while i < words.len() {
            match self.longest_multiword_at(&words, i) {
                Some(len) => {
                    let parts = &words[i..i + len];
                    let text = parts[1..]
                        .iter()
                        .fold(parts[0].text.clone(), |acc, t| join_surfaces(&acc, &t.text));
                    out.push(RawToken {
                        text,
                        start: parts[0].start,
                        end: parts[len - 1].end,
                    });
                    i += len;
                }
                None => {
                    out.push(words[i].clone());
                    i += 1;
                }
            }
        }
        out
    }

    fn longest_multiword_at(&self, words: &[RawToken], i: usize) -> Option<usize> {
        let first = &words[i].text;
        let mut keys = vec![first.clone()];
        if let Some(lowered) = lower_first(first) {
            keys.push(lowered);
        }
        keys.iter()
            .filter_map(|k| self.multiwords.get(k))
            .flatten()
            .filter(|seq| {
                i + seq.len() <= words.len()
                    && seq[1..]
                        .iter()
                        .zip(&words[i + 1..])
                        .all(|(w, t)| *w == t.text)
            })
            .map(Vec::len)
            .max()
    }
}

fn whitespace_chunks(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut pos = 0;
    std::iter::from_fn(move || {
        let rest = &text[pos..];
        let skip = rest.len() - rest.trim_start().len();
        let start = pos + skip;
        if start >= text.len() {
            return None;
        }
        let tail = &text[start..];
        let len = tail.find(char::is_whitespace).unwrap_or(tail.len());
        pos = start + len;
        Some((start, &text[start..start + len]))
    })
}

/// Splits one whitespace-free chunk into punctuation and word tokens.
fn split_chunk(chunk: &str, offset: usize, out: &mut Vec<RawToken>) {
    let chars: Vec<(usize, char)> = chunk.char_indices().collect();
    let mut word_start: Option<usize> = None;
    let mut k = 0;
    while k < chars.len() {
        let (pos, c) = chars[k];
        let between_digits = (c == '.' || c == ',')
            && k > 0
            && chars[k - 1].1.is_ascii_digit()
            && chars.get(k + 1).is_some_and(|&(_, n)| n.is_ascii_digit());
        if PUNCTUATION.contains(&c) && !between_digits {
            if let Some(ws) = word_start.take() {
                split_word(&chunk[ws..pos], offset + ws, out);
            }
            // a run of periods is a single token
            let mut end_k = k + 1;
            if c == '.' {
                while end_k < chars.len() && chars[end_k].1 == '.' {
                    end_k += 1;
                }
            }
            let end = chars.get(end_k).map_or(chunk.len(), |&(p, _)| p);
            out.push(RawToken {
                text: chunk[pos..end].to_owned(),
                start: offset + pos,
                end: offset + end,
            });
            k = end_k;
            continue;
        }
        if word_start.is_none() {
            word_start = Some(pos);
        }
        k += 1;
    }
    if let Some(ws) = word_start {
        split_word(&chunk[ws..], offset + ws, out);
    }
}

/// Splits elided prefixes and an inverted hyphen clitic off a word.
fn split_word(word: &str, offset: usize, out: &mut Vec<RawToken>) {
    let mut rest = word;
    let mut start = offset;
    while let Some(apos) = rest.find(is_apostrophe) {
        let apos_end = apos + rest[apos..].chars().next().map_or(1, char::len_utf8);
        if apos_end == rest.len() {
            break;
        }
        let prefix = &rest[..apos_end];
        let normalized = prefix.to_lowercase().replace('’', "'");
        if !ELISIONS.contains(&normalized.as_str()) {
            break;
        }
        out.push(RawToken {
            text: prefix.to_owned(),
            start,
            end: start + apos_end,
        });
        rest = &rest[apos_end..];
        start += apos_end;
    }
    let lowered = rest.to_lowercase();
    let clitic = HYPHEN_CLITICS
        .iter()
        .find(|c| lowered.len() > c.len() && lowered.ends_with(*c))
        .filter(|c| rest.is_char_boundary(rest.len() - c.len()));
    match clitic {
        Some(c) => {
            let cut = rest.len() - c.len();
            out.push(RawToken {
                text: rest[..cut].to_owned(),
                start,
                end: start + cut,
            });
            out.push(RawToken {
                text: rest[cut..].to_owned(),
                start: start + cut,
                end: start + rest.len(),
            });
        }
        None => out.push(RawToken {
            text: rest.to_owned(),
            start,
            end: start + rest.len(),
        }),
    }
}

/// Tokenizes `text`, matching multiword entries of `lex` greedily.
pub fn tokenize(text: &str, lex: &Lexicon) -> Vec<RawToken> {
    Tokenizer::new(lex).tokenize(text)
}

/// Tokenization without multiword merging; gives the word positions that
/// chunk spans are expressed in.
pub fn tokenize_plain(text: &str) -> Vec<RawToken> {
    Tokenizer::plain().tokenize(text)
}

/// Annotates raw tokens. Homographs collapse into one token whose pairs are
/// the concatenation of all matching entries; unknown forms get `[au, auf]`.
pub fn analyze(tokens: &[RawToken], lex: &Lexicon) -> Vec<Token> {
    tokens
        .iter()
        .map(|raw| {
            let span = (raw.start, raw.end);
            let entries = lex.lookup(&raw.text);
            match entries.first() {
                None => Token::unknown(&raw.text, span),
                Some(first) => Token::new(
                    &raw.text,
                    &first.lemma,
                    entries.iter().flat_map(|e| e.fvl.iter().cloned()).collect(),
                    span,
                ),
            }
        })
        .collect()
}

/// Splits after sentence-final punctuation. Abbreviations are not handled.
pub fn segment(tokens: Vec<Token>) -> Vec<Sentence> {
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    for token in tokens {
        let is_final = SENTENCE_FINAL.contains(&token.surface.as_str());
        current.push(token);
        if is_final {
            sentences.push(make_sentence(std::mem::take(&mut current)));
        }
    }
    if !current.is_empty() {
        sentences.push(make_sentence(current));
    }
    sentences
}

fn make_sentence(tokens: Vec<Token>) -> Sentence {
    let start = tokens.first().map_or(0, |t| t.span.0);
    let end = tokens.last().map_or(0, |t| t.span.1);
    Sentence {
        tokens,
        span: (start, end),
    }
}

pub fn count_unknown(tokens: &[Token]) -> usize {
    tokens
        .iter()
        .filter(|t| t.provenance == Provenance::Unknown)
        .count()
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
}

/// Prints tokens in the Smorph listing format:
///
/// ```text
/// 'Il'.
/// [ 'il', 'TPRO','pnom', 'TPASS','auf'].
///
/// ```
///
/// Each line carries one trailing space. Apostrophes inside quoted
/// strings are backslash-escaped.
pub fn render_analysis(tokens: &[Token]) -> String {
    let mut out = String::new();
    for t in tokens {
        let _ = writeln!(out, "{}. ", quote(&t.surface));
        out.push_str("[ ");
        out.push_str(&quote(&t.lemma));
        for p in &t.fvl {
            let _ = write!(out, ", {},{}", quote(&p.feature), quote(&p.value));
        }
        out.push_str("]. \n\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::load_lexicon_str;

    fn texts(tokens: &[RawToken]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    fn lex() -> Lexicon {
        load_lexicon_str(
            "il\til\tTPRO=pnom,TPASS=auf\n\
             la\tla\tTFG=cl,AMB=ocl,TPASS=auf\n\
             note\tnoter\tTFV=v,MOD=fl,AMB=ov\n\
             fait\tfaire\tTFV=v,MOD=fl,AMB=ov\n\
             fait\tfaire\tTFV=v,MOD=pp\n\
             sans doute\tsans doute\tTADV=adv,TPASS=auf\n\
             n'importe qui\tn'importe qui\tTPASS=auf\n\
             d'ailleurs\td'ailleurs\tTADV=adv,TPASS=auf\n",
        )
        .unwrap()
    }

    #[test]
    fn elision_split() {
        assert_eq!(
            texts(&tokenize_plain("Il n'est pas")),
            ["Il", "n'", "est", "pas"]
        );
        assert_eq!(
            texts(&tokenize_plain("qu'il l’a")),
            ["qu'", "il", "l’", "a"]
        );
        assert_eq!(texts(&tokenize_plain("aujourd'hui")), ["aujourd'hui"]);
    }

    #[test]
    fn empty_input() {
        assert!(tokenize_plain("").is_empty());
        assert!(tokenize_plain("  \n\t ").is_empty());
    }

    #[test]
    fn hyphen_clitics() {
        assert_eq!(texts(&tokenize_plain("a-t-il")), ["a", "-t-il"]);
        assert_eq!(texts(&tokenize_plain("dit-on")), ["dit", "-on"]);
        assert_eq!(texts(&tokenize_plain("Est-ce")), ["Est", "-ce"]);
        assert_eq!(texts(&tokenize_plain("remue-ménage")), ["remue-ménage"]);
        assert_eq!(texts(&tokenize_plain("-il")), ["-il"]);
    }

    #[test]
    fn punctuation() {
        assert_eq!(
            texts(&tokenize_plain("Il a, très souvent, été invité.")),
            ["Il", "a", ",", "très", "souvent", ",", "été", "invité", "."]
        );
        assert_eq!(texts(&tokenize_plain("Quoi...?")), ["Quoi", "...", "?"]);
        assert_eq!(texts(&tokenize_plain("3,5 %")), ["3,5", "%"]);
    }

    #[test]
    fn spans_are_byte_ranges() {
        let text = "Il a, été invité.";
        for t in tokenize_plain(text) {
            assert_eq!(&text[t.start..t.end], t.text);
        }
    }

    #[test]
    fn multiword_merge() {
        let lex = lex();
        assert_eq!(texts(&tokenize("sans doute", &lex)), ["sans doute"]);
        assert_eq!(
            texts(&tokenize("Sans  doute il", &lex)),
            ["Sans doute", "il"]
        );
        assert_eq!(
            texts(&tokenize("sans, doute", &lex)),
            ["sans", ",", "doute"]
        );
        assert_eq!(texts(&tokenize("n'importe qui", &lex)), ["n'importe qui"]);
        assert_eq!(texts(&tokenize("d'ailleurs", &lex)), ["d'ailleurs"]);
        let t = &tokenize("x sans  doute", &lex)[1];
        assert_eq!((t.start, t.end), (2, 13));
    }

    #[test]
    fn analyze_examples() {
        let lex = lex();
        let toks = analyze(&tokenize("Il la note Deloitte fait", &lex), &lex);
        assert_eq!(toks.len(), 5);
        assert_eq!(toks[0].lemma, "il");
        assert_eq!(toks[0].surface, "Il");
        assert_eq!(toks[1].fvl.len(), 3);
        assert_eq!(toks[2].lemma, "noter");
        assert_eq!(toks[3], Token::unknown("Deloitte", (11, 19)));
        assert_eq!(toks[3].lemma, "Deloitte");
        assert!(toks[4].has_value("fl") && toks[4].has_value("pp"));
        assert_eq!(toks[4].fvl.len(), 5);
        assert_eq!(count_unknown(&toks), 1);
    }

    #[test]
    fn segmentation() {
        let lex = Lexicon::default();
        let toks = analyze(&tokenize_plain("Il mange. Il dort."), &lex);
        let s = segment(toks);
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|s| s.tokens.len() == 3));
        assert_eq!(s[1].text("Il mange. Il dort."), "Il dort.");
        assert!(segment(Vec::new()).is_empty());
        let s = segment(analyze(&tokenize_plain("M. Dupont mange."), &lex));
        assert_eq!(s.len(), 2);
        let s = segment(analyze(&tokenize_plain("Il mange. Il dort"), &lex));
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].tokens.len(), 2);
    }

    #[test]
    fn render_formats() {
        let lex = lex();
        let toks = analyze(&tokenize("Il", &lex), &lex);
        assert_eq!(
            render_analysis(&toks),
            "'Il'. \n[ 'il', 'TPRO','pnom', 'TPASS','auf']. \n\n"
        );
        assert_eq!(render_analysis(&[]), "");
        let toks = analyze(&tokenize("n'", &lex), &lex);
        assert!(render_analysis(&toks).starts_with("'n\\''. \n"));
    }

    #[test]
    fn join_rules() {
        assert_eq!(join_surfaces("n'", "est"), "n'est");
        assert_eq!(join_surfaces("a", "-t-il"), "a-t-il");
        assert_eq!(join_surfaces("le", "lui"), "le lui");
    }
}
