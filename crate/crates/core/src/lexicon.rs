//! Declarative lexicon of inflected surface forms.
//!
//! One entry per line, with surface, lemma and feature list separated by
//! tabs (shown here as `<TAB>`):
//!
//! ```text
//! # comment
//! note<TAB>noter<TAB>TFV=v,MOD=fl,AMB=ov
//! sans doute<TAB>sans doute<TAB>TADV=adv,TPASS=auf
//! ```
//!
//! Ambiguity is carried by `AMB` values on a single entry. The only
//! duplicated surfaces are the `fl`/`pp` homographs such as *fait*.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("lexicon has {} invalid entr{}: {}", .0.len(), if .0.len() == 1 { "y" } else { "ies" }, first_diagnostic(.0))]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn first_diagnostic(diags: &[Diagnostic]) -> String {
    diags.first().map(|d| d.to_string()).unwrap_or_default()
}

/// A feature/value pair such as `MOD=fl`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureValue {
    pub feature: String,
    pub value: String,
}

impl FeatureValue {
    /// Builds a pair, rejecting empty names and forbidden characters.
    pub fn new(feature: impl Into<String>, value: impl Into<String>) -> Result<Self, String> {
        let feature = feature.into();
        let value = value.into();
        check_identifier(&feature).map_err(|e| format!("feature {feature:?}: {e}"))?;
        check_identifier(&value).map_err(|e| format!("value {value:?}: {e}"))?;
        Ok(Self { feature, value })
    }

    /// Builds a pair without validation; used by the engine for literal
    /// template values that were validated at parse time.
    pub(crate) fn raw(feature: &str, value: &str) -> Self {
        Self {
            feature: feature.to_owned(),
            value: value.to_owned(),
        }
    }
}

impl fmt::Display for FeatureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.feature, self.value)
    }
}

pub(crate) fn check_identifier(s: &str) -> Result<(), &'static str> {
    if s.is_empty() {
        return Err("empty");
    }
    if s.chars()
        .any(|c| c.is_whitespace() || c == ',' || c == '\'' || c == '=')
    {
        return Err("contains whitespace, comma, apostrophe or '='");
    }
    Ok(())
}

pub fn has_pair(fvl: &[FeatureValue], feature: &str, value: &str) -> bool {
    fvl.iter().any(|p| p.feature == feature && p.value == value)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub surface: String,
    pub lemma: String,
    pub fvl: Vec<FeatureValue>,
}

impl LexiconEntry {
    pub fn new(surface: &str, lemma: &str, fvl: Vec<FeatureValue>) -> Self {
        Self {
            surface: surface.to_owned(),
            lemma: lemma.to_owned(),
            fvl,
        }
    }

    pub fn has(&self, feature: &str, value: &str) -> bool {
        has_pair(&self.fvl, feature, value)
    }

    pub fn is_multiword(&self) -> bool {
        self.surface.contains(' ')
    }

    /// Every violated entry invariant, as human-readable messages.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.surface.is_empty() {
            out.push("empty surface".to_owned());
        } else if self.surface.trim() != self.surface
            || self.surface.contains("  ")
            || self.surface.chars().any(|c| c.is_whitespace() && c != ' ')
        {
            out.push("surface whitespace must be single internal spaces".to_owned());
        }
        if self.lemma.is_empty() {
            out.push("empty lemma".to_owned());
        }
        for pair in &self.fvl {
            if check_identifier(&pair.feature).is_err() || check_identifier(&pair.value).is_err() {
                out.push(format!("malformed pair {pair}"));
            }
        }

        let amb = |v: &str| self.has("AMB", v);
        let fl = self.has("MOD", "fl");
        let inf = self.has("MOD", "inf");
        if fl && (amb("ov") == amb("nv")) {
            out.push("fl requires exactly one of ov/nv".to_owned());
        }
        if amb("jv") && !amb("ov") {
            out.push("jv requires ov".to_owned());
        }
        if inf && (amb("oin") == amb("nin")) {
            out.push("inf requires exactly one of oin/nin".to_owned());
        }
        if fl && self.has("MOD", "pp") {
            out.push("fl and pp must be separate entries".to_owned());
        }
        let has_person = self.fvl.iter().any(|p| p.feature == "PERS");
        let has_number = self.fvl.iter().any(|p| p.feature == "NUM");
        if has_person || has_number {
            let plural_12 =
                fl && (self.has("PERS", "1") || self.has("PERS", "2")) && self.has("NUM", "pl");
            if !plural_12 {
                out.push("person/number only on 1st/2nd plural inflected verbs".to_owned());
            }
        }
        out
    }
}

/// One invariant violation found by [`validate_lexicon`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based source line when known.
    pub line: Option<usize>,
    pub surface: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {:?}: {}", self.surface, self.message),
            None => write!(f, "{:?}: {}", self.surface, self.message),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    lines: Vec<Option<usize>>,
    by_surface: HashMap<String, Vec<usize>>,
    by_first_word: HashMap<String, Vec<usize>>,
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Lexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Self {
        let lines = vec![None; entries.len()];
        Self::with_lines(entries, lines)
    }

    fn with_lines(entries: Vec<LexiconEntry>, lines: Vec<Option<usize>>) -> Self {
        let mut by_surface: HashMap<String, Vec<usize>> = HashMap::new();
        let mut by_first_word: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            by_surface.entry(e.surface.clone()).or_default().push(i);
            let first = e.surface.split(' ').next().unwrap_or_default();
            by_first_word.entry(first.to_owned()).or_default().push(i);
        }
        Self {
            entries,
            lines,
            by_surface,
            by_first_word,
        }
    }

    /// Parses the file format without checking entry invariants.
    pub fn parse_unchecked(source: &str) -> Result<Self, LexiconError> {
        let mut entries = Vec::new();
        let mut lines = Vec::new();
        for (idx, raw) in source.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(LexiconError::Syntax {
                    line: line_no,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let fvl = parse_fvl(fields[2]).map_err(|message| LexiconError::Syntax {
                line: line_no,
                message,
            })?;
            entries.push(LexiconEntry::new(fields[0], fields[1], fvl));
            lines.push(Some(line_no));
        }
        Ok(Self::with_lines(entries, lines))
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries whose surface equals `surface`, in file order. Falls back to
    /// the form with a lowercased first letter when nothing matches exactly.
    pub fn lookup(&self, surface: &str) -> Vec<&LexiconEntry> {
        let hits = self.exact(surface);
        if !hits.is_empty() {
            return hits;
        }
        match lower_first(surface) {
            Some(lowered) => self.exact(&lowered),
            None => Vec::new(),
        }
    }

    fn exact(&self, surface: &str) -> Vec<&LexiconEntry> {
        self.by_surface
            .get(surface)
            .map(|ids| ids.iter().map(|&i| &self.entries[i]).collect())
            .unwrap_or_default()
    }

    /// Multiword entries whose first space-separated word is `word`.
    pub fn multiwords_starting_with(&self, word: &str) -> impl Iterator<Item = &LexiconEntry> {
        self.by_first_word
            .get(word)
            .into_iter()
            .flatten()
            .map(|&i| &self.entries[i])
            .filter(|e| e.is_multiword())
    }

    /// All multiword entries, in file order.
    pub fn multiwords(&self) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.iter().filter(|e| e.is_multiword())
    }

    pub(crate) fn line_of(&self, index: usize) -> Option<usize> {
        self.lines.get(index).copied().flatten()
    }
}

/// Lowercases the first character; `None` when that changes nothing.
pub(crate) fn lower_first(s: &str) -> Option<String> {
    let mut chars = s.chars();
    let first = chars.next()?;
    let lowered: String = first.to_lowercase().chain(chars).collect();
    (lowered != s).then_some(lowered)
}

fn parse_fvl(field: &str) -> Result<Vec<FeatureValue>, String> {
    let field = field.trim();
    if field.is_empty() {
        return Err("empty feature/value list".to_owned());
    }
    field
        .split(',')
        .map(|item| {
            let (f, v) = item
                .trim()
                .split_once('=')
                .ok_or_else(|| format!("expected FEATURE=value, found {item:?}"))?;
            FeatureValue::new(f, v)
        })
        .collect()
}

/// Parses and validates a lexicon. Fails on syntax errors and on any entry
/// invariant violation.
pub fn load_lexicon(mut source: impl Read) -> Result<Lexicon, LexiconError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let lex = Lexicon::parse_unchecked(&text)?;
    let diags = validate_lexicon(&lex);
    if diags.is_empty() {
        Ok(lex)
    } else {
        Err(LexiconError::Invalid(diags))
    }
}

pub fn load_lexicon_str(source: &str) -> Result<Lexicon, LexiconError> {
    load_lexicon(source.as_bytes())
}

/// One diagnostic per violated invariant; empty iff the lexicon is well formed.
pub fn validate_lexicon(lex: &Lexicon) -> Vec<Diagnostic> {
    lex.entries
        .iter()
        .enumerate()
        .flat_map(|(i, e)| {
            e.violations().into_iter().map(move |message| Diagnostic {
                line: lex.line_of(i),
                surface: e.surface.clone(),
                message,
            })
        })
        .collect()
}

pub fn serialize_lexicon(lex: &Lexicon) -> String {
    let mut out = String::new();
    for e in &lex.entries {
        let fvl: Vec<String> = e.fvl.iter().map(ToString::to_string).collect();
        out.push_str(&format!("{}\t{}\t{}\n", e.surface, e.lemma, fvl.join(",")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(f: &str, v: &str) -> FeatureValue {
        FeatureValue::new(f, v).unwrap()
    }

    const SMALL: &str = "# test lexicon\n\
        note\tnoter\tTFV=v,MOD=fl,AMB=ov\n\
        fait\tfaire\tTFV=v,MOD=fl,AMB=ov\n\
        fait\tfaire\tTFV=v,MOD=pp\n\
        il\til\tTPRO=pnom,TPASS=auf\n\
        sans doute\tsans doute\tTPASS=auf\n";

    #[test]
    fn loads_note_entry() {
        let lex = load_lexicon_str("note\tnoter\tTFV=v,MOD=fl,AMB=ov\n").unwrap();
        assert_eq!(
            lex.entries()[0],
            LexiconEntry::new(
                "note",
                "noter",
                vec![fv("TFV", "v"), fv("MOD", "fl"), fv("AMB", "ov")]
            )
        );
    }

    #[test]
    fn empty_file_is_empty_lexicon() {
        assert!(load_lexicon_str("").unwrap().is_empty());
        assert!(load_lexicon_str("# only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn multiword_entry() {
        let lex = load_lexicon_str("sans doute\tsans doute\tTPASS=auf\n").unwrap();
        assert_eq!(lex.len(), 1);
        assert_eq!(lex.entries()[0].surface, "sans doute");
        assert!(lex.entries()[0].is_multiword());
        assert_eq!(lex.multiwords_starting_with("sans").count(), 1);
    }

    #[test]
    fn lookup_cases() {
        let lex = load_lexicon_str(SMALL).unwrap();
        let note = lex.lookup("note");
        assert_eq!(note.len(), 1);
        assert_eq!(note[0].lemma, "noter");
        assert!(note[0].has("AMB", "ov"));
        assert!(lex.lookup("xyzzy").is_empty());
        let fait = lex.lookup("fait");
        assert_eq!(fait.len(), 2);
        assert!(fait[0].has("MOD", "fl"));
        assert!(fait[1].has("MOD", "pp"));
        // sentence-initial capital falls back to lowercase
        assert_eq!(lex.lookup("Il")[0].lemma, "il");
        assert!(lex.lookup("IL").is_empty());
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = load_lexicon_str("note\tnoter\tTFV=v,MOD=fl,AMB=ov\nbad line\n").unwrap_err();
        assert!(matches!(err, LexiconError::Syntax { line: 2, .. }), "{err}");
        let err = load_lexicon_str("x\tx\tTFV\n").unwrap_err();
        assert!(matches!(err, LexiconError::Syntax { line: 1, .. }));
        let err = load_lexicon_str("x\tx\tTFV=a b\n").unwrap_err();
        assert!(matches!(err, LexiconError::Syntax { line: 1, .. }));
        let err = load_lexicon_str("x\tx\t\n").unwrap_err();
        assert!(matches!(err, LexiconError::Syntax { line: 1, .. }));
    }

    #[test]
    fn invariant_violation_names_surface() {
        let err = load_lexicon_str("note\tnoter\tTFV=v,MOD=fl\n").unwrap_err();
        match err {
            LexiconError::Invalid(d) => {
                assert_eq!(d.len(), 1);
                assert_eq!(d[0].surface, "note");
                assert_eq!(d[0].line, Some(1));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn jv_without_ov() {
        let lex = Lexicon::new(vec![LexiconEntry::new(
            "empire",
            "empirer",
            vec![fv("MOD", "fl"), fv("AMB", "jv")],
        )]);
        let msgs: Vec<_> = validate_lexicon(&lex)
            .into_iter()
            .map(|d| d.message)
            .collect();
        assert!(msgs.contains(&"jv requires ov".to_owned()), "{msgs:?}");
    }

    #[test]
    fn fl_and_pp_together() {
        let lex = Lexicon::new(vec![LexiconEntry::new(
            "fait",
            "faire",
            vec![fv("MOD", "fl"), fv("AMB", "ov"), fv("MOD", "pp")],
        )]);
        let d = validate_lexicon(&lex);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("pp"));
    }

    #[test]
    fn person_number_only_on_plural_verbs() {
        let ok = LexiconEntry::new(
            "voulons",
            "vouloir",
            vec![
                fv("MOD", "fl"),
                fv("AMB", "nv"),
                fv("PERS", "1"),
                fv("NUM", "pl"),
            ],
        );
        assert!(ok.violations().is_empty());
        let bad = LexiconEntry::new(
            "veut",
            "vouloir",
            vec![
                fv("MOD", "fl"),
                fv("AMB", "nv"),
                fv("PERS", "3"),
                fv("NUM", "sg"),
            ],
        );
        assert_eq!(bad.violations().len(), 1);
    }

    #[test]
    fn roundtrip_small() {
        let lex = load_lexicon_str(SMALL).unwrap();
        let again = load_lexicon_str(&serialize_lexicon(&lex)).unwrap();
        assert_eq!(lex, again);
    }
}
