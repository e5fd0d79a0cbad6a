//! Command-line front end.
//!
//! Exit status: 0 on success, 1 when the input is read but rejected
//! (lexicon diagnostics, rule errors, cycle budget, malformed annotation
//! files), 2 when a file cannot be read or written or the arguments are
//! invalid.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::engine::{parse_rules_str, RuleError, DEFAULT_MAX_CYCLES};
use crate::eval::{
    parse_exclusions, parse_gold, parse_system, render_key_values, render_report, score, EvalError,
};
use crate::grammar::{build_default_grammar, render_chunks, ChunkError, Grammar};
use crate::lexicon::{load_lexicon_str, validate_lexicon, Lexicon, LexiconError};
use crate::morph::{analyze, render_analysis, Tokenizer};

#[derive(Debug, Parser)]
#[command(name = "verbchunk", version, about = "French verbal chunk extraction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a lexicon file (the built-in seed lexicon by default).
    Lexcheck {
        #[arg(long, value_name = "PATH")]
        lexicon: Option<PathBuf>,
    },
    /// Tokenize and annotate text, one block per token.
    Analyze {
        #[arg(long, value_name = "PATH")]
        lexicon: Option<PathBuf>,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Mark verbal chunks inline as `[surface|label]`.
    Chunk {
        #[arg(long, value_name = "PATH")]
        lexicon: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        rules: Option<PathBuf>,
        #[arg(long, value_name = "N", default_value_t = DEFAULT_MAX_CYCLES as u64,
              value_parser = clap::value_parser!(u64).range(1..))]
        max_cycles: u64,
        /// Log every rule firing to stderr.
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Score system output against a reference annotation.
    Eval {
        #[arg(long, value_name = "PATH")]
        gold: PathBuf,
        #[arg(long, value_name = "PATH")]
        sys: PathBuf,
        /// Error expressions to leave out of SL, one key per line.
        #[arg(long, value_name = "PATH")]
        exclusions: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
        /// Write `key=value` lines instead of tables.
        #[arg(long)]
        key_values: bool,
    },
}

#[derive(Debug, Args)]
pub struct IoArgs {
    /// Input files; standard input when none is given.
    #[arg(value_name = "INPUT")]
    pub inputs: Vec<PathBuf>,
    /// Output file, or a directory of `<stem>.out` files when several
    /// inputs are given.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Lexicon {
        path: PathBuf,
        #[source]
        source: LexiconError,
    },
    #[error("{}: {source}", path.display())]
    Rules {
        path: PathBuf,
        #[source]
        source: RuleError,
    },
    #[error("{}: {source}", path.display())]
    Chunk {
        path: PathBuf,
        #[source]
        source: ChunkError,
    },
    #[error("{}: {source}", path.display())]
    Eval {
        path: PathBuf,
        #[source]
        source: EvalError,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Runs the command line `args` (including the program name).
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
            } else {
                let _ = stdout.write_all(text.as_bytes());
            }
            return e.exit_code();
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(
    command: Command,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    match command {
        Command::Lexcheck { lexicon } => lexcheck(lexicon.as_deref(), stdout, stderr),
        Command::Analyze { lexicon, io } => {
            let lexicon = match lexicon {
                Some(p) => load_lexicon_file(&p)?,
                None => build_default_grammar().0,
            };
            let tokenizer = Tokenizer::new(&lexicon);
            process(&io, stdout, stderr, |_, text| {
                let tokens = analyze(&tokenizer.tokenize(text), &lexicon);
                Ok((render_analysis(&tokens), Vec::new()))
            })?;
            Ok(0)
        }
        Command::Chunk {
            lexicon,
            rules,
            max_cycles,
            trace,
            io,
        } => {
            let (default_lex, default_rules) = build_default_grammar();
            let lexicon = match lexicon {
                Some(p) => load_lexicon_file(&p)?,
                None => default_lex,
            };
            let rules = match rules {
                Some(p) => parse_rules_str(&read(&p)?)
                    .map_err(|source| CliError::Rules { path: p, source })?,
                None => default_rules,
            };
            let grammar = Grammar::new(lexicon, rules)
                .with_max_cycles(usize::try_from(max_cycles).unwrap_or(usize::MAX));
            process(&io, stdout, stderr, |path, text| {
                let (sentences, events) =
                    grammar
                        .chunk_text_traced(text, trace)
                        .map_err(|source| CliError::Chunk {
                            path: path.to_owned(),
                            source,
                        })?;
                let log = events.iter().map(ToString::to_string).collect();
                Ok((render_chunks(&sentences), log))
            })?;
            Ok(0)
        }
        Command::Eval {
            gold,
            sys,
            exclusions,
            output,
            key_values,
        } => {
            let gold_src = read(&gold)?;
            let sys_src = read(&sys)?;
            let g = parse_gold(&gold_src).map_err(|source| CliError::Eval {
                path: gold.clone(),
                source,
            })?;
            let s = parse_system(&sys_src).map_err(|source| CliError::Eval {
                path: sys.clone(),
                source,
            })?;
            if g.sentences.len() != s.sentences.len() {
                return Err(CliError::Eval {
                    path: sys,
                    source: EvalError::SentenceMismatch {
                        gold: g.sentences.len(),
                        sys: s.sentences.len(),
                    },
                });
            }
            let mut report = score(&g.chunks, &s.chunks);
            if let Some(p) = exclusions {
                for key in report.apply_exclusions(&parse_exclusions(&read(&p)?)) {
                    let _ = writeln!(
                        stderr,
                        "warning: {}: no error expression {key}",
                        p.display()
                    );
                }
            }
            let text = if key_values {
                render_key_values(&report)
            } else {
                render_report(&report)
            };
            match output {
                Some(p) => write_atomic(&p, &text)?,
                None => stdout
                    .write_all(text.as_bytes())
                    .map_err(io_err(Path::new("<stdout>")))?,
            }
            Ok(0)
        }
    }
}

fn load_lexicon_file(path: &Path) -> Result<Lexicon, CliError> {
    load_lexicon_str(&read(path)?).map_err(|source| CliError::Lexicon {
        path: path.to_owned(),
        source,
    })
}

fn lexcheck(
    path: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    let (name, lexicon) = match path {
        Some(p) => {
            let lex = Lexicon::parse_unchecked(&read(p)?).map_err(|source| CliError::Lexicon {
                path: p.to_owned(),
                source,
            })?;
            (p.display().to_string(), lex)
        }
        None => ("<built-in>".to_owned(), build_default_grammar().0),
    };
    let diagnostics = validate_lexicon(&lexicon);
    for d in &diagnostics {
        let _ = writeln!(stderr, "{name}: {d}");
    }
    if diagnostics.is_empty() {
        let _ = writeln!(stdout, "{name}: {} entries, no problems", lexicon.len());
        Ok(0)
    } else {
        let _ = writeln!(stderr, "{name}: {} problem(s)", diagnostics.len());
        Ok(1)
    }
}

type Processed = Result<(String, Vec<String>), CliError>;

/// Runs `f` over every input (or stdin) and writes the results.
fn process<F>(
    io: &IoArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    f: F,
) -> Result<(), CliError>
where
    F: Fn(&Path, &str) -> Processed + Sync,
{
    if io.inputs.is_empty() {
        let stdin = Path::new("<stdin>");
        let mut text = String::new();
        io::stdin()
            .read_to_string(&mut text)
            .map_err(io_err(stdin))?;
        let (out, log) = f(stdin, &text)?;
        write_log(stderr, &log);
        return emit(io.output.as_deref(), &out, stdout);
    }

    let work = |p: &PathBuf| -> Processed { f(p, &read(p)?) };
    #[cfg(feature = "parallel")]
    let results: Vec<Processed> = {
        use rayon::prelude::*;
        io.inputs.par_iter().map(work).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Processed> = io.inputs.iter().map(work).collect();

    let several = io.inputs.len() > 1;
    if let (true, Some(dir)) = (several, &io.output) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    for (path, result) in io.inputs.iter().zip(results) {
        let (out, log) = result?;
        write_log(stderr, &log);
        match (&io.output, several) {
            (Some(dir), true) => {
                let stem = path.file_stem().unwrap_or(path.as_os_str());
                let mut name = stem.to_owned();
                name.push(".out");
                write_atomic(&dir.join(name), &out)?;
            }
            (target, _) => emit(target.as_deref(), &out, stdout)?,
        }
    }
    Ok(())
}

fn write_log(stderr: &mut dyn Write, lines: &[String]) {
    for l in lines {
        let _ = writeln!(stderr, "{l}");
    }
}

fn emit(target: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match target {
        Some(p) => write_atomic(p, text),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(io_err(Path::new("<stdout>"))),
    }
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(text.as_bytes()).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_owned(),
        source: e.error,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("verbchunk").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn builtin_lexicon_is_clean() {
        let (code, out, err) = run_args(&["lexcheck"]);
        assert_eq!(code, 0, "{err}");
        assert!(out.contains("no problems"));
    }

    #[test]
    fn missing_file_is_exit_2() {
        let (code, _, err) = run_args(&["lexcheck", "--lexicon", "/nonexistent/x.lex"]);
        assert_eq!(code, 2);
        assert!(err.contains("/nonexistent/x.lex"));
    }

    #[test]
    fn zero_cycles_rejected() {
        let (code, _, err) = run_args(&["chunk", "--max-cycles", "0"]);
        assert_eq!(code, 2);
        assert!(err.contains("max-cycles"), "{err}");
    }

    #[test]
    fn eval_requires_both_files() {
        let (code, _, _) = run_args(&["eval", "--gold", "x"]);
        assert_eq!(code, 2);
    }
}
