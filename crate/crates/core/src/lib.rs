//! Extraction of French finite and infinitive verbal chunks.
//!
//! [`lexicon`] and [`morph`] turn text into annotated tokens, [`engine`]
//! rewrites token sequences with recomposition rules, [`grammar`] ships the
//! default French data and extracts labelled chunks, and [`eval`] scores
//! them against a reference.
//!
//! ```
//! let sentences = verbchunk::grammar::chunk_text("Il la juge .").unwrap();
//! assert_eq!(verbchunk::grammar::render_chunks(&sentences), "Il [la juge|vnfl-I] .\n");
//! ```

pub mod cli;
pub mod engine;
pub mod eval;
pub mod grammar;
pub mod lexicon;
pub mod morph;
