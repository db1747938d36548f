//! Detection and repair of defects in MPI C programs using chat-completion
//! models.
//!
//! The pipeline loads a labeled corpus of MPI programs, assembles prompts
//! that teach the model what MPI bugs look like (few-shot bug references,
//! a step-by-step checklist, optional retrieval augmentation), runs
//! multi-trial studies against any OpenAI- or Ollama-compatible endpoint
//! (or a recorded transcript for offline replay), converts responses into
//! verdicts, and scores them with confusion-matrix statistics. Candidate
//! repairs are validated by compiling, running under a deadlock watchdog,
//! and classifying leak-checker output.
//!
//! The `mpimend` binary ties the pieces together; see the book under
//! `book/` for a guided tour.

pub mod bugrefs;
pub mod commands;
pub mod config;
pub mod corpus;
pub mod judge;
pub mod llm;
pub mod prompts;
pub mod rag;
pub mod repair;
pub mod report;
pub mod stats;

// Book chapters double as doc-tests so the guide can never drift from the
// API. `cargo test --doc` compiles and runs every rust snippet in book/src.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/bug-references.md")]
    mod bug_references {}
    #[doc = include_str!("../../../book/src/prompts.md")]
    mod prompts {}
    #[doc = include_str!("../../../book/src/providers.md")]
    mod providers {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    mod retrieval {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    mod scoring {}
    #[doc = include_str!("../../../book/src/repair.md")]
    mod repair {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
