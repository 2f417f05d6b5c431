//! Concept-subspace editions of text-to-image models.
//!
//! Prompt embeddings are restricted to a concept by projecting them onto the
//! leading principal axes of that concept's embeddings. The crate covers the
//! whole offline pipeline: template prompt corpora ([`prompts`]), NPY
//! artifacts ([`store`]), PCA and the global dimensionality reducer
//! ([`spectral`]), subspace construction and projection ([`subspace`]) and
//! embedding-level diagnostics ([`diagnostics`]).

pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod parallel;
pub mod prompts;
pub mod spectral;
pub mod store;
pub mod subspace;

pub use error::{Error, Result};
pub use prompts::{ConceptSpec, PromptCorpus, PromptRecord, TemplateSlot, WordList};
pub use spectral::{build_reducer, compute_spectrum, ReducedSpace, Spectrum};
pub use store::{EmbeddingMatrix, EmbeddingVector};
pub use subspace::{build_subspace, select_k, ConceptSubspace, ProjectionMode, ProjectionResult};
