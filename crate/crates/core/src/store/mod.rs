//! On-disk artifacts: NPY matrices with JSON sidecar manifests.

mod artifacts;
mod manifest;
mod matrix;
mod npy;

pub use artifacts::{
    read_embeddings, read_reducer, read_subspace, read_values, write_reducer, write_subspace, write_values,
};
pub use manifest::{
    bytes_digest, file_digest, manifest_path, ArtifactKind, ArtifactManifest, CorpusManifest, EvaluationDraw,
    ReducerMeta, SourceRef, SubspaceMeta, FORMAT_VERSION,
};
pub use matrix::{EmbeddingMatrix, EmbeddingVector};
pub use npy::{
    encode_header, read_matrix, write_matrix, write_matrix_chunked, NpyReader, NpyShape, NpyWriter, DEFAULT_CHUNK_ROWS,
};
