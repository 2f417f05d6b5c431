use std::path::Path;

use super::manifest::{manifest_path, ArtifactKind, ArtifactManifest, ReducerMeta, SubspaceMeta, FORMAT_VERSION};
use super::npy::{read_matrix, write_matrix, NpyReader};
use super::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::prompts::ConceptSpec;
use crate::spectral::ReducedSpace;
use crate::subspace::{ConceptSubspace, Provenance};

fn expect_kind(m: &ArtifactManifest, kind: ArtifactKind, path: &Path) -> Result<()> {
    if m.kind != kind {
        return Err(Error::format(path, format!("manifest kind is {:?}, expected {kind:?}", m.kind)));
    }
    Ok(())
}

/// Writes the basis as `<path>` and its manifest beside it.
pub fn write_subspace(subspace: &ConceptSubspace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let basis = EmbeddingMatrix::new(subspace.k(), subspace.working_dim(), subspace.basis().to_vec())?;
    write_matrix(&basis, path)?;
    let prov = subspace.provenance();
    let manifest = ArtifactManifest {
        kind: ArtifactKind::Subspace,
        dim: prov.ambient_dim.unwrap_or(subspace.working_dim()),
        reduced_dim: prov.ambient_dim.map(|_| subspace.working_dim()),
        concept_slot: Some(subspace.concept().slot),
        concept_word: Some(subspace.concept().word.clone()),
        created_from: prov.created_from.clone(),
        format_version: FORMAT_VERSION,
        reducer: None,
        subspace: Some(SubspaceMeta {
            k: subspace.k(),
            evr_threshold: subspace.evr_threshold(),
            working_dim: subspace.working_dim(),
            retained_values: subspace.retained_values().to_vec(),
            total_variance: subspace.total_variance(),
            sample_count: subspace.sample_count(),
            reducer_digest: prov.reducer_digest.clone(),
        }),
    };
    manifest.write(manifest_path(path))
}

/// Reads a subspace and re-validates its basis and rank.
pub fn read_subspace(path: impl AsRef<Path>) -> Result<ConceptSubspace> {
    let path = path.as_ref();
    let manifest = ArtifactManifest::read(manifest_path(path))?;
    expect_kind(&manifest, ArtifactKind::Subspace, path)?;
    let meta = manifest.subspace.expect("validated manifest has subspace metadata");
    let basis = read_matrix(path)?;
    if basis.count() != meta.k || basis.dim() != meta.working_dim {
        return Err(Error::Integrity(format!(
            "basis is {} x {}, manifest says {} x {}",
            basis.count(),
            basis.dim(),
            meta.k,
            meta.working_dim
        )));
    }
    let concept =
        ConceptSpec::new(manifest.concept_slot.expect("validated"), manifest.concept_word.expect("validated"));
    let subspace = ConceptSubspace::from_parts(
        basis.into_vec(),
        meta.k,
        meta.working_dim,
        meta.retained_values,
        meta.total_variance,
        meta.evr_threshold,
        concept,
        meta.sample_count,
    )?;
    Ok(subspace.with_provenance(Provenance {
        created_from: manifest.created_from,
        ambient_dim: manifest.reduced_dim.map(|_| manifest.dim),
        reducer_digest: meta.reducer_digest,
    }))
}

pub fn write_reducer(space: &ReducedSpace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let basis = EmbeddingMatrix::new(space.reduced_dim(), space.ambient_dim(), space.basis().to_vec())?;
    write_matrix(&basis, path)?;
    let manifest = ArtifactManifest {
        kind: ArtifactKind::Reducer,
        dim: space.ambient_dim(),
        reduced_dim: Some(space.reduced_dim()),
        concept_slot: None,
        concept_word: None,
        created_from: space.created_from().to_vec(),
        format_version: FORMAT_VERSION,
        reducer: Some(ReducerMeta {
            captured_variance_ratio: space.captured_variance_ratio(),
            retained_values: space.retained_values().to_vec(),
            total_variance: space.total_variance(),
            sample_count: space.sample_count(),
        }),
        subspace: None,
    };
    manifest.write(manifest_path(path))
}

pub fn read_reducer(path: impl AsRef<Path>) -> Result<ReducedSpace> {
    let path = path.as_ref();
    let manifest = ArtifactManifest::read(manifest_path(path))?;
    expect_kind(&manifest, ArtifactKind::Reducer, path)?;
    let meta = manifest.reducer.expect("validated manifest has reducer metadata");
    let reduced = manifest.reduced_dim.expect("validated");
    let basis = read_matrix(path)?;
    if basis.count() != reduced || basis.dim() != manifest.dim {
        return Err(Error::Integrity(format!(
            "basis is {} x {}, manifest says {reduced} x {}",
            basis.count(),
            basis.dim(),
            manifest.dim
        )));
    }
    let space = ReducedSpace::from_parts(
        basis.into_vec(),
        reduced,
        manifest.dim,
        meta.captured_variance_ratio,
        meta.retained_values,
        meta.total_variance,
        meta.sample_count,
    )?;
    Ok(space.with_created_from(manifest.created_from))
}

/// Reads an embedding matrix, taking its source digest from the sidecar
/// manifest when one exists.
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let matrix = read_matrix(path)?;
    let mpath = manifest_path(path);
    if !mpath.exists() {
        return Ok(matrix);
    }
    let manifest = ArtifactManifest::read(&mpath)?;
    if manifest.dim != matrix.dim() && manifest.reduced_dim != Some(matrix.dim()) {
        return Err(Error::Integrity(format!(
            "manifest dim {} does not match matrix dim {}",
            manifest.dim,
            matrix.dim()
        )));
    }
    Ok(match manifest.created_from.first() {
        Some(src) => matrix.with_source_hash(src.digest.clone()),
        None => matrix,
    })
}

/// Writes a vector of values as a `1 × n` matrix.
pub fn write_values(values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let m = EmbeddingMatrix::new(1, values.len(), values.iter().map(|&v| v as f32).collect())?;
    write_matrix(&m, path)
}

/// Reads a `1 × n` or `n × 1` matrix as a flat list of values.
pub fn read_values(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let shape = NpyReader::open(path)?.shape();
    if shape.rows != 1 && shape.cols != 1 {
        return Err(Error::format(path, format!("expected a vector, found {} x {}", shape.rows, shape.cols)));
    }
    Ok(read_matrix(path)?.as_slice().iter().map(|&v| v as f64).collect())
}
