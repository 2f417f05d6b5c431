use std::path::{Path, PathBuf};

use serde_json::json;

use editioner::diagnostics::{self, Report, COSINE_METRIC};
use editioner::prompts::{self, ConceptSpec, WordList};
use editioner::spectral::{self, ReducedSpace, SecondMoment, Spectrum};
use editioner::store::{
    self, bytes_digest, file_digest, CorpusManifest, EmbeddingMatrix, EmbeddingVector, NpyReader, NpyShape, NpyWriter,
    SourceRef, DEFAULT_CHUNK_ROWS, FORMAT_VERSION,
};
use editioner::subspace::{ConceptSubspace, OffsetUnits, OrthogonalPolicy, ProjectionMode, Provenance, RowEta};
use editioner::{Error, Result};

use super::{
    existing, required, BuildReducerArgs, BuildSubspaceArgs, ChunkArgs, Command, Diagnose, GenPromptsArgs,
    InterpolateArgs, PipelineConfig, ProjectArgs, TraverseArgs,
};

pub fn dispatch(command: Command, cfg: PipelineConfig) -> Result<()> {
    match command {
        Command::GenPrompts(a) => gen_prompts(a, cfg),
        Command::BuildReducer(a) => build_reducer(a, cfg),
        Command::BuildSubspace(a) => build_subspace(a, cfg),
        Command::Project(a) => project(a, cfg),
        Command::Diagnose(a) => diagnose(a.which, cfg),
        Command::Interpolate(a) => interpolate(a, cfg),
        Command::Traverse(a) => traverse(a, cfg),
    }
}

fn chunk_rows(args: &ChunkArgs, cfg: &PipelineConfig) -> Result<usize> {
    match args.chunk_rows.or(cfg.chunk_rows).unwrap_or(DEFAULT_CHUNK_ROWS) {
        0 => Err(Error::Config("chunk rows must be positive".into())),
        n => Ok(n),
    }
}

fn threshold(flag: Option<f64>, cfg: &PipelineConfig) -> Result<f64> {
    let t = flag.or(cfg.threshold).unwrap_or(editioner::subspace::DEFAULT_EVR_THRESHOLD);
    if t > 0.0 && t <= 1.0 {
        Ok(t)
    } else {
        Err(Error::Config(format!("threshold {t} is outside (0, 1]")))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

/// `out/x.npy` + `suffix` → `out/x.<suffix>`
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn gen_prompts(a: GenPromptsArgs, cfg: PipelineConfig) -> Result<()> {
    let out = required(a.out, cfg.corpus.or(cfg.output), "out")?;
    let words = match a.wordlist.or(cfg.wordlist) {
        Some(p) => WordList::load(existing(p)?)?,
        None => WordList::default_table(),
    };
    let concept: Option<ConceptSpec> = a.concept.or(cfg.concept).map(|c| c.parse()).transpose()?;
    let all = prompts::generate_all(&words)?;

    let mut evaluation = None;
    let corpus = match (&concept, a.eval) {
        (None, true) => return Err(Error::Config("--eval needs --concept".into())),
        (None, false) => all,
        (Some(c), false) => prompts::filter_concept(&all, c)?,
        (Some(c), true) => {
            let seed = required(a.seed, cfg.seed, "seed")?;
            let per_category = a.per_category.or(cfg.per_category).unwrap_or(1000);
            evaluation = Some(store::EvaluationDraw { per_category, seed });
            prompts::evaluation_set(&all, c, per_category, seed)?
        }
    };

    let text = corpus.to_text();
    write_text(&out, &text)?;
    let manifest = CorpusManifest {
        kind: "corpus".into(),
        count: corpus.len(),
        wordlist_digest: bytes_digest(words.to_json().as_bytes()),
        concept_slot: concept.as_ref().map(|c| c.slot),
        concept_word: concept.as_ref().map(|c| c.word.clone()),
        evaluation: evaluation.clone(),
        replaced: false,
        digest: bytes_digest(text.as_bytes()),
        format_version: FORMAT_VERSION,
    };
    manifest.write(store::manifest_path(&out))?;
    println!("prompts: {}", corpus.len());
    println!("wrote {}", out.display());

    if let Some(rout) = a.replaced_out {
        let c = concept.ok_or_else(|| Error::Config("--replaced-out needs --concept".into()))?;
        let mut rtext = String::with_capacity(text.len());
        for r in corpus.records() {
            rtext.push_str(&prompts::replaced_prompt(r, &c, &words)?.text);
            rtext.push('\n');
        }
        write_text(&rout, &rtext)?;
        let rmanifest = CorpusManifest { replaced: true, digest: bytes_digest(rtext.as_bytes()), ..manifest };
        rmanifest.write(store::manifest_path(&rout))?;
        println!("wrote {}", rout.display());
    }
    Ok(())
}

/// Spectrum of an NPY file; streamed when the moment matrix route applies.
fn spectrum_of_file(path: &Path, chunk: usize, reducer: Option<&ReducedSpace>) -> Result<Spectrum> {
    let mut reader = NpyReader::open(path)?;
    let NpyShape { rows, cols } = reader.shape();
    let dim = match reducer {
        Some(r) => {
            if r.ambient_dim() != cols {
                return Err(Error::Dim { expected: r.ambient_dim(), actual: cols });
            }
            r.reduced_dim()
        }
        None => cols,
    };
    let next = |reader: &mut NpyReader| -> Result<Option<EmbeddingMatrix>> {
        match reader.read_chunk(chunk)? {
            Some(m) => match reducer {
                Some(r) => r.reduce_matrix(&m).map(Some),
                None => Ok(Some(m)),
            },
            None => Ok(None),
        }
    };
    if dim <= rows {
        let mut acc = SecondMoment::new(dim);
        while let Some(m) = next(&mut reader)? {
            acc.push(&m)?;
        }
        acc.finish()
    } else {
        let mut data = Vec::with_capacity(rows * dim);
        while let Some(m) = next(&mut reader)? {
            data.extend_from_slice(m.as_slice());
        }
        spectral::compute_spectrum(&EmbeddingMatrix::new(rows, dim, data)?, false)
    }
}

fn build_reducer(a: BuildReducerArgs, cfg: PipelineConfig) -> Result<()> {
    let chunk = chunk_rows(&a.chunk, &cfg)?;
    let emb = existing(required(a.embeddings, cfg.embeddings, "embeddings")?)?;
    let target = required(a.target_dim, cfg.target_dim, "target-dim")?;
    let out = required(a.out, cfg.output, "out")?;
    let shape = NpyReader::open(&emb)?.shape();
    let limit = shape.rows.min(shape.cols);
    if target == 0 || target >= limit {
        return Err(Error::Config(format!("target-dim {target} must satisfy 1 <= target-dim < min(m, d) = {limit}")));
    }
    let spectrum = spectrum_of_file(&emb, chunk, None)?;
    let reducer = ReducedSpace::from_spectrum(&spectrum, target)?.with_created_from(vec![SourceRef::of_file(&emb)?]);
    store::write_reducer(&reducer, &out)?;
    store::write_values(spectrum.values(), sibling(&out, "spectrum.npy"))?;
    println!("reduced_dim: {}", reducer.reduced_dim());
    println!("captured_variance_ratio: {:.6}", reducer.captured_variance_ratio());
    println!("wrote {}", out.display());
    Ok(())
}

fn build_subspace(a: BuildSubspaceArgs, cfg: PipelineConfig) -> Result<()> {
    let chunk = chunk_rows(&a.chunk, &cfg)?;
    let threshold = threshold(a.threshold, &cfg)?;
    let emb = existing(required(a.embeddings, cfg.embeddings, "embeddings")?)?;
    let concept: ConceptSpec = required(a.concept, cfg.concept, "concept")?.parse()?;
    let out = required(a.out, cfg.output, "out")?;
    let reducer_path = a.reducer.or(cfg.reducer).map(existing).transpose()?;
    let reducer = reducer_path.as_ref().map(store::read_reducer).transpose()?;

    let spectrum = spectrum_of_file(&emb, chunk, reducer.as_ref())?;
    let mut created_from = vec![SourceRef::of_file(&emb)?];
    let mut provenance = Provenance::default();
    if let (Some(path), Some(r)) = (&reducer_path, &reducer) {
        let src = SourceRef::of_file(path)?;
        provenance.reducer_digest = Some(src.digest.clone());
        provenance.ambient_dim = Some(r.ambient_dim());
        created_from.push(src);
    }
    provenance.created_from = created_from;
    let subspace = ConceptSubspace::from_spectrum(&spectrum, concept, threshold)?.with_provenance(provenance);
    store::write_subspace(&subspace, &out)?;
    store::write_values(spectrum.values(), sibling(&out, "spectrum.npy"))?;
    println!("concept: {}", subspace.concept());
    println!("k: {}", subspace.k());
    println!("cumulative_ratio: {:.6}", subspace.explained_ratio());
    println!("wrote {}", out.display());
    Ok(())
}

/// Loads a subspace and, if given, a reducer that must match it.
fn load_edition(
    subspace: Option<PathBuf>,
    reducer: Option<PathBuf>,
    cfg: &PipelineConfig,
) -> Result<(ConceptSubspace, Option<ReducedSpace>)> {
    let sub_path = existing(required(subspace, cfg.subspace.clone(), "subspace")?)?;
    let subspace = store::read_subspace(&sub_path)?;
    let reducer = match reducer.or(cfg.reducer.clone()) {
        Some(p) => {
            let p = existing(p)?;
            let r = store::read_reducer(&p)?;
            if r.reduced_dim() != subspace.working_dim() {
                return Err(Error::Dim { expected: subspace.working_dim(), actual: r.reduced_dim() });
            }
            if let Some(want) = &subspace.provenance().reducer_digest {
                if *want != file_digest(&p)? {
                    return Err(Error::Integrity(format!(
                        "{} is not the reducer this subspace was built with",
                        p.display()
                    )));
                }
            }
            Some(r)
        }
        None => None,
    };
    Ok((subspace, reducer))
}

fn project(a: ProjectArgs, cfg: PipelineConfig) -> Result<()> {
    let chunk = chunk_rows(&a.chunk, &cfg)?;
    let emb = existing(required(a.embeddings, cfg.embeddings.clone(), "embeddings")?)?;
    let out = required(a.out, cfg.output.clone(), "out")?;
    let mode: ProjectionMode = a.mode.or(cfg.mode.clone()).as_deref().unwrap_or("compensated").parse()?;
    let policy = if a.exclude_orthogonal { OrthogonalPolicy::Exclude } else { OrthogonalPolicy::Zero };
    let (subspace, reducer) = load_edition(a.subspace.clone(), a.reducer.clone(), &cfg)?;

    let mut reader = NpyReader::open(&emb)?;
    let shape = reader.shape();
    let in_dim = reducer.as_ref().map_or(subspace.working_dim(), |r| r.ambient_dim());
    if shape.cols != in_dim {
        return Err(Error::Dim { expected: in_dim, actual: shape.cols });
    }

    let mut etas: Vec<RowEta> = Vec::with_capacity(shape.rows);
    let mut kept: Vec<f32> = Vec::new();
    let mut writer = match policy {
        OrthogonalPolicy::Zero => Some(NpyWriter::create(&out, NpyShape { rows: shape.rows, cols: shape.cols })?),
        OrthogonalPolicy::Exclude => None,
    };
    let mut offset = 0;
    while let Some(m) = reader.read_chunk(chunk)? {
        let working = match &reducer {
            Some(r) => r.reduce_matrix(&m)?,
            None => m,
        };
        let batch = subspace.project_batch(&working, mode, OrthogonalPolicy::Zero)?;
        let projected = match &reducer {
            Some(r) => r.lift_matrix(&batch.matrix)?,
            None => batch.matrix,
        };
        match writer.as_mut() {
            Some(w) => w.write_rows(projected.as_slice())?,
            None => {
                for (row, eta) in projected.rows().zip(&batch.rows) {
                    if eta.eta.is_some() {
                        kept.extend_from_slice(row);
                    }
                }
            }
        }
        offset += working.count();
        etas.extend(batch.rows.into_iter().map(|r| RowEta { row: r.row + offset - working.count(), ..r }));
    }
    match writer {
        Some(w) => w.finish()?,
        None => {
            if kept.is_empty() {
                return Err(Error::Data("every row is orthogonal to the subspace".into()));
            }
            let m = EmbeddingMatrix::new(kept.len() / shape.cols, shape.cols, kept)?;
            store::write_matrix(&m, &out)?;
        }
    }

    let orthogonal: Vec<usize> = etas.iter().filter(|r| r.eta.is_none()).map(|r| r.row).collect();
    let values: Vec<f64> = etas.iter().filter_map(|r| r.eta).collect();
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n).sqrt();
    let report = Report {
        kind: "eta",
        params: json!({
            "embeddings": emb.display().to_string(),
            "subspace": required(a.subspace, cfg.subspace, "subspace")?.display().to_string(),
            "reducer": a.reducer.or(cfg.reducer).map(|p| p.display().to_string()),
            "mode": mode,
            "orthogonal_rows": if policy == OrthogonalPolicy::Zero { "zeroed" } else { "excluded" },
        }),
        rows: Some(serde_json::to_value(&etas).expect("rows serialize")),
        summary: json!({
            "rows": etas.len(),
            "projected": values.len(),
            "orthogonal": orthogonal,
            "mean": mean,
            "std": std,
            "min": values.iter().copied().fold(f64::INFINITY, f64::min),
            "max": values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }),
    };
    let report_path = sibling(&out, "eta.json");
    write_text(&report_path, &report.to_json())?;

    println!("rows: {}", etas.len());
    println!("mode: {}", serde_json::to_value(mode).expect("mode").as_str().unwrap_or_default());
    println!("eta_mean: {mean:.6}");
    println!("wrote {}", out.display());
    println!("wrote {}", report_path.display());
    if !orthogonal.is_empty() {
        let msg = format!("{} row(s) orthogonal to the subspace: {:?}", orthogonal.len(), orthogonal);
        if a.strict {
            return Err(Error::Data(msg));
        }
        eprintln!("warning: {msg}");
    }
    Ok(())
}

fn diagnose(which: Diagnose, cfg: PipelineConfig) -> Result<()> {
    let report = match which {
        Diagnose::Shell { embeddings, histogram, bins, out } => {
            let emb = existing(required(embeddings, cfg.embeddings, "embeddings")?)?;
            let data = store::read_matrix(&emb)?;
            let r = diagnostics::shell_report(&data);
            println!("{:>8} {:>14} {:>14} {:>14} {:>14} {:>10}", "count", "mean", "std", "min", "max", "spread");
            println!(
                "{:>8} {:>14.6} {:>14.6} {:>14.6} {:>14.6} {:>10.6}",
                r.count, r.mean_norm, r.std_norm, r.min_norm, r.max_norm, r.relative_spread
            );
            if let Some(h) = &histogram {
                let bins = diagnostics::histogram(&diagnostics::row_norms(&data), bins)?;
                write_text(h, &diagnostics::histogram_csv(&bins))?;
                println!("wrote {}", h.display());
            }
            let out = required(out, cfg.output, "out")?;
            let report = Report {
                kind: "shell",
                params: json!({ "embeddings": emb.display().to_string() }),
                rows: None,
                summary: serde_json::to_value(&r).expect("report serializes"),
            };
            (out, report)
        }
        Diagnose::Similarity { inputs, projected, replaced, out } => {
            let inputs = existing(required(inputs, None, "inputs")?)?;
            let projected = existing(required(projected, None, "projected")?)?;
            let replaced = existing(required(replaced, None, "replaced")?)?;
            let t = diagnostics::similarity_table(
                &store::read_matrix(&inputs)?,
                &store::read_matrix(&projected)?,
                &store::read_matrix(&replaced)?,
            )?;
            println!("metric: {COSINE_METRIC}");
            println!("{:<22} {:>10} {:>10}", "", "mean", "std");
            println!("{:<22} {:>10.6} {:>10.6}", "d(input, replace)", t.d_input_replace.mean, t.d_input_replace.std);
            println!(
                "{:<22} {:>10.6} {:>10.6}",
                "d(project, replace)", t.d_project_replace.mean, t.d_project_replace.std
            );
            let out = required(out, cfg.output, "out")?;
            let report = Report {
                kind: "similarity",
                params: json!({
                    "metric": COSINE_METRIC,
                    "inputs": inputs.display().to_string(),
                    "projected": projected.display().to_string(),
                    "replaced": replaced.display().to_string(),
                }),
                rows: Some(serde_json::to_value(&t.rows).expect("rows serialize")),
                summary: json!({
                    "d_input_replace": t.d_input_replace,
                    "d_project_replace": t.d_project_replace,
                    "count": t.rows.len(),
                }),
            };
            (out, report)
        }
        Diagnose::Evr { spectrum, out } => {
            let path = existing(required(spectrum, None, "spectrum")?)?;
            let curve = diagnostics::evr_curve(&store::read_values(&path)?)?;
            println!("{:>8} {:>12}", "k", "cumulative");
            for (k, r) in &curve {
                println!("{k:>8} {r:>12.6}");
            }
            let out = required(out, cfg.output, "out")?;
            let at = |t: f64| curve.iter().find(|(_, r)| *r >= t).map(|(k, _)| *k);
            let report = Report {
                kind: "evr",
                params: json!({ "spectrum": path.display().to_string() }),
                rows: Some(json!(curve.iter().map(|(k, r)| json!({ "k": k, "ratio": r })).collect::<Vec<_>>())),
                summary: json!({
                    "components": curve.len(),
                    "k_at_0.95": at(0.95),
                    "k_at_0.999": at(0.999),
                    "final": curve.last().map(|(_, r)| *r),
                }),
            };
            (out, report)
        }
    };
    let (out, report) = report;
    write_text(&out, &report.to_json())?;
    println!("wrote {}", out.display());
    Ok(())
}

/// Row `i` of the embeddings, reduced when a reducer is in play.
fn working_row(data: &EmbeddingMatrix, i: usize, reducer: Option<&ReducedSpace>) -> Result<EmbeddingVector> {
    if i >= data.count() {
        return Err(Error::Config(format!("row {i} out of range for {} rows", data.count())));
    }
    let x = data.row_vector(i);
    match reducer {
        Some(r) => EmbeddingVector::new(r.reduce(x.as_slice())?),
        None => Ok(x),
    }
}

fn write_vectors(vs: &[EmbeddingVector], reducer: Option<&ReducedSpace>, out: &Path) -> Result<()> {
    let lifted = match reducer {
        Some(r) => vs.iter().map(|v| r.lift(v.as_slice())).collect::<Result<Vec<_>>>()?,
        None => vs.to_vec(),
    };
    store::write_matrix(&EmbeddingMatrix::from_rows(&lifted)?, out)?;
    println!("rows: {}", lifted.len());
    println!("wrote {}", out.display());
    Ok(())
}

fn interpolate(a: InterpolateArgs, cfg: PipelineConfig) -> Result<()> {
    let emb = existing(required(a.embeddings, cfg.embeddings.clone(), "embeddings")?)?;
    let out = required(a.out, cfg.output.clone(), "out")?;
    let (subspace, reducer) = load_edition(a.subspace, a.reducer, &cfg)?;
    let data = store::read_matrix(&emb)?;
    let x = working_row(&data, a.from_row, reducer.as_ref())?;
    let y = working_row(&data, a.to_row, reducer.as_ref())?;
    let path = subspace.interpolate(&x, &y, a.steps)?;
    write_vectors(&path, reducer.as_ref(), &out)
}

fn traverse(a: TraverseArgs, cfg: PipelineConfig) -> Result<()> {
    let emb = existing(required(a.embeddings, cfg.embeddings.clone(), "embeddings")?)?;
    let out = required(a.out, cfg.output.clone(), "out")?;
    let (subspace, reducer) = load_edition(a.subspace, a.reducer, &cfg)?;
    let data = store::read_matrix(&emb)?;
    let x = working_row(&data, a.row, reducer.as_ref())?;
    let units = if a.sigma_units { OffsetUnits::StdDev } else { OffsetUnits::Raw };
    let moved = subspace.traverse(&x, a.component, &a.offsets, units)?;
    write_vectors(&moved, reducer.as_ref(), &out)
}
