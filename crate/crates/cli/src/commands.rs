use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use imcprompt::checksum::sha256_hex;
use imcprompt::data::{
    dataset_checksum, read_dir, read_table, split, write_dir, Dataset, DatasetPaths, ProteinPanel,
    Schema, SplitAssignment,
};
use imcprompt::evaluation::{
    evaluate_with, predicted_frequencies, run_seed, sweep, EvalConfig, SweepAxis, DEFAULT_K_SWEEP,
};
use imcprompt::prompting::{corpus_stats, write_corpus};
use imcprompt::ranking::{build_index, write_dense_matrix, write_neighbors, MatrixKind};
use imcprompt::sentence::encode_all;
use imcprompt::synth::{generate, SynthConfig};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::manifest::{manifest_for, RunManifest};
use crate::{ClassifierArgs, Command, EvalArgs, MetricArgs, SplitArgs};

/// Invalid flag combination or missing required value.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn io_err(path: &Path, e: std::io::Error) -> imcprompt::Error {
    imcprompt::Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| io_err(path, e))?,
    ))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> anyhow::Result<()> {
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl MetricArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.metric.expression_metric, self.expression_metric);
        set(&mut cfg.metric.spatial_metric, self.spatial_metric);
        set(&mut cfg.metric.neighbor_scope, self.scope);
        set(&mut cfg.metric.backend, self.backend);
        if self.arcsinh_cofactor.is_some() {
            cfg.metric.arcsinh_cofactor = self.arcsinh_cofactor;
        }
    }
}

impl SplitArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.split.fractions, self.fractions);
        set(&mut cfg.split.stratify, self.stratify);
        set(&mut cfg.split.seed, self.seed);
        if self.split.is_some() {
            cfg.paths.split = self.split.clone();
        }
    }
}

impl ClassifierArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.classifier.k, self.k);
        set(&mut cfg.classifier.weighting, self.weighting);
        set(&mut cfg.classifier.combine, self.combine);
        set(&mut cfg.classifier.label_target, self.target);
    }
}

fn dataset_path(flag: &Option<PathBuf>, cfg: &mut RunConfig) -> anyhow::Result<PathBuf> {
    if flag.is_some() {
        cfg.paths.dataset = flag.clone();
    }
    cfg.paths
        .dataset
        .clone()
        .ok_or_else(|| usage("--dataset is required (flag or paths.dataset)"))
}

fn out_path(flag: &Option<PathBuf>, cfg: &mut RunConfig) -> anyhow::Result<PathBuf> {
    if flag.is_some() {
        cfg.paths.out = flag.clone();
    }
    cfg.paths
        .out
        .clone()
        .ok_or_else(|| usage("--out is required (flag or paths.out)"))
}

fn load(dir: &Path) -> anyhow::Result<Dataset> {
    read_dir(dir).with_context(|| format!("loading dataset {}", dir.display()))
}

/// The split named by the config, or a freshly computed one.
fn resolve_split(dataset: &Dataset, cfg: &RunConfig) -> anyhow::Result<SplitAssignment> {
    match &cfg.paths.split {
        Some(path) => {
            let file = File::open(path).map_err(|e| io_err(path, e))?;
            Ok(SplitAssignment::read_csv(dataset, file)?)
        }
        None => Ok(split(
            dataset,
            cfg.split.fractions,
            cfg.split.stratify,
            cfg.split.seed,
        )?),
    }
}

/// Writes to stdout; a closed pipe is not an error.
fn print_text(text: &str) -> anyhow::Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(io_err(Path::new("<stdout>"), e).into())
        }
        _ => Ok(()),
    }
}

fn print_json(value: &impl Serialize) -> anyhow::Result<()> {
    print_text(&(serde_json::to_string_pretty(value)? + "\n"))
}

pub fn dispatch(command: Command, mut cfg: RunConfig) -> anyhow::Result<()> {
    match command {
        Command::Synth(a) => {
            if let Some(p) = &a.preset {
                let seed = cfg.synth.seed;
                cfg.synth = SynthConfig {
                    seed,
                    ..SynthConfig::preset(p)?
                };
            }
            let s = &mut cfg.synth;
            set(&mut s.seed, a.seed);
            set(&mut s.n_samples, a.n_samples);
            set(&mut s.cells_per_sample, a.cells_per_sample);
            set(&mut s.n_types, a.n_types);
            set(&mut s.n_proteins, a.n_proteins);
            set(&mut s.n_statuses, a.n_statuses);
            set(&mut s.separation, a.separation);
            set(&mut s.spatial_clustering, a.spatial_clustering);
            set(&mut s.status_effect, a.status_effect);
            let out = out_path(&a.out.out, &mut cfg)?;
            let ds = generate(&cfg.synth)?;
            write_dir(&ds, &out)?;
            let paths = DatasetPaths::in_dir(&out);
            let details = json!({
                "cells": ds.len(),
                "samples": ds.samples().len(),
                "dataset_checksum": dataset_checksum(&ds),
            });
            RunManifest::new("synth", &cfg, details)
                .output(&paths.table)?
                .output(&paths.panel)?
                .write(&manifest_for(&out, true))
        }
        Command::Ingest(a) => {
            let out = out_path(&a.out.out, &mut cfg)?;
            let panel = ProteinPanel::read(&a.panel)?;
            let schema = match &a.schema {
                Some(p) => Schema::read(p)?,
                None => Schema::default(),
            };
            let ds = read_table(&a.table, panel, &schema)?;
            write_dir(&ds, &out)?;
            let file_sum = |p: &Path| -> anyhow::Result<String> {
                Ok(sha256_hex(&std::fs::read(p).map_err(|e| io_err(p, e))?))
            };
            let paths = DatasetPaths::in_dir(&out);
            let details = json!({
                "cells": ds.len(),
                "samples": ds.samples().len(),
                "proteins": ds.panel().len(),
                "cell_types": ds.type_vocabulary(),
                "statuses": ds.status_vocabulary(),
                "dataset_checksum": dataset_checksum(&ds),
            });
            let mut m = RunManifest::new("ingest", &cfg, details)
                .input("table", file_sum(&a.table)?)
                .input("panel", file_sum(&a.panel)?);
            if let Some(s) = &a.schema {
                m = m.input("schema", file_sum(s)?);
            }
            m.output(&paths.table)?
                .output(&paths.panel)?
                .write(&manifest_for(&out, true))
        }
        Command::Split(a) => {
            let dir = dataset_path(&a.dataset.dataset, &mut cfg)?;
            set(&mut cfg.split.fractions, a.fractions);
            set(&mut cfg.split.stratify, a.stratify);
            set(&mut cfg.split.seed, a.seed);
            let out = out_path(&a.out.out, &mut cfg)?;
            let ds = load(&dir)?;
            let assignment = split(&ds, cfg.split.fractions, cfg.split.stratify, cfg.split.seed)?;
            let w = create(&out)?;
            assignment.write_csv(&ds, w)?;
            let details = json!({
                "counts": assignment.counts(),
                "split_checksum": assignment.checksum(&ds),
            });
            RunManifest::new("split", &cfg, details)
                .input("dataset", dataset_checksum(&ds))
                .output(&out)?
                .write(&manifest_for(&out, false))
        }
        Command::Rank(a) => {
            let dir = dataset_path(&a.dataset.dataset, &mut cfg)?;
            a.metric.apply(&mut cfg);
            let out = out_path(&a.out.out, &mut cfg)?;
            let kind = match a.matrix.as_deref() {
                None => None,
                Some("expression") => Some(MatrixKind::Expression),
                Some("spatial") => Some(MatrixKind::Spatial),
                Some(other) => bail!(usage(format!(
                    "--matrix must be expression or spatial, got `{other}`"
                ))),
            };
            let ds = load(&dir)?;
            let index = build_index(&ds, cfg.metric)?;
            let mut w = create(&out)?;
            write_neighbors(&index, a.top, &mut w)?;
            finish(w, &out)?;
            let details = json!({ "top": a.top, "warnings": index.warnings() });
            let mut m = RunManifest::new("rank", &cfg, details)
                .input("dataset", dataset_checksum(&ds))
                .output(&out)?;
            if let (Some(kind), Some(path)) = (kind, &a.matrix_out) {
                let mut w = create(path)?;
                write_dense_matrix(&index, kind, a.matrix_cap, &mut w)?;
                finish(w, path)?;
                m = m.output(path)?;
            }
            m.write(&manifest_for(&out, false))
        }
        Command::Sentences(a) => {
            let dir = dataset_path(&a.dataset.dataset, &mut cfg)?;
            if a.max_tokens.is_some() {
                cfg.prompt.max_tokens = a.max_tokens;
            }
            let out = out_path(&a.out.out, &mut cfg)?;
            let ds = load(&dir)?;
            let sentences = encode_all(&ds)?;
            let mut w = create(&out)?;
            writeln!(w, "cell_id\tsentence").map_err(|e| io_err(&out, e))?;
            for s in &sentences {
                writeln!(w, "{}\t{}", s.cell_id, s.render(cfg.prompt.max_tokens))
                    .map_err(|e| io_err(&out, e))?;
            }
            finish(w, &out)?;
            RunManifest::new("sentences", &cfg, json!({ "cells": sentences.len() }))
                .input("dataset", dataset_checksum(&ds))
                .output(&out)?
                .write(&manifest_for(&out, false))
        }
        Command::Prompts(a) => {
            let dir = dataset_path(&a.dataset.dataset, &mut cfg)?;
            a.metric.apply(&mut cfg);
            a.split.apply(&mut cfg);
            let p = &mut cfg.prompt;
            set(&mut p.k, a.k);
            set(&mut p.negative_window, a.negative_window);
            set(&mut p.task, a.task);
            if a.no_negative {
                p.include_negative = false;
            }
            if a.max_tokens.is_some() {
                p.max_tokens = a.max_tokens;
            }
            set(&mut p.template_version, a.template_version.clone());
            let out = out_path(&a.out.out, &mut cfg)?;
            let ds = load(&dir)?;
            let assignment = resolve_split(&ds, &cfg)?;
            cfg.prompt.seed = assignment.seed;
            let index = build_index(&ds, cfg.metric)?;
            let sentences = encode_all(&ds)?;
            let mut w = create(&out)?;
            let corpus = write_corpus(&index, &sentences, &assignment, &cfg.prompt, &mut w)?;
            finish(w, &out)?;
            let split_sum = corpus.split_checksum.clone();
            RunManifest::new("prompts", &cfg, corpus)
                .input("dataset", dataset_checksum(&ds))
                .input("split", split_sum)
                .output(&out)?
                .write(&manifest_for(&out, false))
        }
        Command::Classify(a) => {
            let dir = dataset_path(&a.dataset.dataset, &mut cfg)?;
            a.metric.apply(&mut cfg);
            a.split.apply(&mut cfg);
            a.classifier.apply(&mut cfg);
            let out = out_path(&a.out.out, &mut cfg)?;
            if cfg.paths.split.is_some() {
                bail!(usage(
                    "classify computes its own split; use --fractions/--stratify/--seed"
                ));
            }
            let ds = load(&dir)?;
            let index = build_index(&ds, cfg.metric)?;
            let eval = eval_config(&cfg, vec![cfg.split.seed]);
            eval.validate()?;
            let run = run_seed(&index, &eval, cfg.split.seed)?;
            let w = create(&out)?;
            imcprompt::refclass::write_predictions(&run.rows, w)?;
            let report = evaluate_with(&index, &eval)?;
            let details = json!({
                "accuracy": report.accuracy,
                "n_evaluated": report.n_evaluated,
                "n_abstained": report.n_abstained,
                "split_checksum": run.split.checksum(&ds),
            });
            RunManifest::new("classify", &cfg, details)
                .input("dataset", dataset_checksum(&ds))
                .output(&out)?
                .write(&manifest_for(&out, false))
        }
        Command::Eval(a) => {
            let (ds, eval) = prepare_eval(&a, &mut cfg)?;
            let index = build_index(&ds, eval.metric)?;
            let report = evaluate_with(&index, &eval)?;
            let mut outputs = Vec::new();
            if let Some(path) = &a.frequencies {
                let f = predicted_frequencies(&index, &eval)?;
                let mut w = create(path)?;
                writeln!(w, "label\tgroup\tsource\tshare").map_err(|e| io_err(path, e))?;
                for r in f.records() {
                    writeln!(w, "{}\t{}\t{}\t{}", r.label, r.group, r.source, r.share)
                        .map_err(|e| io_err(path, e))?;
                }
                finish(w, path)?;
                outputs.push(path.clone());
            }
            emit("eval", &cfg, &ds, &report, a.out.out.as_deref(), &outputs)
        }
        Command::Sweep(a) => {
            let (ds, eval) = prepare_eval(&a.eval, &mut cfg)?;
            let values = if a.values.is_empty() {
                default_values(a.axis)
            } else {
                a.values.clone()
            };
            let table = sweep(&ds, a.axis, &values, &eval)?;
            let mut outputs = Vec::new();
            if let Some(path) = &a.tsv {
                let mut w = create(path)?;
                w.write_all(table.to_tsv().as_bytes())
                    .map_err(|e| io_err(path, e))?;
                finish(w, path)?;
                outputs.push(path.clone());
            }
            if a.eval.out.out.is_none() {
                print_text(&table.to_tsv())?;
            }
            emit(
                "sweep",
                &cfg,
                &ds,
                &table,
                a.eval.out.out.as_deref(),
                &outputs,
            )
        }
        Command::Stats(a) => {
            let stats = corpus_stats(&a.corpus)?;
            match &a.out.out {
                None => print_json(&stats),
                Some(out) => {
                    let mut w = create(out)?;
                    serde_json::to_writer_pretty(&mut w, &stats)?;
                    w.write_all(b"\n").map_err(|e| io_err(out, e))?;
                    finish(w, out)?;
                    let bytes = std::fs::read(&a.corpus).map_err(|e| io_err(&a.corpus, e))?;
                    RunManifest::new("stats", &cfg, json!({ "records": stats.counts.records }))
                        .input("corpus", sha256_hex(&bytes))
                        .output(out)?
                        .write(&manifest_for(out, false))
                }
            }
        }
    }
}

fn default_values(axis: SweepAxis) -> Vec<String> {
    let v: Vec<String> = match axis {
        SweepAxis::K => DEFAULT_K_SWEEP.iter().map(|k| k.to_string()).collect(),
        SweepAxis::NegativeWindow => ["1-1", "1-3", "4-6", "7-9"].map(String::from).to_vec(),
        SweepAxis::ExpressionMetric => ["cosine", "pearson", "negative_euclidean"]
            .map(String::from)
            .to_vec(),
        SweepAxis::SpatialMetric => ["euclidean", "l1", "cosine_distance"]
            .map(String::from)
            .to_vec(),
    };
    v
}

fn eval_config(cfg: &RunConfig, seeds: Vec<u64>) -> EvalConfig {
    EvalConfig {
        metric: cfg.metric,
        classifier: cfg.classifier,
        fractions: cfg.split.fractions,
        stratify: cfg.split.stratify,
        seeds,
        negative_window: cfg.prompt.negative_window,
    }
}

fn prepare_eval(a: &EvalArgs, cfg: &mut RunConfig) -> anyhow::Result<(Dataset, EvalConfig)> {
    let dir = dataset_path(&a.dataset.dataset, cfg)?;
    a.metric.apply(cfg);
    a.classifier.apply(cfg);
    set(&mut cfg.split.fractions, a.fractions);
    set(&mut cfg.split.stratify, a.stratify);
    set(&mut cfg.seeds, a.seeds.clone());
    set(&mut cfg.prompt.negative_window, a.negative_window);
    if a.out.out.is_some() {
        cfg.paths.out = a.out.out.clone();
    }
    let eval = eval_config(cfg, cfg.seeds.clone());
    eval.validate()?;
    Ok((load(&dir)?, eval))
}

/// Writes `value` as JSON to `out` (plus a manifest) or prints it.
fn emit(
    command: &'static str,
    cfg: &RunConfig,
    ds: &Dataset,
    value: &impl Serialize,
    out: Option<&Path>,
    extra: &[PathBuf],
) -> anyhow::Result<()> {
    let Some(out) = out else {
        if command == "eval" {
            print_json(value)?;
        }
        return Ok(());
    };
    let mut w = create(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| io_err(out, e))?;
    finish(w, out)?;
    let mut m = RunManifest::new(command, cfg, json!({}))
        .input("dataset", dataset_checksum(ds))
        .output(out)?;
    for p in extra {
        m = m.output(p)?;
    }
    m.write(&manifest_for(out, false))
}
