use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use markmt_core::aligner::{
    symmetrize, train_model1_traced, viterbi_align, LexiconTable, ParallelCorpus, Symmetrization, DEFAULT_FLOOR,
};
use markmt_core::backends::{Backend, DictionaryBackend, Glossary, IdentityBackend, RemoteBackend, RemoteConfig};
use markmt_core::evalharness::{
    aggregate_annotations, error_summary, evaluate_run, load_evalset, load_run, make_annotation_batch,
    parse_error_annotations, parse_scores, read_key_file, write_jsonl, BatchOptions, EvalReport, Split,
};
use markmt_core::metrics::{chrf_corpus, corpus_summary, BootstrapConfig, ChrFParams, ScoreSummary};
use markmt_core::pipeline::{AlignmentModel, Pipeline, TranslateOptions};
use markmt_core::segmenter::tokenize;
use serde_json::json;

use crate::{AlignArgs, AnnotateArgs, ChrfArgs, Cli, Command, EvaluateArgs, ServeArgs, TrainAlignArgs, TranslateArgs};

/// One JSON diagnostic line on stderr.
pub fn diag(level: &str, message: &str) {
    emit(&json!({ "level": level, "message": message }));
}

fn emit(value: &serde_json::Value) {
    let _ = writeln!(std::io::stderr().lock(), "{value}");
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("cannot write {}", path.display()))
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("cannot start async runtime")
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Translate(a) => translate(a),
        Command::Chrf(a) => chrf(a),
        Command::TrainAlign(a) => train_align(a),
        Command::Align(a) => align(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Annotate(a) => annotate(a),
        Command::Serve(a) => serve(a),
    }
}

fn load_lexicon(path: &Path) -> Result<LexiconTable> {
    LexiconTable::load_tsv(path, DEFAULT_FLOOR).with_context(|| format!("cannot load lexicon {}", path.display()))
}

fn translate(a: TranslateArgs) -> Result<()> {
    let backend: Arc<dyn Backend> = match a.backend.as_str() {
        "identity" => Arc::new(IdentityBackend),
        "dictionary" => {
            let path = a.dictionary.as_deref().ok_or_else(|| anyhow!("--backend dictionary needs --dictionary FILE"))?;
            Arc::new(
                DictionaryBackend::load_tsv(path, &a.src, &a.tgt)
                    .with_context(|| format!("cannot load dictionary {}", path.display()))?,
            )
        }
        "remote" => {
            let url = a.endpoint.clone().ok_or_else(|| anyhow!("--backend remote needs --endpoint URL"))?;
            let mut config = RemoteConfig::new(url);
            config.api_key_env_name = a.api_key_env.clone();
            Arc::new(RemoteBackend::new(config))
        }
        other => bail!("unknown backend {other}"),
    };
    let mut pipeline = Pipeline::new(backend);
    if let Some(path) = &a.lexicon {
        let reverse = a.reverse_lexicon.as_deref().map(load_lexicon).transpose()?;
        pipeline = pipeline.with_alignment(AlignmentModel {
            forward: Some(load_lexicon(path)?),
            reverse,
        });
    }
    if let Some(path) = &a.glossary {
        let g = Glossary::load_tsv(path).with_context(|| format!("cannot load glossary {}", path.display()))?;
        pipeline = pipeline.with_glossary(g);
    }

    let content = read(&a.input)?;
    let mut options = TranslateOptions::new(a.format.parse().map_err(|e: String| anyhow!(e))?, &a.src, &a.tgt);
    options.domain = a.domain.clone();
    let result = runtime()?
        .block_on(pipeline.translate(&content, &options))
        .with_context(|| format!("cannot translate {}", a.input.display()))?;

    for w in result.warnings() {
        emit(&json!({ "level": "warning", "kind": w.kind, "segment_id": w.segment_id, "marker_id": w.marker_id }));
    }
    for f in &result.term_findings {
        emit(&json!({ "level": "term", "finding": f }));
    }
    match &a.output {
        Some(path) => write(path, &result.content),
        None => {
            print!("{}", result.content);
            Ok(())
        }
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(read(path)?.lines().map(str::to_string).collect())
}

fn chrf(a: ChrfArgs) -> Result<()> {
    let hyp = read_lines(&a.hyp)?;
    let reference = read_lines(&a.reference)?;
    if hyp.len() != reference.len() {
        bail!(
            "{} has {} lines but {} has {}",
            a.hyp.display(),
            hyp.len(),
            a.reference.display(),
            reference.len()
        );
    }
    let pairs: Vec<(&str, &str)> = hyp.iter().map(String::as_str).zip(reference.iter().map(String::as_str)).collect();
    let params = ChrFParams::default();
    let report = chrf_corpus(&pairs, &params)?;
    let config = BootstrapConfig {
        resamples: a.resamples,
        seed: a.seed,
        ..Default::default()
    };
    let summary = corpus_summary(&pairs, &params, &config)?;
    println!("{summary}");
    println!("{}", json!({ "chrf": report, "bootstrap": summary }));
    Ok(())
}

fn train_align(a: TrainAlignArgs) -> Result<()> {
    let corpus = ParallelCorpus::load_tsv(&a.corpus).with_context(|| format!("cannot load {}", a.corpus.display()))?;
    let trained = train_model1_traced(&corpus, a.iters, DEFAULT_FLOOR)?;
    for (i, ll) in trained.log_likelihoods.iter().enumerate() {
        emit(&json!({ "level": "info", "direction": "forward", "iteration": i, "log_likelihood": ll }));
    }
    trained
        .lexicon
        .save_tsv(&a.out)
        .with_context(|| format!("cannot write {}", a.out.display()))?;
    if let Some(path) = &a.reverse_out {
        let reverse = train_model1_traced(&corpus.swapped(), a.iters, DEFAULT_FLOOR)?;
        for (i, ll) in reverse.log_likelihoods.iter().enumerate() {
            emit(&json!({ "level": "info", "direction": "reverse", "iteration": i, "log_likelihood": ll }));
        }
        reverse
            .lexicon
            .save_tsv(path)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn align(a: AlignArgs) -> Result<()> {
    let forward = load_lexicon(&a.lexicon)?;
    let reverse = a.reverse_lexicon.as_deref().map(load_lexicon).transpose()?;
    let method = match a.method.as_str() {
        "union" => Symmetrization::Union,
        _ => Symmetrization::Intersection,
    };
    let src = read_lines(&a.src)?;
    let tgt = read_lines(&a.tgt)?;
    if src.len() != tgt.len() {
        bail!("{} has {} lines but {} has {}", a.src.display(), src.len(), a.tgt.display(), tgt.len());
    }
    let words = |line: &str| tokenize(line).into_iter().map(|t| t.text).collect::<Vec<_>>();
    let mut out = std::io::stdout().lock();
    for (s, t) in src.iter().zip(&tgt) {
        let (s, t) = (words(s), words(t));
        let fwd = viterbi_align(&s, &t, &forward);
        let links = match &reverse {
            Some(rev) => symmetrize(&fwd, &viterbi_align(&t, &s, rev), method)?,
            None => fwd,
        };
        writeln!(out, "{}", links.to_pharaoh())?;
    }
    Ok(())
}

fn parse_split(s: &str) -> Result<Split> {
    s.parse().map_err(|e: String| anyhow!(e))
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let items = load_evalset(&a.evalset)?;
    let split = parse_split(&a.split)?;
    let config = BootstrapConfig {
        resamples: a.resamples,
        seed: a.seed,
        ..Default::default()
    };
    let mut reports: Vec<EvalReport> = Vec::new();
    for path in &a.runs {
        let run = load_run(path)?;
        let report = evaluate_run(&run, &items, split, &config).with_context(|| format!("run {}", path.display()))?;
        reports.push(report);
    }
    let human = match (&a.scores, &a.key) {
        (Some(scores), Some(key)) => {
            let scores = parse_scores(&read(scores)?)?;
            Some(aggregate_annotations(&scores, &read_key_file(key)?)?)
        }
        _ => None,
    };

    let human_for = |system: &str| -> Option<&ScoreSummary> { human.as_ref()?.per_system.get(system) };
    let width = reports.iter().map(|r| r.system_id.len()).max().unwrap_or(6).max(6);
    println!("{:<width$}  {:>12}  {:>12}", "system", "chrF", "human");
    for r in &reports {
        let h = human_for(&r.system_id).map_or("-".to_string(), |s| s.to_string());
        println!("{:<width$}  {:>12}  {:>12}", r.system_id, r.summary.to_string(), h);
    }
    let rows: Vec<_> = reports
        .iter()
        .map(|r| json!({ "report": r, "human": human_for(&r.system_id) }))
        .collect();
    println!("{}", json!({ "split": split, "systems": rows }));
    Ok(())
}

fn annotate(a: AnnotateArgs) -> Result<()> {
    if a.make_batch {
        let evalset = a.evalset.as_deref().expect("required by clap");
        let mut items = load_evalset(evalset)?;
        if let Some(split) = &a.split {
            let split = parse_split(split)?;
            items.retain(|i| i.split == split);
        }
        let runs = a.runs.iter().map(|p| load_run(p)).collect::<Result<Vec<_>, _>>()?;
        let options = BatchOptions {
            redundancy: a.redundancy,
            max_segments: a.max_segments,
        };
        let batch = make_annotation_batch(&runs, &items, &a.annotators, a.seed, options)?;
        write(a.tasks_out.as_deref().expect("required by clap"), &write_jsonl(&batch.tasks))?;
        write(a.key_out.as_deref().expect("required by clap"), &write_jsonl(&batch.key))?;
        let mut load: std::collections::BTreeMap<&str, usize> = a.annotators.iter().map(|x| (x.as_str(), 0)).collect();
        for t in &batch.tasks {
            *load.entry(&t.annotator_id).or_default() += 1;
        }
        println!("{}", json!({ "tasks": batch.tasks.len(), "load": load }));
    } else if a.aggregate {
        let scores = parse_scores(&read(a.scores.as_deref().expect("required by clap"))?)?;
        let key = read_key_file(a.key.as_deref().expect("required by clap"))?;
        let report = aggregate_annotations(&scores, &key)?;
        print!("{report}");
        println!("{}", serde_json::to_string(&report)?);
    } else if let Some(path) = &a.errors {
        let annotations = parse_error_annotations(&read(path)?)?;
        println!("{}", serde_json::to_string(&error_summary(&annotations))?);
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut config = match &a.config {
        Some(path) => markmt_service::ServiceConfig::load(path)?,
        None => markmt_service::ServiceConfig::default(),
    };
    if let Some(port) = a.port {
        let host = config.listen.rsplit_once(':').map_or("127.0.0.1", |(h, _)| h).to_string();
        config.listen = format!("{host}:{port}");
    }
    if let Some(kind) = &a.backend {
        config.select_backend(kind)?;
    }
    tracing_subscriber::fmt()
        .json()
        .with_writer(std::io::stderr)
        .init();
    runtime()?.block_on(markmt_service::serve(&config))?;
    Ok(())
}
