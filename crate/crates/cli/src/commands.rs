use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rxndp_core::backend::{Backend, HttpBackend, OracleBackend, Recorder, ReplayBackend};
use rxndp_core::corpus::load_corpus;
use rxndp_core::detector::{detections_to_json, evaluate_detector, BlobDetector, Detections, Detector, FileDetector, HttpDetector};
use rxndp_core::harness::{
    emit_report, evaluate_records, latest_records, load_records, report_markdown, run_ablation, run_ocr, run_pipeline, run_vqa, AblationMode,
    Aggregation, DirImages, ImageSource, PredictionStore, ReportRow, RunConfig,
};
use rxndp_core::metrics::macro_average;
use rxndp_core::prompts::{build_prompt, template_hash};
use rxndp_core::render::{encode_png, render_visual_prompt};
use rxndp_core::synthgen::{generate_corpus, write_corpus};
use rxndp_core::vqa::VqaQuestion;
use rxndp_core::{AnnotatedDiagram, MatchMode, PromptKind};

use crate::config::Config;
use crate::{CliError, Command, CorpusArgs, PromptAction, RunArgs};

fn run_err(e: impl ToString) -> CliError {
    CliError::Run(e.to_string())
}

fn load(args: &CorpusArgs) -> Result<(Vec<AnnotatedDiagram>, DirImages), CliError> {
    let corpus = load_corpus(&args.corpus, args.format).map_err(|e| CliError::Corpus(e.to_string()))?;
    let root = args.corpus.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((corpus, DirImages { root }))
}

fn make_detector(spec: &str, config: &Config) -> Result<Box<dyn Detector>, CliError> {
    match spec.split_once(':') {
        None if spec == "blob" => Ok(Box::new(BlobDetector { params: config.blob })),
        Some(("file", path)) => Ok(Box::new(FileDetector::load(Path::new(path)).map_err(|e| CliError::Config(e.to_string()))?)),
        Some(("http", url)) => Ok(Box::new(HttpDetector { url: url.to_string() })),
        _ => Err(CliError::Config(format!("unknown detector '{spec}' (expected blob, file:PATH or http:URL)"))),
    }
}

fn make_backend(spec: &str, corpus: &[AnnotatedDiagram], config: &Config, workers: usize) -> Result<Box<dyn Backend>, CliError> {
    match spec.split_once(':') {
        None if spec == "oracle" => Ok(Box::new(OracleBackend::new(corpus, config.noise))),
        None if spec == "http" => Ok(Box::new(HttpBackend::new(config.http.to_http_config(workers)?))),
        Some(("replay", path)) => Ok(Box::new(ReplayBackend::load(Path::new(path)).map_err(|e| CliError::Config(e.to_string()))?)),
        _ => Err(CliError::Config(format!("unknown backend '{spec}' (expected oracle, replay:PATH or http)"))),
    }
}

/// Backend, optionally recording to a transcript.
fn with_recorder<T>(backend: Box<dyn Backend>, record: Option<&Path>, f: impl FnOnce(&dyn Backend) -> Result<T, CliError>) -> Result<T, CliError> {
    match record {
        None => f(&backend),
        Some(path) => {
            let rec = Recorder::new(backend);
            let out = f(&rec);
            rec.save(path).map_err(|e| run_err(format!("{}: {e}", path.display())))?;
            println!("recorded {} exchanges to {}", rec.entries().len(), path.display());
            out
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| run_err(format!("{}: {e}", dir.display())))
}

fn write_json<T: serde::Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text).map_err(|e| run_err(format!("{}: {e}", path.display())))
}

fn print_failures(failures: &BTreeMap<String, usize>) {
    for (label, n) in failures {
        println!("  failed ({label}): {n}");
    }
}

pub fn dispatch(cli: crate::Cli) -> Result<(), CliError> {
    let config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate { seed, per_layout, out } => {
            let corpus = generate_corpus(seed, per_layout, &config.synth).map_err(|e| CliError::Config(e.to_string()))?;
            let manifest = write_corpus(&corpus, &out).map_err(run_err)?;
            println!("wrote {} diagrams to {} (manifest {})", corpus.len(), out.display(), manifest.hash);
        }
        Command::Detect { corpus, detector, out } => {
            let (diagrams, images) = load(&corpus)?;
            let det = make_detector(&detector, &config)?;
            let mut detections = Detections::new();
            for d in &diagrams {
                let img = images.image(d).map_err(|e| CliError::Corpus(e.to_string()))?;
                detections.insert(d.id().to_string(), det.detect(d.id(), &img).map_err(run_err)?);
            }
            if let Some(path) = out {
                fs::write(&path, detections_to_json(&detections)).map_err(|e| run_err(format!("{}: {e}", path.display())))?;
            }
            let c = evaluate_detector(&diagrams, &detections);
            println!("detector {}: P {:.3} R {:.3} F1 {:.3} ({} predicted, {} ground truth)", det.name(), c.precision(), c.recall(), c.f1(), c.n_pred, c.n_gt);
        }
        Command::Annotate { corpus, boxes, detector, out } => {
            let (diagrams, images) = load(&corpus)?;
            let det = make_detector(&detector, &config)?;
            create_dir(&out)?;
            let mut maps: BTreeMap<String, Vec<[f64; 4]>> = BTreeMap::new();
            for d in &diagrams {
                let img = images.image(d).map_err(CliError::Corpus)?;
                let b = match boxes {
                    rxndp_core::harness::BoxSource::Gt => d.molecules.clone(),
                    rxndp_core::harness::BoxSource::Detected => det.detect(d.id(), &img).map_err(run_err)?,
                };
                let vp = render_visual_prompt(&img, &b, &config.style).map_err(run_err)?;
                let name = Path::new(d.id()).file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| d.id().to_string());
                let stem = name.rsplit_once('.').map(|(s, _)| s.to_string()).unwrap_or(name);
                let path = out.join(format!("{stem}.png"));
                fs::write(&path, encode_png(&vp.image)).map_err(|e| run_err(format!("{}: {e}", path.display())))?;
                maps.insert(d.id().to_string(), vp.index.boxes().iter().map(|b| b.to_array()).collect());
            }
            write_json(&out.join("index_maps.json"), &maps)?;
            println!("annotated {} diagrams into {}", diagrams.len(), out.display());
        }
        Command::Parse { run, boxes } => {
            let (diagrams, images) = load(&run.corpus)?;
            let det = make_detector(&run.detector, &config)?;
            let backend = make_backend(&run.backend, &diagrams, &config, run.workers)?;
            create_dir(&run.out)?;
            let store = PredictionStore::open(&run.out.join("predictions.ndjson")).map_err(run_err)?;
            let cfg = run_config(&run, &config, boxes);
            let result = with_recorder(backend, run.record.as_deref(), |b| run_pipeline(&diagrams, &images, det.as_ref(), b, &cfg, Some(&store)).map_err(map_harness))?;
            println!("config {}: {} records ({} reused) in {}", result.config_hash, result.records.len(), result.reused, store.path().display());
            print_failures(&result.failures());
        }
        Command::Evaluate { corpus, predictions, config_hash, mode, aggregation, label, out } => {
            let (diagrams, _) = load(&corpus)?;
            let all = load_records(&predictions).map_err(run_err)?;
            let hashes: std::collections::BTreeSet<&str> = all.iter().map(|r| r.config_hash.as_str()).collect();
            if config_hash.is_none() && hashes.len() > 1 {
                return Err(CliError::Config(format!("store holds {} configurations; pick one with --config-hash ({})", hashes.len(), hashes.into_iter().collect::<Vec<_>>().join(", "))));
            }
            let records: Vec<_> = latest_records(all, config_hash.as_deref()).into_values().collect();
            let mut rows = Vec::new();
            for kind in mode {
                let (report, per) = evaluate_records(&diagrams, &records, &MatchMode::new(kind));
                if aggregation == Aggregation::Macro {
                    let s = macro_average(&per);
                    println!("{kind} (macro): P {:.1} R {:.1} F1 {:.1}", 100.0 * s.precision, 100.0 * s.recall, 100.0 * s.f1);
                }
                rows.push(ReportRow::new(label.clone(), report));
            }
            print!("{}", report_markdown(&rows));
            if let Some(dir) = out {
                create_dir(&dir)?;
                write_json(&dir.join("results.json"), &rows)?;
            }
        }
        Command::Ablate { run, mode } => {
            let (diagrams, images) = load(&run.corpus)?;
            let det = make_detector(&run.detector, &config)?;
            let backend = make_backend(&run.backend, &diagrams, &config, run.workers)?;
            create_dir(&run.out)?;
            let store = PredictionStore::open(&run.out.join("predictions.ndjson")).map_err(run_err)?;
            let cfg = run_config(&run, &config, Default::default());
            let rows = with_recorder(backend, run.record.as_deref(), |b| {
                let mut rows = Vec::new();
                for m in &mode {
                    let res = run_ablation(&diagrams, &images, det.as_ref(), b, *m, &cfg, Some(&store)).map_err(map_harness)?;
                    let label = match m {
                        AblationMode::GtExtraction => format!("{}/{m}", det.name()),
                        _ => format!("{}/{m}", cfg.strategy),
                    };
                    print_failures(&res.failures);
                    rows.push(ReportRow::new(Some(label.clone()), res.soft));
                    rows.push(ReportRow::new(Some(label), res.hybrid));
                }
                Ok(rows)
            })?;
            print!("{}", report_markdown(&rows));
            write_json(&run.out.join("results.json"), &rows)?;
        }
        Command::Vqa { corpus, backend, workers, out } => {
            let (diagrams, images) = load(&corpus)?;
            let b = make_backend(&backend, &diagrams, &config, workers)?;
            let result = run_vqa(&diagrams, &images, b.as_ref(), &VqaQuestion::ALL, config.decode, workers).map_err(map_harness)?;
            create_dir(&out)?;
            write_json(&out.join("vqa_records.json"), &result.records)?;
            write_json(&out.join("vqa_scores.json"), &result.scores)?;
            for (q, s) in &result.scores.per_question {
                println!("{q}: {:.1} ({}/{}, {} undecodable)", s.accuracy, s.correct, s.total, s.undecodable);
            }
            println!("mean: {:.1}", result.scores.mean);
        }
        Command::Ocr { corpus, backend, workers, out } => {
            let (diagrams, images) = load(&corpus)?;
            let b = make_backend(&backend, &diagrams, &config, workers)?;
            let records = run_ocr(&diagrams, &images, b.as_ref(), config.decode, workers).map_err(map_harness)?;
            create_dir(&out)?;
            write_json(&out.join("ocr.json"), &records)?;
            let graphical = records.iter().filter(|r| r.error.is_none() && r.text.is_none()).count();
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            println!("{} regions: {} text, {graphical} structures, {failed} failed", records.len(), records.len() - graphical - failed);
        }
        Command::Report { inputs, format, out } => {
            let mut rows: Vec<ReportRow> = Vec::new();
            for path in &inputs {
                let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                let mut part: Vec<ReportRow> = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                rows.append(&mut part);
            }
            let written: Vec<PathBuf> = emit_report(&rows, &out, &format).map_err(map_harness)?;
            for p in written {
                println!("wrote {}", p.display());
            }
        }
        Command::Prompt { action } => match action {
            PromptAction::Show { kind } => print!("{}", build_prompt(kind)),
            PromptAction::List => {
                for k in PromptKind::ALL {
                    println!("{k}\t{}", template_hash(k));
                }
            }
        },
    }
    Ok(())
}

fn run_config(run: &RunArgs, config: &Config, boxes: rxndp_core::harness::BoxSource) -> RunConfig {
    RunConfig { strategy: run.strategy, boxes, style: config.style.clone(), decode: config.decode, workers: run.workers }
}

fn map_harness(e: rxndp_core::harness::HarnessError) -> CliError {
    match e {
        rxndp_core::harness::HarnessError::Config(m) => CliError::Config(m),
        other => run_err(other),
    }
}
