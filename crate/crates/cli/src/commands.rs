//! The five subcommands. Each returns a `CliError` whose `exit_code`
//! encodes the failure class; printing is plain text on stdout.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use corpus::{
    build_vocab, load_embeddings, read_conll, read_unlabeled, LabeledSentence, UnlabeledSentence,
};
use cvt_train::{load_checkpoint, tag_sentences, TrainMode};
use eval::{aggregate, significance, EvalReport, Method};
use greenmeter::{read_samples_csv, report, ResourceConfig};

use crate::appconfig::AppConfig;
use crate::error::CliError;
use crate::manifest::RunManifest;

fn open(path: &Path) -> Result<BufReader<fs::File>, CliError> {
    Ok(BufReader::new(
        fs::File::open(path).map_err(CliError::file(path))?,
    ))
}

fn require<'a>(field: &'a Option<PathBuf>, name: &str) -> Result<&'a Path, CliError> {
    field
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("config is missing the {name} path")))
}

fn load_labeled(path: &Path) -> Result<Vec<LabeledSentence>, CliError> {
    Ok(read_conll(open(path)?)?)
}

fn load_unlabeled_file(path: &Path, max: Option<usize>) -> Result<Vec<UnlabeledSentence>, CliError> {
    Ok(read_unlabeled(open(path)?, max.unwrap_or(usize::MAX))?)
}

fn embedding_words(path: &Path) -> Result<std::collections::HashSet<String>, CliError> {
    Ok(corpus::embedding_vocab(open(path)?)?)
}

/// Build vocab files and a corpus summary without training anything.
pub fn preprocess(cfg: &AppConfig) -> Result<(), CliError> {
    let labeled = load_labeled(require(&cfg.labeled, "labeled")?)?;
    let unlabeled = match &cfg.unlabeled {
        Some(p) => load_unlabeled_file(p, cfg.max_unlabeled)?,
        None => Vec::new(),
    };
    let emb_vocab = match &cfg.embeddings {
        Some(p) => embedding_words(p)?,
        None => Default::default(),
    };
    let vocab = build_vocab(&labeled, &unlabeled, &emb_vocab, cfg.min_count)?;

    let vocab_dir = cfg.output_dir.join("vocab");
    fs::create_dir_all(&vocab_dir).map_err(CliError::file(&vocab_dir))?;
    vocab.to_files(&vocab_dir)?;

    let labeled_tokens: usize = labeled.iter().map(|s| s.tokens.len()).sum();
    let unlabeled_tokens: usize = unlabeled.iter().map(|s| s.tokens.len()).sum();
    let summary = serde_json::json!({
        "labeled_sentences": labeled.len(),
        "labeled_tokens": labeled_tokens,
        "unlabeled_sentences": unlabeled.len(),
        "unlabeled_tokens": unlabeled_tokens,
        "words": vocab.n_words(),
        "chars": vocab.n_chars(),
        "tags": vocab.tags(),
    });
    let path = cfg.output_dir.join("preprocess.json");
    fs::write(&path, serde_json::to_string_pretty(&summary).unwrap())
        .map_err(CliError::file(&path))?;

    println!(
        "{} labeled / {} unlabeled sentences; vocab: {} words, {} chars, {} tags",
        labeled.len(),
        unlabeled.len(),
        vocab.n_words(),
        vocab.n_chars(),
        vocab.n_tags()
    );
    println!("wrote {} and {}", vocab_dir.display(), path.display());
    Ok(())
}

pub fn train(cfg: AppConfig, deterministic: bool) -> Result<(), CliError> {
    let labeled_path = require(&cfg.labeled, "labeled")?.to_path_buf();
    let validation_path = require(&cfg.validation, "validation")?.to_path_buf();
    let mut inputs = vec![labeled_path.clone(), validation_path.clone()];

    let labeled = load_labeled(&labeled_path)?;
    let validation = load_labeled(&validation_path)?;
    // supervised_only never touches the unlabeled file, even when set.
    let unlabeled = if cfg.train.mode == TrainMode::Cvt {
        let p = require(&cfg.unlabeled, "unlabeled")?.to_path_buf();
        inputs.push(p.clone());
        load_unlabeled_file(&p, cfg.max_unlabeled)?
    } else {
        Vec::new()
    };

    let emb_vocab = match &cfg.embeddings {
        Some(p) => {
            inputs.push(p.clone());
            embedding_words(p)?
        }
        None => Default::default(),
    };
    let vocab = build_vocab(&labeled, &unlabeled, &emb_vocab, cfg.min_count)?;
    let embeddings = match &cfg.embeddings {
        Some(p) => Some(load_embeddings(
            open(p)?,
            &vocab,
            cfg.train.encoder.word_dim,
            cfg.train.seed,
        )?),
        None => None,
    };

    let out_dir = cfg.output_dir.clone();
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let mut manifest = RunManifest::start("train", cfg.clone(), deterministic, &input_refs)?;
    manifest.write(&out_dir)?;

    let report = cvt_train::train(
        &labeled,
        &unlabeled,
        &validation,
        &vocab,
        embeddings.as_ref(),
        &cfg.train,
        &out_dir,
    )?;
    manifest.finish(&out_dir)?;

    println!(
        "trained {} steps ({}){}",
        report.steps,
        match cfg.train.mode {
            TrainMode::Cvt => "cvt",
            TrainMode::SupervisedOnly => "supervised_only",
        },
        if report.stopped_early {
            ", stopped early"
        } else {
            ""
        }
    );
    if let Some(best) = report.best_f1 {
        println!("best validation F1 {best:.2}");
    }
    println!("final validation F1 {:.2}", report.final_f1);
    println!(
        "checkpoints: {} (best), {} (final)",
        report.best_dir.display(),
        report.final_dir.display()
    );
    Ok(())
}

pub fn tag(checkpoint: &Path, input: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let loaded = load_checkpoint(checkpoint)?;
    let sentences = load_unlabeled_file(input, None)?;
    let tags = tag_sentences(&loaded.model, &loaded.store, &loaded.vocab, &sentences, 64)?;

    let mut text = String::new();
    for (sent, sent_tags) in sentences.iter().zip(&tags) {
        for (tok, tag) in sent.tokens.iter().zip(sent_tags) {
            text.push_str(tok);
            text.push(' ');
            text.push_str(tag);
            text.push('\n');
        }
        text.push('\n');
    }
    match output {
        Some(p) => fs::write(p, text).map_err(CliError::file(p))?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn eval_files(
    pred_path: &Path,
    gold_path: &Path,
    report_out: Option<&Path>,
) -> Result<(), CliError> {
    let pred = load_labeled(pred_path)?;
    let gold = load_labeled(gold_path)?;
    if pred.len() != gold.len() {
        return Err(CliError::Data(format!(
            "{} has {} sentences but {} has {}",
            pred_path.display(),
            pred.len(),
            gold_path.display(),
            gold.len()
        )));
    }
    for (i, (p, g)) in pred.iter().zip(&gold).enumerate() {
        if p.tokens != g.tokens {
            return Err(CliError::Data(format!(
                "sentence {}: tokens differ between {} and {}",
                i + 1,
                pred_path.display(),
                gold_path.display()
            )));
        }
    }
    let pred_tags: Vec<Vec<String>> = pred.into_iter().map(|s| s.tags).collect();
    let gold_tags: Vec<Vec<String>> = gold.into_iter().map(|s| s.tags).collect();
    let report = eval::score(&pred_tags, &gold_tags)?;
    print!("{}", report.render());
    if let Some(p) = report_out {
        let json = serde_json::to_string_pretty(&report).unwrap();
        fs::write(p, json).map_err(CliError::file(p))?;
        println!("report written to {}", p.display());
    }
    Ok(())
}

fn read_f1s(paths: &[PathBuf]) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let text = fs::read_to_string(p).map_err(CliError::file(p))?;
        let report: EvalReport = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        out.push(report.overall.f1());
    }
    Ok(out)
}

/// Aggregate run reports into mean±std, optionally comparing against a
/// baseline set with a significance test.
pub fn eval_runs(
    runs: &[PathBuf],
    baseline: &[PathBuf],
    method: Method,
    paired: bool,
    seed: u64,
) -> Result<(), CliError> {
    let f1s = read_f1s(runs)?;
    let agg = aggregate(&f1s)?;
    match agg.std {
        Some(std) => println!("runs: {:.2}±{:.2} (n={})", agg.mean, std, agg.runs.len()),
        None => println!("runs: {:.2} (n={})", agg.mean, agg.runs.len()),
    }
    if baseline.is_empty() {
        return Ok(());
    }
    let base = read_f1s(baseline)?;
    let bagg = aggregate(&base)?;
    match bagg.std {
        Some(std) => println!("baseline: {:.2}±{:.2} (n={})", bagg.mean, std, bagg.runs.len()),
        None => println!("baseline: {:.2} (n={})", bagg.mean, bagg.runs.len()),
    }
    let result =
        significance(&f1s, &base, method, paired, seed).map_err(|e| CliError::Data(e.to_string()))?;
    let method_name = match result.used {
        Method::WelchT => "welch_t",
        Method::Permutation => "permutation",
    };
    let pairing = if result.paired { "paired" } else { "unpaired" };
    if result.used != result.requested {
        println!("note: zero variance, fell back to the permutation test");
    }
    println!(
        "significance ({method_name}, {pairing}): p = {:.6}",
        result.p_value
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cost_report(
    samples_path: &Path,
    hours: f64,
    hardware: &str,
    pue: Option<f64>,
    co2_factor: Option<f64>,
    usd_per_hour: Option<f64>,
    json_out: Option<&Path>,
) -> Result<(), CliError> {
    let samples = read_samples_csv(open(samples_path)?)?;
    let mut config = ResourceConfig::default();
    if let Some(v) = pue {
        config.pue = v;
    }
    if let Some(v) = co2_factor {
        config.co2_lbs_per_kwh = v;
    }
    if let Some(v) = usd_per_hour {
        config.usd_per_hour = v;
    }
    let rep = report(&samples, hours, &config)?;
    print!("{}", rep.render_row(hardware));
    if let Some(p) = json_out {
        fs::write(p, rep.to_json()).map_err(CliError::file(p))?;
        println!("report written to {}", p.display());
    }
    Ok(())
}
