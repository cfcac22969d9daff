use std::fs::File;
use std::io::Write;
use std::time::Instant;

use cipai_core::corpus::{
    build_vocabulary, make_train_pairs, render_iambic, split_holdout, TrainPair,
};
use cipai_core::embedding::{init_embedding, train_skipgram, EmbeddingError};
use cipai_core::evaluation::{build_reference_sets, evaluate_corpus, EvalError};
use cipai_core::generation::{compliance_report, generate, GenerationError};
use cipai_core::seq2seq::{ModelConfig, Seq2SeqModel};
use cipai_core::training::{model_grad_check, train, TrainError};

use crate::config::{EmbeddingInit, RunConfig};
use crate::data::*;
use crate::error::CliError;
use crate::formats::{
    encode_checkpoint, parse_vectors, render_grad_report, render_log_line, render_pairs,
    render_results, render_trace, render_vectors, render_vocab, vectors_to_embedding, Checkpoint,
};

fn io(e: std::io::Error) -> CliError {
    CliError::data("cli", format!("output: {e}"))
}

/// Vocabulary and training pairs from the corpus, after the hold-out split.
pub fn ingest(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    require_exists(&cfg.corpus, "corpus")?;
    require_exists(&cfg.schemas, "corpus")?;
    let corpus = load_corpus(&cfg.corpus)?;
    let registry = load_registry(&cfg.schemas)?;
    let (train_set, test_set) = split_holdout(&corpus, cfg.holdout, cfg.split_seed)
        .map_err(|e| CliError::usage("corpus", e))?;
    let vocab =
        build_vocabulary(&train_set, cfg.min_count).map_err(|e| CliError::data("corpus", e))?;
    let pairs =
        make_train_pairs(&train_set, &vocab, &registry).map_err(|e| CliError::data("corpus", e))?;
    write_file(&cfg.vocab, render_vocab(&vocab).as_bytes(), "corpus")?;
    write_file(&cfg.pairs, render_pairs(&pairs).as_bytes(), "corpus")?;
    writeln!(
        out,
        "ingest: {} iambics, {} held out, {} training pairs, vocabulary {}",
        corpus.len(),
        test_set.len(),
        pairs.len(),
        vocab.size()
    )
    .map_err(io)?;
    writeln!(
        out,
        "wrote {}\nwrote {}",
        cfg.vocab.display(),
        cfg.pairs.display()
    )
    .map_err(io)
}

pub fn pretrain_embeddings(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    require_exists(&cfg.pretrain_corpus, "embedding")?;
    require_exists(&cfg.vocab, "embedding")?;
    let vocab = load_vocab(&cfg.vocab)?;
    let corpus = load_corpus(&cfg.pretrain_corpus)?;
    let seqs: Vec<Vec<usize>> = corpus.iter().map(|p| vocab.encode(&p.text())).collect();
    let (m, report) =
        train_skipgram(&seqs, &vocab, &cfg.skipgram_config()).map_err(|e| match e {
            EmbeddingError::NonFinite { .. } => CliError::numerical("embedding", e),
            EmbeddingError::InvalidConfig { .. } => CliError::usage("embedding", e),
            _ => CliError::data("embedding", e),
        })?;
    for (i, loss) in report.epoch_losses.iter().enumerate() {
        writeln!(
            out,
            "epoch {}\tloss {loss:.6}\tpairs {}",
            i + 1,
            report.pairs_per_epoch
        )
        .map_err(io)?;
    }
    write_file(
        &cfg.vectors,
        render_vectors(&vocab, &m).as_bytes(),
        "embedding",
    )?;
    writeln!(out, "wrote {}", cfg.vectors.display()).map_err(io)
}

fn checkpoint_bytes(
    model: &Seq2SeqModel,
    cfg: &RunConfig,
    vocab: &cipai_core::corpus::Vocabulary,
    tunes: &[String],
) -> Vec<u8> {
    encode_checkpoint(&Checkpoint {
        model: model.clone(),
        vocab: vocab.clone(),
        tunes: tunes.to_vec(),
        seed: cfg.model_seed,
    })
}

pub fn train_model(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    require_exists(&cfg.vocab, "training")?;
    require_exists(&cfg.pairs, "training")?;
    require_exists(&cfg.schemas, "training")?;
    let vocab = load_vocab(&cfg.vocab)?;
    let pairs: Vec<TrainPair> = load_pairs(&cfg.pairs)?;
    let registry = load_registry(&cfg.schemas)?;
    let tunes: Vec<String> = registry.names().map(str::to_owned).collect();
    let mconf = cfg.model_config(vocab.size(), registry.len())?;
    let mut model =
        Seq2SeqModel::new(mconf, cfg.model_seed).map_err(|e| CliError::usage("seq2seq", e))?;
    if let EmbeddingInit::Pretrained(strategy) = cfg.strategy {
        require_exists(&cfg.vectors, "embedding")?;
        let text = read_text(&cfg.vectors, "embedding")?;
        let (dim, rows) = parse_vectors(&text)
            .map_err(|e| CliError::data("embedding", format!("{}: {e}", cfg.vectors.display())))?;
        let (m, missing) = vectors_to_embedding(dim, &rows, &vocab, true);
        init_embedding(&mut model, &m, strategy).map_err(|e| CliError::data("embedding", e))?;
        if !missing.is_empty() {
            writeln!(
                out,
                "embedding: {} vocabulary entries without vectors start at zero",
                missing.len()
            )
            .map_err(io)?;
        }
    }
    let tcfg = cfg.train_config();
    write_file(&cfg.train_log, b"", "training")?;
    let mut log = File::create(&cfg.train_log)
        .map_err(|e| CliError::data("training", format!("{}: {e}", cfg.train_log.display())))?;
    let start = Instant::now();
    let mut side_error: Option<CliError> = None;
    let mut lines = Vec::new();
    let result = train(&mut model, &pairs, &tcfg, |stats, m| {
        if side_error.is_some() {
            return;
        }
        let line = render_log_line(stats, start.elapsed().as_secs_f64());
        if let Err(e) = log.write_all(line.as_bytes()).and_then(|_| log.flush()) {
            side_error = Some(CliError::data(
                "training",
                format!("{}: {e}", cfg.train_log.display()),
            ));
            return;
        }
        lines.push(line);
        if cfg.checkpoint_every > 0 && stats.epoch % cfg.checkpoint_every == 0 {
            let path = cfg
                .checkpoint
                .with_extension(format!("epoch{}.ckpt", stats.epoch));
            if let Err(e) = write_file(&path, &checkpoint_bytes(m, cfg, &vocab, &tunes), "training")
            {
                side_error = Some(e);
            }
        }
    });
    if let Some(e) = side_error {
        return Err(e);
    }
    let report = result.map_err(|e| match e {
        TrainError::NonFinite { .. } => CliError::numerical("training", e),
        TrainError::InvalidConfig(_) => CliError::usage("training", e),
        _ => CliError::data("training", e),
    })?;
    for line in &lines {
        out.write_all(line.as_bytes()).map_err(io)?;
    }
    write_file(
        &cfg.checkpoint,
        &checkpoint_bytes(&model, cfg, &vocab, &tunes),
        "training",
    )?;
    writeln!(
        out,
        "trained {} epochs, final mean loss {:.6}\nwrote {}\nwrote {}",
        report.epochs.len(),
        report.final_loss().unwrap_or(f64::NAN),
        cfg.checkpoint.display(),
        cfg.train_log.display()
    )
    .map_err(io)
}

fn generation_error(e: GenerationError) -> CliError {
    match e {
        GenerationError::UnknownTune { .. }
        | GenerationError::EmptyCue
        | GenerationError::InvalidNBest => CliError::usage("generation", e),
        _ => CliError::data("generation", e),
    }
}

pub fn generate_poem(
    cfg: &RunConfig,
    cue: &str,
    tune: &str,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    for p in [&cfg.checkpoint, &cfg.schemas, &cfg.tones, &cfg.rhymes] {
        require_exists(p, "generation")?;
    }
    let registry = load_registry(&cfg.schemas)?;
    if registry.by_name(tune).is_none() {
        return Err(generation_error(GenerationError::UnknownTune {
            tune: tune.to_owned(),
            registered: registry.names().map(str::to_owned).collect(),
        }));
    }
    let lexicon = load_lexicon(&cfg.tones, &cfg.rhymes)?;
    let ck = load_checkpoint(&cfg.checkpoint, &registry)?;
    let g = generate(
        &ck.model,
        &ck.vocab,
        &registry,
        &lexicon,
        cue,
        tune,
        &cfg.generation_config(),
    )
    .map_err(generation_error)?;
    write_file(
        &cfg.trace,
        render_trace(tune, cue, &g).as_bytes(),
        "generation",
    )?;
    out.write_all(render_iambic(&g.iambic).as_bytes())
        .map_err(io)?;
    if !g.completed {
        writeln!(
            out,
            "# incomplete after {} steps; partial line: {}",
            cfg.max_steps, g.partial
        )
        .map_err(io)?;
    }
    for w in &g.trace.cue_warnings {
        writeln!(
            out,
            "# cue warning: {:?} at position {:?}: expected {}, found {}",
            w.kind, w.position, w.expected, w.found
        )
        .map_err(io)?;
    }
    writeln!(out, "wrote {}", cfg.trace.display()).map_err(io)
}

/// Checks every record of `file` against its tune; compliant iff exit 0.
pub fn validate(
    cfg: &RunConfig,
    file: &std::path::Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    for p in [file, &cfg.schemas, &cfg.tones, &cfg.rhymes] {
        require_exists(p, "corpus")?;
    }
    let poems = load_corpus(file)?;
    let registry = load_registry(&cfg.schemas)?;
    let lexicon = load_lexicon(&cfg.tones, &cfg.rhymes)?;
    let mut failing = 0;
    for (i, poem) in poems.iter().enumerate() {
        let schema = registry.by_name(&poem.tune_name).ok_or_else(|| {
            CliError::data(
                "corpus",
                format!(
                    "record {}: unknown tune '{}'; registered tunes: {}",
                    i + 1,
                    poem.tune_name,
                    registry.names().collect::<Vec<_>>().join(", ")
                ),
            )
        })?;
        let r = compliance_report(poem, schema, &lexicon);
        if r.compliant() {
            writeln!(out, "record {} ({}): compliant", i + 1, poem.tune_name).map_err(io)?;
            continue;
        }
        failing += 1;
        writeln!(
            out,
            "record {} ({}): {} violation(s): tone {}, rhyme {}, length {}, terminator {}, unknown {}",
            i + 1,
            poem.tune_name,
            r.total(),
            r.tone,
            r.rhyme,
            r.length,
            r.terminator,
            r.unknown
        )
        .map_err(io)?;
        for v in &r.violations {
            let pos = v.position.map_or("-".to_owned(), |p| (p + 1).to_string());
            writeln!(
                out,
                "  line {} pos {pos}: {:?}: expected {}, found {}",
                v.line + 1,
                v.kind,
                v.expected,
                v.found
            )
            .map_err(io)?;
        }
    }
    if failing > 0 {
        return Err(CliError::data(
            "corpus",
            format!("{failing} of {} record(s) violate their tune", poems.len()),
        ));
    }
    Ok(())
}

pub fn evaluate(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    for p in [
        &cfg.checkpoint,
        &cfg.corpus,
        &cfg.schemas,
        &cfg.tones,
        &cfg.rhymes,
    ] {
        require_exists(p, "evaluation")?;
    }
    if cfg.holdout == 0 {
        return Err(CliError::usage(
            "evaluation",
            "holdout must be at least 1 to have test cues",
        ));
    }
    let corpus = load_corpus(&cfg.corpus)?;
    let registry = load_registry(&cfg.schemas)?;
    let lexicon = load_lexicon(&cfg.tones, &cfg.rhymes)?;
    let ck = load_checkpoint(&cfg.checkpoint, &registry)?;
    let (train_set, test_set) = split_holdout(&corpus, cfg.holdout, cfg.split_seed)
        .map_err(|e| CliError::usage("evaluation", e))?;
    let refs = build_reference_sets(&test_set, &train_set, cfg.ref_k)
        .map_err(|e| CliError::usage("evaluation", e))?;
    let report = evaluate_corpus(
        &ck.model,
        &ck.vocab,
        &registry,
        &lexicon,
        &test_set,
        &refs,
        &cfg.generation_config(),
    )
    .map_err(|e| match e {
        EvalError::Generation {
            source: GenerationError::UnknownTune { .. },
            ..
        } => CliError::data("evaluation", e),
        EvalError::InvalidK => CliError::usage("evaluation", e),
        _ => CliError::data("evaluation", e),
    })?;
    write_file(
        &cfg.results,
        render_results(&report).as_bytes(),
        "evaluation",
    )?;
    writeln!(
        out,
        "evaluate: mean BLEU-2 {:.4} over {} scored item(s), {} excluded\nwrote {}",
        report.mean_bleu2,
        report.scored,
        report.excluded,
        cfg.results.display()
    )
    .map_err(io)
}

/// Vocabulary 12, encoder 8, decoder 8, non-recurrent 10, maxout 5,
/// attention 6, indicator 6, two tunes.
pub fn grad_check_config() -> ModelConfig {
    ModelConfig::toy(12, 2)
}

pub fn grad_check_pair() -> TrainPair {
    TrainPair {
        cue_ids: vec![0, 4, 5, 6, 10, 1],
        target_ids: vec![7, 8, 11, 1],
        tune_id: 1,
    }
}

pub fn grad_check(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    if cfg.gc_step <= 0.0 || cfg.gc_tolerance <= 0.0 {
        return Err(CliError::usage(
            "autodiff",
            "gc_step and gc_tolerance must be positive",
        ));
    }
    let mut model = Seq2SeqModel::new(grad_check_config(), cfg.gc_seed)
        .map_err(|e| CliError::usage("seq2seq", e))?;
    let report = model_grad_check(
        &mut model,
        &[grad_check_pair()],
        cfg.gc_step,
        cfg.gc_tolerance,
    )
    .map_err(|e| CliError::numerical("autodiff", e))?;
    out.write_all(render_grad_report(&report).as_bytes())
        .map_err(io)?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::numerical(
            "autodiff",
            format!(
                "max relative error {:.3e} exceeds tolerance {:e}",
                report.max_rel_error(),
                report.tolerance
            ),
        ))
    }
}
