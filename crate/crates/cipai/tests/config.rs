use std::path::{Path, PathBuf};

use cipai::config::EmbeddingInit;
use cipai::{resolve_config, Cli, ExitKind, RunConfig};
use cipai_core::embedding::Strategy;
use clap::Parser;

#[test]
fn defaults_use_the_full_model_dims() {
    let c = RunConfig::default();
    assert_eq!((c.enc_hidden, c.nonrec_dim, c.maxout_dim), (500, 600, 300));
    assert_eq!(c.minibatch_size, 60);
    assert_eq!(c.strategy, EmbeddingInit::Pretrained(Strategy::AdaptV));
    assert!(c.model_config(100, 5).is_ok());
}

#[test]
fn rendered_config_parses_back_to_itself() {
    let c = RunConfig {
        clip_norm: Some(5.0),
        strategy: EmbeddingInit::Random,
        epsilon: 1e-8,
        ..RunConfig::default()
    };
    let text = c.render();
    assert_eq!(text.lines().count(), RunConfig::KEYS.len());
    let mut back = RunConfig::default();
    back.apply_text(&text, None, "rendered").unwrap();
    assert_eq!(back, c);
}

#[test]
fn file_lines_comments_and_errors() {
    let mut c = RunConfig::default();
    c.apply_text(
        "# comment\n\nmax_epochs = 7  # trailing\nclip_norm = none\n",
        None,
        "f",
    )
    .unwrap();
    assert_eq!(c.max_epochs, 7);
    assert_eq!(c.clip_norm, None);
    for bad in [
        "max_epochs 7",
        "nope = 1",
        "max_epochs = -1",
        "rho = inf",
        "strategy = sometimes",
    ] {
        let e = RunConfig::default().apply_text(bad, None, "f").unwrap_err();
        assert_eq!(e.kind, ExitKind::Usage, "{bad}");
        assert!(e.to_string().starts_with("config: f:1:"), "{e}");
    }
}

#[test]
fn relative_paths_in_a_file_resolve_against_its_directory() {
    let mut c = RunConfig::default();
    c.apply_text(
        "corpus = poems.txt\nvocab = /abs/v.txt\n",
        Some(Path::new("/exp")),
        "f",
    )
    .unwrap();
    assert_eq!(c.corpus, PathBuf::from("/exp/poems.txt"));
    assert_eq!(c.vocab, PathBuf::from("/abs/v.txt"));
}

#[test]
fn flags_win_over_set_and_set_wins_over_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.conf");
    std::fs::write(&file, "max_epochs = 3\nminibatch_size = 4\nn_best = 2\n").unwrap();
    let f = file.to_str().unwrap();
    let cli = Cli::parse_from([
        "cipai",
        "train",
        "--config",
        f,
        "--set",
        "max_epochs=5",
        "--set",
        "minibatch_size=9",
        "--max-epochs",
        "8",
    ]);
    let c = resolve_config(&cli).unwrap();
    assert_eq!((c.max_epochs, c.minibatch_size, c.n_best), (8, 9, 2));
    let cli = Cli::parse_from([
        "cipai", "generate", "--cue", "x", "--tune", "y", "--config", f, "--n-best", "6",
    ]);
    assert_eq!(resolve_config(&cli).unwrap().n_best, 6);
}

#[test]
fn inconsistent_dims_are_a_config_error() {
    let c = RunConfig {
        nonrec_dim: 601,
        ..RunConfig::default()
    };
    let e = c.model_config(100, 5).unwrap_err();
    assert_eq!(e.kind, ExitKind::Usage);
    assert_eq!(e.module, "config");
}
