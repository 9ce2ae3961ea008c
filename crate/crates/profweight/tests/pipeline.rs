//! End-to-end pipeline tests: chaining the CLI subcommands reproduces
//! `run`'s artifacts byte for byte, and the binary maps error classes to
//! the documented exit codes.

use std::path::Path;
use std::process::Command;

use profweight::experiment::{
    DatasetSource, ErrorEvalSplit, ExperimentConfig, NamedSimpleSpec, SchemeName,
};
use profweight::numerics::SgdConfig;
use profweight::simple::SimpleModelSpec;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_profweight"))
}

#[allow(clippy::field_reassign_with_default)]
fn tiny_config(out: &Path) -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.dataset = DatasetSource::Synthetic {
        m: 500,
        noise_rate: 0.3,
        seed: 5,
    };
    config.complex.sgd.epochs = 25;
    config.probes.sgd.epochs = 20;
    config.schemes = vec![
        SchemeName::Standard,
        SchemeName::Confweight,
        SchemeName::Distillation,
        SchemeName::ProfweightAuc,
        SchemeName::ProfweightNn,
    ];
    config.lowest_unit = Some("h2".to_string());
    config.simple_models = vec![
        NamedSimpleSpec {
            name: "tree".into(),
            spec: SimpleModelSpec::tree(2),
        },
        NamedSimpleSpec {
            name: "logistic".into(),
            spec: SimpleModelSpec::logistic(SgdConfig {
                learning_rate: 0.05,
                epochs: 30,
                ..SgdConfig::default()
            }),
        },
    ];
    config.weight_net.outer_iterations = 2;
    config.weight_net.w_sgd.epochs = 20;
    config.seeds = vec![1];
    config.error_eval = ErrorEvalSplit::Validation;
    config.output_dir = out.to_path_buf();
    config
}

fn write_config(config: &ExperimentConfig, dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, config.to_toml().unwrap()).unwrap();
    path
}

#[test]
fn chained_subcommands_reproduce_run_artifacts_exactly() {
    let base = tempfile::tempdir().unwrap();
    let dir_run = base.path().join("via-run");
    let dir_chain = base.path().join("via-chain");

    let config = tiny_config(&dir_run);
    let config_path = write_config(&config, base.path());

    let status = binary()
        .args(["run", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&dir_run)
        .status()
        .unwrap();
    assert!(status.success());

    for sub in ["train-complex", "train-probes", "compute-weights", "train-simple"] {
        let status = binary()
            .args([sub, "--config"])
            .arg(&config_path)
            .arg("--out")
            .arg(&dir_chain)
            .status()
            .unwrap();
        assert!(status.success(), "{sub} failed");
    }

    // Every artifact produced by the stages must match the run byte for
    // byte (the run additionally writes reports).
    let seed_run = dir_run.join("seed-1");
    let seed_chain = dir_chain.join("seed-1");
    let mut names: Vec<String> = std::fs::read_dir(&seed_chain)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.contains(&"model.json".to_string()));
    assert!(names.contains(&"probes.json".to_string()));
    assert!(names.iter().any(|n| n.starts_with("weights-")));
    assert!(names.iter().any(|n| n.starts_with("simple-")));
    for name in &names {
        let a = std::fs::read(seed_run.join(name)).unwrap();
        let b = std::fs::read(seed_chain.join(name)).unwrap();
        assert_eq!(a, b, "artifact {name} differs between run and chained stages");
    }

    // evaluate and report both succeed on the produced artifacts.
    let status = binary()
        .args(["evaluate", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&dir_chain)
        .status()
        .unwrap();
    assert!(status.success());
    let output = binary()
        .args(["report", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&dir_run)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("aggregates verified"));
}

#[test]
fn print_config_round_trips_through_the_parser() {
    let output = binary().arg("print-config").output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let parsed = ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(parsed, ExperimentConfig::default());
}

#[test]
fn theory_check_exits_zero() {
    let status = binary().arg("theory-check").status().unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "this is not [valid toml").unwrap();
    let status = binary()
        .args(["run", "--config"])
        .arg(&bad)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Structurally valid TOML that violates config invariants.
    let mut config = tiny_config(dir.path());
    config.seeds.clear();
    let path = dir.path().join("empty-seeds.toml");
    std::fs::write(&path, toml::to_string(&config).unwrap()).unwrap();
    let status = binary()
        .args(["run", "--config"])
        .arg(&path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn missing_artifacts_exit_3_and_name_the_producer() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(&dir.path().join("never-created"));
    let config_path = write_config(&config, dir.path());
    let output = binary()
        .args(["train-probes", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("train-complex"),
        "error should name the producing subcommand, got: {stderr}"
    );
}

#[test]
fn oversized_alpha_exits_with_empty_probe_set_code_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut config = tiny_config(&out);
    config.schemes = vec![SchemeName::ProfweightAuc];
    config.alpha = 0.9;
    config.lowest_unit = None;
    let config_path = write_config(&config, dir.path());

    for sub in ["train-complex", "train-probes"] {
        let status = binary()
            .args([sub, "--config"])
            .arg(&config_path)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let output = binary()
        .args(["compute-weights", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("lower alpha"), "got: {stderr}");
}

#[test]
fn seed_and_scheme_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut config = tiny_config(&out);
    config.seeds = vec![1, 2, 3];
    let config_path = write_config(&config, dir.path());
    let status = binary()
        .args(["run", "--config"])
        .arg(&config_path)
        .args(["--seed", "2", "--scheme", "standard"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("seed-2").exists());
    assert!(!out.join("seed-1").exists());
    let report = profweight::experiment::ExperimentReport::load(&out.join("report.json")).unwrap();
    assert_eq!(report.seeds.len(), 1);
    assert!(report
        .seeds[0]
        .cells
        .iter()
        .all(|c| c.scheme == SchemeName::Standard));
}
