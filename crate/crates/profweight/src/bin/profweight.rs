//! Command-line driver: config-driven experiment runs, the individual
//! pipeline stages, and the theory-check suites.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use profweight::error::{Error, Result};
use profweight::experiment::{self, seed_dir, ExperimentConfig, ExperimentReport, SchemeName};
use profweight::model::LayeredModel;
use profweight::probes::load_probes;
use profweight::serialize;
use profweight::simple::SimpleModel;
use profweight::theory::{
    bayes_error_discrete, lemma_grid_verify, ratio_sum, theorem1_check, tv_distance,
    DiscreteDistribution,
};

#[derive(Parser)]
#[command(name = "profweight")]
#[command(about = "Improve simple models with probe confidence profiles", long_about = None)]
struct Cli {
    /// Experiment config (TOML). Defaults are printed by `print-config`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides the config's `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Run only this experiment seed instead of the config's seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Run only this scheme (standard, confweight, distillation,
    /// profweight-auc, profweight-nn).
    #[arg(long, global = true)]
    scheme: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full experiment and write report.json / report.txt.
    Run,
    /// Train and freeze the complex model; writes seed-*/model.json.
    TrainComplex,
    /// Train probes on the frozen model; writes seed-*/probes.json.
    TrainProbes,
    /// Compute per-sample weights for each scheme; writes weight CSVs and
    /// prints the e_S / e_u selection table.
    ComputeWeights,
    /// Train simple models from the stored weights; writes simple-*.json.
    TrainSimple,
    /// Evaluate stored simple models on the holdout split.
    Evaluate,
    /// Run the lemma/identity verification suites.
    TheoryCheck {
        /// Emit the reports as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Verify and render a stored report.
    Report,
    /// Print the default config as TOML.
    PrintConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seeds = vec![seed];
    }
    if let Some(scheme) = &cli.scheme {
        config.schemes = vec![SchemeName::parse(scheme)?];
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::PrintConfig => {
            print!("{}", ExperimentConfig::default().to_toml()?);
            Ok(())
        }
        Command::TheoryCheck { json } => theory_check(*json),
        Command::Run => {
            let config = load_config(cli)?;
            let out = config.output_dir.clone();
            let report = experiment::run_experiment(&config, &out)?;
            print!("{}", report.render_text());
            println!("report written to {}", out.join("report.json").display());
            Ok(())
        }
        Command::Report => {
            let config = load_config(cli)?;
            let report = ExperimentReport::load(&config.output_dir.join("report.json"))?;
            print!("{}", report.render_text());
            println!("aggregates verified against per-seed rows");
            Ok(())
        }
        Command::TrainComplex => {
            let config = load_config(cli)?;
            for &seed in &config.seeds {
                let dir = seed_dir(&config.output_dir, seed);
                let (_, splits) = experiment::prepare_data(&config, seed)?;
                let model = experiment::stage_train_complex(&config, seed, &splits, &dir)?;
                println!(
                    "seed {seed}: complex trained, train acc {:.4}, holdout acc {:.4} -> {}",
                    model.train_accuracy().unwrap_or(f64::NAN),
                    model.accuracy_on(&splits.holdout)?,
                    experiment::model_path(&dir).display()
                );
            }
            Ok(())
        }
        Command::TrainProbes => {
            let config = load_config(cli)?;
            for &seed in &config.seeds {
                let dir = seed_dir(&config.output_dir, seed);
                let (_, splits) = experiment::prepare_data(&config, seed)?;
                let model = load_model(&dir)?;
                let probes =
                    experiment::stage_train_probes(&config, seed, &model, &splits, &dir)?;
                println!("seed {seed}: trained {} probes", probes.len());
                for p in &probes {
                    println!(
                        "  {:<10} error {:.4}",
                        p.unit_name,
                        p.error_on_ds.unwrap_or(f64::NAN)
                    );
                }
            }
            Ok(())
        }
        Command::ComputeWeights => {
            let config = load_config(cli)?;
            for &seed in &config.seeds {
                let dir = seed_dir(&config.output_dir, seed);
                let (_, splits) = experiment::prepare_data(&config, seed)?;
                let model = load_model(&dir)?;
                let probes = load_probes(&experiment::probes_path(&dir))?;
                for named in &config.simple_models {
                    for &scheme in &config.schemes {
                        let outcome = experiment::stage_compute_weights(
                            &config, seed, &model, &probes, &splits, scheme, named, &dir,
                        )?;
                        println!(
                            "seed {seed} / {} / {}: mean weight {:.4}",
                            scheme.as_str(),
                            named.name,
                            outcome.weights.mean()
                        );
                        if let (Some(e_s), Some(units)) = (outcome.e_s, &outcome.selected_units) {
                            println!("  e_S = {e_s:.4} (alpha = {})", config.alpha);
                            if let Some(errors) = &outcome.selection_errors {
                                for entry in errors {
                                    let mark = if units.contains(&entry.unit_name) {
                                        "selected"
                                    } else {
                                        ""
                                    };
                                    println!(
                                        "  e_u[{:<10}] = {:.4} {mark}",
                                        entry.unit_name, entry.error
                                    );
                                }
                            }
                            println!("  I = {units:?}");
                        }
                    }
                }
            }
            Ok(())
        }
        Command::TrainSimple => {
            let config = load_config(cli)?;
            for &seed in &config.seeds {
                let dir = seed_dir(&config.output_dir, seed);
                let (_, splits) = experiment::prepare_data(&config, seed)?;
                let model = load_model(&dir)?;
                for named in &config.simple_models {
                    for &scheme in &config.schemes {
                        let weights = load_cell_weights(scheme, named, &splits, &dir)?;
                        let (simple, temperature) = experiment::stage_train_simple(
                            &config, seed, &model, &splits, scheme, named, &weights, &dir,
                        )?;
                        let acc = simple.evaluate(&splits.holdout)?.accuracy;
                        let extra = temperature
                            .map(|t| format!(" (temperature {t})"))
                            .unwrap_or_default();
                        println!(
                            "seed {seed} / {} / {}: holdout acc {acc:.4}{extra}",
                            scheme.as_str(),
                            named.name
                        );
                    }
                }
            }
            Ok(())
        }
        Command::Evaluate => {
            let config = load_config(cli)?;
            for &seed in &config.seeds {
                let dir = seed_dir(&config.output_dir, seed);
                let (_, splits) = experiment::prepare_data(&config, seed)?;
                for named in &config.simple_models {
                    for &scheme in &config.schemes {
                        let path = experiment::simple_model_path(&dir, scheme, &named.name);
                        let simple = SimpleModel::load(&path)?;
                        let report = simple.evaluate(&splits.holdout)?;
                        println!(
                            "seed {seed} / {} / {}: holdout accuracy {:.4}, error {:.4}",
                            scheme.as_str(),
                            named.name,
                            report.accuracy,
                            report.error
                        );
                        println!("  confusion: {:?}", report.confusion);
                    }
                }
            }
            Ok(())
        }
    }
}

fn load_model(dir: &std::path::Path) -> Result<LayeredModel> {
    LayeredModel::load(&experiment::model_path(dir))
}

fn load_cell_weights(
    scheme: SchemeName,
    named: &experiment::NamedSimpleSpec,
    splits: &profweight::data::Splits,
    dir: &std::path::Path,
) -> Result<profweight::weighting::WeightVector> {
    use profweight::weighting::{SchemeTag, WeightVector};
    let tag = match scheme {
        SchemeName::Standard | SchemeName::Distillation => {
            return Ok(WeightVector::uniform(splits.d_s.len()));
        }
        SchemeName::Confweight => SchemeTag::Confweight,
        SchemeName::ProfweightAuc => SchemeTag::ProfweightAuc,
        SchemeName::ProfweightNn => SchemeTag::ProfweightNn,
    };
    WeightVector::load_csv(&experiment::weights_path(dir, scheme, &named.name), tag)
}

const THEORY_SUITE_SEED: u64 = 0x5eed;

/// Run every verification suite; any violation is a theory-violation error
/// (exit code 6).
fn theory_check(as_json: bool) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(THEORY_SUITE_SEED);
    let mut violations = 0usize;

    // Ratio-sum cancellation.
    for n in [2usize, 3, 6] {
        let p = DiscreteDistribution::random_interior(n, &mut rng);
        let r = DiscreteDistribution::random_interior(n, &mut rng);
        let a = ratio_sum(&p, &p, &r)?;
        let b = ratio_sum(&p, &r, &r)?;
        if (a - 1.0).abs() > 1e-12 || (b - 1.0).abs() > 1e-12 {
            violations += 1;
        }
    }
    println!("ratio-sum cancellation: {}", status(violations == 0));

    // Grid verification, n = 2 and n = 3.
    let mut grid_reports = Vec::new();
    let mut grid_violations = 0usize;
    for _ in 0..20 {
        let p = DiscreteDistribution::random_interior(2, &mut rng);
        let r = DiscreteDistribution::random_interior(2, &mut rng);
        let report = lemma_grid_verify(&p, &r, 10_000)?;
        grid_violations += report.violations.len();
        grid_reports.push(report);
    }
    for _ in 0..3 {
        let p = DiscreteDistribution::random_interior(3, &mut rng);
        let r = DiscreteDistribution::random_interior(3, &mut rng);
        let report = lemma_grid_verify(&p, &r, 200)?;
        grid_violations += report.violations.len();
        grid_reports.push(report);
    }
    violations += grid_violations;
    println!(
        "ratio-sum grid verification (20x n=2 @ 1e4, 3x n=3 @ 200): {}",
        status(grid_violations == 0)
    );

    // Bayes error / total variation identity.
    use rand::Rng;
    let mut identity_failures = 0usize;
    for _ in 0..1000 {
        let n = rng.random_range(2..=10);
        let p0 = DiscreteDistribution::random_interior(n, &mut rng);
        let p1 = DiscreteDistribution::random_interior(n, &mut rng);
        let bayes = bayes_error_discrete(&p0, &p1)?;
        let tv = tv_distance(&p0, &p1)?;
        if (bayes - (0.5 - 0.5 * tv)).abs() >= 1e-12 {
            identity_failures += 1;
        }
    }
    violations += identity_failures;
    println!(
        "bayes-error = 1/2 - tv/2 identity (1000 pairs): {}",
        status(identity_failures == 0)
    );

    // Mean-one constraint check: both solution families must appear.
    let p = DiscreteDistribution::new(vec![0.3, 0.7])?;
    let p_m = DiscreteDistribution::new(vec![0.6, 0.4])?;
    let constraint = theorem1_check(&p, &p_m, 10_000)?;
    let families_ok =
        constraint.passed() && constraint.ratio_family > 0 && constraint.unit_family > 0;
    if !families_ok {
        violations += 1;
    }
    println!(
        "mean-one constraint families (ratio: {}, unit: {}): {}",
        constraint.ratio_family,
        constraint.unit_family,
        status(families_ok)
    );

    if as_json {
        let doc = serde_json::json!({
            "grid_reports": grid_reports,
            "constraint_check": constraint,
            "violations": violations,
        });
        println!("{}", serialize::to_json_string(&doc)?);
    }

    if violations > 0 {
        return Err(Error::TheoryViolation {
            violations,
            context: "see suite output above".to_string(),
        });
    }
    println!("all theory checks passed");
    Ok(())
}

fn status(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
