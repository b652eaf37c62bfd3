use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use alpods::data::{generate_jittered_iris, load_csv_allow_empty, CsvSchema};
use alpods::error::AlpodsError;
use alpods::eval::{cross_validate, understandability, CvMode};
use alpods::model::{classify_table, population_events, train_model, ModelBundle, PipelineConfig};
use alpods::vispanel::{render_panel, select_panel, PanelSpec};

#[derive(Parser)]
#[command(name = "alpods", version, about = "Explainable subpopulation discovery and case classification")]
struct Cli {
    /// Worker threads (default: all cores); results are thread-count independent
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SchemaArgs {
    /// Name of the case-identifier column
    #[arg(long, default_value = "case_id")]
    case_column: String,
    /// Name of the class-label column
    #[arg(long, default_value = "class")]
    class_column: String,
}

impl SchemaArgs {
    fn schema(&self) -> CsvSchema {
        CsvSchema {
            case_column: self.case_column.clone(),
            class_column: self.class_column.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the jittered-Iris train/test CSV files
    GenIris {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
        /// Output directory for iris_train.csv and iris_test.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write the bundle, rule sheet and JSON descriptions
    Train {
        #[arg(long)]
        data: PathBuf,
        /// JSON pipeline config; CLI flags override file values
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Balanced-sample size per class for DAG growth; 0 disables sampling
        #[arg(long)]
        per_class_events: Option<usize>,
        /// Output bundle path (JSON)
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Classify the cases of a data file with a trained bundle
    Classify {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Emit per-case pro/contra explanations
        #[arg(long)]
        explain: bool,
        /// Write JSON records here instead of plain text to stdout
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Render the differential visualization panel for one population
    Vispanel {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Population id from the rule sheet
        #[arg(long)]
        population: usize,
        /// Explicit pair override, e.g. "FS,SS" (repeatable)
        #[arg(long)]
        pairs: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Run the jittered-Iris benchmark and check its acceptance thresholds
    BenchIris {
        #[arg(long, default_value_t = 50)]
        rounds: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the JSON report here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code_for(err: &AlpodsError) -> u8 {
    match err {
        AlpodsError::Io(_) => 2,
        _ => 1,
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<PipelineConfig, AlpodsError> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

fn run(cli: Cli) -> Result<u8, AlpodsError> {
    match cli.command {
        Command::GenIris { seed, repetitions, out } => {
            let (_, split) = generate_jittered_iris(seed, repetitions, 0.10)?;
            std::fs::create_dir_all(&out)?;
            let train_path = out.join("iris_train.csv");
            let test_path = out.join("iris_test.csv");
            split.train.write_csv_file(&train_path)?;
            split.test.write_csv_file(&test_path)?;
            println!(
                "wrote {} ({} cases) and {} ({} cases)",
                train_path.display(),
                split.train.n_cases(),
                test_path.display(),
                split.test.n_cases()
            );
            Ok(0)
        }
        Command::Train { data, config, seed, per_class_events, out, schema } => {
            let table = load_csv_allow_empty(&data, &schema.schema())?
                .ok_or_else(|| AlpodsError::Input("empty data file".into()))?;
            let mut cfg = load_config(config.as_ref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(p) = per_class_events {
                cfg.per_class_events = if p == 0 { None } else { Some(p) };
            }
            let bundle = train_model(&table, &cfg)?;
            bundle.save(&out)?;
            let sheet_path = out.with_extension("rules.txt");
            let desc_path = out.with_extension("descriptions.json");
            std::fs::write(&sheet_path, bundle.rule_sheet())?;
            std::fs::write(&desc_path, serde_json::to_string_pretty(&bundle.descriptions)?)?;
            print!("{}", bundle.rule_sheet());
            let u = understandability(&bundle.descriptions);
            println!(
                "{} populations, max {} conditions: {}",
                u.num_clusters, u.max_conditions, u.verdict
            );
            Ok(0)
        }
        Command::Classify { bundle, data, explain, out, schema } => {
            let bundle = ModelBundle::load(&bundle)?;
            let table = match load_csv_allow_empty(&data, &schema.schema())? {
                Some(t) => t,
                None => {
                    // empty file classifies nothing
                    if let Some(o) = out {
                        std::fs::write(o, "[]\n")?;
                    }
                    return Ok(0);
                }
            };
            let verdicts = classify_table(&bundle, &table)?;
            if let Some(o) = out {
                std::fs::write(o, serde_json::to_string_pretty(&verdicts)?)?;
            } else {
                for v in &verdicts {
                    if explain {
                        print!("{}", v.explanation.render_text());
                    } else {
                        println!("{}\t{}", v.case_id, v.predicted_class);
                    }
                }
            }
            Ok(0)
        }
        Command::Vispanel { bundle, data, population, pairs, out, seed, schema } => {
            let bundle = ModelBundle::load(&bundle)?;
            let table = load_csv_allow_empty(&data, &schema.schema())?
                .ok_or_else(|| AlpodsError::Input("empty data file".into()))?;
            let pop_rows = population_events(&bundle, &table, population)?;
            let desc = bundle
                .descriptions
                .iter()
                .find(|d| d.id == population)
                .expect("population id validated above");
            // class mask: events of the population's asserted class
            let class_idx = table
                .classes()
                .iter()
                .position(|c| *c == desc.class_label)
                .ok_or_else(|| {
                    AlpodsError::Input(format!(
                        "data has no class {:?}",
                        desc.class_label
                    ))
                })?;
            let mask: Vec<bool> = (0..table.n_events())
                .map(|r| table.class_of_event(r) == class_idx)
                .collect();
            let spec = if pairs.is_empty() {
                select_panel(
                    &table,
                    &mask,
                    bundle.config.sdh_bins,
                    bundle.config.smoothing_passes,
                    bundle.config.max_plots,
                )?
            } else {
                let mut resolved = Vec::new();
                for p in &pairs {
                    let names: Vec<&str> = p.split(',').map(str::trim).collect();
                    if names.len() != 2 {
                        return Err(AlpodsError::Input(format!(
                            "--pairs expects \"X,Y\", got {:?}",
                            p
                        )));
                    }
                    let find = |n: &str| {
                        table.markers().iter().position(|m| m == n).ok_or_else(|| {
                            AlpodsError::Input(format!("unknown marker {:?}", n))
                        })
                    };
                    resolved.push((find(names[0])?, find(names[1])?));
                }
                PanelSpec {
                    scores: vec![0.0; resolved.len()],
                    max_plots: resolved.len(),
                    pairs: resolved,
                }
            };
            let manifest = render_panel(&table, &pop_rows, population, &spec, &out, seed)?;
            let manifest_path = out.join(format!("pop{}_manifest.json", population));
            std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
            println!(
                "wrote {} plot(s) and {}",
                manifest.files.len(),
                manifest_path.display()
            );
            Ok(0)
        }
        Command::BenchIris { rounds, seed, out } => {
            let (full, _) = generate_jittered_iris(seed, 10, 0.10)?;
            let cfg = PipelineConfig {
                per_class_events: None,
                seed,
                ..PipelineConfig::default()
            };
            let report = cross_validate(&full, &cfg, rounds, CvMode::RepeatedSplit, seed)?;
            print!("{}", report.render_text());
            if let Some(o) = out {
                std::fs::write(o, report.to_json()?)?;
            }
            let pass = report.mean_accuracy >= 0.94
                && report.mean_clusters <= 5.0
                && report.max_clusters <= 9
                && report.mean_conditions <= 4.0
                && report.wall_seconds < 60.0;
            if pass {
                println!("acceptance: PASS");
                Ok(0)
            } else {
                println!("acceptance: FAIL");
                Ok(3)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: failed to set thread count: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
