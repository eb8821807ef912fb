use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sigmalab::acceptance;
use sigmalab::measure::MeasureSpec;
use sigmalab::pathsim::{ModelSpec, Variant};
use sigmalab::scenario::{self, LawSpec, LawTable, Observable, OutputSpec, Scenario, ScenarioSource};
use sigmalab::stoprule::{Detection, RuleSpec};
use sigmalab::{Error, Result};

/// Simulate class-Σ processes, stop them by barrier rules and test the
/// stopped laws against closed forms.
#[derive(Parser)]
#[command(name = "sigmalab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the number of paths.
    #[arg(long)]
    paths: Option<u64>,
    /// Also write the first few full paths under `<out>/paths`.
    #[arg(long)]
    dump_paths: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its stopped records.
    Simulate(Common),
    /// Run a scenario and test it against its law.
    Verify(Common),
    /// Tabulate the embedding barrier of a measure, and test it when a seed is given.
    Embed {
        #[command(flatten)]
        common: Common,
        /// Use the second barrier family, stopping on `X + A`.
        #[arg(long)]
        bar: bool,
    },
    /// Evaluate a law on a grid as `x,value` CSV.
    Laws {
        #[arg(long)]
        config: PathBuf,
        /// Write `laws.csv` here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    Selftest {
        /// Read scenario files from this directory instead of the bundled ones.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

const DUMP_COUNT: u64 = 10;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::ExcessCensoring { .. } => 1,
                _ => 2,
            })
        }
    }
}

fn base_of(path: &Path) -> Option<&Path> {
    path.parent().filter(|p| !p.as_os_str().is_empty())
}

fn load(common: &Common) -> Result<Scenario> {
    let mut s = Scenario::load(&common.config)?;
    s.apply_overrides(common.paths, common.seed)?;
    Ok(s)
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Simulate(c) => {
            let s = load(&c)?;
            let base = base_of(&c.config);
            let records = s.simulate(base)?;
            std::fs::create_dir_all(&c.out)?;
            scenario::write_records(&records, &c.out.join("records.csv"))?;
            if c.dump_paths {
                s.dump_paths(&c.out.join("paths"), DUMP_COUNT, base)?;
            }
            let stopped = records.iter().filter(|r| r.stopped).count();
            println!("{}: {} paths, {stopped} stopped", s.name, records.len());
            Ok(true)
        }
        Command::Verify(c) => {
            let s = load(&c)?;
            verify(&s, &c, base_of(&c.config))
        }
        Command::Embed { common, bar } => embed(&common, bar),
        Command::Laws { config, out } => {
            let text = std::fs::read_to_string(&config)?;
            let table = LawTable::from_json(&text)?;
            let rows = table.rows(base_of(&config))?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    scenario::write_law_rows(&rows, std::fs::File::create(dir.join("laws.csv"))?)?;
                }
                None => scenario::write_law_rows(&rows, std::io::stdout().lock())?,
            }
            Ok(true)
        }
        Command::Selftest { config } => {
            let source = config.map_or(ScenarioSource::Bundled, ScenarioSource::Dir);
            let verdicts = acceptance::run_all(&source, |v| {
                println!("{v}");
                let _ = std::io::stdout().flush();
            })?;
            let passed = verdicts.iter().filter(|v| v.pass).count();
            println!("{passed}/{} criteria pass", verdicts.len());
            Ok(passed == verdicts.len())
        }
    }
}

fn verify(s: &Scenario, c: &Common, base: Option<&Path>) -> Result<bool> {
    let outcome = s.run(base)?;
    std::fs::create_dir_all(&c.out)?;
    s.write_outputs(&outcome, &c.out, base)?;
    if c.dump_paths {
        s.dump_paths(&c.out.join("paths"), DUMP_COUNT, base)?;
    }
    println!("{}", scenario::summary_json(&outcome.summary));
    Ok(outcome.summary.pass)
}

fn embed(c: &Common, bar: bool) -> Result<bool> {
    let text = std::fs::read_to_string(&c.config)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let spec: MeasureSpec = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Config { field: format!("measure {}", e.path()), reason: e.into_inner().to_string() })?;
    let base = base_of(&c.config);
    let m = spec.build(base)?;
    // Barrier levels up to the 99.9% quantile of the target.
    let top = m.quantile(0.999);
    let rows: Vec<(f64, f64)> = (0..=200)
        .map(|i| {
            let x = top * i as f64 / 200.0;
            let v = if bar { m.dual_hl_psi_bar(x) } else { m.dual_hl_psi(x) };
            v.map(|v| (x, v))
        })
        .collect::<Result<_>>()?;
    std::fs::create_dir_all(&c.out)?;
    scenario::write_law_rows(&rows, std::fs::File::create(c.out.join("barrier.csv"))?)?;
    let Some(seed) = c.seed else {
        println!("wrote {}", c.out.join("barrier.csv").display());
        return Ok(true);
    };
    let model = ModelSpec::new(Variant::ReflectedBm, 1e-3);
    let (model, rule) = if bar {
        (model.with_horizon(100.0), RuleSpec::EmbedBar { measure: spec.clone() })
    } else {
        (model.with_u_cap(200.0), RuleSpec::Embed { measure: spec.clone() })
    };
    let mut s = Scenario {
        name: if bar { "embed_bar".into() } else { "embed".into() },
        model,
        rule: Some(rule),
        detection: Detection::Bridge,
        observable: Observable::X,
        law: LawSpec::MeasureSurvival { measure: spec },
        n_paths: 20_000,
        seed,
        alpha: 0.01,
        slack: None,
        censor_limit: sigmalab::verify::CENSOR_LIMIT,
        points: None,
        outputs: vec![
            OutputSpec::SurvivalCsv { path: "survival.csv".into() },
            OutputSpec::SummaryJson { path: "summary.json".into() },
        ],
    };
    s.apply_overrides(c.paths, None)?;
    verify(&s, c, base)
}
