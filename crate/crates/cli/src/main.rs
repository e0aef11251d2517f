use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use prevadim_core::boxcount::dyadic_scales;
use prevadim_core::cantor::CantorConfig;
use prevadim_core::experiment::{
    default_box_scales, default_config, run, Command, ExperimentSpec, Lemma, Measure, EXIT_USAGE,
};
use prevadim_core::{CantorLevels, Error};

#[derive(Parser, Debug)]
#[command(name = "prevadim", version, about = "Witness-function dimension experiments")]
struct Cli {
    /// JSON construction config (`max_depth`, `branching`, `lambda`,
    /// optional `measure_schedule`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker count; results are identical for a fixed value.
    #[arg(long, global = true, default_value_t = 1)]
    partitions: usize,

    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Level table of the construction.
    Construct {
        /// CSV table (`k, count, length, measure`) instead of JSON.
        #[arg(long)]
        report: bool,
    },
    /// Sample a function on a grid (CSV).
    SampleFn {
        #[arg(long, default_value = "witness")]
        function: String,
        #[arg(long, default_value_t = 1025)]
        grid: usize,
        /// Sample `value(x, y)` on an N x N grid instead.
        #[arg(long)]
        surface: Option<usize>,
    },
    /// Box-counting dimension of a graph (CSV).
    Boxdim {
        #[arg(long, default_value = "witness")]
        input: String,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// `2^-a..2^-b`; defaults to the depth-clamped window for witnesses.
        #[arg(long)]
        scales: Option<String>,
        #[arg(long, default_value_t = 16)]
        samples_per_column: usize,
    },
    /// Monte Carlo s-energy of a measure (JSON).
    Energy {
        #[arg(long, value_enum, default_value_t = MeasureArg::Nu)]
        measure: MeasureArg,
        /// f for `--measure graph`; the witness is added automatically.
        #[arg(long, default_value = "zero")]
        function: String,
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 100_000)]
        pairs: usize,
    },
    /// Labelling-averaged graph energy against its bound (JSON report).
    ExpectedEnergy(ExpectedArgs),
    /// Horizon of a surface (CSV).
    Horizon {
        #[arg(long)]
        surface: String,
        #[arg(long, default_value_t = 256)]
        n: usize,
    },
    /// Deviation of the horizon shift identity (JSON).
    HorizonCheck {
        #[arg(long, default_value = "sinxy")]
        surface: String,
        #[arg(long, default_value_t = 256)]
        n: usize,
    },
    /// Numerical check of one inequality (JSON report).
    Verify(VerifyArgs),
    /// Re-run the experiment embedded in an artifact.
    Replay { artifact: PathBuf },
}

#[derive(Args, Debug)]
struct ExpectedArgs {
    #[arg(long, default_value = "zero")]
    function: String,
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    #[arg(long, default_value_t = 200)]
    labelings: usize,
    #[arg(long, default_value_t = 100_000)]
    pairs: usize,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    lemma: LemmaArg,
    /// Single `p,q,r,eps` point for `real-integral`.
    #[arg(long, value_delimiter = ',')]
    point: Option<Vec<f64>>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    labelings: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Function specs, comma separated.
    #[arg(long, value_delimiter = ',')]
    function: Option<Vec<String>>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MeasureArg {
    Uniform,
    Nu,
    Graph,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum LemmaArg {
    RealIntegral,
    Nxy,
    Increment,
    ExpectedEnergy,
    Fubini,
}

struct UsageError(String);

impl From<Error> for UsageError {
    fn from(e: Error) -> Self {
        UsageError(e.to_string())
    }
}

/// `2^-4..2^-14` or `4..14`, dyadic steps.
fn parse_scales(text: &str) -> Result<Vec<f64>, UsageError> {
    let bad = || UsageError(format!("cannot parse scales `{text}`; expected 2^-a..2^-b"));
    let (a, b) = text.split_once("..").ok_or_else(bad)?;
    let exp = |t: &str| {
        let t = t.trim();
        let t = t.strip_prefix("2^-").unwrap_or(t);
        t.parse::<u32>().map_err(|_| bad())
    };
    let (a, b) = (exp(a)?, exp(b)?);
    Ok(dyadic_scales(a.min(b), a.max(b)))
}

fn one<T: Clone>(v: &Option<Vec<T>>, default: T, name: &str) -> Result<T, UsageError> {
    match v.as_deref() {
        None => Ok(default),
        Some([x]) => Ok(x.clone()),
        Some(_) => Err(UsageError(format!("--{name} takes a single value for this lemma"))),
    }
}

fn lemma(a: &VerifyArgs) -> Result<Lemma, UsageError> {
    Ok(match a.lemma {
        LemmaArg::RealIntegral => Lemma::RealIntegral {
            point: match a.point.as_deref() {
                None => None,
                Some(&[p, q, r, e]) => Some([p, q, r, e]),
                Some(_) => return Err(UsageError("--point expects p,q,r,eps".into())),
            },
        },
        LemmaArg::Nxy => Lemma::Nxy {
            pairs: a.pairs.unwrap_or(1_000_000),
            eps: a.eps.clone().unwrap_or_else(|| vec![0.1, 0.5]),
        },
        LemmaArg::Increment => Lemma::Increment {
            pairs: a.pairs.unwrap_or(20),
            labelings: a.labelings.unwrap_or(10_000),
            eps: a.eps.clone().unwrap_or_else(|| vec![0.1, 0.2]),
            functions: a
                .function
                .clone()
                .unwrap_or_else(|| vec!["zero".into(), "linear".into(), "weierstrass".into()]),
        },
        LemmaArg::ExpectedEnergy => Lemma::ExpectedEnergy {
            function: one(&a.function, "zero".into(), "function")?,
            eps: one(&a.eps, 0.25, "eps")?,
            labelings: a.labelings.unwrap_or(200),
            pairs: a.pairs.unwrap_or(100_000),
        },
        LemmaArg::Fubini => Lemma::Fubini {
            function: one(&a.function, "zero".into(), "function")?,
            eps: one(&a.eps, 0.2, "eps")?,
            pairs: a.pairs.unwrap_or(64),
            labelings: a.labelings.unwrap_or(2000),
        },
    })
}

fn read(path: &Path) -> Result<String, UsageError> {
    std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))
}

fn resolve(cli: &Cli) -> Result<ExperimentSpec, UsageError> {
    let config = match &cli.config {
        Some(p) => Some(CantorConfig::from_json(&read(p)?)?),
        None => None,
    };
    let command = match &cli.command {
        Cmd::Construct { report } => Command::Construct { report: *report },
        Cmd::SampleFn { function, grid, surface } => Command::SampleFn {
            function: function.clone(),
            grid: *grid,
            surface: *surface,
        },
        Cmd::Boxdim {
            input,
            dim,
            scales,
            samples_per_column,
        } => {
            let scales = match scales {
                Some(s) => parse_scales(s)?,
                None => {
                    let cfg = match &config {
                        Some(c) => c.clone(),
                        None => default_config(&Command::Construct { report: false })?,
                    };
                    default_box_scales(input, Some(&CantorLevels::new(cfg)?))
                }
            };
            Command::Boxdim {
                input: input.clone(),
                dim: *dim,
                scales,
                samples_per_column: *samples_per_column,
            }
        }
        Cmd::Energy {
            measure,
            function,
            s,
            pairs,
        } => Command::Energy {
            measure: match measure {
                MeasureArg::Uniform => Measure::Uniform,
                MeasureArg::Nu => Measure::Nu,
                MeasureArg::Graph => Measure::Graph,
            },
            function: function.clone(),
            s: *s,
            pairs: *pairs,
        },
        Cmd::ExpectedEnergy(a) => Command::ExpectedEnergy {
            function: a.function.clone(),
            eps: a.eps,
            labelings: a.labelings,
            pairs: a.pairs,
        },
        Cmd::Horizon { surface, n } => Command::Horizon {
            surface: surface.clone(),
            n: *n,
        },
        Cmd::HorizonCheck { surface, n } => Command::HorizonCheck {
            surface: surface.clone(),
            n: *n,
        },
        Cmd::Verify(a) => Command::Verify(lemma(a)?),
        Cmd::Replay { artifact } => {
            let mut spec = ExperimentSpec::from_artifact(&read(artifact)?)?;
            spec.out = cli.out.clone();
            return Ok(spec);
        }
    };
    let config = match config {
        Some(c) => c,
        None => default_config(&command)?,
    };
    Ok(ExperimentSpec {
        command,
        config: Some(config),
        seed: cli.seed,
        partitions: cli.partitions.max(1),
        out: cli.out.clone(),
    })
}

fn execute(cli: &Cli) -> Result<i32, UsageError> {
    let spec = resolve(cli)?;
    let outcome = run(&spec)?;
    let text = outcome.render(&spec)?;
    match &spec.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| UsageError(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    if !outcome.passed {
        eprintln!("{}: verification failed", spec.command.name());
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(code) => code,
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    };
    ExitCode::from(code as u8)
}
