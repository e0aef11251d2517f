//! Resolved experiment descriptions and their execution.
//!
//! An [`ExperimentSpec`] names one command with every parameter filled in.
//! [`run`] executes it and returns the payload; [`Outcome::render`] embeds
//! the spec into the artifact (a `spec` field in JSON, a `# spec:` line in
//! CSV) so that [`ExperimentSpec::from_artifact`] can replay it.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::boxcount::{
    box_count_curve, box_count_surface, dyadic_scales, fit_dimension, window_scales, witness_window,
};
use crate::cantor::{CantorConfig, CantorLevels};
use crate::energy::{energy_mc, GraphSampler, NuSampler, UniformUnit};
use crate::error::{config, domain, Error, Result};
use crate::function::FunctionHandle;
use crate::horizon::{grid_coords, horizon, verify_horizon_shift, SurfaceGrid};
use crate::labeling::Labeling;
use crate::rng::Partitioning;
use crate::verify::{
    expected_energy_experiment, fubini_consistency, verify_increment_suite, verify_nxy_bound,
    verify_real_integral, verify_real_integral_grid, ExpectedEnergyParams, IntegralGrid,
    VerificationReport,
};
use crate::witness::WitnessFunction;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Largest deviation accepted by the horizon shift check.
pub const HORIZON_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    Uniform,
    Nu,
    /// Lifted measure on the graph of `witness + function`.
    Graph,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "lemma", rename_all = "kebab-case")]
pub enum Lemma {
    RealIntegral {
        /// `[p, q, r, eps]`; the default grid when absent.
        point: Option<[f64; 4]>,
    },
    Nxy {
        pairs: usize,
        eps: Vec<f64>,
    },
    Increment {
        pairs: usize,
        labelings: usize,
        eps: Vec<f64>,
        functions: Vec<String>,
    },
    ExpectedEnergy {
        function: String,
        eps: f64,
        labelings: usize,
        pairs: usize,
    },
    Fubini {
        function: String,
        eps: f64,
        pairs: usize,
        labelings: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    Construct {
        /// Level table as CSV (`k, count, length, measure`) instead of JSON.
        #[serde(default)]
        report: bool,
    },
    SampleFn {
        function: String,
        grid: usize,
        /// Emit `(x, y, value)` on a `surface x surface` grid instead.
        surface: Option<usize>,
    },
    Boxdim {
        input: String,
        dim: usize,
        /// Box sizes, coarse to fine.
        scales: Vec<f64>,
        samples_per_column: usize,
    },
    Energy {
        measure: Measure,
        function: String,
        s: f64,
        pairs: usize,
    },
    ExpectedEnergy {
        function: String,
        eps: f64,
        labelings: usize,
        pairs: usize,
    },
    Horizon {
        surface: String,
        n: usize,
    },
    HorizonCheck {
        surface: String,
        n: usize,
    },
    Verify(Lemma),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Construct { .. } => "construct",
            Command::SampleFn { .. } => "sample-fn",
            Command::Boxdim { .. } => "boxdim",
            Command::Energy { .. } => "energy",
            Command::ExpectedEnergy { .. } => "expected-energy",
            Command::Horizon { .. } => "horizon",
            Command::HorizonCheck { .. } => "horizon-check",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(flatten)]
    pub command: Command,
    pub config: Option<CantorConfig>,
    pub seed: u64,
    pub partitions: usize,
    /// Destination only; not part of the recorded experiment.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

const CSV_SPEC_PREFIX: &str = "# spec: ";

impl ExperimentSpec {
    pub fn partitioning(&self) -> Partitioning {
        Partitioning::new(self.partitions)
    }

    fn levels(&self) -> Result<Arc<CantorLevels>> {
        let cfg = self
            .config
            .as_ref()
            .ok_or_else(|| config("config", format!("`{}` needs a construction config", self.command.name())))?;
        Ok(Arc::new(CantorLevels::new(cfg.clone())?))
    }

    fn witness(&self) -> Result<WitnessFunction> {
        Ok(WitnessFunction::new(self.levels()?, Labeling::from_seed(self.seed)))
    }

    /// Parses a function spec, binding `witness` to this spec's seed and
    /// config when it is mentioned.
    fn function(&self, spec: &str, dim: usize) -> Result<FunctionHandle> {
        let w = if spec.contains("witness") { Some(self.witness()?) } else { None };
        FunctionHandle::parse(spec, dim, w.as_ref())
    }

    /// Recovers the spec embedded in a rendered artifact.
    pub fn from_artifact(text: &str) -> Result<Self> {
        if let Some(line) = text.lines().find_map(|l| l.strip_prefix(CSV_SPEC_PREFIX)) {
            return Ok(serde_json::from_str(line)?);
        }
        let v: Value = serde_json::from_str(text)?;
        let spec = v
            .get("spec")
            .ok_or_else(|| config("spec", "artifact has no embedded spec"))?;
        Ok(serde_json::from_value(spec.clone())?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Json(Value),
    Csv {
        /// Extra `# key: value` lines after the spec line.
        notes: Vec<(String, Value)>,
        header: Vec<String>,
        rows: Vec<Vec<String>>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub payload: Payload,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }

    pub fn render(&self, spec: &ExperimentSpec) -> Result<String> {
        match &self.payload {
            Payload::Json(v) => {
                let doc = json!({ "spec": spec, "pass": self.passed, "result": v });
                Ok(serde_json::to_string_pretty(&doc)? + "\n")
            }
            Payload::Csv { notes, header, rows } => {
                let mut out = format!("{CSV_SPEC_PREFIX}{}\n", serde_json::to_string(spec)?);
                for (k, v) in notes {
                    out.push_str(&format!("# {k}: {}\n", serde_json::to_string(v)?));
                }
                out.push_str(&header.join(","));
                out.push('\n');
                for r in rows {
                    out.push_str(&r.join(","));
                    out.push('\n');
                }
                Ok(out)
            }
        }
    }
}

fn cells(rows: Vec<Vec<f64>>) -> Vec<Vec<String>> {
    rows.into_iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect())
        .collect()
}

fn json_outcome(passed: bool, v: Value) -> Outcome {
    Outcome {
        passed,
        payload: Payload::Json(v),
    }
}

fn report_outcome(r: VerificationReport) -> Result<Outcome> {
    Ok(json_outcome(r.pass, serde_json::to_value(&r)?))
}

/// Executes the command. Verification commands report pass or fail in the
/// outcome; everything else passes unless it errors.
pub fn run(spec: &ExperimentSpec) -> Result<Outcome> {
    let part = spec.partitioning();
    match &spec.command {
        Command::Construct { report: true } => {
            let lv = spec.levels()?;
            let rows = (0..=lv.depth())
                .map(|k| {
                    vec![
                        k.to_string(),
                        lv.count(k).to_string(),
                        lv.length(k).to_string(),
                        lv.measure(k).to_string(),
                    ]
                })
                .collect();
            Ok(Outcome {
                passed: true,
                payload: Payload::Csv {
                    notes: vec![("faithful_depth".into(), json!(lv.faithful_depth()))],
                    header: vec!["k".into(), "count".into(), "length".into(), "measure".into()],
                    rows,
                },
            })
        }

        Command::Construct { report: false } => {
            let lv = spec.levels()?;
            let rows: Vec<Value> = (0..=lv.depth())
                .map(|k| {
                    json!({
                        "k": k,
                        "count": lv.count(k).to_string(),
                        "length": lv.length(k),
                        "measure": lv.measure(k),
                        "pitch": if k == 0 { 0.0 } else { lv.pitch(k) },
                        "gap": if k == 0 { 0.0 } else { lv.gap(k) },
                    })
                })
                .collect();
            Ok(json_outcome(
                true,
                json!({
                    "levels": rows,
                    "faithful_depth": lv.faithful_depth(),
                    "tv_bound": lv.tv_bound(),
                }),
            ))
        }

        Command::SampleFn { function, grid, surface } => match surface {
            Some(n) => {
                let f = spec.function(function, 2)?;
                if *n < 2 {
                    return Err(domain("surface resolution must be at least 2"));
                }
                let xs = grid_coords(*n);
                let mut rows = Vec::with_capacity(n * n);
                for &x in &xs {
                    for &y in &xs {
                        rows.push(vec![x, y, f.eval(&[x, y])]);
                    }
                }
                Ok(Outcome {
                    passed: true,
                    payload: Payload::Csv {
                        notes: vec![],
                        header: vec!["x".into(), "y".into(), "value".into()],
                        rows: cells(rows),
                    },
                })
            }
            None => {
                let f = spec.function(function, 1)?;
                if *grid < 2 {
                    return Err(domain("grid must have at least 2 points"));
                }
                let rows = grid_coords(*grid).into_iter().map(|x| vec![x, f.eval1(x)]).collect();
                Ok(Outcome {
                    passed: true,
                    payload: Payload::Csv {
                        notes: vec![],
                        header: vec!["x".into(), "value".into()],
                        rows: cells(rows),
                    },
                })
            }
        },

        Command::Boxdim {
            input,
            dim,
            scales,
            samples_per_column,
        } => {
            let f = spec.function(input, *dim)?;
            let deltas = scales.clone();
            let counts = deltas
                .iter()
                .map(|&d| match dim {
                    1 => box_count_curve(&f, d, *samples_per_column),
                    2 => box_count_surface(&f, d, *samples_per_column),
                    _ => Err(domain(format!("boxdim supports d = 1 or 2, got {dim}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            let fit = fit_dimension(&deltas, &counts)?;
            let rows = deltas
                .iter()
                .zip(&counts)
                .map(|(&d, &c)| vec![d, c as f64, (1.0 / d).ln(), (c as f64).ln()])
                .collect();
            Ok(Outcome {
                passed: true,
                payload: Payload::Csv {
                    notes: vec![
                        ("slope".into(), json!(fit.slope)),
                        ("intercept".into(), json!(fit.intercept)),
                        ("r_squared".into(), json!(fit.r_squared)),
                    ],
                    header: vec!["delta".into(), "count".into(), "log_inv_delta".into(), "log_count".into()],
                    rows: cells(rows),
                },
            })
        }

        Command::Energy {
            measure,
            function,
            s,
            pairs,
        } => {
            let est = match measure {
                Measure::Uniform => energy_mc(&UniformUnit, *s, *pairs, spec.seed, part)?,
                Measure::Nu => {
                    let lv = spec.levels()?;
                    energy_mc(&NuSampler(&lv), *s, *pairs, spec.seed, part)?
                }
                Measure::Graph => {
                    let w = spec.witness()?;
                    let f = spec.function(function, 1)?;
                    let sampler = GraphSampler { witness: &w, f: &f };
                    energy_mc(&sampler, *s, *pairs, spec.seed, part)?
                }
            };
            Ok(json_outcome(
                true,
                json!({ "estimate": est, "diverges": est.diverges() }),
            ))
        }

        Command::ExpectedEnergy {
            function,
            eps,
            labelings,
            pairs,
        } => expected_energy(spec, function, *eps, *labelings, *pairs),

        Command::Horizon { surface, n } => {
            let g = spec.function(surface, 2)?;
            let grid = SurfaceGrid::from_fn(&g, *n, part)?;
            let h = horizon(&grid)?;
            let rows = grid_coords(*n).into_iter().zip(h).map(|(x, v)| vec![x, v]).collect();
            Ok(Outcome {
                passed: true,
                payload: Payload::Csv {
                    notes: vec![("resolution".into(), json!(n))],
                    header: vec!["x".into(), "H".into()],
                    rows: cells(rows),
                },
            })
        }

        Command::HorizonCheck { surface, n } => {
            let f = spec.function(surface, 2)?;
            let w = spec.witness()?.surface_extend(2)?;
            let check = verify_horizon_shift(&f, &w, *n, part)?;
            let passed = check.max_deviation <= HORIZON_TOLERANCE;
            Ok(json_outcome(
                passed,
                json!({ "check": check, "tolerance": HORIZON_TOLERANCE }),
            ))
        }

        Command::Verify(lemma) => match lemma {
            Lemma::RealIntegral { point } => report_outcome(match point {
                Some([p, q, r, eps]) => verify_real_integral(*p, *q, *r, *eps)?,
                None => verify_real_integral_grid(&IntegralGrid::default(), part)?,
            }),
            Lemma::Nxy { pairs, eps } => {
                let lv = spec.levels()?;
                report_outcome(verify_nxy_bound(&lv, *pairs, eps, spec.seed, part)?)
            }
            Lemma::Increment {
                pairs,
                labelings,
                eps,
                functions,
            } => {
                let lv = spec.levels()?;
                let fs = functions
                    .iter()
                    .map(|f| spec.function(f, 1))
                    .collect::<Result<Vec<_>>>()?;
                report_outcome(verify_increment_suite(&lv, &fs, eps, *pairs, *labelings, spec.seed, part)?)
            }
            Lemma::ExpectedEnergy {
                function,
                eps,
                labelings,
                pairs,
            } => expected_energy(spec, function, *eps, *labelings, *pairs),
            Lemma::Fubini {
                function,
                eps,
                pairs,
                labelings,
            } => {
                let lv = spec.levels()?;
                let f = spec.function(function, 1)?;
                report_outcome(fubini_consistency(&lv, &f, *eps, *pairs, *labelings, spec.seed, part)?)
            }
        },
    }
}

fn expected_energy(
    spec: &ExperimentSpec,
    function: &str,
    eps: f64,
    labelings: usize,
    pairs: usize,
) -> Result<Outcome> {
    if function.contains("witness") {
        return Err(Error::FunctionSpec(format!(
            "{function}: the labelling is averaged over, so `witness` cannot appear in f"
        )));
    }
    let lv = spec.levels()?;
    let f = FunctionHandle::parse(function, 1, None)?;
    let params = ExpectedEnergyParams { eps, labelings, pairs };
    report_outcome(expected_energy_experiment(&lv, &f, &params, spec.seed, spec.partitioning())?)
}

/// Default box sizes for a function spec: half-octave steps through the
/// depth-clamped window when a witness is involved, else `2^-4 .. 2^-14`.
pub fn default_box_scales(function: &str, levels: Option<&CantorLevels>) -> Vec<f64> {
    match levels {
        Some(lv) if function.contains("witness") => {
            window_scales(&witness_window(lv.depth(), lv.length(lv.depth())))
        }
        _ => dyadic_scales(4, 14),
    }
}

/// Default construction for commands that need one: the tower preset
/// at depth 12 for labelling averages, depth 2 otherwise.
pub fn default_config(command: &Command) -> Result<CantorConfig> {
    let depth = match command {
        Command::ExpectedEnergy { .. }
        | Command::Verify(Lemma::Increment { .. })
        | Command::Verify(Lemma::ExpectedEnergy { .. })
        | Command::Verify(Lemma::Fubini { .. }) => 12,
        _ => 2,
    };
    CantorConfig::tower(depth, 0.5)
}
