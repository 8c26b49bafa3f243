//! Command-line front end: every toolkit module behind one binary with
//! JSON/CSV/table output.
//!
//! Exit codes: 0 success, 2 validation or input error, 3 non-convergence.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use ionlink::linkmodel::{self, BackgroundModel, LossBudget, NoiseModel};
use ionlink::qstate::{self, DensityMatrix};
use ionlink::rates::{self, LinkGeometry, SchemeParams};
use ionlink::simulator::{self, ExperimentConfig};
use ionlink::tomography::{self, MleConfig, OutcomeCounts};
use ionlink::{cavity, Error as LinkError};

#[derive(Parser)]
#[command(name = "ionlink", version, about = "Ion-photon entanglement link toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct IoArgs {
    /// Input file (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Write the result here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override a field of the input file, dotted path: --set a.b=1.5
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Derived cavity-QED parameter table from a cavity description.
    Cavity(IoArgs),
    /// Product and uncertainty of a loss budget.
    Budget(IoArgs),
    /// Heralding-scheme comparison table.
    Rates {
        /// Click probabilities P to tabulate.
        #[arg(long = "click-probability", value_delimiter = ',', default_values_t = vec![5.3e-4, 0.01, 0.04])]
        click_probabilities: Vec<f64>,
        /// Single-photon-scheme generation probability q.
        #[arg(long, default_value_t = 0.1)]
        q: f64,
        /// Attempt rate R in Hz.
        #[arg(long = "attempt-rate", default_value_t = 2000.0)]
        attempt_rate_hz: f64,
        /// Node-to-midpoint distance in km.
        #[arg(long = "distance-km", default_value_t = 50.47)]
        distance_km: f64,
        #[arg(long = "group-index", default_value_t = rates::DEFAULT_GROUP_INDEX)]
        group_index: f64,
        /// Cap the rate by the two-way (photon + classical herald) time.
        #[arg(long)]
        classical_return: bool,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Maximum-likelihood reconstruction with bootstrap error bars from a
    /// counts file.
    Tomo {
        #[command(flatten)]
        io: IoArgs,
        /// Bootstrap replica count.
        #[arg(long, default_value_t = 200)]
        replicas: usize,
        /// RNG seed for the bootstrap (stochastic subcommand).
        #[arg(long)]
        seed: u64,
    },
    /// Background-noise fidelity prediction (Model 1 or 2).
    Noise {
        /// 1: background on the ideal state; 2: background on an imperfect
        /// base state.
        #[arg(long)]
        model: u8,
        /// Fiber distance of the telecom arm.
        #[arg(long, default_value = "50km")]
        distance: String,
        /// Photon wavelength arm: 854 (no conversion) or 1550.
        #[arg(long, default_value = "1550")]
        band: String,
        /// Base state for Model 2 (defaults to the synthetic proxy with
        /// purity 0.94 and fidelity 0.967).
        #[arg(long = "base-state")]
        base_state: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Full seeded experiment simulation (trials, tomography, bootstrap).
    Simulate {
        #[command(flatten)]
        io: IoArgs,
        /// RNG seed (overrides the config file's rng_seed).
        #[arg(long)]
        seed: u64,
        /// Also write the simulated counts (tomography format).
        #[arg(long = "counts-out")]
        counts_out: Option<PathBuf>,
        /// Also write the click-time histogram as CSV.
        #[arg(long = "histogram-out")]
        histogram_out: Option<PathBuf>,
    },
    /// State-quality metrics for a density-matrix file.
    Metrics(IoArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<LinkError>() {
        return match e {
            LinkError::NonConvergence { .. } | LinkError::TooManyReplicaFailures { .. } => 3,
            _ => 2,
        };
    }
    if err.downcast_ref::<serde_json::Error>().is_some() {
        return 2;
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 2;
    }
    1
}

/// Loads an input file, applies --set overrides, deserializes.
fn load_input<T: serde::de::DeserializeOwned>(io: &IoArgs) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(&io.input)
        .with_context(|| format!("reading {}", io.input.display()))?;
    let mut value: Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", io.input.display()))?;
    for entry in &io.overrides {
        let (path, raw) = entry
            .split_once('=')
            .with_context(|| format!("--set needs KEY=VALUE, got '{entry}'"))?;
        let new = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut value, path, new)?;
    }
    Ok(serde_json::from_value(value)?)
}

/// Sets a dotted path inside a JSON value; array steps are numeric.
fn set_path(root: &mut Value, path: &str, new: Value) -> anyhow::Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), new);
                    return Ok(());
                }
                cur = map
                    .get_mut(*part)
                    .with_context(|| format!("no field '{part}' along --set path '{path}'"))?;
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .with_context(|| format!("array step '{part}' in '{path}' must be an index"))?;
                let slot = items
                    .get_mut(idx)
                    .with_context(|| format!("index {idx} out of bounds along '{path}'"))?;
                if last {
                    *slot = new;
                    return Ok(());
                }
                cur = slot;
            }
            _ => bail!("cannot descend into scalar at '{part}' along '{path}'"),
        }
    }
    Ok(())
}

fn emit(output: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match output {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Cavity(io) => {
            let desc: cavity::CavityDescription = load_input(&io)?;
            let report = cavity::parameter_table(&desc)?;
            let text = match io.format {
                Format::Json => to_json(&report)?,
                _ => cavity_table(&report),
            };
            emit(&io.output, &text)
        }
        Command::Budget(io) => {
            let budget: LossBudget = load_input(&io)?;
            let (product, uncertainty) = linkmodel::budget_product(&budget)?;
            let text = match io.format {
                Format::Json => to_json(&serde_json::json!({
                    "stages": budget.stages,
                    "product": product,
                    "uncertainty": uncertainty,
                }))?,
                _ => {
                    let mut t = String::new();
                    for s in &budget.stages {
                        t.push_str(&format!(
                            "{:<38} {:>8.4} +- {:.4}\n",
                            s.name, s.efficiency, s.uncertainty
                        ));
                    }
                    t.push_str(&format!(
                        "total detection probability: {product:.3e} +- {uncertainty:.3e}\n"
                    ));
                    t
                }
            };
            emit(&io.output, &text)
        }
        Command::Rates {
            click_probabilities,
            q,
            attempt_rate_hz,
            distance_km,
            group_index,
            classical_return,
            output,
            format,
        } => {
            let link = LinkGeometry {
                node_to_midpoint_km: distance_km,
                group_index,
                classical_return,
            };
            let rows: Vec<_> = click_probabilities
                .iter()
                .map(|&p| {
                    rates::compare(
                        &SchemeParams {
                            click_probability: p,
                            single_photon_generation: q,
                            attempt_rate_hz,
                        },
                        Some(&link),
                    )
                })
                .collect::<Result<_, _>>()?;
            let text = match format {
                Format::Json => to_json(&rows)?,
                Format::Csv => {
                    let mut t = String::from("P,q,h2_probability,h2_rate_cps,h1_probability,h1_rate_cps,crossover\n");
                    for r in &rows {
                        t.push_str(&format!(
                            "{},{},{},{},{},{},{}\n",
                            r.params.click_probability,
                            r.params.single_photon_generation,
                            r.two_photon.probability,
                            r.two_photon.rate_cps,
                            r.single_photon.probability,
                            r.single_photon.rate_cps,
                            r.crossover_probability
                        ));
                    }
                    t
                }
                Format::Table => rates::comparison_table(&rows),
            };
            emit(&output, &text)
        }
        Command::Tomo { io, replicas, seed } => {
            let counts: OutcomeCounts = load_input(&io)?;
            let result = tomography::mle_reconstruct(&counts, &MleConfig::default())?;
            let metrics = qstate::metric_report(&result.rho)?;
            let boot = tomography::bootstrap(&counts, replicas, seed)?;
            let converged = result.converged;
            let report = serde_json::json!({
                "reconstruction": result,
                "metrics": metrics,
                "bootstrap": boot,
                "seed": seed,
            });
            emit(&io.output, &to_json(&report)?)?;
            if !converged {
                return Err(LinkError::NonConvergence { best: f64::NAN, restarts: 0 })
                    .context("maximum-likelihood iteration hit its iteration cap");
            }
            Ok(())
        }
        Command::Noise { model, distance, band, base_state, output, format } => {
            let bg = background_for(&band, &distance)?;
            let (model, base) = match model {
                1 => (NoiseModel::Model1, qstate::ideal_ion_photon_state().density()),
                2 => {
                    let base = match &base_state {
                        Some(path) => {
                            let text = std::fs::read_to_string(path)
                                .with_context(|| format!("reading {}", path.display()))?;
                            serde_json::from_str::<DensityMatrix>(&text)?
                        }
                        None => linkmodel::synthetic_base_state(0.967, 0.94)?,
                    };
                    (NoiseModel::Model2, base)
                }
                other => bail!("--model must be 1 or 2, got {other}"),
            };
            let prediction = linkmodel::predict_fidelity(model, &base, &bg)?;
            let text = match format {
                Format::Json => to_json(&prediction)?,
                _ => format!(
                    "model: {:?}\nband: {band}, distance: {distance}\nbackground fraction: {:.4}\n\
                     predicted fidelity (pipeline): {:.4}\npredicted fidelity (closed form): {:.4}\n",
                    prediction.model,
                    prediction.epsilon,
                    prediction.predicted_fidelity,
                    prediction.closed_form_fidelity
                ),
            };
            emit(&output, &text)
        }
        Command::Simulate { io, seed, counts_out, histogram_out } => {
            let mut config: ExperimentConfig = load_input(&io)?;
            config.rng_seed = seed;
            let report = simulator::end_to_end(&config)?;
            if let Some(path) = &counts_out {
                std::fs::write(path, to_json(&report.counts)?)
                    .with_context(|| format!("writing {}", path.display()))?;
                eprintln!("wrote {}", path.display());
            }
            if let Some(path) = &histogram_out {
                std::fs::write(path, report.histogram.to_csv())
                    .with_context(|| format!("writing {}", path.display()))?;
                eprintln!("wrote {}", path.display());
            }
            let converged = report.reconstruction.converged;
            emit(&io.output, &to_json(&report)?)?;
            if !converged {
                return Err(LinkError::NonConvergence { best: f64::NAN, restarts: 0 })
                    .context("maximum-likelihood iteration hit its iteration cap");
            }
            Ok(())
        }
        Command::Metrics(io) => {
            let rho: DensityMatrix = load_input(&io)?;
            let metrics = qstate::metric_report(&rho)?;
            let text = match io.format {
                Format::Json => to_json(&metrics)?,
                _ => format!(
                    "fidelity with nearest maximally entangled state: {:.4}\n\
                     concurrence: {:.4}\npurity: {:.4}\nCHSH value: {:.4}\n",
                    metrics.fidelity_max_ent, metrics.concurrence, metrics.purity, metrics.chsh
                ),
            };
            emit(&io.output, &text)
        }
    }
}

/// Background environment for a (band, distance) pair.
fn background_for(band: &str, distance: &str) -> anyhow::Result<BackgroundModel> {
    let normalized = distance.trim().to_lowercase();
    match (band.trim(), normalized.as_str()) {
        ("854", "0km") => Ok(linkmodel::background_854nm()),
        ("854", other) => bail!("the 854 nm arm exists only at 0km, not '{other}'"),
        ("1550", "0km") => Ok(linkmodel::background_telecom_0km()),
        ("1550", "50km") => Ok(linkmodel::background_telecom_50km()),
        (b, d) => bail!("unknown band/distance combination '{b}'/'{d}' (use 854 or 1550, 0km or 50km)"),
    }
}

fn cavity_table(report: &cavity::CavityReport) -> String {
    format!(
        "waist w0:                 {:.2} um\n\
         free spectral range:      {:.4} GHz\n\
         TEM mode spacing:         {:.4} GHz\n\
         finesse:                  {:.0}\n\
         linewidth 2k:             {:.1} kHz\n\
         ringdown time:            {:.3} us\n\
         coupling g_max:           2pi x {:.3} MHz\n\
         cooperativity:            {:.3}\n\
         P_out^max:                {:.3}\n",
        report.waist_m * 1e6,
        report.fsr_hz / 1e9,
        report.transverse_mode_spacing_hz / 1e9,
        report.finesse,
        report.linewidth_full_hz / 1e3,
        report.ringdown_s * 1e6,
        report.g_max_hz / 1e6,
        report.cooperativity,
        report.p_out_max,
    )
}
