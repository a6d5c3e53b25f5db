//! Command-line interface: ingest, fit-hstar, predict, simulate, diagnose,
//! and bench subcommands over the library. Every run that writes files also
//! writes a reproducibility manifest next to its primary output.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use unseen::bench::{self, BenchMethod};
use unseen::error::{Error, Result};
use unseen::estimators::{self, Method, SmoothingDistribution};
use unseen::ghopt::{optimize_hstar, OptimizeConfig};
use unseen::ingest::{self, ObservationStream};
use unseen::manifest::RunManifest;
use unseen::sim::{self, SpeciesModel};
use unseen::types::{FrequencyProfile, Horizon, LinearWeights};
use unseen::uncertainty;

#[derive(Parser)]
#[command(name = "unseen", version, about = "Prediction of unseen species from frequency data")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML (or JSON) config file; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CorpusKind {
    /// Plain text; each whitespace token is a singleton event.
    Tokens,
    /// One species set per line.
    Sets,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum IntervalKind {
    /// Two-sided normal interval from the plug-in variance proxy.
    Gaussian,
    /// Far-future tail-bound interval around the power-law point.
    Conservative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CheckKind {
    /// Monte-Carlo mean squared error of a method.
    Mse,
    /// MC MSE of the alternating-series estimator against its closed form.
    Decomp,
    /// Tail bounds for the occupancy count S_t^(i).
    Conc,
    /// Tail bounds for the multiplicity count phi_i.
    ConcPhi,
    /// Tail-measure transform identities via quadrature.
    Laplace,
    /// Convergence rate of the power-law index estimate.
    Alpha,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
    Latex,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a corpus into the binary stream format.
    Ingest {
        #[arg(long, value_enum)]
        kind: CorpusKind,
        #[arg(long)]
        input: PathBuf,
        /// Keep every K-th event.
        #[arg(long, default_value_t = 1)]
        subsample: usize,
        /// Drop species whose numeric label is at or above this bound.
        #[arg(long)]
        restrict_below: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit worst-case-optimal linear weights and print the certificate.
    FitHstar {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        cert_grid: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Point estimate (and optional interval) from a frequency profile.
    Predict {
        /// gt | sgt | hstar | ratio-alpha | pade | null | linear.
        #[arg(long)]
        method: String,
        /// Inline profile JSON: either {"1":2,"2":1} or the full
        /// {"counts":...,"n_events":...} form.
        #[arg(long, conflicts_with = "input")]
        phi: Option<String>,
        /// Stream file; the profile is computed from it.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        r: f64,
        /// Past window length; defaults to the stream's event count.
        #[arg(long)]
        t: Option<f64>,
        /// Weights JSON array for --method linear.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Two-sided confidence level, e.g. 0.95.
        #[arg(long)]
        level: Option<f64>,
        #[arg(long, value_enum, default_value_t = IntervalKind::Gaussian)]
        interval: IntervalKind,
        /// Arity bound B for conservative intervals.
        #[arg(long, default_value_t = 1)]
        arity_bound: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo experiments with closed-form cross-checks.
    Simulate {
        /// Model JSON ({"weights":[...]} or {"sets":[...]}); checks that
        /// build their own model (alpha) ignore it.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        check: CheckKind,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        reps: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Occupancy / multiplicity order for concentration checks.
        #[arg(long, default_value_t = 1)]
        order: u32,
        /// Power-law index for --check alpha.
        #[arg(long)]
        alpha: Option<f64>,
        /// Power-law scale for --check alpha.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Comma-separated window lengths for --check alpha.
        #[arg(long, default_value = "100,1000,10000")]
        t_grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dependence diagnostics for incidence data.
    Diagnose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        r: f64,
        /// Past window length; defaults to the number of sets.
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// MAPE benchmark over a fraction grid.
    Bench {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated method names.
        #[arg(long)]
        methods: Option<String>,
        /// Fraction grid: LO..HIxN or a comma-separated list.
        #[arg(long)]
        fracs: Option<String>,
        #[arg(long)]
        perms: Option<u64>,
        /// Shuffle seed; omit for the stream's temporal order.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        format: Option<TableFormat>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Optional config file: same knobs as the flags, merged underneath them.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    fit: FitSection,
    #[serde(default)]
    predict: PredictSection,
    #[serde(default)]
    simulate: SimulateSection,
    #[serde(default)]
    bench: BenchSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitSection {
    depth: Option<usize>,
    grid: Option<usize>,
    cert_grid: Option<usize>,
    budget: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictSection {
    level: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateSection {
    reps: Option<u64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchSection {
    methods: Option<String>,
    fracs: Option<String>,
    perms: Option<u64>,
    seed: Option<u64>,
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_str(&text)?)
    } else {
        toml::from_str(&text)
            .map_err(|e| Error::InvalidParameter(format!("config {path:?}: {e}")))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Writes `text` to `out` (with a manifest beside it) or to stdout.
fn deliver(text: &str, out: Option<&Path>, manifest: &mut RunManifest) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            manifest.record_output(path)?;
            manifest.write_next_to(path)?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn parse_profile(text: &str) -> Result<FrequencyProfile> {
    // Accept the bare {"multiplicity": count} shorthand first.
    if let Ok(bare) = serde_json::from_str::<std::collections::BTreeMap<String, i64>>(text) {
        let pairs = bare
            .into_iter()
            .map(|(k, v)| {
                k.parse::<u32>()
                    .map(|i| (i, v))
                    .map_err(|_| Error::InvalidParameter(format!("bad multiplicity key {k:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        return FrequencyProfile::from_counts(pairs);
    }
    Ok(serde_json::from_str(text)?)
}

/// Resolves a CLI method name to a concrete method for a given horizon and
/// profile scale. `n_events` feeds the suggested smoothing parameters.
fn resolve_method(
    name: &str,
    h: &Horizon,
    n_events: f64,
    weights: Option<&Path>,
    fit: &OptimizeConfig,
) -> Result<Method> {
    if name == "linear" {
        let path = weights.ok_or_else(|| {
            Error::InvalidParameter("--method linear needs --weights FILE".into())
        })?;
        let w: LinearWeights = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        return Ok(Method::Linear(w));
    }
    Ok(match bench::parse_method(name)? {
        BenchMethod::SgtSuggested => Method::Sgt(SmoothingDistribution::binomial_suggested(
            if n_events > 0.0 { n_events } else { h.t() },
            h.r(),
        )),
        BenchMethod::Fixed(Method::HStar(_)) => Method::HStar(fit.clone()),
        BenchMethod::Fixed(m) => m,
    })
}

fn fit_config(section: &FitSection, depth: Option<usize>, grid: Option<usize>, cert_grid: Option<usize>, budget: Option<usize>) -> OptimizeConfig {
    let defaults = OptimizeConfig::default();
    OptimizeConfig {
        depth: depth.or(section.depth).unwrap_or(defaults.depth),
        grid: grid.or(section.grid).unwrap_or(defaults.grid),
        cert_grid: cert_grid.or(section.cert_grid).unwrap_or(defaults.cert_grid),
        budget: budget.or(section.budget).unwrap_or(defaults.budget),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Ingest { kind, input, subsample, restrict_below, out } => {
            let mut stream = match kind {
                CorpusKind::Tokens => ingest::load_tokens(input)?,
                CorpusKind::Sets => ingest::load_incidence(input)?,
            };
            if let Some(cap) = restrict_below {
                stream = ingest::restrict_species_below(&stream, *cap)?;
            }
            if *subsample > 1 {
                let kept: Vec<Vec<u32>> =
                    stream.events().iter().step_by(*subsample).cloned().collect();
                stream =
                    ObservationStream::new(stream.species().to_vec(), kept, stream.source_label())?;
            }
            stream.save(out)?;
            let mut manifest = RunManifest::new(
                "ingest",
                json!({
                    "kind": format!("{kind:?}").to_lowercase(),
                    "input": input,
                    "subsample": subsample,
                    "restrict_below": restrict_below,
                    "out": out,
                    "events": stream.len(),
                    "species": stream.species().len(),
                }),
            );
            manifest.record_input(input)?;
            manifest.record_output(out)?;
            manifest.write_next_to(out)?;
            eprintln!(
                "wrote {} events over {} species to {}",
                stream.len(),
                stream.species().len(),
                out.display()
            );
            Ok(())
        }
        Command::FitHstar { r, t, depth, grid, cert_grid, budget, out } => {
            let cfg = fit_config(&config.fit, *depth, *grid, *cert_grid, *budget);
            let h = Horizon::new(*t, *r)?;
            let (weights, certificate) = optimize_hstar(h, &cfg)?;
            let report = json!({
                "t": t,
                "r": r,
                "weights": weights,
                "weights_sha256": unseen::manifest::sha256_hex(
                    serde_json::to_string(&weights)?.as_bytes(),
                ),
                "certificate": certificate,
            });
            let text = serde_json::to_string_pretty(&report)?;
            let mut manifest = RunManifest::new(
                "fit-hstar",
                json!({"t": t, "r": r, "depth": cfg.depth, "grid": cfg.grid,
                       "cert_grid": cfg.cert_grid, "budget": cfg.budget}),
            );
            deliver(&text, out.as_deref(), &mut manifest)
        }
        Command::Predict {
            method,
            phi,
            input,
            r,
            t,
            weights,
            level,
            interval,
            arity_bound,
            out,
        } => {
            let profile = match (phi, input) {
                (Some(text), None) => parse_profile(text)?,
                (None, Some(path)) => {
                    ingest::profile_from_stream(&ObservationStream::load(path)?)
                }
                _ => {
                    return Err(Error::InvalidParameter(
                        "predict needs exactly one of --phi or --input".into(),
                    ))
                }
            };
            let t = t.unwrap_or(profile.n_events() as f64);
            let h = Horizon::new(t, *r)?;
            let level = level.or(config.predict.level);
            let fit = fit_config(&config.fit, None, None, None, None);
            let resolved = resolve_method(method, &h, profile.n_events() as f64, weights.as_deref(), &fit)?;
            let mut report = estimators::predict(&profile, &h, &resolved, level)?;
            if *interval == IntervalKind::Conservative {
                let level = level.ok_or(Error::InvalidLevel(0.0))?;
                report.interval =
                    Some(uncertainty::conservative_interval(&profile, &h, *arity_bound, level)?);
                report.detail = format!("{}; conservative far-future interval", report.detail);
            }
            let text = serde_json::to_string_pretty(&report)?;
            let mut manifest = RunManifest::new(
                "predict",
                json!({"method": method, "r": r, "t": t, "level": level,
                       "interval": format!("{interval:?}").to_lowercase(),
                       "arity_bound": arity_bound}),
            );
            deliver(&text, out.as_deref(), &mut manifest)
        }
        Command::Simulate {
            model,
            check,
            t,
            r,
            method,
            reps,
            seed,
            order,
            alpha,
            scale,
            t_grid,
            out,
        } => {
            let reps = reps.or(config.simulate.reps).unwrap_or(1000);
            let seed = seed.or(config.simulate.seed).unwrap_or(0);
            let need = |v: Option<f64>, flag: &str| {
                v.ok_or_else(|| Error::InvalidParameter(format!("--check needs {flag}")))
            };
            let load_model = || -> Result<SpeciesModel> {
                let path = model.as_ref().ok_or_else(|| {
                    Error::InvalidParameter("this check needs --model FILE".into())
                })?;
                SpeciesModel::from_json(&std::fs::read_to_string(path)?)
            };
            let report = match check {
                CheckKind::Mse => {
                    let h = Horizon::new(need(*t, "--t")?, need(*r, "--r")?)?;
                    let model = load_model()?;
                    let name = method.as_deref().unwrap_or("gt");
                    let fit = fit_config(&config.fit, None, None, None, None);
                    let resolved = resolve_method(name, &h, h.t(), None, &fit)?;
                    let mc = sim::mc_mse(&model, &h, &resolved, reps, seed)?;
                    json!({"check": "mse", "method": name, "mse": mc.mse, "se": mc.se,
                           "reps": mc.reps, "seed": seed})
                }
                CheckKind::Decomp => {
                    let h = Horizon::new(need(*t, "--t")?, need(*r, "--r")?)?;
                    let report = sim::error_decomposition_check(&load_model()?, &h, reps, seed)?;
                    serde_json::to_value(&report)?
                }
                CheckKind::Conc => {
                    let h = Horizon::new(need(*t, "--t")?, need(*r, "--r")?)?;
                    let report =
                        sim::concentration_check(&load_model()?, &h, *order, reps, seed)?;
                    serde_json::to_value(&report)?
                }
                CheckKind::ConcPhi => {
                    let h = Horizon::new(need(*t, "--t")?, need(*r, "--r")?)?;
                    let report =
                        sim::phi_concentration_check(&load_model()?, &h, *order, reps, seed)?;
                    serde_json::to_value(&report)?
                }
                CheckKind::Laplace => {
                    let rows = sim::laplace_identity_check(&load_model()?, need(*t, "--t")?)?;
                    serde_json::to_value(&rows)?
                }
                CheckKind::Alpha => {
                    let alpha = need(*alpha, "--alpha")?;
                    let grid: Vec<f64> = t_grid
                        .split(',')
                        .map(|s| {
                            s.trim().parse::<f64>().map_err(|_| {
                                Error::InvalidParameter(format!("bad --t-grid entry {s:?}"))
                            })
                        })
                        .collect::<Result<_>>()?;
                    let table = sim::alpha_rate_check(alpha, *scale, &grid, reps, seed)?;
                    serde_json::to_value(&table)?
                }
            };
            let text = serde_json::to_string_pretty(&report)?;
            let mut manifest = RunManifest::new(
                "simulate",
                json!({"check": format!("{check:?}").to_lowercase(), "model": model,
                       "t": t, "r": r, "method": method, "reps": reps, "seed": seed,
                       "order": order, "alpha": alpha, "scale": scale, "t_grid": t_grid}),
            );
            if let Some(path) = model {
                manifest.record_input(path)?;
            }
            deliver(&text, out.as_deref(), &mut manifest)
        }
        Command::Diagnose { input, r, t, out } => {
            let stream = ingest::load_incidence(input)?;
            let t = t.unwrap_or(stream.len() as f64);
            let h = Horizon::new(t, *r)?;
            let report = json!({
                "events": stream.len(),
                "species": stream.species().len(),
                "max_arity": stream.max_arity(),
                "epsilon_hat": uncertainty::epsilon_hat(&stream, &h),
                "codiscovery": uncertainty::codiscovery_diagnostic(&stream),
                "perfect_pair_bound": uncertainty::perfect_pair_bound(&stream, &h),
            });
            let text = serde_json::to_string_pretty(&report)?;
            let mut manifest =
                RunManifest::new("diagnose", json!({"input": input, "r": r, "t": t}));
            manifest.record_input(input)?;
            deliver(&text, out.as_deref(), &mut manifest)
        }
        Command::Bench { input, methods, fracs, perms, seed, format, out } => {
            let stream = ObservationStream::load(input)?;
            let method_names = methods
                .clone()
                .or_else(|| config.bench.methods.clone())
                .unwrap_or_else(|| "gt,sgt,hstar,ratio-alpha,pade,null".into());
            let methods: Vec<BenchMethod> = method_names
                .split(',')
                .map(|name| bench::parse_method(name.trim()))
                .collect::<Result<_>>()?;
            let fractions = match fracs.clone().or_else(|| config.bench.fracs.clone()) {
                Some(spec) => bench::parse_fractions(&spec)?,
                None => bench::default_fractions(),
            };
            let perms = perms.or(config.bench.perms).unwrap_or(1);
            let seed = seed.or(config.bench.seed);
            let result = bench::run_bench(&stream, &fractions, &methods, perms, seed)?;
            let format = format.unwrap_or(match out.as_deref().and_then(Path::extension) {
                Some(e) if e == "json" => TableFormat::Json,
                Some(e) if e == "tex" => TableFormat::Latex,
                _ => TableFormat::Csv,
            });
            let text = match format {
                TableFormat::Csv => bench::to_csv(&result),
                TableFormat::Json => bench::to_json(&result),
                TableFormat::Latex => bench::to_latex(&result),
            };
            let mut manifest = RunManifest::new(
                "bench",
                json!({"input": input, "methods": method_names, "fractions": fractions,
                       "perms": perms, "seed": seed,
                       "format": format!("{format:?}").to_lowercase()}),
            );
            manifest.record_input(input)?;
            deliver(&text, out.as_deref(), &mut manifest)
        }
    }
}
