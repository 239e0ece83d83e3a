//! `pml`: profiles, approximate PML estimates and the small exact oracles.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 solver result not
//! certified (output is still written), 3 oracle size guard exceeded.

mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pml_core::multipml::run_pipeline;
use pml_core::profile::SymbolTable;
use pml_core::{
    brute_force_pml, d_profile_of, distance_to_uniformity, entropy, exact_profile_logprob, kl_plugin,
    support_coverage, support_size, DProfile, DenseDistribution, GridSearchConfig, LevelSetDistribution, PmlError,
    Profile, Sequence,
};
use rayon::prelude::*;
use report::Estimate;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "pml", version, about = "Approximate profile maximum likelihood")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Profile of whitespace-separated samples; several files give a joint profile.
    Profile {
        #[arg(required = true)]
        samples: Vec<PathBuf>,
        /// Expected number of sample files.
        #[arg(long)]
        d: Option<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Approximate PML distribution and plug-in estimates for each profile.
    Estimate {
        #[arg(required = true)]
        profiles: Vec<PathBuf>,
        #[command(flatten)]
        est: EstimateArgs,
    },
    /// Exact log-probability of a profile under a distribution.
    Exact {
        profile: PathBuf,
        /// JSON `{"probs": [...]}`.
        dist: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Grid-search PML for tiny profiles.
    Bruteforce {
        profile: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Approximate PML for joint profiles of several samples.
    EstimateD {
        #[arg(required = true)]
        profiles: Vec<PathBuf>,
        /// Required dimension of every input.
        #[arg(long)]
        d: Option<usize>,
        #[command(flatten)]
        est: EstimateArgs,
    },
}

#[derive(Args)]
struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct EstimateArgs {
    /// Probability grid parameter in (0, 1]; default n^(-1/(2d+1)).
    #[arg(long, value_parser = parse_eps)]
    eps1: Option<f64>,
    /// Frequency grid parameter in (0, 1]; default n^(-1/(2d+1)).
    #[arg(long, value_parser = parse_eps)]
    eps2: Option<f64>,
    /// Solver duality-gap target.
    #[arg(long, value_parser = parse_delta)]
    delta: Option<f64>,
    /// entropy, support, coverage:M, uniformity:K or kl (joint profiles with d = 2).
    #[arg(long = "property", value_parser = parse_property)]
    properties: Vec<Property>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Property {
    Entropy,
    Support,
    Coverage(u64),
    Uniformity(u64),
    Kl,
}

impl Property {
    fn name(self) -> String {
        match self {
            Property::Entropy => "entropy".into(),
            Property::Support => "support".into(),
            Property::Coverage(m) => format!("coverage:{m}"),
            Property::Uniformity(k) => format!("uniformity:{k}"),
            Property::Kl => "kl".into(),
        }
    }
}

fn parse_eps(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie in (0, 1], got {v}"))
    }
}

fn parse_delta(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn parse_property(s: &str) -> Result<Property, String> {
    let arg = |rest: &str| -> Result<u64, String> {
        let v: u64 = rest.parse().map_err(|e| format!("bad argument in {s:?}: {e}"))?;
        if v == 0 {
            return Err(format!("argument in {s:?} must be positive"));
        }
        Ok(v)
    };
    match s.split_once(':') {
        None if s == "entropy" => Ok(Property::Entropy),
        None if s == "support" => Ok(Property::Support),
        None if s == "kl" => Ok(Property::Kl),
        Some(("coverage", m)) => arg(m).map(Property::Coverage),
        Some(("uniformity", k)) => arg(k).map(Property::Uniformity),
        _ => Err(format!("unknown property {s:?}")),
    }
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn invalid(msg: impl Into<String>) -> Self {
        Self { code: 1, msg: msg.into() }
    }
}

impl From<PmlError> for Failure {
    fn from(e: PmlError) -> Self {
        let code = if matches!(e, PmlError::Guard(_)) { 3 } else { 1 };
        Self { code, msg: e.to_string() }
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_text(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    String::from_utf8(bytes).map_err(|e| {
        let line = e.as_bytes()[..e.utf8_error().valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Failure::invalid(format!("{}: line {line}: invalid UTF-8", path.display()))
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::invalid(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column())))
}

fn read_samples(path: &Path, table: &mut SymbolTable) -> CliResult<Sequence> {
    let text = read_text(path)?;
    if text.split_whitespace().next().is_none() {
        return Err(Failure::invalid(format!("{}: no samples", path.display())));
    }
    Ok(Sequence::from_tokens(table, text.split_whitespace())?)
}

fn emit(out: &OutputArgs, text: &str) -> CliResult<()> {
    match &out.output {
        Some(path) => fs::write(path, text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure::invalid(e.to_string()))
        }
    }
}

fn emit_json(out: &OutputArgs, v: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string(v).expect("serializable");
    text.push('\n');
    emit(out, &text)
}

fn cmd_profile(samples: &[PathBuf], d: Option<usize>, out: &OutputArgs) -> CliResult<u8> {
    if let Some(d) = d {
        if d != samples.len() {
            return Err(Failure::invalid(format!("--d {d} needs {d} sample files, got {}", samples.len())));
        }
    }
    let mut table = SymbolTable::new();
    let seqs = samples.iter().map(|p| read_samples(p, &mut table)).collect::<CliResult<Vec<_>>>()?;
    let dp = d_profile_of(&seqs)?;
    let (value, plain) = if dp.d() == 1 {
        let p = dp.to_profile()?;
        let plain: Vec<String> = p.pairs().iter().map(|(f, c)| format!("{f} {c}")).collect();
        (serde_json::to_value(&p).expect("serializable"), plain)
    } else {
        let plain = dp
            .entries()
            .iter()
            .map(|(f, c)| format!("{} {c}", f.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")))
            .collect();
        (serde_json::to_value(&dp).expect("serializable"), plain)
    };
    match out.format {
        Format::Json => emit_json(out, &value)?,
        Format::Plain => emit(out, &(plain.join("\n") + "\n"))?,
    }
    Ok(0)
}

fn one_d_property(dist: &LevelSetDistribution, p: Property) -> CliResult<f64> {
    Ok(match p {
        Property::Entropy => entropy(dist)?,
        Property::Support => support_size(dist)? as f64,
        Property::Coverage(m) => support_coverage(dist, m)?,
        Property::Uniformity(k) => distance_to_uniformity(dist, k)?,
        Property::Kl => return Err(Failure::invalid("kl needs a joint profile with d = 2 (use estimate-d)")),
    })
}

fn estimate_one(input: &Path, dp: &DProfile, args: &EstimateArgs) -> CliResult<Estimate> {
    let d = dp.d();
    let def = dp.default_eps();
    let eps1: Vec<f64> = def.iter().map(|&e| args.eps1.unwrap_or(e)).collect();
    let eps2: Vec<f64> = def.iter().map(|&e| args.eps2.unwrap_or(e)).collect();
    let run = run_pipeline(dp, &eps1, &eps2, args.delta)?;
    let dist = &run.distribution;
    let props = if args.properties.is_empty() { vec![Property::Entropy] } else { args.properties.clone() };
    let mut properties = Vec::new();
    for p in props {
        if d == 1 {
            properties.push((p.name(), one_d_property(&dist.to_one()?, p)?));
        } else if p == Property::Kl {
            if d != 2 {
                return Err(Failure::invalid("kl needs d = 2"));
            }
            properties.push((p.name(), kl_plugin(&dist.to_pair()?)?));
        } else {
            for k in 0..d {
                let marginal =
                    LevelSetDistribution::new(dist.levels().iter().filter(|(v, _)| v[k] > 0.0).map(|(v, c)| (v[k], *c)).collect())?;
                properties.push((format!("{}[{k}]", p.name()), one_d_property(&marginal, p)?));
            }
        }
    }
    Ok(Estimate {
        input: input.display().to_string(),
        levels: dist.levels().to_vec(),
        mass: dist.masses(),
        diagnostics: serde_json::to_value(&run.diagnostics).expect("serializable"),
        properties,
        certified: run.diagnostics.certified,
    })
}

fn cmd_estimate(inputs: &[PathBuf], args: &EstimateArgs, want_d: Option<usize>, joint: bool) -> CliResult<u8> {
    let profiles = inputs
        .iter()
        .map(|p| {
            if joint {
                let dp: DProfile = read_json(p)?;
                if let Some(d) = want_d {
                    if dp.d() != d {
                        return Err(Failure::invalid(format!("{}: expected d = {d}, got {}", p.display(), dp.d())));
                    }
                }
                Ok(dp)
            } else {
                read_json::<Profile>(p).map(|p| DProfile::from_profile(&p))
            }
        })
        .collect::<CliResult<Vec<_>>>()?;
    let results = inputs
        .par_iter()
        .zip(&profiles)
        .map(|(path, dp)| estimate_one(path, dp, args))
        .collect::<CliResult<Vec<_>>>()?;
    let certified = results.iter().all(|r| r.certified);
    let batch = results.len() > 1;
    match args.out.format {
        Format::Json => {
            let value = if batch {
                Value::Array(
                    results
                        .iter()
                        .map(|r| {
                            let mut v = r.to_json();
                            v["input"] = Value::String(r.input.clone());
                            v
                        })
                        .collect(),
                )
            } else {
                results[0].to_json()
            };
            emit_json(&args.out, &value)?;
        }
        Format::Plain => {
            let text: Vec<String> = results.iter().map(|r| r.to_plain(batch)).collect();
            emit(&args.out, &text.join("\n"))?;
        }
    }
    if !certified {
        eprintln!("warning: solver did not certify the requested duality gap");
        return Ok(2);
    }
    Ok(0)
}

fn cmd_exact(profile: &Path, dist: &Path, out: &OutputArgs) -> CliResult<u8> {
    let phi: Profile = read_json(profile)?;
    let p: DenseDistribution = read_json(dist)?;
    let p = DenseDistribution::new(p.probs)?;
    let lp = exact_profile_logprob(&p, &phi)?;
    match out.format {
        Format::Json => emit_json(out, &json!({ "log_prob": report::fmt_short(lp) }))?,
        Format::Plain => emit(out, &format!("{}\n", report::fmt_short(lp)))?,
    }
    Ok(0)
}

fn cmd_bruteforce(profile: &Path, out: &OutputArgs) -> CliResult<u8> {
    let phi: Profile = read_json(profile)?;
    let (p, lp) = brute_force_pml(&phi, &GridSearchConfig::for_profile(&phi))?;
    let probs: Vec<Value> = p.probs.iter().map(|&x| Value::String(report::fmt_short(x))).collect();
    match out.format {
        Format::Json => emit_json(out, &json!({ "probs": probs, "log_prob": report::fmt_short(lp) }))?,
        Format::Plain => {
            let ps: Vec<String> = p.probs.iter().map(|&x| report::fmt_short(x)).collect();
            emit(out, &format!("probs {}\nlog_prob {}\n", ps.join(" "), report::fmt_short(lp)))?
        }
    }
    Ok(0)
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("PML_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| Failure::invalid(format!("PML_THREADS must be a positive integer, got {v:?}")))?;
    if n == 0 {
        return Err(Failure::invalid("PML_THREADS must be positive"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::invalid(e.to_string()))
}

fn run(cli: Cli) -> CliResult<u8> {
    configure_threads()?;
    match cli.command {
        Command::Profile { samples, d, out } => cmd_profile(&samples, d, &out),
        Command::Estimate { profiles, est } => cmd_estimate(&profiles, &est, None, false),
        Command::EstimateD { profiles, d, est } => cmd_estimate(&profiles, &est, d, true),
        Command::Exact { profile, dist, out } => cmd_exact(&profile, &dist, &out),
        Command::Bruteforce { profile, out } => cmd_bruteforce(&profile, &out),
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
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
