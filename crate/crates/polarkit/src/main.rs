//! Command-line front end: kernel analysis, polarization runs, tree-process
//! sampling, code construction, codec operations, and simulation reports.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 mathematical precondition
//! violation (non-invertible kernel, non-symmetric channel), 3 resource cap.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use polarkit::bec::{bec_polarize, polarization_fraction, rate_statistic};
use polarkit::channel::BinaryChannel;
use polarkit::code::{bec_likelihoods, DesignSpec, PolarCode};
use polarkit::gf2::{is_polarizing, last_reduction_weight, unit_diagonalize, BitMatrix};
use polarkit::report::{polarize_csv, polarize_svg, CSV_HEADER};
use polarkit::split::split_all;
use polarkit::tree::{ensemble_stats, sample_path, z_bound_check};
use polarkit::Error;

#[derive(Parser)]
#[command(name = "polarkit", version, about = "channel polarization toolkit")]
struct Cli {
    /// JSON config file; values fill in flags left unset on the command line
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Invertibility, diagonalizing permutation, polarizing verdict, (i, k)
    AnalyzeKernel(AnalyzeArgs),
    /// Exact BEC polarization run: leaf CSV, per-level summary, SVG histogram
    Polarize(PolarizeArgs),
    /// Sample the branch process and report ensemble statistics
    Tree(TreeArgs),
    /// Construct a polar code and write its JSON descriptor
    Construct(ConstructArgs),
    /// Encode a message with a code descriptor
    Encode(EncodeArgs),
    /// Successive cancellation decode from received symbols or likelihoods
    Decode(DecodeArgs),
    /// Monte Carlo FER simulation for a code descriptor
    Simulate(SimulateArgs),
    /// Kernel analysis plus polarization run into an output directory
    Report(ReportArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// kernel file: lines of 0/1 or JSON {"l": .., "rows": [..]}
    #[arg(long)]
    kernel: PathBuf,
    /// optional channel JSON; adds per-index (i, I, Z) via exact splitting
    #[arg(long)]
    channel: Option<PathBuf>,
}

#[derive(Args)]
struct PolarizeArgs {
    #[arg(long)]
    kernel: PathBuf,
    /// design erasure probability
    #[arg(long)]
    bec: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_svg: Option<PathBuf>,
}

#[derive(Args)]
struct TreeArgs {
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long)]
    channel: PathBuf,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct ConstructArgs {
    /// kernel file; repeat for mixed kernels (applied outermost first)
    #[arg(long, required = true)]
    kernel: Vec<PathBuf>,
    /// replicate a single kernel to this many levels
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    bec: Option<f64>,
    /// file with one design Z value per line, overrides --bec
    #[arg(long)]
    design_z: Option<PathBuf>,
    #[arg(short, long)]
    k: usize,
    /// output descriptor path (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    code: PathBuf,
    /// message bits as a 0/1 string
    #[arg(long)]
    message: String,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    code: PathBuf,
    /// received symbols for a BEC: '0', '1' or '?' per position
    #[arg(long)]
    received: Option<String>,
    /// CSV file of per-position likelihood pairs "p0,p1"
    #[arg(long)]
    likelihoods: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    code: PathBuf,
    /// transmission BEC erasure probability
    #[arg(long)]
    bec: Option<f64>,
    /// transmission channel JSON (alternative to --bec)
    #[arg(long)]
    channel: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    genie: bool,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long)]
    bec: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Math(#[from] Error),
    #[error("io error on {path}: {err}")]
    Io { path: String, err: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Math(err) => match err {
                Error::NotInvertible
                | Error::NotSymmetric
                | Error::NotPolarizing
                | Error::InvalidChannel(_)
                | Error::Numeric(_) => 2,
                Error::AlphabetCap { .. } | Error::SizeCap { .. } | Error::DepthCap { .. } => 3,
                _ => 1,
            },
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("POLARKIT_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let config = match cli.config.as_deref().map(load_config).transpose() {
        Ok(c) => c.unwrap_or(Value::Null),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let result = match cli.command {
        Command::AnalyzeKernel(args) => cmd_analyze(args),
        Command::Polarize(args) => cmd_polarize(args, &config),
        Command::Tree(args) => cmd_tree(args, &config),
        Command::Construct(args) => cmd_construct(args),
        Command::Encode(args) => cmd_encode(args),
        Command::Decode(args) => cmd_decode(args),
        Command::Simulate(args) => cmd_simulate(args, &config),
        Command::Report(args) => cmd_report(args, &config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_config(path: &Path) -> Result<Value, CliError> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config JSON: {e}")))
}

fn cfg_f64(config: &Value, section: &str, key: &str) -> Option<f64> {
    config.get(section)?.get(key)?.as_f64()
}

fn cfg_u64(config: &Value, section: &str, key: &str) -> Option<u64> {
    config.get(section)?.get(key)?.as_u64()
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|err| CliError::Io { path: path.display().to_string(), err })
}

fn write(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|err| CliError::Io { path: path.display().to_string(), err })
}

fn load_kernel(path: &Path) -> Result<BitMatrix, CliError> {
    let m = BitMatrix::parse(&read(path)?)?;
    if !m.is_invertible() {
        return Err(Error::NotInvertible.into());
    }
    Ok(m)
}

fn load_channel(path: &Path) -> Result<BinaryChannel, CliError> {
    Ok(BinaryChannel::from_json(&read(path)?)?)
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required value for {flag}")))
}

fn check_unit(value: f64, flag: &str) -> Result<f64, CliError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(CliError::Usage(format!("{flag} must lie in [0, 1], got {value}")))
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let g = load_kernel(&args.kernel)?;
    println!("invertible: yes");
    let sigma = unit_diagonalize(&g)?;
    println!(
        "diagonalizing_permutation: [{}]",
        sigma.map.iter().map(|c| (c + 1).to_string()).collect::<Vec<_>>().join(", ")
    );
    if is_polarizing(&g)? {
        let (i, k) = last_reduction_weight(&g)?;
        println!("polarizing: yes, i={}, k={}", i + 1, k);
    } else {
        println!("polarizing: no");
    }
    if let Some(channel_path) = args.channel {
        let w = load_channel(&channel_path)?;
        let result = split_all(&w, &g)?;
        println!("{CSV_HEADER}");
        println!("i,I,Z");
        for (i, pair) in result.info.iter().enumerate() {
            println!("{},{},{}", i + 1, pair.mutual_info, pair.bhattacharyya);
        }
    }
    Ok(())
}

fn run_polarize(
    kernel: &Path,
    eps: f64,
    levels: usize,
    delta: f64,
    beta: f64,
    out_csv: Option<&Path>,
    out_svg: Option<&Path>,
) -> Result<(), CliError> {
    let g = load_kernel(kernel)?;
    let per_level: Vec<_> = (0..=levels)
        .map(|n| bec_polarize(&g, eps, n))
        .collect::<Result<_, _>>()?;
    let non_polarizing = !is_polarizing(&g)?;
    let csv = polarize_csv(&per_level, delta, beta);
    match out_csv {
        Some(path) => write(path, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(path) = out_svg {
        write(path, &polarize_svg(&per_level, non_polarizing))?;
    }
    if non_polarizing {
        println!("non-polarizing kernel: leaf distribution is flat");
    }
    let last = per_level.last().expect("levels+1 entries");
    println!(
        "levels={} leaves={} fraction_mid={} rate_stat={} mean_eps={}",
        levels,
        last.eps.len(),
        polarization_fraction(last, delta),
        rate_statistic(last, beta),
        last.mean()
    );
    Ok(())
}

fn cmd_polarize(args: PolarizeArgs, config: &Value) -> Result<(), CliError> {
    let eps = require(args.bec.or(cfg_f64(config, "polarize", "bec")), "--bec")?;
    check_unit(eps, "--bec")?;
    let levels = require(
        args.levels.or(cfg_u64(config, "polarize", "levels").map(|v| v as usize)),
        "--levels",
    )?;
    let delta = args.delta.or(cfg_f64(config, "polarize", "delta")).unwrap_or(0.1);
    let beta = args.beta.or(cfg_f64(config, "polarize", "beta")).unwrap_or(0.25);
    if !(0.0..0.5).contains(&delta) || delta == 0.0 {
        return Err(CliError::Usage(format!("--delta must lie in (0, 0.5), got {delta}")));
    }
    run_polarize(
        &args.kernel,
        eps,
        levels,
        delta,
        beta,
        args.out_csv.as_deref(),
        args.out_svg.as_deref(),
    )
}

fn cmd_tree(args: TreeArgs, config: &Value) -> Result<(), CliError> {
    let g = load_kernel(&args.kernel)?;
    let w = load_channel(&args.channel)?;
    let levels = require(
        args.levels.or(cfg_u64(config, "tree", "levels").map(|v| v as usize)),
        "--levels",
    )?;
    let paths = args.paths.or(cfg_u64(config, "tree", "paths").map(|v| v as usize)).unwrap_or(100);
    let seed = args.seed.or(cfg_u64(config, "tree", "seed")).unwrap_or(0);
    let delta = args.delta.or(cfg_f64(config, "tree", "delta")).unwrap_or(0.1);
    let ell = g.rows();

    let mut csv = format!("{CSV_HEADER}\npath,level,branch,I,Z\n");
    let sample_count = paths.min(if w.as_bec().is_some() { 0 } else { paths });
    for p in 0..sample_count {
        let trace = sample_path(&w, &g, levels, seed ^ polarkit::splitmix64(p as u64))?;
        let report = z_bound_check(&trace, ell);
        if !report.factor_violations.is_empty() {
            return Err(Error::Numeric(format!(
                "Z factor bound violated on path {p} at steps {:?}",
                report.factor_violations
            ))
            .into());
        }
        for (t, pair) in trace.info.iter().enumerate() {
            let branch = if t == 0 { 0 } else { trace.branches[t - 1] + 1 };
            csv.push_str(&format!(
                "{p},{t},{branch},{},{}\n",
                pair.mutual_info, pair.bhattacharyya
            ));
        }
    }
    let stats = ensemble_stats(&w, &g, levels, paths, seed, delta)?;
    let json = serde_json::to_string_pretty(&stats).expect("stats serialize");
    match args.out_csv.as_deref() {
        Some(path) => write(path, &csv)?,
        None => print!("{csv}"),
    }
    match args.out_json.as_deref() {
        Some(path) => write(path, &json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_construct(args: ConstructArgs) -> Result<(), CliError> {
    let mut kernels: Vec<BitMatrix> =
        args.kernel.iter().map(|p| load_kernel(p)).collect::<Result<_, _>>()?;
    if let Some(levels) = args.levels {
        if kernels.len() != 1 {
            return Err(CliError::Usage("--levels requires exactly one --kernel".into()));
        }
        kernels = vec![kernels[0].clone(); levels];
    }
    let design = if let Some(path) = args.design_z {
        let z: Vec<f64> = read(&path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Usage(format!("bad design-z file: {e}")))?;
        DesignSpec::Z { z }
    } else {
        let eps = require(args.bec, "--bec or --design-z")?;
        DesignSpec::Bec { eps: check_unit(eps, "--bec")? }
    };
    let code = PolarCode::construct(kernels, design, args.k)?;
    let descriptor = code.to_json();
    println!(
        "N={} K={} union_bound={}",
        code.block_len(),
        code.message_len(),
        code.union_bound()
    );
    match args.out.as_deref() {
        Some(path) => write(path, &descriptor)?,
        None => println!("{descriptor}"),
    }
    Ok(())
}

fn parse_bits(text: &str) -> Result<Vec<u8>, CliError> {
    text.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(CliError::Usage(format!("bad bit character {other:?}"))),
        })
        .collect()
}

fn bits_to_string(bits: &[u8]) -> String {
    bits.iter().map(|b| char::from(b'0' + b)).collect()
}

fn cmd_encode(args: EncodeArgs) -> Result<(), CliError> {
    let code = PolarCode::from_json(&read(&args.code)?)?;
    let message = parse_bits(&args.message)?;
    let x = code.encode(&message)?;
    println!("{}", bits_to_string(&x));
    Ok(())
}

fn cmd_decode(args: DecodeArgs) -> Result<(), CliError> {
    let code = PolarCode::from_json(&read(&args.code)?)?;
    let likelihoods = if let Some(received) = &args.received {
        bec_likelihoods(received)?
    } else if let Some(path) = &args.likelihoods {
        read(path)?
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|l| {
                let mut parts = l.split(',').map(str::trim);
                let p0 = parts.next().and_then(|s| s.parse::<f64>().ok());
                let p1 = parts.next().and_then(|s| s.parse::<f64>().ok());
                match (p0, p1) {
                    (Some(a), Some(b)) => Ok((a, b)),
                    _ => Err(CliError::Usage(format!("bad likelihood row {l:?}"))),
                }
            })
            .collect::<Result<Vec<_>, _>>()?
    } else {
        return Err(CliError::Usage("need --received or --likelihoods".into()));
    };
    let out = code.sc_decode(&likelihoods)?;
    println!("u_hat={}", bits_to_string(&out.u_hat));
    println!("message={}", bits_to_string(&out.message));
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, config: &Value) -> Result<(), CliError> {
    let code = PolarCode::from_json(&read(&args.code)?)?;
    let channel = if let Some(path) = &args.channel {
        load_channel(path)?
    } else {
        let eps = require(args.bec.or(cfg_f64(config, "simulate", "bec")), "--bec or --channel")?;
        BinaryChannel::bec(check_unit(eps, "--bec")?)?
    };
    let trials = args
        .trials
        .or(cfg_u64(config, "simulate", "trials").map(|v| v as usize))
        .unwrap_or(1000);
    let seed = args.seed.or(cfg_u64(config, "simulate", "seed")).unwrap_or(0);
    let stats = code.simulate_fer(&channel, trials, seed, args.genie)?;
    let mut csv = format!("{CSV_HEADER}\ntrial,errors\n");
    for (t, errors) in stats.trial_bit_errors.iter().enumerate() {
        csv.push_str(&format!("{t},{errors}\n"));
    }
    let bound_ok = stats.fer <= stats.union_bound + 3.0 * stats.stderr;
    let mut json = serde_json::to_value(&stats).expect("stats serialize");
    json["fer_le_union_bound_plus_3se"] = Value::Bool(bound_ok);
    let json = serde_json::to_string_pretty(&json).expect("stats serialize");
    match args.out_csv.as_deref() {
        Some(path) => write(path, &csv)?,
        None => {}
    }
    match args.out_json.as_deref() {
        Some(path) => write(path, &json)?,
        None => println!("{json}"),
    }
    println!(
        "fer={} ber={} union_bound={} fer_le_union_bound_plus_3se: {}",
        stats.fer,
        stats.ber,
        stats.union_bound,
        if bound_ok { "pass" } else { "fail" }
    );
    Ok(())
}

fn cmd_report(args: ReportArgs, config: &Value) -> Result<(), CliError> {
    let eps = require(args.bec.or(cfg_f64(config, "report", "bec")), "--bec")?;
    check_unit(eps, "--bec")?;
    let levels = require(
        args.levels.or(cfg_u64(config, "report", "levels").map(|v| v as usize)),
        "--levels",
    )?;
    let delta = args.delta.or(cfg_f64(config, "report", "delta")).unwrap_or(0.1);
    let beta = args.beta.or(cfg_f64(config, "report", "beta")).unwrap_or(0.25);
    fs::create_dir_all(&args.out_dir)
        .map_err(|err| CliError::Io { path: args.out_dir.display().to_string(), err })?;
    let g = load_kernel(&args.kernel)?;
    let verdict = if is_polarizing(&g)? {
        let (i, k) = last_reduction_weight(&g)?;
        format!("polarizing: yes, i={}, k={}\n", i + 1, k)
    } else {
        "polarizing: no\n".to_string()
    };
    write(&args.out_dir.join("kernel.txt"), &verdict)?;
    run_polarize(
        &args.kernel,
        eps,
        levels,
        delta,
        beta,
        Some(&args.out_dir.join("polarize.csv")),
        Some(&args.out_dir.join("polarize.svg")),
    )
}
