//! `polarsec` — command-line front end: define wiretap channels, construct
//! two-layer codes, run the key-agreement and private-coding protocols, and
//! emit analysis reports.
//!
//! Exit codes: 0 success, 2 configuration/validation error, 3 exhaustive
//! bound refused (instance too large), 4 internal error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polarsec::bitchan::{
    bec_entropy_profile, construct_code, exact_entropy_profile, mc_entropy_profile,
    rebuild_encoder_model, ConstructParams, ConstructionMode,
};
use polarsec::eval::{
    exact_secrecy_l1, exact_secrecy_l1_alternate, polarization_csv, polarization_report,
    round_sig, run_trials, secrecy_bound_chain, super_source_check, ProtocolKind, TrialTask,
};
use polarsec::pcc::{pcc_decode, pcc_encode_with_options, transmit};
use polarsec::probability::key_rate_less_noisy;
use polarsec::rng::{Domain, Streams};
use polarsec::ska::{expand_public_matrix, ska_trial};
use polarsec::{BitBlock, CodeSpec, Error, Pmf, WiretapChannel};

#[derive(Parser)]
#[command(
    name = "polarsec",
    version,
    about = "Polarization-based secret-key agreement and private wiretap channel coding",
    propagate_version = true
)]
struct Cli {
    /// Cap the number of parallel worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Define a wiretap channel and write its canonical description.
    Channel {
        #[command(subcommand)]
        sub: ChannelCmd,
    },
    /// Construct a two-layer code for a channel.
    Construct(ConstructArgs),
    /// Run seeded key-agreement trial batches.
    Ska(SkaArgs),
    /// Run seeded private-coding trial batches, or encode one message.
    Pcc(PccArgs),
    /// Polarization tables, secrecy reports, super-source diagnostics.
    Analyze {
        #[command(subcommand)]
        sub: AnalyzeCmd,
    },
    /// Summarize the report artifacts in an output directory.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum ChannelCmd {
    /// Write a channel description file.
    Make(ChannelMakeArgs),
}

#[derive(Args)]
struct ChannelMakeArgs {
    /// Preset: `cascade` (degraded BSC cascade 0.05/0.15) or `toy`
    /// (cascade 0.1/0.25, sized for exhaustive analysis).
    #[arg(long)]
    preset: Option<String>,
    /// Degraded cascade "P1,P2": Bob sees BSC(P1), Eve sees Bob through
    /// BSC(P2).
    #[arg(long, value_name = "P1,P2")]
    bsc_cascade: Option<String>,
    /// Erasure pair "E1,E2": Bob sees BEC(E1), Eve independently BEC(E2).
    #[arg(long, value_name = "E1,E2")]
    bec_pair: Option<String>,
    /// Existing channel JSON (explicit table or shorthand form) to
    /// canonicalize.
    #[arg(long, value_name = "FILE")]
    table: Option<PathBuf>,
    /// Input distribution "P0,P1" (uniform when omitted).
    #[arg(long, value_name = "P0,P1")]
    input: Option<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// File name inside the output directory.
    #[arg(long, default_value = "channel.json")]
    name: String,
}

#[derive(Args)]
struct ConstructArgs {
    /// Channel description file.
    #[arg(long, value_name = "FILE")]
    channel: PathBuf,
    /// Inner block length (power of two).
    #[arg(long)]
    l: usize,
    /// Outer block length (power of two).
    #[arg(long)]
    m: usize,
    /// Inner selection threshold.
    #[arg(long)]
    eps1: f64,
    /// Outer selection threshold.
    #[arg(long)]
    eps2: f64,
    /// Profile estimator: `exact` (exhaustive, small L) or `mc`.
    #[arg(long, default_value = "exact")]
    mode: String,
    /// Monte Carlo construction trials (mc mode).
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Master seed; required for the randomized mc mode.
    #[arg(long)]
    seed: Option<u64>,
    /// Embed the estimated entropy profiles in the code file.
    #[arg(long)]
    keep_profiles: bool,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// File name inside the output directory.
    #[arg(long, default_value = "code.json")]
    name: String,
}

#[derive(Args)]
struct SkaArgs {
    /// Channel description file.
    #[arg(long, value_name = "FILE")]
    channel: PathBuf,
    /// Code description file (must hash-match the channel).
    #[arg(long, value_name = "FILE")]
    code: PathBuf,
    /// Number of protocol runs.
    #[arg(long, default_value_t = 100)]
    trials: u64,
    /// Master seed (mandatory: trials are randomized).
    #[arg(long)]
    seed: Option<u64>,
    /// Also write per-trial transcripts including raw secrets (test
    /// vectors). Off by default: reports alone never contain key material.
    #[arg(long)]
    dump_secrets: bool,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct PccArgs {
    /// Channel description file.
    #[arg(long, value_name = "FILE")]
    channel: PathBuf,
    /// Code description file (must hash-match the channel).
    #[arg(long, value_name = "FILE")]
    code: PathBuf,
    /// Number of uniform-message runs (batch mode).
    #[arg(long, default_value_t = 100)]
    trials: u64,
    /// Master seed (mandatory: encoding and transmission are randomized).
    #[arg(long)]
    seed: Option<u64>,
    /// Publish only the unpolarized complement bits; the nearly uniform
    /// ones are fixed to zero as code metadata.
    #[arg(long)]
    reduce_public: bool,
    /// Encode this one message instead of a batch: `J:hex` or plain hex,
    /// least significant bit first.
    #[arg(long, value_name = "HEX", conflicts_with = "message_file")]
    message: Option<String>,
    /// Read the single message from a hex file.
    #[arg(long, value_name = "FILE")]
    message_file: Option<PathBuf>,
    /// Also write per-trial transcripts including raw secrets.
    #[arg(long)]
    dump_secrets: bool,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Entropy-profile split fractions across block lengths.
    Polarization(PolarizationArgs),
    /// Entropy-deficit secrecy bound, plus the exact toy-scale oracle when
    /// the instance is small enough.
    Secrecy(SecrecyArgs),
    /// Exhaustive retained-bit check of one inner layer.
    Supersource(SupersourceArgs),
}

#[derive(Args)]
struct PolarizationArgs {
    /// Closed-form erasure analysis at this erasure probability.
    #[arg(long, conflicts_with = "channel")]
    bec: Option<f64>,
    /// Channel description file (profiles of X given the chosen side).
    #[arg(long, value_name = "FILE")]
    channel: Option<PathBuf>,
    /// Side information for the channel path: `y` or `z`.
    #[arg(long, default_value = "y")]
    side: String,
    /// Block-length range "MIN..MAX", doubling (both powers of two).
    #[arg(long, value_name = "MIN..MAX")]
    ns: String,
    /// Selection threshold.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Estimator for the channel path: `exact` or `mc`.
    #[arg(long, default_value = "mc")]
    mode: String,
    /// Monte Carlo trials per block length (channel mc path).
    #[arg(long, default_value_t = 20_000)]
    trials: u64,
    /// Master seed; required for the randomized mc path.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct SecrecyArgs {
    /// Channel description file.
    #[arg(long, value_name = "FILE")]
    channel: PathBuf,
    /// Code description file with embedded profiles (`construct
    /// --keep-profiles`).
    #[arg(long, value_name = "FILE")]
    code: PathBuf,
    /// Protocol whose secrecy is evaluated: `ska` or `pcc`.
    #[arg(long, default_value = "ska")]
    protocol: String,
    /// Insist on the exhaustive oracle; refuse (exit 3) when the instance
    /// is too large instead of omitting the exact value.
    #[arg(long)]
    exact: bool,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct SupersourceArgs {
    /// Channel description file.
    #[arg(long, value_name = "FILE")]
    channel: PathBuf,
    /// Inner block length (power of two, exhaustive scale).
    #[arg(long)]
    l: usize,
    /// Inner selection threshold.
    #[arg(long)]
    eps1: f64,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding previously written artifacts.
    #[arg(long, value_name = "DIR")]
    dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .is_err()
        {
            eprintln!("error: thread pool already initialized");
            return ExitCode::from(4);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Invalid(_) | Error::Serde(_) | Error::Io(_) => 2,
                Error::Infeasible { .. } => 3,
                Error::ZeroProbability { .. } => 4,
            })
        }
    }
}

fn dispatch(command: Command) -> polarsec::Result<()> {
    match command {
        Command::Channel {
            sub: ChannelCmd::Make(args),
        } => channel_make(args),
        Command::Construct(args) => construct(args),
        Command::Ska(args) => ska(args),
        Command::Pcc(args) => pcc(args),
        Command::Analyze { sub } => match sub {
            AnalyzeCmd::Polarization(args) => analyze_polarization(args),
            AnalyzeCmd::Secrecy(args) => analyze_secrecy(args),
            AnalyzeCmd::Supersource(args) => analyze_supersource(args),
        },
        Command::Report(args) => report(args),
    }
}

// ---------------------------------------------------------------------------
// shared plumbing
// ---------------------------------------------------------------------------

fn require_seed(seed: Option<u64>, what: &str) -> polarsec::Result<u64> {
    seed.ok_or_else(|| Error::invalid(format!("{what} is randomized: --seed is required")))
}

fn parse_pair(s: &str, what: &str) -> polarsec::Result<(f64, f64)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| Error::invalid(format!("{what}: expected \"A,B\", got {s:?}")))?;
    let pa = a
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("{what}: bad number {a:?}")))?;
    let pb = b
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("{what}: bad number {b:?}")))?;
    Ok((pa, pb))
}

fn load_channel(path: &Path) -> polarsec::Result<WiretapChannel> {
    let text = fs::read_to_string(path)?;
    WiretapChannel::from_json_str(&text)
}

fn load_code(path: &Path) -> polarsec::Result<CodeSpec> {
    let text = fs::read_to_string(path)?;
    CodeSpec::from_json_str(&text)
}

/// Loads a code, checks it was built for this channel, and restores the
/// in-memory encoder model.
fn load_code_for_channel(
    code_path: &Path,
    channel: &WiretapChannel,
) -> polarsec::Result<CodeSpec> {
    let mut code = load_code(code_path)?;
    let hash = channel.content_hash();
    if code.source_hash != hash {
        return Err(Error::invalid(format!(
            "code was built for source {} but the channel hashes to {hash}",
            code.source_hash
        )));
    }
    rebuild_encoder_model(&mut code, &channel.source())?;
    Ok(code)
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> polarsec::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

/// Accepts `J:hex` (length-prefixed) or a plain hex string holding at least
/// `j` bits, least significant bit of each byte first.
fn parse_message(text: &str, j: usize) -> polarsec::Result<BitBlock> {
    let text = text.trim();
    let block = if text.contains(':') {
        BitBlock::from_hex(text)?
    } else {
        let mut bits = Vec::with_capacity(text.len() * 4);
        for ch in text.chars() {
            let v = ch
                .to_digit(16)
                .ok_or_else(|| Error::invalid(format!("message: non-hex character {ch:?}")))?;
            for k in 0..4 {
                bits.push(((v >> k) & 1) as u8);
            }
        }
        bits.truncate(j);
        BitBlock::new(bits)?
    };
    if block.len() != j {
        return Err(Error::invalid(format!(
            "message has {} bits but the code carries J = {j}",
            block.len()
        )));
    }
    Ok(block)
}

fn parse_mode(s: &str) -> polarsec::Result<ConstructionMode> {
    s.parse::<ConstructionMode>()
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

fn channel_make(args: ChannelMakeArgs) -> polarsec::Result<()> {
    let input = match &args.input {
        Some(s) => {
            let (p0, p1) = parse_pair(s, "--input")?;
            Pmf::new(vec![p0, p1])?
        }
        None => Pmf::uniform(2),
    };
    let specified = [
        args.preset.is_some(),
        args.bsc_cascade.is_some(),
        args.bec_pair.is_some(),
        args.table.is_some(),
    ]
    .iter()
    .filter(|&&b| b)
    .count();
    if specified != 1 {
        return Err(Error::invalid(
            "choose exactly one of --preset, --bsc-cascade, --bec-pair, --table",
        ));
    }
    let channel = if let Some(preset) = &args.preset {
        match preset.as_str() {
            "cascade" => WiretapChannel::bsc_cascade(0.05, 0.15, input)?,
            "toy" => WiretapChannel::bsc_cascade(0.1, 0.25, input)?,
            other => {
                return Err(Error::invalid(format!(
                    "unknown preset {other:?} (expected cascade or toy)"
                )))
            }
        }
    } else if let Some(s) = &args.bsc_cascade {
        let (p1, p2) = parse_pair(s, "--bsc-cascade")?;
        WiretapChannel::bsc_cascade(p1, p2, input)?
    } else if let Some(s) = &args.bec_pair {
        let (e1, e2) = parse_pair(s, "--bec-pair")?;
        WiretapChannel::bec_pair(e1, e2, input)?
    } else {
        let path = args.table.as_ref().expect("one option is set");
        let c = load_channel(path)?;
        if args.input.is_some() {
            return Err(Error::invalid(
                "--input cannot override the distribution of an explicit --table file",
            ));
        }
        c
    };

    let path = write_artifact(&args.out, &args.name, &channel.to_json_string())?;
    let source = channel.source();
    let (nx, ny, nz) = source.dims();
    println!("wrote {}", path.display());
    println!("hash {}", channel.content_hash());
    println!("alphabet |X|={nx} |Y|={ny} |Z|={nz}");
    println!(
        "H(X|Y) {}  H(X|Z) {}  key-rate benchmark {}",
        round_sig(source.h_x_given_y()),
        round_sig(source.h_x_given_z()),
        round_sig(key_rate_less_noisy(&source)),
    );
    Ok(())
}

fn construct(args: ConstructArgs) -> polarsec::Result<()> {
    let mode = parse_mode(&args.mode)?;
    let seed = match mode {
        ConstructionMode::Exact => args.seed.unwrap_or(0),
        ConstructionMode::Mc => require_seed(args.seed, "mc construction")?,
    };
    let channel = load_channel(&args.channel)?;
    let source = channel.source();
    let params = ConstructParams {
        l: args.l,
        m: args.m,
        eps1: args.eps1,
        eps2: args.eps2,
        mode,
        trials: args.trials,
        seed,
        keep_profiles: args.keep_profiles,
    };
    let code = construct_code(&source, &channel.content_hash(), &params)?;
    let path = write_artifact(&args.out, &args.name, &code.to_json_string()?)?;
    println!("wrote {}", path.display());
    println!("hash {}", code.content_hash);
    println!(
        "L {}  M {}  N {}  K {}  J {}  rate {}",
        code.l,
        code.m,
        code.n(),
        code.k(),
        code.j_total(),
        round_sig(code.rate()),
    );
    println!(
        "inner split |R| {}  |D| {}  |I| {}  (public/block {}, reduced {})",
        code.inner.r.len(),
        code.inner.d.len(),
        code.inner.i.len(),
        code.e_k_complement().len(),
        code.inner.i.len(),
    );
    Ok(())
}

fn ska(args: SkaArgs) -> polarsec::Result<()> {
    let seed = require_seed(args.seed, "a trial batch")?;
    let channel = load_channel(&args.channel)?;
    let code = load_code_for_channel(&args.code, &channel)?;
    let source = channel.source();
    let report = run_trials(&TrialTask::Ska { source: &source }, &code, args.trials, seed)?;
    let csv = write_artifact(&args.out, "ska_trials.csv", &report.records_csv())?;
    let json = write_artifact(
        &args.out,
        "ska_summary.json",
        &report.summary.to_json_string()?,
    )?;
    println!("wrote {}", csv.display());
    println!("wrote {}", json.display());
    if args.dump_secrets {
        let transcripts = dump_ska_transcripts(&source, &code, args.trials, seed)?;
        let path = write_artifact(&args.out, "ska_transcripts.json", &transcripts)?;
        println!("wrote {} (contains raw secrets)", path.display());
    }
    println!(
        "ska trials {}  mismatch {}/{} ({})  rate {}",
        report.summary.trials,
        report.summary.mismatches,
        report.summary.trials,
        round_sig(report.summary.mismatch_rate),
        round_sig(report.summary.rate),
    );
    Ok(())
}

fn dump_ska_transcripts(
    source: &polarsec::WiretapSource,
    code: &CodeSpec,
    trials: u64,
    seed: u64,
) -> polarsec::Result<String> {
    let streams = Streams::new(seed);
    let mut rows = Vec::new();
    for trial in 0..trials {
        let mut rng = streams.stream(Domain::Sampling, trial);
        let tr = ska_trial(source, code, &mut rng)?;
        rows.push(serde_json::json!({
            "trial": trial,
            "x": tr.x.to_hex(),
            "y": tr.y,
            "z": tr.z,
            "public": tr.public.rows().iter().map(BitBlock::to_hex).collect::<Vec<_>>(),
            "key_alice": tr.key_alice.to_hex(),
            "key_bob": tr.key_bob.as_ref().map(BitBlock::to_hex),
            "agree": tr.keys_agree(),
        }));
    }
    Ok(serde_json::to_string_pretty(&serde_json::json!({
        "schema_version": polarsec::eval::REPORT_SCHEMA,
        "code_hash": code.content_hash,
        "seed": seed,
        "trials": rows,
    }))?)
}

fn pcc(args: PccArgs) -> polarsec::Result<()> {
    let seed = require_seed(args.seed, "private coding")?;
    let channel = load_channel(&args.channel)?;
    let code = load_code_for_channel(&args.code, &channel)?;

    let single = match (&args.message, &args.message_file) {
        (Some(text), None) => Some(parse_message(text, code.j_total())?),
        (None, Some(path)) => Some(parse_message(&fs::read_to_string(path)?, code.j_total())?),
        (None, None) => None,
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };

    if let Some(message) = single {
        return pcc_single(&args, &channel, &code, &message, seed);
    }

    let report = run_trials(
        &TrialTask::Pcc {
            channel: &channel,
            reduce_public: args.reduce_public,
        },
        &code,
        args.trials,
        seed,
    )?;
    let csv = write_artifact(&args.out, "pcc_trials.csv", &report.records_csv())?;
    let json = write_artifact(
        &args.out,
        "pcc_summary.json",
        &report.summary.to_json_string()?,
    )?;
    println!("wrote {}", csv.display());
    println!("wrote {}", json.display());
    if args.dump_secrets {
        let transcripts = dump_pcc_transcripts(&channel, &code, args.trials, seed, args.reduce_public)?;
        let path = write_artifact(&args.out, "pcc_transcripts.json", &transcripts)?;
        println!("wrote {} (contains raw secrets)", path.display());
    }
    println!(
        "pcc trials {}  frame errors {}/{} ({})  rate {}",
        report.summary.trials,
        report.summary.mismatches,
        report.summary.trials,
        round_sig(report.summary.mismatch_rate),
        round_sig(report.summary.rate),
    );
    Ok(())
}

fn pcc_single(
    args: &PccArgs,
    channel: &WiretapChannel,
    code: &CodeSpec,
    message: &BitBlock,
    seed: u64,
) -> polarsec::Result<()> {
    let streams = Streams::new(seed);
    let mut rng = streams.stream(Domain::Sampling, 0);
    let enc = pcc_encode_with_options(message, code, channel.input(), args.reduce_public, &mut rng)?;
    let (y, z) = transmit(&enc.x, channel, &mut rng);
    let full = if args.reduce_public {
        expand_public_matrix(&enc.public, code)?
    } else {
        enc.public.clone()
    };
    let guess = pcc_decode(&y, &full, code, &channel.source().xy_joint())?;
    let delivered = guess.as_ref() == Some(message);
    let transcript = serde_json::to_string_pretty(&serde_json::json!({
        "schema_version": polarsec::eval::REPORT_SCHEMA,
        "code_hash": code.content_hash,
        "seed": seed,
        "message": message.to_hex(),
        "guess": guess.as_ref().map(BitBlock::to_hex),
        "delivered": delivered,
        "x": enc.x.to_hex(),
        "y": y,
        "z": z,
        "public": enc.public.rows().iter().map(BitBlock::to_hex).collect::<Vec<_>>(),
        "reduced_public": args.reduce_public,
        "encoder_fallbacks": enc.fallbacks,
    }))?;
    let path = write_artifact(&args.out, "pcc_transcript.json", &transcript)?;
    println!("wrote {}", path.display());
    println!("delivered {delivered}");
    Ok(())
}

fn dump_pcc_transcripts(
    channel: &WiretapChannel,
    code: &CodeSpec,
    trials: u64,
    seed: u64,
    reduce_public: bool,
) -> polarsec::Result<String> {
    let streams = Streams::new(seed);
    let xy = channel.source().xy_joint();
    let mut rows = Vec::new();
    for trial in 0..trials {
        let mut msg_rng = streams.stream(Domain::Message, trial);
        let message = polarsec::pcc::uniform_message(code, &mut msg_rng);
        let mut rng = streams.stream(Domain::Sampling, trial);
        let enc = pcc_encode_with_options(&message, code, channel.input(), reduce_public, &mut rng)?;
        let (y, z) = transmit(&enc.x, channel, &mut rng);
        let full = if reduce_public {
            expand_public_matrix(&enc.public, code)?
        } else {
            enc.public.clone()
        };
        let guess = pcc_decode(&y, &full, code, &xy)?;
        rows.push(serde_json::json!({
            "trial": trial,
            "message": message.to_hex(),
            "guess": guess.as_ref().map(BitBlock::to_hex),
            "delivered": guess.as_ref() == Some(&message),
            "x": enc.x.to_hex(),
            "y": y,
            "z": z,
            "public": enc.public.rows().iter().map(BitBlock::to_hex).collect::<Vec<_>>(),
        }));
    }
    Ok(serde_json::to_string_pretty(&serde_json::json!({
        "schema_version": polarsec::eval::REPORT_SCHEMA,
        "code_hash": code.content_hash,
        "seed": seed,
        "reduced_public": reduce_public,
        "trials": rows,
    }))?)
}

fn parse_block_range(s: &str) -> polarsec::Result<Vec<usize>> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| Error::invalid(format!("--ns: expected \"MIN..MAX\", got {s:?}")))?;
    let lo: usize = lo
        .parse()
        .map_err(|_| Error::invalid(format!("--ns: bad number {lo:?}")))?;
    let hi: usize = hi
        .parse()
        .map_err(|_| Error::invalid(format!("--ns: bad number {hi:?}")))?;
    if lo < 2 || !lo.is_power_of_two() || !hi.is_power_of_two() || lo > hi {
        return Err(Error::invalid(
            "--ns endpoints must be powers of two with MIN ≤ MAX",
        ));
    }
    let mut out = Vec::new();
    let mut n = lo;
    while n <= hi {
        out.push(n);
        n *= 2;
    }
    Ok(out)
}

fn analyze_polarization(args: PolarizationArgs) -> polarsec::Result<()> {
    let lengths = parse_block_range(&args.ns)?;
    let (rows, target) = if let Some(erasure) = args.bec {
        let rows = lengths
            .iter()
            .map(|&n| Ok((n, bec_entropy_profile(erasure, n)?)))
            .collect::<polarsec::Result<Vec<_>>>()?;
        (rows, erasure)
    } else {
        let path = args
            .channel
            .as_ref()
            .ok_or_else(|| Error::invalid("choose --bec or --channel"))?;
        let channel = load_channel(path)?;
        let source = channel.source();
        let (joint, target) = match args.side.as_str() {
            "y" => (source.xy_joint(), source.h_x_given_y()),
            "z" => (source.xz_joint(), source.h_x_given_z()),
            other => {
                return Err(Error::invalid(format!(
                    "--side must be y or z, got {other:?}"
                )))
            }
        };
        let rows = match args.mode.as_str() {
            "exact" => lengths
                .iter()
                .map(|&n| Ok((n, exact_entropy_profile(&joint, n)?)))
                .collect::<polarsec::Result<Vec<_>>>()?,
            "mc" => {
                let seed = require_seed(args.seed, "mc profile estimation")?;
                lengths
                    .iter()
                    .map(|&n| {
                        Ok((n, mc_entropy_profile(&joint, n, args.trials, seed ^ n as u64)?))
                    })
                    .collect::<polarsec::Result<Vec<_>>>()?
            }
            other => {
                return Err(Error::invalid(format!(
                    "--mode must be exact or mc, got {other:?}"
                )))
            }
        };
        (rows, target)
    };
    let table = polarization_report(&rows, args.eps, target)?;
    let csv = polarization_csv(&table);
    let path = write_artifact(&args.out, "polarization.csv", &csv)?;
    println!("wrote {}", path.display());
    for row in &table {
        println!(
            "n {}  |R|/n {}  |D|/n {}  |I|/n {}",
            row.n,
            round_sig(row.r_fraction),
            round_sig(row.d_fraction),
            round_sig(row.i_fraction),
        );
    }
    Ok(())
}

fn analyze_secrecy(args: SecrecyArgs) -> polarsec::Result<()> {
    let protocol = match args.protocol.as_str() {
        "ska" => ProtocolKind::Ska,
        "pcc" => ProtocolKind::Pcc,
        other => {
            return Err(Error::invalid(format!(
                "--protocol must be ska or pcc, got {other:?}"
            )))
        }
    };
    let channel = load_channel(&args.channel)?;
    let code = load_code_for_channel(&args.code, &channel)?;
    let profiles = code.outer_profiles.clone().ok_or_else(|| {
        Error::invalid("code file carries no profiles; reconstruct with --keep-profiles")
    })?;
    let mut report = secrecy_bound_chain(&code, &profiles)?;
    let source = channel.source();
    match exact_secrecy_l1(&source, &code, protocol) {
        Ok(l1) => {
            let alt = exact_secrecy_l1_alternate(&source, &code, protocol)?;
            if (l1 - alt).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "internal oracle disagreement: {l1} vs {alt}"
                )));
            }
            report.exact_l1 = Some(l1);
        }
        Err(e @ Error::Infeasible { .. }) => {
            if args.exact {
                return Err(e);
            }
            println!("exact oracle skipped: {e}");
        }
        Err(e) => return Err(e),
    }
    let path = write_artifact(&args.out, "secrecy.json", &report.to_json_string()?)?;
    println!("wrote {}", path.display());
    println!(
        "J {}  deficit {}  budget {}  l1-bound {}  exact-l1 {}",
        report.j_total,
        round_sig(report.entropy_deficit),
        round_sig(report.deficit_budget),
        round_sig(report.pinsker_bound),
        report
            .exact_l1
            .map(|v| round_sig(v).to_string())
            .unwrap_or_else(|| "n/a".into()),
    );
    Ok(())
}

fn analyze_supersource(args: SupersourceArgs) -> polarsec::Result<()> {
    let channel = load_channel(&args.channel)?;
    let source = channel.source();
    let report = super_source_check(&source, args.l, args.eps1)?;
    let json = serde_json::to_string_pretty(&report)?;
    let path = write_artifact(&args.out, "supersource.json", &json)?;
    println!("wrote {}", path.display());
    println!(
        "L {}  K {}  H(retained | receiver view) {}  budget {}  identity gap {}",
        report.l,
        report.k,
        round_sig(report.retained_given_receiver),
        round_sig(report.receiver_budget),
        round_sig(report.rate_identity_gap),
    );
    println!(
        "retained-bit bound {}",
        if report.holds { "PASS" } else { "FAIL" }
    );
    Ok(())
}

fn report(args: ReportArgs) -> polarsec::Result<()> {
    let mut found = 0usize;
    let dir = &args.dir;
    if let Ok(text) = fs::read_to_string(dir.join("channel.json")) {
        let channel = WiretapChannel::from_json_str(&text)?;
        println!("channel.json  hash {}", channel.content_hash());
        found += 1;
    }
    if let Ok(text) = fs::read_to_string(dir.join("code.json")) {
        let code = CodeSpec::from_json_str(&text)?;
        println!(
            "code.json  L {} M {} K {} J {} rate {}",
            code.l,
            code.m,
            code.k(),
            code.j_total(),
            round_sig(code.rate()),
        );
        found += 1;
    }
    for name in ["ska_summary.json", "pcc_summary.json"] {
        if let Ok(text) = fs::read_to_string(dir.join(name)) {
            let summary: polarsec::eval::TrialSummary = serde_json::from_str(&text)?;
            println!(
                "{name}  protocol {} trials {} mismatch {} [{}, {}] seed {}",
                summary.protocol,
                summary.trials,
                round_sig(summary.mismatch_rate),
                round_sig(summary.mismatch_interval.lo),
                round_sig(summary.mismatch_interval.hi),
                summary.seed,
            );
            found += 1;
        }
    }
    if let Ok(text) = fs::read_to_string(dir.join("secrecy.json")) {
        let report: polarsec::eval::SecrecyReport = serde_json::from_str(&text)?;
        println!(
            "secrecy.json  J {} deficit {} l1-bound {}",
            report.j_total,
            round_sig(report.entropy_deficit),
            round_sig(report.pinsker_bound),
        );
        found += 1;
    }
    if let Ok(text) = fs::read_to_string(dir.join("supersource.json")) {
        println!(
            "supersource.json  {}",
            if text.contains("\"holds\": true") {
                "PASS"
            } else {
                "FAIL"
            }
        );
        found += 1;
    }
    if let Ok(text) = fs::read_to_string(dir.join("polarization.csv")) {
        let rows = text.lines().count().saturating_sub(1);
        println!("polarization.csv  {rows} rows");
        found += 1;
    }
    if found == 0 {
        return Err(Error::invalid(format!(
            "no known artifacts in {}",
            dir.display()
        )));
    }
    Ok(())
}
