use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dualdrive::io::{self, SkippedLine};
use dualdrive::report::save_ablation_csv;
use dualdrive::runtime::WallClock;
use dualdrive::{encoder_for, synth, AgentBackends};
use dualdrive_core::dual::{Experience, MemoryBank, PromptSet};
use dualdrive_core::encoder::{encode, precision_at_k, train, EncoderConfig, TrainingRecord};
use dualdrive_core::harness::{
    run_ablation, run_episode, run_reflection_loop, AblationSpec, EpisodeConfig, EpisodeContext, EpisodeOutcome, Mode,
};
use dualdrive_core::sim::scenario::Scenario;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "dualdrive", version, about = "Dual-process driving agent harness")]
struct Cli {
    /// Episode configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed (and the subsampling seed for `ablate`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode.
    Run(RunArgs),
    /// Repeat a scenario, reflecting on accidents between rounds.
    ReflectLoop {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
    },
    /// Few-shot count by bank size grid in heuristic mode.
    Ablate {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        bank: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0usize, 1, 3])]
        ks: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [90usize, 900])]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Inspect and convert memory banks.
    #[command(subcommand)]
    Bank(BankCommand),
    /// Train the scene encoder on a dataset file.
    #[command(alias = "train")]
    TrainEncoder {
        #[arg(long)]
        data: PathBuf,
        /// Encoder configuration (JSON); defaults otherwise.
        #[arg(long)]
        encoder_config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encode every record of a dataset into a token file.
    Encode {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrieval precision of held-out queries against a training set.
    EvalPrecision {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Write a synthetic dataset whose labels are readable from the features.
    SynthData {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Scenario file; falls back to the config's `scenario`.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Bank to start from; falls back to the config's `bank`.
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    reflection: bool,
    /// Where to write the grown bank; `<out-dir>/bank.jsonl` by default.
    #[arg(long)]
    save_bank: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Analytic,
    Heuristic,
}

#[derive(Subcommand)]
enum BankCommand {
    /// Write a bank as one portable JSON document.
    Export {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Read an exported document back into a line-delimited bank.
    Import {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    Stats {
        #[arg(long)]
        bank: PathBuf,
    },
    /// Seeded random subset, insertion order kept.
    Subsample {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Portable bank document produced by `bank export`.
#[derive(Serialize, Deserialize)]
struct BankExport {
    version: u32,
    entries: Vec<serde_json::Value>,
}

/// Exit status once the work is done: corrupt input records make it
/// nonzero without aborting.
#[derive(Default)]
struct Outcome {
    skipped: usize,
}

impl Outcome {
    fn note(&mut self, what: &Path, skipped: &[SkippedLine]) {
        for s in skipped {
            log::warn!("{}:{}: skipped: {}", what.display(), s.line, s.error);
        }
        if !skipped.is_empty() {
            eprintln!("{}: skipped {} corrupt record(s)", what.display(), skipped.len());
        }
        self.skipped += skipped.len();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(o) if o.skipped > 0 => ExitCode::from(2),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn base_config(cli: &Cli) -> Result<EpisodeConfig> {
    let mut cfg = match &cli.config {
        Some(p) => io::load_config(p)?,
        None => EpisodeConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    Ok(cfg)
}

fn scenario_path(arg: &Option<PathBuf>, cfg: &EpisodeConfig) -> Result<PathBuf> {
    match arg {
        Some(p) => Ok(p.clone()),
        None if !cfg.scenario.is_empty() => Ok(PathBuf::from(&cfg.scenario)),
        None => bail!("no scenario given (use --scenario or set `scenario` in the config)"),
    }
}

fn load_bank(path: &Path, outcome: &mut Outcome) -> Result<MemoryBank> {
    let loaded = io::load_bank(path)?;
    outcome.note(path, &loaded.skipped);
    Ok(loaded.bank)
}

fn load_dataset(path: &Path, outcome: &mut Outcome) -> Result<Vec<TrainingRecord>> {
    let lines = io::read_dataset(path)?;
    outcome.note(path, &lines.skipped);
    Ok(lines.records)
}

struct Prepared {
    cfg: EpisodeConfig,
    scenario: Scenario,
    bank: MemoryBank,
}

fn prepare(cli: &Cli, args: &RunArgs, outcome: &mut Outcome) -> Result<Prepared> {
    let mut cfg = base_config(cli)?;
    if let Some(m) = args.mode {
        cfg.mode = match m {
            ModeArg::Analytic => Mode::Analytic,
            ModeArg::Heuristic => Mode::Heuristic,
        };
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(b) = &args.bank {
        cfg.bank = Some(b.display().to_string());
    }
    cfg.reflection |= args.reflection;
    let path = scenario_path(&args.scenario, &cfg)?;
    cfg.scenario = path.display().to_string();
    cfg.validate()?;
    let scenario = io::load_scenario(&path)?;
    let bank = match &cfg.bank {
        Some(p) => load_bank(Path::new(p), outcome)?,
        None => MemoryBank::new(),
    };
    Ok(Prepared { cfg, scenario, bank })
}

fn write_outcome(dir: &Path, o: &EpisodeOutcome) -> Result<()> {
    io::write_jsonl(&dir.join("log.jsonl"), &o.log)?;
    io::write_json(&dir.join("report.json"), &o.report)?;
    Ok(())
}

fn summary(o: &EpisodeOutcome) -> String {
    let r = &o.report;
    format!("{}: RC {:.2} IS {:.3} DS {:.2} ({:?}, {} decisions)", r.scenario, r.rc, r.is, r.ds, r.end, r.decisions.len())
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    let prompts = PromptSet::default();
    let clock = WallClock::default();
    match &cli.command {
        Command::Run(args) => {
            let Prepared { cfg, scenario, mut bank } = prepare(&cli, args, &mut outcome)?;
            let encoder = encoder_for(&cfg)?;
            let agents = AgentBackends::from_config(&cfg)?;
            let ctx = EpisodeContext { prompts: &prompts, encoder: &encoder, backends: agents.backends(&cfg), clock: &clock };
            let out = run_episode(&scenario, &cfg, &ctx, &mut bank, 0);
            write_outcome(&cli.out_dir, &out)?;
            if !out.delta.is_empty() || out.report.revise.is_some() {
                let dest = args.save_bank.clone().unwrap_or_else(|| cli.out_dir.join("bank.jsonl"));
                io::save_bank(&dest, &bank)?;
                println!("bank: {} experiences -> {}", bank.len(), dest.display());
            }
            println!("{}", summary(&out));
        }
        Command::ReflectLoop { run, rounds } => {
            let Prepared { mut cfg, scenario, mut bank } = prepare(&cli, run, &mut outcome)?;
            cfg.reflection = true;
            let encoder = encoder_for(&cfg)?;
            let agents = AgentBackends::from_config(&cfg)?;
            let ctx = EpisodeContext { prompts: &prompts, encoder: &encoder, backends: agents.backends(&cfg), clock: &clock };
            let outs = run_reflection_loop(&scenario, &cfg, &ctx, &mut bank, *rounds)?;
            for (i, o) in outs.iter().enumerate() {
                write_outcome(&cli.out_dir.join(format!("round-{i}")), o)?;
                println!("round {i}: {}", summary(o));
            }
            let reports: Vec<_> = outs.iter().map(|o| &o.report).collect();
            io::write_json(&cli.out_dir.join("reports.json"), &reports)?;
            let dest = run.save_bank.clone().unwrap_or_else(|| cli.out_dir.join("bank.jsonl"));
            io::save_bank(&dest, &bank)?;
        }
        Command::Ablate { scenario, bank, ks, sizes, seeds } => {
            let mut cfg = base_config(&cli)?;
            let path = scenario_path(scenario, &cfg)?;
            cfg.scenario = path.display().to_string();
            cfg.bank = Some(bank.display().to_string());
            let sc = io::load_scenario(&path)?;
            let b = load_bank(bank, &mut outcome)?;
            let seeds = if seeds.is_empty() { vec![cli.seed.unwrap_or(0)] } else { seeds.clone() };
            let spec = AblationSpec { ks: ks.clone(), sizes: sizes.clone(), seeds };
            let encoder = encoder_for(&cfg)?;
            let agents = AgentBackends::from_config(&cfg)?;
            let ctx = EpisodeContext { prompts: &prompts, encoder: &encoder, backends: agents.backends(&cfg), clock: &clock };
            let report = run_ablation(&sc, &cfg, &ctx, &b, &spec);
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let dest = cli.out_dir.join("ablation.csv");
            save_ablation_csv(&dest, &report.rows)?;
            print!("{}", dualdrive::report::ablation_csv_string(&report.rows));
        }
        Command::Bank(cmd) => bank_command(&cli, cmd, &mut outcome)?,
        Command::TrainEncoder { data, encoder_config, epochs, out } => {
            let mut ecfg: EncoderConfig = match encoder_config {
                Some(p) => io::read_json(p)?,
                None => EncoderConfig::default(),
            };
            if let Some(e) = epochs {
                ecfg.epochs = *e;
            }
            if let Some(s) = cli.seed {
                ecfg.seed = s;
            }
            let records = load_dataset(data, &mut outcome)?;
            for (i, r) in records.iter().enumerate() {
                r.validate(&ecfg).with_context(|| format!("record {}", i + 1))?;
            }
            let (params, report) = train(&ecfg, &records)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let dest = out.clone().unwrap_or_else(|| cli.out_dir.join("encoder.json"));
            io::save_params(&dest, &params)?;
            io::write_json(&dest.with_extension("report.json"), &report)?;
            for (i, l) in report.epoch_losses.iter().enumerate() {
                println!("epoch {}: loss {l:.5}", i + 1);
            }
            println!("params -> {}", dest.display());
        }
        Command::Encode { params, data, out } => {
            let p = io::load_params(params)?;
            let records = load_dataset(data, &mut outcome)?;
            let mut tokens = Vec::with_capacity(records.len());
            for (i, r) in records.iter().enumerate() {
                let t = encode(&p, &r.features, &r.ego()).with_context(|| format!("record {}", i + 1))?;
                tokens.push(t);
            }
            let dest = out.clone().unwrap_or_else(|| cli.out_dir.join("tokens.jsonl"));
            io::write_jsonl(&dest, &tokens)?;
            println!("{} tokens -> {}", tokens.len(), dest.display());
        }
        Command::EvalPrecision { params, train: train_path, queries, k } => {
            let p = io::load_params(params)?;
            let enc = |records: Vec<TrainingRecord>| -> Result<Vec<_>> {
                records.iter().map(|r| Ok((encode(&p, &r.features, &r.ego())?, r.labels()))).collect()
            };
            let tr = enc(load_dataset(train_path, &mut outcome)?)?;
            let q = enc(load_dataset(queries, &mut outcome)?)?;
            let c = &p.config;
            let prec = precision_at_k(&tr, &q, *k, c.sigma_act, c.sigma_acc, c.brake_rule_eval)?;
            println!("precision@{k}: steer {:.4} brake {:.4}", prec.steer, prec.brake);
        }
        Command::SynthData { n, out } => {
            let ecfg = EncoderConfig::default();
            let records = synth::separable(*n, cli.seed.unwrap_or(0), &ecfg);
            io::write_dataset(out, &records, [ecfg.grid_n, ecfg.grid_c])?;
            println!("{} records -> {}", records.len(), out.display());
        }
    }
    Ok(outcome)
}

fn bank_command(cli: &Cli, cmd: &BankCommand, outcome: &mut Outcome) -> Result<()> {
    match cmd {
        BankCommand::Export { bank, out } => {
            let b = load_bank(bank, outcome)?;
            let entries = b.entries().iter().map(serde_json::to_value).collect::<Result<_, _>>()?;
            io::write_json(out, &BankExport { version: 1, entries })?;
            println!("exported {} experiences -> {}", b.len(), out.display());
        }
        BankCommand::Import { input, out } => {
            let doc: BankExport = io::read_json(input)?;
            if doc.version != 1 {
                bail!("unsupported bank export version {}", doc.version);
            }
            let mut b = MemoryBank::new();
            let mut skipped = Vec::new();
            for (i, v) in doc.entries.into_iter().enumerate() {
                let r = serde_json::from_value::<Experience>(v)
                    .map_err(|e| e.to_string())
                    .and_then(|e| b.insert(e).map_err(|e| e.to_string()));
                if let Err(error) = r {
                    skipped.push(SkippedLine { line: i + 1, error });
                }
            }
            outcome.note(input, &skipped);
            io::save_bank(out, &b)?;
            println!("imported {} experiences -> {}", b.len(), out.display());
        }
        BankCommand::Stats { bank } => {
            let b = load_bank(bank, outcome)?;
            println!("{}", serde_json::to_string_pretty(&b.stats())?);
        }
        BankCommand::Subsample { bank, size, out } => {
            let b = load_bank(bank, outcome)?;
            if *size > b.len() {
                eprintln!("warning: requested {size} of {} experiences; keeping all", b.len());
            }
            let sub = b.subsample(*size, cli.seed.unwrap_or(0));
            io::save_bank(out, &sub)?;
            println!("{} experiences -> {}", sub.len(), out.display());
        }
    }
    Ok(())
}
