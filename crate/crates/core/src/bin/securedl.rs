//! Command-line front end for the aggregation simulator: single runs,
//! Byzantine-fraction sweeps, primitive benchmarks, and transcript audits.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use securedl::attacks::AttackKind;
use securedl::mpc::{read_transcript_dump, Transcript};
use securedl::sim::audit::audit_transcript;
use securedl::sim::bench::{bench_ops, bench_table};
use securedl::sim::config::{DatasetChoice, Rule, SimConfig};
use securedl::sim::emit::{build_id, csv_string, write_csv, write_json};
use securedl::sim::run::{load_data, run_streaming, RunOutput};
use securedl::{Error, Result};

#[derive(Parser)]
#[command(
    name = "securedl",
    version,
    about = "Simulator for privacy-preserving Byzantine-robust decentralized learning"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one simulation and emit per-round metrics
    Run(RunArgs),
    /// Run a grid of Byzantine fractions and report final accuracies
    Sweep(SweepArgs),
    /// Time the secure primitives across party counts
    Bench(BenchArgs),
    /// Chi-square uniformity audit of opened protocol values
    AuditTranscript(AuditArgs),
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// JSON config file; command-line flags override its fields
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Number of clients (also the number of MPC parties)
    #[arg(long, value_name = "N")]
    clients: Option<usize>,
    /// Number of Byzantine clients; ids 0..B attack
    #[arg(long, value_name = "B")]
    byzantine: Option<usize>,
    /// Attack: none, sf (sign flip), noise (Gaussian replacement),
    /// sa (scaling), lf (label flip), combi (combination)
    #[arg(long, value_name = "KIND")]
    attack: Option<String>,
    /// Aggregation rule: mean, dkrum, dmedian, bridge, mozi, securedl
    #[arg(long, value_name = "RULE")]
    rule: Option<String>,
    /// Cosine acceptance threshold for the secure rule
    #[arg(long, value_name = "X")]
    tau: Option<f64>,
    #[arg(long, value_name = "R")]
    rounds: Option<usize>,
    /// Dataset: mnist (IDX files; see --help of run) or synth
    #[arg(long, value_name = "NAME")]
    dataset: Option<String>,
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Training subset size (default 2000; desk-scale MNIST protocol runs
    /// use 10000)
    #[arg(long, value_name = "N")]
    train_samples: Option<usize>,
    /// Test subset size (default 500; desk-scale MNIST protocol runs use
    /// 2000)
    #[arg(long, value_name = "N")]
    test_samples: Option<usize>,
    /// Per-round evaluation sample cap; 0 evaluates the full test set
    /// every round (the final round always does)
    #[arg(long, value_name = "N")]
    eval_subset: Option<usize>,
    /// Hidden width of the MLP
    #[arg(long, value_name = "N")]
    hidden: Option<usize>,
    /// Divide the filtered aggregate by accepted+1 instead of n
    #[arg(long)]
    divide_by_accepted: bool,
    /// Measure protocol phase timings (makes CSV output run-dependent)
    #[arg(long)]
    timing: bool,
    /// Write metrics CSV here and a JSON manifest next to it; without
    /// this the CSV goes to stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Record every opened protocol word and write the binary dump here
    /// (securedl rule only; intended for small runs)
    #[arg(long, value_name = "FILE")]
    dump_transcript: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    base: RunArgs,
    /// Comma-separated Byzantine fractions of the client count
    #[arg(long, value_name = "LIST", default_value = "0.0,0.2,0.4,0.6,0.8")]
    fractions: String,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated party counts
    #[arg(long, value_name = "LIST", default_value = "3,5,8,10")]
    sizes: String,
    /// Vector dimension the primitives run at
    #[arg(long, default_value_t = 1024)]
    dim: usize,
    /// Repetitions per primitive; the median is reported
    #[arg(long, default_value_t = 5)]
    iters: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the table as CSV here instead of printing it
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    /// Audit a transcript dump written by `run --dump-transcript`;
    /// without this a fresh recorded run provides the transcript
    #[arg(long = "in", value_name = "FILE")]
    input: Option<PathBuf>,
    /// Significance level: 0.05, 0.01 or 0.001
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    #[command(flatten)]
    base: RunArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run(args) => cmd_run(&args),
        Cmd::Sweep(args) => cmd_sweep(&args),
        Cmd::Bench(args) => cmd_bench(&args),
        Cmd::AuditTranscript(args) => cmd_audit(&args),
    }
}

fn parse_attack(s: &str) -> Result<AttackKind> {
    Ok(match s {
        "none" => AttackKind::None,
        "sf" => AttackKind::SignFlip,
        "noise" => AttackKind::Gaussian,
        "sa" => AttackKind::Scaling,
        "lf" => AttackKind::LabelFlip,
        "combi" => AttackKind::Combination,
        other => {
            return Err(Error::Config(format!(
                "unknown attack {other:?}; use none, sf, noise, sa, lf or combi"
            )))
        }
    })
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<T>()
                .map_err(|_| Error::Config(format!("bad {what} entry {p:?}")))
        })
        .collect()
}

/// Config file (if any) overlaid with the command-line flags.
fn build_config(args: &RunArgs) -> Result<SimConfig> {
    let mut cfg: SimConfig = match &args.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => SimConfig::default(),
    };
    if let Some(n) = args.clients {
        cfg.clients = n;
    }
    if let Some(kind) = args.attack.as_deref() {
        cfg.attack.kind = parse_attack(kind)?;
    }
    if let Some(b) = args.byzantine {
        cfg = cfg.with_byzantine_count(b);
    }
    if let Some(rule) = args.rule.as_deref() {
        cfg.rule = Rule::parse(rule)?;
    }
    if let Some(tau) = args.tau {
        cfg.tau = tau;
    }
    if let Some(r) = args.rounds {
        cfg.rounds = r;
    }
    if let Some(d) = args.dataset.as_deref() {
        cfg.dataset = DatasetChoice::parse(d)?;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.train_samples {
        cfg.train_samples = n;
    }
    if let Some(n) = args.test_samples {
        cfg.test_samples = n;
    }
    if let Some(n) = args.eval_subset {
        cfg.eval_subset = n;
    }
    if let Some(n) = args.hidden {
        cfg.hidden = n;
    }
    if args.divide_by_accepted {
        cfg.divide_by_accepted = true;
    }
    if args.timing {
        cfg.timing = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn describe(cfg: &SimConfig) -> String {
    format!(
        "rule {} | {} clients ({} byzantine, attack {:?}) | dataset {} ({} train / {} test) | {} rounds | seed {}",
        cfg.rule.name(),
        cfg.clients,
        cfg.attack.byzantine.len(),
        cfg.attack.kind,
        cfg.dataset.name(),
        cfg.train_samples,
        cfg.test_samples,
        cfg.rounds,
        cfg.seed
    )
}

fn execute(cfg: &SimConfig, record: bool) -> Result<RunOutput> {
    let (train, test) = load_data(cfg)?;
    eprintln!("{}", describe(cfg));
    run_streaming(cfg, &train, &test, record, |m| {
        eprintln!(
            "round {:>4}: mean_acc {:.4} loss {:.4} rejected {}",
            m.round, m.mean_acc, m.loss, m.rejected_count
        );
    })
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = build_config(args)?;
    if args.dump_transcript.is_some() && cfg.rule != Rule::SecureDl {
        return Err(Error::Config(
            "only the securedl rule produces a protocol transcript".into(),
        ));
    }
    let out = execute(&cfg, args.dump_transcript.is_some())?;
    if let Some(path) = &args.dump_transcript {
        let t = out
            .transcript
            .as_ref()
            .expect("recorded run returns a transcript");
        let mut file = fs::File::create(path)?;
        t.dump(&mut file)?;
        eprintln!("transcript dump: {}", path.display());
    }
    let f = out.final_metrics();
    match &args.out {
        Some(path) => {
            write_csv(&out.rounds, path)?;
            let json_path = sibling(path, "json");
            write_json(&out, &json_path)?;
            println!(
                "wrote {} and {} (build {})",
                path.display(),
                json_path.display(),
                build_id()
            );
        }
        None => print!("{}", csv_string(&out.rounds)),
    }
    eprintln!(
        "final: mean_acc {:.4} min_acc {:.4} max_acc {:.4} loss {:.4}",
        f.mean_acc, f.min_acc, f.max_acc, f.loss
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let base = build_config(&args.base)?;
    let fractions: Vec<f64> = parse_list(&args.fractions, "fraction")?;
    if fractions.is_empty() {
        return Err(Error::Config("sweep needs at least one fraction".into()));
    }
    let mut rows =
        String::from("fraction,byzantine,final_mean_acc,final_min_acc,final_max_acc,final_loss\n");
    for &frac in &fractions {
        if !(0.0..1.0).contains(&frac) {
            return Err(Error::Config(format!(
                "byzantine fraction must be in [0, 1), got {frac}"
            )));
        }
        let b = ((frac * base.clients as f64).round() as usize).min(base.clients - 1);
        if b > 0 && base.attack.kind == AttackKind::None {
            return Err(Error::Config(
                "a nonzero byzantine fraction needs an attack; pass --attack sf (or noise, sa, lf, combi)"
                    .into(),
            ));
        }
        let cfg = base.clone().with_byzantine_count(b);
        eprintln!("sweep point: fraction {frac} ({b} byzantine)");
        let out = execute(&cfg, false)?;
        let f = out.final_metrics();
        rows.push_str(&format!(
            "{},{},{:.4},{:.4},{:.4},{:.6}\n",
            frac, b, f.mean_acc, f.min_acc, f.max_acc, f.loss
        ));
    }
    match &args.base.out {
        Some(path) => {
            fs::write(path, rows)?;
            println!("wrote {}", path.display());
        }
        None => print!("{rows}"),
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let sizes: Vec<usize> = parse_list(&args.sizes, "party count")?;
    if sizes.is_empty() {
        return Err(Error::Config("bench needs at least one party count".into()));
    }
    let rows = bench_ops(&sizes, args.dim, args.iters, args.seed)?;
    match &args.out {
        Some(path) => {
            let mut csv = String::from("n,t_cosine_ms,t_compare_ms,t_norm_ms\n");
            for r in &rows {
                csv.push_str(&format!(
                    "{},{:.3},{:.3},{:.3}\n",
                    r.n, r.t_cosine_ms, r.t_compare_ms, r.t_norm_ms
                ));
            }
            fs::write(path, csv)?;
            println!("wrote {}", path.display());
        }
        None => print!("{}", bench_table(&rows)),
    }
    Ok(())
}

fn cmd_audit(args: &AuditArgs) -> Result<()> {
    let transcript = match &args.input {
        Some(path) => {
            let mut file = fs::File::open(path)?;
            Transcript::from_records(&read_transcript_dump(&mut file)?)
        }
        None => {
            let mut base = args.base.clone();
            if base.rule.is_none() {
                base.rule = Some("securedl".into());
            }
            let cfg = build_config(&base)?;
            if cfg.rule != Rule::SecureDl {
                return Err(Error::Config(
                    "only the securedl rule produces a protocol transcript".into(),
                ));
            }
            execute(&cfg, true)?
                .transcript
                .expect("recorded run returns a transcript")
        }
    };
    let report = audit_transcript(&transcript, args.alpha)?;
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(report.render().as_bytes())?;
    if report.passed {
        Ok(())
    } else {
        Err(Error::Protocol(
            "opened values failed the uniformity audit".into(),
        ))
    }
}
