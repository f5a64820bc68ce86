use std::io::BufReader;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sxgb_cli::driver::{script_clients, Driver};
use sxgb_cli::error::{CliError, Result};
use sxgb_cli::{bench, csvio, keys, trace_check};
use sxgb_cluster::net::{serve_enclave, serve_orchestrator, EnclaveLink};
use sxgb_cluster::{attest_cluster, default_manifest, launch, ClusterConfig, DirStorage, MasterService, Orchestrator};
use sxgb_protocol::rows::{write_records, EncryptedRowRecord};
use sxgb_protocol::{check_indices, encrypt_dataset, Deployment, ProtocolError, SymKey};

/// Encrypted, oblivious gradient boosting across mutually distrusting clients.
///
/// Exit codes: 0 success, 2 usage error, 3 protocol error, 4 trace divergence.
#[derive(Parser)]
#[command(name = "sxgb", version)]
struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More logging (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Create CA and platform keys, then one identity per client.
    Keygen {
        #[arg(long)]
        out: PathBuf,
        /// Client names, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        clients: Vec<String>,
    },
    /// Encrypt a CSV (header `label,f1,..,fd`) into a row-record file.
    Encrypt {
        #[arg(long)]
        input: PathBuf,
        /// Hex symmetric key file.
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Decrypt a row-record file back to CSV and check its coverage.
    Decrypt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        key: PathBuf,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the master enclave, with the worker enclaves in the same process.
    ServeEnclave {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the orchestrator between clients and the master enclave.
    ServeOrchestrator {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a client script.
    Client {
        #[arg(long)]
        script: PathBuf,
        /// Simulate clients, orchestrator and cluster in this process.
        #[arg(long)]
        in_process: bool,
        /// Enclave count for --in-process.
        #[arg(long, default_value_t = 3)]
        nodes: usize,
        /// Cluster config for socket mode.
        #[arg(long, required_unless_present = "in_process")]
        config: Option<PathBuf>,
        /// Directory holding client identities and platform.pub.pem.
        #[arg(long, required_unless_present = "in_process")]
        keys: Option<PathBuf>,
        /// Where models and predictions are written.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 30_000)]
        timeout_ms: u64,
    },
    /// Check that memory traces do not depend on secret data.
    TraceCheck {
        #[arg(long, value_enum)]
        scenario: trace_check::Scenario,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
    /// Time oblivious training against the plain reference trainer.
    Bench {
        #[arg(long, default_value_t = 4096)]
        n: usize,
        #[arg(long, default_value_t = 16)]
        d: usize,
        #[arg(long, default_value_t = 16)]
        bins: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = 3)]
        rounds: usize,
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = ["warn", "info", "debug", "trace"][usize::from(cli.verbose.min(3))];
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let mut rng = match cli.seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    };
    match run(cli.command, cli.seed, &mut rng) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Cmd, seed: Option<u64>, rng: &mut ChaCha20Rng) -> Result<()> {
    match cmd {
        Cmd::Keygen { out, clients } => {
            for f in keys::keygen(&out, &clients, rng)? {
                println!("{}", out.join(f).display());
            }
        }
        Cmd::Encrypt { input, key, output } => {
            let rows = csvio::read_csv(&input)?;
            let key = SymKey::load(&key)?;
            let mut w = std::io::BufWriter::new(std::fs::File::create(&output)?);
            write_records(&encrypt_dataset(&rows, &key, rng), &mut w)?;
            println!("{} rows -> {}", rows.len(), output.display());
        }
        Cmd::Decrypt { input, key, output } => decrypt(&input, &key, output.as_deref())?,
        Cmd::ServeEnclave { config } => {
            let cfg = ClusterConfig::load(&config)?;
            let platform = keys::load_platform_key(&cfg.platform_key)?;
            let manifest = match &cfg.manifest {
                Some(p) => std::fs::read(p)?,
                None => default_manifest(),
            };
            let deployment = Deployment::from_text(&std::fs::read_to_string(&cfg.deployment)?)?;
            let nodes = launch(&vec![manifest; cfg.nodes.len()], &platform, rng);
            let cluster = attest_cluster(cfg.topology.clone(), nodes, &platform.public_key(), rng)?;
            std::fs::create_dir_all(&cfg.storage)?;
            let master = MasterService::new(cluster, deployment, DirStorage { root: cfg.storage.clone() });
            let listener = TcpListener::bind(&cfg.nodes[0])?;
            log::info!("enclave listening on {}", listener.local_addr()?);
            serve_enclave(listener, master)?;
        }
        Cmd::ServeOrchestrator { config } => {
            let cfg = ClusterConfig::load(&config)?;
            let deployment = Deployment::from_text(&std::fs::read_to_string(&cfg.deployment)?)?;
            let link = connect_with_retry(&cfg.nodes[0])?;
            let listener = TcpListener::bind(&cfg.orchestrator)?;
            log::info!("orchestrator listening on {}", listener.local_addr()?);
            serve_orchestrator(listener, Orchestrator::new(deployment.clients), link)?;
        }
        Cmd::Client { script, in_process, nodes, config, keys, out, timeout_ms } => {
            let text = std::fs::read_to_string(&script)?;
            let names = script_clients(&text)?;
            let mut driver = if in_process {
                if names.is_empty() {
                    return Err(CliError::Usage("in-process scripts must start with a clients line".into()));
                }
                Driver::in_process(&names, nodes, rng)?
            } else {
                let cfg = ClusterConfig::load(config.as_deref().expect("required by clap"))?;
                Driver::remote(&cfg, keys.as_deref().expect("required by clap"), &names)?
            };
            driver.base = script.parent().map(Path::to_path_buf).unwrap_or_default();
            driver.timeout = Duration::from_millis(timeout_ms);
            if let Some(out) = &out {
                std::fs::create_dir_all(out)?;
            }
            driver.out = out;
            driver.run_script(&text)?;
        }
        Cmd::TraceCheck { scenario, trials } => {
            let report = trace_check::run(scenario, trials, seed.unwrap_or(0));
            println!("{report}");
            if !report.passed() {
                return Err(CliError::Divergence(format!("{scenario:?} traces diverge")));
            }
        }
        Cmd::Bench { n, d, bins, depth, rounds, workers } => {
            let report = bench::run(bench::BenchConfig { n, d, bins, depth, rounds, workers, seed: seed.unwrap_or(0) })?;
            println!("{report}");
        }
    }
    Ok(())
}

fn connect_with_retry(addr: &str) -> Result<EnclaveLink> {
    let mut last = None;
    for _ in 0..50 {
        match EnclaveLink::connect(addr) {
            Ok(l) => return Ok(l),
            Err(e) => last = Some(e),
        }
        std::thread::sleep(Duration::from_millis(100));
    }
    Err(last.expect("at least one attempt").into())
}

/// Reads records up to the first truncated one, decrypts them and reports
/// any index that is missing or repeated.
fn decrypt(input: &Path, key: &Path, output: Option<&Path>) -> Result<()> {
    let key = SymKey::load(key)?;
    let mut r = BufReader::new(std::fs::File::open(input)?);
    let mut records = Vec::new();
    let mut truncated = false;
    loop {
        match EncryptedRowRecord::read_from(&mut r) {
            Ok(Some(rec)) => records.push(rec),
            Ok(None) => break,
            Err(ProtocolError::Format(m)) => {
                log::warn!("stopped at record {}: {m}", records.len());
                truncated = true;
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let total = match records.first() {
        Some(r) => r.total,
        None => return Err(CliError::Protocol("no complete records".into())),
    };
    let part = sxgb_protocol::decrypt_partition(&records, &key, total)?;
    let rows: Vec<String> = part.rows.into_iter().map(|(_, row)| row).collect();
    let csv = csvio::to_csv(&rows);
    match output {
        Some(p) => std::fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    if let Err(e) = check_indices(total, part.seen.iter().copied()) {
        return Err(CliError::Protocol(if truncated { format!("truncated input: {e}") } else { e.to_string() }));
    }
    Ok(())
}
