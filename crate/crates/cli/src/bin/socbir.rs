use std::fs;
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::rngs::OsRng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use socbir_cli::attack::{run_attack, to_gray, AttackParams};
use socbir_cli::bench::{run_bench, BenchParams};
use socbir_cli::corpus::{face_image, CorpusParams, SyntheticCorpus};
use socbir_cli::{keyfile, read_image, write_gray, write_image, CliError};
use socbir_core::histogram::HistogramMode;
use socbir_core::package::{build_package, serialize_package};
use socbir_core::signature::{ClassLayout, SignatureConfig};
use socbir_core::wavelet::IntegerFilterPair;
use socbir_core::keygen;
use socbir_server::wire::{spawn, Client};
use socbir_server::{store_path, Service};

#[derive(Parser)]
#[command(name = "socbir", version, about = "Encrypted wavelet-histogram image retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterName {
    Haar,
    HaarUnnormalized,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Centers,
    Compact,
}

impl From<ModeArg> for HistogramMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Centers => HistogramMode::Centers,
            ModeArg::Compact => HistogramMode::Compact,
        }
    }
}

/// Public parameters; client and server must pass identical values.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Histogram class width.
    #[arg(long, default_value_t = 16)]
    delta: i64,
    /// Wavelet decomposition levels.
    #[arg(long, default_value_t = 1)]
    levels: u32,
    /// Clear classes per band (K).
    #[arg(long = "k-classes", default_value_t = 4)]
    k_classes: usize,
    /// Noisy classes per band (K'), at least 2K.
    #[arg(long = "k-prime", default_value_t = 8)]
    k_prime: usize,
    /// Cover each band's full range instead, with K' = factor·K.
    #[arg(long)]
    covering: Option<usize>,
    #[arg(long, value_enum, default_value_t = FilterName::HaarUnnormalized)]
    filter: FilterName,
    /// Filter quantization factor Q.
    #[arg(long, default_value_t = 4)]
    q: i64,
    /// Public label of the shared reference secret.
    #[arg(long, default_value = "default")]
    reference_id: String,
}

impl ConfigArgs {
    fn config(&self) -> Result<SignatureConfig, CliError> {
        let filters = match self.filter {
            FilterName::Haar => IntegerFilterPair::haar(self.q)?,
            FilterName::HaarUnnormalized => IntegerFilterPair::haar_unnormalized(self.q)?,
        };
        let layout = match self.covering {
            Some(noisy_factor) => ClassLayout::Covering { noisy_factor },
            None => ClassLayout::Fixed {
                classes: self.k_classes,
                noisy_classes: self.k_prime,
            },
        };
        let mut cfg = SignatureConfig::new(filters, self.levels, self.delta, layout);
        cfg.reference_id = self.reference_id.clone();
        cfg.band_specs()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct Endpoint {
    /// Server address; overrides --port.
    #[arg(long)]
    addr: Option<String>,
    #[arg(long, default_value_t = 7878)]
    port: u16,
}

impl Endpoint {
    fn address(&self) -> String {
        self.addr.clone().unwrap_or_else(|| format!("127.0.0.1:{}", self.port))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key pair.
    Keygen {
        #[arg(long, default_value_t = 32)]
        bits: u64,
        /// Deterministic keys from a seed (tests only).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        public_out: Option<PathBuf>,
    },
    /// Write the synthetic labelled corpus as PGM files plus labels.csv.
    MakeCorpus {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encrypt an image and its ancillary data into an upload package.
    BuildPackage {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        id: String,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Centers)]
        mode: ModeArg,
        /// Secret shared by all users, from which reference values derive.
        #[arg(long, default_value = "shared")]
        reference_secret: String,
        /// Deterministic randomness (tests only).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Send a package to the server for storage.
    Ingest {
        #[arg(long)]
        package: PathBuf,
        #[arg(long, default_value = "")]
        label: String,
        #[command(flatten)]
        endpoint: Endpoint,
    },
    /// Run the server.
    Serve {
        /// Store directory; defaults to $SOCBIR_STORE, then ./store.
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Ask the server for the k most similar stored images.
    Query {
        #[arg(long)]
        package: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[command(flatten)]
        endpoint: Endpoint,
    },
    /// Clear versus encrypted precision at five over the Δ × d grid.
    Bench {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        bits: u64,
        #[arg(long, default_value_t = 32)]
        size: usize,
        #[arg(long = "k-classes", default_value_t = 4)]
        k_classes: usize,
        #[arg(long = "k-prime", default_value_t = 8)]
        k_prime: usize,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 4, 8, 16, 32, 64])]
        delta: Vec<i64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0, 1, 2])]
        levels: Vec<u32>,
        #[arg(long, value_enum, default_value_t = ModeArg::Centers)]
        mode: ModeArg,
        /// CSV report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct a face-like image from leaky and secure class knowledge.
    AttackDemo {
        #[arg(long, default_value_t = 32)]
        delta: i64,
        #[arg(long, default_value_t = 2)]
        levels: u32,
        #[arg(long, default_value_t = 64)]
        size: usize,
        /// K' = factor·K.
        #[arg(long, default_value_t = 2)]
        noisy_factor: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        /// Image format of the written files.
        #[arg(long, default_value = "pgm")]
        format: String,
    },
}

fn reference_seed(secret: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"socbir/reference-secret/v1");
    h.update(secret.as_bytes());
    h.finalize().into()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Keygen {
            bits,
            seed,
            out,
            public_out,
        } => {
            let keys = match seed {
                Some(s) => keygen(bits, &mut ChaCha20Rng::seed_from_u64(s))?,
                None => keygen(bits, &mut OsRng)?,
            };
            fs::write(&out, keyfile::private_to_json(&keys))?;
            if let Some(p) = public_out {
                fs::write(p, keyfile::public_to_json(&keys.public))?;
            }
            println!("key {} ({} bits) written to {}", keys.public.id(), keys.public.modulus().bits(), out.display());
        }
        Command::MakeCorpus { seed, size, out } => {
            let corpus = SyntheticCorpus::generate(&CorpusParams {
                seed,
                size,
                ..CorpusParams::default()
            });
            fs::create_dir_all(&out)?;
            let mut w = csv::Writer::from_path(out.join("labels.csv"))?;
            w.write_record(["id", "label", "split", "file"])?;
            for (split, set) in [("database", &corpus.database), ("query", &corpus.queries)] {
                for img in set.iter() {
                    let file = format!("{}.pgm", img.id);
                    write_image(&out.join(&file), &img.image)?;
                    w.write_record([img.id.as_str(), img.label.as_str(), split, file.as_str()])?;
                }
            }
            w.flush()?;
            println!(
                "{} database and {} query images written to {}",
                corpus.database.len(),
                corpus.queries.len(),
                out.display()
            );
        }
        Command::BuildPackage {
            key,
            image,
            id,
            config,
            mode,
            reference_secret,
            seed,
            out,
        } => {
            let keys = keyfile::private_from_json(&fs::read_to_string(key)?)?;
            let img = read_image(&image)?;
            let cfg = config.config()?;
            let rseed = reference_seed(&reference_secret);
            let (pkg, _) = match seed {
                Some(s) => build_package(&id, &img, &keys, &cfg, mode.into(), &rseed, &mut ChaCha20Rng::seed_from_u64(s))?,
                None => build_package(&id, &img, &keys, &cfg, mode.into(), &rseed, &mut OsRng)?,
            };
            fs::write(&out, serialize_package(&pkg))?;
            println!(
                "package {} written to {}: {} pixel and {} ancillary ciphertexts",
                id,
                out.display(),
                pkg.pixels.len(),
                pkg.payload_count
            );
        }
        Command::Ingest {
            package,
            label,
            endpoint,
        } => {
            let text = fs::read_to_string(package)?;
            let mut client = Client::connect(endpoint.address())?;
            let reply = client.ingest(&text, &label)?;
            println!("stored {}", reply.id.unwrap_or_default());
        }
        Command::Serve { store, port, config } => {
            let root = store_path(store);
            let service = Arc::new(Service::open(&root, config.config()?)?);
            let listener = TcpListener::bind(("0.0.0.0", port))?;
            let handle = spawn(listener, service.clone())?;
            eprintln!(
                "serving {} images from {} on {} (fingerprint {})",
                service.len(),
                root.display(),
                handle.addr,
                service.config().fingerprint()
            );
            handle.join();
        }
        Command::Query { package, k, endpoint } => {
            let text = fs::read_to_string(package)?;
            let mut client = Client::connect(endpoint.address())?;
            let reply = client.query(&text, k)?;
            println!("rank,id,distance,label");
            for hit in &reply.results {
                println!("{},{},{},{}", hit.rank, hit.id, hit.distance, hit.label);
            }
            if let Some(ops) = reply.ops {
                eprintln!(
                    "server ops: {} mul, {} inv, {} pow, {} comparisons",
                    ops.mul, ops.inv, ops.pow, ops.comparisons
                );
            }
        }
        Command::Bench {
            seed,
            bits,
            size,
            k_classes,
            k_prime,
            delta,
            levels,
            mode,
            out,
        } => {
            let params = BenchParams {
                corpus: CorpusParams {
                    seed,
                    size,
                    ..CorpusParams::default()
                },
                deltas: delta,
                levels,
                classes: k_classes,
                noisy_classes: k_prime,
                bits,
                mode: mode.into(),
                seed,
                ..BenchParams::default()
            };
            let report = run_bench(&params, |row, secs| {
                eprintln!(
                    "delta={:<3} d={} P@5 clear={:.4} encrypted={:.4} equal={} ({secs:.1}s)",
                    row.delta, row.levels, row.precision_clear, row.precision_encrypted, row.ranking_equal
                );
            })?;
            match out {
                Some(p) => report.write_csv(fs::File::create(p)?)?,
                None => report.write_csv(std::io::stdout())?,
            }
            if !report.all_equal() {
                return Err(CliError::Usage("encrypted ranking differs from clear ranking".into()));
            }
        }
        Command::AttackDemo {
            delta,
            levels,
            size,
            noisy_factor,
            seed,
            out_dir,
            format,
        } => {
            let params = AttackParams {
                delta,
                levels,
                noisy_factor,
                seed,
                ..AttackParams::default()
            };
            let face = face_image(size);
            let (report, leaky, secure) = run_attack(&face, &params)?;
            fs::create_dir_all(&out_dir)?;
            write_image(&out_dir.join(format!("original.{format}")), &face)?;
            write_gray(&out_dir.join(format!("leaky.{format}")), size, size, to_gray(&leaky))?;
            write_gray(&out_dir.join(format!("secure.{format}")), size, size, to_gray(&secure))?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
