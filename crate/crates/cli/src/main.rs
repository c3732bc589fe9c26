use std::f64::consts::PI;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use overdemod::mc_oracle::McConfig;
use overdemod::pilot::{PilotSpec, PilotWaveform, SequenceKind};
use overdemod::sweep::{capacity_sweep, fisher_sweep, write_capacity_csv, write_fisher_csv, SweepSpec, DEFAULT_CHANNELS};
use overdemod::validate::run_validation;

const EXIT_VALIDATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "overdemod", version, about = "Quantization loss and rate bounds for 1-bit overdemodulation receivers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phase and delay quantization loss over an SNR grid.
    Fisher(FisherArgs),
    /// Rate lower bound against the two-channel capacity.
    Capacity(CapacityArgs),
    /// Monte-Carlo checks of the analytic moments and information.
    Validate(ValidateArgs),
    /// Dump one period of the band-limited pilot.
    Waveform(WaveformArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PilotKind {
    Gold,
    Random,
}

#[derive(Args)]
struct PilotArgs {
    #[arg(long, value_enum, default_value = "gold")]
    pilot: PilotKind,
    /// PRN pair of the Gold-code pilot.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [1u8, 2])]
    prn: Vec<u8>,
    /// Seed of the random pilot and of the Monte-Carlo streams.
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

impl PilotArgs {
    fn spec(&self) -> PilotSpec {
        let sequence = match self.pilot {
            PilotKind::Gold => SequenceKind::GoldCode { prn_a: self.prn[0], prn_b: self.prn[1] },
            PilotKind::Random => SequenceKind::SeededRandom { seed: self.seed },
        };
        PilotSpec { sequence, ..PilotSpec::default() }
    }
}

#[derive(Args)]
struct FisherArgs {
    /// Channel counts, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_CHANNELS)]
    m: Vec<usize>,
    #[arg(long, default_value_t = -15.0, allow_negative_numbers = true)]
    snr_start: f64,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    snr_stop: f64,
    #[arg(long, default_value_t = 0.5)]
    snr_step: f64,
    #[command(flatten)]
    pilot: PilotArgs,
    /// True phase in radians.
    #[arg(long, default_value_t = PI / 8.0, allow_negative_numbers = true)]
    theta_phi: f64,
    /// True delay in seconds, a multiple of the fine-grid step.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    theta_tau: f64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CapacityArgs {
    #[arg(long, default_value_t = 20)]
    m_max: usize,
    /// SNR in dB.
    #[arg(long, default_value_t = -15.0, allow_negative_numbers = true)]
    snr: f64,
    #[arg(long, default_value_t = PI / 8.0, allow_negative_numbers = true)]
    theta_phi: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    #[command(flatten)]
    pilot: PilotArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WaveformArgs {
    #[command(flatten)]
    pilot: PilotArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<overdemod::Error> for Failure {
    fn from(e: overdemod::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn fisher(args: &FisherArgs) -> Result<u8, Failure> {
    let spec = SweepSpec {
        snr_start_db: args.snr_start,
        snr_stop_db: args.snr_stop,
        snr_step_db: args.snr_step,
        m_list: args.m.clone(),
        pilot: args.pilot.spec(),
        theta: (args.theta_phi, args.theta_tau),
    };
    let rows = fisher_sweep(&spec)?;
    let jittered: usize = rows.iter().map(|r| r.jittered_snapshots).sum();
    if jittered > 0 {
        eprintln!("warning: {jittered} snapshot covariances needed diagonal jitter");
    }
    let mut out = open_output(&args.out)?;
    write_fisher_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(0)
}

fn capacity(args: &CapacityArgs) -> Result<u8, Failure> {
    let rows = capacity_sweep(args.m_max, args.snr, args.theta_phi)?;
    let mut out = open_output(&args.out)?;
    write_capacity_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(0)
}

fn validate(args: &ValidateArgs) -> Result<u8, Failure> {
    let mc = McConfig::new(args.trials, args.pilot.seed)?;
    let wave = PilotWaveform::build(&args.pilot.spec())?;
    let report = run_validation(args.m, &wave, &mc)?;
    let mut out = open_output(&args.out)?;
    write!(out, "{report}")?;
    out.flush()?;
    Ok(if report.passed() { 0 } else { EXIT_VALIDATION })
}

fn waveform(args: &WaveformArgs) -> Result<u8, Failure> {
    let wave = PilotWaveform::build(&args.pilot.spec())?;
    let mut out = open_output(&args.out)?;
    wave.write_csv(&mut out)?;
    out.flush()?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Fisher(a) => fisher(a),
        Command::Capacity(a) => capacity(a),
        Command::Validate(a) => validate(a),
        Command::Waveform(a) => waveform(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
