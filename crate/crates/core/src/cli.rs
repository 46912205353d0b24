//! Command-line front end. [`cli_dispatch`] returns the process exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | usage error (unknown subcommand or flag, bad value) |
//! | 3 | I/O failure |
//! | 4 | malformed file (tensor, IDX, manifest, JSON, PNG) |
//! | 5 | invalid input (out-of-range parameter, shape mismatch, placement failure) |
//! | 6 | simulation became unstable |
//! | 7 | forward validation outside tolerance |

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;
use crate::inversion::InversionConfig;
use crate::noise::NoiseKind;
use crate::oracle::{validate_forward, ForwardValidation};
use crate::phantom::{Family, GlyphStore};
use crate::scenario::default_scenario;
use crate::store::{self, read_array};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_FORMAT: i32 = 4;
pub const EXIT_INVALID: i32 = 5;
pub const EXIT_SIMULATION: i32 = 6;
pub const EXIT_VALIDATION: i32 = 7;

#[derive(Debug, Parser)]
#[command(name = "tdinv", version, about = "Time-domain EM inverse-scattering workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate phantom images into a new dataset directory.
    Gen {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// EMNIST images file, or a directory holding the IDX pair (families D and E).
        #[arg(long)]
        emnist: Option<PathBuf>,
    },
    /// Simulate the scattered field of every sample.
    Simulate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Add noise at a target SNR to every clean measurement.
    AddNoise {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        kind: NoiseKind,
        #[arg(long = "snr-db", allow_negative_numbers = true)]
        snr_db: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Reconstruct one sample with the adjoint-gradient inversion.
    Invert {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        sample: String,
        #[arg(long, default_value_t = 50)]
        iters: usize,
        /// Also reconstruct conductivity.
        #[arg(long)]
        sigma: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predicted permittivity images against the dataset truth.
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Check the solver against the cylinder series solution and free space.
    ValidateForward,
    /// Write a rank-2 tensor file as an 8-bit grayscale PNG.
    ExportPng {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_negative_numbers = true, requires = "max")]
        min: Option<f64>,
        #[arg(long, allow_negative_numbers = true, requires = "min")]
        max: Option<f64>,
    },
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::Tensor { .. } | Error::Idx { .. } | Error::Manifest(_) | Error::Json(_) | Error::Png(_) => EXIT_FORMAT,
        Error::InvalidInput(_) | Error::ShapeMismatch { .. } | Error::PlacementFailed { .. } => EXIT_INVALID,
        Error::Unstable { .. } => EXIT_SIMULATION,
    }
}

fn report_validation(v: &ForwardValidation) {
    let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
    let cyl_ok = v.cylinder_error <= ForwardValidation::CYLINDER_TOLERANCE;
    let free_ok = v.free_space_error <= ForwardValidation::FREE_SPACE_TOLERANCE;
    println!(
        "cylinder series: relative L2 error {:.4} (tolerance {}) {}",
        v.cylinder_error,
        ForwardValidation::CYLINDER_TOLERANCE,
        mark(cyl_ok)
    );
    println!(
        "free space: relative L2 error {:.4} (tolerance {}) {}",
        v.free_space_error,
        ForwardValidation::FREE_SPACE_TOLERANCE,
        mark(free_ok)
    );
    println!("cylinder solve time: {:.2} s", v.cylinder_seconds);
}

fn run(cmd: Command) -> Result<i32, Error> {
    match cmd {
        Command::Gen { family, count, seed, out, emnist } => {
            let glyphs = emnist.map(GlyphStore::load).transpose()?;
            if family.needs_glyphs() && glyphs.is_none() {
                return Err(Error::InvalidInput(format!("family {family} needs --emnist")));
            }
            let m = store::generate(&out, &default_scenario(), family, count, seed, glyphs.as_ref())?;
            println!("generated {} samples of family {family} in {}", m.samples.len(), out.display());
        }
        Command::Simulate { dataset, jobs } => {
            let m = store::simulate(&dataset, jobs)?;
            println!("simulated {} samples", m.samples.len());
        }
        Command::AddNoise { dataset, kind, snr_db, seed, jobs } => {
            let m = store::noise(&dataset, kind, snr_db, seed, jobs)?;
            println!("added {kind} noise at {snr_db} dB to {} samples", m.samples.len());
        }
        Command::Invert { dataset, sample, iters, sigma, out } => {
            let cfg = InversionConfig { max_iters: iters, invert_sigma: sigma, ..Default::default() };
            let st = store::invert_sample(&dataset, &sample, &cfg, &out)?;
            let f = st.objective.last().copied().unwrap_or(f64::NAN);
            match st.pmse.last() {
                Some(p) => println!(
                    "{sample}: {} iterations, stop {:?}, objective {f:.4e}, pmse {p:.5}",
                    st.iterations, st.stop
                ),
                None => println!("{sample}: {} iterations, stop {:?}, objective {f:.4e}", st.iterations, st.stop),
            }
        }
        Command::Metrics { pred, dataset, report } => {
            let r = store::evaluate(&pred, &dataset)?;
            let mut text = serde_json::to_string_pretty(&r)?;
            text.push('\n');
            std::fs::write(&report, text).map_err(|e| Error::Io { path: report.clone(), source: e })?;
            println!("{} samples: median pmse {:?}, pooled r2 {:?}", r.samples.len(), r.pmse.median, r.r2_pooled);
        }
        Command::ValidateForward => {
            let v = validate_forward(&default_scenario())?;
            report_validation(&v);
            if !v.passed() {
                return Ok(EXIT_VALIDATION);
            }
        }
        Command::ExportPng { input, out, min, max } => {
            let image = read_array(&input)?;
            store::export_png(&image, &out, min.zip(max))?;
        }
    }
    Ok(0)
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit code.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
