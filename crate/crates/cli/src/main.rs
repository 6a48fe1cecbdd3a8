mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use hgf::bench::BenchMethod;
use hgf::multilabel::Method;
use hgf::FilterParams;

#[derive(Parser, Debug)]
#[command(name = "hgf", version, about = "Polynomial guided filtering for images and cost volumes")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Filter an image under a guidance image
    Filter(FilterArgs),
    /// Disparity estimation on a rectified pair
    Stereo(StereoArgs),
    /// Two-label segmentation from seed pixels
    Segment(SegmentArgs),
    /// Time the filters on random images and write a CSV report
    Bench(BenchArgs),
    /// Compare linear and polynomial fits on a noisy curve
    Fitdemo(FitdemoArgs),
    /// Write the synthetic stereo and segmentation fixtures
    Fixture(FixtureArgs),
}

#[derive(Args, Debug, Clone, Copy)]
struct FilterOpts {
    #[arg(long, default_value_t = FilterParams::DEFAULT_RADIUS)]
    radius: usize,
    #[arg(long, default_value_t = FilterParams::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = FilterParams::DEFAULT_DEGREE)]
    degree: usize,
}

#[derive(Args, Debug)]
struct FilterArgs {
    #[arg(long)]
    input: PathBuf,
    /// Guidance image; the input itself when omitted
    #[arg(long)]
    guidance: Option<PathBuf>,
    /// Output path; PGM/PPM by extension, PFM otherwise
    #[arg(long)]
    out: PathBuf,
    /// hgf, gf or box
    #[arg(long, default_value = "hgf")]
    method: Method,
    #[command(flatten)]
    opts: FilterOpts,
}

#[derive(Args, Debug)]
struct StereoArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long)]
    dmax: usize,
    /// Reference disparity PGM, read as byte / scale
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Pixels to evaluate (non-zero) in the reference
    #[arg(long, requires = "gt")]
    mask: Option<PathBuf>,
    /// Disparity to byte factor for the output and the reference
    /// (default: 255 / dmax, rounded down)
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long, default_value = "disparity.pgm")]
    out: PathBuf,
    /// none, box, gf or hgf
    #[arg(long, default_value = "hgf")]
    method: Method,
    #[command(flatten)]
    opts: FilterOpts,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    #[arg(long)]
    image: PathBuf,
    /// Text file with one "x y" pair per line
    #[arg(long)]
    fg_seeds: PathBuf,
    #[arg(long)]
    bg_seeds: PathBuf,
    #[arg(long, default_value = "labels.pgm")]
    out: PathBuf,
    /// none, box, gf or hgf
    #[arg(long, default_value = "hgf")]
    method: Method,
    #[arg(long, default_value_t = 32)]
    bins: usize,
    #[command(flatten)]
    opts: FilterOpts,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated WxH sizes (or a single number for a square)
    #[arg(long, value_delimiter = ',', value_parser = parse_size, default_value = "256x256,512x512")]
    sizes: Vec<(usize, usize)>,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,9")]
    channels: Vec<usize>,
    /// Any of hgf, gf, naive-gf
    #[arg(long, value_delimiter = ',', default_value = "hgf,gf,naive-gf")]
    methods: Vec<BenchMethod>,
    #[arg(long, default_value = "bench.csv")]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = FilterParams::DEFAULT_RADIUS)]
    radius: usize,
    #[arg(long, default_value_t = FilterParams::DEFAULT_LAMBDA)]
    lambda: f64,
}

#[derive(Args, Debug)]
struct FitdemoArgs {
    #[arg(long, default_value_t = 2)]
    degree: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "fitdemo.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FixtureArgs {
    /// Directory to write into (created if missing)
    #[arg(long)]
    out: PathBuf,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad size {s:?}: {e}"));
    let (w, h) = match s.split_once(['x', 'X']) {
        Some((w, h)) => (parse(w)?, parse(h)?),
        None => {
            let n = parse(s)?;
            (n, n)
        }
    };
    if w == 0 || h == 0 {
        return Err(format!("bad size {s:?}: dimensions must be positive"));
    }
    Ok((w, h))
}

/// 1 for bad arguments, 2 for file problems, 3 for numerical failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<hgf::Error>() {
            return if e.is_io() {
                2
            } else if e.is_numerical() {
                3
            } else {
                1
            };
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
