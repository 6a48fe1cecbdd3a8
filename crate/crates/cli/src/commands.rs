use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};

use hgf::bench::{run_bench, write_csv, BenchConfig};
use hgf::boxfilter::box_average;
use hgf::engine::{hgf_filter_profiled, StageTimes};
use hgf::fitdemo::{run_fitdemo, FitDemoSpec};
use hgf::fixtures::{segmentation_fixture, stereo_fixture, StereoFixtureSpec};
use hgf::gf::gf_filter_profiled;
use hgf::multilabel::{
    build_segmentation_cost, build_stereo_cost, filter_volume, pbp, wta, DisparityTruth, LabelMap, Method,
    SegmentationCostParams, StereoCostParams,
};
use hgf::{load_image, save_image, ChannelStack, FilterParams, ImageFormat, ImagePlane, PixelCoord};

use crate::{BenchArgs, Cli, Command, FilterArgs, FilterOpts, FitdemoArgs, FixtureArgs, SegmentArgs, StereoArgs};

/// Size of the bundled segmentation fixture.
pub const SEGMENT_FIXTURE_SIZE: (usize, usize) = (64, 48);

pub fn run(cli: Cli) -> Result<()> {
    match cli.threads {
        Some(0) => Err(hgf::Error::InvalidParameter("--threads must be at least 1".into()).into()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building thread pool")?
            .install(|| dispatch(cli.command)),
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Filter(a) => cmd_filter(a),
        Command::Stereo(a) => cmd_stereo(a),
        Command::Segment(a) => cmd_segment(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Fitdemo(a) => cmd_fitdemo(a),
        Command::Fixture(a) => cmd_fixture(a),
    }
}

fn params(opts: &FilterOpts) -> Result<FilterParams> {
    Ok(FilterParams::new(opts.lambda, opts.radius, opts.degree)?)
}

fn load(path: &Path) -> Result<ChannelStack> {
    load_image(path).with_context(|| format!("reading {}", path.display()))
}

fn save(stack: &ChannelStack, path: &Path) -> Result<()> {
    let format = ImageFormat::from_path(path).unwrap_or(ImageFormat::Pfm);
    save_image(stack, path, format).with_context(|| format!("writing {}", path.display()))
}

fn print_times(label: &str, t: &StageTimes) {
    let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
    println!(
        "{label}: gram {:.3} ms, alpha {:.3} ms, weights {:.3} ms, aggregate {:.3} ms, total {:.3} ms",
        ms(t.gram),
        ms(t.alpha),
        ms(t.weights),
        ms(t.aggregate),
        ms(t.total)
    );
}

fn cmd_filter(args: FilterArgs) -> Result<()> {
    let params = params(&args.opts)?;
    let input = load(&args.input)?;
    let guidance = match &args.guidance {
        Some(p) => load(p)?,
        None => input.clone(),
    };
    let mut out = Vec::with_capacity(input.len());
    for (c, plane) in input.iter().enumerate() {
        let label = format!("channel {c}");
        let z = match args.method {
            Method::Hgf => {
                let (z, t) = hgf_filter_profiled(plane, &guidance, &params)?;
                print_times(&label, &t);
                z
            }
            Method::Gf => {
                let (z, t) = gf_filter_profiled(plane, &guidance, params.radius(), params.lambda())?;
                print_times(&label, &t);
                z
            }
            Method::Box => {
                let start = Instant::now();
                let z = box_average(plane, params.window());
                println!("{label}: total {:.3} ms", start.elapsed().as_secs_f64() * 1e3);
                z
            }
            Method::None => bail!(hgf::Error::InvalidParameter(
                "filter takes --method hgf, gf or box".into()
            )),
        };
        out.push(z);
    }
    save(&ChannelStack::new(out)?, &args.out)
}

fn write_labels(labels: &LabelMap, scale: f64, path: &Path) -> Result<()> {
    let plane = labels.to_plane(scale);
    save_image(&ChannelStack::single(plane), path, ImageFormat::Pgm)
        .with_context(|| format!("writing {}", path.display()))
}

pub fn default_scale(dmax: usize) -> f64 {
    (255 / dmax.max(1)).max(1) as f64
}

fn cmd_stereo(args: StereoArgs) -> Result<()> {
    let params = params(&args.opts)?;
    let left = load(&args.left)?;
    let right = load(&args.right)?;
    let volume = build_stereo_cost(&left, &right, args.dmax, &StereoCostParams::default())?;
    let start = Instant::now();
    let filtered = filter_volume(&volume, &left, &params, args.method)?;
    println!(
        "aggregated {} slices with {} in {:.3} ms",
        volume.labels(),
        args.method,
        start.elapsed().as_secs_f64() * 1e3
    );
    let labels = wta(&filtered);
    let scale = args.scale.unwrap_or_else(|| default_scale(args.dmax));
    write_labels(&labels, scale, &args.out)?;
    if let Some(gt) = &args.gt {
        let truth = DisparityTruth::load(gt, scale, args.mask.as_deref())?;
        println!("PBP: {:.6}", pbp(&labels, &truth, 1.0)?);
    }
    Ok(())
}

pub fn read_seeds(path: &Path) -> Result<Vec<PixelCoord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut seeds = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace().map(str::parse::<usize>);
        match (parts.next(), parts.next(), parts.next()) {
            (Some(Ok(x)), Some(Ok(y)), None) => seeds.push(PixelCoord::new(x, y)),
            _ => bail!(hgf::Error::Malformed(format!(
                "{}:{}: expected \"x y\", got {line:?}",
                path.display(),
                i + 1
            ))),
        }
    }
    Ok(seeds)
}

fn cmd_segment(args: SegmentArgs) -> Result<()> {
    let params = params(&args.opts)?;
    let image = load(&args.image)?;
    let fg = read_seeds(&args.fg_seeds)?;
    let bg = read_seeds(&args.bg_seeds)?;
    let volume = build_segmentation_cost(&image, &fg, &bg, &SegmentationCostParams { bins: args.bins })?;
    let labels = wta(&filter_volume(&volume, &image, &params, args.method)?);
    let fg_count = labels.data().iter().filter(|&&l| l == 1).count();
    println!("foreground pixels: {fg_count} of {}", labels.data().len());
    write_labels(&labels, 255.0, &args.out)
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let config = BenchConfig {
        sizes: args.sizes,
        channels: args.channels,
        methods: args.methods,
        repeats: args.repeats,
        seed: args.seed,
        radius: args.radius,
        lambda: args.lambda,
    };
    let records = run_bench(&config)?;
    for r in records.iter().filter(|r| r.stage == "total") {
        println!("{:>9} {:>5}x{:<5} n={:<2} {:>10.3} ms", r.method, r.width, r.height, r.n, r.ms);
    }
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_csv(&records, BufWriter::new(file))?;
    Ok(())
}

fn cmd_fitdemo(args: FitdemoArgs) -> Result<()> {
    let report = run_fitdemo(&FitDemoSpec {
        degree: args.degree,
        seed: args.seed,
        ..Default::default()
    })?;
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    report.write_csv(BufWriter::new(file))?;
    println!("RMS linear: {:.6}", report.rms_linear);
    println!("RMS degree {}: {:.6}", args.degree, report.rms_polynomial);
    Ok(())
}

fn write_seeds(seeds: &[PixelCoord], path: &Path) -> Result<()> {
    let text: String = seeds.iter().map(|p| format!("{} {}\n", p.x, p.y)).collect();
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_fixture(args: FixtureArgs) -> Result<()> {
    let dir = &args.out;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let stereo = stereo_fixture(&StereoFixtureSpec::default())?;
    let scale = default_scale(stereo.dmax);
    save(&stereo.left, &dir.join("left.ppm"))?;
    save(&stereo.right, &dir.join("right.ppm"))?;
    let disparity = stereo.truth.disparity();
    let (w, h) = disparity.dims();
    let truth_plane = ImagePlane::from_fn(w, h, |x, y| disparity.get(x, y) * scale / 255.0);
    save(&ChannelStack::single(truth_plane), &dir.join("disparity.pgm"))?;
    let mask = stereo.truth.mask();
    let mask_plane = ImagePlane::from_fn(w, h, |x, y| if mask[y * w + x] { 1.0 } else { 0.0 });
    save(&ChannelStack::single(mask_plane), &dir.join("mask.pgm"))?;

    let (sw, sh) = SEGMENT_FIXTURE_SIZE;
    let seg = segmentation_fixture(sw, sh)?;
    save(&seg.image, &dir.join("segment.ppm"))?;
    write_seeds(&seg.fg_seeds, &dir.join("fg_seeds.txt"))?;
    write_seeds(&seg.bg_seeds, &dir.join("bg_seeds.txt"))?;
    let truth = ImagePlane::from_fn(sw, sh, |x, y| seg.truth[y * sw + x] as f64);
    save(&ChannelStack::single(truth), &dir.join("segment_truth.pgm"))?;
    println!("wrote fixtures to {}", dir.display());
    Ok(())
}
