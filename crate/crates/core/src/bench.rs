//! Stage timings for the filters on seeded random images.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{hgf_filter_profiled, FilterParams, StageTimes};
use crate::error::{Error, Result};
use crate::gf::{gf_filter_profiled, naive_gf_filter_profiled};
use crate::image::{ChannelStack, ImagePlane};

pub const STAGES: [&str; 5] = ["gram", "alpha", "weights", "aggregate", "total"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BenchMethod {
    Hgf,
    Gf,
    NaiveGf,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 3] = [BenchMethod::Hgf, BenchMethod::Gf, BenchMethod::NaiveGf];

    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Hgf => "hgf",
            BenchMethod::Gf => "gf",
            BenchMethod::NaiveGf => "naive-gf",
        }
    }

    /// The guided filter baselines only take gray or color guidance.
    pub fn supports(self, channels: usize) -> bool {
        match self {
            BenchMethod::Hgf => channels >= 1,
            BenchMethod::Gf | BenchMethod::NaiveGf => channels == 1 || channels == 3,
        }
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchMethod::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown benchmark method {s:?}")))
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: String,
    pub width: usize,
    pub height: usize,
    pub n: usize,
    pub stage: String,
    pub ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub sizes: Vec<(usize, usize)>,
    pub channels: Vec<usize>,
    pub methods: Vec<BenchMethod>,
    pub repeats: usize,
    pub seed: u64,
    pub radius: usize,
    pub lambda: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![(256, 256), (512, 512)],
            channels: vec![1, 3, 5, 9],
            methods: BenchMethod::ALL.to_vec(),
            repeats: 3,
            seed: 0,
            radius: FilterParams::DEFAULT_RADIUS,
            lambda: FilterParams::DEFAULT_LAMBDA,
        }
    }
}

/// A seeded input image and `n` guidance channels, all uniform in `[0, 1)`.
pub fn random_instance(width: usize, height: usize, n: usize, seed: u64) -> Result<(ImagePlane, ChannelStack)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plane = || ImagePlane::from_fn(width, height, |_, _| rng.gen());
    let input = plane();
    let guidance = ChannelStack::new((0..n).map(|_| plane()).collect())?;
    Ok((input, guidance))
}

/// Runs one method once. HGF is fed the `n` channels as-is (degree 1), so
/// `n` is the number of channels the solver sees for every method.
pub fn time_once(
    method: BenchMethod,
    input: &ImagePlane,
    guidance: &ChannelStack,
    radius: usize,
    lambda: f64,
) -> Result<StageTimes> {
    let times = match method {
        BenchMethod::Hgf => hgf_filter_profiled(input, guidance, &FilterParams::new(lambda, radius, 1)?)?.1,
        BenchMethod::Gf => gf_filter_profiled(input, guidance, radius, lambda)?.1,
        BenchMethod::NaiveGf => naive_gf_filter_profiled(input, guidance, radius, lambda)?.1,
    };
    Ok(times)
}

/// Discards a warm-up run, then returns the run with the median total out
/// of `repeats`.
pub fn time_median(
    method: BenchMethod,
    input: &ImagePlane,
    guidance: &ChannelStack,
    radius: usize,
    lambda: f64,
    repeats: usize,
) -> Result<StageTimes> {
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    time_once(method, input, guidance, radius, lambda)?;
    let mut runs = (0..repeats)
        .map(|_| time_once(method, input, guidance, radius, lambda))
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|t| t.total);
    Ok(runs[runs.len() / 2])
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

pub fn stage_records(method: BenchMethod, width: usize, height: usize, n: usize, t: &StageTimes) -> Vec<BenchRecord> {
    [t.gram, t.alpha, t.weights, t.aggregate, t.total]
        .into_iter()
        .zip(STAGES)
        .map(|(d, stage)| BenchRecord {
            method: method.name().to_string(),
            width,
            height,
            n,
            stage: stage.to_string(),
            ms: ms(d),
        })
        .collect()
}

/// Every supported (method, size, channel count) combination; others are
/// skipped.
pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRecord>> {
    let mut records = Vec::new();
    for &(w, h) in &config.sizes {
        for &n in &config.channels {
            let (input, guidance) = random_instance(w, h, n, config.seed)?;
            for &method in &config.methods {
                if !method.supports(n) {
                    continue;
                }
                let t = time_median(method, &input, &guidance, config.radius, config.lambda, config.repeats)?;
                records.extend(stage_records(method, w, h, n, &t));
            }
        }
    }
    Ok(records)
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}
