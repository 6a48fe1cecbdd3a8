//! Cost volumes and label selection for stereo matching and segmentation.

mod cost;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::boxfilter::box_average;
use crate::engine::{FilterParams, HgfPlan};
use crate::error::{Error, Result};
use crate::gf::gf_filter;
use crate::image::{ChannelStack, ImagePlane, PixelCoord};
use crate::io::load_image;

pub use cost::{build_segmentation_cost, build_stereo_cost, SegmentationCostParams, StereoCostParams};

/// One cost plane per label. Costs are finite and non-negative.
#[derive(Clone, Debug, PartialEq)]
pub struct CostVolume {
    slices: Vec<ImagePlane>,
}

impl CostVolume {
    pub fn new(slices: Vec<ImagePlane>) -> Result<Self> {
        if slices.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "cost volume needs at least 2 labels, got {}",
                slices.len()
            )));
        }
        for s in &slices {
            slices[0].check_same_dims(s)?;
            if s.data().iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
                return Err(Error::InvalidParameter("costs must be finite and non-negative".into()));
            }
        }
        Ok(Self { slices })
    }

    pub fn labels(&self) -> usize {
        self.slices.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.slices[0].dims()
    }

    pub fn slice(&self, label: usize) -> &ImagePlane {
        &self.slices[label]
    }

    pub fn slices(&self) -> &[ImagePlane] {
        &self.slices
    }

    pub fn into_slices(self) -> Vec<ImagePlane> {
        self.slices
    }
}

/// Per-pixel label in `0..labels`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: usize,
    data: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: usize, data: Vec<u32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "{} labels for a {width}x{height} map",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|&&l| l as usize >= labels) {
            return Err(Error::InvalidParameter(format!("label {bad} out of range 0..{labels}")));
        }
        Ok(Self {
            width,
            height,
            labels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn label_count(&self) -> usize {
        self.labels
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.data[y * self.width + x]
    }

    /// Renders labels as an 8-bit-ready plane: `label * scale / 255`,
    /// saturating at 1.
    pub fn to_plane(&self, scale: f64) -> ImagePlane {
        ImagePlane::from_fn(self.width, self.height, |x, y| {
            (self.get(x, y) as f64 * scale / 255.0).min(1.0)
        })
    }
}

/// Reference disparities with a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct DisparityTruth {
    disparity: ImagePlane,
    mask: Vec<bool>,
}

impl DisparityTruth {
    pub fn new(disparity: ImagePlane, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != disparity.len() {
            return Err(Error::InvalidParameter("mask size differs from disparity size".into()));
        }
        Ok(Self { disparity, mask })
    }

    pub fn unmasked(disparity: ImagePlane) -> Self {
        let mask = vec![true; disparity.len()];
        Self { disparity, mask }
    }

    /// Reads an 8-bit disparity image (`disparity = byte / scale`) and an
    /// optional mask image where non-zero pixels are evaluated.
    pub fn load(truth: &Path, scale: f64, mask: Option<&Path>) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("disparity scale must be positive, got {scale}")));
        }
        let bytes = |path: &Path| -> Result<ImagePlane> {
            let img = load_image(path)?;
            if img.len() != 1 {
                return Err(Error::UnsupportedFormat(format!(
                    "{} must be a single-channel image",
                    path.display()
                )));
            }
            Ok(img.into_planes().remove(0))
        };
        let plane = bytes(truth)?;
        let disparity = ImagePlane::from_fn(plane.width(), plane.height(), |x, y| {
            (plane.get(x, y) * 255.0).round() / scale
        });
        let mask = match mask {
            Some(path) => {
                let m = bytes(path)?;
                disparity.check_same_dims(&m)?;
                m.data().iter().map(|&v| v > 0.0).collect()
            }
            None => vec![true; disparity.len()],
        };
        Self::new(disparity, mask)
    }

    pub fn disparity(&self) -> &ImagePlane {
        &self.disparity
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_valid(&self, p: PixelCoord) -> bool {
        self.mask[p.y * self.disparity.width() + p.x]
    }
}

/// Per-slice aggregation strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    None,
    Box,
    Gf,
    Hgf,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::None, Method::Box, Method::Gf, Method::Hgf];

    pub fn name(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Box => "box",
            Method::Gf => "gf",
            Method::Hgf => "hgf",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

/// Filters every slice independently. For `Gf` the regularizer is
/// `params.lambda()` and the polynomial degree is ignored.
pub fn filter_volume(
    volume: &CostVolume,
    guidance: &ChannelStack,
    params: &FilterParams,
    method: Method,
) -> Result<CostVolume> {
    guidance.check_plane(volume.slice(0))?;
    let slices: Vec<ImagePlane> = match method {
        Method::None => return Ok(volume.clone()),
        Method::Box => volume
            .slices()
            .par_iter()
            .map(|s| box_average(s, params.window()))
            .collect(),
        Method::Gf => volume
            .slices()
            .par_iter()
            .map(|s| gf_filter(s, guidance, params.radius(), params.lambda()))
            .collect::<Result<_>>()?,
        Method::Hgf => {
            let plan = HgfPlan::new(guidance, params)?;
            volume
                .slices()
                .par_iter()
                .map(|s| plan.filter(s))
                .collect::<Result<_>>()?
        }
    };
    // guided filters can overshoot below zero; costs stay non-negative
    let slices = slices
        .into_iter()
        .map(|s| {
            let (w, h) = s.dims();
            ImagePlane::from_vec_unchecked(w, h, s.into_data().into_iter().map(|v| v.max(0.0)).collect())
        })
        .collect();
    CostVolume::new(slices)
}

/// Winner-takes-all: the lowest-cost label per pixel, lowest index on ties.
pub fn wta(volume: &CostVolume) -> LabelMap {
    let (w, h) = volume.dims();
    let mut data = vec![0u32; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let seg = y * w..(y + 1) * w;
        let mut best: Vec<f64> = volume.slice(0).data()[seg.clone()].to_vec();
        for (l, s) in volume.slices().iter().enumerate().skip(1) {
            for ((b, lab), &c) in best.iter_mut().zip(row.iter_mut()).zip(&s.data()[seg.clone()]) {
                if c < *b {
                    *b = c;
                    *lab = l as u32;
                }
            }
        }
    });
    LabelMap {
        width: w,
        height: h,
        labels: volume.labels(),
        data,
    }
}

/// Fraction of evaluated pixels whose label is more than `threshold` away
/// from the reference disparity.
pub fn pbp(labels: &LabelMap, truth: &DisparityTruth, threshold: f64) -> Result<f64> {
    if labels.dims() != truth.disparity.dims() {
        return Err(Error::DimensionMismatch {
            expected: truth.disparity.dims(),
            actual: labels.dims(),
        });
    }
    let mut evaluated = 0usize;
    let mut bad = 0usize;
    for ((&l, &d), &m) in labels.data.iter().zip(truth.disparity.data()).zip(&truth.mask) {
        if m {
            evaluated += 1;
            if (l as f64 - d).abs() > threshold {
                bad += 1;
            }
        }
    }
    if evaluated == 0 {
        return Err(Error::InvalidParameter("disparity mask is empty".into()));
    }
    Ok(bad as f64 / evaluated as f64)
}
