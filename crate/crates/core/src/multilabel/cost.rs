use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{ChannelStack, ImagePlane, PixelCoord};

use super::CostVolume;

/// Truncated color plus gradient matching cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StereoCostParams {
    /// Weight of the color term; the gradient term gets `1 - color_weight`.
    pub color_weight: f64,
    pub color_cap: f64,
    pub gradient_cap: f64,
}

impl Default for StereoCostParams {
    fn default() -> Self {
        Self {
            color_weight: 0.11,
            color_cap: 0.028,
            gradient_cap: 0.008,
        }
    }
}

impl StereoCostParams {
    /// Largest cost any pixel can receive.
    pub fn max_cost(&self) -> f64 {
        self.color_weight * self.color_cap + (1.0 - self.color_weight) * self.gradient_cap
    }

    fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.color_weight)
            && self.color_cap >= 0.0
            && self.gradient_cap >= 0.0
            && self.color_cap.is_finite()
            && self.gradient_cap.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid stereo cost parameters {self:?}")))
        }
    }
}

/// Horizontal central difference of the channel mean, borders replicated.
fn x_gradient(image: &ChannelStack) -> ImagePlane {
    let gray = image.mean_plane();
    let w = gray.width();
    ImagePlane::from_fn(w, gray.height(), |x, y| {
        let right = gray.get((x + 1).min(w - 1), y);
        let left = gray.get(x.saturating_sub(1), y);
        0.5 * (right - left)
    })
}

/// Cost of matching left pixel `(x, y)` to right pixel `(x - d, y)` for
/// `d = 0..=dmax`. Matches that fall off the left edge get the maximum
/// cost.
pub fn build_stereo_cost(
    left: &ChannelStack,
    right: &ChannelStack,
    dmax: usize,
    params: &StereoCostParams,
) -> Result<CostVolume> {
    params.validate()?;
    if left.dims() != right.dims() {
        return Err(Error::DimensionMismatch {
            expected: left.dims(),
            actual: right.dims(),
        });
    }
    if left.len() != right.len() {
        return Err(Error::InvalidParameter(format!(
            "left image has {} channels, right has {}",
            left.len(),
            right.len()
        )));
    }
    let (w, h) = left.dims();
    if dmax == 0 || dmax >= w {
        return Err(Error::InvalidParameter(format!(
            "maximum disparity must be in 1..{w}, got {dmax}"
        )));
    }
    let grad_l = x_gradient(left);
    let grad_r = x_gradient(right);
    let channels = left.len() as f64;
    let a = params.color_weight;
    let slices: Vec<ImagePlane> = (0..=dmax)
        .into_par_iter()
        .map(|d| {
            ImagePlane::from_fn(w, h, |x, y| {
                if x < d {
                    return params.max_cost();
                }
                let color: f64 = left
                    .iter()
                    .zip(right)
                    .map(|(l, r)| (l.get(x, y) - r.get(x - d, y)).abs())
                    .sum::<f64>()
                    / channels;
                let grad = (grad_l.get(x, y) - grad_r.get(x - d, y)).abs();
                a * color.min(params.color_cap) + (1.0 - a) * grad.min(params.gradient_cap)
            })
        })
        .collect();
    CostVolume::new(slices)
}

/// Histogram settings for the two-label segmentation cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SegmentationCostParams {
    pub bins: usize,
}

impl Default for SegmentationCostParams {
    fn default() -> Self {
        Self { bins: 32 }
    }
}

struct ColorModel {
    // per channel, per bin: -ln p
    neg_log: Vec<Vec<f64>>,
    bins: usize,
}

fn bin_of(v: f64, bins: usize) -> usize {
    ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1)
}

impl ColorModel {
    fn fit(image: &ChannelStack, seeds: &[PixelCoord], bins: usize) -> Self {
        let total = (seeds.len() + bins) as f64;
        let neg_log = image
            .iter()
            .map(|plane| {
                let mut counts = vec![1usize; bins];
                for &p in seeds {
                    counts[bin_of(plane.at(p), bins)] += 1;
                }
                counts.iter().map(|&c| -(c as f64 / total).ln()).collect()
            })
            .collect();
        Self { neg_log, bins }
    }

    fn cost(&self, image: &ChannelStack) -> ImagePlane {
        ImagePlane::from_fn(image.width(), image.height(), |x, y| {
            image
                .iter()
                .zip(&self.neg_log)
                .map(|(plane, table)| table[bin_of(plane.get(x, y), self.bins)])
                .sum()
        })
    }
}

/// Two-label cost volume from per-channel color histograms over seed
/// pixels. Label 0 is background, label 1 foreground. Each slice holds the
/// negative log-likelihood under that label's model; both slices share one
/// min-max normalization onto `[0, 1]`.
pub fn build_segmentation_cost(
    image: &ChannelStack,
    fg_seeds: &[PixelCoord],
    bg_seeds: &[PixelCoord],
    params: &SegmentationCostParams,
) -> Result<CostVolume> {
    if params.bins == 0 {
        return Err(Error::InvalidParameter("histograms need at least one bin".into()));
    }
    for (name, seeds) in [("foreground", fg_seeds), ("background", bg_seeds)] {
        if seeds.is_empty() {
            return Err(Error::InvalidParameter(format!("{name} seed set is empty")));
        }
        let (w, h) = image.dims();
        if let Some(p) = seeds.iter().find(|p| p.x >= w || p.y >= h) {
            return Err(Error::InvalidParameter(format!(
                "{name} seed ({}, {}) outside the {w}x{h} image",
                p.x, p.y
            )));
        }
    }
    let bg = ColorModel::fit(image, bg_seeds, params.bins).cost(image);
    let fg = ColorModel::fit(image, fg_seeds, params.bins).cost(image);
    let lo = bg.min_value().min(fg.min_value());
    let hi = bg.max_value().max(fg.max_value());
    let normalize = |p: ImagePlane| -> Result<ImagePlane> {
        if hi > lo {
            p.offset(-lo)?.scale(1.0 / (hi - lo))
        } else {
            Ok(ImagePlane::zeros(p.width(), p.height()))
        }
    };
    CostVolume::new(vec![normalize(bg)?, normalize(fg)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multilabel::wta;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_color(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ChannelStack {
        ChannelStack::new((0..3).map(|_| ImagePlane::from_fn(w, h, |_, _| rng.gen())).collect()).unwrap()
    }

    #[test]
    fn identical_views_cost_nothing_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let img = random_color(&mut rng, 20, 8);
        let v = build_stereo_cost(&img, &img, 4, &StereoCostParams::default()).unwrap();
        assert_eq!(v.labels(), 5);
        assert!(v.slice(0).data().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn costs_are_capped() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let l = random_color(&mut rng, 20, 8);
        let r = random_color(&mut rng, 20, 8);
        let p = StereoCostParams::default();
        let v = build_stereo_cost(&l, &r, 6, &p).unwrap();
        let cap = p.max_cost();
        assert!((cap - (0.11 * 0.028 + 0.89 * 0.008)).abs() < 1e-15);
        assert!(v.slices().iter().all(|s| s.max_value() <= cap));
        // columns without a partner take the cap
        assert_eq!(v.slice(6).get(5, 3), cap);
    }

    #[test]
    fn shifted_rectangle_recovered() {
        let (w, h, shift) = (48, 24, 4);
        let rect = |x: usize, y: usize| (16..32).contains(&x) && (6..18).contains(&y);
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        // texture inside the rectangle, uniform outside
        let tex: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.3..0.9)).collect();
        let left = ChannelStack::single(ImagePlane::from_fn(w, h, |x, y| if rect(x, y) { tex[y * w + x] } else { 0.1 }));
        let right = ChannelStack::single(ImagePlane::from_fn(w, h, |x, y| {
            if rect(x + shift, y) { tex[y * w + x + shift] } else { 0.1 }
        }));
        let v = build_stereo_cost(&left, &right, 8, &StereoCostParams::default()).unwrap();
        let params = crate::engine::FilterParams::new(1e-4, 2, 1).unwrap();
        let filtered = super::super::filter_volume(&v, &left, &params, super::super::Method::Hgf).unwrap();
        let labels = wta(&filtered);
        for y in 8..16 {
            for x in 18..30 {
                assert_eq!(labels.get(x, y), shift as u32, "({x}, {y})");
            }
        }
    }

    #[test]
    fn stereo_validation() {
        let img = ChannelStack::single(ImagePlane::zeros(8, 4));
        let p = StereoCostParams::default();
        assert!(build_stereo_cost(&img, &img, 0, &p).is_err());
        assert!(build_stereo_cost(&img, &img, 8, &p).is_err());
        let other = ChannelStack::single(ImagePlane::zeros(8, 5));
        assert!(build_stereo_cost(&img, &other, 2, &p).is_err());
    }

    fn two_tone() -> ChannelStack {
        let planes = [(0.9, 0.1), (0.2, 0.3), (0.1, 0.8)]
            .iter()
            .map(|&(a, b)| ImagePlane::from_fn(12, 10, move |x, _| if x < 6 { a } else { b }))
            .collect();
        ChannelStack::new(planes).unwrap()
    }

    #[test]
    fn seen_colors_prefer_their_label() {
        let img = two_tone();
        let fg = [PixelCoord::new(1, 1)];
        let bg = [PixelCoord::new(10, 1)];
        let v = build_segmentation_cost(&img, &fg, &bg, &Default::default()).unwrap();
        assert!(v.slice(1).get(2, 5) < v.slice(0).get(2, 5));
        assert!(v.slice(0).get(9, 5) < v.slice(1).get(9, 5));
        assert!(v.slices().iter().all(|s| s.min_value() >= 0.0 && s.max_value() <= 1.0));
        let labels = wta(&v);
        for y in 0..10 {
            for x in 0..12 {
                assert_eq!(labels.get(x, y), (x < 6) as u32);
            }
        }
    }

    #[test]
    fn symmetric_seeds_give_equal_slices() {
        let img = two_tone();
        let seeds = [PixelCoord::new(1, 1), PixelCoord::new(10, 1)];
        let v = build_segmentation_cost(&img, &seeds, &seeds, &Default::default()).unwrap();
        assert!(v.slice(0).max_abs_diff(v.slice(1)) <= 1e-12);
    }

    #[test]
    fn seed_validation() {
        let img = two_tone();
        let p = SegmentationCostParams::default();
        assert!(build_segmentation_cost(&img, &[], &[PixelCoord::new(0, 0)], &p).is_err());
        assert!(build_segmentation_cost(&img, &[PixelCoord::new(0, 0)], &[], &p).is_err());
        assert!(build_segmentation_cost(&img, &[PixelCoord::new(12, 0)], &[PixelCoord::new(0, 0)], &p).is_err());
    }
}
