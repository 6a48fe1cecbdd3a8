//! Deterministic synthetic scenes with known answers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{ChannelStack, ImagePlane, PixelCoord};
use crate::io::quantize;
use crate::multilabel::DisparityTruth;

/// A rectified color pair over a two-layer scene.
#[derive(Clone, Debug)]
pub struct StereoFixture {
    pub left: ChannelStack,
    pub right: ChannelStack,
    /// Reference disparities of the left view; occluded pixels and pixels
    /// whose match leaves the right image are masked out.
    pub truth: DisparityTruth,
    pub dmax: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StereoFixtureSpec {
    pub width: usize,
    pub height: usize,
    pub background_disparity: usize,
    pub foreground_disparity: usize,
    pub dmax: usize,
    /// Peak amplitude of the per-view sensor noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for StereoFixtureSpec {
    fn default() -> Self {
        Self {
            width: 96,
            height: 64,
            background_disparity: 2,
            foreground_disparity: 6,
            dmax: 8,
            noise: 0.04,
            seed: 7,
        }
    }
}

fn to_grid(v: f64) -> f64 {
    quantize(v) as f64 / 255.0
}

// blocky texture: every 2x2 cell shares one color
fn texture(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: f64, hi: f64) -> Vec<[f64; 3]> {
    let cw = w.div_ceil(2);
    let cells: Vec<[f64; 3]> = (0..cw * h.div_ceil(2))
        .map(|_| [rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi)])
        .collect();
    (0..w * h).map(|k| cells[(k / w / 2) * cw + (k % w) / 2]).collect()
}

/// Background at one disparity with a rectangle in front of it at a larger
/// one. Both views get independent noise and are quantized to 8 bits.
pub fn stereo_fixture(spec: &StereoFixtureSpec) -> Result<StereoFixture> {
    let StereoFixtureSpec {
        width: w,
        height: h,
        background_disparity: db,
        foreground_disparity: df,
        dmax,
        noise,
        seed,
    } = *spec;
    if db >= df || df > dmax || dmax >= w / 2 || h < 8 {
        return Err(Error::InvalidParameter(format!("unusable stereo fixture {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // layer textures in left-view coordinates, wide enough for the shift
    let bg = texture(&mut rng, w + dmax, h, 0.05, 0.55);
    let fg = texture(&mut rng, w + dmax, h, 0.5, 0.95);
    let (x0, x1) = (w * 3 / 8, w * 5 / 8 + dmax);
    let (y0, y1) = (h / 4, h * 3 / 4);
    let in_fg = |x: usize, y: usize| (x0..x1).contains(&x) && (y0..y1).contains(&y);
    let tw = w + dmax;

    let noise_plane = |rng: &mut ChaCha8Rng| -> Vec<[f64; 3]> {
        (0..w * h)
            .map(|_| [0; 3].map(|_| noise * (rng.gen::<f64>() + rng.gen::<f64>() - 1.0)))
            .collect()
    };
    let left_noise = noise_plane(&mut rng);
    let right_noise = noise_plane(&mut rng);

    let left_px = |x: usize, y: usize| if in_fg(x, y) { fg[y * tw + x] } else { bg[y * tw + x] };
    // right pixel x sees left-view location x + d of whichever layer is in front
    let right_px = |x: usize, y: usize| {
        if in_fg(x + df, y) {
            fg[y * tw + x + df]
        } else {
            bg[y * tw + x + db]
        }
    };
    let build = |px: &dyn Fn(usize, usize) -> [f64; 3], nz: &[[f64; 3]]| -> Result<ChannelStack> {
        let planes = (0..3)
            .map(|c| ImagePlane::from_fn(w, h, |x, y| to_grid(px(x, y)[c] + nz[y * w + x][c])))
            .collect();
        ChannelStack::new(planes)
    };
    let left = build(&left_px, &left_noise)?;
    let right = build(&right_px, &right_noise)?;

    let disparity = ImagePlane::from_fn(w, h, |x, y| if in_fg(x, y) { df as f64 } else { db as f64 });
    let mask = (0..w * h)
        .map(|k| {
            let (x, y) = (k % w, k / w);
            let d = if in_fg(x, y) { df } else { db };
            // background hidden behind the rectangle in the right view
            x >= d && (in_fg(x, y) || !in_fg(x - db + df, y))
        })
        .collect();
    Ok(StereoFixture {
        left,
        right,
        truth: DisparityTruth::new(disparity, mask)?,
        dmax,
    })
}

/// A two-color image with one seed pixel per region.
#[derive(Clone, Debug)]
pub struct SegmentationFixture {
    pub image: ChannelStack,
    pub fg_seeds: Vec<PixelCoord>,
    pub bg_seeds: Vec<PixelCoord>,
    /// 1 for foreground, 0 for background.
    pub truth: Vec<u32>,
}

/// A disc of one color on a background of another.
pub fn segmentation_fixture(width: usize, height: usize) -> Result<SegmentationFixture> {
    if width < 8 || height < 8 {
        return Err(Error::InvalidParameter(format!(
            "segmentation fixture needs at least 8x8, got {width}x{height}"
        )));
    }
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    let radius = width.min(height) as f64 / 3.0;
    let inside = |x: usize, y: usize| {
        let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
        dx * dx + dy * dy <= radius * radius
    };
    let fg_color = [200.0 / 255.0, 60.0 / 255.0, 40.0 / 255.0];
    let bg_color = [40.0 / 255.0, 90.0 / 255.0, 180.0 / 255.0];
    let planes = (0..3)
        .map(|c| ImagePlane::from_fn(width, height, |x, y| if inside(x, y) { fg_color[c] } else { bg_color[c] }))
        .collect();
    let truth = (0..width * height).map(|k| inside(k % width, k / width) as u32).collect();
    Ok(SegmentationFixture {
        image: ChannelStack::new(planes)?,
        fg_seeds: vec![PixelCoord::new(width / 2, height / 2)],
        bg_seeds: vec![PixelCoord::new(0, 0)],
        truth,
    })
}
