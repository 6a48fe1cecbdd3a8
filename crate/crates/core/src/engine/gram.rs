use std::sync::Arc;

use rayon::prelude::*;

use crate::boxfilter::{box_sum_with, count_plane, WindowSpec};
use crate::error::{Error, Result};
use crate::image::{ChannelStack, ImagePlane};

/// Symmetric table of box-filtered channel products.
///
/// Indices run over `0..=n+1`: `0` is the constant ones channel, `1..=n`
/// the guidance channels and `n+1` the input image. Only `i <= j` is
/// stored. The guidance block (`j <= n`) is shared behind an `Arc` so one
/// guidance can serve many inputs (see [`GramTable::with_input`]).
#[derive(Clone, Debug)]
pub struct GramTable {
    n: usize,
    guide: Arc<[ImagePlane]>,
    input: Option<Vec<ImagePlane>>,
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    j * (j + 1) / 2 + i
}

impl GramTable {
    /// Assembles a table from precomputed planes. `guide` holds entries
    /// `(i, j)` with `i <= j <= n` ordered by `j`, then `i`; `input`, when
    /// present, holds `(i, n+1)` for `i = 0..=n+1`.
    pub fn from_planes(n: usize, guide: Vec<ImagePlane>, input: Option<Vec<ImagePlane>>) -> Result<Self> {
        let expected = (n + 1) * (n + 2) / 2;
        if guide.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "gram table for n={n} needs {expected} guidance planes, got {}",
                guide.len()
            )));
        }
        if let Some(col) = &input {
            if col.len() != n + 2 {
                return Err(Error::InvalidParameter(format!(
                    "input column needs {} planes, got {}",
                    n + 2,
                    col.len()
                )));
            }
        }
        for p in guide.iter().chain(input.iter().flatten()) {
            guide[0].check_same_dims(p)?;
        }
        Ok(Self {
            n,
            guide: guide.into(),
            input,
        })
    }

    /// Number of guidance channels, excluding the ones channel.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> (usize, usize) {
        self.guide[0].dims()
    }

    pub fn has_input(&self) -> bool {
        self.input.is_some()
    }

    /// `G_ij`. Panics for indices beyond `n+1`, or for `n+1` when the
    /// table was built without an input.
    pub fn get(&self, i: usize, j: usize) -> &ImagePlane {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if j <= self.n {
            &self.guide[packed(i, j)]
        } else {
            assert_eq!(j, self.n + 1, "gram index out of range");
            &self.input.as_ref().expect("gram table has no input column")[i]
        }
    }

    /// Adds the input column `G_{i,n+1}` for a new input image, reusing the
    /// guidance block.
    pub fn with_input(&self, guidance: &ChannelStack, input: &ImagePlane, window: WindowSpec) -> Result<GramTable> {
        if guidance.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "gram table has {} guidance channels, got {}",
                self.n,
                guidance.len()
            )));
        }
        guidance.check_plane(input)?;
        if guidance.dims() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: guidance.dims(),
            });
        }
        let (w, h) = input.dims();
        let n = self.n;
        let column: Vec<ImagePlane> = (0..=n + 1)
            .into_par_iter()
            .map(|i| {
                let y = input.data();
                if i == 0 {
                    box_sum_with(w, h, window, |k| y[k])
                } else if i <= n {
                    let g = guidance.plane(i - 1).data();
                    box_sum_with(w, h, window, |k| g[k] * y[k])
                } else {
                    clamp_negative(box_sum_with(w, h, window, |k| y[k] * y[k]))
                }
            })
            .collect();
        Ok(GramTable {
            n,
            guide: Arc::clone(&self.guide),
            input: Some(column),
        })
    }
}

/// Gram planes of the guidance block only (`0 <= i <= j <= n`).
pub fn compute_guidance_gram(guidance: &ChannelStack, window: WindowSpec) -> GramTable {
    let (w, h) = guidance.dims();
    let n = guidance.len();
    let pairs: Vec<(usize, usize)> = (0..=n).flat_map(|j| (0..=j).map(move |i| (i, j))).collect();
    let guide: Vec<ImagePlane> = pairs
        .par_iter()
        .map(|&(i, j)| match (i, j) {
            (0, 0) => count_plane(w, h, window),
            (0, j) => {
                let g = guidance.plane(j - 1).data();
                box_sum_with(w, h, window, |k| g[k])
            }
            (i, j) => {
                let (a, b) = (guidance.plane(i - 1).data(), guidance.plane(j - 1).data());
                let s = box_sum_with(w, h, window, |k| a[k] * b[k]);
                if i == j {
                    clamp_negative(s)
                } else {
                    s
                }
            }
        })
        .collect();
    GramTable {
        n,
        guide: guide.into(),
        input: None,
    }
}

/// Full table `G_ij = box(G_i G_j)` for `0 <= i <= j <= n+1`, with
/// `G_0 = 1` and `G_{n+1} = input`.
pub fn compute_gram(guidance: &ChannelStack, input: &ImagePlane, window: WindowSpec) -> Result<GramTable> {
    guidance.check_plane(input)?;
    compute_guidance_gram(guidance, window).with_input(guidance, input, window)
}

/// Box sums of squares are non-negative; summed-area cancellation can leave
/// a tiny negative residue.
fn clamp_negative(mut p: ImagePlane) -> ImagePlane {
    if p.data().iter().any(|&v| v < 0.0) {
        let (w, h) = p.dims();
        let data = std::mem::replace(&mut p, ImagePlane::zeros(1, 1))
            .into_data()
            .into_iter()
            .map(|v| v.max(0.0))
            .collect();
        p = ImagePlane::from_vec_unchecked(w, h, data);
    }
    p
}
