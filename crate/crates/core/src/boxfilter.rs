//! Box sums and box means over clipped square windows, via summed-area
//! tables.
//!
//! A window of radius `r` centred on `(x, y)` covers columns
//! `max(0, x-r) ..= min(w-1, x+r)` and the same range of rows, so border
//! pixels see fewer samples. [`count_plane`] gives that per-pixel sample
//! count exactly.
//!
//! [`box_sum`] evaluates every window sum from two tables: one accumulated
//! rows-first, one columns-first. Transposing the input swaps the two
//! accumulation orders, and the final combination only uses commutative
//! additions, so box sums of a transposed plane are the bitwise transpose
//! of the box sums of the plane.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{ImagePlane, PixelCoord};

/// Radius of the square filtering window; the window side is `2r + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowSpec {
    radius: usize,
}

impl WindowSpec {
    pub fn new(radius: usize) -> Result<Self> {
        if radius < 1 {
            return Err(Error::InvalidParameter("window radius must be at least 1".into()));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// Half-open clipped range `[lo, hi)` of the window along an axis of
    /// length `len`.
    #[inline]
    pub fn span(&self, center: usize, len: usize) -> (usize, usize) {
        (
            center.saturating_sub(self.radius),
            (center + self.radius + 1).min(len),
        )
    }

    /// Iterates the pixels of the clipped window around `p`, row by row.
    pub fn pixels(&self, p: PixelCoord, width: usize, height: usize) -> impl Iterator<Item = PixelCoord> {
        let (x0, x1) = self.span(p.x, width);
        let (y0, y1) = self.span(p.y, height);
        (y0..y1).flat_map(move |y| (x0..x1).map(move |x| PixelCoord::new(x, y)))
    }
}

/// Accumulation order used while building a table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SumOrder {
    /// Prefix sums along each row, then down the columns.
    RowsFirst,
    /// Prefix sums down each column, then along the rows.
    ColumnsFirst,
}

/// `(width + 1) x (height + 1)` table with `table[y][x]` the sum of all
/// samples in rows `< y` and columns `< x`.
#[derive(Clone, Debug)]
pub struct SummedAreaTable {
    width: usize,
    height: usize,
    order: SumOrder,
    sums: Vec<f64>,
}

impl SummedAreaTable {
    pub fn build(plane: &ImagePlane, order: SumOrder) -> Self {
        let (w, h) = plane.dims();
        Self::from_samples(w, h, order, |i| plane.data()[i])
    }

    pub(crate) fn from_samples(width: usize, height: usize, order: SumOrder, sample: impl Fn(usize) -> f64) -> Self {
        let stride = width + 1;
        let mut sums = vec![0.0; stride * (height + 1)];
        match order {
            SumOrder::RowsFirst => {
                for y in 0..height {
                    let mut run = 0.0;
                    for x in 0..width {
                        run += sample(y * width + x);
                        sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + run;
                    }
                }
            }
            SumOrder::ColumnsFirst => {
                let mut runs = vec![0.0; width];
                for y in 0..height {
                    for x in 0..width {
                        runs[x] += sample(y * width + x);
                        sums[(y + 1) * stride + x + 1] = sums[(y + 1) * stride + x] + runs[x];
                    }
                }
            }
        }
        Self {
            width,
            height,
            order,
            sums,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn order(&self) -> SumOrder {
        self.order
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.sums[y * (self.width + 1) + x]
    }

    /// Sum over columns `x0..x1` and rows `y0..y1` (half-open).
    #[inline]
    pub fn rect_sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        (self.at(x1, y1) + self.at(x0, y0)) - (self.at(x0, y1) + self.at(x1, y0))
    }

    pub fn total(&self) -> f64 {
        self.at(self.width, self.height)
    }
}

/// Per-pixel clipped window sums.
pub fn box_sum(plane: &ImagePlane, window: WindowSpec) -> ImagePlane {
    let (w, h) = plane.dims();
    box_sum_with(w, h, window, |i| plane.data()[i])
}

/// Box sum of the pointwise product `a * b`, without materializing it.
pub fn box_sum_product(a: &ImagePlane, b: &ImagePlane, window: WindowSpec) -> Result<ImagePlane> {
    a.check_same_dims(b)?;
    let (w, h) = a.dims();
    let (da, db) = (a.data(), b.data());
    Ok(box_sum_with(w, h, window, |i| da[i] * db[i]))
}

/// Box mean: the box sum divided by the clipped window size.
pub fn box_average(plane: &ImagePlane, window: WindowSpec) -> ImagePlane {
    let sums = box_sum(plane, window);
    let (w, h) = plane.dims();
    let r = window.radius();
    let mut data = sums.into_data();
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let ny = axis_count(y, h, r);
        for (x, v) in row.iter_mut().enumerate() {
            *v /= axis_count(x, w, r) * ny;
        }
    });
    ImagePlane::from_vec_unchecked(w, h, data)
}

/// Number of pixels in each clipped window, `|Ω_p|`.
pub fn count_plane(width: usize, height: usize, window: WindowSpec) -> ImagePlane {
    let r = window.radius();
    let mut data = vec![0.0; width * height];
    data.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        let ny = axis_count(y, height, r);
        for (x, v) in row.iter_mut().enumerate() {
            *v = axis_count(x, width, r) * ny;
        }
    });
    ImagePlane::from_vec_unchecked(width, height, data)
}

#[inline]
fn axis_count(c: usize, len: usize, r: usize) -> f64 {
    ((c + r + 1).min(len) - c.saturating_sub(r)) as f64
}

pub(crate) fn box_sum_with(width: usize, height: usize, window: WindowSpec, sample: impl Fn(usize) -> f64 + Sync) -> ImagePlane {
    let (rows, cols) = rayon::join(
        || SummedAreaTable::from_samples(width, height, SumOrder::RowsFirst, &sample),
        || SummedAreaTable::from_samples(width, height, SumOrder::ColumnsFirst, &sample),
    );
    let spans: Vec<(usize, usize)> = (0..width).map(|x| window.span(x, width)).collect();
    let mut data = vec![0.0; width * height];
    data.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        let (y0, y1) = window.span(y, height);
        for (out, &(x0, x1)) in row.iter_mut().zip(&spans) {
            let a = rows.rect_sum(x0, y0, x1, y1);
            let b = cols.rect_sum(x0, y0, x1, y1);
            *out = 0.5 * (a + b);
        }
    });
    ImagePlane::from_vec_unchecked(width, height, data)
}
