//! Single-channel image planes and stacks of planes.
//!
//! Every plane is stored row-major in double precision. Pointwise
//! operations are evaluated per row (in parallel where rayon is allowed to)
//! and each output element depends only on the matching input elements, so
//! results never depend on the worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// A pixel position, `x` is the column and `y` the row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PixelCoord {
    pub x: usize,
    pub y: usize,
}

impl PixelCoord {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImagePlane {
    /// Builds a plane from row-major data, rejecting wrong lengths and
    /// non-finite values.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "plane dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "plane data has {} values, expected {}",
                data.len(),
                width * height
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("plane construction"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub(crate) fn from_vec_unchecked(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn ones(width: usize, height: usize) -> Self {
        Self::filled(width, height, 1.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "plane dimensions must be positive");
        assert!(value.is_finite(), "fill value must be finite");
        Self::from_vec_unchecked(width, height, vec![value; width * height])
    }

    /// Builds a plane by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "plane dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                assert!(v.is_finite(), "from_fn produced a non-finite value");
                data.push(v);
            }
        }
        Self::from_vec_unchecked(width, height, data)
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn at(&self, p: PixelCoord) -> f64 {
        self.get(p.x, p.y)
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn contains(&self, p: PixelCoord) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub fn check_same_dims(&self, other: &ImagePlane) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }

    pub fn transpose(&self) -> ImagePlane {
        let (w, h) = self.dims();
        let mut data = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                data[x * h + y] = self.data[y * w + x];
            }
        }
        Self::from_vec_unchecked(h, w, data)
    }

    pub fn max_abs_diff(&self, other: &ImagePlane) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Bitwise equality, distinguishing `0.0` from `-0.0`.
    pub fn bit_eq(&self, other: &ImagePlane) -> bool {
        self.dims() == other.dims()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    fn finish(self, what: &'static str) -> Result<Self> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what));
        }
        Ok(self)
    }

    fn unary(&self, f: impl Fn(f64) -> f64 + Sync) -> ImagePlane {
        map_pixels(self.width, self.height, |i| f(self.data[i]))
    }

    fn binary(&self, other: &ImagePlane, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<ImagePlane> {
        self.check_same_dims(other)?;
        Ok(map_pixels(self.width, self.height, |i| {
            f(self.data[i], other.data[i])
        }))
    }

    pub fn add(&self, other: &ImagePlane) -> Result<ImagePlane> {
        self.binary(other, |a, b| a + b)?.finish("add")
    }

    pub fn sub(&self, other: &ImagePlane) -> Result<ImagePlane> {
        self.binary(other, |a, b| a - b)?.finish("sub")
    }

    pub fn mul(&self, other: &ImagePlane) -> Result<ImagePlane> {
        self.binary(other, |a, b| a * b)?.finish("mul")
    }

    /// Pointwise quotient. Any zero in `other` is an error.
    pub fn div(&self, other: &ImagePlane) -> Result<ImagePlane> {
        self.check_same_dims(other)?;
        if let Some(i) = other.data.iter().position(|&v| v == 0.0) {
            return Err(Error::DivisionByZero(other.coord_of(i)));
        }
        self.binary(other, |a, b| a / b)?.finish("div")
    }

    /// Pointwise quotient where denominators smaller than `eps` in magnitude
    /// are replaced by `±eps` (zero counts as positive).
    pub fn div_guarded(&self, other: &ImagePlane, eps: f64) -> Result<ImagePlane> {
        check_guard(eps)?;
        self.binary(other, |a, b| a / guard(b, eps))?
            .finish("div")
    }

    pub fn scale(&self, factor: f64) -> Result<ImagePlane> {
        self.unary(|a| a * factor).finish("scale")
    }

    pub fn offset(&self, shift: f64) -> Result<ImagePlane> {
        self.unary(|a| a + shift).finish("offset")
    }

    /// Integer power by repeated multiplication; `power(0)` is the ones plane.
    pub fn power(&self, exponent: u32) -> Result<ImagePlane> {
        self.unary(|a| powi_exact(a, exponent)).finish("power")
    }

    pub fn reciprocal(&self) -> Result<ImagePlane> {
        if let Some(i) = self.data.iter().position(|&v| v == 0.0) {
            return Err(Error::DivisionByZero(self.coord_of(i)));
        }
        self.unary(|a| 1.0 / a).finish("reciprocal")
    }

    pub fn reciprocal_guarded(&self, eps: f64) -> Result<ImagePlane> {
        check_guard(eps)?;
        self.unary(|a| 1.0 / guard(a, eps)).finish("reciprocal")
    }

    pub fn negate(&self) -> ImagePlane {
        self.unary(|a| -a)
    }

    fn coord_of(&self, index: usize) -> PixelCoord {
        PixelCoord::new(index % self.width, index / self.width)
    }
}

/// Operators accepted by [`plane_arith`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    /// Division; `guard` replaces small denominators when present.
    Div { guard: Option<f64> },
    Scale(f64),
    Offset(f64),
    Power(u32),
    Reciprocal { guard: Option<f64> },
    Negate,
}

/// Applies `op` pointwise. Binary operators need `rhs`; unary ones reject it.
pub fn plane_arith(op: ArithOp, lhs: &ImagePlane, rhs: Option<&ImagePlane>) -> Result<ImagePlane> {
    let need_rhs = matches!(op, ArithOp::Add | ArithOp::Sub | ArithOp::Mul | ArithOp::Div { .. });
    match (need_rhs, rhs) {
        (true, None) => {
            return Err(Error::InvalidParameter(format!(
                "{op:?} needs two plane operands"
            )))
        }
        (false, Some(_)) => {
            return Err(Error::InvalidParameter(format!(
                "{op:?} takes a single plane operand"
            )))
        }
        _ => {}
    }
    match op {
        ArithOp::Add => lhs.add(rhs.unwrap()),
        ArithOp::Sub => lhs.sub(rhs.unwrap()),
        ArithOp::Mul => lhs.mul(rhs.unwrap()),
        ArithOp::Div { guard: None } => lhs.div(rhs.unwrap()),
        ArithOp::Div { guard: Some(eps) } => lhs.div_guarded(rhs.unwrap(), eps),
        ArithOp::Scale(s) => lhs.scale(s),
        ArithOp::Offset(s) => lhs.offset(s),
        ArithOp::Power(e) => lhs.power(e),
        ArithOp::Reciprocal { guard: None } => lhs.reciprocal(),
        ArithOp::Reciprocal { guard: Some(eps) } => lhs.reciprocal_guarded(eps),
        ArithOp::Negate => Ok(lhs.negate()),
    }
}

fn check_guard(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "division guard must be positive and finite, got {eps}"
        )));
    }
    Ok(())
}

#[inline]
fn guard(d: f64, eps: f64) -> f64 {
    if d.abs() >= eps {
        d
    } else if d < 0.0 {
        -eps
    } else {
        eps
    }
}

/// `base^exponent` by left-to-right repeated multiplication.
#[inline]
pub(crate) fn powi_exact(base: f64, exponent: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..exponent {
        acc *= base;
    }
    acc
}

/// Evaluates `f(index)` for every pixel, row-parallel.
pub(crate) fn map_pixels(width: usize, height: usize, f: impl Fn(usize) -> f64 + Sync) -> ImagePlane {
    let mut data = vec![0.0; width * height];
    data.par_chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| {
            let base = y * width;
            for (x, out) in row.iter_mut().enumerate() {
                *out = f(base + x);
            }
        });
    ImagePlane::from_vec_unchecked(width, height, data)
}

pub(crate) fn alloc_planes(count: usize, width: usize, height: usize) -> Vec<Vec<f64>> {
    (0..count).map(|_| vec![0.0; width * height]).collect()
}

/// Splits several planes into per-row mutable slices so a single
/// row-parallel pass can fill all of them at once. The result is indexed
/// `[row][plane]`.
pub(crate) fn rows_of_many(planes: &mut [Vec<f64>], width: usize, height: usize) -> Vec<Vec<&mut [f64]>> {
    let mut rows: Vec<Vec<&mut [f64]>> = (0..height).map(|_| Vec::with_capacity(planes.len())).collect();
    for plane in planes.iter_mut() {
        for (y, chunk) in plane.chunks_mut(width).enumerate() {
            rows[y].push(chunk);
        }
    }
    rows
}

/// An ordered, non-empty list of planes sharing dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStack {
    planes: Vec<ImagePlane>,
}

impl ChannelStack {
    pub fn new(planes: Vec<ImagePlane>) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::InvalidParameter("channel stack must not be empty".into()))?;
        for p in &planes[1..] {
            first.check_same_dims(p)?;
        }
        Ok(Self { planes })
    }

    pub fn single(plane: ImagePlane) -> Self {
        Self {
            planes: vec![plane],
        }
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn width(&self) -> usize {
        self.planes[0].width()
    }

    pub fn height(&self) -> usize {
        self.planes[0].height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.planes[0].dims()
    }

    pub fn planes(&self) -> &[ImagePlane] {
        &self.planes
    }

    pub fn plane(&self, i: usize) -> &ImagePlane {
        &self.planes[i]
    }

    pub fn into_planes(self) -> Vec<ImagePlane> {
        self.planes
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ImagePlane> {
        self.planes.iter()
    }

    pub fn check_plane(&self, plane: &ImagePlane) -> Result<()> {
        self.planes[0].check_same_dims(plane)
    }

    pub fn transpose(&self) -> ChannelStack {
        Self {
            planes: self.planes.iter().map(ImagePlane::transpose).collect(),
        }
    }

    /// Channel mean, used as the gray version of a color image.
    pub fn mean_plane(&self) -> ImagePlane {
        let k = self.planes.len() as f64;
        map_pixels(self.width(), self.height(), |i| {
            self.planes.iter().map(|p| p.data[i]).sum::<f64>() / k
        })
    }

    pub fn bit_eq(&self, other: &ChannelStack) -> bool {
        self.len() == other.len() && self.planes.iter().zip(&other.planes).all(|(a, b)| a.bit_eq(b))
    }
}

impl<'a> IntoIterator for &'a ChannelStack {
    type Item = &'a ImagePlane;
    type IntoIter = std::slice::Iter<'a, ImagePlane>;

    fn into_iter(self) -> Self::IntoIter {
        self.planes.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(rows: &[&[f64]]) -> ImagePlane {
        let h = rows.len();
        let w = rows[0].len();
        ImagePlane::new(w, h, rows.concat()).unwrap()
    }

    #[test]
    fn pointwise_square() {
        let x = p(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(x.mul(&x).unwrap(), p(&[&[1.0, 4.0], &[9.0, 16.0]]));
    }

    #[test]
    fn additive_inverse_is_zero() {
        let x = p(&[&[0.3, -2.5], &[7.25, 1e-3]]);
        let z = plane_arith(ArithOp::Add, &x, Some(&x.negate())).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cube_of_half() {
        let x = p(&[&[0.5]]);
        assert_eq!(x.power(3).unwrap().get(0, 0), 0.125);
        assert_eq!(x.power(0).unwrap().get(0, 0), 1.0);
    }

    #[test]
    fn division_by_zero_needs_guard() {
        let a = p(&[&[1.0, 2.0]]);
        let b = p(&[&[1.0, 0.0]]);
        match a.div(&b) {
            Err(Error::DivisionByZero(c)) => assert_eq!(c, PixelCoord::new(1, 0)),
            other => panic!("expected division error, got {other:?}"),
        }
        let q = plane_arith(ArithOp::Div { guard: Some(0.5) }, &a, Some(&b)).unwrap();
        assert_eq!(q.data(), &[1.0, 4.0]);
        assert!(b.reciprocal().is_err());
        assert_eq!(b.reciprocal_guarded(0.25).unwrap().data(), &[1.0, 4.0]);
    }

    #[test]
    fn mismatched_dims_rejected() {
        let a = ImagePlane::zeros(2, 3);
        let b = ImagePlane::zeros(3, 2);
        assert!(matches!(a.add(&b), Err(Error::DimensionMismatch { .. })));
        assert!(ChannelStack::new(vec![a, b]).is_err());
        assert!(ChannelStack::new(vec![]).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        let a = ImagePlane::filled(1, 1, 1e308);
        assert!(matches!(a.add(&a), Err(Error::NonFinite(_))));
        assert!(ImagePlane::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn arity_checked() {
        let a = ImagePlane::ones(1, 1);
        assert!(plane_arith(ArithOp::Mul, &a, None).is_err());
        assert!(plane_arith(ArithOp::Negate, &a, Some(&a)).is_err());
        assert_eq!(
            plane_arith(ArithOp::Offset(2.0), &a, None).unwrap().get(0, 0),
            3.0
        );
        assert_eq!(
            plane_arith(ArithOp::Scale(-2.0), &a, None).unwrap().get(0, 0),
            -2.0
        );
    }

    #[test]
    fn transpose_twice_is_identity() {
        let a = ImagePlane::from_fn(3, 2, |x, y| (x * 10 + y) as f64);
        assert_eq!(a.transpose().get(1, 2), a.get(2, 1));
        assert_eq!(a.transpose().transpose(), a);
    }

    fn planes(w: usize, h: usize) -> impl Strategy<Value = (ImagePlane, ImagePlane)> {
        let n = w * h;
        (
            prop::collection::vec(-1e6f64..1e6, n),
            prop::collection::vec(-1e6f64..1e6, n),
        )
            .prop_map(move |(a, b)| {
                (
                    ImagePlane::new(w, h, a).unwrap(),
                    ImagePlane::new(w, h, b).unwrap(),
                )
            })
    }

    proptest! {
        #[test]
        fn addition_commutes_exactly((a, b) in planes(5, 4)) {
            prop_assert!(a.add(&b).unwrap().bit_eq(&b.add(&a).unwrap()));
            prop_assert!(a.mul(&b).unwrap().bit_eq(&b.mul(&a).unwrap()));
        }
    }
}
