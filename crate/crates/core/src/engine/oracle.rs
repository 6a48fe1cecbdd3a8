//! Dense per-window reference implementation. Nothing here uses summed-area
//! tables or the `α` recursion.

use rayon::prelude::*;

use crate::boxfilter::WindowSpec;
use crate::error::{Error, Result};
use crate::guidance::synthesize_polynomial_guidance;
use crate::image::{alloc_planes, rows_of_many, ChannelStack, ImagePlane, PixelCoord};
use crate::linalg::solve_in_place;

use super::params::FilterParams;
use super::weights::WeightStack;

/// Solves `(λE + XᵀX) w = Xᵀ target` for one window, where the columns of
/// `X` are the ones vector followed by `columns`.
pub fn ridge_oracle(columns: &[&[f64]], target: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ridge weight must be positive, got {lambda}"
        )));
    }
    let len = target.len();
    if len == 0 {
        return Err(Error::InvalidParameter("empty window".into()));
    }
    if columns.iter().any(|c| c.len() != len) {
        return Err(Error::InvalidParameter("window columns differ in length".into()));
    }
    let side = columns.len() + 1;
    let col = |i: usize, q: usize| if i == 0 { 1.0 } else { columns[i - 1][q] };
    let mut a = vec![0.0; side * side];
    let mut b = vec![0.0; side];
    for i in 0..side {
        for j in i..side {
            let s: f64 = (0..len).map(|q| col(i, q) * col(j, q)).sum();
            a[i * side + j] = s;
            a[j * side + i] = s;
        }
        a[i * side + i] += lambda;
        b[i] = (0..len).map(|q| col(i, q) * target[q]).sum();
    }
    solve_in_place(&mut a, &mut b, side)?;
    Ok(b)
}

/// Per-pixel ridge coefficients by dense solve over each clipped window.
/// `guidance` is used as-is (no polynomial synthesis).
pub fn direct_ridge_weights(
    guidance: &ChannelStack,
    input: &ImagePlane,
    window: WindowSpec,
    lambda: f64,
) -> Result<WeightStack> {
    guidance.check_plane(input)?;
    let (w, h) = input.dims();
    let n = guidance.len();
    let mut out = alloc_planes(n + 1, w, h);
    let results: Vec<Result<()>> = rows_of_many(&mut out, w, h)
        .into_par_iter()
        .enumerate()
        .map(|(y, mut dst)| {
            let mut cols: Vec<Vec<f64>> = vec![Vec::new(); n];
            let mut target = Vec::new();
            for x in 0..w {
                cols.iter_mut().for_each(Vec::clear);
                target.clear();
                for q in window.pixels(PixelCoord::new(x, y), w, h) {
                    for (c, plane) in cols.iter_mut().zip(guidance) {
                        c.push(plane.at(q));
                    }
                    target.push(input.at(q));
                }
                let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
                let wv = ridge_oracle(&refs, &target, lambda)?;
                for (k, v) in wv.into_iter().enumerate() {
                    dst[k][x] = v;
                }
            }
            Ok(())
        })
        .collect();
    results.into_iter().collect::<Result<()>>()?;
    WeightStack::new(
        out.into_iter()
            .map(|d| ImagePlane::from_vec_unchecked(w, h, d))
            .collect(),
    )
}

/// `Z(q) = Σ_i mean_{p∈Ω_q}(W_i(p)) G_i(q) + mean_{p∈Ω_q}(W_0(p))`, with the
/// window means taken by direct summation.
pub fn naive_aggregate(weights: &WeightStack, guidance: &ChannelStack, window: WindowSpec) -> Result<ImagePlane> {
    if weights.len() != guidance.len() + 1 {
        return Err(Error::InvalidParameter("weight and guidance counts disagree".into()));
    }
    guidance.check_plane(weights.get(0))?;
    let (w, h) = guidance.dims();
    let mut data = vec![0.0; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let q = PixelCoord::new(x, y);
            let mut sums = vec![0.0; weights.len()];
            let mut count = 0usize;
            for p in window.pixels(q, w, h) {
                for (s, wp) in sums.iter_mut().zip(weights.planes()) {
                    *s += wp.at(p);
                }
                count += 1;
            }
            let c = count as f64;
            let mut z = sums[0] / c;
            for (i, g) in guidance.iter().enumerate() {
                z += sums[i + 1] / c * g.at(q);
            }
            *out = z;
        }
    });
    Ok(ImagePlane::from_vec_unchecked(w, h, data))
}

/// Reference filter: polynomial guidance, a dense ridge solve per window,
/// then naive aggregation.
pub fn direct_ridge_filter(input: &ImagePlane, guidance: &ChannelStack, params: &FilterParams) -> Result<ImagePlane> {
    guidance.check_plane(input)?;
    let poly = synthesize_polynomial_guidance(guidance, params.poly());
    let weights = direct_ridge_weights(&poly, input, params.window(), params.lambda())?;
    naive_aggregate(&weights, &poly, params.window())
}
