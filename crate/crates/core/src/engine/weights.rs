use rayon::prelude::*;

use crate::boxfilter::{box_average, WindowSpec};
use crate::error::{Error, Result};
use crate::image::{alloc_planes, rows_of_many, ChannelStack, ImagePlane};

use super::alpha::AlphaTable;
use super::gram::GramTable;
use super::params::validate_lambda;

/// Per-pixel regression coefficients, `W_0` (offset) through `W_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightStack {
    planes: Vec<ImagePlane>,
}

impl WeightStack {
    pub fn new(planes: Vec<ImagePlane>) -> Result<Self> {
        ChannelStack::new(planes.clone())?;
        if planes.iter().any(|p| p.data().iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("weights"));
        }
        Ok(Self { planes })
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn get(&self, k: usize) -> &ImagePlane {
        &self.planes[k]
    }

    pub fn planes(&self) -> &[ImagePlane] {
        &self.planes
    }
}

/// `W_k = λ⁻¹ G_{k,n+1} + Σ_ij α_ij G_ki G_{j,n+1}` for `k = 0..=n`.
///
/// Evaluated as `λ⁻¹ G_{k,n+1} + Σ_i G_ki s_i` with
/// `s_i = Σ_j α_ij G_{j,n+1}`.
pub fn compute_weights(alpha: &AlphaTable, gram: &GramTable, lambda: f64) -> Result<WeightStack> {
    let lambda = validate_lambda(lambda)?;
    if !alpha.is_complete() || alpha.n() != gram.n() {
        return Err(Error::InvalidParameter(format!(
            "alpha table at stage {} of {}, gram table has n={}",
            alpha.stage(),
            alpha.n(),
            gram.n()
        )));
    }
    if !gram.has_input() {
        return Err(Error::InvalidParameter("gram table has no input column".into()));
    }
    let n = gram.n();
    let inv = 1.0 / lambda;
    let (w, h) = gram.dims();
    let side = n + 1;
    let a: Vec<&[f64]> = (0..side)
        .flat_map(|i| (0..side).map(move |j| (i, j)))
        .map(|(i, j)| alpha.get(i, j).data())
        .collect();
    let gy: Vec<&[f64]> = (0..side).map(|j| gram.get(j, n + 1).data()).collect();
    let gg: Vec<&[f64]> = (0..side)
        .flat_map(|k| (0..side).map(move |i| (k, i)))
        .map(|(k, i)| gram.get(k, i).data())
        .collect();

    let mut out = alloc_planes(side, w, h);
    rows_of_many(&mut out, w, h)
        .into_par_iter()
        .enumerate()
        .for_each(|(y, mut dst)| {
            let seg = y * w..(y + 1) * w;
            let mut s = vec![vec![0.0; w]; side];
            for (i, si) in s.iter_mut().enumerate() {
                for j in 0..side {
                    let aij = &a[i * side + j][seg.clone()];
                    let g = &gy[j][seg.clone()];
                    for x in 0..w {
                        si[x] += aij[x] * g[x];
                    }
                }
            }
            for (k, row) in dst.iter_mut().enumerate() {
                let g = &gy[k][seg.clone()];
                for x in 0..w {
                    row[x] = inv * g[x];
                }
                for (i, si) in s.iter().enumerate() {
                    let gki = &gg[k * side + i][seg.clone()];
                    for x in 0..w {
                        row[x] += gki[x] * si[x];
                    }
                }
            }
        });
    WeightStack::new(
        out.into_iter()
            .map(|d| ImagePlane::from_vec_unchecked(w, h, d))
            .collect(),
    )
}

/// `Z = Σ_{i=1..n} A(W_i) G_i + A(W_0)` where `A` is the box mean.
pub fn aggregate(weights: &WeightStack, guidance: &ChannelStack, window: WindowSpec) -> Result<ImagePlane> {
    if weights.len() != guidance.len() + 1 {
        return Err(Error::InvalidParameter(format!(
            "{} weight planes for {} guidance channels",
            weights.len(),
            guidance.len()
        )));
    }
    guidance.check_plane(weights.get(0))?;
    let averaged: Vec<ImagePlane> = weights
        .planes()
        .par_iter()
        .map(|p| box_average(p, window))
        .collect();
    let (w, h) = guidance.dims();
    let mut data = vec![0.0; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let seg = y * w..(y + 1) * w;
        for (i, g) in guidance.iter().enumerate() {
            let a = &averaged[i + 1].data()[seg.clone()];
            let g = &g.data()[seg.clone()];
            for x in 0..w {
                row[x] += a[x] * g[x];
            }
        }
        let a0 = &averaged[0].data()[seg];
        for x in 0..w {
            row[x] += a0[x];
        }
    });
    let z = ImagePlane::from_vec_unchecked(w, h, data);
    if z.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("aggregation"));
    }
    Ok(z)
}
