//! Polynomial guidance synthesis.
//!
//! Each input channel `I_i` contributes the powers `I_i, I_i^2, ..., I_i^d`,
//! stacked channel-major: output index `(i-1)*d + j` (1-based) holds
//! `I_i^j`. The constant ones channel is not part of the output; the
//! engine accounts for it implicitly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{powi_exact, ChannelStack, ImagePlane};

/// Degree of the per-channel polynomial map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolynomialSpec {
    degree: usize,
}

impl PolynomialSpec {
    pub fn new(degree: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidParameter("polynomial degree must be at least 1".into()));
        }
        Ok(Self { degree })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of synthesized channels for `input_channels` raw channels.
    pub fn output_channels(&self, input_channels: usize) -> usize {
        input_channels * self.degree
    }
}

impl Default for PolynomialSpec {
    fn default() -> Self {
        Self { degree: 2 }
    }
}

pub fn synthesize_polynomial_guidance(input: &ChannelStack, spec: PolynomialSpec) -> ChannelStack {
    let d = spec.degree();
    let planes: Vec<ImagePlane> = (0..input.len() * d)
        .into_par_iter()
        .map(|k| {
            let (src, power) = (input.plane(k / d), (k % d + 1) as u32);
            if power == 1 {
                return src.clone();
            }
            let (w, h) = src.dims();
            let data = src.data().iter().map(|&v| powi_exact(v, power)).collect();
            ImagePlane::from_vec_unchecked(w, h, data)
        })
        .collect();
    ChannelStack::new(planes).expect("synthesized planes share the input dimensions")
}
