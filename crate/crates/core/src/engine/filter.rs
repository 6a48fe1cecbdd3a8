use std::time::{Duration, Instant};

use crate::error::Result;
use crate::guidance::synthesize_polynomial_guidance;
use crate::image::{ChannelStack, ImagePlane};

use super::alpha::{alpha_init, alpha_step, AlphaTable};
use super::gram::{compute_gram, compute_guidance_gram, GramTable};
use super::params::FilterParams;
use super::weights::{aggregate, compute_weights};

/// Wall time spent in each pipeline stage. Guidance synthesis is booked
/// under `gram`, since it only prepares the product images.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimes {
    pub gram: Duration,
    pub alpha: Duration,
    pub weights: Duration,
    pub aggregate: Duration,
    pub total: Duration,
}

impl StageTimes {
    pub fn stage_sum(&self) -> Duration {
        self.gram + self.alpha + self.weights + self.aggregate
    }
}

/// Filters `input` under the polynomial guidance synthesized from `guidance`.
pub fn hgf_filter(input: &ImagePlane, guidance: &ChannelStack, params: &FilterParams) -> Result<ImagePlane> {
    hgf_filter_profiled(input, guidance, params).map(|(z, _)| z)
}

pub fn hgf_filter_profiled(
    input: &ImagePlane,
    guidance: &ChannelStack,
    params: &FilterParams,
) -> Result<(ImagePlane, StageTimes)> {
    guidance.check_plane(input)?;
    let (lambda, window) = (params.lambda(), params.window());
    let mut times = StageTimes::default();
    let start = Instant::now();

    let t = Instant::now();
    let poly = synthesize_polynomial_guidance(guidance, params.poly());
    let gram = compute_gram(&poly, input, window)?;
    times.gram = t.elapsed();

    let t = Instant::now();
    let alpha = run_recursion(&gram, lambda)?;
    times.alpha = t.elapsed();

    let t = Instant::now();
    let weights = compute_weights(&alpha, &gram, lambda)?;
    times.weights = t.elapsed();

    let t = Instant::now();
    let z = aggregate(&weights, &poly, window)?;
    times.aggregate = t.elapsed();

    times.total = start.elapsed();
    Ok((z, times))
}

fn run_recursion(gram: &GramTable, lambda: f64) -> Result<AlphaTable> {
    let mut alpha = alpha_init(gram, lambda)?;
    for kappa in 1..=gram.n() {
        alpha = alpha_step(&alpha, gram, lambda, kappa)?;
    }
    Ok(alpha)
}

/// The guidance-only half of the filter, reusable across inputs.
///
/// `α` depends on the guidance Gram block alone, so filtering many
/// images under one guidance (the slices of a cost volume, say) only pays
/// for the input column, the weights and the aggregation per image. Output
/// is bit-identical to [`hgf_filter`].
#[derive(Clone, Debug)]
pub struct HgfPlan {
    params: FilterParams,
    poly: ChannelStack,
    gram: GramTable,
    alpha: AlphaTable,
}

impl HgfPlan {
    pub fn new(guidance: &ChannelStack, params: &FilterParams) -> Result<Self> {
        let poly = synthesize_polynomial_guidance(guidance, params.poly());
        let gram = compute_guidance_gram(&poly, params.window());
        let alpha = run_recursion(&gram, params.lambda())?;
        Ok(Self {
            params: *params,
            poly,
            gram,
            alpha,
        })
    }

    pub fn params(&self) -> &FilterParams {
        &self.params
    }

    pub fn guidance(&self) -> &ChannelStack {
        &self.poly
    }

    pub fn filter(&self, input: &ImagePlane) -> Result<ImagePlane> {
        let window = self.params.window();
        let gram = self.gram.with_input(&self.poly, input, window)?;
        let weights = compute_weights(&self.alpha, &gram, self.params.lambda())?;
        aggregate(&weights, &self.poly, window)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::direct_ridge_filter;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stack(rng: &mut ChaCha8Rng, c: usize, w: usize, h: usize) -> ChannelStack {
        ChannelStack::new((0..c).map(|_| ImagePlane::from_fn(w, h, |_, _| rng.gen())).collect()).unwrap()
    }

    #[test]
    fn constant_input_tiny_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let g = random_stack(&mut rng, 1, 20, 20);
        let params = FilterParams::new(1e-6, 3, 2).unwrap();
        let z = hgf_filter(&ImagePlane::filled(20, 20, 0.6), &g, &params).unwrap();
        assert!(z.data().iter().all(|v| (v - 0.6).abs() <= 1e-3));
    }

    #[test]
    fn matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = random_stack(&mut rng, 3, 24, 20);
        let y = random_stack(&mut rng, 1, 24, 20).into_planes().remove(0);
        let params = FilterParams::new(0.05, 3, 2).unwrap();
        let fast = hgf_filter(&y, &g, &params).unwrap();
        let slow = direct_ridge_filter(&y, &g, &params).unwrap();
        let err = fast.max_abs_diff(&slow);
        assert!(err <= 1e-6, "err {err}");
    }

    #[test]
    fn plan_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let g = random_stack(&mut rng, 3, 17, 13);
        let params = FilterParams::new(0.05, 2, 2).unwrap();
        let plan = HgfPlan::new(&g, &params).unwrap();
        for _ in 0..2 {
            let y = ImagePlane::from_fn(17, 13, |_, _| rng.gen());
            assert!(plan.filter(&y).unwrap().bit_eq(&hgf_filter(&y, &g, &params).unwrap()));
        }
    }

    #[test]
    fn linear_in_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let g = random_stack(&mut rng, 1, 30, 30);
        let y1 = ImagePlane::from_fn(30, 30, |_, _| rng.gen());
        let y2 = ImagePlane::from_fn(30, 30, |_, _| rng.gen());
        let params = FilterParams::new(0.05, 4, 3).unwrap();
        let (a, b) = (0.7, -2.3);
        let mix = y1.scale(a).unwrap().add(&y2.scale(b).unwrap()).unwrap();
        let lhs = hgf_filter(&mix, &g, &params).unwrap();
        let rhs = hgf_filter(&y1, &g, &params)
            .unwrap()
            .scale(a)
            .unwrap()
            .add(&hgf_filter(&y2, &g, &params).unwrap().scale(b).unwrap())
            .unwrap();
        assert!(lhs.max_abs_diff(&rhs) <= 1e-8);
    }

    #[test]
    fn transpose_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let g = random_stack(&mut rng, 3, 21, 15);
        let y = ImagePlane::from_fn(21, 15, |_, _| rng.gen());
        let params = FilterParams::new(0.05, 3, 2).unwrap();
        let a = hgf_filter(&y.transpose(), &g.transpose(), &params).unwrap();
        let b = hgf_filter(&y, &g, &params).unwrap().transpose();
        assert!(a.bit_eq(&b));
    }

    #[test]
    fn stage_times_add_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let g = random_stack(&mut rng, 1, 64, 64);
        let y = ImagePlane::from_fn(64, 64, |_, _| rng.gen());
        let (_, t) = hgf_filter_profiled(&y, &g, &FilterParams::default()).unwrap();
        assert!(t.stage_sum() <= t.total);
    }

    #[test]
    fn mismatched_input_rejected() {
        let g = ChannelStack::single(ImagePlane::ones(4, 4));
        assert!(hgf_filter(&ImagePlane::ones(4, 5), &g, &FilterParams::default()).is_err());
    }
}
