//! The classical guided filter for gray (1 channel) and color (3 channel)
//! guidance.
//!
//! Unlike the polynomial filter in [`crate::engine`], the offset term is not
//! regularized. Each window is centered first: with `x̄`, `ȳ` the window
//! means and `C` the centered Gram matrix, the slopes solve
//! `(εE + C_xx) a = C_xy` and the offset is `b = ȳ - aᵀx̄`. The centered
//! system has no constant column, so it is inverted with the same `α`
//! recursion as the main engine, starting from the first guidance channel.
//!
//! `ε` multiplies the identity in the un-normalized system above. The
//! common formulation that regularizes the window covariance instead uses
//! `ε / |Ω|`.

use std::time::Instant;

use rayon::prelude::*;

use crate::boxfilter::WindowSpec;
use crate::engine::{
    aggregate, alpha_init, alpha_step, compute_gram, compute_weights, naive_aggregate, GramTable, StageTimes,
    WeightStack,
};
use crate::engine::FilterParams;
use crate::error::{Error, Result};
use crate::image::{alloc_planes, rows_of_many, ChannelStack, ImagePlane, PixelCoord};
use crate::linalg::invert;

fn check_channels(guidance: &ChannelStack) -> Result<()> {
    match guidance.len() {
        1 | 3 => Ok(()),
        n => Err(Error::InvalidParameter(format!(
            "guided filter takes gray or color guidance, got {n} channels"
        ))),
    }
}

fn regularizer(eps: f64) -> Result<f64> {
    Ok(FilterParams::new(eps, 1, 1)?.lambda())
}

/// Window means and centered Gram planes over the guidance channels and the
/// input.
#[derive(Clone, Debug)]
pub struct CenteredStats {
    guidance_means: Vec<ImagePlane>,
    input_mean: ImagePlane,
    gram: GramTable,
}

impl CenteredStats {
    pub fn compute(guidance: &ChannelStack, input: &ImagePlane, window: WindowSpec) -> Result<Self> {
        let raw = compute_gram(guidance, input, window)?;
        let n = guidance.len();
        let count = raw.get(0, 0);
        // index i = 1..=n+1 in the raw table; the mean of the input is last
        let means: Vec<ImagePlane> = (1..=n + 1)
            .into_par_iter()
            .map(|i| raw.get(0, i).div(count))
            .collect::<Result<_>>()?;
        let centered = |i: usize, j: usize| -> ImagePlane {
            let g = raw.get(i, j).data();
            let m = means[i - 1].data();
            let s = raw.get(0, j).data();
            let data: Vec<f64> = if i == j {
                (0..g.len()).map(|k| (g[k] - m[k] * s[k]).max(0.0)).collect()
            } else {
                (0..g.len()).map(|k| g[k] - m[k] * s[k]).collect()
            };
            ImagePlane::from_vec_unchecked(count.width(), count.height(), data)
        };
        // the centered system has n channels; its index 0 is guidance channel 1
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..=j).map(move |i| (i, j))).collect();
        let guide: Vec<ImagePlane> = pairs.par_iter().map(|&(i, j)| centered(i + 1, j + 1)).collect();
        let column: Vec<ImagePlane> = (0..=n).into_par_iter().map(|i| centered(i + 1, n + 1)).collect();
        let mut guidance_means = means;
        let input_mean = guidance_means.pop().expect("input mean present");
        Ok(Self {
            guidance_means,
            input_mean,
            gram: GramTable::from_planes(n - 1, guide, Some(column))?,
        })
    }

    pub fn guidance_means(&self) -> &[ImagePlane] {
        &self.guidance_means
    }

    pub fn input_mean(&self) -> &ImagePlane {
        &self.input_mean
    }

    /// Centered Gram entry over guidance channels `1..=n` and the input at
    /// `n+1`, using the raw table's numbering.
    pub fn centered(&self, i: usize, j: usize) -> &ImagePlane {
        self.gram.get(i - 1, j - 1)
    }
}

/// Guided filter through box filters and the `α` recursion.
pub fn gf_filter(input: &ImagePlane, guidance: &ChannelStack, radius: usize, eps: f64) -> Result<ImagePlane> {
    gf_filter_profiled(input, guidance, radius, eps).map(|(z, _)| z)
}

pub fn gf_filter_profiled(
    input: &ImagePlane,
    guidance: &ChannelStack,
    radius: usize,
    eps: f64,
) -> Result<(ImagePlane, StageTimes)> {
    check_channels(guidance)?;
    guidance.check_plane(input)?;
    let window = WindowSpec::new(radius)?;
    let eps = regularizer(eps)?;
    let mut times = StageTimes::default();
    let start = Instant::now();

    let t = Instant::now();
    let stats = CenteredStats::compute(guidance, input, window)?;
    times.gram = t.elapsed();

    let t = Instant::now();
    let mut alpha = alpha_init(&stats.gram, eps)?;
    for kappa in 1..=stats.gram.n() {
        alpha = alpha_step(&alpha, &stats.gram, eps, kappa)?;
    }
    times.alpha = t.elapsed();

    let t = Instant::now();
    let slopes = compute_weights(&alpha, &stats.gram, eps)?;
    let weights = with_intercept(&stats, slopes.planes().to_vec())?;
    times.weights = t.elapsed();

    let t = Instant::now();
    let z = aggregate(&weights, guidance, window)?;
    times.aggregate = t.elapsed();

    times.total = start.elapsed();
    Ok((z, times))
}

fn with_intercept(stats: &CenteredStats, slopes: Vec<ImagePlane>) -> Result<WeightStack> {
    let (w, h) = stats.input_mean.dims();
    let mut offset = stats.input_mean.data().to_vec();
    for (a, m) in slopes.iter().zip(&stats.guidance_means) {
        for ((o, &a), &m) in offset.iter_mut().zip(a.data()).zip(m.data()) {
            *o -= a * m;
        }
    }
    let mut planes = Vec::with_capacity(slopes.len() + 1);
    planes.push(ImagePlane::from_vec_unchecked(w, h, offset));
    planes.extend(slopes);
    WeightStack::new(planes)
}

/// Guided filter by direct window sums and an explicit matrix inverse per
/// pixel. Slow on purpose; it serves as a reference and a timing baseline.
pub fn naive_gf_filter(input: &ImagePlane, guidance: &ChannelStack, radius: usize, eps: f64) -> Result<ImagePlane> {
    naive_gf_filter_profiled(input, guidance, radius, eps).map(|(z, _)| z)
}

pub fn naive_gf_filter_profiled(
    input: &ImagePlane,
    guidance: &ChannelStack,
    radius: usize,
    eps: f64,
) -> Result<(ImagePlane, StageTimes)> {
    check_channels(guidance)?;
    guidance.check_plane(input)?;
    let window = WindowSpec::new(radius)?;
    let eps = regularizer(eps)?;
    let n = guidance.len();
    let (w, h) = input.dims();
    let mut times = StageTimes::default();
    let start = Instant::now();

    // per pixel: n guidance means, the input mean, n(n+1)/2 centered
    // guidance products and n centered guidance-input products
    let t = Instant::now();
    let tri = n * (n + 1) / 2;
    let stat_len = n + 1 + tri + n;
    let mut stats = alloc_planes(stat_len, w, h);
    rows_of_many(&mut stats, w, h)
        .into_par_iter()
        .enumerate()
        .for_each(|(y, mut dst)| {
            let mut samples: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
            for x in 0..w {
                samples.iter_mut().for_each(Vec::clear);
                for q in window.pixels(PixelCoord::new(x, y), w, h) {
                    for (c, s) in samples.iter_mut().enumerate() {
                        s.push(if c < n { guidance.plane(c).at(q) } else { input.at(q) });
                    }
                }
                let len = samples[0].len() as f64;
                let means: Vec<f64> = samples.iter().map(|s| s.iter().sum::<f64>() / len).collect();
                let cross = |a: usize, b: usize| -> f64 {
                    samples[a]
                        .iter()
                        .zip(&samples[b])
                        .map(|(u, v)| (u - means[a]) * (v - means[b]))
                        .sum()
                };
                for (k, m) in means.iter().enumerate() {
                    dst[k][x] = *m;
                }
                let mut k = n + 1;
                for j in 0..n {
                    for i in 0..=j {
                        dst[k][x] = cross(i, j);
                        k += 1;
                    }
                }
                for i in 0..n {
                    dst[k + i][x] = cross(i, n);
                }
            }
        });
    times.gram = t.elapsed();

    let t = Instant::now();
    let mut inverses = alloc_planes(n * n, w, h);
    let failures: Vec<Result<()>> = rows_of_many(&mut inverses, w, h)
        .into_par_iter()
        .enumerate()
        .map(|(y, mut dst)| {
            let mut m = vec![0.0; n * n];
            for x in 0..w {
                let k = y * w + x;
                let mut t = n + 1;
                for j in 0..n {
                    for i in 0..=j {
                        m[i * n + j] = stats[t][k];
                        m[j * n + i] = stats[t][k];
                        t += 1;
                    }
                    m[j * n + j] += eps;
                }
                let inv = invert(&m, n)?;
                for (d, v) in dst.iter_mut().zip(inv) {
                    d[x] = v;
                }
            }
            Ok(())
        })
        .collect();
    failures.into_iter().collect::<Result<()>>()?;
    times.alpha = t.elapsed();

    let t = Instant::now();
    let mut coeffs = alloc_planes(n + 1, w, h);
    rows_of_many(&mut coeffs, w, h)
        .into_par_iter()
        .enumerate()
        .for_each(|(y, mut dst)| {
            for x in 0..w {
                let k = y * w + x;
                let mut offset = stats[n][k];
                for i in 0..n {
                    let a: f64 = (0..n).map(|j| inverses[i * n + j][k] * stats[n + 1 + tri + j][k]).sum();
                    dst[i + 1][x] = a;
                    offset -= a * stats[i][k];
                }
                dst[0][x] = offset;
            }
        });
    let weights = WeightStack::new(
        coeffs
            .into_iter()
            .map(|d| ImagePlane::from_vec_unchecked(w, h, d))
            .collect(),
    )?;
    times.weights = t.elapsed();

    let t = Instant::now();
    let z = naive_aggregate(&weights, guidance, window)?;
    times.aggregate = t.elapsed();

    times.total = start.elapsed();
    Ok((z, times))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxfilter::box_average;
    use crate::engine::hgf_filter;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImagePlane {
        ImagePlane::from_fn(w, h, |_, _| rng.gen())
    }

    fn random_stack(rng: &mut ChaCha8Rng, c: usize, w: usize, h: usize) -> ChannelStack {
        ChannelStack::new((0..c).map(|_| random_plane(rng, w, h)).collect()).unwrap()
    }

    fn double_mean(y: &ImagePlane, r: usize) -> ImagePlane {
        let win = WindowSpec::new(r).unwrap();
        box_average(&box_average(y, win), win)
    }

    #[test]
    fn constant_guidance_gives_double_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let y = random_plane(&mut rng, 16, 12);
        let z = gf_filter(&y, &ChannelStack::single(ImagePlane::filled(16, 12, 0.5)), 2, 0.01).unwrap();
        assert!(z.max_abs_diff(&double_mean(&y, 2)) <= 1e-12);
    }

    #[test]
    fn constant_guidance_value_is_irrelevant() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let y = random_plane(&mut rng, 13, 11);
        let run = |c: f64| {
            let g = ChannelStack::new(vec![ImagePlane::filled(13, 11, c); 3]).unwrap();
            gf_filter(&y, &g, 3, 0.05).unwrap()
        };
        assert!(run(0.5).bit_eq(&run(0.25)));
        assert!(run(0.3).max_abs_diff(&run(0.7)) <= 1e-12);
    }

    #[test]
    fn huge_eps_gives_double_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let y = random_plane(&mut rng, 15, 15);
        let g = random_stack(&mut rng, 3, 15, 15);
        let z = gf_filter(&y, &g, 2, 1e12).unwrap();
        assert!(z.max_abs_diff(&double_mean(&y, 2)) <= 1e-9);
    }

    #[test]
    fn self_guidance_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let (w, h, r, eps) = (14, 10, 2, 0.01);
        let y = random_plane(&mut rng, w, h);
        let z = gf_filter(&y, &ChannelStack::single(y.clone()), r, eps).unwrap();

        // per window: a = S / (S + ε), b = ȳ(1 - a), S the centered sum of squares
        let win = WindowSpec::new(r).unwrap();
        let mut a = vec![0.0; w * h];
        let mut b = vec![0.0; w * h];
        for py in 0..h {
            for px in 0..w {
                let vals: Vec<f64> = win.pixels(PixelCoord::new(px, py), w, h).map(|q| y.at(q)).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let s: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum();
                a[py * w + px] = s / (s + eps);
                b[py * w + px] = mean * (1.0 - s / (s + eps));
            }
        }
        let abar = box_average(&ImagePlane::new(w, h, a).unwrap(), win);
        let bbar = box_average(&ImagePlane::new(w, h, b).unwrap(), win);
        let expected = ImagePlane::from_fn(w, h, |x, yy| abar.get(x, yy) * y.get(x, yy) + bbar.get(x, yy));
        assert!(z.max_abs_diff(&expected) <= 1e-10);
        // small ε keeps the output close to the input
        assert!(gf_filter(&y, &ChannelStack::single(y.clone()), r, 1e-6).unwrap().max_abs_diff(&y) <= 1e-3);
    }

    #[test]
    fn fast_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for (c, r, eps) in [(1, 2, 0.05), (3, 3, 0.05), (3, 1, 1.0), (1, 4, 0.001)] {
            let g = random_stack(&mut rng, c, 23, 19);
            let y = random_plane(&mut rng, 23, 19);
            let fast = gf_filter(&y, &g, r, eps).unwrap();
            let slow = naive_gf_filter(&y, &g, r, eps).unwrap();
            let err = fast.max_abs_diff(&slow);
            assert!(err <= 1e-8, "c={c} r={r} eps={eps}: {err}");
        }
    }

    #[test]
    fn single_pixel_keeps_its_value() {
        // the offset is not regularized, so a one-sample window reproduces it
        let y = ImagePlane::filled(1, 1, 0.625);
        let g = ChannelStack::single(ImagePlane::filled(1, 1, 0.3));
        assert_eq!(gf_filter(&y, &g, 1, 0.05).unwrap().get(0, 0), 0.625);
        assert_eq!(naive_gf_filter(&y, &g, 1, 0.05).unwrap().get(0, 0), 0.625);
    }

    #[test]
    fn differs_from_offset_penalizing_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let g = ChannelStack::single(random_plane(&mut rng, 20, 20));
        let y = ImagePlane::from_fn(20, 20, |x, _| 0.5 + 0.02 * x as f64);
        let gf = gf_filter(&y, &g, 3, 0.05).unwrap();
        let hgf = hgf_filter(&y, &g, &FilterParams::new(0.05, 3, 1).unwrap()).unwrap();
        assert!(gf.max_abs_diff(&hgf) > 1e-4);
    }

    #[test]
    fn rejects_other_channel_counts() {
        let g = ChannelStack::new(vec![ImagePlane::ones(4, 4); 2]).unwrap();
        let y = ImagePlane::ones(4, 4);
        assert!(gf_filter(&y, &g, 1, 0.1).is_err());
        assert!(naive_gf_filter(&y, &g, 1, 0.1).is_err());
    }

    #[test]
    fn centered_gram_of_constant_channel_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let y = random_plane(&mut rng, 9, 9);
        let g = ChannelStack::single(ImagePlane::filled(9, 9, 0.75));
        let stats = CenteredStats::compute(&g, &y, WindowSpec::new(2).unwrap()).unwrap();
        assert!(stats.centered(1, 1).data().iter().all(|&v| v == 0.0));
        assert!(stats.centered(1, 2).data().iter().all(|v| v.abs() <= 1e-12));
    }
}
