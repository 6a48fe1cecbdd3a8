use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{alloc_planes, rows_of_many, ImagePlane, PixelCoord};

use super::gram::GramTable;
use super::params::validate_lambda;

/// Smallest admissible `|1 + c_κᵀ B c_κ|` before a stage is declared
/// degenerate.
const MIN_DENOMINATOR: f64 = 1e-12;

/// Inverse coefficients `α_ij` after some number of rank-one updates.
///
/// At stage `κ` the table holds `(κ+1)²` planes and represents
/// `(λE + Σ_{i≤κ} c_i c_iᵀ)⁻¹ = λ⁻¹E + Σ_{i,j≤κ} α_ij c_i c_jᵀ` at every
/// pixel. Both triangles are stored and updated independently, so
/// [`AlphaTable::max_asymmetry`] is a real check on the recursion.
#[derive(Clone, Debug)]
pub struct AlphaTable {
    n: usize,
    stage: usize,
    planes: Vec<ImagePlane>,
}

impl AlphaTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn is_complete(&self) -> bool {
        self.stage == self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &ImagePlane {
        assert!(i <= self.stage && j <= self.stage, "alpha index beyond current stage");
        &self.planes[i * (self.stage + 1) + j]
    }

    /// `max |α_ij - α_ji|` over all pixels and index pairs.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..=self.stage {
            for j in i + 1..=self.stage {
                worst = worst.max(self.get(i, j).max_abs_diff(self.get(j, i)));
            }
        }
        worst
    }
}

/// Stage 0: `α_00 = -λ⁻¹ / (λ + G_00)`, so that
/// `λ⁻¹E + α_00 c_0 c_0ᵀ = (λE + c_0 c_0ᵀ)⁻¹`.
pub fn alpha_init(gram: &GramTable, lambda: f64) -> Result<AlphaTable> {
    let lambda = validate_lambda(lambda)?;
    let inv = 1.0 / lambda;
    let g00 = gram.get(0, 0);
    let (w, h) = g00.dims();
    let data: Vec<f64> = g00.data().par_iter().map(|&g| -inv / (lambda + g)).collect();
    if let Some(k) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Degenerate {
            at: PixelCoord::new(k % w, k / w),
            stage: 0,
        });
    }
    Ok(AlphaTable {
        n: gram.n(),
        stage: 0,
        planes: vec![ImagePlane::from_vec_unchecked(w, h, data)],
    })
}

/// One Sherman-Morrison update folding channel `kappa` into the inverse.
///
/// With `u_i = Σ_m α_im G_mκ`, `v_j = Σ_m α_mj G_κm` and
/// `γ = -(1 + λ⁻¹G_κκ + Σ_j v_j G_jκ)⁻¹` the new coefficients are
/// `α_ij + γ u_i v_j` for `i, j < κ`, `λ⁻¹γ u_i` in the new column,
/// `λ⁻¹γ v_j` in the new row and `λ⁻²γ` on the new diagonal. The result is
/// written to fresh planes; `alpha` is left untouched.
pub fn alpha_step(alpha: &AlphaTable, gram: &GramTable, lambda: f64, kappa: usize) -> Result<AlphaTable> {
    let lambda = validate_lambda(lambda)?;
    if kappa < 1 || kappa > gram.n() {
        return Err(Error::InvalidParameter(format!(
            "stage {kappa} outside 1..={}",
            gram.n()
        )));
    }
    if alpha.stage + 1 != kappa || alpha.n != gram.n() {
        return Err(Error::InvalidParameter(format!(
            "alpha table at stage {} cannot advance to stage {kappa}",
            alpha.stage
        )));
    }
    let inv = 1.0 / lambda;
    let (w, h) = gram.dims();
    let k = kappa;
    let out_side = k + 1;

    let prev: Vec<&[f64]> = alpha.planes.iter().map(|p| p.data()).collect();
    let col: Vec<&[f64]> = (0..=k).map(|m| gram.get(m, k).data()).collect();

    let mut out = alloc_planes(out_side * out_side, w, h);
    let rows = rows_of_many(&mut out, w, h);
    let failures: Vec<Option<usize>> = rows
        .into_par_iter()
        .enumerate()
        .map(|(y, mut dst)| {
            let base = y * w;
            let seg = base..base + w;
            let mut u = vec![vec![0.0; w]; k];
            let mut v = vec![vec![0.0; w]; k];
            for i in 0..k {
                for m in 0..k {
                    let a = &prev[i * k + m][seg.clone()];
                    let g = &col[m][seg.clone()];
                    for x in 0..w {
                        u[i][x] += a[x] * g[x];
                    }
                }
            }
            for j in 0..k {
                for m in 0..k {
                    let a = &prev[m * k + j][seg.clone()];
                    let g = &col[m][seg.clone()];
                    for x in 0..w {
                        v[j][x] += a[x] * g[x];
                    }
                }
            }
            let gkk = &col[k][seg.clone()];
            let mut gamma = vec![0.0; w];
            let mut failed = None;
            for x in 0..w {
                let mut quad = 0.0;
                for j in 0..k {
                    quad += v[j][x] * col[j][base + x];
                }
                let den = 1.0 + inv * gkk[x] + quad;
                if !(den.abs() >= MIN_DENOMINATOR) && failed.is_none() {
                    failed = Some(x);
                }
                gamma[x] = -1.0 / den;
            }
            if failed.is_some() {
                return failed;
            }
            for i in 0..k {
                for j in 0..k {
                    let a = &prev[i * k + j][seg.clone()];
                    let row = &mut dst[i * out_side + j];
                    for x in 0..w {
                        row[x] = a[x] + gamma[x] * u[i][x] * v[j][x];
                    }
                }
            }
            for i in 0..k {
                let row = &mut dst[i * out_side + k];
                for x in 0..w {
                    row[x] = inv * gamma[x] * u[i][x];
                }
            }
            for j in 0..k {
                let row = &mut dst[k * out_side + j];
                for x in 0..w {
                    row[x] = inv * gamma[x] * v[j][x];
                }
            }
            let inv2 = inv * inv;
            let row = &mut dst[k * out_side + k];
            for x in 0..w {
                row[x] = inv2 * gamma[x];
            }
            None
        })
        .collect();

    if let Some((y, x)) = failures
        .iter()
        .enumerate()
        .find_map(|(y, f)| f.map(|x| (y, x)))
    {
        return Err(Error::Degenerate {
            at: PixelCoord::new(x, y),
            stage: kappa,
        });
    }
    let planes: Vec<ImagePlane> = out
        .into_iter()
        .map(|d| ImagePlane::from_vec_unchecked(w, h, d))
        .collect();
    if planes.iter().any(|p| p.data().iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("alpha update"));
    }
    Ok(AlphaTable {
        n: alpha.n,
        stage: kappa,
        planes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{invert, matmul};

    /// Gram table of a single "pixel" whose window vectors are `cols`
    /// (`cols[0]` plays the ones channel).
    fn scalar_gram(cols: &[Vec<f64>]) -> GramTable {
        let n = cols.len() - 1;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut guide = Vec::new();
        for j in 0..=n {
            for i in 0..=j {
                guide.push(ImagePlane::filled(1, 1, dot(&cols[i], &cols[j])));
            }
        }
        GramTable::from_planes(n, guide, None).unwrap()
    }

    fn run(gram: &GramTable, lambda: f64) -> AlphaTable {
        let mut a = alpha_init(gram, lambda).unwrap();
        for k in 1..=gram.n() {
            a = alpha_step(&a, gram, lambda, k).unwrap();
        }
        a
    }

    /// `λ⁻¹E + Σ α_ij c_i c_jᵀ` as a dense matrix.
    fn represented(alpha: &AlphaTable, cols: &[Vec<f64>], lambda: f64) -> Vec<f64> {
        let len = cols[0].len();
        let mut m = vec![0.0; len * len];
        for r in 0..len {
            m[r * len + r] = 1.0 / lambda;
        }
        for i in 0..=alpha.stage() {
            for j in 0..=alpha.stage() {
                let a = alpha.get(i, j).get(0, 0);
                for r in 0..len {
                    for c in 0..len {
                        m[r * len + c] += a * cols[i][r] * cols[j][c];
                    }
                }
            }
        }
        m
    }

    fn regularized(cols: &[Vec<f64>], lambda: f64) -> Vec<f64> {
        let len = cols[0].len();
        let mut m = vec![0.0; len * len];
        for r in 0..len {
            m[r * len + r] = lambda;
        }
        for c in cols {
            for r in 0..len {
                for s in 0..len {
                    m[r * len + s] += c[r] * c[s];
                }
            }
        }
        m
    }

    #[test]
    fn init_matches_direct_inverse() {
        // c_0 = (1,1,1): G_00 = 3
        for (lambda, expected) in [(1.0, -0.25), (2.0, -0.1)] {
            let cols = vec![vec![1.0; 3]];
            let a = alpha_init(&scalar_gram(&cols), lambda).unwrap();
            let got = a.get(0, 0).get(0, 0);
            assert!((got - expected).abs() < 1e-15, "lambda={lambda}: {got}");
            let dense = invert(&regularized(&cols, lambda), 3).unwrap();
            let rep = represented(&a, &cols, lambda);
            for (x, y) in dense.iter().zip(&rep) {
                assert!((x - y).abs() < 1e-14);
            }
        }
        // the unscaled form -(λ + G_00)⁻¹ is off by λ⁻¹ and is not an inverse
        let printed = -1.0 / (2.0 + 3.0);
        assert!((printed - (-0.1f64)).abs() > 0.05);
    }

    #[test]
    fn huge_lambda_vanishes() {
        let a = alpha_init(&scalar_gram(&[vec![1.0; 4]]), 1e12).unwrap();
        assert!(a.get(0, 0).get(0, 0).abs() < 1e-23);
    }

    #[test]
    fn zero_channel_leaves_inverse_unchanged() {
        let cols = vec![vec![1.0, 1.0, 1.0], vec![0.0, 0.0, 0.0]];
        let gram = scalar_gram(&cols);
        let a0 = alpha_init(&gram, 0.5).unwrap();
        let a1 = alpha_step(&a0, &gram, 0.5, 1).unwrap();
        assert_eq!(a1.get(0, 0).get(0, 0), a0.get(0, 0).get(0, 0));
        assert_eq!(a1.get(0, 1).get(0, 0), 0.0);
        assert_eq!(a1.get(1, 1).get(0, 0), -1.0 / (0.5 * 0.5));
        let before = represented(&a0, &cols[..1], 0.5);
        let after = represented(&a1, &cols, 0.5);
        assert_eq!(before, after);
    }

    #[test]
    fn orthogonal_channels_block_diagonal() {
        let lambda = 0.3;
        let cols = vec![vec![1.0, 1.0, 1.0, 1.0], vec![1.0, -1.0, 2.0, -2.0]];
        let gram = scalar_gram(&cols);
        let a = run(&gram, lambda);
        assert_eq!(a.get(0, 1).get(0, 0), 0.0);
        assert_eq!(a.get(1, 0).get(0, 0), 0.0);
        let g11 = 10.0;
        let expected = -(1.0 / lambda) / (lambda + g11);
        assert!((a.get(1, 1).get(0, 0) - expected).abs() < 1e-14);
    }

    #[test]
    fn dense_inverse_identity_nine_samples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let lambda = 0.05;
        let mut cols = vec![vec![1.0; 9]];
        for _ in 0..2 {
            cols.push((0..9).map(|_| rng.gen::<f64>()).collect());
        }
        let a = run(&scalar_gram(&cols), lambda);
        let prod = matmul(&regularized(&cols, lambda), &represented(&a, &cols, lambda), 9);
        let mut res = 0.0;
        for r in 0..9 {
            for c in 0..9 {
                let e = if r == c { 1.0 } else { 0.0 };
                res += (prod[r * 9 + c] - e).powi(2);
            }
        }
        assert!(res.sqrt() <= 1e-8, "residual {}", res.sqrt());
        assert!(a.max_asymmetry() <= 1e-9);
    }

    #[test]
    fn stage_order_enforced() {
        let cols = vec![vec![1.0; 2], vec![0.5, 0.2], vec![0.1, 0.9]];
        let gram = scalar_gram(&cols);
        let a0 = alpha_init(&gram, 1.0).unwrap();
        assert!(alpha_step(&a0, &gram, 1.0, 2).is_err());
        assert!(alpha_step(&a0, &gram, 1.0, 0).is_err());
        assert!(alpha_step(&a0, &gram, 1.0, 3).is_err());
        assert!(alpha_init(&gram, 0.0).is_err());
    }

    #[test]
    fn degenerate_denominator_reported() {
        // G_11 = -λ drives 1 + λ⁻¹G_11 + quad to zero when the first channel is empty
        let lambda = 1.0;
        let guide = vec![
            ImagePlane::filled(2, 1, 0.0),
            ImagePlane::filled(2, 1, 0.0),
            ImagePlane::new(2, 1, vec![0.5, -1.0]).unwrap(),
        ];
        let gram = GramTable::from_planes(1, guide, None).unwrap();
        let a0 = alpha_init(&gram, lambda).unwrap();
        match alpha_step(&a0, &gram, lambda, 1) {
            Err(Error::Degenerate { at, stage }) => {
                assert_eq!(at, PixelCoord::new(1, 0));
                assert_eq!(stage, 1);
            }
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }
}
