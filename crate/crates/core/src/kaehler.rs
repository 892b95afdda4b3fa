//! Complex curvature of Kähler models with constant holomorphic sectional
//! curvature.
//!
//! Complex tensors are fully lowered, `K_ijkl` paired with
//! `z^i conj(z^j) z^k conj(z^l)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Rank4;

#[derive(Clone, Debug, PartialEq)]
pub struct HermitianForm {
    matrix: DMatrix<Complex64>,
}

impl HermitianForm {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.ncols() });
        }
        let scale = matrix.iter().fold(0.0_f64, |s, z| s.max(z.norm())).max(1.0);
        for i in 0..n {
            for j in 0..n {
                if (matrix[(i, j)] - matrix[(j, i)].conj()).norm() > 1e-12 * scale {
                    return Err(Error::InvalidArgument(format!(
                        "hermitian form is not conjugate-symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let eig = nalgebra::SymmetricEigen::new(matrix.clone());
        if eig.eigenvalues.iter().any(|&l| !(l > 1e-12 * scale)) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(HermitianForm { matrix })
    }

    pub fn identity(n: usize) -> Self {
        HermitianForm { matrix: DMatrix::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// `h_ij z^i conj(w^j)`
    pub fn inner(&self, z: &[Complex64], w: &[Complex64]) -> Complex64 {
        let n = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.matrix[(i, j)] * z[i] * w[j].conj();
            }
        }
        acc
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexCurvature {
    n: usize,
    data: Vec<Complex64>,
    /// Holomorphic sectional curvature when built from it.
    pub holomorphic: Option<f64>,
}

impl ComplexCurvature {
    pub fn zeros(n: usize) -> Self {
        ComplexCurvature { n, data: vec![Complex64::new(0.0, 0.0); n.pow(4)], holomorphic: None }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn offset(&self, (i, j, k, l): (usize, usize, usize, usize)) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |s, z| s.max(z.norm()))
    }

    pub fn max_abs_diff(&self, other: &ComplexCurvature) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |s, (a, b)| s.max((a - b).norm()))
    }

    /// `max |K_ijkl - conj(K_jilk)|`
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        worst = worst.max((self[(i, j, k, l)] - self[(j, i, l, k)].conj()).norm());
                    }
                }
            }
        }
        worst
    }
}

impl std::ops::Index<(usize, usize, usize, usize)> for ComplexCurvature {
    type Output = Complex64;
    fn index(&self, idx: (usize, usize, usize, usize)) -> &Complex64 {
        &self.data[self.offset(idx)]
    }
}

impl std::ops::IndexMut<(usize, usize, usize, usize)> for ComplexCurvature {
    fn index_mut(&mut self, idx: (usize, usize, usize, usize)) -> &mut Complex64 {
        let o = self.offset(idx);
        &mut self.data[o]
    }
}

/// `K_ijkl = (c/2)(h_ij h_kl + h_il h_kj)`
pub fn constant_holomorphic_curvature(h: &HermitianForm, c: f64) -> ComplexCurvature {
    let n = h.dim();
    let hm = h.matrix();
    let mut k = ComplexCurvature::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for kk in 0..n {
                for l in 0..n {
                    k[(i, j, kk, l)] =
                        (hm[(i, j)] * hm[(kk, l)] + hm[(i, l)] * hm[(kk, j)]) * (c / 2.0);
                }
            }
        }
    }
    k.holomorphic = Some(c);
    k
}

fn require_normalized(h: &HermitianForm, z: &[Complex64]) -> Result<()> {
    if z.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: z.len() });
    }
    let norm = h.inner(z, z).re;
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Normalization { norm });
    }
    Ok(())
}

/// Checks `K_ijkl conj(z^j) z^k conj(z^l) = sigma h_ij conj(z^j)` for a unit
/// `z`, returning `sigma` and the Euclidean norm of the defect.
pub fn complex_meig_check(k: &ComplexCurvature, h: &HermitianForm, z: &[Complex64]) -> Result<(Complex64, f64)> {
    require_normalized(h, z)?;
    if k.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: k.dim() });
    }
    let n = h.dim();
    let zero = Complex64::new(0.0, 0.0);
    let mut w = vec![zero; n];
    for (i, wi) in w.iter_mut().enumerate() {
        for j in 0..n {
            for kk in 0..n {
                for l in 0..n {
                    *wi += k[(i, j, kk, l)] * z[j].conj() * z[kk] * z[l].conj();
                }
            }
        }
    }
    let lowered: Vec<Complex64> = (0..n)
        .map(|i| (0..n).map(|j| h.matrix()[(i, j)] * z[j].conj()).sum())
        .collect();
    let denom: f64 = lowered.iter().map(|v| v.norm_sqr()).sum();
    let sigma: Complex64 = w.iter().zip(&lowered).map(|(a, b)| a * b.conj()).sum::<Complex64>() / denom;
    let residual = w
        .iter()
        .zip(&lowered)
        .map(|(a, b)| (a - sigma * b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok((sigma, residual))
}

/// `K(z, z, z, z) / h(z, z)^2`
pub fn holomorphic_sectional_value(k: &ComplexCurvature, h: &HermitianForm, z: &[Complex64]) -> Result<f64> {
    if z.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: z.len() });
    }
    let n = h.dim();
    let mut num = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            for kk in 0..n {
                for l in 0..n {
                    num += k[(i, j, kk, l)] * z[i] * z[j].conj() * z[kk] * z[l].conj();
                }
            }
        }
    }
    let d = h.inner(z, z).re;
    if d <= 0.0 {
        return Err(Error::Normalization { norm: d });
    }
    Ok(num.re / (d * d))
}

/// Complex structure on `R^{2n}` ordered `(e_1..e_n, Je_1..Je_n)`.
pub fn standard_j(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(n + i, i)] = 1.0;
        j[(i, n + i)] = -1.0;
    }
    j
}

/// `max |R(JX, JY, Z, W) - R(X, Y, Z, W)|` over basis vectors.
pub fn kaehler_defect(r: &Rank4) -> f64 {
    let n = r.dim() / 2;
    let j = standard_j(n);
    let rotated = r.transform_slot(0, &j).transform_slot(1, &j);
    rotated.max_abs_diff(r)
}

/// Assembles `K_ijkl` from a real Kähler curvature tensor given on the basis
/// `(e_1..e_n, Je_1..Je_n)`.
///
/// With the sign convention used for real tensors here (positive sectional
/// curvature on spheres) the assembled tensor is the negative of
/// `(R_ijkl - R_i j' k l') + i (R_i j' k l + R_i j k l')`, where `j' = Je_j`.
pub fn complex_from_real(r: &Rank4) -> Result<ComplexCurvature> {
    if !r.dim().is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "real tensor dimension {} is not even",
            r.dim()
        )));
    }
    let violation = kaehler_defect(r);
    if violation > 1e-9 * r.max_abs().max(1.0) {
        return Err(Error::NotKaehler { violation });
    }
    let n = r.dim() / 2;
    let mut k = ComplexCurvature::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for kk in 0..n {
                for l in 0..n {
                    let re = r[(i, j, kk, l)] - r[(i, n + j, kk, n + l)];
                    let im = r[(i, n + j, kk, l)] + r[(i, j, kk, n + l)];
                    k[(i, j, kk, l)] = -Complex64::new(re, im);
                }
            }
        }
    }
    Ok(k)
}

/// Random Hermitian positive definite `B B^* + I`.
pub fn random_hermitian_form(n: usize, rng: &mut impl Rng) -> HermitianForm {
    let b = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    HermitianForm { matrix: &b * b.adjoint() + DMatrix::identity(n, n) }
}

/// Random `z` with `h(z, z) = 1`.
pub fn random_unit_vector(h: &HermitianForm, rng: &mut impl Rng) -> Vec<Complex64> {
    loop {
        let z: Vec<Complex64> = (0..h.dim())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let s = h.inner(&z, &z).re;
        if s > 1e-6 {
            return z.iter().map(|v| v / s.sqrt()).collect();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KaehlerSample {
    /// `[re, im]`
    pub sigma: [f64; 2],
    pub residual: f64,
    pub holomorphic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KaehlerSampleReport {
    pub n: usize,
    pub c: f64,
    pub seed: u64,
    pub random_form: bool,
    pub samples: Vec<KaehlerSample>,
    pub max_residual: f64,
    pub max_sigma_error: f64,
    pub max_holomorphic_error: f64,
}

/// Checks the eigen-identity and the holomorphic sectional value on
/// `samples` random unit vectors of the constant-`c` model.
pub fn sample_check(n: usize, c: f64, samples: usize, seed: u64, random_form: bool) -> Result<KaehlerSampleReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("complex dimension must be positive".into()));
    }
    if !c.is_finite() {
        return Err(Error::InvalidArgument("holomorphic curvature must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = if random_form { random_hermitian_form(n, &mut rng) } else { HermitianForm::identity(n) };
    let k = constant_holomorphic_curvature(&h, c);
    let mut out = Vec::with_capacity(samples);
    let (mut max_residual, mut max_sigma_error, mut max_holomorphic_error) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..samples {
        let z = random_unit_vector(&h, &mut rng);
        let (sigma, residual) = complex_meig_check(&k, &h, &z)?;
        let holomorphic = holomorphic_sectional_value(&k, &h, &z)?;
        max_residual = max_residual.max(residual);
        max_sigma_error = max_sigma_error.max((sigma - Complex64::new(c, 0.0)).norm());
        max_holomorphic_error = max_holomorphic_error.max((holomorphic - c).abs());
        out.push(KaehlerSample { sigma: [sigma.re, sigma.im], residual, holomorphic });
    }
    Ok(KaehlerSampleReport {
        n,
        c,
        seed,
        random_form,
        samples: out,
        max_residual,
        max_sigma_error,
        max_holomorphic_error,
    })
}
