//! M-eigenvalues of the curvature tensor.
//!
//! A triple `(zeta, x, y)` with unit `x`, `y` is an M-eigentriple of a frame
//! tensor `T` when
//!
//! ```text
//! sum_jkl T_ijkl y^j x^k y^l = zeta x_i
//! sum_ijk T_ijkl x^i y^j x^k = zeta y_l
//! ```
//!
//! i.e. `(x, y)` is a stationary point of the biquadratic form
//! `f(x, y) = T_ijkl x^i y^j x^k y^l` on the product of unit spheres.
//!
//! Everything here works on frame components, where the metric constraints
//! `g_ab x^a x^b = 1` become plain unit-sphere constraints.
//!
//! # Sign of the scalar term in the closed form
//!
//! For a conformally flat tensor with Ricci eigenpairs `(lambda_i, x_i)` the
//! pair `(x_i, x_j)` is an M-eigenpair with
//!
//! ```text
//! zeta_ij = ((m-1)(lambda_i + lambda_j) - R) / ((m-1)(m-2))
//! ```
//!
//! The scalar enters with a minus sign. The variant with `+R` found in the
//! literature does not satisfy the eigen-equations; on the unit 4-sphere it
//! yields 5 where direct contraction gives 1. [`closed_form_zeta`] can
//! evaluate both so the difference stays testable.

mod oracle;
mod reconstruct;
mod solver;

pub use oracle::brute_oracle;
pub use reconstruct::{
    curvature_basis, curvature_space_dim, random_curvature_tensor, reconstruct_from_biquadratic,
    reconstruction_round_trip, RoundTripReport,
};
pub use solver::{solve_meigen, SolverOutcome};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::curvature::{PointGeometry, RicciData};
use crate::decomposition::{
    is_conformally_flat, ricci_decompose, ConformalVerdict, DEFAULT_CONFORMAL_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::metric::{Frame, MetricField, Signature};
use crate::tensor::Rank4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Iterative,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CausalCharacter {
    Timelike,
    Null,
    Spacelike,
}

impl CausalCharacter {
    /// Character of a frame vector under `diag(signs)`.
    pub fn of(v: &[f64], signs: &[f64]) -> Self {
        let n = frame_norm(v, signs);
        if n > 1e-9 {
            CausalCharacter::Spacelike
        } else if n < -1e-9 {
            CausalCharacter::Timelike
        } else {
            CausalCharacter::Null
        }
    }
}

/// `<v, v>` under the frame metric `diag(signs)`.
pub fn frame_norm(v: &[f64], signs: &[f64]) -> f64 {
    v.iter().zip(signs).map(|(x, s)| s * x * x).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MEigentriple {
    pub zeta: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub residuals: [f64; 2],
    pub causal_x: CausalCharacter,
    pub causal_y: CausalCharacter,
    pub provenance: Provenance,
}

impl MEigentriple {
    pub fn new(
        t: &Rank4,
        signs: &[f64],
        zeta: f64,
        x: Vec<f64>,
        y: Vec<f64>,
        provenance: Provenance,
    ) -> Self {
        let residuals = meig_residual(t, zeta, &x, &y);
        MEigentriple {
            causal_x: CausalCharacter::of(&x, signs),
            causal_y: CausalCharacter::of(&y, signs),
            zeta,
            x,
            y,
            residuals,
            provenance,
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals[0].max(self.residuals[1])
    }

    /// Euclidean inner product of the two vectors.
    pub fn overlap(&self) -> f64 {
        dot(&self.x, &self.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub starts: usize,
    pub seed: u64,
    pub dedup_tolerance: f64,
    /// When set, half-steps use the shifted power update
    /// `x <- normalize((M(y) + shift I) x)` instead of exact eigenvectors.
    pub shift: Option<f64>,
    /// Keep distinct vector pairs sharing an eigenvalue instead of one
    /// representative per eigenvalue.
    pub distinct_vectors: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-10,
            max_iterations: 500,
            starts: 64,
            seed: 0,
            dedup_tolerance: 1e-6,
            shift: None,
            distinct_vectors: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("solver {what} must be positive")));
        if !(self.tolerance > 0.0) {
            return bad("tolerance");
        }
        if self.max_iterations == 0 {
            return bad("iteration limit");
        }
        if self.starts == 0 {
            return bad("start count");
        }
        if !(self.dedup_tolerance > 0.0) {
            return bad("deduplication tolerance");
        }
        if let Some(s) = self.shift {
            if !(s > 0.0) {
                return bad("shift");
            }
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn normalized(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    a.iter().map(|v| v / n).collect()
}

/// Frame components `T_abcd = R_pqrs E^p_a E^q_b E^r_c E^s_d`.
pub fn to_frame(lowered: &Rank4, frame: &Frame) -> Rank4 {
    let mut t = lowered.clone();
    for slot in 0..4 {
        t = t.transform_slot(slot, &frame.matrix);
    }
    t
}

/// Lowered Riemann tensor at `p` in the metric's orthonormal frame.
pub fn frame_tensor_at(metric: &MetricField, p: &[f64]) -> Result<(Rank4, Frame)> {
    let geo = PointGeometry::compute(metric, p)?;
    let frame = Frame::from_metric(&geo.metric, metric.signature())?;
    Ok((to_frame(&geo.lowered.components, &frame), frame))
}

/// `M(y)_ik = T_ijkl y^j y^l`, symmetric for curvature-type `T`.
pub fn contract_y(t: &Rank4, y: &[f64]) -> DMatrix<f64> {
    let m = t.dim();
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        for k in 0..m {
            let mut acc = 0.0;
            for j in 0..m {
                for l in 0..m {
                    acc += t[(i, j, k, l)] * y[j] * y[l];
                }
            }
            out[(i, k)] = acc;
        }
    }
    out
}

/// `N(x)_jl = T_ijkl x^i x^k`.
pub fn contract_x(t: &Rank4, x: &[f64]) -> DMatrix<f64> {
    let m = t.dim();
    let mut out = DMatrix::zeros(m, m);
    for j in 0..m {
        for l in 0..m {
            let mut acc = 0.0;
            for i in 0..m {
                for k in 0..m {
                    acc += t[(i, j, k, l)] * x[i] * x[k];
                }
            }
            out[(j, l)] = acc;
        }
    }
    out
}

/// `f(x, y) = T_ijkl x^i y^j x^k y^l`.
pub fn biquadratic(t: &Rank4, x: &[f64], y: &[f64]) -> f64 {
    t.contract4(x, y, x, y)
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(v)).iter().copied().collect()
}

/// Euclidean norms of the two eigen-equation defects.
pub fn meig_residual(t: &Rank4, zeta: f64, x: &[f64], y: &[f64]) -> [f64; 2] {
    let mx = mat_vec(&contract_y(t, y), x);
    let ny = mat_vec(&contract_x(t, x), y);
    let r1 = mx.iter().zip(x).map(|(a, b)| (a - zeta * b).powi(2)).sum::<f64>().sqrt();
    let r2 = ny.iter().zip(y).map(|(a, b)| (a - zeta * b).powi(2)).sum::<f64>().sqrt();
    [r1, r2]
}

/// Restriction of a frame tensor to a subset of frame directions.
pub fn restrict(t: &Rank4, keep: &[usize]) -> Rank4 {
    Rank4::from_fn(keep.len(), |a, b, c, d| t[(keep[a], keep[b], keep[c], keep[d])])
}

/// Frame Ricci tensor `Ric_bd = sum_a signs[a] T_abad`.
pub fn frame_ricci(t: &Rank4, signs: &[f64]) -> RicciData {
    let m = t.dim();
    let eta = DMatrix::from_diagonal(&DVector::from_column_slice(signs));
    let lowered = DMatrix::from_fn(m, m, |b, d| (0..m).map(|a| signs[a] * t[(a, b, a, d)]).sum());
    let mixed = &eta * &lowered;
    RicciData {
        scalar: mixed.trace(),
        lowered,
        mixed,
    }
}

/// Eigenpairs of the mixed Ricci tensor `R^a_b`.
#[derive(Clone, Debug)]
pub struct RicciEigenpairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// Coordinate components, normalized so `|g(x, x)| = 1`.
    pub vectors: Vec<Vec<f64>>,
    /// The same vectors in `frame`.
    pub frame_vectors: Vec<Vec<f64>>,
    pub frame: Frame,
    /// max_i |R^a_b x_i^b - lambda_i x_i^a|
    pub eigen_residual: f64,
    /// max_{i != j} |g(x_i, x_j)|
    pub orthogonality_residual: f64,
}

impl RicciEigenpairs {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

fn sign_fixed(mut v: Vec<f64>) -> Vec<f64> {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    v
}

/// Solves `R_ab x^b = lambda g_ab x^b`.
pub fn ricci_eigenpairs(
    ricci: &RicciData,
    g: &DMatrix<f64>,
    signature: Signature,
) -> Result<RicciEigenpairs> {
    let frame = Frame::from_metric(g, signature)?;
    let m = g.nrows();
    let e = &frame.matrix;
    let a = e.transpose() * &ricci.lowered * e;
    let a = (&a + a.transpose()) * 0.5;
    let signs = frame.signs.clone();

    let mut pairs: Vec<(f64, Vec<f64>)> = match signature {
        Signature::Riemannian => {
            let eig = SymmetricEigen::new(a);
            (0..m)
                .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().copied().collect()))
                .collect()
        }
        Signature::Lorentzian => lorentzian_pairs(&a, &signs)?,
    };
    // ascending, ties by dominant component
    pairs.sort_by(|(l1, v1), (l2, v2)| {
        l1.partial_cmp(l2).unwrap().then_with(|| dominant(v1).cmp(&dominant(v2)))
    });

    let mut values = Vec::with_capacity(m);
    let mut vectors = Vec::with_capacity(m);
    let mut frame_vectors = Vec::with_capacity(m);
    for (lambda, z) in pairs {
        let x = sign_fixed(mat_vec(e, &z));
        let sign = if dot(&mat_vec(e, &z), &x) < 0.0 { -1.0 } else { 1.0 };
        values.push(lambda);
        frame_vectors.push(z.iter().map(|v| v * sign).collect());
        vectors.push(x);
    }

    let mut eigen_residual: f64 = 0.0;
    for (lambda, x) in values.iter().zip(&vectors) {
        let rx = mat_vec(&ricci.mixed, x);
        for (a, b) in rx.iter().zip(x) {
            eigen_residual = eigen_residual.max((a - lambda * b).abs());
        }
    }
    let mut orthogonality_residual: f64 = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            let gij = dot(&vectors[i], &mat_vec(g, &vectors[j]));
            orthogonality_residual = orthogonality_residual.max(gij.abs());
        }
    }
    Ok(RicciEigenpairs {
        values,
        vectors,
        frame_vectors,
        frame,
        eigen_residual,
        orthogonality_residual,
    })
}

fn dominant(v: &[f64]) -> usize {
    (0..v.len())
        .max_by(|&i, &j| v[i].abs().partial_cmp(&v[j].abs()).unwrap().then(j.cmp(&i)))
        .unwrap_or(0)
}

/// Eigenpairs of `eta A` (the mixed frame Ricci) for Lorentzian `eta`.
fn lorentzian_pairs(a: &DMatrix<f64>, signs: &[f64]) -> Result<Vec<(f64, Vec<f64>)>> {
    let m = a.nrows();
    let eta = DMatrix::from_diagonal(&DVector::from_column_slice(signs));
    let mixed = &eta * a;
    let scale = crate::tensor::matrix_max_abs(&mixed).max(1e-300);
    let eigenvalues = mixed.complex_eigenvalues();
    if let Some(z) = eigenvalues.iter().find(|z| z.im.abs() > 1e-9 * scale) {
        return Err(Error::RicciNotDiagonalizable {
            defect: format!("complex eigenvalue {} + {}i", z.re, z.im),
        });
    }
    let mut reals: Vec<f64> = eigenvalues.iter().map(|z| z.re).collect();
    reals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let cluster_tol = 1e-8 * scale.max(1.0);
    let mut clusters: Vec<(f64, usize)> = Vec::new();
    for v in reals {
        match clusters.last_mut() {
            Some((c, n)) if (v - *c / *n as f64).abs() <= cluster_tol => {
                *c += v;
                *n += 1;
            }
            _ => clusters.push((v, 1)),
        }
    }
    let mut out = Vec::with_capacity(m);
    for (sum, mult) in clusters {
        let lambda = sum / mult as f64;
        let shifted = &mixed - DMatrix::identity(m, m) * lambda;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let mut null: Vec<Vec<f64>> = (0..m)
            .filter(|&k| svd.singular_values[k] <= 1e-7 * scale.max(1.0))
            .map(|k| v_t.row(k).iter().copied().collect())
            .collect();
        if null.len() < mult {
            return Err(Error::RicciNotDiagonalizable {
                defect: format!(
                    "eigenvalue {lambda} has algebraic multiplicity {mult} but geometric multiplicity {}",
                    null.len()
                ),
            });
        }
        null.truncate(mult);
        // eta-orthonormalize within the eigenspace, favouring frame axes
        null = eta_orthonormal(null, signs)?;
        out.extend(null.into_iter().map(|v| (lambda, v)));
    }
    Ok(out)
}

fn eta_orthonormal(basis: Vec<Vec<f64>>, signs: &[f64]) -> Result<Vec<Vec<f64>>> {
    let m = signs.len();
    // Re-express the space through its projections of the frame axes so that
    // axis-aligned eigenspaces come back as axes.
    let k = basis.len();
    let q = DMatrix::from_fn(m, k, |i, j| basis[j][i]);
    let proj = &q * q.transpose();
    let mut candidates: Vec<Vec<f64>> = (0..m).map(|i| proj.column(i).iter().copied().collect()).collect();
    candidates.sort_by(|a, b| norm(b).partial_cmp(&norm(a)).unwrap());
    let ip = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(signs).map(|((x, y), s)| s * x * y).sum() };
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mut v in candidates {
        if out.len() == k {
            break;
        }
        for u in &out {
            let c = ip(&v, u) / ip(u, u);
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
        let n = ip(&v, &v);
        if norm(&v) < 1e-8 {
            continue;
        }
        if n.abs() < 1e-10 * dot(&v, &v) {
            return Err(Error::RicciNotDiagonalizable {
                defect: "null eigenvector".into(),
            });
        }
        let s = n.abs().sqrt();
        out.push(v.iter().map(|x| x / s).collect());
    }
    if out.len() < k {
        return Err(Error::RicciNotDiagonalizable {
            defect: "eigenspace basis collapsed".into(),
        });
    }
    Ok(out)
}

/// Which sign the scalar term carries in [`closed_form_zeta`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarTermSign {
    /// `((m-1)(lambda+mu) - R) / ((m-1)(m-2))`, the value that satisfies the
    /// eigen-equations.
    Corrected,
    /// `((m-1)(lambda+mu) + R) / ((m-1)(m-2))`; kept only to demonstrate that
    /// it fails certification.
    AsPrinted,
}

pub fn closed_form_zeta(lambda: f64, mu: f64, scalar: f64, m: usize, sign: ScalarTermSign) -> f64 {
    let mf = m as f64;
    let r = match sign {
        ScalarTermSign::Corrected => -scalar,
        ScalarTermSign::AsPrinted => scalar,
    };
    ((mf - 1.0) * (lambda + mu) + r) / ((mf - 1.0) * (mf - 2.0))
}

/// One triple per unordered pair of Ricci eigenvectors, certified against
/// the frame tensor `t` (which must be expressed in `pairs.frame`).
pub fn closed_form_conformally_flat(
    pairs: &RicciEigenpairs,
    scalar: f64,
    t: &Rank4,
) -> Result<Vec<MEigentriple>> {
    let m = pairs.dim();
    if m < 3 {
        return Err(Error::UnsupportedDimension {
            operation: "closed-form M-eigenvalues (use the Gaussian curvature in 2D)",
            dim: m,
        });
    }
    if pairs.frame.signs.iter().any(|&s| s < 0.0) {
        return Err(Error::LorentzianClosedForm);
    }
    let mut out = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            let zeta = closed_form_zeta(
                pairs.values[i],
                pairs.values[j],
                scalar,
                m,
                ScalarTermSign::Corrected,
            );
            out.push(MEigentriple::new(
                t,
                &pairs.frame.signs,
                zeta,
                pairs.frame_vectors[i].clone(),
                pairs.frame_vectors[j].clone(),
                Provenance::ClosedForm,
            ));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlaneValue {
    pub i: usize,
    pub j: usize,
    pub zeta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeterminationReport {
    pub planes: Vec<PlaneValue>,
    pub max_deviation: f64,
    pub conformal: ConformalVerdict,
    /// Set when the input carries a Weyl part, so the M-eigenvalues on the
    /// Ricci eigenplanes cannot determine it.
    pub flag: Option<String>,
}

/// Rebuilds the frame tensor from the `C(m,2)` closed-form values, read as
/// sectional curvatures of the Ricci eigenplanes, and measures how far the
/// rebuilt tensor is from `t`.
pub fn meig_determination_check(
    pairs: &RicciEigenpairs,
    scalar: f64,
    t: &Rank4,
) -> Result<DeterminationReport> {
    let m = pairs.dim();
    if m < 3 {
        return Err(Error::UnsupportedDimension {
            operation: "M-eigenvalue determination check",
            dim: m,
        });
    }
    let signs = &pairs.frame.signs;
    let mut rebuilt = Rank4::zeros(m);
    let mut planes = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let zeta =
                closed_form_zeta(pairs.values[i], pairs.values[j], scalar, m, ScalarTermSign::Corrected);
            planes.push(PlaneValue { i, j, zeta });
            let zi = &pairs.frame_vectors[i];
            let zj = &pairs.frame_vectors[j];
            let ei = frame_norm(zi, signs).signum();
            let ej = frame_norm(zj, signs).signum();
            // lowered frame covectors
            let u: Vec<f64> = zi.iter().zip(signs).map(|(v, s)| v * s).collect();
            let v: Vec<f64> = zj.iter().zip(signs).map(|(v, s)| v * s).collect();
            let w = |a: usize, b: usize| u[a] * v[b] - u[b] * v[a];
            let coeff = zeta * ei * ej;
            rebuilt = rebuilt.add(&Rank4::from_fn(m, |a, b, c, d| coeff * w(a, b) * w(c, d)));
        }
    }
    let max_deviation = rebuilt.max_abs_diff(t);
    let eta = DMatrix::from_diagonal(&DVector::from_column_slice(signs));
    let ricci = frame_ricci(t, signs);
    let decomposition = ricci_decompose(
        &crate::curvature::CurvatureTensor {
            variance: crate::curvature::Variance::Lowered,
            components: t.clone(),
            point: Vec::new(),
        },
        &eta,
        &ricci,
    )?;
    let conformal = is_conformally_flat(&decomposition, DEFAULT_CONFORMAL_TOLERANCE);
    let flag = (!conformal.conformally_flat).then(|| "not conformally flat".to_string());
    Ok(DeterminationReport {
        planes,
        max_deviation,
        conformal,
        flag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::{check_symmetries, constant_curvature_tensor};
    use crate::decomposition::conformally_flat_lowered;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_sphere_2() -> Rank4 {
        constant_curvature_tensor(&DMatrix::identity(2, 2), 1.0)
    }

    #[test]
    fn identity_frame_leaves_tensor_unchanged() {
        let t = constant_curvature_tensor(&DMatrix::identity(3, 3), 0.7);
        assert_eq!(to_frame(&t, &Frame::identity(3)), t);
    }

    #[test]
    fn frame_normalized_sphere_component_is_k() {
        // 2-sphere a=2 at theta=pi/3
        let th = std::f64::consts::PI / 3.0;
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 4.0 * th.sin().powi(2)]));
        let r = constant_curvature_tensor(&g, 0.25);
        let f = Frame::from_metric(&g, Signature::Riemannian).unwrap();
        let t = to_frame(&r, &f);
        assert!((t[(0, 1, 0, 1)] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn frame_transform_preserves_symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in 2..=5 {
            let mut r = Rank4::zeros(m);
            for _ in 0..3 {
                let h = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
                let h = (&h + h.transpose()) * 0.5;
                r = r.add(&constant_curvature_tensor(&h, 1.0));
            }
            let b = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
            let g = &b * b.transpose() + DMatrix::identity(m, m);
            let f = Frame::from_metric(&g, Signature::Riemannian).unwrap();
            assert!(check_symmetries(&to_frame(&r, &f)).holds(1e-10));
        }
    }

    #[test]
    fn residual_examples() {
        let z = Rank4::zeros(3);
        let x = normalized(&[1.0, 2.0, 3.0]);
        let y = normalized(&[-1.0, 0.5, 0.0]);
        assert_eq!(meig_residual(&z, 0.0, &x, &y), [0.0, 0.0]);

        let t = unit_sphere_2();
        assert_eq!(meig_residual(&t, 1.0, &[1.0, 0.0], &[0.0, 1.0]), [0.0, 0.0]);
        let r = meig_residual(&t, 0.5, &[1.0, 0.0], &[0.0, 1.0]);
        assert!((r[0] - 0.5).abs() < 1e-15 && (r[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ricci_eigenpair_examples() {
        // Einstein: R_ab = k g_ab
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5]);
        let k = 0.7;
        let ric = RicciData {
            lowered: &g * k,
            mixed: DMatrix::identity(3, 3) * k,
            scalar: 3.0 * k,
        };
        let pairs = ricci_eigenpairs(&ric, &g, Signature::Riemannian).unwrap();
        assert!(pairs.values.iter().all(|v| (v - k).abs() < 1e-12));
        assert!(pairs.eigen_residual < 1e-9);
        assert!(pairs.orthogonality_residual < 1e-8);

        let lowered = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let ric = RicciData {
            mixed: lowered.clone(),
            lowered,
            scalar: 6.0,
        };
        let pairs = ricci_eigenpairs(&ric, &DMatrix::identity(3, 3), Signature::Riemannian).unwrap();
        assert_eq!(pairs.values, [1.0, 2.0, 3.0]);
        assert_eq!(pairs.vectors[0], [0.0, 1.0, 0.0]);
        assert_eq!(pairs.vectors[1], [0.0, 0.0, 1.0]);
        assert_eq!(pairs.vectors[2], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn lorentzian_einstein_eigenpairs() {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![-0.75, 4.0 / 3.0, 1.0, 2.0]));
        let k = 0.75;
        let ric = RicciData {
            lowered: &g * k,
            mixed: DMatrix::identity(4, 4) * k,
            scalar: 4.0 * k,
        };
        let pairs = ricci_eigenpairs(&ric, &g, Signature::Lorentzian).unwrap();
        assert!(pairs.values.iter().all(|v| (v - k).abs() < 1e-12));
        assert!(pairs.eigen_residual < 1e-9);
        assert!(pairs.orthogonality_residual < 1e-8);
    }

    #[test]
    fn lorentzian_non_diagonalizable_ricci_is_reported() {
        // null-dust-like Ricci: R_ab = l_a l_b with l null
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, 1.0]));
        let l = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        let lowered = &l * l.transpose();
        let ric = RicciData {
            mixed: &g * &lowered,
            lowered,
            scalar: 0.0,
        };
        assert!(matches!(
            ricci_eigenpairs(&ric, &g, Signature::Lorentzian),
            Err(Error::RicciNotDiagonalizable { .. })
        ));
    }

    fn sphere_pairs(m: usize, k: f64) -> (RicciEigenpairs, f64, Rank4) {
        let g = DMatrix::identity(m, m);
        let t = constant_curvature_tensor(&g, k);
        let ric = frame_ricci(&t, &vec![1.0; m]);
        let pairs = ricci_eigenpairs(&ric, &g, Signature::Riemannian).unwrap();
        (pairs, ric.scalar, t)
    }

    #[test]
    fn closed_form_on_constant_curvature() {
        let (pairs, scalar, t) = sphere_pairs(4, 1.0);
        assert!((scalar - 12.0).abs() < 1e-12);
        let triples = closed_form_conformally_flat(&pairs, scalar, &t).unwrap();
        assert_eq!(triples.len(), 6);
        for tr in &triples {
            assert!((tr.zeta - 1.0).abs() < 1e-12);
            assert!(tr.max_residual() < 1e-12);
        }
        let printed = closed_form_zeta(3.0, 3.0, 12.0, 4, ScalarTermSign::AsPrinted);
        assert!((printed - 5.0).abs() < 1e-12);
        let (x, y) = (&triples[0].x, &triples[0].y);
        assert!(meig_residual(&t, printed, x, y)[0] > 1.0);

        // m = 3: zeta = lambda + mu - R/2
        let (pairs, scalar, t) = sphere_pairs(3, 1.0);
        let triples = closed_form_conformally_flat(&pairs, scalar, &t).unwrap();
        for tr in &triples {
            assert!((tr.zeta - 1.0).abs() < 1e-12);
            assert!((tr.zeta - (2.0 + 2.0 - scalar / 2.0)).abs() < 1e-12);
        }

        let (pairs, scalar, t) = sphere_pairs(4, 0.0);
        let triples = closed_form_conformally_flat(&pairs, scalar, &t).unwrap();
        assert!(triples.iter().all(|tr| tr.zeta == 0.0));
    }

    #[test]
    fn closed_form_rejects_dimension_two_and_lorentzian() {
        let (pairs, scalar, t) = sphere_pairs(2, 1.0);
        assert!(matches!(
            closed_form_conformally_flat(&pairs, scalar, &t),
            Err(Error::UnsupportedDimension { .. })
        ));
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, 1.0]));
        let t = constant_curvature_tensor(&g, 1.0);
        let ric = frame_ricci(&t, &[-1.0, 1.0, 1.0]);
        let pairs = ricci_eigenpairs(&ric, &g, Signature::Lorentzian).unwrap();
        assert_eq!(
            closed_form_conformally_flat(&pairs, ric.scalar, &t).unwrap_err(),
            Error::LorentzianClosedForm
        );
    }

    #[test]
    fn closed_form_certifies_on_random_conformally_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for m in 3..=6 {
            let g = DMatrix::identity(m, m);
            let b = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
            let ric = (&b + b.transpose()) * 0.5;
            let t = conformally_flat_lowered(&g, &ric, &g);
            let data = frame_ricci(&t, &vec![1.0; m]);
            let pairs = ricci_eigenpairs(&data, &g, Signature::Riemannian).unwrap();
            let triples = closed_form_conformally_flat(&pairs, data.scalar, &t).unwrap();
            assert_eq!(triples.len(), m * (m - 1) / 2);
            for tr in &triples {
                assert!(tr.max_residual() <= 1e-8, "{:?}", tr.residuals);
                assert!((biquadratic(&t, &tr.x, &tr.y) - tr.zeta).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn determination_check_round_trip() {
        let (pairs, scalar, t) = sphere_pairs(3, 0.5);
        let rep = meig_determination_check(&pairs, scalar, &t).unwrap();
        assert!(rep.max_deviation < 1e-12);
        assert!(rep.flag.is_none());
        assert_eq!(rep.planes.len(), 3);
    }
}
