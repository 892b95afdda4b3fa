//! Constant conformal rescaling `g -> c^2 g` and Einstein detection.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::curvature::{sectional_curvature, PointGeometry, RicciData};
use crate::error::{Error, Result};
use crate::meigen::{frame_tensor_at, meig_residual, solve_meigen, MEigentriple, SolverConfig};
use crate::metric::MetricField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EinsteinVerdict {
    pub is_einstein: bool,
    /// `R / m`
    pub k: f64,
    /// `||R_ab - k g_ab|| / ||R_ab||`, zero when `||R_ab||` is below
    /// [`RICCI_FLAT_THRESHOLD`].
    pub residual: f64,
}

pub const RICCI_FLAT_THRESHOLD: f64 = 1e-9;

pub fn einstein_check(ricci: &RicciData, g: &DMatrix<f64>, tol: f64) -> EinsteinVerdict {
    let m = g.nrows() as f64;
    let k = ricci.scalar / m;
    let norm = ricci.lowered.norm();
    let residual = if norm <= RICCI_FLAT_THRESHOLD {
        0.0
    } else {
        (&ricci.lowered - g * k).norm() / norm
    };
    EinsteinVerdict {
        is_einstein: residual <= tol,
        k,
        residual,
    }
}

pub fn scale_metric(metric: &MetricField, c: f64) -> Result<MetricField> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "c".into(),
            message: format!("conformal factor must be positive and finite, got {c}"),
        });
    }
    Ok(metric.clone().with_factor(c * c))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub factor: f64,
    pub tolerance: f64,
    /// `||R^ - c^2 R|| / ||R||` on the lowered tensor.
    pub lowered_defect: f64,
    /// `||R^ - R|| / ||R||` on the mixed tensor.
    pub mixed_defect: f64,
    /// Coordinate-plane sectional curvatures `(original, scaled)`.
    pub sectional: Vec<[f64; 2]>,
    pub sectional_defect: f64,
    /// Matched M-eigenvalues `(original, scaled)`.
    pub zeta_pairs: Vec<[f64; 2]>,
    pub zeta_defect: f64,
    /// Both runs found the same number of eigenvalue classes.
    pub counts_match: bool,
    /// Mean of `ln(zeta^ / zeta) / ln c` over nonzero eigenvalues.
    pub fitted_exponent: Option<f64>,
    /// Largest residual of the original frame eigenvectors in the scaled
    /// problem (with eigenvalue `zeta / c^2`), relative to the tensor size.
    pub eigenvector_residual: f64,
    /// Largest distance, up to sign and swapping `x` with `y`, between
    /// matched eigenvector pairs of the two runs.
    pub eigenvector_distance: f64,
    pub passed: bool,
}

fn relative(diff: f64, scale: f64) -> f64 {
    if scale < 1e-14 {
        diff
    } else {
        diff / scale
    }
}

/// Compares geometry and M-spectrum of `g` and `c^2 g` at `p`.
pub fn conformal_scaling_check(
    metric: &MetricField,
    p: &[f64],
    c: f64,
    config: &SolverConfig,
    tol: f64,
) -> Result<ScalingReport> {
    let scaled = scale_metric(metric, c)?;
    let c2 = c * c;
    let a = PointGeometry::compute(metric, p)?;
    let b = PointGeometry::compute(&scaled, p)?;

    let lowered_defect = relative(
        b.lowered.components.sub(&a.lowered.components.scaled(c2)).frobenius_norm(),
        a.lowered.components.frobenius_norm() * c2,
    );
    let mixed_defect = relative(
        b.mixed.components.sub(&a.mixed.components).frobenius_norm(),
        a.mixed.components.frobenius_norm(),
    );

    let m = metric.dim();
    let mut sectional = Vec::new();
    let mut sectional_defect: f64 = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            let mut u = vec![0.0; m];
            let mut v = vec![0.0; m];
            u[i] = 1.0;
            v[j] = 1.0;
            let k0 = sectional_curvature(&a.lowered.components, &a.metric, &u, &v)?;
            let k1 = sectional_curvature(&b.lowered.components, &b.metric, &u, &v)?;
            sectional_defect = sectional_defect.max(relative((k1 - k0 / c2).abs(), k0.abs() / c2));
            sectional.push([k0, k1]);
        }
    }

    let (ta, fa) = frame_tensor_at(metric, p)?;
    let (tb, _) = frame_tensor_at(&scaled, p)?;
    let sa = solve_meigen(&ta, &fa.signs, config)?.triples;
    let sb = solve_meigen(&tb, &fa.signs, config)?.triples;

    let mut zeta_pairs = Vec::new();
    let mut zeta_defect: f64 = 0.0;
    let mut exponents = Vec::new();
    let mut eigenvector_distance: f64 = 0.0;
    let scale_b = tb.max_abs().max(1e-300);
    let mut eigenvector_residual: f64 = 0.0;
    for t in &sa {
        let target = t.zeta / c2;
        let Some(matched) = sb.iter().min_by(|x, y| {
            (x.zeta - target).abs().partial_cmp(&(y.zeta - target).abs()).unwrap()
        }) else {
            continue;
        };
        zeta_pairs.push([t.zeta, matched.zeta]);
        zeta_defect = zeta_defect.max(relative((matched.zeta - target).abs(), target.abs()));
        if t.zeta.abs() > 1e-8 && matched.zeta * t.zeta > 0.0 && (c - 1.0).abs() > 1e-12 {
            exponents.push((matched.zeta / t.zeta).ln() / c.ln());
        }
        eigenvector_distance = eigenvector_distance.max(pair_distance(t, matched));
        let r = meig_residual(&tb, target, &t.x, &t.y);
        eigenvector_residual = eigenvector_residual.max(r[0].max(r[1]) / scale_b.max(1.0));
    }
    let counts_match = sa.len() == sb.len();
    let fitted_exponent =
        (!exponents.is_empty()).then(|| exponents.iter().sum::<f64>() / exponents.len() as f64);

    let passed = counts_match
        && lowered_defect <= tol
        && mixed_defect <= tol
        && sectional_defect <= tol
        && zeta_defect <= tol
        && eigenvector_residual <= tol
        && fitted_exponent.is_none_or(|e| (e + 2.0).abs() <= tol.max(1e-6));
    Ok(ScalingReport {
        factor: c,
        tolerance: tol,
        lowered_defect,
        mixed_defect,
        sectional,
        sectional_defect,
        zeta_pairs,
        zeta_defect,
        counts_match,
        fitted_exponent,
        eigenvector_residual,
        eigenvector_distance,
        passed,
    })
}

fn pair_distance(a: &MEigentriple, b: &MEigentriple) -> f64 {
    let d = |u: &[f64], v: &[f64]| -> f64 {
        let plus: f64 = u.iter().zip(v).map(|(p, q)| (p - q).powi(2)).sum();
        let minus: f64 = u.iter().zip(v).map(|(p, q)| (p + q).powi(2)).sum();
        plus.min(minus).sqrt()
    };
    let straight = d(&a.x, &b.x).max(d(&a.y, &b.y));
    let swapped = d(&a.x, &b.y).max(d(&a.y, &b.x));
    straight.min(swapped)
}
