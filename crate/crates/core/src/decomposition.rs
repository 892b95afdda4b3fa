//! Ricci decomposition `R = S + E + C` into scalar, semi-traceless and Weyl
//! parts, and the conformal-flatness test built on it.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::curvature::{CurvatureTensor, RicciData, Variance};
use crate::error::{Error, Result};
use crate::metric::inverse_symmetric;
use crate::tensor::{indices4, Rank4};

pub const DEFAULT_CONFORMAL_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct RicciDecomposition {
    pub scalar_part: Rank4,
    pub semi_traceless_part: Rank4,
    pub weyl: Rank4,
    /// S_ab = R_ab - (R / n) g_ab
    pub traceless_ricci: DMatrix<f64>,
    pub scalar: f64,
    pub norms: DecompositionNorms,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionNorms {
    pub riemann: f64,
    pub scalar_part: f64,
    pub semi_traceless_part: f64,
    pub weyl: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalVerdict {
    pub conformally_flat: bool,
    pub weyl_norm: f64,
    pub riemann_norm: f64,
    /// ||C|| / max(1, ||R||)
    pub relative_weyl: f64,
    pub tolerance: f64,
}

/// `g_ac h_bd - g_ad h_bc + g_bd h_ac - g_bc h_ad`, the Kulkarni-Nomizu
/// product of two symmetric matrices.
pub fn kulkarni_nomizu(g: &DMatrix<f64>, h: &DMatrix<f64>) -> Rank4 {
    Rank4::from_fn(g.nrows(), |a, b, c, d| {
        g[(a, c)] * h[(b, d)] - g[(a, d)] * h[(b, c)] + g[(b, d)] * h[(a, c)]
            - g[(b, c)] * h[(a, d)]
    })
}

fn require_dim(operation: &'static str, m: usize) -> Result<()> {
    if m < 3 {
        return Err(Error::UnsupportedDimension { operation, dim: m });
    }
    Ok(())
}

pub fn ricci_decompose(
    lowered: &CurvatureTensor,
    g: &DMatrix<f64>,
    ricci: &RicciData,
) -> Result<RicciDecomposition> {
    debug_assert_eq!(lowered.variance, Variance::Lowered);
    let n = lowered.dim();
    require_dim("Ricci decomposition", n)?;
    let nf = n as f64;
    let scalar = ricci.scalar;
    let traceless_ricci = &ricci.lowered - g * (scalar / nf);

    // H_abcd = g_ac g_db - g_ad g_cb; S = R / (n (n-1)) H
    let scalar_part = Rank4::from_fn(n, |a, b, c, d| {
        scalar / (nf * (nf - 1.0)) * (g[(a, c)] * g[(d, b)] - g[(a, d)] * g[(c, b)])
    });
    let semi_traceless_part = kulkarni_nomizu(g, &traceless_ricci).scaled(1.0 / (nf - 2.0));
    let weyl = lowered
        .components
        .sub(&scalar_part)
        .sub(&semi_traceless_part);
    let norms = DecompositionNorms {
        riemann: lowered.components.frobenius_norm(),
        scalar_part: scalar_part.frobenius_norm(),
        semi_traceless_part: semi_traceless_part.frobenius_norm(),
        weyl: weyl.frobenius_norm(),
    };
    Ok(RicciDecomposition {
        scalar_part,
        semi_traceless_part,
        weyl,
        traceless_ricci,
        scalar,
        norms,
    })
}

impl RicciDecomposition {
    pub fn reassembled(&self) -> Rank4 {
        self.scalar_part.add(&self.semi_traceless_part).add(&self.weyl)
    }

    /// Largest |g^ac C_abcd| over (b, d), the other traces following by
    /// symmetry.
    pub fn max_weyl_trace(&self, g_inv: &DMatrix<f64>) -> f64 {
        max_trace(&self.weyl, g_inv)
    }

    /// |g^ab S_ab|
    pub fn traceless_ricci_trace(&self, g_inv: &DMatrix<f64>) -> f64 {
        (g_inv * &self.traceless_ricci).trace().abs()
    }
}

pub fn max_trace(t: &Rank4, g_inv: &DMatrix<f64>) -> f64 {
    let m = t.dim();
    let mut worst: f64 = 0.0;
    for b in 0..m {
        for d in 0..m {
            let mut acc = 0.0;
            for a in 0..m {
                for c in 0..m {
                    acc += g_inv[(a, c)] * t[(a, b, c, d)];
                }
            }
            worst = worst.max(acc.abs());
        }
    }
    worst
}

pub fn is_conformally_flat(d: &RicciDecomposition, tol: f64) -> ConformalVerdict {
    assert!(tol > 0.0, "tolerance must be positive");
    let relative = d.norms.weyl / d.norms.riemann.max(1.0);
    ConformalVerdict {
        conformally_flat: relative <= tol,
        weyl_norm: d.norms.weyl,
        riemann_norm: d.norms.riemann,
        relative_weyl: relative,
        tolerance: tol,
    }
}

/// Mixed curvature tensor of a conformally flat metric, built from Ricci
/// data alone:
///
/// `R^a_bcd = (d^a_c R_bd - d^a_d R_bc + g_bd R^a_c - g_bc R^a_d) / (m-2)
///           - R (d^a_c g_bd - d^a_d g_bc) / ((m-1)(m-2))`
///
/// The scalar is recomputed as `g^ik R_ik`.
pub fn conformally_flat_riemann(g: &DMatrix<f64>, ricci: &RicciData) -> Result<CurvatureTensor> {
    let m = g.nrows();
    require_dim("conformally flat reconstruction", m)?;
    let gi = inverse_symmetric(g)?;
    let lowered = conformally_flat_lowered(g, &ricci.lowered, &gi);
    Ok(CurvatureTensor {
        variance: Variance::Mixed,
        components: lowered.transform_slot(0, &gi),
        point: Vec::new(),
    })
}

/// Lowered counterpart of [`conformally_flat_riemann`].
pub fn conformally_flat_lowered(
    g: &DMatrix<f64>,
    ricci_lowered: &DMatrix<f64>,
    g_inv: &DMatrix<f64>,
) -> Rank4 {
    let m = g.nrows() as f64;
    let scalar = (g_inv * ricci_lowered).trace();
    let kn = kulkarni_nomizu(g, ricci_lowered);
    Rank4::from_fn(g.nrows(), |a, b, c, d| {
        kn[(a, b, c, d)] / (m - 2.0)
            - scalar / ((m - 1.0) * (m - 2.0)) * (g[(a, c)] * g[(b, d)] - g[(a, d)] * g[(b, c)])
    })
}

/// Indices where two tensors differ by more than `tol`.
pub fn mismatches(a: &Rank4, b: &Rank4, tol: f64) -> Vec<[usize; 4]> {
    indices4(a.dim())
        .filter(|&i| (a[i] - b[i]).abs() > tol)
        .map(|(p, q, r, s)| [p, q, r, s])
        .collect()
}
