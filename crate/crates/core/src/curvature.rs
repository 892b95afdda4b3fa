//! Christoffel symbols, Riemann, Ricci and sectional curvature at a point.
//!
//! Conventions: `R^a_bcd = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb`,
//! lowered with `R_abcd = g_ae R^e_bcd`, contracted with `R_bd = g^ac R_abcd`.
//! With these choices the unit 2-sphere has K = +1 and R = +2, and a space of
//! constant curvature K satisfies `R_abcd = K (g_ac g_bd - g_ad g_bc)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{inverse_symmetric, MetricField};
use crate::tensor::{indices4, Rank3, Rank4};

/// Threshold on |G(u,v,u,v)| below which a plane counts as degenerate.
pub const DEGENERATE_PLANE_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    /// R^a_bcd
    Mixed,
    /// R_abcd
    Lowered,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureTensor {
    pub variance: Variance,
    pub components: Rank4,
    pub point: Vec<f64>,
}

impl CurvatureTensor {
    pub fn dim(&self) -> usize {
        self.components.dim()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RicciData {
    /// R_ab
    pub lowered: DMatrix<f64>,
    /// R^a_b
    pub mixed: DMatrix<f64>,
    pub scalar: f64,
}

/// Everything the pipeline computes at one point.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub metric: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    /// `(c, a, b)` holds G^c_ab.
    pub christoffel: Rank3,
    pub mixed: CurvatureTensor,
    pub lowered: CurvatureTensor,
    pub ricci: RicciData,
}

impl PointGeometry {
    pub fn compute(metric: &MetricField, p: &[f64]) -> Result<Self> {
        let g = metric.metric_at(p)?;
        let gi = inverse_symmetric(&g)?;
        let derivs = metric.metric_derivatives_at(p)?;
        let (christoffel, dgamma) = connection(&gi, &derivs.first, &derivs.second);
        let mixed = CurvatureTensor {
            variance: Variance::Mixed,
            components: riemann_from_connection(&christoffel, &dgamma),
            point: p.to_vec(),
        };
        let lowered = lower_riemann(&mixed, &g);
        let ricci = ricci_from_lowered(&lowered.components, &gi);
        Ok(PointGeometry {
            metric: g,
            inverse: gi,
            christoffel,
            mixed,
            lowered,
            ricci,
        })
    }
}

/// Christoffel symbols and their derivatives. `dgamma[(e, c, a, b)]` holds
/// d_e G^c_ab.
fn connection(gi: &DMatrix<f64>, dg: &Rank3, ddg: &Rank4) -> (Rank3, Rank4) {
    let m = gi.nrows();
    // lowered[(d, a, b)] = 1/2 (d_a g_bd + d_b g_ad - d_d g_ab)
    let mut lowered = Rank3::zeros(m);
    for d in 0..m {
        for a in 0..m {
            for b in 0..m {
                lowered[(d, a, b)] = 0.5 * (dg[(b, d, a)] + dg[(a, d, b)] - dg[(a, b, d)]);
            }
        }
    }
    let mut gamma = Rank3::zeros(m);
    for c in 0..m {
        for a in 0..m {
            for b in 0..m {
                gamma[(c, a, b)] = (0..m).map(|d| gi[(c, d)] * lowered[(d, a, b)]).sum();
            }
        }
    }
    // d_e g^cd = -g^cp (d_e g_pq) g^qd
    let mut dginv = Rank3::zeros(m);
    for e in 0..m {
        for c in 0..m {
            for d in 0..m {
                let mut acc = 0.0;
                for pp in 0..m {
                    for q in 0..m {
                        acc += gi[(c, pp)] * dg[(pp, q, e)] * gi[(q, d)];
                    }
                }
                dginv[(e, c, d)] = -acc;
            }
        }
    }
    let mut dgamma = Rank4::zeros(m);
    for e in 0..m {
        for c in 0..m {
            for a in 0..m {
                for b in 0..m {
                    let mut acc = 0.0;
                    for d in 0..m {
                        let dlow = 0.5
                            * (ddg[(b, d, a, e)] + ddg[(a, d, b, e)] - ddg[(a, b, d, e)]);
                        acc += dginv[(e, c, d)] * lowered[(d, a, b)] + gi[(c, d)] * dlow;
                    }
                    dgamma[(e, c, a, b)] = acc;
                }
            }
        }
    }
    (gamma, dgamma)
}

fn riemann_from_connection(gamma: &Rank3, dgamma: &Rank4) -> Rank4 {
    let m = gamma.dim();
    Rank4::from_fn(m, |a, b, c, d| {
        let mut v = dgamma[(c, a, d, b)] - dgamma[(d, a, c, b)];
        for e in 0..m {
            v += gamma[(a, c, e)] * gamma[(e, d, b)] - gamma[(a, d, e)] * gamma[(e, c, b)];
        }
        v
    })
}

/// G^c_ab at `p`, stored at `(c, a, b)`.
pub fn christoffel_at(metric: &MetricField, p: &[f64]) -> Result<Rank3> {
    let gi = metric.inverse_metric_at(p)?;
    let d = metric.metric_derivatives_at(p)?;
    Ok(connection(&gi, &d.first, &d.second).0)
}

pub fn riemann_at(metric: &MetricField, p: &[f64]) -> Result<CurvatureTensor> {
    Ok(PointGeometry::compute(metric, p)?.mixed)
}

pub fn lower_riemann(mixed: &CurvatureTensor, g: &DMatrix<f64>) -> CurvatureTensor {
    debug_assert_eq!(mixed.variance, Variance::Mixed);
    let lowered = mixed.components.transform_slot(0, g);
    CurvatureTensor {
        variance: Variance::Lowered,
        components: lowered,
        point: mixed.point.clone(),
    }
}

pub fn raise_riemann(lowered: &CurvatureTensor, g_inv: &DMatrix<f64>) -> CurvatureTensor {
    debug_assert_eq!(lowered.variance, Variance::Lowered);
    CurvatureTensor {
        variance: Variance::Mixed,
        components: lowered.components.transform_slot(0, g_inv),
        point: lowered.point.clone(),
    }
}

/// R_ik = g^hj R_hijk, R^a_b = g^ac R_cb, R = R^a_a.
pub fn ricci_from_lowered(lowered: &Rank4, g_inv: &DMatrix<f64>) -> RicciData {
    let m = lowered.dim();
    let mut ric = DMatrix::zeros(m, m);
    for i in 0..m {
        for k in 0..m {
            let mut acc = 0.0;
            for h in 0..m {
                for j in 0..m {
                    acc += g_inv[(h, j)] * lowered[(h, i, j, k)];
                }
            }
            ric[(i, k)] = acc;
        }
    }
    let mixed = g_inv * &ric;
    let scalar = mixed.trace();
    RicciData {
        lowered: ric,
        mixed,
        scalar,
    }
}

pub fn ricci_scalar_at(metric: &MetricField, p: &[f64]) -> Result<RicciData> {
    Ok(PointGeometry::compute(metric, p)?.ricci)
}

fn bilinear(g: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let m = g.nrows();
    let mut acc = 0.0;
    for a in 0..m {
        for b in 0..m {
            acc += g[(a, b)] * u[a] * v[b];
        }
    }
    acc
}

/// K(span{u, v}) = R(u,v,u,v) / (<u,u><v,v> - <u,v>^2).
pub fn sectional_curvature(lowered: &Rank4, g: &DMatrix<f64>, u: &[f64], v: &[f64]) -> Result<f64> {
    let m = lowered.dim();
    if u.len() != m || v.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: u.len().min(v.len()),
        });
    }
    let gram = bilinear(g, u, u) * bilinear(g, v, v) - bilinear(g, u, v).powi(2);
    if gram.abs() < DEGENERATE_PLANE_THRESHOLD {
        return Err(Error::DegeneratePlane {
            gram: gram.abs(),
            threshold: DEGENERATE_PLANE_THRESHOLD,
        });
    }
    Ok(lowered.contract4(u, v, u, v) / gram)
}

pub fn gaussian_curvature_2d(metric: &MetricField, p: &[f64]) -> Result<f64> {
    if metric.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            operation: "gaussian curvature",
            dim: metric.dim(),
        });
    }
    let geo = PointGeometry::compute(metric, p)?;
    let g = &geo.metric;
    Ok(geo.lowered.components[(0, 1, 0, 1)] / (g[(0, 0)] * g[(1, 1)] - g[(0, 1)].powi(2)))
}

/// Worst violations of the algebraic curvature identities, relative to
/// `max(1, max |R_abcd|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub antisym_first_pair: f64,
    pub antisym_second_pair: f64,
    pub pair_symmetry: f64,
    pub first_bianchi: f64,
}

impl SymmetryReport {
    pub fn worst(&self) -> f64 {
        self.antisym_first_pair
            .max(self.antisym_second_pair)
            .max(self.pair_symmetry)
            .max(self.first_bianchi)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

/// Checks a fully lowered tensor against the curvature identities.
pub fn check_symmetries(t: &Rank4) -> SymmetryReport {
    let m = t.dim();
    let scale = t.max_abs().max(1.0);
    let mut r = SymmetryReport {
        antisym_first_pair: 0.0,
        antisym_second_pair: 0.0,
        pair_symmetry: 0.0,
        first_bianchi: 0.0,
    };
    for (a, b, c, d) in indices4(m) {
        let v = t[(a, b, c, d)];
        r.antisym_first_pair = r.antisym_first_pair.max((v + t[(b, a, c, d)]).abs());
        r.antisym_second_pair = r.antisym_second_pair.max((v + t[(a, b, d, c)]).abs());
        r.pair_symmetry = r.pair_symmetry.max((v - t[(c, d, a, b)]).abs());
        r.first_bianchi = r
            .first_bianchi
            .max((v + t[(a, c, d, b)] + t[(a, d, b, c)]).abs());
    }
    r.antisym_first_pair /= scale;
    r.antisym_second_pair /= scale;
    r.pair_symmetry /= scale;
    r.first_bianchi /= scale;
    r
}

/// Mixed-tensor first Bianchi identity R^a_bcd + R^a_cdb + R^a_dbc = 0 and
/// antisymmetry in the last pair, relative to `max(1, max |R^a_bcd|)`.
pub fn check_mixed_symmetries(t: &Rank4) -> f64 {
    let m = t.dim();
    let scale = t.max_abs().max(1.0);
    let mut worst: f64 = 0.0;
    for (a, b, c, d) in indices4(m) {
        worst = worst
            .max((t[(a, b, c, d)] + t[(a, c, d, b)] + t[(a, d, b, c)]).abs())
            .max((t[(a, b, c, d)] + t[(a, b, d, c)]).abs());
    }
    worst / scale
}

/// K (g_ac g_bd - g_ad g_bc), the lowered tensor of constant curvature K.
pub fn constant_curvature_tensor(g: &DMatrix<f64>, k: f64) -> Rank4 {
    Rank4::from_fn(g.nrows(), |a, b, c, d| {
        k * (g[(a, c)] * g[(b, d)] - g[(a, d)] * g[(b, c)])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Signature;
    use std::f64::consts::PI;

    fn sphere(a: f64) -> MetricField {
        MetricField::from_strings(
            "sphere",
            &["theta", "phi"],
            Signature::Riemannian,
            &[("a", a)],
            &[&[Some("a^2"), Some("0")], &[None, Some("a^2*sin(theta)^2")]],
        )
        .unwrap()
    }

    fn hyperbolic_plane() -> MetricField {
        MetricField::from_strings(
            "h2",
            &["x", "y"],
            Signature::Riemannian,
            &[],
            &[&[Some("1/y^2"), Some("0")], &[None, Some("1/y^2")]],
        )
        .unwrap()
        .with_domain(1, 0.0, f64::INFINITY)
    }

    fn de_sitter(a: f64) -> MetricField {
        MetricField::from_strings(
            "de_sitter",
            &["t", "r", "theta", "phi"],
            Signature::Lorentzian,
            &[("a", a)],
            &[
                &[Some("-(1-r^2/a^2)"), None, None, None],
                &[None, Some("1/(1-r^2/a^2)"), None, None],
                &[None, None, Some("r^2"), None],
                &[None, None, None, Some("r^2*sin(theta)^2")],
            ],
        )
        .unwrap()
        .with_domain(1, 0.0, a)
    }

    fn euclidean(m: usize) -> MetricField {
        let names: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
        let comps = (0..m)
            .map(|a| {
                (0..m)
                    .map(|b| crate::expr::num(if a == b { 1.0 } else { 0.0 }))
                    .collect()
            })
            .collect();
        MetricField::symbolic("flat", names, Signature::Riemannian, Default::default(), comps)
            .unwrap()
    }

    #[test]
    fn christoffel_examples() {
        let g = christoffel_at(&euclidean(3), &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(g.max_abs(), 0.0);

        let g = christoffel_at(&sphere(1.0), &[PI / 4.0, 0.0]).unwrap();
        assert!((g[(0, 1, 1)] + 0.5).abs() < 1e-15);

        // G^r_tt = -1/2 g^rr d_r g_tt = -(r/a^2)(1 - r^2/a^2); the static
        // patch pushes geodesics outward.
        let ds = de_sitter(2.0);
        let p = [0.0, 1.0, 1.1, 0.0];
        let g = christoffel_at(&ds, &p).unwrap();
        assert!((g[(1, 0, 0)] + 0.1875).abs() < 1e-15);
        let h = 1e-6;
        let gtt = |r: f64| -(1.0 - r * r / 4.0);
        let by_hand = -0.5 * (1.0 - 0.25) * (gtt(1.0 + h) - gtt(1.0 - h)) / (2.0 * h);
        assert!((g[(1, 0, 0)] - by_hand).abs() < 1e-8);
        let gfd = christoffel_at(
            &ds.clone().with_mode(crate::metric::DerivativeMode::FiniteDifference),
            &p,
        )
        .unwrap();
        assert!((gfd[(1, 0, 0)] + 0.1875).abs() < 1e-8);
        for c in 0..4 {
            for a in 0..4 {
                for b in 0..4 {
                    assert_eq!(g[(c, a, b)], g[(c, b, a)]);
                }
            }
        }
    }

    #[test]
    fn riemann_examples() {
        let flat = riemann_at(&euclidean(4), &[0.0; 4]).unwrap();
        assert_eq!(flat.components.max_abs(), 0.0);

        let a = 2.0;
        let ds = de_sitter(a);
        let p = [0.3, 1.0, 1.2, 0.4];
        let geo = PointGeometry::compute(&ds, &p).unwrap();
        let r = 1.0;
        assert!((geo.mixed.components[(0, 1, 0, 1)] - 1.0 / (a * a - r * r)).abs() < 1e-12);
        // R^a_bcd = K (delta^a_c g_bd - delta^a_d g_bc)
        let g = &geo.metric;
        for (i, j, k, l) in indices4(4) {
            let dl = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
            let want = (dl(i, k) * g[(j, l)] - dl(i, l) * g[(j, k)]) / (a * a);
            assert!((geo.mixed.components[(i, j, k, l)] - want).abs() < 1e-8);
        }
    }

    #[test]
    fn lowering_examples() {
        let zero = CurvatureTensor {
            variance: Variance::Mixed,
            components: Rank4::zeros(3),
            point: vec![0.0; 3],
        };
        let low = lower_riemann(&zero, &DMatrix::identity(3, 3));
        assert_eq!(low.components.max_abs(), 0.0);

        let a = 1.7;
        let th: f64 = 0.9;
        let geo = PointGeometry::compute(&sphere(a), &[th, 0.2]).unwrap();
        let want = a * a * th.sin().powi(2);
        assert!((geo.lowered.components[(0, 1, 0, 1)] - want).abs() < 1e-12);

        let geo = PointGeometry::compute(&de_sitter(3.0), &[0.0, 1.5, 0.8, 0.1]).unwrap();
        let oracle = constant_curvature_tensor(&geo.metric, 1.0 / 9.0);
        assert!(geo.lowered.components.max_abs_diff(&oracle) < 1e-8);
        assert!(check_symmetries(&geo.lowered.components).holds(1e-9));
    }

    #[test]
    fn ricci_examples() {
        for a in [1.0, 2.0, 5.0] {
            let ds = de_sitter(a);
            let p = [0.0, 0.4 * a, 1.0, 0.5];
            let geo = PointGeometry::compute(&ds, &p).unwrap();
            assert!((geo.ricci.scalar - 12.0 / (a * a)).abs() < 1e-8 * 12.0 / (a * a));
            let want = &geo.metric * (3.0 / (a * a));
            assert!((&geo.ricci.lowered - want).amax() < 1e-8);
        }
        let r = ricci_scalar_at(&sphere(1.0), &[1.0, 0.5]).unwrap();
        assert!((r.scalar - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sectional_examples() {
        let geo = PointGeometry::compute(&sphere(2.0), &[1.0, 0.0]).unwrap();
        for (u, v) in [([1.0, 0.0], [0.0, 1.0]), ([1.0, 2.0], [-0.5, 0.3])] {
            let k = sectional_curvature(&geo.lowered.components, &geo.metric, &u, &v).unwrap();
            assert!((k - 0.25).abs() < 1e-12);
        }
        let geo = PointGeometry::compute(&euclidean(3), &[0.0; 3]).unwrap();
        let k = sectional_curvature(
            &geo.lowered.components,
            &geo.metric,
            &[1.0, 0.0, 0.0],
            &[0.0, 1.0, 1.0],
        )
        .unwrap();
        assert_eq!(k, 0.0);

        let geo = PointGeometry::compute(&de_sitter(2.0), &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let k = sectional_curvature(
            &geo.lowered.components,
            &geo.metric,
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        assert!((k - 0.25).abs() < 1e-10);
    }

    #[test]
    fn sectional_is_gl2_invariant_and_rejects_degenerate_planes() {
        let geo = PointGeometry::compute(&de_sitter(2.0), &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let (l, g) = (&geo.lowered.components, &geo.metric);
        let u = [0.2, 1.0, 0.3, -0.1];
        let v = [0.0, 0.4, 1.0, 0.7];
        let k0 = sectional_curvature(l, g, &u, &v).unwrap();
        let (p, q, r, s) = (2.0, -1.0, 0.5, 3.0);
        let u2: Vec<f64> = (0..4).map(|i| p * u[i] + q * v[i]).collect();
        let v2: Vec<f64> = (0..4).map(|i| r * u[i] + s * v[i]).collect();
        let k1 = sectional_curvature(l, g, &u2, &v2).unwrap();
        assert!((k0 - k1).abs() < 1e-10);

        assert!(matches!(
            sectional_curvature(l, g, &u, &u),
            Err(Error::DegeneratePlane { .. })
        ));
    }

    #[test]
    fn gaussian_curvature_examples() {
        assert!((gaussian_curvature_2d(&sphere(1.0), &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        let k = gaussian_curvature_2d(&hyperbolic_plane(), &[0.3, 1.7]).unwrap();
        assert!((k + 1.0).abs() < 1e-12);
        let s3 = sphere(3.0);
        let k = gaussian_curvature_2d(&s3, &[0.7, 0.0]).unwrap();
        let r = ricci_scalar_at(&s3, &[0.7, 0.0]).unwrap().scalar;
        assert!((k - 1.0 / 9.0).abs() < 1e-12);
        assert!((k - r / 2.0).abs() < 1e-12);
        assert!(gaussian_curvature_2d(&euclidean(3), &[0.0; 3]).is_err());
    }
}
