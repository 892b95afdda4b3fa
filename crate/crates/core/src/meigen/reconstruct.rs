use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curvature::{check_symmetries, constant_curvature_tensor};
use crate::error::{Error, Result};
use crate::tensor::Rank4;

/// `m^2 (m^2 - 1) / 12`
pub fn curvature_space_dim(m: usize) -> usize {
    m * m * (m * m).saturating_sub(1) / 12
}

/// Orthonormal basis (in the Frobenius sense) of algebraic curvature tensors.
///
/// Starts from the pair-symmetric tensors `P_(ab)(cd)` built on unordered
/// index pairs, removes their Bianchi part, and keeps an orthonormal basis of
/// the span.
pub fn curvature_basis(m: usize) -> Result<Vec<Rank4>> {
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| ((a + 1)..m).map(move |b| (a, b))).collect();
    let mut raw = Vec::new();
    for (p, &(a, b)) in pairs.iter().enumerate() {
        for &(c, d) in &pairs[p..] {
            let mut t = Rank4::zeros(m);
            let mut put = |i: (usize, usize), j: (usize, usize)| {
                for (s1, (i0, i1)) in [(1.0, i), (-1.0, (i.1, i.0))] {
                    for (s2, (j0, j1)) in [(1.0, j), (-1.0, (j.1, j.0))] {
                        t[(i0, i1, j0, j1)] += s1 * s2;
                    }
                }
            };
            put((a, b), (c, d));
            if (a, b) != (c, d) {
                put((c, d), (a, b));
            }
            raw.push(bianchi_projected(&t));
        }
    }
    let expected = curvature_space_dim(m);
    if raw.is_empty() {
        return if expected == 0 { Ok(Vec::new()) } else { Err(Error::RankDeficient { rank: 0, expected }) };
    }
    let len = m.pow(4);
    let a = DMatrix::from_fn(len, raw.len(), |i, j| raw[j].as_slice()[i]);
    let svd = a.svd(true, false);
    let u = svd.u.expect("requested U");
    let top = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * top).count();
    if rank != expected {
        return Err(Error::RankDeficient { rank, expected });
    }
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].partial_cmp(&svd.singular_values[i]).unwrap());
    Ok(order[..rank]
        .iter()
        .map(|&k| {
            let col = u.column(k);
            Rank4::from_fn(m, |a, b, c, d| col[((a * m + b) * m + c) * m + d])
        })
        .collect())
}

fn bianchi_projected(t: &Rank4) -> Rank4 {
    Rank4::from_fn(t.dim(), |a, b, c, d| {
        t[(a, b, c, d)] - (t[(a, b, c, d)] + t[(b, c, a, d)] + t[(c, a, b, d)]) / 3.0
    })
}

/// Recovers the unique algebraic curvature tensor `R` with
/// `q(u, v) = R(u, v, u, v)` from samples of `q`.
pub fn reconstruct_from_biquadratic(q: impl Fn(&[f64], &[f64]) -> f64, m: usize) -> Result<Rank4> {
    if m < 2 {
        return Ok(Rank4::zeros(m));
    }
    let basis = curvature_basis(m)?;
    let mut probes: Vec<Vec<f64>> = Vec::new();
    for i in 0..m {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        probes.push(e);
    }
    for i in 0..m {
        for j in (i + 1)..m {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; m];
                e[i] = 1.0;
                e[j] = s;
                probes.push(e);
            }
        }
    }
    let mut samples: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (i, u) in probes.iter().enumerate() {
        for v in &probes[i + 1..] {
            samples.push((u.clone(), v.clone()));
        }
    }
    let a = DMatrix::from_fn(samples.len(), basis.len(), |r, k| {
        let (u, v) = &samples[r];
        basis[k].contract4(u, v, u, v)
    });
    let b = DVector::from_iterator(samples.len(), samples.iter().map(|(u, v)| q(u, v)));
    let svd = a.clone().svd(true, true);
    let top = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * top).count();
    if rank != basis.len() {
        return Err(Error::RankDeficient { rank, expected: basis.len() });
    }
    let coeffs = svd
        .solve(&b, 1e-10 * top)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let residual = (&a * &coeffs - &b).norm() / b.norm().max(1e-300);
    if b.norm() > 0.0 && residual > 1e-6 {
        return Err(Error::NotCurvatureType { residual });
    }
    let mut out = Rank4::zeros(m);
    for (c, t) in coeffs.iter().zip(&basis) {
        out = out.add(&t.scaled(*c));
    }
    Ok(out)
}

/// Sum of three random `h_ac h_bd - h_ad h_bc` terms with symmetric `h`;
/// such sums span the algebraic curvature tensors.
pub fn random_curvature_tensor(m: usize, rng: &mut impl Rng) -> Rank4 {
    let mut out = Rank4::zeros(m);
    for _ in 0..3 {
        let b = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        let h = (&b + b.transpose()) * 0.5;
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        out = out.add(&constant_curvature_tensor(&h, sign));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTripReport {
    pub dimension: usize,
    pub seed: u64,
    pub space_dimension: usize,
    pub max_deviation: f64,
    pub symmetry_defect: f64,
}

/// Hides a random curvature tensor behind its biquadratic form and
/// reconstructs it.
pub fn reconstruction_round_trip(m: usize, seed: u64) -> Result<RoundTripReport> {
    if !(2..=8).contains(&m) {
        return Err(Error::InvalidArgument(format!("dimension must be in 2..=8, got {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden = random_curvature_tensor(m, &mut rng);
    let r = reconstruct_from_biquadratic(|u, v| hidden.contract4(u, v, u, v), m)?;
    Ok(RoundTripReport {
        dimension: m,
        seed,
        space_dimension: curvature_space_dim(m),
        max_deviation: r.max_abs_diff(&hidden),
        symmetry_defect: check_symmetries(&r).worst(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::conformally_flat_lowered;

    #[test]
    fn basis_dimensions() {
        for (m, d) in [(2, 1), (3, 6), (4, 20), (5, 50)] {
            assert_eq!(curvature_space_dim(m), d);
            let basis = curvature_basis(m).unwrap();
            assert_eq!(basis.len(), d);
            for b in &basis {
                assert!(check_symmetries(b).holds(1e-12));
            }
        }
    }

    #[test]
    fn two_dimensional_sphere() {
        let t = constant_curvature_tensor(&DMatrix::identity(2, 2), 0.25);
        let r = reconstruct_from_biquadratic(|u, v| t.contract4(u, v, u, v), 2).unwrap();
        assert!((r[(0, 1, 0, 1)] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn zero_form() {
        let r = reconstruct_from_biquadratic(|_, _| 0.0, 3).unwrap();
        assert_eq!(r.max_abs(), 0.0);
    }

    #[test]
    fn hidden_conformally_flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = DMatrix::identity(4, 4);
        let b = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let ric = (&b + b.transpose()) * 0.5;
        let hidden = conformally_flat_lowered(&g, &ric, &g);
        let r = reconstruct_from_biquadratic(|u, v| hidden.contract4(u, v, u, v), 4).unwrap();
        assert!(r.max_abs_diff(&hidden) < 1e-8);
    }

    #[test]
    fn random_round_trips() {
        for m in 2..=5 {
            let rep = reconstruction_round_trip(m, 11).unwrap();
            assert!(rep.max_deviation < 1e-8, "{rep:?}");
            assert!(rep.symmetry_defect < 1e-9);
        }
    }

    #[test]
    fn rejects_non_curvature_form() {
        let err = reconstruct_from_biquadratic(|u, _| u[0].powi(4), 3).unwrap_err();
        assert!(matches!(err, Error::NotCurvatureType { .. }));
    }
}
