use nalgebra::SymmetricEigen;

use super::solver::sign_normalized;
use super::{biquadratic, contract_x, contract_y, dot, meig_residual, normalized, MEigentriple, Provenance};
use crate::error::{Error, Result};
use crate::tensor::Rank4;

const REFINE_ITERATIONS: usize = 20;
const ACCEPT_RESIDUAL: f64 = 1e-6;
const BUCKET: f64 = 1e-5;

/// Exhaustive grid scan for M-eigentriples in dimension 2 or 3.
///
/// For every grid direction `x` (one hemisphere, since `x ~ -x`) each
/// eigenvector `y` of `N(x)` makes the second equation exact; grid local
/// minima of the first-equation defect are refined by a fixed number of
/// alternating nearest-eigenvector steps.
pub fn brute_oracle(t: &Rank4, signs: &[f64], grid_degrees: f64) -> Result<Vec<MEigentriple>> {
    let m = t.dim();
    if !(2..=3).contains(&m) {
        return Err(Error::UnsupportedDimension {
            operation: "brute-force M-eigen oracle",
            dim: m,
        });
    }
    if !(grid_degrees > 0.0 && grid_degrees <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "oracle grid must be in (0, 1] degrees, got {grid_degrees}"
        )));
    }
    let step = grid_degrees.to_radians();
    let grid = Grid::new(m, step);
    let scale = t.max_abs().max(1.0);

    // defect[k][node], eigen data per node
    let mut nodes: Vec<Node> = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let x = grid.point(idx);
        let eig = SymmetricEigen::new(contract_x(t, &x));
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let branches = order
            .iter()
            .map(|&k| {
                let y: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
                let mu = eig.eigenvalues[k];
                let mx = contract_y(t, &y) * nalgebra::DVector::from_column_slice(&x);
                let defect = mx.iter().zip(&x).map(|(a, b)| (a - mu * b).powi(2)).sum::<f64>().sqrt();
                (mu, y, defect)
            })
            .collect();
        nodes.push(Node { x, branches });
    }

    // best local minimum per (branch, value bucket)
    let mut candidates: std::collections::BTreeMap<(usize, i64), (f64, usize)> = Default::default();
    for idx in 0..grid.len() {
        for k in 0..m {
            let d = nodes[idx].branches[k].2;
            if grid.neighbours(idx).iter().any(|&n| nodes[n].branches[k].2 < d) {
                continue;
            }
            let key = (k, (nodes[idx].branches[k].0 / (BUCKET * scale)).round() as i64);
            let entry = candidates.entry(key).or_insert((d, idx));
            if d < entry.0 {
                *entry = (d, idx);
            }
        }
    }

    let mut out: Vec<MEigentriple> = Vec::new();
    for (&(k, _), &(_, idx)) in &candidates {
        let mut x = nodes[idx].x.clone();
        let mut y = nodes[idx].branches[k].1.clone();
        for _ in 0..REFINE_ITERATIONS {
            x = nearest_eigenvector(&contract_y(t, &y), &x);
            y = nearest_eigenvector(&contract_x(t, &x), &y);
        }
        let zeta = biquadratic(t, &x, &y);
        let r = meig_residual(t, zeta, &x, &y);
        if r[0].max(r[1]) > ACCEPT_RESIDUAL * scale {
            continue;
        }
        if out.iter().any(|o| (o.zeta - zeta).abs() <= ACCEPT_RESIDUAL * scale) {
            continue;
        }
        out.push(MEigentriple::new(
            t,
            signs,
            zeta,
            sign_normalized(x),
            sign_normalized(y),
            Provenance::Oracle,
        ));
    }
    out.sort_by(|a, b| b.zeta.partial_cmp(&a.zeta).unwrap());
    Ok(out)
}

struct Node {
    x: Vec<f64>,
    /// (eigenvalue of N(x), eigenvector, first-equation defect), ascending
    branches: Vec<(f64, Vec<f64>, f64)>,
}

fn nearest_eigenvector(a: &nalgebra::DMatrix<f64>, current: &[f64]) -> Vec<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let m = a.nrows();
    let best = (0..m)
        .max_by(|&i, &j| {
            let oi = dot(eig.eigenvectors.column(i).as_slice(), current).abs();
            let oj = dot(eig.eigenvectors.column(j).as_slice(), current).abs();
            oi.partial_cmp(&oj).unwrap()
        })
        .unwrap();
    let mut v = normalized(eig.eigenvectors.column(best).as_slice());
    if dot(&v, current) < 0.0 {
        v.iter_mut().for_each(|c| *c = -*c);
    }
    v
}

/// Half-circle (m = 2) or upper-hemisphere (m = 3) grid.
struct Grid {
    m: usize,
    n_theta: usize,
    n_phi: usize,
    step: f64,
}

impl Grid {
    fn new(m: usize, step: f64) -> Self {
        let n_phi = (std::f64::consts::TAU / step).ceil() as usize;
        let n_theta = (std::f64::consts::FRAC_PI_2 / step).ceil() as usize + 1;
        if m == 2 {
            Grid { m, n_theta: 1, n_phi: (std::f64::consts::PI / step).ceil() as usize, step }
        } else {
            Grid { m, n_theta, n_phi, step }
        }
    }

    fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    fn point(&self, idx: usize) -> Vec<f64> {
        let (i, j) = (idx / self.n_phi, idx % self.n_phi);
        if self.m == 2 {
            let a = j as f64 * std::f64::consts::PI / self.n_phi as f64;
            return vec![a.cos(), a.sin()];
        }
        let theta = (i as f64 * self.step).min(std::f64::consts::FRAC_PI_2);
        let phi = j as f64 * std::f64::consts::TAU / self.n_phi as f64;
        vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
    }

    fn neighbours(&self, idx: usize) -> Vec<usize> {
        let (i, j) = (idx / self.n_phi, idx % self.n_phi);
        let mut out = Vec::with_capacity(8);
        if self.m == 2 {
            // x ~ -x closes the half circle into a loop
            out.push((j + 1) % self.n_phi);
            out.push((j + self.n_phi - 1) % self.n_phi);
            return out;
        }
        for di in [-1i64, 0, 1] {
            for dj in [-1i64, 0, 1] {
                if di == 0 && dj == 0 {
                    continue;
                }
                let ni = i as i64 + di;
                if ni < 0 || ni >= self.n_theta as i64 {
                    continue;
                }
                let nj = (j as i64 + dj).rem_euclid(self.n_phi as i64) as usize;
                out.push(ni as usize * self.n_phi + nj);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::constant_curvature_tensor;
    use nalgebra::DMatrix;

    #[test]
    fn unit_two_sphere() {
        let t = constant_curvature_tensor(&DMatrix::identity(2, 2), 1.0);
        let z: Vec<f64> = brute_oracle(&t, &[1.0, 1.0], 1.0).unwrap().iter().map(|t| t.zeta).collect();
        assert_eq!(z.len(), 2);
        assert!((z[0] - 1.0).abs() < 1e-9 && z[1].abs() < 1e-9);
    }

    #[test]
    fn unit_three_sphere() {
        let t = constant_curvature_tensor(&DMatrix::identity(3, 3), 1.0);
        let out = brute_oracle(&t, &[1.0; 3], 1.0).unwrap();
        let ortho = out.iter().find(|tr| tr.overlap().abs() < 1e-6).unwrap();
        assert!((ortho.zeta - 1.0).abs() < 1e-9);
        assert!(out.iter().all(|tr| (tr.zeta - 1.0).abs() < 1e-9 || tr.zeta.abs() < 1e-9));
    }

    #[test]
    fn zero_tensor() {
        let out = brute_oracle(&Rank4::zeros(3), &[1.0; 3], 1.0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].zeta, 0.0);
    }

    #[test]
    fn rejects_dimension_four_and_coarse_grid() {
        assert!(matches!(
            brute_oracle(&Rank4::zeros(4), &[1.0; 4], 1.0),
            Err(Error::UnsupportedDimension { .. })
        ));
        assert!(brute_oracle(&Rank4::zeros(2), &[1.0; 2], 5.0).is_err());
    }
}
