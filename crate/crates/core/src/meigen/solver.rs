use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    biquadratic, contract_x, contract_y, dot, meig_residual, norm, normalized, MEigentriple,
    Provenance, SolverConfig,
};
use crate::error::{Error, Result};
use crate::tensor::Rank4;

/// Which eigenvector of the contracted matrix a half-step moves to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Branch {
    /// k-th smallest eigenvalue.
    Rank(usize),
    /// Eigenvector with the largest overlap with the current iterate.
    Follow,
    /// No alternating phase; Newton from the random start reaches saddle
    /// triples that alternating updates are repelled from.
    Newton,
}

/// Starts cycle through the largest, smallest, following and then the
/// interior ranks, so the first few starts already cover the extremes.
fn branch_for(start: usize, m: usize) -> Branch {
    let order: Vec<Branch> = [Branch::Rank(m - 1), Branch::Rank(0), Branch::Follow, Branch::Newton]
        .into_iter()
        .chain((1..m.saturating_sub(2)).map(Branch::Rank))
        .collect();
    order[start % order.len()]
}

/// Residual below which alternating updates hand over to Newton polishing.
const POLISH_THRESHOLD: f64 = 1e-4;
const POLISH_ITERATIONS: usize = 60;
const NEWTON_ITERATIONS: usize = 200;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverOutcome {
    /// Sorted by `zeta`, descending.
    pub triples: Vec<MEigentriple>,
    pub starts: usize,
    pub converged: usize,
    pub discarded: usize,
    /// Converged Newton runs seeded from eigenvectors of converged triples.
    pub explored: usize,
}

/// Multistart alternating-eigenvector search for M-eigentriples of the frame
/// tensor `t`. `signs` is the frame metric, used only to label causal
/// characters; vectors are normalized in the Euclidean sense.
pub fn solve_meigen(t: &Rank4, signs: &[f64], config: &SolverConfig) -> Result<SolverOutcome> {
    config.validate()?;
    let m = t.dim();
    if signs.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: signs.len() });
    }
    if m == 0 {
        return Err(Error::InvalidArgument("empty tensor".into()));
    }
    if t.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("tensor has non-finite entries".into()));
    }
    let tol = config.tolerance * tensor_scale(t);

    let mut found = Vec::new();
    let mut best_residual = f64::INFINITY;
    for start in 0..config.starts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(start as u64);
        let branch = branch_for(start, m);
        let x0 = random_unit(&mut rng, m);
        let mut y0 = random_unit(&mut rng, m);
        if branch != Branch::Follow && m > 1 {
            y0 = orthogonalized(&y0, &x0);
        }
        let (x, y, res) = run_start(t, x0, y0, branch, config, tol);
        best_residual = best_residual.min(res);
        if res <= tol {
            found.push(candidate(t, x, y, tol));
        }
    }
    let converged = found.len();
    if converged == 0 {
        return Err(Error::SolverFailure {
            starts: config.starts,
            converged: 0,
            best_residual,
        });
    }
    let explored = explore(t, &mut found, config, tol);

    found.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then_with(|| lex(&a.1, &b.1))
            .then_with(|| lex(&a.2, &b.2))
    });
    // (first member, lexicographically smallest member) per class; the
    // smallest member does not depend on which start happened to sort first
    let mut classes: Vec<(Candidate, Candidate)> = Vec::new();
    for cand in found {
        match classes.iter_mut().find(|(anchor, _)| same_class(anchor, &cand, config)) {
            Some((_, best)) => {
                if lex(&cand.1, &best.1).then_with(|| lex(&cand.2, &best.2)).is_lt() {
                    *best = cand;
                }
            }
            None => classes.push((cand.clone(), cand)),
        }
    }
    let mut reps: Vec<Candidate> = classes.into_iter().map(|(_, best)| best).collect();
    reps.reverse();
    let triples = reps
        .into_iter()
        .map(|(zeta, x, y)| MEigentriple::new(t, signs, zeta, x, y, Provenance::Iterative))
        .collect();
    Ok(SolverOutcome {
        triples,
        starts: config.starts,
        converged,
        discarded: config.starts - converged,
        explored,
    })
}

/// Thresholds are relative to the largest entry so that rescaling the
/// tensor rescales nothing but the eigenvalues.
fn tensor_scale(t: &Rank4) -> f64 {
    let s = t.max_abs();
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

type Candidate = (f64, Vec<f64>, Vec<f64>);

fn candidate(t: &Rank4, x: Vec<f64>, y: Vec<f64>, tol: f64) -> Candidate {
    let (x, y) = canonical(t, x, y, tol);
    (biquadratic(t, &x, &y) + 0.0, sign_normalized(x), sign_normalized(y))
}

/// Triples come in continuous families: `x = y` is a triple for every unit
/// `x`, and an orthogonal triple can be rotated inside its plane. Replaces a
/// converged pair by a fixed member of its family so that equal planes give
/// equal vectors.
fn canonical(t: &Rank4, x: Vec<f64>, y: Vec<f64>, tol: f64) -> (Vec<f64>, Vec<f64>) {
    let m = x.len();
    let c = dot(&x, &y);
    let mut e1 = vec![0.0; m];
    e1[0] = 1.0;
    let proposal = if 1.0 - c.abs() < 1e-9 {
        (e1.clone(), e1)
    } else if c.abs() < 1e-8 {
        // axis with the largest projection onto span{x, y}
        let k = (0..m)
            .max_by(|&i, &j| {
                (x[i].hypot(y[i]) - x[j].hypot(y[j]))
                    .partial_cmp(&0.0)
                    .unwrap()
                    .then(j.cmp(&i))
            })
            .unwrap();
        let r = x[k].hypot(y[k]);
        let (cs, sn) = (x[k] / r, y[k] / r);
        let u: Vec<f64> = (0..m).map(|i| cs * x[i] + sn * y[i]).collect();
        let v: Vec<f64> = (0..m).map(|i| -sn * x[i] + cs * y[i]).collect();
        (u, v)
    } else {
        return (x, y);
    };
    let (u, v, res) = polish(t, proposal.0, proposal.1, tol, POLISH_ITERATIONS);
    if res <= tol {
        (u, v)
    } else {
        (x, y)
    }
}

fn same_class(a: &Candidate, b: &Candidate, config: &SolverConfig) -> bool {
    (a.0 - b.0).abs() <= config.dedup_tolerance
        && (!config.distinct_vectors
            || sign_distance(&a.1, &b.1) + sign_distance(&a.2, &b.2) <= config.dedup_tolerance)
}

/// Replaces one vector of each new class by every eigenvector of its
/// restricted contraction and polishes the result. On tensors whose triples
/// form a lattice of planes this reaches all of them from any one.
fn explore(t: &Rank4, found: &mut Vec<Candidate>, config: &SolverConfig, tol: f64) -> usize {
    let m = t.dim();
    if m < 2 {
        return 0;
    }
    let budget = 2 * m * m;
    let mut queue: Vec<Candidate> = Vec::new();
    for c in found.iter() {
        if !queue.iter().any(|q| same_class(q, c, config)) {
            queue.push(c.clone());
        }
    }
    let mut explored = 0;
    let mut next = 0;
    while next < queue.len() && next < budget {
        let (_, x, y) = queue[next].clone();
        next += 1;
        let mut seeds = Vec::new();
        for v in restricted_eigen(&contract_y(t, &y), &y).1 {
            seeds.push((v, y.clone()));
        }
        for w in restricted_eigen(&contract_x(t, &x), &x).1 {
            seeds.push((x.clone(), w));
        }
        for (x0, y0) in seeds {
            let (x1, y1, res) = polish(t, x0, y0, tol, POLISH_ITERATIONS);
            if res > tol {
                continue;
            }
            explored += 1;
            let cand = candidate(t, x1, y1, tol);
            if !queue.iter().any(|q| same_class(q, &cand, config)) {
                queue.push(cand.clone());
            }
            found.push(cand);
        }
    }
    explored
}

fn random_unit(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        if norm(&v) > 1e-6 {
            return normalized(&v);
        }
    }
}

fn orthogonalized(v: &[f64], against: &[f64]) -> Vec<f64> {
    let c = dot(v, against);
    let w: Vec<f64> = v.iter().zip(against).map(|(a, b)| a - c * b).collect();
    if norm(&w) > 1e-8 {
        normalized(&w)
    } else {
        v.to_vec()
    }
}

fn lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).unwrap() {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn sign_distance(a: &[f64], b: &[f64]) -> f64 {
    let plus: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let minus: f64 = a.iter().zip(b).map(|(x, y)| (x + y).powi(2)).sum::<f64>().sqrt();
    plus.min(minus)
}

pub(crate) fn sign_normalized(mut v: Vec<f64>) -> Vec<f64> {
    if let Some(first) = v.iter().find(|c| c.abs() > 1e-9) {
        if *first < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
    }
    v.iter_mut().for_each(|c| *c += 0.0);
    v
}

fn max_residual(t: &Rank4, x: &[f64], y: &[f64]) -> f64 {
    let r = meig_residual(t, biquadratic(t, x, y), x, y);
    r[0].max(r[1])
}

fn run_start(
    t: &Rank4,
    mut x: Vec<f64>,
    mut y: Vec<f64>,
    branch: Branch,
    config: &SolverConfig,
    tol: f64,
) -> (Vec<f64>, Vec<f64>, f64) {
    if branch == Branch::Newton {
        return polish(t, x, y, tol, NEWTON_ITERATIONS);
    }
    let mut res = f64::INFINITY;
    for _ in 0..config.max_iterations {
        x = half_step(&contract_y(t, &y), &x, &y, branch, config.shift);
        y = half_step(&contract_x(t, &x), &y, &x, branch, config.shift);
        res = max_residual(t, &x, &y);
        if res <= tol || res <= POLISH_THRESHOLD * tensor_scale(t) {
            break;
        }
    }
    if res > tol {
        (x, y, res) = polish(t, x, y, tol, POLISH_ITERATIONS);
    }
    (x, y, res)
}

/// Moves `current` into the selected eigenspace of `a`, or takes one shifted
/// power step when a shift is configured. `partner` always lies in the kernel
/// of `a`; ranked branches work on its orthogonal complement so they do not
/// collapse onto the trivial `x = y` family.
fn half_step(
    a: &DMatrix<f64>,
    current: &[f64],
    partner: &[f64],
    branch: Branch,
    shift: Option<f64>,
) -> Vec<f64> {
    if let (Branch::Rank(k), None) = (branch, shift) {
        if a.nrows() > 1 {
            let (vals, vecs) = restricted_eigen(a, partner);
            let mut order: Vec<usize> = (0..vals.len()).collect();
            order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
            return cluster_projection(&vals, &vecs, order[k.min(order.len() - 1)], current);
        }
    }
    let m = a.nrows();
    if let Some(tau) = shift {
        let lowest = branch == Branch::Rank(0) && m > 1;
        let s = if lowest { -tau } else { tau };
        let shifted = a + DMatrix::identity(m, m) * s;
        let v: Vec<f64> = (&shifted * DVector::from_column_slice(current)).iter().copied().collect();
        let v = if lowest { v.iter().map(|c| -c).collect() } else { v };
        if norm(&v) > 1e-300 {
            return aligned(normalized(&v), current);
        }
        return current.to_vec();
    }
    let eig = SymmetricEigen::new(a.clone());
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let vecs: Vec<Vec<f64>> =
        (0..m).map(|k| eig.eigenvectors.column(k).iter().copied().collect()).collect();
    let target = (0..m)
        .max_by(|&i, &j| dot(&vecs[i], current).abs().partial_cmp(&dot(&vecs[j], current).abs()).unwrap())
        .unwrap();
    cluster_projection(&vals, &vecs, target, current)
}

/// Projects `current` onto the eigenspace of `vals[target]`, treating
/// eigenvalues within a relative 1e-9 as equal.
fn cluster_projection(vals: &[f64], vecs: &[Vec<f64>], target: usize, current: &[f64]) -> Vec<f64> {
    let scale = vals.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    let cluster = 1e-9 * scale.max(1e-12);
    let lambda = vals[target];
    let mut proj = vec![0.0; current.len()];
    for (k, v) in vecs.iter().enumerate() {
        if (vals[k] - lambda).abs() <= cluster {
            let c = dot(v, current);
            proj.iter_mut().zip(v).for_each(|(p, q)| *p += c * q);
        }
    }
    let v = if norm(&proj) > 1e-8 { normalized(&proj) } else { vecs[target].clone() };
    aligned(v, current)
}

/// Eigenpairs of `a` restricted to the orthogonal complement of `partner`.
fn restricted_eigen(a: &DMatrix<f64>, partner: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = a.nrows();
    let mut seed = DMatrix::zeros(m, m + 1);
    seed.set_column(0, &DVector::from_column_slice(partner));
    seed.view_mut((0, 1), (m, m)).copy_from(&DMatrix::identity(m, m));
    let q = seed.qr().q();
    let basis = q.columns(1, m - 1).into_owned();
    let eig = SymmetricEigen::new(basis.transpose() * a * &basis);
    let vecs = (0..m - 1)
        .map(|k| (&basis * eig.eigenvectors.column(k)).iter().copied().collect())
        .collect();
    (eig.eigenvalues.iter().copied().collect(), vecs)
}
fn aligned(mut v: Vec<f64>, reference: &[f64]) -> Vec<f64> {
    if dot(&v, reference) < 0.0 {
        v.iter_mut().for_each(|c| *c = -*c);
    }
    v
}

/// Gauss-Newton on the stationarity system
/// `M(y)x - zeta x = 0`, `N(x)y - zeta y = 0`, `|x|^2 = |y|^2 = 1`
/// with `zeta = f(x, y)` re-evaluated after every step.
fn polish(
    t: &Rank4,
    mut x: Vec<f64>,
    mut y: Vec<f64>,
    tol: f64,
    iterations: usize,
) -> (Vec<f64>, Vec<f64>, f64) {
    let m = t.dim();
    let mut res = max_residual(t, &x, &y);
    for _ in 0..iterations {
        if res <= tol {
            break;
        }
        let zeta = biquadratic(t, &x, &y);
        let my = contract_y(t, &y);
        let nx = contract_x(t, &x);
        let xv = DVector::from_column_slice(&x);
        let yv = DVector::from_column_slice(&y);
        let f1 = &my * &xv - &xv * zeta;
        let f2 = &nx * &yv - &yv * zeta;

        let rows = 2 * m + 2;
        let cols = 2 * m + 1;
        let mut jac = DMatrix::zeros(rows, cols);
        let mut rhs = DVector::zeros(rows);
        for i in 0..m {
            rhs[i] = -f1[i];
            rhs[m + i] = -f2[i];
            for k in 0..m {
                jac[(i, k)] = my[(i, k)] - if i == k { zeta } else { 0.0 };
                jac[(m + i, m + k)] = nx[(i, k)] - if i == k { zeta } else { 0.0 };
            }
            jac[(i, 2 * m)] = -x[i];
            jac[(m + i, 2 * m)] = -y[i];
            jac[(2 * m, i)] = x[i];
            jac[(2 * m + 1, m + i)] = y[i];
        }
        rhs[2 * m] = -(dot(&x, &x) - 1.0) / 2.0;
        rhs[2 * m + 1] = -(dot(&y, &y) - 1.0) / 2.0;
        for i in 0..m {
            for p in 0..m {
                let mut dxy = 0.0;
                let mut dyx = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        // d(M(y)x)_i / dy_p
                        dxy += t[(i, p, a, b)] * x[a] * y[b] + t[(i, a, b, p)] * y[a] * x[b];
                        // d(N(x)y)_i / dx_p
                        dyx += t[(p, a, b, i)] * y[a] * x[b] + t[(a, b, p, i)] * x[a] * y[b];
                    }
                }
                jac[(i, m + p)] = dxy;
                jac[(m + i, p)] = dyx;
            }
        }
        let svd = jac.svd(true, true);
        let cutoff = 1e-12 * svd.singular_values.max().max(1e-300);
        let step = match svd.solve(&rhs, cutoff) {
            Ok(s) => s,
            Err(_) => break,
        };
        let nx_: Vec<f64> = (0..m).map(|i| x[i] + step[i]).collect();
        let ny_: Vec<f64> = (0..m).map(|i| y[i] + step[m + i]).collect();
        if norm(&nx_) < 1e-12 || norm(&ny_) < 1e-12 {
            break;
        }
        x = normalized(&nx_);
        y = normalized(&ny_);
        let next = max_residual(t, &x, &y);
        if !next.is_finite() {
            break;
        }
        res = next;
    }
    (x, y, res)
}
