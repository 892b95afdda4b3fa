//! Metric fields on a single coordinate chart.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse_expr, ChartBindings, Expr};
use crate::tensor::{matrix_max_abs, Rank3, Rank4};

/// Relative determinant threshold below which g(p) counts as singular.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signature {
    Riemannian,
    Lorentzian,
}

impl Signature {
    pub fn expected_negative(self) -> usize {
        match self {
            Signature::Riemannian => 0,
            Signature::Lorentzian => 1,
        }
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Signature::Riemannian => "riemannian",
            Signature::Lorentzian => "lorentzian",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    Symbolic,
    FiniteDifference,
}

/// Pointwise evaluator for metrics given in closed form by code.
pub type MetricFn = dyn Fn(&[f64], &BTreeMap<String, f64>) -> DMatrix<f64> + Send + Sync;

struct SymbolicComponents {
    g: Vec<Expr>,
    /// `(a, b, c)` holds d_c g_ab.
    first: Vec<Expr>,
    /// `(a, b, c, d)` holds d_d d_c g_ab.
    second: Vec<Expr>,
}

#[derive(Clone)]
enum Components {
    Symbolic(Arc<SymbolicComponents>),
    Builtin(Arc<MetricFn>),
}

/// A metric tensor field g_ab on one coordinate chart.
///
/// Immutable after construction; every query is a pure function of the
/// point.
#[derive(Clone)]
pub struct MetricField {
    name: String,
    coordinates: Vec<String>,
    parameters: BTreeMap<String, f64>,
    signature: Signature,
    components: Components,
    mode: DerivativeMode,
    domain: Vec<Option<(f64, f64)>>,
    factor: f64,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("name", &self.name)
            .field("coordinates", &self.coordinates)
            .field("parameters", &self.parameters)
            .field("signature", &self.signature)
            .field("mode", &self.mode)
            .field("factor", &self.factor)
            .finish()
    }
}

/// First and second partial derivatives of the metric at a point.
#[derive(Clone, Debug)]
pub struct MetricDerivatives {
    /// `(a, b, c)` holds d_c g_ab.
    pub first: Rank3,
    /// `(a, b, c, d)` holds d_d d_c g_ab.
    pub second: Rank4,
}

fn fd_step(x: f64) -> f64 {
    1e-6_f64.max(1e-6 * x.abs())
}

fn fd_step_second(x: f64) -> f64 {
    1e-4_f64.max(1e-4 * x.abs())
}

impl MetricField {
    /// Builds a metric from component expressions. `components[a][b]` must
    /// equal `components[b][a]` structurally.
    pub fn symbolic(
        name: impl Into<String>,
        coordinates: Vec<String>,
        signature: Signature,
        parameters: BTreeMap<String, f64>,
        components: Vec<Vec<Expr>>,
    ) -> Result<Self> {
        let m = coordinates.len();
        check_chart(&coordinates, &parameters)?;
        if components.len() != m || components.iter().any(|row| row.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: components.len(),
            });
        }
        let known: Vec<&str> = coordinates
            .iter()
            .chain(parameters.keys())
            .map(String::as_str)
            .collect();
        for (a, row) in components.iter().enumerate() {
            for (b, e) in row.iter().enumerate() {
                if b > a && *e != components[b][a] {
                    return Err(Error::MetricFile(format!(
                        "component [{a}][{b}] differs from [{b}][{a}]"
                    )));
                }
                if let Some(v) = e.free_vars().into_iter().find(|v| !known.contains(&v.as_str()))
                {
                    return Err(Error::UnboundVariable(v));
                }
            }
        }

        let mut g = Vec::with_capacity(m * m);
        for row in &components {
            g.extend(row.iter().cloned());
        }
        let mut first = vec![Expr::Num(0.0); m * m * m];
        let mut second = vec![Expr::Num(0.0); m * m * m * m];
        for a in 0..m {
            for b in a..m {
                for c in 0..m {
                    let d1 = g[a * m + b].diff(&coordinates[c]);
                    for d in c..m {
                        let d2 = d1.diff(&coordinates[d]);
                        for (x, y) in [(a, b), (b, a)] {
                            second[((x * m + y) * m + c) * m + d] = d2.clone();
                            second[((x * m + y) * m + d) * m + c] = d2.clone();
                        }
                    }
                    first[(a * m + b) * m + c] = d1.clone();
                    first[(b * m + a) * m + c] = d1;
                }
            }
        }
        Ok(MetricField {
            name: name.into(),
            domain: vec![None; m],
            coordinates,
            parameters,
            signature,
            components: Components::Symbolic(Arc::new(SymbolicComponents { g, first, second })),
            mode: DerivativeMode::Symbolic,
            factor: 1.0,
        })
    }

    /// Convenience constructor parsing component strings. Entries above the
    /// diagonal are authoritative; `None` below the diagonal mirrors them.
    pub fn from_strings(
        name: impl Into<String>,
        coordinates: &[&str],
        signature: Signature,
        parameters: &[(&str, f64)],
        components: &[&[Option<&str>]],
    ) -> Result<Self> {
        let coordinates: Vec<String> = coordinates.iter().map(|s| s.to_string()).collect();
        let parameters: BTreeMap<String, f64> =
            parameters.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let vars: Vec<&str> = coordinates
            .iter()
            .chain(parameters.keys())
            .map(String::as_str)
            .collect();
        let m = coordinates.len();
        let mut exprs = vec![vec![Expr::Num(0.0); m]; m];
        for a in 0..m {
            for b in a..m {
                let src = components
                    .get(a)
                    .and_then(|row| row.get(b))
                    .copied()
                    .flatten()
                    .unwrap_or("0");
                let e = parse_expr(src, &vars)?;
                if let Some(Some(lower)) = components.get(b).and_then(|row| row.get(a)) {
                    if parse_expr(lower, &vars)? != e {
                        return Err(Error::MetricFile(format!(
                            "component [{b}][{a}] does not match [{a}][{b}]"
                        )));
                    }
                }
                exprs[a][b] = e.clone();
                exprs[b][a] = e;
            }
        }
        MetricField::symbolic(name, coordinates, signature, parameters, exprs)
    }

    /// Metric given by a code closure. Derivatives use finite differences.
    pub fn from_fn(
        name: impl Into<String>,
        coordinates: Vec<String>,
        signature: Signature,
        parameters: BTreeMap<String, f64>,
        f: impl Fn(&[f64], &BTreeMap<String, f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        check_chart(&coordinates, &parameters)?;
        Ok(MetricField {
            name: name.into(),
            domain: vec![None; coordinates.len()],
            coordinates,
            parameters,
            signature,
            components: Components::Builtin(Arc::new(f)),
            mode: DerivativeMode::FiniteDifference,
            factor: 1.0,
        })
    }

    /// Restricts coordinate `index` to the open interval `(lo, hi)`.
    pub fn with_domain(mut self, index: usize, lo: f64, hi: f64) -> Self {
        self.domain[index] = Some((lo, hi));
        self
    }

    /// Selects the derivative mode. Closure metrics only support finite
    /// differences and ignore a request for symbolic derivatives.
    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        if matches!(self.components, Components::Symbolic(_)) {
            self.mode = mode;
        }
        self
    }

    /// Multiplies every component (and derivative) by `factor`.
    pub(crate) fn with_factor(mut self, factor: f64) -> Self {
        self.factor *= factor;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    pub fn coordinates(&self) -> &[String] {
        &self.coordinates
    }

    pub fn parameters(&self) -> &BTreeMap<String, f64> {
        &self.parameters
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn domain(&self) -> &[Option<(f64, f64)>] {
        &self.domain
    }

    pub fn is_symbolic(&self) -> bool {
        matches!(self.components, Components::Symbolic(_))
    }

    /// Component expressions including any constant factor, if symbolic.
    pub fn component_exprs(&self) -> Option<Vec<Vec<Expr>>> {
        let Components::Symbolic(s) = &self.components else {
            return None;
        };
        let m = self.dim();
        Some(
            (0..m)
                .map(|a| {
                    (0..m)
                        .map(|b| {
                            crate::expr::mul(Expr::Num(self.factor), s.g[a * m + b].clone())
                        })
                        .collect()
                })
                .collect(),
        )
    }

    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.len(),
            });
        }
        for (i, (&x, bounds)) in p.iter().zip(&self.domain).enumerate() {
            if !x.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "coordinate `{}` is not finite",
                    self.coordinates[i]
                )));
            }
            if let Some((lo, hi)) = *bounds {
                if !(x > lo && x < hi) {
                    return Err(Error::OutOfDomain {
                        coordinate: self.coordinates[i].clone(),
                        value: x,
                        lo,
                        hi,
                    });
                }
            }
        }
        Ok(())
    }

    fn bindings<'a>(&'a self, p: &'a [f64]) -> ChartBindings<'a> {
        ChartBindings {
            names: &self.coordinates,
            values: p,
            parameters: &self.parameters,
        }
    }

    fn eval_block(&self, exprs: &[Expr], p: &[f64]) -> Result<Vec<f64>> {
        let b = self.bindings(p);
        exprs
            .iter()
            .map(|e| e.eval(&b).map(|v| v * self.factor))
            .collect()
    }

    /// g(p) without validation.
    fn raw_metric(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.dim();
        match &self.components {
            Components::Symbolic(s) => {
                Ok(DMatrix::from_row_slice(m, m, &self.eval_block(&s.g, p)?))
            }
            Components::Builtin(f) => {
                let g = f(p, &self.parameters) * self.factor;
                if g.nrows() != m || g.ncols() != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        got: g.nrows(),
                    });
                }
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain {
                        subexpr: self.name.clone(),
                        reason: "non-finite metric component".into(),
                    });
                }
                Ok(g)
            }
        }
    }

    /// Symmetric matrix g_ab(p), validated for nondegeneracy and signature.
    pub fn metric_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(p)?;
        let g = self.raw_metric(p)?;
        validate_metric(&g, self.signature)?;
        Ok(g)
    }

    pub fn inverse_metric_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.metric_at(p)?;
        inverse_symmetric(&g)
    }

    pub fn orthonormal_frame_at(&self, p: &[f64]) -> Result<Frame> {
        let g = self.metric_at(p)?;
        Frame::from_metric(&g, self.signature)
    }

    fn stencil_check(&self, p: &[f64], c: usize, reach: f64) -> Result<()> {
        if let Some((lo, hi)) = self.domain[c] {
            if !(p[c] - reach > lo && p[c] + reach < hi) {
                return Err(Error::BoundaryProximity {
                    coordinate: self.coordinates[c].clone(),
                    step: reach,
                });
            }
        }
        Ok(())
    }

    fn shifted(p: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
        let mut q = p.to_vec();
        for &(i, h) in moves {
            q[i] += h;
        }
        q
    }

    /// d_c g_ab and d_d d_c g_ab at `p`.
    pub fn metric_derivatives_at(&self, p: &[f64]) -> Result<MetricDerivatives> {
        self.check_point(p)?;
        let m = self.dim();
        let mut first = Rank3::zeros(m);
        let mut second = Rank4::zeros(m);
        match (&self.components, self.mode) {
            (Components::Symbolic(s), DerivativeMode::Symbolic) => {
                let d1 = self.eval_block(&s.first, p)?;
                let d2 = self.eval_block(&s.second, p)?;
                for a in 0..m {
                    for b in 0..m {
                        for c in 0..m {
                            first[(a, b, c)] = d1[(a * m + b) * m + c];
                            for d in 0..m {
                                second[(a, b, c, d)] = d2[((a * m + b) * m + c) * m + d];
                            }
                        }
                    }
                }
            }
            (Components::Symbolic(s), DerivativeMode::FiniteDifference) => {
                for c in 0..m {
                    let h = fd_step(p[c]);
                    self.stencil_check(p, c, h)?;
                    let plus = self.raw_metric(&Self::shifted(p, &[(c, h)]))?;
                    let minus = self.raw_metric(&Self::shifted(p, &[(c, -h)]))?;
                    let dplus = self.eval_block(&s.first, &Self::shifted(p, &[(c, h)]))?;
                    let dminus = self.eval_block(&s.first, &Self::shifted(p, &[(c, -h)]))?;
                    for a in 0..m {
                        for b in 0..m {
                            first[(a, b, c)] = (plus[(a, b)] - minus[(a, b)]) / (2.0 * h);
                            for d in 0..m {
                                let k = (a * m + b) * m + d;
                                // d_c (d_d g_ab)
                                second[(a, b, d, c)] = (dplus[k] - dminus[k]) / (2.0 * h);
                            }
                        }
                    }
                }
                symmetrize_last_pair(&mut second);
            }
            (Components::Builtin(_), _) => {
                for c in 0..m {
                    let h = fd_step(p[c]);
                    self.stencil_check(p, c, fd_step_second(p[c]).max(h))?;
                    let plus = self.raw_metric(&Self::shifted(p, &[(c, h)]))?;
                    let minus = self.raw_metric(&Self::shifted(p, &[(c, -h)]))?;
                    for a in 0..m {
                        for b in 0..m {
                            first[(a, b, c)] = (plus[(a, b)] - minus[(a, b)]) / (2.0 * h);
                        }
                    }
                }
                let centre = self.raw_metric(p)?;
                for c in 0..m {
                    let hc = fd_step_second(p[c]);
                    for d in c..m {
                        let block = if c == d {
                            let plus = self.raw_metric(&Self::shifted(p, &[(c, hc)]))?;
                            let minus = self.raw_metric(&Self::shifted(p, &[(c, -hc)]))?;
                            (plus - &centre * 2.0 + minus) / (hc * hc)
                        } else {
                            let hd = fd_step_second(p[d]);
                            let pp = self.raw_metric(&Self::shifted(p, &[(c, hc), (d, hd)]))?;
                            let pm = self.raw_metric(&Self::shifted(p, &[(c, hc), (d, -hd)]))?;
                            let mp = self.raw_metric(&Self::shifted(p, &[(c, -hc), (d, hd)]))?;
                            let mm = self.raw_metric(&Self::shifted(p, &[(c, -hc), (d, -hd)]))?;
                            (pp - pm - mp + mm) / (4.0 * hc * hd)
                        };
                        for a in 0..m {
                            for b in 0..m {
                                second[(a, b, c, d)] = block[(a, b)];
                                second[(a, b, d, c)] = block[(a, b)];
                            }
                        }
                    }
                }
            }
        }
        Ok(MetricDerivatives { first, second })
    }
}

fn symmetrize_last_pair(t: &mut Rank4) {
    let m = t.dim();
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in (c + 1)..m {
                    let avg = 0.5 * (t[(a, b, c, d)] + t[(a, b, d, c)]);
                    t[(a, b, c, d)] = avg;
                    t[(a, b, d, c)] = avg;
                }
            }
        }
    }
}

fn check_chart(coordinates: &[String], parameters: &BTreeMap<String, f64>) -> Result<()> {
    if coordinates.len() < 2 {
        return Err(Error::UnsupportedDimension {
            operation: "metric field",
            dim: coordinates.len(),
        });
    }
    for (i, name) in coordinates.iter().enumerate() {
        if !crate::expr::is_valid_name(name) {
            return Err(Error::InvalidArgument(format!("invalid coordinate name `{name}`")));
        }
        if coordinates[..i].contains(name) || parameters.contains_key(name) {
            return Err(Error::InvalidArgument(format!("duplicate name `{name}`")));
        }
    }
    for (name, v) in parameters {
        if !crate::expr::is_valid_name(name) {
            return Err(Error::InvalidArgument(format!("invalid parameter name `{name}`")));
        }
        if !v.is_finite() {
            return Err(Error::InvalidParameter {
                name: name.clone(),
                message: "must be finite".into(),
            });
        }
    }
    Ok(())
}

/// Checks symmetry, nondegeneracy and signature of a metric matrix.
pub fn validate_metric(g: &DMatrix<f64>, signature: Signature) -> Result<()> {
    let m = g.nrows();
    let scale = matrix_max_abs(g);
    for a in 0..m {
        for b in (a + 1)..m {
            let dev = (g[(a, b)] - g[(b, a)]).abs();
            if dev > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::AsymmetricMetric {
                    row: a,
                    col: b,
                    deviation: dev,
                });
            }
        }
    }
    let det = g.clone().lu().determinant();
    let threshold = DEGENERACY_THRESHOLD * scale.powi(m as i32);
    if !(det.abs() > threshold) {
        return Err(Error::DegenerateMetric { det, threshold });
    }
    let eig = SymmetricEigen::new(g.clone());
    let negative = eig.eigenvalues.iter().filter(|&&v| v < 0.0).count();
    if negative != signature.expected_negative() {
        return Err(Error::SignatureMismatch {
            declared: signature.to_string(),
            negative,
        });
    }
    Ok(())
}

/// Inverse of a symmetric matrix, symmetrized to remove round-off skew.
pub fn inverse_symmetric(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = g.clone().try_inverse().ok_or(Error::DegenerateMetric {
        det: 0.0,
        threshold: DEGENERACY_THRESHOLD,
    })?;
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Pointwise orthonormal basis: columns of `matrix` are frame vectors in the
/// coordinate basis, and `matrix^T g matrix = diag(signs)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub matrix: DMatrix<f64>,
    pub signs: Vec<f64>,
}

impl Frame {
    pub fn identity(m: usize) -> Frame {
        Frame {
            matrix: DMatrix::identity(m, m),
            signs: vec![1.0; m],
        }
    }

    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    /// Frame from the eigendecomposition of `g`: negative directions first,
    /// then ascending |eigenvalue|; each column's first significant component
    /// is made positive.
    pub fn from_metric(g: &DMatrix<f64>, signature: Signature) -> Result<Frame> {
        validate_metric(g, signature)?;
        let m = g.nrows();
        let eig = SymmetricEigen::new(g.clone());
        let scale = matrix_max_abs(g);
        let mut order: Vec<usize> = (0..m).collect();
        let dominant = |k: usize| {
            let col = eig.eigenvectors.column(k);
            (0..m)
                .max_by(|&i, &j| {
                    col[i]
                        .abs()
                        .partial_cmp(&col[j].abs())
                        .unwrap()
                        .then(j.cmp(&i))
                })
                .unwrap()
        };
        order.sort_by(|&i, &j| {
            let (li, lj) = (eig.eigenvalues[i], eig.eigenvalues[j]);
            (lj < 0.0)
                .cmp(&(li < 0.0))
                .then_with(|| {
                    if (li.abs() - lj.abs()).abs() <= 1e-12 * scale {
                        std::cmp::Ordering::Equal
                    } else {
                        li.abs().partial_cmp(&lj.abs()).unwrap()
                    }
                })
                .then_with(|| dominant(i).cmp(&dominant(j)))
        });
        let mut matrix = DMatrix::zeros(m, m);
        let mut signs = Vec::with_capacity(m);
        for (col, &k) in order.iter().enumerate() {
            let lambda = eig.eigenvalues[k];
            let mut v = eig.eigenvectors.column(k).into_owned();
            if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
                if *first < 0.0 {
                    v = -v;
                }
            }
            matrix.set_column(col, &(v / lambda.abs().sqrt()));
            signs.push(lambda.signum());
        }
        Ok(Frame { matrix, signs })
    }

    /// Frame components of a coordinate vector: z = E^{-1} x.
    pub fn to_frame_vector(&self, x: &[f64]) -> Vec<f64> {
        let inv = self
            .matrix
            .clone()
            .try_inverse()
            .expect("frame matrix is invertible");
        (inv * nalgebra::DVector::from_column_slice(x)).iter().copied().collect()
    }

    /// Coordinate components of a frame vector: x = E z.
    pub fn to_coordinate_vector(&self, z: &[f64]) -> Vec<f64> {
        (&self.matrix * nalgebra::DVector::from_column_slice(z))
            .iter()
            .copied()
            .collect()
    }

    /// Max deviation of E^T g E from diag(signs).
    pub fn orthonormality_defect(&self, g: &DMatrix<f64>) -> f64 {
        let prod = self.matrix.transpose() * g * &self.matrix;
        let m = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let want = if i == j { self.signs[i] } else { 0.0 };
                worst = worst.max((prod[(i, j)] - want).abs());
            }
        }
        worst
    }
}
