//! Built-in metrics with known analytic facts and safe probe points.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};
use crate::metric::{MetricField, Signature};

pub const MAX_CATALOG_DIM: usize = 8;

/// Families accepted by [`get_metric`]; `_m` entries take the dimension as a
/// name suffix (`sphere_3`).
pub const FAMILIES: &[&str] = &[
    "euclidean_m",
    "sphere_m",
    "hyperbolic_m",
    "flat_torus_m",
    "de_sitter_static",
    "schwarzschild",
    "product_s2xs2",
    "conformal_flat_random",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KnownFacts {
    /// Constant sectional curvature.
    pub sectional: Option<f64>,
    pub scalar: Option<f64>,
    /// `k` in `R_ab = k g_ab`; `None` when the metric is not Einstein.
    pub einstein_k: Option<f64>,
    pub conformally_flat: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub metric: MetricField,
    pub facts: KnownFacts,
    pub probes: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    Euclidean(usize),
    Sphere(usize),
    Hyperbolic(usize),
    FlatTorus(usize),
    DeSitter,
    Schwarzschild,
    Product,
    ConformalRandom,
}

impl Family {
    fn parse(name: &str) -> Result<Self> {
        let fixed = match name {
            "de_sitter_static" => Some(Family::DeSitter),
            "schwarzschild" => Some(Family::Schwarzschild),
            "product_s2xs2" => Some(Family::Product),
            "conformal_flat_random" => Some(Family::ConformalRandom),
            _ => None,
        };
        if let Some(f) = fixed {
            return Ok(f);
        }
        let unknown = || Error::UnknownMetric(name.to_string());
        let (stem, dim) = name.rsplit_once('_').ok_or_else(unknown)?;
        let m: usize = dim.parse().map_err(|_| unknown())?;
        let make: fn(usize) -> Family = match stem {
            "euclidean" => Family::Euclidean,
            "sphere" => Family::Sphere,
            "hyperbolic" => Family::Hyperbolic,
            "flat_torus" => Family::FlatTorus,
            _ => return Err(unknown()),
        };
        if !(2..=MAX_CATALOG_DIM).contains(&m) {
            return Err(Error::InvalidParameter {
                name: "dimension".into(),
                message: format!("{stem} needs a dimension in 2..={MAX_CATALOG_DIM}, got {m}"),
            });
        }
        Ok(make(m))
    }

    /// Parameter names with defaults.
    fn schema(self) -> &'static [(&'static str, f64)] {
        match self {
            Family::Euclidean(_) | Family::FlatTorus(_) => &[],
            Family::Sphere(_) | Family::Hyperbolic(_) | Family::DeSitter => &[("a", 1.0)],
            Family::Schwarzschild => &[("M", 1.0)],
            Family::Product => &[("a", 1.0), ("b", 2.0)],
            Family::ConformalRandom => &[("seed", 0.0), ("m", 4.0)],
        }
    }
}

fn resolve_params(family: Family, given: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    let schema = family.schema();
    if let Some(k) = given.keys().find(|k| !schema.iter().any(|(n, _)| n == k)) {
        return Err(Error::InvalidParameter {
            name: k.clone(),
            message: "not a parameter of this metric".into(),
        });
    }
    let mut out = BTreeMap::new();
    for (name, default) in schema {
        let v = given.get(*name).copied().unwrap_or(*default);
        if !v.is_finite() {
            return Err(Error::InvalidParameter { name: name.to_string(), message: "must be finite".into() });
        }
        out.insert(name.to_string(), v);
    }
    for positive in ["a", "b", "M"] {
        if let Some(&v) = out.get(positive) {
            if v <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: positive.into(),
                    message: format!("must be positive, got {v}"),
                });
            }
        }
    }
    if family == Family::ConformalRandom {
        let seed = out["seed"];
        if seed < 0.0 || seed.fract() != 0.0 || seed > 2f64.powi(53) {
            return Err(Error::InvalidParameter { name: "seed".into(), message: "must be a non-negative integer".into() });
        }
        let m = out["m"];
        if m.fract() != 0.0 || !(2.0..=MAX_CATALOG_DIM as f64).contains(&m) {
            return Err(Error::InvalidParameter {
                name: "m".into(),
                message: format!("must be an integer in 2..={MAX_CATALOG_DIM}"),
            });
        }
    }
    Ok(out)
}

pub fn get_metric(name: &str, params: &BTreeMap<String, f64>) -> Result<MetricField> {
    Ok(get_entry(name, params)?.metric)
}

fn diagonal(
    name: &str,
    coords: &[String],
    signature: Signature,
    params: &BTreeMap<String, f64>,
    diag: &[String],
) -> Result<MetricField> {
    let vars: Vec<&str> = coords.iter().map(String::as_str).chain(params.keys().map(String::as_str)).collect();
    let m = coords.len();
    let mut comps = vec![vec![Expr::Num(0.0); m]; m];
    for (i, src) in diag.iter().enumerate() {
        comps[i][i] = parse_expr(src, &vars)?;
    }
    MetricField::symbolic(name, coords.to_vec(), signature, params.clone(), comps)
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Deterministic angles inside `[0.3, pi - 0.3]`.
fn safe_angle(i: usize, j: usize) -> f64 {
    let golden = 0.618_033_988_749_894_9;
    let f = ((i + 1) as f64 * golden + j as f64 * 0.381_966).fract();
    0.3 + (std::f64::consts::PI - 0.6) * f
}

const PROBES: usize = 5;

pub fn get_entry(name: &str, params: &BTreeMap<String, f64>) -> Result<CatalogEntry> {
    let family = Family::parse(name)?;
    let p = resolve_params(family, params)?;
    let entry = match family {
        Family::Euclidean(m) => {
            let coords = numbered("x", m);
            let metric = diagonal(name, &coords, Signature::Riemannian, &p, &vec!["1".to_string(); m])?;
            let probes = (0..PROBES).map(|i| (0..m).map(|j| safe_angle(i, j) - 1.0).collect()).collect();
            CatalogEntry { metric, facts: constant_facts(m, 0.0), probes }
        }
        Family::Sphere(m) => {
            let a = p["a"];
            let mut coords = numbered("th", m - 1);
            coords.push("ph".into());
            let mut diag = Vec::with_capacity(m);
            let mut factor = "a^2".to_string();
            for c in coords.iter().take(m - 1) {
                diag.push(factor.clone());
                factor = format!("{factor}*sin({c})^2");
            }
            diag.push(factor);
            let metric = diagonal(name, &coords, Signature::Riemannian, &p, &diag)?;
            let probes = (0..PROBES).map(|i| (0..m).map(|j| safe_angle(i, j)).collect()).collect();
            CatalogEntry { metric, facts: constant_facts(m, 1.0 / (a * a)), probes }
        }
        Family::Hyperbolic(m) => {
            let a = p["a"];
            let mut coords = numbered("x", m - 1);
            coords.push("y".into());
            let diag = vec!["a^2/y^2".to_string(); m];
            let metric = diagonal(name, &coords, Signature::Riemannian, &p, &diag)?
                .with_domain(m - 1, 0.0, f64::INFINITY);
            let probes = (0..PROBES)
                .map(|i| {
                    let mut v: Vec<f64> = (0..m - 1).map(|j| safe_angle(i, j) - 1.5).collect();
                    v.push(0.5 + 0.3 * i as f64);
                    v
                })
                .collect();
            CatalogEntry { metric, facts: constant_facts(m, -1.0 / (a * a)), probes }
        }
        Family::FlatTorus(m) => {
            let metric = MetricField::from_fn(name, numbered("u", m), Signature::Riemannian, p.clone(), move |_, _| {
                DMatrix::identity(m, m)
            })?;
            let probes = (0..PROBES).map(|i| (0..m).map(|j| 2.0 * safe_angle(i, j)).collect()).collect();
            CatalogEntry { metric, facts: constant_facts(m, 0.0), probes }
        }
        Family::DeSitter => {
            let a = p["a"];
            let coords: Vec<String> = ["t", "r", "th", "ph"].iter().map(|s| s.to_string()).collect();
            let diag = ["-(1-r^2/a^2)", "1/(1-r^2/a^2)", "r^2", "r^2*sin(th)^2"].map(String::from);
            let metric = diagonal(name, &coords, Signature::Lorentzian, &p, &diag)?.with_domain(1, 0.0, a);
            let probes = (0..PROBES)
                .map(|i| vec![0.5 * i as f64, a * (0.2 + 0.15 * i as f64), safe_angle(i, 0), safe_angle(i, 1)])
                .collect();
            let k = 1.0 / (a * a);
            CatalogEntry {
                metric,
                facts: KnownFacts {
                    sectional: Some(k),
                    scalar: Some(12.0 * k),
                    einstein_k: Some(3.0 * k),
                    conformally_flat: Some(true),
                },
                probes,
            }
        }
        Family::Schwarzschild => {
            let mass = p["M"];
            let coords: Vec<String> = ["t", "r", "th", "ph"].iter().map(|s| s.to_string()).collect();
            let diag = ["-(1-2*M/r)", "1/(1-2*M/r)", "r^2", "r^2*sin(th)^2"].map(String::from);
            let metric = diagonal(name, &coords, Signature::Lorentzian, &p, &diag)?
                .with_domain(1, 2.0 * mass, f64::INFINITY);
            let probes = (0..PROBES)
                .map(|i| vec![0.3 * i as f64, mass * (4.0 + 1.5 * i as f64), safe_angle(i, 0), safe_angle(i, 1)])
                .collect();
            CatalogEntry {
                metric,
                facts: KnownFacts {
                    sectional: None,
                    scalar: Some(0.0),
                    einstein_k: Some(0.0),
                    conformally_flat: Some(false),
                },
                probes,
            }
        }
        Family::Product => {
            let (a, b) = (p["a"], p["b"]);
            let coords: Vec<String> = ["th1", "ph1", "th2", "ph2"].iter().map(|s| s.to_string()).collect();
            let diag = ["a^2", "a^2*sin(th1)^2", "b^2", "b^2*sin(th2)^2"].map(String::from);
            let metric = diagonal(name, &coords, Signature::Riemannian, &p, &diag)?;
            let probes = (0..PROBES).map(|i| (0..4).map(|j| safe_angle(i, j)).collect()).collect();
            CatalogEntry {
                metric,
                facts: KnownFacts {
                    sectional: None,
                    scalar: Some(2.0 / (a * a) + 2.0 / (b * b)),
                    einstein_k: (a == b).then(|| 1.0 / (a * a)),
                    conformally_flat: Some(false),
                },
                probes,
            }
        }
        Family::ConformalRandom => {
            let seed = p["seed"] as u64;
            let m = p["m"] as usize;
            let coords = numbered("x", m);
            let phi = random_potential(seed, &coords);
            let component = format!("exp(2*({phi}))");
            let metric = diagonal(name, &coords, Signature::Riemannian, &p, &vec![component; m])?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            let probes = (0..PROBES).map(|_| (0..m).map(|_| rng.random_range(-0.5..0.5)).collect()).collect();
            CatalogEntry {
                metric,
                facts: KnownFacts { conformally_flat: Some(true), ..KnownFacts::default() },
                probes,
            }
        }
    };
    Ok(entry)
}

fn constant_facts(m: usize, k: f64) -> KnownFacts {
    let mf = m as f64;
    KnownFacts {
        sectional: Some(k),
        scalar: Some(mf * (mf - 1.0) * k),
        einstein_k: Some((mf - 1.0) * k),
        conformally_flat: Some(true),
    }
}

/// Random quadratic `phi = sum b_i x_i + sum_{i<=j} c_ij x_i x_j` with
/// coefficients in `[-0.3, 0.3]`, written in the metric DSL.
fn random_potential(seed: u64, coords: &[String]) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    let mut coef = || -> String { format!("{:.6}", rng.random_range(-0.3..0.3)) };
    for c in coords {
        terms.push(format!("{}*{c}", coef()));
    }
    for (i, ci) in coords.iter().enumerate() {
        for cj in &coords[i..] {
            terms.push(format!("{}*{ci}*{cj}", coef()));
        }
    }
    terms.join("+")
}

/// Whether a value in the de Sitter fixture is copied from the published
/// component table or repaired.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureTag {
    Published,
    Corrected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureSlot {
    /// `(a, b, c, d)` for `R^a_bcd`, zero-based in the order `(t, r, th, ph)`.
    pub index: [usize; 4],
    /// Expected value in the DSL over `t, r, th, ph, a`.
    pub expected: String,
    /// The published value when it differs from `expected`.
    pub printed: Option<String>,
    pub tag: FixtureTag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeSitterFixtures {
    pub a: f64,
    pub scalar: f64,
    pub ricci_factor: f64,
    pub riemann: Vec<FixtureSlot>,
    /// Diagonal `R_ab` in the DSL.
    pub ricci: Vec<FixtureSlot>,
}

impl DeSitterFixtures {
    pub fn evaluate(&self, expr: &str, p: &[f64]) -> Result<f64> {
        let vars = ["t", "r", "th", "ph", "a"];
        let e = parse_expr(expr, &vars)?;
        e.eval(&[("t", p[0]), ("r", p[1]), ("th", p[2]), ("ph", p[3]), ("a", self.a)])
    }
}

pub fn fixtures_de_sitter(a: f64) -> DeSitterFixtures {
    use FixtureTag::*;
    let slot = |index: [usize; 4], expected: &str, printed: Option<&str>| FixtureSlot {
        index,
        expected: expected.into(),
        printed: printed.map(String::from),
        tag: if printed.is_some() { Corrected } else { Published },
    };
    // Each published block R^a_b.. contributes the pair (c, d), (d, c).
    let table: [([usize; 4], &str, Option<&str>); 12] = [
        ([0, 1, 0, 1], "1/(a^2-r^2)", None),
        ([0, 2, 0, 2], "r^2/a^2", None),
        ([0, 3, 0, 3], "r^2*sin(th)^2/a^2", Some("(r^2-sin(th)^2)/a^2")),
        ([1, 0, 0, 1], "(a^2-r^2)/a^4", None),
        ([1, 2, 1, 2], "r^2/a^2", None),
        ([1, 3, 1, 3], "r^2*sin(th)^2/a^2", None),
        ([2, 0, 0, 2], "(a^2-r^2)/a^4", None),
        ([2, 1, 1, 2], "1/(-a^2+r^2)", None),
        ([2, 3, 2, 3], "r^2*sin(th)^2/a^2", None),
        ([3, 0, 0, 3], "(a^2-r^2)/a^4", None),
        ([3, 1, 1, 3], "1/(-a^2+r^2)", None),
        ([3, 2, 2, 3], "-r^2/a^2", None),
    ];
    let mut riemann = Vec::with_capacity(24);
    for (idx, value, printed) in table {
        riemann.push(slot(idx, value, printed));
        let negate = |s: &str| format!("-({s})");
        riemann.push(slot(
            [idx[0], idx[1], idx[3], idx[2]],
            &negate(value),
            printed.map(negate).as_deref(),
        ));
    }
    let ricci = vec![
        slot([0, 0, 0, 0], "3*(-a^2+r^2)/a^4", Some("3*(-a^2+r^2)")),
        slot([1, 1, 1, 1], "3/(a^2-r^2)", None),
        slot([2, 2, 2, 2], "3*r^2/a^2", None),
        slot([3, 3, 3, 3], "3*r^2*sin(th)^2/a^2", None),
    ];
    DeSitterFixtures { a, scalar: 12.0 / (a * a), ricci_factor: 3.0 / (a * a), riemann, ricci }
}
