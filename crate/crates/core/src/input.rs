//! Textual inputs: metric files, points and `k=v` parameter lists.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};
use crate::metric::{MetricField, Signature};

pub const MAX_FILE_DIM: usize = 8;

/// On-disk metric description.
///
/// ```json
/// {
///   "dimension": 2,
///   "coordinates": ["th", "ph"],
///   "signature": "riemannian",
///   "parameters": {"a": 1.0},
///   "components": [["a^2", "0"], [null, "a^2*sin(th)^2"]],
///   "domain": {"th": [0.0, 3.141592653589793]}
/// }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricFile {
    pub dimension: usize,
    pub coordinates: Vec<String>,
    pub signature: Signature,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    pub components: Vec<Vec<Option<String>>>,
    #[serde(default)]
    pub domain: BTreeMap<String, [f64; 2]>,
}

pub fn parse_metric_file(text: &str) -> Result<MetricFile> {
    let file: MetricFile = serde_json::from_str(text).map_err(|e| Error::MetricFile(e.to_string()))?;
    file.validate_shape()?;
    Ok(file)
}

impl MetricFile {
    fn validate_shape(&self) -> Result<()> {
        let m = self.dimension;
        if m == 0 || m > MAX_FILE_DIM {
            return Err(Error::MetricFile(format!("dimension must be in 1..={MAX_FILE_DIM}, got {m}")));
        }
        if self.coordinates.len() != m {
            return Err(Error::MetricFile(format!(
                "{} coordinates for dimension {m}",
                self.coordinates.len()
            )));
        }
        if self.components.len() != m || self.components.iter().any(|r| r.len() != m) {
            return Err(Error::MetricFile(format!("components must be a {m}x{m} array")));
        }
        for a in 0..m {
            for b in a..m {
                if self.components[a][b].is_none() {
                    return Err(Error::MetricFile(format!("component [{a}][{b}] is null above the diagonal")));
                }
            }
        }
        for (name, v) in &self.parameters {
            if !v.is_finite() {
                return Err(Error::MetricFile(format!("parameter {name} is not finite")));
            }
        }
        for (name, [lo, hi]) in &self.domain {
            if !self.coordinates.contains(name) {
                return Err(Error::MetricFile(format!("domain names unknown coordinate {name}")));
            }
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(Error::MetricFile(format!("domain of {name} is empty")));
            }
        }
        Ok(())
    }

    /// Builds the metric, with `overrides` replacing declared parameter values.
    pub fn build(&self, name: &str, overrides: &BTreeMap<String, f64>) -> Result<MetricField> {
        let mut params = self.parameters.clone();
        for (k, v) in overrides {
            match params.get_mut(k) {
                Some(slot) => *slot = *v,
                None => {
                    return Err(Error::InvalidParameter {
                        name: k.clone(),
                        message: "not declared in the metric file".into(),
                    })
                }
            }
        }
        let vars: Vec<&str> = self
            .coordinates
            .iter()
            .map(String::as_str)
            .chain(params.keys().map(String::as_str))
            .collect();
        let m = self.dimension;
        let mut exprs = vec![vec![Expr::Num(0.0); m]; m];
        for a in 0..m {
            for b in a..m {
                let src = self.components[a][b].as_deref().unwrap_or("0");
                let e = parse_expr(src, &vars)?;
                if let Some(lower) = &self.components[b][a] {
                    if b != a && parse_expr(lower, &vars)? != e {
                        return Err(Error::MetricFile(format!(
                            "component [{b}][{a}] does not match [{a}][{b}]"
                        )));
                    }
                }
                exprs[a][b] = e.clone();
                exprs[b][a] = e;
            }
        }
        let mut metric = MetricField::symbolic(name, self.coordinates.clone(), self.signature, params, exprs)?;
        for (coord, [lo, hi]) in &self.domain {
            let i = self.coordinates.iter().position(|c| c == coord).expect("validated");
            metric = metric.with_domain(i, *lo, *hi);
        }
        Ok(metric)
    }
}

/// `"c1,c2,..."` into finite coordinates.
pub fn parse_point(text: &str) -> Result<Vec<f64>> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(Error::InvalidArgument("point is empty".into()));
    }
    trimmed
        .split(',')
        .map(|s| {
            let s = s.trim();
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::InvalidArgument(format!("bad point coordinate {s:?}"))),
            }
        })
        .collect()
}

/// Merges `k=v` items; each item may itself be a comma-separated list.
pub fn parse_params<S: AsRef<str>>(items: &[S]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in items {
        for pair in item.as_ref().split(',') {
            let pair = pair.trim();
            if pair.is_empty() {
                continue;
            }
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("parameter {pair:?} is not k=v")))?;
            let (k, v) = (k.trim(), v.trim());
            if !crate::expr::is_valid_name(k) {
                return Err(Error::InvalidArgument(format!("bad parameter name {k:?}")));
            }
            let value: f64 = v
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| Error::InvalidArgument(format!("bad value for {k}: {v:?}")))?;
            if out.insert(k.to_string(), value).is_some() {
                return Err(Error::InvalidArgument(format!("parameter {k} given twice")));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SPHERE: &str = r#"{
        "dimension": 2,
        "coordinates": ["th", "ph"],
        "signature": "riemannian",
        "parameters": {"a": 1.0},
        "components": [["a^2", "0"], [null, "a^2*sin(th)^2"]],
        "domain": {"th": [0.0, 3.141592653589793]}
    }"#;

    #[test]
    fn sphere_file_builds() {
        let f = parse_metric_file(SPHERE).unwrap();
        let m = f.build("file", &BTreeMap::new()).unwrap();
        let g = m.metric_at(&[1.0, 0.0]).unwrap();
        assert!((g[(1, 1)] - 1.0_f64.sin().powi(2)).abs() < 1e-15);
        assert!(m.metric_at(&[4.0, 0.0]).is_err());

        let big = f.build("file", &[("a".to_string(), 2.0)].into()).unwrap();
        assert_eq!(big.metric_at(&[1.0, 0.0]).unwrap()[(0, 0)], 4.0);
        assert!(f.build("file", &[("b".to_string(), 2.0)].into()).is_err());
    }

    #[test]
    fn malformed_files() {
        for bad in [
            "",
            "{}",
            r#"{"dimension": 2, "coordinates": ["x"], "signature": "riemannian", "components": [["1","0"],["0","1"]]}"#,
            r#"{"dimension": 1, "coordinates": ["x"], "signature": "other", "components": [["1"]]}"#,
            r#"{"dimension": 2, "coordinates": ["x","y"], "signature": "riemannian", "components": [["1",null],[null,"1"]]}"#,
            r#"{"dimension": 1, "coordinates": ["x"], "signature": "riemannian", "components": [["1"]], "domain": {"y": [0, 1]}}"#,
            r#"{"dimension": 1, "coordinates": ["x"], "signature": "riemannian", "components": [["1"]], "extra": 1}"#,
        ] {
            assert!(parse_metric_file(bad).is_err(), "{bad}");
        }
        let mismatch = r#"{"dimension": 2, "coordinates": ["x","y"], "signature": "riemannian",
            "components": [["1","x"],["y","1"]]}"#;
        let f = parse_metric_file(mismatch).unwrap();
        assert!(matches!(f.build("m", &BTreeMap::new()), Err(Error::MetricFile(_))));
    }

    #[test]
    fn points_and_params() {
        assert_eq!(parse_point(" 1.0, 0.5 ").unwrap(), [1.0, 0.5]);
        assert_eq!(parse_point("-2e-3").unwrap(), [-0.002]);
        for bad in ["", "1,,2", "1,x", "nan", "1,inf"] {
            assert!(parse_point(bad).is_err(), "{bad}");
        }
        let p = parse_params(&["seed=7,m=4", "a=0.5"]).unwrap();
        assert_eq!(p["seed"], 7.0);
        assert_eq!(p["m"], 4.0);
        assert_eq!(p["a"], 0.5);
        assert!(parse_params(&["a=1", "a=2"]).is_err());
        assert!(parse_params(&["a"]).is_err());
        assert!(parse_params(&["1a=2"]).is_err());
    }

    proptest! {
        #[test]
        fn point_round_trips(v in prop::collection::vec(-1e6f64..1e6, 1..8)) {
            let text = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
            prop_assert_eq!(parse_point(&text).unwrap(), v);
        }
    }
}
