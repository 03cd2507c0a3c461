//! Parsers for the `tag{key=value, ...}` strings naming Young functions,
//! distributions and test functions. Values are JSON numbers or arrays, or
//! bare identifiers.

use std::collections::BTreeMap;
use std::sync::Arc;

use bphi::bounds::tail_fitted_family;
use bphi::empirical::{log_cosh, VectorDistribution};
use bphi::young::{MatrixParameter, RadialProfile, YoungFunction};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Spec {
    pub tag: String,
    pub params: BTreeMap<String, Value>,
    /// Key path of the spec in the config, for error messages.
    pub path: String,
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut start) = (0i32, 0usize);
    for (i, c) in s.char_indices() {
        match c {
            '[' | '{' => depth += 1,
            ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts.into_iter().map(str::trim).filter(|p| !p.is_empty()).collect()
}

pub fn parse(text: &str, path: &str) -> Result<Spec, CliError> {
    let text = text.trim();
    let err = |msg: String| CliError::config(path, msg);
    let (tag, body) = match text.find('{') {
        Some(i) => {
            if !text.ends_with('}') {
                return Err(err(format!("unbalanced braces in '{text}'")));
            }
            (&text[..i], &text[i + 1..text.len() - 1])
        }
        None => (text, ""),
    };
    let tag = tag.trim();
    if tag.is_empty() || !tag.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(err(format!("invalid tag in '{text}'")));
    }
    let mut params = BTreeMap::new();
    for item in split_top_level(body) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, got '{item}'")))?;
        let (k, v) = (k.trim(), v.trim());
        let value = serde_json::from_str::<Value>(v).unwrap_or_else(|_| Value::String(v.to_string()));
        if params.insert(k.to_string(), value).is_some() {
            return Err(CliError::config(&format!("{path}.{k}"), "duplicate key".into()));
        }
    }
    Ok(Spec {
        tag: tag.to_string(),
        params,
        path: path.to_string(),
    })
}

impl Spec {
    fn key(&self, k: &str) -> String {
        format!("{}.{k}", self.path)
    }

    fn allow(&self, keys: &[&str]) -> Result<(), CliError> {
        for k in self.params.keys() {
            if !keys.contains(&k.as_str()) {
                return Err(CliError::config(&self.key(k), format!("unknown key for '{}'", self.tag)));
            }
        }
        Ok(())
    }

    fn number(&self, k: &str, default: Option<f64>) -> Result<f64, CliError> {
        match self.params.get(k) {
            Some(v) => v
                .as_f64()
                .ok_or_else(|| CliError::config(&self.key(k), format!("expected a number, got {v}"))),
            None => default.ok_or_else(|| CliError::config(&self.key(k), "missing required key".into())),
        }
    }

    fn count(&self, k: &str, default: Option<usize>) -> Result<usize, CliError> {
        match self.params.get(k) {
            Some(v) => v
                .as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| CliError::config(&self.key(k), format!("expected a nonnegative integer, got {v}"))),
            None => default.ok_or_else(|| CliError::config(&self.key(k), "missing required key".into())),
        }
    }

    fn vector(&self, k: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some(v) = self.params.get(k) else { return Ok(None) };
        let bad = || CliError::config(&self.key(k), format!("expected an array of numbers, got {v}"));
        let arr = v.as_array().ok_or_else(bad)?;
        arr.iter().map(|x| x.as_f64().ok_or_else(bad)).collect::<Result<Vec<_>, _>>().map(Some)
    }

    fn matrix(&self, k: &str) -> Result<Option<MatrixParameter>, CliError> {
        let Some(v) = self.params.get(k) else { return Ok(None) };
        let bad = || CliError::config(&self.key(k), format!("expected a square array of arrays, got {v}"));
        let rows = v
            .as_array()
            .ok_or_else(bad)?
            .iter()
            .map(|r| {
                r.as_array()
                    .ok_or_else(bad)?
                    .iter()
                    .map(|x| x.as_f64().ok_or_else(bad))
                    .collect::<Result<Vec<f64>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        MatrixParameter::from_rows(&rows)
            .map(Some)
            .map_err(|e| CliError::config(&self.key(k), e.to_string()))
    }

    fn ident(&self, k: &str) -> Result<Option<String>, CliError> {
        match self.params.get(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(CliError::config(&self.key(k), format!("expected an identifier, got {v}"))),
        }
    }

    fn lib<T>(&self, r: bphi::Result<T>) -> Result<T, CliError> {
        r.map_err(|e| CliError::config(&self.path, e.to_string()))
    }
}

/// quadratic{B}, power{p,c,d}, bounded{K,c}, radial{nu,Q}, logcosh{d},
/// tailfit{p,d}.
pub fn family(text: &str, path: &str) -> Result<YoungFunction, CliError> {
    let s = parse(text, path)?;
    match s.tag.as_str() {
        "quadratic" => {
            s.allow(&["B", "d"])?;
            let b = match s.matrix("B")? {
                Some(b) => b,
                None => MatrixParameter::identity(s.count("d", Some(1))?),
            };
            s.lib(YoungFunction::quadratic(b))
        }
        "power" => {
            s.allow(&["p", "c", "d"])?;
            s.lib(YoungFunction::power(s.number("p", None)?, s.number("c", Some(1.0))?, s.count("d", Some(1))?))
        }
        "bounded" => {
            s.allow(&["K", "c"])?;
            s.lib(YoungFunction::bounded_support(s.number("K", None)?, s.number("c", Some(1.0))?))
        }
        "radial" => {
            s.allow(&["nu", "Q", "d"])?;
            let q = match s.matrix("Q")? {
                Some(q) => q,
                None => MatrixParameter::identity(s.count("d", Some(1))?),
            };
            let nu = s.ident("nu")?.unwrap_or_else(|| "linear".into());
            let profile = if nu == "linear" {
                RadialProfile::Linear { c: 0.5 }
            } else if let Some(k) = nu.strip_prefix("pow").and_then(|k| k.parse::<f64>().ok()) {
                RadialProfile::Power { k, c: 1.0 }
            } else {
                return Err(CliError::config(&s.key("nu"), format!("unknown radial profile '{nu}' (linear or pow<k>)")));
            };
            s.lib(YoungFunction::radial(profile, q))
        }
        "logcosh" => {
            s.allow(&["d"])?;
            let d = s.count("d", Some(1))?;
            s.lib(YoungFunction::custom("logcosh", d, |l| l.iter().map(|v| log_cosh(*v)).sum(), None))
        }
        "tailfit" => {
            s.allow(&["p", "d"])?;
            s.lib(tail_fitted_family(s.number("p", None)?, s.count("d", Some(1))?))
        }
        other => Err(CliError::config(
            path,
            format!("unknown family '{other}' (quadratic, power, bounded, radial, logcosh, tailfit)"),
        )),
    }
}

/// gaussian{Q}, rademacher{d,scale}, weibull{p,scale|d}, uniform{a}.
pub fn distribution(text: &str, path: &str) -> Result<VectorDistribution, CliError> {
    let s = parse(text, path)?;
    match s.tag.as_str() {
        "gaussian" => {
            s.allow(&["Q", "d"])?;
            let q = match s.matrix("Q")? {
                Some(q) => q,
                None => MatrixParameter::identity(s.count("d", Some(1))?),
            };
            s.lib(VectorDistribution::gaussian(q))
        }
        "rademacher" => {
            s.allow(&["d", "scale"])?;
            s.lib(VectorDistribution::rademacher(s.number("scale", Some(1.0))?, s.count("d", Some(1))?))
        }
        "weibull" => {
            s.allow(&["p", "scale", "d"])?;
            let scale = match s.vector("scale")? {
                Some(v) => v,
                None => vec![1.0; s.count("d", Some(1))?],
            };
            s.lib(VectorDistribution::weibull(s.number("p", None)?, scale))
        }
        "uniform" => {
            s.allow(&["a"])?;
            let a = s.vector("a")?.ok_or_else(|| CliError::config(&s.key("a"), "missing required key".into()))?;
            s.lib(VectorDistribution::uniform(a))
        }
        other => Err(CliError::config(
            path,
            format!("unknown distribution '{other}' (gaussian, rademacher, weibull, uniform)"),
        )),
    }
}

pub type TestFunction = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// exp_linear{a}, exp_quadratic{d}, cosh, const{d,c}.
pub fn test_function(text: &str, path: &str) -> Result<(usize, TestFunction), CliError> {
    let s = parse(text, path)?;
    match s.tag.as_str() {
        "exp_linear" => {
            s.allow(&["a"])?;
            let a = s.vector("a")?.ok_or_else(|| CliError::config(&s.key("a"), "missing required key".into()))?;
            Ok((a.len(), Arc::new(move |l: &[f64]| l.iter().zip(&a).map(|(x, c)| x * c).sum::<f64>().exp())))
        }
        "exp_quadratic" => {
            s.allow(&["d"])?;
            let d = s.count("d", Some(1))?;
            Ok((d, Arc::new(|l: &[f64]| (0.5 * l.iter().map(|x| x * x).sum::<f64>()).exp())))
        }
        "cosh" => {
            s.allow(&["d"])?;
            let d = s.count("d", Some(1))?;
            Ok((d, Arc::new(|l: &[f64]| l.iter().map(|x| x.cosh()).product())))
        }
        "const" => {
            s.allow(&["d", "c"])?;
            let (d, c) = (s.count("d", Some(1))?, s.number("c", Some(1.0))?);
            Ok((d, Arc::new(move |_: &[f64]| c)))
        }
        other => Err(CliError::config(
            path,
            format!("unknown test function '{other}' (exp_linear, exp_quadratic, cosh, const)"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_values() {
        let s = parse("quadratic{B=[[1,0],[0,2]], d=2}", "phi").unwrap();
        assert_eq!(s.tag, "quadratic");
        assert_eq!(s.params["d"], Value::from(2));
        assert_eq!(s.params["B"], serde_json::json!([[1, 0], [0, 2]]));
        let r = parse("radial{nu=pow3,Q=[[1]]}", "phi").unwrap();
        assert_eq!(r.params["nu"], Value::from("pow3"));
        assert!(parse("gaussian", "dist").unwrap().params.is_empty());
    }

    #[test]
    fn builds_families() {
        let q = family("quadratic{B=[[1,0],[0,2]]}", "phi").unwrap();
        assert!((q.value(&[1.0, 1.0]) - 1.5).abs() < 1e-15);
        let p = family("power{p=4,c=1,d=2}", "phi").unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(family("bounded{K=1,c=1}", "phi").unwrap().family_tag(), "bounded");
        assert_eq!(family("radial{nu=pow3,Q=[[1,0],[0,1]]}", "phi").unwrap().family_tag(), "radial");
        assert!((family("logcosh{d=1}", "phi").unwrap().value(&[1.0]) - 1f64.cosh().ln()).abs() < 1e-15);
        assert_eq!(family("tailfit{p=4,d=1}", "phi").unwrap().family_tag(), "quadratic");
    }

    #[test]
    fn reports_key_paths() {
        let e = family("quadratc{B=[[1]]}", "phi").unwrap_err();
        assert!(e.to_string().contains("phi"), "{e}");
        let e = family("power{p=4,q=1}", "phi").unwrap_err();
        assert!(e.to_string().contains("phi.q"), "{e}");
        let e = family("power{p=oops}", "phi").unwrap_err();
        assert!(e.to_string().contains("phi.p"), "{e}");
        let e = distribution("gaussian{Q=[[1,2],[2,1]]}", "dist").unwrap_err();
        assert!(e.to_string().contains("dist"), "{e}");
        assert!(family("power{p=4", "phi").is_err());
    }

    #[test]
    fn builds_distributions_and_functions() {
        assert_eq!(distribution("weibull{p=4,d=2}", "dist").unwrap().dim(), 2);
        assert_eq!(distribution("rademacher{d=3}", "dist").unwrap().dim(), 3);
        assert_eq!(distribution("uniform{a=[1,2]}", "dist").unwrap().dim(), 2);
        let (d, f) = test_function("exp_linear{a=[1,-1]}", "function").unwrap();
        assert_eq!(d, 2);
        assert!((f(&[1.0, 1.0]) - 1.0).abs() < 1e-15);
        assert_eq!(test_function("const{d=2}", "function").unwrap().1(&[3.0, 4.0]), 1.0);
    }
}
