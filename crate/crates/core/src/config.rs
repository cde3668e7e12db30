//! Flat `key = value` configuration text.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{Case, ModelParams};

/// Keys understood by [`ModelConfig`].
pub const MODEL_KEYS: [&str; 9] = [
    "lambda1", "lambda2", "lambda3", "c_plus", "c_minus", "kappa", "gamma", "delta_rep", "case",
];

/// Parses the text into a key map, rejecting malformed and duplicate lines.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(Error::Config(format!("line {}: empty key or value", no + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{k}`", no + 1)));
        }
    }
    Ok(out)
}

pub fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: `{v}` is not a number")))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Config(format!("`{key}` must be finite")))
    }
}

/// Model parameters read from a config, plus how gamma was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub params: ModelParams,
    pub gamma_auto: bool,
}

impl ModelConfig {
    /// Reads the model keys of `pairs` without resolving gamma; other keys are
    /// ignored. Returns the parameters (gamma left at 0 when absent) and
    /// whether gamma was given.
    ///
    /// Unset coefficients default to the values realizing `case` (default `C`)
    /// for the configured exponent.
    pub fn unresolved(pairs: &BTreeMap<String, String>) -> Result<(ModelParams, bool)> {
        let case: Case = match pairs.get("case") {
            Some(v) => v.parse()?,
            None => Case::C,
        };
        let num = |k: &str| pairs.get(k).map(|v| parse_f64(k, v)).transpose();
        let mut p = ModelParams::for_case_without_gamma(case);
        if let Some(v) = num("lambda1")? {
            p.lambda1 = v;
        }
        if let Some(v) = num("lambda2")? {
            p.lambda2 = v;
        }
        if let Some(v) = num("lambda3")? {
            p.lambda3 = v;
        }
        if p.lambda1 <= 0.0 {
            return Err(Error::Config("`lambda1` must be positive".into()));
        }
        let (cp, cm) = ModelParams::default_coefficients(case, p.r());
        p.c_plus = num("c_plus")?.unwrap_or(cp);
        p.c_minus = num("c_minus")?.unwrap_or(cm);
        if let Some(v) = num("kappa")? {
            p.kappa = v;
        }
        if let Some(v) = num("delta_rep")? {
            if v < 0.0 {
                return Err(Error::Config("`delta_rep` must be >= 0".into()));
            }
            p.delta_rep = v;
        }
        match num("gamma")? {
            Some(g) if g > 0.0 => {
                p.gamma = g;
                Ok((p, true))
            }
            Some(_) => Err(Error::Config("`gamma` must be positive".into())),
            None => Ok((p, false)),
        }
    }

    /// As [`ModelConfig::unresolved`], choosing gamma automatically when it is
    /// absent; a failed choice is returned as the error.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let (p, given) = Self::unresolved(pairs)?;
        Ok(Self {
            params: if given { p } else { p.with_auto_gamma()? },
            gamma_auto: !given,
        })
    }

    /// Parses a config that may contain only model keys.
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        if let Some(k) = pairs.keys().find(|k| !MODEL_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        Self::from_pairs(&pairs)
    }
}

/// Serializes parameters in the format [`ModelConfig::parse`] reads.
pub fn to_config_text(p: &ModelParams) -> String {
    format!(
        "lambda1 = {}\nlambda2 = {}\nlambda3 = {}\nc_plus = {}\nc_minus = {}\nkappa = {}\ngamma = {}\ndelta_rep = {}\ncase = {}\n",
        p.lambda1, p.lambda2, p.lambda3, p.c_plus, p.c_minus, p.kappa, p.gamma, p.delta_rep, p.case
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        for case in Case::ALL {
            let p = ModelParams::for_case(case).with_delta_rep(0.25);
            let back = ModelConfig::parse(&to_config_text(&p)).unwrap();
            assert_eq!(back.params, p);
            assert!(!back.gamma_auto);
        }
    }

    #[test]
    fn comments_and_auto_gamma() {
        let c = ModelConfig::parse("# defaults\ncase = A  # fixed right leaf\n\n").unwrap();
        assert!(c.gamma_auto);
        assert_eq!(c.params.case, Case::A);
        assert_eq!(c.params.gamma, 0.003);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ModelConfig::parse("gama = 0.1").is_err());
        assert!(ModelConfig::parse("kappa 0.5").is_err());
        assert!(ModelConfig::parse("kappa = x").is_err());
        assert!(ModelConfig::parse("kappa = 0.5\nkappa = 0.4").is_err());
        assert!(ModelConfig::parse("case = D").is_err());
    }
}
