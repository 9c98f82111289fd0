//! Hyperparameter configurations and search spaces.

use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::sampling::sample_exponential;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Str(s) => write!(f, "{s}"),
        }
    }
}

impl ParamValue {
    /// Reads `true`, integers, floats and otherwise a bare string.
    pub fn parse(raw: &str) -> ParamValue {
        let raw = raw.trim();
        match raw {
            "true" | "True" => return ParamValue::Bool(true),
            "false" | "False" => return ParamValue::Bool(false),
            _ => {}
        }
        if let Ok(i) = raw.parse::<i64>() {
            ParamValue::Int(i)
        } else if let Ok(x) = raw.parse::<f64>() {
            ParamValue::Float(x)
        } else {
            ParamValue::Str(raw.to_string())
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}
impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}
impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}
impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_string())
    }
}

/// One point of a search space. Keys keep their axis order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config(pub Vec<(String, ParamValue)>);

impl Config {
    pub fn get(&self, key: &str) -> Option<&ParamValue> {
        self.0.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    /// Sets `key`, replacing an existing entry in place.
    pub fn set(&mut self, key: &str, value: ParamValue) {
        match self.0.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.0.push((key.to_string(), value)),
        }
    }

    /// `other` layered on top of `self`.
    pub fn merged(&self, other: &Config) -> Config {
        let mut out = self.clone();
        for (k, v) in &other.0 {
            out.set(k, v.clone());
        }
        out
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(ParamValue::Float(x)) => Ok(*x),
            Some(ParamValue::Int(i)) => Ok(*i as f64),
            Some(v) => Err(Error::Config(format!(
                "`{key}` must be a number, got `{v}`"
            ))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(ParamValue::Int(i)) if *i >= 0 => Ok(*i as usize),
            Some(ParamValue::Float(x)) if *x >= 0.0 && x.fract() == 0.0 => Ok(*x as usize),
            Some(v) => Err(Error::Config(format!(
                "`{key}` must be a non-negative integer, got `{v}`"
            ))),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(ParamValue::Bool(b)) => Ok(*b),
            Some(v) => Err(Error::Config(format!(
                "`{key}` must be true or false, got `{v}`"
            ))),
        }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> Result<&'a str> {
        match self.get(key) {
            None => Ok(default),
            Some(ParamValue::Str(s)) => Ok(s),
            Some(v) => Err(Error::Config(format!(
                "`{key}` must be a string, got `{v}`"
            ))),
        }
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

impl Serialize for Config {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

impl<'de> Deserialize<'de> for Config {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Config;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of parameter values")
            }
            fn visit_map<A: MapAccess<'de>>(
                self,
                mut map: A,
            ) -> std::result::Result<Config, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, ParamValue>()? {
                    out.push((k, v));
                }
                Ok(Config(out))
            }
        }
        d.deserialize_map(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Axis {
    Values {
        name: String,
        values: Vec<ParamValue>,
    },
    /// Exponential with the given scale (mean).
    Exponential { name: String, scale: f64 },
}

impl Axis {
    pub fn values(name: &str, values: Vec<ParamValue>) -> Axis {
        Axis::Values {
            name: name.into(),
            values,
        }
    }

    pub fn exponential(name: &str, scale: f64) -> Axis {
        Axis::Exponential {
            name: name.into(),
            scale,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Axis::Values { name, .. } | Axis::Exponential { name, .. } => name,
        }
    }
}

/// Finite axes form a Cartesian product; exponential axes are drawn jointly
/// `draws` times and every draw is paired with every product point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
    pub draws: usize,
}

fn floats(v: &[f64]) -> Vec<ParamValue> {
    v.iter().map(|&x| ParamValue::Float(x)).collect()
}
fn ints(v: &[i64]) -> Vec<ParamValue> {
    v.iter().map(|&x| ParamValue::Int(x)).collect()
}
fn strs(v: &[&str]) -> Vec<ParamValue> {
    v.iter().map(|&x| ParamValue::Str(x.into())).collect()
}

impl GridSpec {
    pub fn empty() -> GridSpec {
        GridSpec {
            axes: Vec::new(),
            draws: 0,
        }
    }

    fn tfidf_axes() -> Vec<Axis> {
        vec![
            Axis::values("max_features", ints(&[100, 500, 1000, 2000, 10000])),
            Axis::values("stop_words", strs(&["english", "none"])),
            Axis::values("analyzer", strs(&["word", "char"])),
            Axis::values("sublinear_tf", vec![true.into(), false.into()]),
        ]
    }

    /// TF-IDF + SVM search space: 5 * 2 * 2 * 2 * 2 * 3 = 240 points.
    pub fn svm_default() -> GridSpec {
        let mut axes = Self::tfidf_axes();
        axes.push(Axis::values("kernel", strs(&["rbf", "sigmoid"])));
        axes.push(Axis::values("c", floats(&[0.1, 0.5, 1.0])));
        GridSpec { axes, draws: 0 }
    }

    /// TF-IDF + GBDT search space: 5 * 2 * 2 * 2 * 3 * 3 = 360 points.
    pub fn gbdt_default() -> GridSpec {
        let mut axes = Self::tfidf_axes();
        axes.push(Axis::values("n_estimators", ints(&[100, 200, 500])));
        axes.push(Axis::values("max_depth", ints(&[3, 5, 10])));
        GridSpec { axes, draws: 0 }
    }

    /// CRF penalties: c1 ~ Exp(0.5), c2 ~ Exp(0.05), `draws` joint draws.
    pub fn crf(draws: usize) -> GridSpec {
        GridSpec {
            axes: vec![Axis::exponential("c1", 0.5), Axis::exponential("c2", 0.05)],
            draws,
        }
    }

    pub fn regularization(name: &str) -> GridSpec {
        GridSpec {
            axes: vec![Axis::values(
                name,
                floats(&crate::linear::REGULARIZATION_GRID),
            )],
            draws: 0,
        }
    }

    fn has_exponential(&self) -> bool {
        self.axes
            .iter()
            .any(|a| matches!(a, Axis::Exponential { .. }))
    }

    pub fn n_configs(&self) -> usize {
        let product: usize = self
            .axes
            .iter()
            .map(|a| match a {
                Axis::Values { values, .. } => values.len(),
                Axis::Exponential { .. } => 1,
            })
            .product();
        if self.has_exponential() {
            product * self.draws
        } else {
            product
        }
    }

    /// Every configuration, first axis varying slowest, draws innermost.
    /// Exponential axis `a` uses the stream seeded with `seed + a`.
    pub fn configs(&self, seed: u64) -> Result<Vec<Config>> {
        for a in &self.axes {
            if let Axis::Values { name, values } = a {
                if values.is_empty() {
                    return Err(Error::Config(format!("grid axis `{name}` has no values")));
                }
            }
        }
        let mut samples: Vec<Option<Vec<f64>>> = Vec::with_capacity(self.axes.len());
        for (i, a) in self.axes.iter().enumerate() {
            samples.push(match a {
                Axis::Exponential { scale, .. } => Some(sample_exponential(
                    *scale,
                    self.draws,
                    seed.wrapping_add(i as u64),
                )?),
                Axis::Values { .. } => None,
            });
        }
        let mut out = vec![Config::default()];
        for a in &self.axes {
            if let Axis::Values { name, values } = a {
                out = out
                    .into_iter()
                    .flat_map(|c| {
                        values.iter().map(move |v| {
                            let mut c = c.clone();
                            c.0.push((name.clone(), v.clone()));
                            c
                        })
                    })
                    .collect();
            }
        }
        if !self.has_exponential() {
            return Ok(out);
        }
        let mut full = Vec::with_capacity(out.len() * self.draws);
        for c in &out {
            for d in 0..self.draws {
                let mut c = c.clone();
                for (a, s) in self.axes.iter().zip(&samples) {
                    if let Some(s) = s {
                        c.0.push((a.name().to_string(), ParamValue::Float(s[d])));
                    }
                }
                full.push(c);
            }
        }
        Ok(full)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_sizes() {
        let g = GridSpec::svm_default();
        assert_eq!(g.n_configs(), 240);
        let cs = g.configs(0).unwrap();
        assert_eq!(cs.len(), 240);
        assert_eq!(
            cs[0].to_string(),
            "max_features=100,stop_words=english,analyzer=word,sublinear_tf=true,kernel=rbf,c=0.1"
        );
        let mut keys: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 240);
        assert_eq!(GridSpec::gbdt_default().configs(0).unwrap().len(), 360);
    }

    #[test]
    fn crf_draws_are_positive_and_seeded() {
        let g = GridSpec::crf(15);
        let a = g.configs(4).unwrap();
        assert_eq!(a.len(), 15);
        assert!(a
            .iter()
            .all(|c| c.f64_or("c1", -1.0).unwrap() > 0.0 && c.f64_or("c2", -1.0).unwrap() > 0.0));
        assert_eq!(a, g.configs(4).unwrap());
        assert_ne!(a, g.configs(5).unwrap());
    }

    #[test]
    fn mixed_axes_multiply() {
        let g = GridSpec {
            axes: vec![
                Axis::values("c", floats(&[0.1, 1.0])),
                Axis::exponential("c1", 0.5),
            ],
            draws: 3,
        };
        assert_eq!(g.n_configs(), 6);
        assert_eq!(g.configs(0).unwrap().len(), 6);
    }

    #[test]
    fn config_json_keeps_order_and_types() {
        let c = Config(vec![
            ("z".into(), 1i64.into()),
            ("a".into(), 0.5.into()),
            ("k".into(), "rbf".into()),
        ]);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"z":1,"a":0.5,"k":"rbf"}"#);
        assert_eq!(serde_json::from_str::<Config>(&s).unwrap(), c);
        assert_eq!(ParamValue::parse("0.5"), ParamValue::Float(0.5));
        assert_eq!(ParamValue::parse("word"), ParamValue::Str("word".into()));
    }
}
