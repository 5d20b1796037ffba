//! `KEY=VAL` hyperparameter maps.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Flat, ordered hyperparameter assignment with string values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamMap(BTreeMap<String, String>);

impl ParamMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `["hid_dim=64", "lr=0.01"]`.
    pub fn parse<S: AsRef<str>>(pairs: &[S]) -> Result<Self> {
        let mut map = Self::new();
        for pair in pairs {
            let pair = pair.as_ref();
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::param(format!("expected KEY=VAL, got '{pair}'")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::param(format!("empty key in '{pair}'")));
            }
            map.set(k, v);
        }
        Ok(map)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.set(key, value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Starts a typed read that rejects leftover keys on [`Reader::finish`].
    pub fn reader(&self) -> Reader<'_> {
        Reader {
            map: self,
            used: Vec::new(),
        }
    }

    /// JSON object; numeric values are written as numbers.
    pub fn to_json(&self) -> String {
        let obj: serde_json::Map<String, serde_json::Value> = self
            .0
            .iter()
            .map(|(k, v)| {
                let number = v.parse::<i64>().map(serde_json::Number::from).ok().or_else(|| {
                    v.parse::<f64>().ok().and_then(serde_json::Number::from_f64)
                });
                let value = number.map_or_else(
                    || serde_json::Value::String(v.clone()),
                    serde_json::Value::Number,
                );
                (k.clone(), value)
            })
            .collect();
        serde_json::Value::Object(obj).to_string()
    }

    /// Inverse of [`ParamMap::to_json`]; values must be scalars.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::param(format!("bad parameter JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::param("parameter JSON must be an object"))?;
        let mut map = Self::new();
        for (k, v) in obj {
            let v = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                _ => return Err(Error::param(format!("parameter '{k}' is not a scalar"))),
            };
            map.set(k, v);
        }
        Ok(map)
    }

    /// Copy keeping only the given keys.
    pub fn restricted_to(&self, keys: &[&str]) -> Self {
        Self(
            self.0
                .iter()
                .filter(|(k, _)| keys.contains(&k.as_str()))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        )
    }

    /// Entries of `other` override entries of `self`.
    pub fn merged(&self, other: &ParamMap) -> Self {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.set(k, v);
        }
        out
    }
}

impl fmt::Display for ParamMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(" "))
    }
}

pub struct Reader<'a> {
    map: &'a ParamMap,
    used: Vec<&'static str>,
}

impl Reader<'_> {
    pub fn get<T: FromStr>(&mut self, key: &'static str, default: T) -> Result<T> {
        self.used.push(key);
        match self.map.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| Error::param(format!("cannot parse {key}='{raw}'"))),
        }
    }

    pub fn finish(self) -> Result<()> {
        for (k, _) in self.map.iter() {
            if !self.used.contains(&k) {
                return Err(Error::param(format!(
                    "unknown parameter '{k}' (accepted: {})",
                    self.used.join(", ")
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_read() {
        let m = ParamMap::parse(&["lr=0.05", " hid_dim = 32"]).unwrap();
        let mut r = m.reader();
        assert_eq!(r.get("lr", 0.1).unwrap(), 0.05);
        assert_eq!(r.get("hid_dim", 64usize).unwrap(), 32);
        assert_eq!(r.get("epochs", 7usize).unwrap(), 7);
        r.finish().unwrap();
        assert_eq!(m.to_json(), r#"{"hid_dim":32,"lr":0.05}"#);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(ParamMap::parse(&["novalue"]).is_err());
        let m = ParamMap::new().with("lr", "fast");
        assert!(m.reader().get("lr", 0.1).is_err());
        let m = ParamMap::new().with("typo", 1);
        let mut r = m.reader();
        r.get("lr", 0.1).unwrap();
        assert!(r.finish().is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = ParamMap::new().with("lr", 0.05).with("epochs", 300).with("motifs", "wedge,triangle");
        assert_eq!(ParamMap::from_json(&m.to_json()).unwrap(), m);
        assert!(ParamMap::from_json("[1]").is_err());
        assert!(ParamMap::from_json(r#"{"a":[1]}"#).is_err());
    }
}
