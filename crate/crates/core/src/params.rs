//! Parsing of the compact `kind:key=value,key=value` strings used for
//! weights, cones, windows, backends and signals.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct SpecString<'a> {
    pub kind: &'a str,
    input: &'a str,
    what: &'static str,
    pairs: BTreeMap<&'a str, &'a str>,
}

impl<'a> SpecString<'a> {
    pub fn parse(what: &'static str, input: &'a str) -> Result<Self> {
        let input = input.trim();
        let (kind, rest) = match input.split_once(':') {
            Some((k, r)) => (k.trim(), r.trim()),
            None => (input, ""),
        };
        if kind.is_empty() {
            return Err(Error::parse(what, input, "missing kind"));
        }
        Self::from_parts(what, input, kind, rest)
    }

    /// Parses a bare `key=value,...` list with no kind prefix.
    pub fn parse_bare(what: &'static str, input: &'a str) -> Result<Self> {
        let input = input.trim();
        Self::from_parts(what, input, "", input)
    }

    fn from_parts(what: &'static str, input: &'a str, kind: &'a str, rest: &'a str) -> Result<Self> {
        let mut pairs = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::parse(what, input, format!("expected key=value, got {item:?}")))?;
            if pairs.insert(k.trim(), v.trim()).is_some() {
                return Err(Error::parse(what, input, format!("duplicate key {k:?}")));
            }
        }
        Ok(SpecString {
            kind,
            input,
            what,
            pairs,
        })
    }

    pub fn err(&self, reason: impl Into<String>) -> Error {
        Error::parse(self.what, self.input, reason)
    }

    pub fn raw(&self, key: &str) -> Option<&'a str> {
        self.pairs.get(key).copied()
    }

    pub fn real(&self, key: &str) -> Result<f64> {
        let raw = self
            .raw(key)
            .ok_or_else(|| self.err(format!("missing key {key:?}")))?;
        parse_real(raw).ok_or_else(|| self.err(format!("{key}={raw:?} is not a number")))
    }

    pub fn real_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            Some(_) => self.real(key),
            None => Ok(default),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let raw = self
            .raw(key)
            .ok_or_else(|| self.err(format!("missing key {key:?}")))?;
        raw.parse()
            .map_err(|_| self.err(format!("{key}={raw:?} is not a non-negative integer")))
    }

    /// Vector value, components separated by `/`.
    pub fn vector(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self
            .raw(key)
            .ok_or_else(|| self.err(format!("missing key {key:?}")))?;
        raw.split('/')
            .map(|c| parse_real(c.trim()).ok_or_else(|| self.err(format!("{key}={raw:?} is not a vector"))))
            .collect()
    }

    /// Rejects any key outside `allowed`.
    pub fn only(&self, allowed: &[&str]) -> Result<()> {
        match self.pairs.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(self.err(format!("unknown key {k:?}"))),
            None => Ok(()),
        }
    }
}

pub(crate) fn parse_real(raw: &str) -> Option<f64> {
    match raw {
        "inf" | "+inf" | "infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => raw.parse::<f64>().ok().filter(|v| !v.is_nan()),
    }
}

/// Formats a real so that it parses back to the same value.
pub(crate) fn fmt_real(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}
