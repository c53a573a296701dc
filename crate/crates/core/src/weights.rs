//! Weight sequences `M_p`, their structural conditions, and the associated
//! function `M(λ) = sup_p ln₊(λ^p / M_p)`.
//!
//! Sequences are stored as `ln M_p` so that prefixes such as `(p!)^s` with
//! `p` in the hundreds stay representable.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{fmt_real, SpecString};

/// Largest exponent tried when searching `H = 2^k` for (M.2).
const MAX_H_EXPONENT: u32 = 1023;

/// Relative slack for log-space comparisons.
const LOG_TOL: f64 = 1e-12;

/// `ln p!` for `p = 0..=pmax`, accumulated as `Σ ln k`.
pub fn log_factorials(pmax: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(pmax + 1);
    let mut acc = 0.0f64;
    out.push(acc);
    for k in 1..=pmax {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Origin {
    Gevrey { order: f64 },
    Values,
}

/// A finite prefix `M_0, …, M_pmax` of a weight sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    origin: Origin,
    log_values: Vec<f64>,
}

/// The Gevrey sequence `M_p = (p!)^s`.
pub fn gevrey_sequence(s: f64, pmax: usize) -> Result<WeightSequence> {
    WeightSequence::gevrey(s, pmax)
}

impl WeightSequence {
    pub fn gevrey(s: f64, pmax: usize) -> Result<Self> {
        if !(s.is_finite() && s > 1.0) {
            return Err(Error::InvalidOrder(s));
        }
        if pmax < 2 {
            return Err(Error::InvalidSize(format!("pmax must be at least 2, got {pmax}")));
        }
        let log_values = log_factorials(pmax).into_iter().map(|lf| s * lf).collect();
        Ok(WeightSequence {
            origin: Origin::Gevrey { order: s },
            log_values,
        })
    }

    /// A user-supplied prefix. Only `M_0 = M_1 = 1` and positivity are
    /// enforced; (M.1)–(M.4) are reported by [`verify_conditions`].
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidSize(format!(
                "need at least M_0..M_2, got {} values",
                values.len()
            )));
        }
        if let Some((p, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidSequence(format!("M_{p} = {v} is not a positive real")));
        }
        if values[0] != 1.0 || values[1] != 1.0 {
            return Err(Error::InvalidSequence("M_0 and M_1 must both equal 1".into()));
        }
        Ok(WeightSequence {
            origin: Origin::Values,
            log_values: values.iter().map(|v| v.ln()).collect(),
        })
    }

    pub fn pmax(&self) -> usize {
        self.log_values.len() - 1
    }

    /// Gevrey order `s`, when the sequence was built as `(p!)^s`.
    pub fn order(&self) -> Option<f64> {
        match self.origin {
            Origin::Gevrey { order } => Some(order),
            Origin::Values => None,
        }
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    pub fn ln_value(&self, p: usize) -> f64 {
        self.log_values[p]
    }

    /// `M_p` itself; overflows to infinity for large prefixes.
    pub fn value(&self, p: usize) -> f64 {
        if p <= 1 {
            return 1.0;
        }
        self.log_values[p].exp()
    }
}

impl fmt::Display for WeightSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.origin {
            Origin::Gevrey { order } => write!(f, "gevrey:s={},pmax={}", fmt_real(order), self.pmax()),
            Origin::Values => {
                let vals: Vec<String> = (0..=self.pmax()).map(|p| fmt_real(self.value(p))).collect();
                write!(f, "values:{}", vals.join("/"))
            }
        }
    }
}

impl FromStr for WeightSequence {
    type Err = Error;

    /// `gevrey:s=<real>,pmax=<int>` or `values:<v0>/<v1>/…`.
    fn from_str(input: &str) -> Result<Self> {
        let trimmed = input.trim();
        if let Some(list) = trimmed.strip_prefix("values:") {
            let vals = list
                .split(['/', ','])
                .map(|v| {
                    crate::params::parse_real(v.trim())
                        .ok_or_else(|| Error::parse("weight sequence", input, format!("bad value {v:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            return WeightSequence::from_values(&vals);
        }
        let spec = SpecString::parse("weight sequence", trimmed)?;
        match spec.kind {
            "gevrey" => {
                spec.only(&["s", "pmax"])?;
                WeightSequence::gevrey(spec.real("s")?, spec.usize("pmax")?)
            }
            other => Err(spec.err(format!("unknown sequence kind {other:?}"))),
        }
    }
}

/// Constants for (M.2) on the prefix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct M2Constants {
    pub c0: f64,
    #[serde(rename = "H")]
    pub h: f64,
}

/// Finite-prefix surrogate constant for (M.3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct M3Surrogate {
    pub c0_prime: f64,
    /// Always true: the tail sum is truncated at `pmax`.
    pub surrogate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub sequence: String,
    pub pmax: usize,
    pub m1_ok: bool,
    pub m2: Option<M2Constants>,
    pub m3: Option<M3Surrogate>,
    pub m4_ok: bool,
}

fn le_log(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + LOG_TOL * lhs.abs().max(rhs.abs()).max(1.0)
}

/// Checks (M.1)–(M.4) on the stored prefix. Failures are reported, never
/// raised.
pub fn verify_conditions(seq: &WeightSequence) -> ConditionReport {
    let lm = seq.log_values();
    let pmax = seq.pmax();

    let m1_ok = (1..pmax).all(|p| le_log(2.0 * lm[p], lm[p - 1] + lm[p + 1]));

    let lf = log_factorials(pmax);
    let m4_ok = (1..pmax).all(|p| {
        le_log(
            2.0 * (lm[p] - lf[p]),
            (lm[p - 1] - lf[p - 1]) + (lm[p + 1] - lf[p + 1]),
        )
    });

    ConditionReport {
        sequence: seq.to_string(),
        pmax,
        m1_ok,
        m2: m2_constants(lm),
        m3: m3_surrogate(lm),
        m4_ok,
    }
}

/// Smallest `H = 2^k` admitting `c0 = 1`, i.e.
/// `M_p ≤ H^p min_q M_q M_{p-q}` on the whole prefix.
fn m2_constants(lm: &[f64]) -> Option<M2Constants> {
    let min_split: Vec<f64> = (0..lm.len())
        .map(|p| {
            (0..=p)
                .map(|q| lm[q] + lm[p - q])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let ln2 = std::f64::consts::LN_2;
    (0..=MAX_H_EXPONENT).find_map(|k| {
        let ln_h = k as f64 * ln2;
        let ok = (0..lm.len()).all(|p| le_log(lm[p], p as f64 * ln_h + min_split[p]));
        ok.then(|| M2Constants {
            c0: 1.0,
            h: 2f64.powi(k as i32),
        })
    })
}

fn m3_surrogate(lm: &[f64]) -> Option<M3Surrogate> {
    let pmax = lm.len() - 1;
    let mut worst = 1.0f64;
    // Tail sums accumulated from the top so each p costs O(1).
    let mut tail = 0.0f64;
    for p in (1..pmax).rev() {
        tail += (lm[p] - lm[p + 1]).exp();
        let rhs = p as f64 * (lm[p] - lm[p + 1]).exp();
        let ratio = tail / rhs;
        if !ratio.is_finite() {
            return None;
        }
        worst = worst.max(ratio);
    }
    Some(M3Surrogate {
        c0_prime: worst,
        surrogate: true,
    })
}

/// One evaluation of the associated function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssociatedValue {
    pub value: f64,
    /// Index attaining the maximum (0 when the value is 0).
    pub argmax: usize,
    /// The maximum sits at `pmax`, so the true supremum may be larger.
    pub truncated: bool,
}

/// `M(λ) = sup_{p ≤ pmax} ln₊(λ^p / M_p)` for a fixed sequence.
#[derive(Debug, Clone)]
pub struct AssociatedFunction {
    source: Arc<WeightSequence>,
}

impl AssociatedFunction {
    pub fn new(source: WeightSequence) -> Self {
        AssociatedFunction {
            source: Arc::new(source),
        }
    }

    pub fn sequence(&self) -> &WeightSequence {
        &self.source
    }

    pub fn evaluate(&self, lambda: f64) -> Result<AssociatedValue> {
        if !(lambda > 0.0) || lambda.is_nan() {
            return Err(Error::Domain(format!("associated function needs λ > 0, got {lambda}")));
        }
        let ln_lambda = lambda.ln();
        let mut best = 0.0f64;
        let mut argmax = 0usize;
        for (p, lm) in self.source.log_values().iter().enumerate() {
            let v = p as f64 * ln_lambda - lm;
            if v > best {
                best = v;
                argmax = p;
            }
        }
        Ok(AssociatedValue {
            value: best,
            argmax,
            truncated: argmax == self.source.pmax(),
        })
    }

    /// `M(λ)`, with `M(0) = 0` by continuity.
    pub fn value(&self, lambda: f64) -> Result<f64> {
        if lambda == 0.0 {
            return Ok(0.0);
        }
        Ok(self.evaluate(lambda)?.value)
    }
}

/// `M(λ)`; see [`AssociatedFunction::evaluate`] for the truncation flag.
pub fn associated_function(af: &AssociatedFunction, lambda: f64) -> Result<f64> {
    Ok(af.evaluate(lambda)?.value)
}

/// `exp(t · M(h|ξ|))`.
pub fn ultra_weight(af: &AssociatedFunction, h: f64, t: f64, xi: &[f64]) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("weight scale h must be positive, got {h}")));
    }
    let r = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
    if t == 0.0 {
        return Ok(1.0);
    }
    Ok((t * af.value(h * r)?).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gevrey_small_prefix() {
        let seq = gevrey_sequence(2.0, 3).unwrap();
        let vals: Vec<f64> = (0..=3).map(|p| seq.value(p)).collect();
        for (got, want) in vals.iter().zip([1.0, 1.0, 4.0, 36.0]) {
            assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
        }
        assert_eq!(seq.value(0), 1.0);
        assert_eq!(seq.value(1), 1.0);
    }

    #[test]
    fn gevrey_rejects_bad_parameters() {
        assert!(matches!(gevrey_sequence(1.0, 10), Err(Error::InvalidOrder(_))));
        assert!(matches!(gevrey_sequence(0.5, 10), Err(Error::InvalidOrder(_))));
        assert!(matches!(gevrey_sequence(2.0, 1), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn gevrey_300_does_not_overflow() {
        let seq = gevrey_sequence(2.0, 300).unwrap();
        assert!(seq.ln_value(300).is_finite());
        assert!(seq.value(300).is_infinite());
    }

    #[test]
    fn invariants_hold_on_exhaustive_prefix() {
        let seq = gevrey_sequence(2.0, 100).unwrap();
        let lm = seq.log_values();
        assert_eq!(lm[0], 0.0);
        assert_eq!(lm[1], 0.0);
        for p in 1..100 {
            assert!(2.0 * lm[p] <= lm[p - 1] + lm[p + 1] + 1e-9);
        }
        let r = verify_conditions(&seq);
        assert!(r.m1_ok && r.m4_ok);
    }

    #[test]
    fn gevrey_two_has_h_four() {
        let r = verify_conditions(&gevrey_sequence(2.0, 50).unwrap());
        assert!(r.m1_ok);
        assert_eq!(r.m2, Some(M2Constants { c0: 1.0, h: 4.0 }));
        let m3 = r.m3.unwrap();
        assert!(m3.surrogate && m3.c0_prime >= 1.0);
    }

    #[test]
    fn m2_matches_exhaustive_minimisation() {
        // Brute force: for every H = 2^k, test every (p, q) pair directly.
        for s in [1.5, 2.0, 3.0] {
            let seq = gevrey_sequence(s, 40).unwrap();
            let lm = seq.log_values();
            let ok = |k: i32| {
                let ln_h = k as f64 * 2f64.ln();
                (0..=40).all(|p| {
                    (0..=p).all(|q| lm[p] <= p as f64 * ln_h + lm[q] + lm[p - q] + 1e-9)
                })
            };
            let k = (0..10).find(|&k| ok(k)).unwrap();
            let r = verify_conditions(&seq);
            assert_eq!(r.m2.unwrap().h, 2f64.powi(k), "s = {s}");
        }
    }

    #[test]
    fn log_convexity_violation_detected() {
        let seq = WeightSequence::from_values(&[1.0, 1.0, 1.0, 6.0, 1.0]).unwrap();
        let r = verify_conditions(&seq);
        assert!(!r.m1_ok);
    }

    #[test]
    fn value_list_validation() {
        assert!(WeightSequence::from_values(&[1.0, 2.0, 3.0]).is_err());
        assert!(WeightSequence::from_values(&[1.0, 1.0]).is_err());
        assert!(WeightSequence::from_values(&[1.0, 1.0, -1.0]).is_err());
    }

    #[test]
    fn m4_for_gevrey_three() {
        assert!(verify_conditions(&gevrey_sequence(3.0, 50).unwrap()).m4_ok);
    }

    #[test]
    fn associated_function_examples() {
        let af = AssociatedFunction::new(gevrey_sequence(2.0, 60).unwrap());
        assert_eq!(associated_function(&af, 1.0).unwrap(), 0.0);
        assert_eq!(associated_function(&af, 0.3).unwrap(), 0.0);
        // 10^3 / (3!)^2 = 250 / 9 is the largest term.
        let m10 = af.evaluate(10.0).unwrap();
        assert_eq!(m10.argmax, 3);
        assert!((m10.value - (250.0f64 / 9.0).ln()).abs() < 1e-12);
        assert!(!m10.truncated);
        assert!(associated_function(&af, 4.0).unwrap() >= associated_function(&af, 2.0).unwrap());
        assert!(matches!(af.evaluate(0.0), Err(Error::Domain(_))));
        assert!(matches!(af.evaluate(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn truncation_is_flagged() {
        let af = AssociatedFunction::new(gevrey_sequence(2.0, 5).unwrap());
        assert!(af.evaluate(1e6).unwrap().truncated);
        assert!(!af.evaluate(2.0).unwrap().truncated);
    }

    #[test]
    fn ultra_weight_examples() {
        let af = AssociatedFunction::new(gevrey_sequence(2.0, 60).unwrap());
        assert_eq!(ultra_weight(&af, 1.0, 1.0, &[0.0]).unwrap(), 1.0);
        assert_eq!(ultra_weight(&af, 0.7, 0.0, &[123.0, 4.0]).unwrap(), 1.0);
        let w = ultra_weight(&af, 1.0, 1.0, &[10.0]).unwrap();
        assert!((w - 250.0 / 9.0).abs() < 1e-9);
        assert!(ultra_weight(&af, 0.0, 1.0, &[1.0]).is_err());
    }

    #[test]
    fn sequence_string_round_trip() {
        let seq: WeightSequence = "gevrey:s=2.5,pmax=40".parse().unwrap();
        assert_eq!(seq.order(), Some(2.5));
        assert_eq!(seq.to_string(), "gevrey:s=2.5,pmax=40");
        let vals: WeightSequence = "values:1,1,1,6,1".parse().unwrap();
        assert_eq!(vals.pmax(), 4);
        assert!("gevrey:s=2".parse::<WeightSequence>().is_err());
        assert!("poly:s=2".parse::<WeightSequence>().is_err());
    }
}
