//! Solid weighted `L^q` backends on the frequency lattice, cone-restricted
//! norms and the dyadic tail-ratio membership score.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Cone;
use crate::params::{fmt_real, SpecString};
use crate::stft::FreqGrid;
use crate::weights::{AssociatedFunction, WeightSequence};

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_SINGULAR_FACTOR: f64 = 4.0;
pub const DEFAULT_ULTRA_PMAX: usize = 300;
/// Relative noise floor below which a slice counts as numerically zero.
pub const NOISE_FLOOR: f64 = 1e-10;
/// Fraction of the lattice extent the schedule may reach.
pub const GUARD_BAND: f64 = 0.9;

/// Radial weight `w(ξ)`.
#[derive(Debug, Clone)]
pub enum Weight {
    /// `(1 + |ξ|²)^{s/2}`.
    Polynomial { s: f64 },
    /// `exp(t · M(h|ξ|))` for the Gevrey sequence of the given order.
    Ultra {
        order: f64,
        pmax: usize,
        h: f64,
        t: f64,
        af: AssociatedFunction,
    },
}

impl PartialEq for Weight {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Weight::Polynomial { s: a }, Weight::Polynomial { s: b }) => a == b,
            (
                Weight::Ultra {
                    order: o1,
                    pmax: p1,
                    h: h1,
                    t: t1,
                    ..
                },
                Weight::Ultra {
                    order: o2,
                    pmax: p2,
                    h: h2,
                    t: t2,
                    ..
                },
            ) => o1 == o2 && p1 == p2 && h1 == h2 && t1 == t2,
            _ => false,
        }
    }
}

impl Weight {
    pub fn at_radius(&self, r: f64) -> f64 {
        match self {
            Weight::Polynomial { s } => {
                if *s == 0.0 {
                    1.0
                } else {
                    (1.0 + r * r).powf(s / 2.0)
                }
            }
            Weight::Ultra { h, t, af, .. } => {
                if *t == 0.0 {
                    1.0
                } else {
                    (t * af.value(h * r).expect("radius is non-negative")).exp()
                }
            }
        }
    }

    pub fn at(&self, xi: &[f64]) -> f64 {
        self.at_radius(xi.iter().map(|c| c * c).sum::<f64>().sqrt())
    }
}

/// A solid space `ℱL^q_w` standing in for `ℱE`.
#[derive(Debug, Clone, PartialEq)]
pub struct Backend {
    q: f64,
    weight: Weight,
}

impl Backend {
    pub fn new(q: f64, weight: Weight) -> Result<Self> {
        if !(q >= 1.0) {
            return Err(Error::Config(format!("exponent q must lie in [1, ∞], got {q}")));
        }
        match &weight {
            Weight::Polynomial { s } if !s.is_finite() => {
                return Err(Error::Config("Sobolev order must be finite".into()))
            }
            Weight::Ultra { h, t, .. } if !(*h > 0.0 && h.is_finite()) || !t.is_finite() => {
                return Err(Error::Domain(format!("ultra weight needs h > 0 and finite t, got h={h}, t={t}")))
            }
            _ => {}
        }
        Ok(Backend { q, weight })
    }

    /// `H^s`: `q = 2`, polynomial weight of order `s`.
    pub fn sobolev(s: f64) -> Result<Self> {
        Backend::new(2.0, Weight::Polynomial { s })
    }

    pub fn flq(q: f64, s: f64) -> Result<Self> {
        Backend::new(q, Weight::Polynomial { s })
    }

    pub fn ultra(q: f64, order: f64, h: f64, t: f64, pmax: usize) -> Result<Self> {
        let seq = WeightSequence::gevrey(order, pmax)?;
        Backend::new(
            q,
            Weight::Ultra {
                order,
                pmax,
                h,
                t,
                af: AssociatedFunction::new(seq),
            },
        )
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    /// `|w g|^q` with exact arithmetic paths for `q ∈ {1, 2}`.
    fn power(&self, v: f64) -> f64 {
        if self.q == 1.0 {
            v
        } else if self.q == 2.0 {
            v * v
        } else {
            v.powf(self.q)
        }
    }

    fn root(&self, v: f64) -> f64 {
        if self.q == 1.0 {
            v
        } else if self.q == 2.0 {
            v.sqrt()
        } else {
            v.powf(1.0 / self.q)
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.weight {
            Weight::Polynomial { s } if self.q == 2.0 => write!(f, "sobolev:s={}", fmt_real(*s)),
            Weight::Polynomial { s } => {
                write!(f, "flq:q={},s={}", fmt_real(self.q), fmt_real(*s))
            }
            Weight::Ultra {
                order, pmax, h, t, ..
            } => {
                write!(
                    f,
                    "ultra:q={},s={},h={},t={}",
                    fmt_real(self.q),
                    fmt_real(*order),
                    fmt_real(*h),
                    fmt_real(*t)
                )?;
                if *pmax != DEFAULT_ULTRA_PMAX {
                    write!(f, ",pmax={pmax}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Backend {
    type Err = Error;

    /// `sobolev:s=<real>`, `flq:q=<real>,s=<real>`,
    /// `ultra:q=<real>,s=<order>,h=<real>,t=<real>[,pmax=<int>]`.
    fn from_str(input: &str) -> Result<Self> {
        let spec = SpecString::parse("backend", input)?;
        match spec.kind {
            "sobolev" => {
                spec.only(&["s"])?;
                Backend::sobolev(spec.real("s")?)
            }
            "flq" => {
                spec.only(&["q", "s"])?;
                Backend::flq(spec.real("q")?, spec.real_or("s", 0.0)?)
            }
            "ultra" => {
                spec.only(&["q", "s", "h", "t", "pmax"])?;
                let pmax = match spec.raw("pmax") {
                    Some(_) => spec.usize("pmax")?,
                    None => DEFAULT_ULTRA_PMAX,
                };
                Backend::ultra(
                    spec.real("q")?,
                    spec.real("s")?,
                    spec.real("h")?,
                    spec.real("t")?,
                    pmax,
                )
            }
            other => Err(spec.err(format!("unknown backend kind {other:?}"))),
        }
    }
}

fn check_finite(g: &[Complex64]) -> Result<()> {
    match g.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
        Some(i) => Err(Error::Data(format!("non-finite value at lattice point {i}"))),
        None => Ok(()),
    }
}

/// `‖θ_Γ θ_{|ξ|≤R} w g‖_{L^q}` on the lattice:
/// `(Δξ^d Σ_{ξ∈Γ, |ξ|≤R} |w(ξ) g(ξ)|^q)^{1/q}`, or the maximum for `q = ∞`.
pub fn backend_norm(g: &[Complex64], freq: &FreqGrid, cone: &Cone, backend: &Backend, radius: f64) -> Result<f64> {
    if g.len() != freq.len() {
        return Err(Error::Data(format!(
            "{} values for a lattice of {}",
            g.len(),
            freq.len()
        )));
    }
    check_finite(g)?;
    if radius > freq.extent() * (1.0 + 1e-12) {
        return Err(Error::Schedule(format!(
            "radius {radius} exceeds the lattice extent {}",
            freq.extent()
        )));
    }
    let weights = WeightTable::new(backend, freq);
    let plan = NormPlan::new(freq, cone, &weights, &[radius]);
    Ok(plan.partial_norms(g, backend)[0])
}

/// `w(ξ)` at every lattice point.
#[derive(Debug, Clone)]
pub struct WeightTable {
    values: Arc<Vec<f64>>,
}

impl WeightTable {
    pub fn new(backend: &Backend, freq: &FreqGrid) -> Self {
        let values = (0..freq.len())
            .map(|k| backend.weight.at(&freq.freq(k)))
            .collect();
        WeightTable {
            values: Arc::new(values),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Lattice points of `Γ ∩ {|ξ| ≤ R_K}` grouped by schedule radius.
#[derive(Debug, Clone)]
pub struct NormPlan {
    /// `(lattice index, weight)` in lattice order, bin by bin.
    entries: Vec<(usize, f64)>,
    /// `entries[bin_start[j]..bin_start[j+1]]` lie in `(R_{j−1}, R_j]`.
    bin_start: Vec<usize>,
    measure: f64,
}

impl NormPlan {
    pub fn new(freq: &FreqGrid, cone: &Cone, weights: &WeightTable, radii: &[f64]) -> Self {
        let mut bins: Vec<Vec<(usize, f64)>> = vec![Vec::new(); radii.len()];
        for k in 0..freq.len() {
            let xi = freq.freq(k);
            if !cone.contains(&xi) {
                continue;
            }
            let r = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
            if let Some(j) = radii.iter().position(|&rj| r <= rj) {
                bins[j].push((k, weights.values[k]));
            }
        }
        let mut bin_start = vec![0];
        let mut entries = Vec::new();
        for b in bins {
            entries.extend(b);
            bin_start.push(entries.len());
        }
        NormPlan {
            entries,
            bin_start,
            measure: freq.cell_measure(),
        }
    }

    /// Number of lattice points inside the largest radius.
    pub fn count(&self) -> usize {
        self.entries.len()
    }

    /// `N(R_j)` for every schedule radius.
    pub fn partial_norms(&self, g: &[Complex64], backend: &Backend) -> Vec<f64> {
        let bins = self.bin_start.len() - 1;
        let mut out = Vec::with_capacity(bins);
        if backend.q.is_infinite() {
            let mut m = 0.0f64;
            for j in 0..bins {
                for &(k, w) in &self.entries[self.bin_start[j]..self.bin_start[j + 1]] {
                    m = m.max(w * g[k].norm());
                }
                out.push(m);
            }
        } else {
            let mut acc = 0.0f64;
            for j in 0..bins {
                let mut bin = 0.0f64;
                for &(k, w) in &self.entries[self.bin_start[j]..self.bin_start[j + 1]] {
                    bin += backend.power(w * g[k].norm());
                }
                acc += bin;
                out.push(backend.root(self.measure * acc));
            }
        }
        out
    }

    /// Largest `|w g|` over the plan's points.
    pub fn peak(&self, g: &[Complex64]) -> f64 {
        self.entries
            .iter()
            .fold(0.0, |m, &(k, w)| m.max(w * g[k].norm()))
    }

    /// `(Δξ^d · count)^{1/q}`, the `L^q` norm of the indicator.
    pub fn measure_factor(&self, q: f64) -> f64 {
        if q.is_infinite() {
            1.0
        } else {
            (self.measure * self.count() as f64).powf(1.0 / q)
        }
    }
}

/// Dyadic radius schedule `R_1 < … < R_K`, `R_{j+1} = 2 R_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    radii: Vec<f64>,
}

/// Unresolved schedule: `count` dyadic radii ending at `top · extent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub count: usize,
    pub top: f64,
}

impl Default for ScheduleSpec {
    /// `{E/16, E/8, E/4, E/2}` with `E = 0.9 × extent`.
    fn default() -> Self {
        ScheduleSpec {
            count: 4,
            top: GUARD_BAND / 2.0,
        }
    }
}

impl ScheduleSpec {
    pub fn resolve(&self, freq: &FreqGrid) -> Result<Schedule> {
        if self.count == 0 {
            return Err(Error::Schedule("empty schedule".into()));
        }
        let top = self.top * freq.extent();
        let radii = (0..self.count)
            .map(|j| top / 2f64.powi((self.count - 1 - j) as i32))
            .collect();
        Schedule::new(radii, freq)
    }
}

impl fmt::Display for ScheduleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dyadic:count={},top={}", self.count, fmt_real(self.top))
    }
}

impl FromStr for ScheduleSpec {
    type Err = Error;

    /// `dyadic:count=<int>,top=<fraction of the extent>`.
    fn from_str(input: &str) -> Result<Self> {
        let spec = SpecString::parse("schedule", input)?;
        if spec.kind != "dyadic" {
            return Err(spec.err(format!("unknown schedule kind {:?}", spec.kind)));
        }
        spec.only(&["count", "top"])?;
        let d = ScheduleSpec::default();
        Ok(ScheduleSpec {
            count: match spec.raw("count") {
                Some(_) => spec.usize("count")?,
                None => d.count,
            },
            top: spec.real_or("top", d.top)?,
        })
    }
}

impl Schedule {
    pub fn new(radii: Vec<f64>, freq: &FreqGrid) -> Result<Self> {
        if radii.len() < 4 {
            return Err(Error::Schedule(format!(
                "need at least 4 radii, got {}",
                radii.len()
            )));
        }
        if !(radii[0] > 0.0) {
            return Err(Error::Schedule("radii must be positive".into()));
        }
        if radii.windows(2).any(|w| ((w[1] / w[0]) - 2.0).abs() > 1e-9) {
            return Err(Error::Schedule("radii must be dyadic".into()));
        }
        let limit = GUARD_BAND * freq.extent();
        let last = *radii.last().unwrap();
        if last > limit * (1.0 + 1e-12) {
            return Err(Error::Schedule(format!(
                "largest radius {last} exceeds {GUARD_BAND} × extent = {limit}"
            )));
        }
        Ok(Schedule { radii })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Regular,
    Singular,
    Inconclusive,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Regular => "regular",
            Decision::Singular => "singular",
            Decision::Inconclusive => "inconclusive",
        })
    }
}

/// Tail tolerance `ε` and the singular threshold `factor · ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub epsilon: f64,
    pub singular_factor: f64,
}

impl Default for DecisionRule {
    fn default() -> Self {
        DecisionRule {
            epsilon: DEFAULT_EPSILON,
            singular_factor: DEFAULT_SINGULAR_FACTOR,
        }
    }
}

impl DecisionRule {
    pub fn with_epsilon(epsilon: f64) -> Self {
        DecisionRule {
            epsilon,
            ..Default::default()
        }
    }

    /// `ε ≤ 0` admits no regular verdict and is reported as degenerate.
    pub fn is_degenerate(&self) -> bool {
        !(self.epsilon > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipScore {
    pub partial_norms: Vec<f64>,
    pub tail_ratio: f64,
    pub decision: Decision,
    pub below_noise_floor: bool,
    pub degenerate: bool,
}

/// Scores `N(R_1), …, N(R_K)` from a plan. `lattice_peak` is `max |g|`
/// over the whole lattice.
pub fn score_partial_norms(
    partial_norms: Vec<f64>,
    lattice_peak: f64,
    measure_factor: f64,
    rule: &DecisionRule,
) -> MembershipScore {
    let k = partial_norms.len();
    let top = partial_norms[k - 1];
    let prev = partial_norms[k - 2];
    let below = top == 0.0 || top < NOISE_FLOOR * lattice_peak * measure_factor;
    let tail_ratio = if below {
        0.0
    } else {
        (1.0 - prev / top).clamp(0.0, 1.0)
    };
    let decision = if rule.is_degenerate() {
        Decision::Inconclusive
    } else if below || tail_ratio <= rule.epsilon {
        Decision::Regular
    } else if tail_ratio >= rule.singular_factor * rule.epsilon {
        Decision::Singular
    } else {
        Decision::Inconclusive
    };
    MembershipScore {
        partial_norms,
        tail_ratio,
        decision,
        below_noise_floor: below,
        degenerate: rule.is_degenerate(),
    }
}

/// Dyadic tail-ratio test for `θ_Γ g ∈ ℱE`.
///
/// `tail_ratio = 1 − N(R_{K−1})/N(R_K)`; regular iff `≤ ε`, singular iff
/// `≥ factor · ε` and `N(R_K)` clears the noise floor, otherwise
/// inconclusive.
pub fn membership_score(
    g: &[Complex64],
    freq: &FreqGrid,
    cone: &Cone,
    backend: &Backend,
    schedule: &Schedule,
    rule: &DecisionRule,
) -> Result<MembershipScore> {
    if g.len() != freq.len() {
        return Err(Error::Data("slice does not match the lattice".into()));
    }
    check_finite(g)?;
    Schedule::new(schedule.radii.clone(), freq)?;
    let weights = WeightTable::new(backend, freq);
    let plan = NormPlan::new(freq, cone, &weights, schedule.radii());
    let peak = g.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    Ok(score_partial_norms(
        plan.partial_norms(g, backend),
        peak,
        plan.measure_factor(backend.q),
        rule,
    ))
}

/// `sup_ξ w(ξ)/w(ξ − η)` over the lattice.
pub fn weight_growth(backend: &Backend, freq: &FreqGrid, eta: &[f64]) -> f64 {
    let w = &backend.weight;
    (0..freq.len())
        .map(|k| {
            let xi = freq.freq(k);
            let shifted: Vec<f64> = xi.iter().zip(eta).map(|(a, b)| a - b).collect();
            w.at(&xi) / w.at(&shifted)
        })
        .fold(1.0, f64::max)
}

/// Smallest `τ` (to bisection accuracy) with
/// `weight_growth(η) ≤ exp(M(τ|η|))` for every `η` in `etas`. Only defined
/// for ultradistributional weights; `None` if no `τ ≤ tau_max` works.
pub fn fit_growth_tau(backend: &Backend, freq: &FreqGrid, etas: &[Vec<f64>], tau_max: f64) -> Option<f64> {
    let Weight::Ultra { af, .. } = &backend.weight else {
        return None;
    };
    let growth: Vec<(f64, f64)> = etas
        .iter()
        .map(|eta| {
            let r = eta.iter().map(|c| c * c).sum::<f64>().sqrt();
            (r, weight_growth(backend, freq, eta).ln())
        })
        .collect();
    let ok = |tau: f64| {
        growth
            .iter()
            .all(|&(r, lg)| lg <= af.value(tau * r).unwrap_or(f64::INFINITY) + 1e-12)
    };
    if !ok(tau_max) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, tau_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}
