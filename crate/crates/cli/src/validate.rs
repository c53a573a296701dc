//! Engine-vs-oracle and invariant suites behind `wfset validate`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use wfset_core::stft::{closed_form_volume, PhaseConvention, StftEngine};
use wfset_core::{
    backend_norm, membership_score, synth, AnalyticSignal, AssociatedFunction, Backend, Cone, Decision,
    DecisionRule, FreqGrid, GridSpec, Result, ScheduleSpec, WeightSequence, WindowSpec,
};

#[derive(Debug, Serialize)]
pub struct SuiteResult {
    pub suite: &'static str,
    pub passed: bool,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
    pub measured: serde_json::Value,
}

#[derive(Debug, Serialize)]
pub struct ValidationReport {
    pub config: serde_json::Value,
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

pub struct ValidateOptions {
    pub mis_phase: bool,
    pub rule: DecisionRule,
}

pub fn run(opts: &ValidateOptions) -> Result<Vec<SuiteResult>> {
    Ok(vec![
        closed_form_suite(opts.mis_phase)?,
        solidity_suite()?,
        associated_suite()?,
        calibration_suite(&opts.rule)?,
    ])
}

/// Delta and lattice plane wave on `N = 4096, Δx = 1/256` against their
/// closed-form transforms; tolerance `5Δx·max|χ|`.
fn closed_form_suite(mis_phase: bool) -> Result<SuiteResult> {
    let grid = GridSpec::centered(1, 4096, 1.0 / 256.0)?;
    let spec = WindowSpec::new(1.0, 2.0)?;
    let window = spec.sample(&grid)?;
    let phase = if mis_phase {
        PhaseConvention::WindowLocal
    } else {
        PhaseConvention::Absolute
    };
    let engine = StftEngine::new(&grid).with_phase(phase);
    let centers: Vec<Vec<f64>> = (0..21).map(|j| vec![-3.0 + j as f64 * 0.3012345]).collect();
    let tolerance = 5.0 * grid.spacing * window.max_abs();
    let mut errors = serde_json::Map::new();
    let mut passed = true;
    for entry in [
        AnalyticSignal::Delta { x0: vec![0.0] },
        AnalyticSignal::PlaneWave {
            eta: vec![37.0 * 2.0 * PI / 16.0],
        },
    ] {
        let field = synth(&entry, &grid)?;
        let vol = engine.compute(&field, &window, &centers)?;
        let exact = closed_form_volume(&entry, &spec, &vol.centers, &vol.freq_grid, 2048)?;
        let err = vol
            .values()
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        passed &= err <= tolerance;
        errors.insert(entry.kind().to_string(), err.into());
    }
    errors.insert("tolerance".into(), tolerance.into());
    Ok(SuiteResult {
        suite: "closed_form_stft",
        passed,
        degenerate: false,
        measured: errors.into(),
    })
}

/// Random dominated pairs `|g₁| ≤ |g₂|` never reverse the norm order.
fn solidity_suite() -> Result<SuiteResult> {
    let specs = [
        "sobolev:s=-1",
        "sobolev:s=1",
        "flq:q=1,s=0.5",
        "flq:q=3,s=-0.5",
        "flq:q=inf,s=1",
        "ultra:q=2,s=2,h=0.5,t=1",
        "ultra:q=1,s=1.5,h=0.2,t=-1",
    ];
    let backends: Vec<Backend> = specs.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    let freq = FreqGrid::for_grid(&GridSpec::centered(2, 32, 1.0 / 16.0)?);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trials = 210;
    let mut violations = 0;
    for t in 0..trials {
        let backend = &backends[t % backends.len()];
        let cone = Cone::circular(rng.random_range(0.0..2.0 * PI), rng.random_range(0.1..1.4))?;
        let radius = rng.random_range(0.1..1.0) * freq.extent();
        let g2: Vec<Complex64> = (0..freq.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let g1: Vec<Complex64> = g2.iter().map(|z| z * rng.random_range(0.0..=1.0)).collect();
        if backend_norm(&g1, &freq, &cone, backend, radius)? > backend_norm(&g2, &freq, &cone, backend, radius)? {
            violations += 1;
        }
    }
    Ok(SuiteResult {
        suite: "solidity",
        passed: violations == 0,
        degenerate: false,
        measured: serde_json::json!({ "pairs": trials, "violations": violations }),
    })
}

/// `M(λ)` against a direct scan over `p ln λ − s Σ ln k`.
fn associated_suite() -> Result<SuiteResult> {
    let pmax = 1000;
    let mut mismatches = 0;
    let mut checked = 0;
    for s in [1.5, 2.0, 3.0] {
        let af = AssociatedFunction::new(WeightSequence::gevrey(s, pmax)?);
        let mut ln_m = vec![0.0f64];
        let mut acc = 0.0f64;
        for k in 1..=pmax {
            acc += (k as f64).ln();
            ln_m.push(s * acc);
        }
        for j in 0..50 {
            let lambda = 10f64.powf(4.0 * j as f64 / 49.0);
            let l = lambda.ln();
            let brute = ln_m
                .iter()
                .enumerate()
                .map(|(p, lm)| p as f64 * l - lm)
                .fold(0.0f64, f64::max);
            checked += 1;
            mismatches += usize::from(af.value(lambda)? != brute);
        }
    }
    Ok(SuiteResult {
        suite: "associated_function",
        passed: mismatches == 0,
        degenerate: false,
        measured: serde_json::json!({ "evaluations": checked, "mismatches": mismatches }),
    })
}

/// A flat slice must come out singular and a gaussian one regular for
/// `sobolev:s=0`.
fn calibration_suite(rule: &DecisionRule) -> Result<SuiteResult> {
    let freq = FreqGrid::for_grid(&GridSpec::centered(1, 4096, 1.0 / 256.0)?);
    let schedule = ScheduleSpec::default().resolve(&freq)?;
    let backend = Backend::sobolev(0.0)?;
    let flat = vec![Complex64::new(1.0, 0.0); freq.len()];
    let gauss: Vec<Complex64> = (0..freq.len())
        .map(|k| {
            let xi = freq.freq(k)[0];
            Complex64::new((-xi * xi / 200.0).exp(), 0.0)
        })
        .collect();
    let mut measured = serde_json::Map::new();
    let mut passed = true;
    let mut all_inconclusive = true;
    for (name, slice, expected) in [("flat", &flat, Decision::Singular), ("gaussian", &gauss, Decision::Regular)] {
        for positive in [true, false] {
            let s = membership_score(slice, &freq, &Cone::half_line(positive), &backend, &schedule, rule)?;
            passed &= s.decision == expected;
            all_inconclusive &= s.decision == Decision::Inconclusive;
            let key = format!("{name}{}", if positive { "+" } else { "-" });
            measured.insert(key, serde_json::json!({ "tail_ratio": s.tail_ratio, "decision": s.decision }));
        }
    }
    Ok(SuiteResult {
        suite: "calibration",
        passed,
        degenerate: rule.is_degenerate() && all_inconclusive,
        measured: measured.into(),
    })
}
