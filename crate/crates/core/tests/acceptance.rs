//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p wfset-core --test acceptance`.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wfset_core::detector::{sigma_global, sweep, DetectorParams, SweepConfig, WavefrontReport};
use wfset_core::stft::{closed_form_volume, StftEngine};
use wfset_core::{
    backend_norm, direction_grid, shrink_margin, synth, AnalyticSignal, AssociatedFunction, Backend, Cone,
    Decision, DecisionRule, FreqGrid, GridSpec, SampledField, ScheduleSpec, WeightSequence, WindowSpec,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.detail = format!("{}; {:.2}s", o.detail, took.as_secs_f64());
    if let Some(limit) = limit {
        if took > limit {
            o.pass = false;
            o.detail = format!("{} (limit {}s)", o.detail, limit.as_secs());
        }
    }
    o
}

// ---------------------------------------------------------------- 1

/// Largest `|engine − closed form|` over irregular, unsnapped centres.
fn engine_error(n: usize, dx: f64, entry: &AnalyticSignal, window: WindowSpec, centers: &[Vec<f64>]) -> f64 {
    let grid = GridSpec::centered(1, n, dx).unwrap();
    let field = synth(entry, &grid).unwrap();
    let w = window.sample(&grid).unwrap();
    let engine = StftEngine::new(&grid);
    let vol = engine.compute(&field, &w, centers).unwrap();
    let exact = closed_form_volume(entry, &window, centers, &vol.freq_grid, 4096).unwrap();
    vol.values()
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let window = WindowSpec::new(1.0, 2.0).unwrap();
    let centers: Vec<Vec<f64>> = (0..101).map(|j| vec![-3.0 + j as f64 * 0.0601234567]).collect();
    // The lattice spacing 2π/16 is the same on both grids.
    let eta = 37.0 * 2.0 * PI / 16.0;
    let entries = [
        AnalyticSignal::Delta { x0: vec![0.0] },
        AnalyticSignal::PlaneWave { eta: vec![eta] },
    ];
    let dx = 1.0 / 256.0;
    let mut pass = true;
    let mut detail = Vec::new();
    for e in &entries {
        let coarse = engine_error(4096, dx, e, window, &centers);
        let fine = engine_error(8192, dx / 2.0, e, window, &centers);
        let bound = 5.0 * dx;
        let ok = coarse <= bound && fine <= 0.75 * coarse;
        pass &= ok;
        detail.push(format!(
            "{}: err {:.3e} (bound {:.3e}), halved {:.3e} (ratio {:.3})",
            e.kind(),
            coarse,
            bound,
            fine,
            fine / coarse
        ));
    }
    outcome(pass, detail.join("; "))
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let pmax = 2000;
    let mut pass = true;
    let mut detail = Vec::new();
    for s in [1.5, 2.0, 3.0] {
        let af = AssociatedFunction::new(WeightSequence::gevrey(s, pmax).unwrap());
        // Independent evaluation: ln M_p = s Σ ln k, maximised by direct scan.
        let mut ln_m = vec![0.0f64];
        let mut acc = 0.0f64;
        for k in 1..=pmax {
            acc += (k as f64).ln();
            ln_m.push(s * acc);
        }
        let brute = |lambda: f64| {
            let l = lambda.ln();
            ln_m.iter()
                .enumerate()
                .map(|(p, lm)| p as f64 * l - lm)
                .fold(0.0f64, f64::max)
        };
        let mut mismatches = 0;
        for j in 0..50 {
            let lambda = 10f64.powf(4.0 * j as f64 / 49.0);
            if af.value(lambda).unwrap() != brute(lambda) {
                mismatches += 1;
            }
        }
        let zero_ok = [1e-6, 0.3, 0.999, 1.0].iter().all(|&l| af.value(l).unwrap() == 0.0);
        let ratio = af.value(2e4).unwrap() / af.value(1e4).unwrap();
        let target = 2f64.powf(1.0 / s);
        let ratio_ok = ((ratio - target) / target).abs() <= 0.1;
        pass &= mismatches == 0 && zero_ok && ratio_ok;
        detail.push(format!(
            "s={s}: {mismatches} mismatches, M(2λ)/M(λ)={ratio:.4} vs {target:.4}"
        ));
    }
    outcome(pass, detail.join("; "))
}

// ---------------------------------------------------------------- 3

fn all_backends() -> Vec<Backend> {
    let specs = [
        "sobolev:s=-1",
        "sobolev:s=0",
        "sobolev:s=0.5",
        "sobolev:s=2.5",
        "flq:q=1,s=0",
        "flq:q=1,s=1.5",
        "flq:q=1.5,s=-0.5",
        "flq:q=3,s=1",
        "flq:q=inf,s=0",
        "flq:q=inf,s=2",
        "ultra:q=1,s=2,h=0.5,t=1",
        "ultra:q=2,s=1.5,h=0.2,t=1",
        "ultra:q=2,s=3,h=1,t=-1",
        "ultra:q=inf,s=2,h=0.1,t=0.5",
        "ultra:q=2.5,s=2,h=0.3,t=0",
    ];
    specs.iter().map(|s| s.parse().unwrap()).collect()
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let backends = all_backends();
    let grids = [
        GridSpec::centered(1, 256, 1.0 / 32.0).unwrap(),
        GridSpec::centered(2, 32, 1.0 / 16.0).unwrap(),
    ];
    let freqs: Vec<FreqGrid> = grids.iter().map(FreqGrid::for_grid).collect();
    let mut violations = 0;
    let trials = 1000;
    for trial in 0..trials {
        let backend = &backends[trial % backends.len()];
        let freq = &freqs[rng.random_range(0..2)];
        let cone = if freq.dim == 1 {
            Cone::half_line(rng.random_bool(0.5))
        } else {
            Cone::circular(rng.random_range(0.0..2.0 * PI), rng.random_range(0.05..1.5)).unwrap()
        };
        let radius = rng.random_range(0.05..1.0) * freq.extent();
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let g2: Vec<Complex64> = (0..freq.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
            .collect();
        let g1: Vec<Complex64> = g2
            .iter()
            .map(|z| {
                let u: f64 = if rng.random_bool(0.2) { 1.0 } else { rng.random_range(0.0..1.0) };
                let cand = Complex64::from_polar(u * z.norm(), rng.random_range(0.0..2.0 * PI));
                if cand.norm() <= z.norm() {
                    cand
                } else {
                    *z
                }
            })
            .collect();
        let n1 = backend_norm(&g1, freq, &cone, backend, radius).unwrap();
        let n2 = backend_norm(&g2, freq, &cone, backend, radius).unwrap();
        if n1 > n2 {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations in {trials} dominated pairs over {} backends", backends.len()),
    )
}

// ---------------------------------------------------------------- 4

fn delta_sweep(window: WindowSpec, s: f64, refine: bool) -> (GridSpec, WavefrontReport) {
    let grid = GridSpec::centered(1, 4096, 1.0 / 256.0).unwrap();
    let f = synth(&AnalyticSignal::Delta { x0: vec![0.0] }, &grid).unwrap();
    let mut params = DetectorParams::new(window, Backend::sobolev(s).unwrap());
    params.refine = refine;
    let cfg = SweepConfig {
        stride: 4,
        span: Some(0.5),
        directions: direction_grid(1, 2).unwrap(),
        params,
    };
    let r = sweep(&f, &cfg).unwrap();
    (grid, r)
}

fn criterion_4() -> Outcome {
    let window = WindowSpec::new(0.1, 2.0).unwrap();
    let (grid, r0) = delta_sweep(window, 0.0, false);
    let reach = window.radius + 8.0 * grid.spacing;
    let mut near_wrong = 0;
    let mut far_wrong = 0;
    for c in &r0.cells {
        if c.x[0].abs() < reach {
            near_wrong += usize::from(c.decision != Decision::Singular);
        } else {
            far_wrong += usize::from(c.decision != Decision::Regular);
        }
    }
    let (_, r1) = delta_sweep(window, -1.0, false);
    let not_regular = r1.cells.iter().filter(|c| c.decision != Decision::Regular).count();
    outcome(
        near_wrong == 0 && far_wrong == 0 && not_regular == 0,
        format!(
            "{} x-cells; s=0: {near_wrong} near cells not singular, {far_wrong} far cells not regular; s=-1: {not_regular} cells not regular",
            r0.cells.len() / 2
        ),
    )
}

// ---------------------------------------------------------------- 5

fn half_plane_field() -> SampledField {
    // At 1/128 the R = 0.1 window spans under 13 samples and its edge is unresolved.
    let grid = GridSpec::centered(2, 256, 1.0 / 256.0).unwrap();
    synth(&AnalyticSignal::half_plane(0.0, 0.0), &grid).unwrap()
}

fn half_plane_config(window: WindowSpec, refine: bool, span: Option<f64>) -> SweepConfig {
    let mut params = DetectorParams::new(window, Backend::sobolev(1.0).unwrap());
    params.refine = refine;
    SweepConfig {
        stride: 4,
        span,
        directions: direction_grid(2, 16).unwrap(),
        params,
    }
}

fn angle_to_normal(dir: &[f64]) -> f64 {
    // Normal (1, 0); the conormal set is {±n}.
    dir[0].abs().clamp(-1.0, 1.0).acos()
}

fn criterion_5() -> Outcome {
    let f = half_plane_field();
    let window = WindowSpec::new(0.1, 2.0).unwrap();
    let r = sweep(&f, &half_plane_config(window, true, None)).unwrap();
    let reach = window.radius + 8.0 * f.grid().spacing;
    let step = 2.0 * PI / 16.0;
    let mut misdirected = 0;
    let mut far_singular = 0;
    let mut interior = 0;
    let mut interior_regular = 0;
    let mut singular = 0;
    for c in &r.cells {
        let dist = c.x[0].abs();
        if dist > reach {
            interior += 1;
            interior_regular += usize::from(c.decision == Decision::Regular);
            far_singular += usize::from(c.decision == Decision::Singular);
        } else if c.decision == Decision::Singular {
            singular += 1;
            if angle_to_normal(&c.dir) > step + 1e-9 {
                misdirected += 1;
            }
        }
    }
    let frac = interior_regular as f64 / interior as f64;
    outcome(
        misdirected == 0 && frac >= 0.95 && far_singular == 0 && singular > 0,
        format!(
            "{} cells; {singular} boundary singular, {misdirected} beyond 22.5° of ±n; interior regular {:.4}; {far_singular} far singular",
            r.cells.len(),
            frac
        ),
    )
}

// ---------------------------------------------------------------- 6

fn singular_set(v: &[wfset_core::detector::DirectionVerdict], allow_inconclusive: bool) -> Vec<bool> {
    v.iter()
        .map(|d| d.decision == Decision::Singular || (allow_inconclusive && d.decision == Decision::Inconclusive))
        .collect()
}

fn criterion_6() -> Outcome {
    let rule = DecisionRule::default();
    let sched = ScheduleSpec::default();
    let mut violations = 0;
    let mut checks = 0;
    let mut singular_seen = 0;

    // Delta on a line.
    let g1 = GridSpec::centered(1, 4096, 1.0 / 256.0).unwrap();
    let delta = synth(&AnalyticSignal::Delta { x0: vec![0.0] }, &g1).unwrap();
    let dirs1 = direction_grid(1, 2).unwrap();
    let b0 = Backend::sobolev(0.0).unwrap();
    let base = sigma_global(&delta, &b0, &dirs1, 0.0, &sched, &rule).unwrap();
    let allowed = singular_set(&base, true);
    for (r, c) in [(0.5, 0.0), (1.0, 0.3), (2.0, -1.0), (0.25, 0.2), (0.25, 1.0)] {
        let psi = WindowSpec::new(r, 2.0).unwrap();
        let cut = delta.multiplied_by(|x| psi.eval(&[x[0] - c]));
        let v = sigma_global(&cut, &b0, &dirs1, 0.0, &sched, &rule).unwrap();
        for (i, s) in singular_set(&v, false).into_iter().enumerate() {
            checks += 1;
            singular_seen += usize::from(s);
            violations += usize::from(s && !allowed[i]);
        }
    }

    // Half-plane under a large bump so the field is compactly supported.
    let g2 = GridSpec::centered(2, 256, 1.0 / 128.0).unwrap();
    let outer = WindowSpec::new(0.5, 2.0).unwrap();
    for normal_deg in [0.0, 30.0] {
        let hp = synth(&AnalyticSignal::half_plane(normal_deg, 0.05), &g2)
            .unwrap()
            .multiplied_by(|x| outer.eval(x));
        let dirs2 = direction_grid(2, 16).unwrap();
        let b1 = Backend::sobolev(1.0).unwrap();
        let alpha = 15f64.to_radians();
        let wide = sigma_global(&hp, &b1, &dirs2, 2.0 * alpha, &sched, &rule).unwrap();
        let allowed = singular_set(&wide, true);
        for (r, c) in [(0.2, [0.0, 0.0]), (0.3, [0.1, -0.2]), (0.15, [0.3, 0.3]), (0.4, [-0.05, 0.1])] {
            let psi = WindowSpec::new(r, 3.0).unwrap();
            let cut = hp.multiplied_by(|x| psi.eval(&[x[0] - c[0], x[1] - c[1]]));
            let v = sigma_global(&cut, &b1, &dirs2, alpha, &sched, &rule).unwrap();
            for (i, s) in singular_set(&v, false).into_iter().enumerate() {
                checks += 1;
                singular_seen += usize::from(s);
                violations += usize::from(s && !allowed[i]);
            }
        }
    }
    outcome(
        violations == 0 && singular_seen > 0,
        format!("{violations} violations over {checks} direction checks ({singular_seen} singular after cutoff)"),
    )
}

// ---------------------------------------------------------------- 7

fn singular_cells(r: &WavefrontReport) -> HashSet<(Vec<usize>, usize)> {
    r.cells
        .iter()
        .filter(|c| c.decision == Decision::Singular)
        .map(|c| (c.x_index.clone(), c.direction_index))
        .collect()
}

fn covered(r: &WavefrontReport) -> HashSet<Vec<usize>> {
    r.cells.iter().map(|c| c.x_index.clone()).collect()
}

/// Overlap of the singular sets restricted to the cells both sweeps visit.
fn jaccard(a: &WavefrontReport, b: &WavefrontReport) -> f64 {
    let common: HashSet<_> = covered(a).intersection(&covered(b)).cloned().collect();
    let keep = |r| -> HashSet<_> { singular_cells(r).into_iter().filter(|c| common.contains(&c.0)).collect() };
    let (sa, sb) = (keep(a), keep(b));
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

fn criterion_7() -> Outcome {
    let w1 = WindowSpec::new(0.1, 2.0).unwrap();
    let w2 = WindowSpec::new(0.2, 3.0).unwrap();
    let f2 = half_plane_field();

    let d_single = jaccard(&delta_sweep(w1, 0.0, false).1, &delta_sweep(w2, 0.0, false).1);
    let d_refined = jaccard(&delta_sweep(w1, 0.0, true).1, &delta_sweep(w2, 0.0, true).1);
    let span = None;
    let h_single = jaccard(
        &sweep(&f2, &half_plane_config(w1, false, span)).unwrap(),
        &sweep(&f2, &half_plane_config(w2, false, span)).unwrap(),
    );
    let h_refined = jaccard(
        &sweep(&f2, &half_plane_config(w1, true, span)).unwrap(),
        &sweep(&f2, &half_plane_config(w2, true, span)).unwrap(),
    );
    outcome(
        d_refined >= 0.9 && h_refined >= 0.9,
        format!(
            "refined sweeps: delta {d_refined:.3}, half-plane {h_refined:.3}; single-window (informational): delta {d_single:.3}, half-plane {h_single:.3}"
        ),
    )
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let f = half_plane_field();
    let cfg = half_plane_config(WindowSpec::new(0.1, 2.0).unwrap(), true, None);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sweep(&f, &cfg).unwrap().to_json())
    };
    let one = run(1);
    let eight = run(8);
    outcome(one == eight, format!("{} bytes, identical: {}", one.len(), one == eight))
}

// ---------------------------------------------------------------- 9

/// Counts `η` with `|η − ξ| ≤ c|ξ|`, `ξ ∈ inner`, that escape `outer`.
fn margin_counterexamples(inner: &Cone, outer: &Cone, c: f64, samples: usize, rng: &mut ChaCha8Rng) -> usize {
    let axis = inner.axis()[1].atan2(inner.axis()[0]);
    let mut bad = 0;
    for i in 0..samples {
        // Bias half the draws to the rim of the inner cone and of the ball.
        let rim = i % 2 == 0;
        let off = if rim {
            inner.half_angle() * (1.0 - 1e-9) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }
        } else {
            rng.random_range(-inner.half_angle()..inner.half_angle())
        };
        let r = 10f64.powf(rng.random_range(-3.0..3.0));
        let xi = [r * (axis + off).cos(), r * (axis + off).sin()];
        if !inner.contains(&xi) {
            continue;
        }
        let rho = if rim { c } else { c * rng.random_range(0.0f64..1.0).sqrt() };
        let phi = rng.random_range(0.0..2.0 * PI);
        let eta = [xi[0] + rho * r * phi.cos(), xi[1] + rho * r * phi.sin()];
        if !outer.contains(&eta) {
            bad += 1;
        }
    }
    bad
}

fn criterion_9() -> Outcome {
    let inner = Cone::circular(0.4, 10f64.to_radians()).unwrap();
    let outer = Cone::circular(0.4, 30f64.to_radians()).unwrap();
    let c = shrink_margin(&inner, &outer).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let below = margin_counterexamples(&inner, &outer, c - 1e-3, 400_000, &mut rng);
    let above = margin_counterexamples(&inner, &outer, c + 1e-2, 400_000, &mut rng);
    outcome(
        (c - 0.342).abs() <= 1e-3 && below == 0 && above > 0,
        format!("c = {c:.5}; {below} counterexamples at c−1e-3, {above} at c+1e-2 (oracle sanity)"),
    )
}

fn main() {
    let criteria: Vec<(usize, &str, Option<u64>, fn() -> Outcome)> = vec![
        (1, "STFT engine vs closed forms", Some(5), criterion_1),
        (2, "associated function vs brute force", Some(1), criterion_2),
        (3, "solidity of all backends", Some(10), criterion_3),
        (4, "Sobolev oracle for the delta, d=1", Some(30), criterion_4),
        (5, "conormal oracle for the half-plane, d=2", Some(180), criterion_5),
        (6, "cutoff monotonicity of the global set", None, criterion_6),
        (7, "window independence", None, criterion_7),
        (8, "determinism across thread counts", None, criterion_8),
        (9, "cone margin vs sampling oracle", Some(5), criterion_9),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = Vec::new();
    for (n, name, limit, run) in criteria {
        if filter.is_some_and(|f| f != n) {
            continue;
        }
        let o = timed(limit.map(Duration::from_secs), run);
        println!("criterion {n} [{name}]: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
