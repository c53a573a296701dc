//! Pointwise wave-front tests, full sweeps, the global frequency set of a
//! compactly supported field, and the singular-support projection.
//!
//! `(x₀, ξ₀)` is regular when `x ↦ ‖θ_Γ V_χ f(x, ·)‖` is bounded on a
//! neighbourhood `K` of `x₀` for a cone `Γ` around `ξ₀`. Numerically `K` is
//! a small tensor grid of centres and boundedness is the tail-ratio test of
//! [`crate::norms`].

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{is_unit, Cone, DirectionGrid};
use crate::norms::{
    backend_norm, score_partial_norms, Backend, Decision, DecisionRule, MembershipScore, NormPlan,
    Schedule, ScheduleSpec, WeightTable,
};
use crate::signals::{GridSpec, SampledField};
use crate::stft::{FreqGrid, StftEngine, Window, WindowSpec, MIN_RADIUS_SAMPLES};

pub const DEFAULT_HALF_ANGLE_DEG: f64 = 15.0;
pub const DEFAULT_CENTER_COUNT: usize = 3;
/// Default `K` radius in grid spacings.
pub const DEFAULT_K_SAMPLES: f64 = 8.0;
/// Relative amplitude outside the central half that still counts as zero.
pub const SUPPORT_TOLERANCE: f64 = 1e-14;

/// Everything a query needs besides the point and direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    pub window: WindowSpec,
    pub backend: Backend,
    /// Cone half-angle in radians (ignored in one dimension).
    pub half_angle: f64,
    /// Half-width of the neighbourhood `K`; `None` means 8 grid spacings.
    pub k_radius: Option<f64>,
    pub center_count: usize,
    pub schedule: ScheduleSpec,
    pub rule: DecisionRule,
    /// Before accepting a singular verdict, retry with half the cone angle
    /// and with dilated windows `2R, R/2, R/4, …` (down to 8 spacings); the
    /// cell is regular if any of them certifies it.
    pub refine: bool,
}

impl DetectorParams {
    pub fn new(window: WindowSpec, backend: Backend) -> Self {
        DetectorParams {
            window,
            backend,
            half_angle: DEFAULT_HALF_ANGLE_DEG.to_radians(),
            k_radius: None,
            center_count: DEFAULT_CENTER_COUNT,
            schedule: ScheduleSpec::default(),
            rule: DecisionRule::default(),
            refine: false,
        }
    }

    pub fn k_radius_for(&self, grid: &GridSpec) -> f64 {
        self.k_radius.unwrap_or(DEFAULT_K_SAMPLES * grid.spacing)
    }

    fn validate(&self, grid: &GridSpec) -> Result<()> {
        let k = self.k_radius_for(grid);
        if !(k >= 2.0 * grid.spacing * (1.0 - 1e-12)) || !k.is_finite() {
            return Err(Error::Config(format!(
                "K radius {k} must be at least two grid spacings ({})",
                2.0 * grid.spacing
            )));
        }
        if self.center_count < 3 || self.center_count % 2 == 0 {
            return Err(Error::Config(format!(
                "centre count must be odd and at least 3, got {}",
                self.center_count
            )));
        }
        if grid.dim == 2 && !(self.half_angle > 0.0 && self.half_angle < PI / 2.0) {
            return Err(Error::Config("cone half-angle must lie in (0°, 90°)".into()));
        }
        Ok(())
    }

    /// Node offsets of the `K` centres along one axis.
    fn center_offsets(&self, grid: &GridSpec) -> Vec<isize> {
        let k = self.k_radius_for(grid);
        let c = self.center_count;
        (0..c)
            .map(|j| ((-k + 2.0 * k * j as f64 / (c - 1) as f64) / grid.spacing).round() as isize)
            .collect()
    }

    /// `(window, half-angle)` pairs tried by the detector; the first is the
    /// configured one.
    fn candidates(&self, grid: &GridSpec) -> Vec<(WindowSpec, f64)> {
        let mut out = vec![(self.window, self.half_angle)];
        if !self.refine {
            return out;
        }
        let angles: Vec<f64> = if grid.dim == 2 {
            vec![self.half_angle, self.half_angle / 2.0]
        } else {
            vec![self.half_angle]
        };
        let mut radii = vec![self.window.radius, 2.0 * self.window.radius];
        let mut r = self.window.radius / 2.0;
        while r >= MIN_RADIUS_SAMPLES * grid.spacing {
            radii.push(r);
            r /= 2.0;
        }
        for &radius in &radii {
            for &a in &angles {
                let spec = WindowSpec {
                    radius,
                    ..self.window
                };
                if (spec, a) != out[0] {
                    out.push((spec, a));
                }
            }
        }
        out
    }
}

/// A single `(x₀, ξ₀)` test.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityQuery {
    pub x0: Vec<f64>,
    pub direction: Vec<f64>,
    pub params: DetectorParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WavefrontCell {
    #[serde(skip)]
    pub x_index: Vec<usize>,
    #[serde(skip)]
    pub direction_index: usize,
    pub x: Vec<f64>,
    pub dir: Vec<f64>,
    /// Largest tail ratio over the centres of `K`.
    pub score: f64,
    pub decision: Decision,
}

/// Window, cone opening and per-direction norm plans.
struct Candidate {
    window: Window,
    plans: Vec<NormPlan>,
}

/// Shared state for repeated evaluations on one grid.
struct Detector<'a> {
    field: &'a SampledField,
    params: &'a DetectorParams,
    engine: StftEngine,
    candidates: Vec<Candidate>,
    offsets: Vec<isize>,
    /// Largest window half-width over all candidates, in samples.
    reach: usize,
}

#[derive(Debug, Clone, Copy)]
struct CenterScore {
    tail: f64,
    decision: Decision,
}

impl<'a> Detector<'a> {
    fn new(field: &'a SampledField, params: &'a DetectorParams, directions: &[Vec<f64>]) -> Result<Self> {
        let grid = field.grid();
        params.validate(grid)?;
        for d in directions {
            if d.len() != grid.dim || !is_unit(d) {
                return Err(Error::Config(format!(
                    "direction {d:?} is not a unit vector in {} dimensions",
                    grid.dim
                )));
            }
        }
        let engine = StftEngine::new(grid);
        let freq = engine.freq_grid().clone();
        let schedule = params.schedule.resolve(&freq)?;
        let weights = WeightTable::new(&params.backend, &freq);
        let mut candidates = Vec::new();
        for (spec, angle) in params.candidates(grid) {
            let window = spec.sample(grid)?;
            let plans = directions
                .iter()
                .map(|d| Ok(NormPlan::new(&freq, &Cone::around(d, angle)?, &weights, schedule.radii())))
                .collect::<Result<_>>()?;
            candidates.push(Candidate { window, plans });
        }
        let reach = candidates.iter().map(|c| c.window.half_width()).max().unwrap_or(0);
        Ok(Detector {
            field,
            params,
            engine,
            candidates,
            offsets: params.center_offsets(grid),
            reach,
        })
    }

    fn grid(&self) -> &GridSpec {
        self.field.grid()
    }

    /// Whether every centre of a cell at `idx` leaves room for the widest
    /// window.
    fn is_safe(&self, idx: &[usize]) -> bool {
        let kk = self.offsets.iter().map(|o| o.unsigned_abs()).max().unwrap_or(0);
        idx.iter()
            .zip(&self.grid().shape)
            .all(|(&i, &n)| i >= kk + self.reach && i + kk + self.reach < n)
    }

    fn centers_of(&self, idx: &[usize]) -> Vec<Vec<usize>> {
        let shift = |i: usize, o: isize| (i as isize + o) as usize;
        match idx {
            [i] => self.offsets.iter().map(|&o| vec![shift(*i, o)]).collect(),
            [i, j] => {
                let mut out = Vec::with_capacity(self.offsets.len().pow(2));
                for &a in &self.offsets {
                    for &b in &self.offsets {
                        out.push(vec![shift(*i, a), shift(*j, b)]);
                    }
                }
                out
            }
            _ => unreachable!("grids are one- or two-dimensional"),
        }
    }

    /// Scores of one centre for every direction, under one candidate.
    fn score_center(&self, cand: &Candidate, idx: &[usize]) -> Result<Vec<CenterScore>> {
        let slice = self.engine.slice_at(self.field, &cand.window, idx)?;
        let peak = slice.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let q = self.params.backend.q();
        Ok(cand
            .plans
            .iter()
            .map(|plan| {
                let s = score_partial_norms(
                    plan.partial_norms(&slice, &self.params.backend),
                    peak,
                    plan.measure_factor(q),
                    &self.params.rule,
                );
                CenterScore {
                    tail: s.tail_ratio,
                    decision: s.decision,
                }
            })
            .collect())
    }

    /// Scores for a set of centres, computed in parallel, keyed by flat
    /// node index.
    fn score_centers(&self, cand: &Candidate, centers: Vec<Vec<usize>>) -> Result<HashMap<usize, Vec<CenterScore>>> {
        let scores: Vec<Vec<CenterScore>> = centers
            .par_iter()
            .map(|c| self.score_center(cand, c))
            .collect::<Result<_>>()?;
        Ok(centers
            .iter()
            .map(|c| self.grid().flat_index(c))
            .zip(scores)
            .collect())
    }

    /// Worst case over `K`: singular if any centre is singular, regular only
    /// if all are.
    fn aggregate(&self, scores: &HashMap<usize, Vec<CenterScore>>, centers: &[Vec<usize>], dir: usize) -> (f64, Decision) {
        let mut tail = 0.0f64;
        let mut any_singular = false;
        let mut all_regular = true;
        for c in centers {
            let s = scores[&self.grid().flat_index(c)][dir];
            tail = tail.max(s.tail);
            any_singular |= s.decision == Decision::Singular;
            all_regular &= s.decision == Decision::Regular;
        }
        let decision = if any_singular {
            Decision::Singular
        } else if all_regular {
            Decision::Regular
        } else {
            Decision::Inconclusive
        };
        (tail, decision)
    }

    /// Decides every `(cell, direction)` pair.
    fn run(&self, cells: &[Vec<usize>], ndirs: usize) -> Result<Vec<Vec<(f64, Decision)>>> {
        let mut unique: Vec<Vec<usize>> = Vec::new();
        let mut seen = HashMap::new();
        let cell_centers: Vec<Vec<Vec<usize>>> = cells.iter().map(|c| self.centers_of(c)).collect();
        for cs in &cell_centers {
            for c in cs {
                if seen.insert(self.grid().flat_index(c), ()).is_none() {
                    unique.push(c.clone());
                }
            }
        }
        let base = self.score_centers(&self.candidates[0], unique)?;
        let mut out: Vec<Vec<(f64, Decision)>> = cell_centers
            .iter()
            .map(|cs| (0..ndirs).map(|d| self.aggregate(&base, cs, d)).collect())
            .collect();

        let mut pending: Vec<(usize, usize)> = Vec::new();
        for (i, row) in out.iter().enumerate() {
            for (d, (_, dec)) in row.iter().enumerate() {
                if *dec == Decision::Singular {
                    pending.push((i, d));
                }
            }
        }
        let mut best_inconclusive: HashMap<(usize, usize), f64> = HashMap::new();
        for cand in &self.candidates[1..] {
            if pending.is_empty() {
                break;
            }
            let mut needed: Vec<Vec<usize>> = Vec::new();
            let mut seen = HashMap::new();
            for &(i, _) in &pending {
                for c in &cell_centers[i] {
                    if seen.insert(self.grid().flat_index(c), ()).is_none() {
                        needed.push(c.clone());
                    }
                }
            }
            let scores = self.score_centers(cand, needed)?;
            pending.retain(|&(i, d)| {
                let (tail, dec) = self.aggregate(&scores, &cell_centers[i], d);
                match dec {
                    Decision::Regular => {
                        out[i][d] = (tail, Decision::Regular);
                        false
                    }
                    Decision::Inconclusive => {
                        let e = best_inconclusive.entry((i, d)).or_insert(tail);
                        *e = e.min(tail);
                        true
                    }
                    Decision::Singular => true,
                }
            });
        }
        for &(i, d) in &pending {
            if let Some(&tail) = best_inconclusive.get(&(i, d)) {
                out[i][d] = (tail, Decision::Inconclusive);
            }
        }
        Ok(out)
    }
}

/// Tests whether `query.direction` belongs to the singular directions at
/// `query.x0`.
pub fn test_point(f: &SampledField, query: &RegularityQuery) -> Result<WavefrontCell> {
    let grid = f.grid();
    if query.x0.len() != grid.dim {
        return Err(Error::Config("query point has the wrong dimension".into()));
    }
    let idx = grid
        .snap(&query.x0)
        .ok_or_else(|| Error::Boundary(format!("point {:?} lies outside the grid", query.x0)))?;
    let dir = normalized(&query.direction)?;
    let det = Detector::new(f, &query.params, std::slice::from_ref(&dir))?;
    if !det.is_safe(&idx) {
        return Err(Error::Boundary(format!(
            "window plus K radius around {:?} overruns the grid",
            query.x0
        )));
    }
    let (score, decision) = det.run(std::slice::from_ref(&idx), 1)?[0][0];
    Ok(WavefrontCell {
        x: grid.point(&idx),
        x_index: idx,
        dir,
        direction_index: 0,
        score,
        decision,
    })
}

fn normalized(v: &[f64]) -> Result<Vec<f64>> {
    let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Config("direction must be non-zero".into()));
    }
    Ok(v.iter().map(|c| c / r).collect())
}

/// Cell lattice and directions for [`sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Cells sit at node indices `≡ N/2 (mod stride)` per axis.
    pub stride: usize,
    /// Optional limit on `|x − x_mid|` per axis, `x_mid` the middle node.
    pub span: Option<f64>,
    pub directions: DirectionGrid,
    pub params: DetectorParams,
}

/// Window, backend and schedule actually used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub grid: String,
    pub window: String,
    pub backend: String,
    pub schedule: Vec<f64>,
    pub half_angle_deg: f64,
    pub k_radius: f64,
    pub center_count: usize,
    pub epsilon: f64,
    pub singular_factor: f64,
    pub refine: bool,
    pub stride: usize,
    pub directions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WavefrontReport {
    /// Caller-supplied description of the run; `null` unless set.
    pub config: serde_json::Value,
    pub provenance: Provenance,
    pub cells: Vec<WavefrontCell>,
    /// Grid indices of the points owning at least one singular cell.
    pub sing_supp: Vec<Vec<usize>>,
}

impl WavefrontReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Rows `x[,y],dir_angle_deg,score,decision`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.cells.first().map_or(1, |c| c.x.len());
        let mut header: Vec<&str> = if dim == 1 { vec!["x"] } else { vec!["x", "y"] };
        header.extend(["dir_angle_deg", "score", "decision"]);
        w.write_record(&header)?;
        for c in &self.cells {
            let angle = match c.dir.as_slice() {
                [d] => if *d > 0.0 { 0.0 } else { 180.0 },
                [a, b] => b.atan2(*a).to_degrees().rem_euclid(360.0),
                _ => f64::NAN,
            };
            let mut rec: Vec<String> = c.x.iter().map(|v| v.to_string()).collect();
            rec.push(angle.to_string());
            rec.push(c.score.to_string());
            rec.push(c.decision.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Cell node indices along one axis.
fn axis_cells(n: usize, stride: usize, spacing: f64, span: Option<f64>) -> Vec<usize> {
    let mid = n / 2;
    (0..n)
        .filter(|&i| (i as isize - mid as isize).rem_euclid(stride as isize) == 0)
        .filter(|&i| span.is_none_or(|s| (i as f64 - mid as f64).abs() * spacing <= s * (1.0 + 1e-12)))
        .collect()
}

/// Decides every `(x, direction)` cell of a strided lattice inside the safe
/// interior. Cells are ordered row-major in `x`, then by direction.
pub fn sweep(f: &SampledField, config: &SweepConfig) -> Result<WavefrontReport> {
    let grid = f.grid();
    if config.stride == 0 {
        return Err(Error::Config("stride must be positive".into()));
    }
    if config.directions.dim != grid.dim {
        return Err(Error::Config("direction grid dimension differs from the field".into()));
    }
    let det = Detector::new(f, &config.params, &config.directions.directions)?;
    let axes: Vec<Vec<usize>> = grid
        .shape
        .iter()
        .map(|&n| axis_cells(n, config.stride, grid.spacing, config.span))
        .collect();
    let mut cells: Vec<Vec<usize>> = match grid.dim {
        1 => axes[0].iter().map(|&i| vec![i]).collect(),
        _ => axes[0]
            .iter()
            .flat_map(|&i| axes[1].iter().map(move |&j| vec![i, j]))
            .collect(),
    };
    cells.retain(|c| det.is_safe(c));
    if cells.is_empty() {
        return Err(Error::Config(
            "no cell lies in the safe interior (window plus K radius)".into(),
        ));
    }
    let ndirs = config.directions.len();
    let decided = det.run(&cells, ndirs)?;
    let mut out = Vec::with_capacity(cells.len() * ndirs);
    for (idx, row) in cells.iter().zip(decided) {
        for (d, (score, decision)) in row.into_iter().enumerate() {
            out.push(WavefrontCell {
                x: grid.point(idx),
                x_index: idx.clone(),
                dir: config.directions.directions[d].clone(),
                direction_index: d,
                score,
                decision,
            });
        }
    }
    let p = &config.params;
    let schedule = p.schedule.resolve(&FreqGrid::for_grid(grid))?;
    let mut report = WavefrontReport {
        config: serde_json::Value::Null,
        provenance: Provenance {
            grid: grid.to_string(),
            window: p.window.to_string(),
            backend: p.backend.to_string(),
            schedule: schedule.radii().to_vec(),
            half_angle_deg: p.half_angle.to_degrees(),
            k_radius: p.k_radius_for(grid),
            center_count: p.center_count,
            epsilon: p.rule.epsilon,
            singular_factor: p.rule.singular_factor,
            refine: p.refine,
            stride: config.stride,
            directions: ndirs,
        },
        cells: out,
        sing_supp: Vec::new(),
    };
    report.sing_supp = sing_supp(&report);
    Ok(report)
}

/// Grid indices owning at least one singular cell, in report order.
pub fn sing_supp(report: &WavefrontReport) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for c in &report.cells {
        if c.decision == Decision::Singular && out.last() != Some(&c.x_index) && !out.contains(&c.x_index) {
            out.push(c.x_index.clone());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionVerdict {
    pub dir: Vec<f64>,
    pub score: f64,
    pub decision: Decision,
    pub partial_norms: Vec<f64>,
}

/// Fails unless `f` is numerically zero outside the central half of the grid.
pub fn check_compact_support(f: &SampledField) -> Result<()> {
    let g = f.grid();
    let peak = f.max_abs();
    let inside = |idx: &[usize]| {
        idx.iter()
            .zip(&g.shape)
            .all(|(&i, &n)| i >= n / 4 && i < 3 * n / 4)
    };
    for (flat, z) in f.samples().iter().enumerate() {
        if z.norm() > SUPPORT_TOLERANCE * peak && !inside(&g.unflatten(flat)) {
            return Err(Error::NotCompactlySupported(format!(
                "|f| = {:e} at {:?}, outside the central half",
                z.norm(),
                g.point(&g.unflatten(flat))
            )));
        }
    }
    Ok(())
}

/// `Σ_E(f)`: membership of `θ_Γ ℱf` per direction, from one transform of
/// the whole field.
pub fn sigma_global(
    f: &SampledField,
    backend: &Backend,
    directions: &DirectionGrid,
    half_angle: f64,
    schedule: &ScheduleSpec,
    rule: &DecisionRule,
) -> Result<Vec<DirectionVerdict>> {
    check_compact_support(f)?;
    let engine = StftEngine::new(f.grid());
    let freq = engine.freq_grid().clone();
    let schedule: Schedule = schedule.resolve(&freq)?;
    let spectrum = engine.transform_field(f);
    let peak = spectrum.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let weights = WeightTable::new(backend, &freq);
    directions
        .directions
        .iter()
        .map(|d| {
            let plan = NormPlan::new(&freq, &Cone::around(d, half_angle)?, &weights, schedule.radii());
            let s: MembershipScore = score_partial_norms(
                plan.partial_norms(&spectrum, backend),
                peak,
                plan.measure_factor(backend.q()),
                rule,
            );
            Ok(DirectionVerdict {
                dir: d.clone(),
                score: s.tail_ratio,
                decision: s.decision,
                partial_norms: s.partial_norms,
            })
        })
        .collect()
}

/// `‖θ_Γ(V_χf(x, ·) − V_χf(x′, ·))‖ / |x − x′|` up to radius `radius`.
pub fn lipschitz_check(
    f: &SampledField,
    window: &Window,
    cone: &Cone,
    backend: &Backend,
    x: &[f64],
    x_prime: &[f64],
    radius: f64,
) -> Result<f64> {
    let g = f.grid();
    let outside = |p: &[f64]| Error::Boundary(format!("centre {p:?} lies outside the grid"));
    let a = g.snap(x).ok_or_else(|| outside(x))?;
    let b = g.snap(x_prime).ok_or_else(|| outside(x_prime))?;
    if a == b {
        return Err(Error::DegenerateInput("centres coincide on the grid".into()));
    }
    let (pa, pb) = (g.point(&a), g.point(&b));
    let dist = pa.iter().zip(&pb).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
    if dist > 4.0 * g.spacing * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "centres are {dist} apart, more than four grid spacings"
        )));
    }
    let engine = StftEngine::new(g);
    let va = engine.slice_at(f, window, &a)?;
    let vb = engine.slice_at(f, window, &b)?;
    let diff: Vec<Complex64> = va.iter().zip(&vb).map(|(u, v)| u - v).collect();
    Ok(backend_norm(&diff, engine.freq_grid(), cone, backend, radius)? / dist)
}
