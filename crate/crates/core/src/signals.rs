//! Uniform grids, sampled fields, the catalogue of closed-form test
//! distributions with known wave front sets, and field I/O.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{Backend, Weight};
use crate::params::{fmt_real, SpecString};

/// Minimum distance, in samples, between catalogue parameters and the grid
/// edge.
pub const SYNTH_MARGIN: f64 = 10.0;

/// Uniform isotropic grid in one or two dimensions, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub shape: Vec<usize>,
}

impl GridSpec {
    pub fn new(origin: Vec<f64>, spacing: f64, shape: Vec<usize>) -> Result<Self> {
        let dim = shape.len();
        if dim == 0 || dim > 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if origin.len() != dim {
            return Err(Error::Config(format!(
                "origin has {} components for a {dim}-d grid",
                origin.len()
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Config(format!("grid spacing must be positive, got {spacing}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Config("grid origin must be finite".into()));
        }
        if let Some(n) = shape.iter().find(|&&n| n < 8 || !n.is_power_of_two()) {
            return Err(Error::Config(format!(
                "grid sizes must be powers of two and at least 8, got {n}"
            )));
        }
        Ok(GridSpec {
            dim,
            origin,
            spacing,
            shape,
        })
    }

    /// Grid with `n` nodes per axis whose middle node sits at the origin.
    pub fn centered(dim: usize, n: usize, spacing: f64) -> Result<Self> {
        let o = -((n / 2) as f64) * spacing;
        GridSpec::new(vec![o; dim], spacing, vec![n; dim])
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.spacing
    }

    /// Coordinates of the node with per-axis indices `idx`.
    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().enumerate().map(|(a, &i)| self.coord(a, i)).collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] * self.shape[1] + idx[1],
        }
    }

    pub fn unflatten(&self, flat: usize) -> Vec<usize> {
        match self.dim {
            1 => vec![flat],
            _ => vec![flat / self.shape[1], flat % self.shape[1]],
        }
    }

    /// Nearest node index along `axis`, if inside the grid.
    pub fn snap_axis(&self, axis: usize, x: f64) -> Option<usize> {
        let k = ((x - self.origin[axis]) / self.spacing).round();
        (k >= 0.0 && k < self.shape[axis] as f64).then_some(k as usize)
    }

    pub fn snap(&self, x: &[f64]) -> Option<Vec<usize>> {
        if x.len() != self.dim {
            return None;
        }
        x.iter()
            .enumerate()
            .map(|(a, &v)| self.snap_axis(a, v))
            .collect()
    }

    /// Closed coordinate range `[lo, hi]` along `axis`.
    pub fn extent(&self, axis: usize) -> (f64, f64) {
        (self.origin[axis], self.coord(axis, self.shape[axis] - 1))
    }

    fn inside_with_margin(&self, axis: usize, x: f64) -> bool {
        let (lo, hi) = self.extent(axis);
        let m = SYNTH_MARGIN * self.spacing;
        x >= lo + m && x <= hi - m
    }

    /// Nyquist frequency `π/Δx`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.spacing
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    /// `n=<int>[x<int>],dx=<real>[,dim=<1|2>][,origin=<real>[/<real>]]`.
    /// Without `origin` the grid is centred on 0.
    fn from_str(input: &str) -> Result<Self> {
        let spec = SpecString::parse_bare("grid", input)?;
        spec.only(&["n", "dx", "dim", "origin"])?;
        let raw_n = spec.raw("n").ok_or_else(|| spec.err("missing key \"n\""))?;
        let mut shape: Vec<usize> = raw_n
            .split('x')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| spec.err(format!("bad size {raw_n:?}")))?;
        let dim = match spec.raw("dim") {
            Some(_) => spec.usize("dim")?,
            None => shape.len(),
        };
        if dim == 0 || dim > 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if shape.len() == 1 && dim == 2 {
            shape.push(shape[0]);
        }
        if shape.len() != dim {
            return Err(spec.err("size list does not match dim"));
        }
        let dx = spec.real("dx")?;
        let origin = match spec.raw("origin") {
            Some(_) => {
                let o = spec.vector("origin")?;
                if o.len() == 1 {
                    vec![o[0]; dim]
                } else {
                    o
                }
            }
            None => shape.iter().map(|&n| -((n / 2) as f64) * dx).collect(),
        };
        GridSpec::new(origin, dx, shape)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n: Vec<String> = self.shape.iter().map(|n| n.to_string()).collect();
        let o: Vec<String> = self.origin.iter().map(|&v| fmt_real(v)).collect();
        write!(
            f,
            "n={},dx={},dim={},origin={}",
            n.join("x"),
            fmt_real(self.spacing),
            self.dim,
            o.join("/")
        )
    }
}

/// Complex samples on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: GridSpec,
    samples: Vec<Complex64>,
}

impl SampledField {
    pub fn new(grid: GridSpec, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Data(format!(
                "{} samples for a grid of {}",
                samples.len(),
                grid.len()
            )));
        }
        if let Some(i) = samples.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(SampledField { grid, samples })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        SampledField {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// Multiplies every sample by `psi(x)` at its node.
    pub fn multiplied_by(&self, psi: impl Fn(&[f64]) -> f64) -> SampledField {
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(flat, z)| z * psi(&self.grid.point(&self.grid.unflatten(flat))))
            .collect();
        SampledField {
            grid: self.grid.clone(),
            samples,
        }
    }

    /// Circular shift by whole samples: `(T_y f)[i] = f[i − shift]`.
    pub fn shifted(&self, shift: &[isize]) -> SampledField {
        let g = &self.grid;
        let mut out = vec![Complex64::new(0.0, 0.0); self.samples.len()];
        for (flat, z) in self.samples.iter().enumerate() {
            let idx = g.unflatten(flat);
            let moved: Vec<usize> = idx
                .iter()
                .enumerate()
                .map(|(a, &i)| (i as isize + shift[a]).rem_euclid(g.shape[a] as isize) as usize)
                .collect();
            out[g.flat_index(&moved)] = *z;
        }
        SampledField {
            grid: g.clone(),
            samples: out,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Closed-form test distributions.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticSignal {
    Delta { x0: Vec<f64> },
    Heaviside { x0: f64 },
    /// Indicator of `{x · normal > offset}` with `normal` a unit vector.
    HalfPlane { normal: [f64; 2], offset: f64 },
    Gaussian { center: Vec<f64>, width: f64 },
    PlaneWave { eta: Vec<f64> },
    /// `exp(i · rate · |x|²)`.
    Chirp { rate: f64 },
    Zero,
}

impl AnalyticSignal {
    pub fn half_plane(normal_angle_deg: f64, offset: f64) -> Self {
        let a = normal_angle_deg.to_radians();
        AnalyticSignal::HalfPlane {
            normal: [a.cos(), a.sin()],
            offset,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnalyticSignal::Delta { .. } => "delta",
            AnalyticSignal::Heaviside { .. } => "heaviside",
            AnalyticSignal::HalfPlane { .. } => "half_plane",
            AnalyticSignal::Gaussian { .. } => "gaussian",
            AnalyticSignal::PlaneWave { .. } => "plane_wave",
            AnalyticSignal::Chirp { .. } => "chirp",
            AnalyticSignal::Zero => "zero",
        }
    }

    fn required_dim(&self) -> Option<usize> {
        match self {
            AnalyticSignal::Delta { x0 } => Some(x0.len()),
            AnalyticSignal::Heaviside { .. } => Some(1),
            AnalyticSignal::HalfPlane { .. } => Some(2),
            AnalyticSignal::Gaussian { center, .. } => Some(center.len()),
            AnalyticSignal::PlaneWave { eta } => Some(eta.len()),
            AnalyticSignal::Chirp { .. } | AnalyticSignal::Zero => None,
        }
    }
}

fn join_vec(v: &[f64]) -> String {
    v.iter().map(|&c| fmt_real(c)).collect::<Vec<_>>().join("/")
}

impl fmt::Display for AnalyticSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalyticSignal::Delta { x0 } => write!(f, "delta:x0={}", join_vec(x0)),
            AnalyticSignal::Heaviside { x0 } => write!(f, "heaviside:x0={}", fmt_real(*x0)),
            AnalyticSignal::HalfPlane { normal, offset } => write!(
                f,
                "half_plane:n={},b={}",
                join_vec(normal),
                fmt_real(*offset)
            ),
            AnalyticSignal::Gaussian { center, width } => {
                write!(f, "gaussian:c={},w={}", join_vec(center), fmt_real(*width))
            }
            AnalyticSignal::PlaneWave { eta } => write!(f, "plane_wave:eta={}", join_vec(eta)),
            AnalyticSignal::Chirp { rate } => write!(f, "chirp:rate={}", fmt_real(*rate)),
            AnalyticSignal::Zero => write!(f, "zero"),
        }
    }
}

impl FromStr for AnalyticSignal {
    type Err = Error;

    /// `delta:x0=<v>`, `heaviside:x0=<real>`, `half_plane:n=<deg|v>,b=<real>`,
    /// `gaussian:c=<v>,w=<real>`, `plane_wave:eta=<v>`, `chirp:rate=<real>`,
    /// `zero`. Vectors use `/` between components.
    fn from_str(input: &str) -> Result<Self> {
        let spec = SpecString::parse("signal", input)?;
        match spec.kind {
            "delta" => {
                spec.only(&["x0"])?;
                Ok(AnalyticSignal::Delta {
                    x0: spec.vector("x0")?,
                })
            }
            "heaviside" => {
                spec.only(&["x0"])?;
                Ok(AnalyticSignal::Heaviside { x0: spec.real("x0")? })
            }
            "half_plane" => {
                spec.only(&["n", "b"])?;
                let raw = spec.raw("n").ok_or_else(|| spec.err("missing key \"n\""))?;
                let b = spec.real_or("b", 0.0)?;
                if raw.contains('/') {
                    let v = spec.vector("n")?;
                    let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                    if v.len() != 2 || r == 0.0 {
                        return Err(spec.err("normal must be a non-zero 2-vector"));
                    }
                    // Already-unit normals are kept as written so strings round-trip.
                    let r = if (r - 1.0).abs() <= 4.0 * f64::EPSILON { 1.0 } else { r };
                    Ok(AnalyticSignal::HalfPlane {
                        normal: [v[0] / r, v[1] / r],
                        offset: b,
                    })
                } else {
                    Ok(AnalyticSignal::half_plane(spec.real("n")?, b))
                }
            }
            "gaussian" => {
                spec.only(&["c", "w"])?;
                let width = spec.real("w")?;
                if !(width > 0.0 && width.is_finite()) {
                    return Err(spec.err("width must be positive"));
                }
                Ok(AnalyticSignal::Gaussian {
                    center: spec.vector("c")?,
                    width,
                })
            }
            "plane_wave" => {
                spec.only(&["eta"])?;
                Ok(AnalyticSignal::PlaneWave {
                    eta: spec.vector("eta")?,
                })
            }
            "chirp" => {
                spec.only(&["rate"])?;
                Ok(AnalyticSignal::Chirp {
                    rate: spec.real("rate")?,
                })
            }
            "zero" => {
                spec.only(&[])?;
                Ok(AnalyticSignal::Zero)
            }
            other => Err(spec.err(format!("unknown signal kind {other:?}"))),
        }
    }
}

fn check_params(entry: &AnalyticSignal, grid: &GridSpec) -> Result<()> {
    if let Some(d) = entry.required_dim() {
        if d != grid.dim {
            return Err(Error::Synthesis(format!(
                "{} needs a {d}-d grid, got {}-d",
                entry.kind(),
                grid.dim
            )));
        }
    }
    let outside = |what: &str| {
        Err(Error::Synthesis(format!(
            "{what} lies outside the grid extent (margin {SYNTH_MARGIN} samples)"
        )))
    };
    match entry {
        AnalyticSignal::Delta { x0 } => {
            if !x0.iter().enumerate().all(|(a, &x)| grid.inside_with_margin(a, x)) {
                return outside("delta location");
            }
        }
        AnalyticSignal::Heaviside { x0 } => {
            if !grid.inside_with_margin(0, *x0) {
                return outside("jump location");
            }
        }
        AnalyticSignal::HalfPlane { normal, offset } => {
            let m = SYNTH_MARGIN * grid.spacing;
            let (lo0, hi0) = grid.extent(0);
            let (lo1, hi1) = grid.extent(1);
            let corners = [
                [lo0 + m, lo1 + m],
                [lo0 + m, hi1 - m],
                [hi0 - m, lo1 + m],
                [hi0 - m, hi1 - m],
            ];
            let proj: Vec<f64> = corners
                .iter()
                .map(|c| c[0] * normal[0] + c[1] * normal[1])
                .collect();
            let lo = proj.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(*offset >= lo && *offset <= hi) {
                return outside("interface");
            }
        }
        AnalyticSignal::Gaussian { center, width } => {
            if !center.iter().enumerate().all(|(a, &x)| grid.inside_with_margin(a, x)) {
                return outside("gaussian centre");
            }
            if !(*width > 0.0) {
                return Err(Error::Synthesis("gaussian width must be positive".into()));
            }
        }
        AnalyticSignal::PlaneWave { eta } => {
            if eta.iter().any(|e| !(e.abs() < grid.nyquist())) {
                return Err(Error::Synthesis(
                    "plane-wave frequency exceeds the Nyquist limit".into(),
                ));
            }
        }
        AnalyticSignal::Chirp { rate } => {
            let reach = (0..grid.dim)
                .map(|a| {
                    let (lo, hi) = grid.extent(a);
                    lo.abs().max(hi.abs())
                })
                .fold(0.0, f64::max);
            if !(2.0 * rate.abs() * reach < grid.nyquist()) {
                return Err(Error::Synthesis(
                    "chirp instantaneous frequency exceeds the Nyquist limit on the grid".into(),
                ));
            }
        }
        AnalyticSignal::Zero => {}
    }
    Ok(())
}

/// Samples a catalogue entry on `grid`.
///
/// The delta becomes a Kronecker spike of height `Δx^{−d}` at the nearest
/// node; jumps take the value ½ on nodes within `Δx/2` of the interface.
pub fn synth(entry: &AnalyticSignal, grid: &GridSpec) -> Result<SampledField> {
    check_params(entry, grid)?;
    let dx = grid.spacing;
    let mut field = SampledField::zeros(grid.clone());
    let step = |signed_distance: f64| -> f64 {
        if signed_distance.abs() <= dx / 2.0 {
            0.5
        } else if signed_distance > 0.0 {
            1.0
        } else {
            0.0
        }
    };
    match entry {
        AnalyticSignal::Zero => {}
        AnalyticSignal::Delta { x0 } => {
            let idx = grid
                .snap(x0)
                .ok_or_else(|| Error::Synthesis("delta location not on grid".into()))?;
            let height = dx.powi(-(grid.dim as i32));
            field.samples[grid.flat_index(&idx)] = Complex64::new(height, 0.0);
        }
        _ => {
            for flat in 0..grid.len() {
                let x = grid.point(&grid.unflatten(flat));
                let v = match entry {
                    AnalyticSignal::Heaviside { x0 } => Complex64::new(step(x[0] - x0), 0.0),
                    AnalyticSignal::HalfPlane { normal, offset } => {
                        Complex64::new(step(x[0] * normal[0] + x[1] * normal[1] - offset), 0.0)
                    }
                    AnalyticSignal::Gaussian { center, width } => {
                        let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                        Complex64::new((-r2 / (2.0 * width * width)).exp(), 0.0)
                    }
                    AnalyticSignal::PlaneWave { eta } => {
                        let phase: f64 = x.iter().zip(eta).map(|(a, b)| a * b).sum();
                        Complex64::from_polar(1.0, phase)
                    }
                    AnalyticSignal::Chirp { rate } => {
                        let r2: f64 = x.iter().map(|a| a * a).sum();
                        Complex64::from_polar(1.0, rate * r2)
                    }
                    AnalyticSignal::Delta { .. } | AnalyticSignal::Zero => unreachable!(),
                };
                field.samples[flat] = v;
            }
        }
    }
    Ok(field)
}

/// Spatial part of a wave-front component.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Locus {
    Point { x: Vec<f64> },
    Hyperplane { normal: Vec<f64>, offset: f64 },
}

impl Locus {
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Locus::Point { x: p } => p
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            Locus::Hyperplane { normal, offset } => {
                (normal.iter().zip(x).map(|(n, v)| n * v).sum::<f64>() - offset).abs()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DirectionSet {
    All,
    Finite { directions: Vec<Vec<f64>> },
}

impl DirectionSet {
    /// Smallest angle (radians) between `dir` and the set.
    pub fn angular_distance(&self, dir: &[f64]) -> f64 {
        match self {
            DirectionSet::All => 0.0,
            DirectionSet::Finite { directions } => directions
                .iter()
                .map(|d| angle_between(d, dir))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComponent {
    pub locus: Locus,
    pub directions: DirectionSet,
}

/// The textbook wave front set of a catalogue entry, filtered by a backend.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WavefrontOracle {
    pub components: Vec<OracleComponent>,
}

impl WavefrontOracle {
    pub fn empty() -> Self {
        WavefrontOracle { components: vec![] }
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Polynomial order a backend weight behaves like at infinity:
/// `±∞` for growing/decaying ultradistributional weights.
fn effective_order(backend: &Backend) -> f64 {
    match backend.weight() {
        Weight::Polynomial { s } => *s,
        Weight::Ultra { t, .. } if *t > 0.0 => f64::INFINITY,
        Weight::Ultra { t, .. } if *t < 0.0 => f64::NEG_INFINITY,
        Weight::Ultra { .. } => 0.0,
    }
}

/// Whether `|ξ|^{−decay}` over a `dims`-dimensional cone fails to lie in the
/// weighted `L^q`.
fn diverges(backend: &Backend, decay: f64, dims: f64) -> bool {
    let s = effective_order(backend);
    let q = backend.q();
    if q.is_infinite() {
        s > decay
    } else {
        s >= decay - dims / q
    }
}

/// Analytic wave front set of `entry` with respect to `backend`.
///
/// A point mass is singular in every direction once `∫_Γ w(ξ)^q dξ`
/// diverges (for Sobolev `H^s` on `ℝ^d`: `s ≥ −d/2`). A jump across a
/// hyperplane has a transform decaying like `1/|ξ_n|` in the conormal
/// directions only (Sobolev threshold `s ≥ 1/2`). Smooth entries are
/// regular except against growing ultradistributional weights, where the
/// answer depends on the window class and no oracle is offered.
pub fn analytic_wavefront(entry: &AnalyticSignal, backend: &Backend) -> Result<WavefrontOracle> {
    let unavailable = || {
        Err(Error::OracleUnavailable(format!(
            "no closed-form wave front for {entry} against {backend}"
        )))
    };
    match entry {
        AnalyticSignal::Zero => Ok(WavefrontOracle::empty()),
        AnalyticSignal::Gaussian { .. } | AnalyticSignal::PlaneWave { .. } | AnalyticSignal::Chirp { .. } => {
            if effective_order(backend) == f64::INFINITY {
                return unavailable();
            }
            Ok(WavefrontOracle::empty())
        }
        AnalyticSignal::Delta { x0 } => {
            if diverges(backend, 0.0, x0.len() as f64) {
                Ok(WavefrontOracle {
                    components: vec![OracleComponent {
                        locus: Locus::Point { x: x0.clone() },
                        directions: DirectionSet::All,
                    }],
                })
            } else {
                Ok(WavefrontOracle::empty())
            }
        }
        AnalyticSignal::Heaviside { x0 } => {
            if diverges(backend, 1.0, 1.0) {
                Ok(WavefrontOracle {
                    components: vec![OracleComponent {
                        locus: Locus::Point { x: vec![*x0] },
                        directions: DirectionSet::Finite {
                            directions: vec![vec![1.0], vec![-1.0]],
                        },
                    }],
                })
            } else {
                Ok(WavefrontOracle::empty())
            }
        }
        AnalyticSignal::HalfPlane { normal, offset } => {
            if diverges(backend, 1.0, 1.0) {
                Ok(WavefrontOracle {
                    components: vec![OracleComponent {
                        locus: Locus::Hyperplane {
                            normal: normal.to_vec(),
                            offset: *offset,
                        },
                        directions: DirectionSet::Finite {
                            directions: vec![normal.to_vec(), vec![-normal[0], -normal[1]]],
                        },
                    }],
                })
            } else {
                Ok(WavefrontOracle::empty())
            }
        }
    }
}

const DTYPE: &str = "complex128-le";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldHeader {
    dim: usize,
    origin: Vec<f64>,
    spacing: f64,
    shape: Vec<usize>,
    dtype: String,
}

/// JSON header line for a field file.
pub fn field_header(field: &SampledField) -> String {
    let g = field.grid();
    let header = FieldHeader {
        dim: g.dim,
        origin: g.origin.clone(),
        spacing: g.spacing,
        shape: g.shape.clone(),
        dtype: DTYPE.to_string(),
    };
    serde_json::to_string(&header).expect("header serialises")
}

pub(crate) fn write_payload(out: &mut impl Write, samples: &[Complex64]) -> Result<()> {
    for z in samples {
        out.write_all(&z.re.to_le_bytes())?;
        out.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

/// Writes the JSON header, a newline, then 16 little-endian bytes per sample.
pub fn save_field(field: &SampledField, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(field_header(field).as_bytes())?;
    out.write_all(b"\n")?;
    write_payload(&mut out, field.samples())?;
    out.flush()?;
    Ok(())
}

pub fn load_field(path: impl AsRef<Path>) -> Result<SampledField> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_field(&bytes)
}

pub fn decode_field(bytes: &[u8]) -> Result<SampledField> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("no header terminator".into()))?;
    let text = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| Error::MalformedHeader("header is not UTF-8".into()))?;
    let raw: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    if let Some(d) = raw.get("dim").and_then(|d| d.as_u64()) {
        if d == 0 || d > 2 {
            return Err(Error::UnsupportedDimension(d as usize));
        }
    }
    let header: FieldHeader =
        serde_json::from_value(raw).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    if header.dtype != DTYPE {
        return Err(Error::MalformedHeader(format!("unsupported dtype {:?}", header.dtype)));
    }
    if header.shape.len() != header.dim {
        return Err(Error::MalformedHeader("shape does not match dim".into()));
    }
    let grid = GridSpec::new(header.origin, header.spacing, header.shape)
        .map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let payload = &bytes[nl + 1..];
    let expected = grid.len() * 16;
    if payload.len() != expected {
        return Err(Error::SizeMismatch {
            expected,
            found: payload.len(),
        });
    }
    let samples = payload
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    SampledField::new(grid, samples)
}

/// Imports a small field from CSV rows `x[,y],re,im` in row-major order.
/// A non-numeric first row is treated as a header.
pub fn load_csv(path: impl AsRef<Path>) -> Result<SampledField> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(Error::Data(format!("row {} is not numeric", i + 1))),
        }
    }
    let width = rows.first().map(Vec::len).ok_or_else(|| Error::Data("empty CSV".into()))?;
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Data("ragged CSV rows".into()));
    }
    let dim = match width {
        3 => 1,
        4 => 2,
        w => return Err(Error::Data(format!("expected 3 or 4 columns, got {w}"))),
    };
    let origin: Vec<f64> = rows[0][..dim].to_vec();
    let n1 = if dim == 1 {
        rows.len()
    } else {
        rows.iter().take_while(|r| r[0] == rows[0][0]).count()
    };
    if n1 < 2 || rows.len() % n1 != 0 {
        return Err(Error::Data("cannot infer grid shape from CSV".into()));
    }
    let spacing = rows[1][dim - 1] - rows[0][dim - 1];
    let shape = if dim == 1 {
        vec![rows.len()]
    } else {
        vec![rows.len() / n1, n1]
    };
    let grid = GridSpec::new(origin, spacing, shape)?;
    let tol = 1e-9 * spacing;
    let mut samples = Vec::with_capacity(rows.len());
    for (flat, r) in rows.iter().enumerate() {
        let p = grid.point(&grid.unflatten(flat));
        if p.iter().zip(r).any(|(a, b)| (a - b).abs() > tol) {
            return Err(Error::Data(format!("row {} is off the inferred grid", flat + 1)));
        }
        samples.push(Complex64::new(r[dim], r[dim + 1]));
    }
    SampledField::new(grid, samples)
}
