//! Compactly supported bump windows and the short-time Fourier transform
//! `V_χ f(x, ξ) = ∫ e^{−i t·ξ} f(t) χ(t − x) dt` on a centres × frequencies
//! lattice.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{fmt_real, SpecString};
use crate::signals::{write_payload, AnalyticSignal, GridSpec, SampledField};

/// Smallest admissible support radius, in samples.
pub const MIN_RADIUS_SAMPLES: f64 = 8.0;

pub const DEFAULT_FLAT_ORDER: f64 = 2.0;

/// Unsampled window parameters, `bump:R=<real>,a=<real>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub radius: f64,
    pub flat_order: f64,
}

impl WindowSpec {
    pub fn new(radius: f64, flat_order: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("window radius must be positive, got {radius}")));
        }
        if !(flat_order >= 1.0 && flat_order.is_finite()) {
            return Err(Error::Config(format!("window flat order must be ≥ 1, got {flat_order}")));
        }
        Ok(WindowSpec { radius, flat_order })
    }

    /// `χ(t) = exp(a − a/(1 − |t/R|²))` inside the support, 0 outside.
    pub fn profile(&self, r: f64) -> f64 {
        let u = r / self.radius;
        let u2 = u * u;
        if u2 >= 1.0 {
            0.0
        } else {
            (self.flat_order - self.flat_order / (1.0 - u2)).exp()
        }
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        self.profile(t.iter().map(|c| c * c).sum::<f64>().sqrt())
    }

    pub fn sample(&self, grid: &GridSpec) -> Result<Window> {
        bump_window(self.radius, self.flat_order, grid)
    }

    /// `ℱχ(ω) = ∫ e^{−i t·ω} χ(t) dt` by the trapezoid rule on `nodes`
    /// subintervals per axis. The integrand is smooth and vanishes to all
    /// orders at the support edge, so the rule converges spectrally.
    pub fn fourier(&self, omega: &[f64], nodes: usize) -> f64 {
        FourierQuadrature::new(*self, omega.len(), nodes).eval(omega)
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "bump:R={},a={}",
            fmt_real(self.radius),
            fmt_real(self.flat_order)
        )
    }
}

impl FromStr for WindowSpec {
    type Err = Error;

    fn from_str(input: &str) -> Result<Self> {
        let spec = SpecString::parse("window", input)?;
        if spec.kind != "bump" {
            return Err(spec.err(format!("unknown window kind {:?}", spec.kind)));
        }
        spec.only(&["R", "a"])?;
        WindowSpec::new(spec.real("R")?, spec.real_or("a", DEFAULT_FLAT_ORDER)?)
    }
}

/// Precomputed quadrature nodes for repeated evaluation of `ℱχ`.
#[derive(Debug, Clone)]
pub struct FourierQuadrature {
    dim: usize,
    nodes: Vec<f64>,
    /// Trapezoid weight times `χ` at each tensor node, row-major.
    mass: Vec<f64>,
}

impl FourierQuadrature {
    pub fn new(spec: WindowSpec, dim: usize, nodes: usize) -> Self {
        let h = 2.0 * spec.radius / nodes as f64;
        let ts: Vec<f64> = (0..=nodes).map(|j| -spec.radius + j as f64 * h).collect();
        let mass = match dim {
            1 => ts.iter().map(|&t| h * spec.profile(t.abs())).collect(),
            _ => {
                let mut m = Vec::with_capacity(ts.len() * ts.len());
                for &a in &ts {
                    for &b in &ts {
                        m.push(h * h * spec.profile((a * a + b * b).sqrt()));
                    }
                }
                m
            }
        };
        FourierQuadrature {
            dim,
            nodes: ts,
            mass,
        }
    }

    /// `ℱχ(ω)`; real because `χ` is real and even.
    pub fn eval(&self, omega: &[f64]) -> f64 {
        match self.dim {
            1 => self
                .nodes
                .iter()
                .zip(&self.mass)
                .map(|(t, m)| m * (t * omega[0]).cos())
                .sum(),
            _ => {
                let n = self.nodes.len();
                let ca: Vec<f64> = self.nodes.iter().map(|t| (t * omega[0]).cos()).collect();
                let sa: Vec<f64> = self.nodes.iter().map(|t| (t * omega[0]).sin()).collect();
                let cb: Vec<f64> = self.nodes.iter().map(|t| (t * omega[1]).cos()).collect();
                let sb: Vec<f64> = self.nodes.iter().map(|t| (t * omega[1]).sin()).collect();
                let mut acc = 0.0;
                for i in 0..n {
                    let row = &self.mass[i * n..(i + 1) * n];
                    let mut c = 0.0;
                    let mut s = 0.0;
                    for j in 0..n {
                        c += row[j] * cb[j];
                        s += row[j] * sb[j];
                    }
                    // cos(a + b) = cos a cos b − sin a sin b
                    acc += ca[i] * c - sa[i] * s;
                }
                acc
            }
        }
    }
}

/// A bump window sampled at the node offsets of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    spec: WindowSpec,
    dim: usize,
    spacing: f64,
    /// Largest offset index with a possibly non-zero sample.
    half_width: usize,
    /// Samples at offsets `−m..=m` per axis, row-major.
    taps: Vec<f64>,
}

/// Samples `χ(t) = exp(a − a/(1 − |t/R|²))` on the offsets of `grid`.
pub fn bump_window(radius: f64, flat_order: f64, grid: &GridSpec) -> Result<Window> {
    let spec = WindowSpec::new(radius, flat_order)?;
    let dx = grid.spacing;
    if radius < MIN_RADIUS_SAMPLES * dx {
        return Err(Error::Resolution(format!(
            "window radius {radius} is below {MIN_RADIUS_SAMPLES} grid spacings ({})",
            MIN_RADIUS_SAMPLES * dx
        )));
    }
    let m = (radius / dx).floor() as usize;
    let width = 2 * m + 1;
    let offs: Vec<f64> = (0..width).map(|j| (j as f64 - m as f64) * dx).collect();
    let taps = match grid.dim {
        1 => offs.iter().map(|&t| spec.profile(t.abs())).collect(),
        _ => {
            let mut v = Vec::with_capacity(width * width);
            for &a in &offs {
                for &b in &offs {
                    v.push(spec.profile((a * a + b * b).sqrt()));
                }
            }
            v
        }
    };
    Ok(Window {
        spec,
        dim: grid.dim,
        spacing: dx,
        half_width: m,
        taps,
    })
}

impl Window {
    pub fn spec(&self) -> WindowSpec {
        self.spec
    }

    pub fn radius(&self) -> f64 {
        self.spec.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn max_abs(&self) -> f64 {
        self.taps.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest difference quotient of the sampled profile between
    /// neighbouring nodes.
    pub fn lipschitz(&self) -> f64 {
        let m = self.half_width;
        let w = 2 * m + 1;
        let profile: Vec<f64> = match self.dim {
            1 => self.taps.clone(),
            _ => (0..w).map(|j| self.taps[m * w + j]).collect(),
        };
        profile
            .windows(2)
            .map(|p| (p[1] - p[0]).abs() / self.spacing)
            .fold(0.0, f64::max)
    }
}

/// Frequency lattice dual to a grid: `Δξ = 2π/(NΔx)`, `k ∈ [−N/2, N/2)`,
/// stored in ascending order along each axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreqGrid {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
}

impl FreqGrid {
    pub fn for_grid(grid: &GridSpec) -> Self {
        FreqGrid {
            dim: grid.dim,
            shape: grid.shape.clone(),
            spacing: grid
                .shape
                .iter()
                .map(|&n| 2.0 * std::f64::consts::PI / (n as f64 * grid.spacing))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Signed lattice index along `axis` for stored position `i`.
    pub fn index(&self, axis: usize, i: usize) -> i64 {
        i as i64 - (self.shape[axis] / 2) as i64
    }

    pub fn freq(&self, flat: usize) -> Vec<f64> {
        match self.dim {
            1 => vec![self.index(0, flat) as f64 * self.spacing[0]],
            _ => {
                let n1 = self.shape[1];
                vec![
                    self.index(0, flat / n1) as f64 * self.spacing[0],
                    self.index(1, flat % n1) as f64 * self.spacing[1],
                ]
            }
        }
    }

    /// Lattice measure `Δξ^d`.
    pub fn cell_measure(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Radius of the largest ball inside the lattice extent, `π/Δx`.
    pub fn extent(&self) -> f64 {
        self.shape
            .iter()
            .zip(&self.spacing)
            .map(|(&n, &d)| (n / 2) as f64 * d)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Phase reference for the per-centre transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseConvention {
    /// `e^{−i t·ξ}` with `t` the absolute coordinate.
    #[default]
    Absolute,
    /// Drops the `e^{−i t_start·ξ}` factor. Magnitudes are unaffected; only
    /// useful as a negative control for the closed-form checks.
    WindowLocal,
}

/// `V_χ f(x, ξ)` for a list of centres over the whole frequency lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct STFTVolume {
    pub centers: Vec<Vec<f64>>,
    pub freq_grid: FreqGrid,
    values: Vec<Complex64>,
}

impl STFTVolume {
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn slice(&self, center: usize) -> &[Complex64] {
        let n = self.freq_grid.len();
        &self.values[center * n..(center + 1) * n]
    }
}

/// Reusable FFT plans for one grid shape.
#[derive(Clone)]
pub struct StftEngine {
    grid: GridSpec,
    freq: FreqGrid,
    plans: Vec<Arc<dyn Fft<f64>>>,
    phase: PhaseConvention,
}

impl fmt::Debug for StftEngine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StftEngine")
            .field("grid", &self.grid)
            .field("phase", &self.phase)
            .finish()
    }
}

impl StftEngine {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let plans = grid.shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        StftEngine {
            grid: grid.clone(),
            freq: FreqGrid::for_grid(grid),
            plans,
            phase: PhaseConvention::Absolute,
        }
    }

    pub fn with_phase(mut self, phase: PhaseConvention) -> Self {
        self.phase = phase;
        self
    }

    pub fn freq_grid(&self) -> &FreqGrid {
        &self.freq
    }

    /// Checks that the window fits around node `idx`.
    pub fn check_center(&self, window: &Window, idx: &[usize]) -> Result<()> {
        let m = window.half_width;
        for (a, &i) in idx.iter().enumerate() {
            if i < m || i + m >= self.grid.shape[a] {
                return Err(Error::Boundary(format!(
                    "window of radius {} overruns the grid at centre {:?}",
                    window.radius(),
                    self.grid.point(idx)
                )));
            }
        }
        Ok(())
    }

    /// One slice `ξ ↦ V_χ f(x, ξ)` at grid node `idx`, ascending frequencies.
    pub fn slice_at(&self, field: &SampledField, window: &Window, idx: &[usize]) -> Result<Vec<Complex64>> {
        if window.dim != self.grid.dim || window.spacing != self.grid.spacing {
            return Err(Error::Config("window was sampled on a different grid".into()));
        }
        self.check_center(window, idx)?;
        let m = window.half_width;
        let w = 2 * m + 1;
        let g = &self.grid;
        let samples = field.samples();
        let zero = Complex64::new(0.0, 0.0);
        let start: Vec<usize> = idx.iter().map(|&i| i - m).collect();
        let t_start = g.point(&start);
        let mut buf = vec![zero; g.len()];
        match g.dim {
            1 => {
                for j in 0..w {
                    buf[j] = samples[start[0] + j] * window.taps[j];
                }
            }
            _ => {
                let n1 = g.shape[1];
                for r in 0..w {
                    let src = (start[0] + r) * n1 + start[1];
                    let row = &mut buf[r * n1..(r + 1) * n1];
                    for j in 0..w {
                        row[j] = samples[src + j] * window.taps[r * w + j];
                    }
                }
            }
        }
        Ok(self.transform(buf, w, &t_start))
    }

    /// `ℱf` of the whole field over the lattice, ascending frequencies.
    pub fn transform_field(&self, field: &SampledField) -> Vec<Complex64> {
        let rows = if self.grid.dim == 1 { 1 } else { self.grid.shape[0] };
        self.transform(field.samples().to_vec(), rows, &self.grid.origin)
    }

    /// `Δx^d e^{−i t₀·ξ} DFT[buf]`, where `buf` holds samples starting at
    /// the node `t₀`; in 2-d only the first `rows` rows may be non-zero.
    fn transform(&self, mut buf: Vec<Complex64>, rows: usize, t_start: &[f64]) -> Vec<Complex64> {
        let g = &self.grid;
        let zero = Complex64::new(0.0, 0.0);
        match g.dim {
            1 => self.plans[0].process(&mut buf),
            _ => {
                let (n0, n1) = (g.shape[0], g.shape[1]);
                // Rows beyond the patch are zero and stay zero.
                for row in buf[..rows * n1].chunks_exact_mut(n1) {
                    self.plans[1].process(row);
                }
                let mut col = vec![zero; n0];
                for c in 0..n1 {
                    for r in 0..n0 {
                        col[r] = buf[r * n1 + c];
                    }
                    self.plans[0].process(&mut col);
                    for r in 0..n0 {
                        buf[r * n1 + c] = col[r];
                    }
                }
            }
        }
        let scale = g.spacing.powi(g.dim as i32);
        let f = &self.freq;
        let mut out = vec![zero; buf.len()];
        match g.dim {
            1 => {
                let n = g.shape[0];
                for (pos, o) in out.iter_mut().enumerate() {
                    let k = f.index(0, pos);
                    let src = k.rem_euclid(n as i64) as usize;
                    *o = buf[src] * self.axis_phase(t_start[0], k as f64 * f.spacing[0]) * scale;
                }
            }
            _ => {
                let (n0, n1) = (g.shape[0], g.shape[1]);
                let ph1: Vec<Complex64> = (0..n1)
                    .map(|p| self.axis_phase(t_start[1], f.index(1, p) as f64 * f.spacing[1]))
                    .collect();
                for p0 in 0..n0 {
                    let k0 = f.index(0, p0);
                    let s0 = k0.rem_euclid(n0 as i64) as usize;
                    let ph0 = self.axis_phase(t_start[0], k0 as f64 * f.spacing[0]) * scale;
                    for p1 in 0..n1 {
                        let s1 = f.index(1, p1).rem_euclid(n1 as i64) as usize;
                        out[p0 * n1 + p1] = buf[s0 * n1 + s1] * ph0 * ph1[p1];
                    }
                }
            }
        }
        out
    }

    fn axis_phase(&self, t: f64, xi: f64) -> Complex64 {
        match self.phase {
            PhaseConvention::Absolute => Complex64::from_polar(1.0, -t * xi),
            PhaseConvention::WindowLocal => Complex64::new(1.0, 0.0),
        }
    }

    /// Full volume; centres are snapped to the nearest node.
    pub fn compute(&self, field: &SampledField, window: &Window, centers: &[Vec<f64>]) -> Result<STFTVolume> {
        if field.grid() != &self.grid {
            return Err(Error::Config("field lives on a different grid".into()));
        }
        let idx: Vec<Vec<usize>> = centers
            .iter()
            .map(|c| {
                self.grid.snap(c).ok_or_else(|| {
                    Error::Boundary(format!("centre {c:?} lies outside the grid"))
                })
            })
            .collect::<Result<_>>()?;
        let slices: Vec<Vec<Complex64>> = idx
            .par_iter()
            .map(|i| self.slice_at(field, window, i))
            .collect::<Result<_>>()?;
        Ok(STFTVolume {
            centers: idx.iter().map(|i| self.grid.point(i)).collect(),
            freq_grid: self.freq.clone(),
            values: slices.concat(),
        })
    }
}

/// `V_χ f` at the given centres over the lattice dual to the field's grid.
pub fn compute_stft(field: &SampledField, window: &Window, centers: &[Vec<f64>]) -> Result<STFTVolume> {
    StftEngine::new(field.grid()).compute(field, window, centers)
}

/// Analytic `V_χ f(x, ξ)` for the delta and plane-wave catalogue entries:
/// `e^{−iξ·x₀} χ(x₀ − x)` and `e^{−ix·(ξ−η)} ℱχ(ξ − η)`.
pub fn closed_form_stft(entry: &AnalyticSignal, window: &WindowSpec, x: &[f64], xi: &[f64]) -> Result<Complex64> {
    match entry {
        AnalyticSignal::Delta { x0 } => {
            let d: Vec<f64> = x0.iter().zip(x).map(|(a, b)| a - b).collect();
            let phase: f64 = xi.iter().zip(x0).map(|(a, b)| a * b).sum();
            Ok(Complex64::from_polar(window.eval(&d), -phase))
        }
        AnalyticSignal::PlaneWave { eta } => {
            let zeta: Vec<f64> = xi.iter().zip(eta).map(|(a, b)| a - b).collect();
            let phase: f64 = x.iter().zip(&zeta).map(|(a, b)| a * b).sum();
            let nodes = if xi.len() == 1 { 4096 } else { 512 };
            Ok(Complex64::from_polar(1.0, -phase) * window.fourier(&zeta, nodes))
        }
        other => Err(Error::OracleUnavailable(format!("no closed-form STFT for {other}"))),
    }
}

/// [`closed_form_stft`] over a whole centres × lattice volume, sharing the
/// window transform across centres.
pub fn closed_form_volume(
    entry: &AnalyticSignal,
    window: &WindowSpec,
    centers: &[Vec<f64>],
    freq: &FreqGrid,
    quadrature_nodes: usize,
) -> Result<Vec<Complex64>> {
    let xis: Vec<Vec<f64>> = (0..freq.len()).map(|k| freq.freq(k)).collect();
    match entry {
        AnalyticSignal::Delta { .. } => {
            let mut out = Vec::with_capacity(centers.len() * xis.len());
            for x in centers {
                for xi in &xis {
                    out.push(closed_form_stft(entry, window, x, xi)?);
                }
            }
            Ok(out)
        }
        AnalyticSignal::PlaneWave { eta } => {
            let quad = FourierQuadrature::new(*window, freq.dim, quadrature_nodes);
            let zetas: Vec<Vec<f64>> = xis
                .iter()
                .map(|xi| xi.iter().zip(eta).map(|(a, b)| a - b).collect())
                .collect();
            let hat: Vec<f64> = zetas.par_iter().map(|z| quad.eval(z)).collect();
            let mut out = Vec::with_capacity(centers.len() * xis.len());
            for x in centers {
                for (z, h) in zetas.iter().zip(&hat) {
                    let phase: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum();
                    out.push(Complex64::from_polar(*h, -phase));
                }
            }
            Ok(out)
        }
        other => Err(Error::OracleUnavailable(format!("no closed-form STFT for {other}"))),
    }
}

#[derive(Serialize)]
struct VolumeHeader<'a> {
    centers: &'a [Vec<f64>],
    freq_grid: &'a FreqGrid,
    dtype: &'static str,
}

/// Dumps a volume as a JSON header line followed by little-endian
/// complex128 values ordered by (centre, frequency).
pub fn save_volume(volume: &STFTVolume, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let header = VolumeHeader {
        centers: &volume.centers,
        freq_grid: &volume.freq_grid,
        dtype: "complex128-le",
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    write_payload(&mut out, &volume.values)?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::synth;

    fn grid1() -> GridSpec {
        GridSpec::centered(1, 4096, 1.0 / 256.0).unwrap()
    }

    #[test]
    fn bump_profile_values() {
        let w = WindowSpec::new(0.5, 2.0).unwrap();
        assert_eq!(w.profile(0.0), 1.0);
        assert_eq!(w.profile(0.5), 0.0);
        assert_eq!(w.profile(0.7), 0.0);
        let r = 0.5 / 2f64.sqrt();
        assert!((w.profile(r) - (-2.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn sampled_window_is_even_and_supported() {
        let g = grid1();
        let w = bump_window(0.1, 2.0, &g).unwrap();
        let t = w.taps();
        assert_eq!(t[w.half_width()], 1.0);
        for j in 0..t.len() {
            assert_eq!(t[j], t[t.len() - 1 - j]);
        }
        assert!(t.iter().all(|v| *v >= 0.0 && *v <= 1.0));
        assert!(matches!(bump_window(0.02, 2.0, &g), Err(Error::Resolution(_))));
        assert!(bump_window(8.0 / 256.0, 2.0, &g).is_ok());
    }

    #[test]
    fn window_spec_strings() {
        let w: WindowSpec = "bump:R=0.1,a=2".parse().unwrap();
        assert_eq!(w, WindowSpec::new(0.1, 2.0).unwrap());
        assert_eq!(w.to_string().parse::<WindowSpec>().unwrap(), w);
        assert_eq!("bump:R=0.2".parse::<WindowSpec>().unwrap().flat_order, 2.0);
        assert!("gauss:R=0.1".parse::<WindowSpec>().is_err());
        assert!("bump:R=0.1,a=0.5".parse::<WindowSpec>().is_err());
    }

    #[test]
    fn fourier_quadrature_at_zero_matches_area() {
        // ∫χ over [−R, R] by a much finer midpoint rule.
        let w = WindowSpec::new(1.0, 2.0).unwrap();
        let n = 200_000;
        let h = 2.0 / n as f64;
        let area: f64 = (0..n).map(|j| w.profile((-1.0 + (j as f64 + 0.5) * h).abs()) * h).sum();
        assert!((w.fourier(&[0.0], 2048) - area).abs() < 1e-9);
        assert!((w.fourier(&[0.0], 1024) - w.fourier(&[0.0], 4096)).abs() < 1e-12);
    }

    #[test]
    fn zero_field_gives_zero_volume() {
        let g = grid1();
        let f = synth(&AnalyticSignal::Zero, &g).unwrap();
        let w = bump_window(0.1, 2.0, &g).unwrap();
        let v = compute_stft(&f, &w, &[vec![0.0], vec![1.0]]).unwrap();
        assert!(v.values().iter().all(|z| z.norm() == 0.0));
        assert_eq!(v.values().len(), 2 * 4096);
    }

    #[test]
    fn delta_matches_closed_form_on_grid_centres() {
        let g = grid1();
        let entry = AnalyticSignal::Delta { x0: vec![0.0] };
        let f = synth(&entry, &g).unwrap();
        let w = bump_window(0.25, 2.0, &g).unwrap();
        let centers: Vec<Vec<f64>> = (-8..=8).map(|k| vec![k as f64 * 0.03125]).collect();
        let v = compute_stft(&f, &w, &centers).unwrap();
        let cf = closed_form_volume(&entry, &w.spec(), &v.centers, &v.freq_grid, 0).unwrap();
        let err = v
            .values()
            .iter()
            .zip(&cf)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn delta_closed_form_examples() {
        let w = WindowSpec::new(0.25, 2.0).unwrap();
        let d = AnalyticSignal::Delta { x0: vec![0.0] };
        assert_eq!(closed_form_stft(&d, &w, &[0.0], &[17.0]).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(closed_form_stft(&d, &w, &[0.3], &[1.0]).unwrap().norm(), 0.0);
        let pw = AnalyticSignal::PlaneWave { eta: vec![5.0] };
        let v = closed_form_stft(&pw, &w, &[0.0], &[5.0]).unwrap();
        assert!(v.re > 0.0 && v.im == 0.0);
        assert!(closed_form_stft(&AnalyticSignal::Zero, &w, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn plane_wave_modulus_is_centre_independent() {
        let g = grid1();
        let eta = 40.0 * 2.0 * std::f64::consts::PI / (4096.0 / 256.0);
        let entry = AnalyticSignal::PlaneWave { eta: vec![eta] };
        let f = synth(&entry, &g).unwrap();
        let w = bump_window(0.25, 2.0, &g).unwrap();
        let v = compute_stft(&f, &w, &[vec![-1.0], vec![0.0], vec![2.5]]).unwrap();
        let quad = FourierQuadrature::new(w.spec(), 1, 4096);
        for k in (0..4096).step_by(37) {
            let xi = v.freq_grid.freq(k);
            let want = quad.eval(&[xi[0] - eta]).abs();
            let base = v.slice(0)[k].norm();
            // Lattice aliasing of the window transform stays below 1e-9.
            assert!((base - want).abs() < 1e-9, "k={k} {base} vs {want}");
            for c in 1..3 {
                assert!((v.slice(c)[k].norm() - base).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn window_overrun_is_a_boundary_error() {
        let g = grid1();
        let f = synth(&AnalyticSignal::Zero, &g).unwrap();
        let w = bump_window(0.5, 2.0, &g).unwrap();
        assert!(matches!(compute_stft(&f, &w, &[vec![-7.8]]), Err(Error::Boundary(_))));
        assert!(matches!(compute_stft(&f, &w, &[vec![9.0]]), Err(Error::Boundary(_))));
    }

    #[test]
    fn gaussian_decays_in_the_upper_quarter() {
        let g = grid1();
        let f = synth(
            &AnalyticSignal::Gaussian {
                center: vec![0.0],
                width: 0.1,
            },
            &g,
        )
        .unwrap();
        let w = bump_window(0.5, 2.0, &g).unwrap();
        let centers: Vec<Vec<f64>> = (-10..=10).map(|k| vec![k as f64 * 0.05]).collect();
        let v = compute_stft(&f, &w, &centers).unwrap();
        let cut = 0.75 * v.freq_grid.extent();
        let mut peak = 0.0f64;
        let mut high = 0.0f64;
        for c in 0..centers.len() {
            for (k, z) in v.slice(c).iter().enumerate() {
                peak = peak.max(z.norm());
                if v.freq_grid.freq(k)[0].abs() >= cut {
                    high = high.max(z.norm());
                }
            }
        }
        assert!(high < 1e-8 * peak, "{high} vs {peak}");
    }

    #[test]
    fn two_dimensional_delta_matches_closed_form() {
        let g = GridSpec::centered(2, 64, 1.0 / 32.0).unwrap();
        let entry = AnalyticSignal::Delta { x0: vec![0.125, -0.25] };
        let f = synth(&entry, &g).unwrap();
        let w = bump_window(0.4, 2.0, &g).unwrap();
        let centers = vec![vec![0.0, 0.0], vec![0.25, -0.125]];
        let v = compute_stft(&f, &w, &centers).unwrap();
        let cf = closed_form_volume(&entry, &w.spec(), &v.centers, &v.freq_grid, 0).unwrap();
        for (a, b) in v.values().iter().zip(&cf) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn window_local_phase_breaks_the_closed_form() {
        let g = grid1();
        let entry = AnalyticSignal::Delta { x0: vec![0.0] };
        let f = synth(&entry, &g).unwrap();
        let w = bump_window(0.25, 2.0, &g).unwrap();
        let engine = StftEngine::new(&g).with_phase(PhaseConvention::WindowLocal);
        let v = engine.compute(&f, &w, &[vec![0.0625]]).unwrap();
        let cf = closed_form_volume(&entry, &w.spec(), &v.centers, &v.freq_grid, 0).unwrap();
        let err = v.values().iter().zip(&cf).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err > 0.1);
        for (a, b) in v.values().iter().zip(&cf) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
    }
}
