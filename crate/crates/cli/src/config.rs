//! Run configuration: one JSON document, overridden field by field by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use wfset_core::detector::{DetectorParams, SweepConfig};
use wfset_core::geometry::parse_direction;
use wfset_core::norms::DEFAULT_EPSILON;
use wfset_core::signals::load_csv;
use wfset_core::{
    direction_grid, load_field, synth, AnalyticSignal, Backend, DecisionRule, DirectionGrid, GridSpec,
    SampledField, ScheduleSpec, WindowSpec,
};

use crate::CliError;

pub const DEFAULT_WINDOW: &str = "bump:R=0.1,a=2";
pub const DEFAULT_BACKEND: &str = "sobolev:s=0";
pub const DEFAULT_SEQUENCE: &str = "gevrey:s=2,pmax=300";
pub const DEFAULT_STRIDE: usize = 4;
pub const DEFAULT_LAMBDAS: [f64; 4] = [10.0, 100.0, 1e3, 1e4];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    /// Catalog entry, e.g. `delta:x0=0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<String>,
    /// Field file (binary, or CSV when the name ends in `.csv`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    /// Cone half-angle in degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
    /// `+1`, `-1`, or an angle in degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mis_phase: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallel: Option<usize>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Fields set in `flags` win.
    pub fn merge(mut self, flags: RunConfig) -> Self {
        // A source given on the command line replaces the configured one.
        if flags.signal.is_some() {
            self.field = None;
        }
        if flags.field.is_some() {
            self.signal = None;
            self.grid = None;
        }
        overlay!(
            self, flags, command, signal, field, grid, window, backend, half_angle, directions, dir, x0,
            k_radius, centers, stride, span, schedule, epsilon, refine, sequence, lambda, mis_phase, out,
            csv, parallel
        );
        self
    }

    /// The configuration echoed into reports: everything that determines the
    /// cell content, nothing about where output goes or how many threads ran.
    pub fn echo(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.out = None;
        c.csv = None;
        c.parallel = None;
        serde_json::to_value(c).expect("config serialises")
    }

    pub fn field(&self) -> Result<SampledField, CliError> {
        match (&self.signal, &self.field) {
            (Some(_), Some(_)) => Err(CliError::Usage("give either a signal or a field file, not both".into())),
            (Some(s), None) => {
                let entry: AnalyticSignal = s.parse()?;
                Ok(synth(&entry, &self.grid_spec()?)?)
            }
            (None, Some(path)) => {
                if self.grid.is_some() {
                    return Err(CliError::Usage("a field file carries its own grid; drop --grid".into()));
                }
                let csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
                Ok(if csv { load_csv(path)? } else { load_field(path)? })
            }
            (None, None) => Err(CliError::Usage("no signal source: give --signal or --field".into())),
        }
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        let raw = self.grid.as_deref().ok_or_else(|| CliError::Usage("missing --grid".into()))?;
        Ok(raw.parse()?)
    }

    pub fn backend_spec(&self) -> Result<Backend, CliError> {
        Ok(self.backend.as_deref().unwrap_or(DEFAULT_BACKEND).parse()?)
    }

    pub fn schedule_spec(&self) -> Result<ScheduleSpec, CliError> {
        match &self.schedule {
            Some(s) => Ok(s.parse()?),
            None => Ok(ScheduleSpec::default()),
        }
    }

    pub fn rule(&self) -> DecisionRule {
        DecisionRule::with_epsilon(self.epsilon.unwrap_or(DEFAULT_EPSILON))
    }

    pub fn half_angle_rad(&self) -> Option<f64> {
        self.half_angle.map(f64::to_radians)
    }

    pub fn detector_params(&self) -> Result<DetectorParams, CliError> {
        let window: WindowSpec = self.window.as_deref().unwrap_or(DEFAULT_WINDOW).parse()?;
        let mut p = DetectorParams::new(window, self.backend_spec()?);
        if let Some(a) = self.half_angle_rad() {
            p.half_angle = a;
        }
        p.k_radius = self.k_radius;
        if let Some(c) = self.centers {
            p.center_count = c;
        }
        p.schedule = self.schedule_spec()?;
        p.rule = self.rule();
        p.refine = self.refine.unwrap_or(false);
        Ok(p)
    }

    pub fn direction_grid(&self, dim: usize) -> Result<DirectionGrid, CliError> {
        let n = self.directions.unwrap_or(if dim == 1 { 2 } else { 16 });
        Ok(direction_grid(dim, n)?)
    }

    pub fn direction(&self) -> Result<Vec<f64>, CliError> {
        let raw = self.dir.as_deref().ok_or_else(|| CliError::Usage("missing --dir".into()))?;
        Ok(parse_direction(raw)?)
    }

    pub fn sweep_config(&self, dim: usize) -> Result<SweepConfig, CliError> {
        Ok(SweepConfig {
            stride: self.stride.unwrap_or(DEFAULT_STRIDE),
            span: self.span,
            directions: self.direction_grid(dim)?,
            params: self.detector_params()?,
        })
    }
}

/// `a` or `a/b`, as used by `--x0`.
pub fn parse_point(raw: &str) -> Result<Vec<f64>, String> {
    raw.split('/')
        .map(|c| c.trim().parse::<f64>().map_err(|_| format!("{raw:?} is not a point like 0.1 or 0.1/0.2")))
        .collect()
}

/// Comma-separated reals, as used by `--lambda`.
pub fn parse_list(raw: &str) -> Result<Vec<f64>, String> {
    raw.split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|_| format!("{c:?} is not a number")))
        .collect()
}
