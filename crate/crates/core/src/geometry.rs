//! Open frequency cones, direction grids and the cone-margin constant.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{fmt_real, SpecString};

const UNIT_TOL: f64 = 1e-12;

/// An open cone in `ℝ^d ∖ {0}`.
///
/// In one dimension the only cones are the half-lines `{ξ > 0}` and
/// `{ξ < 0}`; the half-angle is meaningless there and stored as `π/2`.
/// In two dimensions the cone is circular: all `ξ` whose angle to `axis`
/// is strictly below `half_angle`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cone {
    dim: usize,
    axis: [f64; 2],
    half_angle: f64,
}

impl Cone {
    pub fn half_line(positive: bool) -> Self {
        Cone {
            dim: 1,
            axis: [if positive { 1.0 } else { -1.0 }, 0.0],
            half_angle: PI / 2.0,
        }
    }

    /// Circular cone in the plane; angles in radians.
    pub fn circular(axis_angle: f64, half_angle: f64) -> Result<Self> {
        if !(half_angle > 0.0 && half_angle < PI / 2.0) {
            return Err(Error::Geometry(format!(
                "half-angle must lie in (0, π/2), got {half_angle}"
            )));
        }
        Ok(Cone {
            dim: 2,
            axis: [axis_angle.cos(), axis_angle.sin()],
            half_angle,
        })
    }

    /// Cone around an arbitrary (not necessarily unit) direction.
    pub fn around(direction: &[f64], half_angle: f64) -> Result<Self> {
        match direction {
            [x] if *x != 0.0 => Ok(Cone::half_line(*x > 0.0)),
            [x, y] if *x != 0.0 || *y != 0.0 => Cone::circular(y.atan2(*x), half_angle),
            [_] | [_, _] => Err(Error::Geometry("cone axis must be non-zero".into())),
            other => Err(Error::UnsupportedDimension(other.len())),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis[..self.dim]
    }

    pub fn half_angle(&self) -> f64 {
        self.half_angle
    }

    /// Same axis, different opening. A no-op in one dimension.
    pub fn with_half_angle(&self, half_angle: f64) -> Result<Self> {
        if self.dim == 1 {
            return Ok(*self);
        }
        Cone::circular(self.axis[1].atan2(self.axis[0]), half_angle)
    }

    /// `θ_Γ(ξ)` as a boolean.
    pub fn contains(&self, xi: &[f64]) -> bool {
        match (self.dim, xi) {
            (1, [x]) => *x != 0.0 && (*x > 0.0) == (self.axis[0] > 0.0),
            (2, [x, y]) => {
                if *x == 0.0 && *y == 0.0 {
                    return false;
                }
                let dot = x * self.axis[0] + y * self.axis[1];
                let cross = x * self.axis[1] - y * self.axis[0];
                cross.abs().atan2(dot) < self.half_angle
            }
            _ => false,
        }
    }
}

/// `θ_Γ(ξ) ∈ {0, 1}`.
pub fn cone_indicator(cone: &Cone, xi: &[f64]) -> u8 {
    u8::from(cone.contains(xi))
}

fn axis_gap(a: &Cone, b: &Cone) -> f64 {
    let dot = (a.axis[0] * b.axis[0] + a.axis[1] * b.axis[1]).clamp(-1.0, 1.0);
    let cross = a.axis[0] * b.axis[1] - a.axis[1] * b.axis[0];
    cross.abs().atan2(dot)
}

/// Largest `c` with `{η : |η − ξ| ≤ c|ξ| for some ξ ∈ Γ} ⊆ Γ₁`.
///
/// For circular cones the thickened set is the cone of half-angle
/// `α + asin c` around Γ's axis, so `c = sin(α₁ − α − δ)` where `δ` is the
/// angle between the axes. Requires strict containment of the closure.
pub fn shrink_margin(inner: &Cone, outer: &Cone) -> Result<f64> {
    if inner.dim != outer.dim {
        return Err(Error::Geometry("cones live in different dimensions".into()));
    }
    if inner.dim == 1 {
        return Err(Error::Geometry(
            "one-dimensional cones admit no strict shrink".into(),
        ));
    }
    let gap = outer.half_angle - inner.half_angle - axis_gap(inner, outer);
    if gap <= 0.0 {
        return Err(Error::Geometry(format!(
            "closure of the inner cone is not inside the outer cone (angular gap {gap})"
        )));
    }
    Ok(gap.sin().min(1.0 - 1e-12))
}

impl fmt::Display for Cone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim == 1 {
            let sign = if self.axis[0] > 0.0 { "+1" } else { "-1" };
            write!(f, "cone:axis={sign}")
        } else {
            write!(
                f,
                "cone:axis={},angle={}",
                fmt_real(self.axis[1].atan2(self.axis[0]).to_degrees()),
                fmt_real(self.half_angle.to_degrees())
            )
        }
    }
}

/// A direction given either as `+1`/`-1` (one dimension) or as an angle in
/// degrees (two dimensions).
pub fn parse_direction(raw: &str) -> Result<Vec<f64>> {
    match raw.trim() {
        "+1" | "+" => Ok(vec![1.0]),
        "-1" | "-" => Ok(vec![-1.0]),
        deg => {
            let d: f64 = deg
                .parse()
                .map_err(|_| Error::parse("direction", raw, "expected +1, -1 or degrees"))?;
            if !d.is_finite() {
                return Err(Error::parse("direction", raw, "angle must be finite"));
            }
            let rad = d.to_radians();
            Ok(vec![rad.cos(), rad.sin()])
        }
    }
}

impl FromStr for Cone {
    type Err = Error;

    /// `cone:axis=<deg|±1>,angle=<deg>`; a signed `±1` axis selects the
    /// one-dimensional half-lines.
    fn from_str(input: &str) -> Result<Self> {
        let spec = SpecString::parse("cone", input)?;
        if spec.kind != "cone" {
            return Err(spec.err("expected kind \"cone\""));
        }
        spec.only(&["axis", "angle"])?;
        let axis = spec.raw("axis").ok_or_else(|| spec.err("missing key \"axis\""))?;
        let dir = parse_direction(axis)?;
        if dir.len() == 1 {
            return Ok(Cone::half_line(dir[0] > 0.0));
        }
        let angle = spec.real("angle")?;
        Cone::around(&dir, angle.to_radians())
    }
}

/// Unit directions discretising the sphere `𝕊^{d−1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionGrid {
    pub dim: usize,
    pub directions: Vec<Vec<f64>>,
}

impl DirectionGrid {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Angular spacing between neighbours (π in one dimension).
    pub fn step(&self) -> f64 {
        if self.dim == 1 {
            PI
        } else {
            2.0 * PI / self.directions.len() as f64
        }
    }

    /// Direction angle in degrees, `[0, 360)`.
    pub fn angle_deg(&self, index: usize) -> f64 {
        let d = &self.directions[index];
        if self.dim == 1 {
            return if d[0] > 0.0 { 0.0 } else { 180.0 };
        }
        let a = d[1].atan2(d[0]).to_degrees();
        if a < 0.0 {
            a + 360.0
        } else {
            a
        }
    }
}

/// `dim = 1`: `[+1, −1]`; `dim = 2`: angles `2πk/n` in increasing order.
pub fn direction_grid(dim: usize, n: usize) -> Result<DirectionGrid> {
    match dim {
        1 => {
            if n != 2 {
                return Err(Error::Geometry(format!(
                    "one-dimensional direction grids have exactly 2 directions, got {n}"
                )));
            }
            Ok(DirectionGrid {
                dim,
                directions: vec![vec![1.0], vec![-1.0]],
            })
        }
        2 => {
            if n < 2 {
                return Err(Error::Geometry(format!("need at least 2 directions, got {n}")));
            }
            let directions = (0..n)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / n as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect();
            Ok(DirectionGrid { dim, directions })
        }
        other => Err(Error::UnsupportedDimension(other)),
    }
}

pub(crate) fn is_unit(v: &[f64]) -> bool {
    (v.iter().map(|c| c * c).sum::<f64>().sqrt() - 1.0).abs() <= UNIT_TOL
}
