//! Domain types shared by the forward model and the optimizers: physical
//! constants, layouts, yaw vectors, wind roses, and the feasible region.

use std::f64::consts::PI;
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FarmError, Result};

/// Wake-model and turbine constants, SI units throughout. Thrust and power
/// coefficients are derived from the axial induction factor on demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    /// Rotor diameter `D`, m.
    pub rotor_diameter: f64,
    /// Air density `ρ`, kg/m³.
    pub air_density: f64,
    /// Freestream wind speed `U`, m/s.
    pub freestream_speed: f64,
    /// Constant centerline offset `a_d`, in rotor diameters.
    pub deflection_offset: f64,
    /// Linear centerline drift `b_d` per meter downstream.
    pub deflection_slope: f64,
    /// Linear wake expansion rate `k_r`.
    pub wake_expansion: f64,
    /// Sharpness `τ` of the upstream sigmoid gate, 1/m.
    pub sigmoid_sharpness: f64,
    /// Axial induction factor `α`.
    pub axial_induction: f64,
    /// Yaw bounds relative to the wind direction, rad.
    pub yaw_min: f64,
    pub yaw_max: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        default_params()
    }
}

/// The reference turbine and wake constants.
pub fn default_params() -> PhysicalParams {
    PhysicalParams {
        rotor_diameter: 126.0,
        air_density: 1.23,
        freestream_speed: 8.0,
        deflection_offset: -0.035,
        deflection_slope: -0.01,
        wake_expansion: 0.03,
        sigmoid_sharpness: 0.2,
        axial_induction: 1.0 / 3.0,
        yaw_min: (-30.0f64).to_radians(),
        yaw_max: 30.0f64.to_radians(),
    }
}

impl PhysicalParams {
    /// Actuator-disk thrust coefficient `4α(1-α)`.
    pub fn thrust_coefficient(&self) -> f64 {
        4.0 * self.axial_induction * (1.0 - self.axial_induction)
    }

    /// Power coefficient `4α(1-α)²`.
    pub fn power_coefficient(&self) -> f64 {
        let a = self.axial_induction;
        4.0 * a * (1.0 - a) * (1.0 - a)
    }

    pub fn rotor_area(&self) -> f64 {
        0.25 * PI * self.rotor_diameter * self.rotor_diameter
    }

    /// `½ρAC_P`: power of an unyawed turbine is this times `V³`.
    pub fn power_constant(&self) -> f64 {
        0.5 * self.air_density * self.rotor_area() * self.power_coefficient()
    }

    /// Power of one isolated, unyawed turbine in freestream wind, W.
    pub fn single_turbine_power(&self) -> f64 {
        self.power_constant() * self.freestream_speed.powi(3)
    }

    pub fn min_separation(&self) -> f64 {
        4.0 * self.rotor_diameter
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rotor_diameter", self.rotor_diameter),
            ("air_density", self.air_density),
            ("freestream_speed", self.freestream_speed),
            ("wake_expansion", self.wake_expansion),
            ("sigmoid_sharpness", self.sigmoid_sharpness),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FarmError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.axial_induction > 0.0 && self.axial_induction < 1.0) {
            return Err(FarmError::InvalidParams(format!(
                "axial_induction must lie in (0, 1), got {}",
                self.axial_induction
            )));
        }
        if !(self.yaw_min < self.yaw_max && self.yaw_min > -PI / 2.0 && self.yaw_max < PI / 2.0) {
            return Err(FarmError::InvalidParams(format!(
                "yaw bounds must satisfy -π/2 < yaw_min < yaw_max < π/2, got [{}, {}]",
                self.yaw_min, self.yaw_max
            )));
        }
        if !(self.deflection_offset.is_finite() && self.deflection_slope.is_finite()) {
            return Err(FarmError::InvalidParams("deflection constants must be finite".into()));
        }
        Ok(())
    }

    /// Writes the parameters as `key = value` lines.
    pub fn to_config_string(&self) -> String {
        toml::to_string(self).expect("flat struct of floats always serializes")
    }

    /// Applies `key = value` overrides on top of `self`.
    pub fn with_overrides(&self, text: &str) -> Result<Self> {
        let ov: ParamOverrides = toml::from_str(text).map_err(|e| FarmError::Config(e.message().to_string()))?;
        let mut p = *self;
        macro_rules! apply {
            ($($f:ident),*) => { $( if let Some(v) = ov.$f { p.$f = v; } )* };
        }
        apply!(
            rotor_diameter,
            air_density,
            freestream_speed,
            deflection_offset,
            deflection_slope,
            wake_expansion,
            sigmoid_sharpness,
            axial_induction,
            yaw_min,
            yaw_max
        );
        p.validate()?;
        Ok(p)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FarmError::io(path, e))?;
        default_params().with_overrides(&text)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamOverrides {
    rotor_diameter: Option<f64>,
    air_density: Option<f64>,
    freestream_speed: Option<f64>,
    deflection_offset: Option<f64>,
    deflection_slope: Option<f64>,
    wake_expansion: Option<f64>,
    sigmoid_sharpness: Option<f64>,
    axial_induction: Option<f64>,
    yaw_min: Option<f64>,
    yaw_max: Option<f64>,
}

/// Turbine positions stored as the concatenation `[x; y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Layout {
    coords: Vec<f64>,
}

impl Layout {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() % 2 != 0 {
            return Err(FarmError::InvalidLayout(format!(
                "expected 2·N coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(FarmError::InvalidLayout("non-finite coordinate".into()));
        }
        Ok(Self { coords })
    }

    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        let mut coords: Vec<f64> = points.iter().map(|p| p.0).collect();
        coords.extend(points.iter().map(|p| p.1));
        Self::new(coords)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn xs(&self) -> &[f64] {
        &self.coords[..self.len()]
    }

    pub fn ys(&self) -> &[f64] {
        &self.coords[self.len()..]
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        (self.coords[i], self.coords[self.len() + i])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }
}

impl TryFrom<Vec<f64>> for Layout {
    type Error = FarmError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Layout> for Vec<f64> {
    fn from(l: Layout) -> Self {
        l.coords
    }
}

/// Yaw angles relative to the scenario's wind direction, rad.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct YawVector(pub Vec<f64>);

impl YawVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn within(&self, params: &PhysicalParams) -> bool {
        self.0.iter().all(|&a| a >= params.yaw_min && a <= params.yaw_max)
    }
}

impl Deref for YawVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for YawVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Discrete distribution of wind directions at the midpoints of `W` equal
/// bins of `[0, 2π)`, measured from due East.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindRose {
    angles: Vec<f64>,
    probabilities: Vec<f64>,
}

impl WindRose {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        let w = probabilities.len();
        if w == 0 {
            return Err(FarmError::InvalidRose("at least one scenario required".into()));
        }
        if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(FarmError::InvalidRose("probabilities must be nonnegative".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(FarmError::InvalidRose(format!("probabilities sum to {total}")));
        }
        Ok(Self {
            angles: bin_midpoints(w),
            probabilities,
        })
    }

    pub fn uniform(w: usize) -> Result<Self> {
        Self::new(vec![1.0 / w as f64; w])
    }

    /// A rose with a single scenario at an arbitrary angle; used for
    /// single-direction studies.
    pub fn single(angle: f64) -> Self {
        Self {
            angles: vec![angle],
            probabilities: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn scenarios(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.angles.iter().copied().zip(self.probabilities.iter().copied())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,angle_deg,probability\n");
        for (k, (a, p)) in self.scenarios().enumerate() {
            out.push_str(&format!("{k},{},{p:?}\n", a.to_degrees()));
        }
        out
    }
}

pub fn bin_midpoints(w: usize) -> Vec<f64> {
    let width = 2.0 * PI / w as f64;
    (0..w).map(|k| (k as f64 + 0.5) * width).collect()
}

/// Feasible rectangle `[0, x_max] × [0, y_max]` and minimum turbine spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarmRegion {
    pub x_max: f64,
    pub y_max: f64,
    pub min_separation: f64,
}

impl FarmRegion {
    pub fn new(x_max: f64, y_max: f64, params: &PhysicalParams) -> Result<Self> {
        if !(x_max > 0.0 && y_max > 0.0) {
            return Err(FarmError::InvalidParams("region extents must be positive".into()));
        }
        Ok(Self {
            x_max,
            y_max,
            min_separation: params.min_separation(),
        })
    }

    pub fn square(side: f64, params: &PhysicalParams) -> Result<Self> {
        Self::new(side, side, params)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.x_max).contains(&x) && (0.0..=self.y_max).contains(&y)
    }

    /// Lower and upper box bounds for a stacked `[x; y]` vector of `n` turbines.
    pub fn bounds(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let lower = vec![0.0; 2 * n];
        let mut upper = vec![self.x_max; n];
        upper.extend(std::iter::repeat_n(self.y_max, n));
        (lower, upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// One violated placement constraint; magnitudes are in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    Perimeter { turbine: usize, side: Side, magnitude: f64 },
    Separation { first: usize, second: usize, magnitude: f64 },
}

impl Violation {
    pub fn magnitude(&self) -> f64 {
        match *self {
            Self::Perimeter { magnitude, .. } | Self::Separation { magnitude, .. } => magnitude,
        }
    }
}

/// Lists every perimeter and spacing violation; empty iff feasible.
pub fn feasibility_check(layout: &Layout, region: &FarmRegion) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, (x, y)) in layout.points().enumerate() {
        let checks = [
            (Side::Left, -x),
            (Side::Right, x - region.x_max),
            (Side::Bottom, -y),
            (Side::Top, y - region.y_max),
        ];
        for (side, excess) in checks {
            if excess > 0.0 {
                out.push(Violation::Perimeter {
                    turbine: i,
                    side,
                    magnitude: excess,
                });
            }
        }
    }
    let n = layout.len();
    for i in 0..n {
        let (xi, yi) = layout.point(i);
        for j in i + 1..n {
            let (xj, yj) = layout.point(j);
            let dist = (xi - xj).hypot(yi - yj);
            if dist < region.min_separation {
                out.push(Violation::Separation {
                    first: i,
                    second: j,
                    magnitude: region.min_separation - dist,
                });
            }
        }
    }
    out
}

/// Largest spacing deficit over all pairs, m (zero when all are spaced).
pub fn max_separation_deficit(layout: &Layout, min_separation: f64) -> f64 {
    let n = layout.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let (xi, yi) = layout.point(i);
        for j in i + 1..n {
            let (xj, yj) = layout.point(j);
            worst = worst.max(min_separation - (xi - xj).hypot(yi - yj));
        }
    }
    worst
}
