//! Wind speed to turbine power: power-law height extrapolation and a
//! piecewise-linear power curve.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, CesarError, Result};
use crate::series::GridSeries;

/// Neutral-stability shear exponent.
pub const DEFAULT_SHEAR_EXPONENT: f64 = 1.0 / 7.0;

/// `(target / source)^kappa`.
pub fn height_multiplier(source_m: f64, target_m: f64, kappa: f64) -> Result<f64> {
    if !(source_m > 0.0 && target_m > 0.0) {
        return config_err(format!("heights must be positive, got {source_m} and {target_m}"));
    }
    Ok((target_m / source_m).powf(kappa))
}

/// Scales wind speeds measured at `source_m` (or at the series' own height when
/// set) to `target_m` with the power law.
pub fn extrapolate(speeds: &GridSeries, source_m: f64, target_m: f64, kappa: f64) -> Result<GridSeries> {
    let source = speeds.height_m.unwrap_or(source_m);
    let factor = height_multiplier(source, target_m, kappa)?;
    if let Some(v) = speeds.frames.iter().flat_map(|f| f.as_slice()).find(|v| !(**v >= 0.0)) {
        return Err(CesarError::Input(format!("wind speeds must be nonnegative, found {v}")));
    }
    let frames = speeds.frames.iter().map(|f| f.map(|v| v * factor)).collect();
    let mut out = speeds.with_frames(frames)?;
    out.height_m = Some(target_m);
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct CurveRow {
    speed_ms: f64,
    power_kw: f64,
}

/// Turbine power as a function of hub-height wind speed.
///
/// Power is interpolated linearly between breakpoints, zero below the first
/// breakpoint, and zero above the last one (shutdown at cut-out).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub name: String,
    pub hub_height_m: f64,
    pub rated_kw: f64,
    pub speeds: Vec<f64>,
    pub powers: Vec<f64>,
}

impl PowerCurve {
    pub fn new(name: &str, hub_height_m: f64, speeds: Vec<f64>, powers: Vec<f64>) -> Result<Self> {
        if speeds.len() != powers.len() || speeds.len() < 2 {
            return config_err("a power curve needs at least two (speed, power) pairs");
        }
        if speeds.windows(2).any(|w| !(w[1] > w[0])) {
            return config_err("power curve speeds must be strictly increasing");
        }
        if speeds[0] < 0.0 || powers.iter().any(|p| !(*p >= 0.0)) {
            return config_err("power curve speeds and powers must be nonnegative");
        }
        let rated_kw = powers.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            name: name.into(),
            hub_height_m,
            rated_kw,
            speeds,
            powers,
        })
    }

    /// Reads `speed_ms,power_kw` rows.
    pub fn from_csv_reader<R: Read>(name: &str, hub_height_m: f64, reader: R) -> Result<Self> {
        let mut speeds = Vec::new();
        let mut powers = Vec::new();
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["speed_ms", "power_kw"] {
            return config_err(format!("power curve header must be speed_ms,power_kw, got {:?}", headers));
        }
        for row in rdr.deserialize() {
            let row: CurveRow = row?;
            speeds.push(row.speed_ms);
            powers.push(row.power_kw);
        }
        Self::new(name, hub_height_m, speeds, powers)
    }

    pub fn from_csv(path: &Path, hub_height_m: f64) -> Result<Self> {
        let name = path.file_stem().map_or_else(|| "curve".into(), |s| s.to_string_lossy().into_owned());
        Self::from_csv_reader(&name, hub_height_m, std::fs::File::open(path)?)
    }

    /// The bundled Nordex N100/2500 curve (80 m hub).
    pub fn n100_2500() -> Self {
        Self::from_csv_reader("N100-2500", 80.0, N100_2500_CSV.as_bytes()).expect("bundled curve is valid")
    }

    /// Speed at which power starts to rise above zero.
    pub fn cut_in(&self) -> f64 {
        self.speeds[self.powers.iter().position(|&p| p > 0.0).unwrap_or(0).saturating_sub(1)]
    }

    /// First speed reaching rated power.
    pub fn rated_speed(&self) -> f64 {
        self.speeds[self.powers.iter().position(|&p| p >= self.rated_kw).unwrap_or(0)]
    }

    pub fn cut_out(&self) -> f64 {
        *self.speeds.last().expect("curve has breakpoints")
    }

    pub fn power(&self, speed: f64) -> f64 {
        let s = &self.speeds;
        if !(speed >= s[0]) || speed > self.cut_out() {
            return 0.0;
        }
        let hi = s.partition_point(|&x| x <= speed);
        if hi == s.len() {
            return self.powers[s.len() - 1];
        }
        let lo = hi - 1;
        let w = (speed - s[lo]) / (s[hi] - s[lo]);
        self.powers[lo] + w * (self.powers[hi] - self.powers[lo])
    }
}

pub const N100_2500_CSV: &str = include_str!("../data/n100_2500.csv");

/// Per-cell turbine power (kW) for wind speeds at `source_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerMap {
    pub power: GridSeries,
    pub mean_kw: f64,
    pub std_kw: f64,
}

/// Extrapolates `speeds` to the curve's hub height, then applies the curve.
pub fn power_map(speeds: &GridSeries, curve: &PowerCurve, kappa: f64, source_m: f64) -> Result<PowerMap> {
    let hub = extrapolate(speeds, source_m, curve.hub_height_m, kappa)?;
    let frames: Vec<_> = hub.frames.iter().map(|f| f.map(|v| curve.power(v))).collect();
    let mut power = hub.with_frames(frames)?;
    power.var_names = power.var_names.iter().map(|v| format!("{v}_power_kw")).collect();
    let values: Vec<f64> = power.frames.iter().flat_map(|f| f.as_slice().iter().copied()).collect();
    let n = values.len() as f64;
    let mean_kw = values.iter().sum::<f64>() / n;
    let std_kw = (values.iter().map(|v| (v - mean_kw).powi(2)).sum::<f64>() / n).sqrt();
    Ok(PowerMap { power, mean_kw, std_kw })
}
