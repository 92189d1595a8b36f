//! Time-indexed stacks of multi-variable 2D fields and their min-max scaling.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, CesarError, Result};
use crate::tensor::Field3;

/// Per-variable extrema used to map values into `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalization {
    /// Extrema of each variable over `frames`.
    pub fn fit(frames: &[Field3], var_names: &[String]) -> Result<Self> {
        let Some(first) = frames.first() else {
            return config_err("cannot fit a normalization on zero frames");
        };
        let p = first.channels();
        let mut min = vec![f64::INFINITY; p];
        let mut max = vec![f64::NEG_INFINITY; p];
        for f in frames {
            for px in f.as_slice().chunks_exact(p) {
                for (k, &v) in px.iter().enumerate() {
                    min[k] = min[k].min(v);
                    max[k] = max[k].max(v);
                }
            }
        }
        for k in 0..p {
            if !(max[k] > min[k]) {
                return Err(CesarError::DegenerateRange {
                    name: var_names.get(k).cloned().unwrap_or_else(|| format!("#{k}")),
                    value: min[k],
                });
            }
        }
        Ok(Self { min, max })
    }

    pub fn apply(&self, frame: &Field3) -> Field3 {
        self.transform(frame, |v, lo, hi| (v - lo) / (hi - lo))
    }

    pub fn invert(&self, frame: &Field3) -> Field3 {
        self.transform(frame, |v, lo, hi| v * (hi - lo) + lo)
    }

    fn transform(&self, frame: &Field3, f: impl Fn(f64, f64, f64) -> f64) -> Field3 {
        let p = frame.channels();
        let mut out = frame.clone();
        for px in out.as_mut_slice().chunks_exact_mut(p) {
            for (k, v) in px.iter_mut().enumerate() {
                *v = f(*v, self.min[k], self.max[k]);
            }
        }
        out
    }
}

/// `T` frames of shape `m x n x p` sampled every `dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSeries {
    pub frames: Vec<Field3>,
    pub dt: f64,
    pub var_names: Vec<String>,
    /// Measurement height in meters, for wind-speed data.
    pub height_m: Option<f64>,
    /// Present when the values are min-max scaled.
    pub norm: Option<Normalization>,
}

impl GridSeries {
    pub fn new(frames: Vec<Field3>, dt: f64, var_names: Vec<String>) -> Result<Self> {
        let s = Self {
            frames,
            dt,
            var_names,
            height_m: None,
            norm: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.frames.first() else {
            return config_err("a grid series needs at least one frame");
        };
        let shape = first.shape();
        if let Some((t, f)) = self.frames.iter().enumerate().find(|(_, f)| f.shape() != shape) {
            return config_err(format!(
                "frame {t} has shape {:?}, expected {shape:?}",
                f.shape()
            ));
        }
        if self.var_names.len() != shape.2 {
            return config_err(format!(
                "{} variable names for {} channels",
                self.var_names.len(),
                shape.2
            ));
        }
        if let Some(n) = &self.norm {
            if n.min.len() != shape.2 || n.max.len() != shape.2 {
                return config_err("normalization record does not match the channel count");
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(m, n, p)` of every frame.
    pub fn frame_shape(&self) -> (usize, usize, usize) {
        self.frames[0].shape()
    }

    /// `[T, m, n, p]`
    pub fn dims(&self) -> [usize; 4] {
        let (m, n, p) = self.frame_shape();
        [self.len(), m, n, p]
    }

    /// Frames `range` with the same metadata.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return config_err(format!(
                "frame range {range:?} is empty or exceeds the {} available frames",
                self.len()
            ));
        }
        Ok(Self {
            frames: self.frames[range].to_vec(),
            ..self.metadata_clone()
        })
    }

    /// Same metadata, different frames.
    pub fn with_frames(&self, frames: Vec<Field3>) -> Result<Self> {
        let s = Self {
            frames,
            ..self.metadata_clone()
        };
        s.validate()?;
        Ok(s)
    }

    fn metadata_clone(&self) -> Self {
        Self {
            frames: Vec::new(),
            dt: self.dt,
            var_names: self.var_names.clone(),
            height_m: self.height_m,
            norm: self.norm.clone(),
        }
    }

    /// Min-max scales every frame with extrema from the first `train_frames` frames.
    /// Later frames may fall outside `[0, 1]`; they are not clipped.
    pub fn normalize(&self, train_frames: usize) -> Result<Self> {
        if self.norm.is_some() {
            return config_err("series is already normalized");
        }
        if train_frames == 0 || train_frames > self.len() {
            return config_err(format!(
                "training window of {train_frames} frames is invalid for a series of {}",
                self.len()
            ));
        }
        let record = Normalization::fit(&self.frames[..train_frames], &self.var_names)?;
        self.normalize_with(&record)
    }

    pub fn normalize_with(&self, record: &Normalization) -> Result<Self> {
        if self.norm.is_some() {
            return config_err("series is already normalized");
        }
        let p = self.frame_shape().2;
        if record.min.len() != p {
            return config_err("normalization record does not match the channel count");
        }
        Ok(Self {
            frames: self.frames.iter().map(|f| record.apply(f)).collect(),
            norm: Some(record.clone()),
            ..self.metadata_clone()
        })
    }

    pub fn denormalize(&self) -> Result<Self> {
        let Some(record) = &self.norm else {
            return config_err("series is not normalized");
        };
        Ok(Self {
            frames: self.frames.iter().map(|f| record.invert(f)).collect(),
            norm: None,
            ..self.metadata_clone()
        })
    }

    /// Spatial mean of each variable per frame: `T x p`.
    pub fn spatial_means(&self) -> Vec<Vec<f64>> {
        self.frames
            .iter()
            .map(|f| {
                let p = f.channels();
                let mut acc = vec![0.0; p];
                for px in f.as_slice().chunks_exact(p) {
                    for (a, v) in acc.iter_mut().zip(px) {
                        *a += v;
                    }
                }
                let npx = (f.height() * f.width()) as f64;
                acc.into_iter().map(|a| a / npx).collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> GridSeries {
        let frames = values
            .iter()
            .map(|&v| Field3::from_vec(1, 2, 1, vec![v, -v]).unwrap())
            .collect();
        GridSeries::new(frames, 1.0, vec!["x".into()]).unwrap()
    }

    #[test]
    fn min_max_maps_midpoint() {
        let frames = vec![
            Field3::from_vec(1, 1, 1, vec![0.0]).unwrap(),
            Field3::from_vec(1, 1, 1, vec![10.0]).unwrap(),
            Field3::from_vec(1, 1, 1, vec![5.0]).unwrap(),
        ];
        let s = GridSeries::new(frames, 1.0, vec!["x".into()]).unwrap();
        let n = s.normalize(2).unwrap();
        assert_eq!(n.frames[2].as_slice(), &[0.5]);
    }

    #[test]
    fn test_window_values_are_not_clipped() {
        let s = series(&[1.0, 2.0, 5.0]);
        let n = s.normalize(2).unwrap();
        // Training range is [-2, 2]; the third frame holds ±5.
        assert!(n.frames[2].get(0, 0, 0) > 1.0);
        assert!(n.frames[2].get(0, 1, 0) < 0.0);
        assert!((n.frames[2].get(0, 0, 0) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn constant_variable_is_degenerate() {
        let s = GridSeries::new(
            vec![Field3::filled(2, 2, 1, 3.0), Field3::filled(2, 2, 1, 3.0)],
            1.0,
            vec!["u".into()],
        )
        .unwrap();
        assert!(matches!(
            s.normalize(2),
            Err(CesarError::DegenerateRange { .. })
        ));
    }

    #[test]
    fn round_trip_is_identity() {
        let s = series(&[0.3, -7.25, 12.5, 1e-3]);
        let back = s.normalize(3).unwrap().denormalize().unwrap();
        for (a, b) in s.frames.iter().zip(&back.frames) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn mismatched_frames_are_rejected() {
        let r = GridSeries::new(
            vec![Field3::zeros(2, 2, 1), Field3::zeros(2, 3, 1)],
            1.0,
            vec!["u".into()],
        );
        assert!(r.is_err());
    }
}
