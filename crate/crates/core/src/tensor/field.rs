use serde::{Deserialize, Serialize};

use crate::error::{config_err, CesarError, Result};

/// Dense `height x width x channels` field stored row-major as `[row][col][channel]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field3 {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<f64>,
}

impl Field3 {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self {
            height,
            width,
            channels,
            values: vec![value; height * width * channels],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return config_err(format!(
                "field dimensions must be positive, got {height}x{width}x{channels}"
            ));
        }
        if values.len() != height * width * channels {
            return config_err(format!(
                "field {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                values.len()
            ));
        }
        Ok(Self {
            height,
            width,
            channels,
            values,
        })
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`
    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, channel: usize) -> usize {
        (row * self.width + col) * self.channels + channel
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.values[self.index(row, col, channel)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f64) {
        let idx = self.index(row, col, channel);
        self.values[idx] = value;
    }

    /// Channel vector at one pixel.
    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let start = self.index(row, col, 0);
        &self.values[start..start + self.channels]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(CesarError::Numeric(format!(
                "{what} contains a non-finite value at flat index {i}"
            ))),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            channels: self.channels,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Circular shift by `(drow, dcol)` grid cells; `out[i][j] = self[i - drow][j - dcol]`.
    pub fn roll(&self, drow: isize, dcol: isize) -> Self {
        let (h, w, c) = self.shape();
        let mut out = Self::zeros(h, w, c);
        for i in 0..h {
            let si = (i as isize - drow).rem_euclid(h as isize) as usize;
            for j in 0..w {
                let sj = (j as isize - dcol).rem_euclid(w as isize) as usize;
                let dst = out.index(i, j, 0);
                let src = self.index(si, sj, 0);
                out.values[dst..dst + c].copy_from_slice(&self.values[src..src + c]);
            }
        }
        out
    }

    pub fn mean_squared_difference(&self, other: &Field3) -> Result<f64> {
        if self.shape() != other.shape() {
            return config_err(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape(),
                other.shape()
            ));
        }
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum / self.values.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Field3::from_vec(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Field3::from_vec(0, 2, 1, vec![]).is_err());
        let f = Field3::from_vec(2, 3, 2, (0..12).map(f64::from).collect()).unwrap();
        assert_eq!(f.get(1, 2, 1), 11.0);
        assert_eq!(f.get(0, 1, 0), 2.0);
        assert_eq!(f.pixel(1, 0), &[6.0, 7.0]);
    }

    #[test]
    fn roll_wraps_around() {
        let f = Field3::from_vec(2, 3, 1, vec![0., 1., 2., 3., 4., 5.]).unwrap();
        let r = f.roll(1, 1);
        assert_eq!(r.as_slice(), &[5., 3., 4., 2., 0., 1.]);
        assert_eq!(r.roll(-1, -1), f);
    }

    #[test]
    fn non_finite_is_reported() {
        let mut f = Field3::zeros(2, 2, 1);
        assert!(f.ensure_finite("x").is_ok());
        f.set(1, 1, 0, f64::NAN);
        assert!(matches!(f.ensure_finite("x"), Err(CesarError::Numeric(_))));
    }
}
