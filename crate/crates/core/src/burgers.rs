//! Viscous Burgers' equation `u_t + (u·∇)u = νΔu` on the periodic unit square,
//! started from a random order-4 Fourier series.
//!
//! Derivatives are spectral with 2/3-rule dealiasing of the advection term. Time
//! stepping is fourth-order Runge-Kutta on the integrating-factor form, so the
//! viscous term is integrated exactly and large viscosities stay stable.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, CesarError, Result};
use crate::rng::seeded;
use crate::series::GridSeries;
use crate::tensor::Field3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurgersConfig {
    pub viscosity: f64,
    /// Points per side of the square grid.
    pub grid: usize,
    /// Time between stored frames.
    pub output_dt: f64,
    /// Stored frames, the initial condition included.
    pub steps: usize,
    pub fourier_order: usize,
    /// Internal Runge-Kutta steps per stored frame.
    pub substeps: usize,
}

impl Default for BurgersConfig {
    fn default() -> Self {
        Self {
            viscosity: 0.005,
            grid: 64,
            output_dt: 0.01,
            steps: 101,
            fourier_order: 4,
            substeps: 10,
        }
    }
}

impl BurgersConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.viscosity > 0.0 && self.viscosity.is_finite()) {
            return config_err(format!("viscosity must be positive, got {}", self.viscosity));
        }
        if self.grid < 4 || self.grid % 2 != 0 {
            return config_err(format!("grid must be an even size of at least 4, got {}", self.grid));
        }
        if !(self.output_dt > 0.0) || self.steps == 0 || self.substeps == 0 {
            return config_err("output step, frame count, and substeps must be positive");
        }
        Ok(())
    }
}

/// `ψ(x, y) = Σ_{a,b} α_ab sin(2π(ax + by)) + β_ab cos(2π(ax + by))`, one set of
/// coefficients per velocity component.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSeries {
    pub order: i64,
    pub alpha: Vec<[f64; 2]>,
    pub beta: Vec<[f64; 2]>,
}

impl FourierSeries {
    /// Coefficients drawn i.i.d. standard normal, component `u` first.
    pub fn sample<R: Rng>(order: usize, rng: &mut R) -> Self {
        let side = 2 * order + 1;
        let mut alpha = vec![[0.0; 2]; side * side];
        let mut beta = vec![[0.0; 2]; side * side];
        for c in 0..2 {
            for i in 0..side * side {
                alpha[i][c] = rng.sample(StandardNormal);
                beta[i][c] = rng.sample(StandardNormal);
            }
        }
        Self {
            order: order as i64,
            alpha,
            beta,
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        let mut out = [0.0; 2];
        let mut i = 0;
        for a in -self.order..=self.order {
            for b in -self.order..=self.order {
                let phase = 2.0 * PI * (a as f64 * x + b as f64 * y);
                let (s, c) = phase.sin_cos();
                for k in 0..2 {
                    out[k] += self.alpha[i][k] * s + self.beta[i][k] * c;
                }
                i += 1;
            }
        }
        out
    }
}

/// The pieces of Eq. 8 for one seed: the series, the per-component normalized
/// field `2ψ/max|ψ|` on the grid, and the uniform shift `η`.
#[derive(Clone, Debug)]
pub struct InitialCondition {
    pub series: FourierSeries,
    pub scaled: Field3,
    pub shift: [f64; 2],
}

impl InitialCondition {
    /// Rows index `y = i/m`, columns `x = j/m`.
    pub fn sample(config: &BurgersConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded(seed);
        let series = FourierSeries::sample(config.fourier_order, &mut rng);
        let shift = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let m = config.grid;
        let mut psi = Field3::zeros(m, m, 2);
        for i in 0..m {
            for j in 0..m {
                let v = series.eval(j as f64 / m as f64, i as f64 / m as f64);
                psi.set(i, j, 0, v[0]);
                psi.set(i, j, 1, v[1]);
            }
        }
        let mut peak = [0.0f64; 2];
        for px in psi.as_slice().chunks_exact(2) {
            peak[0] = peak[0].max(px[0].abs());
            peak[1] = peak[1].max(px[1].abs());
        }
        let mut scaled = psi;
        for px in scaled.as_mut_slice().chunks_exact_mut(2) {
            for k in 0..2 {
                px[k] = if peak[k] > 0.0 { 2.0 * px[k] / peak[k] } else { 0.0 };
            }
        }
        Ok(Self { series, scaled, shift })
    }

    pub fn field(&self) -> Field3 {
        let mut f = self.scaled.clone();
        for px in f.as_mut_slice().chunks_exact_mut(2) {
            px[0] += self.shift[0];
            px[1] += self.shift[1];
        }
        f
    }
}

/// `u(x, y, 0)` for `seed`.
pub fn fourier_ic(config: &BurgersConfig, seed: u64) -> Result<Field3> {
    Ok(InitialCondition::sample(config, seed)?.field())
}

/// Row-column 2D FFT on an `n × n` grid.
struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    column: Vec<Complex64>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            column: vec![Complex64::default(); n],
        }
    }

    fn transform(&mut self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let fft = if inverse { &self.inverse } else { &self.forward };
        fft.process(data);
        for j in 0..n {
            for i in 0..n {
                self.column[i] = data[i * n + j];
            }
            fft.process(&mut self.column);
            for i in 0..n {
                data[i * n + j] = self.column[i];
            }
        }
        if inverse {
            let scale = 1.0 / (n * n) as f64;
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }
}

/// Signed integer wavenumber of FFT bin `i`.
fn wavenumber(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Sum over both components of `|û_k|²/N⁴` for modes with `max(|kx|, |ky|) > n/4`.
pub fn high_wavenumber_energy(field: &Field3) -> f64 {
    spectral_energy(field, |kx, ky, n| kx.abs().max(ky.abs()) > n as i64 / 4)
}

/// Sum of `|û_k|²/N⁴` over modes selected by `keep(kx, ky, n)`.
pub fn spectral_energy(field: &Field3, keep: impl Fn(i64, i64, usize) -> bool) -> f64 {
    let n = field.height();
    assert_eq!(field.width(), n, "spectral energy needs a square grid");
    let mut fft = Fft2::new(n);
    let norm = 1.0 / (n * n) as f64;
    let mut total = 0.0;
    for c in 0..field.channels() {
        let mut data: Vec<Complex64> = (0..n * n)
            .map(|p| Complex64::new(field.as_slice()[p * field.channels() + c], 0.0))
            .collect();
        fft.transform(&mut data, false);
        for i in 0..n {
            for j in 0..n {
                if keep(wavenumber(j, n), wavenumber(i, n), n) {
                    total += (data[i * n + j] * norm).norm_sqr();
                }
            }
        }
    }
    total
}

struct Solver {
    n: usize,
    fft: Fft2,
    /// `2πk_x` and `2πk_y` per bin, zero on dealiased modes.
    ikx: Vec<f64>,
    iky: Vec<f64>,
    /// 2/3-rule mask.
    keep: Vec<bool>,
    /// `exp(-ν|k|² dt/2)`.
    half_decay: Vec<f64>,
    work: [Vec<Complex64>; 6],
}

impl Solver {
    fn new(n: usize, viscosity: f64, dt: f64) -> Self {
        let cutoff = n as i64 / 3;
        let mut ikx = vec![0.0; n * n];
        let mut iky = vec![0.0; n * n];
        let mut keep = vec![false; n * n];
        let mut half_decay = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let (kx, ky) = (wavenumber(j, n), wavenumber(i, n));
                let p = i * n + j;
                // The Nyquist bin has no partner, so its odd derivative is zero.
                ikx[p] = if 2 * j == n { 0.0 } else { 2.0 * PI * kx as f64 };
                iky[p] = if 2 * i == n { 0.0 } else { 2.0 * PI * ky as f64 };
                keep[p] = kx.abs() <= cutoff && ky.abs() <= cutoff;
                let k2 = 4.0 * PI * PI * (kx * kx + ky * ky) as f64;
                half_decay[p] = (-viscosity * k2 * dt / 2.0).exp();
            }
        }
        let z = vec![Complex64::default(); n * n];
        Self {
            n,
            fft: Fft2::new(n),
            ikx,
            iky,
            keep,
            half_decay,
            work: [z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z],
        }
    }

    /// `-(u·∇)u` in spectral space, dealiased, for spectral `(û, v̂)`.
    fn advection(&mut self, uh: &[Complex64], vh: &[Complex64], out_u: &mut [Complex64], out_v: &mut [Complex64]) {
        let nn = self.n * self.n;
        let i = Complex64::new(0.0, 1.0);
        let [u, v, ux, uy, vx, vy] = &mut self.work;
        for p in 0..nn {
            u[p] = uh[p];
            v[p] = vh[p];
            ux[p] = i * self.ikx[p] * uh[p];
            uy[p] = i * self.iky[p] * uh[p];
            vx[p] = i * self.ikx[p] * vh[p];
            vy[p] = i * self.iky[p] * vh[p];
        }
        for buf in [&mut *u, &mut *v, &mut *ux, &mut *uy, &mut *vx, &mut *vy] {
            self.fft.transform(buf, true);
        }
        for p in 0..nn {
            let (a, b) = (u[p].re, v[p].re);
            out_u[p] = Complex64::new(-(a * ux[p].re + b * uy[p].re), 0.0);
            out_v[p] = Complex64::new(-(a * vx[p].re + b * vy[p].re), 0.0);
        }
        self.fft.transform(out_u, false);
        self.fft.transform(out_v, false);
        for p in 0..nn {
            if !self.keep[p] {
                out_u[p] = Complex64::default();
                out_v[p] = Complex64::default();
            }
        }
    }

    /// One integrating-factor RK4 step of length `dt` on `(û, v̂)`.
    fn step(&mut self, uh: &mut [Complex64], vh: &mut [Complex64], dt: f64) {
        let nn = self.n * self.n;
        let e = self.half_decay.clone();
        let zero = vec![Complex64::default(); nn];
        let (mut au, mut av) = (zero.clone(), zero.clone());
        let (mut bu, mut bv) = (zero.clone(), zero.clone());
        let (mut cu, mut cv) = (zero.clone(), zero.clone());
        let (mut du, mut dv) = (zero.clone(), zero.clone());
        let (mut tu, mut tv) = (zero.clone(), zero);

        self.advection(uh, vh, &mut au, &mut av);
        for p in 0..nn {
            tu[p] = e[p] * (uh[p] + 0.5 * dt * au[p]);
            tv[p] = e[p] * (vh[p] + 0.5 * dt * av[p]);
        }
        self.advection(&tu, &tv, &mut bu, &mut bv);
        for p in 0..nn {
            tu[p] = e[p] * uh[p] + 0.5 * dt * bu[p];
            tv[p] = e[p] * vh[p] + 0.5 * dt * bv[p];
        }
        self.advection(&tu, &tv, &mut cu, &mut cv);
        for p in 0..nn {
            tu[p] = e[p] * e[p] * uh[p] + e[p] * dt * cu[p];
            tv[p] = e[p] * e[p] * vh[p] + e[p] * dt * cv[p];
        }
        self.advection(&tu, &tv, &mut du, &mut dv);
        for p in 0..nn {
            let e2 = e[p] * e[p];
            uh[p] = e2 * uh[p] + dt / 6.0 * (e2 * au[p] + 2.0 * e[p] * (bu[p] + cu[p]) + du[p]);
            vh[p] = e2 * vh[p] + dt / 6.0 * (e2 * av[p] + 2.0 * e[p] * (bv[p] + cv[p]) + dv[p]);
        }
    }
}

/// Integrates from `initial` and returns `config.steps` frames, the first being
/// `initial` itself.
pub fn simulate_from(config: &BurgersConfig, initial: &Field3) -> Result<GridSeries> {
    config.validate()?;
    let n = config.grid;
    if initial.shape() != (n, n, 2) {
        return config_err(format!(
            "initial field has shape {:?}, expected ({n}, {n}, 2)",
            initial.shape()
        ));
    }
    initial.ensure_finite("initial field")?;
    let dt = config.output_dt / config.substeps as f64;
    let mut solver = Solver::new(n, config.viscosity, dt);
    let split = |f: &Field3, c: usize| -> Vec<Complex64> {
        f.as_slice().chunks_exact(2).map(|px| Complex64::new(px[c], 0.0)).collect()
    };
    let mut uh = split(initial, 0);
    let mut vh = split(initial, 1);
    solver.fft.transform(&mut uh, false);
    solver.fft.transform(&mut vh, false);

    let mut frames = Vec::with_capacity(config.steps);
    frames.push(initial.clone());
    let mut internal = 0;
    for _ in 1..config.steps {
        for _ in 0..config.substeps {
            solver.step(&mut uh, &mut vh, dt);
            internal += 1;
            if uh.iter().chain(&vh).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(CesarError::SolverInstability { step: internal });
            }
        }
        let (mut u, mut v) = (uh.clone(), vh.clone());
        solver.fft.transform(&mut u, true);
        solver.fft.transform(&mut v, true);
        let values = u.iter().zip(&v).flat_map(|(a, b)| [a.re, b.re]).collect();
        let frame = Field3::from_vec(n, n, 2, values)?;
        if !frame.is_finite() {
            return Err(CesarError::SolverInstability { step: internal });
        }
        frames.push(frame);
    }
    GridSeries::new(frames, config.output_dt, vec!["u".into(), "v".into()])
}

/// One dataset: the Fourier initial condition for `seed`, integrated forward.
pub fn simulate(config: &BurgersConfig, seed: u64) -> Result<GridSeries> {
    simulate_from(config, &fourier_ic(config, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BurgersConfig {
        BurgersConfig {
            grid: 16,
            steps: 6,
            ..BurgersConfig::default()
        }
    }

    #[test]
    fn scaled_ic_peaks_at_two() {
        for seed in 0..5 {
            let ic = InitialCondition::sample(&BurgersConfig::default(), seed).unwrap();
            for c in 0..2 {
                let peak = ic
                    .scaled
                    .as_slice()
                    .chunks_exact(2)
                    .map(|px| px[c].abs())
                    .fold(0.0, f64::max);
                assert!((peak - 2.0).abs() < 1e-12);
            }
            assert!(ic.shift.iter().all(|s| s.abs() < 1.0));
        }
    }

    #[test]
    fn series_is_periodic() {
        let ic = InitialCondition::sample(&small(), 3).unwrap();
        for t in [0.0, 0.2, 0.77] {
            let (a, b) = (ic.series.eval(0.0, t), ic.series.eval(1.0, t));
            let (c, d) = (ic.series.eval(t, 0.0), ic.series.eval(t, 1.0));
            for k in 0..2 {
                assert!((a[k] - b[k]).abs() < 1e-10);
                assert!((c[k] - d[k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn seeds_control_the_ic() {
        let c = small();
        assert_eq!(fourier_ic(&c, 1).unwrap(), fourier_ic(&c, 1).unwrap());
        assert_ne!(fourier_ic(&c, 1).unwrap(), fourier_ic(&c, 2).unwrap());
    }

    #[test]
    fn zero_field_is_a_fixed_point() {
        let s = simulate_from(&small(), &Field3::zeros(16, 16, 2)).unwrap();
        assert!(s.frames.iter().all(|f| f.as_slice().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn uniform_flow_is_steady() {
        let s = simulate_from(&small(), &Field3::filled(16, 16, 2, 0.7)).unwrap();
        let last = s.frames.last().unwrap();
        assert!(last.as_slice().iter().all(|v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn fft_round_trip() {
        let mut fft = Fft2::new(8);
        let orig: Vec<Complex64> = (0..64).map(|i| Complex64::new((i as f64).sin(), 0.0)).collect();
        let mut data = orig.clone();
        fft.transform(&mut data, false);
        fft.transform(&mut data, true);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_mode_decays_at_heat_rate_when_linear() {
        // A pure u = ε sin(2πx) mode: advection is O(ε²), so decay follows exp(-ν(2π)²t).
        let config = BurgersConfig {
            grid: 16,
            steps: 11,
            viscosity: 0.1,
            ..BurgersConfig::default()
        };
        let eps = 1e-6;
        let mut f = Field3::zeros(16, 16, 2);
        for i in 0..16 {
            for j in 0..16 {
                f.set(i, j, 0, eps * (2.0 * PI * j as f64 / 16.0).sin());
            }
        }
        let s = simulate_from(&config, &f).unwrap();
        let t = 0.1;
        let expect = eps * (-0.1 * 4.0 * PI * PI * t).exp();
        let got = s.frames[10].get(0, 4, 0);
        assert!((got - expect).abs() < 1e-6 * eps, "{got} vs {expect}");
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = BurgersConfig {
            viscosity: 0.0,
            ..BurgersConfig::default()
        };
        assert!(simulate(&bad, 0).is_err());
        let odd = BurgersConfig { grid: 15, ..BurgersConfig::default() };
        assert!(odd.validate().is_err());
    }
}
