//! Uniform periodic grids, fields, spectral derivatives and weighted norms.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{BufRead, Read, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Boundary-decay ratio above which weighted norms are tagged.
pub const DECAY_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub half_width: f64,
    pub points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            half_width: 40.0,
            points: 2048,
        }
    }
}

impl Grid {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        let g = Grid { half_width, points };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half_width must be positive, got {}",
                self.half_width
            )));
        }
        if self.points < 16 || !self.points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points must be a power of two >= 16, got {}",
                self.points
            )));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + self.dx() * i as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.node(i)).collect()
    }

    /// Signed wavenumber index of FFT bin `k`, in `[-N/2, N/2)`.
    pub fn wavenumber(&self, k: usize) -> i64 {
        let n = self.points as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    pub fn frequency(&self, k: usize) -> f64 {
        PI / self.half_width * self.wavenumber(k) as f64
    }

    /// Dual frequencies in FFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.frequency(k)).collect()
    }

    pub fn nyquist_bin(&self) -> usize {
        self.points / 2
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

type PlanKey = (usize, bool);

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let map = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().expect("fft plan cache poisoned");
    guard
        .entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// Unitary forward DFT in place.
pub fn fft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    plan(n, false).process(buf);
    let s = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|z| *z *= s);
}

/// Unitary inverse DFT in place.
pub fn ifft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    plan(n, true).process(buf);
    let s = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|z| *z *= s);
}

fn bracket(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}

/// Grid samples of a complex function.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

/// Unitary DFT coefficients in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub grid: Grid,
    pub coeffs: Vec<Complex64>,
}

/// A norm value together with the boundary-decay diagnostic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaggedNorm {
    pub value: f64,
    pub decay_ratio: f64,
    pub warning: Option<String>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.points {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.points
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![ZERO; grid.points],
        }
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(grid: Grid, f: F) -> Self {
        Field {
            values: grid.nodes().into_iter().map(f).collect(),
            grid,
        }
    }

    pub fn from_real_fn<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Max over the outer 5% of nodes on each side divided by the overall max.
    pub fn boundary_decay(&self) -> f64 {
        let n = self.values.len();
        let edge = ((n as f64) * 0.05).ceil() as usize;
        let peak = self.max_abs();
        if peak == 0.0 {
            return 0.0;
        }
        let outer = self.values[..edge]
            .iter()
            .chain(&self.values[n - edge..])
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        outer / peak
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.dx() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum::<Complex64>()
            * self.grid.dx())
    }

    pub fn scale(&self, s: Complex64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    pub fn map<F: Fn(f64, Complex64) -> Complex64>(&self, f: F) -> Field {
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(i, z)| f(self.grid.node(i), *z))
                .collect(),
        }
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_binary_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    /// `[L: f64][N: u64]` then interleaved `re, im` pairs, all little-endian.
    pub fn write_binary_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&self.grid.half_width.to_le_bytes())?;
        w.write_all(&(self.grid.points as u64).to_le_bytes())?;
        for z in &self.values {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Field> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_binary(&bytes)
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Field> {
        if bytes.len() < 16 {
            return Err(Error::InvalidGrid(
                "binary field shorter than its header".into(),
            ));
        }
        let l = f64::from_le_bytes(bytes[0..8].try_into().unwrap());
        let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let grid = Grid::new(l, n)?;
        if bytes.len() != 16 + 16 * n {
            return Err(Error::InvalidGrid(format!(
                "payload has {} bytes, expected {}",
                bytes.len() - 16,
                16 * n
            )));
        }
        let values = (0..n)
            .map(|i| {
                let o = 16 + 16 * i;
                Complex64::new(
                    f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap()),
                    f64::from_le_bytes(bytes[o + 8..o + 16].try_into().unwrap()),
                )
            })
            .collect();
        Ok(Field { grid, values })
    }

    /// CSV with header `x,re,im`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "x,re,im")?;
        for (i, z) in self.values.iter().enumerate() {
            writeln!(w, "{},{},{}", self.grid.node(i), z.re, z.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, half_width: f64) -> Result<Field> {
        let mut values = Vec::new();
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            if k == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::InvalidGrid(format!(
                    "csv line {}: expected 3 columns",
                    k + 1
                )));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidGrid(format!("csv line {}: {e}", k + 1)))
            };
            values.push(Complex64::new(parse(cols[1])?, parse(cols[2])?));
        }
        let grid = Grid::new(half_width, values.len())?;
        Field::new(grid, values)
    }
}

impl SpectralField {
    pub fn l2_norm(&self) -> f64 {
        (self.grid.dx() * self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn apply_multiplier<F: Fn(f64) -> Complex64>(&mut self, m: F) {
        for (k, c) in self.coeffs.iter_mut().enumerate() {
            *c *= m(self.grid.frequency(k));
        }
    }
}

pub fn fourier(f: &Field) -> SpectralField {
    let mut coeffs = f.values.clone();
    fft_in_place(&mut coeffs);
    SpectralField {
        grid: f.grid,
        coeffs,
    }
}

pub fn inverse_fourier(s: &SpectralField) -> Field {
    let mut values = s.coeffs.clone();
    ifft_in_place(&mut values);
    Field {
        grid: s.grid,
        values,
    }
}

/// Applies a Fourier multiplier `m(xi)`.
pub fn multiplier<F: Fn(f64) -> Complex64>(f: &Field, m: F) -> Field {
    let mut s = fourier(f);
    s.apply_multiplier(m);
    inverse_fourier(&s)
}

/// `d^order/dx^order` spectrally; the Nyquist mode is dropped for odd orders.
pub fn derivative(f: &Field, order: u32) -> Field {
    if order == 0 {
        return f.clone();
    }
    let mut s = fourier(f);
    spectral_derivative_in_place(&mut s.coeffs, &f.grid, order);
    inverse_fourier(&s)
}

pub(crate) fn spectral_derivative_in_place(coeffs: &mut [Complex64], grid: &Grid, order: u32) {
    let ny = grid.nyquist_bin();
    for (k, c) in coeffs.iter_mut().enumerate() {
        if order % 2 == 1 && k == ny {
            *c = ZERO;
            continue;
        }
        *c *= Complex64::new(0.0, grid.frequency(k)).powu(order);
    }
}

/// `<x>^s f`.
pub fn weight_multiply(f: &Field, s: f64) -> Field {
    if s == 0.0 {
        return f.clone();
    }
    f.map(|x, z| z * bracket(x).powf(s))
}

/// `<D>^m f`.
pub fn bessel_potential(f: &Field, m: f64) -> Field {
    if m == 0.0 {
        return f.clone();
    }
    multiplier(f, |xi| Complex64::new(bracket(xi).powf(m), 0.0))
}

/// Zeroes every mode with `|k| > N/3`.
pub fn dealias(f: &Field) -> Field {
    let mut s = fourier(f);
    dealias_spectral(&mut s.coeffs);
    inverse_fourier(&s)
}

pub(crate) fn dealias_spectral(coeffs: &mut [Complex64]) {
    let n = coeffs.len();
    let cut = n / 3;
    for (k, c) in coeffs.iter_mut().enumerate() {
        let kk = if k < n / 2 { k } else { n - k };
        if kk > cut {
            *c = ZERO;
        }
    }
}

fn tag(f: &Field, value: f64, weighted: bool) -> TaggedNorm {
    let decay_ratio = f.boundary_decay();
    let warning = if weighted && decay_ratio >= DECAY_THRESHOLD {
        Some(format!(
            "boundary decay {decay_ratio:.3e} >= {DECAY_THRESHOLD:e}: weighted norm of non-decaying periodic data"
        ))
    } else {
        None
    };
    TaggedNorm {
        value,
        decay_ratio,
        warning,
    }
}

/// `|| <x>^M <D>^m f ||_{L^2}` with grid measure `2L/N`.
pub fn weighted_sobolev_norm(f: &Field, m: f64, weight: f64) -> TaggedNorm {
    let v = weight_multiply(&bessel_potential(f, m), weight).l2_norm();
    tag(f, v, weight > 0.0)
}

/// `max_i <x_i>^M |d^beta f(x_i)|`.
pub fn schwartz_seminorm(f: &Field, weight: u32, beta: u32) -> TaggedNorm {
    let d = derivative(f, beta);
    let v = d
        .values
        .iter()
        .enumerate()
        .map(|(i, z)| bracket(f.grid.node(i)).powi(weight as i32) * z.norm())
        .fold(0.0, f64::max);
    tag(f, v, weight > 0)
}
