//! Sampled fields on the periodic torus `[0, period)^d` and their spectral
//! transforms.
//!
//! Samples are stored row-major with axis 0 varying slowest. Axes are
//! 0-based throughout the crate. Spectral coefficients are kept in FFT
//! storage order: storage index `k` along an axis holds the integer
//! frequency `k` for `k < n/2` and `k - n` otherwise, so every axis covers
//! `{-n/2, ..., n/2 - 1}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::sum::{pairwise_sum, pairwise_sum_by};

/// Geometry of a periodic grid: dimension, samples per axis and side length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    d: usize,
    n: usize,
    period: f64,
}

impl GridSpec {
    pub fn new(d: usize, n: usize, period: f64) -> Result<Self> {
        if d == 0 {
            return Err(param("grid dimension must be at least 1"));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(param(format!("samples per axis must be a power of two >= 4, got {n}")));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(param(format!("period must be positive and finite, got {period}")));
        }
        n.checked_pow(d as u32)
            .ok_or_else(|| param("grid size overflows usize"))?;
        Ok(Self { d, n, period })
    }

    /// Torus of side `2π`, so that grid frequencies are plain integers.
    pub fn standard(d: usize, n: usize) -> Result<Self> {
        Self::new(d, n, 2.0 * PI)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Grid spacing `h = period / n`.
    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    /// Quadrature weight `h^d` of one sample.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    /// Measure of the torus, `period^d`.
    pub fn volume(&self) -> f64 {
        self.period.powi(self.d as i32)
    }

    /// Number of samples `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Angular wavenumber of a unit integer frequency, `2π / period`.
    pub fn wavenumber_unit(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.d - 1 - axis) as u32)
    }

    /// Writes the lattice coordinates of flat index `idx` into `out`.
    pub fn unravel(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.d).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
    }

    pub fn ravel(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &c| acc * self.n + c)
    }

    /// Signed frequency stored at FFT index `k`.
    pub fn frequency_of(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    /// FFT storage index of signed frequency `xi` (taken modulo `n`).
    pub fn index_of_frequency(&self, xi: i64) -> usize {
        xi.rem_euclid(self.n as i64) as usize
    }

    /// Signed minimal-image offset of lattice coordinate `k`, in cells.
    pub fn signed_offset(&self, k: usize) -> i64 {
        self.frequency_of(k)
    }

    /// Calls `f(flat_index, frequency_vector)` for every grid frequency.
    pub fn for_each_frequency(&self, mut f: impl FnMut(usize, &[i64])) {
        let mut coords = vec![0usize; self.d];
        let mut xi = vec![0i64; self.d];
        for idx in 0..self.len() {
            self.unravel(idx, &mut coords);
            for (x, &c) in xi.iter_mut().zip(&coords) {
                *x = self.frequency_of(c);
            }
            f(idx, &xi);
        }
    }

    /// Calls `f(flat_index, position)` for every sample, positions in `[0, period)^d`.
    pub fn for_each_point(&self, mut f: impl FnMut(usize, &[f64])) {
        let h = self.spacing();
        let mut coords = vec![0usize; self.d];
        let mut x = vec![0.0; self.d];
        for idx in 0..self.len() {
            self.unravel(idx, &mut coords);
            for (xa, &c) in x.iter_mut().zip(&coords) {
                *xa = c as f64 * h;
            }
            f(idx, &x);
        }
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(param(format!("grid mismatch: {self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// A complex field sampled on every point of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    samples: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(spec: GridSpec, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != spec.len() {
            return Err(param(format!(
                "expected {} samples, got {}",
                spec.len(),
                samples.len()
            )));
        }
        if let Some(pos) = samples.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Data(format!("non-finite sample at index {pos}")));
        }
        Ok(Self { spec, samples })
    }

    /// Builds a field without the finiteness scan; callers guarantee the invariant.
    pub(crate) fn from_raw(spec: GridSpec, samples: Vec<Complex64>) -> Self {
        debug_assert_eq!(samples.len(), spec.len());
        Self { spec, samples }
    }

    pub fn from_real(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        Self::new(spec, values.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
    }

    pub(crate) fn from_real_raw(spec: GridSpec, values: &[f64]) -> Self {
        Self::from_raw(spec, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self::from_raw(spec, vec![Complex64::new(0.0, 0.0); spec.len()])
    }

    pub fn constant(spec: GridSpec, c: Complex64) -> Self {
        Self::from_raw(spec, vec![c; spec.len()])
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let mut samples = vec![Complex64::new(0.0, 0.0); spec.len()];
        spec.for_each_point(|idx, x| samples[idx] = f(x));
        Self::new(spec, samples)
    }

    /// Single Fourier mode `e^{i<xi, x> 2π/period}`.
    pub fn mode(spec: GridSpec, xi: &[i64]) -> Result<Self> {
        if xi.len() != spec.d() {
            return Err(param("frequency vector has wrong length"));
        }
        let unit = spec.wavenumber_unit();
        let n = spec.n() as i64;
        let h = spec.spacing();
        let mut coords = vec![0usize; spec.d()];
        let mut samples = Vec::with_capacity(spec.len());
        for idx in 0..spec.len() {
            spec.unravel(idx, &mut coords);
            // reduce the phase exactly on the lattice before scaling
            let cycles: i64 = xi
                .iter()
                .zip(&coords)
                .map(|(&k, &c)| (k * c as i64).rem_euclid(n))
                .sum::<i64>()
                .rem_euclid(n);
            let phase = unit * h * cycles as f64;
            samples.push(Complex64::from_polar(1.0, phase));
        }
        Ok(Self::from_raw(spec, samples))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.re).collect()
    }

    pub fn abs_values(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.norm()).collect()
    }

    /// `|f|` as a real-valued field.
    pub fn abs(&self) -> GridFunction {
        self.map(|z| Complex64::new(z.norm(), 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Largest imaginary part in absolute value.
    pub fn max_imag(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, z| m.max(z.im.abs()))
    }

    pub fn mean(&self) -> Complex64 {
        let re = pairwise_sum_by(&self.samples, &|z| z.re);
        let im = pairwise_sum_by(&self.samples, &|z| z.im);
        Complex64::new(re, im) / self.len() as f64
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> GridFunction {
        Self::from_raw(self.spec, self.samples.iter().map(|&z| f(z)).collect())
    }

    pub fn zip_with(
        &self,
        other: &GridFunction,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<GridFunction> {
        self.spec.check_same(&other.spec)?;
        Ok(Self::from_raw(
            self.spec,
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        self.map(|z| z * c)
    }

    pub fn scale_complex(&self, c: Complex64) -> GridFunction {
        self.map(|z| z * c)
    }

    /// In-place `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &GridFunction) -> Result<()> {
        self.spec.check_same(&other.spec)?;
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            *a += b * c;
        }
        Ok(())
    }

    /// Permutes the axes: output axis `a` is input axis `perm[a]`.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<GridFunction> {
        let d = self.spec.d();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&a| a >= d || std::mem::replace(&mut seen[a], true)) {
            return Err(param(format!("{perm:?} is not a permutation of 0..{d}")));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        let mut dst = vec![0usize; d];
        let mut src = vec![0usize; d];
        for (idx, slot) in out.iter_mut().enumerate() {
            self.spec.unravel(idx, &mut dst);
            for a in 0..d {
                src[perm[a]] = dst[a];
            }
            *slot = self.samples[self.spec.ravel(&src)];
        }
        Ok(Self::from_raw(self.spec, out))
    }
}

/// Discrete Fourier coefficients of a [`GridFunction`], FFT storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    spec: GridSpec,
    coefficients: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(spec: GridSpec, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != spec.len() {
            return Err(param("coefficient count does not match grid"));
        }
        if coefficients.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Data("non-finite spectral coefficient".into()));
        }
        Ok(Self { spec, coefficients })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            coefficients: vec![Complex64::new(0.0, 0.0); spec.len()],
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefficients
    }

    /// Coefficient at signed frequency vector `xi` (components taken mod `n`).
    pub fn coefficient(&self, xi: &[i64]) -> Complex64 {
        self.coefficients[self.flat_index(xi)]
    }

    pub fn set_coefficient(&mut self, xi: &[i64], value: Complex64) {
        let idx = self.flat_index(xi);
        self.coefficients[idx] = value;
    }

    fn flat_index(&self, xi: &[i64]) -> usize {
        xi.iter()
            .fold(0, |acc, &k| acc * self.spec.n() + self.spec.index_of_frequency(k))
    }

    /// Multiplies every coefficient by `symbol(xi)`.
    pub fn apply_symbol(&mut self, symbol: impl Fn(&[i64]) -> Complex64) {
        let coefficients = &mut self.coefficients;
        self.spec
            .for_each_frequency(|idx, xi| coefficients[idx] *= symbol(xi));
    }
}

fn fft_nd(spec: &GridSpec, data: &mut [Complex64], inverse: bool) {
    let n = spec.n();
    let d = spec.d();
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let total = spec.len();
    for axis in 0..d {
        let stride = spec.stride(axis);
        let block = stride * n;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

/// Fourier coefficients normalized so a constant field `c` maps to `c` at `xi = 0`.
pub fn forward_transform(f: &GridFunction) -> SpectralField {
    let spec = *f.spec();
    let mut data = f.samples().to_vec();
    fft_nd(&spec, &mut data, false);
    let norm = 1.0 / spec.len() as f64;
    for z in &mut data {
        *z *= norm;
    }
    SpectralField {
        spec,
        coefficients: data,
    }
}

pub fn inverse_transform(field: &SpectralField) -> GridFunction {
    let spec = *field.spec();
    let mut data = field.coefficients().to_vec();
    fft_nd(&spec, &mut data, true);
    GridFunction::from_raw(spec, data)
}

/// Applies the Fourier multiplier `symbol(xi)` to `f`.
pub fn apply_multiplier(f: &GridFunction, symbol: impl Fn(&[i64]) -> Complex64) -> GridFunction {
    let mut spectrum = forward_transform(f);
    spectrum.apply_symbol(symbol);
    inverse_transform(&spectrum)
}

/// Angular wavenumber along `axis` used by first-order spectral derivatives:
/// `xi_axis * 2π/period`, with the Nyquist mode mapped to zero.
pub fn derivative_wavenumber(spec: &GridSpec, xi_axis: i64) -> f64 {
    if xi_axis == -(spec.n() as i64) / 2 {
        0.0
    } else {
        xi_axis as f64 * spec.wavenumber_unit()
    }
}

/// `∂_axis^order f` by Fourier multiplication with `(i k)^order`.
///
/// The Nyquist coefficient along `axis` is dropped for odd orders so that
/// derivatives of real fields stay real.
pub fn spectral_derivative(f: &GridFunction, axis: usize, order: u32) -> Result<GridFunction> {
    let spec = *f.spec();
    if axis >= spec.d() {
        return Err(param(format!("axis {axis} out of range for d = {}", spec.d())));
    }
    if order == 0 {
        return Err(param("derivative order must be at least 1"));
    }
    let nyquist = -(spec.n() as i64) / 2;
    let unit = spec.wavenumber_unit();
    Ok(apply_multiplier(f, |xi| {
        let k = xi[axis];
        if k == nyquist && order % 2 == 1 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, k as f64 * unit).powu(order)
    }))
}

/// Periodic convolution `h^d Σ_y kernel(y) f(x - y)`, computed spectrally.
pub fn circular_convolve(f: &GridFunction, kernel: &GridFunction) -> Result<GridFunction> {
    f.spec().check_same(kernel.spec())?;
    let spec = *f.spec();
    let mut a = forward_transform(f);
    let b = forward_transform(kernel);
    let volume = spec.volume();
    for (x, y) in a.coefficients.iter_mut().zip(&b.coefficients) {
        *x *= y * volume;
    }
    Ok(inverse_transform(&a))
}

/// `(h^d Σ |f|^p)^{1/p}`, or `max |f|` when `p` is infinite.
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    lp_norm_values(f.spec(), &f.abs_values(), p)
}

/// Same as [`lp_norm`] for a slice of nonnegative magnitudes on `spec`.
pub fn lp_norm_values(spec: &GridSpec, magnitudes: &[f64], p: f64) -> Result<f64> {
    if p.is_nan() || p <= 1.0 {
        return Err(param(format!("L^p exponent must exceed 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(magnitudes.iter().fold(0.0, |m, &v| m.max(v)));
    }
    let powered: Vec<f64> = magnitudes.iter().map(|v| v.powf(p)).collect();
    Ok((spec.cell_volume() * pairwise_sum(&powered)).powf(1.0 / p))
}

/// Fourth-order centered finite difference along `axis` of a real field.
pub fn centered_difference(spec: &GridSpec, values: &[f64], axis: usize) -> Vec<f64> {
    let n = spec.n();
    let stride = spec.stride(axis);
    let h = spec.spacing();
    let mut coords = vec![0usize; spec.d()];
    let mut out = vec![0.0; values.len()];
    for (idx, slot) in out.iter_mut().enumerate() {
        spec.unravel(idx, &mut coords);
        let c = coords[axis];
        let at = |shift: isize| {
            let k = (c as isize + shift).rem_euclid(n as isize) as usize;
            values[idx - c * stride + k * stride]
        };
        *slot = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(spec: GridSpec, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..spec.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        GridFunction::new(spec, samples).unwrap()
    }

    fn max_rel_diff(a: &GridFunction, b: &GridFunction) -> f64 {
        let diff = a.sub(b).unwrap().max_abs();
        diff / b.max_abs().max(1e-300)
    }

    #[test]
    fn spec_validation() {
        assert!(GridSpec::standard(2, 6).is_err());
        assert!(GridSpec::standard(2, 2).is_err());
        assert!(GridSpec::standard(0, 8).is_err());
        assert!(GridSpec::new(1, 8, -1.0).is_err());
        let spec = GridSpec::standard(3, 8).unwrap();
        assert_eq!(spec.len(), 512);
        assert!((spec.spacing() - 2.0 * PI / 8.0).abs() < 1e-15);
    }

    #[test]
    fn non_finite_samples_rejected() {
        let spec = GridSpec::standard(1, 4).unwrap();
        let mut s = vec![Complex64::new(0.0, 0.0); 4];
        s[2].re = f64::NAN;
        assert!(matches!(GridFunction::new(spec, s), Err(Error::Data(_))));
    }

    #[test]
    fn constant_maps_to_zero_frequency() {
        let spec = GridSpec::standard(2, 8).unwrap();
        let c = Complex64::new(1.5, -0.25);
        let spectrum = forward_transform(&GridFunction::constant(spec, c));
        assert!((spectrum.coefficient(&[0, 0]) - c).norm() < 1e-15);
        let rest = spectrum.coefficients()[1..].iter().fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(rest < 1e-15);
    }

    #[test]
    fn pure_mode_has_single_coefficient() {
        let spec = GridSpec::standard(3, 8).unwrap();
        let f = GridFunction::from_fn(spec, |x| Complex64::from_polar(1.0, x[0])).unwrap();
        let spectrum = forward_transform(&f);
        assert!((spectrum.coefficient(&[1, 0, 0]) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        let mut others = 0.0f64;
        spec.for_each_frequency(|idx, xi| {
            if xi != [1, 0, 0] {
                others = others.max(spectrum.coefficients()[idx].norm());
            }
        });
        assert!(others < 1e-14);
        let g = GridFunction::mode(spec, &[1, 0, 0]).unwrap();
        assert!(max_rel_diff(&g, &f) < 1e-14);
    }

    #[test]
    fn inverse_of_zero_and_unit_coefficient() {
        let spec = GridSpec::standard(2, 8).unwrap();
        assert_eq!(inverse_transform(&SpectralField::zeros(spec)).max_abs(), 0.0);
        let mut s = SpectralField::zeros(spec);
        s.set_coefficient(&[1, 0], Complex64::new(1.0, 0.0));
        let f = inverse_transform(&s);
        let expected = GridFunction::from_fn(spec, |x| Complex64::from_polar(1.0, x[0])).unwrap();
        assert!(max_rel_diff(&f, &expected) < 1e-14);
    }

    #[test]
    fn round_trip_is_identity() {
        for (d, n) in [(1, 64), (2, 32), (3, 8)] {
            let spec = GridSpec::standard(d, n).unwrap();
            let f = random_field(spec, 7 + d as u64);
            let back = inverse_transform(&forward_transform(&f));
            assert!(max_rel_diff(&back, &f) < 1e-12);
            let s = forward_transform(&f);
            let s2 = forward_transform(&inverse_transform(&s));
            let diff = s
                .coefficients()
                .iter()
                .zip(s2.coefficients())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
            assert!(diff < 1e-12 * s.coefficients().iter().fold(0.0f64, |m, z| m.max(z.norm())));
        }
    }

    #[test]
    fn parseval() {
        let spec = GridSpec::new(2, 16, 3.0).unwrap();
        let f = random_field(spec, 3);
        let lhs = lp_norm(&f, 2.0).unwrap().powi(2);
        let s = forward_transform(&f);
        let rhs = spec.volume() * pairwise_sum_by(s.coefficients(), &|z| z.norm_sqr());
        assert!((lhs - rhs).abs() < 1e-12 * rhs);
    }

    #[test]
    fn derivative_of_constant_and_sine() {
        let spec = GridSpec::standard(2, 16).unwrap();
        let c = GridFunction::constant(spec, Complex64::new(3.0, 0.0));
        assert!(spectral_derivative(&c, 1, 1).unwrap().max_abs() < 1e-14);
        let s = GridFunction::from_fn(spec, |x| Complex64::new(x[0].sin(), 0.0)).unwrap();
        let ds = spectral_derivative(&s, 0, 1).unwrap();
        let cos = GridFunction::from_fn(spec, |x| Complex64::new(x[0].cos(), 0.0)).unwrap();
        assert!(ds.sub(&cos).unwrap().max_abs() < 1e-12);
        assert!(spectral_derivative(&s, 2, 1).is_err());
        assert!(spectral_derivative(&s, 0, 0).is_err());
    }

    #[test]
    fn mixed_derivatives_commute_exactly() {
        let spec = GridSpec::standard(2, 16).unwrap();
        let f = random_field(spec, 11);
        let a = spectral_derivative(&spectral_derivative(&f, 0, 1).unwrap(), 1, 1).unwrap();
        let b = spectral_derivative(&spectral_derivative(&f, 1, 1).unwrap(), 0, 1).unwrap();
        // separable symbols multiply in a different order; agreement is to rounding
        assert!(max_rel_diff(&a, &b) < 1e-13);
    }

    #[test]
    fn convolution_with_scaled_delta_is_identity() {
        let spec = GridSpec::standard(2, 8).unwrap();
        let f = random_field(spec, 5);
        let mut delta = vec![Complex64::new(0.0, 0.0); spec.len()];
        delta[0] = Complex64::new(1.0 / spec.cell_volume(), 0.0);
        let delta = GridFunction::new(spec, delta).unwrap();
        let g = circular_convolve(&f, &delta).unwrap();
        assert!(max_rel_diff(&g, &f) < 1e-12);
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let spec = GridSpec::standard(2, 8).unwrap();
        let f = random_field(spec, 1);
        let k = random_field(spec, 2);
        let fast = circular_convolve(&f, &k).unwrap();
        let n = spec.n();
        let mut direct = vec![Complex64::new(0.0, 0.0); spec.len()];
        for x0 in 0..n {
            for x1 in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for y0 in 0..n {
                    for y1 in 0..n {
                        let kv = k.samples()[y0 * n + y1];
                        let fv = f.samples()[((x0 + n - y0) % n) * n + (x1 + n - y1) % n];
                        acc += kv * fv;
                    }
                }
                direct[x0 * n + x1] = acc * spec.cell_volume();
            }
        }
        let direct = GridFunction::new(spec, direct).unwrap();
        assert!(max_rel_diff(&fast, &direct) < 1e-12);
        let swapped = circular_convolve(&k, &f).unwrap();
        assert!(max_rel_diff(&swapped, &fast) < 1e-12);
    }

    #[test]
    fn mode_convolution() {
        // e^{ix} * e^{ix} = period^d * e^{ix} * (coefficient 1 times coefficient 1)
        let spec = GridSpec::standard(2, 8).unwrap();
        let m = GridFunction::mode(spec, &[1, 0]).unwrap();
        let c = circular_convolve(&m, &m).unwrap();
        assert!(max_rel_diff(&c, &m.scale(spec.volume())) < 1e-12);
    }

    #[test]
    fn convolution_is_bilinear() {
        let spec = GridSpec::standard(1, 32).unwrap();
        let (f, g, k) = (random_field(spec, 1), random_field(spec, 2), random_field(spec, 3));
        let lhs = circular_convolve(&f.scale(2.0).add(&g).unwrap(), &k).unwrap();
        let rhs = circular_convolve(&f, &k)
            .unwrap()
            .scale(2.0)
            .add(&circular_convolve(&g, &k).unwrap())
            .unwrap();
        assert!(max_rel_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn lp_norms() {
        let spec = GridSpec::standard(2, 8).unwrap();
        assert_eq!(lp_norm(&GridFunction::zeros(spec), 2.0).unwrap(), 0.0);
        let c = GridFunction::constant(spec, Complex64::new(0.0, -3.0));
        assert!((lp_norm(&c, 2.0).unwrap() - 3.0 * 2.0 * PI).abs() < 1e-12);
        assert_eq!(lp_norm(&c, f64::INFINITY).unwrap(), 3.0);
        assert!(lp_norm(&c, 1.0).is_err());
        let f = random_field(spec, 9);
        let p = 3.5;
        let mut direct = 0.0;
        for z in f.samples().iter().rev() {
            direct += z.norm().powf(p);
        }
        let direct = (direct * spec.cell_volume()).powf(1.0 / p);
        assert!((lp_norm(&f, p).unwrap() - direct).abs() < 1e-13 * direct);
    }

    #[test]
    fn permute_axes_moves_modes() {
        let spec = GridSpec::standard(3, 8).unwrap();
        let f = GridFunction::mode(spec, &[1, 2, 3]).unwrap();
        let g = f.permute_axes(&[2, 0, 1]).unwrap();
        let expected = GridFunction::mode(spec, &[3, 1, 2]).unwrap();
        assert!(max_rel_diff(&g, &expected) < 1e-14);
        assert!(f.permute_axes(&[0, 0, 1]).is_err());
    }

    #[test]
    fn centered_difference_is_fourth_order() {
        let errs: Vec<f64> = [32usize, 64]
            .iter()
            .map(|&n| {
                let spec = GridSpec::standard(1, n).unwrap();
                let f: Vec<f64> = (0..n).map(|i| (i as f64 * spec.spacing()).sin()).collect();
                let df = centered_difference(&spec, &f, 0);
                (0..n)
                    .map(|i| (df[i] - (i as f64 * spec.spacing()).cos()).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.8, "observed order {order}");
    }
}
