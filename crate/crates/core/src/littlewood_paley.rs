//! Dyadic annular filter bank and Littlewood-Paley decomposition.
//!
//! Band `j` keeps angular wavenumbers `2^{j-1} < |k| < 2^{j+1}`, where
//! `k = ξ·2π/period` for the integer grid frequency `ξ`. The multipliers
//! are `Δ̂(2^{-j}k) = ρ(2^{-j}|k|) / Σ_m ρ(2^m |k|)` for the smooth annular
//! profile `ρ` built in [`AnnularProfile`].

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::grid::{
    forward_transform, inverse_transform, lp_norm, GridFunction, GridSpec, SpectralField,
};
use crate::io::save_gfn;

/// Manifest tag of the filter profile used by [`AnnularProfile`].
pub const PROFILE_TAG: &str = "paper-footnote-v1";

/// `C^∞` step: 0 for `u <= 0`, 1 for `u >= 1`.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

/// Radial profile `ρ`, supported in `(1/2, 2)` and equal to one on `[3/4, 3/2]`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AnnularProfile;

impl AnnularProfile {
    pub const SUPPORT: (f64, f64) = (0.5, 2.0);
    pub const PLATEAU: (f64, f64) = (0.75, 1.5);

    pub fn eval(&self, t: f64) -> f64 {
        smooth_step((t - 0.5) / 0.25) * smooth_step((2.0 - t) / 0.5)
    }

    /// `Σ_{m∈Z} ρ(2^m t)` for `t > 0`; at most two terms are nonzero.
    pub fn dyadic_sum(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let centre = (-t.log2()).round() as i32;
        let mut terms = [0.0; 5];
        for (slot, m) in terms.iter_mut().zip(centre - 2..=centre + 2) {
            *slot = self.eval(t * 2f64.powi(m));
        }
        terms.iter().sum()
    }

    /// The normalized filter `Δ̂(t) = ρ(t) / Σ_m ρ(2^m t)` with `Δ̂(0) = 0`.
    pub fn filter(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let rho = self.eval(t);
        if rho == 0.0 {
            0.0
        } else {
            rho / self.dyadic_sum(t)
        }
    }
}

pub fn build_profile() -> AnnularProfile {
    AnnularProfile
}

/// Euclidean norm of the angular wavenumber of integer frequency `xi`.
pub fn wavenumber_norm(spec: &GridSpec, xi: &[i64]) -> f64 {
    let s: i64 = xi.iter().map(|&k| k * k).sum();
    (s as f64).sqrt() * spec.wavenumber_unit()
}

/// The multipliers `Δ̂(2^{-j}·)` on every grid frequency, for `j_min..=j_max`.
#[derive(Debug, Clone)]
pub struct FilterBank {
    spec: GridSpec,
    j_min: i32,
    j_max: i32,
    profile: AnnularProfile,
    multipliers: Vec<Vec<f64>>,
}

impl FilterBank {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn bands(&self) -> impl Iterator<Item = i32> {
        self.j_min..=self.j_max
    }

    pub fn band_count(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    pub fn profile(&self) -> &AnnularProfile {
        &self.profile
    }

    /// Multiplier values of band `j` in FFT storage order.
    pub fn multiplier(&self, j: i32) -> Result<&[f64]> {
        self.check_band(j)?;
        Ok(&self.multipliers[(j - self.j_min) as usize])
    }

    pub fn check_band(&self, j: i32) -> Result<()> {
        if j < self.j_min || j > self.j_max {
            return Err(param(format!(
                "band {j} outside filter bank range [{}, {}]",
                self.j_min, self.j_max
            )));
        }
        Ok(())
    }

    /// Whether grid frequency with wavenumber norm `k` lies in the range where
    /// the bank is an exact partition of unity.
    pub fn covers(&self, k: f64) -> bool {
        // band j_max + 1 already switches on above 2^{j_max}
        k >= 2f64.powi(self.j_min) && k <= 2f64.powi(self.j_max)
    }

    /// Spatial convolution kernel of band `j`: `circular_convolve(f, K) = Δ_j f`.
    pub fn band_kernel(&self, j: i32) -> Result<GridFunction> {
        let m = self.multiplier(j)?;
        let vol = self.spec.volume();
        let coeffs = m.iter().map(|&v| Complex64::new(v / vol, 0.0)).collect();
        Ok(inverse_transform(&SpectralField::new(self.spec, coeffs)?))
    }

    /// Writes one `.gfn` multiplier stack per band plus `manifest.json`.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for j in self.bands() {
            let m = self.multiplier(j)?;
            let f = GridFunction::from_real(self.spec, m.to_vec())?;
            save_gfn(dir.join(format!("band_{j}.gfn")), &f)?;
        }
        let manifest = BankManifest {
            j_min: self.j_min,
            j_max: self.j_max,
            profile: PROFILE_TAG.into(),
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankManifest {
    pub j_min: i32,
    pub j_max: i32,
    pub profile: String,
}

/// Largest band whose annulus stays strictly inside the Nyquist wavenumber.
pub fn max_band(spec: &GridSpec) -> i32 {
    let nyquist = spec.n() as f64 / 2.0 * spec.wavenumber_unit();
    // 2^{j+1} <= nyquist
    (nyquist.log2() - 1.0 + 1e-12).floor() as i32
}

/// Lowest band reaching the smallest nonzero wavenumber `2π/period`.
pub fn min_band(spec: &GridSpec) -> i32 {
    // 2^{j-1} < unit
    (spec.wavenumber_unit().log2() + 1.0 - 1e-12).ceil() as i32 - 1
}

/// Filter bank spanning every band the grid resolves.
pub fn default_filter_bank(spec: &GridSpec) -> Result<FilterBank> {
    build_filter_bank(spec, min_band(spec), max_band(spec))
}

pub fn build_filter_bank(spec: &GridSpec, j_min: i32, j_max: i32) -> Result<FilterBank> {
    if j_min > j_max {
        return Err(param(format!("empty band range [{j_min}, {j_max}]")));
    }
    if j_max > max_band(spec) {
        return Err(param(format!(
            "band {j_max} exceeds the Nyquist limit (max band {} for n = {})",
            max_band(spec),
            spec.n()
        )));
    }
    let profile = build_profile();
    let count = (j_max - j_min + 1) as usize;
    let mut multipliers = vec![vec![0.0; spec.len()]; count];
    spec.for_each_frequency(|idx, xi| {
        let k = wavenumber_norm(spec, xi);
        if k == 0.0 {
            return;
        }
        let denom = profile.dyadic_sum(k);
        for (b, j) in (j_min..=j_max).enumerate() {
            let rho = profile.eval(k * 2f64.powi(-j));
            if rho != 0.0 {
                multipliers[b][idx] = rho / denom;
            }
        }
    });
    Ok(FilterBank {
        spec: *spec,
        j_min,
        j_max,
        profile,
        multipliers,
    })
}

fn masked(spectrum: &SpectralField, mask: &[f64]) -> GridFunction {
    let coeffs: Vec<Complex64> = spectrum
        .coefficients()
        .iter()
        .zip(mask)
        .map(|(z, &m)| z * m)
        .collect();
    inverse_transform(&SpectralField::new(*spectrum.spec(), coeffs).expect("finite product"))
}

/// `Δ_j f`.
pub fn project(bank: &FilterBank, f: &GridFunction, j: i32) -> Result<GridFunction> {
    bank.spec.check_same(f.spec())?;
    let m = bank.multiplier(j)?;
    Ok(masked(&forward_transform(f), m))
}

/// All bands `Δ_j f` of one field, plus the discarded mean.
#[derive(Debug, Clone)]
pub struct LPDecomposition {
    spec: GridSpec,
    j_min: i32,
    bands: Vec<GridFunction>,
    mean: Complex64,
}

impl LPDecomposition {
    /// Assembles a decomposition from externally computed bands (e.g. after scaling).
    pub fn from_bands(spec: GridSpec, j_min: i32, bands: Vec<GridFunction>, mean: Complex64) -> Result<Self> {
        if bands.is_empty() {
            return Err(param("decomposition needs at least one band"));
        }
        for b in &bands {
            spec.check_same(b.spec())?;
        }
        Ok(Self { spec, j_min, bands, mean })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_min + self.bands.len() as i32 - 1
    }

    pub fn band_indices(&self) -> impl Iterator<Item = i32> {
        self.j_min..=self.j_max()
    }

    pub fn bands(&self) -> &[GridFunction] {
        &self.bands
    }

    pub fn band(&self, j: i32) -> Option<&GridFunction> {
        if j < self.j_min {
            return None;
        }
        self.bands.get((j - self.j_min) as usize)
    }

    /// Mean of the decomposed field, stripped by every band.
    pub fn mean(&self) -> Complex64 {
        self.mean
    }

    pub fn scaled(&self, c: f64) -> LPDecomposition {
        LPDecomposition {
            spec: self.spec,
            j_min: self.j_min,
            bands: self.bands.iter().map(|b| b.scale(c)).collect(),
            mean: self.mean * c,
        }
    }

    /// Highest band that is not identically zero.
    pub fn top_nonzero_band(&self) -> Option<i32> {
        self.band_indices()
            .zip(&self.bands)
            .filter(|(_, b)| b.max_abs() > 0.0)
            .map(|(j, _)| j)
            .last()
    }
}

pub fn decompose(bank: &FilterBank, f: &GridFunction) -> Result<LPDecomposition> {
    bank.spec.check_same(f.spec())?;
    let spectrum = forward_transform(f);
    let mean = spectrum.coefficients()[0];
    let bands = bank.multipliers.iter().map(|m| masked(&spectrum, m)).collect();
    Ok(LPDecomposition {
        spec: bank.spec,
        j_min: bank.j_min,
        bands,
        mean,
    })
}

/// Pointwise sum of all bands (the mean is not restored).
pub fn reconstruct(decomp: &LPDecomposition) -> GridFunction {
    let mut out = GridFunction::zeros(decomp.spec);
    for b in &decomp.bands {
        out.axpy(1.0, b).expect("bands share the grid");
    }
    out
}

/// One factor `Δ^{(γ)}_j` of the moment factorization.
#[derive(Debug, Clone)]
pub struct MomentFactor {
    pub gamma: Vec<u32>,
    /// Fourier multiplier of the factor.
    pub symbol: Vec<Complex64>,
    /// Spatial convolution kernel, normalized like [`FilterBank::band_kernel`].
    pub kernel: GridFunction,
}

/// All multi-indices of length `d` and total order `a`, lexicographically descending.
pub fn multi_indices(d: usize, a: u32) -> Vec<Vec<u32>> {
    fn rec(d: usize, a: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == d {
            prefix.push(a);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=a).rev() {
            prefix.push(first);
            rec(d, a - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, a, &mut Vec::with_capacity(d), &mut out);
    out
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Writes band `j` as `Σ_{|γ|=a} ∂^γ Δ^{(γ)}_j`.
///
/// Since `Δ̂_j` vanishes near the origin the factors are
/// `c_γ conj((ik)^γ) |k|^{-2a} Δ̂_j(k)` with multinomial weights
/// `c_γ = a! / (γ_1! … γ_d!)`.
pub fn moment_factorize(bank: &FilterBank, a: u32, j: i32) -> Result<Vec<MomentFactor>> {
    if a < 1 {
        return Err(param("moment order must be at least 1"));
    }
    let spec = bank.spec;
    let m = bank.multiplier(j)?;
    let unit = spec.wavenumber_unit();
    let vol = spec.volume();
    multi_indices(spec.d(), a)
        .into_iter()
        .map(|gamma| {
            let c = factorial(a) / gamma.iter().map(|&g| factorial(g)).product::<f64>();
            let mut coeffs = vec![Complex64::new(0.0, 0.0); spec.len()];
            spec.for_each_frequency(|idx, xi| {
                if m[idx] == 0.0 {
                    return;
                }
                let k2: f64 = xi.iter().map(|&x| (x as f64 * unit).powi(2)).sum();
                let mono = xi
                    .iter()
                    .zip(&gamma)
                    .fold(Complex64::new(1.0, 0.0), |acc, (&x, &g)| {
                        acc * Complex64::new(0.0, -(x as f64) * unit).powu(g)
                    });
                coeffs[idx] = mono * (c * m[idx] / k2.powi(a as i32));
            });
            let spatial = coeffs.iter().map(|z| z / vol).collect();
            let kernel = inverse_transform(&SpectralField::new(spec, spatial)?);
            Ok(MomentFactor { gamma, symbol: coeffs, kernel })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernsteinEntry {
    pub j: i32,
    pub ratio: f64,
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernsteinReport {
    pub entries: Vec<BernsteinEntry>,
    /// Set when `α p ≠ d`, i.e. outside the critical scaling.
    pub off_critical: bool,
}

/// Per-band `‖Δ_j f‖_∞ / (2^{αj} ‖Δ_j f‖_p)`.
pub fn bernstein_ratio(
    bank: &FilterBank,
    decomp: &LPDecomposition,
    alpha: f64,
    p: f64,
) -> Result<BernsteinReport> {
    bank.spec.check_same(decomp.spec())?;
    let d = bank.spec.d() as f64;
    let off_critical = (alpha * p - d).abs() > 1e-12 * d;
    let entries = decomp
        .band_indices()
        .zip(decomp.bands())
        .map(|(j, band)| {
            let lp = lp_norm(band, p)?;
            if lp == 0.0 {
                return Ok(BernsteinEntry { j, ratio: 0.0, empty: true });
            }
            let sup = band.max_abs();
            Ok(BernsteinEntry {
                j,
                ratio: sup / (2f64.powf(alpha * j as f64) * lp),
                empty: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BernsteinReport { entries, off_critical })
}
