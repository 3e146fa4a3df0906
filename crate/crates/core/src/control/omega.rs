//! Control functions `ω_j`, cutoffs `ζ_j` and the damping generators `U_j`, `G_j`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernels::{e_power_table, periodized_t, Anisotropy};
use crate::error::{param, Result};
use crate::grid::{circular_convolve, inverse_transform, GridFunction, GridSpec, SpectralField};
use crate::littlewood_paley::{smooth_step, wavenumber_norm, LPDecomposition};
use crate::sum::NeumaierSum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    pub sigma: u32,
    pub kappa: usize,
    /// Residue-class stride `R`.
    pub r_stride: u32,
    pub alpha: f64,
    pub p: f64,
    /// 0-based axes along which the kernels are stretched.
    pub good_dirs: Vec<usize>,
}

impl ControlParams {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.sigma < 1 {
            return Err(param("sigma must be at least 1"));
        }
        if self.r_stride < 1 {
            return Err(param("residue stride R must be at least 1"));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(param("p must lie in (1, inf)"));
        }
        if self.alpha * self.r_stride as f64 <= 1.0 {
            return Err(param(format!(
                "alpha * R = {} must exceed 1",
                self.alpha * self.r_stride as f64
            )));
        }
        if self.good_dirs.len() > self.kappa {
            return Err(param("more good directions than kappa"));
        }
        Anisotropy::new(d, self.sigma, &self.good_dirs).map(|_| ())
    }

    pub(crate) fn anisotropy(&self, d: usize) -> Result<Anisotropy> {
        Anisotropy::new(d, self.sigma, &self.good_dirs)
    }
}

/// Grid step realizing the band-`j` lattice `2^{-j} Z^d`: the power of two
/// closest (in log scale) to `2^{-j}/h`, clamped to `[1, n]`.
pub fn lattice_step(spec: &GridSpec, j: i32) -> usize {
    let cells = 2f64.powi(-j) / spec.spacing();
    let e = cells.log2().round().max(0.0) as u32;
    (1usize << e.min(spec.n().trailing_zeros())).max(1)
}

/// The pieces of the lower bound `|Δ_j f| ≤ C_low ω_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominationConstant {
    /// `max |K_j| / T_j` for a reproducing kernel `K_j` of the band.
    pub c_k: f64,
    /// `max T_j(z+δ)/T_j(z)` over offsets `δ` to the nearest lattice point.
    pub doubling: f64,
    /// `min_δ (lattice kernel table)^{1/p}` over the same offsets.
    pub e_min: f64,
    pub value: f64,
}

/// Precomputed per-band kernels, reusable across inputs with equal parameters.
#[derive(Debug, Clone)]
pub struct BandKernels {
    pub j: i32,
    pub step: usize,
    pub t_kernel: GridFunction,
    pub(crate) e_power: Vec<f64>,
    pub domination: DominationConstant,
}

#[derive(Debug, Clone)]
pub struct ControlKernels {
    spec: GridSpec,
    params: ControlParams,
    bands: Vec<BandKernels>,
}

/// Offsets `x - y*(x)` to the nearest lattice point, per axis.
fn offset_range(step: usize) -> std::ops::Range<i64> {
    let m = step as i64;
    -(m / 2)..(m - m / 2)
}

fn for_each_offset(d: usize, step: usize, mut f: impl FnMut(&[i64])) {
    let range = offset_range(step);
    let mut off = vec![range.start; d];
    loop {
        f(&off);
        let mut a = d;
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            if off[a] + 1 < range.end {
                off[a] += 1;
                break;
            }
            off[a] = range.start;
        }
    }
}

fn shifted_index(spec: &GridSpec, coords: &[usize], off: &[i64]) -> usize {
    let n = spec.n() as i64;
    coords
        .iter()
        .zip(off)
        .enumerate()
        .map(|(a, (&c, &o))| ((c as i64 + o).rem_euclid(n) as usize) * spec.stride(a))
        .sum()
}

fn displacement_index(spec: &GridSpec, off: &[i64]) -> usize {
    let zeros = vec![0usize; spec.d()];
    shifted_index(spec, &zeros, off)
}

/// Spatial kernel with symbol 1 on `|k| ≤ 2^{j+1}` and 0 from `3·2^j` on.
fn reproducing_kernel(spec: &GridSpec, j: i32) -> GridFunction {
    let mut field = SpectralField::zeros(*spec);
    let vol = spec.volume();
    let scale = 2f64.powi(j);
    let mut values = vec![0.0; spec.len()];
    spec.for_each_frequency(|k, xi| {
        values[k] = smooth_step(3.0 - wavenumber_norm(spec, xi) / scale) / vol;
    });
    for (c, v) in field.coefficients_mut().iter_mut().zip(values) {
        c.re = v;
    }
    inverse_transform(&field)
}

impl BandKernels {
    pub fn new(spec: &GridSpec, aniso: &Anisotropy, p: f64, j: i32) -> Self {
        let d = spec.d();
        let step = lattice_step(spec, j);
        let t = periodized_t(spec, j, &vec![0.0; d]);
        let e_power = e_power_table(spec, aniso, j, p);

        let k = reproducing_kernel(spec, j);
        let c_k = k
            .samples()
            .iter()
            .zip(&t)
            .map(|(z, t)| z.norm() / t)
            .fold(0.0, f64::max);

        let mut doubling = 1.0f64;
        let mut e_min = f64::INFINITY;
        let mut coords = vec![0usize; d];
        for_each_offset(d, step, |off| {
            for z in 0..spec.len() {
                spec.unravel(z, &mut coords);
                doubling = doubling.max(t[shifted_index(spec, &coords, off)] / t[z]);
            }
            e_min = e_min.min(e_power[displacement_index(spec, off)].powf(1.0 / p));
        });

        Self {
            j,
            step,
            t_kernel: GridFunction::from_real_raw(*spec, &t),
            e_power,
            domination: DominationConstant { c_k, doubling, e_min, value: c_k * doubling / e_min },
        }
    }

    /// The `ℓ^p` lattice sum `(Σ_y A(y)^p K(x-y))^{1/p}` with `A = T_j ∗ |band|`.
    pub fn omega(&self, band: &GridFunction, p: f64) -> Result<Vec<f64>> {
        let spec = *band.spec();
        if band.max_abs() == 0.0 {
            return Ok(vec![0.0; spec.len()]);
        }
        let a = circular_convolve(&band.abs(), &self.t_kernel)?;
        let d = spec.d();
        let n = spec.n();
        let mut lattice: Vec<(Vec<usize>, f64)> = Vec::new();
        let mut coords = vec![0usize; d];
        for y in 0..spec.len() {
            spec.unravel(y, &mut coords);
            if coords.iter().all(|c| c % self.step == 0) {
                let v = a.samples()[y].re.max(0.0).powf(p);
                if v > 0.0 {
                    lattice.push((coords.clone(), v));
                }
            }
        }
        let strides: Vec<usize> = (0..d).map(|ax| spec.stride(ax)).collect();
        let out = (0..spec.len())
            .into_par_iter()
            .map(|x| {
                let mut xc = vec![0usize; d];
                spec.unravel(x, &mut xc);
                let mut acc = NeumaierSum::new();
                for (yc, v) in &lattice {
                    let mut disp = 0;
                    for ax in 0..d {
                        disp += ((xc[ax] + n - yc[ax]) % n) * strides[ax];
                    }
                    let k = self.e_power[disp];
                    if k > 0.0 {
                        acc.add(v * k);
                    }
                }
                acc.value().powf(1.0 / p)
            })
            .collect();
        Ok(out)
    }
}

impl ControlKernels {
    pub fn new(spec: &GridSpec, params: &ControlParams, j_min: i32, j_max: i32) -> Result<Self> {
        params.validate(spec.d())?;
        if j_min > j_max {
            return Err(param("empty band range"));
        }
        let aniso = params.anisotropy(spec.d())?;
        let bands = (j_min..=j_max).map(|j| BandKernels::new(spec, &aniso, params.p, j)).collect();
        Ok(Self { spec: *spec, params: params.clone(), bands })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn params(&self) -> &ControlParams {
        &self.params
    }

    pub fn bands(&self) -> &[BandKernels] {
        &self.bands
    }

    pub fn band(&self, j: i32) -> Option<&BandKernels> {
        self.bands.iter().find(|b| b.j == j)
    }

    /// `C_low`: the largest per-band domination constant.
    pub fn c_low(&self) -> f64 {
        self.bands.iter().map(|b| b.domination.value).fold(0.0, f64::max)
    }
}

/// `ω_j` for one band, building the kernels on the fly.
pub fn build_omega(decomp: &LPDecomposition, params: &ControlParams, j: i32) -> Result<GridFunction> {
    let band = decomp
        .band(j)
        .ok_or_else(|| param(format!("band {j} not in decomposition")))?;
    let spec = decomp.spec();
    params.validate(spec.d())?;
    let kernels = BandKernels::new(spec, &params.anisotropy(spec.d())?, params.p, j);
    Ok(GridFunction::from_real_raw(*spec, &kernels.omega(band, params.p)?))
}

/// `ζ(t) = 1` on `[0, 1/2]`, `0` on `[1, ∞)`.
pub fn zeta_profile(t: f64) -> f64 {
    smooth_step(2.0 * (1.0 - t))
}

fn same_class(k: i32, j: i32, r: u32) -> bool {
    (j - k).rem_euclid(r as i32) == 0
}

/// `ζ_j = ζ(2^{αj} ω_j / Σ_{k<j, k≡j mod R} 2^{αk} ω_k)`, identically zero
/// when the denominator is.
pub fn build_zeta(omegas: &[Vec<f64>], j_min: i32, params: &ControlParams, j: i32) -> Result<Vec<f64>> {
    let idx = usize::try_from(j - j_min)
        .ok()
        .filter(|&i| i < omegas.len())
        .ok_or_else(|| param(format!("band {j} out of range")))?;
    let len = omegas[idx].len();
    let below: Vec<(f64, &Vec<f64>)> = (j_min..j)
        .filter(|&k| same_class(k, j, params.r_stride))
        .map(|k| (2f64.powf(params.alpha * k as f64), &omegas[(k - j_min) as usize]))
        .filter(|(_, w)| w.iter().any(|&v| v > 0.0))
        .collect();
    if below.is_empty() {
        return Ok(vec![0.0; len]);
    }
    let wj = 2f64.powf(params.alpha * j as f64);
    Ok((0..len)
        .map(|x| {
            let den: f64 = below.iter().map(|(w, om)| w * om[x]).sum();
            let num = wj * omegas[idx][x];
            if den > 0.0 {
                zeta_profile(num / den)
            } else {
                0.0
            }
        })
        .collect())
}

/// `U_j = (1-ζ_j) ω_j` and `G_j = Σ_{t>0, t≡0 mod R} 2^{-αt} ω_{j-t}` over in-range bands.
pub fn build_u_g(
    omegas: &[Vec<f64>],
    zetas: &[Vec<f64>],
    params: &ControlParams,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let u = omegas
        .iter()
        .zip(zetas)
        .map(|(om, ze)| om.iter().zip(ze).map(|(o, z)| (1.0 - z) * o).collect())
        .collect();
    let r = params.r_stride as usize;
    let g = (0..omegas.len())
        .map(|i| {
            let mut acc = vec![0.0; omegas[i].len()];
            let mut t = r;
            while t <= i {
                let w = 2f64.powf(-params.alpha * t as f64);
                for (a, o) in acc.iter_mut().zip(&omegas[i - t]) {
                    *a += w * o;
                }
                t += r;
            }
            acc
        })
        .collect();
    (u, g)
}

/// All per-band control fields of one decomposition.
#[derive(Debug, Clone)]
pub struct ControlFamily {
    spec: GridSpec,
    params: ControlParams,
    j_min: i32,
    omega: Vec<Vec<f64>>,
    zeta: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    c_low: f64,
}

impl ControlFamily {
    pub fn build(decomp: &LPDecomposition, kernels: &ControlKernels) -> Result<Self> {
        let spec = *decomp.spec();
        spec.check_same(kernels.spec())?;
        let params = kernels.params().clone();
        let omega = decomp
            .band_indices()
            .zip(decomp.bands())
            .map(|(j, band)| {
                let k = kernels
                    .band(j)
                    .ok_or_else(|| param(format!("no kernels prepared for band {j}")))?;
                k.omega(band, params.p)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_omega(spec, params, decomp.j_min(), omega, kernels.c_low())
    }

    /// Completes a family from precomputed `ω_j`.
    pub fn from_omega(
        spec: GridSpec,
        params: ControlParams,
        j_min: i32,
        omega: Vec<Vec<f64>>,
        c_low: f64,
    ) -> Result<Self> {
        let zeta = (0..omega.len())
            .map(|i| build_zeta(&omega, j_min, &params, j_min + i as i32))
            .collect::<Result<Vec<_>>>()?;
        let (u, g) = build_u_g(&omega, &zeta, &params);
        Ok(Self { spec, params, j_min, omega, zeta, u, g, c_low })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn params(&self) -> &ControlParams {
        &self.params
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_min + self.omega.len() as i32 - 1
    }

    pub fn band_count(&self) -> usize {
        self.omega.len()
    }

    pub fn c_low(&self) -> f64 {
        self.c_low
    }

    fn idx(&self, j: i32) -> usize {
        (j - self.j_min) as usize
    }

    pub fn omega(&self, j: i32) -> &[f64] {
        &self.omega[self.idx(j)]
    }

    pub fn zeta(&self, j: i32) -> &[f64] {
        &self.zeta[self.idx(j)]
    }

    pub fn u(&self, j: i32) -> &[f64] {
        &self.u[self.idx(j)]
    }

    pub fn g(&self, j: i32) -> &[f64] {
        &self.g[self.idx(j)]
    }

    pub fn omegas(&self) -> &[Vec<f64>] {
        &self.omega
    }

    /// Field view of one of the stored arrays, for dumps.
    pub fn field(&self, kind: ControlField, j: i32) -> GridFunction {
        let data = match kind {
            ControlField::Omega => self.omega(j),
            ControlField::Zeta => self.zeta(j),
            ControlField::U => self.u(j),
            ControlField::G => self.g(j),
        };
        GridFunction::from_real_raw(self.spec, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlField {
    Omega,
    Zeta,
    U,
    G,
}

impl ControlField {
    pub const ALL: [ControlField; 4] = [Self::Omega, Self::Zeta, Self::U, Self::G];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Omega => "omega",
            Self::Zeta => "zeta",
            Self::U => "u",
            Self::G => "g",
        }
    }
}
