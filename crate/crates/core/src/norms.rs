//! Triebel-Lizorkin norms, maximal functions and the kernel-regularity probes
//! for the shifted maximal operator.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::kernels::{periodized_t, t_mass, t_radial, t_tail_mass};
use crate::error::{param, Error, Result};
use crate::grid::{circular_convolve, lp_norm_values, spectral_derivative, GridFunction, GridSpec};
use crate::littlewood_paley::{decompose, FilterBank, LPDecomposition};
use crate::probe::ProbeRow;
use crate::sum::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TLParams {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
}

impl TLParams {
    pub fn new(alpha: f64, p: f64, q: f64) -> Result<Self> {
        for (name, v) in [("p", p), ("q", q)] {
            if !(v > 1.0 && v.is_finite()) {
                return Err(param(format!("{name} = {v} must lie in (1, inf)")));
            }
        }
        if !alpha.is_finite() {
            return Err(param("alpha must be finite"));
        }
        Ok(Self { alpha, p, q })
    }

    /// Whether `α p = d`.
    pub fn is_critical(&self, d: usize) -> bool {
        (self.alpha * self.p - d as f64).abs() <= 1e-12 * d as f64
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..*self }
    }
}

/// `‖ ‖w_j g_j‖_{ℓ^q} ‖_{L^p}` for nonnegative sample arrays `g_j`.
pub fn mixed_norm(spec: &GridSpec, fields: &[Vec<f64>], weights: &[f64], p: f64, q: f64) -> Result<f64> {
    if fields.len() != weights.len() {
        return Err(param("one weight per field is required"));
    }
    let inner: Vec<f64> = (0..spec.len())
        .into_par_iter()
        .map(|x| {
            fields
                .iter()
                .zip(weights)
                .map(|(g, w)| (w * g[x]).powf(q))
                .sum::<f64>()
                .powf(1.0 / q)
        })
        .collect();
    let norm = lp_norm_values(spec, &inner, p)?;
    if !norm.is_finite() {
        return Err(Error::Data("norm evaluation overflowed".into()));
    }
    Ok(norm)
}

fn band_weights(decomp: &LPDecomposition, alpha: f64) -> Vec<f64> {
    decomp.band_indices().map(|j| 2f64.powf(alpha * j as f64)).collect()
}

/// `‖ ‖2^{αj} Δ_j f‖_{ℓ^q} ‖_{L^p}`.
pub fn tl_norm(decomp: &LPDecomposition, params: &TLParams) -> Result<f64> {
    let fields: Vec<Vec<f64>> = decomp.bands().iter().map(|b| b.abs_values()).collect();
    mixed_norm(decomp.spec(), &fields, &band_weights(decomp, params.alpha), params.p, params.q)
}

pub fn tl_norm_of(bank: &FilterBank, f: &GridFunction, params: &TLParams) -> Result<f64> {
    tl_norm(&decompose(bank, f)?, params)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeminormReport {
    pub tl_norm: f64,
    /// `‖∂_i f‖` in the space with smoothness lowered by one, per axis.
    pub derivative_norms: Vec<f64>,
    /// `None` for the zero field.
    pub ratio: Option<f64>,
}

/// Compares the norm of `f` with the summed norms of its first derivatives.
pub fn seminorm_equivalence_report(f: &GridFunction, bank: &FilterBank, params: &TLParams) -> Result<SeminormReport> {
    let tl = tl_norm_of(bank, f, params)?;
    let lowered = params.with_alpha(params.alpha - 1.0);
    let derivative_norms = (0..f.spec().d())
        .map(|i| tl_norm_of(bank, &spectral_derivative(f, i, 1)?, &lowered))
        .collect::<Result<Vec<_>>>()?;
    let denom: f64 = derivative_norms.iter().sum();
    let ratio = (tl > 0.0 && denom > 0.0).then(|| tl / denom);
    Ok(SeminormReport { tl_norm: tl, derivative_norms, ratio })
}

/// Applies `op` to every line of `data` parallel to `axis`.
fn for_each_line(spec: &GridSpec, data: &mut [f64], axis: usize, op: impl Fn(&[f64], &mut [f64]) + Sync) {
    let n = spec.n();
    let stride = spec.stride(axis);
    let starts: Vec<usize> = (0..spec.len()).filter(|i| (i / stride) % n == 0).collect();
    let results: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&s| {
            let line: Vec<f64> = (0..n).map(|t| data[s + t * stride]).collect();
            let mut out = vec![0.0; n];
            op(&line, &mut out);
            out
        })
        .collect();
    for (&s, out) in starts.iter().zip(results) {
        for (t, v) in out.into_iter().enumerate() {
            data[s + t * stride] = v;
        }
    }
}

/// `out[y] = Σ_{t<w} line[y+t]`, periodic.
fn window_sums(line: &[f64], w: usize, out: &mut [f64]) {
    let n = line.len();
    let mut s: f64 = (0..w).map(|t| line[t % n]).sum();
    for y in 0..n {
        out[y] = s;
        s += line[(y + w) % n] - line[y];
    }
}

/// `out[x] = max_{t<w} line[x-t]`, periodic, with a monotone deque.
fn window_max(line: &[f64], w: usize, out: &mut [f64]) {
    let n = line.len();
    let w = w.min(n);
    let mut dq: VecDeque<usize> = VecDeque::new();
    // positions run over x - w + 1 ..= n - 1 shifted by n to stay nonnegative
    for pos in (n + 1 - w)..(2 * n) {
        let v = line[pos % n];
        while dq.back().is_some_and(|&b| line[b % n] <= v) {
            dq.pop_back();
        }
        dq.push_back(pos);
        while dq.front().is_some_and(|&f| f + w <= pos) {
            dq.pop_front();
        }
        if pos >= n {
            out[pos - n] = line[dq[0] % n];
        }
    }
}

fn cube_maximal(spec: &GridSpec, magnitudes: &[f64]) -> Vec<f64> {
    let n = spec.n();
    let d = spec.d();
    let mut best = magnitudes.to_vec();
    let mut w = 2;
    while w <= n {
        let mut avg = magnitudes.to_vec();
        for axis in 0..d {
            for_each_line(spec, &mut avg, axis, |l, o| window_sums(l, w, o));
        }
        let vol = (w as f64).powi(d as i32);
        avg.iter_mut().for_each(|v| *v /= vol);
        for axis in 0..d {
            for_each_line(spec, &mut avg, axis, |l, o| window_max(l, w, o));
        }
        for (b, a) in best.iter_mut().zip(&avg) {
            *b = b.max(*a);
        }
        w *= 2;
    }
    best
}

/// Dyadic-cube maximal function: the largest average of `|f|` over grid-aligned
/// periodic cubes of side `2^k` cells that contain the point.
pub fn hl_maximal(f: &GridFunction) -> GridFunction {
    GridFunction::from_real_raw(*f.spec(), &cube_maximal(f.spec(), &f.abs_values()))
}

/// `‖ ‖M f_j‖_{ℓ^q} ‖_{L^p} / ‖ ‖f_j‖_{ℓ^q} ‖_{L^p}`; `None` for zero input.
pub fn vector_maximal_ratio(fields: &[GridFunction], p: f64, q: f64) -> Result<Option<f64>> {
    let spec = *fields.first().ok_or_else(|| param("no fields"))?.spec();
    let raw: Vec<Vec<f64>> = fields.iter().map(|f| f.abs_values()).collect();
    let maxed: Vec<Vec<f64>> = raw.iter().map(|g| cube_maximal(&spec, g)).collect();
    let ones = vec![1.0; fields.len()];
    let den = mixed_norm(&spec, &raw, &ones, p, q)?;
    let num = mixed_norm(&spec, &maxed, &ones, p, q)?;
    Ok((den > 0.0).then(|| num / den))
}

/// `k_j(x) = φ_j(x + 2^{-j} r)` for a band range, periodized on the torus.
#[derive(Debug, Clone)]
pub struct ShiftedKernelFamily {
    spec: GridSpec,
    shift: Vec<f64>,
    j_min: i32,
    kernels: Vec<GridFunction>,
    raw_masses: Vec<f64>,
}

impl ShiftedKernelFamily {
    /// Family generated by the polynomial-tail kernel `T`. Each member is
    /// rescaled so its discrete integral equals `∫_{R^d} T` exactly; the
    /// unscaled discrete masses are kept in [`Self::raw_masses`].
    pub fn for_t(spec: &GridSpec, shift: &[f64], j_min: i32, j_max: i32) -> Result<Self> {
        if shift.len() != spec.d() {
            return Err(param("shift dimension does not match the grid"));
        }
        if j_min > j_max {
            return Err(param("empty band range"));
        }
        let target = t_mass(spec.d());
        let mut kernels = Vec::new();
        let mut raw_masses = Vec::new();
        for j in j_min..=j_max {
            let s: Vec<f64> = shift.iter().map(|r| r * 2f64.powi(-j)).collect();
            let values = periodized_t(spec, j, &s);
            let mass = spec.cell_volume() * pairwise_sum(&values);
            let scaled: Vec<f64> = values.iter().map(|v| v * target / mass).collect();
            kernels.push(GridFunction::from_real_raw(*spec, &scaled));
            raw_masses.push(mass);
        }
        Ok(Self { spec: *spec, shift: shift.to_vec(), j_min, kernels, raw_masses })
    }

    /// Family from user-supplied per-band kernels, used as given.
    pub fn from_kernels(spec: &GridSpec, shift: &[f64], j_min: i32, kernels: Vec<GridFunction>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(param("empty kernel family"));
        }
        for k in &kernels {
            spec.check_same(k.spec())?;
            if k.samples().iter().any(|z| z.re < 0.0 || z.im != 0.0) {
                return Err(param("kernels must be real and nonnegative"));
            }
        }
        let raw_masses = kernels
            .iter()
            .map(|k| spec.cell_volume() * pairwise_sum(&k.real_parts()))
            .collect();
        Ok(Self { spec: *spec, shift: shift.to_vec(), j_min, kernels, raw_masses })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_min + self.kernels.len() as i32 - 1
    }

    pub fn kernels(&self) -> &[GridFunction] {
        &self.kernels
    }

    pub fn kernel(&self, j: i32) -> Option<&GridFunction> {
        usize::try_from(j - self.j_min).ok().and_then(|i| self.kernels.get(i))
    }

    pub fn raw_masses(&self) -> &[f64] {
        &self.raw_masses
    }

    /// Discrete integral of each member.
    pub fn masses(&self) -> Vec<f64> {
        self.kernels
            .iter()
            .map(|k| self.spec.cell_volume() * pairwise_sum(&k.real_parts()))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ShiftedMaximal {
    /// `sup_j |f_j| ∗ k_j`.
    pub sup: GridFunction,
    /// The individual `|f_j| ∗ k_j`.
    pub per_band: Vec<GridFunction>,
}

pub fn shifted_maximal(fields: &[GridFunction], kernels: &ShiftedKernelFamily) -> Result<ShiftedMaximal> {
    if fields.len() != kernels.kernels.len() {
        return Err(param(format!(
            "{} fields for {} kernel bands",
            fields.len(),
            kernels.kernels.len()
        )));
    }
    let per_band = fields
        .par_iter()
        .zip(&kernels.kernels)
        .map(|(f, k)| {
            let conv = circular_convolve(&f.abs(), k)?;
            // the convolution of nonnegative data is real and nonnegative
            Ok(conv.map(|z| Complex64::new(z.re.max(0.0), 0.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sup = vec![0.0f64; kernels.spec.len()];
    for b in &per_band {
        for (s, z) in sup.iter_mut().zip(b.samples()) {
            *s = s.max(z.re);
        }
    }
    Ok(ShiftedMaximal { sup: GridFunction::from_real_raw(kernels.spec, &sup), per_band })
}

/// A radial kernel on `R^d`.
pub trait RadialKernel: Sync {
    fn profile(&self, rho: f64) -> f64;

    /// `∫_{‖y‖ > radius} φ(y) dy`; defaults to quadrature in `u = radius/ρ`.
    fn tail_mass(&self, d: usize, radius: f64) -> f64 {
        let steps = 4096;
        let s = crate::control::kernels::sphere_area(d);
        let h = 1.0 / steps as f64;
        let sum: f64 = (0..steps)
            .map(|i| {
                let u = (i as f64 + 0.5) * h;
                let rho = radius / u;
                self.profile(rho) * rho.powi(d as i32 - 1) * radius / (u * u)
            })
            .sum();
        s * sum * h
    }

    /// Closed-form `∫_{R^d} φ`, when known.
    fn analytic_mass(&self, _d: usize) -> Option<f64> {
        None
    }
}

/// `T(x) = min(1, ‖x‖^{-(d+1)})`, radially in dimension `d`.
#[derive(Debug, Clone, Copy)]
pub struct TKernel {
    pub d: usize,
}

impl RadialKernel for TKernel {
    fn profile(&self, rho: f64) -> f64 {
        t_radial(rho, self.d)
    }

    fn tail_mass(&self, d: usize, radius: f64) -> f64 {
        t_tail_mass(d, radius)
    }

    fn analytic_mass(&self, d: usize) -> Option<f64> {
        Some(t_mass(d))
    }
}

/// Midpoint rule in `(ln ρ, θ)` over the shell `rho_min ≤ ‖y‖ ≤ rho_max` in
/// dimension 1 or 2.
fn log_polar_integral(
    d: usize,
    rho_min: f64,
    rho_max: f64,
    dlog: f64,
    angles: usize,
    g: impl Fn(&[f64]) -> f64 + Sync,
) -> f64 {
    let steps = ((rho_max / rho_min).ln() / dlog).ceil().max(1.0) as usize;
    let dlog = (rho_max / rho_min).ln() / steps as f64;
    let shells: Vec<f64> = (0..steps)
        .into_par_iter()
        .map(|i| {
            let rho = rho_min * ((i as f64 + 0.5) * dlog).exp();
            let ring = if d == 1 {
                g(&[rho]) + g(&[-rho])
            } else {
                let dtheta = 2.0 * PI / angles as f64;
                let vals: Vec<f64> = (0..angles)
                    .map(|k| {
                        let th = (k as f64 + 0.5) * dtheta;
                        g(&[rho * th.cos(), rho * th.sin()])
                    })
                    .collect();
                pairwise_sum(&vals) * rho * dtheta
            };
            ring * rho * dlog
        })
        .collect();
    pairwise_sum(&shells)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftIntegral {
    pub r: f64,
    pub a: f64,
    pub a_over_log: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZoReport {
    pub d: usize,
    /// `∫ φ` by quadrature.
    pub c1: f64,
    pub c1_analytic: Option<f64>,
    /// `max_R R ∫_{‖y‖≥R} φ` over dyadic `R`.
    pub c2_worst: f64,
    /// `max_x ∫ |φ(y-x) - φ(y)| dy / ‖x‖` over small `x`.
    pub c3_slope: f64,
    pub shifts: Vec<ShiftIntegral>,
}

const ZO_RHO_MIN: f64 = 1e-6;
const ZO_RHO_MAX: f64 = 4096.0;

/// Integrates the three kernel conditions and the Hörmander-type integral
/// `A(r) = sup_x ∫_{‖y‖≥2‖x‖} sup_j |k_j(y-x) - k_j(y)| dy` for shifts `r·e_1`.
pub fn zo_kernel_check(kernel: &dyn RadialKernel, d: usize, shifts: &[f64]) -> Result<ZoReport> {
    if !(1..=2).contains(&d) {
        return Err(param("kernel quadrature supports d = 1 or 2"));
    }
    let phi = |y: &[f64]| kernel.profile(y.iter().map(|v| v * v).sum::<f64>().sqrt());
    let inner_ball = kernel.profile(0.0) * crate::control::kernels::ball_volume(d) * ZO_RHO_MIN.powi(d as i32);
    let c1 = log_polar_integral(d, ZO_RHO_MIN, ZO_RHO_MAX, 1.0 / 64.0, 256, phi)
        + kernel.tail_mass(d, ZO_RHO_MAX)
        + inner_ball;

    let c2_worst = (-2..=10)
        .map(|k| {
            let r = 2f64.powi(k);
            let mass = log_polar_integral(d, r, ZO_RHO_MAX, 1.0 / 64.0, 256, phi) + kernel.tail_mass(d, ZO_RHO_MAX);
            r * mass
        })
        .fold(0.0, f64::max);

    let c3_slope = (0..=6)
        .flat_map(|k| [(k, 0usize), (k, 1usize)])
        .filter(|&(_, dir)| dir < d)
        .map(|(k, dir)| {
            let len = 2f64.powi(-k);
            let mut x = vec![0.0; d];
            x[dir] = len;
            let diff = |y: &[f64]| {
                let ym: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
                (phi(&ym) - phi(y)).abs()
            };
            log_polar_integral(d, ZO_RHO_MIN, ZO_RHO_MAX, 1.0 / 256.0, 1024, diff) / len
        })
        .fold(0.0, f64::max);

    let shifts = shifts
        .iter()
        .map(|&r| {
            let a = shift_integral(kernel, d, r);
            ShiftIntegral { r, a, a_over_log: a / (2.0 + r).ln() }
        })
        .collect();

    Ok(ZoReport { d, c1, c1_analytic: kernel.analytic_mass(d), c2_worst, c3_slope, shifts })
}

fn shift_integral(kernel: &dyn RadialKernel, d: usize, r: f64) -> f64 {
    let j_lo = -6;
    let j_hi = (r + 2.0).log2().ceil() as i32 + 4;
    let dlog = 1.0 / (4.0 * (r + 4.0));
    let angles = (8.0 * PI * (r + 4.0)).ceil() as usize;
    let rho_max = 2f64.powi(-j_lo) * (r + 4.0) * 8.0;
    let probes: Vec<Vec<f64>> = if d == 1 {
        vec![vec![1.0], vec![-1.0]]
    } else {
        vec![vec![1.0, 0.0], vec![0.0, 1.0]]
    };
    probes
        .iter()
        .map(|x| {
            let g = |y: &[f64]| {
                let mut best = 0.0f64;
                for j in j_lo..=j_hi {
                    let s = 2f64.powi(j);
                    let k = |z: &[f64]| {
                        let mut n2 = 0.0;
                        for (a, &v) in z.iter().enumerate() {
                            let c = s * v + if a == 0 { r } else { 0.0 };
                            n2 += c * c;
                        }
                        s.powi(d as i32) * kernel.profile(n2.sqrt())
                    };
                    let ym: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
                    best = best.max((k(&ym) - k(y)).abs());
                }
                best
            };
            log_polar_integral(d, 2.0, rho_max, dlog, angles, g)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogBoundRow {
    pub shift: Vec<f64>,
    pub r: f64,
    /// `None` when the input is zero.
    pub ratio: Option<f64>,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogBoundReport {
    pub rows: Vec<LogBoundRow>,
    /// `K = m(r_0)/ln(2+‖r_0‖)` at the smallest nonzero shift.
    pub k: Option<f64>,
    pub slack: f64,
    pub monotone: bool,
    pub zero_input: bool,
}

impl LogBoundReport {
    pub fn probe_rows(&self, params: &TLParams) -> Vec<ProbeRow> {
        self.rows
            .iter()
            .map(|row| ProbeRow {
                probe: "log-bound".into(),
                r: row.r,
                p: params.p,
                q: params.q,
                measured: row.ratio.unwrap_or(f64::NAN),
                bound: row.bound,
                pass: row.pass,
            })
            .collect()
    }
}

/// For each shift `r`, the ratio of `‖ ‖2^{αj} T_j|Δ_j f|(·+2^{-j}r)‖_{ℓ^q} ‖_{L^p}`
/// to the norm of `f`, checked against `slack · K · ln(2+‖r‖)`.
pub fn log_bound_probe(
    decomp: &LPDecomposition,
    params: &TLParams,
    shifts: &[Vec<f64>],
    slack: f64,
) -> Result<LogBoundReport> {
    let spec = decomp.spec();
    let weights = band_weights(decomp, params.alpha);
    let input = tl_norm(decomp, params)?;
    let zero_input = input == 0.0;
    let mut measured = Vec::new();
    for shift in shifts {
        let family = ShiftedKernelFamily::for_t(spec, shift, decomp.j_min(), decomp.j_max())?;
        let out = shifted_maximal(decomp.bands(), &family)?;
        let fields: Vec<Vec<f64>> = out.per_band.iter().map(|b| b.real_parts()).collect();
        let num = mixed_norm(spec, &fields, &weights, params.p, params.q)?;
        let r = shift.iter().map(|v| v * v).sum::<f64>().sqrt();
        measured.push((r, (!zero_input).then(|| num / input)));
    }
    let k = measured
        .iter()
        .filter(|(r, m)| *r > 0.0 && m.is_some())
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(r, m)| m.unwrap() / (2.0 + r).ln());
    let rows: Vec<LogBoundRow> = shifts
        .iter()
        .zip(&measured)
        .map(|(shift, &(r, ratio))| {
            let bound = k.map_or(f64::NAN, |k| slack * k * (2.0 + r).ln());
            let pass = match (ratio, k) {
                (Some(m), Some(_)) => m <= bound,
                (Some(m), None) => m.is_finite(),
                (None, _) => true,
            };
            LogBoundRow { shift: shift.clone(), r, ratio, bound, pass }
        })
        .collect();
    let mut sorted: Vec<(f64, f64)> = measured.iter().filter_map(|&(r, m)| m.map(|m| (r, m))).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = sorted.windows(2).all(|w| w[1].1 >= w[0].1 * (1.0 - 1e-12));
    Ok(LogBoundReport { rows, k, slack, monotone, zero_input })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::littlewood_paley::default_filter_bank;

    fn spec2(n: usize) -> GridSpec {
        GridSpec::standard(2, n).unwrap()
    }

    #[test]
    fn tl_norm_of_single_mode() {
        let spec = spec2(64);
        let bank = default_filter_bank(&spec).unwrap();
        let f = GridFunction::mode(spec, &[1, 0]).unwrap();
        for alpha in [0.5, 1.0, 3.0] {
            let v = tl_norm_of(&bank, &f, &TLParams::new(alpha, 2.0, 2.0).unwrap()).unwrap();
            assert!((v - 2.0 * PI).abs() < 1e-12, "{v}");
        }
        let zero = GridFunction::zeros(spec);
        assert_eq!(tl_norm_of(&bank, &zero, &TLParams::new(1.0, 2.0, 2.0).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn tl_params_validation() {
        assert!(TLParams::new(1.0, 1.0, 2.0).is_err());
        assert!(TLParams::new(1.0, 2.0, f64::INFINITY).is_err());
        assert!(TLParams::new(1.0, 2.0, 2.0).unwrap().is_critical(2));
    }

    #[test]
    fn maximal_of_constant_is_constant() {
        let spec = spec2(16);
        let f = GridFunction::constant(spec, Complex64::new(-3.0, 4.0));
        let m = hl_maximal(&f);
        assert!(m.samples().iter().all(|z| (z.re - 5.0).abs() < 1e-14 && z.im == 0.0));
    }

    #[test]
    fn window_helpers() {
        let line = [1.0, 5.0, 2.0, 0.0];
        let mut out = [0.0; 4];
        window_sums(&line, 2, &mut out);
        assert_eq!(out, [6.0, 7.0, 2.0, 1.0]);
        window_max(&line, 2, &mut out);
        assert_eq!(out, [1.0, 5.0, 5.0, 2.0]);
        window_max(&line, 4, &mut out);
        assert_eq!(out, [5.0; 4]);
    }

    #[test]
    fn spike_maximal_in_one_dimension() {
        let spec = GridSpec::standard(1, 8).unwrap();
        let mut v = vec![0.0; 8];
        v[0] = 1.0;
        let m = hl_maximal(&GridFunction::from_real(spec, v).unwrap());
        let got: Vec<f64> = m.real_parts();
        // distance 1 needs a cube of side 2, distances 2 and 3 side 4
        assert_eq!(got, vec![1.0, 0.5, 0.25, 0.25, 0.125, 0.25, 0.25, 0.5]);
    }

    #[test]
    fn shifted_family_masses_agree() {
        let spec = spec2(32);
        let fam = ShiftedKernelFamily::for_t(&spec, &[4.0, 0.0], 0, 3).unwrap();
        let m = fam.masses();
        for v in &m {
            assert!((v - m[0]).abs() < 1e-10 * m[0]);
        }
        assert!(fam.kernels().iter().all(|k| k.samples().iter().all(|z| z.re > 0.0)));
    }

    #[test]
    fn shifted_maximal_of_zero_and_mismatch() {
        let spec = spec2(16);
        let fam = ShiftedKernelFamily::for_t(&spec, &[0.0, 0.0], 0, 1).unwrap();
        let zeros = vec![GridFunction::zeros(spec); 2];
        let out = shifted_maximal(&zeros, &fam).unwrap();
        assert_eq!(out.sup.max_abs(), 0.0);
        assert!(shifted_maximal(&zeros[..1], &fam).is_err());
    }

    #[test]
    fn zo_rejects_high_dimension() {
        assert!(zo_kernel_check(&TKernel { d: 3 }, 3, &[]).is_err());
    }

    #[test]
    fn default_tail_matches_closed_form() {
        struct Plain;
        impl RadialKernel for Plain {
            fn profile(&self, rho: f64) -> f64 {
                t_radial(rho, 2)
            }
        }
        for r in [0.5f64, 1.0, 3.0, 100.0] {
            let r = r.max(1.0);
            let got = Plain.tail_mass(2, r);
            assert!((got - t_tail_mass(2, r)).abs() < 1e-6 * t_tail_mass(2, r), "{r}");
        }
    }
}
