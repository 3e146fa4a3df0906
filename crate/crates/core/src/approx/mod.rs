//! Bounded approximation of a critical Triebel-Lizorkin function: the `h/g`
//! split, the telescoping products `h̃`, `g̃`, and the rescaling wrapper.

pub mod diagnostics;

use serde::{Deserialize, Serialize};

use crate::control::{ControlFamily, ControlKernels, ControlParams};
use crate::error::{param, Result};
use crate::grid::{forward_transform, spectral_derivative, GridFunction, GridSpec};
use crate::littlewood_paley::{decompose, default_filter_bank, wavenumber_norm, FilterBank, LPDecomposition};
use crate::norms::{tl_norm, TLParams};
use crate::sum::NeumaierSum;

pub use diagnostics::{approx_diagnostics, ApproxDiagnostics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxParams {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub d: usize,
    pub delta: f64,
    pub kappa: usize,
    pub sigma: u32,
    pub r_stride: u32,
    pub a_alpha: f64,
    pub eta_margin: f64,
    /// 0-based good axes.
    pub good_dirs: Vec<usize>,
    /// Smallest `σ` meeting both accuracy inequalities for `δ`.
    pub sigma_target: u32,
    /// Whether `σ` was lowered to the cap.
    pub sigma_capped: bool,
}

/// `a_α = 1` for `α ≥ 1`, else `min(α, α/(2(1-α)))`.
pub fn a_alpha(alpha: f64) -> f64 {
    if alpha >= 1.0 {
        1.0
    } else {
        alpha.min(alpha / (2.0 * (1.0 - alpha)))
    }
}

/// `R = ⌈(κ+1) σ / min(1, α a_α)⌉`.
pub fn residue_stride(kappa: usize, sigma: u32, alpha: f64) -> u32 {
    let x = (kappa as f64 + 1.0) * sigma as f64 / (alpha * a_alpha(alpha)).min(1.0);
    (x - 1e-9).ceil() as u32
}

/// Largest `σ` whose anisotropic lattice sums stay affordable on `spec`.
pub fn sigma_max(spec: &GridSpec) -> u32 {
    (spec.n() / 8).max(1).trailing_zeros().max(1)
}

fn sigma_for_delta(alpha: f64, p: f64, kappa: usize, delta: f64) -> Result<u32> {
    let rate = -alpha.min(1.0) + kappa as f64 / p;
    for s in 1..=100_000u32 {
        let sf = s as f64;
        if sf.powi(3) * 2f64.powf(rate * sf) <= delta / 2.0 && sf * 2f64.powf(-sf) <= delta / 2.0 {
            return Ok(s);
        }
    }
    Err(param(format!("no sigma reaches delta = {delta}")))
}

/// Derives `κ`, `σ`, `R`, `a_α` from `(α, p, q, d, δ)`.
pub fn select_parameters(
    alpha: f64,
    p: f64,
    q: f64,
    d: usize,
    delta: f64,
    sigma_override: Option<u32>,
    sigma_cap: Option<u32>,
) -> Result<ApproxParams> {
    TLParams::new(alpha, p, q)?;
    if d == 0 {
        return Err(param("dimension must be positive"));
    }
    if (alpha * p - d as f64).abs() > 1e-12 * d as f64 {
        return Err(param(format!("alpha * p = {} differs from d = {d}", alpha * p)));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(param("delta must be positive"));
    }
    let bound = p.min(d as f64);
    let kappa = (bound.ceil() - 1.0).max(0.0) as usize;
    if kappa == 0 || kappa > d - 1 {
        return Err(param(format!("no good direction exists: kappa would be {kappa} for d = {d}")));
    }
    let sigma_target = sigma_for_delta(alpha, p, kappa, delta)?;
    let (sigma, sigma_capped) = match (sigma_override, sigma_cap) {
        (Some(s), _) if s >= 1 => (s, false),
        (Some(_), _) => return Err(param("sigma must be at least 1")),
        (None, Some(cap)) if sigma_target > cap => (cap.max(1), true),
        (None, _) => (sigma_target, false),
    };
    let a = a_alpha(alpha);
    let r_stride = residue_stride(kappa, sigma, alpha);
    if alpha * r_stride as f64 <= 1.0 {
        return Err(param("alpha * R must exceed 1"));
    }
    Ok(ApproxParams {
        alpha,
        p,
        q,
        d,
        delta,
        kappa,
        sigma,
        r_stride,
        a_alpha: a,
        eta_margin: 0.5,
        good_dirs: (0..kappa).collect(),
        sigma_target,
        sigma_capped,
    })
}

impl ApproxParams {
    pub fn tl(&self) -> TLParams {
        TLParams { alpha: self.alpha, p: self.p, q: self.q }
    }

    pub fn control(&self) -> ControlParams {
        ControlParams {
            sigma: self.sigma,
            kappa: self.kappa,
            r_stride: self.r_stride,
            alpha: self.alpha,
            p: self.p,
            good_dirs: self.good_dirs.clone(),
        }
    }

    /// Same parameters with another `σ`, recomputing `R`.
    pub fn with_sigma(&self, sigma: u32) -> Self {
        Self {
            sigma,
            r_stride: residue_stride(self.kappa, sigma, self.alpha),
            sigma_capped: false,
            ..self.clone()
        }
    }

    pub fn with_good_dirs(&self, good_dirs: Vec<usize>) -> Self {
        Self { good_dirs, ..self.clone() }
    }

    fn validate(&self, spec: &GridSpec) -> Result<()> {
        if spec.d() != self.d {
            return Err(param(format!("parameters are for d = {}, grid has d = {}", self.d, spec.d())));
        }
        if !(self.eta_margin > 0.0 && self.eta_margin < 1.0) {
            return Err(param("eta_margin must lie in (0, 1)"));
        }
        self.control().validate(spec.d())
    }

    /// Axis order placing the good directions first.
    fn canonical_perm(&self) -> Vec<usize> {
        let mut good = self.good_dirs.clone();
        good.sort_unstable();
        let bad = (0..self.d).filter(|a| !good.contains(a));
        good.iter().copied().chain(bad).collect()
    }
}

/// `h_j = (1-ζ_j) Δ_j f` and `g_j = ζ_j Δ_j f`.
#[derive(Debug, Clone)]
pub struct SplitBands {
    pub j_min: i32,
    pub h: Vec<GridFunction>,
    pub g: Vec<GridFunction>,
}

impl SplitBands {
    pub fn h_sum(&self) -> GridFunction {
        sum_fields(&self.h)
    }

    pub fn g_sum(&self) -> GridFunction {
        sum_fields(&self.g)
    }
}

fn sum_fields(fields: &[GridFunction]) -> GridFunction {
    let mut out = GridFunction::zeros(*fields[0].spec());
    for f in fields {
        out.axpy(1.0, f).expect("fields share the grid");
    }
    out
}

fn scale_pointwise(f: &GridFunction, w: &[f64]) -> GridFunction {
    let samples = f.samples().iter().zip(w).map(|(z, w)| z * *w).collect();
    GridFunction::from_raw(*f.spec(), samples)
}

pub fn split(decomp: &LPDecomposition, control: &ControlFamily) -> Result<SplitBands> {
    decomp.spec().check_same(control.spec())?;
    if decomp.j_min() != control.j_min() || decomp.j_max() != control.j_max() {
        return Err(param("control family and decomposition cover different bands"));
    }
    let mut h = Vec::new();
    let mut g = Vec::new();
    for (j, band) in decomp.band_indices().zip(decomp.bands()) {
        let zeta = control.zeta(j);
        let one_minus: Vec<f64> = zeta.iter().map(|z| 1.0 - z).collect();
        h.push(scale_pointwise(band, &one_minus));
        g.push(scale_pointwise(band, zeta));
    }
    Ok(SplitBands { j_min: decomp.j_min(), h, g })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionIdentity {
    pub lhs: f64,
    /// `Σ_i a_i Π_{i'<i} (1 - a_{i'})`.
    pub sum_part: f64,
    /// `Π_i (1 - a_i)`.
    pub prod_part: f64,
}

/// Both sides of the telescoping identity for a finite sequence.
pub fn partition_identity_eval(a: &[f64]) -> PartitionIdentity {
    let mut prod = 1.0;
    let mut sum = NeumaierSum::new();
    for &v in a {
        sum.add(v * prod);
        prod *= 1.0 - v;
    }
    PartitionIdentity { lhs: 1.0, sum_part: sum.value(), prod_part: prod }
}

/// `Σ_j x_j Π_{j'>j, j'≡j mod stride} (1 - w_{j'})` by suffix products.
fn damped_sum(fields: &[GridFunction], weights: &[&[f64]], stride: usize) -> GridFunction {
    let spec = *fields[0].spec();
    let mut out = vec![num_complex::Complex64::new(0.0, 0.0); spec.len()];
    let mut suffix = vec![vec![1.0f64; spec.len()]; stride];
    for i in (0..fields.len()).rev() {
        let prod = &mut suffix[i % stride];
        for ((o, z), (p, w)) in out
            .iter_mut()
            .zip(fields[i].samples())
            .zip(prod.iter_mut().zip(weights[i]))
        {
            *o += z * *p;
            *p *= 1.0 - w;
        }
    }
    GridFunction::from_raw(spec, out)
}

/// `h̃ = Σ_j h_j Π_{j'>j} (1 - U_{j'})`.
pub fn build_h_tilde(h: &[GridFunction], control: &ControlFamily) -> Result<GridFunction> {
    if h.len() != control.band_count() {
        return Err(param("band count mismatch"));
    }
    let u: Vec<&[f64]> = (control.j_min()..=control.j_max()).map(|j| control.u(j)).collect();
    Ok(damped_sum(h, &u, 1))
}

/// `g̃ = Σ_j g_j Π_{j'>j, j'≡j mod R} (1 - G_{j'})`.
pub fn build_g_tilde(g: &[GridFunction], control: &ControlFamily) -> Result<GridFunction> {
    if g.len() != control.band_count() {
        return Err(param("band count mismatch"));
    }
    let gg: Vec<&[f64]> = (control.j_min()..=control.j_max()).map(|j| control.g(j)).collect();
    Ok(damped_sum(g, &gg, control.params().r_stride as usize))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Budgets {
    pub h_tilde_sup: f64,
    pub h_bound: f64,
    pub h_ok: bool,
    pub g_tilde_sup: f64,
    pub g_bound: f64,
    pub g_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxReport {
    pub params: ApproxParams,
    pub zero_input: bool,
    pub tl_norm_f: f64,
    pub sup_f: f64,
    pub tl_norm_approx: f64,
    pub sup_approx: f64,
    /// `max_j max(‖ω_j‖_∞, ‖Δ_j f‖_∞)` for the unit-normalized input.
    pub smallness_s: f64,
    /// Working-scale factor `θ`.
    pub theta: f64,
    pub c_low: f64,
    pub budgets: Budgets,
    /// `‖∂_i (f - F)‖` with smoothness `α - 1`, per axis.
    pub direction_errors: Vec<f64>,
    /// Good-direction errors summed, over `‖f‖`.
    pub good_error: f64,
    /// All-direction errors summed, over `‖f‖`.
    pub all_error: f64,
    /// Fraction of the (mean-free) spectral energy outside the band range.
    pub uncovered_fraction: f64,
    pub sigma_max: u32,
    pub sigma_over_cap: bool,
}

/// Pipeline state at working scale, in the canonical axis order (good axes first).
#[derive(Debug, Clone)]
pub struct ApproxState {
    pub perm: Vec<usize>,
    pub decomp: LPDecomposition,
    pub control: ControlFamily,
    pub split: SplitBands,
    pub h_tilde: GridFunction,
    pub g_tilde: GridFunction,
}

#[derive(Debug, Clone)]
pub struct ApproxResult {
    /// The bounded approximant `F`.
    pub f_approx: GridFunction,
    /// `h̃`, `g̃` at working scale, in the input's axis order.
    pub h_tilde: GridFunction,
    pub g_tilde: GridFunction,
    /// `F = (g̃ + h̃) · norm_scale / scale_used`.
    pub scale_used: f64,
    pub norm_scale: f64,
    pub report: ApproxReport,
    pub state: Option<ApproxState>,
}

/// A filter bank and control kernels prepared for one parameter set.
#[derive(Debug, Clone)]
pub struct Approximator {
    bank: FilterBank,
    kernels: ControlKernels,
    params: ApproxParams,
    canonical: ApproxParams,
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

fn inverse_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (a, &p) in perm.iter().enumerate() {
        inv[p] = a;
    }
    inv
}

impl Approximator {
    pub fn new(spec: &GridSpec, params: &ApproxParams) -> Result<Self> {
        Self::with_bank(default_filter_bank(spec)?, params)
    }

    pub fn with_bank(bank: FilterBank, params: &ApproxParams) -> Result<Self> {
        let spec = *bank.spec();
        params.validate(&spec)?;
        let perm = params.canonical_perm();
        let inverse = inverse_perm(&perm);
        let canonical = params.with_good_dirs((0..params.good_dirs.len()).collect());
        let kernels = ControlKernels::new(&spec, &canonical.control(), bank.j_min(), bank.j_max())?;
        Ok(Self { bank, kernels, params: params.clone(), canonical, perm, inverse })
    }

    pub fn params(&self) -> &ApproxParams {
        &self.params
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn kernels(&self) -> &ControlKernels {
        &self.kernels
    }

    pub fn approximate(&self, f: &GridFunction) -> Result<ApproxResult> {
        let spec = *self.bank.spec();
        spec.check_same(f.spec())?;
        let tl = self.params.tl();
        let fc = f.permute_axes(&self.perm)?;
        let decomp = decompose(&self.bank, &fc)?;
        let norm = tl_norm(&decomp, &tl)?;
        let s_max = sigma_max(&spec);
        let over_cap = self.params.sigma > s_max;
        let uncovered_fraction = uncovered_fraction(&self.bank, &fc);

        if norm == 0.0 {
            let zero = GridFunction::zeros(spec);
            let direction_errors = (0..spec.d())
                .map(|i| {
                    let e = spectral_derivative(f, i, 1)?;
                    tl_norm(&decompose(&self.bank, &e)?, &tl.with_alpha(tl.alpha - 1.0))
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(ApproxResult {
                f_approx: zero.clone(),
                h_tilde: zero.clone(),
                g_tilde: zero,
                scale_used: 1.0,
                norm_scale: 0.0,
                report: ApproxReport {
                    params: self.params.clone(),
                    zero_input: true,
                    tl_norm_f: 0.0,
                    sup_f: f.max_abs(),
                    tl_norm_approx: 0.0,
                    sup_approx: 0.0,
                    smallness_s: 0.0,
                    theta: 1.0,
                    c_low: self.kernels.c_low(),
                    budgets: Budgets {
                        h_tilde_sup: 0.0,
                        h_bound: self.kernels.c_low(),
                        h_ok: true,
                        g_tilde_sup: 0.0,
                        g_bound: self.kernels.c_low() * self.params.r_stride as f64,
                        g_ok: true,
                    },
                    good_error: 0.0,
                    all_error: 0.0,
                    direction_errors,
                    uncovered_fraction,
                    sigma_max: s_max,
                    sigma_over_cap: over_cap,
                },
                state: None,
            });
        }

        // smallness is measured on the unit-normalized input
        let unit = decomp.scaled(1.0 / norm);
        let unit_control = ControlFamily::build(&unit, &self.kernels)?;
        let s = unit
            .band_indices()
            .zip(unit.bands())
            .map(|(j, b)| {
                let om = unit_control.omega(j).iter().copied().fold(0.0, f64::max);
                om.max(b.max_abs())
            })
            .fold(0.0, f64::max);
        let theta = self.params.eta_margin / s.max(1.0);
        let working = unit.scaled(theta);
        let control = ControlFamily::build(&working, &self.kernels)?;
        let split = split(&working, &control)?;
        let h_tilde = build_h_tilde(&split.h, &control)?;
        let g_tilde = build_g_tilde(&split.g, &control)?;
        let factor = norm / theta;
        let f_canon = h_tilde.add(&g_tilde)?.scale(factor);

        let c_low = self.kernels.c_low();
        let h_sup = h_tilde.max_abs();
        let g_sup = g_tilde.max_abs();
        let r = self.params.r_stride as f64;
        let budgets = Budgets {
            h_tilde_sup: h_sup,
            h_bound: c_low,
            h_ok: h_sup <= c_low,
            g_tilde_sup: g_sup,
            g_bound: c_low * r,
            g_ok: g_sup <= c_low * r,
        };

        let f_approx = f_canon.permute_axes(&self.inverse)?;
        let lowered = tl.with_alpha(tl.alpha - 1.0);
        let diff = f.sub(&f_approx)?;
        let direction_errors = (0..spec.d())
            .map(|i| tl_norm(&decompose(&self.bank, &spectral_derivative(&diff, i, 1)?)?, &lowered))
            .collect::<Result<Vec<_>>>()?;
        let good_error = self.params.good_dirs.iter().map(|&i| direction_errors[i]).sum::<f64>() / norm;
        let all_error = direction_errors.iter().sum::<f64>() / norm;
        let tl_norm_approx = tl_norm(&decompose(&self.bank, &f_approx)?, &tl)?;

        let report = ApproxReport {
            params: self.params.clone(),
            zero_input: false,
            tl_norm_f: norm,
            sup_f: f.max_abs(),
            tl_norm_approx,
            sup_approx: f_approx.max_abs(),
            smallness_s: s,
            theta,
            c_low,
            budgets,
            direction_errors,
            good_error,
            all_error,
            uncovered_fraction,
            sigma_max: s_max,
            sigma_over_cap: over_cap,
        };
        Ok(ApproxResult {
            f_approx,
            h_tilde: h_tilde.permute_axes(&self.inverse)?,
            g_tilde: g_tilde.permute_axes(&self.inverse)?,
            scale_used: theta,
            norm_scale: norm,
            report,
            state: Some(ApproxState {
                perm: self.perm.clone(),
                decomp: working,
                control,
                split,
                h_tilde,
                g_tilde,
            }),
        })
    }

    /// Parameters as used internally, with good axes first.
    pub fn canonical_params(&self) -> &ApproxParams {
        &self.canonical
    }
}

/// Spectral energy of `f - mean` at frequencies no band covers, relative to the total.
fn uncovered_fraction(bank: &FilterBank, f: &GridFunction) -> f64 {
    let spec = *bank.spec();
    let coeffs = forward_transform(f);
    let mut total = 0.0;
    let mut outside = 0.0;
    spec.for_each_frequency(|k, xi| {
        if k == 0 {
            return;
        }
        let e = coeffs.coefficients()[k].norm_sqr();
        total += e;
        if !bank.covers(wavenumber_norm(&spec, xi)) {
            outside += e;
        }
    });
    if total > 0.0 {
        outside / total
    } else {
        0.0
    }
}

pub fn approximate(f: &GridFunction, params: &ApproxParams) -> Result<ApproxResult> {
    Approximator::new(f.spec(), params)?.approximate(f)
}
