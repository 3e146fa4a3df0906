//! Exact identities and measured estimates for the `h` and `g` parts.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ApproxParams, ApproxResult};
use crate::control::ControlFamily;
use crate::error::{param, Result};
use crate::grid::{spectral_derivative, GridFunction};
use crate::littlewood_paley::{default_filter_bank, decompose};
use crate::norms::tl_norm;

/// `V_j = Σ_{j'<j} x_{j'} Π_{j'<j''<j} (1 - w_{j''})` within each residue
/// class, via `V_next = V (1 - w) + x`.
pub fn prefix_fields(fields: &[GridFunction], weights: &[&[f64]], stride: usize) -> Vec<GridFunction> {
    let spec = *fields[0].spec();
    let mut running = vec![vec![Complex64::new(0.0, 0.0); spec.len()]; stride];
    let mut out = Vec::with_capacity(fields.len());
    for (i, (x, w)) in fields.iter().zip(weights).enumerate() {
        let acc = &mut running[i % stride];
        out.push(GridFunction::from_raw(spec, acc.clone()));
        for ((a, z), w) in acc.iter_mut().zip(x.samples()).zip(w.iter()) {
            *a = *a * (1.0 - w) + z;
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxDiagnostics {
    /// `max |h - h̃ - Σ U_j V_j| / max |h|`.
    pub h_identity_residual: f64,
    /// `max |g - g̃ - Σ G_j H_j| / max |g|`.
    pub g_identity_residual: f64,
    pub v_sup: f64,
    pub h_sup: f64,
    /// Both `|V_j|` and `|H_j|` are bounded by `C_low`.
    pub c_low: f64,
    pub v_ok: bool,
    pub h_ok: bool,
    /// `max_x (1 - Π_{j'<j} (1 - U_{j'}))`; never exceeds 1.
    pub u_partial_sup: f64,
    /// Largest excess of `G_j` over `min(2^{-αR}, 2^{-α(j-j_0)})/(1-2^{-αR})`.
    pub g_decay_excess: f64,
    pub smallness_regime: bool,
    /// `Σ_good ‖∂_i (h - h̃)‖ / (σ^3 2^{(-min(1,α)+κ/p)σ} ‖f‖)` at working scale.
    pub h_estimate_ratio: f64,
    /// `Σ_good ‖∂_i (g - g̃)‖ / (2^{-min(1, α a_α) R} ‖f‖)` at working scale.
    pub g_estimate_ratio: f64,
}

fn sup_relative(diff: &GridFunction, reference: &GridFunction) -> f64 {
    let r = reference.max_abs();
    if r > 0.0 {
        diff.max_abs() / r
    } else {
        diff.max_abs()
    }
}

fn weighted_sum(fields: &[GridFunction], weights: &[&[f64]]) -> GridFunction {
    let spec = *fields[0].spec();
    let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
    for (f, w) in fields.iter().zip(weights) {
        for ((o, z), w) in out.iter_mut().zip(f.samples()).zip(w.iter()) {
            *o += z * *w;
        }
    }
    GridFunction::from_raw(spec, out)
}

pub fn approx_diagnostics(result: &ApproxResult, params: &ApproxParams) -> Result<Option<ApproxDiagnostics>> {
    let Some(state) = &result.state else {
        return Ok(None);
    };
    let control: &ControlFamily = &state.control;
    let bands: Vec<i32> = (control.j_min()..=control.j_max()).collect();
    let u: Vec<&[f64]> = bands.iter().map(|&j| control.u(j)).collect();
    let g: Vec<&[f64]> = bands.iter().map(|&j| control.g(j)).collect();
    let r = params.r_stride as usize;
    if r != control.params().r_stride as usize {
        return Err(param("parameters do not match the retained control family"));
    }

    let h_sum = state.split.h_sum();
    let g_sum = state.split.g_sum();
    let v = prefix_fields(&state.split.h, &u, 1);
    let hh = prefix_fields(&state.split.g, &g, r);
    let h_gap = h_sum.sub(&state.h_tilde)?.sub(&weighted_sum(&v, &u))?;
    let g_gap = g_sum.sub(&state.g_tilde)?.sub(&weighted_sum(&hh, &g))?;

    let c_low = control.c_low();
    let v_sup = v.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
    let h_sup = hh.iter().map(|f| f.max_abs()).fold(0.0, f64::max);

    let len = control.spec().len();
    let mut prod = vec![1.0f64; len];
    let mut u_partial_sup = 0.0f64;
    for w in &u {
        for (p, &w) in prod.iter_mut().zip(w.iter()) {
            u_partial_sup = u_partial_sup.max(1.0 - *p);
            *p *= 1.0 - w;
        }
    }

    let omega_sup = bands
        .iter()
        .map(|&j| control.omega(j).iter().copied().fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let smallness_regime = omega_sup < 1.0;
    let alpha = params.alpha;
    let top = bands
        .iter()
        .copied()
        .filter(|&j| control.omega(j).iter().any(|&v| v > 0.0))
        .max();
    let decay = 2f64.powf(-alpha * r as f64);
    let g_decay_excess = match top {
        None => 0.0,
        Some(j0) => bands
            .iter()
            .map(|&j| {
                let cap = decay.min(2f64.powf(-alpha * (j - j0) as f64)) / (1.0 - decay);
                control.g(j).iter().map(|v| v - cap).fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::NEG_INFINITY, f64::max),
    };

    let spec = *control.spec();
    let bank = default_filter_bank(&spec)?;
    let lowered = params.tl().with_alpha(alpha - 1.0);
    let good: Vec<usize> = (0..params.good_dirs.len()).collect();
    let good_norm = |field: &GridFunction| -> Result<f64> {
        good.iter()
            .map(|&i| tl_norm(&decompose(&bank, &spectral_derivative(field, i, 1)?)?, &lowered))
            .sum()
    };
    let f_norm = result.scale_used;
    let sigma = params.sigma as f64;
    let kappa = params.kappa as f64;
    let h_rate = sigma.powi(3) * 2f64.powf((-alpha.min(1.0) + kappa / params.p) * sigma);
    let g_rate = 2f64.powf(-(alpha * params.a_alpha).min(1.0) * params.r_stride as f64);
    let h_err = good_norm(&h_sum.sub(&state.h_tilde)?)?;
    let g_err = good_norm(&g_sum.sub(&state.g_tilde)?)?;

    Ok(Some(ApproxDiagnostics {
        h_identity_residual: sup_relative(&h_gap, &h_sum),
        g_identity_residual: sup_relative(&g_gap, &g_sum),
        v_sup,
        h_sup,
        c_low,
        v_ok: v_sup <= c_low,
        h_ok: h_sup <= c_low,
        u_partial_sup,
        g_decay_excess,
        smallness_regime,
        h_estimate_ratio: h_err / (h_rate * f_norm),
        g_estimate_ratio: g_err / (g_rate * f_norm),
    }))
}
