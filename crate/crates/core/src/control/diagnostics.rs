//! Measured versions of the control-function estimates.

use serde::{Deserialize, Serialize};

use super::omega::ControlFamily;
use crate::error::{param, Result};
use crate::grid::{centered_difference, lp_norm_values, GridFunction};
use crate::littlewood_paley::LPDecomposition;
use crate::norms::{hl_maximal, mixed_norm, tl_norm, TLParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandDiagnostics {
    pub j: i32,
    pub empty: bool,
    /// `max ω_j / (2^{κσ} M M Δ_j f)`.
    pub maximal_ratio: f64,
    /// `‖ω_j‖_∞ / (2^{κσ} ‖Δ_j f‖_∞)`.
    pub sup_ratio: f64,
    /// `max |∂_good ω_j| / (2^j ω_j)`; scales like `2^{-σ}`.
    pub good_derivative_raw: f64,
    /// The same divided by `2^{-σ}`.
    pub good_derivative: f64,
    /// `max |∂_bad ω_j| / (2^j ω_j)`.
    pub bad_derivative: f64,
    /// `max |∂_good ζ_j| / 2^{j-σ}`.
    pub zeta_good_derivative: f64,
    /// `max |Δ_j f| / ω_j`, to be compared with `C_low`.
    pub domination_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlDiagnostics {
    pub bands: Vec<BandDiagnostics>,
    pub c_low: f64,
    pub domination_holds: bool,
    /// `‖ ‖2^{αj} ω_j‖_{ℓ^q} ‖_{L^p} / (2^{κσ} ‖f‖)`.
    pub integral_ratio: f64,
    /// `‖sup_j 2^{αj} ω_j‖_{L^p} / (σ 2^{κσ/p} ‖f‖)`.
    pub sup_ratio: f64,
    /// Worst `LHS - 3R sup` of the selected-terms inequality, relative to `sup`.
    pub selected_terms_excess: f64,
    pub selected_terms_hold: bool,
    /// `max_j ‖ω_j‖_∞`; the smallness regime needs it below 1.
    pub omega_sup: f64,
}

/// Pointwise `Σ_m a_m 1{a_m > ½ Σ_{k<m, k≡m} a_k}` and `sup_m a_m` with
/// `a_m = 2^{αm} ω_m(x)`.
pub fn selected_terms(family: &ControlFamily) -> (Vec<f64>, Vec<f64>) {
    let params = family.params();
    let r = params.r_stride as i32;
    let len = family.spec().len();
    let mut lhs = vec![0.0; len];
    let mut sup = vec![0.0f64; len];
    let mut class_sums = vec![vec![0.0; len]; r as usize];
    for j in family.j_min()..=family.j_max() {
        let w = 2f64.powf(params.alpha * j as f64);
        let class = &mut class_sums[(j - family.j_min()).rem_euclid(r) as usize];
        for (x, &o) in family.omega(j).iter().enumerate() {
            let a = w * o;
            if a > 0.5 * class[x] {
                lhs[x] += a;
            }
            class[x] += a;
            sup[x] = sup[x].max(a);
        }
    }
    (lhs, sup)
}

fn ratio_max(num: &[f64], den: &[f64]) -> f64 {
    num.iter()
        .zip(den)
        .filter(|(_, &d)| d > 0.0)
        .map(|(n, d)| n.abs() / d)
        .fold(0.0, f64::max)
}

pub fn control_diagnostics(
    family: &ControlFamily,
    decomp: &LPDecomposition,
    tl: &TLParams,
) -> Result<ControlDiagnostics> {
    let spec = *family.spec();
    spec.check_same(decomp.spec())?;
    if decomp.j_min() != family.j_min() || decomp.j_max() != family.j_max() {
        return Err(param("control family and decomposition cover different bands"));
    }
    let params = family.params();
    let d = spec.d();
    let sigma = params.sigma as f64;
    let kappa = params.kappa as f64;
    let amp = 2f64.powf(kappa * sigma);
    let bad_dirs: Vec<usize> = (0..d).filter(|a| !params.good_dirs.contains(a)).collect();

    let mut bands = Vec::new();
    let mut omega_sup = 0.0f64;
    for (j, band) in decomp.band_indices().zip(decomp.bands()) {
        let om = family.omega(j);
        omega_sup = omega_sup.max(om.iter().copied().fold(0.0, f64::max));
        let band_sup = band.max_abs();
        if band_sup == 0.0 {
            bands.push(BandDiagnostics {
                j,
                empty: true,
                maximal_ratio: 0.0,
                sup_ratio: 0.0,
                good_derivative_raw: 0.0,
                good_derivative: 0.0,
                bad_derivative: 0.0,
                zeta_good_derivative: 0.0,
                domination_ratio: 0.0,
            });
            continue;
        }
        let mm = hl_maximal(&hl_maximal(band)).real_parts();
        let scaled_mm: Vec<f64> = mm.iter().map(|v| amp * v).collect();
        let scale_j = 2f64.powi(j);
        let denom: Vec<f64> = om.iter().map(|v| scale_j * v).collect();
        let deriv_ratio = |axes: &[usize], field: &[f64], den: &[f64]| {
            axes.iter()
                .map(|&a| ratio_max(&centered_difference(&spec, field, a), den))
                .fold(0.0, f64::max)
        };
        let good_raw = deriv_ratio(&params.good_dirs, om, &denom);
        let ones = vec![scale_j * 2f64.powf(-sigma); spec.len()];
        bands.push(BandDiagnostics {
            j,
            empty: false,
            maximal_ratio: ratio_max(om, &scaled_mm),
            sup_ratio: om.iter().copied().fold(0.0, f64::max) / (amp * band_sup),
            good_derivative_raw: good_raw,
            good_derivative: good_raw * 2f64.powf(sigma),
            bad_derivative: deriv_ratio(&bad_dirs, om, &denom),
            zeta_good_derivative: deriv_ratio(&params.good_dirs, family.zeta(j), &ones),
            domination_ratio: ratio_max(&band.abs_values(), om),
        });
    }
    let c_low = family.c_low();
    let domination_holds = bands.iter().all(|b| b.domination_ratio <= c_low);

    let norm = tl_norm(decomp, tl)?;
    let weights: Vec<f64> = decomp.band_indices().map(|j| 2f64.powf(params.alpha * j as f64)).collect();
    let integral = mixed_norm(&spec, family.omegas(), &weights, tl.p, tl.q)?;
    let (lhs, sup) = selected_terms(family);
    let sup_norm = lp_norm_values(&spec, &sup, tl.p)?;
    let three_r = 3.0 * params.r_stride as f64;
    let selected_terms_excess = lhs
        .iter()
        .zip(&sup)
        .map(|(l, s)| if *s > 0.0 { (l - three_r * s) / s } else { *l })
        .fold(f64::NEG_INFINITY, f64::max);
    let (integral_ratio, sup_ratio) = if norm > 0.0 {
        (integral / (amp * norm), sup_norm / (sigma * 2f64.powf(kappa * sigma / tl.p) * norm))
    } else {
        (0.0, 0.0)
    };
    Ok(ControlDiagnostics {
        bands,
        c_low,
        domination_holds,
        integral_ratio,
        sup_ratio,
        selected_terms_excess,
        selected_terms_hold: selected_terms_excess <= 1e-12,
        omega_sup,
    })
}

/// `MM Δ_j f`, exposed for probes.
pub fn double_maximal(band: &GridFunction) -> GridFunction {
    hl_maximal(&hl_maximal(band))
}
