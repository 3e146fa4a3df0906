//! Differential forms on the torus, the spectral minimal-norm solve of
//! `dλ = ω`, and the geometric iteration for a bounded `ψ` with `dψ = dφ`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::{ApproxParams, Approximator};
use crate::error::{param, Error, Result};
use crate::grid::{
    derivative_wavenumber, forward_transform, inverse_transform, spectral_derivative, GridFunction, GridSpec,
    SpectralField,
};
use crate::io::{load_gfn, save_gfn, GFN_EXTENSION};
use crate::littlewood_paley::{decompose, default_filter_bank, reconstruct, FilterBank};
use crate::norms::{tl_norm, TLParams};

/// Strictly increasing 0-based axis tuple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(axes: Vec<usize>) -> Result<Self> {
        if axes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(param(format!("multi-index {axes:?} is not strictly increasing")));
        }
        Ok(Self(axes))
    }

    pub fn axes(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, axis: usize) -> bool {
        self.0.binary_search(&axis).is_ok()
    }

    /// Position of `axis` within the index, if present.
    pub fn position(&self, axis: usize) -> Option<usize> {
        self.0.binary_search(&axis).ok()
    }

    pub fn without(&self, axis: usize) -> MultiIndex {
        MultiIndex(self.0.iter().copied().filter(|&a| a != axis).collect())
    }

    /// `I ∪ {axis}` and the position `axis` takes in it.
    pub fn with(&self, axis: usize) -> (MultiIndex, usize) {
        let pos = self.0.partition_point(|&a| a < axis);
        let mut v = self.0.clone();
        v.insert(pos, axis);
        (MultiIndex(v), pos)
    }

    pub fn complement(&self, d: usize) -> Vec<usize> {
        (0..d).filter(|&a| !self.contains(a)).collect()
    }

    /// All increasing multi-indices of length `l` in `{0..d}`, lexicographic.
    pub fn all(d: usize, l: usize) -> Vec<MultiIndex> {
        fn rec(start: usize, d: usize, l: usize, cur: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
            if cur.len() == l {
                out.push(MultiIndex(cur.clone()));
                return;
            }
            for a in start..d {
                cur.push(a);
                rec(a + 1, d, l, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        if l <= d {
            rec(0, d, l, &mut Vec::new(), &mut out);
        }
        out
    }

    /// File stem such as `dx_1_2` (1-based axes).
    pub fn file_stem(&self) -> String {
        let mut s = String::from("dx");
        for a in &self.0 {
            s.push_str(&format!("_{}", a + 1));
        }
        s
    }

    pub fn from_file_stem(stem: &str) -> Result<Self> {
        let rest = stem
            .strip_prefix("dx")
            .ok_or_else(|| Error::Data(format!("bad form file name {stem}")))?;
        let axes = rest
            .split('_')
            .skip(1)
            .map(|t| {
                t.parse::<usize>()
                    .ok()
                    .filter(|&a| a >= 1)
                    .map(|a| a - 1)
                    .ok_or_else(|| Error::Data(format!("bad axis in form file name {stem}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(axes)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v: Vec<String> = self.0.iter().map(|a| (a + 1).to_string()).collect();
        write!(f, "({})", v.join(","))
    }
}

/// An `l`-form with one coefficient per increasing multi-index.
#[derive(Debug, Clone, PartialEq)]
pub struct Form {
    spec: GridSpec,
    l: usize,
    indices: Vec<MultiIndex>,
    coeffs: Vec<GridFunction>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FormManifest {
    d: usize,
    l: usize,
    spec: SpecRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpecRecord {
    d: usize,
    n: usize,
    period: f64,
}

impl Form {
    pub fn new(spec: GridSpec, l: usize, coeffs: Vec<GridFunction>) -> Result<Self> {
        let indices = MultiIndex::all(spec.d(), l);
        if l > spec.d() {
            return Err(Error::Degree(format!("degree {l} exceeds dimension {}", spec.d())));
        }
        if coeffs.len() != indices.len() {
            return Err(param(format!(
                "{}-form in d = {} needs {} coefficients, got {}",
                l,
                spec.d(),
                indices.len(),
                coeffs.len()
            )));
        }
        for c in &coeffs {
            spec.check_same(c.spec())?;
        }
        Ok(Self { spec, l, indices, coeffs })
    }

    pub fn zeros(spec: GridSpec, l: usize) -> Result<Self> {
        let count = MultiIndex::all(spec.d(), l).len();
        Self::new(spec, l, vec![GridFunction::zeros(spec); count])
    }

    pub fn from_scalar(f: GridFunction) -> Self {
        let spec = *f.spec();
        Self { spec, l: 0, indices: vec![MultiIndex(vec![])], coeffs: vec![f] }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn degree(&self) -> usize {
        self.l
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn coeffs(&self) -> &[GridFunction] {
        &self.coeffs
    }

    pub fn coefficient(&self, idx: &MultiIndex) -> Option<&GridFunction> {
        self.indices.iter().position(|i| i == idx).map(|k| &self.coeffs[k])
    }

    fn map_coeffs(&self, f: impl Fn(&GridFunction) -> GridFunction + Sync + Send) -> Form {
        Form {
            coeffs: self.coeffs.par_iter().map(f).collect(),
            ..self.clone()
        }
    }

    fn zip_coeffs(&self, other: &Form, f: impl Fn(&GridFunction, &GridFunction) -> Result<GridFunction>) -> Result<Form> {
        if self.l != other.l {
            return Err(Error::Degree(format!("degrees {} and {} differ", self.l, other.l)));
        }
        self.spec.check_same(&other.spec)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Form { coeffs, ..self.clone() })
    }

    pub fn add(&self, other: &Form) -> Result<Form> {
        self.zip_coeffs(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Form) -> Result<Form> {
        self.zip_coeffs(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, c: f64) -> Form {
        self.map_coeffs(|f| f.scale(c))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    /// `max_I ‖λ_I‖` in the given Triebel-Lizorkin norm.
    pub fn tl_norm(&self, bank: &FilterBank, params: &TLParams) -> Result<f64> {
        self.coeffs
            .par_iter()
            .map(|c| tl_norm(&decompose(bank, c)?, params))
            .collect::<Result<Vec<_>>>()
            .map(|v| v.into_iter().fold(0.0, f64::max))
    }

    /// Writes one `.gfn` per coefficient plus `manifest.json`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for (idx, c) in self.indices.iter().zip(&self.coeffs) {
            save_gfn(dir.join(format!("{}.{GFN_EXTENSION}", idx.file_stem())), c)?;
        }
        let manifest = FormManifest {
            d: self.spec.d(),
            l: self.l,
            spec: SpecRecord { d: self.spec.d(), n: self.spec.n(), period: self.spec.period() },
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Form> {
        let dir = dir.as_ref();
        let manifest: FormManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        let spec = GridSpec::new(manifest.spec.d, manifest.spec.n, manifest.spec.period)?;
        let mut found: BTreeMap<MultiIndex, GridFunction> = BTreeMap::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some(GFN_EXTENSION) {
                continue;
            }
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            found.insert(MultiIndex::from_file_stem(stem)?, load_gfn(&path)?);
        }
        let coeffs = MultiIndex::all(spec.d(), manifest.l)
            .iter()
            .map(|idx| {
                found
                    .remove(idx)
                    .ok_or_else(|| Error::Data(format!("missing coefficient {}", idx.file_stem())))
            })
            .collect::<Result<Vec<_>>>()?;
        if !found.is_empty() {
            return Err(Error::Data("form directory has coefficients of another degree".into()));
        }
        Form::new(spec, manifest.l, coeffs)
    }
}

/// `(dλ)_J = Σ_{i∈J} (-1)^{pos(i,J)} ∂_i λ_{J∖i}`.
pub fn exterior_derivative(lambda: &Form) -> Result<Form> {
    let d = lambda.spec.d();
    if lambda.l >= d {
        return Err(Error::Degree(format!("d of a {}-form in dimension {d} is undefined", lambda.l)));
    }
    let targets = MultiIndex::all(d, lambda.l + 1);
    let coeffs = targets
        .par_iter()
        .map(|j| {
            let mut acc = GridFunction::zeros(lambda.spec);
            for (pos, &i) in j.axes().iter().enumerate() {
                let src = lambda.coefficient(&j.without(i)).expect("complete form");
                let term = spectral_derivative(src, i, 1)?;
                acc.axpy(if pos % 2 == 0 { 1.0 } else { -1.0 }, &term)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Form::new(lambda.spec, lambda.l + 1, coeffs)
}

/// Tolerance of the closedness check in [`min_norm_solve`], relative to `max |ω|`.
pub const EXACTNESS_TOLERANCE: f64 = 1e-10;

/// Minimal-norm `λ` with `dλ = ω` for a closed, mean-free `ω`:
/// `λ = δω / |k|²` with `(δω)_I = -Σ_{i∉I} (-1)^{pos(i, I∪i)} i k_i ω_{I∪i}`.
pub fn min_norm_solve(omega: &Form) -> Result<Form> {
    min_norm_solve_at_scale(omega, omega.max_abs())
}

/// [`min_norm_solve`] with the exactness checks measured against `scale`
/// rather than `max |ω|`; for inputs whose roundoff was inherited from a
/// larger field.
pub fn min_norm_solve_at_scale(omega: &Form, scale: f64) -> Result<Form> {
    let spec = omega.spec;
    let d = spec.d();
    if omega.l == 0 {
        return Err(Error::Degree("a 0-form is not the derivative of anything".into()));
    }
    if omega.max_abs() == 0.0 {
        return Form::zeros(spec, omega.l - 1);
    }
    for c in &omega.coeffs {
        let mean = c.mean().norm();
        if mean > EXACTNESS_TOLERANCE * scale {
            return Err(Error::Data(format!("form coefficient has nonzero mean {mean:e}")));
        }
    }
    if omega.l < d {
        let residual = exterior_derivative(omega)?.max_abs();
        // `dω` carries one derivative, compare against the largest wavenumber
        let k_max = spec.wavenumber_unit() * (spec.n() / 2) as f64;
        let tolerance = EXACTNESS_TOLERANCE * scale * k_max;
        if residual > tolerance {
            return Err(Error::NotExact { residual, tolerance });
        }
    }
    let spectra: Vec<SpectralField> = omega.coeffs.par_iter().map(forward_transform).collect();
    let k_of = |xi: &[i64]| -> Vec<f64> { xi.iter().map(|&x| derivative_wavenumber(&spec, x)).collect() };
    let lower = MultiIndex::all(d, omega.l - 1);
    let coeffs = lower
        .par_iter()
        .map(|idx| {
            let mut out = SpectralField::zeros(spec);
            spec.for_each_frequency(|k, xi| {
                let kv = k_of(xi);
                let k2: f64 = kv.iter().map(|v| v * v).sum();
                if k2 == 0.0 {
                    return;
                }
                let mut acc = Complex64::new(0.0, 0.0);
                for i in idx.complement(d) {
                    let (up, pos) = idx.with(i);
                    let src = omega.indices.iter().position(|m| *m == up).expect("complete form");
                    let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                    acc -= Complex64::new(0.0, sign * kv[i]) * spectra[src].coefficients()[k];
                }
                out.coefficients_mut()[k] = acc / k2;
            });
            inverse_transform(&out)
        })
        .collect();
    Form::new(spec, omega.l - 1, coeffs)
}

/// `{0..d} ∖ I`, the axes along which `λ_I` must be well approximated.
pub fn good_directions_for(index: &MultiIndex, d: usize, kappa: usize) -> Result<Vec<usize>> {
    let comp = index.complement(d);
    if comp.len() > kappa {
        return Err(Error::Degree(format!(
            "degree {} is below d - kappa = {}",
            index.len(),
            d.saturating_sub(kappa)
        )));
    }
    Ok(comp)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Stop once `‖dφ - dψ‖ ≤ tol ‖dφ‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Retry with `σ + 1` on non-contraction.
    pub escalate: bool,
    pub sigma_limit: u32,
    /// Run outside the degree hypothesis; results are flagged as not certified.
    pub force: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 60, escalate: true, sigma_limit: 6, force: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HodgeReport {
    pub iterations: usize,
    /// `‖dφ - dψ_N‖` (max over components, smoothness `α - 1`) after each step.
    pub residual_history: Vec<f64>,
    pub residual_ratios: Vec<f64>,
    pub dphi_norm: f64,
    /// `σ` used at each step.
    pub sigma_history: Vec<u32>,
    pub converged: bool,
    pub non_contraction: bool,
    /// Worst `|‖dφ - dψ_N‖_∞ - 2^{-(N+1)} ‖r_{N+1}‖_∞| / ‖dφ‖_∞`.
    pub bookkeeping_residual: f64,
    /// Largest `‖dλ - r_N‖_∞ / (2^N ‖dφ‖_∞)` over the minimal-norm solves.
    pub min_norm_residual: f64,
    /// Largest `‖λ_I - Σ_j Δ_j λ_I‖_∞ / ‖λ_I‖_∞`, the part carried into `β` unchanged.
    pub remainder_share: f64,
    pub psi_sup: f64,
    pub psi_tl: f64,
    pub certified: bool,
}

#[derive(Debug, Clone)]
pub struct HodgeSolution {
    pub psi: Form,
    pub report: HodgeReport,
}

struct ApproximatorCache {
    bank: FilterBank,
    params: ApproxParams,
    by_good: BTreeMap<Vec<usize>, Approximator>,
}

impl ApproximatorCache {
    fn get(&mut self, good: &[usize]) -> Result<&Approximator> {
        if !self.by_good.contains_key(good) {
            let mut p = self.params.with_good_dirs(good.to_vec());
            p.kappa = p.kappa.max(good.len());
            let a = Approximator::with_bank(self.bank.clone(), &p)?;
            self.by_good.insert(good.to_vec(), a);
        }
        Ok(&self.by_good[good])
    }
}

/// Bounded `ψ` with `dψ = dφ` by repeated minimal-norm solves followed by
/// componentwise bounded approximation.
pub fn bounded_solve(phi: &Form, params: &ApproxParams, options: &SolveOptions) -> Result<HodgeSolution> {
    let spec = phi.spec;
    let d = spec.d();
    let l = phi.l;
    if l >= d {
        return Err(Error::Degree(format!("a {l}-form in dimension {d} has no derivative")));
    }
    let in_range = l + params.kappa >= d;
    if !in_range && !options.force {
        return Err(Error::Degree(format!(
            "degree {l} outside [{}, {}]",
            d.saturating_sub(params.kappa),
            d - 1
        )));
    }
    let bank = default_filter_bank(&spec)?;
    let lowered = params.tl().with_alpha(params.alpha - 1.0);
    let dphi = exterior_derivative(phi)?;
    let dphi_norm = dphi.tl_norm(&bank, &lowered)?;
    let dphi_sup = dphi.max_abs();
    let mut psi = Form::zeros(spec, l)?;
    let mut report = HodgeReport {
        iterations: 0,
        residual_history: vec![],
        residual_ratios: vec![],
        dphi_norm,
        sigma_history: vec![],
        converged: dphi_sup == 0.0,
        non_contraction: false,
        bookkeeping_residual: 0.0,
        min_norm_residual: 0.0,
        remainder_share: 0.0,
        psi_sup: 0.0,
        psi_tl: 0.0,
        certified: in_range,
    };
    if dphi_sup == 0.0 {
        return Ok(HodgeSolution { psi, report });
    }

    let mut cache = ApproximatorCache { bank: bank.clone(), params: params.clone(), by_good: BTreeMap::new() };
    let kappa = if options.force { d } else { params.kappa };
    let goods: Vec<Vec<usize>> = psi
        .indices
        .iter()
        .map(|idx| good_directions_for(idx, d, kappa))
        .collect::<Result<Vec<_>>>()?;

    let mut r = dphi.clone();
    let mut dpsi = Form::zeros(spec, l + 1)?;
    let mut weight = 1.0;
    let mut growing = 0;
    for _ in 0..options.max_iter {
        report.sigma_history.push(cache.params.sigma);
        // `r` carries the roundoff of `dφ` amplified by the doubling
        let reference = dphi_sup / weight;
        let lambda = min_norm_solve_at_scale(&r, reference)?;
        let check = exterior_derivative(&lambda)?.sub(&r)?.max_abs() / reference;
        report.min_norm_residual = report.min_norm_residual.max(check);

        let mut beta_coeffs = Vec::with_capacity(goods.len());
        for (c, good) in lambda.coeffs.iter().zip(&goods) {
            let approx = cache.get(good)?.approximate(c)?.f_approx;
            // frequencies outside the exact partition of unity pass through unchanged
            let rest = c.sub(&reconstruct(&decompose(&bank, c)?))?;
            let lambda_sup = c.max_abs();
            if lambda_sup > 0.0 {
                report.remainder_share = report.remainder_share.max(rest.max_abs() / lambda_sup);
            }
            beta_coeffs.push(approx.add(&rest)?);
        }
        let beta = Form::new(spec, l, beta_coeffs)?;
        let dbeta = exterior_derivative(&beta)?;
        let next = r.sub(&dbeta)?.scale(2.0);
        psi = psi.add(&beta.scale(weight))?;
        dpsi = dpsi.add(&dbeta.scale(weight))?;
        weight *= 0.5;
        r = next;

        let gap = dphi.sub(&dpsi)?;
        let book = (gap.max_abs() - weight * r.max_abs()).abs() / dphi_sup;
        report.bookkeeping_residual = report.bookkeeping_residual.max(book);
        let residual = gap.tl_norm(&bank, &lowered)?;
        if let Some(&prev) = report.residual_history.last() {
            let ratio = residual / prev;
            report.residual_ratios.push(ratio);
            growing = if ratio >= 1.0 { growing + 1 } else { 0 };
        }
        report.residual_history.push(residual);
        report.iterations += 1;
        if residual <= options.tol * dphi_norm {
            report.converged = true;
            break;
        }
        if growing >= 3 {
            if options.escalate && cache.params.sigma < options.sigma_limit {
                let next_sigma = cache.params.sigma + 1;
                cache = ApproximatorCache {
                    bank: bank.clone(),
                    params: params.with_sigma(next_sigma),
                    by_good: BTreeMap::new(),
                };
                growing = 0;
            } else {
                report.non_contraction = true;
                break;
            }
        }
    }
    report.psi_sup = psi.max_abs();
    report.psi_tl = psi.tl_norm(&bank, &params.tl())?;
    Ok(HodgeSolution { psi, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_index_helpers() {
        assert!(MultiIndex::new(vec![1, 1]).is_err());
        let i = MultiIndex::new(vec![0, 2]).unwrap();
        assert_eq!(i.complement(4), vec![1, 3]);
        assert_eq!(i.with(1), (MultiIndex(vec![0, 1, 2]), 1));
        assert_eq!(i.file_stem(), "dx_1_3");
        assert_eq!(MultiIndex::from_file_stem("dx_1_3").unwrap(), i);
        assert_eq!(i.to_string(), "(1,3)");
        assert_eq!(MultiIndex::all(4, 2).len(), 6);
        assert_eq!(MultiIndex::all(3, 0), vec![MultiIndex(vec![])]);
    }

    #[test]
    fn good_direction_rule() {
        let i = MultiIndex::new(vec![0, 1]).unwrap();
        assert_eq!(good_directions_for(&i, 3, 2).unwrap(), vec![2]);
        let i = MultiIndex::new(vec![2]).unwrap();
        assert_eq!(good_directions_for(&i, 3, 2).unwrap(), vec![0, 1]);
        let i = MultiIndex::new(vec![0, 1]).unwrap();
        assert!(matches!(good_directions_for(&i, 4, 1), Err(Error::Degree(_))));
    }

    #[test]
    fn derivative_of_top_degree_is_rejected() {
        let spec = GridSpec::standard(2, 8).unwrap();
        assert!(matches!(exterior_derivative(&Form::zeros(spec, 2).unwrap()), Err(Error::Degree(_))));
    }

    #[test]
    fn gradient_of_scalar() {
        let spec = GridSpec::standard(2, 16).unwrap();
        let f = GridFunction::from_fn(spec, |x| Complex64::new(x[0].sin() * (2.0 * x[1]).cos(), 0.0)).unwrap();
        let df = exterior_derivative(&Form::from_scalar(f.clone())).unwrap();
        assert_eq!(df.coeffs()[0], spectral_derivative(&f, 0, 1).unwrap());
        assert_eq!(df.coeffs()[1], spectral_derivative(&f, 1, 1).unwrap());
    }

    #[test]
    fn zero_form_solves_to_zero() {
        let spec = GridSpec::standard(2, 8).unwrap();
        let z = min_norm_solve(&Form::zeros(spec, 1).unwrap()).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }
}
