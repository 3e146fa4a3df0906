//! Deterministic synthetic inputs.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{param, Result};
use crate::grid::{inverse_transform, GridFunction, GridSpec, SpectralField};
use crate::hodge::{Form, MultiIndex};
use crate::littlewood_paley::wavenumber_norm;

/// Whether `|k|` lies in the open annulus `(2^{j-1}, 2^{j+1})` of some band.
fn in_annuli(k: f64, bands: &[i32]) -> bool {
    bands.iter().any(|&j| k > 2f64.powi(j - 1) && k < 2f64.powi(j + 1))
}

/// Real field with i.i.d. standard complex normal coefficients on the
/// requested band annuli (Hermitian-symmetric), scaled by `amplitude`.
pub fn random_bandlimited(spec: &GridSpec, bands: &[i32], seed: u64, amplitude: f64) -> Result<GridFunction> {
    if bands.is_empty() {
        return Err(param("random-bandlimited needs at least one band"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = SpectralField::zeros(*spec);
    let n = spec.n() as i64;
    let mut entries: Vec<(Vec<i64>, bool)> = Vec::new();
    spec.for_each_frequency(|_, xi| {
        let k = wavenumber_norm(spec, xi);
        if !in_annuli(k, bands) {
            return;
        }
        let neg: Vec<i64> = xi.iter().map(|&x| if x == -n / 2 { x } else { -x }).collect();
        if neg.as_slice() == xi {
            entries.push((xi.to_vec(), true));
        } else if xi > neg.as_slice() {
            entries.push((xi.to_vec(), false));
        }
    });
    let scale = amplitude / std::f64::consts::SQRT_2;
    for (xi, self_conjugate) in entries {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        if self_conjugate {
            field.set_coefficient(&xi, Complex64::new(re * amplitude, 0.0));
        } else {
            let c = Complex64::new(re, im) * scale;
            let neg: Vec<i64> = xi.iter().map(|&x| -x).collect();
            field.set_coefficient(&xi, c);
            field.set_coefficient(&neg, c.conj());
        }
    }
    let f = inverse_transform(&field);
    Ok(f.map(|z| Complex64::new(z.re, 0.0)))
}

/// `amplitude · exp(-|x - c|² / (2 w²))` with the periodic distance.
pub fn gaussian_bump(spec: &GridSpec, width: f64, center: &[f64], amplitude: f64) -> Result<GridFunction> {
    if center.len() != spec.d() || !(width > 0.0) {
        return Err(param("gaussian bump needs a positive width and a d-dimensional center"));
    }
    let period = spec.period();
    GridFunction::from_fn(*spec, |x| {
        let r2: f64 = x
            .iter()
            .zip(center)
            .map(|(a, c)| {
                let t = a - c;
                let t = t - period * (t / period).round();
                t * t
            })
            .sum();
        Complex64::new(amplitude * (-r2 / (2.0 * width * width)).exp(), 0.0)
    })
}

/// `amplitude · e^{i⟨ξ, x⟩}`.
pub fn single_mode(spec: &GridSpec, xi: &[i64], amplitude: f64) -> Result<GridFunction> {
    Ok(GridFunction::mode(*spec, xi)?.scale(amplitude))
}

/// `amplitude` at one grid point, zero elsewhere.
pub fn spike(spec: &GridSpec, at: &[usize], amplitude: f64) -> Result<GridFunction> {
    if at.len() != spec.d() || at.iter().any(|&c| c >= spec.n()) {
        return Err(param("spike location outside the grid"));
    }
    let mut v = vec![0.0; spec.len()];
    v[spec.ravel(at)] = amplitude;
    GridFunction::from_real(*spec, v)
}

/// `l`-form whose coefficients are independent band-limited fields.
pub fn random_form(spec: &GridSpec, l: usize, bands: &[i32], seed: u64, amplitude: f64) -> Result<Form> {
    let coeffs = MultiIndex::all(spec.d(), l)
        .iter()
        .enumerate()
        .map(|(k, _)| random_bandlimited(spec, bands, seed.wrapping_add(1000 * k as u64 + 1), amplitude))
        .collect::<Result<Vec<_>>>()?;
    Form::new(*spec, l, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::forward_transform;

    #[test]
    fn bandlimited_is_real_deterministic_and_masked() {
        let spec = GridSpec::standard(2, 32).unwrap();
        let a = random_bandlimited(&spec, &[0, 1], 7, 1.0).unwrap();
        let b = random_bandlimited(&spec, &[0, 1], 7, 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.max_imag(), 0.0);
        let c = forward_transform(&a);
        let mut outside: f64 = 0.0;
        let mut inside: f64 = 0.0;
        spec.for_each_frequency(|k, xi| {
            let v = c.coefficients()[k].norm();
            if in_annuli(wavenumber_norm(&spec, xi), &[0, 1]) {
                inside = inside.max(v);
            } else {
                outside = outside.max(v);
            }
        });
        assert!(inside > 0.1);
        assert!(outside <= 1e-14, "{outside}");
    }

    #[test]
    fn spike_and_mode() {
        let spec = GridSpec::standard(2, 8).unwrap();
        let s = spike(&spec, &[1, 2], 1.0).unwrap();
        assert_eq!(s.samples()[spec.ravel(&[1, 2])].re, 1.0);
        assert_eq!(s.max_abs(), 1.0);
        let m = single_mode(&spec, &[1, 0], 1.0).unwrap();
        let x1 = spec.spacing();
        assert!((m.samples()[spec.ravel(&[1, 0])] - Complex64::new(x1.cos(), x1.sin())).norm() < 1e-15);
    }
}
