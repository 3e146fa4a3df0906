//! The anisotropic exponential `E`, the polynomial-tail kernel `T`, and their
//! periodizations on the torus.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{param, Result};
use crate::grid::{GridFunction, GridSpec};

/// Terms with `E < e^{-E_CUTOFF}` are dropped from lattice sums.
pub const E_CUTOFF: f64 = 36.0;
/// Image boxes for periodized `E` reach out to `E = e^{-40}`.
const E_IMAGE_REACH: f64 = 40.0;

/// Which axes are "good" and how strongly they are stretched.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Anisotropy {
    sigma: u32,
    good: Vec<bool>,
}

impl Anisotropy {
    pub fn new(d: usize, sigma: u32, good_dirs: &[usize]) -> Result<Self> {
        let mut good = vec![false; d];
        for &a in good_dirs {
            if a >= d {
                return Err(param(format!("good direction {a} out of range for d = {d}")));
            }
            if std::mem::replace(&mut good[a], true) {
                return Err(param(format!("good direction {a} listed twice")));
            }
        }
        Ok(Self { sigma, good })
    }

    pub fn sigma(&self) -> u32 {
        self.sigma
    }

    pub fn is_good(&self, axis: usize) -> bool {
        self.good[axis]
    }

    pub fn good_dirs(&self) -> Vec<usize> {
        (0..self.good.len()).filter(|&a| self.good[a]).collect()
    }

    /// Per-axis factor of `x ↦ x_σ`.
    pub fn axis_factor(&self, axis: usize) -> f64 {
        if self.good[axis] {
            2f64.powi(-(self.sigma as i32))
        } else {
            1.0
        }
    }

    /// `‖x_σ‖²`.
    pub fn stretched_norm_sq(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(a, &v)| (v * self.axis_factor(a)).powi(2))
            .sum()
    }

    /// `E(x) = exp(-(1 + ‖x_σ‖²)^{1/2})`.
    pub fn e(&self, x: &[f64]) -> f64 {
        (-(1.0 + self.stretched_norm_sq(x)).sqrt()).exp()
    }
}

/// `T(x) = min(1, ‖x‖^{-(d+1)})`.
pub fn t_profile(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    t_radial(r2.sqrt(), x.len())
}

pub fn t_radial(rho: f64, d: usize) -> f64 {
    if rho <= 1.0 {
        1.0
    } else {
        rho.powi(-(d as i32 + 1))
    }
}

fn gamma_half(k: usize) -> f64 {
    // Γ(k/2)
    if k == 1 {
        PI.sqrt()
    } else if k == 2 {
        1.0
    } else {
        (k as f64 / 2.0 - 1.0) * gamma_half(k - 2)
    }
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma_half(d)
}

/// Volume of the unit ball in `R^d`.
pub fn ball_volume(d: usize) -> f64 {
    sphere_area(d) / d as f64
}

/// `∫_{‖x‖ > radius} T(x) dx`.
pub fn t_tail_mass(d: usize, radius: f64) -> f64 {
    let s = sphere_area(d);
    if radius >= 1.0 {
        s / radius
    } else {
        s * (1.0 - radius.max(0.0).powi(d as i32)) / d as f64 + s
    }
}

/// `∫_{R^d} T = |S^{d-1}| (1/d + 1)`.
pub fn t_mass(d: usize) -> f64 {
    t_tail_mass(d, 0.0)
}

/// Image box half-width used for periodizing `T`.
fn t_image_half_width(d: usize) -> i64 {
    match d {
        1 => 512,
        2 => 24,
        3 => 6,
        _ => 2,
    }
}

/// Wraps each coordinate into `[-period/2, period/2)`.
fn wrap(x: &mut [f64], period: f64) {
    for v in x {
        *v -= period * (*v / period + 0.5).floor();
    }
}

/// Calls `f(image_offset)` for every integer vector in the box `|k_a| <= half[a]`.
fn for_each_image(half: &[i64], mut f: impl FnMut(&[i64])) {
    let d = half.len();
    let mut k: Vec<i64> = half.iter().map(|h| -h).collect();
    loop {
        f(&k);
        let mut a = d;
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            if k[a] < half[a] {
                k[a] += 1;
                break;
            }
            k[a] = -half[a];
        }
    }
}

/// `Σ_{k ∈ Z^d} T_j(z + period·k)`: a finite image box plus the far-field
/// mass of `T_j` outside the ball with the box's volume.
pub fn periodized_t_at(spec: &GridSpec, j: i32, z: &[f64]) -> f64 {
    let d = spec.d();
    let period = spec.period();
    let scale = 2f64.powi(j);
    let mut z0 = z.to_vec();
    wrap(&mut z0, period);
    let l = t_image_half_width(d);
    let mut y = vec![0.0; d];
    let mut acc = 0.0;
    for_each_image(&vec![l; d], |k| {
        for a in 0..d {
            y[a] = scale * (z0[a] + period * k[a] as f64);
        }
        acc += t_profile(&y);
    });
    let side = (2 * l + 1) as f64 * period;
    let radius = side / ball_volume(d).powf(1.0 / d as f64);
    let tail = t_tail_mass(d, scale * radius) / period.powi(d as i32);
    scale.powi(d as i32) * acc + tail
}

/// Periodized `T_j(x + shift)` sampled on the grid.
pub fn periodized_t(spec: &GridSpec, j: i32, shift: &[f64]) -> Vec<f64> {
    use rayon::prelude::*;
    let d = spec.d();
    let h = spec.spacing();
    (0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let mut coords = vec![0usize; d];
            spec.unravel(idx, &mut coords);
            let z: Vec<f64> = coords
                .iter()
                .zip(shift)
                .map(|(&c, &s)| c as f64 * h + s)
                .collect();
            periodized_t_at(spec, j, &z)
        })
        .collect()
}

/// Periodized `T_j(x) = 2^{jd} T(2^j x)` on the grid; positive everywhere.
pub fn kernel_t(spec: &GridSpec, j: i32) -> GridFunction {
    GridFunction::from_real_raw(*spec, &periodized_t(spec, j, &vec![0.0; spec.d()]))
}

fn e_image_half_widths(spec: &GridSpec, aniso: &Anisotropy, j: i32, reach: f64) -> Vec<i64> {
    (0..spec.d())
        .map(|a| {
            let decay = reach / aniso.axis_factor(a) * 2f64.powi(-j);
            (decay / spec.period()).ceil() as i64 + 1
        })
        .collect()
}

/// `Σ_k E(2^j (z + period·k))`, images reaching down to `E = e^{-40}`.
pub fn periodized_e_at(spec: &GridSpec, aniso: &Anisotropy, j: i32, z: &[f64]) -> f64 {
    let d = spec.d();
    let period = spec.period();
    let scale = 2f64.powi(j);
    let mut z0 = z.to_vec();
    wrap(&mut z0, period);
    let half = e_image_half_widths(spec, aniso, j, E_IMAGE_REACH);
    let mut y = vec![0.0; d];
    let mut acc = 0.0;
    for_each_image(&half, |k| {
        for a in 0..d {
            y[a] = scale * (z0[a] + period * k[a] as f64);
        }
        acc += aniso.e(&y);
    });
    acc
}

/// Periodized `E_j(x) = 2^{jd} E(2^j x)` on the grid.
pub fn kernel_e(spec: &GridSpec, sigma: u32, good_dirs: &[usize], j: i32) -> Result<GridFunction> {
    if sigma < 1 {
        return Err(param("anisotropy sigma must be at least 1"));
    }
    let aniso = Anisotropy::new(spec.d(), sigma, good_dirs)?;
    let weight = 2f64.powi(j * spec.d() as i32);
    GridFunction::from_fn(*spec, |x| {
        Complex64::new(weight * periodized_e_at(spec, &aniso, j, x), 0.0)
    })
}

/// Table over grid displacements `δ` of `Σ_k E(2^j (δ + period·k))^p`,
/// dropping image terms with `E < e^{-36}`.
pub(crate) fn e_power_table(spec: &GridSpec, aniso: &Anisotropy, j: i32, p: f64) -> Vec<f64> {
    use rayon::prelude::*;
    let d = spec.d();
    let period = spec.period();
    let h = spec.spacing();
    let scale = 2f64.powi(j);
    let half = e_image_half_widths(spec, aniso, j, E_CUTOFF);
    let floor = (-E_CUTOFF).exp();
    (0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let mut coords = vec![0usize; d];
            spec.unravel(idx, &mut coords);
            let z0: Vec<f64> = coords
                .iter()
                .map(|&c| spec.signed_offset(c) as f64 * h)
                .collect();
            let mut y = vec![0.0; d];
            let mut acc = 0.0;
            for_each_image(&half, |k| {
                for a in 0..d {
                    y[a] = scale * (z0[a] + period * k[a] as f64);
                }
                let e = aniso.e(&y);
                if e >= floor {
                    acc += e.powf(p);
                }
            });
            acc
        })
        .collect()
}
