//! Pipeline orchestration for each command.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use lp_hodge::approx::{approx_diagnostics, select_parameters, sigma_max, ApproxParams, Approximator};
use lp_hodge::control::ControlField;
use lp_hodge::grid::{forward_transform, GridFunction, GridSpec};
use lp_hodge::hodge::{bounded_solve, exterior_derivative, SolveOptions};
use lp_hodge::input::{gaussian_bump, random_bandlimited, random_form, single_mode, spike};
use lp_hodge::io::save_gfn;
use lp_hodge::littlewood_paley::{decompose, default_filter_bank, reconstruct, wavenumber_norm, FilterBank};
use lp_hodge::norms::{hl_maximal, log_bound_probe, seminorm_equivalence_report, tl_norm, vector_maximal_ratio, TLParams};
use lp_hodge::probe::ProbeRow;

use crate::config::{Command, ExperimentConfig, Generator};

/// Tolerance of the exact identities asserted by `lp` and `approx`.
const IDENTITY_TOL: f64 = 1e-12;
/// Allowed relative increase between consecutive entries of a σ sweep.
const SWEEP_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check { name: name.into(), pass, detail }
}

/// What a command measured.
pub struct Outcome {
    pub result: Value,
    pub checks: Vec<Check>,
    pub rows: Vec<ProbeRow>,
}

/// Where optional field dumps go.
pub struct Dumps {
    pub dir: PathBuf,
    pub fields: bool,
    pub control: bool,
}

pub fn grid_spec(cfg: &ExperimentConfig) -> lp_hodge::Result<GridSpec> {
    GridSpec::new(cfg.grid.d, cfg.grid.n, cfg.grid.period)
}

pub fn generate_input(cfg: &ExperimentConfig, spec: &GridSpec) -> lp_hodge::Result<GridFunction> {
    let inp = &cfg.input;
    match inp.generator {
        Generator::RandomBandlimited => random_bandlimited(spec, &inp.bands, inp.seed, inp.amplitude),
        Generator::GaussianBump => {
            let center = inp.center.clone().unwrap_or_else(|| vec![spec.period() / 2.0; spec.d()]);
            gaussian_bump(spec, inp.width, &center, inp.amplitude)
        }
        Generator::SingleMode => single_mode(spec, &inp.xi, inp.amplitude),
        Generator::Spike => spike(spec, &inp.at, inp.amplitude),
    }
}

pub fn run(cfg: &ExperimentConfig, dumps: &Dumps) -> lp_hodge::Result<Outcome> {
    let spec = grid_spec(cfg)?;
    match cfg.command {
        Command::Lp => run_lp(cfg, &spec, dumps),
        Command::Norms => run_norms(cfg, &spec),
        Command::Approx => run_approx(cfg, &spec, dumps),
        Command::Hodge => run_hodge(cfg, &spec, dumps),
        Command::Probe => run_probe(cfg, &spec),
    }
}

fn tl_params(cfg: &ExperimentConfig) -> lp_hodge::Result<TLParams> {
    TLParams::new(cfg.tl.alpha, cfg.tl.p, cfg.tl.q)
}

/// The `σ` derived from `δ` is capped at what the grid affords; the report
/// records when that happens.
fn approx_params(cfg: &ExperimentConfig, spec: &GridSpec) -> lp_hodge::Result<ApproxParams> {
    let a = &cfg.approx;
    let cap = Some(sigma_max(spec));
    let p = select_parameters(cfg.tl.alpha, cfg.tl.p, cfg.tl.q, cfg.grid.d, a.delta, a.sigma, cap)?;
    Ok(match &cfg.approx.good_dirs {
        Some(dirs) => p.with_good_dirs(dirs.clone()),
        None => p,
    })
}

fn dump(dir: &Path, name: &str, f: &GridFunction) -> lp_hodge::Result<()> {
    std::fs::create_dir_all(dir)?;
    save_gfn(dir.join(format!("{name}.gfn")), f)
}

/// Largest `|Σ_j m_j(k) - 1|` over the frequencies the bank covers.
fn partition_residual(bank: &FilterBank) -> lp_hodge::Result<f64> {
    let spec = *bank.spec();
    let mults = bank.bands().map(|j| bank.multiplier(j)).collect::<lp_hodge::Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    spec.for_each_frequency(|idx, xi| {
        if bank.covers(wavenumber_norm(&spec, xi)) {
            let s: f64 = mults.iter().map(|m| m[idx]).sum();
            worst = worst.max((s - 1.0).abs());
        }
    });
    Ok(worst)
}

/// Share of the mean-free spectral energy the bank does not cover.
fn uncovered_energy(bank: &FilterBank, f: &GridFunction) -> f64 {
    let spec = *bank.spec();
    let c = forward_transform(f);
    let (mut total, mut outside) = (0.0, 0.0);
    spec.for_each_frequency(|idx, xi| {
        let k = wavenumber_norm(&spec, xi);
        if k > 0.0 {
            let e = c.coefficients()[idx].norm_sqr();
            total += e;
            if !bank.covers(k) {
                outside += e;
            }
        }
    });
    if total > 0.0 {
        outside / total
    } else {
        0.0
    }
}

fn run_lp(cfg: &ExperimentConfig, spec: &GridSpec, dumps: &Dumps) -> lp_hodge::Result<Outcome> {
    let f = generate_input(cfg, spec)?;
    let bank = default_filter_bank(spec)?;
    let decomp = decompose(&bank, &f)?;
    let bands: Vec<Value> = decomp
        .band_indices()
        .zip(decomp.bands())
        .map(|(j, b)| {
            let rms = (b.samples().iter().map(|z| z.norm_sqr()).sum::<f64>() / b.len() as f64).sqrt();
            json!({ "j": j, "sup": b.max_abs(), "rms": rms })
        })
        .collect();
    let partition = partition_residual(&bank)?;
    let uncovered = uncovered_energy(&bank, &f);
    let mean_free = f.map(|z| z - f.mean());
    let recon = reconstruct(&decomp).map(|z| z - decomp.mean());
    let scale = mean_free.max_abs();
    let recon_err = recon.sub(&mean_free)?.max_abs() / if scale > 0.0 { scale } else { 1.0 };
    if dumps.fields {
        dump(&dumps.dir, "input", &f)?;
        for (j, b) in decomp.band_indices().zip(decomp.bands()) {
            dump(&dumps.dir, &format!("band_{j}"), b)?;
        }
    }
    let mut checks = vec![check(
        "partition-of-unity",
        partition <= IDENTITY_TOL,
        format!("max |sum - 1| = {partition:e} over covered frequencies"),
    )];
    if uncovered == 0.0 {
        checks.push(check(
            "reconstruction",
            recon_err <= 1e-10,
            format!("relative sup error {recon_err:e}"),
        ));
    }
    Ok(Outcome {
        result: json!({
            "j_min": bank.j_min(),
            "j_max": bank.j_max(),
            "bands": bands,
            "partition_residual": partition,
            "reconstruction_error": recon_err,
            "uncovered_energy": uncovered,
        }),
        checks,
        rows: Vec::new(),
    })
}

fn run_norms(cfg: &ExperimentConfig, spec: &GridSpec) -> lp_hodge::Result<Outcome> {
    let f = generate_input(cfg, spec)?;
    let tl = tl_params(cfg)?;
    let bank = default_filter_bank(spec)?;
    let decomp = decompose(&bank, &f)?;
    let norm = tl_norm(&decomp, &tl)?;
    let seminorm = seminorm_equivalence_report(&f, &bank, &tl)?;
    let fs_ratio = vector_maximal_ratio(decomp.bands(), tl.p, tl.q)?;
    let hl = hl_maximal(&f.abs());
    let finite = norm.is_finite() && seminorm.derivative_norms.iter().all(|v| v.is_finite());
    Ok(Outcome {
        result: json!({
            "tl_norm": norm,
            "sup": f.max_abs(),
            "hl_maximal_sup": hl.max_abs(),
            "seminorm": seminorm,
            "vector_maximal_ratio": fs_ratio,
            "critical": tl.is_critical(spec.d()),
        }),
        checks: vec![check("finite-norms", finite, format!("tl norm {norm:e}"))],
        rows: Vec::new(),
    })
}

fn sweep_is_monotone(errors: &[f64]) -> bool {
    errors.windows(2).all(|w| w[1] <= w[0] * (1.0 + SWEEP_SLACK))
}

fn run_approx(cfg: &ExperimentConfig, spec: &GridSpec, dumps: &Dumps) -> lp_hodge::Result<Outcome> {
    let f = generate_input(cfg, spec)?;
    let params = approx_params(cfg, spec)?;
    let approximator = Approximator::new(spec, &params)?;
    let result = approximator.approximate(&f)?;
    let diag = approx_diagnostics(&result, &params)?;
    let budgets = &result.report.budgets;
    let mut checks = vec![
        check("h-budget", budgets.h_ok, format!("{:e} <= {:e}", budgets.h_tilde_sup, budgets.h_bound)),
        check("g-budget", budgets.g_ok, format!("{:e} <= {:e}", budgets.g_tilde_sup, budgets.g_bound)),
    ];
    if let Some(d) = &diag {
        let worst = d.h_identity_residual.max(d.g_identity_residual);
        checks.push(check("split-identities", worst <= IDENTITY_TOL, format!("worst residual {worst:e}")));
        checks.push(check("v-h-domination", d.v_ok && d.h_ok, format!("C_low = {:e}", d.c_low)));
    }

    let mut sigmas = cfg.approx.sigma_sweep.clone();
    sigmas.sort_unstable();
    sigmas.dedup();
    let mut sweep = Vec::new();
    for &s in &sigmas {
        let a = Approximator::with_bank(approximator.bank().clone(), &params.with_sigma(s))?;
        let r = a.approximate(&f)?.report;
        sweep.push(json!({
            "sigma": s,
            "r_stride": r.params.r_stride,
            "good_error": r.good_error,
            "all_error": r.all_error,
            "budgets_ok": r.budgets.h_ok && r.budgets.g_ok,
            "sigma_over_cap": r.sigma_over_cap,
        }));
    }
    if sweep.len() > 1 {
        let errors: Vec<f64> = sweep.iter().map(|row| row["good_error"].as_f64().unwrap_or(f64::NAN)).collect();
        checks.push(check(
            "sweep-monotone",
            sweep_is_monotone(&errors),
            format!("good errors {errors:?} with {SWEEP_SLACK} slack"),
        ));
    }

    if dumps.fields {
        dump(&dumps.dir, "input", &f)?;
        dump(&dumps.dir, "approx", &result.f_approx)?;
    }
    if dumps.control {
        if let Some(state) = &result.state {
            let dir = dumps.dir.join("control");
            for kind in ControlField::ALL {
                for j in state.control.j_min()..=state.control.j_max() {
                    dump(&dir, &format!("{}_{j}", kind.name()), &state.control.field(kind, j))?;
                }
            }
        }
    }
    Ok(Outcome {
        result: json!({
            "report": result.report,
            "scale_used": result.scale_used,
            "norm_scale": result.norm_scale,
            "diagnostics": diag,
            "sweep": sweep,
        }),
        checks,
        rows: Vec::new(),
    })
}

fn run_hodge(cfg: &ExperimentConfig, spec: &GridSpec, dumps: &Dumps) -> lp_hodge::Result<Outcome> {
    if cfg.input.generator != Generator::RandomBandlimited {
        return Err(lp_hodge::Error::Parameter("hodge inputs use the random-bandlimited generator".into()));
    }
    let phi = random_form(spec, cfg.hodge.l, &cfg.input.bands, cfg.input.seed, cfg.input.amplitude)?;
    let params = approx_params(cfg, spec)?;
    let h = &cfg.hodge;
    let options = SolveOptions {
        tol: h.tol,
        max_iter: h.max_iter,
        escalate: h.escalate,
        sigma_limit: h.sigma_limit,
        force: h.force,
    };
    let sol = bounded_solve(&phi, &params, &options)?;
    let dphi = exterior_derivative(&phi)?;
    let mismatch = exterior_derivative(&sol.psi)?.sub(&dphi)?.max_abs();
    let scale = dphi.max_abs();
    let rel = if scale > 0.0 { mismatch / scale } else { mismatch };
    if dumps.fields {
        phi.save(dumps.dir.join("phi"))?;
        sol.psi.save(dumps.dir.join("psi"))?;
    }
    let r = &sol.report;
    let checks = vec![
        check("converged", r.converged, format!("{} iterations", r.iterations)),
        check("contraction", !r.non_contraction, format!("ratios {:?}", r.residual_ratios)),
        check("sup-residual", rel <= h.tol.max(IDENTITY_TOL), format!("|d psi - d phi| / |d phi| = {rel:e}")),
    ];
    Ok(Outcome {
        result: json!({
            "params": params,
            "report": sol.report,
            "sup_residual": rel,
            "phi_sup": phi.max_abs(),
        }),
        checks,
        rows: Vec::new(),
    })
}

fn run_probe(cfg: &ExperimentConfig, spec: &GridSpec) -> lp_hodge::Result<Outcome> {
    let f = generate_input(cfg, spec)?;
    let tl = tl_params(cfg)?;
    let bank = default_filter_bank(spec)?;
    let decomp = decompose(&bank, &f)?;
    let shifts: Vec<Vec<f64>> = cfg
        .probe
        .shifts
        .iter()
        .map(|&r| {
            let mut v = vec![0.0; spec.d()];
            v[0] = r;
            v
        })
        .collect();
    let report = log_bound_probe(&decomp, &tl, &shifts, cfg.probe.slack)?;
    let rows = report.probe_rows(&tl);
    let checks = rows
        .iter()
        .map(|row| check("log-bound", row.pass, format!("r = {}: {:e} <= {:e}", row.r, row.measured, row.bound)))
        .collect();
    Ok(Outcome { result: json!({ "log_bound": report }), checks, rows })
}
