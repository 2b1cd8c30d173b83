use std::fs;
use std::path::{Path, PathBuf};

use disorder_core::cavity::{self, CavityIntegrals};
use disorder_core::engine::default_eta;
use disorder_core::ensemble::{compare_with_reference, ensemble_cavity_greens, Comparison};
use disorder_core::quadrature::{auto_window, find_peaks, integrate_trapezoid};
use disorder_core::report::{Cell, Table};
use disorder_core::{
    diagonalize, ensemble_average, evaluate_greens, site_dos, total_dos, Elements, EnsembleConfig,
    SpectralGrid,
};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{
    defaults, elements, explicit_grid, output_path, resolve_ensemble, resolve_model, EnsembleEcho,
    FileConfig, GridEcho, Model, ModelEcho, Overrides,
};
use crate::error::CliError;

/// Shared inputs for every subcommand.
pub struct Context {
    pub file: FileConfig,
    pub overrides: Overrides,
    pub quiet: bool,
}

impl Context {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn pad_factor(&self) -> f64 {
        self.file.grid.pad_factor.unwrap_or(defaults::PAD_FACTOR)
    }

    fn prominence(&self) -> f64 {
        self.file
            .output
            .prominence
            .unwrap_or(defaults::PROMINENCE_FRACTION)
    }
}

#[derive(Serialize)]
struct C64 {
    re: f64,
    im: f64,
}

impl From<Complex64> for C64 {
    fn from(z: Complex64) -> Self {
        C64 { re: z.re, im: z.im }
    }
}

#[derive(Serialize)]
struct PeakEcho {
    position: f64,
    height: f64,
    prominence: f64,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, contents).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).expect("summary serializes");
    s.push('\n');
    write_file(path, &s)
}

/// `out.csv` -> `out.json`.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn grid_echo(omegas: &[f64], explicit: bool, eta: f64, pad: f64) -> GridEcho {
    GridEcho {
        lo: omegas.first().copied().unwrap_or(0.0),
        hi: omegas.last().copied().unwrap_or(0.0),
        n_points: omegas.len(),
        explicit,
        eta,
        pad_factor: pad,
    }
}

fn peaks_of(xs: &[f64], ys: &[f64], fraction: f64) -> Result<Vec<PeakEcho>, CliError> {
    let max = ys.iter().cloned().fold(0.0, f64::max);
    let min_prom = (fraction * max).max(f64::MIN_POSITIVE);
    Ok(find_peaks(xs, ys, min_prom)?
        .into_iter()
        .map(|p| PeakEcho {
            position: p.position,
            height: p.height,
            prominence: p.prominence,
        })
        .collect())
}

#[derive(Serialize)]
struct DosSummary<'a> {
    command: &'static str,
    model: &'a ModelEcho,
    grid: GridEcho,
    elements: Vec<(usize, usize)>,
    prominence_fraction: f64,
    csv: String,
    eigenvalues: Vec<f64>,
    integral_rho_total: f64,
    peaks: Vec<PeakEcho>,
}

pub fn dos(ctx: &Context) -> Result<(), CliError> {
    let model = resolve_model(&ctx.file, &ctx.overrides)?;
    let spec = model.hamiltonian()?;
    let eig = diagonalize(&spec)?;
    let eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let eta = ctx.overrides.eta.or(ctx.file.grid.eta).unwrap_or_else(|| default_eta(&spec));
    let pad = ctx.pad_factor();
    let (omegas, explicit) = match explicit_grid(&ctx.file, &ctx.overrides)? {
        Some(o) => (o, true),
        None => {
            let w = auto_window(&eigenvalues, spec.gamma(), pad)
                .ok_or_else(|| CliError::Config("empty spectrum".into()))?;
            (w.points(), false)
        }
    };
    let grid = SpectralGrid::new(omegas, eta)?;

    let extra = elements(&ctx.file, &ctx.overrides);
    let n = spec.n_sites();
    let mut pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    for &p in &extra {
        if !pairs.contains(&p) {
            pairs.push(p);
        }
    }
    let evals = evaluate_greens(&spec, &grid, &Elements::Pairs(pairs))?;
    let rho_sites = site_dos(&evals)?;
    let rho_total = total_dos(&evals)?;

    let mut columns = vec![("rho_total".to_string(), rho_total.clone())];
    for (i, r) in rho_sites.into_iter().enumerate() {
        columns.push((format!("rho_site_{i}"), r));
    }
    for &(i, j) in &extra {
        let g: Vec<Complex64> = evals
            .iter()
            .map(|ev| ev.get(i, j).expect("requested pair evaluated"))
            .collect();
        columns.push((format!("re_G_{i}_{j}"), g.iter().map(|z| z.re).collect()));
        columns.push((format!("im_G_{i}_{j}"), g.iter().map(|z| z.im).collect()));
    }
    let table = Table::from_columns(grid.omegas(), &columns);

    let csv = output_path(&ctx.file, &ctx.overrides, "dos.csv");
    write_file(&csv, &table.to_csv_string())?;
    let summary = DosSummary {
        command: "dos",
        model: model.echo(),
        grid: grid_echo(grid.omegas(), explicit, eta, pad),
        elements: extra,
        prominence_fraction: ctx.prominence(),
        csv: csv.display().to_string(),
        integral_rho_total: integrate_trapezoid(grid.omegas(), &rho_total)?,
        peaks: peaks_of(grid.omegas(), &rho_total, ctx.prominence())?,
        eigenvalues,
    };
    let json = summary_path(&csv);
    write_json(&json, &summary)?;
    ctx.note(format!(
        "dos: {} points, {} peaks -> {}, {}",
        grid.len(),
        summary.peaks.len(),
        csv.display(),
        json.display()
    ));
    Ok(())
}

#[derive(Serialize)]
struct PolesEcho {
    eps_plus: C64,
    eps_minus: C64,
    splitting: f64,
    coupling_strength: f64,
}

#[derive(Serialize)]
struct CavitySummary<'a> {
    command: &'static str,
    model: &'a ModelEcho,
    grid: GridEcho,
    csv: String,
    poles: PolesEcho,
    absorption_columns: Vec<String>,
}

fn cavity_params(model: &Model) -> Result<cavity::CavityParams, CliError> {
    match model {
        Model::Cavity { params, .. } => Ok(*params),
        Model::Graph { .. } => Err(CliError::Config(
            "this command needs a [cavity] model".into(),
        )),
    }
}

fn closed_form_eta(ctx: &Context, gamma: f64) -> f64 {
    ctx.overrides
        .eta
        .or(ctx.file.grid.eta)
        .unwrap_or(if gamma > 0.0 { 0.0 } else { 1e-3 })
}

pub fn cavity_spectra(ctx: &Context) -> Result<(), CliError> {
    let model = resolve_model(&ctx.file, &ctx.overrides)?;
    let params = cavity_params(&model)?;
    let pad = ctx.pad_factor();
    let eta = closed_form_eta(ctx, params.gamma);
    let (omegas, explicit) = match explicit_grid(&ctx.file, &ctx.overrides)? {
        Some(o) => (o, true),
        None => (
            cavity::polariton_window(&params, pad, defaults::GRID_POINTS)?.points(),
            false,
        ),
    };
    let grid = SpectralGrid::new(omegas, eta)?;

    let mut columns = vec![
        ("rho_c".to_string(), cavity::rho_c(&params, &grid)),
        ("delta_rho_m".to_string(), cavity::delta_rho_m(&params, &grid)),
        ("delta_rho_t".to_string(), cavity::delta_rho_t(&params, &grid)),
    ];
    if params.mu_debye.is_some() {
        let a = cavity::absorption(&params, &grid)?;
        columns.push(("alpha_per_molecule".into(), a.per_molecule));
        columns.push(("alpha_per_volume".into(), a.per_volume));
        if let Some(t) = a.total {
            columns.push(("alpha_total".into(), t));
        }
        columns.push(("alpha_normalized".into(), a.normalized));
    } else {
        ctx.note("cavity: no dipole given, absorption columns omitted");
    }
    let table = Table::from_columns(grid.omegas(), &columns);
    let csv = output_path(&ctx.file, &ctx.overrides, "cavity.csv");
    write_file(&csv, &table.to_csv_string())?;

    let poles = cavity::polariton_poles(&params);
    let summary = CavitySummary {
        command: "cavity",
        model: model.echo(),
        grid: grid_echo(grid.omegas(), explicit, eta, pad),
        csv: csv.display().to_string(),
        poles: PolesEcho {
            eps_plus: poles.eps_plus.into(),
            eps_minus: poles.eps_minus.into(),
            splitting: poles.splitting(),
            coupling_strength: params.coupling_strength(),
        },
        absorption_columns: columns[3..].iter().map(|(n, _)| n.clone()).collect(),
    };
    let json = summary_path(&csv);
    write_json(&json, &summary)?;
    ctx.note(format!(
        "cavity: eps+ = {:.6}{:+.6}i, eps- = {:.6}{:+.6}i -> {}, {}",
        poles.eps_plus.re,
        poles.eps_plus.im,
        poles.eps_minus.re,
        poles.eps_minus.im,
        csv.display(),
        json.display()
    ));
    Ok(())
}

#[derive(Serialize)]
struct McSummary<'a> {
    command: &'static str,
    model: &'a ModelEcho,
    grid: GridEcho,
    ensemble: EnsembleEcho,
    elements: Vec<(usize, usize)>,
    csv: String,
    n_samples: usize,
    seed: u64,
    max_deviation: f64,
    fraction_within: f64,
    comparison: Comparison,
}

pub fn mc_compare(ctx: &Context) -> Result<(), CliError> {
    let model = resolve_model(&ctx.file, &ctx.overrides)?;
    let spec = model.hamiltonian()?;
    let (ens, disorder) = resolve_ensemble(&ctx.file, &ctx.overrides, spec.gamma())?;
    let pad = ctx.pad_factor();
    let (omegas, explicit) = match explicit_grid(&ctx.file, &ctx.overrides)? {
        Some(o) => (o, true),
        None => {
            let eig = diagonalize(&spec)?;
            let ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            let w = auto_window(&ev, spec.gamma(), pad)
                .ok_or_else(|| CliError::Config("empty spectrum".into()))?
                .with_points(defaults::MC_GRID_POINTS)?;
            (w.points(), false)
        }
    };
    let grid = SpectralGrid::new(omegas, ens.eta)?;
    let mut pairs = elements(&ctx.file, &ctx.overrides);
    if pairs.is_empty() {
        pairs = (0..spec.n_sites()).map(|i| (i, i)).collect();
    }
    let config = EnsembleConfig::new(ens.samples, ens.seed, disorder, ens.eta)?;
    ctx.note(format!(
        "mc-compare: {} samples x {} frequencies x {} elements",
        ens.samples,
        grid.len(),
        pairs.len()
    ));
    let result = match &model {
        Model::Cavity { params, .. } if pairs == [(0, 0)] => {
            ensemble_cavity_greens(params, &config, &grid)?
        }
        _ => ensemble_average(&spec, &config, &grid, &Elements::Pairs(pairs.clone()))?,
    };
    let reference = evaluate_greens(&spec, &grid, &Elements::Pairs(pairs.clone()))?;
    let comparison = compare_with_reference(&result, &reference, ens.threshold)?;

    let mut table = Table::new([
        "omega", "element", "re_mean", "im_mean", "re_stderr", "im_stderr",
    ]);
    for (w, &omega) in result.omegas.iter().enumerate() {
        for (k, &(i, j)) in result.pairs.iter().enumerate() {
            let m = result.mean(w, k);
            let (se_re, se_im) = result.stderr(w, k);
            table.push(vec![
                Cell::Num(omega),
                Cell::Text(format!("G_{i}_{j}")),
                Cell::Num(m.re),
                Cell::Num(m.im),
                Cell::Num(se_re),
                Cell::Num(se_im),
            ]);
        }
    }
    let csv = output_path(&ctx.file, &ctx.overrides, "mc_compare.csv");
    write_file(&csv, &table.to_csv_string())?;
    let summary = McSummary {
        command: "mc-compare",
        model: model.echo(),
        grid: grid_echo(grid.omegas(), explicit, ens.eta, pad),
        n_samples: result.n_samples,
        seed: ens.seed,
        ensemble: ens,
        elements: pairs,
        csv: csv.display().to_string(),
        max_deviation: comparison.max_deviation,
        fraction_within: comparison.fraction_within,
        comparison,
    };
    let json = summary_path(&csv);
    write_json(&json, &summary)?;
    ctx.note(format!(
        "mc-compare: {:.2}% of cells within {} stderr, max deviation {:.3} -> {}, {}",
        100.0 * comparison.fraction_within,
        comparison.threshold,
        comparison.max_deviation,
        csv.display(),
        json.display()
    ));
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, window: (f64, f64), value: f64, target: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            lo: window.0,
            hi: window.1,
            value,
            target,
            tolerance,
            pass: (value - target).abs() <= tolerance,
        }
    }
}

#[derive(Serialize)]
struct SumRuleSummary<'a> {
    command: &'static str,
    model: &'a ModelEcho,
    grid: GridEcho,
    checks: Vec<Check>,
    all_pass: bool,
}

pub fn sum_rules(ctx: &Context) -> Result<(), CliError> {
    let model = resolve_model(&ctx.file, &ctx.overrides)?;
    let pad = ctx.pad_factor();
    let explicit = explicit_grid(&ctx.file, &ctx.overrides)?;
    let (grid, checks, is_explicit) = match &model {
        Model::Graph { spec, .. } => {
            let eig = diagonalize(spec)?;
            let ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            let eta = ctx.overrides.eta.or(ctx.file.grid.eta).unwrap_or_else(|| default_eta(spec));
            let (omegas, is_explicit) = match explicit {
                Some(o) => (o, true),
                None => (
                    auto_window(&ev, spec.gamma(), pad)
                        .ok_or_else(|| CliError::Config("empty spectrum".into()))?
                        .with_points(defaults::SUM_RULE_POINTS)?
                        .points(),
                    false,
                ),
            };
            let grid = SpectralGrid::new(omegas, eta)?;
            let evals = evaluate_greens(spec, &grid, &Elements::Diagonal)?;
            let total = integrate_trapezoid(grid.omegas(), &total_dos(&evals)?)?;
            let n = spec.n_sites() as f64;
            let span = (grid.omegas()[0], *grid.omegas().last().unwrap());
            let checks = vec![Check::new("rho_total", span, total, n, 0.02 * n)];
            (grid, checks, is_explicit)
        }
        Model::Cavity { params, .. } => {
            let eta = closed_form_eta(ctx, params.gamma);
            let (omegas, is_explicit) = match explicit {
                Some(o) => (o, true),
                None => (
                    cavity::polariton_window(params, pad, defaults::SUM_RULE_POINTS)?.points(),
                    false,
                ),
            };
            let grid = SpectralGrid::new(omegas, eta)?;
            let span = (grid.omegas()[0], *grid.omegas().last().unwrap());
            let window = ctx.file.output.drho_m_window.map(|w| (w[0], w[1])).unwrap_or((
                params.epsilon_a - defaults::DRHO_M_HALF_WINDOW,
                params.epsilon_a + defaults::DRHO_M_HALF_WINDOW,
            ));
            let wide: CavityIntegrals = cavity::integrate_spectra(params, &grid, None)?;
            let inner = cavity::integrate_spectra(params, &grid, Some(window))?;
            let checks = vec![
                Check::new("rho_c", span, wide.rho_c, 1.0, 0.05),
                Check::new("delta_rho_m_band", window, inner.delta_rho_m, -1.0, 0.05),
                Check::new("delta_rho_m", span, wide.delta_rho_m, 0.0, 0.05),
                Check::new("delta_rho_t", span, wide.delta_rho_t, 1.0, 0.05),
            ];
            (grid, checks, is_explicit)
        }
    };
    let all_pass = checks.iter().all(|c| c.pass);
    let summary = SumRuleSummary {
        command: "sum-rules",
        model: model.echo(),
        grid: grid_echo(grid.omegas(), is_explicit, grid.eta(), pad),
        checks,
        all_pass,
    };
    let json = output_path(&ctx.file, &ctx.overrides, "sum_rules.json");
    write_json(&json, &summary)?;
    for c in &summary.checks {
        ctx.note(format!(
            "{} {}: {:.6} (target {} +/- {}) over [{:.4}, {:.4}]",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.target,
            c.tolerance,
            c.lo,
            c.hi
        ));
    }
    if all_pass {
        Ok(())
    } else {
        let failed: Vec<&str> = summary
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        Err(CliError::SumRules(failed.join(", ")))
    }
}
