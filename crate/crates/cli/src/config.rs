//! Run configuration: a TOML file with optional `[model]` or `[cavity]`,
//! `[grid]`, `[ensemble]` and `[output]` tables, overridden by flags.
//!
//! Every default lives in [`defaults`]; the fully resolved configuration is
//! echoed into each JSON summary.

use std::path::{Path, PathBuf};

use disorder_core::lattice::HamiltonianSpec;
use disorder_core::{
    assemble_cavity, assemble_huckel, build_topology, CavityParams, DisorderSpec, Distribution,
    TopologyKind,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub mod defaults {
    /// Hückel site energy.
    pub const ALPHA: f64 = 0.0;
    /// Hückel hopping.
    pub const BETA: f64 = 1.0;
    /// Cauchy half-width when none is given, eV.
    pub const GAMMA: f64 = 0.1;
    /// Half-widths of padding around the spectrum for automatic grids.
    pub const PAD_FACTOR: f64 = 40.0;
    /// Points on an automatic grid for deterministic spectra.
    pub const GRID_POINTS: usize = 4001;
    /// Points on an automatic grid for Monte-Carlo runs.
    pub const MC_GRID_POINTS: usize = 201;
    /// Peak prominence as a fraction of the curve maximum.
    pub const PROMINENCE_FRACTION: f64 = 0.01;
    pub const SEED: u64 = 42;
    pub const SAMPLES: usize = 10_000;
    /// Realization regularizer for Monte-Carlo runs, eV.
    pub const MC_ETA: f64 = 0.02;
    /// Standard-error multiple for the Monte-Carlo comparison.
    pub const MC_THRESHOLD: f64 = 3.0;
    /// Half-width of the band-centre window for the molecular sum rule, eV.
    pub const DRHO_M_HALF_WINDOW: f64 = 0.1;
    /// Points used by the sum-rule integrals.
    pub const SUM_RULE_POINTS: usize = 40_001;
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<ModelSection>,
    pub cavity: Option<CavitySection>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub topology: Option<String>,
    pub n_sites: Option<usize>,
    pub edges: Option<Vec<[usize; 2]>>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub epsilon_c: Option<f64>,
    pub epsilon_a: Option<f64>,
    pub gamma: Option<f64>,
    pub number_density: Option<f64>,
    pub v_tilde: Option<f64>,
    pub n_molecules: Option<usize>,
    pub coupling: Option<f64>,
    pub volume: Option<f64>,
    pub mu_debye: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub n: Option<usize>,
    pub omegas: Option<Vec<f64>>,
    pub eta: Option<f64>,
    pub pad_factor: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub distribution: Option<String>,
    pub scale: Option<f64>,
    pub eta: Option<f64>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub elements: Option<Vec<[usize; 2]>>,
    pub prominence: Option<f64>,
    pub drho_m_window: Option<[f64; 2]>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text).map_err(|msg| CliError::ConfigParse(format!("{}: {msg}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

/// Flags that override file values.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub grid: Option<(f64, f64, usize)>,
    pub eta: Option<f64>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub model: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub eps_c: Option<f64>,
    pub eps_a: Option<f64>,
    pub density: Option<f64>,
    pub v_tilde: Option<f64>,
    pub molecules: Option<usize>,
    pub coupling: Option<f64>,
    pub mu: Option<f64>,
    pub elements: Option<Vec<(usize, usize)>>,
    pub distribution: Option<String>,
    pub scale: Option<f64>,
}

/// Parse `lo:hi:n`.
pub fn parse_grid_flag(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected lo:hi:n, got `{s}`"));
    }
    let lo = parts[0].trim().parse::<f64>().map_err(|e| format!("lo: {e}"))?;
    let hi = parts[1].trim().parse::<f64>().map_err(|e| format!("hi: {e}"))?;
    let n = parts[2].trim().parse::<usize>().map_err(|e| format!("n: {e}"))?;
    Ok((lo, hi, n))
}

/// Element list given on the command line as `i-j,k-l,...`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementList(pub Vec<(usize, usize)>);

pub fn parse_elements_flag(s: &str) -> Result<ElementList, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (a, b) = p
                .trim()
                .split_once('-')
                .ok_or_else(|| format!("expected i-j, got `{p}`"))?;
            let i = a.parse::<usize>().map_err(|e| format!("`{p}`: {e}"))?;
            let j = b.parse::<usize>().map_err(|e| format!("`{p}`: {e}"))?;
            Ok((i, j))
        })
        .collect::<Result<Vec<_>, String>>()
        .map(ElementList)
}

/// Resolved model, echoed verbatim into summaries.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelEcho {
    Graph {
        topology: TopologyKind,
        n_sites: usize,
        edges: Vec<(usize, usize)>,
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
    Cavity {
        params: CavityParams,
        coupling_strength: f64,
        molecule_coupling: Option<f64>,
    },
}

#[derive(Debug, Clone)]
pub enum Model {
    Graph {
        spec: HamiltonianSpec,
        echo: ModelEcho,
    },
    Cavity {
        params: CavityParams,
        echo: ModelEcho,
    },
}

impl Model {
    pub fn echo(&self) -> &ModelEcho {
        match self {
            Model::Graph { echo, .. } | Model::Cavity { echo, .. } => echo,
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            Model::Graph { spec, .. } => spec.gamma(),
            Model::Cavity { params, .. } => params.gamma,
        }
    }

    /// Matrix form; the cavity needs a molecule count.
    pub fn hamiltonian(&self) -> Result<HamiltonianSpec, CliError> {
        match self {
            Model::Graph { spec, .. } => Ok(spec.clone()),
            Model::Cavity { params, .. } => assemble_cavity(params).map_err(|e| {
                CliError::Config(format!(
                    "cavity.n_molecules: a matrix model needs the molecule count ({e})"
                ))
            }),
        }
    }
}

fn field_err(field: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {e}"))
}

/// Parse `--model` shorthand: `star:7`, `chain:5`, `ring:6`, `complete:4`
/// or `cavity`.
fn model_shorthand(s: &str) -> Result<(String, Option<usize>), CliError> {
    match s.split_once(':') {
        Some((kind, n)) => {
            let n = n
                .parse::<usize>()
                .map_err(|e| field_err("--model", format!("`{s}`: {e}")))?;
            Ok((kind.to_string(), Some(n)))
        }
        None => Ok((s.to_string(), None)),
    }
}

pub fn resolve_model(file: &FileConfig, ov: &Overrides) -> Result<Model, CliError> {
    let mut model = file.model.clone();
    let mut cavity = file.cavity.clone();
    if let Some(m) = &ov.model {
        let (kind, n) = model_shorthand(m)?;
        if kind.eq_ignore_ascii_case("cavity") {
            model = None;
            cavity.get_or_insert_with(Default::default);
        } else {
            cavity = None;
            let sec = model.get_or_insert_with(Default::default);
            sec.topology = Some(kind);
            if n.is_some() {
                sec.n_sites = n;
            }
        }
    }
    let cavity_flags = ov.eps_c.is_some()
        || ov.eps_a.is_some()
        || ov.density.is_some()
        || ov.v_tilde.is_some()
        || ov.molecules.is_some()
        || ov.coupling.is_some()
        || ov.mu.is_some();
    if cavity_flags && model.is_none() {
        cavity.get_or_insert_with(Default::default);
    }

    match (model, cavity) {
        (Some(_), Some(_)) => Err(CliError::Config(
            "exactly one of [model] or [cavity] may be given".into(),
        )),
        (None, None) => Err(CliError::Config(
            "no model: supply [model] or [cavity] in --config, or --model".into(),
        )),
        (Some(sec), None) => resolve_graph(&sec, ov),
        (None, Some(sec)) => resolve_cavity(&sec, ov),
    }
}

fn resolve_graph(sec: &ModelSection, ov: &Overrides) -> Result<Model, CliError> {
    let kind: TopologyKind = sec
        .topology
        .as_deref()
        .ok_or_else(|| field_err("model.topology", "missing"))?
        .parse()
        .map_err(|e| field_err("model.topology", e))?;
    let edges: Option<Vec<(usize, usize)>> = sec
        .edges
        .as_ref()
        .map(|e| e.iter().map(|p| (p[0], p[1])).collect());
    let n_sites = match (sec.n_sites, &edges) {
        (Some(n), _) => n,
        (None, Some(e)) if kind == TopologyKind::Custom => {
            e.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0)
        }
        _ => return Err(field_err("model.n_sites", "missing")),
    };
    let topology =
        build_topology(kind, n_sites, edges.as_deref()).map_err(|e| field_err("model", e))?;
    let alpha = ov.alpha.or(sec.alpha).unwrap_or(defaults::ALPHA);
    let beta = ov.beta.or(sec.beta).unwrap_or(defaults::BETA);
    let gamma = ov.gamma.or(sec.gamma).unwrap_or(defaults::GAMMA);
    let spec = assemble_huckel(&topology, alpha, beta, gamma).map_err(|e| field_err("model", e))?;
    Ok(Model::Graph {
        spec,
        echo: ModelEcho::Graph {
            topology: kind,
            n_sites,
            edges: topology.edges().to_vec(),
            alpha,
            beta,
            gamma,
        },
    })
}

fn resolve_cavity(sec: &CavitySection, ov: &Overrides) -> Result<Model, CliError> {
    let need = |name: &str, v: Option<f64>| v.ok_or_else(|| field_err(name, "missing"));
    let epsilon_c = need("cavity.epsilon_c", ov.eps_c.or(sec.epsilon_c))?;
    let epsilon_a = ov.eps_a.or(sec.epsilon_a).unwrap_or(epsilon_c);
    let gamma = need("cavity.gamma", ov.gamma.or(sec.gamma))?;
    let density = ov.density.or(sec.number_density);
    let v_tilde = ov.v_tilde.or(sec.v_tilde);
    let n = ov.molecules.or(sec.n_molecules);
    let v = ov.coupling.or(sec.coupling);

    let mut params = match (density, v_tilde, n, v) {
        (Some(d), Some(vt), _, _) => {
            let p = CavityParams::from_density(epsilon_c, epsilon_a, gamma, d, vt)
                .map_err(|e| field_err("cavity", e))?;
            if let (Some(n), Some(v)) = (n, v) {
                p.check_molecule_coupling(n, v)
                    .map_err(|e| field_err("cavity.coupling", e))?;
            }
            p
        }
        (_, _, Some(n), Some(v)) => match sec.volume {
            Some(vol) => {
                if !(vol.is_finite() && vol > 0.0) {
                    return Err(field_err("cavity.volume", "must be positive"));
                }
                CavityParams::from_density(epsilon_c, epsilon_a, gamma, n as f64 / vol, vol.sqrt() * v)
                    .map_err(|e| field_err("cavity", e))?
            }
            None => CavityParams::from_molecules(epsilon_c, epsilon_a, gamma, n, v)
                .map_err(|e| field_err("cavity", e))?,
        },
        _ => {
            return Err(field_err(
                "cavity",
                "give either (number_density, v_tilde) or (n_molecules, coupling)",
            ))
        }
    };
    if let Some(n) = n {
        params = params.with_molecules(n);
    }
    if let Some(mu) = ov.mu.or(sec.mu_debye) {
        params = params.with_dipole(mu);
    }
    params.validate().map_err(|e| field_err("cavity", e))?;
    let molecule_coupling = params.molecule_coupling().ok();
    Ok(Model::Cavity {
        params,
        echo: ModelEcho::Cavity {
            params,
            coupling_strength: params.coupling_strength(),
            molecule_coupling,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GridEcho {
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
    pub explicit: bool,
    pub eta: f64,
    pub pad_factor: f64,
}

/// Explicit grid from flags/file, if any. `None` means "derive from the
/// spectrum".
pub fn explicit_grid(file: &FileConfig, ov: &Overrides) -> Result<Option<Vec<f64>>, CliError> {
    if let Some((lo, hi, n)) = ov.grid {
        let w = disorder_core::Window::new(lo, hi, n).map_err(|e| field_err("--grid", e))?;
        return Ok(Some(w.points()));
    }
    let g = &file.grid;
    if let Some(omegas) = &g.omegas {
        return Ok(Some(omegas.clone()));
    }
    match (g.lo, g.hi, g.n) {
        (Some(lo), Some(hi), n) => {
            let w = disorder_core::Window::new(lo, hi, n.unwrap_or(defaults::GRID_POINTS))
                .map_err(|e| field_err("grid", e))?;
            Ok(Some(w.points()))
        }
        (None, None, _) => Ok(None),
        _ => Err(field_err("grid", "lo and hi must be given together")),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleEcho {
    pub samples: usize,
    pub seed: u64,
    pub distribution: Distribution,
    pub scale: f64,
    pub eta: f64,
    pub threshold: f64,
}

pub fn resolve_ensemble(
    file: &FileConfig,
    ov: &Overrides,
    gamma: f64,
) -> Result<(EnsembleEcho, DisorderSpec), CliError> {
    let e = &file.ensemble;
    let distribution: Distribution = ov
        .distribution
        .as_deref()
        .or(e.distribution.as_deref())
        .unwrap_or("cauchy")
        .parse()
        .map_err(|err| field_err("ensemble.distribution", err))?;
    let scale = ov.scale.or(e.scale).unwrap_or(gamma);
    let disorder =
        DisorderSpec::new(distribution, scale).map_err(|err| field_err("ensemble.scale", err))?;
    let echo = EnsembleEcho {
        samples: ov.samples.or(e.samples).unwrap_or(defaults::SAMPLES),
        seed: ov.seed.or(e.seed).unwrap_or(defaults::SEED),
        distribution,
        scale,
        eta: ov.eta.or(e.eta).unwrap_or(defaults::MC_ETA),
        threshold: e.threshold.unwrap_or(defaults::MC_THRESHOLD),
    };
    Ok((echo, disorder))
}

pub fn output_path(file: &FileConfig, ov: &Overrides, fallback: &str) -> PathBuf {
    ov.out
        .clone()
        .or_else(|| file.output.path.clone())
        .unwrap_or_else(|| PathBuf::from(fallback))
}

pub fn elements(file: &FileConfig, ov: &Overrides) -> Vec<(usize, usize)> {
    ov.elements.clone().unwrap_or_else(|| {
        file.output
            .elements
            .as_ref()
            .map(|e| e.iter().map(|p| (p[0], p[1])).collect())
            .unwrap_or_default()
    })
}
