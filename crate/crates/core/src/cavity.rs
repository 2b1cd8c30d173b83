//! Closed forms for one cavity mode coupled uniformly to `N` molecules whose
//! excitation energies carry Cauchy disorder.
//!
//! Eliminating the molecular block of `w - H` leaves the cavity element
//!
//! ```text
//! G_cc(w) = 1 / (w - e_c - S(w)),    S(w) = n V~^2 / (w - e_a + i gamma)
//! ```
//!
//! and everything else (bright-state element, molecular DOS change,
//! absorption) follows from `G_cc` and the molecular denominator. All
//! energies are in eV; `n V~^2 = N V^2` is the collective coupling in eV^2.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::engine::SpectralGrid;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_between, integrate_trapezoid, Window};

/// CODATA 2018 exact/recommended values.
pub mod constants {
    /// Vacuum permittivity, F/m.
    pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
    /// Speed of light, m/s.
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    /// Reduced Planck constant, J s.
    pub const HBAR: f64 = 1.054_571_817e-34;
    /// Elementary charge, C (also J per eV).
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    /// One Debye in C m.
    pub const DEBYE: f64 = 3.33564e-30;
}

const REL_CONSISTENCY: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Cavity mode energy, eV.
    pub epsilon_c: f64,
    /// Mean molecular excitation energy, eV.
    pub epsilon_a: f64,
    /// Cauchy half-width of the molecular energies, eV.
    pub gamma: f64,
    /// Molecule count; needed for matrix assembly and the per-cavity
    /// absorption total.
    pub n_molecules: Option<usize>,
    /// `V~ = sqrt(volume) * V`, eV m^{3/2}.
    pub v_tilde: f64,
    /// Molecules per m^3.
    pub number_density: f64,
    /// Transition dipole in Debye.
    pub mu_debye: Option<f64>,
}

impl CavityParams {
    /// Parameters given as number density and volume-scaled coupling.
    pub fn from_density(
        epsilon_c: f64,
        epsilon_a: f64,
        gamma: f64,
        number_density: f64,
        v_tilde: f64,
    ) -> Result<Self> {
        let p = CavityParams {
            epsilon_c,
            epsilon_a,
            gamma,
            n_molecules: None,
            v_tilde,
            number_density,
            mu_debye: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters given as a molecule count and per-molecule coupling `V`
    /// (eV). Stored with a unit volume so that `n V~^2 = N V^2`.
    pub fn from_molecules(
        epsilon_c: f64,
        epsilon_a: f64,
        gamma: f64,
        n_molecules: usize,
        coupling: f64,
    ) -> Result<Self> {
        if !coupling.is_finite() {
            return Err(Error::InvalidCoupling(coupling));
        }
        let p = CavityParams {
            epsilon_c,
            epsilon_a,
            gamma,
            n_molecules: Some(n_molecules),
            v_tilde: coupling,
            number_density: n_molecules as f64,
            mu_debye: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_molecules(mut self, n: usize) -> Self {
        self.n_molecules = Some(n);
        self
    }

    pub fn with_dipole(mut self, mu_debye: f64) -> Self {
        self.mu_debye = Some(mu_debye);
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {v}"),
                })
            }
        };
        finite("epsilon_c", self.epsilon_c)?;
        finite("epsilon_a", self.epsilon_a)?;
        if !self.v_tilde.is_finite() {
            return Err(Error::InvalidCoupling(self.v_tilde));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must be positive and finite, got {}", self.gamma),
            });
        }
        if !(self.number_density.is_finite() && self.number_density > 0.0) {
            return Err(Error::InvalidParameter {
                name: "number_density",
                reason: format!("must be positive, got {}", self.number_density),
            });
        }
        if self.n_molecules == Some(0) {
            return Err(Error::InvalidSize("cavity needs at least one molecule".into()));
        }
        if let Some(mu) = self.mu_debye {
            if !(mu.is_finite() && mu >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "mu_debye",
                    reason: format!("must be non-negative, got {mu}"),
                });
            }
        }
        Ok(())
    }

    /// Collective coupling `n V~^2 = N V^2`, eV^2.
    pub fn coupling_strength(&self) -> f64 {
        self.number_density * self.v_tilde * self.v_tilde
    }

    /// Per-molecule coupling `V = sqrt(n V~^2 / N)`, eV.
    pub fn molecule_coupling(&self) -> Result<f64> {
        let n = self.n_molecules.ok_or(Error::MissingMoleculeCount)?;
        Ok((self.coupling_strength() / n as f64).sqrt())
    }

    /// Check a separately supplied `(N, V)` against `(n, V~)`.
    pub fn check_molecule_coupling(&self, n: usize, v: f64) -> Result<()> {
        let n_v2 = n as f64 * v * v;
        let density_v2 = self.coupling_strength();
        let scale = n_v2.abs().max(density_v2.abs());
        if (n_v2 - density_v2).abs() > REL_CONSISTENCY * scale {
            return Err(Error::InconsistentCoupling { n_v2, density_v2 });
        }
        Ok(())
    }

    fn molecular_denominator(&self, z: Complex64) -> Complex64 {
        z - self.epsilon_a + Complex64::new(0.0, self.gamma)
    }
}

/// Polariton poles of `G_cc`, labelled so that `Re eps_plus >= Re eps_minus`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolaritonPoles {
    pub eps_plus: Complex64,
    pub eps_minus: Complex64,
}

impl PolaritonPoles {
    pub fn splitting(&self) -> f64 {
        self.eps_plus.re - self.eps_minus.re
    }
}

fn complex(omega: f64, eta: f64) -> Complex64 {
    Complex64::new(omega, eta)
}

/// Self-energy at complex frequency `z`.
pub fn self_energy_at(params: &CavityParams, z: Complex64) -> Complex64 {
    params.coupling_strength() / params.molecular_denominator(z)
}

/// `S(w) = n V~^2 / (w - e_a + i gamma)` on the real axis.
pub fn self_energy(params: &CavityParams, omega: f64) -> Complex64 {
    self_energy_at(params, complex(omega, 0.0))
}

/// Cavity element at complex frequency `z`; `Im z` regularizes the bare
/// cavity pole.
pub fn g_cc_at(params: &CavityParams, z: Complex64) -> Complex64 {
    (z - params.epsilon_c - self_energy_at(params, z)).inv()
}

pub fn g_cc(params: &CavityParams, omega: f64) -> Complex64 {
    g_cc_at(params, complex(omega, 0.0))
}

/// Bright-state element `<mol| G |mol>` at complex frequency `z`.
pub fn g_mol_mol_at(params: &CavityParams, z: Complex64) -> Complex64 {
    (z - params.epsilon_c) * g_cc_at(params, z) / params.molecular_denominator(z)
}

pub fn g_mol_mol(params: &CavityParams, omega: f64) -> Complex64 {
    g_mol_mol_at(params, complex(omega, 0.0))
}

/// Roots of `(w - e_c)(w - e_a + i gamma) = n V~^2`, principal square root.
pub fn polariton_poles(params: &CavityParams) -> PolaritonPoles {
    let gamma = Complex64::new(0.0, params.gamma);
    let mean = (params.epsilon_a + params.epsilon_c - gamma) * 0.5;
    let half_detuning = (params.epsilon_c - params.epsilon_a + gamma) * 0.5;
    let root = (half_detuning * half_detuning + params.coupling_strength()).sqrt();
    let (a, b) = (mean + root, mean - root);
    if a.re >= b.re {
        PolaritonPoles {
            eps_plus: a,
            eps_minus: b,
        }
    } else {
        PolaritonPoles {
            eps_plus: b,
            eps_minus: a,
        }
    }
}

fn curve(grid: &SpectralGrid, f: impl Fn(Complex64) -> f64) -> Vec<f64> {
    grid.omegas()
        .iter()
        .map(|&w| f(complex(w, grid.eta())))
        .collect()
}

/// Cavity density of states `-Im G_cc / pi`.
pub fn rho_c(params: &CavityParams, grid: &SpectralGrid) -> Vec<f64> {
    curve(grid, |z| -g_cc_at(params, z).im / std::f64::consts::PI)
}

/// Change of the summed molecular DOS caused by the coupling,
/// `-Im[n V~^2 G_cc / (w - e_a + i gamma)^2] / pi`.
pub fn delta_rho_m(params: &CavityParams, grid: &SpectralGrid) -> Vec<f64> {
    curve(grid, |z| {
        let d = params.molecular_denominator(z);
        -(params.coupling_strength() * g_cc_at(params, z) / (d * d)).im / std::f64::consts::PI
    })
}

/// Change of the total DOS relative to the bare molecules: `rho_c + delta_rho_m`.
pub fn delta_rho_t(params: &CavityParams, grid: &SpectralGrid) -> Vec<f64> {
    rho_c(params, grid)
        .into_iter()
        .zip(delta_rho_m(params, grid))
        .map(|(a, b)| a + b)
        .collect()
}

/// Absorption spectra in SI units.
///
/// `per_molecule` is `-(w |mu|^2 / (eps0 c hbar)) Im G_mol,mol` in m^2 (with
/// `w` and `G` in matching energy units the product is dimensionless).
/// `per_volume` multiplies by the number density (m^-1), `total` by the
/// molecule count when known (m^2), and `normalized` rescales
/// `per_molecule` to a unit maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct Absorption {
    pub per_molecule: Vec<f64>,
    pub per_volume: Vec<f64>,
    pub total: Option<Vec<f64>>,
    pub normalized: Vec<f64>,
}

pub fn absorption(params: &CavityParams, grid: &SpectralGrid) -> Result<Absorption> {
    use constants::*;
    let mu = params.mu_debye.ok_or(Error::MissingDipole)? * DEBYE;
    let prefactor = mu * mu / (EPSILON_0 * SPEED_OF_LIGHT * HBAR);
    let per_molecule = curve(grid, |z| -z.re * prefactor * g_mol_mol_at(params, z).im);
    let per_volume = per_molecule
        .iter()
        .map(|a| a * params.number_density)
        .collect();
    let total = params
        .n_molecules
        .map(|n| per_molecule.iter().map(|a| a * n as f64).collect());
    let max = per_molecule.iter().cloned().fold(0.0, f64::max);
    let normalized = per_molecule
        .iter()
        .map(|a| if max > 0.0 { a / max } else { 0.0 })
        .collect();
    Ok(Absorption {
        per_molecule,
        per_volume,
        total,
        normalized,
    })
}

/// Integration window spanning both polaritons plus `pad_factor * gamma`.
pub fn polariton_window(params: &CavityParams, pad_factor: f64, n_points: usize) -> Result<Window> {
    let poles = polariton_poles(params);
    let lo = poles
        .eps_minus
        .re
        .min(params.epsilon_a)
        .min(params.epsilon_c);
    let hi = poles.eps_plus.re.max(params.epsilon_a).max(params.epsilon_c);
    Window::new(lo - pad_factor * params.gamma, hi + pad_factor * params.gamma, n_points)
}

/// Integrals of the cavity spectra over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CavityIntegrals {
    pub rho_c: f64,
    pub delta_rho_m: f64,
    pub delta_rho_t: f64,
}

/// Trapezoid integrals of `rho_c`, `delta_rho_m` and `delta_rho_t` over the
/// grid, optionally restricted to `[lo, hi]`.
pub fn integrate_spectra(
    params: &CavityParams,
    grid: &SpectralGrid,
    restrict: Option<(f64, f64)>,
) -> Result<CavityIntegrals> {
    let xs = grid.omegas();
    let integrate = |ys: &[f64]| match restrict {
        Some((lo, hi)) => integrate_between(xs, ys, lo, hi),
        None => integrate_trapezoid(xs, ys),
    };
    let rc = rho_c(params, grid);
    let dm = delta_rho_m(params, grid);
    let dt: Vec<f64> = rc.iter().zip(&dm).map(|(a, b)| a + b).collect();
    Ok(CavityIntegrals {
        rho_c: integrate(&rc)?,
        delta_rho_m: integrate(&dm)?,
        delta_rho_t: integrate(&dt)?,
    })
}
