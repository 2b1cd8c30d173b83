//! Exact disorder-averaged one-particle spectra for tight-binding graphs and
//! the Tavis-Cummings cavity model.
//!
//! For i.i.d. Cauchy (Lorentzian) site energies of half-width `gamma`, the
//! disorder average of the resolvent equals the resolvent of the clean
//! Hamiltonian with `-i gamma` added to every disordered diagonal entry.
//! [`engine`] evaluates that deterministic non-Hermitian resolvent,
//! [`cavity`] holds the closed forms for the cavity model, and [`ensemble`]
//! is the brute-force sampler used to check both.

pub mod cavity;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod lattice;
pub mod quadrature;
pub mod report;

pub use cavity::{CavityParams, PolaritonPoles};
pub use engine::{
    averaged_greens, diagonalize, evaluate_greens, site_dos, solve_greens, total_dos,
    EigenSystem, Elements, GreensEvaluation, SpectralGrid,
};
pub use ensemble::{ensemble_average, EnsembleConfig, EnsembleResult};
pub use error::{Error, Result};
pub use lattice::{
    assemble_cavity, assemble_huckel, build_topology, DisorderSpec, Distribution,
    HamiltonianSpec, Topology, TopologyKind,
};
pub use quadrature::{Peak, Window};
