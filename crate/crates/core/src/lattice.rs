//! Graph topologies and the clean Hamiltonians built on them.
//!
//! Index 0 is always the hub of a star and the cavity mode of the
//! Tavis-Cummings layout, so CSV column order is stable across models.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cavity::CavityParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Chain,
    Ring,
    Star,
    Complete,
    Custom,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TopologyKind::Chain => "chain",
            TopologyKind::Ring => "ring",
            TopologyKind::Star => "star",
            TopologyKind::Complete => "complete",
            TopologyKind::Custom => "custom",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chain" | "linear" => Ok(TopologyKind::Chain),
            "ring" | "cycle" | "hexagon" => Ok(TopologyKind::Ring),
            "star" => Ok(TopologyKind::Star),
            "complete" => Ok(TopologyKind::Complete),
            "custom" => Ok(TopologyKind::Custom),
            other => Err(Error::InvalidParameter {
                name: "topology",
                reason: format!("unknown family `{other}`"),
            }),
        }
    }
}

/// A finite simple graph. Edges are stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    kind: TopologyKind,
    n_sites: usize,
    edges: Vec<(usize, usize)>,
}

impl Topology {
    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// 0/1 adjacency matrix.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n_sites, self.n_sites);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    /// Number of edges touching `site`.
    pub fn degree(&self, site: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(i, j)| i == site || j == site)
            .count()
    }
}

/// Validate and build a topology. Named families ignore `edges`; `Custom`
/// requires a non-empty edge list of 0-based index pairs.
pub fn build_topology(
    kind: TopologyKind,
    n_sites: usize,
    edges: Option<&[(usize, usize)]>,
) -> Result<Topology> {
    if n_sites == 0 {
        return Err(Error::InvalidSize("a topology needs at least one site".into()));
    }
    let raw: Vec<(usize, usize)> = match kind {
        TopologyKind::Chain => (1..n_sites).map(|i| (i - 1, i)).collect(),
        TopologyKind::Ring => {
            if n_sites < 3 {
                return Err(Error::InvalidSize(format!(
                    "ring needs n >= 3, got {n_sites}"
                )));
            }
            (0..n_sites).map(|i| (i, (i + 1) % n_sites)).collect()
        }
        TopologyKind::Star => (1..n_sites).map(|leaf| (0, leaf)).collect(),
        TopologyKind::Complete => (0..n_sites)
            .flat_map(|i| ((i + 1)..n_sites).map(move |j| (i, j)))
            .collect(),
        TopologyKind::Custom => match edges {
            Some(e) if !e.is_empty() => e.to_vec(),
            _ => {
                return Err(Error::InvalidSize(
                    "custom topology needs a non-empty edge list".into(),
                ))
            }
        },
    };

    let mut seen = BTreeSet::new();
    let mut normalized = Vec::with_capacity(raw.len());
    for (i, j) in raw {
        if i >= n_sites || j >= n_sites {
            return Err(Error::InvalidEdge {
                i,
                j,
                n_sites,
                reason: "index out of range",
            });
        }
        if i == j {
            return Err(Error::InvalidEdge {
                i,
                j,
                n_sites,
                reason: "self-loop",
            });
        }
        let key = (i.min(j), i.max(j));
        if !seen.insert(key) {
            return Err(Error::InvalidEdge {
                i,
                j,
                n_sites,
                reason: "duplicate edge",
            });
        }
        normalized.push(key);
    }

    Ok(Topology {
        kind,
        n_sites,
        edges: normalized,
    })
}

/// Real symmetric clean Hamiltonian plus the Cauchy half-width of the
/// on-site disorder and a mask of which sites carry it.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    h0: DMatrix<f64>,
    gamma: f64,
    hopping: f64,
    disordered: Vec<bool>,
}

impl HamiltonianSpec {
    /// Wrap an arbitrary symmetric matrix with every site disordered.
    ///
    /// `gamma = 0` is accepted here and denotes the clean system; the
    /// model assemblers insist on `gamma > 0`.
    pub fn from_matrix(h0: DMatrix<f64>, gamma: f64) -> Result<Self> {
        let n = h0.nrows();
        Self::with_mask(h0, gamma, vec![true; n])
    }

    pub fn with_mask(h0: DMatrix<f64>, gamma: f64, disordered: Vec<bool>) -> Result<Self> {
        if h0.nrows() == 0 || h0.nrows() != h0.ncols() {
            return Err(Error::InvalidSize(format!(
                "Hamiltonian must be square and non-empty, got {}x{}",
                h0.nrows(),
                h0.ncols()
            )));
        }
        if disordered.len() != h0.nrows() {
            return Err(Error::InvalidSize(format!(
                "disorder mask has {} entries for {} sites",
                disordered.len(),
                h0.nrows()
            )));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must be finite and non-negative, got {gamma}"),
            });
        }
        let n = h0.nrows();
        for i in 0..n {
            for j in 0..n {
                if !h0[(i, j)].is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "h0",
                        reason: format!("non-finite entry at ({i}, {j})"),
                    });
                }
            }
            for j in (i + 1)..n {
                let diff = (h0[(i, j)] - h0[(j, i)]).abs();
                if diff != 0.0 {
                    return Err(Error::NotSymmetric { i, j, diff });
                }
            }
        }
        let hopping = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| h0[(i, j)])
            .find(|v| *v != 0.0)
            .unwrap_or(0.0);
        Ok(HamiltonianSpec {
            h0,
            gamma,
            hopping,
            disordered,
        })
    }

    pub fn h0(&self) -> &DMatrix<f64> {
        &self.h0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_sites(&self) -> usize {
        self.h0.nrows()
    }

    /// Site energies (diagonal of `h0`).
    pub fn onsite(&self) -> Vec<f64> {
        self.h0.diagonal().iter().copied().collect()
    }

    /// Uniform hopping used to assemble the model (first non-zero
    /// off-diagonal for matrices supplied directly).
    pub fn hopping(&self) -> f64 {
        self.hopping
    }

    pub fn disordered(&self) -> &[bool] {
        &self.disordered
    }

    /// True when every site carries the `-i gamma` shift, i.e. the shift is a
    /// multiple of the identity and the eigenbasis of `h0` diagonalizes it.
    pub fn uniform_disorder(&self) -> bool {
        self.disordered.iter().all(|&d| d)
    }

    /// Same matrix, different half-width.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::with_mask(self.h0.clone(), gamma, self.disordered.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Cauchy,
    Gaussian,
    Uniform,
}

impl std::str::FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cauchy" | "lorentz" | "lorentzian" => Ok(Distribution::Cauchy),
            "gaussian" | "normal" => Ok(Distribution::Gaussian),
            "uniform" | "box" => Ok(Distribution::Uniform),
            other => Err(Error::InvalidParameter {
                name: "distribution",
                reason: format!("unknown distribution `{other}`"),
            }),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distribution::Cauchy => "cauchy",
            Distribution::Gaussian => "gaussian",
            Distribution::Uniform => "uniform",
        })
    }
}

/// On-site disorder law. `scale` is the Cauchy half-width, the Gaussian
/// standard deviation, or the half-width `w` of the uniform box `(-w, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub distribution: Distribution,
    pub scale: f64,
}

impl DisorderSpec {
    pub fn new(distribution: Distribution, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter {
                name: "scale",
                reason: format!("must be positive and finite, got {scale}"),
            });
        }
        Ok(DisorderSpec {
            distribution,
            scale,
        })
    }

    pub fn cauchy(gamma: f64) -> Result<Self> {
        Self::new(Distribution::Cauchy, gamma)
    }

    /// Probability density at `xi`.
    pub fn density(&self, xi: f64) -> f64 {
        let s = self.scale;
        match self.distribution {
            Distribution::Cauchy => s / (std::f64::consts::PI * (s * s + xi * xi)),
            Distribution::Gaussian => {
                (-0.5 * (xi / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
            }
            Distribution::Uniform => {
                if xi.abs() < s {
                    0.5 / s
                } else {
                    0.0
                }
            }
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must be positive and finite, got {gamma}"),
        })
    }
}

/// Hückel Hamiltonian: `alpha` on the diagonal, `beta` on every edge.
pub fn assemble_huckel(
    topology: &Topology,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> Result<HamiltonianSpec> {
    check_gamma(gamma)?;
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidParameter {
            name: "alpha/beta",
            reason: "must be finite".into(),
        });
    }
    let n = topology.n_sites();
    let mut h0 = DMatrix::from_diagonal_element(n, n, alpha);
    for &(i, j) in topology.edges() {
        h0[(i, j)] = beta;
        h0[(j, i)] = beta;
    }
    let mut spec = HamiltonianSpec::from_matrix(h0, gamma)?;
    spec.hopping = beta;
    Ok(spec)
}

/// Tavis-Cummings layout: site 0 is the cavity mode (energy `epsilon_c`,
/// never disordered), sites `1..=N` are molecules at `epsilon_a`, each
/// coupled to the cavity by `V = sqrt(density * v_tilde^2 / N)`.
pub fn assemble_cavity(params: &CavityParams) -> Result<HamiltonianSpec> {
    params.validate()?;
    let n = params.n_molecules.ok_or(Error::MissingMoleculeCount)?;
    if n == 0 {
        return Err(Error::InvalidSize("cavity needs at least one molecule".into()));
    }
    let v = params.molecule_coupling()?;
    if !v.is_finite() {
        return Err(Error::InvalidCoupling(v));
    }
    let dim = n + 1;
    let mut h0 = DMatrix::from_diagonal_element(dim, dim, params.epsilon_a);
    h0[(0, 0)] = params.epsilon_c;
    for m in 1..dim {
        h0[(0, m)] = v;
        h0[(m, 0)] = v;
    }
    let mut mask = vec![true; dim];
    mask[0] = false;
    let mut spec = HamiltonianSpec::with_mask(h0, params.gamma, mask)?;
    spec.hopping = v;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
        let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    #[test]
    fn smallest_chain() {
        let t = build_topology(TopologyKind::Chain, 2, None).unwrap();
        assert_eq!(t.edges(), &[(0, 1)]);
        let single = build_topology(TopologyKind::Chain, 1, None).unwrap();
        assert!(single.edges().is_empty());
    }

    #[test]
    fn star_seven() {
        let t = build_topology(TopologyKind::Star, 7, None).unwrap();
        assert_eq!(t.edges().len(), 6);
        assert_eq!(t.degree(0), 6);
        for leaf in 1..7 {
            assert_eq!(t.degree(leaf), 1);
            assert!(t.edges().contains(&(0, leaf)));
        }
    }

    #[test]
    fn hexagon_edges() {
        let t = build_topology(TopologyKind::Ring, 6, None).unwrap();
        let expected = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)];
        assert_eq!(t.edges(), &expected);
    }

    #[test]
    fn topology_errors() {
        assert!(matches!(
            build_topology(TopologyKind::Ring, 2, None),
            Err(Error::InvalidSize(_))
        ));
        assert!(matches!(
            build_topology(TopologyKind::Chain, 0, None),
            Err(Error::InvalidSize(_))
        ));
        assert!(matches!(
            build_topology(TopologyKind::Custom, 3, None),
            Err(Error::InvalidSize(_))
        ));
        assert!(matches!(
            build_topology(TopologyKind::Custom, 3, Some(&[(0, 3)])),
            Err(Error::InvalidEdge { .. })
        ));
        assert!(matches!(
            build_topology(TopologyKind::Custom, 3, Some(&[(1, 1)])),
            Err(Error::InvalidEdge { reason: "self-loop", .. })
        ));
        assert!(matches!(
            build_topology(TopologyKind::Custom, 3, Some(&[(0, 1), (1, 0)])),
            Err(Error::InvalidEdge { reason: "duplicate edge", .. })
        ));
    }

    #[test]
    fn huckel_chain_three() {
        let t = build_topology(TopologyKind::Chain, 3, None).unwrap();
        let spec = assemble_huckel(&t, 0.0, 1.0, 0.1).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 1., 0., 1., 0.]);
        assert_eq!(spec.h0(), &expected);
        assert_eq!(spec.hopping(), 1.0);
        assert!(spec.uniform_disorder());
    }

    #[test]
    fn huckel_star_hub_row() {
        let t = build_topology(TopologyKind::Star, 7, None).unwrap();
        let spec = assemble_huckel(&t, 0.0, 1.0, 0.1).unwrap();
        let row: Vec<f64> = spec.h0().row(0).iter().copied().collect();
        assert_eq!(row, vec![0., 1., 1., 1., 1., 1., 1.]);
    }

    #[test]
    fn huckel_rejects_bad_gamma() {
        let t = build_topology(TopologyKind::Chain, 3, None).unwrap();
        assert!(assemble_huckel(&t, 0.0, 1.0, 0.0).is_err());
        assert!(assemble_huckel(&t, 0.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn hexagon_spectrum_is_benzene() {
        let t = build_topology(TopologyKind::Ring, 6, None).unwrap();
        let spec = assemble_huckel(&t, 0.0, 1.0, 0.1).unwrap();
        let ev = sorted_eigenvalues(spec.h0());
        for (got, want) in ev.iter().zip([-2.0, -1.0, -1.0, 1.0, 1.0, 2.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn star_spectrum() {
        let t = build_topology(TopologyKind::Star, 7, None).unwrap();
        let ev = sorted_eigenvalues(&t.adjacency());
        let r = 6f64.sqrt();
        assert_abs_diff_eq!(ev[0], -r, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[6], r, epsilon = 1e-12);
        for e in &ev[1..6] {
            assert_abs_diff_eq!(*e, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn chain_spectrum_closed_form() {
        for n in 1..=12 {
            let t = build_topology(TopologyKind::Chain, n, None).unwrap();
            let ev = sorted_eigenvalues(&t.adjacency());
            let mut closed: Vec<f64> = (1..=n)
                .map(|m| 2.0 * (m as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
                .collect();
            closed.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in ev.iter().zip(&closed) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn cavity_two_level() {
        let p = CavityParams::from_molecules(0.0, 0.0, 0.1, 1, 1.0).unwrap();
        let spec = assemble_cavity(&p).unwrap();
        assert_eq!(spec.h0(), &DMatrix::from_row_slice(2, 2, &[0., 1., 1., 0.]));
        assert_eq!(spec.disordered(), &[false, true]);
        assert!(!spec.uniform_disorder());
    }

    #[test]
    fn cavity_is_scaled_star() {
        let v = 0.37;
        let p = CavityParams::from_molecules(2.1, 2.1, 0.02, 6, v).unwrap();
        let spec = assemble_cavity(&p).unwrap();
        let star = build_topology(TopologyKind::Star, 7, None).unwrap();
        let expected = star.adjacency() * v + DMatrix::from_diagonal_element(7, 7, 2.1);
        assert!((spec.h0() - expected).amax() < 1e-15);
    }

    #[test]
    fn cavity_needs_count() {
        let p = CavityParams::from_density(2.1, 2.1, 0.02, 1.16e25, 4.06e-14).unwrap();
        assert_eq!(assemble_cavity(&p), Err(Error::MissingMoleculeCount));
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0 + 1e-15, 0.0]);
        assert!(matches!(
            HamiltonianSpec::from_matrix(m, 0.1),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn cauchy_density_normalized_shape() {
        let d = DisorderSpec::cauchy(0.5).unwrap();
        assert_abs_diff_eq!(d.density(0.0), 1.0 / (0.5 * std::f64::consts::PI), epsilon = 1e-15);
        assert!(DisorderSpec::new(Distribution::Uniform, 0.0).is_err());
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn assembled_matrices_exactly_symmetric(
            kind in prop_oneof![Just(TopologyKind::Chain), Just(TopologyKind::Ring), Just(TopologyKind::Star), Just(TopologyKind::Complete)],
            n in 3usize..20,
            alpha in -2.0f64..2.0,
            beta in -2.0f64..2.0,
        ) {
            let t = build_topology(kind, n, None).unwrap();
            let spec = assemble_huckel(&t, alpha, beta, 0.1).unwrap();
            let h = spec.h0();
            prop_assert!(h == &h.transpose());
            prop_assert!(spec.disordered().iter().all(|&d| d));
        }

        #[test]
        fn chain_matches_closed_form(n in 1usize..40) {
            let t = build_topology(TopologyKind::Chain, n, None).unwrap();
            let ev = sorted_eigenvalues(&t.adjacency());
            let mut want: Vec<f64> = (1..=n)
                .map(|m| 2.0 * (m as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
                .collect();
            want.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in ev.iter().zip(&want) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }

        #[test]
        fn cavity_pattern_is_weighted_star(n in 1usize..30, v in 0.01f64..1.0, ec in -1.0f64..1.0, ea in -1.0f64..1.0) {
            let p = CavityParams::from_molecules(ec, ea, 0.05, n, v).unwrap();
            let spec = assemble_cavity(&p).unwrap();
            let star = build_topology(TopologyKind::Star, n + 1, None).unwrap().adjacency();
            let mut want = star * v;
            want[(0, 0)] = ec;
            for i in 1..=n {
                want[(i, i)] = ea;
            }
            prop_assert!((spec.h0() - want).amax() <= 1e-15);
            prop_assert!(!spec.disordered()[0] && spec.disordered()[1..].iter().all(|&d| d));
        }
    }
}
