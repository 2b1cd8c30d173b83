//! Disorder-averaged Green's functions.
//!
//! Averaging the resolvent over i.i.d. Cauchy site energies of half-width
//! `gamma` is the same as evaluating the clean resolvent with every
//! disordered diagonal entry shifted by `-i gamma`:
//!
//! ```text
//! <G(w)> = [ (w + i eta) I - H0 + i gamma D ]^-1
//! ```
//!
//! When `D = I` the shift commutes with `H0`, so one eigendecomposition
//! `H0 = U e U^T` gives every frequency as `U diag(1 / (w + i eta + i gamma - e_m)) U^T`
//! ([`averaged_greens`]). Mixed masks (the cavity mode carries no disorder)
//! go through a complex LU solve per frequency ([`solve_greens`]).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::HamiltonianSpec;
use crate::quadrature::Window;

/// Ordered real frequencies plus the retarded regularizer `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    omegas: Vec<f64>,
    eta: f64,
}

impl SpectralGrid {
    pub fn new(omegas: Vec<f64>, eta: f64) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::InvalidGrid("no frequencies".into()));
        }
        if omegas.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidGrid("non-finite frequency".into()));
        }
        if let Some(k) = omegas.windows(2).position(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::NonMonotonicGrid(k + 1));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidGrid(format!("eta must be >= 0, got {eta}")));
        }
        Ok(SpectralGrid { omegas, eta })
    }

    pub fn from_window(window: &Window, eta: f64) -> Result<Self> {
        Self::new(window.points(), eta)
    }

    pub fn single(omega: f64, eta: f64) -> Result<Self> {
        Self::new(vec![omega], eta)
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        Self::new(self.omegas.clone(), eta)
    }
}

/// Default `eta`: zero when every site is broadened by `gamma`, otherwise
/// `1e-3 * gamma` so isolated undisordered poles stay finite.
pub fn default_eta(spec: &HamiltonianSpec) -> f64 {
    if spec.uniform_disorder() && spec.gamma() > 0.0 {
        0.0
    } else if spec.gamma() > 0.0 {
        1e-3 * spec.gamma()
    } else {
        1e-3
    }
}

/// Spectrum of the clean Hamiltonian, eigenvalues ascending, eigenvectors
/// as orthonormal columns.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenSystem {
    pub fn n_sites(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `max |U^T U - I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let n = self.n_sites();
        (self.eigenvectors.transpose() * &self.eigenvectors - DMatrix::identity(n, n)).amax()
    }

    /// `max |H U - U e|`.
    pub fn residual(&self, h0: &DMatrix<f64>) -> f64 {
        let lhs = h0 * &self.eigenvectors;
        let rhs = &self.eigenvectors * DMatrix::from_diagonal(&self.eigenvalues);
        (lhs - rhs).amax()
    }
}

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

pub fn diagonalize(spec: &HamiltonianSpec) -> Result<EigenSystem> {
    diagonalize_matrix(spec.h0())
}

pub(crate) fn diagonalize_matrix(h: &DMatrix<f64>) -> Result<EigenSystem> {
    let eig = nalgebra::SymmetricEigen::try_new(h.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::ConvergenceFailure)?;
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let eigenvectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
    })
}

/// Which Green's matrix elements to materialize.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Elements {
    All,
    Diagonal,
    Pairs(Vec<(usize, usize)>),
}

impl Elements {
    fn validate(&self, n: usize) -> Result<()> {
        if let Elements::Pairs(pairs) = self {
            for &(i, j) in pairs {
                if i >= n || j >= n {
                    return Err(Error::ElementOutOfRange { i, j, n });
                }
            }
        }
        Ok(())
    }

    /// Concrete `(i, j)` list for an `n`-site system.
    pub fn pairs(&self, n: usize) -> Vec<(usize, usize)> {
        match self {
            Elements::All => (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect(),
            Elements::Diagonal => (0..n).map(|i| (i, i)).collect(),
            Elements::Pairs(p) => p.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GreensEntries {
    Matrix(DMatrix<Complex64>),
    Selected(Vec<((usize, usize), Complex64)>),
}

/// Averaged Green's function at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct GreensEvaluation {
    pub omega: f64,
    pub gamma: f64,
    pub eta: f64,
    pub n_sites: usize,
    pub entries: GreensEntries,
}

impl GreensEvaluation {
    pub fn get(&self, i: usize, j: usize) -> Option<Complex64> {
        match &self.entries {
            GreensEntries::Matrix(m) => (i < m.nrows() && j < m.ncols()).then(|| m[(i, j)]),
            GreensEntries::Selected(list) => list
                .iter()
                .find(|((a, b), _)| *a == i && *b == j)
                .map(|(_, v)| *v),
        }
    }

    pub fn matrix(&self) -> Option<&DMatrix<Complex64>> {
        match &self.entries {
            GreensEntries::Matrix(m) => Some(m),
            GreensEntries::Selected(_) => None,
        }
    }

    pub fn diagonal(&self) -> Result<Vec<Complex64>> {
        (0..self.n_sites)
            .map(|i| self.get(i, i).ok_or(Error::MissingElement { i, j: i }))
            .collect()
    }
}

/// `<G(w)>` from the eigendecomposition of `H0`.
///
/// Only valid when every site is disordered; specs with a partial mask are
/// handed to [`solve_greens`].
pub fn averaged_greens(
    eig: &EigenSystem,
    spec: &HamiltonianSpec,
    grid: &SpectralGrid,
    elements: &Elements,
) -> Result<Vec<GreensEvaluation>> {
    if !spec.uniform_disorder() {
        return solve_greens(spec, grid, elements);
    }
    let n = spec.n_sites();
    if eig.n_sites() != n {
        return Err(Error::InvalidSize(format!(
            "eigensystem has {} sites, spec has {n}",
            eig.n_sites()
        )));
    }
    elements.validate(n)?;
    let gamma = spec.gamma();
    let eta = grid.eta();
    let broadening = gamma + eta;
    let u = &eig.eigenvectors;
    let uc: DMatrix<Complex64> = u.map(|x| Complex64::new(x, 0.0));
    let uct = uc.transpose();
    let pairs = match elements {
        Elements::All => Vec::new(),
        other => other.pairs(n),
    };
    // weights[k][m] = U_im U_jm for the k-th requested pair
    let weights: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&(i, j)| (0..n).map(|m| u[(i, m)] * u[(j, m)]).collect())
        .collect();

    grid.omegas()
        .par_iter()
        .map(|&omega| {
            let z = Complex64::new(omega, broadening);
            let mut resolvent = Vec::with_capacity(n);
            for &e in eig.eigenvalues.iter() {
                let d = z - e;
                if d == Complex64::new(0.0, 0.0) {
                    return Err(Error::SingularResolvent { omega });
                }
                resolvent.push(d.inv());
            }
            let entries = match elements {
                Elements::All => {
                    let scaled = DMatrix::from_fn(n, n, |i, m| uc[(i, m)] * resolvent[m]);
                    GreensEntries::Matrix(scaled * &uct)
                }
                _ => GreensEntries::Selected(
                    pairs
                        .iter()
                        .zip(&weights)
                        .map(|(&pair, w)| {
                            let g = w
                                .iter()
                                .zip(&resolvent)
                                .fold(Complex64::new(0.0, 0.0), |acc, (wm, rm)| acc + rm * *wm);
                            (pair, g)
                        })
                        .collect(),
                ),
            };
            Ok(GreensEvaluation {
                omega,
                gamma,
                eta,
                n_sites: n,
                entries,
            })
        })
        .collect()
}

/// Shifted matrix `(w + i eta) I - H0 + i gamma D`.
pub fn shifted_matrix(spec: &HamiltonianSpec, omega: f64, eta: f64) -> DMatrix<Complex64> {
    let n = spec.n_sites();
    let gamma = spec.gamma();
    let mask = spec.disordered();
    DMatrix::from_fn(n, n, |i, j| {
        let h = Complex64::new(-spec.h0()[(i, j)], 0.0);
        if i == j {
            let broadening = if mask[i] { gamma + eta } else { eta };
            h + Complex64::new(omega, broadening)
        } else {
            h
        }
    })
}

/// `<G(w)>` by a dense complex solve at each frequency. Handles any
/// disorder mask.
pub fn solve_greens(
    spec: &HamiltonianSpec,
    grid: &SpectralGrid,
    elements: &Elements,
) -> Result<Vec<GreensEvaluation>> {
    let n = spec.n_sites();
    elements.validate(n)?;
    let eta = grid.eta();
    let gamma = spec.gamma();
    let pairs = match elements {
        Elements::All => Vec::new(),
        other => other.pairs(n),
    };
    let mut columns: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
    columns.sort_unstable();
    columns.dedup();

    grid.omegas()
        .par_iter()
        .map(|&omega| {
            let a = shifted_matrix(spec, omega, eta);
            let lu = a.lu();
            let entries = match elements {
                Elements::All => {
                    let inv = lu.try_inverse().ok_or(Error::SingularMatrix { omega })?;
                    GreensEntries::Matrix(inv)
                }
                _ => {
                    let mut solved: Vec<(usize, DVector<Complex64>)> =
                        Vec::with_capacity(columns.len());
                    for &j in &columns {
                        let mut e = DVector::zeros(n);
                        e[j] = Complex64::new(1.0, 0.0);
                        let x = lu.solve(&e).ok_or(Error::SingularMatrix { omega })?;
                        solved.push((j, x));
                    }
                    GreensEntries::Selected(
                        pairs
                            .iter()
                            .map(|&(i, j)| {
                                let col = &solved.iter().find(|(c, _)| *c == j).unwrap().1;
                                ((i, j), col[i])
                            })
                            .collect(),
                    )
                }
            };
            Ok(GreensEvaluation {
                omega,
                gamma,
                eta,
                n_sites: n,
                entries,
            })
        })
        .collect()
}

/// Picks the eigendecomposition route for uniform masks and the direct
/// solve otherwise.
pub fn evaluate_greens(
    spec: &HamiltonianSpec,
    grid: &SpectralGrid,
    elements: &Elements,
) -> Result<Vec<GreensEvaluation>> {
    if spec.uniform_disorder() {
        let eig = diagonalize(spec)?;
        averaged_greens(&eig, spec, grid, elements)
    } else {
        solve_greens(spec, grid, elements)
    }
}

/// `max |A G - I|` for a full Green's matrix at its own frequency.
pub fn resolvent_residual(spec: &HamiltonianSpec, eval: &GreensEvaluation) -> Option<f64> {
    let g = eval.matrix()?;
    let a = shifted_matrix(spec, eval.omega, eval.eta);
    let n = spec.n_sites();
    let id: DMatrix<Complex64> = DMatrix::identity(n, n);
    Some((a * g - id).iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Per-site density of states `-Im G_ii / pi`, indexed `[site][frequency]`.
pub fn site_dos(evals: &[GreensEvaluation]) -> Result<Vec<Vec<f64>>> {
    let Some(first) = evals.first() else {
        return Ok(Vec::new());
    };
    let n = first.n_sites;
    let mut out = vec![Vec::with_capacity(evals.len()); n];
    for ev in evals {
        for (i, g) in ev.diagonal()?.into_iter().enumerate() {
            out[i].push(-g.im / std::f64::consts::PI);
        }
    }
    Ok(out)
}

/// Total density of states `-Im Tr G / pi`.
pub fn total_dos(evals: &[GreensEvaluation]) -> Result<Vec<f64>> {
    evals
        .iter()
        .map(|ev| {
            let tr: Complex64 = ev.diagonal()?.into_iter().sum();
            Ok(-tr.im / std::f64::consts::PI)
        })
        .collect()
}
