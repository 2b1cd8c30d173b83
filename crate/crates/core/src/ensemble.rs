//! Brute-force disorder averaging.
//!
//! Draws explicit site energies, computes the exact resolvent of each
//! realization at `w + i eta`, and accumulates a running mean and variance
//! per Green's element. This is the independent check on the `-i gamma`
//! substitution and the only route for non-Cauchy disorder.
//!
//! Sample `k` always uses ChaCha8 stream `k` of the configured seed, and
//! samples are reduced in fixed-size blocks merged in block order, so the
//! result is bit-identical regardless of how rayon schedules the blocks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;

use crate::cavity::CavityParams;
use crate::engine::{diagonalize_matrix, Elements, GreensEvaluation, SpectralGrid};
use crate::error::{Error, Result};
use crate::lattice::{DisorderSpec, Distribution, HamiltonianSpec};

const BLOCK_SIZE: usize = 512;

/// How each realization's resolvent is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RealizationSolver {
    /// Diagonalize the real symmetric realization once, then sum poles.
    #[default]
    Spectral,
    /// Complex LU solve at every frequency.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub disorder: DisorderSpec,
    pub eta: f64,
    pub solver: RealizationSolver,
}

impl EnsembleConfig {
    pub fn new(n_samples: usize, seed: u64, disorder: DisorderSpec, eta: f64) -> Result<Self> {
        let cfg = EnsembleConfig {
            n_samples,
            seed,
            disorder,
            eta,
            solver: RealizationSolver::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_solver(mut self, solver: RealizationSolver) -> Self {
        self.solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter {
                name: "n_samples",
                reason: "need at least one sample".into(),
            });
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("realizations need eta > 0, got {}", self.eta),
            });
        }
        DisorderSpec::new(self.disorder.distribution, self.disorder.scale).map(|_| ())
    }
}

/// RNG for sample `index`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// I.i.d. draws from `dist`. Cauchy variates use `scale * tan(pi (u - 1/2))`
/// with `u` uniform on the open interval `(0, 1)`.
pub fn sample_disorder<R: Rng + ?Sized>(dist: &DisorderSpec, n_sites: usize, rng: &mut R) -> Vec<f64> {
    let s = dist.scale;
    (0..n_sites)
        .map(|_| match dist.distribution {
            Distribution::Cauchy => {
                let u = loop {
                    let u: f64 = rng.random();
                    if u > 0.0 {
                        break u;
                    }
                };
                s * (std::f64::consts::PI * (u - 0.5)).tan()
            }
            Distribution::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                s * z
            }
            Distribution::Uniform => loop {
                let x = rng.random_range(-s..s);
                if x != -s {
                    break x;
                }
            },
        })
        .collect()
}

/// Exact Green's elements of one real symmetric realization `h` at
/// `w + i eta`, laid out `[frequency][pair]`.
pub fn realization_greens(
    h: &DMatrix<f64>,
    omegas: &[f64],
    eta: f64,
    pairs: &[(usize, usize)],
    solver: RealizationSolver,
) -> Result<Vec<Complex64>> {
    let n = h.nrows();
    let mut out = Vec::with_capacity(omegas.len() * pairs.len());
    match solver {
        RealizationSolver::Spectral => {
            let eig = diagonalize_matrix(h)?;
            let u = &eig.eigenvectors;
            let weights: Vec<f64> = pairs
                .iter()
                .flat_map(|&(i, j)| (0..n).map(move |m| u[(i, m)] * u[(j, m)]))
                .collect();
            let mut resolvent = vec![Complex64::new(0.0, 0.0); n];
            for &w in omegas {
                let z = Complex64::new(w, eta);
                for (r, &e) in resolvent.iter_mut().zip(eig.eigenvalues.iter()) {
                    *r = (z - e).inv();
                }
                for wk in weights.chunks_exact(n) {
                    let g = wk
                        .iter()
                        .zip(&resolvent)
                        .fold(Complex64::new(0.0, 0.0), |acc, (a, r)| acc + r * *a);
                    out.push(g);
                }
            }
        }
        RealizationSolver::Direct => {
            let mut columns: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
            columns.sort_unstable();
            columns.dedup();
            for &w in omegas {
                let a = DMatrix::from_fn(n, n, |i, j| {
                    let d = if i == j { Complex64::new(w, eta) } else { Complex64::new(0.0, 0.0) };
                    d - h[(i, j)]
                });
                let lu = a.lu();
                let mut solved = Vec::with_capacity(columns.len());
                for &j in &columns {
                    let mut e = DVector::zeros(n);
                    e[j] = Complex64::new(1.0, 0.0);
                    solved.push(lu.solve(&e).ok_or(Error::SingularMatrix { omega: w })?);
                }
                for &(i, j) in pairs {
                    let k = columns.binary_search(&j).expect("column solved");
                    out.push(solved[k][i]);
                }
            }
        }
    }
    Ok(out)
}

/// Running mean and sum of squared deviations per real component.
#[derive(Debug, Clone, PartialEq)]
struct Moments {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Moments {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, values: &[Complex64]) {
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        let parts = values.iter().flat_map(|z| [z.re, z.im]);
        for ((m, s), x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(parts) {
            let d = x - *m;
            *m += d * inv;
            *s += d * (x - *m);
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        for k in 0..self.mean.len() {
            let d = other.mean[k] - self.mean[k];
            self.mean[k] += d * nb / n;
            self.m2[k] += other.m2[k] + d * d * na * nb / n;
        }
        self.count += other.count;
    }
}

/// Sample mean and standard error per `(frequency, element)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub omegas: Vec<f64>,
    pub pairs: Vec<(usize, usize)>,
    pub n_samples: usize,
    mean: Vec<Complex64>,
    variance: Vec<(f64, f64)>,
}

impl EnsembleResult {
    fn from_moments(omegas: Vec<f64>, pairs: Vec<(usize, usize)>, m: Moments) -> Self {
        let n = m.count as f64;
        let cells = m.mean.len() / 2;
        let mean = (0..cells)
            .map(|k| Complex64::new(m.mean[2 * k], m.mean[2 * k + 1]))
            .collect();
        let variance = (0..cells)
            .map(|k| {
                if m.count > 1 {
                    (m.m2[2 * k] / (n - 1.0), m.m2[2 * k + 1] / (n - 1.0))
                } else {
                    (0.0, 0.0)
                }
            })
            .collect();
        EnsembleResult {
            omegas,
            pairs,
            n_samples: m.count as usize,
            mean,
            variance,
        }
    }

    fn index(&self, omega_index: usize, pair_index: usize) -> usize {
        omega_index * self.pairs.len() + pair_index
    }

    pub fn mean(&self, omega_index: usize, pair_index: usize) -> Complex64 {
        self.mean[self.index(omega_index, pair_index)]
    }

    /// Sample variance of the real and imaginary parts.
    pub fn variance(&self, omega_index: usize, pair_index: usize) -> (f64, f64) {
        self.variance[self.index(omega_index, pair_index)]
    }

    /// Standard error of the mean of the real and imaginary parts.
    pub fn stderr(&self, omega_index: usize, pair_index: usize) -> (f64, f64) {
        let (vr, vi) = self.variance(omega_index, pair_index);
        let n = self.n_samples as f64;
        ((vr / n).sqrt(), (vi / n).sqrt())
    }

    pub fn pair_index(&self, i: usize, j: usize) -> Option<usize> {
        self.pairs.iter().position(|&p| p == (i, j))
    }

    /// `-Im <G_ii> / pi` along the grid for a diagonal pair.
    pub fn dos(&self, site: usize) -> Option<Vec<f64>> {
        let k = self.pair_index(site, site)?;
        Some(
            (0..self.omegas.len())
                .map(|w| -self.mean(w, k).im / std::f64::consts::PI)
                .collect(),
        )
    }

    pub fn max_variance(&self) -> f64 {
        self.variance
            .iter()
            .map(|&(a, b)| a.max(b))
            .fold(0.0, f64::max)
    }
}

fn run_blocks<F>(n_samples: usize, cells: usize, sample: F) -> Result<Moments>
where
    F: Fn(u64) -> Result<Vec<Complex64>> + Sync,
{
    let n_blocks = n_samples.div_ceil(BLOCK_SIZE);
    let blocks: Vec<Result<Moments>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK_SIZE;
            let end = (start + BLOCK_SIZE).min(n_samples);
            let mut m = Moments::new(2 * cells);
            for k in start..end {
                m.push(&sample(k as u64)?);
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::new(2 * cells);
    for block in blocks {
        total.merge(&block?);
    }
    Ok(total)
}

/// Monte-Carlo mean of the resolvent elements over disorder realizations
/// `H0 + diag(xi * mask)` evaluated at `w + i eta_config`.
///
/// Variates are drawn only for disordered sites, in index order.
///
/// The grid's own `eta` is ignored; realizations always use the ensemble's.
pub fn ensemble_average(
    spec: &HamiltonianSpec,
    config: &EnsembleConfig,
    grid: &SpectralGrid,
    elements: &Elements,
) -> Result<EnsembleResult> {
    config.validate()?;
    let n = spec.n_sites();
    let pairs = elements.pairs(n);
    for &(i, j) in &pairs {
        if i >= n || j >= n {
            return Err(Error::ElementOutOfRange { i, j, n });
        }
    }
    let omegas = grid.omegas().to_vec();
    let mask = spec.disordered();
    let h0 = spec.h0();
    let disordered: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
    let cells = omegas.len() * pairs.len();
    let moments = run_blocks(config.n_samples, cells, |k| {
        let mut rng = sample_rng(config.seed, k);
        let xi = sample_disorder(&config.disorder, disordered.len(), &mut rng);
        let mut h = h0.clone();
        for (&i, x) in disordered.iter().zip(&xi) {
            h[(i, i)] += x;
        }
        realization_greens(&h, &omegas, config.eta, &pairs, config.solver)
    })?;
    Ok(EnsembleResult::from_moments(omegas, pairs, moments))
}

/// Monte-Carlo mean of the cavity element `G_cc` for the Tavis-Cummings
/// model, using the exact per-realization Schur complement
/// `G_cc = 1 / (z - e_c - sum_i V^2 / (z - e_a - xi_i))`, O(N) per frequency.
pub fn ensemble_cavity_greens(
    params: &CavityParams,
    config: &EnsembleConfig,
    grid: &SpectralGrid,
) -> Result<EnsembleResult> {
    config.validate()?;
    params.validate()?;
    let n = params.n_molecules.ok_or(Error::MissingMoleculeCount)?;
    let v2 = params.molecule_coupling()?.powi(2);
    let omegas = grid.omegas().to_vec();
    let moments = run_blocks(config.n_samples, omegas.len(), |k| {
        let mut rng = sample_rng(config.seed, k);
        let xi = sample_disorder(&config.disorder, n, &mut rng);
        Ok(omegas
            .iter()
            .map(|&w| {
                let z = Complex64::new(w, config.eta);
                let sigma: Complex64 = xi
                    .iter()
                    .map(|x| (z - (params.epsilon_a + x)).inv())
                    .sum::<Complex64>()
                    * v2;
                (z - params.epsilon_c - sigma).inv()
            })
            .collect())
    })?;
    Ok(EnsembleResult::from_moments(omegas, vec![(0, 0)], moments))
}

/// Agreement between a Monte-Carlo mean and a reference evaluation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Comparison {
    pub cells: usize,
    pub cells_within: usize,
    pub fraction_within: f64,
    /// Largest |mean - reference| / stderr over all real components.
    pub max_deviation: f64,
    pub threshold: f64,
}

/// Counts `(frequency, element)` cells whose real and imaginary parts both
/// lie within `threshold` standard errors of `reference`.
pub fn compare_with_reference(
    result: &EnsembleResult,
    reference: &[GreensEvaluation],
    threshold: f64,
) -> Result<Comparison> {
    if reference.len() != result.omegas.len() {
        return Err(Error::InvalidGrid(format!(
            "reference has {} frequencies, ensemble has {}",
            reference.len(),
            result.omegas.len()
        )));
    }
    let deviation = |diff: f64, se: f64| {
        if diff == 0.0 {
            0.0
        } else if se > 0.0 {
            diff.abs() / se
        } else {
            f64::INFINITY
        }
    };
    let mut within = 0;
    let mut max_dev = 0.0f64;
    for (w, ev) in reference.iter().enumerate() {
        for (k, &(i, j)) in result.pairs.iter().enumerate() {
            let want = ev.get(i, j).ok_or(Error::MissingElement { i, j })?;
            let got = result.mean(w, k);
            let (se_re, se_im) = result.stderr(w, k);
            let d_re = deviation(got.re - want.re, se_re);
            let d_im = deviation(got.im - want.im, se_im);
            max_dev = max_dev.max(d_re).max(d_im);
            if d_re <= threshold && d_im <= threshold {
                within += 1;
            }
        }
    }
    let cells = reference.len() * result.pairs.len();
    Ok(Comparison {
        cells,
        cells_within: within,
        fraction_within: within as f64 / cells as f64,
        max_deviation: max_dev,
        threshold,
    })
}

/// Full width at half maximum of the tallest peak inside `[lo, hi]`.
///
/// The half-height crossings are located by linear interpolation. The peak
/// must be an interior local maximum of the window and its FWHM must span at
/// least 20 samples.
pub fn estimate_peak_width(xs: &[f64], ys: &[f64], window: (f64, f64)) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            xs: xs.len(),
            ys: ys.len(),
        });
    }
    let (lo, hi) = window;
    let inside: Vec<usize> = (0..xs.len()).filter(|&k| xs[k] >= lo && xs[k] <= hi).collect();
    let (Some(&first), Some(&last)) = (inside.first(), inside.last()) else {
        return Err(Error::PeakNotFound { lo, hi });
    };
    let top = inside
        .iter()
        .copied()
        .max_by(|&a, &b| ys[a].total_cmp(&ys[b]))
        .unwrap();
    if top == first || top == last || !(ys[top] > ys[top - 1] && ys[top] >= ys[top + 1]) {
        return Err(Error::PeakNotFound { lo, hi });
    }
    let half = 0.5 * ys[top];
    let unresolved = Error::UnresolvedWidth {
        center: xs[top],
        lo,
        hi,
    };
    let mut l = top;
    while ys[l] > half {
        if l == first {
            return Err(unresolved);
        }
        l -= 1;
    }
    let mut r = top;
    while ys[r] > half {
        if r == last {
            return Err(unresolved);
        }
        r += 1;
    }
    let cross = |a: usize, b: usize| xs[a] + (half - ys[a]) * (xs[b] - xs[a]) / (ys[b] - ys[a]);
    let left = cross(l, l + 1);
    let right = cross(r - 1, r);
    let width = right - left;
    let spacing = (xs[last] - xs[first]) / (last - first) as f64;
    if width / spacing < 20.0 {
        return Err(Error::InvalidGrid(format!(
            "peak at {} spans only {:.1} samples; refine the grid",
            xs[top],
            width / spacing
        )));
    }
    Ok(width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{evaluate_greens, solve_greens};
    use crate::lattice::{assemble_huckel, build_topology, TopologyKind};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn draws(dist: Distribution, scale: f64, n: usize, seed: u64) -> Vec<f64> {
        let spec = DisorderSpec::new(dist, scale).unwrap();
        sample_disorder(&spec, n, &mut sample_rng(seed, 0))
    }

    #[test]
    fn cauchy_median_and_quartiles() {
        let mut x = draws(Distribution::Cauchy, 1.0, 100_000, 7);
        let inside = x.iter().filter(|v| v.abs() <= 1.0).count() as f64 / x.len() as f64;
        // CDF(1) - CDF(-1) = (atan(1) - atan(-1)) / pi = 1/2
        assert_abs_diff_eq!(inside, 0.5, epsilon = 0.01);
        x.sort_by(f64::total_cmp);
        let median = 0.5 * (x[49_999] + x[50_000]);
        assert!(median.abs() < 0.02, "{median}");
    }

    #[test]
    fn uniform_support_and_mean() {
        let x = draws(Distribution::Uniform, 1.0, 100_000, 3);
        assert!(x.iter().all(|v| *v > -1.0 && *v < 1.0));
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 0.01);
    }

    #[test]
    fn gaussian_moments() {
        let x = draws(Distribution::Gaussian, 0.3, 100_000, 11);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 0.005);
        assert_abs_diff_eq!(var.sqrt(), 0.3, epsilon = 0.005);
    }

    #[test]
    fn streams_are_independent_of_order() {
        let spec = DisorderSpec::cauchy(0.1).unwrap();
        let a = sample_disorder(&spec, 4, &mut sample_rng(42, 17));
        let _ = sample_disorder(&spec, 4, &mut sample_rng(42, 3));
        let b = sample_disorder(&spec, 4, &mut sample_rng(42, 17));
        assert_eq!(a, b);
        assert_ne!(a, sample_disorder(&spec, 4, &mut sample_rng(42, 18)));
    }

    #[test]
    fn clean_realization_is_clean_resolvent() {
        let t = build_topology(TopologyKind::Star, 5, None).unwrap();
        let spec = assemble_huckel(&t, 0.0, 1.0, 1e-300).unwrap();
        let omegas = [-2.5, -0.3, 0.0, 0.9];
        let eta = 0.05;
        let pairs = Elements::All.pairs(5);
        let grid = SpectralGrid::new(omegas.to_vec(), eta).unwrap();
        let reference = solve_greens(&spec, &grid, &Elements::All).unwrap();
        for solver in [RealizationSolver::Spectral, RealizationSolver::Direct] {
            let g = realization_greens(spec.h0(), &omegas, eta, &pairs, solver).unwrap();
            for (w, ev) in reference.iter().enumerate() {
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    let d = g[w * pairs.len() + k] - ev.get(i, j).unwrap();
                    assert!(d.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_sample_has_zero_stderr() {
        let spec =
            HamiltonianSpec::from_matrix(DMatrix::from_element(1, 1, 0.0), 0.1).unwrap();
        let cfg = EnsembleConfig::new(1, 5, DisorderSpec::cauchy(0.1).unwrap(), 0.05).unwrap();
        let grid = SpectralGrid::new(vec![0.0, 0.5], 0.0).unwrap();
        let r = ensemble_average(&spec, &cfg, &grid, &Elements::Diagonal).unwrap();
        assert_eq!(r.n_samples, 1);
        assert_eq!(r.stderr(0, 0), (0.0, 0.0));
        let xi = sample_disorder(&cfg.disorder, 1, &mut sample_rng(5, 0))[0];
        let want = (Complex64::new(0.5, 0.05) - xi).inv();
        assert!((r.mean(1, 0) - want).norm() < 1e-15);
    }

    #[test]
    fn scalar_cauchy_average_adds_gamma() {
        let spec =
            HamiltonianSpec::from_matrix(DMatrix::from_element(1, 1, 0.0), 0.1).unwrap();
        let cfg =
            EnsembleConfig::new(100_000, 2024, DisorderSpec::cauchy(0.1).unwrap(), 0.05).unwrap();
        let grid = SpectralGrid::new(vec![-0.5, 0.0, 0.5], 0.0).unwrap();
        let r = ensemble_average(&spec, &cfg, &grid, &Elements::Diagonal).unwrap();
        for (w, &omega) in grid.omegas().iter().enumerate() {
            let exact = Complex64::new(omega, 0.15).inv();
            let got = r.mean(w, 0);
            let (se_re, se_im) = r.stderr(w, 0);
            assert!((got.re - exact.re).abs() <= 3.0 * se_re, "re at {omega}");
            assert!((got.im - exact.im).abs() <= 3.0 * se_im, "im at {omega}");
        }
        assert!(r.max_variance() <= (1.0f64 / 0.05).powi(2));
    }

    #[test]
    fn gaussian_control_misses_the_substitution() {
        let spec =
            HamiltonianSpec::from_matrix(DMatrix::from_element(1, 1, 0.0), 0.1).unwrap();
        let dist = DisorderSpec::new(Distribution::Gaussian, 0.1).unwrap();
        let cfg = EnsembleConfig::new(100_000, 9, dist, 0.05).unwrap();
        let grid = SpectralGrid::single(0.0, 0.0).unwrap();
        let r = ensemble_average(&spec, &cfg, &grid, &Elements::Diagonal).unwrap();
        let exact = Complex64::new(0.0, 0.15).inv();
        let (_, se_im) = r.stderr(0, 0);
        assert!((r.mean(0, 0).im - exact.im).abs() > 3.0 * se_im);
    }

    #[test]
    fn star_matches_engine() {
        let t = build_topology(TopologyKind::Star, 7, None).unwrap();
        let spec = assemble_huckel(&t, 0.0, 1.0, 0.1).unwrap();
        let grid = SpectralGrid::new((0..21).map(|k| -3.0 + 0.3 * k as f64).collect(), 0.02)
            .unwrap();
        let cfg =
            EnsembleConfig::new(20_000, 77, DisorderSpec::cauchy(0.1).unwrap(), 0.02).unwrap();
        let r = ensemble_average(&spec, &cfg, &grid, &Elements::Diagonal).unwrap();
        let reference = evaluate_greens(&spec, &grid, &Elements::Diagonal).unwrap();
        let cmp = compare_with_reference(&r, &reference, 3.0).unwrap();
        assert!(cmp.fraction_within >= 0.97, "{cmp:?}");
    }

    #[test]
    fn deterministic_and_solver_independent() {
        let t = build_topology(TopologyKind::Chain, 4, None).unwrap();
        let spec = assemble_huckel(&t, 0.0, 1.0, 0.1).unwrap();
        let grid = SpectralGrid::new(vec![-1.0, 0.0, 0.7], 0.0).unwrap();
        let cfg =
            EnsembleConfig::new(1500, 1, DisorderSpec::cauchy(0.1).unwrap(), 0.02).unwrap();
        let a = ensemble_average(&spec, &cfg, &grid, &Elements::All).unwrap();
        let b = ensemble_average(&spec, &cfg, &grid, &Elements::All).unwrap();
        assert_eq!(a, b);
        let c = ensemble_average(
            &spec,
            &cfg.with_solver(RealizationSolver::Direct),
            &grid,
            &Elements::All,
        )
        .unwrap();
        for w in 0..3 {
            for k in 0..16 {
                assert!((a.mean(w, k) - c.mean(w, k)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn block_merge_matches_single_pass() {
        let values: Vec<Vec<Complex64>> = (0..1300)
            .map(|k| {
                let x = (k as f64 * 0.37).sin();
                vec![Complex64::new(x, x * x), Complex64::new(-x, 1.0)]
            })
            .collect();
        let mut single = Moments::new(4);
        for v in &values {
            single.push(v);
        }
        let mut merged = Moments::new(4);
        for chunk in values.chunks(BLOCK_SIZE) {
            let mut m = Moments::new(4);
            for v in chunk {
                m.push(v);
            }
            merged.merge(&m);
        }
        assert_eq!(single.count, merged.count);
        for k in 0..4 {
            assert_abs_diff_eq!(single.mean[k], merged.mean[k], epsilon = 1e-12);
            assert_abs_diff_eq!(single.m2[k], merged.m2[k], epsilon = 1e-9);
        }
    }

    #[test]
    fn cavity_schur_matches_matrix_realizations() {
        let p = CavityParams::from_molecules(0.2, 0.0, 0.1, 5, 0.3).unwrap();
        let spec = crate::lattice::assemble_cavity(&p).unwrap();
        let grid = SpectralGrid::new(vec![-0.6, 0.0, 0.25, 0.8], 0.0).unwrap();
        let cfg = EnsembleConfig::new(700, 3, DisorderSpec::cauchy(0.1).unwrap(), 0.02).unwrap();
        let fast = ensemble_cavity_greens(&p, &cfg, &grid).unwrap();
        let slow = ensemble_average(&spec, &cfg, &grid, &Elements::Pairs(vec![(0, 0)])).unwrap();
        for w in 0..4 {
            assert!((fast.mean(w, 0) - slow.mean(w, 0)).norm() < 1e-10);
        }
        let v2 = p.molecule_coupling().unwrap().powi(2);
        let mut acc = [Complex64::new(0.0, 0.0); 4];
        for k in 0..700u64 {
            let xi = sample_disorder(&cfg.disorder, 5, &mut sample_rng(3, k));
            for (w, &om) in grid.omegas().iter().enumerate() {
                let z = Complex64::new(om, 0.02);
                let s: Complex64 = xi.iter().map(|x| (z - x).inv()).sum::<Complex64>() * v2;
                acc[w] += (z - 0.2 - s).inv() / 700.0;
            }
        }
        for (w, a) in acc.iter().enumerate() {
            assert!((fast.mean(w, 0) - a).norm() < 1e-10);
        }
    }

    #[test]
    fn lorentzian_fwhm() {
        let xs: Vec<f64> = (0..4001).map(|k| -2.0 + k as f64 * 1e-3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.1 / (PI * (x * x + 0.01))).collect();
        let w = estimate_peak_width(&xs, &ys, (-1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(w, 0.2, epsilon = 1e-3);
    }

    #[test]
    fn width_errors() {
        let xs: Vec<f64> = (0..401).map(|k| -2.0 + k as f64 * 1e-2).collect();
        let rising: Vec<f64> = xs.iter().map(|x| x + 3.0).collect();
        assert!(matches!(
            estimate_peak_width(&xs, &rising, (-1.0, 1.0)),
            Err(Error::PeakNotFound { .. })
        ));
        let broad: Vec<f64> = xs.iter().map(|x| 1.0 / (x * x + 1.0)).collect();
        assert!(matches!(
            estimate_peak_width(&xs, &broad, (-0.5, 0.5)),
            Err(Error::UnresolvedWidth { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let d = DisorderSpec::cauchy(0.1).unwrap();
        assert!(EnsembleConfig::new(0, 1, d, 0.1).is_err());
        assert!(EnsembleConfig::new(10, 1, d, 0.0).is_err());
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn variance_bounded_by_inverse_eta(
            n in 1usize..6,
            eta in 0.005f64..0.2,
            dist in prop_oneof![Just(Distribution::Cauchy), Just(Distribution::Gaussian), Just(Distribution::Uniform)],
            seed in any::<u64>(),
        ) {
            let spec = huckel_chain(n);
            let grid = SpectralGrid::from_window(&crate::quadrature::Window::new(-3.0, 3.0, 31).unwrap(), 0.0).unwrap();
            let cfg = EnsembleConfig::new(200, seed, DisorderSpec::new(dist, 0.3).unwrap(), eta).unwrap();
            let r = ensemble_average(&spec, &cfg, &grid, &Elements::All).unwrap();
            prop_assert!(r.max_variance() <= 1.0 / (eta * eta));
        }

        #[test]
        fn same_seed_same_result(seed in any::<u64>(), samples in 1usize..1500) {
            let spec = huckel_chain(3);
            let grid = SpectralGrid::new(vec![-1.0, 0.0, 0.7], 0.0).unwrap();
            let cfg = EnsembleConfig::new(samples, seed, DisorderSpec::cauchy(0.1).unwrap(), 0.02).unwrap();
            let a = ensemble_average(&spec, &cfg, &grid, &Elements::Diagonal).unwrap();
            let b = ensemble_average(&spec, &cfg, &grid, &Elements::Diagonal).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    fn huckel_chain(n: usize) -> HamiltonianSpec {
        assemble_huckel(&build_topology(TopologyKind::Chain, n, None).unwrap(), 0.0, 1.0, 0.1).unwrap()
    }
}
