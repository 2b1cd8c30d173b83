//! Trapezoid sums, integration windows and peak picking on sampled curves.

use crate::error::{Error, Result};

/// Default number of Lorentzian half-widths added on each side of a spectrum.
pub const DEFAULT_PAD_FACTOR: f64 = 40.0;
/// Minimum number of samples for an automatically widened window.
pub const MIN_WINDOW_POINTS: usize = 4001;
/// Default peak prominence as a fraction of the global maximum.
pub const DEFAULT_PROMINENCE_FRACTION: f64 = 0.01;

/// Closed interval `[lo, hi]` sampled at `n_points` evenly spaced points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
}

impl Window {
    pub fn new(lo: f64, hi: f64, n_points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidGrid(format!("need lo < hi, got [{lo}, {hi}]")));
        }
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {n_points}"
            )));
        }
        Ok(Window { lo, hi, n_points })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n_points - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.n_points)
            .map(|k| {
                if k + 1 == self.n_points {
                    self.hi
                } else {
                    self.lo + k as f64 * step
                }
            })
            .collect()
    }

    pub fn with_points(self, n_points: usize) -> Result<Self> {
        Window::new(self.lo, self.hi, n_points)
    }
}

fn check_abscissae(xs: &[f64], ys_len: usize) -> Result<()> {
    if xs.len() != ys_len {
        return Err(Error::LengthMismatch {
            xs: xs.len(),
            ys: ys_len,
        });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidGrid("need at least two samples".into()));
    }
    if let Some(k) = xs.windows(2).position(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
        return Err(Error::NonMonotonicGrid(k + 1));
    }
    Ok(())
}

/// Composite trapezoid rule on a (possibly non-uniform) increasing grid.
pub fn integrate_trapezoid(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_abscissae(xs, ys.len())?;
    Ok(xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum())
}

/// Trapezoid integral restricted to `[lo, hi]`, with linear interpolation at
/// the cut points.
pub fn integrate_between(xs: &[f64], ys: &[f64], lo: f64, hi: f64) -> Result<f64> {
    check_abscissae(xs, ys.len())?;
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) || lo < xs[0] || hi > xs[xs.len() - 1] {
        return Err(Error::InvalidGrid(format!(
            "[{lo}, {hi}] is not inside the sampled range [{}, {}]",
            xs[0],
            xs[xs.len() - 1]
        )));
    }
    let interp = |x: f64| -> f64 {
        let k = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
        let (x0, x1) = (xs[k - 1], xs[k]);
        ys[k - 1] + (ys[k] - ys[k - 1]) * (x - x0) / (x1 - x0)
    };
    let mut px = vec![lo];
    let mut py = vec![interp(lo)];
    for (x, y) in xs.iter().zip(ys) {
        if *x > lo && *x < hi {
            px.push(*x);
            py.push(*y);
        }
    }
    px.push(hi);
    py.push(interp(hi));
    integrate_trapezoid(&px, &py)
}

/// `[min - pad*gamma, max + pad*gamma]` with at least [`MIN_WINDOW_POINTS`]
/// samples. Returns `None` for an empty spectrum.
pub fn auto_window(spectrum: &[f64], gamma: f64, pad_factor: f64) -> Option<Window> {
    let (min, max) = spectrum
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
            (lo.min(e), hi.max(e))
        });
    if !min.is_finite() || !max.is_finite() {
        return None;
    }
    let pad = pad_factor * gamma;
    let (lo, hi) = if pad > 0.0 || max > min {
        (min - pad, max + pad)
    } else {
        (min - 1.0, max + 1.0)
    };
    Window::new(lo, hi, MIN_WINDOW_POINTS).ok()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub position: f64,
    pub height: f64,
    pub prominence: f64,
}

/// Local maxima whose prominence is at least `min_prominence`.
///
/// A sample is a candidate when it is strictly above its left neighbour and
/// not below its right one. Prominence is the height above the higher of
/// the two lowest points separating the peak from taller terrain (or the
/// ends of the data). Position and height are refined with a parabola
/// through the three samples around the maximum.
pub fn find_peaks(xs: &[f64], ys: &[f64], min_prominence: f64) -> Result<Vec<Peak>> {
    check_abscissae(xs, ys.len())?;
    let n = ys.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if ys[i] > ys[i - 1] && ys[i] >= ys[i + 1] {
            // plateau: advance to its right end and take the middle
            let mut j = i;
            while j + 1 < n && ys[j + 1] == ys[i] {
                j += 1;
            }
            if j + 1 < n && ys[j + 1] < ys[i] {
                let k = (i + j) / 2;
                let prominence = prominence_at(ys, k);
                if prominence >= min_prominence {
                    let (position, height) = refine_parabolic(xs, ys, k);
                    peaks.push(Peak {
                        position,
                        height,
                        prominence,
                    });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    Ok(peaks)
}

/// Default prominence threshold for a curve.
pub fn default_prominence(ys: &[f64]) -> f64 {
    let max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (DEFAULT_PROMINENCE_FRACTION * max).max(f64::MIN_POSITIVE)
}

fn prominence_at(ys: &[f64], k: usize) -> f64 {
    let h = ys[k];
    let mut left_min = h;
    for &y in ys[..k].iter().rev() {
        if y > h {
            break;
        }
        left_min = left_min.min(y);
    }
    let mut right_min = h;
    for &y in &ys[k + 1..] {
        if y > h {
            break;
        }
        right_min = right_min.min(y);
    }
    h - left_min.max(right_min)
}

fn refine_parabolic(xs: &[f64], ys: &[f64], k: usize) -> (f64, f64) {
    let (x0, x1, x2) = (xs[k - 1], xs[k], xs[k + 1]);
    let (y0, y1, y2) = (ys[k - 1], ys[k], ys[k + 1]);
    // Lagrange parabola through three (possibly unevenly spaced) points.
    let d0 = (x0 - x1) * (x0 - x2);
    let d1 = (x1 - x0) * (x1 - x2);
    let d2 = (x2 - x0) * (x2 - x1);
    let a = y0 / d0 + y1 / d1 + y2 / d2;
    let b = -(y0 * (x1 + x2) / d0 + y1 * (x0 + x2) / d1 + y2 * (x0 + x1) / d2);
    let c = y0 * x1 * x2 / d0 + y1 * x0 * x2 / d1 + y2 * x0 * x1 / d2;
    if a >= 0.0 || !a.is_finite() {
        return (x1, y1);
    }
    let xv = (-b / (2.0 * a)).clamp(x0, x2);
    (xv, a * xv * xv + b * xv + c)
}

/// Linear resampling of `(xs, ys)` onto `targets`; values outside the data
/// range are clamped to the end samples.
pub fn resample_linear(xs: &[f64], ys: &[f64], targets: &[f64]) -> Result<Vec<f64>> {
    check_abscissae(xs, ys.len())?;
    Ok(targets
        .iter()
        .map(|&t| {
            if t <= xs[0] {
                return ys[0];
            }
            if t >= xs[xs.len() - 1] {
                return ys[ys.len() - 1];
            }
            let k = xs.partition_point(|&v| v <= t);
            let (x0, x1) = (xs[k - 1], xs[k]);
            ys[k - 1] + (ys[k] - ys[k - 1]) * (t - x0) / (x1 - x0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn lorentzian(x: f64, center: f64, gamma: f64) -> f64 {
        gamma / (PI * ((x - center).powi(2) + gamma * gamma))
    }

    #[test]
    fn trapezoid_constant() {
        assert_eq!(integrate_trapezoid(&[0.0, 1.0], &[1.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn trapezoid_errors() {
        assert_eq!(
            integrate_trapezoid(&[0.0, 1.0], &[1.0]),
            Err(Error::LengthMismatch { xs: 2, ys: 1 })
        );
        assert_eq!(
            integrate_trapezoid(&[0.0, 1.0, 1.0], &[1.0, 1.0, 1.0]),
            Err(Error::NonMonotonicGrid(2))
        );
    }

    #[test]
    fn truncated_lorentzian_area() {
        // closed form: (2/pi) * atan(4 / 0.1)
        let expected = 2.0 / PI * 40f64.atan();
        let w = Window::new(-4.0, 4.0, 4001).unwrap();
        let xs = w.points();
        let ys: Vec<f64> = xs.iter().map(|&x| lorentzian(x, 0.0, 0.1)).collect();
        let area = integrate_trapezoid(&xs, &ys).unwrap();
        assert_abs_diff_eq!(area, expected, epsilon = 1e-6);
        assert_abs_diff_eq!(area, 0.984, epsilon = 1e-3);
    }

    #[test]
    fn partial_integral_interpolates_edges() {
        let xs: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let ys = xs.clone();
        // integral of x over [2.5, 7.25]
        let v = integrate_between(&xs, &ys, 2.5, 7.25).unwrap();
        assert_abs_diff_eq!(v, 0.5 * (7.25f64.powi(2) - 2.5f64.powi(2)), epsilon = 1e-12);
        assert!(integrate_between(&xs, &ys, -1.0, 2.0).is_err());
    }

    #[test]
    fn auto_window_arithmetic() {
        let w = auto_window(&[-1.0, 1.0], 0.1, 40.0).unwrap();
        assert_abs_diff_eq!(w.lo, -5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.hi, 5.0, epsilon = 1e-12);
        assert!(w.n_points >= 4001);

        let r = 6f64.sqrt();
        let star = [-r, 0.0, 0.0, 0.0, 0.0, 0.0, r];
        let w = auto_window(&star, 0.1, DEFAULT_PAD_FACTOR).unwrap();
        assert_abs_diff_eq!(w.lo, -r - 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.hi, r + 4.0, epsilon = 1e-12);

        assert!(auto_window(&[], 0.1, 40.0).is_none());
    }

    #[test]
    fn single_lorentzian_peak() {
        let w = Window::new(-1.0, 1.0, 2001).unwrap();
        let xs = w.points();
        let center = 0.1234;
        let ys: Vec<f64> = xs.iter().map(|&x| lorentzian(x, center, 0.05)).collect();
        let peaks = find_peaks(&xs, &ys, default_prominence(&ys)).unwrap();
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].position - center).abs() < w.step());
    }

    #[test]
    fn peak_position_grid_converged() {
        let center = 0.0371;
        let locate = |n: usize| {
            let w = Window::new(-1.0, 1.0, n).unwrap();
            let xs = w.points();
            let ys: Vec<f64> = xs.iter().map(|&x| lorentzian(x, center, 0.05)).collect();
            (find_peaks(&xs, &ys, 1e-6).unwrap()[0].position, w.step())
        };
        let (coarse, h) = locate(401);
        let (fine, _) = locate(801);
        assert!((coarse - fine).abs() < h * h, "{coarse} vs {fine}");
    }

    #[test]
    fn prominence_filters_ripples() {
        let xs: Vec<f64> = (0..9).map(|k| k as f64).collect();
        let ys = [0.0, 1.0, 0.0, 0.05, 0.04, 0.06, 0.0, 2.0, 0.0];
        let peaks = find_peaks(&xs, &ys, 0.5).unwrap();
        assert_eq!(peaks.len(), 2);
        assert!(find_peaks(&xs, &[0.0; 9], 0.1).unwrap().is_empty());
    }

    #[test]
    fn resample_matches_line() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 2.0, 4.0];
        let r = resample_linear(&xs, &ys, &[-1.0, 0.5, 1.5, 3.0]).unwrap();
        assert_eq!(r, vec![0.0, 1.0, 3.0, 4.0]);
    }

    proptest! {
        #[test]
        fn trapezoid_is_linear(
            f in proptest::collection::vec(-10.0f64..10.0, 17),
            g in proptest::collection::vec(-10.0f64..10.0, 17),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let xs: Vec<f64> = (0..17).map(|k| (k as f64).powf(1.3)).collect();
            let combo: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
            let lhs = integrate_trapezoid(&xs, &combo).unwrap();
            let rhs = a * integrate_trapezoid(&xs, &f).unwrap() + b * integrate_trapezoid(&xs, &g).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn mirrored_peaks(
            centers in proptest::collection::vec(-0.8f64..0.8, 1..4),
        ) {
            let w = Window::new(-1.0, 1.0, 1001).unwrap();
            let xs = w.points();
            let curve = |x: f64| centers.iter().map(|&c| lorentzian(x, c, 0.03)).sum::<f64>();
            let ys: Vec<f64> = xs.iter().map(|&x| curve(x)).collect();
            let ys_mirror: Vec<f64> = xs.iter().map(|&x| curve(-x)).collect();
            let thr = default_prominence(&ys);
            let mut p: Vec<f64> = find_peaks(&xs, &ys, thr).unwrap().iter().map(|p| p.position).collect();
            let mut m: Vec<f64> = find_peaks(&xs, &ys_mirror, thr).unwrap().iter().map(|p| -p.position).collect();
            p.sort_by(|a, b| a.partial_cmp(b).unwrap());
            m.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assert_eq!(p.len(), m.len());
            for (a, b) in p.iter().zip(&m) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
