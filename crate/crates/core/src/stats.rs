//! Summary statistics and trend tests for simulation output.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Linearly interpolated quantile of unsorted data.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Two-sided Student-t confidence interval for the mean.
pub fn mean_confidence_interval(xs: &[f64], level: f64) -> Option<(f64, f64)> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let t = StudentsT::new(0.0, 1.0, n - 1.0).ok()?.inverse_cdf(0.5 + level / 2.0);
    let half = t * std_dev(xs) / n.sqrt();
    let m = mean(xs);
    Some((m - half, m + half))
}

/// Least-squares slope of `ys` against `0, 1, 2, …`.
pub fn ols_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let xm = (n - 1.0) / 2.0;
    let ym = mean(ys);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannKendall {
    pub s: i64,
    pub z: f64,
    /// One-sided p-value for an increasing trend.
    pub p_increasing: f64,
}

impl MannKendall {
    pub fn increasing(&self, alpha: f64) -> bool {
        self.p_increasing < alpha
    }
}

/// Mann-Kendall trend test with the tie-corrected variance and continuity
/// correction.
pub fn mann_kendall(xs: &[f64]) -> MannKendall {
    let n = xs.len();
    let mut s: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            s += match xs[j].partial_cmp(&xs[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        ties += t * (t - 1.0) * (2.0 * t + 5.0);
        i = j + 1;
    }
    let nf = n as f64;
    let var = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - ties) / 18.0;
    let z = if var <= 0.0 {
        0.0
    } else if s > 0 {
        (s as f64 - 1.0) / var.sqrt()
    } else if s < 0 {
        (s as f64 + 1.0) / var.sqrt()
    } else {
        0.0
    };
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    MannKendall {
        s,
        z,
        p_increasing: 1.0 - normal.cdf(z),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert_eq!(mean(&xs), 5.0);
        assert!((std_dev(&xs) - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(quantile(&xs, 0.5), 4.5);
        assert_eq!(quantile(&xs, 1.0), 9.0);
    }

    #[test]
    fn slope_of_line() {
        let ys: Vec<f64> = (0..10).map(|i| 3.0 + 0.5 * i as f64).collect();
        assert!((ols_slope(&ys) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mann_kendall_detects_monotone_series() {
        let up: Vec<f64> = (0..20).map(f64::from).collect();
        let mk = mann_kendall(&up);
        assert_eq!(mk.s, 190);
        assert!(mk.increasing(0.05));
        let flat = vec![1.0; 20];
        assert!(!mann_kendall(&flat).increasing(0.05));
        let down: Vec<f64> = up.iter().rev().copied().collect();
        assert!(!mann_kendall(&down).increasing(0.05));
    }

    #[test]
    fn mann_kendall_small_sample_variance() {
        // n = 4 without ties: var = 4*3*13/18
        let mk = mann_kendall(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(mk.s, 6);
        assert!((mk.z - 5.0 / (52.0f64 / 6.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn t_interval_contains_mean() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let (lo, hi) = mean_confidence_interval(&xs, 0.95).unwrap();
        // t(0.975, 4) = 2.7764
        let half = 2.776_445 * std_dev(&xs) / 5f64.sqrt();
        assert!((lo - (3.0 - half)).abs() < 1e-4 && (hi - (3.0 + half)).abs() < 1e-4);
    }
}
