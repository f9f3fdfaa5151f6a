//! Small Monte Carlo summaries used by the experiments and tests.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods take over when std is linked
use num_traits::Float;


/// Sample mean with its standard error `sd / √R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

/// Mean and standard error; the error is zero for fewer than two values.
pub fn mean_se(values: &[f64]) -> MeanSe {
    let r = values.len();
    if r == 0 {
        return MeanSe { mean: 0.0, se: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / r as f64;
    if r < 2 {
        return MeanSe { mean, se: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
    MeanSe { mean, se: (var / r as f64).sqrt() }
}

/// `ν̂_p = (mean ‖X‖^p)^{1/p}` with a delta-method standard error.
pub fn nu_p(norms: &[f64], p: f64) -> MeanSe {
    let powered: Vec<f64> = norms.iter().map(|x| x.abs().powf(p)).collect();
    let m = mean_se(&powered);
    let nu = m.mean.powf(1.0 / p);
    let se = if m.mean > 0.0 { m.se * m.mean.powf(1.0 / p - 1.0) / p } else { 0.0 };
    MeanSe { mean: nu, se }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut worst) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

/// Asymptotic critical value of the two-sample KS statistic at level `alpha`.
pub fn ks_critical_value(alpha: f64, na: usize, nb: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((na + nb) as f64 / (na * nb) as f64).sqrt()
}

/// Biased sample autocovariance at `lag` of a centered scalar series.
pub fn autocovariance(series: &[f64], lag: usize) -> f64 {
    let n = series.len();
    if lag >= n {
        return 0.0;
    }
    series[..n - lag].iter().zip(&series[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
}
