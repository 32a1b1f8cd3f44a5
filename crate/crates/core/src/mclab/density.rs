//! Histograms, Gaussian KDE and Kolmogorov-Smirnov distances.

use serde::{Deserialize, Serialize};

use crate::error::{BwError, Result};

fn sorted(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(BwError::NonFinite);
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample Kolmogorov-Smirnov distance `sup_x |F_a(x) − F_b(x)|`.
/// Inputs need not be sorted; ties are handled exactly.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(BwError::Validation("KS distance needs two nonempty samples".into()));
    }
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut best) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(best)
}

/// One-sample Kolmogorov-Smirnov distance to a continuous CDF.
pub fn ks_distance_cdf(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(BwError::Validation("KS distance needs a nonempty sample".into()));
    }
    let v = sorted(sample)?;
    let n = v.len() as f64;
    let mut best = 0.0f64;
    for (i, x) in v.iter().enumerate() {
        let f = cdf(*x);
        best = best.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(best)
}

/// Kernel density estimate on an equispaced grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
    /// Location of a point mass when the sample has zero spread.
    pub spike: Option<f64>,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean_and_sd(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Silverman bandwidth `0.9 min(sd, IQR/1.34) n^{-1/5}`.
pub fn silverman_bandwidth(sample: &[f64]) -> Result<f64> {
    if sample.len() < 2 {
        return Err(BwError::Validation("bandwidth needs at least two points".into()));
    }
    let v = sorted(sample)?;
    let (_, sd) = mean_and_sd(&v);
    let iqr = quantile(&v, 0.75) - quantile(&v, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (v.len() as f64).powf(-0.2))
}

/// Gaussian KDE with Silverman bandwidth on `grid_points` points spanning
/// `[min − 3h, max + 3h]`, rescaled to unit trapezoid mass.
pub fn empirical_density(sample: &[f64], grid_points: usize) -> Result<Density> {
    if sample.len() < 2 {
        return Err(BwError::Validation("density needs at least two points".into()));
    }
    if grid_points < 2 {
        return Err(BwError::Validation("grid needs at least two points".into()));
    }
    let v = sorted(sample)?;
    let h = silverman_bandwidth(&v)?;
    if !(h > 0.0) {
        return Ok(Density {
            grid: vec![v[0]],
            values: vec![1.0],
            bandwidth: 0.0,
            spike: Some(v[0]),
        });
    }
    let (lo, hi) = (v[0] - 3.0 * h, v[v.len() - 1] + 3.0 * h);
    let span = hi - lo;
    let last = (grid_points - 1) as f64;
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| {
            let t = i as f64 / last;
            // Evaluated from both ends so symmetric samples give symmetric grids.
            if i * 2 < grid_points {
                lo + span * t
            } else {
                hi - span * (1.0 - t)
            }
        })
        .collect();
    let norm = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt() * v.len() as f64);
    let mut values: Vec<f64> = grid
        .iter()
        .map(|x| v.iter().map(|s| (-0.5 * ((x - s) / h).powi(2)).exp()).sum::<f64>() * norm)
        .collect();
    let step = span / last;
    let mass: f64 = values.windows(2).map(|w| 0.5 * (w[0] + w[1]) * step).sum();
    if mass > 0.0 {
        values.iter_mut().for_each(|y| *y /= mass);
    }
    Ok(Density {
        grid,
        values,
        bandwidth: h,
        spike: None,
    })
}

/// Equal-width histogram over `[min, max]`; a zero-width range gives one bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

pub fn histogram(sample: &[f64], bins: usize) -> Result<Histogram> {
    if sample.is_empty() || bins == 0 {
        return Err(BwError::Validation("histogram needs data and at least one bin".into()));
    }
    let v = sorted(sample)?;
    let (lo, hi) = (v[0], v[v.len() - 1]);
    if hi == lo {
        return Ok(Histogram {
            edges: vec![lo, hi],
            counts: vec![v.len() as u64],
        });
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|k| if k == bins { hi } else { lo + width * k as f64 })
        .collect();
    let mut counts = vec![0u64; bins];
    for x in &v {
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(Histogram { edges, counts })
}
