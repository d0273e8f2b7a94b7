//! Batch-means confidence intervals for correlated time series.

/// Number of contiguous batches a series is split into.
pub const BATCHES: usize = 32;

/// Two-sided 95% Student-t quantile with `BATCHES - 1` degrees of freedom.
const T_975: f64 = 2.0395;

/// Point estimate with a 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn contains(&self, x: f64, widths: f64) -> bool {
        (self.mean - x).abs() <= widths * self.half_width
    }
}

fn batch_ranges(n: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
    let size = n / BATCHES;
    (0..BATCHES).map(move |b| {
        let start = b * size;
        let end = if b + 1 == BATCHES { n } else { start + size };
        start..end
    })
}

fn half_width(batch_values: &[f64]) -> f64 {
    let nb = batch_values.len() as f64;
    let mean = batch_values.iter().sum::<f64>() / nb;
    let var = batch_values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nb - 1.0);
    T_975 * (var / nb).sqrt()
}

/// Mean of `values` with a batch-means half-width. Series shorter than
/// [`BATCHES`] get an infinite half-width.
pub fn batch_mean(values: &[f64]) -> Estimate {
    let n = values.len();
    if n == 0 {
        return Estimate {
            mean: f64::NAN,
            half_width: f64::INFINITY,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < BATCHES {
        return Estimate {
            mean,
            half_width: f64::INFINITY,
        };
    }
    let means: Vec<f64> = batch_ranges(n)
        .map(|r| {
            let len = r.len() as f64;
            values[r].iter().sum::<f64>() / len
        })
        .collect();
    Estimate {
        mean,
        half_width: half_width(&means),
    }
}

/// Ratio `sum(num) / sum(den)` with a half-width from per-batch ratios.
pub fn batch_ratio(num: &[f64], den: &[f64]) -> Estimate {
    assert_eq!(num.len(), den.len());
    let total_den: f64 = den.iter().sum();
    let mean = num.iter().sum::<f64>() / total_den;
    if num.len() < BATCHES {
        return Estimate {
            mean,
            half_width: f64::INFINITY,
        };
    }
    let ratios: Vec<f64> = batch_ranges(num.len())
        .map(|r| {
            let d: f64 = den[r.clone()].iter().sum();
            num[r].iter().sum::<f64>() / d
        })
        .collect();
    if ratios.iter().any(|r| !r.is_finite()) {
        return Estimate {
            mean,
            half_width: f64::INFINITY,
        };
    }
    Estimate {
        mean,
        half_width: half_width(&ratios),
    }
}
