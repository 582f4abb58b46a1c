//! Small statistics helpers shared by the estimators and their tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Arithmetic mean. Returns 0 for empty input.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator). Returns 0 for n < 2.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Naive standard error of the mean, valid for independent samples.
pub fn standard_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::INFINITY;
    }
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Standard error of the mean from block averages.
///
/// Correlated time series (Langevin trajectories) underestimate their error
/// with the naive formula; block means decorrelate it.
pub fn block_standard_error(xs: &[f64], n_blocks: usize) -> f64 {
    let n_blocks = n_blocks.max(2).min(xs.len().max(1));
    if xs.len() < 2 * n_blocks {
        return standard_error(xs);
    }
    let block_len = xs.len() / n_blocks;
    let blocks: Vec<f64> = (0..n_blocks)
        .map(|b| mean(&xs[b * block_len..(b + 1) * block_len]))
        .collect();
    standard_error(&blocks)
}

/// Numerically stable log(sum(exp(xs))).
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Bootstrap standard error of an arbitrary statistic.
pub fn bootstrap_se<F>(rng: &mut ChaCha8Rng, data: &[f64], n_resamples: usize, stat: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    if data.len() < 2 || n_resamples < 2 {
        return f64::INFINITY;
    }
    let mut replicas = Vec::with_capacity(n_resamples);
    let mut sample = vec![0.0; data.len()];
    for _ in 0..n_resamples {
        for slot in sample.iter_mut() {
            *slot = data[rng.random_range(0..data.len())];
        }
        replicas.push(stat(&sample));
    }
    variance(&replicas).sqrt()
}

/// Common-grid histogram of two samples; returns (bin_centers, counts_a, counts_b).
pub fn paired_histogram(a: &[f64], b: &[f64], n_bins: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let lo = a
        .iter()
        .chain(b.iter())
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi = a
        .iter()
        .chain(b.iter())
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-300);
    let width = span / n_bins as f64;
    let mut ca = vec![0.0; n_bins];
    let mut cb = vec![0.0; n_bins];
    let bin_of = |x: f64| (((x - lo) / width) as usize).min(n_bins - 1);
    for &x in a {
        ca[bin_of(x)] += 1.0;
    }
    for &x in b {
        cb[bin_of(x)] += 1.0;
    }
    let centers = (0..n_bins)
        .map(|i| lo + (i as f64 + 0.5) * width)
        .collect();
    (centers, ca, cb)
}

/// Location where two histogrammed densities cross.
///
/// Normalizes both counts, then finds the bin where the sign of
/// (density_a - density_b) flips inside the overlap region and returns the
/// center of that bin together with the bin width.
pub fn histogram_crossing(a: &[f64], b: &[f64], n_bins: usize) -> Option<(f64, f64)> {
    if a.is_empty() || b.is_empty() || n_bins < 2 {
        return None;
    }
    let (centers, mut ca, mut cb) = paired_histogram(a, b, n_bins);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    for c in ca.iter_mut() {
        *c /= na;
    }
    for c in cb.iter_mut() {
        *c /= nb;
    }
    let width = centers[1] - centers[0];
    // Restrict to bins where both histograms have support, so tails with a
    // single empty side do not register as crossings.
    let mut prev: Option<(usize, f64)> = None;
    let mut crossing = None;
    for i in 0..n_bins {
        if ca[i] == 0.0 && cb[i] == 0.0 {
            continue;
        }
        let d = ca[i] - cb[i];
        if let Some((_, pd)) = prev {
            if pd != 0.0 && d != 0.0 && pd.signum() != d.signum() {
                crossing = Some((centers[i] - 0.5 * width, width));
                break;
            }
        }
        if d == 0.0 {
            crossing = Some((centers[i], width));
            break;
        }
        prev = Some((i, d));
    }
    crossing
}
