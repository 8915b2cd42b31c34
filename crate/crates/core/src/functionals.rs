//! The 19 statistical functionals that collapse a frame-level series into
//! response-level features.
//!
//! Moments are population (1/n) moments, percentiles use linear
//! interpolation at p*(n-1), and slope/intercept come from a least-squares
//! fit against the 0-based frame index. Zero-variance columns get 0 for
//! stddev, skewness, kurtosis, slope, and frac_above_mean so nothing
//! downstream ever sees a NaN.

use crate::acoustic::FrameFeatureMatrix;
use crate::features::FeatureVector;

pub const N_FUNCTIONALS: usize = 19;

pub const FUNCTIONAL_NAMES: [&str; N_FUNCTIONALS] = [
    "mean",
    "stddev",
    "median",
    "q1",
    "q3",
    "iqr",
    "pct5",
    "pct95",
    "min",
    "max",
    "range",
    "skewness",
    "kurtosis",
    "slope",
    "intercept",
    "mean_abs_dev",
    "rms",
    "mean_abs_delta",
    "frac_above_mean",
];

/// Linear-interpolation percentile of an ascending-sorted slice.
pub(crate) fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// All 19 functionals of one column, in `FUNCTIONAL_NAMES` order.
pub fn column_functionals(x: &[f64], out: &mut [f64; N_FUNCTIONALS]) {
    assert!(!x.is_empty(), "functionals need at least one frame");
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;

    let (mut m2, mut m3, mut m4, mut abs_dev, mut sq, mut above) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0usize);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
        abs_dev += d.abs();
        sq += v * v;
        if v > mean {
            above += 1;
        }
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;

    // Constant columns can carry rounding residue in the deviations; treat
    // variance below the representable noise floor as exactly zero.
    let max_abs = x.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let degenerate = m2 <= (1e-12 * max_abs).powi(2);

    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[x.len() - 1]);

    let (slope, intercept) = if degenerate || x.len() == 1 {
        (0.0, mean)
    } else {
        let t_mean = (n - 1.0) / 2.0;
        let t_var = (n * n - 1.0) / 12.0;
        let cov = x
            .iter()
            .enumerate()
            .map(|(t, &v)| (t as f64 - t_mean) * (v - mean))
            .sum::<f64>()
            / n;
        let slope = cov / t_var;
        (slope, mean - slope * t_mean)
    };

    let mean_abs_delta = if x.len() == 1 {
        0.0
    } else {
        x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (n - 1.0)
    };

    out[0] = mean;
    out[1] = if degenerate { 0.0 } else { m2.sqrt() };
    out[2] = percentile(&sorted, 0.50);
    out[3] = percentile(&sorted, 0.25);
    out[4] = percentile(&sorted, 0.75);
    out[5] = out[4] - out[3];
    out[6] = percentile(&sorted, 0.05);
    out[7] = percentile(&sorted, 0.95);
    out[8] = min;
    out[9] = max;
    out[10] = max - min;
    out[11] = if degenerate { 0.0 } else { m3 / m2.powf(1.5) };
    out[12] = if degenerate { 0.0 } else { m4 / (m2 * m2) - 3.0 };
    out[13] = slope;
    out[14] = intercept;
    out[15] = abs_dev / n;
    out[16] = (sq / n).sqrt();
    out[17] = mean_abs_delta;
    out[18] = if degenerate {
        0.0
    } else {
        above as f64 / n
    };
}

/// Collapse every column of the frame matrix; output names are
/// "<column>.<functional>", 123 x 19 = 2337 dims.
pub fn apply_functionals(m: &FrameFeatureMatrix) -> FeatureVector {
    let mut names = Vec::with_capacity(m.n_cols() * N_FUNCTIONALS);
    let mut values = Vec::with_capacity(m.n_cols() * N_FUNCTIONALS);
    let mut col = Vec::with_capacity(m.n_frames());
    let mut f = [0.0; N_FUNCTIONALS];
    for c in 0..m.n_cols() {
        m.copy_column(c, &mut col);
        column_functionals(&col, &mut f);
        for (fname, &v) in FUNCTIONAL_NAMES.iter().zip(f.iter()) {
            names.push(format!("{}.{}", m.names()[c], fname));
            values.push(v);
        }
    }
    FeatureVector::new(names, values)
}
