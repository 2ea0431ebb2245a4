//! Small diagnostics for uniformly sampled z-series: period detection by
//! autocorrelation, extrema counting, level crossings.

/// Result of [`detect_period`].
#[derive(Debug, Clone, Copy)]
pub struct PeriodEstimate {
    pub period: f64,
    /// Normalized autocorrelation at the detected lag (1 = perfectly periodic).
    pub peak_correlation: f64,
}

/// Detect the dominant period of a series sampled every `dz`.
///
/// The mean is removed and the lag is located on the biased normalized
/// autocorrelation (positive semidefinite, so the first local maximum after
/// the first non-positive lag is not a window artifact), then refined by a
/// parabolic fit. The reported peak correlation uses the unbiased
/// normalization `n / (n - lag)`, which is 1 for a perfectly periodic
/// series regardless of how much of the window one period covers.
/// Returns `None` for series with no usable oscillation.
pub fn detect_period(values: &[f64], dz: f64) -> Option<PeriodEstimate> {
    let n = values.len();
    if n < 8 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let var: f64 = x.iter().map(|v| v * v).sum();
    if var <= 0.0 {
        return None;
    }
    let max_lag = n - 2;
    let r: Vec<f64> = (0..=max_lag)
        .map(|lag| {
            x.iter()
                .zip(&x[lag..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / var
        })
        .collect();

    let first_dip = r.iter().position(|&v| v <= 0.0)?;
    let mut best: Option<usize> = None;
    for lag in first_dip.max(1)..max_lag {
        let is_peak = r[lag] > r[lag - 1] && r[lag] >= r[lag + 1];
        if is_peak && best.is_none_or(|b| r[lag] > r[b]) {
            best = Some(lag);
        }
    }
    let lag = best?;
    let refined = lag as f64 + parabolic_offset(r[lag - 1], r[lag], r[lag + 1]);
    Some(PeriodEstimate {
        period: refined * dz,
        peak_correlation: r[lag] * n as f64 / (n - lag) as f64,
    })
}

/// Vertex offset in [-0.5, 0.5] of the parabola through three equispaced
/// samples centred on the middle one.
pub fn parabolic_offset(left: f64, center: f64, right: f64) -> f64 {
    let denom = left - 2.0 * center + right;
    if denom.abs() < 1e-300 {
        0.0
    } else {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    }
}

/// Period estimate from the spacing of prominent interior minima (or
/// maxima), each refined by a parabolic fit. More robust than the
/// autocorrelation for short series with a startup transient, where sharp
/// repeating events (collisions) mark the cycle. Returns the mean spacing
/// over consecutive extrema, `None` with fewer than two.
pub fn extrema_spacing(values: &[f64], dz: f64, minima: bool) -> Option<f64> {
    let n = values.len();
    if n < 3 {
        return None;
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_prominence = 0.1 * (hi - lo);
    let signed = |v: f64| if minima { -v } else { v };
    let mut positions = Vec::new();
    for j in 1..n - 1 {
        if signed(values[j]) > signed(values[j - 1]) && signed(values[j]) >= signed(values[j + 1])
        {
            let left = values[..j].iter().cloned().fold(
                if minima { f64::NEG_INFINITY } else { f64::INFINITY },
                |acc, v| if minima { acc.max(v) } else { acc.min(v) },
            );
            let right = values[j + 1..].iter().cloned().fold(
                if minima { f64::NEG_INFINITY } else { f64::INFINITY },
                |acc, v| if minima { acc.max(v) } else { acc.min(v) },
            );
            let prom = if minima {
                left.min(right) - values[j]
            } else {
                values[j] - left.max(right)
            };
            if prom > min_prominence {
                let off = parabolic_offset(
                    signed(values[j - 1]),
                    signed(values[j]),
                    signed(values[j + 1]),
                );
                positions.push((j as f64 + off) * dz);
            }
        }
    }
    if positions.len() < 2 {
        return None;
    }
    let total = positions.last().unwrap() - positions.first().unwrap();
    Some(total / (positions.len() - 1) as f64)
}

/// Count interior local extrema whose prominence against both neighbors'
/// running envelope exceeds `min_prominence`.
pub fn count_extrema(values: &[f64], min_prominence: f64) -> usize {
    let n = values.len();
    if n < 3 {
        return 0;
    }
    let mut count = 0;
    for j in 1..n - 1 {
        let is_max = values[j] > values[j - 1] && values[j] >= values[j + 1];
        let is_min = values[j] < values[j - 1] && values[j] <= values[j + 1];
        if !(is_max || is_min) {
            continue;
        }
        // Prominence: drop/rise to the nearest surrounding extreme value.
        let left = values[..j]
            .iter()
            .cloned()
            .fold(if is_max { f64::INFINITY } else { f64::NEG_INFINITY }, |acc, v| {
                if is_max {
                    acc.min(v)
                } else {
                    acc.max(v)
                }
            });
        let right = values[j + 1..]
            .iter()
            .cloned()
            .fold(if is_max { f64::INFINITY } else { f64::NEG_INFINITY }, |acc, v| {
                if is_max {
                    acc.min(v)
                } else {
                    acc.max(v)
                }
            });
        let prom = if is_max {
            (values[j] - left.max(right)).max(0.0)
        } else {
            (left.min(right) - values[j]).max(0.0)
        };
        if prom > min_prominence {
            count += 1;
        }
    }
    count
}

/// First `z` at which the series crosses `level` from below, linearly
/// interpolated between samples.
pub fn first_upward_crossing(zs: &[f64], values: &[f64], level: f64) -> Option<f64> {
    for j in 1..values.len().min(zs.len()) {
        if values[j - 1] < level && values[j] >= level {
            let f = (level - values[j - 1]) / (values[j] - values[j - 1]);
            return Some(zs[j - 1] + f * (zs[j] - zs[j - 1]));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_sine_period() {
        let dz = 0.25;
        let period = 13.0;
        let xs: Vec<f64> = (0..400)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 * dz / period).sin() + 3.0)
            .collect();
        let est = detect_period(&xs, dz).unwrap();
        assert!((est.period - period).abs() / period < 0.01, "{est:?}");
        assert!(est.peak_correlation > 0.9);
    }

    #[test]
    fn no_period_in_monotone_series() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert!(detect_period(&xs, 1.0).is_none());
        assert!(extrema_spacing(&xs, 1.0, true).is_none());
    }

    #[test]
    fn extrema_spacing_recovers_period_with_transient() {
        // A decaying startup transient biases the autocorrelation; the
        // trough spacing stays on the true period.
        let dz = 0.5;
        let period = 21.0;
        let xs: Vec<f64> = (0..160)
            .map(|i| {
                let z = i as f64 * dz;
                (-(z / 15.0)).exp() - (2.0 * std::f64::consts::PI * z / period).cos()
            })
            .collect();
        let est = extrema_spacing(&xs, dz, true).unwrap();
        assert!((est - period).abs() / period < 0.01, "got {est}");
        let est_max = extrema_spacing(&xs, dz, false).unwrap();
        assert!((est_max - period).abs() / period < 0.02, "got {est_max}");
    }

    #[test]
    fn counts_prominent_extrema() {
        let dz = 0.1;
        let xs: Vec<f64> = (0..300)
            .map(|i| (i as f64 * dz).sin())
            .collect();
        // ~ 30/(2π) ≈ 4.7 periods → 9 interior extrema.
        let c = count_extrema(&xs, 0.5);
        assert!((8..=10).contains(&c), "got {c}");
        assert_eq!(count_extrema(&[0.0, 1.0, 2.0, 3.0], 0.1), 0);
    }

    #[test]
    fn crossing_is_interpolated() {
        let zs = [0.0, 1.0, 2.0, 3.0];
        let vs = [0.0, 0.2, 0.6, 0.9];
        let z = first_upward_crossing(&zs, &vs, 0.5).unwrap();
        assert!((z - 1.75).abs() < 1e-12);
        assert!(first_upward_crossing(&zs, &vs, 0.95).is_none());
    }
}
