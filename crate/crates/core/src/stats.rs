//! Small statistics toolkit shared by the Monte Carlo harnesses.

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

pub fn std_err(x: &[f64]) -> f64 {
    (variance(x) / x.len() as f64).sqrt()
}

/// Central moment of order k (biased).
pub fn central_moment(x: &[f64], k: i32) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(k)).sum::<f64>() / x.len() as f64
}

/// Standard error of the sample variance, √((μ₄ − σ⁴)/n).
pub fn variance_std_err(x: &[f64]) -> f64 {
    let m2 = central_moment(x, 2);
    let m4 = central_moment(x, 4);
    ((m4 - m2 * m2).max(0.0) / x.len() as f64).sqrt()
}

/// Linear-interpolated quantile (type 7) of unsorted data.
pub fn quantile(x: &[f64], q: f64) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, q)
}

pub fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    let n = s.len();
    if n == 1 {
        return s[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = h.floor() as usize;
    if i + 1 >= n {
        return s[n - 1];
    }
    s[i] + (h - i as f64) * (s[i + 1] - s[i])
}

pub fn median(x: &[f64]) -> f64 {
    quantile(x, 0.5)
}

/// Least-squares line y = a·x + b; returns (slope, intercept).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Two-sample Kolmogorov–Smirnov statistic sup|F_A − F_B|.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level α.
pub fn ks_critical(alpha: f64, na: usize, nb: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((na + nb) as f64 / (na as f64 * nb as f64)).sqrt()
}

/// Empirical 1-Wasserstein distance ∫|F_A − F_B|.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = x[0].min(y[0]);
    let mut total = 0.0;
    while i < x.len() || j < y.len() {
        let v = match (x.get(i), y.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => break,
        };
        total += (v - prev) * (i as f64 / na - j as f64 / nb).abs();
        prev = v;
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
    }
    total
}

/// Batch-means standard error of the mean of a correlated series.
pub fn batch_means_se(x: &[f64], batches: usize) -> f64 {
    let b = batches.max(2).min(x.len());
    let size = x.len() / b;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..b).map(|k| mean(&x[k * size..(k + 1) * size])).collect();
    std_err(&means)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_moments() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&x), 2.5);
        assert!((variance(&x) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(median(&x), 2.5);
        assert_eq!(quantile(&x, 1.0), 4.0);
        let (s, c) = linear_fit(&x, &[3.0, 5.0, 7.0, 9.0]);
        assert!((s - 2.0).abs() < 1e-14 && (c - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ks_and_w1_examples() {
        let a = [0.0, 1.0, 2.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(wasserstein1(&a, &a), 0.0);
        let b = [0.5, 1.5, 2.5];
        assert!((wasserstein1(&a, &b) - 0.5).abs() < 1e-15);
        assert!((ks_two_sample(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
        let c = [10.0, 11.0];
        assert_eq!(ks_two_sample(&a, &c), 1.0);
    }

    proptest! {
        #[test]
        fn distances_ignore_order(mut x in proptest::collection::vec(-5.0f64..5.0, 1..60), y in proptest::collection::vec(-5.0f64..5.0, 1..60)) {
            let d1 = ks_two_sample(&x, &y);
            let w1 = wasserstein1(&x, &y);
            x.reverse();
            prop_assert_eq!(ks_two_sample(&x, &y), d1);
            prop_assert!((wasserstein1(&x, &y) - w1).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&d1));
            // W1 of a shift equals the shift.
            let shifted: Vec<f64> = x.iter().map(|v| v + 0.7).collect();
            prop_assert!((wasserstein1(&x, &shifted) - 0.7).abs() < 1e-9);
        }
    }
}
