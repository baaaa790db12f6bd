//! Quadrature rules and Chebyshev (cosine) series helpers.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1], computed by Newton
/// iteration on P_n from the Tricomi initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    (
        x.iter().map(|t| c + h * t).collect(),
        w.iter().map(|t| h * t).collect(),
    )
}

/// Cosine-series coefficients of samples f(φ_k), φ_k = πk/(M−1), k = 0..M−1,
/// so that f(φ) ≈ Σ_j c_j cos(jφ). This is the DCT-I with the usual halved
/// end terms; `O(M²)` with a lookup table of cos(πk/(M−1)) over k mod 2(M−1).
pub fn cosine_coefficients(samples: &[f64]) -> Vec<f64> {
    let m = samples.len();
    assert!(m >= 2);
    let n = m - 1;
    let period = 2 * n;
    let table: Vec<f64> = (0..period)
        .map(|k| (PI * k as f64 / n as f64).cos())
        .collect();
    let mut c = vec![0.0; m];
    for (j, cj) in c.iter_mut().enumerate() {
        let mut s = 0.5 * (samples[0] + if j % 2 == 0 { samples[n] } else { -samples[n] });
        let mut idx = 0usize;
        for &f in &samples[1..n] {
            idx += j;
            if idx >= period {
                idx %= period;
            }
            s += f * table[idx];
        }
        *cj = s * 2.0 / n as f64;
    }
    c[0] *= 0.5;
    c[n] *= 0.5;
    c
}

/// Evaluates Σ c_j cos(jφ) as a Chebyshev series in u = cos φ (Clenshaw).
pub fn clenshaw(c: &[f64], u: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &cj in c.iter().skip(1).rev() {
        let b0 = 2.0 * u * b1 - b2 + cj;
        b2 = b1;
        b1 = b0;
    }
    c.first().copied().unwrap_or(0.0) + u * b1 - b2
}

/// Chebyshev coefficients of the derivative d/du of Σ c_j T_j(u).
pub fn chebyshev_derivative(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    if n <= 1 {
        return vec![0.0];
    }
    let mut d = vec![0.0; n];
    for k in (0..n - 1).rev() {
        let next = if k + 2 < n { d[k + 2] } else { 0.0 };
        d[k] = next + 2.0 * (k as f64 + 1.0) * c[k + 1];
    }
    d[0] *= 0.5;
    d.truncate(n - 1);
    d
}

/// Chebyshev coefficients of an antiderivative of Σ c_j T_j(u) (zero
/// constant term).
pub fn chebyshev_integral(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let at = |k: usize| c.get(k).copied().unwrap_or(0.0);
    let mut out = vec![0.0; n + 1];
    if n == 0 {
        return out;
    }
    out[1] = at(0) - 0.5 * at(2);
    for (k, o) in out.iter_mut().enumerate().skip(2) {
        *o = (at(k - 1) - at(k + 1)) / (2.0 * k as f64);
    }
    out
}

/// Composite trapezoid rule on a non-uniform grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chebyshev_integral_inverts_derivative() {
        let c = [0.3, -1.2, 0.7, 0.25, -0.1];
        let back = chebyshev_derivative(&chebyshev_integral(&c));
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
        // ∫ u du = u²/2 = (T₂ + T₀)/4: difference across [−1, 1] is zero.
        let i = chebyshev_integral(&[0.0, 1.0]);
        assert!((clenshaw(&i, 1.0) - clenshaw(&i, -1.0)).abs() < 1e-15);
        assert!((clenshaw(&i, 0.5) - clenshaw(&i, 0.0) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 16, 64, 200] {
            let (x, w) = gauss_legendre(n);
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "n={n} total={total}");
            let deg = 2 * n - 1;
            let val: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((val - exact).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn mapped_rule_integrates_exp() {
        let (x, w) = gauss_legendre_on(20, 0.0, 2.0);
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
        assert!((v - (2f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn cosine_series_roundtrip_and_derivative() {
        let m = 65;
        let f = |u: f64| (2.0 * u).sin() + u * u * u;
        let samples: Vec<f64> = (0..m)
            .map(|k| f((PI * k as f64 / (m - 1) as f64).cos()))
            .collect();
        let c = cosine_coefficients(&samples);
        for u in [-0.9, -0.3, 0.0, 0.41, 0.99] {
            assert!((clenshaw(&c, u) - f(u)).abs() < 1e-13);
        }
        let d = chebyshev_derivative(&c);
        for u in [-0.7f64, 0.2, 0.8] {
            let exact = 2.0 * (2.0 * u).cos() + 3.0 * u * u;
            assert!((clenshaw(&d, u) - exact).abs() < 1e-11);
        }
    }
}
