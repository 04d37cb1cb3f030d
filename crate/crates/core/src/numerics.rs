//! Small numerical helpers shared by the modules.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; points];
    let mut weights = vec![0.0; points];
    let m = points.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (points as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..points {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = points as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[points - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[points - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrate a smooth function over `[a, b]` with a fixed Gauss-Legendre rule.
pub fn integrate_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, points: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(points);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(&weights)
        .map(|(z, w)| w * f(mid + half * z))
        .sum::<f64>()
        * half
}

/// Unweighted least-squares fit `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Fit `log2 y = slope * log2 x + c` over the positive samples.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.log2(), y.log2()))
        .unzip();
    linear_fit(&lx, &ly)
}

/// Surface measure of the unit sphere in `R^n`, `2 pi^{n/2} / Gamma(n/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half_integer(n)
}

/// `Gamma(k/2)` for a positive integer `k`.
fn gamma_half_integer(k: usize) -> f64 {
    assert!(k > 0);
    // Gamma(1/2) = sqrt(pi), Gamma(1) = 1, Gamma(x + 1) = x Gamma(x)
    let (mut x, mut g) = if k % 2 == 0 { (1.0, 1.0) } else { (0.5, PI.sqrt()) };
    while 2.0 * x < k as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Smallest integer `k` with `r <= 2^k`, exact for powers of two.
pub fn ceil_log2(r: f64) -> i32 {
    debug_assert!(r > 0.0 && r.is_finite());
    let mut k = r.log2().ceil() as i32;
    while 2f64.powi(k) < r {
        k += 1;
    }
    while 2f64.powi(k - 1) >= r {
        k -= 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let v = integrate_gl(|x| x.powi(7) + 3.0 * x * x, 0.0, 2.0, 6);
        assert!((v - (256.0 / 8.0 + 8.0)).abs() < 1e-12);
    }

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(1) - 2.0).abs() < 1e-15);
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn ceil_log2_is_exact_on_powers() {
        assert_eq!(ceil_log2(1.0), 0);
        assert_eq!(ceil_log2(0.5), -1);
        assert_eq!(ceil_log2(3.0), 2);
        assert_eq!(ceil_log2(1024.0), 10);
        assert_eq!(ceil_log2(1024.000001), 11);
    }

    #[test]
    fn fits_a_line() {
        let (s, c) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-14 && (c - 1.0).abs() < 1e-14);
    }
}
