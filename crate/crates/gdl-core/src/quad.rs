//! Quadrature rules shared by the channel and the generator: Gauss-Legendre
//! panels for the random-time average, a uniform trapezoid rule over the bath
//! frequency density, and adaptive Simpson for half-plane correlation
//! integrals.

use num_complex::Complex64 as c64;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        xs[i] = -x;
        xs[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        xs[n / 2] = 0.0;
    }
    (xs, ws)
}

/// Composite Gauss-Legendre rule: `panels` equal panels of `order` nodes on [a, b].
pub fn panel_gauss_legendre(panels: usize, order: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + (b - a) * p as f64 / panels as f64;
        let hi = a + (b - a) * (p + 1) as f64 / panels as f64;
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        for i in 0..order {
            xs.push(mid + half * x[i]);
            ws.push(half * w[i]);
        }
    }
    (xs, ws)
}

/// Adaptive Simpson quadrature for complex-valued integrands.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> c64
where
    F: Fn(f64) -> c64,
{
    fn simpson(fa: c64, fm: c64, fb: c64, a: f64, b: f64) -> c64 {
        (fa + fm * 4.0 + fb) * ((b - a) / 6.0)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> c64>(
        f: &F,
        a: f64,
        b: f64,
        fa: c64,
        fm: c64,
        fb: c64,
        whole: c64,
        tol: f64,
        depth: usize,
    ) -> c64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth >= 40 || delta.norm() < 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
    }
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 0)
}

/// Uniform trapezoid grid over the bath frequency density, wide and fine
/// enough for the Gaussian-filtered integrands of both the channel and the
/// coherent term. `lam_range` is the spectral range of the system
/// Hamiltonian, `s_g` the standard deviation of the density, `sigma` the
/// envelope width; `min_nodes` raises the node count if set higher.
pub fn omega_grid(
    mean: f64,
    s_g: f64,
    lam_range: f64,
    sigma: f64,
    min_nodes: usize,
) -> (Vec<f64>, f64) {
    let lo = mean - 7.0 * s_g - lam_range - 4.0 / sigma;
    let hi = mean + 7.0 * s_g + lam_range + 4.0 / sigma;
    let h_target = s_g.min(1.0 / (2.0 * sigma)) / 3.2;
    let n = (((hi - lo) / h_target).ceil() as usize + 1).max(min_nodes.max(3));
    let h = (hi - lo) / (n - 1) as f64;
    let xs = (0..n).map(|i| lo + h * i as f64).collect();
    (xs, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        // degree 15 polynomial x^14 on [-1,1]: 2/15
        let val: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(14)).sum();
        assert_abs_diff_eq!(val, 2.0 / 15.0, epsilon = 1e-14);
        let total: f64 = w.iter().sum();
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn panel_rule_handles_oscillation() {
        // int_0^1 cos(40 x) dx = sin(40)/40
        let (x, w) = panel_gauss_legendre(40, 8, 0.0, 1.0);
        let val: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * (40.0 * xi).cos()).sum();
        assert_abs_diff_eq!(val, (40.0f64).sin() / 40.0, epsilon = 1e-12);
    }

    #[test]
    fn adaptive_simpson_gaussian_phase() {
        // int_0^inf e^{-t^2} e^{-i t} dt has known real part sqrt(pi)/2 e^{-1/4}
        let f = |t: f64| c64::new((-t * t).exp(), 0.0) * c64::new(0.0, -t).exp();
        let v = adaptive_simpson(&f, 0.0, 12.0, 1e-12);
        let re_expected = 0.5 * std::f64::consts::PI.sqrt() * (-0.25f64).exp();
        assert_abs_diff_eq!(v.re, re_expected, epsilon = 1e-10);
    }
}
