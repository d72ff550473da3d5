//! The random interaction-time law, its Fourier transform, the signed
//! measure correcting the fixed point, and the cancellation residual.
//!
//! The interaction time of each channel application is drawn from
//! `mu(t) = mu0(t/T0)/T0` with `mu0(t) = (t-1)^3 e^{-(t-1)}/6` on `t >= 1`.
//! Fourier conventions: `mu_hat(w) = E[e^{iwT}]`.

use ndarray::prelude::*;
use num_complex::Complex64 as c64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{GdlError, Result};
use crate::model::{gibbs_weights, SystemModel};
use crate::operators::max_abs;
use crate::quad::panel_gauss_legendre;

/// `mu(t) = mu0(t/T0)/T0`, support `[T0, inf)`, mean `5 T0`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimeDistribution {
    pub t0: f64,
}

impl TimeDistribution {
    pub fn new(t0: f64) -> Result<Self> {
        if !(t0 > 0.0) {
            return Err(GdlError::Parameter(format!("T0 must be positive, got {t0}")));
        }
        Ok(Self { t0 })
    }

    pub fn density(&self, t: f64) -> f64 {
        mu0(t / self.t0) / self.t0
    }

    /// Quadrature nodes and weights for `E_{T~mu}[F(T)]`, resolving
    /// integrand oscillations up to frequency about `pi/(panel width)`.
    /// `n_nodes` is the total node count (panels of 8).
    pub fn quadrature(&self, n_nodes: usize) -> (Vec<f64>, Vec<f64>) {
        let order = 8;
        let panels = n_nodes.div_ceil(order).max(1);
        let (s, w) = panel_gauss_legendre(panels, order, 0.0, MU0_SUPPORT);
        let mut ts = Vec::with_capacity(s.len());
        let mut ws = Vec::with_capacity(s.len());
        for (si, wi) in s.iter().zip(&w) {
            let t = 1.0 + si;
            ts.push(self.t0 * t);
            ws.push(wi * mu0(t));
        }
        (ts, ws)
    }
}

/// Length of the scaled support kept by the quadrature; `mu0(1 + 40)` is
/// below 2e-21 of the peak.
pub const MU0_SUPPORT: f64 = 40.0;

pub fn mu0(t: f64) -> f64 {
    if t < 1.0 {
        0.0
    } else {
        let u = t - 1.0;
        u * u * u * (-u).exp() / 6.0
    }
}

/// `mu_hat0(w) = e^{iw}/(1-iw)^4`.
pub fn mu_hat0(w: f64) -> c64 {
    let num = c64::from_polar(1.0, w);
    let den = c64::new(1.0, -w);
    num / (den * den * den * den)
}

/// `mu_hat(w) = mu_hat0(T0 w)`.
pub fn mu_hat(w: f64, t0: f64) -> c64 {
    mu_hat0(t0 * w)
}

/// `nu_hat0(w) = w mu_hat0(w) / (1 - mu_hat0(2w))`, with the removable
/// singularity at w = 0 evaluated by its Taylor series.
pub fn nu_hat0(w: f64) -> c64 {
    if w.abs() < 1e-4 {
        // i/10 * (1 - (4/5) i w + (989/150) w^2 + (2302/375) i w^3)
        let aw = c64::new(0.0, 0.1);
        let series = c64::new(1.0, 0.0)
            + c64::new(0.0, -0.8) * w
            + c64::new(989.0 / 150.0, 0.0) * w * w
            + c64::new(0.0, 2302.0 / 375.0) * w * w * w;
        aw * series
    } else {
        let mh = mu_hat0(w);
        let mh2 = mu_hat0(2.0 * w);
        w * mh / (c64::new(1.0, 0.0) - mh2)
    }
}

/// `nu_hat(w) = nu_hat0(T0 w)/T0`.
pub fn nu_hat(w: f64, t0: f64) -> c64 {
    nu_hat0(t0 * w) / t0
}

/// The time-domain signed measure `nu` with `nu_hat(w) = w mu_hat(w)/(1-mu_hat(2w))`.
///
/// `nu(t)` is purely imaginary; `values` stores the real density `r` with
/// `nu = i r`. `l1` is `int |nu| dt` over the grid.
#[derive(Debug, Clone, Serialize)]
pub struct SignedMeasure {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub l1: f64,
}

/// Discretized inverse Fourier transform of `nu_hat` on a frequency grid
/// resolving both the peak near w = 0 and the cubic tail. The time grid
/// covers at least `[-40 T0, 40 T0]`.
pub fn nu_time_grid(t0: f64, half_extent_t0: f64) -> Result<SignedMeasure> {
    if !(t0 > 0.0) {
        return Err(GdlError::Parameter("T0 must be positive".into()));
    }
    if half_extent_t0 < 40.0 {
        return Err(GdlError::Parameter("grid must cover at least [-40 T0, 40 T0]".into()));
    }
    // cap 2000/T0 leaves cubic-tail mass ~ cap^{-2}/2 ~ 1.2e-7 of order one
    let n: usize = 1 << 16;
    let wmax = 2000.0 / t0;
    let dw = 2.0 * wmax / n as f64;
    let dt = std::f64::consts::PI / wmax;
    if (n as f64 / 2.0) * dt < half_extent_t0 * t0 {
        return Err(GdlError::Resolution(
            "time grid extent too small for requested coverage; raise the frequency cap".into(),
        ));
    }
    let mut buf: Vec<num_complex::Complex<f64>> = (0..n)
        .map(|m| {
            let w = -wmax + dw * m as f64;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            nu_hat(w, t0) * sign
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    fft.process(&mut buf);
    let scale = dw / (2.0 * std::f64::consts::PI);
    let mut grid = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut l1 = 0.0;
    let mut worst_real: f64 = 0.0;
    for idx in 0..n {
        let t = (idx as f64 - n as f64 / 2.0) * dt;
        if t.abs() > half_extent_t0 * t0 {
            continue;
        }
        // e^{i wmax t} phase from the grid offset
        let phase = c64::from_polar(1.0, wmax * t);
        let v = buf[idx] * phase * scale;
        worst_real = worst_real.max(v.re.abs());
        grid.push(t);
        values.push(v.im);
    }
    for i in 1..grid.len() {
        let h = grid[i] - grid[i - 1];
        l1 += 0.5 * h * (values[i].abs() + values[i - 1].abs());
    }
    let peak = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if worst_real > 1e-8 * peak.max(1e-300) {
        return Err(GdlError::Resolution(format!(
            "inverse transform produced a real component {worst_real:.2e}; nu should be i times a real density"
        )));
    }
    Ok(SignedMeasure { grid, values, l1 })
}

impl SignedMeasure {
    /// Forward transform `int nu(t) e^{iwt} dt` of the grid data (trapezoid).
    pub fn forward_transform(&self, w: f64) -> c64 {
        let mut acc = c64::new(0.0, 0.0);
        for i in 1..self.grid.len() {
            let h = self.grid[i] - self.grid[i - 1];
            let f0 = c64::new(0.0, self.values[i - 1]) * c64::from_polar(1.0, w * self.grid[i - 1]);
            let f1 = c64::new(0.0, self.values[i]) * c64::from_polar(1.0, w * self.grid[i]);
            acc += 0.5 * h * (f0 + f1);
        }
        acc
    }

    /// Largest |nu| beyond `|t| > cutoff`.
    pub fn tail_magnitude(&self, cutoff: f64) -> f64 {
        self.grid
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| t.abs() > cutoff)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }
}

/// The fixed-point correction pair: `Y` from the Lamb shift and Gibbs data,
/// `E` with `E_{jk} = nu_hat(lam_k - lam_j) Y_{jk}` in the eigenbasis, and
/// the trace-one Hermitian `rho* = rho_beta + alpha^2 E`.
///
/// `Y` as defined is anti-Hermitian (`Y^dag = -Y`); together with the
/// conjugation antisymmetry of `nu_hat` this makes `E` Hermitian.
#[derive(Debug, Clone)]
pub struct CorrectionOperators {
    /// Original-basis Y.
    pub y: Array2<c64>,
    /// Original-basis E.
    pub e: Array2<c64>,
    /// `rho_beta + alpha^2 E`; Hermitian and trace one, not necessarily PSD.
    pub rho_star: Array2<c64>,
}

/// Build Y, E, and `rho*` from the Lamb shift. Near-degenerate pairs
/// (|lam_j - lam_k| < gap_tol) take the continuity limit
/// `Y_jk = i beta (H_Lamb)_jk p_j`, `E_jk = nu_hat(0) Y_jk`.
pub fn correction_operators(
    h_lamb: &Array2<c64>,
    system: &SystemModel,
    beta: f64,
    t0: f64,
    alpha: f64,
    gap_tol: f64,
) -> Result<CorrectionOperators> {
    let d = system.dim();
    let lam = system.eigenvalues();
    let p = gibbs_weights(lam, beta);
    if p.iter().any(|&x| x <= 0.0) {
        return Err(GdlError::Singularity("Gibbs state is not strictly positive".into()));
    }
    let hle = system.to_eigenbasis(h_lamb);
    let mut y = Array2::<c64>::zeros((d, d));
    let mut e = Array2::<c64>::zeros((d, d));
    for j in 0..d {
        for k in 0..d {
            if j == k {
                continue;
            }
            let dl = lam[j] - lam[k];
            if dl.abs() < gap_tol {
                y[[j, k]] = c64::new(0.0, beta) * hle[[j, k]] * p[j];
                e[[j, k]] = nu_hat(0.0, t0) * y[[j, k]];
            } else {
                y[[j, k]] = c64::new(0.0, -1.0) * hle[[j, k]] * ((p[j] - p[k]) / dl);
                e[[j, k]] = nu_hat(lam[k] - lam[j], t0) * y[[j, k]];
            }
        }
    }
    let rho_eig = Array2::from_diag(&p.mapv(|x| c64::new(x, 0.0)));
    let rho_star_eig = &rho_eig + &e.mapv(|z| z * alpha * alpha);
    Ok(CorrectionOperators {
        y: system.from_eigenbasis(&y),
        e: system.from_eigenbasis(&e),
        rho_star: system.from_eigenbasis(&rho_star_eig),
    })
}

/// `Delta(T) = U_S(2T) E U_S(2T)^dag - E + U_S(T)(-i[H_Lamb, rho_beta])U_S(T)^dag`
/// in the eigenbasis phase representation.
pub fn delta_of_t(
    e: &Array2<c64>,
    h_lamb: &Array2<c64>,
    system: &SystemModel,
    beta: f64,
    t: f64,
) -> Array2<c64> {
    let lam = system.eigenvalues();
    let p = gibbs_weights(lam, beta);
    let ee = system.to_eigenbasis(e);
    let hle = system.to_eigenbasis(h_lamb);
    let d = system.dim();
    let mut out = Array2::<c64>::zeros((d, d));
    for j in 0..d {
        for k in 0..d {
            let delta = lam[j] - lam[k];
            let ph1 = c64::from_polar(1.0, -t * delta);
            let ph2 = c64::from_polar(1.0, -2.0 * t * delta);
            let comm = c64::new(0.0, -1.0) * hle[[j, k]] * (p[k] - p[j]);
            out[[j, k]] = (ph2 - 1.0) * ee[[j, k]] + ph1 * comm;
        }
    }
    system.from_eigenbasis(&out)
}

/// `E_{T~mu}[Delta(T)]` by the oscillation-resolving time quadrature.
pub fn delta_residual(
    e: &Array2<c64>,
    h_lamb: &Array2<c64>,
    system: &SystemModel,
    beta: f64,
    mu: &TimeDistribution,
    n_t_nodes: usize,
) -> Array2<c64> {
    let (ts, ws) = mu.quadrature(n_t_nodes);
    let total: f64 = ws.iter().sum();
    let d = system.dim();
    let mut acc = Array2::<c64>::zeros((d, d));
    for (t, w) in ts.iter().zip(&ws) {
        acc = acc + delta_of_t(e, h_lamb, system, beta, *t).mapv(|z| z * (w / total));
    }
    acc
}

pub fn max_entry(a: &Array2<c64>) -> f64 {
    max_abs(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_system, CouplingSet, Preset, PresetParams};
    use crate::quad::adaptive_simpson;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mu_hat_normalization_and_modulus() {
        assert!((mu_hat0(0.0) - c64::new(1.0, 0.0)).norm() < 1e-15);
        for &w in &[0.3, 1.7, 12.0] {
            let expected = (1.0f64 + w * w).powi(-2);
            assert_abs_diff_eq!(mu_hat0(w).norm(), expected, epsilon = 1e-13);
        }
    }

    #[test]
    fn mu_hat_matches_quadrature_oracle() {
        for &(w, t0) in &[(0.1, 1.0), (1.0, 1.0), (0.1, 3.0)] {
            let f = |t: f64| c64::from_polar(mu0(t / t0) / t0, w * t);
            let oracle = adaptive_simpson(&f, t0, t0 * (1.0 + MU0_SUPPORT), 1e-12);
            assert!((mu_hat(w, t0) - oracle).norm() < 1e-8);
        }
    }

    #[test]
    fn quadrature_reproduces_normalization_and_mean() {
        let mu = TimeDistribution::new(3.0).unwrap();
        let (ts, ws) = mu.quadrature(1200);
        let norm: f64 = ws.iter().sum();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-10);
        let mean: f64 = ts.iter().zip(&ws).map(|(t, w)| t * w).sum();
        assert_abs_diff_eq!(mean, 5.0 * 3.0, epsilon = 1e-9);
    }

    #[test]
    fn nu_hat_at_zero_is_i_over_ten() {
        let v = nu_hat0(0.0);
        assert!((v - c64::new(0.0, 0.1)).norm() < 1e-15);
        let v1 = nu_hat(0.0, 1.0);
        assert!((v1 - c64::new(0.0, 0.1)).norm() < 1e-15);
        // series joins the closed form smoothly at the switch point
        let eps = 1.0000001e-4;
        assert!((nu_hat0(eps) - nu_hat0(0.9999999e-4)).norm() < 1e-9);
    }

    #[test]
    fn nu_hat_conjugation_antisymmetry() {
        // real mu makes nu_hat(-w) = -conj(nu_hat(w))
        for &w in &[0.0, 0.3, 2.0, 17.0] {
            let plus = nu_hat0(w);
            let minus = nu_hat0(-w);
            assert!((minus + plus.conj()).norm() < 1e-13);
        }
    }

    #[test]
    fn nu_hat_cubic_tail() {
        let r50 = nu_hat0(50.0).norm() * 50.0f64.powi(3);
        let r100 = nu_hat0(100.0).norm() * 100.0f64.powi(3);
        assert!(r50 / r100 > 0.5 && r50 / r100 < 2.0);
        assert!((r100 - 1.0).abs() < 0.1);
    }

    #[test]
    fn nu_time_grid_l1_scaling_and_consistency() {
        let mut l1t0 = Vec::new();
        for &t0 in &[1.0f64, 4.0, 16.0] {
            let nu = nu_time_grid(t0, 45.0).unwrap();
            l1t0.push(nu.l1 * t0);
            // Fourier consistency on test frequencies
            let mut worst = 0.0f64;
            for i in 0..64 {
                let w = -3.0 / t0 + 6.0 / t0 * (i as f64 / 63.0);
                worst = worst.max((nu.forward_transform(w) - nu_hat(w, t0)).norm());
            }
            assert!(worst < 1e-6, "forward transform mismatch {worst}");
            // integral of nu equals nu_hat(0) = i/(10 T0)
            let total = nu.forward_transform(0.0);
            assert!((total - c64::new(0.0, 0.1 / t0)).norm() < 1e-7 / t0);
            // tail: the measure decays to ~4.4e-6 of peak past 40 T0 (grid-resolution
            // independent; the underlying tail is genuinely this size)
            let peak = nu.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(nu.tail_magnitude(40.0 * t0) < 1e-5 * peak);
        }
        let hi = l1t0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = l1t0.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi / lo < 1.05, "L1 * T0 varied more than 5%: {l1t0:?}");
    }

    fn tilted_system(scale: f64) -> SystemModel {
        let params = PresetParams { scale, ..Default::default() };
        build_system(Preset::SingleQubitZ, 1, &params, CouplingSet::TiltedXz, 0).unwrap()
    }

    #[test]
    fn correction_vanishes_for_diagonal_lamb_shift() {
        let sys = tilted_system(1.0);
        let hl = sys.hamiltonian().clone(); // commutes with H
        let c = correction_operators(&hl, &sys, 1.0, 4.0, 0.1, 1e-9).unwrap();
        assert!(max_abs(&c.y) < 1e-14);
        assert!(max_abs(&c.e) < 1e-14);
        let tr: c64 = c.rho_star.diag().sum();
        assert_abs_diff_eq!(tr.re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn correction_traces_and_hermiticity() {
        use crate::operators::dag;
        let sys = tilted_system(0.25);
        // any Hermitian operator serves as a stand-in Lamb shift here
        let hl = crate::model::pauli_x().mapv(|z| z * 0.05) + crate::model::pauli_z().mapv(|z| z * 0.01);
        let c = correction_operators(&hl, &sys, 1.0, 6.0, 0.08, 1e-9).unwrap();
        let try_: c64 = c.y.diag().sum();
        let tre: c64 = c.e.diag().sum();
        assert!(try_.norm() < 1e-14 && tre.norm() < 1e-14);
        // Y anti-Hermitian, E Hermitian, rho* Hermitian trace-one
        assert!(max_abs(&(&c.y + &dag(&c.y))) < 1e-14);
        assert!(max_abs(&(&c.e - &dag(&c.e))) < 1e-14);
        assert!(max_abs(&(&c.rho_star - &dag(&c.rho_star))) < 1e-14);
        let tr: c64 = c.rho_star.diag().sum();
        assert_abs_diff_eq!(tr.re, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn fixed_point_functional_equation_entrywise() {
        let sys = tilted_system(0.25);
        let hl = crate::model::pauli_x().mapv(|z| z * 0.05);
        let t0 = 5.0;
        let c = correction_operators(&hl, &sys, 1.0, t0, 0.1, 1e-9).unwrap();
        let lam = sys.eigenvalues();
        let ee = sys.to_eigenbasis(&c.e);
        let ye = sys.to_eigenbasis(&c.y);
        for j in 0..2 {
            for k in 0..2 {
                if j == k {
                    continue;
                }
                let w = lam[k] - lam[j];
                let lhs = ee[[j, k]] * (c64::new(1.0, 0.0) - mu_hat(2.0 * w, t0));
                let rhs = mu_hat(w, t0) * w * ye[[j, k]];
                assert!((lhs - rhs).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn diagonal_lamb_shift_gives_zero_residual_for_any_time_law() {
        let sys = tilted_system(0.5);
        let hl = sys.hamiltonian().clone();
        let c = correction_operators(&hl, &sys, 1.0, 4.0, 0.1, 1e-9).unwrap();
        for &t in &[0.7, 4.0, 11.3] {
            let d = delta_of_t(&c.e, &hl, &sys, 1.0, t);
            assert!(max_abs(&d) < 1e-13);
        }
    }
}
