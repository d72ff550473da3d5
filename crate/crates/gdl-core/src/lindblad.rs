//! The effective weak-coupling Lindbladian and its exact KMS decomposition.
//!
//! The generator splits as `L_full = -i[H_Lamb, .] + L_KMS` with
//! `H_Lamb = H_coh - G_D` and `L_KMS = -i[G_D, .] + transition - {M_D, .}/2`,
//! where `G_D` is the tanh-Bohr coherent term completing the detailed-balance
//! transition part. Dissipative pieces use the closed-form Gaussian frequency
//! kernel; the coherent term integrates half-plane correlation functions over
//! the frequency density on a shared trapezoid grid.

use ndarray::prelude::*;
use num_complex::Complex64 as c64;
use rayon::prelude::*;

use crate::error::{GdlError, Result};
use crate::model::{bohr_project, default_gap_tol, SystemModel};
use crate::operators::{
    apply_superop, conj_superop, dag, identity, kms_inner, max_abs, op_power_raw, unvec_op, vec_op,
    DensityMatrix, SuperOperator,
};
use crate::quad::{adaptive_simpson, omega_grid};

/// Envelope `f(t) = e^{-t^2/(4 sigma^2)} / sqrt(sigma sqrt(2 pi))`, unit L2 norm.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeFunction {
    pub sigma: f64,
}

impl EnvelopeFunction {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(GdlError::Parameter(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn eval(&self, t: f64) -> f64 {
        envelope_f(t, self.sigma)
    }

    pub fn transform(&self, u: f64) -> f64 {
        envelope_f_hat(u, self.sigma)
    }
}

pub fn envelope_f(t: f64, sigma: f64) -> f64 {
    (-t * t / (4.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt()).sqrt()
}

/// Closed form of `int f(t) e^{iut} dt = 2^{3/4} pi^{1/4} sqrt(sigma) e^{-sigma^2 u^2}`.
pub fn envelope_f_hat(u: f64, sigma: f64) -> f64 {
    2f64.powf(0.75) * std::f64::consts::PI.powf(0.25) * sigma.sqrt() * (-sigma * sigma * u * u).exp()
}

/// The frequency densities fixed by the detailed-balance parameter choice:
/// `g` is Gaussian with mean `-1/beta` and variance `sigma_beta/beta^2`,
/// `beta_tilde = 2 beta / sigma_beta`, and `gamma(w) = g(w)` identically.
#[derive(Debug, Clone, Copy)]
pub struct SpectralDensities {
    pub beta: f64,
    pub sigma: f64,
    pub beta_tilde: f64,
    pub sigma_beta: f64,
}

impl SpectralDensities {
    pub fn mean(&self) -> f64 {
        -1.0 / self.beta
    }

    pub fn variance(&self) -> f64 {
        self.sigma_beta / (self.beta * self.beta)
    }

    pub fn g(&self, w: f64) -> f64 {
        let beta = self.beta;
        (-(beta * w + 1.0) * (beta * w + 1.0) / (2.0 * self.sigma_beta)).exp() * beta
            / (2.0 * std::f64::consts::PI * self.sigma_beta).sqrt()
    }

    pub fn gamma(&self, w: f64) -> f64 {
        (self.g(w) + self.g(-w)) / (1.0 + (self.beta_tilde * w).exp())
    }
}

/// Construct the densities; verifies the gamma = g identity on a 101-point grid.
pub fn spectral_densities(beta: f64, sigma: f64) -> Result<SpectralDensities> {
    if !(beta > 0.0) {
        return Err(GdlError::Parameter(format!("beta must be positive, got {beta}")));
    }
    let sigma_beta = 2.0 - beta * beta / (4.0 * sigma * sigma);
    if !(sigma_beta > 0.0) || !(sigma > 0.0) {
        return Err(GdlError::Parameter(format!(
            "sigma = {sigma} too small for beta = {beta}: requires sigma > beta/(2 sqrt2)"
        )));
    }
    let dens = SpectralDensities { beta, sigma, beta_tilde: 2.0 * beta / sigma_beta, sigma_beta };
    let worst = gamma_identity_defect(&dens, 101);
    if worst > 1e-12 {
        return Err(GdlError::Contract(format!(
            "gamma(w) = g(w) identity violated at {worst:.3e}"
        )));
    }
    Ok(dens)
}

/// Max of |gamma(w) - g(w)| over a symmetric grid of `n` points.
pub fn gamma_identity_defect(dens: &SpectralDensities, n: usize) -> f64 {
    let s = dens.variance().sqrt();
    let mut worst = 0.0f64;
    for i in 0..n {
        let w = dens.mean() - 5.0 * s + 10.0 * s * (i as f64) / ((n - 1) as f64);
        worst = worst.max((dens.gamma(w) - dens.g(w)).abs());
    }
    worst
}

/// Closed-form kernel `kappa(nu, nu') = int gamma(w) f_hat(nu - w) f_hat(nu' - w) dw`
/// for the Gaussian density and Gaussian envelope transform.
pub fn frequency_kernel(nu: f64, nup: f64, dens: &SpectralDensities) -> f64 {
    let sigma = dens.sigma;
    let cf2 = 2f64.powf(1.5) * std::f64::consts::PI.sqrt() * sigma;
    let s2 = dens.variance();
    let a = 1.0 / (2.0 * s2);
    let b = 2.0 * sigma * sigma;
    let nubar = 0.5 * (nu + nup);
    let m = dens.mean();
    cf2 / (2.0 * std::f64::consts::PI * s2).sqrt()
        * (std::f64::consts::PI / (a + b)).sqrt()
        * (-(a * b / (a + b)) * (nubar - m) * (nubar - m)
            - sigma * sigma * (nu - nup) * (nu - nup) / 2.0)
            .exp()
}

/// Jump operator in the eigenbasis: `V(w)_{jk} = A_{jk} f_hat(lam_j - lam_k - w)`.
pub fn jump_operator(
    a: &Array2<c64>,
    omega: f64,
    system: &SystemModel,
    sigma: f64,
) -> Array2<c64> {
    let ae = system.to_eigenbasis(a);
    let v = jump_operator_eigenbasis(&ae, omega, system.eigenvalues(), sigma);
    system.from_eigenbasis(&v)
}

pub fn jump_operator_eigenbasis(
    a_eig: &Array2<c64>,
    omega: f64,
    lam: &Array1<f64>,
    sigma: f64,
) -> Array2<c64> {
    let d = lam.len();
    let mut v = Array2::zeros((d, d));
    for j in 0..d {
        for k in 0..d {
            v[[j, k]] = a_eig[[j, k]] * envelope_f_hat(lam[j] - lam[k] - omega, sigma);
        }
    }
    v
}

/// Half-plane correlation `G_{A,f}(w)` over `s2 <= s1`: the inner Gaussian
/// integral is closed-form; the outer tau integral runs adaptively on
/// `[0, tau_max_sigmas * sigma]`.
pub fn g_correlation(
    a: &Array2<c64>,
    omega: f64,
    system: &SystemModel,
    sigma: f64,
    tau_max_sigmas: f64,
) -> Result<Array2<c64>> {
    let ae = system.to_eigenbasis(a);
    let g = g_correlation_eigenbasis(&ae, omega, system.eigenvalues(), sigma, tau_max_sigmas)?;
    Ok(system.from_eigenbasis(&g))
}

pub fn g_correlation_eigenbasis(
    a_eig: &Array2<c64>,
    omega: f64,
    lam: &Array1<f64>,
    sigma: f64,
    tau_max_sigmas: f64,
) -> Result<Array2<c64>> {
    let d = lam.len();
    let ad = dag(a_eig);
    let tau_max = tau_max_sigmas * sigma;
    let eight_s2 = 8.0 * sigma * sigma;
    // cache the scalar tau-integral by its phase frequency q
    let mut cache: std::collections::BTreeMap<i64, c64> = std::collections::BTreeMap::new();
    let mut tau_integral = |q: f64| -> c64 {
        let key = (q * 1e10).round() as i64;
        if let Some(v) = cache.get(&key) {
            return *v;
        }
        let f = |t: f64| c64::from_polar((-t * t / eight_s2).exp(), -q * t);
        let v = adaptive_simpson(&f, 0.0, tau_max, 1e-10);
        if !v.re.is_finite() || !v.im.is_finite() {
            return c64::new(f64::NAN, 0.0);
        }
        cache.insert(key, v);
        v
    };
    let mut out = Array2::zeros((d, d));
    for j in 0..d {
        for k in 0..d {
            let mut acc = c64::new(0.0, 0.0);
            for m in 0..d {
                let w = ad[[j, m]] * a_eig[[m, k]];
                if w == c64::new(0.0, 0.0) {
                    continue;
                }
                let q = 0.5 * (lam[j] + lam[k]) - lam[m] + omega;
                let iv = tau_integral(q);
                if !iv.re.is_finite() {
                    return Err(GdlError::Resolution("tau quadrature failed to converge".into()));
                }
                acc += w * iv;
            }
            let damp = (-(sigma * sigma) * (lam[j] - lam[k]) * (lam[j] - lam[k]) / 2.0).exp();
            out[[j, k]] = acc * damp;
        }
    }
    Ok(out)
}

/// `(i/2) sum_nu tanh(beta nu / 4) X_nu` over the Bohr blocks of X.
pub fn tanh_bohr_transform(
    x: &Array2<c64>,
    system: &SystemModel,
    beta: f64,
    gap_tol: f64,
) -> Result<Array2<c64>> {
    let dec = bohr_project(system, x, gap_tol)?;
    let d = system.dim();
    let mut out = Array2::<c64>::zeros((d, d));
    for (nu, blk) in dec.frequencies.iter().zip(&dec.blocks) {
        let w = c64::new(0.0, 0.5 * (beta * nu / 4.0).tanh());
        out = out + blk.mapv(|z| z * w);
    }
    Ok(out)
}

/// The assembled generator bundle.
#[derive(Debug, Clone)]
pub struct GeneratorParts {
    pub l_full: SuperOperator,
    pub l_kms: SuperOperator,
    pub transition: SuperOperator,
    pub h_coh: Array2<c64>,
    pub m_d: Array2<c64>,
    pub g_d: Array2<c64>,
    pub h_lamb: Array2<c64>,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    /// Minimum node count of the shared frequency trapezoid rule.
    pub min_omega_nodes: usize,
    /// Extent of the outer correlation integral in units of sigma.
    pub tau_max_sigmas: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { min_omega_nodes: 3, tau_max_sigmas: 12.0 }
    }
}

/// Assemble `L_full`, its KMS part, and all named pieces in the original basis.
pub fn assemble_generator(
    system: &SystemModel,
    beta: f64,
    sigma: f64,
    quad: &QuadratureSpec,
) -> Result<GeneratorParts> {
    let dens = spectral_densities(beta, sigma)?;
    let d = system.dim();
    let lam = system.eigenvalues().clone();
    let as_eig: Vec<Array2<c64>> =
        system.couplings().iter().map(|a| system.to_eigenbasis(a)).collect();
    let n_a = as_eig.len() as f64;

    // dissipative parts from the exact frequency kernel
    let mut transition_eig = Array2::<c64>::zeros((d * d, d * d));
    let mut m_d_eig = Array2::<c64>::zeros((d, d));
    for a in &as_eig {
        for j in 0..d {
            for k in 0..d {
                let ajk = a[[j, k]];
                if ajk == c64::new(0.0, 0.0) {
                    continue;
                }
                for l in 0..d {
                    for m in 0..d {
                        let alm = a[[l, m]];
                        if alm == c64::new(0.0, 0.0) {
                            continue;
                        }
                        let kap = frequency_kernel(lam[j] - lam[k], lam[l] - lam[m], &dens);
                        // E_jk rho E_lm^dag contributes at row (l*d + j), col (m*d + k)
                        transition_eig[[l * d + j, m * d + k]] += ajk * alm.conj() * kap / n_a;
                    }
                }
            }
        }
        for k in 0..d {
            for m in 0..d {
                let mut acc = c64::new(0.0, 0.0);
                for j in 0..d {
                    acc += a[[j, k]].conj()
                        * a[[j, m]]
                        * frequency_kernel(lam[j] - lam[k], lam[j] - lam[m], &dens);
                }
                m_d_eig[[k, m]] += acc / n_a;
            }
        }
    }

    // Coherent term with the omega integral taken first: the frequency
    // density against each Fermi weight collapses to scalar kernels
    //   k1(tau) = int g(w) e^{-bt w}/(1+e^{-bt w}) e^{-iw tau} dw ,
    //   k2(tau) = int g(w) 1/(1+e^{-bt w}) e^{+iw tau} dw ,
    // and Q = int_0^inf k1(tau) V1(tau) + k2(tau) V2(tau) dtau with the
    // V-correlations closed-form in the eigenbasis. Both kernels decay on
    // the beta scale, so the cost does not grow with sigma.
    let (omegas, h_w) = omega_grid(
        dens.mean(),
        dens.variance().sqrt(),
        system.spectral_range(),
        sigma,
        quad.min_omega_nodes,
    );
    let mut c1: Vec<f64> = Vec::with_capacity(omegas.len());
    let mut c2: Vec<f64> = Vec::with_capacity(omegas.len());
    for &w in &omegas {
        let gw = dens.g(w);
        let btw = dens.beta_tilde * w;
        let (wm, wp) = if btw > 0.0 {
            let e = (-btw).exp();
            (e / (1.0 + e), 1.0 / (1.0 + e))
        } else {
            let e = btw.exp();
            (1.0 / (1.0 + e), e / (1.0 + e))
        };
        c1.push(gw * wm * h_w);
        c2.push(gw * wp * h_w);
    }
    // tau rule: the kernels vanish beyond ~10 beta; panels resolve the
    // fastest phase (density mean + tails + Bohr combinations)
    let tau_max = (quad.tau_max_sigmas * sigma).min(10.0 * beta);
    let freq_max =
        dens.mean().abs() + 7.0 * dens.variance().sqrt() + 0.75 * system.spectral_range();
    let cycles = freq_max * tau_max / (2.0 * std::f64::consts::PI);
    let panels = ((1.5 * cycles).ceil() as usize).max(48);
    let (taus, tau_w) = crate::quad::panel_gauss_legendre(panels, 8, 0.0, tau_max);
    let kernels: Vec<(c64, c64)> = taus
        .par_iter()
        .map(|&tau| {
            let mut k1 = c64::new(0.0, 0.0);
            let mut k2 = c64::new(0.0, 0.0);
            for (i, &w) in omegas.iter().enumerate() {
                k1 += c64::from_polar(c1[i], -w * tau);
                k2 += c64::from_polar(c2[i], w * tau);
            }
            (k1, k2)
        })
        .collect();
    let eight_s2 = 8.0 * sigma * sigma;
    let per_coupling: Vec<Array2<c64>> = as_eig
        .par_iter()
        .map(|a| {
            let mut q = Array2::<c64>::zeros((d, d));
            for (ti, &tau) in taus.iter().enumerate() {
                let (k1, k2) = kernels[ti];
                let env = (-tau * tau / eight_s2).exp() * tau_w[ti];
                if env.abs() < 1e-300 {
                    continue;
                }
                for j in 0..d {
                    for k in 0..d {
                        let mut acc = c64::new(0.0, 0.0);
                        for m in 0..d {
                            let q_phase = c64::from_polar(
                                1.0,
                                -(0.5 * (lam[j] + lam[k]) - lam[m]) * tau,
                            );
                            // V1 carries A(s2) A^dag(s1), V2 carries A^dag(s2) A(s1)
                            let v1 = a[[j, m]] * a[[k, m]].conj();
                            let v2 = a[[m, j]].conj() * a[[m, k]];
                            acc += q_phase * (k1 * v1 + k2 * v2);
                        }
                        let damp =
                            (-(sigma * sigma) * (lam[j] - lam[k]) * (lam[j] - lam[k]) / 2.0).exp();
                        q[[j, k]] += acc * (env * damp);
                    }
                }
            }
            q
        })
        .collect();
    let mut q_coh = Array2::<c64>::zeros((d, d));
    for r in per_coupling {
        q_coh = q_coh + r.mapv(|z| z / n_a);
    }
    // H_LS = -Im(Q) = i (Q - Q^dag)/2
    let h_coh_eig = (&q_coh - &dag(&q_coh)).mapv(|z| z * c64::new(0.0, 0.5));

    let gap_tol = default_gap_tol(system);
    let m_d = system.from_eigenbasis(&m_d_eig);
    let g_d = tanh_bohr_transform(&m_d, system, beta, gap_tol)?;
    let h_coh = system.from_eigenbasis(&h_coh_eig);
    let h_lamb = &h_coh - &g_d;

    // rotate the transition back to the original basis
    let u = system.eigenvectors();
    let w_sup = conj_superop(u, &dag(u));
    let w_inv = conj_superop(&dag(u), u);
    let transition = w_sup.dot(&transition_eig).dot(&w_inv);

    let id = identity(d);
    let build = |coh: &Array2<c64>| -> Array2<c64> {
        let comm = conj_superop(coh, &id) - conj_superop(&id, coh);
        let anti = conj_superop(&m_d, &id) + conj_superop(&id, &m_d);
        comm.mapv(|z| z * c64::new(0.0, -1.0)) + &transition - anti.mapv(|z| z * 0.5)
    };
    let l_kms = build(&g_d);
    let l_full = build(&h_coh);

    Ok(GeneratorParts {
        l_full: SuperOperator::new(d, l_full)?,
        l_kms: SuperOperator::new(d, l_kms)?,
        transition: SuperOperator::new(d, transition)?,
        h_coh,
        m_d,
        g_d,
        h_lamb,
    })
}

/// Worst-case detailed-balance defect of a completely positive map over the
/// matrix-unit basis: `max_{a,b} |<E_a, T'(E_b)>_rho - <T'(E_a), E_b>_rho|`
/// with `T'` the Hilbert-Schmidt adjoint of the transition.
pub fn kms_defect(transition: &SuperOperator, rho: &DensityMatrix) -> Result<f64> {
    let d = rho.dim();
    if transition.dim() != d {
        return Err(GdlError::Structural("kms_defect: dimension mismatch".into()));
    }
    let tdag = transition.adjoint();
    let mut basis = Vec::with_capacity(d * d);
    for j in 0..d {
        for k in 0..d {
            let mut e = Array2::<c64>::zeros((d, d));
            e[[j, k]] = c64::new(1.0, 0.0);
            basis.push(e);
        }
    }
    let mapped: Vec<Array2<c64>> = basis
        .iter()
        .map(|e| apply_superop(&tdag, e))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for a in 0..basis.len() {
        for b in 0..basis.len() {
            let v1 = kms_inner(&basis[a], &mapped[b], rho)?;
            let v2 = kms_inner(&mapped[a], &basis[b], rho)?;
            worst = worst.max((v1 - v2).norm());
        }
    }
    Ok(worst)
}

/// `||L(rho_beta)||_1`-style stationarity check helper.
pub fn apply_to_state(l: &SuperOperator, rho: &Array2<c64>) -> Array2<c64> {
    unvec_op(&l.matrix().dot(&vec_op(rho)))
}

/// Reconstruction defect `max |L_full - (-i[H_Lamb,.] + L_KMS)|`.
pub fn reconstruction_defect(parts: &GeneratorParts) -> f64 {
    let d = parts.h_lamb.nrows();
    let id = identity(d);
    let comm = (conj_superop(&parts.h_lamb, &id) - conj_superop(&id, &parts.h_lamb))
        .mapv(|z| z * c64::new(0.0, -1.0));
    let rec = comm + parts.l_kms.matrix();
    max_abs(&(parts.l_full.matrix() - &rec))
}

/// `rho^{1/4}`-weighted operator helpers used by tests and analysis.
pub fn quarter_powers(rho: &DensityMatrix) -> Result<(Array2<c64>, Array2<c64>)> {
    let plus = op_power_raw(rho.entries(), 0.25)?;
    let minus = op_power_raw(rho.entries(), -0.25)?;
    Ok((plus, minus))
}
