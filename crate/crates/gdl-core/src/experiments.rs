//! Fixed-point solvers, scaling-law scans, empirical mixing measurement, and
//! slope fitting: the harness turning the theory into acceptance numbers.

use ndarray::prelude::*;
use ndarray_linalg::SVD;
use num_complex::Complex64 as c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{channel_superop, composed_channel, BathConfig, ChannelConfig, TimeLaw};
use crate::error::{GdlError, Result};
use crate::lindblad::{assemble_generator, QuadratureSpec};
use crate::model::SystemModel;
use crate::operators::{
    apply_superop, dag, schatten1, unvec_op, vec_op, DensityMatrix, SuperOperator,
};

/// A scan along one axis with measured values and a least-squares log-log fit.
#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub axis: String,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Least-squares slope of log(values) against log(grid).
    pub slope: f64,
    /// RMS residual of the fit in log space.
    pub fit_residual: f64,
    /// Whether the slope is meaningful: at least 4 grid points and residual < 0.1.
    pub slope_valid: bool,
}

impl ScanReport {
    pub fn from_data(axis: &str, grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let (slope, fit_residual) = slope_fit(&grid, &values)?;
        let slope_valid = grid.len() >= 4 && fit_residual < 0.1;
        Ok(Self { axis: axis.to_string(), grid, values, slope, fit_residual, slope_valid })
    }
}

/// Least-squares slope of `log(ys)` against `log(xs)` with RMS residual.
pub fn slope_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(GdlError::Parameter("slope_fit needs matched series of length >= 2".into()));
    }
    if xs.iter().chain(ys.iter()).any(|&v| !(v > 0.0)) {
        return Err(GdlError::Parameter("slope_fit requires strictly positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(GdlError::Parameter("slope_fit requires a nondegenerate grid".into()));
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let resid = (lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let p = slope * x + icpt;
            (y - p) * (y - p)
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok((slope, resid))
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointResult {
    #[serde(skip)]
    pub state: DensityMatrix,
    /// `||S(rho) - rho||_1`.
    pub residual: f64,
    /// Dimension of the numerical fixed space of the channel.
    pub fixed_space_dim: usize,
}

/// Fixed point of a trace-preserving channel: the null space of `S - I`
/// on the unit-trace slice, Hermitized and renormalized. Errors if the
/// fixed space is not one-dimensional.
pub fn fixed_point(s: &SuperOperator, tol: f64) -> Result<FixedPointResult> {
    let tp = s.trace_preservation_defect();
    if tp > 1e-8 {
        return Err(GdlError::Contract(format!(
            "fixed_point requires a trace-preserving map; defect {tp:.2e}"
        )));
    }
    let d = s.dim();
    let n = d * d;
    let m = s.matrix() - &Array2::<c64>::eye(n);
    let (_, sv, vt) = m.svd(false, true)?;
    let vt = vt.ok_or_else(|| GdlError::Backend("svd returned no right vectors".into()))?;
    let scale = sv.iter().cloned().fold(0.0, f64::max).max(1.0);
    let nulls = sv.iter().filter(|&&x| x < tol.max(1e-12) * scale).count();
    if nulls != 1 {
        return Err(GdlError::NonPrimitive(format!(
            "fixed space has dimension {nulls}; channel is not primitive at tolerance {tol}"
        )));
    }
    // smallest singular value's right vector
    let row = vt.nrows() - 1;
    let mut v = Array1::<c64>::zeros(n);
    for i in 0..n {
        v[i] = vt[[row, i]].conj();
    }
    let cand = unvec_op(&v);
    let herm = (&cand + &dag(&cand)).mapv(|z| z * 0.5);
    let tr: c64 = herm.diag().sum();
    if tr.norm() < 1e-12 {
        return Err(GdlError::NonPrimitive(
            "fixed-space representative is traceless; cannot normalize to a state".into(),
        ));
    }
    let rho = herm.mapv(|z| z / tr);
    // clip roundoff-scale negatives before wrapping as a state
    let rho = (&rho + &dag(&rho)).mapv(|z| z * 0.5);
    let state = DensityMatrix::new(rho.clone()).map_err(|e| {
        GdlError::Contract(format!("fixed point failed the state invariants: {e}"))
    })?;
    let image = apply_superop(s, &rho)?;
    let residual = schatten1(&(&image - &rho));
    Ok(FixedPointResult { state, residual, fixed_space_dim: nulls })
}

/// Power iteration on the unit-trace slice; the independent oracle used by
/// tests against the SVD route.
pub fn fixed_point_power_iteration(
    s: &SuperOperator,
    iters: usize,
    start: &DensityMatrix,
) -> Result<DensityMatrix> {
    let mut rho = start.entries().clone();
    for _ in 0..iters {
        rho = apply_superop(s, &rho)?;
        let tr: c64 = rho.diag().sum();
        rho.mapv_inplace(|z| z / tr);
    }
    let herm = (&rho + &dag(&rho)).mapv(|z| z * 0.5);
    DensityMatrix::new(herm)
}

/// Which route produces the channel whose fixed point a bias scan measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSource {
    ExactBath,
    LindbladComposed,
}

/// `T0` schedule of the interaction-time law:
/// `2 sigma sqrt(log(1/(alpha^2 beta log sigma)))`.
pub fn t0_schedule(alpha: f64, beta: f64, sigma: f64) -> Result<f64> {
    let ls = sigma.ln();
    if ls <= 0.0 {
        return Err(GdlError::Parameter("T0 schedule requires sigma > 1".into()));
    }
    let inner = alpha * alpha * beta * ls;
    if inner >= 1.0 {
        return Err(GdlError::Parameter(
            "T0 schedule requires alpha^2 beta log(sigma) < 1".into(),
        ));
    }
    Ok(2.0 * sigma * (1.0 / inner).ln().sqrt())
}

/// Build the channel superoperator for a bias measurement at one alpha.
pub fn channel_for(
    source: ChannelSource,
    system: &SystemModel,
    bath: &BathConfig,
    cfg: &ChannelConfig,
    quad: &QuadratureSpec,
) -> Result<SuperOperator> {
    match source {
        ChannelSource::ExactBath => channel_superop(system, bath, cfg),
        ChannelSource::LindbladComposed => {
            let parts = assemble_generator(system, bath.beta, bath.sigma, quad)?;
            let (ts, ws) = cfg.time_nodes()?;
            composed_channel(system, &parts.l_full, cfg.alpha, &ts, &ws)
        }
    }
}

/// Fixed-point bias `||rho_fix - rho_beta||_1` across an alpha grid, with
/// `T0` per the schedule, and the fitted slope.
pub fn bias_scan(
    system: &SystemModel,
    bath: &BathConfig,
    base_cfg: &ChannelConfig,
    alphas: &[f64],
    source: ChannelSource,
    rho_beta: &DensityMatrix,
    quad: &QuadratureSpec,
) -> Result<ScanReport> {
    let results: Vec<Result<f64>> = alphas
        .par_iter()
        .map(|&alpha| {
            let t0 = t0_schedule(alpha, bath.beta, bath.sigma)?;
            let cfg = ChannelConfig { alpha, t_law: TimeLaw::RandomMu { t0 }, ..*base_cfg };
            let s = channel_for(source, system, bath, &cfg, quad)?;
            let fp = fixed_point(&s, 1e-8)?;
            Ok(schatten1(&(fp.state.entries() - rho_beta.entries())))
        })
        .collect();
    let mut values = Vec::with_capacity(alphas.len());
    for r in results {
        values.push(r?);
    }
    ScanReport::from_data("alpha", alphas.to_vec(), values)
}

/// One-step trace-norm difference between the exact channel and the
/// composed approximation at fixed interaction time, per alpha; the probe
/// maximizes over the extremal initial states.
pub fn step_error_scan(
    system: &SystemModel,
    bath: &BathConfig,
    base_cfg: &ChannelConfig,
    alphas: &[f64],
    t_fixed: f64,
    quad: &QuadratureSpec,
) -> Result<ScanReport> {
    let parts = assemble_generator(system, bath.beta, bath.sigma, quad)?;
    let probes = extremal_probe_states(system.dim());
    let results: Vec<Result<f64>> = alphas
        .par_iter()
        .map(|&alpha| {
            let cfg = ChannelConfig { alpha, t_law: TimeLaw::Fixed { t: t_fixed }, ..*base_cfg };
            let s_exact = channel_superop(system, bath, &cfg)?;
            let s_comp = composed_channel(system, &parts.l_full, alpha, &[t_fixed], &[1.0])?;
            let diff = s_exact.matrix() - s_comp.matrix();
            let mut worst = 0.0f64;
            for p in &probes {
                let out = unvec_op(&diff.dot(&vec_op(p)));
                worst = worst.max(schatten1(&out));
            }
            Ok(worst)
        })
        .collect();
    let mut values = Vec::with_capacity(alphas.len());
    for r in results {
        values.push(r?);
    }
    ScanReport::from_data("alpha", alphas.to_vec(), values)
}

/// The `d^2` pure probe states built from Hermitized matrix units:
/// basis projectors plus the two superposition states per pair.
pub fn extremal_probe_states(d: usize) -> Vec<Array2<c64>> {
    let mut out = Vec::with_capacity(d * d);
    for j in 0..d {
        let mut e = Array2::<c64>::zeros((d, d));
        e[[j, j]] = c64::new(1.0, 0.0);
        out.push(e);
    }
    for j in 0..d {
        for k in j + 1..d {
            let mut plus = Array2::<c64>::zeros((d, d));
            plus[[j, j]] = c64::new(0.5, 0.0);
            plus[[k, k]] = c64::new(0.5, 0.0);
            plus[[j, k]] = c64::new(0.5, 0.0);
            plus[[k, j]] = c64::new(0.5, 0.0);
            out.push(plus);
            let mut plus_i = Array2::<c64>::zeros((d, d));
            plus_i[[j, j]] = c64::new(0.5, 0.0);
            plus_i[[k, k]] = c64::new(0.5, 0.0);
            plus_i[[j, k]] = c64::new(0.0, -0.5);
            plus_i[[k, j]] = c64::new(0.0, 0.5);
            out.push(plus_i);
        }
    }
    out
}

/// Iteration cap for the mixing search.
pub const MIXING_ITERATION_CAP: u64 = 10_000_000;

/// Smallest iteration count after which every probe state is within `eps`
/// trace distance of the fixed point, found by repeated squaring and a
/// power-indexed binary search.
pub fn mixing_estimate(s: &SuperOperator, eps: f64, rho_fix: &DensityMatrix) -> Result<u64> {
    if eps >= 2.0 {
        return Ok(0);
    }
    let probes = extremal_probe_states(s.dim());
    let worst_at = |sk: &Array2<c64>| -> f64 {
        probes
            .iter()
            .map(|p| {
                let out = unvec_op(&sk.dot(&vec_op(p)));
                schatten1(&(&out - rho_fix.entries()))
            })
            .fold(0.0, f64::max)
    };
    let pow_of = |k: u64| -> Array2<c64> {
        let n = s.dim() * s.dim();
        let mut acc = Array2::<c64>::eye(n);
        let mut base = s.matrix().clone();
        let mut m = k;
        while m > 0 {
            if m & 1 == 1 {
                acc = acc.dot(&base);
            }
            base = base.dot(&base);
            m >>= 1;
        }
        acc
    };
    if worst_at(&pow_of(0)) <= eps {
        return Ok(0);
    }
    let mut k: u64 = 1;
    let mut sk = s.matrix().clone();
    while worst_at(&sk) > eps {
        if k >= MIXING_ITERATION_CAP {
            return Err(GdlError::Timeout(format!(
                "mixing search exceeded {MIXING_ITERATION_CAP} iterations"
            )));
        }
        sk = sk.dot(&sk);
        k *= 2;
    }
    let mut lo = k / 2;
    let mut hi = k;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if worst_at(&pow_of(mid)) <= eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
