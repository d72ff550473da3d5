//! Similarity-transformed spectral machinery: the Hermitian/anti-Hermitian
//! split `K(rho, L) = H + A`, the spectral gap on the orthocomplement of
//! `sqrt(rho)`, the Gibbs-commutation defect, the weighted `d_beta` metric,
//! and the closed-form integer mixing-time bound.

use ndarray::prelude::*;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as c64;
use serde::Serialize;

use crate::error::{GdlError, Result};
use crate::operators::{
    conj_superop, dag, frobenius, op_norm, op_power_raw, vec_op, DensityMatrix, SuperOperator,
};

/// `K(rho, L)` with its Hermitian and anti-Hermitian parts under the
/// Hilbert-Schmidt inner product.
#[derive(Debug, Clone)]
pub struct SimilaritySplit {
    pub k: SuperOperator,
    pub herm: SuperOperator,
    pub anti: SuperOperator,
}

/// `K(X) = rho^{-1/4} L(rho^{1/4} X rho^{1/4}) rho^{-1/4}`, split into
/// `(K + K^dag)/2` and `(K - K^dag)/2`.
pub fn similarity_transform(l: &SuperOperator, rho: &DensityMatrix) -> Result<SimilaritySplit> {
    let rp = op_power_raw(rho.entries(), 0.25)
        .map_err(|_| GdlError::Singularity("similarity transform needs strictly positive rho".into()))?;
    let rm = op_power_raw(rho.entries(), -0.25)?;
    let sandwich_in = conj_superop(&rp, &rp);
    let sandwich_out = conj_superop(&rm, &rm);
    let k = sandwich_out.dot(l.matrix()).dot(&sandwich_in);
    let kd = dag(&k);
    let herm = (&k + &kd).mapv(|z| z * 0.5);
    let anti = (&k - &kd).mapv(|z| z * 0.5);
    let d = rho.dim();
    Ok(SimilaritySplit {
        k: SuperOperator::new(d, k)?,
        herm: SuperOperator::new(d, herm)?,
        anti: SuperOperator::new(d, anti)?,
    })
}

/// Spectral data of `-herm` restricted orthogonal to `sqrt(rho)`.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub gap: f64,
    pub eigenvalues: Vec<f64>,
    /// Dimension of the near-kernel (eigenvalues within the extraction
    /// threshold of zero); 1 for a primitive generator.
    pub kernel_dim: usize,
}

/// Threshold separating the kernel direction from genuine spectrum.
pub const GAP_KERNEL_THRESHOLD: f64 = 1e-9;

/// Dense Hermitian eigensolve of the negated Hermitian part projected onto
/// the orthocomplement of `sqrt(rho)`. Requires the generator to satisfy
/// detailed balance (defect <= 1e-6), which makes the split meaningful.
pub fn spectral_gap(l_kms: &SuperOperator, rho: &DensityMatrix) -> Result<GapReport> {
    let defect = kms_defect_of_generator(l_kms, rho)?;
    if defect > 1e-6 {
        return Err(GdlError::Contract(format!(
            "spectral_gap requires a KMS-detailed-balanced generator; defect = {defect:.3e}"
        )));
    }
    let split = similarity_transform(l_kms, rho)?;
    gap_of_hermitian_part(&split, rho)
}

/// Gap extraction given a similarity split (no detailed-balance precheck).
pub fn gap_of_hermitian_part(split: &SimilaritySplit, rho: &DensityMatrix) -> Result<GapReport> {
    let d = rho.dim();
    let sq = op_power_raw(rho.entries(), 0.5)?;
    let mut v = vec_op(&sq);
    let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv_inplace(|z| z / nrm);
    // P (-H) P with P the orthocomplement projector of v
    let n = d * d;
    let mut proj = Array2::<c64>::eye(n);
    for i in 0..n {
        for j in 0..n {
            proj[[i, j]] -= v[i] * v[j].conj();
        }
    }
    let m = proj.dot(&split.herm.matrix().mapv(|z| -z)).dot(&proj);
    let mh = (&m + &dag(&m)).mapv(|z| z * 0.5);
    let (vals, _) = mh.eigh(UPLO::Lower)?;
    let mut eigenvalues: Vec<f64> = vals.to_vec();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if eigenvalues.iter().any(|&e| e < -GAP_KERNEL_THRESHOLD) {
        return Err(GdlError::Contract(format!(
            "Hermitian part has a positive mode: min eigenvalue {:.3e}",
            eigenvalues[0]
        )));
    }
    let kernel_dim = eigenvalues.iter().filter(|&&e| e.abs() <= GAP_KERNEL_THRESHOLD).count();
    let gap = eigenvalues
        .iter()
        .cloned()
        .find(|&e| e > GAP_KERNEL_THRESHOLD)
        .ok_or_else(|| GdlError::Contract("no spectrum above the kernel threshold".into()))?;
    Ok(GapReport { gap, eigenvalues, kernel_dim })
}

/// Detailed-balance defect of a generator expressed through the transition
/// part of its similarity split: `||A(rho, L)||` measured entrywise.
fn kms_defect_of_generator(l: &SuperOperator, rho: &DensityMatrix) -> Result<f64> {
    let split = similarity_transform(l, rho)?;
    Ok(crate::operators::max_abs(split.anti.matrix()))
}

/// Gibbs-commutation defect
/// `delta_Lamb = ||rho^{-1/4} H rho^{1/4} - rho^{1/4} H rho^{-1/4}||`.
pub fn lamb_defect(h_lamb: &Array2<c64>, rho: &DensityMatrix) -> Result<f64> {
    let rp = op_power_raw(rho.entries(), 0.25)?;
    let rm = op_power_raw(rho.entries(), -0.25)?;
    let diff = rm.dot(h_lamb).dot(&rp) - rp.dot(h_lamb).dot(&rm);
    Ok(op_norm(&diff))
}

/// `d_beta(r1, r2) = ||rho^{-1/4}(r1 - r2) rho^{-1/4}||_2`.
pub fn d_beta_distance(r1: &Array2<c64>, r2: &Array2<c64>, rho: &DensityMatrix) -> Result<f64> {
    let rm = op_power_raw(rho.entries(), -0.25)?;
    let diff = r1 - r2;
    Ok(frobenius(&rm.dot(&diff).dot(&rm)))
}

/// Integer mixing-time bound `(1/(gap alpha^2)) log(2 ||rho^{-1/2}|| / eps)`,
/// with the operator norm computed from the smallest Gibbs eigenvalue.
pub fn mixing_time_bound(gap: f64, alpha: f64, eps: f64, rho: &DensityMatrix) -> Result<f64> {
    if !(gap > 0.0 && alpha > 0.0 && eps > 0.0) {
        return Err(GdlError::Parameter("gap, alpha, eps must be positive".into()));
    }
    if eps >= 2.0 {
        return Ok(0.0);
    }
    let min_ev = rho.min_eigenvalue();
    if min_ev <= 0.0 {
        return Err(GdlError::Singularity("mixing bound needs strictly positive rho".into()));
    }
    let norm_inv_sqrt = 1.0 / min_ev.sqrt();
    let arg = 2.0 * norm_inv_sqrt / eps;
    Ok((1.0 / (gap * alpha * alpha)) * arg.ln().max(0.0))
}
