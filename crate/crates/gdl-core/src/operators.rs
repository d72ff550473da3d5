//! Dense complex operator algebra: checked Hermitian/density/superoperator
//! types, eigendecompositions, fractional powers, partial trace, norms, the
//! KMS inner product, and column-stacking vectorization.
//!
//! Vectorization is column-stacking throughout: `vec(X)[k*d + j] = X[j,k]`,
//! and the conjugation map `X -> A X B` vectorizes as `kron(B^T, A)`.

use ndarray::prelude::*;
use ndarray_linalg::{Eigh, OperationNorm, SVD, UPLO};
use num_complex::Complex64 as c64;

use crate::error::{GdlError, Result};

/// Relative floor below which fractional negative powers refuse to operate.
pub const EIGEN_FLOOR_REL: f64 = 1e-13;

pub fn dag(a: &Array2<c64>) -> Array2<c64> {
    a.t().mapv(|z| z.conj())
}

/// Hermitian eigendecomposition returning a unitary whose columns are the
/// eigenvectors: `a = u diag(vals) u^dag`. (The backend stores eigenvectors
/// conjugated because of the row-major/LAPACK layout mismatch; this wrapper
/// fixes the convention once for the whole crate.)
pub fn eigh_unitary(a: &Array2<c64>) -> Result<(Array1<f64>, Array2<c64>)> {
    let (vals, vecs) = a.eigh(UPLO::Lower)?;
    Ok((vals, vecs.mapv(|z| z.conj())))
}

pub fn vec_op(x: &Array2<c64>) -> Array1<c64> {
    let d = x.nrows();
    let mut v = Array1::zeros(d * d);
    for k in 0..d {
        for j in 0..d {
            v[k * d + j] = x[[j, k]];
        }
    }
    v
}

pub fn unvec_op(v: &Array1<c64>) -> Array2<c64> {
    let d = (v.len() as f64).sqrt().round() as usize;
    assert_eq!(d * d, v.len(), "unvec of a non-square vector");
    let mut x = Array2::zeros((d, d));
    for k in 0..d {
        for j in 0..d {
            x[[j, k]] = v[k * d + j];
        }
    }
    x
}

pub fn kron(a: &Array2<c64>, b: &Array2<c64>) -> Array2<c64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == c64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Superoperator matrix of `X -> A X B` under column stacking.
pub fn conj_superop(a: &Array2<c64>, b: &Array2<c64>) -> Array2<c64> {
    kron(&b.t().to_owned(), a)
}

pub fn identity(d: usize) -> Array2<c64> {
    Array2::eye(d)
}

pub fn max_abs(a: &Array2<c64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius(a: &Array2<c64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Operator (spectral) norm via SVD.
pub fn op_norm(a: &Array2<c64>) -> f64 {
    a.opnorm_one().ok(); // keep ndarray-linalg trait linked; actual value below
    match a.svd(false, false) {
        Ok((_, s, _)) => s.iter().cloned().fold(0.0, f64::max),
        Err(_) => frobenius(a),
    }
}

/// Schatten-1 norm (sum of singular values).
pub fn schatten1(a: &Array2<c64>) -> f64 {
    let (_, s, _) = a.svd(false, false).expect("svd failed");
    s.sum()
}

fn is_hermitian_tol(a: &Array2<c64>, rel_tol: f64) -> bool {
    let scale = max_abs(a).max(1e-300);
    let d = a.nrows();
    for j in 0..d {
        for k in j..d {
            if (a[[j, k]] - a[[k, j]].conj()).norm() > rel_tol * scale {
                return false;
            }
        }
    }
    true
}

/// Complex square matrix checked to equal its conjugate transpose to
/// within `1e-12` of the largest entry magnitude.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    dim: usize,
    entries: Array2<c64>,
}

impl HermitianOperator {
    pub fn new(entries: Array2<c64>) -> Result<Self> {
        let d = entries.nrows();
        if d == 0 || entries.ncols() != d {
            return Err(GdlError::Structural("operator must be square and nonempty".into()));
        }
        if !is_hermitian_tol(&entries, 1e-12) {
            return Err(GdlError::Structural("operator is not Hermitian within 1e-12".into()));
        }
        Ok(Self { dim: d, entries })
    }

    /// Symmetrize and wrap; for results of algebra that are Hermitian up to roundoff.
    pub fn from_nearly_hermitian(entries: Array2<c64>) -> Result<Self> {
        let h = (&entries + &dag(&entries)).mapv(|z| z * 0.5);
        HermitianOperator::new(h)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &Array2<c64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<c64> {
        self.entries
    }
}

/// Hermitian, PSD (eigenvalues >= -1e-12), unit-trace state.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    dim: usize,
    entries: Array2<c64>,
}

impl DensityMatrix {
    pub fn new(entries: Array2<c64>) -> Result<Self> {
        let h = HermitianOperator::new(entries)?;
        let scale = max_abs(h.entries()).max(1e-300);
        let tr = h.entries().diag().sum();
        if (tr - c64::new(1.0, 0.0)).norm() > 1e-12 * scale.max(1.0) {
            return Err(GdlError::Structural(format!(
                "density matrix trace {} is not 1 within 1e-12",
                tr
            )));
        }
        let (vals, _) = h.entries().eigh(UPLO::Lower)?;
        if let Some(minev) = vals.iter().cloned().reduce(f64::min) {
            if minev < -1e-12 {
                return Err(GdlError::Structural(format!(
                    "density matrix has eigenvalue {minev} below -1e-12"
                )));
            }
        }
        Ok(Self { dim: h.dim, entries: h.entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &Array2<c64> {
        &self.entries
    }

    pub fn as_hermitian(&self) -> HermitianOperator {
        HermitianOperator { dim: self.dim, entries: self.entries.clone() }
    }

    /// Smallest eigenvalue (for `||rho^{-1/2}||` and singularity checks).
    pub fn min_eigenvalue(&self) -> f64 {
        let (vals, _) = self.entries.eigh(UPLO::Lower).expect("eigh failed");
        vals.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Dense linear map on column-stacked operators; `matrix` is d^2 x d^2.
#[derive(Debug, Clone)]
pub struct SuperOperator {
    dim: usize,
    matrix: Array2<c64>,
}

impl SuperOperator {
    pub fn new(dim: usize, matrix: Array2<c64>) -> Result<Self> {
        if matrix.nrows() != dim * dim || matrix.ncols() != dim * dim {
            return Err(GdlError::Structural(format!(
                "superoperator for dim {dim} must be {0}x{0}",
                dim * dim
            )));
        }
        Ok(Self { dim, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Array2<c64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<c64> {
        self.matrix
    }

    pub fn compose(&self, other: &SuperOperator) -> Result<SuperOperator> {
        if self.dim != other.dim {
            return Err(GdlError::Structural("superoperator dim mismatch in compose".into()));
        }
        Ok(SuperOperator { dim: self.dim, matrix: self.matrix.dot(&other.matrix) })
    }

    /// Hilbert-Schmidt adjoint (conjugate transpose of the matrix).
    pub fn adjoint(&self) -> SuperOperator {
        SuperOperator { dim: self.dim, matrix: dag(&self.matrix) }
    }

    /// Max deviation of the trace-preservation row identity
    /// `vec(I)^dag S = vec(I)^dag`.
    pub fn trace_preservation_defect(&self) -> f64 {
        let d = self.dim;
        let vi = vec_op(&identity(d));
        let mut worst = 0.0f64;
        for col in 0..d * d {
            let mut acc = c64::new(0.0, 0.0);
            for row in 0..d * d {
                acc += vi[row].conj() * self.matrix[[row, col]];
            }
            worst = worst.max((acc - vi[col].conj()).norm());
        }
        worst
    }

    /// Choi matrix `sum_{pq} E_pq (x) S(E_pq)`; PSD iff S is completely positive.
    pub fn choi(&self) -> Array2<c64> {
        let d = self.dim;
        let mut choi = Array2::zeros((d * d, d * d));
        for p in 0..d {
            for q in 0..d {
                let mut e = Array2::zeros((d, d));
                e[[p, q]] = c64::new(1.0, 0.0);
                let se = unvec_op(&self.matrix.dot(&vec_op(&e)));
                for j in 0..d {
                    for k in 0..d {
                        choi[[p * d + j, q * d + k]] += se[[j, k]];
                    }
                }
            }
        }
        choi
    }

    /// Smallest eigenvalue of the Hermitized Choi matrix.
    pub fn choi_min_eigenvalue(&self) -> f64 {
        let choi = self.choi();
        let h = (&choi + &dag(&choi)).mapv(|z| z * 0.5);
        let (vals, _) = h.eigh(UPLO::Lower).expect("eigh failed");
        vals.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Trace out the trailing dimension-2 bath factor of a `2d x 2d` operator.
pub fn partial_trace_bath(joint: &HermitianOperator) -> Result<HermitianOperator> {
    let dj = joint.dim();
    if dj % 2 != 0 {
        return Err(GdlError::Structural(format!(
            "partial_trace_bath requires even joint dimension, got {dj}"
        )));
    }
    let out = partial_trace_bath_raw(joint.entries());
    HermitianOperator::new(out)
}

/// Partial trace over the trailing tensor factor of dimension 2, on raw entries.
pub fn partial_trace_bath_raw(joint: &Array2<c64>) -> Array2<c64> {
    let d = joint.nrows() / 2;
    let mut out = Array2::zeros((d, d));
    for s in 0..d {
        for sp in 0..d {
            let mut acc = c64::new(0.0, 0.0);
            for e in 0..2 {
                acc += joint[[s * 2 + e, sp * 2 + e]];
            }
            out[[s, sp]] = acc;
        }
    }
    out
}

/// `rho^p` from the eigendecomposition. Negative powers refuse eigenvalues
/// under `EIGEN_FLOOR_REL` times the largest one.
pub fn op_power(rho: &DensityMatrix, p: f64) -> Result<HermitianOperator> {
    let powd = op_power_raw(rho.entries(), p)?;
    HermitianOperator::from_nearly_hermitian(powd)
}

pub fn op_power_raw(rho: &Array2<c64>, p: f64) -> Result<Array2<c64>> {
    let (vals, vecs) = eigh_unitary(rho)?;
    let top = vals.iter().cloned().fold(0.0, f64::max);
    let floor = EIGEN_FLOOR_REL * top;
    let mut powered = Array1::<f64>::zeros(vals.len());
    for (i, &ev) in vals.iter().enumerate() {
        if p < 0.0 && ev < floor {
            return Err(GdlError::Singularity(format!(
                "eigenvalue {ev} below floor {floor} for power {p}"
            )));
        }
        // clamp tiny negatives from roundoff before fractional powers
        powered[i] = ev.max(0.0).powf(p);
    }
    let mut out = Array2::zeros(rho.dim());
    let d = vals.len();
    for j in 0..d {
        for k in 0..d {
            let mut acc = c64::new(0.0, 0.0);
            for m in 0..d {
                acc += vecs[[j, m]] * powered[m] * vecs[[k, m]].conj();
            }
            out[[j, k]] = acc;
        }
    }
    Ok(out)
}

/// KMS inner product `<A, B>_rho = Tr(A^dag rho^{1/2} B rho^{1/2})`.
pub fn kms_inner(a: &Array2<c64>, b: &Array2<c64>, rho: &DensityMatrix) -> Result<c64> {
    if rho.min_eigenvalue() <= 0.0 {
        return Err(GdlError::Singularity("kms_inner requires strictly positive rho".into()));
    }
    let rs = op_power_raw(rho.entries(), 0.5)?;
    let prod = dag(a).dot(&rs).dot(b).dot(&rs);
    Ok(prod.diag().sum())
}

/// Build the dense matrix of a linear operator-to-operator map by its action
/// on matrix units; linearity is spot-checked on seeded random pairs.
pub fn superop_from_map<F>(action: F, d: usize) -> Result<SuperOperator>
where
    F: Fn(&Array2<c64>) -> Array2<c64>,
{
    let mut m = Array2::zeros((d * d, d * d));
    for k in 0..d {
        for j in 0..d {
            let mut e = Array2::zeros((d, d));
            e[[j, k]] = c64::new(1.0, 0.0);
            let col = vec_op(&action(&e));
            for row in 0..d * d {
                m[[row, k * d + j]] = col[row];
            }
        }
    }
    let s = SuperOperator::new(d, m)?;
    // probabilistic linearity check: action(aX + Y) vs a*action(X) + action(Y)
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x11ce);
    for _ in 0..3 {
        let rnd = |rng: &mut rand_chacha::ChaCha8Rng| {
            Array2::from_shape_fn((d, d), |_| c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        };
        let x = rnd(&mut rng);
        let y = rnd(&mut rng);
        let aco = c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        let lhs = action(&(&x * aco + &y));
        let rhs = &action(&x) * aco + &action(&y);
        let scale = max_abs(&rhs).max(1.0);
        if max_abs(&(&lhs - &rhs)) > 1e-9 * scale {
            return Err(GdlError::Contract("superop_from_map: action is not linear".into()));
        }
    }
    Ok(s)
}

/// `unvec(S vec(X))`, with dimension check.
pub fn apply_superop(s: &SuperOperator, x: &Array2<c64>) -> Result<Array2<c64>> {
    if x.nrows() != s.dim() || x.ncols() != s.dim() {
        return Err(GdlError::Structural(format!(
            "apply_superop: operator dim {} does not match superoperator dim {}",
            x.nrows(),
            s.dim()
        )));
    }
    Ok(unvec_op(&s.matrix().dot(&vec_op(x))))
}

/// `D(r1, r2) = ||r1 - r2||_1 / 2`.
pub fn trace_distance(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    if r1.dim() != r2.dim() {
        return Err(GdlError::Structural("trace_distance: dimension mismatch".into()));
    }
    Ok(0.5 * schatten1(&(r1.entries() - r2.entries())))
}

/// Matrix exponential by Pade-13 scaling and squaring.
pub fn expm(a: &Array2<c64>) -> Array2<c64> {
    let d = a.nrows();
    let norm1 = a.opnorm_one().unwrap_or_else(|_| frobenius(a));
    let theta13 = 5.371920351148152;
    let mut squarings = 0usize;
    let mut asc = a.clone();
    if norm1 > theta13 {
        squarings = ((norm1 / theta13).log2().ceil() as i32).max(0) as usize;
        asc = a.mapv(|z| z / (2f64.powi(squarings as i32)));
    }
    let b: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let id = identity(d);
    let a2 = asc.dot(&asc);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let u_inner = &a6 * c64::new(b[13], 0.0) + &a4 * c64::new(b[11], 0.0) + &a2 * c64::new(b[9], 0.0);
    let u = asc.dot(
        &(a6.dot(&u_inner)
            + &a6 * c64::new(b[7], 0.0)
            + &a4 * c64::new(b[5], 0.0)
            + &a2 * c64::new(b[3], 0.0)
            + &id * c64::new(b[1], 0.0)),
    );
    let v_inner = &a6 * c64::new(b[12], 0.0) + &a4 * c64::new(b[10], 0.0) + &a2 * c64::new(b[8], 0.0);
    let v = a6.dot(&v_inner)
        + &a6 * c64::new(b[6], 0.0)
        + &a4 * c64::new(b[4], 0.0)
        + &a2 * c64::new(b[2], 0.0)
        + &id * c64::new(b[0], 0.0);
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut f = solve_dense(&lhs, &rhs);
    for _ in 0..squarings {
        f = f.dot(&f);
    }
    f
}

/// Solve A X = B by Gaussian elimination with partial pivoting.
fn solve_dense(a: &Array2<c64>, b: &Array2<c64>) -> Array2<c64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut lu = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let mut piv = col;
        let mut best = lu[[col, col]].norm();
        for r in col + 1..n {
            let v = lu[[r, col]].norm();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if piv != col {
            for c in 0..n {
                let tmp = lu[[col, c]];
                lu[[col, c]] = lu[[piv, c]];
                lu[[piv, c]] = tmp;
            }
            for c in 0..m {
                let tmp = x[[col, c]];
                x[[col, c]] = x[[piv, c]];
                x[[piv, c]] = tmp;
            }
        }
        let diag = lu[[col, col]];
        for r in col + 1..n {
            let factor = lu[[r, col]] / diag;
            if factor == c64::new(0.0, 0.0) {
                continue;
            }
            for c in col..n {
                let v = lu[[col, c]];
                lu[[r, c]] -= factor * v;
            }
            for c in 0..m {
                let v = x[[col, c]];
                x[[r, c]] -= factor * v;
            }
        }
    }
    for col in (0..n).rev() {
        let diag = lu[[col, col]];
        for c in 0..m {
            let mut acc = x[[col, c]];
            for k in col + 1..n {
                acc -= lu[[col, k]] * x[[k, c]];
            }
            x[[col, c]] = acc / diag;
        }
    }
    x
}
