//! Test Hamiltonians with cached eigendecompositions, Gibbs states,
//! Bohr-frequency decompositions, Heisenberg evolutions, and coupling sets.

use ndarray::prelude::*;
use num_complex::Complex64 as c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GdlError, Result};
use crate::operators::{dag, eigh_unitary, identity, kron, op_norm, DensityMatrix, HermitianOperator};

pub fn pauli_x() -> Array2<c64> {
    array![
        [c64::new(0.0, 0.0), c64::new(1.0, 0.0)],
        [c64::new(1.0, 0.0), c64::new(0.0, 0.0)]
    ]
}

pub fn pauli_y() -> Array2<c64> {
    array![
        [c64::new(0.0, 0.0), c64::new(0.0, -1.0)],
        [c64::new(0.0, 1.0), c64::new(0.0, 0.0)]
    ]
}

pub fn pauli_z() -> Array2<c64> {
    array![
        [c64::new(1.0, 0.0), c64::new(0.0, 0.0)],
        [c64::new(0.0, 0.0), c64::new(-1.0, 0.0)]
    ]
}

/// Single-site operator `op` at `site` of an `n`-qubit register.
pub fn site_operator(op: &Array2<c64>, site: usize, n: usize) -> Array2<c64> {
    let mut out = if site == 0 { op.clone() } else { identity(2) };
    for s in 1..n {
        let factor = if s == site { op.clone() } else { identity(2) };
        out = kron(&out, &factor);
    }
    out
}

/// Hamiltonian presets exposed through the configuration schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    SingleQubitZ,
    TfimChain,
    RandomHermitian,
}

/// Coupling-operator families; all are Hermitian, unit operator norm, and
/// closed under adjoint as sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingSet {
    /// `{+-X_j, +-Y_j, +-Z_j}` on every site.
    Paulis,
    /// `{+-(X_j+Z_j)/sqrt2, +-Y_j}`; tilts the jump directions so the
    /// effective Lamb shift does not commute with the Hamiltonian.
    TiltedXz,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PresetParams {
    /// Overall scale of the single-qubit Z Hamiltonian.
    pub scale: f64,
    /// Ising coupling of the transverse-field chain.
    pub j: f64,
    /// Transverse field of the chain.
    pub g: f64,
    /// Target operator norm of the random Hermitian preset.
    pub norm: f64,
}

impl Default for PresetParams {
    fn default() -> Self {
        Self { scale: 1.0, j: 1.0, g: 0.5, norm: 1.0 }
    }
}

/// A Hamiltonian with cached eigendecomposition and its coupling set.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub n_qubits: usize,
    hamiltonian: Array2<c64>,
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<c64>,
    couplings: Vec<Array2<c64>>,
}

impl SystemModel {
    /// Wrap an explicit Hamiltonian and coupling list. Couplings are
    /// normalized to unit operator norm; the set must be closed under
    /// adjoint (all families here are Hermitian, which suffices).
    pub fn from_parts(
        n_qubits: usize,
        hamiltonian: Array2<c64>,
        couplings: Vec<Array2<c64>>,
    ) -> Result<Self> {
        let d = 1usize << n_qubits;
        if hamiltonian.nrows() != d || hamiltonian.ncols() != d {
            return Err(GdlError::Structural(format!(
                "hamiltonian must be {d}x{d} for {n_qubits} qubits"
            )));
        }
        HermitianOperator::new(hamiltonian.clone())?;
        let (eigenvalues, eigenvectors) = eigh_unitary(&hamiltonian)?;
        let mut normed = Vec::with_capacity(couplings.len());
        for a in couplings {
            HermitianOperator::new(a.clone())?;
            let nrm = op_norm(&a);
            if nrm <= 0.0 {
                return Err(GdlError::Structural("zero coupling operator".into()));
            }
            normed.push(a.mapv(|z| z / nrm));
        }
        if normed.is_empty() {
            return Err(GdlError::Structural("coupling set is empty".into()));
        }
        Ok(Self { n_qubits, hamiltonian, eigenvalues, eigenvectors, couplings: normed })
    }

    pub fn hamiltonian(&self) -> &Array2<c64> {
        &self.hamiltonian
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    /// Unitary whose columns are the eigenvectors, same order as `eigenvalues`.
    pub fn eigenvectors(&self) -> &Array2<c64> {
        &self.eigenvectors
    }

    pub fn couplings(&self) -> &[Array2<c64>] {
        &self.couplings
    }

    pub fn spectral_range(&self) -> f64 {
        let lo = self.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    /// Rotate an operator into the eigenbasis: `U^dag A U`.
    pub fn to_eigenbasis(&self, a: &Array2<c64>) -> Array2<c64> {
        dag(&self.eigenvectors).dot(a).dot(&self.eigenvectors)
    }

    /// Rotate an operator back from the eigenbasis: `U A U^dag`.
    pub fn from_eigenbasis(&self, a: &Array2<c64>) -> Array2<c64> {
        self.eigenvectors.dot(a).dot(&dag(&self.eigenvectors))
    }

    /// `e^{-iHt} A e^{iHt}` phases applied in the eigenbasis of H, for an
    /// operator already expressed in the eigenbasis.
    pub fn phase_conjugate_eigenbasis(&self, a_eig: &Array2<c64>, t: f64) -> Array2<c64> {
        let d = self.dim();
        let mut out = Array2::zeros((d, d));
        for j in 0..d {
            for k in 0..d {
                let phase = c64::from_polar(1.0, -t * (self.eigenvalues[j] - self.eigenvalues[k]));
                out[[j, k]] = phase * a_eig[[j, k]];
            }
        }
        out
    }
}

pub fn coupling_set(kind: CouplingSet, n: usize) -> Vec<Array2<c64>> {
    let mut out = Vec::new();
    match kind {
        CouplingSet::Paulis => {
            for p in [pauli_x(), pauli_y(), pauli_z()] {
                for site in 0..n {
                    let a = site_operator(&p, site, n);
                    out.push(a.clone());
                    out.push(a.mapv(|z| -z));
                }
            }
        }
        CouplingSet::TiltedXz => {
            let tilt = (&pauli_x() + &pauli_z()).mapv(|z| z / 2f64.sqrt());
            for p in [tilt, pauli_y()] {
                for site in 0..n {
                    let a = site_operator(&p, site, n);
                    out.push(a.clone());
                    out.push(a.mapv(|z| -z));
                }
            }
        }
    }
    out
}

/// Build a preset system. Deterministic for a given seed.
pub fn build_system(
    preset: Preset,
    n_qubits: usize,
    params: &PresetParams,
    couplings: CouplingSet,
    seed: u64,
) -> Result<SystemModel> {
    if n_qubits == 0 || n_qubits > 6 {
        return Err(GdlError::Capacity(format!(
            "n_qubits must lie in [1, 6], got {n_qubits}"
        )));
    }
    let h = match preset {
        Preset::SingleQubitZ => {
            if n_qubits != 1 {
                return Err(GdlError::Parameter("single_qubit_z requires n_qubits = 1".into()));
            }
            pauli_z().mapv(|z| z * params.scale)
        }
        Preset::TfimChain => {
            let n = n_qubits;
            let d = 1usize << n;
            let mut h = Array2::<c64>::zeros((d, d));
            for i in 0..n.saturating_sub(1) {
                let zz = site_operator(&pauli_z(), i, n).dot(&site_operator(&pauli_z(), i + 1, n));
                h = h - zz.mapv(|z| z * params.j);
            }
            for i in 0..n {
                h = h - site_operator(&pauli_x(), i, n).mapv(|z| z * params.g);
            }
            h
        }
        Preset::RandomHermitian => {
            let d = 1usize << n_qubits;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = Array2::from_shape_fn((d, d), |_| {
                c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let h = (&g + &dag(&g)).mapv(|z| z * 0.5);
            let nrm = op_norm(&h);
            h.mapv(|z| z * (params.norm / nrm))
        }
    };
    SystemModel::from_parts(n_qubits, h, coupling_set(couplings, n_qubits))
}

/// `rho_beta = e^{-beta H} / Tr e^{-beta H}`, overflow-safe via min-eigenvalue shift.
pub fn gibbs_state(h: &HermitianOperator, beta: f64) -> Result<DensityMatrix> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(GdlError::Parameter(format!("beta must be finite and >= 0, got {beta}")));
    }
    let (vals, vecs) = eigh_unitary(h.entries())?;
    gibbs_from_eigen(&vals, &vecs, beta)
}

pub fn gibbs_from_eigen(
    vals: &Array1<f64>,
    vecs: &Array2<c64>,
    beta: f64,
) -> Result<DensityMatrix> {
    let d = vals.len();
    let emin = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut w = Array1::<f64>::zeros(d);
    let mut zsum = 0.0;
    for i in 0..d {
        w[i] = (-beta * (vals[i] - emin)).exp();
        zsum += w[i];
    }
    let mut rho = Array2::zeros((d, d));
    for j in 0..d {
        for k in 0..d {
            let mut acc = c64::new(0.0, 0.0);
            for m in 0..d {
                acc += vecs[[j, m]] * (w[m] / zsum) * vecs[[k, m]].conj();
            }
            rho[[j, k]] = acc;
        }
    }
    DensityMatrix::new(rho)
}

/// Gibbs weights `p_i = e^{-beta lam_i}/Z` for eigenvalues in the given order.
pub fn gibbs_weights(vals: &Array1<f64>, beta: f64) -> Array1<f64> {
    let emin = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut w = vals.mapv(|v| (-beta * (v - emin)).exp());
    let z = w.sum();
    w.mapv_inplace(|x| x / z);
    w
}

/// Bohr-frequency decomposition of an operator: blocks `M_nu` labelled by
/// clustered eigenvalue differences `nu = lam_row - lam_col`, so that
/// `e^{iHt} M_nu e^{-iHt} = e^{i nu t} M_nu`.
#[derive(Debug, Clone)]
pub struct BohrDecomposition {
    pub frequencies: Vec<f64>,
    pub blocks: Vec<Array2<c64>>,
}

impl BohrDecomposition {
    pub fn reconstruct(&self) -> Array2<c64> {
        let d = self.blocks[0].nrows();
        let mut out = Array2::zeros((d, d));
        for b in &self.blocks {
            out = out + b;
        }
        out
    }
}

/// Default clustering tolerance: 1e-9 of the spectral range (or 1e-9 for a
/// fully degenerate spectrum).
pub fn default_gap_tol(system: &SystemModel) -> f64 {
    let r = system.spectral_range();
    if r > 0.0 {
        1e-9 * r
    } else {
        1e-9
    }
}

/// Cluster the Bohr frequencies of `m` with tolerance `gap_tol` and project
/// onto the blocks. Blocks are returned in the original basis.
pub fn bohr_project(system: &SystemModel, m: &Array2<c64>, gap_tol: f64) -> Result<BohrDecomposition> {
    if gap_tol <= 0.0 {
        return Err(GdlError::Parameter("gap_tol must be positive".into()));
    }
    let d = system.dim();
    let lam = system.eigenvalues();
    let me = system.to_eigenbasis(m);
    // collect and cluster all pair frequencies
    let mut raw: Vec<(f64, usize, usize)> = Vec::with_capacity(d * d);
    for j in 0..d {
        for k in 0..d {
            raw.push((lam[j] - lam[k], j, k));
        }
    }
    raw.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut freqs: Vec<f64> = Vec::new();
    let mut blocks_eig: Vec<Array2<c64>> = Vec::new();
    let mut cluster: Vec<(f64, usize, usize)> = Vec::new();
    let flush = |cluster: &mut Vec<(f64, usize, usize)>,
                     freqs: &mut Vec<f64>,
                     blocks: &mut Vec<Array2<c64>>| {
        if cluster.is_empty() {
            return;
        }
        let mean = cluster.iter().map(|c| c.0).sum::<f64>() / cluster.len() as f64;
        let mut blk = Array2::zeros((d, d));
        for &(_, j, k) in cluster.iter() {
            blk[[j, k]] = me[[j, k]];
        }
        freqs.push(mean);
        blocks.push(blk);
        cluster.clear();
    };
    for entry in raw {
        if let Some(last) = cluster.last() {
            if entry.0 - last.0 >= gap_tol {
                flush(&mut cluster, &mut freqs, &mut blocks_eig);
            }
        }
        cluster.push(entry);
    }
    flush(&mut cluster, &mut freqs, &mut blocks_eig);
    let blocks = blocks_eig.iter().map(|b| system.from_eigenbasis(b)).collect();
    Ok(BohrDecomposition { frequencies: freqs, blocks })
}

/// Heisenberg evolution `A(t) = e^{iHt} A e^{-iHt}` in the cached eigenbasis.
pub fn heisenberg(a: &Array2<c64>, system: &SystemModel, t: f64) -> Array2<c64> {
    let ae = system.to_eigenbasis(a);
    let d = system.dim();
    let lam = system.eigenvalues();
    let mut out = Array2::zeros((d, d));
    for j in 0..d {
        for k in 0..d {
            out[[j, k]] = c64::from_polar(1.0, t * (lam[j] - lam[k])) * ae[[j, k]];
        }
    }
    system.from_eigenbasis(&out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_qubit_z_preset() {
        let m = build_system(Preset::SingleQubitZ, 1, &PresetParams::default(), CouplingSet::Paulis, 0)
            .unwrap();
        assert!(max_abs(&(m.hamiltonian() - &pauli_z())) < 1e-15);
        let mut sorted: Vec<f64> = m.eigenvalues().to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_abs_diff_eq!(sorted[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sorted[1], 1.0, epsilon = 1e-14);
        // spectrum {1, -1} as a set
        assert_eq!(m.couplings().len(), 6);
    }

    #[test]
    fn tfim_two_site_matches_kronecker_oracle() {
        let params = PresetParams { j: 1.0, g: 0.5, ..Default::default() };
        let m = build_system(Preset::TfimChain, 2, &params, CouplingSet::Paulis, 0).unwrap();
        // direct tensor assembly oracle
        let zz = kron(&pauli_z(), &pauli_z());
        let xi = kron(&pauli_x(), &identity(2));
        let ix = kron(&identity(2), &pauli_x());
        let oracle = zz.mapv(|z| z * -1.0) + (xi + ix).mapv(|z| z * -0.5);
        assert!(max_abs(&(m.hamiltonian() - &oracle)) < 1e-14);
    }

    #[test]
    fn random_hermitian_is_deterministic() {
        let p = PresetParams::default();
        let a = build_system(Preset::RandomHermitian, 2, &p, CouplingSet::Paulis, 7).unwrap();
        let b = build_system(Preset::RandomHermitian, 2, &p, CouplingSet::Paulis, 7).unwrap();
        assert!(max_abs(&(a.hamiltonian() - b.hamiltonian())) == 0.0);
        assert_abs_diff_eq!(op_norm(a.hamiltonian()), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn oversize_register_rejected() {
        let p = PresetParams::default();
        assert!(matches!(
            build_system(Preset::RandomHermitian, 7, &p, CouplingSet::Paulis, 0),
            Err(GdlError::Capacity(_))
        ));
    }

    #[test]
    fn gibbs_infinite_temperature_and_zero_hamiltonian() {
        let h = HermitianOperator::new(pauli_z()).unwrap();
        let rho = gibbs_state(&h, 0.0).unwrap();
        assert!(max_abs(&(rho.entries() - &identity(2).mapv(|z| z * 0.5))) < 1e-14);
        let h0 = HermitianOperator::new(Array2::zeros((4, 4))).unwrap();
        let rho0 = gibbs_state(&h0, 2.7).unwrap();
        assert!(max_abs(&(rho0.entries() - &identity(4).mapv(|z| z * 0.25))) < 1e-14);
    }

    #[test]
    fn gibbs_single_qubit_matches_scalar_oracle() {
        let h = HermitianOperator::new(pauli_z()).unwrap();
        let rho = gibbs_state(&h, 1.0).unwrap();
        let z = 1f64.exp() + (-1f64).exp();
        assert_abs_diff_eq!(rho.entries()[[0, 0]].re, (-1f64).exp() / z, epsilon = 1e-14);
        assert_abs_diff_eq!(rho.entries()[[1, 1]].re, 1f64.exp() / z, epsilon = 1e-14);
        // commutes with H
        let comm = h.entries().dot(rho.entries()) - rho.entries().dot(h.entries());
        assert!(max_abs(&comm) < 1e-11);
    }

    #[test]
    fn gibbs_minimizes_free_energy() {
        use rand::{Rng, SeedableRng};
        // free-energy inequality against random perturbed states
        let p = PresetParams::default();
        let sys = build_system(Preset::TfimChain, 2, &p, CouplingSet::Paulis, 0).unwrap();
        let beta = 1.3;
        let h = HermitianOperator::new(sys.hamiltonian().clone()).unwrap();
        let rho = gibbs_state(&h, beta).unwrap();
        let free_energy = |r: &Array2<c64>| -> f64 {
            let (vals, _) = r.eigh(UPLO::Lower).unwrap();
            let entropy: f64 = vals
                .iter()
                .map(|&pv: &f64| if pv > 1e-300 { -pv * pv.ln() } else { 0.0 })
                .sum();
            let energy: c64 = r.dot(sys.hamiltonian()).diag().sum();
            energy.re - entropy / beta
        };
        let f_gibbs = free_energy(rho.entries());
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..100 {
            let g = Array2::from_shape_fn((4, 4), |_| {
                c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let tau = g.dot(&dag(&g));
            let tr: c64 = tau.diag().sum();
            let tau = tau.mapv(|z| z / tr.re);
            let eps = 0.3 * rng.gen::<f64>();
            let mixed = rho.entries().mapv(|z| z * (1.0 - eps)) + tau.mapv(|z| z * eps);
            assert!(free_energy(&mixed) >= f_gibbs - 1e-10);
        }
    }

    #[test]
    fn bohr_project_two_level() {
        // H = diag(0, 1): frequencies {-1, 0, 1}
        let h = array![
            [c64::new(0.0, 0.0), c64::new(0.0, 0.0)],
            [c64::new(0.0, 0.0), c64::new(1.0, 0.0)]
        ];
        let sys = SystemModel::from_parts(1, h, vec![pauli_x()]).unwrap();
        let m = array![
            [c64::new(1.0, 0.0), c64::new(2.0, 0.0)],
            [c64::new(3.0, 0.0), c64::new(4.0, 0.0)]
        ];
        let dec = bohr_project(&sys, &m, 1e-9).unwrap();
        assert_eq!(dec.frequencies.len(), 3);
        assert!(max_abs(&(&dec.reconstruct() - &m)) < 1e-12);
        // nu = lam_row - lam_col in the eigenbasis ordering (0, 1)
        for (nu, blk) in dec.frequencies.iter().zip(&dec.blocks) {
            if (*nu - 1.0).abs() < 1e-9 {
                assert_abs_diff_eq!(blk[[1, 0]].re, 3.0, epsilon = 1e-12);
            }
            if (*nu + 1.0).abs() < 1e-9 {
                assert_abs_diff_eq!(blk[[0, 1]].re, 2.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn bohr_project_degenerate_is_single_block() {
        let sys = SystemModel::from_parts(1, identity(2), vec![pauli_x()]).unwrap();
        let m = pauli_y();
        let dec = bohr_project(&sys, &m, 1e-9).unwrap();
        assert_eq!(dec.frequencies.len(), 1);
        assert_abs_diff_eq!(dec.frequencies[0], 0.0, epsilon = 1e-15);
        assert!(max_abs(&(&dec.blocks[0] - &m)) < 1e-14);
    }

    #[test]
    fn bohr_blocks_satisfy_phase_covariance() {
        use rand::{Rng, SeedableRng};
        let p = PresetParams::default();
        let sys = build_system(Preset::RandomHermitian, 2, &p, CouplingSet::Paulis, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Array2::from_shape_fn((4, 4), |_| {
            c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let dec = bohr_project(&sys, &g, default_gap_tol(&sys)).unwrap();
        assert!(max_abs(&(&dec.reconstruct() - &g)) < 1e-12);
        for &t in &[0.3, 1.7] {
            for (nu, blk) in dec.frequencies.iter().zip(&dec.blocks) {
                let evolved = heisenberg(blk, &sys, t);
                let phased = blk.mapv(|z| z * c64::from_polar(1.0, nu * t));
                assert!(max_abs(&(&evolved - &phased)) < 1e-10);
            }
        }
    }

    #[test]
    fn heisenberg_basics() {
        let p = PresetParams::default();
        let sys = build_system(Preset::TfimChain, 2, &p, CouplingSet::Paulis, 0).unwrap();
        let a = site_operator(&pauli_y(), 0, 2);
        assert!(max_abs(&(&heisenberg(&a, &sys, 0.0) - &a)) < 1e-14);
        // commuting observable is invariant
        let hcopy = sys.hamiltonian().clone();
        assert!(max_abs(&(&heisenberg(&hcopy, &sys, 2.3) - &hcopy)) < 1e-12);
    }

    #[test]
    fn heisenberg_sigma_plus_phase_oracle() {
        // H = Z, A = |0><1| = sigma^+: A(t) = e^{2it} A
        let sys = SystemModel::from_parts(1, pauli_z(), vec![pauli_x()]).unwrap();
        let mut a = Array2::<c64>::zeros((2, 2));
        a[[0, 1]] = c64::new(1.0, 0.0);
        let t = 0.37;
        let evolved = heisenberg(&a, &sys, t);
        let expected = a.mapv(|z| z * c64::from_polar(1.0, 2.0 * t));
        assert!(max_abs(&(&evolved - &expected)) < 1e-13);
    }

    #[test]
    fn heisenberg_composes_as_group() {
        let p = PresetParams::default();
        let sys = build_system(Preset::RandomHermitian, 2, &p, CouplingSet::Paulis, 3).unwrap();
        let a = site_operator(&pauli_x(), 1, 2);
        let (s, t) = (0.6, 1.1);
        let once = heisenberg(&a, &sys, s + t);
        let twice = heisenberg(&heisenberg(&a, &sys, s), &sys, t);
        assert!(max_abs(&(&once - &twice)) < 1e-11);
    }

    #[test]
    fn couplings_have_unit_norm() {
        for kind in [CouplingSet::Paulis, CouplingSet::TiltedXz] {
            let p = PresetParams::default();
            let sys = build_system(Preset::TfimChain, 2, &p, kind, 0).unwrap();
            for a in sys.couplings() {
                assert_abs_diff_eq!(op_norm(a), 1.0, epsilon = 1e-12);
            }
        }
    }
}
