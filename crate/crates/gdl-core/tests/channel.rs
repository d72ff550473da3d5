//! Channel-level integration: exact bath channel against the composed
//! generator route, contraction in the weighted metric, mixing transfer
//! between nearby channels, and the fixed-point correction machinery.

use gdl_core::bath::{
    channel_superop, composed_channel, default_channel_config, BathConfig, BathVariant,
    ChannelConfig, TimeLaw,
};
use gdl_core::experiments::{
    fixed_point, mixing_estimate, t0_schedule, ChannelSource,
};
use gdl_core::kms::{d_beta_distance, lamb_defect, mixing_time_bound, spectral_gap};
use gdl_core::lindblad::{assemble_generator, QuadratureSpec};
use gdl_core::model::{build_system, gibbs_state, CouplingSet, Preset, PresetParams, SystemModel};
use gdl_core::operators::{
    apply_superop, dag, expm, schatten1, DensityMatrix, HermitianOperator, SuperOperator,
};
use gdl_core::timedist::{correction_operators, delta_of_t, delta_residual, TimeDistribution};
use ndarray::prelude::*;
use num_complex::Complex64 as c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tilted_system() -> SystemModel {
    let params = PresetParams { scale: 0.25, ..Default::default() };
    build_system(Preset::SingleQubitZ, 1, &params, CouplingSet::TiltedXz, 0).unwrap()
}

fn gibbs_of(system: &SystemModel, beta: f64) -> DensityMatrix {
    gibbs_state(&HermitianOperator::new(system.hamiltonian().clone()).unwrap(), beta).unwrap()
}

#[test]
fn exact_channel_close_to_composed_at_fixed_time() {
    let sys = tilted_system();
    let beta = 1.0;
    let sigma = 2.0;
    let bath = BathConfig::new(BathVariant::FrequencySampled, beta, sigma).unwrap();
    let parts = assemble_generator(&sys, beta, sigma, &QuadratureSpec::default()).unwrap();
    let alpha = 0.1;
    let t = 14.0;
    let cfg = ChannelConfig {
        steps_per_unit_time: 128,
        ..default_channel_config(alpha, TimeLaw::Fixed { t })
    };
    let s_exact = channel_superop(&sys, &bath, &cfg).unwrap();
    let s_comp = composed_channel(&sys, &parts.l_full, alpha, &[t], &[1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = Array2::from_shape_fn((2, 2), |_| {
        c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let psd = g.dot(&dag(&g));
    let tr: c64 = psd.diag().sum();
    let rho = psd.mapv(|z| z / tr.re);
    let d_exact = apply_superop(&s_exact, &rho).unwrap();
    let d_comp = apply_superop(&s_comp, &rho).unwrap();
    let diff = schatten1(&(&d_exact - &d_comp));
    // fourth-order agreement: measured ~7e-4 at alpha = 0.1... times margin
    assert!(diff < 3.0 * alpha.powi(4), "one-step difference {diff}");
}

#[test]
fn composed_fixed_point_bias_scales_with_alpha_squared() {
    let sys = tilted_system();
    let beta = 1.0;
    let sigma = 2.0;
    let parts = assemble_generator(&sys, beta, sigma, &QuadratureSpec::default()).unwrap();
    let rho_b = gibbs_of(&sys, beta);
    let mu_nodes = 1200usize;
    let mut biases = Vec::new();
    for &alpha in &[0.04f64, 0.08] {
        let t0 = t0_schedule(alpha, beta, sigma).unwrap();
        let mu = TimeDistribution::new(t0).unwrap();
        let (ts, ws) = mu.quadrature(mu_nodes);
        let s = composed_channel(&sys, &parts.l_full, alpha, &ts, &ws).unwrap();
        let fp = fixed_point(&s, 1e-8).unwrap();
        biases.push(schatten1(&(fp.state.entries() - rho_b.entries())));
    }
    let ratio = biases[1] / biases[0];
    assert!((ratio - 4.0).abs() < 0.5, "bias ratio {ratio} for alpha doubling");
}

#[test]
fn cancellation_of_averaged_delta() {
    let sys = tilted_system();
    let beta = 1.0;
    let sigma = 2.0;
    let parts = assemble_generator(&sys, beta, sigma, &QuadratureSpec::default()).unwrap();
    let t0 = 10.0;
    let corr = correction_operators(&parts.h_lamb, &sys, beta, t0, 0.1, 1e-9).unwrap();
    let mu = TimeDistribution::new(t0).unwrap();
    let resid = delta_residual(&corr.e, &parts.h_lamb, &sys, beta, &mu, 1600);
    assert!(gdl_core::operators::max_abs(&resid) <= 1e-8);
    // deterministic time: no cancellation
    let fixed = delta_of_t(&corr.e, &parts.h_lamb, &sys, beta, t0);
    assert!(gdl_core::operators::max_abs(&fixed) > 1e-3);
}

#[test]
fn rho_star_is_near_fixed_point_of_exact_channel() {
    let sys = tilted_system();
    let beta = 1.0;
    let sigma = 2.0;
    let bath = BathConfig::new(BathVariant::FrequencySampled, beta, sigma).unwrap();
    let parts = assemble_generator(&sys, beta, sigma, &QuadratureSpec::default()).unwrap();
    let rho_b = gibbs_of(&sys, beta);
    let mut ratios = Vec::new();
    for &alpha in &[0.04f64, 0.08] {
        let t0 = t0_schedule(alpha, beta, sigma).unwrap();
        let corr = correction_operators(&parts.h_lamb, &sys, beta, t0, alpha, 1e-9).unwrap();
        let cfg = ChannelConfig {
            steps_per_unit_time: 48,
            n_t_nodes: 600,
            ..default_channel_config(alpha, TimeLaw::RandomMu { t0 })
        };
        let s = channel_superop(&sys, &bath, &cfg).unwrap();
        let moved = apply_superop(&s, &corr.rho_star).unwrap();
        let r = schatten1(&(&moved - &corr.rho_star));
        ratios.push(r / alpha.powi(4));
        // rho* stays close to the Gibbs state at the alpha^2/T0 scale
        let dist = schatten1(&(&corr.rho_star - rho_b.entries()));
        assert!(dist <= 0.1 * alpha * alpha / t0, "||rho*-rho_beta||_1 = {dist}");
    }
    let spread = ratios[1].max(ratios[0]) / ratios[1].min(ratios[0]);
    assert!(spread < 3.0, "quartic residual constants {ratios:?}");
}

#[test]
fn telescoping_bound_on_iterated_channel() {
    let sys = tilted_system();
    let beta = 1.0;
    let sigma = 2.0;
    let parts = assemble_generator(&sys, beta, sigma, &QuadratureSpec::default()).unwrap();
    let alpha = 0.1;
    let t0 = t0_schedule(alpha, beta, sigma).unwrap();
    let corr = correction_operators(&parts.h_lamb, &sys, beta, t0, alpha, 1e-9).unwrap();
    let mu = TimeDistribution::new(t0).unwrap();
    let (ts, ws) = mu.quadrature(1200);
    let s = composed_channel(&sys, &parts.l_full, alpha, &ts, &ws).unwrap();
    let one = schatten1(&(&apply_superop(&s, &corr.rho_star).unwrap() - &corr.rho_star));
    let tau = 32usize;
    let mut iter = corr.rho_star.clone();
    for _ in 0..tau {
        iter = apply_superop(&s, &iter).unwrap();
    }
    let total = schatten1(&(&iter - &corr.rho_star));
    assert!(total <= tau as f64 * one * (1.0 + 1e-9), "telescoping violated: {total} vs {}", tau as f64 * one);
}

#[test]
fn contraction_under_perturbed_generator() {
    // with delta_Lamb <= gap/2, e^{alpha^2 L_full} contracts d_beta at rate
    // at least gap/2 on traceless directions
    let sys = tilted_system();
    let beta = 1.0;
    let sigma = 2.0;
    let parts = assemble_generator(&sys, beta, sigma, &QuadratureSpec::default()).unwrap();
    let rho_b = gibbs_of(&sys, beta);
    let rep = spectral_gap(&parts.l_kms, &rho_b).unwrap();
    let dl = lamb_defect(&parts.h_lamb, &rho_b).unwrap();
    assert!(dl <= rep.gap / 2.0, "instance fails the defect condition");
    let alpha = 0.1;
    let e = expm(&parts.l_full.matrix().mapv(|z| z * (alpha * alpha)));
    let s = SuperOperator::new(2, e).unwrap();
    let bound = (-rep.gap * alpha * alpha / 2.0).exp() * (1.0 + 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let g = Array2::from_shape_fn((2, 2), |_| {
            c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let mut x = (&g + &dag(&g)).mapv(|z| z * 0.5);
        let tr: c64 = x.diag().sum();
        for i in 0..2 {
            x[[i, i]] -= tr / 2.0;
        }
        let before = d_beta_distance(&x, &Array2::zeros((2, 2)), &rho_b).unwrap();
        let after =
            d_beta_distance(&apply_superop(&s, &x).unwrap(), &Array2::zeros((2, 2)), &rho_b)
                .unwrap();
        assert!(after <= bound * before, "contraction {} vs bound {bound}", after / before);
    }
}

#[test]
fn drift_commuting_with_gibbs_leaves_gap_unchanged() {
    // unitary-drift invariance: adding -i[B, .] with [B, rho] = 0 leaves the
    // Hermitian part of the similarity transform unchanged
    let sys = tilted_system();
    let beta = 1.0;
    let parts = assemble_generator(&sys, beta, 2.0, &QuadratureSpec::default()).unwrap();
    let rho_b = gibbs_of(&sys, beta);
    let rep = spectral_gap(&parts.l_kms, &rho_b).unwrap();
    let id = gdl_core::operators::identity(2);
    let b = sys.hamiltonian().mapv(|z| z * 0.8);
    let drift = (gdl_core::operators::conj_superop(&b, &id)
        - gdl_core::operators::conj_superop(&id, &b))
    .mapv(|z| z * c64::new(0.0, -1.0));
    let drifted = SuperOperator::new(2, parts.l_kms.matrix() + &drift).unwrap();
    let split = gdl_core::kms::similarity_transform(&drifted, &rho_b).unwrap();
    let rep2 = gdl_core::kms::gap_of_hermitian_part(&split, &rho_b).unwrap();
    assert!((rep.gap - rep2.gap).abs() < 1e-9);
}

#[test]
fn mixing_measured_against_bound_and_transfer() {
    let sys = tilted_system();
    let beta = 1.0;
    let sigma = 2.0;
    let bath = BathConfig::new(BathVariant::FrequencySampled, beta, sigma).unwrap();
    let parts = assemble_generator(&sys, beta, sigma, &QuadratureSpec::default()).unwrap();
    let rho_b = gibbs_of(&sys, beta);
    let rep = spectral_gap(&parts.l_kms, &rho_b).unwrap();
    let alpha = 0.04;
    let t0 = t0_schedule(alpha, beta, sigma).unwrap();
    let mu = TimeDistribution::new(t0).unwrap();
    let (ts, ws) = mu.quadrature(1200);
    let s_comp = composed_channel(&sys, &parts.l_full, alpha, &ts, &ws).unwrap();
    let eps = 0.05;
    let fp1 = fixed_point(&s_comp, 1e-8).unwrap();
    let tau1 = mixing_estimate(&s_comp, eps, &fp1.state).unwrap();
    let bound = mixing_time_bound(rep.gap, alpha, eps, &rho_b).unwrap();
    assert!((tau1 as f64) <= bound, "measured {tau1} vs bound {bound}");

    // transfer lemma: tau_2(2 eps) <= tau_1(eps/2) when the channels are close
    let cfg = ChannelConfig {
        steps_per_unit_time: 48,
        n_t_nodes: 600,
        ..default_channel_config(alpha, TimeLaw::RandomMu { t0 })
    };
    let s_exact = channel_superop(&sys, &bath, &cfg).unwrap();
    let tau_half = mixing_estimate(&s_comp, eps / 2.0, &fp1.state).unwrap();
    // ||Phi1 - Phi2||_{1->1} estimated on the probe states
    let probes = gdl_core::experiments::extremal_probe_states(2);
    let mut dist = 0.0f64;
    for p in &probes {
        let d1 = apply_superop(&s_comp, p).unwrap();
        let d2 = apply_superop(&s_exact, p).unwrap();
        dist = dist.max(schatten1(&(&d1 - &d2)));
    }
    if tau_half as f64 * dist <= eps / 2.0 {
        let fp2 = fixed_point(&s_exact, 1e-8).unwrap();
        let tau2 = mixing_estimate(&s_exact, 2.0 * eps, &fp2.state).unwrap();
        assert!(tau2 <= tau_half, "transfer violated: {tau2} > {tau_half}");
    } else {
        panic!("channels not close enough for the transfer premise: {}", tau_half as f64 * dist);
    }
}

#[test]
fn exact_channel_source_dispatch() {
    let sys = tilted_system();
    let bath = BathConfig::new(BathVariant::FrequencySampled, 1.0, 2.0).unwrap();
    let cfg = ChannelConfig {
        steps_per_unit_time: 48,
        n_t_nodes: 600,
        ..default_channel_config(0.1, TimeLaw::Fixed { t: 6.0 })
    };
    let quad = QuadratureSpec::default();
    let s1 =
        gdl_core::experiments::channel_for(ChannelSource::ExactBath, &sys, &bath, &cfg, &quad)
            .unwrap();
    let s2 = gdl_core::experiments::channel_for(
        ChannelSource::LindbladComposed,
        &sys,
        &bath,
        &cfg,
        &quad,
    )
    .unwrap();
    assert_eq!(s1.dim(), 2);
    assert_eq!(s2.dim(), 2);
    // both are trace preserving
    assert!(s1.trace_preservation_defect() < 1e-10);
    assert!(s2.trace_preservation_defect() < 1e-10);
}
