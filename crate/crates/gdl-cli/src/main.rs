//! `gdl`: build KMS-detailed-balance generators from system-bath models,
//! verify their identities, and run the scaling experiments.

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use gdl_core::bath::BathConfig;
use gdl_core::error::GdlError;
use gdl_core::experiments::{
    bias_scan, channel_for, fixed_point, mixing_estimate, step_error_scan,
};
use gdl_core::kms::{lamb_defect, mixing_time_bound, similarity_transform, spectral_gap};
use gdl_core::lindblad::{
    apply_to_state, assemble_generator, gamma_identity_defect, kms_defect, reconstruction_defect,
    spectral_densities,
};
use gdl_core::model::{build_system, gibbs_state, SystemModel};
use gdl_core::operators::{max_abs, op_norm, schatten1, DensityMatrix, HermitianOperator};
use gdl_core::timedist::{nu_hat0, TimeDistribution};

use config::{load_config, RunConfig};
use report::{write_report, RunReport};

#[derive(Parser)]
#[command(name = "gdl", version, about = "thermalization channel laboratory")]
struct Cli {
    /// Path to a JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for report.json, series CSVs, and manifest.json.
    #[arg(long, global = true, default_value = "gdl-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Check the detailed-balance identities of the assembled generator.
    Verify,
    /// Assemble the generator and report its derived quantities.
    BuildGenerator,
    /// Fixed point of the configured channel and its bias from the Gibbs state.
    FixedPoint,
    /// Fixed-point bias across the alpha grid with a slope fit.
    ScanBias,
    /// Gibbs-commutation defect of the Lamb shift across the sigma grid.
    ScanSigma,
    /// One-step exact-vs-composed trace-norm error across the alpha grid.
    ScanStepError,
    /// Measured integer mixing time against the spectral-gap bound.
    Mixing,
    /// Summarize an existing report directory.
    Report,
}

impl Command {
    fn kind_name(&self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::BuildGenerator => "build-generator",
            Command::FixedPoint => "fixed-point",
            Command::ScanBias => "scan-bias",
            Command::ScanSigma => "scan-sigma",
            Command::ScanStepError => "scan-step-error",
            Command::Mixing => "mixing",
            Command::Report => "report",
        }
    }
}

fn emit_error(kind: &str, message: &str) {
    eprintln!(
        "{}",
        serde_json::json!({"error": {"kind": kind, "message": message}})
    );
}

fn exit_code_for(err: &GdlError) -> u8 {
    match err {
        GdlError::Structural(_) | GdlError::Parameter(_) | GdlError::Capacity(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    // single-threaded BLAS keeps reductions bit-stable; worker count is
    // capped by GDL_THREADS
    std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    if let Ok(n) = std::env::var("GDL_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global()
                .ok();
        }
    }
    let cli = Cli::parse();
    let config_text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                emit_error("io", &format!("cannot read config {}: {e}", path.display()));
                return ExitCode::from(2);
            }
        },
        None => "{}".to_string(),
    };
    let cfg = match load_config(&config_text) {
        Ok(c) => c,
        Err(e) => {
            emit_error("config", &e);
            return ExitCode::from(2);
        }
    };
    if let Some(kind) = &cfg.experiment.kind {
        if cli.command != Command::Report && kind != cli.command.kind_name() {
            emit_error(
                "config",
                &format!(
                    "experiment.kind = {kind:?} does not match subcommand {:?}",
                    cli.command.kind_name()
                ),
            );
            return ExitCode::from(2);
        }
    }
    let started = Instant::now();
    let result = match cli.command {
        Command::Verify => run_verify(&cfg),
        Command::BuildGenerator => run_build_generator(&cfg),
        Command::FixedPoint => run_fixed_point(&cfg),
        Command::ScanBias => run_scan_bias(&cfg),
        Command::ScanSigma => run_scan_sigma(&cfg),
        Command::ScanStepError => run_scan_step_error(&cfg),
        Command::Mixing => run_mixing(&cfg),
        Command::Report => {
            return match summarize_report(&cli.out) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    emit_error("io", &e);
                    ExitCode::from(2)
                }
            }
        }
    };
    match result {
        Ok(mut rep) => {
            rep.wall_time_secs = started.elapsed().as_secs_f64();
            if let Err(e) = write_report(&rep, &cfg, &cli.out) {
                emit_error("io", &format!("writing report to {}: {e}", cli.out.display()));
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            emit_error(error_kind(&e), &e.to_string());
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn error_kind(e: &GdlError) -> &'static str {
    match e {
        GdlError::Structural(_) => "structural",
        GdlError::Singularity(_) => "singularity",
        GdlError::Capacity(_) => "capacity",
        GdlError::Parameter(_) => "parameter",
        GdlError::Resolution(_) => "resolution",
        GdlError::Integration(_) => "integration",
        GdlError::Contract(_) => "contract",
        GdlError::NonPrimitive(_) => "non_primitive",
        GdlError::Timeout(_) => "timeout",
        GdlError::Backend(_) => "backend",
    }
}

struct Setup {
    system: SystemModel,
    bath: BathConfig,
    rho_beta: DensityMatrix,
}

fn setup(cfg: &RunConfig) -> Result<Setup, GdlError> {
    let system = build_system(
        cfg.system.preset,
        cfg.system.n_qubits,
        &cfg.system.params.to_params(),
        cfg.system.couplings,
        cfg.system.seed,
    )?;
    let bath = BathConfig::new(cfg.bath.variant, cfg.beta, cfg.sigma)?;
    let rho_beta = gibbs_state(
        &HermitianOperator::new(system.hamiltonian().clone())?,
        cfg.beta,
    )?;
    Ok(Setup { system, bath, rho_beta })
}

fn run_verify(cfg: &RunConfig) -> Result<RunReport, GdlError> {
    let s = setup(cfg)?;
    let mut rep = RunReport::default();
    let dens = spectral_densities(cfg.beta, cfg.sigma)?;
    let parts = assemble_generator(&s.system, cfg.beta, cfg.sigma, &cfg.quadrature_spec())?;
    let gamma_defect = gamma_identity_defect(&dens, 101);
    let defect = kms_defect(&parts.transition, &s.rho_beta)?;
    let stationarity = schatten1(&apply_to_state(&parts.l_kms, s.rho_beta.entries()));
    let recon = reconstruction_defect(&parts);
    let split = similarity_transform(&parts.l_kms, &s.rho_beta)?;
    let anti = max_abs(split.anti.matrix());
    let gap = spectral_gap(&parts.l_kms, &s.rho_beta)?;
    let dl = lamb_defect(&parts.h_lamb, &s.rho_beta)?;
    let mut trace_row = 0.0f64;
    {
        let d = s.system.dim();
        let lf = parts.l_full.matrix();
        let vi = gdl_core::operators::vec_op(&gdl_core::operators::identity(d));
        for col in 0..d * d {
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            for row in 0..d * d {
                acc += vi[row].conj() * lf[[row, col]];
            }
            trace_row = trace_row.max(acc.norm());
        }
    }
    let nu0 = nu_hat0(0.0);
    let mu = TimeDistribution::new(1.0)?;
    let (ts, ws) = mu.quadrature(cfg.time.n_t_nodes);
    let norm: f64 = ws.iter().sum();
    let mean: f64 = ts.iter().zip(&ws).map(|(t, w)| t * w).sum();
    println!("generator identities at beta={} sigma={}:", cfg.beta, cfg.sigma);
    println!("  gamma=g identity defect          {gamma_defect:12.3e}");
    println!("  KMS defect of transition         {defect:12.3e}");
    println!("  ||L_KMS(rho_beta)||_1            {stationarity:12.3e}");
    println!("  reconstruction defect            {recon:12.3e}");
    println!("  anti-Hermitian part              {anti:12.3e}");
    println!("  trace row of L_full              {trace_row:12.3e}");
    println!("  spectral gap                     {:12.6}", gap.gap);
    println!("  kernel dimension                 {:12}", gap.kernel_dim);
    println!("  delta_Lamb                       {dl:12.3e}");
    println!("  ||H_coh||                        {:12.6}", op_norm(&parts.h_coh));
    println!("  ||G_D||                          {:12.3e}", op_norm(&parts.g_d));
    println!(
        "  nu_hat0(0) - i/10                {:12.3e}",
        (nu0 - num_complex::Complex64::new(0.0, 0.1)).norm()
    );
    println!("  time-law norm defect             {:12.3e}", (norm - 1.0).abs());
    println!("  time-law mean defect             {:12.3e}", (mean - 5.0).abs());
    rep.scalar("gamma_identity_defect", gamma_defect);
    rep.scalar("kms_defect", defect);
    rep.scalar("stationarity_trace_norm", stationarity);
    rep.scalar("reconstruction_defect", recon);
    rep.scalar("anti_hermitian_part", anti);
    rep.scalar("trace_row_defect", trace_row);
    rep.scalar("gap", gap.gap);
    rep.count("kernel_dim", gap.kernel_dim as u64);
    rep.scalar("delta_lamb", dl);
    rep.scalar("h_coh_norm", op_norm(&parts.h_coh));
    rep.scalar("g_d_norm", op_norm(&parts.g_d));
    Ok(rep)
}

fn run_build_generator(cfg: &RunConfig) -> Result<RunReport, GdlError> {
    let s = setup(cfg)?;
    let mut rep = RunReport::default();
    let parts = assemble_generator(&s.system, cfg.beta, cfg.sigma, &cfg.quadrature_spec())?;
    let gap = spectral_gap(&parts.l_kms, &s.rho_beta)?;
    let dl = lamb_defect(&parts.h_lamb, &s.rho_beta)?;
    let alpha = cfg.alpha.first();
    let bound = mixing_time_bound(gap.gap, alpha, cfg.experiment.eps, &s.rho_beta)?;
    // the coarse spectral bound 2^n e^{beta ||H||} reported alongside
    let crude =
        (cfg.beta * op_norm(s.system.hamiltonian())).exp() * 2f64.powi(s.system.n_qubits as i32);
    println!("gap {:.8}", gap.gap);
    println!("kernel_dim {}", gap.kernel_dim);
    println!("delta_lamb {dl:.6e}");
    println!("h_lamb_norm {:.6e}", op_norm(&parts.h_lamb));
    println!("mixing_bound(alpha={alpha}, eps={}) {bound:.1}", cfg.experiment.eps);
    rep.scalar("gap", gap.gap);
    rep.count("kernel_dim", gap.kernel_dim as u64);
    rep.scalar("delta_lamb", dl);
    rep.scalar("h_coh_norm", op_norm(&parts.h_coh));
    rep.scalar("g_d_norm", op_norm(&parts.g_d));
    rep.scalar("h_lamb_norm", op_norm(&parts.h_lamb));
    rep.scalar("mixing_time_bound", bound);
    rep.scalar("crude_inverse_sqrt_bound", crude);
    rep.scalar("kms_defect", kms_defect(&parts.transition, &s.rho_beta)?);
    rep.scalar(
        "stationarity_trace_norm",
        schatten1(&apply_to_state(&parts.l_kms, s.rho_beta.entries())),
    );
    Ok(rep)
}

fn run_fixed_point(cfg: &RunConfig) -> Result<RunReport, GdlError> {
    let s = setup(cfg)?;
    let mut rep = RunReport::default();
    let alpha = cfg.alpha.first();
    let ch_cfg = cfg.channel_config(alpha).map_err(GdlError::Parameter)?;
    let sup = channel_for(
        cfg.experiment.source,
        &s.system,
        &s.bath,
        &ch_cfg,
        &cfg.quadrature_spec(),
    )?;
    let fp = fixed_point(&sup, 1e-8)?;
    let bias = schatten1(&(fp.state.entries() - s.rho_beta.entries()));
    println!("fixed point residual {:.3e}", fp.residual);
    println!("fixed space dim {}", fp.fixed_space_dim);
    println!("bias ||rho_fix - rho_beta||_1 {bias:.6e}");
    rep.scalar("residual", fp.residual);
    rep.count("fixed_space_dim", fp.fixed_space_dim as u64);
    rep.scalar("bias_trace_norm", bias);
    Ok(rep)
}

fn run_scan_bias(cfg: &RunConfig) -> Result<RunReport, GdlError> {
    let s = setup(cfg)?;
    let mut rep = RunReport::default();
    let alphas = cfg.alpha_grid_or_default();
    let base = cfg.channel_config(alphas[0]).map_err(GdlError::Parameter)?;
    let scan = bias_scan(
        &s.system,
        &s.bath,
        &base,
        &alphas,
        cfg.experiment.source,
        &s.rho_beta,
        &cfg.quadrature_spec(),
    )?;
    println!(
        "bias slope {:.4} (residual {:.4}, valid {})",
        scan.slope, scan.fit_residual, scan.slope_valid
    );
    for (a, b) in scan.grid.iter().zip(&scan.values) {
        println!("  alpha {a:.4}  bias {b:.6e}");
    }
    rep.scalar("slope", scan.slope);
    rep.scalar("fit_residual", scan.fit_residual);
    rep.add_series("bias", "alpha", scan.grid, scan.values);
    Ok(rep)
}

fn run_scan_sigma(cfg: &RunConfig) -> Result<RunReport, GdlError> {
    let s = setup(cfg)?;
    let mut rep = RunReport::default();
    let sigmas: Vec<f64> = cfg.experiment.sigma_grid.iter().map(|m| m * cfg.beta).collect();
    let mut defects = Vec::with_capacity(sigmas.len());
    for &sigma in &sigmas {
        let parts = assemble_generator(&s.system, cfg.beta, sigma, &cfg.quadrature_spec())?;
        defects.push(lamb_defect(&parts.h_lamb, &s.rho_beta)?);
    }
    let scan = gdl_core::experiments::ScanReport::from_data("sigma", sigmas, defects)?;
    println!(
        "delta_Lamb slope vs sigma {:.4} (residual {:.4}, valid {})",
        scan.slope, scan.fit_residual, scan.slope_valid
    );
    for (x, v) in scan.grid.iter().zip(&scan.values) {
        println!("  sigma {x:.3}  delta_Lamb {v:.6e}");
    }
    rep.scalar("slope", scan.slope);
    rep.scalar("fit_residual", scan.fit_residual);
    rep.add_series("delta_lamb", "sigma", scan.grid, scan.values);
    Ok(rep)
}

fn run_scan_step_error(cfg: &RunConfig) -> Result<RunReport, GdlError> {
    let s = setup(cfg)?;
    let mut rep = RunReport::default();
    let alphas = match &cfg.alpha {
        config::AlphaSpec::Grid(v) if v.len() >= 2 => v.clone(),
        _ => vec![0.08, 0.08 * 2f64.sqrt(), 0.16, 0.16 * 2f64.sqrt()],
    };
    let a_min = alphas.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_fixed = cfg.time.t.unwrap_or_else(|| step_error_default_t(a_min, cfg.beta, cfg.sigma));
    let base = cfg.channel_config(alphas[0]).map_err(GdlError::Parameter)?;
    let scan = step_error_scan(
        &s.system,
        &s.bath,
        &base,
        &alphas,
        t_fixed,
        &cfg.quadrature_spec(),
    )?;
    println!(
        "step-error slope {:.4} at T = {t_fixed:.3} (residual {:.4}, valid {})",
        scan.slope, scan.fit_residual, scan.slope_valid
    );
    for (a, v) in scan.grid.iter().zip(&scan.values) {
        println!("  alpha {a:.4}  step diff {v:.6e}");
    }
    rep.scalar("slope", scan.slope);
    rep.scalar("fit_residual", scan.fit_residual);
    rep.scalar("t_fixed", t_fixed);
    rep.add_series("step_error", "alpha", scan.grid, scan.values);
    Ok(rep)
}

/// Fixed interaction time making the window-truncation error negligible
/// against the quartic term across the scan.
fn step_error_default_t(alpha_min: f64, beta: f64, sigma: f64) -> f64 {
    let ls = sigma.ln().max(0.1);
    let target = 0.01 * alpha_min.powi(4) * beta * ls;
    2.0 * sigma * (1.0f64 / target).ln().max(1.0).sqrt()
}

fn run_mixing(cfg: &RunConfig) -> Result<RunReport, GdlError> {
    let s = setup(cfg)?;
    let mut rep = RunReport::default();
    let alpha = cfg.alpha.first();
    let parts = assemble_generator(&s.system, cfg.beta, cfg.sigma, &cfg.quadrature_spec())?;
    let gap = spectral_gap(&parts.l_kms, &s.rho_beta)?;
    let ch_cfg = cfg.channel_config(alpha).map_err(GdlError::Parameter)?;
    let sup = channel_for(
        cfg.experiment.source,
        &s.system,
        &s.bath,
        &ch_cfg,
        &cfg.quadrature_spec(),
    )?;
    let fp = fixed_point(&sup, 1e-8)?;
    let tau = mixing_estimate(&sup, cfg.experiment.eps, &fp.state)?;
    let bound = mixing_time_bound(gap.gap, alpha, cfg.experiment.eps, &s.rho_beta)?;
    println!("measured tau_mix({}) = {tau}", cfg.experiment.eps);
    println!("bound = {bound:.1}");
    rep.count("tau_mix", tau);
    rep.scalar("mixing_time_bound", bound);
    rep.scalar("gap", gap.gap);
    Ok(rep)
}

fn summarize_report(dir: &PathBuf) -> Result<(), String> {
    let path = dir.join("report.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format!("invalid report.json: {e}"))?;
    let results = value
        .get("results")
        .ok_or_else(|| "report.json has no results section".to_string())?;
    println!("report {}", path.display());
    if let Some(scalars) = results.get("scalars").and_then(|v| v.as_object()) {
        for (k, v) in scalars {
            println!("  {k:32} {v}");
        }
    }
    if let Some(counts) = results.get("counts").and_then(|v| v.as_object()) {
        for (k, v) in counts {
            println!("  {k:32} {v}");
        }
    }
    if let Some(series) = results.get("series").and_then(|v| v.as_object()) {
        for (k, v) in series {
            let n = v.get("grid").and_then(|g| g.as_array()).map(|a| a.len()).unwrap_or(0);
            println!("  series {k}: {n} points");
        }
    }
    Ok(())
}
