//! Self-check suites run by `gkb verify`.

use std::fmt;

use serde::Serialize;

use crate::bounds::{
    delta_of_gamma, finite_mu_delta, maximize_delta, reconciliation, OptimizerOptions,
};
use crate::channels::{
    apply_channel, build_joint_state, cloner_symplectic, dilate, eve_omega_for_zeta,
    integer_symplectic_residual, ChannelSpec, Mode, UNIVERSAL_CLONER,
};
use crate::error::Result;
use crate::optimize::log_grid;
use crate::symplectic::{gaussian_entropy, CovarianceMatrix, MeasurementSpec, SymplecticForm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub mu: f64,
    /// Agreement tolerance, in bits, between closed forms and the finite-μ
    /// propagation.
    pub tolerance: f64,
    pub theta_tolerance: f64,
    pub r_step: f64,
    pub r_slope_tolerance: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            mu: 1e6,
            tolerance: 1e-4,
            theta_tolerance: 1e-9,
            r_step: 1e-4,
            r_slope_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub tolerance: Option<f64>,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub error: Option<String>,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{}: {status}", self.name)?;
        if let Some(tol) = self.tolerance {
            write!(f, " @ {tol:e}")?;
        }
        match &self.error {
            Some(e) => write!(f, " ({e})"),
            None => write!(f, " (worst {:.3e})", self.worst),
        }
    }
}

fn outcome(
    name: impl Into<String>,
    worst: f64,
    tolerance: Option<f64>,
    passed: bool,
) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        passed,
        tolerance,
        worst,
        error: None,
    }
}

fn failed(name: impl Into<String>, e: impl fmt::Display) -> CheckOutcome {
    CheckOutcome {
        error: Some(e.to_string()),
        ..outcome(name, f64::NAN, None, false)
    }
}

/// Five parameter points per family, spanning the valid domains.
pub fn oracle_parameter_points() -> Vec<ChannelSpec> {
    let mut v = Vec::new();
    for (eta, omega) in [(0.1, 1.0), (0.3, 1.5), (0.5, 2.0), (0.7, 3.0), (0.9, 5.0)] {
        v.push(ChannelSpec::ThermalLoss { eta, omega });
    }
    for (g, omega) in [(1.1, 1.0), (1.5, 1.5), (2.0, 2.0), (3.0, 3.0), (5.0, 5.0)] {
        v.push(ChannelSpec::ThermalAmp { g, omega });
    }
    for zeta in [0.05, 0.2, 0.38, 1.0, 3.0] {
        v.push(ChannelSpec::AddedNoise { zeta });
    }
    v
}

/// Ten parameter points per family whose optimal γ is interior, where the
/// measurement optimum can be probed in the squeezing direction.
pub fn stationarity_parameter_points() -> Vec<ChannelSpec> {
    let mut v = Vec::new();
    for (eta, omega) in [
        (0.3, 1.2),
        (0.45, 1.5),
        (0.5, 1.5),
        (0.55, 1.5),
        (0.6, 2.0),
        (0.65, 2.0),
        (0.75, 3.0),
        (0.8, 3.0),
        (0.85, 5.0),
        (0.9, 8.0),
    ] {
        v.push(ChannelSpec::ThermalLoss { eta, omega });
    }
    for (g, omega) in [
        (1.1, 8.0),
        (1.2, 4.0),
        (1.3, 3.0),
        (1.5, 2.0),
        (1.7, 2.0),
        (2.0, 1.5),
        (2.5, 1.3),
        (3.0, 1.2),
        (3.0, 1.3),
        (5.0, 1.1),
    ] {
        v.push(ChannelSpec::ThermalAmp { g, omega });
    }
    for k in 0..10 {
        v.push(ChannelSpec::AddedNoise {
            zeta: 0.30 + 0.01 * k as f64,
        });
    }
    v
}

pub fn oracle_gammas() -> Vec<f64> {
    log_grid(1.0, 1e3, 5)
}

fn oracle_measurement(
    spec: &ChannelSpec,
    gamma: f64,
    r: f64,
    theta: f64,
) -> Result<MeasurementSpec> {
    MeasurementSpec::new(gamma, r, theta, reconciliation(spec).measured())
}

pub fn check_universal_cloner() -> CheckOutcome {
    let r = integer_symplectic_residual(&UNIVERSAL_CLONER);
    outcome("L_UC symplectic", r as f64, None, r == 0)
}

pub fn check_cloner_symplecticity() -> CheckOutcome {
    let name = "cloner symplecticity";
    let mut worst: f64 = 0.0;
    for k in 1..=20 {
        let t = k as f64 / 21.0;
        for spec in [
            ChannelSpec::ThermalLoss { eta: t, omega: 1.0 },
            ChannelSpec::ThermalAmp {
                g: 1.0 + 10.0 * t,
                omega: 1.0,
            },
        ] {
            match cloner_symplectic(&spec) {
                Ok(c) => worst = worst.max(SymplecticForm::new(2).residual(&c.matrix)),
                Err(e) => return failed(name, e),
            }
        }
    }
    outcome(name, worst, Some(1e-12), worst < 1e-12)
}

pub fn check_cloner_locality() -> CheckOutcome {
    let name = "universal cloner locality";
    let run = || -> Result<f64> {
        let mut worst: f64 = 0.0;
        for zeta in [0.1, 0.38, 1.7, 4.0] {
            let spec = ChannelSpec::AddedNoise { zeta };
            eve_omega_for_zeta(zeta)?;
            for nu in [1.0, 3.0, 40.0] {
                let input = CovarianceMatrix::thermal(nu)?;
                let out = dilate(&spec, &input)?.marginal(&[Mode::B])?;
                let expected = apply_channel(&spec, &input)?;
                worst = worst.max((out.matrix() - expected.matrix()).amax());
            }
        }
        Ok(worst)
    };
    match run() {
        Ok(w) => outcome(name, w, Some(1e-12), w < 1e-12),
        Err(e) => failed(name, e),
    }
}

pub fn check_oracle_agreement(cfg: &VerifyConfig) -> CheckOutcome {
    let specs = oracle_parameter_points();
    let gammas = oracle_gammas();
    let name = format!(
        "oracle agreement ({} grid points)",
        specs.len() * gammas.len()
    );
    let run = || -> Result<f64> {
        let mut worst: f64 = 0.0;
        for spec in &specs {
            for &g in &gammas {
                let closed = delta_of_gamma(spec, g)?;
                let oracle =
                    finite_mu_delta(spec, &oracle_measurement(spec, g, 0.0, 0.0)?, cfg.mu)?;
                worst = worst.max((closed - oracle).abs());
            }
        }
        Ok(worst)
    };
    match run() {
        Ok(w) => outcome(name, w, Some(cfg.tolerance), w < cfg.tolerance),
        Err(e) => failed(name, e),
    }
}

fn stationarity_gammas() -> Result<Vec<(ChannelSpec, f64)>> {
    let opts = OptimizerOptions::default();
    stationarity_parameter_points()
        .into_iter()
        .map(|s| Ok((s, maximize_delta(&s, &opts)?.gamma_star)))
        .collect()
}

pub fn check_theta_invariance(cfg: &VerifyConfig) -> CheckOutcome {
    let name = "theta invariance";
    let run = || -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (spec, g) in stationarity_gammas()? {
            let base = finite_mu_delta(&spec, &oracle_measurement(&spec, g, 0.3, 0.0)?, cfg.mu)?;
            for theta in [0.3, 0.7, 2.1] {
                let v = finite_mu_delta(&spec, &oracle_measurement(&spec, g, 0.3, theta)?, cfg.mu)?;
                worst = worst.max((v - base).abs());
            }
        }
        Ok(worst)
    };
    match run() {
        Ok(w) => outcome(name, w, Some(cfg.theta_tolerance), w < cfg.theta_tolerance),
        Err(e) => failed(name, e),
    }
}

/// Central first and second differences of δ in `r` at `r = 0`.
pub fn r_differences(spec: &ChannelSpec, gamma: f64, mu: f64, step: f64) -> Result<(f64, f64)> {
    let at = |r: f64| -> Result<f64> {
        finite_mu_delta(spec, &oracle_measurement(spec, gamma, r, 0.0)?, mu)
    };
    let (p, z, m) = (at(step)?, at(0.0)?, at(-step)?);
    Ok(((p - m) / (2.0 * step), p - 2.0 * z + m))
}

pub fn check_r_stationarity(cfg: &VerifyConfig) -> CheckOutcome {
    let name = "r stationarity";
    let run = || -> Result<(f64, bool)> {
        let mut worst: f64 = 0.0;
        let mut concave = true;
        for (spec, g) in stationarity_gammas()? {
            let (d1, d2) = r_differences(&spec, g, cfg.mu, cfg.r_step)?;
            worst = worst.max(d1.abs());
            concave &= d2 < 0.0;
        }
        Ok((worst, concave))
    };
    match run() {
        Ok((w, concave)) => outcome(
            name,
            w,
            Some(cfg.r_slope_tolerance),
            w < cfg.r_slope_tolerance && concave,
        ),
        Err(e) => failed(name, e),
    }
}

/// Purity of the dilated state. Run at moderate μ: the full 8 × 8 matrix at
/// `μ ~ 10⁶` has condition number near 10¹³, beyond what a direct
/// symplectic spectrum can resolve to 10⁻⁶.
pub fn check_purity() -> CheckOutcome {
    let name = "joint state purity";
    let run = || -> Result<f64> {
        let mut worst: f64 = 0.0;
        for spec in oracle_parameter_points() {
            for mu in [10.0, 1e3] {
                let state = build_joint_state(&spec, mu)?;
                for l in state.cm.symplectic_eigenvalues()? {
                    worst = worst.max((l - 1.0).abs());
                }
                let ab = gaussian_entropy(&state.marginal(&[Mode::A, Mode::B])?)?;
                let eve = gaussian_entropy(&state.marginal(&[Mode::E, Mode::Ancilla])?)?;
                worst = worst.max((ab - eve).abs());
            }
        }
        Ok(worst)
    };
    match run() {
        Ok(w) => outcome(name, w, Some(1e-6), w < 1e-6),
        Err(e) => failed(name, e),
    }
}

pub fn run_all(cfg: &VerifyConfig) -> Vec<CheckOutcome> {
    vec![
        check_universal_cloner(),
        check_cloner_symplecticity(),
        check_cloner_locality(),
        check_oracle_agreement(cfg),
        check_theta_invariance(cfg),
        check_r_stationarity(cfg),
        check_purity(),
    ]
}
