//! The lower bound `𝓛ᴳ = I + Δᴳ` and its ingredients.
//!
//! Two evaluation paths are provided. The closed forms give Eve's conditional
//! symplectic eigenvalues and the partner's conditional variance directly in
//! the `μ → ∞` limit. The finite-μ path builds the full four-mode state and
//! conditions it numerically; it is independent of every closed form and
//! serves as their oracle.

use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channels::{build_joint_state, joint_state_factor, ChannelSpec, Mode};
use crate::error::{Error, Result};
use crate::optimize::maximize_log_grid;
use crate::symplectic::{
    condition_factored, gaussian_entropy, thermal_entropy, MeasurementSpec, Target,
};
use crate::tolerance::TOL;

/// Reconciliation direction. In direct reconciliation Alice's mode `A` is
/// measured; in reverse reconciliation Bob's mode `B` is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Direct,
    Reverse,
}

impl Direction {
    pub fn measured(self) -> Target {
        match self {
            Direction::Direct => Target::A,
            Direction::Reverse => Target::B,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Direct => "direct",
            Direction::Reverse => "reverse",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Direction used for each channel family.
pub fn reconciliation(spec: &ChannelSpec) -> Direction {
    match spec {
        ChannelSpec::ThermalLoss { .. } => Direction::Reverse,
        ChannelSpec::ThermalAmp { .. } | ChannelSpec::AddedNoise { .. } => Direction::Direct,
    }
}

/// Selects between the validated closed forms and the expressions exactly as
/// typeset in the source derivation, which contain sign and factor slips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transcription {
    #[default]
    Corrected,
    PrintedVerbatim,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalPath {
    ClosedForm,
    FiniteMu(f64),
}

impl fmt::Display for EvalPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalPath::ClosedForm => f.write_str("closed_form"),
            EvalPath::FiniteMu(mu) => write!(f, "finite_mu({mu:e})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub gamma_max: f64,
    pub coarse_points: usize,
    pub refine_tol: f64,
    pub value_tol: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            gamma_max: 1e6,
            coarse_points: 200,
            refine_tol: 1e-10,
            value_tol: 1e-12,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_max > 1.0) || !self.gamma_max.is_finite() {
            return Err(Error::InvalidOptions(format!(
                "gamma_max must be finite and > 1, got {}",
                self.gamma_max
            )));
        }
        if self.coarse_points < 3 {
            return Err(Error::InvalidOptions(format!(
                "coarse_points must be >= 3, got {}",
                self.coarse_points
            )));
        }
        if !(self.refine_tol > 0.0) || !(self.value_tol >= 0.0) {
            return Err(Error::InvalidOptions(
                "refine_tol must be > 0 and value_tol >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    /// The maximizing γ is on the upper end of the search window.
    ArgmaxAtGammaMax { gamma_max: f64 },
}

impl Diagnostic {
    pub fn code(&self) -> &'static str {
        match self {
            Diagnostic::ArgmaxAtGammaMax { .. } => "argmax_at_gamma_max",
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub channel: ChannelSpec,
    pub direction: Direction,
    pub gamma_star: f64,
    pub delta_g: f64,
    pub info_term: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub path: EvalPath,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMax {
    pub delta_g: f64,
    pub gamma_star: f64,
    pub diagnostics: Vec<Diagnostic>,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma >= 1.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("gamma", gamma, "must be finite and >= 1"))
    }
}

/// Variance of the unmeasured partner mode after the measurement, in the
/// `μ → ∞` limit.
pub fn conditional_y_variance(spec: &ChannelSpec, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    spec.validate()?;
    Ok(match *spec {
        ChannelSpec::ThermalLoss { eta, omega } => (gamma + (1.0 - eta) * omega) / eta,
        ChannelSpec::ThermalAmp { g, omega } => g * gamma + (g - 1.0) * omega,
        ChannelSpec::AddedNoise { zeta } => 2.0 * zeta + gamma,
    })
}

/// Symplectic eigenvalues `(λ₊, λ₋)` of Eve's conditional state in the
/// `μ → ∞` limit.
pub fn eve_eigs_closed(spec: &ChannelSpec, gamma: f64) -> Result<(f64, f64)> {
    eve_eigs_closed_with(spec, gamma, Transcription::Corrected)
}

pub fn eve_eigs_closed_with(
    spec: &ChannelSpec,
    gamma: f64,
    transcription: Transcription,
) -> Result<(f64, f64)> {
    check_gamma(gamma)?;
    spec.eve_omega()?;
    let (plus, minus) = match transcription {
        Transcription::Corrected => corrected_eigs(spec, gamma)?,
        Transcription::PrintedVerbatim => printed_eigs(spec, gamma)?,
    };
    for lambda in [plus, minus] {
        if !(lambda >= 1.0 - TOL.physicality) {
            return Err(Error::Unphysical(format!(
                "{spec}: Eve eigenvalue {lambda} below 1 at gamma = {gamma}"
            )));
        }
    }
    Ok((plus, minus))
}

fn checked_sqrt(spec: &ChannelSpec, x: f64) -> Result<f64> {
    if x >= 0.0 {
        Ok(x.sqrt())
    } else {
        Err(Error::NegativeRadicand {
            channel: spec.to_string(),
            value: x,
        })
    }
}

// λ₋ is recovered from the determinant, λ₊λ₋ = √det V_E, which avoids the
// cancellation in A − √B at large γ.
fn corrected_eigs(spec: &ChannelSpec, gamma: f64) -> Result<(f64, f64)> {
    match *spec {
        ChannelSpec::ThermalLoss { eta, omega } => {
            let t = 1.0 - eta;
            let a = t * t * (gamma * gamma + omega * omega) + 2.0 * t * gamma * omega + 2.0 * eta;
            let d = gamma - omega;
            let s = gamma + omega;
            let b = t * t * s * s * (t * t * d * d + 4.0 * gamma * omega * t + 4.0 * eta);
            let plus = checked_sqrt(spec, a + checked_sqrt(spec, b)?)? / (2f64.sqrt() * eta);
            let root_det = (t * gamma * omega + 1.0) / eta;
            Ok((plus, root_det / plus))
        }
        ChannelSpec::ThermalAmp { g, omega } => {
            let u = g - 1.0;
            let a = u * u * (gamma * gamma + omega * omega) + 2.0 * g * u * gamma * omega + 2.0 * g;
            let s = gamma + omega;
            let b = u
                * u
                * s
                * s
                * (u * u * (gamma * gamma + omega * omega)
                    + 2.0 * (g * g - 1.0) * gamma * omega
                    + 4.0 * g);
            let plus = checked_sqrt(spec, 0.5 * (a + checked_sqrt(spec, b)?))?;
            let root_det = u * gamma * omega + g;
            Ok((plus, root_det / plus))
        }
        ChannelSpec::AddedNoise { zeta } => {
            let z = 2.0 * zeta;
            let root = (4.0 + z * z + 4.0 * z * gamma).sqrt();
            let plus = (1.0 + 0.5 * z * (z + 2.0 * gamma + root)).sqrt();
            Ok((plus, (1.0 + z * gamma) / plus))
        }
    }
}

fn printed_eigs(spec: &ChannelSpec, gamma: f64) -> Result<(f64, f64)> {
    let pm = |a: f64, b: f64, scale: f64| -> Result<(f64, f64)> {
        let rb = checked_sqrt(spec, b)?;
        Ok((
            checked_sqrt(spec, a + rb)? / scale,
            checked_sqrt(spec, a - rb)? / scale,
        ))
    };
    match *spec {
        ChannelSpec::ThermalLoss { eta, omega } => {
            let e1 = eta - 1.0;
            let a = e1 * e1 * (gamma - omega).powi(2) + 2.0 * eta;
            let b = e1
                * e1
                * (gamma + omega).powi(2)
                * (e1 * e1 * (gamma - omega).powi(2) - 4.0 * gamma * omega * e1 + 4.0 * eta);
            pm(a, b, 2f64.sqrt() * eta)
        }
        ChannelSpec::ThermalAmp { g, omega } => {
            let u = g - 1.0;
            let a = u * u * (gamma * gamma + 2.0 * g * gamma * omega + omega * omega) + 2.0 * g;
            let b = u
                * u
                * (gamma + omega).powi(2)
                * (gamma * gamma * u * u
                    + 2.0 * gamma * (g * g - 1.0) * omega
                    + u * u * omega * omega
                    + 4.0 * g);
            pm(a, b, 2f64.sqrt())
        }
        ChannelSpec::AddedNoise { zeta } => {
            let root = (4.0 + zeta * zeta + 4.0 * zeta * gamma).sqrt();
            Ok((
                checked_sqrt(spec, 1.0 + 0.5 * zeta * (zeta + 2.0 * gamma + root))?,
                checked_sqrt(spec, 1.0 + 0.5 * zeta * (zeta + 2.0 * gamma - root))?,
            ))
        }
    }
}

/// `δ(γ) = h(λ₊) + h(λ₋) − h(y)`, in bits.
pub fn delta_of_gamma(spec: &ChannelSpec, gamma: f64) -> Result<f64> {
    delta_of_gamma_with(spec, gamma, Transcription::Corrected)
}

pub fn delta_of_gamma_with(
    spec: &ChannelSpec,
    gamma: f64,
    transcription: Transcription,
) -> Result<f64> {
    let (plus, minus) = eve_eigs_closed_with(spec, gamma, transcription)?;
    let y = conditional_y_variance(spec, gamma)?;
    // A coherent-state projection leaves the remaining modes pure.
    if gamma == 1.0 && transcription == Transcription::Corrected {
        return Ok(0.0);
    }
    Ok(thermal_entropy(plus)? + thermal_entropy(minus)? - thermal_entropy(y)?)
}

/// `Δᴳ = max_γ δ(γ)` over `[1, gamma_max]` using the closed forms.
pub fn maximize_delta(spec: &ChannelSpec, opts: &OptimizerOptions) -> Result<DeltaMax> {
    spec.eve_omega()?;
    maximize_objective(|g| delta_of_gamma(spec, g), opts)
}

fn maximize_objective<F>(f: F, opts: &OptimizerOptions) -> Result<DeltaMax>
where
    F: FnMut(f64) -> Result<f64>,
{
    opts.validate()?;
    let m = maximize_log_grid(
        f,
        1.0,
        opts.gamma_max,
        opts.coarse_points,
        opts.refine_tol,
        opts.value_tol,
    )?;
    let diagnostics = if m.at_upper_boundary {
        vec![Diagnostic::ArgmaxAtGammaMax {
            gamma_max: opts.gamma_max,
        }]
    } else {
        vec![]
    };
    Ok(DeltaMax {
        delta_g: m.value,
        gamma_star: m.argmax,
        diagnostics,
    })
}

/// Coherent information (direct) or reverse coherent information (reverse)
/// of the channel, with the direction it refers to.
pub fn coherent_info(spec: &ChannelSpec) -> Result<(f64, Direction)> {
    coherent_info_with(spec, Transcription::Corrected)
}

pub fn coherent_info_with(
    spec: &ChannelSpec,
    transcription: Transcription,
) -> Result<(f64, Direction)> {
    spec.validate()?;
    let value = match *spec {
        ChannelSpec::ThermalLoss { eta, omega } => -(1.0 - eta).log2() - thermal_entropy(omega)?,
        ChannelSpec::ThermalAmp { g, omega } => {
            let sign = match transcription {
                Transcription::Corrected => 1.0,
                Transcription::PrintedVerbatim => -1.0,
            };
            sign * (g / (g - 1.0)).log2() - thermal_entropy(omega)?
        }
        ChannelSpec::AddedNoise { zeta } => -1.0 / LN_2 - zeta.log2(),
    };
    Ok((value, reconciliation(spec)))
}

/// Reference upper bound on the key capacity.
pub fn upper_bound(spec: &ChannelSpec) -> Result<f64> {
    upper_bound_with(spec, Transcription::Corrected)
}

pub fn upper_bound_with(spec: &ChannelSpec, transcription: Transcription) -> Result<f64> {
    spec.validate()?;
    let verbatim = transcription == Transcription::PrintedVerbatim;
    Ok(match *spec {
        ChannelSpec::ThermalLoss { eta, omega } => {
            let n = 0.5 * (omega - 1.0);
            let h = thermal_entropy(omega)?;
            if verbatim {
                -n * (1.0 - eta).log2() - h
            } else {
                -(1.0 - eta).log2() - n * eta.log2() - h
            }
        }
        ChannelSpec::ThermalAmp { g, omega } => {
            let n = 0.5 * (omega - 1.0);
            let h = thermal_entropy(omega)?;
            if verbatim {
                -(n * g.log2() - (g - 1.0).log2()) - h
            } else {
                (n + 1.0) * g.log2() - (g - 1.0).log2() - h
            }
        }
        ChannelSpec::AddedNoise { zeta } => (zeta - 1.0) / LN_2 - zeta.log2(),
    })
}

/// `𝓛ᴳ` on the closed-form path.
pub fn lower_bound(spec: &ChannelSpec, opts: &OptimizerOptions) -> Result<BoundResult> {
    lower_bound_via(spec, opts, EvalPath::ClosedForm)
}

/// `𝓛ᴳ` on the chosen path. On the finite-μ path both the information term
/// and every δ evaluation come from the propagated covariance matrix.
pub fn lower_bound_via(
    spec: &ChannelSpec,
    opts: &OptimizerOptions,
    path: EvalPath,
) -> Result<BoundResult> {
    spec.eve_omega()?;
    let direction = reconciliation(spec);
    let (info_term, max) = match path {
        EvalPath::ClosedForm => (coherent_info(spec)?.0, maximize_delta(spec, opts)?),
        EvalPath::FiniteMu(mu) => {
            let target = direction.measured();
            let max = maximize_objective(
                |g| finite_mu_delta(spec, &MeasurementSpec::thermal(g, target)?, mu),
                opts,
            )?;
            (finite_mu_coherent_info(spec, direction, mu)?, max)
        }
    };
    Ok(BoundResult {
        channel: *spec,
        direction,
        gamma_star: max.gamma_star,
        delta_g: max.delta_g,
        info_term,
        lower_bound: info_term + max.delta_g,
        upper_bound: upper_bound(spec)?,
        path,
        diagnostics: max.diagnostics,
    })
}

/// Conditional covariance matrices after measuring `m.target` on the
/// finite-μ joint state.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMuConditionals {
    pub eve: crate::symplectic::CovarianceMatrix,
    pub partner: crate::symplectic::CovarianceMatrix,
}

fn mode_of(target: Target) -> Mode {
    match target {
        Target::A => Mode::A,
        Target::B => Mode::B,
    }
}

pub fn finite_mu_conditionals(
    spec: &ChannelSpec,
    m: &MeasurementSpec,
    mu: f64,
) -> Result<FiniteMuConditionals> {
    let (labels, g) = joint_state_factor(spec, mu)?;
    let index = |mode: Mode| {
        labels
            .iter()
            .position(|&l| l == mode)
            .expect("joint state labels")
    };
    let x = index(mode_of(m.target));
    let y = index(mode_of(m.target.other()));
    let eve = [index(Mode::E), index(Mode::Ancilla)];
    let w0 = m.seed_factor();
    Ok(FiniteMuConditionals {
        eve: condition_factored(&g, &eve, x, &w0)?,
        partner: condition_factored(&g, &[y], x, &w0)?,
    })
}

/// `S(E|X) − S(Y|X)` on the finite-μ joint state, for any single-mode
/// Gaussian measurement of the mode `m.target`.
pub fn finite_mu_delta(spec: &ChannelSpec, m: &MeasurementSpec, mu: f64) -> Result<f64> {
    let c = finite_mu_conditionals(spec, m, mu)?;
    Ok(gaussian_entropy(&c.eve)? - gaussian_entropy(&c.partner)?)
}

/// `S(Y) − S(AB)` on the finite-μ state, where `Y` is the mode that is not
/// measured in `direction`.
pub fn finite_mu_coherent_info(spec: &ChannelSpec, direction: Direction, mu: f64) -> Result<f64> {
    let state = build_joint_state(spec, mu)?;
    let partner = mode_of(direction.measured().other());
    Ok(gaussian_entropy(&state.marginal(&[partner])?)?
        - gaussian_entropy(&state.marginal(&[Mode::A, Mode::B])?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::log_grid;
    use proptest::prelude::*;

    fn loss(eta: f64, omega: f64) -> ChannelSpec {
        ChannelSpec::thermal_loss(eta, omega).unwrap()
    }
    fn amp(g: f64, omega: f64) -> ChannelSpec {
        ChannelSpec::thermal_amp(g, omega).unwrap()
    }
    fn noise(zeta: f64) -> ChannelSpec {
        ChannelSpec::added_noise(zeta).unwrap()
    }

    fn oracle_delta(spec: &ChannelSpec, gamma: f64, mu: f64) -> f64 {
        let t = reconciliation(spec).measured();
        finite_mu_delta(spec, &MeasurementSpec::thermal(gamma, t).unwrap(), mu).unwrap()
    }

    #[test]
    fn conditional_variance_examples() {
        assert!((conditional_y_variance(&loss(0.6, 3.0), 2.0).unwrap() - 16.0 / 3.0).abs() < 1e-12);
        assert!((conditional_y_variance(&amp(2.0, 3.0), 1.0).unwrap() - 5.0).abs() < 1e-12);
        assert!((conditional_y_variance(&noise(0.38), 1.0).unwrap() - 1.76).abs() < 1e-12);
        assert!(conditional_y_variance(&noise(0.38), 0.5).is_err());
    }

    #[test]
    fn conditional_variance_matches_oracle() {
        for (spec, g) in [
            (loss(0.6, 3.0), 2.0),
            (amp(2.0, 3.0), 1.0),
            (noise(0.38), 4.0),
        ] {
            let t = reconciliation(&spec).measured();
            let m = MeasurementSpec::thermal(g, t).unwrap();
            let c = finite_mu_conditionals(&spec, &m, 1e6).unwrap();
            let closed = conditional_y_variance(&spec, g).unwrap();
            assert!(
                (c.partner.get(0, 0) - closed).abs() < 1e-4 * closed,
                "{spec}"
            );
            assert!(
                (c.partner.get(1, 1) - closed).abs() < 1e-4 * closed,
                "{spec}"
            );
        }
    }

    #[test]
    fn eve_eigs_match_oracle() {
        let cases = [
            (noise(0.38), 1.0),
            (loss(0.3, 1.0), 3.0),
            (loss(0.9, 1.0), 1.0),
            (amp(2.0, 3.0), 1.0),
            (loss(0.6, 3.0), 20.0),
        ];
        for (spec, g) in cases {
            let t = reconciliation(&spec).measured();
            let m = MeasurementSpec::thermal(g, t).unwrap();
            let c = finite_mu_conditionals(&spec, &m, 1e6).unwrap();
            let eig = c.eve.symplectic_eigenvalues().unwrap();
            let (p, q) = eve_eigs_closed(&spec, g).unwrap();
            assert!((eig[0] - p).abs() < 1e-4 * p, "{spec} {eig:?} {p}");
            assert!((eig[1] - q).abs() < 1e-4 * q, "{spec} {eig:?} {q}");
        }
    }

    #[test]
    fn added_noise_eigs_example() {
        // 2ζ = 0.76 enters wherever the typeset expression has ζ.
        let (p, q) = eve_eigs_closed(&noise(0.38), 1.0).unwrap();
        let z: f64 = 0.76;
        let root = (4.0 + z * z + 4.0 * z).sqrt();
        assert!((p - (1.0 + 0.5 * z * (z + 2.0 + root)).sqrt()).abs() < 1e-12);
        assert!((q - (1.0 + 0.5 * z * (z + 2.0 - root)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn printed_forms_differ_from_oracle() {
        assert!(matches!(
            eve_eigs_closed_with(&loss(0.6, 3.0), 1.0, Transcription::PrintedVerbatim),
            Err(Error::NegativeRadicand { .. }) | Err(Error::Unphysical(_))
        ));
        let (p, _) =
            eve_eigs_closed_with(&noise(0.38), 1.0, Transcription::PrintedVerbatim).unwrap();
        assert!((p - 1.38).abs() < 0.01);
        let (q, _) = eve_eigs_closed(&noise(0.38), 1.0).unwrap();
        assert!((q - p).abs() > 0.3);
    }

    #[test]
    fn delta_near_trivial_noise_is_finite() {
        let d = delta_of_gamma(&loss(0.99, 1.0001), 1.0).unwrap();
        assert!(d.is_finite() && d.abs() < 0.1);
    }

    #[test]
    fn delta_is_stable_at_large_gamma() {
        for spec in [loss(0.6, 3.0), amp(2.0, 3.0), noise(0.38)] {
            let (i, _) = coherent_info(&spec).unwrap();
            let d = delta_of_gamma(&spec, 1e6).unwrap();
            assert!((d + i).abs() < 1e-3, "{spec}: {d} vs {}", -i);
        }
    }

    #[test]
    fn coherent_info_examples() {
        assert_eq!(
            coherent_info(&loss(0.5, 1.0)).unwrap(),
            (1.0, Direction::Reverse)
        );
        let (c, d) = coherent_info(&noise(1.0)).unwrap();
        assert!((c + 1.0 / LN_2).abs() < 1e-12);
        assert_eq!(d, Direction::Direct);
        assert!((coherent_info(&amp(2.0, 1.0)).unwrap().0 - 1.0).abs() < 1e-12);
        let printed = coherent_info_with(&amp(2.0, 1.0), Transcription::PrintedVerbatim).unwrap();
        assert!((printed.0 + 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_info_matches_oracle() {
        for spec in [loss(0.5, 1.0), noise(1.0), amp(2.0, 3.0), loss(0.8, 3.0)] {
            let (i, dir) = coherent_info(&spec).unwrap();
            let o = finite_mu_coherent_info(&spec, dir, 1e6).unwrap();
            assert!((i - o).abs() < 1e-3, "{spec}: {i} vs {o}");
        }
    }

    #[test]
    fn upper_bound_examples() {
        assert!(upper_bound(&noise(1.0)).unwrap().abs() < 1e-15);
        for eta in [0.1, 0.5, 0.9] {
            let u = upper_bound(&loss(eta, 1.0)).unwrap();
            assert!((u + (1.0 - eta).log2()).abs() < 1e-12);
            assert_eq!(
                upper_bound_with(&loss(eta, 1.0), Transcription::PrintedVerbatim).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn optimizer_matches_dense_scan() {
        let spec = loss(0.6, 3.0);
        let opts = OptimizerOptions::default();
        let m = maximize_delta(&spec, &opts).unwrap();
        let dense = log_grid(1.0, opts.gamma_max, 100_000)
            .into_iter()
            .map(|g| delta_of_gamma(&spec, g).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((m.delta_g - dense).abs() < 1e-6);
        assert!(m.delta_g >= dense - 1e-12);
        assert!(m.delta_g >= delta_of_gamma(&spec, 1.0).unwrap() - 1e-12);
    }

    #[test]
    fn optimizer_is_stable_under_refinement() {
        let opts = OptimizerOptions::default();
        let fine = OptimizerOptions {
            coarse_points: 2 * opts.coarse_points,
            ..opts
        };
        for spec in [loss(0.75, 3.0), amp(1.7, 2.0), noise(0.38), loss(0.2, 3.0)] {
            let a = maximize_delta(&spec, &opts).unwrap();
            let b = maximize_delta(&spec, &fine).unwrap();
            assert!(b.delta_g - a.delta_g <= 1e-9, "{spec}");
        }
    }

    #[test]
    fn lower_bound_examples() {
        let opts = OptimizerOptions::default();
        let r = lower_bound(&loss(0.6, 3.0), &opts).unwrap();
        assert_eq!(r.lower_bound, r.info_term + r.delta_g);
        assert!(r.lower_bound >= r.info_term - 1e-12);
        assert_eq!(r.direction, Direction::Reverse);

        let r = lower_bound(&noise(0.38), &opts).unwrap();
        assert!(r.info_term < 0.0 && r.lower_bound > 0.0, "{r:?}");
        assert!(r.delta_g > 1.0 / LN_2 + 0.38f64.log2());
        assert!(r.diagnostics.is_empty());

        let r = lower_bound(&amp(2.0, 3.0), &opts).unwrap();
        assert!(r.lower_bound <= r.upper_bound);
        assert_eq!(r.direction, Direction::Direct);
    }

    #[test]
    fn boundary_argmax_is_flagged() {
        let r = lower_bound(&loss(0.2, 3.0), &OptimizerOptions::default()).unwrap();
        assert!(r.info_term < 0.0);
        assert_eq!(
            r.diagnostics,
            vec![Diagnostic::ArgmaxAtGammaMax { gamma_max: 1e6 }]
        );
    }

    #[test]
    fn finite_mu_path_tracks_closed_form() {
        let opts = OptimizerOptions {
            gamma_max: 1e2,
            coarse_points: 40,
            ..OptimizerOptions::default()
        };
        let spec = noise(0.38);
        let a = lower_bound(&spec, &opts).unwrap();
        let b = lower_bound_via(&spec, &opts, EvalPath::FiniteMu(1e6)).unwrap();
        assert!((a.lower_bound - b.lower_bound).abs() < 1e-3, "{a:?} {b:?}");
        assert!((a.gamma_star - b.gamma_star).abs() < 0.1);
    }

    #[test]
    fn theta_invariance_and_r_stationarity() {
        let spec = loss(0.6, 2.0);
        let gamma = maximize_delta(&spec, &OptimizerOptions::default())
            .unwrap()
            .gamma_star;
        let at = |r: f64, theta: f64| {
            finite_mu_delta(
                &spec,
                &MeasurementSpec::new(gamma, r, theta, Target::B).unwrap(),
                1e6,
            )
            .unwrap()
        };
        for theta in [0.3, 0.7, 2.1] {
            assert!((at(0.2, theta) - at(0.2, 0.0)).abs() < 1e-9);
        }
        let h = 1e-4;
        let (p, z, m) = (at(h, 0.0), at(0.0, 0.0), at(-h, 0.0));
        assert!(((p - m) / (2.0 * h)).abs() < 1e-6);
        assert!(p - 2.0 * z + m < 0.0);
    }

    #[test]
    fn added_noise_direction_symmetry() {
        let both = |zeta: f64, g: f64, mu: f64| {
            let spec = noise(zeta);
            let a = finite_mu_delta(&spec, &MeasurementSpec::thermal(g, Target::A).unwrap(), mu)
                .unwrap();
            let b = finite_mu_delta(&spec, &MeasurementSpec::thermal(g, Target::B).unwrap(), mu)
                .unwrap();
            a - b
        };
        for zeta in [0.36, 0.38, 0.40] {
            for g in [1.0, 1.5, 2.0] {
                let d = both(zeta, g, 1e6);
                assert!(d.abs() < 1e-6, "{zeta} {g}: {d}");
            }
        }
        // Away from that range the gap is the O(1/μ) truncation and vanishes
        // in the limit.
        for (zeta, g) in [(1.0, 5.0), (3.0, 50.0)] {
            let (d4, d5) = (both(zeta, g, 1e4), both(zeta, g, 1e5));
            assert!((d4 / d5 - 10.0).abs() < 0.1, "{zeta} {g}: {d4} {d5}");
        }
    }

    #[test]
    fn rejects_invalid_options_and_domains() {
        let bad = OptimizerOptions {
            gamma_max: 1.0,
            ..OptimizerOptions::default()
        };
        assert!(lower_bound(&noise(0.38), &bad).is_err());
        let wide = ChannelSpec::AddedNoise { zeta: 5.0 };
        assert!(matches!(
            lower_bound(&wide, &OptimizerOptions::default()),
            Err(Error::Domain { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn closed_form_agrees_with_oracle(
            family in 0usize..3,
            p in 0.05f64..0.95,
            w in 1.0f64..6.0,
            lg in 0.0f64..2.0,
        ) {
            let spec = match family {
                0 => loss(p, w),
                1 => amp(1.0 + 4.0 * p, w),
                _ => noise(0.05 + 3.9 * p),
            };
            let g = 10f64.powf(lg);
            let closed = delta_of_gamma(&spec, g).unwrap();
            prop_assert!((closed - oracle_delta(&spec, g, 1e6)).abs() < 1e-4);
        }

        #[test]
        fn eve_eigenvalues_are_physical(
            family in 0usize..3,
            p in 0.01f64..0.99,
            w in 1.0f64..50.0,
            lg in 0.0f64..6.0,
        ) {
            let spec = match family {
                0 => loss(p, w),
                1 => amp(1.0 + 10.0 * p, w),
                _ => noise(0.01 + 3.98 * p),
            };
            let (a, b) = eve_eigs_closed(&spec, 10f64.powf(lg)).unwrap();
            prop_assert!(a >= b && b >= 1.0 - 1e-9);
        }

        #[test]
        fn lower_bound_is_sum_of_terms(eta in 0.05f64..0.95, w in 1.0f64..5.0) {
            let opts = OptimizerOptions { coarse_points: 30, ..OptimizerOptions::default() };
            let r = lower_bound(&loss(eta, w), &opts).unwrap();
            prop_assert_eq!(r.lower_bound, r.info_term + r.delta_g);
            prop_assert!(r.delta_g >= delta_of_gamma(&r.channel, 1.0).unwrap() - 1e-12);
        }
    }
}
