//! Security thresholds: the largest thermal noise `ω` for which a bound
//! stays positive.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bounds::{coherent_info, lower_bound, OptimizerOptions};
use crate::channels::ChannelSpec;
use crate::error::{Error, Result};
use crate::optimize::{bisect_sign_change, linear_grid};

const SCAN_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdFamily {
    LossVsEta,
    AmpVsG,
}

impl ThresholdFamily {
    pub fn spec(self, scan_param: f64, omega: f64) -> Result<ChannelSpec> {
        match self {
            ThresholdFamily::LossVsEta => ChannelSpec::thermal_loss(scan_param, omega),
            ThresholdFamily::AmpVsG => ChannelSpec::thermal_amp(scan_param, omega),
        }
    }

    pub fn scan_name(self) -> &'static str {
        match self {
            ThresholdFamily::LossVsEta => "eta",
            ThresholdFamily::AmpVsG => "g",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ThresholdFamily::LossVsEta => "loss_vs_eta",
            ThresholdFamily::AmpVsG => "amp_vs_g",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdQuery {
    pub family: ThresholdFamily,
    pub scan_param: f64,
    pub omega_bracket: (f64, f64),
    pub tol: f64,
}

impl ThresholdQuery {
    pub fn new(family: ThresholdFamily, scan_param: f64) -> Self {
        ThresholdQuery {
            family,
            scan_param,
            omega_bracket: (1.0, 200.0),
            tol: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.omega_bracket;
        if !(lo >= 1.0 && hi > lo && hi.is_finite()) {
            return Err(Error::InvalidOptions(format!(
                "omega bracket ({lo}, {hi}) must satisfy 1 <= low < high"
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidOptions(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        self.family.spec(self.scan_param, lo).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdDiagnostic {
    /// The bound is not positive even at the low end of the bracket.
    NoSecurity,
    /// The bound is still positive at the high end of the bracket.
    AboveBracket,
}

impl fmt::Display for ThresholdDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdDiagnostic::NoSecurity => "no_security",
            ThresholdDiagnostic::AboveBracket => "above_bracket",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub omega_th: f64,
    /// Final bisection bracket; the bound is positive at the low end and
    /// non-positive at the high end.
    pub bracket: (f64, f64),
    pub diagnostic: Option<ThresholdDiagnostic>,
}

/// Threshold of `𝓛ᴳ`, maximizing over γ at every evaluated `ω`.
pub fn security_threshold(q: &ThresholdQuery, opts: &OptimizerOptions) -> Result<Threshold> {
    q.validate()?;
    opts.validate()?;
    let bound = |omega: f64| -> Result<f64> {
        Ok(lower_bound(&q.family.spec(q.scan_param, omega)?, opts)?.lower_bound)
    };
    let (lo, hi) = q.omega_bracket;
    let scan = linear_grid(lo, hi, SCAN_POINTS);
    let values = scan.iter().map(|&w| bound(w)).collect::<Result<Vec<_>>>()?;

    if values[0] <= 0.0 {
        return Ok(Threshold {
            omega_th: lo,
            bracket: (lo, lo),
            diagnostic: Some(ThresholdDiagnostic::NoSecurity),
        });
    }
    let sign_changes = values
        .windows(2)
        .filter(|w| (w[0] > 0.0) != (w[1] > 0.0))
        .count();
    if sign_changes > 1 {
        return Err(Error::NonMonotoneScan { sign_changes });
    }
    let Some(k) = values.iter().position(|&v| v <= 0.0) else {
        return Ok(Threshold {
            omega_th: hi,
            bracket: (hi, hi),
            diagnostic: Some(ThresholdDiagnostic::AboveBracket),
        });
    };
    let bracket = bisect_sign_change(bound, scan[k - 1], scan[k], q.tol)?;
    Ok(Threshold {
        omega_th: 0.5 * (bracket.0 + bracket.1),
        bracket,
        diagnostic: None,
    })
}

/// Noise `ω` at which the (reverse) coherent information vanishes.
pub fn threshold_of_info(family: ThresholdFamily, scan_param: f64) -> Result<f64> {
    let info =
        |omega: f64| -> Result<f64> { Ok(coherent_info(&family.spec(scan_param, omega)?)?.0) };
    if info(1.0)? <= 0.0 {
        return Ok(1.0);
    }
    let mut hi = 2.0;
    while info(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::domain(
                family.scan_name(),
                scan_param,
                "threshold beyond 1e15",
            ));
        }
    }
    let (a, b) = bisect_sign_change(info, 1.0, hi, 1e-13 * hi)?;
    Ok(0.5 * (a + b))
}
