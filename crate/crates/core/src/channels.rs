//! Phase-insensitive Gaussian channels and the Stinespring dilations used to
//! model a collective attack.
//!
//! Thermal loss and amplification are dilated by an entanglement cloner: one
//! arm of Eve's TMSV enters a beam splitter (or two-mode squeezer) with the
//! signal, the other arm is kept. The added-noise channel is dilated by the
//! universal cloner, a three-mode interaction on `(e, E, B)`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symplectic::{embed, tmsv_cm, tmsv_factor, CovarianceMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "channel", rename_all = "snake_case")]
pub enum ChannelSpec {
    /// `V → ηV + (1−η)ω𝟙`.
    ThermalLoss { eta: f64, omega: f64 },
    /// `V → gV + (g−1)ω𝟙`.
    ThermalAmp { g: f64, omega: f64 },
    /// `V → V + 2ζ𝟙`.
    AddedNoise { zeta: f64 },
}

impl ChannelSpec {
    pub fn thermal_loss(eta: f64, omega: f64) -> Result<Self> {
        let spec = ChannelSpec::ThermalLoss { eta, omega };
        spec.validate()?;
        Ok(spec)
    }

    pub fn thermal_amp(g: f64, omega: f64) -> Result<Self> {
        let spec = ChannelSpec::ThermalAmp { g, omega };
        spec.validate()?;
        Ok(spec)
    }

    pub fn added_noise(zeta: f64) -> Result<Self> {
        let spec = ChannelSpec::AddedNoise { zeta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let check_omega = |omega: f64| {
            if omega >= 1.0 && omega.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(
                    "omega",
                    omega,
                    "thermal noise must satisfy omega >= 1",
                ))
            }
        };
        match *self {
            ChannelSpec::ThermalLoss { eta, omega } => {
                if !(eta > 0.0 && eta < 1.0) {
                    return Err(Error::domain(
                        "eta",
                        eta,
                        "transmissivity must lie in (0, 1)",
                    ));
                }
                check_omega(omega)
            }
            ChannelSpec::ThermalAmp { g, omega } => {
                if !(g > 1.0) || !g.is_finite() {
                    return Err(Error::domain("g", g, "gain must be > 1"));
                }
                check_omega(omega)
            }
            ChannelSpec::AddedNoise { zeta } => {
                if !(zeta > 0.0) || !zeta.is_finite() {
                    return Err(Error::domain("zeta", zeta, "added noise must be > 0"));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ChannelSpec::ThermalLoss { .. } => "thermal_loss",
            ChannelSpec::ThermalAmp { .. } => "thermal_amp",
            ChannelSpec::AddedNoise { .. } => "added_noise",
        }
    }

    /// Mean thermal photon number `(ω − 1)/2`, or `None` for added noise.
    pub fn n_th(&self) -> Option<f64> {
        match *self {
            ChannelSpec::ThermalLoss { omega, .. } | ChannelSpec::ThermalAmp { omega, .. } => {
                Some(0.5 * (omega - 1.0))
            }
            ChannelSpec::AddedNoise { .. } => None,
        }
    }

    /// Parameter of Eve's input TMSV.
    pub fn eve_omega(&self) -> Result<f64> {
        self.validate()?;
        match *self {
            ChannelSpec::ThermalLoss { omega, .. } | ChannelSpec::ThermalAmp { omega, .. } => {
                Ok(omega)
            }
            ChannelSpec::AddedNoise { zeta } => eve_omega_for_zeta(zeta),
        }
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ChannelSpec::ThermalLoss { eta, omega } => {
                write!(f, "thermal loss (eta={eta}, omega={omega})")
            }
            ChannelSpec::ThermalAmp { g, omega } => {
                write!(f, "thermal amplifier (g={g}, omega={omega})")
            }
            ChannelSpec::AddedNoise { zeta } => write!(f, "added noise (zeta={zeta})"),
        }
    }
}

/// Action of the channel on a single-mode covariance matrix.
pub fn apply_channel(spec: &ChannelSpec, v: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    spec.validate()?;
    if v.modes() != 1 {
        return Err(Error::Dimension("channel input must be single-mode".into()));
    }
    let id = DMatrix::<f64>::identity(2, 2);
    let m = v.matrix();
    let out = match *spec {
        ChannelSpec::ThermalLoss { eta, omega } => m * eta + id * ((1.0 - eta) * omega),
        ChannelSpec::ThermalAmp { g, omega } => m * g + id * ((g - 1.0) * omega),
        ChannelSpec::AddedNoise { zeta } => m + id * (2.0 * zeta),
    };
    CovarianceMatrix::new(out)
}

/// Mode labels of the joint Alice–Bob–Eve state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    A,
    B,
    /// Eve's mode that interacts with the signal.
    E,
    /// The other arm of Eve's TMSV (`e`).
    Ancilla,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::A => "A",
            Mode::B => "B",
            Mode::E => "E",
            Mode::Ancilla => "e",
        })
    }
}

/// Symplectic matrix of a dilation together with the modes it acts on, in
/// matrix order.
#[derive(Debug, Clone, PartialEq)]
pub struct Cloner {
    pub matrix: DMatrix<f64>,
    pub wiring: Vec<Mode>,
}

/// Universal cloner on `(e, E, B)`.
#[rustfmt::skip]
pub const UNIVERSAL_CLONER: [[i64; 6]; 6] = [
    [1,  0,  0,  0,  2,  0],
    [0,  5,  0,  4,  0, -2],
    [0,  0,  1,  0,  2,  0],
    [0, -4,  0, -3,  0,  2],
    [2,  0, -2,  0,  1,  0],
    [0, -2,  0, -2,  0,  1],
];

/// `max |L Ω Lᵀ − Ω|` computed in integer arithmetic.
pub fn integer_symplectic_residual<const N: usize>(l: &[[i64; N]; N]) -> i64 {
    let omega = |i: usize, j: usize| -> i64 {
        if i / 2 != j / 2 {
            0
        } else if i.is_multiple_of(2) && j == i + 1 {
            1
        } else if i % 2 == 1 && j + 1 == i {
            -1
        } else {
            0
        }
    };
    let mut worst = 0;
    for i in 0..N {
        for j in 0..N {
            let mut acc = 0i64;
            for a in 0..N {
                for b in 0..N {
                    acc += l[i][a] * omega(a, b) * l[j][b];
                }
            }
            worst = worst.max((acc - omega(i, j)).abs());
        }
    }
    worst
}

pub fn cloner_symplectic(spec: &ChannelSpec) -> Result<Cloner> {
    spec.validate()?;
    let cloner = match *spec {
        ChannelSpec::ThermalLoss { eta, .. } => {
            let (t, s) = (eta.sqrt(), (1.0 - eta).sqrt());
            #[rustfmt::skip]
            let m = DMatrix::from_row_slice(4, 4, &[
                t, 0.0, s, 0.0,
                0.0, t, 0.0, s,
                -s, 0.0, t, 0.0,
                0.0, -s, 0.0, t,
            ]);
            Cloner {
                matrix: m,
                wiring: vec![Mode::B, Mode::E],
            }
        }
        ChannelSpec::ThermalAmp { g, .. } => {
            let (c, s) = (g.sqrt(), (g - 1.0).sqrt());
            #[rustfmt::skip]
            let m = DMatrix::from_row_slice(4, 4, &[
                c, 0.0, s, 0.0,
                0.0, c, 0.0, -s,
                s, 0.0, c, 0.0,
                0.0, -s, 0.0, c,
            ]);
            Cloner {
                matrix: m,
                wiring: vec![Mode::B, Mode::E],
            }
        }
        ChannelSpec::AddedNoise { .. } => Cloner {
            matrix: DMatrix::from_fn(6, 6, |i, j| UNIVERSAL_CLONER[i][j] as f64),
            wiring: vec![Mode::Ancilla, Mode::E, Mode::B],
        },
    };
    Ok(cloner)
}

/// Eve's TMSV parameter realizing added noise `zeta` through the universal
/// cloner, inverting `ζ = 4(ω − √(ω²−1))`.
pub fn eve_omega_for_zeta(zeta: f64) -> Result<f64> {
    if !(zeta > 0.0 && zeta <= 4.0) {
        return Err(Error::domain(
            "zeta",
            zeta,
            "the universal cloner realizes only 0 < zeta <= 4",
        ));
    }
    Ok((zeta / 8.0 + 2.0 / zeta).max(1.0))
}

/// Covariance matrix over labelled modes.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub labels: Vec<Mode>,
    pub cm: CovarianceMatrix,
}

impl JointState {
    pub fn index_of(&self, mode: Mode) -> Result<usize> {
        self.labels
            .iter()
            .position(|&m| m == mode)
            .ok_or_else(|| Error::Dimension(format!("mode {mode} not present")))
    }

    pub fn indices(&self, modes: &[Mode]) -> Result<Vec<usize>> {
        modes.iter().map(|&m| self.index_of(m)).collect()
    }

    pub fn marginal(&self, modes: &[Mode]) -> Result<CovarianceMatrix> {
        self.cm.marginal(&self.indices(modes)?)
    }

    fn apply_cloner(mut self, cloner: &Cloner) -> Result<Self> {
        let idx = self.indices(&cloner.wiring)?;
        let full = embed(&cloner.matrix, &idx, self.labels.len())?;
        self.cm = self.cm.transformed(&full)?;
        Ok(self)
    }
}

/// Eve's TMSV on `(E, e)` appended after `input`.
fn with_eve(
    spec: &ChannelSpec,
    input: CovarianceMatrix,
    mut labels: Vec<Mode>,
) -> Result<JointState> {
    let eve = tmsv_cm(spec.eve_omega()?)?;
    labels.extend([Mode::E, Mode::Ancilla]);
    Ok(JointState {
        labels,
        cm: input.direct_sum(&eve),
    })
}

/// Pure four-mode state `(A, B, E, e)`: a TMSV of parameter `mu` on `(A, B)`
/// with `B` sent through the dilated channel.
pub fn build_joint_state(spec: &ChannelSpec, mu: f64) -> Result<JointState> {
    let ab = tmsv_cm(mu)?;
    let state = with_eve(spec, ab, vec![Mode::A, Mode::B])?;
    state.apply_cloner(&cloner_symplectic(spec)?)
}

/// Symplectic factor `G` of the joint state, `build_joint_state(spec, mu).cm = G Gᵀ`,
/// with the same mode labels.
pub fn joint_state_factor(spec: &ChannelSpec, mu: f64) -> Result<(Vec<Mode>, DMatrix<f64>)> {
    let labels = vec![Mode::A, Mode::B, Mode::E, Mode::Ancilla];
    let mut g = DMatrix::zeros(8, 8);
    g.view_mut((0, 0), (4, 4)).copy_from(&tmsv_factor(mu)?);
    g.view_mut((4, 4), (4, 4))
        .copy_from(&tmsv_factor(spec.eve_omega()?)?);
    let cloner = cloner_symplectic(spec)?;
    let idx: Vec<usize> = cloner
        .wiring
        .iter()
        .map(|m| {
            labels
                .iter()
                .position(|l| l == m)
                .expect("all modes labelled")
        })
        .collect();
    Ok((labels, embed(&cloner.matrix, &idx, 4)? * g))
}

/// Dilation applied to a single-mode input on `B`; output modes `(B, E, e)`.
pub fn dilate(spec: &ChannelSpec, input: &CovarianceMatrix) -> Result<JointState> {
    if input.modes() != 1 {
        return Err(Error::Dimension(
            "dilation input must be single-mode".into(),
        ));
    }
    let state = with_eve(spec, input.clone(), vec![Mode::B])?;
    state.apply_cloner(&cloner_symplectic(spec)?)
}
