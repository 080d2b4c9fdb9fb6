//! Dense Gaussian-state linear algebra: covariance matrices, symplectic
//! spectra, entropies and conditioning on a Gaussian measurement.
//!
//! All matrices use the interleaved ordering `(x₁, p₁, x₂, p₂, …)` and the
//! shot-noise convention in which the vacuum covariance matrix is the
//! identity.

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance::TOL;

/// Covariance matrix of an `n`-mode zero-mean Gaussian state.
///
/// Construction symmetrizes the input, so `V == Vᵀ` holds bit for bit.
/// Physicality (`V + iΩ ⪰ 0`) is not enforced here; see
/// [`CovarianceMatrix::is_physical`].
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    matrix: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols || rows == 0 || rows % 2 != 0 {
            return Err(Error::Dimension(format!(
                "covariance matrix must be 2n x 2n, got {rows} x {cols}"
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unphysical("non-finite entry".into()));
        }
        let scale = matrix.amax().max(1.0);
        let asymmetry = (&matrix - matrix.transpose()).amax();
        if asymmetry > TOL.symmetry * scale {
            return Err(Error::Unphysical(format!(
                "asymmetry {asymmetry:e} exceeds tolerance"
            )));
        }
        let symmetric = (&matrix + matrix.transpose()) * 0.5;
        Ok(CovarianceMatrix { matrix: symmetric })
    }

    /// Vacuum on `modes` modes.
    pub fn vacuum(modes: usize) -> Self {
        CovarianceMatrix {
            matrix: DMatrix::identity(2 * modes, 2 * modes),
        }
    }

    /// Single-mode thermal state `ν·𝟙`.
    pub fn thermal(nu: f64) -> Result<Self> {
        if !(nu >= 1.0) {
            return Err(Error::domain("nu", nu, "thermal parameter must be >= 1"));
        }
        Ok(CovarianceMatrix {
            matrix: DMatrix::identity(2, 2) * nu,
        })
    }

    pub fn modes(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix[(row, col)]
    }

    /// Reduced state on the listed modes, in the listed order.
    pub fn marginal(&self, modes: &[usize]) -> Result<CovarianceMatrix> {
        self.check_modes(modes)?;
        Ok(CovarianceMatrix {
            matrix: self.cross_block(modes, modes),
        })
    }

    /// Off-diagonal block between two mode sets.
    pub fn cross_block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        let ri = quadrature_indices(rows);
        let ci = quadrature_indices(cols);
        DMatrix::from_fn(ri.len(), ci.len(), |i, j| self.matrix[(ri[i], ci[j])])
    }

    /// `S V Sᵀ`.
    pub fn transformed(&self, s: &DMatrix<f64>) -> Result<CovarianceMatrix> {
        if s.shape() != self.matrix.shape() {
            return Err(Error::Dimension(format!(
                "transform is {:?}, state is {:?}",
                s.shape(),
                self.matrix.shape()
            )));
        }
        CovarianceMatrix::new(s * &self.matrix * s.transpose())
    }

    /// `self ⊕ other`, with the modes of `other` appended.
    pub fn direct_sum(&self, other: &CovarianceMatrix) -> CovarianceMatrix {
        let a = self.matrix.nrows();
        let b = other.matrix.nrows();
        let mut m = DMatrix::zeros(a + b, a + b);
        m.view_mut((0, 0), (a, a)).copy_from(&self.matrix);
        m.view_mut((a, a), (b, b)).copy_from(&other.matrix);
        CovarianceMatrix { matrix: m }
    }

    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        symplectic_eigenvalues(self)
    }

    pub fn entropy(&self) -> Result<f64> {
        gaussian_entropy(self)
    }

    /// `true` when every symplectic eigenvalue is at least `1 − 1e-9`.
    pub fn is_physical(&self) -> bool {
        match symplectic_eigenvalues(self) {
            Ok(eigs) => eigs.iter().all(|&l| l >= 1.0 - TOL.physicality),
            Err(_) => false,
        }
    }

    fn check_modes(&self, modes: &[usize]) -> Result<()> {
        let n = self.modes();
        for (i, &m) in modes.iter().enumerate() {
            if m >= n {
                return Err(Error::Dimension(format!(
                    "mode {m} out of range for {n} modes"
                )));
            }
            if modes[..i].contains(&m) {
                return Err(Error::Dimension(format!("mode {m} listed twice")));
            }
        }
        Ok(())
    }
}

fn quadrature_indices(modes: &[usize]) -> Vec<usize> {
    modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect()
}

/// The symplectic form `Ω = ⊕ [[0, 1], [−1, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymplecticForm {
    modes: usize,
}

impl SymplecticForm {
    pub fn new(modes: usize) -> Self {
        SymplecticForm { modes }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut omega = DMatrix::zeros(2 * self.modes, 2 * self.modes);
        for k in 0..self.modes {
            omega[(2 * k, 2 * k + 1)] = 1.0;
            omega[(2 * k + 1, 2 * k)] = -1.0;
        }
        omega
    }

    /// `‖L Ω Lᵀ − Ω‖∞` (max-abs entry).
    pub fn residual(&self, l: &DMatrix<f64>) -> f64 {
        let omega = self.matrix();
        (l * &omega * l.transpose() - omega).amax()
    }
}

/// Which party performs the measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    A,
    B,
}

impl Target {
    pub fn other(self) -> Target {
        match self {
            Target::A => Target::B,
            Target::B => Target::A,
        }
    }
}

/// Single-mode Gaussian measurement, parameterized by its seed state
/// `V₀ = γ R(θ) S(2r) R(θ)ᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSpec {
    pub gamma: f64,
    pub r: f64,
    pub theta: f64,
    pub target: Target,
}

impl MeasurementSpec {
    pub fn new(gamma: f64, r: f64, theta: f64, target: Target) -> Result<Self> {
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(Error::domain("gamma", gamma, "must be finite and >= 1"));
        }
        if !r.is_finite() {
            return Err(Error::domain("r", r, "must be finite"));
        }
        if !theta.is_finite() {
            return Err(Error::domain("theta", theta, "must be finite"));
        }
        Ok(MeasurementSpec {
            gamma,
            r,
            theta,
            target,
        })
    }

    /// Unsqueezed seed `γ·𝟙`; `γ = 1` is heterodyne.
    pub fn thermal(gamma: f64, target: Target) -> Result<Self> {
        Self::new(gamma, 0.0, 0.0, target)
    }

    pub fn seed(&self) -> CovarianceMatrix {
        v0_cm(self)
    }

    /// `W = √γ R(θ) diag(eʳ, e⁻ʳ)`, so that `W Wᵀ` is the seed.
    pub fn seed_factor(&self) -> DMatrix<f64> {
        let w = rotation(self.theta)
            * Matrix2::new(self.r.exp(), 0.0, 0.0, (-self.r).exp())
            * self.gamma.sqrt();
        DMatrix::from_fn(2, 2, |i, j| w[(i, j)])
    }
}

/// Entropy in bits of a single-mode thermal state with covariance `x·𝟙`.
///
/// Inputs within `1e-9` below 1 are clamped; anything lower is an error.
pub fn thermal_entropy(x: f64) -> Result<f64> {
    if x.is_nan() || x < 1.0 - TOL.physicality {
        return Err(Error::domain("x", x, "symplectic eigenvalue below 1"));
    }
    let lower = 0.5 * (x - 1.0);
    if lower < 0.5 * TOL.physicality {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    // a·log a − b·log b with a − b = 1, rewritten to avoid cancellation at large x
    let upper = 0.5 * (x + 1.0);
    Ok(upper.log2() + lower * (1.0 / lower).ln_1p() / std::f64::consts::LN_2)
}

/// Two-mode squeezed vacuum with local variance `mu`.
pub fn tmsv_cm(mu: f64) -> Result<CovarianceMatrix> {
    if !(mu >= 1.0) || !mu.is_finite() {
        return Err(Error::domain("mu", mu, "must be finite and >= 1"));
    }
    let c = ((mu - 1.0) * (mu + 1.0)).sqrt();
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        mu, 0.0, c, 0.0,
        0.0, mu, 0.0, -c,
        c, 0.0, mu, 0.0,
        0.0, -c, 0.0, mu,
    ]);
    Ok(CovarianceMatrix { matrix: m })
}

/// Two-mode squeezer `S` with `S Sᵀ = tmsv_cm(mu)`.
pub fn tmsv_factor(mu: f64) -> Result<DMatrix<f64>> {
    if !(mu >= 1.0) || !mu.is_finite() {
        return Err(Error::domain("mu", mu, "must be finite and >= 1"));
    }
    let (c, s) = ((0.5 * (mu + 1.0)).sqrt(), (0.5 * (mu - 1.0)).sqrt());
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        c, 0.0, s, 0.0,
        0.0, c, 0.0, -s,
        s, 0.0, c, 0.0,
        0.0, -s, 0.0, c,
    ]);
    Ok(m)
}

pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// `diag(e^{2r}, e^{−2r})`.
pub fn squeeze(r: f64) -> Matrix2<f64> {
    Matrix2::new((2.0 * r).exp(), 0.0, 0.0, (-2.0 * r).exp())
}

pub fn v0_cm(spec: &MeasurementSpec) -> CovarianceMatrix {
    let rot = rotation(spec.theta);
    let v0 = rot * squeeze(spec.r) * rot.transpose() * spec.gamma;
    let m = DMatrix::from_fn(2, 2, |i, j| 0.5 * (v0[(i, j)] + v0[(j, i)]));
    CovarianceMatrix { matrix: m }
}

/// Embeds a symplectic matrix acting on `modes` (in that order) into the
/// identity on `total_modes` modes.
pub fn embed(local: &DMatrix<f64>, modes: &[usize], total_modes: usize) -> Result<DMatrix<f64>> {
    if local.nrows() != 2 * modes.len() || local.ncols() != 2 * modes.len() {
        return Err(Error::Dimension(format!(
            "local map is {:?} for {} modes",
            local.shape(),
            modes.len()
        )));
    }
    if let Some(&m) = modes.iter().find(|&&m| m >= total_modes) {
        return Err(Error::Dimension(format!("mode {m} out of range")));
    }
    let idx = quadrature_indices(modes);
    let mut full = DMatrix::identity(2 * total_modes, 2 * total_modes);
    for (a, &ia) in idx.iter().enumerate() {
        for (b, &ib) in idx.iter().enumerate() {
            full[(ia, ib)] = local[(a, b)];
        }
    }
    Ok(full)
}

/// Symplectic eigenvalues in descending order.
///
/// With `V = L Lᵀ` (Cholesky), `Lᵀ Ω L` is antisymmetric and similar to
/// `ΩV`, so its singular values are the symplectic eigenvalues, each
/// appearing twice. This keeps the small eigenvalues accurate for states
/// with entries of order 10⁶, where squaring `ΩV` would not.
pub fn symplectic_eigenvalues(v: &CovarianceMatrix) -> Result<Vec<f64>> {
    let n = v.modes();
    let chol =
        v.matrix.clone().cholesky().ok_or_else(|| {
            Error::Unphysical("covariance matrix is not positive definite".into())
        })?;
    let l = chol.l();
    let omega = SymplecticForm::new(n).matrix();
    let k = l.transpose() * omega * &l;
    let mut sv: Vec<f64> = k.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.chunks(2)
        .map(|pair| {
            let (a, b) = (pair[0], pair[1]);
            if (a - b).abs() > TOL.pairing * a.max(1.0) {
                Err(Error::Pairing(a, b))
            } else {
                Ok(0.5 * (a + b))
            }
        })
        .collect()
}

/// Von Neumann entropy in bits, `Σ h(λᵢ)`.
pub fn gaussian_entropy(v: &CovarianceMatrix) -> Result<f64> {
    symplectic_eigenvalues(v)?
        .into_iter()
        .map(thermal_entropy)
        .sum()
}

/// Conditional covariance of `kept` after a Gaussian measurement with seed
/// `v0` on `measured`: `Y − C (X + V₀)⁻¹ Cᵀ`.
///
/// The result does not depend on the measurement outcome.
pub fn condition_on_gaussian_measurement(
    v: &CovarianceMatrix,
    kept: &[usize],
    measured: usize,
    v0: &CovarianceMatrix,
) -> Result<CovarianceMatrix> {
    if v0.modes() != 1 {
        return Err(Error::Dimension(
            "measurement seed must be single-mode".into(),
        ));
    }
    if kept.contains(&measured) {
        return Err(Error::Dimension(format!(
            "measured mode {measured} is also kept"
        )));
    }
    if kept.is_empty() {
        return Err(Error::Dimension("no kept modes".into()));
    }
    v.check_modes(kept)?;
    v.check_modes(&[measured])?;

    let y = v.cross_block(kept, kept);
    let c = v.cross_block(kept, &[measured]);
    let x = v.cross_block(&[measured], &[measured]) + &v0.matrix;

    let eig = x.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) || hi / lo > TOL.max_condition {
        return Err(Error::SingularBlock(if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }));
    }
    let chol = x.cholesky().ok_or(Error::SingularBlock(f64::INFINITY))?;
    let correction = &c * chol.solve(&c.transpose());
    let correction = (&correction + correction.transpose()) * 0.5;
    CovarianceMatrix::new(y - correction)
}

/// Same conditional covariance as [`condition_on_gaussian_measurement`],
/// computed from factors `V = G Gᵀ` and `V₀ = W Wᵀ`.
///
/// The LQ factorization of `[[G_x, W], [G_k, 0]]` has lower-right block
/// `L₂₂` with `L₂₂ L₂₂ᵀ` equal to the Schur complement. Only orthogonal
/// transformations touch the large entries, so states with `μ ~ 10⁶` keep
/// full relative accuracy in the small conditional covariance.
pub fn condition_factored(
    g: &DMatrix<f64>,
    kept: &[usize],
    measured: usize,
    w0: &DMatrix<f64>,
) -> Result<CovarianceMatrix> {
    if w0.shape() != (2, 2) {
        return Err(Error::Dimension(
            "measurement seed factor must be 2 x 2".into(),
        ));
    }
    if !g.nrows().is_multiple_of(2) || g.nrows() == 0 {
        return Err(Error::Dimension(format!("factor has {} rows", g.nrows())));
    }
    let total = g.nrows() / 2;
    if kept.is_empty() || kept.contains(&measured) {
        return Err(Error::Dimension(
            "kept modes must be non-empty and exclude the measured mode".into(),
        ));
    }
    if let Some(&m) = kept.iter().chain([&measured]).find(|&&m| m >= total) {
        return Err(Error::Dimension(format!("mode {m} out of range")));
    }
    let k = quadrature_indices(kept);
    let x = quadrature_indices(&[measured]);
    let cols = g.ncols();
    let rows = 2 + k.len();
    let mut stacked = DMatrix::zeros(rows, cols + 2);
    for (r, &i) in x.iter().chain(k.iter()).enumerate() {
        for c in 0..cols {
            stacked[(r, c)] = g[(i, c)];
        }
    }
    stacked.view_mut((0, cols), (2, 2)).copy_from(w0);

    let l = stacked.transpose().qr().r().transpose();
    let (d0, d1) = (l[(0, 0)].abs(), l[(1, 1)].abs());
    let cond = (d0.max(d1) / d0.min(d1)).powi(2);
    if !(d0.min(d1) > 0.0) || cond > TOL.max_condition {
        return Err(Error::SingularBlock(cond));
    }
    let l22 = l.view((2, 2), (k.len(), k.len()));
    let v = l22 * l22.transpose();
    CovarianceMatrix::new((&v + v.transpose()) * 0.5)
}
