//! Scalar search routines: bounded maximization by coarse log-grid scan plus
//! golden-section refinement, and sign bisection.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;
const MAX_REFINE_ITERS: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub argmax: f64,
    pub value: f64,
    /// The best point sits on the upper end of the search window.
    pub at_upper_boundary: bool,
    pub evaluations: usize,
}

/// `points` values log-spaced on `[lo, hi]`, hitting both ends exactly.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let last = (points - 1) as f64;
            (0..points)
                .map(|i| match i {
                    0 => lo,
                    i if i == points - 1 => hi,
                    i => (a + (b - a) * i as f64 / last).exp(),
                })
                .collect()
        }
    }
}

pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let last = (points - 1) as f64;
            (0..points)
                .map(|i| match i {
                    i if i == points - 1 => hi,
                    i => lo + (hi - lo) * i as f64 / last,
                })
                .collect()
        }
    }
}

/// Maximizes `f` on `[lo, hi]`.
///
/// Scans `coarse_points` log-spaced points, then runs golden-section search
/// on the interval between the neighbours of the best grid point. Ties keep
/// the smallest argument; the refined point replaces the grid point only when
/// it improves on it by more than `value_tol`. The result is never below the
/// best grid evaluation.
pub fn maximize_log_grid<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    coarse_points: usize,
    refine_tol: f64,
    value_tol: f64,
) -> Result<Maximum>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo > 0.0 && hi > lo) || coarse_points < 3 {
        return Err(Error::InvalidOptions(format!(
            "search window [{lo}, {hi}] with {coarse_points} points"
        )));
    }
    let grid = log_grid(lo, hi, coarse_points);
    let mut evaluations = 0;
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, &x) in grid.iter().enumerate() {
        let v = f(x)?;
        evaluations += 1;
        if v > best.1 {
            best = (i, v);
        }
    }
    let (i, grid_value) = best;
    let a = grid[i.saturating_sub(1)];
    let b = grid[(i + 1).min(grid.len() - 1)];

    let (x_ref, v_ref, n) = golden_section_max(&mut f, a, b, refine_tol)?;
    evaluations += n;

    let (argmax, value) = if v_ref > grid_value + value_tol {
        (x_ref, v_ref)
    } else {
        (grid[i], grid_value)
    };
    let at_upper_boundary = i == grid.len() - 1 || hi - argmax <= 10.0 * refine_tol * hi;
    Ok(Maximum {
        argmax,
        value,
        at_upper_boundary,
        evaluations,
    })
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`,
/// stopping once the bracket is narrower than `tol` relative to its
/// location. Returns `(argmax, value, evaluations)`.
pub fn golden_section_max<F>(
    f: &mut F,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64, usize)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut evaluations = 2;
    for _ in 0..MAX_REFINE_ITERS {
        if (b - a) <= tol * (0.5 * (a + b)).abs().max(1.0) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        evaluations += 1;
    }
    Ok(if fc >= fd {
        (c, fc, evaluations)
    } else {
        (d, fd, evaluations)
    })
}

/// Bisection for the sign change of `f` on `[lo, hi]`, where `f(lo) > 0`
/// and `f(hi) <= 0`. Returns the final bracket `(lo, hi)` with
/// `hi − lo < tol`.
pub fn bisect_sign_change<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(hi > lo) || !(tol > 0.0) {
        return Err(Error::InvalidOptions(format!(
            "bisection bracket [{lo}, {hi}] with tol {tol}"
        )));
    }
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}
