//! Grid sweeps of the bound over channel parameters, or of `δ(γ)` over γ.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{coherent_info, delta_of_gamma, lower_bound, upper_bound, OptimizerOptions};
use crate::channels::ChannelSpec;
use crate::error::{Error, Result};
use crate::optimize::{linear_grid, log_grid};

/// Environment variable capping the number of sweep workers; `0` or unset
/// means one per core.
pub const THREADS_ENV: &str = "GKB_THREADS";

/// Diagnostic attached to rows of a γ-profile sweep.
pub const DELTA_PROFILE: &str = "delta_profile";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelFamily {
    ThermalLoss,
    ThermalAmp,
    AddedNoise,
}

impl ChannelFamily {
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ChannelFamily::ThermalLoss => &["eta", "omega"],
            ChannelFamily::ThermalAmp => &["g", "omega"],
            ChannelFamily::AddedNoise => &["zeta"],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelFamily::ThermalLoss => "thermal_loss",
            ChannelFamily::ThermalAmp => "thermal_amp",
            ChannelFamily::AddedNoise => "added_noise",
        }
    }

    fn spec(self, p: &[f64]) -> Result<ChannelSpec> {
        match self {
            ChannelFamily::ThermalLoss => ChannelSpec::thermal_loss(p[0], p[1]),
            ChannelFamily::ThermalAmp => ChannelSpec::thermal_amp(p[0], p[1]),
            ChannelFamily::AddedNoise => ChannelSpec::added_noise(p[0]),
        }
    }
}

impl fmt::Display for ChannelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Axis {
    pub fn new(name: &str, min: f64, max: f64, points: usize, spacing: Spacing) -> Self {
        Axis {
            name: name.to_string(),
            min,
            max,
            points,
            spacing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2
            || !(self.min < self.max)
            || !self.min.is_finite()
            || !self.max.is_finite()
        {
            return Err(Error::InvalidOptions(format!(
                "axis {}: need points >= 2 and finite min < max",
                self.name
            )));
        }
        if self.spacing == Spacing::Log && !(self.min > 0.0) {
            return Err(Error::InvalidOptions(format!(
                "axis {}: log spacing needs min > 0",
                self.name
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        match self.spacing {
            Spacing::Linear => linear_grid(self.min, self.max, self.points),
            Spacing::Log => log_grid(self.min, self.max, self.points),
        }
    }
}

/// Axes are swept in row-major order: the first axis varies slowest.
/// Parameters may be given as `nbar` in place of `omega`, and an axis named
/// `gamma` turns the sweep into a profile of `δ(γ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub family: ChannelFamily,
    pub axes: Vec<Axis>,
    pub fixed: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub channel: String,
    pub param1_name: String,
    pub param1: f64,
    pub param2_name: Option<String>,
    pub param2: Option<f64>,
    /// The maximizing γ, or the evaluated γ on a profile row.
    pub gamma_star: Option<f64>,
    /// `Δᴳ`, or `δ(γ)` on a profile row.
    pub delta_g: Option<f64>,
    pub info_term: Option<f64>,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub direction: Option<String>,
    /// Semicolon-separated diagnostic codes, or the error of a failed row.
    pub diag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.lower_bound.is_none()).count()
    }
}

struct Point {
    params: Vec<f64>,
    gamma: Option<f64>,
}

fn canonical(name: &str) -> &str {
    if name == "nbar" {
        "omega"
    } else {
        name
    }
}

fn convert(name: &str, value: f64) -> f64 {
    if name == "nbar" {
        2.0 * value + 1.0
    } else {
        value
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        self.points().map(|_| ())
    }

    fn points(&self) -> Result<Vec<Point>> {
        let names = self.family.param_names();
        let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
        let sources = self
            .axes
            .iter()
            .map(|a| a.name.as_str())
            .chain(self.fixed.keys().map(String::as_str));
        for src in sources {
            let key = canonical(src);
            if key != "gamma" && !names.contains(&key) {
                return Err(Error::InvalidOptions(format!(
                    "{src} is not a parameter of {}",
                    self.family
                )));
            }
            if let Some(prev) = seen.insert(key, src) {
                return Err(Error::InvalidOptions(format!(
                    "{prev} and {src} both set {key}"
                )));
            }
        }
        for name in names {
            if !seen.contains_key(name) {
                return Err(Error::InvalidOptions(format!("{name} is not set")));
            }
        }
        if self.fixed.contains_key("gamma") {
            return Err(Error::InvalidOptions("gamma must be an axis".into()));
        }
        for axis in &self.axes {
            axis.validate()?;
        }

        let axis_values: Vec<Vec<f64>> = self
            .axes
            .iter()
            .map(|a| {
                a.values()
                    .into_iter()
                    .map(|v| convert(&a.name, v))
                    .collect()
            })
            .collect();
        let total: usize = axis_values.iter().map(Vec::len).product();
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut coords = vec![0.0; self.axes.len()];
            for (k, vals) in axis_values.iter().enumerate().rev() {
                coords[k] = vals[rem % vals.len()];
                rem /= vals.len();
            }
            let lookup = |name: &str| -> f64 {
                self.axes
                    .iter()
                    .position(|a| canonical(&a.name) == name)
                    .map(|k| coords[k])
                    .or_else(|| {
                        self.fixed
                            .iter()
                            .find(|(k, _)| canonical(k) == name)
                            .map(|(k, &v)| convert(k, v))
                    })
                    .expect("parameter presence checked above")
            };
            out.push(Point {
                params: names.iter().map(|n| lookup(n)).collect(),
                gamma: self
                    .axes
                    .iter()
                    .position(|a| a.name == "gamma")
                    .map(|k| coords[k]),
            });
        }
        Ok(out)
    }
}

fn evaluate(family: ChannelFamily, point: &Point, opts: &OptimizerOptions) -> SweepRow {
    let names = family.param_names();
    let mut row = SweepRow {
        channel: family.as_str().to_string(),
        param1_name: names[0].to_string(),
        param1: point.params[0],
        param2_name: names.get(1).map(|s| s.to_string()),
        param2: point.params.get(1).copied(),
        gamma_star: None,
        delta_g: None,
        info_term: None,
        lower_bound: None,
        upper_bound: None,
        direction: None,
        diag: String::new(),
    };
    let outcome = (|| -> Result<()> {
        let spec = family.spec(&point.params)?;
        match point.gamma {
            Some(gamma) => {
                let (info, direction) = coherent_info(&spec)?;
                let delta = delta_of_gamma(&spec, gamma)?;
                row.gamma_star = Some(gamma);
                row.delta_g = Some(delta);
                row.info_term = Some(info);
                row.lower_bound = Some(info + delta);
                row.upper_bound = Some(upper_bound(&spec)?);
                row.direction = Some(direction.to_string());
                row.diag = DELTA_PROFILE.to_string();
            }
            None => {
                let r = lower_bound(&spec, opts)?;
                row.gamma_star = Some(r.gamma_star);
                row.delta_g = Some(r.delta_g);
                row.info_term = Some(r.info_term);
                row.lower_bound = Some(r.lower_bound);
                row.upper_bound = Some(r.upper_bound);
                row.direction = Some(r.direction.to_string());
                row.diag = r
                    .diagnostics
                    .iter()
                    .map(|d| d.code())
                    .collect::<Vec<_>>()
                    .join(";");
            }
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        row.diag = format!("error: {e}");
    }
    row
}

/// Worker count from [`THREADS_ENV`]; `0` lets the pool pick.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(0)
}

/// Evaluates every grid point. Rows come back in grid order whatever the
/// worker count; failures are recorded in the row's `diag`.
pub fn run_sweep(grid: &SweepGrid, opts: &OptimizerOptions) -> Result<SweepTable> {
    run_sweep_with_threads(grid, opts, threads_from_env())
}

pub fn run_sweep_with_threads(
    grid: &SweepGrid,
    opts: &OptimizerOptions,
    threads: usize,
) -> Result<SweepTable> {
    opts.validate()?;
    let points = grid.points()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidOptions(format!("thread pool: {e}")))?;
    let rows = pool.install(|| {
        points
            .par_iter()
            .map(|p| evaluate(grid.family, p, opts))
            .collect()
    });
    Ok(SweepTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast() -> OptimizerOptions {
        OptimizerOptions {
            coarse_points: 50,
            ..OptimizerOptions::default()
        }
    }

    fn loss_grid() -> SweepGrid {
        SweepGrid {
            family: ChannelFamily::ThermalLoss,
            axes: vec![Axis::new("eta", 0.05, 0.95, 19, Spacing::Linear)],
            fixed: BTreeMap::from([("omega".to_string(), 3.0)]),
        }
    }

    #[test]
    fn loss_sweep_rows_are_ordered_and_monotone() {
        let t = run_sweep(&loss_grid(), &fast()).unwrap();
        assert_eq!(t.rows.len(), 19);
        assert_eq!(t.failed_rows(), 0);
        assert!((t.rows[0].param1 - 0.05).abs() < 1e-15);
        assert_eq!(t.rows[18].param1, 0.95);
        let lb: Vec<f64> = t.rows.iter().map(|r| r.lower_bound.unwrap()).collect();
        assert!(lb.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{lb:?}");
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let a = run_sweep_with_threads(&loss_grid(), &fast(), 1).unwrap();
        let b = run_sweep_with_threads(&loss_grid(), &fast(), 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn added_noise_bound_decreases() {
        let grid = SweepGrid {
            family: ChannelFamily::AddedNoise,
            axes: vec![Axis::new("zeta", 0.05, 1.0, 12, Spacing::Log)],
            fixed: BTreeMap::new(),
        };
        let t = run_sweep(&grid, &fast()).unwrap();
        let lb: Vec<f64> = t.rows.iter().map(|r| r.lower_bound.unwrap()).collect();
        assert!(lb.windows(2).all(|w| w[1] < w[0]), "{lb:?}");
        assert!(t.rows.iter().all(|r| r.param2.is_none()));
    }

    #[test]
    fn gamma_axis_gives_profile_rows() {
        let grid = SweepGrid {
            family: ChannelFamily::AddedNoise,
            axes: vec![
                Axis::new("zeta", 0.36, 0.40, 3, Spacing::Linear),
                Axis::new("gamma", 1.0, 50.0, 30, Spacing::Log),
            ],
            fixed: BTreeMap::new(),
        };
        let t = run_sweep(&grid, &fast()).unwrap();
        assert_eq!(t.rows.len(), 90);
        assert_eq!(t.rows[0].gamma_star, Some(1.0));
        assert_eq!(t.rows[29].gamma_star, Some(50.0));
        assert!((t.rows[30].param1 - 0.38).abs() < 1e-15);
        assert!(t.rows.iter().all(|r| r.diag == DELTA_PROFILE));
    }

    #[test]
    fn nbar_maps_to_omega() {
        let grid = SweepGrid {
            family: ChannelFamily::ThermalAmp,
            axes: vec![Axis::new("nbar", 0.0, 1.0, 2, Spacing::Linear)],
            fixed: BTreeMap::from([("g".to_string(), 2.0)]),
        };
        let t = run_sweep(&grid, &fast()).unwrap();
        assert_eq!(t.rows[0].param2, Some(1.0));
        assert_eq!(t.rows[1].param2, Some(3.0));
    }

    #[test]
    fn errors_stay_in_their_row() {
        let grid = SweepGrid {
            family: ChannelFamily::ThermalLoss,
            axes: vec![Axis::new("eta", 0.5, 1.5, 3, Spacing::Linear)],
            fixed: BTreeMap::from([("omega".to_string(), 1.0)]),
        };
        let t = run_sweep(&grid, &fast()).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!(t.rows[0].lower_bound.is_some());
        assert!(t.rows[1].lower_bound.is_none() && t.rows[1].diag.contains("eta"));
        assert_eq!(t.failed_rows(), 2);
    }

    #[test]
    fn rejects_malformed_grids() {
        let mut g = loss_grid();
        g.fixed.insert("nbar".into(), 1.0);
        assert!(g.validate().is_err());
        let mut g = loss_grid();
        g.fixed.clear();
        assert!(g.validate().is_err());
        let mut g = loss_grid();
        g.axes[0].points = 1;
        assert!(g.validate().is_err());
        let mut g = loss_grid();
        g.fixed.insert("zeta".into(), 1.0);
        assert!(g.validate().is_err());
    }
}
