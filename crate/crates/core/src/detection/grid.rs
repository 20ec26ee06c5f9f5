use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DetectionError;

/// Starting iterate for value iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueInit {
    /// `V ≡ 0`.
    #[default]
    Zero,
    /// `V` equal to the stopping cost.
    StopCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub grid_size: usize,
    pub max_iters: usize,
    /// Early exit once the sup-norm change drops below this.
    pub tol: f64,
    pub init: ValueInit,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            grid_size: 1000,
            max_iters: 200,
            tol: 1e-9,
            init: ValueInit::Zero,
        }
    }
}

impl SolverSettings {
    pub(crate) fn validate(&self) -> Result<(), DetectionError> {
        if self.grid_size < 2 {
            return Err(DetectionError::GridTooSmall(self.grid_size));
        }
        Ok(())
    }
}

/// Decision and value at every grid point, plus the convergence record.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrid<D> {
    pub decisions: Vec<D>,
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm change of each sweep.
    pub residuals: Vec<f64>,
}

/// A change of decision between grid points `index` and `index + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Switch<D> {
    pub index: usize,
    pub from: D,
    pub to: D,
    /// Midpoint of the straddling cell; the threshold is known to ± one cell.
    pub midpoint: f64,
}

impl<D> PolicyGrid<D> {
    pub(crate) fn map_decisions<E>(self, f: impl Fn(D) -> E) -> PolicyGrid<E> {
        PolicyGrid {
            decisions: self.decisions.into_iter().map(f).collect(),
            values: self.values,
            iterations: self.iterations,
            residuals: self.residuals,
        }
    }
}

impl<D: Copy + PartialEq> PolicyGrid<D> {
    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    /// `p_g = g / (G - 1)`.
    pub fn point(&self, g: usize) -> f64 {
        grid_point(g, self.grid_size())
    }

    pub fn nearest_index(&self, p: f64) -> usize {
        nearest_index(p, self.grid_size())
    }

    /// Decision at the grid point nearest to `p`.
    pub fn decision_at(&self, p: f64) -> D {
        self.decisions[self.nearest_index(p)]
    }

    /// Linearly interpolated value at `p`.
    pub fn value_at(&self, p: f64) -> f64 {
        interpolate(&self.values, p)
    }

    pub fn switches(&self) -> Vec<Switch<D>> {
        self.decisions
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] != w[1])
            .map(|(g, w)| Switch {
                index: g,
                from: w[0],
                to: w[1],
                midpoint: 0.5 * (self.point(g) + self.point(g + 1)),
            })
            .collect()
    }

    /// Number of switches from `from` to `to`, scanning left to right.
    pub fn count_transitions(&self, from: D, to: D) -> usize {
        self.decisions
            .windows(2)
            .filter(|w| w[0] == from && w[1] == to)
            .count()
    }

    /// `max_g |V(g+1) - V(g)|`.
    pub fn max_adjacent_jump(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max)
    }

    /// Maximal runs `[first, last]` of grid indices carrying decision `d`.
    pub fn runs_of(&self, d: D) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut start = None;
        for (g, &x) in self.decisions.iter().enumerate() {
            match (x == d, start) {
                (true, None) => start = Some(g),
                (false, Some(s)) => {
                    runs.push((s, g - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push((s, self.decisions.len() - 1));
        }
        runs
    }
}

/// Number of indices where the decision changes between neighbours.
pub fn count_policy_switches<D: Copy + PartialEq>(policy: &PolicyGrid<D>) -> usize {
    policy.switches().len()
}

pub(crate) fn grid_point(g: usize, grid_size: usize) -> f64 {
    g as f64 / (grid_size - 1) as f64
}

pub(crate) fn nearest_index(p: f64, grid_size: usize) -> usize {
    let scaled = p.clamp(0.0, 1.0) * (grid_size - 1) as f64;
    (scaled.round() as usize).min(grid_size - 1)
}

pub(crate) fn interpolate(values: &[f64], p: f64) -> f64 {
    let last = values.len() - 1;
    let scaled = p.clamp(0.0, 1.0) * last as f64;
    let lo = (scaled.floor() as usize).min(last);
    if lo == last {
        return values[last];
    }
    let frac = scaled - lo as f64;
    values[lo] + frac * (values[lo + 1] - values[lo])
}

/// One grid point's Bellman data: `min{stop, running + discount·Σ w V(next)}`.
pub(crate) struct PointModel {
    pub stop: f64,
    pub running: f64,
    /// `(probability, next p)` pairs.
    pub next: Vec<(f64, f64)>,
}

/// Value iteration shared by every solver. Ties pick `stop`; the returned
/// flag per point is `true` for stop.
pub(crate) fn value_iteration(
    points: &[PointModel],
    discount: f64,
    settings: &SolverSettings,
) -> PolicyGrid<bool> {
    let mut values: Vec<f64> = match settings.init {
        ValueInit::Zero => vec![0.0; points.len()],
        ValueInit::StopCost => points.iter().map(|pt| pt.stop).collect(),
    };
    let mut residuals = Vec::new();
    let mut stops = vec![true; points.len()];
    let backup = |values: &[f64], pt: &PointModel| {
        let future: f64 = pt
            .next
            .iter()
            .map(|&(w, p)| w * interpolate(values, p))
            .sum();
        let cont = pt.running + discount * future;
        if pt.stop <= cont {
            (pt.stop, true)
        } else {
            (cont, false)
        }
    };
    for _ in 0..settings.max_iters {
        let (next, flags): (Vec<f64>, Vec<bool>) =
            points.par_iter().map(|pt| backup(&values, pt)).unzip();
        let residual = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        stops = flags;
        residuals.push(residual);
        if residual < settings.tol {
            break;
        }
    }
    if settings.max_iters == 0 {
        stops = points.iter().map(|pt| backup(&values, pt).1).collect();
    }
    PolicyGrid {
        decisions: stops,
        values,
        iterations: residuals.len(),
        residuals,
    }
}
