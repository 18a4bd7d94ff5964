//! Optimal coverage and charging formations via projected gradient ascent.
//!
//! Gradient methods only reach local maxima of the coverage metric, so the
//! solver runs a batch of starts (one grid-stratified, the rest uniform
//! random) plus any caller-supplied warm starts, and keeps the best result.
//! Iterates are projected onto the mission rectangle and steps are accepted
//! by a backtracking Armijo line search, which makes the achieved coverage
//! non-decreasing along the iteration.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{cmp_lex, Point2};
use crate::mission::{coverage, coverage_gradient, MissionSpace, RewardField, SensingModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormationKind {
    /// All agents deployed for maximum coverage.
    Coverage,
    /// One agent pinned at the charging station, the rest re-optimized.
    Charging,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Formation {
    pub kind: FormationKind,
    /// Agent positions, sorted lexicographically by (x, y).
    pub positions: Vec<Point2>,
    /// Index of the station-pinned position (charging formations only).
    pub pinned: Option<usize>,
    pub achieved_h: f64,
    /// False when the best start hit the iteration cap before reaching the
    /// gradient tolerance.
    pub converged: bool,
}

impl Formation {
    pub fn n_agents(&self) -> usize {
        self.positions.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Initial line-search step, in length-units per unit gradient.
    pub step_init: f64,
    pub max_iters: usize,
    /// Gradient-norm stopping tolerance; `None` resolves to
    /// `1e-3 * mean_reward * range`.
    pub grad_tol: Option<f64>,
    /// Number of uniform-random starts (a grid-stratified start is always
    /// added).
    pub multistarts: usize,
    pub seed: u64,
    /// Explicit initial configurations tried before the generated starts.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warm_starts: Vec<Vec<Point2>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            step_init: 50.0,
            max_iters: 500,
            grad_tol: None,
            multistarts: 16,
            seed: 0,
            warm_starts: Vec::new(),
        }
    }
}

impl SolverOptions {
    fn resolved_tol(&self, field: &RewardField, model: &SensingModel) -> Result<f64> {
        let tol = match self.grad_tol {
            Some(t) => t,
            None => 1e-3 * field.mean_reward() * model.range,
        };
        if !(tol > 0.0) {
            return Err(Error::Config(format!("gradient tolerance must be positive, got {tol}")));
        }
        if !(self.step_init > 0.0) {
            return Err(Error::Config(format!(
                "solver step size must be positive, got {}",
                self.step_init
            )));
        }
        Ok(tol)
    }
}

/// Locations of `n` free agents maximizing coverage.
pub fn solve_ocv(
    n: usize,
    field: &RewardField,
    model: &SensingModel,
    opts: &SolverOptions,
) -> Result<Formation> {
    solve(n, field, model, None, opts)
}

/// Locations maximizing coverage with one agent pinned at the station.
pub fn solve_och(
    n: usize,
    field: &RewardField,
    model: &SensingModel,
    station: Point2,
    opts: &SolverOptions,
) -> Result<Formation> {
    if station.x < 0.0 || station.x > field.width() || station.y < 0.0 || station.y > field.height()
    {
        return Err(Error::Config(format!(
            "station {station} lies outside the field extent"
        )));
    }
    solve(n, field, model, Some(station), opts)
}

fn solve(
    n: usize,
    field: &RewardField,
    model: &SensingModel,
    station: Option<Point2>,
    opts: &SolverOptions,
) -> Result<Formation> {
    if n == 0 {
        return Err(Error::Config("formation needs at least one agent".into()));
    }
    let tol = opts.resolved_tol(field, model)?;
    let space = MissionSpace {
        width: field.width(),
        height: field.height(),
        station: station.unwrap_or(Point2::new(0.0, 0.0)),
    };

    let mut starts: Vec<Vec<Point2>> = Vec::new();
    for ws in &opts.warm_starts {
        if ws.len() != n {
            return Err(Error::Config(format!(
                "warm start has {} positions, expected {n}",
                ws.len()
            )));
        }
        starts.push(ws.iter().map(|p| space.clamp(*p)).collect());
    }
    starts.push(stratified_start(n, &space));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.multistarts {
        starts.push(
            (0..n)
                .map(|_| {
                    Point2::new(
                        rng.gen_range(0.0..=space.width),
                        rng.gen_range(0.0..=space.height),
                    )
                })
                .collect(),
        );
    }

    let mut best: Option<AscentResult> = None;
    for mut start in starts {
        if let Some(st) = station {
            start[0] = st;
        }
        let init_h = coverage(&start, field, model);
        let res = ascend(start, field, model, &space, station.map(|_| 0), tol, opts)?;
        debug_assert!(res.h >= init_h - 1e-9);
        let better = match &best {
            None => true,
            Some(b) => res.h > b.h,
        };
        if better {
            best = Some(res);
        }
    }
    let best = best.expect("at least one start");

    let mut positions = best.positions;
    positions.sort_by(cmp_lex);
    let pinned = station.map(|st| {
        positions
            .iter()
            .position(|p| p.x == st.x && p.y == st.y)
            .expect("pinned position preserved by ascent")
    });
    let achieved_h = coverage(&positions, field, model);
    Ok(Formation {
        kind: if station.is_some() { FormationKind::Charging } else { FormationKind::Coverage },
        positions,
        pinned,
        achieved_h,
        converged: best.converged,
    })
}

struct AscentResult {
    positions: Vec<Point2>,
    h: f64,
    converged: bool,
}

fn ascend(
    mut pos: Vec<Point2>,
    field: &RewardField,
    model: &SensingModel,
    space: &MissionSpace,
    pinned: Option<usize>,
    tol: f64,
    opts: &SolverOptions,
) -> Result<AscentResult> {
    let mut h = coverage(&pos, field, model);
    let mut step = opts.step_init;
    for _ in 0..opts.max_iters {
        let mut grad = coverage_gradient(&pos, field, model)?;
        if let Some(i) = pinned {
            grad[i] = Point2::new(0.0, 0.0);
        }
        // Project out components that would leave the rectangle.
        for (g, p) in grad.iter_mut().zip(pos.iter()) {
            if (p.x <= 0.0 && g.x < 0.0) || (p.x >= space.width && g.x > 0.0) {
                g.x = 0.0;
            }
            if (p.y <= 0.0 && g.y < 0.0) || (p.y >= space.height && g.y > 0.0) {
                g.y = 0.0;
            }
        }
        let gnorm_sq: f64 = grad.iter().map(|g| g.x * g.x + g.y * g.y).sum();
        let gnorm = gnorm_sq.sqrt();
        if gnorm <= tol {
            return Ok(AscentResult { positions: pos, h, converged: true });
        }

        let mut s = step;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<Point2> = pos
                .iter()
                .zip(grad.iter())
                .map(|(p, g)| space.clamp(Point2::new(p.x + s * g.x, p.y + s * g.y)))
                .collect();
            let hc = coverage(&cand, field, model);
            if hc >= h + 1e-4 * s * gnorm_sq {
                pos = cand;
                h = hc;
                step = (s * 1.5).min(1e4);
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            // Line search stalled: no ascent direction at floating-point
            // resolution. Report the iterate; converged only if within tol.
            return Ok(AscentResult { positions: pos, h, converged: gnorm <= tol });
        }
    }
    Ok(AscentResult { positions: pos, h, converged: false })
}

/// Grid-stratified initialization spreading `n` agents over the rectangle.
fn stratified_start(n: usize, space: &MissionSpace) -> Vec<Point2> {
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    (0..n)
        .map(|k| {
            let i = k % cols;
            let j = k / cols;
            Point2::new(
                (i as f64 + 0.5) * space.width / cols as f64,
                (j as f64 + 0.5) * space.height / rows as f64,
            )
        })
        .collect()
}
