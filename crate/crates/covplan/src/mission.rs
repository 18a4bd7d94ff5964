//! Mission space, reward field, and sensing model.
//!
//! The coverage metric is the integral over the mission space of the reward
//! density times the joint detection probability of the agent team. The
//! integral is approximated by the midpoint rule on the reward grid, so all
//! evaluations here are deterministic functions of their inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point2;

/// Rectangular mission space `[0, width] x [0, height]` with a single
/// charging station inside it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MissionSpace {
    pub width: f64,
    pub height: f64,
    pub station: Point2,
}

impl MissionSpace {
    pub fn new(width: f64, height: f64, station: Point2) -> Result<Self> {
        if !(width > 0.0) || !(height > 0.0) {
            return Err(Error::Config(format!(
                "mission space dimensions must be positive, got {width} x {height}"
            )));
        }
        let space = MissionSpace { width, height, station };
        if !space.contains(station) {
            return Err(Error::Config(format!(
                "charging station {station} lies outside the {width} x {height} mission space"
            )));
        }
        Ok(space)
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    pub fn clamp(&self, p: Point2) -> Point2 {
        Point2::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }
}

/// Nonnegative reward density sampled at cell centers of a regular grid.
///
/// Cell `(ix, iy)` has its center at `((ix + 0.5) * cell, (iy + 0.5) * cell)`.
/// Values are stored row-major: one row per `iy`, `nx` values per row.
#[derive(Debug, Clone)]
pub struct RewardField {
    width: f64,
    height: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    values: Vec<f64>,
    uniform: Option<f64>,
}

impl RewardField {
    /// Constant reward `sigma` everywhere.
    pub fn uniform(space: &MissionSpace, sigma: f64, cell: f64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::Config(format!("uniform reward must be >= 0, got {sigma}")));
        }
        let (nx, ny) = grid_dims(space.width, space.height, cell)?;
        Ok(RewardField {
            width: space.width,
            height: space.height,
            cell,
            nx,
            ny,
            values: vec![sigma; nx * ny],
            uniform: Some(sigma),
        })
    }

    /// Gridded reward values, row-major with `iy` as the row index.
    pub fn from_values(width: f64, height: f64, cell: f64, values: Vec<f64>) -> Result<Self> {
        let (nx, ny) = grid_dims(width, height, cell)?;
        if values.len() != nx * ny {
            return Err(Error::Config(format!(
                "reward grid has {} values but {} x {} cells are required",
                values.len(),
                nx,
                ny
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("reward values must be finite and >= 0".into()));
        }
        Ok(RewardField { width, height, cell, nx, ny, values, uniform: None })
    }

    /// Same field re-sampled at a different cell size (uniform fields only).
    pub fn with_cell(&self, cell: f64) -> Result<Self> {
        match self.uniform {
            Some(sigma) => {
                let space = MissionSpace {
                    width: self.width,
                    height: self.height,
                    station: Point2::new(0.0, 0.0),
                };
                RewardField::uniform(&space, sigma, cell)
            }
            None => Err(Error::Config(
                "cannot change the cell size of a file-backed reward grid".into(),
            )),
        }
    }

    /// Loads the text format: a header line `width height cell` followed by
    /// `nx * ny` whitespace-separated row-major values. Lines starting with
    /// `#` are comments.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut nums = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| {
                    Error::Config(format!("reward field {}: bad number {tok:?}", path.display()))
                })?;
                nums.push(v);
            }
        }
        if nums.len() < 3 {
            return Err(Error::Config(format!(
                "reward field {}: missing header (width height cell)",
                path.display()
            )));
        }
        let (width, height, cell) = (nums[0], nums[1], nums[2]);
        RewardField::from_values(width, height, cell, nums.split_off(3))
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "{} {} {}", self.width, self.height, self.cell)?;
        for iy in 0..self.ny {
            let row: Vec<String> =
                (0..self.nx).map(|ix| format!("{}", self.values[iy * self.nx + ix])).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn matches_space(&self, space: &MissionSpace) -> bool {
        (self.width - space.width).abs() < 1e-9 && (self.height - space.height).abs() < 1e-9
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn uniform_value(&self) -> Option<f64> {
        self.uniform
    }

    /// Mean reward over the grid, used for scale-aware solver tolerances.
    pub fn mean_reward(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Midpoint-rule integral of the reward itself, an upper bound on any
    /// coverage value.
    pub fn total_reward(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell * self.cell
    }

    #[inline]
    fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    #[inline]
    fn center(&self, ix: usize, iy: usize) -> Point2 {
        Point2::new((ix as f64 + 0.5) * self.cell, (iy as f64 + 0.5) * self.cell)
    }

    /// Index range of cells whose centers can lie within `radius` of `p`.
    fn disk_range(&self, p: Point2, radius: f64) -> (usize, usize, usize, usize) {
        let lo = |v: f64| ((v - radius) / self.cell - 0.5).floor().max(0.0) as usize;
        let hi = |v: f64, n: usize| {
            (((v + radius) / self.cell - 0.5).ceil().max(0.0) as usize + 1).min(n)
        };
        (lo(p.x), hi(p.x, self.nx), lo(p.y), hi(p.y, self.ny))
    }
}

fn grid_dims(width: f64, height: f64, cell: f64) -> Result<(usize, usize)> {
    if !(width > 0.0) || !(height > 0.0) {
        return Err(Error::Config(format!("field extent must be positive, got {width} x {height}")));
    }
    if !(cell > 0.0) {
        return Err(Error::Config(format!("cell size must be positive, got {cell}")));
    }
    let nx = (width / cell).round();
    let ny = (height / cell).round();
    if (nx * cell - width).abs() > 1e-6 || (ny * cell - height).abs() > 1e-6 {
        return Err(Error::Config(format!(
            "cell size {cell} does not tile the {width} x {height} extent"
        )));
    }
    Ok((nx as usize, ny as usize))
}

/// Distance-based detection probability of a single agent.
///
/// The probability is 1 at zero distance, monotonically decreasing, and
/// exactly 0 at and beyond the sensing range.
#[derive(Debug, Clone, Copy)]
pub struct SensingModel {
    pub range: f64,
    pub law: SensingLaw,
}

#[derive(Debug, Clone, Copy)]
pub enum SensingLaw {
    /// `p = 1 - d^2 / range^2` inside the sensing disk.
    Quadratic,
    /// Arbitrary `p(distance, range)`; no analytic gradient available.
    Custom(fn(f64, f64) -> f64),
}

impl SensingModel {
    pub fn quadratic(range: f64) -> Result<Self> {
        if !(range > 0.0) {
            return Err(Error::Config(format!("sensing range must be positive, got {range}")));
        }
        Ok(SensingModel { range, law: SensingLaw::Quadratic })
    }

    #[inline]
    pub fn probability_at(&self, dist: f64) -> f64 {
        if dist >= self.range {
            return 0.0;
        }
        match self.law {
            SensingLaw::Quadratic => 1.0 - (dist * dist) / (self.range * self.range),
            SensingLaw::Custom(p) => p(dist, self.range).clamp(0.0, 1.0),
        }
    }

    /// Miss probability `1 - p` from the squared distance; the hot path for
    /// grid integration.
    #[inline]
    fn miss_from_dist_sq(&self, dist_sq: f64) -> f64 {
        let r2 = self.range * self.range;
        if dist_sq >= r2 {
            return 1.0;
        }
        match self.law {
            SensingLaw::Quadratic => dist_sq / r2,
            SensingLaw::Custom(p) => 1.0 - p(dist_sq.sqrt(), self.range).clamp(0.0, 1.0),
        }
    }
}

/// Detection probability of one agent for one point.
pub fn sensing_probability(point: Point2, agent: Point2, model: &SensingModel) -> f64 {
    model.probability_at(point.distance_to(agent))
}

/// Joint detection probability `1 - prod_i (1 - p_i)` of the team for one
/// point. Empty teams detect nothing.
pub fn joint_detection(point: Point2, positions: &[Point2], model: &SensingModel) -> f64 {
    let mut miss = 1.0;
    for agent in positions {
        miss *= model.miss_from_dist_sq(point.distance_sq(*agent));
        if miss == 0.0 {
            break;
        }
    }
    1.0 - miss
}

/// Team coverage: midpoint-rule approximation of the reward-weighted joint
/// detection probability over the mission space.
pub fn coverage(positions: &[Point2], field: &RewardField, model: &SensingModel) -> f64 {
    let mut miss = vec![1.0f64; field.nx * field.ny];
    accumulate_miss(&mut miss, positions, field, model);
    let mut total = 0.0;
    for iy in 0..field.ny {
        for ix in 0..field.nx {
            let m = miss[iy * field.nx + ix];
            if m < 1.0 {
                total += field.value(ix, iy) * (1.0 - m);
            }
        }
    }
    total * field.cell * field.cell
}

/// Multiplies the per-cell miss probability of every agent into `miss`.
/// Only cells inside each agent's sensing disk are touched.
fn accumulate_miss(miss: &mut [f64], positions: &[Point2], field: &RewardField, model: &SensingModel) {
    let r2 = model.range * model.range;
    for agent in positions {
        let (x0, x1, y0, y1) = field.disk_range(*agent, model.range);
        for iy in y0..y1 {
            for ix in x0..x1 {
                let c = field.center(ix, iy);
                let d2 = c.distance_sq(*agent);
                if d2 < r2 {
                    miss[iy * field.nx + ix] *= model.miss_from_dist_sq(d2);
                }
            }
        }
    }
}

/// Analytic gradient of `coverage` with respect to every agent coordinate,
/// as one (dH/dx, dH/dy) pair per agent.
///
/// For each agent only the cells inside its own sensing disk contribute,
/// weighted by the miss probability of all other agents. Matches central
/// finite differences of `coverage` because the midpoint sum is smooth in
/// the agent positions (the integrand vanishes at the disk boundary).
pub fn coverage_gradient(
    positions: &[Point2],
    field: &RewardField,
    model: &SensingModel,
) -> Result<Vec<Point2>> {
    if !matches!(model.law, SensingLaw::Quadratic) {
        return Err(Error::UnsupportedModel(
            "analytic coverage gradient requires the quadratic sensing law".into(),
        ));
    }
    let r2 = model.range * model.range;
    let mut miss = vec![1.0f64; field.nx * field.ny];
    accumulate_miss(&mut miss, positions, field, model);

    let area = field.cell * field.cell;
    let mut grad = Vec::with_capacity(positions.len());
    for (i, agent) in positions.iter().enumerate() {
        let (x0, x1, y0, y1) = field.disk_range(*agent, model.range);
        let mut gx = 0.0;
        let mut gy = 0.0;
        for iy in y0..y1 {
            for ix in x0..x1 {
                let c = field.center(ix, iy);
                let d2 = c.distance_sq(*agent);
                if d2 >= r2 {
                    continue;
                }
                let own_miss = d2 / r2;
                let others = if own_miss > 1e-12 {
                    miss[iy * field.nx + ix] / own_miss
                } else {
                    // Cell center essentially on top of the agent: rebuild the
                    // product without agent i instead of dividing by ~0.
                    positions
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, a)| model.miss_from_dist_sq(c.distance_sq(*a)))
                        .product()
                };
                let w = field.value(ix, iy) * others * 2.0 / r2;
                gx += w * (c.x - agent.x);
                gy += w * (c.y - agent.y);
            }
        }
        grad.push(Point2::new(gx * area, gy * area));
    }
    Ok(grad)
}
