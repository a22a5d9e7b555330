//! Robot and target sensing models and the simulated measurement process.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::terrain::{
    bearing_deg, visible_fraction, viewshed, CellIndex, FieldOfView, TerrainGrid, VisibilityMask,
    DEFAULT_RANGE_MAX, TARGET_VIEW_THRESHOLD,
};

/// One of the eight compass bearings a robot can face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Heading {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Heading {
    pub const ALL: [Heading; 8] = [
        Heading::N,
        Heading::NE,
        Heading::E,
        Heading::SE,
        Heading::S,
        Heading::SW,
        Heading::W,
        Heading::NW,
    ];

    pub fn degrees(self) -> f64 {
        self.ordinal() as f64 * 45.0
    }

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Heading::N => "N",
            Heading::NE => "NE",
            Heading::E => "E",
            Heading::SE => "SE",
            Heading::S => "S",
            Heading::SW => "SW",
            Heading::W => "W",
            Heading::NW => "NW",
        }
    }

    pub fn from_label(s: &str) -> Option<Heading> {
        Heading::ALL.into_iter().find(|h| h.label() == s)
    }
}

impl std::fmt::Display for Heading {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pose {
    pub cell: CellIndex,
    pub heading: Heading,
}

/// A sensed cell with its fractional visibility and distance from the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingRow {
    pub cell: CellIndex,
    pub visibility: f64,
    pub distance_m: f64,
}

/// A sensing action: stacked one-hot rows selecting the cells in view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingAction {
    pub pose: Pose,
    pub rows: Vec<SensingRow>,
}

impl SensingAction {
    /// Row count `Q`.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        self.rows.iter().map(|r| r.cell)
    }

    /// Per-row noise variances under `noise`.
    pub fn noise_variances(&self, noise: &NoiseModel) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| noise.variance(r.distance_m, r.visibility))
            .collect()
    }
}

/// Geometry of the forward-facing robot sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotSensor {
    pub range_max: f64,
    /// Full lateral field of view in degrees.
    pub fov_deg: f64,
}

impl Default for RobotSensor {
    fn default() -> Self {
        Self {
            range_max: DEFAULT_RANGE_MAX,
            fov_deg: 193.0,
        }
    }
}

/// The 15-cell trapezoid in front of a robot facing north, as
/// `(forward, lateral)` offsets: rows of 3, 5 and 7 cells at 1, 2 and 3 cells
/// ahead, listed nearest first and center-out within a row.
const TRAPEZOID: [(i32, i32); 15] = [
    (1, 0),
    (1, -1),
    (1, 1),
    (2, 0),
    (2, -1),
    (2, 1),
    (2, -2),
    (2, 2),
    (3, 0),
    (3, -1),
    (3, 1),
    (3, -2),
    (3, 2),
    (3, -3),
    (3, 3),
];

/// `(d_row, d_col)` offsets of the trapezoid for `heading`.
///
/// Cardinal headings are exact. Diagonal headings rotate the template by 45
/// degrees and snap each point to the nearest cell not already taken, so the
/// footprint keeps 15 distinct cells.
pub fn footprint_offsets(heading: Heading) -> Vec<(isize, isize)> {
    let theta = heading.degrees().to_radians();
    let (fx, fy) = (theta.sin(), -theta.cos());
    let (lx, ly) = (theta.cos(), theta.sin());
    let mut taken: Vec<(isize, isize)> = Vec::with_capacity(TRAPEZOID.len());
    for &(f, l) in &TRAPEZOID {
        let px = f as f64 * fx + l as f64 * lx;
        let py = f as f64 * fy + l as f64 * ly;
        let (bx, by) = (px.round() as isize, py.round() as isize);
        let mut options: Vec<(isize, isize)> = (-1..=1)
            .flat_map(|dy| (-1..=1).map(move |dx| (bx + dx, by + dy)))
            .filter(|&(x, y)| (x, y) != (0, 0) && !taken.contains(&(y, x)))
            .collect();
        options.sort_by(|a, b| {
            let da = (a.0 as f64 - px).hypot(a.1 as f64 - py);
            let db = (b.0 as f64 - px).hypot(b.1 as f64 - py);
            da.total_cmp(&db)
        });
        let (x, y) = options[0];
        taken.push((y, x));
    }
    taken
}

/// Sensing action of a robot at `pose`: the trapezoid footprint intersected
/// with the robot's sector viewshed.
pub fn robot_sensing_action(grid: &TerrainGrid, pose: Pose) -> Result<SensingAction> {
    robot_sensing_action_with(grid, pose, &RobotSensor::default())
}

pub fn robot_sensing_action_with(grid: &TerrainGrid, pose: Pose, sensor: &RobotSensor) -> Result<SensingAction> {
    grid.check_cell(pose.cell)?;
    if !grid.is_traversable(pose.cell) {
        return Err(domain(format!("robot pose cell {} is not traversable", pose.cell)));
    }
    let fov = FieldOfView::Sector {
        heading_deg: pose.heading.degrees(),
        width_deg: sensor.fov_deg,
    };
    let (r, c) = grid.coords(pose.cell);
    let mut rows = Vec::with_capacity(TRAPEZOID.len());
    for (dr, dc) in footprint_offsets(pose.heading) {
        let Some(cell) = grid.checked_index(r as isize + dr, c as isize + dc) else { continue };
        let distance_m = grid.distance(pose.cell, cell);
        if distance_m > sensor.range_max + 1e-9 {
            continue;
        }
        if !fov.admits(bearing_deg(grid, pose.cell, cell)) {
            continue;
        }
        let visibility = visible_fraction(grid, pose.cell, cell);
        if visibility > 0.0 {
            rows.push(SensingRow {
                cell,
                visibility,
                distance_m,
            });
        }
    }
    Ok(SensingAction { pose, rows })
}

/// Binarized omnidirectional view of a target standing at `cell`.
pub fn target_view(grid: &TerrainGrid, cell: CellIndex, range_max: f64) -> Result<VisibilityMask> {
    Ok(viewshed(grid, cell, FieldOfView::Omni, 0.0, range_max)?.binarized(TARGET_VIEW_THRESHOLD))
}

/// Target sensing model as a sensing action with unit visibilities.
pub fn target_sensing_action(grid: &TerrainGrid, cell: CellIndex) -> Result<SensingAction> {
    let mask = target_view(grid, cell, DEFAULT_RANGE_MAX)?;
    Ok(SensingAction {
        pose: Pose {
            cell,
            heading: Heading::N,
        },
        rows: mask
            .entries
            .iter()
            .map(|&(c, v)| SensingRow {
                cell: c,
                visibility: v,
                distance_m: grid.distance(cell, c),
            })
            .collect(),
    })
}

/// Distance- and occlusion-dependent measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub base_sigma: f64,
    pub distance_scale: f64,
    pub cell_size: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            base_sigma: 0.1,
            distance_scale: 0.05,
            cell_size: 60.0,
        }
    }
}

impl NoiseModel {
    /// Scale of the half-normal offset on a row:
    /// `base_sigma * (1 + distance_scale * (distance / cell_size)^2) / visibility^2`.
    pub fn stddev(&self, distance: f64, visibility: f64) -> Result<f64> {
        if !(visibility > 0.0 && visibility <= 1.0) {
            return Err(domain(format!("visibility must be in (0, 1], got {visibility}")));
        }
        if !(distance >= 0.0) {
            return Err(domain(format!("distance must be >= 0, got {distance}")));
        }
        let d = distance / self.cell_size;
        Ok(self.base_sigma * (1.0 + self.distance_scale * d * d) / (visibility * visibility))
    }

    /// Variance of a row from an action that already excludes zero visibility.
    pub fn variance(&self, distance: f64, visibility: f64) -> f64 {
        let s = self
            .stddev(distance, visibility)
            .expect("sensing rows carry positive visibility");
        s * s
    }
}

/// See [`NoiseModel::stddev`].
pub fn noise_stddev(distance: f64, visibility: f64, base_sigma: f64, distance_scale: f64, cell_size: f64) -> Result<f64> {
    NoiseModel {
        base_sigma,
        distance_scale,
        cell_size,
    }
    .stddev(distance, visibility)
}

/// A clipped noisy measurement paired with its action and noise variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub action: SensingAction,
    pub y: Vec<f64>,
    pub noise_variance: Vec<f64>,
}

/// True target locations and what each target can see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// 0/1 indicator per cell.
    pub beta: Vec<f64>,
    pub targets: Vec<CellIndex>,
    /// Binarized view of each target, aligned with `targets`.
    pub views: Vec<VisibilityMask>,
}

impl GroundTruth {
    pub fn new(grid: &TerrainGrid, targets: Vec<CellIndex>, range_max: f64) -> Result<Self> {
        let mut beta = vec![0.0; grid.len()];
        for &t in &targets {
            grid.check_cell(t)?;
            if !grid.is_traversable(t) {
                return Err(domain(format!("target cell {t} is not traversable")));
            }
            if beta[t] != 0.0 {
                return Err(Error::Config(format!("duplicate target cell {t}")));
            }
            beta[t] = 1.0;
        }
        let views = targets
            .iter()
            .map(|&t| target_view(grid, t, range_max))
            .collect::<Result<_>>()?;
        Ok(Self { beta, targets, views })
    }

    pub fn k(&self) -> usize {
        self.targets.len()
    }

    pub fn is_target(&self, cell: CellIndex) -> bool {
        self.beta[cell] != 0.0
    }

    /// How many targets see `cell`.
    pub fn watchers(&self, cell: CellIndex) -> usize {
        self.views.iter().filter(|v| v.fraction(cell) > 0.0).count()
    }
}

/// Measurement for given non-negative noise offsets, one per row: the offset
/// is added on empty cells and subtracted on target cells, then clipped.
pub fn observe_with_offsets(
    truth: &GroundTruth,
    action: &SensingAction,
    noise: &NoiseModel,
    offsets: &[f64],
) -> Observation {
    assert_eq!(offsets.len(), action.len(), "one offset per sensing row");
    let y = action
        .rows
        .iter()
        .zip(offsets)
        .map(|(row, &b)| {
            let raw = if truth.is_target(row.cell) { 1.0 - b } else { b };
            raw.clamp(0.0, 1.0)
        })
        .collect();
    Observation {
        action: action.clone(),
        y,
        noise_variance: action.noise_variances(noise),
    }
}

/// Draws one noisy measurement of `action` against the ground truth.
pub fn simulate_observation<R: Rng + ?Sized>(
    truth: &GroundTruth,
    action: &SensingAction,
    noise: &NoiseModel,
    rng: &mut R,
) -> Observation {
    let offsets: Vec<f64> = action
        .rows
        .iter()
        .map(|row| {
            let sigma = noise.variance(row.distance_m, row.visibility).sqrt();
            let z: f64 = rng.sample(StandardNormal);
            sigma * z.abs()
        })
        .collect();
    observe_with_offsets(truth, action, noise, &offsets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat(n: usize) -> TerrainGrid {
        TerrainGrid::flat(n, n, 60.0).unwrap()
    }

    #[test]
    fn footprints_have_fifteen_distinct_cells_in_range() {
        for h in Heading::ALL {
            let offs = footprint_offsets(h);
            assert_eq!(offs.len(), 15, "{h}");
            let mut d = offs.clone();
            d.sort();
            d.dedup();
            assert_eq!(d.len(), 15, "{h}");
            for (dr, dc) in offs {
                assert!(((dr * dr + dc * dc) as f64).sqrt() <= 5.0, "{h}: {dr},{dc}");
            }
        }
    }

    #[test]
    fn flat_north_has_fifteen_clear_rows() {
        let g = flat(11);
        for h in Heading::ALL {
            let a = robot_sensing_action(&g, Pose { cell: g.index(5, 5), heading: h }).unwrap();
            assert_eq!(a.len(), 15, "{h}");
            assert!(a.rows.iter().all(|r| r.visibility == 1.0));
        }
        let a = robot_sensing_action(&g, Pose { cell: g.index(5, 5), heading: Heading::N }).unwrap();
        assert!(a.cells().all(|c| g.coords(c).0 < 5));
    }

    #[test]
    fn opposite_headings_are_disjoint() {
        let g = flat(11);
        let c = g.index(5, 5);
        for (a, b) in [(Heading::N, Heading::S), (Heading::NE, Heading::SW), (Heading::E, Heading::W)] {
            let x = robot_sensing_action(&g, Pose { cell: c, heading: a }).unwrap();
            let y = robot_sensing_action(&g, Pose { cell: c, heading: b }).unwrap();
            assert!(x.cells().all(|cell| !y.cells().any(|o| o == cell)));
        }
    }

    #[test]
    fn untraversable_pose_rejected() {
        let mut g = flat(5);
        g.set_traversable(3, false);
        assert!(robot_sensing_action(&g, Pose { cell: 3, heading: Heading::N }).is_err());
        assert!(robot_sensing_action(&g, Pose { cell: 25, heading: Heading::N }).is_err());
        assert!(target_sensing_action(&g, 25).is_err());
    }

    #[test]
    fn target_views_flat_and_corner() {
        let g = flat(13);
        let center = target_sensing_action(&g, g.index(6, 6)).unwrap();
        // Lattice points within radius 5.
        assert_eq!(center.len(), 81);
        assert!(center.rows.iter().all(|r| r.visibility == 1.0));
        let corner = target_sensing_action(&g, 0).unwrap();
        // Quarter disk including both axes: (81 - 1) / 4 + 2 * 5 / 2 + 1.
        assert_eq!(corner.len(), 26);
        let ratio = corner.len() as f64 / center.len() as f64;
        assert!((0.25..0.35).contains(&ratio), "{ratio}");
    }

    #[test]
    fn stddev_scaling() {
        let n = NoiseModel::default();
        assert_eq!(n.stddev(0.0, 1.0).unwrap(), 0.1);
        let far = NoiseModel {
            distance_scale: 1e6,
            ..n
        };
        let ratio = far.stddev(240.0, 1.0).unwrap() / far.stddev(120.0, 1.0).unwrap();
        assert!((ratio - 4.0).abs() < 1e-4);
        let r = n.stddev(120.0, 0.5).unwrap() / n.stddev(120.0, 1.0).unwrap();
        assert!((r - 4.0).abs() < 1e-12);
        assert!(n.stddev(10.0, 0.0).is_err());
        assert!(n.stddev(10.0, 1.5).is_err());
        assert!(noise_stddev(-1.0, 1.0, 0.1, 0.05, 60.0).is_err());
    }

    #[test]
    fn clipping_branches() {
        let g = flat(5);
        let truth = GroundTruth::new(&g, vec![g.index(1, 2)], 300.0).unwrap();
        let action = SensingAction {
            pose: Pose { cell: g.index(2, 2), heading: Heading::N },
            rows: vec![
                SensingRow { cell: g.index(1, 2), visibility: 1.0, distance_m: 60.0 },
                SensingRow { cell: g.index(1, 1), visibility: 1.0, distance_m: 84.0 },
                SensingRow { cell: g.index(1, 3), visibility: 0.6, distance_m: 84.0 },
            ],
        };
        let n = NoiseModel::default();
        let o = observe_with_offsets(&truth, &action, &n, &[0.0, 1.4, 0.3]);
        assert_eq!(o.y, vec![1.0, 1.0, 0.3]);
        let o = observe_with_offsets(&truth, &action, &n, &[0.4, 0.0, 0.0]);
        assert!((o.y[0] - 0.6).abs() < 1e-15);
        assert_eq!(o.noise_variance.len(), 3);
        assert!(o.noise_variance[2] > o.noise_variance[1]);
    }

    #[test]
    fn zero_noise_observes_truth() {
        let g = flat(9);
        let truth = GroundTruth::new(&g, vec![g.index(2, 4), g.index(1, 3)], 300.0).unwrap();
        let a = robot_sensing_action(&g, Pose { cell: g.index(4, 4), heading: Heading::N }).unwrap();
        let n = NoiseModel { base_sigma: 0.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let o = simulate_observation(&truth, &a, &n, &mut rng);
        for (row, y) in a.rows.iter().zip(&o.y) {
            assert_eq!(*y, truth.beta[row.cell]);
        }
    }

    #[test]
    fn ground_truth_checks() {
        let mut g = flat(4);
        g.set_traversable(5, false);
        assert!(GroundTruth::new(&g, vec![5], 300.0).is_err());
        assert!(GroundTruth::new(&g, vec![1, 1], 300.0).is_err());
        let t = GroundTruth::new(&g, vec![0, 15], 300.0).unwrap();
        assert_eq!(t.k(), 2);
        assert_eq!(t.watchers(0), 2);
    }
}
