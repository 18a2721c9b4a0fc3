//! Sampling-based local planner over a restricted velocity space, scoring
//! each candidate arc by goal progress, obstacle proximity and the coupled
//! traversability cost along its image projection.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{normalize_angle, CostMap, Gait, Pose, VelocityCommand};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerParams {
    pub v_max: f64,
    pub omega_max: f64,
    /// Linear acceleration limit, m/s^2. Infinite disables the dynamic window.
    pub accel_v: f64,
    /// Angular acceleration limit, rad/s^2.
    pub accel_omega: f64,
    pub horizon: f64,
    pub dt: f64,
    /// Samples per velocity axis.
    pub resolution: usize,
    pub beta: [f64; 3],
    pub clearance_cap: f64,
    pub robot_radius: f64,
    pub control_period: f64,
    /// Divide the surface term by 255 before weighting.
    pub normalize_sur: bool,
    /// Surface cost used when a rollout leaves the camera view entirely.
    pub unseen_cost: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            v_max: 0.6,
            omega_max: 0.2,
            accel_v: 0.5,
            accel_omega: 0.5,
            horizon: 2.0,
            dt: 0.1,
            resolution: 13,
            beta: [2.4, 3.2, 0.05],
            clearance_cap: 1.0,
            robot_radius: 0.3,
            control_period: 0.1,
            normalize_sur: true,
            unseen_cost: 127.0,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("v_max", self.v_max),
            ("omega_max", self.omega_max),
            ("accel_v", self.accel_v),
            ("accel_omega", self.accel_omega),
            ("horizon", self.horizon),
            ("dt", self.dt),
            ("clearance_cap", self.clearance_cap),
            ("robot_radius", self.robot_radius),
            ("control_period", self.control_period),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("planner.{name} must be positive, got {v}")));
            }
        }
        if self.resolution < 2 {
            return Err(Error::Config("planner.resolution must be at least 2".into()));
        }
        if self.dt > self.horizon {
            return Err(Error::Config("planner.dt exceeds the horizon".into()));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("planner.beta must be finite".into()));
        }
        Ok(())
    }
}

/// Pinhole camera mounted at the robot origin, looking along +X and pitched
/// down toward the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    /// Height above the ground, m.
    pub mount_height: f64,
    /// Downward pitch, rad.
    pub pitch: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self { width: 320, height: 240, focal: 180.0, cx: 160.0, cy: 120.0, mount_height: 0.6, pitch: 0.5 }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal > 0.0) {
            return Err(Error::Config(format!("camera focal length must be positive, got {}", self.focal)));
        }
        if !(self.mount_height > 0.0) {
            return Err(Error::Config("camera must sit above the ground".into()));
        }
        if !(self.pitch > 0.0 && self.pitch < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(format!("camera pitch {} does not look at the ground ahead", self.pitch)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("camera image must be non-empty".into()));
        }
        Ok(())
    }

    /// Camera axes in the robot frame: image right, image down, optical axis.
    fn axes(&self) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let (s, c) = self.pitch.sin_cos();
        ([0.0, -1.0, 0.0], [-s, 0.0, -c], [c, 0.0, -s])
    }

    /// Pixel coordinates of a robot-frame ground point, if it is in front of
    /// the camera and inside the image.
    pub fn project_ground(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let (s, c) = self.pitch.sin_cos();
        let h = self.mount_height;
        let xc = -y;
        let yc = -x * s + h * c;
        let zc = x * c + h * s;
        if zc <= 1e-9 {
            return None;
        }
        let u = self.cx + self.focal * xc / zc;
        let v = self.cy + self.focal * yc / zc;
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        Some((u, v))
    }

    /// Robot-frame ground point seen at pixel coordinates `(u, v)`; `None`
    /// above the horizon.
    pub fn ground_point(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        let (right, down, axis) = self.axes();
        let a = (u - self.cx) / self.focal;
        let b = (v - self.cy) / self.focal;
        let ray = [0, 1, 2].map(|k| right[k] * a + down[k] * b + axis[k]);
        if ray[2] >= -1e-12 {
            return None;
        }
        let t = self.mount_height / -ray[2];
        Some((t * ray[0], t * ray[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    pub velocity: VelocityCommand,
    pub gait: Gait,
}

/// Disc obstacle in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

/// Unicycle rollout in the robot frame: `ceil(horizon / dt) + 1` poses
/// starting at the origin, the last one at exactly `horizon`.
pub fn rollout(v: f64, omega: f64, horizon: f64, dt: f64) -> Vec<Pose> {
    let steps = ((horizon / dt) - 1e-9).ceil().max(0.0) as usize;
    (0..=steps)
        .map(|k| {
            let t = (k as f64 * dt).min(horizon);
            arc_point(v, omega, t)
        })
        .collect()
}

/// Closed-form pose after moving at `(v, omega)` for `t` seconds from the origin.
pub fn arc_point(v: f64, omega: f64, t: f64) -> Pose {
    if omega.abs() < 1e-12 {
        Pose { x: v * t, y: 0.0, theta: 0.0 }
    } else {
        let r = v / omega;
        let th = omega * t;
        Pose { x: r * th.sin(), y: r * (1.0 - th.cos()), theta: normalize_angle(th) }
    }
}

/// Grid cells crossed by the projected rollout, first visit order, duplicates
/// and out-of-view points dropped.
pub fn project_trajectory(
    points: &[Pose],
    cam: &CameraModel,
    grid_width: usize,
    grid_height: usize,
    n: usize,
) -> Vec<(usize, usize)> {
    let mut cells: Vec<(usize, usize)> = Vec::new();
    for p in points {
        if let Some((u, v)) = cam.project_ground(p.x, p.y) {
            let cell = (v as usize / n, u as usize / n);
            if cell.0 < grid_height && cell.1 < grid_width && !cells.contains(&cell) {
                cells.push(cell);
            }
        }
    }
    cells
}

/// Mean coupled cost over the projected cells, `unseen` when none are visible.
pub fn sur_cost(cells: &[(usize, usize)], map: &CostMap, unseen: f64) -> f64 {
    if cells.is_empty() {
        return unseen;
    }
    cells.iter().map(|&(r, c)| map.get(r, c)).sum::<f64>() / cells.len() as f64
}

/// Half heading error (endpoint orientation vs bearing to goal, over pi) plus
/// half remaining-distance ratio, in [0, 1].
pub fn goal_cost(end: &Pose, current: &Pose, goal: (f64, f64)) -> f64 {
    let d_end = end.distance_to(goal.0, goal.1);
    let d_now = current.distance_to(goal.0, goal.1);
    let heading = if d_end > 1e-9 {
        let bearing = (goal.1 - end.y).atan2(goal.0 - end.x);
        normalize_angle(bearing - end.theta).abs() / std::f64::consts::PI
    } else {
        0.0
    };
    let dist = if d_now > 1e-9 { (d_end / d_now).min(1.0) } else { 0.0 };
    0.5 * heading + 0.5 * dist
}

/// Smallest surface distance from any world-frame rollout point to an obstacle.
pub fn min_clearance(world_points: &[Pose], obstacles: &[Obstacle]) -> f64 {
    let mut m = f64::INFINITY;
    for p in world_points {
        for o in obstacles {
            m = m.min((p.x - o.x).hypot(p.y - o.y) - o.radius);
        }
    }
    m
}

/// `1 - clearance / cap`, clamped to [0, 1].
pub fn obs_cost(clearance: f64, cap: f64) -> f64 {
    (1.0 - clearance / cap).clamp(0.0, 1.0)
}

/// Candidate velocity grid of one gait before any filtering.
pub fn velocity_grid(params: &PlannerParams, gait: Gait) -> Vec<VelocityCommand> {
    let v_cap = params.v_max.min(gait.max_linear_velocity());
    let n = params.resolution;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let v = v_cap * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let omega = params.omega_max * (2.0 * j as f64 - (n - 1) as f64) / (n - 1) as f64;
            out.push(VelocityCommand { v, omega });
        }
    }
    out
}

fn in_window(c: &VelocityCommand, current: &VelocityCommand, params: &PlannerParams) -> bool {
    let dv = params.accel_v * params.control_period + 1e-9;
    let dw = params.accel_omega * params.control_period + 1e-9;
    (c.v - current.v).abs() <= dv && (c.omega - current.omega).abs() <= dw
}

/// Rollout of a candidate mapped into the world frame.
pub fn world_rollout(pose: &Pose, c: &VelocityCommand, params: &PlannerParams) -> Vec<Pose> {
    rollout(c.v, c.omega, params.horizon, params.dt)
        .into_iter()
        .map(|p| {
            let (x, y) = pose.transform_point(p.x, p.y);
            Pose { x, y, theta: normalize_angle(pose.theta + p.theta) }
        })
        .collect()
}

/// Velocity at the start of a cycle once the commanded gait's cap applies.
pub fn capped_velocity(state: &RobotState, gait: Gait) -> VelocityCommand {
    VelocityCommand { v: state.velocity.v.min(gait.max_linear_velocity()), omega: state.velocity.omega }
}

/// Reachable, obstacle-free candidates for `gait`.
pub fn restricted_velocity_space(
    state: &RobotState,
    params: &PlannerParams,
    obstacles: &[Obstacle],
    gait: Gait,
) -> Vec<VelocityCommand> {
    let current = capped_velocity(state, gait);
    velocity_grid(params, gait)
        .into_iter()
        .filter(|c| in_window(c, &current, params))
        .filter(|c| min_clearance(&world_rollout(&state.pose, c, params), obstacles) >= params.robot_radius)
        .collect()
}

/// Objective terms of one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateCost {
    pub goal: f64,
    pub obs: f64,
    /// Surface term as it enters the objective (normalized when configured).
    pub sur: f64,
    pub total: f64,
}

/// Everything the planner needs besides the candidate itself.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext<'a> {
    pub state: &'a RobotState,
    pub coupled: &'a CostMap,
    pub goal: (f64, f64),
    pub obstacles: &'a [Obstacle],
    pub params: &'a PlannerParams,
    pub camera: &'a CameraModel,
    /// Pixels per grid cell side.
    pub n: usize,
}

pub fn candidate_cost(ctx: &PlanContext<'_>, c: &VelocityCommand) -> CandidateCost {
    let p = ctx.params;
    let local = rollout(c.v, c.omega, p.horizon, p.dt);
    let world: Vec<Pose> = world_rollout(&ctx.state.pose, c, p);
    let goal = goal_cost(world.last().expect("rollout has points"), &ctx.state.pose, ctx.goal);
    let obs = obs_cost(min_clearance(&world, ctx.obstacles), p.clearance_cap);
    let cells = project_trajectory(&local, ctx.camera, ctx.coupled.width(), ctx.coupled.height(), ctx.n);
    let raw = sur_cost(&cells, ctx.coupled, p.unseen_cost);
    let sur = if p.normalize_sur { raw / 255.0 } else { raw };
    let total = p.beta[0] * goal + p.beta[1] * obs + p.beta[2] * sur;
    CandidateCost { goal, obs, sur, total }
}

/// Tie order among equal-cost candidates: faster first, then straighter,
/// then rightward.
pub fn tie_order(a: &VelocityCommand, b: &VelocityCommand) -> Ordering {
    b.v.total_cmp(&a.v)
        .then(a.omega.abs().total_cmp(&b.omega.abs()))
        .then(a.omega.total_cmp(&b.omega))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanOutput {
    pub command: VelocityCommand,
    pub gait: Gait,
    /// No admissible candidate; the command is a stop.
    pub freeze: bool,
    pub cost: Option<CandidateCost>,
    pub candidates: usize,
}

/// Picks the admissible candidate with the lowest objective for gait `gait`.
pub fn plan(ctx: &PlanContext<'_>, gait: Gait) -> PlanOutput {
    let space = restricted_velocity_space(ctx.state, ctx.params, ctx.obstacles, gait);
    let mut best: Option<(VelocityCommand, CandidateCost)> = None;
    for c in &space {
        let cost = candidate_cost(ctx, c);
        let better = match &best {
            None => true,
            Some((bc, bcost)) => match cost.total.total_cmp(&bcost.total) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => tie_order(c, bc) == Ordering::Less,
            },
        };
        if better {
            best = Some((*c, cost));
        }
    }
    match best {
        None => PlanOutput { command: VelocityCommand::STOP, gait, freeze: true, cost: None, candidates: 0 },
        Some((mut c, cost)) => {
            c.v = c.v.min(gait.max_linear_velocity());
            PlanOutput { command: c, gait, freeze: false, cost: Some(cost), candidates: space.len() }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::MapKind;
    use proptest::prelude::*;

    fn state(x: f64, y: f64, th: f64, v: f64, w: f64, gait: Gait) -> RobotState {
        RobotState { pose: Pose::new(x, y, th), velocity: VelocityCommand::new(v, w), gait }
    }

    #[test]
    fn straight_rollout() {
        let pts = rollout(0.5, 0.0, 2.0, 0.1);
        assert_eq!(pts.len(), 21);
        let end = pts.last().unwrap();
        assert!((end.x - 1.0).abs() < 1e-12 && end.y == 0.0);
    }

    #[test]
    fn pure_rotation_stays_put() {
        for p in rollout(0.0, 0.2, 2.0, 0.1) {
            assert!(p.x.abs() < 1e-12 && p.y.abs() < 1e-12);
        }
    }

    #[test]
    fn arc_endpoint_closed_form() {
        let pts = rollout(0.3, 0.1, 2.0, 0.1);
        let end = pts.last().unwrap();
        // circle of radius 3 centered at (0, 3)
        let r = 3.0;
        let phi: f64 = 0.2;
        assert!((end.x - r * phi.sin()).abs() < 1e-6);
        assert!((end.y - (r - r * phi.cos())).abs() < 1e-6);
        for p in &pts {
            assert!((p.x.hypot(p.y - r) - r).abs() < 1e-9);
        }
    }

    #[test]
    fn uneven_horizon_ends_exactly() {
        let pts = rollout(1.0, 0.0, 1.05, 0.1);
        assert_eq!(pts.len(), 12);
        assert!((pts.last().unwrap().x - 1.05).abs() < 1e-12);
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let cam = CameraModel::default();
        let d = cam.mount_height / cam.pitch.tan();
        let (u, v) = cam.project_ground(d, 0.0).unwrap();
        assert!((u - cam.cx).abs() < 1e-9 && (v - cam.cy).abs() < 1e-9);
        let (x, y) = cam.ground_point(cam.cx, cam.cy).unwrap();
        assert!((x - d).abs() < 1e-9 && y.abs() < 1e-9);
    }

    #[test]
    fn points_behind_are_dropped() {
        let cam = CameraModel::default();
        assert!(cam.project_ground(-1.0, 0.0).is_none());
        let cells = project_trajectory(&[Pose::new(-0.5, 0.0, 0.0), Pose::new(-2.0, 0.3, 0.0)], &cam, 8, 6, 40);
        assert!(cells.is_empty());
        assert!(cam.ground_point(cam.cx, 0.0).is_none());
    }

    #[test]
    fn left_points_land_left() {
        let cam = CameraModel::default();
        let (u, _) = cam.project_ground(1.0, 0.3).unwrap();
        assert!(u < cam.cx);
    }

    #[test]
    fn ground_ray_round_trip() {
        let cam = CameraModel::default();
        for &(u, v) in &[(10.5, 200.5), (300.0, 60.0), (160.0, 239.0)] {
            let (x, y) = cam.ground_point(u, v).unwrap();
            let (u2, v2) = cam.project_ground(x, y).unwrap();
            assert!((u - u2).abs() < 1e-6 && (v - v2).abs() < 1e-6);
        }
    }

    #[test]
    fn sur_cost_examples() {
        let m = CostMap::filled(3, 1, MapKind::Coupled, 40.0);
        assert_eq!(sur_cost(&[(0, 0), (0, 2)], &m, 127.0), 40.0);
        let m = CostMap::from_values(3, 1, MapKind::Coupled, vec![10.0, 20.0, 60.0]).unwrap();
        assert_eq!(sur_cost(&[(0, 0), (0, 1), (0, 2)], &m, 127.0), 30.0);
        assert_eq!(sur_cost(&[], &m, 127.0), 127.0);
    }

    #[test]
    fn goal_cost_examples() {
        let here = Pose::new(0.0, 0.0, 0.0);
        let facing = Pose::new(1.0, 0.0, 0.0);
        let g = goal_cost(&facing, &here, (5.0, 0.0));
        assert!((g - 0.5 * 4.0 / 5.0).abs() < 1e-12);
        let away = Pose::new(1.0, 0.0, std::f64::consts::PI);
        let g = goal_cost(&away, &here, (5.0, 0.0));
        assert!((g - (0.5 + 0.5 * 0.8)).abs() < 1e-12);
        assert_eq!(goal_cost(&Pose::new(5.0, 0.0, 1.0), &here, (5.0, 0.0)), 0.0);
    }

    #[test]
    fn obs_cost_examples() {
        assert_eq!(obs_cost(min_clearance(&[Pose::new(0.0, 0.0, 0.0)], &[]), 1.0), 0.0);
        assert_eq!(obs_cost(0.5, 1.0), 0.5);
        assert_eq!(obs_cost(2.0, 1.0), 0.0);
        assert_eq!(obs_cost(-0.1, 1.0), 1.0);
    }

    #[test]
    fn infinite_acceleration_keeps_full_grid() {
        let params = PlannerParams { accel_v: f64::INFINITY, accel_omega: f64::INFINITY, ..Default::default() };
        let s = state(0.0, 0.0, 0.0, 0.0, 0.0, Gait::Trot);
        assert_eq!(restricted_velocity_space(&s, &params, &[], Gait::Trot).len(), 169);
    }

    #[test]
    fn wall_ahead_removes_fast_straight_candidates() {
        let params = PlannerParams { accel_v: f64::INFINITY, accel_omega: f64::INFINITY, ..Default::default() };
        let s = state(0.0, 0.0, 0.0, 0.0, 0.0, Gait::Trot);
        // wall of small discs 0.3 m ahead
        let wall: Vec<Obstacle> =
            (-20..=20).map(|k| Obstacle { x: 0.6, y: k as f64 * 0.05, radius: 0.02 }).collect();
        let space = restricted_velocity_space(&s, &params, &wall, Gait::Trot);
        // per-candidate collision oracle
        for c in velocity_grid(&params, Gait::Trot) {
            let mut clear = f64::INFINITY;
            for p in rollout(c.v, c.omega, 2.0, 0.1) {
                for o in &wall {
                    clear = clear.min(((p.x - o.x).powi(2) + (p.y - o.y).powi(2)).sqrt() - o.radius);
                }
            }
            assert_eq!(space.contains(&c), clear >= 0.3, "{c:?}");
        }
        assert!(!space.iter().any(|c| c.v > 0.3 && c.omega == 0.0));
        assert!(space.iter().any(|c| c.v == 0.0));
    }

    #[test]
    fn dynamic_window_limits_change() {
        let params = PlannerParams::default();
        let s = state(0.0, 0.0, 0.0, 0.3, 0.0, Gait::Trot);
        let space = restricted_velocity_space(&s, &params, &[], Gait::Trot);
        assert!(!space.is_empty());
        for c in &space {
            assert!((c.v - 0.3).abs() <= 0.05 + 1e-9 && c.omega.abs() <= 0.05 + 1e-9);
        }
    }

    #[test]
    fn boxed_in_robot_freezes() {
        let params = PlannerParams::default();
        let s = state(0.0, 0.0, 0.0, 0.0, 0.0, Gait::Trot);
        let obstacles = [Obstacle { x: 0.1, y: 0.0, radius: 0.1 }];
        let map = CostMap::filled(8, 6, MapKind::Coupled, 0.0);
        let cam = CameraModel::default();
        let ctx = PlanContext {
            state: &s,
            coupled: &map,
            goal: (5.0, 0.0),
            obstacles: &obstacles,
            params: &params,
            camera: &cam,
            n: 40,
        };
        let out = plan(&ctx, Gait::Trot);
        assert!(out.freeze);
        assert_eq!(out.command, VelocityCommand::STOP);
    }

    #[test]
    fn uniform_map_heads_for_goal() {
        let params = PlannerParams {
            accel_v: f64::INFINITY,
            accel_omega: f64::INFINITY,
            beta: [2.4, 0.0, 0.0],
            ..Default::default()
        };
        let map = CostMap::filled(8, 6, MapKind::Coupled, 90.0);
        let cam = CameraModel::default();
        let s = state(0.0, 0.0, 0.0, 0.0, 0.0, Gait::Trot);
        let ctx = PlanContext {
            state: &s,
            coupled: &map,
            goal: (10.0, 0.0),
            obstacles: &[],
            params: &params,
            camera: &cam,
            n: 40,
        };
        let out = plan(&ctx, Gait::Trot);
        assert_eq!(out.command, VelocityCommand::new(0.6, 0.0));
        // goal to the left: turns left
        let ctx = PlanContext { goal: (3.0, 3.0), ..ctx };
        assert!(plan(&ctx, Gait::Trot).command.omega > 0.0);
    }

    #[test]
    fn crawl_command_is_capped() {
        let params = PlannerParams::default();
        let map = CostMap::filled(8, 6, MapKind::Coupled, 10.0);
        let cam = CameraModel::default();
        let s = state(0.0, 0.0, 0.0, 0.6, 0.0, Gait::Trot);
        let ctx =
            PlanContext { state: &s, coupled: &map, goal: (10.0, 0.0), obstacles: &[], params: &params, camera: &cam, n: 40 };
        let out = plan(&ctx, Gait::Crawl);
        assert!(out.command.v <= Gait::Crawl.max_linear_velocity());
        assert_eq!(out.gait, Gait::Crawl);
    }

    proptest! {
        #[test]
        fn sur_within_map_range(vals in proptest::collection::vec(0.0f64..255.0, 48), v in 0.0f64..0.6, w in -0.2f64..0.2) {
            let map = CostMap::from_values(8, 6, MapKind::Coupled, vals).unwrap();
            let cells = project_trajectory(&rollout(v, w, 2.0, 0.1), &CameraModel::default(), 8, 6, 40);
            prop_assume!(!cells.is_empty());
            let s = sur_cost(&cells, &map, 127.0);
            let lo = cells.iter().map(|&(r, c)| map.get(r, c)).fold(f64::INFINITY, f64::min);
            let hi = cells.iter().map(|&(r, c)| map.get(r, c)).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(s >= lo - 1e-9 && s <= hi + 1e-9);
        }

        #[test]
        fn plan_is_deterministic(seed in 0u64..200) {
            let vals: Vec<f64> = (0..48).map(|i| ((seed as usize * 7 + i * 13) % 256) as f64).collect();
            let map = CostMap::from_values(8, 6, MapKind::Coupled, vals).unwrap();
            let params = PlannerParams::default();
            let cam = CameraModel::default();
            let s = state(0.0, 0.0, 0.3, 0.4, 0.0, Gait::Trot);
            let obstacles = [Obstacle { x: 2.0, y: 0.5, radius: 0.2 }];
            let ctx = PlanContext { state: &s, coupled: &map, goal: (6.0, 2.0), obstacles: &obstacles, params: &params, camera: &cam, n: 40 };
            prop_assert_eq!(plan(&ctx, Gait::Trot), plan(&ctx, Gait::Trot));
        }
    }
}
