//! The perception, fusion, planning and stepping loop of one trial.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assets::Assets;
use crate::config::Params;
use crate::error::{Error, Result};
use crate::fusion::{
    couple, general_knowledge_map, history_map, proprioception_map, select_gait, EllipseTable, HistoryStore,
};
use crate::grid::{discretize_semantic, normalize_angle, CostMap, Field, Gait, MapKind, Pose, SemanticGrid, TerrainClass, VelocityCommand};
use crate::metrics::ReferenceJointRange;
use crate::planner::{arc_point, capped_velocity, plan, PlanContext, RobotState};
use crate::proprio::{traversability, PcaModel, JOINTS};
use crate::reliability::{
    score_image, BlurOracle, BlurProviderKind, ExternalOracle, GroundTruthOracle, RgbImage, WaveletOracle,
};
use crate::sim::log::{Outcome, Policy, StepRecord, TrialLog, TrialSummary};
use crate::sim::render::{blur_kernel, blur_level, corrupt_segmentation, render_camera, GroundTexture, RenderCache};
use crate::sim::truth::TruthModel;
use crate::sim::world::{Scenario, World};

const STREAM_PROPRIO: u64 = 1;
const STREAM_IMU: u64 = 2;
const STREAM_CAMERA: u64 = 3;
const STREAM_SEGMENTATION: u64 = 4;
const REFERENCE_SEED: u64 = 0x4ef;

/// Everything shared by the trials of one scenario.
#[derive(Debug, Clone)]
pub struct SimContext {
    pub scenario: Scenario,
    pub world: World,
    pub params: Params,
    pub truth: TruthModel,
    pub table: EllipseTable,
    pub pca: PcaModel,
    /// Norm-to-cost scale of the history map.
    pub kappa: f64,
    pub cache: RenderCache,
    pub texture: GroundTexture,
    pub footprint: Vec<(usize, usize)>,
    pub grid_dims: (usize, usize),
    pub reference: ReferenceJointRange,
}

impl SimContext {
    /// Builds the context with scenario overrides applied first, then `extra`.
    pub fn new(scenario: Scenario, assets: &Assets, extra: &[(String, serde_json::Value)]) -> Result<Self> {
        let world = scenario.build_world()?;
        let mut params = Params::default();
        params.apply(scenario.overrides.iter().map(|(k, v)| (k.as_str(), v)))?;
        if let Some(t) = scenario.limits.theta_fail {
            params.sim.theta_fail = t;
        }
        if let Some(k) = scenario.limits.sinkage_steps {
            params.sim.sinkage_steps = k;
        }
        params.apply(extra.iter().map(|(k, v)| (k.as_str(), v)))?;
        params.validate()?;
        if !(scenario.limits.time > 0.0 && scenario.limits.goal_radius > 0.0) {
            return Err(Error::Parse("limits.time and limits.goal_radius must be positive".into()));
        }
        let kappa = match params.fusion.kappa {
            Some(k) => k,
            None => assets.table.norm_cost_scale()?,
        };
        let cache = RenderCache::new(params.camera);
        let texture = GroundTexture::new(&world);
        let n = params.fusion.n;
        let [near, far, half] = params.sim.footprint;
        let footprint = cache.footprint_cells(n, near, far, half);
        if footprint.is_empty() {
            return Err(Error::Config("gait footprint is not visible to the camera".into()));
        }
        let grid_dims = (params.camera.width.div_ceil(n), params.camera.height.div_ceil(n));
        let truth = TruthModel::new();
        let reference = reference_joint_range(&truth, &world, &params)?;
        Ok(Self {
            scenario,
            world,
            params,
            truth,
            table: assets.table.clone(),
            pca: assets.pca.clone(),
            kappa,
            cache,
            texture,
            footprint,
            grid_dims,
            reference,
        })
    }
}

/// Joint band from a stable-ground walk in the steadiest stable gait.
pub fn reference_joint_range(truth: &TruthModel, world: &World, params: &Params) -> Result<ReferenceJointRange> {
    let cell = world.reference_cell();
    let gait = truth.best_gait(TerrainClass::Stable);
    let steps = (params.sim.reference_duration / params.sim.control_dt).round().max(1.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(REFERENCE_SEED);
    let samples: Vec<Vec<f64>> = (0..steps)
        .map(|_| {
            let (raw, _) = truth.sample(cell.terrain, gait, 0.0, params.sim.drift, params.sim.signal_noise, &mut rng);
            raw.joint_positions().to_vec()
        })
        .collect();
    ReferenceJointRange::from_samples(samples.iter().map(|s| s.as_slice()))
}

/// Maps built in one perception cycle, handed to observers.
#[derive(Debug)]
pub struct MapsView<'a> {
    pub step: usize,
    pub t: f64,
    pub state: &'a RobotState,
    /// True terrain under the robot.
    pub terrain: TerrainClass,
    pub xi_measured: Option<f64>,
    /// Reliability weight used in the coupling.
    pub xi_used: f64,
    pub grid: Option<&'a SemanticGrid>,
    pub general: &'a CostMap,
    pub history: &'a Field,
    pub proprio: &'a CostMap,
    pub coupled: &'a CostMap,
}

pub trait TrialObserver {
    fn on_maps(&mut self, view: &MapsView<'_>);
}

impl<F: FnMut(&MapsView<'_>)> TrialObserver for F {
    fn on_maps(&mut self, view: &MapsView<'_>) {
        self(view)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GaitSource {
    Vision,
    Fixed(Gait),
    Proprio,
}

#[derive(Debug, Clone, Copy)]
struct PolicySpec {
    perceive: bool,
    gait: GaitSource,
    xi_fixed: Option<f64>,
    general: bool,
    history: bool,
    proprio: bool,
    direct: bool,
}

fn spec_of(policy: Policy) -> PolicySpec {
    let amco = PolicySpec {
        perceive: true,
        gait: GaitSource::Vision,
        xi_fixed: None,
        general: true,
        history: true,
        proprio: true,
        direct: false,
    };
    match policy {
        Policy::Amco => amco,
        Policy::AmcoNoReliability => PolicySpec { xi_fixed: Some(1.0), ..amco },
        Policy::AmcoNoHistory => PolicySpec { history: false, ..amco },
        Policy::VisionOnly => PolicySpec {
            gait: GaitSource::Fixed(Gait::Trot),
            xi_fixed: Some(1.0),
            history: false,
            proprio: false,
            ..amco
        },
        Policy::ProprioOnly => {
            PolicySpec { perceive: false, gait: GaitSource::Proprio, general: false, history: false, ..amco }
        }
        Policy::Straight => PolicySpec {
            perceive: false,
            gait: GaitSource::Fixed(Gait::Trot),
            general: false,
            history: false,
            proprio: false,
            direct: true,
            ..amco
        },
    }
}

/// Terrain guess from a window of projected readings: the nearest ellipse of
/// the current gait, adopted only after it persists.
struct ProprioClassifier {
    window: VecDeque<[f64; 2]>,
    size: usize,
    hold: usize,
    belief: TerrainClass,
    candidate: Option<(TerrainClass, usize)>,
}

impl ProprioClassifier {
    fn new(size: usize, hold: usize) -> Self {
        Self { window: VecDeque::new(), size, hold, belief: TerrainClass::Stable, candidate: None }
    }

    fn update(&mut self, p: [f64; 2], gait: Gait, table: &EllipseTable) -> Result<TerrainClass> {
        self.window.push_back(p);
        if self.window.len() > self.size {
            self.window.pop_front();
        }
        if self.window.len() < self.size {
            return Ok(self.belief);
        }
        let k = self.window.len() as f64;
        let mean = [
            self.window.iter().map(|q| q[0]).sum::<f64>() / k,
            self.window.iter().map(|q| q[1]).sum::<f64>() / k,
        ];
        let mut guess = TerrainClass::TERRAINS[0];
        let mut best = f64::INFINITY;
        for t in TerrainClass::TERRAINS {
            let d = table.ellipse(t, gait)?.mahalanobis2(mean);
            if d < best {
                best = d;
                guess = t;
            }
        }
        if guess == self.belief {
            self.candidate = None;
        } else {
            let count = match self.candidate {
                Some((c, n)) if c == guess => n + 1,
                _ => 1,
            };
            self.candidate = Some((guess, count));
            if count >= self.hold {
                self.belief = guess;
                self.candidate = None;
                self.window.clear();
            }
        }
        Ok(self.belief)
    }
}

/// Advances the robot by one control period. Returns the new pose and the
/// speed achieved after terrain slowdown.
pub fn step(world: &World, truth: &TruthModel, pose: &Pose, command: &VelocityCommand, gait: Gait, dt: f64) -> (Pose, f64) {
    let slow = match world.cell_at(pose.x, pose.y) {
        Some(cell) if gait != truth.best_gait(cell.terrain) => 1.0 - 0.5 * cell.deformability,
        _ => 1.0,
    };
    let speed = command.v * slow;
    let d = arc_point(speed, command.omega, dt);
    let (x, y) = pose.transform_point(d.x, d.y);
    (Pose { x, y, theta: normalize_angle(pose.theta + d.theta) }, speed)
}

fn oracle_for(params: &Params, level: f64) -> Box<dyn BlurOracle> {
    match params.reliability.blur_provider {
        BlurProviderKind::Wavelet => Box::new(WaveletOracle),
        BlurProviderKind::GroundTruth => Box::new(GroundTruthOracle { blur_level: level }),
        BlurProviderKind::External => Box::new(ExternalOracle {
            program: params.reliability.external_program.clone().unwrap_or_default(),
        }),
    }
}

fn measure_xi(img: &RgbImage, params: &Params, level: f64) -> Result<f64> {
    let r = &params.reliability;
    match score_image(img, oracle_for(params, level).as_ref(), r.rho, r.lambda) {
        Ok(s) => Ok(s.xi),
        // a failing provider falls back to the wavelet surrogate
        Err(Error::Provider(_)) => Ok(score_image(img, &WaveletOracle, r.rho, r.lambda)?.xi),
        Err(e) => Err(e),
    }
}

pub fn run_trial(ctx: &SimContext, policy: Policy, seed: u64) -> Result<TrialLog> {
    run_trial_observed(ctx, policy, seed, None)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn run_trial_observed(
    ctx: &SimContext,
    policy: Policy,
    seed: u64,
    mut observer: Option<&mut dyn TrialObserver>,
) -> Result<TrialLog> {
    let spec = spec_of(policy);
    let p = &ctx.params;
    let sim = &p.sim;
    let world = &ctx.world;
    let dt = sim.control_dt;
    let (gw, gh) = ctx.grid_dims;
    let n = p.fusion.n;

    let mut rng_proprio = stream(seed, STREAM_PROPRIO);
    let mut rng_imu = stream(seed, STREAM_IMU);
    let mut rng_camera = stream(seed, STREAM_CAMERA);
    let mut rng_seg = stream(seed, STREAM_SEGMENTATION);

    let mut state = RobotState { pose: world.start, velocity: VelocityCommand::STOP, gait: Gait::Trot };
    if let GaitSource::Fixed(g) = spec.gait {
        state.gait = g;
    }
    let mut history = HistoryStore::new(p.fusion.history_window);
    let mut classifier = ProprioClassifier::new(sim.proprio_window, sim.proprio_hold);
    let mut pending: VecDeque<(f64, Gait)> = VecDeque::new();
    let zero_history = Field::zeros(gw, gh);
    let blank_general = CostMap::filled(gw, gh, MapKind::General, 0.0);

    let max_steps = (ctx.scenario.limits.time / dt - 1e-9).ceil() as usize;
    let freeze_limit = (sim.freeze_time / dt).round().max(1.0) as usize;
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut over_threshold = 0usize;
    let mut frozen = 0usize;
    let mut path_length = 0.0;
    let mut outcome = Outcome::Timeout;

    for k in 0..max_steps {
        let t = k as f64 * dt;
        let (col, row) = world
            .index_of(state.pose.x, state.pose.y)
            .ok_or_else(|| Error::InvalidInput("robot left the world".into()))?;
        let cell = *world.cell(col, row);

        let (raw, _) =
            ctx.truth.sample(cell.terrain, state.gait, cell.deformability, sim.drift, sim.signal_noise, &mut rng_proprio);
        let phat = ctx.pca.project(&raw)?;
        let norm = traversability(phat);
        let accel = ctx.truth.acceleration(
            cell.terrain,
            state.gait,
            cell.roughness,
            norm,
            sim.accel_base,
            sim.accel_norm_gain,
            &mut rng_imu,
        );
        if cell.deformability > sim.sinkage_deformability && norm > sim.theta_fail {
            over_threshold += 1;
        } else {
            over_threshold = 0;
        }

        let (command, gait, freeze, cost, xi_measured) = if spec.direct {
            let bearing = (world.goal.1 - state.pose.y).atan2(world.goal.0 - state.pose.x);
            let err = normalize_angle(bearing - state.pose.theta);
            let omega = err.clamp(-p.planner.omega_max, p.planner.omega_max);
            let v = p.planner.v_max.min(state.gait.max_linear_velocity());
            (VelocityCommand::new(v, omega), state.gait, false, None, None)
        } else {
            let mut grid = None;
            let mut xi_measured = None;
            if spec.perceive {
                let kernel = blur_kernel(state.velocity.v, cell.roughness, sim.blur_gain, sim.max_blur_kernel);
                let level = blur_level(kernel, sim.max_blur_kernel);
                let (img, labels) = render_camera(&ctx.texture, &state.pose, &ctx.cache, kernel, &mut rng_camera);
                let xi = measure_xi(&img, p, level)?;
                let (seg, _) = corrupt_segmentation(&labels, xi, sim.flip_scale, sim.flip_block, &mut rng_seg);
                grid = Some(discretize_semantic(&seg, n)?);
                xi_measured = Some(xi);
            }
            let general = match (&grid, spec.general) {
                (Some(g), true) => general_knowledge_map(g, &ctx.table, p.fusion.gamma, p.fusion.u)?,
                _ => blank_general.clone(),
            };
            let gait = match spec.gait {
                GaitSource::Fixed(g) => g,
                GaitSource::Vision => {
                    let g = grid.as_ref().expect("vision policies perceive");
                    let latest = pending.back().map_or(state.gait, |&(_, gait)| gait);
                    let wanted = select_gait(g, &ctx.table, &ctx.footprint, latest)?.gait;
                    if wanted != latest {
                        pending.push_back((path_length + sim.gait_switch_distance, wanted));
                    }
                    // the footprint lies ahead; its gait applies once the robot gets there
                    let mut gait = state.gait;
                    while let Some(&(at, g)) = pending.front() {
                        if at > path_length + 1e-9 {
                            break;
                        }
                        gait = g;
                        pending.pop_front();
                    }
                    gait
                }
                GaitSource::Proprio => ctx.table.best_gait(classifier.update(phat, state.gait, &ctx.table)?)?,
            };
            let hist = match (&grid, spec.history) {
                (Some(g), true) => {
                    if let Some(under) = g.cell(gh - 1, (gw - 1) / 2).terrain_majority() {
                        history.record(under, norm, t)?;
                    }
                    history_map(&history, &general, g, p.fusion.alpha, ctx.kappa)?
                }
                _ => zero_history.clone(),
            };
            let proprio = if spec.proprio {
                proprioception_map(norm, gw, gh, p.fusion.u, p.fusion.delta)?
            } else {
                CostMap::filled(gw, gh, MapKind::Proprio, 0.0)
            };
            let xi_used = spec.xi_fixed.or(xi_measured).unwrap_or(0.0);
            let coupled = couple(&general, &hist, &proprio, xi_used)?;
            if let Some(obs) = observer.as_deref_mut() {
                obs.on_maps(&MapsView {
                    step: k,
                    t,
                    state: &state,
                    terrain: cell.terrain,
                    xi_measured,
                    xi_used,
                    grid: grid.as_ref(),
                    general: &general,
                    history: &hist,
                    proprio: &proprio,
                    coupled: &coupled,
                });
            }
            let obstacles = world.obstacles_near(state.pose.x, state.pose.y, sim.obstacle_range);
            let planning_state = RobotState { velocity: capped_velocity(&state, gait), ..state };
            let ctx_plan = PlanContext {
                state: &planning_state,
                coupled: &coupled,
                goal: world.goal,
                obstacles: &obstacles,
                params: &p.planner,
                camera: &p.camera,
                n,
            };
            let out = plan(&ctx_plan, gait);
            (out.command, gait, out.freeze, out.cost, xi_measured)
        };

        let (next, speed) = step(world, &ctx.truth, &state.pose, &command, gait, dt);
        steps.push(StepRecord {
            t,
            pose: state.pose,
            command,
            gait,
            norm,
            accel,
            joints: raw.joint_positions()[..JOINTS].to_vec(),
            xi: xi_measured,
            cell: [col, row],
            terrain: cell.terrain,
            speed,
            freeze,
            cost,
        });
        if over_threshold >= sim.sinkage_steps {
            outcome = Outcome::Sinkage;
            break;
        }
        frozen = if freeze { frozen + 1 } else { 0 };
        state = RobotState { pose: next, velocity: command, gait };
        path_length += speed * dt;
        match world.cell_at(next.x, next.y) {
            None => {
                outcome = Outcome::Collision;
                break;
            }
            Some(c) if c.obstacle => {
                outcome = Outcome::Collision;
                break;
            }
            _ => {}
        }
        if next.distance_to(world.goal.0, world.goal.1) <= ctx.scenario.limits.goal_radius {
            outcome = Outcome::Success;
            break;
        }
        if frozen >= freeze_limit {
            outcome = Outcome::Freeze;
            break;
        }
    }

    let summary = TrialSummary {
        scenario: ctx.scenario.name.clone(),
        policy,
        seed,
        outcome,
        steps: steps.len(),
        duration: steps.len() as f64 * dt,
        start: world.start,
        goal: [world.goal.0, world.goal.1],
        final_pose: state.pose,
        path_length,
    };
    Ok(TrialLog { steps, summary })
}
