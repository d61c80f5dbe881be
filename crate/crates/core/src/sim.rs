//! Deterministic kinematic grasping environment.
//!
//! A free-flying parallel gripper hangs pointing straight down over a plane
//! (roll 0, pitch pi/2; neither is stored nor varies). The agent commands
//! position/yaw deltas and a target aperture; the world pose is the commanded
//! pose plus the sea-state offset, so waves disturb the gripper but never the
//! cube resting on the dock. Grasping is kinematic attachment: once the
//! aligned fingers clamp onto the cube it follows the gripper rigidly until
//! the fingers open past the release slack.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::angles;
use crate::config::EnvConfig;
use crate::error::{ConfigError, StepError};
use crate::reward::{self, LiftThresholds, RewardBreakdown};
use crate::wave::SeaStateSpec;

/// Numbers in one observation frame.
pub const OBS_DIM: usize = 10;
/// Consecutive frames in a stacked observation.
pub const STACK_LEN: usize = 3;
/// Numbers in a stacked observation.
pub const STACKED_OBS_DIM: usize = OBS_DIM * STACK_LEN;
/// Numbers in an action command.
pub const ACTION_DIM: usize = 5;

/// Gripper start pose on reset (base-frame command, meters).
pub const HOME_POSITION: [f64; 3] = [0.0, 0.0, 0.35];
/// Gripper grasp-point height relative to the cube center when ideally
/// positioned for a top grasp.
pub const GRASP_HEIGHT_OFFSET: f64 = 0.0;
/// Fingers within this much of the cube side still count as touching, and
/// opening beyond it releases an attached cube.
pub const APERTURE_CONTACT_SLACK: f64 = 0.005;

// ---------------------------------------------------------------------------
// State types
// ---------------------------------------------------------------------------

/// Gripper pose and finger state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GripperState {
    /// Base-frame position command, always inside the workspace box.
    pub commanded_position: [f64; 3],
    /// Actual pose in the world: command plus the wave offset.
    pub world_position: [f64; 3],
    /// Yaw about z, wrapped to `[-pi, pi)`.
    pub yaw: f64,
    /// Current finger opening in `[0, w_max]`; equals the cube side exactly
    /// while attached.
    pub aperture: f64,
    /// Opening the fingers move toward, from the last `g_state` command.
    pub target_aperture: f64,
}

/// Cube pose. Rests on the plane (center at `side / 2`) unless attached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CubeState {
    pub position: [f64; 3],
    pub yaw: f64,
    pub side: f64,
    pub attached: bool,
}

/// Normalized agent command; every component is clamped to `[-1, 1]` on
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionCommand {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dyaw: f64,
    pub g_state: f64,
}

impl ActionCommand {
    pub fn new(dx: f64, dy: f64, dz: f64, dyaw: f64, g_state: f64) -> Self {
        let c = |v: f64| v.clamp(-1.0, 1.0);
        ActionCommand {
            dx: c(dx),
            dy: c(dy),
            dz: c(dz),
            dyaw: c(dyaw),
            g_state: c(g_state),
        }
    }

    pub fn zero() -> Self {
        ActionCommand::new(0.0, 0.0, 0.0, 0.0, 0.0)
    }

    pub fn from_array(a: [f64; ACTION_DIM]) -> Self {
        ActionCommand::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn to_array(self) -> [f64; ACTION_DIM] {
        [self.dx, self.dy, self.dz, self.dyaw, self.g_state]
    }

    /// Uniform random command, each component in `[-1, 1]`.
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut a = [0.0; ACTION_DIM];
        for v in &mut a {
            *v = rng.random_range(-1.0..1.0);
        }
        ActionCommand::from_array(a)
    }
}

/// One observation frame. `to_array` fixes the slot order:
/// `[cube x, cube y, cube z, gripper x, gripper y, gripper z, dist, g_state,
/// psi_g, psi_cube]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    pub p_cube: [f64; 3],
    pub p_g: [f64; 3],
    /// Euclidean gripper-cube distance; equals `|p_cube - p_g|` by
    /// construction.
    pub dist: f64,
    /// Current aperture mapped to `[-1, 1]` (-1 closed, 1 fully open).
    pub g_state: f64,
    pub psi_g: f64,
    pub psi_cube: f64,
}

impl Observation {
    pub fn to_array(&self) -> [f64; OBS_DIM] {
        [
            self.p_cube[0],
            self.p_cube[1],
            self.p_cube[2],
            self.p_g[0],
            self.p_g[1],
            self.p_g[2],
            self.dist,
            self.g_state,
            self.psi_g,
            self.psi_cube,
        ]
    }
}

/// Three consecutive frames, newest first. Until three steps have elapsed
/// the missing slots repeat the oldest available frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StackedObservation {
    frames: [Observation; STACK_LEN],
}

impl StackedObservation {
    /// Stack for the first frame of an episode: all slots equal `obs`.
    pub fn seeded(obs: Observation) -> Self {
        StackedObservation {
            frames: [obs, obs, obs],
        }
    }

    /// Build a stack from a chronological history (oldest first), padding
    /// with the oldest frame. Returns `None` on an empty history.
    pub fn from_history(history: &[Observation]) -> Option<Self> {
        if history.is_empty() {
            return None;
        }
        let pick = |back: usize| {
            if history.len() > back {
                history[history.len() - 1 - back]
            } else {
                history[0]
            }
        };
        Some(StackedObservation {
            frames: [pick(0), pick(1), pick(2)],
        })
    }

    /// Shift in a new newest frame.
    pub fn push(&mut self, obs: Observation) {
        self.frames[2] = self.frames[1];
        self.frames[1] = self.frames[0];
        self.frames[0] = obs;
    }

    pub fn newest(&self) -> &Observation {
        &self.frames[0]
    }

    pub fn frames(&self) -> &[Observation; STACK_LEN] {
        &self.frames
    }

    /// Flattened `[s_t, s_{t-1}, s_{t-2}]`.
    pub fn to_array(&self) -> [f64; STACKED_OBS_DIM] {
        let mut out = [0.0; STACKED_OBS_DIM];
        for (i, f) in self.frames.iter().enumerate() {
            out[i * OBS_DIM..(i + 1) * OBS_DIM].copy_from_slice(&f.to_array());
        }
        out
    }
}

/// Per-step diagnostics, serializable to JSON for logging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepInfo {
    pub dist: f64,
    pub contact: bool,
    pub attached: bool,
    pub cube_z: f64,
    pub wave_offset: [f64; 3],
}

/// Result of one environment step. `terminated` and `truncated` are never
/// both set: success takes precedence at the time limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepResult {
    pub observation: StackedObservation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

/// Contact predicate tolerances.
#[derive(Debug, Clone, Copy)]
pub struct ContactTolerances {
    pub xy: f64,
    pub z: f64,
    pub yaw: f64,
}

impl From<&EnvConfig> for ContactTolerances {
    fn from(cfg: &EnvConfig) -> Self {
        ContactTolerances {
            xy: cfg.tol_xy,
            z: cfg.tol_z,
            yaw: cfg.tol_yaw,
        }
    }
}

fn pose_aligned(
    world: &[f64; 3],
    yaw: f64,
    cube: &CubeState,
    tol: &ContactTolerances,
) -> bool {
    let dx = world[0] - cube.position[0];
    let dy = world[1] - cube.position[1];
    let horizontal = dx.hypot(dy) <= tol.xy;
    let vertical = (world[2] - (cube.position[2] + GRASP_HEIGHT_OFFSET)).abs() <= tol.z;
    let yaw_ok = angles::quarter_fold(yaw - cube.yaw) <= tol.yaw;
    horizontal && vertical && yaw_ok
}

/// True when both fingers touch the cube: the gripper is aligned with the
/// cube within the tolerances (yaw folded by the cube's 4-fold symmetry) and
/// the fingers are no wider than the cube side plus the contact slack.
pub fn contact_check(gripper: &GripperState, cube: &CubeState, tol: &ContactTolerances) -> bool {
    pose_aligned(&gripper.world_position, gripper.yaw, cube, tol)
        && gripper.aperture <= cube.side + APERTURE_CONTACT_SLACK
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

/// Cube pose relative to the gripper, captured at attach time and reapplied
/// rigidly every step while attached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct GraspOffset {
    /// Cube center in the gripper frame (rotated by the gripper yaw).
    linear: [f64; 3],
    /// Cube yaw minus gripper yaw.
    yaw: f64,
}

/// The environment. Single-threaded; run one instance per rollout thread.
#[derive(Debug, Clone)]
pub struct GraspEnv {
    config: EnvConfig,
    sea: SeaStateSpec,
    thresholds: LiftThresholds,
    tolerances: ContactTolerances,
    max_steps: u32,
    success_terminates: bool,
    gripper: GripperState,
    cube: CubeState,
    grasp_offset: GraspOffset,
    clock: u32,
    stack: StackedObservation,
    done: bool,
}

impl GraspEnv {
    /// Validate the configuration and build an idle environment. `reset`
    /// must be called before the first `step`.
    pub fn new(config: EnvConfig, sea: SeaStateSpec) -> Result<Self, ConfigError> {
        config.validate()?;
        sea.validate()?;
        let home_inside = HOME_POSITION
            .iter()
            .zip(config.workspace_min.iter().zip(&config.workspace_max))
            .all(|(h, (lo, hi))| h >= lo && h <= hi);
        if !home_inside {
            return Err(ConfigError::invalid(
                "workspace_min/workspace_max",
                "workspace box must contain the gripper home pose (0, 0, 0.35)",
            ));
        }
        let thresholds = LiftThresholds::from(&config);
        let tolerances = ContactTolerances::from(&config);
        let gripper = GripperState {
            commanded_position: HOME_POSITION,
            world_position: HOME_POSITION,
            yaw: 0.0,
            aperture: config.w_max,
            target_aperture: config.w_max,
        };
        let cube = CubeState {
            position: [0.0, 0.0, config.cube_side / 2.0],
            yaw: 0.0,
            side: config.cube_side,
            attached: false,
        };
        let placeholder = Observation {
            p_cube: cube.position,
            p_g: gripper.world_position,
            dist: 0.0,
            g_state: 1.0,
            psi_g: 0.0,
            psi_cube: 0.0,
        };
        let mut env = GraspEnv {
            max_steps: config.episode_len_train,
            success_terminates: true,
            thresholds,
            tolerances,
            config,
            sea,
            gripper,
            cube,
            grasp_offset: GraspOffset {
                linear: [0.0; 3],
                yaw: 0.0,
            },
            clock: 0,
            stack: StackedObservation::seeded(placeholder),
            done: true,
        };
        env.stack = StackedObservation::seeded(env.observe());
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn sea_state(&self) -> &SeaStateSpec {
        &self.sea
    }

    pub fn gripper(&self) -> &GripperState {
        &self.gripper
    }

    pub fn cube(&self) -> &CubeState {
        &self.cube
    }

    pub fn clock(&self) -> u32 {
        self.clock
    }

    pub fn max_steps(&self) -> u32 {
        self.max_steps
    }

    /// Override the episode step limit (the evaluation protocol uses a longer
    /// window than training).
    pub fn set_max_steps(&mut self, steps: u32) {
        self.max_steps = steps.max(1);
    }

    /// Whether reaching the success condition ends the episode (default
    /// true). The training harness turns this off so episodes run their full
    /// length and the dense success bonus keeps flowing while the cube is
    /// held high; evaluation keeps it on to measure time-to-success.
    pub fn set_success_termination(&mut self, on: bool) {
        self.success_terminates = on;
    }

    /// True when the cube is attached at or above the success height.
    pub fn success_condition(&self) -> bool {
        self.cube.attached && self.cube.position[2] >= self.config.lift_success
    }

    /// Start a new episode: the cube spawns uniformly in the spawn rectangle
    /// with uniform yaw in `[-pi, pi)`, the gripper returns to the home pose
    /// fully open, and the clock restarts. The seeded generator draws x, y,
    /// then yaw, so identical seeds reproduce identical spawns bitwise.
    pub fn reset(&mut self, seed: u64) -> StackedObservation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = &self.config;
        let x = rng.random_range(cfg.spawn_min[0]..cfg.spawn_max[0]);
        let y = rng.random_range(cfg.spawn_min[1]..cfg.spawn_max[1]);
        let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        self.cube = CubeState {
            position: [x, y, cfg.cube_side / 2.0],
            yaw,
            side: cfg.cube_side,
            attached: false,
        };
        let wave = self.sea.offset(0.0);
        self.gripper = GripperState {
            commanded_position: HOME_POSITION,
            world_position: [
                HOME_POSITION[0] + wave[0],
                HOME_POSITION[1] + wave[1],
                HOME_POSITION[2] + wave[2],
            ],
            yaw: 0.0,
            aperture: cfg.w_max,
            target_aperture: cfg.w_max,
        };
        self.clock = 0;
        self.done = false;
        self.stack = StackedObservation::seeded(self.observe());
        self.stack.clone()
    }

    /// Advance one control step. Errors if the episode already ended.
    pub fn step(&mut self, action: ActionCommand) -> Result<StepResult, StepError> {
        if self.done {
            return Err(StepError::EpisodeOver { t: self.clock });
        }
        self.clock += 1;
        let cfg = self.config.clone();

        // Pose command: scaled deltas, clamped to the workspace, yaw wrapped.
        let deltas = [action.dx, action.dy, action.dz];
        for (i, delta) in deltas.into_iter().enumerate() {
            self.gripper.commanded_position[i] = (self.gripper.commanded_position[i]
                + delta * cfg.beta_pos)
                .clamp(cfg.workspace_min[i], cfg.workspace_max[i]);
        }
        self.gripper.yaw = angles::wrap(self.gripper.yaw + action.dyaw * cfg.beta_yaw);
        self.gripper.target_aperture = cfg.w_max * (action.g_state + 1.0) / 2.0;

        let wave = self.sea.offset(self.clock as f64 * cfg.dt);
        for ((world, commanded), w) in self
            .gripper
            .world_position
            .iter_mut()
            .zip(&self.gripper.commanded_position)
            .zip(&wave)
        {
            *world = commanded + w;
        }

        // Fingers and attachment.
        if self.cube.attached {
            if self.gripper.target_aperture > self.cube.side + APERTURE_CONTACT_SLACK {
                // Release: the cube does not follow this step's motion; it
                // settles straight down onto the plane.
                self.cube.attached = false;
                self.cube.position[2] = self.cube.side / 2.0;
                self.gripper.aperture = self.gripper.target_aperture;
            } else {
                self.gripper.aperture = self.cube.side;
                self.drag_attached_cube();
            }
        } else {
            let aligned = pose_aligned(
                &self.gripper.world_position,
                self.gripper.yaw,
                &self.cube,
                &self.tolerances,
            );
            if aligned && self.gripper.target_aperture <= self.cube.side {
                // The closing fingers stop on the cube faces and clamp.
                self.gripper.aperture = self.cube.side;
                self.cube.attached = true;
                self.grasp_offset = self.capture_grasp_offset();
            } else {
                self.gripper.aperture = self.gripper.target_aperture;
                self.cube.position[2] = self.cube.side / 2.0;
            }
        }

        let contact = contact_check(&self.gripper, &self.cube, &self.tolerances);
        let obs = self.observe();
        let breakdown: RewardBreakdown = reward::step_reward(
            obs.dist,
            obs.psi_cube,
            obs.psi_g,
            contact,
            self.cube.position[2],
            self.cube.attached,
            &self.thresholds,
        );

        let terminated = self.success_terminates && self.success_condition();
        let truncated = !terminated && self.clock >= self.max_steps;
        self.done = terminated || truncated;
        self.stack.push(obs);

        Ok(StepResult {
            observation: self.stack.clone(),
            reward: breakdown.total,
            terminated,
            truncated,
            info: StepInfo {
                dist: obs.dist,
                contact,
                attached: self.cube.attached,
                cube_z: self.cube.position[2],
                wave_offset: wave,
            },
        })
    }

    /// Build the current observation frame from the world state.
    pub fn observe(&self) -> Observation {
        let g = &self.gripper;
        let c = &self.cube;
        let dx = c.position[0] - g.world_position[0];
        let dy = c.position[1] - g.world_position[1];
        let dz = c.position[2] - g.world_position[2];
        Observation {
            p_cube: c.position,
            p_g: g.world_position,
            dist: (dx * dx + dy * dy + dz * dz).sqrt(),
            g_state: 2.0 * g.aperture / self.config.w_max - 1.0,
            psi_g: g.yaw,
            psi_cube: c.yaw,
        }
    }

    fn capture_grasp_offset(&self) -> GraspOffset {
        let g = &self.gripper;
        let rel = [
            self.cube.position[0] - g.world_position[0],
            self.cube.position[1] - g.world_position[1],
            self.cube.position[2] - g.world_position[2],
        ];
        let (s, c) = (-g.yaw).sin_cos();
        GraspOffset {
            linear: [
                c * rel[0] - s * rel[1],
                s * rel[0] + c * rel[1],
                rel[2],
            ],
            yaw: angles::wrap(self.cube.yaw - g.yaw),
        }
    }

    fn drag_attached_cube(&mut self) {
        let g = &self.gripper;
        let off = &self.grasp_offset;
        let (s, c) = g.yaw.sin_cos();
        self.cube.position = [
            g.world_position[0] + c * off.linear[0] - s * off.linear[1],
            g.world_position[1] + s * off.linear[0] + c * off.linear[1],
            g.world_position[2] + off.linear[2],
        ];
        self.cube.yaw = angles::wrap(g.yaw + off.yaw);
    }
}
