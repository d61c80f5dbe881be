//! Evaluation harness: run a frozen policy across sea states with seeded
//! trials, report success rates and per-trial distance traces.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::angles;
use crate::config::EnvConfig;
use crate::error::{ConfigError, HarnessError, SacError};
use crate::sac::{PolicyCheckpoint, SacAgent, SacConfig};
use crate::sim::{ActionCommand, GraspEnv, StackedObservation, ACTION_DIM, STACKED_OBS_DIM};
use crate::wave::SeaStateSpec;

/// The test protocol: per-state trial count, simulated time limit, lift
/// height that counts as success, which sea states to run, and the base
/// seed. Trial `i` uses seed `base_seed + i` for every state, so states
/// share spawn sequences and differ only in the waves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalProtocol {
    pub trials: u32,
    pub time_limit_s: f64,
    pub success_lift: f64,
    pub sea_states: Vec<u8>,
    pub base_seed: u64,
    /// Custom wave parameters replacing the preset for matching codes, so a
    /// config file can test non-default amplitudes, periods or phases.
    pub wave_overrides: Vec<SeaStateSpec>,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            trials: 15,
            time_limit_s: 30.0,
            success_lift: 0.20,
            sea_states: vec![0, 1, 2],
            base_seed: crate::DEFAULT_SEED,
            wave_overrides: Vec::new(),
        }
    }
}

impl EvalProtocol {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(ConfigError::invalid("trials", "must be at least 1"));
        }
        if !(self.time_limit_s.is_finite() && self.time_limit_s > 0.0) {
            return Err(ConfigError::invalid("time_limit_s", "must be positive"));
        }
        if !(self.success_lift.is_finite() && self.success_lift > 0.0) {
            return Err(ConfigError::invalid("success_lift", "must be positive"));
        }
        if self.sea_states.is_empty() {
            return Err(ConfigError::invalid("sea_states", "must list at least one state"));
        }
        for &code in &self.sea_states {
            if code > 2 {
                return Err(ConfigError::UnknownSeaState(code));
            }
        }
        for w in &self.wave_overrides {
            w.validate()?;
        }
        Ok(())
    }

    /// Step budget implied by the time limit and the control period.
    pub fn max_steps(&self, dt: f64) -> u32 {
        ((self.time_limit_s / dt).round() as u32).max(1)
    }

    /// Wave parameters for a code: the matching override when one is
    /// configured, otherwise the preset.
    pub fn wave_for(&self, code: u8) -> Result<SeaStateSpec, ConfigError> {
        match self.wave_overrides.iter().find(|w| w.wmo_code == code) {
            Some(custom) => Ok(custom.clone()),
            None => SeaStateSpec::preset(code),
        }
    }
}

/// Anything that can drive the gripper given stacked observations.
pub trait Policy {
    /// Called once before each trial.
    fn begin_trial(&mut self) {}
    fn act(&mut self, obs: &StackedObservation) -> Result<ActionCommand, SacError>;
}

/// Deterministic (mean-action) wrapper around a SAC agent.
pub struct AgentPolicy<'a> {
    agent: &'a SacAgent,
}

impl<'a> AgentPolicy<'a> {
    pub fn new(agent: &'a SacAgent) -> Self {
        AgentPolicy { agent }
    }
}

impl Policy for AgentPolicy<'_> {
    fn act(&mut self, obs: &StackedObservation) -> Result<ActionCommand, SacError> {
        self.agent.deterministic_action(obs)
    }
}

/// Hand-scripted go-to-cube, close, lift controller. It reads only the
/// observation (full pose knowledge) and the environment geometry, so it
/// validates the task and harness independently of any learning.
pub struct ScriptedPolicy {
    beta_pos: f64,
    beta_yaw: f64,
    tol_xy: f64,
    tol_z: f64,
    tol_yaw: f64,
    g_attached: f64,
    hover: f64,
}

impl ScriptedPolicy {
    pub fn new(cfg: &EnvConfig) -> Self {
        ScriptedPolicy {
            beta_pos: cfg.beta_pos,
            beta_yaw: cfg.beta_yaw,
            tol_xy: cfg.tol_xy,
            tol_z: cfg.tol_z,
            tol_yaw: cfg.tol_yaw,
            // Aperture reading that indicates fingers clamped on the cube.
            g_attached: 2.0 * cfg.cube_side / cfg.w_max - 1.0,
            hover: 0.10,
        }
    }
}

impl Policy for ScriptedPolicy {
    fn act(&mut self, obs: &StackedObservation) -> Result<ActionCommand, SacError> {
        let o = obs.newest();
        let err = [
            o.p_cube[0] - o.p_g[0],
            o.p_cube[1] - o.p_g[1],
            o.p_cube[2] - o.p_g[2],
        ];
        let h_err = err[0].hypot(err[1]);
        let yaw_err = angles::quarter_fold_signed(o.psi_cube - o.psi_g);
        let clamp = |v: f64| v.clamp(-1.0, 1.0);
        let dx = clamp(err[0] / self.beta_pos);
        let dy = clamp(err[1] / self.beta_pos);
        let dyaw = clamp(yaw_err / self.beta_yaw);

        let holding = (o.g_state - self.g_attached).abs() < 1e-9 && o.dist < 0.1;
        if holding {
            // Carry the cube straight up; the episode ends at the success height.
            return Ok(ActionCommand::new(0.0, 0.0, 1.0, 0.0, -1.0));
        }
        if o.g_state < self.g_attached - 0.05 {
            // Fingers closed on air: reopen and go around again.
            return Ok(ActionCommand::new(dx, dy, 1.0, dyaw, 1.0));
        }

        let aligned_xy = h_err < self.tol_xy * 0.5 && yaw_err.abs() < self.tol_yaw * 0.5;
        if !aligned_xy {
            // Track the cube laterally at hover height above it.
            let dz = clamp((o.p_cube[2] + self.hover - o.p_g[2]) / self.beta_pos);
            return Ok(ActionCommand::new(dx, dy, dz, dyaw, 1.0));
        }
        let dz = clamp(err[2] / self.beta_pos);
        if err[2].abs() < self.tol_z * 0.5 {
            // In the grasp pocket: close while holding position.
            return Ok(ActionCommand::new(dx, dy, dz, dyaw, -1.0));
        }
        // Descend onto the cube.
        Ok(ActionCommand::new(dx, dy, dz, dyaw, 1.0))
    }
}

/// One recorded evaluation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    /// Simulated time in seconds at the end of the step.
    pub t: f64,
    pub dist: f64,
    pub cube_z: f64,
    pub wave: [f64; 3],
    pub reward: f64,
}

/// Distance/heights time series for one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialTrace {
    pub rows: Vec<TraceRow>,
    pub success: bool,
    /// Steps until success termination (1-based), when successful.
    pub steps_to_success: Option<u32>,
}

/// Run one seeded trial of `policy` and record its trace.
pub fn run_trial(
    policy: &mut dyn Policy,
    env_config: &EnvConfig,
    sea: &SeaStateSpec,
    seed: u64,
    max_steps: u32,
) -> Result<TrialTrace, HarnessError> {
    let mut env = GraspEnv::new(env_config.clone(), sea.clone())?;
    env.set_max_steps(max_steps);
    policy.begin_trial();
    let mut obs = env.reset(seed);
    let mut rows = Vec::new();
    let mut success = false;
    let mut steps_to_success = None;
    for step in 1..=max_steps {
        let action = policy.act(&obs)?;
        let result = env.step(action)?;
        rows.push(TraceRow {
            t: f64::from(step) * env_config.dt,
            dist: result.info.dist,
            cube_z: result.info.cube_z,
            wave: result.info.wave_offset,
            reward: result.reward,
        });
        obs = result.observation;
        if result.terminated {
            success = true;
            steps_to_success = Some(step);
            break;
        }
        if result.truncated {
            break;
        }
    }
    Ok(TrialTrace {
        rows,
        success,
        steps_to_success,
    })
}

/// Peak-decay statistic: the maximum distance in the first quarter of the
/// trace minus the maximum in the last quarter (up to success, when it
/// happened). Positive when the approach peaks shrink over time.
pub fn distance_decay_stat(trace: &TrialTrace) -> f64 {
    let n = trace
        .steps_to_success
        .map(|s| s as usize)
        .unwrap_or(trace.rows.len())
        .min(trace.rows.len());
    assert!(n > 0, "distance_decay_stat needs a nonempty trace");
    let q = (n / 4).max(1);
    let max_over = |rows: &[TraceRow]| rows.iter().map(|r| r.dist).fold(f64::NEG_INFINITY, f64::max);
    let first = max_over(&trace.rows[..q]);
    let last = max_over(&trace.rows[n - q..n]);
    first - last
}

/// Aggregate results for one sea state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub success_rate: f64,
    pub trials: u32,
    /// Mean steps-to-success over successful trials; absent when none.
    pub mean_steps: Option<f64>,
    pub trace_files: Vec<String>,
}

/// Per-state trial traces returned alongside an [`EvalReport`].
pub type StateTraces = Vec<(u8, Vec<TrialTrace>)>;

/// Full evaluation report, keyed by sea state code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub states: BTreeMap<u8, StateReport>,
}

impl EvalReport {
    pub fn success_rate(&self, state: u8) -> Option<f64> {
        self.states.get(&state).map(|s| s.success_rate)
    }
}

/// Evaluate a policy under the protocol. When `out_dir` is given, per-trial
/// traces are written as CSV (`state<code>_trial<idx>.csv` with columns
/// `t,dist,cube_z,wave_x,wave_y,wave_z,reward`) along with a
/// `summary.json` holding the [`EvalReport`].
pub fn evaluate_policy(
    policy: &mut dyn Policy,
    env_config: &EnvConfig,
    protocol: &EvalProtocol,
    out_dir: Option<&Path>,
) -> Result<(EvalReport, StateTraces), HarnessError> {
    env_config.validate()?;
    protocol.validate()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::OutputDir {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let mut env_config = env_config.clone();
    env_config.lift_success = protocol.success_lift;
    let max_steps = protocol.max_steps(env_config.dt);

    let mut states = BTreeMap::new();
    let mut all_traces = Vec::new();
    for &code in &protocol.sea_states {
        let sea = protocol.wave_for(code)?;
        let mut traces = Vec::with_capacity(protocol.trials as usize);
        let mut successes = 0u32;
        let mut steps_sum = 0u64;
        let mut trace_files = Vec::new();
        for trial in 0..protocol.trials {
            let seed = protocol.base_seed.wrapping_add(trial as u64);
            let trace = run_trial(policy, &env_config, &sea, seed, max_steps)?;
            if trace.success {
                successes += 1;
                steps_sum += u64::from(trace.steps_to_success.unwrap_or(0));
            }
            if let Some(dir) = out_dir {
                let name = format!("state{code}_trial{trial:02}.csv");
                write_trace_csv(&dir.join(&name), &trace)?;
                trace_files.push(name);
            }
            traces.push(trace);
        }
        let report = StateReport {
            success_rate: successes as f64 / protocol.trials as f64,
            trials: protocol.trials,
            mean_steps: (successes > 0).then(|| steps_sum as f64 / successes as f64),
            trace_files,
        };
        states.insert(code, report);
        all_traces.push((code, traces));
    }
    let report = EvalReport { states };
    if let Some(dir) = out_dir {
        let json = serde_json::to_string_pretty(&report.states)
            .expect("report serializes");
        std::fs::write(dir.join("summary.json"), json)?;
    }
    Ok((report, all_traces))
}

/// Load a checkpoint, verify its dimensions against the grasping task, and
/// evaluate its deterministic policy under the protocol.
pub fn evaluate_checkpoint(
    checkpoint_path: &Path,
    env_config: &EnvConfig,
    sac_config: &SacConfig,
    protocol: &EvalProtocol,
    out_dir: Option<&Path>,
) -> Result<(EvalReport, StateTraces), HarnessError> {
    let ckpt = PolicyCheckpoint::load(checkpoint_path)?;
    ckpt.ensure_dims(STACKED_OBS_DIM as u32, ACTION_DIM as u32)?;
    let agent = SacAgent::from_checkpoint(&ckpt, sac_config.clone())?;
    let mut policy = AgentPolicy::new(&agent);
    evaluate_policy(&mut policy, env_config, protocol, out_dir)
}

fn write_trace_csv(path: &Path, trace: &TrialTrace) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|source| HarnessError::OutputDir {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    writeln!(w, "t,dist,cube_z,wave_x,wave_y,wave_z,reward")?;
    for r in &trace.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.t, r.dist, r.cube_z, r.wave[0], r.wave[1], r.wave[2], r.reward
        )?;
    }
    w.flush()?;
    Ok(())
}
