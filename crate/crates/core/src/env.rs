//! The on-ramp merging POMDP: spawning, observations, action masks, rewards,
//! and synchronous stepping of all vehicles.
//!
//! The scene propagation (`step_scene`) is shared with the safety supervisor,
//! which rolls cloned snapshots forward with HDV noise disabled.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::collision::collision_check;
use crate::driver::{
    idm_acceleration, leader_on_lane, mobil_decision, IdmParams, MobilParams,
};
use crate::dynamics::{
    bicycle_step, lateral_steering, low_level_control, meta_action_to_targets, ControlInput,
    KinematicParams, MetaAction, VehicleKind, VehicleState, MAX_ACCEL, N_ACTIONS, V_MAX, V_MIN,
};
use crate::geometry::RoadGeometry;

pub const OBSERVE_RANGE: f64 = 150.0;
pub const N_NEIGHBORS: usize = 5;
pub const OBS_ROWS: usize = 1 + N_NEIGHBORS;
pub const OBS_FEATURES: usize = 5;

const POSITION_NORM_X: f64 = 150.0;
const POSITION_NORM_Y: f64 = 8.0;
const SPEED_NORM: f64 = 30.0;
/// Headway log-reward clamp keeping gradients bounded near zero gap.
const R_H_CLAMP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficMode {
    Easy,
    Medium,
    Hard,
}

impl TrafficMode {
    /// Inclusive (AV, HDV) count ranges for each density level.
    pub fn count_ranges(self) -> ((usize, usize), (usize, usize)) {
        match self {
            TrafficMode::Easy => ((1, 3), (1, 3)),
            TrafficMode::Medium => ((2, 4), (2, 4)),
            TrafficMode::Hard => ((4, 6), (3, 5)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    Local,
    GlobalAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub w_c: f64,
    pub w_s: f64,
    pub w_h: f64,
    pub w_m: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_c: 200.0,
            w_s: 1.0,
            w_h: 4.0,
            w_m: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub mode: TrafficMode,
    pub spawn_noise: f64,
    pub init_speed_range: (f64, f64),
    pub hdv_desired_speed_range: (f64, f64),
    pub horizon: usize,
    pub weights: RewardWeights,
    pub t_h: f64,
    pub reward_mode: RewardMode,
    /// Relative actuation noise on HDV acceleration and steering; 0 disables.
    pub hdv_noise: f64,
    pub idm: IdmParams,
    pub mobil: MobilParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            mode: TrafficMode::Easy,
            spawn_noise: 1.5,
            init_speed_range: (25.0, 27.0),
            hdv_desired_speed_range: (23.0, 27.0),
            horizon: 100,
            weights: RewardWeights::default(),
            t_h: 1.2,
            reward_mode: RewardMode::Local,
            hdv_noise: 0.05,
            idm: IdmParams::default(),
            mobil: MobilParams::default(),
        }
    }
}

/// Ego-relative feature matrix fed to the policy. Row 0 is the ego with
/// absolute normalized values; rows 1..=5 hold the nearest neighbors sorted
/// by |dx| ascending, zero-filled when absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub rows: [[f64; OBS_FEATURES]; OBS_ROWS],
}

impl Observation {
    pub fn zeros() -> Self {
        Self {
            rows: [[0.0; OBS_FEATURES]; OBS_ROWS],
        }
    }

    /// Split the matrix into the three unit groups consumed by the network
    /// encoders: presence flags, positions (x, y), speeds (vx, vy).
    pub fn feature_groups(&self) -> ([f64; OBS_ROWS], [f64; 2 * OBS_ROWS], [f64; 2 * OBS_ROWS]) {
        let mut present = [0.0; OBS_ROWS];
        let mut pos = [0.0; 2 * OBS_ROWS];
        let mut speed = [0.0; 2 * OBS_ROWS];
        for (i, row) in self.rows.iter().enumerate() {
            present[i] = row[0];
            pos[2 * i] = row[1];
            pos[2 * i + 1] = row[2];
            speed[2 * i] = row[3];
            speed[2 * i + 1] = row[4];
        }
        (present, pos, speed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionMask(pub [bool; N_ACTIONS]);

impl ActionMask {
    pub fn allows(&self, a: MetaAction) -> bool {
        self.0[a.index()]
    }

    pub fn valid_actions(&self) -> impl Iterator<Item = MetaAction> + '_ {
        crate::dynamics::ALL_ACTIONS
            .into_iter()
            .filter(|a| self.0[a.index()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardComponents {
    pub r_c: f64,
    pub r_s: f64,
    pub r_h: f64,
    pub r_m: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct AgentStep {
    pub agent_id: usize,
    pub observation: Observation,
    pub mask: ActionMask,
    pub reward: RewardComponents,
    pub local_reward: f64,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub agents: Vec<AgentStep>,
    pub done: bool,
    pub collision: bool,
    pub crashed_ids: Vec<usize>,
    pub avg_speed: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("action {action:?} for agent {agent} is invalid under its mask")]
    InvalidAction { agent: usize, action: MetaAction },
    #[error("unknown agent id {0}")]
    UnknownAgent(usize),
    #[error("episode already done; call reset")]
    EpisodeDone,
}

#[derive(Debug, Clone)]
pub struct MergeEnv {
    pub road: RoadGeometry,
    pub config: EnvConfig,
    pub kinematics: KinematicParams,
    /// Vehicle index equals vehicle id; vehicles are never removed.
    pub vehicles: Vec<VehicleState>,
    /// Per-vehicle IDM parameters (HDV desired speeds vary per vehicle).
    pub idm_params: Vec<IdmParams>,
    pub t: usize,
    pub done: bool,
    last_actions: Vec<Option<MetaAction>>,
}

impl MergeEnv {
    pub fn reset(config: EnvConfig, rng: &mut impl Rng) -> Self {
        let road = RoadGeometry::default();
        let kinematics = KinematicParams::default();
        let ((av_lo, av_hi), (hdv_lo, hdv_hi)) = config.mode.count_ranges();

        loop {
            let n_av = rng.gen_range(av_lo..=av_hi);
            let n_hdv = rng.gen_range(hdv_lo..=hdv_hi);
            if let Some((vehicles, idm_params)) =
                try_spawn(&config, &road, n_av, n_hdv, rng)
            {
                let n = vehicles.len();
                return Self {
                    road,
                    config,
                    kinematics,
                    vehicles,
                    idm_params,
                    t: 0,
                    done: false,
                    last_actions: vec![None; n],
                };
            }
            eprintln!("warning: spawn infeasible after 100 attempts; redrawing counts");
        }
    }

    pub fn av_ids(&self) -> Vec<usize> {
        self.vehicles
            .iter()
            .filter(|v| v.is_av())
            .map(|v| v.id)
            .collect()
    }

    pub fn last_action(&self, id: usize) -> Option<MetaAction> {
        self.last_actions[id]
    }

    /// Ego-relative observation for one agent.
    pub fn observe(&self, agent_id: usize) -> Observation {
        let ego = &self.vehicles[agent_id];
        let mut obs = Observation::zeros();

        let clamp = |v: f64| v.clamp(-1.0, 1.0);
        let (evx, evy) = velocity_components(ego);
        obs.rows[0] = [
            1.0,
            clamp(ego.x / self.road.road_length),
            clamp(ego.y / POSITION_NORM_Y),
            clamp(evx / SPEED_NORM),
            clamp(evy / SPEED_NORM),
        ];

        let mut candidates: Vec<&VehicleState> = self
            .vehicles
            .iter()
            .filter(|v| {
                v.id != agent_id
                    && v.x <= self.road.road_length
                    && (v.x - ego.x).abs() <= OBSERVE_RANGE
            })
            .collect();
        candidates.sort_by(|a, b| {
            let da = (a.x - ego.x).abs();
            let db = (b.x - ego.x).abs();
            da.partial_cmp(&db).unwrap().then(a.id.cmp(&b.id))
        });

        for (row, v) in obs.rows[1..].iter_mut().zip(candidates.iter()) {
            let (vx, vy) = velocity_components(v);
            *row = [
                1.0,
                clamp((v.x - ego.x) / POSITION_NORM_X),
                clamp((v.y - ego.y) / POSITION_NORM_Y),
                clamp((vx - evx) / SPEED_NORM),
                clamp((vy - evy) / SPEED_NORM),
            ];
        }
        obs
    }

    /// Validity mask over the five meta-actions for one agent.
    pub fn action_mask(&self, agent_id: usize) -> ActionMask {
        let ego = &self.vehicles[agent_id];
        let mut m = [true; N_ACTIONS];
        m[MetaAction::LaneLeft.index()] =
            ego.target_lane > 0 && self.road.lanes_adjacent_at(ego.x);
        m[MetaAction::LaneRight.index()] = ego.target_lane + 1 < 2
            && self.road.lane_exists_at(ego.target_lane + 1, ego.x)
            && self.road.lanes_adjacent_at(ego.x);
        m[MetaAction::Faster.index()] = ego.target_speed < V_MAX;
        m[MetaAction::Slower.index()] = ego.target_speed > V_MIN;
        ActionMask(m)
    }

    /// Leader used for headway purposes. During a lane change (lateral offset
    /// past a quarter lane width toward the target) the target-lane leader is
    /// used instead of the current-lane leader.
    pub fn headway_leader(&self, ego: &VehicleState) -> Option<&VehicleState> {
        headway_leader_in(&self.vehicles, ego, &self.road)
    }

    /// Per-step reward components for one agent.
    pub fn compute_reward(&self, agent_id: usize, crashed: bool) -> RewardComponents {
        let ego = &self.vehicles[agent_id];
        let w = &self.config.weights;

        let r_c = if crashed { -1.0 } else { 0.0 };
        let r_s = ((ego.speed - V_MIN) / (V_MAX - V_MIN)).clamp(0.0, 1.0);

        let r_h = match self.headway_leader(ego) {
            Some(leader) if ego.speed > 0.0 => {
                let d = crate::driver::gap_to_leader(ego, leader);
                if d <= 0.0 {
                    -R_H_CLAMP
                } else {
                    (d / (self.config.t_h * ego.speed)).ln().clamp(-R_H_CLAMP, R_H_CLAMP)
                }
            }
            _ => 0.0,
        };

        let r_m = if self.road.on_merge_section(ego.lane, ego.x) {
            let x = self.road.merge_progress(ego.x);
            let l = self.road.ramp_length;
            -(-(x - l).powi(2) / (10.0 * l)).exp()
        } else {
            0.0
        };

        let total = w.w_c * r_c + w.w_s * r_s + w.w_h * r_h + w.w_m * r_m;
        RewardComponents { r_c, r_s, r_h, r_m, total }
    }

    /// Agent neighborhoods for the local reward: fellow AVs within the
    /// observation range (plus the ego itself).
    pub fn agent_neighborhoods(&self, av_ids: &[usize]) -> Vec<Vec<usize>> {
        av_ids
            .iter()
            .map(|&i| {
                let xi = self.vehicles[i].x;
                av_ids
                    .iter()
                    .copied()
                    .filter(|&j| j == i || (self.vehicles[j].x - xi).abs() <= OBSERVE_RANGE)
                    .collect()
            })
            .collect()
    }

    /// Advance one 0.2 s decision step with one masked action per AV
    /// (aligned with `av_ids()` order).
    pub fn step(
        &mut self,
        actions: &[MetaAction],
        rng: &mut impl Rng,
    ) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        let av_ids = self.av_ids();
        assert_eq!(actions.len(), av_ids.len(), "one action per AV");

        for (&id, &action) in av_ids.iter().zip(actions) {
            if !self.action_mask(id).allows(action) {
                return Err(EnvError::InvalidAction { agent: id, action });
            }
        }
        for (&id, &action) in av_ids.iter().zip(actions) {
            let (ts, tl) = meta_action_to_targets(&self.vehicles[id], action, &self.road);
            self.vehicles[id].target_speed = ts;
            self.vehicles[id].target_lane = tl;
            self.last_actions[id] = Some(action);
        }

        let noise = self.config.hdv_noise;
        let crashed = step_scene(
            &mut self.vehicles,
            &self.idm_params,
            &self.config.mobil,
            &self.road,
            &self.kinematics,
            if noise > 0.0 { Some((noise, rng)) } else { None },
        );

        self.t += 1;
        let av_crashed = crashed
            .iter()
            .any(|&id| self.vehicles[id].is_av());
        self.done = self.t >= self.config.horizon || av_crashed;

        let rewards: Vec<f64> = av_ids
            .iter()
            .map(|&id| self.compute_reward(id, crashed.contains(&id)).total)
            .collect();
        let neighborhoods = self.agent_neighborhoods(&av_ids);
        let locals = local_reward(&rewards, &neighborhoods, self.config.reward_mode, &av_ids);

        let avg_speed = av_ids
            .iter()
            .map(|&id| self.vehicles[id].speed)
            .sum::<f64>()
            / av_ids.len().max(1) as f64;

        let agents = av_ids
            .iter()
            .enumerate()
            .map(|(k, &id)| AgentStep {
                agent_id: id,
                observation: self.observe(id),
                mask: self.action_mask(id),
                reward: self.compute_reward(id, crashed.contains(&id)),
                local_reward: locals[k],
            })
            .collect();

        Ok(StepResult {
            agents,
            done: self.done,
            collision: av_crashed,
            crashed_ids: crashed,
            avg_speed,
        })
    }
}

fn velocity_components(v: &VehicleState) -> (f64, f64) {
    (v.speed * v.heading.cos(), v.speed * v.heading.sin())
}

/// Neighborhood-averaged rewards (or the global mean, per mode). Index `k`
/// in `rewards` corresponds to agent `av_ids[k]`; neighborhood sets contain
/// vehicle ids.
pub fn local_reward(
    rewards: &[f64],
    neighborhoods: &[Vec<usize>],
    mode: RewardMode,
    av_ids: &[usize],
) -> Vec<f64> {
    match mode {
        RewardMode::GlobalAverage => {
            let mean = rewards.iter().sum::<f64>() / rewards.len().max(1) as f64;
            vec![mean; rewards.len()]
        }
        RewardMode::Local => neighborhoods
            .iter()
            .map(|nbhd| {
                let sum: f64 = nbhd
                    .iter()
                    .map(|id| {
                        let k = av_ids.iter().position(|&a| a == *id).unwrap();
                        rewards[k]
                    })
                    .sum();
                sum / nbhd.len() as f64
            })
            .collect(),
    }
}

fn headway_leader_in<'a>(
    vehicles: &'a [VehicleState],
    ego: &VehicleState,
    road: &RoadGeometry,
) -> Option<&'a VehicleState> {
    let mut lane = ego.lane;
    if ego.target_lane != ego.lane {
        let toward = road.lane_center_y(ego.target_lane) - road.lane_center_y(ego.lane);
        let offset = ego.y - road.lane_center_y(ego.lane);
        if offset * toward > 0.0 && offset.abs() > road.lane_width / 4.0 {
            lane = ego.target_lane;
        }
    }
    leader_on_lane(vehicles, lane, ego.x, ego.id)
}

/// Standing obstacle representing the end of the ramp lane; its rear bumper
/// sits exactly at the lane end.
fn ramp_end_phantom(road: &RoadGeometry) -> VehicleState {
    let mut v = VehicleState::new(
        usize::MAX,
        VehicleKind::Hdv,
        road.ramp_end_x() + crate::dynamics::VEHICLE_LENGTH / 2.0,
        RoadGeometry::RAMP_LANE,
        0.0,
        road,
    );
    v.target_speed = 0.0;
    v
}

/// IDM braking toward the end of the ramp lane, treated as a standing
/// obstacle so unmerged vehicles queue instead of overrunning the lane end.
fn ramp_end_guard(v: &VehicleState, road: &RoadGeometry, idm: &IdmParams) -> f64 {
    idm_acceleration(v, Some(&ramp_end_phantom(road)), idm)
}

/// Propagate every vehicle through one decision period (MOBIL decisions, then
/// sub-stepped control + kinematics), returning ids involved in collisions.
///
/// `noise` carries the HDV actuation noise level and RNG; the safety
/// supervisor calls this with `None` for its noise-free predictions.
pub fn step_scene(
    vehicles: &mut [VehicleState],
    idm_params: &[IdmParams],
    mobil: &MobilParams,
    road: &RoadGeometry,
    kp: &KinematicParams,
    noise: Option<(f64, &mut dyn rand::RngCore)>,
) -> Vec<usize> {
    let n = vehicles.len();

    // HDV lane-change decisions at the decision rate, only when not already
    // mid-change. The decision scene includes a phantom standing vehicle at
    // the ramp end so the MOBIL incentive reflects the lane running out.
    let mut decision_scene = vehicles.to_vec();
    decision_scene.push(ramp_end_phantom(road));
    for i in 0..n {
        if vehicles[i].kind != VehicleKind::Hdv || vehicles[i].target_lane != vehicles[i].lane {
            continue;
        }
        let ego = vehicles[i];
        if let Some(target) = mobil_decision(&ego, &decision_scene, mobil, &idm_params[i], road) {
            vehicles[i].target_lane = target;
        }
    }

    // One (accel, steering) noise factor pair per HDV per decision step.
    let mut noise_factors = vec![(1.0, 1.0); n];
    if let Some((level, rng)) = noise {
        for (i, v) in vehicles.iter().enumerate() {
            if v.kind == VehicleKind::Hdv {
                noise_factors[i] = (
                    1.0 + rng.gen_range(-level..=level),
                    1.0 + rng.gen_range(-level..=level),
                );
            }
        }
    }

    let mut crashed = Vec::new();
    for _ in 0..kp.substeps_per_action {
        // Synchronous update: controls from the pre-substep scene.
        let controls: Vec<ControlInput> = (0..n)
            .map(|i| {
                let v = &vehicles[i];
                let mut u = match v.kind {
                    VehicleKind::Av => low_level_control(v, road, kp),
                    VehicleKind::Hdv => {
                        let leader = headway_leader_in(vehicles, v, road);
                        let accel = idm_acceleration(v, leader, &idm_params[i]);
                        let steering = lateral_steering(v, road, kp);
                        let (na, ns) = noise_factors[i];
                        ControlInput::clamped(accel * na, steering * ns)
                    }
                };
                if v.lane == RoadGeometry::RAMP_LANE {
                    u.acceleration = u.acceleration.min(ramp_end_guard(v, road, &idm_params[i]));
                    u.acceleration = u.acceleration.clamp(-MAX_ACCEL, MAX_ACCEL);
                }
                u
            })
            .collect();

        for i in 0..n {
            let next = bicycle_step(&vehicles[i], controls[i], kp.physics_dt, kp);
            vehicles[i] = next;
            vehicles[i].lane = road.lane_at_y(vehicles[i].y);
            vehicles[i].on_ramp = vehicles[i].lane == RoadGeometry::RAMP_LANE;
        }

        for i in 0..n {
            for j in (i + 1)..n {
                if collision_check(&vehicles[i], &vehicles[j]) {
                    if !crashed.contains(&i) {
                        crashed.push(i);
                    }
                    if !crashed.contains(&j) {
                        crashed.push(j);
                    }
                }
            }
        }
    }
    crashed.sort_unstable();
    crashed
}

fn try_spawn(
    config: &EnvConfig,
    road: &RoadGeometry,
    n_av: usize,
    n_hdv: usize,
    rng: &mut impl Rng,
) -> Option<(Vec<VehicleState>, Vec<IdmParams>)> {
    use rand::seq::SliceRandom;

    // 12 spawn points evenly spaced over [0, 220], six per lane.
    let mut points: Vec<(f64, usize)> = Vec::with_capacity(12);
    for k in 0..6 {
        let x = 220.0 * k as f64 / 5.0;
        points.push((x, RoadGeometry::THROUGH_LANE));
        points.push((x, RoadGeometry::RAMP_LANE));
    }

    let total = n_av + n_hdv;
    let mut kinds = vec![VehicleKind::Av; n_av];
    kinds.extend(std::iter::repeat(VehicleKind::Hdv).take(n_hdv));

    for _ in 0..100 {
        let mut pts = points.clone();
        pts.shuffle(rng);
        let mut ks = kinds.clone();
        ks.shuffle(rng);

        let mut vehicles = Vec::with_capacity(total);
        let mut idm = Vec::with_capacity(total);
        for (id, (&(x0, lane), &kind)) in pts.iter().zip(ks.iter()).enumerate() {
            let x = x0 + rng.gen_range(-config.spawn_noise..=config.spawn_noise);
            let speed = rng
                .gen_range(config.init_speed_range.0..=config.init_speed_range.1);
            let mut v = VehicleState::new(id, kind, x, lane, speed, road);
            let mut p = config.idm;
            if kind == VehicleKind::Hdv {
                let v0 = rng.gen_range(
                    config.hdv_desired_speed_range.0..=config.hdv_desired_speed_range.1,
                );
                v.target_speed = v0;
                p.v0 = v0;
            } else {
                v.target_speed = speed.clamp(V_MIN, V_MAX);
            }
            vehicles.push(v);
            idm.push(p);
        }

        let overlap = vehicles.iter().enumerate().any(|(i, a)| {
            vehicles[i + 1..]
                .iter()
                .any(|b| a.lane == b.lane && (a.x - b.x).abs() <= a.length)
        });
        if !overlap {
            return Some((vehicles, idm));
        }
    }
    None
}
