//! Vehicle kinematics and the low-level controllers that track the discrete
//! meta-actions.
//!
//! Vehicles follow a kinematic bicycle model integrated with forward Euler at
//! `physics_dt`, with several substeps per 0.2 s decision period. Discrete
//! meta-actions only move the speed/lane targets; proportional controllers
//! turn the targets into acceleration and steering.

use serde::{Deserialize, Serialize};

use crate::geometry::RoadGeometry;

pub const MAX_ACCEL: f64 = 5.0;
pub const MAX_STEERING: f64 = std::f64::consts::FRAC_PI_4;
pub const V_MIN: f64 = 10.0;
pub const V_MAX: f64 = 30.0;
pub const SPEED_DELTA: f64 = 5.0;
pub const VEHICLE_LENGTH: f64 = 5.0;
pub const VEHICLE_WIDTH: f64 = 2.0;

/// Speed-tracking gain [1/s].
pub const K_ACCEL: f64 = 1.0 / 0.6;
/// Lateral-position gain [1/s].
pub const K_LATERAL: f64 = 1.0 / 0.6;
/// Heading gain [1/s].
pub const K_HEADING: f64 = 1.0 / 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VehicleKind {
    Av,
    Hdv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: usize,
    pub kind: VehicleKind,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub lane: usize,
    /// Speed setpoint for AVs; desired (IDM) speed for HDVs.
    pub target_speed: f64,
    pub target_lane: usize,
    pub length: f64,
    pub width: f64,
    pub on_ramp: bool,
}

impl VehicleState {
    pub fn new(id: usize, kind: VehicleKind, x: f64, lane: usize, speed: f64, road: &RoadGeometry) -> Self {
        Self {
            id,
            kind,
            x,
            y: road.lane_center_y(lane),
            heading: 0.0,
            speed,
            lane,
            target_speed: speed,
            target_lane: lane,
            length: VEHICLE_LENGTH,
            width: VEHICLE_WIDTH,
            on_ramp: lane == RoadGeometry::RAMP_LANE,
        }
    }

    pub fn is_av(&self) -> bool {
        self.kind == VehicleKind::Av
    }

    pub fn front_bumper(&self) -> f64 {
        self.x + self.length / 2.0
    }

    pub fn rear_bumper(&self) -> f64 {
        self.x - self.length / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub acceleration: f64,
    pub steering: f64,
}

impl ControlInput {
    pub fn clamped(acceleration: f64, steering: f64) -> Self {
        Self {
            acceleration: acceleration.clamp(-MAX_ACCEL, MAX_ACCEL),
            steering: steering.clamp(-MAX_STEERING, MAX_STEERING),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicParams {
    pub half_wheelbase: f64,
    pub physics_dt: f64,
    pub substeps_per_action: usize,
}

impl Default for KinematicParams {
    fn default() -> Self {
        Self {
            half_wheelbase: 2.5,
            physics_dt: 0.05,
            substeps_per_action: 4,
        }
    }
}

impl KinematicParams {
    /// Decision (policy) period, fixed at 0.2 s by construction.
    pub fn action_dt(&self) -> f64 {
        self.physics_dt * self.substeps_per_action as f64
    }
}

/// The five discrete meta-actions, in logit order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetaAction {
    LaneLeft,
    Idle,
    LaneRight,
    Faster,
    Slower,
}

pub const N_ACTIONS: usize = 5;
pub const ALL_ACTIONS: [MetaAction; N_ACTIONS] = [
    MetaAction::LaneLeft,
    MetaAction::Idle,
    MetaAction::LaneRight,
    MetaAction::Faster,
    MetaAction::Slower,
];

impl MetaAction {
    pub fn index(self) -> usize {
        match self {
            MetaAction::LaneLeft => 0,
            MetaAction::Idle => 1,
            MetaAction::LaneRight => 2,
            MetaAction::Faster => 3,
            MetaAction::Slower => 4,
        }
    }

    pub fn from_index(i: usize) -> Self {
        ALL_ACTIONS[i]
    }
}

/// One forward-Euler step of the kinematic bicycle model.
pub fn bicycle_step(state: &VehicleState, u: ControlInput, dt: f64, kp: &KinematicParams) -> VehicleState {
    let mut next = *state;
    let beta = (0.5 * u.steering.tan()).atan();
    next.x += state.speed * (state.heading + beta).cos() * dt;
    next.y += state.speed * (state.heading + beta).sin() * dt;
    next.heading += state.speed * beta.sin() / kp.half_wheelbase * dt;
    next.speed = (state.speed + u.acceleration * dt).max(0.0);
    next
}

/// Apply a meta-action to the speed/lane targets. Out-of-range requests leave
/// the targets untouched; masking upstream should already prevent them.
pub fn meta_action_to_targets(
    state: &VehicleState,
    action: MetaAction,
    road: &RoadGeometry,
) -> (f64, usize) {
    let mut target_speed = state.target_speed;
    let mut target_lane = state.target_lane;
    match action {
        MetaAction::Idle => {}
        MetaAction::Faster => target_speed = (target_speed + SPEED_DELTA).min(V_MAX),
        MetaAction::Slower => target_speed = (target_speed - SPEED_DELTA).max(V_MIN),
        MetaAction::LaneLeft => {
            if target_lane > 0 {
                target_lane -= 1;
            }
        }
        MetaAction::LaneRight => {
            if road.lane_exists_at(target_lane + 1, state.x) {
                target_lane += 1;
            }
        }
    }
    (target_speed, target_lane)
}

/// Lateral steering cascade shared by AVs and lane-changing HDVs: lateral
/// position error drives a heading reference, heading error drives steering.
pub fn lateral_steering(state: &VehicleState, road: &RoadGeometry, kp: &KinematicParams) -> f64 {
    if state.speed < 0.1 {
        return 0.0;
    }
    let lane_center = road.lane_center_y(state.target_lane);
    let v_lat = K_LATERAL * (lane_center - state.y);
    let heading_ref = (v_lat / state.speed).clamp(-1.0, 1.0).asin();
    (K_HEADING * (heading_ref - state.heading) * kp.half_wheelbase * 2.0 / state.speed)
        .clamp(-MAX_STEERING, MAX_STEERING)
}

/// Proportional tracking of the current targets.
pub fn low_level_control(state: &VehicleState, road: &RoadGeometry, kp: &KinematicParams) -> ControlInput {
    let accel = K_ACCEL * (state.target_speed - state.speed);
    ControlInput::clamped(accel, lateral_steering(state, road, kp))
}
