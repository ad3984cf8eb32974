//! Human-driver models: IDM car following and MOBIL lane changing.
//!
//! These drive the HDVs in simulation and double as the prediction models
//! inside the safety supervisor, so they are pure functions of the scene.

use serde::{Deserialize, Serialize};

use crate::dynamics::{VehicleState, MAX_ACCEL};
use crate::geometry::RoadGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdmParams {
    pub a_max: f64,
    pub b_comf: f64,
    pub s0: f64,
    pub t_gap: f64,
    pub delta: f64,
    pub v0: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            a_max: 3.0,
            b_comf: 5.0,
            s0: 5.0,
            t_gap: 1.5,
            delta: 4.0,
            v0: 25.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MobilParams {
    pub politeness: f64,
    pub gain_threshold: f64,
    pub b_safe: f64,
}

impl Default for MobilParams {
    fn default() -> Self {
        Self {
            politeness: 0.0,
            gain_threshold: 0.2,
            b_safe: 2.0,
        }
    }
}

/// Bumper-to-bumper gap from `ego` to `leader`.
pub fn gap_to_leader(ego: &VehicleState, leader: &VehicleState) -> f64 {
    leader.rear_bumper() - ego.front_bumper()
}

/// IDM longitudinal acceleration, clamped to the actuator bounds.
pub fn idm_acceleration(ego: &VehicleState, leader: Option<&VehicleState>, p: &IdmParams) -> f64 {
    let v = ego.speed;
    let free_term = 1.0 - (v / p.v0).powf(p.delta);
    let interaction = match leader {
        None => 0.0,
        Some(l) => {
            let s = gap_to_leader(ego, l);
            if s <= 0.0 {
                return -MAX_ACCEL;
            }
            let dv = v - l.speed;
            let s_star = p.s0 + v * p.t_gap + v * dv / (2.0 * (p.a_max * p.b_comf).sqrt());
            (s_star / s).powi(2)
        }
    };
    (p.a_max * (free_term - interaction)).clamp(-MAX_ACCEL, MAX_ACCEL)
}

/// Nearest vehicle ahead of `x` on `lane` (by rear-bumper order), excluding
/// `skip_id`.
pub fn leader_on_lane<'a>(
    vehicles: &'a [VehicleState],
    lane: usize,
    x: f64,
    skip_id: usize,
) -> Option<&'a VehicleState> {
    vehicles
        .iter()
        .filter(|v| v.id != skip_id && v.lane == lane && v.x > x)
        .min_by(|a, b| a.x.partial_cmp(&b.x).unwrap())
}

/// Nearest vehicle behind `x` on `lane`, excluding `skip_id`.
pub fn follower_on_lane<'a>(
    vehicles: &'a [VehicleState],
    lane: usize,
    x: f64,
    skip_id: usize,
) -> Option<&'a VehicleState> {
    vehicles
        .iter()
        .filter(|v| v.id != skip_id && v.lane == lane && v.x <= x)
        .max_by(|a, b| a.x.partial_cmp(&b.x).unwrap())
}

/// MOBIL lane-change decision for `ego` against the other lane, if adjacent.
///
/// Accepts the change iff the induced deceleration on the new follower stays
/// above `-b_safe` and the politeness-weighted acceleration gain exceeds the
/// threshold. All accelerations come from `idm_acceleration`.
pub fn mobil_decision(
    ego: &VehicleState,
    vehicles: &[VehicleState],
    p: &MobilParams,
    idm: &IdmParams,
    road: &RoadGeometry,
) -> Option<usize> {
    let target = 1 - ego.lane;
    if !road.lanes_adjacent_at(ego.x) || !road.lane_exists_at(target, ego.x) {
        return None;
    }

    let ego_on_target = VehicleState {
        lane: target,
        ..*ego
    };

    let new_leader = leader_on_lane(vehicles, target, ego.x, ego.id);
    let new_follower = follower_on_lane(vehicles, target, ego.x, ego.id);

    // Safety criterion: the new follower must not be forced below -b_safe.
    if let Some(nf) = new_follower {
        let induced = idm_acceleration(nf, Some(&ego_on_target), idm);
        if induced < -p.b_safe {
            return None;
        }
    }

    let old_leader = leader_on_lane(vehicles, ego.lane, ego.x, ego.id);
    let a_ego = idm_acceleration(ego, old_leader, idm);
    let a_ego_new = idm_acceleration(&ego_on_target, new_leader, idm);

    let mut follower_gain = 0.0;
    if p.politeness > 0.0 {
        if let Some(nf) = new_follower {
            let before = idm_acceleration(nf, new_leader, idm);
            let after = idm_acceleration(nf, Some(&ego_on_target), idm);
            follower_gain += after - before;
        }
        if let Some(of) = follower_on_lane(vehicles, ego.lane, ego.x, ego.id) {
            let before = idm_acceleration(of, Some(ego), idm);
            let after = idm_acceleration(of, old_leader, idm);
            follower_gain += after - before;
        }
    }

    if a_ego_new - a_ego + p.politeness * follower_gain > p.gain_threshold {
        Some(target)
    } else {
        None
    }
}
