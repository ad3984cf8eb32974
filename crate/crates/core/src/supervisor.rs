//! Priority-based multi-step safety supervisor.
//!
//! AVs are scored and processed in descending priority order. For each AV the
//! proposed action's motion primitive is rolled out `T_n` decision steps
//! against model-predicted HDVs, the committed trajectories of
//! already-processed AVs, and last-step actions for the rest. A conflicting
//! action is replaced by the mask-valid action maximizing the worst-case
//! safety margin.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::collision::{rects_intersect, OrientedRect};
use crate::driver::{follower_on_lane, gap_to_leader, leader_on_lane, IdmParams, MobilParams};
use crate::dynamics::{
    meta_action_to_targets, KinematicParams, MetaAction, VehicleState, ALL_ACTIONS,
};
use crate::env::{step_scene, ActionMask, OBSERVE_RANGE};
use crate::geometry::RoadGeometry;

/// Sentinel margin when no relevant vehicle exists.
pub const NO_VEHICLE_MARGIN: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SupervisorConfig {
    pub horizon: usize,
    pub alpha_merge: f64,
    pub alpha_distance: f64,
    pub alpha_headway: f64,
    pub sigma_std: f64,
    pub conflict_buffer: f64,
    pub t_h: f64,
}

impl Default for SupervisorConfig {
    fn default() -> Self {
        Self {
            horizon: 8,
            alpha_merge: 1.0,
            alpha_distance: 1.0,
            alpha_headway: 1.0,
            sigma_std: 0.001,
            conflict_buffer: 0.5,
            t_h: 1.2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PriorityScore {
    pub p_m: f64,
    pub p_d: f64,
    pub p_h: f64,
    pub sigma: f64,
    pub total: f64,
}

/// Per-vehicle predicted poses, one per decision step, length `horizon`.
pub type PredictedTrajectory = Vec<VehicleState>;

/// Scene snapshot the supervisor works on.
#[derive(Debug, Clone)]
pub struct Snapshot<'a> {
    pub vehicles: &'a [VehicleState],
    pub idm_params: &'a [IdmParams],
    pub mobil: &'a MobilParams,
    pub road: &'a RoadGeometry,
    pub kinematics: &'a KinematicParams,
}

#[derive(Debug, Clone)]
pub struct SupervisionResult {
    /// Final safe actions, aligned with the `av_ids` passed to `supervise`.
    pub actions: Vec<MetaAction>,
    /// Whether each AV's proposed action was replaced.
    pub replaced: Vec<bool>,
    /// Set when even the best replacement still conflicts for some AV.
    pub no_safe_action: bool,
    /// Decision latency.
    pub latency_ms: f64,
    /// Predicted scene-steps spent (complexity instrumentation).
    pub predicted_steps: usize,
}

/// Priority score per Eq-style weighting of merge flag, ramp progress and
/// headway urgency, plus a small tie-breaking noise term.
pub fn priority_score(
    vehicle: &VehicleState,
    vehicles: &[VehicleState],
    road: &RoadGeometry,
    cfg: &SupervisorConfig,
    rng: &mut impl Rng,
) -> PriorityScore {
    let on_merge = road.on_merge_section(vehicle.lane, vehicle.x);
    let p_m = if on_merge { 0.5 } else { 0.0 };
    let p_d = if on_merge {
        (road.merge_progress(vehicle.x) / road.ramp_length).clamp(0.0, 1.0)
    } else {
        0.0
    };

    let p_h = match leader_on_lane(vehicles, vehicle.lane, vehicle.x, vehicle.id) {
        Some(leader) if vehicle.speed > 0.0 => {
            let d = gap_to_leader(vehicle, leader);
            if d <= 0.0 {
                10.0
            } else {
                (-(d / (cfg.t_h * vehicle.speed)).ln()).clamp(-10.0, 10.0)
            }
        }
        _ => 0.0,
    };

    let sigma = Normal::new(0.0, cfg.sigma_std).unwrap().sample(rng);
    let total =
        cfg.alpha_merge * p_m + cfg.alpha_distance * p_d + cfg.alpha_headway * p_h + sigma;
    PriorityScore { p_m, p_d, p_h, sigma, total }
}

/// Roll the whole scene forward `horizon` decision steps, noise-free, with
/// the given per-AV meta-actions applied once at the start (index = vehicle
/// id; `None` means Idle / keep targets).
pub fn predict_trajectories(
    snap: &Snapshot,
    assumed_actions: &[Option<MetaAction>],
    horizon: usize,
) -> Vec<PredictedTrajectory> {
    let mut vehicles = snap.vehicles.to_vec();
    for v in vehicles.iter_mut() {
        if v.is_av() {
            if let Some(action) = assumed_actions[v.id] {
                let (ts, tl) = meta_action_to_targets(v, action, snap.road);
                v.target_speed = ts;
                v.target_lane = tl;
            }
        }
    }

    let mut trajs: Vec<PredictedTrajectory> =
        vec![Vec::with_capacity(horizon); vehicles.len()];
    for _ in 0..horizon {
        step_scene(
            &mut vehicles,
            snap.idm_params,
            snap.mobil,
            snap.road,
            snap.kinematics,
            None,
        );
        for (traj, v) in trajs.iter_mut().zip(vehicles.iter()) {
            traj.push(*v);
        }
    }
    trajs
}

/// True iff the two predicted trajectories come within the inflated
/// footprints of each other at any step.
pub fn conflict(a: &PredictedTrajectory, b: &PredictedTrajectory, buffer: f64) -> bool {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).any(|(va, vb)| {
        rects_intersect(
            &OrientedRect::of_vehicle(va).inflated(buffer),
            &OrientedRect::of_vehicle(vb).inflated(buffer),
        )
    })
}

/// Worst-case distance margin of an action's trajectory against the
/// neighbors' trajectories.
///
/// Lane changes measure against leaders and followers on both the current
/// and target lanes; longitudinal actions measure the distance headway to
/// the predicted leader.
pub fn safety_margin(
    action: MetaAction,
    ego_id: usize,
    trajs: &[PredictedTrajectory],
    neighbor_ids: &[usize],
    horizon: usize,
) -> f64 {
    let lane_change = matches!(action, MetaAction::LaneLeft | MetaAction::LaneRight);
    let mut margin = NO_VEHICLE_MARGIN;

    for k in 0..horizon {
        let ego = &trajs[ego_id][k];
        let lanes: Vec<usize> = if lane_change {
            vec![ego.lane, ego.target_lane]
        } else {
            vec![ego.lane]
        };
        for &lane in &lanes {
            let neighbors: Vec<VehicleState> = neighbor_ids
                .iter()
                .map(|&id| trajs[id][k])
                .collect();
            if let Some(leader) = leader_on_lane(&neighbors, lane, ego.x, ego.id) {
                margin = margin.min(gap_to_leader(ego, leader));
            }
            if lane_change {
                if let Some(follower) = follower_on_lane(&neighbors, lane, ego.x, ego.id) {
                    margin = margin.min(gap_to_leader(follower, ego));
                }
            }
        }
    }
    margin
}

/// Fixed least-disruptive preference order for margin ties.
fn preference_rank(a: MetaAction) -> usize {
    match a {
        MetaAction::Idle => 0,
        MetaAction::Slower => 1,
        MetaAction::Faster => 2,
        MetaAction::LaneRight => 3,
        MetaAction::LaneLeft => 4,
    }
}

/// Sequential priority-ordered shielding of the proposed joint action.
///
/// `av_ids`, `proposed`, `masks` and `last_actions` are aligned; the result's
/// `actions` follow the same order.
pub fn supervise(
    snap: &Snapshot,
    av_ids: &[usize],
    proposed: &[MetaAction],
    masks: &[ActionMask],
    last_actions: &[Option<MetaAction>],
    cfg: &SupervisorConfig,
    rng: &mut impl Rng,
) -> SupervisionResult {
    let start = Instant::now();
    let n_vehicles = snap.vehicles.len();
    let mut predicted_steps = 0usize;

    // Descending priority order; probability-zero score ties fall back to id.
    let mut order: Vec<usize> = (0..av_ids.len()).collect();
    let scores: Vec<f64> = av_ids
        .iter()
        .map(|&id| {
            priority_score(&snap.vehicles[id], snap.vehicles, snap.road, cfg, rng).total
        })
        .collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then(av_ids[a].cmp(&av_ids[b]))
    });

    // Assumed action per vehicle id: last-step actions (Idle on the first
    // step) until an AV is processed and commits its safe action.
    let mut assumed: Vec<Option<MetaAction>> = vec![None; n_vehicles];
    for (k, &id) in av_ids.iter().enumerate() {
        assumed[id] = Some(last_actions[k].unwrap_or(MetaAction::Idle));
    }

    // Committed trajectories of already-processed AVs, kept consistent by
    // re-predicting after each commitment.
    let mut committed: Vec<Option<PredictedTrajectory>> = vec![None; n_vehicles];

    let mut actions = proposed.to_vec();
    let mut replaced = vec![false; av_ids.len()];
    let mut no_safe_action = false;

    for &k in &order {
        let ego_id = av_ids[k];

        let neighbor_ids: Vec<usize> = snap
            .vehicles
            .iter()
            .filter(|v| {
                v.id != ego_id && (v.x - snap.vehicles[ego_id].x).abs() <= OBSERVE_RANGE
            })
            .map(|v| v.id)
            .collect();

        let predict_with = |action: MetaAction, assumed: &[Option<MetaAction>]| {
            let mut a = assumed.to_vec();
            a[ego_id] = Some(action);
            predict_trajectories(snap, &a, cfg.horizon)
        };

        let conflicts = |trajs: &[PredictedTrajectory],
                         committed: &[Option<PredictedTrajectory>]| {
            neighbor_ids.iter().any(|&nid| {
                let other = committed[nid].as_ref().unwrap_or(&trajs[nid]);
                conflict(&trajs[ego_id], other, cfg.conflict_buffer)
            })
        };

        let trajs = predict_with(actions[k], &assumed);
        predicted_steps += cfg.horizon;

        let (chosen, chosen_trajs) = if !conflicts(&trajs, &committed) {
            (actions[k], trajs)
        } else {
            // Margin-maximizing replacement over mask-valid actions.
            let mut best: Option<(f64, MetaAction, Vec<PredictedTrajectory>)> = None;
            for cand in ALL_ACTIONS {
                if !masks[k].allows(cand) {
                    continue;
                }
                let cand_trajs = predict_with(cand, &assumed);
                predicted_steps += cfg.horizon;
                let margin =
                    safety_margin(cand, ego_id, &cand_trajs, &neighbor_ids, cfg.horizon);
                let better = match &best {
                    None => true,
                    Some((m, a, _)) => {
                        margin > *m
                            || (margin == *m
                                && preference_rank(cand) < preference_rank(*a))
                    }
                };
                if better {
                    best = Some((margin, cand, cand_trajs));
                }
            }
            let (_, best_action, best_trajs) = best.expect("mask has at least one valid action");
            if conflicts(&best_trajs, &committed) {
                no_safe_action = true;
            }
            replaced[k] = true;
            (best_action, best_trajs)
        };

        actions[k] = chosen;
        assumed[ego_id] = Some(chosen);
        committed[ego_id] = Some(chosen_trajs[ego_id].clone());
    }

    SupervisionResult {
        actions,
        replaced,
        no_safe_action,
        latency_ms: start.elapsed().as_secs_f64() * 1e3,
        predicted_steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::VehicleKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng() -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(1)
    }

    fn av(id: usize, x: f64, lane: usize, speed: f64) -> VehicleState {
        VehicleState::new(id, VehicleKind::Av, x, lane, speed, &RoadGeometry::default())
    }

    fn hdv(id: usize, x: f64, lane: usize, speed: f64) -> VehicleState {
        let mut v =
            VehicleState::new(id, VehicleKind::Hdv, x, lane, speed, &RoadGeometry::default());
        v.target_speed = speed;
        v
    }

    fn snap<'a>(
        vehicles: &'a [VehicleState],
        idm: &'a [IdmParams],
        mobil: &'a MobilParams,
        road: &'a RoadGeometry,
        kp: &'a KinematicParams,
    ) -> Snapshot<'a> {
        Snapshot { vehicles, idm_params: idm, mobil, road, kinematics: kp }
    }

    #[test]
    fn priority_through_lane_at_threshold_headway() {
        let road = RoadGeometry::default();
        let cfg = SupervisorConfig::default();
        let ego = av(0, 100.0, 0, 25.0);
        // Leader exactly at t_h * v bumper-to-bumper.
        let leader = hdv(1, 100.0 + 1.2 * 25.0 + 5.0, 0, 25.0);
        let s = priority_score(&ego, &[ego, leader], &road, &cfg, &mut rng());
        assert_eq!(s.p_m, 0.0);
        assert_eq!(s.p_d, 0.0);
        assert!(s.p_h.abs() < 1e-12);
        assert!((s.total - s.sigma).abs() < 1e-12);
        assert!(s.sigma.abs() < 0.01);
    }

    #[test]
    fn priority_merge_lane_at_ramp_end() {
        let road = RoadGeometry::default();
        let cfg = SupervisorConfig::default();
        let ego = av(0, 420.0, 1, 25.0);
        let leader = hdv(1, 420.0 + 1.2 * 25.0 + 5.0, 1, 25.0);
        let s = priority_score(&ego, &[ego, leader], &road, &cfg, &mut rng());
        assert!((s.total - s.sigma - 1.5).abs() < 1e-12);
    }

    #[test]
    fn priority_double_headway() {
        let road = RoadGeometry::default();
        let cfg = SupervisorConfig::default();
        let ego = av(0, 100.0, 0, 25.0);
        let leader = hdv(1, 100.0 + 2.0 * 1.2 * 25.0 + 5.0, 0, 25.0);
        let s = priority_score(&ego, &[ego, leader], &road, &cfg, &mut rng());
        assert!((s.p_h - -(2.0_f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn predict_free_hdv_constant_speed() {
        let road = RoadGeometry::default();
        let kp = KinematicParams::default();
        let mobil = MobilParams::default();
        let vehicles = [hdv(0, 100.0, 0, 25.0)];
        let idm = [IdmParams { v0: 25.0, ..IdmParams::default() }];
        let s = snap(&vehicles, &idm, &mobil, &road, &kp);
        let trajs = predict_trajectories(&s, &[None], 8);
        assert_eq!(trajs[0].len(), 8);
        for (k, p) in trajs[0].iter().enumerate() {
            assert!((p.speed - 25.0).abs() < 1e-9);
            assert!((p.x - (100.0 + 25.0 * 0.2 * (k + 1) as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn predict_av_idle_constant_speed() {
        let road = RoadGeometry::default();
        let kp = KinematicParams::default();
        let mobil = MobilParams::default();
        let vehicles = [av(0, 100.0, 0, 25.0)];
        let idm = [IdmParams::default()];
        let s = snap(&vehicles, &idm, &mobil, &road, &kp);
        let trajs = predict_trajectories(&s, &[Some(MetaAction::Idle)], 5);
        for p in &trajs[0] {
            assert!((p.speed - 25.0).abs() < 1e-9);
        }
    }

    #[test]
    fn predict_hdv_decelerates_behind_slow_leader() {
        let road = RoadGeometry::default();
        let kp = KinematicParams::default();
        let mobil = MobilParams::default();
        let vehicles = [hdv(0, 100.0, 0, 25.0), hdv(1, 120.0, 0, 10.0)];
        let idm = [
            IdmParams { v0: 25.0, ..IdmParams::default() },
            IdmParams { v0: 10.0, ..IdmParams::default() },
        ];
        let s = snap(&vehicles, &idm, &mobil, &road, &kp);
        let trajs = predict_trajectories(&s, &[None, None], 8);
        // Step-by-step oracle: speed strictly decreasing while closing in.
        for w in trajs[0].windows(2) {
            assert!(w[1].speed < w[0].speed);
        }
    }

    #[test]
    fn conflict_cases() {
        let road = RoadGeometry::default();
        let mk = |x0: f64, y: f64, v: f64| -> PredictedTrajectory {
            (1..=8)
                .map(|k| {
                    let mut s = av(0, x0 + v * 0.2 * k as f64, 0, v);
                    s.y = y;
                    s
                })
                .collect()
        };
        let _ = road;
        let a = mk(100.0, 0.0, 20.0);
        assert!(conflict(&a, &a, 0.5), "identical trajectories conflict");

        let b = mk(100.0, 4.0, 20.0);
        assert!(
            !conflict(&a, &b, 0.5),
            "4 m lateral gap exceeds widths plus buffers"
        );

        // Closing from 10 m bumper gap at 10 m/s relative: the inflated
        // boxes (reach 6 m center-to-center) touch from step 5 on.
        let lead = mk(115.0, 0.0, 10.0);
        assert!(conflict(&a, &lead, 0.5));
        // At 1 m/s relative the gap never closes below 7 m in 8 steps.
        let slow_close = mk(115.0, 0.0, 19.0);
        assert!(!conflict(&a, &slow_close, 0.5));
    }

    #[test]
    fn single_av_unchanged() {
        let road = RoadGeometry::default();
        let kp = KinematicParams::default();
        let mobil = MobilParams::default();
        let vehicles = [av(0, 100.0, 0, 25.0)];
        let idm = [IdmParams::default()];
        let s = snap(&vehicles, &idm, &mobil, &road, &kp);
        let cfg = SupervisorConfig::default();
        let res = supervise(
            &s,
            &[0],
            &[MetaAction::Faster],
            &[ActionMask([false, true, false, true, true])],
            &[None],
            &cfg,
            &mut rng(),
        );
        assert_eq!(res.actions, vec![MetaAction::Faster]);
        assert!(!res.replaced[0]);
        assert!(!res.no_safe_action);
    }

    #[test]
    fn merge_end_av_outranks_through_avs() {
        let road = RoadGeometry::default();
        let cfg = SupervisorConfig::default();
        let merge_av = av(0, 410.0, 1, 20.0);
        let through_av = av(1, 100.0, 0, 25.0);
        let leader = hdv(2, 100.0 + 1.2 * 25.0 + 5.0, 0, 25.0);
        let scene = [merge_av, through_av, leader];
        let mut r = rng();
        let s_merge = priority_score(&merge_av, &scene, &road, &cfg, &mut r);
        let s_through = priority_score(&through_av, &scene, &road, &cfg, &mut r);
        // p_m + p_d = 0.5 + 0.9 = 1.4 beats any p_h <= 0.9 score.
        assert!(s_merge.total > s_through.total);
        assert!(s_merge.total > 1.3);
    }

    #[test]
    fn converging_avs_get_conflict_free_joint_action() {
        let road = RoadGeometry::default();
        let kp = KinematicParams::default();
        let mobil = MobilParams::default();
        // Merge-lane AV and through-lane AV arriving at the merge point
        // together at the same speed.
        let a0 = av(0, 330.0, 1, 25.0);
        let a1 = av(1, 330.0, 0, 25.0);
        let vehicles = [a0, a1];
        let idm = [IdmParams::default(); 2];
        let s = snap(&vehicles, &idm, &mobil, &road, &kp);
        let cfg = SupervisorConfig::default();

        let masks = [
            ActionMask([true, true, false, true, true]), // ramp AV
            ActionMask([false, true, false, true, true]), // through AV
        ];
        let proposed = [MetaAction::LaneLeft, MetaAction::Idle];
        let res = supervise(
            &s,
            &[0, 1],
            &proposed,
            &masks,
            &[None, None],
            &cfg,
            &mut rng(),
        );
        assert!(!res.no_safe_action);

        // The resulting joint action must be conflict-free under a
        // consistent joint prediction.
        let mut assumed = vec![None; 2];
        assumed[0] = Some(res.actions[0]);
        assumed[1] = Some(res.actions[1]);
        let trajs = predict_trajectories(&s, &assumed, cfg.horizon);
        assert!(!conflict(&trajs[0], &trajs[1], cfg.conflict_buffer));

        // Brute-force oracle: some conflict-free joint action exists, and the
        // proposed one was indeed conflicting.
        let mut any_free = false;
        for c0 in ALL_ACTIONS {
            for c1 in ALL_ACTIONS {
                if !masks[0].allows(c0) || !masks[1].allows(c1) {
                    continue;
                }
                let t = predict_trajectories(&s, &[Some(c0), Some(c1)], cfg.horizon);
                if !conflict(&t[0], &t[1], cfg.conflict_buffer) {
                    any_free = true;
                }
            }
        }
        assert!(any_free);
    }

    #[test]
    fn idempotent_on_safe_actions() {
        let road = RoadGeometry::default();
        let kp = KinematicParams::default();
        let mobil = MobilParams::default();
        let vehicles = [av(0, 100.0, 0, 25.0), av(1, 180.0, 0, 25.0)];
        let idm = [IdmParams::default(); 2];
        let s = snap(&vehicles, &idm, &mobil, &road, &kp);
        let cfg = SupervisorConfig::default();
        let masks = [ActionMask([false, true, false, true, true]); 2];
        let proposed = [MetaAction::Idle, MetaAction::Idle];
        let res = supervise(&s, &[0, 1], &proposed, &masks, &[None, None], &cfg, &mut rng());
        assert_eq!(res.actions, proposed.to_vec());
        assert_eq!(res.replaced, vec![false, false]);
    }

    #[test]
    fn workload_bound() {
        let road = RoadGeometry::default();
        let kp = KinematicParams::default();
        let mobil = MobilParams::default();
        // Dense convoy to force replacements.
        let vehicles = [
            av(0, 100.0, 0, 28.0),
            av(1, 112.0, 0, 18.0),
            av(2, 124.0, 0, 14.0),
        ];
        let idm = [IdmParams::default(); 3];
        let s = snap(&vehicles, &idm, &mobil, &road, &kp);
        let cfg = SupervisorConfig::default();
        let masks = [ActionMask([false, true, false, true, true]); 3];
        let proposed = [MetaAction::Faster, MetaAction::Idle, MetaAction::Idle];
        let res = supervise(
            &s,
            &[0, 1, 2],
            &proposed,
            &masks,
            &[None, None, None],
            &cfg,
            &mut rng(),
        );
        let bound = 3 * (1 + 5) * cfg.horizon;
        assert!(res.predicted_steps <= bound, "{} > {bound}", res.predicted_steps);
    }

    #[test]
    fn replacement_respects_mask() {
        let road = RoadGeometry::default();
        let kp = KinematicParams::default();
        let mobil = MobilParams::default();
        // Fast AV closing on a slow leader: Faster conflicts; only masked
        // actions may replace it.
        let vehicles = [av(0, 100.0, 0, 30.0), hdv(1, 118.0, 0, 5.0)];
        let idm = [
            IdmParams::default(),
            IdmParams { v0: 5.0, ..IdmParams::default() },
        ];
        let s = snap(&vehicles, &idm, &mobil, &road, &kp);
        let cfg = SupervisorConfig::default();
        let mask = ActionMask([false, true, false, false, true]);
        let res = supervise(
            &s,
            &[0],
            &[MetaAction::Idle],
            &[mask],
            &[None],
            &cfg,
            &mut rng(),
        );
        assert!(res.replaced[0]);
        assert!(mask.allows(res.actions[0]));
        assert_eq!(res.actions[0], MetaAction::Slower);
    }

    #[test]
    fn empty_margin_is_sentinel() {
        let road = RoadGeometry::default();
        let kp = KinematicParams::default();
        let mobil = MobilParams::default();
        let vehicles = [av(0, 100.0, 0, 25.0)];
        let idm = [IdmParams::default()];
        let s = snap(&vehicles, &idm, &mobil, &road, &kp);
        let trajs = predict_trajectories(&s, &[Some(MetaAction::Idle)], 8);
        let m = safety_margin(MetaAction::Idle, 0, &trajs, &[], 8);
        assert_eq!(m, NO_VEHICLE_MARGIN);
    }

    #[test]
    fn keep_lane_margin_constant_gap() {
        let road = RoadGeometry::default();
        let kp = KinematicParams::default();
        let mobil = MobilParams::default();
        // Leader steady 20 m ahead (center-to-center 25 m), equal speeds.
        let vehicles = [av(0, 100.0, 0, 25.0), hdv(1, 125.0, 0, 25.0)];
        let idm = [
            IdmParams::default(),
            IdmParams { v0: 25.0, ..IdmParams::default() },
        ];
        let s = snap(&vehicles, &idm, &mobil, &road, &kp);
        let trajs = predict_trajectories(&s, &[Some(MetaAction::Idle)], 8);
        let m = safety_margin(MetaAction::Idle, 0, &trajs, &[1], 8);
        assert!((m - 20.0).abs() < 0.2, "margin {m}");
    }
}
