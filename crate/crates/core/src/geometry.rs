//! Road geometry for the on-ramp merging scenario.
//!
//! The road frame is straight: `x` runs along the road, `y` is lateral
//! (positive toward the ramp). Lane 0 is the through lane, lane 1 the
//! ramp/acceleration lane running parallel at one lane width offset. The
//! ramp's merge section is adjacent to the through lane only over
//! `[merge_entrance_x, merge_entrance_x + ramp_length]`; beyond that the
//! ramp lane no longer exists.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadGeometry {
    pub road_length: f64,
    pub merge_entrance_x: f64,
    pub ramp_length: f64,
    pub lane_width: f64,
}

impl Default for RoadGeometry {
    fn default() -> Self {
        Self {
            road_length: 520.0,
            merge_entrance_x: 320.0,
            ramp_length: 100.0,
            lane_width: 4.0,
        }
    }
}

impl RoadGeometry {
    pub const THROUGH_LANE: usize = 0;
    pub const RAMP_LANE: usize = 1;

    /// End of the drivable ramp lane.
    pub fn ramp_end_x(&self) -> f64 {
        self.merge_entrance_x + self.ramp_length
    }

    pub fn lane_center_y(&self, lane: usize) -> f64 {
        lane as f64 * self.lane_width
    }

    /// Lane index implied by a lateral position (nearest lane center).
    pub fn lane_at_y(&self, y: f64) -> usize {
        if y > self.lane_width / 2.0 {
            Self::RAMP_LANE
        } else {
            Self::THROUGH_LANE
        }
    }

    /// Whether `lane` is drivable at longitudinal position `x`.
    pub fn lane_exists_at(&self, lane: usize, x: f64) -> bool {
        match lane {
            Self::THROUGH_LANE => true,
            Self::RAMP_LANE => x <= self.ramp_end_x(),
            _ => false,
        }
    }

    /// Whether a lane change between lane 0 and lane 1 is geometrically
    /// possible at `x`: only along the merge section are the two lanes
    /// adjacent.
    pub fn lanes_adjacent_at(&self, x: f64) -> bool {
        x >= self.merge_entrance_x && x <= self.ramp_end_x()
    }

    /// Distance traveled along the merge section, clamped to `[0, L]`.
    pub fn merge_progress(&self, x: f64) -> f64 {
        (x - self.merge_entrance_x).clamp(0.0, self.ramp_length)
    }

    /// True if a vehicle at (x, lane) is on the ramp's merge section.
    pub fn on_merge_section(&self, lane: usize, x: f64) -> bool {
        lane == Self::RAMP_LANE && x >= self.merge_entrance_x && x <= self.ramp_end_x()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_scenario() {
        let road = RoadGeometry::default();
        assert_eq!(road.road_length, 520.0);
        assert_eq!(road.ramp_end_x(), 420.0);
        assert!(road.merge_entrance_x + road.ramp_length <= road.road_length);
    }

    #[test]
    fn ramp_lane_ends() {
        let road = RoadGeometry::default();
        assert!(road.lane_exists_at(RoadGeometry::RAMP_LANE, 419.0));
        assert!(!road.lane_exists_at(RoadGeometry::RAMP_LANE, 421.0));
        assert!(road.lane_exists_at(RoadGeometry::THROUGH_LANE, 600.0));
    }

    #[test]
    fn adjacency_only_in_merge_section() {
        let road = RoadGeometry::default();
        assert!(!road.lanes_adjacent_at(300.0));
        assert!(road.lanes_adjacent_at(320.0));
        assert!(road.lanes_adjacent_at(420.0));
        assert!(!road.lanes_adjacent_at(420.1));
    }

    #[test]
    fn merge_progress_clamps() {
        let road = RoadGeometry::default();
        assert_eq!(road.merge_progress(300.0), 0.0);
        assert_eq!(road.merge_progress(370.0), 50.0);
        assert_eq!(road.merge_progress(500.0), 100.0);
    }
}
