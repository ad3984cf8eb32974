//! Oriented-rectangle intersection tests (separating axis theorem).

use crate::dynamics::VehicleState;

#[derive(Debug, Clone, Copy)]
pub struct OrientedRect {
    pub cx: f64,
    pub cy: f64,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl OrientedRect {
    pub fn of_vehicle(v: &VehicleState) -> Self {
        Self {
            cx: v.x,
            cy: v.y,
            heading: v.heading,
            half_length: v.length / 2.0,
            half_width: v.width / 2.0,
        }
    }

    pub fn inflated(&self, buffer: f64) -> Self {
        Self {
            half_length: self.half_length + buffer,
            half_width: self.half_width + buffer,
            ..*self
        }
    }

    fn axes(&self) -> [(f64, f64); 2] {
        let (s, c) = self.heading.sin_cos();
        [(c, s), (-s, c)]
    }

    fn corners(&self) -> [(f64, f64); 4] {
        let [(lx, ly), (wx, wy)] = self.axes();
        let (hl, hw) = (self.half_length, self.half_width);
        let mut out = [(0.0, 0.0); 4];
        for (i, (sl, sw)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
            .iter()
            .enumerate()
        {
            out[i] = (
                self.cx + sl * hl * lx + sw * hw * wx,
                self.cy + sl * hl * ly + sw * hw * wy,
            );
        }
        out
    }
}

fn projection_interval(corners: &[(f64, f64); 4], axis: (f64, f64)) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(x, y) in corners {
        let p = x * axis.0 + y * axis.1;
        lo = lo.min(p);
        hi = hi.max(p);
    }
    (lo, hi)
}

/// SAT intersection test; touching counts as intersecting.
pub fn rects_intersect(a: &OrientedRect, b: &OrientedRect) -> bool {
    let ca = a.corners();
    let cb = b.corners();
    for axis in a.axes().into_iter().chain(b.axes()) {
        let (alo, ahi) = projection_interval(&ca, axis);
        let (blo, bhi) = projection_interval(&cb, axis);
        if ahi < blo || bhi < alo {
            return false;
        }
    }
    true
}

/// True iff the two vehicle footprints (5 m x 2 m oriented rectangles)
/// intersect.
pub fn collision_check(a: &VehicleState, b: &VehicleState) -> bool {
    // Cheap reject: rectangles cannot touch beyond the circumradius sum.
    let r = a.length.hypot(a.width) / 2.0 + b.length.hypot(b.width) / 2.0;
    if (a.x - b.x).powi(2) + (a.y - b.y).powi(2) > r * r {
        return false;
    }
    rects_intersect(&OrientedRect::of_vehicle(a), &OrientedRect::of_vehicle(b))
}
