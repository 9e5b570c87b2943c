use serde::{Deserialize, Serialize};

use crate::plant::{wrap_angle, PathSpec, VehicleState};

/// Point of the vehicle whose distance to the path is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefPoint {
    #[default]
    FrontAxle,
    Rear,
    CenterOfGravity,
}

impl RefPoint {
    pub fn position(self, s: &VehicleState, wheelbase: f64) -> (f64, f64) {
        let k = match self {
            RefPoint::FrontAxle => wheelbase,
            RefPoint::Rear => 0.0,
            RefPoint::CenterOfGravity => wheelbase / 2.0,
        };
        (s.x + k * s.theta.cos(), s.y + k * s.theta.sin())
    }
}

/// Lateral offset (positive left of the path) and heading error (vehicle minus path).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingError {
    pub e_p: f64,
    pub theta_e: f64,
    /// Nearest path sample.
    pub index: usize,
    /// Arc length of the projection onto the path polyline.
    pub s: f64,
    /// Polyline tangent heading at the projection.
    pub path_heading: f64,
}

impl TrackingError {
    /// Errors with both signs flipped: positive when the vehicle is right of the
    /// path and the path turns away from the vehicle heading. Stanley and the
    /// predictive controller are written in this frame.
    pub fn control_frame(&self) -> (f64, f64) {
        (-self.e_p, -self.theta_e)
    }
}

/// Projects `(x, y)` onto the polyline segment `[a, b]`; returns (t, distance²).
fn project(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64, clamp: (bool, bool)) -> (f64, f64) {
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let mut t = if len2 > 0.0 { ((px - ax) * dx + (py - ay) * dy) / len2 } else { 0.0 };
    if clamp.0 {
        t = t.max(0.0);
    }
    if clamp.1 {
        t = t.min(1.0);
    }
    let (qx, qy) = (ax + t * dx, ay + t * dy);
    (t, (px - qx) * (px - qx) + (py - qy) * (py - qy))
}

pub fn tracking_error(s: &VehicleState, path: &PathSpec, ref_point: RefPoint, wheelbase: f64) -> TrackingError {
    let (px, py) = ref_point.position(s, wheelbase);
    tracking_error_at(px, py, s.theta, path)
}

/// Tracking error of a point with heading `theta`; the polyline is extended
/// straight beyond its ends.
pub fn tracking_error_at(px: f64, py: f64, theta: f64, path: &PathSpec) -> TrackingError {
    let pts = &path.samples;
    let i = path.nearest_index(px, py);
    if pts.len() < 2 {
        let p = &pts[0];
        let e_p = -(px - p.x) * p.heading.sin() + (py - p.y) * p.heading.cos();
        return TrackingError {
            e_p,
            theta_e: wrap_angle(theta - p.heading),
            index: 0,
            s: p.s,
            path_heading: p.heading,
        };
    }
    let last = pts.len() - 1;
    let mut best: Option<(usize, f64, f64)> = None;
    for seg in [i.saturating_sub(1), i.min(last - 1)] {
        let (a, b) = (&pts[seg], &pts[seg + 1]);
        let (t, d2) = project(px, py, a.x, a.y, b.x, b.y, (seg > 0, seg + 1 < last));
        if best.is_none_or(|(_, _, bd)| d2 < bd) {
            best = Some((seg, t, d2));
        }
    }
    let (seg, t, _) = best.expect("at least one segment");
    let (a, b) = (&pts[seg], &pts[seg + 1]);
    let heading = (b.y - a.y).atan2(b.x - a.x);
    let (qx, qy) = (a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
    let e_p = heading.cos() * (py - qy) - heading.sin() * (px - qx);
    TrackingError {
        e_p,
        theta_e: wrap_angle(theta - heading),
        index: i,
        s: a.s + t * (b.s - a.s),
        path_heading: heading,
    }
}
