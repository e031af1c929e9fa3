//! Junction layout: four two-lane roads meeting in a square box centred on
//! the origin, right-hand traffic, one lane per direction.
//!
//! Sides are numbered counter-clockwise from the south (0 = south, 1 = east,
//! 2 = north, 3 = west). Every route is the south-approach route of the same
//! turn rotated by a multiple of 90°.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::config::Task;

pub const VEHICLE_LENGTH: f64 = 5.0;
pub const VEHICLE_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Wraps an angle into `(−π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layout {
    pub half_length: f64,
    pub lane_width: f64,
}

/// Entry side plus turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Route {
    pub approach: u8,
    pub turn: Task,
}

/// A physical lane: the inbound or outbound half of one road.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lane {
    Inbound(u8),
    Outbound(u8),
}

impl Route {
    pub fn new(approach: u8, turn: Task) -> Self {
        assert!(approach < 4, "approach side out of range");
        Self { approach, turn }
    }

    pub fn exit_side(&self) -> u8 {
        let offset = match self.turn {
            Task::Straight => 2,
            Task::Right => 1,
            Task::Left => 3,
        };
        (self.approach + offset) % 4
    }

    /// Dense index in `0..12`.
    pub fn index(&self) -> usize {
        let t = match self.turn {
            Task::Left => 0,
            Task::Straight => 1,
            Task::Right => 2,
        };
        usize::from(self.approach) * 3 + t
    }

    pub fn all() -> impl Iterator<Item = Route> {
        (0..4u8).flat_map(|a| Task::ALL.into_iter().map(move |t| Route::new(a, t)))
    }
}

impl Layout {
    pub fn approach_length(&self) -> f64 {
        self.half_length - self.lane_width
    }

    fn radius(&self, turn: Task) -> f64 {
        let c = self.lane_width / 2.0;
        match turn {
            Task::Right => self.lane_width - c,
            Task::Left => self.lane_width + c,
            Task::Straight => f64::INFINITY,
        }
    }

    pub fn turn_length(&self, turn: Task) -> f64 {
        match turn {
            Task::Straight => 2.0 * self.lane_width,
            _ => self.radius(turn) * FRAC_PI_2,
        }
    }

    /// Arc length where the exit leg starts.
    pub fn exit_start(&self, turn: Task) -> f64 {
        self.approach_length() + self.turn_length(turn)
    }

    pub fn route_length(&self, route: &Route) -> f64 {
        self.exit_start(route.turn) + self.approach_length()
    }

    fn canonical_pose(&self, turn: Task, s: f64) -> Pose {
        let w = self.lane_width;
        let c = w / 2.0;
        let la = self.approach_length();
        if s <= la {
            return Pose { x: c, y: -self.half_length + s, heading: FRAC_PI_2 };
        }
        let u = s - la;
        let tl = self.turn_length(turn);
        if u <= tl {
            return match turn {
                Task::Straight => Pose { x: c, y: -w + u, heading: FRAC_PI_2 },
                Task::Right => {
                    let r = self.radius(turn);
                    let phi = PI - u / r;
                    Pose { x: w + r * phi.cos(), y: -w + r * phi.sin(), heading: phi - FRAC_PI_2 }
                }
                Task::Left => {
                    let r = self.radius(turn);
                    let phi = u / r;
                    Pose { x: -w + r * phi.cos(), y: -w + r * phi.sin(), heading: phi + FRAC_PI_2 }
                }
            };
        }
        let e = u - tl;
        match turn {
            Task::Straight => Pose { x: c, y: w + e, heading: FRAC_PI_2 },
            Task::Right => Pose { x: w + e, y: -c, heading: 0.0 },
            Task::Left => Pose { x: -w - e, y: c, heading: PI },
        }
    }

    /// Pose of a vehicle whose centre sits `s` metres along `route`.
    /// Arc lengths outside the route extend its end segments linearly.
    pub fn pose(&self, route: &Route, s: f64) -> Pose {
        let p = self.canonical_pose(route.turn, s);
        let (sin, cos) = (f64::from(route.approach) * FRAC_PI_2).sin_cos();
        // Exact for quarter turns so axis-aligned lanes stay axis-aligned.
        let (cos, sin) = (cos.round(), sin.round());
        Pose {
            x: cos * p.x - sin * p.y,
            y: sin * p.x + cos * p.y,
            heading: normalize_angle(p.heading + f64::from(route.approach) * FRAC_PI_2),
        }
    }

    /// Physical lane and along-lane coordinate; `None` inside the box.
    pub fn lane_at(&self, route: &Route, s: f64) -> Option<(Lane, f64)> {
        if s <= self.approach_length() {
            Some((Lane::Inbound(route.approach), s))
        } else if s >= self.exit_start(route.turn) {
            Some((Lane::Outbound(route.exit_side()), s - self.exit_start(route.turn)))
        } else {
            None
        }
    }

    /// True when the point lies within the road surface widened by half a
    /// lane on every edge.
    pub fn on_road(&self, x: f64, y: f64) -> bool {
        let lat = self.lane_width * 1.5;
        let lon = self.half_length + self.lane_width / 2.0;
        (x.abs() <= lat && y.abs() <= lon) || (y.abs() <= lat && x.abs() <= lon)
    }

    /// Road surface as two axis-aligned rectangles `(x_min, y_min, x_max, y_max)`.
    pub fn road_rects(&self) -> [(f64, f64, f64, f64); 2] {
        let (h, w) = (self.half_length, self.lane_width);
        [(-w, -h, w, h), (-h, -w, h, w)]
    }
}

/// Oriented rectangle given by centre, heading and half extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub cx: f64,
    pub cy: f64,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl Rect {
    pub fn vehicle(p: Pose) -> Self {
        Self::inflated(p, 0.0)
    }

    pub fn inflated(p: Pose, margin: f64) -> Self {
        Self {
            cx: p.x,
            cy: p.y,
            heading: p.heading,
            half_length: VEHICLE_LENGTH / 2.0 + margin,
            half_width: VEHICLE_WIDTH / 2.0 + margin,
        }
    }

    fn axes(&self) -> [(f64, f64); 2] {
        let (s, c) = self.heading.sin_cos();
        [(c, s), (-s, c)]
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        let [(ux, uy), (vx, vy)] = self.axes();
        let (l, w) = (self.half_length, self.half_width);
        [(l, w), (-l, w), (-l, -w), (l, -w)]
            .map(|(a, b)| (self.cx + a * ux + b * vx, self.cy + a * uy + b * vy))
    }

    fn project(&self, axis: (f64, f64)) -> (f64, f64) {
        let [(ux, uy), (vx, vy)] = self.axes();
        let centre = self.cx * axis.0 + self.cy * axis.1;
        let r = self.half_length * (ux * axis.0 + uy * axis.1).abs()
            + self.half_width * (vx * axis.0 + vy * axis.1).abs();
        (centre - r, centre + r)
    }

    /// Separating-axis test on closed rectangles: touching counts as overlap.
    pub fn overlaps(&self, other: &Rect) -> bool {
        let reach = self.half_length.hypot(self.half_width) + other.half_length.hypot(other.half_width);
        if (self.cx - other.cx).hypot(self.cy - other.cy) > reach {
            return false;
        }
        self.axes().into_iter().chain(other.axes()).all(|axis| {
            let (a0, a1) = self.project(axis);
            let (b0, b1) = other.project(axis);
            a0 <= b1 && b0 <= a1
        })
    }

    /// Closed point-in-rectangle test.
    pub fn contains(&self, x: f64, y: f64, tol: f64) -> bool {
        let [(ux, uy), (vx, vy)] = self.axes();
        let (dx, dy) = (x - self.cx, y - self.cy);
        (dx * ux + dy * uy).abs() <= self.half_length + tol
            && (dx * vx + dy * vy).abs() <= self.half_width + tol
    }
}

/// Collision test between two vehicle footprints.
pub fn collision_check(a: Pose, b: Pose) -> bool {
    Rect::vehicle(a).overlaps(&Rect::vehicle(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> Layout {
        Layout { half_length: 30.0, lane_width: 4.0 }
    }

    fn close(a: Pose, b: Pose) -> bool {
        (a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9 && normalize_angle(a.heading - b.heading).abs() < 1e-9
    }

    #[test]
    fn south_routes_hit_expected_points() {
        let l = layout();
        let start = l.pose(&Route::new(0, Task::Straight), 0.0);
        assert!(close(start, Pose { x: 2.0, y: -30.0, heading: FRAC_PI_2 }));
        let right = Route::new(0, Task::Right);
        assert!(close(l.pose(&right, l.exit_start(Task::Right)), Pose { x: 4.0, y: -2.0, heading: 0.0 }));
        assert!((l.turn_length(Task::Right) - PI).abs() < 1e-12);
        let left = Route::new(0, Task::Left);
        assert!(close(l.pose(&left, l.exit_start(Task::Left)), Pose { x: -4.0, y: 2.0, heading: PI }));
        assert!((l.turn_length(Task::Left) - 3.0 * PI).abs() < 1e-12);
        assert!(close(l.pose(&left, l.route_length(&left)), Pose { x: -30.0, y: 2.0, heading: PI }));
    }

    #[test]
    fn rotated_routes_keep_right_hand_traffic() {
        let l = layout();
        // From the east heading west on the northern half of the road.
        let p = l.pose(&Route::new(1, Task::Straight), 0.0);
        assert!(close(p, Pose { x: 30.0, y: 2.0, heading: PI }));
        assert_eq!(Route::new(1, Task::Straight).exit_side(), 3);
        assert_eq!(Route::new(3, Task::Right).exit_side(), 0);
    }

    #[test]
    fn routes_are_continuous() {
        let l = layout();
        for r in Route::all() {
            let len = l.route_length(&r);
            let mut prev = l.pose(&r, 0.0);
            let n = 2000;
            for i in 1..=n {
                let p = l.pose(&r, len * f64::from(i) / f64::from(n));
                let step = (p.x - prev.x).hypot(p.y - prev.y);
                assert!(step <= len / f64::from(n) + 1e-9, "{r:?}");
                assert!(l.on_road(p.x, p.y));
                prev = p;
            }
        }
    }

    #[test]
    fn identical_and_distant_poses() {
        let p = Pose { x: 1.0, y: 2.0, heading: 0.3 };
        assert!(collision_check(p, p));
        assert!(!collision_check(p, Pose { x: 101.0, y: 2.0, heading: 0.3 }));
    }

    #[test]
    fn corner_touch_counts_as_overlap() {
        let a = Pose { x: 0.0, y: 0.0, heading: 0.0 };
        assert!(collision_check(a, Pose { x: 5.0, y: 2.0, heading: 0.0 }));
        assert!(!collision_check(a, Pose { x: 5.0 + 1e-6, y: 2.0, heading: 0.0 }));
    }

    #[test]
    fn angle_normalization() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-15);
        assert!((normalize_angle(3.0 * PI / 2.0) + FRAC_PI_2).abs() < 1e-15);
    }
}
