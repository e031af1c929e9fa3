//! Pairwise route relations used by human drivers to pick whom to follow or
//! yield to.
//!
//! Two relations exist between a follower route `f` and another route `c`:
//! a shared lane segment (ordinary car following), and a conflict zone where
//! footprints can overlap while the routes cross or merge. Zones are found by
//! sampling both routes near the box and testing slightly inflated
//! footprints; stretches where the routes coincide are left to car
//! following.

use std::sync::{Arc, Mutex, OnceLock};

use crate::geometry::{Layout, Rect, Route};

const SAMPLE_STEP: f64 = 0.25;
const ZONE_MARGIN: f64 = 0.5;
/// How far outside the box, along each route, zones are searched.
const ZONE_REACH: f64 = 8.0;

/// How `c`'s arc length maps into `f`'s when they drive the same lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shared {
    None,
    /// Identical routes.
    Always,
    /// Same approach, different turns: valid while `f` is still inbound.
    Approach,
    /// Same exit, different approaches: valid once `c` is outbound. `c`'s
    /// position in `f`'s frame is `s_c + offset`.
    Exit { offset: f64 },
}

/// Arc-length interval `[a, b]` of vehicle centres inside a conflict zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relation {
    pub shared: Shared,
    /// Zone extent on `f` and on `c`.
    pub zone: Option<(Interval, Interval)>,
}

impl Relation {
    /// `c`'s position in `f`'s arc-length frame when they share a lane.
    pub fn shared_position(&self, layout: &Layout, f: (&Route, f64), c: (&Route, f64)) -> Option<f64> {
        match self.shared {
            Shared::None => None,
            Shared::Always => Some(c.1),
            Shared::Approach => (f.1 <= layout.approach_length()).then_some(c.1),
            Shared::Exit { offset } => (c.1 >= layout.exit_start(c.0.turn)).then_some(c.1 + offset),
        }
    }
}

pub struct ConflictTable {
    layout: Layout,
    relations: Vec<Relation>,
}

impl ConflictTable {
    pub fn build(layout: Layout) -> Self {
        let routes: Vec<Route> = Route::all().collect();
        let samples: Vec<Vec<(f64, Rect)>> = routes.iter().map(|r| sample_route(&layout, r)).collect();
        let mut relations = Vec::with_capacity(144);
        for (i, f) in routes.iter().enumerate() {
            for (j, c) in routes.iter().enumerate() {
                relations.push(relate(&layout, f, c, &samples[i], &samples[j]));
            }
        }
        Self { layout, relations }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn get(&self, f: &Route, c: &Route) -> &Relation {
        &self.relations[f.index() * 12 + c.index()]
    }
}

fn sample_route(layout: &Layout, route: &Route) -> Vec<(f64, Rect)> {
    let lo = layout.approach_length() - ZONE_REACH;
    let hi = layout.exit_start(route.turn) + ZONE_REACH;
    let n = ((hi - lo) / SAMPLE_STEP).ceil() as usize;
    (0..=n)
        .map(|k| {
            let s = (lo + k as f64 * SAMPLE_STEP).min(hi);
            (s, Rect::inflated(layout.pose(route, s), ZONE_MARGIN))
        })
        .collect()
}

fn relate(layout: &Layout, f: &Route, c: &Route, fs: &[(f64, Rect)], cs: &[(f64, Rect)]) -> Relation {
    let same_approach = f.approach == c.approach;
    let same_exit = f.exit_side() == c.exit_side();
    let shared = if f == c {
        Shared::Always
    } else if same_approach {
        Shared::Approach
    } else if same_exit {
        Shared::Exit {
            offset: layout.exit_start(f.turn) - layout.exit_start(c.turn),
        }
    } else {
        Shared::None
    };
    if f == c {
        return Relation { shared, zone: None };
    }
    let la = layout.approach_length();
    let (fx, cx) = (layout.exit_start(f.turn), layout.exit_start(c.turn));
    let mut zf: Option<Interval> = None;
    let mut zc: Option<Interval> = None;
    for &(sf, rf) in fs {
        for &(sc, rc) in cs {
            if same_approach && sf <= la && sc <= la {
                continue;
            }
            if same_exit && sf >= fx && sc >= cx {
                continue;
            }
            if rf.overlaps(&rc) {
                grow(&mut zf, sf);
                grow(&mut zc, sc);
            }
        }
    }
    Relation {
        shared,
        zone: zf.zip(zc),
    }
}

fn grow(z: &mut Option<Interval>, s: f64) {
    match z {
        Some(i) => {
            i.a = i.a.min(s);
            i.b = i.b.max(s);
        }
        None => *z = Some(Interval { a: s, b: s }),
    }
}

/// Shared table for a layout, built once per process.
pub fn conflict_table(layout: Layout) -> Arc<ConflictTable> {
    static CACHE: OnceLock<Mutex<Vec<Arc<ConflictTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(t) = guard.iter().find(|t| t.layout == layout) {
        return Arc::clone(t);
    }
    let t = Arc::new(ConflictTable::build(layout));
    guard.push(Arc::clone(&t));
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Task;

    fn table() -> Arc<ConflictTable> {
        conflict_table(Layout { half_length: 30.0, lane_width: 4.0 })
    }

    #[test]
    fn opposite_straights_do_not_conflict() {
        let t = table();
        let r = t.get(&Route::new(0, Task::Straight), &Route::new(2, Task::Straight));
        assert_eq!(r.shared, Shared::None);
        assert!(r.zone.is_none());
    }

    #[test]
    fn perpendicular_straights_cross() {
        let t = table();
        let (f, c) = (Route::new(0, Task::Straight), Route::new(1, Task::Straight));
        let (zf, zc) = t.get(&f, &c).zone.expect("crossing");
        let l = t.layout();
        assert!(zf.a < l.approach_length() + 4.0 && zf.b > l.approach_length() + 4.0);
        let (wf, wc) = t.get(&c, &f).zone.unwrap();
        assert_eq!((wf, wc), (zc, zf));
    }

    #[test]
    fn zones_are_symmetric() {
        let t = table();
        for f in Route::all() {
            for c in Route::all() {
                let a = t.get(&f, &c).zone.map(|(x, y)| (y, x));
                assert_eq!(a, t.get(&c, &f).zone);
            }
        }
    }

    #[test]
    fn merge_offsets_align_exit_legs() {
        let t = table();
        let l = *t.layout();
        let (f, c) = (Route::new(0, Task::Straight), Route::new(1, Task::Right));
        assert_eq!(f.exit_side(), c.exit_side());
        let r = t.get(&f, &c);
        let sc = l.exit_start(c.turn) + 3.0;
        let mapped = r.shared_position(&l, (&f, 0.0), (&c, sc)).unwrap();
        let (pf, pc) = (l.pose(&f, mapped), l.pose(&c, sc));
        assert!((pf.x - pc.x).abs() < 1e-9 && (pf.y - pc.y).abs() < 1e-9);
    }
}
