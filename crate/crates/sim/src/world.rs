use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ScenarioConfig, Task};
use crate::conflict::{conflict_table, ConflictTable};
use crate::error::{Result, SimError};
use crate::geometry::{collision_check, Layout, Pose, Rect, Route, VEHICLE_LENGTH};
use crate::idm::{idm_acceleration, integrate, Leader};
use crate::reward::{reward, RewardComponents, StepFlags};

/// Human drivers ignore anything further than this along their route.
pub const LOOKAHEAD: f64 = 25.0;
/// Gap used when two human vehicles already overlap; they are not checked
/// against each other, so the follower just brakes as hard as it can.
const MIN_GAP: f64 = 0.01;
const SPAWN_ATTEMPTS: usize = 2000;
const EXIT_SPAWN_PROB: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Constant = 0,
    Accelerated = 1,
    Decelerated = 2,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Constant, Action::Accelerated, Action::Decelerated];

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| SimError::State(format!("action index {i} out of range")))
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: usize,
    pub present: bool,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub heading: f64,
    pub route: Route,
    /// Arc length of the vehicle centre along its route.
    pub arc: f64,
    pub is_ego: bool,
    /// IDM desired speed; unused for the ego.
    pub desired_speed: f64,
}

impl VehicleState {
    pub fn on_route(layout: &Layout, id: usize, route: Route, arc: f64, speed: f64) -> Self {
        let p = layout.pose(&route, arc);
        Self {
            id,
            present: true,
            x: p.x,
            y: p.y,
            speed,
            heading: p.heading,
            route,
            arc,
            is_ego: false,
            desired_speed: speed,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose { x: self.x, y: self.y, heading: self.heading }
    }

    pub fn vx(&self) -> f64 {
        self.speed * self.heading.cos()
    }

    pub fn vy(&self) -> f64 {
        self.speed * self.heading.sin()
    }

    fn advance(&mut self, layout: &Layout, arc: f64, speed: f64) {
        self.arc = arc;
        self.speed = speed;
        let p = layout.pose(&self.route, arc);
        self.x = p.x;
        self.y = p.y;
        self.heading = p.heading;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub components: RewardComponents,
    pub flags: StepFlags,
    pub terminal: bool,
}

/// One running episode. Vehicle 0 is always the ego.
#[derive(Clone)]
pub struct World {
    config: ScenarioConfig,
    layout: Layout,
    table: Arc<ConflictTable>,
    vehicles: Vec<VehicleState>,
    decision_step: u32,
    terminal: bool,
}

impl std::fmt::Debug for World {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("World")
            .field("decision_step", &self.decision_step)
            .field("terminal", &self.terminal)
            .field("vehicles", &self.vehicles)
            .finish()
    }
}

pub fn layout_of(config: &ScenarioConfig) -> Layout {
    Layout {
        half_length: config.road_half_length,
        lane_width: config.lane_width,
    }
}

/// Ego on the south approach plus randomly placed human vehicles.
pub fn build_scenario(config: &ScenarioConfig, seed: u64) -> Result<World> {
    config.validate()?;
    let layout = layout_of(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ego_route = Route::new(0, config.ego_task);
    let mut ego = VehicleState::on_route(&layout, 0, ego_route, config.ego_spawn_arc, config.ego_initial_speed);
    ego.is_ego = true;
    ego.desired_speed = config.ego_speed_cap;
    let mut vehicles = vec![ego];
    let min_gap = config.idm.s0 + VEHICLE_LENGTH;
    let la = layout.approach_length();
    for id in 1..=config.n_human_vehicles {
        let mut placed = None;
        for _ in 0..SPAWN_ATTEMPTS {
            let route = Route::new(rng.random_range(0..4), Task::ALL[rng.random_range(0..3)]);
            let arc = if rng.random_bool(EXIT_SPAWN_PROB) {
                layout.exit_start(route.turn) + rng.random_range(0.0..la - VEHICLE_LENGTH)
            } else {
                rng.random_range(0.0..la)
            };
            let desired = rng.random_range(config.hv_speed_min..=config.hv_speed_max);
            let speed = desired * rng.random_range(0.6..=1.0);
            let mut v = VehicleState::on_route(&layout, id, route, arc, speed);
            v.desired_speed = desired;
            if vehicles.iter().all(|o| spawn_clear(&layout, &v, o, min_gap)) {
                placed = Some(v);
                break;
            }
        }
        match placed {
            Some(v) => vehicles.push(v),
            None => {
                return Err(SimError::Scenario(format!(
                    "could not place vehicle {id} of {} without overlap",
                    config.n_human_vehicles
                )))
            }
        }
    }
    World::from_vehicles(config.clone(), vehicles)
}

/// Same-lane pairs keep `min_gap` between centres; all other pairs keep
/// their footprints half a metre apart.
pub fn spawn_clear(layout: &Layout, a: &VehicleState, b: &VehicleState, min_gap: f64) -> bool {
    match (layout.lane_at(&a.route, a.arc), layout.lane_at(&b.route, b.arc)) {
        (Some((la, ca)), Some((lb, cb))) if la == lb => (ca - cb).abs() >= min_gap,
        _ => !Rect::inflated(a.pose(), 0.5).overlaps(&Rect::inflated(b.pose(), 0.5)),
    }
}

impl World {
    /// World from explicit vehicles; entry 0 must be the ego.
    pub fn from_vehicles(config: ScenarioConfig, mut vehicles: Vec<VehicleState>) -> Result<Self> {
        config.validate()?;
        if vehicles.is_empty() {
            return Err(SimError::Scenario("a world needs the ego vehicle".into()));
        }
        vehicles[0].is_ego = true;
        for (i, v) in vehicles.iter_mut().enumerate() {
            v.id = i;
            if i > 0 {
                v.is_ego = false;
                if !(v.desired_speed > 0.0) {
                    return Err(SimError::Scenario(format!("vehicle {i} has no positive desired speed")));
                }
            }
        }
        let layout = layout_of(&config);
        Ok(Self {
            table: conflict_table(layout),
            layout,
            config,
            vehicles,
            decision_step: 0,
            terminal: false,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn ego(&self) -> &VehicleState {
        &self.vehicles[0]
    }

    pub fn decision_step(&self) -> u32 {
        self.decision_step
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    pub fn n_present(&self) -> usize {
        self.vehicles.iter().filter(|v| v.present).count()
    }

    /// Nearest constraint ahead of human vehicle `fi`: a vehicle on a shared
    /// lane, or a virtual stopped vehicle at the entry of a conflict zone
    /// the other vehicle is nearer to.
    pub fn leader_of(&self, fi: usize) -> Option<Leader> {
        let f = &self.vehicles[fi];
        let mut best: Option<Leader> = None;
        let mut consider = |l: Leader| {
            if best.is_none_or(|b| l.gap < b.gap) {
                best = Some(l);
            }
        };
        for c in self.vehicles.iter().filter(|c| c.present && c.id != f.id) {
            let rel = self.table.get(&f.route, &c.route);
            if let Some(pos) = rel.shared_position(&self.layout, (&f.route, f.arc), (&c.route, c.arc)) {
                let d = pos - f.arc;
                if d > 0.0 && d <= LOOKAHEAD + VEHICLE_LENGTH {
                    consider(Leader { gap: (d - VEHICLE_LENGTH).max(MIN_GAP), speed: c.speed });
                }
            }
            if let Some((zf, zc)) = rel.zone {
                let df = zf.a - f.arc;
                let dc = zc.a - c.arc;
                let open = f.arc <= zf.b && c.arc <= zc.b;
                if open && df > 0.0 && df <= LOOKAHEAD {
                    let other_first = dc <= 0.0 || dc < df || (dc == df && c.id < f.id);
                    if other_first {
                        consider(Leader { gap: df, speed: 0.0 });
                    }
                }
            }
        }
        best
    }

    /// Advances one policy period.
    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        if self.terminal {
            return Err(SimError::State("cannot step a terminal world".into()));
        }
        let dt = self.config.dt();
        let cap = self.config.ego_speed_cap;
        let ego_accel = match action {
            Action::Constant => 0.0,
            Action::Accelerated => self.config.ego_accel,
            Action::Decelerated => -self.config.ego_accel,
        };
        let mut flags = StepFlags::default();
        for _ in 0..self.config.substeps() {
            let mut accels = vec![0.0; self.vehicles.len()];
            for i in 1..self.vehicles.len() {
                if self.vehicles[i].present {
                    let p = crate::config::IdmParams {
                        v0: self.vehicles[i].desired_speed,
                        ..self.config.idm
                    };
                    accels[i] = idm_acceleration(self.vehicles[i].speed, self.leader_of(i), &p)?;
                }
            }
            let ego = &mut self.vehicles[0];
            let v_new = (ego.speed + ego_accel * dt).clamp(0.0, cap);
            let arc = ego.arc + 0.5 * (ego.speed + v_new) * dt;
            ego.advance(&self.layout, arc, v_new);
            for (v, &a) in self.vehicles.iter_mut().zip(&accels).skip(1) {
                if !v.present {
                    continue;
                }
                let (arc, speed) = integrate(v.arc, v.speed, a, dt);
                v.advance(&self.layout, arc, speed);
                if arc >= self.layout.route_length(&v.route) {
                    v.present = false;
                }
            }
            let ego_pose = self.vehicles[0].pose();
            flags.collided = self.vehicles[1..]
                .iter()
                .any(|v| v.present && collision_check(ego_pose, v.pose()));
            if flags.collided {
                break;
            }
            flags.off_road |= !self.layout.on_road(ego_pose.x, ego_pose.y);
            let ego = &self.vehicles[0];
            if ego.arc >= self.layout.route_length(&ego.route) {
                flags.arrived = true;
                break;
            }
        }
        self.decision_step += 1;
        flags.timed_out = !flags.collided && !flags.arrived && self.decision_step >= self.config.horizon;
        self.terminal = flags.terminal();
        let (total, components) = reward(&flags, self.vehicles[0].speed, &self.config);
        Ok(StepResult {
            reward: total,
            components,
            flags,
            terminal: self.terminal,
        })
    }
}
