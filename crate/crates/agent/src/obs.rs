//! World snapshot to graph state: padded node features and a proximity
//! adjacency matrix.

use cgrl_core::Tensor64;
use cgrl_sim::{VehicleState, World};

use crate::error::{AgentError, Result};

/// Feature columns: presence, x, y, v_x, v_y, cos h, sin h.
pub const FEATURES: usize = 7;
pub const POSITION_SCALE: f64 = 100.0;
pub const VELOCITY_SCALE: f64 = 30.0;
pub const ADJ_DX: f64 = 10.0;
pub const ADJ_DY: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphObservation {
    pub features: Tensor64,
    pub adjacency: Tensor64,
    pub n_present: usize,
}

impl GraphObservation {
    pub fn capacity(&self) -> usize {
        self.features.rows()
    }

    pub fn present(&self, i: usize) -> bool {
        self.features.get(i, 0) != 0.0
    }
}

/// Ego first, then the remaining present vehicles in id order.
fn ordered(world: &World, capacity: usize) -> Result<Vec<&VehicleState>> {
    let rows: Vec<&VehicleState> = world.vehicles().iter().filter(|v| v.present).collect();
    if rows.first().is_none_or(|v| !v.is_ego) {
        return Err(AgentError::Domain("the ego must be present".into()));
    }
    if rows.len() > capacity {
        return Err(AgentError::Capacity { present: rows.len(), capacity });
    }
    Ok(rows)
}

pub fn feature_row(v: &VehicleState) -> [f64; FEATURES] {
    [
        1.0,
        v.x / POSITION_SCALE,
        v.y / POSITION_SCALE,
        v.vx() / VELOCITY_SCALE,
        v.vy() / VELOCITY_SCALE,
        v.heading.cos(),
        v.heading.sin(),
    ]
}

pub fn build_feature_matrix(world: &World, capacity: usize) -> Result<Tensor64> {
    let rows = ordered(world, capacity)?;
    let mut f = Tensor64::zeros([capacity, FEATURES]);
    for (i, v) in rows.iter().enumerate() {
        f.data_mut()[i * FEATURES..(i + 1) * FEATURES].copy_from_slice(&feature_row(v));
    }
    Ok(f)
}

/// Vehicles in the world frame closer than 10 m in x and 30 m in y are linked.
pub fn adjacency_from_positions(points: &[(f64, f64)], capacity: usize) -> Tensor64 {
    let mut a = Tensor64::zeros([capacity, capacity]);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let (dx, dy) = (points[i].0 - points[j].0, points[i].1 - points[j].1);
            if dx.abs() < ADJ_DX && dy.abs() < ADJ_DY {
                a.set(i, j, 1.0);
                a.set(j, i, 1.0);
            }
        }
    }
    a
}

pub fn build_adjacency(world: &World, capacity: usize) -> Result<Tensor64> {
    let pts: Vec<(f64, f64)> = ordered(world, capacity)?.iter().map(|v| (v.x, v.y)).collect();
    Ok(adjacency_from_positions(&pts, capacity))
}

pub fn observe(world: &World, capacity: usize) -> Result<GraphObservation> {
    let n_present = ordered(world, capacity)?.len();
    Ok(GraphObservation {
        features: build_feature_matrix(world, capacity)?,
        adjacency: build_adjacency(world, capacity)?,
        n_present,
    })
}

/// `D^{-1/2}(A + I)D^{-1/2}` with `D` the row sums of `A + I`. Works for
/// weighted `A` too.
pub fn normalize_adjacency(a: &Tensor64) -> Tensor64 {
    let n = a.rows();
    let mut hat = a.clone();
    for i in 0..n {
        hat.data_mut()[i * n + i] += 1.0;
    }
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / hat.row(i).iter().sum::<f64>().sqrt())
        .collect();
    Tensor64::from_fn(n, n, |i, j| hat.get(i, j) * inv_sqrt[i] * inv_sqrt[j])
}
