#![allow(dead_code)]

use cgrl_agent::{GraphObservation, FEATURES};
use cgrl_core::Tensor64;
use rand::Rng;

/// Random observation: `present` vehicles out of `capacity`, random
/// features and a random symmetric adjacency among present nodes.
pub fn random_obs<R: Rng>(capacity: usize, present: usize, rng: &mut R) -> GraphObservation {
    let mut f = Tensor64::zeros([capacity, FEATURES]);
    for i in 0..present {
        f.set(i, 0, 1.0);
        for k in 1..FEATURES {
            f.set(i, k, rng.random_range(-1.0..1.0));
        }
    }
    let mut a = Tensor64::zeros([capacity, capacity]);
    for i in 0..present {
        for j in (i + 1)..present {
            if rng.random_bool(0.5) {
                a.set(i, j, 1.0);
                a.set(j, i, 1.0);
            }
        }
    }
    GraphObservation { features: f, adjacency: a, n_present: present }
}

/// Same graph with rows and columns reordered by `perm` (new row `i` is
/// old row `perm[i]`).
pub fn permute(obs: &GraphObservation, perm: &[usize]) -> GraphObservation {
    let n = obs.capacity();
    let f = Tensor64::from_fn(n, FEATURES, |i, k| obs.features.get(perm[i], k));
    let a = Tensor64::from_fn(n, n, |i, j| obs.adjacency.get(perm[i], perm[j]));
    GraphObservation { features: f, adjacency: a, n_present: obs.n_present }
}
