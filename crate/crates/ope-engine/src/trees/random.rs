//! Seeded random trees and momenta for the lemma checks.

use super::kinematics::{neg, sum, Momentum};
use super::tree::{Vertex, WeightedTree};
use crate::algebra::MultiIndex;
use rand::Rng;

/// Size limits of generated trees.
#[derive(Clone, Copy, Debug)]
pub struct TreeShape {
    pub max_external: usize,
    pub max_internal: usize,
    /// Largest `|w_i|` per external vertex.
    pub max_w: u32,
}

impl Default for TreeShape {
    fn default() -> Self {
        TreeShape { max_external: 8, max_internal: 6, max_w: 2 }
    }
}

const DIMS: [f64; 5] = [1.0, 1.5, 2.0, 2.5, 3.0];

/// A random valid tree, rejection-sampled on the internal valence limits.
/// `vp` is left at zero.
pub fn random_tree<R: Rng>(rng: &mut R, shape: &TreeShape, special: bool) -> WeightedTree {
    loop {
        let r = if special { rng.gen_range(0..=shape.max_internal) } else { rng.gen_range(1..=shape.max_internal) };
        let m = if special { rng.gen_range(0..=shape.max_external) } else { rng.gen_range(1..=shape.max_external) };
        let mut vertices = Vec::new();
        if special {
            vertices.push(Vertex::Special);
        }
        vertices.extend(std::iter::repeat_n(Vertex::Internal, r));
        let core = vertices.len();
        let mut edges = Vec::new();
        for i in 1..core {
            edges.push((rng.gen_range(0..i), i));
        }
        for _ in 0..m {
            let v = vertices.len();
            vertices.push(Vertex::External(DIMS[rng.gen_range(0..DIMS.len())]));
            edges.push((rng.gen_range(0..core), v));
        }
        let w: Vec<MultiIndex> = (0..m)
            .map(|i| {
                if !special && i + 1 == m {
                    return MultiIndex::default();
                }
                let mut idx = MultiIndex::default();
                for _ in 0..rng.gen_range(0..=shape.max_w) {
                    idx = idx.add(&MultiIndex::unit(rng.gen_range(0..4)));
                }
                idx
            })
            .collect();
        if let Ok(t) = WeightedTree::new(vertices, edges, w, 0.0) {
            return t;
        }
    }
}

/// A momentum with log-uniform norm in `[10^lo, 10^hi]` and uniform direction.
pub fn random_momentum<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Momentum {
    let mag = 10f64.powf(rng.gen_range(lo..=hi));
    loop {
        let v: Momentum = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            return v.map(|c| c * mag / n);
        }
    }
}

/// `n` random momenta; with `conserve` the last one balances the others.
pub fn random_momenta<R: Rng>(rng: &mut R, n: usize, conserve: bool) -> Vec<Momentum> {
    let mut q: Vec<Momentum> = (0..n).map(|_| random_momentum(rng, -2.0, 2.0)).collect();
    if conserve && n > 0 {
        q[n - 1] = neg(&sum(&q[..n - 1]));
    }
    q
}
