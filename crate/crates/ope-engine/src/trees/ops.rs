//! Reduction, fusion and amputation of weighted trees.

use super::kinematics::{norm, Momentum};
use super::tree::{Vertex, WeightedTree};
use crate::algebra::MultiIndex;
use crate::error::{OpeError, Result};

/// Drops vertex `v` (and its lines), renumbering the rest.
fn remove_vertex(vertices: &mut Vec<Vertex>, edges: &mut Vec<(usize, usize)>, v: usize) {
    vertices.remove(v);
    edges.retain(|&(a, b)| a != v && b != v);
    for e in edges.iter_mut() {
        if e.0 > v {
            e.0 -= 1;
        }
        if e.1 > v {
            e.1 -= 1;
        }
    }
}

/// One reduction step, or `None` if the tree is fully reduced.
fn reduce_once(t: &WeightedTree) -> Option<WeightedTree> {
    let vs = t.vertices();
    for v in 0..vs.len() {
        if vs[v] != Vertex::Internal {
            continue;
        }
        let nb = t.neighbours(v);
        match nb.len() {
            2 => {
                let both_external = nb.iter().all(|&u| matches!(vs[u], Vertex::External(_)));
                if both_external {
                    continue;
                }
                let mut vertices = vs.to_vec();
                let mut edges = t.edges().to_vec();
                edges.push((nb[0], nb[1]));
                remove_vertex(&mut vertices, &mut edges, v);
                return Some(WeightedTree::raw(vertices, edges, t.w.clone(), t.vp));
            }
            1 if matches!(vs[nb[0]], Vertex::Internal | Vertex::Special) => {
                let mut vertices = vs.to_vec();
                let mut edges = t.edges().to_vec();
                remove_vertex(&mut vertices, &mut edges, v);
                return Some(WeightedTree::raw(vertices, edges, t.w.clone(), t.vp));
            }
            _ => {}
        }
    }
    None
}

/// Applies reductions until none is possible: valence-2 internal vertices are
/// bridged (unless both neighbours are external) and valence-1 internal
/// vertices hanging off internal or special vertices are removed.
pub fn reduce(t: &WeightedTree) -> WeightedTree {
    let mut cur = t.clone();
    while let Some(next) = reduce_once(&cur) {
        cur = next;
    }
    cur
}

pub fn is_fully_reduced(t: &WeightedTree) -> bool {
    reduce_once(t).is_none()
}

/// Merges the special vertices of two special trees. Externals of `t1` come
/// first; derivative indices are kept and particular dimensions add.
pub fn fuse_special(t1: &WeightedTree, t2: &WeightedTree) -> Result<WeightedTree> {
    let (Some(s1), Some(s2)) = (t1.special(), t2.special()) else {
        return Err(OpeError::Incompatible("special merge needs a special vertex in both trees".into()));
    };
    let off = t1.vertices().len();
    let mut vertices = t1.vertices().to_vec();
    let map = |v: usize| -> usize {
        if v == s2 {
            s1
        } else if v > s2 {
            off + v - 1
        } else {
            off + v
        }
    };
    vertices.extend(t2.vertices().iter().enumerate().filter(|(v, _)| *v != s2).map(|(_, k)| *k));
    let mut edges = t1.edges().to_vec();
    edges.extend(t2.edges().iter().map(|&(a, b)| (map(a), map(b))));
    let mut w = t1.w.clone();
    w.extend(t2.w.iter().copied());
    WeightedTree::new(vertices, edges, w, t1.vp + t2.vp)
}

/// Joins external `v1` of `t1` (momentum `−k`) and external `v2` of `t2`
/// (momentum `k`) into one line. Without a special vertex `v1` must be the
/// last external of `t1` and `v2` the first of `t2`. Returns the fused tree
/// and its momenta (those of `t1` then `t2`, joined legs removed).
pub fn fuse_line(
    t1: &WeightedTree,
    q1: &[Momentum],
    v1: usize,
    t2: &WeightedTree,
    q2: &[Momentum],
    v2: usize,
) -> Result<(WeightedTree, Vec<Momentum>)> {
    let bad = |m: String| Err(OpeError::Incompatible(m));
    if t1.has_special() && t2.has_special() {
        return bad("line join needs at most one special vertex; use the special merge".into());
    }
    let (n1, n2) = (t1.n_external(), t2.n_external());
    if q1.len() != n1 || q2.len() != n2 {
        return bad("momentum count does not match the external vertices".into());
    }
    if v1 >= n1 || v2 >= n2 {
        return bad("joined vertex index out of range".into());
    }
    if !t1.has_special() && v1 + 1 != n1 {
        return bad("v1 must be the last external vertex of a tree without special vertex".into());
    }
    if !t2.has_special() && v2 != 0 {
        return bad("v2 must be the first external vertex of a tree without special vertex".into());
    }
    let k = q2[v2];
    let mismatch = norm(&[q1[v1][0] + k[0], q1[v1][1] + k[1], q1[v1][2] + k[2], q1[v1][3] + k[3]]);
    if mismatch > 1e-9 * (norm(&k) + norm(&q1[v1])).max(f64::MIN_POSITIVE) {
        return bad(format!("joined momenta are not opposite (mismatch {mismatch:e})"));
    }
    if t1.w[v1].order() != 0 || t2.w[v2].order() != 0 {
        return bad("joined external vertices must carry no derivatives".into());
    }
    let e1 = t1.externals()[v1];
    let e2 = t2.externals()[v2];
    let a1 = t1.neighbours(e1)[0];
    let a2 = t2.neighbours(e2)[0];
    let mut vertices = t1.vertices().to_vec();
    let mut edges = t1.edges().to_vec();
    let off = vertices.len();
    vertices.extend_from_slice(t2.vertices());
    edges.extend(t2.edges().iter().map(|&(a, b)| (a + off, b + off)));
    edges.push((a1, a2 + off));
    // Remove the higher index first so the lower one stays valid.
    remove_vertex(&mut vertices, &mut edges, e2 + off);
    remove_vertex(&mut vertices, &mut edges, e1);
    let mut w: Vec<MultiIndex> = t1.w.iter().enumerate().filter(|(i, _)| *i != v1).map(|(_, w)| *w).collect();
    w.extend(t2.w.iter().enumerate().filter(|(i, _)| *i != v2).map(|(_, w)| *w));
    let mut q: Vec<Momentum> = q1.iter().enumerate().filter(|(i, _)| *i != v1).map(|(_, q)| *q).collect();
    q.extend(q2.iter().enumerate().filter(|(i, _)| *i != v2).map(|(_, q)| *q));
    Ok((WeightedTree::new(vertices, edges, w, t1.vp + t2.vp)?, q))
}

/// Removes external vertex `v` (zero momentum, no derivatives) and its line.
/// For trees without special vertex `v` may not be the last external.
pub fn amputate(t: &WeightedTree, q: &[Momentum], v: usize) -> Result<(WeightedTree, Vec<Momentum>)> {
    let n = t.n_external();
    if v >= n || q.len() != n {
        return Err(OpeError::InvalidArgument("amputated vertex or momenta out of range".into()));
    }
    if norm(&q[v]) != 0.0 {
        return Err(OpeError::InvalidArgument("only zero-momentum external vertices can be amputated".into()));
    }
    if t.w[v].order() != 0 {
        return Err(OpeError::Incompatible("amputated vertex carries derivatives".into()));
    }
    if !t.has_special() && v + 1 == n {
        return Err(OpeError::Incompatible("the last external vertex fixes momentum conservation".into()));
    }
    let id = t.externals()[v];
    let mut vertices = t.vertices().to_vec();
    let mut edges = t.edges().to_vec();
    remove_vertex(&mut vertices, &mut edges, id);
    let mut w = t.w.clone();
    w.remove(v);
    let mut q2 = q.to_vec();
    q2.remove(v);
    let out = WeightedTree::new(vertices, edges, w, t.vp).map_err(|e| OpeError::Incompatible(format!("amputation leaves an invalid tree: {e}")))?;
    Ok((out, q2))
}
