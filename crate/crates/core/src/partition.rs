//! Balanced partitioning of the tetrahedra over the face-adjacency graph.
//!
//! Graph growing: `P` seeds spread along a pseudo-peripheral breadth-first
//! ordering grow simultaneously by BFS up to their target sizes. Leftovers go
//! to the smallest adjacent part, disconnected fragments are merged into the
//! neighbour they share most faces with, and a diffusion pass moves boundary
//! tetrahedra from larger to smaller neighbouring parts. Every step iterates
//! in ascending index order, so the result depends only on the mesh, `P` and
//! the seed.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::mesh::{Adjacency, Mesh};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartitionError {
    #[error("part count must be at least 1 (got {0})")]
    InvalidPartCount(usize),
    #[error("partition map covers {map} tets but the mesh has {mesh}")]
    SizeMismatch { map: usize, mesh: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionMap {
    pub part_of: Vec<usize>,
    pub parts: usize,
}

impl PartitionMap {
    pub fn single(n_tets: usize) -> Self {
        PartitionMap {
            part_of: vec![0; n_tets],
            parts: 1,
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.parts];
        for &p in &self.part_of {
            s[p] += 1;
        }
        s
    }

    /// Tetrahedra of each part, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.parts];
        for (t, &p) in self.part_of.iter().enumerate() {
            m[p].push(t);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionStats {
    pub sizes: Vec<usize>,
    /// Largest part size over the mean part size.
    pub imbalance: f64,
    /// Interior faces whose two tetrahedra lie in different parts.
    pub edge_cut: usize,
}

impl fmt::Display for PartitionStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# parts {}", self.sizes.len())?;
        writeln!(
            f,
            "# sizes {}",
            self.sizes
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        )?;
        writeln!(f, "# imbalance {:.6}", self.imbalance)?;
        write!(f, "# edge_cut {}", self.edge_cut)
    }
}

pub fn partition_stats(map: &PartitionMap, mesh: &Mesh) -> Result<PartitionStats, PartitionError> {
    if map.part_of.len() != mesh.tets.len() {
        return Err(PartitionError::SizeMismatch {
            map: map.part_of.len(),
            mesh: mesh.tets.len(),
        });
    }
    let sizes = map.sizes();
    let mean = mesh.tets.len() as f64 / map.parts as f64;
    let max = sizes.iter().copied().max().unwrap_or(0) as f64;
    let imbalance = if mean > 0.0 { max / mean } else { 1.0 };
    let edge_cut = mesh
        .face_table()
        .interior
        .iter()
        .filter(|&&(_, a, b)| map.part_of[a] != map.part_of[b])
        .count();
    Ok(PartitionStats {
        sizes,
        imbalance,
        edge_cut,
    })
}

pub fn partition_tets(mesh: &Mesh, parts: usize, seed: u64) -> Result<PartitionMap, PartitionError> {
    if parts < 1 {
        return Err(PartitionError::InvalidPartCount(parts));
    }
    let n = mesh.tets.len();
    if parts == 1 || n == 0 {
        return Ok(PartitionMap {
            part_of: vec![0; n],
            parts,
        });
    }
    if parts >= n {
        return Ok(PartitionMap {
            part_of: (0..n).collect(),
            parts,
        });
    }
    let graph = mesh.dual_graph();
    Ok(partition_graph(&graph, parts, seed))
}

/// Partition an arbitrary graph; `2 ≤ parts < n`.
pub fn partition_graph(graph: &Adjacency, parts: usize, seed: u64) -> PartitionMap {
    let n = graph.len();
    let order = bfs_ordering(graph, (seed % n as u64) as usize);

    const NONE: usize = usize::MAX;
    let mut part_of = vec![NONE; n];
    let mut size = vec![0usize; parts];
    let target: Vec<usize> = (0..parts)
        .map(|p| n / parts + usize::from(p < n % parts))
        .collect();

    // Spaced seeds along the ordering.
    let mut frontier: Vec<VecDeque<usize>> = vec![VecDeque::new(); parts];
    for p in 0..parts {
        let mut k = ((p as f64 + 0.5) * n as f64 / parts as f64).floor() as usize;
        while part_of[order[k.min(n - 1)]] != NONE {
            k = (k + 1) % n;
        }
        let s = order[k.min(n - 1)];
        part_of[s] = p;
        size[p] = 1;
        frontier[p].extend(graph.neighbors(s));
    }
    loop {
        let mut progressed = false;
        for p in 0..parts {
            if size[p] >= target[p] {
                continue;
            }
            while let Some(t) = frontier[p].pop_front() {
                if part_of[t] == NONE {
                    part_of[t] = p;
                    size[p] += 1;
                    frontier[p].extend(graph.neighbors(t).iter().filter(|&&u| part_of[u] == NONE));
                    progressed = true;
                    break;
                }
            }
        }
        if !progressed {
            break;
        }
    }

    // Leftovers: attach to the smallest adjacent part, sweep until stable.
    loop {
        let mut changed = false;
        let mut stranded = false;
        for t in 0..n {
            if part_of[t] != NONE {
                continue;
            }
            let best = graph
                .neighbors(t)
                .iter()
                .filter(|&&u| part_of[u] != NONE)
                .map(|&u| part_of[u])
                .min_by_key(|&q| (size[q], q));
            match best {
                Some(q) => {
                    part_of[t] = q;
                    size[q] += 1;
                    changed = true;
                }
                None => stranded = true,
            }
        }
        if !stranded {
            break;
        }
        if !changed {
            // A component without any seed: hand one tet to the smallest part.
            let t = (0..n).find(|&t| part_of[t] == NONE).unwrap_or(0);
            let q = (0..parts).min_by_key(|&q| (size[q], q)).unwrap_or(0);
            part_of[t] = q;
            size[q] += 1;
        }
    }

    let mut map = PartitionMap { part_of, parts };
    merge_fragments(graph, &mut map);
    balance(graph, &mut map);
    merge_fragments(graph, &mut map);
    map
}

/// Breadth-first ordering of all vertices, each component started from a
/// pseudo-peripheral vertex.
fn bfs_ordering(graph: &Adjacency, start: usize) -> Vec<usize> {
    let n = graph.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut next = start;
    loop {
        let root = pseudo_peripheral(graph, next);
        let base = order.len();
        visited[root] = true;
        order.push(root);
        let mut head = base;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &u in graph.neighbors(v) {
                if !visited[u] {
                    visited[u] = true;
                    order.push(u);
                }
            }
        }
        match (0..n).map(|k| (start + k) % n).find(|&v| !visited[v]) {
            Some(v) => next = v,
            None => break,
        }
    }
    order
}

/// Level structure rooted at `root`: (levels, eccentricity).
fn levels(graph: &Adjacency, root: usize, level: &mut [usize]) -> (Vec<usize>, usize) {
    let mut touched = vec![root];
    level[root] = 0;
    let mut head = 0;
    let mut depth = 0;
    while head < touched.len() {
        let v = touched[head];
        head += 1;
        for &u in graph.neighbors(v) {
            if level[u] == usize::MAX {
                level[u] = level[v] + 1;
                depth = depth.max(level[u]);
                touched.push(u);
            }
        }
    }
    (touched, depth)
}

pub(crate) fn pseudo_peripheral(graph: &Adjacency, start: usize) -> usize {
    let n = graph.len();
    let mut level = vec![usize::MAX; n];
    let mut root = start;
    let (mut comp, mut ecc) = levels(graph, root, &mut level);
    for _ in 0..8 {
        let far = comp
            .iter()
            .copied()
            .filter(|&v| level[v] == ecc)
            .min_by_key(|&v| (graph.neighbors(v).len(), v))
            .unwrap_or(root);
        for &v in &comp {
            level[v] = usize::MAX;
        }
        let (c2, e2) = levels(graph, far, &mut level);
        if e2 <= ecc {
            for &v in &c2 {
                level[v] = usize::MAX;
            }
            return root;
        }
        root = far;
        comp = c2;
        ecc = e2;
    }
    root
}

/// Connected components of each part; all but the largest are moved to the
/// adjacent part sharing the most faces with them.
fn merge_fragments(graph: &Adjacency, map: &mut PartitionMap) {
    let n = graph.len();
    for _ in 0..4 {
        let mut comp = vec![usize::MAX; n];
        let mut comps: Vec<(usize, Vec<usize>)> = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let p = map.part_of[s];
            let id = comps.len();
            let mut members = vec![s];
            comp[s] = id;
            let mut head = 0;
            while head < members.len() {
                let v = members[head];
                head += 1;
                for &u in graph.neighbors(v) {
                    if comp[u] == usize::MAX && map.part_of[u] == p {
                        comp[u] = id;
                        members.push(u);
                    }
                }
            }
            comps.push((p, members));
        }
        let mut largest = vec![usize::MAX; map.parts];
        for (id, (p, m)) in comps.iter().enumerate() {
            if largest[*p] == usize::MAX || m.len() > comps[largest[*p]].1.len() {
                largest[*p] = id;
            }
        }
        let mut moved = false;
        for (id, (p, members)) in comps.iter().enumerate() {
            if largest[*p] == id {
                continue;
            }
            let mut shared = vec![0usize; map.parts];
            for &v in members {
                for &u in graph.neighbors(v) {
                    if map.part_of[u] != *p {
                        shared[map.part_of[u]] += 1;
                    }
                }
            }
            let best = (0..map.parts)
                .filter(|&q| shared[q] > 0)
                .max_by_key(|&q| (shared[q], std::cmp::Reverse(q)));
            if let Some(q) = best {
                for &v in members {
                    map.part_of[v] = q;
                }
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

/// Diffusion balancing: boundary tets move to a smaller neighbouring part
/// when that does not locally disconnect their current part.
fn balance(graph: &Adjacency, map: &mut PartitionMap) {
    let n = graph.len();
    let mut size = map.sizes();
    let ideal = n as f64 / map.parts as f64;
    let mut mark = vec![0u32; n];
    let mut stamp = 0u32;
    for _sweep in 0..64 {
        let max = *size.iter().max().unwrap_or(&0) as f64;
        if max <= ideal * 1.02 + 1.0 {
            break;
        }
        let mut moves = 0;
        for t in 0..n {
            let p = map.part_of[t];
            if size[p] <= 1 {
                continue;
            }
            let q = graph
                .neighbors(t)
                .iter()
                .map(|&u| map.part_of[u])
                .filter(|&q| q != p && size[q] + 1 < size[p])
                .min_by_key(|&q| (size[q], q));
            let Some(q) = q else { continue };
            if (size[p] as f64) <= ideal && (size[q] as f64) >= ideal {
                continue;
            }
            stamp += 1;
            if !locally_connected(graph, &map.part_of, t, p, &mut mark, stamp) {
                continue;
            }
            map.part_of[t] = q;
            size[p] -= 1;
            size[q] += 1;
            moves += 1;
        }
        if moves == 0 {
            break;
        }
    }
}

/// Whether the neighbours of `t` in part `p` stay connected through the
/// 2-ring of `t` once `t` leaves the part.
fn locally_connected(
    graph: &Adjacency,
    part_of: &[usize],
    t: usize,
    p: usize,
    mark: &mut [u32],
    stamp: u32,
) -> bool {
    let same: Vec<usize> = graph
        .neighbors(t)
        .iter()
        .copied()
        .filter(|&u| part_of[u] == p)
        .collect();
    if same.len() <= 1 {
        return true;
    }
    // Region: 2-ring of t inside p, without t.
    let in_region = |u: usize| -> bool {
        u != t
            && part_of[u] == p
            && (graph.neighbors(t).contains(&u)
                || graph.neighbors(u).iter().any(|w| graph.neighbors(t).contains(w)))
    };
    let mut stack = vec![same[0]];
    mark[same[0]] = stamp;
    while let Some(v) = stack.pop() {
        for &u in graph.neighbors(v) {
            if mark[u] != stamp && in_region(u) {
                mark[u] = stamp;
                stack.push(u);
            }
        }
    }
    same.iter().all(|&u| mark[u] == stamp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{unit_cube_mesh, Region};

    #[test]
    fn trivial_cases() {
        let m = unit_cube_mesh(2, Region::Vacuum);
        let one = partition_tets(&m, 1, 0).unwrap();
        assert!(one.part_of.iter().all(|&p| p == 0));
        let s = partition_stats(&one, &m).unwrap();
        assert_eq!((s.imbalance, s.edge_cut), (1.0, 0));

        let all = partition_tets(&m, m.tets.len(), 0).unwrap();
        assert_eq!(all.sizes(), vec![1; m.tets.len()]);
        let s = partition_stats(&all, &m).unwrap();
        assert_eq!(s.edge_cut, m.face_table().interior.len());

        assert_eq!(
            partition_tets(&m, 0, 0),
            Err(PartitionError::InvalidPartCount(0))
        );
    }

    #[test]
    fn cube_halves() {
        let m = unit_cube_mesh(1, Region::Vacuum);
        let map = partition_tets(&m, 2, 7).unwrap();
        assert_eq!(map.sizes(), vec![3, 3]);
    }

    #[test]
    fn deterministic_and_connected() {
        let m = unit_cube_mesh(6, Region::Vacuum);
        let a = partition_tets(&m, 5, 3).unwrap();
        let b = partition_tets(&m, 5, 3).unwrap();
        assert_eq!(a, b);
        let s = partition_stats(&a, &m).unwrap();
        assert!(s.imbalance <= 1.1, "{s}");
        let g = m.dual_graph();
        for members in a.members() {
            let set: std::collections::HashSet<usize> = members.iter().copied().collect();
            let mut seen = std::collections::HashSet::from([members[0]]);
            let mut stack = vec![members[0]];
            while let Some(v) = stack.pop() {
                for &u in g.neighbors(v) {
                    if set.contains(&u) && seen.insert(u) {
                        stack.push(u);
                    }
                }
            }
            assert_eq!(seen.len(), members.len());
        }
    }
}
