//! Fill-reducing orderings: nested dissection with coordinate-plane
//! separators when node positions are known, breadth-first level
//! separators otherwise, and minimum degree on small leaves.

use crate::mesh::Adjacency;
use crate::sparse::CsrMatrix;

/// Subgraphs at or below this size are ordered by minimum degree.
const LEAF: usize = 96;

/// Vertex graph of a matrix pattern (symmetrized), with dofs optionally
/// collapsed into groups that share one vertex.
pub fn pattern_graph(a: &CsrMatrix, group_of: &[usize], n_groups: usize) -> Adjacency {
    let mut members_ptr = vec![0usize; n_groups + 1];
    for &g in group_of {
        members_ptr[g + 1] += 1;
    }
    for g in 0..n_groups {
        members_ptr[g + 1] += members_ptr[g];
    }
    let mut fill = members_ptr.clone();
    let mut members = vec![0usize; group_of.len()];
    for (d, &g) in group_of.iter().enumerate() {
        members[fill[g]] = d;
        fill[g] += 1;
    }
    let at = a.transpose();
    let mut mark = vec![usize::MAX; n_groups];
    let mut offsets = vec![0usize; n_groups + 1];
    let mut targets = Vec::new();
    for g in 0..n_groups {
        mark[g] = g;
        let start = targets.len();
        for &d in &members[members_ptr[g]..members_ptr[g + 1]] {
            for m in [a, &at] {
                for &j in m.row(d).0 {
                    let h = group_of[j];
                    if mark[h] != g {
                        mark[h] = g;
                        targets.push(h);
                    }
                }
            }
        }
        targets[start..].sort_unstable();
        offsets[g + 1] = targets.len();
    }
    Adjacency { offsets, targets }
}

/// Nested dissection order: `order[k]` is the vertex eliminated k-th.
pub fn nested_dissection(g: &Adjacency) -> Vec<usize> {
    run_nd(g, None)
}

/// Nested dissection with separators from coordinate-plane cuts; suited to
/// mesh graphs where every vertex has a position.
pub fn nested_dissection_geometric(g: &Adjacency, coords: &[[f64; 3]]) -> Vec<usize> {
    assert_eq!(coords.len(), g.len(), "one coordinate per vertex");
    run_nd(g, Some(coords))
}

fn run_nd(g: &Adjacency, coords: Option<&[[f64; 3]]>) -> Vec<usize> {
    let n = g.len();
    let mut nd = Nd {
        g,
        coords,
        stamp: vec![0; n],
        cur: 0,
        seen: vec![0; n],
        vcur: 0,
        level: vec![0; n],
        side: vec![0; n],
        out: Vec::with_capacity(n),
    };
    nd.run((0..n).collect());
    debug_assert_eq!(nd.out.len(), n);
    nd.out
}

/// Split fractions tried for each coordinate axis.
const CUTS: [f64; 7] = [0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65];

struct Nd<'a> {
    g: &'a Adjacency,
    coords: Option<&'a [[f64; 3]]>,
    side: Vec<u32>,
    stamp: Vec<u32>,
    cur: u32,
    seen: Vec<u32>,
    vcur: u32,
    level: Vec<u32>,
    out: Vec<usize>,
}

impl Nd<'_> {
    fn mark(&mut self, verts: &[usize]) -> u32 {
        self.cur += 1;
        for &v in verts {
            self.stamp[v] = self.cur;
        }
        self.cur
    }

    fn fresh_visit(&mut self) -> u32 {
        self.vcur += 1;
        self.vcur
    }

    /// BFS from `root` inside the set stamped `s`, skipping vertices already
    /// visited under `vis`. Returns the visit order; levels in `self.level`.
    fn bfs(&mut self, root: usize, s: u32, vis: u32) -> Vec<usize> {
        let mut order = vec![root];
        self.level[root] = 0;
        self.seen[root] = vis;
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let lv = self.level[v];
            for &u in self.g.neighbors(v) {
                if self.stamp[u] == s && self.seen[u] != vis {
                    self.seen[u] = vis;
                    self.level[u] = lv + 1;
                    order.push(u);
                }
            }
        }
        order
    }

    fn run(&mut self, verts: Vec<usize>) {
        if verts.len() <= LEAF {
            self.leaf(&verts);
            return;
        }
        let s = self.mark(&verts);
        let vis = self.fresh_visit();
        let mut order = self.bfs(verts[0], s, vis);
        if order.len() < verts.len() {
            let mut comps = vec![order];
            for &v in &verts {
                if self.seen[v] != vis {
                    comps.push(self.bfs(v, s, vis));
                }
            }
            for mut c in comps {
                c.sort_unstable();
                self.run(c);
            }
            return;
        }
        if let Some(coords) = self.coords {
            let (p1, p2, sep) = self.plane_split(&verts, s, coords);
            self.run(p1);
            self.run(p2);
            self.out.extend(sep);
            return;
        }
        // Pseudo-peripheral root by repeated BFS.
        let mut root = verts[0];
        let mut depth = self.level[*order.last().unwrap()];
        for _ in 0..6 {
            let far = order
                .iter()
                .rev()
                .take_while(|&&v| self.level[v] == depth)
                .copied()
                .min_by_key(|&v| (self.g.neighbors(v).len(), v))
                .unwrap();
            let vis = self.fresh_visit();
            let o2 = self.bfs(far, s, vis);
            let d2 = self.level[*o2.last().unwrap()];
            if d2 <= depth {
                let vis = self.fresh_visit();
                order = self.bfs(root, s, vis);
                break;
            }
            root = far;
            depth = d2;
            order = o2;
        }
        let nlev = depth as usize + 1;
        if nlev < 3 {
            self.leaf(&verts);
            return;
        }
        let mut counts = vec![0usize; nlev];
        for &v in &order {
            counts[self.level[v] as usize] += 1;
        }
        let half = verts.len() / 2;
        let mut cum = 0;
        let mut m = 1;
        for (l, &c) in counts.iter().enumerate() {
            cum += c;
            if cum >= half {
                m = l;
                break;
            }
        }
        let m = m.clamp(1, nlev - 2) as u32;
        let mut part1 = Vec::new();
        let mut part2 = Vec::new();
        let mut sep = Vec::new();
        for &v in &order {
            let l = self.level[v];
            if l < m {
                part1.push(v);
            } else if l > m {
                part2.push(v);
            } else {
                let touches_next = self
                    .g
                    .neighbors(v)
                    .iter()
                    .any(|&u| self.stamp[u] == s && self.level[u] == m + 1);
                if touches_next {
                    sep.push(v);
                } else {
                    part1.push(v);
                }
            }
        }
        part1.sort_unstable();
        part2.sort_unstable();
        sep.sort_unstable();
        self.run(part1);
        self.run(part2);
        self.out.extend(sep);
    }

    /// Best vertex separator over axis-aligned cuts of the connected vertex
    /// set stamped `s`; candidates are scored by `|S| / (|P1| |P2|)`.
    fn plane_split(
        &mut self,
        verts: &[usize],
        s: u32,
        coords: &[[f64; 3]],
    ) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let n = verts.len();
        let mut best: Option<(f64, usize, usize, bool)> = None;
        let mut sorted: [Vec<usize>; 3] = Default::default();
        for (axis, slot) in sorted.iter_mut().enumerate() {
            let mut v = verts.to_vec();
            v.sort_by(|&a, &b| coords[a][axis].total_cmp(&coords[b][axis]).then(a.cmp(&b)));
            *slot = v;
        }
        for axis in 0..3 {
            for &frac in &CUTS {
                let cut = ((n as f64 * frac) as usize).clamp(1, n - 1);
                let order = &sorted[axis];
                for (i, &v) in order.iter().enumerate() {
                    self.side[v] = if i < cut { 1 } else { 2 };
                }
                // boundary vertices on each side
                let mut b1 = 0usize;
                let mut b2 = 0usize;
                for &v in order {
                    let sv = self.side[v];
                    let crosses = self
                        .g
                        .neighbors(v)
                        .iter()
                        .any(|&u| self.stamp[u] == s && self.side[u] != sv);
                    if crosses {
                        if sv == 1 {
                            b1 += 1;
                        } else {
                            b2 += 1;
                        }
                    }
                }
                let (sep, first) = if b1 <= b2 { (b1, true) } else { (b2, false) };
                let (n1, n2) = if first {
                    (cut - b1, n - cut)
                } else {
                    (cut, n - cut - b2)
                };
                if n1 == 0 || n2 == 0 {
                    continue;
                }
                let score = (sep as f64 + 1.0) / (n1 as f64 * n2 as f64);
                if best.map_or(true, |b| score < b.0) {
                    best = Some((score, axis, cut, first));
                }
            }
        }
        let (_, axis, cut, first) = best.unwrap_or((0.0, 0, n / 2, true));
        let order = &sorted[axis];
        for (i, &v) in order.iter().enumerate() {
            self.side[v] = if i < cut { 1 } else { 2 };
        }
        let sep_side = if first { 1 } else { 2 };
        let mut p1 = Vec::new();
        let mut p2 = Vec::new();
        let mut sep = Vec::new();
        for &v in verts {
            let sv = self.side[v];
            let on_sep = sv == sep_side
                && self
                    .g
                    .neighbors(v)
                    .iter()
                    .any(|&u| self.stamp[u] == s && self.side[u] != sv);
            if on_sep {
                sep.push(v);
            } else if sv == 1 {
                p1.push(v);
            } else {
                p2.push(v);
            }
        }
        (p1, p2, sep)
    }

    /// Exact minimum degree on the induced subgraph (bitset elimination).
    fn leaf(&mut self, verts: &[usize]) {
        let k = verts.len();
        if k <= 2 {
            self.out.extend_from_slice(verts);
            return;
        }
        let s = self.mark(verts);
        let words = k.div_ceil(64);
        let mut local = std::collections::HashMap::with_capacity(k);
        for (i, &v) in verts.iter().enumerate() {
            local.insert(v, i);
        }
        let mut adj = vec![0u64; k * words];
        for (i, &v) in verts.iter().enumerate() {
            for &u in self.g.neighbors(v) {
                if self.stamp[u] == s && u != v {
                    let j = local[&u];
                    adj[i * words + j / 64] |= 1 << (j % 64);
                }
            }
        }
        let mut alive = vec![true; k];
        for _ in 0..k {
            let mut best = usize::MAX;
            let mut best_deg = u32::MAX;
            for i in 0..k {
                if alive[i] {
                    let d: u32 = adj[i * words..(i + 1) * words]
                        .iter()
                        .map(|w| w.count_ones())
                        .sum();
                    if d < best_deg {
                        best_deg = d;
                        best = i;
                    }
                }
            }
            alive[best] = false;
            self.out.push(verts[best]);
            let nb: Vec<u64> = adj[best * words..(best + 1) * words].to_vec();
            let bit = (best / 64, 1u64 << (best % 64));
            for j in 0..k {
                if nb[j / 64] & (1 << (j % 64)) != 0 {
                    let row = &mut adj[j * words..(j + 1) * words];
                    for w in 0..words {
                        row[w] |= nb[w];
                    }
                    row[j / 64] &= !(1 << (j % 64));
                    row[bit.0] &= !bit.1;
                }
            }
        }
    }
}

/// Expand a group order into a dof permutation (`perm[k]` = old index of the
/// k-th new dof); dofs of one group stay consecutive in ascending order.
pub fn expand_groups(group_order: &[usize], group_of: &[usize]) -> Vec<usize> {
    let n_groups = group_order.len();
    let mut ptr = vec![0usize; n_groups + 1];
    for &g in group_of {
        ptr[g + 1] += 1;
    }
    for g in 0..n_groups {
        ptr[g + 1] += ptr[g];
    }
    let mut fill = ptr.clone();
    let mut members = vec![0usize; group_of.len()];
    for (d, &g) in group_of.iter().enumerate() {
        members[fill[g]] = d;
        fill[g] += 1;
    }
    let mut perm = Vec::with_capacity(group_of.len());
    for &g in group_order {
        perm.extend_from_slice(&members[ptr[g]..ptr[g + 1]]);
    }
    perm
}
