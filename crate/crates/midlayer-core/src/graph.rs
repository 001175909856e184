//! The bipartite d-regular graph on the two middle layers of the Hamming
//! cube (odd n = 2d-1), plus the rotated/leveled view and the neighborhood,
//! 2-linkage, closure and isoperimetry utilities everything else builds on.
//!
//! Vertices are n-bit masks (coordinate i = bit i-1). Indices are stable:
//! the lower layer (weight d-1) comes first, each layer sorted by mask.

use crate::error::{Error, Result};
use num_bigint::BigUint;
use num_traits::One;

pub const MIN_D: u32 = 2;
/// Structural cap; enumeration workloads self-limit well below this.
pub const MAX_D: u32 = 8;

pub type VertexId = u32;
/// Vertex sets are sorted, deduplicated index vectors.
pub type VertexSet = Vec<VertexId>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    /// L_{d-1}, Hamming weight d-1.
    Lower,
    /// L_d, Hamming weight d.
    Upper,
}

#[derive(Debug, Clone)]
pub struct MidLayerGraph {
    d: u32,
    n: u32,
    masks: Vec<u32>,
    index_of: Vec<u32>,
    adj: Vec<Vec<VertexId>>,
    adj2: Vec<Vec<VertexId>>,
}

/// Build B_d. Supported range is 2 ..= MAX_D.
pub fn build_graph(d: u32) -> Result<MidLayerGraph> {
    if !(MIN_D..=MAX_D).contains(&d) {
        return Err(Error::parameter(format!(
            "d must be in {MIN_D}..={MAX_D}, got {d}"
        )));
    }
    let n = 2 * d - 1;
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for mask in 0u32..(1 << n) {
        let w = mask.count_ones();
        if w == d - 1 {
            lower.push(mask);
        } else if w == d {
            upper.push(mask);
        }
    }
    // masks are generated in increasing order, so each layer is sorted
    let mut masks = lower;
    masks.extend_from_slice(&upper);
    let mut index_of = vec![u32::MAX; 1 << n];
    for (i, &m) in masks.iter().enumerate() {
        index_of[m as usize] = i as u32;
    }
    let count = masks.len();
    let mut adj = vec![Vec::with_capacity(d as usize); count];
    for v in 0..count {
        let m = masks[v];
        if m.count_ones() == d - 1 {
            for i in 0..n {
                if m & (1 << i) == 0 {
                    adj[v].push(index_of[(m | (1 << i)) as usize]);
                }
            }
        } else {
            // clearing higher bits yields smaller masks, so walk downwards
            for i in (0..n).rev() {
                if m & (1 << i) != 0 {
                    adj[v].push(index_of[(m & !(1 << i)) as usize]);
                }
            }
        }
        debug_assert_eq!(adj[v].len(), d as usize);
        debug_assert!(adj[v].windows(2).all(|w| w[0] < w[1]));
    }
    let mut adj2 = vec![Vec::new(); count];
    let mut mark = vec![false; count];
    for v in 0..count {
        for &u in &adj[v] {
            mark[u as usize] = true;
            for &w in &adj[u as usize] {
                mark[w as usize] = true;
            }
        }
        mark[v] = false;
        for (i, m) in mark.iter_mut().enumerate() {
            if *m {
                adj2[v].push(i as u32);
                *m = false;
            }
        }
    }
    Ok(MidLayerGraph {
        d,
        n,
        masks,
        index_of,
        adj,
        adj2,
    })
}

impl MidLayerGraph {
    pub fn d(&self) -> u32 {
        self.d
    }
    pub fn n(&self) -> u32 {
        self.n
    }
    pub fn vertex_count(&self) -> usize {
        self.masks.len()
    }
    pub fn edge_count(&self) -> usize {
        self.masks.len() * self.d as usize / 2
    }
    pub fn half_count(&self) -> usize {
        self.masks.len() / 2
    }
    pub fn mask(&self, v: VertexId) -> u32 {
        self.masks[v as usize]
    }
    pub fn index_of_mask(&self, mask: u32) -> Option<VertexId> {
        let i = *self.index_of.get(mask as usize)?;
        (i != u32::MAX).then_some(i)
    }
    pub fn layer(&self, v: VertexId) -> Layer {
        if (v as usize) < self.half_count() {
            Layer::Lower
        } else {
            Layer::Upper
        }
    }
    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.adj[v as usize]
    }
    /// Vertices at distance 1 or 2 (the square-graph neighborhood, no self).
    pub fn neighbors2(&self, v: VertexId) -> &[VertexId] {
        &self.adj2[v as usize]
    }
    pub fn layer_vertices(&self, layer: Layer) -> VertexSet {
        let half = self.half_count() as u32;
        match layer {
            Layer::Lower => (0..half).collect(),
            Layer::Upper => (half..2 * half).collect(),
        }
    }
    /// Bitstring form, coordinate 1 first.
    pub fn bits_string(&self, v: VertexId) -> String {
        let m = self.masks[v as usize];
        (0..self.n)
            .map(|i| if m & (1 << i) != 0 { '1' } else { '0' })
            .collect()
    }

    pub fn validate_set(&self, xs: &[VertexId]) -> Result<()> {
        let count = self.vertex_count() as u32;
        if xs.iter().any(|&v| v >= count) {
            return Err(Error::parameter("vertex index out of range"));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::parameter(
                "vertex set must be sorted and duplicate-free",
            ));
        }
        Ok(())
    }

    /// N(X) = all vertices adjacent to some x in X (may intersect X).
    pub fn neighborhood(&self, xs: &[VertexId]) -> VertexSet {
        let mut mark = vec![false; self.vertex_count()];
        for &x in xs {
            for &u in self.neighbors(x) {
                mark[u as usize] = true;
            }
        }
        mark.iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i as u32))
            .collect()
    }

    /// ∂X = N(X) \ X.
    pub fn outer_boundary(&self, xs: &[VertexId]) -> VertexSet {
        let n = self.neighborhood(xs);
        diff_sorted(&n, xs)
    }

    /// X⁺ = X ∪ N(X).
    pub fn closed_neighborhood(&self, xs: &[VertexId]) -> VertexSet {
        union_sorted(xs, &self.neighborhood(xs))
    }

    /// Maximal 2-linked subsets of X (components of the square graph
    /// induced on X), sorted by minimum element.
    pub fn two_linked_components(&self, xs: &[VertexId]) -> Vec<VertexSet> {
        let mut in_x = vec![false; self.vertex_count()];
        for &x in xs {
            in_x[x as usize] = true;
        }
        let mut seen = vec![false; self.vertex_count()];
        let mut comps = Vec::new();
        for &x in xs {
            if seen[x as usize] {
                continue;
            }
            let mut comp = vec![x];
            seen[x as usize] = true;
            let mut queue = vec![x];
            while let Some(v) = queue.pop() {
                for &u in self.neighbors2(v) {
                    if in_x[u as usize] && !seen[u as usize] {
                        seen[u as usize] = true;
                        comp.push(u);
                        queue.push(u);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    pub fn is_two_linked(&self, xs: &[VertexId]) -> bool {
        self.two_linked_components(xs).len() <= 1
    }

    /// Components of X under "within graph distance k" linkage.
    pub fn k_linked_components(&self, xs: &[VertexId], k: u32) -> Vec<VertexSet> {
        let mut in_x = vec![false; self.vertex_count()];
        for &x in xs {
            in_x[x as usize] = true;
        }
        let mut seen = vec![false; self.vertex_count()];
        let mut comps = Vec::new();
        for &x in xs {
            if seen[x as usize] {
                continue;
            }
            let mut comp = vec![x];
            seen[x as usize] = true;
            let mut queue = vec![x];
            while let Some(v) = queue.pop() {
                for u in self.ball(v, k) {
                    if in_x[u as usize] && !seen[u as usize] {
                        seen[u as usize] = true;
                        comp.push(u);
                        queue.push(u);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    /// Vertices within distance k of v, excluding v.
    fn ball(&self, v: VertexId, k: u32) -> VertexSet {
        let mut dist = vec![u32::MAX; self.vertex_count()];
        dist[v as usize] = 0;
        let mut frontier = vec![v];
        let mut out = Vec::new();
        for step in 1..=k {
            let mut next = Vec::new();
            for &u in &frontier {
                for &w in self.neighbors(u) {
                    if dist[w as usize] == u32::MAX {
                        dist[w as usize] = step;
                        next.push(w);
                        out.push(w);
                    }
                }
            }
            frontier = next;
        }
        out.sort_unstable();
        out
    }

    pub fn distance(&self, u: VertexId, v: VertexId) -> u32 {
        // one-coordinate steps: distance equals the Hamming distance here
        // as long as both endpoints stay in the two layers; BFS is the
        // definition, so use it
        let mut dist = vec![u32::MAX; self.vertex_count()];
        dist[u as usize] = 0;
        let mut queue = std::collections::VecDeque::from([u]);
        while let Some(x) = queue.pop_front() {
            if x == v {
                return dist[x as usize];
            }
            for &w in self.neighbors(x) {
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dist[x as usize] + 1;
                    queue.push_back(w);
                }
            }
        }
        u32::MAX
    }

    fn layer_of_set(&self, xs: &[VertexId]) -> Result<Option<Layer>> {
        self.validate_set(xs)?;
        let Some(&first) = xs.first() else {
            return Ok(None);
        };
        let layer = self.layer(first);
        if xs.iter().any(|&v| self.layer(v) != layer) {
            return Err(Error::parameter("set spans both layers"));
        }
        Ok(Some(layer))
    }

    /// [X] = { v in the layer of X : N(v) ⊆ N(X) }. The layer argument
    /// fixes the host layer (only consulted for empty X, validated
    /// otherwise). Monotone and idempotent.
    pub fn closure(&self, xs: &[VertexId], layer: Layer) -> Result<VertexSet> {
        if let Some(found) = self.layer_of_set(xs)? {
            if found != layer {
                return Err(Error::parameter("set does not lie in the stated layer"));
            }
        }
        let mut in_nbhd = vec![false; self.vertex_count()];
        for u in self.neighborhood(xs) {
            in_nbhd[u as usize] = true;
        }
        Ok(self
            .layer_vertices(layer)
            .into_iter()
            .filter(|&v| self.neighbors(v).iter().all(|&u| in_nbhd[u as usize]))
            .collect())
    }

    /// [X]⁻ = { u : N(u) ⊆ [X] }.
    pub fn closure_minus(&self, xs: &[VertexId], layer: Layer) -> Result<VertexSet> {
        let cl = self.closure(xs, layer)?;
        let mut in_cl = vec![false; self.vertex_count()];
        for &v in &cl {
            in_cl[v as usize] = true;
        }
        Ok((0..self.vertex_count() as u32)
            .filter(|&u| self.neighbors(u).iter().all(|&w| in_cl[w as usize]))
            .collect())
    }

    pub fn rotated_view(&self) -> RotatedView {
        RotatedView::new(self)
    }
}

/// The rotated picture: every mask is XORed with 1^{d-1}0^d, levels are the
/// coordinate sums over the first n-1 rotated coordinates, and the halves
/// V0/V1 split on the last coordinate. V* is the even levels of V0.
#[derive(Debug, Clone)]
pub struct RotatedView {
    d: u32,
    n: u32,
    level: Vec<u32>,
    in_v1: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Half {
    V0,
    V1,
}

#[derive(Debug, Clone)]
pub struct WAssociation {
    pub w: VertexId,
    /// Length-4 path v, p1, p2, p3, w inside V0.
    pub path: Vec<VertexId>,
}

impl RotatedView {
    fn new(g: &MidLayerGraph) -> Self {
        let rot_mask = (1u32 << (g.d - 1)) - 1;
        let last_bit = 1u32 << (g.n - 1);
        let level_mask = last_bit - 1;
        let mut level = Vec::with_capacity(g.vertex_count());
        let mut in_v1 = Vec::with_capacity(g.vertex_count());
        for &m in &g.masks {
            let r = m ^ rot_mask;
            level.push((r & level_mask).count_ones());
            in_v1.push(r & last_bit != 0);
        }
        RotatedView {
            d: g.d,
            n: g.n,
            level,
            in_v1,
        }
    }

    pub fn rotated_mask(&self, g: &MidLayerGraph, v: VertexId) -> u32 {
        g.mask(v) ^ ((1 << (self.d - 1)) - 1)
    }
    pub fn level(&self, v: VertexId) -> u32 {
        self.level[v as usize]
    }
    pub fn half(&self, v: VertexId) -> Half {
        if self.in_v1[v as usize] {
            Half::V1
        } else {
            Half::V0
        }
    }
    pub fn is_v_star(&self, v: VertexId) -> bool {
        self.half(v) == Half::V0 && self.level(v).is_multiple_of(2)
    }
    pub fn v_star(&self, g: &MidLayerGraph) -> VertexSet {
        (0..g.vertex_count() as u32)
            .filter(|&v| self.is_v_star(v))
            .collect()
    }

    /// The mate v' = v + e_n (in rotated coordinates), defined exactly at
    /// even levels; it lies in the opposite half at the same level, and
    /// mate(mate(v)) = v.
    pub fn mate(&self, g: &MidLayerGraph, v: VertexId) -> Result<VertexId> {
        if !self.level(v).is_multiple_of(2) {
            return Err(Error::parameter(format!(
                "mate undefined: vertex {v} is at odd level {}",
                self.level(v)
            )));
        }
        let flipped = g.mask(v) ^ (1 << (self.n - 1));
        g.index_of_mask(flipped).ok_or_else(|| {
            Error::inconsistency(
                "mate mask left the two layers; should be impossible at even level",
            )
        })
    }

    /// For v ∈ V* with level >= 4: some w ∈ V* at level |v|-4 joined to v
    /// by a 4-edge path inside V0. Picks the smallest valid (w, path) pair.
    pub fn associate_w(&self, g: &MidLayerGraph, v: VertexId) -> Result<WAssociation> {
        if !self.is_v_star(v) {
            return Err(Error::parameter(format!("vertex {v} is not in V*")));
        }
        let k = self.level(v);
        if k < 4 {
            return Err(Error::parameter(format!(
                "w(v) undefined: rotated weight {k} < 4"
            )));
        }
        let mut best: Option<(VertexId, Vec<VertexId>)> = None;
        let mut path = vec![v];
        self.descend(g, v, 4, &mut path, &mut best);
        match best {
            Some((w, path)) => Ok(WAssociation { w, path }),
            None => Err(Error::inconsistency(
                "no descending 4-path in V0; should be impossible for level >= 4",
            )),
        }
    }

    fn descend(
        &self,
        g: &MidLayerGraph,
        cur: VertexId,
        remaining: u32,
        path: &mut Vec<VertexId>,
        best: &mut Option<(VertexId, Vec<VertexId>)>,
    ) {
        if remaining == 0 {
            let w = cur;
            let cand = (w, path.clone());
            if best.as_ref().is_none_or(|b| cand < *b) {
                *best = Some(cand);
            }
            return;
        }
        let target = self.level(cur) - 1;
        for &u in g.neighbors(cur) {
            if self.half(u) == Half::V0 && self.level(u) == target {
                path.push(u);
                self.descend(g, u, remaining - 1, path, best);
                path.pop();
            }
        }
    }
}

/// Real-x binomial coefficient C(x, k).
pub fn binomial_real(x: f64, k: u32) -> f64 {
    let mut p = 1.0;
    for i in 0..k {
        p *= (x - i as f64) / (k - i) as f64;
    }
    p
}

/// Exact integer binomial.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut r = BigUint::one();
    for i in 0..k {
        r = r * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    r
}

/// Kruskal–Katona lower bound in Lovász form: solve C(x, d) = m for real
/// x >= d by bisection, return C(x, d-1) as a neighborhood-size lower bound.
pub fn lovasz_bound(m: f64, d: u32) -> f64 {
    assert!(m >= 1.0 && d >= 1);
    let mut lo = d as f64;
    let mut hi = d as f64 + 1.0;
    while binomial_real(hi, d) < m {
        hi = d as f64 + (hi - d as f64) * 2.0;
    }
    // C(x, d) is strictly increasing for x >= d
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if binomial_real(mid, d) < m {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    binomial_real(0.5 * (lo + hi), d - 1)
}

#[derive(Debug, Clone)]
pub struct IsoperimetryReport {
    pub set_size: usize,
    pub nbhd_size: usize,
    /// |X| <= d/4, the hypothesis of clause (i).
    pub clause_i_applicable: bool,
    /// |N(X)| >= d|X| - |X|^2/2, compared exactly.
    pub clause_i_holds: bool,
    /// |X| <= d^10.
    pub clause_ii_applicable: bool,
    /// |N(X)| >= d|X|/12, compared exactly.
    pub clause_ii_holds: bool,
}

/// Evaluate both isoperimetry clauses for a single-layer set. Violations
/// outside the applicable ranges are reported, never asserted.
pub fn isoperimetry_check(g: &MidLayerGraph, xs: &[VertexId]) -> Result<IsoperimetryReport> {
    g.layer_of_set(xs)?;
    let x = xs.len() as u64;
    let nb = g.neighborhood(xs).len() as u64;
    let d = g.d() as u64;
    Ok(IsoperimetryReport {
        set_size: xs.len(),
        nbhd_size: nb as usize,
        clause_i_applicable: 4 * x <= d,
        clause_i_holds: 2 * nb >= 2 * d * x - x * x,
        clause_ii_applicable: x <= d.pow(10),
        clause_ii_holds: 12 * nb >= d * x,
    })
}

pub fn union_sorted(a: &[VertexId], b: &[VertexId]) -> VertexSet {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

pub fn diff_sorted(a: &[VertexId], b: &[VertexId]) -> VertexSet {
    let mut out = Vec::with_capacity(a.len());
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j >= b.len() || b[j] != x {
            out.push(x);
        }
    }
    out
}

pub fn contains_sorted(a: &[VertexId], x: VertexId) -> bool {
    a.binary_search(&x).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_out_of_range_d() {
        assert!(build_graph(1).is_err());
        assert!(build_graph(MAX_D + 1).is_err());
    }

    #[test]
    fn b2_is_a_six_cycle() {
        let g = build_graph(2).unwrap();
        assert_eq!(g.vertex_count(), 6);
        assert_eq!(g.edge_count(), 6);
        for v in 0..6 {
            assert_eq!(g.neighbors(v).len(), 2);
        }
        // connected and bipartite with equal parts
        assert_eq!(
            g.two_linked_components(&(0..6).collect::<Vec<_>>()).len(),
            1
        );
        assert_eq!(g.layer_vertices(Layer::Lower).len(), 3);
    }

    #[test]
    fn b3_counts() {
        let g = build_graph(3).unwrap();
        assert_eq!(g.vertex_count(), 20);
        assert_eq!(g.edge_count(), 30);
        assert!((0..20).all(|v| g.neighbors(v).len() == 3));
    }

    #[test]
    fn vertex_count_matches_binomial_and_graph_is_connected() {
        for d in MIN_D..=MAX_D {
            let g = build_graph(d).unwrap();
            let expect = binomial(2 * d as u64 - 1, d as u64) * BigUint::from(2u32);
            assert_eq!(BigUint::from(g.vertex_count()), expect);
            let all: VertexSet = (0..g.vertex_count() as u32).collect();
            assert_eq!(g.two_linked_components(&all).len(), 1);
            let mut seen = vec![false; g.vertex_count()];
            let mut queue = vec![0u32];
            seen[0] = true;
            let mut visited = 1;
            while let Some(v) = queue.pop() {
                for &u in g.neighbors(v) {
                    if !seen[u as usize] {
                        seen[u as usize] = true;
                        visited += 1;
                        queue.push(u);
                    }
                }
            }
            assert_eq!(visited, g.vertex_count());
        }
    }

    #[test]
    fn neighborhood_basics() {
        let g = build_graph(3).unwrap();
        assert!(g.neighborhood(&[]).is_empty());
        assert_eq!(g.neighborhood(&[0]).len(), 3);
        let lower = g.layer_vertices(Layer::Lower);
        assert_eq!(g.neighborhood(&lower), g.layer_vertices(Layer::Upper));
    }

    #[test]
    fn two_linked_small_cases() {
        let g = build_graph(2).unwrap();
        assert!(g.two_linked_components(&[]).is_empty());
        // find a distance-2 pair and a distance-3 (antipodal) pair on the 6-cycle
        let v = 0u32;
        let d2 = *g.neighbors2(v).first().unwrap();
        assert_eq!(g.two_linked_components(&[v.min(d2), v.max(d2)]).len(), 1);
        let anti = (0..6u32)
            .find(|&u| u != v && g.distance(v, u) == 3)
            .unwrap();
        assert_eq!(g.two_linked_components(&[v, anti]).len(), 2);
    }

    #[test]
    fn closure_examples() {
        let g = build_graph(3).unwrap();
        assert!(g.closure(&[], Layer::Lower).unwrap().is_empty());
        let lower = g.layer_vertices(Layer::Lower);
        assert_eq!(g.closure(&lower, Layer::Lower).unwrap(), lower);
        // singleton closures are trivial in B_3: no other vertex has
        // N(u) ⊆ N(v); checked for every vertex of both layers
        for v in 0..20u32 {
            let layer = g.layer(v);
            assert_eq!(g.closure(&[v], layer).unwrap(), vec![v]);
        }
        assert!(g.closure(&[0, 10], Layer::Lower).is_err());
    }

    #[test]
    fn closure_minus_of_layer() {
        let g = build_graph(3).unwrap();
        let lower = g.layer_vertices(Layer::Lower);
        // [lower] = lower, then [lower]⁻ = all of V (every upper vertex has
        // all neighbors in the lower layer)
        let minus = g.closure_minus(&lower, Layer::Lower).unwrap();
        assert_eq!(minus, g.layer_vertices(Layer::Upper));
    }

    #[test]
    fn rotation_preserves_adjacency() {
        for d in MIN_D..=5 {
            let g = build_graph(d).unwrap();
            let view = g.rotated_view();
            for v in 0..g.vertex_count() as u32 {
                for &u in g.neighbors(v) {
                    let rv = view.rotated_mask(&g, v);
                    let ru = view.rotated_mask(&g, u);
                    assert_eq!((rv ^ ru).count_ones(), 1);
                }
            }
        }
    }

    #[test]
    fn mate_matching_and_parity() {
        for d in MIN_D..=6 {
            let g = build_graph(d).unwrap();
            let view = g.rotated_view();
            for v in 0..g.vertex_count() as u32 {
                if view.level(v).is_multiple_of(2) {
                    let m = view.mate(&g, v).unwrap();
                    assert_eq!(view.level(m), view.level(v));
                    assert_ne!(view.half(m), view.half(v));
                    assert!(g.neighbors(v).contains(&m));
                    assert_eq!(view.mate(&g, m).unwrap(), v);
                } else {
                    assert!(view.mate(&g, v).is_err());
                    // no edge crosses the halves at odd levels
                    if view.half(v) == Half::V0 {
                        for &u in g.neighbors(v) {
                            assert!(view.half(u) == Half::V0 || view.level(u) != view.level(v));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn v_star_size() {
        for d in MIN_D..=6 {
            let g = build_graph(d).unwrap();
            let view = g.rotated_view();
            let n = 2 * d as u64 - 1;
            assert_eq!(
                BigUint::from(view.v_star(&g).len()),
                binomial(n - 1, d as u64 - 1)
            );
        }
        let g = build_graph(3).unwrap();
        let view = g.rotated_view();
        assert_eq!(view.v_star(&g).len(), 6);
    }

    #[test]
    fn associate_w_defining_checks() {
        for d in [3u32, 4, 5] {
            let g = build_graph(d).unwrap();
            let view = g.rotated_view();
            for v in view.v_star(&g) {
                if view.level(v) < 4 {
                    assert!(view.associate_w(&g, v).is_err());
                    continue;
                }
                let assoc = view.associate_w(&g, v).unwrap();
                assert!(view.is_v_star(assoc.w));
                assert_eq!(view.level(assoc.w), view.level(v) - 4);
                assert_eq!(assoc.path.len(), 5);
                assert_eq!(assoc.path[0], v);
                assert_eq!(assoc.path[4], assoc.w);
                for pair in assoc.path.windows(2) {
                    assert!(g.neighbors(pair[0]).contains(&pair[1]));
                    assert_eq!(view.half(pair[1]), Half::V0);
                }
            }
        }
    }

    #[test]
    fn lovasz_bound_examples() {
        assert!((lovasz_bound(10.0, 3) - 10.0).abs() < 1e-9);
        for d in 1..6 {
            assert!((lovasz_bound(1.0, d) - d as f64).abs() < 1e-9);
        }
        let v = lovasz_bound(12.0, 3);
        assert!(v > 10.0 && v < 15.0, "got {v}");
    }

    #[test]
    fn isoperimetry_small_sets() {
        let g = build_graph(5).unwrap();
        let lower = g.layer_vertices(Layer::Lower);
        for i in 0..lower.len() {
            let r = isoperimetry_check(&g, &[lower[i]]).unwrap();
            assert!(r.clause_i_holds && r.clause_ii_holds);
            for j in i + 1..lower.len() {
                let r = isoperimetry_check(&g, &[lower[i], lower[j]]).unwrap();
                assert!(r.clause_i_holds, "clause i failed for a pair");
            }
        }
        assert!(isoperimetry_check(&g, &[0, g.half_count() as u32]).is_err());
    }

    proptest! {
        #[test]
        fn closure_monotone_and_idempotent(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let g = build_graph(4).unwrap();
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let lower = g.layer_vertices(Layer::Lower);
            let xs: VertexSet = lower.iter().copied()
                .filter(|_| rng.gen_bool(0.2)).collect();
            let ys: VertexSet = union_sorted(&xs, &lower.iter().copied()
                .filter(|_| rng.gen_bool(0.2)).collect::<Vec<_>>());
            let cx = g.closure(&xs, Layer::Lower).unwrap();
            let cy = g.closure(&ys, Layer::Lower).unwrap();
            prop_assert!(diff_sorted(&cx, &cy).is_empty(), "closure not monotone");
            let cc = g.closure(&cx, Layer::Lower).unwrap();
            prop_assert_eq!(&cc, &cx);
        }

        #[test]
        fn two_linked_components_partition(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let g = build_graph(3).unwrap();
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let xs: VertexSet = (0..g.vertex_count() as u32)
                .filter(|_| rng.gen_bool(0.3)).collect();
            let comps = g.two_linked_components(&xs);
            let mut merged: VertexSet = comps.iter().flatten().copied().collect();
            merged.sort_unstable();
            prop_assert_eq!(&merged, &xs);
            for (i, a) in comps.iter().enumerate() {
                prop_assert!(g.is_two_linked(a));
                for b in comps.iter().skip(i + 1) {
                    prop_assert!(!g.is_two_linked(&union_sorted(a, b)));
                }
            }
        }
    }
}
