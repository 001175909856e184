//! Proper q-colorings of B_d: principal partitions, flaw decompositions,
//! the threshold polymer size, balance checks, and exact counting by an
//! independent brute-force path (d <= 2) and a frontier DP (d <= 3).

use crate::error::{Error, Result};
use crate::graph::{Layer, MidLayerGraph, VertexId, VertexSet};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use std::collections::HashMap;

pub type Color = u8;

/// Ordered pair (A, B) of disjoint color classes covering {1..q} with
/// sizes {⌊q/2⌋, ⌈q/2⌉}. A colors the upper layer, B the lower.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrincipalPartition {
    q: u32,
    a: Vec<Color>,
    b: Vec<Color>,
    #[serde(skip)]
    a_mask: u64,
    #[serde(skip)]
    b_mask: u64,
}

fn mask_of(colors: &[Color]) -> u64 {
    colors.iter().fold(0u64, |m, &c| m | (1 << c))
}

impl PrincipalPartition {
    pub fn new(q: u32, mut a: Vec<Color>, mut b: Vec<Color>) -> Result<Self> {
        if !(2..=63).contains(&q) {
            return Err(Error::parameter("q must be in 2..=63"));
        }
        a.sort_unstable();
        b.sort_unstable();
        let a_mask = mask_of(&a);
        let b_mask = mask_of(&b);
        let full: u64 = ((1u64 << q) - 1) << 1;
        if a_mask & b_mask != 0
            || a_mask | b_mask != full
            || a.len() as u64 + b.len() as u64 != q as u64
        {
            return Err(Error::parameter("A, B must partition {1..q}"));
        }
        let (lo, hi) = (q as usize / 2, q as usize - q as usize / 2);
        if !(a.len() == lo && b.len() == hi) && !(a.len() == hi && b.len() == lo) {
            return Err(Error::parameter("sizes must be {⌊q/2⌋, ⌈q/2⌉}"));
        }
        Ok(PrincipalPartition {
            q,
            a,
            b,
            a_mask,
            b_mask,
        })
    }

    pub fn q(&self) -> u32 {
        self.q
    }
    pub fn a(&self) -> &[Color] {
        &self.a
    }
    pub fn b(&self) -> &[Color] {
        &self.b
    }
    pub fn in_a(&self, c: Color) -> bool {
        self.a_mask & (1 << c) != 0
    }
    pub fn in_b(&self, c: Color) -> bool {
        self.b_mask & (1 << c) != 0
    }
    pub fn swapped(&self) -> PrincipalPartition {
        PrincipalPartition {
            q: self.q,
            a: self.b.clone(),
            b: self.a.clone(),
            a_mask: self.b_mask,
            b_mask: self.a_mask,
        }
    }
    /// Side that colors the given layer.
    pub fn side(&self, layer: Layer) -> &[Color] {
        match layer {
            Layer::Upper => &self.a,
            Layer::Lower => &self.b,
        }
    }
    pub fn wrong_side(&self, layer: Layer) -> &[Color] {
        match layer {
            Layer::Upper => &self.b,
            Layer::Lower => &self.a,
        }
    }
    /// f agrees with (A,B) at a vertex of `layer` colored `c`.
    pub fn agrees(&self, layer: Layer, c: Color) -> bool {
        match layer {
            Layer::Upper => self.in_a(c),
            Layer::Lower => self.in_b(c),
        }
    }
}

/// Every ordered principal pair, sorted lexicographically by (A, B).
pub fn principal_partitions(q: u32) -> Result<Vec<PrincipalPartition>> {
    if q < 2 {
        return Err(Error::parameter("q must be at least 2"));
    }
    let lo = q / 2;
    let hi = q - lo;
    let mut sizes = vec![lo];
    if hi != lo {
        sizes.push(hi);
    }
    let mut out = Vec::new();
    for &size in &sizes {
        let mut combo: Vec<Color> = (1..=size as Color).collect();
        loop {
            let a = combo.clone();
            let b: Vec<Color> = (1..=q as Color).filter(|c| !a.contains(c)).collect();
            out.push(PrincipalPartition::new(q, a, b)?);
            // next lexicographic combination of {1..q}
            let mut i = size as usize;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if combo[i] < (q - (size - 1 - i as u32)) as Color {
                    combo[i] += 1;
                    for j in i + 1..size as usize {
                        combo[j] = combo[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    combo.clear();
                    break;
                }
            }
            if combo.is_empty() {
                break;
            }
        }
    }
    out.sort_by(|p, r| p.a.cmp(&r.a).then_with(|| p.b.cmp(&r.b)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    values: Vec<Color>,
}

impl Coloring {
    pub fn new(g: &MidLayerGraph, q: u32, values: Vec<Color>) -> Result<Self> {
        if values.len() != g.vertex_count() {
            return Err(Error::validation("coloring length does not match graph"));
        }
        if values.iter().any(|&c| c == 0 || c as u32 > q) {
            return Err(Error::validation("color out of range 1..=q"));
        }
        Ok(Coloring { values })
    }
    pub fn values(&self) -> &[Color] {
        &self.values
    }
    pub fn color(&self, v: VertexId) -> Color {
        self.values[v as usize]
    }
    pub fn is_proper(&self, g: &MidLayerGraph) -> bool {
        (0..g.vertex_count() as u32).all(|v| {
            g.neighbors(v)
                .iter()
                .all(|&u| u <= v || self.values[u as usize] != self.values[v as usize])
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlawReport {
    pub partition: PrincipalPartition,
    pub flaw: VertexSet,
    pub components: Vec<VertexSet>,
    pub max_component_size: usize,
}

/// X_{A,B}(f): the vertices where f disagrees with (A,B), with its
/// 2-linked decomposition. Requires f proper.
pub fn flaw(g: &MidLayerGraph, f: &Coloring, p: &PrincipalPartition) -> Result<FlawReport> {
    if !f.is_proper(g) {
        return Err(Error::validation("coloring is not proper"));
    }
    Ok(flaw_unchecked(g, f, p))
}

pub(crate) fn flaw_set(g: &MidLayerGraph, f: &Coloring, p: &PrincipalPartition) -> VertexSet {
    (0..g.vertex_count() as u32)
        .filter(|&v| !p.agrees(g.layer(v), f.color(v)))
        .collect()
}

fn flaw_unchecked(g: &MidLayerGraph, f: &Coloring, p: &PrincipalPartition) -> FlawReport {
    let fl = flaw_set(g, f, p);
    let components = g.two_linked_components(&fl);
    let max_component_size = components.iter().map(|c| c.len()).max().unwrap_or(0);
    FlawReport {
        partition: p.clone(),
        flaw: fl,
        components,
        max_component_size,
    }
}

/// The principal partition minimizing the flaw size, ties broken by the
/// lexicographic order on (sorted A, sorted B).
pub fn nearest_ground_state(g: &MidLayerGraph, f: &Coloring, q: u32) -> Result<FlawReport> {
    if !f.is_proper(g) {
        return Err(Error::validation("coloring is not proper"));
    }
    let parts = principal_partitions(q)?;
    let mut best: Option<(usize, usize)> = None; // (flaw size, partition index)
    for (i, p) in parts.iter().enumerate() {
        let size = flaw_set(g, f, p).len();
        if best.is_none_or(|(bs, _)| size < bs) {
            best = Some((size, i));
        }
    }
    let (_, idx) = best.expect("at least one principal partition");
    Ok(flaw_unchecked(g, f, &parts[idx]))
}

/// T(q): the smallest integer t with 2 + t·log2(1 - 2/q) < 0, decided by
/// the exact integer comparison q^t > 4·(q-2)^t.
pub fn threshold_polymer_size(q: u32) -> Result<u32> {
    if q <= 2 {
        return Err(Error::parameter("threshold size needs q >= 3"));
    }
    let four = BigUint::from(4u32);
    let mut t = 1u32;
    loop {
        let lhs = BigUint::from(q).pow(t);
        let rhs = &four * BigUint::from(q - 2).pow(t);
        if lhs > rhs {
            return Ok(t);
        }
        t += 1;
    }
}

/// Every color used on its own side within s of its uniform share.
pub fn is_s_balanced(
    g: &MidLayerGraph,
    f: &Coloring,
    p: &PrincipalPartition,
    s: &BigRational,
) -> bool {
    let half = BigRational::from_integer(g.half_count().into());
    for (layer, side) in [(Layer::Upper, p.a()), (Layer::Lower, p.b())] {
        let verts = g.layer_vertices(layer);
        let share = BigRational::new(1.into(), side.len().into());
        for &c in side {
            let cnt = verts.iter().filter(|&&v| f.color(v) == c).count();
            let prop = BigRational::from_integer(cnt.into()) / &half;
            if (prop - &share).abs() > *s {
                return false;
            }
        }
    }
    true
}

/// Call `visit` with every proper q-coloring, assigning in index order.
/// Feasible for d <= 2 only (enforced by `brute_enumerate`).
pub fn for_each_proper_coloring<F: FnMut(&[Color])>(g: &MidLayerGraph, q: u32, visit: &mut F) {
    let mut values = vec![0 as Color; g.vertex_count()];
    fn rec<F: FnMut(&[Color])>(
        g: &MidLayerGraph,
        q: u32,
        v: usize,
        values: &mut Vec<Color>,
        visit: &mut F,
    ) {
        if v == values.len() {
            visit(values);
            return;
        }
        'colors: for c in 1..=q as Color {
            for &u in g.neighbors(v as u32) {
                if (u as usize) < v && values[u as usize] == c {
                    continue 'colors;
                }
            }
            values[v] = c;
            rec(g, q, v + 1, values, visit);
        }
        values[v] = 0;
    }
    rec(g, q, 0, &mut values, visit);
}

/// All proper q-colorings, by exhaustive search. Limited to d <= 2.
pub fn brute_enumerate(g: &MidLayerGraph, q: u32) -> Result<Vec<Coloring>> {
    if g.d() > 2 {
        return Err(Error::resource(format!(
            "brute-force enumeration supports d <= 2; d={} would visit ~{}^{} assignments",
            g.d(),
            q,
            g.vertex_count()
        )));
    }
    let mut out = Vec::new();
    for_each_proper_coloring(g, q, &mut |vals| {
        out.push(Coloring {
            values: vals.to_vec(),
        })
    });
    Ok(out)
}

/// Exact number of proper q-colorings, via frontier DP over a BFS order
/// from the lexicographically smallest vertex. Supported for d <= 3.
pub fn count_colorings_exact(g: &MidLayerGraph, q: u32) -> Result<BigUint> {
    if q == 0 {
        return Ok(BigUint::zero());
    }
    if g.d() > 3 || (g.d() == 3 && q > 6) {
        // the state table is keyed by frontier colorings; ~q^10 states at
        // d=3 puts q=7 already out of reach
        let frontier = if g.d() == 3 { 10u32 } else { 30 };
        return Err(Error::resource(format!(
            "exact counting supports d <= 3 with q <= 6 at d=3; \
             d={} q={q} needs on the order of {q}^{frontier} ≈ 10^{} frontier states",
            g.d(),
            (frontier as f64 * (q.max(2) as f64).log10()).round() as u64
        )));
    }
    let order = bfs_order(g);
    let mut pos = vec![usize::MAX; g.vertex_count()];
    for (i, &v) in order.iter().enumerate() {
        pos[v as usize] = i;
    }

    // states: colors of the active frontier, keyed in frontier order
    let mut frontier: Vec<VertexId> = Vec::new();
    let mut states: HashMap<Vec<Color>, BigUint> = HashMap::new();
    states.insert(Vec::new(), BigUint::one());

    for (step, &v) in order.iter().enumerate() {
        let nbr_slots: Vec<usize> = g
            .neighbors(v)
            .iter()
            .filter(|&&u| pos[u as usize] < step)
            .map(|&u| {
                frontier
                    .iter()
                    .position(|&w| w == u)
                    .expect("processed neighbor must be on the frontier")
            })
            .collect();

        // v joins the frontier; drop members with no unprocessed neighbors
        let mut next_frontier = frontier.clone();
        next_frontier.push(v);
        let keep: Vec<bool> = next_frontier
            .iter()
            .map(|&u| g.neighbors(u).iter().any(|&w| pos[w as usize] > step))
            .collect();
        let mut next_states: HashMap<Vec<Color>, BigUint> = HashMap::with_capacity(states.len());
        for (key, count) in &states {
            for c in 1..=q as Color {
                if nbr_slots.iter().any(|&i| key[i] == c) {
                    continue;
                }
                let mut full = key.clone();
                full.push(c);
                let new_key: Vec<Color> = full
                    .iter()
                    .zip(&keep)
                    .filter_map(|(&col, &k)| k.then_some(col))
                    .collect();
                *next_states.entry(new_key).or_default() += count;
            }
        }
        frontier = next_frontier
            .into_iter()
            .zip(&keep)
            .filter_map(|(u, &k)| k.then_some(u))
            .collect();
        states = next_states;
        if states.is_empty() {
            return Ok(BigUint::zero());
        }
    }
    Ok(states.into_values().sum())
}

fn bfs_order(g: &MidLayerGraph) -> Vec<VertexId> {
    let mut seen = vec![false; g.vertex_count()];
    let mut order = Vec::with_capacity(g.vertex_count());
    let mut queue = std::collections::VecDeque::from([0u32]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &u in g.neighbors(v) {
            if !seen[u as usize] {
                seen[u as usize] = true;
                queue.push_back(u);
            }
        }
    }
    debug_assert_eq!(order.len(), g.vertex_count());
    order
}

/// (q-1)^6 + (q-1): proper q-colorings of the 6-cycle, used as an oracle
/// for B_2.
pub fn cycle6_color_count(q: u32) -> BigUint {
    let qm1 = BigUint::from(q - 1);
    qm1.pow(6) + qm1
}
