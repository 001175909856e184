//! Polymers (2-linked vertex sets with bounded size/boundary), their exact
//! rational weights, the partition function over pairwise non-adjacent
//! families, the capture identity, and the Kotecký–Preiss bookkeeping sum.

use crate::coloring::{Color, PrincipalPartition};
use crate::error::{Error, Result};
use crate::graph::{contains_sorted, union_sorted, MidLayerGraph, VertexId, VertexSet};
use crate::interval::{exp_interval, exp_rat, IntervalOrdering, RatInterval};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;

/// Explicit admissibility caps. These replace the paper-style asymptotic
/// boundary cap with concrete, CLI-visible parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolymerParams {
    pub max_size: usize,
    pub max_boundary: usize,
}

impl PolymerParams {
    pub fn new(max_size: usize, max_boundary: usize) -> Self {
        PolymerParams {
            max_size,
            max_boundary,
        }
    }
    /// No effective caps: every 2-linked set is admissible.
    pub fn unrestricted(g: &MidLayerGraph) -> Self {
        PolymerParams {
            max_size: g.vertex_count(),
            max_boundary: g.vertex_count(),
        }
    }
    pub fn with_max_size(g: &MidLayerGraph, max_size: usize) -> Self {
        PolymerParams {
            max_size,
            max_boundary: g.vertex_count(),
        }
    }
}

/// A nonempty 2-linked vertex set together with its neighborhood.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polymer {
    verts: VertexSet,
    nbhd: VertexSet,
}

impl Polymer {
    pub fn new(g: &MidLayerGraph, verts: VertexSet) -> Result<Self> {
        g.validate_set(&verts)?;
        if verts.is_empty() {
            return Err(Error::parameter("a polymer must be nonempty"));
        }
        if !g.is_two_linked(&verts) {
            return Err(Error::parameter("a polymer must be 2-linked"));
        }
        let nbhd = g.neighborhood(&verts);
        Ok(Polymer { verts, nbhd })
    }
    pub fn vertices(&self) -> &[VertexId] {
        &self.verts
    }
    pub fn size(&self) -> usize {
        self.verts.len()
    }
    /// |N(γ)|.
    pub fn boundary_size(&self) -> usize {
        self.nbhd.len()
    }
    pub fn neighborhood(&self) -> &[VertexId] {
        &self.nbhd
    }
    /// γ⁺ = γ ∪ N(γ).
    pub fn closure(&self) -> VertexSet {
        union_sorted(&self.verts, &self.nbhd)
    }
    pub fn admissible(&self, params: &PolymerParams) -> bool {
        self.size() <= params.max_size && self.boundary_size() <= params.max_boundary
    }
}

/// All admissible polymers in deterministic order (size, then vertex list);
/// with a root, only those containing it.
pub fn enumerate_polymers(
    g: &MidLayerGraph,
    params: &PolymerParams,
    root: Option<VertexId>,
) -> Vec<Polymer> {
    let mut out = Vec::new();
    if params.max_size == 0 {
        return out;
    }
    let count = g.vertex_count() as u32;
    // ESU-style growth over the square graph: sets are extended only by
    // exclusive neighbors with index above the anchor, so every connected
    // set of G² is emitted exactly once
    let mut in_set = vec![false; count as usize];
    let mut in_nbhd2 = vec![false; count as usize];
    for r in 0..count {
        let ext: Vec<u32> = g.neighbors2(r).iter().copied().filter(|&u| u > r).collect();
        in_set[r as usize] = true;
        for &u in g.neighbors2(r) {
            in_nbhd2[u as usize] = true;
        }
        let mut stack = vec![r];
        grow(
            g,
            params,
            r,
            &mut stack,
            ext,
            &mut in_set,
            &mut in_nbhd2,
            &mut out,
        );
        in_set[r as usize] = false;
        for &u in g.neighbors2(r) {
            in_nbhd2[u as usize] = false;
        }
    }
    if let Some(v) = root {
        out.retain(|p| contains_sorted(p.vertices(), v));
    }
    out.sort_by(|a, b| {
        a.size()
            .cmp(&b.size())
            .then_with(|| a.vertices().cmp(b.vertices()))
    });
    out
}

#[allow(clippy::too_many_arguments)]
fn grow(
    g: &MidLayerGraph,
    params: &PolymerParams,
    anchor: u32,
    set: &mut Vec<u32>,
    ext: Vec<u32>,
    in_set: &mut Vec<bool>,
    in_nbhd2: &mut Vec<bool>,
    out: &mut Vec<Polymer>,
) {
    let mut verts = set.clone();
    verts.sort_unstable();
    let nbhd = g.neighborhood(&verts);
    if nbhd.len() <= params.max_boundary {
        out.push(Polymer { verts, nbhd });
    }
    if set.len() == params.max_size {
        return;
    }
    for (i, &w) in ext.iter().enumerate() {
        // candidates added by w: exclusive square-graph neighbors
        let fresh: Vec<u32> = g
            .neighbors2(w)
            .iter()
            .copied()
            .filter(|&u| u > anchor && !in_set[u as usize] && !in_nbhd2[u as usize])
            .collect();
        let mut next_ext: Vec<u32> = ext[i + 1..].to_vec();
        next_ext.extend_from_slice(&fresh);
        set.push(w);
        in_set[w as usize] = true;
        for &u in &fresh {
            in_nbhd2[u as usize] = true;
        }
        grow(g, params, anchor, set, next_ext, in_set, in_nbhd2, out);
        for &u in &fresh {
            in_nbhd2[u as usize] = false;
        }
        in_set[w as usize] = false;
        set.pop();
    }
}

/// Two polymers are adjacent iff their union is 2-linked; every polymer is
/// adjacent to itself. For 2-linked sets this is a cross-distance test.
pub fn polymer_adjacent(g: &MidLayerGraph, a: &Polymer, b: &Polymer) -> bool {
    if a.vertices() == b.vertices() {
        return true;
    }
    // union of two 2-linked sets is 2-linked iff some pair is within
    // distance 2, i.e. b meets a ∪ N(a) ∪ N(N(a))
    let reach = union_sorted(&a.closure(), &g.neighborhood(a.neighborhood()));
    b.vertices().iter().any(|&v| contains_sorted(&reach, v))
}

/// Visit every legal partial coloring of γ⁺: γ-vertices take wrong-side
/// colors, boundary vertices right-side colors, properness enforced on the
/// induced subgraph. The visitor receives colors aligned with `order`.
pub fn for_each_local_coloring<F: FnMut(&[Color])>(
    g: &MidLayerGraph,
    gamma: &Polymer,
    p: &PrincipalPartition,
    order: &[VertexId],
    visit: &mut F,
) {
    let k = order.len();
    // neighbors among earlier positions only
    let earlier: Vec<Vec<usize>> = order
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            order[..i]
                .iter()
                .enumerate()
                .filter_map(|(j, &u)| g.neighbors(v).contains(&u).then_some(j))
                .collect()
        })
        .collect();
    let allowed: Vec<&[Color]> = order
        .iter()
        .map(|&v| {
            if contains_sorted(gamma.vertices(), v) {
                p.wrong_side(g.layer(v))
            } else {
                p.side(g.layer(v))
            }
        })
        .collect();
    let mut colors = vec![0 as Color; k];
    fn rec<F: FnMut(&[Color])>(
        i: usize,
        colors: &mut Vec<Color>,
        allowed: &[&[Color]],
        earlier: &[Vec<usize>],
        visit: &mut F,
    ) {
        if i == colors.len() {
            visit(colors);
            return;
        }
        'next: for &c in allowed[i] {
            for &j in &earlier[i] {
                if colors[j] == c {
                    continue 'next;
                }
            }
            colors[i] = c;
            rec(i + 1, colors, allowed, earlier, visit);
        }
    }
    rec(0, &mut colors, &allowed, &earlier, visit);
}

/// |χ̂(γ)|: the weight numerator, by exhaustive local enumeration.
pub fn local_coloring_count(g: &MidLayerGraph, gamma: &Polymer, p: &PrincipalPartition) -> BigUint {
    let order = gamma.closure();
    let mut count = BigUint::zero();
    for_each_local_coloring(g, gamma, p, &order, &mut |_| count += 1u32);
    count
}

fn weight_denominator(g: &MidLayerGraph, closure: &[VertexId], p: &PrincipalPartition) -> BigUint {
    let upper = closure
        .iter()
        .filter(|&&v| g.layer(v) == crate::graph::Layer::Upper)
        .count() as u32;
    let lower = closure.len() as u32 - upper;
    BigUint::from(p.a().len()).pow(upper) * BigUint::from(p.b().len()).pow(lower)
}

/// ω(γ): local defect-coloring count over the ground-state count on γ⁺.
pub fn weight(g: &MidLayerGraph, gamma: &Polymer, p: &PrincipalPartition) -> BigRational {
    let closure = gamma.closure();
    let numer = local_coloring_count(g, gamma, p);
    let denom = weight_denominator(g, &closure, p);
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Global-route weight: count full colorings with flaw exactly γ, divided
/// by (|A||B|)^{N/2}. Brute-force feasible for d <= 2 only; must agree with
/// the local route exactly.
pub fn weight_global_oracle(
    g: &MidLayerGraph,
    gamma: &Polymer,
    p: &PrincipalPartition,
) -> Result<BigRational> {
    if g.d() > 2 {
        return Err(Error::resource(
            "global weight oracle enumerates all colorings; d <= 2 only",
        ));
    }
    let q = p.q();
    let mut count = BigUint::zero();
    crate::coloring::for_each_proper_coloring(g, q, &mut |vals| {
        let mut matches = true;
        for v in 0..g.vertex_count() as u32 {
            let disagrees = !p.agrees(g.layer(v), vals[v as usize]);
            if disagrees != contains_sorted(gamma.vertices(), v) {
                matches = false;
                break;
            }
        }
        if matches {
            count += 1u32;
        }
    });
    let denom = BigUint::from(p.a().len() * p.b().len()).pow(g.half_count() as u32);
    Ok(BigRational::new(BigInt::from(count), BigInt::from(denom)))
}

/// ω̃(γ) = ω(γ)·exp(|γ|/d), enclosed.
pub fn tilted_weight(
    g: &MidLayerGraph,
    gamma: &Polymer,
    p: &PrincipalPartition,
    precision: u32,
) -> RatInterval {
    let w = weight(g, gamma, p);
    let arg = BigRational::new(BigInt::from(gamma.size()), BigInt::from(g.d()));
    exp_rat(&arg, precision).scale_nonneg(&w)
}

/// A polymer with its exact weight and tilted weight.
#[derive(Debug, Clone)]
pub struct WeightedPolymer {
    pub polymer: Polymer,
    pub weight: BigRational,
    pub tilted: RatInterval,
}

pub fn weighted_polymers(
    g: &MidLayerGraph,
    params: &PolymerParams,
    p: &PrincipalPartition,
    precision: u32,
) -> Vec<WeightedPolymer> {
    let polymers = enumerate_polymers(g, params, None);
    polymers
        .into_par_iter()
        .map(|gamma| {
            let weight = weight(g, &gamma, p);
            let arg = BigRational::new(BigInt::from(gamma.size()), BigInt::from(g.d()));
            let tilted = exp_rat(&arg, precision).scale_nonneg(&weight);
            WeightedPolymer {
                polymer: gamma,
                weight,
                tilted,
            }
        })
        .collect()
}

/// Pairwise adjacency rows as bitsets, for family/cluster enumeration.
pub fn adjacency_matrix(g: &MidLayerGraph, polymers: &[Polymer]) -> Vec<Vec<u64>> {
    let words = polymers.len().div_ceil(64);
    let verts = g.vertex_count();
    // reach mask per polymer: vertices within distance 2
    let reach: Vec<Vec<u64>> = polymers
        .par_iter()
        .map(|poly| {
            let mut mask = vec![0u64; verts.div_ceil(64)];
            for v in union_sorted(&poly.closure(), &g.neighborhood(poly.neighborhood())) {
                mask[v as usize / 64] |= 1 << (v % 64);
            }
            mask
        })
        .collect();
    let vert_mask: Vec<Vec<u64>> = polymers
        .iter()
        .map(|poly| {
            let mut mask = vec![0u64; verts.div_ceil(64)];
            for &v in poly.vertices() {
                mask[v as usize / 64] |= 1 << (v % 64);
            }
            mask
        })
        .collect();
    (0..polymers.len())
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0u64; words];
            for j in 0..polymers.len() {
                let touches = reach[i].iter().zip(&vert_mask[j]).any(|(a, b)| a & b != 0);
                if touches {
                    row[j / 64] |= 1 << (j % 64);
                }
            }
            row
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct XiResult {
    pub xi: BigRational,
    /// Number of families Λ ∈ Ω_P enumerated (the empty family included).
    pub family_count: u64,
    /// Largest |Λ| = Σ|γ| over enumerated families.
    pub max_family_size: usize,
    pub polymer_count: usize,
}

pub const DEFAULT_FAMILY_CAP: u64 = 20_000_000;

/// Ξ(P, ω) = Σ_{Λ ∈ Ω_P} Π ω(γ), by depth-first enumeration of the
/// independent sets of the incompatibility graph.
pub fn partition_function(
    g: &MidLayerGraph,
    params: &PolymerParams,
    p: &PrincipalPartition,
    family_cap: u64,
) -> Result<XiResult> {
    let polymers = enumerate_polymers(g, params, None);
    let weights: Vec<BigRational> = polymers
        .par_iter()
        .map(|gamma| weight(g, gamma, p))
        .collect();
    let adj = adjacency_matrix(g, &polymers);
    xi_over(&polymers, &weights, &adj, family_cap)
}

pub(crate) fn xi_over(
    polymers: &[Polymer],
    weights: &[BigRational],
    adj: &[Vec<u64>],
    family_cap: u64,
) -> Result<XiResult> {
    let n = polymers.len();
    let words = n.div_ceil(64);
    let mut xi = BigRational::one(); // empty family
    let mut family_count = 1u64;
    let mut max_family_size = 0usize;
    let mut blocked = vec![0u64; words];
    // stack of (next candidate, family weight, family size, saved blocked)
    #[allow(clippy::too_many_arguments)]
    fn dfs(
        start: usize,
        weight_so_far: &BigRational,
        size_so_far: usize,
        blocked: &mut Vec<u64>,
        polymers: &[Polymer],
        weights: &[BigRational],
        adj: &[Vec<u64>],
        xi: &mut BigRational,
        family_count: &mut u64,
        max_family_size: &mut usize,
        family_cap: u64,
    ) -> Result<()> {
        for i in start..polymers.len() {
            if blocked[i / 64] & (1 << (i % 64)) != 0 {
                continue;
            }
            let w = weight_so_far * &weights[i];
            let size = size_so_far + polymers[i].size();
            *family_count += 1;
            if *family_count > family_cap {
                return Err(Error::resource(format!(
                    "family enumeration exceeded cap {family_cap}; \
                     partial: {} families, max |Λ| {} so far",
                    *family_count - 1,
                    *max_family_size
                )));
            }
            *xi += &w;
            *max_family_size = (*max_family_size).max(size);
            let saved = blocked.clone();
            for (word, a) in blocked.iter_mut().zip(&adj[i]) {
                *word |= a;
            }
            dfs(
                i + 1,
                &w,
                size,
                blocked,
                polymers,
                weights,
                adj,
                xi,
                family_count,
                max_family_size,
                family_cap,
            )?;
            *blocked = saved;
        }
        Ok(())
    }
    dfs(
        0,
        &BigRational::one(),
        0,
        &mut blocked,
        polymers,
        weights,
        adj,
        &mut xi,
        &mut family_count,
        &mut max_family_size,
        family_cap,
    )?;
    Ok(XiResult {
        xi,
        family_count,
        max_family_size,
        polymer_count: n,
    })
}

#[derive(Debug, Clone)]
pub struct CaptureResult {
    pub count: BigUint,
    pub xi: XiResult,
}

/// (⌊q/2⌋⌈q/2⌉)^{N/2} · Ξ: the exact number of colorings whose flaw
/// components are all admissible polymers. A non-integer product means the
/// weights are wrong.
pub fn capture_count(
    g: &MidLayerGraph,
    params: &PolymerParams,
    p: &PrincipalPartition,
    family_cap: u64,
) -> Result<CaptureResult> {
    let xi = partition_function(g, params, p, family_cap)?;
    let scale = BigUint::from(p.a().len() * p.b().len()).pow(g.half_count() as u32);
    let product = &xi.xi * BigRational::from_integer(BigInt::from(scale));
    if !product.is_integer() {
        return Err(Error::inconsistency(format!(
            "capture product is not an integer: {product}"
        )));
    }
    let count = product
        .to_integer()
        .to_biguint()
        .ok_or_else(|| Error::inconsistency("capture count is negative"))?;
    Ok(CaptureResult { count, xi })
}

/// Bookkeeping parameters for the convergence-condition sum.
#[derive(Debug, Clone)]
pub struct KpBookkeeping {
    /// The constant in the large-boundary branch of g; asymptotic in the
    /// source analysis, surfaced as a parameter here.
    pub xi_constant: BigRational,
    pub precision: u32,
}

impl Default for KpBookkeeping {
    fn default() -> Self {
        KpBookkeeping {
            xi_constant: BigRational::one(),
            precision: crate::interval::DEFAULT_PRECISION,
        }
    }
}

/// f(γ) = |γ|/d.
pub fn kp_f(gamma_size: usize, d: u32) -> BigRational {
    BigRational::new(BigInt::from(gamma_size), BigInt::from(d))
}

/// g(γ) = |N(γ)|/(3q) when |N(γ)| <= d^10, else ξ|N(γ)|/(4·log2(d)^2).
pub fn kp_g(boundary_size: usize, d: u32, q: u32, bk: &KpBookkeeping) -> RatInterval {
    let threshold = BigUint::from(d).pow(10);
    if BigUint::from(boundary_size) <= threshold {
        RatInterval::exact(BigRational::new(
            BigInt::from(boundary_size),
            BigInt::from(3 * q),
        ))
    } else {
        // ξ·|N(γ)| / (4·(log2 d)^2), as an enclosure
        let log2d =
            crate::interval::ln_rat(&BigRational::from_integer(BigInt::from(d)), bk.precision)
                .expect("d >= 2")
                .mul(&{
                    let l2 = crate::interval::ln2(bk.precision);
                    // 1/ln2, exact endpoint reciprocals
                    RatInterval::new(l2.hi.recip(), l2.lo.recip())
                });
        let sq = log2d.mul(&log2d);
        let denom = sq.scale_nonneg(&BigRational::from_integer(BigInt::from(4)));
        let numer = &bk.xi_constant * BigRational::from_integer(BigInt::from(boundary_size));
        RatInterval::new(&numer / &denom.hi, &numer / &denom.lo)
    }
}

#[derive(Debug, Clone)]
pub struct KpReport {
    pub vertex: VertexId,
    pub sum: RatInterval,
    pub threshold: BigRational,
    pub comparison: IntervalOrdering,
    pub polymer_count: usize,
}

/// Σ_{γ ∋ v} ω(γ)·exp(2f(γ) + g(γ)), compared against 1/d³. The comparison
/// is reported with interval semantics, never asserted.
pub fn kp_lhs(
    g: &MidLayerGraph,
    params: &PolymerParams,
    p: &PrincipalPartition,
    v: VertexId,
    bk: &KpBookkeeping,
) -> KpReport {
    let polymers = enumerate_polymers(g, params, Some(v));
    let mut sum = RatInterval::zero();
    for gamma in &polymers {
        let w = weight(g, gamma, p);
        let arg = kp_g(gamma.boundary_size(), g.d(), p.q(), bk)
            .add_exact(&(kp_f(gamma.size(), g.d()) * BigRational::from_integer(BigInt::from(2))));
        sum = sum.add(&exp_interval(&arg, bk.precision).scale_nonneg(&w));
    }
    let threshold = BigRational::new(BigInt::one(), BigInt::from(g.d()).pow(3));
    let comparison = sum.compare(&threshold);
    KpReport {
        vertex: v,
        sum,
        threshold,
        comparison,
        polymer_count: polymers.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coloring::principal_partitions;
    use crate::graph::build_graph;
    use num_traits::Signed;
    use std::collections::HashMap;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    /// Brute-force 2-linked subset enumeration over all of 2^V (d=2 only).
    fn brute_polymers(g: &MidLayerGraph, params: &PolymerParams) -> Vec<Polymer> {
        let n = g.vertex_count();
        let mut out = Vec::new();
        for mask in 1u32..(1 << n) {
            let verts: VertexSet = (0..n as u32).filter(|&v| mask & (1 << v) != 0).collect();
            if g.is_two_linked(&verts) {
                let poly = Polymer::new(g, verts).unwrap();
                if poly.admissible(params) {
                    out.push(poly);
                }
            }
        }
        out.sort_by(|a, b| {
            a.size()
                .cmp(&b.size())
                .then_with(|| a.vertices().cmp(b.vertices()))
        });
        out
    }

    #[test]
    fn enumeration_complete_at_b2() {
        let g = build_graph(2).unwrap();
        for params in [
            PolymerParams::unrestricted(&g),
            PolymerParams::with_max_size(&g, 2),
            PolymerParams::new(3, 4),
        ] {
            let esu = enumerate_polymers(&g, &params, None);
            let brute = brute_polymers(&g, &params);
            assert_eq!(esu.len(), brute.len());
            for (a, b) in esu.iter().zip(&brute) {
                assert_eq!(a.vertices(), b.vertices());
            }
        }
        // all 2-linked subsets of the 6-cycle: everything except the three
        // antipodal pairs
        let all = enumerate_polymers(&g, &PolymerParams::unrestricted(&g), None);
        assert_eq!(all.len(), 60);
    }

    #[test]
    fn census_at_b3() {
        let g = build_graph(3).unwrap();
        let singles = enumerate_polymers(&g, &PolymerParams::with_max_size(&g, 1), None);
        assert_eq!(singles.len(), 20);
        let up_to_two = enumerate_polymers(&g, &PolymerParams::with_max_size(&g, 2), None);
        assert_eq!(up_to_two.len(), 110);
        let pairs: Vec<_> = up_to_two.iter().filter(|p| p.size() == 2).collect();
        let edges = pairs
            .iter()
            .filter(|p| g.neighbors(p.vertices()[0]).contains(&p.vertices()[1]))
            .count();
        assert_eq!(edges, 30);
        assert_eq!(pairs.len() - edges, 60);
    }

    #[test]
    fn rooted_counts_and_tree_bound() {
        let g = build_graph(3).unwrap();
        let d = g.d() as f64;
        for size in 1..=3usize {
            let params = PolymerParams::with_max_size(&g, size);
            let bound = (std::f64::consts::E * d * d).powi(size as i32 - 1);
            for v in 0..g.vertex_count() as u32 {
                let rooted = enumerate_polymers(&g, &params, Some(v))
                    .into_iter()
                    .filter(|p| p.size() == size)
                    .count();
                assert!(
                    (rooted as f64) <= bound,
                    "rooted size-{size} count {rooted} exceeds (ed²)^{}",
                    size - 1
                );
            }
        }
    }

    #[test]
    fn adjacency_cases() {
        let g = build_graph(2).unwrap();
        let single = |v: u32| Polymer::new(&g, vec![v]).unwrap();
        let s0 = single(0);
        assert!(polymer_adjacent(&g, &s0, &s0));
        let near = single(g.neighbors2(0)[0]);
        assert!(polymer_adjacent(&g, &s0, &near));
        let far = (1..6u32).find(|&u| g.distance(0, u) == 3).unwrap();
        assert!(!polymer_adjacent(&g, &s0, &single(far)));
        // adjacency must match the defining 2-linked-union test
        let all = enumerate_polymers(&g, &PolymerParams::with_max_size(&g, 2), None);
        for a in &all {
            for b in &all {
                let union = union_sorted(a.vertices(), b.vertices());
                assert_eq!(
                    polymer_adjacent(&g, a, b),
                    g.is_two_linked(&union),
                    "{:?} vs {:?}",
                    a.vertices(),
                    b.vertices()
                );
            }
        }
    }

    #[test]
    fn weight_examples_from_worked_cases() {
        let g2 = build_graph(2).unwrap();
        let p4 = &principal_partitions(4).unwrap()[0];
        let s = Polymer::new(&g2, vec![0]).unwrap();
        assert_eq!(weight(&g2, &s, p4), rat(1, 4));

        let g3 = build_graph(3).unwrap();
        let p4 = &principal_partitions(4).unwrap()[0];
        let edge = Polymer::new(&g3, vec![0, g3.neighbors(0)[0]]).unwrap();
        assert_eq!(weight(&g3, &edge, p4), rat(1, 16));
        let mate = g3
            .neighbors2(0)
            .iter()
            .copied()
            .find(|&u| g3.layer(u) == g3.layer(0))
            .unwrap();
        let pair = Polymer::new(&g3, vec![0, mate]).unwrap();
        assert_eq!(weight(&g3, &pair, p4), rat(1, 64));
    }

    #[test]
    fn weight_denominator_divides_side_powers() {
        let g = build_graph(3).unwrap();
        let p = &principal_partitions(5).unwrap()[0];
        for gamma in enumerate_polymers(&g, &PolymerParams::with_max_size(&g, 2), None) {
            let w = weight(&g, &gamma, p);
            assert!(!w.is_negative());
            let denom = weight_denominator(&g, &gamma.closure(), p);
            let scaled = &w * BigRational::from_integer(BigInt::from(denom));
            assert!(scaled.is_integer());
        }
    }

    #[test]
    fn local_weight_equals_global_oracle_at_b2() {
        let g = build_graph(2).unwrap();
        for q in [3u32, 4] {
            let p = &principal_partitions(q).unwrap()[0];
            for gamma in enumerate_polymers(&g, &PolymerParams::with_max_size(&g, 3), None) {
                let local = weight(&g, &gamma, p);
                let global = weight_global_oracle(&g, &gamma, p).unwrap();
                assert_eq!(local, global, "γ={:?} q={q}", gamma.vertices());
            }
        }
    }

    #[test]
    fn xi_values_at_b2() {
        let g = build_graph(2).unwrap();
        let p = &principal_partitions(4).unwrap()[0];
        // no polymers: only the empty family
        let none = partition_function(&g, &PolymerParams::new(0, 6), p, 1000).unwrap();
        assert_eq!(none.xi, BigRational::one());
        assert_eq!(none.family_count, 1);
        // unrestricted: capture identity gives 732/2^6
        let full = partition_function(&g, &PolymerParams::unrestricted(&g), p, 100_000).unwrap();
        assert_eq!(full.xi, rat(183, 16));
        // singletons only: independence polynomial of the square adjacency
        // at 1/4 per vertex; C6² independent sets: ∅, 6 singletons, 3
        // antipodal pairs
        let singles =
            partition_function(&g, &PolymerParams::with_max_size(&g, 1), p, 1000).unwrap();
        assert_eq!(singles.xi, BigRational::one() + rat(6, 4) + rat(3, 16));
        assert_eq!(singles.family_count, 1 + 6 + 3);
    }

    #[test]
    fn family_cap_resource_error() {
        let g = build_graph(2).unwrap();
        let p = &principal_partitions(4).unwrap()[0];
        assert!(matches!(
            partition_function(&g, &PolymerParams::unrestricted(&g), p, 10),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn capture_counts_at_b2() {
        let g = build_graph(2).unwrap();
        for q in [3u32, 4] {
            let p = &principal_partitions(q).unwrap()[0];
            let cap = capture_count(&g, &PolymerParams::unrestricted(&g), p, 100_000).unwrap();
            let total = crate::coloring::count_colorings_exact(&g, q).unwrap();
            assert_eq!(cap.count, total, "q={q}");
        }
        // empty polymer set captures exactly the (A,B)-perfect colorings
        let p = &principal_partitions(4).unwrap()[0];
        let none = capture_count(&g, &PolymerParams::new(0, 6), p, 10).unwrap();
        assert_eq!(none.count, BigUint::from(4u32).pow(3));
    }

    #[test]
    fn factorization_over_families_at_b2() {
        // group all 732 colorings by flaw set; each group's size must be
        // (ab)^{N/2}·Πω over the flaw components
        let g = build_graph(2).unwrap();
        let q = 4u32;
        let p = &principal_partitions(q).unwrap()[0];
        let mut groups: HashMap<VertexSet, u64> = HashMap::new();
        crate::coloring::for_each_proper_coloring(&g, q, &mut |vals| {
            let fl: VertexSet = (0..g.vertex_count() as u32)
                .filter(|&v| !p.agrees(g.layer(v), vals[v as usize]))
                .collect();
            *groups.entry(fl).or_default() += 1;
        });
        let scale = BigRational::from_integer(BigInt::from(4u32).pow(3));
        for (fl, count) in groups {
            let mut product = BigRational::one();
            for comp in g.two_linked_components(&fl) {
                let gamma = Polymer::new(&g, comp).unwrap();
                product *= weight(&g, &gamma, p);
            }
            assert_eq!(
                &scale * &product,
                BigRational::from_integer(BigInt::from(count)),
                "flaw {fl:?}"
            );
        }
    }

    #[test]
    fn capture_matches_brute_force_with_singleton_cap() {
        let g = build_graph(2).unwrap();
        let q = 4u32;
        let p = &principal_partitions(q).unwrap()[0];
        let params = PolymerParams::with_max_size(&g, 1);
        let cap = capture_count(&g, &params, p, 1000).unwrap();
        let mut brute = 0u64;
        crate::coloring::for_each_proper_coloring(&g, q, &mut |vals| {
            let fl: VertexSet = (0..g.vertex_count() as u32)
                .filter(|&v| !p.agrees(g.layer(v), vals[v as usize]))
                .collect();
            if g.two_linked_components(&fl).iter().all(|c| c.len() == 1) {
                brute += 1;
            }
        });
        assert_eq!(cap.count, BigUint::from(brute));
    }

    #[test]
    fn tilt_is_strict_for_positive_weights() {
        let g = build_graph(2).unwrap();
        for q in [3u32, 4] {
            let p = &principal_partitions(q).unwrap()[0];
            for gamma in enumerate_polymers(&g, &PolymerParams::with_max_size(&g, 3), None) {
                let w = weight(&g, &gamma, p);
                let tilted = tilted_weight(&g, &gamma, p, 96);
                if w.is_zero() {
                    assert!(tilted.lo.is_zero() && tilted.hi.is_zero());
                } else {
                    assert!(tilted.lo > w, "tilt must be strict for ω > 0");
                }
            }
        }
    }

    #[test]
    fn kp_sum_basics() {
        let g = build_graph(2).unwrap();
        let p = &principal_partitions(4).unwrap()[0];
        let bk = KpBookkeeping::default();
        let empty = kp_lhs(&g, &PolymerParams::new(0, 6), p, 0, &bk);
        assert!(empty.sum.lo.is_zero() && empty.sum.hi.is_zero());
        // nonnegative terms: enlarging the polymer set never decreases it
        let mut prev = RatInterval::zero();
        for size in 1..=4usize {
            let r = kp_lhs(&g, &PolymerParams::with_max_size(&g, size), p, 0, &bk);
            assert!(r.sum.hi >= prev.hi && r.sum.lo >= prev.lo);
            prev = r.sum;
        }
        // at this scale the sum is far above 1/d³
        let r = kp_lhs(&g, &PolymerParams::with_max_size(&g, 2), p, 0, &bk);
        assert_eq!(r.comparison, IntervalOrdering::Above);
        let tiny = BigRational::new(BigInt::one(), BigInt::one() << 100);
        assert!(r.sum.width() < tiny);
    }

    #[test]
    fn kp_g_branches() {
        let bk = KpBookkeeping::default();
        // small boundary: exact rational branch
        let small = kp_g(6, 2, 4, &bk);
        assert_eq!(small.lo, rat(6, 12));
        assert_eq!(small.hi, rat(6, 12));
        // boundary above d^10 = 1024 at d=2: ξ branch, enclosure around
        // ξ·2000/(4·1) since log2(2) = 1
        let big = kp_g(2000, 2, 4, &bk);
        assert!(big.lo < rat(500, 1) && big.hi > rat(500, 1) || big.contains(&rat(500, 1)));
        assert!(big.width() < rat(1, 1 << 20));
    }
}
