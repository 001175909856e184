//! Cluster expansion of the polymer partition function: Ursell functions,
//! cluster enumeration with exact series terms L(k), closed forms for the
//! first two terms, the formal-log coefficient oracle, and the truncated
//! counting approximation.

use crate::coloring::PrincipalPartition;
use crate::error::{Error, Result};
use crate::graph::{binomial, MidLayerGraph};
use crate::interval::{ln_rat, RatInterval};
use crate::polymer::{adjacency_matrix, enumerate_polymers, weight, Polymer, PolymerParams};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

/// Small simple graph on up to 32 vertices, adjacency as bitmask rows.
#[derive(Debug, Clone)]
pub struct SmallGraph {
    n: usize,
    adj: Vec<u32>,
}

impl SmallGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n > 32 {
            return Err(Error::parameter("SmallGraph supports at most 32 vertices"));
        }
        let mut adj = vec![0u32; n];
        for &(u, v) in edges {
            if u >= n || v >= n || u == v {
                return Err(Error::parameter("bad edge"));
            }
            adj[u] |= 1 << v;
            adj[v] |= 1 << u;
        }
        Ok(SmallGraph { n, adj })
    }
    pub fn vertex_count(&self) -> usize {
        self.n
    }
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in u + 1..self.n {
                if self.adj[u] & (1 << v) != 0 {
                    out.push((u, v));
                }
            }
        }
        out
    }
    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        SmallGraph::new(n, &edges).unwrap()
    }
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        let mut seen = 1u32;
        let mut frontier = 1u32;
        while frontier != 0 {
            let mut next = 0u32;
            for u in 0..self.n {
                if frontier & (1 << u) != 0 {
                    next |= self.adj[u] & !seen;
                }
            }
            seen |= next;
            frontier = next;
        }
        seen == (1u32 << self.n) - 1 || self.n == 32 && seen == u32::MAX
    }
}

pub const DEFAULT_URSELL_CAP: usize = 8;

fn factorial(n: usize) -> BigUint {
    (1..=n as u64)
        .map(BigUint::from)
        .product::<BigUint>()
        .max(BigUint::one())
}

/// Ursell function φ(H) = (1/|V|!)·Σ over connected spanning subgraphs of
/// (-1)^{edges}, by exhaustive edge-subset summation.
pub fn ursell(h: &SmallGraph) -> Result<BigRational> {
    ursell_capped(h, DEFAULT_URSELL_CAP)
}

pub fn ursell_capped(h: &SmallGraph, cap: usize) -> Result<BigRational> {
    let n = h.n;
    if n == 0 {
        return Err(Error::parameter("Ursell function needs a nonempty graph"));
    }
    if n > cap {
        return Err(Error::resource(format!(
            "Ursell vertex count {n} exceeds cap {cap}"
        )));
    }
    let edges = h.edges();
    let e = edges.len();
    let mut total = BigInt::zero();
    for mask in 0u64..(1 << e) {
        // union-find over the selected edges
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = n;
        for (i, &(u, v)) in edges.iter().enumerate() {
            if mask & (1 << i) != 0 {
                let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                if ru != rv {
                    parent[ru] = rv;
                    components -= 1;
                }
            }
        }
        if components == 1 {
            if mask.count_ones() % 2 == 0 {
                total += 1;
            } else {
                total -= 1;
            }
        }
    }
    Ok(BigRational::new(total, BigInt::from(factorial(n))))
}

/// Independent Ursell route: subset recursion on the identity
/// [H[S] edgeless] = Σ_{T ∋ min(S)} c(T)·[H[S\T] edgeless], solved for the
/// connected-sum c, then φ = c(V)/|V|!.
pub fn ursell_recursive(h: &SmallGraph) -> Result<BigRational> {
    let n = h.n;
    if n == 0 {
        return Err(Error::parameter("Ursell function needs a nonempty graph"));
    }
    if n > 20 {
        return Err(Error::resource(
            "subset recursion supports at most 20 vertices",
        ));
    }
    let full: u32 = if n == 32 { u32::MAX } else { (1 << n) - 1 };
    let edgeless = |s: u32| -> bool { (0..n).all(|v| s & (1 << v) == 0 || h.adj[v] & s == 0) };
    let mut c = vec![BigInt::zero(); (full as usize) + 1];
    for s in 1..=full {
        let low = s & s.wrapping_neg();
        let mut acc = if edgeless(s) {
            BigInt::one()
        } else {
            BigInt::zero()
        };
        // proper submasks of s containing the lowest bit
        let rest = s ^ low;
        let mut sub = rest;
        loop {
            sub = (sub.wrapping_sub(1)) & rest;
            let t = sub | low;
            if t != s && edgeless(s & !t) {
                acc -= &c[t as usize];
            }
            if sub == 0 {
                break;
            }
        }
        c[s as usize] = acc;
    }
    Ok(BigRational::new(
        c[full as usize].clone(),
        BigInt::from(factorial(n)),
    ))
}

/// An unordered multiset of polymer items standing for all its orderings.
/// The incompatibility graph puts an edge between items whose polymers are
/// adjacent; repeated copies of one polymer are always adjacent.
#[derive(Debug, Clone)]
pub struct Cluster {
    /// Nondecreasing item indices into the polymer list (repeats allowed).
    pub items: Vec<usize>,
    /// ‖Γ‖ = total vertex count over items.
    pub size: usize,
}

impl Cluster {
    /// Number of ordered multisets this unordered one stands for.
    pub fn ordered_multiplicity(&self) -> BigUint {
        let mut mult = factorial(self.items.len());
        let mut run = 1usize;
        for i in 1..=self.items.len() {
            if i < self.items.len() && self.items[i] == self.items[i - 1] {
                run += 1;
            } else {
                mult /= factorial(run);
                run = 1;
            }
        }
        mult
    }

    pub fn incompatibility_graph(&self, adjacent: &dyn Fn(usize, usize) -> bool) -> SmallGraph {
        let k = self.items.len();
        let mut edges = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                if self.items[i] == self.items[j] || adjacent(self.items[i], self.items[j]) {
                    edges.push((i, j));
                }
            }
        }
        SmallGraph::new(k, &edges).expect("item count bounded by cluster size")
    }
}

#[derive(Debug, Clone)]
pub struct ClusterCaps {
    pub max_clusters: u64,
    pub ursell_vertices: usize,
}

impl Default for ClusterCaps {
    fn default() -> Self {
        ClusterCaps {
            max_clusters: 5_000_000,
            ursell_vertices: DEFAULT_URSELL_CAP,
        }
    }
}

fn adjacency_bit(adj: &[Vec<u64>], i: usize, j: usize) -> bool {
    adj[i][j / 64] & (1 << (j % 64)) != 0
}

/// All clusters of total size exactly k over an abstract polymer system
/// given by item sizes and an adjacency matrix. Items must be sorted by
/// nondecreasing size.
pub fn enumerate_clusters_abstract(
    sizes: &[usize],
    adj: &[Vec<u64>],
    k: usize,
    cap: u64,
) -> Result<Vec<Cluster>> {
    let mut out = Vec::new();
    let mut visited = 0u64;
    let mut items = Vec::new();
    #[allow(clippy::too_many_arguments)]
    fn rec(
        sizes: &[usize],
        adj: &[Vec<u64>],
        start: usize,
        remaining: usize,
        items: &mut Vec<usize>,
        out: &mut Vec<Cluster>,
        visited: &mut u64,
        cap: u64,
    ) -> Result<()> {
        if remaining == 0 {
            *visited += 1;
            if *visited > cap {
                return Err(Error::resource(format!(
                    "cluster enumeration exceeded cap {cap}"
                )));
            }
            // connectivity of the incompatibility graph via union-find
            let k = items.len();
            let mut parent: Vec<usize> = (0..k).collect();
            fn find(parent: &mut [usize], mut x: usize) -> usize {
                while parent[x] != x {
                    parent[x] = parent[parent[x]];
                    x = parent[x];
                }
                x
            }
            let mut comps = k;
            for i in 0..k {
                for j in i + 1..k {
                    if items[i] == items[j] || adjacency_bit(adj, items[i], items[j]) {
                        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                        if ri != rj {
                            parent[ri] = rj;
                            comps -= 1;
                        }
                    }
                }
            }
            if comps == 1 {
                out.push(Cluster {
                    items: items.clone(),
                    size: items.iter().map(|&i| sizes[i]).sum(),
                });
            }
            return Ok(());
        }
        for i in start..sizes.len() {
            if sizes[i] > remaining {
                break; // sizes nondecreasing
            }
            items.push(i);
            rec(
                sizes,
                adj,
                i,
                remaining - sizes[i],
                items,
                out,
                visited,
                cap,
            )?;
            items.pop();
        }
        Ok(())
    }
    rec(sizes, adj, 0, k, &mut items, &mut out, &mut visited, cap)?;
    Ok(out)
}

/// The k-th term of the cluster expansion over an abstract system:
/// Σ over ordered clusters of size k of φ(H[Γ])·Πω(γ).
#[derive(Debug, Clone)]
pub struct SeriesTerm {
    pub k: usize,
    pub value: BigRational,
    /// Ordered-multiset cluster count.
    pub cluster_count: BigUint,
}

pub fn series_term_abstract(
    sizes: &[usize],
    adj: &[Vec<u64>],
    weights: &[BigRational],
    k: usize,
    caps: &ClusterCaps,
) -> Result<SeriesTerm> {
    let clusters = enumerate_clusters_abstract(sizes, adj, k, caps.max_clusters)?;
    let mut value = BigRational::zero();
    let mut cluster_count = BigUint::zero();
    let contributions: Vec<(BigRational, BigUint)> = clusters
        .par_iter()
        .map(|cl| {
            let h = cl.incompatibility_graph(&|i, j| adjacency_bit(adj, i, j));
            let phi = ursell_capped(&h, caps.ursell_vertices)?;
            let mult = cl.ordered_multiplicity();
            let mut contrib = phi * BigRational::from_integer(BigInt::from(mult.clone()));
            for &i in &cl.items {
                contrib *= &weights[i];
            }
            Ok((contrib, mult))
        })
        .collect::<Result<_>>()?;
    for (contrib, mult) in contributions {
        value += contrib;
        cluster_count += mult;
    }
    Ok(SeriesTerm {
        k,
        value,
        cluster_count,
    })
}

/// Graph-backed series term for the polymer model of (A, B).
pub fn series_term(
    g: &MidLayerGraph,
    params: &PolymerParams,
    p: &PrincipalPartition,
    k: usize,
    caps: &ClusterCaps,
) -> Result<SeriesTerm> {
    let polymers = enumerate_polymers(g, params, None);
    let weights: Vec<BigRational> = polymers
        .par_iter()
        .map(|gamma| weight(g, gamma, p))
        .collect();
    let sizes: Vec<usize> = polymers.iter().map(|p| p.size()).collect();
    let adj = adjacency_matrix(g, &polymers);
    series_term_abstract(&sizes, &adj, &weights, k, caps)
}

pub fn enumerate_clusters(
    g: &MidLayerGraph,
    params: &PolymerParams,
    k: usize,
    cap: u64,
) -> Result<(Vec<Polymer>, Vec<Cluster>)> {
    let polymers = enumerate_polymers(g, params, None);
    let sizes: Vec<usize> = polymers.iter().map(|p| p.size()).collect();
    let adj = adjacency_matrix(g, &polymers);
    let clusters = enumerate_clusters_abstract(&sizes, &adj, k, cap)?;
    Ok((polymers, clusters))
}

fn side_sizes(q: u32) -> (i64, i64) {
    ((q / 2) as i64, (q - q / 2) as i64)
}

fn big_n(d: u32) -> BigRational {
    BigRational::from_integer(BigInt::from(
        binomial(2 * d as u64 - 1, d as u64) * BigUint::from(2u32),
    ))
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn pow_rat(base: &BigRational, exp: u32) -> BigRational {
    let mut r = BigRational::one();
    for _ in 0..exp {
        r *= base;
    }
    r
}

/// Exact per-type polymer weights used by the closed forms: singleton in
/// the upper/lower layer, distance-2 same-layer pair, and edge polymer.
/// Side sizes a = |A| (upper), b = |B| (lower).
fn type_weights(
    d: u32,
    q: u32,
) -> (
    BigRational,
    BigRational,
    BigRational,
    BigRational,
    BigRational,
) {
    let (a, b) = side_sizes(q);
    let singleton_upper = rat(b, 1) * pow_rat(&rat(b - 1, b), d) / rat(a * b, b);
    // ω_t = b(b-1)^d / (a·b^d)
    let w_t = rat(b, a) * pow_rat(&rat(b - 1, b), d);
    let w_b = rat(a, b) * pow_rat(&rat(a - 1, a), d);
    // ω_pair_upper = b(b-1)^{2d} / (a²·b^{2d-1})
    let w_pt = rat(b * b, a * a) * pow_rat(&rat(b - 1, b), 2 * d);
    let w_pb = rat(a * a, b * b) * pow_rat(&rat(a - 1, a), 2 * d);
    // ω_edge = ab(a-1)^{d-1}(b-1)^{d-1} / (a^d·b^d)
    let w_e = pow_rat(&rat(a - 1, a), d - 1) * pow_rat(&rat(b - 1, b), d - 1);
    debug_assert_eq!(singleton_upper, w_t);
    (w_t, w_b, w_pt, w_pb, w_e)
}

/// First series term in closed form, for any q >= 3; reduces to
/// N(1-2/q)^d for even q.
pub fn closed_form_l1(d: u32, q: u32) -> Result<BigRational> {
    if q < 3 {
        return Err(Error::parameter("closed forms need q >= 3"));
    }
    let (w_t, w_b, ..) = type_weights(d, q);
    Ok(big_n(d) / rat(2, 1) * (w_t + w_b))
}

/// Second series term in closed form: ordered adjacent singleton pairs at
/// Ursell -1/2, plus the size-2 polymers themselves.
pub fn closed_form_l2(d: u32, q: u32) -> Result<BigRational> {
    if q < 3 {
        return Err(Error::parameter("closed forms need q >= 3"));
    }
    let n = big_n(d);
    let dd = d as i64;
    let (w_t, w_b, w_pt, w_pb, w_e) = type_weights(d, q);
    let half_n = &n / rat(2, 1);
    let sq = &w_t * &w_t + &w_b * &w_b;
    let ordered_pairs = &half_n * rat(1 + dd * (dd - 1), 1) * sq + &n * rat(dd, 1) * &w_t * &w_b;
    let same_layer_pairs = &half_n * rat(dd * (dd - 1) / 2, 1) * (w_pt + w_pb);
    let edges = &n * rat(dd, 2) * w_e;
    Ok(-ordered_pairs / rat(2, 1) + same_layer_pairs + edges)
}

/// The compact two-term exponent N(1-2/q)^d + N(1-2/q)^{2d}·(d(1-2/q)^{-2}
/// - d - 1)/2, which the closed forms must sum to for even q.
pub fn compact_exponent_form(d: u32, q: u32) -> Result<BigRational> {
    if q < 3 {
        return Err(Error::parameter("compact form needs q >= 3"));
    }
    let n = big_n(d);
    let r = rat(q as i64 - 2, q as i64);
    let r_d = pow_rat(&r, d);
    let r_2d = &r_d * &r_d;
    let inv_r2 = rat(q as i64, q as i64 - 2) * rat(q as i64, q as i64 - 2);
    let inner = (rat(d as i64, 1) * inv_r2 - rat(d as i64 + 1, 1)) / rat(2, 1);
    Ok(&n * r_d + n * r_2d * inner)
}

/// Number of ordered principal partitions.
pub fn ordered_partition_count(q: u32) -> BigUint {
    let lo = q as u64 / 2;
    if q.is_multiple_of(2) {
        binomial(q as u64, lo)
    } else {
        binomial(q as u64, lo) * BigUint::from(2u32)
    }
}

#[derive(Debug, Clone)]
pub struct ApproxOptions {
    /// Unspecified multiplicative constant for the truncation-error
    /// magnitude report.
    pub eps_constant: f64,
    pub precision: u32,
    pub caps: ClusterCaps,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions {
            eps_constant: 1.0,
            precision: crate::interval::DEFAULT_PRECISION,
            caps: ClusterCaps::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ApproxReport {
    pub d: u32,
    pub q: u32,
    pub truncation: usize,
    /// L(1) .. L(t-1), exact.
    pub terms: Vec<BigRational>,
    pub exponent_sum: BigRational,
    pub multiplicity: BigUint,
    /// ln of (⌊q/2⌋⌈q/2⌉)^{N/2} · multiplicity · exp(Σ L(k)).
    pub ln_value: RatInterval,
    pub log10_value: f64,
    /// The value itself when it fits an f64 (diagnostic only).
    pub value: Option<f64>,
    /// Reported magnitude of the dropped tail: c·N·d^{2(t-1)}·δ^{dt} with
    /// δ = 1 - 1/⌈q/2⌉. Reported, never asserted.
    pub eps_magnitude: f64,
}

/// Truncated-series approximation of the coloring count:
/// prefactor · (number of ordered principal partitions) · exp(Σ_{k<t} L(k)),
/// with the capture-consistent prefactor (⌊q/2⌋⌈q/2⌉)^{N/2} (equal to
/// (q/2)^N for even q). Closed forms cover k <= 2; higher terms are
/// enumerated (d must then be within the graph cap).
pub fn approx_count(
    d: u32,
    q: u32,
    truncation: usize,
    opts: &ApproxOptions,
) -> Result<ApproxReport> {
    if d < 2 {
        return Err(Error::parameter("d must be at least 2"));
    }
    if q < 3 {
        return Err(Error::parameter("q must be at least 3"));
    }
    if truncation < 1 {
        return Err(Error::parameter("truncation must be at least 1"));
    }
    let mut terms = Vec::new();
    let mut graph = None;
    for k in 1..truncation {
        let value = match k {
            1 => closed_form_l1(d, q)?,
            2 => closed_form_l2(d, q)?,
            _ => {
                if graph.is_none() {
                    graph = Some(crate::graph::build_graph(d).map_err(|_| {
                        Error::resource(format!(
                            "L({k}) needs cluster enumeration, unavailable for d={d}"
                        ))
                    })?);
                }
                let g = graph.as_ref().unwrap();
                let p = &crate::coloring::principal_partitions(q)?[0];
                series_term(g, &PolymerParams::with_max_size(g, k), p, k, &opts.caps)?.value
            }
        };
        terms.push(value);
    }
    let exponent_sum: BigRational = terms.iter().sum();
    let multiplicity = ordered_partition_count(q);
    let (a, b) = side_sizes(q);
    let half_n = big_n(d) / rat(2, 1);
    let ln_ab = ln_rat(&rat(a * b, 1), opts.precision).expect("ab > 0");
    let ln_mult = ln_rat(
        &BigRational::from_integer(BigInt::from(multiplicity.clone())),
        opts.precision,
    )
    .expect("multiplicity > 0");
    let ln_value = ln_ab
        .scale_nonneg(&half_n)
        .add(&ln_mult)
        .add_exact(&exponent_sum);
    let ln10 = std::f64::consts::LN_10;
    let log10_value = ln_value.to_f64() / ln10;
    let value = {
        let mid = ln_value.to_f64();
        (mid.abs() < 700.0).then(|| mid.exp())
    };
    let delta = rat(b - 1, b);
    let eps = rat(opts.eps_constant as i64, 1)
        * big_n(d)
        * pow_rat(&rat(d as i64, 1), 2 * (truncation as u32 - 1))
        * pow_rat(&delta, d * truncation as u32);
    Ok(ApproxReport {
        d,
        q,
        truncation,
        terms,
        exponent_sum,
        multiplicity,
        ln_value,
        log10_value,
        value,
        eps_magnitude: eps.to_f64().unwrap_or(f64::NAN),
    })
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub approx: ApproxReport,
    pub exact: BigUint,
    /// approx/exact - 1; reported, never asserted (small d is
    /// pre-asymptotic).
    pub signed_relative_error: f64,
}

/// Compare the truncated approximation against the exact count (d <= 3).
pub fn approx_compare(
    d: u32,
    q: u32,
    truncation: usize,
    opts: &ApproxOptions,
) -> Result<CompareReport> {
    let approx = approx_count(d, q, truncation, opts)?;
    let g = crate::graph::build_graph(d)?;
    let exact = crate::coloring::count_colorings_exact(&g, q)?;
    let ln_exact = ln_rat(
        &BigRational::from_integer(BigInt::from(exact.clone())),
        opts.precision,
    )
    .expect("count > 0");
    let diff = approx.ln_value.add(&ln_exact.neg());
    let signed_relative_error = diff.to_f64().exp_m1();
    Ok(CompareReport {
        approx,
        exact,
        signed_relative_error,
    })
}

/// Ξ(z) coefficients a_0..a_{k_max} where each polymer weight is graded by
/// z^{|γ|}; only families with |Λ| <= k_max contribute to those.
pub fn xi_coefficients_abstract(
    sizes: &[usize],
    adj: &[Vec<u64>],
    weights: &[BigRational],
    k_max: usize,
    family_cap: u64,
) -> Result<Vec<BigRational>> {
    let n = sizes.len();
    let words = n.div_ceil(64);
    let mut coeffs = vec![BigRational::zero(); k_max + 1];
    coeffs[0] = BigRational::one();
    let mut visited = 0u64;
    #[allow(clippy::too_many_arguments)]
    fn dfs(
        start: usize,
        weight_so_far: &BigRational,
        size_so_far: usize,
        blocked: &mut Vec<u64>,
        sizes: &[usize],
        adj: &[Vec<u64>],
        weights: &[BigRational],
        coeffs: &mut Vec<BigRational>,
        visited: &mut u64,
        family_cap: u64,
    ) -> Result<()> {
        for i in start..sizes.len() {
            if blocked[i / 64] & (1 << (i % 64)) != 0 {
                continue;
            }
            let size = size_so_far + sizes[i];
            if size >= coeffs.len() {
                continue;
            }
            *visited += 1;
            if *visited > family_cap {
                return Err(Error::resource(format!(
                    "graded family enumeration exceeded cap {family_cap}"
                )));
            }
            let w = weight_so_far * &weights[i];
            coeffs[size] += &w;
            let saved = blocked.clone();
            for (word, a) in blocked.iter_mut().zip(&adj[i]) {
                *word |= a;
            }
            dfs(
                i + 1,
                &w,
                size,
                blocked,
                sizes,
                adj,
                weights,
                coeffs,
                visited,
                family_cap,
            )?;
            *blocked = saved;
        }
        Ok(())
    }
    let mut blocked = vec![0u64; words];
    dfs(
        0,
        &BigRational::one(),
        0,
        &mut blocked,
        sizes,
        adj,
        weights,
        &mut coeffs,
        &mut visited,
        family_cap,
    )?;
    Ok(coeffs)
}

/// Formal log of a power series with a_0 = 1, via the derivative
/// recurrence k·c_k = k·a_k - Σ_{j<k} j·c_j·a_{k-j}.
pub fn formal_log(coeffs: &[BigRational]) -> Vec<BigRational> {
    let k_max = coeffs.len() - 1;
    assert!(coeffs[0].is_one(), "formal log needs constant term 1");
    let mut log = vec![BigRational::zero(); k_max + 1];
    for k in 1..=k_max {
        let mut acc = &coeffs[k] * rat(k as i64, 1);
        for j in 1..k {
            acc -= &log[j] * rat(j as i64, 1) * &coeffs[k - j];
        }
        log[k] = acc / rat(k as i64, 1);
    }
    log
}

#[derive(Debug, Clone)]
pub struct FormalLogReport {
    pub k_max: usize,
    pub xi_coefficients: Vec<BigRational>,
    pub log_coefficients: Vec<BigRational>,
    pub series_terms: Vec<BigRational>,
    pub matches: Vec<bool>,
    pub all_match: bool,
}

/// The strongest internal oracle: the degree-k coefficient of the formal
/// log of the graded partition function must equal the enumerated series
/// term L(k), exactly, for every k <= k_max.
pub fn formal_log_check(
    g: &MidLayerGraph,
    params: &PolymerParams,
    p: &PrincipalPartition,
    k_max: usize,
    caps: &ClusterCaps,
    family_cap: u64,
) -> Result<FormalLogReport> {
    let polymers = enumerate_polymers(g, params, None);
    let weights: Vec<BigRational> = polymers
        .par_iter()
        .map(|gamma| weight(g, gamma, p))
        .collect();
    let sizes: Vec<usize> = polymers.iter().map(|p| p.size()).collect();
    let adj = adjacency_matrix(g, &polymers);
    formal_log_check_abstract(&sizes, &adj, &weights, k_max, caps, family_cap)
}

pub fn formal_log_check_abstract(
    sizes: &[usize],
    adj: &[Vec<u64>],
    weights: &[BigRational],
    k_max: usize,
    caps: &ClusterCaps,
    family_cap: u64,
) -> Result<FormalLogReport> {
    let xi_coefficients = xi_coefficients_abstract(sizes, adj, weights, k_max, family_cap)?;
    let log_coefficients = formal_log(&xi_coefficients);
    let mut series_terms = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        series_terms.push(series_term_abstract(sizes, adj, weights, k, caps)?.value);
    }
    let matches: Vec<bool> = (1..=k_max)
        .map(|k| log_coefficients[k] == series_terms[k - 1])
        .collect();
    let all_match = matches.iter().all(|&m| m);
    Ok(FormalLogReport {
        k_max,
        xi_coefficients,
        log_coefficients,
        series_terms,
        matches,
        all_match,
    })
}

#[derive(Debug, Clone)]
pub struct TermBoundRow {
    pub k: usize,
    pub term: BigRational,
    pub bound: BigRational,
    pub ratio: f64,
}

/// Diagnostic ratios |L(k)| / (N·d^{2(k-1)}·δ^{dk}) with δ = 1 - 1/⌈q/2⌉.
pub fn term_bound_check(
    g: &MidLayerGraph,
    p: &PrincipalPartition,
    k_range: std::ops::RangeInclusive<usize>,
    caps: &ClusterCaps,
) -> Result<Vec<TermBoundRow>> {
    let d = g.d();
    let q = p.q();
    let (_, b) = side_sizes(q);
    let delta = rat(b - 1, b);
    let n = big_n(d);
    let mut rows = Vec::new();
    for k in k_range {
        let term = series_term(g, &PolymerParams::with_max_size(g, k), p, k, caps)?.value;
        let bound =
            &n * pow_rat(&rat(d as i64, 1), 2 * (k as u32 - 1)) * pow_rat(&delta, d * k as u32);
        let ratio = (term.abs() / &bound).to_f64().unwrap_or(f64::NAN);
        rows.push(TermBoundRow {
            k,
            term,
            bound,
            ratio,
        });
    }
    Ok(rows)
}

/// δ_{A,B} = 1 - 1/⌈q/2⌉.
pub fn delta_ab(q: u32) -> BigRational {
    let (_, b) = side_sizes(q);
    rat(b - 1, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coloring::principal_partitions;
    use crate::graph::build_graph;

    #[test]
    fn ursell_known_values() {
        assert_eq!(ursell(&SmallGraph::complete(1)).unwrap(), rat(1, 1));
        assert_eq!(ursell(&SmallGraph::complete(2)).unwrap(), rat(-1, 2));
        assert_eq!(ursell(&SmallGraph::complete(3)).unwrap(), rat(1, 3));
        let p3 = SmallGraph::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(ursell(&p3).unwrap(), rat(1, 6));
        // φ(K_k) = (-1)^{k+1}/k
        for k in 1..=6usize {
            let sign = if k % 2 == 1 { 1 } else { -1 };
            assert_eq!(
                ursell(&SmallGraph::complete(k)).unwrap(),
                rat(sign, k as i64)
            );
        }
        // disconnected graphs have no connected spanning subgraph
        let disc = SmallGraph::new(2, &[]).unwrap();
        assert_eq!(ursell(&disc).unwrap(), rat(0, 1));
    }

    #[test]
    fn ursell_routes_agree_on_all_graphs_up_to_five_vertices() {
        for n in 1..=5usize {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                .collect();
            for mask in 0u32..(1 << pairs.len()) {
                let edges: Vec<_> = pairs
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &e)| (mask & (1 << i) != 0).then_some(e))
                    .collect();
                let h = SmallGraph::new(n, &edges).unwrap();
                assert_eq!(
                    ursell(&h).unwrap(),
                    ursell_recursive(&h).unwrap(),
                    "n={n} mask={mask}"
                );
            }
        }
    }

    #[test]
    fn ursell_isomorphism_invariance() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let base = SmallGraph::new(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)]).unwrap();
        let reference = ursell(&base).unwrap();
        for _ in 0..20 {
            let mut perm: Vec<usize> = (0..5).collect();
            perm.shuffle(&mut rng);
            let edges: Vec<(usize, usize)> = base
                .edges()
                .into_iter()
                .map(|(u, v)| (perm[u], perm[v]))
                .collect();
            let h = SmallGraph::new(5, &edges).unwrap();
            assert_eq!(ursell(&h).unwrap(), reference);
        }
    }

    #[test]
    fn ursell_cap_is_enforced() {
        assert!(matches!(
            ursell_capped(&SmallGraph::complete(6), 5),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn cluster_census_at_b3() {
        let g = build_graph(3).unwrap();
        let params = PolymerParams::with_max_size(&g, 2);
        let (polymers, clusters) = enumerate_clusters(&g, &params, 2, 1_000_000).unwrap();
        // ordered counts: N + Nd(d-1) + Nd adjacent singleton pairs plus
        // one per size-2 polymer
        let mut ordered_pairs = BigUint::zero();
        let mut single_polymers = BigUint::zero();
        for cl in &clusters {
            if cl.items.len() == 2 {
                ordered_pairs += cl.ordered_multiplicity();
            } else {
                assert_eq!(polymers[cl.items[0]].size(), 2);
                single_polymers += cl.ordered_multiplicity();
            }
        }
        assert_eq!(ordered_pairs, BigUint::from(200u32));
        assert_eq!(single_polymers, BigUint::from(90u32));
        // k=1: one cluster per singleton polymer
        let (_, k1) = enumerate_clusters(&g, &params, 1, 1_000_000).unwrap();
        assert_eq!(k1.len(), 20);
    }

    #[test]
    fn series_terms_match_closed_forms_at_b3() {
        let g = build_graph(3).unwrap();
        let caps = ClusterCaps::default();
        for q in 3..=6u32 {
            let p = &principal_partitions(q).unwrap()[0];
            for k in 1..=2usize {
                let params = PolymerParams::with_max_size(&g, k);
                let term = series_term(&g, &params, p, k, &caps).unwrap();
                let closed = match k {
                    1 => closed_form_l1(3, q).unwrap(),
                    _ => closed_form_l2(3, q).unwrap(),
                };
                assert_eq!(term.value, closed, "d=3 q={q} k={k}");
            }
        }
        assert_eq!(closed_form_l1(3, 4).unwrap(), rat(5, 2));
        assert_eq!(closed_form_l2(3, 4).unwrap(), rat(5, 4));
    }

    #[test]
    fn series_term_orientation_symmetry() {
        // swapping (A, B) mirrors the layers, so the series terms agree
        let g = build_graph(2).unwrap();
        let caps = ClusterCaps::default();
        let p = &principal_partitions(5).unwrap()[0];
        for k in 1..=2usize {
            let params = PolymerParams::with_max_size(&g, k);
            let straight = series_term(&g, &params, p, k, &caps).unwrap();
            let swapped = series_term(&g, &params, &p.swapped(), k, &caps).unwrap();
            assert_eq!(straight.value, swapped.value);
        }
    }

    #[test]
    fn closed_forms_specialize_for_even_q() {
        for q in [4u32, 6, 8] {
            let r = rat(q as i64 - 2, q as i64);
            for d in 2..=12u32 {
                let n = big_n(d);
                let paper_l1 = &n * pow_rat(&r, d);
                assert_eq!(closed_form_l1(d, q).unwrap(), paper_l1);
                let inv2 = rat(q as i64, q as i64 - 2) * rat(q as i64, q as i64 - 2);
                let paper_l2 = &n
                    * pow_rat(&r, 2 * d)
                    * (rat(d as i64, 2) * inv2 - rat(d as i64, 2) - rat(1, 2));
                assert_eq!(closed_form_l2(d, q).unwrap(), paper_l2, "q={q} d={d}");
            }
        }
    }

    #[test]
    fn closed_forms_sum_to_compact_exponent() {
        for q in [4u32, 6, 8] {
            for d in 2..=30u32 {
                let lhs = closed_form_l1(d, q).unwrap() + closed_form_l2(d, q).unwrap();
                assert_eq!(lhs, compact_exponent_form(d, q).unwrap(), "q={q} d={d}");
            }
        }
    }

    #[test]
    fn formal_log_agrees_with_isolated_singleton_series() {
        // an abstract system of pairwise non-adjacent singletons: Ξ(z) is
        // the product of (1 + z·ω_v) and the log coefficients must match
        // the repeated-singleton clusters
        let sizes = vec![1usize; 3];
        let weights = vec![rat(1, 4), rat(1, 3), rat(2, 5)];
        let adj = vec![vec![0b001u64], vec![0b010], vec![0b100]]; // self only
        let k_max = 5;
        let report = formal_log_check_abstract(
            &sizes,
            &adj,
            &weights,
            k_max,
            &ClusterCaps::default(),
            1 << 20,
        )
        .unwrap();
        assert!(report.all_match);
        for k in 1..=k_max {
            let sign = if k % 2 == 1 { 1 } else { -1 };
            let expect: BigRational = weights
                .iter()
                .map(|w| pow_rat(w, k as u32) * rat(sign, k as i64))
                .sum();
            assert_eq!(report.log_coefficients[k], expect, "k={k}");
        }
    }

    #[test]
    fn formal_log_oracle_at_b2() {
        let g = build_graph(2).unwrap();
        let p = &principal_partitions(4).unwrap()[0];
        let params = PolymerParams::with_max_size(&g, 2);
        let report = formal_log_check(&g, &params, p, 4, &ClusterCaps::default(), 1 << 22).unwrap();
        assert!(
            report.all_match,
            "log coefficients: {:?}",
            report.log_coefficients
        );
        assert_eq!(report.log_coefficients[1], report.series_terms[0]);
    }

    #[test]
    fn truncated_xi_below_full_at_b2() {
        let g = build_graph(2).unwrap();
        let q = 4u32;
        let p = &principal_partitions(q).unwrap()[0];
        let t = crate::coloring::threshold_polymer_size(q).unwrap() as usize;
        let truncated = crate::polymer::partition_function(
            &g,
            &PolymerParams::with_max_size(&g, t - 1),
            p,
            1 << 22,
        )
        .unwrap();
        let full =
            crate::polymer::partition_function(&g, &PolymerParams::unrestricted(&g), p, 1 << 22)
                .unwrap();
        // some size-3 polymer has positive weight, so the inequality is strict
        assert!(truncated.xi < full.xi);
    }

    #[test]
    fn approx_count_even_q() {
        let opts = ApproxOptions::default();
        // t = 1: empty exponent, value is multiplicity · (q/2)^N
        let r = approx_count(2, 4, 1, &opts).unwrap();
        assert!(r.terms.is_empty());
        assert!(r.exponent_sum.is_zero());
        assert_eq!(r.multiplicity, BigUint::from(6u32));
        let direct = 6.0 * 2f64.powi(6);
        assert!((r.value.unwrap() - direct).abs() / direct < 1e-12);
        // t = 3 at q=4 must reproduce mult·2^N·exp(compact form)
        for d in [2u32, 3, 6, 10] {
            let r = approx_count(d, 4, 3, &opts).unwrap();
            let expect = closed_form_l1(d, 4).unwrap() + closed_form_l2(d, 4).unwrap();
            assert_eq!(r.exponent_sum, expect);
            assert_eq!(r.exponent_sum, compact_exponent_form(d, 4).unwrap());
        }
    }

    #[test]
    fn approx_compare_reports_error() {
        let opts = ApproxOptions::default();
        let r = approx_compare(2, 4, 3, &opts).unwrap();
        assert_eq!(r.exact, BigUint::from(732u32));
        // d=2 is deep pre-asymptotic; the error is reported, not asserted
        assert!(r.signed_relative_error.is_finite());
        assert!(r.signed_relative_error > -1.0);
    }

    #[test]
    fn term_bound_rows() {
        let g = build_graph(3).unwrap();
        let p = &principal_partitions(4).unwrap()[0];
        let rows = term_bound_check(&g, p, 1..=3, &ClusterCaps::default()).unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            assert!(row.ratio.is_finite());
            assert!(row.bound.is_positive());
        }
        assert_eq!(delta_ab(4), rat(1, 2));
        assert_eq!(delta_ab(5), rat(2, 3));
    }
}
