//! Cover constructions and ψ-approximating-pair machinery: the greedy
//! bipartite cover with its classical size guarantee, mutual covers built
//! per layer, and per-instance verification of approximating pairs.

use crate::error::{Error, Result};
use crate::graph::{
    contains_sorted, diff_sorted, union_sorted, Layer, MidLayerGraph, VertexId, VertexSet,
};
use num_rational::BigRational;
use serde::Serialize;

/// An explicit bipartite covering instance: P must be covered by picks
/// from Q.
#[derive(Debug, Clone)]
pub struct BipartiteInstance {
    p_count: usize,
    q_count: usize,
    /// adj[u] for u in P: neighbor indices in Q, sorted.
    adj: Vec<Vec<usize>>,
}

impl BipartiteInstance {
    pub fn new(p_count: usize, q_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); p_count];
        for &(u, v) in edges {
            if u >= p_count || v >= q_count {
                return Err(Error::parameter("edge endpoint out of range"));
            }
            adj[u].push(v);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(BipartiteInstance {
            p_count,
            q_count,
            adj,
        })
    }
    pub fn p_count(&self) -> usize {
        self.p_count
    }
    pub fn q_count(&self) -> usize {
        self.q_count
    }
    fn q_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.q_count];
        for list in &self.adj {
            for &v in list {
                deg[v] += 1;
            }
        }
        deg
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverResult {
    pub chosen: Vec<usize>,
    pub size_bound: f64,
}

/// Greedy max-marginal-coverage cover of P by Q, lexicographic tie-break.
/// Preconditions: every u ∈ P has at least `a` neighbors, every v ∈ Q at
/// most `b`. The classical potential argument guarantees the output meets
/// the (|Q|/a)(1 + ln b) bound, which is asserted.
pub fn greedy_cover(inst: &BipartiteInstance, a: usize, b: usize) -> Result<CoverResult> {
    if a == 0 {
        return Err(Error::validation("minimum degree a must be positive"));
    }
    if let Some(u) = inst.adj.iter().position(|l| l.len() < a) {
        return Err(Error::validation(format!(
            "P vertex {u} has degree {} < a = {a}",
            inst.adj[u].len()
        )));
    }
    let degrees = inst.q_degrees();
    if let Some(v) = degrees.iter().position(|&deg| deg > b) {
        return Err(Error::validation(format!(
            "Q vertex {v} has degree {} > b = {b}",
            degrees[v]
        )));
    }
    let mut covered = vec![false; inst.p_count];
    let mut remaining = inst.p_count;
    let mut chosen = Vec::new();
    // reverse adjacency for gain computation
    let mut q_adj = vec![Vec::new(); inst.q_count];
    for (u, list) in inst.adj.iter().enumerate() {
        for &v in list {
            q_adj[v].push(u);
        }
    }
    while remaining > 0 {
        let mut best_gain = 0usize;
        let mut best_v = usize::MAX;
        for (v, members) in q_adj.iter().enumerate() {
            let gain = members.iter().filter(|&&u| !covered[u]).count();
            if gain > best_gain {
                best_gain = gain;
                best_v = v;
            }
        }
        debug_assert!(best_gain > 0, "uncovered P vertex with no neighbor");
        chosen.push(best_v);
        for &u in &q_adj[best_v] {
            if !covered[u] {
                covered[u] = true;
                remaining -= 1;
            }
        }
    }
    let size_bound = inst.q_count as f64 / a as f64 * (1.0 + (b as f64).ln());
    if chosen.len() as f64 > size_bound {
        return Err(Error::inconsistency(format!(
            "greedy cover of size {} exceeded the {size_bound:.6} bound",
            chosen.len()
        )));
    }
    Ok(CoverResult { chosen, size_bound })
}

#[derive(Debug, Clone, Serialize)]
pub struct MutualCoverResult {
    pub y: VertexSet,
    pub size_bound: f64,
}

/// Y with X ⊆ N(Y) and Y ⊆ N(X), built per layer: greedily cover X_i from
/// N(X_i), then prune to a minimal cover. Since picks stay inside N(X_i),
/// mutuality is automatic. |Y| ≤ (|N(X)|/d)(1 + ln d), asserted.
pub fn mutual_cover(g: &MidLayerGraph, xs: &[VertexId]) -> Result<MutualCoverResult> {
    g.validate_set(xs)?;
    let d = g.d() as usize;
    let nbhd_total = g.neighborhood(xs).len();
    let mut y = VertexSet::new();
    for layer in [Layer::Lower, Layer::Upper] {
        let part: VertexSet = xs
            .iter()
            .copied()
            .filter(|&v| g.layer(v) == layer)
            .collect();
        if part.is_empty() {
            continue;
        }
        let candidates = g.neighborhood(&part);
        let cand = &candidates;
        let edges: Vec<(usize, usize)> = part
            .iter()
            .enumerate()
            .flat_map(|(i, &u)| {
                g.neighbors(u)
                    .iter()
                    .map(move |&w| (i, cand.binary_search(&w).unwrap()))
            })
            .collect();
        let inst = BipartiteInstance::new(part.len(), candidates.len(), &edges)?;
        let cover = greedy_cover(&inst, d, d)?;
        let mut picks: Vec<usize> = cover.chosen;
        // prune to a minimal cover, dropping in reverse pick order
        let covers = |picks: &[usize]| -> bool {
            part.iter().all(|&u| {
                g.neighbors(u)
                    .iter()
                    .any(|&w| picks.iter().any(|&i| candidates[i] == w))
            })
        };
        let mut i = picks.len();
        while i > 0 {
            i -= 1;
            let removed = picks.remove(i);
            if !covers(&picks) {
                picks.insert(i, removed);
            }
        }
        let mut layer_y: VertexSet = picks.into_iter().map(|i| candidates[i]).collect();
        layer_y.sort_unstable();
        y = union_sorted(&y, &layer_y);
    }
    let size_bound = nbhd_total as f64 / d as f64 * (1.0 + (d as f64).ln());
    // both inclusions, checked exactly
    let ny = g.neighborhood(&y);
    if !diff_sorted(xs, &ny).is_empty() {
        return Err(Error::inconsistency("mutual cover misses part of X"));
    }
    let nx = g.neighborhood(xs);
    if !diff_sorted(&y, &nx).is_empty() {
        return Err(Error::inconsistency("mutual cover left N(X)"));
    }
    if !xs.is_empty() && y.len() as f64 > size_bound {
        return Err(Error::inconsistency(format!(
            "mutual cover size {} exceeded the {size_bound:.6} bound",
            y.len()
        )));
    }
    Ok(MutualCoverResult { y, size_bound })
}

/// Container-style sandwich for a target set X.
#[derive(Debug, Clone, Serialize)]
pub struct ApproxPair {
    pub f: VertexSet,
    pub s: VertexSet,
    pub psi: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairConditions {
    /// F ⊆ N(X) and S ⊇ X.
    pub containment: bool,
    /// every u ∈ S has at most ψ neighbors outside F.
    pub low_outside_degree: bool,
    /// every v ∉ F has at most ψ neighbors in S.
    pub low_inside_degree: bool,
}

impl PairConditions {
    pub fn all(&self) -> bool {
        self.containment && self.low_outside_degree && self.low_inside_degree
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairReport {
    pub full: PairConditions,
    /// Induced pair (F ∩ L_d, S ∩ L_{d-1}) for X ∩ L_{d-1}.
    pub lower_target: PairConditions,
    /// Induced pair (F ∩ L_{d-1}, S ∩ L_d) for X ∩ L_d.
    pub upper_target: PairConditions,
    /// |S_i| ≤ |F_i| + 2|N(X_i)|ψ/(d-ψ), exact comparison per layer.
    pub gap_bound_lower: bool,
    pub gap_bound_upper: bool,
    pub pass: bool,
}

fn check_conditions(
    g: &MidLayerGraph,
    f: &[VertexId],
    s: &[VertexId],
    x: &[VertexId],
    psi: u32,
    scope: Option<Layer>,
) -> PairConditions {
    let nx = g.neighborhood(x);
    let containment = diff_sorted(f, &nx).is_empty() && diff_sorted(x, s).is_empty();
    let low_outside_degree = s.iter().all(|&u| {
        g.neighbors(u)
            .iter()
            .filter(|&&w| !contains_sorted(f, w))
            .count() as u32
            <= psi
    });
    let low_inside_degree = (0..g.vertex_count() as u32)
        .filter(|&v| scope.is_none_or(|layer| g.layer(v) == layer) && !contains_sorted(f, v))
        .all(|v| {
            g.neighbors(v)
                .iter()
                .filter(|&&w| contains_sorted(s, w))
                .count() as u32
                <= psi
        });
    PairConditions {
        containment,
        low_outside_degree,
        low_inside_degree,
    }
}

fn gap_bound(
    g: &MidLayerGraph,
    f_i: &[VertexId],
    s_i: &[VertexId],
    x_i: &[VertexId],
    psi: u32,
) -> bool {
    let d = g.d() as i64;
    let nx = g.neighborhood(x_i).len() as i64;
    // |S_i| - |F_i| <= 2·|N(X_i)|·ψ/(d-ψ)
    let lhs = BigRational::from_integer((s_i.len() as i64 - f_i.len() as i64).into());
    let rhs = BigRational::new((2 * nx * psi as i64).into(), (d - psi as i64).into());
    lhs <= rhs
}

/// Verify the three pair conditions on the full pair and on both induced
/// per-layer pairs, plus the exact S/F gap bound. ψ must be at most d/2.
pub fn verify_approx_pair(
    g: &MidLayerGraph,
    pair: &ApproxPair,
    x: &[VertexId],
) -> Result<PairReport> {
    if 2 * pair.psi > g.d() {
        return Err(Error::parameter("psi must be at most d/2"));
    }
    g.validate_set(&pair.f)?;
    g.validate_set(&pair.s)?;
    g.validate_set(x)?;
    let split = |set: &[VertexId], layer: Layer| -> VertexSet {
        set.iter()
            .copied()
            .filter(|&v| g.layer(v) == layer)
            .collect()
    };
    let full = check_conditions(g, &pair.f, &pair.s, x, pair.psi, None);
    // X₁ sits in the lower layer, its pair is (F ∩ upper, S ∩ lower)
    let (x1, f1, s1) = (
        split(x, Layer::Lower),
        split(&pair.f, Layer::Upper),
        split(&pair.s, Layer::Lower),
    );
    let (x2, f2, s2) = (
        split(x, Layer::Upper),
        split(&pair.f, Layer::Lower),
        split(&pair.s, Layer::Upper),
    );
    let lower_target = check_conditions(g, &f1, &s1, &x1, pair.psi, None);
    let upper_target = check_conditions(g, &f2, &s2, &x2, pair.psi, None);
    let gap_bound_lower = gap_bound(g, &f1, &s1, &x1, pair.psi);
    let gap_bound_upper = gap_bound(g, &f2, &s2, &x2, pair.psi);
    let pass = full.all()
        && lower_target.all()
        && upper_target.all()
        && gap_bound_lower
        && gap_bound_upper;
    Ok(PairReport {
        full,
        lower_target,
        upper_target,
        gap_bound_lower,
        gap_bound_upper,
        pass,
    })
}

#[derive(Debug, Clone)]
pub enum PairConstruction {
    Built {
        pair: ApproxPair,
        report: PairReport,
        rounds: u32,
    },
    Failed {
        reason: String,
        rounds: u32,
    },
}

/// Heuristic constructor: start from the always-valid pair (N(X), X) and
/// close it monotonically — S absorbs vertices with at least d-ψ neighbors
/// in F, F absorbs vertices of N(X) that see more than ψ of S. A vertex
/// outside N(X) that sees more than ψ of S cannot be repaired (F must stay
/// inside N(X)), which is an explicit failure. Output is always verified.
pub fn construct_approx_pair(
    g: &MidLayerGraph,
    x: &[VertexId],
    psi: u32,
) -> Result<PairConstruction> {
    if 2 * psi > g.d() {
        return Err(Error::parameter("psi must be at most d/2"));
    }
    g.validate_set(x)?;
    let nx = g.neighborhood(x);
    let count = g.vertex_count() as u32;
    let mut in_f = vec![false; count as usize];
    let mut in_s = vec![false; count as usize];
    for &v in &nx {
        in_f[v as usize] = true;
    }
    for &v in x {
        in_s[v as usize] = true;
    }
    let d = g.d();
    let mut rounds = 0u32;
    loop {
        rounds += 1;
        if rounds > 2 * count + 4 {
            return Ok(PairConstruction::Failed {
                reason: "iteration cap reached without a fixed point".into(),
                rounds,
            });
        }
        let mut changed = false;
        for u in 0..count {
            if !in_s[u as usize] {
                let df = g.neighbors(u).iter().filter(|&&w| in_f[w as usize]).count() as u32;
                if df + psi >= d {
                    in_s[u as usize] = true;
                    changed = true;
                }
            }
        }
        for v in 0..count {
            if !in_f[v as usize] {
                let ds = g.neighbors(v).iter().filter(|&&w| in_s[w as usize]).count() as u32;
                if ds > psi {
                    if contains_sorted(&nx, v) {
                        in_f[v as usize] = true;
                        changed = true;
                    } else {
                        return Ok(PairConstruction::Failed {
                            reason: format!("vertex {v} outside N(X) has {ds} > ψ neighbors in S"),
                            rounds,
                        });
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let pair = ApproxPair {
        f: (0..count).filter(|&v| in_f[v as usize]).collect(),
        s: (0..count).filter(|&v| in_s[v as usize]).collect(),
        psi,
    };
    let report = verify_approx_pair(g, &pair, x)?;
    if report.pass {
        Ok(PairConstruction::Built {
            pair,
            report,
            rounds,
        })
    } else {
        Ok(PairConstruction::Failed {
            reason: "fixed point did not verify".into(),
            rounds,
        })
    }
}
