//! Command-line surface for the midlayer engine. Every command emits UTF-8
//! JSON (documents, or JSON-lines for sample streams) to stdout or --out.
//! Exit codes: 0 success, 1 usage, 2 validation/parameter error,
//! 3 resource-limit error, 4 internal-consistency failure.

use clap::{Args, Parser, Subcommand};
use midlayer_core::cluster::{
    approx_compare, approx_count, closed_form_l1, closed_form_l2, formal_log_check, series_term,
    ApproxOptions, ClusterCaps,
};
use midlayer_core::coloring::{
    brute_enumerate, count_colorings_exact, flaw, nearest_ground_state, principal_partitions,
    threshold_polymer_size, Coloring, PrincipalPartition,
};
use midlayer_core::containers::{
    construct_approx_pair, greedy_cover, mutual_cover, verify_approx_pair, ApproxPair,
    BipartiteInstance, PairConstruction, PairReport,
};
use midlayer_core::error::Error;
use midlayer_core::graph::{build_graph, isoperimetry_check, lovasz_bound, Layer, MidLayerGraph};
use midlayer_core::interval::{parse_ratio, ratio_string, RatInterval};
use midlayer_core::polymer::{
    capture_count, enumerate_polymers, kp_lhs, partition_function, tilted_weight, weight,
    KpBookkeeping, Polymer, PolymerParams, DEFAULT_FAMILY_CAP,
};
use midlayer_core::sampler::{defect_stats, sample_mu_hat, SamplerConfig};
use serde_json::{json, Value};
use std::io::Write;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "midlayer",
    version,
    about = "Exact colorings, polymer models and cluster expansion on the middle layers of the Hamming cube"
)]
struct Cli {
    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,
    /// Worker threads for internal parallelism (results are identical for
    /// any worker count).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Interval precision in bits for exp/ln enclosures.
    #[arg(long, global = true, default_value_t = 128)]
    precision: u32,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct PolymerArgs {
    /// Largest admissible polymer size |γ|.
    #[arg(long)]
    max_size: Option<usize>,
    /// Largest admissible boundary |N(γ)| (defaults to N, i.e. no cap).
    #[arg(long)]
    max_boundary: Option<usize>,
    /// Cap on enumerated families.
    #[arg(long, default_value_t = DEFAULT_FAMILY_CAP)]
    family_cap: u64,
}

impl PolymerArgs {
    fn params(&self, g: &MidLayerGraph) -> PolymerParams {
        PolymerParams::new(
            self.max_size.unwrap_or(g.vertex_count()),
            self.max_boundary.unwrap_or(g.vertex_count()),
        )
    }
}

#[derive(Args, Clone)]
struct PartitionArgs {
    /// Colors of the upper-layer side, e.g. "1,2" (default: the
    /// lexicographically first principal partition).
    #[arg(long)]
    a: Option<String>,
    /// Colors of the lower-layer side.
    #[arg(long)]
    b: Option<String>,
}

impl PartitionArgs {
    fn partition(&self, q: u32) -> Result<PrincipalPartition, Error> {
        match (&self.a, &self.b) {
            (Some(a), Some(b)) => PrincipalPartition::new(q, parse_colors(a)?, parse_colors(b)?),
            (None, None) => Ok(principal_partitions(q)?.into_iter().next().unwrap()),
            _ => Err(Error::parameter("--a and --b must be given together")),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Structure of B_d and its rotated view.
    Graph {
        #[command(subcommand)]
        cmd: GraphCmd,
    },
    /// Isoperimetry reports.
    Iso {
        #[command(subcommand)]
        cmd: IsoCmd,
    },
    /// Exact coloring counts.
    Count {
        #[command(subcommand)]
        cmd: CountCmd,
    },
    /// Flaw decompositions of explicit colorings.
    Flaw {
        #[command(subcommand)]
        cmd: FlawCmd,
    },
    /// Polymer enumeration and weights.
    Polymers {
        #[command(subcommand)]
        cmd: PolymersCmd,
    },
    /// Partition function of the polymer model.
    Xi {
        #[command(subcommand)]
        cmd: XiCmd,
    },
    /// Capture identity checks.
    Capture {
        #[command(subcommand)]
        cmd: CaptureCmd,
    },
    /// Cluster-expansion series terms.
    Clusters {
        #[command(subcommand)]
        cmd: ClustersCmd,
    },
    /// Truncated-series approximations and the formal-log oracle.
    Expansion {
        #[command(subcommand)]
        cmd: ExpansionCmd,
    },
    /// Convergence-condition bookkeeping sums.
    Kp {
        #[command(subcommand)]
        cmd: KpCmd,
    },
    /// Covers and approximating pairs.
    Containers {
        #[command(subcommand)]
        cmd: ContainersCmd,
    },
    /// Auxiliary-measure sampling.
    Sample {
        #[command(subcommand)]
        cmd: SampleCmd,
    },
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Vertex/edge counts, regularity, rotated-view sizes.
    Info {
        #[arg(long)]
        d: u32,
    },
}

#[derive(Subcommand)]
enum IsoCmd {
    /// Check both isoperimetry clauses for one set or exhaustively.
    Check {
        #[arg(long)]
        d: u32,
        /// Explicit vertex set, e.g. "0,2,5".
        #[arg(long)]
        vertices: Option<String>,
        /// Exhaustively sweep all single-layer sets up to this size.
        #[arg(long)]
        exhaustive_size: Option<usize>,
        /// Layer for the exhaustive sweep: lower or upper.
        #[arg(long, default_value = "lower")]
        layer: String,
    },
}

#[derive(Subcommand)]
enum CountCmd {
    /// Exact proper-coloring count by frontier DP (d <= 3), cross-checked
    /// by brute force at d <= 2.
    Exact {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        q: u32,
    },
}

#[derive(Subcommand)]
enum FlawCmd {
    /// Flaw decomposition against a partition, or the nearest ground
    /// state when no partition is given.
    Analyze {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        q: u32,
        /// Comma-separated colors in vertex-index order.
        #[arg(long)]
        coloring: String,
        #[command(flatten)]
        partition: PartitionArgs,
        /// Force nearest-ground-state analysis.
        #[arg(long)]
        nearest: bool,
    },
}

#[derive(Subcommand)]
enum PolymersCmd {
    /// All admissible polymers (optionally rooted at a vertex).
    Enumerate {
        #[arg(long)]
        d: u32,
        #[command(flatten)]
        polymer: PolymerArgs,
        #[arg(long)]
        root: Option<u32>,
        /// Emit only the census (counts by size), not the sets.
        #[arg(long)]
        census_only: bool,
    },
    /// Exact weight of one polymer.
    Weight {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        q: u32,
        /// The polymer's vertex set, e.g. "0,3".
        #[arg(long)]
        gamma: String,
        #[command(flatten)]
        partition: PartitionArgs,
    },
}

#[derive(Subcommand)]
enum XiCmd {
    Compute {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        q: u32,
        #[command(flatten)]
        polymer: PolymerArgs,
        #[command(flatten)]
        partition: PartitionArgs,
    },
}

#[derive(Subcommand)]
enum CaptureCmd {
    Check {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        q: u32,
        #[command(flatten)]
        polymer: PolymerArgs,
        #[command(flatten)]
        partition: PartitionArgs,
    },
}

#[derive(Subcommand)]
enum ClustersCmd {
    /// The k-th cluster-expansion term L(k).
    Lk {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        q: u32,
        #[arg(long)]
        k: usize,
        /// Polymer size cap (defaults to k).
        #[arg(long)]
        max_size: Option<usize>,
        #[command(flatten)]
        partition: PartitionArgs,
    },
}

#[derive(Subcommand)]
enum ExpansionCmd {
    /// Truncated-series approximation of the coloring count.
    Approx {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        q: u32,
        #[arg(long)]
        t: usize,
        /// Constant for the reported truncation-error magnitude.
        #[arg(long, default_value_t = 1.0)]
        eps_constant: f64,
    },
    /// Approximation vs the exact count (d <= 3); error reported, never
    /// asserted.
    Compare {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        q: u32,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 1.0)]
        eps_constant: f64,
    },
    /// Formal-log coefficients of Ξ(z) vs enumerated series terms.
    Logcheck {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        q: u32,
        /// Compare coefficients up to this degree.
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        polymer: PolymerArgs,
        #[command(flatten)]
        partition: PartitionArgs,
    },
}

#[derive(Subcommand)]
enum KpCmd {
    /// Per-vertex bookkeeping sums against the 1/d³ threshold.
    Check {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        q: u32,
        #[command(flatten)]
        polymer: PolymerArgs,
        #[command(flatten)]
        partition: PartitionArgs,
        /// Restrict to one vertex (default: summarize over all).
        #[arg(long)]
        vertex: Option<u32>,
        /// Constant for the large-boundary branch of the bookkeeping g.
        #[arg(long, default_value = "1")]
        xi_constant: String,
    },
}

#[derive(Subcommand)]
enum ContainersCmd {
    /// Mutual cover of a vertex set in B_d, or a greedy cover of an
    /// explicit bipartite instance read from a JSON file.
    Cover {
        #[arg(long)]
        d: Option<u32>,
        /// Vertex set in B_d to mutually cover.
        #[arg(long)]
        x: Option<String>,
        /// JSON file {"p_count":..,"q_count":..,"edges":[[u,v],..]}.
        #[arg(long)]
        instance: Option<std::path::PathBuf>,
        /// Minimum degree on P (greedy mode).
        #[arg(long)]
        a: Option<usize>,
        /// Maximum degree on Q (greedy mode).
        #[arg(long)]
        b: Option<usize>,
    },
    /// Construct a ψ-approximating pair for a target set.
    Pair {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        x: String,
        #[arg(long)]
        psi: u32,
    },
    /// Verify a ψ-approximating pair against its target set.
    Verify {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        x: String,
        #[arg(long)]
        f: String,
        #[arg(long)]
        s: String,
        #[arg(long)]
        psi: u32,
    },
}

#[derive(Subcommand)]
enum SampleCmd {
    /// Draw seeded samples from the four-step measure (JSON-lines).
    Run {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        q: u32,
        #[command(flatten)]
        polymer: PolymerArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        samples: usize,
    },
    /// Defect and balance statistics over a fresh sample set.
    Stats {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        q: u32,
        #[command(flatten)]
        polymer: PolymerArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        samples: usize,
        /// Comma-separated thresholds for Pr(|Λ| >= t·N).
        #[arg(long, default_value = "0.0,0.01,0.05,0.1,0.25,0.5")]
        t_grid: String,
        /// Comma-separated balance margins.
        #[arg(long, default_value = "0.0,0.05,0.1,0.25,0.5,1.0")]
        s_grid: String,
    },
}

fn parse_ids(s: &str) -> Result<Vec<u32>, Error> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        out.push(
            part.trim()
                .parse::<u32>()
                .map_err(|_| Error::parameter(format!("bad vertex index '{part}'")))?,
        );
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn parse_colors(s: &str) -> Result<Vec<u8>, Error> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<u8>()
                .map_err(|_| Error::parameter(format!("bad color '{p}'")))
        })
        .collect()
}

fn parse_f64_grid(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::parameter(format!("bad grid value '{p}'")))
        })
        .collect()
}

fn interval_json(iv: &RatInterval, digits: usize) -> Value {
    let (lo, hi) = iv.decimal(digits);
    json!({ "lo": lo, "hi": hi })
}

fn partition_json(p: &PrincipalPartition) -> Value {
    json!({ "a": p.a(), "b": p.b() })
}

fn pair_report_json(r: &PairReport) -> Value {
    serde_json::to_value(r).expect("report serializes")
}

fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), Error> {
    let digits = (cli.precision as usize / 3).clamp(12, 60);
    let emit = |out: &mut dyn Write, value: Value| -> Result<(), Error> {
        writeln!(out, "{}", serde_json::to_string_pretty(&value).unwrap())
            .map_err(|e| Error::validation(format!("write failed: {e}")))
    };
    match &cli.command {
        Command::Graph {
            cmd: GraphCmd::Info { d },
        } => {
            let g = build_graph(*d)?;
            let view = g.rotated_view();
            emit(
                out,
                json!({
                    "d": d,
                    "n": g.n(),
                    "N": g.vertex_count(),
                    "edges": g.edge_count(),
                    "regular": g.d(),
                    "layer_size": g.half_count(),
                    "v_star_size": view.v_star(&g).len(),
                }),
            )
        }
        Command::Iso {
            cmd:
                IsoCmd::Check {
                    d,
                    vertices,
                    exhaustive_size,
                    layer,
                },
        } => {
            let g = build_graph(*d)?;
            if let Some(vs) = vertices {
                let xs = parse_ids(vs)?;
                let r = isoperimetry_check(&g, &xs)?;
                let lb = (!xs.is_empty()).then(|| lovasz_bound(xs.len() as f64, g.d()));
                emit(
                    out,
                    json!({
                        "d": d,
                        "set": xs,
                        "set_size": r.set_size,
                        "nbhd_size": r.nbhd_size,
                        "clause_i": {"applicable": r.clause_i_applicable, "holds": r.clause_i_holds},
                        "clause_ii": {"applicable": r.clause_ii_applicable, "holds": r.clause_ii_holds},
                        "lovasz_lower_bound": lb,
                    }),
                )
            } else if let Some(size) = exhaustive_size {
                let layer = match layer.as_str() {
                    "lower" => Layer::Lower,
                    "upper" => Layer::Upper,
                    other => return Err(Error::parameter(format!("unknown layer '{other}'"))),
                };
                let verts = g.layer_vertices(layer);
                let mut checked = 0u64;
                let mut violations = Vec::new();
                let mut stack: Vec<(Vec<u32>, usize)> = vec![(Vec::new(), 0)];
                while let Some((xs, next)) = stack.pop() {
                    if !xs.is_empty() {
                        checked += 1;
                        let r = isoperimetry_check(&g, &xs)?;
                        if (r.clause_i_applicable && !r.clause_i_holds)
                            || (r.clause_ii_applicable && !r.clause_ii_holds)
                        {
                            violations.push(xs.clone());
                        }
                    }
                    if xs.len() < *size {
                        for (i, &v) in verts.iter().enumerate().skip(next) {
                            let mut ys = xs.clone();
                            ys.push(v);
                            stack.push((ys, i + 1));
                        }
                    }
                }
                emit(
                    out,
                    json!({
                        "d": d,
                        "layer": format!("{layer:?}"),
                        "max_size": size,
                        "checked": checked,
                        "violations": violations,
                        "all_hold": violations.is_empty(),
                    }),
                )
            } else {
                Err(Error::parameter("need --vertices or --exhaustive-size"))
            }
        }
        Command::Count {
            cmd: CountCmd::Exact { d, q },
        } => {
            let g = build_graph(*d)?;
            let dp = count_colorings_exact(&g, *q)?;
            let brute_agrees = if g.d() <= 2 {
                Some(brute_enumerate(&g, *q)?.len().to_string() == dp.to_string())
            } else {
                None
            };
            emit(
                out,
                json!({
                    "d": d,
                    "q": q,
                    "c_q": dp.to_string(),
                    "method": "frontier_dp",
                    "brute_force_agrees": brute_agrees,
                }),
            )
        }
        Command::Flaw {
            cmd:
                FlawCmd::Analyze {
                    d,
                    q,
                    coloring,
                    partition,
                    nearest,
                },
        } => {
            let g = build_graph(*d)?;
            let colors = parse_colors(coloring)?;
            let f = Coloring::new(&g, *q, colors)?;
            let report = if *nearest || (partition.a.is_none() && partition.b.is_none()) {
                nearest_ground_state(&g, &f, *q)?
            } else {
                flaw(&g, &f, &partition.partition(*q)?)?
            };
            emit(
                out,
                json!({
                    "d": d,
                    "q": q,
                    "partition": partition_json(&report.partition),
                    "flaw": report.flaw,
                    "flaw_size": report.flaw.len(),
                    "components": report.components,
                    "max_component_size": report.max_component_size,
                    "threshold_polymer_size": threshold_polymer_size(*q).ok(),
                }),
            )
        }
        Command::Polymers { cmd } => match cmd {
            PolymersCmd::Enumerate {
                d,
                polymer,
                root,
                census_only,
            } => {
                let g = build_graph(*d)?;
                let params = polymer.params(&g);
                let polymers = enumerate_polymers(&g, &params, *root);
                let mut census: Vec<usize> = Vec::new();
                for p in &polymers {
                    if census.len() < p.size() {
                        census.resize(p.size(), 0);
                    }
                    census[p.size() - 1] += 1;
                }
                let mut doc = json!({
                    "d": d,
                    "max_size": params.max_size,
                    "max_boundary": params.max_boundary,
                    "root": root,
                    "count": polymers.len(),
                    "census_by_size": census,
                });
                if !census_only {
                    doc["polymers"] = json!(polymers
                        .iter()
                        .map(|p| p.vertices().to_vec())
                        .collect::<Vec<_>>());
                }
                emit(out, doc)
            }
            PolymersCmd::Weight {
                d,
                q,
                gamma,
                partition,
            } => {
                let g = build_graph(*d)?;
                let p = partition.partition(*q)?;
                let poly = Polymer::new(&g, parse_ids(gamma)?)?;
                let w = weight(&g, &poly, &p);
                let tilted = tilted_weight(&g, &poly, &p, cli.precision);
                emit(
                    out,
                    json!({
                        "d": d,
                        "q": q,
                        "partition": partition_json(&p),
                        "gamma": poly.vertices(),
                        "size": poly.size(),
                        "boundary_size": poly.boundary_size(),
                        "closure": poly.closure(),
                        "weight": ratio_string(&w),
                        "tilted_weight": interval_json(&tilted, digits),
                    }),
                )
            }
        },
        Command::Xi {
            cmd:
                XiCmd::Compute {
                    d,
                    q,
                    polymer,
                    partition,
                },
        } => {
            let g = build_graph(*d)?;
            let p = partition.partition(*q)?;
            let params = polymer.params(&g);
            let xi = partition_function(&g, &params, &p, polymer.family_cap)?;
            emit(
                out,
                json!({
                    "d": d,
                    "q": q,
                    "partition": partition_json(&p),
                    "max_size": params.max_size,
                    "max_boundary": params.max_boundary,
                    "xi": ratio_string(&xi.xi),
                    "family_count": xi.family_count,
                    "max_family_size": xi.max_family_size,
                    "polymer_count": xi.polymer_count,
                }),
            )
        }
        Command::Capture {
            cmd:
                CaptureCmd::Check {
                    d,
                    q,
                    polymer,
                    partition,
                },
        } => {
            let g = build_graph(*d)?;
            let p = partition.partition(*q)?;
            let params = polymer.params(&g);
            let cap = capture_count(&g, &params, &p, polymer.family_cap)?;
            let total = if g.d() <= 3 {
                Some(count_colorings_exact(&g, *q)?)
            } else {
                None
            };
            emit(
                out,
                json!({
                    "d": d,
                    "q": q,
                    "partition": partition_json(&p),
                    "max_size": params.max_size,
                    "max_boundary": params.max_boundary,
                    "capture_count": cap.count.to_string(),
                    "xi": ratio_string(&cap.xi.xi),
                    "integer_check": true,
                    "total_colorings": total.as_ref().map(|t| t.to_string()),
                    "captures_all": total.map(|t| t == cap.count),
                }),
            )
        }
        Command::Clusters {
            cmd:
                ClustersCmd::Lk {
                    d,
                    q,
                    k,
                    max_size,
                    partition,
                },
        } => {
            let g = build_graph(*d)?;
            let p = partition.partition(*q)?;
            let params = PolymerParams::with_max_size(&g, max_size.unwrap_or(*k));
            let term = series_term(&g, &params, &p, *k, &ClusterCaps::default())?;
            let closed = match k {
                1 => Some(closed_form_l1(*d, *q)?),
                2 => Some(closed_form_l2(*d, *q)?),
                _ => None,
            };
            emit(
                out,
                json!({
                    "d": d,
                    "q": q,
                    "k": k,
                    "L_k": ratio_string(&term.value),
                    "cluster_count": term.cluster_count.to_string(),
                    "closed_form": closed.as_ref().map(ratio_string),
                    "closed_form_matches": closed.map(|c| c == term.value),
                }),
            )
        }
        Command::Expansion { cmd } => match cmd {
            ExpansionCmd::Approx {
                d,
                q,
                t,
                eps_constant,
            } => {
                let opts = ApproxOptions {
                    eps_constant: *eps_constant,
                    precision: cli.precision,
                    caps: ClusterCaps::default(),
                };
                let r = approx_count(*d, *q, *t, &opts)?;
                emit(
                    out,
                    json!({
                        "d": d,
                        "q": q,
                        "t": t,
                        "terms": r.terms.iter().map(ratio_string).collect::<Vec<_>>(),
                        "exponent_sum": ratio_string(&r.exponent_sum),
                        "multiplicity": r.multiplicity.to_string(),
                        "ln_value": interval_json(&r.ln_value, digits),
                        "log10_value": r.log10_value,
                        "value": r.value,
                        "eps_magnitude": {"value": r.eps_magnitude, "reported": true, "asserted": false},
                    }),
                )
            }
            ExpansionCmd::Compare {
                d,
                q,
                t,
                eps_constant,
            } => {
                let opts = ApproxOptions {
                    eps_constant: *eps_constant,
                    precision: cli.precision,
                    caps: ClusterCaps::default(),
                };
                let r = approx_compare(*d, *q, *t, &opts)?;
                emit(
                    out,
                    json!({
                        "d": d,
                        "q": q,
                        "t": t,
                        "exact": r.exact.to_string(),
                        "ln_approx": interval_json(&r.approx.ln_value, digits),
                        "approx_value": r.approx.value,
                        "signed_relative_error": {"value": r.signed_relative_error, "reported": true, "asserted": false},
                    }),
                )
            }
            ExpansionCmd::Logcheck {
                d,
                q,
                k,
                polymer,
                partition,
            } => {
                let g = build_graph(*d)?;
                let p = partition.partition(*q)?;
                let params = polymer.params(&g);
                let r = formal_log_check(
                    &g,
                    &params,
                    &p,
                    *k,
                    &ClusterCaps::default(),
                    polymer.family_cap,
                )?;
                emit(
                    out,
                    json!({
                        "d": d,
                        "q": q,
                        "k_max": r.k_max,
                        "log_coefficients": r.log_coefficients[1..].iter().map(ratio_string).collect::<Vec<_>>(),
                        "series_terms": r.series_terms.iter().map(ratio_string).collect::<Vec<_>>(),
                        "matches": r.matches,
                        "all_match": r.all_match,
                    }),
                )
            }
        },
        Command::Kp {
            cmd:
                KpCmd::Check {
                    d,
                    q,
                    polymer,
                    partition,
                    vertex,
                    xi_constant,
                },
        } => {
            let g = build_graph(*d)?;
            let p = partition.partition(*q)?;
            let params = polymer.params(&g);
            let bk = KpBookkeeping {
                xi_constant: parse_ratio(xi_constant)
                    .ok_or_else(|| Error::parameter("bad --xi-constant"))?,
                precision: cli.precision,
            };
            let verts: Vec<u32> = match vertex {
                Some(v) => vec![*v],
                None => (0..g.vertex_count() as u32).collect(),
            };
            let mut reports = Vec::new();
            let mut worst: Option<midlayer_core::polymer::KpReport> = None;
            for v in verts {
                let r = kp_lhs(&g, &params, &p, v, &bk);
                if worst.as_ref().is_none_or(|w| r.sum.hi > w.sum.hi) {
                    worst = Some(r.clone());
                }
                if vertex.is_some() {
                    reports.push(r);
                }
            }
            let worst = worst.expect("at least one vertex");
            emit(
                out,
                json!({
                    "d": d,
                    "q": q,
                    "max_size": params.max_size,
                    "max_boundary": params.max_boundary,
                    "threshold": ratio_string(&worst.threshold),
                    "worst_vertex": worst.vertex,
                    "worst_sum": interval_json(&worst.sum, digits),
                    "comparison": {"value": worst.comparison.to_string(), "reported": true, "asserted": false},
                    "per_vertex": reports.iter().map(|r| json!({
                        "vertex": r.vertex,
                        "sum": interval_json(&r.sum, digits),
                        "comparison": r.comparison.to_string(),
                        "polymer_count": r.polymer_count,
                    })).collect::<Vec<_>>(),
                }),
            )
        }
        Command::Containers { cmd } => match cmd {
            ContainersCmd::Cover {
                d,
                x,
                instance,
                a,
                b,
            } => {
                if let Some(path) = instance {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| Error::parameter(format!("cannot read instance: {e}")))?;
                    let doc: Value = serde_json::from_str(&text)
                        .map_err(|e| Error::parameter(format!("bad instance JSON: {e}")))?;
                    let p_count = doc["p_count"]
                        .as_u64()
                        .ok_or_else(|| Error::parameter("instance needs p_count"))?
                        as usize;
                    let q_count = doc["q_count"]
                        .as_u64()
                        .ok_or_else(|| Error::parameter("instance needs q_count"))?
                        as usize;
                    let edges: Vec<(usize, usize)> = doc["edges"]
                        .as_array()
                        .ok_or_else(|| Error::parameter("instance needs edges"))?
                        .iter()
                        .map(|e| {
                            let u = e[0].as_u64().unwrap_or(u64::MAX) as usize;
                            let v = e[1].as_u64().unwrap_or(u64::MAX) as usize;
                            (u, v)
                        })
                        .collect();
                    let inst = BipartiteInstance::new(p_count, q_count, &edges)?;
                    let a = a.ok_or_else(|| Error::parameter("greedy mode needs --a"))?;
                    let b = b.ok_or_else(|| Error::parameter("greedy mode needs --b"))?;
                    let r = greedy_cover(&inst, a, b)?;
                    emit(
                        out,
                        json!({
                            "mode": "greedy",
                            "chosen": r.chosen,
                            "size": r.chosen.len(),
                            "size_bound": r.size_bound,
                        }),
                    )
                } else {
                    let d = d.ok_or_else(|| Error::parameter("mutual mode needs --d"))?;
                    let x = x
                        .as_ref()
                        .ok_or_else(|| Error::parameter("mutual mode needs --x"))?;
                    let g = build_graph(d)?;
                    let xs = parse_ids(x)?;
                    let r = mutual_cover(&g, &xs)?;
                    emit(
                        out,
                        json!({
                            "mode": "mutual",
                            "d": d,
                            "x": xs,
                            "y": r.y,
                            "size": r.y.len(),
                            "size_bound": r.size_bound,
                        }),
                    )
                }
            }
            ContainersCmd::Pair { d, x, psi } => {
                let g = build_graph(*d)?;
                let xs = parse_ids(x)?;
                match construct_approx_pair(&g, &xs, *psi)? {
                    PairConstruction::Built {
                        pair,
                        report,
                        rounds,
                    } => emit(
                        out,
                        json!({
                            "built": true,
                            "rounds": rounds,
                            "pair": {"F": pair.f, "S": pair.s, "psi": pair.psi},
                            "report": pair_report_json(&report),
                        }),
                    ),
                    PairConstruction::Failed { reason, rounds } => emit(
                        out,
                        json!({
                            "built": false,
                            "rounds": rounds,
                            "reason": reason,
                        }),
                    ),
                }
            }
            ContainersCmd::Verify { d, x, f, s, psi } => {
                let g = build_graph(*d)?;
                let pair = ApproxPair {
                    f: parse_ids(f)?,
                    s: parse_ids(s)?,
                    psi: *psi,
                };
                let report = verify_approx_pair(&g, &pair, &parse_ids(x)?)?;
                emit(
                    out,
                    json!({
                        "d": d,
                        "pair": {"F": pair.f, "S": pair.s, "psi": pair.psi},
                        "report": pair_report_json(&report),
                    }),
                )
            }
        },
        Command::Sample { cmd } => match cmd {
            SampleCmd::Run {
                d,
                q,
                polymer,
                seed,
                samples,
            } => {
                let g = build_graph(*d)?;
                let config = SamplerConfig {
                    d: *d,
                    q: *q,
                    params: polymer.params(&g),
                    seed: *seed,
                    sample_count: *samples,
                    family_cap: polymer.family_cap,
                };
                let records = sample_mu_hat(&g, &config)?;
                for rec in &records {
                    let line = json!({
                        "index": rec.index,
                        "partition": partition_json(&rec.partition),
                        "family": rec.family,
                        "family_size": rec.family_size,
                        "coloring": rec.coloring.values(),
                        "flaw_size": rec.flaw_size,
                        "balance_margins": rec.balance_margins.iter()
                            .map(|(c, m)| json!({"color": c, "margin": ratio_string(m)}))
                            .collect::<Vec<_>>(),
                        "max_balance_margin": ratio_string(&rec.max_balance_margin),
                    });
                    writeln!(out, "{line}")
                        .map_err(|e| Error::validation(format!("write failed: {e}")))?;
                }
                Ok(())
            }
            SampleCmd::Stats {
                d,
                q,
                polymer,
                seed,
                samples,
                t_grid,
                s_grid,
            } => {
                let g = build_graph(*d)?;
                let config = SamplerConfig {
                    d: *d,
                    q: *q,
                    params: polymer.params(&g),
                    seed: *seed,
                    sample_count: *samples,
                    family_cap: polymer.family_cap,
                };
                let records = sample_mu_hat(&g, &config)?;
                let stats = defect_stats(
                    &g,
                    &records,
                    &parse_f64_grid(t_grid)?,
                    &parse_f64_grid(s_grid)?,
                )?;
                emit(
                    out,
                    json!({
                        "d": d,
                        "q": q,
                        "seed": seed,
                        "samples": stats.sample_count,
                        "flaw_equals_family": stats.flaw_equals_family,
                        "family_tail": stats.family_tail.iter()
                            .map(|(t, f)| json!({"t": t, "freq": f})).collect::<Vec<_>>(),
                        "balance_frequency": stats.balance_frequency.iter()
                            .map(|(s, f)| json!({"s": s, "freq": f})).collect::<Vec<_>>(),
                        "asymptotic_tails": {"reported": true, "asserted": false},
                    }),
                )
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    return ExitCode::SUCCESS;
                }
                _ => {
                    eprint!("{e}");
                    return ExitCode::from(1);
                }
            }
        }
    };
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("failed to size worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.out {
        Some(path) => {
            let file = match std::fs::File::create(path) {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("cannot open {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            };
            let mut writer = std::io::BufWriter::new(file);
            let r = run(&cli, &mut writer);
            let _ = writer.flush();
            r
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            run(&cli, &mut lock)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Parameter(_) | Error::Validation(_) => ExitCode::from(2),
                Error::Resource(_) => ExitCode::from(3),
                Error::Inconsistency(_) => ExitCode::from(4),
            }
        }
    }
}
