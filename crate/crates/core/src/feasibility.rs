//! Existence of equilibrium allocations and transience certificates.
//!
//! An allocation splits each stream rate `lambda_i` among the nodes of its
//! neighborhood so that every node receives total rate exactly `1/n`. The
//! subset condition decides existence exactly: for every proper non-empty
//! collection `J` of neighborhoods, `sum_{j in J} lambda_j <= n_J / n` where
//! `n_J` counts the nodes in the union. The minimum slack over all `J`
//! classifies the instance:
//!
//! - slack > 0: strictly positive allocations exist (`POSITIVE`),
//! - slack = 0: only allocations with zeros exist (`NONNEG_ONLY`),
//! - slack < 0: no allocation exists (`INFEASIBLE`).
//!
//! Allocations are constructed by integer max-flow after scaling all rates by
//! `n * lcm(denominators)`; strictly positive ones by imposing a uniform
//! lower bound `eps` on every edge and halving `eps` until the induced
//! circulation is feasible. When no positive allocation exists, the witness
//! subset yields a zero-sum functional that is non-negative on the whole
//! decision polytope `D`, certifying non-negative shape drift for every
//! policy.

use std::collections::HashSet;

use num::bigint::BigInt;
use num::{Integer, One, ToPrimitive};
use serde::Serialize;

use crate::maxflow::MaxFlow;
use crate::net::StorageNetwork;
use crate::rational::Rat;
use crate::Error;

/// Exhaustive subset enumeration is capped at `2^24` collections.
pub const SUBSET_ENUMERATION_CAP: usize = 24;

/// Vertex enumeration of the decision polytope is capped at `10^6` choices.
pub const VERTEX_ENUMERATION_GUARD: u64 = 1_000_000;

const PROBE_HALVING_CAP: u32 = 64;

/// Equilibrium routing weights: row `i` holds `alpha_ij` for the nodes of
/// neighborhood `i`, in neighborhood order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AllocationMatrix {
    pub rows: Vec<Vec<Rat>>,
}

impl AllocationMatrix {
    pub fn uniform(net: &StorageNetwork) -> Self {
        let rows = (0..net.stream_count())
            .map(|i| {
                let kappa = net.kappa(i) as i64;
                let share = net.rate(i) / &Rat::from_int(kappa);
                vec![share; net.kappa(i)]
            })
            .collect();
        AllocationMatrix { rows }
    }

    pub fn min_entry(&self) -> Option<Rat> {
        self.rows
            .iter()
            .flat_map(|row| row.iter())
            .cloned()
            .reduce(Rat::min)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.rows
            .iter()
            .all(|row| row.iter().all(|a| a.is_positive()))
    }

    /// Per-node totals `sum_{i,j} alpha_ij [s^i_j = l]`.
    pub fn node_sums(&self, net: &StorageNetwork) -> Vec<Rat> {
        let mut sums = vec![Rat::zero(); net.node_count()];
        for (i, row) in self.rows.iter().enumerate() {
            for (j, a) in row.iter().enumerate() {
                sums[net.neighborhood(i)[j]] += a;
            }
        }
        sums
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum AllocationViolation {
    #[serde(rename = "negative_entry")]
    NegativeEntry { row: usize, col: usize, value: Rat },
    #[serde(rename = "row_sum")]
    RowSum { row: usize, residual: Rat },
    #[serde(rename = "node_sum")]
    NodeSum { node: usize, residual: Rat },
}

impl std::fmt::Display for AllocationViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AllocationViolation::NegativeEntry { row, col, value } => {
                write!(f, "alpha[{row}][{col}] = {value} < 0")
            }
            AllocationViolation::RowSum { row, residual } => {
                write!(f, "row {row} sum off by {residual}")
            }
            AllocationViolation::NodeSum { node, residual } => {
                write!(f, "node {node} sum off by {residual}")
            }
        }
    }
}

/// Checks both constraint families of the allocation system exactly:
/// row sums equal to the rates, per-node sums equal to `1/n`, entries
/// non-negative. Returns every violation with its residual.
pub fn verify_allocation(
    net: &StorageNetwork,
    alpha: &AllocationMatrix,
) -> Result<Vec<AllocationViolation>, Error> {
    if alpha.rows.len() != net.stream_count() {
        return Err(Error::AllocationShape(format!(
            "{} rows for {} neighborhoods",
            alpha.rows.len(),
            net.stream_count()
        )));
    }
    for (i, row) in alpha.rows.iter().enumerate() {
        if row.len() != net.kappa(i) {
            return Err(Error::AllocationShape(format!(
                "row {i} has {} entries for a neighborhood of size {}",
                row.len(),
                net.kappa(i)
            )));
        }
    }
    let mut violations = Vec::new();
    for (i, row) in alpha.rows.iter().enumerate() {
        for (j, a) in row.iter().enumerate() {
            if a.is_negative() {
                violations.push(AllocationViolation::NegativeEntry {
                    row: i,
                    col: j,
                    value: a.clone(),
                });
            }
        }
        let sum: Rat = row.iter().sum();
        if &sum != net.rate(i) {
            violations.push(AllocationViolation::RowSum {
                row: i,
                residual: sum - net.rate(i),
            });
        }
    }
    let per_node = Rat::new(1, net.node_count() as i64)?;
    for (node, sum) in alpha.node_sums(net).into_iter().enumerate() {
        if sum != per_node {
            violations.push(AllocationViolation::NodeSum {
                node,
                residual: sum - &per_node,
            });
        }
    }
    Ok(violations)
}

/// Minimum slack of the subset condition with its lexicographically smallest
/// minimizing collection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubsetCondition {
    pub slack: Rat,
    pub witness: Vec<usize>,
}

/// Scales every rate to an integer: returns `(n * lcm(denoms), rates * scale)`.
fn integer_scale(net: &StorageNetwork) -> Result<(i128, Vec<i128>), Error> {
    let mut lcm = BigInt::one();
    for rate in net.rates() {
        lcm = lcm.lcm(rate.denom());
    }
    let scale_big = lcm * BigInt::from(net.node_count());
    let scale = scale_big.to_i128().ok_or(Error::ScaleOverflow)?;
    let scaled = net
        .rates()
        .iter()
        .map(|r| {
            (r.numer() * &scale_big / r.denom())
                .to_i128()
                .ok_or(Error::ScaleOverflow)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((scale, scaled))
}

/// Evaluates `min over proper non-empty J of (n_J/n - sum_{j in J} lambda_j)`
/// by depth-first enumeration of all `2^K - 2` collections. Among ties the
/// lexicographically smallest witness is returned.
pub fn check_subset_condition(net: &StorageNetwork) -> Result<SubsetCondition, Error> {
    let k = net.stream_count();
    if k > SUBSET_ENUMERATION_CAP {
        return Err(Error::TooManyNeighborhoods {
            count: k,
            cap: SUBSET_ENUMERATION_CAP,
        });
    }
    let n = net.node_count() as i128;
    let (scale, scaled_rates) = integer_scale(net)?;
    // scale = n * lcm, so n_J/n scaled by scale is n_J * lcm.
    let lcm = scale / n;

    struct Search<'a> {
        net: &'a StorageNetwork,
        scaled_rates: &'a [i128],
        lcm: i128,
        cover_counts: Vec<u32>,
        covered: i128,
        rate_sum: i128,
        chosen: Vec<usize>,
        best: Option<(i128, Vec<usize>)>,
    }

    impl Search<'_> {
        fn include(&mut self, i: usize) {
            for &node in self.net.neighborhood(i) {
                if self.cover_counts[node] == 0 {
                    self.covered += 1;
                }
                self.cover_counts[node] += 1;
            }
            self.rate_sum += self.scaled_rates[i];
            self.chosen.push(i);
        }

        fn exclude(&mut self, i: usize) {
            for &node in self.net.neighborhood(i) {
                self.cover_counts[node] -= 1;
                if self.cover_counts[node] == 0 {
                    self.covered -= 1;
                }
            }
            self.rate_sum -= self.scaled_rates[i];
            self.chosen.pop();
        }

        fn recurse(&mut self, i: usize) {
            if i == self.net.stream_count() {
                if self.chosen.is_empty() || self.chosen.len() == self.net.stream_count() {
                    return;
                }
                let slack_scaled = self.covered * self.lcm - self.rate_sum;
                match &mut self.best {
                    Some((best_slack, witness)) => {
                        if slack_scaled < *best_slack
                            || (slack_scaled == *best_slack && self.chosen < *witness)
                        {
                            *best_slack = slack_scaled;
                            *witness = self.chosen.clone();
                        }
                    }
                    None => self.best = Some((slack_scaled, self.chosen.clone())),
                }
                return;
            }
            self.include(i);
            self.recurse(i + 1);
            self.exclude(i);
            self.recurse(i + 1);
        }
    }

    let mut search = Search {
        net,
        scaled_rates: &scaled_rates,
        lcm,
        cover_counts: vec![0; net.node_count()],
        covered: 0,
        rate_sum: 0,
        chosen: Vec::new(),
        best: None,
    };
    search.recurse(0);
    match search.best {
        Some((slack_scaled, witness)) => Ok(SubsetCondition {
            slack: Rat::new(slack_scaled, scale)?,
            witness,
        }),
        // K = 1 has no proper non-empty collection: the condition holds
        // vacuously and strictly. Any real slack is below 1, so 1 serves as
        // the vacuous minimum.
        None if k == 1 => Ok(SubsetCondition {
            slack: Rat::one(),
            witness: Vec::new(),
        }),
        None => Err(Error::Precondition(
            "subset condition needs at least one neighborhood".into(),
        )),
    }
}

/// Flow-network layout shared by the two solvers.
struct FlowLayout {
    source: usize,
    sink: usize,
    node_offset: usize,
}

fn layout(net: &StorageNetwork, extra: usize) -> (FlowLayout, usize) {
    let k = net.stream_count();
    let n = net.node_count();
    let lay = FlowLayout {
        source: 0,
        sink: 1 + k + n,
        node_offset: 1 + k,
    };
    (lay, 1 + k + n + 1 + extra)
}

/// Solves the allocation system over the non-negative orthant by max-flow:
/// source -> neighborhood (capacity `lambda_i`) -> member nodes -> sink
/// (capacity `1/n`), all scaled to integers. Returns `None` when the system
/// is infeasible (max flow below total demand).
pub fn solve_nonneg_allocation(net: &StorageNetwork) -> Result<Option<AllocationMatrix>, Error> {
    let (scale, scaled_rates) = integer_scale(net)?;
    let n = net.node_count() as i128;
    let node_cap = scale / n;
    let (lay, count) = layout(net, 0);
    let mut mf = MaxFlow::new(count);
    let mut edge_ids: Vec<Vec<usize>> = Vec::with_capacity(net.stream_count());
    for (i, &rate) in scaled_rates.iter().enumerate() {
        mf.add_edge(lay.source, 1 + i, rate);
        let ids = net
            .neighborhood(i)
            .iter()
            .map(|&node| mf.add_edge(1 + i, lay.node_offset + node, rate))
            .collect();
        edge_ids.push(ids);
    }
    for node in 0..net.node_count() {
        mf.add_edge(lay.node_offset + node, lay.sink, node_cap);
    }
    if mf.max_flow(lay.source, lay.sink) != scale {
        return Ok(None);
    }
    let rows = edge_ids
        .iter()
        .map(|ids| {
            ids.iter()
                .map(|&e| Rat::new(mf.flow(e), scale))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Some(AllocationMatrix { rows }))
}

/// Attempts an allocation with every entry at least `eps`, via the standard
/// reduction of lower-bounded circulation to plain max-flow.
fn try_allocation_with_lower_bound(
    net: &StorageNetwork,
    eps: &Rat,
) -> Result<Option<AllocationMatrix>, Error> {
    let n = net.node_count() as i128;
    let mut lcm = BigInt::one();
    for rate in net.rates() {
        lcm = lcm.lcm(rate.denom());
    }
    lcm = lcm.lcm(eps.denom());
    let scale_big = lcm * BigInt::from(net.node_count());
    let scale = scale_big.to_i128().ok_or(Error::ScaleOverflow)?;
    let to_scaled = |r: &Rat| -> Result<i128, Error> {
        (r.numer() * &scale_big / r.denom())
            .to_i128()
            .ok_or(Error::ScaleOverflow)
    };
    let scaled_rates = net.rates().iter().map(&to_scaled).collect::<Result<Vec<_>, _>>()?;
    let eps_scaled = to_scaled(eps)?;
    let node_cap = scale / n;

    // Circulation with demands: excess[w] collects lower bounds in minus out.
    let (lay, count) = layout(net, 2);
    let super_source = count - 2;
    let super_sink = count - 1;
    let mut excess = vec![0i128; count];
    let mut mf = MaxFlow::new(count);
    let mut edge_ids: Vec<Vec<usize>> = Vec::with_capacity(net.stream_count());
    for i in 0..net.stream_count() {
        // source -> i carries exactly lambda_i: pure excess transfer.
        excess[1 + i] += scaled_rates[i];
        excess[lay.source] -= scaled_rates[i];
        if eps_scaled > scaled_rates[i] / net.kappa(i) as i128 {
            // eps alone would exceed the row budget; infeasible by counting.
            return Ok(None);
        }
        let ids = net
            .neighborhood(i)
            .iter()
            .map(|&node| {
                excess[lay.node_offset + node] += eps_scaled;
                excess[1 + i] -= eps_scaled;
                mf.add_edge(
                    1 + i,
                    lay.node_offset + node,
                    scaled_rates[i] - eps_scaled,
                )
            })
            .collect();
        edge_ids.push(ids);
    }
    for node in 0..net.node_count() {
        // node -> sink carries exactly 1/n.
        excess[lay.sink] += node_cap;
        excess[lay.node_offset + node] -= node_cap;
    }
    mf.add_edge(lay.sink, lay.source, scale);
    let mut demand_total = 0i128;
    for (w, &e) in excess.iter().enumerate() {
        if e > 0 {
            mf.add_edge(super_source, w, e);
            demand_total += e;
        } else if e < 0 {
            mf.add_edge(w, super_sink, -e);
        }
    }
    if mf.max_flow(super_source, super_sink) != demand_total {
        return Ok(None);
    }
    let rows = edge_ids
        .iter()
        .map(|ids| {
            ids.iter()
                .map(|&e| Rat::new(eps_scaled + mf.flow(e), scale))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Some(AllocationMatrix { rows }))
}

/// Outcome of the strictly-positive solve.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PositiveSolve {
    Found(AllocationMatrix),
    /// No positive solution exists (subset slack <= 0).
    None,
    /// Above the enumeration cap the probe is only a semi-decision.
    Undecided,
}

/// Finds a strictly positive allocation when the subset slack is positive,
/// by probing uniform lower bounds `eps = slack / 2^k`, k = 1, 2, ...
/// Existence guarantees some probe succeeds; the halving cap only guards
/// against arithmetic bugs.
pub fn solve_positive_allocation(net: &StorageNetwork) -> Result<PositiveSolve, Error> {
    match check_subset_condition(net) {
        Ok(cond) => {
            if !cond.slack.is_positive() {
                return Ok(PositiveSolve::None);
            }
            let mut eps = cond.slack * Rat::new(1, 2)?;
            for _ in 0..PROBE_HALVING_CAP {
                if let Some(alpha) = try_allocation_with_lower_bound(net, &eps)? {
                    return Ok(PositiveSolve::Found(alpha));
                }
                eps = eps * Rat::new(1, 2)?;
            }
            Err(Error::ProbeCapExceeded(PROBE_HALVING_CAP))
        }
        Err(Error::TooManyNeighborhoods { .. }) => {
            // Semi-decision above the cap: probe a falling schedule; failure
            // to find one does not prove non-existence.
            let kappa_total: i128 = (0..net.stream_count()).map(|i| net.kappa(i) as i128).sum();
            let mut eps = Rat::new(1, (net.node_count() as i128) * kappa_total * 2)?;
            for _ in 0..PROBE_HALVING_CAP {
                if let Some(alpha) = try_allocation_with_lower_bound(net, &eps)? {
                    return Ok(PositiveSolve::Found(alpha));
                }
                eps = eps * Rat::new(1, 2)?;
            }
            Ok(PositiveSolve::Undecided)
        }
        Err(other) => Err(other),
    }
}

/// Enumerates the vertices of the decision polytope `D`: one choice of target
/// node per neighborhood, centered. Duplicates are removed, first occurrence
/// order is kept.
pub fn polytope_vertices(net: &StorageNetwork) -> Result<Vec<Vec<Rat>>, Error> {
    let mut combos: u64 = 1;
    for i in 0..net.stream_count() {
        combos = combos.saturating_mul(net.kappa(i) as u64);
        if combos > VERTEX_ENUMERATION_GUARD {
            return Err(Error::EnumerationGuard {
                guard: VERTEX_ENUMERATION_GUARD,
            });
        }
    }
    let n = net.node_count();
    let per_node = Rat::new(1, n as i64)?;
    let k = net.stream_count();
    let mut choice = vec![0usize; k];
    let mut seen = HashSet::new();
    let mut vertices = Vec::new();
    loop {
        let mut w = vec![Rat::zero(); n];
        for i in 0..k {
            w[net.neighborhood(i)[choice[i]]] += net.rate(i);
        }
        // Total mass is 1, so centering subtracts exactly 1/n per node.
        let vertex: Vec<Rat> = w.into_iter().map(|v| v - &per_node).collect();
        if seen.insert(vertex.clone()) {
            vertices.push(vertex);
        }
        // Mixed-radix increment over the choice function.
        let mut pos = 0;
        loop {
            if pos == k {
                return Ok(vertices);
            }
            choice[pos] += 1;
            if choice[pos] < net.kappa(pos) {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}

/// The convex-geometry form of the positivity test: the origin lies in the
/// relative interior of `D` iff the subset slack is positive.
pub fn origin_in_ri_d(net: &StorageNetwork) -> Result<bool, Error> {
    Ok(check_subset_condition(net)?.slack.is_positive())
}

/// A zero-sum functional non-negative on every vertex of `D`. Whenever no
/// positive allocation exists, `<F(E(p)), b> >= 0` for every policy decision
/// `p`, which certifies non-negative one-step drift of `<shape, b>`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SeparatingFunctional {
    pub b: Vec<Rat>,
    /// False when the functional annihilates all of `D` (improper separation,
    /// possible in degenerate boundary instances).
    pub proper: bool,
    /// Minimum of `<v, b>` over the vertices of `D` (exact).
    pub min_vertex_product: Rat,
    /// Number of vertices checked exhaustively; `None` when the enumeration
    /// guard forced the equivalent per-neighborhood extreme computation.
    pub vertices_checked: Option<usize>,
}

/// Builds the separating functional from the witness subset `J*`:
/// `b_l = 1 - n_J/n` on the witness union, `-n_J/n` elsewhere.
pub fn separating_functional(net: &StorageNetwork) -> Result<SeparatingFunctional, Error> {
    let cond = check_subset_condition(net)?;
    if cond.slack.is_positive() {
        return Err(Error::Precondition(
            "no certificate: positive solution exists".into(),
        ));
    }
    let n = net.node_count();
    let mut in_union = vec![false; n];
    for &j in &cond.witness {
        for &node in net.neighborhood(j) {
            in_union[node] = true;
        }
    }
    let n_j = in_union.iter().filter(|&&c| c).count();
    let ratio = Rat::new(n_j as i64, n as i64)?;
    let b: Vec<Rat> = in_union
        .iter()
        .map(|&inside| {
            if inside {
                Rat::one() - &ratio
            } else {
                -&ratio
            }
        })
        .collect();
    debug_assert!(b.iter().sum::<Rat>().is_zero());

    // Vertex extremes factor over neighborhoods: min <v_c, b> over choice
    // functions c equals sum_i lambda_i min_{l in S_i} b_l (and likewise for
    // the max), because sum b = 0 removes the centering term.
    let mut min_product = Rat::zero();
    let mut max_product = Rat::zero();
    for i in 0..net.stream_count() {
        let row_min = net
            .neighborhood(i)
            .iter()
            .map(|&l| b[l].clone())
            .reduce(Rat::min)
            .expect("non-empty neighborhood");
        let row_max = net
            .neighborhood(i)
            .iter()
            .map(|&l| b[l].clone())
            .reduce(Rat::max)
            .expect("non-empty neighborhood");
        min_product += &(net.rate(i) * &row_min);
        max_product += &(net.rate(i) * &row_max);
    }

    let vertices_checked = match polytope_vertices(net) {
        Ok(vertices) => {
            let count = vertices.len();
            for v in &vertices {
                let product: Rat = v.iter().zip(&b).map(|(vl, bl)| vl * bl).sum();
                if product.is_negative() {
                    return Err(Error::CertificateViolated(format!(
                        "vertex {v:?} has <v,b> = {product} < 0"
                    )));
                }
            }
            Some(count)
        }
        Err(Error::EnumerationGuard { .. }) => None,
        Err(other) => return Err(other),
    };
    if min_product.is_negative() {
        return Err(Error::CertificateViolated(format!(
            "extreme product {min_product} < 0"
        )));
    }
    Ok(SeparatingFunctional {
        b,
        proper: max_product.is_positive(),
        min_vertex_product: min_product,
        vertices_checked,
    })
}

/// Classification of an instance by the subset slack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "POSITIVE")]
    Positive,
    #[serde(rename = "NONNEG_ONLY")]
    NonnegOnly,
    #[serde(rename = "INFEASIBLE")]
    Infeasible,
    /// Non-negative solutions exist but positivity is undecided (only above
    /// the subset enumeration cap).
    #[serde(rename = "POSITIVE_UNDECIDED")]
    PositiveUndecided,
}

/// Full feasibility analysis of one network.
#[derive(Clone, Debug, Serialize)]
pub struct FeasibilityReport {
    pub status: Status,
    pub slack: Option<Rat>,
    pub witness_subset: Option<Vec<usize>>,
    pub allocation: Option<AllocationMatrix>,
    pub certificate: Option<SeparatingFunctional>,
}

impl FeasibilityReport {
    pub fn erp_exists(&self) -> bool {
        !matches!(self.status, Status::Infeasible)
    }

    pub fn serp_exists(&self) -> Option<bool> {
        match self.status {
            Status::Positive => Some(true),
            Status::NonnegOnly | Status::Infeasible => Some(false),
            Status::PositiveUndecided => None,
        }
    }
}

/// Runs the subset condition, the appropriate solver, and the certificate
/// construction, cross-checking the two decision routes.
pub fn analyze(net: &StorageNetwork) -> Result<FeasibilityReport, Error> {
    match check_subset_condition(net) {
        Ok(cond) => {
            let status = if cond.slack.is_positive() {
                Status::Positive
            } else if cond.slack.is_zero() {
                Status::NonnegOnly
            } else {
                Status::Infeasible
            };
            let allocation = match status {
                Status::Positive => match solve_positive_allocation(net)? {
                    PositiveSolve::Found(alpha) => Some(alpha),
                    _ => {
                        return Err(Error::Internal(
                            "positive slack but no positive allocation found".into(),
                        ))
                    }
                },
                Status::NonnegOnly => {
                    let alpha = solve_nonneg_allocation(net)?.ok_or_else(|| {
                        Error::Internal(
                            "zero slack but max-flow found the system infeasible".into(),
                        )
                    })?;
                    Some(alpha)
                }
                Status::Infeasible => {
                    if solve_nonneg_allocation(net)?.is_some() {
                        return Err(Error::Internal(
                            "negative slack but max-flow found a solution".into(),
                        ));
                    }
                    None
                }
                Status::PositiveUndecided => unreachable!(),
            };
            let certificate = if matches!(status, Status::Positive) {
                None
            } else {
                Some(separating_functional(net)?)
            };
            Ok(FeasibilityReport {
                status,
                slack: Some(cond.slack),
                witness_subset: Some(cond.witness),
                allocation,
                certificate,
            })
        }
        Err(Error::TooManyNeighborhoods { .. }) => {
            let nonneg = solve_nonneg_allocation(net)?;
            match nonneg {
                None => Ok(FeasibilityReport {
                    status: Status::Infeasible,
                    slack: None,
                    witness_subset: None,
                    allocation: None,
                    certificate: None,
                }),
                Some(alpha) => match solve_positive_allocation(net)? {
                    PositiveSolve::Found(positive) => Ok(FeasibilityReport {
                        status: Status::Positive,
                        slack: None,
                        witness_subset: None,
                        allocation: Some(positive),
                        certificate: None,
                    }),
                    _ => Ok(FeasibilityReport {
                        status: Status::PositiveUndecided,
                        slack: None,
                        witness_subset: None,
                        allocation: Some(alpha),
                        certificate: None,
                    }),
                },
            }
        }
        Err(other) => Err(other),
    }
}
