//! Routing policies: JSQ, equilibrium (ERP/SERP), perturbed equilibrium, and
//! table policies.
//!
//! A policy maps a configuration to one probability vector per neighborhood.
//! Every variant here is local (row `i` reads only the loads of `S_i`) and
//! shape-invariant (adding a constant to all loads changes nothing), so the
//! shape process stays Markov under each of them.
//!
//! Tie-breaking is fixed once and for all: the *first* node attaining the
//! minimum load, the *last* node attaining the maximum.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::feasibility::{verify_allocation, AllocationMatrix};
use crate::net::{Configuration, StorageNetwork};
use crate::rational::Rat;
use crate::rng::{hash_words, mix64, CounterRng};
use crate::Error;

/// Table keys clip per-neighborhood load differences to this band by default.
pub const DEFAULT_TABLE_CLIP: i64 = 32;

/// Denominator bound for randomly generated table rows.
const TABLE_ROW_DENOMINATOR: u64 = 64;

/// One probability vector per neighborhood.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PolicyDecision {
    pub rows: Vec<Vec<Rat>>,
}

impl PolicyDecision {
    /// Membership in the product of decision simplices.
    pub fn check_simplex(&self) -> Result<(), Error> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.iter().any(|p| p.is_negative()) {
                return Err(Error::Internal(format!(
                    "decision row {i} has a negative entry"
                )));
            }
            if row.iter().sum::<Rat>() != Rat::one() {
                return Err(Error::Internal(format!("decision row {i} does not sum to 1")));
            }
        }
        Ok(())
    }
}

/// Index (not position) of the first node in `s` with minimal load.
pub fn argmin_node(x: &Configuration, s: &[usize]) -> usize {
    s[argmin_pos(x.loads(), s)]
}

/// Index (not position) of the last node in `s` with maximal load.
pub fn argmax_node(x: &Configuration, s: &[usize]) -> usize {
    s[argmax_pos(x.loads(), s)]
}

pub(crate) fn argmin_pos(loads: &[u64], s: &[usize]) -> usize {
    let mut best = 0;
    for (pos, &node) in s.iter().enumerate().skip(1) {
        if loads[node] < loads[s[best]] {
            best = pos;
        }
    }
    best
}

pub(crate) fn argmax_pos(loads: &[u64], s: &[usize]) -> usize {
    let mut best = 0;
    for (pos, &node) in s.iter().enumerate().skip(1) {
        if loads[node] >= loads[s[best]] {
            best = pos;
        }
    }
    best
}

/// A routing policy. Construct through the checked constructors; the
/// invariants (allocation validity, positivity, the epsilon band) are
/// enforced there.
#[derive(Clone, Debug)]
pub enum Policy {
    /// Join the shortest queue: all mass on the first minimal-load node.
    Jsq,
    /// Configuration-independent rows `alpha_ij / lambda_i`. With `strict`
    /// the allocation is strictly positive (SERP), otherwise non-negative
    /// (ERP).
    Equilibrium {
        alpha: AllocationMatrix,
        strict: bool,
    },
    /// SERP shifted by `epsilon/lambda_i` from the last maximal to the first
    /// minimal node of each neighborhood.
    Pserp {
        alpha: AllocationMatrix,
        epsilon: Rat,
    },
    /// Explicit decision table keyed by clipped load differences.
    Table(TablePolicy),
}

impl Policy {
    pub fn jsq() -> Self {
        Policy::Jsq
    }

    /// Equilibrium policy from a (non-negative) allocation; `strict` demands
    /// positivity. This is the shared ERP/SERP constructor.
    pub fn equilibrium(
        net: &StorageNetwork,
        alpha: AllocationMatrix,
        strict: bool,
    ) -> Result<Self, Error> {
        let violations = verify_allocation(net, &alpha)?;
        if !violations.is_empty() {
            return Err(Error::Precondition(format!(
                "allocation does not solve the equilibrium system: {}",
                violations[0]
            )));
        }
        if strict && !alpha.is_strictly_positive() {
            return Err(Error::Precondition(
                "a strong equilibrium policy needs a strictly positive allocation".into(),
            ));
        }
        Ok(Policy::Equilibrium { alpha, strict })
    }

    pub fn erp(net: &StorageNetwork, alpha: AllocationMatrix) -> Result<Self, Error> {
        Policy::equilibrium(net, alpha, false)
    }

    pub fn serp(net: &StorageNetwork, alpha: AllocationMatrix) -> Result<Self, Error> {
        Policy::equilibrium(net, alpha, true)
    }

    /// Perturbed strong equilibrium policy; requires `0 < epsilon < min alpha`.
    pub fn pserp(
        net: &StorageNetwork,
        alpha: AllocationMatrix,
        epsilon: Rat,
    ) -> Result<Self, Error> {
        let violations = verify_allocation(net, &alpha)?;
        if !violations.is_empty() {
            return Err(Error::Precondition(format!(
                "allocation does not solve the equilibrium system: {}",
                violations[0]
            )));
        }
        if !alpha.is_strictly_positive() {
            return Err(Error::Precondition(
                "a perturbed policy needs a strictly positive allocation".into(),
            ));
        }
        let min = alpha.min_entry().expect("non-empty allocation");
        if !epsilon.is_positive() || epsilon >= min {
            return Err(Error::EpsilonOutOfRange {
                epsilon: epsilon.to_string(),
                limit: min.to_string(),
            });
        }
        Ok(Policy::Pserp { alpha, epsilon })
    }

    pub fn table(table: TablePolicy) -> Self {
        Policy::Table(table)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Policy::Jsq => "jsq",
            Policy::Equilibrium { strict: true, .. } => "serp",
            Policy::Equilibrium { strict: false, .. } => "erp",
            Policy::Pserp { .. } => "pserp",
            Policy::Table(_) => "table",
        }
    }

    /// The allocation this policy is built on, when it has one.
    pub fn alpha(&self) -> Option<&AllocationMatrix> {
        match self {
            Policy::Equilibrium { alpha, .. } | Policy::Pserp { alpha, .. } => Some(alpha),
            _ => None,
        }
    }
}

/// Evaluates the policy at a configuration.
pub fn decide(
    policy: &Policy,
    net: &StorageNetwork,
    x: &Configuration,
) -> Result<PolicyDecision, Error> {
    if x.len() != net.node_count() {
        return Err(Error::DimensionMismatch {
            expected: net.node_count(),
            got: x.len(),
        });
    }
    let rows = match policy {
        Policy::Jsq => (0..net.stream_count())
            .map(|i| {
                let s = net.neighborhood(i);
                let jmin = argmin_pos(x.loads(), s);
                let mut row = vec![Rat::zero(); s.len()];
                row[jmin] = Rat::one();
                row
            })
            .collect(),
        Policy::Equilibrium { alpha, .. } => equilibrium_rows(net, alpha),
        Policy::Pserp { alpha, epsilon } => {
            let mut rows = equilibrium_rows(net, alpha);
            for (i, row) in rows.iter_mut().enumerate() {
                let s = net.neighborhood(i);
                if s.len() < 2 {
                    continue;
                }
                let shift = epsilon / net.rate(i);
                let jmin = argmin_pos(x.loads(), s);
                let jmax = argmax_pos(x.loads(), s);
                // When all loads tie, jmin is the first and jmax the last
                // position, so the two shifted entries are always distinct.
                row[jmin] += &shift;
                row[jmax] -= &shift;
            }
            rows
        }
        Policy::Table(table) => (0..net.stream_count())
            .map(|i| table.row(net, i, x.loads()))
            .collect(),
    };
    let decision = PolicyDecision { rows };
    debug_assert!(decision.check_simplex().is_ok());
    Ok(decision)
}

fn equilibrium_rows(net: &StorageNetwork, alpha: &AllocationMatrix) -> Vec<Vec<Rat>> {
    alpha
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().map(|a| a / net.rate(i)).collect())
        .collect()
}

/// A deterministic, shape-invariant decision table. Row `i` is selected by
/// the vector of load differences within `S_i` relative to its first node,
/// each coordinate clipped to `[-clip, clip]`; past the clip the boundary
/// entry keeps applying.
#[derive(Clone, Debug)]
pub struct TablePolicy {
    kind: TableKind,
    clip: i64,
}

#[derive(Clone, Debug)]
enum TableKind {
    /// Rows are pseudo-random points of the decision simplex, keyed by
    /// `(seed, neighborhood, clipped differences)`.
    Seeded { seed: u64 },
    /// Configuration-independent rows.
    Constant { rows: Vec<Vec<Rat>> },
    /// Explicit user map with a constant fallback for missing keys.
    Map {
        entries: BTreeMap<(usize, Vec<i64>), Vec<Rat>>,
        fallback: Vec<Vec<Rat>>,
    },
}

impl TablePolicy {
    pub fn seeded(seed: u64) -> Self {
        TablePolicy {
            kind: TableKind::Seeded { seed },
            clip: DEFAULT_TABLE_CLIP,
        }
    }

    /// Constant rows, one per neighborhood; each must lie in its simplex.
    pub fn constant(net: &StorageNetwork, rows: Vec<Vec<Rat>>) -> Result<Self, Error> {
        check_rows(net, &rows)?;
        Ok(TablePolicy {
            kind: TableKind::Constant { rows },
            clip: DEFAULT_TABLE_CLIP,
        })
    }

    /// Explicit map from `(neighborhood, clipped difference key)` to rows,
    /// falling back to `fallback` where no entry exists.
    pub fn from_map(
        net: &StorageNetwork,
        entries: BTreeMap<(usize, Vec<i64>), Vec<Rat>>,
        fallback: Vec<Vec<Rat>>,
    ) -> Result<Self, Error> {
        check_rows(net, &fallback)?;
        for ((i, _), row) in &entries {
            check_row(net, *i, row)?;
        }
        Ok(TablePolicy {
            kind: TableKind::Map { entries, fallback },
            clip: DEFAULT_TABLE_CLIP,
        })
    }

    pub fn seed(&self) -> Option<u64> {
        match &self.kind {
            TableKind::Seeded { seed } => Some(*seed),
            _ => None,
        }
    }

    pub fn clip(&self) -> i64 {
        self.clip
    }

    /// The clipped difference key for neighborhood `i`: local by construction
    /// and invariant under adding a constant to all loads.
    pub fn key(&self, net: &StorageNetwork, i: usize, loads: &[u64]) -> Vec<i64> {
        let s = net.neighborhood(i);
        let base = loads[s[0]] as i128;
        s.iter()
            .map(|&node| {
                let d = loads[node] as i128 - base;
                d.clamp(-(self.clip as i128), self.clip as i128) as i64
            })
            .collect()
    }

    fn row(&self, net: &StorageNetwork, i: usize, loads: &[u64]) -> Vec<Rat> {
        self.row_for_key(i, &self.key(net, i, loads), net.kappa(i))
    }

    pub(crate) fn row_for_key(&self, i: usize, key: &[i64], kappa: usize) -> Vec<Rat> {
        match &self.kind {
            TableKind::Constant { rows } => rows[i].clone(),
            TableKind::Seeded { seed } => seeded_row(*seed, i, key, kappa),
            TableKind::Map { entries, fallback } => entries
                .get(&(i, key.to_vec()))
                .cloned()
                .unwrap_or_else(|| fallback[i].clone()),
        }
    }
}

fn check_rows(net: &StorageNetwork, rows: &[Vec<Rat>]) -> Result<(), Error> {
    if rows.len() != net.stream_count() {
        return Err(Error::AllocationShape(format!(
            "{} table rows for {} neighborhoods",
            rows.len(),
            net.stream_count()
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        check_row(net, i, row)?;
    }
    Ok(())
}

fn check_row(net: &StorageNetwork, i: usize, row: &[Rat]) -> Result<(), Error> {
    if row.len() != net.kappa(i) {
        return Err(Error::AllocationShape(format!(
            "table row {i} has {} entries for a neighborhood of size {}",
            row.len(),
            net.kappa(i)
        )));
    }
    if row.iter().any(|p| p.is_negative()) || row.iter().sum::<Rat>() != Rat::one() {
        return Err(Error::Precondition(format!(
            "table row {i} is not a probability vector"
        )));
    }
    Ok(())
}

/// A pseudo-random simplex point with denominator at most 64: sorted cut
/// points in `{0..64}` become the cumulative numerators.
pub(crate) fn seeded_row(seed: u64, stream: usize, key: &[i64], kappa: usize) -> Vec<Rat> {
    if kappa == 1 {
        return vec![Rat::one()];
    }
    let base = hash_words(
        seed,
        std::iter::once(stream as u64).chain(key.iter().map(|&d| d as u64)),
    );
    let rng = CounterRng::new(base, 0);
    let mut cuts: Vec<u64> = (0..kappa - 1)
        .map(|c| rng.draw(c as u64) % (TABLE_ROW_DENOMINATOR + 1))
        .collect();
    cuts.sort_unstable();
    cuts.push(TABLE_ROW_DENOMINATOR);
    let mut prev = 0;
    cuts.into_iter()
        .map(|cut| {
            let part = cut - prev;
            prev = cut;
            Rat::new(part as i64, TABLE_ROW_DENOMINATOR as i64).expect("non-zero denominator")
        })
        .collect()
}

/// A deterministic random local policy: rows are pseudo-random points of each
/// decision simplex, keyed by the clipped difference vector.
pub fn random_policy(_net: &StorageNetwork, seed: u64) -> Policy {
    Policy::Table(TablePolicy::seeded(mix64(seed)))
}

/// Policy selector as it appears in configuration files.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "policy", rename_all = "lowercase")]
pub enum PolicySpec {
    Jsq,
    Erp,
    Serp,
    Pserp {
        #[serde(skip_serializing_if = "Option::is_none")]
        epsilon: Option<Rat>,
    },
    Table {
        seed: u64,
    },
}

/// A policy spec resolved against a concrete network: the constructed policy,
/// the allocation backing it (also used for closed-form drift reporting),
/// materialized defaults, and any degradation notices.
#[derive(Clone, Debug)]
pub struct ResolvedPolicy {
    pub policy: Policy,
    pub alpha: Option<AllocationMatrix>,
    pub resolved_epsilon: Option<Rat>,
    pub notices: Vec<String>,
    pub degraded: bool,
}

impl PolicySpec {
    /// Resolves the spec, falling back to JSQ with a notice when the network
    /// does not admit the allocation the requested policy needs. The
    /// fallback keeps simulation commands total on infeasible instances;
    /// callers that must not degrade should check `degraded`.
    pub fn resolve(&self, net: &StorageNetwork) -> Result<ResolvedPolicy, Error> {
        use crate::feasibility::{
            solve_nonneg_allocation, solve_positive_allocation, PositiveSolve,
        };
        let positive = || -> Result<Option<AllocationMatrix>, Error> {
            Ok(match solve_positive_allocation(net)? {
                PositiveSolve::Found(alpha) => Some(alpha),
                _ => None,
            })
        };
        let mut notices = Vec::new();
        match self {
            PolicySpec::Jsq => {
                // The allocation is only for closed-form drift reporting.
                let alpha = match positive()? {
                    Some(alpha) => Some(alpha),
                    None => solve_nonneg_allocation(net)?,
                };
                if alpha.is_none() {
                    notices.push(
                        "no equilibrium allocation exists; JSQ drift reports are oracle-only"
                            .into(),
                    );
                }
                Ok(ResolvedPolicy {
                    policy: Policy::Jsq,
                    alpha,
                    resolved_epsilon: None,
                    notices,
                    degraded: false,
                })
            }
            PolicySpec::Erp => match solve_nonneg_allocation(net)? {
                Some(alpha) => Ok(ResolvedPolicy {
                    policy: Policy::erp(net, alpha.clone())?,
                    alpha: Some(alpha),
                    resolved_epsilon: None,
                    notices,
                    degraded: false,
                }),
                None => {
                    notices.push(
                        "no non-negative allocation exists; ERP is undefined, degrading to JSQ"
                            .into(),
                    );
                    Ok(ResolvedPolicy {
                        policy: Policy::Jsq,
                        alpha: None,
                        resolved_epsilon: None,
                        notices,
                        degraded: true,
                    })
                }
            },
            PolicySpec::Serp => match positive()? {
                Some(alpha) => Ok(ResolvedPolicy {
                    policy: Policy::serp(net, alpha.clone())?,
                    alpha: Some(alpha),
                    resolved_epsilon: None,
                    notices,
                    degraded: false,
                }),
                None => {
                    notices.push(
                        "no positive allocation exists; SERP is undefined, degrading to JSQ".into(),
                    );
                    Ok(ResolvedPolicy {
                        policy: Policy::Jsq,
                        alpha: None,
                        resolved_epsilon: None,
                        notices,
                        degraded: true,
                    })
                }
            },
            PolicySpec::Pserp { epsilon } => match positive()? {
                Some(alpha) => {
                    let min = alpha.min_entry().expect("non-empty allocation");
                    let eps = match epsilon {
                        Some(e) => e.clone(),
                        // Default: midpoint of the admissible interval.
                        None => min.clone() * Rat::new(1, 2)?,
                    };
                    let policy = Policy::pserp(net, alpha.clone(), eps.clone())?;
                    Ok(ResolvedPolicy {
                        policy,
                        alpha: Some(alpha),
                        resolved_epsilon: Some(eps),
                        notices,
                        degraded: false,
                    })
                }
                None => {
                    notices.push(
                        "no positive allocation exists; PSERP is undefined, degrading to JSQ"
                            .into(),
                    );
                    Ok(ResolvedPolicy {
                        policy: Policy::Jsq,
                        alpha: None,
                        resolved_epsilon: None,
                        notices,
                        degraded: true,
                    })
                }
            },
            PolicySpec::Table { seed } => Ok(ResolvedPolicy {
                policy: random_policy(net, *seed),
                alpha: None,
                resolved_epsilon: None,
                notices,
                degraded: false,
            }),
        }
    }
}
