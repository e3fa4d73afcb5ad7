//! Exact one-step drift of the shape magnitude.
//!
//! Write `f(x) = sum_l (x_l - mean)^2` for the shape magnitude and
//! `g = sqrt(f)`. Adding one item at node `l` changes `f` by exactly
//! `2(x_l - mean) + 1 - 1/n`, so the expected one-step drift under any policy
//! is a finite rational sum over the arrival outcomes. That enumeration is
//! the oracle here; the closed forms it is checked against:
//!
//! - equilibrium policies: drift `= 1 - 1/n` at every configuration;
//! - perturbed equilibrium: `-2 eps sum_i (max load - min load in S_i) + 1 - 1/n`;
//! - JSQ with an equilibrium allocation `alpha`:
//!   `-2 sum_i sum_{j != jmin} alpha_ij (x_{s_ij} - x_min) + 1 - 1/n`.
//!
//! All `f`-drift arithmetic is exact. Only `g` needs square roots; those are
//! bracketed by integer-sqrt intervals of width at most 1e-12 and the
//! concavity bound `E[dg] <= E[df] / (2 sqrt(f))` is asserted with 1e-9
//! slack.

use num::bigint::BigInt;
use serde::Serialize;

use crate::feasibility::AllocationMatrix;
use crate::net::{shape_magnitude, Configuration, StorageNetwork};
use crate::policy::{argmax_node, argmin_node, argmin_pos, decide, Policy};
use crate::rational::Rat;
use crate::Error;

/// Change of the shape magnitude when one item lands on `node`:
/// `2 (x_node - mean) + 1 - 1/n`.
pub fn delta_f_unit(x: &Configuration, node: usize, net: &StorageNetwork) -> Result<Rat, Error> {
    let n = net.node_count();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let mean = x.mean();
    let centered = Rat::from_int(x.loads()[node] as i128) - mean;
    Ok(Rat::from_int(2) * centered + Rat::one() - Rat::new(1, n as i64)?)
}

/// Exact expected one-step drift with per-neighborhood conditional terms.
#[derive(Clone, Debug, Serialize)]
pub struct DriftReport {
    /// `E[f(x') - f(x)]`, the enumeration oracle.
    pub expected_delta_f: Rat,
    /// `E[f(x') - f(x) | arrival at S_i]` per neighborhood; the expectation
    /// is exactly the rate-weighted sum of these.
    pub contributions: Vec<Rat>,
    /// Closed-form value when the policy carries one (equilibrium and
    /// perturbed-equilibrium policies; JSQ needs an external allocation).
    pub closed_form: Option<Rat>,
    /// Whether the closed form equals the oracle exactly.
    #[serde(rename = "match")]
    pub matches: Option<bool>,
}

/// Enumerates the one-arrival outcome distribution of `policy` at `x` and
/// sums `delta_f_unit` exactly. This is the brute-force oracle every closed
/// form is tested against.
pub fn expected_drift_f(
    net: &StorageNetwork,
    policy: &Policy,
    x: &Configuration,
) -> Result<DriftReport, Error> {
    let decision = decide(policy, net, x)?;
    let mut contributions = Vec::with_capacity(net.stream_count());
    let mut total = Rat::zero();
    for i in 0..net.stream_count() {
        let mut conditional = Rat::zero();
        for (j, p) in decision.rows[i].iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let node = net.neighborhood(i)[j];
            conditional += &(p * &delta_f_unit(x, node, net)?);
        }
        total += &(net.rate(i) * &conditional);
        contributions.push(conditional);
    }
    let closed_form = match policy {
        Policy::Equilibrium { .. } => Some(equilibrium_drift(net)?),
        Policy::Pserp { alpha, epsilon } => {
            Some(pserp_drift_closed_form(net, alpha, epsilon, x)?)
        }
        _ => None,
    };
    let matches = closed_form.as_ref().map(|cf| cf == &total);
    Ok(DriftReport {
        expected_delta_f: total,
        contributions,
        closed_form,
        matches,
    })
}

/// Drift of any equilibrium policy: `1 - 1/n` regardless of the state.
pub fn equilibrium_drift(net: &StorageNetwork) -> Result<Rat, Error> {
    Ok(Rat::one() - Rat::new(1, net.node_count() as i64)?)
}

/// Closed form for the perturbed equilibrium policy:
/// `-2 eps sum_i (x at last-max of S_i - x at first-min of S_i) + 1 - 1/n`.
pub fn pserp_drift_closed_form(
    net: &StorageNetwork,
    alpha: &AllocationMatrix,
    epsilon: &Rat,
    x: &Configuration,
) -> Result<Rat, Error> {
    if !alpha.is_strictly_positive() {
        return Err(Error::Precondition(
            "the perturbed closed form needs a strictly positive allocation".into(),
        ));
    }
    let min = alpha.min_entry().expect("non-empty allocation");
    if !epsilon.is_positive() || epsilon >= &min {
        return Err(Error::EpsilonOutOfRange {
            epsilon: epsilon.to_string(),
            limit: min.to_string(),
        });
    }
    let mut gap_sum = 0i128;
    for i in 0..net.stream_count() {
        let s = net.neighborhood(i);
        let hi = x.loads()[argmax_node(x, s)] as i128;
        let lo = x.loads()[argmin_node(x, s)] as i128;
        gap_sum += hi - lo;
    }
    Ok(Rat::from_int(-2) * epsilon * Rat::from_int(gap_sum) + equilibrium_drift(net)?)
}

/// Closed form for JSQ built over an equilibrium allocation `alpha`:
/// `-2 sum_i sum_{j != jmin} alpha_ij (x_{s_ij} - x at first-min) + 1 - 1/n`.
pub fn jsq_drift_closed_form(
    net: &StorageNetwork,
    alpha: &AllocationMatrix,
    x: &Configuration,
) -> Result<Rat, Error> {
    if alpha.rows.len() != net.stream_count() {
        return Err(Error::AllocationShape(format!(
            "{} rows for {} neighborhoods",
            alpha.rows.len(),
            net.stream_count()
        )));
    }
    let mut sum = Rat::zero();
    for i in 0..net.stream_count() {
        let s = net.neighborhood(i);
        let jmin = argmin_pos(x.loads(), s);
        let min_load = x.loads()[s[jmin]] as i128;
        for (j, a) in alpha.rows[i].iter().enumerate() {
            if j == jmin {
                continue;
            }
            let gap = x.loads()[s[j]] as i128 - min_load;
            sum += &(a * &Rat::from_int(gap));
        }
    }
    Ok(Rat::from_int(-2) * sum + equilibrium_drift(net)?)
}

/// Verifies `|f(x + e_l) - f(x)|^2 <= 16 f(x)` for every unit arrival; the
/// squared form keeps the comparison rational. Requires `f(x) > 0`.
pub fn jump_bound_check(x: &Configuration, net: &StorageNetwork) -> Result<(), Error> {
    let f = shape_magnitude(x, net)?;
    if f.is_zero() {
        return Err(Error::Precondition(
            "the jump bound hypothesis needs a non-zero shape magnitude".into(),
        ));
    }
    let sixteen_f = Rat::from_int(16) * &f;
    for node in 0..net.node_count() {
        let delta = delta_f_unit(x, node, net)?;
        let squared = &delta * &delta;
        if squared > sixteen_f {
            return Err(Error::Internal(format!(
                "jump bound violated at node {node}: |{delta}|^2 > 16 * {f}"
            )));
        }
    }
    Ok(())
}

/// Asserts JSQ one-step optimality against `other`: the JSQ drift never
/// exceeds the other policy's drift, exactly.
pub fn jsq_optimality_check(
    net: &StorageNetwork,
    x: &Configuration,
    other: &Policy,
) -> Result<(), Error> {
    let jsq = expected_drift_f(net, &Policy::Jsq, x)?.expected_delta_f;
    let them = expected_drift_f(net, other, x)?.expected_delta_f;
    if jsq > them {
        return Err(Error::Internal(format!(
            "JSQ drift {jsq} exceeds {} drift {them} at {:?}",
            other.kind(),
            x.loads()
        )));
    }
    Ok(())
}

/// `[lo, hi]` rational bracket of `sqrt(q)` with `hi - lo <= 1e-13`.
fn sqrt_interval(q: &Rat) -> Result<(Rat, Rat), Error> {
    if q.is_negative() {
        return Err(Error::Precondition("sqrt of a negative rational".into()));
    }
    if q.is_zero() {
        return Ok((Rat::zero(), Rat::zero()));
    }
    // sqrt(p/d) = sqrt(p*d)/d; bracket sqrt(p*d) by integer sqrt at scale S.
    let scale = BigInt::from(10u64).pow(13);
    let n = q.numer() * q.denom();
    let r = (&n * &scale * &scale).sqrt();
    let denom = q.denom() * &scale;
    let lo = Rat::new(r.clone(), denom.clone())?;
    let hi = Rat::new(r + BigInt::from(1), denom)?;
    Ok((lo, hi))
}

/// Drift of `g = sqrt(f)` by exact outcome enumeration with interval square
/// roots, together with the concavity bound it must respect.
#[derive(Clone, Debug, Serialize)]
pub struct GDriftReport {
    /// Rational bracket of `E[g(x')] - g(x)`.
    pub drift_lo: Rat,
    pub drift_hi: Rat,
    /// Rational bracket of the bound `E[f(x') - f(x)] / (2 sqrt(f(x)))`.
    pub bound_lo: Rat,
    pub bound_hi: Rat,
    /// Upper bound on `max_outcome |g(x') - g(x)|`; always at most 4.
    pub max_jump_hi: Rat,
}

impl GDriftReport {
    pub fn drift_mid(&self) -> f64 {
        (self.drift_lo.to_f64() + self.drift_hi.to_f64()) / 2.0
    }

    pub fn bound_mid(&self) -> f64 {
        (self.bound_lo.to_f64() + self.bound_hi.to_f64()) / 2.0
    }
}

const G_ASSERT_SLACK_NUM: i64 = 1;
const G_ASSERT_SLACK_DEN: i64 = 1_000_000_000;

/// Computes `E[g(x')] - g(x)` by enumeration, checks the per-outcome jump
/// bound `|g(x') - g(x)| <= 4`, and asserts the concavity bound with 1e-9
/// slack. Requires `f(x) > 0`.
pub fn expected_drift_g(
    net: &StorageNetwork,
    policy: &Policy,
    x: &Configuration,
) -> Result<GDriftReport, Error> {
    let f = shape_magnitude(x, net)?;
    if f.is_zero() {
        return Err(Error::Precondition(
            "g-drift is only defined away from the zero shape".into(),
        ));
    }
    let (g_lo, g_hi) = sqrt_interval(&f)?;
    let decision = decide(policy, net, x)?;
    let mut e_lo = Rat::zero();
    let mut e_hi = Rat::zero();
    let mut max_jump_hi = Rat::zero();
    let four = Rat::from_int(4);
    let slack = Rat::new(G_ASSERT_SLACK_NUM, G_ASSERT_SLACK_DEN)?;
    for i in 0..net.stream_count() {
        for (j, p) in decision.rows[i].iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let node = net.neighborhood(i)[j];
            let f_next = shape_magnitude(&x.bumped(node, 1), net)?;
            let (next_lo, next_hi) = sqrt_interval(&f_next)?;
            let weight = net.rate(i) * p;
            e_lo += &(&weight * &next_lo);
            e_hi += &(&weight * &next_hi);
            let jump_hi = (&next_hi - &g_lo).abs().max((&g_hi - &next_lo).abs());
            if jump_hi > (&four + &slack) {
                return Err(Error::Internal(format!(
                    "g-jump above 4 at node {node}: up to {}",
                    jump_hi.to_f64()
                )));
            }
            max_jump_hi = max_jump_hi.max(jump_hi);
        }
    }
    let drift_lo = e_lo - &g_hi;
    let drift_hi = e_hi - &g_lo;
    let df = expected_drift_f(net, policy, x)?.expected_delta_f;
    // bound = df / (2 g); the interval endpoints flip with the sign of df.
    let two_g_lo = Rat::from_int(2) * &g_lo;
    let two_g_hi = Rat::from_int(2) * &g_hi;
    let (bound_lo, bound_hi) = if df.is_negative() {
        (&df / &two_g_lo, &df / &two_g_hi)
    } else {
        (&df / &two_g_hi, &df / &two_g_lo)
    };
    if drift_hi > &bound_lo + &slack {
        return Err(Error::Internal(format!(
            "concavity bound violated: drift up to {} vs bound at least {}",
            drift_hi.to_f64(),
            bound_lo.to_f64()
        )));
    }
    Ok(GDriftReport {
        drift_lo,
        drift_hi,
        bound_lo,
        bound_hi,
        max_jump_hi,
    })
}

/// Certificate drift: `<F(E(p)), b>` where `E(p)` is the expected arrival
/// vector of the policy's decision at `x`. For a valid separating functional
/// this is non-negative at every configuration; a negative value is an error.
pub fn certificate_drift_check(
    net: &StorageNetwork,
    policy: &Policy,
    x: &Configuration,
    b: &[Rat],
) -> Result<Rat, Error> {
    if b.len() != net.node_count() {
        return Err(Error::DimensionMismatch {
            expected: net.node_count(),
            got: b.len(),
        });
    }
    let decision = decide(policy, net, x)?;
    let mut arrival = vec![Rat::zero(); net.node_count()];
    for i in 0..net.stream_count() {
        for (j, p) in decision.rows[i].iter().enumerate() {
            arrival[net.neighborhood(i)[j]] += &(net.rate(i) * p);
        }
    }
    // Total arrival mass is 1, so centering subtracts 1/n per coordinate.
    let per_node = Rat::new(1, net.node_count() as i64)?;
    let value: Rat = arrival
        .iter()
        .zip(b)
        .map(|(a, bl)| (a - &per_node) * bl)
        .sum();
    if value.is_negative() {
        return Err(Error::CertificateViolated(format!(
            "<F(E(p)), b> = {value} < 0 at {:?} under {}",
            x.loads(),
            policy.kind()
        )));
    }
    Ok(value)
}
