//! Deterministic random problem instances for property sweeps.
//!
//! Drift identities, the feasibility equivalence triangle, and the JSQ
//! optimality sweep all quantify over "random networks"; this module is the
//! shared generator. Everything is a pure function of the supplied draw
//! stream, so sweeps are reproducible across platforms and worker counts.

use crate::feasibility::{
    check_subset_condition, solve_positive_allocation, AllocationMatrix, PositiveSolve,
};
use crate::net::StorageNetwork;
use crate::rational::Rat;

/// A random network on `n` nodes: up to `n + 2` random neighborhoods patched
/// to cover every node, and rates `a_i / 24` from a random composition of 24.
/// Always validates; connectivity and feasibility vary.
pub fn random_net(n: usize, draw: &mut impl FnMut() -> u64) -> StorageNetwork {
    assert!(n >= 1);
    let k_target = 1 + (draw() % (n as u64 + 2)) as usize;
    let mut neighborhoods: Vec<Vec<usize>> = Vec::new();
    let mut covered = vec![false; n];
    for _ in 0..k_target {
        let mut members: Vec<usize> = (0..n).filter(|_| draw().is_multiple_of(2)).collect();
        if members.is_empty() {
            members.push((draw() % n as u64) as usize);
        }
        for &m in &members {
            covered[m] = true;
        }
        neighborhoods.push(members);
    }
    let uncovered: Vec<usize> = (0..n).filter(|&l| !covered[l]).collect();
    if !uncovered.is_empty() {
        neighborhoods.push(uncovered);
    }
    let k = neighborhoods.len();
    // Composition of 24 into k positive parts (k <= n + 3 <= 24 in practice).
    let denom = 24u64.max(k as u64);
    let mut parts = vec![1u64; k];
    for _ in 0..denom - k as u64 {
        parts[(draw() % k as u64) as usize] += 1;
    }
    let rates = parts
        .into_iter()
        .map(|p| Rat::new(p as i64, denom as i64).expect("positive denominator"))
        .collect();
    StorageNetwork::new(n, neighborhoods, rates)
}

/// A random connected network admitting a strictly positive allocation,
/// together with that allocation. `None` when the draw produced an instance
/// without one (caller retries).
pub fn random_positive_net(
    n: usize,
    draw: &mut impl FnMut() -> u64,
) -> Option<(StorageNetwork, AllocationMatrix)> {
    let net = random_net(n, draw);
    if net.validate().is_err() || !net.is_connected() {
        return None;
    }
    let cond = check_subset_condition(&net).ok()?;
    if !cond.slack.is_positive() {
        return None;
    }
    match solve_positive_allocation(&net).ok()? {
        PositiveSolve::Found(alpha) => Some((net, alpha)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn generated_nets_validate() {
        let rng = CounterRng::new(11, 0);
        let mut ctr = 0u64;
        let mut draw = move || {
            ctr += 1;
            rng.draw(ctr)
        };
        for trial in 0..200 {
            let n = 1 + (trial % 6);
            let net = random_net(n, &mut draw);
            assert!(net.validate().is_ok(), "trial {trial}: {net:?}");
        }
    }

    #[test]
    fn positive_nets_carry_positive_allocations() {
        let rng = CounterRng::new(12, 0);
        let mut ctr = 0u64;
        let mut draw = move || {
            ctr += 1;
            rng.draw(ctr)
        };
        let mut found = 0;
        while found < 25 {
            if let Some((net, alpha)) = random_positive_net(4, &mut draw) {
                assert!(alpha.is_strictly_positive());
                assert!(crate::feasibility::verify_allocation(&net, &alpha)
                    .unwrap()
                    .is_empty());
                found += 1;
            }
        }
    }
}
