//! The storage network, load configurations, and the shape transform.
//!
//! A network has `n` nodes and `K` neighborhoods `S_i` (strictly increasing
//! index lists covering all nodes). Items arrive to neighborhood `i` at exact
//! rational rate `lambda_i`, with the rates summing to one. A configuration is
//! the integer load vector; its shape is the load vector centered at its mean.
//! Shapes are kept in the integer scaling `d = n*x - (sum x)*1` so equality,
//! hashing, and the zero test are exact.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::Rat;
use crate::Error;

/// Node indices are 0-based everywhere, including file formats.
#[derive(Clone, PartialEq, Eq)]
pub struct StorageNetwork {
    n: usize,
    neighborhoods: Vec<Vec<usize>>,
    rates: Vec<Rat>,
}

impl StorageNetwork {
    /// Builds a network without checking the model invariants; call
    /// [`StorageNetwork::validate`] to check them.
    pub fn new(n: usize, neighborhoods: Vec<Vec<usize>>, rates: Vec<Rat>) -> Self {
        StorageNetwork {
            n,
            neighborhoods,
            rates,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of neighborhoods (streams), `K`.
    pub fn stream_count(&self) -> usize {
        self.neighborhoods.len()
    }

    pub fn neighborhood(&self, i: usize) -> &[usize] {
        &self.neighborhoods[i]
    }

    pub fn neighborhoods(&self) -> &[Vec<usize>] {
        &self.neighborhoods
    }

    /// Neighborhood size `kappa_i`.
    pub fn kappa(&self, i: usize) -> usize {
        self.neighborhoods[i].len()
    }

    pub fn rate(&self, i: usize) -> &Rat {
        &self.rates[i]
    }

    pub fn rates(&self) -> &[Rat] {
        &self.rates
    }

    /// Checks every model invariant; each violation names what failed.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut violations = Vec::new();
        if self.n < 1 {
            violations.push("node count n must be >= 1".to_owned());
        }
        if self.neighborhoods.is_empty() {
            violations.push("at least one neighborhood is required".to_owned());
        }
        if self.rates.len() != self.neighborhoods.len() {
            violations.push(format!(
                "got {} rates for {} neighborhoods",
                self.rates.len(),
                self.neighborhoods.len()
            ));
        }
        let mut covered = vec![false; self.n];
        for (i, s) in self.neighborhoods.iter().enumerate() {
            if s.is_empty() {
                violations.push(format!("neighborhood {i} is empty"));
            }
            if !s.windows(2).all(|w| w[0] < w[1]) {
                violations.push(format!("neighborhood {i} is not strictly increasing"));
            }
            for &node in s {
                if node >= self.n {
                    violations.push(format!(
                        "neighborhood {i} references node {node} outside 0..{}",
                        self.n
                    ));
                } else {
                    covered[node] = true;
                }
            }
        }
        for (node, seen) in covered.iter().enumerate() {
            if !seen {
                violations.push(format!("union does not cover node {node}"));
            }
        }
        for (i, rate) in self.rates.iter().enumerate() {
            if !rate.is_positive() {
                violations.push(format!("rate {i} is {rate}, must be > 0"));
            }
        }
        if self.rates.len() == self.neighborhoods.len() {
            let total: Rat = self.rates.iter().sum();
            if total != Rat::one() {
                violations.push(format!("rates sum to {total} != 1"));
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    /// Whether the node graph (edge `j ~ k` iff `j` and `k` share a
    /// neighborhood) is connected. Without connectivity no routing policy can
    /// be positive recurrent in shape.
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut adjacency = vec![Vec::new(); self.n];
        for s in &self.neighborhoods {
            for w in s.windows(2) {
                // Within a neighborhood every pair is adjacent; chaining
                // consecutive members gives the same components.
                adjacency[w[0]].push(w[1]);
                adjacency[w[1]].push(w[0]);
            }
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    /// Parses the JSON network definition:
    /// `{ "n": int, "neighborhoods": [[int,...],...], "rates": ["p/q",...] }`.
    /// Rates must be exact rational strings; floats are rejected.
    pub fn from_json_str(text: &str) -> Result<Self, Error> {
        let raw: RawNetwork =
            serde_json::from_str(text).map_err(|e| Error::NetworkParse(e.to_string()))?;
        let mut rates = Vec::with_capacity(raw.rates.len());
        for (i, r) in raw.rates.iter().enumerate() {
            let rat: Rat = r
                .parse()
                .map_err(|e| Error::NetworkParse(format!("rates[{i}] = {r:?}: {e}")))?;
            rates.push(rat);
        }
        Ok(StorageNetwork::new(raw.n, raw.neighborhoods, rates))
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "neighborhoods": self.neighborhoods,
            "rates": self.rates.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
        })
    }
}

impl fmt::Debug for StorageNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "StorageNetwork(n={}, S={:?}, rates={:?})",
            self.n, self.neighborhoods, self.rates
        )
    }
}

#[derive(Deserialize)]
struct RawNetwork {
    n: usize,
    neighborhoods: Vec<Vec<usize>>,
    rates: Vec<String>,
}

/// Integer load vector; loads only grow (items are never removed).
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Configuration(pub Vec<u64>);

impl Configuration {
    pub fn zero(n: usize) -> Self {
        Configuration(vec![0; n])
    }

    pub fn loads(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u128 {
        self.0.iter().map(|&x| x as u128).sum()
    }

    /// The configuration with `count` added to node `node`.
    pub fn bumped(&self, node: usize, count: u64) -> Self {
        let mut loads = self.0.clone();
        loads[node] += count;
        Configuration(loads)
    }

    /// Mean load as an exact rational.
    pub fn mean(&self) -> Rat {
        Rat::new(self.total() as i128, self.0.len() as i128).expect("non-empty configuration")
    }
}

impl From<Vec<u64>> for Configuration {
    fn from(loads: Vec<u64>) -> Self {
        Configuration(loads)
    }
}

/// The centered load vector, stored as `d = n*x - (sum x)*1` to stay integer.
/// The actual shape coordinate is `d[l] / n`; two configurations have equal
/// shape iff they differ by a constant vector.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Shape {
    scaled: Vec<i128>,
}

impl Shape {
    pub fn scaled(&self) -> &[i128] {
        &self.scaled
    }

    pub fn is_zero(&self) -> bool {
        self.scaled.iter().all(|&d| d == 0)
    }

    /// Exact shape coordinates `d[l] / n`.
    pub fn coords(&self) -> Vec<Rat> {
        let n = self.scaled.len() as i128;
        self.scaled
            .iter()
            .map(|&d| Rat::new(d, n).expect("n > 0"))
            .collect()
    }

    pub fn max_abs_scaled(&self) -> i128 {
        self.scaled.iter().map(|d| d.abs()).max().unwrap_or(0)
    }
}

/// Centers a configuration: `d[l] = n*x[l] - sum(x)`.
pub fn shape_of(x: &Configuration, net: &StorageNetwork) -> Result<Shape, Error> {
    let n = net.node_count();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let total = x.total() as i128;
    let scaled = x
        .loads()
        .iter()
        .map(|&v| (n as i128) * (v as i128) - total)
        .collect();
    Ok(Shape { scaled })
}

/// Shape magnitude: the squared Euclidean norm of the centered load vector,
/// `sum_l (x_l - mean)^2 = sum_l d_l^2 / n^2`, exact.
pub fn shape_magnitude(x: &Configuration, net: &StorageNetwork) -> Result<Rat, Error> {
    let shape = shape_of(x, net)?;
    Ok(magnitude_of_shape(&shape))
}

pub fn magnitude_of_shape(shape: &Shape) -> Rat {
    let n = shape.scaled.len() as i128;
    let sum_sq: i128 = shape.scaled.iter().map(|&d| d * d).sum();
    Rat::new(sum_sq, n * n).expect("n > 0")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use proptest::prelude::*;

    pub(crate) fn pairs3_uniform() -> StorageNetwork {
        StorageNetwork::new(
            3,
            vec![vec![0, 1], vec![0, 2], vec![1, 2]],
            vec![rat(1, 3), rat(1, 3), rat(1, 3)],
        )
    }

    #[test]
    fn validate_accepts_the_three_pairs_network() {
        assert!(pairs3_uniform().validate().is_ok());
    }

    #[test]
    fn validate_reports_coverage_failure() {
        let net = StorageNetwork::new(2, vec![vec![0]], vec![rat(1, 1)]);
        let violations = net.validate().unwrap_err();
        assert!(violations.iter().any(|v| v.contains("cover node 1")), "{violations:?}");
    }

    #[test]
    fn validate_reports_bad_rate_sum() {
        let net = StorageNetwork::new(
            3,
            vec![vec![0, 1], vec![1, 2]],
            vec![rat(1, 2), rat(1, 3)],
        );
        let violations = net.validate().unwrap_err();
        assert!(
            violations.iter().any(|v| v.contains("sum to 5/6")),
            "{violations:?}"
        );
    }

    #[test]
    fn validate_reports_non_increasing_and_out_of_range() {
        let net = StorageNetwork::new(
            2,
            vec![vec![1, 0], vec![0, 5]],
            vec![rat(1, 2), rat(1, 2)],
        );
        let violations = net.validate().unwrap_err();
        assert!(violations.iter().any(|v| v.contains("not strictly increasing")));
        assert!(violations.iter().any(|v| v.contains("node 5")));
    }

    #[test]
    fn connectivity() {
        let chain = StorageNetwork::new(
            3,
            vec![vec![0, 1], vec![1, 2]],
            vec![rat(1, 2), rat(1, 2)],
        );
        assert!(chain.is_connected());

        let split = StorageNetwork::new(
            4,
            vec![vec![0, 1], vec![2, 3]],
            vec![rat(1, 2), rat(1, 2)],
        );
        assert!(!split.is_connected());

        let single = StorageNetwork::new(1, vec![vec![0]], vec![rat(1, 1)]);
        assert!(single.is_connected());
    }

    #[test]
    fn shape_of_examples() {
        let net = pairs3_uniform();
        let s = shape_of(&Configuration(vec![2, 1, 0]), &net).unwrap();
        assert_eq!(s.scaled(), &[3, 0, -3]);
        assert_eq!(s.coords(), vec![rat(1, 1), rat(0, 1), rat(-1, 1)]);

        let s = shape_of(&Configuration(vec![5, 5, 5]), &net).unwrap();
        assert!(s.is_zero());

        let net2 = StorageNetwork::new(2, vec![vec![0, 1]], vec![rat(1, 1)]);
        let s = shape_of(&Configuration(vec![3, 0]), &net2).unwrap();
        assert_eq!(s.scaled(), &[3, -3]);
        assert_eq!(s.coords(), vec![rat(3, 2), rat(-3, 2)]);
    }

    #[test]
    fn shape_dimension_mismatch() {
        let net = pairs3_uniform();
        assert!(matches!(
            shape_of(&Configuration(vec![1, 2]), &net),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn magnitude_examples() {
        let net = pairs3_uniform();
        assert_eq!(
            shape_magnitude(&Configuration(vec![2, 1, 0]), &net).unwrap(),
            rat(2, 1)
        );
        assert_eq!(
            shape_magnitude(&Configuration(vec![7, 7, 7]), &net).unwrap(),
            Rat::zero()
        );
        let net2 = StorageNetwork::new(2, vec![vec![0, 1]], vec![rat(1, 1)]);
        assert_eq!(
            shape_magnitude(&Configuration(vec![3, 0]), &net2).unwrap(),
            rat(9, 2)
        );
    }

    #[test]
    fn network_json_round_trip_and_errors() {
        let text = r#"{"n":3,"neighborhoods":[[0,1],[0,2],[1,2]],"rates":["1/3","1/3","1/3"]}"#;
        let net = StorageNetwork::from_json_str(text).unwrap();
        assert!(net.validate().is_ok());
        assert_eq!(net.rate(0), &rat(1, 3));

        // Float rates are rejected with the offending field named.
        let bad = r#"{"n":2,"neighborhoods":[[0,1]],"rates":["0.5"]}"#;
        let err = StorageNetwork::from_json_str(bad).unwrap_err();
        assert!(err.to_string().contains("rates[0]"), "{err}");

        // Syntax errors carry line/column from the JSON parser.
        let err = StorageNetwork::from_json_str("{\"n\": 2,\n  \"oops\"").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    proptest! {
        #[test]
        fn shape_is_shift_invariant(
            loads in proptest::collection::vec(0u64..40, 3),
            c in 0u64..5
        ) {
            let net = pairs3_uniform();
            let x = Configuration(loads.clone());
            let shifted = Configuration(loads.iter().map(|&v| v + c).collect());
            prop_assert_eq!(
                shape_of(&x, &net).unwrap(),
                shape_of(&shifted, &net).unwrap()
            );
        }

        #[test]
        fn magnitude_zero_iff_balanced(loads in proptest::collection::vec(0u64..20, 3)) {
            let net = pairs3_uniform();
            let x = Configuration(loads.clone());
            let all_equal = loads.windows(2).all(|w| w[0] == w[1]);
            prop_assert_eq!(
                shape_magnitude(&x, &net).unwrap().is_zero(),
                all_equal
            );
        }

        #[test]
        fn unit_increment_moves_shape_by_n_minus_ones(
            loads in proptest::collection::vec(0u64..30, 3),
            node in 0usize..3
        ) {
            // shape(x + e_l).scaled = shape(x).scaled + n*e_l - 1, the
            // integer form of the mean moving up by 1/n per arrival.
            let net = pairs3_uniform();
            let x = Configuration(loads);
            let before = shape_of(&x, &net).unwrap();
            let after = shape_of(&x.bumped(node, 1), &net).unwrap();
            for l in 0..3 {
                let expected = before.scaled()[l] + if l == node { 3 } else { 0 } - 1;
                prop_assert_eq!(after.scaled()[l], expected);
            }
        }
    }
}
