//! Python bindings: the main types and operations, in-process.
//!
//! Exact quantities cross the boundary as `"p/q"` strings; composite results
//! (feasibility reports, drift records, simulation diagnostics) come back as
//! JSON strings for `json.loads`. Usage from Python:
//!
//!     import shapestore_py as ss
//!     net = ss.Network(3, [[0,1],[0,2],[1,2]], ["1/3","1/3","1/3"])
//!     report = json.loads(net.analyze_json())
//!     policy = ss.Policy.from_spec(net, '{"policy":"jsq"}')
//!     stats = json.loads(ss.simulate_json(net, policy, 10_000, 8, 0))

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::json;

use shapestore_core::drift;
use shapestore_core::feasibility;
use shapestore_core::net::{Configuration, StorageNetwork};
use shapestore_core::policy::{self, PolicySpec};
use shapestore_core::rational::Rat;
use shapestore_core::sim;
use shapestore_core::Error as CoreError;

fn to_py_err(e: CoreError) -> PyErr {
    if e.is_internal() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn rat_strings(values: &[Rat]) -> Vec<String> {
    values.iter().map(Rat::to_string).collect()
}

/// A storage network: nodes, neighborhoods, exact rational rates.
#[pyclass]
struct Network {
    inner: StorageNetwork,
}

#[pymethods]
impl Network {
    #[new]
    fn new(n: usize, neighborhoods: Vec<Vec<usize>>, rates: Vec<String>) -> PyResult<Self> {
        let rates = rates
            .iter()
            .map(|r| r.parse::<Rat>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(to_py_err)?;
        Ok(Network {
            inner: StorageNetwork::new(n, neighborhoods, rates),
        })
    }

    /// Parse the JSON network definition format.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Network {
            inner: StorageNetwork::from_json_str(text).map_err(to_py_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_value().to_string()
    }

    /// Model-invariant violations; an empty list means the network is valid.
    fn validate(&self) -> Vec<String> {
        match self.inner.validate() {
            Ok(()) => Vec::new(),
            Err(violations) => violations,
        }
    }

    fn is_connected(&self) -> bool {
        self.inner.is_connected()
    }

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn stream_count(&self) -> usize {
        self.inner.stream_count()
    }

    /// Centered load vector scaled by n (exact integers).
    fn shape_of(&self, loads: Vec<u64>) -> PyResult<Vec<i128>> {
        let shape =
            shapestore_core::shape_of(&Configuration(loads), &self.inner).map_err(to_py_err)?;
        Ok(shape.scaled().to_vec())
    }

    /// Shape magnitude as an exact rational string.
    fn shape_magnitude(&self, loads: Vec<u64>) -> PyResult<String> {
        let m = shapestore_core::shape_magnitude(&Configuration(loads), &self.inner)
            .map_err(to_py_err)?;
        Ok(m.to_string())
    }

    /// Minimum subset slack and its witness collection.
    fn subset_slack(&self) -> PyResult<(String, Vec<usize>)> {
        let cond = feasibility::check_subset_condition(&self.inner).map_err(to_py_err)?;
        Ok((cond.slack.to_string(), cond.witness))
    }

    fn origin_in_ri_d(&self) -> PyResult<bool> {
        feasibility::origin_in_ri_d(&self.inner).map_err(to_py_err)
    }

    /// Full feasibility report (status, slack, allocation, certificate) as JSON.
    fn analyze_json(&self) -> PyResult<String> {
        let report = feasibility::analyze(&self.inner).map_err(to_py_err)?;
        serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// Vertices of the decision polytope as rational-string vectors.
    fn polytope_vertices(&self) -> PyResult<Vec<Vec<String>>> {
        let vertices = feasibility::polytope_vertices(&self.inner).map_err(to_py_err)?;
        Ok(vertices.iter().map(|v| rat_strings(v)).collect())
    }

    /// The separating functional `b` (requires a non-positive instance).
    fn separating_functional(&self) -> PyResult<Vec<String>> {
        let cert = feasibility::separating_functional(&self.inner).map_err(to_py_err)?;
        Ok(rat_strings(&cert.b))
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(n={}, streams={})",
            self.inner.node_count(),
            self.inner.stream_count()
        )
    }
}

/// A routing policy bound to a network.
#[pyclass]
struct Policy {
    inner: policy::Policy,
    notices: Vec<String>,
    degraded: bool,
}

#[pymethods]
impl Policy {
    /// Join the shortest queue.
    #[staticmethod]
    fn jsq() -> Self {
        Policy {
            inner: policy::Policy::jsq(),
            notices: Vec::new(),
            degraded: false,
        }
    }

    /// Resolve a policy spec (same JSON as config files) against a network.
    #[staticmethod]
    fn from_spec(net: &Network, spec_json: &str) -> PyResult<Self> {
        let spec: PolicySpec = serde_json::from_str(spec_json)
            .map_err(|e| PyValueError::new_err(format!("policy spec: {e}")))?;
        let resolved = spec.resolve(&net.inner).map_err(to_py_err)?;
        Ok(Policy {
            inner: resolved.policy,
            notices: resolved.notices,
            degraded: resolved.degraded,
        })
    }

    /// Deterministic random table policy.
    #[staticmethod]
    fn random(net: &Network, seed: u64) -> Self {
        Policy {
            inner: policy::random_policy(&net.inner, seed),
            notices: Vec::new(),
            degraded: false,
        }
    }

    fn kind(&self) -> String {
        self.inner.kind().to_owned()
    }

    fn notices(&self) -> Vec<String> {
        self.notices.clone()
    }

    fn degraded(&self) -> bool {
        self.degraded
    }

    /// Decision rows at a configuration, as rational strings.
    fn decide(&self, net: &Network, loads: Vec<u64>) -> PyResult<Vec<Vec<String>>> {
        let decision =
            policy::decide(&self.inner, &net.inner, &Configuration(loads)).map_err(to_py_err)?;
        Ok(decision.rows.iter().map(|row| rat_strings(row)).collect())
    }

    fn __repr__(&self) -> String {
        format!("Policy({})", self.inner.kind())
    }
}

/// First node of the neighborhood attaining the minimum load.
#[pyfunction]
fn argmin_node(loads: Vec<u64>, neighborhood: Vec<usize>) -> usize {
    policy::argmin_node(&Configuration(loads), &neighborhood)
}

/// Last node of the neighborhood attaining the maximum load.
#[pyfunction]
fn argmax_node(loads: Vec<u64>, neighborhood: Vec<usize>) -> usize {
    policy::argmax_node(&Configuration(loads), &neighborhood)
}

/// One-step drift record at a configuration: oracle value, closed form when
/// available, per-neighborhood contributions. JSON string.
#[pyfunction]
fn drift_report_json(net: &Network, policy: &Policy, loads: Vec<u64>) -> PyResult<String> {
    let x = Configuration(loads);
    let report = drift::expected_drift_f(&net.inner, &policy.inner, &x).map_err(to_py_err)?;
    let jump_ok = match shapestore_core::shape_magnitude(&x, &net.inner) {
        Ok(m) if m.is_zero() => None,
        Ok(_) => Some(drift::jump_bound_check(&x, &net.inner).is_ok()),
        Err(e) => return Err(to_py_err(e)),
    };
    Ok(json!({
        "delta_f": report.expected_delta_f.to_string(),
        "contributions": rat_strings(&report.contributions),
        "closed_form": report.closed_form.as_ref().map(Rat::to_string),
        "match": report.matches,
        "jump_bound_ok": jump_ok,
    })
    .to_string())
}

/// Drift of sqrt(magnitude) with its concavity bound (interval midpoints).
#[pyfunction]
fn drift_g_json(net: &Network, policy: &Policy, loads: Vec<u64>) -> PyResult<String> {
    let report = drift::expected_drift_g(&net.inner, &policy.inner, &Configuration(loads))
        .map_err(to_py_err)?;
    Ok(json!({
        "drift_g": report.drift_mid(),
        "bound": report.bound_mid(),
        "max_jump": report.max_jump_hi.to_f64(),
    })
    .to_string())
}

/// Certificate drift `<F(E(p)), b>` at a configuration (exact string).
#[pyfunction]
fn certificate_drift(
    net: &Network,
    policy: &Policy,
    loads: Vec<u64>,
    b: Vec<String>,
) -> PyResult<String> {
    let b = b
        .iter()
        .map(|s| s.parse::<Rat>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py_err)?;
    let value = drift::certificate_drift_check(&net.inner, &policy.inner, &Configuration(loads), &b)
        .map_err(to_py_err)?;
    Ok(value.to_string())
}

/// Monte Carlo run: replicas of the embedded chain plus the pooled
/// recurrence diagnostic, tau histogram, and MGF probe. JSON string.
#[pyfunction]
#[pyo3(signature = (net, policy, max_steps, replicas, seed, tau_cutoff=None, record_every=None, initial=None))]
#[allow(clippy::too_many_arguments)]
fn simulate_json(
    net: &Network,
    policy: &Policy,
    max_steps: u64,
    replicas: u32,
    seed: u64,
    tau_cutoff: Option<u64>,
    record_every: Option<u64>,
    initial: Option<Vec<u64>>,
) -> PyResult<String> {
    let cfg = sim::SimConfig {
        max_steps,
        replicas,
        seed,
        record_every: record_every.unwrap_or_else(|| (max_steps / 1000).max(1)),
        tau_cutoff: tau_cutoff.unwrap_or(max_steps),
        initial: initial.unwrap_or_else(|| vec![0; net.inner.node_count()]),
        timestamps: false,
    };
    cfg.validate(&net.inner).map_err(to_py_err)?;
    let stats = sim::run(&net.inner, &policy.inner, &cfg).map_err(to_py_err)?;
    let diagnostic = sim::aggregate(&stats, cfg.tau_cutoff, &sim::VerdictThresholds::default());
    let mut tau_pool: Vec<u64> = Vec::new();
    for s in &stats {
        tau_pool.extend(&s.tau_samples);
    }
    let mut histogram = std::collections::BTreeMap::<u64, u64>::new();
    for &t in &tau_pool {
        *histogram.entry(t).or_insert(0) += 1;
    }
    let mgf = sim::mgf_probe(&tau_pool, &sim::default_c_grid());
    let n = net.inner.node_count();
    let replicas_json: Vec<_> = stats
        .iter()
        .map(|s| {
            let shape: Vec<String> = s
                .final_shape_scaled
                .iter()
                .map(|&d| Rat::new(d, n as i128).expect("n > 0").to_string())
                .collect();
            json!({
                "replica_id": s.replica_id,
                "tau_count": s.tau_samples.len(),
                "censored_count": s.censored_count,
                "final_loads": s.final_loads,
                "final_shape": shape,
                "max_abs_shape_coord": s.max_abs_shape_coord.to_string(),
                "first_return_step": s.first_return_step,
                "stream_counts": s.stream_counts,
            })
        })
        .collect();
    Ok(json!({
        "diagnostic": diagnostic,
        "tau_histogram": histogram
            .iter()
            .map(|(t, c)| (t.to_string(), serde_json::Value::from(*c)))
            .collect::<serde_json::Map<_, _>>(),
        "mgf": mgf,
        "largest_stable_c": sim::largest_stable_c(&mgf),
        "mgf_censoring_note": format!(
            "{} windows censored at cutoff {}; censored mass is absent from the empirical MGF",
            diagnostic.censored_count, cfg.tau_cutoff
        ),
        "replicas": replicas_json,
    })
    .to_string())
}

#[pymodule]
fn shapestore_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Network>()?;
    m.add_class::<Policy>()?;
    m.add_function(wrap_pyfunction!(argmin_node, m)?)?;
    m.add_function(wrap_pyfunction!(argmax_node, m)?)?;
    m.add_function(wrap_pyfunction!(drift_report_json, m)?)?;
    m.add_function(wrap_pyfunction!(drift_g_json, m)?)?;
    m.add_function(wrap_pyfunction!(certificate_drift, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_json, m)?)?;
    Ok(())
}
