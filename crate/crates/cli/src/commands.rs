//! Subcommand implementations, each returning a JSON payload plus optional
//! sidecar files and the process exit code.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value};

use shapestore_core::drift::{expected_drift_f, jsq_drift_closed_form, jump_bound_check};
use shapestore_core::drift::certificate_drift_check;
use shapestore_core::feasibility::{self, check_subset_condition, FeasibilityReport, Status};
use shapestore_core::net::{shape_magnitude, Configuration, StorageNetwork};
use shapestore_core::policy::{Policy, PolicySpec, ResolvedPolicy};
use shapestore_core::rng::CounterRng;
use shapestore_core::sim::{
    aggregate, default_c_grid, largest_stable_c, mgf_probe, run, RecurrenceDiagnostic, SimConfig,
    TrajectoryStats, VerdictThresholds,
};
use shapestore_core::{Error as CoreError, Rat};

use crate::jsonfmt::{f64_json, f64_text, opt_f64_json, opt_rat_json, rat_json, rats_json};
use crate::manifest::{sha256_hex, RunManifest};
use crate::CliError;

/// What a subcommand produced: the payload to print, sidecar files to write
/// under the output directory, and the exit code.
#[derive(Debug)]
pub struct CmdResult {
    pub payload: Value,
    pub files: Vec<(String, String)>,
    pub exit: i32,
}

impl CmdResult {
    fn ok(payload: Value) -> Self {
        CmdResult {
            payload,
            files: Vec::new(),
            exit: 0,
        }
    }
}

fn load_network(path: &Path) -> Result<(StorageNetwork, Vec<u8>), CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Usage(format!("{} is not UTF-8", path.display())))?;
    let net = StorageNetwork::from_json_str(&text).map_err(CliError::from)?;
    Ok((net, bytes))
}

pub fn parse_policy_spec(text: &str) -> Result<PolicySpec, CliError> {
    serde_json::from_str(text)
        .map_err(|e| CliError::Usage(format!("policy spec {text:?}: {e}")))
}

fn policy_parameters(spec: &PolicySpec, resolved: &ResolvedPolicy) -> Value {
    json!({
        "policy": serde_json::to_value(spec).expect("policy spec serializes"),
        "resolved_epsilon": opt_rat_json(resolved.resolved_epsilon.as_ref()),
        "degraded": resolved.degraded,
    })
}

fn allocation_json(report: &FeasibilityReport) -> Value {
    match &report.allocation {
        None => Value::Null,
        Some(alpha) => Value::Array(alpha.rows.iter().map(|row| rats_json(row)).collect()),
    }
}

fn certificate_json(report: &FeasibilityReport) -> Value {
    match &report.certificate {
        None => Value::Null,
        Some(cert) => json!({
            "b": rats_json(&cert.b),
            "proper": cert.proper,
            "min_vertex_product": rat_json(&cert.min_vertex_product),
            "vertices_checked": cert.vertices_checked,
        }),
    }
}

const DISCONNECTED_WARNING: &str = "network graph is disconnected: positive recurrence in shape \
                                    is impossible under any routing policy";

/// Full feasibility analysis of a network file.
pub fn cmd_analyze(net_path: &Path, timestamp: Option<String>) -> Result<CmdResult, CliError> {
    let (net, bytes) = load_network(net_path)?;
    let manifest = RunManifest::new(
        "analyze",
        &net_path.display().to_string(),
        &bytes,
        json!({}),
        timestamp,
    );
    if let Err(violations) = net.validate() {
        return Ok(CmdResult {
            payload: json!({
                "manifest": manifest.to_value(),
                "valid": false,
                "violations": violations,
            }),
            files: Vec::new(),
            exit: 1,
        });
    }
    let connected = net.is_connected();
    let report = feasibility::analyze(&net)?;
    let origin_in_ri_d = report.slack.as_ref().map(|s| s.is_positive());
    let payload = json!({
        "manifest": manifest.to_value(),
        "valid": true,
        "connected": connected,
        "warning": if connected { Value::Null } else { Value::String(DISCONNECTED_WARNING.into()) },
        "status": serde_json::to_value(report.status).expect("status serializes"),
        "slack": opt_rat_json(report.slack.as_ref()),
        "witness_subset": report.witness_subset,
        "erp_exists": report.erp_exists(),
        "serp_exists": report.serp_exists(),
        "origin_in_ri_d": origin_in_ri_d,
        "allocation": allocation_json(&report),
        "certificate": certificate_json(&report),
    });
    Ok(CmdResult::ok(payload))
}

/// Invariant check of a network file; exits non-zero on violations.
pub fn cmd_validate(net_path: &Path, timestamp: Option<String>) -> Result<CmdResult, CliError> {
    let (net, bytes) = load_network(net_path)?;
    let manifest = RunManifest::new(
        "validate",
        &net_path.display().to_string(),
        &bytes,
        json!({}),
        timestamp,
    );
    let (valid, violations) = match net.validate() {
        Ok(()) => (true, Vec::new()),
        Err(v) => (false, v),
    };
    let payload = json!({
        "manifest": manifest.to_value(),
        "valid": valid,
        "violations": violations,
        "connected": valid && net.is_connected(),
    });
    Ok(CmdResult {
        payload,
        files: Vec::new(),
        exit: if valid { 0 } else { 1 },
    })
}

/// Configurations to evaluate: explicit, or a seeded random sweep.
#[derive(Clone, Debug)]
pub enum DriftCases {
    Explicit(Vec<Vec<u64>>),
    Sweep { count: u32, seed: u64, max_load: u64 },
}

fn sweep_configurations(n: usize, count: u32, seed: u64, max_load: u64) -> Vec<Vec<u64>> {
    let rng = CounterRng::new(seed, 0);
    let mut ctr = 0u64;
    (0..count)
        .map(|_| {
            (0..n)
                .map(|_| {
                    ctr += 1;
                    rng.draw(ctr) % (max_load + 1)
                })
                .collect()
        })
        .collect()
}

/// Per-configuration drift records: oracle value, closed form when the
/// policy admits one, exact match flag, and the jump bound.
pub fn cmd_drift_check(
    net_path: &Path,
    policy_text: &str,
    cases: &DriftCases,
    timestamp: Option<String>,
) -> Result<CmdResult, CliError> {
    let (net, bytes) = load_network(net_path)?;
    if let Err(violations) = net.validate() {
        return Err(CliError::Usage(format!(
            "network is invalid: {}",
            violations.join("; ")
        )));
    }
    let spec = parse_policy_spec(policy_text)?;
    let resolved = spec.resolve(&net)?;
    let configurations = match cases {
        DriftCases::Explicit(list) => list.clone(),
        DriftCases::Sweep {
            count,
            seed,
            max_load,
        } => sweep_configurations(net.node_count(), *count, *seed, *max_load),
    };
    if configurations.is_empty() {
        return Err(CliError::Usage(
            "no configurations: pass --case or --sweep".into(),
        ));
    }
    let case_params = match cases {
        DriftCases::Explicit(list) => json!({ "cases": list.len() }),
        DriftCases::Sweep {
            count,
            seed,
            max_load,
        } => json!({ "sweep": count, "sweep_seed": seed, "max_load": max_load }),
    };
    let mut parameters = policy_parameters(&spec, &resolved);
    parameters["cases"] = case_params;
    let manifest = RunManifest::new(
        "drift-check",
        &net_path.display().to_string(),
        &bytes,
        parameters,
        timestamp,
    );

    let mut records = Vec::with_capacity(configurations.len());
    let mut all_match = true;
    let mut any_closed_form = false;
    for loads in &configurations {
        let x = Configuration(loads.clone());
        let report = expected_drift_f(&net, &resolved.policy, &x)?;
        // JSQ closed forms need the solver's allocation; the policy itself
        // does not carry one.
        let closed_form = match (&report.closed_form, &resolved.policy, &resolved.alpha) {
            (Some(cf), _, _) => Some(cf.clone()),
            (None, Policy::Jsq, Some(alpha)) => Some(jsq_drift_closed_form(&net, alpha, &x)?),
            _ => None,
        };
        let matches = closed_form.as_ref().map(|cf| cf == &report.expected_delta_f);
        if matches == Some(false) {
            all_match = false;
        }
        if closed_form.is_some() {
            any_closed_form = true;
        }
        let jump_bound_ok = if shape_magnitude(&x, &net)?.is_zero() {
            Value::Null
        } else {
            match jump_bound_check(&x, &net) {
                Ok(()) => Value::Bool(true),
                Err(CoreError::Internal(_)) => Value::Bool(false),
                Err(other) => return Err(other.into()),
            }
        };
        records.push(json!({
            "x": loads,
            "delta_f": rat_json(&report.expected_delta_f),
            "contributions": rats_json(&report.contributions),
            "closed_form": opt_rat_json(closed_form.as_ref()),
            "match": matches,
            "jump_bound_ok": jump_bound_ok,
        }));
    }
    let payload = json!({
        "manifest": manifest.to_value(),
        "policy_kind": resolved.policy.kind(),
        "degraded": resolved.degraded,
        "notices": resolved.notices,
        "oracle_only": !any_closed_form,
        "all_match": all_match,
        "cases": records,
    });
    Ok(CmdResult::ok(payload))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SimOverrides {
    pub seed: Option<u64>,
    pub replicas: Option<u32>,
    pub steps: Option<u64>,
}

#[derive(Deserialize)]
struct SimJobFile {
    net: Option<Value>,
    net_file: Option<String>,
    policy: PolicySpec,
    initial: Option<Vec<u64>>,
    max_steps: Option<u64>,
    replicas: Option<u32>,
    seed: Option<u64>,
    record_every: Option<u64>,
    tau_cutoff: Option<u64>,
    timestamps: Option<bool>,
    c_grid: Option<Vec<f64>>,
}

fn diagnostic_json(d: &RecurrenceDiagnostic) -> Value {
    json!({
        "verdict": serde_json::to_value(d.verdict).expect("verdict serializes"),
        "sqrt_magnitude_slope": f64_json(d.sqrt_magnitude_slope),
        "slope_ci": [f64_json(d.slope_ci_low), f64_json(d.slope_ci_high)],
        "tail_exponent": opt_f64_json(d.tail_exponent),
        "tail_r2": opt_f64_json(d.tail_r2),
        "mean_tau": opt_f64_json(d.mean_tau),
        "tau_count": d.tau_count,
        "censored_count": d.censored_count,
        "censoring_fraction": f64_json(d.censoring_fraction),
        "thresholds": {
            "transient_min_censoring": f64_json(d.thresholds.transient_min_censoring),
            "recurrent_max_censoring": f64_json(d.thresholds.recurrent_max_censoring),
            "tail_min_r2": f64_json(d.thresholds.tail_min_r2),
            "slope_ci_z": f64_json(d.thresholds.slope_ci_z),
        },
        "note": "finite-sample proxy: the verdict is consistency at these thresholds, not a proof",
    })
}

fn replica_json(s: &TrajectoryStats, n: usize) -> Value {
    let final_shape: Vec<Rat> = s
        .final_shape_scaled
        .iter()
        .map(|&d| Rat::new(d, n as i128).expect("n > 0"))
        .collect();
    json!({
        "replica_id": s.replica_id,
        "total_steps": s.total_steps,
        "tau_count": s.tau_samples.len(),
        "censored_count": s.censored_count,
        "final_shape": rats_json(&final_shape),
        "max_abs_shape_coord": rat_json(&s.max_abs_shape_coord),
        "first_return_step": s.first_return_step,
        "initial_shape_returns": s.initial_shape_returns,
        "stream_counts": s.stream_counts,
    })
}

fn magnitude_csv(stats: &[TrajectoryStats], manifest_digest: &str, timestamps: bool) -> String {
    let mut out = String::new();
    out.push_str(&format!("# manifest_sha256={manifest_digest}\n"));
    out.push_str(if timestamps {
        "replica,step,magnitude,time\n"
    } else {
        "replica,step,magnitude\n"
    });
    for s in stats {
        for point in &s.magnitude_series {
            match point.time {
                Some(t) if timestamps => out.push_str(&format!(
                    "{},{},{},{}\n",
                    s.replica_id,
                    point.step,
                    f64_text(point.magnitude),
                    f64_text(t)
                )),
                _ => out.push_str(&format!(
                    "{},{},{}\n",
                    s.replica_id,
                    point.step,
                    f64_text(point.magnitude)
                )),
            }
        }
    }
    out
}

/// Runs the Monte Carlo engine from a simulation config file: stats JSON on
/// stdout, magnitude CSV as a sidecar. Scientific verdicts always exit 0.
pub fn cmd_simulate(
    config_path: &Path,
    overrides: &SimOverrides,
    timestamp: Option<String>,
) -> Result<CmdResult, CliError> {
    let config_bytes = fs::read(config_path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", config_path.display())))?;
    let job: SimJobFile = serde_json::from_slice(&config_bytes)
        .map_err(|e| CliError::Usage(format!("{}: {e}", config_path.display())))?;

    let (net, net_sha) = match (&job.net, &job.net_file) {
        (Some(inline), None) => {
            let text = inline.to_string();
            let net = StorageNetwork::from_json_str(&text)?;
            (net, sha256_hex(text.as_bytes()))
        }
        (None, Some(rel)) => {
            let base = config_path.parent().unwrap_or_else(|| Path::new("."));
            let (net, bytes) = load_network(&base.join(rel))?;
            (net, sha256_hex(&bytes))
        }
        _ => {
            return Err(CliError::Usage(
                "config must set exactly one of \"net\" or \"net_file\"".into(),
            ))
        }
    };
    if let Err(violations) = net.validate() {
        return Err(CliError::Usage(format!(
            "network is invalid: {}",
            violations.join("; ")
        )));
    }

    let max_steps = overrides.steps.or(job.max_steps).unwrap_or(100_000);
    let cfg = SimConfig {
        max_steps,
        replicas: overrides.replicas.or(job.replicas).unwrap_or(8),
        seed: overrides.seed.or(job.seed).unwrap_or(0),
        record_every: job.record_every.unwrap_or_else(|| (max_steps / 1000).max(1)),
        tau_cutoff: job.tau_cutoff.unwrap_or(max_steps),
        initial: job
            .initial
            .clone()
            .unwrap_or_else(|| vec![0; net.node_count()]),
        timestamps: job.timestamps.unwrap_or(false),
    };
    cfg.validate(&net)?;
    let c_grid = job.c_grid.clone().unwrap_or_else(default_c_grid);
    let resolved = job.policy.resolve(&net)?;
    let thresholds = VerdictThresholds::default();

    let mut parameters = policy_parameters(&job.policy, &resolved);
    parameters["sim"] = serde_json::to_value(&cfg).expect("sim config serializes");
    parameters["net_sha256"] = Value::String(net_sha);
    parameters["c_grid"] = Value::Array(c_grid.iter().map(|&c| f64_json(c)).collect());
    parameters["thresholds"] =
        serde_json::to_value(thresholds).expect("thresholds serialize");
    let manifest = RunManifest::new(
        "simulate",
        &config_path.display().to_string(),
        &config_bytes,
        parameters,
        timestamp,
    );

    let stats = run(&net, &resolved.policy, &cfg)?;
    let diagnostic = aggregate(&stats, cfg.tau_cutoff, &thresholds);
    let mut tau_pool: Vec<u64> = Vec::new();
    for s in &stats {
        tau_pool.extend(&s.tau_samples);
    }
    let mut histogram: BTreeMap<u64, u64> = BTreeMap::new();
    for &t in &tau_pool {
        *histogram.entry(t).or_insert(0) += 1;
    }
    let mgf = mgf_probe(&tau_pool, &c_grid);
    let digest = manifest.digest();
    let csv = magnitude_csv(&stats, &digest, cfg.timestamps);

    let payload = json!({
        "manifest": manifest.to_value(),
        "policy_kind": resolved.policy.kind(),
        "degraded": resolved.degraded,
        "notices": resolved.notices,
        "diagnostic": diagnostic_json(&diagnostic),
        "tau_histogram": histogram
            .iter()
            .map(|(t, c)| (t.to_string(), Value::from(*c)))
            .collect::<serde_json::Map<String, Value>>(),
        "mgf": mgf.iter().map(|row| json!({
            "c": f64_json(row.c),
            "mgf": f64_json(row.mgf),
            "half_sample_mgf": f64_json(row.half_sample_mgf),
            "stable": row.stable,
        })).collect::<Vec<_>>(),
        "largest_stable_c": opt_f64_json(largest_stable_c(&mgf)),
        "mgf_censoring_note": format!(
            "{} windows censored at cutoff {}; censored mass is absent from the empirical MGF, which therefore underestimates heavy tails",
            diagnostic.censored_count, cfg.tau_cutoff
        ),
        "replicas": stats.iter().map(|s| replica_json(s, net.node_count())).collect::<Vec<_>>(),
        "csv_file": "magnitude.csv",
    });
    Ok(CmdResult {
        payload,
        files: vec![("magnitude.csv".into(), csv)],
        exit: 0,
    })
}

/// Emits the transience certificate and verifies its drift inequality on
/// sampled states under the given policy. Positive instances are an error.
pub fn cmd_certify(
    net_path: &Path,
    policy_text: &str,
    samples: u32,
    sample_seed: u64,
    max_load: u64,
    timestamp: Option<String>,
) -> Result<CmdResult, CliError> {
    let (net, bytes) = load_network(net_path)?;
    if let Err(violations) = net.validate() {
        return Err(CliError::Usage(format!(
            "network is invalid: {}",
            violations.join("; ")
        )));
    }
    let cond = check_subset_condition(&net)?;
    if cond.slack.is_positive() {
        return Err(CliError::Usage(
            "no certificate: positive solution exists".into(),
        ));
    }
    let certificate = feasibility::separating_functional(&net)?;
    let spec = parse_policy_spec(policy_text)?;
    let resolved = spec.resolve(&net)?;

    let mut parameters = policy_parameters(&spec, &resolved);
    parameters["samples"] = json!(samples);
    parameters["sample_seed"] = json!(sample_seed);
    parameters["max_load"] = json!(max_load);
    let manifest = RunManifest::new(
        "certify",
        &net_path.display().to_string(),
        &bytes,
        parameters,
        timestamp,
    );

    let status = if cond.slack.is_zero() {
        Status::NonnegOnly
    } else {
        Status::Infeasible
    };
    let configurations = sweep_configurations(net.node_count(), samples, sample_seed, max_load);
    let mut sample_records = Vec::with_capacity(configurations.len());
    let mut min_value: Option<Rat> = None;
    for loads in &configurations {
        let x = Configuration(loads.clone());
        let value = certificate_drift_check(&net, &resolved.policy, &x, &certificate.b)?;
        min_value = Some(match min_value {
            None => value.clone(),
            Some(cur) => cur.min(value.clone()),
        });
        sample_records.push(json!({
            "x": loads,
            "drift_value": rat_json(&value),
        }));
    }
    let payload = json!({
        "manifest": manifest.to_value(),
        "status": serde_json::to_value(status).expect("status serializes"),
        "slack": rat_json(&cond.slack),
        "witness_subset": cond.witness,
        "b": rats_json(&certificate.b),
        "proper": certificate.proper,
        "min_vertex_product": rat_json(&certificate.min_vertex_product),
        "vertices_checked": certificate.vertices_checked,
        "policy_kind": resolved.policy.kind(),
        "degraded": resolved.degraded,
        "notices": resolved.notices,
        "samples": sample_records,
        "min_drift_value": opt_rat_json(min_value.as_ref()),
    });
    Ok(CmdResult::ok(payload))
}
