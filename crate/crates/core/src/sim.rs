//! Monte Carlo simulation of the embedded arrival chain.
//!
//! The simulator advances the configuration one arrival at a time: sample the
//! neighborhood by its rate, sample the node from the policy's decision row,
//! add one item. Replicas are keyed by `(seed, replica_id)` through the
//! counter RNG, so runs are bit-reproducible regardless of scheduling, and
//! running the same seed from `x` and from `x + c*1` produces the identical
//! arrival sequence.
//!
//! Exact rational probabilities enter the hot path as cumulative thresholds
//! rounded to nearest once against a full 64-bit draw (bias at most 2^-64 per
//! decision). Return times to the zero shape are collected window by window:
//! a window opens at a zero-shape moment and either closes at the next return
//! (one tau sample, always a multiple of n) or censors at `tau_cutoff`.
//!
//! The continuous-time process is statistically identical to the embedded
//! chain up to the arrival clock; an optional wrapper draws unit-rate
//! exponential interarrival times from an independent stream purely for
//! timestamped output.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::feasibility::AllocationMatrix;
use crate::net::{Configuration, StorageNetwork};
use crate::policy::{argmax_pos, argmin_pos, Policy, TablePolicy};
use crate::rational::Rat;
use crate::rng::CounterRng;
use crate::Error;

/// Numeric simulation parameters (network and policy travel separately).
#[derive(Clone, Debug, Serialize)]
pub struct SimConfig {
    pub max_steps: u64,
    pub replicas: u32,
    pub seed: u64,
    pub record_every: u64,
    pub tau_cutoff: u64,
    pub initial: Vec<u64>,
    pub timestamps: bool,
}

impl SimConfig {
    pub fn defaults(net: &StorageNetwork) -> Self {
        SimConfig {
            max_steps: 100_000,
            replicas: 8,
            seed: 0,
            record_every: 100,
            tau_cutoff: 100_000,
            initial: vec![0; net.node_count()],
            timestamps: false,
        }
    }

    pub fn validate(&self, net: &StorageNetwork) -> Result<(), Error> {
        if self.max_steps < 1 || self.replicas < 1 || self.record_every < 1 {
            return Err(Error::Precondition(
                "max_steps, replicas, and record_every must all be >= 1".into(),
            ));
        }
        if self.initial.len() != net.node_count() {
            return Err(Error::DimensionMismatch {
                expected: net.node_count(),
                got: self.initial.len(),
            });
        }
        Ok(())
    }
}

/// Rounds a cumulative probability to a 64-bit threshold (round to nearest).
fn threshold(cum: &Rat) -> u128 {
    use num::bigint::BigInt;
    use num::ToPrimitive;
    let scaled: BigInt = (cum.numer() << 64) + cum.denom() / BigInt::from(2);
    (scaled / cum.denom()).to_u128().expect("cumulative in [0,1]")
}

fn thresholds_of_row(row: &[Rat]) -> Vec<u128> {
    let mut acc = Rat::zero();
    row.iter()
        .map(|p| {
            acc += p;
            threshold(&acc)
        })
        .collect()
}

fn pick(thresholds: &[u128], draw: u64) -> usize {
    let u = draw as u128;
    thresholds
        .iter()
        .position(|&t| u < t)
        .unwrap_or(thresholds.len() - 1)
}

/// Pre-compiled sampling form of a policy. Decision rows are converted to
/// threshold vectors once per distinct local situation and memoized, so the
/// per-step work is integer-only.
pub struct Sampler<'a> {
    net: &'a StorageNetwork,
    stream_thresholds: Vec<u128>,
    kind: SamplerKind,
}

enum SamplerKind {
    Jsq,
    Fixed {
        rows: Vec<Vec<u128>>,
    },
    Pserp {
        alpha: AllocationMatrix,
        epsilon: Rat,
        memo: HashMap<(usize, usize, usize), Vec<u128>>,
    },
    Table {
        table: TablePolicy,
        memo: HashMap<(usize, Vec<i64>), Vec<u128>>,
    },
}

impl<'a> Sampler<'a> {
    pub fn new(net: &'a StorageNetwork, policy: &Policy) -> Result<Self, Error> {
        let stream_thresholds = thresholds_of_row(net.rates());
        let kind = match policy {
            Policy::Jsq => SamplerKind::Jsq,
            Policy::Equilibrium { alpha, .. } => SamplerKind::Fixed {
                rows: alpha
                    .rows
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        let probs: Vec<Rat> =
                            row.iter().map(|a| a / net.rate(i)).collect();
                        thresholds_of_row(&probs)
                    })
                    .collect(),
            },
            Policy::Pserp { alpha, epsilon } => SamplerKind::Pserp {
                alpha: alpha.clone(),
                epsilon: epsilon.clone(),
                memo: HashMap::new(),
            },
            Policy::Table(table) => SamplerKind::Table {
                table: table.clone(),
                memo: HashMap::new(),
            },
        };
        Ok(Sampler {
            net,
            stream_thresholds,
            kind,
        })
    }

    /// Samples the arrival neighborhood from the rate distribution.
    pub fn sample_stream(&self, draw: u64) -> usize {
        pick(&self.stream_thresholds, draw)
    }

    /// Samples the target node for an arrival at neighborhood `i`.
    pub fn sample_node(&mut self, i: usize, loads: &[u64], draw: u64) -> usize {
        let net = self.net;
        let s = net.neighborhood(i);
        match &mut self.kind {
            SamplerKind::Jsq => s[argmin_pos(loads, s)],
            SamplerKind::Fixed { rows } => s[pick(&rows[i], draw)],
            SamplerKind::Pserp {
                alpha,
                epsilon,
                memo,
            } => {
                if s.len() == 1 {
                    return s[0];
                }
                let jmin = argmin_pos(loads, s);
                let jmax = argmax_pos(loads, s);
                let rate = net.rate(i);
                let row = memo.entry((i, jmin, jmax)).or_insert_with(|| {
                    let mut probs: Vec<Rat> =
                        alpha.rows[i].iter().map(|a| a / rate).collect();
                    let shift = &*epsilon / rate;
                    probs[jmin] += &shift;
                    probs[jmax] -= &shift;
                    thresholds_of_row(&probs)
                });
                s[pick(row, draw)]
            }
            SamplerKind::Table { table, memo } => {
                let key = table.key(net, i, loads);
                let kappa = s.len();
                let row = memo
                    .entry((i, key.clone()))
                    .or_insert_with(|| thresholds_of_row(&table.row_for_key(i, &key, kappa)));
                s[pick(row, draw)]
            }
        }
    }
}

/// One embedded-chain transition: returns the sampled neighborhood and node
/// and pushes the arrival into `loads`. Step `m` consumes draws `2m` and
/// `2m + 1` of the replica stream.
pub fn step(
    sampler: &mut Sampler<'_>,
    loads: &mut [u64],
    rng: &CounterRng,
    step_index: u64,
) -> (usize, usize) {
    let stream = sampler.sample_stream(rng.draw(2 * step_index));
    let node = sampler.sample_node(stream, loads, rng.draw(2 * step_index + 1));
    loads[node] += 1;
    (stream, node)
}

/// Convenience single-step form of the public contract: sample a transition
/// of `policy` from configuration `x`.
pub fn step_once(
    net: &StorageNetwork,
    policy: &Policy,
    x: &Configuration,
    rng: &CounterRng,
    step_index: u64,
) -> Result<(Configuration, usize, usize), Error> {
    if x.len() != net.node_count() {
        return Err(Error::DimensionMismatch {
            expected: net.node_count(),
            got: x.len(),
        });
    }
    let mut sampler = Sampler::new(net, policy)?;
    let mut loads = x.loads().to_vec();
    let (stream, node) = step(&mut sampler, &mut loads, rng, step_index);
    Ok((Configuration(loads), stream, node))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MagnitudePoint {
    pub step: u64,
    pub magnitude: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
}

/// Everything one replica produced.
#[derive(Clone, Debug)]
pub struct TrajectoryStats {
    pub replica_id: u32,
    pub total_steps: u64,
    /// Completed zero-to-zero return times; each is a multiple of `n`.
    pub tau_samples: Vec<u64>,
    /// Return windows that reached `tau_cutoff` without closing.
    pub censored_count: u64,
    pub magnitude_series: Vec<MagnitudePoint>,
    pub final_loads: Vec<u64>,
    pub final_shape_scaled: Vec<i128>,
    /// Running maximum of `max_l |x_l - mean|` over the trajectory.
    pub max_abs_shape_coord: Rat,
    /// First step at which the shape reached zero when the run started away
    /// from it (not a tau sample; the window clock starts at zero moments).
    pub first_return_step: Option<u64>,
    /// Secondary counter: visits to the *initial* shape.
    pub initial_shape_returns: u64,
    /// Arrivals per neighborhood.
    pub stream_counts: Vec<u64>,
}

fn scaled_shape(loads: &[u64]) -> Vec<i128> {
    let n = loads.len() as i128;
    let total: i128 = loads.iter().map(|&v| v as i128).sum();
    loads.iter().map(|&v| n * v as i128 - total).collect()
}

/// Runs one replica for `cfg.max_steps` arrivals. Deterministic in
/// `(cfg.seed, replica_id)`.
pub fn run_replica(
    net: &StorageNetwork,
    policy: &Policy,
    cfg: &SimConfig,
    replica_id: u32,
) -> Result<TrajectoryStats, Error> {
    if cfg.initial.len() != net.node_count() {
        return Err(Error::DimensionMismatch {
            expected: net.node_count(),
            got: cfg.initial.len(),
        });
    }
    let n = net.node_count();
    let mut loads = cfg.initial.clone();
    let mut sampler = Sampler::new(net, policy)?;
    let rng = CounterRng::new(cfg.seed, replica_id as u64);
    // Independent stream for the optional continuous-time clock so that
    // timestamping never perturbs the embedded chain.
    let clock_rng = CounterRng::new(cfg.seed, (replica_id as u64) | (1 << 32));
    let mut clock = 0.0f64;

    let initial_balanced = loads.iter().all(|&v| v == loads[0]);
    // A measurement window is always open. Only windows that started at a
    // zero-shape moment yield tau samples; windows restarted after a censor
    // event count further censors but never emit samples.
    let mut window_start: u64 = 0;
    let mut window_from_zero = initial_balanced;
    let mut tau_samples = Vec::new();
    let mut censored_count = 0u64;
    let mut first_return_step = None;
    let mut initial_shape_returns = 0u64;
    let mut magnitude_series = Vec::new();
    let mut stream_counts = vec![0u64; net.stream_count()];
    let mut max_abs_scaled: i128 = scaled_shape(&loads).iter().map(|d| d.abs()).max().unwrap_or(0);

    for m in 1..=cfg.max_steps {
        let (stream, _node) = step(&mut sampler, &mut loads, &rng, m - 1);
        stream_counts[stream] += 1;
        if cfg.timestamps {
            // Unit-rate exponential interarrival (total rate is 1).
            let u = ((clock_rng.draw(m - 1) >> 11) as f64 + 1.0) * (1.0 / 9007199254740992.0);
            clock -= u.ln();
        }

        let total: i128 = loads.iter().map(|&v| v as i128).sum();
        let mut max_d = i128::MIN;
        let mut sum_sq = 0i128;
        let mut balanced = true;
        for &v in &loads {
            let d = (n as i128) * (v as i128) - total;
            if d != 0 {
                balanced = false;
            }
            max_d = max_d.max(d.abs());
            sum_sq += d * d;
        }
        max_abs_scaled = max_abs_scaled.max(max_d);

        if balanced {
            if window_from_zero {
                tau_samples.push(m - window_start);
            }
            if first_return_step.is_none() && !initial_balanced {
                first_return_step = Some(m);
            }
            window_start = m;
            window_from_zero = true;
        } else if m - window_start >= cfg.tau_cutoff {
            censored_count += 1;
            window_start = m;
            window_from_zero = false;
        }

        // Visits to the initial shape: load increments equal across nodes.
        let diff0 = loads[0] - cfg.initial[0];
        if loads
            .iter()
            .zip(&cfg.initial)
            .all(|(&v, &v0)| v - v0 == diff0)
        {
            initial_shape_returns += 1;
        }

        if m % cfg.record_every == 0 {
            let magnitude = sum_sq as f64 / (n as f64 * n as f64);
            magnitude_series.push(MagnitudePoint {
                step: m,
                magnitude,
                time: cfg.timestamps.then_some(clock),
            });
        }
    }

    Ok(TrajectoryStats {
        replica_id,
        total_steps: cfg.max_steps,
        tau_samples,
        censored_count,
        magnitude_series,
        final_shape_scaled: scaled_shape(&loads),
        final_loads: loads,
        max_abs_shape_coord: Rat::new(max_abs_scaled, n as i128)?,
        first_return_step,
        initial_shape_returns,
        stream_counts,
    })
}

/// Runs all replicas (in parallel; output is independent of worker count).
pub fn run(
    net: &StorageNetwork,
    policy: &Policy,
    cfg: &SimConfig,
) -> Result<Vec<TrajectoryStats>, Error> {
    (0..cfg.replicas)
        .into_par_iter()
        .map(|r| run_replica(net, policy, cfg, r))
        .collect()
}

/// Finite-sample verdict thresholds; engineering constants, echoed in every
/// diagnostic so consumers can re-judge.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct VerdictThresholds {
    /// Censoring fraction above which a positive slope reads as transience.
    pub transient_min_censoring: f64,
    /// Censoring fraction below which recurrence becomes plausible.
    pub recurrent_max_censoring: f64,
    /// Minimum R^2 of the log-survival fit for a recurrent verdict.
    pub tail_min_r2: f64,
    /// Normal quantile for the slope confidence interval.
    pub slope_ci_z: f64,
}

impl Default for VerdictThresholds {
    fn default() -> Self {
        VerdictThresholds {
            transient_min_censoring: 0.5,
            recurrent_max_censoring: 0.01,
            tail_min_r2: 0.9,
            slope_ci_z: 1.96,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "POSITIVE_RECURRENT_CONSISTENT")]
    PositiveRecurrentConsistent,
    #[serde(rename = "TRANSIENT_CONSISTENT")]
    TransientConsistent,
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive,
}

/// Pooled recurrence diagnostic. The verdict is a finite-sample consistency
/// statement, never a proof; boundary (null-recurrent-style) cases are
/// expected to land in `INCONCLUSIVE`.
#[derive(Clone, Debug, Serialize)]
pub struct RecurrenceDiagnostic {
    pub verdict: Verdict,
    /// Mean per-replica least-squares slope of `sqrt(magnitude)` vs step.
    pub sqrt_magnitude_slope: f64,
    pub slope_ci_low: f64,
    pub slope_ci_high: f64,
    /// Fitted `c` in `P(tau > t) ~ A exp(-c t)`, with its fit quality.
    pub tail_exponent: Option<f64>,
    pub tail_r2: Option<f64>,
    /// Censored-adjusted mean return time:
    /// `(sum tau + censored * cutoff) / (count + censored)`.
    pub mean_tau: Option<f64>,
    pub tau_count: usize,
    pub censored_count: u64,
    pub censoring_fraction: f64,
    pub thresholds: VerdictThresholds,
}

fn ols_slope(points: impl Iterator<Item = (f64, f64)> + Clone) -> Option<f64> {
    let n = points.clone().count();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mean_x = points.clone().map(|(x, _)| x).sum::<f64>() / nf;
    let mean_y = points.clone().map(|(_, y)| y).sum::<f64>() / nf;
    let sxx: f64 = points.clone().map(|(x, _)| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    Some(sxy / sxx)
}

fn ols_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let slope = ols_slope(points.iter().copied())?;
    let n = points.len() as f64;
    let mean_x = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let ss_tot: f64 = points.iter().map(|(_, y)| (y - mean_y).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|(x, y)| {
            let fitted = mean_y + slope * (x - mean_x);
            (y - fitted).powi(2)
        })
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some((slope, r2))
}

/// Slope with its regression standard error; needs at least three points.
fn ols_fit_with_se(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 3 {
        return None;
    }
    let slope = ols_slope(points.iter().copied())?;
    let n = points.len() as f64;
    let mean_x = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|(x, _)| (x - mean_x).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|(x, y)| {
            let fitted = mean_y + slope * (x - mean_x);
            (y - fitted).powi(2)
        })
        .sum();
    let sigma2 = ss_res / (n - 2.0);
    Some((slope, (sigma2 / sxx).sqrt()))
}

/// Pools replicas into one diagnostic.
///
/// The slope is fitted by least squares to the replica-mean of
/// `sqrt(magnitude)` against the step, after discarding the first tenth of
/// the recorded points as burn-in. Its confidence interval uses the larger
/// of the regression standard error and the cross-replica spread of
/// per-replica slopes, which keeps the interval honest both for correlated
/// recordings and for shared-initialization bias.
pub fn aggregate(
    stats: &[TrajectoryStats],
    tau_cutoff: u64,
    thresholds: &VerdictThresholds,
) -> RecurrenceDiagnostic {
    let mut series: BTreeMap<u64, (f64, u32)> = BTreeMap::new();
    for s in stats {
        for p in &s.magnitude_series {
            let entry = series.entry(p.step).or_insert((0.0, 0));
            entry.0 += p.magnitude.sqrt();
            entry.1 += 1;
        }
    }
    let points: Vec<(f64, f64)> = series
        .iter()
        .map(|(&step, &(sum, count))| (step as f64, sum / count as f64))
        .collect();
    let burn = points.len() / 10;
    let window = &points[burn..];
    let (slope, ci_low, ci_high) = match ols_fit_with_se(window) {
        None => (f64::NAN, f64::NEG_INFINITY, f64::INFINITY),
        Some((slope, se_ols)) => {
            let replica_slopes: Vec<f64> = stats
                .iter()
                .filter_map(|s| {
                    let pts = &s.magnitude_series[s.magnitude_series.len().min(burn)..];
                    ols_slope(pts.iter().map(|p| (p.step as f64, p.magnitude.sqrt())))
                })
                .collect();
            let se_rep = if replica_slopes.len() >= 2 {
                let mean =
                    replica_slopes.iter().sum::<f64>() / replica_slopes.len() as f64;
                let var = replica_slopes.iter().map(|b| (b - mean).powi(2)).sum::<f64>()
                    / (replica_slopes.len() - 1) as f64;
                (var / replica_slopes.len() as f64).sqrt()
            } else {
                0.0
            };
            let half = thresholds.slope_ci_z * se_ols.max(se_rep);
            (slope, slope - half, slope + half)
        }
    };

    let mut tau_pool: Vec<u64> = Vec::new();
    let mut censored = 0u64;
    for s in stats {
        tau_pool.extend(&s.tau_samples);
        censored += s.censored_count;
    }
    let tau_count = tau_pool.len();
    let denominator = tau_count as u64 + censored;
    let censoring_fraction = if denominator == 0 {
        1.0
    } else {
        censored as f64 / denominator as f64
    };
    let mean_tau = (denominator > 0).then(|| {
        let total: u128 =
            tau_pool.iter().map(|&t| t as u128).sum::<u128>() + (censored as u128) * (tau_cutoff as u128);
        total as f64 / denominator as f64
    });

    // Log-survival fit over distinct observed return times.
    let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
    for &t in &tau_pool {
        *hist.entry(t).or_insert(0) += 1;
    }
    let mut survival_points = Vec::new();
    let mut above = tau_count as u64;
    for (&t, &count) in &hist {
        above -= count;
        if above > 0 {
            survival_points.push((t as f64, (above as f64 / tau_count as f64).ln()));
        }
    }
    let tail = if survival_points.len() >= 3 {
        ols_fit(&survival_points).map(|(slope, r2)| (-slope, r2))
    } else {
        None
    };

    let slope_excludes_zero_above = ci_low > 0.0;
    let slope_contains_zero = ci_low <= 0.0 && ci_high >= 0.0;
    let verdict = if slope_excludes_zero_above
        && censoring_fraction > thresholds.transient_min_censoring
    {
        Verdict::TransientConsistent
    } else if slope_contains_zero
        && censoring_fraction < thresholds.recurrent_max_censoring
        && tail.map(|(c, r2)| c > 0.0 && r2 >= thresholds.tail_min_r2) == Some(true)
    {
        Verdict::PositiveRecurrentConsistent
    } else {
        Verdict::Inconclusive
    };

    RecurrenceDiagnostic {
        verdict,
        sqrt_magnitude_slope: slope,
        slope_ci_low: ci_low,
        slope_ci_high: ci_high,
        tail_exponent: tail.map(|(c, _)| c),
        tail_r2: tail.map(|(_, r2)| r2),
        mean_tau,
        tau_count,
        censored_count: censored,
        censoring_fraction,
        thresholds: *thresholds,
    }
}

/// One row of the empirical moment-generating-function probe.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MgfRow {
    pub c: f64,
    pub mgf: f64,
    pub half_sample_mgf: f64,
    /// Doubling-sample stability: the half-sample and full-sample estimates
    /// agree within 10%.
    pub stable: bool,
}

pub fn default_c_grid() -> Vec<f64> {
    vec![0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5]
}

/// Empirical `E[exp(c tau)]` on a grid, with a convergence flag per point.
/// Computed from the tau histogram with weights `count / N`, so constant
/// samples give the exact exponential. Empty samples yield an empty table.
pub fn mgf_probe(tau_samples: &[u64], c_grid: &[f64]) -> Vec<MgfRow> {
    if tau_samples.is_empty() || c_grid.is_empty() {
        return Vec::new();
    }
    let mgf_of = |samples: &[u64], c: f64| -> f64 {
        let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
        for &t in samples {
            *hist.entry(t).or_insert(0) += 1;
        }
        let n = samples.len() as f64;
        hist.iter()
            .map(|(&t, &count)| (count as f64 / n) * (c * t as f64).exp())
            .sum()
    };
    let half = &tau_samples[..tau_samples.len().div_ceil(2)];
    c_grid
        .iter()
        .map(|&c| {
            let full = mgf_of(tau_samples, c);
            let half_est = mgf_of(half, c);
            let stable = full.is_finite()
                && half_est.is_finite()
                && (full - half_est).abs() <= 0.1 * full.abs();
            MgfRow {
                c,
                mgf: full,
                half_sample_mgf: half_est,
                stable,
            }
        })
        .collect()
}

/// Largest grid point whose running average passed the stability flag.
pub fn largest_stable_c(rows: &[MgfRow]) -> Option<f64> {
    rows.iter()
        .filter(|r| r.stable)
        .map(|r| r.c)
        .fold(None, |acc, c| Some(acc.map_or(c, |a: f64| a.max(c))))
}
