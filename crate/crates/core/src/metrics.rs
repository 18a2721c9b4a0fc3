//! Evaluation metrics over trial logs and their per-policy aggregation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Outcome, Policy, TrialLog};

/// Per-joint position band observed while walking on firm, flat ground.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceJointRange {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ReferenceJointRange {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() || min.iter().zip(&max).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidInput("reference band needs min <= max for every joint".into()));
        }
        Ok(Self { min, max })
    }

    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut min: Vec<f64> = Vec::new();
        let mut max: Vec<f64> = Vec::new();
        for s in samples {
            if min.is_empty() {
                min = s.to_vec();
                max = s.to_vec();
                continue;
            }
            if s.len() != min.len() {
                return Err(Error::DimensionMismatch("joint samples differ in length".into()));
            }
            for (j, v) in s.iter().enumerate() {
                min[j] = min[j].min(*v);
                max[j] = max[j].max(*v);
            }
        }
        if min.is_empty() {
            return Err(Error::InvalidInput("reference band needs at least one sample".into()));
        }
        Self::new(min, max)
    }

    pub fn joints(&self) -> usize {
        self.min.len()
    }
}

pub fn success_rate(outcomes: &[Outcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::InvalidInput("success rate of zero trials".into()));
    }
    Ok(outcomes.iter().filter(|o| **o == Outcome::Success).count() as f64 / outcomes.len() as f64)
}

/// Polyline length over the straight start-goal distance.
pub fn normalized_trajectory_length(path: &[(f64, f64)], start: (f64, f64), goal: (f64, f64)) -> Result<f64> {
    if path.len() < 2 {
        return Err(Error::InvalidInput("trajectory needs at least two poses".into()));
    }
    let straight = (goal.0 - start.0).hypot(goal.1 - start.1);
    if straight == 0.0 {
        return Err(Error::InvalidInput("start and goal coincide".into()));
    }
    let length: f64 = path.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).sum();
    Ok(length / straight)
}

/// Sum of squared accelerations over all samples and axes.
pub fn imu_energy(accels: &[[f64; 3]]) -> f64 {
    accels.iter().map(|a| a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sum()
}

pub fn imu_energy_density(log: &TrialLog) -> f64 {
    log.steps.iter().map(|s| s.accel[0] * s.accel[0] + s.accel[1] * s.accel[1] + s.accel[2] * s.accel[2]).sum()
}

/// Summed excursions of joint positions outside the reference band.
pub fn joint_deviation<'a>(
    samples: impl IntoIterator<Item = &'a [f64]>,
    reference: &ReferenceJointRange,
) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        if s.len() > reference.joints() {
            return Err(Error::DimensionMismatch(format!(
                "log has {} joints, reference covers {}",
                s.len(),
                reference.joints()
            )));
        }
        for (j, p) in s.iter().enumerate() {
            let (lo, hi) = (reference.min[j], reference.max[j]);
            if *p < lo {
                total += lo - p;
            } else if *p > hi {
                total += p - hi;
            }
        }
    }
    Ok(total)
}

pub fn vibration_cost(log: &TrialLog, reference: &ReferenceJointRange) -> Result<f64> {
    joint_deviation(log.steps.iter().map(|s| s.joints.as_slice()), reference)
}

/// Aggregated metrics of one policy on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetrics {
    pub scenario: String,
    pub policy: Policy,
    pub trials: usize,
    pub success_rate: f64,
    /// Mean normalized trajectory length over all trials; failed trials
    /// count the path up to the failure point.
    pub trajectory_length: f64,
    /// Mean IMU energy over successful trials; `None` without successes.
    pub imu_energy: Option<f64>,
    /// Mean vibration cost over all trials.
    pub vibration: f64,
}

pub fn aggregate(logs: &[TrialLog], reference: &ReferenceJointRange) -> Result<PolicyMetrics> {
    let first = logs.first().ok_or_else(|| Error::InvalidInput("no trials to aggregate".into()))?;
    let (scenario, policy) = (first.summary.scenario.clone(), first.summary.policy);
    if logs.iter().any(|l| l.summary.scenario != scenario || l.summary.policy != policy) {
        return Err(Error::InvalidInput("aggregate expects one scenario and one policy".into()));
    }
    let outcomes: Vec<Outcome> = logs.iter().map(|l| l.summary.outcome).collect();
    let n = logs.len() as f64;
    let mut length = 0.0;
    let mut vibration = 0.0;
    let mut energy = 0.0;
    let mut successes = 0usize;
    for l in logs {
        let s = &l.summary;
        length += normalized_trajectory_length(&l.path(), (s.start.x, s.start.y), (s.goal[0], s.goal[1]))?;
        vibration += vibration_cost(l, reference)?;
        if s.outcome == Outcome::Success {
            energy += imu_energy_density(l);
            successes += 1;
        }
    }
    Ok(PolicyMetrics {
        scenario,
        policy,
        trials: logs.len(),
        success_rate: success_rate(&outcomes)?,
        trajectory_length: length / n,
        imu_energy: (successes > 0).then(|| energy / successes as f64),
        vibration: vibration / n,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<PolicyMetrics>,
}

impl MetricsReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,policy,trials,success_rate,trajectory_length,imu_energy,vibration\n");
        for r in &self.rows {
            let energy = r.imu_energy.map(|e| format!("{e:.6}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{:.4},{:.6},{},{:.6}",
                r.scenario, r.policy, r.trials, r.success_rate, r.trajectory_length, energy, r.vibration
            );
        }
        out
    }

    /// Plain-text table: one block per scenario, one row per policy.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let mut scenarios: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !scenarios.contains(&r.scenario.as_str()) {
                scenarios.push(&r.scenario);
            }
        }
        for s in scenarios {
            let _ = writeln!(out, "{s}");
            let _ = writeln!(
                out,
                "  {:<22} {:>8} {:>10} {:>12} {:>12}",
                "policy", "success%", "traj.len", "imu.energy", "vibration"
            );
            for r in self.rows.iter().filter(|r| r.scenario == s) {
                let energy = r.imu_energy.map(|e| format!("{e:.1}")).unwrap_or_else(|| "n/a".into());
                let _ = writeln!(
                    out,
                    "  {:<22} {:>8.0} {:>10.3} {:>12} {:>12.3}",
                    r.policy.name(),
                    100.0 * r.success_rate,
                    r.trajectory_length,
                    energy,
                    r.vibration
                );
            }
        }
        out
    }
}
