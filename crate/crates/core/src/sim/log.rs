//! Trial records: one line per control step plus a closing summary line.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Gait, Pose, TerrainClass, VelocityCommand};
use crate::planner::CandidateCost;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Amco,
    AmcoNoReliability,
    AmcoNoHistory,
    VisionOnly,
    ProprioOnly,
    Straight,
}

impl Policy {
    pub const ALL: [Policy; 6] = [
        Policy::Amco,
        Policy::AmcoNoReliability,
        Policy::AmcoNoHistory,
        Policy::VisionOnly,
        Policy::ProprioOnly,
        Policy::Straight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Amco => "amco",
            Policy::AmcoNoReliability => "amco_no_reliability",
            Policy::AmcoNoHistory => "amco_no_history",
            Policy::VisionOnly => "vision_only",
            Policy::ProprioOnly => "proprio_only",
            Policy::Straight => "straight",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown policy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Sinkage,
    Collision,
    Timeout,
    Freeze,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Outcome::Success => "success",
            Outcome::Sinkage => "sinkage",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
            Outcome::Freeze => "freeze",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub pose: Pose,
    pub command: VelocityCommand,
    pub gait: Gait,
    /// Traversability norm of the projected reading.
    pub norm: f64,
    pub accel: [f64; 3],
    pub joints: Vec<f64>,
    /// Measured image reliability; absent when the policy does not look.
    pub xi: Option<f64>,
    /// World cell (col, row) under the robot and its terrain.
    pub cell: [usize; 2],
    pub terrain: TerrainClass,
    /// Speed actually achieved after terrain slowdown.
    pub speed: f64,
    pub freeze: bool,
    pub cost: Option<CandidateCost>,
}

impl Default for StepRecord {
    fn default() -> Self {
        Self {
            t: 0.0,
            pose: Pose::new(0.0, 0.0, 0.0),
            command: VelocityCommand::STOP,
            gait: Gait::Trot,
            norm: 0.0,
            accel: [0.0; 3],
            joints: Vec::new(),
            xi: None,
            cell: [0, 0],
            terrain: TerrainClass::Stable,
            speed: 0.0,
            freeze: false,
            cost: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub scenario: String,
    pub policy: Policy,
    pub seed: u64,
    pub outcome: Outcome,
    pub steps: usize,
    pub duration: f64,
    pub start: Pose,
    pub goal: [f64; 2],
    pub final_pose: Pose,
    /// Integrated distance actually traveled.
    pub path_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogLine {
    Step(StepRecord),
    Summary(TrialSummary),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub steps: Vec<StepRecord>,
    pub summary: TrialSummary,
}

impl TrialLog {
    /// Logged poses followed by the final pose.
    pub fn path(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self.steps.iter().map(|s| (s.pose.x, s.pose.y)).collect();
        out.push((self.summary.final_pose.x, self.summary.final_pose.y));
        out
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&serde_json::to_string(&LogLine::Step(s.clone()))?);
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&LogLine::Summary(self.summary.clone()))?);
        out.push('\n');
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut steps = Vec::new();
        let mut summary = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            if summary.is_some() {
                return Err(Error::Parse(format!("line {}: records after the summary", i + 1)));
            }
            match serde_json::from_str(line).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))? {
                LogLine::Step(s) => steps.push(s),
                LogLine::Summary(s) => summary = Some(s),
            }
        }
        let summary = summary.ok_or_else(|| Error::Parse("log has no summary line".into()))?;
        Ok(Self { steps, summary })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
        assert!(matches!("teleport".parse::<Policy>(), Err(Error::Config(_))));
    }

    #[test]
    fn jsonl_round_trip() {
        let log = TrialLog {
            steps: vec![StepRecord { t: 0.0, ..Default::default() }, StepRecord { t: 0.1, norm: 1.5, ..Default::default() }],
            summary: TrialSummary {
                scenario: "s".into(),
                policy: Policy::Amco,
                seed: 3,
                outcome: Outcome::Success,
                steps: 2,
                duration: 0.2,
                start: Pose::new(0.0, 0.0, 0.0),
                goal: [1.0, 0.0],
                final_pose: Pose::new(1.0, 0.0, 0.0),
                path_length: 1.0,
            },
        };
        let text = log.to_jsonl().unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(TrialLog::from_jsonl(&text).unwrap(), log);
        assert!(TrialLog::from_jsonl(text.lines().next().unwrap()).is_err());
    }
}
