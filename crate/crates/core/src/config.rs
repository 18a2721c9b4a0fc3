//! Run parameters with dotted-key overrides such as `fusion.alpha=4.5`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fusion::FusionParams;
use crate::planner::{CameraModel, PlannerParams};
use crate::reliability::{BlurProviderKind, LUMA_WEIGHTS, SCORE_WEIGHTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReliabilityParams {
    pub lambda: [f64; 4],
    pub rho: [f64; 3],
    pub blur_provider: BlurProviderKind,
    /// Program run by the `external` provider.
    pub external_program: Option<String>,
}

impl Default for ReliabilityParams {
    fn default() -> Self {
        Self { lambda: SCORE_WEIGHTS, rho: LUMA_WEIGHTS, blur_provider: BlurProviderKind::Wavelet, external_program: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    /// Control period, s.
    pub control_dt: f64,
    /// Outward shift of the proprioceptive mean per unit deformability.
    pub drift: f64,
    /// Sinkage norm threshold.
    pub theta_fail: f64,
    /// Consecutive over-threshold steps that count as sinkage.
    pub sinkage_steps: usize,
    /// Minimum deformability for sinkage.
    pub sinkage_deformability: f64,
    /// Seconds of consecutive planner freezes before giving up.
    pub freeze_time: f64,
    /// Blur kernel growth per unit of (speed + roughness).
    pub blur_gain: f64,
    pub max_blur_kernel: usize,
    /// Block flip probability at zero reliability.
    pub flip_scale: f64,
    /// Side of a corruption block, px.
    pub flip_block: usize,
    /// Gait footprint ahead of the robot: near and far edge, half width (m).
    pub footprint: [f64; 3],
    /// Travel after which a gait chosen from the footprint takes effect, m.
    pub gait_switch_distance: f64,
    /// Isotropic noise added to synthesized raw signals.
    pub signal_noise: f64,
    /// Vibration of the best gait on smooth ground, m/s^2.
    pub accel_base: f64,
    /// Growth of vibration with the traversability norm.
    pub accel_norm_gain: f64,
    /// Window of the proprioceptive terrain classifier, steps.
    pub proprio_window: usize,
    /// Steps a new proprioceptive terrain guess must persist before switching.
    pub proprio_hold: usize,
    /// Obstacles farther than this are ignored by the planner, m.
    pub obstacle_range: f64,
    /// Length of the stable-ground joint reference run, s.
    pub reference_duration: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            control_dt: 0.1,
            drift: 2.0,
            theta_fail: 3.5,
            sinkage_steps: 10,
            sinkage_deformability: 0.5,
            freeze_time: 3.0,
            blur_gain: 4.0,
            max_blur_kernel: 15,
            flip_scale: 0.6,
            flip_block: 8,
            footprint: [0.25, 1.25, 0.5],
            gait_switch_distance: 0.5,
            signal_noise: 0.02,
            accel_base: 1.0,
            accel_norm_gain: 0.25,
            proprio_window: 10,
            proprio_hold: 10,
            obstacle_range: 3.0,
            reference_duration: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub fusion: FusionParams,
    pub planner: PlannerParams,
    pub camera: CameraModel,
    pub reliability: ReliabilityParams,
    pub sim: SimParams,
}

impl Params {
    /// Applies one `section.key=value` override. The value is read as JSON
    /// when it parses, otherwise as a bare string.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let parsed: Value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        self.set_value(key, parsed)
    }

    pub fn set_value(&mut self, key: &str, value: Value) -> Result<()> {
        let mut tree = serde_json::to_value(&*self)?;
        let mut slot = &mut tree;
        for part in key.split('.') {
            slot = match slot {
                Value::Object(map) => map.get_mut(part),
                Value::Array(items) => part.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
                _ => None,
            }
            .ok_or_else(|| Error::Config(format!("unknown parameter `{key}`")))?;
        }
        *slot = value;
        let updated: Params =
            serde_json::from_value(tree).map_err(|e| Error::Config(format!("bad value for `{key}`: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    /// Applies `key=value` pairs in order.
    pub fn apply<'a>(&mut self, overrides: impl IntoIterator<Item = (&'a str, &'a Value)>) -> Result<()> {
        for (k, v) in overrides {
            self.set_value(k, v.clone())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        self.camera.validate()?;
        let f = &self.fusion;
        if f.n == 0 {
            return Err(Error::Config("fusion.n must be at least 1".into()));
        }
        for (name, v) in [("gamma", f.gamma), ("u", f.u), ("delta", f.delta), ("history_window", f.history_window)] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("fusion.{name} must be positive, got {v}")));
            }
        }
        if f.alpha < 0.0 {
            return Err(Error::Config("fusion.alpha must be non-negative".into()));
        }
        if let Some(k) = f.kappa {
            if !(k > 0.0) {
                return Err(Error::Config("fusion.kappa must be positive".into()));
            }
        }
        if self.reliability.lambda.iter().any(|l| *l < 0.0 || !l.is_finite()) {
            return Err(Error::Config("reliability.lambda must be non-negative".into()));
        }
        if self.reliability.blur_provider == BlurProviderKind::External && self.reliability.external_program.is_none() {
            return Err(Error::Config("the external blur provider needs reliability.external_program".into()));
        }
        let s = &self.sim;
        if !(s.control_dt > 0.0) || s.sinkage_steps == 0 || s.flip_block == 0 || s.proprio_window == 0 {
            return Err(Error::Config("sim timing and window sizes must be positive".into()));
        }
        if !(s.gait_switch_distance >= 0.0) {
            return Err(Error::Config("sim.gait_switch_distance must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&s.flip_scale) {
            return Err(Error::Config("sim.flip_scale must lie in [0, 1]".into()));
        }
        if s.max_blur_kernel == 0 || s.max_blur_kernel.is_multiple_of(2) {
            return Err(Error::Config("sim.max_blur_kernel must be odd".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_overrides() {
        let mut p = Params::default();
        p.set("fusion.alpha", "2.0").unwrap();
        assert_eq!(p.fusion.alpha, 2.0);
        p.set("planner.beta.2", "0.1").unwrap();
        assert_eq!(p.planner.beta, [2.4, 3.2, 0.1]);
        p.set("planner.normalize_sur", "false").unwrap();
        assert!(!p.planner.normalize_sur);
        p.set("reliability.blur_provider", "ground_truth").unwrap();
        assert_eq!(p.reliability.blur_provider, BlurProviderKind::GroundTruth);
        p.set("fusion.kappa", "3.5").unwrap();
        assert_eq!(p.fusion.kappa, Some(3.5));
    }

    #[test]
    fn bad_overrides_leave_params_alone() {
        let mut p = Params::default();
        assert!(matches!(p.set("fusion.nope", "1"), Err(Error::Config(_))));
        assert!(p.set("fusion.alpha", "\"x\"").is_err());
        assert!(p.set("planner.v_max", "-1").is_err());
        assert!(p.set("reliability.blur_provider", "external").is_err());
        assert_eq!(p, Params::default());
    }

    #[test]
    fn defaults_carry_published_constants() {
        let p = Params::default();
        assert_eq!((p.fusion.n, p.fusion.gamma, p.fusion.alpha), (40, 1.0, 4.5));
        assert_eq!((p.fusion.u, p.fusion.delta), (127.0, 31.875));
        assert_eq!((p.planner.v_max, p.planner.omega_max), (0.6, 0.2));
        assert_eq!(p.reliability.lambda, [0.0008, 0.001, 0.0025, 0.003]);
        p.validate().unwrap();
    }
}
