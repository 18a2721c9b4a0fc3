//! Closed-loop simulation: worlds, synthetic sensing, and trial execution.

pub mod log;
pub mod render;
pub mod trial;
pub mod truth;
pub mod world;

pub use log::{Outcome, Policy, StepRecord, TrialLog, TrialSummary};
pub use render::{blur_kernel, blur_level, corrupt_segmentation, render_camera, GroundTexture, RenderCache};
pub use trial::{run_trial, run_trial_observed, step, MapsView, SimContext, TrialObserver};
pub use truth::{calibrate, Calibration, TruthModel};
pub use world::{Cell, CellPatch, Generator, Limits, Scenario, World, WorldSpec};
