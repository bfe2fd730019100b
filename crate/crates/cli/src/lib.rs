//! Experiment orchestration for the domino height-field engine: configuration,
//! deterministic runs, persistence and rendering.

pub mod artifacts;
pub mod config;
pub mod pipeline;
pub mod render;

pub use artifacts::{Artifacts, Manifest, ManifestEntry};
pub use config::{ConfigError, ExperimentConfig, RenderOptions};
pub use pipeline::{execute, scale_seed, tilings_from_text, tilings_to_text, Command, GateResult, Outcome, RunOptions};
pub use render::{render_svg, render_tiling};
