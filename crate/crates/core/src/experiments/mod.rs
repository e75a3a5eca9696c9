//! Generators for the Farey, random and IFS-orbit families, experiment
//! configuration and the end-to-end pipeline.

mod config;
mod generators;
mod pipeline;

pub use config::{ExperimentConfig, GeneratorSpec, MeasureSpec, PipelineSpec, ScheduleSpec};
pub use generators::{
    farey_denominators, gen_farey, gen_ifs_orbit, gen_random, totients, LengthRule, SheppDiagnostic, SheppVerdict,
    PRNG_NAME,
};
pub use pipeline::{
    default_out, rerun_manifest, run_pipeline, OutputFile, RunManifest, StepReport, CSV_ROW_CAP,
};
