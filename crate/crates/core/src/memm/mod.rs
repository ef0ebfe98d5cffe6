//! Two-layer hierarchical maximum-entropy Markov model: transition tables,
//! substructure scoring and online structure selection.

mod detector;
mod substructure;
mod tables;

pub use detector::{detect_stream, structure_step, DetectorConfig, DetectorState, StepOutput, DEFAULT_MAX_WINDOW};
pub use substructure::{substructure_score, BoundaryPrior, LogTables, SubstructureScore};
pub use tables::{
    estimate_transitions, neutral_transition, LabeledPosteriors, ManualActivityTransitions,
    TransitionTables, NEUTRAL, TRANSITION_FLOOR,
};
