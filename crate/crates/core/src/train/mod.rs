//! Structure-reasoning training: negative sampling, the margin loss over
//! query boxes, analytic gradients, sparse Adam and gradient checking.

mod adam;
mod config;
pub mod gradcheck;
mod objective;
mod ptranse;
mod sampling;
mod trainer;

pub use adam::SparseAdam;
pub use config::{NegativePool, Schedule, TrainConfig};
pub use gradcheck::{grad_check, grad_check_fixture, GradCheckConfig, GradCheckReport};
pub use objective::{
    backward, backward_with, example_forward, qa_loss, qa_loss_from_distances, sr_backward, sr_loss, Coordinate,
    DistanceBackwardFn, ExampleTape, Gradients, SrLoss, TrainExample,
};
pub use ptranse::{ptranse_score, ptranse_score_path};
pub use sampling::{sample_negatives, sample_sequence_negatives, Negatives};
pub use trainer::{train, AuxiliaryLoss, Callbacks, TraceRecord, TrainOutcome, TrainingSource};
