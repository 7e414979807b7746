//! Discrete-choice occupant simulator with known ground-truth utilities.

mod exogenous;
mod gumbel;
mod profile;
mod simulate;

pub use exogenous::{
    AcademicCalendar, AcademicPeriod, CalendarFlags, DailyCycle, ExogenousMinute, ExogenousModel,
    TimeOfDay,
};
pub use gumbel::{gumbel, logit_probabilities, sample_gumbel_choice};
pub use profile::{AlternativeUtility, OccupantProfile, ResourceUtility};
pub use simulate::{bayes_optimal_auc, simulate_cohort, simulate_occupant, true_on_probabilities};
