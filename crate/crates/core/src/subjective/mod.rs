//! Subjective scores: MOS/DMOS from raw opinion scores, subject screening,
//! logistic mapping of objective scores, and correlation statistics.

mod correlation;
mod dmos;
mod regression;
mod rejection;
mod table;

pub use correlation::{correlate, pearson, ranks, spearman, CorrelationReport};
pub use dmos::{dmos, quality_scores, DmosResult, QualityScores, SequenceInfo};
pub use regression::{linear_fit, logistic_fit, RegressionFit};
pub use rejection::{reject_subjects, screen_once};
pub use table::{mos, read_score_table, read_sequence_info, ScoreTable};
