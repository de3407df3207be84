//! The `score` command: agreement between two partitions.

use std::path::Path;

use ofmfa::diagnostics::rand_indices;

use crate::error::{CliError, CliResult};
use crate::io::read_labels;

pub fn score(
    predicted: &Path,
    predicted_column: Option<&str>,
    truth: &Path,
    truth_column: Option<&str>,
) -> CliResult<(f64, f64)> {
    let a = read_labels(predicted, predicted_column)?;
    let b = read_labels(truth, truth_column)?;
    rand_indices(&a, &b).map_err(|e| CliError::from_core("score", e))
}
