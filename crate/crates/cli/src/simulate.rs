//! The `simulate` command: writes a synthetic dataset and its ground truth.

use std::path::Path;

use ofmfa::synthgen::{generate, SynthDataset, SynthSpec};

use crate::error::{CliError, CliResult};
use crate::io::{create_dir, csv_bytes, write_atomic, write_json};

/// Writes `data.csv` (header `x1..xp`), `labels.csv` and `truth.json`, the
/// latter two with 1-based cluster labels.
pub fn simulate(spec: &SynthSpec, out: &Path) -> CliResult<SynthDataset> {
    let data = generate(spec).map_err(|e| CliError::from_core("simulate", e))?;
    create_dir(out)?;
    let p = spec.p;
    let header: Vec<String> = (1..=p).map(|r| format!("x{r}")).collect();
    let rows = data.x.chunks(p).map(|row| row.iter().map(|v| format!("{v}")));
    write_atomic(&out.join("data.csv"), &csv_bytes(&header, rows))?;

    let rows = data.true_z.iter().map(|z| [(z + 1).to_string()]);
    write_atomic(&out.join("labels.csv"), &csv_bytes(&["label".to_string()], rows))?;

    let mut truth = serde_json::to_value(&data).expect("dataset serializes");
    truth["true_z"] = data.true_z.iter().map(|z| z + 1).collect();
    if let Some(obj) = truth.as_object_mut() {
        obj.remove("x");
    }
    write_json(&out.join("truth.json"), &truth)?;
    Ok(data)
}
