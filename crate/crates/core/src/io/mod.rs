//! Plain-text formats for graphs, models and reports, and the synthetic
//! graph generator.

mod manifest;
mod matrix;
mod model;
mod report;
mod synth;

use std::fs;
use std::path::{Path, PathBuf};

pub use manifest::{load_graph, parse_manifest, read_manifest, save_graph, FileRef, GraphManifest, RelationEntry, ViewEntry};
pub use matrix::{
    format_mask, format_matrix, parse_matrix, read_mask, read_matrix, write_matrix, MatrixFile, MatrixFormat, ValueDomain,
};
pub use model::{format_model, load_model, parse_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use report::{
    describe_comparison, format_mean_std, format_report, load_report, parse_report, save_report, REPORT_MAGIC,
    REPORT_VERSION,
};
pub use synth::{generate_synthetic, GroundTruth, SyntheticSpec};

use crate::error::{Error, Result};
use crate::linalg::Block;

/// Manifest file name used for generated datasets.
pub const SYNTH_MANIFEST: &str = "graph.mf";

/// Generates a dataset and writes it to `dir`: the graph under
/// [`SYNTH_MANIFEST`] plus, when the target was binarized, the complete label
/// matrix as `truth_labels.txt`. Returns every path written.
pub fn write_synthetic(spec: &SyntheticSpec, dir: &Path) -> Result<Vec<PathBuf>> {
    let (graph, truth) = generate_synthetic(spec)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = save_graph(&graph, &dir.join(SYNTH_MANIFEST))?;
    if let Some(labels) = truth.labels {
        let path = dir.join("truth_labels.txt");
        write_matrix(&path, &Block::Dense(labels), MatrixFormat::Dense)?;
        written.push(path);
    }
    Ok(written)
}
