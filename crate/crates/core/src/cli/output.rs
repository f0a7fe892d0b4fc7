//! Report files and PGM slice dumps.

use std::fs;
use std::path::Path;

use clap::ValueEnum;

use super::CliError;
use crate::eval::EvalReport;
use crate::voxel::{plane, VoxelGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    /// `<stem>.txt`, the line-oriented summary.
    Text,
    /// `<stem>.csv`, one row per sample.
    Table,
    Both,
}

/// Writes `report` under `dir`. Output bytes depend only on the report.
pub fn emit_report(report: &EvalReport, format: ReportFormat, dir: &Path, stem: &str) -> Result<(), CliError> {
    let mut files = Vec::new();
    if format != ReportFormat::Table {
        files.push((dir.join(format!("{stem}.txt")), report.to_text()));
    }
    if format != ReportFormat::Text {
        files.push((dir.join(format!("{stem}.csv")), report.to_csv()));
    }
    for (path, text) in files {
        fs::write(&path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Plain PGM (`P2`) image of the x-slice `t`: rows are y, columns z,
/// occupied voxels white.
pub fn pgm_slice(grid: &VoxelGrid, t: usize) -> String {
    let d = grid.resolution();
    let mut out = format!("P2\n{d} {d}\n255\n");
    for row in plane(grid, t).chunks(d) {
        let line: Vec<&str> = row.iter().map(|&v| if v > 0.0 { "255" } else { "0" }).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// One `<prefix>_x<t>.pgm` per x-slice.
pub fn write_slices(grid: &VoxelGrid, dir: &Path, prefix: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    for t in 0..grid.resolution() {
        let path = dir.join(format!("{prefix}_x{t:03}.pgm"));
        fs::write(&path, pgm_slice(grid, t)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
