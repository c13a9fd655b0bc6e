//! VTK and CSV writers.
//!
//! Surfaces are written as legacy ASCII unstructured grids. Every cell is
//! exported with its own nine nodes, split into four quads, so the gaps of
//! a discontinuous field stay visible.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::fe_space::BrokenField;
use crate::flows::StepRecord;

/// CSV header of iteration logs.
pub const CSV_HEADER: [&str; 6] = [
    "step",
    "E_h",
    "D_h",
    "schur_iters",
    "increment_norm",
    "wall_ms",
];

/// Append-only iteration log, flushed after every record.
pub struct CsvLog {
    writer: csv::Writer<File>,
    deterministic: bool,
}

impl CsvLog {
    /// Creates the file and writes the header. With `deterministic`, the
    /// wall-clock column is written as zero.
    pub fn create(path: impl AsRef<Path>, deterministic: bool) -> Result<Self> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(CSV_HEADER)?;
        writer.flush()?;
        Ok(Self {
            writer,
            deterministic,
        })
    }

    pub fn record(&mut self, r: &StepRecord) -> Result<()> {
        let wall = if self.deterministic { 0.0 } else { r.wall_ms };
        self.writer.write_record([
            r.step.to_string(),
            format!("{:.12e}", r.energy),
            format!("{:.12e}", r.defect),
            r.schur_iters.to_string(),
            format!("{:.12e}", r.increment_norm),
            format!("{wall:.3}"),
        ])?;
        self.writer.flush()?;
        Ok(())
    }
}

/// Writes `field` as a legacy VTK unstructured grid of the deformed
/// surface. `cell_defect` holds one value per mesh cell.
pub fn write_vtk<W: Write>(
    mut w: W,
    title: &str,
    field: &BrokenField,
    cell_defect: &[f64],
) -> Result<()> {
    let space = field.space();
    let nc = space.mesh().num_cells();
    let nb = space.dofs_per_cell();
    let ns = space.scalar_dofs();
    let k1 = space.degree() + 1;
    let sub = space.degree() * space.degree();
    let y = field.coeffs();
    writeln!(w, "# vtk DataFile Version 2.0")?;
    writeln!(w, "{}", title.replace('\n', " "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", nc * nb)?;
    for c in 0..nc {
        for i in 0..nb {
            let d = c * nb + i;
            writeln!(w, "{:.12e} {:.12e} {:.12e}", y[d], y[ns + d], y[2 * ns + d])?;
        }
    }
    writeln!(w, "CELLS {} {}", nc * sub, nc * sub * 5)?;
    for c in 0..nc {
        let base = c * nb;
        for b in 0..k1 - 1 {
            for a in 0..k1 - 1 {
                let n = |aa: usize, bb: usize| base + aa + k1 * bb;
                writeln!(
                    w,
                    "4 {} {} {} {}",
                    n(a, b),
                    n(a + 1, b),
                    n(a + 1, b + 1),
                    n(a, b + 1)
                )?;
            }
        }
    }
    writeln!(w, "CELL_TYPES {}", nc * sub)?;
    for _ in 0..nc * sub {
        writeln!(w, "9")?;
    }
    writeln!(w, "CELL_DATA {}", nc * sub)?;
    writeln!(w, "SCALARS metric_defect double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for c in 0..nc {
        let v = cell_defect.get(c).copied().unwrap_or(0.0);
        for _ in 0..sub {
            writeln!(w, "{v:.12e}")?;
        }
    }
    writeln!(w, "POINT_DATA {}", nc * nb)?;
    writeln!(w, "SCALARS y3 double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for d in 0..nc * nb {
        writeln!(w, "{:.12e}", y[2 * ns + d])?;
    }
    Ok(())
}

/// Output directory of one run.
#[derive(Clone, Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    deterministic: bool,
}

impl ArtifactWriter {
    pub fn new(dir: impl Into<PathBuf>, deterministic: bool) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir, deterministic })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn csv_log(&self, name: &str) -> Result<CsvLog> {
        CsvLog::create(self.path(name), self.deterministic)
    }

    pub fn vtk(
        &self,
        name: &str,
        title: &str,
        field: &BrokenField,
        cell_defect: &[f64],
    ) -> Result<()> {
        let f = BufWriter::new(File::create(self.path(name))?);
        write_vtk(f, title, field, cell_defect)
    }

    pub fn text(&self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.path(name), contents)?;
        Ok(())
    }
}
