pub mod exposure;
pub mod field;
pub mod fit;
pub mod sweep;
pub mod trap;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::Failure;

/// Buffered file for writing, with the path in the error.
pub fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Writes rows of numbers under `header` as CSV.
pub fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| Failure::Usage(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

/// Converts configuration-derived errors into usage failures.
pub fn config_err(e: rydcav::Error) -> Failure {
    Failure::Usage(format!("config: {e}"))
}
