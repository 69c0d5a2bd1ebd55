//! Ablation CSV.

use std::io::{Read, Write};
use std::path::Path;

use dualdrive_core::harness::AblationRow;

use crate::io::{write_atomic, IoError};

pub fn write_ablation_csv<W: Write>(out: W, rows: &[AblationRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ablation_csv<R: Read>(input: R) -> Result<Vec<AblationRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn save_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<(), IoError> {
    write_atomic(path, |w| write_ablation_csv(w, rows).map_err(std::io::Error::other))
}

pub fn ablation_csv_string(rows: &[AblationRow]) -> String {
    let mut buf = Vec::new();
    write_ablation_csv(&mut buf, rows).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is UTF-8")
}
