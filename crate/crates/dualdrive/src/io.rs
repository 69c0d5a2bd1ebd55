//! Line-delimited JSON and the file formats built on it.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use dualdrive_core::dual::{Experience, MemoryBank};
use dualdrive_core::encoder::{EncoderParams, TrainingRecord};
use dualdrive_core::harness::EpisodeConfig;
use dualdrive_core::sim::scenario::{Scenario, ScenarioDoc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: invalid content: {message}")]
    Invalid { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

fn parse_err(path: &Path, message: impl ToString) -> IoError {
    IoError::Parse { path: path.to_path_buf(), message: message.to_string() }
}

/// A line that could not be decoded, 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedLine {
    pub line: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lines<T> {
    pub records: Vec<T>,
    pub skipped: Vec<SkippedLine>,
}

/// Calls `f` on every non-blank line with its 1-based number and collects
/// the lines `f` rejects.
fn each_line(path: &Path, mut f: impl FnMut(&str) -> Result<(), String>) -> Result<Vec<SkippedLine>, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut skipped = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        if let Err(error) = f(&line) {
            skipped.push(SkippedLine { line: i + 1, error });
        }
    }
    Ok(skipped)
}

/// Reads one JSON value per line; blank lines are ignored and undecodable
/// lines are reported rather than failing the whole file.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Lines<T>, IoError> {
    let mut records = Vec::new();
    let skipped = each_line(path, |line| {
        records.push(serde_json::from_str(line).map_err(|e| e.to_string())?);
        Ok(())
    })?;
    Ok(Lines { records, skipped })
}

/// Writes through a temporary sibling and renames it into place, so a
/// failed write leaves any previous file intact.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let file = File::create(&tmp).map_err(io_err(&tmp))?;
    let mut w = BufWriter::new(file);
    write(&mut w).and_then(|_| w.flush()).map_err(io_err(&tmp))?;
    drop(w);
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<(), IoError> {
    write_atomic(path, |w| {
        for item in items {
            serde_json::to_writer(&mut *w, item)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

/// Parses a JSON document, naming the offending field path on error.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    from_json_str(path, &text)
}

fn from_json_str<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, IoError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let at = e.path().to_string();
        parse_err(path, format!("at `{at}`: {}", e.into_inner()))
    })?;
    de.end().map_err(|e| parse_err(path, e))?;
    Ok(value)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, IoError> {
    let doc: ScenarioDoc = read_json(path)?;
    Scenario::from_doc(&doc).map_err(|e| IoError::Invalid { path: path.to_path_buf(), message: e.to_string() })
}

pub fn load_config(path: &Path) -> Result<EpisodeConfig, IoError> {
    let cfg: EpisodeConfig = read_json(path)?;
    cfg.validate().map_err(|e| IoError::Invalid { path: path.to_path_buf(), message: e.to_string() })?;
    Ok(cfg)
}

/// A bank read from disk with the lines that were dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedBank {
    pub bank: MemoryBank,
    pub skipped: Vec<SkippedLine>,
}

pub fn save_bank(path: &Path, bank: &MemoryBank) -> Result<(), IoError> {
    write_jsonl(path, bank.entries())
}

/// Loads a bank; records that do not decode or fail insertion (wrong token
/// length, zero token) are skipped and listed.
pub fn load_bank(path: &Path) -> Result<LoadedBank, IoError> {
    let mut bank = MemoryBank::new();
    let skipped = each_line(path, |line| {
        let e: Experience = serde_json::from_str(line).map_err(|e| e.to_string())?;
        bank.insert(e).map_err(|e| e.to_string())
    })?;
    Ok(LoadedBank { bank, skipped })
}

/// Dataset line: a flat feature grid with its shape plus labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetLine {
    pub features: Vec<f64>,
    pub shape: [usize; 2],
    pub intent: u8,
    pub speed: f64,
    pub steer: f64,
    pub brake: f64,
}

impl DatasetLine {
    pub fn into_record(self) -> Result<TrainingRecord, String> {
        let [n, c] = self.shape;
        if n * c != self.features.len() {
            return Err(format!("shape {n}x{c} does not match {} feature values", self.features.len()));
        }
        Ok(TrainingRecord { features: self.features, intent: self.intent, speed: self.speed, steer: self.steer, brake: self.brake })
    }
}

pub fn write_dataset(path: &Path, records: &[TrainingRecord], shape: [usize; 2]) -> Result<(), IoError> {
    let lines: Vec<DatasetLine> = records
        .iter()
        .map(|r| DatasetLine {
            features: r.features.clone(),
            shape,
            intent: r.intent,
            speed: r.speed,
            steer: r.steer,
            brake: r.brake,
        })
        .collect();
    write_jsonl(path, &lines)
}

pub fn read_dataset(path: &Path) -> Result<Lines<TrainingRecord>, IoError> {
    let mut records = Vec::new();
    let skipped = each_line(path, |line| {
        let l: DatasetLine = serde_json::from_str(line).map_err(|e| e.to_string())?;
        records.push(l.into_record()?);
        Ok(())
    })?;
    Ok(Lines { records, skipped })
}

/// Encoder parameter file: shape manifest, configuration and both weight
/// vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub manifest: Vec<(String, Vec<usize>)>,
    pub params: EncoderParams,
}

pub fn save_params(path: &Path, params: &EncoderParams) -> Result<(), IoError> {
    write_json(path, &ParamsFile { manifest: params.manifest(), params: params.clone() })
}

pub fn load_params(path: &Path) -> Result<EncoderParams, IoError> {
    let file: ParamsFile = read_json(path)?;
    let invalid = |message: String| IoError::Invalid { path: path.to_path_buf(), message };
    file.params.check().map_err(|e| invalid(e.to_string()))?;
    if file.manifest != file.params.manifest() {
        return Err(invalid("manifest does not match the configuration".into()));
    }
    Ok(file.params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_skips_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        fs::write(&p, "1\n\nnope\n3\n").unwrap();
        let r: Lines<i32> = read_jsonl(&p).unwrap();
        assert_eq!(r.records, vec![1, 3]);
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.skipped[0].line, 3);
    }

    #[test]
    fn parse_errors_name_the_field() {
        let err = from_json_str::<EpisodeConfig>(Path::new("c.json"), r#"{"k": "three"}"#).unwrap_err();
        assert!(err.to_string().contains("`k`"), "{err}");
        let err = from_json_str::<EpisodeConfig>(Path::new("c.json"), r#"{"kk": 1}"#).unwrap_err();
        assert!(err.to_string().contains("kk"), "{err}");
    }

    #[test]
    fn dataset_shape_mismatch_is_skipped() {
        let line = DatasetLine { features: vec![0.0; 5], shape: [2, 3], intent: 0, speed: 0.0, steer: 0.0, brake: 0.0 };
        assert!(line.into_record().is_err());
    }
}
