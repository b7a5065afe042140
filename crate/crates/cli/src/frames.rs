//! Input discovery: single files or directories of `.bin` / `.label` files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{io_error, CliError};

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub stem: String,
    pub bin: PathBuf,
    pub label: Option<PathBuf>,
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn require(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Io(format!(
            "{}: no such file or directory",
            path.display()
        )))
    }
}

/// Files in `dir` with extension `ext`, keyed by stem (lexicographic).
fn by_stem(dir: &Path, ext: &str) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| io_error(dir, e))? {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            out.insert(stem_of(&path), path);
        }
    }
    Ok(out)
}

/// Scans without labels. A directory yields its `.bin` files in name order.
pub fn scans(input: &Path) -> Result<Vec<Frame>, CliError> {
    require(input)?;
    if input.is_dir() {
        let frames: Vec<Frame> = by_stem(input, "bin")?
            .into_iter()
            .map(|(stem, bin)| Frame {
                stem,
                bin,
                label: None,
            })
            .collect();
        if frames.is_empty() {
            return Err(CliError::Validation(format!(
                "{}: no .bin files",
                input.display()
            )));
        }
        Ok(frames)
    } else {
        Ok(vec![Frame {
            stem: stem_of(input),
            bin: input.to_path_buf(),
            label: None,
        }])
    }
}

/// Scans paired with labels by stem. `labels` defaults to the scan's own
/// directory (or the sibling `.label` file for a single scan).
pub fn labelled(input: &Path, labels: Option<&Path>) -> Result<Vec<Frame>, CliError> {
    require(input)?;
    if let Some(l) = labels {
        require(l)?;
    }
    if !input.is_dir() {
        let label = match labels {
            Some(l) if l.is_dir() => l.join(format!("{}.label", stem_of(input))),
            Some(l) => l.to_path_buf(),
            None => input.with_extension("label"),
        };
        if !label.is_file() {
            return Err(CliError::Validation(format!(
                "unmatched stems: {} (no label file {})",
                stem_of(input),
                label.display()
            )));
        }
        return Ok(vec![Frame {
            stem: stem_of(input),
            bin: input.to_path_buf(),
            label: Some(label),
        }]);
    }
    let label_dir = labels.unwrap_or(input);
    if !label_dir.is_dir() {
        return Err(CliError::Validation(format!(
            "{}: labels must be a directory when the input is a directory",
            label_dir.display()
        )));
    }
    let bins = by_stem(input, "bin")?;
    let mut label_files = by_stem(label_dir, "label")?;
    let mut frames = Vec::with_capacity(bins.len());
    let mut unmatched = Vec::new();
    for (stem, bin) in bins {
        match label_files.remove(&stem) {
            Some(label) => frames.push(Frame {
                stem,
                bin,
                label: Some(label),
            }),
            None => unmatched.push(format!("{stem}.bin")),
        }
    }
    unmatched.extend(label_files.into_keys().map(|s| format!("{s}.label")));
    if !unmatched.is_empty() {
        unmatched.sort();
        return Err(CliError::Validation(format!(
            "unmatched stems: {}",
            unmatched.join(", ")
        )));
    }
    if frames.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: no .bin files",
            input.display()
        )));
    }
    Ok(frames)
}
