//! File plumbing: input classification, atomic writes, molecule readers.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use phvox::chem::{parse_smiles, read_sdf_str, read_smiles_lines, Molecule};
use phvox::workflows::Query;

/// Marks an error caused by the caller's input (exit code 1).
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input_error(msg: impl fmt::Display) -> anyhow::Error {
    InputError(msg.to_string()).into()
}

/// Tags a result's error as an input error, prefixed with `what`.
pub trait InputContext<T> {
    fn input(self, what: impl fmt::Display) -> Result<T>;
}

impl<T, E: fmt::Display> InputContext<T> for std::result::Result<T, E> {
    fn input(self, what: impl fmt::Display) -> Result<T> {
        self.map_err(|e| input_error(format!("{what}: {e}")))
    }
}

/// Reads a file, or stdin for `None` or `-`.
pub fn read_text(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) if p != Path::new("-") => fs::read_to_string(p).input(format!("reading {}", p.display())),
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).input("reading stdin")?;
            Ok(s)
        }
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).input(format!("reading {}", path.display()))
}

/// Writes via a temporary file in the target directory and a rename, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Writes to `path`, or to stdout for `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Named SMILES records; unnamed lines are named by their 0-based index.
pub fn read_smiles_file(path: Option<&Path>) -> Result<Vec<(String, Molecule)>> {
    let text = read_text(path)?;
    read_smiles_lines(&text)
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let m = parse_smiles(&r.smiles).input(format!("record {i} ({})", r.smiles))?;
            Ok((r.name.unwrap_or_else(|| i.to_string()), m))
        })
        .collect()
}

pub fn read_sdf_file(path: &Path) -> Result<Vec<Molecule>> {
    let text = read_text(Some(path))?;
    read_sdf_str(&text).input(format!("parsing {}", path.display()))
}

/// SDF records as queries, named by title or 0-based index.
pub fn read_queries(path: &Path) -> Result<Vec<Query>> {
    let mols = read_sdf_file(path)?;
    if mols.is_empty() {
        return Err(input_error(format!("{} holds no molecules", path.display())));
    }
    Ok(mols
        .into_iter()
        .enumerate()
        .map(|(i, m)| Query {
            id: m.name().filter(|n| !n.is_empty()).map_or_else(|| i.to_string(), str::to_string),
            conformer: m,
        })
        .collect())
}
