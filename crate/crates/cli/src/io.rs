use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use transfer_core::dag::ConstructExpr;
use transfer_core::martingale::MartingaleTree;
use transfer_core::measure::StepFunction;
use transfer_core::{Error, Result};

pub enum Input {
    Function(StepFunction),
    Expr(ConstructExpr),
    Martingale(MartingaleTree),
}

pub fn check_readable(p: &Path) -> Result<()> {
    if !p.is_file() {
        return Err(Error::input(format!("--in: {} is not a readable file", p.display())));
    }
    Ok(())
}

/// JSON parse without the default nesting limit; deep martingales and
/// expressions nest a few levels per depth.
pub fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let v = T::deserialize(&mut de).map_err(|e| Error::input(format!("{what}: {e}")))?;
    de.end().map_err(|e| Error::input(format!("{what}: {e}")))?;
    Ok(v)
}

pub fn read_json<T: DeserializeOwned>(p: &Path) -> Result<T> {
    let text = fs::read_to_string(p).map_err(|e| Error::input(format!("--in: {}: {e}", p.display())))?;
    parse_json(&text, &format!("--in {}", p.display()))
}

/// Reads a step function (has `domain`), a martingale (`kind` of point or
/// measure) or an expression (any other `kind`).
pub fn read_input(p: &Path) -> Result<Input> {
    let v: Value = read_json(p)?;
    let what = format!("--in {}", p.display());
    let kind = v.get("kind").and_then(Value::as_str).map(str::to_owned);
    let text = v.to_string();
    drop(v);
    match kind.as_deref() {
        None => Ok(Input::Function(parse_json(&text, &what)?)),
        Some("point" | "measure") => Ok(Input::Martingale(parse_json(&text, &what)?)),
        Some(_) => Ok(Input::Expr(parse_json(&text, &what)?)),
    }
}

pub struct Output {
    path: Option<PathBuf>,
}

impl Output {
    /// Checks that the output location is writable before any computation.
    pub fn new(path: Option<&Path>) -> Result<Self> {
        if let Some(p) = path {
            let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !parent.is_dir() {
                return Err(Error::input(format!("--out: directory {} does not exist", parent.display())));
            }
            if p.is_dir() {
                return Err(Error::input(format!("--out: {} is a directory", p.display())));
            }
        }
        Ok(Output { path: path.map(Path::to_path_buf) })
    }

    fn write(&self, bytes: &[u8]) -> Result<()> {
        let res = match &self.path {
            Some(p) => fs::write(p, bytes),
            None => std::io::stdout().write_all(bytes),
        };
        res.map_err(|e| Error::input(format!("--out: {e}")))
    }

    pub fn json<T: Serialize + ?Sized>(&self, v: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Internal(format!("json: {e}")))?;
        s.push('\n');
        self.write(s.as_bytes())
    }

    pub fn csv<T: Serialize>(&self, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| Error::Internal(format!("csv: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Internal(format!("csv: {e}")))?;
        self.write(&bytes)
    }
}
