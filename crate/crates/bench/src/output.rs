//! CSV result files: a schema comment line, a header row, then one row per
//! grid point.

use std::io::{Read, Write};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Result table kinds, each with its own schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    Quality,
    Traffic,
    Pf,
    Plot,
}

pub const SCHEMA_VERSION: u32 = 1;

impl Table {
    pub fn name(self) -> &'static str {
        match self {
            Table::Quality => "quality",
            Table::Traffic => "traffic",
            Table::Pf => "pf",
            Table::Plot => "plot",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        [Table::Quality, Table::Traffic, Table::Pf, Table::Plot].into_iter().find(|t| t.name() == s)
    }

    pub fn header_comment(self) -> String {
        format!("# megobench {} schema={}", self.name(), SCHEMA_VERSION)
    }
}

pub fn write_rows<W: Write, T: Serialize>(mut out: W, table: Table, rows: &[T]) -> Result<()> {
    writeln!(out, "{}", table.header_comment())?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a results file, returning its table kind and raw CSV body.
pub fn read_table<R: Read>(mut input: R) -> Result<(Table, String)> {
    let mut text = String::new();
    input.read_to_string(&mut text).context("reading results")?;
    let (first, body) = text.split_once('\n').unwrap_or((text.as_str(), ""));
    let Some(rest) = first.strip_prefix("# megobench ") else {
        bail!("missing megobench schema comment");
    };
    let (name, version) = rest.split_once(" schema=").context("malformed schema comment")?;
    let table = Table::from_name(name).with_context(|| format!("unknown table {name:?}"))?;
    if version.trim() != SCHEMA_VERSION.to_string() {
        bail!("unsupported schema version {version}");
    }
    Ok((table, body.to_string()))
}

pub fn parse_rows<T: DeserializeOwned>(body: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(body.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .context("parsing result rows")
}
