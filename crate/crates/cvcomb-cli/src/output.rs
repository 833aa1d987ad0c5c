//! File output helpers. Writes are atomic (temp file in the destination
//! directory, then rename) so an interrupted run never leaves a truncated
//! table behind, and nothing in a report depends on the clock, so rerunning
//! the same command yields byte-identical files.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::Context;

/// Standard report preamble: tool version, the subcommand, and the effective
/// parameters it ran with.
pub fn csv_header(command: &str, params: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# cvcomb v{}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# command: {command}");
    let _ = writeln!(out, "# params: {params}");
    out
}

pub fn write_atomic(path: &Path, content: &str) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create temp file next to {}", path.display()))?;
    tmp.write_all(content.as_bytes())
        .with_context(|| format!("cannot write {}", path.display()))?;
    tmp.persist(path)
        .with_context(|| format!("cannot replace {}", path.display()))?;
    Ok(())
}

/// CSV cell for a float: shortest representation that round-trips.
pub fn num(x: f64) -> String {
    format!("{x}")
}
