//! CSV serialization. Every emitted file starts with the resolved run
//! configuration as `#` comments; numeric cells use the shortest
//! round-tripping decimal form, so reruns under identical configuration are
//! byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use biharm_core::{Field, Grid2D};

use crate::config::RunConfig;
use crate::CliError;

const FIELD_HEADER: &str = "i,j,x,y,value";

pub fn ensure_out_dir(cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| {
        CliError::Config(format!(
            "cannot create output directory {}: {e}",
            cfg.out_dir.display()
        ))
    })
}

pub fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out_dir.join(name)
}

/// The `#`-prefixed resolved-configuration block heading every CSV.
pub fn header(cfg: &RunConfig, command: &str) -> String {
    let mut out = String::new();
    for line in cfg.resolved_lines(command) {
        out.push_str("# ");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// `i,j,x,y,value` rows in canonical node order (row-major, `j` outer).
/// Interior node indices are 1-based, matching `x = i·hx`, `y = j·hy`.
pub fn field_rows(u: &Field) -> String {
    let g = u.grid();
    let mut out = String::from(FIELD_HEADER);
    out.push('\n');
    for j in 1..=g.ny() {
        for i in 1..=g.nx() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i,
                j,
                g.x(i),
                g.y(j),
                u.value(i, j)
            ));
        }
    }
    out
}

pub fn write_field(
    path: &Path,
    cfg: &RunConfig,
    command: &str,
    u: &Field,
) -> Result<(), CliError> {
    let mut text = header(cfg, command);
    text.push_str(&field_rows(u));
    write_file(path, &text)
}

/// Read a field CSV (as written by [`write_field`]) onto `grid`. Comment and
/// column-header lines are skipped; rows may come in any order, but every
/// interior node must appear exactly once.
pub fn read_field(path: &Path, grid: Grid2D) -> Result<Field, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read field {}: {e}", path.display())))?;
    let mut values: Vec<Option<f64>> = vec![None; grid.node_count()];
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line == FIELD_HEADER {
            continue;
        }
        let bad = || {
            CliError::Config(format!(
                "{}:{}: expected '{FIELD_HEADER}' row, got {line:?}",
                path.display(),
                lineno + 1
            ))
        };
        let mut cols = line.split(',');
        let i: usize = cols
            .next()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(bad)?;
        let j: usize = cols
            .next()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(bad)?;
        let (_x, _y) = (cols.next().ok_or_else(bad)?, cols.next().ok_or_else(bad)?);
        let v: f64 = cols
            .next()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(bad)?;
        if i < 1 || i > grid.nx() || j < 1 || j > grid.ny() {
            return Err(CliError::Config(format!(
                "{}:{}: node ({i},{j}) is outside the {}x{} interior",
                path.display(),
                lineno + 1,
                grid.nx(),
                grid.ny()
            )));
        }
        let slot = &mut values[grid.index(i, j)];
        if slot.is_some() {
            return Err(CliError::Config(format!(
                "{}:{}: node ({i},{j}) appears twice",
                path.display(),
                lineno + 1
            )));
        }
        *slot = Some(v);
    }
    let mut out = Vec::with_capacity(grid.node_count());
    for (idx, v) in values.into_iter().enumerate() {
        let Some(v) = v else {
            let (i, j) = grid.multi_index(idx);
            return Err(CliError::Config(format!(
                "{}: node ({i},{j}) is missing",
                path.display()
            )));
        };
        out.push(v);
    }
    Field::from_values(grid, out).map_err(|e| CliError::Config(e.to_string()))
}
