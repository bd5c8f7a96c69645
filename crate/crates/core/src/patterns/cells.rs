//! Cell-list files: a header line `dn g`, then one cell index per line.

use std::io::{BufRead, Write};

use super::RoughPattern;
use crate::error::{Error, Result};

pub fn read_cell_list<R: BufRead>(
    input: R,
    dim: usize,
    claimed_alpha: f64,
) -> Result<RoughPattern> {
    let mut lines = input.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('#') => None,
        other => Some((i + 1, other)),
    });
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::input("empty cell list"))?;
    let header = header?;
    let mut fields = header.split_whitespace();
    let parse_u64 = |s: Option<&str>, what: &str| -> Result<u64> {
        s.ok_or_else(|| Error::input(format!("cell list header missing {what}")))?
            .parse::<u64>()
            .map_err(|e| Error::input(format!("cell list header {what}: {e}")))
    };
    let axes = parse_u64(fields.next(), "dn")? as usize;
    let g = parse_u64(fields.next(), "g")?;
    if dim == 0 || axes % dim != 0 {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: axes,
        });
    }
    let mut cells = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        let c = line
            .trim()
            .parse::<u64>()
            .map_err(|e| Error::input(format!("cell list line {lineno}: {e}")))?;
        cells.push(c);
    }
    RoughPattern::new(axes / dim, dim, g, cells, claimed_alpha)
}

pub fn write_cell_list<W: Write>(mut out: W, z: &RoughPattern) -> Result<()> {
    writeln!(out, "{} {}", z.arity() * z.dim(), z.resolution())?;
    let mut cells: Vec<u64> = z.cells().collect();
    cells.sort_unstable();
    for c in cells {
        writeln!(out, "{c}")?;
    }
    Ok(())
}
