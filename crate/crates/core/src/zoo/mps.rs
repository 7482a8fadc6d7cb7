//! MPS reader and writer for desk-scale LPs.
//!
//! Fields are whitespace separated, so both free-format files and fixed-format
//! files without blanks inside names are accepted. Integrality markers are
//! skipped with a warning (the LP relaxation is read). Values of magnitude
//! `>= 1e30` in BOUNDS mean infinity.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::lp::{LpData, Row, RowKind, Sense};
use crate::error::{Error, Result};

const MPS_INFINITY: f64 = 1e30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Name,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

impl Section {
    fn parse(word: &str) -> Option<Self> {
        Some(match word {
            "NAME" => Self::Name,
            "OBJSENSE" => Self::ObjSense,
            "ROWS" => Self::Rows,
            "COLUMNS" => Self::Columns,
            "RHS" => Self::Rhs,
            "RANGES" => Self::Ranges,
            "BOUNDS" => Self::Bounds,
            "ENDATA" => Self::End,
            _ => return None,
        })
    }
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn number(line: usize, tok: &str) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| err(line, format!("invalid number '{tok}'")))
}

fn bound_value(v: f64) -> f64 {
    if v >= MPS_INFINITY {
        f64::INFINITY
    } else if v <= -MPS_INFINITY {
        f64::NEG_INFINITY
    } else {
        v
    }
}

pub fn read_mps(path: impl AsRef<Path>) -> Result<LpData> {
    read_mps_str(&std::fs::read_to_string(path)?)
}

pub fn read_mps_str(text: &str) -> Result<LpData> {
    let mut lp = LpData {
        name: String::new(),
        objective_name: String::new(),
        sense: Sense::Minimize,
        objective_offset: 0.0,
        columns: Vec::new(),
        rows: Vec::new(),
        entries: Vec::new(),
        cost: Vec::new(),
        lower: Vec::new(),
        upper: Vec::new(),
    };
    let mut section = None;
    let mut seen_rows = false;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut free_rows: Vec<String> = Vec::new();
    let mut warned_marker = false;

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(char::is_whitespace) {
            let sec = Section::parse(toks[0]).ok_or_else(|| err(line, format!("unknown section '{}'", toks[0])))?;
            match sec {
                Section::Name => lp.name = toks[1..].join(" "),
                Section::ObjSense if toks.len() > 1 => lp.sense = parse_sense(line, toks[1])?,
                Section::Rows => seen_rows = true,
                Section::Columns | Section::Rhs | Section::Ranges | Section::Bounds if !seen_rows => {
                    return Err(err(line, format!("section {} before ROWS (missing ROWS section)", toks[0])));
                }
                _ => {}
            }
            section = Some(sec);
            continue;
        }
        match section {
            None | Some(Section::Name) => return Err(err(line, "data line outside any section")),
            Some(Section::End) => return Err(err(line, "data after ENDATA")),
            Some(Section::ObjSense) => lp.sense = parse_sense(line, toks[0])?,
            Some(Section::Rows) => {
                let [kind, name] = toks[..] else { return Err(err(line, "ROWS line needs a type and a name")) };
                let kind = match kind {
                    "N" if lp.objective_name.is_empty() => {
                        lp.objective_name = name.to_string();
                        continue;
                    }
                    "N" => {
                        log::warn!("line {line}: extra free row '{name}' ignored");
                        free_rows.push(name.to_string());
                        continue;
                    }
                    "E" => RowKind::E,
                    "L" => RowKind::L,
                    "G" => RowKind::G,
                    other => return Err(err(line, format!("unknown row type '{other}'"))),
                };
                if row_index.insert(name.to_string(), lp.rows.len()).is_some() || name == lp.objective_name {
                    return Err(err(line, format!("duplicate row '{name}'")));
                }
                lp.rows.push(Row { name: name.to_string(), kind, rhs: 0.0, range: None });
            }
            Some(Section::Columns) => {
                if toks.get(1) == Some(&"'MARKER'") {
                    if !warned_marker {
                        log::warn!("line {line}: integrality markers ignored, reading the LP relaxation");
                        warned_marker = true;
                    }
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(err(line, "COLUMNS line needs a column and one or two (row, value) pairs"));
                }
                let j = *col_index.entry(toks[0].to_string()).or_insert_with(|| {
                    lp.columns.push(toks[0].to_string());
                    lp.cost.push(0.0);
                    lp.lower.push(0.0);
                    lp.upper.push(f64::INFINITY);
                    lp.columns.len() - 1
                });
                for pair in toks[1..].chunks(2) {
                    let v = number(line, pair[1])?;
                    if pair[0] == lp.objective_name {
                        lp.cost[j] += v;
                    } else if let Some(&i) = row_index.get(pair[0]) {
                        lp.entries.push((i, j, v));
                    } else if !free_rows.iter().any(|r| r == pair[0]) {
                        return Err(err(line, format!("unknown row '{}'", pair[0])));
                    }
                }
            }
            Some(sec @ (Section::Rhs | Section::Ranges)) => {
                // The set name is optional.
                let pairs = match toks.len() {
                    2 | 4 => &toks[..],
                    3 | 5 => &toks[1..],
                    _ => return Err(err(line, "RHS/RANGES line needs one or two (row, value) pairs")),
                };
                for pair in pairs.chunks(2) {
                    let v = number(line, pair[1])?;
                    if pair[0] == lp.objective_name && sec == Section::Rhs {
                        lp.objective_offset = -v;
                    } else if let Some(&i) = row_index.get(pair[0]) {
                        if sec == Section::Rhs {
                            lp.rows[i].rhs = v;
                        } else {
                            lp.rows[i].range = Some(v);
                        }
                    } else if !free_rows.iter().any(|r| r == pair[0]) {
                        return Err(err(line, format!("unknown row '{}'", pair[0])));
                    }
                }
            }
            Some(Section::Bounds) => {
                let kind = toks[0];
                let valued = !matches!(kind, "FR" | "MI" | "PL" | "BV");
                let (col, value) = match (valued, toks.len()) {
                    (true, 4) => (toks[2], Some(number(line, toks[3])?)),
                    (true, 3) => (toks[1], Some(number(line, toks[2])?)),
                    (false, 3) | (false, 4) => (toks[2], None),
                    (false, 2) => (toks[1], None),
                    _ => return Err(err(line, format!("malformed {kind} bound"))),
                };
                let &j = col_index.get(col).ok_or_else(|| err(line, format!("unknown column '{col}'")))?;
                let v = value.map(bound_value).unwrap_or(0.0);
                match kind {
                    "UP" | "UI" => {
                        if v < 0.0 && lp.lower[j] == 0.0 {
                            log::warn!("line {line}: negative upper bound on '{col}' makes its lower bound -inf");
                            lp.lower[j] = f64::NEG_INFINITY;
                        }
                        lp.upper[j] = v;
                    }
                    "LO" | "LI" => lp.lower[j] = v,
                    "FX" => (lp.lower[j], lp.upper[j]) = (v, v),
                    "FR" => (lp.lower[j], lp.upper[j]) = (f64::NEG_INFINITY, f64::INFINITY),
                    "MI" => lp.lower[j] = f64::NEG_INFINITY,
                    "PL" => lp.upper[j] = f64::INFINITY,
                    "BV" => (lp.lower[j], lp.upper[j]) = (0.0, 1.0),
                    other => return Err(err(line, format!("unknown bound type '{other}'"))),
                }
            }
        }
    }
    if !seen_rows {
        return Err(err(text.lines().count(), "missing ROWS section"));
    }
    if lp.objective_name.is_empty() {
        return Err(err(text.lines().count(), "ROWS section has no objective (N) row"));
    }
    Ok(lp)
}

fn parse_sense(line: usize, tok: &str) -> Result<Sense> {
    match tok {
        "MIN" | "MINIMIZE" => Ok(Sense::Minimize),
        "MAX" | "MAXIMIZE" => Ok(Sense::Maximize),
        other => Err(err(line, format!("unknown objective sense '{other}'"))),
    }
}

/// Free-format MPS that [`read_mps_str`] parses back to identical data.
pub fn write_mps(lp: &LpData) -> String {
    let mut out = String::new();
    let name = if lp.name.is_empty() { "LP" } else { &lp.name };
    let obj = if lp.objective_name.is_empty() { "OBJ" } else { &lp.objective_name };
    writeln!(out, "NAME {name}").unwrap();
    if lp.sense == Sense::Maximize {
        writeln!(out, "OBJSENSE\n    MAX").unwrap();
    }
    writeln!(out, "ROWS\n N  {obj}").unwrap();
    for r in &lp.rows {
        let k = match r.kind {
            RowKind::E => "E",
            RowKind::L => "L",
            RowKind::G => "G",
        };
        writeln!(out, " {k}  {}", r.name).unwrap();
    }
    writeln!(out, "COLUMNS").unwrap();
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.columns.len()];
    for &(i, j, v) in &lp.entries {
        by_col[j].push((i, v));
    }
    for (j, col) in lp.columns.iter().enumerate() {
        // The cost is always written so that empty columns survive.
        writeln!(out, "    {col}  {obj}  {}", lp.cost[j]).unwrap();
        for &(i, v) in &by_col[j] {
            writeln!(out, "    {col}  {}  {v}", lp.rows[i].name).unwrap();
        }
    }
    writeln!(out, "RHS").unwrap();
    if lp.objective_offset != 0.0 {
        writeln!(out, "    RHS  {obj}  {}", -lp.objective_offset).unwrap();
    }
    for r in lp.rows.iter().filter(|r| r.rhs != 0.0) {
        writeln!(out, "    RHS  {}  {}", r.name, r.rhs).unwrap();
    }
    if lp.rows.iter().any(|r| r.range.is_some()) {
        writeln!(out, "RANGES").unwrap();
        for r in &lp.rows {
            if let Some(v) = r.range {
                writeln!(out, "    RNG  {}  {v}", r.name).unwrap();
            }
        }
    }
    writeln!(out, "BOUNDS").unwrap();
    for (j, col) in lp.columns.iter().enumerate() {
        let (lo, up) = (lp.lower[j], lp.upper[j]);
        if (lo, up) == (0.0, f64::INFINITY) {
            continue;
        }
        if lo == up {
            writeln!(out, " FX BND  {col}  {lo}").unwrap();
            continue;
        }
        // UP before LO: a negative UP resets a zero lower bound.
        if up.is_finite() {
            writeln!(out, " UP BND  {col}  {up}").unwrap();
        } else if up == f64::NEG_INFINITY {
            writeln!(out, " UP BND  {col}  -1e30").unwrap();
        }
        if lo == f64::NEG_INFINITY {
            writeln!(out, " MI BND  {col}").unwrap();
        } else if lo.is_finite() && (lo != 0.0 || up < 0.0) {
            writeln!(out, " LO BND  {col}  {lo}").unwrap();
        } else if lo == f64::INFINITY {
            writeln!(out, " LO BND  {col}  1e30").unwrap();
        }
    }
    writeln!(out, "ENDATA").unwrap();
    out
}

pub fn write_mps_file(lp: &LpData, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_mps(lp))?;
    Ok(())
}
