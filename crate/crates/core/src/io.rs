//! Instance files: a JSON format mirroring [`MipInstance`] and a reader for a
//! subset of free-format MPS.
//!
//! JSON cannot hold infinities, so bounds with magnitude at least
//! [`INFINITE_BOUND`] are read as `±inf` and written back as `±INFINITE_BOUND`.
//!
//! Supported MPS sections: `NAME`, `ROWS` (`N`, `L`, `G`, `E`), `COLUMNS` with
//! `'MARKER'` integer blocks, `RHS`, `BOUNDS` (`UP LO FX FR MI PL BV LI UI`)
//! and `ENDATA`. Only the first `N` row is used as the objective. `G` rows are
//! negated into `≤` form. `RANGES` and `OBJSENSE MAX` are rejected. Integer
//! columns without explicit bounds get `[0, +inf)`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Incumbent, IncumbentSource, MipInstance, RowKind, Tolerances};
use crate::real::{Real, INFINITE_BOUND};

fn from_sentinel<T: Real>(v: T) -> T {
    if v.as_f64() >= INFINITE_BOUND {
        T::infinity()
    } else if v.as_f64() <= -INFINITE_BOUND {
        T::neg_infinity()
    } else {
        v
    }
}

fn to_sentinel<T: Real>(v: T) -> T {
    if v == T::infinity() {
        T::of(INFINITE_BOUND)
    } else if v == T::neg_infinity() {
        T::of(-INFINITE_BOUND)
    } else {
        v
    }
}

pub fn instance_from_json<T: Real>(text: &str) -> Result<MipInstance<T>> {
    let mut inst: MipInstance<T> = serde_json::from_str(text)?;
    inst.lower.iter_mut().for_each(|v| *v = from_sentinel(*v));
    inst.upper.iter_mut().for_each(|v| *v = from_sentinel(*v));
    inst.validate()?;
    Ok(inst)
}

pub fn instance_to_json<T: Real>(inst: &MipInstance<T>) -> Result<String> {
    let mut out = inst.clone();
    out.lower.iter_mut().for_each(|v| *v = to_sentinel(*v));
    out.upper.iter_mut().for_each(|v| *v = to_sentinel(*v));
    Ok(serde_json::to_string_pretty(&out)?)
}

/// Reads `.json` as JSON and `.mps` as MPS.
pub fn read_instance(path: &Path) -> Result<MipInstance<f64>> {
    let text = fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("mps") | Some("MPS") => parse_mps(&text),
        _ => instance_from_json(&text),
    }
}

pub fn write_instance(path: &Path, inst: &MipInstance<f64>) -> Result<()> {
    fs::write(path, instance_to_json(inst)?)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct IncumbentFile {
    point: Vec<f64>,
}

/// Incumbent file: `{"point": [...]}` or a bare array. Checked for
/// feasibility against `inst`.
pub fn read_incumbent(path: &Path, inst: &MipInstance<f64>, tol: &Tolerances) -> Result<Incumbent<f64>> {
    let text = fs::read_to_string(path)?;
    let point = match serde_json::from_str::<IncumbentFile>(&text) {
        Ok(f) => f.point,
        Err(_) => serde_json::from_str::<Vec<f64>>(&text)?,
    };
    Incumbent::checked(inst, point, IncumbentSource::Provided, tol)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
}

#[derive(Clone, Copy, PartialEq)]
enum Sense {
    N,
    L,
    G,
    E,
}

fn num(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse(format!("line {line}: bad number {tok:?}")))
}

pub fn parse_mps(text: &str) -> Result<MipInstance<f64>> {
    let mut name = String::from("mps");
    let mut section = Section::None;
    let mut row_names: Vec<(String, Sense)> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut objective_row: Option<String> = None;
    let mut col_index: HashMap<String, usize> = HashMap::new();
    // sparse columns: (row, value)
    let mut columns: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut obj: Vec<f64> = Vec::new();
    let mut is_int: Vec<bool> = Vec::new();
    let mut rhs_vals: HashMap<usize, f64> = HashMap::new();
    let mut lower: Vec<Option<f64>> = Vec::new();
    let mut upper: Vec<Option<f64>> = Vec::new();
    let mut in_int = false;
    let mut ended = false;

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            match toks[0] {
                "NAME" => {
                    if let Some(n) = toks.get(1) {
                        name = n.to_string();
                    }
                    section = Section::None;
                }
                "ROWS" => section = Section::Rows,
                "COLUMNS" => section = Section::Columns,
                "RHS" => section = Section::Rhs,
                "BOUNDS" => section = Section::Bounds,
                "OBJSENSE" => {
                    if toks.get(1).is_some_and(|s| s.starts_with("MAX")) {
                        return Err(Error::Parse("OBJSENSE MAX is not supported".into()));
                    }
                }
                "MIN" | "MINIMIZE" => {}
                "MAX" | "MAXIMIZE" => return Err(Error::Parse("OBJSENSE MAX is not supported".into())),
                "RANGES" => return Err(Error::Parse("RANGES section is not supported".into())),
                "ENDATA" => {
                    ended = true;
                    break;
                }
                other => return Err(Error::Parse(format!("line {line}: unknown section {other}"))),
            }
            continue;
        }
        match section {
            Section::None => return Err(Error::Parse(format!("line {line}: data outside a section"))),
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(Error::Parse(format!("line {line}: expected `sense name`")));
                }
                let sense = match toks[0] {
                    "N" => Sense::N,
                    "L" => Sense::L,
                    "G" => Sense::G,
                    "E" => Sense::E,
                    s => return Err(Error::Parse(format!("line {line}: unknown row sense {s}"))),
                };
                if sense == Sense::N {
                    if objective_row.is_none() {
                        objective_row = Some(toks[1].to_string());
                    }
                    continue;
                }
                row_index.insert(toks[1].to_string(), row_names.len());
                row_names.push((toks[1].to_string(), sense));
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" {
                    match toks[2] {
                        "'INTORG'" => in_int = true,
                        "'INTEND'" => in_int = false,
                        m => return Err(Error::Parse(format!("line {line}: unknown marker {m}"))),
                    }
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(Error::Parse(format!("line {line}: expected `column row value [row value]`")));
                }
                let j = match col_index.get(toks[0]) {
                    Some(&j) => j,
                    None => {
                        let j = columns.len();
                        col_index.insert(toks[0].to_string(), j);
                        columns.push(Vec::new());
                        obj.push(0.0);
                        is_int.push(in_int);
                        lower.push(None);
                        upper.push(None);
                        j
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let v = num(pair[1], line)?;
                    if objective_row.as_deref() == Some(pair[0]) {
                        obj[j] = v;
                    } else if let Some(&i) = row_index.get(pair[0]) {
                        columns[j].push((i, v));
                    } else {
                        return Err(Error::Parse(format!("line {line}: unknown row {}", pair[0])));
                    }
                }
            }
            Section::Rhs => {
                // optional set name in front
                let body = if toks.len() % 2 == 1 { &toks[1..] } else { &toks[..] };
                for pair in body.chunks(2) {
                    if pair.len() != 2 {
                        return Err(Error::Parse(format!("line {line}: malformed RHS entry")));
                    }
                    let v = num(pair[1], line)?;
                    if objective_row.as_deref() == Some(pair[0]) {
                        continue;
                    }
                    match row_index.get(pair[0]) {
                        Some(&i) => {
                            rhs_vals.insert(i, v);
                        }
                        None => return Err(Error::Parse(format!("line {line}: unknown row {}", pair[0]))),
                    }
                }
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(Error::Parse(format!("line {line}: malformed bound")));
                }
                let kind = toks[0];
                let needs_value = !matches!(kind, "FR" | "MI" | "PL" | "BV");
                // `kind set column [value]`; the set name is optional
                let (col, val) = match (needs_value, toks.len()) {
                    (true, 4) => (toks[2], Some(num(toks[3], line)?)),
                    (true, 3) => (toks[1], Some(num(toks[2], line)?)),
                    (false, 3) => (toks[2], None),
                    (false, 2) => (toks[1], None),
                    (false, 4) => (toks[2], None),
                    _ => return Err(Error::Parse(format!("line {line}: malformed bound"))),
                };
                let &j = col_index
                    .get(col)
                    .ok_or_else(|| Error::Parse(format!("line {line}: unknown column {col}")))?;
                match kind {
                    "UP" => {
                        let v = val.unwrap();
                        upper[j] = Some(v);
                        if v < 0.0 && lower[j].is_none() {
                            lower[j] = Some(f64::NEG_INFINITY);
                        }
                    }
                    "LO" => lower[j] = val,
                    "FX" => {
                        lower[j] = val;
                        upper[j] = val;
                    }
                    "FR" => {
                        lower[j] = Some(f64::NEG_INFINITY);
                        upper[j] = Some(f64::INFINITY);
                    }
                    "MI" => lower[j] = Some(f64::NEG_INFINITY),
                    "PL" => upper[j] = Some(f64::INFINITY),
                    "BV" => {
                        lower[j] = Some(0.0);
                        upper[j] = Some(1.0);
                        is_int[j] = true;
                    }
                    "LI" => {
                        lower[j] = val;
                        is_int[j] = true;
                    }
                    "UI" => {
                        upper[j] = val;
                        is_int[j] = true;
                    }
                    k => return Err(Error::Parse(format!("line {line}: unsupported bound type {k}"))),
                }
            }
        }
    }
    if !ended {
        return Err(Error::Parse("missing ENDATA".into()));
    }
    let n = columns.len();
    let m = row_names.len();
    let mut rows = vec![vec![0.0; n]; m];
    for (j, col) in columns.iter().enumerate() {
        for &(i, v) in col {
            rows[i][j] += v;
        }
    }
    let mut rhs: Vec<f64> = (0..m).map(|i| rhs_vals.get(&i).copied().unwrap_or(0.0)).collect();
    let mut kinds = Vec::with_capacity(m);
    for (i, (_, sense)) in row_names.iter().enumerate() {
        match sense {
            Sense::G => {
                rows[i].iter_mut().for_each(|v| *v = -*v);
                rhs[i] = -rhs[i];
                kinds.push(RowKind::Le);
            }
            Sense::E => kinds.push(RowKind::Eq),
            _ => kinds.push(RowKind::Le),
        }
    }
    let lower: Vec<f64> = lower.into_iter().map(|v| v.unwrap_or(0.0)).collect();
    let upper: Vec<f64> = upper.into_iter().map(|v| v.unwrap_or(f64::INFINITY)).collect();
    let integer: Vec<usize> = (0..n).filter(|&j| is_int[j]).collect();
    MipInstance::new(name, obj, rows, rhs, kinds, lower, upper, integer)
}
