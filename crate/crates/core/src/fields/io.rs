//! `GSBD-FIELD v1` text format.
//!
//! ```text
//! GSBD-FIELD v1
//! dim 2
//! origin 0 0
//! spacing 0.0625
//! counts 16 16
//! components 2
//! <samples, row-major over nodes, components of a node adjacent>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{Grid, ScalarField, VectorField};
use crate::io_error::IoError;

pub const FIELD_MAGIC: &str = "GSBD-FIELD";
pub const FIELD_VERSION: &str = "v1";

/// Grid plus raw node samples with a component count.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldData {
    pub grid: Grid,
    pub components: usize,
    pub values: Vec<f64>,
}

impl From<&VectorField> for FieldData {
    fn from(f: &VectorField) -> Self {
        FieldData {
            grid: *f.grid(),
            components: f.dim(),
            values: f.data().to_vec(),
        }
    }
}

impl From<&ScalarField> for FieldData {
    fn from(f: &ScalarField) -> Self {
        FieldData {
            grid: *f.grid(),
            components: 1,
            values: f.values().to_vec(),
        }
    }
}

impl FieldData {
    pub fn into_vector(self) -> Result<VectorField, IoError> {
        if self.components != self.grid.dim() {
            return Err(IoError::parse(6, format!(
                "vector field needs {} components, file has {}",
                self.grid.dim(),
                self.components
            )));
        }
        VectorField::new(self.grid, self.values).map_err(|e| IoError::parse(7, e.to_string()))
    }

    pub fn into_scalar(self) -> Result<ScalarField, IoError> {
        if self.components != 1 {
            return Err(IoError::parse(6, "scalar field needs 1 component"));
        }
        ScalarField::new(self.grid, self.values).map_err(|e| IoError::parse(7, e.to_string()))
    }
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_field(f: &FieldData) -> String {
    let g = &f.grid;
    let d = g.dim();
    let mut s = String::new();
    let _ = writeln!(s, "{FIELD_MAGIC} {FIELD_VERSION}");
    let _ = writeln!(s, "dim {d}");
    let o: Vec<String> = g.origin()[..d].iter().map(|&x| fmt17(x)).collect();
    let _ = writeln!(s, "origin {}", o.join(" "));
    let _ = writeln!(s, "spacing {}", fmt17(g.h()));
    let c: Vec<String> = g.counts()[..d].iter().map(|c| c.to_string()).collect();
    let _ = writeln!(s, "counts {}", c.join(" "));
    let _ = writeln!(s, "components {}", f.components);
    for chunk in f.values.chunks(f.components.max(1)) {
        let row: Vec<String> = chunk.iter().map(|&x| fmt17(x)).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

fn header_values<'a>(line: Option<(usize, &'a str)>, key: &str, lineno: usize) -> Result<(usize, Vec<&'a str>), IoError> {
    let (n, text) = line.ok_or_else(|| IoError::parse(lineno, format!("missing `{key}` line")))?;
    let mut parts = text.split_whitespace();
    if parts.next() != Some(key) {
        return Err(IoError::parse(n, format!("expected `{key}`")));
    }
    Ok((n, parts.collect()))
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, IoError> {
    tok.parse::<f64>()
        .map_err(|_| IoError::parse(line, format!("invalid number `{tok}`")))
}

pub fn parse_field(text: &str) -> Result<FieldData, IoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (n, first) = lines.next().ok_or_else(|| IoError::parse(1, "empty file"))?;
    let mut head = first.split_whitespace();
    if head.next() != Some(FIELD_MAGIC) {
        return Err(IoError::parse(n, format!("expected `{FIELD_MAGIC}` header")));
    }
    match head.next() {
        Some(FIELD_VERSION) => {}
        Some(v) => return Err(IoError::VersionMismatch(v.to_string())),
        None => return Err(IoError::parse(n, "missing version")),
    }
    let (n, v) = header_values(lines.next(), "dim", 2)?;
    let dim: usize = match v.as_slice() {
        [d] => d.parse().map_err(|_| IoError::parse(n, "invalid dim"))?,
        _ => return Err(IoError::parse(n, "dim takes one value")),
    };
    if dim != 1 && dim != 2 {
        return Err(IoError::parse(n, format!("unsupported dim {dim}")));
    }
    let (n, v) = header_values(lines.next(), "origin", 3)?;
    if v.len() != dim {
        return Err(IoError::parse(n, "origin needs one value per axis"));
    }
    let mut origin = [0.0; 2];
    for (a, t) in v.iter().enumerate() {
        origin[a] = parse_f64(t, n)?;
    }
    let (n, v) = header_values(lines.next(), "spacing", 4)?;
    if v.len() != 1 {
        return Err(IoError::parse(n, "spacing takes one value"));
    }
    let h = parse_f64(v[0], n)?;
    let (n, v) = header_values(lines.next(), "counts", 5)?;
    if v.len() != dim {
        return Err(IoError::parse(n, "counts needs one value per axis"));
    }
    let mut counts = [0usize; 2];
    for (a, t) in v.iter().enumerate() {
        counts[a] = t.parse().map_err(|_| IoError::parse(n, format!("invalid count `{t}`")))?;
    }
    let grid = Grid::new(dim, origin, h, counts).map_err(|e| IoError::parse(n, e.to_string()))?;
    let (n, v) = header_values(lines.next(), "components", 6)?;
    let components: usize = match v.as_slice() {
        [c] => c.parse().map_err(|_| IoError::parse(n, "invalid components"))?,
        _ => return Err(IoError::parse(n, "components takes one value")),
    };
    if components == 0 {
        return Err(IoError::parse(n, "components must be positive"));
    }
    let expected = grid.num_nodes() * components;
    let mut values = Vec::with_capacity(expected);
    let mut last = n;
    for (n, line) in lines {
        last = n;
        for tok in line.split_whitespace() {
            let x = parse_f64(tok, n)?;
            if !x.is_finite() {
                return Err(IoError::parse(n, "non-finite sample"));
            }
            values.push(x);
        }
    }
    if values.len() != expected {
        return Err(IoError::parse(last, format!("expected {expected} samples, found {}", values.len())));
    }
    Ok(FieldData {
        grid,
        components,
        values,
    })
}

pub fn save_field(path: &Path, f: &FieldData) -> Result<(), IoError> {
    std::fs::write(path, write_field(f))?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<FieldData, IoError> {
    parse_field(&std::fs::read_to_string(path)?)
}
