//! `GSBD-CRACK v1` text format: a header line, an optional `dim 1|2` line, then one
//! facet per line, `x0 y0 x1 y1 [amplitude]` (or `x [amplitude]` in 1D).

use std::io::{BufRead, Write};
use std::path::Path;

use super::{Facet, FacetSet};
use crate::IoError;

pub const CRACK_MAGIC: &str = "GSBD-CRACK";
pub const CRACK_VERSION: &str = "v1";

pub fn write_crack<W: Write>(mut w: W, f: &FacetSet) -> Result<(), IoError> {
    writeln!(w, "{CRACK_MAGIC} {CRACK_VERSION}")?;
    writeln!(w, "dim {}", f.dim())?;
    for x in f.facets() {
        if f.dim() == 1 {
            write!(w, "{:.16e}", x.a[0])?;
        } else {
            write!(w, "{:.16e} {:.16e} {:.16e} {:.16e}", x.a[0], x.a[1], x.b[0], x.b[1])?;
        }
        if let Some(a) = x.amplitude {
            write!(w, " {a:.16e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn parse_crack<R: BufRead>(r: R) -> Result<FacetSet, IoError> {
    let mut lines = r.lines().enumerate();
    let Some((_, head)) = lines.next() else {
        return Err(IoError::parse(1, "empty crack file"));
    };
    let head = head?;
    let mut words = head.split_whitespace();
    if words.next() != Some(CRACK_MAGIC) {
        return Err(IoError::parse(1, format!("expected {CRACK_MAGIC} header")));
    }
    match words.next() {
        Some(CRACK_VERSION) => {}
        Some(v) => return Err(IoError::VersionMismatch(v.to_string())),
        None => return Err(IoError::parse(1, "missing format version")),
    }
    let mut dim = 2usize;
    let mut facets = Vec::new();
    let mut seen_facet = false;
    for (i, line) in lines {
        let line = line?;
        let lineno = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if let Some(rest) = t.strip_prefix("dim") {
            if seen_facet {
                return Err(IoError::parse(lineno, "dim must precede facets"));
            }
            dim = match rest.trim() {
                "1" => 1,
                "2" => 2,
                other => return Err(IoError::parse(lineno, format!("bad dimension {other:?}"))),
            };
            continue;
        }
        seen_facet = true;
        let nums: Vec<f64> = t
            .split_whitespace()
            .map(|w| w.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| IoError::parse(lineno, format!("bad number: {e}")))?;
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(IoError::parse(lineno, "non-finite coordinate"));
        }
        let idx = facets.len();
        let f = match (dim, nums.len()) {
            (1, 1) => Facet::point(nums[0]),
            (1, 2) => Facet::point(nums[0]).with_amplitude(nums[1]),
            (2, 4 | 5) => {
                let f = Facet::segment([nums[0], nums[1]], [nums[2], nums[3]]);
                if !(f.length() > 0.0) {
                    return Err(IoError::parse(lineno, format!("facet {idx} has zero length")));
                }
                if nums.len() == 5 {
                    f.with_amplitude(nums[4])
                } else {
                    f
                }
            }
            _ => {
                return Err(IoError::parse(
                    lineno,
                    format!("facet {idx}: wrong number of values ({})", nums.len()),
                ))
            }
        };
        facets.push(f);
    }
    FacetSet::new(dim, facets).map_err(|e| IoError::parse(0, e.to_string()))
}

pub fn save_crack(path: &Path, f: &FacetSet) -> Result<(), IoError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_crack(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn load_crack(path: &Path) -> Result<FacetSet, IoError> {
    let file = std::fs::File::open(path)?;
    parse_crack(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let f = FacetSet::new(
            2,
            vec![
                Facet::segment([0.1, 0.2], [0.3, 0.2]).with_amplitude(1.5),
                Facet::segment([0.0, 1.0 / 3.0], [1.0, 1.0 / 3.0]),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_crack(&mut buf, &f).unwrap();
        assert_eq!(parse_crack(&buf[..]).unwrap(), f);
    }

    #[test]
    fn one_d() {
        let f = parse_crack("GSBD-CRACK v1\ndim 1\n0.5 2.0\n".as_bytes()).unwrap();
        assert_eq!(f.dim(), 1);
        assert_eq!(f.facets()[0].amplitude, Some(2.0));
    }

    #[test]
    fn zero_length_names_facet() {
        let e = parse_crack("GSBD-CRACK v1\n0 0 1 0\n0.5 0.5 0.5 0.5\n".as_bytes()).unwrap_err();
        match e {
            IoError::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("facet 1"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_errors() {
        assert!(matches!(parse_crack("GSBD-CRACK v2\n".as_bytes()), Err(IoError::VersionMismatch(_))));
        assert!(matches!(parse_crack("nope\n".as_bytes()), Err(IoError::Parse { line: 1, .. })));
    }
}
