//! Extended-XYZ persistence.
//!
//! Frame layout:
//!
//! ```text
//! <n_atoms>
//! Lattice="c11 c12 c13 c21 c22 c23 c31 c32 c33" prop_<name>=<float> ...
//! <Symbol> <x> <y> <z>
//! ...
//! ```
//!
//! Lattice rows are the cell vectors in file order; `prop_*` tokens carry
//! per-frame scalar properties. Ghost atoms serialize with the symbol `Gh`.
//! Floats are written with shortest round-trip formatting, so write→read is
//! exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::geometry::Cell;
use crate::model::{ElementVocabulary, MaterialSample};
use crate::{Error, Result};

/// One frame: a decoded sample plus its named scalar properties.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtxyzFrame {
    pub sample: MaterialSample,
    pub props: BTreeMap<String, f64>,
}

/// Serialize frames to a string. Samples must be decoded.
pub fn to_extxyz_string(frames: &[ExtxyzFrame], vocab: &ElementVocabulary) -> Result<String> {
    let mut out = String::new();
    for frame in frames {
        frame.sample.require_decoded("write_extxyz")?;
        let l = frame.sample.cell.lattice();
        writeln!(out, "{}", frame.sample.n_atoms()).unwrap();
        write!(
            out,
            "Lattice=\"{} {} {} {} {} {} {} {} {}\"",
            l[0][0], l[0][1], l[0][2], l[1][0], l[1][1], l[1][2], l[2][0], l[2][1], l[2][2]
        )
        .unwrap();
        for (name, value) in &frame.props {
            write!(out, " prop_{name}={value}").unwrap();
        }
        out.push('\n');
        for (pos, class) in frame.sample.positions.iter().zip(frame.sample.classes()) {
            writeln!(out, "{} {} {} {}", vocab.symbol(class), pos[0], pos[1], pos[2]).unwrap();
        }
    }
    Ok(out)
}

pub fn write_extxyz(
    path: &Path,
    frames: &[ExtxyzFrame],
    vocab: &ElementVocabulary,
) -> Result<()> {
    let text = to_extxyz_string(frames, vocab)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parse frames from a string. `origin` names the source in errors.
pub fn from_extxyz_string(
    text: &str,
    vocab: &ElementVocabulary,
    origin: &str,
) -> Result<Vec<ExtxyzFrame>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let lines: Vec<&str> = text.lines().collect();
    let mut frames = Vec::new();
    let mut cursor = 0usize;
    while cursor < lines.len() {
        if lines[cursor].trim().is_empty() {
            cursor += 1;
            continue;
        }
        let count_line = cursor;
        let n_atoms: usize = lines[count_line].trim().parse().map_err(|_| {
            parse_err(
                count_line + 1,
                format!("expected atom count, got {:?}", lines[count_line]),
            )
        })?;
        let comment_line = count_line + 1;
        if comment_line >= lines.len() {
            return Err(parse_err(comment_line + 1, "missing comment line".into()));
        }
        let (cell, props) = parse_comment(lines[comment_line], comment_line + 1, origin)?;

        let mut positions = Vec::with_capacity(n_atoms);
        let mut classes = Vec::with_capacity(n_atoms);
        for k in 0..n_atoms {
            let line_no = comment_line + 1 + k;
            let line = lines.get(line_no).copied().unwrap_or("");
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(parse_err(
                    line_no + 1,
                    format!("expected `Symbol x y z`, got {line:?}"),
                ));
            }
            let class = vocab.index_of(fields[0]).map_err(|_| {
                parse_err(line_no + 1, format!("unknown element symbol {:?}", fields[0]))
            })?;
            let mut pos = [0.0; 3];
            for (d, f) in fields[1..].iter().enumerate() {
                pos[d] = f.parse().map_err(|_| {
                    parse_err(line_no + 1, format!("invalid coordinate {f:?}"))
                })?;
            }
            positions.push(pos);
            classes.push(class);
        }
        frames.push(ExtxyzFrame {
            sample: MaterialSample::from_classes(cell, positions, &classes, vocab.len())?,
            props,
        });
        cursor = comment_line + 1 + n_atoms;
    }
    Ok(frames)
}

pub fn read_extxyz(path: &Path, vocab: &ElementVocabulary) -> Result<Vec<ExtxyzFrame>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_extxyz_string(&text, vocab, &path.display().to_string())
}

fn parse_comment(
    line: &str,
    line_no: usize,
    origin: &str,
) -> Result<(Cell, BTreeMap<String, f64>)> {
    let parse_err = |message: String| Error::Parse {
        path: origin.to_string(),
        line: line_no,
        message,
    };
    let start = line
        .find("Lattice=\"")
        .ok_or_else(|| parse_err("missing Lattice=\"...\" field".into()))?;
    let rest = &line[start + "Lattice=\"".len()..];
    let end = rest
        .find('"')
        .ok_or_else(|| parse_err("unterminated Lattice field".into()))?;
    let nums: Vec<f64> = rest[..end]
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err("invalid number in Lattice field".into()))?;
    if nums.len() != 9 {
        return Err(parse_err(format!(
            "Lattice field must hold 9 numbers, got {}",
            nums.len()
        )));
    }
    let cell = Cell::new([
        [nums[0], nums[1], nums[2]],
        [nums[3], nums[4], nums[5]],
        [nums[6], nums[7], nums[8]],
    ])?;

    let mut props = BTreeMap::new();
    let remainder = format!("{} {}", &line[..start], &rest[end + 1..]);
    for token in remainder.split_whitespace() {
        if let Some(kv) = token.strip_prefix("prop_") {
            let (name, value) = kv
                .split_once('=')
                .ok_or_else(|| parse_err(format!("malformed property token {token:?}")))?;
            let value: f64 = value
                .parse()
                .map_err(|_| parse_err(format!("invalid property value in {token:?}")))?;
            props.insert(name.to_string(), value);
        }
        // other comment tokens are tolerated and ignored
    }
    Ok((cell, props))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn vocab() -> ElementVocabulary {
        ElementVocabulary::new(&["A", "B"]).unwrap()
    }

    fn frame(seed: usize) -> ExtxyzFrame {
        let cell = Cell::cubic(10.0 + seed as f64).unwrap();
        let positions: Vec<Vec3> = (0..4)
            .map(|i| {
                [
                    0.1234567890123 * (i + seed) as f64,
                    1.0 / (i + 1) as f64,
                    2.0 + i as f64,
                ]
            })
            .collect();
        let classes = [0usize, 1, 2, 0];
        let mut props = BTreeMap::new();
        props.insert("density".to_string(), 0.004 * (seed + 1) as f64);
        props.insert("frac_a".to_string(), 0.5);
        ExtxyzFrame {
            sample: MaterialSample::from_classes(cell, positions, &classes, 3).unwrap(),
            props,
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        let frames: Vec<ExtxyzFrame> = (0..3).map(frame).collect();
        let text = to_extxyz_string(&frames, &vocab()).unwrap();
        let back = from_extxyz_string(&text, &vocab(), "mem").unwrap();
        assert_eq!(back, frames);
    }

    #[test]
    fn empty_input_gives_empty_list() {
        assert!(from_extxyz_string("", &vocab(), "mem").unwrap().is_empty());
        assert!(from_extxyz_string("\n\n", &vocab(), "mem").unwrap().is_empty());
    }

    #[test]
    fn truncated_frame_reports_line() {
        let text = "5\nLattice=\"10 0 0 0 10 0 0 0 10\"\nA 0 0 0\nA 1 0 0\nA 2 0 0\nA 3 0 0\n";
        let err = from_extxyz_string(text, &vocab(), "mem").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 7),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn unknown_symbol_reports_line() {
        let text = "1\nLattice=\"10 0 0 0 10 0 0 0 10\"\nXx 0 0 0\n";
        let err = from_extxyz_string(text, &vocab(), "mem").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("Xx"));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn missing_lattice_rejected() {
        let text = "1\ncomment without lattice\nA 0 0 0\n";
        assert!(from_extxyz_string(text, &vocab(), "mem").is_err());
    }

    #[test]
    fn ghost_symbol_roundtrips() {
        let f = frame(0);
        let text = to_extxyz_string(&[f], &vocab()).unwrap();
        assert!(text.contains("Gh "));
    }
}
