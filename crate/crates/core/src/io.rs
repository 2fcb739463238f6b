//! Plain-text file formats: tensors, PGM maps and CSV reports.
//!
//! Tensor files hold a `shape d₀ d₁ …` header line followed by the values in
//! row-major order, whitespace separated. Values are written with 17
//! significant digits so a write/read round trip is bit exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::diagnostics::DiagnosticMap;
use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("expected {expected} values, found {found}")]
    CountMismatch { expected: usize, found: usize },

    #[error("non-numeric token `{token}` at value {position}")]
    NonNumeric { token: String, position: usize },

    #[error("map value {value} at token {token} is outside [0, 1]")]
    OutOfRange { value: f64, token: usize },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Tensor(#[from] crate::Error),
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;

/// Tensor in the text format; one line per innermost row.
pub fn tensor_to_string(t: &Tensor) -> String {
    let mut out = String::from("shape");
    for d in t.shape() {
        out.push_str(&format!(" {d}"));
    }
    out.push('\n');
    let row = t.shape().last().copied().unwrap_or(1).max(1);
    for chunk in t.data().chunks(row) {
        let line: Vec<String> = chunk.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_tensor(text: &str) -> FormatResult<Tensor> {
    let (header, body) = text.split_once('\n').unwrap_or((text, ""));
    let mut fields = header.split_whitespace();
    if fields.next() != Some("shape") {
        return Err(FormatError::MalformedHeader(format!(
            "expected `shape d0 d1 ...`, got `{}`",
            header.trim()
        )));
    }
    let shape = fields
        .map(|f| {
            f.parse::<usize>()
                .map_err(|_| FormatError::MalformedHeader(format!("bad dimension `{f}`")))
        })
        .collect::<FormatResult<Vec<_>>>()?;
    let values = body
        .split_whitespace()
        .enumerate()
        .map(|(position, token)| {
            token.parse::<f64>().map_err(|_| FormatError::NonNumeric {
                token: token.to_string(),
                position,
            })
        })
        .collect::<FormatResult<Vec<_>>>()?;
    let expected: usize = shape.iter().product();
    if values.len() != expected {
        return Err(FormatError::CountMismatch {
            expected,
            found: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(crate::Error::NonFinite { op: "parse_tensor" }.into());
    }
    Ok(Tensor::new(shape, values)?)
}

pub fn save_tensor(path: impl AsRef<Path>, t: &Tensor) -> FormatResult<()> {
    Ok(fs::write(path, tensor_to_string(t))?)
}

pub fn load_tensor(path: impl AsRef<Path>) -> FormatResult<Tensor> {
    parse_tensor(&fs::read_to_string(path)?)
}

/// `floor(255·v + 0.5)`: round half up.
pub fn quantize(v: f64) -> u8 {
    (255.0 * v + 0.5).floor() as u8
}

/// ASCII PGM (`P2`, maxval 255), one grid row per line. Values must be in
/// `[0, 1]`.
pub fn pgm_string(map: &DiagnosticMap) -> FormatResult<String> {
    if let Some((token, &value)) = map
        .values
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(FormatError::OutOfRange { value, token });
    }
    let mut out = format!("P2\n{} {}\n255\n", map.grid.width, map.grid.height);
    for row in map.grid_rows() {
        let line: Vec<String> = row.iter().map(|&v| quantize(v).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_pgm(path: impl AsRef<Path>, map: &DiagnosticMap) -> FormatResult<()> {
    Ok(fs::write(path, pgm_string(map)?)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major.
    pub pixels: Vec<u16>,
}

impl Pgm {
    /// Pixels rescaled to `[0, 1]`.
    pub fn unit_values(&self) -> Vec<f64> {
        self.pixels
            .iter()
            .map(|&p| p as f64 / self.maxval as f64)
            .collect()
    }
}

/// Parses an ASCII `P2` image. `#` comments are not supported.
pub fn parse_pgm(text: &str) -> FormatResult<Pgm> {
    let mut tokens = text.split_whitespace();
    if tokens.next() != Some("P2") {
        return Err(FormatError::MalformedHeader("missing `P2` magic".into()));
    }
    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        let t = tokens
            .next()
            .ok_or_else(|| FormatError::MalformedHeader(format!("missing {name}")))?;
        *slot = t
            .parse()
            .map_err(|_| FormatError::MalformedHeader(format!("bad {name} `{t}`")))?;
    }
    let [width, height, maxval] = header;
    if maxval == 0 || maxval > u16::MAX as usize {
        return Err(FormatError::MalformedHeader(format!("maxval {maxval}")));
    }
    let pixels = tokens
        .enumerate()
        .map(|(position, t)| match t.parse::<u16>() {
            Ok(p) if p as usize <= maxval => Ok(p),
            _ => Err(FormatError::NonNumeric {
                token: t.to_string(),
                position,
            }),
        })
        .collect::<FormatResult<Vec<_>>>()?;
    if pixels.len() != width * height {
        return Err(FormatError::CountMismatch {
            expected: width * height,
            found: pixels.len(),
        });
    }
    Ok(Pgm {
        width,
        height,
        maxval: maxval as u16,
        pixels,
    })
}

/// Serializes `rows` with a header line taken from the field names.
pub fn csv_string<T: Serialize>(rows: &[T]) -> FormatResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| FormatError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> FormatResult<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(csv_string(rows)?.as_bytes())?;
    Ok(())
}
