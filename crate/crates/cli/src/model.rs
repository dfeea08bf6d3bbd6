//! Text description of a diagonal model for `projection-test`:
//!
//! ```text
//! # two commuting projections on three points
//! size 3
//! p 1 0 0
//! p 1 1 0
//! probe -1 0.5 0     # optional extra probes
//! ```

use aou_core::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub size: usize,
    pub contractions: Vec<Vec<f64>>,
    pub probes: Vec<Vec<f64>>,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_model(text: &str) -> Result<ModelSpec> {
    let mut size = None;
    let mut contractions = Vec::new();
    let mut probes = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let key = fields.next().unwrap_or_default();
        let rest: Vec<&str> = fields.collect();
        match key {
            "size" => {
                if size.is_some() {
                    return Err(err(line_no, "size given twice"));
                }
                let [v] = rest[..] else {
                    return Err(err(line_no, "expected `size d`"));
                };
                let d: usize = v
                    .parse()
                    .map_err(|_| err(line_no, format!("field 2 (size): `{v}` is not a count")))?;
                if d == 0 {
                    return Err(err(line_no, "field 2 (size): must be positive"));
                }
                size = Some(d);
            }
            "p" | "probe" => {
                let d = size.ok_or_else(|| err(line_no, "`size d` must come first"))?;
                if rest.len() != d {
                    return Err(err(
                        line_no,
                        format!("expected {d} entries after `{key}`, got {}", rest.len()),
                    ));
                }
                let row = rest
                    .iter()
                    .enumerate()
                    .map(|(j, v)| {
                        v.parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| err(line_no, format!("field {}: `{v}` is not a finite number", j + 2)))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                if key == "p" {
                    contractions.push(row);
                } else {
                    probes.push(row);
                }
            }
            other => return Err(err(line_no, format!("unknown keyword `{other}`"))),
        }
    }
    let size = size.ok_or_else(|| err(0, "missing `size d`"))?;
    if contractions.is_empty() {
        return Err(err(0, "no contractions (`p ...` lines)"));
    }
    Ok(ModelSpec {
        size,
        contractions,
        probes,
    })
}
