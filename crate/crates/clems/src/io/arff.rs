//! Parser for the ARFF subset used by the Mulan benchmark files: numeric and
//! binary-nominal attributes, dense and sparse data rows, `%` comments.

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum AttributeKind {
    Numeric,
    /// Nominal attribute whose value set is exactly {0, 1}.
    Binary,
}

#[derive(Clone, Debug)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

/// A parsed ARFF relation with fully expanded rows.
#[derive(Clone, Debug)]
pub struct ArffRelation {
    pub name: String,
    pub attributes: Vec<Attribute>,
    pub rows: Vec<Vec<f64>>,
}

/// Parses ARFF text. Any malformed line is reported with its 1-based line
/// number; attribute types outside the supported subset are rejected.
pub fn parse_arff(text: &str) -> Result<ArffRelation> {
    let mut name = String::new();
    let mut attributes: Vec<Attribute> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut in_data = false;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if in_data {
            rows.push(parse_row(line, &attributes, line_no)?);
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            name = unquote(line["@relation".len()..].trim()).to_string();
        } else if lower.starts_with("@attribute") {
            attributes.push(parse_attribute(line["@attribute".len()..].trim(), line_no)?);
        } else if lower == "@data" {
            if attributes.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "@data before any @attribute".into(),
                });
            }
            in_data = true;
        } else {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("unexpected header line `{line}`"),
            });
        }
    }
    if !in_data {
        return Err(Error::Parse {
            line: last_line,
            msg: "missing @data section".into(),
        });
    }
    Ok(ArffRelation {
        name,
        attributes,
        rows,
    })
}

fn unquote(token: &str) -> &str {
    let t = token.trim();
    if t.len() >= 2
        && ((t.starts_with('\'') && t.ends_with('\'')) || (t.starts_with('"') && t.ends_with('"')))
    {
        &t[1..t.len() - 1]
    } else {
        t
    }
}

/// Parses `<name> <type>` after the `@attribute` keyword.
fn parse_attribute(rest: &str, line_no: usize) -> Result<Attribute> {
    let rest = rest.trim();
    let (name, type_part) = if let Some(quote) = rest.chars().next().filter(|c| *c == '\'' || *c == '"') {
        let closing = rest[1..]
            .find(quote)
            .map(|p| p + 1)
            .ok_or_else(|| Error::Parse {
                line: line_no,
                msg: "unterminated quoted attribute name".into(),
            })?;
        (rest[1..closing].to_string(), rest[closing + 1..].trim())
    } else {
        let boundary = rest
            .find(|c: char| c.is_whitespace() || c == '{')
            .ok_or_else(|| Error::Parse {
                line: line_no,
                msg: "attribute line has no type".into(),
            })?;
        (rest[..boundary].to_string(), rest[boundary..].trim())
    };
    if name.is_empty() {
        return Err(Error::Parse {
            line: line_no,
            msg: "empty attribute name".into(),
        });
    }
    if type_part.starts_with('{') {
        if !type_part.ends_with('}') {
            return Err(Error::Parse {
                line: line_no,
                msg: "unterminated nominal value list".into(),
            });
        }
        let mut values: Vec<&str> = type_part[1..type_part.len() - 1]
            .split(',')
            .map(unquote)
            .collect();
        values.sort_unstable();
        if values == ["0", "1"] {
            return Ok(Attribute {
                name,
                kind: AttributeKind::Binary,
            });
        }
        return Err(Error::Unsupported(format!(
            "line {line_no}: nominal attribute `{name}` has values {values:?}; only {{0,1}} is supported"
        )));
    }
    match type_part.to_ascii_lowercase().as_str() {
        "numeric" | "real" | "integer" => Ok(Attribute {
            name,
            kind: AttributeKind::Numeric,
        }),
        other => Err(Error::Unsupported(format!(
            "line {line_no}: attribute `{name}` has unsupported type `{other}`"
        ))),
    }
}

fn parse_value(token: &str, attr: &Attribute, line_no: usize) -> Result<f64> {
    let token = unquote(token);
    if token == "?" {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("missing value `?` for attribute `{}` is not supported", attr.name),
        });
    }
    let value: f64 = token.parse().map_err(|_| Error::Parse {
        line: line_no,
        msg: format!("cannot parse `{token}` as a number for attribute `{}`", attr.name),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("non-finite value `{token}` for attribute `{}`", attr.name),
        });
    }
    if attr.kind == AttributeKind::Binary && value != 0.0 && value != 1.0 {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("attribute `{}` is binary but the row holds {value}", attr.name),
        });
    }
    Ok(value)
}

fn parse_row(line: &str, attributes: &[Attribute], line_no: usize) -> Result<Vec<f64>> {
    if line.starts_with('{') {
        return parse_sparse_row(line, attributes, line_no);
    }
    let tokens: Vec<&str> = line.split(',').collect();
    if tokens.len() != attributes.len() {
        return Err(Error::Parse {
            line: line_no,
            msg: format!(
                "row has {} values, expected {}",
                tokens.len(),
                attributes.len()
            ),
        });
    }
    tokens
        .iter()
        .zip(attributes)
        .map(|(t, a)| parse_value(t, a, line_no))
        .collect()
}

/// Sparse rows `{index value, index value}`; unmentioned attributes are 0.
fn parse_sparse_row(line: &str, attributes: &[Attribute], line_no: usize) -> Result<Vec<f64>> {
    if !line.ends_with('}') {
        return Err(Error::Parse {
            line: line_no,
            msg: "unterminated sparse row".into(),
        });
    }
    let mut row = vec![0.0; attributes.len()];
    let inner = line[1..line.len() - 1].trim();
    if inner.is_empty() {
        return Ok(row);
    }
    let mut seen = vec![false; attributes.len()];
    for entry in inner.split(',') {
        let mut parts = entry.split_whitespace();
        let (Some(index_str), Some(value_str), None) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("sparse entry `{entry}` is not `index value`"),
            });
        };
        let index: usize = index_str.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("sparse index `{index_str}` is not an integer"),
        })?;
        if index >= attributes.len() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!(
                    "sparse index {index} out of range for {} attributes",
                    attributes.len()
                ),
            });
        }
        if seen[index] {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("sparse index {index} appears twice"),
            });
        }
        seen[index] = true;
        row[index] = parse_value(value_str, &attributes[index], line_no)?;
    }
    Ok(row)
}
