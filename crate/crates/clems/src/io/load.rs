//! Dataset loaders: Mulan ARFF + XML label header, and a plain CSV fallback
//! whose trailing K columns are the binary labels.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::data::{Dataset, Instance, LabelVector};
use crate::error::{Error, Result};
use crate::io::arff::{parse_arff, ArffRelation};

/// Extracts the label attribute names, in document order, from a Mulan
/// labels XML file (`<labels><label name="..."/>...</labels>`).
///
/// Nested hierarchy labels are returned in the order their tags open.
pub fn parse_labels_xml(text: &str) -> Result<Vec<String>> {
    let mut names = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("<label") {
        let tail = &rest[start + "<label".len()..];
        // Require a real tag boundary so `<labels>` itself does not match.
        if !tail.starts_with(|c: char| c.is_whitespace() || c == '>' || c == '/') {
            rest = &rest[start + "<label".len()..];
            continue;
        }
        let end = tail.find('>').ok_or_else(|| {
            Error::Schema("unterminated <label> tag in labels XML".into())
        })?;
        let tag = &tail[..end];
        if let Some(name) = extract_name_attr(tag) {
            names.push(unescape_xml(name)?);
        }
        rest = &tail[end + 1..];
    }
    if names.is_empty() {
        return Err(Error::Schema("labels XML contains no <label name=\"...\"> entries".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for n in &names {
        if !seen.insert(n) {
            return Err(Error::Schema(format!("label `{n}` appears twice in the labels XML")));
        }
    }
    Ok(names)
}

fn extract_name_attr(tag: &str) -> Option<&str> {
    let pos = tag.find("name")?;
    let after = tag[pos + "name".len()..].trim_start();
    let after = after.strip_prefix('=')?.trim_start();
    let quote = after.chars().next()?;
    if quote != '"' && quote != '\'' {
        return None;
    }
    let inner = &after[1..];
    let close = inner.find(quote)?;
    Some(&inner[..close])
}

fn unescape_xml(s: &str) -> Result<String> {
    if !s.contains('&') {
        return Ok(s.to_string());
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        let end = tail
            .find(';')
            .ok_or_else(|| Error::Schema(format!("unterminated XML entity in `{s}`")))?;
        let entity = &tail[1..end];
        match entity {
            "amp" => out.push('&'),
            "lt" => out.push('<'),
            "gt" => out.push('>'),
            "quot" => out.push('"'),
            "apos" => out.push('\''),
            other => {
                let code = other
                    .strip_prefix("#x")
                    .map(|h| u32::from_str_radix(h, 16))
                    .or_else(|| other.strip_prefix('#').map(|d| d.parse::<u32>()))
                    .transpose()
                    .ok()
                    .flatten()
                    .and_then(char::from_u32)
                    .ok_or_else(|| Error::Schema(format!("unknown XML entity `&{other};`")))?;
                out.push(code);
            }
        }
        rest = &tail[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Loads a Mulan dataset: the XML names the label attributes (their order
/// defines the label components), every other ARFF attribute is a feature.
pub fn load_mulan(arff_path: impl AsRef<Path>, xml_path: impl AsRef<Path>) -> Result<Dataset> {
    load_mulan_multi(&[arff_path.as_ref()], xml_path)
}

/// Like [`load_mulan`] but concatenates the rows of several ARFF files that
/// share one schema (e.g. a published train/test split).
pub fn load_mulan_multi(
    arff_paths: &[impl AsRef<Path>],
    xml_path: impl AsRef<Path>,
) -> Result<Dataset> {
    if arff_paths.is_empty() {
        return Err(Error::Validation("no ARFF files given".into()));
    }
    let xml_text = fs::read_to_string(xml_path.as_ref())?;
    let label_names = parse_labels_xml(&xml_text)?;

    let mut relations: Vec<ArffRelation> = Vec::new();
    for path in arff_paths {
        let text = fs::read_to_string(path.as_ref())?;
        let rel = parse_arff(&text)?;
        if let Some(first) = relations.first() {
            let same = first.attributes.len() == rel.attributes.len()
                && first
                    .attributes
                    .iter()
                    .zip(&rel.attributes)
                    .all(|(a, b)| a.name == b.name && a.kind == b.kind);
            if !same {
                return Err(Error::Schema(format!(
                    "ARFF file {} declares a different attribute schema than the first file",
                    path.as_ref().display()
                )));
            }
        }
        relations.push(rel);
    }

    let attributes = &relations[0].attributes;
    let name_to_index: HashMap<&str, usize> = attributes
        .iter()
        .enumerate()
        .map(|(i, a)| (a.name.as_str(), i))
        .collect();
    let label_indices: Vec<usize> = label_names
        .iter()
        .map(|n| {
            name_to_index.get(n.as_str()).copied().ok_or_else(|| {
                Error::Schema(format!("label `{n}` from the XML is missing in the ARFF attributes"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let is_label: Vec<bool> = {
        let mut v = vec![false; attributes.len()];
        for &i in &label_indices {
            v[i] = true;
        }
        v
    };
    let feature_indices: Vec<usize> = (0..attributes.len()).filter(|&i| !is_label[i]).collect();

    let mut instances = Vec::new();
    for rel in &relations {
        for row in &rel.rows {
            let features: Vec<f64> = feature_indices.iter().map(|&i| row[i]).collect();
            let bits: Vec<u8> = label_indices
                .iter()
                .map(|&i| {
                    let v = row[i];
                    if v == 0.0 {
                        Ok(0u8)
                    } else if v == 1.0 {
                        Ok(1u8)
                    } else {
                        Err(Error::Validation(format!(
                            "label `{}` holds non-binary value {v}",
                            attributes[i].name
                        )))
                    }
                })
                .collect::<Result<Vec<u8>>>()?;
            instances.push(Instance::new(features, LabelVector::new(bits)?));
        }
    }
    Dataset::new(instances)
}

/// Loads a numeric CSV whose last `k` columns are binary labels. A header
/// row is skipped automatically when its first cell is not numeric.
pub fn load_csv(path: impl AsRef<Path>, k: usize) -> Result<Dataset> {
    let text = fs::read_to_string(path.as_ref())?;
    parse_csv_dataset(&text, k)
}

pub(crate) fn parse_csv_dataset(text: &str, k: usize) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::Validation("label count must be at least 1".into()));
    }
    let mut instances = Vec::new();
    let mut width: Option<usize> = None;
    let mut first_content_row = true;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            tokens.iter().map(|t| t.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if first_content_row => {
                // Header row.
                first_content_row = false;
                continue;
            }
            Err(_) => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "row contains a non-numeric value".into(),
                })
            }
        };
        first_content_row = false;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("non-finite value {v}"),
            });
        }
        let w = *width.get_or_insert(values.len());
        if values.len() != w {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("row has {} columns, expected {w}", values.len()),
            });
        }
        if k >= w {
            return Err(Error::Validation(format!(
                "{k} label columns requested but rows have only {w} columns"
            )));
        }
        let (features, label_part) = values.split_at(w - k);
        let bits: Vec<u8> = label_part
            .iter()
            .map(|&v| {
                if v == 0.0 {
                    Ok(0u8)
                } else if v == 1.0 {
                    Ok(1u8)
                } else {
                    Err(Error::Validation(format!(
                        "line {line_no}: trailing label column holds non-binary value {v}"
                    )))
                }
            })
            .collect::<Result<Vec<u8>>>()?;
        instances.push(Instance::new(features.to_vec(), LabelVector::new(bits)?));
    }
    Dataset::new(instances)
}

/// Reads a predictions CSV produced by the CLI: one row of K bits per
/// instance, with an optional header.
pub fn load_predictions_csv(path: impl AsRef<Path>, k: usize) -> Result<Vec<LabelVector>> {
    let text = fs::read_to_string(path.as_ref())?;
    let mut preds = Vec::new();
    let mut first = true;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<u8>, _> = tokens.iter().map(|t| t.parse::<u8>()).collect();
        let bits = match parsed {
            Ok(b) => b,
            Err(_) if first => {
                first = false;
                continue;
            }
            Err(_) => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "prediction row contains a non-integer value".into(),
                })
            }
        };
        first = false;
        if bits.len() != k {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("prediction row has {} columns, expected {k}", bits.len()),
            });
        }
        preds.push(LabelVector::new(bits).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?);
    }
    if preds.is_empty() {
        return Err(Error::Validation("predictions file holds no rows".into()));
    }
    Ok(preds)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY_ARFF: &str = "@relation tiny\n\
        @attribute f1 numeric\n\
        @attribute labelA {0,1}\n\
        @attribute f2 numeric\n\
        @attribute labelB {0,1}\n\
        @data\n\
        0.5,1,2.0,0\n\
        1.5,0,3.0,1\n\
        2.5,1,4.0,1\n";

    const TINY_XML: &str = "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n\
        <labels xmlns=\"http://mulan.sourceforge.net/labels\">\n\
        <label name=\"labelB\"></label>\n\
        <label name=\"labelA\"></label>\n\
        </labels>\n";

    #[test]
    fn xml_label_names_in_document_order() {
        let names = parse_labels_xml(TINY_XML).unwrap();
        assert_eq!(names, vec!["labelB", "labelA"]);
    }

    #[test]
    fn xml_entities_are_unescaped() {
        let xml = "<labels><label name=\"a&amp;b\"/><label name='x &lt;3 &#65;'/></labels>";
        assert_eq!(parse_labels_xml(xml).unwrap(), vec!["a&b", "x <3 A"]);
    }

    #[test]
    fn xml_without_labels_is_a_schema_error() {
        assert!(matches!(
            parse_labels_xml("<labels></labels>"),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            parse_labels_xml("<labels><label name='a'/><label name='a'/></labels>"),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn load_mulan_orders_labels_by_xml() {
        let dir = tempfile::tempdir().unwrap();
        let arff = dir.path().join("tiny.arff");
        let xml = dir.path().join("tiny.xml");
        std::fs::write(&arff, TINY_ARFF).unwrap();
        std::fs::write(&xml, TINY_XML).unwrap();
        let data = load_mulan(&arff, &xml).unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data.num_labels(), 2);
        assert_eq!(data.num_features(), 2);
        // Label order follows the XML: (labelB, labelA).
        assert_eq!(data.instances()[0].label.bits(), &[0, 1]);
        assert_eq!(data.instances()[1].label.bits(), &[1, 0]);
        // Features keep ARFF order: (f1, f2).
        assert_eq!(data.instances()[2].features, vec![2.5, 4.0]);
    }

    #[test]
    fn load_mulan_missing_label_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let arff = dir.path().join("tiny.arff");
        let xml = dir.path().join("tiny.xml");
        std::fs::write(&arff, TINY_ARFF).unwrap();
        std::fs::write(&xml, "<labels><label name=\"nope\"/></labels>").unwrap();
        assert!(matches!(load_mulan(&arff, &xml), Err(Error::Schema(_))));
    }

    #[test]
    fn load_mulan_rejects_non_binary_label_values() {
        let dir = tempfile::tempdir().unwrap();
        let arff = dir.path().join("bad.arff");
        let xml = dir.path().join("bad.xml");
        std::fs::write(
            &arff,
            "@relation r\n@attribute f numeric\n@attribute l numeric\n@data\n1.0,0.5\n",
        )
        .unwrap();
        std::fs::write(&xml, "<labels><label name=\"l\"/></labels>").unwrap();
        assert!(matches!(load_mulan(&arff, &xml), Err(Error::Validation(_))));
    }

    #[test]
    fn load_mulan_multi_concatenates_and_checks_schema() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.arff");
        let b = dir.path().join("b.arff");
        let xml = dir.path().join("l.xml");
        std::fs::write(&a, TINY_ARFF).unwrap();
        std::fs::write(&b, TINY_ARFF).unwrap();
        std::fs::write(&xml, TINY_XML).unwrap();
        let data = load_mulan_multi(&[&a, &b], &xml).unwrap();
        assert_eq!(data.len(), 6);

        let c = dir.path().join("c.arff");
        std::fs::write(&c, "@relation r\n@attribute other numeric\n@data\n1\n").unwrap();
        assert!(matches!(
            load_mulan_multi(&[&a, &c], &xml),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn csv_header_detection_and_shapes() {
        let data = parse_csv_dataset("x,y,l\n1.0,2.0,1\n3.0,4.0,0\n", 1).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.num_features(), 2);
        assert_eq!(data.num_labels(), 1);

        let no_header = parse_csv_dataset("1.0,2.0,1\n", 1).unwrap();
        assert_eq!(no_header.len(), 1);
    }

    #[test]
    fn csv_rejects_bad_label_columns_and_k() {
        assert!(matches!(
            parse_csv_dataset("1.0,2.0,0.5\n", 1),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse_csv_dataset("1.0,2.0\n", 2),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse_csv_dataset("1.0,2.0,1\n", 3),
            Err(Error::Validation(_))
        ));
    }
}
