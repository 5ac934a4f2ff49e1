//! Benchmark annotation files and OCR layout input.
//!
//! Annotation lines are `word x0 y0 x1 y1 x2 y2 x3 y3 font class`, with the
//! word as a single whitespace-free token and coordinates written with two
//! decimals.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, GeometryError, OrientedQuad};

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("line {line}: expected 11 whitespace-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: coordinate {field} is not a finite number: {value:?}")]
    BadCoordinate { line: usize, field: usize, value: String },
    #[error("annotation file is not valid UTF-8")]
    Utf8(#[from] std::str::Utf8Error),
    #[error("record {index}: field {field} must be a single non-empty token without whitespace, got {value:?}")]
    BadToken { index: usize, field: &'static str, value: String },
    #[error("record {index}: non-finite coordinate")]
    NonFinite { index: usize },
}

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("OCR layout is not a JSON array of word records: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("OCR word {index}: {source}")]
    BadBox { index: usize, source: GeometryError },
    #[error("OCR word {index}: confidence {value} outside [0, 1]")]
    BadConfidence { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordAnnotation {
    pub text: String,
    pub quad: OrientedQuad,
    pub font: String,
    pub class_label: String,
}

impl WordAnnotation {
    pub fn bbox(&self) -> Aabb {
        self.quad.bounding_box()
    }
}

pub fn parse_annotation_file(bytes: &[u8]) -> Result<Vec<WordAnnotation>, AnnotationError> {
    let text = std::str::from_utf8(bytes)?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 11 {
            return Err(AnnotationError::FieldCount { line, found: fields.len() });
        }
        let mut coords = [0.0f64; 8];
        for (k, slot) in coords.iter_mut().enumerate() {
            let tok = fields[1 + k];
            *slot = tok
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| AnnotationError::BadCoordinate {
                    line,
                    field: k,
                    value: tok.to_string(),
                })?;
        }
        out.push(WordAnnotation {
            text: fields[0].to_string(),
            quad: OrientedQuad::from_flat(coords),
            font: fields[9].to_string(),
            class_label: fields[10].to_string(),
        });
    }
    Ok(out)
}

fn check_token(index: usize, field: &'static str, value: &str) -> Result<(), AnnotationError> {
    if value.is_empty() || value.chars().any(char::is_whitespace) {
        return Err(AnnotationError::BadToken { index, field, value: value.to_string() });
    }
    Ok(())
}

pub fn serialize_annotations(words: &[WordAnnotation]) -> Result<Vec<u8>, AnnotationError> {
    let mut out = String::new();
    for (index, w) in words.iter().enumerate() {
        check_token(index, "word", &w.text)?;
        check_token(index, "font", &w.font)?;
        check_token(index, "class", &w.class_label)?;
        out.push_str(&w.text);
        for v in w.quad.to_flat() {
            if !v.is_finite() {
                return Err(AnnotationError::NonFinite { index });
            }
            let formatted = format!("{v:.2}");
            out.push(' ');
            out.push_str(if formatted == "-0.00" { "0.00" } else { &formatted });
        }
        writeln!(out, " {} {}", w.font, w.class_label).unwrap();
    }
    Ok(out.into_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrWord {
    pub text: String,
    #[serde(rename = "box", with = "box_array")]
    pub bbox: Aabb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl OcrWord {
    pub fn new(text: impl Into<String>, bbox: Aabb) -> Self {
        Self { text: text.into(), bbox, confidence: None }
    }
}

/// Serializes an [`Aabb`] as `[x1, y1, x2, y2]` without validation; callers
/// validate after decoding so errors can name the record.
pub(crate) mod box_array {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::geometry::Aabb;

    pub fn serialize<S: Serializer>(b: &Aabb, s: S) -> Result<S::Ok, S::Error> {
        b.to_array().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Aabb, D::Error> {
        let [x1, y1, x2, y2] = <[f64; 4]>::deserialize(d)?;
        Ok(Aabb { x1, y1, x2, y2 })
    }
}

pub fn load_ocr_layout(bytes: &[u8]) -> Result<Vec<OcrWord>, LayoutError> {
    let words: Vec<OcrWord> = serde_json::from_slice(bytes)?;
    for (index, w) in words.iter().enumerate() {
        let b = w.bbox;
        Aabb::new(b.x1, b.y1, b.x2, b.y2).map_err(|source| LayoutError::BadBox { index, source })?;
        if let Some(c) = w.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(LayoutError::BadConfidence { index, value: c });
            }
        }
    }
    Ok(words)
}
