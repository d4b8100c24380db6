//! Plain-text artifact formats: codebooks, class models and feature sets.
//!
//! Every file starts with a self-describing header line. Floats are written
//! with 17 significant digits so a write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use raqsim_core::fuse::ClassModel;
use raqsim_core::quantize::{Codebook, LatentFeature};

use crate::error::{Result, SimError};

fn push_row(out: &mut String, row: &[f64]) {
    for (i, x) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{x:.16e}").unwrap();
    }
    out.push('\n');
}

/// Parses `NAME v1 K=V ...` (or bare positional values) into `keys` order.
fn parse_header<const N: usize>(
    what: &'static str,
    line: Option<&str>,
    magic: &str,
    keys: [&str; N],
) -> Result<[String; N]> {
    let line = line.ok_or_else(|| SimError::parse(what, 1, "empty file"))?;
    let mut tok = line.split_whitespace();
    if tok.next() != Some(magic) || tok.next() != Some("v1") {
        return Err(SimError::parse(
            what,
            1,
            format!("expected `{magic} v1` header"),
        ));
    }
    let rest: Vec<&str> = tok.collect();
    if rest.len() != N {
        return Err(SimError::parse(
            what,
            1,
            format!("expected {N} header fields"),
        ));
    }
    let mut out: [String; N] = std::array::from_fn(|_| String::new());
    for (i, t) in rest.iter().enumerate() {
        out[i] = match t.split_once('=') {
            Some((k, v)) if k == keys[i] => v.to_string(),
            Some((k, _)) => {
                return Err(SimError::parse(
                    what,
                    1,
                    format!("unexpected header key `{k}`"),
                ))
            }
            None => t.to_string(),
        };
    }
    Ok(out)
}

fn header_usize(what: &'static str, s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| SimError::parse(what, 1, format!("bad integer `{s}`")))
}

fn parse_floats(what: &'static str, line_no: usize, line: &str, expect: usize) -> Result<Vec<f64>> {
    let row = line
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| SimError::parse(what, line_no, format!("bad float `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if row.len() != expect {
        return Err(SimError::parse(
            what,
            line_no,
            format!("expected {expect} values, found {}", row.len()),
        ));
    }
    Ok(row)
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn codebook_to_string(cb: &Codebook) -> String {
    let mut out = format!("CODEBOOK v1 J={} D={}\n", cb.size(), cb.dim());
    for cw in cb.codewords() {
        push_row(&mut out, cw);
    }
    out
}

pub fn codebook_from_str(text: &str) -> Result<Codebook> {
    const WHAT: &str = "codebook";
    let [j, d] = parse_header(WHAT, text.lines().next(), "CODEBOOK", ["J", "D"])?;
    let (j, d) = (header_usize(WHAT, &j)?, header_usize(WHAT, &d)?);
    let mut data = Vec::with_capacity(j * d);
    let mut rows = 0;
    for (n, line) in data_lines(text) {
        data.extend(parse_floats(WHAT, n, line, d)?);
        rows += 1;
    }
    if rows != j {
        return Err(SimError::parse(
            WHAT,
            1,
            format!("header says J={j}, found {rows} rows"),
        ));
    }
    Ok(Codebook::from_flat(d, data)?)
}

pub fn class_model_to_string(model: &ClassModel) -> String {
    let mut out = format!(
        "CLASSMODEL v1 C={} M={} D={} TAU={:.16e}\n",
        model.num_classes(),
        model.num_subvectors(),
        model.dim(),
        model.temperature()
    );
    for c in model.centroids() {
        push_row(&mut out, c.as_flat());
    }
    out
}

pub fn class_model_from_str(text: &str) -> Result<ClassModel> {
    const WHAT: &str = "class model";
    let [c, m, d, tau] = parse_header(
        WHAT,
        text.lines().next(),
        "CLASSMODEL",
        ["C", "M", "D", "TAU"],
    )?;
    let (c, m, d) = (
        header_usize(WHAT, &c)?,
        header_usize(WHAT, &m)?,
        header_usize(WHAT, &d)?,
    );
    let tau: f64 = tau
        .parse()
        .map_err(|_| SimError::parse(WHAT, 1, format!("bad temperature `{tau}`")))?;
    let centroids = data_lines(text)
        .map(|(n, line)| {
            Ok(LatentFeature::from_flat(
                d,
                parse_floats(WHAT, n, line, m * d)?,
            )?)
        })
        .collect::<Result<Vec<_>>>()?;
    if centroids.len() != c {
        return Err(SimError::parse(
            WHAT,
            1,
            format!("header says C={c}, found {} rows", centroids.len()),
        ));
    }
    Ok(ClassModel::new(centroids, tau)?)
}

/// Per-view latent features of one object.
pub fn features_to_string(views: &[LatentFeature]) -> Result<String> {
    let first = views
        .first()
        .ok_or_else(|| SimError::Dataset("no views to write".into()))?;
    if views.iter().any(|v| !v.same_shape(first)) {
        return Err(SimError::Dataset("views differ in shape".into()));
    }
    let mut out = format!(
        "FEATURES v1 K={} M={} D={}\n",
        views.len(),
        first.num_subvectors(),
        first.dim()
    );
    for v in views {
        for sv in v.subvectors() {
            push_row(&mut out, sv);
        }
    }
    Ok(out)
}

/// Reads `K·M·D` whitespace-separated floats after the header; line breaks
/// are not significant.
pub fn features_from_str(text: &str) -> Result<Vec<LatentFeature>> {
    const WHAT: &str = "features";
    let [k, m, d] = parse_header(WHAT, text.lines().next(), "FEATURES", ["K", "M", "D"])?;
    let (k, m, d) = (
        header_usize(WHAT, &k)?,
        header_usize(WHAT, &m)?,
        header_usize(WHAT, &d)?,
    );
    let mut values = Vec::with_capacity(k * m * d);
    for (n, line) in data_lines(text) {
        for t in line.split_whitespace() {
            values.push(
                t.parse::<f64>()
                    .map_err(|_| SimError::parse(WHAT, n, format!("bad float `{t}`")))?,
            );
        }
    }
    if values.len() != k * m * d {
        return Err(SimError::parse(
            WHAT,
            1,
            format!("expected {} values, found {}", k * m * d, values.len()),
        ));
    }
    values
        .chunks_exact((m * d).max(1))
        .take(k)
        .map(|chunk| Ok(LatentFeature::from_flat(d, chunk.to_vec())?))
        .collect()
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| SimError::io(path, e))
}

pub fn read_codebook(path: &Path) -> Result<Codebook> {
    codebook_from_str(&read_text(path)?)
}

pub fn write_codebook(path: &Path, cb: &Codebook) -> Result<()> {
    write_text(path, &codebook_to_string(cb))
}

pub fn read_class_model(path: &Path) -> Result<ClassModel> {
    class_model_from_str(&read_text(path)?)
}

pub fn write_class_model(path: &Path, model: &ClassModel) -> Result<()> {
    write_text(path, &class_model_to_string(model))
}

pub fn read_features(path: &Path) -> Result<Vec<LatentFeature>> {
    features_from_str(&read_text(path)?)
}
