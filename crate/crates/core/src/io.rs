//! Embedding files: a `node f_1..f_K fhat_1..fhat_K` header followed by
//! one tab-separated row per node. Floats use Rust's shortest round-trip
//! formatting, so writing is deterministic and reading is lossless.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::solver::EmbeddingPair;

pub fn write_embedding(
    path: impl AsRef<Path>,
    node_ids: &[String],
    pair: &EmbeddingPair,
) -> Result<()> {
    let path = path.as_ref();
    if node_ids.len() != pair.n() {
        return Err(Error::param(format!(
            "{} node ids for {} embedding rows",
            node_ids.len(),
            pair.n()
        )));
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let k = pair.dim();
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        write!(out, "node")?;
        for c in 1..=k {
            write!(out, "\tf_{c}")?;
        }
        for c in 1..=k {
            write!(out, "\tfhat_{c}")?;
        }
        writeln!(out)?;
        for (i, id) in node_ids.iter().enumerate() {
            write!(out, "{id}")?;
            for c in 0..k {
                write!(out, "\t{}", pair.f[(i, c)])?;
            }
            for c in 0..k {
                write!(out, "\t{}", pair.f_hat[(i, c)])?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

/// Node ids and the `n x 2K` feature matrix `[F | F_hat]` of an embedding
/// file.
pub fn read_embedding(path: impl AsRef<Path>) -> Result<(Vec<String>, DMatrix<f64>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header".into()))?;
    let width = header.split('\t').count() - 1;
    if width == 0 || width % 2 != 0 || !header.starts_with("node\t") {
        return Err(parse_err(
            1,
            "header must be `node<TAB>f_1..f_K<TAB>fhat_1..fhat_K`".into(),
        ));
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (ln, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        ids.push(fields.next().unwrap_or_default().to_string());
        let before = values.len();
        for f in fields {
            values.push(
                f.parse::<f64>()
                    .map_err(|_| parse_err(ln + 1, format!("`{f}` is not a number")))?,
            );
        }
        if values.len() - before != width {
            return Err(parse_err(
                ln + 1,
                format!("expected {width} values, found {}", values.len() - before),
            ));
        }
    }
    Ok((
        ids.clone(),
        DMatrix::from_row_slice(ids.len(), width, &values),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let pair = EmbeddingPair {
            f: DMatrix::from_row_slice(2, 2, &[0.1, -1.0 / 3.0, 1e-300, 5.0]),
            f_hat: DMatrix::from_row_slice(2, 2, &[std::f64::consts::PI, 0.0, -2.5, 1e20]),
            singular_values: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.tsv");
        let ids = vec!["x".to_string(), "y".to_string()];
        write_embedding(&path, &ids, &pair).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("node\tf_1\tf_2\tfhat_1\tfhat_2\n"));
        let (read_ids, features) = read_embedding(&path).unwrap();
        assert_eq!(read_ids, ids);
        assert_eq!(features, pair.features());
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.tsv");
        fs::write(&path, "node\tf_1\tfhat_1\na\t1\n").unwrap();
        assert!(matches!(
            read_embedding(&path),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
