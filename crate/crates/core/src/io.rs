//! Text artifact formats. Everything is line-oriented UTF-8, written with
//! shortest-round-trip float formatting so equal values produce equal bytes.
//!
//! * tensor: header `p u u nnz`, then one `i<TAB>j<TAB>k` line per entry,
//!   sorted ascending.
//! * matrix: header `rows cols`, then one tab-separated row per line.
//! * labels: `post_index<TAB>real|fake`, one line per labeled post.
//! * id map: `index<TAB>external_id`, one line per index, in order.

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::{ExperimentTable, MetricsRecord};
use crate::ingestion::{CLASS_FAKE, CLASS_REAL};
use crate::matrix::DenseMatrix;
use crate::tensor::SparseTensor3;

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Lines with their 1-based numbers, CR-stripped, blanks and `#` skipped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, raw)| (i + 1, raw.strip_suffix('\r').unwrap_or(raw)))
        .filter(|(_, line)| !line.trim().is_empty() && !line.starts_with('#'))
}

fn parse_fields<T: std::str::FromStr, const N: usize>(
    path: &Path,
    lineno: usize,
    line: &str,
    what: &str,
) -> Result<[T; N]> {
    let mut out = Vec::with_capacity(N);
    for field in line.split_whitespace() {
        let value = field
            .parse::<T>()
            .map_err(|_| parse_error(path, lineno, format!("expected {what}, got {field:?}")))?;
        out.push(value);
    }
    out.try_into()
        .map_err(|_| parse_error(path, lineno, format!("expected {N} fields")))
}

pub fn write_tensor(path: &Path, t: &SparseTensor3) -> Result<()> {
    let (p, u, _) = t.dims();
    let mut out = String::new();
    let _ = writeln!(out, "{p} {u} {u} {}", t.entry_count());
    for &(i, j, k) in t.entries() {
        let _ = writeln!(out, "{i}\t{j}\t{k}");
    }
    write_file(path, &out)
}

pub fn read_tensor(path: &Path) -> Result<SparseTensor3> {
    let text = read_file(path)?;
    let mut lines = content_lines(&text);
    let (lineno, header) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, "missing tensor header"))?;
    let [p, u1, u2, nnz] = parse_fields::<usize, 4>(path, lineno, header, "an integer")?;
    if u1 != u2 {
        return Err(parse_error(
            path,
            lineno,
            format!("user dims differ: {u1} vs {u2}"),
        ));
    }
    let mut entries = Vec::with_capacity(nnz);
    for (lineno, line) in lines {
        let [i, j, k] = parse_fields::<usize, 3>(path, lineno, line, "an integer")?;
        if i >= p || j >= u1 || k >= u1 {
            return Err(parse_error(path, lineno, "entry out of declared bounds"));
        }
        entries.push((i, j, k));
    }
    if entries.len() != nnz {
        return Err(parse_error(
            path,
            1,
            format!("header declares {nnz} entries, found {}", entries.len()),
        ));
    }
    SparseTensor3::new(p, u1, entries)
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", m.rows(), m.cols());
    for row in 0..m.rows() {
        let line: Vec<String> = m.row(row).iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "{}", line.join("\t"));
    }
    write_file(path, &out)
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let text = read_file(path)?;
    let mut lines = content_lines(&text);
    let (lineno, header) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, "missing matrix header"))?;
    let [rows, cols] = parse_fields::<usize, 2>(path, lineno, header, "an integer")?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0usize;
    for (lineno, line) in lines {
        let mut width = 0usize;
        for field in line.split_whitespace() {
            let value: f64 = field.parse().map_err(|_| {
                parse_error(path, lineno, format!("expected a float, got {field:?}"))
            })?;
            data.push(value);
            width += 1;
        }
        if width != cols {
            return Err(parse_error(
                path,
                lineno,
                format!("expected {cols} columns, found {width}"),
            ));
        }
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(parse_error(
            path,
            1,
            format!("header declares {rows} rows, found {seen_rows}"),
        ));
    }
    DenseMatrix::from_vec(rows, cols, data)
}

fn label_token(class: usize) -> &'static str {
    if class == CLASS_FAKE {
        "fake"
    } else {
        "real"
    }
}

/// Writes labeled posts by internal index, one `index<TAB>real|fake` line.
pub fn write_labels(path: &Path, labels: &[Option<usize>]) -> Result<()> {
    let mut out = String::new();
    for (i, class) in labels.iter().enumerate() {
        if let Some(class) = class {
            let _ = writeln!(out, "{i}\t{}", label_token(*class));
        }
    }
    write_file(path, &out)
}

/// Reads indexed labels back into a `post_count`-sized option list.
pub fn read_labels(path: &Path, post_count: usize) -> Result<Vec<Option<usize>>> {
    let text = read_file(path)?;
    let mut labels = vec![None; post_count];
    for (lineno, line) in content_lines(&text) {
        let mut fields = line.split('\t');
        let (idx, token) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(parse_error(path, lineno, "expected `index<TAB>label`")),
        };
        let idx: usize = idx
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("bad post index {idx:?}")))?;
        if idx >= post_count {
            return Err(parse_error(
                path,
                lineno,
                format!("post index {idx} out of range for {post_count} posts"),
            ));
        }
        let class = match token {
            "real" => CLASS_REAL,
            "fake" => CLASS_FAKE,
            other => {
                return Err(parse_error(
                    path,
                    lineno,
                    format!("unknown label {other:?}, expected \"real\" or \"fake\""),
                ))
            }
        };
        if labels[idx].replace(class).is_some() {
            return Err(parse_error(
                path,
                lineno,
                format!("duplicate post index {idx}"),
            ));
        }
    }
    Ok(labels)
}

pub fn write_id_map(path: &Path, ids: &[String]) -> Result<()> {
    let mut out = String::new();
    for (idx, id) in ids.iter().enumerate() {
        let _ = writeln!(out, "{idx}\t{id}");
    }
    write_file(path, &out)
}

pub fn read_id_map(path: &Path) -> Result<Vec<String>> {
    let text = read_file(path)?;
    let mut ids = Vec::new();
    for (lineno, line) in content_lines(&text) {
        let mut fields = line.split('\t');
        let (idx, id) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) if !b.is_empty() => (a, b),
            _ => return Err(parse_error(path, lineno, "expected `index<TAB>id`")),
        };
        let idx: usize = idx
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("bad index {idx:?}")))?;
        if idx != ids.len() {
            return Err(parse_error(
                path,
                lineno,
                format!("expected index {} in order, got {idx}", ids.len()),
            ));
        }
        ids.push(id.to_string());
    }
    Ok(ids)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
    write_file(path, &format!("{body}\n"))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| parse_error(path, e.line(), e.to_string()))
}

fn metrics_rows(out: &mut String, method: &str, record: &MetricsRecord, seeds: &[u64]) {
    for (repeat, m) in record.per_repeat.iter().enumerate() {
        let _ = writeln!(
            out,
            "{method}\t{}\t{}\t{}\t{}\t{}",
            seeds[repeat], m.accuracy, m.precision, m.recall, m.f1
        );
    }
    let _ = writeln!(
        out,
        "{method}\tmean\t{}\t{}\t{}\t{}",
        record.mean.accuracy, record.mean.precision, record.mean.recall, record.mean.f1
    );
    let _ = writeln!(
        out,
        "{method}\tstd\t{}\t{}\t{}\t{}",
        record.std.accuracy, record.std.precision, record.std.recall, record.std.f1
    );
}

/// Per-repeat and aggregate metrics as a flat table, one block per method.
pub fn write_experiment_tsv(path: &Path, table: &ExperimentTable) -> Result<()> {
    let mut out = String::from("method\tseed\taccuracy\tprecision\trecall\tf1\n");
    metrics_rows(&mut out, "class_cp", &table.class_cp, &table.seeds);
    metrics_rows(&mut out, "cp_knn", &table.cp_knn, &table.seeds);
    metrics_rows(&mut out, "raw_centroid", &table.raw_centroid, &table.seeds);
    write_file(path, &out)
}

/// Mean and spread per labeled fraction and method.
pub fn write_learning_curve_tsv(path: &Path, points: &[(f64, ExperimentTable)]) -> Result<()> {
    let mut out = String::from("fraction\tmethod\taccuracy_mean\taccuracy_std\tf1_mean\tf1_std\n");
    for (fraction, table) in points {
        for (method, record) in [
            ("class_cp", &table.class_cp),
            ("cp_knn", &table.cp_knn),
            ("raw_centroid", &table.raw_centroid),
        ] {
            let _ = writeln!(
                out,
                "{fraction}\t{method}\t{}\t{}\t{}\t{}",
                record.mean.accuracy, record.std.accuracy, record.mean.f1, record.std.f1
            );
        }
    }
    write_file(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::{FitConfig, FitReport, IterationRecord};

    #[test]
    fn tensor_round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsv");
        let t = SparseTensor3::new(3, 4, vec![(0, 1, 2), (2, 3, 3), (1, 0, 0)]).unwrap();
        write_tensor(&path, &t).unwrap();
        assert_eq!(read_tensor(&path).unwrap(), t);
    }

    #[test]
    fn tensor_read_validates_header_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsv");
        std::fs::write(&path, "2 3 4 0\n").unwrap();
        assert!(read_tensor(&path).is_err());
        std::fs::write(&path, "2 3 3 2\n0\t0\t0\n").unwrap();
        assert!(read_tensor(&path).is_err());
        std::fs::write(&path, "2 3 3 1\n0\t9\t0\n").unwrap();
        assert!(read_tensor(&path).is_err());
    }

    #[test]
    fn matrix_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        let values = vec![0.1 + 0.2, -1.0 / 3.0, 1e-300, -4.9e15, 0.0, 1.0];
        let m = DenseMatrix::from_vec(2, 3, values.clone()).unwrap();
        write_matrix(&path, &m).unwrap();
        let back = read_matrix(&path).unwrap();
        for (a, b) in back.values().iter().zip(&values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn matrix_read_rejects_ragged_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        std::fs::write(&path, "2 2\n1\t2\n3\n").unwrap();
        assert!(read_matrix(&path).is_err());
        std::fs::write(&path, "3 1\n1\n2\n").unwrap();
        assert!(read_matrix(&path).is_err());
    }

    #[test]
    fn labels_round_trip_skips_unlabeled() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.tsv");
        let labels = vec![Some(CLASS_REAL), None, Some(CLASS_FAKE)];
        write_labels(&path, &labels).unwrap();
        assert_eq!(read_labels(&path, 3).unwrap(), labels);
        assert!(read_labels(&path, 2).is_err());
    }

    #[test]
    fn id_map_round_trip_enforces_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ids.tsv");
        let ids = vec!["alpha".to_string(), "beta".to_string()];
        write_id_map(&path, &ids).unwrap();
        assert_eq!(read_id_map(&path).unwrap(), ids);
        std::fs::write(&path, "1\talpha\n").unwrap();
        assert!(read_id_map(&path).is_err());
    }

    #[test]
    fn json_round_trip_for_reports() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        let report = FitReport {
            records: vec![IterationRecord {
                f_value: 1.5,
                g_value: 0.25,
                relative_change: 0.1,
            }],
            converged: true,
            iterations_run: 1,
            final_objective: 1.75,
            initial_f: 2.0,
            initial_g: 0.5,
        };
        write_json(&path, &report).unwrap();
        let back: FitReport = read_json(&path).unwrap();
        assert_eq!(back, report);
        let cfg_path = dir.path().join("cfg.json");
        write_json(&cfg_path, &FitConfig::default()).unwrap();
        let cfg: FitConfig = read_json(&cfg_path).unwrap();
        assert_eq!(cfg, FitConfig::default());
    }
}
