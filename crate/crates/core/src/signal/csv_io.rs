use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_interval, AnnotatedSeries, Annotation};
use crate::error::{Error, Result};

/// Column layout of a series CSV file.
///
/// With a header row the columns are located by name (`value`, `ann_start`,
/// `ann_end`, `ann_label`). Without one, a single-column file is read as bare
/// values and wider files follow `index,value,ann_start,ann_end,ann_label`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvFormat {
    pub sample_rate: f64,
    /// `None` detects a header by checking whether the first row parses.
    pub has_header: Option<bool>,
    /// Overrides the detected value column (0-based).
    pub value_column: Option<usize>,
}

impl CsvFormat {
    pub fn with_rate(sample_rate: f64) -> Self {
        Self {
            sample_rate,
            has_header: None,
            value_column: None,
        }
    }
}

#[derive(Debug, Default)]
struct Columns {
    value: usize,
    ann: Option<(usize, usize, usize)>,
}

fn columns_from_header(header: &csv::StringRecord) -> Result<Columns> {
    let find = |name: &str| header.iter().position(|h| h.trim() == name);
    let value = find("value").ok_or_else(|| Error::Csv {
        row: 1,
        msg: "header has no 'value' column".into(),
    })?;
    let ann = match (find("ann_start"), find("ann_end"), find("ann_label")) {
        (Some(s), Some(e), Some(l)) => Some((s, e, l)),
        (None, None, None) => None,
        _ => {
            return Err(Error::Csv {
                row: 1,
                msg: "annotation columns must come as ann_start,ann_end,ann_label".into(),
            })
        }
    };
    Ok(Columns { value, ann })
}

fn positional_columns(width: usize) -> Columns {
    match width {
        0 | 1 => Columns { value: 0, ann: None },
        2..=4 => Columns { value: 1, ann: None },
        _ => Columns {
            value: 1,
            ann: Some((2, 3, 4)),
        },
    }
}

/// Reads a series from CSV. Row numbers in errors are 1-based file lines.
pub fn load_csv(path: impl AsRef<Path>, format: &CsvFormat) -> Result<AnnotatedSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut records = reader.records().peekable();
    let mut row = 0usize;
    let first = match records.peek() {
        Some(Ok(r)) => Some(r.clone()),
        Some(Err(e)) => {
            return Err(Error::Csv {
                row: 1,
                msg: e.to_string(),
            })
        }
        None => None,
    };
    let header = match (format.has_header, &first) {
        (Some(h), _) => h,
        (None, Some(r)) => {
            let probe = if r.len() > 1 { 1 } else { 0 };
            r.get(probe).is_some_and(|f| f.parse::<f64>().is_err())
        }
        (None, None) => false,
    };
    let mut cols = if header {
        let h = records.next().expect("peeked").map_err(|e| Error::Csv {
            row: 1,
            msg: e.to_string(),
        })?;
        row += 1;
        columns_from_header(&h)?
    } else {
        positional_columns(first.as_ref().map_or(1, |r| r.len()))
    };
    if let Some(v) = format.value_column {
        cols.value = v;
    }

    let mut samples = Vec::new();
    let mut pending: Vec<(usize, Annotation)> = Vec::new();
    for rec in records {
        row += 1;
        let rec = rec.map_err(|e| Error::Csv {
            row,
            msg: e.to_string(),
        })?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let cell = rec.get(cols.value).ok_or_else(|| Error::Csv {
            row,
            msg: format!("missing value column {}", cols.value),
        })?;
        let v: f64 = cell.parse().map_err(|_| Error::Csv {
            row,
            msg: format!("non-numeric value '{cell}'"),
        })?;
        samples.push(v);

        if let Some((s, e, l)) = cols.ann {
            let start = rec.get(s).unwrap_or("");
            let end = rec.get(e).unwrap_or("");
            if start.is_empty() && end.is_empty() {
                continue;
            }
            let parse = |f: &str, what: &str| {
                f.parse::<usize>().map_err(|_| Error::Csv {
                    row,
                    msg: format!("invalid {what} '{f}'"),
                })
            };
            let (start, end) = (parse(start, "ann_start")?, parse(end, "ann_end")?);
            if end < start {
                return Err(Error::Csv {
                    row,
                    msg: format!("interval end before start at row {row}"),
                });
            }
            let label = rec.get(l).unwrap_or("").to_string();
            pending.push((row, Annotation::new(start, end, label)));
        }
    }

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut series = AnnotatedSeries::new(name, samples, format.sample_rate)?;
    for (row, ann) in pending {
        check_interval(ann.start, ann.end, series.len()).map_err(|e| Error::Csv {
            row,
            msg: e.to_string(),
        })?;
        series.add_annotation(ann).map_err(|e| Error::Csv {
            row,
            msg: e.to_string(),
        })?;
    }
    Ok(series)
}

/// Writes the canonical `index,value,ann_start,ann_end,ann_label` layout.
/// Annotations occupy the annotation columns of the first rows.
pub fn save_csv(series: &AnnotatedSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(series.len() * 24);
    out.push_str("index,value,ann_start,ann_end,ann_label\n");
    for (i, v) in series.samples.iter().enumerate() {
        match series.annotations.get(i) {
            Some(a) => out.push_str(&format!(
                "{i},{v:?},{},{},{}\n",
                a.start, a.end, a.label
            )),
            None => out.push_str(&format!("{i},{v:?},,,\n")),
        }
    }
    if series.annotations.len() > series.len() {
        return Err(Error::Annotation(
            "more annotations than rows; cannot serialize".into(),
        ));
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
struct Sidecar {
    sample_rate: f64,
}

/// Reads `{ "sample_rate": <real> }` from the `.json` file next to `csv_path`.
pub fn read_sidecar_sample_rate(csv_path: impl AsRef<Path>) -> Result<Option<f64>> {
    let side = csv_path.as_ref().with_extension("json");
    if !side.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let s: Sidecar = serde_json::from_str(&text)?;
    Ok(Some(s.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn bare_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "0.0\n1.0\n0.0");
        let s = load_csv(&p, &CsvFormat::with_rate(360.0)).unwrap();
        assert_eq!(s.samples, vec![0.0, 1.0, 0.0]);
        assert!(s.annotations.is_empty());
        assert_eq!(s.sample_rate, 360.0);
        assert_eq!(s.name, "a");
    }

    #[test]
    fn annotation_row_parsed() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("index,value,ann_start,ann_end,ann_label\n");
        for i in 0..300 {
            if i == 0 {
                body.push_str("0,0.5,100,200,AFIB\n");
            } else {
                body.push_str(&format!("{i},0.5,,,\n"));
            }
        }
        let p = write(&dir, "b.csv", &body);
        let s = load_csv(&p, &CsvFormat::with_rate(360.0)).unwrap();
        assert_eq!(s.annotations, vec![Annotation::new(100, 200, "AFIB")]);
        assert_eq!(s.len(), 300);
    }

    #[test]
    fn reversed_interval_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("index,value,ann_start,ann_end,ann_label\n0,1.0,,,\n");
        body.push_str("1,1.0,500,400,X\n");
        let p = write(&dir, "c.csv", &body);
        let err = load_csv(&p, &CsvFormat::with_rate(1.0)).unwrap_err();
        assert!(
            err.to_string().contains("interval end before start at row 3"),
            "{err}"
        );
    }

    #[test]
    fn non_numeric_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "index,value\n0,1.0\n1,abc\n");
        let err = load_csv(&p, &CsvFormat::with_rate(1.0)).unwrap_err();
        match err {
            Error::Csv { row, .. } => assert_eq!(row, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn out_of_bounds_annotation() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "e.csv",
            "index,value,ann_start,ann_end,ann_label\n0,1,0,5,X\n1,2,,,\n",
        );
        assert!(load_csv(&p, &CsvFormat::with_rate(1.0)).is_err());
    }

    #[test]
    fn missing_file() {
        let err = load_csv("/nonexistent/x.csv", &CsvFormat::with_rate(1.0)).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn sidecar_rate() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "f.csv", "1\n2\n");
        assert_eq!(read_sidecar_sample_rate(&p).unwrap(), None);
        write(&dir, "f.json", r#"{ "sample_rate": 250.0 }"#);
        assert_eq!(read_sidecar_sample_rate(&p).unwrap(), Some(250.0));
    }
}
