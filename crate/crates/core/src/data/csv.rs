//! CSV ingestion of precomputed per-sample feature vectors.
//!
//! Every file starts with a header row; the header's column count declares the
//! feature width. Row `i` of each file refers to the same sample. Labels are
//! class indices, or class names when a name list is supplied.

use std::path::{Path, PathBuf};

use super::MultimodalDataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum CsvSources {
    /// Separate files per view plus a single-column label file.
    Separate {
        image_path: PathBuf,
        audio_path: PathBuf,
        label_path: PathBuf,
    },
    /// One file with columns `label, img_*…, aud_*…`; the column prefixes
    /// decide which view a column belongs to.
    Combined { combined_path: PathBuf },
}

struct Table {
    name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let name = path.display().to_string();
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(::csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: name.clone(),
            message: e.to_string(),
        })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(&name, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(String::is_empty) {
        return Err(Error::EmptyDataset(name));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&name, e))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset(name));
    }
    Ok(Table { name, header, rows })
}

fn csv_error(name: &str, e: ::csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.kind() {
        ::csv::ErrorKind::Io(_) => Error::Io {
            path: name.to_string(),
            message: e.to_string(),
        },
        _ => Error::Parse {
            file: name.to_string(),
            row,
            message: e.to_string(),
        },
    }
}

/// Line number of data row `i` (the header is line 1).
fn line(i: usize) -> usize {
    i + 2
}

fn numeric(table: &Table, columns: &[usize]) -> Result<Tensor> {
    let mut data = Vec::with_capacity(table.rows.len() * columns.len());
    for (i, row) in table.rows.iter().enumerate() {
        for &c in columns {
            let cell = &row[c];
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                file: table.name.clone(),
                row: line(i),
                message: format!("non-numeric cell `{cell}` in column `{}`", table.header[c]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    file: table.name.clone(),
                    row: line(i),
                    message: format!("non-finite value in column `{}`", table.header[c]),
                });
            }
            data.push(v);
        }
    }
    Tensor::new(vec![table.rows.len(), columns.len()], data)
}

fn labels(table: &Table, column: usize, class_count: usize, names: Option<&[String]>) -> Result<Vec<usize>> {
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let cell = row[column].as_str();
            let found = match names {
                Some(names) => names.iter().position(|n| n == cell),
                None => cell.parse::<usize>().ok().filter(|&c| c < class_count),
            };
            found.ok_or_else(|| Error::Parse {
                file: table.name.clone(),
                row: line(i),
                message: format!("unknown label `{cell}`"),
            })
        })
        .collect()
}

fn check_aligned(a: &Table, b: &Table) -> Result<()> {
    if a.rows.len() != b.rows.len() {
        return Err(Error::Alignment {
            left_name: a.name.clone(),
            left: a.rows.len(),
            right_name: b.name.clone(),
            right: b.rows.len(),
        });
    }
    Ok(())
}

/// Loads an aligned dataset. With `class_names`, label cells are matched by
/// name and the class count is the list's length.
pub fn load_csv_features(
    sources: &CsvSources,
    class_count: usize,
    class_names: Option<&[String]>,
) -> Result<MultimodalDataset> {
    let class_count = class_names.map_or(class_count, <[String]>::len);
    match sources {
        CsvSources::Separate {
            image_path,
            audio_path,
            label_path,
        } => {
            let img = read_table(image_path)?;
            let aud = read_table(audio_path)?;
            let lab = read_table(label_path)?;
            check_aligned(&img, &aud)?;
            check_aligned(&img, &lab)?;
            let images = numeric(&img, &(0..img.header.len()).collect::<Vec<_>>())?;
            let audios = numeric(&aud, &(0..aud.header.len()).collect::<Vec<_>>())?;
            let labels = labels(&lab, 0, class_count, class_names)?;
            MultimodalDataset::new(images, audios, labels, class_count)
        }
        CsvSources::Combined { combined_path } => {
            let table = read_table(combined_path)?;
            let label_col = table
                .header
                .iter()
                .position(|h| h == "label")
                .ok_or_else(|| Error::Parse {
                    file: table.name.clone(),
                    row: 1,
                    message: "missing `label` column".into(),
                })?;
            let cols = |prefix: &str| -> Vec<usize> {
                (0..table.header.len())
                    .filter(|&c| table.header[c].starts_with(prefix))
                    .collect()
            };
            let (img_cols, aud_cols) = (cols("img"), cols("aud"));
            if img_cols.is_empty() || aud_cols.is_empty() {
                return Err(Error::Parse {
                    file: table.name.clone(),
                    row: 1,
                    message: "header needs `img*` and `aud*` columns".into(),
                });
            }
            let images = numeric(&table, &img_cols)?;
            let audios = numeric(&table, &aud_cols)?;
            let labels = labels(&table, label_col, class_count, class_names)?;
            MultimodalDataset::new(images, audios, labels, class_count)
        }
    }
}
