//! CSV grid files: row-major, one grid row per line, comma-separated decimals.
//! Mask files use 1 for restricted cells, obstacle files 1 for buildings.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{ObstacleMap, RadioMap};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses grid text. `origin` is only used in error messages.
pub fn parse_grid(text: &str, origin: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(rows as u64 + 1);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line,
                    message: format!("expected {w} fields, found {}", record.len()),
                })
            }
            Some(_) => {}
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: origin.to_path_buf(),
                line,
                message: format!("not a number: {field:?}"),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = width.ok_or(Error::EmptyGrid)?;
    Array2::from_shape_vec((rows, cols), data).map_err(|_| Error::EmptyGrid)
}

pub fn read_grid_file(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(io_err(path))?;
    parse_grid(&text, path)
}

/// Formats a grid. Floats use the shortest representation that reads back
/// to the same value.
pub fn format_grid(grid: &Array2<f64>) -> String {
    let mut out = String::with_capacity(grid.len() * 8);
    for row in grid.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn write_grid_file(path: impl AsRef<Path>, grid: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    w.write_all(format_grid(grid).as_bytes())
        .and_then(|_| w.flush())
        .map_err(io_err(path))
}

fn to_flags(grid: Array2<f64>, path: &Path) -> Result<Array2<bool>> {
    for ((r, _), &v) in grid.indexed_iter() {
        if v != 0.0 && v != 1.0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: r as u64 + 1,
                message: format!("expected 0 or 1, found {v}"),
            });
        }
    }
    Ok(grid.mapv(|v| v == 1.0))
}

/// Reads a 0/1 mask; `true` = restricted.
pub fn read_mask_file(path: impl AsRef<Path>) -> Result<Array2<bool>> {
    let path = path.as_ref();
    to_flags(read_grid_file(path)?, path)
}

pub fn read_obstacle_file(path: impl AsRef<Path>) -> Result<ObstacleMap> {
    let path = path.as_ref();
    Ok(ObstacleMap {
        cells: to_flags(read_grid_file(path)?, path)?,
    })
}

pub fn write_flag_file(path: impl AsRef<Path>, flags: &Array2<bool>) -> Result<()> {
    write_grid_file(path, &flags.mapv(|b| if b { 1.0 } else { 0.0 }))
}

/// Writes the normalized values of a map.
pub fn write_map_file(path: impl AsRef<Path>, map: &RadioMap) -> Result<()> {
    write_grid_file(path, &map.values)
}
