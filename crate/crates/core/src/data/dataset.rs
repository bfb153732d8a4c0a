use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Sampling interval of a dataset. Used to pick canonical stride sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frequency {
    Hourly,
    Min15,
    Min10,
    Unknown,
}

impl Frequency {
    /// Minutes per step, when known.
    pub fn minutes(self) -> Option<u64> {
        match self {
            Frequency::Hourly => Some(60),
            Frequency::Min15 => Some(15),
            Frequency::Min10 => Some(10),
            Frequency::Unknown => None,
        }
    }
}

/// A loaded multivariate series: `rows` timesteps of `channels` values, plus
/// the pass-through timestamp strings from the source file.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub channels: usize,
    pub rows: usize,
    /// Row-major `rows x channels` values.
    pub values: Vec<f64>,
    pub frequency: Frequency,
    pub timestamps: Vec<String>,
    pub channel_names: Vec<String>,
}

impl Dataset {
    #[inline]
    pub fn value(&self, row: usize, channel: usize) -> f64 {
        self.values[row * self.channels + channel]
    }

    #[inline]
    pub fn value_mut(&mut self, row: usize, channel: usize) -> &mut f64 {
        &mut self.values[row * self.channels + channel]
    }

    pub fn with_frequency(mut self, frequency: Frequency) -> Self {
        self.frequency = frequency;
        self
    }

    /// Slice rows `[start, start+len)` into a channels-by-time matrix.
    pub fn window(&self, start: usize, len: usize) -> Matrix {
        let mut m = Matrix::zeros(self.channels, len);
        for c in 0..self.channels {
            for t in 0..len {
                m.set(c, t, self.value(start + t, c));
            }
        }
        m
    }
}

/// Parse a comma-separated file: header row, first column a timestamp that is
/// kept verbatim, remaining columns 64-bit reals. Non-numeric or non-finite
/// cells and ragged rows are rejected with their position.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot read dataset {}: {e}", path.display()),
        ))
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    parse_csv(&text, &name)
}

fn parse_csv(text: &str, name: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty file: a header row is required".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 2 {
        return Err(Error::Parse(
            "header must name a timestamp column and at least one channel".into(),
        ));
    }
    let channels = columns.len() - 1;
    let channel_names: Vec<String> = columns[1..].iter().map(|s| s.trim().to_string()).collect();

    let mut values = Vec::new();
    let mut timestamps = Vec::new();
    for (line_idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != columns.len() {
            return Err(Error::Parse(format!(
                "line {}: expected {} columns, found {}",
                line_idx + 1,
                columns.len(),
                cells.len()
            )));
        }
        timestamps.push(cells[0].to_string());
        for (col, cell) in cells[1..].iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "line {}, column {}: cannot parse '{}' as a number",
                    line_idx + 1,
                    col + 2,
                    cell.trim()
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Parse(format!(
                    "line {}, column {}: non-finite value '{}'",
                    line_idx + 1,
                    col + 2,
                    cell.trim()
                )));
            }
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::Parse("file has a header but no data rows".into()));
    }
    let rows = timestamps.len();
    Ok(Dataset {
        name: name.to_string(),
        channels,
        rows,
        values,
        frequency: Frequency::Unknown,
        timestamps,
        channel_names,
    })
}

/// Write a dataset back out in the same comma-separated format.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = fs::File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot write dataset {}: {e}", path.display()),
        ))
    })?;
    let mut header = String::from("date");
    for name in &dataset.channel_names {
        header.push(',');
        header.push_str(name);
    }
    writeln!(out, "{header}")?;
    for row in 0..dataset.rows {
        let mut line = dataset.timestamps[row].clone();
        for c in 0..dataset.channels {
            line.push(',');
            line.push_str(&format!("{}", dataset.value(row, c)));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
