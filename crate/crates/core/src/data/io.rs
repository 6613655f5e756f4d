use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use super::{SensorStream, TrajectoryDescriptor, DEFAULT_SAMPLE_RATE_HZ};
use crate::error::{Error, Result};

const TIMESTAMP_COLUMN: &str = "timestamp_ms";
const START_FRAME_COLUMN: &str = "start_frame";

/// Largest tolerated timestamp gap, as a multiple of the nominal period.
const MAX_GAP_RATIO: f64 = 1.5;

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

fn parse_cell(path: &Path, line: usize, column: &str, cell: &str) -> Result<f64> {
    cell.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("column {column}: {cell:?} is not a finite number"),
        })
}

/// Reads a sensor CSV with a `timestamp_ms` column followed by one column per
/// channel.
///
/// The sample rate is inferred from the median timestamp delta; a single-row
/// file falls back to 10 Hz. Timestamps must be strictly increasing and no gap
/// may exceed 1.5 nominal periods (missing samples are never interpolated).
pub fn load_sensor_csv(path: impl AsRef<Path>, expected_channels: usize) -> Result<SensorStream> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.get(0) != Some(TIMESTAMP_COLUMN) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("first column must be {TIMESTAMP_COLUMN}"),
        });
    }
    let channel_names: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    if channel_names.len() != expected_channels {
        return Err(Error::validation(format!(
            "{}: expected {expected_channels} channels, header has {}",
            path.display(),
            channel_names.len()
        )));
    }

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != headers.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {} columns, found {}", headers.len(), record.len()),
            });
        }
        for (i, cell) in record.iter().enumerate() {
            let v = parse_cell(path, line, &headers[i], cell)?;
            if i == 0 {
                timestamps.push((v, line));
            } else {
                values.push(v);
            }
        }
    }
    if timestamps.is_empty() {
        return Err(Error::validation(format!("{}: no samples", path.display())));
    }

    let mut deltas = Vec::with_capacity(timestamps.len().saturating_sub(1));
    for pair in timestamps.windows(2) {
        let (prev, _) = pair[0];
        let (next, line) = pair[1];
        if next <= prev {
            return Err(Error::validation(format!(
                "{}: timestamps not strictly increasing at line {line}",
                path.display()
            )));
        }
        deltas.push(next - prev);
    }
    let sample_rate_hz = if deltas.is_empty() {
        DEFAULT_SAMPLE_RATE_HZ
    } else {
        let period = median(&mut deltas.clone());
        if let Some(i) = deltas.iter().position(|&d| d > MAX_GAP_RATIO * period) {
            return Err(Error::validation(format!(
                "{}: gap of {} ms before line {} exceeds {MAX_GAP_RATIO} nominal periods ({period} ms)",
                path.display(),
                deltas[i],
                timestamps[i + 1].1
            )));
        }
        1000.0 / period
    };

    let samples = Array2::from_shape_vec((timestamps.len(), channel_names.len()), values)
        .map_err(|e| Error::validation(e.to_string()))?;
    let clip_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    SensorStream::new(clip_id, sample_rate_hz, samples, channel_names)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Writes a stream as sensor CSV. Values use Rust's shortest round-trip float
/// formatting, so loading the file back reproduces them bit for bit.
pub fn write_sensor_csv(stream: &SensorStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let period_ms = 1000.0 / stream.sample_rate_hz;
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        write!(out, "{TIMESTAMP_COLUMN}")?;
        for name in &stream.channel_names {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for (i, row) in stream.samples.rows().into_iter().enumerate() {
            write!(out, "{}", i as f64 * period_ms)?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

/// Reads a trajectory CSV (`start_frame,f0,f1,...`), one descriptor per row.
/// A header-only file yields an empty list.
pub fn load_trajectories(path: impl AsRef<Path>) -> Result<Vec<TrajectoryDescriptor>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    if headers.get(0) != Some(START_FRAME_COLUMN) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("first column must be {START_FRAME_COLUMN}"),
        });
    }

    let mut out: Vec<TrajectoryDescriptor> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let width = record.len().saturating_sub(1);
        let expected = out.first().map(|t| t.vector.len()).unwrap_or(width);
        if width != expected || width == 0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("ragged row: {width} descriptor values, expected {expected}"),
            });
        }
        let start_frame = record[0].parse::<usize>().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("start_frame {:?} is not a non-negative integer", &record[0]),
        })?;
        let vector = record
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, cell)| parse_cell(path, line, &format!("f{}", i - 1), cell))
            .collect::<Result<Vec<_>>>()?;
        out.push(TrajectoryDescriptor {
            start_frame,
            vector,
        });
    }
    Ok(out)
}

pub fn write_trajectories(
    trajectories: &[TrajectoryDescriptor],
    dim: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        write!(out, "{START_FRAME_COLUMN}")?;
        for i in 0..dim {
            write!(out, ",f{i}")?;
        }
        writeln!(out)?;
        for t in trajectories {
            write!(out, "{}", t.start_frame)?;
            for v in &t.vector {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}
