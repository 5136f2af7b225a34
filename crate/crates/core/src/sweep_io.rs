//! Polar sweep data model and the on-disk `RPS1` format.
//!
//! An `.rps` file is:
//!
//! ```text
//! RPS1\n
//! <azimuth_count> <range_bin_count> <range_resolution> <duration> <center_time>\n
//! <azimuth_count * range_bin_count bytes, row-major by azimuth>
//! ```
//!
//! The header line is ASCII with space-separated decimal fields; reals are
//! written in shortest round-trip form. Intensities are stored as unsigned
//! 8-bit values; [`save_sweep`] rounds and clamps to that range, so the
//! save/load round trip is the identity exactly on sweeps whose intensities
//! already sit on the 0..=255 integer grid (which is everything the rest of
//! the pipeline produces or consumes).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::scalar::Real;

const MAGIC: &[u8; 5] = b"RPS1\n";

/// One full rotation of a spinning radar in polar form.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarSweep<T = f64> {
    intensities: Vec<T>,
    azimuth_count: usize,
    range_bin_count: usize,
    range_resolution_m: T,
    sweep_duration_s: T,
    sweep_center_time_s: T,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected \"RPS1\"")]
    BadMagic,
    #[error("malformed header: {0}")]
    Header(String),
    #[error("azimuth and range bin counts must be positive")]
    EmptyDimensions,
    #[error("non-positive range resolution")]
    NonPositiveRangeResolution,
    #[error("non-positive sweep duration")]
    NonPositiveDuration,
    #[error("payload size mismatch: expected {expected} intensity entries, got {actual}")]
    PayloadSizeMismatch { expected: usize, actual: usize },
    #[error("negative or non-finite intensity at index {0}")]
    InvalidIntensity(usize),
}

impl<T: Real> PolarSweep<T> {
    /// Validates all invariants and takes ownership of the intensity grid
    /// (row-major by azimuth).
    pub fn new(
        intensities: Vec<T>,
        azimuth_count: usize,
        range_bin_count: usize,
        range_resolution_m: T,
        sweep_duration_s: T,
        sweep_center_time_s: T,
    ) -> Result<Self, SweepError> {
        if azimuth_count == 0 || range_bin_count == 0 {
            return Err(SweepError::EmptyDimensions);
        }
        let expected = azimuth_count
            .checked_mul(range_bin_count)
            .ok_or(SweepError::EmptyDimensions)?;
        if intensities.len() != expected {
            return Err(SweepError::PayloadSizeMismatch { expected, actual: intensities.len() });
        }
        if !(range_resolution_m > T::zero()) || !range_resolution_m.is_finite() {
            return Err(SweepError::NonPositiveRangeResolution);
        }
        if !(sweep_duration_s > T::zero()) || !sweep_duration_s.is_finite() {
            return Err(SweepError::NonPositiveDuration);
        }
        if let Some(i) = intensities.iter().position(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(SweepError::InvalidIntensity(i));
        }
        Ok(Self {
            intensities,
            azimuth_count,
            range_bin_count,
            range_resolution_m,
            sweep_duration_s,
            sweep_center_time_s,
        })
    }

    pub fn azimuth_count(&self) -> usize {
        self.azimuth_count
    }

    pub fn range_bin_count(&self) -> usize {
        self.range_bin_count
    }

    /// Meters per range bin.
    pub fn range_resolution_m(&self) -> T {
        self.range_resolution_m
    }

    pub fn sweep_duration_s(&self) -> T {
        self.sweep_duration_s
    }

    pub fn sweep_center_time_s(&self) -> T {
        self.sweep_center_time_s
    }

    pub fn intensities(&self) -> &[T] {
        &self.intensities
    }

    /// Intensity row of one azimuth.
    pub fn row(&self, azimuth: usize) -> &[T] {
        let start = azimuth * self.range_bin_count;
        &self.intensities[start..start + self.range_bin_count]
    }
}

/// Reads and validates an `RPS1` file.
pub fn load_sweep<T: Real>(path: &Path) -> Result<PolarSweep<T>, SweepError> {
    let mut reader = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 5];
    reader.read_exact(&mut magic).map_err(|_| SweepError::BadMagic)?;
    if &magic != MAGIC {
        return Err(SweepError::BadMagic);
    }

    let header = read_line(&mut reader)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(SweepError::Header(format!("expected 5 fields, got {}", fields.len())));
    }
    let azimuth_count: usize = parse_field(fields[0], "azimuth count")?;
    let range_bin_count: usize = parse_field(fields[1], "range bin count")?;
    let gamma: f64 = parse_field(fields[2], "range resolution")?;
    let duration: f64 = parse_field(fields[3], "sweep duration")?;
    let center_time: f64 = parse_field(fields[4], "center time")?;

    if azimuth_count == 0 || range_bin_count == 0 {
        return Err(SweepError::EmptyDimensions);
    }
    if !(gamma > 0.0) {
        return Err(SweepError::NonPositiveRangeResolution);
    }
    if !(duration > 0.0) {
        return Err(SweepError::NonPositiveDuration);
    }

    let expected = azimuth_count
        .checked_mul(range_bin_count)
        .ok_or(SweepError::EmptyDimensions)?;
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    if payload.len() != expected {
        return Err(SweepError::PayloadSizeMismatch { expected, actual: payload.len() });
    }

    let intensities = payload.into_iter().map(|b| T::of_usize(b as usize)).collect();
    PolarSweep::new(
        intensities,
        azimuth_count,
        range_bin_count,
        T::of(gamma),
        T::of(duration),
        T::of(center_time),
    )
}

/// Writes a sweep as `RPS1`, rounding intensities to the 8-bit grid.
pub fn save_sweep<T: Real>(sweep: &PolarSweep<T>, path: &Path) -> Result<(), SweepError> {
    let mut writer = BufWriter::new(File::create(path)?);
    writer.write_all(MAGIC)?;
    writeln!(
        writer,
        "{} {} {} {} {}",
        sweep.azimuth_count,
        sweep.range_bin_count,
        sweep.range_resolution_m.to_f64_lossy(),
        sweep.sweep_duration_s.to_f64_lossy(),
        sweep.sweep_center_time_s.to_f64_lossy(),
    )?;
    let bytes: Vec<u8> = sweep
        .intensities
        .iter()
        .map(|v| v.to_f64_lossy().round().clamp(0.0, 255.0) as u8)
        .collect();
    writer.write_all(&bytes)?;
    writer.flush()?;
    Ok(())
}

fn read_line<R: Read>(reader: &mut R) -> Result<String, SweepError> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        reader
            .read_exact(&mut byte)
            .map_err(|_| SweepError::Header("unterminated header line".into()))?;
        if byte[0] == b'\n' {
            break;
        }
        if line.len() > 256 {
            return Err(SweepError::Header("header line too long".into()));
        }
        line.push(byte[0]);
    }
    String::from_utf8(line).map_err(|_| SweepError::Header("non-ASCII header".into()))
}

fn parse_field<F: std::str::FromStr>(text: &str, name: &str) -> Result<F, SweepError> {
    text.parse()
        .map_err(|_| SweepError::Header(format!("cannot parse {name} from {text:?}")))
}
