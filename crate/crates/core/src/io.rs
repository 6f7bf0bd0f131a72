//! Signal ingestion and CSV export.
//!
//! Every float is written with 17 significant digits so a value read back
//! is bit-identical to the one written.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{AssoError, Result};
use crate::pipeline::SeparationResult;
use crate::signal::SampledSignal;
use crate::stft::TFRepresentation;
use crate::tuning::EntropyProfile;

/// `v` with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> AssoError {
    AssoError::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Reads a `time,value` CSV with a header row.
///
/// The sample rate comes from `sample_rate` when given, otherwise from the
/// time column, which must then be uniform.
pub fn read_csv_signal(path: impl AsRef<Path>, sample_rate: Option<f64>) -> Result<SampledSignal> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| AssoError::io(path, e))?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| AssoError::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && fields.first().is_some_and(|f| f.parse::<f64>().is_err()) {
            if fields.len() < 2 || fields[0] != "time" || fields[1] != "value" {
                return Err(format_err(path, format!("expected header `time,value`, got `{line}`")));
            }
            continue;
        }
        if fields.len() < 2 {
            return Err(format_err(path, format!("line {}: expected two columns", lineno + 1)));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| format_err(path, format!("line {}: bad number `{s}`", lineno + 1)))
        };
        times.push(parse(fields[0])?);
        values.push(parse(fields[1])?);
    }
    if values.len() < 2 {
        return Err(format_err(path, "need at least two samples"));
    }
    let fs = match sample_rate {
        Some(fs) => fs,
        None => {
            let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
            let uniform = times
                .windows(2)
                .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-6 * dt.abs());
            if !(dt > 0.0) || !uniform {
                return Err(format_err(path, "time column is not uniformly increasing; pass --fs"));
            }
            1.0 / dt
        }
    };
    SampledSignal::new(values, fs, times[0])
}

/// Reads a mono integer PCM WAV, scaled to [-1, 1).
pub fn read_wav(path: impl AsRef<Path>) -> Result<SampledSignal> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => AssoError::io(path, io),
        other => format_err(path, other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(format_err(path, format!("expected mono, got {} channels", spec.channels)));
    }
    let samples: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
        }
        hound::SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
    }
    .map_err(|e| format_err(path, e.to_string()))?;
    SampledSignal::new(samples, spec.sample_rate as f64, 0.0)
}

/// CSV or WAV by file extension.
pub fn read_signal(path: impl AsRef<Path>, sample_rate: Option<f64>) -> Result<SampledSignal> {
    let path = path.as_ref();
    let is_wav = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    if is_wav {
        let x = read_wav(path)?;
        match sample_rate {
            Some(fs) if fs != x.sample_rate() => Err(AssoError::Usage(format!(
                "--fs {fs} conflicts with the WAV header rate {}",
                x.sample_rate()
            ))),
            _ => Ok(x),
        }
    } else {
        read_csv_signal(path, sample_rate)
    }
}

/// Writes rows of floats under `header`.
pub fn write_table(path: impl AsRef<Path>, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| AssoError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let body = || -> std::io::Result<()> {
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            let line: Vec<String> = row.into_iter().map(fmt_float).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()
    };
    body().map_err(|e| AssoError::io(path, e))
}

pub fn write_signal_csv(path: impl AsRef<Path>, times: &[f64], values: &[f64]) -> Result<()> {
    write_table(
        path,
        &["time", "value"],
        times.iter().zip(values).map(|(&t, &v)| vec![t, v]),
    )
}

/// One row per (frame, bin).
pub fn write_tf_csv(path: impl AsRef<Path>, tf: &TFRepresentation) -> Result<()> {
    let bins = tf.grid().bins();
    let rows = (0..tf.n_frames()).flat_map(|n| {
        let t = tf.times()[n];
        let row = tf.frame(n);
        bins.iter()
            .zip(row)
            .map(move |(&f, v)| vec![t, f, v.re, v.im, v.norm()])
            .collect::<Vec<_>>()
    });
    write_table(path, &["time", "freq", "re", "im", "abs"], rows)
}

pub fn write_sigma_csv(path: impl AsRef<Path>, times: &[f64], sigma: &[f64]) -> Result<()> {
    write_table(
        path,
        &["time", "sigma"],
        times.iter().zip(sigma).map(|(&t, &s)| vec![t, s]),
    )
}

/// Long format: one row per (frame, grid σ) with a defined entropy.
pub fn write_entropy_csv(path: impl AsRef<Path>, profile: &EntropyProfile) -> Result<()> {
    let rows = profile.times.iter().enumerate().flat_map(|(n, &t)| {
        profile
            .sigma_grid
            .iter()
            .zip(&profile.entropy)
            .filter_map(move |(&s, e)| e[n].map(|e| vec![t, s, e]))
            .collect::<Vec<_>>()
    });
    write_table(path, &["time", "sigma", "entropy"], rows)
}

/// Ridges of all components: `component,time,eta,magnitude,chirp_rate,sigma`.
pub fn write_ridges_csv(path: impl AsRef<Path>, result: &SeparationResult, x: &SampledSignal) -> Result<()> {
    let rows = result.components.iter().enumerate().flat_map(|(k, c)| {
        c.ridge
            .support()
            .enumerate()
            .map(|(i, f)| {
                vec![
                    (k + 1) as f64,
                    x.time_at(f),
                    c.ridge.eta()[i],
                    c.ridge.magnitude()[i],
                    c.chirp_track.values()[i],
                    c.sigma_track_used.values()[i],
                ]
            })
            .collect::<Vec<_>>()
    });
    write_table(path, &["component", "time", "eta", "magnitude", "chirp_rate", "sigma"], rows)
}

/// Trend, residual, one file per component and the ridge table. Returns the
/// written paths.
pub fn write_result_bundle(dir: impl AsRef<Path>, result: &SeparationResult, x: &SampledSignal) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| AssoError::io(dir, e))?;
    let times = x.times();
    let mut written = Vec::new();
    let mut put = |name: String, values: &[f64]| -> Result<()> {
        let p = dir.join(name);
        write_signal_csv(&p, &times, values)?;
        written.push(p);
        Ok(())
    };
    put("trend.csv".into(), &result.trend)?;
    put("residual.csv".into(), &result.residual)?;
    for (k, c) in result.components.iter().enumerate() {
        put(format!("component_{}.csv", k + 1), &c.zero_extended(x.len()))?;
    }
    let p = dir.join("ridges.csv");
    write_ridges_csv(&p, result, x)?;
    written.push(p);
    Ok(written)
}
