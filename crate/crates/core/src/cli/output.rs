//! Output writers: CSV/JSON data files, summaries and the run manifest.
//!
//! Floats in CSV files are written with 17 significant digits so every value reads
//! back bit-exactly.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::experiments::{Estimator, RmsCurve, RmsSurface};

pub const RMS_CURVE_HEADER: [&str; 5] = [
    "carrier_index",
    "freq",
    "rms_ml_db",
    "rms_pe_db",
    "rms_peinf_db",
];
pub const SURFACE_HEADER: [&str; 3] = ["tau", "freq", "reduction_db"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

pub fn write_rms_curve_csv<W: Write>(out: W, curve: &RmsCurve) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RMS_CURVE_HEADER).map_err(csv_error)?;
    let columns: Vec<Option<Vec<f64>>> = [Estimator::Ml, Estimator::Pe, Estimator::PeInf]
        .into_iter()
        .map(|e| curve.rms_db(e))
        .collect();
    for (i, (&idx, &f)) in curve
        .carrier_indices
        .iter()
        .zip(&curve.frequencies)
        .enumerate()
    {
        let mut record = vec![idx.to_string(), fmt_f64(f)];
        record.extend(
            columns
                .iter()
                .map(|c| c.as_ref().map(|v| fmt_f64(v[i])).unwrap_or_default()),
        );
        w.write_record(&record).map_err(csv_error)?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsCurveRow {
    pub carrier_index: i64,
    pub freq: f64,
    pub rms_ml_db: Option<f64>,
    pub rms_pe_db: Option<f64>,
    pub rms_peinf_db: Option<f64>,
}

pub fn rms_curve_rows(curve: &RmsCurve) -> Vec<RmsCurveRow> {
    let ml = curve.rms_db(Estimator::Ml);
    let pe = curve.rms_db(Estimator::Pe);
    let peinf = curve.rms_db(Estimator::PeInf);
    curve
        .carrier_indices
        .iter()
        .zip(&curve.frequencies)
        .enumerate()
        .map(|(i, (&carrier_index, &freq))| RmsCurveRow {
            carrier_index,
            freq,
            rms_ml_db: ml.as_ref().map(|v| v[i]),
            rms_pe_db: pe.as_ref().map(|v| v[i]),
            rms_peinf_db: peinf.as_ref().map(|v| v[i]),
        })
        .collect()
}

pub fn write_surface_csv<W: Write>(out: W, surface: &RmsSurface) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SURFACE_HEADER).map_err(csv_error)?;
    for (tau, row) in surface.taus.iter().zip(&surface.reduction_db) {
        for (f, r) in surface.frequencies.iter().zip(row) {
            w.write_record([fmt_f64(*tau), fmt_f64(*f), fmt_f64(*r)])
                .map_err(csv_error)?;
        }
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub tau: f64,
    pub freq: f64,
    pub reduction_db: f64,
}

pub fn surface_rows(surface: &RmsSurface) -> Vec<SurfaceRow> {
    surface
        .taus
        .iter()
        .zip(&surface.reduction_db)
        .flat_map(|(&tau, row)| {
            surface
                .frequencies
                .iter()
                .zip(row)
                .map(move |(&freq, &reduction_db)| SurfaceRow {
                    tau,
                    freq,
                    reduction_db,
                })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

/// Provenance of a run. Only the data files are digested; the manifest itself
/// carries the timestamp and wall-clock duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub rng_scheme: String,
    pub selected_ml_taps: Option<usize>,
    pub ml_first_tap: Option<i64>,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub results: serde_json::Value,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Collects output files in memory and writes them at the end of a run.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn digests(&self) -> Vec<OutputDigest> {
        self.files
            .iter()
            .map(|(name, bytes)| OutputDigest {
                file: name.clone(),
                sha256: sha256_hex(bytes),
            })
            .collect()
    }

    pub fn write_all(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        self.files
            .iter()
            .map(|(name, bytes)| {
                let path = dir.join(name);
                fs::write(&path, bytes)?;
                Ok(path)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for &v in &[0.1, -30.123456789012345, 1e-300, 2.0f64.sqrt(), -0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn manifest_round_trips() {
        let m = RunManifest {
            tool: "nusest".into(),
            version: "0.1.0".into(),
            command: "fig23".into(),
            config: serde_json::json!({"alpha": 0.25}),
            seed: 9,
            rng_scheme: crate::rng::SCHEME.into(),
            selected_ml_taps: Some(15),
            ml_first_tap: Some(-3),
            started_unix_seconds: 1,
            wall_clock_seconds: 0.5,
            results: serde_json::Value::Null,
            outputs: vec![OutputDigest {
                file: "a.csv".into(),
                sha256: sha256_hex(b"abc"),
            }],
        };
        let text = serde_json::to_string(&m).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(
            m.outputs[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
