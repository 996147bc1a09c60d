//! CSV and manifest emission. Floats are written with 17 significant digits,
//! which round-trips every `f64` exactly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::experiments::{CellSeries, SweepResult, VERSION};
use crate::witness::{MomentSet, WitnessReport};

pub const SWEEP_HEADER: [&str; 8] = [
    "g0",
    "beta_omega_a",
    "maxI1",
    "maxI2",
    "maxI3",
    "maxG",
    "t_argmax_G",
    "converged",
];

pub const SERIES_HEADER: [&str; 13] = [
    "t", "re_abc", "im_abc", "Na", "Nb", "Nc", "NbNc", "NaNc", "NaNb", "I1", "I2", "I3", "G",
];

/// `x` with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn series_fields(m: &MomentSet, w: &WitnessReport) -> Vec<String> {
    [
        m.time, m.abc.re, m.abc.im, m.n[0], m.n[1], m.n[2], m.nn[0], m.nn[1], m.nn[2], w.i[0], w.i[1],
        w.i[2], w.g,
    ]
    .iter()
    .map(|x| format_float(*x))
    .collect()
}

/// Per-cell maxima, one row per grid cell in grid order.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for c in &result.cells {
        let mut row: Vec<String> = [
            c.g0,
            c.beta_omega_a,
            c.max_i[0],
            c.max_i[1],
            c.max_i[2],
            c.max_g,
            c.t_argmax_g,
        ]
        .iter()
        .map(|x| format_float(*x))
        .collect();
        row.push(c.certificate.converged.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One trajectory: time-series columns only.
pub fn write_series_csv<W: Write>(moments: &[MomentSet], witnesses: &[WitnessReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SERIES_HEADER)?;
    for (m, r) in moments.iter().zip(witnesses) {
        w.write_record(series_fields(m, r))?;
    }
    w.flush()?;
    Ok(())
}

/// Landscape: `g0` and `beta_omega_a` followed by the time-series columns,
/// blocks ordered by `g0` with increasing `t` inside each block.
pub fn write_landscape_csv<W: Write>(series: &[CellSeries], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["g0", "beta_omega_a"];
    header.extend(SERIES_HEADER);
    w.write_record(&header)?;
    for s in series {
        for (m, r) in s.moments.iter().zip(&s.witnesses) {
            let mut row = vec![format_float(s.g0), format_float(s.beta_omega_a)];
            row.extend(series_fields(m, r));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads back every numeric column of an emitted CSV; booleans map to 0/1.
pub fn read_csv_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| match field {
                "true" => Ok(1.0),
                "false" => Ok(0.0),
                x => x.parse::<f64>().map_err(|e| {
                    crate::error::invalid(format!("non-numeric CSV field {x:?}: {e}"))
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    all_converged: bool,
    unconverged_cells: usize,
    files: Vec<String>,
    config: &'a C,
}

/// Writes `manifest.toml` with the resolved configuration and run summary.
pub fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &str,
    config: &C,
    result: Option<&SweepResult>,
    files: &[PathBuf],
) -> Result<PathBuf> {
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: VERSION,
        command,
        all_converged: result.is_none_or(SweepResult::all_converged),
        unconverged_cells: result.map_or(0, |r| r.cells.iter().filter(|c| !c.certificate.converged).count()),
        files: files
            .iter()
            .filter_map(|f| f.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        config,
    };
    let text = toml::to_string(&manifest).map_err(|e| crate::error::invalid(format!("cannot serialise manifest: {e}")))?;
    let path = dir.join("manifest.toml");
    fs::write(&path, text)?;
    Ok(path)
}

/// Writes the CSV files of a sweep result into `dir`, returning their paths.
pub fn emit_result(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let slug = result.scenario.slug();
    let mut files = Vec::new();
    let summary = dir.join(format!("{slug}.csv"));
    write_sweep_csv(result, fs::File::create(&summary)?)?;
    files.push(summary);
    if !result.series.is_empty() {
        let path = dir.join(format!("{slug}_series.csv"));
        write_landscape_csv(&result.series, fs::File::create(&path)?)?;
        files.push(path);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::C64;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, f64::MIN_POSITIVE, f64::INFINITY] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn series_csv_has_documented_header() {
        let mut m = MomentSet::zero(0.25);
        m.abc = C64::new(0.1, -0.2);
        let w = WitnessReport::from_moments(&MomentSet {
            nnn: Some(1.0),
            ..m
        })
        .unwrap();
        let mut buf = Vec::new();
        write_series_csv(&[m], &[w], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SERIES_HEADER.join(","));
        assert!(lines.next().unwrap().starts_with("2.5000000000000000e-1,1.0000000000000001e-1,"));
    }
}
