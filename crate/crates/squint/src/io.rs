//! File formats and atomic output.
//!
//! CSV floats are written with 17 significant digits so values round-trip
//! through text exactly; JSON uses serde_json's shortest round-trip
//! representation. All writers go through a temp-file-and-rename so a
//! failing command never leaves partial output behind.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Serialize};

use crate::detector::{CoincidenceRecord, EfficiencyTable, DETECTORS_PER_ARM, OUTCOMES};
use crate::error::{Error, Result};
use crate::estimation::MonteCarloBand;
use crate::interferometer::{FringeTable, PhaseGrid};
use crate::metrology::FisherCurve;

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| io_err(path, e))?;
    std::io::Write::write_all(&mut tmp, contents.as_bytes()).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// Stages every file in a temp location first, so a failure while
/// preparing any of them leaves no output at all.
pub fn atomic_write_many(outputs: &[(std::path::PathBuf, String)]) -> Result<()> {
    let mut staged = Vec::with_capacity(outputs.len());
    for (path, contents) in outputs {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
        let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
            .map_err(|e| io_err(path, e))?;
        std::io::Write::write_all(&mut tmp, contents.as_bytes()).map_err(|e| io_err(path, e))?;
        staged.push((path, tmp));
    }
    for (path, tmp) in staged {
        tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    body.push('\n');
    atomic_write(path, &body)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let body = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&body).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn parse_field(path: &Path, line: u64, field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("invalid {what}: {field:?}")))
}

/// Fringe table CSV: header `phi,p0..pN`, one row per grid point.
pub fn fringe_table_to_csv(table: &FringeTable) -> String {
    let n = table.photon_number();
    let mut out = String::from("phi");
    for m in 0..=n {
        let _ = write!(out, ",p{m}");
    }
    out.push('\n');
    for (phi, row) in table.grid().values().iter().zip(table.rows()) {
        out.push_str(&format_float(*phi));
        for p in row {
            out.push(',');
            out.push_str(&format_float(*p));
        }
        out.push('\n');
    }
    out
}

pub fn write_fringe_csv(path: &Path, table: &FringeTable) -> Result<()> {
    atomic_write(path, &fringe_table_to_csv(table))
}

pub fn read_fringe_csv(path: &Path) -> Result<FringeTable> {
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| csv_error(path, &e))?
        .clone();
    if headers.len() < 2 || headers.get(0) != Some("phi") {
        return Err(parse_err(path, 1, "expected header phi,p0,..,pN"));
    }
    let n = headers.len() - 2;
    let mut phis = Vec::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != n + 2 {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", n + 2, record.len()),
            ));
        }
        phis.push(parse_field(path, line, &record[0], "phase")?);
        let mut row = Vec::with_capacity(n + 1);
        for field in record.iter().skip(1) {
            row.push(parse_field(path, line, field, "probability")?);
        }
        rows.push(row);
    }
    let grid = PhaseGrid::new(phis)?;
    FringeTable::new(n, grid, rows)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                io_err(path, std::io::Error::new(std::io::ErrorKind::NotFound, e))
            }
            _ => csv_error(path, &e),
        })
}

fn csv_error(path: &Path, e: &csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    parse_err(path, line, e.to_string())
}

/// Efficiency CSV: header `a1..a7,b1..b7`, one data row of fractions.
pub fn efficiency_to_csv(table: &EfficiencyTable) -> String {
    let mut header = Vec::new();
    for i in 1..=DETECTORS_PER_ARM {
        header.push(format!("a{i}"));
    }
    for i in 1..=DETECTORS_PER_ARM {
        header.push(format!("b{i}"));
    }
    let values: Vec<String> = table
        .arm_a
        .iter()
        .chain(table.arm_b.iter())
        .map(|x| format_float(*x))
        .collect();
    format!("{}\n{}\n", header.join(","), values.join(","))
}

pub fn write_efficiency_csv(path: &Path, table: &EfficiencyTable) -> Result<()> {
    atomic_write(path, &efficiency_to_csv(table))
}

pub fn read_efficiency_csv(path: &Path) -> Result<EfficiencyTable> {
    let mut reader = csv_reader(path)?;
    let mut records = reader.records();
    let record = records
        .next()
        .ok_or_else(|| parse_err(path, 2, "missing data row"))?
        .map_err(|e| csv_error(path, &e))?;
    let line = record.position().map(|p| p.line()).unwrap_or(2);
    if record.len() != 2 * DETECTORS_PER_ARM {
        return Err(parse_err(
            path,
            line,
            format!(
                "expected {} efficiencies, found {}",
                2 * DETECTORS_PER_ARM,
                record.len()
            ),
        ));
    }
    let mut values = [0.0; 2 * DETECTORS_PER_ARM];
    for (slot, field) in values.iter_mut().zip(record.iter()) {
        *slot = parse_field(path, line, field, "efficiency")?;
    }
    let mut arm_a = [0.0; DETECTORS_PER_ARM];
    let mut arm_b = [0.0; DETECTORS_PER_ARM];
    arm_a.copy_from_slice(&values[..DETECTORS_PER_ARM]);
    arm_b.copy_from_slice(&values[DETECTORS_PER_ARM..]);
    EfficiencyTable::new(arm_a, arm_b)
}

/// Coincidence CSV: header `phi,D0..D5`, one row per phase setting.
pub fn records_to_csv(records: &[CoincidenceRecord]) -> String {
    let mut out = String::from("phi,D0,D1,D2,D3,D4,D5\n");
    for record in records {
        out.push_str(&format_float(record.phase));
        for c in &record.counts {
            out.push(',');
            out.push_str(&format_float(*c));
        }
        out.push('\n');
    }
    out
}

pub fn write_counts_csv(path: &Path, records: &[CoincidenceRecord]) -> Result<()> {
    atomic_write(path, &records_to_csv(records))
}

pub fn read_counts_csv(path: &Path) -> Result<Vec<CoincidenceRecord>> {
    let mut reader = csv_reader(path)?;
    let mut records = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != OUTCOMES + 1 {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", OUTCOMES + 1, record.len()),
            ));
        }
        let phase = parse_field(path, line, &record[0], "phase")?;
        let mut counts = [0.0; OUTCOMES];
        for (slot, field) in counts.iter_mut().zip(record.iter().skip(1)) {
            *slot = parse_field(path, line, field, "count")?;
        }
        records.push(
            CoincidenceRecord::new(phase, counts)
                .map_err(|e| parse_err(path, line, e.to_string()))?,
        );
    }
    if records.is_empty() {
        return Err(parse_err(path, 1, "no coincidence rows"));
    }
    Ok(records)
}

/// Fisher curve CSV: `phi,F` rows.
pub fn fisher_curve_to_csv(curve: &FisherCurve) -> String {
    let mut out = String::from("phi,F\n");
    for (phi, f) in curve.grid.values().iter().zip(&curve.values) {
        out.push_str(&format_float(*phi));
        out.push(',');
        out.push_str(&format_float(*f));
        out.push('\n');
    }
    out
}

pub fn write_fisher_csv(path: &Path, curve: &FisherCurve) -> Result<()> {
    atomic_write(path, &fisher_curve_to_csv(curve))
}

/// Band CSV: `phi,q025,q50,q975` rows.
pub fn band_to_csv(band: &MonteCarloBand) -> String {
    let mut out = String::from("phi,q025,q50,q975\n");
    for (i, phi) in band.grid.values().iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            format_float(*phi),
            format_float(band.q025[i]),
            format_float(band.q50[i]),
            format_float(band.q975[i])
        );
    }
    out
}

pub fn write_band_csv(path: &Path, band: &MonteCarloBand) -> Result<()> {
    atomic_write(path, &band_to_csv(band))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::yurke_state;
    use approx::assert_relative_eq;
    use tempfile::tempdir;

    #[test]
    fn fringe_csv_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("fringe.csv");
        let table = FringeTable::from_state(
            &yurke_state(5).unwrap(),
            PhaseGrid::default_period(),
        )
        .unwrap();
        write_fringe_csv(&path, &table).unwrap();
        let back = read_fringe_csv(&path).unwrap();
        assert_eq!(back.photon_number(), 5);
        for (a, b) in table.grid().values().iter().zip(back.grid().values()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        for (ra, rb) in table.rows().iter().zip(back.rows()) {
            for (a, b) in ra.iter().zip(rb) {
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn efficiency_csv_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("eta.csv");
        let table = EfficiencyTable::new(
            [0.0140, 0.0125, 0.0143, 0.0146, 0.0153, 0.0154, 0.0148],
            [0.0116, 0.0145, 0.0130, 0.0112, 0.0111, 0.0136, 0.0158],
        )
        .unwrap();
        write_efficiency_csv(&path, &table).unwrap();
        let back = read_efficiency_csv(&path).unwrap();
        assert_eq!(table, back);
    }

    #[test]
    fn counts_csv_round_trip_and_errors() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("counts.csv");
        let records = vec![
            CoincidenceRecord::new(-0.5, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(),
            CoincidenceRecord::new(0.5, [0.0, 0.0, 10.0, 12.0, 0.0, 0.0]).unwrap(),
        ];
        write_counts_csv(&path, &records).unwrap();
        assert_eq!(read_counts_csv(&path).unwrap(), records);

        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "phi,D0,D1,D2,D3,D4,D5\n0.0,1,2,oops,4,5,6\n").unwrap();
        match read_counts_csv(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        let missing = dir.path().join("nope.csv");
        assert!(matches!(
            read_counts_csv(&missing),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("table.json");
        let table = FringeTable::from_state(
            &yurke_state(3).unwrap(),
            PhaseGrid::from_range(-1.0, 1.0, 0.5).unwrap(),
        )
        .unwrap();
        write_json(&path, &table).unwrap();
        let back: FringeTable = read_json(&path).unwrap();
        for (ra, rb) in table.rows().iter().zip(back.rows()) {
            for (a, b) in ra.iter().zip(rb) {
                assert_relative_eq!(a, b, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn format_float_round_trips_exactly() {
        for &x in &[
            0.1,
            std::f64::consts::PI,
            1.0 / 3.0,
            2.52e-7,
            -1.7976931348623157e308,
        ] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }
}
