//! CSV ingest and export of angle matrices.
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use torograph_core::{wrap_angle, Angle, AngleMatrix};

use crate::error::{CliError, Result};
use crate::output::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum AngleUnit {
    #[default]
    Radians,
    Degrees,
}

impl AngleUnit {
    pub fn from_degrees_flag(degrees: bool) -> Self {
        if degrees {
            AngleUnit::Degrees
        } else {
            AngleUnit::Radians
        }
    }

    fn to_radians(self, v: f64) -> f64 {
        match self {
            AngleUnit::Radians => v,
            AngleUnit::Degrees => v.to_radians(),
        }
    }

    fn express(self, v: f64) -> f64 {
        match self {
            AngleUnit::Radians => v,
            AngleUnit::Degrees => v.to_degrees(),
        }
    }
}

/// Reads a header row of column names followed by a rectangular numeric body.
/// Every value is converted to radians and wrapped into (−π, π].
pub fn ingest_csv(path: &Path, unit: AngleUnit) -> Result<AngleMatrix> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_angles(file, unit, &path.display().to_string())
}

/// [`ingest_csv`] over any reader; `source_name` prefixes error messages.
pub fn parse_angles<R: Read>(reader: R, unit: AngleUnit, source_name: &str) -> Result<AngleMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| CliError::parse(source_name, e.to_string()))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(CliError::parse(source_name, "empty file: expected a header row"));
    }
    let names: Vec<String> = header.iter().map(str::to_owned).collect();
    for (j, name) in names.iter().enumerate() {
        if name.is_empty() {
            return Err(CliError::parse(source_name, format!("header field {} is empty", j + 1)));
        }
        if names[..j].contains(name) {
            return Err(CliError::parse(source_name, format!("duplicate column name {name}")));
        }
    }
    let p = names.len();
    let mut values = Vec::new();
    let mut n = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::parse(source_name, e.to_string()))?;
        n += 1;
        if record.len() > p {
            return Err(CliError::parse_at(
                source_name,
                n,
                None,
                format!("{} fields, expected {p}", record.len()),
            ));
        }
        for (j, name) in names.iter().enumerate() {
            let cell = record.get(j).unwrap_or("");
            if cell.is_empty() {
                return Err(CliError::parse_at(source_name, n, Some(name), "missing value"));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| CliError::parse_at(source_name, n, Some(name), format!("not a number: {cell:?}")))?;
            let wrapped = wrap_angle(unit.to_radians(v))
                .map_err(|_| CliError::parse_at(source_name, n, Some(name), format!("not a finite angle: {cell:?}")))?;
            values.push(wrapped.radians());
        }
    }
    if n == 0 {
        return Err(CliError::parse(source_name, "no data rows after the header"));
    }
    Ok(AngleMatrix::from_radians(n, p, values, names)?)
}

/// Writes `data` as CSV in the requested unit; values round-trip exactly
/// through [`parse_angles`] up to the unit conversion.
pub fn write_angles<W: Write>(data: &AngleMatrix, unit: AngleUnit, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::config(format!("cannot write CSV: {e}"));
    w.write_record(data.column_names()).map_err(err)?;
    for row in data.rows() {
        w.write_record(row.iter().map(|&v| unit.express(v).to_string()))
            .map_err(err)?;
    }
    w.flush()
        .map_err(|e| CliError::config(format!("cannot write CSV: {e}")))?;
    Ok(())
}

pub fn angles_to_csv(data: &AngleMatrix, unit: AngleUnit) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_angles(data, unit, &mut buf)?;
    Ok(buf)
}

/// Looks up a column by name, falling back to a 1-based index.
pub fn resolve_column(labels: &[String], token: &str) -> Result<usize> {
    if let Some(j) = labels.iter().position(|l| l == token) {
        return Ok(j);
    }
    match token.parse::<usize>() {
        Ok(k) if (1..=labels.len()).contains(&k) => Ok(k - 1),
        _ => Err(CliError::config(format!("unknown column {token:?}"))),
    }
}

/// Writes one (φ, Ψ) column pair per requested pair, in degrees, side by
/// side. Returns `false` and writes nothing when `pairs` is empty.
pub fn export_ramachandran(data: &AngleMatrix, pairs: &[(String, String)], path: &Path) -> Result<bool> {
    if pairs.is_empty() {
        return Ok(false);
    }
    let labels = data.column_names();
    let mut columns = Vec::with_capacity(2 * pairs.len());
    for (phi, psi) in pairs {
        for name in [phi, psi] {
            let j = labels
                .iter()
                .position(|l| l == name)
                .ok_or_else(|| CliError::config(format!("unknown column {name:?}")))?;
            columns.push(j);
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::config(format!("cannot write CSV: {e}"));
    w.write_record(columns.iter().map(|&j| labels[j].as_str()))
        .map_err(err)?;
    for row in data.rows() {
        w.write_record(
            columns
                .iter()
                .map(|&j| Angle::new(row[j]).map_or(f64::NAN, Angle::degrees).to_string()),
        )
        .map_err(err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::config(format!("cannot write CSV: {e}")))?;
    write_atomic(path, &bytes)?;
    Ok(true)
}
