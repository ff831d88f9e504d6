//! File formats.
//!
//! - Measures: CSV with header `x0,…,x{n-1},w`, one atom per row.
//! - Plans: CSV with header `i,j,mass`.
//! - Controls: JSON `{"M": int, "k": int, "values": [[…k reals…] × M]}`.
//!
//! Reals are written in shortest round-trip form, so reading back a written
//! file reproduces the values bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::control::ControlSchedule;
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::transport::{CouplingPlan, PlanEntry};

pub fn write_measure<W: Write>(measure: &DiscreteMeasure, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..measure.dim()).map(|a| format!("x{a}")).collect();
    header.push("w".into());
    w.write_record(&header)?;
    for (x, weight) in measure.atoms().iter().zip(measure.weights()) {
        let row: Vec<String> = x.iter().chain(std::iter::once(weight)).map(f64::to_string).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_measure<R: Read>(reader: R) -> Result<DiscreteMeasure> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    let dim = cols.len().checked_sub(1).filter(|d| *d > 0).ok_or_else(|| {
        Error::Parse("measure header needs x0..x{n-1},w".into())
    })?;
    let expected = (0..dim).map(|a| format!("x{a}")).chain(std::iter::once("w".to_string()));
    if !cols.iter().copied().eq(expected.collect::<Vec<_>>().iter().map(String::as_str)) {
        return Err(Error::Parse(format!("unexpected measure header {cols:?}")));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != dim + 1 {
            return Err(Error::Parse(format!("row {} has {} fields", line + 1, rec.len())));
        }
        let vals = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("row {}: {e}", line + 1)))?;
        weights.push(vals[dim]);
        points.push(vals[..dim].to_vec());
    }
    DiscreteMeasure::new(points, Some(weights))
}

pub fn write_plan<W: Write>(plan: &CouplingPlan, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for e in plan.entries() {
        w.serialize(e)?;
    }
    if plan.entries().is_empty() {
        w.write_record(["i", "j", "mass"])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a plan; the marginal sizes come from the measures it couples.
pub fn read_plan<R: Read>(reader: R, n1: usize, n2: usize) -> Result<CouplingPlan> {
    let mut r = csv::Reader::from_reader(reader);
    let entries = r
        .deserialize::<PlanEntry>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    CouplingPlan::from_entries(n1, n2, entries)
}

pub fn write_control<W: Write>(control: &ControlSchedule, writer: W) -> Result<()> {
    serde_json::to_writer(writer, control)?;
    Ok(())
}

pub fn read_control<R: Read>(reader: R) -> Result<ControlSchedule> {
    Ok(serde_json::from_reader(reader)?)
}

pub fn save_measure(measure: &DiscreteMeasure, path: impl AsRef<Path>) -> Result<()> {
    write_measure(measure, BufWriter::new(File::create(path)?))
}

pub fn load_measure(path: impl AsRef<Path>) -> Result<DiscreteMeasure> {
    read_measure(BufReader::new(File::open(path)?))
}

pub fn save_plan(plan: &CouplingPlan, path: impl AsRef<Path>) -> Result<()> {
    write_plan(plan, BufWriter::new(File::create(path)?))
}

pub fn load_plan(path: impl AsRef<Path>, n1: usize, n2: usize) -> Result<CouplingPlan> {
    read_plan(BufReader::new(File::open(path)?), n1, n2)
}

pub fn save_control(control: &ControlSchedule, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_control(control, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_control(path: impl AsRef<Path>) -> Result<ControlSchedule> {
    read_control(BufReader::new(File::open(path)?))
}
