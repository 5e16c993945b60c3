//! CSV ingestion.
//!
//! Two layouts are accepted, told apart by the header:
//!
//! * `timestamp,power`: ISO-8601 timestamps with power samples, integrated to daily energy;
//! * `date,energy`: one row per calendar day; gaps between dates become missing days.
//!
//! Blank fields and `NaN` mark missing values.

use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};
use crate::prep::{DailySignal, PowerSeries};

#[derive(Debug, Clone, PartialEq)]
pub enum InputData {
    Power(PowerSeries<f64>),
    Daily(DailySignal<f64>),
}

pub fn read_input_path(path: &Path) -> Result<InputData> {
    let f = std::fs::File::open(path)?;
    read_input(f).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn read_input<R: Read>(reader: R) -> Result<InputData> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::NoData);
    }
    match (headers.first().map(String::as_str), headers.get(1).map(String::as_str)) {
        (Some("timestamp"), Some("power")) => read_power(rdr).map(InputData::Power),
        (Some("date"), Some("energy")) => read_daily(rdr).map(InputData::Daily),
        _ => Err(Error::Parse(format!(
            "expected header `timestamp,power` or `date,energy`, found `{}`",
            headers.join(",")
        ))),
    }
}

fn parse_value(field: &str, line: u64) -> Result<Option<f64>> {
    if field.is_empty() || field.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    let v: f64 = field
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad number `{field}`")))?;
    Ok(v.is_finite().then_some(v))
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_local());
    }
    const FORMATS: [&str; 6] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%dT%H:%M:%S%.f%z",
        "%Y-%m-%d %H:%M:%S%.f%z",
    ];
    FORMATS.iter().find_map(|f| {
        NaiveDateTime::parse_from_str(s, f)
            .ok()
            .or_else(|| DateTime::parse_from_str(s, f).ok().map(|d| d.naive_local()))
    })
}

fn read_power<R: Read>(mut rdr: csv::Reader<R>) -> Result<PowerSeries<f64>> {
    let mut ts = Vec::new();
    let mut vals = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let t = rec.get(0).unwrap_or("");
        let stamp = parse_timestamp(t).ok_or_else(|| Error::Parse(format!("line {line}: bad timestamp `{t}`")))?;
        ts.push(stamp);
        vals.push(parse_value(rec.get(1).unwrap_or(""), line)?);
    }
    PowerSeries::new(ts, vals)
}

fn read_daily<R: Read>(mut rdr: csv::Reader<R>) -> Result<DailySignal<f64>> {
    let mut rows: Vec<(NaiveDate, Option<f64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let d = rec.get(0).unwrap_or("");
        let date = NaiveDate::parse_from_str(d, "%Y-%m-%d")
            .map_err(|_| Error::Parse(format!("line {line}: bad date `{d}`")))?;
        if let Some((prev, _)) = rows.last() {
            if date <= *prev {
                return Err(Error::Parse(format!("line {line}: dates must be strictly increasing")));
            }
        }
        rows.push((date, parse_value(rec.get(1).unwrap_or(""), line)?));
    }
    let Some(&(start, _)) = rows.first() else {
        return Err(Error::NoData);
    };
    let days = (rows.last().unwrap().0 - start).num_days() as usize + 1;
    let mut values = vec![None; days];
    for (d, v) in rows {
        values[(d - start).num_days() as usize] = v;
    }
    Ok(DailySignal::new(values)?.with_start(start))
}
