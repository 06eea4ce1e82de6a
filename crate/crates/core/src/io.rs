//! File formats.
//!
//! | file | header |
//! |------|--------|
//! | daily counts | `date,count_1,...,count_M` |
//! | boundary counts | `t_start,t_end,count_1,...,count_M` |
//! | events | `time,type` (types 1-based) |
//! | grid | `boundary` |
//! | summary | `parameter,estimate,se,ci_low,ci_high` |
//! | envelope | `time,type,q<p>...` |
//! | chain | JSON lines, one [`ChainRecord`] each |
//!
//! Row numbers in errors count data rows from 1, header excluded. Floats
//! are written in shortest round-trip form, so write then read is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{AggregationGrid, EventSequence, IntervalCounts};
use crate::error::{Error, Result};
use crate::pmmh::{ChainRecord, Envelope, ParameterSummary};

pub const SUMMARY_FORMAT_VERSION: u32 = 1;
const SUMMARY_HEADER: [&str; 5] = ["parameter", "estimate", "se", "ci_low", "ci_high"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountsSchema {
    /// Decide from the first header field.
    #[default]
    Auto,
    Daily,
    Boundaries,
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn parse_f64(field: &str, row: usize, what: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::InvalidInput(format!("row {row}: {what} {field:?} is not a finite number")))
}

fn check_width(record: &csv::StringRecord, row: usize, expected: usize) -> Result<()> {
    if record.len() != expected {
        return Err(Error::RaggedRow {
            row,
            found: record.len(),
            expected,
        });
    }
    Ok(())
}

fn parse_counts(fields: &[&str], row: usize) -> Result<Vec<u64>> {
    fields
        .iter()
        .enumerate()
        .map(|(m, f)| match f.parse::<i64>() {
            Ok(v) if v < 0 => Err(Error::NegativeCount { row, column: m + 1 }),
            Ok(v) => Ok(v as u64),
            Err(_) => Err(Error::InvalidInput(format!(
                "row {row}: count_{} {f:?} is not an integer",
                m + 1
            ))),
        })
        .collect()
}

/// Number of `count_m` columns after `lead` fixed columns, checking names.
fn count_columns(header: &csv::StringRecord, lead: &[&str]) -> Result<usize> {
    let fields: Vec<&str> = header.iter().collect();
    if fields.len() <= lead.len() || fields[..lead.len()] != *lead {
        return Err(Error::InvalidInput(format!(
            "header must start with {} followed by count columns, got {:?}",
            lead.join(","),
            fields.join(",")
        )));
    }
    for (m, name) in fields[lead.len()..].iter().enumerate() {
        if *name != format!("count_{}", m + 1) {
            return Err(Error::InvalidInput(format!(
                "expected header column count_{}, got {name:?}",
                m + 1
            )));
        }
    }
    Ok(fields.len() - lead.len())
}

pub fn read_counts_csv(path: impl AsRef<Path>, schema: CountsSchema) -> Result<IntervalCounts> {
    read_counts(open(path.as_ref())?, schema)
}

pub fn read_counts<R: Read>(reader: R, schema: CountsSchema) -> Result<IntervalCounts> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers()?.clone();
    let schema = match schema {
        CountsSchema::Auto => match header.get(0) {
            Some("date") => CountsSchema::Daily,
            Some("t_start") => CountsSchema::Boundaries,
            other => {
                return Err(Error::InvalidInput(format!(
                    "cannot tell the counts schema from first column {other:?}"
                )))
            }
        },
        s => s,
    };
    let lead: &[&str] = match schema {
        CountsSchema::Daily => &["date"],
        _ => &["t_start", "t_end"],
    };
    let dim = count_columns(&header, lead)?;
    let width = lead.len() + dim;

    let mut counts = Vec::new();
    let mut boundaries = vec![0.0];
    let mut origin: Option<NaiveDate> = None;
    let mut prev_end = 0.0;
    for (k, record) in rdr.records().enumerate() {
        let row = k + 1;
        let record = record?;
        check_width(&record, row, width)?;
        let fields: Vec<&str> = record.iter().collect();
        match schema {
            CountsSchema::Daily => {
                let date = NaiveDate::parse_from_str(fields[0], "%Y-%m-%d")
                    .map_err(|e| Error::InvalidInput(format!("row {row}: date {:?}: {e}", fields[0])))?;
                let first = *origin.get_or_insert(date);
                let expected = first + Days::new(k as u64);
                if date != expected {
                    return Err(Error::GapInDates {
                        row,
                        found: date.to_string(),
                        expected: expected.to_string(),
                    });
                }
                boundaries.push(row as f64);
            }
            _ => {
                let start = parse_f64(fields[0], row, "t_start")?;
                let end = parse_f64(fields[1], row, "t_end")?;
                if start != prev_end {
                    return Err(Error::NonContiguousBoundaries { row, start, prev_end });
                }
                boundaries.push(end);
                prev_end = end;
            }
        }
        counts.push(parse_counts(&fields[lead.len()..], row)?);
    }
    if counts.is_empty() {
        return Err(Error::InvalidInput("counts file has no data rows".into()));
    }
    let out = IntervalCounts::new(AggregationGrid::new(boundaries)?, counts)?;
    Ok(match origin {
        Some(d) => out.with_origin(d),
        None => out,
    })
}

pub fn write_counts_csv(path: impl AsRef<Path>, counts: &IntervalCounts, schema: CountsSchema) -> Result<()> {
    let mut w = create(path.as_ref())?;
    write_counts(&mut w, counts, schema)?;
    w.flush()?;
    Ok(())
}

/// `Auto` writes the daily schema when the counts carry a start date and
/// the boundaries schema otherwise. The daily schema needs unit windows.
pub fn write_counts<W: Write>(writer: W, counts: &IntervalCounts, schema: CountsSchema) -> Result<()> {
    let schema = match schema {
        CountsSchema::Auto if counts.origin().is_some() => CountsSchema::Daily,
        CountsSchema::Auto => CountsSchema::Boundaries,
        s => s,
    };
    let b = counts.boundaries();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = match schema {
        CountsSchema::Daily => vec!["date".into()],
        _ => vec!["t_start".into(), "t_end".into()],
    };
    header.extend((1..=counts.dimension()).map(|m| format!("count_{m}")));
    w.write_record(&header)?;
    let origin = if schema == CountsSchema::Daily {
        let origin = counts
            .origin()
            .ok_or_else(|| Error::InvalidInput("the daily schema needs a start date".into()))?;
        if b.iter().enumerate().any(|(i, &t)| t != i as f64) {
            return Err(Error::InvalidInput(
                "the daily schema needs windows of exactly one day".into(),
            ));
        }
        Some(origin)
    } else {
        None
    };
    for (i, row) in counts.rows().iter().enumerate() {
        let mut fields: Vec<String> = match origin {
            Some(d) => vec![(d + Days::new(i as u64)).to_string()],
            None => vec![b[i].to_string(), b[i + 1].to_string()],
        };
        fields.extend(row.iter().map(u64::to_string));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `time,type` rows. The horizon defaults to the last event time.
pub fn read_events_csv(path: impl AsRef<Path>, horizon: Option<f64>, dimension: usize) -> Result<EventSequence> {
    read_events(open(path.as_ref())?, horizon, dimension)
}

pub fn read_events<R: Read>(reader: R, horizon: Option<f64>, dimension: usize) -> Result<EventSequence> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["time", "type"] {
        return Err(Error::InvalidInput(format!(
            "events header must be time,type, got {:?}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut times = Vec::new();
    let mut types = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k + 1;
        let record = record?;
        check_width(&record, row, 2)?;
        times.push(parse_f64(&record[0], row, "time")?);
        let ty: usize = record[1]
            .parse()
            .ok()
            .filter(|&t| t >= 1 && t <= dimension)
            .ok_or_else(|| Error::InvalidInput(format!("row {row}: type {:?} not in 1..={dimension}", &record[1])))?;
        types.push(ty - 1);
    }
    let horizon = match horizon {
        Some(h) => h,
        None => *times
            .last()
            .ok_or_else(|| Error::InvalidInput("an empty events file needs an explicit horizon".into()))?,
    };
    EventSequence::new(times, types, horizon, dimension)
}

pub fn write_events_csv(path: impl AsRef<Path>, events: &EventSequence) -> Result<()> {
    let mut w = create(path.as_ref())?;
    write_events(&mut w, events)?;
    w.flush()?;
    Ok(())
}

pub fn write_events<W: Write>(writer: W, events: &EventSequence) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["time", "type"])?;
    for (&t, &z) in events.times().iter().zip(events.types()) {
        w.write_record([t.to_string(), (z + 1).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `boundary` column, or takes the windows of a counts file in
/// either schema.
pub fn read_grid_csv(path: impl AsRef<Path>) -> Result<AggregationGrid> {
    let mut rdr = csv_reader(open(path.as_ref())?);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["boundary"] {
        if matches!(header.get(0), Some("date" | "t_start")) {
            return Ok(read_counts_csv(path, CountsSchema::Auto)?.grid().clone());
        }
        return Err(Error::InvalidInput(
            "grid header must be boundary, or a counts header".into(),
        ));
    }
    let mut b = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        check_width(&record, k + 1, 1)?;
        b.push(parse_f64(&record[0], k + 1, "boundary")?);
    }
    AggregationGrid::new(b)
}

pub fn write_grid_csv(path: impl AsRef<Path>, grid: &AggregationGrid) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path.as_ref())?);
    w.write_record(["boundary"])?;
    for t in grid.boundaries() {
        w.write_record([t.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Appends chain records as JSON lines, flushing after each one so an
/// interrupted run leaves only complete lines behind.
pub struct ChainWriter<W: Write> {
    inner: W,
}

impl ChainWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        Ok(ChainWriter::new(create(path.as_ref())?))
    }
}

impl<W: Write> ChainWriter<W> {
    pub fn new(inner: W) -> Self {
        ChainWriter { inner }
    }

    pub fn write(&mut self, record: &ChainRecord) -> Result<()> {
        serde_json::to_writer(&mut self.inner, record)?;
        self.inner.write_all(b"\n")?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

pub fn read_chain_jsonl(path: impl AsRef<Path>) -> Result<Vec<ChainRecord>> {
    read_chain(open(path.as_ref())?)
}

pub fn read_chain<R: BufRead>(reader: R) -> Result<Vec<ChainRecord>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn write_summary_csv(path: impl AsRef<Path>, rows: &[ParameterSummary]) -> Result<()> {
    let mut w = create(path.as_ref())?;
    write_summary(&mut w, rows)?;
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(writer: W, rows: &[ParameterSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.parameter.clone(),
            r.estimate.to_string(),
            r.se.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv(path: impl AsRef<Path>) -> Result<Vec<ParameterSummary>> {
    let mut rdr = csv_reader(open(path.as_ref())?);
    if rdr.headers()?.iter().collect::<Vec<_>>() != SUMMARY_HEADER {
        return Err(Error::InvalidInput(format!(
            "summary header must be {}",
            SUMMARY_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k + 1;
        let record = record?;
        check_width(&record, row, 5)?;
        let num = |i: usize| parse_f64(&record[i], row, SUMMARY_HEADER[i]);
        out.push(ParameterSummary {
            parameter: record[0].to_string(),
            estimate: num(1)?,
            se: num(2)?,
            ci_low: num(3)?,
            ci_high: num(4)?,
        });
    }
    Ok(out)
}

/// Versioned JSON form of a summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    pub parameters: Vec<ParameterSummary>,
}

impl SummaryDocument {
    pub fn new(parameters: Vec<ParameterSummary>) -> Self {
        SummaryDocument {
            format_version: SUMMARY_FORMAT_VERSION,
            records: None,
            burn_in_fraction: None,
            acceptance_rate: None,
            parameters,
        }
    }
}

/// Envelope rows `time,type,q<p>...` ordered by type, then time.
pub fn write_envelope<W: Write>(writer: W, envelope: &Envelope) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["time".to_string(), "type".to_string()];
    header.extend(envelope.quantiles.iter().map(|q| format!("q{q}")));
    w.write_record(&header)?;
    for (m, bands) in envelope.bands.iter().enumerate() {
        for (i, t) in envelope.times.iter().enumerate() {
            let mut row = vec![t.to_string(), (m + 1).to_string()];
            row.extend(bands.iter().map(|b| b[i].to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_envelope_csv(path: impl AsRef<Path>, envelope: &Envelope) -> Result<()> {
    let mut w = create(path.as_ref())?;
    write_envelope(&mut w, envelope)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(open(path.as_ref())?)?)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = create(path.as_ref())?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
