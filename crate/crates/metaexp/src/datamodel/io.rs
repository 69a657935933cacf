//! File ingestion and persistence.
//!
//! Listings and outcome panels are CSV with a header row (RFC-4180 style
//! quoting, as produced by the `csv` crate). Sessions and assignments are
//! JSONL, one UTF-8 object per line; assignment files start with a header
//! object that carries a schema version, the randomization seed, and free-
//! form provenance.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    validate_listings, AssignmentRow, DesignAssignment, ListingRecord, Outcome, OutcomePanel,
    SearchSession,
};
use crate::error::{Error, Result};

pub const ASSIGNMENT_SCHEMA_VERSION: u32 = 1;

/// On-disk format for listing datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ListingFormat {
    Csv,
    Jsonl,
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

/// Loads and validates a listing dataset.
pub fn load_listings(path: &Path, format: ListingFormat) -> Result<Vec<ListingRecord>> {
    let records = match format {
        ListingFormat::Csv => {
            let file = File::open(path).map_err(|e| Error::io(path_str(path), e))?;
            let mut reader = csv::Reader::from_reader(BufReader::new(file));
            let mut out = Vec::new();
            for (i, row) in reader.deserialize::<ListingRecord>().enumerate() {
                let rec = row.map_err(|e| Error::schema(i + 1, e.to_string()))?;
                out.push(rec);
            }
            out
        }
        ListingFormat::Jsonl => {
            let file = File::open(path).map_err(|e| Error::io(path_str(path), e))?;
            let mut out = Vec::new();
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path_str(path), e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: ListingRecord =
                    serde_json::from_str(&line).map_err(|e| Error::schema(i + 1, e.to_string()))?;
                out.push(rec);
            }
            out
        }
    };
    validate_listings(&records)?;
    Ok(records)
}

/// Loads search sessions from JSONL, one session per line, order preserved.
pub fn load_sessions(path: &Path) -> Result<Vec<SearchSession>> {
    let file = File::open(path).map_err(|e| Error::io(path_str(path), e))?;
    let mut sessions = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path_str(path), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let session: SearchSession =
            serde_json::from_str(&line).map_err(|e| Error::schema(i + 1, e.to_string()))?;
        session.validate().map_err(|e| match e {
            Error::Schema { message, .. } => Error::schema(i + 1, message),
            other => other,
        })?;
        sessions.push(session);
    }
    Ok(sessions)
}

#[derive(Serialize, Deserialize)]
struct AssignmentHeader {
    schema_version: u32,
    seed: u64,
    provenance: String,
}

#[derive(Serialize, Deserialize)]
struct AssignmentLine {
    listing_id: String,
    #[serde(flatten)]
    row: AssignmentRow,
}

/// Persists a design assignment as JSONL (header line, then one row per
/// listing in sorted id order).
pub fn save_assignment(assignment: &DesignAssignment, path: &Path) -> Result<()> {
    assignment.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path_str(path), e))?;
    let mut w = BufWriter::new(file);
    let header = AssignmentHeader {
        schema_version: ASSIGNMENT_SCHEMA_VERSION,
        seed: assignment.seed,
        provenance: assignment.provenance.clone(),
    };
    let emit = |w: &mut BufWriter<File>, v: String| -> Result<()> {
        writeln!(w, "{v}").map_err(|e| Error::io(path_str(path), e))
    };
    emit(&mut w, serde_json::to_string(&header).expect("header serializes"))?;
    for (listing_id, row) in &assignment.rows {
        let line = AssignmentLine { listing_id: listing_id.clone(), row: row.clone() };
        emit(&mut w, serde_json::to_string(&line).expect("row serializes"))?;
    }
    w.flush().map_err(|e| Error::io(path_str(path), e))
}

/// Loads a design assignment and re-validates every invariant, so tampered
/// files (mixed treatments inside a cluster-randomized cluster, duplicate
/// listings, missing fields) are rejected.
pub fn load_assignment(path: &Path) -> Result<DesignAssignment> {
    let file = File::open(path).map_err(|e| Error::io(path_str(path), e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header: AssignmentHeader = match lines.next() {
        Some((_, line)) => {
            let line = line.map_err(|e| Error::io(path_str(path), e))?;
            serde_json::from_str(&line).map_err(|e| Error::schema(1, e.to_string()))?
        }
        None => return Err(Error::schema(None, "empty assignment file")),
    };
    if header.schema_version != ASSIGNMENT_SCHEMA_VERSION {
        return Err(Error::schema(
            1,
            format!("unsupported schema version {}", header.schema_version),
        ));
    }
    let mut rows = BTreeMap::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path_str(path), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: AssignmentLine =
            serde_json::from_str(&line).map_err(|e| Error::schema(i + 1, e.to_string()))?;
        if rows.insert(parsed.listing_id.clone(), parsed.row).is_some() {
            return Err(Error::schema(i + 1, format!("duplicate listing `{}`", parsed.listing_id)));
        }
    }
    let assignment =
        DesignAssignment { seed: header.seed, provenance: header.provenance, rows };
    assignment.validate()?;
    Ok(assignment)
}

/// Persists an outcome panel as CSV (listing_id, bookings, nights, gross_spend).
pub fn save_outcomes(panel: &OutcomePanel, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path_str(path), e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["listing_id", "bookings", "nights", "gross_spend"])
        .map_err(|e| Error::schema(None, e.to_string()))?;
    for (id, o) in &panel.outcomes {
        w.write_record([
            id.as_str(),
            &o.bookings.to_string(),
            &o.nights.to_string(),
            &format!("{:?}", o.gross_spend),
        ])
        .map_err(|e| Error::schema(None, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path_str(path), e))
}

/// Loads an outcome panel from CSV.
pub fn load_outcomes(path: &Path) -> Result<OutcomePanel> {
    let file = File::open(path).map_err(|e| Error::io(path_str(path), e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let mut outcomes = BTreeMap::new();
    #[derive(Deserialize)]
    struct Row {
        listing_id: String,
        bookings: u64,
        nights: u64,
        gross_spend: f64,
    }
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::schema(i + 1, e.to_string()))?;
        if outcomes
            .insert(
                row.listing_id.clone(),
                Outcome { bookings: row.bookings, nights: row.nights, gross_spend: row.gross_spend },
            )
            .is_some()
        {
            return Err(Error::schema(i + 1, format!("duplicate listing `{}`", row.listing_id)));
        }
    }
    let panel = OutcomePanel { outcomes };
    panel.validate()?;
    Ok(panel)
}
