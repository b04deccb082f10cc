//! The counts file: a flat CSV of coincidence records.
//!
//! Schema: `setting_a,setting_b,tau_ps,counts,integration_s` with setting
//! tokens from {H, V, D, A, R, L} and `setting_b` empty for single-qubit
//! data. Ingestion validates every row and reports all violations with
//! their line numbers instead of stopping at the first.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tomography::{CoincidenceRecord, MeasurementSetting, Polarization};

pub const COUNTS_HEADER: [&str; 5] = ["setting_a", "setting_b", "tau_ps", "counts", "integration_s"];

/// Write records in the counts schema. Byte-stable for a fixed record set.
pub fn export_counts(records: &[CoincidenceRecord], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(COUNTS_HEADER)?;
    for r in records {
        writer.write_record([
            r.setting.signal.token(),
            r.setting.herald.map_or("", |h| h.token()),
            &format_num(r.setting.storage_time_ps),
            &r.counts.to_string(),
            &format_num(r.setting.integration_s),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn format_num(x: f64) -> String {
    // shortest round-trip representation keeps the file byte-stable
    let mut buf = ryu_format(x);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_format(x: f64) -> String {
    // serde_json's float formatting is the shortest round-trip form
    serde_json::to_string(&x).unwrap_or_else(|_| x.to_string())
}

/// Read and validate a counts file.
///
/// Violations carry `line N:` prefixes; the error lists every bad row.
pub fn ingest_counts(path: &Path) -> Result<Vec<CoincidenceRecord>> {
    let text = std::fs::read_to_string(path)?;
    ingest_counts_str(&text)
}

pub fn ingest_counts_str(text: &str) -> Result<Vec<CoincidenceRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut violations: Vec<String> = Vec::new();
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::Ingestion(vec![format!("line 1: unreadable header: {e}")]))?;
        let expected: Vec<&str> = COUNTS_HEADER.to_vec();
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(Error::Ingestion(vec![format!(
                "line 1: header must be {}, got {}",
                expected.join(","),
                got.join(",")
            )]));
        }
    }

    let mut records = Vec::new();
    let mut seen: BTreeSet<(String, String, u64)> = BTreeSet::new();

    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                violations.push(format!("line {line}: unreadable row: {e}"));
                continue;
            }
        };
        if row.len() != 5 {
            violations.push(format!(
                "line {line}: expected 5 columns, got {}",
                row.len()
            ));
            continue;
        }
        let mut row_ok = true;

        let signal = match Polarization::parse(row[0].trim()) {
            Ok(p) => Some(p),
            Err(_) => {
                violations.push(format!(
                    "line {line}: bad setting_a token {:?}",
                    row[0].trim()
                ));
                row_ok = false;
                None
            }
        };
        let herald_field = row[1].trim();
        let herald = if herald_field.is_empty() {
            None
        } else {
            match Polarization::parse(herald_field) {
                Ok(p) => Some(p),
                Err(_) => {
                    violations.push(format!(
                        "line {line}: bad setting_b token {herald_field:?}"
                    ));
                    row_ok = false;
                    None
                }
            }
        };
        let tau_ps = match row[2].trim().parse::<f64>() {
            Ok(t) if t >= 0.0 && t.is_finite() => Some(t),
            Ok(t) => {
                violations.push(format!("line {line}: tau_ps must be non-negative, got {t}"));
                row_ok = false;
                None
            }
            Err(_) => {
                violations.push(format!("line {line}: bad tau_ps {:?}", row[2].trim()));
                row_ok = false;
                None
            }
        };
        let counts = match row[3].trim().parse::<i64>() {
            Ok(n) if n >= 0 => Some(n as u64),
            Ok(n) => {
                violations.push(format!("line {line}: counts must be non-negative, got {n}"));
                row_ok = false;
                None
            }
            Err(_) => {
                violations.push(format!("line {line}: bad counts {:?}", row[3].trim()));
                row_ok = false;
                None
            }
        };
        let integration_s = match row[4].trim().parse::<f64>() {
            Ok(t) if t > 0.0 && t.is_finite() => Some(t),
            Ok(t) => {
                violations.push(format!(
                    "line {line}: integration_s must be positive, got {t}"
                ));
                row_ok = false;
                None
            }
            Err(_) => {
                violations.push(format!(
                    "line {line}: bad integration_s {:?}",
                    row[4].trim()
                ));
                row_ok = false;
                None
            }
        };

        if !row_ok {
            continue;
        }
        let (signal, tau_ps, counts, integration_s) = (
            signal.unwrap(),
            tau_ps.unwrap(),
            counts.unwrap(),
            integration_s.unwrap(),
        );

        let key = (
            signal.token().to_string(),
            herald.map_or(String::new(), |h| h.token().to_string()),
            tau_ps.to_bits(),
        );
        if !seen.insert(key) {
            violations.push(format!(
                "line {line}: duplicate setting ({}, {}) at tau = {tau_ps} ps",
                signal,
                herald.map_or("-".to_string(), |h| h.to_string())
            ));
            continue;
        }

        let setting = match herald {
            None => MeasurementSetting::single(signal, tau_ps, integration_s),
            Some(h) => MeasurementSetting::pair(signal, h, tau_ps, integration_s),
        };
        records.push(CoincidenceRecord::new(setting, counts));
    }

    if !violations.is_empty() {
        return Err(Error::Ingestion(violations));
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_file_round_trips() {
        let text = "setting_a,setting_b,tau_ps,counts,integration_s\n\
                    H,,0,498,60\n\
                    V,,0,127,60\n\
                    D,,0,310,60\n\
                    A,,0,305,60\n\
                    R,,0,298,60\n\
                    L,,0,312,60\n";
        let records = ingest_counts_str(text).unwrap();
        assert_eq!(records.len(), 6);
        assert_eq!(records[0].setting.signal, Polarization::H);
        assert_eq!(records[0].counts, 498);
        assert!(records[0].setting.herald.is_none());

        let dir = std::env::temp_dir().join("phononmem_counts_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.csv");
        export_counts(&records, &path).unwrap();
        let back = ingest_counts(&path).unwrap();
        assert_eq!(records, back);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn two_qubit_rows_parse() {
        let text = "setting_a,setting_b,tau_ps,counts,integration_s\n\
                    H,V,0.5,42,180\n";
        let records = ingest_counts_str(text).unwrap();
        assert_eq!(records[0].setting.herald, Some(Polarization::V));
        assert_eq!(records[0].setting.dim(), 4);
    }

    #[test]
    fn negative_counts_rejected_with_line_number() {
        let text = "setting_a,setting_b,tau_ps,counts,integration_s\n\
                    H,,0,100,60\n\
                    V,,0,-1,60\n";
        match ingest_counts_str(text) {
            Err(Error::Ingestion(violations)) => {
                assert_eq!(violations.len(), 1);
                assert!(violations[0].starts_with("line 3:"), "{}", violations[0]);
            }
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn all_violations_are_listed() {
        let text = "setting_a,setting_b,tau_ps,counts,integration_s\n\
                    Q,,0,10,60\n\
                    H,,-1,10,60\n\
                    H,,0,10,0\n\
                    H,,0,x,60\n";
        match ingest_counts_str(text) {
            Err(Error::Ingestion(violations)) => {
                assert_eq!(violations.len(), 4);
            }
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_keys_rejected() {
        let text = "setting_a,setting_b,tau_ps,counts,integration_s\n\
                    H,,0,100,60\n\
                    H,,0,90,60\n";
        match ingest_counts_str(text) {
            Err(Error::Ingestion(violations)) => {
                assert!(violations[0].contains("duplicate"));
            }
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_header_rejected() {
        let text = "a,b,c,d,e\nH,,0,1,1\n";
        assert!(matches!(ingest_counts_str(text), Err(Error::Ingestion(_))));
    }
}
