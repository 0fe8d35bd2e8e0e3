//! CSV ingestion and emission.
//!
//! Quote files use the fixed header
//! `contract_id,date,ttm_years,opt_type,delta,strike,spot,theo_price,div_rate,rf_rate,garch_vol,target_price`
//! with ISO-8601 dates, `.` decimal separators, and option type
//! encoded +1/-1. Numbers are written in shortest round-trip form so a
//! save/load cycle reproduces values exactly.

use std::path::Path;

use chrono::NaiveDate;

use super::{DataError, OptionQuote};
use crate::pricing::OptionKind;

pub const QUOTE_HEADER: [&str; 12] = [
    "contract_id",
    "date",
    "ttm_years",
    "opt_type",
    "delta",
    "strike",
    "spot",
    "theo_price",
    "div_rate",
    "rf_rate",
    "garch_vol",
    "target_price",
];

/// A rejected input row and why.
#[derive(Debug, Clone)]
pub struct RowIssue {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub reason: String,
}

/// Result of loading a quote file.
#[derive(Debug)]
pub struct CsvLoad {
    pub quotes: Vec<OptionQuote>,
    /// Rows rejected for schema violations, with diagnostics.
    pub rejected: Vec<RowIssue>,
    /// True when the file carried a valid header but no data rows.
    pub empty: bool,
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
    row: usize,
) -> Result<T, DataError> {
    let raw = record.get(idx).ok_or_else(|| DataError::Row {
        row,
        reason: format!("missing column '{name}'"),
    })?;
    raw.trim().parse().map_err(|_| DataError::Row {
        row,
        reason: format!("cannot parse {name}='{raw}'"),
    })
}

/// Loads and validates a quote CSV. Unparseable rows are hard errors;
/// parseable rows that violate schema invariants are rejected with
/// per-row diagnostics.
pub fn load_csv(path: &Path) -> Result<CsvLoad, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| DataError::Csv(e.to_string()))?;
    {
        let headers = reader.headers().map_err(|e| DataError::Csv(e.to_string()))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != QUOTE_HEADER {
            return Err(DataError::Csv(format!(
                "unexpected header {got:?}; want {QUOTE_HEADER:?}"
            )));
        }
    }
    let mut quotes = Vec::new();
    let mut rejected = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DataError::Row {
            row,
            reason: e.to_string(),
        })?;
        let date_raw: String = parse_field(&record, 1, "date", row)?;
        let date = NaiveDate::parse_from_str(&date_raw, "%Y-%m-%d").map_err(|_| {
            DataError::Row {
                row,
                reason: format!("cannot parse date '{date_raw}'"),
            }
        })?;
        let opt_type: f64 = parse_field(&record, 3, "opt_type", row)?;
        let Some(kind) = OptionKind::from_encoded(opt_type) else {
            rejected.push(RowIssue {
                row,
                reason: format!("opt_type must be +1 or -1, got {opt_type}"),
            });
            continue;
        };
        let quote = OptionQuote {
            contract_id: parse_field(&record, 0, "contract_id", row)?,
            date,
            ttm_years: parse_field(&record, 2, "ttm_years", row)?,
            kind,
            delta: parse_field(&record, 4, "delta", row)?,
            strike: parse_field(&record, 5, "strike", row)?,
            spot: parse_field(&record, 6, "spot", row)?,
            theo_price: parse_field(&record, 7, "theo_price", row)?,
            div_rate: parse_field(&record, 8, "div_rate", row)?,
            rf_rate: parse_field(&record, 9, "rf_rate", row)?,
            garch_vol: parse_field(&record, 10, "garch_vol", row)?,
            target_price: parse_field(&record, 11, "target_price", row)?,
        };
        match quote.check() {
            Ok(()) => quotes.push(quote),
            Err(reason) => rejected.push(RowIssue { row, reason }),
        }
    }
    let empty = quotes.is_empty() && rejected.is_empty();
    Ok(CsvLoad {
        quotes,
        rejected,
        empty,
    })
}

/// Writes quotes in the fixed dialect.
pub fn save_csv(path: &Path, quotes: &[OptionQuote]) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| DataError::Csv(e.to_string()))?;
    writer
        .write_record(QUOTE_HEADER)
        .map_err(|e| DataError::Csv(e.to_string()))?;
    for q in quotes {
        writer
            .write_record(&[
                q.contract_id.clone(),
                q.date.format("%Y-%m-%d").to_string(),
                format!("{}", q.ttm_years),
                format!("{}", q.kind.encoded()),
                format!("{}", q.delta),
                format!("{}", q.strike),
                format!("{}", q.spot),
                format!("{}", q.theo_price),
                format!("{}", q.div_rate),
                format!("{}", q.rf_rate),
                format!("{}", q.garch_vol),
                format!("{}", q.target_price),
            ])
            .map_err(|e| DataError::Csv(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Loads a `date,return` CSV for volatility fitting.
pub fn load_returns_csv(path: &Path) -> Result<Vec<(NaiveDate, f64)>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| DataError::Csv(e.to_string()))?;
    {
        let headers = reader.headers().map_err(|e| DataError::Csv(e.to_string()))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != ["date", "return"] {
            return Err(DataError::Csv(format!(
                "unexpected header {got:?}; want [\"date\", \"return\"]"
            )));
        }
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DataError::Row {
            row,
            reason: e.to_string(),
        })?;
        let date_raw: String = parse_field(&record, 0, "date", row)?;
        let date = NaiveDate::parse_from_str(&date_raw, "%Y-%m-%d").map_err(|_| {
            DataError::Row {
                row,
                reason: format!("cannot parse date '{date_raw}'"),
            }
        })?;
        out.push((date, parse_field(&record, 1, "return", row)?));
    }
    if out.is_empty() {
        return Err(DataError::Empty("returns file has no rows".into()));
    }
    Ok(out)
}

/// Writes a `date,sigma_annual` volatility series.
pub fn save_vol_series_csv(
    path: &Path,
    series: &crate::garch::VolSeries,
) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| DataError::Csv(e.to_string()))?;
    writer
        .write_record(["date", "sigma_annual"])
        .map_err(|e| DataError::Csv(e.to_string()))?;
    for (d, s) in series.dates.iter().zip(&series.sigma) {
        writer
            .write_record(&[d.format("%Y-%m-%d").to_string(), format!("{s}")])
            .map_err(|e| DataError::Csv(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}
