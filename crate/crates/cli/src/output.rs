use std::io::Write;

use gridloss::io::{format_g17, to_json_string};
use serde::Serialize;

use crate::args::Format;
use crate::Failure;

/// Rows for CSV output; the header is always written.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

pub fn num(x: f64) -> String {
    format_g17(x)
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(format_g17).unwrap_or_default()
}

/// Writes `report` as JSON, or the table built by `table` as CSV.
pub fn emit<T: Serialize>(format: Format, report: &T, table: impl FnOnce() -> Table) -> Result<(), Failure> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match format {
        Format::Json => {
            let text = to_json_string(report)?;
            writeln!(out, "{text}").map_err(|e| Failure::Output(e.to_string()))
        }
        Format::Csv => {
            let table = table();
            let mut w = csv::Writer::from_writer(out);
            let err = |e: csv::Error| Failure::Output(e.to_string());
            w.write_record(&table.header).map_err(err)?;
            for row in &table.rows {
                w.write_record(row).map_err(err)?;
            }
            w.flush().map_err(|e| Failure::Output(e.to_string()))
        }
    }
}
