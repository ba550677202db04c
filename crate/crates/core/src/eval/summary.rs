use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of the cross-run table: a method's accuracy on one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub reduction_rate: f64,
    pub class: usize,
    pub accuracy: f64,
    pub seed: u64,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("summary table: {e}"))
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if rows.is_empty() {
        w.write_record(["method", "reduction_rate", "class", "accuracy", "seed"])
            .map_err(csv_err)?;
    }
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let rows = vec![SummaryRow {
            method: "label_cyclegan".into(),
            reduction_rate: 0.9,
            class: 2,
            accuracy: 0.75,
            seed: 1,
        }];
        write_summary_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("method,reduction_rate,class,accuracy,seed\n"));
        assert_eq!(read_summary_csv(&path).unwrap(), rows);
    }
}
