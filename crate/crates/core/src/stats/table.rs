// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{one_sample_t, summarize, DeltaSample, StatsError, TestResult};

/// condition -> naming id -> value.
pub type AccuracyTable = BTreeMap<String, BTreeMap<u32, f64>>;

#[derive(Debug, Deserialize)]
struct InRow {
    condition: String,
    naming: u32,
    #[serde(alias = "delta")]
    accuracy: f64,
}

/// Reads `condition,naming,accuracy` rows. A `delta` column is accepted in
/// place of `accuracy`; the second return value says which one was found.
pub fn read_accuracy_csv(reader: impl Read) -> Result<(AccuracyTable, bool), StatsError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let is_delta = rdr.headers()?.iter().any(|h| h == "delta");
    let mut table = AccuracyTable::new();
    for row in rdr.deserialize::<InRow>() {
        let row = row?;
        table.entry(row.condition).or_default().insert(row.naming, row.accuracy);
    }
    Ok((table, is_delta))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub condition: String,
    pub n: usize,
    pub result: TestResult,
}

/// One test per condition. With a `baseline`, each other condition is
/// differenced against it per naming; without one, values are already
/// deltas.
pub fn steering_table(table: &AccuracyTable, baseline: Option<&str>) -> Result<Vec<TableRow>, StatsError> {
    let base = match baseline {
        Some(name) => Some(
            table
                .get(name)
                .ok_or_else(|| StatsError::UnknownCondition(name.to_owned()))?,
        ),
        None => None,
    };
    let mut rows = Vec::new();
    for (condition, values) in table {
        if Some(condition.as_str()) == baseline {
            continue;
        }
        let sample = match base {
            Some(base) => summarize(base, values)?,
            None => DeltaSample::new(values.values().copied().collect())?,
        };
        rows.push(TableRow {
            condition: condition.clone(),
            n: sample.len(),
            result: one_sample_t(&sample)?,
        });
    }
    Ok(rows)
}

/// Columns: condition, mean delta and SE in percent, t, one-tailed p, stars.
pub fn write_table_csv(rows: &[TableRow], writer: impl Write) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["condition", "n", "mean_delta_pct", "se_pct", "t", "p", "sig"])?;
    for row in rows {
        let r = &row.result;
        w.write_record([
            row.condition.clone(),
            row.n.to_string(),
            format!("{:.2}", r.mean * 100.0),
            format!("{:.2}", r.se * 100.0),
            format!("{:.3}", r.t),
            format!("{:.3}", r.p),
            r.stars().to_owned(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_round_trip() {
        let text =
            "condition,naming,accuracy\nbase,1,0.2\nbase,2,0.3\nbase,4,0.1\nsteer,1,0.25\nsteer,2,0.3\nsteer,4,0.2\n";
        let (table, is_delta) = read_accuracy_csv(text.as_bytes()).unwrap();
        assert!(!is_delta);
        let rows = steering_table(&table, Some("base")).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].n, 3);
        let mut out = Vec::new();
        write_table_csv(&rows, &mut out).unwrap();
        let out = String::from_utf8(out).unwrap();
        assert!(out.starts_with("condition,n,mean_delta_pct,se_pct,t,p,sig\nsteer,3,5.00,"));
        assert!(matches!(
            steering_table(&table, Some("nope")),
            Err(StatsError::UnknownCondition(_))
        ));
    }

    #[test]
    fn delta_column() {
        let text = "condition,naming,delta\nx,1,0.1\nx,2,0.3\n";
        let (table, is_delta) = read_accuracy_csv(text.as_bytes()).unwrap();
        assert!(is_delta);
        let rows = steering_table(&table, None).unwrap();
        assert!((rows[0].result.mean - 0.2).abs() < 1e-12);
    }
}
