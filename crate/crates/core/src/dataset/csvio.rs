//! CSV caches: header `label,f1,...,fd`, one sample per row.

use std::path::Path;

use ndarray::Array2;

use super::LabeledDataset;
use crate::error::{Error, Result};

pub fn write_csv(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["label".to_string()];
    header.extend((1..=ds.dim()).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for (i, label) in ds.labels().iter().enumerate() {
        let mut rec = vec![label.to_string()];
        rec.extend(ds.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<LabeledDataset> {
    let mut r = csv::Reader::from_path(path)?;
    let dim = r.headers()?.len().saturating_sub(1);
    let mut labels = Vec::new();
    let mut flat = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad =
            |what: &str| Error::Format(format!("{}: row {}: {what}", path.display(), line + 2));
        if rec.len() != dim + 1 {
            return Err(bad("wrong number of columns"));
        }
        labels.push(
            rec[0]
                .parse::<usize>()
                .map_err(|_| bad("label is not an integer"))?,
        );
        for field in rec.iter().skip(1) {
            flat.push(
                field
                    .parse::<f64>()
                    .map_err(|_| bad("feature is not a number"))?,
            );
        }
    }
    let features = Array2::from_shape_vec((labels.len(), dim), flat)
        .map_err(|e| Error::Format(e.to_string()))?;
    LabeledDataset::new(features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn csv_round_trip(rows in prop::collection::vec(prop::collection::vec(0.0f64..1e6, 3), 1..20)) {
            let labels: Vec<usize> = (0..rows.len()).map(|i| i % 10).collect();
            let ds = LabeledDataset::from_rows(&rows, labels).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("ds.csv");
            write_csv(&ds, &path).unwrap();
            prop_assert_eq!(read_csv(&path).unwrap(), ds);
        }
    }

    #[test]
    fn bad_rows_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "label,f1\n0,0.5\n1,abc\n").unwrap();
        let err = read_csv(&path).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
    }
}
