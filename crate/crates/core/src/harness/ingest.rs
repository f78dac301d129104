use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::datagen::{Dataset, Origin, Standardization};
use crate::error::{Error, Result};

/// Loads a labelled CSV with a header row. Every column other than
/// `label_column` must be numeric. Labels are either numeric `-1`/`+1` or any
/// two distinct strings, mapped to `-1` and `+1` in lexicographic order.
/// Features are standardized to mean 0 and unit variance; constant columns
/// are dropped with a warning.
pub fn ingest_csv(path: &Path, label_column: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, label_column)
}

pub fn ingest_reader<R: std::io::Read>(input: R, label_column: &str) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = r.headers()?.clone();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Schema(format!("no column named '{label_column}'")))?;
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&j| j != label_idx).collect();
    if feature_cols.is_empty() {
        return Err(Error::Schema("no feature columns".into()));
    }

    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); feature_cols.len()];
    let mut labels = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Schema(format!(
                "row {} has {} fields",
                line + 1,
                rec.len()
            )));
        }
        for (k, &j) in feature_cols.iter().enumerate() {
            let v: f64 = rec[j].parse().map_err(|_| {
                Error::Parse(format!(
                    "row {}, column '{}': '{}' is not numeric",
                    line + 1,
                    &header[j],
                    &rec[j]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Parse(format!(
                    "row {}, column '{}': non-finite value",
                    line + 1,
                    &header[j]
                )));
            }
            cols[k].push(v);
        }
        labels.push(rec[label_idx].to_string());
    }
    if labels.is_empty() {
        return Err(Error::Schema("no data rows".into()));
    }
    let (y, label_map) = map_labels(&labels)?;

    let n = labels.len() as f64;
    let (mut kept, mut dropped, mut means, mut stds) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, col) in cols.iter().enumerate() {
        let mean = col.iter().sum::<f64>() / n;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if sd <= 1e-12 * mean.abs().max(1.0) {
            log::warn!("dropping constant column '{}'", &header[feature_cols[k]]);
            dropped.push(feature_cols[k]);
        } else {
            kept.push(k);
            means.push(mean);
            stds.push(sd);
        }
    }
    if kept.is_empty() {
        return Err(Error::Degenerate("every feature column is constant".into()));
    }
    let x = DMatrix::from_fn(labels.len(), kept.len(), |i, j| {
        (cols[kept[j]][i] - means[j]) / stds[j]
    });
    Ok(Dataset {
        x,
        y,
        origin: Origin::Imported {
            standardization: Some(Standardization {
                kept_columns: kept.iter().map(|&k| feature_cols[k]).collect(),
                dropped_columns: dropped,
                means,
                stds,
                label_map,
            }),
        },
    })
}

fn map_labels(labels: &[String]) -> Result<(DVector<f64>, Option<(String, String)>)> {
    let mut classes: Vec<&str> = labels.iter().map(String::as_str).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() != 2 {
        return Err(Error::Schema(format!(
            "label column must hold exactly two classes, found {}",
            classes.len()
        )));
    }
    let numeric: Option<Vec<f64>> = classes.iter().map(|c| c.parse::<f64>().ok()).collect();
    if let Some(v) = numeric {
        let mut v = v;
        v.sort_by(f64::total_cmp);
        if v == [-1.0, 1.0] {
            let y = labels
                .iter()
                .map(|l| l.parse::<f64>().unwrap())
                .collect::<Vec<_>>();
            return Ok((DVector::from_vec(y), None));
        }
    }
    let (neg, pos) = (classes[0], classes[1]);
    let y = labels
        .iter()
        .map(|l| if l == neg { -1.0 } else { 1.0 })
        .collect::<Vec<_>>();
    Ok((
        DVector::from_vec(y),
        Some((neg.to_string(), pos.to_string())),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest(text: &str) -> Result<Dataset> {
        ingest_reader(text.as_bytes(), "label")
    }

    fn standardization(ds: &Dataset) -> &Standardization {
        match &ds.origin {
            Origin::Imported {
                standardization: Some(s),
            } => s,
            _ => panic!("expected imported data"),
        }
    }

    #[test]
    fn toy_file() {
        let ds = ingest("a,b,c,label\n1,2,3,1\n2,0,1,-1\n3,1,4,1\n0,5,2,-1\n").unwrap();
        assert_eq!((ds.n(), ds.d()), (4, 3));
        assert!(ds.truth().is_none());
        assert_eq!(ds.y.as_slice(), &[1.0, -1.0, 1.0, -1.0]);
        for j in 0..3 {
            let col = ds.x.column(j);
            assert!(col.mean().abs() < 1e-12);
            assert!((col.norm_squared() / 4.0 - 1.0).abs() < 1e-12);
        }
        assert!(standardization(&ds).label_map.is_none());
    }

    #[test]
    fn string_labels_map_lexicographically() {
        let ds = ingest("label,x\nB,1\nA,2\nB,3\n").unwrap();
        assert_eq!(ds.y.as_slice(), &[1.0, -1.0, 1.0]);
        assert_eq!(
            standardization(&ds).label_map,
            Some(("A".into(), "B".into()))
        );
        // numeric labels other than -1/+1 are treated as strings too
        let ds = ingest("label,x\n1,1\n0,2\n").unwrap();
        assert_eq!(ds.y.as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn constant_column_is_dropped() {
        let ds = ingest("a,k,b,label\n1,5,2,A\n2,5,0,B\n3,5,1,A\n").unwrap();
        assert_eq!(ds.d(), 2);
        let s = standardization(&ds);
        assert_eq!(s.dropped_columns, vec![1]);
        assert_eq!(s.kept_columns, vec![0, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            ingest("a,label\nx,1\n2,-1\n"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            ingest("a,label\n1,1\n2,1\n"),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            ingest("a,label\n1,A\n2,B\n3,C\n"),
            Err(Error::Schema(_))
        ));
        assert!(matches!(ingest("a,b\n1,2\n"), Err(Error::Schema(_))));
    }
}
