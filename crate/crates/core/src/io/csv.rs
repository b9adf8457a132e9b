use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::molgraph::{parse_smiles, MolGraph};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing column {0}")]
    MissingColumn(&'static str),
    #[error("no data rows")]
    Empty,
    #[error(transparent)]
    Csv(#[from] ::csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct DatasetRecord {
    pub smiles: String,
    pub mol: MolGraph,
    pub log_solubility: f64,
    pub redox_potential: f64,
    pub sa_score: f64,
}

impl DatasetRecord {
    pub fn conditions(&self) -> [f64; 3] {
        [self.log_solubility, self.redox_potential, self.sa_score]
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub records: Vec<DatasetRecord>,
    /// (1-based data row, reason) for every skipped row.
    pub skipped: Vec<(usize, String)>,
}

const COLUMNS: [&str; 4] = ["smiles", "logS", "redox", "sascore"];

pub fn ingest_reader<R: Read>(reader: R) -> Result<IngestReport, IngestError> {
    let mut rdr = ::csv::ReaderBuilder::new().trim(::csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 4];
    for (k, col) in COLUMNS.iter().enumerate() {
        idx[k] = headers
            .iter()
            .position(|h| h == *col)
            .ok_or(IngestError::MissingColumn(col))?;
    }
    let mut report = IngestReport::default();
    let mut rows = 0;
    for (r, row) in rdr.records().enumerate() {
        let row = row?;
        rows += 1;
        let smiles = row.get(idx[0]).unwrap_or("").to_string();
        let mut props = [0.0; 3];
        let mut bad = None;
        for k in 0..3 {
            match row.get(idx[k + 1]).and_then(|v| v.parse::<f64>().ok()) {
                Some(v) if v.is_finite() => props[k] = v,
                _ => bad = Some(format!("bad {} value", COLUMNS[k + 1])),
            }
        }
        if let Some(reason) = bad {
            report.skipped.push((r + 1, reason));
            continue;
        }
        match parse_smiles(&smiles) {
            Ok(mol) if mol.component_count() == 1 => report.records.push(DatasetRecord {
                smiles,
                mol,
                log_solubility: props[0],
                redox_potential: props[1],
                sa_score: props[2],
            }),
            Ok(_) => report.skipped.push((r + 1, "disconnected molecule".into())),
            Err(e) => report.skipped.push((r + 1, e.to_string())),
        }
    }
    if rows == 0 {
        return Err(IngestError::Empty);
    }
    Ok(report)
}

pub fn ingest_csv(path: &Path) -> Result<IngestReport, IngestError> {
    ingest_reader(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_rows() {
        let text = "smiles,logS,redox,sascore\nCCO,-0.5,0.1,1.2\nc1ccccc1,-2,0.3,1.0\nCC(=O)O,0.1,0.2,1.1\n";
        let r = ingest_reader(text.as_bytes()).unwrap();
        assert_eq!(r.records.len(), 3);
        assert!(r.skipped.is_empty());
    }

    #[test]
    fn malformed_smiles_skipped() {
        let text = "smiles,logS,redox,sascore\nCCO,-0.5,0.1,1.2\nC1CC,-2,0.3,1.0\nCC(=O)O,0.1,0.2,1.1\n";
        let r = ingest_reader(text.as_bytes()).unwrap();
        assert_eq!(r.records.len(), 2);
        assert_eq!(r.skipped[0].0, 2);
    }

    #[test]
    fn missing_column_and_empty() {
        let r = ingest_reader("smiles,logS,redox\nC,1,2\n".as_bytes());
        assert!(matches!(r, Err(IngestError::MissingColumn("sascore"))));
        let r = ingest_reader("smiles,logS,redox,sascore\n".as_bytes());
        assert!(matches!(r, Err(IngestError::Empty)));
    }
}
