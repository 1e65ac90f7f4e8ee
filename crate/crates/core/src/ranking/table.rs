use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::Metric;
use crate::error::{Error, Result};
use crate::metrics::MetricVector;

/// Column order of the result CSV.
pub const CSV_COLUMNS: [&str; 14] = [
    "method_id",
    "subject_id",
    "scanner_id",
    "dsc",
    "h95_mm",
    "avd_pct",
    "lavd",
    "recall",
    "f1",
    "recall_small",
    "recall_large",
    "n_ref_lesions",
    "ref_volume_ml",
    "pred_volume_ml",
];

/// One subject's scores as stored in a result table. Every value may be
/// missing, so tables transcribed from elsewhere (means only, no volumes)
/// load the same way as tables produced by the evaluator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub dsc: Option<f64>,
    pub h95_mm: Option<f64>,
    pub avd_pct: Option<f64>,
    pub lavd: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub recall_small: Option<f64>,
    pub recall_large: Option<f64>,
    pub n_ref_lesions: Option<usize>,
    pub ref_volume_ml: Option<f64>,
    pub pred_volume_ml: Option<f64>,
}

impl Scores {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Dsc => self.dsc,
            Metric::H95 => self.h95_mm,
            Metric::Avd => self.avd_pct,
            Metric::Lavd => self.lavd,
            Metric::Recall => self.recall,
            Metric::F1 => self.f1,
        }
    }

    pub fn set(&mut self, metric: Metric, value: Option<f64>) {
        let slot = match metric {
            Metric::Dsc => &mut self.dsc,
            Metric::H95 => &mut self.h95_mm,
            Metric::Avd => &mut self.avd_pct,
            Metric::Lavd => &mut self.lavd,
            Metric::Recall => &mut self.recall,
            Metric::F1 => &mut self.f1,
        };
        *slot = value;
    }
}

impl From<&MetricVector> for Scores {
    fn from(m: &MetricVector) -> Self {
        Scores {
            dsc: Some(m.dsc),
            h95_mm: m.h95_mm,
            avd_pct: m.avd_pct,
            lavd: m.lavd,
            recall: Some(m.recall),
            f1: Some(m.f1),
            recall_small: m.recall_small,
            recall_large: m.recall_large,
            n_ref_lesions: Some(m.n_ref_lesions),
            ref_volume_ml: Some(m.ref_volume_ml),
            pred_volume_ml: Some(m.pred_volume_ml),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub method_id: String,
    pub subject_id: String,
    pub scanner_id: String,
    pub scores: Scores,
}

/// Validated per-(method, subject) scores with a dense index.
///
/// Methods and subjects keep the order in which they first appear.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    records: Vec<ResultRecord>,
    methods: Vec<String>,
    subjects: Vec<String>,
    /// Scanner of each subject, parallel to `subjects`.
    scanners: Vec<String>,
    /// `cells[method][subject]` indexes `records`.
    cells: Vec<Vec<usize>>,
}

impl ResultTable {
    pub fn new(records: Vec<ResultRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Table("result table is empty".into()));
        }
        let mut methods: Vec<String> = Vec::new();
        let mut method_index: HashMap<&str, usize> = HashMap::new();
        let mut subjects: Vec<String> = Vec::new();
        let mut scanners: Vec<String> = Vec::new();
        let mut subject_index: HashMap<&str, usize> = HashMap::new();
        let mut seen: HashSet<(usize, usize)> = HashSet::new();
        let mut pairs = Vec::with_capacity(records.len());

        for r in &records {
            if r.scanner_id.is_empty() {
                return Err(Error::Table(format!(
                    "subject `{}` has no scanner id",
                    r.subject_id
                )));
            }
            let m = *method_index.entry(&r.method_id).or_insert_with(|| {
                methods.push(r.method_id.clone());
                methods.len() - 1
            });
            let s = match subject_index.get(r.subject_id.as_str()) {
                Some(&s) => {
                    if scanners[s] != r.scanner_id {
                        return Err(Error::Table(format!(
                            "subject `{}` listed with scanners `{}` and `{}`",
                            r.subject_id, scanners[s], r.scanner_id
                        )));
                    }
                    s
                }
                None => {
                    subjects.push(r.subject_id.clone());
                    scanners.push(r.scanner_id.clone());
                    subject_index.insert(&r.subject_id, subjects.len() - 1);
                    subjects.len() - 1
                }
            };
            if !seen.insert((m, s)) {
                return Err(Error::Table(format!(
                    "duplicate record for method `{}`, subject `{}`",
                    r.method_id, r.subject_id
                )));
            }
            pairs.push((m, s));
        }

        let mut cells = vec![vec![usize::MAX; subjects.len()]; methods.len()];
        for (k, &(m, s)) in pairs.iter().enumerate() {
            cells[m][s] = k;
        }
        for (m, row) in cells.iter().enumerate() {
            if let Some(s) = row.iter().position(|&k| k == usize::MAX) {
                return Err(Error::Table(format!(
                    "method `{}` has no record for subject `{}`",
                    methods[m], subjects[s]
                )));
            }
        }

        Ok(Self {
            records,
            methods,
            subjects,
            scanners,
            cells,
        })
    }

    pub fn records(&self) -> &[ResultRecord] {
        &self.records
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn scanner_of(&self, subject: usize) -> &str {
        &self.scanners[subject]
    }

    pub fn scores(&self, method: usize, subject: usize) -> &Scores {
        &self.records[self.cells[method][subject]].scores
    }

    /// Returns a copy with `f` applied to every non-missing value of `metric`.
    pub fn map_metric(&self, metric: Metric, f: impl Fn(f64) -> f64) -> Result<Self> {
        let records = self
            .records
            .iter()
            .cloned()
            .map(|mut r| {
                let v = r.scores.get(metric).map(&f);
                r.scores.set(metric, v);
                r
            })
            .collect();
        Self::new(records)
    }

    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse {
                row: 1,
                column: String::new(),
                message: e.to_string(),
            })?
            .clone();
        let mut index = HashMap::new();
        for (i, h) in headers.iter().enumerate() {
            index.insert(h.trim().to_string(), i);
        }
        for required in ["method_id", "subject_id", "scanner_id"] {
            if !index.contains_key(required) {
                return Err(Error::Parse {
                    row: 1,
                    column: required.into(),
                    message: "required column missing from header".into(),
                });
            }
        }

        let mut records = Vec::new();
        for (k, row) in rdr.records().enumerate() {
            let row_no = k + 2;
            let row = row.map_err(|e| Error::Parse {
                row: row_no,
                column: String::new(),
                message: e.to_string(),
            })?;
            let field = |name: &str| -> Option<&str> {
                index
                    .get(name)
                    .and_then(|&i| row.get(i))
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
            };
            let text = |name: &str| -> Result<String> {
                field(name).map(str::to_string).ok_or_else(|| Error::Parse {
                    row: row_no,
                    column: name.into(),
                    message: "value required".into(),
                })
            };
            let real = |name: &str| -> Result<Option<f64>> {
                field(name)
                    .map(|s| {
                        s.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| Error::Parse {
                                row: row_no,
                                column: name.into(),
                                message: format!("`{s}` is not a finite number"),
                            })
                    })
                    .transpose()
            };
            let count = field("n_ref_lesions")
                .map(|s| {
                    s.parse::<usize>().map_err(|_| Error::Parse {
                        row: row_no,
                        column: "n_ref_lesions".into(),
                        message: format!("`{s}` is not a non-negative integer"),
                    })
                })
                .transpose()?;
            records.push(ResultRecord {
                method_id: text("method_id")?,
                subject_id: text("subject_id")?,
                scanner_id: text("scanner_id")?,
                scores: Scores {
                    dsc: real("dsc")?,
                    h95_mm: real("h95_mm")?,
                    avd_pct: real("avd_pct")?,
                    lavd: real("lavd")?,
                    recall: real("recall")?,
                    f1: real("f1")?,
                    recall_small: real("recall_small")?,
                    recall_large: real("recall_large")?,
                    n_ref_lesions: count,
                    ref_volume_ml: real("ref_volume_ml")?,
                    pred_volume_ml: real("pred_volume_ml")?,
                },
            });
        }
        Self::new(records)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        write_records_csv(&self.records, writer)
    }
}

/// Writes records in the result CSV layout; missing values are empty fields.
pub fn write_records_csv(records: &[ResultRecord], writer: impl Write) -> Result<()> {
    let to_io = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e.to_string()));
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_COLUMNS).map_err(to_io)?;
    let real = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in records {
        let s = &r.scores;
        w.write_record([
            r.method_id.clone(),
            r.subject_id.clone(),
            r.scanner_id.clone(),
            real(s.dsc),
            real(s.h95_mm),
            real(s.avd_pct),
            real(s.lavd),
            real(s.recall),
            real(s.f1),
            real(s.recall_small),
            real(s.recall_large),
            s.n_ref_lesions.map(|n| n.to_string()).unwrap_or_default(),
            real(s.ref_volume_ml),
            real(s.pred_volume_ml),
        ])
        .map_err(to_io)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}
