//! Per-trading-day language-model output vectors.
//!
//! The vector stored under date t summarises news released after the previous close and
//! before the open of day t, so it is known at every decision time on day t and never
//! earlier. Files hold 32-bit floats; in memory the values are widened to `f64`.
//!
//! File format (JSON Lines, sorted by date):
//!
//! ```text
//! {"meta":{"provenance":"model=..., prompt=..."}}
//! {"date":"2024-01-02","dim":4096,"vector":[0.12, ...]}
//! ```

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::panel::TradingCalendar;
use crate::{Error, Result};

/// Default embedding width (hidden size of the 7B model class).
pub const DEFAULT_D_LLM: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingDayPolicy {
    #[default]
    Error,
    ZeroFill,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSeries {
    calendar: TradingCalendar,
    d_llm: usize,
    vectors: Vec<Vec<f64>>,
    provenance: String,
    filled: Vec<NaiveDate>,
}

impl EmbeddingSeries {
    pub fn new(calendar: TradingCalendar, vectors: Vec<Vec<f64>>, provenance: impl Into<String>) -> Result<Self> {
        if calendar.len() != vectors.len() {
            return Err(Error::dims("embedding days", calendar.len(), vectors.len()));
        }
        let d_llm = vectors.first().map_or(0, Vec::len);
        if calendar.is_empty() || d_llm == 0 {
            return Err(Error::InvalidArgument("embedding series must be non-empty".into()));
        }
        for (t, v) in vectors.iter().enumerate() {
            if v.len() != d_llm {
                return Err(Error::dims(format!("embedding on {}", calendar.date(t)), d_llm, v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("embedding on {}", calendar.date(t))));
            }
        }
        Ok(Self {
            calendar,
            d_llm,
            vectors,
            provenance: provenance.into(),
            filled: Vec::new(),
        })
    }

    pub fn calendar(&self) -> &TradingCalendar {
        &self.calendar
    }

    pub fn d_llm(&self) -> usize {
        self.d_llm
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Days that were absent from the source file and zero-filled.
    pub fn filled_days(&self) -> &[NaiveDate] {
        &self.filled
    }

    /// The vector usable for a decision on day `date`.
    ///
    /// This is the vector stored under `date` itself: its news window closes at that
    /// day's open. Dates outside the covered range are an error, as are covered dates that
    /// are not trading days.
    pub fn vector_for_prediction(&self, date: NaiveDate) -> Result<&[f64]> {
        let (first, last) = (
            self.calendar.first().expect("non-empty"),
            self.calendar.last().expect("non-empty"),
        );
        if date < first || date > last {
            return Err(Error::OutOfRange { date, first, last });
        }
        self.calendar
            .position(date)
            .map(|t| self.vectors[t].as_slice())
            .ok_or(Error::NotTradingDay(date))
    }

    /// Writes the JSONL format with a provenance meta line; values are stored as f32.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let meta = MetaLine {
            meta: Meta {
                provenance: self.provenance.clone(),
            },
        };
        serde_json::to_writer(&mut w, &meta)?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
        for (date, v) in self.calendar.dates().iter().zip(&self.vectors) {
            let record = RecordOut {
                date: *date,
                dim: self.d_llm,
                vector: v.iter().map(|x| *x as f32).collect(),
            };
            serde_json::to_writer(&mut w, &record)?;
            writeln!(w).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Serialize, Deserialize)]
struct Meta {
    provenance: String,
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    meta: Meta,
}

#[derive(Serialize)]
struct RecordOut {
    date: NaiveDate,
    dim: usize,
    vector: Vec<f32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordIn {
    date: NaiveDate,
    dim: usize,
    vector: Vec<f32>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Line {
    Meta(MetaLine),
    Record(RecordIn),
}

/// Loads a JSONL embedding file.
///
/// With a calendar, the series is reindexed onto it: every calendar day must have a
/// record (or is zero-filled under [`MissingDayPolicy::ZeroFill`], with a warning) and
/// records dated outside the calendar are rejected. Without one, the series covers
/// exactly the dates present in the file.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    calendar: Option<&TradingCalendar>,
    policy: MissingDayPolicy,
) -> Result<EmbeddingSeries> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let schema = |line: u64, message: String| Error::Schema {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut provenance = String::new();
    let mut dim: Option<usize> = None;
    let mut dates = Vec::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line_no = k as u64 + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line =
            serde_json::from_str(&line).map_err(|e| schema(line_no, format!("bad record: {e}")))?;
        match parsed {
            Line::Meta(m) => {
                if !dates.is_empty() || k > 0 {
                    return Err(schema(line_no, "meta line is only allowed first".into()));
                }
                provenance = m.meta.provenance;
            }
            Line::Record(r) => {
                let expected = *dim.get_or_insert(r.dim);
                if r.dim != expected {
                    return Err(Error::dims(format!("{}:{line_no} dim field", path.display()), expected, r.dim));
                }
                if r.vector.len() != expected {
                    return Err(Error::dims(format!("{}:{line_no} vector length", path.display()), expected, r.vector.len()));
                }
                if r.vector.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(format!("{}:{line_no}", path.display())));
                }
                if let Some(prev) = dates.last() {
                    if r.date <= *prev {
                        return Err(schema(line_no, format!("date {} not after {prev}", r.date)));
                    }
                }
                dates.push(r.date);
                vectors.push(r.vector.into_iter().map(f64::from).collect());
            }
        }
    }
    let Some(dim) = dim else {
        return Err(schema(1, "no embedding records".into()));
    };

    let Some(calendar) = calendar else {
        return EmbeddingSeries::new(TradingCalendar::new(dates)?, vectors, provenance);
    };

    let mut slots: Vec<Option<Vec<f64>>> = vec![None; calendar.len()];
    for (date, v) in dates.into_iter().zip(vectors) {
        let t = calendar.position(date).ok_or(Error::NotTradingDay(date))?;
        slots[t] = Some(v);
    }
    let mut filled = Vec::new();
    let mut out = Vec::with_capacity(slots.len());
    for (t, slot) in slots.into_iter().enumerate() {
        match slot {
            Some(v) => out.push(v),
            None => match policy {
                MissingDayPolicy::Error => return Err(Error::MissingDay(calendar.date(t))),
                MissingDayPolicy::ZeroFill => {
                    log::warn!("no embedding for {}; zero-filled", calendar.date(t));
                    filled.push(calendar.date(t));
                    out.push(vec![0.0; dim]);
                }
            },
        }
    }
    let mut series = EmbeddingSeries::new(calendar.clone(), out, provenance)?;
    series.filled = filled;
    Ok(series)
}

/// Day-by-day Pearson correlations of embedding vectors.
///
/// Rows and columns of days with a constant vector are undefined (NaN) and flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub values: Array2<f64>,
    pub undefined: Vec<bool>,
}

pub fn pairwise_correlation(series: &EmbeddingSeries) -> Result<CorrelationMatrix> {
    let t_len = series.len();
    if t_len < 2 {
        return Err(Error::InvalidArgument("correlation needs at least 2 days".into()));
    }
    let centered: Vec<Option<Vec<f64>>> = series
        .vectors()
        .iter()
        .map(|v| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            (norm > 0.0).then(|| c.into_iter().map(|x| x / norm).collect())
        })
        .collect();
    let undefined: Vec<bool> = centered.iter().map(Option::is_none).collect();
    let mut values = Array2::from_elem((t_len, t_len), f64::NAN);
    for a in 0..t_len {
        let Some(ca) = &centered[a] else { continue };
        values[[a, a]] = 1.0;
        for b in (a + 1)..t_len {
            let Some(cb) = &centered[b] else { continue };
            let r = ca.iter().zip(cb).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0);
            values[[a, b]] = r;
            values[[b, a]] = r;
        }
    }
    Ok(CorrelationMatrix { values, undefined })
}
