//! CSV ingestion and export.
//!
//! Feature files: header `date,stock_id,f0,...,f{m-1}`, one row per (date, stock).
//! Return files: a `# horizon=<h>` comment line, then header `date,stock_id,ret`.
//! Rows may appear in any order; they are regrouped per date and sorted by stock id.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;

use super::{check_aligned, CrossSection, FeaturePanel, ReturnPanel, TradingCalendar};
use crate::{Error, Result};

type Grouped<T> = BTreeMap<NaiveDate, BTreeMap<String, T>>;

fn schema(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn reader(content: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(content.as_bytes())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_date(path: &Path, line: u64, s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|e| schema(path, line, format!("bad date {s:?}: {e}")))
}

fn parse_value(path: &Path, line: u64, column: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| schema(path, line, format!("column {column}: not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(schema(path, line, format!("column {column}: non-finite value {s}")));
    }
    Ok(v)
}

/// Reads `date,stock_id,<value columns...>` rows into a per-date map.
fn read_rows(path: &Path, content: &str, value_columns: &[String]) -> Result<Grouped<Vec<f64>>> {
    let mut rdr = reader(content);
    let headers = rdr.headers()?.clone();
    let expected: Vec<&str> = ["date", "stock_id"]
        .into_iter()
        .chain(value_columns.iter().map(String::as_str))
        .collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(schema(
            path,
            headers.position().map_or(1, |p| p.line()),
            format!("expected header {:?}, found {:?}", expected.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut grouped: Grouped<Vec<f64>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            schema(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != expected.len() {
            return Err(schema(
                path,
                line,
                format!("expected {} fields, found {}", expected.len(), record.len()),
            ));
        }
        let date = parse_date(path, line, &record[0])?;
        let stock_id = record[1].to_string();
        if stock_id.is_empty() {
            return Err(schema(path, line, "empty stock_id"));
        }
        let values = value_columns
            .iter()
            .enumerate()
            .map(|(j, name)| parse_value(path, line, name, &record[j + 2]))
            .collect::<Result<Vec<_>>>()?;
        let day = grouped.entry(date).or_default();
        if day.contains_key(&stock_id) {
            return Err(Error::DuplicateRow {
                path: path.to_path_buf(),
                line,
                date,
                stock_id,
            });
        }
        day.insert(stock_id, values);
    }
    Ok(grouped)
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeaturePanel> {
    let path = path.as_ref();
    let content = read(path)?;
    let m = {
        let mut rdr = reader(&content);
        let headers = rdr.headers()?;
        headers.len().saturating_sub(2)
    };
    if m == 0 {
        return Err(schema(path, 1, "feature file needs at least one feature column"));
    }
    let names: Vec<String> = (0..m).map(|j| format!("f{j}")).collect();
    let grouped = read_rows(path, &content, &names)?;

    let mut dates = Vec::with_capacity(grouped.len());
    let mut sections = Vec::with_capacity(grouped.len());
    for (date, rows) in grouped {
        let n = rows.len();
        let mut features = Array2::zeros((n, m));
        let mut ids = Vec::with_capacity(n);
        for (i, (id, values)) in rows.into_iter().enumerate() {
            features.row_mut(i).assign(&ndarray::ArrayView1::from(&values));
            ids.push(id);
        }
        dates.push(date);
        sections.push(CrossSection::new(ids, features)?);
    }
    FeaturePanel::new(TradingCalendar::new(dates)?, sections, m)
}

fn read_horizon(path: &Path, content: &str) -> Result<usize> {
    for (k, line) in content.lines().enumerate() {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some(value) = rest.trim().strip_prefix("horizon=") {
                return value
                    .trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|h| *h >= 1)
                    .ok_or_else(|| schema(path, k as u64 + 1, format!("bad horizon {value:?}")));
            }
        }
    }
    Err(schema(path, 1, "missing `# horizon=<h>` comment line"))
}

pub fn load_returns(path: impl AsRef<Path>) -> Result<ReturnPanel> {
    let path = path.as_ref();
    let content = read(path)?;
    let horizon = read_horizon(path, &content)?;
    let grouped = read_rows(path, &content, &["ret".to_string()])?;

    let mut dates = Vec::with_capacity(grouped.len());
    let mut ids = Vec::with_capacity(grouped.len());
    let mut returns = Vec::with_capacity(grouped.len());
    for (date, rows) in grouped {
        let (day_ids, day_rets): (Vec<String>, Vec<f64>) =
            rows.into_iter().map(|(id, v)| (id, v[0])).unzip();
        if let Some((id, r)) = day_ids.iter().zip(&day_rets).find(|(_, r)| **r <= -1.0) {
            return Err(schema(
                path,
                0,
                format!("return {r} for ({date}, {id}) is not > -1"),
            ));
        }
        dates.push(date);
        ids.push(day_ids);
        returns.push(day_rets);
    }
    ReturnPanel::new(TradingCalendar::new(dates)?, horizon, ids, returns)
}

/// Loads a feature/return file pair and checks they share calendar and stock ids.
pub fn load_panel(
    features_path: impl AsRef<Path>,
    returns_path: impl AsRef<Path>,
) -> Result<(FeaturePanel, ReturnPanel)> {
    let features = load_features(features_path)?;
    let returns = load_returns(returns_path)?;
    check_aligned(&features, &returns)?;
    Ok((features, returns))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().from_writer(file))
}

pub fn save_features(panel: &FeaturePanel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let mut header = vec!["date".to_string(), "stock_id".to_string()];
    header.extend((0..panel.m()).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for (date, section) in panel.calendar().dates().iter().zip(panel.sections()) {
        let date = date.to_string();
        for (id, row) in section.stock_ids.iter().zip(section.features.rows()) {
            let mut record = Vec::with_capacity(panel.m() + 2);
            record.push(date.clone());
            record.push(id.clone());
            record.extend(row.iter().map(|x| x.to_string()));
            w.write_record(&record)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn save_returns(panel: &ReturnPanel, path: impl AsRef<Path>) -> Result<()> {
    use std::io::Write;

    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(file, "# horizon={}", panel.horizon()).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().from_writer(file);
    w.write_record(["date", "stock_id", "ret"])?;
    for (t, date) in panel.calendar().dates().iter().enumerate() {
        let date = date.to_string();
        for (id, r) in panel.stock_ids(t).iter().zip(panel.returns(t)) {
            w.write_record([date.as_str(), id.as_str(), r.to_string().as_str()])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn save_panel(
    features: &FeaturePanel,
    returns: &ReturnPanel,
    features_path: impl AsRef<Path>,
    returns_path: impl AsRef<Path>,
) -> Result<()> {
    save_features(features, features_path)?;
    save_returns(returns, returns_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    const FEATURES: &str = "date,stock_id,f0,f1\n\
        2024-01-02,B,1.5,2\n2024-01-02,A,0.5,-1\n2024-01-02,C,3,4\n\
        2024-01-03,A,1,1\n2024-01-03,B,2,2\n2024-01-03,C,3,3\n";
    const RETURNS: &str = "# horizon=1\ndate,stock_id,ret\n\
        2024-01-02,A,0.01\n2024-01-02,B,-0.02\n2024-01-02,C,0\n\
        2024-01-03,A,0.1\n2024-01-03,B,0.2\n2024-01-03,C,-0.5\n";

    #[test]
    fn loads_well_formed_pair() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(&dir, "f.csv", FEATURES);
        let r = write(&dir, "r.csv", RETURNS);
        let (features, returns) = load_panel(&f, &r).unwrap();
        assert_eq!(features.m(), 2);
        assert_eq!(features.len(), 2);
        assert_eq!(features.section(0).len(), 3);
        assert_eq!(features.section(1).len(), 3);
        assert_eq!(features.section(0).stock_ids, vec!["A", "B", "C"]);
        assert_eq!(features.section(0).features[[1, 0]], 1.5);
        assert_eq!(returns.horizon(), 1);
        assert_eq!(returns.returns(1), &[0.1, 0.2, -0.5]);
    }

    #[test]
    fn nan_cell_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(&dir, "f.csv", "date,stock_id,f0,f1\n2024-01-02,A,1,NaN\n");
        let err = load_features(&f).unwrap_err();
        match err {
            Error::Schema { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("f1"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn date_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(&dir, "f.csv", FEATURES);
        let r = write(
            &dir,
            "r.csv",
            &RETURNS.replace("2024-01-03", "2024-01-04"),
        );
        assert!(matches!(load_panel(&f, &r), Err(Error::DateMisalignment(_))));
    }

    #[test]
    fn duplicate_rows_report_line() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(&dir, "f.csv", "date,stock_id,f0\n2024-01-02,A,1\n2024-01-02,A,2\n");
        match load_features(&f).unwrap_err() {
            Error::DuplicateRow { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_and_horizon_are_validated() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(&dir, "f.csv", "date,stock,f0\n2024-01-02,A,1\n");
        assert!(matches!(load_features(&f), Err(Error::Schema { .. })));
        let r = write(&dir, "r.csv", "date,stock_id,ret\n2024-01-02,A,0.1\n");
        assert!(matches!(load_returns(&r), Err(Error::Schema { .. })));
        let r = write(&dir, "r2.csv", "# horizon=1\ndate,stock_id,ret\n2024-01-02,A,-1.5\n");
        assert!(load_returns(&r).is_err());
    }

    #[test]
    fn save_then_load_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cal = TradingCalendar::new(vec!["2024-01-02".parse().unwrap()]).unwrap();
        let vals = ndarray::array![[0.1 + 0.2, -1e-300], [std::f64::consts::PI, 1.0 / 3.0]];
        let section = CrossSection::new(vec!["A".into(), "B".into()], vals).unwrap();
        let features = FeaturePanel::new(cal.clone(), vec![section], 2).unwrap();
        let returns = ReturnPanel::new(
            cal,
            5,
            vec![vec!["A".into(), "B".into()]],
            vec![vec![0.1 + 0.7, -0.999_999_999_9]],
        )
        .unwrap();
        let fp = dir.path().join("f.csv");
        let rp = dir.path().join("r.csv");
        save_panel(&features, &returns, &fp, &rp).unwrap();
        let (f2, r2) = load_panel(&fp, &rp).unwrap();
        assert_eq!(f2, features);
        assert_eq!(r2, returns);
    }
}
