//! Reader for daily case-count files with the header `date,infected,recovered`.
//!
//! `infected` is the active case count and `recovered` the cumulative count
//! of removed individuals (deaths included). Susceptibles are `N - I - R`
//! and times are days since the first row.

use std::io::Read;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use diffunif::infer::{Observation, ObservationSeries};

use crate::{CliError, Result};

pub const HEADER: [&str; 3] = ["date", "infected", "recovered"];

#[derive(Debug, Clone, PartialEq)]
pub struct CaseSeries {
    pub dates: Vec<NaiveDate>,
    pub series: ObservationSeries,
}

impl CaseSeries {
    /// Splits into calendar months (`YYYY-MM`). Each part only contains the
    /// observations dated within that month.
    pub fn months(&self) -> Vec<(String, ObservationSeries)> {
        let mut out: Vec<(String, ObservationSeries)> = Vec::new();
        let mut start = 0;
        for k in 1..=self.dates.len() {
            let boundary = k == self.dates.len() || {
                let (a, b) = (self.dates[k - 1], self.dates[k]);
                (a.year(), a.month()) != (b.year(), b.month())
            };
            if boundary {
                let d = self.dates[start];
                out.push((format!("{:04}-{:02}", d.year(), d.month()), self.series.slice(start..k)));
                start = k;
            }
        }
        out
    }
}

pub fn ingest(path: &Path, population: u64) -> Result<CaseSeries> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    ingest_reader(file, population, &path.display().to_string())
}

pub fn ingest_reader<R: Read>(reader: R, population: u64, source: &str) -> Result<CaseSeries> {
    let parse_error = |line: u64, message: String| CliError::Parse { path: source.to_string(), line, message };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_error(1, e.to_string()))?;
    if header.iter().ne(HEADER) {
        return Err(parse_error(1, format!("header must be exactly `{}`", HEADER.join(","))));
    }

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
            .map_err(|e| parse_error(line, format!("bad date {:?}: {e}", &row[0])))?;
        let count = |j: usize| {
            row[j]
                .trim()
                .parse::<u64>()
                .map_err(|e| parse_error(line, format!("bad {} count {:?}: {e}", HEADER[j], &row[j])))
        };
        let (infected, recovered) = (count(1)?, count(2)?);
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(CliError::Validation(format!("{date}: dates must increase (previous row is {prev})")));
            }
        }
        if infected + recovered > population {
            return Err(CliError::Validation(format!(
                "{date}: infected + recovered = {} exceeds population {population}",
                infected + recovered
            )));
        }
        let t = dates.first().map_or(0, |first| (date - *first).num_days()) as f64;
        dates.push(date);
        records.push(Observation::new(t, population - infected - recovered, infected));
    }
    if dates.is_empty() {
        return Err(parse_error(1, "no data rows".into()));
    }

    let series = ObservationSeries::new(population, records).map_err(|e| match e {
        diffunif::Error::InvalidData { index, reason } => CliError::Validation(format!("{}: {reason}", dates[index])),
        other => CliError::Model(other),
    })?;
    Ok(CaseSeries { dates, series })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, n: u64) -> Result<CaseSeries> {
        ingest_reader(text.as_bytes(), n, "test.csv")
    }

    #[test]
    fn converts_counts_and_dates() {
        let c = read("date,infected,recovered\n2020-03-01,1,0\n2020-03-02,2,0\n", 100).unwrap();
        let r = c.series.records();
        assert_eq!(r[0], Observation::new(0.0, 99, 1));
        assert_eq!(r[1], Observation::new(1.0, 98, 2));
    }

    #[test]
    fn days_follow_the_calendar() {
        let c = read("date,infected,recovered\n2020-02-27,1,0\n2020-03-02,2,0\n", 100).unwrap();
        assert_eq!(c.series.records()[1].t, 4.0);
    }

    #[test]
    fn header_must_match_exactly() {
        assert!(matches!(read("date,infected,removed\n2020-03-01,1,0\n", 10), Err(CliError::Parse { line: 1, .. })));
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let err = read("date,infected,recovered\n2020-03-01,1,0\n2020-03-02,x,0\n", 10).unwrap_err();
        assert!(matches!(err, CliError::Parse { line: 3, .. }), "{err:?}");
        let err = read("date,infected,recovered\n2020-03-01,1,0\n2020-13-02,1,0\n", 10).unwrap_err();
        assert!(matches!(err, CliError::Parse { line: 3, .. }), "{err:?}");
        let err = read("date,infected,recovered\n2020-03-01,1\n", 10).unwrap_err();
        assert!(matches!(err, CliError::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn validation_errors_name_the_date() {
        let err = read("date,infected,recovered\n2020-03-01,6,5\n", 10).unwrap_err();
        assert!(err.to_string().contains("2020-03-01"));
        let err = read("date,infected,recovered\n2020-03-01,1,3\n2020-03-04,1,2\n", 10).unwrap_err();
        assert!(err.to_string().contains("2020-03-04"), "{err}");
        let err = read("date,infected,recovered\n2020-03-02,1,0\n2020-03-02,1,0\n", 10).unwrap_err();
        assert!(matches!(err, CliError::Validation(_)));
    }

    #[test]
    fn accepts_the_austrian_population() {
        let c = read("date,infected,recovered\n2020-03-01,10,0\n2020-03-02,14,0\n", 8_932_664).unwrap();
        assert_eq!(c.series.records()[1].s, 8_932_664 - 14);
    }

    #[test]
    fn splits_by_calendar_month() {
        let c = read(
            "date,infected,recovered\n2020-03-30,1,0\n2020-03-31,2,0\n2020-04-01,2,1\n2020-05-03,1,3\n",
            10,
        )
        .unwrap();
        let months = c.months();
        let names: Vec<&str> = months.iter().map(|(m, _)| m.as_str()).collect();
        assert_eq!(names, ["2020-03", "2020-04", "2020-05"]);
        assert_eq!(months[0].1.len(), 2);
        assert_eq!(months[1].1.records()[0].t, 2.0);
    }
}
