use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::stats;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Generalized,
    Dvp,
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Generalized => "generalized",
            Method::Dvp => "dvp",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generalized" => Ok(Method::Generalized),
            "dvp" => Ok(Method::Dvp),
            "oracle" => Ok(Method::Oracle),
            _ => Err(Error::Parse(format!("unknown method '{s}'"))),
        }
    }
}

/// One index value from one replication; oracle rows use replication `-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub experiment: String,
    pub replication: i64,
    pub index: String,
    pub estimate: f64,
    pub method: Method,
    pub converged: bool,
}

const RECORD_HEADER: &str = "experiment,replication,index,estimate,method,converged";

pub fn write_records(mut w: impl Write, records: &[RunRecord]) -> Result<()> {
    writeln!(w, "{RECORD_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.experiment, r.replication, r.index, r.estimate, r.method, r.converged
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(r: impl BufRead) -> Result<Vec<RunRecord>> {
    let mut lines = r.lines().enumerate();
    let header = lines.next().map(|(_, h)| h).transpose()?;
    if header.as_deref().map(str::trim) != Some(RECORD_HEADER) {
        return Err(Error::Parse(format!("expected header '{RECORD_HEADER}'")));
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Parse(format!("line {}: {what}", i + 1));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(bad(&format!("expected 6 fields, found {}", fields.len())));
        }
        out.push(RunRecord {
            experiment: fields[0].to_string(),
            replication: fields[1].trim().parse().map_err(|_| bad("bad replication"))?,
            index: fields[2].to_string(),
            estimate: fields[3].trim().parse().map_err(|_| bad("bad estimate"))?,
            method: fields[4].trim().parse()?,
            converged: fields[5].trim().parse().map_err(|_| bad("bad converged flag"))?,
        });
    }
    Ok(out)
}

/// Distribution of one index over the converged replications of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub method: Method,
    pub index: String,
    pub count: usize,
    pub mean: f64,
    /// n-1 denominator; `None` for a single replication (zero for oracle rows).
    pub std: Option<f64>,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl SummaryRow {
    /// Tukey whiskers: the extreme values within 1.5 IQR of the quartiles.
    pub fn whiskers(&self, values: &[f64]) -> (f64, f64) {
        let iqr = self.q3 - self.q1;
        let (lo, hi) = (self.q1 - 1.5 * iqr, self.q3 + 1.5 * iqr);
        let inside = values.iter().copied().filter(|v| (lo..=hi).contains(v));
        let low = inside.clone().fold(f64::INFINITY, f64::min);
        let high = inside.fold(f64::NEG_INFINITY, f64::max);
        (low.min(self.q1), high.max(self.q3))
    }
}

/// Groups records by (experiment, method, index) in first-appearance order,
/// skipping non-convergent replications.
pub fn summarize(records: &[RunRecord]) -> Result<Vec<SummaryRow>> {
    if !records.iter().any(|r| r.converged) {
        return Err(Error::EmptyRequest("no converged records to summarize".into()));
    }
    Ok(grouped(records)
        .into_iter()
        .map(|(key, values)| summary_row(key, &values))
        .collect())
}

type GroupKey = (String, Method, String);

fn grouped(records: &[RunRecord]) -> Vec<(GroupKey, Vec<f64>)> {
    let mut groups: Vec<(GroupKey, Vec<f64>)> = Vec::new();
    let mut position = std::collections::HashMap::new();
    for r in records.iter().filter(|r| r.converged) {
        let key = (r.experiment.clone(), r.method, r.index.clone());
        let i = *position.entry(key.clone()).or_insert_with(|| {
            groups.push((key, Vec::new()));
            groups.len() - 1
        });
        groups[i].1.push(r.estimate);
    }
    groups
}

fn summary_row((experiment, method, index): GroupKey, values: &[f64]) -> SummaryRow {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let std = match (values.len(), method) {
        (1, Method::Oracle) => Some(0.0),
        (1, _) => None,
        _ => Some(stats::sample_std(values)),
    };
    SummaryRow {
        experiment,
        method,
        index,
        count: values.len(),
        mean: stats::mean(values),
        std,
        min: sorted[0],
        q1: stats::quantile_sorted(&sorted, 0.25),
        median: stats::quantile_sorted(&sorted, 0.5),
        q3: stats::quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    }
}

const SUMMARY_HEADER: &str = "experiment,method,index,count,mean,std,min,q1,median,q3,max";

pub fn write_summary(mut w: impl Write, rows: &[SummaryRow]) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        let std = r.std.map(|s| s.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.experiment, r.method, r.index, r.count, r.mean, std, r.min, r.q1, r.median, r.q3, r.max
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Box-plot geometry per group: quartiles and Tukey whisker ends.
pub fn write_boxplot(mut w: impl Write, records: &[RunRecord]) -> Result<()> {
    writeln!(w, "experiment,method,index,whisker_low,q1,median,q3,whisker_high")?;
    for (key, values) in grouped(records) {
        let r = summary_row(key, &values);
        let (low, high) = r.whiskers(&values);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.experiment, r.method, r.index, low, r.q1, r.median, r.q3, high
        )?;
    }
    w.flush()?;
    Ok(())
}
