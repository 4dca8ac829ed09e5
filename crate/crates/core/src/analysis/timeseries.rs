use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

/// Named scalar channels sampled at strictly increasing iterations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeries {
    names: Vec<String>,
    iterations: Vec<u64>,
    rows: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Self { names: names.into_iter().map(Into::into).collect(), iterations: Vec::new(), rows: Vec::new() }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iterations(&self) -> &[u64] {
        &self.iterations
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn push(&mut self, iteration: u64, values: Vec<f64>) -> Result<()> {
        if values.len() != self.names.len() {
            return Err(Error::InvalidParameter(format!("row has {} values for {} channels", values.len(), self.names.len())));
        }
        if self.iterations.last().is_some_and(|&last| last >= iteration) {
            return Err(Error::InvalidParameter(format!("iteration {iteration} is not increasing")));
        }
        self.iterations.push(iteration);
        self.rows.push(values);
        Ok(())
    }

    pub fn channel(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        let c = self.names.iter().position(|n| n == name)?;
        self.rows.last().map(|r| r[c])
    }

    /// Header of channel names, one row per iteration, 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iteration".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (it, row) in self.iterations.iter().zip(&self.rows) {
            let mut rec = Vec::with_capacity(row.len() + 1);
            rec.push(it.to_string());
            rec.extend(row.iter().map(|v| format!("{v:.16e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn emit_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.get(0) != Some("iteration") {
            return Err(Error::InvalidParameter("first column must be `iteration`".into()));
        }
        let mut ts = TimeSeries::new(headers.iter().skip(1).map(str::to_string));
        for rec in r.records() {
            let rec = rec?;
            let parse_err = |s: &str| Error::InvalidParameter(format!("bad number `{s}`"));
            let it: u64 = rec[0].parse().map_err(|_| parse_err(&rec[0]))?;
            let values = rec.iter().skip(1).map(|s| s.parse::<f64>().map_err(|_| parse_err(s))).collect::<Result<Vec<_>>>()?;
            ts.push(it, values)?;
        }
        Ok(ts)
    }
}
