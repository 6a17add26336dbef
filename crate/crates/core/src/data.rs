//! Binary datasets: CSV input and output, and simulation from a fitted model.
//!
//! A CSV file has a header row naming the variables. Each further row is one
//! observation, or, when a column named `count` is present, a state together
//! with its multiplicity. Rows for the same state are summed.
//!
//! Cells are ordered with the first variable as the lowest bit, matching the
//! state order used by [`Model`].

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fitting::CountVector;
use crate::graph::Admg;
use crate::moebius::Model;

pub const COUNT_COLUMN: &str = "count";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub names: Vec<String>,
    /// One cell per joint state, first variable fastest.
    pub counts: Vec<u64>,
}

impl Dataset {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        let count_col = header.iter().position(|h| h == COUNT_COLUMN);
        let names: Vec<String> = header
            .iter()
            .filter(|h| *h != COUNT_COLUMN)
            .map(str::to_owned)
            .collect();
        if names.is_empty() {
            return Err(Error::Data("no variable columns".into()));
        }
        if names.len() > crate::graph::MAX_VERTICES {
            return Err(Error::TooManyVertices(names.len()));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::DuplicateVertex(a.clone()));
            }
        }
        let mut counts = vec![0u64; 1 << names.len()];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = row + 2;
            let mut state = 0usize;
            let mut bit = 0;
            let mut mult = 1u64;
            for (j, field) in rec.iter().enumerate() {
                if Some(j) == count_col {
                    mult = field.parse().map_err(|_| {
                        Error::Data(format!("line {line}: count `{field}` is not a nonnegative integer"))
                    })?;
                    continue;
                }
                match field {
                    "0" => {}
                    "1" => state |= 1 << bit,
                    _ => {
                        return Err(Error::Data(format!(
                            "line {line}: value `{field}` for `{}` is not 0 or 1",
                            names[bit]
                        )))
                    }
                }
                bit += 1;
            }
            counts[state] = counts[state]
                .checked_add(mult)
                .ok_or_else(|| Error::Data("count overflow".into()))?;
        }
        Ok(Dataset { names, counts })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Dataset> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Aggregated form: one row per nonzero cell with a `count` column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        header.push(COUNT_COLUMN);
        w.write_record(&header)?;
        for (state, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let mut rec: Vec<String> = (0..self.names.len())
                .map(|v| (state >> v & 1).to_string())
                .collect();
            rec.push(c.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Counts in the vertex order of `g`, matching columns by name.
    pub fn counts_for(&self, g: &Admg) -> Result<CountVector> {
        let labels = g.labels();
        if let Some(extra) = self.names.iter().find(|n| !labels.iter().any(|l| l == *n)) {
            return Err(Error::UnknownVertex(extra.clone()));
        }
        // position in the graph of each data column
        let mut to_graph = Vec::with_capacity(self.names.len());
        for name in &self.names {
            to_graph.push(labels.iter().position(|l| l == name).expect("checked above"));
        }
        if let Some(missing) = labels.iter().find(|l| !self.names.iter().any(|n| n == *l)) {
            return Err(Error::Data(format!("no column for vertex `{missing}`")));
        }
        let mut out = vec![0u64; self.counts.len()];
        for (state, &c) in self.counts.iter().enumerate() {
            let mut s = 0usize;
            for (j, &v) in to_graph.iter().enumerate() {
                s |= (state >> j & 1) << v;
            }
            out[s] = c;
        }
        CountVector::new(out)
    }
}

/// `n` independent draws from the law of `model` at `q`, by inversion of the
/// cumulative distribution.
pub fn simulate(model: &Model, q: &[f64], n: u64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::NoObservations);
    }
    let p = model.prob_vector(q)?;
    if let Some((state, &value)) = p.iter().enumerate().find(|(_, &x)| x < 0.0) {
        return Err(Error::InvalidParameters { state, value });
    }
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for &x in &p {
        acc += x;
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; p.len()];
    let last = p.len() - 1;
    for _ in 0..n {
        let u: f64 = rng.gen::<f64>() * acc;
        let i = cdf.partition_point(|&c| c <= u).min(last);
        counts[i] += 1;
    }
    Ok(Dataset {
        names: model.graph().labels().iter().map(|s| s.to_string()).collect(),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_rows_are_aggregated() {
        let csv = "a,b\n0,0\n0,1\n0,1\n1,1\n";
        let d = Dataset::read_csv(csv.as_bytes()).unwrap();
        // (a, b) = (0, 1) is cell 2 since a is the low bit
        assert_eq!(d.counts, [1, 0, 2, 1]);
    }

    #[test]
    fn count_column_round_trips() {
        let d = Dataset {
            names: vec!["x".into(), "y".into(), "z".into()],
            counts: vec![3, 0, 7, 1, 0, 0, 12, 5],
        };
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Dataset::read_csv("a,b\n0,2\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("a,count\n1,-1\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("a,a\n1,0\n".as_bytes()).is_err());
    }

    #[test]
    fn columns_follow_graph_order() {
        let g = Admg::from_edges(&["b", "a"], &[], &[]).unwrap();
        let d = Dataset::read_csv("a,b\n1,0\n1,0\n0,1\n".as_bytes()).unwrap();
        let c = d.counts_for(&g).unwrap();
        // graph order (b, a): a = 1, b = 0 is cell 2
        assert_eq!(c.counts(), &[0, 1, 2, 0]);
        let other = Admg::from_edges(&["a", "c"], &[], &[]).unwrap();
        assert!(d.counts_for(&other).is_err());
    }
}
