//! Graph families for timing the fitting algorithm as the number of
//! vertices grows.
//!
//! Both families have `2k` vertices `x1..xk, y1..yk`.
//!
//! - `fixed`: directed chains `x1 -> ... -> xk` and `y1 -> ... -> yk` with
//!   `xi <-> yi` for each `i`, so every district has two vertices however
//!   large `k` is.
//! - `large`: the bidirected path `x1 <-> y1 <-> x2 <-> y2 <-> ... <-> yk`,
//!   a single district covering every vertex.
//!
//! The large family has no directed edges: with the chains added every head
//! would carry a long tail and the parameter count explodes (about two
//! thousand parameters already at `k = 6`). The shapes are a reconstruction
//! chosen to isolate district size, not a copy of any published figure.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::fitting::{fit, CountVector, FitOptions, FitResult};
use crate::graph::Admg;
use crate::moebius::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Fixed,
    Large,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Family::Fixed),
            "large" => Ok(Family::Large),
            _ => Err(Error::InvalidOption(format!("unknown family `{s}`"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Fixed => "fixed",
            Family::Large => "large",
        })
    }
}

pub fn family_graph(family: Family, k: usize) -> Result<Admg> {
    if k == 0 {
        return Err(Error::InvalidOption("k must be at least 1".into()));
    }
    let xs: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
    let ys: Vec<String> = (1..=k).map(|i| format!("y{i}")).collect();
    let labels: Vec<&str> = xs.iter().chain(&ys).map(String::as_str).collect();
    let mut directed = Vec::new();
    if family == Family::Fixed {
        for i in 1..k {
            directed.push((xs[i - 1].as_str(), xs[i].as_str()));
            directed.push((ys[i - 1].as_str(), ys[i].as_str()));
        }
    }
    let mut bidirected = Vec::new();
    for i in 0..k {
        bidirected.push((xs[i].as_str(), ys[i].as_str()));
        if family == Family::Large && i + 1 < k {
            bidirected.push((ys[i].as_str(), xs[i + 1].as_str()));
        }
    }
    Admg::from_edges(&labels, &directed, &bidirected)
}

/// Deterministic strictly positive counts: every cell gets a base count
/// plus a pseudo-random extra, so strict-mode fitting always applies.
pub fn synthetic_counts(n_vars: usize, seed: u64) -> Result<CountVector> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    CountVector::new((0..1u64 << n_vars).map(|_| 1 + rng.gen_range(0..20)).collect())
}

#[derive(Debug, Clone)]
pub struct Timing {
    pub k: usize,
    pub n_vertices: usize,
    pub n_params: usize,
    pub elapsed: Duration,
    pub fit: FitResult,
}

/// Builds and fits one member of a family, timing model construction and
/// fitting together.
pub fn time_fit(family: Family, k: usize, seed: u64, opts: &FitOptions) -> Result<Timing> {
    let g = family_graph(family, k)?;
    let counts = synthetic_counts(g.n(), seed)?;
    let start = Instant::now();
    let model = Model::new(&g);
    let fit = fit(&model, &counts, opts)?;
    Ok(Timing {
        k,
        n_vertices: g.n(),
        n_params: model.n_params(),
        elapsed: start.elapsed(),
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn district_sizes() {
        for k in 1..5 {
            let f = family_graph(Family::Fixed, k).unwrap();
            assert!(f.districts().iter().all(|d| d.len() == 2));
            let l = family_graph(Family::Large, k).unwrap();
            assert_eq!(l.districts().len(), 1);
            assert!(l.directed_edges().is_empty());
        }
    }
}
