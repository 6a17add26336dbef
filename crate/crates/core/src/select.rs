//! Greedy stepwise search over graphs under BIC or AIC.
//!
//! From the current graph every one-edge addition or removal is fitted, and
//! the best candidate replaces the current graph if it lowers the criterion.
//! Ties (within [`SelectOptions::tie_tol`]) are broken towards smaller
//! districts, then fewer bidirected edges, then the lexicographically first
//! move, so the search path is reproducible.

use std::cmp::Ordering;
use std::fmt;

use log::{debug, warn};
use rayon::prelude::*;

use crate::error::Result;
use crate::fitting::{fit, fit_from, CountVector, FitOptions, FitResult};
use crate::graph::{Admg, EdgeKind};
use crate::inference::{criteria, deviance};
use crate::moebius::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Bic,
    Aic,
}

impl Criterion {
    pub fn score(self, loglik: f64, n_params: usize, n: u64) -> f64 {
        let (bic, aic) = criteria(loglik, n_params, n);
        match self {
            Criterion::Bic => bic,
            Criterion::Aic => aic,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Bic => "BIC",
            Criterion::Aic => "AIC",
        })
    }
}

/// A one-edge change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Move {
    pub a: usize,
    pub b: usize,
    pub kind: EdgeKind,
    pub add: bool,
}

impl Move {
    pub fn describe(&self, g: &Admg) -> String {
        let sym = match self.kind {
            EdgeKind::Directed => "->",
            EdgeKind::Bidirected => "<->",
        };
        let verb = if self.add { "add" } else { "remove" };
        format!("{verb} {} {sym} {}", g.label(self.a), g.label(self.b))
    }
}

/// All graphs one edge away from `g` whose directed part stays acyclic.
pub fn neighbors(g: &Admg) -> Vec<(Move, Admg)> {
    let n = g.n();
    let mut out = Vec::new();
    let mut push = |mv: Move| {
        let h = g
            .with_edge(mv.kind, mv.a, mv.b, mv.add)
            .expect("moves preserve validity");
        out.push((mv, h));
    };
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let directed = Move {
                a,
                b,
                kind: EdgeKind::Directed,
                add: !g.has_directed(a, b),
            };
            if g.has_directed(a, b) || g.can_add_directed(a, b) {
                push(directed);
            }
            if a < b {
                push(Move {
                    a,
                    b,
                    kind: EdgeKind::Bidirected,
                    add: !g.has_bidirected(a, b),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct SelectOptions {
    pub criterion: Criterion,
    pub fit: FitOptions,
    /// Criterion differences below this count as ties.
    pub tie_tol: f64,
    pub max_steps: usize,
    /// Reuse the incumbent's estimates as starting values.
    pub warm_start: bool,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions {
            criterion: Criterion::Bic,
            fit: FitOptions::default(),
            tie_tol: 1e-6,
            max_steps: 1000,
            warm_start: true,
        }
    }
}

/// One accepted move.
#[derive(Debug, Clone)]
pub struct Step {
    /// `None` for the starting graph.
    pub mv: Option<Move>,
    pub graph: Admg,
    pub score: f64,
    pub deviance: f64,
    pub df: i64,
}

#[derive(Debug, Clone)]
pub struct SearchState {
    pub graph: Admg,
    pub score: f64,
    pub history: Vec<Step>,
}

struct Scored {
    mv: Move,
    graph: Admg,
    model: Model,
    fit: FitResult,
    score: f64,
}

fn max_district(g: &Admg) -> usize {
    g.districts().iter().map(|d| d.len()).max().unwrap_or(0)
}

/// Order used among candidates whose scores tie.
fn tie_order(x: &Scored, y: &Scored) -> Ordering {
    max_district(&x.graph)
        .cmp(&max_district(&y.graph))
        .then(x.graph.bidirected_edges().len().cmp(&y.graph.bidirected_edges().len()))
        .then(x.mv.cmp(&y.mv))
}

/// Starting values for `model` taken from a fit of another graph: shared
/// parameters keep their estimates, new ones get independence values.
fn warm_start(model: &Model, from: &Model, q_from: &[f64], cold: &[f64]) -> Option<Vec<f64>> {
    let q: Vec<f64> = model
        .params
        .iter()
        .zip(cold)
        .map(|(pi, &c)| {
            from.param_at(pi.head, crate::moebius::unpack(pi.tail_state, pi.tail))
                .filter(|&j| from.params[j].tail == pi.tail)
                .map_or(c, |j| q_from[j])
        })
        .collect();
    let p = model.prob_vector(&q).ok()?;
    p.iter().all(|&x| x > 0.0).then_some(q)
}

fn fit_candidate(
    g: &Admg,
    counts: &CountVector,
    opts: &SelectOptions,
    incumbent: Option<(&Model, &[f64])>,
) -> Result<(Model, FitResult)> {
    let model = Model::new(g);
    let cold = crate::fitting::initialize(&model, counts, opts.fit.allow_zero_counts)?;
    let start = match incumbent {
        Some((m, q)) if opts.warm_start => warm_start(&model, m, q, &cold),
        _ => None,
    };
    let res = match start {
        Some(q0) => fit_from(&model, counts, &q0, &opts.fit)?,
        None => fit(&model, counts, &opts.fit)?,
    };
    Ok((model, res))
}

/// Greedy search from `start`.
pub fn stepwise(counts: &CountVector, start: &Admg, opts: &SelectOptions) -> Result<SearchState> {
    let n = counts.total();
    let (mut model, mut res) = fit_candidate(start, counts, opts, None)?;
    let mut score = opts.criterion.score(res.loglik, model.n_params(), n);
    let mut graph = start.clone();
    let (dev, df, _) = deviance(&model, &res, counts);
    let mut history = vec![Step {
        mv: None,
        graph: graph.clone(),
        score,
        deviance: dev,
        df,
    }];
    for step in 0..opts.max_steps {
        let cands = neighbors(&graph);
        let scored: Vec<Scored> = cands
            .into_par_iter()
            .filter_map(|(mv, h)| {
                match fit_candidate(&h, counts, opts, Some((&model, &res.q_hat))) {
                    Ok((m, f)) => {
                        let s = opts.criterion.score(f.loglik, m.n_params(), n);
                        Some(Scored {
                            mv,
                            graph: h,
                            model: m,
                            fit: f,
                            score: s,
                        })
                    }
                    Err(e) => {
                        warn!("skipping candidate ({}): {e}", mv.describe(&graph));
                        None
                    }
                }
            })
            .collect();
        let Some(best_score) = scored.iter().map(|s| s.score).min_by(f64::total_cmp) else {
            break;
        };
        if !(best_score < score - opts.tie_tol) {
            debug!("step {step}: no candidate improves {score}");
            break;
        }
        let best = scored
            .into_iter()
            .filter(|s| s.score <= best_score + opts.tie_tol)
            .min_by(tie_order)
            .expect("at least one candidate attains the minimum");
        debug!("step {step}: {} -> {}", best.mv.describe(&graph), best.score);
        let (dev, df, _) = deviance(&best.model, &best.fit, counts);
        history.push(Step {
            mv: Some(best.mv),
            graph: best.graph.clone(),
            score: best.score,
            deviance: dev,
            df,
        });
        graph = best.graph;
        model = best.model;
        res = best.fit;
        score = best.score;
    }
    Ok(SearchState {
        graph,
        score,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edgeless_three_vertices_has_nine_neighbors() {
        let g = Admg::from_edges(&["a", "b", "c"], &[], &[]).unwrap();
        let ns = neighbors(&g);
        assert_eq!(ns.len(), 9);
        assert!(ns.iter().all(|(m, _)| m.add));
    }

    #[test]
    fn acyclicity_filter() {
        let g = Admg::from_edges(&["1", "2"], &[("1", "2")], &[]).unwrap();
        let ns = neighbors(&g);
        let moves: Vec<String> = ns.iter().map(|(m, _)| m.describe(&g)).collect();
        assert_eq!(moves, ["remove 1 -> 2", "add 1 <-> 2"]);
    }
}
