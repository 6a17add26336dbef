//! JSON report for a fitted model.

use admg_core::fitting::{CountVector, FitResult};
use admg_core::inference::report;
use admg_core::moebius::Model;
use serde::{Deserialize, Serialize};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct ParamReport {
    pub head: Vec<String>,
    pub tail: Vec<String>,
    /// Values of the tail vertices, in the order listed in `tail`.
    pub tail_state: Vec<u8>,
    pub estimate: f64,
    pub std_error: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub version: u32,
    /// Graph in the text format.
    pub graph: String,
    pub parameters: Vec<ParamReport>,
    pub loglik: f64,
    pub deviance: f64,
    pub df: i64,
    pub p_value: Option<f64>,
    pub bic: f64,
    pub aic: f64,
    pub n: u64,
    pub cycles: usize,
    pub converged: bool,
}

impl FitReport {
    pub fn new(model: &Model, fit: &FitResult, counts: &CountVector) -> Self {
        let g = model.graph();
        let inf = report(model, fit, counts);
        let names = |s: admg_core::VertexSet| s.iter().map(|v| g.label(v).to_owned()).collect();
        let parameters = model
            .params
            .iter()
            .enumerate()
            .map(|(j, pi)| ParamReport {
                head: names(pi.head),
                tail: names(pi.tail),
                tail_state: pi.tail_bits(),
                estimate: fit.q_hat[j],
                std_error: inf.std_errors.as_ref().map(|se| se[j]),
            })
            .collect();
        FitReport {
            version: REPORT_VERSION,
            graph: g.to_text(),
            parameters,
            loglik: inf.loglik,
            deviance: inf.deviance,
            df: inf.df,
            p_value: inf.p_value,
            bic: inf.bic,
            aic: inf.aic,
            n: inf.n,
            cycles: fit.cycles,
            converged: fit.converged,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.graph);
        out.push('\n');
        for p in &self.parameters {
            let mut label = format!("q[{}", p.head.join(","));
            if !p.tail.is_empty() {
                let state: Vec<String> = p
                    .tail
                    .iter()
                    .zip(&p.tail_state)
                    .map(|(t, s)| format!("{t}={s}"))
                    .collect();
                label.push_str(&format!(" | {}", state.join(",")));
            }
            label.push(']');
            let se = p.std_error.map_or("-".to_string(), |s| format!("{s:.6}"));
            out.push_str(&format!("{label:<32} {:.6}  ({se})\n", p.estimate));
        }
        out.push('\n');
        out.push_str(&format!("log-likelihood  {:.4}\n", self.loglik));
        let p = self.p_value.map_or("-".to_string(), |p| format!("{p:.4}"));
        out.push_str(&format!(
            "deviance        {:.4} on {} df (p = {p})\n",
            self.deviance, self.df
        ));
        out.push_str(&format!("BIC {:.4}  AIC {:.4}  n = {}\n", self.bic, self.aic, self.n));
        out.push_str(&format!(
            "{} after {} cycles\n",
            if self.converged { "converged" } else { "NOT converged" },
            self.cycles
        ));
        out
    }
}

/// Parameter values for `model`, from either a bare JSON array in canonical
/// order or a fit report (matched by head, tail and tail state).
pub fn read_params(text: &str, model: &Model) -> anyhow::Result<Vec<f64>> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    if v.is_array() {
        let q: Vec<f64> = serde_json::from_value(v)?;
        anyhow::ensure!(
            q.len() == model.n_params(),
            "expected {} parameters, found {}",
            model.n_params(),
            q.len()
        );
        return Ok(q);
    }
    let r: FitReport = serde_json::from_value(v)?;
    let g = model.graph();
    let names = |s: admg_core::VertexSet| -> Vec<String> { s.iter().map(|v| g.label(v).to_owned()).collect() };
    model
        .params
        .iter()
        .map(|pi| {
            let (h, t, s) = (names(pi.head), names(pi.tail), pi.tail_bits());
            r.parameters
                .iter()
                .find(|p| p.head == h && p.tail == t && p.tail_state == s)
                .map(|p| p.estimate)
                .ok_or_else(|| anyhow::anyhow!("report has no parameter {}", pi.display(g)))
        })
        .collect()
}
