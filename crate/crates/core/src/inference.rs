//! Derivatives of the parametrization, Fisher information, standard errors
//! and goodness-of-fit summaries.
//!
//! The information matrix is per observation,
//!
//! ```text
//! I(q) = Jᵀ (diag 1/p - 11ᵀ) J,    J = ∂p/∂q,
//! ```
//!
//! so that `√n (q̂ - q) → N(0, I⁻¹)` and the reported standard error of
//! `q̂_j` is `√([I⁻¹]_jj / n)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::fitting::{CountVector, FitResult};
use crate::moebius::{pack, Model};

/// Condition numbers above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// `∂p_i / ∂q_j` for every joint state `i` and parameter `j`.
///
/// Each district factor is multilinear in its own parameters, so the
/// derivative of a term with respect to one of its factors is the product of
/// the remaining factors. District factors are combined with the product
/// rule.
pub fn dp_dq(model: &Model, q: &[f64]) -> Result<DMatrix<f64>> {
    let factors = model.district_factors(q)?;
    let n = model.n_states();
    let mut jac = DMatrix::zeros(n, model.n_params());
    for (j, d) in model.districts.iter().enumerate() {
        let ql = &q[d.params.clone()];
        // derivative of each term: (local param, product of the other factors)
        let dterms: Vec<Vec<(usize, f64)>> = (0..d.p.n_rows())
            .map(|k| {
                let cols: Vec<usize> = d.p.row(k).map(|(c, _)| c).collect();
                cols.iter()
                    .map(|&c| {
                        let rest: f64 = cols.iter().filter(|&&o| o != c).map(|&o| ql[o]).product();
                        (c, rest)
                    })
                    .collect()
            })
            .collect();
        let mut local = DMatrix::<f64>::zeros(d.m.n_rows(), d.p.n_cols);
        for s in 0..d.m.n_rows() {
            for (k, sign) in d.m.row(s) {
                for &(c, v) in &dterms[k] {
                    local[(s, c)] += f64::from(sign) * v;
                }
            }
        }
        for i in 0..n {
            let mut others = 1.0;
            for (jj, dd) in model.districts.iter().enumerate() {
                if jj != j {
                    others *= factors[jj][pack(i as u64, dd.scope) as usize];
                }
            }
            let s = pack(i as u64, d.scope) as usize;
            for c in 0..d.p.n_cols {
                jac[(i, d.params.start + c)] = others * local[(s, c)];
            }
        }
    }
    Ok(jac)
}

/// Per-observation Fisher information `Jᵀ (diag 1/p - 11ᵀ) J`.
pub fn fisher_information(model: &Model, q: &[f64]) -> Result<DMatrix<f64>> {
    let p = model.prob_vector(q)?;
    if let Some((state, &value)) = p.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
        return Err(Error::InvalidParameters { state, value });
    }
    let jac = dp_dq(model, q)?;
    let mut scaled = jac.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row /= p[i];
    }
    let colsum: DVector<f64> = jac.row_sum().transpose();
    let info = jac.transpose() * scaled - &colsum * colsum.transpose();
    // exact symmetry
    Ok((&info + info.transpose()) * 0.5)
}

/// Ratio of the largest to the smallest eigenvalue (infinite if the
/// smallest is not positive).
pub fn condition_number(info: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(info.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// `√([I(q̂)⁻¹]_jj / n)` for every parameter.
pub fn standard_errors(model: &Model, q_hat: &[f64], n: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::NoObservations);
    }
    let info = fisher_information(model, q_hat)?;
    let condition = condition_number(&info);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularInformation { condition });
    }
    let inv = info
        .cholesky()
        .ok_or(Error::SingularInformation { condition })?
        .inverse();
    Ok((0..inv.nrows())
        .map(|j| (inv[(j, j)] / n as f64).sqrt())
        .collect())
}

/// `Σ n_i log(n_i / n)`, zero cells contributing nothing.
pub fn saturated_loglik(counts: &CountVector) -> f64 {
    let n = counts.total() as f64;
    counts
        .counts()
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 * (c as f64 / n).ln())
        .sum()
}

/// Deviance against the saturated model, its degrees of freedom
/// `2^|V| - 1 - k`, and the chi-square upper tail probability (absent when
/// there are no degrees of freedom).
pub fn deviance(model: &Model, fit: &FitResult, counts: &CountVector) -> (f64, i64, Option<f64>) {
    let dev = 2.0 * (saturated_loglik(counts) - fit.loglik);
    let df = degrees_of_freedom(model.graph().n(), model.n_params());
    let p_value = (df > 0).then(|| {
        ChiSquared::new(df as f64)
            .map(|chi| chi.sf(dev.max(0.0)))
            .unwrap_or(f64::NAN)
    });
    (dev, df, p_value)
}

pub fn degrees_of_freedom(n_vertices: usize, n_params: usize) -> i64 {
    (1i64 << n_vertices) - 1 - n_params as i64
}

/// `(BIC, AIC)` with `BIC = -2l + k log n` and `AIC = -2l + 2k`.
pub fn criteria(loglik: f64, n_params: usize, n: u64) -> (f64, f64) {
    let k = n_params as f64;
    (-2.0 * loglik + k * (n as f64).ln(), -2.0 * loglik + 2.0 * k)
}

#[derive(Debug, Clone)]
pub struct InferenceReport {
    /// `None` when the information matrix is singular.
    pub std_errors: Option<Vec<f64>>,
    pub loglik: f64,
    pub deviance: f64,
    pub df: i64,
    pub p_value: Option<f64>,
    pub bic: f64,
    pub aic: f64,
    pub n: u64,
}

pub fn report(model: &Model, fit: &FitResult, counts: &CountVector) -> InferenceReport {
    let (deviance, df, p_value) = deviance(model, fit, counts);
    let (bic, aic) = criteria(fit.loglik, model.n_params(), counts.total());
    let std_errors = match standard_errors(model, &fit.q_hat, counts.total()) {
        Ok(se) => Some(se),
        Err(e) => {
            log::warn!("standard errors unavailable: {e}");
            None
        }
    };
    InferenceReport {
        std_errors,
        loglik: fit.loglik,
        deviance,
        df,
        p_value,
        bic,
        aic,
        n: counts.total(),
    }
}
