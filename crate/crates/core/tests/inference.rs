mod common;

use admg_core::fitting::{fit, vertex_block, CountVector, FitOptions};
use admg_core::graph::Admg;
use admg_core::inference::{
    condition_number, criteria, deviance, dp_dq, fisher_information, report, standard_errors,
};
use admg_core::moebius::Model;
use common::*;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

fn interior_q(m: &Model, g: &Admg, r: &mut TestRng) -> Vec<f64> {
    let law = random_model_law(g, r, 0.1);
    m.q_from_p(&law).unwrap()
}

#[test]
fn jacobian_matches_central_differences() {
    let mut r = rng(41);
    for _ in 0..20 {
        let n = r.gen_range(1..=5);
        let g = random_admg(&mut r, n, 0.4, 0.5);
        let m = Model::new(&g);
        let q = interior_q(&m, &g, &mut r);
        let jac = dp_dq(&m, &q).unwrap();
        let h = 1e-6;
        for j in 0..m.n_params() {
            let mut up = q.clone();
            let mut dn = q.clone();
            up[j] += h;
            dn[j] -= h;
            let pu = m.prob_vector(&up).unwrap();
            let pd = m.prob_vector(&dn).unwrap();
            for i in 0..pu.len() {
                let fd = (pu[i] - pd[i]) / (2.0 * h);
                let exact = jac[(i, j)];
                let err = (fd - exact).abs() / exact.abs().max(1e-3);
                assert!(err <= 1e-5, "{g:?} ({i},{j}): {fd} vs {exact}");
            }
        }
        for s in jac.row_sum().iter() {
            assert!(s.abs() < 1e-12);
        }
    }
}

#[test]
fn jacobian_columns_are_block_columns() {
    let mut r = rng(42);
    for _ in 0..10 {
        let g = random_admg(&mut r, 4, 0.4, 0.5);
        let m = Model::new(&g);
        let q = interior_q(&m, &g, &mut r);
        let jac = dp_dq(&m, &q).unwrap();
        for v in 0..4 {
            let blk = vertex_block(&m, &q, v).unwrap();
            for (c, &j) in blk.params.iter().enumerate() {
                for i in 0..jac.nrows() {
                    assert!((jac[(i, j)] - blk.a[(i, c)]).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn information_is_symmetric_positive_definite() {
    let mut r = rng(43);
    for _ in 0..20 {
        let n = r.gen_range(2..=5);
        let g = random_admg(&mut r, n, 0.4, 0.5);
        let m = Model::new(&g);
        let q = interior_q(&m, &g, &mut r);
        let info = fisher_information(&m, &q).unwrap();
        assert!((&info - info.transpose()).amax() <= 1e-10);
        let eig = SymmetricEigen::new(info.clone());
        assert!(eig.eigenvalues.min() >= -1e-8);
        assert!(condition_number(&info).is_finite());
    }
}

#[test]
fn information_matches_score_covariance() {
    let g = g1();
    let m = Model::new(&g);
    let mut r = rng(44);
    let q = interior_q(&m, &g, &mut r);
    let p = m.prob_vector(&q).unwrap();
    let jac = dp_dq(&m, &q).unwrap();
    let info = fisher_information(&m, &q).unwrap();
    // score of one observation in state i: row i of J divided by p_i
    let counts = sample_counts(&p, 100_000, &mut r);
    let k = m.n_params();
    let mut cov = DMatrix::<f64>::zeros(k, k);
    let total: u64 = counts.iter().sum();
    for (i, &c) in counts.iter().enumerate() {
        let s = jac.row(i).transpose() / p[i];
        cov += (&s * s.transpose()) * c as f64;
    }
    cov /= total as f64;
    let rel = (&cov - &info).norm() / info.norm();
    assert!(rel <= 0.05, "relative error {rel}");
}

#[test]
fn standard_errors_shrink_like_root_n() {
    let g = g1();
    let m = Model::new(&g);
    let q = interior_q(&m, &g, &mut rng(45));
    let small = standard_errors(&m, &q, 100).unwrap();
    let large = standard_errors(&m, &q, 10_000).unwrap();
    for (a, b) in small.iter().zip(&large) {
        assert!((a / b - 10.0).abs() <= 0.5);
    }
}

#[test]
fn saturated_two_vertex_errors_match_delta_method() {
    // a <-> b: parameters q_a, q_b, q_ab are marginal/joint zero probabilities
    let g = Admg::from_edges(&["a", "b"], &[], &[("a", "b")]).unwrap();
    let m = Model::new(&g);
    let p = [0.4, 0.1, 0.2, 0.3];
    let q = m.q_from_p(&p).unwrap();
    let n = 500;
    let se = standard_errors(&m, &q, n).unwrap();
    // each q is a sum of cell probabilities: var = s(1 - s) / n
    for (pi, &s) in m.params.iter().zip(&se) {
        let cells: f64 = (0..4)
            .filter(|&i| pi.head.iter().all(|v| i >> v & 1 == 0))
            .map(|i| p[i])
            .sum();
        let want = (cells * (1.0 - cells) / n as f64).sqrt();
        assert!((s - want).abs() < 1e-12, "{s} vs {want}");
    }
}

#[test]
fn bic_prefers_independence_on_independent_data() {
    let labels = ["1", "2", "3"];
    let sat = Admg::from_edges(&labels, &[], &[("1", "2"), ("1", "3"), ("2", "3")]).unwrap();
    let ind = Admg::from_edges(&labels, &[], &[]).unwrap();
    let mut r = rng(46);
    let law: Vec<f64> = {
        let m = [0.3, 0.6, 0.45];
        (0..8)
            .map(|i| {
                (0..3)
                    .map(|v| if i >> v & 1 == 1 { m[v] } else { 1.0 - m[v] })
                    .product()
            })
            .collect()
    };
    let c = CountVector::new(sample_counts(&law, 5000, &mut r)).unwrap();
    let bic = |g: &Admg| {
        let m = Model::new(g);
        let f = fit(&m, &c, &FitOptions::default()).unwrap();
        criteria(f.loglik, m.n_params(), c.total()).0
    };
    assert!(bic(&ind) < bic(&sat));
}

#[test]
fn deviance_shrinks_along_nested_chain() {
    let labels = ["1", "2", "3", "4"];
    let chain = [("1", "2"), ("2", "3"), ("3", "4")];
    let mut r = rng(47);
    let truth = Admg::from_edges(&labels, &chain, &[("1", "4")]).unwrap();
    let law = random_model_law(&truth, &mut r, 0.1);
    let c = CountVector::new(sample_counts(&law, 3000, &mut r).iter().map(|x| x + 1).collect()).unwrap();
    let mut last = f64::INFINITY;
    for k in 0..=chain.len() {
        let g = Admg::from_edges(&labels, &chain[..k], &[]).unwrap();
        let m = Model::new(&g);
        let f = fit(&m, &c, &FitOptions::default()).unwrap();
        let (dev, df, p) = deviance(&m, &f, &c);
        assert!(dev >= -1e-8);
        assert_eq!(df + m.n_params() as i64, 15);
        assert!(p.is_some());
        assert!(dev <= last + 1e-8);
        last = dev;
    }
}

#[test]
fn report_fields_are_consistent() {
    let g = g1();
    let m = Model::new(&g);
    let mut r = rng(48);
    let law = random_model_law(&g, &mut r, 0.1);
    let c = CountVector::new(sample_counts(&law, 2000, &mut r).iter().map(|x| x + 1).collect()).unwrap();
    let f = fit(&m, &c, &FitOptions::default()).unwrap();
    let rep = report(&m, &f, &c);
    assert_eq!(rep.n, c.total());
    assert_eq!(rep.df, 15 - m.n_params() as i64);
    assert_eq!(rep.std_errors.as_ref().unwrap().len(), m.n_params());
    let (bic, aic) = criteria(f.loglik, m.n_params(), c.total());
    assert_eq!((rep.bic, rep.aic), (bic, aic));
}
