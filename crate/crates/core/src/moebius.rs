//! Generalized Möbius parametrization of a binary ADMG model.
//!
//! The joint law is
//!
//! ```text
//! p(q) = ∏_j M^j exp(P^j log q^j)
//! ```
//!
//! with one pair of sparse matrices per district. Column `k` of `M^j` is a
//! *term*: a vertex set `C` inside the district together with a state of the
//! union of the tails of the heads in the partition `[C]`. Row `k` of `P^j`
//! marks the parameters whose product forms that term. `exp(P log q)` is
//! evaluated as a plain product over the nonzeros of each row of `P`.
//!
//! The rows of `M^j` run over the joint states of the district's *scope*, the
//! district together with every tail its terms use; the factor does not
//! depend on anything else.
//!
//! Joint states are packed into integers with bit `v` holding `X_v`, so the
//! first vertex varies fastest. Tail and scope states are packed the same way
//! over the members of the set.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::graph::{Admg, VertexSet};
use crate::heads::{self, HeadTail};

/// Packs the bits of `state` at the positions in `set` into a dense integer.
pub fn pack(state: u64, set: VertexSet) -> u64 {
    let mut out = 0u64;
    for (k, v) in set.iter().enumerate() {
        out |= (state >> v & 1) << k;
    }
    out
}

/// Inverse of [`pack`]: spreads dense bits onto the positions in `set`.
pub fn unpack(bits: u64, set: VertexSet) -> u64 {
    let mut out = 0u64;
    for (k, v) in set.iter().enumerate() {
        out |= (bits >> k & 1) << v;
    }
    out
}

/// Identifies one generalized Möbius parameter `P(X_head = 0 | X_tail = tail_state)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamIndex {
    pub head: VertexSet,
    pub tail: VertexSet,
    /// Tail assignment packed over `tail` (first tail vertex in bit 0).
    pub tail_state: u64,
}

impl ParamIndex {
    /// Tail assignment as 0/1 values in canonical tail order.
    pub fn tail_bits(&self) -> Vec<u8> {
        (0..self.tail.len())
            .map(|k| (self.tail_state >> k & 1) as u8)
            .collect()
    }

    /// `q_{34|12}^{(1,1)}`-style label.
    pub fn display(&self, g: &Admg) -> String {
        let h: String = self.head.iter().map(|v| g.label(v)).collect::<Vec<_>>().join("");
        if self.tail.is_empty() {
            format!("q_{h}")
        } else {
            let t: Vec<&str> = self.tail.iter().map(|v| g.label(v)).collect();
            let s: Vec<String> = self.tail_bits().iter().map(|b| b.to_string()).collect();
            format!("q_{h}|{}^({})", t.join(""), s.join(","))
        }
    }
}

/// One column of `M`: a set `C` with an assignment to the union of the
/// tails of the blocks of `[C]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermIndex {
    pub c: VertexSet,
    pub tail: VertexSet,
    pub tail_state: u64,
}

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr<T> {
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<T>,
}

impl<T: Copy> Csr<T> {
    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.vals[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn to_dense(&self) -> Vec<Vec<T>>
    where
        T: Default,
    {
        (0..self.n_rows())
            .map(|r| {
                let mut row = vec![T::default(); self.n_cols];
                for (c, v) in self.row(r) {
                    row[c] = v;
                }
                row
            })
            .collect()
    }
}

/// `M` and `P` for one district.
#[derive(Debug, Clone)]
pub struct DistrictMaps {
    pub district: VertexSet,
    /// The district plus the union of all term tails.
    pub scope: VertexSet,
    /// Global indices of this district's parameters (the columns of `p`).
    pub params: Range<usize>,
    pub terms: Vec<TermIndex>,
    /// Rows: joint states of `scope`. Columns: terms. Entries ±1.
    pub m: Csr<i8>,
    /// Rows: terms. Columns: local parameter index. Entries 1.
    pub p: Csr<u8>,
}

impl DistrictMaps {
    /// `exp(P log q)`: the value of every term at `q`.
    pub fn term_values(&self, q: &[f64]) -> Vec<f64> {
        let local = &q[self.params.clone()];
        (0..self.p.n_rows())
            .map(|r| self.p.row(r).map(|(c, _)| local[c]).product())
            .collect()
    }

    /// The district factor `M exp(P log q)` for every state of the scope.
    pub fn factor(&self, q: &[f64]) -> Vec<f64> {
        let terms = self.term_values(q);
        (0..self.m.n_rows())
            .map(|i| self.m.row(i).map(|(k, s)| f64::from(s) * terms[k]).sum())
            .collect()
    }

    /// Sparse text dump: header lines naming the index spaces, then
    /// `row col value` triplets.
    pub fn dump(&self, g: &Admg, model: &Model) -> String {
        let mut out = String::new();
        out.push_str(&format!("# district {}\n", g.fmt_set(self.district)));
        out.push_str(&format!(
            "# M rows: states 0..{} of scope {} (first scope vertex fastest)\n",
            self.m.n_rows(),
            g.fmt_set(self.scope)
        ));
        out.push_str(&format!("# M cols / P rows: {} terms\n", self.terms.len()));
        for (k, t) in self.terms.iter().enumerate() {
            out.push_str(&format!("#   term {k}: {}\n", fmt_term(g, t)));
        }
        out.push_str(&format!("# P cols: {} parameters\n", self.p.n_cols));
        for (k, j) in self.params.clone().enumerate() {
            out.push_str(&format!("#   param {k}: {}\n", model.params[j].display(g)));
        }
        out.push_str("M\n");
        for i in 0..self.m.n_rows() {
            for (k, s) in self.m.row(i) {
                out.push_str(&format!("{i} {k} {s}\n"));
            }
        }
        out.push_str("P\n");
        for k in 0..self.p.n_rows() {
            for (j, v) in self.p.row(k) {
                out.push_str(&format!("{k} {j} {v}\n"));
            }
        }
        out
    }
}

fn fmt_term(g: &Admg, t: &TermIndex) -> String {
    let mut s = g.fmt_set(t.c);
    for (k, v) in t.tail.iter().enumerate() {
        s.push_str(&format!(", i{}={}", g.label(v), t.tail_state >> k & 1));
    }
    s
}

/// Everything needed to evaluate the parametrization of one graph.
#[derive(Debug, Clone)]
pub struct Model {
    graph: Admg,
    pub heads: Vec<HeadTail>,
    /// Canonical parameter order: district by district, heads in canonical
    /// order, tail states in counting order.
    pub params: Vec<ParamIndex>,
    /// First parameter of each head, parallel to `heads`.
    head_offsets: Vec<usize>,
    /// Head bitmask -> position in `heads`.
    head_lookup: std::collections::HashMap<VertexSet, usize>,
    pub districts: Vec<DistrictMaps>,
}

impl Model {
    pub fn new(g: &Admg) -> Self {
        let heads = heads::heads(g);
        let mut params = Vec::new();
        let mut head_offsets = Vec::with_capacity(heads.len());
        let mut head_lookup = std::collections::HashMap::with_capacity(heads.len());
        for (h, ht) in heads.iter().enumerate() {
            head_offsets.push(params.len());
            head_lookup.insert(ht.head, h);
            for s in 0..1u64 << ht.tail.len() {
                params.push(ParamIndex {
                    head: ht.head,
                    tail: ht.tail,
                    tail_state: s,
                });
            }
        }
        let mut model = Model {
            graph: g.clone(),
            heads,
            params,
            head_offsets,
            head_lookup,
            districts: Vec::new(),
        };
        model.districts = g
            .districts()
            .into_iter()
            .map(|d| model.build_maps(d))
            .collect();
        model
    }

    pub fn graph(&self) -> &Admg {
        &self.graph
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn n_states(&self) -> usize {
        1 << self.graph.n()
    }

    /// Global index of the parameter for `head` at the tail state read off
    /// the joint state `state`.
    pub fn param_at(&self, head: VertexSet, state: u64) -> Option<usize> {
        let &h = self.head_lookup.get(&head)?;
        Some(self.head_offsets[h] + pack(state, self.heads[h].tail) as usize)
    }

    pub fn head_tail(&self, head: VertexSet) -> Option<HeadTail> {
        self.head_lookup.get(&head).map(|&h| self.heads[h])
    }

    /// Index of the district containing `v`.
    pub fn district_of(&self, v: usize) -> usize {
        self.districts
            .iter()
            .position(|d| d.district.contains(v))
            .expect("every vertex lies in a district")
    }

    fn param_range(&self, d: VertexSet) -> Range<usize> {
        let idx: Vec<usize> = (0..self.params.len())
            .filter(|&j| self.params[j].head.is_subset(d))
            .collect();
        match (idx.first(), idx.last()) {
            (Some(&a), Some(&b)) => {
                debug_assert_eq!(b + 1 - a, idx.len(), "district parameters are contiguous");
                a..b + 1
            }
            _ => 0..0,
        }
    }

    fn build_maps(&self, d: VertexSet) -> DistrictMaps {
        let g = &self.graph;
        let params = self.param_range(d);

        // Terms: C ⊆ d in counting order, crossed with tail states.
        let mut terms = Vec::new();
        let mut c_offset = vec![0usize; 1 << d.len()];
        let mut c_blocks: Vec<Vec<VertexSet>> = Vec::with_capacity(1 << d.len());
        for c in d.subsets() {
            let blocks = heads::term_partition(g, c);
            let tail = blocks
                .iter()
                .fold(VertexSet::EMPTY, |acc, &b| acc | self.head_tail(b).expect("block is a head").tail);
            c_offset[pack(c.bits(), d) as usize] = terms.len();
            for s in 0..1u64 << tail.len() {
                terms.push(TermIndex {
                    c,
                    tail,
                    tail_state: s,
                });
            }
            c_blocks.push(blocks);
        }

        // P: one row per term, one entry per block of [C].
        let mut p_ptr = Vec::with_capacity(terms.len() + 1);
        let mut p_cols = Vec::new();
        p_ptr.push(0);
        for t in &terms {
            let blocks = &c_blocks[pack(t.c.bits(), d) as usize];
            let state = unpack(t.tail_state, t.tail);
            let mut row: Vec<u32> = blocks
                .iter()
                .map(|&b| (self.param_at(b, state).unwrap() - params.start) as u32)
                .collect();
            row.sort_unstable();
            p_cols.extend(row);
            p_ptr.push(p_cols.len());
        }
        let p = Csr {
            n_cols: params.len(),
            vals: vec![1u8; p_cols.len()],
            row_ptr: p_ptr,
            cols: p_cols,
        };

        // M: row i picks the terms with O ∩ d ⊆ C ⊆ d whose tail state agrees with i.
        let scope = terms.iter().fold(d, |acc, t| acc | t.tail);
        let n_rows = 1usize << scope.len();
        let mut m_ptr = Vec::with_capacity(n_rows + 1);
        let mut m_cols = Vec::new();
        let mut m_vals = Vec::new();
        m_ptr.push(0);
        for local in 0..n_rows as u64 {
            let i = unpack(local, scope);
            let ones = VertexSet::from_bits(i) & d;
            let zeros = d - ones;
            let mut row: Vec<(u32, i8)> = ones
                .subsets()
                .map(|extra| {
                    let c = zeros | extra;
                    let ci = pack(c.bits(), d) as usize;
                    let tail = terms[c_offset[ci]].tail;
                    let k = c_offset[ci] + pack(i, tail) as usize;
                    let sign = if extra.len() % 2 == 0 { 1 } else { -1 };
                    (k as u32, sign)
                })
                .collect();
            row.sort_unstable_by_key(|&(k, _)| k);
            for (k, s) in row {
                m_cols.push(k);
                m_vals.push(s);
            }
            m_ptr.push(m_cols.len());
        }
        let m = Csr {
            n_cols: terms.len(),
            row_ptr: m_ptr,
            cols: m_cols,
            vals: m_vals,
        };

        DistrictMaps {
            district: d,
            scope,
            params,
            terms,
            m,
            p,
        }
    }

    pub fn check_params(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.params.len() {
            return Err(Error::ParameterLength {
                expected: self.params.len(),
                found: q.len(),
            });
        }
        if let Some((index, &value)) = q.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
            return Err(Error::NonPositiveParameter { index, value });
        }
        Ok(())
    }

    /// Per-district factors, indexed by scope state.
    pub fn district_factors(&self, q: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_params(q)?;
        Ok(self.districts.iter().map(|d| d.factor(q)).collect())
    }

    /// The joint distribution `p(q)`.
    pub fn prob_vector(&self, q: &[f64]) -> Result<Vec<f64>> {
        let factors = self.district_factors(q)?;
        let mut p = vec![1.0; self.n_states()];
        for (d, f) in self.districts.iter().zip(&factors) {
            for (i, pi) in p.iter_mut().enumerate() {
                *pi *= f[pack(i as u64, d.scope) as usize];
            }
        }
        Ok(p)
    }

    /// Probability of one joint state by direct inclusion–exclusion over
    /// all `C` with `O ⊆ C ⊆ V`, partitioning each `C` afresh. Shares no
    /// code with the matrix route beyond parameter lookup.
    pub fn prob_direct(&self, q: &[f64], state: u64) -> Result<f64> {
        self.check_params(q)?;
        let g = &self.graph;
        let all = g.vertices();
        let ones = VertexSet::from_bits(state) & all;
        let zeros = all - ones;
        let mut total = 0.0;
        for extra in ones.subsets() {
            let c = zeros | extra;
            let term: f64 = heads::term_partition(g, c)
                .into_iter()
                .map(|h| q[self.param_at(h, state).expect("block is a head")])
                .product();
            if extra.len() % 2 == 0 {
                total += term;
            } else {
                total -= term;
            }
        }
        Ok(total)
    }

    /// Maps a strictly positive joint law to its Möbius parameters by
    /// marginalization: `q = P(X_H = 0 | X_T = t)`.
    pub fn q_from_p(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.n_states() {
            return Err(Error::ProbabilityLength {
                expected: self.n_states(),
                found: p.len(),
            });
        }
        let mut q = Vec::with_capacity(self.params.len());
        for ht in &self.heads {
            let scope = ht.head | ht.tail;
            let mut marg = vec![0.0; 1 << scope.len()];
            for (i, &pi) in p.iter().enumerate() {
                marg[pack(i as u64, scope) as usize] += pi;
            }
            for t in 0..1u64 << ht.tail.len() {
                let tail_bits = unpack(t, ht.tail);
                let den: f64 = ht
                    .head
                    .subsets()
                    .map(|hs| marg[pack(tail_bits | hs.bits(), scope) as usize])
                    .sum();
                if !(den > 0.0) {
                    let idx = ParamIndex {
                        head: ht.head,
                        tail: ht.tail,
                        tail_state: t,
                    };
                    return Err(Error::ZeroMarginal(idx.display(&self.graph)));
                }
                q.push(marg[pack(tail_bits, scope) as usize] / den);
            }
        }
        Ok(q)
    }

    /// `Σ n_i log p_i`, skipping zero-count cells.
    pub fn loglik(&self, q: &[f64], counts: &[u64]) -> Result<f64> {
        let p = self.prob_vector(q)?;
        Ok(loglik_of(&p, counts))
    }
}

pub(crate) fn loglik_of(p: &[f64], counts: &[u64]) -> f64 {
    p.iter()
        .zip(counts)
        .filter(|(_, &n)| n > 0)
        .map(|(&pi, &n)| {
            if pi > 0.0 {
                n as f64 * pi.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .sum()
}

/// All generalized Möbius parameters of `g` in canonical order.
pub fn enumerate_params(g: &Admg) -> Vec<ParamIndex> {
    heads::heads(g)
        .into_iter()
        .flat_map(|ht| {
            (0..1u64 << ht.tail.len()).map(move |s| ParamIndex {
                head: ht.head,
                tail: ht.tail,
                tail_state: s,
            })
        })
        .collect()
}

/// `M` and `P` for district `d` of `g`.
pub fn build_district_maps(g: &Admg, d: VertexSet) -> Result<DistrictMaps> {
    let Some(x) = d.first() else {
        return Err(Error::NotADistrict(g.fmt_set(d)));
    };
    if !d.is_subset(g.vertices()) || g.district(x) != d {
        return Err(Error::NotADistrict(g.fmt_set(d)));
    }
    let mut model = Model::new(g);
    let j = model.district_of(x);
    Ok(model.districts.swap_remove(j))
}

pub fn prob_vector(g: &Admg, q: &[f64]) -> Result<Vec<f64>> {
    Model::new(g).prob_vector(q)
}

pub fn prob_direct(g: &Admg, q: &[f64], state: u64) -> Result<f64> {
    Model::new(g).prob_direct(q, state)
}

pub fn q_from_p(g: &Admg, p: &[f64]) -> Result<Vec<f64>> {
    Model::new(g).q_from_p(p)
}
