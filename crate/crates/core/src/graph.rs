//! Acyclic directed mixed graphs and the purely graphical queries on them.
//!
//! Vertices are indexed `0..n` in declaration order; that order is the
//! canonical order used for every vertex set, joint state and matrix index
//! in this crate. Vertex sets are bitmasks, so a graph holds at most
//! [`MAX_VERTICES`] vertices.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::ops::{BitAnd, BitOr, BitXor, Not, Sub};

use crate::error::{Error, Result};

pub const MAX_VERTICES: usize = 64;

/// A subset of the vertices of a graph, stored as a bitmask over vertex indices.
///
/// Bit `k` is vertex `k`; iteration is ascending, which is the canonical order.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexSet(u64);

impl VertexSet {
    pub const EMPTY: VertexSet = VertexSet(0);

    pub const fn from_bits(bits: u64) -> Self {
        VertexSet(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(v: usize) -> Self {
        debug_assert!(v < MAX_VERTICES);
        VertexSet(1 << v)
    }

    /// The set `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        if n >= 64 {
            VertexSet(u64::MAX)
        } else {
            VertexSet((1u64 << n) - 1)
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(it: I) -> Self {
        it.into_iter().fold(VertexSet::EMPTY, |s, v| s.with(v))
    }

    pub fn contains(self, v: usize) -> bool {
        v < 64 && self.0 >> v & 1 == 1
    }

    #[must_use]
    pub fn with(self, v: usize) -> Self {
        VertexSet(self.0 | 1 << v)
    }

    #[must_use]
    pub fn without(self, v: usize) -> Self {
        VertexSet(self.0 & !(1 << v))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: VertexSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: VertexSet) -> bool {
        self.0 & other.0 == 0
    }

    /// Smallest vertex index in the set.
    pub fn first(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    /// Largest vertex index in the set.
    pub fn last(self) -> Option<usize> {
        (self.0 != 0).then(|| 63 - self.0.leading_zeros() as usize)
    }

    pub fn iter(self) -> VertexIter {
        VertexIter(self.0)
    }

    /// All subsets of `self` in binary counting order (the empty set first).
    pub fn subsets(self) -> Subsets {
        Subsets {
            mask: self.0,
            next: Some(0),
        }
    }

    /// Position of each member of `self` inside `self`, i.e. the rank used
    /// when a state on this set is packed into an integer.
    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl BitOr for VertexSet {
    type Output = VertexSet;
    fn bitor(self, rhs: Self) -> Self {
        VertexSet(self.0 | rhs.0)
    }
}

impl BitAnd for VertexSet {
    type Output = VertexSet;
    fn bitand(self, rhs: Self) -> Self {
        VertexSet(self.0 & rhs.0)
    }
}

impl BitXor for VertexSet {
    type Output = VertexSet;
    fn bitxor(self, rhs: Self) -> Self {
        VertexSet(self.0 ^ rhs.0)
    }
}

impl Sub for VertexSet {
    type Output = VertexSet;
    fn sub(self, rhs: Self) -> Self {
        VertexSet(self.0 & !rhs.0)
    }
}

impl Not for VertexSet {
    type Output = VertexSet;
    fn not(self) -> Self {
        VertexSet(!self.0)
    }
}

impl FromIterator<usize> for VertexSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        VertexSet::from_indices(iter)
    }
}

impl IntoIterator for VertexSet {
    type Item = usize;
    type IntoIter = VertexIter;
    fn into_iter(self) -> VertexIter {
        self.iter()
    }
}

pub struct VertexIter(u64);

impl Iterator for VertexIter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let v = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(v)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for VertexIter {}

pub struct Subsets {
    mask: u64,
    next: Option<u64>,
}

impl Iterator for Subsets {
    type Item = VertexSet;

    fn next(&mut self) -> Option<VertexSet> {
        let cur = self.next?;
        self.next = if cur == self.mask {
            None
        } else {
            // next submask in increasing numeric order
            Some((cur | !self.mask).wrapping_add(1) & self.mask)
        };
        Some(VertexSet(cur))
    }
}

/// Edge mark at one end of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mark {
    Tail,
    Arrow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Directed,
    Bidirected,
}

/// One edge traversed along a path, oriented in the direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStep {
    pub from: usize,
    pub to: usize,
    pub mark_from: Mark,
    pub mark_to: Mark,
}

/// An acyclic directed mixed graph. Immutable after construction.
#[derive(Clone)]
pub struct Admg {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<VertexSet>,
    children: Vec<VertexSet>,
    spouses: Vec<VertexSet>,
    ancestors: Vec<VertexSet>,
    descendants: Vec<VertexSet>,
}

impl Admg {
    /// Builds a graph from labels and edge lists given by vertex index.
    pub fn new(
        labels: Vec<String>,
        directed: &[(usize, usize)],
        bidirected: &[(usize, usize)],
    ) -> Result<Self> {
        let n = labels.len();
        if n > MAX_VERTICES {
            return Err(Error::TooManyVertices(n));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::DuplicateVertex(l.clone()));
            }
        }
        let mut parents = vec![VertexSet::EMPTY; n];
        let mut children = vec![VertexSet::EMPTY; n];
        let mut spouses = vec![VertexSet::EMPTY; n];
        let name = |v: usize| {
            labels
                .get(v)
                .cloned()
                .unwrap_or_else(|| format!("#{v}"))
        };
        for &(a, b) in directed {
            if a >= n {
                return Err(Error::UnknownVertex(name(a)));
            }
            if b >= n {
                return Err(Error::UnknownVertex(name(b)));
            }
            if a == b {
                return Err(Error::SelfLoop(name(a)));
            }
            if parents[b].contains(a) {
                return Err(Error::DuplicateEdge {
                    kind: "directed",
                    a: name(a),
                    b: name(b),
                });
            }
            parents[b] = parents[b].with(a);
            children[a] = children[a].with(b);
        }
        for &(a, b) in bidirected {
            if a >= n {
                return Err(Error::UnknownVertex(name(a)));
            }
            if b >= n {
                return Err(Error::UnknownVertex(name(b)));
            }
            if a == b {
                return Err(Error::SelfLoop(name(a)));
            }
            if spouses[a].contains(b) {
                return Err(Error::DuplicateEdge {
                    kind: "bidirected",
                    a: name(a),
                    b: name(b),
                });
            }
            spouses[a] = spouses[a].with(b);
            spouses[b] = spouses[b].with(a);
        }

        // Kahn's algorithm; anything left over lies on a directed cycle.
        let mut indegree: Vec<usize> = parents.iter().map(|p| p.len()).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for c in children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        if order.len() < n {
            let v = (0..n).find(|&v| indegree[v] > 0).unwrap();
            return Err(Error::DirectedCycle(name(v)));
        }

        let mut ancestors = vec![VertexSet::EMPTY; n];
        for &v in &order {
            ancestors[v] = parents[v]
                .iter()
                .fold(VertexSet::singleton(v), |acc, p| acc | ancestors[p]);
        }
        let mut descendants = vec![VertexSet::EMPTY; n];
        for &v in order.iter().rev() {
            descendants[v] = children[v]
                .iter()
                .fold(VertexSet::singleton(v), |acc, c| acc | descendants[c]);
        }

        Ok(Admg {
            labels,
            index,
            parents,
            children,
            spouses,
            ancestors,
            descendants,
        })
    }

    /// Builds a graph from string labels; convenient for literals in tests.
    pub fn from_edges(
        labels: &[&str],
        directed: &[(&str, &str)],
        bidirected: &[(&str, &str)],
    ) -> Result<Self> {
        let labels: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
        let lookup = |s: &str| {
            labels
                .iter()
                .position(|l| l == s)
                .ok_or_else(|| Error::UnknownVertex(s.to_string()))
        };
        let d = directed
            .iter()
            .map(|&(a, b)| Ok((lookup(a)?, lookup(b)?)))
            .collect::<Result<Vec<_>>>()?;
        let b = bidirected
            .iter()
            .map(|&(a, b)| Ok((lookup(a)?, lookup(b)?)))
            .collect::<Result<Vec<_>>>()?;
        Admg::new(labels, &d, &b)
    }

    /// Parses the line-oriented graph text format.
    ///
    /// ```text
    /// # comment
    /// vertices: A B C
    /// A -> B
    /// B <-> C
    /// ```
    ///
    /// Vertices not declared on a `vertices:` line are registered in order of
    /// first appearance.
    pub fn parse(text: &str) -> Result<Self> {
        let mut labels: Vec<String> = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        let mut directed = Vec::new();
        let mut bidirected = Vec::new();

        fn intern(labels: &mut Vec<String>, seen: &mut HashMap<String, usize>, s: &str) -> usize {
            *seen.entry(s.to_string()).or_insert_with(|| {
                labels.push(s.to_string());
                labels.len() - 1
            })
        }
        let check_label = |s: &str, line: usize| -> Result<()> {
            if s.is_empty() || s.chars().any(|c| c.is_whitespace() || "<>,".contains(c)) {
                Err(Error::Parse {
                    line,
                    msg: format!("invalid vertex label `{s}`"),
                })
            } else {
                Ok(())
            }
        };

        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("vertices:") {
                for tok in rest.split_whitespace() {
                    check_label(tok, line_no)?;
                    if seen.contains_key(tok) {
                        return Err(Error::DuplicateVertex(tok.to_string()));
                    }
                    intern(&mut labels, &mut seen, tok);
                }
                continue;
            }
            let (lhs, rhs, kind) = if let Some((a, b)) = line.split_once("<->") {
                (a, b, EdgeKind::Bidirected)
            } else if let Some((a, b)) = line.split_once("->") {
                (a, b, EdgeKind::Directed)
            } else {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected `A -> B` or `A <-> B`, found `{line}`"),
                });
            };
            let (lhs, rhs) = (lhs.trim(), rhs.trim());
            check_label(lhs, line_no)?;
            check_label(rhs, line_no)?;
            if rhs.contains('-') && (rhs.contains("->") || rhs.contains("<-")) {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "one edge per line".into(),
                });
            }
            let a = intern(&mut labels, &mut seen, lhs);
            let b = intern(&mut labels, &mut seen, rhs);
            match kind {
                EdgeKind::Directed => directed.push((a, b)),
                EdgeKind::Bidirected => {
                    if bidirected.contains(&(a, b)) || bidirected.contains(&(b, a)) {
                        return Err(Error::DuplicateEdge {
                            kind: "bidirected",
                            a: lhs.to_string(),
                            b: rhs.to_string(),
                        });
                    }
                    bidirected.push((a, b))
                }
            }
        }
        Admg::new(labels, &directed, &bidirected)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn vertices(&self) -> VertexSet {
        VertexSet::full(self.n())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn vertex(&self, label: &str) -> Result<usize> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(label.to_string()))
    }

    /// Resolves a list of labels into a vertex set.
    pub fn vertex_set<S: AsRef<str>>(&self, labels: &[S]) -> Result<VertexSet> {
        labels
            .iter()
            .try_fold(VertexSet::EMPTY, |s, l| Ok(s.with(self.vertex(l.as_ref())?)))
    }

    /// Renders a set as `{a,b}` in canonical order, `∅` when empty.
    pub fn fmt_set(&self, s: VertexSet) -> String {
        if s.is_empty() {
            return "∅".to_string();
        }
        let names: Vec<&str> = s.iter().map(|v| self.label(v)).collect();
        format!("{{{}}}", names.join(","))
    }

    /// Directed edges `(from, to)` sorted by `(from, to)`.
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        (0..self.n())
            .flat_map(|a| self.children[a].iter().map(move |b| (a, b)))
            .collect()
    }

    /// Bidirected edges `(a, b)` with `a < b`, sorted.
    pub fn bidirected_edges(&self) -> Vec<(usize, usize)> {
        (0..self.n())
            .flat_map(|a| {
                self.spouses[a]
                    .iter()
                    .filter(move |&b| b > a)
                    .map(move |b| (a, b))
            })
            .collect()
    }

    pub fn has_directed(&self, from: usize, to: usize) -> bool {
        self.children[from].contains(to)
    }

    pub fn has_bidirected(&self, a: usize, b: usize) -> bool {
        self.spouses[a].contains(b)
    }

    pub fn parents_of(&self, v: usize) -> VertexSet {
        self.parents[v]
    }

    pub fn children_of(&self, v: usize) -> VertexSet {
        self.children[v]
    }

    pub fn spouses_of(&self, v: usize) -> VertexSet {
        self.spouses[v]
    }

    pub fn parents(&self, a: VertexSet) -> VertexSet {
        self.union_over(a, &self.parents)
    }

    pub fn children(&self, a: VertexSet) -> VertexSet {
        self.union_over(a, &self.children)
    }

    pub fn spouses(&self, a: VertexSet) -> VertexSet {
        self.union_over(a, &self.spouses)
    }

    /// Ancestors of `a`, including `a` itself.
    pub fn ancestors(&self, a: VertexSet) -> VertexSet {
        self.union_over(a, &self.ancestors)
    }

    /// Descendants of `a`, including `a` itself.
    pub fn descendants(&self, a: VertexSet) -> VertexSet {
        self.union_over(a, &self.descendants)
    }

    fn union_over(&self, a: VertexSet, table: &[VertexSet]) -> VertexSet {
        a.iter().fold(VertexSet::EMPTY, |acc, v| acc | table[v])
    }

    /// District of `x` in the induced subgraph on `within`.
    pub fn district_in(&self, x: usize, within: VertexSet) -> VertexSet {
        debug_assert!(within.contains(x));
        let mut comp = VertexSet::singleton(x);
        let mut frontier = comp;
        while !frontier.is_empty() {
            let next = (self.spouses(frontier) & within) - comp;
            comp = comp | next;
            frontier = next;
        }
        comp
    }

    /// District of `x`: its connected component in the bidirected skeleton.
    pub fn district(&self, x: usize) -> VertexSet {
        self.district_in(x, self.vertices())
    }

    /// Districts of the induced subgraph on `within`, ordered by smallest member.
    pub fn districts_in(&self, within: VertexSet) -> Vec<VertexSet> {
        let mut out = Vec::new();
        let mut rest = within;
        while let Some(x) = rest.first() {
            let d = self.district_in(x, within);
            rest = rest - d;
            out.push(d);
        }
        out
    }

    pub fn districts(&self) -> Vec<VertexSet> {
        self.districts_in(self.vertices())
    }

    /// Members of `a` with no proper descendant in `a`.
    pub fn barren(&self, a: VertexSet) -> VertexSet {
        a.iter()
            .filter(|&x| (self.descendants[x] & a) == VertexSet::singleton(x))
            .collect()
    }

    pub fn is_ancestral(&self, a: VertexSet) -> bool {
        self.ancestors(a) == a
    }

    /// Whether `x` and `y` are m-separated given `z`.
    pub fn m_separated(&self, x: VertexSet, y: VertexSet, z: VertexSet) -> Result<bool> {
        Ok(self.m_connecting_walk(x, y, z)?.is_none())
    }

    /// Searches for an m-connecting walk from `x` to `y` given `z`.
    ///
    /// Alternating reachability over (vertex, arrival mark) states: a vertex
    /// entered and left through arrowheads is a collider and may be passed
    /// only if it is an ancestor of `z`; any other internal vertex may be
    /// passed only if it is outside `z`. Such a walk exists iff an
    /// m-connecting path exists. The returned walk is a shortest one in the
    /// state graph and may revisit vertices.
    pub fn m_connecting_walk(
        &self,
        x: VertexSet,
        y: VertexSet,
        z: VertexSet,
    ) -> Result<Option<Vec<PathStep>>> {
        let all = self.vertices();
        if !(x | y | z).is_subset(all) {
            let bad = ((x | y | z) - all).first().unwrap();
            return Err(Error::UnknownVertex(format!("#{bad}")));
        }
        if x.is_empty() || y.is_empty() {
            return Err(Error::EmptySet);
        }
        if !x.is_disjoint(y) || !x.is_disjoint(z) || !y.is_disjoint(z) {
            return Err(Error::OverlappingSets);
        }
        let an_z = self.ancestors(z);

        // state = 2 * v + (arrived through an arrowhead); starts are separate
        let n = self.n();
        let mut prev: Vec<Option<(usize, PathStep)>> = vec![None; 2 * n];
        let mut seen = vec![false; 2 * n];
        let mut queue: VecDeque<(usize, Option<Mark>)> = x.iter().map(|v| (v, None)).collect();

        while let Some((v, arrival)) = queue.pop_front() {
            for (w, mark_v, mark_w) in self.incident(v) {
                let pass = match arrival {
                    None => true,
                    Some(Mark::Arrow) if mark_v == Mark::Arrow => an_z.contains(v),
                    Some(_) => !z.contains(v),
                };
                if !pass {
                    continue;
                }
                let state = 2 * w + usize::from(mark_w == Mark::Arrow);
                if seen[state] {
                    continue;
                }
                seen[state] = true;
                let step = PathStep {
                    from: v,
                    to: w,
                    mark_from: mark_v,
                    mark_to: mark_w,
                };
                let from_state = arrival.map(|m| 2 * v + usize::from(m == Mark::Arrow));
                prev[state] = Some((from_state.unwrap_or(usize::MAX), step));
                if y.contains(w) {
                    let mut walk = vec![step];
                    let mut cur = from_state;
                    while let Some(s) = cur {
                        let (p, st) = prev[s].expect("visited state has a predecessor");
                        walk.push(st);
                        cur = (p != usize::MAX).then_some(p);
                    }
                    walk.reverse();
                    return Ok(Some(walk));
                }
                queue.push_back((w, Some(mark_w)));
            }
        }
        Ok(None)
    }

    /// Edges at `v` as `(other endpoint, mark at v, mark at other)`.
    fn incident(&self, v: usize) -> impl Iterator<Item = (usize, Mark, Mark)> + '_ {
        let pa = self.parents[v].iter().map(|p| (p, Mark::Arrow, Mark::Tail));
        let ch = self.children[v].iter().map(|c| (c, Mark::Tail, Mark::Arrow));
        let sp = self.spouses[v].iter().map(|s| (s, Mark::Arrow, Mark::Arrow));
        pa.chain(ch).chain(sp)
    }

    /// Renders a walk as e.g. `1 -> 2 <-> 3`.
    pub fn fmt_walk(&self, walk: &[PathStep]) -> String {
        let mut out = String::new();
        if let Some(first) = walk.first() {
            out.push_str(self.label(first.from));
        }
        for s in walk {
            let sym = match (s.mark_from, s.mark_to) {
                (Mark::Tail, Mark::Arrow) => "->",
                (Mark::Arrow, Mark::Tail) => "<-",
                (Mark::Arrow, Mark::Arrow) => "<->",
                (Mark::Tail, Mark::Tail) => "--",
            };
            out.push_str(&format!(" {sym} {}", self.label(s.to)));
        }
        out
    }

    /// Whether adding `from -> to` would keep the directed part acyclic.
    pub fn can_add_directed(&self, from: usize, to: usize) -> bool {
        from != to && !self.descendants[to].contains(from) && !self.has_directed(from, to)
    }

    /// Copy of the graph with one edge added or removed.
    pub fn with_edge(&self, kind: EdgeKind, a: usize, b: usize, present: bool) -> Result<Admg> {
        let mut directed = self.directed_edges();
        let mut bidirected = self.bidirected_edges();
        let key = (a.min(b), a.max(b));
        match (kind, present) {
            (EdgeKind::Directed, true) => directed.push((a, b)),
            (EdgeKind::Directed, false) => directed.retain(|&e| e != (a, b)),
            (EdgeKind::Bidirected, true) => bidirected.push(key),
            (EdgeKind::Bidirected, false) => bidirected.retain(|&e| e != key),
        }
        Admg::new(self.labels.clone(), &directed, &bidirected)
    }

    /// Same vertices, no edges.
    pub fn edgeless(labels: Vec<String>) -> Result<Admg> {
        Admg::new(labels, &[], &[])
    }

    /// Renders the graph in the text format accepted by [`Admg::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("vertices: {}\n", self.labels.join(" "));
        for (a, b) in self.directed_edges() {
            out.push_str(&format!("{} -> {}\n", self.label(a), self.label(b)));
        }
        for (a, b) in self.bidirected_edges() {
            out.push_str(&format!("{} <-> {}\n", self.label(a), self.label(b)));
        }
        out
    }
}

impl fmt::Debug for Admg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Admg {{ {} }}", self.to_text().trim().replace('\n', "; "))
    }
}

impl PartialEq for Admg {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
            && self.parents == other.parents
            && self.spouses == other.spouses
    }
}

impl Eq for Admg {}
