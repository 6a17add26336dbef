//! Heads, tails and the partition of a vertex set into heads.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::graph::{Admg, VertexSet};

/// A head together with its tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HeadTail {
    pub head: VertexSet,
    pub tail: VertexSet,
}

/// Canonical head order: by size, then lexicographically on the sorted
/// vertex indices.
pub fn head_order(a: VertexSet, b: VertexSet) -> Ordering {
    a.len()
        .cmp(&b.len())
        .then_with(|| a.iter().cmp(b.iter()))
}

/// A nonempty barren set that lies in a single district of the subgraph
/// induced by its own ancestors.
pub fn is_head(g: &Admg, h: VertexSet) -> bool {
    let Some(x) = h.first() else {
        return false;
    };
    if !h.is_subset(g.vertices()) || g.barren(h) != h {
        return false;
    }
    h.is_subset(g.district_in(x, g.ancestors(h)))
}

/// The tail of `h`: the rest of its district within `an(h)`, plus the
/// parents of that district.
pub fn tail(g: &Admg, h: VertexSet) -> Result<VertexSet> {
    if !is_head(g, h) {
        return Err(Error::NotAHead(format!("{h:?}")));
    }
    Ok(tail_unchecked(g, h))
}

pub(crate) fn tail_unchecked(g: &Admg, h: VertexSet) -> VertexSet {
    let x = h.first().expect("heads are nonempty");
    let d = g.district_in(x, g.ancestors(h));
    (d - h) | g.parents(d)
}

/// All heads of `g` with their tails, grouped by district (districts ordered
/// by smallest member) and in canonical head order within each district.
pub fn heads(g: &Admg) -> Vec<HeadTail> {
    g.districts()
        .into_iter()
        .flat_map(|d| district_heads(g, d))
        .collect()
}

/// Heads contained in district `d`, in canonical order.
pub fn district_heads(g: &Admg, d: VertexSet) -> Vec<HeadTail> {
    let mut hs: Vec<VertexSet> = d
        .subsets()
        .filter(|&h| is_head(g, h))
        .collect();
    hs.sort_by(|a, b| head_order(*a, *b));
    hs.into_iter()
        .map(|head| HeadTail {
            head,
            tail: tail_unchecked(g, head),
        })
        .collect()
}

/// One extraction round: the barren vertices of `an(dis_W(x))` for each
/// district of the subgraph induced by `w`, ordered by smallest member.
///
/// `barren(an(D))` equals `barren(D)`, and it is the same for every `x` in a
/// given district of `G_W`, so each district of `G_W` contributes exactly
/// one block.
pub fn phi(g: &Admg, w: VertexSet) -> Vec<VertexSet> {
    let mut blocks: Vec<VertexSet> = g
        .districts_in(w)
        .into_iter()
        .map(|d| g.barren(g.ancestors(d)))
        .collect();
    blocks.sort();
    blocks
}

/// Repeatedly strips [`phi`] off `w` until nothing is left. Blocks are
/// returned sorted by their bitmask.
pub fn partition(g: &Admg, w: VertexSet) -> Vec<VertexSet> {
    let mut blocks = Vec::new();
    let mut rest = w;
    while !rest.is_empty() {
        let round = phi(g, rest);
        for &b in &round {
            rest = rest - b;
        }
        blocks.extend(round);
    }
    blocks.sort();
    blocks
}

/// The partition of `w` into heads used by the inclusion-exclusion expansion
/// of cell probabilities. Blocks are returned sorted by bitmask.
///
/// On ancestral sets this is [`partition`]. Elsewhere the literal rule can
/// split heads that are joined through ancestors outside `w` (e.g. 3 and 4 in
/// `1 -> 2 -> {3,4}`, `1 <-> {2,3,4}`), which gives the wrong expansion. Here
/// each round works in `A = an(w)`: every district `D` of `G_A` whose barren
/// part lies inside `w` contributes `barren(D)`. If there is none, the heads
/// among the sets `barren(D) ∩ w` are taken instead.
pub fn term_partition(g: &Admg, w: VertexSet) -> Vec<VertexSet> {
    let mut blocks = Vec::new();
    let mut rest = w;
    while !rest.is_empty() {
        let ds = g.districts_in(g.ancestors(rest));
        let mut round: Vec<VertexSet> = ds
            .iter()
            .map(|&d| g.barren(d))
            .filter(|b| b.is_subset(rest))
            .collect();
        if round.is_empty() {
            let cut: Vec<VertexSet> = ds
                .iter()
                .map(|&d| g.barren(d) & rest)
                .filter(|b| !b.is_empty())
                .collect();
            round = cut.iter().copied().filter(|&b| is_head(g, b)).collect();
            if round.is_empty() {
                round = cut;
            }
        }
        for &b in &round {
            rest = rest - b;
        }
        blocks.extend(round);
    }
    blocks.sort();
    blocks
}

/// The two-row head/tail table, heads listed in binary counting order.
///
/// ```text
/// H  {1}  {2}  {3}  {2,3}  {4}  {3,4}
/// T  ∅    {1}  ∅    {1}    {2}  {1,2}
/// ```
pub fn head_tail_table(g: &Admg) -> String {
    let mut hts = heads(g);
    hts.sort_by_key(|ht| ht.head);
    let cols: Vec<(String, String)> = hts
        .iter()
        .map(|ht| (g.fmt_set(ht.head), g.fmt_set(ht.tail)))
        .collect();
    let width = |s: &str| s.chars().count();
    let mut top = String::from("H");
    let mut bottom = String::from("T");
    for (h, t) in &cols {
        let w = width(h).max(width(t));
        top.push_str(&format!("  {h}{}", " ".repeat(w - width(h))));
        bottom.push_str(&format!("  {t}{}", " ".repeat(w - width(t))));
    }
    format!("{}\n{}\n", top.trim_end(), bottom.trim_end())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1() -> Admg {
        Admg::from_edges(
            &["1", "2", "3", "4"],
            &[("1", "2"), ("2", "4")],
            &[("2", "3"), ("3", "4")],
        )
        .unwrap()
    }

    fn g2() -> Admg {
        Admg::from_edges(&["1", "2", "3"], &[("1", "2")], &[("1", "3"), ("2", "3")]).unwrap()
    }

    fn s(g: &Admg, l: &[&str]) -> VertexSet {
        g.vertex_set(l).unwrap()
    }

    #[test]
    fn g1_heads_and_tails() {
        let g = g1();
        let mut got: Vec<(VertexSet, VertexSet)> =
            heads(&g).into_iter().map(|h| (h.head, h.tail)).collect();
        got.sort();
        let mut want = vec![
            (s(&g, &["1"]), VertexSet::EMPTY),
            (s(&g, &["2"]), s(&g, &["1"])),
            (s(&g, &["3"]), VertexSet::EMPTY),
            (s(&g, &["2", "3"]), s(&g, &["1"])),
            (s(&g, &["4"]), s(&g, &["2"])),
            (s(&g, &["3", "4"]), s(&g, &["1", "2"])),
        ];
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn g1_table_layout() {
        let t = head_tail_table(&g1());
        let lines: Vec<Vec<&str>> = t.lines().map(|l| l.split_whitespace().collect()).collect();
        assert_eq!(lines[0], ["H", "{1}", "{2}", "{3}", "{2,3}", "{4}", "{3,4}"]);
        assert_eq!(lines[1], ["T", "∅", "{1}", "∅", "{1}", "{2}", "{1,2}"]);
    }

    #[test]
    fn dag_heads_are_singletons() {
        let g = Admg::from_edges(&["a", "b", "c"], &[("a", "b"), ("a", "c"), ("b", "c")], &[])
            .unwrap();
        let hs = heads(&g);
        assert_eq!(hs.len(), 3);
        for ht in hs {
            assert_eq!(ht.head.len(), 1);
            assert_eq!(ht.tail, g.parents(ht.head));
        }
    }

    #[test]
    fn bidirected_heads_are_connected_sets() {
        // path a <-> b <-> c: {a,c} is not connected
        let g = Admg::from_edges(&["a", "b", "c"], &[], &[("a", "b"), ("b", "c")]).unwrap();
        let hs = heads(&g);
        assert_eq!(hs.len(), 6);
        assert!(hs.iter().all(|h| h.tail.is_empty()));
        assert!(!hs.iter().any(|h| h.head == s(&g, &["a", "c"])));
    }

    #[test]
    fn tails() {
        let g = g1();
        assert_eq!(tail(&g, s(&g, &["3", "4"])).unwrap(), s(&g, &["1", "2"]));
        assert_eq!(tail(&g, s(&g, &["3"])).unwrap(), VertexSet::EMPTY);
        let g = g2();
        assert_eq!(tail(&g, s(&g, &["2", "3"])).unwrap(), s(&g, &["1"]));
        assert!(matches!(
            tail(&g, s(&g, &["1", "2"])),
            Err(Error::NotAHead(_))
        ));
    }

    #[test]
    fn phi_examples() {
        let g = g1();
        assert_eq!(phi(&g, g.vertices()), vec![s(&g, &["1"]), s(&g, &["3", "4"])]);
        assert!(phi(&g, VertexSet::EMPTY).is_empty());
        assert_eq!(phi(&g, s(&g, &["2"])), vec![s(&g, &["2"])]);
    }

    #[test]
    fn partition_examples() {
        let g = g1();
        assert_eq!(
            partition(&g, g.vertices()),
            vec![s(&g, &["1"]), s(&g, &["2"]), s(&g, &["3", "4"])]
        );
        let g = g2();
        assert_eq!(
            partition(&g, g.vertices()),
            vec![s(&g, &["1"]), s(&g, &["2", "3"])]
        );
        for v in 0..3 {
            assert_eq!(partition(&g, VertexSet::singleton(v)), vec![VertexSet::singleton(v)]);
        }
    }

    #[test]
    fn head_ordering() {
        let g = g2();
        let order: Vec<String> = heads(&g).iter().map(|h| g.fmt_set(h.head)).collect();
        assert_eq!(order, ["{1}", "{2}", "{3}", "{1,3}", "{2,3}"]);
    }
}
