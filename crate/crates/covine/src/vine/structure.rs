//! Regular vine tree sequences: validation, edge bookkeeping, and the
//! peeling order used by simulation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{CovineError, Result};
use crate::families::Side;

/// One edge of a vine tree as written down by a user: the conditioned pair
/// and the conditioning set (empty in the first tree).
///
/// Variables are labelled `1..=d` and map to columns `0..d` of the data in
/// that order. The order of `pair` is meaningful: the first element becomes
/// the first argument of the pair copula, which matters for rotated
/// (asymmetric) families.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEdge {
    pub pair: (usize, usize),
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub given: Vec<usize>,
}

impl RawEdge {
    pub fn new(a: usize, b: usize, given: &[usize]) -> Self {
        RawEdge { pair: (a, b), given: given.to_vec() }
    }
}

/// Where one argument of a pair copula comes from during the sequential
/// pass over the trees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum PseudoSrc {
    /// A raw copula-scale data column, identified by variable label.
    Column(usize),
    /// An h-function output of an edge in the previous tree: tree index,
    /// edge index, and which conditional of that edge is taken.
    HFunc(usize, usize, Side),
}

/// A fully resolved edge: conditioned pair, conditioning set, and the
/// provenance of both pair-copula arguments.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct StructEdge {
    pub conditioned: (usize, usize),
    /// Sorted ascending.
    pub conditioning: Vec<usize>,
    pub first_src: PseudoSrc,
    pub second_src: PseudoSrc,
    /// Endpoint node ids within this tree: variable labels in the first
    /// tree, edge indices into the previous tree afterwards.
    ends: (usize, usize),
}

impl StructEdge {
    /// Human-readable identity like `2,4|1,3`, used in error messages.
    pub fn label(&self) -> String {
        let (j, k) = self.conditioned;
        if self.conditioning.is_empty() {
            format!("{j},{k}")
        } else {
            let given: Vec<String> = self.conditioning.iter().map(|v| v.to_string()).collect();
            format!("{j},{k}|{}", given.join(","))
        }
    }
}

/// A validated regular vine on `d` variables: a sequence of `d-1` trees
/// where tree `m` has `d-m` edges, the first tree spans the variables, the
/// nodes of every later tree are the edges of the previous one, and two
/// edges may only be joined if they share a node (the proximity condition).
///
/// Construction goes through [`validate_structure`], which also derives the
/// conditioned pair and conditioning set of every edge and rejects any
/// description that is not a regular vine. Serialization round-trips through
/// the raw tree description and re-validates on the way in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<RawEdge>>", into = "Vec<Vec<RawEdge>>")]
pub struct VineStructure {
    d: usize,
    trees: Vec<Vec<StructEdge>>,
}

impl TryFrom<Vec<Vec<RawEdge>>> for VineStructure {
    type Error = CovineError;

    fn try_from(raw: Vec<Vec<RawEdge>>) -> Result<Self> {
        validate_structure(&raw)
    }
}

impl From<VineStructure> for Vec<Vec<RawEdge>> {
    fn from(s: VineStructure) -> Self {
        s.to_raw()
    }
}

impl VineStructure {
    /// Number of variables.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of trees, always `dim() - 1`.
    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    /// Total number of edges, `d (d-1) / 2`.
    pub fn edge_count(&self) -> usize {
        self.d * (self.d - 1) / 2
    }

    pub(crate) fn trees(&self) -> &[Vec<StructEdge>] {
        &self.trees
    }

    /// Conditioned pair and conditioning set of every edge, tree by tree.
    pub fn edge_sets(&self) -> Vec<Vec<((usize, usize), Vec<usize>)>> {
        self.trees
            .iter()
            .map(|t| t.iter().map(|e| (e.conditioned, e.conditioning.clone())).collect())
            .collect()
    }

    /// The raw description this structure validates from.
    pub fn to_raw(&self) -> Vec<Vec<RawEdge>> {
        self.trees
            .iter()
            .map(|t| {
                t.iter()
                    .map(|e| RawEdge { pair: e.conditioned, given: e.conditioning.clone() })
                    .collect()
            })
            .collect()
    }

    /// The drop-in default when no structure is supplied: a D-vine (path
    /// vine) in column order. The first tree is the path 1-2-...-d and tree
    /// m pairs variables m apart, so edge order encodes nothing beyond the
    /// ordering of the input columns. Callers who know a better variable
    /// ordering or a genuine R-vine should pass one explicitly.
    pub fn dvine(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(CovineError::InvalidStructure(format!(
                "a vine needs at least 2 variables, got {d}"
            )));
        }
        let mut raw = Vec::with_capacity(d - 1);
        for m in 1..d {
            let tree: Vec<RawEdge> = (1..=d - m)
                .map(|i| RawEdge { pair: (i, i + m), given: (i + 1..i + m).collect() })
                .collect();
            raw.push(tree);
        }
        validate_structure(&raw)
    }

    /// Peel variables off the vine one at a time, starting from the single
    /// edge of the last tree. Used by simulation and the Rosenblatt
    /// transform; deterministic for a given structure.
    pub(crate) fn peeling(&self) -> Result<Peeling> {
        let d = self.d;
        // Complete set (conditioned plus conditioning, sorted) -> edge index,
        // per tree, for parent lookups while walking a chain downwards.
        let mut by_complete: Vec<HashMap<Vec<usize>, usize>> = Vec::with_capacity(d - 1);
        for tree in &self.trees {
            let mut map = HashMap::with_capacity(tree.len());
            for (i, e) in tree.iter().enumerate() {
                map.insert(complete_set(e.conditioned, &e.conditioning), i);
            }
            by_complete.push(map);
        }

        let mut alive: Vec<Vec<bool>> = self.trees.iter().map(|t| vec![true; t.len()]).collect();
        let mut diag = Vec::with_capacity(d);
        let mut chains = Vec::with_capacity(d);
        for step in 0..d - 1 {
            let top = d - 2 - step;
            let mut live = alive[top].iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i);
            let e_top = match (live.next(), live.next()) {
                (Some(i), None) => i,
                _ => {
                    return Err(CovineError::InvalidStructure(format!(
                        "tree {} does not peel to a single edge",
                        top + 1
                    )))
                }
            };
            let v = self.trees[top][e_top].conditioned.0;
            let mut chain = Vec::with_capacity(top + 1);
            let (mut ct, mut ce) = (top, e_top);
            loop {
                let edge = &self.trees[ct][ce];
                let diag_is_first = edge.conditioned.0 == v;
                debug_assert!(diag_is_first || edge.conditioned.1 == v);
                chain.push(ChainLink { tree: ct, edge: ce, diag_is_first });
                alive[ct][ce] = false;
                if ct == 0 {
                    break;
                }
                let mut want = edge.conditioning.clone();
                want.push(v);
                want.sort_unstable();
                ce = *by_complete[ct - 1].get(&want).ok_or_else(|| {
                    CovineError::InvalidStructure(format!(
                        "tree {}: no edge over variables {:?} below {}",
                        ct,
                        want,
                        edge.label()
                    ))
                })?;
                ct -= 1;
            }
            chain.reverse();
            diag.push(v);
            chains.push(chain);
        }
        let last = (1..=d).find(|v| !diag.contains(v)).expect("one variable remains");
        diag.push(last);
        chains.push(Vec::new());
        Ok(Peeling { diag, chains })
    }
}

/// The peeling order of a vine: `diag[i]` is the i-th variable removed and
/// `chains[i]` lists, innermost last, the edges in which it is conditioned,
/// one per tree level. The final variable has an empty chain.
pub(crate) struct Peeling {
    pub diag: Vec<usize>,
    pub chains: Vec<Vec<ChainLink>>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ChainLink {
    pub tree: usize,
    pub edge: usize,
    /// Whether the peeled variable is the first element of the edge's
    /// conditioned pair.
    pub diag_is_first: bool,
}

fn complete_set(pair: (usize, usize), given: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(given.len() + 2);
    s.extend_from_slice(given);
    s.push(pair.0);
    s.push(pair.1);
    s.sort_unstable();
    s
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    /// Returns false if the two were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
        ra != rb
    }
}

/// Checks a raw tree description against the three regular-vine conditions
/// and resolves every edge's conditioned pair, conditioning set, and
/// pseudo-observation sources.
///
/// Within each tree the edges are put into a canonical order (sorted by
/// their variable sets), so acceptance and the resulting structure do not
/// depend on how the edges of a tree were listed. Each pair's internal
/// order is preserved.
pub fn validate_structure(raw: &[Vec<RawEdge>]) -> Result<VineStructure> {
    if raw.is_empty() {
        return Err(CovineError::InvalidStructure("no trees given".into()));
    }
    let d = raw[0].len() + 1;
    if d < 2 {
        return Err(CovineError::InvalidStructure("tree 1 has no edges".into()));
    }
    if raw.len() != d - 1 {
        return Err(CovineError::InvalidStructure(format!(
            "{} variables need {} trees, got {}",
            d,
            d - 1,
            raw.len()
        )));
    }

    let mut trees: Vec<Vec<StructEdge>> = Vec::with_capacity(d - 1);
    for (m, tree_raw) in raw.iter().enumerate() {
        let t = m + 1;
        if tree_raw.len() != d - t {
            return Err(CovineError::InvalidStructure(format!(
                "tree {t} has {} edges, expected {}",
                tree_raw.len(),
                d - t
            )));
        }
        let mut edges = Vec::with_capacity(tree_raw.len());
        for e in tree_raw {
            let (j, k) = e.pair;
            for &v in [j, k].iter().chain(e.given.iter()) {
                if v < 1 || v > d {
                    return Err(CovineError::InvalidStructure(format!(
                        "tree {t}: variable {v} is out of range 1..={d}"
                    )));
                }
            }
            if j == k {
                return Err(CovineError::InvalidStructure(format!(
                    "tree {t}: edge pairs variable {j} with itself"
                )));
            }
            let mut given = e.given.clone();
            given.sort_unstable();
            given.dedup();
            if given.len() != e.given.len() || given.contains(&j) || given.contains(&k) {
                return Err(CovineError::InvalidStructure(format!(
                    "tree {t}: conditioning set of edge {j},{k} repeats a variable"
                )));
            }
            if given.len() != t - 1 {
                return Err(CovineError::InvalidStructure(format!(
                    "tree {t}: edge {j},{k} conditions on {} variables, expected {}",
                    given.len(),
                    t - 1
                )));
            }
            edges.push((e.pair, given));
        }
        // Canonical edge order within the tree: by complete variable set.
        edges.sort_by(|a, b| complete_set(a.0, &a.1).cmp(&complete_set(b.0, &b.1)));

        let mut resolved = Vec::with_capacity(edges.len());
        if m == 0 {
            let mut uf = UnionFind::new(d);
            for (pair, given) in edges {
                if !uf.union(pair.0 - 1, pair.1 - 1) {
                    return Err(CovineError::InvalidStructure(format!(
                        "tree 1: edge {},{} closes a cycle, the first tree must be a spanning tree",
                        pair.0, pair.1
                    )));
                }
                resolved.push(StructEdge {
                    conditioned: pair,
                    conditioning: given,
                    first_src: PseudoSrc::Column(pair.0),
                    second_src: PseudoSrc::Column(pair.1),
                    ends: pair,
                });
            }
        } else {
            let prev = &trees[m - 1];
            let mut by_complete: HashMap<Vec<usize>, usize> = HashMap::with_capacity(prev.len());
            for (i, pe) in prev.iter().enumerate() {
                let key = complete_set(pe.conditioned, &pe.conditioning);
                if by_complete.insert(key, i).is_some() {
                    return Err(CovineError::InvalidStructure(format!(
                        "tree {m}: two edges cover the same variable set"
                    )));
                }
            }
            let mut uf = UnionFind::new(prev.len());
            for (pair, given) in edges {
                let (j, k) = pair;
                let parent = |var: usize| -> Result<usize> {
                    let mut want = given.clone();
                    want.push(var);
                    want.sort_unstable();
                    by_complete.get(&want).copied().ok_or_else(|| {
                        CovineError::InvalidStructure(format!(
                            "tree {t}: edge {j},{k}|{given:?} needs an edge over variables \
                             {want:?} in tree {m}, but there is none"
                        ))
                    })
                };
                let (a, b) = (parent(j)?, parent(k)?);
                let (ea, eb) = (&prev[a], &prev[b]);
                if ea.ends.0 != eb.ends.0
                    && ea.ends.0 != eb.ends.1
                    && ea.ends.1 != eb.ends.0
                    && ea.ends.1 != eb.ends.1
                {
                    return Err(CovineError::InvalidStructure(format!(
                        "tree {t}: edge {j},{k}|{given:?} joins edges {} and {} of tree {m}, \
                         which share no node (proximity condition violated)",
                        ea.label(),
                        eb.label()
                    )));
                }
                if !uf.union(a, b) {
                    return Err(CovineError::InvalidStructure(format!(
                        "tree {t}: edge {j},{k}|{given:?} closes a cycle"
                    )));
                }
                let src = |var: usize, p: usize| -> Result<PseudoSrc> {
                    let pe = &prev[p];
                    let side = if pe.conditioned.0 == var {
                        Side::First
                    } else if pe.conditioned.1 == var {
                        Side::Second
                    } else {
                        return Err(CovineError::InvalidStructure(format!(
                            "tree {t}: edge {j},{k}|{given:?} needs the conditional of {var} \
                             from edge {}, whose conditioned pair does not contain it",
                            pe.label()
                        )));
                    };
                    Ok(PseudoSrc::HFunc(m - 1, p, side))
                };
                resolved.push(StructEdge {
                    conditioned: pair,
                    first_src: src(j, a)?,
                    second_src: src(k, b)?,
                    conditioning: given,
                    ends: (a, b),
                });
            }
            // d - t edges over d - t + 1 nodes with no cycle is a spanning
            // tree, so every edge of the previous tree is used as a node.
        }
        trees.push(resolved);
    }
    Ok(VineStructure { d, trees })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn five_dim_raw() -> Vec<Vec<RawEdge>> {
        vec![
            vec![
                RawEdge::new(1, 2, &[]),
                RawEdge::new(1, 3, &[]),
                RawEdge::new(3, 4, &[]),
                RawEdge::new(3, 5, &[]),
            ],
            vec![
                RawEdge::new(2, 3, &[1]),
                RawEdge::new(1, 4, &[3]),
                RawEdge::new(1, 5, &[3]),
            ],
            vec![RawEdge::new(2, 4, &[1, 3]), RawEdge::new(4, 5, &[1, 3])],
            vec![RawEdge::new(2, 5, &[1, 3, 4])],
        ]
    }

    #[test]
    fn five_dim_example_is_accepted_with_all_edges() {
        let s = validate_structure(&five_dim_raw()).unwrap();
        assert_eq!(s.dim(), 5);
        assert_eq!(s.edge_count(), 10);
        assert_eq!(s.tree_count(), 4);
        let sets = s.edge_sets();
        assert_eq!(sets[3].len(), 1);
        assert_eq!(sets[3][0].0, (2, 5));
        assert_eq!(sets[3][0].1, vec![1, 3, 4]);
    }

    #[test]
    fn two_variables_are_a_single_edge() {
        let s = validate_structure(&[vec![RawEdge::new(1, 2, &[])]]).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.edge_count(), 1);
    }

    #[test]
    fn proximity_violations_name_the_tree() {
        // First tree is the path 1-2-3-4; joining the end edges 1,2 and 3,4
        // in the second tree skips their common neighbour.
        let raw = vec![
            vec![RawEdge::new(1, 2, &[]), RawEdge::new(2, 3, &[]), RawEdge::new(3, 4, &[])],
            vec![RawEdge::new(1, 3, &[2]), RawEdge::new(1, 4, &[2])],
            vec![RawEdge::new(3, 4, &[1, 2])],
        ];
        // 1,4|2 needs an edge over {1,2} and one over {2,4}; the latter does
        // not exist, which is exactly how a proximity break surfaces.
        let err = validate_structure(&raw).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tree 2"), "{msg}");
        // A genuine shared-node failure in tree 3: make tree 2 a path
        // 13-24 shape where the third-tree edge joins non-adjacent edges.
        let raw = vec![
            vec![
                RawEdge::new(1, 2, &[]),
                RawEdge::new(2, 3, &[]),
                RawEdge::new(3, 4, &[]),
                RawEdge::new(4, 5, &[]),
            ],
            vec![
                RawEdge::new(1, 3, &[2]),
                RawEdge::new(2, 4, &[3]),
                RawEdge::new(3, 5, &[4]),
            ],
            vec![RawEdge::new(1, 4, &[2, 3]), RawEdge::new(1, 5, &[3, 4])],
            vec![RawEdge::new(2, 5, &[1, 3, 4])],
        ];
        // Edge 1,5|3,4 joins 1,3|2 (over {1,2,3}) only if an edge over
        // {1,3,4} exists; it does not, so tree 3 is reported.
        let err = validate_structure(&raw).unwrap_err();
        assert!(err.to_string().contains("tree 3"), "{err}");
    }

    #[test]
    fn cycles_and_bad_counts_are_rejected() {
        let raw = vec![vec![
            RawEdge::new(1, 2, &[]),
            RawEdge::new(2, 3, &[]),
            RawEdge::new(1, 3, &[]),
        ]];
        let err = validate_structure(&raw).unwrap_err().to_string();
        assert!(err.contains("3 trees"), "{err}");

        // Same triangle, padded to the right tree count: the cycle itself
        // is reported.
        let raw = vec![
            vec![RawEdge::new(1, 2, &[]), RawEdge::new(2, 3, &[]), RawEdge::new(1, 3, &[])],
            vec![RawEdge::new(1, 3, &[2]), RawEdge::new(2, 4, &[3])],
            vec![RawEdge::new(1, 4, &[2, 3])],
        ];
        let err = validate_structure(&raw).unwrap_err().to_string();
        assert!(err.contains("cycle"), "{err}");

        let raw = vec![
            vec![RawEdge::new(1, 2, &[]), RawEdge::new(2, 3, &[])],
            vec![RawEdge::new(1, 3, &[])],
        ];
        let err = validate_structure(&raw).unwrap_err().to_string();
        assert!(err.contains("conditions on"), "{err}");
    }

    #[test]
    fn validation_ignores_edge_listing_order_and_round_trips() {
        let mut raw = five_dim_raw();
        let a = validate_structure(&raw).unwrap();
        raw[0].reverse();
        raw[1].swap(0, 2);
        raw[2].swap(0, 1);
        let b = validate_structure(&raw).unwrap();
        assert_eq!(a, b);
        let again = validate_structure(&a.to_raw()).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn dvine_default_has_path_first_tree() {
        let s = VineStructure::dvine(4).unwrap();
        let sets = s.edge_sets();
        assert_eq!(
            sets[0].iter().map(|e| e.0).collect::<Vec<_>>(),
            vec![(1, 2), (2, 3), (3, 4)]
        );
        assert_eq!(sets[1][0], ((1, 3), vec![2]));
        assert_eq!(sets[2][0], ((1, 4), vec![2, 3]));
        assert!(VineStructure::dvine(1).is_err());
    }

    #[test]
    fn peeling_visits_every_edge_once() {
        for s in [
            validate_structure(&five_dim_raw()).unwrap(),
            VineStructure::dvine(6).unwrap(),
            VineStructure::dvine(2).unwrap(),
        ] {
            let p = s.peeling().unwrap();
            let d = s.dim();
            assert_eq!(p.diag.len(), d);
            let mut sorted = p.diag.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (1..=d).collect::<Vec<_>>());
            let mut seen = vec![0usize; s.edge_count()];
            let mut offset = vec![0usize; d - 1];
            let mut acc = 0;
            for (m, t) in s.trees().iter().enumerate() {
                offset[m] = acc;
                acc += t.len();
            }
            for (i, chain) in p.chains.iter().enumerate() {
                assert_eq!(chain.len(), d - 1 - i);
                for (lvl, link) in chain.iter().enumerate() {
                    assert_eq!(link.tree, lvl);
                    seen[offset[link.tree] + link.edge] += 1;
                    let e = &s.trees()[link.tree][link.edge];
                    let v = p.diag[i];
                    assert_eq!(
                        if link.diag_is_first { e.conditioned.0 } else { e.conditioned.1 },
                        v
                    );
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn peeling_conditioning_sets_are_partner_prefixes() {
        let s = validate_structure(&five_dim_raw()).unwrap();
        let p = s.peeling().unwrap();
        for (i, chain) in p.chains.iter().enumerate() {
            let v = p.diag[i];
            let mut partners: Vec<usize> = Vec::new();
            for link in chain {
                let e = &s.trees()[link.tree][link.edge];
                let partner =
                    if link.diag_is_first { e.conditioned.1 } else { e.conditioned.0 };
                let mut want = partners.clone();
                want.sort_unstable();
                assert_eq!(e.conditioning, want, "variable {v}");
                partners.push(partner);
            }
        }
    }
}
