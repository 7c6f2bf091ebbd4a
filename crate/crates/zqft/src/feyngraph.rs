//! Half-edge graphs with boundary legs.
//!
//! A graph is a set of vertices (bulk vertices of valence >= 3, plus
//! univalent left and right boundary vertices), a block of half-edges per
//! vertex, and a fixed-point-free involution pairing half-edges into edges.
//! An edge whose half-edges sit on the same vertex is a short loop.
//!
//! The module provides exact combinatorics at desk scale (<= 16 half-edges
//! per factor): isomorphism-class enumeration, automorphism counts by
//! exhaustive search, vertex/edge decorations and their orbit structure, and
//! the gluing product that sums over perfect matchings of the facing
//! boundary vertices, fusing matched legs into cut ("c") edges. Multiplicity
//! bookkeeping is integer-exact; loop order is an exact rational (it is a
//! half-integer once boundary legs are present).
//!
//! Canonical forms are lexicographically minimal encodings over all vertex
//! relabelings; for a fixed vertex order the minimal half-edge assignment is
//! produced greedily, so canonicalization costs O(#vertex orders * H) rather
//! than a factorial in the valences.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;

use crate::{Error, Result};

/// Enumeration bound: exhaustive isomorphism-class listing is quadratic in
/// the number of involutions, which is (H-1)!! at H half-edges.
pub const MAX_HALF_EDGES: usize = 16;

/// Hard cap on a single graph; glue outputs of two maximal factors fit.
const MAX_GRAPH_HALF_EDGES: usize = 2 * MAX_HALF_EDGES;

/// Side decoration of a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SideLabel {
    L,
    R,
}

/// Edge decoration: untouched edges keep `U`, edges created by fusing
/// matched boundary legs carry `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeLabel {
    U,
    C,
}

/// Finite graph with bulk vertices, univalent boundary vertices and a
/// fixed-point-free involution on half-edges.
///
/// Vertices are indexed bulk first, then left boundary, then right boundary.
/// Half-edges are numbered in contiguous blocks following the vertex order,
/// so vertex `v` of valence `k` owns `k` consecutive half-edge labels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeynmanGraph {
    bulk: Vec<usize>,
    n_left: usize,
    n_right: usize,
    inv: Vec<usize>,
}

/// One automorphism: a vertex bijection respecting the bulk/left/right
/// partition together with a half-edge bijection commuting with incidence
/// and the involution.
#[derive(Debug, Clone)]
struct Automorphism {
    vperm: Vec<usize>,
    hperm: Vec<usize>,
}

impl FeynmanGraph {
    /// Builds a graph from bulk valences, boundary counts and the edge list.
    ///
    /// `pairs` must partition the half-edge labels `0..H` into disjoint
    /// two-element sets. Bulk valences below 3 are rejected unless
    /// `allow_low_valence` is set (valence 0 is never allowed).
    pub fn new(
        bulk_valences: &[usize],
        n_left: usize,
        n_right: usize,
        pairs: &[(usize, usize)],
        allow_low_valence: bool,
    ) -> Result<Self> {
        for &val in bulk_valences {
            if val == 0 {
                return Err(Error::domain("bulk vertex valence must be positive"));
            }
            if val < 3 && !allow_low_valence {
                return Err(Error::domain(
                    "bulk vertex valence below 3 requires low-valence mode",
                ));
            }
        }
        let n_half = bulk_valences.iter().sum::<usize>() + n_left + n_right;
        if n_half > MAX_GRAPH_HALF_EDGES {
            return Err(Error::unsupported(
                "graph exceeds the exhaustive-combinatorics size cap",
            ));
        }
        if pairs.len() * 2 != n_half {
            return Err(Error::domain(
                "involution pairs must cover every half-edge exactly once",
            ));
        }
        let mut inv = vec![usize::MAX; n_half];
        for &(a, b) in pairs {
            if a >= n_half || b >= n_half {
                return Err(Error::domain("half-edge label out of range"));
            }
            if a == b {
                return Err(Error::domain("involution must be fixed-point-free"));
            }
            if inv[a] != usize::MAX || inv[b] != usize::MAX {
                return Err(Error::domain("half-edge appears in two pairs"));
            }
            inv[a] = b;
            inv[b] = a;
        }
        Ok(FeynmanGraph {
            bulk: bulk_valences.to_vec(),
            n_left,
            n_right,
            inv,
        })
    }

    pub fn n_bulk(&self) -> usize {
        self.bulk.len()
    }

    pub fn n_left(&self) -> usize {
        self.n_left
    }

    pub fn n_right(&self) -> usize {
        self.n_right
    }

    pub fn n_vertices(&self) -> usize {
        self.bulk.len() + self.n_left + self.n_right
    }

    pub fn n_half_edges(&self) -> usize {
        self.inv.len()
    }

    pub fn bulk_valences(&self) -> &[usize] {
        &self.bulk
    }

    /// Valence of vertex `v` (boundary vertices are univalent).
    pub fn valence(&self, v: usize) -> usize {
        if v < self.bulk.len() {
            self.bulk[v]
        } else {
            1
        }
    }

    pub fn is_left_boundary(&self, v: usize) -> bool {
        v >= self.bulk.len() && v < self.bulk.len() + self.n_left
    }

    pub fn is_right_boundary(&self, v: usize) -> bool {
        v >= self.bulk.len() + self.n_left
    }

    /// First half-edge label of each vertex block, plus a trailing total.
    fn block_starts(&self) -> Vec<usize> {
        let mut starts = Vec::with_capacity(self.n_vertices() + 1);
        let mut acc = 0;
        for v in 0..self.n_vertices() {
            starts.push(acc);
            acc += self.valence(v);
        }
        starts.push(acc);
        starts
    }

    /// Vertex carrying half-edge `h`.
    pub fn vertex_of(&self, h: usize) -> usize {
        let starts = self.block_starts();
        match starts.binary_search(&h) {
            Ok(mut i) => {
                // A vertex can never own zero half-edges, so the matching
                // start is the vertex itself unless we hit the trailing total.
                while starts[i + 1] == h {
                    i += 1;
                }
                i
            }
            Err(i) => i - 1,
        }
    }

    /// Involution partner of half-edge `h`.
    pub fn partner(&self, h: usize) -> usize {
        self.inv[h]
    }

    /// Edges as sorted `(min, max)` half-edge pairs; this order defines the
    /// edge indexing used by decorations.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = (0..self.inv.len())
            .filter(|&h| h < self.inv[h])
            .map(|h| (h, self.inv[h]))
            .collect();
        out.sort_unstable();
        out
    }

    /// A short loop is an edge with both half-edges on one vertex.
    pub fn is_short_loop(&self, edge: (usize, usize)) -> bool {
        self.vertex_of(edge.0) == self.vertex_of(edge.1)
    }

    pub fn has_short_loop(&self) -> bool {
        self.edges().iter().any(|&e| self.is_short_loop(e))
    }

    /// Loop order `|E| - |V_bulk| - |V_boundary| / 2`, an exact half-integer.
    pub fn loop_order(&self) -> Rational64 {
        let e = (self.inv.len() / 2) as i64;
        let vb = self.bulk.len() as i64;
        let vbd = (self.n_left + self.n_right) as i64;
        Rational64::new(2 * e - 2 * vb - vbd, 2)
    }

    /// All automorphisms, by exhaustive search over partition-respecting
    /// vertex bijections and compatible half-edge bijections.
    fn automorphisms(&self) -> Vec<Automorphism> {
        let nv = self.n_vertices();
        let nb = self.bulk.len();
        let starts = self.block_starts();
        // Bulk vertices may only map to bulk vertices of equal valence.
        let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (v, &val) in self.bulk.iter().enumerate() {
            classes.entry(val).or_default().push(v);
        }
        let mut class_lists: Vec<Vec<usize>> = classes.into_values().collect();
        class_lists.push((nb..nb + self.n_left).collect());
        class_lists.push((nb + self.n_left..nv).collect());
        let class_perms: Vec<Vec<Vec<usize>>> = class_lists
            .iter()
            .map(|members| permutations(members.len()))
            .collect();

        let mut out = Vec::new();
        let mut choice = vec![0usize; class_lists.len()];
        loop {
            let mut vperm = vec![0usize; nv];
            for (ci, members) in class_lists.iter().enumerate() {
                let perm = &class_perms[ci][choice[ci]];
                for (slot, &m) in members.iter().enumerate() {
                    vperm[m] = members[perm[slot]];
                }
            }
            let mut hperm = vec![usize::MAX; self.inv.len()];
            let mut used = vec![false; self.inv.len()];
            self.extend_half_edge_map(0, &vperm, &starts, &mut hperm, &mut used, &mut out);

            // Advance the mixed-radix choice counter.
            let mut ci = 0;
            loop {
                if ci == class_lists.len() {
                    return out;
                }
                choice[ci] += 1;
                if choice[ci] < class_perms[ci].len() {
                    break;
                }
                choice[ci] = 0;
                ci += 1;
            }
        }
    }

    fn extend_half_edge_map(
        &self,
        h: usize,
        vperm: &[usize],
        starts: &[usize],
        hperm: &mut Vec<usize>,
        used: &mut Vec<bool>,
        out: &mut Vec<Automorphism>,
    ) {
        if h == self.inv.len() {
            out.push(Automorphism {
                vperm: vperm.to_vec(),
                hperm: hperm.clone(),
            });
            return;
        }
        let w = vperm[self.vertex_of(h)];
        let t = self.inv[h];
        if t < h {
            // Commuting with the involution forces the image.
            let img = self.inv[hperm[t]];
            if !used[img] && img >= starts[w] && img < starts[w + 1] {
                hperm[h] = img;
                used[img] = true;
                self.extend_half_edge_map(h + 1, vperm, starts, hperm, used, out);
                used[img] = false;
                hperm[h] = usize::MAX;
            }
            return;
        }
        for img in starts[w]..starts[w + 1] {
            if used[img] {
                continue;
            }
            hperm[h] = img;
            used[img] = true;
            self.extend_half_edge_map(h + 1, vperm, starts, hperm, used, out);
            used[img] = false;
            hperm[h] = usize::MAX;
        }
    }

    /// Order of the automorphism group.
    pub fn aut_order(&self) -> u64 {
        self.automorphisms().len() as u64
    }

    /// Canonical representative of the isomorphism class: the graph whose
    /// encoding is lexicographically minimal over all relabelings.
    pub fn canon(&self) -> FeynmanGraph {
        let enc = min_encoding(self, None);
        graph_from_encoding(&enc, self.n_left, self.n_right).0
    }

    /// Parses the display format, e.g.
    /// `V_b=[3,3];V_L=2;V_R=0;pairs=[(0,1),(2,6),(3,7),(4,5)]`.
    pub fn from_text(text: &str) -> Result<Self> {
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let fields: Vec<&str> = compact.split(';').collect();
        if fields.len() != 4 {
            return Err(Error::parse("expected V_b, V_L, V_R and pairs fields"));
        }
        let bulk = parse_usize_list(strip_field(fields[0], "V_b=[", "]")?)?;
        let n_left = parse_usize(strip_field(fields[1], "V_L=", "")?)?;
        let n_right = parse_usize(strip_field(fields[2], "V_R=", "")?)?;
        let pair_body = strip_field(fields[3], "pairs=[", "]")?;
        let mut pairs = Vec::new();
        if !pair_body.is_empty() {
            for chunk in pair_body.split("),(") {
                let inner = chunk.trim_start_matches('(').trim_end_matches(')');
                let nums = parse_usize_list(inner)?;
                if nums.len() != 2 {
                    return Err(Error::parse("each pair needs exactly two labels"));
                }
                pairs.push((nums[0], nums[1]));
            }
        }
        FeynmanGraph::new(&bulk, n_left, n_right, &pairs, true)
    }
}

impl fmt::Display for FeynmanGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V_b=[")?;
        for (i, val) in self.bulk.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{val}")?;
        }
        write!(f, "];V_L={};V_R={};pairs=[", self.n_left, self.n_right)?;
        for (i, (a, b)) in self.edges().into_iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "({a},{b})")?;
        }
        write!(f, "]")
    }
}

impl FromStr for FeynmanGraph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeynmanGraph::from_text(s)
    }
}

fn strip_field<'a>(field: &'a str, prefix: &str, suffix: &str) -> Result<&'a str> {
    field
        .strip_prefix(prefix)
        .and_then(|rest| rest.strip_suffix(suffix))
        .ok_or_else(|| Error::parse("malformed graph field"))
}

fn parse_usize(text: &str) -> Result<usize> {
    text.parse::<usize>()
        .map_err(|_| Error::parse("expected a non-negative integer"))
}

fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',').map(parse_usize).collect()
}

/// All permutations of `0..n` in a deterministic order.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    permute_rec(&mut items, 0, &mut out);
    out
}

fn permute_rec(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute_rec(items, k + 1, out);
        items.swap(k, i);
    }
}

/// All perfect matchings of `0..n` (empty when `n` is odd).
fn perfect_matchings(n: usize) -> Vec<Vec<(usize, usize)>> {
    if n % 2 != 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut free: Vec<usize> = (0..n).collect();
    let mut acc = Vec::new();
    match_rec(&mut free, &mut acc, &mut out);
    out
}

fn match_rec(
    free: &mut Vec<usize>,
    acc: &mut Vec<(usize, usize)>,
    out: &mut Vec<Vec<(usize, usize)>>,
) {
    if free.is_empty() {
        out.push(acc.clone());
        return;
    }
    let a = free[0];
    for i in 1..free.len() {
        let b = free[i];
        let mut rest: Vec<usize> = free
            .iter()
            .copied()
            .filter(|&x| x != a && x != b)
            .collect();
        acc.push((a, b));
        match_rec(&mut rest, acc, out);
        acc.pop();
    }
}

/// Relabeling-invariant encoding used for canonical forms; ordered
/// lexicographically field by field.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Encoding {
    bulk: Vec<usize>,
    vlabels: Vec<u8>,
    pairs: Vec<(usize, usize, u8)>,
}

fn side_code(s: SideLabel) -> u8 {
    match s {
        SideLabel::L => 0,
        SideLabel::R => 1,
    }
}

fn edge_code(e: EdgeLabel) -> u8 {
    match e {
        EdgeLabel::U => 0,
        EdgeLabel::C => 1,
    }
}

/// Minimal encoding over all vertex relabelings; for each vertex order the
/// half-edge assignment is the greedy lexicographic minimum.
fn min_encoding(g: &FeynmanGraph, dec: Option<&Decoration>) -> Encoding {
    let nb = g.n_bulk();
    let nv = g.n_vertices();
    // Candidate vertex orders: bulk sorted by valence with equal valences
    // permuted freely, boundary vertices permuted within their side.
    let mut bulk_sorted: Vec<usize> = (0..nb).collect();
    bulk_sorted.sort_by_key(|&v| g.bulk[v]);
    let mut class_lists: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < nb {
        let mut j = i;
        while j < nb && g.bulk[bulk_sorted[j]] == g.bulk[bulk_sorted[i]] {
            j += 1;
        }
        class_lists.push(bulk_sorted[i..j].to_vec());
        i = j;
    }
    class_lists.push((nb..nb + g.n_left).collect());
    class_lists.push((nb + g.n_left..nv).collect());
    let class_perms: Vec<Vec<Vec<usize>>> = class_lists
        .iter()
        .map(|members| permutations(members.len()))
        .collect();

    let edges = g.edges();
    let elabels: Vec<u8> = match dec {
        Some(d) => d.edges.iter().copied().map(edge_code).collect(),
        None => vec![0; edges.len()],
    };

    let mut best: Option<Encoding> = None;
    let mut choice = vec![0usize; class_lists.len()];
    loop {
        // old vertex -> new position
        let mut pos = vec![0usize; nv];
        let mut new_order = vec![0usize; nv];
        let mut cursor = 0;
        for (ci, members) in class_lists.iter().enumerate() {
            let perm = &class_perms[ci][choice[ci]];
            for &slot in perm {
                let v = members[slot];
                pos[v] = cursor;
                new_order[cursor] = v;
                cursor += 1;
            }
        }
        let bulk_new: Vec<usize> = new_order[..nb].iter().map(|&v| g.bulk[v]).collect();
        let vlabels: Vec<u8> = match dec {
            Some(d) => new_order
                .iter()
                .map(|&v| side_code(d.vertices[v]))
                .collect(),
            None => Vec::new(),
        };
        let mut edge_multiset: BTreeMap<(usize, usize, u8), usize> = BTreeMap::new();
        for (ei, &(a, b)) in edges.iter().enumerate() {
            let (mut u, mut w) = (pos[g.vertex_of(a)], pos[g.vertex_of(b)]);
            if u > w {
                std::mem::swap(&mut u, &mut w);
            }
            *edge_multiset.entry((u, w, elabels[ei])).or_insert(0) += 1;
        }
        let valences: Vec<usize> = (0..nv).map(|p| g.valence(new_order[p])).collect();
        let pairs = greedy_pairs(&valences, &mut edge_multiset);
        let cand = Encoding {
            bulk: bulk_new,
            vlabels,
            pairs,
        };
        if best.as_ref().map(|b| cand < *b).unwrap_or(true) {
            best = Some(cand);
        }

        let mut ci = 0;
        loop {
            if ci == class_lists.len() {
                return best.unwrap();
            }
            choice[ci] += 1;
            if choice[ci] < class_perms[ci].len() {
                break;
            }
            choice[ci] = 0;
            ci += 1;
        }
    }
}

/// Greedy minimal half-edge assignment for a fixed vertex order: repeatedly
/// match the smallest free slot to the smallest reachable partner slot,
/// breaking ties toward the smaller edge label. Consumes the multiset.
fn greedy_pairs(
    valences: &[usize],
    edges: &mut BTreeMap<(usize, usize, u8), usize>,
) -> Vec<(usize, usize, u8)> {
    let nv = valences.len();
    let mut starts = Vec::with_capacity(nv + 1);
    let mut acc = 0;
    for &val in valences {
        starts.push(acc);
        acc += val;
    }
    starts.push(acc);
    let total = acc;
    let mut used = vec![false; total];
    let mut out = Vec::with_capacity(total / 2);
    let mut scan = 0;
    while out.len() * 2 < total {
        while scan < total && used[scan] {
            scan += 1;
        }
        let a = scan;
        used[a] = true;
        let va = starts.partition_point(|&s| s <= a) - 1;
        // Remaining edges at va always have va as their smaller endpoint:
        // vertices before va have no free slots left.
        let key = edges
            .range((va, 0, 0)..(va + 1, 0, 0))
            .find(|(_, &count)| count > 0)
            .map(|(&k, _)| k)
            .expect("edge multiset must cover all free slots");
        let w = key.1;
        let b = (starts[w]..starts[w + 1])
            .find(|&s| !used[s])
            .expect("partner vertex must have a free slot");
        used[b] = true;
        out.push((a, b, key.2));
        match edges.get_mut(&key) {
            Some(c) if *c > 1 => *c -= 1,
            _ => {
                edges.remove(&key);
            }
        }
    }
    out
}

/// Rebuilds a graph (and edge labels in edge-index order) from an encoding.
fn graph_from_encoding(
    enc: &Encoding,
    n_left: usize,
    n_right: usize,
) -> (FeynmanGraph, Vec<EdgeLabel>) {
    let pairs: Vec<(usize, usize)> = enc.pairs.iter().map(|&(a, b, _)| (a, b)).collect();
    let g = FeynmanGraph::new(&enc.bulk, n_left, n_right, &pairs, true)
        .expect("encodings are valid by construction");
    // Greedy pairs come out sorted by their smaller label, matching edges().
    let labels = enc
        .pairs
        .iter()
        .map(|&(_, _, l)| if l == 0 { EdgeLabel::U } else { EdgeLabel::C })
        .collect();
    (g, labels)
}

/// Vertex and edge decoration of a graph.
///
/// `vertices` is indexed by vertex, `edges` by the sorted edge order of
/// [`FeynmanGraph::edges`]. Admissibility: left boundary vertices carry `L`,
/// right boundary vertices carry `R`, and every edge joining an `L` vertex
/// to an `R` vertex is cut (`C`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Decoration {
    pub vertices: Vec<SideLabel>,
    pub edges: Vec<EdgeLabel>,
}

/// A graph together with an admissible decoration.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DecoratedGraph {
    graph: FeynmanGraph,
    decoration: Decoration,
}

impl DecoratedGraph {
    pub fn new(graph: FeynmanGraph, decoration: Decoration) -> Result<Self> {
        if decoration.vertices.len() != graph.n_vertices() {
            return Err(Error::domain("vertex decoration length mismatch"));
        }
        let edges = graph.edges();
        if decoration.edges.len() != edges.len() {
            return Err(Error::domain("edge decoration length mismatch"));
        }
        for v in 0..graph.n_vertices() {
            if graph.is_left_boundary(v) && decoration.vertices[v] != SideLabel::L {
                return Err(Error::domain("left boundary vertices must carry L"));
            }
            if graph.is_right_boundary(v) && decoration.vertices[v] != SideLabel::R {
                return Err(Error::domain("right boundary vertices must carry R"));
            }
        }
        for (ei, &(a, b)) in edges.iter().enumerate() {
            let sa = decoration.vertices[graph.vertex_of(a)];
            let sb = decoration.vertices[graph.vertex_of(b)];
            if sa != sb && decoration.edges[ei] != EdgeLabel::C {
                return Err(Error::domain("edges joining L and R vertices must be cut"));
            }
        }
        Ok(DecoratedGraph { graph, decoration })
    }

    pub fn graph(&self) -> &FeynmanGraph {
        &self.graph
    }

    pub fn decoration(&self) -> &Decoration {
        &self.decoration
    }

    /// Canonical representative of the decorated isomorphism class.
    pub fn canon(&self) -> DecoratedGraph {
        let enc = min_encoding(&self.graph, Some(&self.decoration));
        let (graph, elabels) = graph_from_encoding(&enc, self.graph.n_left, self.graph.n_right);
        let vertices = enc
            .vlabels
            .iter()
            .map(|&c| if c == 0 { SideLabel::L } else { SideLabel::R })
            .collect();
        DecoratedGraph {
            graph,
            decoration: Decoration {
                vertices,
                edges: elabels,
            },
        }
    }

    /// Order of the decoration-preserving automorphism subgroup.
    pub fn aut_order(&self) -> u64 {
        let edges = self.graph.edges();
        let edge_index: BTreeMap<(usize, usize), usize> = edges
            .iter()
            .enumerate()
            .map(|(i, &e)| (e, i))
            .collect();
        self.graph
            .automorphisms()
            .iter()
            .filter(|aut| preserves_decoration(aut, &self.graph, &self.decoration, &edge_index))
            .count() as u64
    }

    /// True when every half-edge of every cut edge attaches to the side its
    /// own vertex is decorated with; used by tests as a sanity predicate.
    pub fn is_admissible(&self) -> bool {
        DecoratedGraph::new(self.graph.clone(), self.decoration.clone()).is_ok()
    }
}

impl fmt::Display for DecoratedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};dec_V=[", self.graph)?;
        for (i, s) in self.decoration.vertices.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            match s {
                SideLabel::L => write!(f, "L")?,
                SideLabel::R => write!(f, "R")?,
            }
        }
        write!(f, "];dec_E=[")?;
        for (i, e) in self.decoration.edges.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            match e {
                EdgeLabel::U => write!(f, "u")?,
                EdgeLabel::C => write!(f, "c")?,
            }
        }
        write!(f, "]")
    }
}

fn preserves_decoration(
    aut: &Automorphism,
    g: &FeynmanGraph,
    dec: &Decoration,
    edge_index: &BTreeMap<(usize, usize), usize>,
) -> bool {
    for v in 0..g.n_vertices() {
        if dec.vertices[aut.vperm[v]] != dec.vertices[v] {
            return false;
        }
    }
    for (ei, &(a, b)) in g.edges().iter().enumerate() {
        let (mut ia, mut ib) = (aut.hperm[a], aut.hperm[b]);
        if ia > ib {
            std::mem::swap(&mut ia, &mut ib);
        }
        let ej = edge_index[&(ia, ib)];
        if dec.edges[ej] != dec.edges[ei] {
            return false;
        }
    }
    true
}

/// One orbit of admissible decorations under the automorphism group.
#[derive(Debug, Clone)]
pub struct DecorationOrbit {
    pub representative: Decoration,
    pub orbit_size: u64,
    pub stabilizer_order: u64,
}

/// Enumerates admissible decorations grouped into automorphism orbits,
/// sorted by representative. Orbit size times stabilizer order always equals
/// the automorphism count.
pub fn enumerate_decorations(g: &FeynmanGraph) -> Vec<DecorationOrbit> {
    let autos = g.automorphisms();
    let edges = g.edges();
    let edge_index: BTreeMap<(usize, usize), usize> =
        edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let nb = g.n_bulk();
    let nv = g.n_vertices();

    let mut all: BTreeSet<Decoration> = BTreeSet::new();
    for mask in 0u64..(1 << nb) {
        let mut vertices = Vec::with_capacity(nv);
        for v in 0..nv {
            let label = if v < nb {
                if mask >> v & 1 == 0 {
                    SideLabel::L
                } else {
                    SideLabel::R
                }
            } else if g.is_left_boundary(v) {
                SideLabel::L
            } else {
                SideLabel::R
            };
            vertices.push(label);
        }
        let forced: Vec<bool> = edges
            .iter()
            .map(|&(a, b)| vertices[g.vertex_of(a)] != vertices[g.vertex_of(b)])
            .collect();
        let free: Vec<usize> = (0..edges.len()).filter(|&i| !forced[i]).collect();
        for emask in 0u64..(1 << free.len()) {
            let mut elabels = vec![EdgeLabel::C; edges.len()];
            for (bit, &ei) in free.iter().enumerate() {
                if emask >> bit & 1 == 0 {
                    elabels[ei] = EdgeLabel::U;
                }
            }
            all.insert(Decoration {
                vertices: vertices.clone(),
                edges: elabels,
            });
        }
    }

    let mut seen: HashSet<Decoration> = HashSet::new();
    let mut orbits = Vec::new();
    for dec in &all {
        if seen.contains(dec) {
            continue;
        }
        let mut orbit: BTreeSet<Decoration> = BTreeSet::new();
        let mut stabilizer = 0u64;
        for aut in &autos {
            let image = apply_to_decoration(aut, g, dec, &edge_index);
            if image == *dec {
                stabilizer += 1;
            }
            orbit.insert(image);
        }
        for d in &orbit {
            seen.insert(d.clone());
        }
        orbits.push(DecorationOrbit {
            representative: orbit.iter().next().expect("orbit is nonempty").clone(),
            orbit_size: orbit.len() as u64,
            stabilizer_order: stabilizer,
        });
    }
    orbits
}

fn apply_to_decoration(
    aut: &Automorphism,
    g: &FeynmanGraph,
    dec: &Decoration,
    edge_index: &BTreeMap<(usize, usize), usize>,
) -> Decoration {
    let mut vertices = vec![SideLabel::L; dec.vertices.len()];
    for (v, &s) in dec.vertices.iter().enumerate() {
        vertices[aut.vperm[v]] = s;
    }
    let mut elabels = vec![EdgeLabel::U; dec.edges.len()];
    for (ei, &(a, b)) in g.edges().iter().enumerate() {
        let (mut ia, mut ib) = (aut.hperm[a], aut.hperm[b]);
        if ia > ib {
            std::mem::swap(&mut ia, &mut ib);
        }
        elabels[edge_index[&(ia, ib)]] = dec.edges[ei];
    }
    Decoration {
        vertices,
        edges: elabels,
    }
}

/// Formal sum of decorated graphs with integer multiplicities, the result
/// of the gluing product. Terms are canonical and sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GluedSum {
    pub terms: Vec<(DecoratedGraph, u64)>,
}

impl GluedSum {
    pub fn total_matchings(&self) -> u64 {
        self.terms.iter().map(|&(_, m)| m).sum()
    }
}

/// Which factor of a gluing a vertex came from.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Factor {
    Left,
    Right,
}

/// Glues two graphs along their facing boundary: sums over perfect
/// matchings of the right-boundary vertices of `gl` together with the
/// left-boundary vertices of `gr` (same-side pairs included), deleting the
/// matched legs and fusing their partner half-edges into cut edges.
///
/// `gl` must have no edge joining two of its right-boundary vertices, and
/// `gr` none joining two of its left-boundary vertices; this keeps every
/// fused partner on a surviving vertex. An odd matched-vertex count yields
/// the empty sum.
pub fn glue_graphs(gl: &FeynmanGraph, gr: &FeynmanGraph) -> Result<GluedSum> {
    for &(a, b) in &gl.edges() {
        if gl.is_right_boundary(gl.vertex_of(a)) && gl.is_right_boundary(gl.vertex_of(b)) {
            return Err(Error::domain(
                "left factor may not join two right-boundary vertices",
            ));
        }
    }
    for &(a, b) in &gr.edges() {
        if gr.is_left_boundary(gr.vertex_of(a)) && gr.is_left_boundary(gr.vertex_of(b)) {
            return Err(Error::domain(
                "right factor may not join two left-boundary vertices",
            ));
        }
    }

    // Matched legs: every right-boundary vertex of gl, every left-boundary
    // vertex of gr. Record the surviving partner half-edge of each leg.
    let mut matched: Vec<(Factor, usize)> = Vec::new();
    let gl_starts = gl.block_starts();
    for k in 0..gl.n_right {
        let v = gl.n_bulk() + gl.n_left + k;
        matched.push((Factor::Left, gl.inv[gl_starts[v]]));
    }
    let gr_starts = gr.block_starts();
    for k in 0..gr.n_left {
        let v = gr.n_bulk() + k;
        matched.push((Factor::Right, gr.inv[gr_starts[v]]));
    }
    if matched.len() % 2 != 0 {
        return Ok(GluedSum { terms: Vec::new() });
    }

    let nb_new = gl.n_bulk() + gr.n_bulk();
    let mut bulk_new: Vec<usize> = gl.bulk.clone();
    bulk_new.extend_from_slice(&gr.bulk);
    let n_left_new = gl.n_left;
    let n_right_new = gr.n_right;

    // New vertex index of a surviving old vertex.
    let map_vertex = |factor: Factor, v: usize| -> usize {
        match factor {
            Factor::Left => {
                if v < gl.n_bulk() {
                    v
                } else {
                    debug_assert!(gl.is_left_boundary(v));
                    nb_new + (v - gl.n_bulk())
                }
            }
            Factor::Right => {
                if v < gr.n_bulk() {
                    gl.n_bulk() + v
                } else {
                    debug_assert!(gr.is_right_boundary(v));
                    nb_new + n_left_new + (v - gr.n_bulk() - gr.n_left)
                }
            }
        }
    };
    let mut new_starts = Vec::with_capacity(nb_new + n_left_new + n_right_new + 1);
    let mut acc = 0;
    for v in 0..nb_new + n_left_new + n_right_new {
        new_starts.push(acc);
        acc += if v < nb_new { bulk_new[v] } else { 1 };
    }
    let map_half = |factor: Factor, h: usize| -> usize {
        let (g, starts) = match factor {
            Factor::Left => (gl, &gl_starts),
            Factor::Right => (gr, &gr_starts),
        };
        let v = g.vertex_of(h);
        new_starts[map_vertex(factor, v)] + (h - starts[v])
    };

    // Edges untouched by the matching survive with label U.
    let mut kept: Vec<(usize, usize)> = Vec::new();
    for (factor, g) in [(Factor::Left, gl), (Factor::Right, gr)] {
        let consumed = |v: usize| match factor {
            Factor::Left => g.is_right_boundary(v),
            Factor::Right => g.is_left_boundary(v),
        };
        for &(a, b) in &g.edges() {
            if !consumed(g.vertex_of(a)) && !consumed(g.vertex_of(b)) {
                kept.push((map_half(factor, a), map_half(factor, b)));
            }
        }
    }

    let mut terms: BTreeMap<DecoratedGraph, u64> = BTreeMap::new();
    for matching in perfect_matchings(matched.len()) {
        let mut pairs = kept.clone();
        let mut fused: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (i, j) in matching {
            let (fi, pi) = matched[i];
            let (fj, pj) = matched[j];
            let (mut a, mut b) = (map_half(fi, pi), map_half(fj, pj));
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            pairs.push((a, b));
            fused.insert((a, b));
        }
        let graph = FeynmanGraph::new(&bulk_new, n_left_new, n_right_new, &pairs, true)?;
        let mut vertices = Vec::with_capacity(graph.n_vertices());
        for v in 0..graph.n_vertices() {
            let label = if v < gl.n_bulk() {
                SideLabel::L
            } else if v < nb_new {
                SideLabel::R
            } else if graph.is_left_boundary(v) {
                SideLabel::L
            } else {
                SideLabel::R
            };
            vertices.push(label);
        }
        let elabels: Vec<EdgeLabel> = graph
            .edges()
            .iter()
            .map(|e| {
                if fused.contains(e) {
                    EdgeLabel::C
                } else {
                    EdgeLabel::U
                }
            })
            .collect();
        let decorated = DecoratedGraph::new(
            graph,
            Decoration {
                vertices,
                edges: elabels,
            },
        )?
        .canon();
        *terms.entry(decorated).or_insert(0) += 1;
    }
    Ok(GluedSum {
        terms: terms.into_iter().collect(),
    })
}

/// Largest deviation, over the gluing terms, of the orbit-stabilizer
/// identity `multiplicity * |Aut^dec| = |Aut(gl)| * |Aut(gr)|`; exactly zero
/// when the bookkeeping is consistent.
pub fn auto_gluing_residual(gl: &FeynmanGraph, gr: &FeynmanGraph) -> Result<u64> {
    let sum = glue_graphs(gl, gr)?;
    let product = i128::from(gl.aut_order()) * i128::from(gr.aut_order());
    let mut worst = 0i128;
    for (term, m) in &sum.terms {
        let lhs = i128::from(*m) * i128::from(term.aut_order());
        worst = worst.max((lhs - product).abs());
    }
    Ok(worst as u64)
}

/// Cuts every `C` edge of an admissible decorated graph in two, capping the
/// cut ends with fresh boundary vertices, and splits the result by side
/// decoration into a (left factor, right factor) pair. A cut end attached to
/// an `L` vertex becomes a right-boundary leg of the left factor, and one
/// attached to an `R` vertex a left-boundary leg of the right factor; gluing
/// the two factors back recovers the decorated graph among the terms.
pub fn cut_c_edges(dg: &DecoratedGraph) -> (FeynmanGraph, FeynmanGraph) {
    let g = &dg.graph;
    let dec = &dg.decoration;
    let starts = g.block_starts();
    let side_of = |v: usize| dec.vertices[v];
    let edges = g.edges();

    let cut_ends: Vec<usize> = edges
        .iter()
        .enumerate()
        .filter(|&(ei, _)| dec.edges[ei] == EdgeLabel::C)
        .flat_map(|(_, &(a, b))| [a, b])
        .collect();
    let n_cut_l = cut_ends
        .iter()
        .filter(|&&h| side_of(g.vertex_of(h)) == SideLabel::L)
        .count();
    let n_cut_r = cut_ends.len() - n_cut_l;

    // Bulk vertices keep their relative order within their factor.
    let mut bulk_l: Vec<usize> = Vec::new();
    let mut bulk_r: Vec<usize> = Vec::new();
    let mut bulk_pos: Vec<usize> = vec![usize::MAX; g.n_bulk()];
    for v in 0..g.n_bulk() {
        match side_of(v) {
            SideLabel::L => {
                bulk_pos[v] = bulk_l.len();
                bulk_l.push(g.bulk[v]);
            }
            SideLabel::R => {
                bulk_pos[v] = bulk_r.len();
                bulk_r.push(g.bulk[v]);
            }
        }
    }
    let bulk_he_l: usize = bulk_l.iter().sum::<usize>();
    let bulk_he_r: usize = bulk_r.iter().sum::<usize>();

    // Factor layouts (vertex order bulk, left boundary, right boundary):
    //   left factor:  [bulk_l] [original V_L] [cut-end legs]
    //   right factor: [bulk_r] [cut-end legs] [original V_R]
    let map_half = |h: usize| -> usize {
        let v = g.vertex_of(h);
        let start = match side_of(v) {
            SideLabel::L => {
                if v < g.n_bulk() {
                    bulk_l[..bulk_pos[v]].iter().sum::<usize>()
                } else {
                    bulk_he_l + (v - g.n_bulk())
                }
            }
            SideLabel::R => {
                if v < g.n_bulk() {
                    bulk_r[..bulk_pos[v]].iter().sum::<usize>()
                } else {
                    bulk_he_r + n_cut_r + (v - g.n_bulk() - g.n_left)
                }
            }
        };
        start + (h - starts[v])
    };

    let mut pairs_l: Vec<(usize, usize)> = Vec::new();
    let mut pairs_r: Vec<(usize, usize)> = Vec::new();
    let mut next_leg_l = bulk_he_l + g.n_left;
    let mut next_leg_r = bulk_he_r;
    for (ei, &(a, b)) in edges.iter().enumerate() {
        let (sa, sb) = (side_of(g.vertex_of(a)), side_of(g.vertex_of(b)));
        match dec.edges[ei] {
            EdgeLabel::U => {
                debug_assert_eq!(sa, sb);
                match sa {
                    SideLabel::L => pairs_l.push((map_half(a), map_half(b))),
                    SideLabel::R => pairs_r.push((map_half(a), map_half(b))),
                }
            }
            EdgeLabel::C => {
                for (h, s) in [(a, sa), (b, sb)] {
                    match s {
                        SideLabel::L => {
                            pairs_l.push((map_half(h), next_leg_l));
                            next_leg_l += 1;
                        }
                        SideLabel::R => {
                            pairs_r.push((map_half(h), next_leg_r));
                            next_leg_r += 1;
                        }
                    }
                }
            }
        }
    }
    let left = FeynmanGraph::new(&bulk_l, g.n_left, n_cut_l, &pairs_l, true)
        .expect("cut left factor is valid by construction");
    let right = FeynmanGraph::new(&bulk_r, n_cut_r, g.n_right, &pairs_r, true)
        .expect("cut right factor is valid by construction");
    (left, right)
}

/// Enumerates one canonical representative per isomorphism class of graphs
/// with at most `max_half_edges` half-edges, bulk valences drawn from
/// `allowed_valences`, and exactly `n_left`/`n_right` boundary legs.
/// `allow_short_loops = false` drops classes containing a short loop. The
/// completely empty graph is never listed.
pub fn enumerate_graphs(
    max_half_edges: usize,
    allowed_valences: &[usize],
    n_left: usize,
    n_right: usize,
    allow_short_loops: bool,
) -> Result<Vec<FeynmanGraph>> {
    if max_half_edges > MAX_HALF_EDGES {
        return Err(Error::unsupported(
            "enumeration is exhaustive and capped at 16 half-edges",
        ));
    }
    if allowed_valences.is_empty() || allowed_valences.contains(&0) {
        return Err(Error::domain("allowed valences must be positive"));
    }
    if n_left + n_right > max_half_edges {
        return Err(Error::domain("boundary legs alone exceed the half-edge cap"));
    }
    let low = allowed_valences.iter().any(|&v| v < 3);
    let mut vals: Vec<usize> = allowed_valences.to_vec();
    vals.sort_unstable();
    vals.dedup();

    let mut shapes: Vec<Vec<usize>> = Vec::new();
    let mut stack: Vec<(Vec<usize>, usize)> = vec![(Vec::new(), 0)];
    while let Some((shape, total)) = stack.pop() {
        if !shape.is_empty() || n_left + n_right > 0 {
            shapes.push(shape.clone());
        }
        for &v in &vals {
            // Non-decreasing valence sequences enumerate multisets once.
            if shape.last().map(|&last| v >= last).unwrap_or(true)
                && total + v + n_left + n_right <= max_half_edges
            {
                let mut next = shape.clone();
                next.push(v);
                stack.push((next, total + v));
            }
        }
    }

    let mut classes: HashSet<FeynmanGraph> = HashSet::new();
    for shape in shapes {
        let n_half = shape.iter().sum::<usize>() + n_left + n_right;
        if n_half % 2 != 0 || n_half == 0 {
            continue;
        }
        for pairing in perfect_matchings(n_half) {
            let g = FeynmanGraph::new(&shape, n_left, n_right, &pairing, low)?;
            if !allow_short_loops && g.has_short_loop() {
                continue;
            }
            classes.insert(g.canon());
        }
    }
    let mut out: Vec<FeynmanGraph> = classes.into_iter().collect();
    out.sort();
    Ok(out)
}
