//! The bipartite graph of identity cells, its spanning tree, and the
//! edge-colouring closure: a red edge turns blue once the other three edges
//! of some square through it are blue.

use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;

use serde::Serialize;

use crate::dsu::Dsu;
use crate::enumeration::{hasse_parent, Enumeration};
use crate::error::{Error, Result};
use crate::matspace::{scattered_identity, scattered_identity_sets, Mat, SubsetR};
use crate::tables::{ProductTable, ZeroPolicy};

/// An edge `(X, Y)` of the graph, by ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Edge {
    pub x: u32,
    pub y: u32,
}

impl Edge {
    pub fn new(x: usize, y: usize) -> Self {
        Edge { x: x as u32, y: y as u32 }
    }
}

/// Edges are the cells of `P_r` equal to `I_r`.
#[derive(Debug, Clone)]
pub struct DeltaGraph {
    nx: usize,
    ny: usize,
    /// Sorted by `(y, x)`; the position is the edge id.
    edges: Vec<Edge>,
    y_ptr: Vec<u32>,
    x_ptr: Vec<u32>,
    /// For each x, the ids of its edges ordered by y.
    x_edges: Vec<u32>,
}

impl DeltaGraph {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> Edge {
        self.edges[id]
    }

    pub fn x_neighbors(&self, y: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges[self.y_ptr[y] as usize..self.y_ptr[y + 1] as usize]
            .iter()
            .map(|e| e.x as usize)
    }

    pub fn y_neighbors(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        self.x_edges[self.x_ptr[x] as usize..self.x_ptr[x + 1] as usize]
            .iter()
            .map(|&id| self.edges[id as usize].y as usize)
    }

    pub fn degree_x(&self, x: usize) -> usize {
        (self.x_ptr[x + 1] - self.x_ptr[x]) as usize
    }

    pub fn degree_y(&self, y: usize) -> usize {
        (self.y_ptr[y + 1] - self.y_ptr[y]) as usize
    }

    pub fn edge_id(&self, x: usize, y: usize) -> Option<usize> {
        if x >= self.nx || y >= self.ny {
            return None;
        }
        let lo = self.y_ptr[y] as usize;
        self.edges[lo..self.y_ptr[y + 1] as usize]
            .binary_search_by_key(&(x as u32), |e| e.x)
            .ok()
            .map(|i| lo + i)
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.edge_id(x, y).is_some()
    }
}

pub fn build_delta(p: &ProductTable) -> Result<DeltaGraph> {
    if p.policy() != ZeroPolicy::ZeroIfSingular {
        return Err(Error::param("the identity graph is built from the Rees table"));
    }
    let (ny, nx) = (p.rows(), p.cols());
    let mut edges = Vec::new();
    let mut y_ptr = vec![0u32; ny + 1];
    if let Some(id) = p.identity_vid() {
        for y in 0..ny {
            for x in 0..nx {
                if p.cell(y, x) == id {
                    edges.push(Edge::new(x, y));
                }
            }
            y_ptr[y + 1] = edges.len() as u32;
        }
    }
    let mut x_ptr = vec![0u32; nx + 1];
    for e in &edges {
        x_ptr[e.x as usize + 1] += 1;
    }
    for i in 0..nx {
        x_ptr[i + 1] += x_ptr[i];
    }
    let mut fill = x_ptr.clone();
    let mut x_edges = vec![0u32; edges.len()];
    for (id, e) in edges.iter().enumerate() {
        x_edges[fill[e.x as usize] as usize] = id as u32;
        fill[e.x as usize] += 1;
    }
    Ok(DeltaGraph {
        nx,
        ny,
        edges,
        y_ptr,
        x_ptr,
        x_edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TreeTag {
    T1,
    T2,
    /// The diagonal edge `(I(S)^T, I(S))`, which is both T1 and T2.
    T1T2,
    T3,
}

impl TreeTag {
    pub fn label(self) -> &'static str {
        match self {
            TreeTag::T1 => "T1",
            TreeTag::T2 => "T2",
            TreeTag::T1T2 => "T1,T2",
            TreeTag::T3 => "T3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TreeEdge {
    pub edge: Edge,
    pub tag: TreeTag,
}

#[derive(Debug, Clone)]
pub struct SpanningTree {
    pub edges: Vec<TreeEdge>,
}

impl SpanningTree {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Checks the tree shape over all `|X_r| + |Y_r|` vertices and that
    /// every edge lies in the graph.
    pub fn validate(&self, delta: &DeltaGraph) -> Result<()> {
        let (nx, ny) = (delta.nx(), delta.ny());
        if self.edges.len() + 1 != nx + ny {
            return Err(Error::verification(format!(
                "spanning tree has {} edges, expected {}",
                self.edges.len(),
                nx + ny - 1
            )));
        }
        let mut dsu = Dsu::new(nx + ny);
        for te in &self.edges {
            let Edge { x, y } = te.edge;
            if !delta.contains(x as usize, y as usize) {
                return Err(Error::verification(format!(
                    "tree edge ({x}, {y}) is not an identity cell"
                )));
            }
            if !dsu.union(x as usize, nx + y as usize) {
                return Err(Error::verification(format!("tree edge ({x}, {y}) closes a cycle")));
            }
        }
        if dsu.sets() != 1 {
            return Err(Error::verification("spanning tree is disconnected"));
        }
        Ok(())
    }
}

fn expect_id(id: Option<usize>, what: &str, m: &Mat) -> Result<usize> {
    id.ok_or_else(|| Error::verification(format!("{what} {m:?} is not an enumerated label")))
}

/// Edges T1 `(I(S)^T, Y)`, T2 `(X, I(S))` for every region `S`, and one T3
/// edge `(I(S)^T, I(i_1|..|i_j - 1, i_j|..|i_r))` from each non-root
/// region to its tree parent.
pub fn build_spanning_tree(en: &Enumeration, delta: &DeltaGraph) -> Result<SpanningTree> {
    let tree = SpanningTree { edges: tree_edges(en)? };
    tree.validate(delta)?;
    Ok(tree)
}

/// The T1/T2/T3 edges from the labels alone, each checked to multiply to
/// the identity.
pub fn tree_edges(en: &Enumeration) -> Result<Vec<TreeEdge>> {
    let (n, field) = (en.n(), en.field());
    let mut edges = Vec::with_capacity(2 * en.len());
    for region in en.regions() {
        let s = &region.subset;
        let ys = scattered_identity(field, n, s)?;
        let diag_y = expect_id(en.y_id(&ys), "scattered identity", &ys)?;
        let diag_x = expect_id(en.x_id(&ys.transpose()), "scattered identity", &ys)?;
        for id in region.ids.clone() {
            if id == diag_y {
                edges.push(TreeEdge {
                    edge: Edge::new(diag_x, diag_y),
                    tag: TreeTag::T1T2,
                });
            } else {
                edges.push(TreeEdge {
                    edge: Edge::new(diag_x, id),
                    tag: TreeTag::T1,
                });
                edges.push(TreeEdge {
                    edge: Edge::new(id, diag_y),
                    tag: TreeTag::T2,
                });
            }
        }
        if *s != SubsetR::initial(s.len()) {
            let j = s
                .indices()
                .iter()
                .enumerate()
                .position(|(k, &a)| a != k + 1)
                .expect("non-root subset");
            let sets: Vec<Vec<usize>> = s
                .indices()
                .iter()
                .enumerate()
                .map(|(k, &a)| if k == j { vec![a - 1, a] } else { vec![a] })
                .collect();
            let target = scattered_identity_sets(field, n, &sets)?;
            let ty = expect_id(en.y_id(&target), "T3 target", &target)?;
            debug_assert_eq!(en.y(ty).region, &hasse_parent(s)?);
            edges.push(TreeEdge {
                edge: Edge::new(diag_x, ty),
                tag: TreeTag::T3,
            });
        }
    }
    for te in &edges {
        let Edge { x, y } = te.edge;
        let prod = en.y_mats()[y as usize].matmul(&en.x_mats()[x as usize])?;
        if prod != Mat::identity(field, en.r()) {
            return Err(Error::verification(format!(
                "{} edge ({x}, {y}) multiplies to {prod:?}",
                te.tag.label()
            )));
        }
    }
    Ok(edges)
}

/// One closure step: `new` turned blue because the square with opposite
/// corner `via` had its other three edges blue: `(new.x, via.y)`,
/// `(via.x, new.y)` and `via`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub new: Edge,
    pub via: Edge,
}

impl TraceStep {
    pub fn cited(&self) -> [Edge; 3] {
        [
            Edge { x: self.new.x, y: self.via.y },
            Edge { x: self.via.x, y: self.new.y },
            self.via,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorklistOrder {
    Fifo,
    Lifo,
}

#[derive(Debug, Clone)]
pub struct ColorState {
    blue: Vec<u64>,
    blue_count: usize,
    pub trace: Vec<TraceStep>,
}

impl ColorState {
    pub fn is_blue(&self, edge_id: usize) -> bool {
        self.blue[edge_id / 64] >> (edge_id % 64) & 1 == 1
    }

    pub fn blue_count(&self) -> usize {
        self.blue_count
    }

    pub fn blue_bits(&self) -> &[u64] {
        &self.blue
    }

    pub fn all_blue(&self, delta: &DeltaGraph) -> bool {
        self.blue_count == delta.edge_count()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosureSummary {
    pub edges: usize,
    pub tree_edges: usize,
    pub blued: usize,
    pub all_blue: bool,
    pub steps: usize,
}

impl ClosureSummary {
    pub fn new(delta: &DeltaGraph, tree: &SpanningTree, state: &ColorState) -> Self {
        ClosureSummary {
            edges: delta.edge_count(),
            tree_edges: tree.len(),
            blued: state.blue_count(),
            all_blue: state.all_blue(delta),
            steps: state.trace.len(),
        }
    }
}

struct BitRows {
    words: usize,
    bits: Vec<u64>,
}

impl BitRows {
    fn new(rows: usize, width: usize) -> Self {
        let words = width.div_ceil(64).max(1);
        BitRows {
            words,
            bits: vec![0; rows * words],
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }
}

fn first_common(a: &[u64], b: &[u64]) -> Option<usize> {
    a.iter()
        .zip(b)
        .enumerate()
        .find_map(|(w, (x, y))| {
            let m = x & y;
            (m != 0).then(|| w * 64 + m.trailing_zeros() as usize)
        })
}

fn for_each_bit(words: impl Iterator<Item = u64>, mut f: impl FnMut(usize)) {
    for (w, mut m) in words.enumerate() {
        while m != 0 {
            let b = m.trailing_zeros() as usize;
            f(w * 64 + b);
            m &= m - 1;
        }
    }
}

struct Closure<'a> {
    delta: &'a DeltaGraph,
    // adjacency and blue sets, indexed from both sides
    dx: BitRows,
    dy: BitRows,
    bx: BitRows,
    by: BitRows,
    state: ColorState,
    work: VecDeque<Edge>,
    order: WorklistOrder,
}

impl<'a> Closure<'a> {
    fn new(delta: &'a DeltaGraph, order: WorklistOrder) -> Self {
        let (nx, ny) = (delta.nx(), delta.ny());
        let mut dx = BitRows::new(nx, ny);
        let mut dy = BitRows::new(ny, nx);
        for e in delta.edges() {
            dx.set(e.x as usize, e.y as usize);
            dy.set(e.y as usize, e.x as usize);
        }
        Closure {
            delta,
            dx,
            dy,
            bx: BitRows::new(nx, ny),
            by: BitRows::new(ny, nx),
            state: ColorState {
                blue: vec![0; delta.edge_count().div_ceil(64).max(1)],
                blue_count: 0,
                trace: Vec::new(),
            },
            work: VecDeque::new(),
            order,
        }
    }

    fn paint(&mut self, e: Edge, witness: Option<Edge>) {
        let (x, y) = (e.x as usize, e.y as usize);
        if self.bx.get(x, y) {
            return;
        }
        self.bx.set(x, y);
        self.by.set(y, x);
        let id = self.delta.edge_id(x, y).expect("painted edge lies in the graph");
        self.state.blue[id / 64] |= 1 << (id % 64);
        self.state.blue_count += 1;
        if let Some(via) = witness {
            self.state.trace.push(TraceStep { new: e, via });
        }
        self.work.push_back(e);
    }

    fn next(&mut self) -> Option<Edge> {
        match self.order {
            WorklistOrder::Fifo => self.work.pop_front(),
            WorklistOrder::Lifo => self.work.pop_back(),
        }
    }

    /// Every square through a newly blue edge `(x, y)` with exactly one red edge.
    fn process(&mut self, e: Edge) {
        let (x, y) = (e.x as usize, e.y as usize);
        let mut found: Vec<(Edge, Edge)> = Vec::new();

        // red edge opposite (x, y)
        let xs: Vec<usize> = {
            let mut v = Vec::new();
            for_each_bit(self.by.row(y).iter().copied(), |x2| v.push(x2));
            v
        };
        for &x2 in &xs {
            let cand = self
                .bx
                .row(x)
                .iter()
                .zip(self.dx.row(x2))
                .zip(self.bx.row(x2))
                .map(|((b, d), b2)| b & d & !b2);
            for_each_bit(cand, |y2| found.push((Edge::new(x2, y2), e)));
        }

        // red edge (x, y2) next to it: needs x2 blue to both y and y2
        let red_y: Vec<usize> = {
            let mut v = Vec::new();
            let words = self.dx.row(x).iter().zip(self.bx.row(x)).map(|(d, b)| d & !b);
            for_each_bit(words, |y2| v.push(y2));
            v
        };
        for y2 in red_y {
            if let Some(x2) = first_common(self.by.row(y), self.by.row(y2)) {
                found.push((Edge::new(x, y2), Edge::new(x2, y)));
            }
        }

        // red edge (x2, y): needs y2 blue to both x and x2
        let red_x: Vec<usize> = {
            let mut v = Vec::new();
            let words = self.dy.row(y).iter().zip(self.by.row(y)).map(|(d, b)| d & !b);
            for_each_bit(words, |x2| v.push(x2));
            v
        };
        for x2 in red_x {
            if let Some(y2) = first_common(self.bx.row(x), self.bx.row(x2)) {
                found.push((Edge::new(x2, y), Edge::new(x, y2)));
            }
        }

        for (new, via) in found {
            self.paint(new, Some(via));
        }
    }
}

/// Run the closure to its fixed point from the tree edges. The result is
/// the least fixed point, so the final blue set does not depend on `order`.
pub fn color_closure_with(delta: &DeltaGraph, tree: &SpanningTree, order: WorklistOrder) -> ColorState {
    let mut c = Closure::new(delta, order);
    for te in &tree.edges {
        c.paint(te.edge, None);
    }
    while let Some(e) = c.next() {
        c.process(e);
    }
    c.state
}

pub fn color_closure(delta: &DeltaGraph, tree: &SpanningTree) -> ColorState {
    color_closure_with(delta, tree, WorklistOrder::Fifo)
}

/// True when closure must reach every edge: `1 <= r < n - 1`.
pub fn closure_hypothesis(n: usize, r: usize) -> bool {
    r >= 1 && r + 1 < n
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayOutcome {
    Valid { blue: usize },
    /// First failing step and the reason.
    Invalid { step: usize, reason: String },
}

impl ReplayOutcome {
    pub fn is_valid(&self) -> bool {
        matches!(self, ReplayOutcome::Valid { .. })
    }
}

/// Independent replay of a closure trace: starting from the tree, each step
/// must cite three blue edges forming a square of identity cells with the
/// new edge.
pub fn replay_trace(p: &ProductTable, tree: &SpanningTree, trace: &[TraceStep]) -> ReplayOutcome {
    let Some(id) = p.identity_vid() else {
        return ReplayOutcome::Invalid {
            step: 0,
            reason: "table has no identity cells".into(),
        };
    };
    let is_identity = |e: Edge| {
        (e.y as usize) < p.rows() && (e.x as usize) < p.cols() && p.cell(e.y as usize, e.x as usize) == id
    };
    let mut blue: HashSet<Edge> = HashSet::with_capacity(tree.len() + trace.len());
    for te in &tree.edges {
        if !is_identity(te.edge) {
            return ReplayOutcome::Invalid {
                step: 0,
                reason: format!("tree edge {:?} is not an identity cell", te.edge),
            };
        }
        blue.insert(te.edge);
    }
    for (i, step) in trace.iter().enumerate() {
        if step.new.x == step.via.x || step.new.y == step.via.y {
            return ReplayOutcome::Invalid {
                step: i,
                reason: "degenerate square".into(),
            };
        }
        if !is_identity(step.new) {
            return ReplayOutcome::Invalid {
                step: i,
                reason: format!("{:?} is not an identity cell", step.new),
            };
        }
        for c in step.cited() {
            if !is_identity(c) {
                return ReplayOutcome::Invalid {
                    step: i,
                    reason: format!("cited {c:?} is not an identity cell"),
                };
            }
            if !blue.contains(&c) {
                return ReplayOutcome::Invalid {
                    step: i,
                    reason: format!("cited {c:?} is not blue yet"),
                };
            }
        }
        blue.insert(step.new);
    }
    ReplayOutcome::Valid { blue: blue.len() }
}

/// Graphviz rendering. Tree edges carry a `tree` tag; T3 edges are bold,
/// T2 dashed, T1 solid, and edges outside the tree dotted gray.
pub fn to_dot(en: &Enumeration, delta: &DeltaGraph, tree: &SpanningTree) -> String {
    let mut tags = std::collections::HashMap::new();
    for te in &tree.edges {
        tags.insert(te.edge, te.tag);
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        "graph delta {{\n  // n={} r={} q={}\n  node [shape=point];",
        en.n(),
        en.r(),
        en.field().q()
    );
    for region in en.regions() {
        let name = region.subset.indices().iter().map(|i| i.to_string()).collect::<Vec<_>>().join("");
        let _ = writeln!(s, "  subgraph cluster_x{name} {{ label=\"X {}\";", region.subset);
        for id in region.ids.clone() {
            let _ = writeln!(s, "    x{id};");
        }
        let _ = writeln!(s, "  }}");
        let _ = writeln!(s, "  subgraph cluster_y{name} {{ label=\"Y {}\";", region.subset);
        for id in region.ids.clone() {
            let _ = writeln!(s, "    y{id};");
        }
        let _ = writeln!(s, "  }}");
    }
    for e in delta.edges() {
        match tags.get(e) {
            Some(tag) => {
                let style = match tag {
                    TreeTag::T3 => "bold\", penwidth=\"3",
                    TreeTag::T2 => "dashed",
                    TreeTag::T1 | TreeTag::T1T2 => "solid",
                };
                let _ = writeln!(s, "  x{} -- y{} [style=\"{style}\", tree=\"{}\"];", e.x, e.y, tag.label());
            }
            None => {
                let _ = writeln!(s, "  x{} -- y{} [style=\"dotted\", color=\"gray\"];", e.x, e.y);
            }
        }
    }
    s.push_str("}\n");
    s
}
