//! The maximal-subgroup presentation at a rank-`r` idempotent and the
//! staged certificate that collapses it to `GL_r(F_q)`.
//!
//! Generators are the nonzero cells `f_{X,Y}` of the Rees table. Relations
//! are `f = 1` on spanning-tree cells and
//! `f_{X,Y}^{-1} f_{X,Y'} = f_{X',Y}^{-1} f_{X',Y'}` for every singular
//! square. Under `f_{X,Y} -> (YX)^{-1}` the square relation is exactly the
//! singularity criterion, so every relation used here is checked that way.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::connectivity::{check_strong_connectivity, StrongComponents, StrongEdge, StrongPath, StrongReport, Witness};
use crate::counts::{gaussian_binomial, gl_order, idempotent_count};
use crate::deltagraph::{
    build_delta, build_spanning_tree, color_closure, ColorState, DeltaGraph,
    SpanningTree, TraceStep,
};
use crate::dsu::Dsu;
use crate::enumeration::{enumerate_y, Enumeration};
use crate::error::{Error, Result};
use crate::gf::Field;
use crate::matspace::Mat;
use crate::squares::{general_linear_group, is_singular, is_singular_from_labels, stage3_square, SingularSquare};
use crate::tables::{build_p, build_t_full, ProductTable, TableKind, Vid};
use crate::textfmt::{self, EdgeBlock, GenLine, PresentationFile, Relation};

/// Generators and unit relations of the presentation.
#[derive(Debug, Clone)]
pub struct Presentation {
    n: usize,
    r: usize,
    q: u32,
    row_ptr: Vec<u32>,
    gen_cols: Vec<u32>,
    tree: Vec<u32>,
}

impl Presentation {
    pub fn params(&self) -> (usize, usize, u32) {
        (self.n, self.r, self.q)
    }

    pub fn generator_count(&self) -> usize {
        self.gen_cols.len()
    }

    /// Generator id of the nonzero cell `(row, col)`.
    pub fn gen_id(&self, row: usize, col: usize) -> Option<u32> {
        let (lo, hi) = (*self.row_ptr.get(row)? as usize, self.row_ptr[row + 1] as usize);
        self.gen_cols[lo..hi]
            .binary_search(&(col as u32))
            .ok()
            .map(|i| (lo + i) as u32)
    }

    /// `(row, col)` of a generator.
    pub fn generator(&self, id: u32) -> (u32, u32) {
        let row = self.row_ptr.partition_point(|&p| p <= id) - 1;
        (row as u32, self.gen_cols[id as usize])
    }

    /// Generators set to 1 by the spanning tree.
    pub fn tree_relations(&self) -> &[u32] {
        &self.tree
    }

    fn require(&self, row: u32, col: u32) -> Result<u32> {
        self.gen_id(row as usize, col as usize)
            .ok_or_else(|| Error::verification(format!("cell ({row}, {col}) is not a generator")))
    }
}

pub fn build_presentation(p: &ProductTable, tree: &SpanningTree) -> Result<Presentation> {
    let TableKind::Rees { n, r } = p.kind() else {
        return Err(Error::param("the presentation is read off the Rees table"));
    };
    let mut row_ptr = Vec::with_capacity(p.rows() + 1);
    let mut gen_cols = Vec::new();
    row_ptr.push(0u32);
    for row in 0..p.rows() {
        for col in 0..p.cols() {
            if !p.is_zero_marker(p.cell(row, col)) {
                gen_cols.push(col as u32);
            }
        }
        row_ptr.push(gen_cols.len() as u32);
    }
    let mut pres = Presentation {
        n,
        r,
        q: p.field().q(),
        row_ptr,
        gen_cols,
        tree: Vec::with_capacity(tree.len()),
    };
    for te in &tree.edges {
        let id = pres.require(te.edge.y, te.edge.x)?;
        pres.tree.push(id);
    }
    Ok(pres)
}

/// Union-find over generators plus one node standing for 1.
#[derive(Debug, Clone)]
pub struct ClassMap {
    dsu: Dsu,
    unit: usize,
    stage: u8,
    class_of_gen: Vec<u32>,
    class_values: Vec<Mat>,
    class_by_value: HashMap<Mat, u32>,
}

impl ClassMap {
    pub fn new(pres: &Presentation) -> Self {
        let g = pres.generator_count();
        ClassMap {
            dsu: Dsu::new(g + 1),
            unit: g,
            stage: 0,
            class_of_gen: Vec::new(),
            class_values: Vec::new(),
            class_by_value: HashMap::new(),
        }
    }

    /// Last completed stage, 0 before Stage 1.
    pub fn stage(&self) -> u8 {
        self.stage
    }

    pub fn is_unit(&mut self, gen: u32) -> bool {
        let unit = self.unit;
        self.dsu.same(gen as usize, unit)
    }

    pub fn same(&mut self, a: u32, b: u32) -> bool {
        self.dsu.same(a as usize, b as usize)
    }

    /// Distinct classes among generators.
    pub fn class_count(&mut self) -> usize {
        let mut roots = BTreeSet::new();
        for g in 0..self.unit {
            roots.insert(self.dsu.find(g));
        }
        roots.len()
    }

    /// Dense class labels per generator, available after Stage 2.
    pub fn labels(&self) -> &[u32] {
        &self.class_of_gen
    }

    /// Value of each class, in label order, available after Stage 2.
    pub fn class_values(&self) -> &[Mat] {
        &self.class_values
    }

    pub fn class_of_value(&self, value: &Mat) -> Option<u32> {
        self.class_by_value.get(value).copied()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Stage1Evidence {
    #[serde(skip)]
    pub trace: Vec<TraceStep>,
    pub steps: usize,
    pub identity_cells: usize,
}

/// Every identity cell becomes 1: tree cells directly, the rest through
/// the closure trace, each step a square whose other three cells are 1.
pub fn run_stage1(
    pres: &Presentation,
    cm: &mut ClassMap,
    delta: &DeltaGraph,
    state: &ColorState,
) -> Result<Stage1Evidence> {
    if !state.all_blue(delta) {
        return Err(Error::verification(format!(
            "closure reached {} of {} identity cells",
            state.blue_count(),
            delta.edge_count()
        )));
    }
    let unit = cm.unit;
    for &g in pres.tree_relations() {
        cm.dsu.union(g as usize, unit);
    }
    for (i, step) in state.trace.iter().enumerate() {
        for c in step.cited() {
            let g = pres.require(c.y, c.x)?;
            if !cm.is_unit(g) {
                return Err(Error::verification(format!("trace step {i} cites ({}, {}) before it is 1", c.x, c.y)));
            }
        }
        let g = pres.require(step.new.y, step.new.x)?;
        cm.dsu.union(g as usize, unit);
    }
    let identity_cells = cm.dsu.set_size(unit) - 1;
    if identity_cells != delta.edge_count() {
        return Err(Error::verification(format!(
            "identity class has {identity_cells} generators, expected {}",
            delta.edge_count()
        )));
    }
    cm.stage = cm.stage.max(1);
    Ok(Stage1Evidence {
        trace: state.trace.clone(),
        steps: state.trace.len(),
        identity_cells,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Stage2Value {
    #[serde(serialize_with = "ser_mat")]
    pub value: Mat,
    pub cells: usize,
    /// One cell of this value, so single-cell values are still cited.
    pub anchor: (u32, u32),
    #[serde(skip)]
    pub edges: Vec<StrongEdge>,
    pub edge_count: usize,
    /// Path from the first to the last occurrence.
    pub sample_path: Option<StrongPath>,
}

fn ser_mat<S: serde::Serializer>(m: &Mat, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&m.to_text())
}

#[derive(Debug, Clone, Serialize)]
pub struct Stage2Evidence {
    pub values: Vec<Stage2Value>,
    pub classes: usize,
}

/// The square behind a strong edge: the edge's two cells and the two
/// identity cells of its witness.
pub fn edge_square(e: &StrongEdge) -> SingularSquare {
    match e.witness {
        Witness::Row(y1) => SingularSquare {
            x: e.a.1,
            x2: e.b.1,
            y: e.a.0,
            y2: y1,
        },
        Witness::Col(x1) => SingularSquare {
            x: e.a.1,
            x2: x1,
            y: e.a.0,
            y2: e.b.0,
        },
    }
}

/// Joins equal-valued generators along strong forests. `strong` holds the
/// components of `source`, which may be the full product table; each edge
/// used for a rank-`r` value is re-checked against `p`.
pub fn run_stage2(
    pres: &Presentation,
    cm: &mut ClassMap,
    p: &ProductTable,
    source: &ProductTable,
    strong: &[Option<StrongComponents>],
) -> Result<Stage2Evidence> {
    if cm.stage < 1 {
        return Err(Error::verification("stage 2 needs stage 1"));
    }
    let r = pres.r;
    let identity = Mat::identity(p.field(), r);
    let mut values = Vec::new();
    let mut covered = vec![false; p.value_count()];
    for sc in strong.iter().flatten() {
        let value = source.value(sc.vid);
        if source.is_zero_marker(sc.vid) || value.rank() < r || *value == identity {
            continue;
        }
        let pv = p
            .vid_of(value)
            .ok_or_else(|| Error::verification(format!("{} occurs in the full table only", value.to_text())))?;
        let occ = p.occurrences(pv);
        if occ.len() != sc.labels.len() {
            return Err(Error::verification(format!(
                "{} has {} cells in the Rees table but {} in the full table",
                value.to_text(),
                occ.len(),
                sc.labels.len()
            )));
        }
        if sc.count != 1 {
            return Err(Error::verification(format!(
                "{} splits into {} strong components",
                value.to_text(),
                sc.count
            )));
        }
        for e in &sc.forest {
            crate::connectivity::verify_strong_edge(p, e)
                .map_err(|why| Error::verification(format!("{}: {why}", value.to_text())))?;
            for (row, col) in e.witness_cells() {
                let g = pres.require(row, col)?;
                if !cm.is_unit(g) {
                    return Err(Error::verification(format!("witness ({row}, {col}) is not 1")));
                }
            }
            let (a, b) = (pres.require(e.a.0, e.a.1)?, pres.require(e.b.0, e.b.1)?);
            cm.dsu.union(a as usize, b as usize);
        }
        covered[pv as usize] = true;
        let (first, last) = (occ.cells[0], occ.cells[occ.len() - 1]);
        values.push(Stage2Value {
            value: value.clone(),
            cells: occ.len(),
            anchor: first,
            edge_count: sc.forest.len(),
            sample_path: sc.path(source, first, last),
            edges: sc.forest.clone(),
        });
    }
    let id_vid = p.identity_vid();
    for vid in 0..p.value_count() as Vid {
        if !p.is_zero_marker(vid) && Some(vid) != id_vid && !covered[vid as usize] {
            return Err(Error::verification(format!(
                "no strong forest for {}",
                p.value(vid).to_text()
            )));
        }
    }
    label_classes(pres, cm, p)?;
    cm.stage = cm.stage.max(2);
    Ok(Stage2Evidence {
        classes: cm.class_values.len(),
        values,
    })
}

fn label_classes(pres: &Presentation, cm: &mut ClassMap, p: &ProductTable) -> Result<()> {
    let mut label_of_root: HashMap<usize, u32> = HashMap::new();
    let mut class_values: Vec<Mat> = Vec::new();
    let mut class_of_gen = Vec::with_capacity(pres.generator_count());
    for g in 0..pres.generator_count() as u32 {
        let (row, col) = pres.generator(g);
        let value = p.value(p.cell(row as usize, col as usize));
        let root = cm.dsu.find(g as usize);
        let label = *label_of_root.entry(root).or_insert_with(|| {
            class_values.push(value.clone());
            class_values.len() as u32 - 1
        });
        if class_values[label as usize] != *value {
            return Err(Error::verification(format!(
                "class of {} also holds {}",
                class_values[label as usize].to_text(),
                value.to_text()
            )));
        }
        class_of_gen.push(label);
    }
    let mut class_by_value = HashMap::new();
    for (i, v) in class_values.iter().enumerate() {
        if class_by_value.insert(v.clone(), i as u32).is_some() {
            return Err(Error::verification(format!("{} spans several classes", v.to_text())));
        }
    }
    cm.class_of_gen = class_of_gen;
    cm.class_values = class_values;
    cm.class_by_value = class_by_value;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Stage3Entry {
    #[serde(serialize_with = "ser_mat")]
    pub a: Mat,
    #[serde(serialize_with = "ser_mat")]
    pub b: Mat,
    #[serde(serialize_with = "ser_mat")]
    pub ab: Mat,
    pub square: SingularSquare,
}

/// For every `(A, B)` the square with cells `A, AB, I, B` exists, is
/// singular, and its cells lie in the classes of those values, giving
/// `f_B f_A = f_{AB}`.
pub fn run_stage3(pres: &Presentation, cm: &mut ClassMap, p: &ProductTable, en: &Enumeration) -> Result<Vec<Stage3Entry>> {
    if cm.stage < 2 {
        return Err(Error::verification("stage 3 needs stage 2"));
    }
    let (n, r) = (pres.n, pres.r);
    let gl = general_linear_group(p.field(), r)?;
    let identity = Mat::identity(p.field(), r);
    let mut out = Vec::with_capacity(gl.len() * gl.len());
    for a in &gl {
        for b in &gl {
            let s3 = stage3_square(a, b, n)?;
            let sq = s3.locate(en)?;
            if !is_singular(p, sq)? {
                return Err(Error::verification(format!("square for ({}, {}) is not singular", a.to_text(), b.to_text())));
            }
            let expect = [a, &identity, &s3.ab, b];
            for ((row, col), want) in sq.cells().into_iter().zip(expect) {
                let g = pres.require(row as u32, col as u32)? as usize;
                let class = cm.class_of_gen[g];
                if cm.class_of_value(want) != Some(class) {
                    return Err(Error::verification(format!(
                        "cell ({row}, {col}) lies in the class of {}, expected {}",
                        cm.class_values[class as usize].to_text(),
                        want.to_text()
                    )));
                }
            }
            out.push(Stage3Entry {
                a: a.clone(),
                b: b.clone(),
                ab: s3.ab,
                square: sq,
            });
        }
    }
    cm.stage = 3;
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct SoundnessReport {
    pub tree_relations: usize,
    pub stage1_squares: usize,
    pub stage2_squares: usize,
    pub stage3_squares: usize,
    pub classes: usize,
    pub group_order: String,
    pub classes_are_group: bool,
    pub multiplication_closed: bool,
    pub certified: bool,
}

#[derive(Debug, Clone)]
pub struct CertificateChain {
    pub n: usize,
    pub r: usize,
    pub field: Field,
    pub generators: usize,
    pub tree_relations: usize,
    pub stage1: Stage1Evidence,
    pub stage2: Stage2Evidence,
    pub stage3: Vec<Stage3Entry>,
    pub class_values: Vec<Mat>,
    pub soundness: Option<SoundnessReport>,
}

impl CertificateChain {
    /// Number of squares cited by the three stages.
    pub fn cited_square_count(&self) -> usize {
        self.stage1.trace.len() + self.stage2.values.iter().map(|v| v.edges.len()).sum::<usize>() + self.stage3.len()
    }

    /// The `i`-th cited square in stage order.
    pub fn cited_square(&self, mut i: usize) -> Option<SingularSquare> {
        if let Some(st) = self.stage1.trace.get(i) {
            return Some(trace_square(st));
        }
        i -= self.stage1.trace.len();
        for v in &self.stage2.values {
            if let Some(e) = v.edges.get(i) {
                return Some(edge_square(e));
            }
            i -= v.edges.len();
        }
        self.stage3.get(i).map(|e| e.square)
    }

    pub fn cited_squares(&self) -> impl Iterator<Item = SingularSquare> + '_ {
        self.stage1
            .trace
            .iter()
            .map(trace_square)
            .chain(self.stage2.values.iter().flat_map(|v| v.edges.iter().map(edge_square)))
            .chain(self.stage3.iter().map(|e| e.square))
    }
}

pub fn trace_square(st: &TraceStep) -> SingularSquare {
    SingularSquare {
        x: st.new.x,
        x2: st.via.x,
        y: st.new.y,
        y2: st.via.y,
    }
}

/// Re-evaluates every used relation under `f_{X,Y} -> (YX)^{-1}` from the
/// label matrices alone.
pub fn check_soundness(en: &Enumeration, pres: &Presentation, chain: &CertificateChain) -> Result<SoundnessReport> {
    let identity = Mat::identity(en.field(), chain.r);
    for &g in pres.tree_relations() {
        let (y, x) = pres.generator(g);
        let prod = en.y_mats()[y as usize].matmul(&en.x_mats()[x as usize])?;
        if prod != identity {
            return Err(Error::verification(format!("tree relation at ({x}, {y}) evaluates to {}", prod.to_text())));
        }
    }
    for (i, sq) in chain.cited_squares().enumerate() {
        if !is_singular_from_labels(en, sq)? {
            return Err(Error::verification(format!("cited square {i} {sq:?} fails the band identity")));
        }
    }
    let order = gl_order(chain.r as u32, en.field().q() as u64)?;
    let distinct: BTreeSet<u64> = chain.class_values.iter().map(Mat::value_code).collect();
    let classes_are_group = distinct.len() == chain.class_values.len()
        && chain.class_values.iter().all(|v| v.rank() == chain.r)
        && order == distinct.len().into();
    let mut products: HashMap<(u64, u64), u64> = HashMap::new();
    for e in &chain.stage3 {
        products.insert((e.a.value_code(), e.b.value_code()), e.ab.value_code());
    }
    let multiplication_closed = products.len() == distinct.len() * distinct.len()
        && chain
            .stage3
            .iter()
            .all(|e| e.a.matmul(&e.b).map(|m| m == e.ab).unwrap_or(false) && distinct.contains(&e.ab.value_code()));
    let stage2_squares = chain.stage2.values.iter().map(|v| v.edges.len()).sum();
    Ok(SoundnessReport {
        tree_relations: pres.tree_relations().len(),
        stage1_squares: chain.stage1.trace.len(),
        stage2_squares,
        stage3_squares: chain.stage3.len(),
        classes: chain.class_values.len(),
        group_order: order.to_string(),
        classes_are_group,
        multiplication_closed,
        certified: classes_are_group && multiplication_closed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportMode {
    TreeOnly,
    CertificateSquares,
    /// Every non-degenerate singular square, refused above `cap` candidates.
    FullEnumeration { cap: u64 },
}

pub fn export_presentation(
    pres: &Presentation,
    p: &ProductTable,
    chain: Option<&CertificateChain>,
    mode: ExportMode,
) -> Result<PresentationFile> {
    let gens = (0..pres.generator_count() as u32)
        .map(|g| {
            let (y, x) = pres.generator(g);
            GenLine {
                id: g as u64,
                x,
                y,
                value: p.value(p.cell(y as usize, x as usize)).clone(),
            }
        })
        .collect();
    let mut rels: Vec<Relation> = pres.tree_relations().iter().map(|&g| Relation::Unit(g as u64)).collect();
    let square_rel = |sq: SingularSquare| -> Result<Relation> {
        let mut ids = [0u64; 4];
        for (slot, (row, col)) in ids.iter_mut().zip(sq.cells()) {
            *slot = pres.require(row as u32, col as u32)? as u64;
        }
        Ok(Relation::Square(ids))
    };
    match mode {
        ExportMode::TreeOnly => {}
        ExportMode::CertificateSquares => {
            let chain = chain.ok_or_else(|| Error::param("certificate-squares export needs a certificate"))?;
            for sq in chain.cited_squares() {
                rels.push(square_rel(sq)?);
            }
        }
        ExportMode::FullEnumeration { cap } => {
            let (rows, cols) = (p.rows() as u128, p.cols() as u128);
            let needed = rows * rows * cols * cols;
            if needed > cap as u128 {
                return Err(Error::Budget {
                    what: "full square enumeration".into(),
                    needed,
                    budget: cap as u128,
                });
            }
            for x in 0..p.cols() {
                for x2 in x + 1..p.cols() {
                    for y in 0..p.rows() {
                        for y2 in y + 1..p.rows() {
                            let sq = SingularSquare::new(x, x2, y, y2);
                            if is_singular(p, sq)? {
                                rels.push(square_rel(sq)?);
                            }
                        }
                    }
                }
            }
        }
    }
    let (n, r, q) = pres.params();
    Ok(PresentationFile { n, r, q, gens, rels })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct FileRef {
    pub file: String,
    pub lines: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Stage2ValueJson {
    pub value: String,
    pub cells: usize,
    pub anchor: (u32, u32),
    pub edges: usize,
    pub sample_path: Option<StrongPath>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Stage3Json {
    pub a: String,
    pub b: String,
    pub ab: String,
    pub square: SingularSquare,
}

/// Contents of `certificate.json`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct CertificateJson {
    pub schema: u32,
    pub n: usize,
    pub r: usize,
    pub q: u32,
    pub modulus: Vec<u32>,
    pub generators: usize,
    pub tree_relations: usize,
    pub identity_cells: usize,
    pub stage1: FileRef,
    pub stage2: FileRef,
    pub stage2_values: Vec<Stage2ValueJson>,
    pub stage3: Vec<Stage3Json>,
    pub classes: Vec<String>,
    pub soundness: Option<SoundnessReport>,
}

pub const CERTIFICATE_FILE: &str = "certificate.json";
pub const TRACE_FILE: &str = "stage1.trace";
pub const EDGES_FILE: &str = "stage2.edges";

impl CertificateChain {
    pub fn to_json(&self) -> CertificateJson {
        CertificateJson {
            schema: 1,
            n: self.n,
            r: self.r,
            q: self.field.q(),
            modulus: self.field.modulus().to_vec(),
            generators: self.generators,
            tree_relations: self.tree_relations,
            identity_cells: self.stage1.identity_cells,
            stage1: FileRef {
                file: TRACE_FILE.into(),
                lines: self.stage1.trace.len(),
            },
            stage2: FileRef {
                file: EDGES_FILE.into(),
                lines: self.stage2.values.iter().map(|v| v.edges.len() + 1).sum(),
            },
            stage2_values: self
                .stage2
                .values
                .iter()
                .map(|v| Stage2ValueJson {
                    value: v.value.to_text(),
                    cells: v.cells,
                    anchor: v.anchor,
                    edges: v.edges.len(),
                    sample_path: v.sample_path.clone(),
                })
                .collect(),
            stage3: self
                .stage3
                .iter()
                .map(|e| Stage3Json {
                    a: e.a.to_text(),
                    b: e.b.to_text(),
                    ab: e.ab.to_text(),
                    square: e.square,
                })
                .collect(),
            classes: self.class_values.iter().map(Mat::to_text).collect(),
            soundness: self.soundness.clone(),
        }
    }

    pub fn edge_blocks(&self) -> Vec<EdgeBlock> {
        self.stage2
            .values
            .iter()
            .map(|v| EdgeBlock {
                value: v.value.clone(),
                edges: v.edges.clone(),
            })
            .collect()
    }

    /// Writes `certificate.json`, `stage1.trace` and `stage2.edges` into
    /// `dir`, returning their paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(&self.to_json())? + "\n";
        let files = [
            (CERTIFICATE_FILE, json),
            (TRACE_FILE, textfmt::write_trace(&self.stage1.trace)),
            (EDGES_FILE, textfmt::write_edges(&self.edge_blocks())),
        ];
        let mut out = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body)?;
            out.push(path);
        }
        Ok(out)
    }
}

/// A certificate read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedCertificate {
    pub json: CertificateJson,
    pub field: Field,
    pub trace: Vec<TraceStep>,
    pub edges: Vec<EdgeBlock>,
}

pub fn read_certificate(dir: &Path) -> Result<LoadedCertificate> {
    let json = fs::read_to_string(dir.join(CERTIFICATE_FILE))?;
    let head: CertificateJson = serde_json::from_str(&json)?;
    let trace = fs::read_to_string(dir.join(&head.stage1.file))?;
    let edges = fs::read_to_string(dir.join(&head.stage2.file))?;
    parse_certificate(&json, &trace, &edges)
}

/// The three certificate files from memory.
pub fn parse_certificate(json: &str, trace: &str, edges: &str) -> Result<LoadedCertificate> {
    let json: CertificateJson = serde_json::from_str(json)?;
    if json.schema != 1 {
        return Err(Error::param(format!("unsupported certificate schema {}", json.schema)));
    }
    let field = crate::gf::make_field(json.q, Some(&json.modulus))?;
    let trace = textfmt::parse_trace(trace)?;
    let edges = textfmt::parse_edges(&field, edges)?;
    Ok(LoadedCertificate {
        json,
        field,
        trace,
        edges,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub cell_budget: u64,
    /// Run outside `r < n/3`, recording where the pipeline stops instead of
    /// refusing the parameters.
    pub exploratory: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            cell_budget: crate::tables::DEFAULT_CELL_BUDGET,
            exploratory: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Everything a full run produces.
#[derive(Debug)]
pub struct TheoremRun {
    pub n: usize,
    pub r: usize,
    pub q: u32,
    pub stages: Vec<StageRecord>,
    pub strong_report: Option<StrongReport>,
    pub chain: Option<CertificateChain>,
    pub certified: bool,
}

impl TheoremRun {
    pub fn failed_stage(&self) -> Option<&StageRecord> {
        self.stages.iter().find(|s| !s.passed)
    }
}

/// Tables, tree, closure, strong components, Stages 1-3, soundness and the
/// count cross-checks. Verification failures are recorded as failed stages;
/// parameter and budget problems are errors.
pub fn run_pipeline(n: usize, r: usize, field: &Field, opts: RunOptions) -> Result<TheoremRun> {
    if r == 0 || n < 2 || r >= n {
        return Err(Error::param(format!("need 1 <= r < n, got n = {n}, r = {r}")));
    }
    if !opts.exploratory && 3 * r >= n {
        return Err(Error::param(format!("the theorem needs r < n/3, got n = {n}, r = {r}")));
    }
    let q = field.q();
    let mut run = TheoremRun {
        n,
        r,
        q,
        stages: Vec::new(),
        strong_report: None,
        chain: None,
        certified: false,
    };
    macro_rules! stage {
        ($name:expr, $body:expr) => {
            match $body {
                Ok((v, detail)) => {
                    run.stages.push(StageRecord {
                        name: $name,
                        passed: true,
                        detail,
                    });
                    v
                }
                Err(Error::Verification(msg)) => {
                    run.stages.push(StageRecord {
                        name: $name,
                        passed: false,
                        detail: msg,
                    });
                    return Ok(run);
                }
                Err(e) => return Err(e),
            }
        };
    }

    let en = Arc::new(enumerate_y(n, r, field)?);
    let p = build_p(&en, opts.cell_budget)?;
    let full = build_t_full(&en, opts.cell_budget)?;
    let delta = build_delta(&p)?;
    let tree = stage!(
        "spanning-tree",
        build_spanning_tree(&en, &delta).map(|t| {
            let d = format!("{} edges over {} labels", t.len(), 2 * en.len());
            (t, d)
        })
    );
    let state = color_closure(&delta, &tree);
    let closure_detail = format!("{} of {} identity cells blue", state.blue_count(), delta.edge_count());
    let pres = build_presentation(&p, &tree)?;
    let mut cm = ClassMap::new(&pres);
    let stage1 = stage!(
        "stage1",
        run_stage1(&pres, &mut cm, &delta, &state).map(|s| {
            let d = format!("{closure_detail}; {} trace steps", s.steps);
            (s, d)
        })
    );
    drop(state);
    let (strong_report, strong) = check_strong_connectivity(&full)?;
    let strong_detail = format!("{} occurring values, {} absent", strong_report.values.len(), strong_report.absent);
    let strong_report_passed = strong_report.passed;
    let strong_report_failures = strong_report.failures.join("; ");
    run.strong_report = Some(strong_report);
    stage!(
        "strong",
        if strong_report_passed {
            Ok(((), strong_detail))
        } else {
            Err(Error::verification(strong_report_failures))
        }
    );
    let stage2 = stage!(
        "stage2",
        run_stage2(&pres, &mut cm, &p, &full, &strong).map(|s| {
            let d = format!("{} classes", s.classes);
            (s, d)
        })
    );
    drop(strong);
    let stage3 = if 3 * r < n {
        stage!(
            "stage3",
            run_stage3(&pres, &mut cm, &p, &en).map(|s| {
                let d = format!("{} products", s.len());
                (s, d)
            })
        )
    } else {
        run.stages.push(StageRecord {
            name: "stage3",
            passed: false,
            detail: format!("the product squares need n > 3r, got n = {n}, r = {r}"),
        });
        return Ok(run);
    };
    let mut chain = CertificateChain {
        n,
        r,
        field: field.clone(),
        generators: pres.generator_count(),
        tree_relations: pres.tree_relations().len(),
        stage1,
        stage2,
        stage3,
        class_values: cm.class_values().to_vec(),
        soundness: None,
    };
    let soundness = stage!(
        "soundness",
        check_soundness(&en, &pres, &chain).and_then(|s| {
            if s.certified {
                let d = format!("{} classes, group order {}", s.classes, s.group_order);
                Ok((s, d))
            } else {
                Err(Error::verification(format!("{s:?}")))
            }
        })
    );
    chain.soundness = Some(soundness);
    stage!("counts", count_check(n, r, q, &en, &pres, &chain));
    run.chain = Some(chain);
    run.certified = run.stages.iter().all(|s| s.passed);
    Ok(run)
}

fn count_check(
    n: usize,
    r: usize,
    q: u32,
    en: &Enumeration,
    pres: &Presentation,
    chain: &CertificateChain,
) -> Result<((), String)> {
    let (n32, r32, q64) = (n as u32, r as u32, q as u64);
    let labels = gaussian_binomial(n32, r32, q64)?;
    let gens = idempotent_count(n32, r32, q64)?;
    let order = gl_order(r32, q64)?;
    if labels != en.len().into() {
        return Err(Error::verification(format!("{} labels, expected {labels}", en.len())));
    }
    if gens != pres.generator_count().into() {
        return Err(Error::verification(format!("{} generators, expected {gens}", pres.generator_count())));
    }
    if order != chain.class_values.len().into() {
        return Err(Error::verification(format!("{} classes, expected {order}", chain.class_values.len())));
    }
    Ok(((), format!("{labels} labels, {gens} generators, group order {order}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectivity::strong_components_all;
    use crate::gf::make_field;
    use crate::tables::DEFAULT_CELL_BUDGET;

    struct Fixture {
        en: Arc<Enumeration>,
        p: ProductTable,
        delta: DeltaGraph,
        tree: SpanningTree,
    }

    fn fixture(n: usize, r: usize, q: u32) -> Fixture {
        let f = make_field(q, None).unwrap();
        let en = Arc::new(enumerate_y(n, r, &f).unwrap());
        let p = build_p(&en, DEFAULT_CELL_BUDGET).unwrap();
        let delta = build_delta(&p).unwrap();
        let tree = build_spanning_tree(&en, &delta).unwrap();
        Fixture { en, p, delta, tree }
    }

    #[test]
    fn generator_and_tree_counts() {
        let fx = fixture(4, 1, 2);
        let pres = build_presentation(&fx.p, &fx.tree).unwrap();
        assert_eq!(pres.generator_count(), 120);
        assert_eq!(pres.tree_relations().len(), 29);
        let id = fx.p.identity_vid().unwrap();
        for &g in pres.tree_relations() {
            let (y, x) = pres.generator(g);
            assert_eq!(fx.p.cell(y as usize, x as usize), id);
            assert_eq!(pres.gen_id(y as usize, x as usize), Some(g));
        }
    }

    #[test]
    fn stages_at_4_1_3() {
        let fx = fixture(4, 1, 3);
        let pres = build_presentation(&fx.p, &fx.tree).unwrap();
        let mut cm = ClassMap::new(&pres);
        assert!(run_stage2(&pres, &mut cm, &fx.p, &fx.p, &[]).is_err());
        let state = color_closure(&fx.delta, &fx.tree);
        let s1 = run_stage1(&pres, &mut cm, &fx.delta, &state).unwrap();
        assert_eq!(s1.identity_cells, fx.delta.edge_count());
        let classes_after_1 = cm.class_count();
        run_stage1(&pres, &mut cm, &fx.delta, &state).unwrap();
        assert_eq!(cm.class_count(), classes_after_1);
        let strong = strong_components_all(&fx.p).unwrap();
        let s2 = run_stage2(&pres, &mut cm, &fx.p, &fx.p, &strong).unwrap();
        assert_eq!(s2.classes, 2);
        assert_eq!(cm.class_count(), 2);
        let s3 = run_stage3(&pres, &mut cm, &fx.p, &fx.en).unwrap();
        assert_eq!(s3.len(), 4);
        let two = Mat::from_rows(fx.p.field(), &[&[2]]).unwrap();
        assert!(s3.iter().any(|e| e.a == two && e.b == two && e.ab == Mat::identity(fx.p.field(), 1)));
    }

    #[test]
    fn stage1_refuses_incomplete_closure() {
        let fx = fixture(3, 2, 2);
        let pres = build_presentation(&fx.p, &fx.tree).unwrap();
        let mut cm = ClassMap::new(&pres);
        let state = color_closure(&fx.delta, &fx.tree);
        if !state.all_blue(&fx.delta) {
            assert!(matches!(
                run_stage1(&pres, &mut cm, &fx.delta, &state),
                Err(Error::Verification(_))
            ));
        }
    }

    #[test]
    fn pipeline_small_instances() {
        for (n, r, q, classes) in [(4, 1, 2, 1), (4, 1, 3, 2), (5, 1, 2, 1)] {
            let f = make_field(q, None).unwrap();
            let run = run_pipeline(n, r, &f, RunOptions::default()).unwrap();
            assert!(run.certified, "{:?}", run.stages);
            let chain = run.chain.unwrap();
            assert_eq!(chain.class_values.len(), classes);
            assert_eq!(chain.cited_squares().count(), chain.cited_square_count());
            let last = chain.cited_square_count() - 1;
            assert_eq!(chain.cited_square(last), chain.cited_squares().last());
        }
    }

    #[test]
    fn pipeline_refuses_large_rank_unless_exploratory() {
        let f = make_field(2, None).unwrap();
        assert!(matches!(run_pipeline(5, 2, &f, RunOptions::default()), Err(Error::Param(_))));
        let run = run_pipeline(
            5,
            2,
            &f,
            RunOptions {
                exploratory: true,
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert!(!run.certified);
        assert_eq!(run.failed_stage().map(|s| s.name), Some("stage3"));
    }

    #[test]
    fn export_modes_round_trip() {
        let f = make_field(2, None).unwrap();
        let run = run_pipeline(4, 1, &f, RunOptions::default()).unwrap();
        let chain = run.chain.unwrap();
        let fx = fixture(4, 1, 2);
        let pres = build_presentation(&fx.p, &fx.tree).unwrap();
        let tree_only = export_presentation(&pres, &fx.p, None, ExportMode::TreeOnly).unwrap();
        let text = tree_only.to_text();
        assert_eq!(text.lines().filter(|l| l.starts_with("gen ")).count(), 120);
        assert_eq!(text.lines().filter(|l| l.starts_with("rel unit ")).count(), 29);
        assert_eq!(PresentationFile::parse(&text).unwrap(), tree_only);
        let cert = export_presentation(&pres, &fx.p, Some(&chain), ExportMode::CertificateSquares).unwrap();
        let squares = cert.rels.iter().filter(|r| matches!(r, Relation::Square(_))).count();
        assert_eq!(squares, chain.cited_square_count());
        assert!(export_presentation(&pres, &fx.p, None, ExportMode::FullEnumeration { cap: 10 }).is_err());
        let full = export_presentation(&pres, &fx.p, None, ExportMode::FullEnumeration { cap: 1 << 20 }).unwrap();
        assert!(full.rels.len() > 29);
    }

    #[test]
    fn certificate_files_round_trip() {
        let f = make_field(3, None).unwrap();
        let chain = run_pipeline(4, 1, &f, RunOptions::default()).unwrap().chain.unwrap();
        let dir = std::env::temp_dir().join(format!("linmon-cert-{}", std::process::id()));
        chain.write(&dir).unwrap();
        let loaded = read_certificate(&dir).unwrap();
        assert_eq!(loaded.json, chain.to_json());
        assert_eq!(loaded.trace, chain.stage1.trace);
        assert_eq!(loaded.edges, chain.edge_blocks());
        fs::remove_dir_all(&dir).unwrap();
    }
}
