//! λ-graph connectivity and strong connectivity of equal-valued cells.
//!
//! Two cells with the same value are λ-adjacent when they share a row or a
//! column. They are strongly adjacent when, in addition, some third row
//! (for a shared row) or third column (for a shared column) carries the
//! identity in both of their columns (rows).

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsu::Dsu;
use crate::error::{Error, Result};
use crate::gf::Field;
use crate::matspace::Mat;
use crate::tables::{build_t_mk, Occurrences, ProductTable, Vid};

/// A table position `(row, col)`.
pub type Cell = (u32, u32);

#[derive(Debug, Clone)]
pub struct LambdaComponents {
    pub vid: Vid,
    /// Component label per entry of the value's [`Occurrences::cells`].
    pub labels: Vec<u32>,
    pub count: usize,
}

fn occurrences_of(t: &ProductTable, vid: Vid) -> Result<&Occurrences> {
    if vid as usize >= t.value_count() {
        return Err(Error::param(format!("value id {vid} out of range")));
    }
    let occ = t.occurrences(vid);
    if occ.is_empty() {
        return Err(Error::param(format!("value {} does not occur", t.value(vid).to_text())));
    }
    Ok(occ)
}

pub fn lambda_components(t: &ProductTable, vid: Vid) -> Result<LambdaComponents> {
    let occ = occurrences_of(t, vid)?;
    let mut dsu = Dsu::new(occ.len());
    for row in 0..t.rows() {
        let range = occ.row_range(row);
        for i in range.start + 1..range.end {
            dsu.union(i - 1, i);
        }
    }
    for col in 0..t.cols() {
        for w in occ.col_indices(col).windows(2) {
            dsu.union(w[0] as usize, w[1] as usize);
        }
    }
    Ok(LambdaComponents {
        vid,
        count: dsu.sets(),
        labels: dsu.labels(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaValueReport {
    pub value: String,
    pub rank: usize,
    pub occurrences: usize,
    pub components: usize,
    /// Whether connectivity is claimed for this value.
    pub asserted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaSweepReport {
    pub m: usize,
    pub k: usize,
    pub q: u32,
    pub values: Vec<LambdaValueReport>,
    pub absent: usize,
    pub connected_asserted: usize,
    pub failures: Vec<String>,
    pub passed: bool,
}

/// λ-connectivity of every `K` in `T_{m,k}`: asserted for all `K` when
/// `k < m` and for singular `K` when `k = m`.
pub fn check_lambda_connectivity(m: usize, k: usize, field: &Field, side_budget: u64) -> Result<LambdaSweepReport> {
    let t = build_t_mk(m, k, field, side_budget)?;
    let q = field.q();
    let total = (q as u64).pow((k * k) as u32);
    let mut values = Vec::new();
    let mut failures = Vec::new();
    for vid in 0..t.value_count() as Vid {
        let value = t.value(vid);
        let rank = value.rank();
        let lc = lambda_components(&t, vid)?;
        let asserted = k < m || rank < k;
        if asserted && lc.count != 1 {
            failures.push(format!("{} has {} components", value.to_text(), lc.count));
        }
        values.push(LambdaValueReport {
            value: value.to_text(),
            rank,
            occurrences: lc.labels.len(),
            components: lc.count,
            asserted,
        });
    }
    let absent = total as usize - values.len();
    if absent > 0 {
        failures.push(format!("{absent} values of M_{k}(F_{q}) never occur"));
    }
    let connected_asserted = values.iter().filter(|v| v.asserted && v.components == 1).count();
    Ok(LambdaSweepReport {
        m,
        k,
        q,
        passed: failures.is_empty(),
        values,
        absent,
        connected_asserted,
        failures,
    })
}

/// The identity cells in a third row (`Row`) or third column (`Col`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Witness {
    Row(u32),
    Col(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrongEdge {
    pub a: Cell,
    pub b: Cell,
    pub witness: Witness,
}

impl StrongEdge {
    /// The two identity cells the witness cites.
    pub fn witness_cells(&self) -> [Cell; 2] {
        match self.witness {
            Witness::Row(y1) => [(y1, self.a.1), (y1, self.b.1)],
            Witness::Col(x1) => [(self.a.0, x1), (self.b.0, x1)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrongPath {
    pub cells: Vec<Cell>,
    /// `witnesses[i]` joins `cells[i]` and `cells[i + 1]`.
    pub witnesses: Vec<Witness>,
}

impl StrongPath {
    pub fn steps(&self) -> impl Iterator<Item = StrongEdge> + '_ {
        self.cells.windows(2).zip(&self.witnesses).map(|(w, &witness)| StrongEdge {
            a: w[0],
            b: w[1],
            witness,
        })
    }
}

fn check_edge(t: &ProductTable, vid: Vid, id: Vid, e: &StrongEdge) -> std::result::Result<(), String> {
    let in_range = |(r, c): Cell| (r as usize) < t.rows() && (c as usize) < t.cols();
    let cells = e.witness_cells();
    if ![e.a, e.b, cells[0], cells[1]].into_iter().all(in_range) {
        return Err(format!("{e:?} leaves the table"));
    }
    if e.a == e.b {
        return Err(format!("{e:?} repeats a cell"));
    }
    let shared = match e.witness {
        Witness::Row(y1) => e.a.0 == e.b.0 && e.a.0 != y1,
        Witness::Col(x1) => e.a.1 == e.b.1 && e.a.1 != x1,
    };
    if !shared {
        return Err(format!("{e:?} does not match its witness line"));
    }
    for c in [e.a, e.b] {
        if t.cell(c.0 as usize, c.1 as usize) != vid {
            return Err(format!("cell {c:?} does not carry the path value"));
        }
    }
    for c in cells {
        if t.cell(c.0 as usize, c.1 as usize) != id {
            return Err(format!("witness cell {c:?} is not the identity"));
        }
    }
    Ok(())
}

/// Checks one strong edge against `t`.
pub fn verify_strong_edge(t: &ProductTable, e: &StrongEdge) -> std::result::Result<(), String> {
    let id = t.identity_vid().ok_or("table has no identity cells")?;
    let in_range = (e.a.0 as usize) < t.rows() && (e.a.1 as usize) < t.cols();
    if !in_range {
        return Err(format!("{e:?} leaves the table"));
    }
    let vid = t.cell(e.a.0 as usize, e.a.1 as usize);
    if t.is_zero_marker(vid) {
        return Err(format!("cell {:?} is zero", e.a));
    }
    check_edge(t, vid, id, e)
}

/// True when every step is a strong edge and all cells share one nonzero
/// value of `t`.
pub fn verify_strong_path(t: &ProductTable, path: &StrongPath) -> bool {
    explain_strong_path(t, path).is_ok()
}

pub fn explain_strong_path(t: &ProductTable, path: &StrongPath) -> std::result::Result<(), String> {
    let Some(&(r0, c0)) = path.cells.first() else {
        return Err("empty path".into());
    };
    if path.witnesses.len() + 1 != path.cells.len() {
        return Err("witness count does not match the cell count".into());
    }
    if r0 as usize >= t.rows() || c0 as usize >= t.cols() {
        return Err(format!("cell {:?} leaves the table", (r0, c0)));
    }
    let id = t.identity_vid().ok_or("table has no identity cells")?;
    let vid = t.cell(r0 as usize, c0 as usize);
    if t.is_zero_marker(vid) {
        return Err("path value is zero".into());
    }
    path.steps().try_for_each(|e| check_edge(t, vid, id, &e))
}

#[derive(Debug, Clone)]
pub struct StrongComponents {
    pub vid: Vid,
    /// Component label per entry of the value's [`Occurrences::cells`].
    pub labels: Vec<u32>,
    pub count: usize,
    /// Spanning forest of strong edges, one per merge.
    pub forest: Vec<StrongEdge>,
}

impl StrongComponents {
    /// Strong path between two cells of this value along the forest.
    pub fn path(&self, t: &ProductTable, from: Cell, to: Cell) -> Option<StrongPath> {
        self.paths_from(t, from, &[to]).pop().flatten()
    }

    /// Forest paths from one cell to each target, sharing one search.
    pub fn paths_from(&self, t: &ProductTable, from: Cell, to: &[Cell]) -> Vec<Option<StrongPath>> {
        let occ = t.occurrences(self.vid);
        let Some(src) = occ.index_of(from.0 as usize, from.1 as usize) else {
            return vec![None; to.len()];
        };
        let ends: Vec<Option<(usize, usize)>> = self
            .forest
            .iter()
            .map(|e| Some((occ.index_of(e.a.0 as usize, e.a.1 as usize)?, occ.index_of(e.b.0 as usize, e.b.1 as usize)?)))
            .collect();
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); occ.len()];
        for (i, e) in ends.iter().enumerate() {
            if let Some((a, b)) = *e {
                adj[a].push(i as u32);
                adj[b].push(i as u32);
            }
        }
        // prev[v] = (parent, forest edge)
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; occ.len()];
        prev[src] = Some((src, usize::MAX));
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &ei in &adj[u] {
                let (a, b) = ends[ei as usize].expect("listed edges resolve");
                let v = if a == u { b } else { a };
                if prev[v].is_none() {
                    prev[v] = Some((u, ei as usize));
                    queue.push_back(v);
                }
            }
        }
        to.iter()
            .map(|c| {
                let dst = occ.index_of(c.0 as usize, c.1 as usize)?;
                prev[dst]?;
                let mut cells = vec![occ.cells[dst]];
                let mut witnesses = Vec::new();
                let mut at = dst;
                while at != src {
                    let (p, ei) = prev[at].expect("reached cells have parents");
                    witnesses.push(self.forest[ei].witness);
                    cells.push(occ.cells[p]);
                    at = p;
                }
                cells.reverse();
                witnesses.reverse();
                Some(StrongPath { cells, witnesses })
            })
            .collect()
    }
}

/// Local spanning forest of one line: `values[pos]` are the line's cells,
/// `lists[w]` the positions carrying the identity in witness line `w`.
/// Returns `[pos_a, pos_b, w]` per merge.
fn line_forest(line: usize, values: &[Vid], include: &[bool], lists: &[Vec<u32>]) -> Vec<[u32; 3]> {
    let nv = include.len();
    let mut count = vec![0u32; nv];
    for &v in values {
        if include[v as usize] {
            count[v as usize] += 1;
        }
    }
    let target: usize = count.iter().map(|&c| c.saturating_sub(1) as usize).sum();
    let mut out = Vec::new();
    if target == 0 {
        return out;
    }
    let mut dsu = Dsu::new(values.len());
    let mut first = vec![0u32; nv];
    let mut stamp = vec![u32::MAX; nv];
    for (w, list) in lists.iter().enumerate() {
        if w == line {
            continue;
        }
        for &pos in list {
            let v = values[pos as usize] as usize;
            if !include[v] {
                continue;
            }
            if stamp[v] != w as u32 {
                stamp[v] = w as u32;
                first[v] = pos;
            } else if dsu.union(first[v] as usize, pos as usize) {
                out.push([first[v], pos, w as u32]);
                if out.len() == target {
                    return out;
                }
            }
        }
    }
    out
}

const LINE_CHUNK: usize = 64;

/// Strong components of every value with `include[vid]` set.
pub fn strong_components_where(t: &ProductTable, include: &[bool]) -> Result<Vec<Option<StrongComponents>>> {
    let id = t
        .identity_vid()
        .ok_or_else(|| Error::param("table has no identity cells"))?;
    if include.len() != t.value_count() {
        return Err(Error::param("include mask does not match the value count"));
    }
    let (rows, cols) = (t.rows(), t.cols());
    let ident = t.occurrences(id);
    let icols: Vec<Vec<u32>> = (0..rows).map(|y| ident.cols_in_row(y).collect()).collect();
    let irows: Vec<Vec<u32>> = (0..cols).map(|x| ident.rows_in_col(x).collect()).collect();
    let cells = t.cells();
    let mut global = Dsu::new(rows * cols);
    let mut forests: Vec<Vec<StrongEdge>> = vec![Vec::new(); include.len()];

    let mut merge = |global: &mut Dsu, a: Cell, b: Cell, witness: Witness| {
        let (ia, ib) = (a.0 as usize * cols + a.1 as usize, b.0 as usize * cols + b.1 as usize);
        if global.union(ia, ib) {
            forests[cells[ia] as usize].push(StrongEdge { a, b, witness });
        }
    };

    for start in (0..rows).step_by(LINE_CHUNK) {
        let end = (start + LINE_CHUNK).min(rows);
        let local: Vec<Vec<[u32; 3]>> = (start..end)
            .into_par_iter()
            .map(|y| line_forest(y, &cells[y * cols..(y + 1) * cols], include, &icols))
            .collect();
        for (y, edges) in (start..end).zip(local) {
            for [pa, pb, w] in edges {
                merge(&mut global, (y as u32, pa), (y as u32, pb), Witness::Row(w));
            }
        }
    }
    for start in (0..cols).step_by(LINE_CHUNK) {
        let end = (start + LINE_CHUNK).min(cols);
        let local: Vec<Vec<[u32; 3]>> = (start..end)
            .into_par_iter()
            .map(|x| {
                let column: Vec<Vid> = (0..rows).map(|y| cells[y * cols + x]).collect();
                line_forest(x, &column, include, &irows)
            })
            .collect();
        for (x, edges) in (start..end).zip(local) {
            for [pa, pb, w] in edges {
                merge(&mut global, (pa, x as u32), (pb, x as u32), Witness::Col(w));
            }
        }
    }

    let mut out = Vec::with_capacity(include.len());
    for (vid, forest) in forests.into_iter().enumerate() {
        let occ = t.occurrences(vid as Vid);
        if !include[vid] || occ.is_empty() {
            out.push(None);
            continue;
        }
        let mut dense: HashMap<usize, u32> = HashMap::new();
        let labels: Vec<u32> = occ
            .cells
            .iter()
            .map(|&(r, c)| {
                let root = global.find(r as usize * cols + c as usize);
                let next = dense.len() as u32;
                *dense.entry(root).or_insert(next)
            })
            .collect();
        out.push(Some(StrongComponents {
            vid: vid as Vid,
            count: dense.len(),
            labels,
            forest,
        }));
    }
    Ok(out)
}

pub fn strong_components(t: &ProductTable, vid: Vid) -> Result<StrongComponents> {
    occurrences_of(t, vid)?;
    let mut include = vec![false; t.value_count()];
    include[vid as usize] = true;
    Ok(strong_components_where(t, &include)?
        .swap_remove(vid as usize)
        .expect("value occurs"))
}

/// Strong components of every nonzero value.
pub fn strong_components_all(t: &ProductTable) -> Result<Vec<Option<StrongComponents>>> {
    let include: Vec<bool> = (0..t.value_count() as Vid).map(|v| !t.is_zero_marker(v)).collect();
    strong_components_where(t, &include)
}

#[derive(Debug, Clone, Serialize)]
pub struct StrongValueReport {
    pub value: String,
    pub rank: usize,
    pub occurrences: usize,
    pub components: usize,
    pub forest_edges: usize,
    pub edges_verified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrongReport {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<StrongValueReport>,
    /// Matrices of the value shape that never occur.
    pub absent: u64,
    pub failures: Vec<String>,
    pub passed: bool,
}

/// Strong connectivity of every occurring value, with every forest edge
/// checked by [`verify_strong_edge`].
pub fn check_strong_connectivity(t: &ProductTable) -> Result<(StrongReport, Vec<Option<StrongComponents>>)> {
    let comps = strong_components_all(t)?;
    let mut values = Vec::new();
    let mut failures = Vec::new();
    for sc in comps.iter().flatten() {
        let value = t.value(sc.vid);
        let bad = sc.forest.iter().find_map(|e| verify_strong_edge(t, e).err());
        if let Some(reason) = &bad {
            failures.push(format!("{}: {reason}", value.to_text()));
        }
        if sc.count != 1 {
            failures.push(format!("{} has {} strong components", value.to_text(), sc.count));
        }
        values.push(StrongValueReport {
            value: value.to_text(),
            rank: value.rank(),
            occurrences: sc.labels.len(),
            components: sc.count,
            forest_edges: sc.forest.len(),
            edges_verified: bad.is_none(),
        });
    }
    let d = t.value_dim() as u32;
    let shape_total = (t.field().q() as u64).pow(d * d);
    Ok((
        StrongReport {
            rows: t.rows(),
            cols: t.cols(),
            absent: shape_total.saturating_sub(values.len() as u64),
            passed: failures.is_empty(),
            values,
            failures,
        },
        comps,
    ))
}

/// Looks up a value by matrix; an error when it never occurs.
pub fn value_id(t: &ProductTable, value: &Mat) -> Result<Vid> {
    t.vid_of(value)
        .filter(|&v| !t.occurrences(v).is_empty())
        .ok_or_else(|| Error::param(format!("value {} does not occur", value.to_text())))
}
