//! Independent replay of a certificate read from disk. Nothing from the
//! product tables is reused: every cell is recomputed as `YX` from the
//! enumerated labels, and squares are checked with matrix inverses.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use num_traits::ToPrimitive;
use serde::Serialize;

use crate::connectivity::{StrongEdge, Witness};
use crate::counts::{gaussian_binomial, gl_order, idempotent_count};
use crate::deltagraph::tree_edges;
use crate::dsu::Dsu;
use crate::enumeration::{enumerate_y, Enumeration};
use crate::error::{Error, Result};
use crate::gf::FqElem;
use crate::matspace::Mat;
use crate::presentation::{read_certificate, LoadedCertificate};
use crate::tables::DEFAULT_CELL_BUDGET;

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct CheckReport {
    pub tree_edges: usize,
    pub trace_steps: usize,
    pub strong_edges: usize,
    pub products: usize,
    pub covered_cells: u64,
    pub expected_cells: String,
    pub classes: usize,
    pub group_order: String,
    pub failures: Vec<String>,
    pub passed: bool,
}

struct Replay<'a> {
    en: &'a Enumeration,
    cols: usize,
    identity: Mat,
    dsu: Dsu,
    unit: usize,
    covered: Vec<u64>,
    covered_count: u64,
}

impl<'a> Replay<'a> {
    fn product(&self, row: u32, col: u32) -> Result<Mat> {
        let (ys, xs) = (self.en.y_mats(), self.en.x_mats());
        let y = ys
            .get(row as usize)
            .ok_or_else(|| Error::verification(format!("row {row} out of range")))?;
        let x = xs
            .get(col as usize)
            .ok_or_else(|| Error::verification(format!("column {col} out of range")))?;
        Ok(y.matmul(x)?)
    }

    fn index(&self, row: u32, col: u32) -> usize {
        row as usize * self.cols + col as usize
    }

    fn cover(&mut self, row: u32, col: u32) {
        let i = self.index(row, col);
        if self.covered[i / 64] >> (i % 64) & 1 == 0 {
            self.covered[i / 64] |= 1 << (i % 64);
            self.covered_count += 1;
        }
    }

    fn is_unit(&mut self, row: u32, col: u32) -> bool {
        let i = self.index(row, col);
        self.dsu.same(i, self.unit)
    }

    fn make_unit(&mut self, row: u32, col: u32) {
        let i = self.index(row, col);
        self.dsu.union(i, self.unit);
        self.cover(row, col);
    }

    /// `a b^{-1} = c d^{-1}` for the four products of a square.
    fn band(&self, y: u32, y2: u32, x: u32, x2: u32) -> Result<bool> {
        if x == x2 || y == y2 {
            return Ok(false);
        }
        let a = self.product(y, x)?;
        let b = self.product(y2, x)?;
        let c = self.product(y, x2)?;
        let d = self.product(y2, x2)?;
        if [&a, &b, &c, &d].iter().any(|m| m.rank() < m.rows()) {
            return Ok(false);
        }
        Ok(a.matmul(&b.inverse()?)? == c.matmul(&d.inverse()?)?)
    }
}

pub fn check_certificate_dir(dir: &Path) -> Result<CheckReport> {
    check_certificate(&read_certificate(dir)?)
}

pub fn check_certificate(cert: &LoadedCertificate) -> Result<CheckReport> {
    check_certificate_within(cert, DEFAULT_CELL_BUDGET)
}

/// As [`check_certificate`], refusing certificates whose table would exceed
/// `cell_budget` cells.
pub fn check_certificate_within(cert: &LoadedCertificate, cell_budget: u64) -> Result<CheckReport> {
    let j = &cert.json;
    let (n, r) = (j.n, j.r);
    if r == 0 || r >= n || 3 * r >= n {
        return Err(Error::verification(format!("certificate parameters n = {n}, r = {r} are outside r < n/3")));
    }
    let labels = gaussian_binomial(n as u32, r as u32, cert.field.q() as u64)?;
    let needed = (&labels * &labels).to_u128().unwrap_or(u128::MAX);
    if needed > cell_budget as u128 {
        return Err(Error::Budget {
            what: format!("certificate table at n = {n}, r = {r}"),
            needed,
            budget: cell_budget as u128,
        });
    }
    let en = enumerate_y(n, r, &cert.field)?;
    let cols = en.len();
    let cells = cols
        .checked_mul(cols)
        .ok_or_else(|| Error::param("label count overflows"))?;
    let mut rp = Replay {
        en: &en,
        cols,
        identity: Mat::identity(&cert.field, r),
        dsu: Dsu::new(cells + 1),
        unit: cells,
        covered: vec![0; cells.div_ceil(64)],
        covered_count: 0,
    };
    let mut failures = Vec::new();
    macro_rules! fail {
        ($($arg:tt)*) => {{
            failures.push(format!($($arg)*));
            return Ok(finish(&rp, &cert, failures, 0, 0, 0, 0, 0));
        }};
    }

    let tree = tree_edges(&en)?;
    let mut shape = Dsu::new(2 * cols);
    for te in &tree {
        let (x, y) = (te.edge.x, te.edge.y);
        if rp.product(y, x)? != rp.identity {
            fail!("tree edge ({x}, {y}) is not an identity cell");
        }
        if !shape.union(x as usize, cols + y as usize) {
            fail!("tree edge ({x}, {y}) closes a cycle");
        }
        rp.make_unit(y, x);
    }
    if tree.len() + 1 != 2 * cols || shape.sets() != 1 {
        fail!("tree does not span the {} labels", 2 * cols);
    }

    for (i, st) in cert.trace.iter().enumerate() {
        let (x, y, x2, y2) = (st.new.x, st.new.y, st.via.x, st.via.y);
        if x == x2 || y == y2 {
            fail!("trace step {i} is degenerate");
        }
        for (row, col) in [(y, x), (y2, x), (y, x2), (y2, x2)] {
            if rp.product(row, col)? != rp.identity {
                fail!("trace step {i}: cell ({row}, {col}) is not the identity");
            }
        }
        for (row, col) in [(y2, x), (y, x2), (y2, x2)] {
            if !rp.is_unit(row, col) {
                fail!("trace step {i} cites ({row}, {col}) before it is 1");
            }
        }
        rp.make_unit(y, x);
    }

    let mut class_of_value: HashMap<Mat, usize> = HashMap::new();
    let mut strong_edges = 0;
    if cert.edges.len() != j.stage2_values.len() {
        fail!("edge file has {} values, certificate lists {}", cert.edges.len(), j.stage2_values.len());
    }
    for (block, meta) in cert.edges.iter().zip(&j.stage2_values) {
        let k = &block.value;
        if k.to_text() != meta.value || block.edges.len() != meta.edges {
            fail!("edge block {} does not match the certificate", k.to_text());
        }
        if k.rows() != r || k.cols() != r || k.rank() != r || *k == rp.identity {
            fail!("{} is not a non-identity invertible value", k.to_text());
        }
        let (ar, ac) = meta.anchor;
        if rp.product(ar, ac)? != *k {
            fail!("anchor ({ar}, {ac}) does not carry {}", k.to_text());
        }
        rp.cover(ar, ac);
        for e in &block.edges {
            if let Err(why) = check_edge(&mut rp, k, e) {
                fail!("{}: {why}", k.to_text());
            }
            let (a, b) = (rp.index(e.a.0, e.a.1), rp.index(e.b.0, e.b.1));
            rp.dsu.union(a, b);
            rp.cover(e.a.0, e.a.1);
            rp.cover(e.b.0, e.b.1);
            strong_edges += 1;
        }
        let root = rp.dsu.find(rp.index(ar, ac));
        if class_of_value.insert(k.clone(), root).is_some() {
            fail!("{} appears twice", k.to_text());
        }
    }
    class_of_value.insert(rp.identity.clone(), rp.dsu.find(rp.unit));

    let expected = idempotent_count(n as u32, r as u32, cert.field.q() as u64)?;
    if expected != rp.covered_count.into() {
        fail!("certificate covers {} cells of the {expected} nonzero cells", rp.covered_count);
    }
    let roots: BTreeSet<usize> = class_of_value.values().copied().collect();
    if roots.len() != class_of_value.len() {
        fail!("two values share a class");
    }
    let order = gl_order(r as u32, cert.field.q() as u64)?;
    if order != class_of_value.len().into() {
        fail!("{} classes, expected {order}", class_of_value.len());
    }

    let mut pairs = BTreeSet::new();
    for (i, s3) in j.stage3.iter().enumerate() {
        let parse = |t: &str| Mat::parse_text(&cert.field, t).map_err(Error::from);
        let (a, b, ab) = (parse(&s3.a)?, parse(&s3.b)?, parse(&s3.ab)?);
        if a.matmul(&b)? != ab {
            fail!("product {i}: AB is wrong");
        }
        let Some(ids) = product_square(&en, &a, &b) else {
            fail!("product {i}: the square labels are not enumerated");
        };
        let sq = s3.square;
        if ids != (sq.x, sq.x2, sq.y, sq.y2) {
            fail!("product {i}: square ids differ from the construction");
        }
        if !rp.band(sq.y, sq.y2, sq.x, sq.x2)? {
            fail!("product {i}: square is not singular");
        }
        let expect = [(sq.y, sq.x, &a), (sq.y2, sq.x, &rp.identity), (sq.y, sq.x2, &ab), (sq.y2, sq.x2, &b)];
        for (row, col, want) in expect {
            if rp.product(row, col)? != *want {
                fail!("product {i}: cell ({row}, {col}) is not {}", want.to_text());
            }
            let Some(&root) = class_of_value.get(want) else {
                fail!("product {i}: {} has no class", want.to_text());
            };
            let at = rp.index(row, col);
            if !rp.dsu.same(at, root) {
                fail!("product {i}: cell ({row}, {col}) is outside the class of {}", want.to_text());
            }
        }
        pairs.insert((a.value_code(), b.value_code()));
    }
    let groups = class_of_value.len();
    if pairs.len() != groups * groups {
        fail!("{} products certified, expected {}", pairs.len(), groups * groups);
    }
    Ok(finish(&rp, cert, failures, tree.len(), cert.trace.len(), strong_edges, j.stage3.len(), groups))
}

fn check_edge(rp: &mut Replay<'_>, k: &Mat, e: &StrongEdge) -> std::result::Result<(), String> {
    let (sq_y, sq_y2, sq_x, sq_x2, witness) = match e.witness {
        Witness::Row(y1) if e.a.0 == e.b.0 => (e.a.0, y1, e.a.1, e.b.1, [(y1, e.a.1), (y1, e.b.1)]),
        Witness::Col(x1) if e.a.1 == e.b.1 => (e.a.0, e.b.0, e.a.1, x1, [(e.a.0, x1), (e.b.0, x1)]),
        _ => return Err(format!("{e:?} does not share the witness line")),
    };
    for (row, col) in [e.a, e.b] {
        if rp.product(row, col).map_err(|x| x.to_string())? != *k {
            return Err(format!("cell ({row}, {col}) does not carry the value"));
        }
    }
    for (row, col) in witness {
        if rp.product(row, col).map_err(|x| x.to_string())? != rp.identity {
            return Err(format!("witness ({row}, {col}) is not the identity"));
        }
        if !rp.is_unit(row, col) {
            return Err(format!("witness ({row}, {col}) is not 1"));
        }
    }
    if !rp.band(sq_y, sq_y2, sq_x, sq_x2).map_err(|x| x.to_string())? {
        return Err(format!("{e:?} is not a singular square"));
    }
    Ok(())
}

/// Ids of `X, X', Y, Y'` for `Y = [0|I|A|0]`, `Y' = [0|0|I|0]`,
/// `X = [0;0;I;0]`, `X' = [I;0;B;0]`, built here from scratch.
fn product_square(en: &Enumeration, a: &Mat, b: &Mat) -> Option<(u32, u32, u32, u32)> {
    let (n, r) = (en.n(), a.rows());
    let f = a.field();
    let mut y = vec![0u8; r * n];
    let mut y2 = vec![0u8; r * n];
    let mut x = vec![0u8; n * r];
    let mut x2 = vec![0u8; n * r];
    for i in 0..r {
        y[i * n + r + i] = FqElem::ONE.code();
        y2[i * n + 2 * r + i] = FqElem::ONE.code();
        x[(2 * r + i) * r + i] = FqElem::ONE.code();
        x2[i * r + i] = FqElem::ONE.code();
        for c in 0..r {
            y[i * n + 2 * r + c] = a.get(i, c).code();
            x2[(2 * r + i) * r + c] = b.get(i, c).code();
        }
    }
    let y = Mat::new(f, r, n, y).ok()?;
    let y2 = Mat::new(f, r, n, y2).ok()?;
    let x = Mat::new(f, n, r, x).ok()?;
    let x2 = Mat::new(f, n, r, x2).ok()?;
    if !(y.is_rre() && y2.is_rre() && x.transpose().is_rre() && x2.transpose().is_rre()) {
        return None;
    }
    Some((
        en.x_id(&x)? as u32,
        en.x_id(&x2)? as u32,
        en.y_id(&y)? as u32,
        en.y_id(&y2)? as u32,
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    rp: &Replay<'_>,
    cert: &LoadedCertificate,
    failures: Vec<String>,
    tree_edges: usize,
    trace_steps: usize,
    strong_edges: usize,
    products: usize,
    classes: usize,
) -> CheckReport {
    let (n, r, q) = (cert.json.n as u32, cert.json.r as u32, cert.field.q() as u64);
    CheckReport {
        tree_edges,
        trace_steps,
        strong_edges,
        products,
        covered_cells: rp.covered_count,
        expected_cells: idempotent_count(n, r, q).map(|c| c.to_string()).unwrap_or_default(),
        classes,
        group_order: gl_order(r, q).map(|c| c.to_string()).unwrap_or_default(),
        passed: failures.is_empty(),
        failures,
    }
}
