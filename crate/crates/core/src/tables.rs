//! Product tables with interned cell values: the Rees structure matrix
//! `P_r`, the full table `T_{n,r}` over `Y_r x X_r`, and the unrestricted
//! multiplication tables `T_{m,k}` over all `k x m` and `m x k` matrices.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::enumeration::Enumeration;
use crate::error::{Error, Result};
use crate::gf::Field;
use crate::matspace::Mat;

/// Default cap on the number of cells in a single table.
pub const DEFAULT_CELL_BUDGET: u64 = 200_000_000;

/// Default cap on `q^{km}`, the side length of `T_{m,k}`.
pub const DEFAULT_MK_SIDE_BUDGET: u64 = 4096;

/// Cell value handle. In a Rees table `0` is the zero marker.
pub type Vid = u16;

pub const ZERO_VID: Vid = 0;

/// Largest `q^{d*d}` for which interning uses a dense lookup array.
const DENSE_LOOKUP_LIMIT: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ZeroPolicy {
    /// Singular products collapse to the zero marker.
    ZeroIfSingular,
    KeepAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TableKind {
    Rees { n: usize, r: usize },
    Full { n: usize, r: usize },
    Mult { m: usize, k: usize },
}

#[derive(Debug, Clone)]
enum Labels {
    Rre(Arc<Enumeration>),
    All { rows: Vec<Mat>, cols: Vec<Mat> },
}

/// Positions of one value, indexed both by row and by column.
#[derive(Debug, Clone)]
pub struct Occurrences {
    /// `(row, col)` in row-major order.
    pub cells: Vec<(u32, u32)>,
    row_ptr: Vec<u32>,
    col_ptr: Vec<u32>,
    col_order: Vec<u32>,
}

impl Occurrences {
    fn build(rows: usize, cols: usize, cells: Vec<(u32, u32)>) -> Self {
        let mut row_ptr = vec![0u32; rows + 1];
        let mut col_ptr = vec![0u32; cols + 1];
        for &(r, c) in &cells {
            row_ptr[r as usize + 1] += 1;
            col_ptr[c as usize + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        for j in 0..cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut fill = col_ptr.clone();
        let mut col_order = vec![0u32; cells.len()];
        for (idx, &(_, c)) in cells.iter().enumerate() {
            col_order[fill[c as usize] as usize] = idx as u32;
            fill[c as usize] += 1;
        }
        Occurrences {
            cells,
            row_ptr,
            col_ptr,
            col_order,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Index range into `cells` for one row.
    pub fn row_range(&self, row: usize) -> std::ops::Range<usize> {
        self.row_ptr[row] as usize..self.row_ptr[row + 1] as usize
    }

    /// Indices into `cells` for one column, in increasing row order.
    pub fn col_indices(&self, col: usize) -> &[u32] {
        &self.col_order[self.col_ptr[col] as usize..self.col_ptr[col + 1] as usize]
    }

    pub fn cols_in_row(&self, row: usize) -> impl Iterator<Item = u32> + '_ {
        self.cells[self.row_range(row)].iter().map(|&(_, c)| c)
    }

    pub fn rows_in_col(&self, col: usize) -> impl Iterator<Item = u32> + '_ {
        self.col_indices(col).iter().map(|&i| self.cells[i as usize].0)
    }

    /// Position of `(row, col)` in `cells`.
    pub fn index_of(&self, row: usize, col: usize) -> Option<usize> {
        let range = self.row_range(row);
        self.cells[range.clone()]
            .binary_search_by_key(&(col as u32), |&(_, c)| c)
            .ok()
            .map(|i| range.start + i)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct TableStats {
    pub rows: usize,
    pub cols: usize,
    pub nonzero: u64,
    pub distinct_values: usize,
    pub idempotent_cells: u64,
}

#[derive(Debug)]
pub struct ProductTable {
    kind: TableKind,
    policy: ZeroPolicy,
    field: Field,
    dim: usize,
    labels: Labels,
    n_rows: usize,
    n_cols: usize,
    values: Vec<Mat>,
    invertible: Vec<bool>,
    cells: Vec<Vid>,
    identity_vid: Option<Vid>,
    occurrences: Vec<OnceLock<Occurrences>>,
}

impl ProductTable {
    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn policy(&self) -> ZeroPolicy {
        self.policy
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    /// Side length of the square value matrices.
    pub fn value_dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.n_rows
    }

    pub fn cols(&self) -> usize {
        self.n_cols
    }

    pub fn value_count(&self) -> usize {
        self.values.len()
    }

    pub fn identity_vid(&self) -> Option<Vid> {
        self.identity_vid
    }

    /// The enumeration behind the row and column labels of `P_r`/`T_{n,r}`.
    pub fn enumeration(&self) -> Option<&Arc<Enumeration>> {
        match &self.labels {
            Labels::Rre(e) => Some(e),
            Labels::All { .. } => None,
        }
    }

    pub fn row_label(&self, row: usize) -> &Mat {
        match &self.labels {
            Labels::Rre(e) => &e.y_mats()[row],
            Labels::All { rows, .. } => &rows[row],
        }
    }

    pub fn col_label(&self, col: usize) -> &Mat {
        match &self.labels {
            Labels::Rre(e) => &e.x_mats()[col],
            Labels::All { cols, .. } => &cols[col],
        }
    }

    #[inline]
    pub fn cell(&self, row: usize, col: usize) -> Vid {
        self.cells[row * self.n_cols + col]
    }

    pub fn try_cell(&self, row: usize, col: usize) -> Result<Vid> {
        if row >= self.n_rows || col >= self.n_cols {
            return Err(Error::param(format!(
                "cell ({row}, {col}) outside a {}x{} table",
                self.n_rows, self.n_cols
            )));
        }
        Ok(self.cell(row, col))
    }

    pub fn cells(&self) -> &[Vid] {
        &self.cells
    }

    /// Decoded value. The zero marker decodes to the zero matrix.
    pub fn value(&self, vid: Vid) -> &Mat {
        &self.values[vid as usize]
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    pub fn is_zero_marker(&self, vid: Vid) -> bool {
        self.policy == ZeroPolicy::ZeroIfSingular && vid == ZERO_VID
    }

    pub fn is_invertible(&self, vid: Vid) -> bool {
        self.invertible[vid as usize]
    }

    pub fn vid_of(&self, value: &Mat) -> Option<Vid> {
        self.values
            .iter()
            .position(|v| v == value)
            .map(|i| i as Vid)
            .filter(|&v| !self.is_zero_marker(v))
    }

    /// Row and column index of one value, built on first use.
    pub fn occurrences(&self, vid: Vid) -> &Occurrences {
        self.occurrences[vid as usize].get_or_init(|| {
            let cells = self
                .cells
                .iter()
                .enumerate()
                .filter(|&(_, &v)| v == vid)
                .map(|(i, _)| ((i / self.n_cols) as u32, (i % self.n_cols) as u32))
                .collect();
            Occurrences::build(self.n_rows, self.n_cols, cells)
        })
    }

    /// Recompute one product from its labels.
    pub fn recompute(&self, row: usize, col: usize) -> Mat {
        self.row_label(row)
            .matmul(self.col_label(col))
            .expect("table labels have compatible shapes")
    }

    pub fn stats(&self) -> TableStats {
        let mut counts = vec![0u64; self.values.len()];
        for &v in &self.cells {
            counts[v as usize] += 1;
        }
        let mut nonzero = 0;
        let mut idempotent_cells = 0;
        let mut distinct = 0;
        for (vid, &c) in counts.iter().enumerate() {
            let vid = vid as Vid;
            if c == 0 || self.is_zero_marker(vid) {
                continue;
            }
            distinct += 1;
            if !self.values[vid as usize].is_zero() {
                nonzero += c;
            }
            if self.invertible[vid as usize] {
                idempotent_cells += c;
            }
        }
        TableStats {
            rows: self.n_rows,
            cols: self.n_cols,
            nonzero,
            distinct_values: distinct,
            idempotent_cells,
        }
    }
}

fn check_budget(what: &str, rows: usize, cols: usize, budget: u64) -> Result<()> {
    let needed = rows as u128 * cols as u128;
    if needed > budget as u128 {
        return Err(Error::Budget {
            what: what.to_string(),
            needed,
            budget: budget as u128,
        });
    }
    Ok(())
}

/// Products `row_i * col_j` as base-`q` codes of `dim x dim` matrices.
struct Kernel<'a> {
    field: &'a Field,
    dim: usize,
    inner: usize,
    rows: Vec<&'a [u8]>,
    cols_t: Vec<Vec<u8>>,
    prime: bool,
}

impl<'a> Kernel<'a> {
    fn new(field: &'a Field, dim: usize, inner: usize, rows: &'a [Mat], cols: &[Mat]) -> Self {
        Kernel {
            field,
            dim,
            inner,
            rows: rows.iter().map(|m| m.entries()).collect(),
            cols_t: cols.iter().map(|m| m.transpose().entries().to_vec()).collect(),
            prime: field.degree() == 1,
        }
    }

    #[inline]
    fn code(&self, row: usize, col: usize) -> u64 {
        let (y, xt) = (self.rows[row], &self.cols_t[col]);
        let q = self.field.q() as u64;
        let (d, len) = (self.dim, self.inner);
        let mut code = 0u64;
        let mut place = 1u64;
        for i in 0..d {
            let yi = &y[i * len..(i + 1) * len];
            for j in 0..d {
                let xj = &xt[j * len..(j + 1) * len];
                let e = if self.prime {
                    let s: u32 = yi.iter().zip(xj).map(|(&a, &b)| a as u32 * b as u32).sum();
                    (s % q as u32) as u64
                } else {
                    yi.iter()
                        .zip(xj)
                        .fold(0u8, |acc, (&a, &b)| self.field.add_code(acc, self.field.mul_code(a, b)))
                        as u64
                };
                code += e * place;
                place = place.wrapping_mul(q);
            }
        }
        code
    }

    fn row_codes(&self, row: usize, out: &mut Vec<u64>) {
        out.clear();
        out.extend((0..self.cols_t.len()).map(|c| self.code(row, c)));
    }
}

enum Interner {
    Dense(Vec<Vid>),
    Sparse(HashMap<u64, Vid>),
}

impl Interner {
    #[inline]
    fn get(&self, code: u64) -> Vid {
        match self {
            Interner::Dense(v) => v[code as usize],
            Interner::Sparse(m) => m[&code],
        }
    }
}

fn build_table(
    kind: TableKind,
    policy: ZeroPolicy,
    field: &Field,
    dim: usize,
    inner: usize,
    labels: Labels,
) -> Result<ProductTable> {
    let q = field.q() as u64;
    if (dim * dim) as f64 * (q as f64).log2() > 63.0 {
        return Err(Error::param(format!(
            "{dim}x{dim} values over F_{q} do not fit a 64-bit code"
        )));
    }
    let (row_mats, col_mats): (&[Mat], &[Mat]) = match &labels {
        Labels::Rre(e) => (e.y_mats(), e.x_mats()),
        Labels::All { rows, cols } => (rows, cols),
    };
    let (n_rows, n_cols) = (row_mats.len(), col_mats.len());
    let kernel = Kernel::new(field, dim, inner, row_mats, col_mats);

    // pass 1: distinct codes
    let distinct: HashSet<u64> = (0..n_rows)
        .into_par_iter()
        .fold(
            || (HashSet::new(), Vec::new()),
            |(mut set, mut buf), row| {
                kernel.row_codes(row, &mut buf);
                set.extend(buf.iter().copied());
                (set, buf)
            },
        )
        .map(|(set, _)| set)
        .reduce(HashSet::new, |mut a, b| {
            a.extend(b);
            a
        });
    let mut codes: Vec<u64> = distinct.into_iter().collect();
    codes.sort_unstable();

    // vid assignment: sorted by code; Rees tables put the zero marker first
    let identity_code = Mat::identity(field, dim).value_code();
    let mut values = Vec::new();
    let mut invertible = Vec::new();
    let mut code_to_vid: Vec<(u64, Vid)> = Vec::with_capacity(codes.len());
    if policy == ZeroPolicy::ZeroIfSingular {
        values.push(Mat::zeros(field, dim, dim));
        invertible.push(false);
    }
    for &code in &codes {
        let m = Mat::from_value_code(field, dim, dim, code);
        let inv = m.rank() == dim;
        if policy == ZeroPolicy::ZeroIfSingular && !inv {
            code_to_vid.push((code, ZERO_VID));
            continue;
        }
        if values.len() > Vid::MAX as usize {
            return Err(Error::param("more distinct values than a 16-bit id can hold"));
        }
        code_to_vid.push((code, values.len() as Vid));
        values.push(m);
        invertible.push(inv);
    }
    let identity_vid = code_to_vid
        .iter()
        .find(|&&(c, _)| c == identity_code)
        .map(|&(_, v)| v);

    let space = q.checked_pow((dim * dim) as u32);
    let interner = match space {
        Some(s) if s <= DENSE_LOOKUP_LIMIT => {
            let mut dense = vec![0 as Vid; s as usize];
            for &(c, v) in &code_to_vid {
                dense[c as usize] = v;
            }
            Interner::Dense(dense)
        }
        _ => Interner::Sparse(code_to_vid.iter().copied().collect()),
    };

    // pass 2: fill cells
    let mut cells = vec![0 as Vid; n_rows * n_cols];
    if n_cols > 0 {
        cells
            .par_chunks_mut(n_cols)
            .enumerate()
            .for_each_init(Vec::new, |buf, (row, out)| {
                kernel.row_codes(row, buf);
                for (slot, &code) in out.iter_mut().zip(buf.iter()) {
                    *slot = interner.get(code);
                }
            });
    }

    let occurrences = (0..values.len()).map(|_| OnceLock::new()).collect();
    Ok(ProductTable {
        kind,
        policy,
        field: field.clone(),
        dim,
        labels,
        n_rows,
        n_cols,
        values,
        invertible,
        cells,
        identity_vid,
        occurrences,
    })
}

/// The Rees structure matrix: `P(Y, X) = YX` when `YX` has rank `r`, else 0.
pub fn build_p(en: &Arc<Enumeration>, cell_budget: u64) -> Result<ProductTable> {
    let (n, r) = (en.n(), en.r());
    if r >= n {
        return Err(Error::param(format!("need 1 <= r < n, got n = {n}, r = {r}")));
    }
    check_budget(&format!("P_{r} at n = {n}"), en.len(), en.len(), cell_budget)?;
    build_table(
        TableKind::Rees { n, r },
        ZeroPolicy::ZeroIfSingular,
        en.field(),
        r,
        n,
        Labels::Rre(en.clone()),
    )
}

/// Every product `YX` over `Y_r x X_r`, singular ones included.
pub fn build_t_full(en: &Arc<Enumeration>, cell_budget: u64) -> Result<ProductTable> {
    let (n, r) = (en.n(), en.r());
    if r >= n {
        return Err(Error::param(format!("need 1 <= r < n, got n = {n}, r = {r}")));
    }
    check_budget(&format!("T_{{{n},{r}}}"), en.len(), en.len(), cell_budget)?;
    build_table(
        TableKind::Full { n, r },
        ZeroPolicy::KeepAll,
        en.field(),
        r,
        n,
        Labels::Rre(en.clone()),
    )
}

/// All `k x m` matrices `B` against all `m x k` matrices `A`, cells `BA`.
/// Labels are ordered by [`Mat::value_code`].
pub fn build_t_mk(m: usize, k: usize, field: &Field, side_budget: u64) -> Result<ProductTable> {
    if k == 0 || k > m {
        return Err(Error::param(format!("need 1 <= k <= m, got m = {m}, k = {k}")));
    }
    let q = field.q() as u64;
    let side = q
        .checked_pow((k * m) as u32)
        .filter(|&s| s <= side_budget)
        .ok_or_else(|| Error::Budget {
            what: format!("T_{{{m},{k}}} over F_{q}"),
            needed: (q as u128).saturating_pow((k * m) as u32).saturating_mul(1),
            budget: side_budget as u128,
        })?;
    let rows: Vec<Mat> = (0..side).map(|c| Mat::from_value_code(field, k, m, c)).collect();
    let cols: Vec<Mat> = (0..side).map(|c| Mat::from_value_code(field, m, k, c)).collect();
    build_table(
        TableKind::Mult { m, k },
        ZeroPolicy::KeepAll,
        field,
        k,
        m,
        Labels::All { rows, cols },
    )
}
