//! Dense matrices over `F_q`, reduced row echelon forms and the scattered
//! identity constructors used to index the rank-`r` structure.

use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf::{Field, FieldError, FqElem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrices live over different fields")]
    FieldMismatch,
    #[error("matrix is not in reduced row echelon form")]
    NotRre,
    #[error("matrix has rank {rank}, expected full row rank {rows}")]
    RankDeficient { rank: usize, rows: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("index sets overlap at column {0}")]
    Overlap(usize),
    #[error("index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("subset indices must be strictly increasing and start at 1")]
    BadSubset,
    #[error("malformed matrix text: {0}")]
    Parse(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// An `r`-element subset `{i_1 < ... < i_r}` of `{1..n}` (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct SubsetR(Vec<usize>);

impl SubsetR {
    pub fn new(indices: Vec<usize>) -> Result<Self, MatError> {
        if indices.first().is_some_and(|&i| i == 0) || indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MatError::BadSubset);
        }
        Ok(SubsetR(indices))
    }

    /// `{1, ..., r}`
    pub fn initial(r: usize) -> Self {
        SubsetR((1..=r).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> usize {
        self.0.last().copied().unwrap_or(0)
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// All `r`-subsets of `{1..n}` in lexicographic order.
    pub fn all(n: usize, r: usize) -> Vec<SubsetR> {
        let mut out = Vec::new();
        if r > n {
            return out;
        }
        let mut cur: Vec<usize> = (1..=r).collect();
        loop {
            out.push(SubsetR(cur.clone()));
            // advance the rightmost index that still has room
            let mut j = r;
            while j > 0 && cur[j - 1] == n - r + j {
                j -= 1;
            }
            if j == 0 {
                break;
            }
            cur[j - 1] += 1;
            for k in j..r {
                cur[k] = cur[k - 1] + 1;
            }
        }
        out
    }
}

impl TryFrom<Vec<usize>> for SubsetR {
    type Error = MatError;
    fn try_from(v: Vec<usize>) -> Result<Self, MatError> {
        SubsetR::new(v)
    }
}

impl From<SubsetR> for Vec<usize> {
    fn from(s: SubsetR) -> Vec<usize> {
        s.0
    }
}

impl fmt::Display for SubsetR {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Dense row-major matrix of field codes. Equality and hashing look only at
/// the shape and the entries.
#[derive(Clone)]
pub struct Mat {
    rows: usize,
    cols: usize,
    entries: Vec<u8>,
    field: Field,
}

impl PartialEq for Mat {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.entries == other.entries
    }
}

impl Eq for Mat {}

impl Hash for Mat {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rows.hash(state);
        self.cols.hash(state);
        self.entries.hash(state);
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for (j, c) in self.row(i).iter().enumerate() {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{c}")?;
            }
        }
        write!(f, "]")
    }
}

impl fmt::Display for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl Mat {
    pub fn new(field: &Field, rows: usize, cols: usize, entries: Vec<u8>) -> Result<Self, MatError> {
        if entries.len() != rows * cols {
            return Err(MatError::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if let Some(&c) = entries.iter().find(|&&c| c as u32 >= field.q()) {
            return Err(FieldError::BadCode { code: c as u32, q: field.q() }.into());
        }
        Ok(Mat {
            rows,
            cols,
            entries,
            field: field.clone(),
        })
    }

    /// Build from nested rows of codes; convenient in tests.
    pub fn from_rows(field: &Field, rows: &[&[u8]]) -> Result<Self, MatError> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(MatError::Dimension("ragged rows".into()));
        }
        Mat::new(field, rows.len(), cols, rows.concat())
    }

    pub(crate) fn from_raw(field: &Field, rows: usize, cols: usize, entries: Vec<u8>) -> Self {
        debug_assert_eq!(entries.len(), rows * cols);
        Mat {
            rows,
            cols,
            entries,
            field: field.clone(),
        }
    }

    pub fn zeros(field: &Field, rows: usize, cols: usize) -> Self {
        Mat::from_raw(field, rows, cols, vec![0; rows * cols])
    }

    pub fn identity(field: &Field, n: usize) -> Self {
        let mut m = Mat::zeros(field, n, n);
        for i in 0..n {
            m.entries[i * n + i] = 1;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// 0-based entry access.
    pub fn get(&self, i: usize, j: usize) -> FqElem {
        FqElem(self.entries[i * self.cols + j])
    }

    pub fn set(&mut self, i: usize, j: usize, v: FqElem) {
        self.entries[i * self.cols + j] = v.0;
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&c| c == 0)
    }

    pub fn transpose(&self) -> Mat {
        let mut out = vec![0u8; self.entries.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.entries[i * self.cols + j];
            }
        }
        Mat::from_raw(&self.field, self.cols, self.rows, out)
    }

    fn check_field(&self, other: &Mat) -> Result<(), MatError> {
        if self.field == other.field {
            Ok(())
        } else {
            Err(MatError::FieldMismatch)
        }
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat, MatError> {
        self.check_field(other)?;
        if self.cols != other.rows {
            return Err(MatError::Dimension(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let f = &self.field;
        let mut out = vec![0u8; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.entries[i * self.cols + k];
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.entries[k * other.cols + j];
                    let cell = &mut out[i * other.cols + j];
                    *cell = f.add_code(*cell, f.mul_code(a, b));
                }
            }
        }
        Ok(Mat::from_raw(f, self.rows, other.cols, out))
    }

    /// Reduced row echelon form and the 0-based pivot columns.
    fn reduce(&self) -> (Mat, Vec<usize>) {
        let f = &self.field;
        let (rows, cols) = (self.rows, self.cols);
        let mut m = self.entries.clone();
        let mut pivots = Vec::new();
        let mut pr = 0;
        for c in 0..cols {
            if pr == rows {
                break;
            }
            let Some(sel) = (pr..rows).find(|&i| m[i * cols + c] != 0) else {
                continue;
            };
            if sel != pr {
                for j in 0..cols {
                    m.swap(sel * cols + j, pr * cols + j);
                }
            }
            let inv = f.inv_code(m[pr * cols + c]);
            for j in 0..cols {
                m[pr * cols + j] = f.mul_code(m[pr * cols + j], inv);
            }
            for i in 0..rows {
                let factor = m[i * cols + c];
                if i == pr || factor == 0 {
                    continue;
                }
                let nf = f.neg_code(factor);
                for j in 0..cols {
                    let t = f.mul_code(nf, m[pr * cols + j]);
                    m[i * cols + j] = f.add_code(m[i * cols + j], t);
                }
            }
            pivots.push(c);
            pr += 1;
        }
        (Mat::from_raw(f, rows, cols, m), pivots)
    }

    pub fn rank(&self) -> usize {
        self.reduce().1.len()
    }

    pub fn rre(&self) -> Mat {
        self.reduce().0
    }

    /// Leading 1s, each the only nonzero entry of its column, staircase order,
    /// zero rows last.
    pub fn is_rre(&self) -> bool {
        let mut last_pivot: Option<usize> = None;
        let mut seen_zero_row = false;
        for i in 0..self.rows {
            let row = self.row(i);
            match row.iter().position(|&c| c != 0) {
                None => seen_zero_row = true,
                Some(p) => {
                    if seen_zero_row || row[p] != 1 || last_pivot.is_some_and(|lp| p <= lp) {
                        return false;
                    }
                    if (0..self.rows).any(|k| k != i && self.entries[k * self.cols + p] != 0) {
                        return false;
                    }
                    last_pivot = Some(p);
                }
            }
        }
        true
    }

    /// `LC(M)`: the 1-based leading columns of a full-row-rank RRE matrix.
    pub fn leading_cols(&self) -> Result<SubsetR, MatError> {
        if !self.is_rre() {
            return Err(MatError::NotRre);
        }
        let mut lc = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            match self.row(i).iter().position(|&c| c != 0) {
                Some(p) => lc.push(p + 1),
                None => {
                    return Err(MatError::RankDeficient {
                        rank: lc.len(),
                        rows: self.rows,
                    })
                }
            }
        }
        Ok(SubsetR(lc))
    }

    /// `LR(M)`: leading rows of a matrix whose transpose is RRE.
    pub fn leading_rows(&self) -> Result<SubsetR, MatError> {
        self.transpose().leading_cols()
    }

    pub fn inverse(&self) -> Result<Mat, MatError> {
        if self.rows != self.cols {
            return Err(MatError::Dimension("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut aug = vec![0u8; n * 2 * n];
        for i in 0..n {
            aug[i * 2 * n..i * 2 * n + n].copy_from_slice(self.row(i));
            aug[i * 2 * n + n + i] = 1;
        }
        let (red, pivots) = Mat::from_raw(&self.field, n, 2 * n, aug).reduce();
        if pivots.len() < n || pivots[n - 1] >= n {
            return Err(MatError::Singular);
        }
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            out.extend_from_slice(&red.row(i)[n..]);
        }
        Ok(Mat::from_raw(&self.field, n, n, out))
    }

    /// Row spaces agree iff the nonzero rows of the RRE forms agree.
    pub fn row_space_equal(&self, other: &Mat) -> bool {
        if self.field != other.field || self.cols != other.cols {
            return false;
        }
        let (a, ra) = self.reduce();
        let (b, rb) = other.reduce();
        ra == rb && a.entries[..ra.len() * self.cols] == b.entries[..rb.len() * other.cols]
    }

    pub fn col_space_equal(&self, other: &Mat) -> bool {
        self.transpose().row_space_equal(&other.transpose())
    }

    /// Base-`q` integer code of the entries, row-major, least significant
    /// first. Unique per shape as long as `q^(rows*cols)` fits in 64 bits.
    pub fn value_code(&self) -> u64 {
        let q = self.field.q() as u64;
        self.entries.iter().rev().fold(0u64, |acc, &c| acc * q + c as u64)
    }

    pub fn from_value_code(field: &Field, rows: usize, cols: usize, mut code: u64) -> Mat {
        let q = field.q() as u64;
        let mut e = vec![0u8; rows * cols];
        for slot in e.iter_mut() {
            *slot = (code % q) as u8;
            code /= q;
        }
        Mat::from_raw(field, rows, cols, e)
    }

    /// `rows cols q : d d d ...` with one hex digit per entry.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {} :", self.rows, self.cols, self.field.q());
        for &c in &self.entries {
            s.push(' ');
            s.push(char::from_digit(c as u32, 16).unwrap_or('?'));
        }
        s
    }

    pub fn parse_text(field: &Field, text: &str) -> Result<Mat, MatError> {
        let (head, body) = text
            .split_once(':')
            .ok_or_else(|| MatError::Parse("missing ':'".into()))?;
        let nums: Vec<&str> = head.split_whitespace().collect();
        if nums.len() != 3 {
            return Err(MatError::Parse("header must be `rows cols q`".into()));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| MatError::Parse(format!("bad integer {s:?}")))
        };
        let (rows, cols, q) = (parse(nums[0])?, parse(nums[1])?, parse(nums[2])?);
        if q != field.q() as usize {
            return Err(MatError::Parse(format!("q = {q} but field has q = {}", field.q())));
        }
        if q > 16 {
            return Err(MatError::Parse("text form supports q <= 16".into()));
        }
        let size = rows
            .checked_mul(cols)
            .ok_or_else(|| MatError::Parse("dimensions overflow".into()))?;
        let mut entries = Vec::with_capacity(size.min(body.len()));
        for tok in body.split_whitespace() {
            let mut chars = tok.chars();
            let d = match (chars.next(), chars.next()) {
                (Some(c), None) => c.to_digit(16),
                _ => None,
            }
            .ok_or_else(|| MatError::Parse(format!("bad digit {tok:?}")))?;
            entries.push(d as u8);
        }
        if entries.len() != size {
            return Err(MatError::Parse(format!("expected {size} digits, found {}", entries.len())));
        }
        Mat::new(field, rows, cols, entries)
    }
}

/// `I(i_1|...|i_r)`: the `r x n` matrix with 1 at `(j, i_j)`.
pub fn scattered_identity(field: &Field, n: usize, s: &SubsetR) -> Result<Mat, MatError> {
    let sets: Vec<Vec<usize>> = s.indices().iter().map(|&i| vec![i]).collect();
    scattered_identity_sets(field, n, &sets)
}

/// `I(A_1|...|A_k)`: row `j` carries a 1 in every column of `A_j`.
pub fn scattered_identity_sets(field: &Field, n: usize, sets: &[Vec<usize>]) -> Result<Mat, MatError> {
    let mut m = Mat::zeros(field, sets.len(), n);
    let mut used = vec![false; n + 1];
    for (j, set) in sets.iter().enumerate() {
        for &a in set {
            if a == 0 || a > n {
                return Err(MatError::IndexOutOfRange { index: a, n });
            }
            if used[a] {
                return Err(MatError::Overlap(a));
            }
            used[a] = true;
            m.entries[j * n + a - 1] = 1;
        }
    }
    Ok(m)
}

/// The idempotent in `R(X) ∩ L(Y)`, namely `X (YX)^{-1} Y`.
pub fn idempotent_of(x: &Mat, y: &Mat) -> Result<Mat, MatError> {
    let yx = y.matmul(x)?;
    let inv = yx.inverse()?;
    x.matmul(&inv)?.matmul(y)
}
