//! Singular squares of the rank-`r` class. A quadruple `(X, X', Y, Y')` of
//! labels with all four cells nonzero is singular exactly when
//! `P(Y,X) P(Y',X)^{-1} = P(Y,X') P(Y',X')^{-1}` in `GL_r`; this is taken as
//! the definition here (rectangular bands of the full linear monoid are
//! singular squares).

use serde::{Deserialize, Serialize};

use crate::enumeration::Enumeration;
use crate::error::{Error, Result};
use crate::matspace::{Mat, MatError};
use crate::tables::{ProductTable, ZeroPolicy};

/// Coordinates of a square: columns `x, x2` of `X_r`, rows `y, y2` of `Y_r`.
/// The four idempotents are `e_{x,y}, e_{x,y2}, e_{x2,y2}, e_{x2,y}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SingularSquare {
    pub x: u32,
    pub x2: u32,
    pub y: u32,
    pub y2: u32,
}

impl SingularSquare {
    pub fn new(x: usize, x2: usize, y: usize, y2: usize) -> Self {
        SingularSquare {
            x: x as u32,
            x2: x2 as u32,
            y: y as u32,
            y2: y2 as u32,
        }
    }

    /// Cells as `(row, col)`: `(y,x), (y2,x), (y,x2), (y2,x2)`.
    pub fn cells(&self) -> [(usize, usize); 4] {
        let (x, x2, y, y2) = (self.x as usize, self.x2 as usize, self.y as usize, self.y2 as usize);
        [(y, x), (y2, x), (y, x2), (y2, x2)]
    }

    pub fn is_degenerate(&self) -> bool {
        self.x == self.x2 || self.y == self.y2
    }
}

/// `a b^{-1} = c d^{-1}` for `a = YX, b = Y'X, c = YX', d = Y'X'`.
pub fn band_identity(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Result<bool> {
    let lhs = a.matmul(&b.inverse()?)?;
    let rhs = c.matmul(&d.inverse()?)?;
    Ok(lhs == rhs)
}

/// Evaluates the square criterion on a Rees table. A zero cell or a
/// degenerate square gives `false`; bad ids are an error.
pub fn is_singular(p: &ProductTable, sq: SingularSquare) -> Result<bool> {
    if p.policy() != ZeroPolicy::ZeroIfSingular {
        return Err(Error::param("singularity is evaluated on the Rees table"));
    }
    let mut vals = Vec::with_capacity(4);
    for (row, col) in sq.cells() {
        let v = p.try_cell(row, col)?;
        vals.push(v);
    }
    if sq.is_degenerate() || vals.iter().any(|&v| p.is_zero_marker(v)) {
        return Ok(false);
    }
    let [a, b, c, d] = [vals[0], vals[1], vals[2], vals[3]].map(|v| p.value(v));
    band_identity(a, b, c, d)
}

/// Same criterion recomputed from the label matrices, without any table.
pub fn is_singular_from_labels(en: &Enumeration, sq: SingularSquare) -> Result<bool> {
    if sq.is_degenerate() {
        return Ok(false);
    }
    let (ys, xs) = (en.y_mats(), en.x_mats());
    let get = |v: u32, len: usize| -> Result<usize> {
        ((v as usize) < len)
            .then_some(v as usize)
            .ok_or_else(|| Error::param(format!("label id {v} out of range")))
    };
    let (x, x2) = (get(sq.x, xs.len())?, get(sq.x2, xs.len())?);
    let (y, y2) = (get(sq.y, ys.len())?, get(sq.y2, ys.len())?);
    let prods = [
        ys[y].matmul(&xs[x])?,
        ys[y2].matmul(&xs[x])?,
        ys[y].matmul(&xs[x2])?,
        ys[y2].matmul(&xs[x2])?,
    ];
    match band_identity(&prods[0], &prods[1], &prods[2], &prods[3]) {
        Err(Error::Mat(MatError::Singular)) => Ok(false),
        other => other,
    }
}

/// The square certifying `f_B f_A = f_{AB}`:
/// rows `Y = [0|I|A|0]`, `Y' = [0|0|I|0]`, columns `X = [0;0;I;0]`,
/// `X' = [I;0;B;0]`, with cells `YX = A`, `YX' = AB`, `Y'X = I`, `Y'X' = B`.
#[derive(Debug, Clone)]
pub struct Stage3Square {
    pub y: Mat,
    pub y2: Mat,
    pub x: Mat,
    pub x2: Mat,
    pub a: Mat,
    pub b: Mat,
    pub ab: Mat,
}

impl Stage3Square {
    /// Ids in the enumeration, after checking each label is enumerated.
    pub fn locate(&self, en: &Enumeration) -> Result<SingularSquare> {
        let find = |id: Option<usize>, what: &str| {
            id.ok_or_else(|| Error::verification(format!("{what} is not an RRE label")))
        };
        Ok(SingularSquare::new(
            find(en.x_id(&self.x), "X")?,
            find(en.x_id(&self.x2), "X'")?,
            find(en.y_id(&self.y), "Y")?,
            find(en.y_id(&self.y2), "Y'")?,
        ))
    }
}

pub fn stage3_square(a: &Mat, b: &Mat, n: usize) -> Result<Stage3Square> {
    let r = a.rows();
    if a.cols() != r || b.rows() != r || b.cols() != r {
        return Err(Error::param("A and B must be square of the same size"));
    }
    if n <= 3 * r {
        return Err(Error::param(format!("need n > 3r, got n = {n}, r = {r}")));
    }
    if a.rank() < r || b.rank() < r {
        return Err(Error::Mat(MatError::Singular));
    }
    let field = a.field();
    let mut y = Mat::zeros(field, r, n);
    let mut y2 = Mat::zeros(field, r, n);
    let mut x = Mat::zeros(field, n, r);
    let mut x2 = Mat::zeros(field, n, r);
    let one = crate::gf::FqElem::ONE;
    for i in 0..r {
        y.set(i, r + i, one);
        y2.set(i, 2 * r + i, one);
        x.set(2 * r + i, i, one);
        x2.set(i, i, one);
        for j in 0..r {
            y.set(i, 2 * r + j, a.get(i, j));
            x2.set(2 * r + i, j, b.get(i, j));
        }
    }
    let ab = a.matmul(b)?;
    Ok(Stage3Square {
        y,
        y2,
        x,
        x2,
        a: a.clone(),
        b: b.clone(),
        ab,
    })
}

/// Every invertible `r x r` matrix, ordered by value code.
pub fn general_linear_group(field: &crate::gf::Field, r: usize) -> Result<Vec<Mat>> {
    let q = field.q() as u64;
    let total = q
        .checked_pow((r * r) as u32)
        .filter(|&t| t <= 1 << 24)
        .ok_or_else(|| Error::param(format!("GL_{r}(F_{q}) is too large to list")))?;
    Ok((0..total)
        .map(|c| Mat::from_value_code(field, r, r, c))
        .filter(|m| m.rank() == r)
        .collect())
}

/// Singular squares containing two cells that share a row or a column.
/// Cells are `(row, col)`.
pub fn squares_through<'a>(
    p: &'a ProductTable,
    cell: (usize, usize),
    other: (usize, usize),
) -> Result<Box<dyn Iterator<Item = SingularSquare> + 'a>> {
    let ((y, x), (y2, x2)) = (cell, other);
    p.try_cell(y, x)?;
    p.try_cell(y2, x2)?;
    if cell == other || (y != y2 && x != x2) {
        return Err(Error::param("cells must be distinct and share a row or a column"));
    }
    if y == y2 {
        Ok(Box::new((0..p.rows()).filter_map(move |y1| {
            let sq = SingularSquare::new(x, x2, y, y1);
            is_singular(p, sq).ok().filter(|&s| s).map(|_| sq)
        })))
    } else {
        Ok(Box::new((0..p.cols()).filter_map(move |x1| {
            let sq = SingularSquare::new(x, x1, y, y2);
            is_singular(p, sq).ok().filter(|&s| s).map(|_| sq)
        })))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumeration::enumerate_y;
    use crate::gf::{make_field, Field};
    use crate::matspace::{scattered_identity, SubsetR};
    use crate::tables::{build_p, DEFAULT_CELL_BUDGET};
    use std::sync::Arc;

    fn setup(n: usize, r: usize, q: u32) -> (Field, Arc<Enumeration>, ProductTable) {
        let f = make_field(q, None).unwrap();
        let en = Arc::new(enumerate_y(n, r, &f).unwrap());
        let p = build_p(&en, DEFAULT_CELL_BUDGET).unwrap();
        (f, en, p)
    }

    #[test]
    fn all_identity_square_is_singular() {
        let (_, _, p) = setup(4, 1, 2);
        let id = p.identity_vid().unwrap();
        let occ = p.occurrences(id);
        // find a 4-cycle of identity cells
        let mut found = false;
        'search: for &(y, x) in &occ.cells {
            for x2 in occ.cols_in_row(y as usize).filter(|&c| c != x) {
                for y2 in occ.rows_in_col(x as usize).filter(|&r| r != y) {
                    if p.cell(y2 as usize, x2 as usize) == id {
                        let sq = SingularSquare::new(x as usize, x2 as usize, y as usize, y2 as usize);
                        assert!(is_singular(&p, sq).unwrap());
                        found = true;
                        break 'search;
                    }
                }
            }
        }
        assert!(found);
    }

    #[test]
    fn stage3_scalar_example() {
        let (f, en, p) = setup(4, 1, 3);
        let two = Mat::from_rows(&f, &[&[2]]).unwrap();
        let s3 = stage3_square(&two, &two, 4).unwrap();
        assert_eq!(s3.ab, Mat::identity(&f, 1));
        let sq = s3.locate(&en).unwrap();
        let vals: Vec<&Mat> = sq.cells().iter().map(|&(r, c)| p.value(p.cell(r, c))).collect();
        // (y,x) = A, (y2,x) = I, (y,x2) = AB, (y2,x2) = B
        assert_eq!(vals, vec![&two, &Mat::identity(&f, 1), &s3.ab, &two]);
        assert!(is_singular(&p, sq).unwrap());
        assert!(is_singular_from_labels(&en, sq).unwrap());
    }

    #[test]
    fn stage3_identity_example() {
        let (f, en, p) = setup(4, 1, 2);
        let i = Mat::identity(&f, 1);
        let sq = stage3_square(&i, &i, 4).unwrap().locate(&en).unwrap();
        assert!(!sq.is_degenerate());
        let id = p.identity_vid().unwrap();
        assert!(sq.cells().iter().all(|&(r, c)| p.cell(r, c) == id));
    }

    #[test]
    fn stage3_exhaustive_gl2_f2() {
        let (f, en, p) = setup(7, 2, 2);
        let gl = general_linear_group(&f, 2).unwrap();
        assert_eq!(gl.len(), 6);
        for a in &gl {
            for b in &gl {
                let s3 = stage3_square(a, b, 7).unwrap();
                for m in [&s3.y, &s3.y2] {
                    assert!(m.is_rre());
                }
                for m in [&s3.x, &s3.x2] {
                    assert!(m.transpose().is_rre());
                }
                let sq = s3.locate(&en).unwrap();
                assert_eq!(p.value(p.cell(sq.y as usize, sq.x as usize)), a);
                assert_eq!(p.value(p.cell(sq.y as usize, sq.x2 as usize)), &a.matmul(b).unwrap());
                assert_eq!(p.cell(sq.y2 as usize, sq.x as usize), p.identity_vid().unwrap());
                assert_eq!(p.value(p.cell(sq.y2 as usize, sq.x2 as usize)), b);
                assert!(is_singular(&p, sq).unwrap());
            }
        }
    }

    #[test]
    fn stage3_rejects_bad_inputs() {
        let f = make_field(3, None).unwrap();
        let i = Mat::identity(&f, 1);
        let zero = Mat::zeros(&f, 1, 1);
        assert!(stage3_square(&i, &i, 3).is_err());
        assert!(stage3_square(&zero, &i, 4).is_err());
    }

    #[test]
    fn nonsingular_square_exists_for_f3_lines() {
        // brute force: a square with cells 1, 1, 1, 2 fails the criterion
        let (f, _, p) = setup(4, 1, 3);
        let one = p.vid_of(&Mat::identity(&f, 1)).unwrap();
        let two = p.vid_of(&Mat::from_rows(&f, &[&[2]]).unwrap()).unwrap();
        let mut witness = None;
        'outer: for y in 0..p.rows() {
            for y2 in 0..p.rows() {
                for x in 0..p.cols() {
                    for x2 in 0..p.cols() {
                        let sq = SingularSquare::new(x, x2, y, y2);
                        let v: Vec<_> = sq.cells().iter().map(|&(r, c)| p.cell(r, c)).collect();
                        if !sq.is_degenerate() && v == [one, one, one, two] {
                            witness = Some(sq);
                            break 'outer;
                        }
                    }
                }
            }
        }
        let sq = witness.expect("such a quadruple exists");
        assert!(!is_singular(&p, sq).unwrap());
    }

    #[test]
    fn swapping_both_pairs_preserves_singularity() {
        let (_, _, p) = setup(4, 1, 3);
        let mut checked = 0;
        for y in 0..6 {
            for y2 in 6..12 {
                for x in 0..p.cols() {
                    for x2 in 0..p.cols() {
                        let sq = SingularSquare::new(x, x2, y, y2);
                        let sw = SingularSquare::new(x2, x, y2, y);
                        assert_eq!(is_singular(&p, sq).unwrap(), is_singular(&p, sw).unwrap());
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn squares_through_row_pair_with_identity_witness() {
        let (f, en, p) = setup(4, 1, 2);
        // I(1) row against columns I(1)^T and I(1,2)-shaped columns both give 1
        let y = en.y_id(&scattered_identity(&f, 4, &SubsetR::initial(1)).unwrap()).unwrap();
        let id = p.identity_vid().unwrap();
        let cols: Vec<usize> = (0..p.cols()).filter(|&c| p.cell(y, c) == id).collect();
        assert!(cols.len() >= 2);
        let squares: Vec<_> = squares_through(&p, (y, cols[0]), (y, cols[1])).unwrap().collect();
        assert!(!squares.is_empty());
        for sq in &squares {
            assert!(is_singular(&p, *sq).unwrap());
        }
        let col_squares: Vec<_> = squares_through(&p, (y, cols[0]), ((y + 1) % p.rows(), cols[0]))
            .unwrap()
            .collect();
        for sq in &col_squares {
            assert_eq!(sq.x, cols[0] as u32);
        }
        assert!(squares_through(&p, (0, 0), (1, 1)).is_err());
        assert!(squares_through(&p, (0, 0), (0, 0)).is_err());
    }

    #[test]
    fn bad_ids_are_errors() {
        let (_, _, p) = setup(4, 1, 2);
        assert!(is_singular(&p, SingularSquare::new(0, 1, 2, 99)).is_err());
    }
}
