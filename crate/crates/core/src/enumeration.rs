//! Enumeration of `Y_r` (rank-`r` RRE matrices of shape `r x n`) and `X_r`
//! (their transposes), grouped into regions by leading columns, plus the
//! tree order on regions.

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use crate::counts::gaussian_binomial;
use crate::error::{Error, Result};
use crate::gf::Field;
use crate::matspace::{Mat, SubsetR};

/// Default cap on `|Y_r|` for a single enumeration.
pub const DEFAULT_MAX_ITEMS: u64 = 10_000_000;

#[derive(Debug, Clone)]
pub struct Region {
    pub subset: SubsetR,
    pub ids: Range<usize>,
}

/// A row label of the structure matrix.
#[derive(Debug, Clone, Copy)]
pub struct YIndex<'a> {
    pub id: usize,
    pub mat: &'a Mat,
    pub region: &'a SubsetR,
}

/// A column label; `mat` is `n x r` and its transpose is RRE.
#[derive(Debug, Clone, Copy)]
pub struct XIndex<'a> {
    pub id: usize,
    pub mat: &'a Mat,
    pub region: &'a SubsetR,
}

/// `Y_r` and `X_r` with dense ids. The id of `X` is the id of `X^T` in `Y_r`.
#[derive(Debug, Clone)]
pub struct Enumeration {
    n: usize,
    r: usize,
    field: Field,
    ys: Vec<Mat>,
    xs: Vec<Mat>,
    region_of: Vec<u32>,
    regions: Vec<Region>,
    lookup: HashMap<Vec<u8>, u32>,
}

impl Enumeration {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn y_mats(&self) -> &[Mat] {
        &self.ys
    }

    pub fn x_mats(&self) -> &[Mat] {
        &self.xs
    }

    pub fn y(&self, id: usize) -> YIndex<'_> {
        YIndex {
            id,
            mat: &self.ys[id],
            region: &self.regions[self.region_of[id] as usize].subset,
        }
    }

    pub fn x(&self, id: usize) -> XIndex<'_> {
        XIndex {
            id,
            mat: &self.xs[id],
            region: &self.regions[self.region_of[id] as usize].subset,
        }
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region_index(&self, id: usize) -> usize {
        self.region_of[id] as usize
    }

    pub fn region_by_subset(&self, s: &SubsetR) -> Option<&Region> {
        self.regions
            .binary_search_by(|reg| reg.subset.cmp(s))
            .ok()
            .map(|i| &self.regions[i])
    }

    /// Id of an `r x n` RRE matrix in `Y_r`.
    pub fn y_id(&self, m: &Mat) -> Option<usize> {
        if m.rows() != self.r || m.cols() != self.n {
            return None;
        }
        self.lookup.get(m.entries()).map(|&i| i as usize)
    }

    /// Id of an `n x r` matrix in `X_r`.
    pub fn x_id(&self, m: &Mat) -> Option<usize> {
        if m.rows() != self.n || m.cols() != self.r {
            return None;
        }
        self.y_id(&m.transpose())
    }
}

pub fn enumerate_y(n: usize, r: usize, field: &Field) -> Result<Enumeration> {
    enumerate_y_capped(n, r, field, DEFAULT_MAX_ITEMS)
}

/// Enumerate `Y_r` region by region. Within a region the free entries
/// (right of each pivot, outside every pivot column) run through all
/// `q^free` assignments in lexicographic order.
pub fn enumerate_y_capped(n: usize, r: usize, field: &Field, max_items: u64) -> Result<Enumeration> {
    if r == 0 || r > n {
        return Err(Error::param(format!("need 1 <= r <= n, got n = {n}, r = {r}")));
    }
    let expected = gaussian_binomial(n as u32, r as u32, field.q() as u64)?;
    if expected > max_items.into() {
        return Err(Error::Budget {
            what: format!("enumerating Y_{r} for n = {n}, q = {}", field.q()),
            needed: expected.try_into().unwrap_or(u128::MAX),
            budget: max_items as u128,
        });
    }
    let q = field.q() as u8;
    let mut ys = Vec::new();
    let mut region_of = Vec::new();
    let mut regions = Vec::new();
    for subset in SubsetR::all(n, r) {
        let start = ys.len();
        let pivots: Vec<usize> = subset.indices().iter().map(|&i| i - 1).collect();
        let free: Vec<usize> = pivots
            .iter()
            .enumerate()
            .flat_map(|(row, &p)| {
                let pivots = &pivots;
                (p + 1..n)
                    .filter(move |c| !pivots.contains(c))
                    .map(move |c| row * n + c)
            })
            .collect();
        let mut base = vec![0u8; r * n];
        for (row, &p) in pivots.iter().enumerate() {
            base[row * n + p] = 1;
        }
        let mut digits = vec![0u8; free.len()];
        'assignments: loop {
            let mut e = base.clone();
            for (&pos, &d) in free.iter().zip(&digits) {
                e[pos] = d;
            }
            ys.push(Mat::from_raw(field, r, n, e));
            region_of.push(regions.len() as u32);
            // odometer, last free position least significant
            let mut k = digits.len();
            loop {
                if k == 0 {
                    break 'assignments;
                }
                k -= 1;
                digits[k] += 1;
                if digits[k] < q {
                    continue 'assignments;
                }
                digits[k] = 0;
            }
        }
        regions.push(Region {
            subset,
            ids: start..ys.len(),
        });
    }
    let xs = ys.iter().map(Mat::transpose).collect();
    let lookup = ys
        .iter()
        .enumerate()
        .map(|(i, m)| (m.entries().to_vec(), i as u32))
        .collect();
    Ok(Enumeration {
        n,
        r,
        field: field.clone(),
        ys,
        xs,
        region_of,
        regions,
        lookup,
    })
}

/// The unique subset covered by `s` in the tree order: decrement `a_m` at
/// the smallest `m` with `a_m != m`.
pub fn hasse_parent(s: &SubsetR) -> Result<SubsetR> {
    let idx = s.indices();
    let m = idx
        .iter()
        .enumerate()
        .position(|(k, &a)| a != k + 1)
        .ok_or_else(|| Error::param(format!("{s} is the minimum and has no parent")))?;
    let mut v = idx.to_vec();
    v[m] -= 1;
    Ok(SubsetR::new(v)?)
}

/// `s ⪯ t`: `s` lies on the path from `t` down to `{1..r}`.
pub fn preceq(s: &SubsetR, t: &SubsetR) -> bool {
    if s.len() != t.len() {
        return false;
    }
    let mut cur = t.clone();
    loop {
        if &cur == s {
            return true;
        }
        match hasse_parent(&cur) {
            Ok(p) => cur = p,
            Err(_) => return false,
        }
    }
}

/// Parent map of the Hasse tree on `r`-subsets of `{1..n}`.
#[derive(Debug, Clone)]
pub struct RegionOrder {
    pub root: SubsetR,
    pub parent: BTreeMap<SubsetR, SubsetR>,
}

impl RegionOrder {
    pub fn new(n: usize, r: usize) -> Result<Self> {
        if r == 0 || r > n {
            return Err(Error::param(format!("need 1 <= r <= n, got n = {n}, r = {r}")));
        }
        let root = SubsetR::initial(r);
        let parent = SubsetR::all(n, r)
            .into_iter()
            .filter(|s| *s != root)
            .map(|s| {
                let p = hasse_parent(&s)?;
                Ok((s, p))
            })
            .collect::<Result<_>>()?;
        Ok(RegionOrder { root, parent })
    }
}
