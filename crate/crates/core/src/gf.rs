//! Finite field arithmetic over `F_q` via precomputed operation tables.
//!
//! Elements are canonical codes `0..q`. For a prime `q` the code is the
//! residue; for `q = p^k` the code of `c_0 + c_1 x + ... + c_{k-1} x^{k-1}`
//! is `c_0 + c_1 p + ... + c_{k-1} p^{k-1}`. Code 0 is the additive identity
//! and code 1 the multiplicative identity in both cases.
//!
//! Only commutative fields are modelled, so left and right scalar
//! multiplication coincide everywhere downstream.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Largest supported field size; element codes must fit in a byte.
pub const MAX_Q: u32 = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("q = {0} is not a prime power")]
    NotPrimePower(u32),
    #[error("q = {0} is outside the supported range 2..={MAX_Q}")]
    OutOfRange(u32),
    #[error("no built-in irreducible polynomial for q = {0}; supply one")]
    MissingPolynomial(u32),
    #[error("modulus has degree {got}, expected {expected}")]
    WrongDegree { expected: usize, got: usize },
    #[error("modulus coefficient {0} is not reduced mod p")]
    BadCoefficient(u32),
    #[error("modulus is reducible over F_{0}")]
    Reducible(u32),
    #[error("polynomial supplied for prime q = {0} must be linear")]
    UnexpectedPolynomial(u32),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("element code {code} out of range for q = {q}")]
    BadCode { code: u32, q: u32 },
}

/// A field element, stored as its canonical code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FqElem(pub u8);

impl FqElem {
    pub const ZERO: FqElem = FqElem(0);
    pub const ONE: FqElem = FqElem(1);

    pub fn code(self) -> u8 {
        self.0
    }
}

impl fmt::Display for FqElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Shared handle to an immutable field context.
pub type Field = Arc<FieldCtx>;

/// Arithmetic context for `F_q`.
#[derive(Clone)]
pub struct FieldCtx {
    q: u32,
    p: u32,
    deg: u32,
    modulus: Vec<u32>,
    add: Vec<u8>,
    mul: Vec<u8>,
    neg: Vec<u8>,
    inv: Vec<u8>,
}

impl fmt::Debug for FieldCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldCtx")
            .field("q", &self.q)
            .field("p", &self.p)
            .field("deg", &self.deg)
            .field("modulus", &self.modulus)
            .finish()
    }
}

impl PartialEq for FieldCtx {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.modulus == other.modulus
    }
}

impl Eq for FieldCtx {}

/// Built-in monic irreducible moduli, coefficients low degree first.
pub fn builtin_modulus(q: u32) -> Option<Vec<u32>> {
    match q {
        4 => Some(vec![1, 1, 1]),    // x^2 + x + 1
        8 => Some(vec![1, 1, 0, 1]), // x^3 + x + 1
        9 => Some(vec![1, 0, 1]),    // x^2 + 1
        _ => None,
    }
}

/// `Some((p, k))` when `q = p^k` with `p` prime.
pub fn prime_power(q: u32) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let mut p = 2;
    while p * p <= q && !q.is_multiple_of(p) {
        p += 1;
    }
    if !q.is_multiple_of(p) {
        // q itself is prime
        return Some((q, 1));
    }
    let (mut rest, mut deg) = (q, 0);
    while rest % p == 0 {
        rest /= p;
        deg += 1;
    }
    (rest == 1).then_some((p, deg))
}

/// Build `F_q`. Prime `q` uses modular arithmetic; `q = p^k` with `k > 1`
/// needs a degree-`k` irreducible modulus, either supplied or built in.
pub fn make_field(q: u32, irreducible_poly: Option<&[u32]>) -> Result<Field, FieldError> {
    if !(2..=MAX_Q).contains(&q) {
        return Err(FieldError::OutOfRange(q));
    }
    let (p, deg) = prime_power(q).ok_or(FieldError::NotPrimePower(q))?;
    let modulus = match (deg, irreducible_poly) {
        (1, None) => vec![0, 1],
        (1, Some(poly)) => {
            if poly.len() != 2 || poly[1] % p == 0 {
                return Err(FieldError::UnexpectedPolynomial(q));
            }
            vec![0, 1]
        }
        (_, Some(poly)) => poly.to_vec(),
        (_, None) => builtin_modulus(q).ok_or(FieldError::MissingPolynomial(q))?,
    };
    FieldCtx::from_modulus(p, deg, modulus).map(Arc::new)
}

impl FieldCtx {
    fn from_modulus(p: u32, deg: u32, modulus: Vec<u32>) -> Result<Self, FieldError> {
        let q = p.pow(deg);
        if let Some(&c) = modulus.iter().find(|&&c| c >= p) {
            return Err(FieldError::BadCoefficient(c));
        }
        let mut modulus = modulus;
        while modulus.len() > 1 && *modulus.last().unwrap() == 0 {
            modulus.pop();
        }
        if modulus.len() != deg as usize + 1 {
            return Err(FieldError::WrongDegree {
                expected: deg as usize,
                got: modulus.len().saturating_sub(1),
            });
        }
        // normalise to monic
        let lead = *modulus.last().unwrap();
        let lead_inv = (1..p).find(|&t| t * lead % p == 1).unwrap();
        for c in modulus.iter_mut() {
            *c = *c * lead_inv % p;
        }

        let n = q as usize;
        let d = deg as usize;
        let digits = |code: u32| -> Vec<u32> {
            let mut v = vec![0; d];
            let mut c = code;
            for slot in v.iter_mut() {
                *slot = c % p;
                c /= p;
            }
            v
        };
        let encode = |v: &[u32]| -> u32 { v.iter().rev().fold(0, |acc, &c| acc * p + c) };

        let mut add = vec![0u8; n * n];
        let mut mul = vec![0u8; n * n];
        for a in 0..q {
            let da = digits(a);
            for b in 0..q {
                let db = digits(b);
                let sum: Vec<u32> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
                add[(a * q + b) as usize] = encode(&sum) as u8;

                // schoolbook product then reduce by the monic modulus
                let mut prod = vec![0u32; 2 * d];
                for (i, x) in da.iter().enumerate() {
                    for (j, y) in db.iter().enumerate() {
                        prod[i + j] = (prod[i + j] + x * y) % p;
                    }
                }
                for top in (d..2 * d).rev() {
                    let c = prod[top];
                    if c == 0 {
                        continue;
                    }
                    for (k, m) in modulus.iter().enumerate().take(d) {
                        let idx = top - d + k;
                        prod[idx] = (prod[idx] + (p - c) * m) % p;
                    }
                    prod[top] = 0;
                }
                mul[(a * q + b) as usize] = encode(&prod[..d]) as u8;
            }
        }

        let mut neg = vec![0u8; n];
        let mut inv = vec![0u8; n];
        for a in 0..n {
            neg[a] = (0..n).find(|&b| add[a * n + b] == 0).unwrap() as u8;
            if a != 0 {
                match (1..n).find(|&b| mul[a * n + b] == 1) {
                    Some(b) => inv[a] = b as u8,
                    None => return Err(FieldError::Reducible(p)),
                }
            }
        }
        // a reducible modulus leaves zero divisors behind
        if (1..n).any(|a| (1..n).any(|b| mul[a * n + b] == 0)) {
            return Err(FieldError::Reducible(p));
        }

        Ok(FieldCtx {
            q,
            p,
            deg,
            modulus,
            add,
            mul,
            neg,
            inv,
        })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn characteristic(&self) -> u32 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.deg
    }

    /// Monic modulus, low degree first (`[0, 1]` for prime fields).
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn elem(&self, code: u32) -> Result<FqElem, FieldError> {
        if code < self.q {
            Ok(FqElem(code as u8))
        } else {
            Err(FieldError::BadCode { code, q: self.q })
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = FqElem> {
        (0..self.q).map(|c| FqElem(c as u8))
    }

    pub fn add(&self, a: FqElem, b: FqElem) -> FqElem {
        FqElem(self.add_code(a.0, b.0))
    }

    pub fn sub(&self, a: FqElem, b: FqElem) -> FqElem {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: FqElem, b: FqElem) -> FqElem {
        FqElem(self.mul_code(a.0, b.0))
    }

    pub fn neg(&self, a: FqElem) -> FqElem {
        FqElem(self.neg[a.0 as usize])
    }

    pub fn inv(&self, a: FqElem) -> Result<FqElem, FieldError> {
        if a.0 == 0 {
            Err(FieldError::ZeroInverse)
        } else {
            Ok(FqElem(self.inv[a.0 as usize]))
        }
    }

    #[inline]
    pub fn add_code(&self, a: u8, b: u8) -> u8 {
        self.add[a as usize * self.q as usize + b as usize]
    }

    #[inline]
    pub fn mul_code(&self, a: u8, b: u8) -> u8 {
        self.mul[a as usize * self.q as usize + b as usize]
    }

    #[inline]
    pub fn neg_code(&self, a: u8) -> u8 {
        self.neg[a as usize]
    }

    /// Inverse of a nonzero code. Callers guarantee `a != 0`.
    #[inline]
    pub fn inv_code(&self, a: u8) -> u8 {
        debug_assert!(a != 0);
        self.inv[a as usize]
    }

    /// Row-major `q x q` addition table.
    pub fn add_table(&self) -> &[u8] {
        &self.add
    }

    /// Row-major `q x q` multiplication table.
    pub fn mul_table(&self) -> &[u8] {
        &self.mul
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axioms_hold(f: &FieldCtx) -> bool {
        let els: Vec<FqElem> = f.elements().collect();
        for &a in &els {
            if f.add(a, FqElem::ZERO) != a || f.mul(a, FqElem::ONE) != a {
                return false;
            }
            if f.add(a, f.neg(a)) != FqElem::ZERO {
                return false;
            }
            if a != FqElem::ZERO {
                let ai = f.inv(a).unwrap();
                if f.mul(a, ai) != FqElem::ONE || f.inv(ai).unwrap() != a {
                    return false;
                }
            }
            for &b in &els {
                if f.add(a, b) != f.add(b, a) || f.mul(a, b) != f.mul(b, a) {
                    return false;
                }
                for &c in &els {
                    if f.add(f.add(a, b), c) != f.add(a, f.add(b, c))
                        || f.mul(f.mul(a, b), c) != f.mul(a, f.mul(b, c))
                        || f.mul(a, f.add(b, c)) != f.add(f.mul(a, b), f.mul(a, c))
                    {
                        return false;
                    }
                }
            }
        }
        true
    }

    #[test]
    fn small_fields_satisfy_axioms() {
        for q in [2, 3, 4, 5, 7, 8, 9, 11, 13] {
            let f = make_field(q, None).unwrap();
            assert_eq!(f.q(), q);
            assert!(axioms_hold(&f), "axioms fail for q = {q}");
        }
        let f16 = make_field(16, Some(&[1, 1, 0, 0, 1])).unwrap();
        assert!(axioms_hold(&f16));
    }

    #[test]
    fn prime_examples() {
        let f2 = make_field(2, None).unwrap();
        assert_eq!(f2.add(FqElem(1), FqElem(1)), FqElem(0));
        assert_eq!(f2.mul(FqElem(1), FqElem(1)), FqElem(1));
        let f3 = make_field(3, None).unwrap();
        assert_eq!(f3.mul(FqElem(2), FqElem(2)), FqElem(1));
        let f5 = make_field(5, None).unwrap();
        assert_eq!(f5.inv(FqElem(2)).unwrap(), FqElem(3));
    }

    #[test]
    fn f4_generator_satisfies_its_minimal_polynomial() {
        let f4 = make_field(4, Some(&[1, 1, 1])).unwrap();
        let g = FqElem(2);
        assert_eq!(f4.mul(g, g), f4.add(g, FqElem::ONE));
        assert_eq!(f4.characteristic(), 2);
        assert_eq!(f4.degree(), 2);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(make_field(6, None), Err(FieldError::NotPrimePower(6)));
        assert_eq!(make_field(1, None), Err(FieldError::OutOfRange(1)));
        assert_eq!(make_field(16, None), Err(FieldError::MissingPolynomial(16)));
        // x^2 + 1 = (x + 1)^2 over F_2
        assert_eq!(make_field(4, Some(&[1, 0, 1])), Err(FieldError::Reducible(2)));
        assert!(matches!(
            make_field(4, Some(&[1, 1, 0, 1])),
            Err(FieldError::WrongDegree { .. })
        ));
        let f3 = make_field(3, None).unwrap();
        assert_eq!(f3.inv(FqElem::ZERO), Err(FieldError::ZeroInverse));
        assert!(f3.elem(3).is_err());
    }

    #[test]
    fn non_monic_modulus_is_normalised() {
        // 2x^2 + 2 = 2(x^2 + 1) over F_3
        let f = make_field(9, Some(&[2, 0, 2])).unwrap();
        assert_eq!(f.modulus(), &[1, 0, 1]);
        assert_eq!(*f, *make_field(9, None).unwrap());
    }
}
