//! Exact closed-form counts: Gaussian binomials, `|GL_m(F_q)|`, idempotents
//! of a rank-`r` class, and the rank-5 comparison in `M_7(F_2)`.

use num_bigint::BigUint;
use num_traits::{One, Pow, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

pub type BigCount = BigUint;

fn qpow(q: u64, e: u32) -> BigUint {
    Pow::pow(BigUint::from(q), e)
}

/// `[n r]_q`, the number of `r`-dimensional subspaces of `F_q^n`, by the
/// q-Pascal recurrence (no division).
pub fn gaussian_binomial(n: u32, r: u32, q: u64) -> Result<BigCount> {
    if r > n {
        return Err(Error::param(format!("need 0 <= r <= n, got n = {n}, r = {r}")));
    }
    if q < 2 {
        return Err(Error::param(format!("need q >= 2, got {q}")));
    }
    // row[k] = [m k]_q for the current m
    let mut row: Vec<BigUint> = vec![BigUint::one()];
    for m in 1..=n {
        let mut next = vec![BigUint::zero(); m as usize + 1];
        next[0] = BigUint::one();
        next[m as usize] = BigUint::one();
        for k in 1..m as usize {
            next[k] = qpow(q, k as u32) * &row[k] + &row[k - 1];
        }
        row = next;
    }
    Ok(row.swap_remove(r as usize))
}

/// `(q^m - 1)(q^m - q) ... (q^m - q^{m-1})`
pub fn gl_order(m: u32, q: u64) -> Result<BigCount> {
    if m == 0 {
        return Err(Error::param("need m >= 1"));
    }
    let top = qpow(q, m);
    Ok((0..m).map(|i| &top - qpow(q, i)).product())
}

/// Idempotents of rank `r` in `M_n(F_q)`: `[n r]_q * q^{r(n-r)}`.
pub fn idempotent_count(n: u32, r: u32, q: u64) -> Result<BigCount> {
    if r == 0 || r > n {
        return Err(Error::param(format!("need 1 <= r <= n, got n = {n}, r = {r}")));
    }
    Ok(gaussian_binomial(n, r, q)? * qpow(q, r * (n - r)))
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct RankComparison {
    pub n: u32,
    pub r: u32,
    pub q: u64,
    pub idempotents: String,
    pub gl_order: String,
    pub idempotents_exceed_group: bool,
}

pub fn compare(n: u32, r: u32, q: u64) -> Result<RankComparison> {
    let idem = idempotent_count(n, r, q)?;
    let gl = gl_order(r, q)?;
    Ok(RankComparison {
        n,
        r,
        q,
        idempotents_exceed_group: idem > gl,
        idempotents: idem.to_string(),
        gl_order: gl.to_string(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RankGapReport {
    /// The asserted instance: rank 5 in `M_7(F_2)`.
    pub headline: RankComparison,
    pub passed: bool,
    /// Every rank `1..n-1` at `n = 7, q = 2`, reported only.
    pub sweep: Vec<RankComparison>,
    pub note: &'static str,
}

/// The rank-5 idempotent count of `M_7(F_2)` is strictly below `|GL_5(F_2)|`,
/// so no identification of generators can reach every group element there.
pub fn rank_gap_check() -> Result<RankGapReport> {
    let headline = compare(7, 5, 2)?;
    let passed = !headline.idempotents_exceed_group
        && idempotent_count(7, 5, 2)? < gl_order(5, 2)?;
    let sweep = (1..7).map(|r| compare(7, r, 2)).collect::<Result<_>>()?;
    Ok(RankGapReport {
        headline,
        passed,
        sweep,
        note: "|GL_m(F_q)| is computed from the general product formula; a displayed \
               expansion with a repeated factor (q^m - q) does not match it, but the \
               inequality holds either way",
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    /// Direct product formula with exact division, as an independent oracle.
    fn gaussian_by_quotient(n: u32, r: u32, q: u64) -> BigUint {
        let mut num = BigUint::one();
        let mut den = BigUint::one();
        for i in 0..r {
            num *= qpow(q, n - i) - 1u32;
            den *= qpow(q, r - i) - 1u32;
        }
        assert!((&num % &den).is_zero());
        num / den
    }

    #[test]
    fn gaussian_examples() {
        assert_eq!(gaussian_binomial(5, 0, 3).unwrap(), big(1));
        assert_eq!(gaussian_binomial(7, 2, 2).unwrap(), big(2667));
        assert_eq!(gaussian_binomial(4, 1, 2).unwrap(), big(15));
        assert_eq!(gaussian_binomial(7, 5, 2).unwrap(), big(2667));
        assert!(gaussian_binomial(2, 3, 2).is_err());
        assert!(gaussian_binomial(2, 1, 1).is_err());
    }

    #[test]
    fn gaussian_matches_quotient_formula() {
        for q in [2, 3, 4, 5] {
            for n in 0..10 {
                for r in 0..=n {
                    assert_eq!(gaussian_binomial(n, r, q).unwrap(), gaussian_by_quotient(n, r, q));
                }
            }
        }
    }

    #[test]
    fn q_pascal_identity() {
        for q in [2, 3, 4] {
            for n in 1..=12 {
                for r in 1..n {
                    let lhs = gaussian_binomial(n, r, q).unwrap();
                    let rhs = qpow(q, r) * gaussian_binomial(n - 1, r, q).unwrap()
                        + gaussian_binomial(n - 1, r - 1, q).unwrap();
                    assert_eq!(lhs, rhs, "n={n} r={r} q={q}");
                }
            }
        }
    }

    #[test]
    fn gl_examples() {
        for q in [2, 3, 5, 7] {
            assert_eq!(gl_order(1, q).unwrap(), big(q - 1));
        }
        assert_eq!(gl_order(2, 2).unwrap(), big(6));
        assert_eq!(gl_order(5, 2).unwrap(), big(31 * 30 * 28 * 24 * 16));
        assert_eq!(gl_order(5, 2).unwrap(), big(9_999_360));
        assert!(gl_order(0, 2).is_err());
    }

    #[test]
    fn idempotent_examples() {
        assert_eq!(idempotent_count(7, 5, 2).unwrap(), big(2_731_008));
        assert_eq!(idempotent_count(7, 5, 2).unwrap(), big((1 << 10) * 127 * 63 / 3));
        assert_eq!(idempotent_count(4, 1, 2).unwrap(), big(120));
        assert_eq!(idempotent_count(6, 6, 3).unwrap(), big(1));
    }

    #[test]
    fn rank_gap() {
        let rep = rank_gap_check().unwrap();
        assert!(rep.passed);
        assert_eq!(rep.headline.idempotents, "2731008");
        assert_eq!(rep.headline.gl_order, "9999360");
        assert_eq!(rep.sweep.len(), 6);
        assert!(rep.sweep[0].idempotents_exceed_group);
        let r1n4 = compare(4, 1, 2).unwrap();
        assert_eq!((r1n4.idempotents.as_str(), r1n4.gl_order.as_str()), ("120", "1"));
    }
}
