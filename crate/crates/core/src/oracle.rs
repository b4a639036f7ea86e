//! Slow but exact reference implementations.
//!
//! Everything here is deliberately naive and shares no code with the
//! fast path beyond the big-integer primitives: Bernoulli numbers come
//! from the defining recurrence with rational arithmetic, and residues
//! come from evaluating the alternating sum term by term with exact
//! integers. An oracle that reused the optimized path could not catch
//! its bugs.

use rug::ops::{Pow, RemRounding};
use rug::{Complete, Integer, Rational};

use crate::modring::{prime_power, PrimePowerResidue};
use crate::{Error, Result};

/// Practical cap on recurrence-based Bernoulli computation.
pub const RECURRENCE_CAP: usize = 1 << 16;

/// Exact rationals B_0 .. B_limit from the defining recurrence
/// `sum_{k=0}^{m} binom(m+1, k) B_k = 0`.
#[derive(Debug, Clone)]
pub struct BernoulliRow {
    values: Vec<Rational>,
}

impl BernoulliRow {
    pub fn up_to(limit: usize) -> Result<BernoulliRow> {
        if limit > RECURRENCE_CAP {
            return Err(Error::InvalidArgument(format!(
                "recurrence oracle capped at {RECURRENCE_CAP}, asked for {limit}"
            )));
        }
        let mut values: Vec<Rational> = Vec::with_capacity(limit + 1);
        values.push(Rational::from(1));
        for m in 1..=limit {
            if m > 1 && m % 2 == 1 {
                values.push(Rational::new());
                continue;
            }
            // binom(m+1, k) built incrementally across the inner sum.
            let mut binom = Integer::from(1);
            let mut sum = Rational::new();
            for (k, b) in values.iter().enumerate() {
                if !b.is_zero() {
                    sum += Rational::from(((&binom * b.numer()).complete(), b.denom().clone()));
                }
                binom *= (m + 1 - k) as u64;
                binom.div_exact_u_mut((k + 1) as u32);
            }
            sum /= -((m + 1) as i64);
            values.push(sum);
        }
        Ok(BernoulliRow { values })
    }

    pub fn limit(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, n: usize) -> &Rational {
        &self.values[n]
    }

    /// The integer G_n = 2 (1 - 2^n) B_n.
    pub fn genocchi(&self, n: usize) -> Integer {
        genocchi_from_bernoulli(self.get(n), n)
    }
}

pub fn genocchi_from_bernoulli(b: &Rational, n: usize) -> Integer {
    let factor = Integer::from(2) - (Integer::from(1) << (n as u32 + 1));
    let g = Rational::from((factor * b.numer(), b.denom().clone()));
    debug_assert_eq!(*g.denom(), 1u32);
    g.into_numer_denom().0
}

/// Exact B_n by the defining recurrence.
pub fn bernoulli_exact_small(n: usize) -> Result<Rational> {
    let row = BernoulliRow::up_to(n)?;
    Ok(row.get(n).clone())
}

/// G_n mod p^s by evaluating the alternating congruence sum naively
/// with exact integers: F_p(x) is built coefficient by coefficient and
/// evaluated by Horner at each 0 <= j < p, with 0^0 = 1 at n = s.
pub fn congruence_direct(n: u64, s: usize, p: u64) -> Result<PrimePowerResidue> {
    if s < 1 || (s as u64) > n {
        return Err(Error::InvalidArgument(format!(
            "congruence needs n >= s >= 1, got n={n}, s={s}"
        )));
    }
    if p < 3 || p % 2 == 0 {
        return Err(Error::InvalidArgument(format!("p={p} is not an odd prime")));
    }
    let n_u32 = u32::try_from(n)
        .map_err(|_| Error::InvalidArgument(format!("oracle congruence capped at n < 2^32, got {n}")))?;

    let row = BernoulliRow::up_to(s)?;

    // Coefficient of x^{s-1-k} in F_p is binom(n, k+1) G_{k+1} p^k;
    // store ascending in x.
    let mut coeffs = vec![Integer::new(); s];
    let mut p_pow = Integer::from(1);
    for k in 0..s {
        let g = row.genocchi(k + 1);
        if !g.is_zero() {
            let binom = Integer::binomial_u(n_u32, (k + 1) as u32).complete();
            coeffs[s - 1 - k] = binom * g * &p_pow;
        }
        p_pow *= p;
    }

    let e = n - s as u64;
    let mut sum = Integer::new();
    for j in 0..p {
        let fp_j = horner_exact(&coeffs, j);
        let term = if j == 0 {
            if e == 0 {
                fp_j // 0^0 = 1
            } else {
                continue;
            }
        } else {
            let jpow = Integer::from(j).pow(
                u32::try_from(e).map_err(|_| {
                    Error::InvalidArgument(format!("exponent {e} too large for the naive oracle"))
                })?,
            );
            fp_j * jpow
        };
        if j % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let modulus = prime_power(p, s);
    let value = sum.rem_euc(modulus);
    Ok(PrimePowerResidue::new(p, s, value))
}

fn horner_exact(coeffs: &[Integer], x: u64) -> Integer {
    let mut acc = Integer::new();
    for c in coeffs.iter().rev() {
        acc *= x;
        acc += c;
    }
    acc
}
