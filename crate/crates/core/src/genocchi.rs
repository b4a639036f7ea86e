//! Exact Genocchi numbers, binomial rows, and the coefficients of the
//! degree-(s-1) weight polynomial F.
//!
//! F(x) = sum_k binom(n, k+1) G_{k+1} x^{s-1-k} depends on n and s but
//! not on any prime, which is what lets one evaluation pass serve a
//! whole batch of primes.

use rug::ops::Pow;
use rug::{Complete, Integer};

use crate::polyeval::DensePoly2M;
use crate::{Error, Result};

/// Exact integers G_1 .. G_s.
#[derive(Debug, Clone)]
pub struct GenocchiTable {
    pub s: usize,
    values: Vec<Integer>,
}

impl GenocchiTable {
    /// G_k for `1 <= k <= s`.
    pub fn get(&self, k: usize) -> &Integer {
        &self.values[k - 1]
    }

    pub fn values(&self) -> &[Integer] {
        &self.values
    }
}

/// Tangent numbers 1, 2, 16, 272, ... by the boustrophedon (Seidel)
/// triangle, computed in place with integer scalar operations.
fn tangent_numbers(m: usize) -> Vec<Integer> {
    if m == 0 {
        return Vec::new();
    }
    let mut t = Vec::with_capacity(m);
    t.push(Integer::from(1));
    for k in 1..m {
        let next = (&t[k - 1] * k as u32).complete();
        t.push(next);
    }
    for k in 1..m {
        for j in k..m {
            let (lo, hi) = t.split_at_mut(j);
            hi[0] *= (j - k + 2) as u32;
            hi[0] += (&lo[j - 1] * (j - k) as u32).complete();
        }
    }
    t
}

/// Exact G_1 .. G_s. G_1 = 1, odd indices >= 3 vanish, and
/// G_{2i} = (-1)^i i T_i / 4^{i-1} with T_i the i-th tangent number.
pub fn genocchi_table(s: usize) -> GenocchiTable {
    let tangent = tangent_numbers(s / 2);
    let mut values = Vec::with_capacity(s);
    for k in 1..=s {
        if k == 1 {
            values.push(Integer::from(1));
        } else if k % 2 == 1 {
            values.push(Integer::new());
        } else {
            let i = k / 2;
            let scaled = (&tangent[i - 1] * i as u32).complete();
            debug_assert!(scaled.is_divisible_2pow(2 * (i as u32 - 1)));
            let magnitude = scaled >> (2 * (i as u32 - 1));
            values.push(if i % 2 == 1 { -magnitude } else { magnitude });
        }
    }
    GenocchiTable { s, values }
}

/// binom(n, 1) .. binom(n, s) by the exact iterative identity
/// binom(n, k+1) = binom(n, k) (n-k) / (k+1).
pub fn binomial_row(n: u64, s: usize) -> Result<Vec<Integer>> {
    if s < 1 || (s as u64) > n {
        return Err(Error::InvalidArgument(format!(
            "binomial row needs 1 <= s <= n, got s={s}, n={n}"
        )));
    }
    let mut row = Vec::with_capacity(s);
    row.push(Integer::from(n));
    for k in 1..s {
        let next = (&row[k - 1] * (n - k as u64)).complete();
        row.push(next.div_exact_u(u32::try_from(k + 1).expect("s fits u32")));
    }
    Ok(row)
}

/// Exact coefficients c_k = binom(n, k+1) G_{k+1} for 0 <= k < s.
///
/// c_k multiplies x^{s-1-k} in F; every even k >= 2 gives c_k = 0.
#[derive(Debug, Clone)]
pub struct FCoefficients {
    pub n: u64,
    pub s: usize,
    pub exact: Vec<Integer>,
}

pub fn f_coefficients(n: u64, s: usize) -> Result<FCoefficients> {
    let binom = binomial_row(n, s)?;
    let genocchi = genocchi_table(s);
    let exact = binom
        .into_iter()
        .enumerate()
        .map(|(k, b)| {
            let g = genocchi.get(k + 1);
            if g.is_zero() {
                Integer::new()
            } else {
                b * g
            }
        })
        .collect();
    Ok(FCoefficients { n, s, exact })
}

/// Reduces the exact coefficients into `Z/2^M Z`, returning F in
/// ascending-power order: the coefficient of x^{s-1-k} is c_k.
pub fn reduce_coefficients(fc: &FCoefficients, bits: u32) -> DensePoly2M {
    let coeffs = fc.exact.iter().rev().cloned().collect();
    DensePoly2M::new(bits, coeffs)
}

/// Integer envelope for |binom(n, k+1) G_{k+1}|: a floor of
/// 7 (n/pi)^{k+1} computed against a rational upper bound of pi, so a
/// table value within the envelope certainly satisfies the true bound.
pub fn coefficient_bound(n: u64, k: usize) -> Integer {
    let e = u32::try_from(k + 1).expect("k fits u32");
    let num = (Integer::from(crate::pi_bracket::SCALE) * n).pow(e) * 7u32;
    let den = Integer::from(crate::pi_bracket::HI_NUM).pow(e);
    num / den
}
