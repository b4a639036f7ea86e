//! Arithmetic in `Z/2^M Z` and `Z/p^s Z`: Newton inversion of odd
//! elements, binary exponentiation, signed lifting and CRT
//! recombination.
//!
//! Residues are always stored as canonical nonnegative values; the
//! signed interpretation happens only at explicit lift points.

use rug::ops::{Pow, RemRounding};
use rug::{Complete, Integer};

use crate::{Error, Result};

/// An element of `Z/2^M Z` tagged with its bit width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueWord2M {
    pub bits: u32,
    pub value: Integer,
}

impl ResidueWord2M {
    /// Wraps `value`, reducing it into `[0, 2^bits)`.
    pub fn new(bits: u32, mut value: Integer) -> Self {
        value.keep_bits_mut(bits);
        ResidueWord2M { bits, value }
    }
}

/// A residue `value` of some integer modulo `p^s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimePowerResidue {
    pub p: u64,
    pub s: usize,
    pub value: Integer,
}

impl PrimePowerResidue {
    pub fn new(p: u64, s: usize, value: Integer) -> Self {
        debug_assert!(value >= 0 && value < prime_power(p, s));
        PrimePowerResidue { p, s, value }
    }

    pub fn modulus(&self) -> Integer {
        prime_power(self.p, self.s)
    }
}

pub fn prime_power(p: u64, s: usize) -> Integer {
    Integer::from(p).pow(u32::try_from(s).expect("exponent fits u32"))
}

/// Inverse of an odd `a` modulo `2^bits` by Newton/Hensel lifting.
///
/// Starts from the inverse modulo 8 (`a` itself, since `a^2 = 1 mod 8`
/// for odd `a`) and doubles the precision each step.
pub fn inv_mod_pow2(a: &Integer, bits: u32) -> Result<ResidueWord2M> {
    if bits < 1 {
        return Err(Error::InvalidArgument("bit width must be >= 1".into()));
    }
    if *a <= 0 || !a.is_odd() {
        return Err(Error::InvalidArgument(format!(
            "{a} is not invertible modulo a power of two"
        )));
    }
    let mut prec = bits.min(3);
    let mut x = a.clone().keep_bits(prec);
    while prec < bits {
        prec = (2 * prec).min(bits);
        // x <- x (2 - a x) doubles the number of correct low bits.
        let t = Integer::from(2) - (a * &x).complete().keep_bits(prec);
        x = (x * t).keep_bits(prec);
    }
    Ok(ResidueWord2M { bits, value: x })
}

/// `base^exp mod modulus` by binary exponentiation, with `0^0 = 1`.
pub fn pow_mod(base: &Integer, exp: &Integer, modulus: &Integer) -> Result<Integer> {
    if *modulus < 2 {
        return Err(Error::InvalidArgument(format!(
            "pow_mod needs modulus >= 2, got {modulus}"
        )));
    }
    if exp.is_negative() {
        return Err(Error::InvalidArgument("negative exponent".into()));
    }
    let mut result = Integer::from(1);
    let mut square = base.clone().rem_euc(modulus);
    let nbits = exp.significant_bits();
    for i in 0..nbits {
        if exp.get_bit(i) {
            result = (result * &square).rem_euc(modulus);
        }
        if i + 1 < nbits {
            square = square.square().rem_euc(modulus);
        }
    }
    Ok(result)
}

/// `base^exp mod 2^bits`; reductions are bit masks rather than
/// divisions.
pub fn pow_mod_pow2(base: &Integer, exp: u64, bits: u32) -> Integer {
    let mut result = Integer::from(1).keep_bits(bits);
    let mut square = base.clone().keep_bits(bits);
    let nbits = u64::BITS - exp.leading_zeros();
    for i in 0..nbits {
        if exp >> i & 1 == 1 {
            result = (result * &square).keep_bits(bits);
        }
        if i + 1 < nbits {
            square = square.square().keep_bits(bits);
        }
    }
    result
}

/// The unique representative of `value (mod modulus)` in the centered
/// interval `(-modulus/2, modulus/2]`.
pub fn signed_lift(value: &Integer, modulus: &Integer) -> Result<Integer> {
    if *modulus < 2 {
        return Err(Error::InvalidArgument(format!(
            "signed lift needs modulus >= 2, got {modulus}"
        )));
    }
    if *value < 0 || value >= modulus {
        return Err(Error::InvalidArgument(format!(
            "residue {value} out of range for modulus {modulus}"
        )));
    }
    if (value << 1u32).complete() > *modulus {
        Ok((value - modulus).complete())
    } else {
        Ok(value.clone())
    }
}

/// Combines residues with pairwise distinct primes into the unique
/// residue modulo the product of the `p^s`.
///
/// Merging walks a balanced tree so the integers being combined stay
/// near-equal in size.
pub fn crt_combine(residues: &[PrimePowerResidue]) -> Result<(Integer, Integer)> {
    if residues.is_empty() {
        return Err(Error::InvalidArgument("no residues to combine".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for r in residues {
        if !seen.insert(r.p) {
            return Err(Error::InvalidArgument(format!(
                "duplicate prime {} in CRT input",
                r.p
            )));
        }
    }
    let mut layer: Vec<(Integer, Integer)> = residues
        .iter()
        .map(|r| (r.value.clone(), r.modulus()))
        .collect();
    while layer.len() > 1 {
        let mut next = Vec::with_capacity(layer.len().div_ceil(2));
        let mut it = layer.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(crt_merge(a, b)?),
                None => next.push(a),
            }
        }
        layer = next;
    }
    Ok(layer.pop().expect("nonempty layer"))
}

fn crt_merge(a: (Integer, Integer), b: (Integer, Integer)) -> Result<(Integer, Integer)> {
    let (v1, m1) = a;
    let (v2, m2) = b;
    let inv = m1
        .clone()
        .invert(&m2)
        .map_err(|_| Error::Internal("CRT moduli are not coprime".into()))?;
    let t = ((v2 - &v1) * inv).rem_euc(&m2);
    let value = v1 + t * &m1;
    let modulus = m1 * m2;
    debug_assert!(value < modulus);
    Ok((value, modulus))
}
