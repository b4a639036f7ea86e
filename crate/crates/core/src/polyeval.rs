//! Dense polynomial arithmetic over `Z/2^M Z` and fast multipoint
//! evaluation through subproduct trees.
//!
//! Multiplication packs coefficients into one big integer (Kronecker
//! substitution) so products inherit subquadratic integer
//! multiplication; `Z/2^M Z` has no FFT roots of unity of its own.
//! Division is only ever by monic polynomials, which keeps quotients
//! well-defined over the ring: the reversed divisor has unit constant
//! term, so its power series inverse exists.

use rug::integer::Order;
use rug::Integer;

use crate::modring::ResidueWord2M;
use crate::{Error, Result};

/// Points / degree below which evaluation falls back to Horner's rule.
const DIRECT_EVAL_THRESHOLD: usize = 16;

/// Polynomial over `Z/2^M Z`, coefficient `k` multiplying `x^k`.
///
/// Coefficients are canonical residues in `[0, 2^bits)`; the zero
/// polynomial is the empty sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DensePoly2M {
    pub bits: u32,
    pub coeffs: Vec<Integer>,
}

impl DensePoly2M {
    pub fn new(bits: u32, mut coeffs: Vec<Integer>) -> Self {
        for c in &mut coeffs {
            c.keep_bits_mut(bits);
        }
        let mut poly = DensePoly2M { bits, coeffs };
        poly.trim();
        poly
    }

    pub fn zero(bits: u32) -> Self {
        DensePoly2M { bits, coeffs: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_monic(&self) -> bool {
        self.coeffs.last().map(|c| *c == 1u32).unwrap_or(false)
    }

    fn trim(&mut self) {
        while self.coeffs.last().map(|c| c.is_zero()).unwrap_or(false) {
            self.coeffs.pop();
        }
    }
}

fn ceil_log2(x: usize) -> u32 {
    debug_assert!(x >= 1);
    usize::BITS - (x - 1).leading_zeros()
}

/// Coefficient-slot product of two coefficient slices via Kronecker
/// substitution. Slots are sized `2*bits + ceil(log2(min_len))`,
/// rounded up to whole 64-bit limbs so packing is a straight copy.
fn kronecker_mul(a: &[Integer], b: &[Integer], bits: u32) -> Vec<Integer> {
    debug_assert!(!a.is_empty() && !b.is_empty());
    let slot_bits = 2 * bits as usize + ceil_log2(a.len().min(b.len())) as usize;
    let slot_limbs = slot_bits.div_ceil(64);

    let pack = |c: &[Integer]| -> Integer {
        let mut buf = vec![0u64; c.len() * slot_limbs];
        for (i, x) in c.iter().enumerate() {
            x.write_digits(&mut buf[i * slot_limbs..(i + 1) * slot_limbs], Order::Lsf);
        }
        Integer::from_digits(&buf, Order::Lsf)
    };

    let product = pack(a) * pack(b);
    let out_len = a.len() + b.len() - 1;
    let mut buf = vec![0u64; out_len * slot_limbs];
    product.write_digits(&mut buf, Order::Lsf);
    drop(product);
    (0..out_len)
        .map(|i| {
            Integer::from_digits(&buf[i * slot_limbs..(i + 1) * slot_limbs], Order::Lsf)
                .keep_bits(bits)
        })
        .collect()
}

/// Exact product in `Z/2^M Z[x]`.
pub fn poly_mul(a: &DensePoly2M, b: &DensePoly2M) -> Result<DensePoly2M> {
    if a.bits != b.bits {
        return Err(Error::InvalidArgument(format!(
            "bit width mismatch in poly_mul: {} vs {}",
            a.bits, b.bits
        )));
    }
    if a.is_zero() || b.is_zero() {
        return Ok(DensePoly2M::zero(a.bits));
    }
    let mut out = DensePoly2M {
        bits: a.bits,
        coeffs: kronecker_mul(&a.coeffs, &b.coeffs, a.bits),
    };
    out.trim();
    Ok(out)
}

/// Low `k` coefficients of `a * b` (operands implicitly truncated).
fn mul_low(a: &[Integer], b: &[Integer], k: usize, bits: u32) -> Vec<Integer> {
    if a.is_empty() || b.is_empty() || k == 0 {
        return Vec::new();
    }
    let ta = &a[..a.len().min(k)];
    let tb = &b[..b.len().min(k)];
    let mut out = kronecker_mul(ta, tb, bits);
    out.truncate(k);
    out
}

/// Power series inverse of `g` modulo `x^prec` by Newton iteration.
/// Requires `g[0] == 1`.
fn series_inverse(g: &[Integer], prec: usize, bits: u32) -> Vec<Integer> {
    debug_assert!(!g.is_empty() && g[0] == 1u32);
    let mut inv = vec![Integer::from(1)];
    let mut have = 1usize;
    while have < prec {
        have = (2 * have).min(prec);
        // inv <- inv * (2 - g * inv) mod x^have
        let mut t = mul_low(g, &inv, have, bits);
        for c in t.iter_mut() {
            *c = -std::mem::take(c);
        }
        if let Some(c0) = t.first_mut() {
            *c0 += 2u32;
        }
        for c in t.iter_mut() {
            c.keep_bits_mut(bits);
        }
        inv = mul_low(&inv, &t, have, bits);
        if inv.len() < have {
            inv.resize(have, Integer::new());
        }
    }
    inv
}

/// Quotient and remainder of `f` by a monic `g`, exact over the ring.
pub fn divrem_monic(f: &DensePoly2M, g: &DensePoly2M) -> Result<(DensePoly2M, DensePoly2M)> {
    if f.bits != g.bits {
        return Err(Error::InvalidArgument(
            "bit width mismatch in divrem_monic".into(),
        ));
    }
    if !g.is_monic() {
        return Err(Error::InvalidArgument(
            "divisor must be monic over Z/2^M Z".into(),
        ));
    }
    let bits = f.bits;
    let dg = g.degree().expect("monic implies nonzero");
    let df = match f.degree() {
        Some(d) if d >= dg => d,
        _ => return Ok((DensePoly2M::zero(bits), f.clone())),
    };
    let dq = df - dg;

    let rev_f: Vec<Integer> = f.coeffs.iter().rev().cloned().collect();
    let rev_g: Vec<Integer> = g.coeffs.iter().rev().cloned().collect();
    let inv = series_inverse(&rev_g, dq + 1, bits);
    let mut q_rev = mul_low(&rev_f, &inv, dq + 1, bits);
    q_rev.resize(dq + 1, Integer::new());
    let q: Vec<Integer> = q_rev.into_iter().rev().collect();

    // r = f - q*g has degree < dg, so only the low dg coefficients matter.
    let qg_low = mul_low(&q, &g.coeffs, dg, bits);
    let mut r = Vec::with_capacity(dg);
    for i in 0..dg {
        let fi = f.coeffs.get(i).cloned().unwrap_or_default();
        let s = fi - qg_low.get(i).cloned().unwrap_or_default();
        r.push(s.keep_bits(bits));
    }
    let mut quotient = DensePoly2M { bits, coeffs: q };
    quotient.trim();
    let mut remainder = DensePoly2M { bits, coeffs: r };
    remainder.trim();
    Ok((quotient, remainder))
}

/// Binary tree whose leaves are the monic factors `x - a_i` and whose
/// internal nodes are products of their children. `levels[0]` holds the
/// leaves; the last level holds the root `prod (x - a_i)`.
#[derive(Debug, Clone)]
pub struct SubproductTree {
    pub bits: u32,
    pub levels: Vec<Vec<DensePoly2M>>,
}

impl SubproductTree {
    pub fn root(&self) -> &DensePoly2M {
        &self.levels.last().expect("tree has levels")[0]
    }

    /// Total coefficient count over all nodes, for workspace accounting.
    pub fn coefficient_count(&self) -> usize {
        self.levels
            .iter()
            .flat_map(|level| level.iter().map(|p| p.coeffs.len()))
            .sum()
    }
}

pub fn build_subproduct_tree(points: &[ResidueWord2M]) -> Result<SubproductTree> {
    if points.is_empty() {
        return Err(Error::InvalidArgument(
            "subproduct tree needs at least one point".into(),
        ));
    }
    let bits = points[0].bits;
    if points.iter().any(|p| p.bits != bits) {
        return Err(Error::InvalidArgument(
            "subproduct tree points must share one bit width".into(),
        ));
    }
    let leaves: Vec<DensePoly2M> = points
        .iter()
        .map(|a| {
            let neg = (-a.value.clone()).keep_bits(bits);
            DensePoly2M { bits, coeffs: vec![neg, Integer::from(1)] }
        })
        .collect();
    let mut levels = vec![leaves];
    while levels.last().unwrap().len() > 1 {
        let prev = levels.last().unwrap();
        let mut next = Vec::with_capacity(prev.len().div_ceil(2));
        for pair in prev.chunks(2) {
            match pair {
                [a, b] => next.push(poly_mul(a, b)?),
                // Odd node is promoted unchanged.
                [a] => next.push(a.clone()),
                _ => unreachable!(),
            }
        }
        levels.push(next);
    }
    Ok(SubproductTree { bits, levels })
}

/// `f(x)` by Horner's rule.
pub fn horner_eval(f: &DensePoly2M, x: &ResidueWord2M) -> ResidueWord2M {
    let bits = f.bits;
    let mut acc = Integer::new();
    for c in f.coeffs.iter().rev() {
        acc *= &x.value;
        acc += c;
        acc.keep_bits_mut(bits);
    }
    ResidueWord2M { bits, value: acc }
}

fn reverse_coeffs(p: &DensePoly2M) -> Vec<Integer> {
    p.coeffs.iter().rev().cloned().collect()
}

/// Remainder of `f` modulo monic `g` given the power series inverse of
/// the reversed `g` to precision at least `deg f - deg g + 1`.
fn rem_with_inverse(f: &DensePoly2M, g: &DensePoly2M, inv_rev_g: &[Integer]) -> DensePoly2M {
    let bits = f.bits;
    let dg = g.degree().expect("monic divisor");
    let df = match f.degree() {
        Some(d) if d >= dg => d,
        _ => return f.clone(),
    };
    let dq = df - dg;
    debug_assert!(inv_rev_g.len() > dq);

    let rev_f = reverse_coeffs(f);
    let mut q_rev = mul_low(&rev_f, &inv_rev_g[..dq + 1], dq + 1, bits);
    q_rev.resize(dq + 1, Integer::new());
    let q: Vec<Integer> = q_rev.into_iter().rev().collect();

    let qg_low = mul_low(&q, &g.coeffs, dg, bits);
    let mut r = Vec::with_capacity(dg);
    for i in 0..dg {
        let fi = f.coeffs.get(i).cloned().unwrap_or_default();
        let s = fi - qg_low.get(i).cloned().unwrap_or_default();
        r.push(s.keep_bits(bits));
    }
    let mut remainder = DensePoly2M { bits, coeffs: r };
    remainder.trim();
    remainder
}

/// Evaluates `f` at every point by remainder descent through the
/// subproduct tree; small instances go point-by-point through Horner.
///
/// `f` may have degree above the point count; it is reduced modulo the
/// tree root first. Each node's reversed-divisor inverse is derived
/// from its parent's with a single product (`1/rev c1 = rev c2 / rev
/// parent`), so one Newton iteration at the root serves the whole
/// descent. Below the direct threshold the remaining remainders are
/// finished off by Horner.
pub fn multipoint_eval(f: &DensePoly2M, points: &[ResidueWord2M]) -> Result<Vec<ResidueWord2M>> {
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let bits = f.bits;
    if points.iter().any(|p| p.bits != bits) {
        return Err(Error::InvalidArgument(
            "evaluation points must match the polynomial bit width".into(),
        ));
    }
    let t = points.len();
    if t < DIRECT_EVAL_THRESHOLD || f.coeffs.len() <= DIRECT_EVAL_THRESHOLD {
        return Ok(points.iter().map(|x| horner_eval(f, x)).collect());
    }

    let tree = build_subproduct_tree(points)?;
    let mut levels = tree.levels;
    let depth = levels.len();

    // Stop descending once nodes cover at most this many leaves; the
    // tail is cheaper by Horner on the small remainders.
    let stop = depth
        .saturating_sub(1)
        .min(DIRECT_EVAL_THRESHOLD.ilog2() as usize);

    let root = &levels[depth - 1][0];
    let d_root = root.degree().expect("monic root");
    // The root inverse must cover the initial reduction of f and the
    // derivation of its children's inverses.
    let child_need = if depth >= 2 {
        levels[depth - 2]
            .iter()
            .map(|c| c.coeffs.len() - 1)
            .max()
            .unwrap_or(0)
    } else {
        0
    };
    let f_need = f
        .degree()
        .filter(|d| *d >= d_root)
        .map(|d| d - d_root + 1)
        .unwrap_or(0);
    let root_prec = child_need.max(f_need).max(1);
    let inv_root = series_inverse(&reverse_coeffs(root), root_prec, bits);

    let top = if f_need > 0 {
        rem_with_inverse(f, root, &inv_root)
    } else {
        f.clone()
    };

    // (remainder, inverse of reversed node to the precision its
    // children and its own division require)
    let mut state = vec![(top, inv_root)];
    for l in (stop..depth - 1).rev() {
        let nodes = std::mem::take(&mut levels[l]);
        let odd = nodes.len() % 2 == 1;
        let mut next = Vec::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            let (parent_rem, parent_inv) = &state[i / 2];
            if odd && i == nodes.len() - 1 {
                // Promoted node: the parent is this node, already reduced.
                next.push((parent_rem.clone(), parent_inv.clone()));
                continue;
            }
            let sibling = if i % 2 == 0 { &nodes[i + 1] } else { &nodes[i - 1] };
            let d_node = node.coeffs.len() - 1;
            let d_sib = sibling.coeffs.len() - 1;
            // Enough for dividing the parent remainder here and for
            // deriving the children's inverses below.
            let prec = d_node.max(d_sib).max(1);
            let inv = mul_low(parent_inv, &reverse_coeffs(sibling), prec, bits);
            let rem = rem_with_inverse(parent_rem, node, &inv);
            next.push((rem, inv));
        }
        state = next;
    }

    // Finish: node i at level `stop` covers leaves i*2^stop .. onward.
    let chunk = 1usize << stop;
    let mut out = Vec::with_capacity(t);
    for (i, (rem, _)) in state.iter().enumerate() {
        for point in points.iter().skip(i * chunk).take(chunk) {
            out.push(horner_eval(rem, point));
        }
    }
    debug_assert_eq!(out.len(), t);
    Ok(out)
}
