//! The batch congruence engine.
//!
//! Given n, s and a set P of odd primes with `sum(p) <= s`, computes
//! `G_n mod p^s` for every p in P out of one shared polynomial
//! evaluation over `Z/2^M Z`:
//!
//!   1. size M so the signed lift in step 6 is unambiguous,
//!   2. reduce the exact coefficients of F into `Z/2^M Z`,
//!   3. form the points j/p (one Newton inversion per p),
//!   4. evaluate F at all points of all primes in one multipoint pass,
//!   5. scale by `p^{s-1}` and lift the exact integers `F_p(j)`,
//!   6. per prime, table `j^{n-s} mod p^s` and fold the alternating sum.

use std::collections::BTreeMap;

use rug::ops::{DivRounding, Pow, RemRounding};
use rug::{Complete, Integer};

use crate::genocchi::{reduce_coefficients, FCoefficients};
use crate::modring::{
    inv_mod_pow2, pow_mod, pow_mod_pow2, prime_power, signed_lift, PrimePowerResidue,
    ResidueWord2M,
};
use crate::pi_bracket;
use crate::polyeval::{multipoint_eval, DensePoly2M};
use crate::primes::{smallest_prime_factor_table, SpfTable};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct EngineOptions {
    /// Halve the evaluation range using `G_n(1-x) = -G_n(x)`; needs even n.
    pub use_symmetry: bool,
    /// Build the `j^{n-s}` table from prime powers and the
    /// multiplicativity of powering instead of powering every j.
    pub factor_powering: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { use_symmetry: true, factor_powering: true }
    }
}

/// One batch of Prop-style work: primes P with `sum(p) <= s`.
#[derive(Debug, Clone)]
pub struct BatchInput {
    pub n: u64,
    pub s: usize,
    /// Exclusive upper bound N on the primes, N <= n.
    pub prime_bound: u64,
    pub primes: Vec<u64>,
    pub options: EngineOptions,
}

#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub residues: BTreeMap<u64, PrimePowerResidue>,
    /// Analytic estimate of the batch working set in bytes
    /// (reduced coefficients, tree, remainders, power tables).
    pub workspace_bytes: u64,
}

/// Modulus width `M = ceil(log2(3 (nN/pi)^{s+1})) + 1`.
///
/// Computed from an exact rational upper bound (pi replaced by a
/// smaller rational), so rounding can overshoot by a bit but never
/// undershoot: `2^M > 2 |F_p(j)|` must hold for the signed lift.
pub fn modulus_bits(n: u64, prime_bound: u64, s: usize) -> Result<u32> {
    if n < 4 || s < 1 || (s as u64) > n || prime_bound < 3 {
        return Err(Error::InvalidArgument(format!(
            "modulus width needs n >= 4, 1 <= s <= n, N >= 3; got n={n}, s={s}, N={prime_bound}"
        )));
    }
    let e = u32::try_from(s + 1)
        .map_err(|_| Error::InvalidArgument(format!("s={s} too large")))?;
    let num = (Integer::from(n) * prime_bound * pi_bracket::SCALE).pow(e) * 3u32;
    let den = Integer::from(pi_bracket::LO_NUM).pow(e);
    let c = num.div_ceil(den);
    let m0 = if c <= 1 { 0 } else { (c - 1u32).significant_bits() };
    Ok(m0 + 1)
}

/// Integer envelope for `|F_p(j)|`: a floor of `3 (np/pi)^{s+1}`
/// taken against a rational upper bound of pi, so staying within the
/// envelope certifies the true inequality.
pub fn fp_bound(n: u64, p: u64, s: usize) -> Integer {
    let e = u32::try_from(s + 1).expect("s fits u32");
    let num = (Integer::from(n) * p * pi_bracket::SCALE).pow(e) * 3u32;
    let den = Integer::from(pi_bracket::HI_NUM).pow(e);
    num / den
}

/// An evaluation point `j * p^{-1} mod 2^bits`.
#[derive(Debug, Clone)]
pub struct EvalPoint {
    pub p: u64,
    pub j: u64,
    pub point: ResidueWord2M,
}

/// Points j/p for every p, `1 <= j < p` (or `j <= (p-1)/2` under
/// symmetry). j = 0 is excluded: its term vanishes whenever n > s.
pub fn eval_points(primes: &[u64], bits: u32, use_symmetry: bool) -> Result<Vec<EvalPoint>> {
    let mut out = Vec::new();
    for &p in primes {
        let inv = inv_mod_pow2(&Integer::from(p), bits)?;
        let top = if use_symmetry { (p - 1) / 2 } else { p - 1 };
        let mut acc = Integer::new();
        for j in 1..=top {
            acc += &inv.value;
            acc.keep_bits_mut(bits);
            out.push(EvalPoint {
                p,
                j,
                point: ResidueWord2M { bits, value: acc.clone() },
            });
        }
    }
    Ok(out)
}

/// The exact integer `F_p(j)` recovered from the evaluation of F at
/// j/p: multiply by `p^{s-1} mod 2^bits`, then lift to the centered
/// representative. Valid because `2^bits > 2 |F_p(j)|`.
pub struct FValue {
    pub p: u64,
    pub j: u64,
    pub value: Integer,
}

pub fn recover_f_values(
    points: &[EvalPoint],
    evals: &[ResidueWord2M],
    s: usize,
    bits: u32,
) -> Result<Vec<FValue>> {
    assert_eq!(points.len(), evals.len());
    let modulus = Integer::from(1) << bits;
    let mut out = Vec::with_capacity(points.len());
    let mut scale_for: Option<(u64, Integer)> = None;
    for (pt, ev) in points.iter().zip(evals) {
        if scale_for.as_ref().map(|(p, _)| *p) != Some(pt.p) {
            // p^{s-1} mod 2^bits once per prime.
            let sc = pow_mod_pow2(&Integer::from(pt.p), s as u64 - 1, bits);
            scale_for = Some((pt.p, sc));
        }
        let scale = &scale_for.as_ref().unwrap().1;
        let scaled = (&ev.value * scale).complete().keep_bits(bits);
        let value = signed_lift(&scaled, &modulus)?;
        out.push(FValue { p: pt.p, j: pt.j, value });
    }
    Ok(out)
}

/// Table of `j^e mod p^s` for `1 <= j < p`.
///
/// With `factor_powering`, only prime j are powered directly; composite
/// j reuse `t[j] = t[spf(j)] * t[j / spf(j)]`.
pub fn power_table(
    p: u64,
    s: usize,
    e: u64,
    spf: &SpfTable,
    factor_powering: bool,
) -> Result<Vec<Integer>> {
    if e < 1 {
        return Err(Error::InvalidArgument("power table needs exponent >= 1".into()));
    }
    let ps = prime_power(p, s);
    let e_int = Integer::from(e);
    let mut table: Vec<Integer> = Vec::with_capacity((p - 1) as usize);
    table.push(Integer::from(1));
    for j in 2..p {
        let value = if !factor_powering || spf.is_prime(j) {
            pow_mod(&Integer::from(j), &e_int, &ps)?
        } else {
            let q = spf.spf(j);
            let m = j / q;
            (&table[(q - 1) as usize] * &table[(m - 1) as usize])
                .complete()
                .rem_euc(&ps)
        };
        table.push(value);
    }
    Ok(table)
}

/// Folds `sum_j (-1)^j j^{n-s} F_p(j) mod p^s`; under symmetry the sum
/// runs over the lower half and is doubled, which needs even n.
pub fn alternating_sum(
    p: u64,
    s: usize,
    n: u64,
    f_values: &[(u64, Integer)],
    powers: &[Integer],
    use_symmetry: bool,
) -> Result<PrimePowerResidue> {
    if use_symmetry && n % 2 == 1 {
        return Err(Error::InvalidArgument(
            "symmetry halving requires even n".into(),
        ));
    }
    let ps = prime_power(p, s);
    let mut sum = Integer::new();
    for (j, fv) in f_values {
        let term = (fv * &powers[(*j - 1) as usize]).complete();
        if j % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if use_symmetry {
        sum <<= 1u32;
    }
    let value = sum.rem_euc(&ps);
    Ok(PrimePowerResidue::new(p, s, value))
}

/// Evaluates F at all points with a single multipoint pass.
///
/// Every even k >= 2 coefficient of F vanishes, so F regroups as
/// `F(u) = c_0 u^{s-1} + u^sigma E(u^2)` with `sigma = s mod 2` and E
/// of degree about s/2; the tree then works on the squared points and
/// half the coefficients.
fn evaluate_f(f2m: &DensePoly2M, s: usize, bits: u32, points: &[EvalPoint]) -> Result<Vec<ResidueWord2M>> {
    let coeff = |m: usize| f2m.coeffs.get(m).cloned().unwrap_or_default();
    let sigma = s % 2;
    let c0 = coeff(s - 1);

    let mut e_coeffs = Vec::new();
    let mut m = sigma;
    while m + 2 <= s {
        // powers of matching parity up to s-2
        e_coeffs.push(coeff(m));
        m += 2;
    }
    let e_poly = DensePoly2M::new(bits, e_coeffs);

    let trace = std::env::var_os("BERNOULLI_TRACE").is_some();
    let tick = std::time::Instant::now();
    let squared: Vec<ResidueWord2M> = points
        .iter()
        .map(|pt| ResidueWord2M {
            bits,
            value: pt.point.value.clone().square().keep_bits(bits),
        })
        .collect();
    let e_vals = multipoint_eval(&e_poly, &squared)?;
    if trace {
        eprintln!("    evaluate_f multipoint: {:?}", tick.elapsed());
    }
    let tick = std::time::Instant::now();

    let mut out = Vec::with_capacity(points.len());
    for (pt, ev) in points.iter().zip(e_vals) {
        let u = &pt.point.value;
        let mut value = if c0.is_zero() {
            Integer::new()
        } else {
            (pow_mod_pow2(u, s as u64 - 1, bits) * &c0).keep_bits(bits)
        };
        let tail = if sigma == 1 {
            (ev.value * u).keep_bits(bits)
        } else {
            ev.value
        };
        value += tail;
        value.keep_bits_mut(bits);
        out.push(ResidueWord2M { bits, value });
    }
    if trace {
        eprintln!("    evaluate_f monomial side: {:?}", tick.elapsed());
    }
    Ok(out)
}

fn validate_primes(primes: &[u64], prime_bound: u64, spf: &SpfTable) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for &p in primes {
        if p < 3 || p % 2 == 0 || !spf.is_prime(p) {
            return Err(Error::InvalidArgument(format!("{p} is not an odd prime")));
        }
        if p >= prime_bound {
            return Err(Error::InvalidArgument(format!(
                "prime {p} outside the bound {prime_bound}"
            )));
        }
        if !seen.insert(p) {
            return Err(Error::InvalidArgument(format!("duplicate prime {p}")));
        }
    }
    Ok(())
}

fn workspace_estimate(s: usize, t: usize, bits: u32, primes: &[u64], max_s_logp_bits: u64) -> u64 {
    let m_bytes = (bits as u64).div_ceil(8);
    let tree_levels = if t > 1 { usize::BITS - (t - 1).leading_zeros() } else { 1 } as u64;
    let f_poly = s as u64 * m_bytes;
    let e_side = (s as u64 / 2 + 1) * m_bytes;
    let tree = t as u64 * m_bytes * (tree_levels + 2);
    let descent = 2 * t as u64 * m_bytes;
    let points_vals = 4 * t as u64 * m_bytes;
    let tables: u64 = primes.iter().map(|&p| (p - 1) * max_s_logp_bits / 8).sum();
    f_poly + e_side + tree + descent + points_vals + tables
}

/// Shared driver for batch and single-prime runs; callers have already
/// validated their own preconditions.
fn run_congruence(
    n: u64,
    s: usize,
    prime_bound: u64,
    primes: &[u64],
    options: EngineOptions,
    fc: &FCoefficients,
) -> Result<BatchOutput> {
    if fc.n != n || fc.s != s {
        return Err(Error::InvalidArgument(format!(
            "coefficients were built for (n={}, s={}), batch wants (n={n}, s={s})",
            fc.n, fc.s
        )));
    }
    if options.use_symmetry && n % 2 == 1 {
        return Err(Error::InvalidArgument(
            "symmetry halving requires even n".into(),
        ));
    }
    if primes.is_empty() {
        return Ok(BatchOutput { residues: BTreeMap::new(), workspace_bytes: 0 });
    }

    let spf_limit = primes.iter().max().unwrap() + 1;
    let spf = smallest_prime_factor_table(spf_limit)?;
    validate_primes(primes, prime_bound, &spf)?;

    let trace = std::env::var_os("BERNOULLI_TRACE").is_some();
    let mut tick = std::time::Instant::now();
    let lap = |label: &str, tick: &mut std::time::Instant| {
        if trace {
            eprintln!("  engine {label}: {:?}", tick.elapsed());
        }
        *tick = std::time::Instant::now();
    };
    let bits = modulus_bits(n, prime_bound, s)?;
    lap("modulus_bits", &mut tick);
    let f2m = reduce_coefficients(fc, bits);
    lap("reduce", &mut tick);
    let points = eval_points(primes, bits, options.use_symmetry)?;
    lap("points", &mut tick);
    let evals = evaluate_f(&f2m, s, bits, &points)?;
    lap("evaluate_f", &mut tick);
    let f_values = recover_f_values(&points, &evals, s, bits)?;
    lap("recover", &mut tick);

    let e = n - s as u64;
    let mut residues = BTreeMap::new();
    let mut group: Vec<(u64, Integer)> = Vec::new();
    let mut group_p: Option<u64> = None;
    let flush = |p: u64, group: &mut Vec<(u64, Integer)>, residues: &mut BTreeMap<_, _>| -> Result<()> {
        let powers = power_table(p, s, e, &spf, options.factor_powering)?;
        let residue = alternating_sum(p, s, n, group, &powers, options.use_symmetry)?;
        residues.insert(p, residue);
        group.clear();
        Ok(())
    };
    for fv in f_values {
        if group_p != Some(fv.p) {
            if let Some(p) = group_p {
                flush(p, &mut group, &mut residues)?;
            }
            group_p = Some(fv.p);
        }
        group.push((fv.j, fv.value));
    }
    if let Some(p) = group_p {
        flush(p, &mut group, &mut residues)?;
    }
    lap("power+sum", &mut tick);

    let max_p = *primes.iter().max().unwrap();
    let max_s_logp_bits = (s as u64) * (64 - max_p.leading_zeros() as u64);
    let workspace_bytes =
        workspace_estimate(s, points.len(), bits, primes, max_s_logp_bits);
    Ok(BatchOutput { residues, workspace_bytes })
}

/// Runs the whole batch: every prime's residue from one evaluation pass.
pub fn genocchi_mod_batch(input: &BatchInput, fc: &FCoefficients) -> Result<BatchOutput> {
    let (n, s, prime_bound) = (input.n, input.s, input.prime_bound);
    let primes = &input.primes;
    let options = input.options;
    if s < 4 || n <= s as u64 {
        return Err(Error::InvalidArgument(format!(
            "batch needs n > s >= 4, got n={n}, s={s}"
        )));
    }
    if prime_bound > n {
        return Err(Error::InvalidArgument(format!(
            "prime bound {prime_bound} exceeds n={n}"
        )));
    }
    let psum: u64 = primes.iter().sum();
    if psum > s as u64 {
        return Err(Error::InvalidArgument(format!(
            "batch prime sum {psum} exceeds s={s}"
        )));
    }
    run_congruence(n, s, prime_bound, primes, options, fc)
}

/// Single-prime residue without the `sum(p) <= s` batching constraint.
///
/// The congruence and the `|F_p(j)|` envelope hold for any odd prime p
/// once `n >= 4` and `n > s >= 1`, so one prime may be pushed through
/// the same pipeline with s far below p. Used by the CLI residue query.
pub fn genocchi_mod_prime(
    n: u64,
    p: u64,
    s: usize,
    options: EngineOptions,
    fc: &FCoefficients,
) -> Result<PrimePowerResidue> {
    if n < 4 || n <= s as u64 || s < 1 {
        return Err(Error::InvalidArgument(format!(
            "single-prime engine needs n >= 4 and n > s >= 1, got n={n}, s={s}"
        )));
    }
    let out = run_congruence(n, s, p + 1, &[p], options, fc)?;
    Ok(out.residues.into_iter().next().expect("one residue").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genocchi::f_coefficients;
    use crate::oracle;

    #[test]
    fn modulus_width_examples() {
        assert_eq!(modulus_bits(100, 10, 5).unwrap(), 53);
        // ceil(log2(3 (16/pi)^5)) + 1: 3 (16/pi)^5 = 10279.02..., so 14 + 1.
        assert_eq!(modulus_bits(4, 4, 4).unwrap(), 15);
        for s in 4..12 {
            assert!(modulus_bits(100, 10, s + 1).unwrap() > modulus_bits(100, 10, s).unwrap());
        }
        assert!(modulus_bits(3, 3, 3).is_err());
    }

    #[test]
    fn eval_point_examples() {
        let pts = eval_points(&[3], 4, false).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].point.value, 11); // 1 * 3^{-1} mod 16
        assert_eq!(pts[1].point.value, 6); // 2 * 3^{-1} = 22 mod 16
        for pt in &pts {
            assert!(pt.j >= 1 && pt.j < 3);
        }

        let sym = eval_points(&[5], 8, true).unwrap();
        assert_eq!(sym.len(), 2); // j = 1, 2 only
    }

    #[test]
    fn power_table_example() {
        let spf = smallest_prime_factor_table(8).unwrap();
        let direct = power_table(5, 2, 8, &spf, false).unwrap();
        assert_eq!(direct, vec![1, 6, 11, 11]);
        let factored = power_table(5, 2, 8, &spf, true).unwrap();
        assert_eq!(factored, direct);
    }

    #[test]
    fn power_table_paths_agree() {
        let spf = smallest_prime_factor_table(100).unwrap();
        for p in [13u64, 31, 97] {
            for e in [1u64, 7, 100, 12345] {
                let a = power_table(p, 3, e, &spf, true).unwrap();
                let b = power_table(p, 3, e, &spf, false).unwrap();
                assert_eq!(a, b, "p={p} e={e}");
            }
        }
    }

    #[test]
    fn alternating_sum_example() {
        // n=10, s=2, p=5: F_5(j) = 10j - 225.
        let f = |j: i64| Integer::from(10 * j - 225);
        let powers = vec![
            Integer::from(1),
            Integer::from(6),
            Integer::from(11),
            Integer::from(11),
        ];
        let full: Vec<(u64, Integer)> = (1..=4).map(|j| (j as u64, f(j))).collect();
        let got = alternating_sum(5, 2, 10, &full, &powers, false).unwrap();
        assert_eq!(got.value, 20);

        let half: Vec<(u64, Integer)> = (1..=2).map(|j| (j as u64, f(j))).collect();
        let got = alternating_sum(5, 2, 10, &half, &powers, true).unwrap();
        assert_eq!(got.value, 20);

        assert!(alternating_sum(5, 2, 9, &half, &powers, true).is_err());
    }

    #[test]
    fn single_prime_examples() {
        let fc = f_coefficients(10, 2).unwrap();
        let opts = EngineOptions::default();
        assert_eq!(genocchi_mod_prime(10, 5, 2, opts, &fc).unwrap().value, 20);
        assert_eq!(genocchi_mod_prime(10, 3, 2, opts, &fc).unwrap().value, 7);
    }

    #[test]
    fn recovered_values_match_hand_expansion() {
        // n=10, s=2, p=5: F_p(j) = 10j - 225 exactly.
        let n = 10;
        let s = 2;
        let fc = f_coefficients(n, s).unwrap();
        let bits = modulus_bits(n, 6, s).unwrap();
        let f2m = reduce_coefficients(&fc, bits);
        let points = eval_points(&[5], bits, false).unwrap();
        let evals = evaluate_f(&f2m, s, bits, &points).unwrap();
        let fvals = recover_f_values(&points, &evals, s, bits).unwrap();
        let expect = [-215i64, -205, -195, -185];
        for (fv, e) in fvals.iter().zip(expect) {
            assert_eq!(fv.value, e, "j={}", fv.j);
        }
        for fv in &fvals {
            assert!(fv.value.clone().abs() <= fp_bound(n, 5, s));
        }
    }

    #[test]
    fn batch_example_small() {
        let fc = f_coefficients(10, 4).unwrap();
        let input = BatchInput {
            n: 10,
            s: 4,
            prime_bound: 10,
            primes: vec![3],
            options: EngineOptions::default(),
        };
        let out = genocchi_mod_batch(&input, &fc).unwrap();
        assert_eq!(out.residues[&3].value, 7); // -155 mod 81
    }

    #[test]
    fn batch_matches_oracle() {
        let n = 100;
        let s = 8;
        let fc = f_coefficients(n, s).unwrap();
        let input = BatchInput {
            n,
            s,
            prime_bound: 10,
            primes: vec![3, 5],
            options: EngineOptions::default(),
        };
        let out = genocchi_mod_batch(&input, &fc).unwrap();
        for &p in &[3u64, 5] {
            let expect = oracle::congruence_direct(n, s, p).unwrap();
            assert_eq!(out.residues[&p].value, expect.value, "p={p}");
        }
        // Frozen: G_100 mod 3^8 and mod 5^8.
        assert_eq!(out.residues[&3].value, 2446);
        assert_eq!(out.residues[&5].value, 168_275);
    }

    #[test]
    fn batch_rejects_contract_violations() {
        let fc = f_coefficients(10, 4).unwrap();
        let base = BatchInput {
            n: 10,
            s: 4,
            prime_bound: 10,
            primes: vec![3, 5],
            options: EngineOptions::default(),
        };
        // sum(p) = 8 > s = 4
        assert!(genocchi_mod_batch(&base, &fc).is_err());

        let mut bad = base.clone();
        bad.primes = vec![9];
        assert!(genocchi_mod_batch(&bad, &fc).is_err());

        let mut mismatched = base.clone();
        mismatched.primes = vec![3];
        let other = f_coefficients(12, 4).unwrap();
        assert!(genocchi_mod_batch(&mismatched, &other).is_err());
    }

    #[test]
    fn empty_batch_is_empty() {
        let fc = f_coefficients(10, 4).unwrap();
        let input = BatchInput {
            n: 10,
            s: 4,
            prime_bound: 10,
            primes: vec![],
            options: EngineOptions::default(),
        };
        let out = genocchi_mod_batch(&input, &fc).unwrap();
        assert!(out.residues.is_empty());
    }

    #[test]
    fn symmetry_and_full_sum_agree() {
        for (n, s, p) in [(20u64, 5usize, 7u64), (34, 6, 11), (50, 9, 13)] {
            let fc = f_coefficients(n, s).unwrap();
            let sym = EngineOptions { use_symmetry: true, factor_powering: true };
            let full = EngineOptions { use_symmetry: false, factor_powering: false };
            let a = genocchi_mod_prime(n, p, s, sym, &fc).unwrap();
            let b = genocchi_mod_prime(n, p, s, full, &fc).unwrap();
            assert_eq!(a, b, "n={n} s={s} p={p}");
        }
    }
}
