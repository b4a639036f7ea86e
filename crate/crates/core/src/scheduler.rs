//! Parameter selection, batch dispatch, CRT reconstruction, and the
//! final conversion from G_n to B_n.
//!
//! For a target n and tradeoff knob alpha in [1/3, 1/2]:
//!
//!   N = floor(n^alpha ln^{1-alpha} n)   prime bound
//!   s = floor(2 n^{1-alpha} ln^alpha n) prime-power exponent
//!   r = floor(2 n^{1-2alpha} ln^{2alpha-1} n)  batch cardinality cap
//!
//! (natural logarithms, fixed for determinism). The odd primes below N
//! are packed greedily into batches of at most r primes with
//! `sum(p) <= s`, each batch runs the congruence engine, and the
//! residues are recombined. Correctness never rests on the float
//! parameter evaluation: an exact integer check confirms the CRT
//! modulus dominates twice the Genocchi bound before lifting.

use std::time::Instant;

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::engine::{genocchi_mod_batch, modulus_bits, BatchInput, EngineOptions};
use crate::genocchi::f_coefficients;
use crate::modring::{crt_combine, signed_lift, PrimePowerResidue};
use crate::oracle;
use crate::primes::sieve_odd_primes;
use crate::{pi_bracket, Error, Result};

/// Below this, `bernoulli` routes to the recurrence oracle.
pub const ORACLE_THRESHOLD: u64 = 256;

/// Feasibility floor for the parameter formulas: from here up,
/// n > s >= N >= 4 holds for every alpha in [1/3, 1/2].
pub const PLAN_MIN_N: u64 = 30;

const FLOAT_PREC: u32 = 128;

#[derive(Debug, Clone)]
pub struct PlanParams {
    pub n: u64,
    pub alpha: f64,
    /// Exclusive prime bound N (possibly grown by the sufficiency loop).
    pub prime_bound: u64,
    pub s: usize,
    /// Cardinality cap r on each batch.
    pub batch_cap: usize,
    pub batches: Vec<Vec<u64>>,
    pub modulus_bits: u32,
    /// ln(prod p^s) - ln(2 * 7 (n/pi)^n), in nats; must be positive.
    pub sufficiency_margin: f64,
}

impl PlanParams {
    pub fn prime_count(&self) -> usize {
        self.batches.iter().map(|b| b.len()).sum()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 1.0 / 3.0 && alpha <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in [1/3, 1/2], got {alpha}"
        )));
    }
    Ok(())
}

fn floor_to_u64(x: Float) -> Result<u64> {
    x.floor()
        .to_integer()
        .and_then(|i| i.to_u64())
        .ok_or_else(|| Error::Internal("parameter out of range".into()))
}

/// ln(prod_{3<=p<N} p^s) - ln(2 * 7 (n/pi)^n), the slack of the CRT
/// modulus over the exact Genocchi envelope |G_n| <= 7 (n/pi)^n.
fn sufficiency_margin(n: u64, s: usize, primes: &[u64]) -> f64 {
    let lhs: f64 = s as f64 * primes.iter().map(|&p| (p as f64).ln()).sum::<f64>();
    let rhs = 2f64.ln() + 7f64.ln() + n as f64 * ((n as f64).ln() - std::f64::consts::PI.ln());
    lhs - rhs
}

/// Derives N, s, r, the batch partition and the modulus width for n.
pub fn plan(n: u64, alpha: f64) -> Result<PlanParams> {
    check_alpha(alpha)?;
    if n < PLAN_MIN_N {
        return Err(Error::InvalidArgument(format!(
            "n={n} is below the pipeline floor {PLAN_MIN_N}; use the oracle"
        )));
    }

    let ln_n = Float::with_val(FLOAT_PREC, n).ln();
    let n_f = Float::with_val(FLOAT_PREC, n);
    let a = Float::with_val(FLOAT_PREC, alpha);

    let pow = |base: &Float, e: Float| -> Float { base.clone().pow(e) };
    let n_bound_f = pow(&n_f, a.clone()) * pow(&ln_n, 1f32 - a.clone());
    let s_f = 2u32 * pow(&n_f, 1f32 - a.clone()) * pow(&ln_n, a.clone());
    let r_f = 2u32 * pow(&n_f, 1f32 - 2u32 * a.clone()) * pow(&ln_n, 2u32 * a.clone() - 1f32);

    let mut prime_bound = floor_to_u64(n_bound_f)?;
    let s = usize::try_from(floor_to_u64(s_f)?)
        .map_err(|_| Error::Internal("s out of range".into()))?;
    let batch_cap = usize::try_from(floor_to_u64(r_f)?.max(1))
        .map_err(|_| Error::Internal("r out of range".into()))?;

    if prime_bound < 4 || (s as u64) < prime_bound || (s as u64) >= n {
        return Err(Error::Internal(format!(
            "degenerate parameters for n={n}, alpha={alpha}: N={prime_bound}, s={s}"
        )));
    }

    // Grow N until the CRT modulus provably covers 2 |G_n|.
    let mut primes;
    let mut margin;
    let mut rounds = 0;
    loop {
        primes = sieve_odd_primes(prime_bound)?.primes;
        margin = sufficiency_margin(n, s, &primes);
        if margin > 0.0 {
            break;
        }
        prime_bound += (prime_bound / 10).max(1);
        rounds += 1;
        if rounds > 1000 {
            return Err(Error::Internal(format!(
                "sufficiency did not converge for n={n}, alpha={alpha}"
            )));
        }
    }
    if prime_bound > s as u64 {
        return Err(Error::Internal(format!(
            "prime bound {prime_bound} outgrew s={s} while restoring sufficiency"
        )));
    }

    let mut batches: Vec<Vec<u64>> = Vec::new();
    let mut current: Vec<u64> = Vec::new();
    let mut sum: u64 = 0;
    for &p in &primes {
        if !current.is_empty() && (current.len() >= batch_cap || sum + p > s as u64) {
            batches.push(std::mem::take(&mut current));
            sum = 0;
        }
        if p > s as u64 {
            return Err(Error::Internal(format!(
                "prime {p} alone exceeds s={s}; no feasible batch"
            )));
        }
        sum += p;
        current.push(p);
    }
    if !current.is_empty() {
        batches.push(current);
    }

    let modulus_bits = modulus_bits(n, prime_bound, s)?;
    Ok(PlanParams {
        n,
        alpha,
        prime_bound,
        s,
        batch_cap,
        batches,
        modulus_bits,
        sufficiency_margin: margin,
    })
}

#[derive(Debug, Clone, Default)]
pub struct StageTimings {
    pub plan_ms: f64,
    pub coefficients_ms: f64,
    pub engine_ms: f64,
    pub crt_ms: f64,
    pub convert_ms: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub genocchi: Integer,
    pub plan: PlanParams,
    pub timings: StageTimings,
    pub peak_workspace_bytes: u64,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Full pipeline: plan, coefficients, engine per batch, CRT, lift.
pub fn run_pipeline(n: u64, alpha: f64, threads: usize) -> Result<PipelineReport> {
    if n % 2 == 1 {
        return Err(Error::InvalidArgument(
            "the pipeline computes even-index Genocchi numbers".into(),
        ));
    }
    let t = Instant::now();
    let plan = plan(n, alpha)?;
    let plan_ms = ms(t);

    // Steps 1-3 happen once: F depends on (n, s) but not on p.
    let t = Instant::now();
    let fc = f_coefficients(n, plan.s)?;
    let coefficients_ms = ms(t);

    let t = Instant::now();
    let make_input = |batch: &Vec<u64>| BatchInput {
        n,
        s: plan.s,
        prime_bound: plan.prime_bound,
        primes: batch.clone(),
        options: EngineOptions::default(),
    };
    let outputs = if threads > 1 && plan.batches.len() > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
        pool.install(|| {
            plan.batches
                .par_iter()
                .map(|b| genocchi_mod_batch(&make_input(b), &fc))
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        plan.batches
            .iter()
            .map(|b| genocchi_mod_batch(&make_input(b), &fc))
            .collect::<Result<Vec<_>>>()?
    };
    let engine_ms = ms(t);

    let workers = threads.clamp(1, plan.batches.len().max(1)) as u64;
    let peak_workspace_bytes =
        outputs.iter().map(|o| o.workspace_bytes).max().unwrap_or(0) * workers;

    let t = Instant::now();
    let mut residues: Vec<PrimePowerResidue> = outputs
        .into_iter()
        .flat_map(|o| o.residues.into_values())
        .collect();
    residues.sort_by_key(|r| r.p);
    let (value, modulus) = crt_combine(&residues)?;
    assert_sufficient(n, &modulus)?;
    let genocchi = signed_lift(&value, &modulus)?;
    let crt_ms = ms(t);

    Ok(PipelineReport {
        genocchi,
        plan,
        timings: StageTimings {
            plan_ms,
            coefficients_ms,
            engine_ms,
            crt_ms,
            convert_ms: 0.0,
        },
        peak_workspace_bytes,
    })
}

/// Exact proof that the CRT modulus exceeds 2 |G_n|, using
/// |G_n| <= 7 (n/pi)^n and a rational lower bracket of pi.
fn assert_sufficient(n: u64, modulus: &Integer) -> Result<()> {
    let e = u32::try_from(n)
        .map_err(|_| Error::InvalidArgument(format!("n={n} too large")))?;
    let lhs = Integer::from(pi_bracket::LO_NUM).pow(e) * modulus;
    let rhs = (Integer::from(n) * pi_bracket::SCALE).pow(e) * 14u32;
    if lhs > rhs {
        Ok(())
    } else {
        Err(Error::Internal(format!(
            "CRT modulus cannot bound 2 |G_{n}|; the plan should have prevented this"
        )))
    }
}

/// Exact G_n through the full pipeline.
pub fn genocchi_number(n: u64, alpha: f64) -> Result<Integer> {
    if n % 2 == 1 || n < PLAN_MIN_N {
        return Err(Error::InvalidArgument(format!(
            "genocchi_number needs even n >= {PLAN_MIN_N}, got {n}"
        )));
    }
    Ok(run_pipeline(n, alpha, 1)?.genocchi)
}

/// B_n = G_n / (2 (1 - 2^n)), reduced; the reduced denominator must
/// equal the von Staudt-Clausen product, which certifies the residues
/// and the reconstruction end to end.
pub fn to_bernoulli(genocchi: &Integer, n: u64) -> Result<Rational> {
    if n % 2 == 1 || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "Bernoulli conversion needs even n >= 2, got {n}"
        )));
    }
    let shift = u32::try_from(n + 1)
        .map_err(|_| Error::InvalidArgument(format!("n={n} too large")))?;
    let denom = Integer::from(2) - (Integer::from(1) << shift);
    let b = Rational::from((genocchi.clone(), denom));
    let expect = vsc_denominator(n);
    if *b.denom() != expect {
        return Err(Error::Internal(format!(
            "denominator of B_{n} is {}, von Staudt-Clausen demands {expect}",
            b.denom()
        )));
    }
    Ok(b)
}

fn is_prime_u64(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= q {
        if q % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Product of the primes p with (p-1) | n: the exact denominator of
/// B_n for even n.
pub fn vsc_denominator(n: u64) -> Integer {
    let mut divisors = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            divisors.push(d);
            if d != n / d {
                divisors.push(n / d);
            }
        }
        d += 1;
    }
    let mut product = Integer::from(1);
    for d in divisors {
        if is_prime_u64(d + 1) {
            product *= d + 1;
        }
    }
    product
}

/// Exact B_n for any n: closed forms for 0, 1 and odd indices, the
/// recurrence oracle below the threshold, the full pipeline above it.
pub fn bernoulli(n: u64, alpha: f64) -> Result<Rational> {
    check_alpha(alpha)?;
    if n == 0 {
        return Ok(Rational::from(1));
    }
    if n == 1 {
        return Ok(Rational::from((-1, 2)));
    }
    if n % 2 == 1 {
        return Ok(Rational::new());
    }
    if n < ORACLE_THRESHOLD {
        return oracle::bernoulli_exact_small(n as usize);
    }
    to_bernoulli(&genocchi_number(n, alpha)?, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_frozen_parameters() {
        let p = plan(1_000_000, 1.0 / 3.0).unwrap();
        assert_eq!(p.prime_bound, 575);
        assert_eq!(p.s, 47_990);
        assert_eq!(p.batch_cap, 83);
        assert!(p.batch_cap as u64 * p.prime_bound <= p.s as u64);
        assert!(p.sufficiency_margin > 0.0);

        let p = plan(1_000_000, 0.5).unwrap();
        assert_eq!(p.prime_bound, 3716);
        assert_eq!(p.s, 7433);
        assert_eq!(p.batch_cap, 2);
    }

    #[test]
    fn plan_batches_respect_caps() {
        for (n, alpha) in [(1_000u64, 1.0 / 3.0), (50_000, 0.4), (250_000, 0.5)] {
            let p = plan(n, alpha).unwrap();
            assert!(n > p.s as u64 && p.s as u64 >= p.prime_bound && p.prime_bound >= 4);
            for batch in &p.batches {
                assert!(batch.len() <= p.batch_cap);
                assert!(batch.iter().sum::<u64>() <= p.s as u64);
            }
            let mut all: Vec<u64> = p.batches.iter().flatten().copied().collect();
            let expect = sieve_odd_primes(p.prime_bound).unwrap().primes;
            all.sort_unstable();
            assert_eq!(all, expect);
        }
    }

    #[test]
    fn plan_rejects_bad_arguments() {
        assert!(plan(1000, 0.2).is_err());
        assert!(plan(1000, 0.6).is_err());
        assert!(plan(10, 0.5).is_err());
    }

    #[test]
    fn vsc_examples() {
        assert_eq!(vsc_denominator(10), 66);
        assert_eq!(vsc_denominator(12), 2730);
        assert_eq!(vsc_denominator(2), 6);
    }

    #[test]
    fn conversion_examples() {
        let b = to_bernoulli(&Integer::from(-155), 10).unwrap();
        assert_eq!(b, Rational::from((5, 66)));
        let b = to_bernoulli(&Integer::from(2073), 12).unwrap();
        assert_eq!(b, Rational::from((-691, 2730)));
        assert!(to_bernoulli(&Integer::from(1), 1).is_err());
    }

    #[test]
    fn bernoulli_dispatch() {
        let a = 1.0 / 3.0;
        assert_eq!(bernoulli(0, a).unwrap(), Rational::from(1));
        assert_eq!(bernoulli(1, a).unwrap(), Rational::from((-1, 2)));
        assert_eq!(bernoulli(7, a).unwrap(), Rational::new());
        assert_eq!(bernoulli(12, a).unwrap(), Rational::from((-691, 2730)));
    }

    #[test]
    fn pipeline_small_even() {
        // n = 30 runs the genuine pipeline and must match the oracle.
        let g = genocchi_number(30, 0.5).unwrap();
        let row = oracle::BernoulliRow::up_to(30).unwrap();
        assert_eq!(g, row.genocchi(30));
    }
}
