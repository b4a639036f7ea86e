//! Prime enumeration and smallest-prime-factor lookups.

use crate::{Error, Result};

/// All odd primes below `limit`, in increasing order. 2 is never listed.
#[derive(Debug, Clone)]
pub struct PrimeSet {
    pub limit: u64,
    pub primes: Vec<u64>,
}

/// Smallest prime factor of every integer in `2..limit`.
///
/// The table is also the primality sieve: `spf(j) == j` iff `j` is prime.
#[derive(Debug, Clone)]
pub struct SpfTable {
    pub limit: u64,
    spf: Vec<u32>,
}

impl SpfTable {
    /// Smallest prime factor of `j`. Panics if `j < 2` or `j >= limit`.
    pub fn spf(&self, j: u64) -> u64 {
        assert!(j >= 2 && j < self.limit, "spf index {j} out of range");
        u64::from(self.spf[j as usize])
    }

    pub fn is_prime(&self, j: u64) -> bool {
        j >= 2 && j < self.limit && u64::from(self.spf[j as usize]) == j
    }
}

/// Sieve of Eratosthenes recording the least prime factor of each
/// integer below `limit`.
pub fn smallest_prime_factor_table(limit: u64) -> Result<SpfTable> {
    if limit < 2 {
        return Err(Error::InvalidArgument(format!(
            "spf table needs limit >= 2, got {limit}"
        )));
    }
    let n: usize = limit
        .try_into()
        .map_err(|_| Error::InvalidArgument(format!("spf limit {limit} too large")))?;
    let mut spf = vec![0u32; n];
    for i in 2..n {
        if spf[i] == 0 {
            spf[i] = i as u32;
            // Composites below i*i already got a smaller factor.
            let mut j = i * i;
            while j < n {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
    }
    Ok(SpfTable { limit, spf })
}

/// All odd primes `3 <= p < limit`, increasing.
pub fn sieve_odd_primes(limit: u64) -> Result<PrimeSet> {
    if limit < 3 {
        return Err(Error::InvalidArgument(format!(
            "prime sieve needs limit >= 3, got {limit}"
        )));
    }
    let table = smallest_prime_factor_table(limit)?;
    let primes = (3..limit).step_by(2).filter(|&j| table.is_prime(j)).collect();
    Ok(PrimeSet { limit, primes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_division_is_prime(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        let mut d = 2;
        while d * d <= n {
            if n % d == 0 {
                return false;
            }
            d += 1;
        }
        true
    }

    #[test]
    fn small_prime_sets() {
        assert_eq!(sieve_odd_primes(10).unwrap().primes, vec![3, 5, 7]);
        assert!(sieve_odd_primes(3).unwrap().primes.is_empty());
        assert_eq!(sieve_odd_primes(576).unwrap().primes.len(), 104);
    }

    #[test]
    fn sieve_rejects_tiny_limit() {
        assert!(sieve_odd_primes(2).is_err());
        assert!(smallest_prime_factor_table(1).is_err());
    }

    #[test]
    fn spf_examples() {
        let t = smallest_prime_factor_table(10).unwrap();
        let got: Vec<u64> = (2..10).map(|j| t.spf(j)).collect();
        assert_eq!(got, vec![2, 3, 2, 5, 2, 7, 2, 3]);

        let t = smallest_prime_factor_table(2100).unwrap();
        assert_eq!(t.spf(49), 7);
        assert_eq!(t.spf(2047), 23); // 2047 = 23 * 89
    }

    #[test]
    fn spf_entries_divide_and_are_prime() {
        let t = smallest_prime_factor_table(5000).unwrap();
        for j in 2..5000 {
            let f = t.spf(j);
            assert_eq!(j % f, 0);
            assert!(trial_division_is_prime(f));
            assert_eq!(f == j, trial_division_is_prime(j));
        }
    }

    #[test]
    fn matches_trial_division() {
        for limit in [3, 4, 100, 7919, 20000] {
            let set = sieve_odd_primes(limit).unwrap();
            let expect: Vec<u64> = (3..limit)
                .filter(|&j| j % 2 == 1 && trial_division_is_prime(j))
                .collect();
            assert_eq!(set.primes, expect, "limit {limit}");
        }
    }

    #[test]
    fn membership_sampled_at_large_limit() {
        // Deterministic stride sampling keeps the large-limit check fast.
        let limit = 1_000_000;
        let t = smallest_prime_factor_table(limit).unwrap();
        let mut j = 2;
        while j < limit {
            assert_eq!(t.is_prime(j), trial_division_is_prime(j), "j = {j}");
            j += 997;
        }
    }
}
