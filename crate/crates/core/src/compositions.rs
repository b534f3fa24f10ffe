//! Weighted compositions `Ω(k, n)`: all `(n_1, …, n_k) ∈ ℕ₀^k` with
//! `Σ_j j·n_j = n`.
//!
//! Enumeration order is colexicographic: the part for the largest jump size
//! varies slowest and `n_1` is always the remainder. For `(k, n) = (3, 4)`
//! this yields `(4,0,0), (2,1,0), (0,2,0), (1,0,1)`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{MgcpError, Result};

/// Default upper bound on the number of jump sizes `k`.
pub const DEFAULT_MAX_JUMP_SIZES: usize = 16;

/// One element of `Ω(k, n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Composition {
    /// `parts[j]` counts jumps of size `j + 1`.
    pub parts: Vec<u64>,
    pub weight: u64,
    /// Total number of jumps, `Σ_j parts[j]`.
    pub eta: u64,
}

impl Composition {
    fn from_parts(parts: Vec<u64>, weight: u64) -> Self {
        let eta = parts.iter().sum();
        debug_assert_eq!(
            parts.iter().enumerate().map(|(j, &c)| (j as u64 + 1) * c).sum::<u64>(),
            weight,
            "composition violates its weight constraint"
        );
        Self { parts, weight, eta }
    }
}

/// Lazy iterator over `Ω(k, n)`.
#[derive(Debug, Clone)]
pub struct Compositions {
    parts: Vec<u64>,
    weight: u64,
    done: bool,
}

impl Compositions {
    fn new(k: usize, n: u64) -> Self {
        let mut parts = vec![0; k];
        parts[0] = n;
        Self {
            parts,
            weight: n,
            done: false,
        }
    }

    fn advance(&mut self) -> bool {
        let k = self.parts.len();
        // weight carried by sizes > j+1
        let mut above: Vec<u64> = vec![0; k];
        for j in (0..k.saturating_sub(1)).rev() {
            above[j] = above[j + 1] + (j as u64 + 2) * self.parts[j + 1];
        }
        for j in 1..k {
            let size = j as u64 + 1;
            let budget = self.weight - above[j];
            if size * (self.parts[j] + 1) <= budget {
                self.parts[j] += 1;
                for p in &mut self.parts[1..j] {
                    *p = 0;
                }
                self.parts[0] = budget - size * self.parts[j];
                return true;
            }
        }
        false
    }
}

impl Iterator for Compositions {
    type Item = Composition;

    fn next(&mut self) -> Option<Composition> {
        if self.done {
            return None;
        }
        let out = Composition::from_parts(self.parts.clone(), self.weight);
        self.done = !self.advance();
        Some(out)
    }
}

fn check_k(k: usize, max_k: usize) -> Result<()> {
    if k == 0 {
        return Err(MgcpError::InvalidArgument("number of jump sizes k must be at least 1".into()));
    }
    if k > max_k {
        return Err(MgcpError::param(
            "k",
            format!("{k} jump sizes exceeds the configured maximum of {max_k}"),
        ));
    }
    Ok(())
}

/// Iterate `Ω(k, n)` in colexicographic order.
pub fn enumerate_compositions(k: usize, n: u64) -> Result<Compositions> {
    check_k(k, DEFAULT_MAX_JUMP_SIZES)?;
    Ok(Compositions::new(k, n))
}

/// `|Ω(k, n)|`, the number of partitions of `n` into parts of size at most `k`.
pub fn count_compositions(k: usize, n: u64) -> Result<u128> {
    check_k(k, DEFAULT_MAX_JUMP_SIZES)?;
    let n = n as usize;
    let mut ways = vec![0u128; n + 1];
    ways[0] = 1;
    for size in 1..=k {
        for m in size..=n {
            ways[m] += ways[m - size];
        }
    }
    Ok(ways[n])
}

/// Memoized `Ω(k, n)` lists, shareable across threads.
#[derive(Debug, Default)]
pub struct CompositionCache {
    max_k: usize,
    inner: RwLock<HashMap<(usize, u64), Arc<Vec<Composition>>>>,
}

impl CompositionCache {
    pub fn new(max_k: usize) -> Self {
        Self {
            max_k,
            inner: RwLock::new(HashMap::new()),
        }
    }

    pub fn get(&self, k: usize, n: u64) -> Result<Arc<Vec<Composition>>> {
        check_k(k, self.max_k)?;
        if let Some(hit) = self.inner.read().expect("cache poisoned").get(&(k, n)) {
            return Ok(Arc::clone(hit));
        }
        let list = Arc::new(Compositions::new(k, n).collect::<Vec<_>>());
        let mut guard = self.inner.write().expect("cache poisoned");
        Ok(Arc::clone(guard.entry((k, n)).or_insert(list)))
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parts(k: usize, n: u64) -> Vec<Vec<u64>> {
        enumerate_compositions(k, n).unwrap().map(|c| c.parts).collect()
    }

    fn brute_force(k: usize, n: u64) -> Vec<Vec<u64>> {
        let mut out = Vec::new();
        let mut cur = vec![0u64; k];
        loop {
            let w: u64 = cur.iter().enumerate().map(|(j, &c)| (j as u64 + 1) * c).sum();
            if w == n {
                out.push(cur.clone());
            }
            let mut idx = 0;
            loop {
                if idx == k {
                    return out;
                }
                if cur[idx] < n {
                    cur[idx] += 1;
                    break;
                }
                cur[idx] = 0;
                idx += 1;
            }
        }
    }

    #[test]
    fn small_examples() {
        assert_eq!(parts(2, 2), vec![vec![2, 0], vec![0, 1]]);
        assert_eq!(parts(4, 0), vec![vec![0, 0, 0, 0]]);
        assert_eq!(
            parts(3, 4),
            vec![vec![4, 0, 0], vec![2, 1, 0], vec![0, 2, 0], vec![1, 0, 1]]
        );
        assert_eq!(parts(1, 7), vec![vec![7]]);
    }

    #[test]
    fn matches_brute_force_as_sets() {
        for k in 1..=4 {
            for n in 0..=9 {
                let mut a = parts(k, n);
                let mut b = brute_force(k, n);
                a.sort();
                b.sort();
                assert_eq!(a, b, "k={k} n={n}");
            }
        }
    }

    #[test]
    fn counts() {
        assert_eq!(count_compositions(1, 13).unwrap(), 1);
        assert_eq!(count_compositions(2, 5).unwrap(), 3);
        assert_eq!(count_compositions(3, 4).unwrap(), 4);
        assert_eq!(count_compositions(5, 0).unwrap(), 1);
    }

    #[test]
    fn count_equals_enumeration_exhaustively() {
        for k in 1..=6 {
            for n in 0..=40 {
                let listed = enumerate_compositions(k, n).unwrap().count() as u128;
                assert_eq!(listed, count_compositions(k, n).unwrap(), "k={k} n={n}");
            }
        }
    }

    #[test]
    fn eta_and_weight_fields() {
        for c in enumerate_compositions(3, 6).unwrap() {
            assert_eq!(c.weight, 6);
            assert_eq!(c.eta, c.parts.iter().sum::<u64>());
        }
    }

    #[test]
    fn k_bounds() {
        assert!(enumerate_compositions(0, 3).is_err());
        assert!(enumerate_compositions(DEFAULT_MAX_JUMP_SIZES + 1, 3).is_err());
        let cache = CompositionCache::new(4);
        assert!(cache.get(5, 1).is_err());
        let a = cache.get(3, 4).unwrap();
        let b = cache.get(3, 4).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
    }
}
