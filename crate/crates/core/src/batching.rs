//! Random batches of particle indices.
//!
//! Indices are 0-based. A [`BatchPartition`] splits `0..N` into disjoint
//! batches (one per step, without replacement); a [`SampledBatch`] is a
//! single uniformly drawn subset (with replacement across draws).
//!
//! When `p` does not divide `N` the permutation is cut into blocks of `p`
//! and the short tail of size `r = N mod p` is kept as its own batch if
//! `r >= 2`, or merged into the previous batch if `r == 1`. Members within a
//! batch are stored in ascending order.

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{input_err, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPartition {
    n: usize,
    batch_size: usize,
    members: Vec<usize>,
    offsets: Vec<usize>,
    batch_of: Vec<usize>,
}

fn check_sizes(n: usize, p: usize) -> Result<()> {
    if p < 2 || p > n {
        return input_err(format!("batch size must satisfy 2 <= p <= N, got p={p}, N={n}"));
    }
    Ok(())
}

impl BatchPartition {
    /// Builds a partition from explicit batches, validating disjointness,
    /// coverage and that every batch has at least two members.
    pub fn from_batches(n: usize, batch_size: usize, batches: Vec<Vec<usize>>) -> Result<Self> {
        check_sizes(n, batch_size)?;
        let mut members = Vec::with_capacity(n);
        let mut offsets = vec![0];
        let mut batch_of = vec![usize::MAX; n];
        for (q, mut b) in batches.into_iter().enumerate() {
            if b.len() < 2 {
                return input_err("every batch needs at least two members");
            }
            b.sort_unstable();
            for &i in &b {
                if i >= n || batch_of[i] != usize::MAX {
                    return input_err(format!("index {i} out of range or repeated"));
                }
                batch_of[i] = q;
            }
            members.extend(b);
            offsets.push(members.len());
        }
        if members.len() != n {
            return input_err("batches do not cover every index");
        }
        Ok(Self {
            n,
            batch_size,
            members,
            offsets,
            batch_of,
        })
    }

    fn from_permutation(n: usize, p: usize, mut perm: Vec<usize>) -> Self {
        let mut offsets: Vec<usize> = (0..=n / p).map(|q| q * p).collect();
        match n % p {
            0 => {}
            1 => *offsets.last_mut().unwrap() = n,
            _ => offsets.push(n),
        }
        let mut batch_of = vec![0; n];
        for (q, w) in offsets.windows(2).enumerate() {
            let block = &mut perm[w[0]..w[1]];
            block.sort_unstable();
            for &i in block.iter() {
                batch_of[i] = q;
            }
        }
        Self {
            n,
            batch_size: p,
            members: perm,
            offsets,
            batch_of,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Nominal batch size `p`.
    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn num_batches(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn batch(&self, q: usize) -> &[usize] {
        &self.members[self.offsets[q]..self.offsets[q + 1]]
    }

    pub fn batches(&self) -> impl Iterator<Item = &[usize]> {
        self.offsets.windows(2).map(|w| &self.members[w[0]..w[1]])
    }

    /// The batch that contains particle `i`.
    pub fn batch_of(&self, i: usize) -> &[usize] {
        self.batch(self.batch_of[i])
    }

    pub fn same_batch(&self, i: usize, j: usize) -> bool {
        self.batch_of[i] == self.batch_of[j]
    }
}

/// Uniform random partition from a Fisher–Yates shuffle; O(N).
pub fn random_partition<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<BatchPartition> {
    check_sizes(n, p)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    Ok(BatchPartition::from_permutation(n, p, perm))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledBatch {
    members: Vec<usize>,
}

impl SampledBatch {
    pub fn members(&self) -> &[usize] {
        &self.members
    }
}

/// A uniformly random `p`-subset of `0..N`, sorted.
pub fn sample_with_replacement<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<SampledBatch> {
    check_sizes(n, p)?;
    let mut members = index::sample(rng, n, p).into_vec();
    members.sort_unstable();
    Ok(SampledBatch { members })
}

/// `P(i and j share a batch) = (p-1)/(N-1)` for a uniform partition with `p | N`.
pub fn pair_incidence_probability(n: usize, p: usize) -> Result<f64> {
    check_sizes(n, p)?;
    Ok((p - 1) as f64 / (n - 1) as f64)
}

/// `P(i~j and j~k) = (p-1)(p-2) / ((N-1)(N-2))` for distinct `i, j, k`.
pub fn triple_incidence_probability(n: usize, p: usize) -> Result<f64> {
    check_sizes(n, p)?;
    if n < 3 {
        return input_err("triple incidence needs N >= 3");
    }
    Ok(((p - 1) * (p - 2)) as f64 / ((n - 1) * (n - 2)) as f64)
}

/// Every unordered partition of `0..N` into batches of size `p`.
///
/// Requires `p | N`; the count is `N! / ((p!)^(N/p) (N/p)!)`, so this is
/// restricted to `N <= 16`.
pub fn enumerate_partitions(n: usize, p: usize) -> Result<Vec<BatchPartition>> {
    check_sizes(n, p)?;
    if !n.is_multiple_of(p) {
        return input_err("exhaustive enumeration needs p | N");
    }
    if n > 16 {
        return input_err("exhaustive enumeration is limited to N <= 16");
    }
    let mut out = Vec::new();
    let mut current: Vec<Vec<usize>> = Vec::new();
    let mut used = vec![false; n];
    enumerate_rec(n, p, &mut used, &mut current, &mut out)?;
    Ok(out)
}

fn enumerate_rec(
    n: usize,
    p: usize,
    used: &mut [bool],
    current: &mut Vec<Vec<usize>>,
    out: &mut Vec<BatchPartition>,
) -> Result<()> {
    let Some(first) = used.iter().position(|u| !u) else {
        out.push(BatchPartition::from_batches(n, p, current.clone())?);
        return Ok(());
    };
    used[first] = true;
    let rest: Vec<usize> = (first + 1..n).filter(|&i| !used[i]).collect();
    let mut combo = Vec::with_capacity(p - 1);
    choose_rec(&rest, 0, p - 1, &mut combo, &mut |picked: &[usize]| {
        for &i in picked {
            used[i] = true;
        }
        let mut batch = vec![first];
        batch.extend_from_slice(picked);
        current.push(batch);
        let r = enumerate_rec(n, p, used, current, out);
        current.pop();
        for &i in picked {
            used[i] = false;
        }
        r
    })?;
    used[first] = false;
    Ok(())
}

fn choose_rec(
    pool: &[usize],
    start: usize,
    k: usize,
    combo: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    if combo.len() == k {
        return f(combo);
    }
    for idx in start..pool.len() {
        if pool.len() - idx < k - combo.len() {
            break;
        }
        combo.push(pool[idx]);
        choose_rec(pool, idx + 1, k, combo, f)?;
        combo.pop();
    }
    Ok(())
}

impl From<SampledBatch> for Vec<usize> {
    fn from(b: SampledBatch) -> Self {
        b.members
    }
}
