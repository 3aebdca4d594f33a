//! Integer combinatorics behind the group formulas.

use std::fmt;

/// Cycle type of a permutation: a partition of `k` stored as
/// `(cycle length, multiplicity)` pairs in decreasing order of length.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    multiplicities: Vec<(usize, usize)>,
}

impl Partition {
    /// Builds the descriptor from parts in any order. Zero parts are ignored.
    pub fn from_parts(parts: &[usize]) -> Self {
        let mut sorted: Vec<usize> = parts.iter().copied().filter(|&p| p > 0).collect();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let mut multiplicities: Vec<(usize, usize)> = Vec::new();
        for p in sorted {
            match multiplicities.last_mut() {
                Some((len, count)) if *len == p => *count += 1,
                _ => multiplicities.push((p, 1)),
            }
        }
        Partition { multiplicities }
    }

    /// `(l, m_l)` pairs, longest cycle first.
    pub fn multiplicities(&self) -> &[(usize, usize)] {
        &self.multiplicities
    }

    /// Multiplicity `m_l` of cycle length `l` (zero if absent).
    pub fn count(&self, len: usize) -> usize {
        self.multiplicities
            .iter()
            .find(|(l, _)| *l == len)
            .map_or(0, |(_, m)| *m)
    }

    /// Parts in non-increasing order.
    pub fn parts(&self) -> Vec<usize> {
        self.multiplicities
            .iter()
            .flat_map(|&(l, m)| std::iter::repeat_n(l, m))
            .collect()
    }

    /// The integer being partitioned.
    pub fn total(&self) -> usize {
        self.multiplicities.iter().map(|(l, m)| l * m).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.multiplicities.is_empty()
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, p) in self.parts().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "]")
    }
}

/// Iterator over the partitions of `k` in lexicographic order of the
/// decreasing part sequence, starting from `[k]`.
///
/// Holds a single working buffer of at most `k` parts.
#[derive(Clone, Debug)]
pub struct Partitions {
    parts: Vec<usize>,
    done: bool,
}

impl Iterator for Partitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        let current = Partition::from_parts(&self.parts);

        // Advance: find the rightmost part larger than one, decrement it and
        // refill the tail greedily with parts no larger than the new value.
        let mut ones = 0;
        while let Some(&1) = self.parts.last() {
            self.parts.pop();
            ones += 1;
        }
        match self.parts.pop() {
            None => self.done = true,
            Some(p) => {
                let cap = p - 1;
                let mut rest = ones + 1;
                self.parts.push(cap);
                while rest > 0 {
                    let piece = rest.min(cap);
                    self.parts.push(piece);
                    rest -= piece;
                }
            }
        }
        Some(current)
    }
}

/// All partitions of `k`. `k = 0` yields a single empty partition.
pub fn partitions(k: usize) -> Partitions {
    Partitions {
        parts: if k == 0 { Vec::new() } else { vec![k] },
        done: false,
    }
}

/// Fraction of `S_k` in the conjugacy class with this cycle type:
/// `1 / ∏_l (l^{m_l} m_l!)`.
///
/// Evaluated as a running product of reciprocals so it stays finite for any
/// `k` whose partitions can be enumerated.
pub fn symmetric_class_weight(p: &Partition) -> f64 {
    let mut w = 1.0;
    for &(len, mult) in p.multiplicities() {
        let inv_len = 1.0 / len as f64;
        for j in 1..=mult {
            w *= inv_len / j as f64;
        }
    }
    w
}

/// Euler's totient.
///
/// # Panics
/// If `q == 0`.
pub fn totient(q: u64) -> u64 {
    assert!(q >= 1, "totient is defined for positive integers");
    let mut n = q;
    let mut result = q;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            while n.is_multiple_of(p) {
                n /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

/// Divisors of `k` in ascending order.
///
/// # Panics
/// If `k == 0`.
pub fn divisors(k: u64) -> Vec<u64> {
    assert!(k >= 1, "divisors are defined for positive integers");
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= k {
        if k.is_multiple_of(d) {
            small.push(d);
            if d != k / d {
                large.push(k / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// Number of strictly decreasing chains `l > l' > ... > q` in which every
/// element divides its predecessor. One when `l == q`, zero when `q ∤ l`.
pub fn divisor_chain_count(l: u64, q: u64) -> u64 {
    assert!(l >= 1 && q >= 1, "chain endpoints must be positive");
    if !l.is_multiple_of(q) {
        return 0;
    }
    // Work in units of q: chains from l/q down to 1 through divisors.
    let top = l / q;
    let divs = divisors(top);
    // counts[i] = number of chains from divs[i] down to 1.
    let mut counts = vec![0u64; divs.len()];
    for (i, &d) in divs.iter().enumerate() {
        counts[i] = if d == 1 {
            1
        } else {
            divs[..i]
                .iter()
                .zip(&counts[..i])
                .filter(|(&e, _)| d % e == 0)
                .map(|(_, &c)| c)
                .sum()
        };
    }
    counts[divs.len() - 1]
}

/// A binomial coefficient: exact while it fits in `u64`, otherwise its
/// natural logarithm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Binomial {
    Exact(u64),
    Log(f64),
}

impl Binomial {
    /// Value as a double (may be `inf` for huge log-space values).
    pub fn to_f64(self) -> f64 {
        match self {
            Binomial::Exact(v) => v as f64,
            Binomial::Log(l) => l.exp(),
        }
    }

    pub fn ln(self) -> f64 {
        match self {
            Binomial::Exact(v) => (v as f64).ln(),
            Binomial::Log(l) => l,
        }
    }
}

/// `a choose b`. The switch to log space happens exactly when the value
/// exceeds `u64::MAX`.
///
/// # Panics
/// If `b > a`.
pub fn binomial(a: u64, b: u64) -> Binomial {
    assert!(b <= a, "binomial({a}, {b}) requires b <= a");
    let b = b.min(a - b);
    let mut acc: u128 = 1;
    for i in 1..=b {
        // acc * (a - b + i) / i is always an integer.
        match acc.checked_mul(u128::from(a - b + i)) {
            Some(v) => acc = v / u128::from(i),
            None => return Binomial::Log(ln_binomial(a, b)),
        }
        if acc > u128::from(u64::MAX) {
            return Binomial::Log(ln_binomial(a, b));
        }
    }
    Binomial::Exact(acc as u64)
}

/// `ln(a choose b)` by summing logs of the multiplicative formula.
pub fn ln_binomial(a: u64, b: u64) -> f64 {
    assert!(b <= a, "binomial({a}, {b}) requires b <= a");
    let b = b.min(a - b);
    (1..=b)
        .map(|i| ((a - b + i) as f64 / i as f64).ln())
        .sum()
}

/// All `s`-element subsets of `0..n` as sorted lists, in lexicographic order.
pub fn subsets_of_size(n: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if s > n {
        return out;
    }
    let mut current: Vec<usize> = (0..s).collect();
    loop {
        out.push(current.clone());
        // Rightmost position that can still advance.
        let Some(i) = (0..s).rev().find(|&i| current[i] < n - s + i) else {
            return out;
        };
        current[i] += 1;
        for j in i + 1..s {
            current[j] = current[j - 1] + 1;
        }
    }
}
