//! Words over n generators, positive regular symbols and the weights b_α^{(m)}.
//!
//! Letters are stored 0-based; `g1` in displayed form is letter 0.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{NcError, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(letters: Vec<usize>) -> Self {
        Word(letters)
    }

    pub fn letter(i: usize) -> Self {
        Word(vec![i])
    }

    /// From 1-based letters as used in JSON and on the command line.
    pub fn from_one_based(letters: &[usize]) -> Result<Self> {
        letters
            .iter()
            .map(|&l| l.checked_sub(1).ok_or_else(|| NcError::InvalidSymbol("letter 0 in word".into())))
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|l| l + 1).collect()
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn reversed(&self) -> Self {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn concat(&self, other: &Word) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn prepend(&self, letter: usize) -> Self {
        let mut v = Vec::with_capacity(self.len() + 1);
        v.push(letter);
        v.extend_from_slice(&self.0);
        Word(v)
    }

    pub fn append(&self, letter: usize) -> Self {
        let mut v = self.0.clone();
        v.push(letter);
        Word(v)
    }

    pub fn slice(&self, from: usize, to: usize) -> Self {
        Word(self.0[from..to].to_vec())
    }

    pub fn max_letter(&self) -> Option<usize> {
        self.0.iter().copied().max()
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "g0");
        }
        for l in &self.0 {
            write!(f, "g{}", l + 1)?;
        }
        Ok(())
    }
}

/// Number of words of length ≤ `max_len` over `n` letters.
pub fn word_count(n: usize, max_len: usize) -> usize {
    (0..=max_len).map(|k| n.pow(k as u32)).sum()
}

/// Position of `w` in the canonical graded-lexicographic order.
pub fn word_index(n: usize, w: &Word) -> usize {
    let offset: usize = (0..w.len()).map(|k| n.pow(k as u32)).sum();
    offset + w.0.iter().fold(0usize, |acc, &l| acc * n + l)
}

/// Inverse of [`word_index`].
pub fn word_at(n: usize, mut idx: usize) -> Word {
    let mut len = 0;
    loop {
        let block = n.pow(len as u32);
        if idx < block {
            break;
        }
        idx -= block;
        len += 1;
    }
    let mut letters = vec![0; len];
    for slot in letters.iter_mut().rev() {
        *slot = idx % n;
        idx /= n;
    }
    Word(letters)
}

/// All words of length ≤ `max_len` in canonical order.
pub fn enumerate_words(n: usize, max_len: usize) -> Vec<Word> {
    assert!(n >= 1, "at least one generator");
    let mut out = vec![Word::empty()];
    let mut level = vec![Word::empty()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(level.len() * n);
        for w in &level {
            for l in 0..n {
                next.push(w.append(l));
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

/// A positive regular polynomial symbol f = Σ a_α X_α.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeSymbol {
    n: usize,
    terms: BTreeMap<Word, f64>,
}

impl FreeSymbol {
    pub fn new(n: usize, terms: impl IntoIterator<Item = (Word, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(NcError::InvalidSymbol("n must be at least 1".into()));
        }
        let mut map = BTreeMap::new();
        for (w, a) in terms {
            if w.is_empty() {
                return Err(NcError::InvalidSymbol("constant term must vanish".into()));
            }
            if w.max_letter().is_some_and(|l| l >= n) {
                return Err(NcError::InvalidSymbol(format!("letter out of range in {w}")));
            }
            if !a.is_finite() || a < 0.0 {
                return Err(NcError::InvalidSymbol(format!("coefficient of {w} must be finite and ≥ 0")));
            }
            *map.entry(w).or_insert(0.0) += a;
        }
        for i in 0..n {
            if map.get(&Word::letter(i)).copied().unwrap_or(0.0) <= 0.0 {
                return Err(NcError::InvalidSymbol(format!("coefficient of g{} must be positive", i + 1)));
            }
        }
        map.retain(|_, a| *a > 0.0);
        Ok(FreeSymbol { n, terms: map })
    }

    /// f = X_1 + … + X_n.
    pub fn linear(n: usize) -> Self {
        Self::weighted_linear(&vec![1.0; n]).expect("unit weights are regular")
    }

    pub fn weighted_linear(a: &[f64]) -> Result<Self> {
        Self::new(a.len(), a.iter().enumerate().map(|(i, &x)| (Word::letter(i), x)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, f64)> {
        self.terms.iter().map(|(w, &a)| (w, a))
    }

    pub fn coeff(&self, w: &Word) -> f64 {
        self.terms.get(w).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }

    pub fn is_homogeneous(&self) -> bool {
        let d = self.degree();
        self.terms.keys().all(|w| w.len() == d)
    }

    pub fn reverse(&self) -> Self {
        FreeSymbol {
            n: self.n,
            terms: self.terms.iter().map(|(w, &a)| (w.reversed(), a)).collect(),
        }
    }

    pub fn is_palindromic(&self) -> bool {
        self.reverse() == *self
    }
}

/// b_α^{(m)} for all words of length ≤ `max_len`, indexed by canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTable {
    pub n: usize,
    pub m: usize,
    pub max_len: usize,
    values: Vec<f64>,
}

impl WeightTable {
    pub fn get(&self, w: &Word) -> f64 {
        self.values[word_index(self.n, w)]
    }

    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn weights_generic<T>(n: usize, terms: &[(Word, T)], m: usize, max_len: usize) -> Vec<T>
where
    T: Clone + Zero + One,
    for<'a> &'a T: std::ops::Mul<&'a T, Output = T>,
{
    let words = enumerate_words(n, max_len);
    let mut b1: Vec<T> = Vec::with_capacity(words.len());
    for w in &words {
        if w.is_empty() {
            b1.push(T::one());
            continue;
        }
        let mut acc = T::zero();
        for (beta, a) in terms {
            if beta.len() <= w.len() && w.letters()[..beta.len()] == *beta.letters() {
                let rest = w.slice(beta.len(), w.len());
                acc = acc + a * &b1[word_index(n, &rest)];
            }
        }
        b1.push(acc);
    }
    let mut bm = b1.clone();
    for _ in 1..m {
        let mut next = Vec::with_capacity(words.len());
        for w in &words {
            let mut acc = T::zero();
            for t in 0..=w.len() {
                let head = word_index(n, &w.slice(0, t));
                let tail = word_index(n, &w.slice(t, w.len()));
                acc = acc + &b1[head] * &bm[tail];
            }
            next.push(acc);
        }
        bm = next;
    }
    bm
}

pub fn weight_table(f: &FreeSymbol, m: usize, max_len: usize) -> WeightTable {
    assert!(m >= 1, "positivity order starts at 1");
    let terms: Vec<(Word, f64)> = f.terms().map(|(w, a)| (w.clone(), a)).collect();
    WeightTable {
        n: f.n(),
        m,
        max_len,
        values: weights_generic(f.n(), &terms, m, max_len),
    }
}

/// Exact weights; every f64 coefficient is converted to its exact rational value.
pub fn weight_table_exact(f: &FreeSymbol, m: usize, max_len: usize) -> Vec<BigRational> {
    assert!(m >= 1, "positivity order starts at 1");
    let terms: Vec<(Word, BigRational)> = f
        .terms()
        .map(|(w, a)| (w.clone(), BigRational::from_float(a).expect("finite coefficient")))
        .collect();
    weights_generic(f.n(), &terms, m, max_len)
}

pub fn binom_exact(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(x: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(x))
    }

    #[test]
    fn enumeration_small_cases() {
        let w = enumerate_words(1, 2);
        assert_eq!(w, vec![Word::empty(), Word::new(vec![0]), Word::new(vec![0, 0])]);
        let w = enumerate_words(2, 1);
        assert_eq!(w, vec![Word::empty(), Word::letter(0), Word::letter(1)]);
        assert_eq!(enumerate_words(2, 2).len(), 7);
        assert_eq!(word_count(3, 3), 40);
    }

    #[test]
    fn index_matches_enumeration() {
        for n in 1..=3 {
            for (i, w) in enumerate_words(n, 4).iter().enumerate() {
                assert_eq!(word_index(n, w), i);
                assert_eq!(&word_at(n, i), w);
            }
        }
    }

    #[test]
    fn enumeration_is_sorted() {
        let w = enumerate_words(3, 3);
        assert!(w.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn symbol_validation() {
        assert!(FreeSymbol::new(2, [(Word::letter(0), 1.0)]).is_err());
        assert!(FreeSymbol::new(1, [(Word::empty(), 1.0), (Word::letter(0), 1.0)]).is_err());
        assert!(FreeSymbol::new(1, [(Word::letter(0), 1.0), (Word::new(vec![0, 0]), -0.5)]).is_err());
        assert!(FreeSymbol::new(1, [(Word::letter(1), 1.0)]).is_err());
        let f = FreeSymbol::new(2, [(Word::letter(0), 1.0), (Word::letter(1), 2.0), (Word::new(vec![0, 1]), 0.5)]).unwrap();
        assert_eq!(f.degree(), 2);
        assert!(!f.is_homogeneous());
    }

    #[test]
    fn reversal() {
        let f = FreeSymbol::new(2, [(Word::letter(0), 1.0), (Word::letter(1), 1.0), (Word::new(vec![0, 1]), 0.25)]).unwrap();
        let r = f.reverse();
        assert_eq!(r.coeff(&Word::new(vec![1, 0])), 0.25);
        assert_eq!(r.coeff(&Word::new(vec![0, 1])), 0.0);
        assert_eq!(r.reverse(), f);
        assert!(FreeSymbol::linear(3).is_palindromic());
    }

    #[test]
    fn vacuum_weight_is_one() {
        let f = FreeSymbol::new(2, [(Word::letter(0), 0.3), (Word::letter(1), 2.0), (Word::new(vec![1, 1]), 0.7)]).unwrap();
        for m in 1..4 {
            assert_eq!(weight_table(&f, m, 3).get(&Word::empty()), 1.0);
        }
    }

    #[test]
    fn single_variable_m2_is_linear_in_length() {
        let f = FreeSymbol::linear(1);
        let exact = weight_table_exact(&f, 2, 8);
        for (k, b) in exact.iter().enumerate() {
            assert_eq!(*b, rat(k as i64 + 1));
        }
    }

    #[test]
    fn fibonacci_symbol() {
        let f = FreeSymbol::new(1, [(Word::letter(0), 1.0), (Word::new(vec![0, 0]), 1.0)]).unwrap();
        let b = weight_table_exact(&f, 1, 4);
        let expect: Vec<BigRational> = [1, 1, 2, 3, 5].iter().map(|&x| rat(x)).collect();
        assert_eq!(b, expect);
    }

    #[test]
    fn free_sum_closed_form() {
        for m in 1..=3 {
            let exact = weight_table_exact(&FreeSymbol::linear(2), m, 5);
            for (i, w) in enumerate_words(2, 5).iter().enumerate() {
                let expect = BigRational::from_integer(binom_exact(w.len() + m - 1, m - 1));
                assert_eq!(exact[i], expect);
            }
        }
    }

    #[test]
    fn float_mode_tracks_exact_mode() {
        let f = FreeSymbol::new(2, [(Word::letter(0), 0.375), (Word::letter(1), 1.25), (Word::new(vec![0, 1]), 0.5)]).unwrap();
        let exact = weight_table_exact(&f, 3, 5);
        let float = weight_table(&f, 3, 5);
        for (i, e) in exact.iter().enumerate() {
            let e = e.numer().to_string().parse::<f64>().unwrap() / e.denom().to_string().parse::<f64>().unwrap();
            assert!((float.at(i) - e).abs() <= 1e-12 * e);
        }
    }
}
