use crate::cpmap::MatrixTuple;
use crate::error::{NcError, Result};
use crate::linalg::{c, CMat, C64};
use crate::symbol::Word;

/// A noncommutative polynomial with complex coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct NcPolynomial {
    terms: Vec<(Word, C64)>,
}

impl NcPolynomial {
    pub fn new(terms: Vec<(Word, C64)>) -> Result<Self> {
        let mut merged: Vec<(Word, C64)> = Vec::new();
        for (w, a) in terms {
            if !a.re.is_finite() || !a.im.is_finite() {
                return Err(NcError::InvalidPolynomial(format!("non-finite coefficient on {w}")));
            }
            match merged.iter_mut().find(|(v, _)| *v == w) {
                Some(slot) => slot.1 += a,
                None => merged.push((w, a)),
            }
        }
        merged.retain(|(_, a)| a.norm() > 0.0);
        if merged.is_empty() {
            return Err(NcError::InvalidPolynomial("zero polynomial".into()));
        }
        merged.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(NcPolynomial { terms: merged })
    }

    /// X_i X_j − X_j X_i.
    pub fn commutator(i: usize, j: usize) -> Self {
        Self::new(vec![(Word::new(vec![i, j]), c(1.0)), (Word::new(vec![j, i]), c(-1.0))])
            .expect("i ≠ j")
    }

    pub fn monomial(w: Word) -> Self {
        Self::new(vec![(w, c(1.0))]).expect("nonzero")
    }

    pub fn terms(&self) -> &[(Word, C64)] {
        &self.terms
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(w, _)| w.len()).max().unwrap_or(0)
    }

    pub fn is_homogeneous(&self) -> bool {
        let d = self.degree();
        self.terms.iter().all(|(w, _)| w.len() == d)
    }

    pub fn max_letter(&self) -> Option<usize> {
        self.terms.iter().filter_map(|(w, _)| w.max_letter()).max()
    }

    pub fn eval(&self, a: &MatrixTuple) -> CMat {
        let mut acc = CMat::zeros(a.dim(), a.dim());
        for (w, coef) in &self.terms {
            acc += a.word(w) * *coef;
        }
        acc
    }
}

/// A finite family of polynomials defining a variety.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct VarietyIdeal {
    polys: Vec<NcPolynomial>,
}

impl VarietyIdeal {
    pub fn new(polys: Vec<NcPolynomial>) -> Self {
        VarietyIdeal { polys }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn polys(&self) -> &[NcPolynomial] {
        &self.polys
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.polys.iter().all(NcPolynomial::is_homogeneous)
    }

    pub fn check_letters(&self, n: usize) -> Result<()> {
        for (k, p) in self.polys.iter().enumerate() {
            if p.max_letter().is_some_and(|l| l >= n) {
                return Err(NcError::InvalidPolynomial(format!("polynomial {k} uses a letter beyond n={n}")));
            }
        }
        Ok(())
    }

    /// All commutators X_iX_j − X_jX_i, i < j.
    pub fn commuting(n: usize) -> Self {
        let mut polys = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                polys.push(NcPolynomial::commutator(i, j));
            }
        }
        VarietyIdeal { polys }
    }
}
