use crate::error::{NcError, Result};
use crate::linalg::{block_diag, c, eye, CMat};
use crate::symbol::Word;

/// An n-tuple of d×d complex matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixTuple {
    mats: Vec<CMat>,
    d: usize,
}

impl MatrixTuple {
    pub fn new(mats: Vec<CMat>) -> Result<Self> {
        let Some(first) = mats.first() else {
            return Err(NcError::Dimension("a tuple needs at least one matrix".into()));
        };
        let d = first.nrows();
        if d == 0 {
            return Err(NcError::Dimension("ambient dimension must be at least 1".into()));
        }
        for (i, m) in mats.iter().enumerate() {
            if m.nrows() != d || m.ncols() != d {
                return Err(NcError::Dimension(format!(
                    "matrix {} is {}x{}, expected {d}x{d}",
                    i + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(MatrixTuple { mats, d })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        MatrixTuple {
            mats: vec![CMat::zeros(d, d); n],
            d,
        }
    }

    pub fn n(&self) -> usize {
        self.mats.len()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize) -> &CMat {
        &self.mats[i]
    }

    pub fn mats(&self) -> &[CMat] {
        &self.mats
    }

    /// A_α = A_{i1}⋯A_{ik}; the empty word gives I.
    pub fn word(&self, w: &Word) -> CMat {
        let mut acc = eye(self.d);
        for &l in w.letters() {
            acc *= &self.mats[l];
        }
        acc
    }

    pub fn scaled(&self, r: f64) -> Self {
        self.map(|a| a * c(r))
    }

    pub fn map(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        MatrixTuple {
            mats: self.mats.iter().map(f).collect(),
            d: self.d,
        }
    }

    /// `left · A_i · right` for every i.
    pub fn sandwich(&self, left: &CMat, right: &CMat) -> Result<Self> {
        if left.ncols() != self.d || right.nrows() != self.d || left.nrows() != right.ncols() {
            return Err(NcError::Dimension("sandwich factors do not match the tuple".into()));
        }
        Self::new(self.mats.iter().map(|a| left * a * right).collect())
    }

    /// Compression `V* A_i V` to the span of the orthonormal columns of V.
    pub fn compress(&self, v: &CMat) -> Result<Self> {
        self.sandwich(&v.adjoint(), v)
    }

    pub fn direct_sum(&self, other: &MatrixTuple) -> Result<Self> {
        if self.n() != other.n() {
            return Err(NcError::Dimension("direct sum of tuples of different length".into()));
        }
        Self::new(
            self.mats
                .iter()
                .zip(&other.mats)
                .map(|(a, b)| block_diag(&[a, b]))
                .collect(),
        )
    }

    /// A_i ⊗ I_k.
    pub fn ampliate(&self, k: usize) -> Self {
        self.map(|a| a.kronecker(&eye(k)))
    }

    pub fn adjoints(&self) -> Vec<CMat> {
        self.mats.iter().map(|a| a.adjoint()).collect()
    }
}
