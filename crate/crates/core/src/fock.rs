//! Truncated weighted Fock space: creation operators W_i, Λ_i, the flip
//! unitary, and variety-constrained models.

use serde::Serialize;

use crate::cpmap::{MatrixTuple, PhiMap, VarietyIdeal};
use crate::error::{NcError, Result};
use crate::linalg::{c, complement, eye, hstack, is_exact_zero, min_eig, mul, null_space, op_norm, orth, select_columns, select_rows, CMat};
use crate::symbol::{enumerate_words, weight_table, word_count, word_index, FreeSymbol, WeightTable, Word};

/// Sparse weighted shift: `edges[src] = Some((dst, weight))`.
type Shift = Vec<Option<(usize, f64)>>;

#[derive(Clone, Debug)]
pub struct FockModel {
    f: FreeSymbol,
    m: usize,
    max_len: usize,
    safe_len: usize,
    weights: WeightTable,
    left: Vec<Shift>,
    right: Vec<Shift>,
}

pub fn build_fock_model(f: &FreeSymbol, m: usize, max_len: usize) -> Result<FockModel> {
    if m == 0 {
        return Err(NcError::Precondition("m must be at least 1".into()));
    }
    let need = m * f.degree();
    if max_len < need {
        return Err(NcError::TruncationTooShort(format!(
            "L = {max_len} is below m·deg f = {need}"
        )));
    }
    let n = f.n();
    let weights = weight_table(f, m, max_len);
    let words = enumerate_words(n, max_len);
    let mut left = vec![vec![None; words.len()]; n];
    let mut right = vec![vec![None; words.len()]; n];
    for (src, w) in words.iter().enumerate() {
        if w.len() == max_len {
            continue;
        }
        let bw = weights.at(src);
        for i in 0..n {
            let l = word_index(n, &w.prepend(i));
            left[i][src] = Some((l, (bw / weights.at(l)).sqrt()));
            let r = word_index(n, &w.append(i));
            right[i][src] = Some((r, (bw / weights.at(r)).sqrt()));
        }
    }
    Ok(FockModel {
        f: f.clone(),
        m,
        max_len,
        safe_len: max_len - need,
        weights,
        left,
        right,
    })
}

impl FockModel {
    pub fn symbol(&self) -> &FreeSymbol {
        &self.f
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.f.n()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn safe_len(&self) -> usize {
        self.safe_len
    }

    pub fn dim(&self) -> usize {
        self.weights.values().len()
    }

    pub fn weights(&self) -> &WeightTable {
        &self.weights
    }

    pub fn words(&self) -> Vec<Word> {
        enumerate_words(self.n(), self.max_len)
    }

    pub fn interior_dim(&self) -> usize {
        word_count(self.n(), self.safe_len)
    }

    /// Index range of the words of length k.
    pub fn level(&self, k: usize) -> std::ops::Range<usize> {
        let start = if k == 0 { 0 } else { word_count(self.n(), k - 1) };
        start..word_count(self.n(), k)
    }

    fn dense(&self, shift: &Shift) -> CMat {
        let d = self.dim();
        let mut m = CMat::zeros(d, d);
        for (src, e) in shift.iter().enumerate() {
            if let Some((dst, w)) = e {
                m[(*dst, src)] = c(*w);
            }
        }
        m
    }

    pub fn w_matrix(&self, i: usize) -> CMat {
        self.dense(&self.left[i])
    }

    pub fn lam_matrix(&self, i: usize) -> CMat {
        self.dense(&self.right[i])
    }

    pub fn w_tuple(&self) -> MatrixTuple {
        MatrixTuple::new((0..self.n()).map(|i| self.w_matrix(i)).collect()).expect("square blocks")
    }

    pub fn lam_tuple(&self) -> MatrixTuple {
        MatrixTuple::new((0..self.n()).map(|i| self.lam_matrix(i)).collect()).expect("square blocks")
    }

    /// U e_α = e_{α̃}.
    pub fn flip(&self) -> CMat {
        let d = self.dim();
        let mut u = CMat::zeros(d, d);
        for (i, w) in self.words().iter().enumerate() {
            u[(word_index(self.n(), &w.reversed()), i)] = c(1.0);
        }
        u
    }

    /// (W_i ⊗ I_r)·X for X with `dim·r` rows laid out word-major.
    pub fn w_apply(&self, i: usize, x: &CMat, r: usize) -> CMat {
        let mut out = CMat::zeros(x.nrows(), x.ncols());
        for (src, e) in self.left[i].iter().enumerate() {
            if let Some((dst, w)) = e {
                for k in 0..r {
                    let row = x.row(src * r + k) * c(*w);
                    out.set_row(dst * r + k, &row);
                }
            }
        }
        out
    }

    /// (W_i* ⊗ I_r)·X for X with `dim·r` rows laid out word-major.
    pub fn w_adj_apply(&self, i: usize, x: &CMat, r: usize) -> CMat {
        let mut out = CMat::zeros(x.nrows(), x.ncols());
        for (src, e) in self.left[i].iter().enumerate() {
            if let Some((dst, w)) = e {
                for k in 0..r {
                    let row = x.row(dst * r + k) * c(*w);
                    out.set_row(src * r + k, &row);
                }
            }
        }
        out
    }

    /// (Λ_i ⊗ I_r)·X.
    pub fn lam_apply(&self, i: usize, x: &CMat, r: usize) -> CMat {
        let mut out = CMat::zeros(x.nrows(), x.ncols());
        for (src, e) in self.right[i].iter().enumerate() {
            if let Some((dst, w)) = e {
                for k in 0..r {
                    let row = x.row(src * r + k) * c(*w);
                    out.set_row(dst * r + k, &row);
                }
            }
        }
        out
    }

    pub fn vacuum_projection(&self) -> CMat {
        let mut p = CMat::zeros(self.dim(), self.dim());
        p[(0, 0)] = c(1.0);
        p
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct UniversalModelReport {
    /// λ_min(I − Φ_{f,W}(I)).
    pub phi_margin: f64,
    /// Minimum eigenvalue of (id−Φ)^s(I), s = 1..m.
    pub domain_margins: Vec<f64>,
    /// ‖P_int((id−Φ)^m(I) − P_ℂ)P_int‖.
    pub interior_residual: f64,
    /// Same residual over the whole truncated space.
    pub full_residual: f64,
    /// Φ^{L+1}(I) is the zero matrix entry by entry.
    pub nilpotent_exact: bool,
    pub passed: bool,
}

pub fn validate_universal_model(model: &FockModel, tol: f64) -> UniversalModelReport {
    let w = model.w_tuple();
    let phi = PhiMap::new(&model.f, &w).expect("model matches its symbol");
    let id = eye(model.dim());
    let phi_margin = min_eig(&(&id - phi.apply(&id)));
    let domain_margins: Vec<f64> = (1..=model.m).map(|s| min_eig(&phi.defect(&id, s))).collect();
    let diff = phi.defect(&id, model.m) - model.vacuum_projection();
    let k = model.interior_dim();
    let interior_residual = op_norm(&diff.view((0, 0), (k, k)).into_owned());
    let full_residual = op_norm(&diff);
    let nilpotent_exact = is_exact_zero(&phi.power(&id, model.max_len + 1));
    let passed = phi_margin >= -tol
        && domain_margins.iter().all(|&x| x >= -tol)
        && interior_residual <= tol
        && nilpotent_exact;
    UniversalModelReport {
        phi_margin,
        domain_margins,
        interior_residual,
        full_residual,
        nilpotent_exact,
        passed,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FlipReport {
    /// max_{i,j} ‖(W_iΛ_j − Λ_jW_i)P_int‖.
    pub commutation_residual: f64,
    /// max_i ‖(U*Λ_iU − W̃_i)P_int‖ where W̃ are the left creation operators
    /// of the reversed symbol (equal to W when f is palindromic).
    pub flip_residual: f64,
    pub symbol_palindromic: bool,
    pub passed: bool,
}

pub fn flip_and_commutation_check(model: &FockModel, tol: f64) -> Result<FlipReport> {
    let k = model.interior_dim();
    let d = model.dim();
    let int = |m: &CMat| op_norm(&m.view((0, 0), (d, k)).into_owned());
    let n = model.n();
    let mut commutation_residual = 0.0f64;
    for i in 0..n {
        let wi = model.w_matrix(i);
        for j in 0..n {
            let lj = model.lam_matrix(j);
            let wl = model.w_apply(i, &lj, 1);
            commutation_residual = commutation_residual.max(int(&(wl - model.lam_apply(j, &wi, 1))));
        }
    }
    let palindromic = model.f.is_palindromic();
    let target = if palindromic {
        model.clone()
    } else {
        build_fock_model(&model.f.reverse(), model.m, model.max_len)?
    };
    let u = model.flip();
    let mut flip_residual = 0.0f64;
    for i in 0..n {
        let conj = mul(&u.adjoint(), &mul(&model.lam_matrix(i), &u));
        flip_residual = flip_residual.max(int(&(conj - target.w_matrix(i))));
    }
    Ok(FlipReport {
        commutation_residual,
        flip_residual,
        symbol_palindromic: palindromic,
        passed: commutation_residual <= tol && flip_residual <= tol,
    })
}

/// Compression of the Fock model to N_P = F² ⊖ span{W_α p(W) W_β(1)}.
#[derive(Clone, Debug)]
pub struct VarietyModel {
    base: FockModel,
    ideal: VarietyIdeal,
    n_basis: CMat,
    b: MatrixTuple,
    c: MatrixTuple,
    interior: CMat,
    graded: bool,
}

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Generator vectors W_α p(W) W_β(1) = Σ_w c_w b_{αwβ}^{-1/2} e_{αwβ}.
fn generators(model: &FockModel, ideal: &VarietyIdeal) -> Vec<(usize, Vec<(usize, crate::linalg::C64)>)> {
    let n = model.n();
    let big_l = model.max_len;
    let mut out = Vec::new();
    for p in ideal.polys() {
        let deg = p.degree();
        if deg > big_l {
            continue;
        }
        let outer = enumerate_words(n, big_l - deg);
        for alpha in &outer {
            for beta in &outer {
                if alpha.len() + beta.len() + deg > big_l {
                    continue;
                }
                let mut entries = Vec::with_capacity(p.terms().len());
                for (w, coef) in p.terms() {
                    let g = alpha.concat(w).concat(beta);
                    let idx = word_index(n, &g);
                    entries.push((idx, *coef / c(model.weights.at(idx).sqrt())));
                }
                out.push((alpha.len() + beta.len() + deg, entries));
            }
        }
    }
    out
}

pub fn build_variety_model(model: &FockModel, ideal: &VarietyIdeal, rank_tol: f64) -> Result<VarietyModel> {
    ideal.check_letters(model.n())?;
    let dim = model.dim();
    let graded = ideal.is_homogeneous();
    let gens = generators(model, ideal);
    let n_basis = if gens.is_empty() {
        eye(dim)
    } else if graded {
        let mut cols: Vec<CMat> = Vec::new();
        for k in 0..=model.max_len {
            let range = model.level(k);
            let at_level: Vec<&Vec<(usize, crate::linalg::C64)>> =
                gens.iter().filter(|(lvl, _)| *lvl == k).map(|(_, e)| e).collect();
            let width = range.len();
            let block = if at_level.is_empty() {
                eye(width)
            } else {
                let mut g = CMat::zeros(width, at_level.len());
                for (j, entries) in at_level.iter().enumerate() {
                    for (idx, v) in entries.iter() {
                        g[(idx - range.start, j)] += *v;
                    }
                }
                complement(&orth(&g, rank_tol), width)
            };
            let mut lifted = CMat::zeros(dim, block.ncols());
            lifted.view_mut((range.start, 0), (width, block.ncols())).copy_from(&block);
            cols.push(lifted);
        }
        hstack(&cols.iter().collect::<Vec<_>>())
    } else {
        let mut g = CMat::zeros(dim, gens.len());
        for (j, (_, entries)) in gens.iter().enumerate() {
            for (idx, v) in entries {
                g[(*idx, j)] += *v;
            }
        }
        complement(&orth(&g, rank_tol), dim)
    };
    if n_basis.ncols() == 0 {
        return Err(NcError::EmptyVariety);
    }
    let nt = n_basis.adjoint();
    let b = MatrixTuple::new((0..model.n()).map(|i| &nt * model.w_apply(i, &n_basis, 1)).collect())?;
    let cc = MatrixTuple::new((0..model.n()).map(|i| &nt * model.lam_apply(i, &n_basis, 1)).collect())?;
    // For an inhomogeneous p, p(W)e_β lies in M_P only when |β| + deg p ≤ L.
    let horizon = if graded {
        model.safe_len
    } else {
        let top = ideal.polys().iter().map(|p| p.degree()).max().unwrap_or(0);
        model.safe_len.min(model.max_len.saturating_sub(top))
    };
    let outside: Vec<usize> = (word_count(model.n(), horizon)..dim).collect();
    let interior = null_space(&select_rows(&n_basis, &outside), 1e-10);
    Ok(VarietyModel {
        base: model.clone(),
        ideal: ideal.clone(),
        n_basis,
        b,
        c: cc,
        interior,
        graded,
    })
}

impl VarietyModel {
    pub fn base(&self) -> &FockModel {
        &self.base
    }

    pub fn ideal(&self) -> &VarietyIdeal {
        &self.ideal
    }

    /// Orthonormal columns spanning N_P inside the truncated Fock space.
    pub fn n_basis(&self) -> &CMat {
        &self.n_basis
    }

    pub fn dim(&self) -> usize {
        self.n_basis.ncols()
    }

    pub fn b(&self) -> &MatrixTuple {
        &self.b
    }

    pub fn c(&self) -> &MatrixTuple {
        &self.c
    }

    /// Orthonormal basis, in N_P coordinates, of the interior-horizon vectors.
    pub fn interior(&self) -> &CMat {
        &self.interior
    }

    pub fn is_graded(&self) -> bool {
        self.graded
    }

    /// Dimension of N_P at each level (graded models only).
    pub fn level_dims(&self) -> Option<Vec<usize>> {
        if !self.graded {
            return None;
        }
        let mut dims = Vec::new();
        for k in 0..=self.base.max_len {
            let r = self.base.level(k);
            let rows: Vec<usize> = r.collect();
            let block = select_rows(&self.n_basis, &rows);
            dims.push((0..block.ncols()).filter(|&j| block.column(j).norm() > 0.5).count());
        }
        Some(dims)
    }

    /// Orthonormal basis (N_P coordinates) of N_P ∩ span{e_α : |α| ≤ k}.
    /// Graded models only; these subspaces are co-invariant under every B_i*.
    pub fn levels_up_to(&self, k: usize) -> Result<CMat> {
        if !self.graded {
            return Err(NcError::Precondition("level truncation needs a homogeneous ideal".into()));
        }
        let cutoff = word_count(self.base.n(), k.min(self.base.max_len));
        let keep: Vec<usize> = (0..self.dim())
            .filter(|&j| (cutoff..self.base.dim()).all(|i| self.n_basis[(i, j)].norm() == 0.0))
            .collect();
        Ok(select_columns(&eye(self.dim()), &keep))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VarietyModelReport {
    pub dim: usize,
    pub level_dims: Option<Vec<usize>>,
    /// max_i ‖P_M W_i* v‖ and ‖P_M Λ_i* v‖ over interior v ∈ N_P.
    pub coinvariance_residual: f64,
    /// max_p ‖p(B)v‖ over interior v.
    pub poly_residual: f64,
    /// λ_min(I − Φ_{f,B}(I)).
    pub phi_margin: f64,
    pub passed: bool,
}

pub fn validate_variety_model(var: &VarietyModel, tol: f64) -> VarietyModelReport {
    let base = &var.base;
    let v = &var.n_basis * &var.interior;
    let proj_m = |x: &CMat| x - &var.n_basis * (var.n_basis.adjoint() * x);
    let mut coinv = 0.0f64;
    for i in 0..base.n() {
        coinv = coinv.max(op_norm(&proj_m(&base.w_adj_apply(i, &v, 1))));
        let lam_adj = base.lam_matrix(i).adjoint() * &v;
        coinv = coinv.max(op_norm(&proj_m(&lam_adj)));
    }
    let poly_residual = var
        .ideal
        .polys()
        .iter()
        .map(|p| op_norm(&(p.eval(&var.b) * &var.interior)))
        .fold(0.0, f64::max);
    let phi = PhiMap::new(base.symbol(), &var.b).expect("model matches its symbol");
    let id = eye(var.dim());
    let phi_margin = min_eig(&(&id - phi.apply(&id)));
    VarietyModelReport {
        dim: var.dim(),
        level_dims: var.level_dims(),
        coinvariance_residual: coinv,
        poly_residual,
        phi_margin,
        passed: coinv <= tol && poly_residual <= tol && phi_margin >= -tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpmap::NcPolynomial;

    #[test]
    fn single_variable_is_the_shift() {
        let m = build_fock_model(&FreeSymbol::linear(1), 1, 3).unwrap();
        let w = m.w_matrix(0);
        let mut s = CMat::zeros(4, 4);
        for k in 0..3 {
            s[(k + 1, k)] = c(1.0);
        }
        assert_eq!(w, s);
        assert_eq!(m.lam_matrix(0), s);
    }

    #[test]
    fn edge_weights_for_m2() {
        let m = build_fock_model(&FreeSymbol::linear(2), 2, 3).unwrap();
        for (src, w) in m.words().iter().enumerate() {
            if w.len() == 3 {
                continue;
            }
            for i in 0..2 {
                let dst = word_index(2, &w.prepend(i));
                let expect = ((w.len() as f64 + 1.0) / (w.len() as f64 + 2.0)).sqrt();
                assert!((m.w_matrix(i)[(dst, src)].re - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn adjoints_kill_the_vacuum() {
        let m = build_fock_model(&FreeSymbol::linear(3), 1, 2).unwrap();
        for i in 0..3 {
            let col = m.w_matrix(i).adjoint().column(0).into_owned();
            assert_eq!(col.norm(), 0.0);
        }
    }

    #[test]
    fn short_truncation_is_rejected() {
        let f = FreeSymbol::new(1, [(Word::letter(0), 1.0), (Word::new(vec![0, 0]), 1.0)]).unwrap();
        assert!(matches!(build_fock_model(&f, 2, 3), Err(NcError::TruncationTooShort(_))));
    }

    #[test]
    fn shift_defect_is_the_vacuum_projection() {
        let m = build_fock_model(&FreeSymbol::linear(1), 1, 5).unwrap();
        let rep = validate_universal_model(&m, 1e-12);
        assert!(rep.passed);
        assert_eq!(rep.interior_residual, 0.0);
        assert_eq!(rep.full_residual, 0.0);
    }

    #[test]
    fn m2_interior_defect() {
        let m = build_fock_model(&FreeSymbol::linear(1), 2, 6).unwrap();
        let rep = validate_universal_model(&m, 1e-12);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn commutation_and_flip() {
        let m = build_fock_model(&FreeSymbol::linear(2), 1, 4).unwrap();
        let rep = flip_and_commutation_check(&m, 1e-12).unwrap();
        assert!(rep.passed);
        let u = m.flip();
        assert_eq!(&u * &u, eye(m.dim()));
        let one = build_fock_model(&FreeSymbol::linear(1), 2, 4).unwrap();
        let rep = flip_and_commutation_check(&one, 0.0).unwrap();
        assert_eq!(rep.flip_residual, 0.0);
        assert_eq!(one.flip(), eye(one.dim()));
    }

    #[test]
    fn flip_for_asymmetric_symbol() {
        let f = FreeSymbol::new(2, [(Word::letter(0), 0.5), (Word::letter(1), 1.0), (Word::new(vec![0, 1]), 0.3)]).unwrap();
        let m = build_fock_model(&f, 1, 5).unwrap();
        let rep = flip_and_commutation_check(&m, 1e-12).unwrap();
        assert!(!rep.symbol_palindromic);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn empty_ideal_keeps_everything() {
        let m = build_fock_model(&FreeSymbol::linear(2), 1, 3).unwrap();
        let v = build_variety_model(&m, &VarietyIdeal::empty(), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(v.dim(), m.dim());
        assert_eq!(v.b(), &m.w_tuple());
    }

    #[test]
    fn symmetric_fock_space_dimensions() {
        let m = build_fock_model(&FreeSymbol::linear(2), 1, 5).unwrap();
        let v = build_variety_model(&m, &VarietyIdeal::commuting(2), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(v.level_dims().unwrap(), vec![1, 2, 3, 4, 5, 6]);
        let rep = validate_variety_model(&v, 1e-10);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn killing_a_letter_leaves_the_other_words() {
        let m = build_fock_model(&FreeSymbol::linear(2), 1, 3).unwrap();
        let ideal = VarietyIdeal::new(vec![NcPolynomial::monomial(Word::letter(0))]);
        let v = build_variety_model(&m, &ideal, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(v.dim(), 4);
        let nb = v.n_basis();
        for (i, w) in m.words().iter().enumerate() {
            let mass: f64 = nb.row(i).iter().map(|z| z.norm_sqr()).sum();
            let expect = if w.letters().contains(&0) { 0.0 } else { 1.0 };
            assert!((mass - expect).abs() < 1e-12, "{w}");
        }
    }

    #[test]
    fn constant_polynomial_empties_the_variety() {
        let m = build_fock_model(&FreeSymbol::linear(1), 1, 2).unwrap();
        let ideal = VarietyIdeal::new(vec![NcPolynomial::new(vec![(Word::empty(), c(1.0))]).unwrap()]);
        assert!(matches!(build_variety_model(&m, &ideal, DEFAULT_RANK_TOL), Err(NcError::EmptyVariety)));
    }

    #[test]
    fn inhomogeneous_ideal() {
        let f = FreeSymbol::linear(2);
        let m = build_fock_model(&f, 1, 4).unwrap();
        let p = NcPolynomial::new(vec![(Word::letter(0), c(1.0)), (Word::new(vec![1, 1]), c(-1.0))]).unwrap();
        let v = build_variety_model(&m, &VarietyIdeal::new(vec![p]), DEFAULT_RANK_TOL).unwrap();
        assert!(!v.is_graded());
        let rep = validate_variety_model(&v, 1e-10);
        assert!(rep.passed, "{rep:?}");
    }
}
