//! Joint similarity: models of tuples through Berezin kernels, Cesàro limits
//! and convergent binomial series.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::berezin::{build_kernel, BerezinKernel, CompatibleTuple, KernelOptions, PolySample};
use crate::cpmap::{
    binomial_series, cesaro_limit, cone_check, probe_of, radius_of, vanishes_beyond, variety_membership, ConeKind,
    LimitOptions, MatrixTuple, PhiMap, SeriesOptions, VarietyIdeal, DEFAULT_R_GRID,
};
use crate::error::{NcError, Result};
use crate::fock::{build_fock_model, VarietyModel};
use crate::linalg::{
    eigh, hermitize, max_eig, min_eig, min_singular, op_norm, orth, pd_inv_sqrt, psd_sqrt, select_columns,
    singular_values, tol_psd, CMat,
};
use crate::symbol::{FreeSymbol, Word};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    PureModel,
    Isometric,
    Strict,
    UnitaryModel,
    ConeIntertwine,
    C1ToCc,
}

/// A tuple T and a transform Y with A_i Y = Y T_i.
#[derive(Clone, Debug, Serialize)]
pub struct SimilarityResult {
    pub kind: SimilarityKind,
    #[serde(skip)]
    pub y: CMat,
    #[serde(skip)]
    pub t: MatrixTuple,
    pub cond_y: f64,
    /// ‖A_iY − YT_i‖ per generator.
    pub residuals: Vec<f64>,
    /// Named margins certifying the class of T and the conditioning of Y.
    pub certificates: BTreeMap<String, f64>,
    pub passed: bool,
}

/// σ_max/σ_min over the nonzero singular values.
fn condition(y: &CMat) -> f64 {
    let s = singular_values(y);
    let top = s.first().copied().unwrap_or(0.0);
    let low = s.iter().copied().filter(|&x| x > 1e-14 * top).fold(f64::INFINITY, f64::min);
    if top == 0.0 {
        f64::INFINITY
    } else {
        top / low
    }
}

fn intertwining_residuals(a: &MatrixTuple, y: &CMat, t: &MatrixTuple) -> Vec<f64> {
    a.mats()
        .iter()
        .zip(t.mats())
        .map(|(ai, ti)| op_norm(&(ai * y - y * ti)))
        .collect()
}

fn variety_residual(ideal: Option<&VarietyIdeal>, t: &MatrixTuple) -> Result<f64> {
    match ideal {
        Some(p) => Ok(variety_membership(p, t, f64::INFINITY)?
            .residuals
            .into_iter()
            .fold(0.0, f64::max)),
        None => Ok(0.0),
    }
}

fn require_variety(ideal: Option<&VarietyIdeal>, a: &MatrixTuple, tol: f64) -> Result<()> {
    let res = variety_residual(ideal, a)?;
    let scale = 1.0 + a.mats().iter().map(op_norm).fold(0.0, f64::max);
    if res > tol * scale.powi(3) {
        return Err(NcError::Precondition(format!("tuple violates the variety relations by {res:e}")));
    }
    Ok(())
}

/// Y = K_q* U_G and T_i = U_G*(B_i⊗I)U_G, where U_G spans range K_q.
fn model_from_kernel(kernel: &BerezinKernel) -> (CMat, MatrixTuple, f64) {
    let kq = kernel.effective();
    let ug = orth(kq, 1e-12);
    let n = kernel.tuple.a.n();
    let mut mats = Vec::with_capacity(n);
    let mut invariance = 0.0f64;
    for i in 0..n {
        let bu = kernel.model_apply(i, &ug);
        mats.push(ug.adjoint() * &bu);
        let bstar = kernel.model_adj_apply(i, &ug);
        let off = &bstar - &ug * (ug.adjoint() * &bstar);
        invariance = invariance.max(op_norm(&off));
    }
    let y = kq.adjoint() * &ug;
    (y, MatrixTuple::new(mats).expect("square blocks"), invariance)
}

/// Similarity to the (constrained) model from a compatible tuple whose
/// series Σ C(k+m−1,m−1)Φ^k(R) lies between aI and bI.
#[allow(clippy::too_many_arguments)]
pub fn pure_model_similarity(
    f: &FreeSymbol,
    m: usize,
    a: &MatrixTuple,
    r: &CMat,
    ideal: Option<&VarietyIdeal>,
    max_len: usize,
    opts: &KernelOptions,
    tol: f64,
) -> Result<SimilarityResult> {
    require_variety(ideal, a, tol)?;
    let model = build_fock_model(f, m, max_len)?;
    let mut q = CompatibleTuple::new(f, m, a, r);
    if let Some(p) = ideal {
        q = q.with_ideal(p);
    }
    let kernel = build_kernel(&q, &model, None, opts)?;
    let tail = kernel.truncation_tail + kernel.series.tail_bound;
    let lo = min_eig(&kernel.series.sum) - tail;
    let hi = max_eig(&kernel.series.sum) + tail;
    if lo <= 0.0 {
        return Err(NcError::Precondition(format!(
            "series is not bounded below (a = {lo:e}); no similarity"
        )));
    }
    let (y, t, invariance) = model_from_kernel(&kernel);
    let kq = kernel.effective();
    let kernel_res: f64 = (0..a.n())
        .map(|i| op_norm(&(kq * a.get(i).adjoint() - kernel.model_adj_apply(i, kq))))
        .fold(0.0, f64::max);
    let residuals = intertwining_residuals(a, &y, &t);
    let sigma = min_singular(kq);
    let cond_y = condition(&y);
    let cond_bound = (hi / lo).sqrt();
    let mut cert = BTreeMap::new();
    cert.insert("a".into(), lo);
    cert.insert("b".into(), hi);
    cert.insert("min_singular_minus_sqrt_a".into(), sigma - lo.sqrt());
    cert.insert("cond_bound".into(), cond_bound);
    cert.insert("kernel_intertwining".into(), kernel_res);
    cert.insert("range_invariance".into(), invariance);
    cert.insert("variety_residual".into(), variety_residual(ideal, &t)?);
    let scale = 1.0 + op_norm(kq);
    let passed = residuals.iter().all(|&x| x <= tol * scale)
        && kernel_res <= tol * scale
        && invariance <= tol * scale
        && sigma >= lo.sqrt() - tol
        && cond_y <= cond_bound * (1.0 + 1e-6) + tol;
    Ok(SimilarityResult {
        kind: SimilarityKind::PureModel,
        y,
        t,
        cond_y,
        residuals,
        certificates: cert,
        passed,
    })
}

/// Model of a pure tuple through the isometric kernel with R = (id−Φ)^m(I).
pub fn unitary_model(
    f: &FreeSymbol,
    m: usize,
    t: &MatrixTuple,
    ideal: Option<&VarietyIdeal>,
    max_len: usize,
    opts: &KernelOptions,
    tol: f64,
) -> Result<SimilarityResult> {
    let id = CMat::identity(t.dim(), t.dim());
    let cone = cone_check(f, m, t, &id, ConeKind::Pure, tol, &[])?;
    if !cone.member {
        return Err(NcError::Precondition("tuple is not a pure member of the domain".into()));
    }
    let r = hermitize(&PhiMap::new(f, t)?.defect(&id, m));
    let mut res = pure_model_similarity(f, m, t, &r, ideal, max_len, opts, tol)?;
    let kq_gram = res.y.adjoint() * &res.y;
    let iso = op_norm(&(kq_gram - CMat::identity(res.y.ncols(), res.y.ncols())));
    res.kind = SimilarityKind::UnitaryModel;
    res.certificates.insert("isometry_residual".into(), iso);
    res.passed &= iso <= tol;
    Ok(res)
}

/// Transport of A by Y = Q^{1/2} for an invertible fixed point Q of Φ_{f,A}.
fn transport_by_fixed_point(
    f: &FreeSymbol,
    a: &MatrixTuple,
    q: &CMat,
    ideal: Option<&VarietyIdeal>,
    floor: f64,
) -> Result<(CMat, MatrixTuple, BTreeMap<String, f64>)> {
    let half = psd_sqrt(q, tol_psd(q))?;
    let inv_half = pd_inv_sqrt(q, floor)?;
    let t = a.sandwich(&inv_half, &half)?;
    let phit = PhiMap::new(f, &t)?;
    let id = CMat::identity(t.dim(), t.dim());
    let mut cert = BTreeMap::new();
    cert.insert("unital_residual".into(), op_norm(&(phit.apply(&id) - &id)));
    cert.insert("variety_residual".into(), variety_residual(ideal, &t)?);
    Ok((half, t, cert))
}

/// Similarity to a tuple with Φ_{f,T}(I) = I, from two-sided bounds on
/// Φ^k(I) and the Cesàro limit Q of Φ^k(I).
pub fn isometric_similarity(
    f: &FreeSymbol,
    a: &MatrixTuple,
    ideal: Option<&VarietyIdeal>,
    opts: &LimitOptions,
    tol: f64,
) -> Result<SimilarityResult> {
    require_variety(ideal, a, tol)?;
    let phi = PhiMap::new(f, a)?;
    let d = a.dim();
    let sup = phi.superop();
    let mut v = crate::linalg::vec_of(&CMat::identity(d, d));
    let (mut c_low, mut d_high) = (1.0f64, 1.0f64);
    for _ in 0..opts.k_max {
        v = &sup * &v;
        let x = hermitize(&crate::linalg::unvec(&v, d));
        let (vals, _) = eigh(&x);
        c_low = c_low.min(vals[0]);
        d_high = d_high.max(vals[d - 1]);
        if d_high > 1e8 || c_low <= 0.0 {
            break;
        }
    }
    if c_low <= tol || d_high > 1e8 {
        return Err(NcError::Precondition(format!(
            "Φ^k(I) is not bounded between cI and dI (observed c = {c_low:e}, d = {d_high:e})"
        )));
    }
    let ces = cesaro_limit(&phi, &CMat::identity(d, d), opts)?;
    let (y, t, mut cert) = transport_by_fixed_point(f, a, &ces.limit, ideal, 0.5 * c_low)?;
    cert.insert("c".into(), c_low);
    cert.insert("d".into(), d_high);
    cert.insert("fixed_residual".into(), ces.fixed_residual);
    cert.insert("cesaro_gap".into(), ces.plain_gap);
    let residuals = intertwining_residuals(a, &y, &t);
    let scale = 1.0 + op_norm(&y);
    let passed = residuals.iter().all(|&x| x <= tol * scale)
        && cert["unital_residual"] <= tol
        && cert["variety_residual"] <= tol * scale;
    Ok(SimilarityResult {
        kind: SimilarityKind::Isometric,
        cond_y: condition(&y),
        y,
        t,
        residuals,
        certificates: cert,
        passed,
    })
}

/// Default gap kept between the radius estimate and 1.
pub const RADIUS_MARGIN: f64 = 1e-6;

/// Similarity to a tuple with (id−Φ_{f,T})^m(I) ≻ 0 for r_f(A) < 1, via
/// P = Σ C(k+m−1,m−1)Φ^k(I) and T = P^{-1/2}AP^{1/2}.
pub fn strict_similarity(
    f: &FreeSymbol,
    m: usize,
    a: &MatrixTuple,
    ideal: Option<&VarietyIdeal>,
    series: &SeriesOptions,
    tol: f64,
) -> Result<SimilarityResult> {
    require_variety(ideal, a, tol)?;
    let phi = PhiMap::new(f, a)?;
    let radius = radius_of(&phi, 1 << 12, 1e-8);
    if radius.estimate >= 1.0 - RADIUS_MARGIN {
        return Err(NcError::Precondition(format!("joint spectral radius {:.6} is not below 1", radius.estimate)));
    }
    let d = a.dim();
    let id = CMat::identity(d, d);
    let s = binomial_series(&phi, &id, m, series)?;
    let p = &s.sum;
    let (y, t, mut cert) = transport_by_fixed_point_strict(f, m, a, p, ideal)?;
    let norm_sum: f64 = s.term_norms.iter().sum::<f64>() + s.tail_bound;
    let cond_y = condition(&y);
    cert.insert("radius".into(), radius.estimate);
    cert.insert("series_tail".into(), s.tail_bound);
    cert.insert("cond_slack".into(), norm_sum.sqrt() - cond_y);
    let residuals = intertwining_residuals(a, &y, &t);
    let scale = 1.0 + op_norm(&y);
    let passed = residuals.iter().all(|&x| x <= tol * scale)
        && cert["defect_min_eig"] > 0.0
        && cert["cond_slack"] >= -tol
        && cert["variety_residual"] <= tol * scale;
    Ok(SimilarityResult {
        kind: SimilarityKind::Strict,
        y,
        t,
        cond_y,
        residuals,
        certificates: cert,
        passed,
    })
}

fn transport_by_fixed_point_strict(
    f: &FreeSymbol,
    m: usize,
    a: &MatrixTuple,
    p: &CMat,
    ideal: Option<&VarietyIdeal>,
) -> Result<(CMat, MatrixTuple, BTreeMap<String, f64>)> {
    let half = psd_sqrt(p, tol_psd(p))?;
    let inv_half = pd_inv_sqrt(p, 0.0)?;
    let t = a.sandwich(&inv_half, &half)?;
    let id = CMat::identity(t.dim(), t.dim());
    let defect = PhiMap::new(f, &t)?.defect(&id, m);
    let mut cert = BTreeMap::new();
    cert.insert("defect_min_eig".into(), min_eig(&hermitize(&defect)));
    cert.insert("variety_residual".into(), variety_residual(ideal, &t)?);
    Ok((half, t, cert))
}

#[derive(Clone, Debug, Serialize)]
pub struct OperatorSolution {
    #[serde(skip)]
    pub x: CMat,
    /// ‖(id−Φ)^m(X) − R‖.
    pub residual: f64,
    pub min_eig: f64,
    /// True when R ≻ 0, which forces X ⪰ R ≻ 0.
    pub invertible: bool,
    pub series_tail: f64,
}

/// The positive solution X = Σ C(k+m−1,m−1)Φ^k(R) of (id−Φ)^m(X) = R.
pub fn solve_operator_equation(
    f: &FreeSymbol,
    m: usize,
    a: &MatrixTuple,
    rhs: &CMat,
    series: &SeriesOptions,
) -> Result<OperatorSolution> {
    let phi = PhiMap::new(f, a)?;
    let radius = radius_of(&phi, 1 << 12, 1e-8);
    if radius.estimate >= 1.0 - RADIUS_MARGIN {
        return Err(NcError::Precondition(format!("joint spectral radius {:.6} is not below 1", radius.estimate)));
    }
    let r = hermitize(rhs);
    let lo = min_eig(&r);
    if lo < -tol_psd(&r) {
        return Err(NcError::NotPositive {
            what: "right-hand side".into(),
            min_eig: lo,
        });
    }
    let s = binomial_series(&phi, &r, m, series)?;
    let residual = op_norm(&(phi.defect(&s.sum, m) - &r));
    Ok(OperatorSolution {
        min_eig: min_eig(&s.sum),
        invertible: lo > tol_psd(&r),
        residual,
        series_tail: s.tail_bound,
        x: s.sum,
    })
}

/// T with A_iG^{1/2} = G^{1/2}T_i for G in the cone C(f,A)^+.
pub fn intertwine_from_cone(
    f: &FreeSymbol,
    m: usize,
    a: &MatrixTuple,
    g: &CMat,
    ideal: Option<&VarietyIdeal>,
    tol: f64,
) -> Result<SimilarityResult> {
    let cert0 = cone_check(f, m, a, g, ConeKind::General, tol, &[])?;
    if !cert0.member {
        return Err(NcError::Precondition("G is not in the cone".into()));
    }
    let gh = hermitize(g);
    let (vals, vecs) = eigh(&gh);
    let top = vals.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..vals.len()).filter(|&j| vals[j] > 1e-10 * top && top > 0.0).collect();
    let v = select_columns(&vecs, &keep);
    let rank = keep.len();
    let sq: Vec<f64> = keep.iter().map(|&j| vals[j].sqrt()).collect();
    // S = diag(√λ)V*, S⁺ = V diag(1/√λ); Λ_i = S A_i* S⁺ on range coordinates.
    let s = CMat::from_fn(rank, a.dim(), |i, j| crate::linalg::c(sq[i]) * v[(j, i)].conj());
    let s_pinv = CMat::from_fn(a.dim(), rank, |i, j| v[(i, j)] * crate::linalg::c(1.0 / sq[j]));
    let mut mats = Vec::with_capacity(a.n());
    for i in 0..a.n() {
        let lam = &s * a.get(i).adjoint() * &s_pinv;
        mats.push(&v * lam.adjoint() * v.adjoint());
    }
    let t = MatrixTuple::new(mats)?;
    for i in 0..a.n() {
        let bound = 1.0 / f.coeff(&Word::letter(i)).sqrt();
        let nt = op_norm(t.get(i));
        if nt > bound * (1.0 + 1e-6) + tol {
            return Err(NcError::Precondition(format!(
                "‖T_{}‖ = {nt:e} exceeds {bound:e}; G is numerically inconsistent",
                i + 1
            )));
        }
    }
    let y = psd_sqrt(&gh, tol_psd(&gh))?;
    let residuals = intertwining_residuals(a, &y, &t);
    let id = CMat::identity(a.dim(), a.dim());
    let member = crate::cpmap::domain_membership(f, m, &t, tol)?;
    let mut cert = BTreeMap::new();
    cert.insert("cone_min_eig".into(), cert0.min_eig);
    cert.insert(
        "domain_margin".into(),
        member.margins.iter().copied().fold(f64::INFINITY, f64::min),
    );
    cert.insert("variety_residual".into(), variety_residual(ideal, &t)?);
    cert.insert("rank".into(), rank as f64);
    let pure_g = cone_check(f, m, a, g, ConeKind::Pure, tol, &[])?.member;
    if pure_g {
        let pure_t = cone_check(f, m, &t, &id, ConeKind::Pure, tol, &[])?;
        cert.insert("t_pure".into(), if pure_t.member { 1.0 } else { 0.0 });
    }
    let scale = 1.0 + op_norm(&y);
    let passed = residuals.iter().all(|&x| x <= tol * scale)
        && member.member
        && cert["variety_residual"] <= tol * scale
        && cert.get("t_pure").is_none_or(|&p| p == 1.0);
    Ok(SimilarityResult {
        kind: SimilarityKind::ConeIntertwine,
        cond_y: if rank == a.dim() { condition(&y) } else { f64::INFINITY },
        y,
        t,
        residuals,
        certificates: cert,
        passed,
    })
}

/// Default γ for class C_{·1} certificates.
pub const TOL_CLASS: f64 = 1e-6;

/// Similarity of a power-bounded C_{·1} tuple to a tuple with Φ_{p,T}(I) = I,
/// using the Cesàro limit S of Φ^k(I) in place of a Banach limit.
pub fn c1_to_cc(
    p: &FreeSymbol,
    a: &MatrixTuple,
    ideal: Option<&VarietyIdeal>,
    opts: &LimitOptions,
    gamma: f64,
    tol: f64,
) -> Result<SimilarityResult> {
    require_variety(ideal, a, tol)?;
    let phi = PhiMap::new(p, a)?;
    let probe = probe_of(&phi, opts.k_max, 1e6);
    if !probe.bounded {
        return Err(NcError::Precondition(format!(
            "Φ^k(I) is not power bounded (reached {:e})",
            probe.max_norm
        )));
    }
    let d = a.dim();
    let ces = cesaro_limit(&phi, &CMat::identity(d, d), opts)?;
    let low = min_eig(&ces.limit);
    if low <= gamma {
        return Err(NcError::Precondition(format!(
            "class C_.1 certificate fails: min eigenvalue of the limit is {low:e}"
        )));
    }
    let (y, t, mut cert) = transport_by_fixed_point(p, a, &ces.limit, ideal, 0.5 * gamma)?;
    cert.insert("gamma_margin".into(), low - gamma);
    cert.insert("upper".into(), max_eig(&ces.limit));
    cert.insert("fixed_residual".into(), ces.fixed_residual);
    cert.insert("cesaro_gap".into(), ces.plain_gap);
    cert.insert("probe_max".into(), probe.max_norm);
    let residuals = intertwining_residuals(a, &y, &t);
    let scale = 1.0 + op_norm(&y);
    let passed = residuals.iter().all(|&x| x <= tol * scale)
        && cert["unital_residual"] <= tol
        && cert["variety_residual"] <= tol * scale;
    Ok(SimilarityResult {
        kind: SimilarityKind::C1ToCc,
        cond_y: condition(&y),
        y,
        t,
        residuals,
        certificates: cert,
        passed,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CbReport {
    pub cond: f64,
    /// cond·‖p(B)‖ − ‖p(A)‖, relative to 1 + cond·‖p(B)‖.
    pub slacks: Vec<f64>,
    pub min_slack: f64,
    pub passed: bool,
}

/// ‖Σ A_α ⊗ C_α‖ ≤ ‖D^{1/2}‖‖D^{-1/2}‖·‖Σ B_α ⊗ C_α‖ for invertible D in the
/// pure or radial cone. Samples must be analytic (every β empty).
pub fn cb_calculus_check(
    var: &VarietyModel,
    a: &MatrixTuple,
    dmat: &CMat,
    samples: &[PolySample],
    tol: f64,
) -> Result<CbReport> {
    let base = var.base();
    let (f, m) = (base.symbol(), base.m());
    let mut cone = cone_check(f, m, a, dmat, ConeKind::Pure, tol, &[])?;
    if !cone.member {
        cone = cone_check(f, m, a, dmat, ConeKind::Radial, tol, &DEFAULT_R_GRID)?;
    }
    if !cone.member {
        return Err(NcError::Precondition("D is in neither the pure nor the radial cone".into()));
    }
    let lo = min_eig(dmat);
    if lo <= tol {
        return Err(NcError::Precondition("D must be invertible".into()));
    }
    require_variety(Some(var.ideal()), a, tol)?;
    if !vanishes_beyond(a, base.max_len() + 1) {
        return Err(NcError::Precondition("the truncated model is not exact for this tuple".into()));
    }
    if samples.iter().flat_map(|s| &s.terms).any(|(_, b, _)| !b.is_empty()) {
        return Err(NcError::Precondition("calculus samples must be analytic polynomials".into()));
    }
    let cond = (max_eig(dmat) / lo).sqrt();
    let ib = CMat::identity(var.dim(), var.dim());
    let id = CMat::identity(a.dim(), a.dim());
    let mut slacks = Vec::with_capacity(samples.len());
    for s in samples {
        let lhs = op_norm(&s.eval(a, &id)?);
        let rhs = cond * op_norm(&s.eval(var.b(), &ib)?);
        slacks.push((rhs - lhs) / (1.0 + rhs));
    }
    let min_slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CbReport {
        cond,
        passed: slacks.iter().all(|&s| s >= -tol),
        slacks,
        min_slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_variety_model, DEFAULT_RANK_TOL};
    use crate::linalg::{c, eye, inverse};

    fn jordan(d: usize, s: f64) -> CMat {
        CMat::from_fn(d, d, |i, j| if j == i + 1 { c(s) } else { c(0.0) })
    }

    fn single(a: CMat) -> MatrixTuple {
        MatrixTuple::new(vec![a]).unwrap()
    }

    #[test]
    fn zero_tuple_models() {
        let f = FreeSymbol::linear(2);
        let a = MatrixTuple::zeros(2, 2);
        let r = pure_model_similarity(&f, 1, &a, &eye(2), None, 2, &KernelOptions::default(), 1e-10).unwrap();
        assert!(r.passed);
        assert!(r.t.mats().iter().all(|t| op_norm(t) < 1e-14));
        assert!((r.cond_y - 1.0).abs() < 1e-12);
        let s = strict_similarity(&f, 2, &a, None, &SeriesOptions::default(), 1e-10).unwrap();
        assert!(s.passed);
        assert!(op_norm(&(&s.y - eye(2))) < 1e-14);
    }

    #[test]
    fn jordan_unitary_model() {
        let f = FreeSymbol::linear(1);
        let t = single(jordan(3, 1.0));
        let r = unitary_model(&f, 1, &t, None, 4, &KernelOptions::default(), 1e-10).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.certificates["isometry_residual"] < 1e-14);
    }

    #[test]
    fn classical_rota() {
        let f = FreeSymbol::linear(1);
        let a = single(CMat::from_row_slice(2, 2, &[c(0.9), c(5.0), c(0.0), c(0.9)]));
        let r = strict_similarity(&f, 1, &a, None, &SeriesOptions::default(), 1e-8).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(op_norm(r.t.get(0)) < 1.0);
    }

    #[test]
    fn operator_equation_scalar_and_linear_oracle() {
        let f = FreeSymbol::linear(1);
        let a = single(eye(2) * c(0.5));
        let s = solve_operator_equation(&f, 1, &a, &eye(2), &SeriesOptions::default()).unwrap();
        assert!(op_norm(&(&s.x - eye(2) * c(1.0 / 0.75))) < 1e-12);

        let f2 = FreeSymbol::weighted_linear(&[1.0, 0.5]).unwrap();
        let a2 = MatrixTuple::new(vec![
            CMat::from_row_slice(2, 2, &[c(0.3), c(0.2), c(-0.1), c(0.4)]),
            CMat::from_row_slice(2, 2, &[c(0.0), c(0.5), c(0.2), c(-0.3)]),
        ])
        .unwrap();
        let rhs = CMat::from_row_slice(2, 2, &[c(2.0), c(0.5), c(0.5), c(1.0)]);
        let sol = solve_operator_equation(&f2, 2, &a2, &rhs, &SeriesOptions::default()).unwrap();
        let phi = PhiMap::new(&f2, &a2).unwrap();
        let l = CMat::identity(4, 4) - phi.superop();
        let l2 = &l * &l;
        let direct = inverse(&l2).unwrap() * crate::linalg::vec_of(&rhs);
        let direct = crate::linalg::unvec(&direct, 2);
        assert!(op_norm(&(&sol.x - &direct)) <= 1e-9 * op_norm(&direct));
        assert!(sol.residual < 1e-12);
    }

    #[test]
    fn isometric_round_trip() {
        // T unitary-like: a row co-isometry, conjugated by Y.
        let f = FreeSymbol::linear(1);
        let u = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let y = CMat::from_row_slice(2, 2, &[c(1.0), c(2.0), c(0.0), c(1.0)]);
        let yi = inverse(&y).unwrap();
        let a = single(&yi * &u * &y);
        let r = isometric_similarity(&f, &a, None, &LimitOptions::default(), 1e-8).unwrap();
        assert!(r.passed, "{r:?}");
        let t = r.t.get(0);
        assert!(op_norm(&(t.adjoint() * t - eye(2))) < 1e-8);
        let c1 = c1_to_cc(&f, &a, None, &LimitOptions::default(), TOL_CLASS, 1e-8).unwrap();
        assert!(c1.passed);
    }

    #[test]
    fn cone_intertwining_trivial_and_rank_one() {
        let f = FreeSymbol::linear(2);
        let a = MatrixTuple::new(vec![jordan(2, 0.5), jordan(2, 0.5).adjoint()]).unwrap();
        let r = intertwine_from_cone(&f, 1, &a, &eye(2), None, 1e-10).unwrap();
        assert!(r.passed);
        for i in 0..2 {
            assert!(op_norm(&(r.t.get(i) - a.get(i))) < 1e-12);
        }
        let z = MatrixTuple::new(vec![CMat::zeros(2, 2), CMat::zeros(2, 2)]).unwrap();
        let g = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        let r1 = intertwine_from_cone(&f, 1, &z, &g, None, 1e-10).unwrap();
        assert!(r1.passed);
        assert_eq!(r1.certificates["rank"], 1.0);
    }

    #[test]
    fn cb_calculus_on_model_itself() {
        let f = FreeSymbol::linear(2);
        let model = build_fock_model(&f, 1, 3).unwrap();
        let var = build_variety_model(&model, &VarietyIdeal::empty(), DEFAULT_RANK_TOL).unwrap();
        let b = var.b().clone();
        let one = CMat::identity(1, 1);
        let samples = vec![
            PolySample {
                terms: vec![(Word::letter(0), Word::empty(), one.clone())],
            },
            PolySample {
                terms: vec![
                    (Word::new(vec![0, 1]), Word::empty(), one.clone()),
                    (Word::letter(1), Word::empty(), one.clone() * c(-0.5)),
                ],
            },
        ];
        let rep = cb_calculus_check(&var, &b, &eye(var.dim()), &samples, 1e-10).unwrap();
        assert!(rep.passed);
        assert!(rep.slacks.iter().all(|s| s.abs() < 1e-12));
    }
}
