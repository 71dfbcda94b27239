//! Seeded instance generators with ground truth recorded in the metadata.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

use super::instance::{Instance, Meta};
use crate::cpmap::{domain_membership, series_limit, LimitOptions, MatrixTuple, PhiMap, VarietyIdeal};
use crate::error::{NcError, Result};
use crate::fock::{build_fock_model, build_variety_model, DEFAULT_RANK_TOL};
use crate::linalg::{
    block_diag, c, eigh, svd, eye, hermitize, inverse, max_eig, min_eig, op_norm, orth, pd_inv_sqrt, psd_apply, psd_sqrt,
    select_columns, spectral_radius, unvec, zeros, CMat, CVec, C64,
};
use crate::symbol::{FreeSymbol, Word};

/// Thin wrapper over a ChaCha stream with the matrix ensembles used here.
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn coin(&mut self) -> bool {
        self.rng.random::<bool>()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Complex Ginibre entries with E|z|² = 1.
    pub fn gaussian(&mut self, rows: usize, cols: usize) -> CMat {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CMat::from_fn(rows, cols, |_, _| C64::new(s * self.normal(), s * self.normal()))
    }

    pub fn gaussian_tuple(&mut self, n: usize, d: usize) -> MatrixTuple {
        MatrixTuple::new((0..n).map(|_| self.gaussian(d, d)).collect()).expect("n, d ≥ 1")
    }

    pub fn unit_vector(&mut self, d: usize) -> CVec {
        let v = self.gaussian(d, 1).column(0).into_owned();
        let nv = v.norm();
        v / c(nv)
    }

    /// Haar unitary from the phase-corrected QR of a Ginibre matrix.
    pub fn unitary(&mut self, d: usize) -> CMat {
        let qr = self.gaussian(d, d).qr();
        let (q, r) = (qr.q(), qr.r());
        let mut u = q;
        for j in 0..d {
            let z = r[(j, j)];
            let ph = if z.norm() > 0.0 { z / c(z.norm()) } else { c(1.0) };
            for i in 0..d {
                u[(i, j)] *= ph;
            }
        }
        u
    }

    /// U diag(s) V* with s_1 = 1, s_d = cond and log-uniform values between.
    pub fn with_cond(&mut self, d: usize, cond: f64) -> CMat {
        let mut s: Vec<f64> = (0..d).map(|_| cond.powf(self.uniform(0.0, 1.0))).collect();
        s[0] = 1.0;
        if d > 1 {
            s[d - 1] = cond;
        }
        let u = self.unitary(d);
        let v = self.unitary(d);
        let diag = CMat::from_fn(d, d, |i, j| if i == j { c(s[i]) } else { c(0.0) });
        u * diag * v.adjoint()
    }

    /// Hermitian matrix with spectrum drawn uniformly from [lo, hi].
    pub fn psd_spectrum(&mut self, d: usize, lo: f64, hi: f64) -> CMat {
        let u = self.unitary(d);
        let diag = CMat::from_fn(d, d, |i, j| if i == j { c(self.uniform(lo, hi)) } else { c(0.0) });
        hermitize(&(&u * diag * u.adjoint()))
    }

    /// Strictly lower triangular Ginibre matrices: every word of length d vanishes.
    pub fn nilpotent_tuple(&mut self, n: usize, d: usize) -> MatrixTuple {
        MatrixTuple::new(
            (0..n)
                .map(|_| {
                    let g = self.gaussian(d, d);
                    CMat::from_fn(d, d, |i, j| if i > j { g[(i, j)] } else { c(0.0) })
                })
                .collect(),
        )
        .expect("n, d ≥ 1")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SymbolSpec {
    /// f = X_1 + … + X_n.
    Linear(usize),
    Weighted(Vec<f64>),
    /// Linear coefficients in [0.5, 1.5]; for degree 2 each quadratic word is
    /// kept with probability 1/2 and coefficient in [0, 0.5].
    Random { n: usize, degree: usize },
    Fixed(FreeSymbol),
}

impl SymbolSpec {
    pub fn build(&self, s: &mut Sampler) -> Result<FreeSymbol> {
        match self {
            SymbolSpec::Linear(n) => {
                if *n == 0 {
                    return Err(NcError::InvalidSymbol("n must be at least 1".into()));
                }
                Ok(FreeSymbol::linear(*n))
            }
            SymbolSpec::Weighted(a) => FreeSymbol::weighted_linear(a),
            SymbolSpec::Random { n, degree } => {
                if *degree == 0 || *degree > 2 {
                    return Err(NcError::InvalidSymbol("random symbols have degree 1 or 2".into()));
                }
                let mut terms: Vec<(Word, f64)> = (0..*n).map(|i| (Word::letter(i), s.uniform(0.5, 1.5))).collect();
                if *degree == 2 {
                    let mut quad = Vec::new();
                    for i in 0..*n {
                        for j in 0..*n {
                            if s.coin() {
                                quad.push((Word::new(vec![i, j]), s.uniform(0.0, 0.5)));
                            }
                        }
                    }
                    if quad.is_empty() {
                        quad.push((Word::new(vec![0, 0]), s.uniform(0.0, 0.5)));
                    }
                    terms.extend(quad);
                }
                FreeSymbol::new(*n, terms)
            }
            SymbolSpec::Fixed(f) => Ok(f.clone()),
        }
    }
}

fn linear_weights(f: &FreeSymbol) -> Result<Vec<f64>> {
    if f.degree() != 1 {
        return Err(NcError::Precondition("block fixtures need a linear symbol".into()));
    }
    Ok((0..f.n()).map(|i| f.coeff(&Word::letter(i))).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetClass {
    /// Φ(I) = I.
    Unital,
    /// Nilpotent, inside the domain.
    Pure,
    /// r_f equal to the given target.
    Strict(f64),
    /// Class C_{·1} with a nonzero intermediate part (linear symbols, n ≥ 2).
    C1,
}

impl TargetClass {
    pub fn tag(&self) -> &'static str {
        match self {
            TargetClass::Unital => "C_c",
            TargetClass::Pure => "pure",
            TargetClass::Strict(_) => "strict",
            TargetClass::C1 => "C_.1",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum IdealSpec {
    Free,
    Commuting,
    Monomials(Vec<Word>),
}

impl IdealSpec {
    pub fn build(&self, n: usize) -> VarietyIdeal {
        match self {
            IdealSpec::Free => VarietyIdeal::empty(),
            IdealSpec::Commuting => VarietyIdeal::commuting(n),
            IdealSpec::Monomials(ws) => {
                VarietyIdeal::new(ws.iter().cloned().map(crate::cpmap::NcPolynomial::monomial).collect())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VarietyShape {
    /// Compression of the constrained model to levels ≤ `level`, conjugated by
    /// a random unitary (nilpotent of order level + 1).
    Compression { level: usize },
    /// Commuting diagonal tuple scaled into the domain.
    Diagonal { d: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Recipe {
    DomainMember { symbol: SymbolSpec, d: usize, m: usize },
    PureNilpotent { symbol: SymbolSpec, d: usize, m: usize },
    SimilarPair { symbol: SymbolSpec, d: usize, m: usize, class: TargetClass, cond: f64 },
    VarietyMember { symbol: SymbolSpec, m: usize, ideal: IdealSpec, shape: VarietyShape, cond: Option<f64> },
    Strict { symbol: SymbolSpec, d: usize, m: usize, r_target: f64 },
    /// Lower block-triangular tuple on H_0 ⊕ H_c ⊕ H_cnc under a random unitary.
    Blocks { symbol: SymbolSpec, d0: usize, dc: usize, dcnc: usize, coupled: bool },
    /// Φ(I) = I with a distinguished subspace M, invariant or reducing.
    Invariant { symbol: SymbolSpec, dm: usize, drest: usize, reducing: bool },
}

impl Recipe {
    pub fn name(&self) -> &'static str {
        match self {
            Recipe::DomainMember { .. } => "domain_member",
            Recipe::PureNilpotent { .. } => "pure_nilpotent",
            Recipe::SimilarPair { .. } => "similar_pair",
            Recipe::VarietyMember { .. } => "variety_member",
            Recipe::Strict { .. } => "strict",
            Recipe::Blocks { .. } => "blocks",
            Recipe::Invariant { .. } => "invariant",
        }
    }
}

fn check_dims(d: usize, m: usize) -> Result<()> {
    if d == 0 || m == 0 {
        return Err(NcError::Precondition("d and m must be at least 1".into()));
    }
    Ok(())
}

pub fn generate_instance(seed: u64, recipe: &Recipe) -> Result<Instance> {
    let mut s = Sampler::new(seed);
    let mut ann: Vec<(&str, Value)> = Vec::new();
    let mut extras: Vec<(String, CMat)> = Vec::new();
    let mut variety = VarietyIdeal::empty();
    let (f, m, tuple) = match recipe {
        Recipe::DomainMember { symbol, d, m } => {
            check_dims(*d, *m)?;
            let f = symbol.build(&mut s)?;
            let g = s.gaussian_tuple(f.n(), *d);
            let (t, boundary) = scale_into_domain(&f, *m, &g, 0.95)?;
            ann.push(("boundary_scale", boundary.into()));
            ann.push(("scale", (0.95 * boundary).into()));
            (f, *m, t)
        }
        Recipe::PureNilpotent { symbol, d, m } => {
            check_dims(*d, *m)?;
            let f = symbol.build(&mut s)?;
            let g = s.nilpotent_tuple(f.n(), *d);
            let (t, boundary) = scale_into_domain(&f, *m, &g, 0.95)?;
            ann.push(("boundary_scale", boundary.into()));
            ann.push(("nilpotency_order", (*d).into()));
            (f, *m, t)
        }
        Recipe::Strict { symbol, d, m, r_target } => {
            check_dims(*d, *m)?;
            let f = symbol.build(&mut s)?;
            let g = s.gaussian_tuple(f.n(), *d);
            let t = scale_to_radius(&f, &g, *r_target)?;
            ann.push(("r_target", (*r_target).into()));
            ann.push(("r_f", radius(&f, &t)?.into()));
            (f, *m, t)
        }
        Recipe::SimilarPair { symbol, d, m, class, cond } => {
            check_dims(*d, *m)?;
            if *cond < 1.0 {
                return Err(NcError::Precondition("cond must be at least 1".into()));
            }
            let f = symbol.build(&mut s)?;
            let t = match class {
                TargetClass::Unital => unital_for(&mut s, &f, *d)?,
                TargetClass::Pure => scale_into_domain(&f, *m, &s.nilpotent_tuple(f.n(), *d), 0.95)?.0,
                TargetClass::Strict(r) => scale_to_radius(&f, &s.gaussian_tuple(f.n(), *d), *r)?,
                TargetClass::C1 => {
                    let a = linear_weights(&f)?;
                    let dc = d.div_ceil(2);
                    mixed_c1_tuple(&mut s, &a, dc, d - dc)?
                }
            };
            let y = s.with_cond(*d, *cond);
            let yinv = inverse(&y)?;
            let a = t.map(|ti| &y * ti * &yinv);
            for (i, ti) in t.mats().iter().enumerate() {
                extras.push((format!("T{}", i + 1), ti.clone()));
            }
            extras.push(("Y".into(), y.clone()));
            let sv = crate::linalg::singular_values(&y);
            let cond_y = sv[0] / sv[sv.len() - 1];
            ann.push(("class", class.tag().into()));
            ann.push(("cond_y", cond_y.into()));
            (f, *m, a)
        }
        Recipe::VarietyMember { symbol, m, ideal, shape, cond } => {
            check_dims(1, *m)?;
            let f = symbol.build(&mut s)?;
            variety = ideal.build(f.n());
            let t = match shape {
                VarietyShape::Compression { level } => {
                    let model = build_fock_model(&f, *m, (*level).max(*m * f.degree()).max(1))?;
                    let var = build_variety_model(&model, &variety, DEFAULT_RANK_TOL)?;
                    let h = var.levels_up_to(*level)?;
                    let t = var.b().compress(&h)?;
                    let u = s.unitary(t.dim());
                    ann.push(("nilpotency_order", (level + 1).into()));
                    t.map(|ti| u.adjoint() * ti * &u)
                }
                VarietyShape::Diagonal { d } => {
                    if *ideal != IdealSpec::Commuting {
                        return Err(NcError::Precondition("diagonal members need the commuting ideal".into()));
                    }
                    let g = MatrixTuple::new(
                        (0..f.n())
                            .map(|_| {
                                let z = s.gaussian(*d, 1);
                                CMat::from_fn(*d, *d, |i, j| if i == j { z[(i, 0)] } else { c(0.0) })
                            })
                            .collect(),
                    )?;
                    scale_into_domain(&f, *m, &g, 0.95)?.0
                }
            };
            let d = t.dim();
            let (a, dmat) = match cond {
                Some(k) => {
                    let y = s.with_cond(d, *k);
                    let yinv = inverse(&y)?;
                    extras.push(("Y".into(), y.clone()));
                    (t.map(|ti| &y * ti * &yinv), hermitize(&(&y * y.adjoint())))
                }
                None => (t, eye(d)),
            };
            extras.push(("D".into(), dmat));
            (f, *m, a)
        }
        Recipe::Blocks { symbol, d0, dc, dcnc, coupled } => {
            let f = symbol.build(&mut s)?;
            let a = linear_weights(&f)?;
            let (t, u) = block_fixture(&mut s, &a, *d0, *dc, *dcnc, *coupled)?;
            extras.push(("U".into(), u));
            ann.push(("dims_c0c1", serde_json::json!([d0, dc + dcnc])));
            ann.push(("dims_cccnc", serde_json::json!([dc, d0 + dcnc])));
            ann.push(("dims_three", serde_json::json!([d0, dc, dcnc])));
            (f, 1, t)
        }
        Recipe::Invariant { symbol, dm, drest, reducing } => {
            let f = symbol.build(&mut s)?;
            let (t, m_basis) = invariant_fixture(&mut s, &f, *dm, *drest, *reducing)?;
            extras.push(("PM".into(), crate::linalg::projector(&m_basis)));
            ann.push(("dim_m", (*dm).into()));
            ann.push(("reducing", (*reducing).into()));
            (f, 1, t)
        }
    };
    let mut inst = Instance::new(f, m, tuple)?;
    inst.variety = variety;
    inst.extras = extras.into_iter().collect();
    inst.meta = Meta {
        seed: Some(seed),
        construction: Some(recipe.name().into()),
        annotations: ann.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    };
    inst.validate()?;
    Ok(inst)
}

/// Largest t with tG in the domain (by bisection), then t·margin; returns the
/// scaled tuple and the boundary scale.
pub fn scale_into_domain(f: &FreeSymbol, m: usize, g: &MatrixTuple, margin: f64) -> Result<(MatrixTuple, f64)> {
    let member = |t: f64| domain_membership(f, m, &g.scaled(t), 0.0).map(|r| r.member);
    let mut hi = 1.0;
    let mut steps = 0;
    while member(hi)? {
        hi *= 2.0;
        steps += 1;
        if steps > 60 {
            // Everything is a member, e.g. a zero tuple.
            return Ok((g.clone(), f64::INFINITY));
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if member(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = margin * lo;
    if !member(t)? {
        return Err(NcError::NonConvergence { what: "domain bisection".into(), steps: 80, last_change: t });
    }
    Ok((g.scaled(t), lo))
}

/// r_f(T) = ρ(Φ_{f,T})^{1/2}.
pub fn radius(f: &FreeSymbol, t: &MatrixTuple) -> Result<f64> {
    Ok(spectral_radius(&PhiMap::new(f, t)?.superop()).sqrt())
}

/// Bisection on t for r_f(tG) = target; r_f(tG) is nondecreasing in t.
fn bisect_scale(target: f64, mut eval: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let (mut lo, mut hi) = (1.0, 1.0);
    for _ in 0..200 {
        if eval(hi)? >= target {
            break;
        }
        hi *= 2.0;
    }
    for _ in 0..200 {
        if eval(lo)? <= target {
            break;
        }
        lo *= 0.5;
    }
    let (vlo, vhi) = (eval(lo)?, eval(hi)?);
    if !(vlo <= target && target <= vhi) {
        return Err(NcError::NonConvergence { what: "radius bisection".into(), steps: 200, last_change: hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn scale_to_radius(f: &FreeSymbol, g: &MatrixTuple, target: f64) -> Result<MatrixTuple> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(NcError::Precondition("radius target must be positive".into()));
    }
    if radius(f, g)? == 0.0 {
        return Err(NcError::Precondition("tuple has zero radius; it cannot be scaled to a target".into()));
    }
    let t = bisect_scale(target, |t| radius(f, &g.scaled(t)))?;
    Ok(g.scaled(t))
}

/// Rescales G to ρ(Φ) = 1, takes the Perron fixed point Q and returns
/// T = Q^{-1/2} tG Q^{1/2}, for which Φ_{f,T}(I) = I.
pub fn perron_unital(f: &FreeSymbol, g: &MatrixTuple) -> Result<(MatrixTuple, CMat)> {
    let t = bisect_scale(1.0, |t| radius(f, &g.scaled(t)))?;
    let gt = g.scaled(t);
    let phi = PhiMap::new(f, &gt)?;
    let sup = phi.superop();
    let rho = spectral_radius(&sup);
    let d = g.dim();
    let shifted = &sup - CMat::identity(d * d, d * d) * c(rho);
    let v: CVec = svd(&shifted).v.column(d * d - 1).into_owned();
    let mut q = unvec(&v, d);
    let tr = q.trace();
    q *= tr.conj() / c(tr.norm());
    let q = hermitize(&q);
    let q = &q / c(max_eig(&q));
    if min_eig(&q) <= 1e-8 {
        return Err(NcError::NotPositive { what: "Perron fixed point".into(), min_eig: min_eig(&q) });
    }
    let qh = psd_sqrt(&q, 0.0)?;
    let qih = pd_inv_sqrt(&q, 0.0)?;
    Ok((gt.map(|x| &qih * x * &qh), q))
}

/// T with Φ_{f,T}(I) = I. For n = 1 the Perron point of X ↦ Σ a_k G^kXG^k*
/// has rank one, so T = sU with U Haar unitary and f(s²) = 1 instead.
pub fn unital_for(s: &mut Sampler, f: &FreeSymbol, d: usize) -> Result<MatrixTuple> {
    if f.n() == 1 {
        let u = MatrixTuple::new(vec![s.unitary(d)])?;
        let t = bisect_scale(1.0, |t| Ok(f.terms().map(|(w, a)| a * t.powi(2 * w.len() as i32)).sum()))?;
        return Ok(u.scaled(t));
    }
    Ok(perron_unital(f, &s.gaussian_tuple(f.n(), d))?.0)
}

fn weighted_phi(a: &[f64], t: &MatrixTuple) -> CMat {
    t.mats()
        .iter()
        .zip(a)
        .map(|(x, &w)| x * x.adjoint() * c(w))
        .fold(zeros(t.dim(), t.dim()), |acc, y| acc + y)
}

/// T_i = S^{-1/2}G_i with S = Σ a_i G_iG_i*: Σ a_i T_iT_i* = I.
pub fn unital_tuple(s: &mut Sampler, a: &[f64], d: usize) -> Result<MatrixTuple> {
    let g = s.gaussian_tuple(a.len(), d);
    let si = pd_inv_sqrt(&hermitize(&weighted_phi(a, &g)), 0.0)?;
    Ok(g.map(|x| &si * x))
}

/// Nilpotent tuple with ‖Σ a_i C_iC_i*‖ = norm².
pub fn pure_block(s: &mut Sampler, a: &[f64], d: usize, norm: f64) -> MatrixTuple {
    let g = s.nilpotent_tuple(a.len(), d);
    let p = op_norm(&weighted_phi(a, &g));
    if p == 0.0 {
        return g;
    }
    g.scaled(norm / p.sqrt())
}

/// Row orthonormal [√a_1 V_1 … √a_n V_n] with V_i = [[U_i, 0], [Y_i, Z_i]] on
/// H_c ⊕ H_cnc, then T = X^{-1/2} V X^{1/2} with X = I + Σ_k Φ_V^k(P_cnc).
/// The result is C_{·1} with lim Φ_T^k(I) = X^{-1}: eigenvalue 1 on H_c and
/// eigenvalues in (0, 1/2] on H_cnc.
pub fn mixed_c1_tuple(s: &mut Sampler, a: &[f64], dc: usize, dcnc: usize) -> Result<MatrixTuple> {
    if a.len() < 2 || dc == 0 {
        return Err(NcError::Precondition("mixed C_.1 tuples need n ≥ 2 and a nonzero C_c part".into()));
    }
    let n = a.len();
    let d = dc + dcnc;
    let mut rows = zeros(d, n * d);
    let gc = s.gaussian(n * dc, dc);
    let oc = orth(&gc, 1e-12);
    for r in 0..dc {
        for i in 0..n {
            for j in 0..dc {
                rows[(r, i * d + j)] = oc[(i * dc + j, r)].conj();
            }
        }
    }
    if dcnc > 0 {
        let top = rows.rows(0, dc).into_owned();
        let g = s.gaussian(dcnc, n * d);
        let g = &g - &g * top.adjoint() * &top;
        let o = orth(&g.adjoint(), 1e-12);
        if o.ncols() != dcnc {
            return Err(NcError::Precondition("degenerate mixed construction".into()));
        }
        for r in 0..dcnc {
            for k in 0..n * d {
                rows[(dc + r, k)] = o[(k, r)].conj();
            }
        }
    }
    let v = MatrixTuple::new((0..n).map(|i| rows.columns(i * d, d).into_owned() * c(1.0 / a[i].sqrt())).collect())?;
    if dcnc == 0 {
        return Ok(v);
    }
    let f = FreeSymbol::weighted_linear(a)?;
    let phi = PhiMap::new(&f, &v)?;
    let pcnc = CMat::from_fn(d, d, |i, j| if i == j && i >= dc { c(1.0) } else { c(0.0) });
    let sum = series_limit(&phi, &pcnc, 1, &LimitOptions::default())?;
    let x = eye(d) + sum;
    let xh = psd_sqrt(&x, 0.0)?;
    let xih = pd_inv_sqrt(&x, 0.0)?;
    Ok(v.map(|vi| &xih * vi * &xh))
}

/// Square root of the defect I − Φ(I) with roundoff-level eigenvalues zeroed.
fn defect_root(a: &[f64], t: &MatrixTuple) -> Result<CMat> {
    clean_sqrt(&hermitize(&(eye(t.dim()) - weighted_phi(a, t))))
}

/// Square root of a PSD matrix with roundoff-level eigenvalues zeroed, so the
/// root does not pick up √ε components on the kernel.
pub fn clean_sqrt(delta: &CMat) -> Result<CMat> {
    let scale = eigh(&delta).0.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    psd_apply(&delta, 1e-10 * scale, "block defect", |x| if x <= 1e-12 * scale { 0.0 } else { x.sqrt() })
}

/// [[C, 0], [X, D]] with X_i = Δ_D^{1/2}W_i; with ‖Σa CC*‖, ‖Σa WW*‖ ≤ 1/4
/// the defect of the coupled tuple stays positive.
fn couple(s: &mut Sampler, a: &[f64], cpart: &MatrixTuple, dpart: &MatrixTuple, coupled: bool) -> Result<MatrixTuple> {
    let (d0, d1) = (cpart.dim(), dpart.dim());
    let root = defect_root(a, dpart)?;
    let w: Vec<CMat> = (0..a.len()).map(|_| s.gaussian(d1, d0)).collect();
    let wnorm = op_norm(&w.iter().zip(a).fold(zeros(d1, d1), |acc, (x, &wt)| acc + x * x.adjoint() * c(wt))).sqrt();
    let mats = (0..a.len())
        .map(|i| {
            let mut t = zeros(d0 + d1, d0 + d1);
            t.view_mut((0, 0), (d0, d0)).copy_from(cpart.get(i));
            t.view_mut((d0, d0), (d1, d1)).copy_from(dpart.get(i));
            if coupled && wnorm > 0.0 {
                t.view_mut((d0, 0), (d1, d0)).copy_from(&(&root * &w[i] * c(0.5 / wnorm)));
            }
            t
        })
        .collect();
    MatrixTuple::new(mats)
}

/// Block fixture on H_0 ⊕ H_c ⊕ H_cnc conjugated by a random unitary U;
/// returns (U* T U, U).
pub fn block_fixture(
    s: &mut Sampler,
    a: &[f64],
    d0: usize,
    dc: usize,
    dcnc: usize,
    coupled: bool,
) -> Result<(MatrixTuple, CMat)> {
    if dcnc > 0 && dc == 0 {
        return Err(NcError::Precondition("a C_cnc part inside C_.1 needs a nonzero C_c part".into()));
    }
    let d = d0 + dc + dcnc;
    if d == 0 {
        return Err(NcError::Precondition("empty fixture".into()));
    }
    let upper = if dcnc > 0 {
        Some(mixed_c1_tuple(s, a, dc, dcnc)?)
    } else if dc > 0 {
        Some(unital_tuple(s, a, dc)?)
    } else {
        None
    };
    let t = match (d0, upper) {
        (0, Some(u)) => u,
        (_, None) => pure_block(s, a, d0, 0.5),
        (_, Some(u)) => {
            let p = pure_block(s, a, d0, 0.5);
            couple(s, a, &p, &u, coupled)?
        }
    };
    let u = s.unitary(d);
    Ok((t.map(|x| u.adjoint() * x * &u), u))
}

/// Φ(I) = I with M = span of the first dm coordinates T-invariant (reducing
/// when asked), conjugated by a random unitary. Returns (T, basis of M).
pub fn invariant_fixture(
    s: &mut Sampler,
    f: &FreeSymbol,
    dm: usize,
    drest: usize,
    reducing: bool,
) -> Result<(MatrixTuple, CMat)> {
    let d = dm + drest;
    if dm == 0 || drest == 0 {
        return Err(NcError::Precondition("both blocks must be nonempty".into()));
    }
    let n = f.n();
    if n == 1 && !reducing {
        // Φ(I) = I with n = 1 forces T = sU, and invariant subspaces of U reduce.
        return Err(NcError::Precondition("a non-reducing invariant subspace needs n ≥ 2".into()));
    }
    let (t, m_basis) = if reducing {
        let t1 = unital_for(s, f, dm)?;
        let t2 = unital_for(s, f, drest)?;
        let mats = t1.mats().iter().zip(t2.mats()).map(|(x, y)| block_diag(&[x, y])).collect();
        (MatrixTuple::new(mats)?, select_columns(&eye(d), &(0..dm).collect::<Vec<_>>()))
    } else {
        let m0 = select_columns(&eye(d), &(0..dm).collect::<Vec<_>>());
        let mut found = None;
        for _ in 0..20 {
            let mats = (0..n)
                .map(|_| {
                    let g = s.gaussian(d, d);
                    CMat::from_fn(d, d, |i, j| match (i < dm, j < dm) {
                        (false, true) => c(0.0),
                        (true, true) => g[(i, j)] * c(0.5),
                        _ => g[(i, j)],
                    })
                })
                .collect();
            if let Ok((t, q)) = perron_unital(f, &MatrixTuple::new(mats)?) {
                found = Some((t, orth(&(pd_inv_sqrt(&q, 0.0)? * &m0), 1e-12)));
                break;
            }
        }
        found.ok_or_else(|| NcError::Precondition("no positive definite Perron point in 20 draws".into()))?
    };
    let u = s.unitary(d);
    Ok((t.map(|x| u.adjoint() * x * &u), u.adjoint() * m_basis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpmap::{q_limit, variety_membership};
    use crate::harness::instance::emit_instance;
    use crate::linalg::{eigvalsh, is_exact_zero};
    use crate::similarity::isometric_similarity;
    use crate::symbol::enumerate_words;
    use crate::wold::{projection_invariance_criterion, triangulate_c0_c1, triangulate_cc_cnc, triangulate_three_block, WoldOptions};

    #[test]
    fn pure_nilpotent_kills_long_words() {
        let r = Recipe::PureNilpotent { symbol: SymbolSpec::Linear(2), d: 4, m: 1 };
        let inst = generate_instance(1, &r).unwrap();
        for w in enumerate_words(2, 4).iter().filter(|w| w.len() == 4) {
            assert!(is_exact_zero(&inst.tuple.word(w)));
        }
        assert!(domain_membership(&inst.symbol, 1, &inst.tuple, 0.0).unwrap().member);
    }

    #[test]
    fn generation_is_deterministic() {
        let r = Recipe::DomainMember { symbol: SymbolSpec::Random { n: 2, degree: 2 }, d: 3, m: 2 };
        let a = emit_instance(&generate_instance(11, &r).unwrap());
        let b = emit_instance(&generate_instance(11, &r).unwrap());
        let other = emit_instance(&generate_instance(12, &r).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, other);
    }

    #[test]
    fn domain_member_sits_inside_the_boundary() {
        let r = Recipe::DomainMember { symbol: SymbolSpec::Random { n: 2, degree: 2 }, d: 3, m: 2 };
        let inst = generate_instance(3, &r).unwrap();
        let mem = domain_membership(&inst.symbol, 2, &inst.tuple, 0.0).unwrap();
        assert!(mem.member, "{:?}", mem.margins);
        let boundary = inst.annotation_f64("boundary_scale").unwrap();
        let scale = inst.annotation_f64("scale").unwrap();
        let outside = inst.tuple.scaled(1.02 * boundary / scale);
        assert!(!domain_membership(&inst.symbol, 2, &outside, 0.0).unwrap().member);
    }

    #[test]
    fn strict_hits_its_radius() {
        for (seed, sym) in [(1, SymbolSpec::Linear(2)), (2, SymbolSpec::Random { n: 2, degree: 2 })] {
            let r = Recipe::Strict { symbol: sym, d: 3, m: 1, r_target: 0.5 };
            let inst = generate_instance(seed, &r).unwrap();
            let est = radius(&inst.symbol, &inst.tuple).unwrap();
            assert!((0.4..=0.6).contains(&est));
            assert!((est - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn unital_pair_recovers_within_condition_bounds() {
        let r = Recipe::SimilarPair {
            symbol: SymbolSpec::Random { n: 2, degree: 2 },
            d: 3,
            m: 1,
            class: TargetClass::Unital,
            cond: 3.0,
        };
        let inst = generate_instance(5, &r).unwrap();
        let t = MatrixTuple::new((1..=2).map(|i| inst.extras[&format!("T{i}")].clone()).collect()).unwrap();
        let phi = PhiMap::new(&inst.symbol, &t).unwrap();
        assert!(op_norm(&(phi.apply(&eye(3)) - eye(3))) < 1e-10);
        let y = &inst.extras["Y"];
        for i in 0..2 {
            assert!(op_norm(&(inst.tuple.get(i) * y - y * t.get(i))) < 1e-10);
        }
        let cond = inst.annotation_f64("cond_y").unwrap();
        assert!((cond - 3.0).abs() < 1e-9);
        let res = isometric_similarity(&inst.symbol, &inst.tuple, None, &LimitOptions::default(), 1e-8).unwrap();
        assert!(res.passed);
        assert!(res.certificates["c"] >= 1.0 / (cond * cond) - 1e-8);
        assert!(res.certificates["d"] <= cond * cond + 1e-8);
    }

    #[test]
    fn mixed_c1_has_the_designed_limit() {
        let mut s = Sampler::new(4);
        let a = [1.0, 0.5];
        let t = mixed_c1_tuple(&mut s, &a, 2, 2).unwrap();
        let f = FreeSymbol::weighted_linear(&a).unwrap();
        let phi = PhiMap::new(&f, &t).unwrap();
        assert!(max_eig(&(phi.apply(&eye(4)) - eye(4))) < 1e-12);
        let q = eigvalsh(&q_limit(&f, &t, &LimitOptions::default()).unwrap());
        assert!(q[0] > 1e-3 && q[1] <= 0.5 + 1e-9, "{q:?}");
        assert!((q[2] - 1.0).abs() < 1e-9 && (q[3] - 1.0).abs() < 1e-9, "{q:?}");
    }

    #[test]
    fn variety_members_satisfy_the_ideal() {
        let r = Recipe::VarietyMember {
            symbol: SymbolSpec::Linear(2),
            m: 2,
            ideal: IdealSpec::Commuting,
            shape: VarietyShape::Compression { level: 2 },
            cond: Some(2.0),
        };
        let inst = generate_instance(8, &r).unwrap();
        assert_eq!(inst.d(), 6);
        assert!(variety_membership(&inst.variety, &inst.tuple, 1e-12).unwrap().member);
        let d = &inst.extras["D"];
        let phi = PhiMap::new(&inst.symbol, &inst.tuple).unwrap();
        for s in 1..=2 {
            assert!(min_eig(&phi.defect(d, s)) > -1e-10);
        }
        for w in enumerate_words(2, 3).iter().filter(|w| w.len() == 3) {
            assert!(op_norm(&inst.tuple.word(w)) < 1e-12);
        }
        let diag = Recipe::VarietyMember {
            symbol: SymbolSpec::Linear(3),
            m: 1,
            ideal: IdealSpec::Commuting,
            shape: VarietyShape::Diagonal { d: 4 },
            cond: None,
        };
        let inst = generate_instance(8, &diag).unwrap();
        assert!(variety_membership(&inst.variety, &inst.tuple, 0.0).unwrap().member);
    }

    fn dims(v: &Value) -> Vec<usize> {
        v.as_array().unwrap().iter().map(|x| x.as_u64().unwrap() as usize).collect()
    }

    #[test]
    fn block_fixtures_recover_their_dimensions() {
        let opts = WoldOptions::default();
        for (seed, (d0, dc, dcnc, coupled)) in [(2, 2, 2, true), (1, 2, 0, true), (2, 1, 2, false), (0, 2, 2, true)].into_iter().enumerate() {
            let r = Recipe::Blocks { symbol: SymbolSpec::Weighted(vec![1.0, 0.7]), d0, dc, dcnc, coupled };
            let inst = generate_instance(seed as u64, &r).unwrap();
            let (f, t) = (&inst.symbol, &inst.tuple);
            let phi = PhiMap::new(f, t).unwrap();
            assert!(max_eig(&(phi.apply(&eye(inst.d())) - eye(inst.d()))) < 1e-12);
            let two = triangulate_c0_c1(f, t, None, &opts, 1e-8).unwrap();
            assert_eq!(two.block_dims, dims(&inst.meta.annotations["dims_c0c1"]));
            let cc = triangulate_cc_cnc(f, t, None, &opts, 1e-8).unwrap();
            assert_eq!(cc.block_dims, dims(&inst.meta.annotations["dims_cccnc"]));
            let three = triangulate_three_block(f, t, None, &opts, 1e-8).unwrap();
            assert_eq!(three.block_dims, dims(&inst.meta.annotations["dims_three"]));
            assert!(two.passed && cc.passed && three.passed);
        }
    }

    #[test]
    fn invariant_fixtures_match_the_projection_criterion() {
        for (seed, reducing) in [(1, false), (2, true)] {
            let r = Recipe::Invariant { symbol: SymbolSpec::Random { n: 2, degree: 2 }, dm: 2, drest: 2, reducing };
            let inst = generate_instance(seed, &r).unwrap();
            let basis = orth(&inst.extras["PM"], 1e-8);
            assert_eq!(basis.ncols(), 2);
            let crit = projection_invariance_criterion(&inst.symbol, &inst.tuple, &basis, 1e-8).unwrap();
            assert!(crit.invariant && crit.agree);
            assert_eq!(crit.reducing, reducing);
        }
    }
}
