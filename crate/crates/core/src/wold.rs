//! Wold-type decompositions from the limit Q = lim Φ^k(I), invariant
//! subspaces from cone elements, and the class triangulations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cpmap::{
    canonical_decomposition, cesaro_limit, cone_check, probe_of, q_limit_of, series_limit, variety_membership,
    ConeKind, LimitOptions, MatrixTuple, PhiMap, VarietyIdeal,
};
use crate::error::{NcError, Result};
use crate::linalg::{
    c, complement, eigh, eye, hermitize, hstack, min_eig, op_norm, orth, projector, select_columns,
    subspace_distance, tol_psd, CMat, CVec,
};
use crate::symbol::FreeSymbol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SubspaceLabel {
    M,
    #[serde(rename = "ker_Q")]
    KerQ,
    #[serde(rename = "ker_I_minus_Q")]
    KerIMinusQ,
    H0,
    H1,
    Hc,
    Hcnc,
    #[serde(rename = "ker_D")]
    KerD,
    #[serde(rename = "vanishing")]
    Vanishing,
    #[serde(rename = "fixed")]
    Fixed,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubspaceBasis {
    pub label: SubspaceLabel,
    #[serde(skip)]
    pub columns: CMat,
    pub dim: usize,
}

impl SubspaceBasis {
    fn new(label: SubspaceLabel, columns: CMat) -> Self {
        SubspaceBasis {
            label,
            dim: columns.ncols(),
            columns,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct WoldOptions {
    pub limit: LimitOptions,
    /// Eigenvalues of Q below this count as 0, above 1 − this as 1.
    pub tol_eig: f64,
    /// γ for the class C_{·1} and C_{cnc} certificates.
    pub tol_class: f64,
    /// Random unit vectors added to the C_{cnc} scan.
    pub samples: usize,
    pub seed: u64,
}

impl Default for WoldOptions {
    fn default() -> Self {
        WoldOptions {
            limit: LimitOptions::default(),
            tol_eig: 1e-8,
            tol_class: 1e-6,
            samples: 20,
            seed: 7,
        }
    }
}

/// Eigenvectors of a Hermitian matrix with eigenvalue in [lo, hi].
fn eigenspace(m: &CMat, lo: f64, hi: f64) -> CMat {
    let (vals, vecs) = eigh(&hermitize(m));
    let keep: Vec<usize> = (0..vals.len()).filter(|&j| vals[j] >= lo && vals[j] <= hi).collect();
    select_columns(&vecs, &keep)
}

/// max_i ‖(I−P)X_i P‖ with X_i = T_i* (`adjoint`) or T_i.
pub fn invariance_residual(t: &MatrixTuple, basis: &CMat, adjoint: bool) -> f64 {
    if basis.ncols() == 0 {
        return 0.0;
    }
    t.mats()
        .iter()
        .map(|ti| {
            let x = if adjoint { ti.adjoint() } else { ti.clone() };
            let v = x * basis;
            op_norm(&(&v - basis * (basis.adjoint() * &v)))
        })
        .fold(0.0, f64::max)
}

fn require_variety(ideal: Option<&VarietyIdeal>, t: &MatrixTuple, tol: f64) -> Result<()> {
    if let Some(p) = ideal {
        let v = variety_membership(p, t, tol)?;
        if !v.member {
            return Err(NcError::Precondition("tuple violates the variety relations".into()));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantSubspaces {
    pub ker_d: SubspaceBasis,
    /// {h : Φ^k(D)h → 0} = ker B for the limit B of Φ^k(D).
    pub vanishing: SubspaceBasis,
    /// {h : Φ^k(D)h = Dh for all k} = ker(D − B).
    pub fixed: SubspaceBasis,
    /// ‖P^⊥A_i*P‖ for the three subspaces, in order.
    pub residuals: [f64; 3],
    /// A_i-invariance residual of range D when D is an orthogonal projection.
    pub projection_residual: Option<f64>,
}

pub fn invariant_subspaces_from_solution(
    f: &FreeSymbol,
    m: usize,
    a: &MatrixTuple,
    dmat: &CMat,
    opts: &WoldOptions,
    tol: f64,
) -> Result<InvariantSubspaces> {
    let phi = PhiMap::new(f, a)?;
    let probe = probe_of(&phi, opts.limit.k_max.min(2000), 1e6);
    if !probe.bounded {
        return Err(NcError::Precondition("Φ is not power bounded on the probe horizon".into()));
    }
    let dh = hermitize(dmat);
    let lo = min_eig(&dh);
    let floor = tol.max(tol_psd(&dh));
    if lo < -floor {
        return Err(NcError::NotPositive {
            what: "D".into(),
            min_eig: lo,
        });
    }
    let margin = min_eig(&hermitize(&phi.defect(&dh, m)));
    if margin < -floor {
        return Err(NcError::NotPositive {
            what: "(id−Φ)^m(D)".into(),
            min_eig: margin,
        });
    }
    let dec = canonical_decomposition(f, a, &dh, m, &opts.limit)?;
    let scale = 1.0 + op_norm(&dh);
    let thr = opts.tol_eig * scale;
    let ker_d = eigenspace(&dh, f64::NEG_INFINITY, thr);
    let vanishing = eigenspace(&dec.b, f64::NEG_INFINITY, thr);
    let fixed = eigenspace(&dec.c, f64::NEG_INFINITY, thr);
    let residuals = [
        invariance_residual(a, &ker_d, true),
        invariance_residual(a, &vanishing, true),
        invariance_residual(a, &fixed, true),
    ];
    let is_projection = op_norm(&(&dh * &dh - &dh)) <= tol;
    let projection_residual = is_projection.then(|| invariance_residual(a, &eigenspace(&dh, 0.5, f64::INFINITY), false));
    Ok(InvariantSubspaces {
        ker_d: SubspaceBasis::new(SubspaceLabel::KerD, ker_d),
        vanishing: SubspaceBasis::new(SubspaceLabel::Vanishing, vanishing),
        fixed: SubspaceBasis::new(SubspaceLabel::Fixed, fixed),
        residuals,
        projection_residual,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceCriterion {
    /// max_i ‖(I−P)T_iP‖.
    pub invariance_residual: f64,
    /// min eig (P − Φ(P)).
    pub inequality_margin: f64,
    /// max_i ‖PT_i(I−P)‖, the second half of reducing.
    pub co_invariance_residual: f64,
    /// ‖Φ(P) − P‖.
    pub fixed_residual: f64,
    pub invariant: bool,
    pub reducing: bool,
    /// Both characterisations agree for invariance and for reducing.
    pub agree: bool,
}

/// For Φ_{f,T}(I) = I: M is T-invariant iff Φ(P_M) ⪯ P_M, reducing iff Φ(P_M) = P_M.
pub fn projection_invariance_criterion(
    f: &FreeSymbol,
    t: &MatrixTuple,
    m_basis: &CMat,
    tol: f64,
) -> Result<InvarianceCriterion> {
    let phi = PhiMap::new(f, t)?;
    let d = t.dim();
    let unital = op_norm(&(phi.apply(&eye(d)) - eye(d)));
    if unital > tol {
        return Err(NcError::Precondition(format!("Φ(I) differs from I by {unital:e}")));
    }
    if m_basis.nrows() != d {
        return Err(NcError::Dimension("subspace basis has the wrong height".into()));
    }
    let basis = orth(m_basis, 1e-12);
    let p = projector(&basis);
    let comp = complement(&basis, d);
    let invariance_residual = invariance_residual(t, &basis, false);
    let co_invariance_residual = invariance_residual_adjoint_side(t, &basis, &comp);
    let phip = phi.apply(&p);
    let inequality_margin = min_eig(&hermitize(&(&p - &phip)));
    let fixed_residual = op_norm(&(&phip - &p));
    let scale = 1.0 + t.mats().iter().map(op_norm).fold(0.0, f64::max);
    let by_subspace = invariance_residual <= tol * scale;
    let by_inequality = inequality_margin >= -tol;
    let reduce_subspace = by_subspace && co_invariance_residual <= tol * scale;
    let reduce_projection = fixed_residual <= tol;
    Ok(InvarianceCriterion {
        invariance_residual,
        inequality_margin,
        co_invariance_residual,
        fixed_residual,
        invariant: by_subspace,
        reducing: reduce_subspace,
        agree: by_subspace == by_inequality && reduce_subspace == reduce_projection,
    })
}

fn invariance_residual_adjoint_side(t: &MatrixTuple, basis: &CMat, comp: &CMat) -> f64 {
    if basis.ncols() == 0 || comp.ncols() == 0 {
        return 0.0;
    }
    t.mats()
        .iter()
        .map(|ti| op_norm(&(basis.adjoint() * ti * comp)))
        .fold(0.0, f64::max)
}

/// Orthocomplement of span{A_α R^{1/2}x}, which is exactly ker K for the
/// Berezin kernel K of (f, A, R). Eigenvalues of R up to 1e-9·max(‖R‖, 1)
/// count as zero, so a roundoff-sized R (e.g. Φ(I) = I) has ker K = H.
pub fn kernel_null_space(a: &MatrixTuple, r: &CMat) -> CMat {
    let d = a.dim();
    let r = hermitize(r);
    let mut v = eigenspace(&r, 1e-9 * op_norm(&r).max(1.0), f64::INFINITY);
    if v.ncols() == 0 {
        return eye(d);
    }
    loop {
        let mut parts = vec![v.clone()];
        parts.extend(a.mats().iter().map(|ai| ai * &v));
        let refs: Vec<&CMat> = parts.iter().collect();
        let next = orth(&hstack(&refs), 1e-9);
        if next.ncols() == v.ncols() {
            return complement(&next, d);
        }
        v = next;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WoldReport {
    pub dims: [usize; 3],
    /// ‖P^⊥T_i*P‖ for ker Q and ker(I−Q).
    pub invariance: [f64; 2],
    /// sin of the largest principal angle between ker(I−Q) and ker K.
    pub ker_k_angle: f64,
    /// sin of the largest principal angle between ker Q and ker(I−K*K).
    pub ker_gram_angle: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct WoldDecomposition {
    pub m_space: SubspaceBasis,
    pub ker_q: SubspaceBasis,
    pub ker_i_minus_q: SubspaceBasis,
    #[serde(skip)]
    pub q: CMat,
    /// K*K = Σ C(k+m−1,m−1)Φ^k((id−Φ)^m(I)), computed independently of Q.
    #[serde(skip)]
    pub gram: CMat,
    pub report: WoldReport,
}

/// H = M ⊕ ker Q ⊕ ker(I−Q), cross-checked against the Berezin kernel with
/// R = (id−Φ)^m(I).
pub fn wold_decompose(
    f: &FreeSymbol,
    m: usize,
    t: &MatrixTuple,
    ideal: Option<&VarietyIdeal>,
    opts: &WoldOptions,
    tol: f64,
) -> Result<WoldDecomposition> {
    require_variety(ideal, t, tol)?;
    let phi = PhiMap::new(f, t)?;
    let d = t.dim();
    let q = q_limit_of(&phi, &opts.limit)?;
    let (vals, vecs) = eigh(&q);
    let pick = |p: &dyn Fn(f64) -> bool| {
        let keep: Vec<usize> = (0..d).filter(|&j| p(vals[j])).collect();
        select_columns(&vecs, &keep)
    };
    let ker_q = pick(&|x| x < opts.tol_eig);
    let ker_iq = pick(&|x| x > 1.0 - opts.tol_eig);
    let mid = pick(&|x| x >= opts.tol_eig && x <= 1.0 - opts.tol_eig);

    let r = hermitize(&phi.defect(&eye(d), m));
    let gram = series_limit(&phi, &r, m, &opts.limit)?;
    let ker_k = kernel_null_space(t, &r);
    let ker_gram = eigenspace(&(eye(d) - &gram), f64::NEG_INFINITY, opts.tol_eig);
    let invariance = [invariance_residual(t, &ker_q, true), invariance_residual(t, &ker_iq, true)];
    let ker_k_angle = subspace_distance(&ker_iq, &ker_k);
    let ker_gram_angle = subspace_distance(&ker_q, &ker_gram);
    let scale = 1.0 + t.mats().iter().map(op_norm).fold(0.0, f64::max);
    let report = WoldReport {
        dims: [mid.ncols(), ker_q.ncols(), ker_iq.ncols()],
        invariance,
        ker_k_angle,
        ker_gram_angle,
        passed: invariance.iter().all(|&x| x <= tol * scale) && ker_k_angle <= tol && ker_gram_angle <= tol,
    };
    Ok(WoldDecomposition {
        m_space: SubspaceBasis::new(SubspaceLabel::M, mid),
        ker_q: SubspaceBasis::new(SubspaceLabel::KerQ, ker_q),
        ker_i_minus_q: SubspaceBasis::new(SubspaceLabel::KerIMinusQ, ker_iq),
        q,
        gram,
        report,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PartialIsometryReport {
    /// ‖Q² − Q‖.
    pub idempotent_residual: f64,
    /// ‖KK*K − K‖ = ‖(G−I)G(G−I)‖^{1/2} with G = K*K.
    pub partial_isometry_residual: f64,
    pub dim_m: usize,
    /// max_i of ‖P^⊥T_iP‖ and ‖PT_iP^⊥‖ over ker Q and ker(I−Q).
    pub reducing_residual: f64,
    /// (Q idempotent, K partial isometry, H = ker Q ⊕ ker(I−Q)).
    pub predicates: [bool; 3],
    pub agree: bool,
}

pub fn partial_isometry_check(
    f: &FreeSymbol,
    m: usize,
    t: &MatrixTuple,
    ideal: Option<&VarietyIdeal>,
    opts: &WoldOptions,
    tol: f64,
) -> Result<PartialIsometryReport> {
    let w = wold_decompose(f, m, t, ideal, opts, tol)?;
    let d = t.dim();
    let q = &w.q;
    let idempotent_residual = op_norm(&(q * q - q));
    let g = &w.gram;
    let gm = g - eye(d);
    let partial_isometry_residual = op_norm(&(&gm * g * &gm)).max(0.0).sqrt();
    let mut reducing_residual = 0.0f64;
    for basis in [&w.ker_q.columns, &w.ker_i_minus_q.columns] {
        reducing_residual = reducing_residual
            .max(invariance_residual(t, basis, false))
            .max(invariance_residual(t, basis, true));
    }
    let predicates = [
        idempotent_residual <= tol,
        partial_isometry_residual <= tol.sqrt(),
        w.m_space.dim == 0,
    ];
    Ok(PartialIsometryReport {
        idempotent_residual,
        partial_isometry_residual,
        dim_m: w.m_space.dim,
        reducing_residual,
        agree: predicates.iter().all(|&p| p == predicates[0]),
        predicates,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TriangulationKind {
    C0C1,
    CcCnc,
    Three,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockCertificate {
    pub class: String,
    pub dim: usize,
    pub passed: bool,
    /// Class-specific margin: decay for C_{·0}, min eig of the limit for
    /// C_{·1}, deviation from I for C_c, worst scan value for C_{cnc}.
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Triangulation {
    pub kind: TriangulationKind,
    #[serde(skip)]
    pub basis_change: CMat,
    pub block_dims: Vec<usize>,
    /// blocks[i][r][c] is block (r, c) of U*T_iU; blocks above the diagonal vanish.
    #[serde(skip)]
    pub blocks: Vec<Vec<Vec<CMat>>>,
    pub zero_block_residual: f64,
    pub certificates: Vec<BlockCertificate>,
    /// Angles between the distinguished subspaces from Q and from the Cesàro limit.
    pub uniqueness_angles: Vec<f64>,
    pub passed: bool,
}

impl Triangulation {
    pub fn lower_left(&self, i: usize) -> Vec<&CMat> {
        let k = self.block_dims.len();
        (0..k)
            .flat_map(|r| (0..r).map(move |c| (r, c)))
            .map(|(r, c)| &self.blocks[i][r][c])
            .collect()
    }
}

fn assemble(kind: TriangulationKind, t: &MatrixTuple, bases: &[CMat], certificates: Vec<BlockCertificate>, angles: Vec<f64>, tol: f64) -> Triangulation {
    let refs: Vec<&CMat> = bases.iter().collect();
    let u = hstack(&refs);
    let block_dims: Vec<usize> = bases.iter().map(|b| b.ncols()).collect();
    let mut blocks = Vec::new();
    let mut zero = 0.0f64;
    for ti in t.mats() {
        let mut grid = Vec::new();
        for (r, br) in bases.iter().enumerate() {
            let mut row = Vec::new();
            for (cc, bc) in bases.iter().enumerate() {
                let blk = br.adjoint() * ti * bc;
                if cc > r && blk.nrows() > 0 && blk.ncols() > 0 {
                    zero = zero.max(op_norm(&blk));
                }
                row.push(blk);
            }
            grid.push(row);
        }
        blocks.push(grid);
    }
    let scale = 1.0 + t.mats().iter().map(op_norm).fold(0.0, f64::max);
    let passed = zero <= tol * scale && certificates.iter().all(|c| c.passed) && angles.iter().all(|&a| a <= tol.max(1e-8));
    Triangulation {
        kind,
        basis_change: u,
        block_dims,
        blocks,
        zero_block_residual: zero,
        certificates,
        uniqueness_angles: angles,
        passed,
    }
}

fn pure_certificate(f: &FreeSymbol, t: &MatrixTuple, basis: &CMat, tol: f64) -> Result<BlockCertificate> {
    let dim = basis.ncols();
    if dim == 0 {
        return Ok(BlockCertificate {
            class: "C_.0".into(),
            dim,
            passed: true,
            margin: 0.0,
        });
    }
    let c_blk = t.compress(basis)?;
    let cert = cone_check(f, 1, &c_blk, &eye(dim), ConeKind::Pure, tol, &[])?;
    Ok(BlockCertificate {
        class: "C_.0".into(),
        dim,
        passed: cert.member,
        margin: cert.decay.last().map_or(0.0, |p| p.1),
    })
}

fn c1_certificate(f: &FreeSymbol, t: &MatrixTuple, basis: &CMat, opts: &WoldOptions) -> Result<BlockCertificate> {
    let dim = basis.ncols();
    if dim == 0 {
        return Ok(BlockCertificate {
            class: "C_.1".into(),
            dim,
            passed: true,
            margin: 0.0,
        });
    }
    let blk = t.compress(basis)?;
    let q = q_limit_of(&PhiMap::new(f, &blk)?, &opts.limit)?;
    let low = min_eig(&q);
    Ok(BlockCertificate {
        class: "C_.1".into(),
        dim,
        passed: low >= opts.tol_class,
        margin: low,
    })
}

fn cc_certificate(f: &FreeSymbol, t: &MatrixTuple, basis: &CMat, opts: &WoldOptions, tol: f64) -> Result<BlockCertificate> {
    let dim = basis.ncols();
    if dim == 0 {
        return Ok(BlockCertificate {
            class: "C_c".into(),
            dim,
            passed: true,
            margin: 0.0,
        });
    }
    let phi = PhiMap::new(f, &t.compress(basis)?)?;
    let mut x = eye(dim);
    let mut worst = 0.0f64;
    for _ in 0..opts.limit.k_max {
        x = phi.apply(&x);
        worst = worst.max(op_norm(&(&x - eye(dim))));
        if worst > tol {
            break;
        }
    }
    Ok(BlockCertificate {
        class: "C_c".into(),
        dim,
        passed: worst <= tol,
        margin: worst,
    })
}

/// For each candidate unit vector, the first k ≤ k_max with ⟨Φ^k(I)h,h⟩ ≤ 1−γ.
fn cnc_certificate(f: &FreeSymbol, t: &MatrixTuple, basis: &CMat, opts: &WoldOptions) -> Result<BlockCertificate> {
    let dim = basis.ncols();
    if dim == 0 {
        return Ok(BlockCertificate {
            class: "C_cnc".into(),
            dim,
            passed: true,
            margin: 0.0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut candidates: Vec<CVec> = (0..dim).map(|j| eye(dim).column(j).into_owned()).collect();
    for _ in 0..opts.samples {
        let v = CVec::from_fn(dim, |_, _| c(rng.random::<f64>() - 0.5) + crate::linalg::C64::i() * (rng.random::<f64>() - 0.5));
        let nv = v.norm();
        if nv > 0.0 {
            candidates.push(v / c(nv));
        }
    }
    let phi = PhiMap::new(f, &t.compress(basis)?)?;
    let mut open: Vec<bool> = vec![true; candidates.len()];
    let mut best = vec![f64::INFINITY; candidates.len()];
    let mut x = eye(dim);
    for _ in 0..opts.limit.k_max {
        x = phi.apply(&x);
        for (j, h) in candidates.iter().enumerate() {
            if open[j] {
                let val = (h.adjoint() * &x * h)[(0, 0)].re;
                best[j] = best[j].min(val);
                if val <= 1.0 - opts.tol_class {
                    open[j] = false;
                }
            }
        }
        if open.iter().all(|o| !o) {
            break;
        }
    }
    Ok(BlockCertificate {
        class: "C_cnc".into(),
        dim,
        passed: open.iter().all(|o| !o),
        margin: best.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Splits H into the limit eigenspaces of Q and of the Cesàro limit.
struct Split {
    ker_q: CMat,
    fixed: CMat,
    angle_ker: f64,
    angle_fixed: f64,
}

fn split(f: &FreeSymbol, t: &MatrixTuple, opts: &WoldOptions) -> Result<Split> {
    let phi = PhiMap::new(f, t)?;
    let d = t.dim();
    let q = q_limit_of(&phi, &opts.limit)?;
    let ker_q = eigenspace(&q, f64::NEG_INFINITY, opts.tol_eig);
    let fixed = eigenspace(&q, 1.0 - opts.tol_eig, f64::INFINITY);
    let ces = cesaro_limit(&phi, &eye(d), &opts.limit)?.limit;
    let angle_ker = subspace_distance(&ker_q, &eigenspace(&ces, f64::NEG_INFINITY, opts.tol_eig));
    let angle_fixed = subspace_distance(&fixed, &eigenspace(&ces, 1.0 - opts.tol_eig, f64::INFINITY));
    Ok(Split {
        ker_q,
        fixed,
        angle_ker,
        angle_fixed,
    })
}

/// Top block H_0 = ker Q (class C_{·0}), bottom block its complement (C_{·1}).
pub fn triangulate_c0_c1(
    f: &FreeSymbol,
    t: &MatrixTuple,
    ideal: Option<&VarietyIdeal>,
    opts: &WoldOptions,
    tol: f64,
) -> Result<Triangulation> {
    require_variety(ideal, t, tol)?;
    let s = split(f, t, opts)?;
    let h0 = s.ker_q;
    let h1 = complement(&h0, t.dim());
    let certs = vec![pure_certificate(f, t, &h0, tol)?, c1_certificate(f, t, &h1, opts)?];
    Ok(assemble(TriangulationKind::C0C1, t, &[h0, h1], certs, vec![s.angle_ker], tol))
}

/// Top block H_c = ker(I−Q) (class C_c), bottom block its complement (C_{cnc}).
pub fn triangulate_cc_cnc(
    f: &FreeSymbol,
    t: &MatrixTuple,
    ideal: Option<&VarietyIdeal>,
    opts: &WoldOptions,
    tol: f64,
) -> Result<Triangulation> {
    require_variety(ideal, t, tol)?;
    let s = split(f, t, opts)?;
    let hc = s.fixed;
    let hcnc = complement(&hc, t.dim());
    let certs = vec![
        cc_certificate(f, t, &hc, opts, tol)?,
        cnc_certificate(f, t, &hcnc, opts)?,
    ];
    Ok(assemble(TriangulationKind::CcCnc, t, &[hc, hcnc], certs, vec![s.angle_fixed], tol))
}

/// C_{·0} / C_c / C_{cnc}: the C_{·1} block of the first split is split again.
/// The third block carries a C_{cnc} certificate; its C_{·1} status is
/// reported as a fourth, informational certificate.
pub fn triangulate_three_block(
    f: &FreeSymbol,
    t: &MatrixTuple,
    ideal: Option<&VarietyIdeal>,
    opts: &WoldOptions,
    tol: f64,
) -> Result<Triangulation> {
    require_variety(ideal, t, tol)?;
    let s = split(f, t, opts)?;
    let h0 = s.ker_q;
    let h1 = complement(&h0, t.dim());
    let (hc, hcnc, angle2) = if h1.ncols() == 0 {
        (CMat::zeros(t.dim(), 0), CMat::zeros(t.dim(), 0), 0.0)
    } else {
        let d_blk = t.compress(&h1)?;
        let s2 = split(f, &d_blk, opts)?;
        let hc_local = s2.fixed;
        let hcnc_local = complement(&hc_local, d_blk.dim());
        (&h1 * hc_local, &h1 * hcnc_local, s2.angle_fixed)
    };
    let mut certs = vec![
        pure_certificate(f, t, &h0, tol)?,
        cc_certificate(f, t, &hc, opts, tol)?,
        cnc_certificate(f, t, &hcnc, opts)?,
    ];
    let mut info = c1_certificate(f, t, &hcnc, opts)?;
    let mut tri = assemble(TriangulationKind::Three, t, &[h0, hc, hcnc], certs.clone(), vec![s.angle_ker, angle2], tol);
    info.class = "C_.1 (third block, informational)".into();
    certs.push(info);
    tri.certificates = certs;
    Ok(tri)
}
