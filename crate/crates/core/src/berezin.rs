//! Berezin kernels K = Σ √b_α e_α ⊗ R^{1/2}A_α*, their constrained versions,
//! Berezin transforms and the inequalities they imply.

use serde::Serialize;

use crate::cpmap::{
    binomial_series, cone_check, vanishes_beyond, variety_membership, BinomialSeries, ConeCertificate, ConeKind,
    MatrixTuple, PhiMap, SeriesOptions, VarietyIdeal,
};
use crate::error::{NcError, Result};
use crate::fock::{build_fock_model, build_variety_model, FockModel, VarietyModel, DEFAULT_RANK_TOL};
use crate::linalg::{c, eigh, eye, hermitize, kron, max_eig, min_eig, op_norm, tol_psd, CMat, C64};
use crate::symbol::{word_at, word_index, FreeSymbol, Word};

/// The data (f, m, A, R, P) from which a kernel is built.
#[derive(Clone, Debug)]
pub struct CompatibleTuple {
    pub f: FreeSymbol,
    pub m: usize,
    pub a: MatrixTuple,
    pub r: CMat,
    pub ideal: Option<VarietyIdeal>,
    /// Required bound Σ C(k+m−1,m−1)Φ^k(R) ⪯ b·I; `None` accepts any finite sum.
    pub bound_b: Option<f64>,
}

impl CompatibleTuple {
    pub fn new(f: &FreeSymbol, m: usize, a: &MatrixTuple, r: &CMat) -> Self {
        CompatibleTuple {
            f: f.clone(),
            m,
            a: a.clone(),
            r: r.clone(),
            ideal: None,
            bound_b: None,
        }
    }

    pub fn with_ideal(mut self, ideal: &VarietyIdeal) -> Self {
        self.ideal = Some(ideal.clone());
        self
    }

    pub fn with_bound(mut self, b: f64) -> Self {
        self.bound_b = Some(b);
        self
    }

    /// The tuple with R = (id−Φ_{f,A})^m(D).
    pub fn from_defect(f: &FreeSymbol, m: usize, a: &MatrixTuple, dmat: &CMat) -> Result<Self> {
        let phi = PhiMap::new(f, a)?;
        if dmat.nrows() != a.dim() || dmat.ncols() != a.dim() {
            return Err(NcError::Dimension("D must match the tuple".into()));
        }
        Ok(CompatibleTuple::new(f, m, a, &hermitize(&phi.defect(dmat, m))))
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelOptions {
    /// Bound allowed on the part of the series lost to truncation.
    pub tol: f64,
    /// Eigenvalues of R at most `rank_tol·‖R‖` are treated as zero.
    pub rank_tol: f64,
    pub max_terms: usize,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            tol: 1e-12,
            rank_tol: 1e-12,
            max_terms: 10_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BerezinKernel {
    pub tuple: CompatibleTuple,
    pub model: FockModel,
    pub variety: Option<VarietyModel>,
    /// Orthonormal basis of the range of R^{1/2}.
    pub range_basis: CMat,
    /// diag(√λ)·V*, the map H → range coordinates.
    pub rhalf: CMat,
    /// Rows laid out word-major: row α·rank + ρ.
    pub k: CMat,
    /// (N_P* ⊗ I)K, present for a variety tuple.
    pub kq: Option<CMat>,
    pub series: BinomialSeries,
    /// Certified bound on ‖Σ_{|α|>L} b_α A_α R A_α*‖.
    pub truncation_tail: f64,
    /// ‖K − (N_P N_P* ⊗ I)K‖.
    pub range_residual: Option<f64>,
    pub bound_b: f64,
}

impl BerezinKernel {
    pub fn rank(&self) -> usize {
        self.range_basis.ncols()
    }

    /// The kernel acting into the model in use: K_q when constrained, else K.
    pub fn effective(&self) -> &CMat {
        self.kq.as_ref().unwrap_or(&self.k)
    }

    pub fn model_dim(&self) -> usize {
        match &self.variety {
            Some(v) => v.dim(),
            None => self.model.dim(),
        }
    }

    /// Model operators W_i (or B_i) tensored with I on the range.
    pub(crate) fn model_apply(&self, i: usize, x: &CMat) -> CMat {
        match &self.variety {
            Some(v) => kron_apply(v.b().get(i), x, self.rank()),
            None => self.model.w_apply(i, x, self.rank()),
        }
    }

    /// Model adjoints W_i* (or B_i*) tensored with I on the range.
    pub(crate) fn model_adj_apply(&self, i: usize, x: &CMat) -> CMat {
        match &self.variety {
            Some(v) => kron_apply(&v.b().get(i).adjoint(), x, self.rank()),
            None => self.model.w_adj_apply(i, x, self.rank()),
        }
    }
}

/// Rows ρ, ρ+r, ρ+2r, … of a word-major matrix.
fn slice_rho(x: &CMat, r: usize, rho: usize) -> CMat {
    let rows = x.nrows() / r;
    CMat::from_fn(rows, x.ncols(), |a, j| x[(a * r + rho, j)])
}

fn unslice(parts: &[CMat], ncols: usize) -> CMat {
    let r = parts.len();
    let rows = parts.first().map_or(0, |p| p.nrows());
    CMat::from_fn(rows * r, ncols, |row, j| parts[row % r][(row / r, j)])
}

/// (M ⊗ I_r)X for word-major X.
pub(crate) fn kron_apply(m: &CMat, x: &CMat, r: usize) -> CMat {
    let parts: Vec<CMat> = (0..r).map(|rho| m * slice_rho(x, r, rho)).collect();
    unslice(&parts, x.ncols())
}

/// K*(χ ⊗ I_r)K = Σ_ρ K_ρ* χ K_ρ.
fn sandwich_kernel(k: &CMat, chi: &CMat, r: usize) -> CMat {
    let d = k.ncols();
    let mut acc = CMat::zeros(d, d);
    for rho in 0..r {
        let kr = slice_rho(k, r, rho);
        acc += kr.adjoint() * chi * &kr;
    }
    acc
}

fn validate_tuple(q: &CompatibleTuple, model: &FockModel) -> Result<()> {
    if q.f != *model.symbol() || q.m != model.m() {
        return Err(NcError::Precondition("model was built for a different (f, m)".into()));
    }
    if q.f.n() != q.a.n() {
        return Err(NcError::Dimension("symbol and tuple disagree on n".into()));
    }
    let d = q.a.dim();
    if q.r.nrows() != d || q.r.ncols() != d {
        return Err(NcError::Dimension(format!("R must be {d}x{d}")));
    }
    let lo = min_eig(&hermitize(&q.r));
    if lo < -tol_psd(&q.r) {
        return Err(NcError::NotPositive {
            what: "R".into(),
            min_eig: lo,
        });
    }
    if let Some(p) = &q.ideal {
        p.check_letters(q.f.n())?;
    }
    Ok(())
}

pub fn build_kernel(
    q: &CompatibleTuple,
    model: &FockModel,
    variety: Option<&VarietyModel>,
    opts: &KernelOptions,
) -> Result<BerezinKernel> {
    validate_tuple(q, model)?;
    let phi = PhiMap::new(&q.f, &q.a)?;
    let r = hermitize(&q.r);
    let series = binomial_series(
        &phi,
        &r,
        q.m,
        &SeriesOptions {
            tol: opts.tol * 0.1,
            max_terms: opts.max_terms,
        },
    )?;
    let total = max_eig(&series.sum) + series.tail_bound;
    let bound_b = match q.bound_b {
        Some(b) if total > b * (1.0 + 1e-12) => {
            return Err(NcError::Precondition(format!(
                "compatibility bound violated: series reaches {total:e}, bound {b:e}"
            )))
        }
        Some(b) => b,
        None => total,
    };

    // Words of length > L only enter Φ^k(R) for k ≥ ⌈(L+1)/deg f⌉.
    let deg = q.f.degree().max(1);
    let j0 = (model.max_len() + 1).div_ceil(deg);
    let truncation_tail = if series.exact && series.terms() <= j0 {
        0.0
    } else {
        series.tail_from(j0)
    };
    if truncation_tail > opts.tol {
        return Err(NcError::TruncationTail {
            bound: truncation_tail,
            tol: opts.tol,
        });
    }

    let (vals, vecs) = eigh(&r);
    let top = vals.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..vals.len()).filter(|&j| vals[j] > opts.rank_tol * top && top > 0.0).collect();
    let range_basis = crate::linalg::select_columns(&vecs, &keep);
    let rank = keep.len();
    let rhalf = CMat::from_fn(rank, r.ncols(), |a, j| c(vals[keep[a]].sqrt()) * vecs[(j, keep[a])].conj());

    let n = model.n();
    let dim = model.dim();
    let d = q.a.dim();
    let adj = q.a.adjoints();
    let mut blocks: Vec<CMat> = Vec::with_capacity(dim);
    blocks.push(rhalf.clone());
    for idx in 1..dim {
        let w = word_at(n, idx);
        let first = w.letters()[0];
        let parent = word_index(n, &w.slice(1, w.len()));
        let next = &blocks[parent] * &adj[first];
        blocks.push(next);
    }
    let weights = model.weights();
    let mut k = CMat::zeros(dim * rank, d);
    for (idx, blk) in blocks.iter().enumerate() {
        let s = c(weights.at(idx).sqrt());
        for a in 0..rank {
            for j in 0..d {
                k[(idx * rank + a, j)] = s * blk[(a, j)];
            }
        }
    }

    let owned_variety = match (variety, &q.ideal) {
        (Some(v), _) => Some(v.clone()),
        (None, Some(p)) => Some(build_variety_model(model, p, DEFAULT_RANK_TOL)?),
        (None, None) => None,
    };
    let (kq, range_residual) = match &owned_variety {
        Some(v) => {
            let nb = v.n_basis();
            let parts: Vec<CMat> = (0..rank).map(|rho| nb.adjoint() * slice_rho(&k, rank, rho)).collect();
            let kq = unslice(&parts, d);
            let back = kron_apply(nb, &kq, rank);
            let res = op_norm(&(&k - back));
            (Some(kq), Some(res))
        }
        None => (None, None),
    };

    Ok(BerezinKernel {
        tuple: q.clone(),
        model: model.clone(),
        variety: owned_variety,
        range_basis,
        rhalf,
        k,
        kq,
        series,
        truncation_tail,
        range_residual,
        bound_b,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelReport {
    /// ‖K A_i* − (W_i*⊗I)K‖ per generator.
    pub intertwining: Vec<f64>,
    /// ‖K*K − Σ C(k+m−1,m−1)Φ^k(R)‖.
    pub gram_residual: f64,
    /// ‖K_q A_i* − (B_i*⊗I)K_q‖ per generator.
    pub constrained_intertwining: Option<Vec<f64>>,
    pub constrained_gram_residual: Option<f64>,
    pub range_residual: Option<f64>,
    /// Certified bounds implied by the truncation and series tails.
    pub intertwining_bound: f64,
    pub gram_bound: f64,
    pub exact: bool,
    pub passed: bool,
}

pub fn kernel_identities_check(kernel: &BerezinKernel, tol: f64) -> KernelReport {
    let a = &kernel.tuple.a;
    let rank = kernel.rank();
    let intertwining: Vec<f64> = (0..a.n())
        .map(|i| {
            let lhs = &kernel.k * a.get(i).adjoint();
            let rhs = kernel.model.w_adj_apply(i, &kernel.k, rank);
            op_norm(&(lhs - rhs))
        })
        .collect();
    let gram_residual = op_norm(&(kernel.k.adjoint() * &kernel.k - &kernel.series.sum));
    let (constrained_intertwining, constrained_gram_residual) = match &kernel.kq {
        Some(kq) => {
            let res: Vec<f64> = (0..a.n())
                .map(|i| op_norm(&(kq * a.get(i).adjoint() - kernel.model_adj_apply(i, kq))))
                .collect();
            let g = op_norm(&(kq.adjoint() * kq - &kernel.series.sum));
            (Some(res), Some(g))
        }
        None => (None, None),
    };
    let min_a = (0..a.n())
        .map(|i| kernel.tuple.f.coeff(&Word::letter(i)))
        .fold(f64::INFINITY, f64::min);
    let intertwining_bound = (kernel.truncation_tail / min_a).sqrt();
    let gram_bound = kernel.truncation_tail + kernel.series.tail_bound;
    let scale = 1.0 + op_norm(&kernel.series.sum);
    let worst = intertwining
        .iter()
        .chain(constrained_intertwining.iter().flatten())
        .copied()
        .chain([gram_residual, constrained_gram_residual.unwrap_or(0.0), kernel.range_residual.unwrap_or(0.0)])
        .fold(0.0, f64::max);
    KernelReport {
        passed: worst <= tol * scale,
        intertwining,
        gram_residual,
        constrained_intertwining,
        constrained_gram_residual,
        range_residual: kernel.range_residual,
        intertwining_bound,
        gram_bound,
        exact: kernel.truncation_tail == 0.0 && kernel.series.tail_bound == 0.0,
    }
}

/// K*(χ⊗I)K, using K_q when χ lives on N_P.
pub fn berezin_transform(kernel: &BerezinKernel, chi: &CMat) -> Result<CMat> {
    let rank = kernel.rank();
    let target = if chi.nrows() == kernel.model_dim() {
        kernel.effective()
    } else if chi.nrows() == kernel.model.dim() {
        &kernel.k
    } else {
        return Err(NcError::Dimension(format!(
            "χ is {}x{}, model space has dimension {}",
            chi.nrows(),
            chi.ncols(),
            kernel.model_dim()
        )));
    };
    if chi.ncols() != chi.nrows() {
        return Err(NcError::Dimension("χ must be square".into()));
    }
    Ok(sandwich_kernel(target, chi, rank))
}

/// One evaluation point of the radial transform.
#[derive(Clone, Debug, Serialize)]
pub struct RadialPoint {
    pub r: f64,
    /// ‖K_{q_r}*K_{q_r} − D‖.
    pub gram_residual: f64,
    /// ‖B_{q_r}[B_αB_β*] − r^{|α|+|β|}A_αDA_β*‖ per requested pair.
    pub ksk_residuals: Vec<f64>,
    #[serde(skip)]
    pub values: Vec<CMat>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RadialReport {
    pub cone: ConeCertificate,
    pub points: Vec<RadialPoint>,
    /// ‖value(r_{j+1}) − value(r_j)‖ per χ, maximised over χ.
    pub cauchy_differences: Vec<f64>,
    /// Values at the finest evaluated grid point.
    #[serde(skip)]
    pub extrapolated: Vec<CMat>,
    /// Grid points whose series did not certify (only r = 1 may be dropped).
    pub skipped: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RadialInput<'a> {
    pub f: &'a FreeSymbol,
    pub m: usize,
    pub a: &'a MatrixTuple,
    pub d: &'a CMat,
    pub ideal: &'a VarietyIdeal,
    pub max_len: usize,
    pub r_grid: &'a [f64],
    /// Elements χ of the model space (N_P coordinates).
    pub chis: &'a [CMat],
    /// Word pairs (α, β) for which B_αB_β* is also evaluated.
    pub ksk_pairs: &'a [(Word, Word)],
}

pub fn radial_berezin_transform(input: &RadialInput, opts: &KernelOptions, tol: f64) -> Result<RadialReport> {
    if !input.ideal.is_homogeneous() {
        return Err(NcError::Precondition("the radial transform needs homogeneous polynomials".into()));
    }
    let cone = cone_check(input.f, input.m, input.a, input.d, ConeKind::Radial, tol, input.r_grid)?;
    if !cone.member {
        return Err(NcError::Precondition("D is not in the radial cone".into()));
    }
    let model = build_fock_model(input.f, input.m, input.max_len)?;
    let var = build_variety_model(&model, input.ideal, DEFAULT_RANK_TOL)?;
    let b = var.b();
    let ksk_chis: Vec<CMat> = input
        .ksk_pairs
        .iter()
        .map(|(al, be)| b.word(al) * b.word(be).adjoint())
        .collect();

    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &r in input.r_grid {
        let ar = input.a.scaled(r);
        let q = CompatibleTuple::from_defect(input.f, input.m, &ar, input.d)?.with_ideal(input.ideal);
        let kernel = match build_kernel(&q, &model, Some(&var), opts) {
            Ok(k) => k,
            Err(NcError::TruncationTail { .. }) if r == 1.0 => {
                skipped.push(r);
                continue;
            }
            Err(e) => return Err(e),
        };
        let kq = kernel.effective();
        let gram_residual = op_norm(&(kq.adjoint() * kq - input.d));
        let rank = kernel.rank();
        let mut ksk_residuals = Vec::new();
        for ((al, be), chi) in input.ksk_pairs.iter().zip(&ksk_chis) {
            let got = sandwich_kernel(kq, chi, rank);
            let scale = r.powi((al.len() + be.len()) as i32);
            let want = input.a.word(al) * input.d * input.a.word(be).adjoint() * c(scale);
            ksk_residuals.push(op_norm(&(got - want)));
        }
        let values = input
            .chis
            .iter()
            .map(|chi| berezin_transform(&kernel, chi))
            .collect::<Result<Vec<_>>>()?;
        points.push(RadialPoint {
            r,
            gram_residual,
            ksk_residuals,
            values,
        });
    }
    let cauchy_differences = points
        .windows(2)
        .map(|w| {
            w[0].values
                .iter()
                .zip(&w[1].values)
                .map(|(x, y)| op_norm(&(x - y)))
                .fold(0.0, f64::max)
        })
        .collect();
    let extrapolated = points.last().map(|p| p.values.clone()).unwrap_or_default();
    Ok(RadialReport {
        cone,
        points,
        cauchy_differences,
        extrapolated,
        skipped,
    })
}

/// A polynomial Σ B_α B_β* ⊗ C_{αβ} in the model and its counterpart in A.
#[derive(Clone, Debug)]
pub struct PolySample {
    /// (α, β, C_{αβ}).
    pub terms: Vec<(Word, Word, CMat)>,
}

impl PolySample {
    pub(crate) fn ampliation(&self) -> Result<usize> {
        let k = self.terms.first().map_or(1, |t| t.2.nrows());
        if self.terms.iter().any(|t| t.2.nrows() != k || t.2.ncols() != k) {
            return Err(NcError::Dimension("coefficient matrices must share one square size".into()));
        }
        Ok(k)
    }

    pub(crate) fn eval(&self, tuple: &MatrixTuple, middle: &CMat) -> Result<CMat> {
        let k = self.ampliation()?;
        let d = tuple.dim();
        let mut acc = CMat::zeros(d * k, d * k);
        for (al, be, coef) in &self.terms {
            acc += kron(&(tuple.word(al) * middle * tuple.word(be).adjoint()), coef);
        }
        Ok(acc)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VonNeumannReport {
    pub cone: ConeCertificate,
    /// ‖D‖·‖p(B,B*)‖ − ‖p(A,A*)_D‖ per sample.
    pub slacks: Vec<f64>,
    pub min_slack: f64,
    pub passed: bool,
}

/// ‖Σ A_αDA_β* ⊗ C‖ ≤ ‖D‖·‖Σ B_αB_β* ⊗ C‖ for D in the pure or radial cone.
pub fn von_neumann_check(
    var: &VarietyModel,
    a: &MatrixTuple,
    dmat: &CMat,
    samples: &[PolySample],
    tol: f64,
) -> Result<VonNeumannReport> {
    let base = var.base();
    let (f, m) = (base.symbol(), base.m());
    let mut cone = cone_check(f, m, a, dmat, ConeKind::Pure, tol, &[])?;
    if !cone.member {
        cone = cone_check(f, m, a, dmat, ConeKind::Radial, tol, &crate::cpmap::DEFAULT_R_GRID)?;
    }
    if !cone.member {
        return Err(NcError::Precondition("D is in neither the pure nor the radial cone".into()));
    }
    let vm = variety_membership(var.ideal(), a, tol * (1.0 + op_norm_tuple(a)))?;
    if !vm.member {
        return Err(NcError::Precondition("tuple does not satisfy the variety relations".into()));
    }
    if !vanishes_beyond(a, base.max_len() + 1) {
        return Err(NcError::Precondition(format!(
            "products of length {} do not vanish; the truncated model is not exact",
            base.max_len() + 1
        )));
    }
    let dn = op_norm(dmat);
    let ib = eye(var.dim());
    let mut slacks = Vec::with_capacity(samples.len());
    for s in samples {
        let lhs = op_norm(&s.eval(a, dmat)?);
        let rhs = dn * op_norm(&s.eval(var.b(), &ib)?);
        slacks.push((rhs - lhs) / (1.0 + rhs));
    }
    let min_slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(VonNeumannReport {
        cone,
        passed: slacks.iter().all(|&s| s >= -tol),
        slacks,
        min_slack,
    })
}

fn op_norm_tuple(a: &MatrixTuple) -> f64 {
    a.mats().iter().map(op_norm).fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassicalVonNeumann {
    /// ‖p(A)‖.
    pub direct: f64,
    /// ‖p(S)‖ for the nilpotent shift of matching order.
    pub shift: f64,
    /// max |p(z)| over a fine grid of the unit circle.
    pub circle: f64,
}

/// One-variable check ‖p(A)‖ ≤ ‖p(S_ν)‖ ≤ sup_{|z|=1}|p(z)| for a nilpotent contraction A.
pub fn classical_von_neumann(a: &CMat, coeffs: &[C64]) -> Result<ClassicalVonNeumann> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(NcError::Dimension("A must be square".into()));
    }
    if op_norm(a) > 1.0 + 1e-12 {
        return Err(NcError::Precondition("A must be a contraction".into()));
    }
    let single = MatrixTuple::new(vec![a.clone()])?;
    let order = (1..=d).find(|&k| vanishes_beyond(&single, k)).ok_or_else(|| {
        NcError::Precondition("A must be nilpotent".into())
    })?;
    let eval = |x: &CMat| {
        let mut acc = CMat::zeros(x.nrows(), x.ncols());
        let mut pw = eye(x.nrows());
        for co in coeffs {
            acc += &pw * *co;
            pw = &pw * x;
        }
        acc
    };
    let shift = CMat::from_fn(order, order, |i, j| if i == j + 1 { c(1.0) } else { c(0.0) });
    let samples = 4096 * coeffs.len().max(1);
    let circle = (0..samples)
        .map(|t| {
            let z = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * t as f64 / samples as f64);
            coeffs.iter().rev().fold(c(0.0), |acc, co| acc * z + co).norm()
        })
        .fold(0.0, f64::max);
    Ok(ClassicalVonNeumann {
        direct: op_norm(&eval(a)),
        shift: op_norm(&eval(&shift)),
        circle,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MultianalyticReport {
    /// ‖(Ψ(B_i⊗I) − (B_i⊗I)Ψ) restricted to the interior horizon‖ per i.
    pub intertwining: Vec<f64>,
    /// ‖(I − P_H)(B_i⊗I)*H‖ per i.
    pub coinvariance: Vec<f64>,
    pub certificate: ConeCertificate,
    #[serde(skip)]
    pub g: CMat,
    #[serde(skip)]
    pub t: MatrixTuple,
}

/// G = P_H ΨΨ*|_H for a multi-analytic Ψ on N_P ⊗ C^k, certified in the pure
/// cone of the compression T = P_H (B⊗I)|_H.
pub fn multianalytic_cone_element(
    var: &VarietyModel,
    psi: &CMat,
    k: usize,
    h_embed: &CMat,
    tol: f64,
) -> Result<MultianalyticReport> {
    let big = var.dim() * k;
    if psi.nrows() != big || psi.ncols() != big || h_embed.nrows() != big {
        return Err(NcError::Dimension(format!("Ψ and H must act on a space of dimension {big}")));
    }
    let orth_err = op_norm(&(h_embed.adjoint() * h_embed - eye(h_embed.ncols())));
    if orth_err > 1e-10 {
        return Err(NcError::Precondition("H must have orthonormal columns".into()));
    }
    let ik = eye(k);
    let bk = var.b().map(|b| kron(b, &ik));
    let interior = kron(var.interior(), &ik);
    let intertwining: Vec<f64> = bk
        .mats()
        .iter()
        .map(|b| op_norm(&((psi * b - b * psi) * &interior)))
        .collect();
    let scale = 1.0 + op_norm(psi);
    if let Some(bad) = intertwining.iter().find(|&&x| x > tol * scale) {
        return Err(NcError::Precondition(format!("Ψ is not multi-analytic: residual {bad:e}")));
    }
    let ph = h_embed * h_embed.adjoint();
    let coinvariance: Vec<f64> = bk
        .mats()
        .iter()
        .map(|b| {
            let v = b.adjoint() * h_embed;
            op_norm(&(&v - &ph * &v))
        })
        .collect();
    if let Some(bad) = coinvariance.iter().find(|&&x| x > tol) {
        return Err(NcError::Precondition(format!("H is not co-invariant: residual {bad:e}")));
    }
    let t = bk.compress(h_embed)?;
    let g = hermitize(&(h_embed.adjoint() * psi * psi.adjoint() * h_embed));
    let base = var.base();
    let certificate = cone_check(base.symbol(), base.m(), &t, &g, ConeKind::Pure, tol, &[])?;
    Ok(MultianalyticReport {
        intertwining,
        coinvariance,
        certificate,
        g,
        t,
    })
}
