//! The completely positive map Φ_{f,A}(X) = Σ a_α A_α X A_α*, its powers,
//! defects, limits and solution cones.

mod poly;
mod tuple;

pub use poly::{NcPolynomial, VarietyIdeal};
pub use tuple::MatrixTuple;

use serde::Serialize;

use crate::error::{NcError, Result};
use crate::linalg::{
    binom, c, eye, hermitize, inverse, kron, max_abs, max_eig, min_eig, mul, op_norm, tol_psd, unvec, vec_of, CMat, CVec, C64,
};
use crate::symbol::FreeSymbol;

/// Φ_{f,A} stored through its Kraus-type terms (a_α, A_α).
#[derive(Clone, Debug)]
pub struct PhiMap {
    d: usize,
    terms: Vec<(f64, CMat)>,
    /// Nonzero entries of each A_α when it has at most two per column on average.
    sparse: Vec<Option<Vec<(usize, usize, C64)>>>,
}

fn sparse_entries(m: &CMat) -> Option<Vec<(usize, usize, C64)>> {
    let limit = 2 * m.ncols();
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if z != C64::new(0.0, 0.0) {
                if out.len() == limit {
                    return None;
                }
                out.push((i, j, z));
            }
        }
    }
    Some(out)
}

impl PhiMap {
    pub fn new(f: &FreeSymbol, a: &MatrixTuple) -> Result<Self> {
        if f.n() != a.n() {
            return Err(NcError::Dimension(format!(
                "symbol has {} generators, tuple has {}",
                f.n(),
                a.n()
            )));
        }
        let terms: Vec<(f64, CMat)> = f.terms().map(|(w, coef)| (coef, a.word(w))).collect();
        let sparse = terms.iter().map(|(_, m)| if a.dim() >= 32 { sparse_entries(m) } else { None }).collect();
        Ok(PhiMap { d: a.dim(), terms, sparse })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    fn check(&self, x: &CMat) -> Result<()> {
        if x.nrows() != self.d || x.ncols() != self.d {
            return Err(NcError::Dimension(format!(
                "argument is {}x{}, map acts on {}x{}",
                x.nrows(),
                x.ncols(),
                self.d,
                self.d
            )));
        }
        Ok(())
    }

    pub fn apply(&self, x: &CMat) -> CMat {
        let mut acc = CMat::zeros(self.d, self.d);
        for ((a, m), sp) in self.terms.iter().zip(&self.sparse) {
            match sp {
                Some(entries) => {
                    // acc += a·M X M* one nonzero at a time.
                    let mut mx = CMat::zeros(self.d, self.d);
                    for &(i, j, z) in entries {
                        let row = x.row(j) * z;
                        let mut dst = mx.row_mut(i);
                        dst += row;
                    }
                    for &(i, j, z) in entries {
                        let col = mx.column(j) * (z.conj() * *a);
                        let mut dst = acc.column_mut(i);
                        dst += col;
                    }
                }
                None => acc += mul(&mul(m, x), &m.adjoint()) * c(*a),
            }
        }
        acc
    }

    pub fn power(&self, x: &CMat, k: usize) -> CMat {
        let mut y = x.clone();
        for _ in 0..k {
            y = self.apply(&y);
        }
        y
    }

    /// (id−Φ)^s(X) = Σ_j (−1)^j C(s,j) Φ^j(X).
    pub fn defect(&self, x: &CMat, s: usize) -> CMat {
        let mut acc = CMat::zeros(self.d, self.d);
        let mut y = x.clone();
        for j in 0..=s {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += &y * c(sign * binom(s, j));
            if j < s {
                y = self.apply(&y);
            }
        }
        acc
    }

    /// d²×d² matrix of Φ acting on column-major vec(X).
    pub fn superop(&self) -> CMat {
        let d2 = self.d * self.d;
        let mut s = CMat::zeros(d2, d2);
        for (a, m) in &self.terms {
            s += kron(&m.map(|z| z.conj()), m) * c(*a);
        }
        s
    }
}

pub fn apply_phi(f: &FreeSymbol, a: &MatrixTuple, x: &CMat) -> Result<CMat> {
    let phi = PhiMap::new(f, a)?;
    phi.check(x)?;
    Ok(phi.apply(x))
}

pub fn phi_power(f: &FreeSymbol, a: &MatrixTuple, x: &CMat, k: usize) -> Result<CMat> {
    let phi = PhiMap::new(f, a)?;
    phi.check(x)?;
    Ok(phi.power(x, k))
}

pub fn defect(f: &FreeSymbol, a: &MatrixTuple, x: &CMat, s: usize) -> Result<CMat> {
    let phi = PhiMap::new(f, a)?;
    phi.check(x)?;
    Ok(phi.defect(x, s))
}

#[derive(Clone, Debug, Serialize)]
pub struct Membership {
    pub member: bool,
    /// Minimum eigenvalue of (id−Φ)^s(I) for s = 1..m.
    pub margins: Vec<f64>,
}

pub fn domain_membership(f: &FreeSymbol, m: usize, a: &MatrixTuple, tol: f64) -> Result<Membership> {
    let phi = PhiMap::new(f, a)?;
    let id = eye(a.dim());
    let margins: Vec<f64> = (1..=m).map(|s| min_eig(&phi.defect(&id, s))).collect();
    Ok(Membership {
        member: margins.iter().all(|&x| x >= -tol),
        margins,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct VarietyCheck {
    pub member: bool,
    pub residuals: Vec<f64>,
}

pub fn variety_membership(ideal: &VarietyIdeal, a: &MatrixTuple, tol: f64) -> Result<VarietyCheck> {
    ideal.check_letters(a.n())?;
    let residuals: Vec<f64> = ideal.polys().iter().map(|p| op_norm(&p.eval(a))).collect();
    Ok(VarietyCheck {
        member: residuals.iter().all(|&r| r <= tol),
        residuals,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RadiusEstimate {
    /// √ρ(Φ) from the eigenvalues of the superoperator.
    pub estimate: f64,
    /// (k, ‖Φ^k(I)‖^{1/2k}) for k = 1, 2, 4, …
    pub sequence: Vec<(usize, f64)>,
    /// Difference of the last two power iterates.
    pub spread: f64,
    pub converged: bool,
    /// All words of length d vanish, so the estimate is exactly 0.
    pub nilpotent: bool,
}

pub fn joint_spectral_radius(f: &FreeSymbol, a: &MatrixTuple, k_max: usize, tol: f64) -> Result<RadiusEstimate> {
    let phi = PhiMap::new(f, a)?;
    let mut r = radius_of(&phi, k_max, tol);
    // Jointly nilpotent tuples have r_f = 0; the eigenvalues of the
    // superoperator only resolve that to about ε^{1/order}.
    if vanishes_beyond(a, a.dim()) {
        r.estimate = 0.0;
        r.nilpotent = true;
    }
    Ok(r)
}

pub(crate) fn radius_of(phi: &PhiMap, k_max: usize, tol: f64) -> RadiusEstimate {
    let sup = phi.superop();
    let estimate = crate::linalg::spectral_radius(&sup).sqrt();
    let vi = vec_of(&eye(phi.d));
    let mut p = sup;
    let mut log_scale = 0.0f64;
    let mut sequence = Vec::new();
    let mut k = 1usize;
    loop {
        let x = unvec(&(&p * &vi), phi.d);
        let norm = max_eig(&hermitize(&x)).max(0.0);
        if norm == 0.0 {
            sequence.push((k, 0.0));
            break;
        }
        sequence.push((k, ((log_scale + norm.ln()) / (2.0 * k as f64)).exp()));
        if k.saturating_mul(2) > k_max.max(2) {
            break;
        }
        p = mul(&p, &p);
        log_scale *= 2.0;
        let s = max_abs(&p);
        if s == 0.0 {
            sequence.push((2 * k, 0.0));
            break;
        }
        p /= c(s);
        log_scale += s.ln();
        k *= 2;
    }
    let spread = match sequence.len() {
        0 | 1 => 0.0,
        n => (sequence[n - 1].1 - sequence[n - 2].1).abs(),
    };
    RadiusEstimate {
        estimate,
        sequence,
        spread,
        converged: spread <= tol,
        nilpotent: false,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PowerProbe {
    pub bounded: bool,
    pub max_norm: f64,
    pub steps: usize,
    /// Always true: a finite scan certifies nothing beyond k_max.
    pub heuristic: bool,
}

pub fn power_bounded_probe(f: &FreeSymbol, a: &MatrixTuple, k_max: usize, bound: f64) -> Result<PowerProbe> {
    let phi = PhiMap::new(f, a)?;
    Ok(probe_of(&phi, k_max, bound))
}

pub(crate) fn probe_of(phi: &PhiMap, k_max: usize, bound: f64) -> PowerProbe {
    let sup = phi.superop();
    let mut v = vec_of(&eye(phi.d));
    let mut max_norm = 1.0f64;
    let mut steps = 0;
    for k in 1..=k_max {
        v = &sup * &v;
        steps = k;
        let norm = max_eig(&hermitize(&unvec(&v, phi.d)));
        max_norm = max_norm.max(norm);
        if max_norm > bound || v.iter().all(|z| *z == c(0.0)) {
            break;
        }
    }
    PowerProbe {
        bounded: max_norm <= bound,
        max_norm,
        steps,
        heuristic: true,
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LimitOptions {
    /// Stagnation threshold on successive iterates, max-entry norm.
    pub tol_limit: f64,
    /// Cap on sequential iterations (probes, Cesàro averages).
    pub k_max: usize,
    /// Cap on doublings for limits computed by repeated squaring.
    pub max_doublings: usize,
    /// Tolerance for verifying fixed-point identities.
    pub tol: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions {
            tol_limit: 1e-12,
            k_max: 10_000,
            max_doublings: 60,
            tol: 1e-8,
        }
    }
}

/// lim_k Φ^k(X) by repeated squaring of the superoperator, with stagnation
/// detection on the iterates Φ^{2^j}(X).
pub(crate) fn power_limit(phi: &PhiMap, x: &CMat, opts: &LimitOptions, what: &str) -> Result<(CMat, usize)> {
    let d = phi.d;
    let vx = vec_of(x);
    let scale = max_abs(x).max(1.0);
    let mut p = phi.superop();
    let mut prev = unvec(&(&p * &vx), d);
    let mut last_change = f64::INFINITY;
    // Roundoff can leave an eigenvalue a few ulps above 1 on the fixed space;
    // the squares then drift away after converging, so the closest approach
    // is kept as a fallback.
    let mut best: Option<(f64, CMat, usize)> = None;
    for j in 1..=opts.max_doublings {
        p = mul(&p, &p);
        let next = unvec(&(&p * &vx), d);
        if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            break;
        }
        last_change = max_abs(&(&next - &prev));
        prev = next;
        if last_change <= opts.tol_limit * scale {
            return Ok((hermitize(&prev), j));
        }
        if best.as_ref().is_none_or(|b| last_change < b.0) {
            best = Some((last_change, prev.clone(), j));
        }
    }
    match best {
        Some((change, x, j)) if change <= opts.tol_limit.sqrt() * scale => Ok((hermitize(&x), j)),
        _ => Err(NcError::NonConvergence {
            what: what.into(),
            steps: opts.max_doublings,
            last_change,
        }),
    }
}

/// Σ_k C(k+m−1,m−1)Φ^k(Y) as m nested sums Σ_j Φ^j, each by doubling
/// S_{2N} = S_N + Φ^N(S_N) until the added block stagnates. No tail bound is
/// certified; this is meant for series that converge without a uniform rate.
/// A fixed-point component of Y below `tol` is treated as roundoff and
/// projected out, since the doubling would otherwise amplify it.
pub fn series_limit(phi: &PhiMap, y: &CMat, m: usize, opts: &LimitOptions) -> Result<CMat> {
    phi.check(y)?;
    let d = phi.d;
    let base = phi.superop();
    let ergodic = ergodic_projector(&base, opts)?;
    let mut cur = vec_of(y);
    let fixed = op_norm(&unvec(&(&ergodic * &cur), d));
    if fixed > opts.tol * (1.0 + op_norm(y)) {
        return Err(NcError::NonConvergence {
            what: "series Σ Φ^k (Y has a fixed-point component)".into(),
            steps: 0,
            last_change: fixed,
        });
    }
    for _ in 0..m {
        cur -= &ergodic * &cur;
        let mut p = base.clone();
        let mut s = cur.clone() + &p * &cur;
        let mut done = false;
        let mut last_change = f64::INFINITY;
        for _ in 0..opts.max_doublings {
            p = mul(&p, &p);
            let mut add = &p * &s;
            add -= &ergodic * &add;
            last_change = add.iter().map(|z| z.norm()).fold(0.0, f64::max);
            s += add;
            let scale = s.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
            if last_change <= opts.tol_limit * scale {
                done = true;
                break;
            }
        }
        if !done {
            return Err(NcError::NonConvergence {
                what: "series Σ Φ^k".into(),
                steps: opts.max_doublings,
                last_change,
            });
        }
        cur = s;
    }
    Ok(hermitize(&unvec(&cur, d)))
}

/// Q = lim Φ^k(I) for tuples with Φ(I) ⪯ I.
pub fn q_limit(f: &FreeSymbol, t: &MatrixTuple, opts: &LimitOptions) -> Result<CMat> {
    let phi = PhiMap::new(f, t)?;
    q_limit_of(&phi, opts)
}

pub(crate) fn q_limit_of(phi: &PhiMap, opts: &LimitOptions) -> Result<CMat> {
    let id = eye(phi.d);
    let excess = max_eig(&(phi.apply(&id) - &id));
    if excess > opts.tol {
        return Err(NcError::Precondition(format!(
            "Φ(I) exceeds I by {excess:e}; the power sequence is not monotone"
        )));
    }
    let (q, _) = power_limit(phi, &id, opts, "Φ^k(I)")?;
    let fixed = op_norm(&(phi.apply(&q) - &q));
    if fixed > opts.tol {
        return Err(NcError::NonConvergence {
            what: "Φ^k(I) limit is not a fixed point".into(),
            steps: opts.max_doublings,
            last_change: fixed,
        });
    }
    Ok(q)
}

#[derive(Clone, Debug)]
pub struct CesaroLimit {
    pub limit: CMat,
    /// ‖(1/k_max)Σ_{j<k_max} Φ^j(X) − limit‖.
    pub plain_gap: f64,
    pub fixed_residual: f64,
}

/// Projection onto ker(id−Φ) along range(id−Φ), as a d²×d² matrix. Errors
/// when eigenvalue 1 is not semisimple.
pub(crate) fn ergodic_projector(sup: &CMat, opts: &LimitOptions) -> Result<CMat> {
    let d2 = sup.nrows();
    let f = crate::linalg::svd(&(CMat::identity(d2, d2) - sup));
    let smax = f.s.first().copied().unwrap_or(0.0).max(1.0);
    let thresh = 1e-9 * smax;
    let kernel: Vec<usize> = (0..d2).filter(|&i| f.s[i] <= thresh).collect();
    let range: Vec<usize> = (0..d2).filter(|&i| f.s[i] > thresh).collect();
    if kernel.is_empty() {
        return Ok(CMat::zeros(d2, d2));
    }
    let kv = crate::linalg::select_columns(&f.v, &kernel);
    let ru = crate::linalg::select_columns(&f.u, &range);
    let split = crate::linalg::hstack(&[&kv, &ru]);
    let inv = inverse(&split).map_err(|_| NcError::NonConvergence {
        what: "Cesàro averages (eigenvalue 1 is not semisimple)".into(),
        steps: opts.k_max,
        last_change: f64::INFINITY,
    })?;
    Ok(&kv * inv.rows(0, kernel.len()))
}

/// Cesàro limit of Φ^j(X), computed as the projection of X onto ker(id−Φ)
/// along range(id−Φ), and cross-checked against the plain average at k_max.
pub fn cesaro_limit(phi: &PhiMap, x: &CMat, opts: &LimitOptions) -> Result<CesaroLimit> {
    let d = phi.d;
    let sup = phi.superop();
    let vx = vec_of(x);
    let limit = hermitize(&unvec(&(ergodic_projector(&sup, opts)? * &vx), d));
    let mut y = vx.clone();
    let mut sum = CVec::zeros(d * d);
    for _ in 0..opts.k_max {
        sum += &y;
        y = &sup * &y;
    }
    let avg = unvec(&(sum / c(opts.k_max as f64)), d);
    let plain_gap = op_norm(&(&avg - &limit));
    let fixed_residual = op_norm(&(phi.apply(&limit) - &limit));
    let scale = 1.0 + op_norm(x);
    if plain_gap > 1e-2 * scale || fixed_residual > opts.tol * scale {
        return Err(NcError::NonConvergence {
            what: "Cesàro averages".into(),
            steps: opts.k_max,
            last_change: plain_gap.max(fixed_residual),
        });
    }
    Ok(CesaroLimit {
        limit,
        plain_gap,
        fixed_residual,
    })
}

#[derive(Clone, Debug)]
pub struct CanonicalDecomposition {
    pub b: CMat,
    pub c: CMat,
    pub fixed_residual: f64,
    pub cesaro_gap: f64,
    pub residual_decay: f64,
}

/// Y = B + C with B = lim Φ^k(Y) fixed by Φ and Φ^k(C) → 0.
pub fn canonical_decomposition(
    f: &FreeSymbol,
    a: &MatrixTuple,
    y: &CMat,
    m: usize,
    opts: &LimitOptions,
) -> Result<CanonicalDecomposition> {
    let phi = PhiMap::new(f, a)?;
    phi.check(y)?;
    canonical_of(&phi, y, m, opts)
}

pub(crate) fn canonical_of(phi: &PhiMap, y: &CMat, m: usize, opts: &LimitOptions) -> Result<CanonicalDecomposition> {
    let probe = probe_of(phi, opts.k_max.min(2000), 1e6);
    if !probe.bounded {
        return Err(NcError::Precondition(format!(
            "power sequence not bounded (max norm {:e})",
            probe.max_norm
        )));
    }
    let lo = min_eig(&phi.defect(y, m));
    if lo < -tol_psd(y).max(opts.tol) {
        return Err(NcError::NotPositive {
            what: "(id−Φ)^m(Y)".into(),
            min_eig: lo,
        });
    }
    let (b, _) = power_limit(phi, y, opts, "Φ^k(Y)")?;
    let cmat = hermitize(&(y - &b));
    let fixed_residual = op_norm(&(phi.apply(&b) - &b));
    let ces = cesaro_limit(phi, y, opts)?;
    let cesaro_gap = op_norm(&(&ces.limit - &b));
    let (c_lim, _) = power_limit(phi, &cmat, opts, "Φ^k(C)")?;
    let residual_decay = op_norm(&c_lim);
    let scale = 1.0 + op_norm(y);
    if fixed_residual > opts.tol * scale || cesaro_gap > opts.tol * scale || residual_decay > opts.tol * scale {
        return Err(NcError::NonConvergence {
            what: "canonical decomposition".into(),
            steps: opts.max_doublings,
            last_change: fixed_residual.max(cesaro_gap).max(residual_decay),
        });
    }
    Ok(CanonicalDecomposition {
        b,
        c: cmat,
        fixed_residual,
        cesaro_gap,
        residual_decay,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConeKind {
    #[serde(rename = "C")]
    General,
    #[serde(rename = "C_pure")]
    Pure,
    #[serde(rename = "C_rad")]
    Radial,
}

pub const DEFAULT_R_GRID: [f64; 4] = [0.9, 0.95, 0.99, 1.0];

#[derive(Clone, Debug, Serialize)]
pub struct ConeCertificate {
    pub kind: ConeKind,
    pub member: bool,
    pub min_eig: f64,
    pub defect_min_eigs: Vec<f64>,
    /// (k, ‖Φ^k(D)‖) for k = 1, 2, 4, … (pure cone only).
    pub decay: Vec<(usize, f64)>,
    /// (r, minimum over s of the defect margin for rA) (radial cone only).
    pub r_grid: Option<Vec<(f64, f64)>>,
}

pub fn cone_check(
    f: &FreeSymbol,
    m: usize,
    a: &MatrixTuple,
    dmat: &CMat,
    kind: ConeKind,
    tol: f64,
    r_grid: &[f64],
) -> Result<ConeCertificate> {
    let phi = PhiMap::new(f, a)?;
    phi.check(dmat)?;
    let lo = min_eig(dmat);
    let defect_min_eigs: Vec<f64> = (1..=m).map(|s| min_eig(&phi.defect(dmat, s))).collect();
    let floor = tol.max(tol_psd(dmat));
    let mut member = lo >= -floor && defect_min_eigs.iter().all(|&x| x >= -floor);
    let mut decay = Vec::new();
    let mut grid = None;
    match kind {
        ConeKind::General => {}
        ConeKind::Pure => {
            let sup = phi.superop();
            let vd = vec_of(dmat);
            let mut p = sup;
            let scale = 1.0 + op_norm(dmat);
            let mut k = 1usize;
            let mut last = f64::INFINITY;
            for _ in 0..60 {
                let x = unvec(&(&p * &vd), phi.d);
                last = op_norm(&x);
                decay.push((k, last));
                if last <= tol * scale {
                    break;
                }
                p = mul(&p, &p);
                k = k.saturating_mul(2);
            }
            member &= last <= tol * scale;
        }
        ConeKind::Radial => {
            let mut pts = Vec::new();
            for &r in r_grid {
                if !(r > 0.0 && r <= 1.0) {
                    return Err(NcError::Precondition(format!("radial grid point {r} outside (0,1]")));
                }
                let phir = PhiMap::new(f, &a.scaled(r))?;
                let worst = (1..=m)
                    .map(|s| min_eig(&phir.defect(dmat, s)))
                    .fold(f64::INFINITY, f64::min);
                member &= worst >= -floor;
                pts.push((r, worst));
            }
            grid = Some(pts);
        }
    }
    Ok(ConeCertificate {
        kind,
        member,
        min_eig: lo,
        defect_min_eigs,
        decay,
        r_grid: grid,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SeriesOptions {
    /// Target for the certified tail bound.
    pub tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            tol: 1e-13,
            max_terms: 10_000,
        }
    }
}

/// Partial sum of Σ_k C(k+m−1,m−1) Φ^k(R) with a certified bound on the rest.
#[derive(Clone, Debug)]
pub struct BinomialSeries {
    pub sum: CMat,
    /// C(k+m−1,m−1)·‖Φ^k(R)‖ for the summed terms.
    pub term_norms: Vec<f64>,
    /// Upper bound on ‖Σ_{k ≥ terms} C(k+m−1,m−1) Φ^k(R)‖.
    pub tail_bound: f64,
    /// The summed terms exhaust the series (Φ^k(R) = 0 beyond them).
    pub exact: bool,
}

impl BinomialSeries {
    pub fn terms(&self) -> usize {
        self.term_norms.len()
    }

    /// Bound on ‖Σ_{k ≥ k0} C(k+m−1,m−1) Φ^k(R)‖.
    pub fn tail_from(&self, k0: usize) -> f64 {
        self.term_norms.iter().skip(k0).sum::<f64>() + self.tail_bound
    }
}

/// Σ_{j ≥ start} C(j+m−1,m−1) q^{⌊j/p⌋}.
fn blocked_tail(start: usize, p: usize, q: f64, m: usize) -> f64 {
    let cum = |e: usize| binom(e + m, m); // Σ_{j ≤ e} C(j+m−1,m−1)
    let mut acc = 0.0;
    let mut block = start / p;
    let mut lo = start;
    for _ in 0..100_000 {
        let hi = (block + 1) * p - 1;
        let below = if lo == 0 { 0.0 } else { cum(lo - 1) };
        let part = q.powi(block as i32) * (cum(hi) - below);
        acc += part;
        if !acc.is_finite() {
            return f64::INFINITY;
        }
        if part <= 1e-18 * acc || part == 0.0 {
            return acc;
        }
        block += 1;
        lo = hi + 1;
    }
    f64::INFINITY
}

/// Sums the series until the remainder is certified below `opts.tol`, using
/// ‖Φ^k(R)‖ ≤ ‖R‖‖Φ^k(I)‖ and ‖Φ^{a+b}(I)‖ ≤ ‖Φ^a(I)‖‖Φ^b(I)‖.
pub fn binomial_series(phi: &PhiMap, r: &CMat, m: usize, opts: &SeriesOptions) -> Result<BinomialSeries> {
    phi.check(r)?;
    let d = phi.d;
    let rnorm = op_norm(r);
    let mut sum = CMat::zeros(d, d);
    let mut term_norms = Vec::new();
    let mut x = r.clone();
    let mut s = eye(d);
    let mut s_norms: Vec<f64> = Vec::new();
    let mut last_bound = f64::INFINITY;
    for k in 0..opts.max_terms {
        if crate::linalg::is_exact_zero(&x) || crate::linalg::is_exact_zero(&s) {
            return Ok(BinomialSeries {
                sum: hermitize(&sum),
                term_norms,
                tail_bound: 0.0,
                exact: true,
            });
        }
        let ck = binom(k + m - 1, m - 1);
        sum += &x * c(ck);
        term_norms.push(ck * op_norm(&x));
        s_norms.push(max_eig(&hermitize(&s)).max(0.0));
        if k >= 1 && s_norms[k] < 1.0 {
            let lead = s_norms[..k].iter().copied().fold(0.0, f64::max);
            last_bound = rnorm * lead * blocked_tail(k + 1, k, s_norms[k], m);
            if last_bound <= opts.tol {
                return Ok(BinomialSeries {
                    sum: hermitize(&sum),
                    term_norms,
                    tail_bound: last_bound,
                    exact: false,
                });
            }
        }
        x = phi.apply(&x);
        s = phi.apply(&s);
    }
    Err(NcError::TruncationTail {
        bound: last_bound,
        tol: opts.tol,
    })
}

/// True when every product A_α with |α| = len vanishes up to rounding:
/// ‖A_α‖_F ≤ 1e-12·Π‖A_{α_j}‖_F. Prefixes already below that bound are pruned,
/// since their extensions stay below it.
pub fn vanishes_beyond(a: &MatrixTuple, len: usize) -> bool {
    const REL: f64 = 1e-12;
    // Cap on stored entries across one level of products.
    const MAX_ENTRIES: usize = 1 << 24;
    let max_words = MAX_ENTRIES / (a.dim() * a.dim()).max(1);
    let norms: Vec<f64> = a.mats().iter().map(|x| x.norm()).collect();
    let mut level: Vec<(CMat, f64)> = vec![(eye(a.dim()), 1.0)];
    for _ in 0..len {
        let mut next = Vec::new();
        for (p, s) in &level {
            for (i, ai) in a.mats().iter().enumerate() {
                let q = p * ai;
                let bound = s * norms[i];
                if q.norm() > REL * bound {
                    next.push((q, bound));
                }
            }
            if next.len() > max_words {
                return false;
            }
        }
        if next.is_empty() {
            return true;
        }
        level = next;
    }
    level.is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::symbol::Word;

    fn mat(rows: usize, data: &[f64]) -> CMat {
        CMat::from_row_slice(rows, data.len() / rows, &data.iter().map(|&x| c(x)).collect::<Vec<_>>())
    }

    fn single(a: CMat) -> MatrixTuple {
        MatrixTuple::new(vec![a]).unwrap()
    }

    #[test]
    fn scalar_conjugation() {
        let f = FreeSymbol::linear(1);
        let a = single(eye(2) * C64::new(0.3, 0.4));
        let x = mat(2, &[1.0, 2.0, 2.0, 5.0]);
        let y = apply_phi(&f, &a, &x).unwrap();
        assert!(op_norm(&(y - &x * c(0.25))) < 1e-14);
    }

    #[test]
    fn halves_sum_to_identity() {
        let f = FreeSymbol::linear(2);
        let h = eye(3) * c(0.5f64.sqrt());
        let a = MatrixTuple::new(vec![h.clone(), h]).unwrap();
        assert!(op_norm(&(apply_phi(&f, &a, &eye(3)).unwrap() - eye(3))) < 1e-15);
    }

    #[test]
    fn nilpotent_power_vanishes() {
        let f = FreeSymbol::linear(1);
        let a = single(mat(3, &[0.0, 1.0, 2.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0]));
        assert!(crate::linalg::is_exact_zero(&phi_power(&f, &a, &eye(3), 3).unwrap()));
        assert!(!crate::linalg::is_exact_zero(&phi_power(&f, &a, &eye(3), 2).unwrap()));
    }

    #[test]
    fn defect_matches_iteration() {
        let f = FreeSymbol::new(2, [(Word::letter(0), 0.5), (Word::letter(1), 0.7), (Word::new(vec![0, 1]), 0.2)]).unwrap();
        let a = MatrixTuple::new(vec![
            mat(2, &[0.2, 0.1, -0.3, 0.4]),
            mat(2, &[0.0, 0.5, 0.1, -0.2]),
        ])
        .unwrap();
        let phi = PhiMap::new(&f, &a).unwrap();
        let x = mat(2, &[2.0, 0.5, 0.5, 1.0]);
        let once = &x - phi.apply(&x);
        let twice = &once - phi.apply(&once);
        assert!(op_norm(&(phi.defect(&x, 2) - twice)) < 1e-14);
        assert_eq!(phi.defect(&x, 0), x);
    }

    #[test]
    fn zero_tuple_is_in_every_domain() {
        let f = FreeSymbol::linear(2);
        let a = MatrixTuple::zeros(2, 3);
        let mem = domain_membership(&f, 3, &a, 0.0).unwrap();
        assert!(mem.member);
        assert_eq!(mem.margins, vec![1.0, 1.0, 1.0]);
        let r = joint_spectral_radius(&f, &a, 100, 1e-9).unwrap();
        assert_eq!(r.estimate, 0.0);
    }

    #[test]
    fn jordan_radius() {
        let f = FreeSymbol::linear(1);
        let a = single(mat(2, &[0.5, 1.0, 0.0, 0.5]));
        let r = joint_spectral_radius(&f, &a, 10_000, 1e-6).unwrap();
        assert!((r.estimate - 0.5).abs() < 1e-10, "{}", r.estimate);
        let last = r.sequence.last().unwrap().1;
        assert!((last - 0.5).abs() < 1e-3);
    }

    #[test]
    fn conjugated_nilpotent_radius_is_zero() {
        let f = FreeSymbol::linear(1);
        let n = mat(4, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.3, 2.0, 0.0, 0.0, 0.1, 0.0, 0.7, 0.0]);
        let y = mat(4, &[2.0, 0.1, 0.0, 0.3, 0.0, 1.0, 0.4, 0.0, 0.2, 0.0, 1.5, 0.1, 0.0, 0.3, 0.0, 1.0]);
        let a = single(&y * n * inverse(&y).unwrap());
        let r = joint_spectral_radius(&f, &a, 1 << 10, 1e-8).unwrap();
        assert!(r.nilpotent);
        assert_eq!(r.estimate, 0.0);
    }

    #[test]
    fn growth_probe_fails() {
        let f = FreeSymbol::linear(1);
        let a = single(mat(1, &[2.0]));
        let p = power_bounded_probe(&f, &a, 4, 10.0).unwrap();
        assert!(!p.bounded);
        assert!(p.heuristic);
        let p = power_bounded_probe(&f, &a, 4, 1000.0).unwrap();
        assert_eq!(p.max_norm, 256.0);
    }

    #[test]
    fn commuting_diagonals_are_in_the_commuting_variety() {
        let a = MatrixTuple::new(vec![mat(2, &[1.0, 0.0, 0.0, 2.0]), mat(2, &[3.0, 0.0, 0.0, -1.0])]).unwrap();
        let v = variety_membership(&VarietyIdeal::commuting(2), &a, 0.0).unwrap();
        assert!(v.member);
        let sq = VarietyIdeal::new(vec![NcPolynomial::monomial(Word::new(vec![0, 0]))]);
        let n = MatrixTuple::new(vec![mat(2, &[0.0, 1.0, 0.0, 0.0]), eye(2)]).unwrap();
        assert_eq!(variety_membership(&sq, &n, 0.0).unwrap().residuals, vec![0.0]);
    }

    #[test]
    fn q_limit_of_block_mix() {
        let f = FreeSymbol::linear(1);
        let rot = mat(2, &[0.0, -1.0, 1.0, 0.0]);
        let nil = mat(2, &[0.0, 0.9, 0.0, 0.0]);
        let t = single(crate::linalg::block_diag(&[&rot, &nil]));
        let q = q_limit(&f, &t, &LimitOptions::default()).unwrap();
        let expect = crate::linalg::block_diag(&[&eye(2), &CMat::zeros(2, 2)]);
        assert!(op_norm(&(q - expect)) < 1e-12);
    }

    #[test]
    fn q_limit_rejects_expanding_tuple() {
        let f = FreeSymbol::linear(1);
        assert!(q_limit(&f, &single(mat(1, &[1.1])), &LimitOptions::default()).is_err());
    }

    #[test]
    fn canonical_split_of_block_mix() {
        let f = FreeSymbol::linear(1);
        let rot = mat(2, &[0.0, -1.0, 1.0, 0.0]);
        let nil = mat(2, &[0.0, 0.9, 0.0, 0.0]);
        let t = single(crate::linalg::block_diag(&[&rot, &nil]));
        let cd = canonical_decomposition(&f, &t, &eye(4), 1, &LimitOptions::default()).unwrap();
        let b = crate::linalg::block_diag(&[&eye(2), &CMat::zeros(2, 2)]);
        assert!(op_norm(&(&cd.b - &b)) < 1e-10);
        assert!(op_norm(&(&cd.c - (eye(4) - &b))) < 1e-10);
    }

    #[test]
    fn cesaro_of_rotation_average() {
        // Φ(X) = UXU* with U a rotation by π/2: Φ^j(X) is 4-periodic.
        let f = FreeSymbol::linear(1);
        let u = mat(2, &[0.0, -1.0, 1.0, 0.0]);
        let phi = PhiMap::new(&f, &single(u)).unwrap();
        let x = mat(2, &[1.0, 0.0, 0.0, 0.0]);
        let lim = cesaro_limit(&phi, &x, &LimitOptions::default()).unwrap();
        assert!(op_norm(&(&lim.limit - eye(2) * c(0.5))) < 1e-12);
    }

    #[test]
    fn geometric_series_oracle() {
        let f = FreeSymbol::linear(1);
        let a = single(eye(2) * c(0.6));
        let phi = PhiMap::new(&f, &a).unwrap();
        let s = binomial_series(&phi, &eye(2), 1, &SeriesOptions::default()).unwrap();
        let expect = 1.0 / (1.0 - 0.36);
        assert!(op_norm(&(&s.sum - eye(2) * c(expect))) < 1e-12);
        assert!(s.tail_bound <= 1e-13);
        let s2 = binomial_series(&phi, &eye(2), 2, &SeriesOptions::default()).unwrap();
        let expect2 = 1.0 / (1.0f64 - 0.36).powi(2);
        assert!((s2.sum[(0, 0)].re - expect2).abs() < 1e-11);
    }

    #[test]
    fn nilpotent_series_is_exact() {
        let f = FreeSymbol::linear(1);
        let a = single(mat(3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]));
        let phi = PhiMap::new(&f, &a).unwrap();
        let r = phi.defect(&eye(3), 1);
        let s = binomial_series(&phi, &r, 1, &SeriesOptions::default()).unwrap();
        assert!(s.exact);
        assert!(op_norm(&(&s.sum - eye(3))) < 1e-15);
        assert!(vanishes_beyond(&a, 3));
        assert!(!vanishes_beyond(&a, 2));
    }

    #[test]
    fn divergent_series_errors() {
        let f = FreeSymbol::linear(1);
        let phi = PhiMap::new(&f, &single(eye(1))).unwrap();
        let opts = SeriesOptions { tol: 1e-12, max_terms: 50 };
        assert!(binomial_series(&phi, &eye(1), 1, &opts).is_err());
    }

    #[test]
    fn series_limit_matches_geometric_sum() {
        let f = FreeSymbol::linear(1);
        let phi = PhiMap::new(&f, &single(eye(2) * c(0.5))).unwrap();
        let s = series_limit(&phi, &eye(2), 2, &LimitOptions::default()).unwrap();
        let want = 1.0 / (1.0f64 - 0.25).powi(2);
        assert!(op_norm(&(s - eye(2) * c(want))) < 1e-12);
    }

    #[test]
    fn cones() {
        let f = FreeSymbol::linear(1);
        let nil = single(mat(2, &[0.0, 1.0, 0.0, 0.0]));
        let z = CMat::zeros(2, 2);
        assert!(cone_check(&f, 1, &nil, &z, ConeKind::General, 1e-10, &[]).unwrap().member);
        let pure = cone_check(&f, 1, &nil, &eye(2), ConeKind::Pure, 1e-10, &[]).unwrap();
        assert!(pure.member);
        let rot = single(mat(2, &[0.0, -1.0, 1.0, 0.0]));
        assert!(!cone_check(&f, 1, &rot, &eye(2), ConeKind::Pure, 1e-10, &[]).unwrap().member);
        assert!(cone_check(&f, 1, &rot, &eye(2), ConeKind::Radial, 1e-10, &DEFAULT_R_GRID).unwrap().member);
    }
}
