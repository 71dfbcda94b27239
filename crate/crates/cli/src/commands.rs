//! One report per subcommand, built from an instance and the shared options.

use ncdomain::berezin::{build_kernel, kernel_identities_check, CompatibleTuple, KernelOptions};
use ncdomain::cpmap::{
    cone_check, defect, domain_membership, joint_spectral_radius, variety_membership, ConeKind, LimitOptions,
    SeriesOptions, VarietyIdeal, DEFAULT_R_GRID,
};
use ncdomain::fock::{build_fock_model, build_variety_model, flip_and_commutation_check, validate_universal_model};
use ncdomain::harness::{Check, Instance, Report};
use ncdomain::linalg::{eye, hermitize, op_norm, CMat};
use ncdomain::similarity::{
    c1_to_cc, intertwine_from_cone, isometric_similarity, pure_model_similarity, strict_similarity, unitary_model,
    SimilarityResult, TOL_CLASS,
};
use ncdomain::wold::{
    partial_isometry_check, triangulate_c0_c1, triangulate_cc_cnc, triangulate_three_block, wold_decompose,
    Triangulation, WoldOptions,
};
use ncdomain::Result;
use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Copy, Debug)]
pub struct Options {
    pub tol: f64,
    pub k_max: usize,
    pub len: Option<usize>,
    pub seed: u64,
}

impl Options {
    fn limit(&self) -> LimitOptions {
        LimitOptions { k_max: self.k_max, ..LimitOptions::default() }
    }

    fn kernel(&self) -> KernelOptions {
        KernelOptions { tol: self.tol, ..KernelOptions::default() }
    }

    fn wold(&self) -> WoldOptions {
        WoldOptions { limit: self.limit(), seed: self.seed, ..WoldOptions::default() }
    }

    /// Truncation length: at least m·deg f, and long enough for nilpotent
    /// tuples of order d when that stays small.
    fn model_len(&self, inst: &Instance) -> usize {
        let deg = inst.symbol.degree();
        self.len.unwrap_or_else(|| (inst.m * deg).max((deg * inst.d()).min(8)).max(1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SimilarKind {
    PureModel,
    UnitaryModel,
    Isometric,
    Strict,
    Cone,
    C1ToCc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum TriangulateKind {
    C0c1,
    Cccnc,
    Three,
}

impl TriangulateKind {
    fn tag(self) -> &'static str {
        match self {
            TriangulateKind::C0c1 => "c0c1",
            TriangulateKind::Cccnc => "cccnc",
            TriangulateKind::Three => "three",
        }
    }
}

fn ideal_of(inst: &Instance) -> Option<&VarietyIdeal> {
    (!inst.variety.is_empty()).then_some(&inst.variety)
}

/// Numeric leaves of a serialized result become certificates named by path.
fn absorb(r: &mut Report, prefix: &str, x: &impl Serialize) {
    fn walk(r: &mut Report, path: String, v: &Value) {
        match v {
            Value::Number(x) => {
                if let Some(x) = x.as_f64() {
                    r.certificates.insert(path, x);
                }
            }
            Value::Array(xs) => {
                for (k, x) in xs.iter().enumerate() {
                    walk(r, format!("{path}[{k}]"), x);
                }
            }
            Value::Object(m) => {
                for (k, x) in m {
                    walk(r, format!("{path}.{k}"), x);
                }
            }
            _ => {}
        }
    }
    if let Ok(v) = serde_json::to_value(x) {
        walk(r, prefix.to_string(), &v);
    }
}

/// Runs `body`, turning an error into a failed report instead of an abort.
fn guarded(mut r: Report, body: impl FnOnce(&mut Report) -> Result<()>) -> Report {
    if let Err(e) = body(&mut r) {
        r.error(e);
    }
    r.finish()
}

/// extras.R if given, otherwise (id−Φ)^m(D) with D = extras.D or I.
fn compatible_r(inst: &Instance) -> Result<CMat> {
    if let Some(r) = inst.extra("R") {
        return Ok(r.clone());
    }
    let dmat = inst.extra("D").cloned().unwrap_or_else(|| eye(inst.d()));
    Ok(hermitize(&defect(&inst.symbol, &inst.tuple, &dmat, inst.m)?))
}

fn scale(inst: &Instance) -> f64 {
    1.0 + inst.tuple.mats().iter().map(op_norm).fold(0.0, f64::max)
}

pub fn analyze(inst: &Instance, text: &str, o: &Options) -> Report {
    guarded(Report::new("analyze").with_digest(text), |r| {
        let (f, a) = (&inst.symbol, &inst.tuple);
        let mem = domain_membership(f, inst.m, a, o.tol)?;
        for (s, x) in mem.margins.iter().enumerate() {
            r.check(Check::at_least(format!("domain s={}", s + 1), *x, -o.tol));
        }
        if let Some(p) = ideal_of(inst) {
            let v = variety_membership(p, a, o.tol)?;
            let worst = v.residuals.iter().copied().fold(0.0, f64::max);
            r.check(Check::at_most("variety relations", worst, o.tol * scale(inst).powi(3)));
        }
        let rad = joint_spectral_radius(f, a, o.k_max, o.tol)?;
        r.certificates.insert("r_f".into(), rad.estimate);
        r.certificates.insert("r_f_spread".into(), rad.spread);
        let dmat = inst.extra("D").cloned().unwrap_or_else(|| eye(inst.d()));
        for (kind, name) in [(ConeKind::General, "C"), (ConeKind::Pure, "C_pure"), (ConeKind::Radial, "C_rad")] {
            match cone_check(f, inst.m, a, &dmat, kind, o.tol, &DEFAULT_R_GRID) {
                Ok(c) => {
                    r.certificates.insert(format!("cone {name}"), if c.member { 1.0 } else { 0.0 });
                    r.certificates.insert(format!("cone {name} min_eig"), c.min_eig);
                }
                Err(e) => r.caveats.push(format!("cone {name}: {e}")),
            }
        }
        Ok(())
    })
}

pub fn model(inst: &Instance, text: &str, o: &Options) -> Report {
    let len = o.model_len(inst);
    guarded(Report::new(format!("model L={len}")).with_digest(text), |r| {
        let model = build_fock_model(&inst.symbol, inst.m, len)?;
        r.certificates.insert("dim".into(), model.dim() as f64);
        let u = validate_universal_model(&model, o.tol);
        absorb(r, "universal", &u);
        r.check(Check::at_least("phi margin", u.phi_margin, -o.tol));
        for (s, x) in u.domain_margins.iter().enumerate() {
            r.check(Check::at_least(format!("model domain s={}", s + 1), *x, -o.tol));
        }
        r.check(Check::at_most("interior defect residual", u.interior_residual, o.tol));
        r.check(Check::holds("nilpotent beyond L", u.nilpotent_exact));
        let flip = flip_and_commutation_check(&model, o.tol)?;
        r.check(Check::at_most("W/Lambda commutation", flip.commutation_residual, o.tol));
        r.check(Check::at_most("flip intertwining", flip.flip_residual, o.tol));
        if let Some(p) = ideal_of(inst) {
            let var = build_variety_model(&model, p, 1e-10)?;
            let v = ncdomain::fock::validate_variety_model(&var, o.tol);
            absorb(r, "variety", &v);
            r.check(Check::at_most("variety co-invariance", v.coinvariance_residual, o.tol));
            r.check(Check::at_most("variety relations", v.poly_residual, o.tol));
        }
        Ok(())
    })
}

pub fn kernel(inst: &Instance, text: &str, o: &Options) -> Report {
    let len = o.model_len(inst);
    guarded(Report::new(format!("kernel L={len}")).with_digest(text), |r| {
        let (f, a) = (&inst.symbol, &inst.tuple);
        let rmat = compatible_r(inst)?;
        let mut q = CompatibleTuple::new(f, inst.m, a, &rmat);
        let model = build_fock_model(f, inst.m, len)?;
        let var = match ideal_of(inst) {
            Some(p) => {
                q = q.with_ideal(p);
                Some(build_variety_model(&model, p, 1e-10)?)
            }
            None => None,
        };
        let kern = build_kernel(&q, &model, var.as_ref(), &o.kernel())?;
        let rep = kernel_identities_check(&kern, o.tol);
        absorb(r, "kernel", &rep);
        let worst = rep.intertwining.iter().copied().fold(0.0, f64::max);
        r.check(Check::at_most("intertwining", worst, o.tol.max(rep.intertwining_bound)));
        r.check(Check::at_most("gram", rep.gram_residual, o.tol.max(rep.gram_bound)));
        if let Some(res) = &rep.constrained_intertwining {
            let worst = res.iter().copied().fold(0.0, f64::max);
            r.check(Check::at_most("constrained intertwining", worst, o.tol.max(rep.intertwining_bound)));
        }
        Ok(())
    })
}

fn similarity_report(r: &mut Report, s: &SimilarityResult, o: &Options) {
    absorb(r, "similarity", s);
    r.check(Check::holds("similarity certificates", s.passed));
    let worst = s.residuals.iter().copied().fold(0.0, f64::max);
    r.check(Check::at_most("A_i Y - Y T_i", worst, o.tol * (1.0 + op_norm(&s.y))));
    r.matrix("Y", &s.y);
    for (i, t) in s.t.mats().iter().enumerate() {
        r.matrix(format!("T{}", i + 1), t);
    }
}

pub fn similar(kind: SimilarKind, inst: &Instance, text: &str, o: &Options) -> Report {
    let name = format!("similar {}", clap::ValueEnum::to_possible_value(&kind).expect("named").get_name());
    guarded(Report::new(name).with_digest(text), |r| {
        let (f, a, m, ideal) = (&inst.symbol, &inst.tuple, inst.m, ideal_of(inst));
        let len = o.model_len(inst);
        let s = match kind {
            SimilarKind::PureModel => {
                pure_model_similarity(f, m, a, &compatible_r(inst)?, ideal, len, &o.kernel(), o.tol)?
            }
            SimilarKind::UnitaryModel => unitary_model(f, m, a, ideal, len, &o.kernel(), o.tol)?,
            SimilarKind::Isometric => isometric_similarity(f, a, ideal, &o.limit(), o.tol)?,
            SimilarKind::Strict => strict_similarity(f, m, a, ideal, &SeriesOptions::default(), o.tol)?,
            SimilarKind::Cone => {
                let g = inst.extra("G").or(inst.extra("D")).cloned().unwrap_or_else(|| eye(inst.d()));
                intertwine_from_cone(f, m, a, &g, ideal, o.tol)?
            }
            SimilarKind::C1ToCc => c1_to_cc(f, a, ideal, &o.limit(), TOL_CLASS, o.tol)?,
        };
        similarity_report(r, &s, o);
        Ok(())
    })
}

pub fn wold(inst: &Instance, text: &str, o: &Options) -> Report {
    guarded(Report::new("wold").with_digest(text), |r| {
        let (f, t, ideal) = (&inst.symbol, &inst.tuple, ideal_of(inst));
        let w = wold_decompose(f, inst.m, t, ideal, &o.wold(), o.tol)?;
        absorb(r, "wold", &w.report);
        r.check(Check::holds("wold certificates", w.report.passed));
        for b in [&w.m_space, &w.ker_q, &w.ker_i_minus_q] {
            let label = serde_json::to_value(b.label).ok().and_then(|v| v.as_str().map(String::from));
            r.subspace(label.unwrap_or_default(), &b.columns);
        }
        r.matrix("Q", &w.q);
        let p = partial_isometry_check(f, inst.m, t, ideal, &o.wold(), o.tol)?;
        absorb(r, "partial_isometry", &p);
        r.check(Check::holds("partial isometry predicates agree", p.agree));
        Ok(())
    })
}

pub fn triangulate(kind: TriangulateKind, inst: &Instance, text: &str, o: &Options) -> Report {
    guarded(Report::new(format!("triangulate {}", kind.tag())).with_digest(text), |r| {
        let (f, t, ideal) = (&inst.symbol, &inst.tuple, ideal_of(inst));
        let tri: Triangulation = match kind {
            TriangulateKind::C0c1 => triangulate_c0_c1(f, t, ideal, &o.wold(), o.tol)?,
            TriangulateKind::Cccnc => triangulate_cc_cnc(f, t, ideal, &o.wold(), o.tol)?,
            TriangulateKind::Three => triangulate_three_block(f, t, ideal, &o.wold(), o.tol)?,
        };
        absorb(r, "triangulation", &tri);
        r.check(Check::at_most("zero blocks", tri.zero_block_residual, o.tol * scale(inst)));
        r.check(Check::holds("block certificates", tri.passed));
        if let Some(want) = inst.meta.annotations.get(&format!("dims_{}", kind.tag())) {
            let got = serde_json::to_value(&tri.block_dims).unwrap_or_default();
            r.check(Check::holds("block dims match the construction", *want == got));
        }
        r.matrix("U", &tri.basis_change);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ncdomain::cpmap::MatrixTuple;
    use ncdomain::symbol::{FreeSymbol, Word};

    fn opts() -> Options {
        Options { tol: 1e-8, k_max: 10_000, len: None, seed: 7 }
    }

    #[test]
    fn zero_tuple_is_in_every_domain() {
        let inst = Instance::new(FreeSymbol::linear(2), 2, MatrixTuple::zeros(2, 3)).unwrap();
        let r = analyze(&inst, "", &opts());
        assert!(r.passed, "{}", r.to_text());
        assert_eq!(r.certificates["r_f"], 0.0);
        assert_eq!(r.certificates["cone C_pure"], 1.0);
    }

    #[test]
    fn absorb_names_leaves_by_path() {
        let mut r = Report::new("x");
        absorb(&mut r, "p", &serde_json::json!({"a": [1.0, 2.0], "b": {"c": 3}, "d": true}));
        assert_eq!(r.certificates.len(), 3);
        assert_eq!(r.certificates["p.a[1]"], 2.0);
        assert_eq!(r.certificates["p.b.c"], 3.0);
    }

    #[test]
    fn default_length_covers_the_symbol() {
        let f = FreeSymbol::new(1, [(Word::letter(0), 0.3), (Word::new(vec![0, 0]), 0.5)]).unwrap();
        let inst = Instance::new(f, 3, MatrixTuple::zeros(1, 2)).unwrap();
        assert_eq!(opts().model_len(&inst), 6);
    }
}
