//! The acceptance battery: ten criteria over seeded instance families.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::generate::{
    clean_sqrt, generate_instance, IdealSpec, Recipe, Sampler, SymbolSpec, TargetClass, VarietyShape,
};
use super::instance::Instance;
use super::report::{Check, Report, Tally};
use crate::berezin::{
    build_kernel, classical_von_neumann, kernel_identities_check, radial_berezin_transform, von_neumann_check,
    CompatibleTuple, KernelOptions, PolySample, RadialInput,
};
use crate::cpmap::{
    q_limit, series_limit, vanishes_beyond, LimitOptions, MatrixTuple, PhiMap, SeriesOptions, VarietyIdeal,
    DEFAULT_R_GRID,
};
use crate::error::{NcError, Result};
use crate::fock::{build_fock_model, build_variety_model, validate_universal_model, DEFAULT_RANK_TOL};
use crate::linalg::{c, eye, hermitize, op_norm, orth, unvec, vec_of, CMat, C64};
use crate::similarity::{
    isometric_similarity, pure_model_similarity, solve_operator_equation, strict_similarity, unitary_model,
};
use crate::symbol::{binom_exact, enumerate_words, weight_table_exact, word_index, FreeSymbol, Word};
use crate::wold::{
    invariant_subspaces_from_solution, partial_isometry_check, projection_invariance_criterion, triangulate_c0_c1,
    triangulate_cc_cnc, triangulate_three_block, WoldOptions,
};

#[derive(Clone, Copy, Debug)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Fewer instances per criterion; tolerances unchanged.
    pub quick: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { seed: 7, quick: false }
    }
}

impl SuiteConfig {
    fn count(&self, full: usize) -> usize {
        if self.quick {
            full.div_ceil(4).max(2)
        } else {
            full
        }
    }

    fn seed(&self, criterion: u64, i: usize) -> u64 {
        self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (criterion << 32) ^ i as u64
    }
}

pub const CRITERIA: [&str; 10] = [
    "weight oracle",
    "kernel identities",
    "universal model",
    "isometric similarity round trip",
    "strict similarity and operator equation",
    "pure model similarity",
    "von Neumann inequality",
    "Wold decomposition and triangulations",
    "invariant subspaces",
    "radial transform",
];

pub fn run_suite(cfg: &SuiteConfig) -> Report {
    let mut r = Report::new(format!("suite seed={} quick={}", cfg.seed, cfg.quick));
    r.sections = (1..=CRITERIA.len()).map(|k| run_criterion(k, cfg)).collect();
    r.finish()
}

pub fn run_criterion(k: usize, cfg: &SuiteConfig) -> Report {
    let name = CRITERIA.get(k.wrapping_sub(1)).copied().unwrap_or("unknown");
    let mut r = Report::new(format!("criterion {k}: {name}"));
    let mut t = Tally::default();
    let mut errors = Vec::new();
    let mut run = |label: String, res: Result<()>| {
        if let Err(e) = res {
            errors.push(format!("{label}: {e}"));
        }
    };
    match k {
        1 => criterion_weights(cfg, &mut t, &mut run),
        2 => criterion_kernel(cfg, &mut t, &mut run),
        3 => criterion_universal(cfg, &mut t, &mut run),
        4 => criterion_isometric(cfg, &mut t, &mut run),
        5 => criterion_strict(cfg, &mut t, &mut run),
        6 => criterion_pure_model(cfg, &mut t, &mut run),
        7 => criterion_von_neumann(cfg, &mut t, &mut run),
        8 => criterion_wold(cfg, &mut t, &mut run),
        9 => criterion_invariant(cfg, &mut t, &mut run),
        10 => criterion_radial(cfg, &mut t, &mut run),
        _ => run("criterion".into(), Err(NcError::Precondition(format!("no criterion {k}")))),
    }
    for c in t.into_checks() {
        r.check(c);
    }
    r.errors = errors;
    r.finish()
}

type Runner<'a> = dyn FnMut(String, Result<()>) + 'a;

/// Brute force over all cuts of α into nonempty factors γ_1…γ_j, each
/// weighted by C(j+m−1, m−1).
pub fn brute_force_weight(f: &FreeSymbol, m: usize, w: &Word) -> BigRational {
    let k = w.len();
    if k == 0 {
        return BigRational::one();
    }
    let coeff: BTreeMap<&Word, BigRational> = f
        .terms()
        .map(|(u, a)| (u, BigRational::from_float(a).expect("finite coefficient")))
        .collect();
    let mut total = BigRational::zero();
    for mask in 0u32..(1 << (k - 1)) {
        let mut prod = BigRational::one();
        let mut start = 0;
        let mut pieces = 0;
        for end in 1..=k {
            if end == k || mask & (1 << (end - 1)) != 0 {
                match coeff.get(&w.slice(start, end)) {
                    Some(a) => prod *= a,
                    None => {
                        prod = BigRational::zero();
                        break;
                    }
                }
                pieces += 1;
                start = end;
            }
        }
        if !prod.is_zero() {
            total += prod * BigRational::from_integer(binom_exact(pieces + m - 1, m - 1));
        }
    }
    total
}

fn criterion_weights(cfg: &SuiteConfig, t: &mut Tally, run: &mut Runner) {
    for i in 0..5 {
        let res = (|| {
            let mut s = Sampler::new(cfg.seed(1, i));
            let f = SymbolSpec::Random { n: 1 + i % 3, degree: 2 }.build(&mut s)?;
            for m in 1..=3 {
                let table = weight_table_exact(&f, m, 6);
                let words = enumerate_words(f.n(), 6);
                let bad = words.iter().filter(|w| table[word_index(f.n(), w)] != brute_force_weight(&f, m, w)).count();
                t.push(Check::at_most("DP vs factorization enumeration, mismatching words", bad as f64, 0.0));
            }
            Ok(())
        })();
        run(format!("random symbol {i}"), res);
    }
    for n in 1..=3 {
        let f = FreeSymbol::linear(n);
        for m in 1..=3 {
            let table = weight_table_exact(&f, m, 6);
            let bad = enumerate_words(n, 6)
                .iter()
                .filter(|w| {
                    let want = BigRational::from_integer(binom_exact(w.len() + m - 1, m - 1));
                    table[word_index(n, w)] != want
                })
                .count();
            t.push(Check::at_most("closed form C(|α|+m−1, m−1), mismatching words", bad as f64, 0.0));
        }
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

fn criterion_kernel(cfg: &SuiteConfig, t: &mut Tally, run: &mut Runner) {
    let opts = KernelOptions::default();
    for i in 0..cfg.count(20) {
        let res = (|| {
            let degree = 1 + i % 2;
            let (n, d, m) = (1 + i % (4 - degree), 2 + i % 3, 1 + (i / 3) % 3);
            let recipe = Recipe::PureNilpotent { symbol: SymbolSpec::Random { n, degree }, d, m };
            let inst = generate_instance(cfg.seed(2, i), &recipe)?;
            let q = CompatibleTuple::from_defect(&inst.symbol, m, &inst.tuple, &eye(d))?;
            // Φ^k(R) = 0 for k ≥ d, and words beyond L enter only from k ≥ ⌈(L+1)/deg⌉.
            let model = build_fock_model(&inst.symbol, m, (degree * d).max(m * degree))?;
            let kernel = build_kernel(&q, &model, None, &opts)?;
            let rep = kernel_identities_check(&kernel, 1e-10);
            t.push(Check::at_most("nilpotent: ‖KA_i* − (W_i*⊗I)K‖", max_of(&rep.intertwining), 1e-10));
            t.push(Check::at_most("nilpotent: ‖K*K − Σ C(k+m−1,m−1)Φ^k(R)‖", rep.gram_residual, 1e-10));
            Ok(())
        })();
        run(format!("nilpotent instance {i}"), res);
    }
    for i in 0..cfg.count(10) {
        let res = (|| {
            let (n, d, m, r, len) = if i % 2 == 0 {
                (1, 2 + i % 3, 1 + (i / 2) % 2, 0.3 + 0.3 * (i as f64 / 10.0), 40)
            } else {
                (2, 2, 1, 0.15 + 0.1 * (i as f64 / 10.0), 10)
            };
            let recipe = Recipe::Strict { symbol: SymbolSpec::Random { n, degree: 1 }, d, m, r_target: r };
            let inst = generate_instance(cfg.seed(2, 100 + i), &recipe)?;
            let sol = solve_operator_equation(&inst.symbol, m, &inst.tuple, &eye(d), &SeriesOptions::default())?;
            let q = CompatibleTuple::from_defect(&inst.symbol, m, &inst.tuple, &sol.x)?;
            let model = build_fock_model(&inst.symbol, m, len)?;
            let kernel = build_kernel(&q, &model, None, &opts)?;
            let rep = kernel_identities_check(&kernel, 1e-6);
            t.push(Check::at_most("strict: intertwining residual", max_of(&rep.intertwining), 1e-6));
            t.push(Check::at_most("strict: Gram residual", rep.gram_residual, 1e-6));
            t.push(Check::at_most("strict: certified intertwining tail", rep.intertwining_bound, 1e-6));
            t.push(Check::at_most("strict: certified Gram tail", rep.gram_bound, 1e-6));
            Ok(())
        })();
        run(format!("strict instance {i}"), res);
    }
}

fn criterion_universal(cfg: &SuiteConfig, t: &mut Tally, run: &mut Runner) {
    for (j, &(n, m, len)) in [(2, 1, 6), (2, 2, 6), (1, 3, 8)].iter().enumerate() {
        let mut s = Sampler::new(cfg.seed(3, j));
        for spec in [SymbolSpec::Linear(n), SymbolSpec::Random { n, degree: 2 }] {
            let res = (|| {
                let f = spec.build(&mut s)?;
                let model = build_fock_model(&f, m, len)?;
                let rep = validate_universal_model(&model, 1e-10);
                t.push(Check::at_most("interior horizon residual", rep.interior_residual, 1e-10));
                t.push(Check::holds("Φ^{L+1}(I) = 0 exactly", rep.nilpotent_exact));
                t.push(Check::holds("model validation", rep.passed));
                Ok(())
            })();
            run(format!("(n, m, L) = ({n}, {m}, {len})"), res);
        }
    }
}

fn tuple_residual(a: &MatrixTuple, y: &CMat, t: &MatrixTuple) -> f64 {
    a.mats().iter().zip(t.mats()).map(|(ai, ti)| op_norm(&(ai * y - y * ti))).fold(0.0, f64::max)
}

fn criterion_isometric(cfg: &SuiteConfig, t: &mut Tally, run: &mut Runner) {
    for i in 0..cfg.count(20) {
        let res = (|| {
            let (n, d) = (1 + i % 3, 2 + (i / 3) % 3);
            let recipe = Recipe::SimilarPair {
                symbol: SymbolSpec::Random { n, degree: 1 + (i / 2) % 2 },
                d,
                m: 1,
                class: TargetClass::Unital,
                cond: 1.5 + 0.5 * (i % 5) as f64,
            };
            let inst = generate_instance(cfg.seed(4, i), &recipe)?;
            let cond = inst.annotation_f64("cond_y").ok_or_else(|| NcError::Precondition("missing cond_y".into()))?;
            let res = isometric_similarity(&inst.symbol, &inst.tuple, None, &LimitOptions::default(), 1e-8)?;
            let phi = PhiMap::new(&inst.symbol, &res.t)?;
            t.push(Check::at_most("‖Φ_{f,T'}(I) − I‖", op_norm(&(phi.apply(&eye(d)) - eye(d))), 1e-8));
            t.push(Check::at_most("similarity residual", tuple_residual(&inst.tuple, &res.y, &res.t), 1e-8));
            t.push(Check::at_least("c − 1/cond(Y)²", res.certificates["c"] - 1.0 / (cond * cond), -1e-8));
            t.push(Check::at_least("cond(Y)² − d", cond * cond - res.certificates["d"], -1e-8));
            Ok(())
        })();
        run(format!("instance {i}"), res);
    }
}

/// (I − S)^m vec X = vec R solved directly on the d²-dimensional space.
pub fn direct_operator_solve(f: &FreeSymbol, m: usize, a: &MatrixTuple, rhs: &CMat) -> Result<CMat> {
    let d = a.dim();
    let s = PhiMap::new(f, a)?.superop();
    let one = CMat::identity(d * d, d * d) - s;
    let mut op = CMat::identity(d * d, d * d);
    for _ in 0..m {
        op = &op * &one;
    }
    let x = op.lu().solve(&vec_of(rhs)).ok_or_else(|| NcError::Precondition("singular linearized operator".into()))?;
    Ok(unvec(&x, d))
}

fn criterion_strict(cfg: &SuiteConfig, t: &mut Tally, run: &mut Runner) {
    for i in 0..cfg.count(20) {
        let res = (|| {
            let (n, d, m) = (1 + i % 3, 2 + (i / 3) % 3, 1 + (i / 2) % 3);
            let r = 0.3 + 0.1 * (i % 5) as f64;
            let recipe = Recipe::Strict { symbol: SymbolSpec::Random { n, degree: 1 + i % 2 }, d, m, r_target: r };
            let inst = generate_instance(cfg.seed(5, i), &recipe)?;
            let (f, a) = (&inst.symbol, &inst.tuple);
            let res = strict_similarity(f, m, a, None, &SeriesOptions::default(), 1e-8)?;
            t.push(Check::at_most("series tail", res.certificates["series_tail"], 1e-12));
            t.push(Check::at_least("min eig (id−Φ_T)^m(I)", res.certificates["defect_min_eig"], f64::MIN_POSITIVE));
            t.push(Check::at_least("conditioning slack", res.certificates["cond_slack"], -1e-8));
            t.push(Check::holds("similarity certificates", res.passed));
            let rhs = Sampler::new(cfg.seed(5, 100 + i)).psd_spectrum(d, 0.1, 1.0);
            let sol = solve_operator_equation(f, m, a, &rhs, &SeriesOptions::default())?;
            let direct = direct_operator_solve(f, m, a, &rhs)?;
            let rel = op_norm(&(&sol.x - &direct)) / op_norm(&direct);
            t.push(Check::at_most("operator equation vs direct solve (relative)", rel, 1e-9));
            Ok(())
        })();
        run(format!("instance {i}"), res);
    }
}

/// A compression instance from the constrained model together with its ideal.
fn variety_instance(seed: u64, i: usize, m: usize, degree: usize, cond: Option<f64>) -> Result<(Instance, usize)> {
    let (n, ideal, level) = match i % 5 {
        0 => (2, IdealSpec::Commuting, 2),
        1 => (3, IdealSpec::Commuting, 1),
        2 => (2, IdealSpec::Free, 2),
        3 => (2, IdealSpec::Monomials(vec![Word::new(vec![0, 1])]), 2),
        _ => (3, IdealSpec::Monomials(vec![Word::new(vec![0, 0]), Word::new(vec![1, 2])]), 1),
    };
    let recipe = Recipe::VarietyMember {
        symbol: SymbolSpec::Random { n, degree },
        m,
        ideal,
        shape: VarietyShape::Compression { level },
        cond,
    };
    Ok((generate_instance(seed, &recipe)?, level))
}

fn criterion_pure_model(cfg: &SuiteConfig, t: &mut Tally, run: &mut Runner) {
    let opts = KernelOptions::default();
    for i in 0..cfg.count(10) {
        let res = (|| {
            let m = 1 + (i / 5) % 2;
            let (inst, level) = variety_instance(cfg.seed(6, i), i, m, 1 + (i / 2) % 2, None)?;
            let (f, a, ideal) = (&inst.symbol, &inst.tuple, &inst.variety);
            let degree = inst.symbol.degree();
            let len = (degree * (level + 1)).max(m * degree);
            let um = unitary_model(f, m, a, Some(ideal), len, &opts, 1e-8)?;
            t.push(Check::at_most("‖K*K − I‖", um.certificates["isometry_residual"], 1e-8));
            t.push(Check::at_most("kernel intertwining", um.certificates["kernel_intertwining"], 1e-8));
            t.push(Check::at_most("model intertwining", max_of(&um.residuals), 1e-8));
            let r0 = Sampler::new(cfg.seed(6, 100 + i)).psd_spectrum(inst.d(), 0.1, 1.0);
            let pm = pure_model_similarity(f, m, a, &r0, Some(ideal), len, &opts, 1e-8)?;
            let bound = (pm.certificates["b"] / pm.certificates["a"]).sqrt();
            t.push(Check::at_least("Q ⪰ 0.1 I (a − 0.1)", pm.certificates["a"] - 0.1, -1e-12));
            t.push(Check::at_most("cond_Y / (√(b/a)(1+1e-6))", pm.cond_y / (bound * (1.0 + 1e-6)), 1.0));
            t.push(Check::at_most("similarity residual", max_of(&pm.residuals), 1e-8));
            Ok(())
        })();
        run(format!("instance {i}"), res);
    }
}

fn random_word(s: &mut Sampler, n: usize, max_len: usize) -> Word {
    let len = s.index(max_len + 1);
    Word::new((0..len).map(|_| s.index(n)).collect())
}

fn criterion_von_neumann(cfg: &SuiteConfig, t: &mut Tally, run: &mut Runner) {
    let instances = cfg.count(20);
    for i in 0..instances {
        let res = (|| {
            let mut s = Sampler::new(cfg.seed(7, 100 + i));
            let m = 1 + (i / 2) % 2;
            let (inst, len, dmat) = if i % 2 == 0 {
                let (inst, level) = variety_instance(cfg.seed(7, i), i / 2, m, 1, Some(1.5 + 0.5 * (i % 3) as f64))?;
                let dmat = inst.extras["D"].clone();
                (inst, level.max(m), dmat)
            } else {
                let d = 2 + (i / 2) % 2;
                let recipe =
                    Recipe::PureNilpotent { symbol: SymbolSpec::Random { n: 1 + (i / 2) % 2, degree: 2 }, d, m };
                let inst = generate_instance(cfg.seed(7, i), &recipe)?;
                let r0 = s.psd_spectrum(d, 0.0, 1.0);
                let dmat = solve_operator_equation(&inst.symbol, m, &inst.tuple, &r0, &SeriesOptions::default())?.x;
                let len = (d - 1).max(m * inst.symbol.degree());
                (inst, len, dmat)
            };
            if !vanishes_beyond(&inst.tuple, len + 1) {
                return Err(NcError::Precondition("instance is not nilpotent at the model length".into()));
            }
            let n = inst.symbol.n();
            let model = build_fock_model(&inst.symbol, m, len)?;
            let var = build_variety_model(&model, &inst.variety, DEFAULT_RANK_TOL)?;
            let samples: Vec<PolySample> = (0..10)
                .map(|_| {
                    let k = 1 + s.index(3);
                    let terms = (0..1 + s.index(4))
                        .map(|_| (random_word(&mut s, n, 2), random_word(&mut s, n, 2), s.gaussian(k, k)))
                        .collect();
                    PolySample { terms }
                })
                .collect();
            let rep = von_neumann_check(&var, &inst.tuple, &dmat, &samples, 1e-8)?;
            for &sl in &rep.slacks {
                t.push(Check::at_least("von Neumann slack", sl, -1e-8));
            }
            Ok(())
        })();
        run(format!("instance {i}"), res);
    }
    for i in 0..cfg.count(10) {
        let res = (|| {
            let d = 2 + i % 4;
            let recipe = Recipe::PureNilpotent { symbol: SymbolSpec::Linear(1), d, m: 1 };
            let inst = generate_instance(cfg.seed(7, 500 + i), &recipe)?;
            let a = inst.tuple.get(0);
            let mut s = Sampler::new(cfg.seed(7, 600 + i));
            let coeffs: Vec<C64> = (0..=d).map(|_| C64::new(s.normal(), s.normal())).collect();
            let r = classical_von_neumann(a, &coeffs)?;
            let order = (1..=d)
                .find(|&k| {
                    let mut p = eye(d);
                    for _ in 0..k {
                        p = &p * a;
                    }
                    op_norm(&p) <= 1e-14
                })
                .unwrap_or(d);
            let shift = CMat::from_fn(order, order, |i, j| if i == j + 1 { c(1.0) } else { c(0.0) });
            let mut p_s = CMat::zeros(order, order);
            let mut pow = eye(order);
            for &ck in &coeffs {
                p_s += &pow * ck;
                pow = &pow * &shift;
            }
            let direct_shift = op_norm(&p_s);
            let scale = 1.0 + direct_shift;
            t.push(Check::at_most("classical: |‖p(S)‖ − direct shift norm|", (r.shift - direct_shift).abs(), 1e-10 * scale));
            t.push(Check::at_least("classical: ‖p(S)‖ − ‖p(A)‖", r.shift - r.direct, -1e-8 * scale));
            t.push(Check::at_least("classical: sup|p| − ‖p(S)‖", r.circle * (1.0 + 1e-6) - r.shift, 0.0));
            Ok(())
        })();
        run(format!("classical case {i}"), res);
    }
}

fn dims_of(inst: &Instance, key: &str) -> Result<Vec<usize>> {
    inst.meta
        .annotations
        .get(key)
        .and_then(|v| v.as_array())
        .map(|a| a.iter().filter_map(|x| x.as_u64()).map(|x| x as usize).collect())
        .ok_or_else(|| NcError::Precondition(format!("missing annotation {key}")))
}

const BLOCK_SHAPES: [(usize, usize, usize, bool); 10] = [
    (2, 2, 2, true),
    (2, 2, 0, true),
    (1, 2, 2, true),
    (0, 2, 2, true),
    (2, 1, 1, false),
    (3, 2, 0, false),
    (2, 2, 2, false),
    (1, 1, 2, true),
    (3, 0, 0, false),
    (0, 3, 0, false),
];

fn criterion_wold(cfg: &SuiteConfig, t: &mut Tally, run: &mut Runner) {
    let opts = WoldOptions::default();
    for i in 0..cfg.count(20) {
        let res = (|| {
            let (d0, dc, dcnc, coupled) = BLOCK_SHAPES[i % BLOCK_SHAPES.len()];
            let symbol = SymbolSpec::Random { n: 2 + (i / 10) % 2, degree: 1 };
            let inst = generate_instance(cfg.seed(8, i), &Recipe::Blocks { symbol, d0, dc, dcnc, coupled })?;
            let (f, a) = (&inst.symbol, &inst.tuple);
            let tris = [
                ("c0c1", triangulate_c0_c1(f, a, None, &opts, 1e-8)?, dims_of(&inst, "dims_c0c1")?),
                ("cccnc", triangulate_cc_cnc(f, a, None, &opts, 1e-8)?, dims_of(&inst, "dims_cccnc")?),
                ("three", triangulate_three_block(f, a, None, &opts, 1e-8)?, dims_of(&inst, "dims_three")?),
            ];
            for (_, tri, want) in &tris {
                t.push(Check::holds("block dimensions exact", tri.block_dims == *want));
                t.push(Check::at_most("zero-block residual", tri.zero_block_residual, 1e-10));
                t.push(Check::at_most("uniqueness angle", max_of(&tri.uniqueness_angles), 1e-8));
                t.push(Check::holds("block certificates", tri.passed).heuristic());
            }
            let pi = partial_isometry_check(f, 1, a, None, &opts, 1e-8)?;
            t.push(Check::holds("partial isometry predicates agree", pi.agree));
            Ok(())
        })();
        run(format!("instance {i}"), res);
    }
}

fn criterion_invariant(cfg: &SuiteConfig, t: &mut Tally, run: &mut Runner) {
    let opts = WoldOptions::default();
    let lim = LimitOptions::default();
    for i in 0..cfg.count(20) {
        let res = (|| {
            let (d0, dc, dcnc, coupled) = BLOCK_SHAPES[i % BLOCK_SHAPES.len()];
            let m = 1 + (i / 3) % 2;
            let symbol = SymbolSpec::Random { n: 2, degree: 1 };
            let inst = generate_instance(cfg.seed(9, i), &Recipe::Blocks { symbol, d0, dc, dcnc, coupled })?;
            let (f, a, d) = (&inst.symbol, &inst.tuple, inst.d());
            let phi = PhiMap::new(f, a)?;
            let delta = hermitize(&(eye(d) - phi.apply(&eye(d))));
            let root = clean_sqrt(&delta)?;
            let v = Sampler::new(cfg.seed(9, 100 + i)).gaussian(d, 1);
            let r0 = hermitize(&(&root * &v * v.adjoint() * &root));
            let dmat = q_limit(f, a, &lim)? + series_limit(&phi, &r0, m, &lim)?;
            let sub = invariant_subspaces_from_solution(f, m, a, &dmat, &opts, 1e-8)?;
            for (name, r) in ["ker D", "ker lim Φ^k(D)", "ker(D − lim Φ^k(D))"].iter().zip(sub.residuals) {
                t.push(Check::at_most(format!("A*-invariance of {name}"), r, 1e-8));
            }
            Ok(())
        })();
        run(format!("instance {i}"), res);
    }
    for i in 0..cfg.count(10) {
        let res = (|| {
            let reducing = i % 2 == 1;
            let (dm, drest) = (1 + i % 2, 1 + (i / 2) % 3);
            let n = if reducing { 1 + (i / 2) % 2 } else { 2 };
            let symbol = SymbolSpec::Random { n, degree: 1 + (i / 3) % 2 };
            let inst = generate_instance(cfg.seed(9, 200 + i), &Recipe::Invariant { symbol, dm, drest, reducing })?;
            let (f, a) = (&inst.symbol, &inst.tuple);
            let basis = orth(&inst.extras["PM"], 1e-8);
            let yes = projection_invariance_criterion(f, a, &basis, 1e-8)?;
            t.push(Check::holds("invariant M: subspace and projection tests agree", yes.agree && yes.invariant));
            t.push(Check::holds("reducing status recovered", yes.reducing == reducing));
            let other = Sampler::new(cfg.seed(9, 300 + i)).gaussian(inst.d(), dm);
            let no = projection_invariance_criterion(f, a, &orth(&other, 1e-12), 1e-8)?;
            t.push(Check::holds("generic subspace: both tests reject", no.agree && !no.invariant));
            Ok(())
        })();
        run(format!("unital instance {i}"), res);
    }
}

fn criterion_radial(cfg: &SuiteConfig, t: &mut Tally, run: &mut Runner) {
    let opts = KernelOptions::default();
    for i in 0..cfg.count(10) {
        let res = (|| {
            let m = 1 + (i / 5) % 2;
            let (inst, level) = variety_instance(cfg.seed(10, i), i, m, 1, Some(1.5 + 0.3 * (i % 4) as f64))?;
            let n = inst.symbol.n();
            let ideal: &VarietyIdeal = &inst.variety;
            let pairs = vec![
                (Word::empty(), Word::empty()),
                (Word::letter(0), Word::letter(n - 1)),
                (Word::letter(1), Word::empty()),
                (Word::new(vec![0, 1]), Word::letter(0)),
            ];
            let input = RadialInput {
                f: &inst.symbol,
                m,
                a: &inst.tuple,
                d: &inst.extras["D"],
                ideal,
                max_len: level.max(m),
                r_grid: &DEFAULT_R_GRID,
                chis: &[],
                ksk_pairs: &pairs,
            };
            let rep = radial_berezin_transform(&input, &opts, 1e-8)?;
            t.push(Check::holds("every grid point evaluated", rep.skipped.is_empty() && rep.points.len() == DEFAULT_R_GRID.len()));
            for p in &rep.points {
                t.push(Check::at_most("‖K_r*K_r − D‖", p.gram_residual, 1e-6));
                t.push(Check::at_most("B_αB_β* transform vs r^{|α|+|β|}A_αDA_β*", max_of(&p.ksk_residuals), 1e-6));
            }
            Ok(())
        })();
        run(format!("instance {i}"), res);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_closed_forms() {
        let f = FreeSymbol::linear(1);
        let w = Word::new(vec![0; 5]);
        assert_eq!(brute_force_weight(&f, 2, &w), BigRational::from_integer(6.into()));
        let g = FreeSymbol::new(1, [(Word::letter(0), 1.0), (Word::new(vec![0, 0]), 1.0)]).unwrap();
        // Compositions of 4 into parts 1 and 2: Fibonacci.
        assert_eq!(brute_force_weight(&g, 1, &Word::new(vec![0; 4])), BigRational::from_integer(5.into()));
    }

    #[test]
    fn direct_solve_matches_scalar_formula() {
        let f = FreeSymbol::linear(1);
        let a = MatrixTuple::new(vec![CMat::from_element(1, 1, c(0.5))]).unwrap();
        let x = direct_operator_solve(&f, 2, &a, &eye(1)).unwrap();
        assert!((x[(0, 0)].re - 1.0 / 0.5625).abs() < 1e-12);
    }

    #[test]
    fn quick_criteria_pass() {
        let cfg = SuiteConfig { seed: 3, quick: true };
        for k in [1, 3, 4, 5] {
            let r = run_criterion(k, &cfg);
            assert!(r.passed, "{}", r.to_text());
        }
    }
}
