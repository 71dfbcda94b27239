//! Property tests for the structural invariants of each module.

use proptest::prelude::*;

use ncdomain::cpmap::{joint_spectral_radius, q_limit, LimitOptions, MatrixTuple, PhiMap};
use ncdomain::fock::build_fock_model;
use ncdomain::harness::{
    emit_instance, generate_instance, parse_instance, run_criterion, Recipe, Sampler, SuiteConfig, SymbolSpec,
};
use ncdomain::linalg::{block_diag, eye, hermitize, max_eig, min_eig, op_norm, C64};
use ncdomain::symbol::{enumerate_words, weight_table, FreeSymbol, Word};
use ncdomain::wold::{wold_decompose, WoldOptions};

fn random_symbol(seed: u64, n: usize, degree: usize) -> FreeSymbol {
    SymbolSpec::Random { n, degree }.build(&mut Sampler::new(seed)).unwrap()
}

fn domain_member(seed: u64, n: usize, degree: usize, d: usize, m: usize) -> (FreeSymbol, MatrixTuple) {
    let inst = generate_instance(seed, &Recipe::DomainMember { symbol: SymbolSpec::Random { n, degree }, d, m }).unwrap();
    (inst.symbol, inst.tuple)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weights_convolve_over_concatenation(seed in any::<u64>(), n in 1usize..=3, degree in 1usize..=2, m in 2usize..=4) {
        let f = random_symbol(seed, n, degree);
        let (one, prev, cur) = (weight_table(&f, 1, 5), weight_table(&f, m - 1, 5), weight_table(&f, m, 5));
        for w in enumerate_words(n, 5) {
            let conv: f64 = (0..=w.len()).map(|k| prev.get(&w.slice(0, k)) * one.get(&w.slice(k, w.len()))).sum();
            prop_assert!(close(cur.get(&w), conv), "{w:?}: {} vs {conv}", cur.get(&w));
        }
    }

    #[test]
    fn weights_grow_with_coefficients(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=3, bump in 0.01f64..1.0) {
        let f = random_symbol(seed, n, 2);
        let (gamma, a) = f.terms().next().map(|(w, a)| (w.clone(), a)).unwrap();
        let g = FreeSymbol::new(n, f.terms().map(|(w, x)| (w.clone(), if *w == gamma { a + bump } else { x }))).unwrap();
        let (before, after) = (weight_table(&f, m, 5), weight_table(&g, m, 5));
        for w in enumerate_words(n, 5) {
            prop_assert!(after.get(&w) >= before.get(&w) * (1.0 - 1e-14));
        }
    }

    #[test]
    fn phi_is_completely_positive(seed in any::<u64>(), n in 1usize..=3, d in 1usize..=4) {
        let (f, a) = domain_member(seed, n, 2, d, 1);
        let mut s = Sampler::new(seed ^ 1);
        let g = s.gaussian(d, d);
        let x = &g * g.adjoint();
        let phi = PhiMap::new(&f, &a).unwrap();
        prop_assert!(min_eig(&hermitize(&phi.apply(&x))) >= -1e-10 * (1.0 + op_norm(&x)));
        // 2-ampliation: Σ a_α (I₂⊗A_α) X (I₂⊗A_α)* on a positive 2d×2d block matrix.
        let g2 = s.gaussian(2 * d, 2 * d);
        let x2 = &g2 * g2.adjoint();
        let amp = MatrixTuple::new(a.mats().iter().map(|ai| block_diag(&[ai, ai])).collect()).unwrap();
        let y2 = PhiMap::new(&f, &amp).unwrap().apply(&x2);
        prop_assert!(min_eig(&hermitize(&y2)) >= -1e-10 * (1.0 + op_norm(&x2)));
    }

    #[test]
    fn phi_powers_form_a_semigroup(seed in any::<u64>(), j in 0usize..6, k in 0usize..6) {
        let (f, a) = domain_member(seed, 2, 2, 3, 1);
        let phi = PhiMap::new(&f, &a).unwrap();
        let x = Sampler::new(seed ^ 2).gaussian(3, 3);
        let lhs = phi.power(&x, j + k);
        let rhs = phi.power(&phi.power(&x, k), j);
        prop_assert!(op_norm(&(&lhs - &rhs)) <= 1e-12 * (1.0 + op_norm(&x)));
    }

    #[test]
    fn defect_expansion_matches_iteration(seed in any::<u64>(), s in 0usize..=4) {
        let (f, a) = domain_member(seed, 2, 2, 3, 2);
        let phi = PhiMap::new(&f, &a).unwrap();
        let x = Sampler::new(seed ^ 3).gaussian(3, 3);
        let iterated = (0..s).fold(x.clone(), |y, _| &y - phi.apply(&y));
        let expanded = phi.defect(&x, s);
        prop_assert!(op_norm(&(&iterated - &expanded)) <= 1e-12 * (1.0 + op_norm(&iterated)));
    }

    #[test]
    fn q_limit_is_a_fixed_point_between_zero_and_one(seed in any::<u64>(), n in 1usize..=3, d in 1usize..=4, m in 1usize..=2) {
        let (f, a) = domain_member(seed, n, 2, d, m);
        let q = q_limit(&f, &a, &LimitOptions::default()).unwrap();
        let phi = PhiMap::new(&f, &a).unwrap();
        prop_assert!(op_norm(&(phi.apply(&q) - &q)) <= 1e-8);
        prop_assert!(min_eig(&q) >= -1e-10 && max_eig(&q) <= 1.0 + 1e-10);
    }

    #[test]
    fn radius_is_below_the_first_term_bound(seed in any::<u64>(), n in 1usize..=3, d in 1usize..=4) {
        let (f, a) = domain_member(seed, n, 2, d, 1);
        let r = joint_spectral_radius(&f, &a, 1 << 10, 1e-8).unwrap();
        let bound = op_norm(&PhiMap::new(&f, &a).unwrap().apply(&eye(d))).sqrt();
        prop_assert!(r.estimate <= bound + 1e-8, "{} vs {bound}", r.estimate);
    }

    #[test]
    fn creation_operators_telescope_weights(seed in any::<u64>(), n in 1usize..=2, m in 1usize..=2, pick in any::<u64>()) {
        let f = random_symbol(seed, n, 2);
        let len = 4.max(m * f.degree());
        let model = build_fock_model(&f, m, len).unwrap();
        let words = model.words();
        let beta = &words[1 + (pick % (words.len() as u64 - 1)) as usize];
        let gamma = &words[((pick >> 20) % words.len() as u64) as usize];
        prop_assume!(beta.len() + gamma.len() <= len);
        let wb = beta.letters().iter().fold(eye(words.len()), |acc, &i| acc * model.w_matrix(i));
        let bg = beta.concat(gamma);
        let (src, dst) = (words.iter().position(|w| w == gamma).unwrap(), words.iter().position(|w| *w == bg).unwrap());
        let want = (model.weights().get(gamma) / model.weights().get(&bg)).sqrt();
        prop_assert!((wb[(dst, src)] - C64::new(want, 0.0)).norm() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn wold_dimensions_add_up(seed in any::<u64>(), d0 in 0usize..=2, dc in 1usize..=2, dcnc in 0usize..=2) {
        let inst = generate_instance(seed, &Recipe::Blocks { symbol: SymbolSpec::Random { n: 2, degree: 1 }, d0, dc, dcnc, coupled: true }).unwrap();
        let w = wold_decompose(&inst.symbol, 1, &inst.tuple, None, &WoldOptions::default(), 1e-8).unwrap();
        prop_assert_eq!(w.m_space.dim + w.ker_q.dim + w.ker_i_minus_q.dim, inst.d());
    }

    #[test]
    fn instances_survive_a_json_round_trip(seed in any::<u64>(), n in 1usize..=3, d in 1usize..=3, m in 1usize..=2) {
        let inst = generate_instance(seed, &Recipe::DomainMember { symbol: SymbolSpec::Random { n, degree: 2 }, d, m }).unwrap();
        let text = emit_instance(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(emit_instance(&back), text);
    }
}

#[test]
fn reports_are_deterministic() {
    let cfg = SuiteConfig { seed: 11, quick: true };
    for k in [2, 5, 9] {
        assert_eq!(run_criterion(k, &cfg).to_json(), run_criterion(k, &cfg).to_json());
    }
}

#[test]
fn model_tuple_sits_in_the_domain() {
    let f = FreeSymbol::new(2, [(Word::letter(0), 0.7), (Word::letter(1), 1.2), (Word::new(vec![1, 0]), 0.3)]).unwrap();
    for m in 1..=3 {
        let model = build_fock_model(&f, m, 2 * m + 2).unwrap();
        let phi = PhiMap::new(&f, &model.w_tuple()).unwrap();
        let d = model.dim();
        for s in 1..=m {
            assert!(min_eig(&phi.defect(&eye(d), s)) >= -1e-10, "m = {m}, s = {s}");
        }
    }
}

#[test]
fn limit_survives_an_eigenvalue_just_above_one() {
    // Roundoff puts a superoperator eigenvalue a few ulps above 1 here.
    let recipe = Recipe::Blocks { symbol: SymbolSpec::Random { n: 2, degree: 1 }, d0: 0, dc: 1, dcnc: 2, coupled: true };
    let inst = generate_instance(6459991253847571848, &recipe).unwrap();
    let w = wold_decompose(&inst.symbol, 1, &inst.tuple, None, &WoldOptions::default(), 1e-8).unwrap();
    assert_eq!(w.report.dims, [2, 0, 1]);
    assert!(w.report.passed);
}
