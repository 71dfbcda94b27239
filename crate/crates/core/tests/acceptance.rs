//! Acceptance gate: the full battery at shipped defaults plus oracles that
//! recompute key quantities without going through the library algorithms.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use ncdomain::berezin::classical_von_neumann;
use ncdomain::cpmap::{MatrixTuple, SeriesOptions};
use ncdomain::fock::build_fock_model;
use ncdomain::harness::{generate_instance, run_criterion, Recipe, Sampler, SuiteConfig, SymbolSpec};
use ncdomain::linalg::{op_norm, CMat, C64};
use ncdomain::similarity::solve_operator_equation;
use ncdomain::symbol::{enumerate_words, weight_table, FreeSymbol, Word};

/// Written straight to stdout so the verdicts show without --nocapture.
fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

#[test]
fn battery() {
    let cfg = SuiteConfig { seed: 7, quick: false };
    let mut failed = Vec::new();
    for k in 1..=10 {
        let r = run_criterion(k, &cfg);
        let evaluations: usize = r.checks.iter().map(|c| c.count).sum();
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        say(&format!("{verdict} {} ({} checks, {evaluations} evaluations)", r.operation, r.checks.len()));
        if !r.passed {
            say(&r.to_text());
            failed.push(k);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}

fn symbol(n: usize, terms: &[(&[usize], f64)]) -> FreeSymbol {
    FreeSymbol::new(n, terms.iter().map(|(w, a)| (Word::new(w.to_vec()), *a))).unwrap()
}

fn symbols() -> Vec<FreeSymbol> {
    vec![
        FreeSymbol::linear(2),
        symbol(1, &[(&[0], 0.5), (&[0, 0], 0.25)]),
        symbol(2, &[(&[0], 0.3), (&[1], 0.2), (&[0, 1], 0.4), (&[1, 1], 0.1)]),
        symbol(3, &[(&[0], 0.2), (&[1], 0.1), (&[2], 0.6), (&[1, 0], 0.05)]),
    ]
}

/// (1 − f)^{-m} = Σ_k C(k+m−1, m−1) f^k expanded as a word polynomial.
fn weights_by_expansion(f: &FreeSymbol, m: usize, max_len: usize) -> BTreeMap<Vec<usize>, f64> {
    let mut total: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut power: BTreeMap<Vec<usize>, f64> = BTreeMap::from([(Vec::new(), 1.0)]);
    for k in 0..=max_len {
        let binom = (1..m).fold(1.0, |acc, j| acc * (k + j) as f64 / j as f64);
        for (w, v) in &power {
            *total.entry(w.clone()).or_default() += binom * v;
        }
        let mut next = BTreeMap::new();
        for (w, v) in &power {
            for (u, a) in f.terms() {
                if w.len() + u.len() <= max_len {
                    let mut x = w.clone();
                    x.extend_from_slice(u.letters());
                    *next.entry(x).or_default() += v * a;
                }
            }
        }
        power = next;
    }
    total
}

#[test]
fn weights_agree_with_generating_function() {
    for f in symbols() {
        for m in 1..=3 {
            let table = weight_table(&f, m, 6);
            let want = weights_by_expansion(&f, m, 6);
            for w in enumerate_words(f.n(), 6) {
                let b = want.get(w.letters()).copied().unwrap_or(0.0);
                let got = table.get(&w);
                assert!((got - b).abs() <= 1e-12 * b.max(1.0), "b_{w:?} (m = {m}): {got} vs {b}");
            }
        }
    }
}

#[test]
fn fock_shifts_agree_with_weight_ratios() {
    for f in symbols() {
        for m in 1..=2 {
            let len = (m * f.degree()).max(4);
            let model = build_fock_model(&f, m, len).unwrap();
            let b = weights_by_expansion(&f, m, len);
            let words = model.words();
            let index: BTreeMap<&[usize], usize> = words.iter().enumerate().map(|(k, w)| (w.letters(), k)).collect();
            for i in 0..f.n() {
                let mut w = CMat::zeros(words.len(), words.len());
                for (src, alpha) in words.iter().enumerate() {
                    if alpha.len() < len {
                        let mut target = vec![i];
                        target.extend_from_slice(alpha.letters());
                        let ratio = b[alpha.letters()] / b[&target];
                        w[(index[target.as_slice()], src)] = C64::new(ratio.sqrt(), 0.0);
                    }
                }
                assert!(op_norm(&(&w - model.w_matrix(i))) < 1e-12);
            }
        }
    }
}

/// Φ(X) = Σ a_α A_α X A_α* written entrywise on column-major vec(X).
fn superoperator(f: &FreeSymbol, a: &MatrixTuple) -> CMat {
    let d = a.dim();
    let mut s = CMat::zeros(d * d, d * d);
    for (w, coef) in f.terms() {
        let aw = w.letters().iter().fold(CMat::identity(d, d), |acc, &i| acc * a.get(i));
        for (p, q, r, t) in index_quads(d) {
            s[(p + d * q, r + d * t)] += aw[(p, r)] * aw[(q, t)].conj() * coef;
        }
    }
    s
}

fn index_quads(d: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..d).flat_map(move |p| (0..d).flat_map(move |q| (0..d).flat_map(move |r| (0..d).map(move |t| (p, q, r, t)))))
}

#[test]
fn operator_equation_agrees_with_linear_solve() {
    for seed in 0..6u64 {
        let (n, d, m) = (1 + seed as usize % 3, 3, 1 + seed as usize % 3);
        let recipe = Recipe::Strict { symbol: SymbolSpec::Random { n, degree: 2 }, d, m, r_target: 0.6 };
        let inst = generate_instance(seed, &recipe).unwrap();
        let rhs = Sampler::new(100 + seed).psd_spectrum(d, 0.1, 1.0);
        let sol = solve_operator_equation(&inst.symbol, m, &inst.tuple, &rhs, &SeriesOptions::default()).unwrap();
        let s = superoperator(&inst.symbol, &inst.tuple);
        let one = CMat::identity(d * d, d * d) - s;
        let op = (0..m).fold(CMat::identity(d * d, d * d), |acc, _| acc * &one);
        let x = op.lu().solve(&DMatrix::from_column_slice(d * d, 1, rhs.as_slice())).unwrap();
        let direct = CMat::from_column_slice(d, d, x.as_slice());
        assert!(op_norm(&(&sol.x - &direct)) <= 1e-9 * op_norm(&direct), "seed {seed}");
    }
}

#[test]
fn classical_bound_uses_the_true_shift_norm() {
    let coeffs = [C64::new(0.3, 0.0), C64::new(-0.5, 0.2), C64::new(0.0, 0.7)];
    let a = CMat::from_fn(4, 4, |i, j| if i == j + 1 { C64::new(0.9, 0.0) } else { C64::new(0.0, 0.0) });
    let rep = classical_von_neumann(&a, &coeffs).unwrap();
    // p(S) for the 4×4 nilpotent shift is the lower triangular Toeplitz matrix of the coefficients.
    let toeplitz = CMat::from_fn(4, 4, |i, j| if i >= j && i - j < coeffs.len() { coeffs[i - j] } else { C64::new(0.0, 0.0) });
    assert!((rep.shift - op_norm(&toeplitz)).abs() < 1e-12);
    let sup = (0..100_000)
        .map(|t| {
            let z = C64::from_polar(1.0, std::f64::consts::TAU * t as f64 / 100_000.0);
            (coeffs[0] + coeffs[1] * z + coeffs[2] * z * z).norm()
        })
        .fold(0.0, f64::max);
    assert!((rep.circle - sup).abs() < 1e-6);
    assert!(rep.direct <= rep.shift + 1e-12 && rep.shift <= rep.circle + 1e-9);
}
