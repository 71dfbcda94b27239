//! Browser bindings: weight tables, domain analysis and Wold decompositions
//! on seeded instances. Every binding takes and returns JSON text.

use ncdomain::cpmap::{domain_membership, joint_spectral_radius, q_limit, LimitOptions};
use ncdomain::harness::{emit_instance, generate_instance, parse_instance, parse_symbol, Recipe, SymbolSpec};
use ncdomain::linalg::eigh;
use ncdomain::symbol::{enumerate_words, weight_table};
use ncdomain::wold::{wold_decompose, WoldOptions};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Longest words shown in a weight table.
const MAX_TABLE_LEN: usize = 6;

fn weights_impl(symbol_json: &str, m: usize, max_len: usize) -> Result<String, String> {
    let v: Value = serde_json::from_str(symbol_json).map_err(|e| e.to_string())?;
    let f = parse_symbol(&v).map_err(|e| e.to_string())?;
    if m == 0 {
        return Err("m must be at least 1".into());
    }
    let len = max_len.min(MAX_TABLE_LEN);
    let table = weight_table(&f, m, len);
    let rows: Vec<Value> = enumerate_words(f.n(), len)
        .iter()
        .map(|w| json!({ "word": w.one_based(), "b": table.get(w) }))
        .collect();
    Ok(json!({ "m": m, "max_len": len, "weights": rows }).to_string())
}

fn generate_impl(recipe: &str, seed: u32, n: usize, d: usize, m: usize) -> Result<String, String> {
    let symbol = SymbolSpec::Linear(n);
    let recipe = match recipe {
        "domain_member" => Recipe::DomainMember { symbol, d, m },
        "pure_nilpotent" => Recipe::PureNilpotent { symbol, d, m },
        "strict" => Recipe::Strict { symbol, d, m, r_target: 0.5 },
        "blocks" => {
            let third = d / 3;
            Recipe::Blocks { symbol, d0: third, dc: (d - third).div_ceil(2), dcnc: (d - third) / 2, coupled: true }
        }
        other => return Err(format!("unknown recipe {other:?}")),
    };
    let inst = generate_instance(u64::from(seed), &recipe).map_err(|e| e.to_string())?;
    Ok(emit_instance(&inst))
}

fn analyze_impl(instance_json: &str) -> Result<String, String> {
    let inst = parse_instance(instance_json).map_err(|e| e.to_string())?;
    let mem = domain_membership(&inst.symbol, inst.m, &inst.tuple, 1e-10).map_err(|e| e.to_string())?;
    let r = joint_spectral_radius(&inst.symbol, &inst.tuple, 1 << 12, 1e-8).map_err(|e| e.to_string())?;
    Ok(json!({
        "d": inst.d(),
        "m": inst.m,
        "member": mem.member,
        "defect_min_eigs": mem.margins,
        "r_f": r.estimate,
        "power_sequence": r.sequence,
    })
    .to_string())
}

fn wold_impl(instance_json: &str) -> Result<String, String> {
    let inst = parse_instance(instance_json).map_err(|e| e.to_string())?;
    let opts = WoldOptions::default();
    let q = q_limit(&inst.symbol, &inst.tuple, &LimitOptions::default()).map_err(|e| e.to_string())?;
    let w = wold_decompose(&inst.symbol, inst.m, &inst.tuple, None, &opts, 1e-8).map_err(|e| e.to_string())?;
    Ok(json!({
        "q_eigenvalues": eigh(&q).0,
        "dims": { "M": w.report.dims[0], "ker_Q": w.report.dims[1], "ker_I_minus_Q": w.report.dims[2] },
        "invariance": w.report.invariance,
        "passed": w.report.passed,
    })
    .to_string())
}

/// b_α for all words up to `max_len` (at most 6), from a symbol in instance JSON form.
#[wasm_bindgen]
pub fn weights(symbol_json: &str, m: usize, max_len: usize) -> Result<String, JsError> {
    weights_impl(symbol_json, m, max_len).map_err(|e| JsError::new(&e))
}

/// Seeded instance for f = X_1 + … + X_n.
#[wasm_bindgen]
pub fn generate(recipe: &str, seed: u32, n: usize, d: usize, m: usize) -> Result<String, JsError> {
    generate_impl(recipe, seed, n, d, m).map_err(|e| JsError::new(&e))
}

/// Domain membership margins and the joint spectral radius.
#[wasm_bindgen]
pub fn analyze(instance_json: &str) -> Result<String, JsError> {
    analyze_impl(instance_json).map_err(|e| JsError::new(&e))
}

/// Dimensions of M, ker Q and ker(I−Q) with the spectrum of Q.
#[wasm_bindgen]
pub fn wold(instance_json: &str) -> Result<String, JsError> {
    wold_impl(instance_json).map_err(|e| JsError::new(&e))
}
