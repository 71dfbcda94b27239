//! Instance JSON: parsing with path-qualified errors and stable emission.

use std::collections::BTreeMap;

use serde_json::{Map, Value};

use crate::cpmap::{MatrixTuple, NcPolynomial, VarietyIdeal};
use crate::error::{NcError, Result};
use crate::linalg::{CMat, C64};
use crate::symbol::{FreeSymbol, Word};

/// Seed, construction tag and free-form ground-truth annotations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Meta {
    pub seed: Option<u64>,
    pub construction: Option<String>,
    pub annotations: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub symbol: FreeSymbol,
    pub m: usize,
    pub tuple: MatrixTuple,
    pub variety: VarietyIdeal,
    pub extras: BTreeMap<String, CMat>,
    pub meta: Meta,
}

impl Instance {
    pub fn new(symbol: FreeSymbol, m: usize, tuple: MatrixTuple) -> Result<Self> {
        let inst = Instance {
            symbol,
            m,
            tuple,
            variety: VarietyIdeal::empty(),
            extras: BTreeMap::new(),
            meta: Meta::default(),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn d(&self) -> usize {
        self.tuple.dim()
    }

    pub fn extra(&self, name: &str) -> Option<&CMat> {
        self.extras.get(name)
    }

    pub fn annotation_f64(&self, name: &str) -> Option<f64> {
        self.meta.annotations.get(name).and_then(Value::as_f64)
    }

    /// Cross-checks every dimension in the instance.
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(NcError::schema("$.m", "must be at least 1"));
        }
        if self.tuple.n() != self.symbol.n() {
            return Err(NcError::schema(
                "$.tuple.n",
                format!("tuple has {} matrices but the symbol has n={}", self.tuple.n(), self.symbol.n()),
            ));
        }
        for (k, p) in self.variety.polys().iter().enumerate() {
            if p.max_letter().is_some_and(|l| l >= self.symbol.n()) {
                return Err(NcError::schema(format!("$.variety[{k}]"), "letter beyond n"));
            }
        }
        let d = self.d();
        for (name, x) in &self.extras {
            if x.nrows() != d || x.ncols() != d {
                return Err(NcError::schema(
                    format!("$.extras.{name}"),
                    format!("expected {d}×{d}, found {}×{}", x.nrows(), x.ncols()),
                ));
            }
        }
        Ok(())
    }
}

struct Obj<'a> {
    path: String,
    map: &'a Map<String, Value>,
    seen: Vec<&'static str>,
}

impl<'a> Obj<'a> {
    fn of(v: &'a Value, path: &str) -> Result<Self> {
        match v {
            Value::Object(map) => Ok(Obj { path: path.to_string(), map, seen: Vec::new() }),
            _ => Err(NcError::schema(path, "expected an object")),
        }
    }

    fn child(&self, key: &str) -> String {
        format!("{}.{key}", self.path)
    }

    fn opt(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn req(&mut self, key: &'static str) -> Result<&'a Value> {
        self.opt(key).ok_or_else(|| NcError::schema(self.child(key), "missing field"))
    }

    fn finish(self) -> Result<()> {
        for k in self.map.keys() {
            if !self.seen.contains(&k.as_str()) {
                return Err(NcError::schema(self.child(k), "unknown field"));
            }
        }
        Ok(())
    }
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| NcError::schema(path, "expected an array"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| NcError::schema(path, "expected a non-negative integer"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(NcError::schema(path, "expected a finite number")),
    }
}

fn parse_complex(v: &Value, path: &str) -> Result<C64> {
    let pair = as_array(v, path)?;
    if pair.len() != 2 {
        return Err(NcError::schema(path, "expected [re, im]"));
    }
    Ok(C64::new(as_f64(&pair[0], &format!("{path}[0]"))?, as_f64(&pair[1], &format!("{path}[1]"))?))
}

fn parse_word(v: &Value, path: &str) -> Result<Word> {
    let letters = as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let p = format!("{path}[{k}]");
            match as_usize(x, &p)? {
                0 => Err(NcError::schema(p, "letters are 1-based")),
                l => Ok(l - 1),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Word::new(letters))
}

/// Parses a square or rectangular matrix given as rows of [re, im] pairs.
pub fn parse_matrix(v: &Value, path: &str) -> Result<CMat> {
    let rows = as_array(v, path)?;
    let nr = rows.len();
    let mut data: Vec<Vec<C64>> = Vec::with_capacity(nr);
    for (i, row) in rows.iter().enumerate() {
        let rp = format!("{path}[{i}]");
        let entries = as_array(row, &rp)?;
        let parsed = entries
            .iter()
            .enumerate()
            .map(|(j, e)| parse_complex(e, &format!("{rp}[{j}]")))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = data.first() {
            if first.len() != parsed.len() {
                return Err(NcError::schema(rp, "ragged row"));
            }
        }
        data.push(parsed);
    }
    let nc = data.first().map_or(0, Vec::len);
    Ok(CMat::from_fn(nr, nc, |i, j| data[i][j]))
}

pub fn parse_symbol(v: &Value) -> Result<FreeSymbol> {
    let mut o = Obj::of(v, "$.symbol")?;
    let n = as_usize(o.req("n")?, "$.symbol.n")?;
    let terms_path = o.child("terms");
    let mut terms = Vec::new();
    for (k, t) in as_array(o.req("terms")?, &terms_path)?.iter().enumerate() {
        let tp = format!("{terms_path}[{k}]");
        let mut to = Obj::of(t, &tp)?;
        let w = parse_word(to.req("word")?, &to.child("word"))?;
        let a = as_f64(to.req("coeff")?, &to.child("coeff"))?;
        to.finish()?;
        terms.push((w, a));
    }
    o.finish()?;
    FreeSymbol::new(n, terms).map_err(|e| NcError::schema("$.symbol", e.to_string()))
}

fn parse_tuple(v: &Value) -> Result<MatrixTuple> {
    let mut o = Obj::of(v, "$.tuple")?;
    let n = as_usize(o.req("n")?, "$.tuple.n")?;
    let d = as_usize(o.req("d")?, "$.tuple.d")?;
    let mats = as_array(o.req("matrices")?, "$.tuple.matrices")?;
    o.finish()?;
    if mats.len() != n {
        return Err(NcError::schema("$.tuple.matrices", format!("expected {n} matrices, found {}", mats.len())));
    }
    let mut out = Vec::with_capacity(n);
    for (k, m) in mats.iter().enumerate() {
        let p = format!("$.tuple.matrices[{k}]");
        let x = parse_matrix(m, &p)?;
        if x.nrows() != d || x.ncols() != d {
            return Err(NcError::schema(p, format!("expected {d}×{d}, found {}×{}", x.nrows(), x.ncols())));
        }
        out.push(x);
    }
    MatrixTuple::new(out).map_err(|e| NcError::schema("$.tuple", e.to_string()))
}

fn parse_variety(v: &Value) -> Result<VarietyIdeal> {
    let mut polys = Vec::new();
    for (k, p) in as_array(v, "$.variety")?.iter().enumerate() {
        let pp = format!("$.variety[{k}]");
        let mut o = Obj::of(p, &pp)?;
        let tp = o.child("terms");
        let mut terms = Vec::new();
        for (j, t) in as_array(o.req("terms")?, &tp)?.iter().enumerate() {
            let ep = format!("{tp}[{j}]");
            let mut to = Obj::of(t, &ep)?;
            let w = parse_word(to.req("word")?, &to.child("word"))?;
            let a = parse_complex(to.req("coeff")?, &to.child("coeff"))?;
            to.finish()?;
            terms.push((w, a));
        }
        o.finish()?;
        polys.push(NcPolynomial::new(terms).map_err(|e| NcError::schema(pp, e.to_string()))?);
    }
    Ok(VarietyIdeal::new(polys))
}

fn parse_meta(v: &Value) -> Result<Meta> {
    let mut o = Obj::of(v, "$.meta")?;
    let seed = o.opt("seed").map(|s| s.as_u64().ok_or_else(|| NcError::schema("$.meta.seed", "expected an integer")));
    let construction = o
        .opt("construction")
        .map(|s| s.as_str().map(str::to_string).ok_or_else(|| NcError::schema("$.meta.construction", "expected a string")));
    let annotations = match o.opt("annotations") {
        None => BTreeMap::new(),
        Some(Value::Object(map)) => map.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        Some(_) => return Err(NcError::schema("$.meta.annotations", "expected an object")),
    };
    o.finish()?;
    Ok(Meta { seed: seed.transpose()?, construction: construction.transpose()?, annotations })
}

pub fn parse_instance_value(v: &Value) -> Result<Instance> {
    let mut o = Obj::of(v, "$")?;
    let symbol = parse_symbol(o.req("symbol")?)?;
    let m = as_usize(o.req("m")?, "$.m")?;
    let tuple = parse_tuple(o.req("tuple")?)?;
    let variety = o.opt("variety").map(parse_variety).transpose()?.unwrap_or_default();
    let mut extras = BTreeMap::new();
    if let Some(e) = o.opt("extras") {
        let map = e.as_object().ok_or_else(|| NcError::schema("$.extras", "expected an object"))?;
        for (k, x) in map {
            extras.insert(k.clone(), parse_matrix(x, &format!("$.extras.{k}"))?);
        }
    }
    let meta = o.opt("meta").map(parse_meta).transpose()?.unwrap_or_default();
    o.finish()?;
    let inst = Instance { symbol, m, tuple, variety, extras, meta };
    inst.validate()?;
    Ok(inst)
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let v: Value = serde_json::from_str(text).map_err(|e| NcError::schema("$", format!("invalid JSON: {e}")))?;
    parse_instance_value(&v)
}

pub fn complex_value(z: C64) -> Value {
    Value::Array(vec![num(z.re), num(z.im)])
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn matrix_value(x: &CMat) -> Value {
    Value::Array((0..x.nrows()).map(|i| Value::Array((0..x.ncols()).map(|j| complex_value(x[(i, j)])).collect())).collect())
}

fn word_value(w: &Word) -> Value {
    Value::Array(w.one_based().into_iter().map(Value::from).collect())
}

pub fn instance_value(inst: &Instance) -> Value {
    let symbol = serde_json::json!({
        "n": inst.symbol.n(),
        "terms": inst.symbol.terms().map(|(w, a)| serde_json::json!({"word": word_value(w), "coeff": num(a)})).collect::<Vec<_>>(),
    });
    let tuple = serde_json::json!({
        "n": inst.tuple.n(),
        "d": inst.tuple.dim(),
        "matrices": inst.tuple.mats().iter().map(matrix_value).collect::<Vec<_>>(),
    });
    let variety: Vec<Value> = inst
        .variety
        .polys()
        .iter()
        .map(|p| {
            let terms: Vec<Value> = p
                .terms()
                .iter()
                .map(|(w, a)| serde_json::json!({"word": word_value(w), "coeff": complex_value(*a)}))
                .collect();
            serde_json::json!({ "terms": terms })
        })
        .collect();
    let extras: Map<String, Value> = inst.extras.iter().map(|(k, x)| (k.clone(), matrix_value(x))).collect();
    let mut meta = Map::new();
    if let Some(s) = inst.meta.seed {
        meta.insert("seed".into(), Value::from(s));
    }
    if let Some(c) = &inst.meta.construction {
        meta.insert("construction".into(), Value::from(c.clone()));
    }
    meta.insert(
        "annotations".into(),
        Value::Object(inst.meta.annotations.iter().map(|(k, v)| (k.clone(), v.clone())).collect()),
    );
    serde_json::json!({
        "symbol": symbol,
        "m": inst.m,
        "tuple": tuple,
        "variety": variety,
        "extras": extras,
        "meta": meta,
    })
}

pub fn emit_instance(inst: &Instance) -> String {
    serde_json::to_string_pretty(&instance_value(inst)).expect("instance values serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn minimal() -> Instance {
        let t = MatrixTuple::new(vec![CMat::from_element(1, 1, c(0.5))]).unwrap();
        Instance::new(FreeSymbol::linear(1), 1, t).unwrap()
    }

    #[test]
    fn minimal_round_trip() {
        let inst = minimal();
        let text = emit_instance(&inst);
        assert_eq!(parse_instance(&text).unwrap(), inst);
        assert_eq!(emit_instance(&parse_instance(&text).unwrap()), text);
    }

    #[test]
    fn full_precision_entries_survive() {
        let x = C64::new(0.1 + 0.2, -1.0 / 3.0);
        let t = MatrixTuple::new(vec![CMat::from_element(1, 1, x)]).unwrap();
        let mut inst = Instance::new(FreeSymbol::linear(1), 2, t).unwrap();
        inst.extras.insert("D".into(), CMat::from_element(1, 1, C64::new(std::f64::consts::PI, 1e-300)));
        inst.meta.seed = Some(9);
        inst.meta.annotations.insert("cond_y".into(), Value::from(1.0 / 7.0));
        let back = parse_instance(&emit_instance(&inst)).unwrap();
        assert_eq!(back.tuple.get(0)[(0, 0)], x);
        assert_eq!(back, inst);
    }

    #[test]
    fn variety_and_weights_round_trip() {
        let f = FreeSymbol::new(2, [(Word::letter(0), 0.5), (Word::letter(1), 2.0), (Word::new(vec![0, 1]), 0.25)]).unwrap();
        let t = MatrixTuple::zeros(2, 2);
        let mut inst = Instance::new(f, 1, t).unwrap();
        inst.variety = VarietyIdeal::commuting(2);
        let text = emit_instance(&inst);
        assert!(text.contains("\"word\": [\n"));
        assert_eq!(parse_instance(&text).unwrap(), inst);
    }

    fn err_path(text: &str) -> String {
        match parse_instance(text) {
            Err(NcError::Schema { path, .. }) => path,
            other => panic!("expected a schema error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_name_their_path() {
        let mut v = instance_value(&minimal());
        v["tuple"]["colour"] = Value::from(1);
        assert_eq!(err_path(&v.to_string()), "$.tuple.colour");
        let mut v = instance_value(&minimal());
        v["extra"] = Value::from(1);
        assert_eq!(err_path(&v.to_string()), "$.extra");
        let mut v = instance_value(&minimal());
        v["meta"]["note"] = Value::from("x");
        assert_eq!(err_path(&v.to_string()), "$.meta.note");
    }

    #[test]
    fn malformed_entries_name_their_path() {
        let mut v = instance_value(&minimal());
        v["tuple"]["matrices"][0][0][0] = serde_json::json!([1.0]);
        assert_eq!(err_path(&v.to_string()), "$.tuple.matrices[0][0][0]");
        let mut v = instance_value(&minimal());
        v["tuple"]["d"] = Value::from(2);
        assert_eq!(err_path(&v.to_string()), "$.tuple.matrices[0]");
        let mut v = instance_value(&minimal());
        v["symbol"]["terms"][0]["word"] = serde_json::json!([0]);
        assert_eq!(err_path(&v.to_string()), "$.symbol.terms[0].word[0]");
        let mut v = instance_value(&minimal());
        v.as_object_mut().unwrap().remove("m");
        assert_eq!(err_path(&v.to_string()), "$.m");
        let mut v = instance_value(&minimal());
        v["extras"]["D"] = serde_json::json!([[[1, 0], [0, 0]]]);
        assert_eq!(err_path(&v.to_string()), "$.extras.D");
        assert_eq!(err_path("{"), "$");
    }
}
