//! JSON model documents.
//!
//! ```json
//! { "type": "product",
//!   "product": { "coordinates": [ {"p": ["1/2","1/2"], "q": ["3/4","1/4"]} ],
//!                "tail": {"family": "bernoulli_perturbation", "base": 0.5, "c": 0.1, "alpha": 1} } }
//! ```
//!
//! Any `"num/den"` string switches a discrete document into exact mode.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use super::{
    AnyModel, GaussianCoordinate, GaussianProductModel, KernelPairModel, KernelStep, MarkovModel,
    Prefix, ProductModel, TailGenerator, TreeModel, Alphabet,
};
use crate::error::{Error, Result};
use crate::number::Number;
use crate::scalar::{Scalar, Surd};

pub fn parse_model(text: &str) -> Result<AnyModel> {
    let v: Value =
        serde_json::from_str(text).map_err(|e| Error::Schema(format!("invalid JSON: {e}")))?;
    parse_model_value(&v)
}

pub fn parse_model_value(doc: &Value) -> Result<AnyModel> {
    let kind = field(doc, "type", "")?
        .as_str()
        .ok_or_else(|| Error::Schema("type: expected a string".into()))?;
    let any = if kind != "gaussian_product" && contains_rational_string(doc) {
        AnyModel::Exact(parse_typed::<Surd>(doc, kind)?)
    } else {
        AnyModel::Float(parse_typed::<f64>(doc, kind)?)
    };
    Ok(any)
}

/// Inverse of [`parse_model`] on validated models.
pub fn serialize_model(model: &AnyModel) -> Value {
    match model {
        AnyModel::Exact(m) => serialize_typed(m),
        AnyModel::Float(m) => serialize_typed(m),
    }
}

fn contains_rational_string(v: &Value) -> bool {
    match v {
        Value::String(s) => s.contains('/'),
        Value::Array(a) => a.iter().any(contains_rational_string),
        Value::Object(o) => o.values().any(contains_rational_string),
        _ => false,
    }
}

fn field<'a>(obj: &'a Value, name: &str, path: &str) -> Result<&'a Value> {
    obj.get(name).ok_or_else(|| {
        Error::Schema(if path.is_empty() {
            format!("missing field {name:?}")
        } else {
            format!("{path}: missing field {name:?}")
        })
    })
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| Error::Schema(format!("{path}: expected an array")))
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::Schema(format!("{path}: expected a nonnegative integer")))
}

fn scalar_vec<S: Scalar>(v: &Value, path: &str) -> Result<Vec<S>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let n = Number::from_json(x, &format!("{path}[{i}]"))?;
            Ok(S::from_rational(n.exact()))
        })
        .collect()
}

fn matrix<S: Scalar>(v: &Value, path: &str) -> Result<Vec<Vec<S>>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, row)| scalar_vec(row, &format!("{path}[{i}]")))
        .collect()
}

fn kernel_step<S: Scalar>(v: &Value, path: &str) -> Result<KernelStep<S>> {
    Ok(KernelStep::new(
        scalar_vec(field(v, "p", path)?, &format!("{path}.p"))?,
        scalar_vec(field(v, "q", path)?, &format!("{path}.q"))?,
    ))
}

fn number(v: &Value, name: &str, path: &str) -> Result<Number> {
    Number::from_json(field(v, name, path)?, &format!("{path}.{name}"))
}

fn tail(v: Option<&Value>, path: &str) -> Result<Option<TailGenerator>> {
    let Some(v) = v else { return Ok(None) };
    if v.is_null() {
        return Ok(None);
    }
    let family = field(v, "family", path)?
        .as_str()
        .ok_or_else(|| Error::Schema(format!("{path}.family: expected a string")))?;
    let t = match family {
        "bernoulli_perturbation" => TailGenerator::BernoulliPerturbation {
            base: number(v, "base", path)?,
            c: number(v, "c", path)?,
            alpha: number(v, "alpha", path)?,
        },
        "mean_gap" => TailGenerator::MeanGap {
            c: number(v, "c", path)?,
            alpha: number(v, "alpha", path)?,
        },
        other => {
            return Err(Error::Schema(format!(
                "{path}.family: unknown tail family {other:?}"
            )))
        }
    };
    Ok(Some(t))
}

fn parse_typed<S: Scalar>(doc: &Value, kind: &str) -> Result<KernelPairModel<S>> {
    let body = field(doc, kind, "")
        .map_err(|_| Error::Schema(format!("missing section {kind:?} for type {kind:?}")))?;
    let model = match kind {
        "product" => {
            let coordinates = match body.get("coordinates") {
                Some(c) => as_array(c, "product.coordinates")?
                    .iter()
                    .enumerate()
                    .map(|(i, c)| kernel_step(c, &format!("product.coordinates[{i}]")))
                    .collect::<Result<Vec<_>>>()?,
                None => Vec::new(),
            };
            KernelPairModel::Product(ProductModel {
                coordinates,
                tail: tail(body.get("tail"), "product.tail")?,
            })
        }
        "markov" => {
            let states = as_usize(field(body, "states", "markov")?, "markov.states")?;
            KernelPairModel::Markov(MarkovModel {
                states,
                p: matrix(field(body, "P", "markov")?, "markov.P")?,
                q: matrix(field(body, "Q", "markov")?, "markov.Q")?,
                init_p: scalar_vec(field(body, "init_p", "markov")?, "markov.init_p")?,
                init_q: scalar_vec(field(body, "init_q", "markov")?, "markov.init_q")?,
            })
        }
        "tree" => {
            let alphabet = Alphabet::new(as_usize(field(body, "alphabet", "tree")?, "tree.alphabet")?)?;
            let depth = as_usize(field(body, "depth", "tree")?, "tree.depth")?;
            let raw = field(body, "kernels", "tree")?
                .as_object()
                .ok_or_else(|| Error::Schema("tree.kernels: expected an object".into()))?;
            let mut kernels = BTreeMap::new();
            for (key, v) in raw {
                let prefix: Prefix = key.parse()?;
                kernels.insert(prefix, kernel_step(v, &format!("tree.kernels[{key}]"))?);
            }
            KernelPairModel::Tree(TreeModel {
                alphabet,
                depth,
                kernels,
            })
        }
        "gaussian_product" => {
            let coordinates = match body.get("coordinates") {
                Some(c) => as_array(c, "gaussian_product.coordinates")?
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        let path = format!("gaussian_product.coordinates[{i}]");
                        Ok(GaussianCoordinate::new(
                            number(c, "mu", &path)?.value(),
                            number(c, "mu_q", &path)?.value(),
                            number(c, "sigma", &path)?.value(),
                            number(c, "sigma_q", &path)?.value(),
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?,
                None => Vec::new(),
            };
            KernelPairModel::GaussianProduct(GaussianProductModel {
                coordinates,
                tail: tail(body.get("tail"), "gaussian_product.tail")?,
            })
        }
        other => return Err(Error::Schema(format!("unknown model type {other:?}"))),
    };
    model.validate()?;
    Ok(model)
}

fn scalar_json<S: Scalar>(x: &S) -> Value {
    if S::EXACT {
        Value::String(x.to_text())
    } else {
        serde_json::Number::from_f64(x.to_f64())
            .map(Value::Number)
            .unwrap_or(Value::Null)
    }
}

fn vec_json<S: Scalar>(v: &[S]) -> Value {
    Value::Array(v.iter().map(scalar_json).collect())
}

fn step_json<S: Scalar>(k: &KernelStep<S>) -> Value {
    json!({ "p": vec_json(&k.p), "q": vec_json(&k.q) })
}

fn tail_json(t: &TailGenerator, exact: bool) -> Value {
    let mut m = Map::new();
    m.insert("family".into(), Value::String(t.family().into()));
    for (name, n) in t.params() {
        m.insert(name.into(), n.to_json(exact));
    }
    Value::Object(m)
}

fn serialize_typed<S: Scalar>(model: &KernelPairModel<S>) -> Value {
    let exact = S::EXACT;
    match model {
        KernelPairModel::Product(p) => {
            let mut body = Map::new();
            body.insert(
                "coordinates".into(),
                Value::Array(p.coordinates.iter().map(step_json).collect()),
            );
            if let Some(t) = &p.tail {
                body.insert("tail".into(), tail_json(t, exact));
            }
            json!({ "type": "product", "product": body })
        }
        KernelPairModel::Markov(m) => json!({
            "type": "markov",
            "markov": {
                "states": m.states,
                "P": m.p.iter().map(|r| vec_json(r)).collect::<Vec<_>>(),
                "Q": m.q.iter().map(|r| vec_json(r)).collect::<Vec<_>>(),
                "init_p": vec_json(&m.init_p),
                "init_q": vec_json(&m.init_q),
            }
        }),
        KernelPairModel::Tree(t) => {
            let kernels: Map<String, Value> = t
                .kernels
                .iter()
                .map(|(k, v)| (k.to_string(), step_json(v)))
                .collect();
            json!({
                "type": "tree",
                "tree": { "alphabet": t.alphabet.size(), "depth": t.depth, "kernels": kernels }
            })
        }
        KernelPairModel::GaussianProduct(g) => {
            let mut body = Map::new();
            body.insert(
                "coordinates".into(),
                Value::Array(
                    g.coordinates
                        .iter()
                        .map(|c| json!({"mu": c.mu, "mu_q": c.mu_q, "sigma": c.sigma, "sigma_q": c.sigma_q}))
                        .collect(),
                ),
            );
            if let Some(t) = &g.tail {
                body.insert("tail".into(), tail_json(t, false));
            }
            json!({ "type": "gaussian_product", "gaussian_product": body })
        }
    }
}
