//! Self-describing JSON documents for trained models.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::nn::mlp::Mlp;
use crate::nn::model::{InputNormalization, LpModel, NetPair};

const FORMAT: &str = "lprom-lp-model";
const VERSION: u32 = 1;

/// Prints every value with 17 significant digits.
fn raw_array(values: &[f64]) -> Box<RawValue> {
    let mut s = String::with_capacity(values.len() * 24 + 2);
    s.push('[');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&format!("{v:.16e}"));
    }
    s.push(']');
    RawValue::from_string(s).expect("numeric array is valid JSON")
}

#[derive(Serialize)]
struct LayerOut {
    weights: Box<RawValue>,
    biases: Box<RawValue>,
}

#[derive(Deserialize)]
struct LayerIn {
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MlpDoc<L> {
    layer_dims: Vec<usize>,
    hidden_activation: String,
    output_rule: String,
    layers: Vec<L>,
}

#[derive(Serialize, Deserialize)]
struct PairDoc<L> {
    coeff_net: MlpDoc<L>,
    basis_net: MlpDoc<L>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc<L> {
    format: String,
    version: u32,
    reduced_order: usize,
    input_order: Vec<String>,
    normalization: InputNormalization,
    blocks: Vec<PairDoc<L>>,
}

fn mlp_out(net: &Mlp) -> MlpDoc<LayerOut> {
    MlpDoc {
        layer_dims: net.layer_dims().to_vec(),
        hidden_activation: "tanh".into(),
        output_rule: "softmax_affine".into(),
        layers: (0..net.layer_dims().len() - 1)
            .map(|l| {
                let (w, b) = net.layer(l);
                LayerOut {
                    weights: raw_array(w),
                    biases: raw_array(b),
                }
            })
            .collect(),
    }
}

fn mlp_in(doc: MlpDoc<LayerIn>) -> Result<Mlp> {
    if doc.hidden_activation != "tanh" || doc.output_rule != "softmax_affine" {
        return Err(Error::Format(format!(
            "unsupported activation tags {}/{}",
            doc.hidden_activation, doc.output_rule
        )));
    }
    if doc.layers.len() + 1 != doc.layer_dims.len() {
        return Err(Error::Format("layer count does not match layer_dims".into()));
    }
    let mut params = Vec::new();
    for (l, layer) in doc.layers.into_iter().enumerate() {
        let (i, o) = (doc.layer_dims[l], doc.layer_dims[l + 1]);
        if layer.weights.len() != i * o || layer.biases.len() != o {
            return Err(Error::Format(format!("layer {l} has wrong parameter counts")));
        }
        params.extend(layer.weights);
        params.extend(layer.biases);
    }
    Mlp::from_parts(doc.layer_dims, params)
}

impl LpModel {
    pub fn to_json(&self) -> Result<String> {
        let mut input_order = vec!["x".to_string(), "t".to_string()];
        input_order.extend((0..self.mu_dim()).map(|i| format!("mu{i}")));
        let doc = ModelDoc {
            format: FORMAT.into(),
            version: VERSION,
            reduced_order: self.reduced_order(),
            input_order,
            normalization: self.normalization().clone(),
            blocks: self
                .blocks()
                .iter()
                .map(|p| PairDoc {
                    coeff_net: mlp_out(&p.coeff_net),
                    basis_net: mlp_out(&p.basis_net),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc<LayerIn> = serde_json::from_str(text)?;
        if doc.format != FORMAT || doc.version != VERSION {
            return Err(Error::Format(format!(
                "expected {FORMAT} v{VERSION}, found {} v{}",
                doc.format, doc.version
            )));
        }
        let blocks = doc
            .blocks
            .into_iter()
            .map(|p| {
                Ok(NetPair {
                    coeff_net: mlp_in(p.coeff_net)?,
                    basis_net: mlp_in(p.basis_net)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let model = LpModel::from_blocks(blocks, doc.normalization)?;
        if model.reduced_order() != doc.reduced_order {
            return Err(Error::Format(format!(
                "reduced_order {} disagrees with block widths {}",
                doc.reduced_order,
                model.reduced_order()
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
