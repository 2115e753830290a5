use rand::Rng as _;

use super::NnError;
use crate::rng::seeded;
use crate::tensor::Tensor;

/// Gate order used in parameter names and in the fused gate matrices.
pub const GATES: [&str; 4] = ["f", "i", "o", "g"];

/// Layer sizes of the stack: noise, `lstm_layers` LSTMs, dropout, `dense_layers`
/// ReLU layers, one linear output unit. Every hidden layer has `units` units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub input_features: usize,
    pub lstm_layers: usize,
    pub dense_layers: usize,
    pub units: usize,
}

impl Architecture {
    pub fn new(input_features: usize) -> Self {
        Self {
            input_features,
            lstm_layers: 4,
            dense_layers: 4,
            units: 64,
        }
    }

    /// Names and shapes of every entry, in canonical order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let u = self.units;
        let mut out = vec![("noise.sigma".to_string(), vec![1])];
        for k in 0..self.lstm_layers {
            let input = if k == 0 { self.input_features } else { u };
            for g in GATES {
                out.push((format!("lstm.{k}.w_{g}"), vec![input, u]));
            }
            for g in GATES {
                out.push((format!("lstm.{k}.u_{g}"), vec![u, u]));
            }
            for g in GATES {
                out.push((format!("lstm.{k}.b_{g}"), vec![u]));
            }
            out.push((format!("lstm.{k}.recurrent_dropout"), vec![1]));
        }
        out.push(("dropout.rate".to_string(), vec![1]));
        for k in 0..self.dense_layers {
            out.push((format!("dense.{k}.w"), vec![u, u]));
            out.push((format!("dense.{k}.b"), vec![u]));
        }
        out.push(("output.w".to_string(), vec![u, 1]));
        out.push(("output.b".to_string(), vec![1]));
        out
    }

    fn validate(&self) -> Result<(), NnError> {
        if self.input_features == 0 || self.units == 0 || self.lstm_layers == 0 {
            return Err(NnError::BadConfig(format!(
                "architecture needs positive sizes and at least one LSTM layer: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Noise and dropout settings. They travel with the weights as non-trainable entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularization {
    pub noise_sigma: f64,
    pub dropout: f64,
    pub recurrent_dropout: f64,
}

impl Default for Regularization {
    fn default() -> Self {
        Self {
            noise_sigma: 0.01,
            dropout: 0.1,
            recurrent_dropout: 0.2,
        }
    }
}

impl Regularization {
    pub fn none() -> Self {
        Self {
            noise_sigma: 0.0,
            dropout: 0.0,
            recurrent_dropout: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(NnError::BadConfig(format!(
                "noise sigma {}",
                self.noise_sigma
            )));
        }
        for (name, r) in [
            ("dropout", self.dropout),
            ("recurrent dropout", self.recurrent_dropout),
        ] {
            if !(0.0..1.0).contains(&r) {
                return Err(NnError::BadConfig(format!(
                    "{name} rate {r} outside [0, 1)"
                )));
            }
        }
        Ok(())
    }
}

/// Named tensors in a fixed order shared by every copy of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    entries: Vec<(String, Tensor)>,
}

impl ModelParams {
    /// Wraps entries as-is. Names must be unique.
    pub fn new(entries: Vec<(String, Tensor)>) -> Result<Self, NnError> {
        let mut seen = std::collections::HashSet::new();
        for (name, _) in &entries {
            if !seen.insert(name.as_str()) {
                return Err(NnError::Layout(format!("duplicate parameter {name:?}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    fn require(&self, name: &str) -> Result<&Tensor, NnError> {
        self.get(name)
            .ok_or_else(|| NnError::MissingParam(name.to_string()))
    }

    /// Same names and shapes in the same order.
    pub fn same_layout(&self, other: &ModelParams) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((a, x), (b, y))| a == b && x.shape() == y.shape())
    }

    /// A zero-filled copy with the same layout.
    pub fn zeros_like(&self) -> ModelParams {
        ModelParams {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), Tensor::zeros(t.shape())))
                .collect(),
        }
    }

    /// Total number of scalars.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Config entries (noise, dropout rates) are carried but never optimized.
    pub fn is_trainable(name: &str) -> bool {
        !(name == "noise.sigma" || name == "dropout.rate" || name.ends_with(".recurrent_dropout"))
    }

    /// Recovers the architecture from names and shapes, checking the full layout.
    pub fn architecture(&self) -> Result<Architecture, NnError> {
        let first = self.require("lstm.0.w_f")?;
        let (input_features, units) = match first.shape() {
            &[i, u] => (i, u),
            s => return Err(NnError::Layout(format!("lstm.0.w_f has shape {s:?}"))),
        };
        let lstm_layers = (0..)
            .take_while(|k| self.get(&format!("lstm.{k}.w_f")).is_some())
            .count();
        let dense_layers = (0..)
            .take_while(|k| self.get(&format!("dense.{k}.w")).is_some())
            .count();
        let arch = Architecture {
            input_features,
            lstm_layers,
            dense_layers,
            units,
        };
        let layout = arch.layout();
        if layout.len() != self.entries.len() {
            return Err(NnError::Layout(format!(
                "expected {} entries for {arch:?}, found {}",
                layout.len(),
                self.entries.len()
            )));
        }
        for ((want_name, want_shape), (name, t)) in layout.iter().zip(&self.entries) {
            if want_name != name || want_shape.as_slice() != t.shape() {
                return Err(NnError::Layout(format!(
                    "expected {want_name} {want_shape:?}, found {name} {:?}",
                    t.shape()
                )));
            }
        }
        Ok(arch)
    }

    pub fn regularization(&self) -> Result<Regularization, NnError> {
        let scalar = |name: &str| self.require(name).map(|t| t.data()[0]);
        Ok(Regularization {
            noise_sigma: scalar("noise.sigma")?,
            dropout: scalar("dropout.rate")?,
            recurrent_dropout: scalar("lstm.0.recurrent_dropout")?,
        })
    }

    pub fn set_regularization(&mut self, reg: &Regularization) {
        for (name, t) in self.iter_mut() {
            if name == "noise.sigma" {
                t.fill(reg.noise_sigma);
            } else if name == "dropout.rate" {
                t.fill(reg.dropout);
            } else if name.ends_with(".recurrent_dropout") {
                t.fill(reg.recurrent_dropout);
            }
        }
    }

    /// Weights of one LSTM layer.
    pub fn lstm_layer(&self, k: usize) -> Result<LstmLayerParams, NnError> {
        let get = |kind: &str, g: &str| self.require(&format!("lstm.{k}.{kind}_{g}")).cloned();
        Ok(LstmLayerParams {
            w: [
                get("w", "f")?,
                get("w", "i")?,
                get("w", "o")?,
                get("w", "g")?,
            ],
            u: [
                get("u", "f")?,
                get("u", "i")?,
                get("u", "o")?,
                get("u", "g")?,
            ],
            b: [
                get("b", "f")?,
                get("b", "i")?,
                get("b", "o")?,
                get("b", "g")?,
            ],
            recurrent_dropout: self.require(&format!("lstm.{k}.recurrent_dropout"))?.data()[0],
        })
    }
}

/// Per-gate weights of one LSTM layer, gates in [`GATES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    /// Input weights `[in, units]`.
    pub w: [Tensor; 4],
    /// Recurrent weights `[units, units]`.
    pub u: [Tensor; 4],
    /// Biases `[units]`.
    pub b: [Tensor; 4],
    pub recurrent_dropout: f64,
}

impl LstmLayerParams {
    pub fn input_size(&self) -> usize {
        self.w[0].shape()[0]
    }

    pub fn units(&self) -> usize {
        self.w[0].shape()[1]
    }
}

fn glorot(rng: &mut crate::rng::Rng, fan_in: usize, fan_out: usize, len: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..len).map(|_| rng.random_range(-limit..limit)).collect()
}

/// Glorot-uniform weights, zero biases except forget-gate biases of 1.
pub fn init_params(
    arch: &Architecture,
    reg: &Regularization,
    seed: u64,
) -> Result<ModelParams, NnError> {
    arch.validate()?;
    reg.validate()?;
    let mut rng = seeded(seed);
    let entries = arch
        .layout()
        .into_iter()
        .map(|(name, shape)| {
            let len: usize = shape.iter().product();
            let data = if name.ends_with(".b_f") {
                vec![1.0; len]
            } else if shape.len() == 2 {
                glorot(&mut rng, shape[0], shape[1], len)
            } else {
                vec![0.0; len]
            };
            (name, Tensor::from_vec(&shape, data).expect("layout shapes"))
        })
        .collect();
    let mut params = ModelParams { entries };
    params.set_regularization(reg);
    Ok(params)
}
