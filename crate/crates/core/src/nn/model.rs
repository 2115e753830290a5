use rand::Rng as _;

use super::lstm::{sequence_backward, sequence_forward, unfuse, FusedLstm, LstmCache};
use super::params::{Architecture, ModelParams, GATES};
use super::{rmse_loss, NnError};
use crate::rng::{gauss, Rng};
use crate::tensor::{gemm, MatRef, ShapeError, Tensor};

/// Train mode applies input noise and dropout; eval mode is deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted-dropout multipliers: 0 with probability `rate`, else `1 / (1 - rate)`.
pub fn dropout_mask(rng: &mut Rng, len: usize, rate: f64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep
            }
        })
        .collect()
}

fn dims(inputs: &Tensor, arch: &Architecture) -> Result<(usize, usize), NnError> {
    match inputs.shape() {
        &[b, t, f] if f == arch.input_features && t > 0 => Ok((b, t)),
        s => Err(ShapeError::Incompatible {
            op: "model input",
            lhs: s.to_vec(),
            rhs: vec![0, 0, arch.input_features],
        }
        .into()),
    }
}

struct DenseCache {
    /// Input to each dense layer, then the input to the output unit.
    acts: Vec<Vec<f64>>,
}

struct ForwardCache {
    lstm: Vec<LstmCache>,
    drop_mask: Option<Vec<f64>>,
    dense: DenseCache,
}

struct Net<'a> {
    arch: Architecture,
    lstm: Vec<FusedLstm>,
    recurrent_dropout: Vec<f64>,
    dense: Vec<(&'a [f64], &'a [f64])>,
    out_w: &'a [f64],
    out_b: f64,
    noise_sigma: f64,
    dropout: f64,
}

impl<'a> Net<'a> {
    fn new(params: &'a ModelParams) -> Result<Self, NnError> {
        let arch = params.architecture()?;
        let data = |name: &str| params.get(name).expect("layout checked").data();
        let mut lstm = Vec::with_capacity(arch.lstm_layers);
        let mut recurrent_dropout = Vec::with_capacity(arch.lstm_layers);
        for k in 0..arch.lstm_layers {
            let layer = params.lstm_layer(k)?;
            recurrent_dropout.push(layer.recurrent_dropout);
            lstm.push(FusedLstm::from_params(&layer)?);
        }
        let dense = (0..arch.dense_layers)
            .map(|k| (data(&format!("dense.{k}.w")), data(&format!("dense.{k}.b"))))
            .collect();
        Ok(Self {
            arch,
            lstm,
            recurrent_dropout,
            dense,
            out_w: data("output.w"),
            out_b: data("output.b")[0],
            noise_sigma: data("noise.sigma")[0],
            dropout: data("dropout.rate")[0],
        })
    }

    /// Randomness is drawn in a fixed order: input noise, each layer's
    /// recurrent mask, then the dropout mask.
    fn forward(
        &self,
        inputs: &Tensor,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<(Vec<f64>, ForwardCache), NnError> {
        let (batch, steps) = dims(inputs, &self.arch)?;
        let (f, u) = (self.arch.input_features, self.arch.units);
        let train = mode == Mode::Train;
        let mut noisy;
        let src = if train && self.noise_sigma > 0.0 {
            noisy = inputs.data().to_vec();
            noisy
                .iter_mut()
                .for_each(|v| *v += self.noise_sigma * gauss(rng));
            &noisy[..]
        } else {
            inputs.data()
        };
        let mut x = vec![0.0; batch * steps * f];
        for b in 0..batch {
            for t in 0..steps {
                let from = (b * steps + t) * f;
                let to = (t * batch + b) * f;
                x[to..to + f].copy_from_slice(&src[from..from + f]);
            }
        }
        let masks: Vec<Option<Vec<f64>>> = self
            .recurrent_dropout
            .iter()
            .map(|&r| (train && r > 0.0).then(|| dropout_mask(rng, batch * u, r)))
            .collect();
        let drop_mask =
            (train && self.dropout > 0.0).then(|| dropout_mask(rng, batch * u, self.dropout));

        let mut caches = Vec::with_capacity(self.lstm.len());
        for (layer, mask) in self.lstm.iter().zip(masks) {
            let (out, cache) = sequence_forward(layer, x, steps, batch, mask);
            caches.push(cache);
            x = out;
        }
        let mut a = x[(steps - 1) * batch * u..].to_vec();
        if let Some(m) = &drop_mask {
            a.iter_mut().zip(m).for_each(|(v, m)| *v *= m);
        }
        let mut acts = Vec::with_capacity(self.dense.len() + 1);
        for (w, b) in &self.dense {
            let mut next: Vec<f64> = (0..batch).flat_map(|_| b.iter().copied()).collect();
            gemm(
                1.0,
                MatRef::new(&a, batch, u),
                MatRef::new(w, u, u),
                1.0,
                &mut next,
            );
            next.iter_mut().for_each(|v| *v = v.max(0.0));
            acts.push(std::mem::replace(&mut a, next));
        }
        let mut y = vec![self.out_b; batch];
        gemm(
            1.0,
            MatRef::new(&a, batch, u),
            MatRef::new(self.out_w, u, 1),
            1.0,
            &mut y,
        );
        acts.push(a);
        Ok((
            y,
            ForwardCache {
                lstm: caches,
                drop_mask,
                dense: DenseCache { acts },
            },
        ))
    }

    fn backward(&self, cache: &ForwardCache, dy: &[f64], grads: &mut ModelParams) {
        let u = self.arch.units;
        let batch = dy.len();
        let set = |grads: &mut ModelParams, name: &str, values: &[f64]| {
            grads
                .get_mut(name)
                .expect("layout checked")
                .data_mut()
                .copy_from_slice(values);
        };
        let acts = &cache.dense.acts;
        let top = acts.last().expect("output input cached");
        let mut dw = vec![0.0; u];
        gemm(
            1.0,
            MatRef::new(top, batch, u).t(),
            MatRef::new(dy, batch, 1),
            0.0,
            &mut dw,
        );
        set(grads, "output.w", &dw);
        set(grads, "output.b", &[dy.iter().sum::<f64>()]);
        let mut da = vec![0.0; batch * u];
        gemm(
            1.0,
            MatRef::new(dy, batch, 1),
            MatRef::new(self.out_w, u, 1).t(),
            0.0,
            &mut da,
        );

        for k in (0..self.dense.len()).rev() {
            // acts[k + 1] is this layer's ReLU output
            let out = &acts[k + 1];
            da.iter_mut().zip(out).for_each(|(d, o)| {
                if *o <= 0.0 {
                    *d = 0.0;
                }
            });
            let mut dw = vec![0.0; u * u];
            gemm(
                1.0,
                MatRef::new(&acts[k], batch, u).t(),
                MatRef::new(&da, batch, u),
                0.0,
                &mut dw,
            );
            set(grads, &format!("dense.{k}.w"), &dw);
            let mut db = vec![0.0; u];
            for row in da.chunks_exact(u) {
                db.iter_mut().zip(row).for_each(|(a, v)| *a += v);
            }
            set(grads, &format!("dense.{k}.b"), &db);
            let mut prev = vec![0.0; batch * u];
            gemm(
                1.0,
                MatRef::new(&da, batch, u),
                MatRef::new(self.dense[k].0, u, u).t(),
                0.0,
                &mut prev,
            );
            da = prev;
        }
        if let Some(m) = &cache.drop_mask {
            da.iter_mut().zip(m).for_each(|(d, m)| *d *= m);
        }

        let steps = cache.lstm[0].steps;
        let mut d_out = vec![0.0; steps * batch * u];
        d_out[(steps - 1) * batch * u..].copy_from_slice(&da);
        for k in (0..self.lstm.len()).rev() {
            let layer = &self.lstm[k];
            let (g, dx) = sequence_backward(layer, &cache.lstm[k], &d_out);
            for (kind, fused, rows) in [("w", &g.w, layer.input), ("u", &g.u, u), ("b", &g.b, 1)] {
                for (gate, part) in GATES.iter().zip(unfuse(fused, rows, u)) {
                    set(grads, &format!("lstm.{k}.{kind}_{gate}"), &part);
                }
            }
            d_out = dx;
        }
    }
}

/// Predictions `[batch]` for inputs `[batch, steps, features]`.
pub fn model_forward(
    inputs: &Tensor,
    params: &ModelParams,
    mode: Mode,
    rng: &mut Rng,
) -> Result<Vec<f64>, NnError> {
    Ok(Net::new(params)?.forward(inputs, mode, rng)?.0)
}

/// RMSE loss of one batch and its gradient for every parameter. Entries that
/// are not trainable get zero gradient.
pub fn forward_backward(
    inputs: &Tensor,
    targets: &[f64],
    params: &ModelParams,
    mode: Mode,
    rng: &mut Rng,
) -> Result<(f64, ModelParams), NnError> {
    let net = Net::new(params)?;
    let (y, cache) = net.forward(inputs, mode, rng)?;
    let (loss, dy) = rmse_loss(&y, targets)?;
    let mut grads = params.zeros_like();
    net.backward(&cache, &dy, &mut grads);
    Ok((loss, grads))
}

/// Eval-mode predictions in chunks of `chunk` samples.
pub fn predict(inputs: &Tensor, params: &ModelParams, chunk: usize) -> Result<Vec<f64>, NnError> {
    let net = Net::new(params)?;
    let (batch, steps) = dims(inputs, &net.arch)?;
    let width = steps * net.arch.input_features;
    let mut rng = crate::rng::seeded(0);
    let mut out = Vec::with_capacity(batch);
    for start in (0..batch).step_by(chunk.max(1)) {
        let end = (start + chunk.max(1)).min(batch);
        let part = Tensor::from_vec(
            &[end - start, steps, net.arch.input_features],
            inputs.data()[start * width..end * width].to_vec(),
        )?;
        out.extend(net.forward(&part, Mode::Eval, &mut rng)?.0);
    }
    Ok(out)
}


#[cfg(test)]
mod gradient_check {
    use super::*;
    use crate::nn::{init_params, Regularization};
    use crate::rng::seeded;

    /// Worst `|a - n| / max(|a|, |n|, 1e-6)` between analytic and central-difference
    /// gradients over every trainable scalar. The floor keeps rounding noise on
    /// near-zero gradients from dominating.
    fn worst_error(
        arch: Architecture,
        reg: Regularization,
        batch: usize,
        steps: usize,
        seed: u64,
    ) -> f64 {
        let mut rng = seeded(seed);
        let mut p = init_params(&arch, &reg, seed).unwrap();
        // random biases so no gradient is structurally zero
        for (name, t) in p.iter_mut() {
            if ModelParams::is_trainable(name) && t.rank() == 1 {
                t.data_mut()
                    .iter_mut()
                    .for_each(|v| *v += 0.3 * gauss(&mut rng));
            }
        }
        let n = batch * steps * arch.input_features;
        let x = Tensor::from_vec(
            &[batch, steps, arch.input_features],
            (0..n).map(|_| gauss(&mut rng)).collect(),
        )
        .unwrap();
        let y: Vec<f64> = (0..batch).map(|_| 2.0 * gauss(&mut rng)).collect();
        let mode = Mode::Train;
        let loss_at = |p: &ModelParams| {
            forward_backward(&x, &y, p, mode, &mut seeded(99))
                .unwrap()
                .0
        };
        let (_, grads) = forward_backward(&x, &y, &p, mode, &mut seeded(99)).unwrap();
        let h = 1e-5;
        let mut worst = 0.0f64;
        let names: Vec<String> = p.iter().map(|(n, _)| n.to_string()).collect();
        for name in names.iter().filter(|n| ModelParams::is_trainable(n)) {
            for j in 0..p.get(name).unwrap().len() {
                let orig = p.get(name).unwrap().data()[j];
                p.get_mut(name).unwrap().data_mut()[j] = orig + h;
                let up = loss_at(&p);
                p.get_mut(name).unwrap().data_mut()[j] = orig - h;
                let down = loss_at(&p);
                p.get_mut(name).unwrap().data_mut()[j] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.get(name).unwrap().data()[j];
                let scale = analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
        worst
    }

    #[test]
    fn gradients_match_differences() {
        let cases = [
            (
                Architecture {
                    input_features: 3,
                    lstm_layers: 1,
                    dense_layers: 0,
                    units: 4,
                },
                Regularization::none(),
                2,
                3,
            ),
            (
                Architecture {
                    input_features: 2,
                    lstm_layers: 2,
                    dense_layers: 1,
                    units: 5,
                },
                Regularization::none(),
                3,
                4,
            ),
            (
                Architecture {
                    input_features: 4,
                    lstm_layers: 1,
                    dense_layers: 2,
                    units: 8,
                },
                Regularization::none(),
                4,
                5,
            ),
            (
                Architecture {
                    input_features: 3,
                    lstm_layers: 3,
                    dense_layers: 2,
                    units: 3,
                },
                Regularization::none(),
                1,
                5,
            ),
            (
                Architecture {
                    input_features: 5,
                    lstm_layers: 2,
                    dense_layers: 3,
                    units: 6,
                },
                Regularization::none(),
                4,
                2,
            ),
            (
                Architecture {
                    input_features: 2,
                    lstm_layers: 2,
                    dense_layers: 1,
                    units: 4,
                },
                Regularization {
                    noise_sigma: 0.1,
                    dropout: 0.3,
                    recurrent_dropout: 0.3,
                },
                3,
                4,
            ),
        ];
        for (i, (arch, reg, b, t)) in cases.into_iter().enumerate() {
            let rel = worst_error(arch, reg, b, t, i as u64 + 1);
            assert!(rel < 1e-4, "case {i}: {rel:e}");
        }
    }
}
