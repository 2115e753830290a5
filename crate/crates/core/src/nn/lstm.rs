use super::params::LstmLayerParams;
use super::NnError;
use crate::tensor::{gemm, MatRef, ShapeError, Tensor};

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Hidden state `S` and cell state `L`, both `[batch, units]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub hidden: Tensor,
    pub cell: Tensor,
}

impl LstmState {
    pub fn zeros(batch: usize, units: usize) -> Self {
        Self {
            hidden: Tensor::zeros(&[batch, units]),
            cell: Tensor::zeros(&[batch, units]),
        }
    }
}

/// Gate weights fused column-wise: `w` is `[in, 4u]`, `u` is `[u, 4u]`, `b` is `[4u]`,
/// each row laid out as the f, i, o, g blocks.
#[derive(Debug, Clone)]
pub(crate) struct FusedLstm {
    pub input: usize,
    pub units: usize,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

fn fuse(parts: &[Tensor; 4], rows: usize, units: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * 4 * units];
    for r in 0..rows {
        for (g, t) in parts.iter().enumerate() {
            let dst = r * 4 * units + g * units;
            out[dst..dst + units].copy_from_slice(&t.data()[r * units..(r + 1) * units]);
        }
    }
    out
}

/// Splits a fused `[rows, 4u]` buffer back into four `[rows, u]` blocks.
pub(crate) fn unfuse(fused: &[f64], rows: usize, units: usize) -> [Vec<f64>; 4] {
    std::array::from_fn(|g| {
        let mut out = Vec::with_capacity(rows * units);
        for r in 0..rows {
            let src = r * 4 * units + g * units;
            out.extend_from_slice(&fused[src..src + units]);
        }
        out
    })
}

impl FusedLstm {
    pub fn from_params(p: &LstmLayerParams) -> Result<Self, NnError> {
        let (input, units) = (p.input_size(), p.units());
        for g in 0..4 {
            let expect = [
                (&p.w[g], vec![input, units]),
                (&p.u[g], vec![units, units]),
                (&p.b[g], vec![units]),
            ];
            for (t, shape) in expect {
                if t.shape() != shape.as_slice() {
                    return Err(ShapeError::Incompatible {
                        op: "lstm gate",
                        lhs: shape,
                        rhs: t.shape().to_vec(),
                    }
                    .into());
                }
            }
        }
        Ok(Self {
            input,
            units,
            w: fuse(&p.w, input, units),
            u: fuse(&p.u, units, units),
            b: fuse(&p.b, 1, units),
        })
    }
}

/// Turns fused pre-activations `[batch, 4u]` (bias and input part already added)
/// into gate activations in place, then advances `c` and writes `h`.
fn activate_and_step(
    z: &mut [f64],
    c: &mut [f64],
    h: &mut [f64],
    tanh_c: &mut [f64],
    units: usize,
) {
    let batch = c.len() / units;
    for b in 0..batch {
        let row = &mut z[b * 4 * units..(b + 1) * 4 * units];
        for j in 0..units {
            let f = sigmoid(row[j]);
            let i = sigmoid(row[units + j]);
            let o = sigmoid(row[2 * units + j]);
            let g = row[3 * units + j].tanh();
            row[j] = f;
            row[units + j] = i;
            row[2 * units + j] = o;
            row[3 * units + j] = g;
            let k = b * units + j;
            c[k] = f * c[k] + i * g;
            tanh_c[k] = c[k].tanh();
            h[k] = o * tanh_c[k];
        }
    }
}

/// One time step for a batch: `x` is `[batch, in]`.
pub fn lstm_cell_forward(
    x: &Tensor,
    state: &LstmState,
    params: &LstmLayerParams,
) -> Result<(Tensor, LstmState), NnError> {
    let fused = FusedLstm::from_params(params)?;
    let (input, units) = (fused.input, fused.units);
    let batch = match x.shape() {
        &[b, i] if i == input => b,
        s => {
            return Err(ShapeError::Incompatible {
                op: "lstm_cell_forward input",
                lhs: s.to_vec(),
                rhs: vec![input],
            }
            .into())
        }
    };
    for t in [&state.hidden, &state.cell] {
        if t.shape() != [batch, units] {
            return Err(ShapeError::Incompatible {
                op: "lstm_cell_forward state",
                lhs: t.shape().to_vec(),
                rhs: vec![batch, units],
            }
            .into());
        }
    }
    let mut z: Vec<f64> = (0..batch).flat_map(|_| fused.b.iter().copied()).collect();
    gemm(
        1.0,
        MatRef::new(x.data(), batch, input),
        MatRef::new(&fused.w, input, 4 * units),
        1.0,
        &mut z,
    );
    gemm(
        1.0,
        MatRef::new(state.hidden.data(), batch, units),
        MatRef::new(&fused.u, units, 4 * units),
        1.0,
        &mut z,
    );
    let mut c = state.cell.data().to_vec();
    let mut h = vec![0.0; batch * units];
    let mut tanh_c = vec![0.0; batch * units];
    activate_and_step(&mut z, &mut c, &mut h, &mut tanh_c, units);
    let hidden = Tensor::from_vec(&[batch, units], h).expect("sized");
    let out = LstmState {
        hidden: hidden.clone(),
        cell: Tensor::from_vec(&[batch, units], c).expect("sized"),
    };
    Ok((hidden, out))
}

/// Everything the backward pass needs from a sequence forward pass.
/// Buffers are time-major: index `(t * batch + b) * width + j`.
pub(crate) struct LstmCache {
    pub steps: usize,
    pub batch: usize,
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    mask: Option<Vec<f64>>,
}

/// Runs a layer over a whole sequence from zero state. `x` is time-major
/// `[steps, batch, in]`; returns all hidden states `[steps, batch, u]`.
/// `mask` (`[batch, u]`) multiplies the previous hidden state inside the gates.
pub(crate) fn sequence_forward(
    layer: &FusedLstm,
    x: Vec<f64>,
    steps: usize,
    batch: usize,
    mask: Option<Vec<f64>>,
) -> (Vec<f64>, LstmCache) {
    let (input, u) = (layer.input, layer.units);
    let rows = steps * batch;
    debug_assert_eq!(x.len(), rows * input);
    let mut gates: Vec<f64> = (0..rows).flat_map(|_| layer.b.iter().copied()).collect();
    gemm(
        1.0,
        MatRef::new(&x, rows, input),
        MatRef::new(&layer.w, input, 4 * u),
        1.0,
        &mut gates,
    );
    let mut out = vec![0.0; rows * u];
    let mut h_prev = vec![0.0; rows * u];
    let mut c_prev = vec![0.0; rows * u];
    let mut tanh_c = vec![0.0; rows * u];
    let mut c = vec![0.0; batch * u];
    let bu = batch * u;
    for t in 0..steps {
        if t > 0 {
            let prev = &out[(t - 1) * bu..t * bu];
            let hp = &mut h_prev[t * bu..(t + 1) * bu];
            match &mask {
                Some(m) => hp
                    .iter_mut()
                    .zip(prev)
                    .zip(m)
                    .for_each(|((d, h), m)| *d = h * m),
                None => hp.copy_from_slice(prev),
            }
            gemm(
                1.0,
                MatRef::new(&h_prev[t * bu..(t + 1) * bu], batch, u),
                MatRef::new(&layer.u, u, 4 * u),
                1.0,
                &mut gates[t * batch * 4 * u..(t + 1) * batch * 4 * u],
            );
        }
        c_prev[t * bu..(t + 1) * bu].copy_from_slice(&c);
        activate_and_step(
            &mut gates[t * batch * 4 * u..(t + 1) * batch * 4 * u],
            &mut c,
            &mut out[t * bu..(t + 1) * bu],
            &mut tanh_c[t * bu..(t + 1) * bu],
            u,
        );
    }
    let cache = LstmCache {
        steps,
        batch,
        x,
        h_prev,
        c_prev,
        gates,
        tanh_c,
        mask,
    };
    (out, cache)
}

/// Gradients of one layer, fused like [`FusedLstm`].
pub(crate) struct LstmGrads {
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

/// Backpropagation through time. `d_out` holds the loss gradient for every
/// hidden output; returns parameter gradients and the gradient for the inputs.
pub(crate) fn sequence_backward(
    layer: &FusedLstm,
    cache: &LstmCache,
    d_out: &[f64],
) -> (LstmGrads, Vec<f64>) {
    let (input, u) = (layer.input, layer.units);
    let (steps, batch) = (cache.steps, cache.batch);
    let rows = steps * batch;
    let bu = batch * u;
    let mut dz = vec![0.0; rows * 4 * u];
    let mut dh_next = vec![0.0; bu];
    let mut dc_next = vec![0.0; bu];
    let mut dh_masked = vec![0.0; bu];
    for t in (0..steps).rev() {
        for b in 0..batch {
            let grow = (t * batch + b) * 4 * u;
            for j in 0..u {
                let k = b * u + j;
                let idx = t * bu + k;
                let (f, i, o, g) = (
                    cache.gates[grow + j],
                    cache.gates[grow + u + j],
                    cache.gates[grow + 2 * u + j],
                    cache.gates[grow + 3 * u + j],
                );
                let tc = cache.tanh_c[idx];
                let dh = d_out[idx] + dh_next[k];
                let d_o = dh * tc;
                let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
                let d_f = dc * cache.c_prev[idx];
                let d_i = dc * g;
                let d_g = dc * i;
                dc_next[k] = dc * f;
                dz[grow + j] = d_f * f * (1.0 - f);
                dz[grow + u + j] = d_i * i * (1.0 - i);
                dz[grow + 2 * u + j] = d_o * o * (1.0 - o);
                dz[grow + 3 * u + j] = d_g * (1.0 - g * g);
            }
        }
        if t > 0 {
            gemm(
                1.0,
                MatRef::new(
                    &dz[t * batch * 4 * u..(t + 1) * batch * 4 * u],
                    batch,
                    4 * u,
                ),
                MatRef::new(&layer.u, u, 4 * u).t(),
                0.0,
                &mut dh_masked,
            );
            match &cache.mask {
                Some(m) => dh_next
                    .iter_mut()
                    .zip(&dh_masked)
                    .zip(m)
                    .for_each(|((d, g), m)| *d = g * m),
                None => dh_next.copy_from_slice(&dh_masked),
            }
        }
    }
    let mut w = vec![0.0; input * 4 * u];
    gemm(
        1.0,
        MatRef::new(&cache.x, rows, input).t(),
        MatRef::new(&dz, rows, 4 * u),
        0.0,
        &mut w,
    );
    let mut ug = vec![0.0; u * 4 * u];
    gemm(
        1.0,
        MatRef::new(&cache.h_prev, rows, u).t(),
        MatRef::new(&dz, rows, 4 * u),
        0.0,
        &mut ug,
    );
    let mut b = vec![0.0; 4 * u];
    for row in dz.chunks_exact(4 * u) {
        b.iter_mut().zip(row).for_each(|(a, v)| *a += v);
    }
    let mut dx = vec![0.0; rows * input];
    gemm(
        1.0,
        MatRef::new(&dz, rows, 4 * u),
        MatRef::new(&layer.w, input, 4 * u).t(),
        0.0,
        &mut dx,
    );
    (LstmGrads { w, u: ug, b }, dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar_layer(w: f64, u: f64, b: f64) -> LstmLayerParams {
        let t = |v: f64, shape: &[usize]| Tensor::from_vec(shape, vec![v]).unwrap();
        LstmLayerParams {
            w: std::array::from_fn(|_| t(w, &[1, 1])),
            u: std::array::from_fn(|_| t(u, &[1, 1])),
            b: std::array::from_fn(|_| t(b, &[1])),
            recurrent_dropout: 0.0,
        }
    }

    #[test]
    fn scalar_cell_oracle() {
        let x = Tensor::from_vec(&[1, 1], vec![1.0]).unwrap();
        let (out, state) =
            lstm_cell_forward(&x, &LstmState::zeros(1, 1), &scalar_layer(1.0, 0.0, 0.0)).unwrap();
        let s = 1.0 / (1.0 + (-1.0f64).exp());
        let l = s * 1f64.tanh();
        assert_abs_diff_eq!(s, 0.7311, epsilon = 1e-4);
        assert_abs_diff_eq!(state.cell.data()[0], l, epsilon = 1e-15);
        assert_abs_diff_eq!(state.cell.data()[0], 0.5568, epsilon = 1e-4);
        assert_abs_diff_eq!(out.data()[0], s * l.tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(out.data()[0], 0.369606, epsilon = 1e-6);
    }

    #[test]
    fn zero_parameters() {
        let layer = scalar_layer(0.0, 0.0, 0.0);
        let x = Tensor::from_vec(&[2, 1], vec![3.0, -7.0]).unwrap();
        let (out, _) = lstm_cell_forward(&x, &LstmState::zeros(2, 1), &layer).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0]);
        let state = LstmState {
            hidden: Tensor::from_vec(&[2, 1], vec![0.3, 0.1]).unwrap(),
            cell: Tensor::from_vec(&[2, 1], vec![2.0, -1.0]).unwrap(),
        };
        let (out, next) = lstm_cell_forward(&x, &state, &layer).unwrap();
        assert_eq!(next.cell.data(), &[1.0, -0.5]);
        assert_abs_diff_eq!(out.data()[0], 0.5 * 1f64.tanh(), epsilon = 1e-15);
    }

    #[test]
    fn identical_rows_identical_outputs() {
        let layer = scalar_layer(0.4, -0.3, 0.1);
        let x = Tensor::from_vec(&[2, 1], vec![0.7, 0.7]).unwrap();
        let (out, _) = lstm_cell_forward(&x, &LstmState::zeros(2, 1), &layer).unwrap();
        assert_eq!(out.data()[0], out.data()[1]);
        let bad = Tensor::from_vec(&[2, 2], vec![0.0; 4]).unwrap();
        assert!(lstm_cell_forward(&bad, &LstmState::zeros(2, 1), &layer).is_err());
        assert!(lstm_cell_forward(&x, &LstmState::zeros(3, 1), &layer).is_err());
    }

    #[test]
    fn sequence_matches_stepwise_cell() {
        let mut rng = crate::rng::seeded(5);
        let (input, units, batch, steps) = (3, 4, 2, 5);
        let mk = |rng: &mut crate::rng::Rng, shape: &[usize]| {
            let n = shape.iter().product();
            Tensor::from_vec(
                shape,
                (0..n).map(|_| crate::rng::gauss(rng) * 0.5).collect(),
            )
            .unwrap()
        };
        let p = LstmLayerParams {
            w: std::array::from_fn(|_| mk(&mut rng, &[input, units])),
            u: std::array::from_fn(|_| mk(&mut rng, &[units, units])),
            b: std::array::from_fn(|_| mk(&mut rng, &[units])),
            recurrent_dropout: 0.0,
        };
        let x: Vec<f64> = (0..steps * batch * input)
            .map(|_| crate::rng::gauss(&mut rng))
            .collect();
        let fused = FusedLstm::from_params(&p).unwrap();
        let (seq, _) = sequence_forward(&fused, x.clone(), steps, batch, None);
        let mut state = LstmState::zeros(batch, units);
        for t in 0..steps {
            let xt = Tensor::from_vec(
                &[batch, input],
                x[t * batch * input..(t + 1) * batch * input].to_vec(),
            )
            .unwrap();
            let (h, next) = lstm_cell_forward(&xt, &state, &p).unwrap();
            for (a, b) in h
                .data()
                .iter()
                .zip(&seq[t * batch * units..(t + 1) * batch * units])
            {
                assert_abs_diff_eq!(a, b, epsilon = 1e-14);
            }
            state = next;
        }
        let parts = unfuse(&fused.w, input, units);
        assert_eq!(parts[2], p.w[2].data());
    }
}
