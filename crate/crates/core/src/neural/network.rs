use rand::Rng;

use super::optim::Gradients;
use super::NeuralError;

/// One input vector: dense values, or the indices of the features that are 1.
#[derive(Debug, Clone, Copy)]
pub enum Input<'a> {
    Dense(&'a [f64]),
    Binary(&'a [u32]),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    pub(crate) inputs: usize,
    pub(crate) outputs: usize,
    /// `w[i * outputs + j]` connects input i to output j.
    pub(crate) w: Vec<f64>,
    pub(crate) b: Vec<f64>,
}

impl Layer {
    fn forward_dense(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.b);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.w[i * self.outputs..(i + 1) * self.outputs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }

    fn forward_binary(&self, active: &[u32], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.b);
        for &i in active {
            let i = i as usize;
            let row = &self.w[i * self.outputs..(i + 1) * self.outputs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w;
            }
        }
    }
}

/// Multi-layer perceptron mapping an observation to one value per action.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub(crate) layers: Vec<Layer>,
}

/// Per-layer post-activation outputs of one forward pass; the last entry is
/// the Q-vector.
pub(crate) struct Activations {
    pub(crate) outputs: Vec<Vec<f64>>,
}

impl QNetwork {
    /// Weights and biases drawn from U(-1/√fan_in, 1/√fan_in).
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<QNetwork, NeuralError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NeuralError::BadArchitecture(sizes.to_vec()));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let bound = 1.0 / (inputs as f64).sqrt();
                Layer {
                    inputs,
                    outputs,
                    w: (0..inputs * outputs).map(|_| rng.gen_range(-bound..bound)).collect(),
                    b: (0..outputs).map(|_| rng.gen_range(-bound..bound)).collect(),
                }
            })
            .collect();
        Ok(QNetwork { layers })
    }

    /// A network whose parameters are all zero.
    pub fn zeros(sizes: &[usize]) -> Result<QNetwork, NeuralError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NeuralError::BadArchitecture(sizes.to_vec()));
        }
        let layers = sizes
            .windows(2)
            .map(|w| Layer {
                inputs: w[0],
                outputs: w[1],
                w: vec![0.0; w[0] * w[1]],
                b: vec![0.0; w[1]],
            })
            .collect();
        Ok(QNetwork { layers })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// All parameters, layer by layer (weights then biases).
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(&l.b))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    /// Sets every parameter of the output layer to zero.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().unwrap();
        last.w.iter_mut().for_each(|w| *w = 0.0);
        last.b.iter_mut().for_each(|b| *b = 0.0);
    }

    pub fn all_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    pub(crate) fn check_input(&self, input: Input) -> Result<(), NeuralError> {
        let size = self.input_dim();
        match input {
            Input::Dense(x) if x.len() != size => Err(NeuralError::DimensionMismatch {
                expected: size,
                found: x.len(),
            }),
            Input::Binary(idx) => match idx.iter().find(|&&i| i as usize >= size) {
                Some(&index) => Err(NeuralError::FeatureOutOfRange { index, size }),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    pub fn forward(&self, input: Input) -> Result<Vec<f64>, NeuralError> {
        self.check_input(input)?;
        Ok(self.activations(input).outputs.pop().unwrap())
    }

    pub fn forward_batch(&self, inputs: &[Input]) -> Result<Vec<Vec<f64>>, NeuralError> {
        inputs.iter().map(|x| self.forward(*x)).collect()
    }

    /// Forward pass keeping every layer's output; input must already be checked.
    pub(crate) fn activations(&self, input: Input) -> Activations {
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            match (l, input) {
                (0, Input::Dense(x)) => layer.forward_dense(x, &mut out),
                (0, Input::Binary(idx)) => layer.forward_binary(idx, &mut out),
                _ => layer.forward_dense(&outputs[l - 1], &mut out),
            }
            if l != last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            outputs.push(out);
        }
        Activations { outputs }
    }

    /// Adds dL/dθ to `grads`, given the forward cache and dL/dQ.
    pub(crate) fn backward(&self, input: Input, acts: &Activations, d_out: &[f64], grads: &mut Gradients) {
        let mut delta = d_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let (gw, gb) = &mut grads.layers[l];
            for (g, d) in gb.iter_mut().zip(&delta) {
                *g += d;
            }
            if l == 0 {
                match input {
                    Input::Dense(x) => accumulate_outer(x, &delta, gw, layer.outputs),
                    Input::Binary(idx) => {
                        for &i in idx {
                            let row = &mut gw[i as usize * layer.outputs..(i as usize + 1) * layer.outputs];
                            for (g, d) in row.iter_mut().zip(&delta) {
                                *g += d;
                            }
                        }
                    }
                }
                break;
            }
            let x = &acts.outputs[l - 1];
            accumulate_outer(x, &delta, gw, layer.outputs);
            // propagate through the weights and the previous ReLU
            let mut prev = vec![0.0; layer.inputs];
            for (i, p) in prev.iter_mut().enumerate() {
                if x[i] <= 0.0 {
                    continue;
                }
                let row = &layer.w[i * layer.outputs..(i + 1) * layer.outputs];
                *p = row.iter().zip(&delta).map(|(w, d)| w * d).sum();
            }
            delta = prev;
        }
    }

    /// Copies every parameter of `source` into `self`.
    pub fn copy_from(&mut self, source: &QNetwork) -> Result<(), NeuralError> {
        if self.sizes() != source.sizes() {
            return Err(NeuralError::ArchitectureMismatch {
                left: self.sizes(),
                right: source.sizes(),
            });
        }
        self.layers.clone_from(&source.layers);
        Ok(())
    }
}

fn accumulate_outer(x: &[f64], delta: &[f64], gw: &mut [f64], outputs: usize) {
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &mut gw[i * outputs..(i + 1) * outputs];
        for (g, d) in row.iter_mut().zip(delta) {
            *g += xi * d;
        }
    }
}

/// Online network weights copied into the target network.
pub fn sync_target(net: &QNetwork, target: &mut QNetwork) -> Result<(), NeuralError> {
    target.copy_from(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hand_set() -> QNetwork {
        // 2-2-2: hidden = relu(W1ᵀx + b1), out = W2ᵀh + b2
        QNetwork {
            layers: vec![
                Layer {
                    inputs: 2,
                    outputs: 2,
                    w: vec![0.5, -1.0, 2.0, 0.25],
                    b: vec![0.1, 0.2],
                },
                Layer {
                    inputs: 2,
                    outputs: 2,
                    w: vec![1.0, 2.0, -3.0, 0.5],
                    b: vec![0.0, -0.5],
                },
            ],
        }
    }

    #[test]
    fn hand_computed_forward() {
        let net = hand_set();
        // x=(1,0): z1 = (0.5+0.1, -1.0+0.2) = (0.6, -0.8) -> h = (0.6, 0)
        // out = (0.6*1 + 0, 0.6*2 - 0.5) = (0.6, 0.7)
        let q = net.forward(Input::Dense(&[1.0, 0.0])).unwrap();
        assert!((q[0] - 0.6).abs() < 1e-15 && (q[1] - 0.7).abs() < 1e-15, "{q:?}");
        assert_eq!(net.forward(Input::Binary(&[0])).unwrap(), q);
    }

    #[test]
    fn zero_output_layer_gives_zero_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = QNetwork::new(&[10, 8, 3], &mut rng).unwrap();
        net.zero_output_layer();
        assert_eq!(net.forward(Input::Binary(&[1, 4, 9])).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn dimension_errors() {
        let net = hand_set();
        assert!(matches!(
            net.forward(Input::Dense(&[1.0])),
            Err(NeuralError::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(matches!(
            net.forward(Input::Binary(&[2])),
            Err(NeuralError::FeatureOutOfRange { .. })
        ));
        assert!(QNetwork::new(&[3], &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn identical_inputs_identical_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = QNetwork::new(&[4, 5, 2], &mut rng).unwrap();
        let x = [0.3, -0.2, 1.0, 0.0];
        let rows = net.forward_batch(&[Input::Dense(&x), Input::Dense(&x)]).unwrap();
        assert_eq!(rows[0], rows[1]);
    }

    #[test]
    fn sync_copies_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = QNetwork::new(&[4, 6, 2], &mut rng).unwrap();
        let mut target = QNetwork::new(&[4, 6, 2], &mut rng).unwrap();
        sync_target(&net, &mut target).unwrap();
        assert_eq!(net, target);
        sync_target(&net, &mut target).unwrap();
        assert_eq!(net, target);
        let mut other = QNetwork::new(&[4, 5, 2], &mut rng).unwrap();
        assert!(sync_target(&net, &mut other).is_err());
    }
}
