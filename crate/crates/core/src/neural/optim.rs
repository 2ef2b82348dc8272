use super::network::QNetwork;

/// Parameter-shaped buffer: per layer (weights, biases).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub(crate) layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &QNetwork) -> Gradients {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
                .collect(),
        }
    }

    pub fn clear(&mut self) {
        for (w, b) in &mut self.layers {
            w.iter_mut().for_each(|x| *x = 0.0);
            b.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    /// Same order as [`QNetwork::params`].
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|(w, b)| w.iter().chain(b))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    pub fn norm(&self) -> f64 {
        self.values().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|g| *g *= factor);
    }
}

/// Adaptive-moment optimizer with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Gradients,
    v: Gradients,
    step: u64,
}

impl Adam {
    pub fn new(net: &QNetwork, learning_rate: f64) -> Adam {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// θ ← θ - lr · m̂ / (√v̂ + ε).
    pub fn apply(&mut self, net: &mut QNetwork, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[l];
            let (mw, mb) = &mut self.m.layers[l];
            let (vw, vb) = &mut self.v.layers[l];
            for (p, g, m, v) in [
                (&mut layer.w, gw, mw, vw),
                (&mut layer.b, gb, mb, vb),
            ] {
                for i in 0..p.len() {
                    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                    p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_each_parameter_by_lr() {
        // with bias correction the first update is lr · sign(g) (up to ε)
        let mut net = QNetwork::zeros(&[2, 2]).unwrap();
        let mut g = Gradients::zeros_like(&net);
        g.layers[0].0 = vec![0.5, -2.0, 0.0, 1e3];
        let mut adam = Adam::new(&net, 0.01);
        adam.apply(&mut net, &g);
        let w = &net.layers[0].w;
        assert!((w[0] + 0.01).abs() < 1e-9);
        assert!((w[1] - 0.01).abs() < 1e-9);
        assert_eq!(w[2], 0.0);
        assert!((w[3] + 0.01).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = QNetwork::zeros(&[3, 2]).unwrap();
        net.layers[0].w[0] = 1.5;
        let before = net.clone();
        let mut adam = Adam::new(&net, 0.1);
        adam.apply(&mut net, &Gradients::zeros_like(&before));
        assert_eq!(net, before);
    }
}
