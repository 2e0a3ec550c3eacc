/// Adam hyperparameters. The default learning rate is the small value used
/// for long minibatch runs; experiment drivers usually override it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for a list of parameter tensors, each seen as a flat slice.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of every tensor in `params`.
    ///
    /// Moments are allocated lazily on the first call; later calls must pass
    /// tensors of the same shapes in the same order.
    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(
            params.len(),
            grads.len(),
            "parameter / gradient count mismatch"
        );
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = grads.iter().map(|g| vec![0.0; g.len()]).collect();
        }
        assert_eq!(
            self.m.len(),
            grads.len(),
            "parameter list changed between updates"
        );
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            assert_eq!(m.len(), g.len(), "tensor {i} changed shape");
            for j in 0..g.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut adam = AdamState::new(AdamConfig {
            lr: 0.1,
            ..Default::default()
        });
        let mut x = [1.0, -2.0];
        adam.update(&mut [&mut x], &[&[3.0, -0.5]]);
        assert!((x[0] - 0.9).abs() < 1e-6);
        assert!((x[1] + 1.9).abs() < 1e-6);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut adam = AdamState::new(AdamConfig {
            lr: 0.05,
            ..Default::default()
        });
        let mut x = [5.0];
        for _ in 0..2000 {
            let g = [2.0 * (x[0] - 1.5)];
            adam.update(&mut [&mut x], &[&g]);
        }
        assert!((x[0] - 1.5).abs() < 1e-3);
    }
}
