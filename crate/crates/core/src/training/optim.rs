use crate::lgmodel::ParamTensors;

/// Adam over any [`ParamTensors`] value; gradients come in a value of the same type.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    /// Descent step: `params -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step<P: ParamTensors>(&mut self, params: &mut P, grads: &P) {
        let n = params.num_params();
        if self.m.len() != n {
            self.m = vec![0.0; n];
            self.v = vec![0.0; n];
            self.t = 0;
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut k = 0;
        for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
            for (pi, gi) in p.iter_mut().zip(g) {
                self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * gi;
                self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * gi * gi;
                let m_hat = self.m[k] / bc1;
                let v_hat = self.v[k] / bc2;
                *pi -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
                k += 1;
            }
        }
    }
}
