use serde::{Deserialize, Serialize};

/// Adam moments for gradient descent on a loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One bias-corrected step against `grad` (the gradient of the loss).
    pub fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut a = Adam::new(2);
        let mut p = vec![1.0, -1.0];
        a.update(&mut p, &[0.5, 0.5], 0.1);
        let snapshot = p.clone();
        let m_before = a.first_moment().to_vec();
        a.update(&mut p, &[0.0, 0.0], 0.1);
        // moments decay but the step direction is still the stale momentum
        assert!((a.first_moment()[0] - 0.9 * m_before[0]).abs() < 1e-15);
        let mut fresh = Adam::new(2);
        let mut q = snapshot.clone();
        fresh.update(&mut q, &[0.0, 0.0], 0.1);
        assert_eq!(q, snapshot);
    }

    #[test]
    fn first_step_has_learning_rate_size() {
        for g in [1e-3, 0.5, 40.0, -7.0] {
            let mut a = Adam::new(1);
            let mut p = vec![0.0];
            a.update(&mut p, &[g], 0.01);
            assert!((p[0].abs() - 0.01).abs() < 1e-6, "{g}: {}", p[0]);
            assert!(p[0] * g < 0.0);
        }
    }

    #[test]
    fn quadratic_bowl() {
        let target = [3.0, -1.5, 0.25];
        let scale = [1.0, 10.0, 0.1];
        let mut a = Adam::new(3);
        let mut p = vec![0.0; 3];
        for t in 0..5000 {
            let g: Vec<f64> = (0..3).map(|i| scale[i] * (p[i] - target[i])).collect();
            let lr = if t < 3000 { 0.05 } else { 0.005 };
            a.update(&mut p, &g, lr);
        }
        for i in 0..3 {
            assert!((p[i] - target[i]).abs() < 1e-6, "{i}: {}", p[i]);
        }
    }
}
