//! Adaptive-moment gradient descent state, shared by the pulse optimizer and
//! network training.

/// First/second-moment accumulator. Callers apply the returned direction with
/// their own step size, which lets the pulse optimizer wrap it in a
/// backtracking acceptance test while network training applies it directly.
#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// Advance the moment estimates with `grad` and return the bias-corrected
    /// descent direction `m_hat / (sqrt(v_hat) + eps)` (to be subtracted).
    pub fn direction(&mut self, grad: &[f64]) -> Vec<f64> {
        assert_eq!(grad.len(), self.m.len(), "gradient length mismatch");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        grad.iter()
            .enumerate()
            .map(|(i, &g)| {
                self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = self.m[i] / bc1;
                let v_hat = self.v[i] / bc2;
                m_hat / (v_hat.sqrt() + self.eps)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_direction_is_unit_scaled_sign_of_gradient() {
        let mut adam = Adam::new(3);
        let dir = adam.direction(&[0.5, -2.0, 0.0]);
        assert!((dir[0] - 1.0).abs() < 1e-6);
        assert!((dir[1] + 1.0).abs() < 1e-6);
        assert_eq!(dir[2], 0.0);
    }

    #[test]
    fn descends_a_quadratic() {
        let mut adam = Adam::new(1);
        let mut x = 3.0_f64;
        for _ in 0..500 {
            let g = 2.0 * x;
            let d = adam.direction(&[g]);
            x -= 0.05 * d[0];
        }
        assert!(x.abs() < 1e-2, "x = {x}");
    }
}
