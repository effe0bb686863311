/// Adaptive moment estimation over a flat parameter vector (minimization).
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Returns the update to *add* to the parameters.
    pub fn step(&mut self, grad: &[f64]) -> Vec<f64> {
        assert_eq!(grad.len(), self.m.len(), "gradient length");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut update = vec![0.0; grad.len()];
        for i in 0..grad.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            update[i] = -self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        update
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_each_coordinate_by_learning_rate() {
        let mut adam = Adam::new(2, 0.1);
        let u = adam.step(&[3.0, -0.5]);
        assert!((u[0] + 0.1).abs() < 1e-6);
        assert!((u[1] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut x = [5.0, -3.0];
        let mut adam = Adam::new(2, 0.05);
        for _ in 0..2000 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            let u = adam.step(&g);
            x.iter_mut().zip(&u).for_each(|(p, d)| *p += d);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-2));
    }
}
