/// Adamax: Adam with the second-moment estimate replaced by an
/// exponentially weighted infinity norm.
#[derive(Clone, Debug)]
pub struct Adamax {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    u: Vec<f64>,
    t: u32,
}

impl Adamax {
    pub fn new(n: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adamax { lr, beta1, beta2, eps, m: vec![0.0; n], u: vec![0.0; n], t: 0 }
    }

    /// Returns the update to add to the parameters for gradient `g`.
    pub fn step(&mut self, g: &[f64]) -> Vec<f64> {
        assert_eq!(g.len(), self.m.len(), "gradient length");
        self.t += 1;
        let bias = 1.0 - self.beta1.powi(self.t as i32);
        let lr = self.lr / bias;
        self.m
            .iter_mut()
            .zip(self.u.iter_mut())
            .zip(g)
            .map(|((m, u), &g)| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *u = (self.beta2 * *u).max(g.abs());
                -lr * *m / (*u + self.eps)
            })
            .collect()
    }
}
