use crate::nets::ParamSet;
use crate::{Error, Result};

/// Adam with bias correction and no weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, params: &ParamSet<f64>) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut ParamSet<f64>, grads: &[Vec<f64>]) -> Result<()> {
        if grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "{} gradient tensors for {} parameters",
                grads.len(),
                self.m.len()
            )));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((t, g), m), v) in params.tensors_mut().iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((p, &g), m), v) in t.data.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let update = (*m / c1) / ((*v / c2).sqrt() + self.eps);
                *p -= self.lr * update;
            }
        }
        Ok(())
    }
}

pub fn grad_norm(grads: &[Vec<f64>]) -> f64 {
    grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
}

/// Rescales so the global norm is at most `max_norm`.
pub fn clip_grad_norm(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let norm = grad_norm(grads);
    if norm > max_norm {
        let k = max_norm / norm;
        grads.iter_mut().flatten().for_each(|g| *g *= k);
    }
    norm
}
