//! First-order parameter updates.

use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use crate::Real;

/// Update rule and its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

struct Moments<T> {
    m_w: Vec<Array2<T>>,
    v_w: Vec<Array2<T>>,
    m_b: Vec<Array1<T>>,
    v_b: Vec<Array1<T>>,
}

/// Optimizer state bound to one model shape.
pub struct Optimizer<T> {
    kind: OptimizerKind,
    step: i32,
    moments: Option<Moments<T>>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind, model: &Mlp<T>) -> Self {
        let moments = match kind {
            OptimizerKind::Adam { .. } => {
                let z = Gradients::zeros_like(model);
                Some(Moments {
                    m_w: z.weights.clone(),
                    v_w: z.weights,
                    m_b: z.biases.clone(),
                    v_b: z.biases,
                })
            }
            OptimizerKind::Sgd => None,
        };
        Self { kind, step: 0, moments }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    /// Applies one update with learning rate `lr`.
    pub fn step(&mut self, model: &mut Mlp<T>, grads: &Gradients<T>, lr: f64) {
        self.step += 1;
        let lr_t = T::lit(lr);
        match (self.kind, self.moments.as_mut()) {
            (OptimizerKind::Adam { beta1, beta2, epsilon }, Some(mo)) => {
                let b1 = T::lit(beta1);
                let b2 = T::lit(beta2);
                let eps = T::lit(epsilon);
                let c1 = T::one() / (T::one() - T::lit(beta1.powi(self.step)));
                let c2 = T::one() / (T::one() - T::lit(beta2.powi(self.step)));
                let update = |p: &mut T, g: &T, m: &mut T, v: &mut T| {
                    *m = b1 * *m + (T::one() - b1) * *g;
                    *v = b2 * *v + (T::one() - b2) * *g * *g;
                    let mh = *m * c1;
                    let vh = *v * c2;
                    *p -= lr_t * mh / (vh.sqrt() + eps);
                };
                for (l, layer) in model.layers_mut().iter_mut().enumerate() {
                    Zip::from(&mut layer.weights)
                        .and(&grads.weights[l])
                        .and(&mut mo.m_w[l])
                        .and(&mut mo.v_w[l])
                        .for_each(update);
                    Zip::from(&mut layer.bias)
                        .and(&grads.biases[l])
                        .and(&mut mo.m_b[l])
                        .and(&mut mo.v_b[l])
                        .for_each(update);
                }
            }
            _ => {
                for (l, layer) in model.layers_mut().iter_mut().enumerate() {
                    layer.weights.scaled_add(-lr_t, &grads.weights[l]);
                    layer.bias.scaled_add(-lr_t, &grads.biases[l]);
                }
            }
        }
    }
}
