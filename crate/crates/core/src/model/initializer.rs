//! Multi-label classifier from conditions to the fragments a molecule contains.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{adam_step, AdamConfig, AdamState, ParamStore, WeightsError};
use super::tape::{Tape, Var};
use super::tensor::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct FragmentInitializer {
    pub hidden: usize,
    pub fragments: usize,
    pub store: ParamStore,
}

impl FragmentInitializer {
    pub fn new(hidden: usize, fragments: usize, seed: u64) -> FragmentInitializer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        s.add_uniform("init.w1", 3, hidden, 3, &mut rng);
        s.add("init.b1", Matrix::zeros(1, hidden));
        s.add_uniform("init.w2", hidden, fragments, hidden, &mut rng);
        s.add("init.b2", Matrix::zeros(1, fragments));
        FragmentInitializer {
            hidden,
            fragments,
            store: s,
        }
    }

    /// Rebuild from loaded tensors; sizes are read off `init.w2`.
    pub fn from_store(store: ParamStore) -> Result<FragmentInitializer, WeightsError> {
        let w2 = store
            .index("init.w2")
            .ok_or_else(|| WeightsError::Missing("init.w2".into()))?;
        let (hidden, fragments) = store.get(w2).shape();
        for (name, shape) in [
            ("init.w1", (3, hidden)),
            ("init.b1", (1, hidden)),
            ("init.b2", (1, fragments)),
        ] {
            let i = store.index(name).ok_or_else(|| WeightsError::Missing(name.into()))?;
            if store.get(i).shape() != shape {
                return Err(WeightsError::Shape {
                    name: name.into(),
                    found: store.get(i).shape(),
                    expected: shape,
                });
            }
        }
        let mut s = ParamStore::new();
        for name in ["init.w1", "init.b1", "init.w2", "init.b2"] {
            s.add(name, store.get(store.index(name).unwrap()).clone());
        }
        Ok(FragmentInitializer {
            hidden,
            fragments,
            store: s,
        })
    }

    /// Logits for a batch of standardized conditions (m × 3 → m × |V_f|).
    pub fn forward(&self, t: &mut Tape, conds: &Matrix) -> Var {
        let x = t.input(conds.clone());
        let (w1, b1, w2, b2) = (t.param(0), t.param(1), t.param(2), t.param(3));
        let h = t.matmul(x, w1);
        let h = t.add_row(h, b1);
        let h = t.gelu(h);
        let z = t.matmul(h, w2);
        t.add_row(z, b2)
    }

    /// Independent presence probability per fragment.
    pub fn probabilities(&self, conditions: [f64; 3]) -> Vec<f64> {
        let mut t = Tape::new(&self.store);
        let z = self.forward(&mut t, &Matrix::row_vector(conditions.to_vec()));
        t.value(z).data.iter().map(|&z| 1.0 / (1.0 + (-z).exp())).collect()
    }

    /// Mean binary cross-entropy against multi-hot targets, with gradients.
    pub fn loss_and_grads(&self, conds: &Matrix, targets: &Matrix) -> (f64, Vec<Matrix>) {
        let mut t = Tape::new(&self.store);
        let z = self.forward(&mut t, conds);
        let loss = t.bce_logits(z, targets.clone());
        (t.value(loss).data[0], t.backward(loss))
    }

    /// Full-batch Adam; returns the final loss.
    pub fn fit(&mut self, conds: &Matrix, targets: &Matrix, steps: usize, adam: &AdamConfig) -> f64 {
        let mut state = AdamState::new(&self.store);
        let mut last = f64::NAN;
        for _ in 0..steps {
            let (l, g) = self.loss_and_grads(conds, targets);
            last = l;
            adam_step(&mut self.store, &g, &mut state, adam);
        }
        last
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gradcheck::check_gradients;

    fn toy_set() -> (Matrix, Matrix) {
        let n = 10;
        let f = 6;
        let mut c = Matrix::zeros(n, 3);
        let mut t = Matrix::zeros(n, f);
        for i in 0..n {
            let x = i as f64 / 3.0 - 1.5;
            c.row_mut(i).copy_from_slice(&[x, (i % 3) as f64 - 1.0, 0.5 * (x * x) - 0.5]);
            for k in 0..f {
                if (i * 7 + k * 3) % 5 < 2 {
                    t.set(i, k, 1.0);
                }
            }
        }
        (c, t)
    }

    #[test]
    fn probabilities_shape_and_zero_network() {
        let mut init = FragmentInitializer::new(8, 6, 1);
        let p = init.probabilities([0.1, 0.2, 0.3]);
        assert_eq!(p.len(), 6);
        assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
        for i in 0..init.store.len() {
            init.store.get_mut(i).data.iter_mut().for_each(|x| *x = 0.0);
        }
        assert!(init.probabilities([1.0, -2.0, 3.0]).iter().all(|&x| x == 0.5));
        let (c, t) = toy_set();
        let (l, _) = init.loss_and_grads(&c, &t);
        assert!((l - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_predictions_have_near_zero_loss() {
        let mut init = FragmentInitializer::new(2, 2, 1);
        for i in 0..init.store.len() {
            init.store.get_mut(i).data.iter_mut().for_each(|x| *x = 0.0);
        }
        let b2 = init.store.index("init.b2").unwrap();
        init.store.get_mut(b2).data = vec![40.0, -40.0];
        let c = Matrix::zeros(1, 3);
        let (l, _) = init.loss_and_grads(&c, &Matrix::row_vector(vec![1.0, 0.0]));
        assert!(l < 1e-15);
    }

    #[test]
    fn bce_gradients_match_finite_differences() {
        let init = FragmentInitializer::new(5, 6, 2);
        let (c, t) = toy_set();
        let (_, g) = init.loss_and_grads(&c, &t);
        let report = check_gradients(
            &init.store,
            &g,
            |s| {
                let m = FragmentInitializer::from_store(s.clone()).unwrap();
                m.loss_and_grads(&c, &t).0
            },
            1e-5,
            1,
        );
        for r in report {
            assert!(r.max_rel_error < 1e-4, "{} {}", r.name, r.max_rel_error);
        }
    }

    #[test]
    fn memorizes_toy_set() {
        let mut init = FragmentInitializer::new(32, 6, 3);
        let (c, t) = toy_set();
        let adam = AdamConfig {
            lr: 1e-2,
            ..AdamConfig::default()
        };
        let l = init.fit(&c, &t, 2000, &adam);
        assert!(l < 0.05, "{l}");
    }
}
