//! Central finite-difference comparison against analytic gradients.

use super::params::ParamStore;
use super::tensor::Matrix;

/// Worst disagreement found for one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

/// |a − n| / max(|a|, |n|, floor). The floor keeps entries whose true
/// gradient is zero from dividing rounding noise by nothing.
pub fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Perturb every entry (or every `stride`-th) of every tensor by ±`step`
/// and compare the central difference of `loss` with `analytic`.
pub fn check_gradients(
    store: &ParamStore,
    analytic: &[Matrix],
    loss: impl Fn(&ParamStore) -> f64,
    step: f64,
    stride: usize,
) -> Vec<TensorCheck> {
    let mut work = store.clone();
    let mut out = Vec::new();
    for i in 0..store.len() {
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        for k in (0..store.get(i).len()).step_by(stride.max(1)) {
            let x0 = store.get(i).data[k];
            work.get_mut(i).data[k] = x0 + step;
            let up = loss(&work);
            work.get_mut(i).data[k] = x0 - step;
            let down = loss(&work);
            work.get_mut(i).data[k] = x0;
            let numeric = (up - down) / (2.0 * step);
            worst = worst.max(rel_error(analytic[i].data[k], numeric, 1e-6));
            checked += 1;
        }
        out.push(TensorCheck {
            name: store.name(i).to_string(),
            checked,
            max_rel_error: worst,
        });
    }
    out
}
