//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::tensor::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates, one slot per parameter of the store they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.tensor.len()]).collect();
        AdamState {
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }
}

/// Applies one Adam update to every trainable parameter, then clears gradients.
///
/// `extra_grad` lets callers fold in gradient terms that were not recorded on
/// the tape (the explicit L2 term); it is indexed like the store.
pub fn adam_step(
    params: &mut ParamStore,
    state: &mut AdamState,
    config: &AdamConfig,
    lr: f64,
    extra_grad: Option<&[Option<Vec<f64>>]>,
) -> Result<()> {
    if state.first_moment.len() != params.len() {
        return Err(Error::Contract(format!(
            "optimizer state tracks {} parameters, store has {}",
            state.first_moment.len(),
            params.len()
        )));
    }
    if let Some(id) = params
        .ids()
        .find(|&id| params.tensor(id).requires_grad && params.tensor(id).grad.is_none())
    {
        return Err(Error::Contract(format!(
            "parameter {} has no gradient",
            params.name(id)
        )));
    }

    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - config.beta1.powi(t);
    let bias2 = 1.0 - config.beta2.powi(t);

    for id in params.ids().collect::<Vec<_>>() {
        let tensor = params.tensor_mut(id);
        if !tensor.requires_grad {
            continue;
        }
        let grad = tensor.grad.take().expect("checked above");
        let extra = extra_grad.and_then(|e| e[id.0].as_deref());
        let m = &mut state.first_moment[id.0];
        let v = &mut state.second_moment[id.0];
        if m.len() != grad.len() {
            return Err(Error::Contract(format!(
                "optimizer state for parameter {} has the wrong size",
                id.0
            )));
        }
        for (i, value) in tensor.data_mut().iter_mut().enumerate() {
            let g = grad[i] + extra.map_or(0.0, |e| e[i]);
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            *value -= lr * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::tensor::{ParamKind, Tensor};

    fn single(value: f64) -> (ParamStore, AdamState) {
        let mut store = ParamStore::new();
        store.add("p", ParamKind::Weight, Tensor::scalar(value).with_grad());
        let state = AdamState::new(&store);
        (store, state)
    }

    fn set_grad(store: &mut ParamStore, g: f64) {
        let id = store.ids().next().unwrap();
        store.tensor_mut(id).grad = Some(vec![g]);
    }

    fn value(store: &ParamStore) -> f64 {
        store.iter().next().unwrap().tensor.data()[0]
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let (mut store, mut state) = single(0.37);
        for _ in 0..5 {
            set_grad(&mut store, 0.0);
            adam_step(&mut store, &mut state, &AdamConfig::default(), 0.1, None).unwrap();
        }
        assert_eq!(value(&store), 0.37);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let (mut store, mut state) = single(1.0);
        set_grad(&mut store, 1.0);
        adam_step(&mut store, &mut state, &AdamConfig::default(), 0.1, None).unwrap();
        assert!((value(&store) - 0.9).abs() < 1e-7);
        assert!(store.iter().next().unwrap().tensor.grad.is_none());
    }

    #[test]
    fn minimizes_a_quadratic() {
        let (mut store, mut state) = single(0.0);
        for _ in 0..500 {
            let p = value(&store);
            set_grad(&mut store, 2.0 * (p - 3.0));
            adam_step(&mut store, &mut state, &AdamConfig::default(), 0.1, None).unwrap();
        }
        assert!((value(&store) - 3.0).abs() < 1e-3, "{}", value(&store));
    }

    #[test]
    fn extra_gradient_is_added() {
        let (mut a, mut sa) = single(1.0);
        let (mut b, mut sb) = single(1.0);
        set_grad(&mut a, 0.5);
        set_grad(&mut b, 0.25);
        adam_step(&mut a, &mut sa, &AdamConfig::default(), 0.01, None).unwrap();
        adam_step(&mut b, &mut sb, &AdamConfig::default(), 0.01, Some(&[Some(vec![0.25])])).unwrap();
        assert_eq!(value(&a), value(&b));
    }

    #[test]
    fn missing_gradient_names_the_parameter() {
        let (mut store, mut state) = single(1.0);
        let err = adam_step(&mut store, &mut state, &AdamConfig::default(), 0.1, None).unwrap_err();
        assert!(matches!(&err, Error::Contract(m) if m.contains('p')), "{err}");
    }
}
