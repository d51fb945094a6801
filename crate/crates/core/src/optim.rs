//! Training objective (MSE plus L1/L2 weight penalties), Adam updates, and
//! a central finite-difference gradient oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Gradients, LstmModel, ParamKind};
use crate::scalar::Scalar;

/// Adam and regularization hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L1 penalty on weights.
    pub l1_coeff: f64,
    /// L2 penalty on weights.
    pub l2_coeff: f64,
    /// Rescale the gradient to this L2 norm when exceeded. Off by default.
    pub clip_norm: Option<f64>,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            l1_coeff: 1e-5,
            l2_coeff: 1e-5,
            clip_norm: None,
        }
    }
}

impl OptimConfig {
    /// Same settings with both penalties off.
    pub fn unregularized(self) -> Self {
        Self {
            l1_coeff: 0.0,
            l2_coeff: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !open_unit(self.beta1) || !open_unit(self.beta2) {
            return Err(Error::Config(format!(
                "beta1 and beta2 must lie in (0, 1), got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if !(self.l1_coeff >= 0.0) || !(self.l2_coeff >= 0.0) {
            return Err(Error::Config(
                "regularization coefficients must be >= 0".into(),
            ));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip_norm must be > 0, got {c}")));
            }
        }
        Ok(())
    }
}

/// Mean squared error over features and its gradient `2 (p - y) / n`.
pub fn mse_loss<T: Scalar>(prediction: &[T], target: &[T]) -> Result<(T, Vec<T>)> {
    if prediction.len() != target.len() || prediction.is_empty() {
        return Err(Error::Shape(format!(
            "prediction has {} values, target {}",
            prediction.len(),
            target.len()
        )));
    }
    let n = T::from_usize(prediction.len()).unwrap();
    let two = T::one() + T::one();
    let mut sum = T::zero();
    let grad = prediction
        .iter()
        .zip(target)
        .map(|(&p, &y)| {
            let d = p - y;
            sum = sum + d * d;
            two * d / n
        })
        .collect();
    Ok((sum / n, grad))
}

/// `l1 * sum|w| + l2 * sum w^2` over weight tensors; biases are exempt.
pub fn regularization_penalty<T: Scalar>(model: &LstmModel<T>, config: &OptimConfig) -> T {
    let l1 = T::from_f64_lossy(config.l1_coeff);
    let l2 = T::from_f64_lossy(config.l2_coeff);
    let (mut abs, mut sq) = (T::zero(), T::zero());
    for t in model.tensors() {
        if t.kind != ParamKind::Weight {
            continue;
        }
        for &w in t.data {
            abs = abs + w.abs();
            sq = sq + w * w;
        }
    }
    l1 * abs + l2 * sq
}

pub fn regularized_loss<T: Scalar>(model: &LstmModel<T>, data_loss: T, config: &OptimConfig) -> T {
    data_loss + regularization_penalty(model, config)
}

/// Adds `l1 * sign(w) + 2 l2 w` to the weight gradients, with `sign(0) = 0`.
pub fn add_regularization_gradient<T: Scalar>(
    model: &LstmModel<T>,
    grads: &mut Gradients<T>,
    config: &OptimConfig,
) {
    if config.l1_coeff == 0.0 && config.l2_coeff == 0.0 {
        return;
    }
    let l1 = T::from_f64_lossy(config.l1_coeff);
    let two_l2 = T::from_f64_lossy(2.0 * config.l2_coeff);
    for (g, w) in grads.tensors_mut().into_iter().zip(model.tensors()) {
        if w.kind != ParamKind::Weight {
            continue;
        }
        for (gv, &wv) in g.data.iter_mut().zip(w.data) {
            let sign = if wv > T::zero() {
                T::one()
            } else if wv < T::zero() {
                -T::one()
            } else {
                T::zero()
            };
            *gv = *gv + l1 * sign + two_l2 * wv;
        }
    }
}

/// Full objective for one (input, target) pair: MSE plus penalties.
pub fn objective<T: Scalar, R: AsRef<[T]>>(
    model: &LstmModel<T>,
    input: &[R],
    target: &[T],
    config: &OptimConfig,
) -> Result<T> {
    let prediction = model.predict(input)?;
    let (loss, _) = mse_loss(&prediction, target)?;
    Ok(regularized_loss(model, loss, config))
}

/// Analytic value and gradient of [`objective`] by backpropagation.
pub fn objective_gradients<T: Scalar, R: AsRef<[T]>>(
    model: &LstmModel<T>,
    input: &[R],
    target: &[T],
    config: &OptimConfig,
) -> Result<(T, Gradients<T>)> {
    let (prediction, cache) = model.forward(input)?;
    let (loss, grad_out) = mse_loss(&prediction, target)?;
    let mut grads = model.backward(&cache, &grad_out)?;
    add_regularization_gradient(model, &mut grads, config);
    Ok((regularized_loss(model, loss, config), grads))
}

/// Central differences `(f(x + h e_k) - f(x - h e_k)) / 2h` for every
/// coordinate of `point`.
pub fn central_difference<T: Scalar, F>(point: &[T], mut f: F, step: T) -> Vec<T>
where
    F: FnMut(&[T]) -> T,
{
    let two = T::one() + T::one();
    let mut x = point.to_vec();
    (0..x.len())
        .map(|k| {
            let orig = x[k];
            x[k] = orig + step;
            let plus = f(&x);
            x[k] = orig - step;
            let minus = f(&x);
            x[k] = orig;
            (plus - minus) / (two * step)
        })
        .collect()
}

/// Finite-difference gradient of the regularized objective with respect to
/// every model parameter. Verification oracle for backward; use `f64`.
pub fn finite_diff_gradients<T: Scalar, R: AsRef<[T]>>(
    model: &LstmModel<T>,
    input: &[R],
    target: &[T],
    config: &OptimConfig,
    step: T,
) -> Result<Gradients<T>> {
    // Surface shape errors before the loop.
    objective(model, input, target, config)?;
    let mut probe = model.clone();
    let flat = model.flatten();
    let values = central_difference(
        &flat,
        |params| {
            probe.load_flat(params).expect("same length");
            objective(&probe, input, target, config).expect("validated above")
        },
        step,
    );
    let mut grads = model.zeros_like();
    grads.load_flat(&values)?;
    Ok(grads)
}

/// Rescales `grads` in place so its L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_gradients<T: Scalar>(grads: &mut Gradients<T>, max_norm: T) -> T {
    let norm = grads.sum_squares().sqrt();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Gradients<T>,
    pub v: Gradients<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(model: &LstmModel<T>) -> Self {
        Self {
            m: model.zeros_like(),
            v: model.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update.
///
/// Rejects non-finite gradients before touching any state and names the
/// offending tensor.
pub fn adam_step<T: Scalar>(
    model: &mut LstmModel<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    config: &OptimConfig,
) -> Result<()> {
    if grads.shape() != model.shape() || state.m.shape() != model.shape() {
        return Err(Error::Shape(
            "gradient or optimizer state shape differs from model".into(),
        ));
    }
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::Numeric(format!(
            "non-finite gradient in tensor {name} at step {}",
            state.t + 1
        )));
    }
    state.t += 1;
    let t = state.t as f64;
    let beta1 = T::from_f64_lossy(config.beta1);
    let beta2 = T::from_f64_lossy(config.beta2);
    let one_minus_b1 = T::from_f64_lossy(1.0 - config.beta1);
    let one_minus_b2 = T::from_f64_lossy(1.0 - config.beta2);
    let correction1 = T::from_f64_lossy(1.0 - config.beta1.powf(t));
    let correction2 = T::from_f64_lossy(1.0 - config.beta2.powf(t));
    let lr = T::from_f64_lossy(config.learning_rate);
    let eps = T::from_f64_lossy(config.epsilon);

    let params = model.tensors_mut();
    let grads = grads.tensors();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (((p, g), m), v) in params.into_iter().zip(grads).zip(ms).zip(vs) {
        for k in 0..p.data.len() {
            let gk = g.data[k];
            m.data[k] = beta1 * m.data[k] + one_minus_b1 * gk;
            v.data[k] = beta2 * v.data[k] + one_minus_b2 * gk * gk;
            let m_hat = m.data[k] / correction1;
            let v_hat = v.data[k] / correction2;
            p.data[k] = p.data[k] - lr * m_hat / (v_hat.sqrt() + eps);
        }
        if p.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!(
                "parameter tensor {} became non-finite at step {}",
                p.name, state.t
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_model, ModelShape};

    fn scalar_model(w: f64) -> LstmModel<f64> {
        let shape = ModelShape {
            input_size: 1,
            hidden_size: 1,
            num_layers: 1,
            output_size: 1,
            head_hidden: None,
        };
        let mut m = LstmModel::zeros(shape).unwrap();
        m.head_mut()[0].weight[0] = w;
        m
    }

    #[test]
    fn mse_identity_is_zero() {
        let p = [0.3; 12];
        let (loss, grad) = mse_loss(&p, &p).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn mse_single_coordinate() {
        let mut p = [0.0f64; 12];
        p[0] = 1.0;
        let (loss, grad) = mse_loss(&p, &[0.0; 12]).unwrap();
        assert!((loss - 1.0 / 12.0).abs() < 1e-15);
        assert!((grad[0] - 2.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn mse_length_mismatch() {
        assert!(matches!(
            mse_loss(&[1.0, 2.0], &[1.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn penalty_off_leaves_loss() {
        let m = init_model::<f64>(4, 1, 0).unwrap();
        let cfg = OptimConfig::default().unregularized();
        assert_eq!(regularized_loss(&m, 0.42, &cfg), 0.42);
    }

    #[test]
    fn penalty_single_weight() {
        let m = scalar_model(2.0);
        let cfg = OptimConfig {
            l1_coeff: 0.1,
            l2_coeff: 0.01,
            ..OptimConfig::default()
        };
        assert!((regularized_loss(&m, 0.0, &cfg) - 0.24).abs() < 1e-15);
        let mut g = m.zeros_like();
        add_regularization_gradient(&m, &mut g, &cfg);
        assert!((g.head()[0].weight[0] - (0.1 + 0.04)).abs() < 1e-15);
    }

    #[test]
    fn biases_are_not_penalized() {
        let mut m = scalar_model(0.0);
        m.head_mut()[0].bias[0] = 5.0;
        m.layers_mut()[0].bias.iter_mut().for_each(|b| *b = 3.0);
        let cfg = OptimConfig {
            l1_coeff: 1.0,
            l2_coeff: 1.0,
            ..OptimConfig::default()
        };
        assert_eq!(regularization_penalty(&m, &cfg), 0.0);
        let mut g = m.zeros_like();
        add_regularization_gradient(&m, &mut g, &cfg);
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn l1_subgradient_at_zero_is_zero() {
        let m = scalar_model(0.0);
        let cfg = OptimConfig {
            l1_coeff: 0.5,
            l2_coeff: 0.0,
            ..OptimConfig::default()
        };
        let mut g = m.zeros_like();
        add_regularization_gradient(&m, &mut g, &cfg);
        assert_eq!(g.head()[0].weight[0], 0.0);
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut m = init_model::<f64>(3, 1, 1).unwrap();
        let before = m.clone();
        let mut state = AdamState::new(&m);
        let g = m.zeros_like();
        adam_step(&mut m, &g, &mut state, &OptimConfig::default()).unwrap();
        assert_eq!(m, before);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn adam_first_step_size() {
        let mut m = scalar_model(0.0);
        let mut g = m.zeros_like();
        g.head_mut()[0].weight[0] = 1.0;
        let mut state = AdamState::new(&m);
        let cfg = OptimConfig::default();
        adam_step(&mut m, &g, &mut state, &cfg).unwrap();
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((m.head()[0].weight[0] - expected).abs() < 1e-18);
        assert!((expected - (-9.9999999e-4)).abs() < 1e-17);
    }

    #[test]
    fn adam_rejects_nan_gradient_by_name() {
        let mut m = init_model::<f64>(3, 1, 1).unwrap();
        let mut g = m.zeros_like();
        g.layers_mut()[0].w_recurrent[2] = f64::NAN;
        let mut state = AdamState::new(&m);
        let err = adam_step(&mut m, &g, &mut state, &OptimConfig::default()).unwrap_err();
        assert!(err.to_string().contains("lstm.0.w_recurrent"), "{err}");
        assert_eq!(state.t, 0);
    }

    #[test]
    fn adam_runs_are_reproducible() {
        let run = || {
            let mut m = init_model::<f64>(4, 2, 3).unwrap();
            let mut state = AdamState::new(&m);
            let cfg = OptimConfig::default();
            let x = vec![[0.25; 12]; 3];
            for _ in 0..100 {
                let (_, g) = objective_gradients(&m, &x, &[0.5; 12], &cfg).unwrap();
                adam_step(&mut m, &g, &mut state, &cfg).unwrap();
            }
            m.fingerprint()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn finite_difference_of_parabola() {
        let g = central_difference(&[3.0f64], |x| x[0] * x[0], 1e-5);
        assert!((g[0] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn zero_model_head_bias_gradient_is_mse_gradient() {
        let m = LstmModel::<f64>::zeros(ModelShape::new(3, 1)).unwrap();
        let target: Vec<f64> = (0..12).map(|i| 0.1 * i as f64).collect();
        let x = vec![[0.0; 12]; 2];
        let cfg = OptimConfig::default().unregularized();
        let fd = finite_diff_gradients(&m, &x, &target, &cfg, 1e-5).unwrap();
        let (_, mse_grad) = mse_loss(&[0.0; 12], &target).unwrap();
        for (a, b) in fd.head()[0].bias.iter().zip(&mse_grad) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn clipping_caps_norm() {
        let m = scalar_model(0.0);
        let mut g = m.zeros_like();
        g.head_mut()[0].weight[0] = 30.0;
        g.head_mut()[0].bias[0] = 40.0;
        let norm = clip_gradients(&mut g, 5.0);
        assert_eq!(norm, 50.0);
        assert!((g.sum_squares().sqrt() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(OptimConfig::default().validate().is_ok());
        let bad = OptimConfig {
            beta1: 1.0,
            ..OptimConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptimConfig {
            learning_rate: 0.0,
            ..OptimConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
