//! Bias-corrected Adam.

use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    /// Learning rate 2e-4 with first-moment decay 0.5.
    fn default() -> Self {
        Self {
            learning_rate: 0.0002,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for one parameter list.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn for_params<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let m: Vec<Tensor> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            v: m.clone(),
            m,
            t: 0,
        }
    }
}

/// One Adam step over matching parameter and gradient lists.
pub fn adam_update(params: &mut [&mut Tensor], grads: &[Tensor], state: &mut AdamState, cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len(), "one gradient per parameter");
    assert_eq!(params.len(), state.m.len(), "optimizer state matches parameters");
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        assert_eq!(p.shape(), g.shape(), "gradient shape");
        let (p, g, m, v) = (p.data_mut(), g.data(), m.data_mut(), v.data_mut());
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = Tensor::vector(vec![0.5, -1.0]);
        let before = p.clone();
        let mut st = AdamState::for_params([&p]);
        adam_update(&mut [&mut p], &[Tensor::zeros(&[2])], &mut st, &AdamConfig::default());
        assert_eq!(p, before);
        assert!(st.v[0].data().iter().all(|&v| v == 0.0));
        assert_eq!(st.t, 1);
    }

    #[test]
    fn first_step_is_learning_rate_times_sign() {
        // m̂ = g and v̂ = g² at t = 1, so Δθ = -lr·g/(|g| + ε).
        let cfg = AdamConfig::default();
        let g = vec![3.0, -0.02, 1e-3];
        let mut p = Tensor::zeros(&[3]);
        let mut st = AdamState::for_params([&p]);
        adam_update(&mut [&mut p], &[Tensor::vector(g.clone())], &mut st, &cfg);
        for (dp, g) in p.data().iter().zip(&g) {
            let expected = -cfg.learning_rate * g / (g.abs() + cfg.eps);
            assert!((dp - expected).abs() < 1e-15);
            assert!((dp + cfg.learning_rate * g.signum()).abs() < 1e-8);
        }
    }

    #[test]
    fn identical_inputs_stay_identical() {
        let cfg = AdamConfig::default();
        let mut a = Tensor::vector(vec![0.1, 0.2]);
        let mut b = a.clone();
        let mut sa = AdamState::for_params([&a]);
        let mut sb = sa.clone();
        for k in 0..5 {
            let g = Tensor::vector(vec![0.3 * k as f64, -1.0]);
            adam_update(&mut [&mut a], std::slice::from_ref(&g), &mut sa, &cfg);
            adam_update(&mut [&mut b], std::slice::from_ref(&g), &mut sb, &cfg);
        }
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }
}
