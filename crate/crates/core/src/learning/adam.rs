use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(shapes: impl IntoIterator<Item = usize>) -> Self {
        let sizes: Vec<usize> = shapes.into_iter().collect();
        Self {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [&mut [f64]], grads: &[&[f64]], state: &mut AdamState, cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len(), "parameter/gradient tensor count");
    assert_eq!(params.len(), state.m.len(), "optimizer state tensor count");
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.m[k];
        let v = &mut state.v[k];
        assert_eq!(p.len(), g.len());
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
    fn zero_gradient_leaves_params_and_decays_state() {
        let cfg = AdamConfig::default();
        let mut p = vec![1.0, -2.0];
        let mut st = AdamState::new([2]);
        st.m[0] = vec![0.5, 0.5];
        st.v[0] = vec![0.25, 0.25];
        st.t = 10;
        adam_step(&mut [p.as_mut_slice()], &[&[0.0, 0.0]], &mut st, &cfg);
        assert!((st.m[0][0] - 0.45).abs() < 1e-15);
        assert!((st.v[0][0] - 0.24975).abs() < 1e-15);

        let mut fresh = AdamState::new([2]);
        let before = p.clone();
        adam_step(&mut [p.as_mut_slice()], &[&[0.0, 0.0]], &mut fresh, &cfg);
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamConfig::default();
        let mut p = vec![0.0, 0.0, 0.0];
        let mut st = AdamState::new([3]);
        adam_step(&mut [p.as_mut_slice()], &[&[3.0, -0.01, 0.0]], &mut st, &cfg);
        // m̂ = g and v̂ = g², so the step is lr·g/(|g| + ε).
        assert!((p[0] + 1e-3 * 3.0 / (3.0 + 1e-8)).abs() < 1e-18);
        assert!((p[1] - 1e-3 * 0.01 / (0.01 + 1e-8)).abs() < 1e-18);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn deterministic() {
        let cfg = AdamConfig::default();
        let run = || {
            let mut p = vec![0.3, 0.7];
            let mut st = AdamState::new([2]);
            for k in 0..50 {
                let g = [p[0] - 1.0 + 0.01 * k as f64, p[1] * 2.0];
                adam_step(&mut [p.as_mut_slice()], &[&g], &mut st, &cfg);
            }
            p
        };
        assert_eq!(run(), run());
    }
}
