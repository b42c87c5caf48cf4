/// First/second moment accumulators for one parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Bias-corrected Adam update.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, 0.1);
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = vec![0.0; 3];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &[0.3, -5.0, 1e-3], &mut s, 0.01);
        for (pi, sign) in p.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((pi - sign * 0.01).abs() < 1e-6, "{pi}");
        }
    }

    #[test]
    fn minimizes_quadratic() {
        // f(x) = ½ Σ a_i (x_i − c_i)²
        let a: Vec<f64> = (0..10).map(|i| 1.0 + i as f64 * 0.5).collect();
        let c: Vec<f64> = (0..10).map(|i| (i as f64 - 4.5) * 0.3).collect();
        let mut x = vec![0.0; 10];
        let mut s = AdamState::new(10);
        let grad = |x: &[f64]| -> Vec<f64> { (0..10).map(|i| a[i] * (x[i] - c[i])).collect() };
        let mut converged = false;
        for _ in 0..5000 {
            let g = grad(&x);
            if g.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-6 {
                converged = true;
                break;
            }
            adam_step(&mut x, &g, &mut s, 1e-2);
        }
        assert!(converged, "residual gradient too large");
        for (xi, ci) in x.iter().zip(&c) {
            assert!((xi - ci).abs() < 1e-5);
        }
    }
}
