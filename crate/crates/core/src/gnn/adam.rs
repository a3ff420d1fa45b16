use serde::{Deserialize, Serialize};

use super::{GnnError, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &[Matrix]) -> Self {
        let zeros: Vec<Matrix> = params.iter().map(|p| Matrix::zeros(p.rows, p.cols)).collect();
        Self { m: zeros.clone(), v: zeros, step: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step(params: &mut [Matrix], grads: &[Matrix], state: &mut AdamState, lr: f64) -> Result<(), GnnError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(GnnError::ShapeMismatch(format!("{} params, {} grads, {} moments", params.len(), grads.len(), state.m.len())));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(GnnError::ShapeMismatch(format!("parameter {i}: {:?} vs gradient {:?}", p.shape(), g.shape())));
        }
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powf(state.step as f64);
    let c2 = 1.0 - b2.powf(state.step as f64);
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        for k in 0..p.data.len() {
            let gk = g.data[k];
            m.data[k] = b1 * m.data[k] + (1.0 - b1) * gk;
            v.data[k] = b2 * v.data[k] + (1.0 - b2) * gk * gk;
            let mh = m.data[k] / c1;
            let vh = v.data[k] / c2;
            p.data[k] -= lr * mh / (vh.sqrt() + state.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut p = vec![Matrix::from_vec(1, 2, vec![1.0, -1.0])];
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &[Matrix::zeros(1, 2)], &mut s, 0.1).unwrap();
        assert_eq!(p[0].data, vec![1.0, -1.0]);
        s.m[0].data = vec![0.5, 0.5];
        s.v[0].data = vec![0.2, 0.2];
        adam_step(&mut p, &[Matrix::zeros(1, 2)], &mut s, 0.1).unwrap();
        assert_eq!(s.m[0].data, vec![0.45, 0.45]);
        assert!((s.v[0].data[0] - 0.1998).abs() < 1e-15);
        assert_eq!(s.step, 2);
    }

    #[test]
    fn first_step_is_signed_lr() {
        let mut p = vec![Matrix::from_vec(1, 3, vec![0.0, 0.0, 0.0])];
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &[Matrix::from_vec(1, 3, vec![2.0, -0.01, 300.0])], &mut s, 0.01).unwrap();
        for (x, want) in p[0].data.iter().zip([-0.01, 0.01, -0.01]) {
            assert!((x - want).abs() < 1e-8, "{x}");
        }
    }

    #[test]
    fn minimizes_square() {
        let mut p = vec![Matrix::from_vec(1, 1, vec![1.0])];
        let mut s = AdamState::new(&p);
        for _ in 0..100 {
            let g = Matrix::from_vec(1, 1, vec![2.0 * p[0].data[0]]);
            adam_step(&mut p, &[g], &mut s, 0.1).unwrap();
        }
        assert!(p[0].data[0].abs() < 0.05, "{}", p[0].data[0]);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![Matrix::zeros(1, 2)];
        let mut s = AdamState::new(&p);
        assert!(matches!(adam_step(&mut p, &[Matrix::zeros(2, 1)], &mut s, 0.1), Err(GnnError::ShapeMismatch(_))));
    }
}
