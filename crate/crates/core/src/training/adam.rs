use crate::model::{NerfModel, ParamGroup};
use crate::real::Real;

/// Adam with bias correction; eps sits inside the sqrt-denominator sum the
/// usual way (added after the root).
#[derive(Debug, Clone)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-15,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState<R> {
    pub hyper: AdamHyper,
    pub m: Vec<Vec<R>>,
    pub v: Vec<Vec<R>>,
    pub t: u64,
}

impl<R: Real> AdamState<R> {
    pub fn new(model: &NerfModel<R>, hyper: AdamHyper) -> Self {
        let shapes: Vec<usize> = model.param_arrays().iter().map(|a| a.len()).collect();
        AdamState {
            hyper,
            m: shapes.iter().map(|&n| vec![R::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![R::zero(); n]).collect(),
            t: 0,
        }
    }

    /// One update over all parameter arrays with per-group learning rates.
    pub fn step(
        &mut self,
        params: &mut [&mut [R]],
        grads: &[&[R]],
        groups: &[ParamGroup],
        lr_tables: f64,
        lr_mlp: f64,
    ) {
        self.t += 1;
        let b1 = R::from_f64(self.hyper.beta1);
        let b2 = R::from_f64(self.hyper.beta2);
        let eps = R::from_f64(self.hyper.eps);
        let c1 = R::one() - b1;
        let c2 = R::one() - b2;
        let bias1 = R::one() - R::from_f64(self.hyper.beta1.powi(self.t as i32));
        let bias2 = R::one() - R::from_f64(self.hyper.beta2.powi(self.t as i32));

        for (((p, g), (m, v)), group) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
            .zip(groups)
        {
            let lr = R::from_f64(match group {
                ParamGroup::Table => lr_tables,
                ParamGroup::Mlp => lr_mlp,
            });
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + c1 * gi;
                v[i] = b2 * v[i] + c2 * gi * gi;
                let mhat = m[i] / bias1;
                let vhat = v[i] / bias2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}
