use super::params::{ParamId, ParamStore};
use super::tape::{Gradients, ParamGrad};

/// Plain SGD: `p ← p − lr·g` for every parameter with a gradient.
pub fn sgd_step(store: &mut ParamStore, grads: &Gradients, lr: f64) {
    sgd_step_where(store, grads, lr, |_| true);
}

/// SGD restricted to parameters for which `update` returns true.
pub fn sgd_step_where(store: &mut ParamStore, grads: &Gradients, lr: f64, update: impl Fn(ParamId) -> bool) {
    for (id, g) in grads.iter() {
        if !update(id) {
            continue;
        }
        let t = store.get_mut(id);
        match g {
            ParamGrad::Dense(v) => {
                for (p, g) in t.data_mut().iter_mut().zip(v) {
                    *p -= lr * g;
                }
            }
            ParamGrad::Rows { cols, rows } => {
                let data = t.data_mut();
                for (&r, v) in rows {
                    for (p, g) in data[r * cols..(r + 1) * cols].iter_mut().zip(v) {
                        *p -= lr * g;
                    }
                }
            }
        }
    }
}
