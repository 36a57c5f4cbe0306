use rand::Rng;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Feed-forward stack with a ReLU after every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    /// `(weight [out, in], bias [out])` per layer.
    pub layers: Vec<(ParamId, ParamId)>,
}

impl MlpParams {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        widths: &[usize],
        init_range: f64,
        rng: &mut R,
    ) -> Self {
        let mut layers = Vec::with_capacity(widths.len());
        let mut fan_in = input_dim;
        for (i, &w) in widths.iter().enumerate() {
            let weight = store.add_uniform(format!("{prefix}.l{}.w", i + 1), &[w, fan_in], init_range, rng);
            let bias = store.add_uniform(format!("{prefix}.l{}.b", i + 1), &[w], init_range, rng);
            layers.push((weight, bias));
            fan_in = w;
        }
        MlpParams { layers }
    }

    pub fn lookup(store: &ParamStore, prefix: &str, depth: usize) -> Result<Self> {
        let mut layers = Vec::with_capacity(depth);
        for i in 1..=depth {
            let get = |suffix: &str| {
                let name = format!("{prefix}.l{i}.{suffix}");
                store
                    .find(&name)
                    .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
            };
            layers.push((get("w")?, get("b")?));
        }
        let mlp = MlpParams { layers };
        mlp.validate(store)?;
        Ok(mlp)
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        self.layers.first().map_or(0, |&(w, _)| store.get(w).cols())
    }

    pub fn output_dim(&self, store: &ParamStore) -> usize {
        self.layers.last().map_or(0, |&(w, _)| store.get(w).rows())
    }

    pub fn validate(&self, store: &ParamStore) -> Result<()> {
        let mut prev: Option<usize> = None;
        for &(w, b) in &self.layers {
            let wt = store.get(w);
            if wt.shape().len() != 2 {
                return Err(Error::dim(store.name(w), "a matrix", format!("{:?}", wt.shape())));
            }
            if let Some(p) = prev {
                if wt.cols() != p {
                    return Err(Error::dim(store.name(w), format!("{p} input columns"), wt.cols()));
                }
            }
            if store.get(b).shape() != [wt.rows()] {
                return Err(Error::dim(
                    store.name(b),
                    wt.rows(),
                    format!("{:?}", store.get(b).shape()),
                ));
            }
            prev = Some(wt.rows());
        }
        Ok(())
    }
}

pub fn forward(tape: &mut Tape<'_>, p: &MlpParams, x: Var) -> Result<Var> {
    let mut h = x;
    for &(w, b) in &p.layers {
        let z = tape.affine(w, h, Some(b))?;
        h = tape.relu(z);
    }
    Ok(h)
}

pub fn mlp_forward(store: &ParamStore, p: &MlpParams, x: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new(store);
    let x = tape.input(x.data().to_vec());
    let y = forward(&mut tape, p, x)?;
    Ok(tape.tensor(y))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn zero_net_outputs_zero() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = MlpParams::register(&mut store, "m", 4, &[3, 3, 2], 0.0, &mut rng);
        let y = mlp_forward(&store, &p, &Tensor::vector(vec![1.0, -1.0, 2.0, 0.5])).unwrap();
        assert_eq!(y, Tensor::zeros(&[2]));
    }

    #[test]
    fn identity_layers_pass_nonnegative_input() {
        let mut store = ParamStore::new();
        let eye = |n: usize| {
            let mut d = vec![0.0; n * n];
            (0..n).for_each(|i| d[i * n + i] = 1.0);
            Tensor::new(vec![n, n], d).unwrap()
        };
        let layers = (0..3)
            .map(|i| {
                (
                    store.add(format!("w{i}"), eye(3)),
                    store.add(format!("b{i}"), Tensor::zeros(&[3])),
                )
            })
            .collect();
        let p = MlpParams { layers };
        let x = Tensor::vector(vec![0.0, 2.5, 0.75]);
        assert_eq!(mlp_forward(&store, &p, &x).unwrap(), x);
    }

    #[test]
    fn wrong_input_dim_is_error() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = MlpParams::register(&mut store, "m", 4, &[3, 3, 2], 0.1, &mut rng);
        assert!(mlp_forward(&store, &p, &Tensor::zeros(&[5])).is_err());
    }
}
