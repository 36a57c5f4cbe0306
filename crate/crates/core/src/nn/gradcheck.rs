use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{ParamId, ParamStore};
use super::tape::{Gradients, ParamGrad};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub eps: f64,
    /// Entries sampled per parameter tensor (all entries when smaller).
    pub entries_per_param: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            eps: 1e-5,
            entries_per_param: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub entries_checked: usize,
}

/// Relative error `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the analytic gradients returned by `loss_fn` against central
/// finite differences on sampled parameter entries. `store` is restored to
/// its original values before returning.
pub fn grad_check<F>(store: &mut ParamStore, mut loss_fn: F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> Result<(f64, Gradients)>,
{
    let (base, grads) = loss_fn(store)?;
    if !base.is_finite() {
        return Err(Error::NonFinite(format!("loss {base}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        entries_checked: 0,
    };
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        let candidates: Vec<usize> = match grads.get(id) {
            Some(ParamGrad::Rows { cols, rows }) => rows.keys().flat_map(|&r| r * cols..(r + 1) * cols).collect(),
            _ => (0..store.get(id).len()).collect(),
        };
        if candidates.is_empty() {
            continue;
        }
        let n = opts.entries_per_param.min(candidates.len());
        let mut picked: Vec<usize> = sample(&mut rng, candidates.len(), n)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        picked.sort_unstable();
        for flat in picked {
            let original = store.get(id).data()[flat];
            store.get_mut(id).data_mut()[flat] = original + opts.eps;
            let plus = loss_fn(store).map(|r| r.0);
            store.get_mut(id).data_mut()[flat] = original - opts.eps;
            let minus = loss_fn(store).map(|r| r.0);
            store.get_mut(id).data_mut()[flat] = original;
            let (plus, minus) = (plus?, minus?);
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss while perturbing {}[{flat}]",
                    store.name(id)
                )));
            }
            let numeric = (plus - minus) / (2.0 * opts.eps);
            let analytic = grads.at(id, flat);
            let err = relative_error(analytic, numeric);
            report.entries_checked += 1;
            if err > report.max_rel_error || report.worst_param.is_empty() {
                report.max_rel_error = err;
                report.worst_param = store.name(id).to_string();
                report.worst_index = flat;
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Tape, Tensor};

    #[test]
    fn quadratic_closure() {
        let mut store = ParamStore::new();
        let p = store.add("p", Tensor::new(vec![1, 1], vec![3.0]).unwrap());
        let report = grad_check(
            &mut store,
            |s| {
                let mut tape = Tape::new(s);
                let x = tape.lookup(p, 0)?;
                let sq = tape.mul(x, x)?;
                let g = tape.backward(sq)?;
                Ok((tape.value(sq)[0], g))
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-9, "{report:?}");
        assert!((report.analytic - 6.0).abs() < 1e-12);
        assert_eq!(store.get(p).data(), &[3.0]);
    }

    #[test]
    fn non_finite_loss_is_error() {
        let mut store = ParamStore::new();
        store.add("p", Tensor::scalar(1.0));
        let err = grad_check(
            &mut store,
            |s| Ok((f64::NAN, Gradients::new(s.len()))),
            &GradCheckOptions::default(),
        );
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn detects_wrong_gradient() {
        let mut store = ParamStore::new();
        let p = store.add("p", Tensor::new(vec![1, 1], vec![2.0]).unwrap());
        let report = grad_check(
            &mut store,
            |s| {
                let mut tape = Tape::new(s);
                let x = tape.lookup(p, 0)?;
                let sq = tape.mul(x, x)?;
                let mut g = tape.backward(sq)?;
                g.get_mut(p).unwrap().scale(1.5);
                Ok((tape.value(sq)[0], g))
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error > 0.3);
        assert_eq!(report.worst_param, "p");
    }
}
