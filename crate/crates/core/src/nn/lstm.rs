use rand::Rng;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Standard LSTM cell without peepholes. Gate blocks in the stacked weights
/// are ordered input, forget, output, cell candidate:
///
/// ```text
/// i = σ(W_i x + U_i h + b_i)    f = σ(W_f x + U_f h + b_f)
/// o = σ(W_o x + U_o h + b_o)    g = tanh(W_g x + U_g h + b_g)
/// c' = f ⊙ c + i ⊙ g            h' = o ⊙ tanh(c')
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `[4·hidden, input]`
    pub w_input: ParamId,
    /// `[4·hidden, hidden]`
    pub w_recurrent: ParamId,
    /// `[4·hidden]`
    pub bias: ParamId,
}

impl LstmParams {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        init_range: f64,
        rng: &mut R,
    ) -> Self {
        let g = 4 * hidden_dim;
        let w_input = store.add_uniform(format!("{prefix}.w_input"), &[g, input_dim], init_range, rng);
        let w_recurrent = store.add_uniform(format!("{prefix}.w_recurrent"), &[g, hidden_dim], init_range, rng);
        let bias = store.add_uniform(format!("{prefix}.bias"), &[g], init_range, rng);
        LstmParams {
            input_dim,
            hidden_dim,
            w_input,
            w_recurrent,
            bias,
        }
    }

    /// Re-attaches handles to tensors already present in `store`.
    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self> {
        let get = |suffix: &str| {
            let name = format!("{prefix}.{suffix}");
            store
                .find(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
        };
        let w_input = get("w_input")?;
        let w_recurrent = get("w_recurrent")?;
        let bias = get("bias")?;
        let hidden_dim = store.get(w_recurrent).cols();
        let input_dim = store.get(w_input).cols();
        let p = LstmParams {
            input_dim,
            hidden_dim,
            w_input,
            w_recurrent,
            bias,
        };
        p.validate(store)?;
        Ok(p)
    }

    pub fn validate(&self, store: &ParamStore) -> Result<()> {
        let g = 4 * self.hidden_dim;
        let check = |id: ParamId, shape: &[usize]| {
            let got = store.get(id).shape();
            if got != shape {
                return Err(Error::dim(store.name(id), format!("{shape:?}"), format!("{got:?}")));
            }
            Ok(())
        };
        check(self.w_input, &[g, self.input_dim])?;
        check(self.w_recurrent, &[g, self.hidden_dim])?;
        check(self.bias, &[g])
    }
}

/// One recurrence step on the tape. Returns `(h, c)`.
pub fn step(tape: &mut Tape<'_>, p: &LstmParams, x: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
    let h = p.hidden_dim;
    for (name, var, want) in [("x", x, p.input_dim), ("h_prev", h_prev, h), ("c_prev", c_prev, h)] {
        if tape.dim(var) != want {
            return Err(Error::dim(name, want, tape.dim(var)));
        }
    }
    let from_x = tape.affine(p.w_input, x, Some(p.bias))?;
    let from_h = tape.affine(p.w_recurrent, h_prev, None)?;
    let pre = tape.add(from_x, from_h)?;
    let i_pre = tape.slice(pre, 0, h)?;
    let f_pre = tape.slice(pre, h, h)?;
    let o_pre = tape.slice(pre, 2 * h, h)?;
    let g_pre = tape.slice(pre, 3 * h, h)?;
    let i = tape.sigmoid(i_pre);
    let f = tape.sigmoid(f_pre);
    let o = tape.sigmoid(o_pre);
    let g = tape.tanh(g_pre);
    let keep = tape.mul(f, c_prev)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let c_act = tape.tanh(c);
    let h_new = tape.mul(o, c_act)?;
    Ok((h_new, c))
}

/// Runs the cell over `seq` from a zero state, right-to-left when `reversed`.
/// Hidden states are returned in consumption order; an empty sequence yields
/// a zero final state.
pub fn run(tape: &mut Tape<'_>, p: &LstmParams, seq: &[Var], reversed: bool) -> Result<(Vec<Var>, Var)> {
    let mut h = tape.zeros(p.hidden_dim);
    let mut c = tape.zeros(p.hidden_dim);
    let mut hidden = Vec::with_capacity(seq.len());
    let order: Box<dyn Iterator<Item = &Var>> = if reversed {
        Box::new(seq.iter().rev())
    } else {
        Box::new(seq.iter())
    };
    for &x in order {
        let (h2, c2) = step(tape, p, x, h, c)?;
        h = h2;
        c = c2;
        hidden.push(h);
    }
    Ok((hidden, h))
}

/// Tape-free convenience wrapper around [`step`].
pub fn lstm_step(
    store: &ParamStore,
    p: &LstmParams,
    x: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
) -> Result<(Tensor, Tensor)> {
    let mut tape = Tape::new(store);
    let x = tape.input(x.data().to_vec());
    let h = tape.input(h_prev.data().to_vec());
    let c = tape.input(c_prev.data().to_vec());
    let (h, c) = step(&mut tape, p, x, h, c)?;
    Ok((tape.tensor(h), tape.tensor(c)))
}

/// Tape-free convenience wrapper around [`run`]; returns all hidden states
/// (consumption order) and the last one.
pub fn lstm_run(store: &ParamStore, p: &LstmParams, seq: &[Tensor], reversed: bool) -> Result<(Vec<Tensor>, Tensor)> {
    let mut tape = Tape::new(store);
    let vars: Vec<Var> = seq.iter().map(|t| tape.input(t.data().to_vec())).collect();
    let (all, last) = run(&mut tape, p, &vars, reversed)?;
    Ok((all.into_iter().map(|v| tape.tensor(v)).collect(), tape.tensor(last)))
}
