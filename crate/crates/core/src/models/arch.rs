use std::ops::Range;

use super::params::module_name;
use super::{Arch, ModelConfig, ModelError, ParamStore};
use crate::numcore::{attend, bilstm_on_tape, LstmVars, Tape, Var};

/// Store parameters placed on a tape, in store order.
pub(crate) struct Bound<'s> {
    store: &'s ParamStore,
    vars: Vec<Var>,
}

impl<'s> Bound<'s> {
    pub fn bind(tape: &Tape<'s>, store: &'s ParamStore, requires_grad: bool) -> Self {
        let vars = store
            .iter()
            .map(|p| tape.leaf(&p.value, requires_grad && p.kind != super::ParamKind::Embedding))
            .collect();
        Self { store, vars }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    fn var(&self, name: &str) -> Result<Var, ModelError> {
        self.store
            .position(name)
            .map(|i| self.vars[i])
            .ok_or_else(|| ModelError::Mismatch(format!("missing tensor `{name}`")))
    }

    fn lstm(&self, prefix: &str) -> Result<(LstmVars, LstmVars), ModelError> {
        let dir = |d: &str| -> Result<LstmVars, ModelError> {
            Ok(LstmVars {
                w_ih: self.var(&format!("{prefix}_{d}.w_ih"))?,
                w_hh: self.var(&format!("{prefix}_{d}.w_hh"))?,
                bias: self.var(&format!("{prefix}_{d}.bias"))?,
            })
        };
        Ok((dir("fw")?, dir("bw")?))
    }
}

pub(crate) struct TapeOutput {
    pub logits: Var,
    pub records: Vec<(String, Var)>,
}

/// Runs the configured architecture. `v` is the raw sentence, `e` its biased
/// refinement (the same node when no bias is applied).
pub(crate) fn forward_arch(
    tape: &Tape<'_>,
    config: &ModelConfig,
    b: &Bound<'_>,
    v: Var,
    e: Var,
    aspect: Range<usize>,
) -> Result<TapeOutput, ModelError> {
    let m = module_name(config.arch);
    let name = |s: &str| format!("{m}.{s}");
    let [n, _] = tape.shape(e);
    if aspect.is_empty() || aspect.end > n {
        return Err(ModelError::Config(format!(
            "aspect [{}, {}) outside a {n}-token sentence",
            aspect.start, aspect.end
        )));
    }
    let aspect_rows = tape.rows(v, aspect.start, aspect.len())?;
    let classify = |x: Var| -> Result<Var, ModelError> {
        let w = b.var(&name("classifier.weight"))?;
        let bias = b.var(&name("classifier.bias"))?;
        Ok(tape.add_row(tape.matmul(x, w)?, bias)?)
    };
    let mut records = Vec::new();

    let features = match config.arch {
        Arch::Lstm => {
            let (fw, bw) = b.lstm(&name("encoder"))?;
            let s = bilstm_on_tape(tape, e, &fw, &bw)?;
            tape.concat_cols(&[s.forward_last, s.backward_last])?
        }
        Arch::LstmAttn => {
            let a = tape.mean_rows(aspect_rows)?;
            let x = tape.concat_cols(&[e, tape.repeat_rows(a, n)?])?;
            let (fw, bw) = b.lstm(&name("encoder"))?;
            let s = bilstm_on_tape(tape, x, &fw, &bw)?;
            let q = tape.matmul(a, b.var(&name("query.weight"))?)?;
            let (w, ctx) = attend(tape, q, s.states, None)?;
            records.push(("attention".to_string(), w));
            ctx
        }
        Arch::Ian => {
            let (cf, cb) = b.lstm(&name("context"))?;
            let (af, ab) = b.lstm(&name("aspect"))?;
            let hc = bilstm_on_tape(tape, e, &cf, &cb)?.states;
            let ha = bilstm_on_tape(tape, aspect_rows, &af, &ab)?.states;
            let c_pool = tape.mean_rows(hc)?;
            let a_pool = tape.mean_rows(ha)?;
            let qc = tape.matmul(a_pool, b.var(&name("context_query.weight"))?)?;
            let qa = tape.matmul(c_pool, b.var(&name("aspect_query.weight"))?)?;
            let (wc, ctx_c) = attend(tape, qc, hc, None)?;
            let (wa, ctx_a) = attend(tape, qa, ha, None)?;
            records.push(("context".to_string(), wc));
            records.push(("aspect".to_string(), wa));
            tape.concat_cols(&[ctx_c, ctx_a])?
        }
        Arch::MemNet => {
            let (fw, bw) = b.lstm(&name("memory"))?;
            let memory = bilstm_on_tape(tape, e, &fw, &bw)?.states;
            let a = tape.mean_rows(aspect_rows)?;
            let mut q = tape.matmul(a, b.var(&name("query.weight"))?)?;
            let hop_w = b.var(&name("hop.weight"))?;
            let hop_b = b.var(&name("hop.bias"))?;
            for hop in 1..=config.memnet_hops {
                let (w, ctx) = attend(tape, q, memory, None)?;
                records.push((format!("hop{hop}"), w));
                let carried = tape.add_row(tape.matmul(q, hop_w)?, hop_b)?;
                q = tape.add(ctx, carried)?;
            }
            q
        }
        Arch::Aoa => {
            let (cf, cb) = b.lstm(&name("context"))?;
            let (af, ab) = b.lstm(&name("aspect"))?;
            let hc = bilstm_on_tape(tape, e, &cf, &cb)?.states;
            let ha = bilstm_on_tape(tape, aspect_rows, &af, &ab)?.states;
            // I is n×m
            let inter = tape.matmul_nt(hc, ha)?;
            // column softmax as a row softmax of Iᵀ: m×n
            let alpha_t = tape.softmax(tape.transpose(inter), None)?;
            let beta = tape.softmax(inter, None)?;
            let beta_bar = tape.mean_rows(beta)?;
            let w = tape.matmul(beta_bar, alpha_t)?;
            records.push(("aoa".to_string(), w));
            tape.matmul(w, hc)?
        }
    };
    Ok(TapeOutput {
        logits: classify(features)?,
        records,
    })
}
