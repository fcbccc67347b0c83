//! Building-block layers, each available on a [`Tape`] and as a plain
//! function over [`Tensor`]s.

use rand::Rng;

use super::tape::softmax_rows;
use super::{NumError, Tape, Tensor, Var};

/// Softmax over the unmasked entries of `x`; masked entries are exactly 0.
///
/// ```
/// let p = posasc::numcore::softmax(&[1000.0, 0.0], None).unwrap();
/// assert!((p[0] - 1.0).abs() < 1e-12 && p[1] < 1e-300);
/// ```
pub fn softmax(x: &[f64], mask: Option<&[bool]>) -> Result<Vec<f64>, NumError> {
    Ok(softmax_rows(&Tensor::row(x), mask)?.into_data())
}

/// `−log softmax(logits)[gold]`, computed through log-sum-exp.
pub fn cross_entropy(logits: &[f64], gold: usize) -> Result<f64, NumError> {
    let tape = Tape::new();
    let x = tape.constant(Tensor::row(logits));
    let loss = tape.cross_entropy(x, gold)?;
    let v = tape.value(loss).data()[0];
    Ok(v)
}

/// Unscaled dot-product attention where the keys double as values.
///
/// Returns `(weights, context)` with `weights = softmax(keys · query)` over the
/// unmasked rows and `context = Σ weights_i · keys_i`.
pub fn dot_attention(
    query: &[f64],
    keys: &Tensor,
    mask: Option<&[bool]>,
) -> Result<(Vec<f64>, Vec<f64>), NumError> {
    let tape = Tape::new();
    let q = tape.constant(Tensor::row(query));
    let k = tape.leaf(keys, false);
    let (w, ctx) = attend(&tape, q, k, mask)?;
    let weights = tape.value(w).data().to_vec();
    let context = tape.value(ctx).data().to_vec();
    Ok((weights, context))
}

/// Tape form of [`dot_attention`]: `query` is `1 × k`, `keys` is `n × k`.
pub fn attend(
    tape: &Tape<'_>,
    query: Var,
    keys: Var,
    mask: Option<&[bool]>,
) -> Result<(Var, Var), NumError> {
    let scores = tape.matmul_nt(query, keys)?;
    let weights = tape.softmax(scores, mask)?;
    let context = tape.matmul(weights, keys)?;
    Ok((weights, context))
}

/// One LSTM direction. Gate blocks are laid out `[input, forget, cell, output]`
/// along the `4H` axis.
#[derive(Clone, Debug)]
pub struct LstmParams {
    /// `d × 4H`
    pub w_ih: Tensor,
    /// `H × 4H`
    pub w_hh: Tensor,
    /// `1 × 4H`
    pub bias: Tensor,
}

impl LstmParams {
    /// Weights uniform in `[-bound, bound]`, zero biases except the forget
    /// gate, which starts at `+1`.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, bound: f64, rng: &mut R) -> Self {
        let mut uniform = |r, c| {
            let data = (0..r * c).map(|_| rng.gen_range(-bound..=bound)).collect();
            Tensor::from_vec(r, c, data).expect("sized")
        };
        let w_ih = uniform(input, 4 * hidden);
        let w_hh = uniform(hidden, 4 * hidden);
        let mut bias = Tensor::zeros(1, 4 * hidden);
        for x in &mut bias.data_mut()[hidden..2 * hidden] {
            *x = 1.0;
        }
        Self { w_ih, w_hh, bias }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: Tensor::zeros(input, 4 * hidden),
            w_hh: Tensor::zeros(hidden, 4 * hidden),
            bias: Tensor::zeros(1, 4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.rows()
    }

    pub fn bind<'a>(&'a self, tape: &Tape<'a>, requires_grad: bool) -> LstmVars {
        LstmVars {
            w_ih: tape.leaf(&self.w_ih, requires_grad),
            w_hh: tape.leaf(&self.w_hh, requires_grad),
            bias: tape.leaf(&self.bias, requires_grad),
        }
    }
}

/// Parameters of one LSTM direction, already placed on a tape.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub w_ih: Var,
    pub w_hh: Var,
    pub bias: Var,
}

#[derive(Clone, Debug)]
pub struct BiLstmParams {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

impl BiLstmParams {
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, bound: f64, rng: &mut R) -> Self {
        let forward = LstmParams::init(input, hidden, bound, rng);
        let backward = LstmParams::init(input, hidden, bound, rng);
        Self { forward, backward }
    }
}

/// Per-position hidden states of a bidirectional pass.
#[derive(Clone, Copy, Debug)]
pub struct BiLstmStates {
    /// `n × 2H`, forward half first.
    pub states: Var,
    /// Forward hidden state after the last position (`1 × H`).
    pub forward_last: Var,
    /// Backward hidden state after the first position (`1 × H`).
    pub backward_last: Var,
}

/// Runs one direction over the rows of `x` (`n × d`), starting from zero
/// hidden and cell states. Returns the hidden state at each position, in
/// position order regardless of direction.
pub fn lstm_on_tape(
    tape: &Tape<'_>,
    x: Var,
    p: &LstmVars,
    reverse: bool,
) -> Result<Vec<Var>, NumError> {
    let [n, d] = tape.shape(x);
    let [wr, wc] = tape.shape(p.w_ih);
    let [hr, hc] = tape.shape(p.w_hh);
    if n == 0 {
        return Err(NumError::Shape("LSTM over an empty sequence".into()));
    }
    if wr != d || wc % 4 != 0 || hr * 4 != wc || hc != wc || tape.shape(p.bias) != [1, wc] {
        return Err(NumError::Shape(format!(
            "LSTM input {n}x{d} against w_ih {wr}x{wc}, w_hh {hr}x{hc}"
        )));
    }
    let h_dim = hr;
    let projected = tape.add_row(tape.matmul(x, p.w_ih)?, p.bias)?;

    let mut out = vec![None; n];
    let mut state: Option<(Var, Var)> = None;
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..n).rev())
    } else {
        Box::new(0..n)
    };
    for t in order {
        let xt = tape.row(projected, t)?;
        let z = match state {
            // h₀ = 0, so the recurrent term vanishes on the first step
            None => xt,
            Some((h, _)) => tape.add(xt, tape.matmul(h, p.w_hh)?)?,
        };
        let i = tape.sigmoid(tape.cols(z, 0, h_dim)?);
        let f = tape.sigmoid(tape.cols(z, h_dim, h_dim)?);
        let g = tape.tanh(tape.cols(z, 2 * h_dim, h_dim)?);
        let o = tape.sigmoid(tape.cols(z, 3 * h_dim, h_dim)?);
        let ig = tape.mul(i, g)?;
        let c = match state {
            None => ig,
            Some((_, c_prev)) => tape.add(tape.mul(f, c_prev)?, ig)?,
        };
        let h = tape.mul(o, tape.tanh(c))?;
        out[t] = Some(h);
        state = Some((h, c));
    }
    Ok(out.into_iter().map(|h| h.expect("every step visited")).collect())
}

/// Bidirectional pass: per-position concatenation of both directions.
pub fn bilstm_on_tape(
    tape: &Tape<'_>,
    x: Var,
    forward: &LstmVars,
    backward: &LstmVars,
) -> Result<BiLstmStates, NumError> {
    let fw = lstm_on_tape(tape, x, forward, false)?;
    let bw = lstm_on_tape(tape, x, backward, true)?;
    let fw_m = tape.concat_rows(&fw)?;
    let bw_m = tape.concat_rows(&bw)?;
    Ok(BiLstmStates {
        states: tape.concat_cols(&[fw_m, bw_m])?,
        forward_last: *fw.last().expect("non-empty"),
        backward_last: bw[0],
    })
}

/// Encodes `x` (`n × d`) into `n × 2H` hidden states.
pub fn bilstm_encode(x: &Tensor, params: &BiLstmParams) -> Result<Tensor, NumError> {
    let tape = Tape::new();
    let xv = tape.leaf(x, false);
    let f = params.forward.bind(&tape, false);
    let b = params.backward.bind(&tape, false);
    let out = bilstm_on_tape(&tape, xv, &f, &b)?;
    let t = tape.value(out.states).clone();
    Ok(t)
}
