use super::config::Arch;
use super::forward::{ForwardTrace, LayerTrace};
use super::params::{EncoderLayer, ModelParams};
use crate::error::{Error, Result};
use crate::nn::{gelu_grad, Matrix, Real};

/// Gradients of the score with respect to every parameter and every
/// projected token (row 0 is CLS).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub params: ModelParams<T>,
    pub tokens: Matrix<T>,
}

/// Reverse-mode pass through a saved trace, scaled by `dscore`.
pub fn backward<T: Real>(trace: &ForwardTrace<T>, dscore: T, params: &ModelParams<T>) -> Result<Gradients<T>> {
    let mut grads = params.zeros_like();
    let tokens = backward_into(trace, dscore, params, &mut grads)?;
    Ok(Gradients { params: grads, tokens })
}

/// Like [`backward`] but accumulates into an existing gradient set.
pub fn backward_into<T: Real>(
    trace: &ForwardTrace<T>,
    dscore: T,
    params: &ModelParams<T>,
    grads: &mut ModelParams<T>,
) -> Result<Matrix<T>> {
    check_consistency(trace, params)?;
    let d = params.cls.len();
    let s = trace.tokens.tokens.rows;

    let dlogit = dscore * trace.score * (T::one() - trace.score);

    // head
    let mut dx = vec![dlogit];
    let last = trace.head.act.last().map_or(&trace.head.input, |a| a);
    dx = params.head.out.backward_vec(last, &dx, &mut grads.head.out);
    for i in (0..params.head.hidden.len()).rev() {
        let dz: Vec<T> = dx
            .iter()
            .zip(&trace.head.pre[i])
            .map(|(&g, &z)| g * gelu_grad(z))
            .collect();
        let input = if i == 0 {
            &trace.head.input
        } else {
            &trace.head.act[i - 1]
        };
        dx = params.head.hidden[i].backward_vec(input, &dz, &mut grads.head.hidden[i]);
    }

    let mut dtokens = Matrix::zeros(s, d);
    match trace.arch {
        Arch::Transformer => {
            let mut dcur = Matrix::zeros(s, d);
            dcur.row_mut(0).copy_from_slice(&dx);
            for (idx, lt) in trace.layers.iter().enumerate().rev() {
                dcur = layer_backward(lt, &dcur, &params.layers[idx], &mut grads.layers[idx], trace.n_heads);
            }
            dtokens = dcur;
        }
        Arch::MlpAblation => {
            let n = T::lit((s - 1) as f64);
            let share: Vec<T> = dx.iter().map(|&g| g / n).collect();
            for t in 1..s {
                dtokens.row_mut(t).copy_from_slice(&share);
            }
        }
    }

    for (g, &dt) in grads.cls.iter_mut().zip(dtokens.row(0)) {
        *g += dt;
    }
    for (row, item) in trace.inputs.items.iter().enumerate() {
        let x: Vec<T> = item.values.iter().map(|&v| T::from_f32(v)).collect();
        params.projections.for_width(item.width).backward_vec(
            &x,
            dtokens.row(row + 1),
            grads.projections.for_width_mut(item.width),
        );
    }
    Ok(dtokens)
}

fn check_consistency<T: Real>(trace: &ForwardTrace<T>, params: &ModelParams<T>) -> Result<()> {
    let d = params.cls.len();
    let ok = trace.tokens.tokens.cols == d
        && trace.layers.len() == params.layers.len()
        && trace.head.pre.len() == params.head.hidden.len()
        && trace.head.input.len() == d
        && (trace.inputs.items.is_empty() || trace.inputs.items.len() + 1 == trace.tokens.len())
        && (trace.arch == Arch::MlpAblation) == params.layers.is_empty();
    if !ok {
        return Err(Error::Consistency(
            "trace was not produced with these parameters".into(),
        ));
    }
    Ok(())
}

fn layer_backward<T: Real>(
    lt: &LayerTrace<T>,
    dout: &Matrix<T>,
    p: &EncoderLayer<T>,
    g: &mut EncoderLayer<T>,
    n_heads: usize,
) -> Matrix<T> {
    let s = dout.rows;
    let d = dout.cols;
    let dh = d / n_heads;
    let scale = T::one() / T::lit(dh as f64).sqrt();

    // out = after_attn + ffn_out(gelu(ffn_in(norm_ffn(after_attn))))
    let dact = p.ffn_out.backward(&lt.ffn_act, dout, &mut g.ffn_out);
    let dpre = Matrix {
        rows: dact.rows,
        cols: dact.cols,
        data: dact
            .data
            .iter()
            .zip(&lt.ffn_pre.data)
            .map(|(&a, &u)| a * gelu_grad(u))
            .collect(),
    };
    let dnormed = p.ffn_in.backward(&lt.normed_ffn, &dpre, &mut g.ffn_in);
    let mut dafter = p.norm_ffn.backward(&lt.norm_ffn, &dnormed, &mut g.norm_ffn);
    dafter.add_assign(dout);

    // after_attn = input + attn_out(attention(norm_attn(input)))
    let dcontext = p.attn_out.backward(&lt.context, &dafter, &mut g.attn_out);
    let mut dq = Matrix::zeros(s, d);
    let mut dk = Matrix::zeros(s, d);
    let mut dv = Matrix::zeros(s, d);
    for h in 0..n_heads {
        let cols = h * dh..(h + 1) * dh;
        let pm = &lt.probs[h];
        // dP = dC · Vᵀ, dV = Pᵀ · dC
        let mut dp = Matrix::zeros(s, s);
        for i in 0..s {
            let dci = &dcontext.row(i)[cols.clone()];
            for j in 0..s {
                let vj = &lt.v.row(j)[cols.clone()];
                let val = dci.iter().zip(vj).map(|(&a, &b)| a * b).sum::<T>();
                dp.data[i * s + j] = val;
                let pij = pm.at(i, j);
                for (dvv, &dc) in dv.row_mut(j)[cols.clone()].iter_mut().zip(dci) {
                    *dvv += pij * dc;
                }
            }
        }
        // softmax backward, then through the scaled dot product
        for i in 0..s {
            let prow = pm.row(i);
            let dprow = dp.row(i);
            let dot = prow.iter().zip(dprow).map(|(&a, &b)| a * b).sum::<T>();
            for j in 0..s {
                let ds = prow[j] * (dprow[j] - dot) * scale;
                if ds == T::zero() {
                    continue;
                }
                let kj = lt.k.row(j)[cols.clone()].to_vec();
                let qi = lt.q.row(i)[cols.clone()].to_vec();
                for (a, &kv) in dq.row_mut(i)[cols.clone()].iter_mut().zip(&kj) {
                    *a += ds * kv;
                }
                for (a, &qv) in dk.row_mut(j)[cols.clone()].iter_mut().zip(&qi) {
                    *a += ds * qv;
                }
            }
        }
    }
    let mut dnormed_attn = p.query.backward(&lt.normed_attn, &dq, &mut g.query);
    dnormed_attn.add_assign(&p.key.backward(&lt.normed_attn, &dk, &mut g.key));
    dnormed_attn.add_assign(&p.value.backward(&lt.normed_attn, &dv, &mut g.value));
    let mut dinput = p.norm_attn.backward(&lt.norm_attn, &dnormed_attn, &mut g.norm_attn);
    dinput.add_assign(&dafter);
    dinput
}
