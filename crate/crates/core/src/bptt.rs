//! Sequence forward pass, softmax cross-entropy, and backpropagation through
//! time. Classification reads only the final hidden state.

use crate::cells::{predict, CellState, ParamSet, RecurrentCell, StepCache};
use crate::data::SequenceBatch;
use crate::error::{Error, Result};
use crate::linalg::Vector;

pub type Gradients = ParamSet;

/// Runs the cell over `seq` from a zero state and returns the head logits of
/// the final hidden state together with one cache per step.
pub fn forward_sequence(
    cell: &dyn RecurrentCell,
    params: &ParamSet,
    seq: &[Vector],
) -> Result<(Vector, Vec<StepCache>)> {
    if seq.is_empty() {
        return Err(Error::invalid("cannot run a cell over an empty sequence"));
    }
    let (_, n_h) = params.cell.dims()?;
    let mut state = CellState::zeros(n_h);
    let mut caches = Vec::with_capacity(seq.len());
    for x in seq {
        let (next, cache) = cell.step(&params.cell, x, &state)?;
        caches.push(cache);
        state = next;
    }
    let logits = predict(&params.head, &state.h)?;
    Ok((logits, caches))
}

/// Forward pass without retaining caches.
pub fn infer_logits(cell: &dyn RecurrentCell, params: &ParamSet, seq: &[Vector]) -> Result<Vector> {
    if seq.is_empty() {
        return Err(Error::invalid("cannot run a cell over an empty sequence"));
    }
    let (_, n_h) = params.cell.dims()?;
    let mut state = CellState::zeros(n_h);
    for x in seq {
        state = cell.step(&params.cell, x, &state)?.0;
    }
    predict(&params.head, &state.h)
}

/// `−log softmax(logits)[label]` and its gradient `softmax(logits) − onehot`.
pub fn softmax_xent(logits: &Vector, label: usize) -> Result<(f64, Vector)> {
    if label >= logits.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits
        .as_slice()
        .iter()
        .fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let shifted: Vec<f64> = logits.as_slice().iter().map(|&x| x - max).collect();
    let sum_exp: f64 = shifted.iter().map(|x| x.exp()).sum();
    let log_sum = sum_exp.ln();
    let loss = log_sum - shifted[label];
    let mut grad: Vec<f64> = shifted.iter().map(|x| (x - log_sum).exp()).collect();
    grad[label] -= 1.0;
    Ok((loss, Vector::from_raw(grad)))
}

/// Accumulates the gradients of one example into `grads`.
pub fn backward_sequence_into(
    cell: &dyn RecurrentCell,
    params: &ParamSet,
    caches: &[StepCache],
    dlogits: &Vector,
    grads: &mut Gradients,
) -> Result<()> {
    let last = caches
        .last()
        .ok_or_else(|| Error::invalid("backward pass needs at least one cached step"))?;
    let head = &params.head;
    if dlogits.len() != head.b.len() {
        return Err(Error::dim(
            "backward_sequence logits",
            head.b.len(),
            dlogits.len(),
        ));
    }
    if last.h.len() != head.w.cols() {
        return Err(Error::dim(
            "backward_sequence cache",
            head.w.cols(),
            last.h.len(),
        ));
    }
    grads.check_same_shape(params, "backward_sequence")?;

    grads
        .head
        .w
        .add_outer(dlogits.as_slice(), last.h.as_slice())?;
    grads.head.b.axpy_assign(1.0, dlogits)?;

    let n_h = last.h.len();
    let mut dh = Vector::zeros(n_h);
    head.w
        .matvec_transposed_acc(dlogits.as_slice(), dh.as_mut_slice())?;
    let mut dc = Vector::zeros(n_h);
    for cache in caches.iter().rev() {
        let (dh_prev, dc_prev) =
            cell.backward_step(&params.cell, cache, &dh, &dc, &mut grads.cell)?;
        dh = dh_prev;
        dc = dc_prev;
    }
    Ok(())
}

/// Gradients of the loss whose logit-gradient is `dlogits`.
pub fn backward_sequence(
    cell: &dyn RecurrentCell,
    params: &ParamSet,
    caches: &[StepCache],
    dlogits: &Vector,
) -> Result<Gradients> {
    let mut grads = params.zeros_like();
    backward_sequence_into(cell, params, caches, dlogits, &mut grads)?;
    Ok(grads)
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub mean_loss: f64,
    pub grads: Gradients,
    pub correct: usize,
}

/// Mean loss and mean gradients over a batch, plus the number of examples
/// whose argmax prediction (ties to the lowest class) matches the label.
/// Examples are reduced in index order.
pub fn batch_loss_and_grads(
    cell: &dyn RecurrentCell,
    params: &ParamSet,
    batch: &SequenceBatch,
) -> Result<BatchResult> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut grads = params.zeros_like();
    let mut total_loss = 0.0;
    let mut correct = 0;
    for (seq, &label) in batch.inputs.iter().zip(&batch.labels) {
        let (logits, caches) = forward_sequence(cell, params, seq)?;
        if logits.argmax() == label {
            correct += 1;
        }
        let (loss, dlogits) = softmax_xent(&logits, label)?;
        total_loss += loss;
        backward_sequence_into(cell, params, &caches, &dlogits, &mut grads)?;
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    Ok(BatchResult {
        mean_loss: total_loss / n,
        grads,
        correct,
    })
}
