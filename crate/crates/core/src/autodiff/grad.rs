use rayon::prelude::*;

use super::tape::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::pinn::MlpModel;

/// Collocation points per independent tape.
pub const DEFAULT_CHUNK: usize = 32;

/// Loss and exact weight gradient of `Σ_k loss(k)` over the points `(t, ζ)`.
///
/// For each point the network is recorded on a tape with `t` and `ζ` seeded,
/// and `loss` appends the per-point loss to the tape given the two output
/// nodes `[ψ_R, ψ_I]`. Points are processed in fixed chunks on independent
/// tapes and the chunk results are summed in order, so the result does not
/// depend on the thread count.
pub fn loss_weight_gradient<F>(model: &MlpModel, points: &[(f64, f64)], loss: F) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&mut Tape, usize, [NodeId; 2]) -> NodeId + Sync,
{
    loss_weight_gradient_chunked(model, points, DEFAULT_CHUNK, loss)
}

pub fn loss_weight_gradient_chunked<F>(
    model: &MlpModel,
    points: &[(f64, f64)],
    chunk: usize,
    loss: F,
) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&mut Tape, usize, [NodeId; 2]) -> NodeId + Sync,
{
    let chunk = chunk.max(1);
    let n_params = model.param_count();
    let partials: Vec<(f64, Vec<f64>)> = points
        .par_chunks(chunk)
        .enumerate()
        .map(|(c, pts)| {
            let mut tape = Tape::with_capacity(model.node_estimate() + 64);
            let mut grad = vec![0.0; n_params];
            let mut total = 0.0;
            for (k, &(t, z)) in pts.iter().enumerate() {
                tape.clear();
                let outputs = model.record(&mut tape, t, z);
                let out = loss(&mut tape, c * chunk + k, outputs);
                let value = tape.value(out).value;
                if !value.is_finite() {
                    return Err(Error::NonFinite(format!("loss at point ({t}, {z})")));
                }
                total += value;
                tape.reverse(out, model.params(), &mut grad);
            }
            Ok((total, grad))
        })
        .collect::<Result<_>>()?;

    let mut total = 0.0;
    let mut grad = vec![0.0; n_params];
    for (l, g) in partials {
        total += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    Ok((total, grad))
}
