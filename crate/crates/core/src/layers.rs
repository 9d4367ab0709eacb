//! Parameter registration and forward helpers shared by the models.

use alloc::format;

use crate::rng::SplitMix64;
use crate::tape::{BnUpdate, Mode, Tape, Var, BN_MOMENTUM};
use crate::tensor::{ModelState, Tensor};
use crate::Result;

/// Registers `{prefix}.w` (`fan_in x fan_out`, Glorot) and `{prefix}.b` (zeros).
pub fn init_linear(state: &mut ModelState, prefix: &str, fan_in: usize, fan_out: usize, rng: &mut SplitMix64) {
    state.params.insert(format!("{prefix}.w"), Tensor::glorot(fan_in, fan_out, rng));
    state.params.insert(format!("{prefix}.b"), Tensor::zeros(&[fan_out]));
}

/// `x * W + b` for every row of `x`.
pub fn linear(tape: &mut Tape, state: &ModelState, prefix: &str, x: Var) -> Result<Var> {
    let w = tape.param(&state.params, &format!("{prefix}.w"))?;
    let b = tape.param(&state.params, &format!("{prefix}.b"))?;
    let xw = tape.matmul(x, w)?;
    tape.add_row(xw, b)
}

/// Registers `gamma = 1`, `beta = 0` and running statistics `(0, 1)`.
pub fn init_batch_norm(state: &mut ModelState, prefix: &str, features: usize) {
    state.params.insert(format!("{prefix}.gamma"), Tensor::filled(&[features], 1.0));
    state.params.insert(format!("{prefix}.beta"), Tensor::zeros(&[features]));
    state.buffers.insert(format!("{prefix}.running_mean"), Tensor::zeros(&[features]));
    state.buffers.insert(format!("{prefix}.running_var"), Tensor::filled(&[features], 1.0));
}

pub fn batch_norm(tape: &mut Tape, state: &ModelState, prefix: &str, x: Var, mode: Mode) -> Result<Var> {
    let gamma = tape.param(&state.params, &format!("{prefix}.gamma"))?;
    let beta = tape.param(&state.params, &format!("{prefix}.beta"))?;
    let mean = state.buffers.require(&format!("{prefix}.running_mean"))?;
    let var = state.buffers.require(&format!("{prefix}.running_var"))?;
    tape.batch_norm(x, gamma, beta, prefix, mode, (mean, var))
}

/// Folds recorded train-mode batch statistics into the running buffers:
/// `running = (1 - momentum) * running + momentum * batch`.
pub fn commit_bn_updates(state: &mut ModelState, updates: &[BnUpdate]) -> Result<()> {
    for update in updates {
        for (suffix, batch) in [("running_mean", &update.mean), ("running_var", &update.var)] {
            let name = format!("{}.{suffix}", update.prefix);
            let running = state
                .buffers
                .get_mut(&name)
                .ok_or_else(|| crate::Error::CheckpointMismatch(format!("missing buffer {name}")))?;
            for (r, b) in running.data_mut().iter_mut().zip(batch.iter()) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b;
            }
        }
    }
    Ok(())
}
