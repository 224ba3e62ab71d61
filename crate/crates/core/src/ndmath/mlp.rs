//! Stacks of tanh-activated affine layers stored as flat `[w0, b0, w1, b1, ..]`
//! parameter slices, with a plain path and a taped path that agree bitwise.

use rand::Rng;

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Weight matrix `[fan_in, fan_out]` drawn from `U(-sqrt(1/fan_in), sqrt(1/fan_in))`,
/// multiplied by `scale`.
pub fn uniform_fan_in(fan_in: usize, fan_out: usize, scale: f64, rng: &mut impl Rng) -> Tensor {
    let bound = (1.0 / fan_in as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-bound..=bound) * scale)
        .collect();
    Tensor::new(vec![fan_in, fan_out], data).expect("positive dimensions")
}

/// Appends layers for `sizes[0] -> sizes[1] -> ..` to `out`.
pub fn init_layers(sizes: &[usize], rng: &mut impl Rng, out: &mut Vec<Tensor>) {
    for pair in sizes.windows(2) {
        out.push(uniform_fan_in(pair[0], pair[1], 1.0, rng));
        out.push(Tensor::zeros(&[pair[1]]));
    }
}

fn check_pairs(len: usize) -> Result<()> {
    if !len.is_multiple_of(2) {
        return Err(Error::Argument(format!("layer slice has odd length {len}")));
    }
    Ok(())
}

/// `tanh(affine(..))` through every layer pair in `layers`.
pub fn tanh_stack(layers: &[Tensor], input: &Tensor) -> Result<Tensor> {
    check_pairs(layers.len())?;
    let mut h = input.clone();
    for pair in layers.chunks(2) {
        h = h.affine(&pair[0], &pair[1])?.tanh();
    }
    Ok(h)
}

pub fn tanh_stack_taped(tape: &mut Tape, layers: &[Var], input: Var) -> Result<Var> {
    check_pairs(layers.len())?;
    let mut h = input;
    for pair in layers.chunks(2) {
        let z = tape.affine(h, pair[0], pair[1])?;
        h = tape.tanh(z);
    }
    Ok(h)
}
