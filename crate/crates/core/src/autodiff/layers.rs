//! Layer primitives expressed on a [`Tape`].

use rand::Rng;

use super::{Activation, AutodiffError, ParameterSet, Tape, Tensor, Var};

/// Fully connected layer `act(W·x + b)`.
pub fn dense(tape: &mut Tape<'_>, input: Var, weights: Var, bias: Var, activation: Activation) -> Result<Var, AutodiffError> {
    tape.affine(&[(weights, input)], bias, activation)
}

/// Convolution with "same" zero padding.
pub fn conv2d(
    tape: &mut Tape<'_>,
    input: Var,
    kernels: Var,
    bias: Var,
    stride: usize,
    activation: Activation,
) -> Result<Var, AutodiffError> {
    tape.conv2d(input, kernels, bias, stride, activation)
}

pub fn softmax(tape: &mut Tape<'_>, logits: Var) -> Result<Var, AutodiffError> {
    tape.softmax(logits)
}

/// Names of the nine GRU tensors under `prefix` (e.g. `gru_fwd/W_z`).
pub const GRU_TENSORS: [&str; 9] = ["W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h"];

/// Parameter handles for one GRU cell, looked up once per tape.
#[derive(Clone, Copy, Debug)]
pub struct GruWeights {
    pub w_z: Var,
    pub u_z: Var,
    pub b_z: Var,
    pub w_r: Var,
    pub u_r: Var,
    pub b_r: Var,
    pub w_h: Var,
    pub u_h: Var,
    pub b_h: Var,
}

impl GruWeights {
    pub fn load(tape: &mut Tape<'_>, prefix: &str) -> Result<Self, AutodiffError> {
        let mut get = |n: &str| tape.param(&format!("{prefix}{n}"));
        Ok(Self {
            w_z: get("W_z")?,
            u_z: get("U_z")?,
            b_z: get("b_z")?,
            w_r: get("W_r")?,
            u_r: get("U_r")?,
            b_r: get("b_r")?,
            w_h: get("W_h")?,
            u_h: get("U_h")?,
            b_h: get("b_h")?,
        })
    }
}

/// One GRU step:
/// `z = σ(W_z x + U_z h + b_z)`, `r = σ(W_r x + U_r h + b_r)`,
/// `h̃ = tanh(W_h x + U_h (r⊙h) + b_h)`, `h' = (1−z)⊙h + z⊙h̃`.
pub fn gru_cell(tape: &mut Tape<'_>, x: Var, h: Var, w: &GruWeights) -> Result<Var, AutodiffError> {
    let z = tape.affine(&[(w.w_z, x), (w.u_z, h)], w.b_z, Activation::Sigmoid)?;
    let r = tape.affine(&[(w.w_r, x), (w.u_r, h)], w.b_r, Activation::Sigmoid)?;
    let rh = tape.mul(r, h)?;
    let candidate = tape.affine(&[(w.w_h, x), (w.u_h, rh)], w.b_h, Activation::Tanh)?;
    tape.mix(z, h, candidate)
}

/// Glorot-uniform weights in `[−s, s]`, `s = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot(shape: Vec<usize>, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let values = (0..n).map(|_| rng.gen_range(-s..=s)).collect();
    Tensor::new(shape, values).expect("shape matches generated values")
}

/// Inserts a dense layer `prefix/weight` `[n_out, n_in]` and zero `prefix/bias`.
pub fn init_dense(params: &mut ParameterSet, prefix: &str, n_in: usize, n_out: usize, rng: &mut impl Rng) -> Result<(), AutodiffError> {
    params.insert(format!("{prefix}/weight"), glorot(vec![n_out, n_in], n_in, n_out, rng))?;
    params.insert(format!("{prefix}/bias"), Tensor::zeros(vec![n_out]))
}

/// Inserts conv kernels `[k, k, c_in, c_out]` and zero bias.
pub fn init_conv(
    params: &mut ParameterSet,
    prefix: &str,
    kernel: usize,
    c_in: usize,
    c_out: usize,
    rng: &mut impl Rng,
) -> Result<(), AutodiffError> {
    let fan_in = kernel * kernel * c_in;
    let fan_out = kernel * kernel * c_out;
    params.insert(format!("{prefix}/kernel"), glorot(vec![kernel, kernel, c_in, c_out], fan_in, fan_out, rng))?;
    params.insert(format!("{prefix}/bias"), Tensor::zeros(vec![c_out]))
}

/// Inserts the nine GRU tensors under `prefix`.
pub fn init_gru(params: &mut ParameterSet, prefix: &str, d_x: usize, d_h: usize, rng: &mut impl Rng) -> Result<(), AutodiffError> {
    for gate in ["z", "r", "h"] {
        params.insert(format!("{prefix}W_{gate}"), glorot(vec![d_h, d_x], d_x, d_h, rng))?;
        params.insert(format!("{prefix}U_{gate}"), glorot(vec![d_h, d_h], d_h, d_h, rng))?;
        params.insert(format!("{prefix}b_{gate}"), Tensor::zeros(vec![d_h]))?;
    }
    Ok(())
}
