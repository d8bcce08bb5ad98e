//! Reverse-mode tape. Nodes are recorded in evaluation order, so walking
//! them backwards visits every consumer before its inputs.

use std::borrow::Cow;
use std::collections::HashMap;

use super::{AutodiffError, Gradients, ParameterSet, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

impl ConvGeometry {
    /// "Same" zero padding: output extent is `ceil(in / stride)`.
    pub fn same(in_h: usize, in_w: usize, in_c: usize, kernel: usize, stride: usize, out_c: usize) -> Result<Self, AutodiffError> {
        if kernel == 0 || stride == 0 {
            return Err(AutodiffError::Config(format!(
                "conv2d kernel {kernel} and stride {stride} must be positive"
            )));
        }
        let out_h = in_h.div_ceil(stride);
        let out_w = in_w.div_ceil(stride);
        let pad_h = ((out_h - 1) * stride + kernel).saturating_sub(in_h);
        let pad_w = ((out_w - 1) * stride + kernel).saturating_sub(in_w);
        if kernel > in_h + pad_h || kernel > in_w + pad_w {
            return Err(AutodiffError::Config(format!(
                "conv2d kernel {kernel} larger than padded input {}x{}",
                in_h + pad_h,
                in_w + pad_w
            )));
        }
        Ok(Self {
            in_h,
            in_w,
            in_c,
            out_h,
            out_w,
            out_c,
            kernel,
            stride,
            pad_top: pad_h / 2,
            pad_left: pad_w / 2,
        })
    }

    /// Input rows/cols covered by kernel offset `k` for output `o`, if inside.
    #[inline]
    fn src(&self, o: usize, k: usize, pad: usize, extent: usize) -> Option<usize> {
        let pos = (o * self.stride + k) as isize - pad as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Param,
    /// `act(Σ W_t · x_t + b)`
    Affine { terms: Vec<(Var, Var)>, bias: Var, act: Activation },
    Conv2d { input: Var, kernels: Var, bias: Var, geom: ConvGeometry, act: Activation },
    Mul(Var, Var),
    /// `(1 − z)⊙a + z⊙b`
    Mix { gate: Var, a: Var, b: Var },
    Concat(Vec<Var>),
    Reshape(Var),
    Row { table: Var, index: usize, width: usize },
    Softmax { logits: Var },
    MaskFill { input: Var, mask: Vec<bool> },
    WeightedSum { weights: Var, rows: Vec<Var>, scale: f64 },
    Index { input: Var, index: usize },
    Scale { input: Var, factor: f64 },
    SquaredError { input: Var, target: f64 },
    Sum(Vec<Var>),
}

struct Node<'p> {
    shape: Vec<usize>,
    value: Cow<'p, [f64]>,
    op: Op,
    requires_grad: bool,
}

/// Records a computation over tensors and parameters for later backward.
pub struct Tape<'p> {
    params: &'p ParameterSet,
    nodes: Vec<Node<'p>>,
    param_nodes: Vec<(&'p str, Var)>,
    param_cache: HashMap<&'p str, Var>,
}

fn shape_err(op: &'static str, detail: String) -> AutodiffError {
    AutodiffError::Shape { op, detail }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParameterSet) -> Self {
        Self { params, nodes: Vec::new(), param_nodes: Vec::new(), param_cache: HashMap::new() }
    }

    pub fn params(&self) -> &'p ParameterSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn size(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        Tensor::new(self.nodes[v.0].shape.clone(), self.nodes[v.0].value.to_vec()).expect("node shape is consistent")
    }

    fn push(&mut self, shape: Vec<usize>, value: Cow<'p, [f64]>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node { shape, value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Constant input (no gradient flows into it).
    pub fn constant(&mut self, tensor: &Tensor) -> Var {
        self.push(tensor.shape().to_vec(), Cow::Owned(tensor.values().to_vec()), Op::Leaf, false)
    }

    pub fn constant_vec(&mut self, shape: Vec<usize>, values: Vec<f64>) -> Result<Var, AutodiffError> {
        let t = Tensor::new(shape, values)?;
        let shape = t.shape().to_vec();
        Ok(self.push(shape, Cow::Owned(t.into_values()), Op::Leaf, false))
    }

    /// Differentiable leaf backed by the named parameter (borrowed, not copied).
    pub fn param(&mut self, name: &str) -> Result<Var, AutodiffError> {
        if let Some(&v) = self.param_cache.get(name) {
            return Ok(v);
        }
        let params = self.params;
        let (key, tensor) = params
            .iter()
            .find(|(k, _)| *k == name)
            .ok_or_else(|| AutodiffError::UnknownParameter(name.to_string()))?;
        let v = self.push(tensor.shape().to_vec(), Cow::Borrowed(tensor.values()), Op::Param, true);
        self.param_nodes.push((key, v));
        self.param_cache.insert(key, v);
        Ok(v)
    }

    /// `act(Σ_t W_t·x_t + b)`; each `W_t` is `[n_out, n_in_t]`.
    pub fn affine(&mut self, terms: &[(Var, Var)], bias: Var, act: Activation) -> Result<Var, AutodiffError> {
        let b = &self.nodes[bias.0];
        if b.shape.len() != 1 {
            return Err(shape_err("dense", format!("bias must be 1-D, got {:?}", b.shape)));
        }
        let n_out = b.shape[0];
        let mut out = b.value.to_vec();
        for &(w, x) in terms {
            let (wn, xn) = (&self.nodes[w.0], &self.nodes[x.0]);
            let n_in = xn.value.len();
            if wn.shape.len() != 2 || wn.shape[0] != n_out || wn.shape[1] != n_in {
                return Err(shape_err(
                    "dense",
                    format!("weights {:?} incompatible with input {:?} and bias [{}]", wn.shape, xn.shape, n_out),
                ));
            }
            let wv = &wn.value;
            let xv = &xn.value;
            for (o, acc) in out.iter_mut().enumerate() {
                let row = &wv[o * n_in..(o + 1) * n_in];
                *acc += row.iter().zip(xv.iter()).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        out.iter_mut().for_each(|z| *z = act.apply(*z));
        let mut inputs: Vec<Var> = terms.iter().flat_map(|&(w, x)| [w, x]).collect();
        inputs.push(bias);
        let rg = self.rg(&inputs);
        Ok(self.push(vec![n_out], Cow::Owned(out), Op::Affine { terms: terms.to_vec(), bias, act }, rg))
    }

    /// Cross-correlation with "same" zero padding. Input `[H, W, C_in]`,
    /// kernels `[k, k, C_in, C_out]`, bias `[C_out]`.
    pub fn conv2d(&mut self, input: Var, kernels: Var, bias: Var, stride: usize, act: Activation) -> Result<Var, AutodiffError> {
        let (xs, ks, bs) = (&self.nodes[input.0].shape, &self.nodes[kernels.0].shape, &self.nodes[bias.0].shape);
        if xs.len() != 3 || ks.len() != 4 || bs.len() != 1 || ks[0] != ks[1] || ks[2] != xs[2] || ks[3] != bs[0] {
            return Err(shape_err(
                "conv2d",
                format!("input {:?}, kernels {:?}, bias {:?}", xs, ks, bs),
            ));
        }
        let geom = ConvGeometry::same(xs[0], xs[1], xs[2], ks[0], stride, ks[3])?;
        let x = &self.nodes[input.0].value;
        let k = &self.nodes[kernels.0].value;
        let b = &self.nodes[bias.0].value;
        let g = geom;
        let mut out = vec![0.0; g.out_h * g.out_w * g.out_c];
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let base = (oy * g.out_w + ox) * g.out_c;
                let acc = &mut out[base..base + g.out_c];
                acc.copy_from_slice(b);
                for ky in 0..g.kernel {
                    let Some(iy) = g.src(oy, ky, g.pad_top, g.in_h) else { continue };
                    for kx in 0..g.kernel {
                        let Some(ix) = g.src(ox, kx, g.pad_left, g.in_w) else { continue };
                        let xin = &x[(iy * g.in_w + ix) * g.in_c..][..g.in_c];
                        for (ci, &xv) in xin.iter().enumerate() {
                            if xv == 0.0 {
                                continue;
                            }
                            let kb = ((ky * g.kernel + kx) * g.in_c + ci) * g.out_c;
                            let krow = &k[kb..kb + g.out_c];
                            acc.iter_mut().zip(krow).for_each(|(a, kv)| *a += xv * kv);
                        }
                    }
                }
                acc.iter_mut().for_each(|z| *z = act.apply(*z));
            }
        }
        let rg = self.rg(&[input, kernels, bias]);
        Ok(self.push(
            vec![g.out_h, g.out_w, g.out_c],
            Cow::Owned(out),
            Op::Conv2d { input, kernels, bias, geom, act },
            rg,
        ))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), AutodiffError> {
        if self.nodes[a.0].value.len() != self.nodes[b.0].value.len() {
            return Err(shape_err(op, format!("{:?} vs {:?}", self.nodes[a.0].shape, self.nodes[b.0].shape)));
        }
        Ok(())
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("mul", a, b)?;
        let out: Vec<f64> = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        let rg = self.rg(&[a, b]);
        Ok(self.push(self.nodes[a.0].shape.clone(), Cow::Owned(out), Op::Mul(a, b), rg))
    }

    /// Elementwise `(1 − gate)⊙a + gate⊙b`.
    pub fn mix(&mut self, gate: Var, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("mix", gate, a)?;
        self.same_shape("mix", gate, b)?;
        let (z, av, bv) = (self.value(gate), self.value(a), self.value(b));
        let out: Vec<f64> = (0..z.len()).map(|i| (1.0 - z[i]) * av[i] + z[i] * bv[i]).collect();
        let rg = self.rg(&[gate, a, b]);
        Ok(self.push(self.nodes[a.0].shape.clone(), Cow::Owned(out), Op::Mix { gate, a, b }, rg))
    }

    /// Flat concatenation of the inputs' values.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        if parts.is_empty() {
            return Err(shape_err("concat", "no inputs".into()));
        }
        let mut out = Vec::with_capacity(parts.iter().map(|&p| self.size(p)).sum());
        for &p in parts {
            out.extend_from_slice(self.value(p));
        }
        let rg = self.rg(parts);
        Ok(self.push(vec![out.len()], Cow::Owned(out), Op::Concat(parts.to_vec()), rg))
    }

    pub fn reshape(&mut self, input: Var, shape: Vec<usize>) -> Result<Var, AutodiffError> {
        if shape.iter().product::<usize>() != self.size(input) {
            return Err(shape_err("reshape", format!("{:?} -> {:?}", self.shape(input), shape)));
        }
        let value = self.nodes[input.0].value.clone();
        let rg = self.rg(&[input]);
        Ok(self.push(shape, value, Op::Reshape(input), rg))
    }

    /// Row `index` of a 2-D table (embedding lookup).
    pub fn row(&mut self, table: Var, index: usize) -> Result<Var, AutodiffError> {
        let shape = &self.nodes[table.0].shape;
        if shape.len() != 2 || index >= shape[0] {
            return Err(shape_err("row", format!("row {index} of table {:?}", shape)));
        }
        let width = shape[1];
        let out = self.value(table)[index * width..(index + 1) * width].to_vec();
        let rg = self.rg(&[table]);
        Ok(self.push(vec![width], Cow::Owned(out), Op::Row { table, index, width }, rg))
    }

    /// Max-subtracted softmax. Entries equal to −∞ receive probability 0.
    pub fn softmax(&mut self, logits: Var) -> Result<Var, AutodiffError> {
        let out = softmax_values(self.value(logits))?;
        let rg = self.rg(&[logits]);
        Ok(self.push(self.nodes[logits.0].shape.clone(), Cow::Owned(out), Op::Softmax { logits }, rg))
    }

    /// Replaces positions where `mask` is true with −∞.
    pub fn mask_fill_neg_inf(&mut self, input: Var, mask: &[bool]) -> Result<Var, AutodiffError> {
        if mask.len() != self.size(input) {
            return Err(shape_err("mask_fill", format!("mask {} vs input {}", mask.len(), self.size(input))));
        }
        let out: Vec<f64> = self
            .value(input)
            .iter()
            .zip(mask)
            .map(|(&v, &m)| if m { f64::NEG_INFINITY } else { v })
            .collect();
        let rg = self.rg(&[input]);
        Ok(self.push(
            self.nodes[input.0].shape.clone(),
            Cow::Owned(out),
            Op::MaskFill { input, mask: mask.to_vec() },
            rg,
        ))
    }

    /// `scale · Σ_i weights[i] · rows[i]`.
    pub fn weighted_sum(&mut self, weights: Var, rows: &[Var], scale: f64) -> Result<Var, AutodiffError> {
        if rows.is_empty() || self.size(weights) != rows.len() {
            return Err(shape_err(
                "weighted_sum",
                format!("{} weights for {} rows", self.size(weights), rows.len()),
            ));
        }
        let d = self.size(rows[0]);
        let mut out = vec![0.0; d];
        for (i, &r) in rows.iter().enumerate() {
            if self.size(r) != d {
                return Err(shape_err("weighted_sum", format!("row {i} has length {} not {d}", self.size(r))));
            }
            let w = self.value(weights)[i];
            out.iter_mut().zip(self.value(r)).for_each(|(o, v)| *o += w * v);
        }
        out.iter_mut().for_each(|o| *o *= scale);
        let mut inputs = rows.to_vec();
        inputs.push(weights);
        let rg = self.rg(&inputs);
        Ok(self.push(vec![d], Cow::Owned(out), Op::WeightedSum { weights, rows: rows.to_vec(), scale }, rg))
    }

    pub fn index(&mut self, input: Var, index: usize) -> Result<Var, AutodiffError> {
        if index >= self.size(input) {
            return Err(shape_err("index", format!("{index} out of {}", self.size(input))));
        }
        let out = vec![self.value(input)[index]];
        let rg = self.rg(&[input]);
        Ok(self.push(vec![1], Cow::Owned(out), Op::Index { input, index }, rg))
    }

    pub fn scale(&mut self, input: Var, factor: f64) -> Var {
        let out: Vec<f64> = self.value(input).iter().map(|v| v * factor).collect();
        let rg = self.rg(&[input]);
        self.push(self.nodes[input.0].shape.clone(), Cow::Owned(out), Op::Scale { input, factor }, rg)
    }

    /// Scalar `Σ (target − x)²`.
    pub fn squared_error(&mut self, input: Var, target: f64) -> Var {
        let out = self.value(input).iter().map(|v| (target - v).powi(2)).sum();
        let rg = self.rg(&[input]);
        self.push(vec![1], Cow::Owned(vec![out]), Op::SquaredError { input, target }, rg)
    }

    /// Elementwise sum of same-shaped inputs.
    pub fn sum(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let first = *parts.first().ok_or_else(|| shape_err("sum", "no inputs".into()))?;
        let mut out = self.value(first).to_vec();
        for &p in &parts[1..] {
            self.same_shape("sum", first, p)?;
            out.iter_mut().zip(self.value(p)).for_each(|(o, v)| *o += v);
        }
        let rg = self.rg(parts);
        Ok(self.push(self.nodes[first.0].shape.clone(), Cow::Owned(out), Op::Sum(parts.to_vec()), rg))
    }

    /// Sum of all elements of `output`, differentiated with respect to every
    /// parameter reached. Seeds `∂output/∂output = 1`.
    pub fn backward(&self, output: Var) -> Gradients {
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(vec![1.0; self.size(output)]);
        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(dy) = grads[idx].take() else { continue };
            self.backprop_node(node, &dy, &mut grads);
            if let Op::Param = node.op {
                grads[idx] = Some(dy);
            }
        }
        let mut out = Gradients::new();
        for &(name, v) in &self.param_nodes {
            let g = grads[v.0].take().unwrap_or_else(|| vec![0.0; self.size(v)]);
            out.insert(name, g);
        }
        out
    }

    fn backprop_node(&self, node: &Node<'p>, dy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        macro_rules! slot {
            ($v:expr) => {{
                let n = self.size($v);
                grads[$v.0].get_or_insert_with(|| vec![0.0; n])
            }};
        }
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::Affine { terms, bias, act } => {
                let y = &node.value;
                let dz: Vec<f64> = dy.iter().zip(y.iter()).map(|(d, &yv)| d * act.derivative_from_output(yv)).collect();
                if needs(*bias) {
                    slot!(*bias).iter_mut().zip(&dz).for_each(|(g, d)| *g += d);
                }
                for &(w, x) in terms {
                    let n_in = self.size(x);
                    if needs(w) {
                        let xv = self.value(x);
                        let gw = slot!(w);
                        for (o, &d) in dz.iter().enumerate() {
                            if d == 0.0 {
                                continue;
                            }
                            gw[o * n_in..(o + 1) * n_in].iter_mut().zip(xv).for_each(|(g, xi)| *g += d * xi);
                        }
                    }
                    if needs(x) {
                        let wv = self.value(w);
                        let gx = slot!(x);
                        for (o, &d) in dz.iter().enumerate() {
                            if d == 0.0 {
                                continue;
                            }
                            gx.iter_mut().zip(&wv[o * n_in..(o + 1) * n_in]).for_each(|(g, wi)| *g += d * wi);
                        }
                    }
                }
            }
            Op::Conv2d { input, kernels, bias, geom: g, act } => {
                let y = &node.value;
                let dz: Vec<f64> = dy.iter().zip(y.iter()).map(|(d, &yv)| d * act.derivative_from_output(yv)).collect();
                if needs(*bias) {
                    let gb = slot!(*bias);
                    for chunk in dz.chunks(g.out_c) {
                        gb.iter_mut().zip(chunk).for_each(|(a, d)| *a += d);
                    }
                }
                let x = self.value(*input);
                let k = self.value(*kernels);
                let need_k = needs(*kernels);
                let need_x = needs(*input);
                let mut gk = need_k.then(|| vec![0.0; k.len()]);
                let mut gx = need_x.then(|| vec![0.0; x.len()]);
                for oy in 0..g.out_h {
                    for ox in 0..g.out_w {
                        let d = &dz[(oy * g.out_w + ox) * g.out_c..][..g.out_c];
                        if d.iter().all(|&v| v == 0.0) {
                            continue;
                        }
                        for ky in 0..g.kernel {
                            let Some(iy) = g.src(oy, ky, g.pad_top, g.in_h) else { continue };
                            for kx in 0..g.kernel {
                                let Some(ix) = g.src(ox, kx, g.pad_left, g.in_w) else { continue };
                                let xb = (iy * g.in_w + ix) * g.in_c;
                                for ci in 0..g.in_c {
                                    let kb = ((ky * g.kernel + kx) * g.in_c + ci) * g.out_c;
                                    if let Some(gk) = gk.as_mut() {
                                        let xv = x[xb + ci];
                                        if xv != 0.0 {
                                            gk[kb..kb + g.out_c].iter_mut().zip(d).for_each(|(a, dv)| *a += xv * dv);
                                        }
                                    }
                                    if let Some(gx) = gx.as_mut() {
                                        gx[xb + ci] += k[kb..kb + g.out_c].iter().zip(d).map(|(a, b)| a * b).sum::<f64>();
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(gk) = gk {
                    slot!(*kernels).iter_mut().zip(&gk).for_each(|(a, b)| *a += b);
                }
                if let Some(gx) = gx {
                    slot!(*input).iter_mut().zip(&gx).for_each(|(a, b)| *a += b);
                }
            }
            Op::Mul(a, b) => {
                if needs(*a) {
                    let bv = self.value(*b).to_vec();
                    slot!(*a).iter_mut().zip(dy.iter().zip(&bv)).for_each(|(g, (d, v))| *g += d * v);
                }
                if needs(*b) {
                    let av = self.value(*a).to_vec();
                    slot!(*b).iter_mut().zip(dy.iter().zip(&av)).for_each(|(g, (d, v))| *g += d * v);
                }
            }
            Op::Mix { gate, a, b } => {
                let z = self.value(*gate).to_vec();
                if needs(*gate) {
                    let (av, bv) = (self.value(*a).to_vec(), self.value(*b).to_vec());
                    let gz = slot!(*gate);
                    for i in 0..dy.len() {
                        gz[i] += dy[i] * (bv[i] - av[i]);
                    }
                }
                if needs(*a) {
                    let ga = slot!(*a);
                    for i in 0..dy.len() {
                        ga[i] += dy[i] * (1.0 - z[i]);
                    }
                }
                if needs(*b) {
                    let gb = slot!(*b);
                    for i in 0..dy.len() {
                        gb[i] += dy[i] * z[i];
                    }
                }
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = self.size(p);
                    if needs(p) {
                        slot!(p).iter_mut().zip(&dy[off..off + n]).for_each(|(g, d)| *g += d);
                    }
                    off += n;
                }
            }
            Op::Reshape(input) | Op::Scale { input, .. } | Op::MaskFill { input, .. } if !needs(*input) => {}
            Op::Reshape(input) => {
                slot!(*input).iter_mut().zip(dy).for_each(|(g, d)| *g += d);
            }
            Op::Scale { input, factor } => {
                slot!(*input).iter_mut().zip(dy).for_each(|(g, d)| *g += d * factor);
            }
            Op::MaskFill { input, mask } => {
                slot!(*input)
                    .iter_mut()
                    .zip(dy.iter().zip(mask))
                    .for_each(|(g, (d, &m))| if !m { *g += d });
            }
            Op::Row { table, index, width } => {
                if needs(*table) {
                    slot!(*table)[index * width..(index + 1) * width]
                        .iter_mut()
                        .zip(dy)
                        .for_each(|(g, d)| *g += d);
                }
            }
            Op::Softmax { logits } => {
                if needs(*logits) {
                    let y = &node.value;
                    let dot: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
                    slot!(*logits).iter_mut().zip(y.iter().zip(dy)).for_each(|(g, (yi, di))| *g += yi * (di - dot));
                }
            }
            Op::WeightedSum { weights, rows, scale } => {
                if needs(*weights) {
                    let dw: Vec<f64> = rows
                        .iter()
                        .map(|&r| scale * self.value(r).iter().zip(dy).map(|(a, b)| a * b).sum::<f64>())
                        .collect();
                    slot!(*weights).iter_mut().zip(&dw).for_each(|(g, d)| *g += d);
                }
                let w = self.value(*weights).to_vec();
                for (i, &r) in rows.iter().enumerate() {
                    if needs(r) {
                        let f = scale * w[i];
                        slot!(r).iter_mut().zip(dy).for_each(|(g, d)| *g += f * d);
                    }
                }
            }
            Op::Index { input, index } => {
                if needs(*input) {
                    slot!(*input)[*index] += dy[0];
                }
            }
            Op::SquaredError { input, target } => {
                if needs(*input) {
                    let xv = self.value(*input).to_vec();
                    slot!(*input).iter_mut().zip(&xv).for_each(|(g, x)| *g += dy[0] * 2.0 * (x - target));
                }
            }
            Op::Sum(parts) => {
                for &p in parts {
                    if needs(p) {
                        slot!(p).iter_mut().zip(dy).for_each(|(g, d)| *g += d);
                    }
                }
            }
        }
    }
}

/// Softmax over a slice; −∞ entries map to 0. Errors on empty or all-masked input.
pub fn softmax_values(logits: &[f64]) -> Result<Vec<f64>, AutodiffError> {
    if logits.is_empty() {
        return Err(AutodiffError::Config("softmax of empty input".into()));
    }
    let max = logits.iter().copied().filter(|v| *v != f64::NEG_INFINITY).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(AutodiffError::Config("softmax over fully masked input".into()));
    }
    let exps: Vec<f64> = logits
        .iter()
        .map(|&v| if v == f64::NEG_INFINITY { 0.0 } else { (v - max).exp() })
        .collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}
