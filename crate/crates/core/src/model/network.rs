use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ArchitectureConfig, ModelError, QNetwork};
use crate::autodiff::layers::{glorot, init_conv, init_dense, init_gru};
use crate::autodiff::{gru_cell, Activation, GruWeights, ParameterSet, Tape, Tensor, Var};
use crate::lang::PAD;
use crate::world::Observation;

/// Handles for the bi-GRU outputs of one instruction.
#[derive(Clone, Debug)]
pub struct InstructionEncoding {
    pub h_f: Var,
    pub h_b: Var,
    /// One `[o_F o_B]` row per token; PAD rows are constant zeros.
    pub outputs: Vec<Var>,
    /// `true` at PAD positions.
    pub pad_mask: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct AttentionVars {
    /// Scores after PAD positions are set to −∞.
    pub scores: Var,
    pub alpha: Var,
    pub v_a: Var,
}

/// Every intermediate of one forward pass, as tape handles.
#[derive(Clone, Debug)]
pub struct ForwardVars {
    pub v_s: Var,
    pub v_d: Var,
    pub instruction: InstructionEncoding,
    pub attention: Option<AttentionVars>,
    pub v_l: Var,
    pub q: Var,
}

/// Materialised intermediates for analysis and export. Attention fields are
/// empty in baseline mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub v_s: Vec<f64>,
    pub v_d: Vec<f64>,
    pub h_f: Vec<f64>,
    pub h_b: Vec<f64>,
    pub o: Vec<Vec<f64>>,
    pub e: Vec<f64>,
    pub alpha: Vec<f64>,
    pub v_a: Vec<f64>,
    pub v_l: Vec<f64>,
    pub q: Vec<f64>,
}

/// The instruction-following Q-network. Holds only the architecture;
/// parameters live in a separate [`ParameterSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct FollowNet {
    config: ArchitectureConfig,
}

impl FollowNet {
    pub fn new(config: ArchitectureConfig) -> Result<Self, ModelError> {
        config.validate()?;
        config.semantic_output_shape()?;
        config.depth_output_shape()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &ArchitectureConfig {
        &self.config
    }

    /// Glorot-uniform weights, zero biases, seeded.
    pub fn init_params(&self, seed: u64) -> Result<ParameterSet, ModelError> {
        let c = &self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParameterSet::new();
        let mut c_in = c.num_classes;
        for i in 0..c.semantic_channels.len() {
            init_conv(&mut p, &format!("sem_conv{i}"), c.semantic_kernels[i], c_in, c.semantic_channels[i], &mut rng)?;
            c_in = c.semantic_channels[i];
        }
        let (h, w, ch) = c.semantic_output_shape()?;
        init_dense(&mut p, "sem_dense", h * w * ch, c.semantic_dim, &mut rng)?;
        let mut c_in = 1;
        for i in 0..c.depth_channels.len() {
            init_conv(&mut p, &format!("depth_conv{i}"), c.depth_kernels[i], c_in, c.depth_channels[i], &mut rng)?;
            c_in = c.depth_channels[i];
        }
        let (h, w, ch) = c.depth_output_shape()?;
        init_dense(&mut p, "depth_dense", h * w * ch, c.depth_dim, &mut rng)?;
        p.insert("embedding", glorot(vec![c.vocab_size, c.embed_dim], c.vocab_size, c.embed_dim, &mut rng))?;
        init_gru(&mut p, "gru_fwd/", c.embed_dim, c.gru_dim, &mut rng)?;
        init_gru(&mut p, "gru_bwd/", c.embed_dim, c.gru_dim, &mut rng)?;
        if c.attention {
            let (a, ctx, o) = (c.attention_hidden, c.context_dim(), 2 * c.gru_dim);
            p.insert("attn_hidden/context", glorot(vec![a, ctx], ctx + o, a, &mut rng))?;
            p.insert("attn_hidden/token", glorot(vec![a, o], ctx + o, a, &mut rng))?;
            p.insert("attn_hidden/bias", Tensor::zeros(vec![a]))?;
            init_dense(&mut p, "attn_score", a, 1, &mut rng)?;
        }
        init_dense(&mut p, "lang", 2 * c.gru_dim, c.gru_dim, &mut rng)?;
        let mut width = c.semantic_dim + c.depth_dim + c.gru_dim;
        for (i, &hdim) in c.q_hidden.iter().enumerate() {
            init_dense(&mut p, &format!("q_hidden{i}"), width, hdim, &mut rng)?;
            width = hdim;
        }
        init_dense(&mut p, "q_out", width, c.num_actions, &mut rng)?;
        Ok(p)
    }

    fn dense(tape: &mut Tape<'_>, prefix: &str, x: Var, act: Activation) -> Result<Var, ModelError> {
        let w = tape.param(&format!("{prefix}/weight"))?;
        let b = tape.param(&format!("{prefix}/bias"))?;
        Ok(tape.affine(&[(w, x)], b, act)?)
    }

    fn conv_stack(tape: &mut Tape<'_>, prefix: &str, mut x: Var, strides: &[usize]) -> Result<Var, ModelError> {
        for (i, &s) in strides.iter().enumerate() {
            let k = tape.param(&format!("{prefix}{i}/kernel"))?;
            let b = tape.param(&format!("{prefix}{i}/bias"))?;
            x = tape.conv2d(x, k, b, s, Activation::Relu)?;
        }
        Ok(x)
    }

    /// Semantic branch: ReLU conv stack, flatten, linear dense to `d_S`.
    /// Input is a one-hot `[H, W, C]` image.
    pub fn encode_semantic(&self, tape: &mut Tape<'_>, semantic: &Tensor) -> Result<Var, ModelError> {
        let c = &self.config;
        let expect = [c.image_height, c.image_width, c.num_classes];
        if semantic.shape() != expect {
            return Err(ModelError::Config(format!("semantic image {:?} does not match {:?}", semantic.shape(), expect)));
        }
        let x = tape.constant(semantic);
        let x = Self::conv_stack(tape, "sem_conv", x, &c.semantic_strides)?;
        let n = tape.size(x);
        let flat = tape.reshape(x, vec![n])?;
        Self::dense(tape, "sem_dense", flat, Activation::Identity)
    }

    /// Depth branch over an `[H, W]` image with values in `[0, 1]`.
    pub fn encode_depth(&self, tape: &mut Tape<'_>, depth: &Tensor) -> Result<Var, ModelError> {
        let c = &self.config;
        if depth.shape() != [c.image_height, c.image_width] {
            return Err(ModelError::Config(format!(
                "depth image {:?} does not match [{}, {}]",
                depth.shape(),
                c.image_height,
                c.image_width
            )));
        }
        if let Some(v) = depth.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ModelError::Validation(format!("depth value {v} outside [0, 1]")));
        }
        let x = tape.constant_vec(vec![c.image_height, c.image_width, 1], depth.values().to_vec())?;
        let x = Self::conv_stack(tape, "depth_conv", x, &c.depth_strides)?;
        let n = tape.size(x);
        let flat = tape.reshape(x, vec![n])?;
        Self::dense(tape, "depth_dense", flat, Activation::Identity)
    }

    /// Embeds the tokens and runs the forward GRU left-to-right and the
    /// backward GRU right-to-left over the non-PAD positions, both from zero
    /// state.
    pub fn encode_instruction(&self, tape: &mut Tape<'_>, tokens: &[u32]) -> Result<InstructionEncoding, ModelError> {
        let c = &self.config;
        if tokens.is_empty() {
            return Err(ModelError::Validation("empty instruction".into()));
        }
        if tokens.len() > c.max_tokens {
            return Err(ModelError::Validation(format!("{} tokens exceed the limit of {}", tokens.len(), c.max_tokens)));
        }
        if let Some(t) = tokens.iter().find(|&&t| t as usize >= c.vocab_size) {
            return Err(ModelError::Validation(format!("token id {t} outside vocabulary of {}", c.vocab_size)));
        }
        let pad_mask: Vec<bool> = tokens.iter().map(|&t| t == PAD).collect();
        let real: Vec<usize> = (0..tokens.len()).filter(|&i| !pad_mask[i]).collect();
        if real.is_empty() {
            return Err(ModelError::Validation("instruction contains only padding".into()));
        }
        let table = tape.param("embedding")?;
        let mut embedded = Vec::with_capacity(real.len());
        for &i in &real {
            embedded.push(tape.row(table, tokens[i] as usize)?);
        }
        let fwd = GruWeights::load(tape, "gru_fwd/")?;
        let bwd = GruWeights::load(tape, "gru_bwd/")?;
        let zero = tape.constant_vec(vec![c.gru_dim], vec![0.0; c.gru_dim])?;
        let mut h = zero;
        let mut out_f = Vec::with_capacity(real.len());
        for &x in &embedded {
            h = gru_cell(tape, x, h, &fwd)?;
            out_f.push(h);
        }
        let h_f = h;
        let mut h = zero;
        let mut out_b = vec![zero; real.len()];
        for j in (0..real.len()).rev() {
            h = gru_cell(tape, embedded[j], h, &bwd)?;
            out_b[j] = h;
        }
        let h_b = h;
        let pad_row = tape.constant_vec(vec![2 * c.gru_dim], vec![0.0; 2 * c.gru_dim])?;
        let mut outputs = vec![pad_row; tokens.len()];
        for (j, &i) in real.iter().enumerate() {
            outputs[i] = tape.concat(&[out_f[j], out_b[j]])?;
        }
        Ok(InstructionEncoding { h_f, h_b, outputs, pad_mask })
    }

    /// Scores each token with a shared feed-forward net over `[v_C, o_i]`,
    /// softmaxes over non-PAD positions and averages `α_i o_i` over the
    /// real token count.
    pub fn attend(&self, tape: &mut Tape<'_>, v_s: Var, v_d: Var, enc: &InstructionEncoding) -> Result<AttentionVars, ModelError> {
        let k_real = enc.pad_mask.iter().filter(|&&m| !m).count();
        if k_real == 0 {
            return Err(ModelError::Validation("attention over padding only".into()));
        }
        let v_c = tape.concat(&[v_s, v_d, enc.h_b, enc.h_f])?;
        let w_ctx = tape.param("attn_hidden/context")?;
        let w_tok = tape.param("attn_hidden/token")?;
        let b_hid = tape.param("attn_hidden/bias")?;
        let w_score = tape.param("attn_score/weight")?;
        let b_score = tape.param("attn_score/bias")?;
        let shared = tape.affine(&[(w_ctx, v_c)], b_hid, Activation::Identity)?;
        let pad_score = tape.constant_vec(vec![1], vec![0.0])?;
        let mut scores = Vec::with_capacity(enc.outputs.len());
        for (i, &o) in enc.outputs.iter().enumerate() {
            if enc.pad_mask[i] {
                scores.push(pad_score);
                continue;
            }
            let hidden = tape.affine(&[(w_tok, o)], shared, Activation::Tanh)?;
            scores.push(tape.affine(&[(w_score, hidden)], b_score, Activation::Identity)?);
        }
        let mut e = tape.concat(&scores)?;
        if k_real < enc.pad_mask.len() {
            e = tape.mask_fill_neg_inf(e, &enc.pad_mask)?;
        }
        let alpha = tape.softmax(e)?;
        let v_a = tape.weighted_sum(alpha, &enc.outputs, 1.0 / k_real as f64)?;
        Ok(AttentionVars { scores: e, alpha, v_a })
    }

    /// Full forward pass on `tape`.
    pub fn forward(&self, tape: &mut Tape<'_>, obs: &Observation) -> Result<ForwardVars, ModelError> {
        let c = &self.config;
        if obs.num_classes != c.num_classes {
            return Err(ModelError::Config(format!(
                "observation has {} classes, network expects {}",
                obs.num_classes, c.num_classes
            )));
        }
        if (obs.height, obs.width) != (c.image_height, c.image_width) {
            return Err(ModelError::Config(format!(
                "observation is {}x{}, network expects {}x{}",
                obs.width, obs.height, c.image_width, c.image_height
            )));
        }
        let v_s = self.encode_semantic(tape, &obs.semantic())?;
        let v_d = self.encode_depth(tape, &obs.depth_tensor())?;
        let instruction = self.encode_instruction(tape, &obs.tokens)?;
        let (attention, lang_in) = if c.attention {
            let att = self.attend(tape, v_s, v_d, &instruction)?;
            let v_a = att.v_a;
            (Some(att), v_a)
        } else {
            (None, tape.concat(&[instruction.h_f, instruction.h_b])?)
        };
        let v_l = Self::dense(tape, "lang", lang_in, Activation::Identity)?;
        let mut x = tape.concat(&[v_s, v_d, v_l])?;
        for i in 0..c.q_hidden.len() {
            x = Self::dense(tape, &format!("q_hidden{i}"), x, Activation::Relu)?;
        }
        let q = Self::dense(tape, "q_out", x, Activation::Identity)?;
        Ok(ForwardVars { v_s, v_d, instruction, attention, v_l, q })
    }

    /// Q-values plus a full trace of the intermediates.
    pub fn q_values(&self, params: &ParameterSet, obs: &Observation) -> Result<(Vec<f64>, ForwardTrace), ModelError> {
        let mut tape = Tape::new(params);
        let f = self.forward(&mut tape, obs)?;
        let get = |v: Var| tape.value(v).to_vec();
        let (e, alpha, v_a) = match &f.attention {
            Some(a) => (get(a.scores), get(a.alpha), get(a.v_a)),
            None => (vec![], vec![], vec![]),
        };
        let trace = ForwardTrace {
            v_s: get(f.v_s),
            v_d: get(f.v_d),
            h_f: get(f.instruction.h_f),
            h_b: get(f.instruction.h_b),
            o: f.instruction.outputs.iter().map(|&v| get(v)).collect(),
            e,
            alpha,
            v_a,
            v_l: get(f.v_l),
            q: get(f.q),
        };
        Ok((trace.q.clone(), trace))
    }
}

impl QNetwork<Observation> for FollowNet {
    fn num_actions(&self) -> usize {
        self.config.num_actions
    }

    fn q_forward(&self, tape: &mut Tape<'_>, obs: &Observation) -> Result<Var, ModelError> {
        Ok(self.forward(tape, obs)?.q)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn greedy_action(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate() {
        if v > q[best] {
            best = i;
        }
    }
    best
}
