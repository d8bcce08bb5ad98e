use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::autodiff::ConvGeometry;

/// Parameter count of [`ArchitectureConfig::default`], tallied by hand
/// layer by layer.
pub const DEFAULT_PARAM_COUNT: usize = 223_063;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchitectureConfig {
    pub image_height: usize,
    pub image_width: usize,
    pub num_classes: usize,
    pub vocab_size: usize,
    pub max_tokens: usize,
    pub semantic_channels: Vec<usize>,
    pub semantic_kernels: Vec<usize>,
    pub semantic_strides: Vec<usize>,
    pub depth_channels: Vec<usize>,
    pub depth_kernels: Vec<usize>,
    pub depth_strides: Vec<usize>,
    pub embed_dim: usize,
    /// GRU state size per direction.
    pub gru_dim: usize,
    pub semantic_dim: usize,
    pub depth_dim: usize,
    pub attention_hidden: usize,
    pub q_hidden: Vec<usize>,
    pub num_actions: usize,
    /// `false` selects the baseline language branch `v_L = FF_L([h_F h_B])`.
    pub attention: bool,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        Self {
            image_height: 24,
            image_width: 32,
            num_classes: 16,
            vocab_size: 128,
            max_tokens: 64,
            semantic_channels: vec![3, 8, 16],
            semantic_kernels: vec![1, 4, 3],
            semantic_strides: vec![1, 2, 1],
            depth_channels: vec![8, 16],
            depth_kernels: vec![4, 3],
            depth_strides: vec![2, 1],
            embed_dim: 32,
            gru_dim: 32,
            semantic_dim: 32,
            depth_dim: 32,
            attention_hidden: 16,
            q_hidden: vec![16, 8],
            num_actions: 3,
            attention: true,
        }
    }
}

/// Output shape of a conv stack over an `[h, w, c]` input.
fn conv_stack_shape(
    mut shape: (usize, usize, usize),
    channels: &[usize],
    kernels: &[usize],
    strides: &[usize],
) -> Result<(usize, usize, usize), ModelError> {
    for i in 0..channels.len() {
        let g = ConvGeometry::same(shape.0, shape.1, shape.2, kernels[i], strides[i], channels[i])?;
        shape = (g.out_h, g.out_w, g.out_c);
    }
    Ok(shape)
}

impl ArchitectureConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let scalars = [
            ("image_height", self.image_height),
            ("image_width", self.image_width),
            ("num_classes", self.num_classes),
            ("vocab_size", self.vocab_size),
            ("max_tokens", self.max_tokens),
            ("embed_dim", self.embed_dim),
            ("gru_dim", self.gru_dim),
            ("semantic_dim", self.semantic_dim),
            ("depth_dim", self.depth_dim),
            ("attention_hidden", self.attention_hidden),
            ("num_actions", self.num_actions),
        ];
        for (name, v) in scalars {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be positive")));
            }
        }
        if self.vocab_size < 2 {
            return Err(ModelError::Config("vocab_size must cover PAD and UNK".into()));
        }
        for (name, ch, k, s) in [
            ("semantic", &self.semantic_channels, &self.semantic_kernels, &self.semantic_strides),
            ("depth", &self.depth_channels, &self.depth_kernels, &self.depth_strides),
        ] {
            if ch.is_empty() || ch.len() != k.len() || ch.len() != s.len() {
                return Err(ModelError::Config(format!("{name} conv layout needs matching non-empty channel, kernel and stride lists")));
            }
            if ch.iter().chain(k).chain(s).any(|&v| v == 0) {
                return Err(ModelError::Config(format!("{name} conv layout entries must be positive")));
            }
        }
        if self.q_hidden.iter().any(|&v| v == 0) {
            return Err(ModelError::Config("q_hidden entries must be positive".into()));
        }
        Ok(())
    }

    pub fn semantic_output_shape(&self) -> Result<(usize, usize, usize), ModelError> {
        conv_stack_shape(
            (self.image_height, self.image_width, self.num_classes),
            &self.semantic_channels,
            &self.semantic_kernels,
            &self.semantic_strides,
        )
    }

    pub fn depth_output_shape(&self) -> Result<(usize, usize, usize), ModelError> {
        conv_stack_shape((self.image_height, self.image_width, 1), &self.depth_channels, &self.depth_kernels, &self.depth_strides)
    }

    /// Width of `v_C = [v_S v_D h_B h_F]`.
    pub fn context_dim(&self) -> usize {
        self.semantic_dim + self.depth_dim + 2 * self.gru_dim
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> Result<usize, ModelError> {
        self.validate()?;
        let conv = |c_in: usize, ch: &[usize], k: &[usize]| {
            let mut c_in = c_in;
            let mut n = 0;
            for i in 0..ch.len() {
                n += k[i] * k[i] * c_in * ch[i] + ch[i];
                c_in = ch[i];
            }
            n
        };
        let dense = |i: usize, o: usize| i * o + o;
        let (sh, sw, sc) = self.semantic_output_shape()?;
        let (dh, dw, dc) = self.depth_output_shape()?;
        let l = self.gru_dim;
        let mut n = conv(self.num_classes, &self.semantic_channels, &self.semantic_kernels)
            + dense(sh * sw * sc, self.semantic_dim)
            + conv(1, &self.depth_channels, &self.depth_kernels)
            + dense(dh * dw * dc, self.depth_dim)
            + self.vocab_size * self.embed_dim
            + 2 * 3 * (l * self.embed_dim + l * l + l)
            + dense(2 * l, l);
        if self.attention {
            n += dense(self.context_dim() + 2 * l, self.attention_hidden) + dense(self.attention_hidden, 1);
        }
        let mut width = self.semantic_dim + self.depth_dim + l;
        for &h in &self.q_hidden {
            n += dense(width, h);
            width = h;
        }
        n += dense(width, self.num_actions);
        Ok(n)
    }
}
