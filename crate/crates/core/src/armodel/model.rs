//! Decoder-only transformer over latent tokens with optional per-layer
//! cross-attention to a conditioning token sequence.
//!
//! Layer layout: self-attention, cross-attention (conditional models only),
//! feed-forward; each sublayer is pre-layer-normalized with a residual
//! connection. A begin-of-sequence symbol (index `vocab`) is prepended so
//! position 0 is predictable; logits cover the `vocab` real tokens only.

use ndarray::{Array2, ArrayD, Ix2};
use serde::{Deserialize, Serialize};

use super::attention::favor_projection;
use crate::anomaly::TokenSequence;
use crate::diffcore::{init, Graph, Var};
use crate::error::{CoreError, Result};
use crate::io::ckpt::ParamSet;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttnBackend {
    Exact,
    Favor { m: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArConfig {
    pub layers: usize,
    pub heads: usize,
    pub dim: usize,
    /// Main token vocabulary M; the model adds one BOS symbol internally.
    pub vocab: usize,
    /// Conditioning vocabulary; `None` builds an unconditional model.
    pub cond_vocab: Option<usize>,
    /// Longest main token sequence the model accepts.
    pub max_len: usize,
    pub max_cond_len: usize,
    pub backend: AttnBackend,
    pub lr: f64,
    pub gamma: f64,
    /// Seed for FAVOR+ projections (ignored by the exact backend).
    pub favor_seed: u64,
}

impl ArConfig {
    /// Small configuration used throughout the end-to-end study.
    pub fn desk(vocab: usize, cond_vocab: Option<usize>, max_len: usize, max_cond_len: usize) -> Self {
        ArConfig {
            layers: 4,
            heads: 4,
            dim: 128,
            vocab,
            cond_vocab,
            max_len,
            max_cond_len,
            backend: AttnBackend::Exact,
            lr: 1e-3,
            gamma: 0.9999,
            favor_seed: 0,
        }
    }

    /// The full-scale preset: 16 layers, 8 heads, embedding size 256.
    pub fn paper_scale(vocab: usize, cond_vocab: Option<usize>, max_len: usize, max_cond_len: usize) -> Self {
        ArConfig {
            layers: 16,
            heads: 8,
            dim: 256,
            ..ArConfig::desk(vocab, cond_vocab, max_len, max_cond_len)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim % self.heads != 0 {
            return Err(CoreError::Config(format!(
                "embedding size {} not divisible by {} heads",
                self.dim, self.heads
            )));
        }
        if self.vocab == 0 || self.layers == 0 || self.max_len == 0 {
            return Err(CoreError::Config("degenerate transformer config".into()));
        }
        if let AttnBackend::Favor { m } = self.backend {
            if m == 0 {
                return Err(CoreError::Config("favor feature count must be >= 1".into()));
            }
        }
        Ok(())
    }
}

pub struct ArTransformer {
    pub config: ArConfig,
    pub params: ParamSet,
    /// FAVOR+ projections, one per (layer, head) when the backend is Favor.
    pub(crate) favor_proj: Vec<Array2<f32>>,
}

fn head_dim(cfg: &ArConfig) -> usize {
    cfg.dim / cfg.heads
}

impl ArTransformer {
    pub fn new(config: ArConfig, init_seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(seed::derive(init_seed, &["ar-init"]));
        let d = config.dim;
        let mut p = ParamSet::default();
        p.push("tok_emb", init::normal::<f32>(&[config.vocab + 1, d], 0.02, &mut rng));
        p.push("pos_emb", init::normal::<f32>(&[config.max_len + 1, d], 0.02, &mut rng));
        if let Some(mc) = config.cond_vocab {
            p.push("cond_emb", init::normal::<f32>(&[mc, d], 0.02, &mut rng));
            p.push(
                "cond_pos_emb",
                init::normal::<f32>(&[config.max_cond_len, d], 0.02, &mut rng),
            );
        }
        for l in 0..config.layers {
            let lp = |s: &str| format!("l{l}.{s}");
            p.push(lp("ln1.g"), init::ones::<f32>(&[d]));
            p.push(lp("ln1.b"), init::zeros::<f32>(&[d]));
            for w in ["attn.wq", "attn.wk", "attn.wv", "attn.wo"] {
                p.push(lp(w), init::kaiming_uniform::<f32>(&[d, d], d, &mut rng));
            }
            for b in ["attn.bq", "attn.bk", "attn.bv", "attn.bo"] {
                p.push(lp(b), init::zeros::<f32>(&[d]));
            }
            if config.cond_vocab.is_some() {
                p.push(lp("lnc.g"), init::ones::<f32>(&[d]));
                p.push(lp("lnc.b"), init::zeros::<f32>(&[d]));
                for w in ["xattn.wq", "xattn.wk", "xattn.wv", "xattn.wo"] {
                    p.push(lp(w), init::kaiming_uniform::<f32>(&[d, d], d, &mut rng));
                }
                for b in ["xattn.bq", "xattn.bk", "xattn.bv", "xattn.bo"] {
                    p.push(lp(b), init::zeros::<f32>(&[d]));
                }
            }
            p.push(lp("ln2.g"), init::ones::<f32>(&[d]));
            p.push(lp("ln2.b"), init::zeros::<f32>(&[d]));
            p.push(lp("ff.w1"), init::kaiming_uniform::<f32>(&[d, 4 * d], d, &mut rng));
            p.push(lp("ff.b1"), init::zeros::<f32>(&[4 * d]));
            p.push(lp("ff.w2"), init::kaiming_uniform::<f32>(&[4 * d, d], 4 * d, &mut rng));
            p.push(lp("ff.b2"), init::zeros::<f32>(&[d]));
        }
        p.push("ln_f.g", init::ones::<f32>(&[d]));
        p.push("ln_f.b", init::zeros::<f32>(&[d]));
        p.push("head.w", init::kaiming_uniform::<f32>(&[d, config.vocab], d, &mut rng));
        p.push("head.b", init::zeros::<f32>(&[config.vocab]));
        Ok(Self::assemble(config, p))
    }

    pub(crate) fn assemble(config: ArConfig, params: ParamSet) -> Self {
        let favor_proj = match config.backend {
            AttnBackend::Exact => Vec::new(),
            AttnBackend::Favor { m } => {
                let dk = head_dim(&config);
                (0..config.layers * config.heads)
                    .map(|i| {
                        favor_projection::<f32>(
                            m,
                            dk,
                            seed::derive_indexed(config.favor_seed, "favor-layer-head", i as u64),
                        )
                    })
                    .collect()
            }
        };
        ArTransformer {
            config,
            params,
            favor_proj,
        }
    }

    fn check_tokens(&self, tokens: &[usize], cond: Option<&[usize]>) -> Result<()> {
        if tokens.len() > self.config.max_len {
            return Err(CoreError::Contract(format!(
                "sequence length {} exceeds model max {}",
                tokens.len(),
                self.config.max_len
            )));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= self.config.vocab) {
            return Err(CoreError::Contract(format!(
                "token {bad} out of range for vocabulary {}",
                self.config.vocab
            )));
        }
        match (self.config.cond_vocab, cond) {
            (Some(mc), Some(c)) => {
                if c.is_empty() {
                    return Err(CoreError::Contract(
                        "conditional model requires a nonempty conditioning sequence".into(),
                    ));
                }
                if c.len() > self.config.max_cond_len {
                    return Err(CoreError::Contract(format!(
                        "conditioning length {} exceeds model max {}",
                        c.len(),
                        self.config.max_cond_len
                    )));
                }
                if let Some(&bad) = c.iter().find(|&&t| t >= mc) {
                    return Err(CoreError::Contract(format!(
                        "conditioning token {bad} out of range for vocabulary {mc}"
                    )));
                }
            }
            (Some(_), None) => {
                return Err(CoreError::Contract(
                    "conditional model called without a conditioning sequence".into(),
                ))
            }
            (None, Some(_)) => {
                return Err(CoreError::Contract(
                    "unconditional model called with a conditioning sequence".into(),
                ))
            }
            (None, None) => {}
        }
        Ok(())
    }

    /// Inject every parameter into the graph, in [`ParamSet`] order.
    pub fn bind_params(&self, g: &mut Graph<f32>, trainable: bool) -> Vec<Var> {
        self.params
            .entries
            .iter()
            .map(|(_, value)| {
                let arr: ArrayD<f32> = value.clone();
                if trainable {
                    g.param(arr)
                } else {
                    g.input(arr)
                }
            })
            .collect()
    }

    /// Build the forward graph; returns the `[len, vocab]` logits node where
    /// row `i` predicts token `i` from BOS, tokens `< i`, and all of `cond`.
    pub fn forward_graph(
        &self,
        g: &mut Graph<f32>,
        tokens: &[usize],
        cond: Option<&[usize]>,
        trainable: bool,
    ) -> Result<(Var, Vec<Var>)> {
        let vars = self.bind_params(g, trainable);
        let logits = self.forward_with(g, &vars, tokens, cond)?;
        Ok((logits, vars))
    }

    /// Forward pass over an existing parameter binding.
    pub fn forward_with(
        &self,
        g: &mut Graph<f32>,
        vars: &[Var],
        tokens: &[usize],
        cond: Option<&[usize]>,
    ) -> Result<Var> {
        self.check_tokens(tokens, cond)?;
        let cfg = &self.config;
        let dk = head_dim(cfg);
        let bind = |name: String| -> Var {
            let idx = self
                .params
                .entries
                .iter()
                .position(|(n, _)| *n == name)
                .unwrap_or_else(|| panic!("missing parameter {name}"));
            vars[idx]
        };

        // [BOS, t_0..t_{L-1}] -> logits rows 0..L
        let mut ids = Vec::with_capacity(tokens.len() + 1);
        ids.push(cfg.vocab);
        ids.extend_from_slice(tokens);
        let positions: Vec<usize> = (0..ids.len()).collect();
        let tok = g.embedding(bind("tok_emb".into()), &ids);
        let pos = g.embedding(bind("pos_emb".into()), &positions);
        let mut h = g.add(tok, pos);

        let c_emb = match cond {
            Some(c) => {
                let ce = g.embedding(bind("cond_emb".into()), c);
                let cpos: Vec<usize> = (0..c.len()).collect();
                let cp = g.embedding(bind("cond_pos_emb".into()), &cpos);
                Some(g.add(ce, cp))
            }
            None => None,
        };

        let inv_sqrt_dk = 1.0f32 / (dk as f32).sqrt();
        for l in 0..cfg.layers {
            let lp = |s: &str| format!("l{l}.{s}");
            // self-attention
            let a = {
                let gam = bind(lp("ln1.g"));
                let bet = bind(lp("ln1.b"));
                g.layer_norm(h, gam, bet)
            };
            let q = {
                let w = bind(lp("attn.wq"));
                let b = bind(lp("attn.bq"));
                let m = g.matmul(a, w);
                g.add_bias_rows(m, b)
            };
            let k = {
                let w = bind(lp("attn.wk"));
                let b = bind(lp("attn.bk"));
                let m = g.matmul(a, w);
                g.add_bias_rows(m, b)
            };
            let v = {
                let w = bind(lp("attn.wv"));
                let b = bind(lp("attn.bv"));
                let m = g.matmul(a, w);
                g.add_bias_rows(m, b)
            };
            let mut heads = Vec::with_capacity(cfg.heads);
            for hd in 0..cfg.heads {
                let qh = g.slice_cols(q, hd * dk, dk);
                let kh = g.slice_cols(k, hd * dk, dk);
                let vh = g.slice_cols(v, hd * dk, dk);
                let out = match cfg.backend {
                    AttnBackend::Exact => {
                        let scores = g.matmul_nt(qh, kh);
                        let scaled = g.scale(scores, inv_sqrt_dk);
                        let attn = g.causal_softmax(scaled);
                        g.matmul(attn, vh)
                    }
                    AttnBackend::Favor { .. } => {
                        let proj = &self.favor_proj[l * cfg.heads + hd];
                        super::favor_graph::favor_causal_attention(g, qh, kh, vh, proj)
                    }
                };
                heads.push(out);
            }
            let cat = g.concat_cols(&heads);
            let sa = {
                let w = bind(lp("attn.wo"));
                let b = bind(lp("attn.bo"));
                let m = g.matmul(cat, w);
                g.add_bias_rows(m, b)
            };
            h = g.add(h, sa);

            // cross-attention over the embedded conditioning sequence
            if let Some(ce) = c_emb {
                let a = {
                    let gam = bind(lp("lnc.g"));
                    let bet = bind(lp("lnc.b"));
                    g.layer_norm(h, gam, bet)
                };
                let q = {
                    let w = bind(lp("xattn.wq"));
                    let b = bind(lp("xattn.bq"));
                    let m = g.matmul(a, w);
                    g.add_bias_rows(m, b)
                };
                let k = {
                    let w = bind(lp("xattn.wk"));
                    let b = bind(lp("xattn.bk"));
                    let m = g.matmul(ce, w);
                    g.add_bias_rows(m, b)
                };
                let v = {
                    let w = bind(lp("xattn.wv"));
                    let b = bind(lp("xattn.bv"));
                    let m = g.matmul(ce, w);
                    g.add_bias_rows(m, b)
                };
                let mut heads = Vec::with_capacity(cfg.heads);
                for hd in 0..cfg.heads {
                    let qh = g.slice_cols(q, hd * dk, dk);
                    let kh = g.slice_cols(k, hd * dk, dk);
                    let vh = g.slice_cols(v, hd * dk, dk);
                    let scores = g.matmul_nt(qh, kh);
                    let scaled = g.scale(scores, inv_sqrt_dk);
                    let attn = g.softmax_rows(scaled);
                    heads.push(g.matmul(attn, vh));
                }
                let cat = g.concat_cols(&heads);
                let ca = {
                    let w = bind(lp("xattn.wo"));
                    let b = bind(lp("xattn.bo"));
                    let m = g.matmul(cat, w);
                    g.add_bias_rows(m, b)
                };
                h = g.add(h, ca);
            }

            // feed-forward
            let a = {
                let gam = bind(lp("ln2.g"));
                let bet = bind(lp("ln2.b"));
                g.layer_norm(h, gam, bet)
            };
            let f = {
                let w1 = bind(lp("ff.w1"));
                let b1 = bind(lp("ff.b1"));
                let m = g.matmul(a, w1);
                let m = g.add_bias_rows(m, b1);
                let r = g.relu(m);
                let w2 = bind(lp("ff.w2"));
                let b2 = bind(lp("ff.b2"));
                let m = g.matmul(r, w2);
                g.add_bias_rows(m, b2)
            };
            h = g.add(h, f);
        }

        let hf = {
            let gam = bind("ln_f.g".into());
            let bet = bind("ln_f.b".into());
            g.layer_norm(h, gam, bet)
        };
        let full = {
            let w = bind("head.w".into());
            let b = bind("head.b".into());
            let m = g.matmul(hf, w);
            g.add_bias_rows(m, b)
        };
        Ok(g.slice_rows(full, 0, tokens.len()))
    }
}

/// Logits `[L, M]`; row `i` depends only on BOS, tokens `< i`, and `cond`.
pub fn ar_forward(
    model: &ArTransformer,
    tokens: &TokenSequence,
    cond: Option<&TokenSequence>,
) -> Result<Array2<f32>> {
    let mut g = Graph::<f32>::new();
    let (logits, _) = model.forward_graph(
        &mut g,
        &tokens.tokens,
        cond.map(|c| c.tokens.as_slice()),
        false,
    )?;
    Ok(g.value(logits)
        .clone()
        .into_dimensionality::<Ix2>()
        .expect("logits are 2-d"))
}

/// Per-position softmax probability of the observed token.
pub fn token_likelihoods(
    model: &ArTransformer,
    tokens: &TokenSequence,
    cond: Option<&TokenSequence>,
) -> Result<Vec<f64>> {
    let logits = ar_forward(model, tokens, cond)?;
    Ok(tokens
        .tokens
        .iter()
        .enumerate()
        .map(|(i, &t)| softmax_row_f64(&logits, i)[t])
        .collect())
}

/// Softmax distribution over the next token after `prefix` (may be empty).
pub fn next_token_distribution(
    model: &ArTransformer,
    prefix: &[usize],
    cond: Option<&[usize]>,
) -> Result<Vec<f64>> {
    let mut g = Graph::<f32>::new();
    // forward over prefix plus a dummy token whose row we never read: the
    // BOS shift means row `prefix.len()` only sees the prefix
    let mut padded = prefix.to_vec();
    padded.push(0);
    let (logits, _) = model.forward_graph(&mut g, &padded, cond, false)?;
    let arr = g
        .value(logits)
        .view()
        .into_dimensionality::<Ix2>()
        .expect("2-d");
    let row = prefix.len();
    let vals: Vec<f64> = arr.row(row).iter().map(|&v| v as f64).collect();
    Ok(softmax_f64(&vals))
}

pub(crate) fn softmax_row_f64(logits: &Array2<f32>, row: usize) -> Vec<f64> {
    let vals: Vec<f64> = logits.row(row).iter().map(|&v| v as f64).collect();
    softmax_f64(&vals)
}

fn softmax_f64(vals: &[f64]) -> Vec<f64> {
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = vals.iter().map(|&v| (v - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}
