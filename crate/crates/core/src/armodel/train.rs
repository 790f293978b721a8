//! Cross-entropy training of the latent transformer.

use ndarray::ArrayD;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::Path;

use super::{ArConfig, ArTransformer};
use crate::anomaly::TokenSequence;
use crate::diffcore::{adam_step, lr_schedule, AdamHyper, AdamState, Graph};
use crate::error::{CoreError, Result};
use crate::io::ckpt;
use crate::seed;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ArTrainConfig {
    pub steps: usize,
    pub batch: usize,
}

impl Default for ArTrainConfig {
    fn default() -> Self {
        ArTrainConfig {
            steps: 400,
            batch: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArLogRow {
    pub step: usize,
    pub nll: f64,
    pub lr: f64,
}

/// Train on latent sequences, optionally paired with spatially aligned
/// conditioning sequences. Deterministic given `seed_value`.
pub fn train_ar(
    sequences: &[TokenSequence],
    conds: Option<&[TokenSequence]>,
    config: &ArConfig,
    tcfg: &ArTrainConfig,
    seed_value: u64,
) -> Result<(ArTransformer, Vec<ArLogRow>)> {
    if sequences.is_empty() {
        return Err(CoreError::Contract("no training sequences".into()));
    }
    if let Some(c) = conds {
        if c.len() != sequences.len() {
            return Err(CoreError::Contract(format!(
                "{} sequences but {} conditioning sequences",
                sequences.len(),
                c.len()
            )));
        }
    }
    if config.cond_vocab.is_some() != conds.is_some() {
        return Err(CoreError::Contract(
            "conditioning data does not match model conditionality".into(),
        ));
    }
    for s in sequences {
        if let Some(&bad) = s.tokens.iter().find(|&&t| t >= config.vocab) {
            return Err(CoreError::Contract(format!(
                "vocabulary mismatch: token {bad} outside model vocabulary {}",
                config.vocab
            )));
        }
    }

    let model = ArTransformer::new(config.clone(), seed::derive(seed_value, &["ar-train-init"]))?;
    let mut model = model;
    let mut rng = seed::rng(seed::derive(seed_value, &["ar-train-batches"]));
    let mut pool: Vec<usize> = Vec::new();
    let mut adam = AdamState::<f32>::new(
        &model
            .params
            .entries
            .iter()
            .map(|(_, v)| v.clone())
            .collect::<Vec<_>>(),
        AdamHyper::default(),
    );
    let mut log = Vec::with_capacity(tcfg.steps);

    for step in 0..tcfg.steps {
        let mut batch = Vec::with_capacity(tcfg.batch);
        for _ in 0..tcfg.batch {
            if pool.is_empty() {
                pool = (0..sequences.len()).collect();
                pool.shuffle(&mut rng);
            }
            batch.push(pool.pop().expect("refilled above"));
        }

        let mut g = Graph::<f32>::new();
        let vars = model.bind_params(&mut g, true);
        let mut loss_acc = None;
        for &idx in &batch {
            let cond_tokens = conds.map(|c| c[idx].tokens.as_slice());
            let logits = model.forward_with(&mut g, &vars, &sequences[idx].tokens, cond_tokens)?;
            let ce = g.cross_entropy_mean(logits, &sequences[idx].tokens);
            loss_acc = Some(match loss_acc {
                None => ce,
                Some(acc) => g.add(acc, ce),
            });
        }
        let total = loss_acc.expect("batch is nonempty");
        let loss = g.scale(total, 1.0 / tcfg.batch as f32);
        let nll = g.scalar(loss) as f64;
        if !nll.is_finite() {
            return Err(CoreError::Numeric(format!(
                "transformer training diverged at step {step}: nll = {nll}"
            )));
        }
        g.backward(loss);

        let mut params: Vec<ArrayD<f32>> = model
            .params
            .entries
            .iter()
            .map(|(_, v)| v.clone())
            .collect();
        let grads: Vec<ArrayD<f32>> = vars
            .iter()
            .zip(params.iter())
            .map(|(v, p)| {
                g.grad(*v)
                    .cloned()
                    .unwrap_or_else(|| ArrayD::zeros(p.raw_dim()))
            })
            .collect();
        let lr = lr_schedule(config.lr, config.gamma, step as u64);
        adam_step(&mut params, &grads, &mut adam, lr)?;
        for ((_, slot), new) in model.params.entries.iter_mut().zip(params) {
            *slot = new;
        }
        log.push(ArLogRow { step, nll, lr });
    }
    Ok((model, log))
}

/// Mean next-token NLL over held-out sequences.
pub fn mean_nll(
    model: &ArTransformer,
    sequences: &[TokenSequence],
    conds: Option<&[TokenSequence]>,
) -> Result<f64> {
    let mut total = 0.0f64;
    let mut count = 0usize;
    for (i, s) in sequences.iter().enumerate() {
        let lik = super::token_likelihoods(model, s, conds.map(|c| &c[i]))?;
        for p in lik {
            total += -(p.max(1e-300)).ln();
            count += 1;
        }
    }
    Ok(total / count as f64)
}

pub fn save_checkpoint(model: &ArTransformer, path: &Path) -> Result<()> {
    let meta = json!({ "kind": "ar", "config": model.config });
    ckpt::save(&model.params, Some(meta), path)
}

pub fn load_checkpoint(path: &Path) -> Result<ArTransformer> {
    let (params, meta) = ckpt::load(path)?;
    let meta = meta.ok_or_else(|| {
        CoreError::format(path.display().to_string(), "missing meta in checkpoint header")
    })?;
    if meta.get("kind").and_then(|k| k.as_str()) != Some("ar") {
        return Err(CoreError::format(
            path.display().to_string(),
            "checkpoint kind is not \"ar\"",
        ));
    }
    let config: ArConfig = serde_json::from_value(
        meta.get("config")
            .cloned()
            .ok_or_else(|| CoreError::format(path.display().to_string(), "missing config meta"))?,
    )?;
    config.validate()?;
    Ok(ArTransformer::assemble(config, params))
}
