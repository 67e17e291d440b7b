//! Training and evaluation of the network on generated views.

use std::borrow::Cow;

use escher_core::augment::{AugmentParams, AugmentPolicy};
use escher_core::image::PatternImage;
use escher_core::metrics::ConfusionMatrix;
use escher_core::rng::{derive_seed, rng_for};
use escher_net::train::{evaluate, train_with, Dataset, History};
use escher_net::EscherNet;

use crate::config::RunConfig;
use crate::data::{dataset, draw_params, sources, view, views, Source};
use crate::error::{HarnessError, Result};

const INIT_TAG: u64 = 0x1417;
const SHUFFLE_TAG: u64 = 0x5fff;

pub struct Trained {
    pub model: EscherNet<f32>,
    pub history: History,
}

/// Trains on `per_group` training sources of every configured group.
pub fn train_classifier(cfg: &RunConfig, seed: u64, per_group: usize) -> Result<Trained> {
    let src = sources(&cfg.groups, per_group, "train", seed, &cfg.gen)?;
    train_on(cfg, seed, &src, cfg.policy)
}

/// Trains a freshly initialized network on views of `src`. With
/// `cfg.reaugment` each epoch sees new augmentations; otherwise the epoch-0
/// views are reused throughout.
pub fn train_on(cfg: &RunConfig, seed: u64, src: &[Source], policy: AugmentPolicy) -> Result<Trained> {
    if src.is_empty() {
        return Err(HarnessError::Data("no training sources".into()));
    }
    let input = cfg.model.input;
    let mut model = EscherNet::<f32>::init(cfg.model, &mut rng_for(seed, &[INIT_TAG]))?;
    let mut tc = cfg.train.clone();
    tc.seed = derive_seed(seed, &[SHUFFLE_TAG]);
    let fixed = if cfg.reaugment {
        None
    } else {
        Some(dataset(src, &views(src, policy, seed, 0, &cfg.gen, input)?, input)?)
    };
    let history = train_with(&mut model, &tc, |epoch| match &fixed {
        Some(d) => Ok(Cow::Borrowed(d)),
        None => {
            let imgs = views(src, policy, seed, epoch, &cfg.gen, input).map_err(to_net)?;
            Ok(Cow::Owned(dataset(src, &imgs, input).map_err(to_net)?))
        }
    })?;
    Ok(Trained { model, history })
}

fn to_net(e: HarnessError) -> escher_net::NetError {
    match e {
        HarnessError::Net(n) => n,
        HarnessError::Core(c) => escher_net::NetError::Core(c),
        other => escher_net::NetError::Config(other.to_string()),
    }
}

pub struct TestSet {
    pub sources: Vec<Source>,
    pub images: Vec<PatternImage>,
    pub data: Dataset<f32>,
}

impl TestSet {
    /// Views of `sources` with explicitly chosen augmentation parameters.
    pub fn with_params(
        cfg: &RunConfig,
        sources: Vec<Source>,
        input: usize,
        params: impl Fn(&Source) -> AugmentParams + Sync,
    ) -> Result<Self> {
        use rayon::prelude::*;
        let images = sources
            .par_iter()
            .map(|s| view(s, &params(s), &cfg.gen, input))
            .collect::<Result<Vec<_>>>()?;
        let data = dataset(&sources, &images, input)?;
        Ok(Self { sources, images, data })
    }

    /// Test split under `policy`, sized for the network input.
    pub fn draw(cfg: &RunConfig, seed: u64, policy: AugmentPolicy) -> Result<Self> {
        let src = sources(&cfg.groups, cfg.test_per_group, "test", seed, &cfg.gen)?;
        Self::with_params(cfg, src, cfg.model.input, |s| draw_params(policy, seed, s, 0))
    }
}

pub fn confusion(model: &EscherNet<f32>, test: &TestSet, batch: usize) -> Result<ConfusionMatrix> {
    Ok(evaluate(model, &test.data, batch)?)
}
