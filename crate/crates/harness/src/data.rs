//! Seeded sources and augmented views.
//!
//! A source is one full-size generator image. A view is one augmentation of
//! a source cropped to 128 px and halved until it matches the network input.
//! Every random draw is keyed by (run seed, split, group, index, epoch), so
//! any view can be rebuilt on its own.

use escher_core::augment::{augment, sample_params, AugmentParams, AugmentPolicy, DEFAULT_CROP};
use escher_core::gen::{image_seed, synthesize_batch, GenConfig};
use escher_core::group::{generator_lattice, WallpaperGroup};
use escher_core::image::PatternImage;
use escher_core::rng::rng_for;
use escher_net::train::Dataset;
use rayon::prelude::*;

use crate::error::{HarnessError, Result};

const AUGMENT_TAG: u64 = 0xa0a0;

#[derive(Clone, Debug)]
pub struct Source {
    pub group: WallpaperGroup,
    pub index: usize,
    pub seed: u64,
    pub split: String,
    pub image: PatternImage,
}

/// Number of 2x downsamples from the crop to `input`.
pub fn downsample_steps(input: usize) -> Result<u32> {
    let mut side = DEFAULT_CROP;
    let mut steps = 0;
    while side > input && side % 2 == 0 {
        side /= 2;
        steps += 1;
    }
    if side != input {
        return Err(HarnessError::Usage(format!(
            "network input {input} is not the {DEFAULT_CROP} px crop halved a whole number of times"
        )));
    }
    Ok(steps)
}

/// `per_group` sources of each group, ordered by group then index.
pub fn sources(groups: &[WallpaperGroup], per_group: usize, split: &str, seed: u64, gen: &GenConfig) -> Result<Vec<Source>> {
    let per: Vec<Vec<Source>> = groups
        .par_iter()
        .map(|&g| {
            let seeds: Vec<u64> = (0..per_group).map(|i| image_seed(seed, split, g, i)).collect();
            let imgs = synthesize_batch(g, &seeds, gen)?;
            Ok(imgs
                .into_iter()
                .zip(seeds)
                .enumerate()
                .map(|(index, (image, seed))| Source { group: g, index, seed, split: split.to_string(), image })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

/// Augmentation of `src` for `epoch` under `policy`.
pub fn draw_params(policy: AugmentPolicy, seed: u64, src: &Source, epoch: usize) -> AugmentParams {
    let key = image_seed(seed, &src.split, src.group, src.index);
    sample_params(policy, &mut rng_for(key, &[AUGMENT_TAG, epoch as u64]))
}

/// Applies `params` to the source (folding through the generator lattice)
/// and reduces the crop to `input` pixels.
pub fn view(src: &Source, params: &AugmentParams, gen: &GenConfig, input: usize) -> Result<PatternImage> {
    let lattice = generator_lattice(src.group, gen.lattice_size as f64);
    let mut img = augment(&src.image, params, Some(&lattice))?;
    for _ in 0..downsample_steps(input)? {
        img = img.downsample2()?;
    }
    Ok(img)
}

/// Views of every source under `policy` for one epoch.
pub fn views(sources: &[Source], policy: AugmentPolicy, seed: u64, epoch: usize, gen: &GenConfig, input: usize) -> Result<Vec<PatternImage>> {
    sources
        .par_iter()
        .map(|s| view(s, &draw_params(policy, seed, s, epoch), gen, input))
        .collect()
}

/// Network dataset with group indices as labels.
pub fn dataset(sources: &[Source], images: &[PatternImage], input: usize) -> Result<Dataset<f32>> {
    Ok(Dataset::from_images(input, images.iter().zip(sources).map(|(img, s)| (img, s.group.index())))?)
}
