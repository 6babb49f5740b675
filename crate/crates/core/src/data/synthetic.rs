use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::MultimodalDataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Parameters of the correlated two-view generator.
///
/// Each class has a latent prototype; each sample jitters its prototype and
/// both views are fixed linear maps of that shared latent plus independent
/// noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub per_class: usize,
    pub image_dim: usize,
    pub audio_dim: usize,
    pub latent_dim: usize,
    pub noise_sigma: f64,
    /// Standard deviation of the per-sample latent jitter around the prototype.
    pub jitter_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 9,
            per_class: 200,
            image_dim: 64,
            audio_dim: 40,
            latent_dim: 16,
            noise_sigma: 0.5,
            jitter_sigma: 0.5,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::config("synthetic data needs at least 2 classes"));
        }
        if self.per_class == 0 || self.image_dim == 0 || self.audio_dim == 0 {
            return Err(Error::config("per_class and view dimensions must be positive"));
        }
        if self.latent_dim < 1 {
            return Err(Error::config("latent_dim must be at least 1"));
        }
        if [self.noise_sigma, self.jitter_sigma].iter().any(|s| s.is_nan() || *s < 0.0) {
            return Err(Error::config("noise and jitter must be non-negative"));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut impl Rng, n: usize, sigma: f64) -> Vec<f64> {
    (0..n)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MultimodalDataset> {
    spec.validate()?;
    let SyntheticSpec {
        classes,
        per_class,
        image_dim,
        audio_dim,
        latent_dim,
        ..
    } = *spec;
    let mut structure = rng::stream(spec.seed, &[0]);
    let prototypes: Vec<Vec<f64>> = (0..classes)
        .map(|_| gaussian(&mut structure, latent_dim, 1.0))
        .collect();
    // Standard Gaussian projections: each view coordinate carries about
    // latent_dim times the signal variance of one latent coordinate.
    let proj_img = gaussian(&mut structure, image_dim * latent_dim, 1.0);
    let proj_aud = gaussian(&mut structure, audio_dim * latent_dim, 1.0);

    let mut samples = rng::stream(spec.seed, &[1]);
    let n = classes * per_class;
    let mut images = Vec::with_capacity(n * image_dim);
    let mut audios = Vec::with_capacity(n * audio_dim);
    let mut labels = Vec::with_capacity(n);
    for (class, proto) in prototypes.iter().enumerate() {
        for _ in 0..per_class {
            let latent: Vec<f64> = proto
                .iter()
                .zip(gaussian(&mut samples, latent_dim, spec.jitter_sigma))
                .map(|(m, j)| m + j)
                .collect();
            project(&proj_img, &latent, spec.noise_sigma, &mut samples, &mut images);
            project(&proj_aud, &latent, spec.noise_sigma, &mut samples, &mut audios);
            labels.push(class);
        }
    }
    MultimodalDataset::new(
        Tensor::new(vec![n, image_dim], images)?,
        Tensor::new(vec![n, audio_dim], audios)?,
        labels,
        classes,
    )
}

fn project(matrix: &[f64], latent: &[f64], sigma: f64, rng: &mut impl Rng, out: &mut Vec<f64>) {
    for row in matrix.chunks(latent.len()) {
        let clean: f64 = row.iter().zip(latent).map(|(p, z)| p * z).sum();
        let noise = if sigma > 0.0 {
            sigma * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        out.push(clean + noise);
    }
}
