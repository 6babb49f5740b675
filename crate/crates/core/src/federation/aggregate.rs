//! Server-side aggregation. These functions see only parameter maps; no
//! participant data reaches them.

use crate::error::{Error, Result};
use crate::models::shared_keys;
use crate::params::ParameterMap;
use crate::tensor::Tensor;

/// Element-wise mean of `weights`, key by key.
///
/// Sums are compensated (Neumaier), and an element on which all inputs agree
/// is returned unchanged, so averaging identical maps is exact.
pub fn agg(weights: &[ParameterMap]) -> Result<ParameterMap> {
    let (first, rest) = weights.split_first().ok_or(Error::EmptyAggregation)?;
    for w in rest {
        first.check_compatible(w)?;
    }
    if rest.is_empty() {
        return Ok(first.clone());
    }
    let n = weights.len() as f64;
    let mut out = first.clone();
    for (key, target) in out.iter_mut() {
        let sources: Vec<&[f64]> = weights
            .iter()
            .map(|w| w.get(key).expect("checked compatible").data())
            .collect();
        for (j, slot) in target.data_mut().iter_mut().enumerate() {
            let head = sources[0][j];
            if sources.iter().all(|s| s[j] == head) {
                *slot = head;
                continue;
            }
            let mut sum = 0.0f64;
            let mut carry = 0.0f64;
            for s in &sources {
                let v = s[j];
                let t = sum + v;
                carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
                sum = t;
            }
            *slot = (sum + carry) / n;
        }
    }
    Ok(out)
}

fn pairwise_mean(a: &Tensor, b: &Tensor) -> Tensor {
    a.zip_map(b, |x, y| (x + y) / 2.0).expect("shapes checked by shared_keys")
}

/// Unimodal update from the multimodal mean: keys shared with `w_m` become the
/// pairwise mean, all other keys of `w_u` are kept.
pub fn agg_m2u(w_u: &ParameterMap, w_m: &ParameterMap) -> Result<ParameterMap> {
    let mut out = w_u.clone();
    for key in shared_keys(w_u, w_m)? {
        let mean = pairwise_mean(w_u.require(&key)?, w_m.require(&key)?);
        *out.get_mut(&key).expect("shared key") = mean;
    }
    Ok(out)
}

/// Multimodal update from both unimodal means. Keys shared with `w_i` are
/// averaged with it, then keys shared with `w_a` are averaged with `w_a`;
/// keys shared with neither are copied from `w_m`.
pub fn agg_u2m(w_i: &ParameterMap, w_a: &ParameterMap, w_m: &ParameterMap) -> Result<ParameterMap> {
    let image_keys = shared_keys(w_i, w_m)?;
    let audio_keys = shared_keys(w_a, w_m)?;
    let mut out = w_m.clone();
    for key in image_keys {
        let mean = pairwise_mean(w_i.require(&key)?, w_m.require(&key)?);
        *out.get_mut(&key).expect("shared key") = mean;
    }
    for key in audio_keys {
        let mean = pairwise_mean(w_a.require(&key)?, out.require(&key)?);
        *out.get_mut(&key).expect("shared key") = mean;
    }
    Ok(out)
}

/// The two-stage server step: FedAvg inside each group, then cross-modal
/// averaging of the shared sub-networks. The second stage reads only the
/// first stage's group means.
pub fn agg_avg(
    image: &[ParameterMap],
    audio: &[ParameterMap],
    multimodal: &[ParameterMap],
) -> Result<(ParameterMap, ParameterMap, ParameterMap)> {
    let w_i = agg(image)?;
    let w_a = agg(audio)?;
    let w_m = agg(multimodal)?;
    Ok((
        agg_m2u(&w_i, &w_m)?,
        agg_m2u(&w_a, &w_m)?,
        agg_u2m(&w_i, &w_a, &w_m)?,
    ))
}
