//! Flip-and-crop augmentation for image-shaped inputs.

use rand::Rng;

/// Flip then pad-and-crop, matching the standard CIFAR recipe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSpec {
    pub enabled: bool,
    pub pad: usize,
    pub flip_prob: f64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            enabled: false,
            pad: 4,
            flip_prob: 0.5,
        }
    }
}

/// Horizontal flip of a CHW image. Applying it twice recovers the input.
pub fn flip_horizontal(values: &[f64], channels: usize, height: usize, width: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for c in 0..channels {
        for y in 0..height {
            for x in 0..width {
                out[(c * height + y) * width + x] = values[(c * height + y) * width + (width - 1 - x)];
            }
        }
    }
    out
}

/// Zero-pad by `pad` on every side, then crop back to the original size at
/// offset `(off_y, off_x)` into the padded image. Offset `(pad, pad)` is
/// the identity.
pub fn crop_padded(
    values: &[f64],
    channels: usize,
    height: usize,
    width: usize,
    pad: usize,
    off_y: usize,
    off_x: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for c in 0..channels {
        for y in 0..height {
            let src_y = (y + off_y) as isize - pad as isize;
            if src_y < 0 || src_y >= height as isize {
                continue;
            }
            for x in 0..width {
                let src_x = (x + off_x) as isize - pad as isize;
                if src_x < 0 || src_x >= width as isize {
                    continue;
                }
                out[(c * height + y) * width + x] =
                    values[(c * height + src_y as usize) * width + src_x as usize];
            }
        }
    }
    out
}

/// Apply the augmentation policy to one example. Identity when disabled or
/// when the input is not image-shaped (rank != 3). RNG draw order: flip
/// decision, then crop offsets y, x.
pub fn augment(values: &[f64], dims: &[usize], spec: &AugmentSpec, rng: &mut impl Rng) -> Vec<f64> {
    if !spec.enabled || dims.len() != 3 {
        return values.to_vec();
    }
    let (c, h, w) = (dims[0], dims[1], dims[2]);
    let mut out = if rng.random::<f64>() < spec.flip_prob {
        flip_horizontal(values, c, h, w)
    } else {
        values.to_vec()
    };
    if spec.pad > 0 {
        let off_y = rng.random_range(0..=2 * spec.pad);
        let off_x = rng.random_range(0..=2 * spec.pad);
        out = crop_padded(&out, c, h, w, spec.pad, off_y, off_x);
    }
    out
}
