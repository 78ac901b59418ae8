//! MNIST IDX ingestion and the probabilistic grayscale-to-stimulation mapping.

use super::{checked, PatternError};
use crate::grid::{BipolarPair, ElectrodeCoord, StimPattern, Waveform, GRID_SIZE};
use crate::rng;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const MNIST_SIDE: usize = 28;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MnistImage {
    pub pixels: [[u8; MNIST_SIDE]; MNIST_SIDE],
    pub label: u8,
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32, PatternError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| PatternError::Format { offset, msg: format!("truncated header ({what})") })
}

/// Parse an IDX3 image file into raw 28x28 images.
pub fn read_idx_images(bytes: &[u8]) -> Result<Vec<[[u8; MNIST_SIDE]; MNIST_SIDE]>, PatternError> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(PatternError::Format { offset: 0, msg: format!("bad image magic {magic:#010x}") });
    }
    let n = be_u32(bytes, 4, "image count")? as usize;
    let rows = be_u32(bytes, 8, "row count")? as usize;
    let cols = be_u32(bytes, 12, "column count")? as usize;
    if rows != MNIST_SIDE || cols != MNIST_SIDE {
        return Err(PatternError::Format { offset: 8, msg: format!("expected 28x28 images, got {rows}x{cols}") });
    }
    let body = &bytes[16..];
    let need = n * MNIST_SIDE * MNIST_SIDE;
    if body.len() < need {
        return Err(PatternError::Format {
            offset: 16 + body.len(),
            msg: format!("truncated pixel data: {n} images need {need} bytes, found {}", body.len()),
        });
    }
    Ok(body[..need]
        .chunks_exact(MNIST_SIDE * MNIST_SIDE)
        .map(|chunk| {
            let mut img = [[0u8; MNIST_SIDE]; MNIST_SIDE];
            for (r, row) in img.iter_mut().enumerate() {
                row.copy_from_slice(&chunk[r * MNIST_SIDE..(r + 1) * MNIST_SIDE]);
            }
            img
        })
        .collect())
}

pub fn read_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, PatternError> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(PatternError::Format { offset: 0, msg: format!("bad label magic {magic:#010x}") });
    }
    let n = be_u32(bytes, 4, "label count")? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(PatternError::Format {
            offset: 8 + body.len(),
            msg: format!("truncated label data: expected {n}, found {}", body.len()),
        });
    }
    if let Some(i) = body[..n].iter().position(|&l| l > 9) {
        return Err(PatternError::Format { offset: 8 + i, msg: format!("label {} outside 0..=9", body[i]) });
    }
    Ok(body[..n].to_vec())
}

/// Load paired images and labels in file order.
pub fn load_mnist_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Vec<MnistImage>, PatternError> {
    let images = read_idx_images(&std::fs::read(images_path)?)?;
    let labels = read_idx_labels(&std::fs::read(labels_path)?)?;
    if images.len() != labels.len() {
        return Err(PatternError::Format {
            offset: 4,
            msg: format!("{} images but {} labels", images.len(), labels.len()),
        });
    }
    Ok(images.into_iter().zip(labels).map(|(pixels, label)| MnistImage { pixels, label }).collect())
}

/// Stimulation probability as a function of pixel intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IntensityLaw {
    /// `p(v) = (255 - v) / 255`: darker pixels stimulate more often.
    #[default]
    Linear,
    /// `p(v) = ((255 - v) / 255)^gamma`.
    Power { gamma: f64 },
}

impl IntensityLaw {
    pub fn probability(&self, v: u8) -> f64 {
        let lin = (255 - v) as f64 / 255.0;
        match *self {
            IntensityLaw::Linear => lin,
            IntensityLaw::Power { gamma } => lin.powf(gamma),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MnistMapping {
    pub target_res: usize,
    pub region_origin: ElectrodeCoord,
    pub law: IntensityLaw,
}

impl Default for MnistMapping {
    fn default() -> Self {
        Self { target_res: 16, region_origin: ElectrodeCoord { row: 24, col: 16 }, law: IntensityLaw::Linear }
    }
}

/// Nearest-neighbour downsample from 28x28 to `res`x`res`, sampling pixel centers.
pub fn downsample(img: &MnistImage, res: usize) -> Vec<Vec<u8>> {
    let src = |i: usize| (((2 * i + 1) * MNIST_SIDE) / (2 * res)).min(MNIST_SIDE - 1);
    (0..res).map(|r| (0..res).map(|c| img.pixels[src(r)][src(c)]).collect()).collect()
}

/// Map an image onto a `res` x `2*res` electrode block.
///
/// Each downsampled pixel fires independently with probability
/// `mapping.law.probability(v)`, drawn in row-major order from the seeded
/// generator. A firing pixel `(r, c)` becomes a pair with its positive pole
/// at `origin + (r, 2c)` and its negative pole one column to the right.
/// The result may have zero pairs; callers decide whether to redraw.
pub fn map_mnist(img: &MnistImage, mapping: &MnistMapping, wf: Waveform, seed: u64) -> Result<StimPattern, PatternError> {
    let res = mapping.target_res;
    let o = mapping.region_origin;
    if res == 0 || o.row as usize + res > GRID_SIZE || o.col as usize + 2 * res > GRID_SIZE {
        return Err(PatternError::Footprint(format!(
            "{res}x{} block at {o} does not fit the grid",
            2 * res
        )));
    }
    let small = downsample(img, res);
    let mut rng = rng::stream(seed, "mnist-draw", 0);
    let mut pairs = Vec::new();
    for (r, row) in small.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if rng.random::<f64>() < mapping.law.probability(v) {
                pairs.push(BipolarPair::rightward(o.offset(r as i64, 2 * c as i64)?)?);
            }
        }
    }
    let p = StimPattern::new(img.label as u32, pairs, wf);
    if p.pairs.is_empty() {
        // Callers redraw empty patterns from the next substream.
        return Ok(p);
    }
    checked(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(v: u8) -> MnistImage {
        MnistImage { pixels: [[v; 28]; 28], label: 4 }
    }

    fn wf() -> Waveform {
        Waveform::biphasic(5.0, 100.0, 100.0)
    }

    fn idx_images(n: u32, payload: usize) -> Vec<u8> {
        let mut b = Vec::new();
        for x in [IDX_IMAGES_MAGIC, n, 28, 28] {
            b.extend_from_slice(&x.to_be_bytes());
        }
        b.extend(std::iter::repeat(7u8).take(payload));
        b
    }

    #[test]
    fn white_and_black_images() {
        let m = MnistMapping::default();
        assert!(map_mnist(&uniform(255), &m, wf(), 1).unwrap().pairs.is_empty());
        let p = map_mnist(&uniform(0), &m, wf(), 1).unwrap();
        assert_eq!(p.pairs.len(), 256);
        assert_eq!(p.label, 4);
    }

    #[test]
    fn mid_gray_firing_frequency() {
        let m = MnistMapping::default();
        let seeds = 10_000u64;
        let mut fired = 0usize;
        for s in 0..seeds {
            fired += map_mnist(&uniform(128), &m, wf(), s).unwrap().pairs.len();
        }
        let freq = fired as f64 / (seeds as f64 * 256.0);
        assert!((freq - 127.0 / 255.0).abs() < 0.02 && (freq - 0.498).abs() < 0.02, "freq {freq}");
    }

    #[test]
    fn mapping_is_deterministic() {
        let mut img = uniform(0);
        for r in 0..28 {
            for c in 0..28 {
                img.pixels[r][c] = ((r * 28 + c) * 7 % 256) as u8;
            }
        }
        let m = MnistMapping::default();
        assert_eq!(map_mnist(&img, &m, wf(), 9).unwrap(), map_mnist(&img, &m, wf(), 9).unwrap());
        assert_ne!(map_mnist(&img, &m, wf(), 9).unwrap(), map_mnist(&img, &m, wf(), 10).unwrap());
    }

    #[test]
    fn downsample_preserves_values() {
        let mut img = uniform(0);
        for r in 0..28 {
            for c in 0..28 {
                img.pixels[r][c] = (r * 9 + c) as u8;
            }
        }
        let inputs: std::collections::HashSet<u8> = img.pixels.iter().flatten().copied().collect();
        for res in [4, 7, 16, 28] {
            let small = downsample(&img, res);
            assert_eq!(small.len(), res);
            assert!(small.iter().flatten().all(|v| inputs.contains(v)));
        }
        assert_eq!(downsample(&img, 28)[5][6], img.pixels[5][6]);
    }

    #[test]
    fn intensity_law_is_monotone() {
        for law in [IntensityLaw::Linear, IntensityLaw::Power { gamma: 2.0 }] {
            assert_eq!(law.probability(0), 1.0);
            assert_eq!(law.probability(255), 0.0);
            for v in 0..255u8 {
                assert!(law.probability(v) >= law.probability(v + 1));
            }
        }
    }

    #[test]
    fn footprint_bounds() {
        let m = MnistMapping { region_origin: ElectrodeCoord { row: 50, col: 0 }, ..Default::default() };
        assert!(matches!(map_mnist(&uniform(0), &m, wf(), 0), Err(PatternError::Footprint(_))));
    }

    #[test]
    fn idx_header_errors() {
        assert!(matches!(read_idx_images(&[]), Err(PatternError::Format { offset: 0, .. })));
        let mut bad = idx_images(1, 784);
        bad[3] = 0x01;
        assert!(matches!(read_idx_images(&bad), Err(PatternError::Format { .. })));
        assert!(matches!(read_idx_images(&idx_images(2, 784)), Err(PatternError::Format { offset, .. }) if offset == 16 + 784));
        assert_eq!(read_idx_images(&idx_images(2, 1568)).unwrap().len(), 2);

        let mut labels = IDX_LABELS_MAGIC.to_be_bytes().to_vec();
        labels.extend_from_slice(&3u32.to_be_bytes());
        labels.extend_from_slice(&[1, 2]);
        assert!(read_idx_labels(&labels).is_err());
        labels.push(3);
        assert_eq!(read_idx_labels(&labels).unwrap(), vec![1, 2, 3]);
        assert!(read_idx_labels(&idx_images(1, 784)).is_err());
    }
}
