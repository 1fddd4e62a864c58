use std::path::Path;

use image::{GrayImage, Luma};
use vidspeech::Matrix;

use crate::error::{CliError, CliResult};

/// Lower edge of the rendered range; 0 dB maps to white.
const FLOOR_DB: f64 = -80.0;

/// Renders `T × n_mels` natural-log magnitudes as an 8-bit image, time left
/// to right and the lowest band at the bottom, over a fixed `[−80, 0]` dB
/// range so images from different runs are comparable.
pub fn mel_image(mel: &Matrix) -> GrayImage {
    let (t, m) = mel.shape();
    GrayImage::from_fn(t as u32, m as u32, |x, y| {
        let v = mel[(x as usize, m - 1 - y as usize)];
        let db = 20.0 * v / std::f64::consts::LN_10;
        let level = ((db - FLOOR_DB) / -FLOOR_DB).clamp(0.0, 1.0);
        Luma([(level * 255.0).round() as u8])
    })
}

pub fn save_mel_image(mel: &Matrix, path: &Path) -> CliResult<()> {
    mel_image(mel)
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
