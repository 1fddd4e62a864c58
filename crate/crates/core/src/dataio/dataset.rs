//! On-disk layout:
//!
//! ```text
//! <root>/<id>/audio.wav
//! <root>/<id>/frames/000001.png ...   (8-bit grayscale)
//! <root>/manifest.tsv                 (id, mode, seed; synthetic sets only)
//! <root>/frontend.json                (feature settings; synthetic sets only)
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{ColorType, GrayImage};

use super::{align_streams, load_wav, save_wav, AudioFrontend, Frame, PairedSequence, SyntheticDataset};
use crate::{Error, Result};

pub const FRAME_DIR: &str = "frames";
pub const MANIFEST: &str = "manifest.tsv";
pub const FRONTEND_FILE: &str = "frontend.json";
pub const AUDIO_FILE: &str = "audio.wav";

fn frame_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("{:06}.png", i + 1))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes single-channel frames as `000001.png`, `000002.png`, ...
pub fn save_frames(dir: &Path, frames: &[Frame]) -> Result<()> {
    create_dir(dir)?;
    for (i, f) in frames.iter().enumerate() {
        if f.channels != 1 {
            return Err(Error::UnsupportedEncoding(format!("{}-channel frame, PNG frames are grayscale", f.channels)));
        }
        let bytes: Vec<u8> = f.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        let path = frame_path(dir, i);
        image::save_buffer(&path, &bytes, f.width as u32, f.height as u32, ColorType::L8).map_err(|e| Error::Image {
            path: path.clone(),
            message: e.to_string(),
        })?;
    }
    Ok(())
}

/// Reads `000001.png ...` until the first missing index. Colour images are
/// converted to luma.
pub fn load_frames(dir: &Path) -> Result<Vec<Frame>> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "frame directory not found"),
        ));
    }
    let mut frames: Vec<Frame> = Vec::new();
    loop {
        let path = frame_path(dir, frames.len());
        if !path.exists() {
            break;
        }
        let img: GrayImage = image::open(&path)
            .map_err(|e| Error::Image {
                path: path.clone(),
                message: e.to_string(),
            })?
            .to_luma8();
        let (w, h) = img.dimensions();
        let data = img.as_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
        frames.push(Frame::new(h as usize, w as usize, 1, data)?);
    }
    if frames.is_empty() {
        return Err(Error::Empty(format!("no frames named 000001.png in {}", dir.display())));
    }
    Ok(frames)
}

/// Writes every example plus `manifest.tsv` and `frontend.json`.
pub fn write_dataset(root: &Path, ds: &SyntheticDataset) -> Result<()> {
    create_dir(root)?;
    let mut manifest = String::from("id\tmode\tseed\n");
    for ex in &ds.examples {
        let dir = root.join(&ex.id);
        create_dir(&dir)?;
        save_wav(&ex.waveform, &dir.join(AUDIO_FILE))?;
        save_frames(&dir.join(FRAME_DIR), &ex.frames)?;
        manifest.push_str(&format!("{}\t{}\t{}\n", ex.id, ex.mode, ex.seed));
    }
    let path = root.join(MANIFEST);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    let path = root.join(FRONTEND_FILE);
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let json = serde_json::to_string_pretty(&ds.frontend).expect("front end serializes");
    writeln!(f, "{json}").map_err(|e| Error::io(&path, e))
}

/// Front-end settings stored next to a dataset, if any.
pub fn read_frontend(root: &Path) -> Result<Option<AudioFrontend>> {
    let path = root.join(FRONTEND_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let fe: AudioFrontend =
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    fe.validate()?;
    Ok(Some(fe))
}

pub fn load_sequence(dir: &Path, frontend: &AudioFrontend, context_frames: usize) -> Result<PairedSequence> {
    let id = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let fb = frontend.features.filterbank()?;
    let wav = load_wav(&dir.join(AUDIO_FILE))?;
    let frames = load_frames(&dir.join(FRAME_DIR))?;
    align_streams(&id, &wav, &frames, frontend, &fb, context_frames)
}

/// Every `<root>/<id>/` holding an `audio.wav`, ordered by id.
pub fn load_dataset(root: &Path, frontend: &AudioFrontend, context_frames: usize) -> Result<Vec<PairedSequence>> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.join(AUDIO_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Empty(format!("no sequences under {}", root.display())));
    }
    dirs.iter().map(|d| load_sequence(d, frontend, context_frames)).collect()
}
