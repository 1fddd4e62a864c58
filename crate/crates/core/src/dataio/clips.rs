use crate::model::FrameClip;
use crate::{Error, Result};

/// One video frame, `C × H × W`, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Frame {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {channels}x{height}x{width} frame",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }
}

/// Clip `i` stacks frames `i − K/2 ..= i + K/2`, replicating the first and
/// last frame past the stream boundaries.
pub fn make_context_clips(frames: &[Frame], k: usize) -> Result<Vec<FrameClip>> {
    if k.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "context length {k} is even; a clip needs a centre frame"
        )));
    }
    let first = frames.first().ok_or_else(|| Error::Empty("frame stream".into()))?;
    if let Some(i) = frames
        .iter()
        .position(|f| (f.height, f.width, f.channels) != (first.height, first.width, first.channels))
    {
        return Err(Error::DimensionMismatch(format!("frame {i} differs in size from frame 0")));
    }
    let n = frames.len() as isize;
    let half = (k / 2) as isize;
    Ok((0..n)
        .map(|i| {
            let pixels = (i - half..=i + half)
                .flat_map(|j| frames[j.clamp(0, n - 1) as usize].data.iter().copied())
                .collect();
            FrameClip {
                pixels,
                context_frames: k,
                height: first.height,
                width: first.width,
                channels: first.channels,
                center_index: i as usize,
            }
        })
        .collect())
}
