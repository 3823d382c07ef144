//! Grayscale frames, fixed-shape videos and the ISEV binary container.
//!
//! ISEV layout (little-endian): magic `ISEV`, version `u32 = 1`, then
//! `T`, `H`, `W` as `u32`, followed by `T*H*W` `f32` intensities in
//! frame-major, row-major order.

use std::io::{Read, Write};

use crate::error::{IseError, Result};

/// Side length of every frame rendered by the built-in environments.
pub const FRAME_SIZE: usize = 32;
/// Number of frames in a plan or interaction video (first frame + 7 predicted).
pub const PLAN_FRAMES: usize = 8;

pub const ISEV_MAGIC: [u8; 4] = *b"ISEV";
pub const ISEV_VERSION: u32 = 1;
pub const ISEV_HEADER_BYTES: usize = 20;

/// A single grayscale raster with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    pixels: Vec<f32>,
}

fn check_pixels(pixels: &[f32]) -> Result<()> {
    for (index, &value) in pixels.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(IseError::PixelRange { index, value });
        }
    }
    Ok(())
}

impl Frame {
    pub fn new(height: usize, width: usize, pixels: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(IseError::shape("frame dimensions must be positive"));
        }
        if pixels.len() != height * width {
            return Err(IseError::shape(format!(
                "frame of {height}x{width} needs {} pixels, got {}",
                height * width,
                pixels.len()
            )));
        }
        check_pixels(&pixels)?;
        Ok(Frame { height, width, pixels })
    }

    /// Frame filled with a constant intensity.
    pub fn filled(height: usize, width: usize, value: f32) -> Result<Self> {
        Frame::new(height, width, vec![value; height * width])
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Frame { height, width, pixels: vec![0.0; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    /// Writes one pixel, clamping into `[0, 1]`. Used by renderers.
    pub(crate) fn set(&mut self, row: usize, col: usize, value: f32) {
        self.pixels[row * self.width + col] = value.clamp(0.0, 1.0);
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.height == other.height && self.width == other.width
    }
}

/// Ordered, non-empty sequence of equally-shaped frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    frames: Vec<Frame>,
}

impl Video {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| IseError::shape("a video needs at least one frame"))?;
        if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| !f.same_shape(first)) {
            return Err(IseError::shape(format!(
                "frame {i} is {}x{}, expected {}x{}",
                f.height, f.width, first.height, first.width
            )));
        }
        Ok(Video { frames })
    }

    /// Builds a video from a flat frame-major buffer.
    pub fn from_flat(len: usize, height: usize, width: usize, data: &[f32]) -> Result<Self> {
        let per = height * width;
        if len == 0 || per == 0 {
            return Err(IseError::shape("video dimensions must be positive"));
        }
        if data.len() != len * per {
            return Err(IseError::shape(format!(
                "expected {} values for {len}x{height}x{width}, got {}",
                len * per,
                data.len()
            )));
        }
        let frames = data
            .chunks_exact(per)
            .map(|chunk| Frame::new(height, width, chunk.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Video::new(frames)
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn first_frame(&self) -> &Frame {
        &self.frames[0]
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    /// `(frames, height, width)`
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.len(), self.height(), self.width())
    }

    pub fn pixel_count(&self) -> usize {
        self.len() * self.height() * self.width()
    }

    /// All intensities in frame-major, row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = f32> + '_ {
        self.frames.iter().flat_map(|f| f.pixels.iter().copied())
    }

    pub fn to_flat(&self) -> Vec<f32> {
        self.pixels().collect()
    }

    /// Copy of this video with frame 0 swapped for `frame`.
    pub fn with_first_frame(&self, frame: &Frame) -> Result<Video> {
        if !frame.same_shape(&self.frames[0]) {
            return Err(IseError::shape("replacement first frame has a different shape"));
        }
        let mut frames = self.frames.clone();
        frames[0] = frame.clone();
        Ok(Video { frames })
    }

    pub fn ensure_same_shape(&self, other: &Video) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(IseError::shape(format!(
                "video shapes differ: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }
}

/// Serializes `video` as ISEV, returning the number of bytes written.
pub fn write_video<W: Write>(video: &Video, mut sink: W) -> Result<usize> {
    let (t, h, w) = video.shape();
    let mut buf = Vec::with_capacity(ISEV_HEADER_BYTES + 4 * t * h * w);
    buf.extend_from_slice(&ISEV_MAGIC);
    for v in [ISEV_VERSION, t as u32, h as u32, w as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for p in video.pixels() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    sink.write_all(&buf)?;
    Ok(buf.len())
}

pub fn read_video<R: Read>(mut source: R) -> Result<Video> {
    let mut header = [0u8; ISEV_HEADER_BYTES];
    let got = read_up_to(&mut source, &mut header)?;
    if got < 4 || header[..4] != ISEV_MAGIC {
        return Err(IseError::Format(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&header[..got.min(4)])
        )));
    }
    if got < ISEV_HEADER_BYTES {
        return Err(IseError::Truncated { expected: ISEV_HEADER_BYTES, actual: got });
    }
    let word = |i: usize| u32::from_le_bytes(header[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version != ISEV_VERSION {
        return Err(IseError::Format(format!("unsupported ISEV version {version}")));
    }
    let (t, h, w) = (word(1) as usize, word(2) as usize, word(3) as usize);
    if t == 0 || h == 0 || w == 0 {
        return Err(IseError::Format(format!("degenerate dimensions {t}x{h}x{w}")));
    }
    let expected = t
        .checked_mul(h)
        .and_then(|n| n.checked_mul(w))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| IseError::Format("dimensions overflow".into()))?;
    let mut payload = vec![0u8; expected];
    let actual = read_up_to(&mut source, &mut payload)?;
    if actual < expected {
        return Err(IseError::Truncated { expected, actual });
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Video::from_flat(t, h, w, &data)
}

fn read_up_to<R: Read>(source: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

pub fn save_video(video: &Video, path: &std::path::Path) -> Result<usize> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    let n = write_video(video, &mut w)?;
    w.flush()?;
    Ok(n)
}

pub fn load_video(path: &std::path::Path) -> Result<Video> {
    let file = std::fs::File::open(path)?;
    read_video(std::io::BufReader::new(file))
}
