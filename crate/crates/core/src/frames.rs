//! 8-bit grayscale frame stacks and the `FSTK` container format.
//!
//! Layout: magic `FSTK`, little-endian `u32` width, height and count, then
//! `count * height * width` bytes, frame-major, row-major.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"FSTK";

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("bad dimensions: {0}")]
    BadDimensions(String),
    #[error("not a frame stack (bad magic)")]
    BadMagic,
    #[error("frame stack truncated: expected {expected} pixel bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Borrowed view of one grayscale frame.
#[derive(Debug, Clone, Copy)]
pub struct FrameView<'a> {
    pub width: usize,
    pub height: usize,
    pub data: &'a [u8],
}

impl<'a> FrameView<'a> {
    pub fn new(width: usize, height: usize, data: &'a [u8]) -> Result<Self, FrameError> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(FrameError::BadDimensions(format!(
                "{width}x{height} frame with {} bytes",
                data.len()
            )));
        }
        Ok(FrameView { width, height, data })
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Pixel with coordinates clamped to the frame (edge replication).
    #[inline]
    pub fn clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.at(x, y)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameStack {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl FrameStack {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::BadDimensions(format!("{width}x{height}")));
        }
        if !pixels.len().is_multiple_of(width * height) {
            return Err(FrameError::BadDimensions(format!(
                "{} bytes is not a whole number of {width}x{height} frames",
                pixels.len()
            )));
        }
        Ok(FrameStack { width, height, pixels })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self, FrameError> {
        FrameStack::new(width, height, Vec::new())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn count(&self) -> usize {
        self.pixels.len() / (self.width * self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn frame(&self, t: usize) -> FrameView<'_> {
        let size = self.width * self.height;
        FrameView {
            width: self.width,
            height: self.height,
            data: &self.pixels[t * size..(t + 1) * size],
        }
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = FrameView<'_>> + '_ {
        (0..self.count()).map(move |t| self.frame(t))
    }

    pub fn push_frame(&mut self, frame: &[u8]) -> Result<(), FrameError> {
        if frame.len() != self.width * self.height {
            return Err(FrameError::BadDimensions(format!(
                "frame of {} bytes pushed to {}x{} stack",
                frame.len(),
                self.width,
                self.height
            )));
        }
        self.pixels.extend_from_slice(frame);
        Ok(())
    }

    /// Copy of every `step`-th frame, starting with the first.
    pub fn every_nth(&self, step: usize) -> FrameStack {
        let size = self.width * self.height;
        let pixels = (0..self.count())
            .step_by(step.max(1))
            .flat_map(|t| &self.pixels[t * size..(t + 1) * size])
            .copied()
            .collect();
        FrameStack {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// Copy of frames `start..=end`.
    pub fn slice(&self, start: usize, end: usize) -> FrameStack {
        let size = self.width * self.height;
        FrameStack {
            width: self.width,
            height: self.height,
            pixels: self.pixels[start * size..(end + 1) * size].to_vec(),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), FrameError> {
        w.write_all(MAGIC)?;
        for v in [self.width, self.height, self.count()] {
            let v = u32::try_from(v).map_err(|_| FrameError::BadDimensions(format!("{v} exceeds u32")))?;
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.pixels)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, FrameError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| FrameError::BadMagic)?;
        if &magic != MAGIC {
            return Err(FrameError::BadMagic);
        }
        let mut header = [0u8; 12];
        r.read_exact(&mut header).map_err(|_| FrameError::Truncated { expected: 12, got: 0 })?;
        let field = |i: usize| u32::from_le_bytes(header[i * 4..i * 4 + 4].try_into().unwrap()) as usize;
        let (width, height, count) = (field(0), field(1), field(2));
        let expected = width
            .checked_mul(height)
            .and_then(|s| s.checked_mul(count))
            .ok_or_else(|| FrameError::BadDimensions(format!("{width}x{height}x{count} overflows")))?;
        let mut pixels = Vec::with_capacity(expected.min(1 << 28));
        r.take(expected as u64).read_to_end(&mut pixels)?;
        if pixels.len() != expected {
            return Err(FrameError::Truncated {
                expected,
                got: pixels.len(),
            });
        }
        FrameStack::new(width, height, pixels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FrameError> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FrameError> {
        FrameStack::read_from(BufReader::new(File::open(path)?))
    }
}
