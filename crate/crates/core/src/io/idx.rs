//! MNIST IDX reader (big-endian headers, unsigned byte payloads).

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Environment variable overriding the MNIST directory.
pub const DATA_DIR_ENV: &str = "SNNACCEL_MNIST_DIR";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` bytes, image after image.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        self.pixels.len().checked_div(self.rows * self.cols).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn u32_be(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Parse {
            offset: self.bytes.len(),
            msg: format!("truncated while reading {what} ({n} bytes needed at offset {})", self.pos),
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Parse {
                offset: self.pos,
                msg: format!("{} trailing bytes", self.bytes.len() - self.pos),
            });
        }
        Ok(())
    }
}

fn expect_magic(c: &mut Cursor<'_>, magic: u32) -> Result<()> {
    let got = c.u32_be("magic")?;
    if got != magic {
        return Err(Error::Parse { offset: 0, msg: format!("bad magic {got:#010x}, expected {magic:#010x}") });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let mut c = Cursor { bytes, pos: 0 };
    expect_magic(&mut c, IMAGES_MAGIC)?;
    let count = c.u32_be("image count")? as usize;
    let rows = c.u32_be("row count")? as usize;
    let cols = c.u32_be("column count")? as usize;
    let n = count
        .checked_mul(rows)
        .and_then(|x| x.checked_mul(cols))
        .ok_or_else(|| Error::Parse { offset: 4, msg: "image dimensions overflow".into() })?;
    let pixels = c.take(n, "pixel payload")?.to_vec();
    c.finish()?;
    Ok(IdxImages { rows, cols, pixels })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut c = Cursor { bytes, pos: 0 };
    expect_magic(&mut c, LABELS_MAGIC)?;
    let count = c.u32_be("label count")? as usize;
    let labels = c.take(count, "label payload")?.to_vec();
    c.finish()?;
    if let Some(i) = labels.iter().position(|&l| l > 9) {
        return Err(Error::Parse { offset: 8 + i, msg: format!("label {} outside 0..=9", labels[i]) });
    }
    Ok(labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

/// Labelled image set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxDataset {
    pub rows: usize,
    pub cols: usize,
    pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl IdxDataset {
    /// Decodes and cross-checks an image file and a label file.
    pub fn from_bytes(images: &[u8], labels: &[u8]) -> Result<Self> {
        let img = parse_idx_images(images)?;
        let labels = parse_idx_labels(labels)?;
        if img.len() != labels.len() {
            return Err(Error::Parse {
                offset: 4,
                msg: format!("{} images but {} labels", img.len(), labels.len()),
            });
        }
        Ok(IdxDataset { rows: img.rows, cols: img.cols, pixels: img.pixels, labels })
    }

    pub fn load(dir: &Path, split: Split) -> Result<Self> {
        let p = split.prefix();
        let images = read(&dir.join(format!("{p}-images-idx3-ubyte")))?;
        let labels = read(&dir.join(format!("{p}-labels-idx1-ubyte")))?;
        IdxDataset::from_bytes(&images, &labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.image_len();
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn images(&self) -> Vec<&[u8]> {
        (0..self.len()).map(|i| self.image(i)).collect()
    }

    /// First `n` samples (or all of them).
    pub fn head(&self, n: usize) -> IdxDataset {
        let n = n.min(self.len());
        IdxDataset {
            rows: self.rows,
            cols: self.cols,
            pixels: self.pixels[..n * self.image_len()].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }

    /// Samples `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> IdxDataset {
        let end = end.min(self.len());
        let start = start.min(end);
        IdxDataset {
            rows: self.rows,
            cols: self.cols,
            pixels: self.pixels[start * self.image_len()..end * self.image_len()].to_vec(),
            labels: self.labels[start..end].to_vec(),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// MNIST directory: `$SNNACCEL_MNIST_DIR`, else `data/mnist`.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data/mnist"))
}

/// Encodes images in IDX form (used to build fixtures).
pub fn encode_idx_images(count: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + pixels.len());
    for x in [IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&x.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_byte_file_is_truncated() {
        let err = parse_idx_images(&IMAGES_MAGIC.to_be_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { offset: 4, .. }), "{err}");
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let bytes = encode_idx_labels(&[1, 2]);
        assert!(parse_idx_images(&bytes).is_err());
        let imgs = encode_idx_images(1, 2, 2, &[0, 1, 2, 3]);
        assert!(parse_idx_labels(&imgs).is_err());
    }

    #[test]
    fn small_dataset_round_trip() {
        let px: Vec<u8> = (0..2 * 3 * 3).map(|x| x as u8).collect();
        let ds = IdxDataset::from_bytes(&encode_idx_images(2, 3, 3, &px), &encode_idx_labels(&[7, 3])).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.image(1), &px[9..]);
        assert_eq!(ds.labels, vec![7, 3]);
        assert_eq!(ds.head(1).len(), 1);
        assert_eq!(ds.slice(1, 5).labels, vec![3]);
    }

    #[test]
    fn count_mismatch_and_bad_labels() {
        let px = vec![0u8; 8];
        assert!(IdxDataset::from_bytes(&encode_idx_images(2, 2, 2, &px), &encode_idx_labels(&[1])).is_err());
        assert!(parse_idx_labels(&encode_idx_labels(&[1, 10])).is_err());
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut b = encode_idx_labels(&[1]);
        b.push(0);
        assert!(parse_idx_labels(&b).is_err());
    }
}
