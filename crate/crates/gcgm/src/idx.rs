//! IDX reader for the MNIST image and label files.
//!
//! Files may be raw or gzip-compressed; compression is detected from the
//! leading `1f 8b` bytes rather than the file name. Every header field is a
//! big-endian `u32`. Errors report the byte offset (in the decompressed
//! stream) at which the file stopped making sense.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use gcgm_core::DataMatrix;
use sha2::{Digest, Sha256};

use crate::Error;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// `count · rows · cols` pixels, image-major.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.pixels.len().checked_div(self.rows * self.cols).unwrap_or(0)
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let len = self.rows * self.cols;
        &self.pixels[i * len..(i + 1) * len]
    }
}

/// Whole file contents with gzip transparently removed.
pub fn read_bytes(path: &Path) -> Result<Vec<u8>, Error> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::format(path, out.len() as u64, format!("corrupt gzip stream: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Hex SHA-256 of the decompressed contents.
pub fn checksum(path: &Path) -> Result<String, Error> {
    let bytes = read_bytes(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn u32(&mut self, what: &str) -> Result<u32, Error> {
        let end = self.pos + 4;
        if end > self.bytes.len() {
            return Err(Error::format(self.path, self.pos as u64, format!("truncated header: missing {what}")));
        }
        let v = u32::from_be_bytes(self.bytes[self.pos..end].try_into().expect("four bytes"));
        self.pos = end;
        Ok(v)
    }

    fn magic(&mut self, expected: u32) -> Result<(), Error> {
        let at = self.pos as u64;
        let magic = self.u32("magic number")?;
        if magic != expected {
            return Err(Error::format(
                self.path,
                at,
                format!("bad magic number 0x{magic:08x}, expected 0x{expected:08x}"),
            ));
        }
        Ok(())
    }

    fn body(&self, len: usize) -> Result<&[u8], Error> {
        let have = self.bytes.len() - self.pos;
        if have < len {
            return Err(Error::format(
                self.path,
                self.bytes.len() as u64,
                format!("truncated data: expected {len} bytes after the header, found {have}"),
            ));
        }
        if have > len {
            return Err(Error::format(
                self.path,
                (self.pos + len) as u64,
                format!("{} trailing bytes after the declared data", have - len),
            ));
        }
        Ok(&self.bytes[self.pos..])
    }
}

pub fn parse_images(path: &Path, bytes: &[u8]) -> Result<IdxImages, Error> {
    let mut cur = Cursor { path, bytes, pos: 0 };
    cur.magic(IMAGES_MAGIC)?;
    let count = cur.u32("image count")? as usize;
    let rows = cur.u32("row count")? as usize;
    let cols = cur.u32("column count")? as usize;
    let len = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::format(path, 4, "image dimensions overflow"))?;
    let pixels = cur.body(len)?.to_vec();
    Ok(IdxImages { rows, cols, pixels })
}

pub fn parse_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u8>, Error> {
    let mut cur = Cursor { path, bytes, pos: 0 };
    cur.magic(LABELS_MAGIC)?;
    let count = cur.u32("label count")? as usize;
    Ok(cur.body(count)?.to_vec())
}

pub fn read_images(path: &Path) -> Result<IdxImages, Error> {
    parse_images(path, &read_bytes(path)?)
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>, Error> {
    parse_labels(path, &read_bytes(path)?)
}

/// Rows of `images` whose label is one of `digits`, pixels scaled to `[0, 1]`.
/// The first digit is labelled `−1` and the second `+1`.
pub fn load_mnist_pair(images: &Path, labels: &Path, digits: (u8, u8)) -> Result<DataMatrix, Error> {
    if digits.0 == digits.1 {
        return Err(Error::Usage("the two digits must differ".into()));
    }
    let imgs = read_images(images)?;
    let labs = read_labels(labels)?;
    if imgs.count() != labs.len() {
        // the count field sits right after the magic number
        return Err(Error::format(
            labels,
            4,
            format!("{} labels for {} images in {}", labs.len(), imgs.count(), images.display()),
        ));
    }
    let d = imgs.rows * imgs.cols;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (i, &label) in labs.iter().enumerate() {
        let target = if label == digits.0 {
            -1.0
        } else if label == digits.1 {
            1.0
        } else {
            continue;
        };
        a.extend(imgs.image(i).iter().map(|p| f64::from(*p) / 255.0));
        b.push(target);
    }
    if b.is_empty() {
        return Err(Error::Usage(format!("no images labelled {} or {}", digits.0, digits.1)));
    }
    Ok(DataMatrix::new(b.len(), d, a, b)?)
}
