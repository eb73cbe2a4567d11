//! The IDX container used by the MNIST distribution: a big-endian magic
//! number (`0x00000803` for images, `0x00000801` for labels), one
//! big-endian `u32` per dimension, then unsigned bytes in row-major order.

use std::io::{Error as IoError, ErrorKind};
use std::path::Path;

use mflimit_core::data::Dataset;
use mflimit_core::DataModel;

use crate::error::{CliError, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Images as stored: `count` images of `rows x cols` bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[i * size..(i + 1) * size]
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            let msg = format!("truncated IDX file: {what} needs {n} bytes at offset {}, file has {}", self.pos, self.bytes.len());
            return Err(CliError::io(self.path, IoError::new(ErrorKind::UnexpectedEof, msg)));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn magic(&mut self, want: u32) -> Result<()> {
        let got = self.u32("magic number")?;
        if got == want {
            return Ok(());
        }
        let hint = if got == want.swap_bytes() { " (little-endian header; IDX is big-endian)" } else { "" };
        Err(CliError::Format { path: self.path.into(), offset: 0, message: format!("bad magic number {got:#010x}, expected {want:#010x}{hint}") })
    }

    fn finish(&self) -> Result<()> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(CliError::Format { path: self.path.into(), offset: self.pos as u64, message: format!("{} trailing bytes", self.bytes.len() - self.pos) })
        }
    }
}

pub fn parse_images(bytes: &[u8], path: &Path) -> Result<IdxImages> {
    let mut r = Reader { bytes, pos: 0, path };
    r.magic(IMAGE_MAGIC)?;
    let count = r.u32("image count")? as usize;
    let rows = r.u32("row count")? as usize;
    let cols = r.u32("column count")? as usize;
    let size = count.checked_mul(rows).and_then(|v| v.checked_mul(cols)).ok_or_else(|| CliError::Format { path: path.into(), offset: 4, message: "dimensions overflow".into() })?;
    let pixels = r.take(size, "pixel data")?.to_vec();
    r.finish()?;
    Ok(IdxImages { count, rows, cols, pixels })
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let mut r = Reader { bytes, pos: 0, path };
    r.magic(LABEL_MAGIC)?;
    let count = r.u32("label count")? as usize;
    let labels = r.take(count, "label data")?.to_vec();
    r.finish()?;
    Ok(labels)
}

pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGE_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Binary regression on two digits: `x = pixels / 255`, `y = -1` for the
/// first digit of the pair and `+1` for the second; other digits dropped.
pub fn load_mnist_idx(images: &Path, labels: &Path, digits: (u8, u8)) -> Result<DataModel> {
    if digits.0 == digits.1 {
        return Err(CliError::Config(format!("digit pair needs two different digits, got ({}, {})", digits.0, digits.1)));
    }
    let read = |p: &Path| std::fs::read(p).map_err(|e| CliError::io(p, e));
    let imgs = parse_images(&read(images)?, images)?;
    let labs = parse_labels(&read(labels)?, labels)?;
    digit_pair(&imgs, &labs, digits, images)
}

pub fn digit_pair(imgs: &IdxImages, labs: &[u8], digits: (u8, u8), path: &Path) -> Result<DataModel> {
    if imgs.count != labs.len() {
        return Err(CliError::Format { path: path.into(), offset: 4, message: format!("{} images but {} labels", imgs.count, labs.len()) });
    }
    let dim = imgs.rows * imgs.cols;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, &l) in labs.iter().enumerate() {
        let target = if l == digits.0 {
            -1.0
        } else if l == digits.1 {
            1.0
        } else {
            continue;
        };
        x.extend(imgs.image(i).iter().map(|&p| p as f64 / 255.0));
        y.push(target);
    }
    if y.is_empty() {
        return Err(CliError::Config(format!("no images of digits {} or {}", digits.0, digits.1)));
    }
    Ok(DataModel::from_dataset(Dataset::new(dim, x, y)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_images() -> (IdxImages, Vec<u8>) {
        let pixels = vec![0, 255, 51, 0, 10, 20, 30, 40];
        (IdxImages { count: 2, rows: 2, cols: 2, pixels }, vec![7, 3])
    }

    #[test]
    fn hand_built_file_round_trips() {
        let (imgs, labs) = two_images();
        let bytes = encode_images(&imgs);
        assert_eq!(&bytes[..16], &[0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2]);
        let p = Path::new("x");
        assert_eq!(parse_images(&bytes, p).unwrap(), imgs);
        assert_eq!(parse_labels(&encode_labels(&labs), p).unwrap(), labs);
        let model = digit_pair(&imgs, &labs, (3, 7), p).unwrap();
        let ds = model.dataset().unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.x_of(0), &[0.0, 1.0, 0.2, 0.0]);
        assert_eq!(ds.labels(), &[1.0, -1.0]);
    }

    #[test]
    fn rejects_wrong_magic_and_endianness() {
        let (imgs, _) = two_images();
        let mut bytes = encode_images(&imgs);
        let p = Path::new("x");
        assert!(matches!(parse_labels(&bytes, p), Err(CliError::Format { offset: 0, .. })));
        bytes[..4].copy_from_slice(&IMAGE_MAGIC.to_le_bytes());
        let e = parse_images(&bytes, p).unwrap_err();
        assert!(e.to_string().contains("little-endian"), "{e}");
    }

    #[test]
    fn truncation_is_an_io_error() {
        let (imgs, _) = two_images();
        let bytes = encode_images(&imgs);
        let e = parse_images(&bytes[..bytes.len() - 1], Path::new("x")).unwrap_err();
        assert!(matches!(&e, CliError::Io { source, .. } if source.kind() == ErrorKind::UnexpectedEof), "{e}");
        assert!(parse_images(&bytes[..10], Path::new("x")).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(parse_images(&long, Path::new("x")), Err(CliError::Format { offset: 24, .. })));
    }

    #[test]
    fn digit_pair_preconditions() {
        let (imgs, labs) = two_images();
        let p = Path::new("x");
        assert!(matches!(load_mnist_idx(p, p, (4, 4)), Err(CliError::Config(_))));
        assert!(digit_pair(&imgs, &labs[..1], (3, 7), p).is_err());
        assert!(digit_pair(&imgs, &labs, (1, 2), p).is_err());
    }
}
