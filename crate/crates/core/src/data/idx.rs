//! IDX container (big-endian, magic-checked), optionally gzip-compressed.
//!
//! Images are scaled to `[0, 1]`, zero-padded to 32x32 and standardized with
//! the training set's pixel mean and standard deviation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::Serialize;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
/// Side length images are padded to.
pub const PADDED: usize = 32;

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::IdxFormat {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut raw)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| format_err(path, format!("gzip: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Parses the header and returns `(dims, payload)`.
fn parse(path: &Path, bytes: &[u8], magic: u32) -> Result<(Vec<usize>, Vec<u8>)> {
    if bytes.len() < 4 {
        return Err(format_err(path, "truncated header"));
    }
    let found = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes"));
    if found != magic {
        return Err(format_err(path, format!("bad magic 0x{found:08x}, expected 0x{magic:08x}")));
    }
    let ndim = (magic & 0xff) as usize;
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(format_err(path, "truncated header"));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().expect("4 bytes")) as usize)
        .collect();
    let expected: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() != expected {
        return Err(format_err(
            path,
            format!("payload has {} bytes, header promises {expected}", payload.len()),
        ));
    }
    Ok((dims, payload.to_vec()))
}

/// Raw unsigned-byte images.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

pub fn read_images(path: &Path) -> Result<IdxImages> {
    let (dims, pixels) = parse(path, &read_all(path)?, IMAGE_MAGIC)?;
    Ok(IdxImages {
        count: dims[0],
        rows: dims[1],
        cols: dims[2],
        pixels,
    })
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    Ok(parse(path, &read_all(path)?, LABEL_MAGIC)?.1)
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(bytes)?;
        enc.finish()?.flush()?;
    } else {
        let mut file = file;
        file.write_all(bytes)?;
        file.flush()?;
    }
    Ok(())
}

/// Writes an image file; gzip-compressed when `path` ends in `.gz`.
pub fn write_images(path: &Path, images: &IdxImages) -> Result<()> {
    if images.pixels.len() != images.count * images.rows * images.cols {
        return Err(Error::invalid("pixel buffer does not match the image dimensions"));
    }
    let mut bytes = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGE_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    bytes.extend_from_slice(&images.pixels);
    write_all(path, &bytes)
}

pub fn write_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    write_all(path, &bytes)
}

/// Per-pixel standardization constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

impl Normalization {
    /// Mean and standard deviation of all pixels, scaled to `[0, 1]`.
    pub fn from_images(images: &IdxImages) -> Result<Self> {
        let n = images.pixels.len();
        if n == 0 {
            return Err(Error::invalid("no pixels to normalize"));
        }
        let mean = images.pixels.iter().map(|&p| p as f64 / 255.0).sum::<f64>() / n as f64;
        let var = images
            .pixels
            .iter()
            .map(|&p| (p as f64 / 255.0 - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        let std = var.sqrt();
        if !(std > 0.0) {
            return Err(Error::invalid("constant images cannot be standardized"));
        }
        Ok(Normalization { mean, std })
    }
}

/// Pads to 32x32 and standardizes; labels must be below 10.
pub fn to_dataset(name: &str, images: &IdxImages, labels: &[u8], norm: Normalization) -> Result<LabeledDataset> {
    if images.count != labels.len() {
        return Err(Error::invalid(format!(
            "{} images but {} labels",
            images.count,
            labels.len()
        )));
    }
    if images.rows > PADDED || images.cols > PADDED {
        return Err(Error::invalid(format!(
            "images of {}x{} exceed {PADDED}x{PADDED}",
            images.rows, images.cols
        )));
    }
    let (top, left) = ((PADDED - images.rows) / 2, (PADDED - images.cols) / 2);
    let background = (0.0 - norm.mean) / norm.std;
    let mut data = vec![background; images.count * PADDED * PADDED];
    for (img, out) in images
        .pixels
        .chunks_exact(images.rows * images.cols)
        .zip(data.chunks_exact_mut(PADDED * PADDED))
    {
        for r in 0..images.rows {
            for c in 0..images.cols {
                let v = img[r * images.cols + c] as f64 / 255.0;
                out[(r + top) * PADDED + c + left] = (v - norm.mean) / norm.std;
            }
        }
    }
    let labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    LabeledDataset::new(
        name,
        Tensor::from_vec(&[images.count, PADDED, PADDED, 1], data)?,
        labels,
        10,
    )
}

/// Loads one image/label pair, standardized with its own statistics.
pub fn load_mnist_idx(images: &Path, labels: &Path) -> Result<LabeledDataset> {
    let img = read_images(images)?;
    let lab = read_labels(labels)?;
    if img.count != lab.len() {
        return Err(format_err(
            labels,
            format!("{} labels for {} images", lab.len(), img.count),
        ));
    }
    let norm = Normalization::from_images(&img)?;
    to_dataset("mnist", &img, &lab, norm)
}

/// Expected file stems inside an MNIST directory; a `.gz` suffix is optional.
pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

fn locate(dir: &Path, stem: &str) -> Result<PathBuf> {
    for candidate in [dir.join(stem), dir.join(format!("{stem}.gz"))] {
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    Err(Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("{} not found (plain or .gz)", dir.join(stem).display()),
    )))
}

/// Loads the training and test splits from `dir`; both are standardized
/// with the training-set statistics.
pub fn load_mnist_dir(dir: &Path) -> Result<(LabeledDataset, LabeledDataset, Normalization)> {
    let paths: Vec<PathBuf> = MNIST_FILES.iter().map(|s| locate(dir, s)).collect::<Result<_>>()?;
    let train_img = read_images(&paths[0])?;
    let train_lab = read_labels(&paths[1])?;
    let test_img = read_images(&paths[2])?;
    let test_lab = read_labels(&paths[3])?;
    let norm = Normalization::from_images(&train_img)?;
    let train = to_dataset("mnist-train", &train_img, &train_lab, norm)?;
    let test = to_dataset("mnist-test", &test_img, &test_lab, norm)?;
    Ok((train, test, norm))
}
