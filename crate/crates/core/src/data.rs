//! MNIST IDX ingestion and row-wise sequence batching.
//!
//! An image of `rows × cols` pixels becomes a sequence of `rows` vectors of
//! length `cols` (top row first), each pixel scaled by 1/255.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::rng::{Purpose, SplitMix64};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const NUM_CLASSES: usize = 10;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// `count × rows × cols` bytes, row-major per image.
    pub pixels: Vec<u8>,
}

fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Format {
                path: path.to_path_buf(),
                offset: 0,
                reason: format!("bad gzip stream: {e}"),
            })?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset: self.pos as u64,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(format!(
                "truncated: needed {n} bytes, {} remain",
                self.bytes.len() - self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32_be(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn magic(&mut self, expected: u32, what: &str) -> Result<()> {
        let magic = self.u32_be()?;
        if magic != expected {
            self.pos -= 4;
            return Err(self.fail(format!("magic {magic} is not the {what} magic {expected}")));
        }
        Ok(())
    }
}

/// Parses an IDX3 unsigned-byte image file (plain or gzip).
pub fn read_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    let bytes = read_maybe_gzip(path)?;
    let mut cur = Cursor {
        path,
        bytes: &bytes,
        pos: 0,
    };
    cur.magic(IMAGE_MAGIC, "image")?;
    let count = cur.u32_be()? as usize;
    let rows = cur.u32_be()? as usize;
    let cols = cur.u32_be()? as usize;
    if count > 0 && (rows == 0 || cols == 0) {
        return Err(cur.fail(format!("degenerate image size {rows}x{cols}")));
    }
    let pixels = cur.take(count * rows * cols)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

/// Parses an IDX1 unsigned-byte label file (plain or gzip). Every label must
/// be a digit class.
pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let bytes = read_maybe_gzip(path)?;
    let mut cur = Cursor {
        path,
        bytes: &bytes,
        pos: 0,
    };
    cur.magic(LABEL_MAGIC, "label")?;
    let count = cur.u32_be()? as usize;
    let start = cur.pos;
    let labels = cur.take(count)?.to_vec();
    if let Some(i) = labels.iter().position(|&l| l as usize >= NUM_CLASSES) {
        cur.pos = start + i;
        return Err(cur.fail(format!("label {} is not a digit class", labels[i])));
    }
    Ok(labels)
}

pub fn write_idx_images(path: impl AsRef<Path>, images: &IdxImages) -> Result<()> {
    let path = path.as_ref();
    if images.pixels.len() != images.count * images.rows * images.cols {
        return Err(Error::invalid(
            "pixel buffer does not match image dimensions",
        ));
    }
    let mut buf = Vec::with_capacity(16 + images.pixels.len());
    for word in [
        IMAGE_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        buf.extend_from_slice(&word.to_be_bytes());
    }
    buf.extend_from_slice(&images.pixels);
    write_file(path, &buf)
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + labels.len());
    buf.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    buf.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    buf.extend_from_slice(labels);
    write_file(path.as_ref(), &buf)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Labeled images kept as raw bytes; sequences are materialized per batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
    labels: Vec<usize>,
}

/// Pairs images with labels, optionally keeping only the first `limit`
/// examples.
pub fn to_sequences(images: IdxImages, labels: &[u8], limit: Option<usize>) -> Result<Split> {
    if images.count != labels.len() {
        return Err(Error::Consistency(format!(
            "{} images but {} labels",
            images.count,
            labels.len()
        )));
    }
    let keep = limit.map_or(images.count, |l| l.min(images.count));
    let mut pixels = images.pixels;
    pixels.truncate(keep * images.rows * images.cols);
    Ok(Split {
        rows: images.rows,
        cols: images.cols,
        pixels,
        labels: labels[..keep].iter().map(|&l| l as usize).collect(),
    })
}

impl Split {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Sequence length (image rows).
    pub fn steps(&self) -> usize {
        self.rows
    }

    /// Input width (image columns).
    pub fn width(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn sequence(&self, i: usize) -> Vec<Vector> {
        let size = self.rows * self.cols;
        self.pixels[i * size..(i + 1) * size]
            .chunks_exact(self.cols)
            .map(|row| Vector::from_raw(row.iter().map(|&p| f64::from(p) / 255.0).collect()))
            .collect()
    }

    /// The first `n` examples (or all of them, if fewer).
    pub fn head(&self, n: usize) -> Split {
        let keep = n.min(self.len());
        Split {
            rows: self.rows,
            cols: self.cols,
            pixels: self.pixels[..keep * self.rows * self.cols].to_vec(),
            labels: self.labels[..keep].to_vec(),
        }
    }

    pub fn batch(&self, indices: &[usize]) -> SequenceBatch {
        SequenceBatch {
            inputs: indices.iter().map(|&i| self.sequence(i)).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            indices: indices.to_vec(),
        }
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// A minibatch of equal-length sequences with their labels and their indices
/// into the source split.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    pub inputs: Vec<Vec<Vector>>,
    pub labels: Vec<usize>,
    pub indices: Vec<usize>,
}

impl SequenceBatch {
    pub fn new(inputs: Vec<Vec<Vector>>, labels: Vec<usize>) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != labels.len() {
            return Err(Error::invalid(format!(
                "batch needs matching nonempty inputs and labels ({} vs {})",
                inputs.len(),
                labels.len()
            )));
        }
        let steps = inputs[0].len();
        if inputs.iter().any(|s| s.len() != steps) {
            return Err(Error::invalid("sequences in a batch must share one length"));
        }
        let indices = (0..inputs.len()).collect();
        Ok(Self {
            inputs,
            labels,
            indices,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// The epoch's example order split into batches: a Fisher–Yates permutation
/// drawn from the `(seed, epoch)` shuffle stream, cut into chunks of
/// `batch_size` with the final short chunk kept.
pub fn batch_indices(
    n: usize,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::stream(seed, Purpose::Shuffle, epoch).shuffle(&mut order);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

pub fn batches(
    split: &Split,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<SequenceBatch>> {
    Ok(batch_indices(split.len(), batch_size, seed, epoch)?
        .iter()
        .map(|idx| split.batch(idx))
        .collect())
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Split,
    pub test: Split,
}

fn locate(dir: &Path, stem: &str) -> Result<PathBuf> {
    for candidate in [dir.join(stem), dir.join(format!("{stem}.gz"))] {
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    Err(Error::io(
        dir.join(stem),
        std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "MNIST file not found (also tried .gz)",
        ),
    ))
}

impl Dataset {
    /// Loads the four standard MNIST files from `dir`.
    pub fn load(
        dir: impl AsRef<Path>,
        train_limit: Option<usize>,
        test_limit: Option<usize>,
    ) -> Result<Self> {
        let dir = dir.as_ref();
        let load_split = |images: &str, labels: &str, limit| -> Result<Split> {
            let imgs = read_idx_images(locate(dir, images)?)?;
            let labels = read_idx_labels(locate(dir, labels)?)?;
            to_sequences(imgs, &labels, limit)
        };
        Ok(Self {
            train: load_split(TRAIN_IMAGES, TRAIN_LABELS, train_limit)?,
            test: load_split(TEST_IMAGES, TEST_LABELS, test_limit)?,
        })
    }
}

pub const FETCH_HINT: &str = "MNIST files not found. Download train-images-idx3-ubyte, \
train-labels-idx1-ubyte, t10k-images-idx3-ubyte and t10k-labels-idx1-ubyte \
(gzip or plain) from a MNIST mirror into the directory passed with --data-dir.";
