//! MNIST IDX container reader.
//!
//! Image files carry magic `0x00000803` followed by three big-endian `u32`
//! dimensions (count, rows, cols); label files carry `0x00000801` and a count.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{Dataset, NnError, Split};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Pinned SHA-256 digests of the uncompressed official MNIST files.
pub const MNIST_SHA256: [(&str, &str); 4] = [
    (
        TRAIN_IMAGES,
        "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db",
    ),
    (
        TRAIN_LABELS,
        "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5",
    ),
    (
        TEST_IMAGES,
        "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7",
    ),
    (
        TEST_LABELS,
        "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2",
    ),
];

/// Size of the validation split carved from the tail of the training file.
pub const VALIDATION_SIZE: usize = 10_000;

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32, NnError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| NnError::Truncated {
            path: path.to_path_buf(),
            expected: offset + 4,
            actual: bytes.len(),
        })
}

/// Parses an IDX image file into `(count, rows, cols, pixel bytes)`.
pub fn parse_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>), NnError> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != IMAGE_MAGIC {
        return Err(NnError::BadMagic {
            path: path.to_path_buf(),
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() < expected {
        return Err(NnError::Truncated {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len(),
        });
    }
    Ok((count, rows, cols, bytes[16..expected].to_vec()))
}

/// Parses an IDX label file, rejecting labels outside 0..=9.
pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>, NnError> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != LABEL_MAGIC {
        return Err(NnError::BadMagic {
            path: path.to_path_buf(),
            expected: LABEL_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4, path)? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(NnError::Truncated {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len(),
        });
    }
    let labels = bytes[8..expected].to_vec();
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
        return Err(NnError::InvalidLabel { index, label });
    }
    Ok(labels)
}

fn read(path: &Path) -> Result<Vec<u8>, NnError> {
    fs::read(path).map_err(|source| NnError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads an image/label file pair. Pixel bytes are scaled to [0,1] by 1/255.
pub fn load_idx(
    path_images: impl AsRef<Path>,
    path_labels: impl AsRef<Path>,
    split: Split,
) -> Result<Dataset, NnError> {
    let path_images = path_images.as_ref();
    let path_labels = path_labels.as_ref();
    let (count, rows, cols, pixels) = parse_images(&read(path_images)?, path_images)?;
    let labels = parse_labels(&read(path_labels)?, path_labels)?;
    if labels.len() != count {
        return Err(NnError::CountMismatch {
            images: count,
            labels: labels.len(),
        });
    }
    Dataset::from_bytes(pixels, rows * cols, 1.0 / 255.0, labels, split)
}

/// Checks a file against its pinned digest, if one is known for its name.
pub fn verify_sha256(path: &Path) -> Result<(), NnError> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let Some((_, pinned)) = MNIST_SHA256.iter().find(|(n, _)| *n == name) else {
        return Ok(());
    };
    let digest = hex::encode(Sha256::digest(read(path)?));
    if digest != *pinned {
        return Err(NnError::Checksum {
            path: path.to_path_buf(),
            expected: (*pinned).to_string(),
            found: digest,
        });
    }
    Ok(())
}

/// The three MNIST splits: 50000 train, 10000 validation (tail of the
/// training file) and the 10000-image test file.
#[derive(Debug, Clone)]
pub struct Mnist {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

impl Mnist {
    pub fn load(dir: impl AsRef<Path>, verify: bool) -> Result<Self, NnError> {
        let dir = dir.as_ref();
        let path = |name: &str| -> PathBuf { dir.join(name) };
        if verify {
            for (name, _) in MNIST_SHA256 {
                verify_sha256(&path(name))?;
            }
        }
        let full = load_idx(path(TRAIN_IMAGES), path(TRAIN_LABELS), Split::Train)?;
        let test = load_idx(path(TEST_IMAGES), path(TEST_LABELS), Split::Test)?;
        let cut = full.len().saturating_sub(VALIDATION_SIZE);
        let (train, mut validation) = full.split_at(cut);
        validation.split = Split::Validation;
        Ok(Self {
            train,
            validation,
            test,
        })
    }

    pub fn binarize(&self, threshold: f64) -> Self {
        Self {
            train: self.train.binarize(threshold),
            validation: self.validation.binarize(threshold),
            test: self.test.binarize(threshold),
        }
    }
}
