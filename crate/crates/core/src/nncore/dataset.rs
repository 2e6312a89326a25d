use serde::{Deserialize, Serialize};

use super::{NnError, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Labelled images stored as raw bytes with a common scale, so a pixel value
/// is `byte * scale` (1/255 for raw MNIST, 1 after binarization).
#[derive(Debug, Clone)]
pub struct Dataset {
    pixels: Vec<u8>,
    dim: usize,
    scale: f64,
    labels: Vec<u8>,
    pub split: Split,
}

/// A dense row-major block of inputs ready for a training step.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub dim: usize,
    pub inputs: Vec<f64>,
    pub labels: Vec<u8>,
}

impl Batch {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            inputs: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: &[u8]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        Self {
            dim,
            inputs: rows.iter().flatten().copied().collect(),
            labels: labels.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }
}

impl Dataset {
    pub fn from_bytes(
        pixels: Vec<u8>,
        dim: usize,
        scale: f64,
        labels: Vec<u8>,
        split: Split,
    ) -> Result<Self, NnError> {
        if dim == 0 || pixels.len() != dim * labels.len() {
            return Err(NnError::CountMismatch {
                images: if dim == 0 { 0 } else { pixels.len() / dim },
                labels: labels.len(),
            });
        }
        if let Some((index, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l as usize >= NUM_CLASSES)
        {
            return Err(NnError::InvalidLabel { index, label });
        }
        Ok(Self {
            pixels,
            dim,
            scale,
            labels,
            split,
        })
    }

    /// Builds a dataset from real-valued images already in [0,1]; values are
    /// rounded to the nearest 1/255 step.
    pub fn from_images(images: &[Vec<f64>], labels: Vec<u8>, split: Split) -> Result<Self, NnError> {
        let dim = images.first().map_or(0, Vec::len);
        let mut pixels = Vec::with_capacity(dim * images.len());
        for img in images {
            if img.len() != dim {
                return Err(NnError::Dimension {
                    expected: dim,
                    actual: img.len(),
                });
            }
            pixels.extend(img.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        }
        Self::from_bytes(pixels, dim, 1.0 / 255.0, labels, split)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn pixel(&self, i: usize, j: usize) -> f64 {
        self.pixels[i * self.dim + j] as f64 * self.scale
    }

    pub fn image_into(&self, i: usize, out: &mut [f64]) {
        let row = &self.pixels[i * self.dim..(i + 1) * self.dim];
        for (o, &b) in out.iter_mut().zip(row) {
            *o = b as f64 * self.scale;
        }
    }

    pub fn image(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.image_into(i, &mut out);
        out
    }

    /// Clears `batch` and appends the images at `indices`.
    pub fn fill_batch(&self, indices: &[usize], batch: &mut Batch) {
        batch.dim = self.dim;
        batch.inputs.resize(indices.len() * self.dim, 0.0);
        batch.labels.clear();
        for (slot, &i) in indices.iter().enumerate() {
            self.image_into(i, &mut batch.inputs[slot * self.dim..(slot + 1) * self.dim]);
            batch.labels.push(self.labels[i]);
        }
    }

    /// Maps every pixel to {0,1}; a pixel equal to `threshold` becomes 1.
    pub fn binarize(&self, threshold: f64) -> Self {
        let pixels = self
            .pixels
            .iter()
            .map(|&b| u8::from(b as f64 * self.scale >= threshold))
            .collect();
        Self {
            pixels,
            dim: self.dim,
            scale: 1.0,
            labels: self.labels.clone(),
            split: self.split,
        }
    }

    /// Fraction of pixels that are non-zero.
    pub fn on_fraction(&self) -> f64 {
        let on = self.pixels.iter().filter(|&&b| b != 0).count();
        on as f64 / self.pixels.len() as f64
    }

    pub fn split_at(&self, n: usize) -> (Self, Self) {
        let n = n.min(self.len());
        let (pa, pb) = self.pixels.split_at(n * self.dim);
        let (la, lb) = self.labels.split_at(n);
        let part = |pixels: &[u8], labels: &[u8]| Self {
            pixels: pixels.to_vec(),
            dim: self.dim,
            scale: self.scale,
            labels: labels.to_vec(),
            split: self.split,
        };
        (part(pa, la), part(pb, lb))
    }

    /// A new dataset with the images at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            pixels.extend_from_slice(&self.pixels[i * self.dim..(i + 1) * self.dim]);
            labels.push(self.labels[i]);
        }
        Self {
            pixels,
            dim: self.dim,
            scale: self.scale,
            labels,
            split: self.split,
        }
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset::from_bytes(vec![0, 127, 128, 255, 64, 200], 3, 1.0 / 255.0, vec![1, 2], Split::Train)
            .unwrap()
    }

    #[test]
    fn binarize_threshold_rule() {
        let b = tiny().binarize(0.5);
        assert_eq!(b.image(0), vec![0.0, 0.0, 1.0]);
        assert_eq!(b.image(1), vec![1.0, 0.0, 1.0]);

        let exact = Dataset::from_images(&[vec![0.0, 0.5, 1.0]], vec![0], Split::Test).unwrap();
        // 0.5 is not representable as k/255; build the boundary case directly.
        let boundary = Dataset::from_bytes(vec![0, 1, 2], 3, 0.25, vec![0], Split::Test).unwrap();
        assert_eq!(boundary.binarize(0.5).image(0), vec![0.0, 0.0, 1.0]);
        assert_eq!(exact.binarize(0.5).image(0), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn batch_filling() {
        let ds = tiny();
        let mut batch = Batch::new(3);
        ds.fill_batch(&[1, 0], &mut batch);
        assert_eq!(batch.len(), 2);
        assert_eq!(batch.labels, vec![2, 1]);
        assert_eq!(batch.input(1), ds.image(0).as_slice());
    }

    #[test]
    fn rejects_bad_labels_and_shapes() {
        assert!(Dataset::from_bytes(vec![0; 3], 3, 1.0, vec![10], Split::Test).is_err());
        assert!(Dataset::from_bytes(vec![0; 4], 3, 1.0, vec![1], Split::Test).is_err());
    }

    #[test]
    fn split_and_select() {
        let ds = tiny();
        let (a, b) = ds.split_at(1);
        assert_eq!((a.len(), b.len()), (1, 1));
        assert_eq!(b.label(0), 2);
        let s = ds.select(&[1, 1, 0]);
        assert_eq!(s.labels(), &[2, 2, 1]);
        assert_eq!(s.class_counts()[2], 2);
    }
}
