use serde::{Deserialize, Serialize};

use crate::nncore::{Dense, Mlp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantMode {
    /// Float-trained weights are trimmed once before inference, over the
    /// per-layer range `max |w|`.
    InferenceOnly,
    /// Weights are trimmed after every update over the fixed range `w_max`.
    TrainAndInference,
}

/// Control-bit precision of the DAC that programs the analog weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    /// `None` means unquantized.
    pub bits: Option<u32>,
    pub mode: QuantMode,
    /// Clip range used in train-and-inference mode.
    pub w_max: f64,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self {
            bits: None,
            mode: QuantMode::InferenceOnly,
            w_max: 0.5,
        }
    }
}

impl QuantizerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if let Some(b) = self.bits {
            if !(1..=52).contains(&b) {
                return Err(format!("quantizer bits must be in 1..=52, got {b}"));
            }
        }
        if !(self.w_max > 0.0) {
            return Err(format!("w_max must be > 0, got {}", self.w_max));
        }
        Ok(())
    }

    pub fn quantize(&self, w: f64) -> f64 {
        quantize(w, self.bits, self.w_max)
    }
}

/// Uniform symmetric mid-rise quantizer with `2^bits` levels spanning
/// `[-w_max, w_max]`. There is no zero level: the smallest magnitude is
/// `w_max / (2^bits - 1)`, and the sign of `w` (including `-0.0`) picks the
/// side. Inputs outside the range clip to `+-w_max`.
pub fn quantize(w: f64, bits: Option<u32>, w_max: f64) -> f64 {
    let Some(bits) = bits else { return w };
    let levels = 2f64.powi(bits as i32);
    let step = 2.0 * w_max / (levels - 1.0);
    let top = levels / 2.0 - 1.0;
    let index = (w.abs() / step).floor().min(top);
    // Counted down from w_max so the outer level is exactly +-w_max.
    (w_max - (top - index) * step).copysign(w)
}

pub fn quantize_layer(layer: &mut Dense, bits: Option<u32>, w_max: f64) {
    for w in &mut layer.weights {
        *w = quantize(*w, bits, w_max);
    }
}

/// Largest weight magnitude of a layer; the inference-only clip range.
pub fn layer_range(layer: &Dense) -> f64 {
    layer.weights.iter().fold(0.0, |m, w| w.abs().max(m))
}

/// A copy of `mlp` with every layer's weights trimmed as `cfg` prescribes
/// for inference. Biases are electronic and stay unquantized.
pub fn quantize_network(mlp: &Mlp, cfg: &QuantizerConfig) -> Mlp {
    let mut out = mlp.clone();
    if cfg.bits.is_none() {
        return out;
    }
    for layer in out.layers_mut() {
        let w_max = match cfg.mode {
            QuantMode::InferenceOnly => layer_range(layer),
            QuantMode::TrainAndInference => cfg.w_max,
        };
        if w_max > 0.0 {
            quantize_layer(layer, cfg.bits, w_max);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unquantized_is_identity() {
        for w in [-7.5, -0.0, 0.0, 1e-300, 0.3] {
            assert_eq!(quantize(w, None, 1.0).to_bits(), w.to_bits());
        }
    }

    #[test]
    fn zero_maps_to_smallest_level() {
        for bits in 1..=10 {
            let q = quantize(0.0, Some(bits), 2.0);
            let expected = 2.0 / (2f64.powi(bits as i32) - 1.0);
            assert!((q - expected).abs() < 1e-15, "bits {bits}: {q} vs {expected}");
        }
    }

    #[test]
    fn one_bit_levels() {
        // Enumerated levels for bits = 1, w_max = 1: {-1, +1}.
        assert_eq!(quantize(0.3, Some(1), 1.0), 1.0);
        assert_eq!(quantize(-0.7, Some(1), 1.0), -1.0);
        assert_eq!(quantize(5.0, Some(1), 1.0), 1.0);
    }

    #[test]
    fn levels_match_enumeration() {
        // Brute force: nearest of the explicit level list.
        let (bits, w_max) = (3u32, 1.5);
        let n = 1usize << bits;
        let levels: Vec<f64> = (0..n)
            .map(|i| -w_max + i as f64 * 2.0 * w_max / (n - 1) as f64)
            .collect();
        for k in -200..=200 {
            let w = k as f64 / 100.0;
            let q = quantize(w, Some(bits), w_max);
            let best = levels
                .iter()
                .map(|l| (l - w.clamp(-w_max, w_max)).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(((q - w.clamp(-w_max, w_max)).abs() - best).abs() < 1e-12, "w={w} q={q}");
        }
    }

    #[test]
    fn network_quantization_keeps_biases() {
        let mut mlp = Mlp::new(&[4, 3, 2], 1).unwrap();
        mlp.layers_mut()[0].bias = vec![0.123, -0.4, 0.0];
        let q = quantize_network(
            &mlp,
            &QuantizerConfig {
                bits: Some(2),
                ..QuantizerConfig::default()
            },
        );
        assert_eq!(q.layers()[0].bias, mlp.layers()[0].bias);
        let mut distinct: Vec<f64> = q.layers()[0].weights.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        assert!(distinct.len() <= 4);
        assert_eq!(
            layer_range(&q.layers()[0]),
            layer_range(&mlp.layers()[0]),
            "extreme weight maps onto the outer level"
        );
    }

    proptest! {
        #[test]
        fn idempotent_monotone_symmetric(
            a in -10.0f64..10.0,
            b in -10.0f64..10.0,
            bits in 1u32..12,
            w_max in 0.01f64..5.0,
        ) {
            let q = |w| quantize(w, Some(bits), w_max);
            prop_assert_eq!(q(q(a)), q(a));
            prop_assert_eq!(q(-a), -q(a));
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(q(lo) <= q(hi));
            prop_assert!(q(a).abs() <= w_max * (1.0 + 1e-12));
        }

        #[test]
        fn cardinality_bounded(bits in 1u32..7, w_max in 0.1f64..3.0) {
            let mut seen: Vec<f64> = (-400..=400)
                .map(|k| quantize(k as f64 * w_max / 200.0, Some(bits), w_max))
                .collect();
            seen.sort_by(f64::total_cmp);
            seen.dedup();
            prop_assert!(seen.len() <= 1 << bits);
        }
    }
}
