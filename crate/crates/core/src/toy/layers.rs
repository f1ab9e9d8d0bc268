// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::Rng;
use rand_distr::{Distribution, Normal};

pub(super) fn gaussian(rng: &mut impl Rng, n: usize, std: f64) -> Vec<f32> {
    let normal = Normal::new(0.0, std).expect("finite std");
    (0..n).map(|_| normal.sample(rng) as f32).collect()
}

pub(super) fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Parameter-free layer norm.
pub(super) fn layer_norm(x: &[f32]) -> Vec<f32> {
    let n = x.len() as f32;
    let mean = x.iter().sum::<f32>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
    let inv = 1.0 / (var + 1e-5).sqrt();
    x.iter().map(|v| (v - mean) * inv).collect()
}

fn gelu(x: f32) -> f32 {
    0.5 * x * (1.0 + (0.797_884_6 * (x + 0.044_715 * x * x * x)).tanh())
}

/// Row-major `rows x cols`; `apply` computes `W x`.
struct Linear {
    rows: usize,
    cols: usize,
    w: Vec<f32>,
}

impl Linear {
    fn new(rng: &mut impl Rng, rows: usize, cols: usize) -> Self {
        let w = gaussian(rng, rows * cols, 1.0 / (cols as f64).sqrt());
        Self { rows, cols, w }
    }

    fn apply(&self, x: &[f32]) -> Vec<f32> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| dot(&self.w[r * self.cols..(r + 1) * self.cols], x))
            .collect()
    }
}

pub(super) struct KvCache {
    keys: Vec<f32>,
    values: Vec<f32>,
}

impl KvCache {
    pub(super) fn with_capacity(len: usize, d: usize) -> Self {
        Self {
            keys: Vec::with_capacity(len * d),
            values: Vec::with_capacity(len * d),
        }
    }
}

/// Pre-LN block: `h + attn(ln(h))`, then `h + mlp(ln(h))`.
pub(super) struct Block {
    heads: usize,
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    up: Linear,
    down: Linear,
}

impl Block {
    pub(super) fn new(rng: &mut impl Rng, d: usize, heads: usize) -> Self {
        Self {
            heads,
            q: Linear::new(rng, d, d),
            k: Linear::new(rng, d, d),
            v: Linear::new(rng, d, d),
            o: Linear::new(rng, d, d),
            up: Linear::new(rng, 4 * d, d),
            down: Linear::new(rng, d, 4 * d),
        }
    }

    /// Processes the next position, appending its key and value to `cache`.
    pub(super) fn forward(&self, h: &[f32], cache: &mut KvCache) -> Vec<f32> {
        let d = h.len();
        let hd = d / self.heads;
        let x = layer_norm(h);
        let q = self.q.apply(&x);
        cache.keys.extend(self.k.apply(&x));
        cache.values.extend(self.v.apply(&x));
        let n = cache.keys.len() / d;
        let scale = 1.0 / (hd as f32).sqrt();

        let mut mixed = vec![0.0f32; d];
        let mut scores = vec![0.0f32; n];
        for head in 0..self.heads {
            let span = head * hd..(head + 1) * hd;
            for (j, s) in scores.iter_mut().enumerate() {
                *s = dot(&q[span.clone()], &cache.keys[j * d + span.start..j * d + span.end]) * scale;
            }
            let max = scores.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let mut total = 0.0;
            for s in scores.iter_mut() {
                *s = (*s - max).exp();
                total += *s;
            }
            let out = &mut mixed[span.clone()];
            for (j, s) in scores.iter().enumerate() {
                let w = s / total;
                let v = &cache.values[j * d + span.start..j * d + span.end];
                for (o, vi) in out.iter_mut().zip(v) {
                    *o += w * vi;
                }
            }
        }
        let attn = self.o.apply(&mixed);
        let h: Vec<f32> = h.iter().zip(&attn).map(|(a, b)| a + b).collect();

        let x = layer_norm(&h);
        let hidden: Vec<f32> = self.up.apply(&x).into_iter().map(gelu).collect();
        let mlp = self.down.apply(&hidden);
        h.iter().zip(&mlp).map(|(a, b)| a + b).collect()
    }
}
