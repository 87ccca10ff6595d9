//! One-hidden-layer MLP with sigmoid activations and a softmax
//! cross-entropy head, stored as a flat parameter vector so whole models
//! can be exchanged, aggregated, and secret-shared as plain vectors.
//!
//! Parameter layout: hidden weights (row-major, one row per hidden unit),
//! hidden biases, output weights (one row per class), output biases.

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::learning::data::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MlpArch {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl MlpArch {
    pub fn new(input: usize, hidden: usize, classes: usize) -> Result<Self> {
        if input == 0 || hidden == 0 || classes < 2 {
            return Err(Error::Config(format!(
                "bad architecture {input}-{hidden}-{classes}: need inputs, hidden units, and at least two classes"
            )));
        }
        Ok(MlpArch {
            input,
            hidden,
            classes,
        })
    }

    pub fn param_count(&self) -> usize {
        self.hidden * self.input + self.hidden + self.classes * self.hidden + self.classes
    }
}

#[derive(Clone, Debug)]
pub struct MlpModel {
    arch: MlpArch,
    params: Vec<f64>,
}

/// Local SGD settings.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub local_epochs: usize,
    /// Coordinatewise clip bound applied to parameters before sharing.
    pub clip: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.1,
            batch_size: 128,
            local_epochs: 1,
            clip: 1.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.local_epochs == 0 {
            return Err(Error::Config("local epochs must be at least 1".into()));
        }
        if !(self.clip > 0.0 && self.clip.is_finite()) {
            return Err(Error::Config(format!(
                "clip bound must be positive, got {}",
                self.clip
            )));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl MlpModel {
    /// Zero-initialized model.
    pub fn zeros(arch: MlpArch) -> MlpModel {
        MlpModel {
            arch,
            params: vec![0.0; arch.param_count()],
        }
    }

    /// Small uniform random init, deterministic under `seed`.
    pub fn init(arch: MlpArch, seed: u64) -> MlpModel {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let s1 = 1.0 / (arch.input as f64).sqrt();
        let s2 = 1.0 / (arch.hidden as f64).sqrt();
        let w1 = arch.hidden * arch.input + arch.hidden;
        let total = arch.param_count();
        let params = (0..total)
            .map(|i| {
                let s = if i < w1 { s1 } else { s2 };
                rng.gen_range(-s..s)
            })
            .collect();
        MlpModel { arch, params }
    }

    pub fn from_params(arch: MlpArch, params: Vec<f64>) -> Result<MlpModel> {
        if params.len() != arch.param_count() {
            return Err(Error::Config(format!(
                "parameter vector length {} does not fit architecture needing {}",
                params.len(),
                arch.param_count()
            )));
        }
        Ok(MlpModel { arch, params })
    }

    pub fn arch(&self) -> MlpArch {
        self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Config(format!(
                "parameter vector length {} does not match model's {}",
                params.len(),
                self.params.len()
            )));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn slices(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let a = &self.arch;
        let w1 = a.hidden * a.input;
        let b1 = w1 + a.hidden;
        let w2 = b1 + a.classes * a.hidden;
        (
            &self.params[..w1],
            &self.params[w1..b1],
            &self.params[b1..w2],
            &self.params[w2..],
        )
    }

    /// Class probabilities for one feature vector.
    pub fn forward(&self, x: &[f32]) -> Vec<f64> {
        let (probs, _) = self.forward_with_hidden(x);
        probs
    }

    fn forward_with_hidden(&self, x: &[f32]) -> (Vec<f64>, Vec<f64>) {
        let a = &self.arch;
        debug_assert_eq!(x.len(), a.input);
        let (w1, b1, w2, b2) = self.slices();
        let mut h = vec![0.0; a.hidden];
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &w1[j * a.input..(j + 1) * a.input];
            let mut acc = b1[j];
            for (wk, &xk) in row.iter().zip(x) {
                acc += wk * xk as f64;
            }
            *hj = sigmoid(acc);
        }
        let mut logits = vec![0.0; a.classes];
        for (c, l) in logits.iter_mut().enumerate() {
            let row = &w2[c * a.hidden..(c + 1) * a.hidden];
            let mut acc = b2[c];
            for (wk, &hk) in row.iter().zip(&h) {
                acc += wk * hk;
            }
            *l = acc;
        }
        let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut z = 0.0;
        let mut probs = vec![0.0; a.classes];
        for (p, &l) in probs.iter_mut().zip(&logits) {
            *p = (l - max).exp();
            z += *p;
        }
        for p in &mut probs {
            *p /= z;
        }
        (probs, h)
    }

    /// Mean cross-entropy loss and its gradient over a batch of sample
    /// indices into `data`.
    pub fn loss_and_grad(&self, data: &Dataset, batch: &[usize]) -> (f64, Vec<f64>) {
        let a = &self.arch;
        let (_, _, w2, _) = self.slices();
        let w1_len = a.hidden * a.input;
        let b1_off = w1_len;
        let w2_off = b1_off + a.hidden;
        let b2_off = w2_off + a.classes * a.hidden;

        let mut grad = vec![0.0; a.param_count()];
        let mut loss = 0.0;
        for &idx in batch {
            let (x, label) = data.sample(idx);
            let (probs, h) = self.forward_with_hidden(x);
            loss -= probs[label].max(1e-300).ln();

            // dlogits = probs - onehot(label)
            for c in 0..a.classes {
                let dl = probs[c] - if c == label { 1.0 } else { 0.0 };
                let w2_row = c * a.hidden;
                for (k, &hk) in h.iter().enumerate() {
                    grad[w2_off + w2_row + k] += dl * hk;
                }
                grad[b2_off + c] += dl;
            }
            // dh, then through the sigmoid to the first layer.
            for (j, &hj) in h.iter().enumerate() {
                let mut dh = 0.0;
                for c in 0..a.classes {
                    dh += w2[c * a.hidden + j] * (probs[c] - if c == label { 1.0 } else { 0.0 });
                }
                let dpre = dh * hj * (1.0 - hj);
                let w1_row = j * a.input;
                for (k, &xk) in x.iter().enumerate() {
                    grad[w1_row + k] += dpre * xk as f64;
                }
                grad[b1_off + j] += dpre;
            }
        }
        let m = batch.len() as f64;
        for g in &mut grad {
            *g /= m;
        }
        (loss / m, grad)
    }

    /// Accuracy and mean cross-entropy over the first `limit` samples (all
    /// samples if `limit` is none or larger than the set).
    pub fn evaluate(&self, data: &Dataset, limit: Option<usize>) -> (f64, f64) {
        let count = limit
            .unwrap_or(data.len())
            .min(data.len())
            .max(1)
            .min(data.len());
        let mut hits = 0usize;
        let mut loss = 0.0;
        for idx in 0..count {
            let (x, label) = data.sample(idx);
            let probs = self.forward(x);
            let pred = probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(c, _)| c)
                .unwrap_or(0);
            if pred == label {
                hits += 1;
            }
            loss -= probs[label].max(1e-300).ln();
        }
        (hits as f64 / count as f64, loss / count as f64)
    }
}

/// Minibatch SGD over `data` for the configured epochs, returning the
/// post-SGD parameter vector. The starting model is left untouched; the
/// caller clips before sharing.
pub fn local_update(
    model: &MlpModel,
    data: &Dataset,
    hyper: &Hyperparams,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let mut work = model.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..hyper.local_epochs {
        order.shuffle(rng);
        for batch in order.chunks(hyper.batch_size) {
            let (_, grad) = work.loss_and_grad(data, batch);
            for (p, g) in work.params.iter_mut().zip(&grad) {
                *p -= hyper.learning_rate * g;
            }
        }
    }
    work.params
}

/// Coordinatewise clamp to `[-bound, bound]`; never changes a sign.
pub fn clip_inf(v: &[f64], bound: f64) -> Vec<f64> {
    v.iter().map(|&x| x.clamp(-bound, bound)).collect()
}
