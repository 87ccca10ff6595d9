//! One full simulated training run: shard the data, then loop rounds of
//! local SGD, optional poisoning, and aggregation under the configured
//! rule, collecting per-round metrics and the final per-client models.

use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::aggregation::{
    below_floor_bits, coordinate_median, cost_filter_round, krum, mean, mozi,
    secure_filter_aggregate, trimmed_mean, FilterConfig, PhaseTimes,
};
use crate::attacks::{attack_rng, poison_update};
use crate::error::{Error, Result};
use crate::learning::{
    client_rng, clip_inf, iid_partition, load_mnist, local_update, mnist_available, synth_blobs,
    Dataset, MlpArch, MlpModel,
};
use crate::linalg::{NormParams, NormProfile};
use crate::mpc::{Engine, Transcript};
use crate::sharing::{share, SharedVector};
use crate::sim::config::{DatasetChoice, Rule, SimConfig};

/// Candidate losses for the loss-filtered rule are computed on this many
/// shard samples; full-shard evaluation per candidate per round would
/// dominate the run.
const MOZI_LOSS_SAMPLES: usize = 256;

/// Per-round observables. Accuracy and loss cover honest clients only;
/// phase timings are zero unless timing is enabled and the rule runs the
/// secure pipeline.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub mean_acc: f64,
    pub min_acc: f64,
    pub max_acc: f64,
    pub loss: f64,
    /// Sender slots dropped by the secure filter this round, summed over
    /// receivers.
    pub rejected_count: usize,
    pub t_cosine_ms: f64,
    pub t_compare_ms: f64,
    pub t_norm_ms: f64,
}

/// Everything a finished run hands back.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config: SimConfig,
    pub rounds: Vec<RoundMetrics>,
    pub final_models: Vec<MlpModel>,
    /// Opened-word transcript, present when recording was requested.
    pub transcript: Option<Transcript>,
}

impl RunOutput {
    /// The last round's metrics; that round always evaluates the full
    /// test set.
    pub fn final_metrics(&self) -> &RoundMetrics {
        self.rounds.last().expect("runs have at least one round")
    }
}

/// Directory holding the MNIST IDX files: `SECUREDL_MNIST_DIR` if set,
/// else `./data`, else none.
pub fn mnist_dir() -> Option<PathBuf> {
    let mut candidates = Vec::new();
    if let Ok(dir) = std::env::var("SECUREDL_MNIST_DIR") {
        candidates.push(PathBuf::from(dir));
    }
    candidates.push(PathBuf::from("data"));
    candidates.into_iter().find(|d| mnist_available(d))
}

/// Load the configured dataset as (train, test).
pub fn load_data(cfg: &SimConfig) -> Result<(Dataset, Dataset)> {
    match cfg.dataset {
        DatasetChoice::Mnist => {
            let dir = mnist_dir().ok_or_else(|| {
                Error::Config(
                    "MNIST IDX files not found; set SECUREDL_MNIST_DIR or place \
                     train-images-idx3-ubyte and friends under ./data"
                        .into(),
                )
            })?;
            let (train, test) = load_mnist(&dir)?;
            Ok((
                train.subsample(cfg.train_samples, cfg.seed),
                test.subsample(cfg.test_samples, cfg.seed.wrapping_add(1)),
            ))
        }
        DatasetChoice::Synth => {
            let total = synth_blobs(
                cfg.train_samples + cfg.test_samples,
                cfg.synth_dim,
                cfg.synth_classes,
                cfg.seed,
            )?;
            let train_idx: Vec<usize> = (0..cfg.train_samples).collect();
            let test_idx: Vec<usize> = (cfg.train_samples..total.len()).collect();
            Ok((total.take(&train_idx), total.take(&test_idx)))
        }
    }
}

pub fn run(cfg: &SimConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let (train, test) = load_data(cfg)?;
    run_with_data(cfg, &train, &test)
}

pub fn run_with_data(cfg: &SimConfig, train: &Dataset, test: &Dataset) -> Result<RunOutput> {
    run_streaming(cfg, train, test, false, |_| {})
}

/// Full-control entry point: optionally records the opened-word
/// transcript of the secure pipeline, and calls `on_round` after each
/// round's metrics are in.
pub fn run_streaming(
    cfg: &SimConfig,
    train: &Dataset,
    test: &Dataset,
    record_transcript: bool,
    mut on_round: impl FnMut(&RoundMetrics),
) -> Result<RunOutput> {
    cfg.validate()?;
    if train.dim() != test.dim() || train.classes() != test.classes() {
        return Err(Error::Config(format!(
            "train ({}d, {} classes) and test ({}d, {} classes) sets disagree",
            train.dim(),
            train.classes(),
            test.dim(),
            test.classes()
        )));
    }
    let arch = MlpArch::new(train.dim(), cfg.hidden, train.classes())?;
    let d = arch.param_count();

    let mut shards = iid_partition(train, cfg.clients, cfg.seed)?;
    for (c, shard) in shards.iter_mut().enumerate() {
        if cfg.attack.flips_labels(c) {
            *shard = shard.with_flipped_labels();
        }
    }

    let init = MlpModel::init(arch, cfg.seed);
    let mut models: Vec<MlpModel> = vec![init; cfg.clients];

    let mut secure = match cfg.rule {
        Rule::SecureDl => Some(SecureLane::new(cfg, d, record_transcript)?),
        _ => None,
    };

    let honest = cfg.honest_clients();
    let mut rounds = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let mut updates: Vec<Vec<f64>> = Vec::with_capacity(cfg.clients);
        for c in 0..cfg.clients {
            let mut rng = client_rng(cfg.seed, round as u64, c as u64);
            let mut w = local_update(&models[c], &shards[c], &cfg.hyper, &mut rng);
            if cfg.attack.is_byzantine(c) {
                let mut arng = attack_rng(cfg.seed, round as u64, c as u64);
                w = poison_update(&w, &cfg.attack, &mut arng);
            }
            updates.push(clip_inf(&w, cfg.hyper.clip));
        }

        let (new_params, rejected, times) = match secure.as_mut() {
            Some(lane) => lane.round(cfg, &updates)?,
            None => (
                plaintext_round(cfg, &updates, &models, &shards)?,
                0,
                PhaseTimes::default(),
            ),
        };
        for (m, p) in models.iter_mut().zip(&new_params) {
            m.set_params(p)?;
        }

        let last = round + 1 == cfg.rounds;
        let limit = if last || cfg.eval_subset == 0 {
            None
        } else {
            Some(cfg.eval_subset)
        };
        let evals: Vec<(f64, f64)> = honest
            .iter()
            .map(|&c| models[c].evaluate(test, limit))
            .collect();
        let k = evals.len() as f64;
        let metrics = RoundMetrics {
            round,
            mean_acc: evals.iter().map(|e| e.0).sum::<f64>() / k,
            min_acc: evals.iter().map(|e| e.0).fold(f64::INFINITY, f64::min),
            max_acc: evals.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max),
            loss: evals.iter().map(|e| e.1).sum::<f64>() / k,
            rejected_count: rejected,
            t_cosine_ms: if cfg.timing { ms(times.cosine) } else { 0.0 },
            t_compare_ms: if cfg.timing { ms(times.compare) } else { 0.0 },
            t_norm_ms: if cfg.timing { ms(times.norm) } else { 0.0 },
        };
        on_round(&metrics);
        rounds.push(metrics);
    }

    Ok(RunOutput {
        config: cfg.clone(),
        rounds,
        final_models: models,
        transcript: secure.and_then(|lane| {
            if record_transcript {
                Some(lane.eng.into_transcript())
            } else {
                None
            }
        }),
    })
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Aggregation for the plaintext rules: each receiver combines its own
/// update with its neighbors' under the configured rule.
fn plaintext_round(
    cfg: &SimConfig,
    updates: &[Vec<f64>],
    models: &[MlpModel],
    shards: &[Dataset],
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(cfg.clients);
    for r in 0..cfg.clients {
        let mut ids = cfg.neighbor_set(r);
        ids.push(r);
        ids.sort_unstable();
        let view: Vec<Vec<f64>> = ids.iter().map(|&j| updates[j].clone()).collect();
        let own = ids.iter().position(|&j| j == r).expect("receiver in view");
        let agg = match cfg.rule {
            Rule::Mean => mean(&view)?,
            Rule::DKrum => krum(&view, cfg.effective_krum_f())?,
            Rule::DMedian => coordinate_median(&view)?,
            Rule::Bridge => {
                let trim = cfg.effective_trim().min((view.len() - 1) / 2);
                trimmed_mean(&view, trim)?
            }
            Rule::Mozi => {
                let arch = models[r].arch();
                let shard = &shards[r];
                mozi(&view, own, cfg.mozi_rho, |w| {
                    match MlpModel::from_params(arch, w.to_vec()) {
                        Ok(m) => m.evaluate(shard, Some(MOZI_LOSS_SAMPLES)).1,
                        Err(_) => f64::INFINITY,
                    }
                })?
            }
            Rule::SecureDl => unreachable!("secure rule runs in its own lane"),
        };
        out.push(agg);
    }
    Ok(out)
}

/// Long-lived state for the secure rule: one engine whose tape budget is
/// sized for the whole run, plus the round-independent norm parameters.
struct SecureLane {
    eng: Engine,
    params: NormParams,
    share_rng: ChaCha20Rng,
}

impl SecureLane {
    fn new(cfg: &SimConfig, d: usize, record: bool) -> Result<SecureLane> {
        let budget = cost_filter_round(d as u64, cfg.clients as u64).scale(cfg.rounds as u64);
        let eng = Engine::new(cfg.clients, cfg.codec(), budget, cfg.seed, record);
        let params = NormParams::for_dimension(d, cfg.hyper.clip)?;
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&cfg.seed.to_le_bytes());
        bytes[24..].copy_from_slice(b"sharing!");
        Ok(SecureLane {
            eng,
            params,
            share_rng: ChaCha20Rng::from_seed(bytes),
        })
    }

    fn round(
        &mut self,
        cfg: &SimConfig,
        updates: &[Vec<f64>],
    ) -> Result<(Vec<Vec<f64>>, usize, PhaseTimes)> {
        let codec = self.eng.codec();
        let n = updates.len();
        let fcfg = FilterConfig {
            tau: cfg.tau,
            norm_floor: cfg.norm_floor,
            divide_by_accepted: cfg.divide_by_accepted,
        };
        let mut shared: Vec<SharedVector> = Vec::with_capacity(n);
        for u in updates {
            shared.push(share(&codec.encode_slice(u)?, n, &mut self.share_rng)?);
        }

        let mut times = PhaseTimes::default();
        let start = Instant::now();
        let profiles: Vec<NormProfile> = shared
            .iter()
            .map(|s| self.eng.norm_profile(s, &self.params))
            .collect::<Result<_>>()?;
        times.norm += start.elapsed();
        let start = Instant::now();
        let below = below_floor_bits(&mut self.eng, &profiles, fcfg.norm_floor)?;
        times.compare += start.elapsed();

        let mut rejected = 0usize;
        let mut new_params = Vec::with_capacity(n);
        for r in 0..n {
            let out = secure_filter_aggregate(
                &mut self.eng,
                &shared,
                &profiles,
                &below,
                r,
                &self.params,
                &fcfg,
                &mut times,
            )?;
            rejected += out
                .accepted
                .iter()
                .enumerate()
                .filter(|&(j, &a)| j != r && !a)
                .count();
            let words = self.eng.open_output(&out.aggregate)?;
            new_params.push(codec.decode_slice(&words));
        }
        Ok((new_params, rejected, times))
    }
}
