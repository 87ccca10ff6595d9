//! Aggregation rules for decentralized model updates: a secret-shared
//! cosine-filtering aggregate and the plaintext rules it is compared
//! against (mean, Krum selection, coordinate median, trimmed mean, and
//! loss-filtered Mozi).
//!
//! Every plaintext rule is deterministic down to floating-point operation
//! order, with ties broken toward the lowest client index, so independent
//! reimplementations agree bit for bit.

use std::time::{Duration, Instant};

use crate::dealer::TapeBudget;
use crate::error::{Error, Result};
use crate::linalg::{
    cost_cosine_between, cost_norm_profile, cost_rescale_to_norm, NormParams, NormProfile,
};
use crate::mpc::{cost_compare, cost_trunc, Engine};
use crate::sharing::SharedVector;

/// Wall-clock totals for the labeled phases of the filtering aggregate.
/// Rescaling and the final division count toward the norm phase.
#[derive(Clone, Copy, Debug, Default)]
pub struct PhaseTimes {
    pub cosine: Duration,
    pub compare: Duration,
    pub norm: Duration,
}

impl PhaseTimes {
    pub fn add(&mut self, other: &PhaseTimes) {
        self.cosine += other.cosine;
        self.compare += other.compare;
        self.norm += other.norm;
    }
}

fn check_nonempty(updates: &[Vec<f64>]) -> Result<()> {
    if updates.is_empty() {
        return Err(Error::Config(
            "aggregation needs at least one update".into(),
        ));
    }
    let d = updates[0].len();
    if updates.iter().any(|u| u.len() != d) {
        return Err(Error::Config("updates must share one dimension".into()));
    }
    Ok(())
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Coordinatewise mean, summed in client index order.
pub fn mean(updates: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_nonempty(updates)?;
    let n = updates.len() as f64;
    let d = updates[0].len();
    let mut out = vec![0.0; d];
    for u in updates {
        for (o, &x) in out.iter_mut().zip(u) {
            *o += x;
        }
    }
    for o in &mut out {
        *o /= n;
    }
    Ok(out)
}

/// Krum selection: return the update whose summed squared distance to its
/// nearest neighbors is smallest.
///
/// With `f` assumed faulty clients the score counts the `n - f - 2`
/// nearest others (clamped to at least one so heavily faulty settings
/// still rank by nearest neighbor). Ties select the lowest index.
pub fn krum(updates: &[Vec<f64>], f: usize) -> Result<Vec<f64>> {
    Ok(updates[krum_select(updates, f)?].clone())
}

/// The index Krum selects; see [`krum`].
pub fn krum_select(updates: &[Vec<f64>], f: usize) -> Result<usize> {
    check_nonempty(updates)?;
    let n = updates.len();
    if n < 2 {
        return Err(Error::Config("krum needs at least two updates".into()));
    }
    let neighbors = n.saturating_sub(f + 2).max(1).min(n - 1);
    let mut best = 0usize;
    let mut best_score = f64::INFINITY;
    for i in 0..n {
        let mut dists: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| dist_sq(&updates[i], &updates[j]))
            .collect();
        dists.sort_by(f64::total_cmp);
        let score: f64 = dists[..neighbors].iter().sum();
        if score < best_score {
            best_score = score;
            best = i;
        }
    }
    Ok(best)
}

/// Coordinatewise median; an even column takes the mean of the two middle
/// values.
pub fn coordinate_median(updates: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_nonempty(updates)?;
    let n = updates.len();
    let d = updates[0].len();
    let mut out = vec![0.0; d];
    let mut col = vec![0.0; n];
    for (k, o) in out.iter_mut().enumerate() {
        for (c, u) in col.iter_mut().zip(updates) {
            *c = u[k];
        }
        col.sort_by(f64::total_cmp);
        *o = if n % 2 == 1 {
            col[n / 2]
        } else {
            (col[n / 2 - 1] + col[n / 2]) / 2.0
        };
    }
    Ok(out)
}

/// Coordinatewise trimmed mean: drop the `trim` lowest and `trim` highest
/// values in each column, then average the rest in ascending order.
pub fn trimmed_mean(updates: &[Vec<f64>], trim: usize) -> Result<Vec<f64>> {
    check_nonempty(updates)?;
    let n = updates.len();
    if 2 * trim >= n {
        return Err(Error::Config(format!(
            "trimming {trim} from each end needs more than {} updates, got {n}",
            2 * trim
        )));
    }
    let d = updates[0].len();
    let mut out = vec![0.0; d];
    let mut col = vec![0.0; n];
    let kept = (n - 2 * trim) as f64;
    for (k, o) in out.iter_mut().enumerate() {
        for (c, u) in col.iter_mut().zip(updates) {
            *c = u[k];
        }
        col.sort_by(f64::total_cmp);
        *o = col[trim..n - trim].iter().sum::<f64>() / kept;
    }
    Ok(out)
}

/// Mozi-style loss-filtered mean for one receiver.
///
/// Stage one shortlists the `ceil(rho * (n-1))` received updates nearest
/// the receiver's own in Euclidean distance. Stage two keeps shortlisted
/// updates whose loss does not exceed the receiver's own; when none
/// qualify, the single lowest-loss shortlisted update is kept instead.
/// The output averages the receiver's own update with the survivors,
/// summing own first and then survivors in ascending index order.
pub fn mozi(
    updates: &[Vec<f64>],
    own: usize,
    rho: f64,
    loss: impl Fn(&[f64]) -> f64,
) -> Result<Vec<f64>> {
    check_nonempty(updates)?;
    let n = updates.len();
    if own >= n {
        return Err(Error::Config(format!(
            "receiver index {own} out of range for {n} updates"
        )));
    }
    if !(0.0..=1.0).contains(&rho) || rho <= 0.0 {
        return Err(Error::Config(format!(
            "shortlist fraction must be in (0, 1], got {rho}"
        )));
    }
    if n == 1 {
        return Ok(updates[0].clone());
    }

    let mut others: Vec<(f64, usize)> = (0..n)
        .filter(|&j| j != own)
        .map(|j| (dist_sq(&updates[own], &updates[j]), j))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let k = ((rho * (n - 1) as f64).ceil() as usize).clamp(1, n - 1);
    let shortlist: Vec<usize> = others[..k].iter().map(|&(_, j)| j).collect();

    let own_loss = loss(&updates[own]);
    let mut survivors: Vec<usize> = shortlist
        .iter()
        .copied()
        .filter(|&j| loss(&updates[j]) <= own_loss)
        .collect();
    if survivors.is_empty() {
        let fallback = shortlist
            .iter()
            .copied()
            .min_by(|&a, &b| {
                loss(&updates[a])
                    .total_cmp(&loss(&updates[b]))
                    .then(a.cmp(&b))
            })
            .expect("shortlist is nonempty");
        survivors.push(fallback);
    }
    survivors.sort_unstable();

    let d = updates[0].len();
    let mut out = updates[own].clone();
    for &j in &survivors {
        for (o, &x) in out.iter_mut().zip(&updates[j]) {
            *o += x;
        }
    }
    let count = (survivors.len() + 1) as f64;
    for o in out.iter_mut().take(d) {
        *o /= count;
    }
    Ok(out)
}

/// Settings for the cosine-filtering aggregate, shared by the secure path
/// and its plaintext reference.
#[derive(Clone, Copy, Debug)]
pub struct FilterConfig {
    /// Cosine acceptance threshold; senders strictly below it are dropped.
    pub tau: f64,
    /// Norm floor: senders whose update norm falls below it are dropped
    /// before any cosine work, which also keeps their reciprocal norms out
    /// of the pipeline.
    pub norm_floor: f64,
    /// Divide by `accepted + 1` instead of the client count.
    pub divide_by_accepted: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            tau: 0.0,
            norm_floor: 0.125,
            divide_by_accepted: false,
        }
    }
}

/// Result of one receiver's cosine-filtering aggregation.
#[derive(Clone, Debug)]
pub struct FilterOutcome {
    pub aggregate: SharedVector,
    /// Accept decision per client index. The receiver's own slot reports
    /// whether its own norm passed the floor; its update is always
    /// included in the aggregate.
    pub accepted: Vec<bool>,
}

/// Plaintext twin of [`FilterOutcome`].
#[derive(Clone, Debug, PartialEq)]
pub struct FilterReference {
    pub aggregate: Vec<f64>,
    pub accepted: Vec<bool>,
}

/// Plaintext reference for the cosine-filtering aggregate: senders whose
/// norm clears the floor and whose cosine against the receiver's own
/// update clears `tau` are rescaled to the receiver's norm and averaged
/// with it. A receiver whose own norm sits under the floor accepts
/// nothing.
pub fn filter_reference(
    updates: &[Vec<f64>],
    receiver: usize,
    cfg: &FilterConfig,
) -> Result<FilterReference> {
    check_nonempty(updates)?;
    let n = updates.len();
    if receiver >= n {
        return Err(Error::Config(format!(
            "receiver index {receiver} out of range for {n} updates"
        )));
    }
    let own = &updates[receiver];
    let own_norm = norm(own);
    let own_ok = own_norm >= cfg.norm_floor;
    let mut accepted = vec![false; n];
    accepted[receiver] = own_ok;

    let mut out = own.clone();
    let mut kept = 0usize;
    for (j, u) in updates.iter().enumerate() {
        if j == receiver || !own_ok {
            continue;
        }
        let u_norm = norm(u);
        if u_norm < cfg.norm_floor {
            continue;
        }
        let cos = dot(own, u) / (own_norm * u_norm);
        if cos < cfg.tau {
            continue;
        }
        accepted[j] = true;
        kept += 1;
        let scale = own_norm / u_norm;
        for (o, &x) in out.iter_mut().zip(u) {
            *o += x * scale;
        }
    }
    let divisor = if cfg.divide_by_accepted {
        (kept + 1) as f64
    } else {
        n as f64
    };
    for o in &mut out {
        *o /= divisor;
    }
    Ok(FilterReference {
        aggregate: out,
        accepted,
    })
}

/// Worst-case tape demand for one receiver's [`secure_filter_aggregate`]
/// call with every sender passing the floor.
pub fn cost_filter_receiver(dim: u64, clients: u64) -> TapeBudget {
    (cost_cosine_between(dim) + cost_compare() + cost_rescale_to_norm(dim)).scale(clients - 1)
        + cost_trunc(dim)
}

/// Tape demand for one full round of secure aggregation: per-client norm
/// profiles and floor checks plus every receiver's worst-case filter.
pub fn cost_filter_round(dim: u64, clients: u64) -> TapeBudget {
    (cost_norm_profile(dim) + cost_compare()).scale(clients)
        + cost_filter_receiver(dim, clients).scale(clients)
}

/// Open one public floor bit per client: whether its squared norm falls
/// below `floor^2`. Floor-rejected clients never enter cosine or rescale
/// work, so their possibly degenerate reciprocal norms are never used.
pub fn below_floor_bits(
    eng: &mut Engine,
    profiles: &[NormProfile],
    floor: f64,
) -> Result<Vec<bool>> {
    let thresh = floor * floor;
    profiles
        .iter()
        .map(|p| eng.compare_lt(&p.sum_sq, thresh))
        .collect()
}

/// One receiver's secure cosine-filtering aggregation over all clients'
/// shared updates.
///
/// `profiles` and `below_floor` are computed once per round (see
/// [`Engine::norm_profile`] and [`below_floor_bits`]) and reused across
/// receivers. Every accept decision is a public opened bit by design; the
/// update contents stay shared throughout.
#[allow(clippy::too_many_arguments)]
pub fn secure_filter_aggregate(
    eng: &mut Engine,
    updates: &[SharedVector],
    profiles: &[NormProfile],
    below_floor: &[bool],
    receiver: usize,
    params: &NormParams,
    cfg: &FilterConfig,
    times: &mut PhaseTimes,
) -> Result<FilterOutcome> {
    let n = updates.len();
    if n == 0 || profiles.len() != n || below_floor.len() != n {
        return Err(Error::Config(format!(
            "filter aggregation needs matching updates/profiles/floor bits, got {n}/{}/{}",
            profiles.len(),
            below_floor.len()
        )));
    }
    if receiver >= n {
        return Err(Error::Config(format!(
            "receiver index {receiver} out of range for {n} updates"
        )));
    }
    let _ = params;
    let own_ok = !below_floor[receiver];
    let mut accepted = vec![false; n];
    accepted[receiver] = own_ok;

    let mut sum = updates[receiver].clone();
    let mut kept = 0usize;
    for j in 0..n {
        if j == receiver || !own_ok || below_floor[j] {
            continue;
        }
        let start = Instant::now();
        let cos = eng.cosine_between(
            &updates[receiver],
            &profiles[receiver],
            &updates[j],
            &profiles[j],
        )?;
        times.cosine += start.elapsed();
        let start = Instant::now();
        let drop = eng.compare_lt(&cos, cfg.tau)?;
        times.compare += start.elapsed();
        if drop {
            continue;
        }
        accepted[j] = true;
        kept += 1;
        let start = Instant::now();
        let rescaled = eng.rescale_to_norm(&updates[j], &profiles[j], &profiles[receiver].norm)?;
        times.norm += start.elapsed();
        sum = sum.add(&rescaled)?;
    }
    let divisor = if cfg.divide_by_accepted {
        (kept + 1) as f64
    } else {
        n as f64
    };
    let factor = eng.codec().encode(1.0 / divisor)?;
    let start = Instant::now();
    let aggregate = eng.truncate(&sum.mul_public(factor))?;
    times.norm += start.elapsed();
    Ok(FilterOutcome {
        aggregate,
        accepted,
    })
}
