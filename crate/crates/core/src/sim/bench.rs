//! Wall-clock measurement of the secure primitives the filtering
//! aggregate spends its time in, across party counts. Absolute numbers
//! are hardware-bound; only the growth trend in the party count is
//! meaningful.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::Result;
use crate::linalg::{cost_cosine_between, cost_norm_profile, NormParams};
use crate::mpc::{cost_compare, Engine};
use crate::ring::FixedPointCodec;
use crate::sharing::share;

#[derive(Clone, Copy, Debug)]
pub struct BenchRow {
    pub n: usize,
    pub t_cosine_ms: f64,
    pub t_compare_ms: f64,
    pub t_norm_ms: f64,
}

fn median_ms(times: &mut [Duration]) -> f64 {
    times.sort_unstable();
    times[times.len() / 2].as_secs_f64() * 1e3
}

/// Time the cosine, comparison and norm primitives at vector dimension
/// `dim` for each party count in `sizes`, reporting the median of `iters`
/// repetitions.
pub fn bench_ops(sizes: &[usize], dim: usize, iters: usize, seed: u64) -> Result<Vec<BenchRow>> {
    let codec = FixedPointCodec::default();
    let params = NormParams::for_dimension(dim, 1.0)?;
    let it = iters.max(1) as u64;
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let budget = cost_norm_profile(dim as u64).scale(it + 2)
            + cost_cosine_between(dim as u64).scale(it)
            + cost_compare().scale(it);
        let mut eng = Engine::new(n, codec, budget, seed ^ (n as u64), false);
        let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(n as u64));
        let a: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sa = share(&codec.encode_slice(&a)?, n, &mut rng)?;
        let sb = share(&codec.encode_slice(&b)?, n, &mut rng)?;
        let pa = eng.norm_profile(&sa, &params)?;
        let pb = eng.norm_profile(&sb, &params)?;

        let mut t_cos = Vec::with_capacity(iters);
        let mut t_cmp = Vec::with_capacity(iters);
        let mut t_norm = Vec::with_capacity(iters);
        for _ in 0..iters.max(1) {
            let t = Instant::now();
            eng.norm_profile(&sa, &params)?;
            t_norm.push(t.elapsed());

            let t = Instant::now();
            let cos = eng.cosine_between(&sa, &pa, &sb, &pb)?;
            t_cos.push(t.elapsed());

            let t = Instant::now();
            eng.compare_lt(&cos, 0.0)?;
            t_cmp.push(t.elapsed());
        }
        rows.push(BenchRow {
            n,
            t_cosine_ms: median_ms(&mut t_cos),
            t_compare_ms: median_ms(&mut t_cmp),
            t_norm_ms: median_ms(&mut t_norm),
        });
    }
    Ok(rows)
}

/// Fixed-width table of bench rows for terminal output.
pub fn bench_table(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>4} {:>14} {:>14} {:>14}",
        "n", "t_cosine_ms", "t_compare_ms", "t_norm_ms"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>4} {:>14.3} {:>14.3} {:>14.3}",
            r.n, r.t_cosine_ms, r.t_compare_ms, r.t_norm_ms
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bench_produces_positive_times_per_size() {
        let rows = bench_ops(&[2, 4], 64, 3, 9).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!(r.t_cosine_ms > 0.0);
            assert!(r.t_compare_ms > 0.0);
            assert!(r.t_norm_ms > 0.0);
        }
        let table = bench_table(&rows);
        assert!(table.contains("t_norm_ms"));
        assert_eq!(table.lines().count(), 3);
    }
}
