//! Linear algebra over shared vectors: dot products, squared norms,
//! Euclidean norms with their reciprocals, cosine similarity, and
//! norm-matching rescale.
//!
//! Pairwise similarity work factors into a per-vector [`NormProfile`]
//! (squared norm, norm, reciprocal norm) that is computed once and then
//! reused across every pair the vector participates in, which is where
//! almost all of the nonlinear-op budget goes.

use crate::dealer::TapeBudget;
use crate::error::{Error, Result};
use crate::mpc::{cost_inverse, cost_mul, cost_mul_trunc, cost_sqrt, cost_trunc, Engine};
use crate::sharing::SharedVector;

/// Scale parameters for norm pipelines over vectors with a known
/// per-coordinate bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormParams {
    /// Normalizer for the norm reciprocal: a power of two at least as large
    /// as any legal norm, so the Newton stage never sees an out-of-domain
    /// input.
    pub inv_c: f64,
    /// Heron guess scale for the square root, fixed at `inv_c / 8` so the
    /// iteration's own internal bound coincides with `inv_c`. Norms in
    /// `[inv_c/64, inv_c]` get the op-level relative tolerance; smaller
    /// norms degrade gradually and rely on the caller's floor rejection.
    pub sqrt_x0: f64,
}

impl NormParams {
    /// Parameters for `dim`-coordinate vectors with coordinates in
    /// `[-clip, clip]`, whose norms are therefore at most `sqrt(dim)*clip`.
    pub fn for_dimension(dim: usize, clip: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("norm parameters need dimension > 0".into()));
        }
        if !clip.is_finite() || clip <= 0.0 {
            return Err(Error::Config(format!(
                "norm parameters need a positive clip bound, got {clip}"
            )));
        }
        let cap = (dim as f64).sqrt() * clip;
        // Minimum 8 keeps the guess scale at a non-negative power of two.
        let mut inv_c = 8.0f64;
        while inv_c < cap {
            inv_c *= 2.0;
        }
        Ok(NormParams {
            inv_c,
            sqrt_x0: inv_c / 8.0,
        })
    }
}

/// Per-vector norm data, computed once per vector and shared by all the
/// pairwise operations it participates in.
#[derive(Clone, Debug)]
pub struct NormProfile {
    /// Scalar sharing of the squared norm.
    pub sum_sq: SharedVector,
    /// Scalar sharing of the norm.
    pub norm: SharedVector,
    /// Scalar sharing of the reciprocal norm. Meaningful only when the
    /// squared norm is well away from zero; callers must gate on a norm
    /// floor before trusting it.
    pub inv_norm: SharedVector,
}

pub fn cost_dot(dim: u64) -> TapeBudget {
    cost_mul(dim) + cost_trunc(1)
}

pub fn cost_norm_profile(dim: u64) -> TapeBudget {
    cost_dot(dim) + cost_sqrt() + cost_inverse()
}

pub fn cost_cosine_between(dim: u64) -> TapeBudget {
    cost_dot(dim) + cost_mul_trunc(1) + cost_mul_trunc(1)
}

pub fn cost_rescale_to_norm(dim: u64) -> TapeBudget {
    cost_mul_trunc(1) + cost_mul(dim) + cost_trunc(dim)
}

impl Engine {
    /// Scalar sharing of the dot product. Coordinatewise Beaver products
    /// are summed in the ring before a single truncation, so the rescale
    /// noise is one carry regardless of dimension.
    ///
    /// The true dot product magnitude must stay below `2^(61 - 2f)` in
    /// real units (about `5e8` at the default scale).
    pub fn dot(&mut self, a: &SharedVector, b: &SharedVector) -> Result<SharedVector> {
        let raw = self.mul(a, b)?;
        self.truncate(&raw.sum_coords())
    }

    /// Scalar sharing of the squared Euclidean norm.
    pub fn sum_of_squares(&mut self, a: &SharedVector) -> Result<SharedVector> {
        self.dot(a, a)
    }

    /// Squared norm, norm, and reciprocal norm of one vector.
    pub fn norm_profile(&mut self, v: &SharedVector, p: &NormParams) -> Result<NormProfile> {
        let sum_sq = self.sum_of_squares(v)?;
        let norm = self.sqrt(&sum_sq, p.sqrt_x0)?;
        let inv_norm = self.inverse(&norm, p.inv_c)?;
        Ok(NormProfile {
            sum_sq,
            norm,
            inv_norm,
        })
    }

    /// Scalar sharing of the cosine similarity between `a` and `b`, using
    /// their precomputed profiles: `(a . b) / ‖a‖ / ‖b‖`, dividing by one
    /// norm at a time so each reciprocal stays well above the quantization
    /// floor.
    pub fn cosine_between(
        &mut self,
        a: &SharedVector,
        a_prof: &NormProfile,
        b: &SharedVector,
        b_prof: &NormProfile,
    ) -> Result<SharedVector> {
        let dot = self.dot(a, b)?;
        let partial = self.mul_trunc(&dot, &a_prof.inv_norm)?;
        self.mul_trunc(&partial, &b_prof.inv_norm)
    }

    /// Rescale `target` to carry the reference norm:
    /// `target * (reference_norm / ‖target‖)`.
    pub fn rescale_to_norm(
        &mut self,
        target: &SharedVector,
        target_prof: &NormProfile,
        reference_norm: &SharedVector,
    ) -> Result<SharedVector> {
        let ratio = self.mul_trunc(reference_norm, &target_prof.inv_norm)?;
        let wide = ratio.broadcast(target.dim())?;
        let raw = self.mul(target, &wide)?;
        self.truncate(&raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dealer::TapeBudget;
    use crate::ring::FixedPointCodec;
    use crate::sharing::share;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    const N: usize = 3;

    fn engine(seed: u64) -> Engine {
        let budget = TapeBudget {
            triples: 4_000_000,
            trunc_pairs: 4_000_000,
            edabits: 1_000,
        };
        Engine::new(N, FixedPointCodec::default(), budget, seed, false)
    }

    fn enc_share(eng: &Engine, vals: &[f64], rng: &mut ChaCha20Rng) -> SharedVector {
        let enc = eng.codec().encode_slice(vals).unwrap();
        share(&enc, N, rng).unwrap()
    }

    fn open1(eng: &mut Engine, sv: &SharedVector) -> f64 {
        eng.codec().decode(eng.open_output(sv).unwrap()[0])
    }

    /// The coordinate values the protocol actually operates on: the inputs
    /// after fixed-point quantization.
    fn quantize(c: &FixedPointCodec, v: &[f64]) -> Vec<f64> {
        v.iter().map(|&x| c.decode(c.encode(x).unwrap())).collect()
    }

    fn random_vec(dim: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
        (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn norm_f64(a: &[f64]) -> f64 {
        dot_f64(a, a).sqrt()
    }

    #[test]
    fn dot_is_within_one_truncation_carry() {
        let mut eng = engine(40);
        let mut rng = ChaCha20Rng::seed_from_u64(41);
        let c = eng.codec();
        let ulp = c.ulp();
        for _ in 0..200 {
            let a = random_vec(64, &mut rng);
            let b = random_vec(64, &mut rng);
            let sa = enc_share(&eng, &a, &mut rng);
            let sb = enc_share(&eng, &b, &mut rng);
            let got = {
                let d = eng.dot(&sa, &sb).unwrap();
                open1(&mut eng, &d)
            };
            // Products of quantized coordinates are exact in f64, so the
            // only protocol error is the single truncation carry.
            let expected = dot_f64(&quantize(&c, &a), &quantize(&c, &b));
            assert!(
                (got - expected).abs() < ulp * 1.0001,
                "dot err {} vs one ulp {}",
                (got - expected).abs(),
                ulp
            );
        }
    }

    #[test]
    fn sum_of_squares_matches_quantized_inputs() {
        let mut eng = engine(42);
        let mut rng = ChaCha20Rng::seed_from_u64(43);
        let c = eng.codec();
        for _ in 0..100 {
            let a = random_vec(32, &mut rng);
            let sa = enc_share(&eng, &a, &mut rng);
            let s = eng.sum_of_squares(&sa).unwrap();
            let got = open1(&mut eng, &s);
            let q = quantize(&c, &a);
            assert!((got - dot_f64(&q, &q)).abs() < c.ulp() * 1.0001);
        }
    }

    #[test]
    fn norm_profile_tracks_true_norms() {
        let mut eng = engine(44);
        let mut rng = ChaCha20Rng::seed_from_u64(45);
        let c = eng.codec();
        let p = NormParams::for_dimension(64, 1.0).unwrap();
        assert_eq!(p.inv_c, 8.0);
        assert_eq!(p.sqrt_x0, 1.0);
        for _ in 0..50 {
            let v = random_vec(64, &mut rng);
            let sv = enc_share(&eng, &v, &mut rng);
            let prof = eng.norm_profile(&sv, &p).unwrap();
            let want = norm_f64(&quantize(&c, &v));
            let norm = open1(&mut eng, &prof.norm);
            let inv = open1(&mut eng, &prof.inv_norm);
            assert!((norm - want).abs() / want <= 2e-3, "norm {norm} vs {want}");
            assert!(
                (inv - 1.0 / want).abs() * want <= 2e-3,
                "inv_norm {inv} vs {}",
                1.0 / want
            );
        }
    }

    #[test]
    fn cosine_stays_within_a_percent_of_reals() {
        let mut eng = engine(46);
        let mut rng = ChaCha20Rng::seed_from_u64(47);
        let c = eng.codec();
        let p = NormParams::for_dimension(64, 1.0).unwrap();
        for case in 0..120 {
            let a = random_vec(64, &mut rng);
            // Mix independent, aligned, and opposed pairs so the whole
            // cosine range is exercised.
            let b: Vec<f64> = match case % 3 {
                0 => random_vec(64, &mut rng),
                1 => a
                    .iter()
                    .map(|&x| (x * 0.9 + rng.gen_range(-0.1..0.1)).clamp(-1.0, 1.0))
                    .collect(),
                _ => a
                    .iter()
                    .map(|&x| (-x * 0.9 + rng.gen_range(-0.1..0.1)).clamp(-1.0, 1.0))
                    .collect(),
            };
            let sa = enc_share(&eng, &a, &mut rng);
            let sb = enc_share(&eng, &b, &mut rng);
            let pa = eng.norm_profile(&sa, &p).unwrap();
            let pb = eng.norm_profile(&sb, &p).unwrap();
            let cos = {
                let x = eng.cosine_between(&sa, &pa, &sb, &pb).unwrap();
                open1(&mut eng, &x)
            };
            let qa = quantize(&c, &a);
            let qb = quantize(&c, &b);
            let want = dot_f64(&qa, &qb) / (norm_f64(&qa) * norm_f64(&qb));
            assert!(
                (cos - want).abs() <= 1e-2,
                "cosine {cos} vs {want} (case {case})"
            );
            assert!(cos.abs() <= 1.01);
        }
    }

    #[test]
    fn rescale_matches_reference_norm_and_keeps_direction() {
        let mut eng = engine(48);
        let mut rng = ChaCha20Rng::seed_from_u64(49);
        let c = eng.codec();
        let p = NormParams::for_dimension(64, 1.0).unwrap();
        for _ in 0..50 {
            let reference = random_vec(64, &mut rng);
            let target = random_vec(64, &mut rng);
            let sr = enc_share(&eng, &reference, &mut rng);
            let st = enc_share(&eng, &target, &mut rng);
            let pr = eng.norm_profile(&sr, &p).unwrap();
            let pt = eng.norm_profile(&st, &p).unwrap();
            let out = eng.rescale_to_norm(&st, &pt, &pr.norm).unwrap();
            let opened = eng.open_output(&out).unwrap();
            let vals: Vec<f64> = opened.iter().map(|&x| c.decode(x)).collect();
            let ref_norm = norm_f64(&quantize(&c, &reference));
            let ratio = norm_f64(&vals) / ref_norm;
            assert!(
                (0.98..=1.02).contains(&ratio),
                "rescaled norm ratio {ratio}"
            );
            let qt = quantize(&c, &target);
            let dir = dot_f64(&vals, &qt) / (norm_f64(&vals) * norm_f64(&qt));
            assert!(dir > 0.9999, "direction drifted: cosine {dir}");
        }
    }

    #[test]
    fn costs_are_exact() {
        let rng = ChaCha20Rng::seed_from_u64(50);
        let p = NormParams::for_dimension(16, 1.0).unwrap();
        let check = |expected: TapeBudget, f: &dyn Fn(&mut Engine, &mut ChaCha20Rng)| {
            let mut eng = engine(51);
            let mut r = rng.clone();
            f(&mut eng, &mut r);
            assert_eq!(eng.consumed(), expected);
        };
        check(cost_dot(16), &|eng, r| {
            let a = enc_share(eng, &[0.5; 16], r);
            let b = enc_share(eng, &[0.25; 16], r);
            eng.dot(&a, &b).unwrap();
        });
        check(cost_norm_profile(16), &|eng, r| {
            let a = enc_share(eng, &[0.5; 16], r);
            eng.norm_profile(&a, &p).unwrap();
        });
        check(
            cost_norm_profile(16).scale(2) + cost_cosine_between(16),
            &|eng, r| {
                let a = enc_share(eng, &[0.5; 16], r);
                let b = enc_share(eng, &[0.25; 16], r);
                let pa = eng.norm_profile(&a, &p).unwrap();
                let pb = eng.norm_profile(&b, &p).unwrap();
                eng.cosine_between(&a, &pa, &b, &pb).unwrap();
            },
        );
        check(
            cost_norm_profile(16).scale(2) + cost_rescale_to_norm(16),
            &|eng, r| {
                let a = enc_share(eng, &[0.5; 16], r);
                let b = enc_share(eng, &[0.25; 16], r);
                let pa = eng.norm_profile(&a, &p).unwrap();
                let pb = eng.norm_profile(&b, &p).unwrap();
                eng.rescale_to_norm(&b, &pb, &pa.norm).unwrap();
            },
        );
    }

    #[test]
    fn norm_params_validate_and_scale_with_dimension() {
        assert!(NormParams::for_dimension(0, 1.0).is_err());
        assert!(NormParams::for_dimension(10, 0.0).is_err());
        assert!(NormParams::for_dimension(10, f64::NAN).is_err());
        // Tiny problems clamp to the smallest band.
        let small = NormParams::for_dimension(4, 1.0).unwrap();
        assert_eq!(small.inv_c, 8.0);
        // A full-scale model lands on the next power of two above sqrt(d).
        let big = NormParams::for_dimension(25_450, 1.0).unwrap();
        assert_eq!(big.inv_c, 256.0);
        assert_eq!(big.sqrt_x0, 32.0);
    }
}
