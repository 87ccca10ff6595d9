//! Protocol operations: multiplication, truncation, comparison, reciprocal
//! and square root over shared fixed-point values.
//!
//! Numeric contracts, all enforced or documented at the operation:
//!
//! * [`Engine::mul`] is exact in the ring; a product of two scale-`2^f`
//!   encodings carries scale `2^(2f)` until truncated.
//! * [`Engine::truncate`] shifts by the codec's fraction width with a
//!   probabilistic carry: the result is `floor(v / 2^f)` or one more, so
//!   every truncation costs at most one unit in the last place. The input
//!   magnitude must stay below `2^61` so the masked opening cannot wrap.
//! * [`Engine::compare_lt`] opens the result bit by design; everything
//!   else it opens is masked by a fresh uniform ring element.
//! * [`Engine::inverse`] needs a public power-of-two normalizer `c` with
//!   `0 < x < 1.9c`. Convergence is complete for `x/c >= 2^-8`; below that
//!   the result degrades toward zero but never changes sign, which is the
//!   property the aggregation threshold tests rely on.
//! * [`Engine::sqrt`] needs a public power-of-two initial guess `x0` with
//!   `sqrt(y)/x0` in `[1/8, 8]`.
//!
//! Each operation consumes a fixed amount of dealer material given by the
//! matching `cost_*` function, which the simulator uses to compute exact
//! run budgets.

use crate::dealer::{self, TapeBudget};
use crate::error::{Error, Result};
use crate::mpc::engine::{Engine, OpeningKind};
use crate::ring::RingElement;
use crate::sharing::{ShareVector, SharedVector};

/// Newton iterations for the reciprocal.
pub const INVERSE_ITERS: u64 = 15;
/// Outer Heron iterations for the square root.
pub const SQRT_ITERS: u64 = 15;

pub fn cost_mul(dim: u64) -> TapeBudget {
    TapeBudget {
        triples: dim,
        trunc_pairs: 0,
        edabits: 0,
    }
}

pub fn cost_trunc(dim: u64) -> TapeBudget {
    TapeBudget {
        triples: 0,
        trunc_pairs: dim,
        edabits: 0,
    }
}

pub fn cost_mul_trunc(dim: u64) -> TapeBudget {
    cost_mul(dim) + cost_trunc(dim)
}

pub fn cost_compare() -> TapeBudget {
    TapeBudget {
        triples: 63,
        trunc_pairs: 0,
        edabits: 1,
    }
}

pub fn cost_inverse() -> TapeBudget {
    // Two truncated products per iteration, plus input normalization and
    // denormalization truncations.
    TapeBudget {
        triples: 2 * INVERSE_ITERS,
        trunc_pairs: 2 * INVERSE_ITERS + 2,
        edabits: 0,
    }
}

pub fn cost_sqrt() -> TapeBudget {
    // Per outer iteration: one reciprocal, one truncated product, one
    // halving truncation.
    (cost_inverse() + cost_mul_trunc(1) + cost_trunc(1)).scale(SQRT_ITERS)
}

fn pow2_exponent(v: f64, what: &str) -> Result<u32> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::Config(format!(
            "{what} must be a positive power of two, got {v}"
        )));
    }
    let k = v.log2();
    if k.fract() != 0.0 || k < 0.0 {
        return Err(Error::Config(format!(
            "{what} must be a positive power of two, got {v}"
        )));
    }
    Ok(k as u32)
}

fn check_same_shape(x: &SharedVector, y: &SharedVector) -> Result<()> {
    if x.n() != y.n() || x.dim() != y.dim() {
        return Err(Error::ShareMismatch(format!(
            "operands disagree: {} parties dim {} vs {} parties dim {}",
            x.n(),
            x.dim(),
            y.n(),
            y.dim()
        )));
    }
    Ok(())
}

fn check_scalar(x: &SharedVector, what: &str) -> Result<()> {
    if x.dim() != 1 {
        return Err(Error::ShareMismatch(format!(
            "{what} takes a scalar sharing, got dimension {}",
            x.dim()
        )));
    }
    Ok(())
}

impl Engine {
    /// Elementwise product via Beaver triples. Exact in the ring; the
    /// result of multiplying two fixed-point encodings carries doubled
    /// scale until [`Engine::truncate`].
    pub fn mul(&mut self, x: &SharedVector, y: &SharedVector) -> Result<SharedVector> {
        check_same_shape(x, y)?;
        let n = self.n();
        let d = x.dim();
        let trip = dealer::take_triples_all(self.tapes_mut(), d)?;

        let delta_sv = SharedVector::from_shares(
            (0..n)
                .map(|i| {
                    let xe = x.party(i).elems();
                    ShareVector::new(
                        i,
                        xe.iter()
                            .zip(&trip[i].a)
                            .map(|(&xk, &ak)| xk - ak)
                            .collect(),
                    )
                })
                .collect(),
        )?;
        let delta = self.open(OpeningKind::BeaverDelta, &delta_sv)?;

        let eps_sv = SharedVector::from_shares(
            (0..n)
                .map(|i| {
                    let ye = y.party(i).elems();
                    ShareVector::new(
                        i,
                        ye.iter()
                            .zip(&trip[i].b)
                            .map(|(&yk, &bk)| yk - bk)
                            .collect(),
                    )
                })
                .collect(),
        )?;
        let eps = self.open(OpeningKind::BeaverEpsilon, &eps_sv)?;

        SharedVector::from_shares(
            (0..n)
                .map(|i| {
                    let t = &trip[i];
                    ShareVector::new(
                        i,
                        (0..d)
                            .map(|k| {
                                let mut w = t.c[k] + delta[k] * t.b[k] + eps[k] * t.a[k];
                                if i == 0 {
                                    w += delta[k] * eps[k];
                                }
                                w
                            })
                            .collect(),
                    )
                })
                .collect(),
        )
    }

    /// Probabilistic truncation by the codec's fraction width: the result
    /// is `floor(v / 2^f)` plus a data-independent carry in `{0, 1}`.
    ///
    /// The signed value of every coordinate must stay below `2^61` in
    /// magnitude; all in-protocol values are far smaller.
    pub fn truncate(&mut self, x: &SharedVector) -> Result<SharedVector> {
        let n = self.n();
        let d = x.dim();
        let f = self.codec().frac_bits;
        let pairs = dealer::take_trunc_pairs_all(self.tapes_mut(), d)?;
        let offset = RingElement::new(1u64 << 62);

        // Open v + 2^62 + r. The offset keeps the sum non-negative, the
        // mask keeps its low bits uniform.
        let m_sv = SharedVector::from_shares(
            (0..n)
                .map(|i| {
                    let xe = x.party(i).elems();
                    let mut elems: Vec<RingElement> = xe
                        .iter()
                        .zip(&pairs[i].r)
                        .map(|(&xk, &rk)| xk + rk)
                        .collect();
                    if i == 0 {
                        for e in &mut elems {
                            *e += offset;
                        }
                    }
                    ShareVector::new(i, elems)
                })
                .collect(),
        )?;
        let m = self.open(OpeningKind::TruncMask, &m_sv)?;

        let pub_shift = 1u64 << (62 - f);
        SharedVector::from_shares(
            (0..n)
                .map(|i| {
                    ShareVector::new(
                        i,
                        (0..d)
                            .map(|k| {
                                let mut w = -pairs[i].r_shifted[k];
                                if i == 0 {
                                    w +=
                                        RingElement::new((m[k].raw() >> f).wrapping_sub(pub_shift));
                                }
                                w
                            })
                            .collect(),
                    )
                })
                .collect(),
        )
    }

    /// Product of two fixed-point sharings back at single scale.
    pub fn mul_trunc(&mut self, x: &SharedVector, y: &SharedVector) -> Result<SharedVector> {
        let p = self.mul(x, y)?;
        self.truncate(&p)
    }

    /// Whether the shared scalar is strictly below the public threshold.
    ///
    /// The decision bit itself is opened, which is this protocol's one
    /// deliberate leak: the aggregation rule needs the outcome to act on
    /// it. Everything else opened here is uniformly masked.
    pub fn compare_lt(&mut self, x: &SharedVector, threshold: f64) -> Result<bool> {
        check_scalar(x, "compare_lt")?;
        let t_enc = self.codec().encode(threshold)?;
        let n = self.n();
        let eda = dealer::take_edabit_all(self.tapes_mut())?;

        // Open m = (x - t) + r with r uniform over the whole ring.
        let m_sv = SharedVector::from_shares(
            (0..n)
                .map(|i| {
                    let mut w = x.party(i).elems()[0] + eda[i].r;
                    if i == 0 {
                        w -= t_enc;
                    }
                    ShareVector::new(i, vec![w])
                })
                .collect(),
        )?;
        let m = self.open(OpeningKind::CompareMask, &m_sv)?[0].raw();

        // Two's-complement sign of y = m - r: bit 63 of m and r, corrected
        // by the borrow out of the low 63 bits, which is [u < v] for the
        // public u = m mod 2^63 and the bit-shared v = r mod 2^63.
        let sign_m = (m >> 63) & 1;
        let u = m & ((1u64 << 63) - 1);

        let bit_share = |j: usize| -> SharedVector {
            SharedVector::from_shares(
                (0..n)
                    .map(|i| ShareVector::new(i, vec![eda[i].bits[j]]))
                    .collect(),
            )
            .expect("edabit shares are aligned")
        };
        let one = RingElement::new(1);
        // XOR against a public bit is local.
        let xor_pub = |v: &SharedVector, u_bit: u64| -> Result<SharedVector> {
            if u_bit == 1 {
                v.neg().add_public_scalar(one)
            } else {
                Ok(v.clone())
            }
        };

        // Prefix-OR of the difference bits from the most significant end;
        // the first set position decides [u < v].
        let u_bit = |j: usize| (u >> j) & 1;
        let mut z = xor_pub(&bit_share(62), u_bit(62))?;
        let mut borrow = if u_bit(62) == 0 {
            z.clone()
        } else {
            SharedVector::zeros(n, 1)
        };
        for j in (0..62).rev() {
            let yj = xor_pub(&bit_share(j), u_bit(j))?;
            let zy = self.mul(&z, &yj)?;
            let z_new = z.add(&yj)?.sub(&zy)?;
            if u_bit(j) == 0 {
                // w_j = z_j - z_{j+1} marks the first difference at j.
                borrow = borrow.add(&z_new.sub(&z)?)?;
            }
            z = z_new;
        }

        // sign = sign_m XOR r_63 XOR borrow.
        let r63 = bit_share(63);
        let rb = self.mul(&r63, &borrow)?;
        let mut sign = r63.add(&borrow)?.sub(&rb.mul_public(RingElement::new(2)))?;
        if sign_m == 1 {
            sign = sign.neg().add_public_scalar(one)?;
        }

        let bit = self.open(OpeningKind::PublicBit, &sign)?[0].raw();
        if bit > 1 {
            return Err(Error::Protocol(format!(
                "comparison bit reconstructed to {bit}, expected 0 or 1"
            )));
        }
        Ok(bit == 1)
    }

    /// Reciprocal `1/x` of a positive shared scalar, normalized by a
    /// public power of two `c` chosen so `x < 1.9c`.
    ///
    /// Fifteen coupled Newton iterations drive the normalized value to 1;
    /// the quotient accumulates `c/x` and is scaled back by `1/c` (an
    /// exact shift, which is why `c` must be a power of two). For inputs
    /// far below `c` the result underestimates `1/x` but stays positive.
    pub fn inverse(&mut self, x: &SharedVector, c: f64) -> Result<SharedVector> {
        check_scalar(x, "inverse")?;
        let k = pow2_exponent(c, "inverse normalizer")?;
        let f = self.codec().frac_bits;
        if k >= f {
            return Err(Error::Config(format!(
                "inverse normalizer 2^{k} too large for {f} fraction bits"
            )));
        }
        let q = RingElement::new(1u64 << (f - k));
        let two = RingElement::new(2);
        let mut m = self.truncate(&x.mul_public(q))?;
        let mut b = SharedVector::from_public(&[self.codec().one()], x.n());
        for _ in 0..INVERSE_ITERS {
            let bm = self.mul_trunc(&b, &m)?;
            b = b.mul_public(two).sub(&bm)?;
            let mm = self.mul_trunc(&m, &m)?;
            m = m.mul_public(two).sub(&mm)?;
        }
        self.truncate(&b.mul_public(q))
    }

    /// Square root of a non-negative shared scalar by Heron iteration
    /// around a public power-of-two guess scale `x0`.
    ///
    /// The iteration starts at `8 x0`, the top of the accuracy contract,
    /// so the iterates descend monotonically toward the root and never
    /// exceed the reciprocal normalizer `c = 8 x0`: the internal Newton
    /// stage stays in its convergent domain for every `y >= 0`, and the
    /// normalizer stays as small as the contract allows, which is what
    /// bounds the truncation noise. Relative error is within the stated
    /// tolerance when `sqrt(y)/x0` lies in `[1/8, 8]`.
    pub fn sqrt(&mut self, y: &SharedVector, x0: f64) -> Result<SharedVector> {
        check_scalar(y, "sqrt")?;
        let k0 = pow2_exponent(x0, "sqrt initial guess")?;
        let f = self.codec().frac_bits;
        if k0 + 3 >= f {
            return Err(Error::Config(format!(
                "sqrt initial guess 2^{k0} too large for {f} fraction bits"
            )));
        }
        let c = 8.0 * x0;
        let half = self.codec().encode(0.5)?;
        let mut x = SharedVector::from_public(&[self.codec().encode(8.0 * x0)?], y.n());
        for _ in 0..SQRT_ITERS {
            let inv = self.inverse(&x, c)?;
            let quot = self.mul_trunc(y, &inv)?;
            x = self.truncate(&x.add(&quot)?.mul_public(half))?;
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::FixedPointCodec;
    use crate::sharing::share;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    const N: usize = 3;

    fn engine(seed: u64) -> Engine {
        let budget = TapeBudget {
            triples: 2_000_000,
            trunc_pairs: 2_000_000,
            edabits: 10_000,
        };
        Engine::new(N, FixedPointCodec::default(), budget, seed, false)
    }

    fn enc_share(eng: &Engine, x: f64, rng: &mut ChaCha20Rng) -> SharedVector {
        let e = eng.codec().encode(x).unwrap();
        share(&[e], N, rng).unwrap()
    }

    fn open1(eng: &mut Engine, x: &SharedVector) -> RingElement {
        eng.open_output(x).unwrap()[0]
    }

    #[test]
    fn mul_is_exact_in_the_ring() {
        let mut eng = engine(1);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut cases: Vec<(f64, f64)> = (0..500)
            .map(|_| {
                (
                    rng.gen_range(-30000.0..30000.0),
                    rng.gen_range(-30000.0..30000.0),
                )
            })
            .collect();
        cases.extend([
            (32767.9, 32767.9),
            (-32767.9, 32767.9),
            (0.0, 123.25),
            (1.0, 1.0),
        ]);
        for (x, y) in cases {
            let xe = eng.codec().encode(x).unwrap();
            let ye = eng.codec().encode(y).unwrap();
            let xs = enc_share(&eng, x, &mut rng);
            let ys = enc_share(&eng, y, &mut rng);
            let z = eng.mul(&xs, &ys).unwrap();
            let opened = open1(&mut eng, &z);
            assert_eq!(opened.raw(), xe.raw().wrapping_mul(ye.raw()));
        }
    }

    #[test]
    fn mul_handles_vectors_elementwise() {
        let mut eng = engine(3);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..7).map(|i| i as f64 - 3.5).collect();
        let ys: Vec<f64> = (0..7).map(|i| 0.25 * i as f64 + 0.125).collect();
        let xe = eng.codec().encode_slice(&xs).unwrap();
        let ye = eng.codec().encode_slice(&ys).unwrap();
        let xsv = share(&xe, N, &mut rng).unwrap();
        let ysv = share(&ye, N, &mut rng).unwrap();
        let z = eng.mul(&xsv, &ysv).unwrap();
        let opened = eng.open_output(&z).unwrap();
        for k in 0..7 {
            assert_eq!(opened[k].raw(), xe[k].raw().wrapping_mul(ye[k].raw()));
        }
    }

    #[test]
    fn truncate_floors_with_probabilistic_carry() {
        let mut eng = engine(5);
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let mut cases: Vec<i64> = vec![0, 1, -1, 65535, 65536, -65536, -65537, 98304];
        for _ in 0..10_000 {
            cases.push(rng.gen_range(-(1i64 << 47)..(1i64 << 47)));
        }
        for v in cases {
            let x = share(&[RingElement::from_signed(v)], N, &mut rng).unwrap();
            let t = eng.truncate(&x).unwrap();
            let got = open1(&mut eng, &t).as_signed();
            let floor = v >> 16;
            assert!(
                got == floor || got == floor + 1,
                "trunc({v}) gave {got}, floor {floor}"
            );
        }
    }

    #[test]
    fn truncate_carry_is_roughly_unbiased() {
        let mut eng = engine(7);
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        // Exactly half a fraction unit: the carry should fire about half
        // the time.
        let v = 1i64 << 15;
        let mut carries = 0;
        for _ in 0..2000 {
            let x = share(&[RingElement::from_signed(v)], N, &mut rng).unwrap();
            let t = eng.truncate(&x).unwrap();
            if open1(&mut eng, &t).as_signed() == 1 {
                carries += 1;
            }
        }
        assert!(
            (800..=1200).contains(&carries),
            "carry fired {carries}/2000 times"
        );
    }

    #[test]
    fn truncate_exact_multiples_never_carry() {
        let mut eng = engine(9);
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        for v in [0i64, 65536, -65536, 131072, 1 << 40, -(1 << 40)] {
            for _ in 0..50 {
                let x = share(&[RingElement::from_signed(v)], N, &mut rng).unwrap();
                let t = eng.truncate(&x).unwrap();
                assert_eq!(open1(&mut eng, &t).as_signed(), v >> 16);
            }
        }
    }

    #[test]
    fn mul_trunc_approximates_real_products() {
        let mut eng = engine(11);
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let ulp = eng.codec().ulp();
        for _ in 0..500 {
            let x: f64 = rng.gen_range(-150.0..150.0);
            let y: f64 = rng.gen_range(-150.0..150.0);
            let xs = enc_share(&eng, x, &mut rng);
            let ys = enc_share(&eng, y, &mut rng);
            let z = eng.mul_trunc(&xs, &ys).unwrap();
            let got = eng.codec().decode(open1(&mut eng, &z));
            let tol = (x.abs() + y.abs() + 3.0) * ulp;
            assert!(
                (got - x * y).abs() <= tol,
                "{x} * {y} = {got}, want {}",
                x * y
            );
        }
    }

    #[test]
    fn compare_matches_signed_order_on_grid_and_random() {
        let mut eng = engine(13);
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        let ulp = eng.codec().ulp();
        let grid = [-10.0, -0.5, 0.0, 0.5, 10.0];
        let mut cases: Vec<(f64, f64)> = Vec::new();
        for &x in &grid {
            for &t in &grid {
                cases.push((x, t));
            }
        }
        // Adjacent encodings around the threshold.
        cases.push((1.0 - ulp, 1.0));
        cases.push((1.0 + ulp, 1.0));
        cases.push((-1.0 - ulp, -1.0));
        cases.push((16000.0, -16000.0));
        cases.push((-16000.0, 16000.0));
        for _ in 0..500 {
            cases.push((rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0)));
        }
        for (x, t) in cases {
            let xs = enc_share(&eng, x, &mut rng);
            let got = eng.compare_lt(&xs, t).unwrap();
            let want = eng.codec().encode(x).unwrap().as_signed()
                < eng.codec().encode(t).unwrap().as_signed();
            assert_eq!(got, want, "compare {x} < {t}");
        }
    }

    #[test]
    fn compare_on_equal_values_is_false() {
        let mut eng = engine(15);
        let mut rng = ChaCha20Rng::seed_from_u64(16);
        for x in [0.0, 1.5, -2.25, 100.0] {
            let xs = enc_share(&eng, x, &mut rng);
            assert!(!eng.compare_lt(&xs, x).unwrap());
        }
    }

    #[test]
    fn inverse_is_exact_on_the_normalizer_itself() {
        let mut rng = ChaCha20Rng::seed_from_u64(18);
        for c in [2.0, 4.0, 8.0] {
            let mut eng = engine(17);
            let xs = enc_share(&eng, c, &mut rng);
            let inv = eng.inverse(&xs, c).unwrap();
            let got = open1(&mut eng, &inv);
            assert_eq!(got, eng.codec().encode(1.0 / c).unwrap());
        }
    }

    #[test]
    fn inverse_hits_relative_tolerance_near_the_normalizer() {
        let mut eng = engine(19);
        let mut rng = ChaCha20Rng::seed_from_u64(20);
        for c in [2.0f64, 4.0, 8.0] {
            for i in 0..=10 {
                let ratio = 0.5 + i as f64 * 0.1;
                let x = ratio * c;
                let xs = enc_share(&eng, x, &mut rng);
                let inv = eng.inverse(&xs, c).unwrap();
                let got = eng.codec().decode(open1(&mut eng, &inv));
                let rel = (got - 1.0 / x).abs() * x;
                assert!(rel <= 1e-3, "1/{x} (c={c}) rel err {rel:.2e}");
            }
        }
    }

    #[test]
    fn inverse_tracks_large_normalizers_to_an_ulp() {
        let mut eng = engine(21);
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        let ulp = eng.codec().ulp();
        // Pipeline scale: denominators up to d * G^2 under c = 2^15. The
        // reciprocal is then only a few ulp, so the honest contract is
        // absolute.
        for x in [100.0f64, 1000.0, 20000.0] {
            let xs = enc_share(&eng, x, &mut rng);
            let inv = eng.inverse(&xs, 32768.0).unwrap();
            let got = eng.codec().decode(open1(&mut eng, &inv));
            assert!(
                (got - 1.0 / x).abs() <= 3.0 * ulp,
                "1/{x} = {got:.3e}, want {:.3e}",
                1.0 / x
            );
            assert!(got > 0.0, "reciprocal of {x} lost its sign");
        }
    }

    #[test]
    fn inverse_rejects_bad_normalizers() {
        let mut eng = engine(23);
        let mut rng = ChaCha20Rng::seed_from_u64(24);
        let xs = enc_share(&eng, 2.0, &mut rng);
        assert!(matches!(eng.inverse(&xs, 3.0), Err(Error::Config(_))));
        assert!(matches!(eng.inverse(&xs, 0.0), Err(Error::Config(_))));
        assert!(matches!(eng.inverse(&xs, -4.0), Err(Error::Config(_))));
        assert!(matches!(eng.inverse(&xs, 65536.0), Err(Error::Config(_))));
    }

    #[test]
    fn sqrt_hits_relative_tolerance_within_contract() {
        let mut eng = engine(25);
        let mut rng = ChaCha20Rng::seed_from_u64(26);
        for x0 in [1.0f64, 2.0, 4.0] {
            for ratio in [0.125f64, 0.3, 1.0, 2.5, 8.0] {
                let s = ratio * x0;
                let y = s * s;
                let ys = enc_share(&eng, y, &mut rng);
                let r = eng.sqrt(&ys, x0).unwrap();
                let got = eng.codec().decode(open1(&mut eng, &r));
                let rel = (got - s).abs() / s;
                assert!(rel <= 1e-3, "sqrt({y}) x0={x0} rel err {rel:.2e}");
            }
        }
    }

    #[test]
    fn sqrt_handles_pipeline_scale_norms() {
        let mut eng = engine(27);
        let mut rng = ChaCha20Rng::seed_from_u64(28);
        for y in [54.0f64, 250.0, 25000.0] {
            let ys = enc_share(&eng, y, &mut rng);
            let r = eng.sqrt(&ys, 32.0).unwrap();
            let got = eng.codec().decode(open1(&mut eng, &r));
            let want = y.sqrt();
            assert!(
                (got - want).abs() / want <= 1e-2,
                "sqrt({y}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn sqrt_rejects_bad_guesses() {
        let mut eng = engine(29);
        let mut rng = ChaCha20Rng::seed_from_u64(30);
        let ys = enc_share(&eng, 4.0, &mut rng);
        assert!(matches!(eng.sqrt(&ys, 3.0), Err(Error::Config(_))));
        assert!(matches!(eng.sqrt(&ys, 8192.0), Err(Error::Config(_))));
    }

    #[test]
    fn op_costs_are_exact() {
        let mut rng = ChaCha20Rng::seed_from_u64(32);
        let codec = FixedPointCodec::default();
        let xe = codec.encode_slice(&[1.5, 2.5, -0.5]).unwrap();

        // Each op on a fresh engine consumes exactly its advertised cost.
        let mut eng = engine(31);
        let xs = share(&xe, N, &mut rng).unwrap();
        let ys = share(&xe, N, &mut rng).unwrap();
        eng.mul(&xs, &ys).unwrap();
        assert_eq!(eng.consumed(), cost_mul(3));

        let mut eng = engine(31);
        eng.truncate(&xs).unwrap();
        assert_eq!(eng.consumed(), cost_trunc(3));

        let mut eng = engine(31);
        let s = enc_share(&eng, 1.0, &mut rng);
        eng.compare_lt(&s, 0.0).unwrap();
        assert_eq!(eng.consumed(), cost_compare());

        let mut eng = engine(31);
        eng.inverse(&s, 4.0).unwrap();
        assert_eq!(eng.consumed(), cost_inverse());

        let mut eng = engine(31);
        eng.sqrt(&s, 1.0).unwrap();
        assert_eq!(eng.consumed(), cost_sqrt());
    }

    #[test]
    fn exact_budget_suffices_and_less_fails() {
        let mut rng = ChaCha20Rng::seed_from_u64(34);
        let codec = FixedPointCodec::default();

        let exact = cost_sqrt();
        let mut eng = Engine::new(N, codec, exact, 33, false);
        let ys = enc_share(&eng, 9.0, &mut rng);
        eng.sqrt(&ys, 2.0).unwrap();

        let short = TapeBudget {
            trunc_pairs: exact.trunc_pairs - 1,
            ..exact
        };
        let mut eng = Engine::new(N, codec, short, 33, false);
        let ys = enc_share(&eng, 9.0, &mut rng);
        match eng.sqrt(&ys, 2.0) {
            Err(Error::TapeExhausted { kind, .. }) => assert_eq!(kind, "truncation pair"),
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn masked_openings_stay_uniform_on_pathological_inputs() {
        let mut eng = engine(35);
        let mut rng = ChaCha20Rng::seed_from_u64(36);
        // Constant inputs: any structure in the openings would come from
        // the values, not the masks.
        let zeros = share(&vec![RingElement::ZERO; 64], N, &mut rng).unwrap();
        let maxed = share(&codec_max_vec(&eng, 64), N, &mut rng).unwrap();
        for _ in 0..40 {
            eng.mul(&zeros, &maxed).unwrap();
            eng.truncate(&maxed).unwrap();
        }
        for _ in 0..20 {
            let s = enc_share(&eng, 0.0, &mut rng);
            eng.compare_lt(&s, 0.0).unwrap();
        }
        let hist = eng.transcript().masked_histogram();
        let stat = crate::sim::audit::chi_square_stat(&hist);
        let crit = crate::sim::audit::chi_square_critical(255, 0.01);
        assert!(stat < crit, "masked openings skewed: {stat:.1}");
        // The opened decision bits are tagged as public, not masked.
        assert_eq!(eng.transcript().count(OpeningKind::PublicBit), 20);
    }

    fn codec_max_vec(eng: &Engine, d: usize) -> Vec<RingElement> {
        vec![eng.codec().encode(32767.0).unwrap(); d]
    }

    #[test]
    fn transcripts_are_deterministic_per_seed() {
        let run = |seed: u64| -> Vec<(u8, u64)> {
            let budget = TapeBudget {
                triples: 10_000,
                trunc_pairs: 10_000,
                edabits: 100,
            };
            let mut eng = Engine::new(N, FixedPointCodec::default(), budget, seed, true);
            let mut rng = ChaCha20Rng::seed_from_u64(99);
            let xs = enc_share(&eng, 3.25, &mut rng);
            let ys = enc_share(&eng, -1.5, &mut rng);
            eng.mul_trunc(&xs, &ys).unwrap();
            eng.compare_lt(&xs, 1.0).unwrap();
            eng.transcript().records().unwrap().to_vec()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }
}
