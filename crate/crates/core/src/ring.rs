//! Arithmetic over `Z_2^64` and the fixed-point encoding on top of it.
//!
//! Every secret in the protocol is an element of `Z_2^64`; all arithmetic
//! wraps. Reals are mapped onto the ring in two's complement with
//! `frac_bits` fractional bits, so a codec with `f` fractional and `k` value
//! bits represents `x` as `round(x * 2^f) mod 2^64` and keeps `64 - k` high
//! bits of statistical slack for masked openings. With the default
//! `f = 16, k = 32` the legal range is `|x| < 2^15` at a resolution of
//! `2^-16`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An element of `Z_2^64`. All arithmetic wraps.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RingElement(u64);

impl RingElement {
    pub const ZERO: RingElement = RingElement(0);

    pub fn new(raw: u64) -> Self {
        RingElement(raw)
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    /// Two's-complement reinterpretation of the residue.
    pub fn as_signed(self) -> i64 {
        self.0 as i64
    }

    pub fn from_signed(v: i64) -> Self {
        RingElement(v as u64)
    }

    /// Arithmetic shift right of the signed interpretation (floor division
    /// by `2^bits`).
    pub fn shift_right_signed(self, bits: u32) -> Self {
        RingElement((self.as_signed() >> bits) as u64)
    }

    pub fn wrapping_add(self, rhs: Self) -> Self {
        RingElement(self.0.wrapping_add(rhs.0))
    }

    pub fn wrapping_sub(self, rhs: Self) -> Self {
        RingElement(self.0.wrapping_sub(rhs.0))
    }

    pub fn wrapping_mul(self, rhs: Self) -> Self {
        RingElement(self.0.wrapping_mul(rhs.0))
    }

    pub fn wrapping_neg(self) -> Self {
        RingElement(self.0.wrapping_neg())
    }
}

impl Add for RingElement {
    type Output = RingElement;
    fn add(self, rhs: Self) -> Self {
        self.wrapping_add(rhs)
    }
}

impl AddAssign for RingElement {
    fn add_assign(&mut self, rhs: Self) {
        *self = self.wrapping_add(rhs);
    }
}

impl Sub for RingElement {
    type Output = RingElement;
    fn sub(self, rhs: Self) -> Self {
        self.wrapping_sub(rhs)
    }
}

impl SubAssign for RingElement {
    fn sub_assign(&mut self, rhs: Self) {
        *self = self.wrapping_sub(rhs);
    }
}

impl Mul for RingElement {
    type Output = RingElement;
    fn mul(self, rhs: Self) -> Self {
        self.wrapping_mul(rhs)
    }
}

impl Neg for RingElement {
    type Output = RingElement;
    fn neg(self) -> Self {
        self.wrapping_neg()
    }
}

impl fmt::Debug for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RingElement({:#018x})", self.0)
    }
}

/// Fixed-point layout: `value_bits` of signed payload, `frac_bits` of which
/// are fractional. The payload must leave at least two bits of headroom in
/// products (`value_bits + frac_bits <= 62`) so masked openings during
/// truncation cannot wrap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointCodec {
    pub frac_bits: u32,
    pub value_bits: u32,
}

impl Default for FixedPointCodec {
    fn default() -> Self {
        FixedPointCodec {
            frac_bits: 16,
            value_bits: 32,
        }
    }
}

impl FixedPointCodec {
    pub fn new(frac_bits: u32, value_bits: u32) -> Result<Self> {
        if frac_bits == 0 || value_bits <= frac_bits + 1 {
            return Err(Error::Config(format!(
                "fixed point needs 0 < frac_bits < value_bits - 1, got f={frac_bits} k={value_bits}"
            )));
        }
        if value_bits + frac_bits > 62 {
            return Err(Error::Config(format!(
                "fixed point needs value_bits + frac_bits <= 62 for safe truncation, got {}",
                value_bits + frac_bits
            )));
        }
        Ok(FixedPointCodec {
            frac_bits,
            value_bits,
        })
    }

    /// `2^frac_bits` as a float.
    pub fn frac_scale(self) -> f64 {
        (1u64 << self.frac_bits) as f64
    }

    /// Smallest representable step.
    pub fn ulp(self) -> f64 {
        1.0 / self.frac_scale()
    }

    /// Exclusive bound on representable magnitudes: `2^(k - f - 1)`.
    pub fn max_abs(self) -> f64 {
        (1u64 << (self.value_bits - self.frac_bits - 1)) as f64
    }

    /// `encode(1.0)`.
    pub fn one(self) -> RingElement {
        RingElement(1u64 << self.frac_bits)
    }

    /// Round half away from zero onto the grid, two's complement into the
    /// ring. Errors outside the legal range.
    pub fn encode(self, x: f64) -> Result<RingElement> {
        if !x.is_finite() || x.abs() >= self.max_abs() {
            return Err(Error::Range {
                value: x,
                max_abs: self.max_abs(),
            });
        }
        let scaled = (x * self.frac_scale()).round();
        Ok(RingElement(scaled as i64 as u64))
    }

    /// Inverse of [`encode`](Self::encode) for elements in the legal range
    /// (high bits are sign extension).
    pub fn decode(self, e: RingElement) -> f64 {
        e.as_signed() as f64 / self.frac_scale()
    }

    pub fn encode_slice(self, xs: &[f64]) -> Result<Vec<RingElement>> {
        xs.iter().map(|&x| self.encode(x)).collect()
    }

    pub fn decode_slice(self, es: &[RingElement]) -> Vec<f64> {
        es.iter().map(|&e| self.decode(e)).collect()
    }

    /// Decode an element carrying a double-scale (`2^2f`) payload, as
    /// produced by a product before truncation.
    pub fn decode_double_scale(self, e: RingElement) -> f64 {
        e.as_signed() as f64 / (self.frac_scale() * self.frac_scale())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn codec() -> FixedPointCodec {
        FixedPointCodec::default()
    }

    #[test]
    fn encode_known_values() {
        let c = codec();
        assert_eq!(c.encode(1.5).unwrap().raw(), 98304);
        assert_eq!(c.encode(0.0).unwrap().raw(), 0);
        // -1.0 in two's complement: 2^64 - 2^16.
        assert_eq!(c.encode(-1.0).unwrap().raw(), u64::MAX - 65535);
        assert_eq!(c.one().raw(), 65536);
    }

    #[test]
    fn decode_inverts_encode_on_grid() {
        let c = codec();
        for x in [1.5, 0.0, -1.0, 42.0, -3.25, 0.00390625] {
            assert_eq!(c.decode(c.encode(x).unwrap()), x);
        }
    }

    #[test]
    fn round_trip_error_is_half_ulp() {
        let c = codec();
        let x = std::f64::consts::PI;
        let rt = c.decode(c.encode(x).unwrap());
        assert!((rt - x).abs() <= c.ulp());
        assert!((rt - x).abs() <= c.ulp() / 2.0 + 1e-12);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        let c = codec();
        // 2.5 ulps rounds away from zero in both directions.
        let x = 2.5 * c.ulp();
        assert_eq!(c.encode(x).unwrap().raw(), 3);
        assert_eq!(c.encode(-x).unwrap().as_signed(), -3);
    }

    #[test]
    fn encode_rejects_out_of_range() {
        let c = codec();
        assert!(c.encode(32768.0).is_err());
        assert!(c.encode(-40000.0).is_err());
        assert!(c.encode(f64::NAN).is_err());
        assert!(c.encode(f64::INFINITY).is_err());
        // Just inside the bound is fine.
        assert!(c.encode(32767.9).is_ok());
    }

    #[test]
    fn add_wraps_at_ring_modulus() {
        let a = RingElement::new((1u64 << 63) - 1);
        let b = RingElement::new(2);
        assert_eq!((a + b).raw(), (1u64 << 63) + 1);
        let top = RingElement::new(u64::MAX);
        assert_eq!((top + RingElement::new(1)).raw(), 0);
    }

    #[test]
    fn sub_zero_minus_one_is_minus_one() {
        let c = codec();
        let z = RingElement::ZERO;
        let one = c.encode(1.0).unwrap();
        assert_eq!((z - one).raw(), c.encode(-1.0).unwrap().raw());
    }

    #[test]
    fn product_carries_double_scale() {
        let c = codec();
        let p = c.encode(2.0).unwrap() * c.encode(3.0).unwrap();
        assert_eq!(p.raw(), 6u64 << 32);
        assert_eq!(c.decode_double_scale(p), 6.0);
        // Negative operand: two's complement product still decodes right.
        let q = c.encode(-2.0).unwrap() * c.encode(3.0).unwrap();
        assert_eq!(c.decode_double_scale(q), -6.0);
    }

    #[test]
    fn signed_shift_floors_toward_negative_infinity() {
        let e = RingElement::from_signed(-5);
        assert_eq!(e.shift_right_signed(1).as_signed(), -3);
        let f = RingElement::from_signed(5);
        assert_eq!(f.shift_right_signed(1).as_signed(), 2);
    }

    #[test]
    fn ring_axioms_hold_on_random_triples() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let a = RingElement::new(rng.gen());
            let b = RingElement::new(rng.gen());
            let c = RingElement::new(rng.gen());
            assert_eq!((a + b) + c, a + (b + c));
            assert_eq!((a * b) * c, a * (b * c));
            assert_eq!(a * (b + c), a * b + a * c);
            assert_eq!(a + (-a), RingElement::ZERO);
            assert_eq!(a + b, b + a);
            assert_eq!(a * b, b * a);
        }
    }

    #[test]
    fn codec_rejects_bad_layouts() {
        assert!(FixedPointCodec::new(0, 32).is_err());
        assert!(FixedPointCodec::new(16, 16).is_err());
        assert!(FixedPointCodec::new(31, 32).is_err());
        assert!(FixedPointCodec::new(16, 47).is_err());
        assert!(FixedPointCodec::new(16, 32).is_ok());
    }

    proptest! {
        #[test]
        fn round_trip_within_half_ulp(x in -32767.0f64..32767.0) {
            let c = codec();
            let rt = c.decode(c.encode(x).unwrap());
            prop_assert!((rt - x).abs() <= c.ulp() / 2.0 + 1e-12);
        }

        #[test]
        fn encode_is_monotone(x in -32000.0f64..32000.0, gap in 0.001f64..100.0) {
            let c = codec();
            let a = c.encode(x).unwrap().as_signed();
            let b = c.encode((x + gap).min(32767.0)).unwrap().as_signed();
            prop_assert!(a <= b);
        }
    }
}
