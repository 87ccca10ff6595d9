//! Trusted-dealer preprocessing: Beaver triples, truncation pairs and
//! bit-decomposed comparison masks (edaBits).
//!
//! The dealer is simulated. Every party's tape is a deterministic view over
//! one counter-addressed ChaCha stream keyed by the dealer seed, so a whole
//! run's preprocessing is reproducible from a single seed and never has to
//! be materialized: item `j` of a kind is derived on demand from its index.
//! Budgets and consumption counters are enforced exactly (taking past the
//! budget is an error, never silent reuse), and disjoint index segments can
//! be split off a tape so independent protocol instances can consume
//! material concurrently without coordination.
//!
//! Correlations by construction: for a triple, `c = a * b`; for a truncation
//! pair, `r` is uniform over `[0, 2^62)` and `r' = r >> f`; for an edaBit,
//! `r` is uniform over the full ring and the 64 bit values recompose it.
//! Every per-party share stream is uniform.

use std::io::{Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::RingElement;

pub const EDABIT_BITS: usize = 64;

const TAPE_MAGIC: &[u8; 4] = b"SDLT";
const TAPE_VERSION: u32 = 1;

const STREAM_TRIPLES: u64 = 1;
const STREAM_TRUNC: u64 = 2;
const STREAM_EDABITS: u64 = 3;

/// One party's share of a batch of Beaver triples (structure of arrays).
#[derive(Clone, Debug)]
pub struct TripleShares {
    pub a: Vec<RingElement>,
    pub b: Vec<RingElement>,
    pub c: Vec<RingElement>,
}

/// One party's share of a batch of truncation pairs.
#[derive(Clone, Debug)]
pub struct TruncPairShares {
    pub r: Vec<RingElement>,
    pub r_shifted: Vec<RingElement>,
}

/// One party's share of a single edaBit: an arithmetic share of `r` plus
/// arithmetic shares of each of its 64 bits.
#[derive(Clone, Debug)]
pub struct EdaBitShares {
    pub r: RingElement,
    pub bits: Vec<RingElement>,
}

/// Preprocessing demand or capacity, counted per kind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapeBudget {
    pub triples: u64,
    pub trunc_pairs: u64,
    pub edabits: u64,
}

impl std::ops::Add for TapeBudget {
    type Output = TapeBudget;

    fn add(self, other: TapeBudget) -> TapeBudget {
        TapeBudget {
            triples: self.triples + other.triples,
            trunc_pairs: self.trunc_pairs + other.trunc_pairs,
            edabits: self.edabits + other.edabits,
        }
    }
}

impl TapeBudget {
    pub fn scale(self, k: u64) -> TapeBudget {
        TapeBudget {
            triples: self.triples * k,
            trunc_pairs: self.trunc_pairs * k,
            edabits: self.edabits * k,
        }
    }
}

fn dealer_seed(seed: u64) -> [u8; 32] {
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&seed.to_le_bytes());
    s[8..16].copy_from_slice(b"sdl-deal");
    s
}

fn triple_slots(n: usize) -> u128 {
    2 + 3 * (n as u128 - 1)
}

fn trunc_slots(n: usize) -> u128 {
    1 + 2 * (n as u128 - 1)
}

fn edabit_slots(n: usize) -> u128 {
    1 + (EDABIT_BITS as u128 + 1) * (n as u128 - 1)
}

/// Positioned stream over one kind, ready to derive items starting at
/// `index`.
fn stream_at(seed: &[u8; 32], stream: u64, slots_per_item: u128, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(*seed);
    rng.set_stream(stream);
    // Two 32-bit words per u64 draw.
    rng.set_word_pos(index as u128 * slots_per_item * 2);
    rng
}

/// Split `value` into `n` additive shares, appending share `i` to `out[i]`.
fn push_shares(
    value: RingElement,
    n: usize,
    rng: &mut ChaCha8Rng,
    mut sink: impl FnMut(usize, RingElement),
) {
    let mut last = value;
    for party in 0..n - 1 {
        let sh = RingElement::new(rng.next_u64());
        last -= sh;
        sink(party, sh);
    }
    sink(n - 1, last);
}

/// One party's deterministic view over the dealer's streams.
///
/// A tape owns the index range `[next, end)` per kind. [`DealerTape::split`]
/// carves a disjoint sub-range off the front for an independent protocol
/// instance.
#[derive(Clone, Debug)]
pub struct DealerTape {
    party_id: usize,
    n: usize,
    frac_bits: u32,
    seed: [u8; 32],
    next: TapeBudget,
    end: TapeBudget,
    taken: TapeBudget,
}

/// Create the full set of party tapes for a run.
///
/// `budget` must cover the whole run's demand; the caller computes it from
/// the per-operation cost functions rather than guessing.
pub fn generate_tapes(n: usize, budget: TapeBudget, seed: u64, frac_bits: u32) -> Vec<DealerTape> {
    let seed = dealer_seed(seed);
    (0..n)
        .map(|party_id| DealerTape {
            party_id,
            n,
            frac_bits,
            seed,
            next: TapeBudget::default(),
            end: budget,
            taken: TapeBudget::default(),
        })
        .collect()
}

impl DealerTape {
    pub fn party_id(&self) -> usize {
        self.party_id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Items consumed through this tape (not counting split-off segments).
    pub fn consumed(&self) -> TapeBudget {
        self.taken
    }

    /// Items still available in this tape's range.
    pub fn remaining(&self) -> TapeBudget {
        TapeBudget {
            triples: self.end.triples - self.next.triples,
            trunc_pairs: self.end.trunc_pairs - self.next.trunc_pairs,
            edabits: self.end.edabits - self.next.edabits,
        }
    }

    fn reserve(&mut self, kind: &'static str, next: u64, end: u64, count: u64) -> Result<u64> {
        if next + count > end {
            return Err(Error::TapeExhausted { kind, budget: end });
        }
        Ok(next)
    }

    fn reserve_triples(&mut self, count: u64) -> Result<u64> {
        let idx = self.reserve("beaver triple", self.next.triples, self.end.triples, count)?;
        self.next.triples += count;
        self.taken.triples += count;
        Ok(idx)
    }

    fn reserve_trunc(&mut self, count: u64) -> Result<u64> {
        let idx = self.reserve(
            "truncation pair",
            self.next.trunc_pairs,
            self.end.trunc_pairs,
            count,
        )?;
        self.next.trunc_pairs += count;
        self.taken.trunc_pairs += count;
        Ok(idx)
    }

    fn reserve_edabits(&mut self, count: u64) -> Result<u64> {
        let idx = self.reserve("edabit", self.next.edabits, self.end.edabits, count)?;
        self.next.edabits += count;
        self.taken.edabits += count;
        Ok(idx)
    }

    /// Carve a disjoint segment off the front of this tape.
    pub fn split(&mut self, slice: TapeBudget) -> Result<DealerTape> {
        let t = self.reserve_triples(slice.triples)?;
        let p = self.reserve_trunc(slice.trunc_pairs)?;
        let e = self.reserve_edabits(slice.edabits)?;
        // Splitting hands the items over; they are consumed by the segment.
        self.taken.triples -= slice.triples;
        self.taken.trunc_pairs -= slice.trunc_pairs;
        self.taken.edabits -= slice.edabits;
        Ok(DealerTape {
            party_id: self.party_id,
            n: self.n,
            frac_bits: self.frac_bits,
            seed: self.seed,
            next: TapeBudget {
                triples: t,
                trunc_pairs: p,
                edabits: e,
            },
            end: TapeBudget {
                triples: t + slice.triples,
                trunc_pairs: p + slice.trunc_pairs,
                edabits: e + slice.edabits,
            },
            taken: TapeBudget::default(),
        })
    }

    /// This party's next `count` triple shares.
    pub fn take_triples(&mut self, count: usize) -> Result<TripleShares> {
        let idx = self.reserve_triples(count as u64)?;
        Ok(
            derive_triples(&self.seed, self.n, idx, count, Some(self.party_id))
                .pop()
                .expect("single party requested"),
        )
    }

    /// This party's next truncation pair shares.
    pub fn take_trunc_pairs(&mut self, count: usize) -> Result<TruncPairShares> {
        let idx = self.reserve_trunc(count as u64)?;
        Ok(derive_trunc_pairs(
            &self.seed,
            self.n,
            self.frac_bits,
            idx,
            count,
            Some(self.party_id),
        )
        .pop()
        .expect("single party requested"))
    }

    /// This party's next edaBit shares.
    pub fn take_edabit(&mut self) -> Result<EdaBitShares> {
        let idx = self.reserve_edabits(1)?;
        Ok(
            derive_edabits(&self.seed, self.n, idx, 1, Some(self.party_id))
                .pop()
                .expect("single party requested")
                .pop()
                .expect("one item requested"),
        )
    }

    /// Dump the remaining items to a binary file for inspection:
    /// little-endian 64-bit words behind a `SDLT` header. Does not consume.
    pub fn dump(&self, w: &mut impl Write) -> Result<()> {
        let rem = self.remaining();
        w.write_all(TAPE_MAGIC)?;
        w.write_all(&TAPE_VERSION.to_le_bytes())?;
        w.write_all(&(self.party_id as u32).to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&self.frac_bits.to_le_bytes())?;
        for count in [rem.triples, rem.trunc_pairs, rem.edabits] {
            w.write_all(&count.to_le_bytes())?;
        }
        let me = Some(self.party_id);
        let t = derive_triples(
            &self.seed,
            self.n,
            self.next.triples,
            rem.triples as usize,
            me,
        )
        .pop()
        .unwrap();
        for i in 0..t.a.len() {
            for word in [t.a[i], t.b[i], t.c[i]] {
                w.write_all(&word.raw().to_le_bytes())?;
            }
        }
        let p = derive_trunc_pairs(
            &self.seed,
            self.n,
            self.frac_bits,
            self.next.trunc_pairs,
            rem.trunc_pairs as usize,
            me,
        )
        .pop()
        .unwrap();
        for i in 0..p.r.len() {
            for word in [p.r[i], p.r_shifted[i]] {
                w.write_all(&word.raw().to_le_bytes())?;
            }
        }
        let es = derive_edabits(
            &self.seed,
            self.n,
            self.next.edabits,
            rem.edabits as usize,
            me,
        )
        .pop()
        .unwrap();
        for e in &es {
            w.write_all(&e.r.raw().to_le_bytes())?;
            for &bit in &e.bits {
                w.write_all(&bit.raw().to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Parsed form of a tape dump.
#[derive(Debug)]
pub struct TapeDump {
    pub party_id: u32,
    pub n: u32,
    pub frac_bits: u32,
    pub triples: Vec<(RingElement, RingElement, RingElement)>,
    pub trunc_pairs: Vec<(RingElement, RingElement)>,
    pub edabits: Vec<(RingElement, Vec<RingElement>)>,
}

/// Parse a dump produced by [`DealerTape::dump`].
pub fn read_tape_dump(r: &mut impl Read) -> Result<TapeDump> {
    fn read_u32(r: &mut impl Read) -> Result<u32> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)
            .map_err(|_| Error::Parse("tape dump truncated".into()))?;
        Ok(u32::from_le_bytes(b))
    }
    fn read_u64(r: &mut impl Read) -> Result<u64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)
            .map_err(|_| Error::Parse("tape dump truncated".into()))?;
        Ok(u64::from_le_bytes(b))
    }
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Parse("tape dump truncated".into()))?;
    if &magic != TAPE_MAGIC {
        return Err(Error::Parse(format!("bad tape magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != TAPE_VERSION {
        return Err(Error::Parse(format!("unsupported tape version {version}")));
    }
    let party_id = read_u32(r)?;
    let n = read_u32(r)?;
    let frac_bits = read_u32(r)?;
    let n_triples = read_u64(r)?;
    let n_pairs = read_u64(r)?;
    let n_edabits = read_u64(r)?;
    let mut dump = TapeDump {
        party_id,
        n,
        frac_bits,
        triples: Vec::new(),
        trunc_pairs: Vec::new(),
        edabits: Vec::new(),
    };
    for _ in 0..n_triples {
        let a = RingElement::new(read_u64(r)?);
        let b = RingElement::new(read_u64(r)?);
        let c = RingElement::new(read_u64(r)?);
        dump.triples.push((a, b, c));
    }
    for _ in 0..n_pairs {
        let rr = RingElement::new(read_u64(r)?);
        let rs = RingElement::new(read_u64(r)?);
        dump.trunc_pairs.push((rr, rs));
    }
    for _ in 0..n_edabits {
        let rr = RingElement::new(read_u64(r)?);
        let mut bits = Vec::with_capacity(EDABIT_BITS);
        for _ in 0..EDABIT_BITS {
            bits.push(RingElement::new(read_u64(r)?));
        }
        dump.edabits.push((rr, bits));
    }
    Ok(dump)
}

/// Reserve `count` triples across all party tapes in lockstep and derive
/// each item once. `tapes` must be the full, aligned party set.
pub fn take_triples_all(tapes: &mut [DealerTape], count: usize) -> Result<Vec<TripleShares>> {
    let idx = align_reserve(tapes, |t| t.reserve_triples(count as u64))?;
    Ok(derive_triples(&tapes[0].seed, tapes[0].n, idx, count, None))
}

pub fn take_trunc_pairs_all(
    tapes: &mut [DealerTape],
    count: usize,
) -> Result<Vec<TruncPairShares>> {
    let idx = align_reserve(tapes, |t| t.reserve_trunc(count as u64))?;
    Ok(derive_trunc_pairs(
        &tapes[0].seed,
        tapes[0].n,
        tapes[0].frac_bits,
        idx,
        count,
        None,
    ))
}

pub fn take_edabit_all(tapes: &mut [DealerTape]) -> Result<Vec<EdaBitShares>> {
    let idx = align_reserve(tapes, |t| t.reserve_edabits(1))?;
    Ok(derive_edabits(&tapes[0].seed, tapes[0].n, idx, 1, None)
        .into_iter()
        .map(|mut v| v.pop().expect("one item requested"))
        .collect())
}

fn align_reserve(
    tapes: &mut [DealerTape],
    mut f: impl FnMut(&mut DealerTape) -> Result<u64>,
) -> Result<u64> {
    let first = f(&mut tapes[0])?;
    for t in &mut tapes[1..] {
        let idx = f(t)?;
        if idx != first {
            return Err(Error::Protocol(format!(
                "party tapes out of alignment: index {idx} vs {first}"
            )));
        }
    }
    Ok(first)
}

/// Derive triples `[index, index + count)`. Returns one [`TripleShares`]
/// per party, or a single entry when `only` selects one party.
fn derive_triples(
    seed: &[u8; 32],
    n: usize,
    index: u64,
    count: usize,
    only: Option<usize>,
) -> Vec<TripleShares> {
    let mut rng = stream_at(seed, STREAM_TRIPLES, triple_slots(n), index);
    let parties = if only.is_some() { 1 } else { n };
    let mut out: Vec<TripleShares> = (0..parties)
        .map(|_| TripleShares {
            a: Vec::with_capacity(count),
            b: Vec::with_capacity(count),
            c: Vec::with_capacity(count),
        })
        .collect();
    for _ in 0..count {
        let a = RingElement::new(rng.next_u64());
        let b = RingElement::new(rng.next_u64());
        let c = a * b;
        for (value, field) in [(a, 0usize), (b, 1), (c, 2)] {
            push_shares(value, n, &mut rng, |party, sh| {
                let slot = match only {
                    Some(p) if p != party => return,
                    Some(_) => &mut out[0],
                    None => &mut out[party],
                };
                match field {
                    0 => slot.a.push(sh),
                    1 => slot.b.push(sh),
                    _ => slot.c.push(sh),
                }
            });
        }
    }
    out
}

fn derive_trunc_pairs(
    seed: &[u8; 32],
    n: usize,
    frac_bits: u32,
    index: u64,
    count: usize,
    only: Option<usize>,
) -> Vec<TruncPairShares> {
    let mut rng = stream_at(seed, STREAM_TRUNC, trunc_slots(n), index);
    let parties = if only.is_some() { 1 } else { n };
    let mut out: Vec<TruncPairShares> = (0..parties)
        .map(|_| TruncPairShares {
            r: Vec::with_capacity(count),
            r_shifted: Vec::with_capacity(count),
        })
        .collect();
    for _ in 0..count {
        // Mask uniform over [0, 2^62) so the offset masked opening cannot
        // wrap; its low bits stay uniform.
        let r = rng.next_u64() >> 2;
        let r_shifted = r >> frac_bits;
        for (value, field) in [(r, 0usize), (r_shifted, 1)] {
            push_shares(RingElement::new(value), n, &mut rng, |party, sh| {
                let slot = match only {
                    Some(p) if p != party => return,
                    Some(_) => &mut out[0],
                    None => &mut out[party],
                };
                match field {
                    0 => slot.r.push(sh),
                    _ => slot.r_shifted.push(sh),
                }
            });
        }
    }
    out
}

fn derive_edabits(
    seed: &[u8; 32],
    n: usize,
    index: u64,
    count: usize,
    only: Option<usize>,
) -> Vec<Vec<EdaBitShares>> {
    let mut rng = stream_at(seed, STREAM_EDABITS, edabit_slots(n), index);
    let parties = if only.is_some() { 1 } else { n };
    let mut out: Vec<Vec<EdaBitShares>> = (0..parties).map(|_| Vec::with_capacity(count)).collect();
    for _ in 0..count {
        // The mask is uniform over the whole ring; its bit decomposition is
        // shared alongside it.
        let r = rng.next_u64();
        for slot in out.iter_mut() {
            slot.push(EdaBitShares {
                r: RingElement::ZERO,
                bits: Vec::with_capacity(EDABIT_BITS),
            });
        }
        push_shares(RingElement::new(r), n, &mut rng, |party, sh| match only {
            Some(p) if p != party => {}
            Some(_) => out[0].last_mut().unwrap().r = sh,
            None => out[party].last_mut().unwrap().r = sh,
        });
        for j in 0..EDABIT_BITS {
            let bit = RingElement::new((r >> j) & 1);
            push_shares(bit, n, &mut rng, |party, sh| match only {
                Some(p) if p != party => {}
                Some(_) => out[0].last_mut().unwrap().bits.push(sh),
                None => out[party].last_mut().unwrap().bits.push(sh),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum(parts: impl IntoIterator<Item = RingElement>) -> RingElement {
        let mut acc = RingElement::ZERO;
        for p in parts {
            acc += p;
        }
        acc
    }

    fn full_budget(k: u64) -> TapeBudget {
        TapeBudget {
            triples: k,
            trunc_pairs: k,
            edabits: k,
        }
    }

    #[test]
    fn triples_reconstruct_to_products() {
        let mut tapes = generate_tapes(4, full_budget(1000), 11, 16);
        let shares = take_triples_all(&mut tapes, 1000).unwrap();
        for i in 0..1000 {
            let a = sum(shares.iter().map(|s| s.a[i]));
            let b = sum(shares.iter().map(|s| s.b[i]));
            let c = sum(shares.iter().map(|s| s.c[i]));
            assert_eq!(a * b, c);
        }
    }

    #[test]
    fn trunc_pairs_satisfy_shift_relation() {
        let mut tapes = generate_tapes(3, full_budget(500), 12, 16);
        let shares = take_trunc_pairs_all(&mut tapes, 500).unwrap();
        for i in 0..500 {
            let r = sum(shares.iter().map(|s| s.r[i])).raw();
            let rs = sum(shares.iter().map(|s| s.r_shifted[i])).raw();
            assert!(r < 1u64 << 62);
            assert_eq!(rs, r >> 16);
        }
    }

    #[test]
    fn edabits_recompose_from_bits() {
        let mut tapes = generate_tapes(5, full_budget(200), 13, 16);
        for _ in 0..200 {
            let shares = take_edabit_all(&mut tapes).unwrap();
            let r = sum(shares.iter().map(|s| s.r));
            let mut recomposed = 0u64;
            for j in 0..EDABIT_BITS {
                let bit = sum(shares.iter().map(|s| s.bits[j])).raw();
                assert!(bit <= 1, "bit {j} reconstructed to {bit}");
                recomposed |= bit << j;
            }
            assert_eq!(recomposed, r.raw());
        }
    }

    #[test]
    fn derivation_is_deterministic_per_seed() {
        let mut t1 = generate_tapes(3, full_budget(50), 42, 16);
        let mut t2 = generate_tapes(3, full_budget(50), 42, 16);
        let a = take_triples_all(&mut t1, 50).unwrap();
        let b = take_triples_all(&mut t2, 50).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.a, y.a);
            assert_eq!(x.b, y.b);
            assert_eq!(x.c, y.c);
        }
        let mut t3 = generate_tapes(3, full_budget(50), 43, 16);
        let c = take_triples_all(&mut t3, 50).unwrap();
        assert_ne!(a[0].a, c[0].a);
    }

    #[test]
    fn per_party_take_matches_batched_take() {
        let mut batched = generate_tapes(3, full_budget(20), 7, 16);
        let mut solo = generate_tapes(3, full_budget(20), 7, 16);
        let all = take_triples_all(&mut batched, 20).unwrap();
        for (party, tape) in solo.iter_mut().enumerate() {
            let mine = tape.take_triples(20).unwrap();
            assert_eq!(mine.a, all[party].a);
            assert_eq!(mine.b, all[party].b);
            assert_eq!(mine.c, all[party].c);
        }
        let mut batched_e = generate_tapes(3, full_budget(20), 7, 16);
        let mut solo_e = generate_tapes(3, full_budget(20), 7, 16);
        let eda = take_edabit_all(&mut batched_e).unwrap();
        for (party, tape) in solo_e.iter_mut().enumerate() {
            let mine = tape.take_edabit().unwrap();
            assert_eq!(mine.r, eda[party].r);
            assert_eq!(mine.bits, eda[party].bits);
        }
    }

    #[test]
    fn exhaustion_is_an_error_naming_the_kind() {
        let mut tapes = generate_tapes(3, full_budget(5), 1, 16);
        take_triples_all(&mut tapes, 5).unwrap();
        let err = take_triples_all(&mut tapes, 1).unwrap_err();
        match err {
            Error::TapeExhausted { kind, budget } => {
                assert_eq!(kind, "beaver triple");
                assert_eq!(budget, 5);
            }
            other => panic!("unexpected error {other:?}"),
        }
        // Other kinds are still live.
        take_edabit_all(&mut tapes).unwrap();
    }

    #[test]
    fn split_segments_are_disjoint_and_fresh() {
        let mut parent = generate_tapes(3, full_budget(100), 9, 16);
        let slice = TapeBudget {
            triples: 30,
            trunc_pairs: 10,
            edabits: 2,
        };
        let mut seg_a: Vec<DealerTape> =
            parent.iter_mut().map(|t| t.split(slice).unwrap()).collect();
        let mut seg_b: Vec<DealerTape> =
            parent.iter_mut().map(|t| t.split(slice).unwrap()).collect();

        // The same indices enumerated directly.
        let mut reference = generate_tapes(3, full_budget(100), 9, 16);
        let all = take_triples_all(&mut reference, 60).unwrap();

        let a = take_triples_all(&mut seg_a, 30).unwrap();
        let b = take_triples_all(&mut seg_b, 30).unwrap();
        assert_eq!(a[0].a[..], all[0].a[..30]);
        assert_eq!(b[0].a[..], all[0].a[30..60]);

        // Parent continues after both segments.
        let rest = take_triples_all(&mut parent, 40).unwrap();
        let mut reference2 = generate_tapes(3, full_budget(100), 9, 16);
        take_triples_all(&mut reference2, 60).unwrap();
        let expect = take_triples_all(&mut reference2, 40).unwrap();
        assert_eq!(rest[0].a, expect[0].a);

        // Segments exhaust at their slice, not the parent budget.
        assert!(take_triples_all(&mut seg_a, 1).is_err());
    }

    #[test]
    fn consumption_counters_track_takes() {
        let mut tapes = generate_tapes(3, full_budget(50), 2, 16);
        take_triples_all(&mut tapes, 7).unwrap();
        take_trunc_pairs_all(&mut tapes, 3).unwrap();
        take_edabit_all(&mut tapes).unwrap();
        for t in &tapes {
            assert_eq!(t.consumed().triples, 7);
            assert_eq!(t.consumed().trunc_pairs, 3);
            assert_eq!(t.consumed().edabits, 1);
            assert_eq!(t.remaining().triples, 43);
        }
    }

    #[test]
    fn dump_round_trips_through_parser() {
        let mut tapes = generate_tapes(3, full_budget(4), 21, 16);
        // Consume one triple so the dump reflects remaining items only.
        take_triples_all(&mut tapes, 1).unwrap();
        let mut buf = Vec::new();
        tapes[1].dump(&mut buf).unwrap();
        let dump = read_tape_dump(&mut buf.as_slice()).unwrap();
        assert_eq!(dump.party_id, 1);
        assert_eq!(dump.n, 3);
        assert_eq!(dump.frac_bits, 16);
        assert_eq!(dump.triples.len(), 3);
        assert_eq!(dump.trunc_pairs.len(), 4);
        assert_eq!(dump.edabits.len(), 4);
        // Dumped words equal the shares the tape hands out next.
        let nxt = tapes[1].take_triples(1).unwrap();
        assert_eq!(dump.triples[0].0, nxt.a[0]);
        assert_eq!(dump.triples[0].1, nxt.b[0]);
        assert_eq!(dump.triples[0].2, nxt.c[0]);
    }

    #[test]
    fn dump_rejects_corrupt_headers() {
        let tapes = generate_tapes(2, full_budget(1), 5, 16);
        let mut buf = Vec::new();
        tapes[0].dump(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_tape_dump(&mut bad.as_slice()).is_err());
        let truncated = &buf[..buf.len() - 3];
        assert!(read_tape_dump(&mut &truncated[..]).is_err());
    }

    #[test]
    fn share_words_look_uniform() {
        let mut tapes = generate_tapes(3, full_budget(20_000), 31, 16);
        let shares = take_triples_all(&mut tapes, 20_000).unwrap();
        let mut counts = [0u64; 256];
        for s in &shares {
            for &e in s.a.iter().chain(&s.b).chain(&s.c) {
                counts[(e.raw() & 0xff) as usize] += 1;
            }
        }
        let stat = crate::sim::audit::chi_square_stat(&counts);
        let crit = crate::sim::audit::chi_square_critical(255, 0.01);
        assert!(stat < crit, "tape share bytes not uniform: {stat:.1}");
    }
}
