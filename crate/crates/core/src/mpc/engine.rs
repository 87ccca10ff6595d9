//! Protocol engine: party tapes plus the transcript of opened values.
//!
//! The simulator executes all parties in one process, so the engine holds
//! every party's tape and operates on whole [`SharedVector`]s. The only
//! cross-party traffic in these protocols is opening a shared value; every
//! opened word is recorded in the transcript under a tag saying which
//! protocol step produced it. Masked openings are supposed to be uniform
//! ring elements no matter the inputs; the transcript keeps a low-byte
//! histogram per masked tag so an audit can test exactly that claim.
//! Comparison results and declared outputs are opened by design and are
//! tagged so the audit can exclude them.

use std::io::{Read, Write};

use crate::dealer::{self, DealerTape, TapeBudget};
use crate::error::{Error, Result};
use crate::ring::{FixedPointCodec, RingElement};
use crate::sharing::{reconstruct, SharedVector};

/// What a batch of opened words meant to the protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpeningKind {
    /// `x - a` from a Beaver multiplication.
    BeaverDelta,
    /// `y - b` from a Beaver multiplication.
    BeaverEpsilon,
    /// Offset masked value opened by the truncation protocol.
    TruncMask,
    /// Masked difference opened by the comparison protocol.
    CompareMask,
    /// A comparison result bit, public by design.
    PublicBit,
    /// A declared protocol output.
    Output,
}

const MASKED_KINDS: usize = 4;
const ALL_KINDS: usize = 6;

impl OpeningKind {
    pub fn tag(self) -> u8 {
        match self {
            OpeningKind::BeaverDelta => 0,
            OpeningKind::BeaverEpsilon => 1,
            OpeningKind::TruncMask => 2,
            OpeningKind::CompareMask => 3,
            OpeningKind::PublicBit => 4,
            OpeningKind::Output => 5,
        }
    }

    pub fn from_tag(tag: u8) -> Option<OpeningKind> {
        Some(match tag {
            0 => OpeningKind::BeaverDelta,
            1 => OpeningKind::BeaverEpsilon,
            2 => OpeningKind::TruncMask,
            3 => OpeningKind::CompareMask,
            4 => OpeningKind::PublicBit,
            5 => OpeningKind::Output,
            _ => return None,
        })
    }

    /// Whether words under this tag are supposed to look uniform.
    pub fn masked(self) -> bool {
        self.tag() < MASKED_KINDS as u8
    }

    pub fn label(self) -> &'static str {
        match self {
            OpeningKind::BeaverDelta => "beaver-delta",
            OpeningKind::BeaverEpsilon => "beaver-epsilon",
            OpeningKind::TruncMask => "trunc-mask",
            OpeningKind::CompareMask => "compare-mask",
            OpeningKind::PublicBit => "public-bit",
            OpeningKind::Output => "output",
        }
    }
}

const TRANSCRIPT_MAGIC: &[u8; 4] = b"SDTX";
const TRANSCRIPT_VERSION: u32 = 1;

/// Record of every opened word, by tag.
///
/// Always keeps per-tag counts and a 256-bucket low-byte histogram for the
/// masked tags (cheap enough for full-scale runs). Word-level recording for
/// file dumps is opt-in; at training scale it would be gigabytes.
#[derive(Clone, Debug)]
pub struct Transcript {
    counts: [u64; ALL_KINDS],
    hist: [[u64; 256]; MASKED_KINDS],
    full: Option<Vec<(u8, u64)>>,
}

impl Transcript {
    pub fn new(record_words: bool) -> Transcript {
        Transcript {
            counts: [0; ALL_KINDS],
            hist: [[0; 256]; MASKED_KINDS],
            full: if record_words { Some(Vec::new()) } else { None },
        }
    }

    /// Rebuild transcript statistics from dumped word records, so audits
    /// can run on files written by [`Transcript::dump`].
    pub fn from_records(records: &[(OpeningKind, u64)]) -> Transcript {
        let mut t = Transcript::new(false);
        for &(kind, word) in records {
            t.record(kind, RingElement::new(word));
        }
        t
    }

    fn record(&mut self, kind: OpeningKind, word: RingElement) {
        let tag = kind.tag() as usize;
        self.counts[tag] += 1;
        if kind.masked() {
            self.hist[tag][(word.raw() & 0xff) as usize] += 1;
        }
        if let Some(full) = &mut self.full {
            full.push((kind.tag(), word.raw()));
        }
    }

    pub fn count(&self, kind: OpeningKind) -> u64 {
        self.counts[kind.tag() as usize]
    }

    pub fn total_masked(&self) -> u64 {
        self.counts[..MASKED_KINDS].iter().sum()
    }

    /// Low-byte histogram summed over all masked tags.
    pub fn masked_histogram(&self) -> [u64; 256] {
        let mut out = [0u64; 256];
        for h in &self.hist {
            for (o, &c) in out.iter_mut().zip(h) {
                *o += c;
            }
        }
        out
    }

    pub fn kind_histogram(&self, kind: OpeningKind) -> Option<&[u64; 256]> {
        if kind.masked() {
            Some(&self.hist[kind.tag() as usize])
        } else {
            None
        }
    }

    /// Absorb a transcript produced by a forked engine. Word-level records
    /// append in call order, so merge children deterministically.
    pub fn merge(&mut self, other: Transcript) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        for (ha, hb) in self.hist.iter_mut().zip(other.hist) {
            for (a, b) in ha.iter_mut().zip(hb) {
                *a += b;
            }
        }
        match (&mut self.full, other.full) {
            (Some(dst), Some(src)) => dst.extend(src),
            (Some(_), None) => {}
            _ => {}
        }
    }

    pub fn records(&self) -> Option<&[(u8, u64)]> {
        self.full.as_deref()
    }

    /// Write the word-level records as a binary stream.
    pub fn dump(&self, w: &mut impl Write) -> Result<()> {
        let full = self.full.as_ref().ok_or_else(|| {
            Error::Config("transcript word recording was not enabled for this run".into())
        })?;
        w.write_all(TRANSCRIPT_MAGIC)?;
        w.write_all(&TRANSCRIPT_VERSION.to_le_bytes())?;
        w.write_all(&(full.len() as u64).to_le_bytes())?;
        for &(tag, word) in full {
            w.write_all(&[tag])?;
            w.write_all(&word.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Parse a transcript dump back into tagged words.
pub fn read_transcript_dump(r: &mut impl Read) -> Result<Vec<(OpeningKind, u64)>> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head)
        .map_err(|_| Error::Parse("transcript truncated".into()))?;
    if &head[..4] != TRANSCRIPT_MAGIC {
        return Err(Error::Parse("bad transcript magic".into()));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != TRANSCRIPT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported transcript version {version}"
        )));
    }
    let count = u64::from_le_bytes(head[8..16].try_into().unwrap());
    let mut out = Vec::with_capacity(count.min(1 << 24) as usize);
    for _ in 0..count {
        let mut rec = [0u8; 9];
        r.read_exact(&mut rec)
            .map_err(|_| Error::Parse("transcript truncated".into()))?;
        let kind = OpeningKind::from_tag(rec[0])
            .ok_or_else(|| Error::Parse(format!("unknown opening tag {}", rec[0])))?;
        out.push((kind, u64::from_le_bytes(rec[1..9].try_into().unwrap())));
    }
    Ok(out)
}

/// All-party protocol engine.
pub struct Engine {
    codec: FixedPointCodec,
    tapes: Vec<DealerTape>,
    transcript: Transcript,
}

impl Engine {
    /// Fresh engine with dealer tapes covering `budget`.
    pub fn new(
        n: usize,
        codec: FixedPointCodec,
        budget: TapeBudget,
        seed: u64,
        record_words: bool,
    ) -> Engine {
        Engine {
            codec,
            tapes: dealer::generate_tapes(n, budget, seed, codec.frac_bits),
            transcript: Transcript::new(record_words),
        }
    }

    pub fn n(&self) -> usize {
        self.tapes.len()
    }

    pub fn codec(&self) -> FixedPointCodec {
        self.codec
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    /// Preprocessing consumed so far (identical across parties).
    pub fn consumed(&self) -> TapeBudget {
        self.tapes[0].consumed()
    }

    /// Split off an engine owning a disjoint tape segment, so independent
    /// protocol instances can run concurrently and still be deterministic.
    /// The child starts with an empty transcript; merge it back with
    /// [`Engine::absorb`].
    pub fn fork(&mut self, slice: TapeBudget) -> Result<Engine> {
        let tapes = self
            .tapes
            .iter_mut()
            .map(|t| t.split(slice))
            .collect::<Result<Vec<_>>>()?;
        Ok(Engine {
            codec: self.codec,
            tapes,
            transcript: Transcript::new(self.transcript.full.is_some()),
        })
    }

    /// Merge a forked engine's transcript back into this one.
    pub fn absorb(&mut self, child: Engine) {
        self.transcript.merge(child.transcript);
    }

    pub(crate) fn tapes_mut(&mut self) -> &mut [DealerTape] {
        &mut self.tapes
    }

    /// Open a shared vector: reconstruct it and record every word under
    /// `kind`.
    pub fn open(&mut self, kind: OpeningKind, x: &SharedVector) -> Result<Vec<RingElement>> {
        if x.n() != self.n() {
            return Err(Error::ShareMismatch(format!(
                "opened value has {} parties, engine has {}",
                x.n(),
                self.n()
            )));
        }
        let words = reconstruct(x);
        for &w in &words {
            self.transcript.record(kind, w);
        }
        Ok(words)
    }

    /// Open a declared output.
    pub fn open_output(&mut self, x: &SharedVector) -> Result<Vec<RingElement>> {
        self.open(OpeningKind::Output, x)
    }
}
