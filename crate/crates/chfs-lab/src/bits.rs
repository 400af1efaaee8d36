//! Bit strings: the index set of the oracle family.
//!
//! States in an oracle instance are indexed by finite bit strings `x`, and
//! keys and inputs are bit strings that get concatenated. Bit 0 is the
//! leftmost (most significant) position, matching the register convention
//! used for statevector indices throughout the crate.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::{mix64, LabRng};

/// An immutable finite string over {0, 1}.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<u8>);

impl BitString {
    /// Empty string.
    pub fn empty() -> Self {
        BitString(Vec::new())
    }

    /// From a slice of 0/1 bytes.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidBitString(format!("byte {b} is not a bit")));
        }
        Ok(BitString(bits.to_vec()))
    }

    /// Big-endian encoding of `value` in exactly `len` bits.
    pub fn from_value(value: u64, len: usize) -> Result<Self> {
        if len > 64 {
            return Err(Error::InvalidBitString(format!("{len} bits exceeds u64")));
        }
        if len < 64 && value >> len != 0 {
            return Err(Error::InvalidBitString(format!(
                "value {value} does not fit in {len} bits"
            )));
        }
        let bits = (0..len).map(|i| ((value >> (len - 1 - i)) & 1) as u8).collect();
        Ok(BitString(bits))
    }

    /// Uniformly random string of length `len`.
    pub fn random(len: usize, rng: &mut LabRng) -> Self {
        BitString((0..len).map(|_| if rng.coin(0.5) { 1 } else { 0 }).collect())
    }

    /// All strings of length `len`, in lexicographic (counter) order.
    ///
    /// Guarded to short lengths: enumeration is meant for key spaces.
    pub fn all_of_len(len: usize) -> Result<impl Iterator<Item = BitString>> {
        if len > 20 {
            return Err(Error::InvalidArgument(format!(
                "refusing to enumerate 2^{len} bit strings"
            )));
        }
        Ok((0..1u64 << len).map(move |v| BitString::from_value(v, len).expect("in range")))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn bit(&self, i: usize) -> u8 {
        self.0[i]
    }

    /// `self ‖ other`.
    pub fn concat(&self, other: &BitString) -> BitString {
        let mut bits = self.0.clone();
        bits.extend_from_slice(&other.0);
        BitString(bits)
    }

    /// Big-endian integer value. Requires `len ≤ 64`.
    pub fn value(&self) -> Result<u64> {
        if self.len() > 64 {
            return Err(Error::InvalidBitString("string longer than 64 bits".into()));
        }
        Ok(self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64))
    }

    /// Prefix of the first `n` bits.
    pub fn prefix(&self, n: usize) -> BitString {
        BitString(self.0[..n].to_vec())
    }

    /// Stable 64-bit digest of the string contents (length-aware), used for
    /// deterministic per-string seed derivation.
    pub fn digest64(&self) -> u64 {
        let mut h = mix64(0x6368_6673_5f6c_6162 ^ self.0.len() as u64);
        for chunk in self.0.chunks(64) {
            let word = chunk.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
            h = mix64(h ^ word);
        }
        h
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(Error::InvalidBitString(format!("character {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(BitString)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}
