//! Fixed-length bit masks over the prunable weight universe.

use std::fmt;

use crate::error::{Error, Result};

/// Packed bit vector; bit `j` = 1 keeps the j-th weight of the mask universe.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMask {
    words: Vec<u64>,
    len: usize,
}

impl BitMask {
    pub fn zeros(len: usize) -> Self {
        BitMask {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut m = BitMask {
            words: vec![u64::MAX; len.div_ceil(64)],
            len,
        };
        m.clear_tail();
        m
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut m = BitMask::zeros(bits.len());
        for (j, &b) in bits.iter().enumerate() {
            if b {
                m.set(j, true);
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        assert!(j < self.len, "bit index {j} out of range {}", self.len);
        (self.words[j / 64] >> (j % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, j: usize, value: bool) {
        assert!(j < self.len, "bit index {j} out of range {}", self.len);
        let bit = 1u64 << (j % 64);
        if value {
            self.words[j / 64] |= bit;
        } else {
            self.words[j / 64] &= !bit;
        }
    }

    #[inline]
    pub fn flip(&mut self, j: usize) {
        assert!(j < self.len, "bit index {j} out of range {}", self.len);
        self.words[j / 64] ^= 1u64 << (j % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn complement(&self) -> Self {
        let mut m = BitMask {
            words: self.words.iter().map(|w| !w).collect(),
            len: self.len,
        };
        m.clear_tail();
        m
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |j| self.get(j))
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn from_words(words: Vec<u64>, len: usize) -> Self {
        debug_assert_eq!(words.len(), len.div_ceil(64));
        let mut m = BitMask { words, len };
        m.clear_tail();
        m
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    /// Run-length encoding: `<first bit>:<run>,<run>,...`, runs alternate value.
    pub fn to_rle(&self) -> String {
        let mut out = String::new();
        let first = if self.len > 0 && !self.get(0) { '0' } else { '1' };
        out.push(first);
        out.push(':');
        let mut runs = Vec::new();
        let mut current = first == '1';
        let mut run = 0usize;
        for b in self.iter() {
            if b == current {
                run += 1;
            } else {
                runs.push(run.to_string());
                current = b;
                run = 1;
            }
        }
        if run > 0 {
            runs.push(run.to_string());
        }
        out.push_str(&runs.join(","));
        out
    }

    pub fn from_rle(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidSpec(format!("bad run-length mask: {msg}"));
        let (head, body) = s.trim().split_once(':').ok_or_else(|| bad("missing ':'"))?;
        let mut value = match head {
            "1" => true,
            "0" => false,
            _ => return Err(bad("first bit must be 0 or 1")),
        };
        let mut bits = Vec::new();
        if !body.is_empty() {
            for tok in body.split(',') {
                let run: usize = tok.parse().map_err(|_| bad("non-numeric run"))?;
                if run == 0 {
                    return Err(bad("zero-length run"));
                }
                bits.extend(std::iter::repeat_n(value, run));
                value = !value;
            }
        }
        Ok(BitMask::from_bools(&bits))
    }
}

impl fmt::Debug for BitMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitMask(len={}, ones={})", self.len, self.count_ones())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ones_and_complement() {
        let m = BitMask::ones(70);
        assert_eq!(m.count_ones(), 70);
        assert_eq!(m.complement().count_ones(), 0);
        assert_eq!(BitMask::zeros(70).complement(), m);
    }

    #[test]
    fn rle_examples() {
        let m = BitMask::from_bools(&[true, true, false, true]);
        assert_eq!(m.to_rle(), "1:2,1,1");
        let z = BitMask::from_bools(&[false, false]);
        assert_eq!(z.to_rle(), "0:2");
        assert_eq!(BitMask::zeros(0).to_rle(), "1:");
        assert!(BitMask::from_rle("1:0").is_err());
        assert!(BitMask::from_rle("x:3").is_err());
    }

    proptest! {
        #[test]
        fn rle_round_trip(bits in proptest::collection::vec(any::<bool>(), 0..300)) {
            let m = BitMask::from_bools(&bits);
            let back = BitMask::from_rle(&m.to_rle()).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(m.count_ones(), bits.iter().filter(|b| **b).count());
        }
    }
}
