//! Privacy amplification: GF(2) Toeplitz two-universal hashing over bit
//! strings and the trace-distance bound for the hashed output.
//!
//! Bit order is little-endian within words and within serialized bytes: bit i
//! lives at `words[i/64] >> (i%64)` and byte i/8 bit i%8 on disk.

use rand::Rng;

use crate::entmath::DString;
use crate::error::{Error, Result};
use crate::exec;

/// A packed bit vector, LSB-first within each 64-bit word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitVector {
    words: Vec<u64>,
    len: usize,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                v.set(i, true);
            }
        }
        v
    }

    pub fn random(len: usize, rng: &mut impl Rng) -> Self {
        let mut words: Vec<u64> = (0..len.div_ceil(64)).map(|_| rng.random()).collect();
        mask_tail(&mut words, len);
        Self { words, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        if value {
            self.words[i / 64] |= 1u64 << (i % 64);
        } else {
            self.words[i / 64] &= !(1u64 << (i % 64));
        }
    }

    pub fn xor(&self, other: &BitVector) -> Result<BitVector> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                got: other.len,
            });
        }
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(Self {
            words,
            len: self.len,
        })
    }

    /// Serializes LSB-first within each byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len.div_ceil(8)];
        for (i, byte) in out.iter_mut().enumerate() {
            let word = self.words[i / 8];
            *byte = (word >> ((i % 8) * 8)) as u8;
        }
        out
    }

    pub fn to_hex(&self) -> String {
        self.to_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Bit i of the value formed by `u64::from(self)`-style packing.
    fn word(&self, w: usize) -> u64 {
        self.words.get(w).copied().unwrap_or(0)
    }
}

fn mask_tail(words: &mut [u64], len: usize) {
    let tail = len % 64;
    if tail != 0 {
        if let Some(last) = words.last_mut() {
            *last &= (1u64 << tail) - 1;
        }
    }
}

/// Seed of the Toeplitz family: `n_in + ell - 1` bits define the whole
/// diagonal-constant matrix `T[j][k] = bits[j - k + n_in - 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzSeed {
    bits: BitVector,
    n_in: usize,
    ell: usize,
}

impl ToeplitzSeed {
    pub fn new(bits: BitVector, n_in: usize, ell: usize) -> Result<Self> {
        if ell == 0 {
            return Err(Error::Domain("output length ell must be >= 1".into()));
        }
        if n_in < ell {
            return Err(Error::Domain(format!(
                "input length {n_in} must be >= output length {ell}"
            )));
        }
        let want = n_in + ell - 1;
        if bits.len() != want {
            return Err(Error::LengthMismatch {
                expected: want,
                got: bits.len(),
            });
        }
        Ok(Self { bits, n_in, ell })
    }

    pub fn random(n_in: usize, ell: usize, rng: &mut impl Rng) -> Result<Self> {
        if ell == 0 || n_in < ell {
            return Err(Error::Domain(format!(
                "need 1 <= ell <= n_in (got ell={ell}, n_in={n_in})"
            )));
        }
        Ok(Self {
            bits: BitVector::random(n_in + ell - 1, rng),
            n_in,
            ell,
        })
    }

    /// Builds the seed from an integer, LSB = bit 0; handy for exhaustive
    /// enumeration in tests.
    pub fn from_index(index: u64, n_in: usize, ell: usize) -> Result<Self> {
        let len = n_in + ell - 1;
        if len > 64 {
            return Err(Error::Domain(format!("seed of {len} bits exceeds u64")));
        }
        let mut bits = BitVector::zeros(len);
        for i in 0..len {
            bits.set(i, (index >> i) & 1 == 1);
        }
        Self::new(bits, n_in, ell)
    }

    pub fn bits(&self) -> &BitVector {
        &self.bits
    }

    pub fn input_len(&self) -> usize {
        self.n_in
    }

    pub fn output_len(&self) -> usize {
        self.ell
    }
}

/// Toeplitz hash over GF(2): `out_j = XOR_k T[j][k] input_k` with
/// `T[j][k] = seed[j - k + n_in - 1]`.
///
/// Output bit j is the parity of `(seed >> j) AND reverse(input)` over the
/// first n_in bits, which the word loop below computes 64 bits at a time.
pub fn toeplitz_hash(input: &BitVector, seed: &ToeplitzSeed) -> Result<BitVector> {
    if input.len() != seed.n_in {
        return Err(Error::LengthMismatch {
            expected: seed.n_in,
            got: input.len(),
        });
    }
    let n_in = seed.n_in;
    // reversed input: rev[i] = input[n_in - 1 - i]
    let mut rev = BitVector::zeros(n_in);
    for i in 0..n_in {
        if input.get(n_in - 1 - i) {
            rev.set(i, true);
        }
    }
    let rev_words = rev.words.clone();
    let n_words = n_in.div_ceil(64);
    let one_bit = |j: usize| -> u8 {
        let shift = j % 64;
        let base = j / 64;
        let mut acc = 0u64;
        for (w, &rw) in rev_words.iter().enumerate().take(n_words) {
            let mut window = seed.bits.word(base + w) >> shift;
            if shift != 0 {
                window |= seed.bits.word(base + w + 1) << (64 - shift);
            }
            acc ^= window & rw;
        }
        // the tail of rev_words is already zero-masked
        (acc.count_ones() & 1) as u8
    };
    // fork-join overhead dwarfs small hashes; only fan out big ones
    let bits: Vec<u8> = if seed.ell * n_words >= (1 << 14) {
        let out_indices: Vec<usize> = (0..seed.ell).collect();
        exec::map_collect(&out_indices, |&j| one_bit(j))
    } else {
        (0..seed.ell).map(one_bit).collect()
    };
    Ok(BitVector::from_bits(&bits))
}

/// Trace-distance bound after hashing down to `ell` bits from a state with
/// (smooth) min-entropy at least `h_min`:
/// `min(1, 2^(-(h_min - ell)/2) + 2 epsilon)`.
pub fn pa_distance_bound(h_min: f64, ell: u64, epsilon: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("epsilon {epsilon} outside [0, 1)")));
    }
    if !h_min.is_finite() {
        return Err(Error::Domain(format!("h_min {h_min} must be finite")));
    }
    let raw = (2.0f64).powf(-(h_min - ell as f64) / 2.0) + 2.0 * epsilon;
    Ok(raw.min(1.0))
}

/// Fixed-width big-endian encoding of a symbol string: ceil(log2 d) bits per
/// symbol, most significant bit first.
pub fn encode_symbols(raw: &DString) -> BitVector {
    let d = raw.alphabet_size();
    let width = symbol_width(d);
    let mut bits = BitVector::zeros(raw.len() * width);
    for (s, &sym) in raw.symbols().iter().enumerate() {
        for b in 0..width {
            if (sym >> (width - 1 - b)) & 1 == 1 {
                bits.set(s * width + b, true);
            }
        }
    }
    bits
}

/// Bits per symbol in the fixed-width encoding.
pub fn symbol_width(d: u32) -> usize {
    (32 - (d - 1).leading_zeros()).max(1) as usize
}

/// Result of one extraction: the hashed output and the seed that produced it.
#[derive(Debug, Clone)]
pub struct Extracted {
    pub bits: BitVector,
    pub seed: ToeplitzSeed,
}

/// Draws a fresh uniform seed and hashes the encoded symbol string down to
/// `ell` bits. `ell = 0` returns an empty output and no seed consumption
/// beyond the RNG draw is attempted.
pub fn extract(raw: &DString, ell: usize, rng: &mut impl Rng) -> Result<Extracted> {
    let capacity = raw.len() as f64 * (raw.alphabet_size() as f64).log2();
    if ell as f64 > capacity {
        return Err(Error::Domain(format!(
            "cannot extract {ell} bits from {:.1} bits of register",
            capacity
        )));
    }
    if ell == 0 {
        return Ok(Extracted {
            bits: BitVector::zeros(0),
            seed: ToeplitzSeed {
                bits: BitVector::zeros(0),
                n_in: 0,
                ell: 0,
            },
        });
    }
    let encoded = encode_symbols(raw);
    let seed = ToeplitzSeed::random(encoded.len(), ell, rng)?;
    let bits = toeplitz_hash(&encoded, &seed)?;
    Ok(Extracted { bits, seed })
}
