//! Parameterized Mersenne Twister engine covering MT19937 and MT19937-64.
//!
//! The engine exposes the raw (untempered) state-word sequence `x_0, x_1, ...`
//! as the primary analysis stream; tempered output is the standard pointwise
//! bijection on top of it. Seeding reproduces the reference initializer, so
//! the first word returned after seeding is `x_n` of that sequence.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Shift/mask quadruple of the output tempering transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemperParams {
    pub u: u32,
    pub d: u64,
    pub s: u32,
    pub b: u64,
    pub t: u32,
    pub c: u64,
    pub l: u32,
}

/// Descriptor of one member of the MT family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub id: String,
    /// Word size in bits (at most 64).
    pub w: u32,
    /// State length in words.
    pub n: usize,
    /// Middle offset of the recursion.
    pub m: usize,
    /// Split position: the low `r` bits of a word come from its successor.
    pub r: u32,
    /// Feedback word; its top bit must be set.
    pub a: u64,
    pub temper: TemperParams,
    /// Multiplier of the seed-expansion recurrence.
    pub init_mult: u64,
}

impl GeneratorParams {
    /// The classic 32-bit generator: (w, n, m, r) = (32, 624, 397, 31).
    pub fn mt19937() -> Self {
        GeneratorParams {
            id: "mt32".to_owned(),
            w: 32,
            n: 624,
            m: 397,
            r: 31,
            a: 0x9908_b0df,
            temper: TemperParams {
                u: 11,
                d: 0xffff_ffff,
                s: 7,
                b: 0x9d2c_5680,
                t: 15,
                c: 0xefc6_0000,
                l: 18,
            },
            init_mult: 1_812_433_253,
        }
    }

    /// The 64-bit variant: (w, n, m, r) = (64, 312, 156, 31), so the word
    /// split is 33/31 instead of 1/31.
    pub fn mt19937_64() -> Self {
        GeneratorParams {
            id: "mt64".to_owned(),
            w: 64,
            n: 312,
            m: 156,
            r: 31,
            a: 0xb502_6f5a_a966_19e9,
            temper: TemperParams {
                u: 29,
                d: 0x5555_5555_5555_5555,
                s: 17,
                b: 0x71d6_7fff_eda6_0000,
                t: 37,
                c: 0xfff7_eee0_0000_0000,
                l: 43,
            },
            init_mult: 6_364_136_223_846_793_005,
        }
    }

    /// Arbitrary parameters, mainly for small-word test configurations.
    pub fn custom(
        id: &str,
        w: u32,
        n: usize,
        m: usize,
        r: u32,
        a: u64,
        temper: TemperParams,
        init_mult: u64,
    ) -> Result<Self> {
        let p = GeneratorParams {
            id: id.to_owned(),
            w,
            n,
            m,
            r,
            a,
            temper,
            init_mult,
        };
        if !(1..=64).contains(&w) {
            return Err(Error::BadParams(format!("word size {w} not in 1..=64")));
        }
        if r >= w {
            return Err(Error::BadParams(format!("split {r} must be below {w}")));
        }
        if m == 0 || m >= n {
            return Err(Error::BadParams(format!("offset {m} must be in 1..{n}")));
        }
        if a & !p.word_mask() != 0 {
            return Err(Error::BadParams("feedback word wider than w".into()));
        }
        if a >> (w - 1) != 1 {
            return Err(Error::BadParams("feedback word must have its top bit set".into()));
        }
        Ok(p)
    }

    #[inline]
    pub fn word_mask(&self) -> u64 {
        if self.w == 64 {
            u64::MAX
        } else {
            (1u64 << self.w) - 1
        }
    }

    /// Mask of the high `w - r` bits taken from the current word.
    #[inline]
    pub fn upper_mask(&self) -> u64 {
        self.word_mask() & !self.lower_mask()
    }

    /// Mask of the low `r` bits taken from the succeeding word.
    #[inline]
    pub fn lower_mask(&self) -> u64 {
        (1u64 << self.r) - 1
    }

    /// The feedback step: combines the split word pair and twists it, giving
    /// `x_{k+n} ^ x_{k+m}`.
    #[inline]
    pub fn twist(&self, curr: u64, next: u64) -> u64 {
        let y = (curr & self.upper_mask()) | (next & self.lower_mask());
        (y >> 1) ^ if y & 1 == 1 { self.a } else { 0 }
    }

    pub fn temper(&self, x: u64) -> u64 {
        let mask = self.word_mask();
        let t = &self.temper;
        let mut y = x & mask;
        y ^= (y >> t.u) & t.d;
        y ^= (y << t.s) & t.b & mask;
        y ^= (y << t.t) & t.c & mask;
        y ^= y >> t.l;
        y & mask
    }

    /// Exact inverse of [`temper`](Self::temper).
    pub fn untemper(&self, y: u64) -> u64 {
        let mask = self.word_mask();
        let t = &self.temper;
        let mut x = y & mask;
        x = invert_xor_rshift(x, t.l, mask, self.w);
        x = invert_xor_lshift(x, t.t, t.c & mask, mask, self.w);
        x = invert_xor_lshift(x, t.s, t.b & mask, mask, self.w);
        x = invert_xor_rshift_masked(x, t.u, t.d & mask, self.w);
        x & mask
    }
}

fn invert_xor_rshift(y: u64, shift: u32, mask: u64, w: u32) -> u64 {
    // x = y ^ (x >> shift); top `shift` bits of x equal those of y, iterate down
    let mut x = y;
    for _ in 0..w.div_ceil(shift) {
        x = y ^ (x >> shift);
    }
    x & mask
}

fn invert_xor_rshift_masked(y: u64, shift: u32, m: u64, w: u32) -> u64 {
    let mut x = y;
    for _ in 0..w.div_ceil(shift) {
        x = y ^ ((x >> shift) & m);
    }
    x
}

fn invert_xor_lshift(y: u64, shift: u32, m: u64, mask: u64, w: u32) -> u64 {
    let mut x = y;
    for _ in 0..w.div_ceil(shift) {
        x = y ^ ((x << shift) & m & mask);
    }
    x & mask
}

/// A runnable state: `n` words of the x-sequence plus a cursor. `words[i]`
/// holds `x_{origin + i}`; the next emitted word is `x_{origin + cursor}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorState {
    params: GeneratorParams,
    words: Vec<u64>,
    cursor: usize,
    origin: u64,
}

impl GeneratorState {
    /// Standard multiplier-recurrence initialization. Matches the reference
    /// implementation: the first output is the tempered `x_n`.
    pub fn seed_init(params: GeneratorParams, seed: u64) -> Self {
        let mask = params.word_mask();
        let mut words = vec![0u64; params.n];
        words[0] = seed & mask;
        for i in 1..params.n {
            let prev = words[i - 1];
            words[i] = params
                .init_mult
                .wrapping_mul(prev ^ (prev >> (params.w - 2)))
                .wrapping_add(i as u64)
                & mask;
        }
        let cursor = params.n;
        GeneratorState {
            params,
            words,
            cursor,
            origin: 0,
        }
    }

    /// Builds a state directly from `n` words `x_0 .. x_{n-1}`; emission
    /// starts at `x_0`.
    pub fn from_words(params: GeneratorParams, words: Vec<u64>) -> Result<Self> {
        if words.len() != params.n {
            return Err(Error::StateLength {
                expected: params.n,
                got: words.len(),
            });
        }
        let mask = params.word_mask();
        let words = words.into_iter().map(|x| x & mask).collect();
        Ok(GeneratorState {
            params,
            words,
            cursor: 0,
            origin: 0,
        })
    }

    pub fn params(&self) -> &GeneratorParams {
        &self.params
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Absolute index of the next word [`next_untempered`](Self::next_untempered)
    /// will return.
    pub fn next_index(&self) -> u64 {
        self.origin + self.cursor as u64
    }

    fn twist_block(&mut self) {
        let n = self.params.n;
        let m = self.params.m;
        for i in 0..n {
            let fb = self.params.twist(self.words[i], self.words[(i + 1) % n]);
            self.words[i] = self.words[(i + m) % n] ^ fb;
        }
        self.origin += n as u64;
        self.cursor = 0;
    }

    /// Returns `x_{origin + cursor}` and advances the cursor, twisting in a
    /// whole block of `n` words when the current one is exhausted.
    #[inline]
    pub fn next_untempered(&mut self) -> u64 {
        if self.cursor == self.params.n {
            self.twist_block();
        }
        let x = self.words[self.cursor];
        self.cursor += 1;
        x
    }

    #[inline]
    pub fn next_tempered(&mut self) -> u64 {
        let x = self.next_untempered();
        self.params.temper(x)
    }

    /// Overwrites `values.len()` consecutive state words starting at
    /// `position`. The window must lie strictly inside the state array
    /// (`position >= 1`), so every planted word is a full-word entry of the
    /// recursion; word 0's low bits never feed it.
    pub fn plant_window(&mut self, position: usize, values: &[u64]) -> Result<()> {
        let n = self.params.n;
        if position == 0 || position + values.len() > n {
            return Err(Error::PlantRange {
                position,
                len: values.len(),
                n,
            });
        }
        let mask = self.params.word_mask();
        for (i, &v) in values.iter().enumerate() {
            self.words[position + i] = v & mask;
        }
        Ok(())
    }
}
