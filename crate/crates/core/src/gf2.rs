//! Dense vectors and matrices over the two-element field.
//!
//! Addition is exclusive-or (`1 + 1 = 0`). Rows are packed into 64-bit limbs
//! with the *most significant bit first*: column `j` (0-based) of a row lives
//! in limb `j / 64` at bit `63 - (j % 64)`. A `w`-bit machine word maps to a
//! width-`w` vector so that the word's most significant bit becomes column 0.
//! That orientation is what makes right-multiplication by the recursion
//! matrices in [`crate::lagged`] agree with the integer twist; the engine's
//! convention test is the arbiter.

use crate::control::WordSource;
use crate::error::{Error, Result};

#[inline]
fn limbs_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

#[inline]
fn limb_bit(col: usize) -> (usize, u64) {
    (col / 64, 1u64 << (63 - (col % 64)))
}

/// A horizontal vector over the two-element field.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    width: usize,
    limbs: Vec<u64>,
}

impl BitVector {
    pub fn zeros(width: usize) -> Self {
        BitVector {
            width,
            limbs: vec![0; limbs_for(width)],
        }
    }

    /// Interprets the low `width` bits of `word` as a vector, MSB = column 0.
    pub fn from_word(word: u64, width: usize) -> Self {
        assert!(width >= 1 && width <= 64, "word width must be 1..=64");
        let masked = if width == 64 {
            word
        } else {
            word & ((1u64 << width) - 1)
        };
        BitVector {
            width,
            limbs: vec![masked << (64 - width)],
        }
    }

    /// Inverse of [`from_word`](Self::from_word); requires `width <= 64`.
    pub fn to_word(&self) -> u64 {
        assert!(self.width <= 64, "vector wider than a machine word");
        if self.width == 0 {
            0
        } else {
            self.limbs[0] >> (64 - self.width)
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, col: usize) -> bool {
        assert!(col < self.width);
        let (l, b) = limb_bit(col);
        self.limbs[l] & b != 0
    }

    pub fn set(&mut self, col: usize, value: bool) {
        assert!(col < self.width);
        let (l, b) = limb_bit(col);
        if value {
            self.limbs[l] |= b;
        } else {
            self.limbs[l] &= !b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|&l| l == 0)
    }

    pub fn xor_assign(&mut self, other: &BitVector) {
        assert_eq!(self.width, other.width, "vector width mismatch");
        for (a, b) in self.limbs.iter_mut().zip(&other.limbs) {
            *a ^= b;
        }
    }

    /// Row vector times matrix: `self` (width = `m.rows()`) against each row.
    pub fn mul(&self, m: &BitMatrix) -> Result<BitVector> {
        if self.width != m.rows {
            return Err(Error::Dimension {
                op: "vector-matrix product",
                lhs_rows: 1,
                lhs_cols: self.width,
                rhs_rows: m.rows,
                rhs_cols: m.cols,
            });
        }
        let mut acc = BitVector::zeros(m.cols);
        for (li, &limb) in self.limbs.iter().enumerate() {
            let mut rest = limb;
            while rest != 0 {
                let lz = rest.leading_zeros() as usize;
                let row = li * 64 + lz;
                m.xor_row_into(row, &mut acc.limbs);
                rest &= !(1u64 << (63 - lz));
            }
        }
        Ok(acc)
    }

    /// Iterator over set column indices, ascending.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.limbs.iter().enumerate().flat_map(|(li, &limb)| {
            std::iter::successors(
                if limb == 0 { None } else { Some(limb) },
                |&rest| {
                    let lz = rest.leading_zeros();
                    let next = rest & !(1u64 << (63 - lz));
                    if next == 0 {
                        None
                    } else {
                        Some(next)
                    }
                },
            )
            .map(move |rest| li * 64 + rest.leading_zeros() as usize)
        })
    }
}

impl std::fmt::Debug for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for j in 0..self.width {
            write!(f, "{}", u8::from(self.get(j)))?;
        }
        Ok(())
    }
}

/// A dense row-major matrix over the two-element field. Rectangular shapes
/// are allowed; constraint stacks grow well past one machine word per row.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    limbs_per_row: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let lpr = limbs_for(cols);
        BitMatrix {
            rows,
            cols,
            limbs_per_row: lpr,
            data: vec![0; rows * lpr],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = BitMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Matrix with a single nonzero entry.
    pub fn unit(rows: usize, cols: usize, r: usize, c: usize) -> Self {
        let mut m = BitMatrix::zeros(rows, cols);
        m.set(r, c, true);
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols, "index out of range");
        let (l, b) = limb_bit(c);
        self.data[r * self.limbs_per_row + l] & b != 0
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        assert!(r < self.rows && c < self.cols, "index out of range");
        let (l, b) = limb_bit(c);
        let limb = &mut self.data[r * self.limbs_per_row + l];
        if value {
            *limb |= b;
        } else {
            *limb &= !b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&l| l == 0)
    }

    pub fn row(&self, r: usize) -> BitVector {
        assert!(r < self.rows);
        BitVector {
            width: self.cols,
            limbs: self.row_limbs(r).to_vec(),
        }
    }

    pub fn set_row(&mut self, r: usize, v: &BitVector) {
        assert!(r < self.rows && v.width == self.cols, "row shape mismatch");
        let lpr = self.limbs_per_row;
        self.data[r * lpr..(r + 1) * lpr].copy_from_slice(&v.limbs);
    }

    fn row_limbs(&self, r: usize) -> &[u64] {
        &self.data[r * self.limbs_per_row..(r + 1) * self.limbs_per_row]
    }

    fn xor_row_into(&self, r: usize, acc: &mut [u64]) {
        for (a, b) in acc.iter_mut().zip(self.row_limbs(r)) {
            *a ^= b;
        }
    }

    /// Componentwise exclusive-or.
    pub fn try_add(&self, other: &BitMatrix) -> Result<BitMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension {
                op: "matrix sum",
                lhs_rows: self.rows,
                lhs_cols: self.cols,
                rhs_rows: other.rows,
                rhs_cols: other.cols,
            });
        }
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a ^= b;
        }
        Ok(out)
    }

    /// Exact product; fails on an inner-dimension mismatch.
    pub fn try_mul(&self, rhs: &BitMatrix) -> Result<BitMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension {
                op: "matrix product",
                lhs_rows: self.rows,
                lhs_cols: self.cols,
                rhs_rows: rhs.rows,
                rhs_cols: rhs.cols,
            });
        }
        let mut out = BitMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let (head, tail) = out.data.split_at_mut(r * out.limbs_per_row);
            let _ = head;
            let acc = &mut tail[..out.limbs_per_row];
            for (li, &limb) in self.row_limbs(r).iter().enumerate() {
                let mut rest = limb;
                while rest != 0 {
                    let lz = rest.leading_zeros() as usize;
                    rhs.xor_row_into(li * 64 + lz, acc);
                    rest &= !(1u64 << (63 - lz));
                }
            }
        }
        Ok(out)
    }

    /// `self^e` by square-and-multiply; `e = 0` gives the identity.
    pub fn try_pow(&self, mut e: u64) -> Result<BitMatrix> {
        if self.rows != self.cols {
            return Err(Error::NonSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut result = BitMatrix::identity(self.rows);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                result = result.try_mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.try_mul(&base)?;
            }
        }
        Ok(result)
    }

    /// Copies `block` into this matrix with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &BitMatrix) {
        assert!(
            r0 + block.rows <= self.rows && c0 + block.cols <= self.cols,
            "block out of range"
        );
        for r in 0..block.rows {
            let mut rest_row = block.row_limbs(r).to_vec();
            for (li, limb) in rest_row.drain(..).enumerate() {
                let mut rest = limb;
                while rest != 0 {
                    let lz = rest.leading_zeros() as usize;
                    self.set(r0 + r, c0 + li * 64 + lz, true);
                    rest &= !(1u64 << (63 - lz));
                }
            }
        }
    }

    /// Stacks `blocks` vertically; all must share a column count.
    pub fn vstack(blocks: &[&BitMatrix]) -> Result<BitMatrix> {
        let cols = blocks.first().map_or(0, |b| b.cols);
        if blocks.iter().any(|b| b.cols != cols) {
            return Err(Error::Dimension {
                op: "vertical stack",
                lhs_rows: 0,
                lhs_cols: cols,
                rhs_rows: 0,
                rhs_cols: blocks.iter().map(|b| b.cols).max().unwrap_or(0),
            });
        }
        let rows = blocks.iter().map(|b| b.rows).sum();
        let mut out = BitMatrix::zeros(rows, cols);
        let mut r0 = 0;
        for b in blocks {
            out.set_block(r0, 0, b);
            r0 += b.rows;
        }
        Ok(out)
    }

    /// Rank by Gaussian elimination with deterministic leftmost pivoting.
    pub fn rank(&self) -> usize {
        let mut work = self.data.clone();
        let lpr = self.limbs_per_row;
        let mut rank = 0;
        for col in 0..self.cols {
            let (l, b) = limb_bit(col);
            let pivot = (rank..self.rows).find(|&r| work[r * lpr + l] & b != 0);
            let Some(pivot) = pivot else { continue };
            if pivot != rank {
                for i in 0..lpr {
                    work.swap(rank * lpr + i, pivot * lpr + i);
                }
            }
            for r in 0..self.rows {
                if r != rank && work[r * lpr + l] & b != 0 {
                    for i in 0..lpr {
                        work[r * lpr + i] ^= work[rank * lpr + i];
                    }
                }
            }
            rank += 1;
            if rank == self.rows {
                break;
            }
        }
        rank
    }

    /// Basis of the left kernel `{ v : v * self = 0 }`. The basis has
    /// `rows - rank` elements and is deterministic (leftmost pivots).
    pub fn left_kernel_basis(&self) -> Vec<BitVector> {
        let lpr = self.limbs_per_row;
        let track_lpr = limbs_for(self.rows);
        let mut work = self.data.clone();
        let mut track = vec![0u64; self.rows * track_lpr];
        for r in 0..self.rows {
            let (l, b) = limb_bit(r);
            track[r * track_lpr + l] |= b;
        }
        let mut rank = 0;
        for col in 0..self.cols {
            let (l, b) = limb_bit(col);
            let pivot = (rank..self.rows).find(|&r| work[r * lpr + l] & b != 0);
            let Some(pivot) = pivot else { continue };
            if pivot != rank {
                for i in 0..lpr {
                    work.swap(rank * lpr + i, pivot * lpr + i);
                }
                for i in 0..track_lpr {
                    track.swap(rank * track_lpr + i, pivot * track_lpr + i);
                }
            }
            for r in 0..self.rows {
                if r != rank && work[r * lpr + l] & b != 0 {
                    for i in 0..lpr {
                        work[r * lpr + i] ^= work[rank * lpr + i];
                    }
                    for i in 0..track_lpr {
                        track[r * track_lpr + i] ^= track[rank * track_lpr + i];
                    }
                }
            }
            rank += 1;
            if rank == self.rows {
                break;
            }
        }
        (rank..self.rows)
            .map(|r| BitVector {
                width: self.rows,
                limbs: track[r * track_lpr..(r + 1) * track_lpr].to_vec(),
            })
            .collect()
    }

    /// Uniform sample from the left kernel: a random combination of the basis
    /// returned by [`left_kernel_basis`](Self::left_kernel_basis). The result
    /// satisfies `v * self = 0` exactly.
    pub fn sample_kernel<S: WordSource>(&self, entropy: &mut S) -> BitVector {
        let basis = self.left_kernel_basis();
        sample_combination(self.rows, &basis, entropy)
    }
}

/// Uniform combination of `basis` vectors (each kept with probability 1/2).
pub fn sample_combination<S: WordSource>(
    width: usize,
    basis: &[BitVector],
    entropy: &mut S,
) -> BitVector {
    let mut v = BitVector::zeros(width);
    let mut bits = 0u64;
    for (i, b) in basis.iter().enumerate() {
        if i % 64 == 0 {
            bits = entropy.next_u64();
        }
        if bits & 1 == 1 {
            v.xor_assign(b);
        }
        bits >>= 1;
    }
    v
}

impl std::ops::Add for &BitMatrix {
    type Output = BitMatrix;
    fn add(self, rhs: Self) -> BitMatrix {
        self.try_add(rhs).expect("matrix sum shape mismatch")
    }
}

impl std::ops::Mul for &BitMatrix {
    type Output = BitMatrix;
    fn mul(self, rhs: Self) -> BitMatrix {
        self.try_mul(rhs).expect("matrix product shape mismatch")
    }
}

impl std::fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            for c in 0..self.cols {
                write!(f, "{}", u8::from(self.get(r, c)))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
