//! Row-major binary masks backed by a packed bitset.

use std::fmt;

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

/// Per-frame boolean pixel grid for one object class.
///
/// Bits are stored row-major (`index = y * width + x`) in 64-bit words. Bits
/// past `width * height` in the final word are always zero, which keeps
/// equality and popcounts exact.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    words: Vec<u64>,
}

impl BinaryMask {
    /// An all-background mask.
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMask(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        let n = width as usize * height as usize;
        Ok(Self {
            width,
            height,
            words: vec![0; n.div_ceil(WORD_BITS)],
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Result<Self> {
        let mut mask = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    mask.set_unchecked(mask.offset(x, y), true);
                }
            }
        }
        Ok(mask)
    }

    /// Builds a mask from a row-major slice; `bits.len()` must equal `width * height`.
    pub fn from_bools(width: u32, height: u32, bits: &[bool]) -> Result<Self> {
        let mut mask = Self::new(width, height)?;
        if bits.len() != mask.pixel_count() {
            return Err(Error::InvalidMask(format!(
                "expected {} bits for {width}x{height}, got {}",
                mask.pixel_count(),
                bits.len()
            )));
        }
        for (i, &b) in bits.iter().enumerate() {
            if b {
                mask.set_unchecked(i, true);
            }
        }
        Ok(mask)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Total number of pixels, foreground or not.
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// True when no pixel belongs to the object.
    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        assert!(
            x < self.width && y < self.height,
            "pixel ({x},{y}) out of bounds"
        );
        let i = self.offset(x, y);
        self.words[i / WORD_BITS] >> (i % WORD_BITS) & 1 == 1
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        assert!(
            x < self.width && y < self.height,
            "pixel ({x},{y}) out of bounds"
        );
        let i = self.offset(x, y);
        self.set_unchecked(i, value);
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.pixel_count())
            .map(|i| self.words[i / WORD_BITS] >> (i % WORD_BITS) & 1 == 1)
            .collect()
    }

    /// Coordinates of every foreground pixel, row-major.
    pub fn ones(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let i = wi * WORD_BITS + tz;
                Some(((i % w) as u32, (i / w) as u32))
            })
        })
    }

    pub fn ensure_same_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            });
        }
        Ok(())
    }

    /// `|self ∩ other|`
    pub fn intersection_count(&self, other: &BinaryMask) -> Result<usize> {
        self.ensure_same_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    /// `|self ∪ other|`
    pub fn union_count(&self, other: &BinaryMask) -> Result<usize> {
        self.ensure_same_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum())
    }

    /// Inclusive bounding box `(min_x, min_y, max_x, max_y)` of the foreground.
    pub fn bounding_box(&self) -> Option<(u32, u32, u32, u32)> {
        let mut ones = self.ones();
        let (x0, y0) = ones.next()?;
        let init = (x0, y0, x0, y0);
        Some(ones.fold(init, |(a, b, c, d), (x, y)| {
            (a.min(x), b.min(y), c.max(x), d.max(y))
        }))
    }

    /// Shifts every foreground pixel by `(dx, dy)`; pixels that leave the grid are dropped.
    pub fn translate(&self, dx: i64, dy: i64) -> BinaryMask {
        let mut out = BinaryMask {
            width: self.width,
            height: self.height,
            words: vec![0; self.words.len()],
        };
        let (w, h) = (self.width as i64, self.height as i64);
        for (x, y) in self.ones() {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if (0..w).contains(&nx) && (0..h).contains(&ny) {
                let i = out.offset(nx as u32, ny as u32);
                out.set_unchecked(i, true);
            }
        }
        out
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    fn set_unchecked(&mut self, i: usize, value: bool) {
        let bit = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= bit;
        } else {
            self.words[i / WORD_BITS] &= !bit;
        }
    }
}

impl fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_dimensions() {
        assert!(BinaryMask::new(0, 4).is_err());
        assert!(BinaryMask::new(4, 0).is_err());
    }

    #[test]
    fn from_bools_checks_length() {
        assert!(BinaryMask::from_bools(3, 3, &[true; 8]).is_err());
        let m = BinaryMask::from_bools(3, 3, &[true; 9]).unwrap();
        assert_eq!(m.area(), 9);
    }

    #[test]
    fn set_get_roundtrip_across_word_boundary() {
        let mut m = BinaryMask::new(13, 11).unwrap();
        m.set(12, 4, true);
        m.set(0, 10, true);
        assert!(m.get(12, 4));
        assert!(m.get(0, 10));
        assert_eq!(m.area(), 2);
        m.set(12, 4, false);
        assert_eq!(m.ones().collect::<Vec<_>>(), vec![(0, 10)]);
    }

    #[test]
    fn translate_drops_pixels_leaving_the_grid() {
        let m = BinaryMask::from_fn(5, 5, |x, _| x >= 3).unwrap();
        let t = m.translate(1, 0);
        assert_eq!(t.area(), 5);
        assert!(t.get(4, 2));
        assert!(!t.get(3, 2));
        assert_eq!(m.translate(-2, 1).bounding_box(), Some((1, 1, 2, 4)));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = BinaryMask::new(2, 2).unwrap();
        let b = BinaryMask::new(2, 3).unwrap();
        assert!(matches!(
            a.intersection_count(&b),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
