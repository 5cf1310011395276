//! Square Gray-mapped QAM alphabets with unit mean symbol energy.
//!
//! Mapping table (frozen): a symbol carries `2k` bits, MSB first. The first
//! `k` bits select the in-phase level and the last `k` bits the quadrature
//! level. On each axis the Gray label `g = i ^ (i >> 1)` of level index `i`
//! sits at amplitude `(L - 1) - 2i`, so label 0 is the most positive level.
//! For 4-QAM this gives
//!
//! | bits | symbol          |
//! |------|-----------------|
//! | 00   | (+1 + 1j)/sqrt2 |
//! | 01   | (+1 - 1j)/sqrt2 |
//! | 10   | (-1 + 1j)/sqrt2 |
//! | 11   | (-1 - 1j)/sqrt2 |
//!
//! Points are stored indexed by the bit pattern read as an unsigned integer,
//! so "lowest alphabet index" and "lexicographically smallest bit pattern"
//! are the same tie-break.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    order: usize,
    bits_per_symbol: usize,
    points: Vec<Complex64>,
}

impl Alphabet {
    pub fn new(order: usize) -> Result<Self> {
        let bits_per_axis = match order {
            4 => 1,
            16 => 2,
            64 => 3,
            _ => return Err(Error::UnsupportedOrder(order)),
        };
        let levels = 1usize << bits_per_axis;
        // Mean energy of the unnormalized {±1, ±3, ...} lattice is 2(L^2 - 1)/3.
        let scale = (3.0 / (2.0 * (levels * levels - 1) as f64)).sqrt();

        let mut amplitude_of_label = vec![0.0; levels];
        for i in 0..levels {
            let gray = i ^ (i >> 1);
            amplitude_of_label[gray] = ((levels - 1) as f64 - 2.0 * i as f64) * scale;
        }

        let points = (0..order)
            .map(|idx| {
                let i_label = idx >> bits_per_axis;
                let q_label = idx & (levels - 1);
                Complex64::new(amplitude_of_label[i_label], amplitude_of_label[q_label])
            })
            .collect();

        Ok(Self {
            order,
            bits_per_symbol: 2 * bits_per_axis,
            points,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    /// Packs one symbol's worth of bits (MSB first) into an alphabet index.
    pub fn index_of_bits(&self, bits: &[u8]) -> Result<usize> {
        if bits.len() != self.bits_per_symbol {
            return Err(Error::BitLength {
                len: bits.len(),
                bits_per_symbol: self.bits_per_symbol,
            });
        }
        bits.iter().try_fold(0usize, |acc, &b| match b {
            0 | 1 => Ok((acc << 1) | b as usize),
            other => Err(Error::InvalidBit(other)),
        })
    }

    /// Writes the bits of alphabet index `index` (MSB first) into `out`.
    pub fn bits_of_index(&self, index: usize, out: &mut Vec<u8>) {
        for k in (0..self.bits_per_symbol).rev() {
            out.push(((index >> k) & 1) as u8);
        }
    }

    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        if bits.len() % self.bits_per_symbol != 0 {
            return Err(Error::BitLength {
                len: bits.len(),
                bits_per_symbol: self.bits_per_symbol,
            });
        }
        bits.chunks(self.bits_per_symbol)
            .map(|group| self.index_of_bits(group).map(|i| self.points[i]))
            .collect()
    }

    /// Index of the nearest constellation point; ties go to the lowest index.
    pub fn nearest_index(&self, symbol: Complex64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (symbol - p).norm_sqr();
            if d < best_dist {
                best_dist = d;
                best = i;
            }
        }
        best
    }

    pub fn hard_demap(&self, symbol: Complex64) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.bits_per_symbol);
        self.bits_of_index(self.nearest_index(symbol), &mut out);
        out
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.order as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn qpsk_table() {
        let a = Alphabet::new(4).unwrap();
        let h = FRAC_1_SQRT_2;
        let expected = [
            Complex64::new(h, h),
            Complex64::new(h, -h),
            Complex64::new(-h, h),
            Complex64::new(-h, -h),
        ];
        for (bits, want) in [[0, 0], [0, 1], [1, 0], [1, 1]].iter().zip(expected) {
            let got = a.modulate(bits).unwrap()[0];
            assert!((got - want).norm() < 1e-15, "{bits:?}");
        }
        assert!((a.mean_energy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unnormalized_lattice_energy() {
        // Enumerate the raw {±1,±3}^2 and {±1,..,±7}^2 lattices directly.
        for (levels, want) in [(2usize, 2.0), (4, 10.0), (8, 42.0)] {
            let amps: Vec<f64> = (0..levels).map(|i| (2 * i) as f64 - (levels - 1) as f64).collect();
            let mut sum = 0.0;
            for &x in &amps {
                for &y in &amps {
                    sum += x * x + y * y;
                }
            }
            assert_eq!(sum / (levels * levels) as f64, want);
        }
        let a16 = Alphabet::new(16).unwrap();
        let min_amp = a16.points().iter().map(|p| p.re.abs()).fold(f64::INFINITY, f64::min);
        assert!((min_amp - 1.0 / 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn unit_energy_all_orders() {
        for q in [4, 16, 64] {
            let a = Alphabet::new(q).unwrap();
            assert!((a.mean_energy() - 1.0).abs() < 1e-12);
            assert_eq!(a.points().len(), q);
        }
    }

    #[test]
    fn gray_neighbors_differ_in_one_bit() {
        for q in [4, 16, 64] {
            let a = Alphabet::new(q).unwrap();
            let step = a.points().iter().map(|p| p.re).fold(f64::INFINITY, |m, x| m.min(x.abs())) * 2.0;
            for (i, p) in a.points().iter().enumerate() {
                for (j, r) in a.points().iter().enumerate() {
                    let d = *p - *r;
                    let horizontal = (d.re.abs() - step).abs() < 1e-9 && d.im.abs() < 1e-9;
                    let vertical = (d.im.abs() - step).abs() < 1e-9 && d.re.abs() < 1e-9;
                    if horizontal || vertical {
                        assert_eq!((i ^ j).count_ones(), 1, "q={q} i={i} j={j}");
                    }
                }
            }
        }
    }

    #[test]
    fn demap_cases() {
        let a = Alphabet::new(4).unwrap();
        assert_eq!(a.hard_demap(Complex64::new(0.9, 0.8)), vec![0, 0]);
        assert_eq!(a.hard_demap(Complex64::new(0.0, 0.0)), vec![0, 0]);
        assert_eq!(a.hard_demap(Complex64::new(-0.1, -3.0)), vec![1, 1]);
    }

    #[test]
    fn modulate_errors() {
        let a = Alphabet::new(16).unwrap();
        assert!(matches!(a.modulate(&[0, 1, 1]), Err(Error::BitLength { .. })));
        assert!(matches!(a.modulate(&[0, 1, 2, 0]), Err(Error::InvalidBit(2))));
        assert!(matches!(Alphabet::new(8), Err(Error::UnsupportedOrder(8))));
        assert!(a.modulate(&[]).unwrap().is_empty());
    }

    #[test]
    fn empirical_energy() {
        let a = Alphabet::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let e: f64 = (0..n).map(|_| a.point(rng.random_range(0..16)).norm_sqr()).sum::<f64>() / n as f64;
        assert!((e - 1.0).abs() < 0.02, "{e}");
    }

    proptest! {
        #[test]
        fn round_trip(order_sel in 0usize..3, raw in proptest::collection::vec(0u8..2, 0..60)) {
            let a = Alphabet::new([4, 16, 64][order_sel]).unwrap();
            let k = a.bits_per_symbol();
            let bits = &raw[..raw.len() / k * k];
            let syms = a.modulate(bits).unwrap();
            let back: Vec<u8> = syms.iter().flat_map(|&s| a.hard_demap(s)).collect();
            prop_assert_eq!(back.as_slice(), bits);
            for (i, p) in a.points().iter().enumerate() {
                prop_assert_eq!(a.nearest_index(*p), i);
            }
        }
    }
}
