//! Channel models in both domains and additive noise.
//!
//! A time-frequency channel `H` acts by Hadamard product, `R = H ⊙ U`. Its
//! delay-Doppler dual `S_h = sfft(H) / sqrt(NM)` acts by 2-D circular
//! convolution, and the two are equivalent exactly:
//! `apply_dd(tf_to_dd(H), X) == sfft(apply_tf(H, isfft(X)))`.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::GridConfig;
use crate::qam::Alphabet;
use crate::transforms::{isfft, sfft, Domain, SymbolGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay: usize,
    pub doppler: usize,
    pub gain: Complex64,
}

/// Sparse delay-Doppler channel: distinct taps on an `N x M` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TapSet {
    n_delay: usize,
    m_doppler: usize,
    taps: Vec<Tap>,
}

impl TapSet {
    pub fn new(n_delay: usize, m_doppler: usize, taps: Vec<Tap>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for t in &taps {
            if t.delay >= n_delay || t.doppler >= m_doppler {
                return Err(Error::InvalidTaps(format!(
                    "tap ({}, {}) outside {n_delay}x{m_doppler} grid",
                    t.delay, t.doppler
                )));
            }
            if !seen.insert((t.delay, t.doppler)) {
                return Err(Error::InvalidTaps(format!("duplicate tap ({}, {})", t.delay, t.doppler)));
            }
        }
        Ok(Self {
            n_delay,
            m_doppler,
            taps,
        })
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_delay, self.m_doppler)
    }
}

/// Offsets of the four-tap benchmark channel.
pub const FOUR_TAP_OFFSETS: [(usize, usize); 4] = [(0, 0), (1, 1), (2, 2), (3, 3)];

/// Independent Rayleigh taps at the given offsets, equal power, unit total
/// mean power.
pub fn synth_rayleigh_taps<R: Rng + ?Sized>(
    n_delay: usize,
    m_doppler: usize,
    offsets: &[(usize, usize)],
    rng: &mut R,
) -> Result<TapSet> {
    if offsets.is_empty() {
        return Err(Error::InvalidTaps("no tap offsets".into()));
    }
    let sigma = (0.5 / offsets.len() as f64).sqrt();
    let taps = offsets
        .iter()
        .map(|&(delay, doppler)| Tap {
            delay,
            doppler,
            gain: complex_gaussian(rng, sigma),
        })
        .collect();
    TapSet::new(n_delay, m_doppler, taps)
}

/// Four Rayleigh taps of power 1/4 on the diagonal offsets (0,0)..(3,3).
pub fn synth_four_tap<R: Rng + ?Sized>(config: &GridConfig, rng: &mut R) -> Result<TapSet> {
    let (n, m) = (config.n_delay(), config.m_doppler());
    if n < 4 || m < 4 {
        return Err(Error::GridTooSmall { n, m, min_n: 4, min_m: 4 });
    }
    synth_rayleigh_taps(n, m, &FOUR_TAP_OFFSETS, rng)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, sigma_per_dim: f64) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * sigma_per_dim, im * sigma_per_dim)
}

/// Dense delay-Doppler spreading function `S_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct DDChannel {
    s_h: Array2<Complex64>,
}

impl DDChannel {
    pub fn new(s_h: Array2<Complex64>) -> Self {
        Self { s_h }
    }

    /// Unit tap at (0,0).
    pub fn identity(n: usize, m: usize) -> Self {
        let mut s_h = Array2::zeros((n, m));
        s_h[[0, 0]] = Complex64::new(1.0, 0.0);
        Self { s_h }
    }

    pub fn s_h(&self) -> &Array2<Complex64> {
        &self.s_h
    }

    pub fn dims(&self) -> (usize, usize) {
        self.s_h.dim()
    }

    pub fn energy(&self) -> f64 {
        self.s_h.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Energy per Doppler column, summed over delay.
    pub fn doppler_profile(&self) -> Vec<f64> {
        self.s_h
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }

    /// Nonzero cells as taps, in row-major order.
    pub fn nonzero_taps(&self) -> Vec<Tap> {
        self.s_h
            .indexed_iter()
            .filter(|(_, g)| g.norm_sqr() > 0.0)
            .map(|((delay, doppler), &gain)| Tap { delay, doppler, gain })
            .collect()
    }
}

/// Time-frequency transfer function `H[f,t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TFChannel {
    h: Array2<Complex64>,
}

impl TFChannel {
    pub fn new(h: Array2<Complex64>) -> Self {
        Self { h }
    }

    pub fn h(&self) -> &Array2<Complex64> {
        &self.h
    }

    pub fn dims(&self) -> (usize, usize) {
        self.h.dim()
    }
}

pub fn taps_to_dd(taps: &TapSet) -> DDChannel {
    let mut s_h = Array2::zeros(taps.dims());
    for t in &taps.taps {
        s_h[[t.delay, t.doppler]] = t.gain;
    }
    DDChannel { s_h }
}

/// `H = sqrt(NM) * isfft(S_h)`.
pub fn dd_to_tf(s_h: &DDChannel) -> TFChannel {
    let scale = (s_h.s_h.len() as f64).sqrt();
    let u = isfft(&SymbolGrid::new(s_h.s_h.clone(), Domain::DelayDoppler)).expect("domain is delay-Doppler");
    TFChannel {
        h: u.into_data().mapv(|z| z * scale),
    }
}

/// `S_h = sfft(H) / sqrt(NM)`.
pub fn tf_to_dd(h: &TFChannel) -> DDChannel {
    let scale = 1.0 / (h.h.len() as f64).sqrt();
    let s = sfft(&SymbolGrid::new(h.h.clone(), Domain::TimeFrequency)).expect("domain is time-frequency");
    DDChannel {
        s_h: s.into_data().mapv(|z| z * scale),
    }
}

fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// `R = H ⊙ U`.
pub fn apply_tf(h: &TFChannel, u: &SymbolGrid) -> Result<SymbolGrid> {
    u.expect_domain(Domain::TimeFrequency)?;
    check_dims(h.dims(), u.dims())?;
    Ok(SymbolGrid::new(&h.h * u.data(), Domain::TimeFrequency))
}

/// `Y[n,m] = sum S_h[n',m'] X[(n-n') mod N, (m-m') mod M]`.
///
/// Only nonzero cells of `S_h` are visited, so sparse channels cost
/// `O(NM * taps)`.
pub fn apply_dd(s_h: &DDChannel, x: &SymbolGrid) -> Result<SymbolGrid> {
    x.expect_domain(Domain::DelayDoppler)?;
    check_dims(s_h.dims(), x.dims())?;
    Ok(convolve_taps(&s_h.nonzero_taps(), x))
}

pub(crate) fn convolve_taps(taps: &[Tap], x: &SymbolGrid) -> SymbolGrid {
    let (n, m) = x.dims();
    let xd = x.data();
    let mut y = Array2::<Complex64>::zeros((n, m));
    for tap in taps {
        for row in 0..n {
            let src_row = (row + n - tap.delay) % n;
            for col in 0..m {
                let src_col = (col + m - tap.doppler) % m;
                y[[row, col]] += tap.gain * xd[[src_row, src_col]];
            }
        }
    }
    SymbolGrid::new(y, Domain::DelayDoppler)
}

/// Complex noise variance per grid element for unit-energy symbols:
/// `1 / (log2(Q) * 10^(Eb/N0 / 10))`. Zero for `+inf` dB.
pub fn noise_variance(ebn0_db: f64, bits_per_symbol: usize) -> f64 {
    if ebn0_db == f64::INFINITY {
        return 0.0;
    }
    1.0 / (bits_per_symbol as f64 * 10f64.powf(ebn0_db / 10.0))
}

/// Adds circularly-symmetric complex Gaussian noise at the given Eb/N0.
pub fn add_awgn<R: Rng + ?Sized>(y: &SymbolGrid, ebn0_db: f64, alphabet: &Alphabet, rng: &mut R) -> SymbolGrid {
    let var = noise_variance(ebn0_db, alphabet.bits_per_symbol());
    if var == 0.0 {
        return y.clone();
    }
    let sigma = (var / 2.0).sqrt();
    let mut out = y.clone();
    for z in out.data_mut().iter_mut() {
        *z += complex_gaussian(rng, sigma);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::tests::{max_diff, random_grid};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tf(n: usize, m: usize, rng: &mut ChaCha8Rng) -> TFChannel {
        TFChannel::new(random_grid(n, m, Domain::TimeFrequency, rng).into_data())
    }

    fn eq6_path(h: &TFChannel, x: &SymbolGrid) -> SymbolGrid {
        sfft(&apply_tf(h, &isfft(x).unwrap()).unwrap()).unwrap()
    }

    #[test]
    fn four_tap_structure() {
        let cfg = GridConfig::new(8, 8, 1e6, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = synth_four_tap(&cfg, &mut rng).unwrap();
        let idx: Vec<_> = t.taps().iter().map(|t| (t.delay, t.doppler)).collect();
        assert_eq!(idx, FOUR_TAP_OFFSETS.to_vec());
        let again = synth_four_tap(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(t, again);
        assert_eq!(taps_to_dd(&t).nonzero_taps().len(), 4);

        let small = GridConfig::new(3, 8, 1e6, 0.0).unwrap();
        assert!(matches!(synth_four_tap(&small, &mut rng), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn four_tap_power() {
        let cfg = GridConfig::new(4, 4, 1e6, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let mut power = [0.0; 4];
        for _ in 0..draws {
            let t = synth_four_tap(&cfg, &mut rng).unwrap();
            for (p, tap) in power.iter_mut().zip(t.taps()) {
                *p += tap.gain.norm_sqr();
            }
        }
        for p in power {
            assert!((p / draws as f64 - 0.25).abs() < 0.01, "{p}");
        }
    }

    #[test]
    fn tapset_validation() {
        let g = Complex64::new(1.0, 0.0);
        let tap = |delay, doppler| Tap { delay, doppler, gain: g };
        assert!(TapSet::new(2, 2, vec![tap(2, 0)]).is_err());
        assert!(TapSet::new(2, 2, vec![tap(1, 1), tap(1, 1)]).is_err());
        let empty = TapSet::new(3, 3, vec![]).unwrap();
        assert!(taps_to_dd(&empty).s_h().iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        let delta = taps_to_dd(&TapSet::new(3, 3, vec![tap(0, 0)]).unwrap());
        assert_eq!(delta, DDChannel::identity(3, 3));
    }

    #[test]
    fn ones_are_identity() {
        let h = TFChannel::new(Array2::from_elem((4, 6), Complex64::new(1.0, 0.0)));
        let s = tf_to_dd(&h);
        assert!(max_diff(s.s_h(), DDChannel::identity(4, 6).s_h()) < 1e-14);
        assert!(max_diff(dd_to_tf(&s).h(), h.h()) < 1e-14);
    }

    #[test]
    fn shift_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_grid(5, 4, Domain::DelayDoppler, &mut rng);
        let g = Complex64::new(0.3, -1.2);
        let mut s = Array2::zeros((5, 4));
        s[[2, 3]] = g;
        let y = apply_dd(&DDChannel::new(s), &x).unwrap();
        for n in 0..5 {
            for m in 0..4 {
                let want = g * x.data()[[(n + 5 - 2) % 5, (m + 4 - 3) % 4]];
                assert!((y.data()[[n, m]] - want).norm() < 1e-15);
            }
        }
        let same = apply_dd(&DDChannel::identity(5, 4), &x).unwrap();
        assert_eq!(same, x);
    }

    #[test]
    fn apply_tf_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random_grid(3, 3, Domain::TimeFrequency, &mut rng);
        let ones = TFChannel::new(Array2::from_elem((3, 3), Complex64::new(1.0, 0.0)));
        assert_eq!(apply_tf(&ones, &u).unwrap(), u);
        let zeros = TFChannel::new(Array2::zeros((3, 3)));
        assert!(apply_tf(&zeros, &u).unwrap().frobenius_norm() == 0.0);
        let h = random_tf(3, 3, &mut rng);
        let r = apply_tf(&h, &u).unwrap();
        for f in 0..3 {
            for t in 0..3 {
                assert_eq!(r.data()[[f, t]], h.h()[[f, t]] * u.data()[[f, t]]);
            }
        }
        assert!(matches!(
            apply_tf(&TFChannel::new(Array2::zeros((3, 4))), &u),
            Err(Error::DimensionMismatch { .. })
        ));
        let dd = random_grid(3, 3, Domain::DelayDoppler, &mut rng);
        assert!(matches!(apply_tf(&h, &dd), Err(Error::WrongDomain { .. })));
        assert!(matches!(apply_dd(&DDChannel::identity(3, 3), &u), Err(Error::WrongDomain { .. })));
    }

    #[test]
    fn full_chain_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_grid(8, 4, Domain::DelayDoppler, &mut rng);
        let ones = TFChannel::new(Array2::from_elem((8, 4), Complex64::new(1.0, 0.0)));
        assert!(max_diff(eq6_path(&ones, &x).data(), x.data()) < 1e-13);
    }

    #[test]
    fn noise_variance_formula() {
        assert_eq!(noise_variance(0.0, 2), 0.5);
        assert_eq!(noise_variance(f64::INFINITY, 2), 0.0);
        assert!((noise_variance(10.0, 4) - 0.025).abs() < 1e-15);
    }

    #[test]
    fn awgn_infinite_and_deterministic() {
        let a = Alphabet::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = random_grid(4, 4, Domain::DelayDoppler, &mut rng);
        assert_eq!(add_awgn(&y, f64::INFINITY, &a, &mut rng), y);
        let n1 = add_awgn(&y, 3.0, &a, &mut ChaCha8Rng::seed_from_u64(42));
        let n2 = add_awgn(&y, 3.0, &a, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(n1, n2);
        assert_eq!(n1.domain(), Domain::DelayDoppler);
    }

    #[test]
    fn awgn_empirical_variance() {
        let a = Alphabet::new(4).unwrap();
        let zero = SymbolGrid::zeros(1000, 1000, Domain::DelayDoppler);
        let noisy = add_awgn(&zero, 0.0, &a, &mut ChaCha8Rng::seed_from_u64(9));
        let n = noisy.data().len() as f64;
        let mean: Complex64 = noisy.data().iter().sum::<Complex64>() / n;
        let var = noisy.data().iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / n;
        assert!((var - 0.5).abs() < 0.005, "{var}");
        let re_var = noisy.data().iter().map(|z| z.re * z.re).sum::<f64>() / n;
        assert!((re_var - 0.25).abs() < 0.003, "{re_var}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn eq6_equals_eq7(seed in any::<u64>(), n in 1usize..17, m in 1usize..17) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_tf(n, m, &mut rng);
            let x = random_grid(n, m, Domain::DelayDoppler, &mut rng);
            let via_dd = apply_dd(&tf_to_dd(&h), &x).unwrap();
            prop_assert!(max_diff(via_dd.data(), eq6_path(&h, &x).data()) < 1e-10);
            prop_assert!(max_diff(dd_to_tf(&tf_to_dd(&h)).h(), h.h()) < 1e-12);
        }

        #[test]
        fn tf_energy_bound(seed in any::<u64>(), n in 1usize..9, m in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_tf(n, m, &mut rng);
            let u = random_grid(n, m, Domain::TimeFrequency, &mut rng);
            let hmax = h.h().iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(apply_tf(&h, &u).unwrap().frobenius_norm() <= hmax * u.frobenius_norm() + 1e-12);
        }
    }
}
