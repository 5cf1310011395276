//! Message-passing detection over the sparse delay-Doppler system.
//!
//! Cells are vectorized row-major, `d = n * M + m`. Observation `y_d` sees
//! variable `x_c` through coefficient `S_h[(n_d - n_c) mod N, (m_d - m_c) mod M]`.
//!
//! Each iteration:
//! 1. every observation models the interference from its other neighbors as a
//!    complex Gaussian, using the mean and variance of their incoming
//!    symbol messages;
//! 2. every variable combines the resulting likelihoods into a posterior and
//!    sends each observation the product of the *other* likelihoods,
//!    damped against its previous message.
//!
//! Decisions are the per-cell posterior argmax.

use num_complex::Complex64;

use crate::channel::DDChannel;
use crate::error::{Error, Result};
use crate::qam::Alphabet;
use crate::transforms::{Domain, SymbolGrid};

/// Noise variance used when the true variance is zero.
pub const NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpParams {
    pub max_iterations: usize,
    pub damping: f64,
    pub tolerance: f64,
}

impl Default for MpParams {
    fn default() -> Self {
        Self {
            max_iterations: 30,
            damping: 0.6,
            tolerance: 1e-4,
        }
    }
}

impl MpParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidConfig(format!("damping {} not in (0, 1]", self.damping)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!("tolerance {} must be positive", self.tolerance)));
        }
        Ok(())
    }
}

/// Linear system `y = A x + n` with sparse rows, stored as CSR.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    n_cells: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    coefs: Vec<Complex64>,
    /// Edge ids grouped by variable.
    var_ptr: Vec<usize>,
    var_edges: Vec<usize>,
    noise_variance: f64,
}

impl SparseSystem {
    /// Builds a system from explicit rows of `(variable, coefficient)`.
    pub fn from_rows(rows: Vec<Vec<(usize, Complex64)>>, noise_variance: f64) -> Result<Self> {
        let n_cells = rows.len();
        let mut row_ptr = Vec::with_capacity(n_cells + 1);
        let mut cols = Vec::new();
        let mut coefs = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, h) in row {
                if c >= n_cells {
                    return Err(Error::DimensionMismatch {
                        expected: (n_cells, 1),
                        actual: (c + 1, 1),
                    });
                }
                if !(h.re.is_finite() && h.im.is_finite()) {
                    return Err(Error::NonFinite("channel coefficient"));
                }
                cols.push(c);
                coefs.push(h);
            }
            row_ptr.push(cols.len());
        }

        let mut degree = vec![0usize; n_cells];
        for &c in &cols {
            degree[c] += 1;
        }
        let mut var_ptr = vec![0usize; n_cells + 1];
        for c in 0..n_cells {
            var_ptr[c + 1] = var_ptr[c] + degree[c];
        }
        let mut fill = var_ptr.clone();
        let mut var_edges = vec![0usize; cols.len()];
        for (e, &c) in cols.iter().enumerate() {
            var_edges[fill[c]] = e;
            fill[c] += 1;
        }

        let mut sys = Self {
            n_cells,
            row_ptr,
            cols,
            coefs,
            var_ptr,
            var_edges,
            noise_variance: 0.0,
        };
        sys.set_noise_variance(noise_variance)?;
        Ok(sys)
    }

    pub fn set_noise_variance(&mut self, noise_variance: f64) -> Result<()> {
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::NonFinite("noise variance"));
        }
        self.noise_variance = noise_variance;
        Ok(())
    }

    pub fn with_noise_variance(mut self, noise_variance: f64) -> Result<Self> {
        self.set_noise_variance(noise_variance)?;
        Ok(self)
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn row(&self, d: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let r = self.row_ptr[d]..self.row_ptr[d + 1];
        self.cols[r.clone()].iter().copied().zip(self.coefs[r].iter().copied())
    }

    /// Neighbor count if every observation has the same number of neighbors.
    pub fn neighbor_count(&self) -> Option<usize> {
        let p = self.row_ptr.get(1).copied().unwrap_or(0);
        self.row_ptr.windows(2).all(|w| w[1] - w[0] == p).then_some(p)
    }

    /// `A x`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n_cells).map(|d| self.row(d).map(|(c, h)| h * x[c]).sum()).collect()
    }

    /// Relabels cell `i` as `perm[i]` on both the observation and the variable side.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut rows = vec![Vec::new(); self.n_cells];
        for (d, &pd) in perm.iter().enumerate().take(self.n_cells) {
            rows[pd] = self.row(d).map(|(c, h)| (perm[c], h)).collect();
        }
        Self::from_rows(rows, self.noise_variance)
    }
}

/// Builds the sparse system of `s_h`, keeping cells with
/// `|gain| >= tap_threshold * max|gain|`.
pub fn vectorize(s_h: &DDChannel, tap_threshold: f64) -> Result<SparseSystem> {
    let (n, m) = s_h.dims();
    let max = s_h.s_h().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite("channel"));
    }
    if max == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let cut = tap_threshold * max;
    let taps: Vec<(usize, usize, Complex64)> = s_h
        .s_h()
        .indexed_iter()
        .filter(|(_, g)| g.norm() >= cut)
        .map(|((dn, dm), &g)| (dn, dm, g))
        .collect();

    let rows = (0..n * m)
        .map(|d| {
            let (row, col) = (d / m, d % m);
            taps.iter()
                .map(|&(dn, dm, g)| (((row + n - dn) % n) * m + (col + m - dm) % m, g))
                .collect()
        })
        .collect();
    SparseSystem::from_rows(rows, 0.0)
}

#[derive(Debug, Clone)]
pub struct MpOutput {
    pub x_hat: SymbolGrid,
    /// Alphabet index decided for every cell, row-major.
    pub decisions: Vec<usize>,
    /// Posterior probabilities, `Q` per cell, row-major.
    pub posteriors: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Max absolute posterior change in the final iteration.
    pub last_change: f64,
}

impl MpOutput {
    pub fn posterior(&self, cell: usize) -> &[f64] {
        let q = self.posteriors.len() / self.decisions.len();
        &self.posteriors[cell * q..(cell + 1) * q]
    }
}

fn normalize_exp(log_p: &[f64], out: &mut [f64]) {
    let max = log_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(log_p) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn mp_detect(y: &SymbolGrid, system: &SparseSystem, alphabet: &Alphabet, params: &MpParams) -> Result<MpOutput> {
    params.validate()?;
    y.expect_domain(Domain::DelayDoppler)?;
    let (n, m) = y.dims();
    if n * m != system.n_cells {
        return Err(Error::DimensionMismatch {
            expected: (system.n_cells, 1),
            actual: (n, m),
        });
    }
    if y.data().iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("received grid"));
    }
    let y_vec: Vec<Complex64> = y.data().iter().copied().collect();

    let points = alphabet.points();
    let energies: Vec<f64> = points.iter().map(|p| p.norm_sqr()).collect();
    let q = points.len();
    let cells = system.n_cells;
    let edges = system.cols.len();
    let noise = system.noise_variance.max(NOISE_FLOOR);
    let damping = params.damping;

    let mut msgs = vec![1.0 / q as f64; edges * q];
    let mut ll = vec![0.0; edges * q];
    let mut post = vec![1.0 / q as f64; cells * q];
    let mut edge_mean = vec![Complex64::new(0.0, 0.0); edges];
    let mut edge_var = vec![0.0; edges];
    let mut log_total = vec![0.0; q];
    let mut log_excl = vec![0.0; q];
    let mut scratch = vec![0.0; q];

    let mut iterations = 0;
    let mut converged = false;
    let mut last_change = f64::INFINITY;

    while iterations < params.max_iterations {
        iterations += 1;

        for e in 0..edges {
            let p = &msgs[e * q..(e + 1) * q];
            let mean: Complex64 = p.iter().zip(points).map(|(w, s)| s * *w).sum();
            let second: f64 = p.iter().zip(&energies).map(|(w, en)| w * en).sum();
            edge_mean[e] = mean;
            edge_var[e] = (second - mean.norm_sqr()).max(0.0);
        }

        for d in 0..cells {
            let range = system.row_ptr[d]..system.row_ptr[d + 1];
            let mut total_mean = Complex64::new(0.0, 0.0);
            let mut total_var = 0.0;
            for e in range.clone() {
                total_mean += system.coefs[e] * edge_mean[e];
                total_var += system.coefs[e].norm_sqr() * edge_var[e];
            }
            for e in range {
                let h = system.coefs[e];
                let mu = total_mean - h * edge_mean[e];
                let var = (total_var - h.norm_sqr() * edge_var[e]).max(0.0) + noise;
                let r = y_vec[d] - mu;
                for (a, s) in points.iter().enumerate() {
                    ll[e * q + a] = -(r - h * s).norm_sqr() / var;
                }
            }
        }

        let mut change: f64 = 0.0;
        for c in 0..cells {
            let incident = &system.var_edges[system.var_ptr[c]..system.var_ptr[c + 1]];
            log_total.iter_mut().for_each(|v| *v = 0.0);
            for &e in incident {
                for a in 0..q {
                    log_total[a] += ll[e * q + a];
                }
            }
            normalize_exp(&log_total, &mut scratch);
            for a in 0..q {
                change = change.max((scratch[a] - post[c * q + a]).abs());
                post[c * q + a] = scratch[a];
            }
            for &e in incident {
                for a in 0..q {
                    log_excl[a] = log_total[a] - ll[e * q + a];
                }
                normalize_exp(&log_excl, &mut scratch);
                let msg = &mut msgs[e * q..(e + 1) * q];
                for a in 0..q {
                    msg[a] = damping * scratch[a] + (1.0 - damping) * msg[a];
                }
            }
        }

        last_change = change;
        if change < params.tolerance {
            converged = true;
            break;
        }
    }

    let decisions: Vec<usize> = post
        .chunks(q)
        .map(|p| {
            let mut best = 0;
            for a in 1..q {
                if p[a] > p[best] {
                    best = a;
                }
            }
            best
        })
        .collect();
    let x_hat = SymbolGrid::from_vec(n, m, decisions.iter().map(|&i| points[i]).collect(), Domain::DelayDoppler)?;

    Ok(MpOutput {
        x_hat,
        decisions,
        posteriors: post,
        iterations,
        converged,
        last_change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_dd, synth_four_tap, synth_rayleigh_taps, taps_to_dd, Tap, TapSet};
    use crate::grid::GridConfig;
    use crate::transforms::tests::{max_diff, random_grid};
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symbols(a: &Alphabet, n: usize, m: usize, rng: &mut impl Rng) -> (Vec<usize>, SymbolGrid) {
        let idx: Vec<usize> = (0..n * m).map(|_| rng.random_range(0..a.order())).collect();
        let grid = SymbolGrid::from_vec(n, m, idx.iter().map(|&i| a.point(i)).collect(), Domain::DelayDoppler).unwrap();
        (idx, grid)
    }

    fn single_tap(n: usize, m: usize, dn: usize, dm: usize, gain: Complex64) -> DDChannel {
        taps_to_dd(&TapSet::new(n, m, vec![Tap { delay: dn, doppler: dm, gain }]).unwrap())
    }

    #[test]
    fn vectorize_matches_apply_dd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let s = DDChannel::new(random_grid(4, 4, Domain::DelayDoppler, &mut rng).into_data());
            let x = random_grid(4, 4, Domain::DelayDoppler, &mut rng);
            let sys = vectorize(&s, 0.0).unwrap();
            assert_eq!(sys.neighbor_count(), Some(16));
            let y = sys.apply(&x.data().iter().copied().collect::<Vec<_>>());
            let want = apply_dd(&s, &x).unwrap();
            let got = Array2::from_shape_vec((4, 4), y).unwrap();
            assert!(max_diff(&got, want.data()) < 1e-12);
        }
    }

    #[test]
    fn vectorize_sparsity() {
        let cfg = GridConfig::new(8, 8, 1e6, 0.0).unwrap();
        let taps = synth_four_tap(&cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let sys = vectorize(&taps_to_dd(&taps), 1e-3).unwrap();
        assert_eq!(sys.neighbor_count(), Some(4));

        let delta = vectorize(&DDChannel::identity(3, 5), 1e-3).unwrap();
        assert_eq!(delta.neighbor_count(), Some(1));
        for d in 0..15 {
            assert_eq!(delta.row(d).collect::<Vec<_>>(), vec![(d, Complex64::new(1.0, 0.0))]);
        }
        assert!(matches!(vectorize(&DDChannel::new(Array2::zeros((2, 2))), 0.1), Err(Error::ZeroChannel)));
    }

    #[test]
    fn identity_noise_free() {
        let a = Alphabet::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (idx, x) = random_symbols(&a, 8, 4, &mut rng);
        let sys = vectorize(&DDChannel::identity(8, 4), 1e-3).unwrap();
        let out = mp_detect(&x, &sys, &a, &MpParams::default()).unwrap();
        assert_eq!(out.decisions, idx);
        assert_eq!(out.x_hat, x);
        assert!(out.converged && out.iterations <= 2);
    }

    #[test]
    fn shifted_tap_inverted() {
        let a = Alphabet::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (idx, x) = random_symbols(&a, 6, 5, &mut rng);
        let s = single_tap(6, 5, 2, 3, Complex64::new(1.0, 0.0));
        let y = apply_dd(&s, &x).unwrap();
        let out = mp_detect(&y, &vectorize(&s, 1e-3).unwrap(), &a, &MpParams::default()).unwrap();
        // oracle: inverse circular shift of y
        for n in 0..6 {
            for mm in 0..5 {
                let back = y.data()[[(n + 2) % 6, (mm + 3) % 5]];
                assert_eq!(a.nearest_index(back), out.decisions[n * 5 + mm]);
            }
        }
        assert_eq!(out.decisions, idx);
    }

    #[test]
    fn single_tap_exact_at_any_snr() {
        let a = Alphabet::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for gain in [Complex64::new(0.01, 0.0), Complex64::new(-3.0, 2.0), Complex64::new(0.0, 1e-4)] {
            let (idx, x) = random_symbols(&a, 4, 4, &mut rng);
            let s = single_tap(4, 4, 1, 3, gain);
            let y = apply_dd(&s, &x).unwrap();
            for var in [0.0, 1.0, 100.0] {
                let sys = vectorize(&s, 0.5).unwrap().with_noise_variance(var).unwrap();
                assert_eq!(mp_detect(&y, &sys, &a, &MpParams::default()).unwrap().decisions, idx);
            }
        }
    }

    #[test]
    fn posteriors_normalized_every_iteration() {
        let a = Alphabet::new(4).unwrap();
        let cfg = GridConfig::new(8, 8, 1e6, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let taps = synth_four_tap(&cfg, &mut rng).unwrap();
        let s = taps_to_dd(&taps);
        let (_, x) = random_symbols(&a, 8, 8, &mut rng);
        let y = apply_dd(&s, &x).unwrap();
        let sys = vectorize(&s, 1e-3).unwrap().with_noise_variance(0.1).unwrap();
        for it in 1..=6 {
            let params = MpParams { max_iterations: it, tolerance: 1e-300, ..Default::default() };
            let out = mp_detect(&y, &sys, &a, &params).unwrap();
            assert_eq!(out.iterations, it);
            for c in 0..64 {
                assert!((out.posterior(c).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn errors() {
        let a = Alphabet::new(4).unwrap();
        let sys = vectorize(&DDChannel::identity(2, 2), 0.0).unwrap();
        let y = SymbolGrid::zeros(2, 3, Domain::DelayDoppler);
        assert!(matches!(mp_detect(&y, &sys, &a, &MpParams::default()), Err(Error::DimensionMismatch { .. })));
        let mut y = SymbolGrid::zeros(2, 2, Domain::DelayDoppler);
        y.data_mut()[[1, 1]] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(mp_detect(&y, &sys, &a, &MpParams::default()), Err(Error::NonFinite(_))));
        let bad = MpParams { damping: 0.0, ..Default::default() };
        assert!(mp_detect(&SymbolGrid::zeros(2, 2, Domain::DelayDoppler), &sys, &a, &bad).is_err());
        let tf = SymbolGrid::zeros(2, 2, Domain::TimeFrequency);
        assert!(matches!(mp_detect(&tf, &sys, &a, &MpParams::default()), Err(Error::WrongDomain { .. })));
    }

    /// One undamped iteration on a fixed two-tap frame. Frozen output of the
    /// implementation; guards against accidental changes to message scheduling.
    #[test]
    fn one_round_snapshot() {
        let a = Alphabet::new(4).unwrap();
        let s = taps_to_dd(
            &TapSet::new(
                2,
                2,
                vec![
                    Tap { delay: 0, doppler: 0, gain: Complex64::new(1.0, 0.0) },
                    Tap { delay: 1, doppler: 1, gain: Complex64::new(0.5, 0.5) },
                ],
            )
            .unwrap(),
        );
        let x = SymbolGrid::from_vec(2, 2, [0, 1, 2, 3].iter().map(|&i| a.point(i)).collect(), Domain::DelayDoppler).unwrap();
        let y = apply_dd(&s, &x).unwrap();
        let sys = vectorize(&s, 0.0).unwrap().with_noise_variance(0.05).unwrap();
        let params = MpParams { max_iterations: 1, damping: 1.0, tolerance: 1e-4 };
        let out = mp_detect(&y, &sys, &a, &params).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(!out.converged);
        assert_eq!(out.decisions, SNAPSHOT_DECISIONS);
        let p0: Vec<f64> = out.posterior(0).to_vec();
        for (got, want) in p0.iter().zip(SNAPSHOT_POSTERIOR_0) {
            assert!((got - want).abs() < 1e-12, "{p0:?}");
        }
    }

    const SNAPSHOT_DECISIONS: [usize; 4] = [0, 1, 2, 3];
    const SNAPSHOT_POSTERIOR_0: [f64; 4] = [0.6754657703666607, 0.26060908624120627, 0.04612798423369551, 0.01779715915843765];

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn permutation_equivariant(seed in any::<u64>()) {
            let a = Alphabet::new(4).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (n, m) = (4, 4);
            let taps = synth_rayleigh_taps(n, m, &[(0, 0), (1, 2), (3, 1)], &mut rng).unwrap();
            let s = taps_to_dd(&taps);
            let (_, x) = random_symbols(&a, n, m, &mut rng);
            let mut y = apply_dd(&s, &x).unwrap();
            for z in y.data_mut().iter_mut() {
                *z += Complex64::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
            }
            let sys = vectorize(&s, 1e-3).unwrap().with_noise_variance(0.05).unwrap();
            let out = mp_detect(&y, &sys, &a, &MpParams::default()).unwrap();

            let mut perm: Vec<usize> = (0..n * m).collect();
            perm.shuffle(&mut rng);
            let psys = sys.permuted(&perm).unwrap();
            let mut py = vec![Complex64::new(0.0, 0.0); n * m];
            for (i, z) in y.data().iter().enumerate() {
                py[perm[i]] = *z;
            }
            let py = SymbolGrid::from_vec(n, m, py, Domain::DelayDoppler).unwrap();
            let pout = mp_detect(&py, &psys, &a, &MpParams::default()).unwrap();
            for i in 0..n * m {
                let (p1, p2) = (out.posterior(i), pout.posterior(perm[i]));
                let margin = {
                    let mut s = p1.to_vec();
                    s.sort_by(|a, b| b.total_cmp(a));
                    s[0] - s[1]
                };
                if margin > 1e-6 {
                    prop_assert_eq!(out.decisions[i], pout.decisions[perm[i]]);
                }
                for k in 0..4 {
                    prop_assert!((p1[k] - p2[k]).abs() < 1e-6);
                }
            }
            prop_assert!(out.iterations <= 30);
            if out.converged {
                prop_assert!(out.last_change < 1e-4);
            }
        }
    }
}
