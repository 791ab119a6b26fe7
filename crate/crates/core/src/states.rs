//! Random product-state sampling and the reference states with known
//! closest separable states.

use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{identity, outer, ComplexMatrix, ComplexVector, DensityMatrix, PureState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// Complex amplitudes, unitarily invariant.
    #[default]
    Complex,
    /// Real amplitudes only. Biases the search for real targets.
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviateSource {
    /// Pairs of standard normal deviates.
    #[default]
    Gaussian,
    /// `e^{2πi x1} sqrt(-2 ln x2)` from uniform x1, x2.
    BoxMuller,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub mode: SamplingMode,
    pub seed: u64,
    pub source: DeviateSource,
}

impl SamplerConfig {
    pub fn seeded(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn real(mut self) -> Self {
        self.mode = SamplingMode::Real;
        self
    }
}

/// One Box-Muller amplitude `e^{2πi x1} sqrt(-2 ln x2)`.
pub fn box_muller(x1: f64, x2: f64) -> Complex64 {
    Complex64::from_polar((-2.0 * x2.ln()).sqrt(), 2.0 * PI * x1)
}

/// Owns a seeded random stream and draws Hilbert-Schmidt uniform states.
#[derive(Debug, Clone)]
pub struct Sampler {
    cfg: SamplerConfig,
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(cfg: SamplerConfig) -> Self {
        Self::with_stream(cfg, 0)
    }

    /// Independent stream for the same seed, used by parallel workers.
    pub fn with_stream(cfg: SamplerConfig, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        Self { cfg, rng }
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    fn amplitude(&mut self) -> Complex64 {
        let z = match self.cfg.source {
            DeviateSource::Gaussian => {
                let re: f64 = self.rng.sample(StandardNormal);
                let im: f64 = match self.cfg.mode {
                    SamplingMode::Complex => self.rng.sample(StandardNormal),
                    SamplingMode::Real => 0.0,
                };
                Complex64::new(re, im)
            }
            DeviateSource::BoxMuller => {
                let x1: f64 = self.rng.random();
                // x2 in (0, 1] keeps the logarithm finite
                let x2 = 1.0 - self.rng.random::<f64>();
                box_muller(x1, x2)
            }
        };
        match self.cfg.mode {
            SamplingMode::Complex => z,
            SamplingMode::Real => Complex64::new(z.re, 0.0),
        }
    }

    /// Raw normalized amplitude vector of dimension `d`.
    pub fn sample_vector(&mut self, d: usize) -> Result<ComplexVector> {
        if d < 2 {
            return Err(Error::Parameter(format!("dimension must be >= 2, got {d}")));
        }
        loop {
            let v = DVector::from_fn(d, |_, _| self.amplitude());
            let norm = v.norm();
            // an all-zero draw has probability zero; redraw rather than fail
            if norm > 0.0 {
                return Ok(v.unscale(norm));
            }
        }
    }

    pub fn sample_pure(&mut self, d: usize) -> Result<PureState> {
        PureState::new(self.sample_vector(d)?)
    }

    /// Product vector ⊗_i |ψ_i> with independent factors.
    pub fn sample_product_vector(&mut self, dims: &[usize]) -> Result<ComplexVector> {
        let (first, rest) = dims
            .split_first()
            .ok_or_else(|| Error::Parameter("empty dims".into()))?;
        let mut v = self.sample_vector(*first)?;
        for &d in rest {
            v = v.kronecker(&self.sample_vector(d)?);
        }
        Ok(v)
    }

    pub fn sample_product_factors(&mut self, dims: &[usize]) -> Result<Vec<PureState>> {
        dims.iter().map(|&d| self.sample_pure(d)).collect()
    }

    /// Random pure product state as a density matrix.
    pub fn sample_product(&mut self, dims: &[usize]) -> Result<DensityMatrix> {
        let v = self.sample_product_vector(dims)?;
        Ok(DensityMatrix::from_parts_unchecked(
            dims.to_vec(),
            outer(&v),
        ))
    }
}

fn require_at_least_two(what: &str, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Parameter(format!("{what} must be >= 2, got {n}")));
    }
    Ok(())
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Projector onto (1/√d) Σ_i |i,i>.
pub fn max_entangled(d: usize) -> Result<DensityMatrix> {
    require_at_least_two("local dimension", d)?;
    let n = d * d;
    let mut m = ComplexMatrix::zeros(n, n);
    let w = 1.0 / d as f64;
    for i in 0..d {
        for j in 0..d {
            m[(i * d + i, j * d + j)] = c(w);
        }
    }
    Ok(DensityMatrix::from_parts_unchecked(vec![d, d], m))
}

/// Two-qubit Bell state, `max_entangled(2)`.
pub fn bell() -> DensityMatrix {
    max_entangled(2).expect("d = 2 is valid")
}

/// Closest separable state of `max_entangled(d)`: weight 1/(d+1) on the
/// entangled projector, d/(d+1) on white noise.
pub fn css_max_entangled(d: usize) -> Result<DensityMatrix> {
    let phi = max_entangled(d)?;
    let df = d as f64;
    let n = d * d;
    let m = phi.matrix().scale(1.0 / (df + 1.0)) + identity(n).scale(df / (df + 1.0) / n as f64);
    Ok(DensityMatrix::from_parts_unchecked(vec![d, d], m))
}

/// Projector onto (|0…0> + |1…1>)/√2 for `parties` qubits.
pub fn ghz(parties: usize) -> Result<DensityMatrix> {
    require_at_least_two("number of parties", parties)?;
    let n = 1usize << parties;
    let mut m = ComplexMatrix::zeros(n, n);
    for &(i, j) in &[(0, 0), (0, n - 1), (n - 1, 0), (n - 1, n - 1)] {
        m[(i, j)] = c(0.5);
    }
    Ok(DensityMatrix::from_parts_unchecked(vec![2; parties], m))
}

/// Mixing weight x_N = (2^N - 2)^2 / (4 + 4^N - 2^{N+1}).
pub fn css_ghz_weight(parties: usize) -> f64 {
    let p = 2f64.powi(parties as i32);
    (p - 2.0).powi(2) / (4.0 + p * p - 2.0 * p)
}

/// Closed form of the squared distance from `ghz(N)` to its closest
/// separable state: (2^N - 2) / (-4 + 2^{3-N} + 2^{N+1}).
pub fn ghz_css_distance_sq(parties: usize) -> f64 {
    let n = parties as i32;
    (2f64.powi(n) - 2.0) / (-4.0 + 2f64.powi(3 - n) + 2f64.powi(n + 1))
}

/// Closest separable state of `ghz(N)`.
pub fn css_ghz(parties: usize) -> Result<DensityMatrix> {
    require_at_least_two("number of parties", parties)?;
    let n = 1usize << parties;
    let x = css_ghz_weight(parties);
    // corner-diagonal part, weight 1/2 each
    let mut sigma1 = ComplexMatrix::zeros(n, n);
    sigma1[(0, 0)] = c(0.5);
    sigma1[(n - 1, n - 1)] = c(0.5);
    // flat diagonal plus the far corners
    let mut sigma2 = identity(n).unscale(n as f64);
    sigma2[(0, n - 1)] = c(1.0 / n as f64);
    sigma2[(n - 1, 0)] = c(1.0 / n as f64);
    let m = sigma1.scale(x) + sigma2.scale(1.0 - x);
    Ok(DensityMatrix::from_parts_unchecked(vec![2; parties], m))
}

/// The five product vectors of the two-qutrit Tiles unextendible product basis.
pub fn upb_tiles_vectors() -> [ComplexVector; 5] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let ket = |a: [f64; 3]| ComplexVector::from_iterator(3, a.iter().map(|&x| c(x)));
    let e0 = ket([1., 0., 0.]);
    let e2 = ket([0., 0., 1.]);
    let m01 = ket([s, -s, 0.]);
    let m12 = ket([0., s, -s]);
    let third = 1.0 / 3f64.sqrt();
    let all = ket([third, third, third]);
    [
        e0.kronecker(&m01),
        e2.kronecker(&m12),
        m01.kronecker(&e2),
        m12.kronecker(&e0),
        all.kronecker(&all),
    ]
}

/// Bound entangled state (I - Σ|ψ_i><ψ_i|)/4 built from the Tiles UPB.
pub fn upb_tiles_state() -> DensityMatrix {
    let mut m = identity(9);
    for v in upb_tiles_vectors() {
        m -= outer(&v);
    }
    DensityMatrix::from_parts_unchecked(vec![3, 3], m.unscale(4.0))
}

/// Limit reached on the Bell state when only real trial states are drawn:
/// (1/8)[[3,0,0,1],[0,1,1,0],[0,1,1,0],[1,0,0,3]].
pub fn real_limit_bell() -> DensityMatrix {
    let entries = [
        3., 0., 0., 1., //
        0., 1., 1., 0., //
        0., 1., 1., 0., //
        1., 0., 0., 3.,
    ];
    let m = ComplexMatrix::from_row_iterator(4, 4, entries.iter().map(|&x| c(x / 8.0)));
    DensityMatrix::from_parts_unchecked(vec![2, 2], m)
}

/// Named reference states accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedState {
    Bell,
    MaxEntangled(usize),
    MaxEntangledCss(usize),
    Ghz(usize),
    GhzCss(usize),
    UpbTiles,
    RealLimitBell,
}

impl NamedState {
    pub fn build(self) -> Result<DensityMatrix> {
        match self {
            NamedState::Bell => Ok(bell()),
            NamedState::MaxEntangled(d) => max_entangled(d),
            NamedState::MaxEntangledCss(d) => css_max_entangled(d),
            NamedState::Ghz(n) => ghz(n),
            NamedState::GhzCss(n) => css_ghz(n),
            NamedState::UpbTiles => Ok(upb_tiles_state()),
            NamedState::RealLimitBell => Ok(real_limit_bell()),
        }
    }
}

impl FromStr for NamedState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let number = |a: Option<&str>| -> Result<usize> {
            let a = a.ok_or_else(|| Error::Parameter(format!("state `{s}` needs a size")))?;
            a.trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("bad size in state `{s}`")))
        };
        let named = match head {
            "bell" if arg.is_none() => NamedState::Bell,
            "max_entangled" => NamedState::MaxEntangled(number(arg)?),
            "max_entangled_css" => NamedState::MaxEntangledCss(number(arg)?),
            "ghz" => NamedState::Ghz(number(arg)?),
            "ghz_css" => NamedState::GhzCss(number(arg)?),
            "upb_tiles" if arg.is_none() => NamedState::UpbTiles,
            "real_limit_bell" if arg.is_none() => NamedState::RealLimitBell,
            _ => return Err(Error::Parameter(format!("unknown state name `{s}`"))),
        };
        Ok(named)
    }
}

/// Parses and builds a named state.
pub fn named_state(name: &str) -> Result<DensityMatrix> {
    name.parse::<NamedState>()?.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigenvalues, hs_inner, hsd_sq, min_ppt_eigenvalue, DensityMatrix};
    use approx::assert_abs_diff_eq;

    fn validate(rho: &DensityMatrix) {
        DensityMatrix::new(rho.dims().to_vec(), rho.matrix().clone()).unwrap();
    }

    fn werner() -> ComplexMatrix {
        let e = [
            2., 0., 0., 1., 0., 1., 0., 0., 0., 0., 1., 0., 1., 0., 0., 2.,
        ];
        ComplexMatrix::from_row_iterator(4, 4, e.iter().map(|&x| c(x / 6.0)))
    }

    #[test]
    fn sampled_states_are_normalized() {
        for source in [DeviateSource::Gaussian, DeviateSource::BoxMuller] {
            for mode in [SamplingMode::Complex, SamplingMode::Real] {
                let mut s = Sampler::new(SamplerConfig {
                    mode,
                    seed: 3,
                    source,
                });
                for d in 2..6 {
                    let psi = s.sample_pure(d).unwrap();
                    assert_abs_diff_eq!(psi.amplitudes().norm(), 1.0, epsilon = 1e-12);
                    if mode == SamplingMode::Real {
                        assert!(psi.amplitudes().iter().all(|z| z.im == 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn sample_pure_rejects_small_dimension() {
        let mut s = Sampler::new(SamplerConfig::default());
        assert!(matches!(s.sample_pure(1), Err(Error::Parameter(_))));
        assert!(s.sample_product(&[2, 1]).is_err());
    }

    #[test]
    fn box_muller_vanishes_at_unit_x2() {
        assert_eq!(box_muller(0.37, 1.0).norm(), 0.0);
        assert_abs_diff_eq!(box_muller(0.0, (-0.5f64).exp()).re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn first_component_mean_is_one_over_d() {
        for source in [DeviateSource::Gaussian, DeviateSource::BoxMuller] {
            let mut s = Sampler::new(SamplerConfig {
                seed: 11,
                source,
                ..Default::default()
            });
            let n = 100_000;
            let mean: f64 = (0..n)
                .map(|_| s.sample_vector(3).unwrap()[0].norm_sqr())
                .sum::<f64>()
                / n as f64;
            assert!((mean - 1.0 / 3.0).abs() < 0.01, "{source:?}: {mean}");
        }
    }

    #[test]
    fn outer_product_average_is_maximally_mixed() {
        let mut s = Sampler::new(SamplerConfig::seeded(5));
        let d = 3;
        let n = 100_000;
        let mut acc = ComplexMatrix::zeros(d, d);
        for _ in 0..n {
            acc += outer(&s.sample_vector(d).unwrap());
        }
        let avg = acc.unscale(n as f64);
        let target = identity(d).unscale(d as f64);
        for (a, b) in avg.iter().zip(target.iter()) {
            assert!((a - b).norm() < 0.01);
        }
    }

    #[test]
    fn seeded_streams_are_reproducible() {
        let cfg = SamplerConfig::seeded(42);
        let a: Vec<_> = {
            let mut s = Sampler::new(cfg);
            (0..5)
                .map(|_| s.sample_product_vector(&[2, 3]).unwrap())
                .collect()
        };
        let b: Vec<_> = {
            let mut s = Sampler::new(cfg);
            (0..5)
                .map(|_| s.sample_product_vector(&[2, 3]).unwrap())
                .collect()
        };
        assert_eq!(a, b);
        let other = Sampler::with_stream(cfg, 1)
            .sample_product_vector(&[2, 3])
            .unwrap();
        assert_ne!(a[0], other);
    }

    #[test]
    fn product_samples_are_pure_and_ppt() {
        let mut s = Sampler::new(SamplerConfig::seeded(9));
        for dims in [vec![2, 2], vec![2, 3], vec![2, 2, 2]] {
            let rho = s.sample_product(&dims).unwrap();
            validate(&rho);
            assert_abs_diff_eq!(rho.matrix().trace().re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-10);
            assert!(min_ppt_eigenvalue(&rho).unwrap() >= -1e-10);
        }
    }

    #[test]
    fn max_entangled_examples() {
        let phi = max_entangled(2).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let corner = (i == 0 || i == 3) && (j == 0 || j == 3);
                assert_eq!(phi.matrix()[(i, j)], c(if corner { 0.5 } else { 0.0 }));
            }
        }
        for d in 2..6 {
            let phi = max_entangled(d).unwrap();
            validate(&phi);
            assert_abs_diff_eq!(phi.purity(), 1.0, epsilon = 1e-12);
        }
        let phi3 = max_entangled(3).unwrap();
        let mixed = identity(9).unscale(9.0);
        assert_abs_diff_eq!(
            hs_inner(phi3.matrix(), &mixed).unwrap(),
            1.0 / 9.0,
            epsilon = 1e-15
        );
        assert!(max_entangled(1).is_err());
    }

    #[test]
    fn css_max_entangled_examples() {
        let css = css_max_entangled(2).unwrap();
        assert_abs_diff_eq!(
            crate::linalg::frobenius_dist_sq(css.matrix(), &werner()),
            0.0,
            epsilon = 1e-30
        );
        for d in 2..=6 {
            let df = d as f64;
            let got = hsd_sq(&max_entangled(d).unwrap(), &css_max_entangled(d).unwrap()).unwrap();
            assert_abs_diff_eq!(got, (df - 1.0) / (df + 1.0), epsilon = 1e-12);
            validate(&css_max_entangled(d).unwrap());
        }
        assert_abs_diff_eq!(min_ppt_eigenvalue(&css).unwrap(), 0.0, epsilon = 1e-14);
        assert!(css_max_entangled(0).is_err());
    }

    #[test]
    fn ghz_examples() {
        assert_eq!(ghz(2).unwrap(), max_entangled(2).unwrap());
        let g3 = ghz(3).unwrap();
        assert_eq!(g3.dims(), &[2, 2, 2]);
        for i in 0..8 {
            for j in 0..8 {
                let corner = (i == 0 || i == 7) && (j == 0 || j == 7);
                assert_eq!(g3.matrix()[(i, j)], c(if corner { 0.5 } else { 0.0 }));
            }
        }
        for n in 2..6 {
            assert_abs_diff_eq!(ghz(n).unwrap().purity(), 1.0, epsilon = 1e-12);
        }
        assert!(ghz(1).is_err());
    }

    #[test]
    fn css_ghz_examples() {
        assert_abs_diff_eq!(css_ghz_weight(2), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(css_ghz_weight(3), 9.0 / 13.0, epsilon = 1e-15);
        let css2 = css_ghz(2).unwrap();
        assert_abs_diff_eq!(
            crate::linalg::frobenius_dist_sq(css2.matrix(), &werner()),
            0.0,
            epsilon = 1e-30
        );
        for (n, want) in [(2, 1.0 / 3.0), (3, 6.0 / 13.0), (4, 28.0 / 57.0)] {
            let got = hsd_sq(&ghz(n).unwrap(), &css_ghz(n).unwrap()).unwrap();
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
            assert_abs_diff_eq!(ghz_css_distance_sq(n), want, epsilon = 1e-14);
            validate(&css_ghz(n).unwrap());
        }
    }

    #[test]
    fn tiles_basis_is_orthonormal() {
        let v = upb_tiles_vectors();
        for (i, a) in v.iter().enumerate() {
            for (j, b) in v.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(a.dotc(b).norm(), want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn upb_state_properties() {
        let rho = upb_tiles_state();
        validate(&rho);
        let ev = eigenvalues(rho.matrix()).unwrap();
        assert_abs_diff_eq!(ev[0], 0.0, epsilon = 1e-12);
        let rank = ev.iter().filter(|&&x| x > 1e-9).count();
        assert_eq!(rank, 4);
        assert_abs_diff_eq!(rho.matrix().trace().re, 1.0, epsilon = 1e-12);
        assert!(min_ppt_eigenvalue(&rho).unwrap() >= -1e-10);
    }

    #[test]
    fn real_limit_examples() {
        let r = real_limit_bell();
        validate(&r);
        assert_abs_diff_eq!(hsd_sq(&bell(), &r).unwrap(), 3.0 / 8.0, epsilon = 1e-15);
    }

    #[test]
    fn named_grammar() {
        assert_eq!("bell".parse::<NamedState>().unwrap(), NamedState::Bell);
        assert_eq!("ghz:3".parse::<NamedState>().unwrap(), NamedState::Ghz(3));
        assert_eq!(
            "max_entangled_css:4".parse::<NamedState>().unwrap(),
            NamedState::MaxEntangledCss(4)
        );
        assert_eq!(
            "ghz_css:4".parse::<NamedState>().unwrap(),
            NamedState::GhzCss(4)
        );
        assert_eq!(
            "upb_tiles".parse::<NamedState>().unwrap(),
            NamedState::UpbTiles
        );
        for bad in ["", "bell:2", "ghz", "ghz:x", "werner", "upb_tiles:3"] {
            assert!(bad.parse::<NamedState>().is_err(), "{bad}");
        }
        assert!(named_state("ghz:1").is_err());
        assert_eq!(named_state("max_entangled:2").unwrap(), bell());
    }
}
