//! Downlink system model `y = H P s + n`, Rayleigh channel draws and MSE evaluation.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::ComplexMatrix;

/// Antenna and user counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDims {
    pub antennas: usize,
    pub users: usize,
}

impl SystemDims {
    pub fn new(antennas: usize, users: usize) -> Result<Self> {
        if antennas == 0 {
            return Err(invalid("antenna count M must be at least 1"));
        }
        if users == 0 {
            return Err(invalid("user count K must be at least 1"));
        }
        Ok(Self { antennas, users })
    }

    /// More users than antennas: legal, but outside the spatial multiplexing regime.
    pub fn is_overloaded(&self) -> bool {
        self.users > self.antennas
    }

    /// Human-readable warnings for legal but unusual dimensions.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.is_overloaded() {
            out.push(format!(
                "K = {} users exceeds M = {} antennas; linear precoders cannot separate all streams",
                self.users, self.antennas
            ));
        }
        out
    }
}

/// Seed plus stream index for a reproducible ChaCha8 generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// One channel realization together with the physical constants of the link.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemInstance {
    dims: SystemDims,
    channel: ComplexMatrix,
    power: f64,
    noise: f64,
    gamma: f64,
}

impl SystemInstance {
    /// `channel` is the K x M downlink matrix, `power` the budget q, `noise` the
    /// per-user noise variance N0 and `gamma` the channel entry variance.
    ///
    /// `noise = 0` is accepted as the noiseless limit; the SNR is then infinite.
    pub fn new(channel: ComplexMatrix, power: f64, noise: f64, gamma: f64) -> Result<Self> {
        let (users, antennas) = channel.shape();
        let dims = SystemDims::new(antennas, users)?;
        if !(power.is_finite() && power > 0.0) {
            return Err(invalid(format!("power budget q must be positive, got {power}")));
        }
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(invalid(format!("noise variance N0 must be non-negative, got {noise}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid(format!("channel variance gamma must be positive, got {gamma}")));
        }
        Ok(Self {
            dims,
            channel,
            power,
            noise,
            gamma,
        })
    }

    /// Instance with gamma = 1, N0 = 1 and q chosen so that `q * gamma / N0` equals `snr_db`.
    pub fn at_snr_db(channel: ComplexMatrix, snr_db: f64) -> Result<Self> {
        Self::new(channel, db_to_linear(snr_db), 1.0, 1.0)
    }

    pub fn dims(&self) -> SystemDims {
        self.dims
    }

    pub fn antennas(&self) -> usize {
        self.dims.antennas
    }

    pub fn users(&self) -> usize {
        self.dims.users
    }

    pub fn channel(&self) -> &ComplexMatrix {
        &self.channel
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Common SNR `q * gamma / N0`.
    pub fn snr(&self) -> f64 {
        if self.noise == 0.0 {
            f64::INFINITY
        } else {
            self.power * self.gamma / self.noise
        }
    }

    pub(crate) fn check_precoder(&self, precoder: &ComplexMatrix) -> Result<()> {
        precoder.expect_shape(self.antennas(), self.users(), "precoder")
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn complex_normal(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(scale * re, scale * im)
}

/// I.i.d. circularly-symmetric complex Gaussian K x M channel with entry variance `gamma`.
pub fn generate_channel(dims: SystemDims, gamma: f64, seed: RngSeed) -> Result<ComplexMatrix> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid(format!("channel variance gamma must be positive, got {gamma}")));
    }
    let mut rng = seed.rng();
    let mut entries = Vec::with_capacity(dims.users * dims.antennas);
    for _ in 0..dims.users * dims.antennas {
        entries.push(complex_normal(&mut rng, gamma));
    }
    ComplexMatrix::from_row_major(dims.users, dims.antennas, &entries)
}

/// Exact receive MSE `E||s - beta y||^2` for unit-power uncorrelated symbols:
/// `tr(|b|^2 P^H H^H H P - b H P - b* P^H H^H) + K (|b|^2 N0 + 1)`.
pub fn mse_closed_form(inst: &SystemInstance, precoder: &ComplexMatrix, beta: Complex64) -> Result<f64> {
    inst.check_precoder(precoder)?;
    if !(beta.re.is_finite() && beta.im.is_finite()) {
        return Err(invalid("beta must be finite"));
    }
    let effective = inst.channel().matmul(precoder)?;
    let b2 = beta.norm_sqr();
    let k = inst.users() as f64;
    let cross = 2.0 * (beta * effective.trace()).re;
    Ok(b2 * effective.frobenius_norm_sq() - cross + k * (b2 * inst.noise() + 1.0))
}

/// Sample mean and standard error of the receive MSE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Monte Carlo estimate of `E||s - beta (H P s + n)||^2` with `s ~ CN(0, I)` and
/// `n ~ CN(0, N0 I)`.
pub fn mse_monte_carlo(
    inst: &SystemInstance,
    precoder: &ComplexMatrix,
    beta: Complex64,
    trials: usize,
    seed: RngSeed,
) -> Result<MonteCarloEstimate> {
    inst.check_precoder(precoder)?;
    if trials == 0 {
        return Err(invalid("Monte Carlo trial count must be at least 1"));
    }
    let k = inst.users();
    let effective = inst.channel().matmul(precoder)?;
    let g = effective.as_dmatrix();
    let mut rng = seed.rng();
    let mut symbols = vec![Complex64::new(0.0, 0.0); k];
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for t in 0..trials {
        for s in symbols.iter_mut() {
            *s = complex_normal(&mut rng, 1.0);
        }
        let mut err = 0.0;
        for row in 0..k {
            let mut y = complex_normal(&mut rng, inst.noise());
            for (col, s) in symbols.iter().enumerate() {
                y += g[(row, col)] * s;
            }
            err += (symbols[row] - beta * y).norm_sqr();
        }
        // Welford update
        let delta = err - mean;
        mean += delta / (t + 1) as f64;
        m2 += delta * (err - mean);
    }
    let std_error = if trials > 1 {
        (m2 / (trials - 1) as f64 / trials as f64).sqrt()
    } else {
        0.0
    };
    Ok(MonteCarloEstimate { mean, std_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn scalar_instance(h: f64, q: f64, n0: f64) -> SystemInstance {
        SystemInstance::new(ComplexMatrix::from_real(1, 1, &[h]).unwrap(), q, n0, 1.0).unwrap()
    }

    #[test]
    fn dims_reject_zero() {
        assert!(SystemDims::new(0, 1).is_err());
        assert!(SystemDims::new(4, 0).is_err());
        let d = SystemDims::new(2, 4).unwrap();
        assert!(d.is_overloaded());
        assert_eq!(d.warnings().len(), 1);
    }

    #[test]
    fn channel_rejects_non_positive_gamma() {
        let dims = SystemDims::new(4, 2).unwrap();
        assert!(matches!(
            generate_channel(dims, 0.0, RngSeed::new(1, 0)),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn channel_is_deterministic_per_seed() {
        let dims = SystemDims::new(4, 2).unwrap();
        let a = generate_channel(dims, 1.0, RngSeed::new(7, 3)).unwrap();
        let b = generate_channel(dims, 1.0, RngSeed::new(7, 3)).unwrap();
        let c = generate_channel(dims, 1.0, RngSeed::new(7, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.shape(), (2, 4));
    }

    #[test]
    fn channel_entry_variance_matches_gamma() {
        let dims = SystemDims::new(4, 2).unwrap();
        for gamma in [1.0, 2.5] {
            let mut total = 0.0;
            let mut count = 0usize;
            for stream in 0..12_500u64 {
                let h = generate_channel(dims, gamma, RngSeed::new(11, stream)).unwrap();
                total += h.frobenius_norm_sq();
                count += 8;
            }
            let mean = total / count as f64;
            assert!((mean / gamma - 1.0).abs() < 0.02, "gamma {gamma}: {mean}");
        }
    }

    #[test]
    fn perfect_scalar_inversion_has_zero_mse() {
        let inst = scalar_instance(1.0, 1.0, 0.0);
        let p = ComplexMatrix::from_real(1, 1, &[1.0]).unwrap();
        let mse = mse_closed_form(&inst, &p, Complex64::new(1.0, 0.0)).unwrap();
        assert!(mse.abs() < 1e-15);
        let mc = mse_monte_carlo(&inst, &p, Complex64::new(1.0, 0.0), 1000, RngSeed::new(1, 0)).unwrap();
        assert!(mc.mean.abs() < 1e-12);
    }

    #[test]
    fn zero_precoder_leaves_constant_terms() {
        let h = generate_channel(SystemDims::new(3, 2).unwrap(), 1.0, RngSeed::new(5, 0)).unwrap();
        let inst = SystemInstance::new(h, 2.0, 0.3, 1.0).unwrap();
        let beta = Complex64::new(0.4, -1.1);
        let mse = mse_closed_form(&inst, &ComplexMatrix::zeros(3, 2), beta).unwrap();
        let expected = 2.0 * (beta.norm_sqr() * 0.3 + 1.0);
        assert!((mse - expected).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_zero_precoder_gives_k() {
        let h = generate_channel(SystemDims::new(3, 2).unwrap(), 1.0, RngSeed::new(5, 0)).unwrap();
        let inst = SystemInstance::new(h, 2.0, 0.3, 1.0).unwrap();
        let p = ComplexMatrix::zeros(3, 2);
        let small = mse_monte_carlo(&inst, &p, Complex64::new(0.0, 0.0), 1_000, RngSeed::new(2, 0)).unwrap();
        let large = mse_monte_carlo(&inst, &p, Complex64::new(0.0, 0.0), 100_000, RngSeed::new(2, 0)).unwrap();
        assert!((large.mean - 2.0).abs() < 4.0 * large.std_error);
        assert!(large.std_error < small.std_error);
    }

    #[test]
    fn shape_errors() {
        let inst = scalar_instance(1.0, 1.0, 1.0);
        let p = ComplexMatrix::zeros(2, 1);
        assert!(matches!(
            mse_closed_form(&inst, &p, Complex64::new(1.0, 0.0)),
            Err(Error::Shape { .. })
        ));
        assert!(mse_monte_carlo(&inst, &ComplexMatrix::zeros(1, 1), Complex64::new(1.0, 0.0), 0, RngSeed::new(0, 0)).is_err());
    }

    #[test]
    fn instance_validation() {
        let h = ComplexMatrix::from_real(1, 1, &[1.0]).unwrap();
        assert!(SystemInstance::new(h.clone(), 0.0, 1.0, 1.0).is_err());
        assert!(SystemInstance::new(h.clone(), 1.0, -1.0, 1.0).is_err());
        assert!(SystemInstance::new(h.clone(), 1.0, 1.0, 0.0).is_err());
        let inst = SystemInstance::at_snr_db(h, 10.0).unwrap();
        assert!((inst.snr() - 10.0).abs() < 1e-12);
    }
}
