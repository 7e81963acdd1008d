//! Infinite-resolution baselines (Wiener filter, MRT), receiver scaling factors,
//! and the quantize-then-rescale baseline.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::ComplexMatrix;
use crate::model::SystemInstance;
use crate::quantizer::{make_quantizer, optimize_step_size, quantize_complex_matrix, GaussianSource, QuantizerSpec};

/// Which alphabet the entries of a precoder are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Alphabet {
    Continuous,
    /// Entries are `alpha * (l_r + j l_i)` with labels of a uniform quantizer.
    ScaledLattice { delta: f64, levels: usize, alpha: f64 },
}

/// An M x K precoder together with its alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderMatrix {
    matrix: ComplexMatrix,
    alphabet: Alphabet,
}

impl PrecoderMatrix {
    pub fn new(matrix: ComplexMatrix, alphabet: Alphabet) -> Self {
        Self { matrix, alphabet }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Transmit power `||P||_F^2`.
    pub fn power(&self) -> f64 {
        self.matrix.frobenius_norm_sq()
    }
}

/// Common receiver scaling `s_hat = beta * y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beta(pub Complex64);

impl Beta {
    pub fn real(value: f64) -> Self {
        Self(Complex64::new(value, 0.0))
    }

    pub fn value(&self) -> Complex64 {
        self.0
    }
}

/// `(H H^H + (K N0 / q) I)^{-1}`.
fn regularized_gram_inverse(inst: &SystemInstance) -> Result<DMatrix<Complex64>> {
    let h = inst.channel().as_dmatrix();
    let k = inst.users();
    let reg = k as f64 * inst.noise() / inst.power();
    let gram = h * h.adjoint() + DMatrix::<Complex64>::identity(k, k) * Complex64::new(reg, 0.0);
    gram.try_inverse()
        .filter(|inv| inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        .ok_or_else(|| Error::Singular("H H^H + (K N0 / q) I is not invertible".into()))
}

/// Wiener filter precoder `P = alpha_bar * H^H (H H^H + (K N0 / q) I)^{-1}`, scaled
/// to use the full power budget.
pub fn wf_precoder(inst: &SystemInstance) -> Result<PrecoderMatrix> {
    let inv = regularized_gram_inverse(inst)?;
    let w = inst.channel().as_dmatrix().adjoint() * inv;
    let norm_sq: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    if norm_sq == 0.0 {
        return Err(Error::Singular("Wiener filter is identically zero".into()));
    }
    let alpha = (inst.power() / norm_sq).sqrt();
    let p = ComplexMatrix::from_dmatrix(w * Complex64::new(alpha, 0.0))?;
    Ok(PrecoderMatrix::new(p, Alphabet::Continuous))
}

/// Maximum ratio transmission `P = c H^H` with `||P||_F^2 = q`.
pub fn mrt_precoder(inst: &SystemInstance) -> Result<PrecoderMatrix> {
    let h = inst.channel();
    let norm_sq = h.frobenius_norm_sq();
    if norm_sq == 0.0 {
        return Err(invalid("MRT needs a nonzero channel"));
    }
    let c = (inst.power() / norm_sq).sqrt();
    Ok(PrecoderMatrix::new(h.adjoint().scale(Complex64::new(c, 0.0)), Alphabet::Continuous))
}

/// `beta_WF = q^{-1/2} [tr(H^H (H H^H + (K N0 / q) I)^{-2} H)]^{1/2}`, the optimal
/// scaling for the Wiener filter precoder.
pub fn beta_wf(inst: &SystemInstance) -> Result<Beta> {
    let inv = regularized_gram_inverse(inst)?;
    let t = inv * inst.channel().as_dmatrix();
    let trace: f64 = t.iter().map(|z| z.norm_sqr()).sum();
    let value = (trace / inst.power()).sqrt();
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::Singular(format!("beta_WF evaluated to {value}")));
    }
    Ok(Beta::real(value))
}

/// MSE-optimal scaling for a fixed precoder,
/// `tr(P^H H^H) / (tr(P^H H^H H P) + K N0)`.
pub fn beta_opt(inst: &SystemInstance, precoder: &ComplexMatrix) -> Result<Beta> {
    inst.check_precoder(precoder)?;
    let effective = inst.channel().matmul(precoder)?;
    let numerator = effective.trace().conj();
    let denominator = effective.frobenius_norm_sq() + inst.users() as f64 * inst.noise();
    if denominator == 0.0 {
        return Err(Error::Singular(
            "beta_opt undefined: zero effective channel and zero noise".into(),
        ));
    }
    Ok(Beta(numerator / denominator))
}

/// Quantizer used for precoder entries: step optimized for a Gaussian input of
/// variance `q / (2 M)` per real dimension.
pub fn precoder_quantizer(inst: &SystemInstance, levels: usize) -> Result<QuantizerSpec> {
    let source = GaussianSource::new(inst.power() / (2.0 * inst.antennas() as f64))?;
    let design = optimize_step_size(levels, source)?;
    make_quantizer(levels, design.delta)
}

/// Quantize `w` entrywise, then rescale by `alpha = sqrt(q / ||Q(w)||^2)` so the
/// power budget is met with equality.
pub fn quantization_unaware_precoder(
    inst: &SystemInstance,
    spec: &QuantizerSpec,
    w: &ComplexMatrix,
) -> Result<PrecoderMatrix> {
    inst.check_precoder(w)?;
    let quantized = quantize_complex_matrix(spec, w)?;
    let norm_sq = quantized.frobenius_norm_sq();
    if norm_sq == 0.0 {
        return Err(Error::DegenerateQuantization);
    }
    let alpha = (inst.power() / norm_sq).sqrt();
    Ok(PrecoderMatrix::new(
        quantized.scale(Complex64::new(alpha, 0.0)),
        Alphabet::ScaledLattice {
            delta: spec.delta(),
            levels: spec.levels(),
            alpha,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_channel, mse_closed_form, RngSeed, SystemDims};

    fn scalar(h: f64, q: f64, n0: f64) -> SystemInstance {
        SystemInstance::new(ComplexMatrix::from_real(1, 1, &[h]).unwrap(), q, n0, 1.0).unwrap()
    }

    fn random_instance(m: usize, k: usize, q: f64, n0: f64, stream: u64) -> SystemInstance {
        let h = generate_channel(SystemDims::new(m, k).unwrap(), 1.0, RngSeed::new(42, stream)).unwrap();
        SystemInstance::new(h, q, n0, 1.0).unwrap()
    }

    fn cosine(a: &[Complex64], b: &[Complex64]) -> f64 {
        let dot: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
        let na: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        dot.norm() / (na * nb)
    }

    #[test]
    fn scalar_wiener_filter() {
        let inst = scalar(1.0, 1.0, 1.0);
        let p = wf_precoder(&inst).unwrap();
        assert!((p.matrix().get(0, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((beta_wf(&inst).unwrap().value().re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn wf_and_mrt_use_full_power() {
        for stream in 0..20 {
            let inst = random_instance(4, 2, 3.7, 0.8, stream);
            for p in [wf_precoder(&inst).unwrap(), mrt_precoder(&inst).unwrap()] {
                assert!((p.power() / 3.7 - 1.0).abs() < 1e-10);
                assert_eq!(p.alphabet(), Alphabet::Continuous);
            }
        }
    }

    #[test]
    fn scalar_mrt() {
        let p = mrt_precoder(&scalar(1.0, 4.0, 1.0)).unwrap();
        assert!((p.matrix().get(0, 0).re - 2.0).abs() < 1e-15);
        assert!(mrt_precoder(&scalar(0.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn wf_approaches_mrt_at_low_snr() {
        let inst = random_instance(4, 2, 1.0, 1e6, 3);
        let wf = wf_precoder(&inst).unwrap();
        let mrt = mrt_precoder(&inst).unwrap();
        for k in 0..2 {
            let a: Vec<Complex64> = (0..4).map(|m| wf.matrix().get(m, k)).collect();
            let b: Vec<Complex64> = (0..4).map(|m| mrt.matrix().get(m, k)).collect();
            assert!(cosine(&a, &b) > 1.0 - 1e-8);
        }
    }

    #[test]
    fn single_user_wf_is_collinear_with_mrt() {
        for stream in 0..10 {
            let inst = random_instance(6, 1, 2.0, 0.5, stream);
            let wf = wf_precoder(&inst).unwrap().matrix().vec();
            let mrt = mrt_precoder(&inst).unwrap().matrix().vec();
            assert!(cosine(&wf, &mrt) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn beta_opt_edge_cases() {
        let one = ComplexMatrix::from_real(1, 1, &[1.0]).unwrap();
        let b = beta_opt(&scalar(1.0, 1.0, 0.0), &one).unwrap();
        assert!((b.value() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let zero = ComplexMatrix::zeros(1, 1);
        assert_eq!(beta_opt(&scalar(1.0, 1.0, 0.5), &zero).unwrap().value(), Complex64::new(0.0, 0.0));
        assert!(matches!(beta_opt(&scalar(1.0, 1.0, 0.0), &zero), Err(Error::Singular(_))));
    }

    #[test]
    fn beta_wf_is_beta_opt_of_wf() {
        for stream in 0..50 {
            let inst = random_instance(5, 3, 2.0, 0.7, stream);
            let wf = wf_precoder(&inst).unwrap();
            let a = beta_opt(&inst, wf.matrix()).unwrap().value();
            let b = beta_wf(&inst).unwrap().value();
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
            assert!(b.re > 0.0 && b.im == 0.0);
        }
    }

    #[test]
    fn beta_opt_is_locally_optimal() {
        for stream in 0..20 {
            let inst = random_instance(4, 2, 1.5, 0.3, stream);
            let p = mrt_precoder(&inst).unwrap();
            let b = beta_opt(&inst, p.matrix()).unwrap().value();
            let at = |beta: Complex64| mse_closed_form(&inst, p.matrix(), beta).unwrap();
            let base = at(b);
            for eps in [1e-3, -1e-3] {
                assert!(base <= at(b * (1.0 + eps)));
                assert!(base <= at(b * Complex64::new(1.0, eps)));
            }
        }
    }

    #[test]
    fn unaware_precoder_fixed_point() {
        let inst = SystemInstance::new(ComplexMatrix::from_real(1, 2, &[1.0, -0.5]).unwrap(), 0.25, 1.0, 1.0).unwrap();
        let spec = make_quantizer(4, 0.5).unwrap();
        // ||W||^2 = 4 * 0.25^2 = 0.25 = q
        let w = ComplexMatrix::from_row_major(2, 1, &[Complex64::new(0.25, -0.25), Complex64::new(-0.25, 0.25)]).unwrap();
        let p = quantization_unaware_precoder(&inst, &spec, &w).unwrap();
        assert_eq!(p.matrix(), &w);
        match p.alphabet() {
            Alphabet::ScaledLattice { alpha, .. } => assert!((alpha - 1.0).abs() < 1e-15),
            other => panic!("unexpected alphabet {other:?}"),
        }
    }

    #[test]
    fn unaware_precoder_saturates_and_rescales() {
        let inst = random_instance(3, 2, 2.0, 1.0, 1);
        let spec = make_quantizer(4, 0.5).unwrap();
        let w = ComplexMatrix::from_fn(3, 2, |_, _| Complex64::new(-10.0, -10.0)).unwrap();
        let p = quantization_unaware_precoder(&inst, &spec, &w).unwrap();
        let first = p.matrix().get(0, 0);
        for z in p.matrix().to_row_major() {
            assert_eq!(z, first);
            assert!(z.re < 0.0 && z.im < 0.0);
        }
        assert!((p.power() / 2.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unaware_pipeline_on_scalar_wf() {
        let inst = scalar(1.0, 1.0, 1.0);
        let spec = precoder_quantizer(&inst, 4).unwrap();
        let wf = wf_precoder(&inst).unwrap();
        let p = quantization_unaware_precoder(&inst, &spec, wf.matrix()).unwrap();
        assert!((p.power() - 1.0).abs() < 1e-12);
        // Re W = 1 lands in the top cell (3 delta / 2), Im W = 0 in the cell above
        // zero (delta / 2); rescaling gives (3 + j) / sqrt(10).
        let expected = Complex64::new(3.0, 1.0) / 10f64.sqrt();
        assert!((p.matrix().get(0, 0) - expected).norm() < 1e-12);
    }

    #[test]
    fn odd_quantizer_can_zero_out_and_is_rejected() {
        let inst = random_instance(2, 1, 1.0, 1.0, 0);
        let spec = make_quantizer(3, 10.0).unwrap();
        let w = ComplexMatrix::from_fn(2, 1, |_, _| Complex64::new(0.1, -0.1)).unwrap();
        assert_eq!(
            quantization_unaware_precoder(&inst, &spec, &w).unwrap_err(),
            Error::DegenerateQuantization
        );
    }
}
