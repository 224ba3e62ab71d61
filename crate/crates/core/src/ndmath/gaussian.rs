//! Diagonal Gaussian density helpers shared by the tape ops and the plain
//! inference path, so both produce bitwise-identical values.

use crate::error::{Error, Result};

pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;
pub const HALF_LN_2PI_E: f64 = 1.418_938_533_204_672_7;

/// Log density of `action` under `N(mean, diag(exp(logstd))^2)`.
pub fn gaussian_logprob(mean: &[f64], logstd: &[f64], action: &[f64]) -> Result<f64> {
    if mean.is_empty() || mean.len() != logstd.len() || mean.len() != action.len() {
        return Err(Error::Dimension(format!(
            "gaussian_logprob: mean [{}], logstd [{}], action [{}]",
            mean.len(),
            logstd.len(),
            action.len()
        )));
    }
    Ok(logprob_unchecked(mean, logstd, action))
}

pub(crate) fn logprob_unchecked(mean: &[f64], logstd: &[f64], action: &[f64]) -> f64 {
    let mut total = 0.0;
    for ((&mu, &ls), &a) in mean.iter().zip(logstd).zip(action) {
        let z = (a - mu) / ls.exp();
        total += -0.5 * z * z - ls - HALF_LN_2PI;
    }
    total
}

/// Differential entropy of a diagonal Gaussian; depends on the log-stds only.
pub fn gaussian_entropy(logstd: &[f64]) -> f64 {
    logstd.iter().map(|ls| ls + HALF_LN_2PI_E).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constants_match_closed_forms() {
        let tau = 2.0 * std::f64::consts::PI;
        assert!((HALF_LN_2PI - 0.5 * tau.ln()).abs() < 1e-15);
        assert!((HALF_LN_2PI_E - 0.5 * (tau * std::f64::consts::E).ln()).abs() < 1e-15);
    }

    #[test]
    fn standard_normal_at_mean() {
        let lp = gaussian_logprob(&[0.0], &[0.0], &[0.0]).unwrap();
        assert!((lp + 0.918_938_5).abs() < 1e-7);
        let lp2 = gaussian_logprob(&[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((lp2 + 1.837_877_1).abs() < 1e-7);
    }

    #[test]
    fn matches_density_written_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mean: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let logstd: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.5..1.0)).collect();
            let action: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            // product of univariate densities, then log
            let mut density = 1.0;
            for i in 0..4 {
                let sigma = logstd[i].exp();
                let z = (action[i] - mean[i]) / sigma;
                density *= (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            }
            let lp = gaussian_logprob(&mean, &logstd, &action).unwrap();
            assert!((lp - density.ln()).abs() < 1e-10, "{lp} vs {}", density.ln());
        }
    }

    #[test]
    fn entropy_values() {
        assert!((gaussian_entropy(&[0.0]) - 1.418_938_5).abs() < 1e-7);
        assert!((gaussian_entropy(&[1.0, 1.0]) - 2.0 * (1.0 + 1.418_938_5)).abs() < 1e-6);
        // 0.5 * ln(2*pi*e*sigma^2) with sigma = e^-0.5
        let sigma2 = (-1.0f64).exp();
        let direct = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sigma2).ln();
        assert!((gaussian_entropy(&[-0.5]) - direct).abs() < 1e-12);
        assert!((gaussian_entropy(&[-0.5]) - 0.918_938_5).abs() < 1e-7);
    }

    #[test]
    fn rejects_mismatched_lengths() {
        assert!(matches!(
            gaussian_logprob(&[0.0, 1.0], &[0.0], &[0.0, 0.0]),
            Err(Error::Dimension(_))
        ));
        assert!(gaussian_logprob(&[], &[], &[]).is_err());
    }
}
