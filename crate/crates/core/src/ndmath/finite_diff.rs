use super::Tensor;
use crate::error::{Error, Result};

/// Central-difference gradient of `f` at `x`, coordinate by coordinate.
pub fn finite_diff_grad(mut f: impl FnMut(&Tensor) -> f64, x: &Tensor, eps: f64) -> Result<Tensor> {
    if !(eps > 0.0) {
        return Err(Error::Argument(format!(
            "finite-difference step must be > 0, got {eps}"
        )));
    }
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let up = f(&probe);
        probe.data_mut()[i] = orig - eps;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite function value while perturbing coordinate {i}: f(+)={up}, f(-)={down}"
            )));
        }
        grad.data_mut()[i] = (up - down) / (2.0 * eps);
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let g = finite_diff_grad(|x| x.item() * x.item(), &Tensor::scalar(3.0), 1e-5).unwrap();
        assert!((g.item() - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let x = Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap();
        let g = finite_diff_grad(|_| 4.2, &x, 1e-4).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn errors() {
        let x = Tensor::scalar(0.0);
        assert!(matches!(finite_diff_grad(|_| 1.0, &x, 0.0), Err(Error::Argument(_))));
        assert!(matches!(
            finite_diff_grad(|x| 1.0 / x.item().abs().min(0.0), &x, 1e-3),
            Err(Error::Numeric(_))
        ));
    }
}
