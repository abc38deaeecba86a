use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Mean squared error over all elements and its gradient `2 (pred - target) / count`.
pub fn mse_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::Dimension {
            what: "loss target",
            expected: pred.data().len(),
            got: target.data().len(),
        });
    }
    let count = pred.data().len().max(1) as f64;
    let mut sum = 0.0f64;
    let scale = T::lit(2.0 / count);
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            sum += d.to_f64().unwrap().powi(2);
            scale * d
        })
        .collect();
    Ok((T::lit(sum / count), Tensor::from_vec(pred.shape(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{max_relative_error, numeric_gradient};

    #[test]
    fn values_and_gradient() {
        let t = Tensor::from_vec([1, 2, 2, 2], (0..8).map(|i| i as f64 * 0.3).collect()).unwrap();
        assert_eq!(mse_loss(&t, &t).unwrap().0, 0.0);
        let shifted = t.map(|v| v + 1.0);
        assert!((mse_loss(&shifted, &t).unwrap().0 - 1.0).abs() < 1e-15);

        let p = t.map(|v| v.sin());
        let (_, g) = mse_loss(&p, &t).unwrap();
        let num = numeric_gradient(p.data(), |d| mse_loss(&Tensor::from_vec(p.shape(), d.to_vec()).unwrap(), &t).unwrap().0);
        assert!(max_relative_error(g.data(), &num) < 1e-6);
        assert!(mse_loss(&t, &Tensor::zeros([1, 1, 2, 2])).is_err());
    }
}
