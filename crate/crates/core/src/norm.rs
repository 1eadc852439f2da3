//! Weighted ℓ1 / ℓ∞ vector norms and the elementwise partial order.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    Linf,
}

impl std::fmt::Display for NormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormKind::L1 => "l1",
            NormKind::Linf => "linf",
        })
    }
}

impl std::str::FromStr for NormKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(NormKind::L1),
            "linf" => Ok(NormKind::Linf),
            other => Err(format!("unknown norm `{other}` (expected l1 or linf)")),
        }
    }
}

/// `|x|_{1,v} = Σ vᵢ|xᵢ|` or `|x|_{∞,w†} = maxᵢ |xᵢ|/wᵢ`.
///
/// For the ℓ∞ kind the stored weights are `w`; the scaling matrix is
/// `diag(1/w)`, so a larger weight makes a component count less.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct WeightedNorm<T> {
    kind: NormKind,
    weights: Vec<T>,
}

impl<T: Scalar> WeightedNorm<T> {
    pub fn new(kind: NormKind, weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("weights", "must be nonempty"));
        }
        if let Some(i) = weights.iter().position(|w| !(*w > T::zero() && w.is_finite())) {
            return Err(invalid("weights", format!("entry {i} = {} is not a positive finite real", weights[i])));
        }
        Ok(Self { kind, weights })
    }

    pub fn unit(kind: NormKind, n: usize) -> Self {
        Self { kind, weights: vec![T::one(); n] }
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn eval(&self, x: &[T]) -> Result<T> {
        check_dim(self.dim(), x.len())?;
        Ok(match self.kind {
            NormKind::L1 => x.iter().zip(&self.weights).map(|(&xi, &vi)| vi * xi.abs()).sum(),
            NormKind::Linf => x.iter().zip(&self.weights).fold(T::zero(), |m, (&xi, &wi)| m.max(xi.abs() / wi)),
        })
    }

    /// Distance `|x - y|` in this norm.
    pub fn dist(&self, x: &[T], y: &[T]) -> Result<T> {
        check_dim(x.len(), y.len())?;
        self.eval(&crate::linalg::sub(x, y))
    }
}

/// `x ≤ y` elementwise (the order induced by the positive orthant).
pub fn partial_order_leq<T: Scalar>(x: &[T], y: &[T]) -> Result<bool> {
    check_dim(x.len(), y.len())?;
    Ok(x.iter().zip(y).all(|(a, b)| a <= b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_l1() {
        let n = WeightedNorm::new(NormKind::L1, vec![1.0, 2.0]).unwrap();
        assert_eq!(n.eval(&[3.0, -1.0]).unwrap(), 5.0);
    }

    #[test]
    fn weighted_linf() {
        let n = WeightedNorm::new(NormKind::Linf, vec![1.0, 2.0]).unwrap();
        assert_eq!(n.eval(&[3.0, -1.0]).unwrap(), 3.0);
    }

    #[test]
    fn zero_vector() {
        for kind in [NormKind::L1, NormKind::Linf] {
            let n = WeightedNorm::new(kind, vec![0.3f32, 7.0, 2.0]).unwrap();
            assert_eq!(n.eval(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        }
    }

    #[test]
    fn nonpositive_weights_rejected() {
        assert!(WeightedNorm::new(NormKind::L1, vec![1.0, 0.0]).is_err());
        assert!(WeightedNorm::new(NormKind::Linf, vec![-1.0]).is_err());
        assert!(WeightedNorm::<f64>::new(NormKind::Linf, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let n = WeightedNorm::<f64>::unit(NormKind::L1, 2);
        assert!(n.eval(&[1.0]).is_err());
        assert!(partial_order_leq(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn partial_order_examples() {
        assert!(partial_order_leq(&[1.0, 2.0], &[1.0, 3.0]).unwrap());
        assert!(!partial_order_leq(&[1.0, 4.0], &[2.0, 3.0]).unwrap());
        assert!(!partial_order_leq(&[2.0, 3.0], &[1.0, 4.0]).unwrap());
        assert!(partial_order_leq(&[1.5, -2.0], &[1.5, -2.0]).unwrap());
    }

    #[test]
    fn norm_kind_parses() {
        assert_eq!("l1".parse::<NormKind>().unwrap(), NormKind::L1);
        assert_eq!("LINF".parse::<NormKind>().unwrap(), NormKind::Linf);
        assert!("l2".parse::<NormKind>().is_err());
    }
}
