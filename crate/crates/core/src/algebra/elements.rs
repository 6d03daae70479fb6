use std::ops::{Add, Index, Mul, Neg, Sub};

use super::AlgebraError;

macro_rules! coordinate_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(coords: Vec<f64>) -> Self {
                $name(coords)
            }

            pub fn zeros(n: usize) -> Self {
                $name(vec![0.0; n])
            }

            /// The `i`-th basis vector of an `n`-dimensional space.
            pub fn basis(n: usize, i: usize) -> Self {
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                $name(v)
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn coords(&self) -> &[f64] {
                &self.0
            }

            pub fn coords_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }

            pub fn into_coords(self) -> Vec<f64> {
                self.0
            }

            pub fn norm(&self) -> f64 {
                self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
            }

            pub fn max_abs(&self) -> f64 {
                self.0.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
            }

            pub fn scaled(&self, s: f64) -> Self {
                $name(self.0.iter().map(|x| x * s).collect())
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                $name(v)
            }
        }

        impl From<&[f64]> for $name {
            fn from(v: &[f64]) -> Self {
                $name(v.to_vec())
            }
        }

        impl Index<usize> for $name {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl Add for &$name {
            type Output = $name;
            fn add(self, rhs: &$name) -> $name {
                assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
                $name(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
            }
        }

        impl Add for $name {
            type Output = $name;
            fn add(self, rhs: $name) -> $name {
                &self + &rhs
            }
        }

        impl Sub for &$name {
            type Output = $name;
            fn sub(self, rhs: &$name) -> $name {
                assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
                $name(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
            }
        }

        impl Sub for $name {
            type Output = $name;
            fn sub(self, rhs: $name) -> $name {
                &self - &rhs
            }
        }

        impl Mul<f64> for $name {
            type Output = $name;
            fn mul(mut self, s: f64) -> $name {
                self.0.iter_mut().for_each(|x| *x *= s);
                self
            }
        }

        impl Neg for $name {
            type Output = $name;
            fn neg(self) -> $name {
                self * -1.0
            }
        }
    };
}

coordinate_vector!(
    /// Coordinates of an element of the Lie algebra in the basis `e_i`.
    AlgebraElement
);

coordinate_vector!(
    /// Coordinates of an element of the dual space in the dual basis `e_i*`.
    DualElement
);

/// Natural pairing `<mu, X> = sum_i mu_i X_i`.
pub fn pairing(mu: &DualElement, x: &AlgebraElement) -> Result<f64, AlgebraError> {
    if mu.dim() != x.dim() {
        return Err(AlgebraError::DimensionMismatch {
            expected: mu.dim(),
            got: x.dim(),
        });
    }
    Ok(mu.coords().iter().zip(x.coords()).map(|(a, b)| a * b).sum())
}
