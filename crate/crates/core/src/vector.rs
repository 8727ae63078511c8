//! Tangent vectors and cotangent covectors.
//!
//! The two are kept as distinct types so that a covector can only act on a
//! vector through [`Covector::pair`], never be added to one.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

macro_rules! coord_type {
    ($name:ident) => {
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(components: Vec<f64>) -> Self {
                Self(components)
            }

            pub fn zeros(dim: usize) -> Self {
                Self(vec![0.0; dim])
            }

            /// The `k`-th coordinate unit element.
            pub fn axis(dim: usize, k: usize) -> Self {
                let mut c = vec![0.0; dim];
                c[k] = 1.0;
                Self(c)
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub fn iter(&self) -> std::slice::Iter<'_, f64> {
                self.0.iter()
            }

            /// Euclidean norm of the coordinate array.
            pub fn norm(&self) -> f64 {
                self.0.iter().map(|a| a * a).sum::<f64>().sqrt()
            }

            pub fn norm_inf(&self) -> f64 {
                self.0.iter().fold(0.0, |m, a| m.max(a.abs()))
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|a| a.is_finite())
            }

            pub fn scaled(&self, s: f64) -> Self {
                Self(self.0.iter().map(|a| a * s).collect())
            }

            /// `self + s * other`
            pub fn axpy(&self, s: f64, other: &Self) -> Self {
                debug_assert_eq!(self.dim(), other.dim());
                Self(self.0.iter().zip(&other.0).map(|(a, b)| a + s * b).collect())
            }

            pub fn to_dvector(&self) -> DVector<f64> {
                DVector::from_column_slice(&self.0)
            }

            pub fn from_dvector(v: &DVector<f64>) -> Self {
                Self(v.iter().copied().collect())
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(c: Vec<f64>) -> Self {
                Self(c)
            }
        }

        impl<const N: usize> From<[f64; N]> for $name {
            fn from(c: [f64; N]) -> Self {
                Self(c.to_vec())
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
                self.axpy(1.0, rhs)
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
                self.axpy(-1.0, rhs)
            }
        }

        impl Sub for $name {
            type Output = $name;
            fn sub(self, rhs: $name) -> $name {
                &self - &rhs
            }
        }

        impl AddAssign<&$name> for $name {
            fn add_assign(&mut self, rhs: &$name) {
                for (a, b) in self.0.iter_mut().zip(&rhs.0) {
                    *a += b;
                }
            }
        }

        impl SubAssign<&$name> for $name {
            fn sub_assign(&mut self, rhs: &$name) {
                for (a, b) in self.0.iter_mut().zip(&rhs.0) {
                    *a -= b;
                }
            }
        }

        impl Mul<f64> for &$name {
            type Output = $name;
            fn mul(self, s: f64) -> $name {
                self.scaled(s)
            }
        }

        impl Mul<f64> for $name {
            type Output = $name;
            fn mul(self, s: f64) -> $name {
                self.scaled(s)
            }
        }

        impl Neg for &$name {
            type Output = $name;
            fn neg(self) -> $name {
                self.scaled(-1.0)
            }
        }

        impl Neg for $name {
            type Output = $name;
            fn neg(self) -> $name {
                self.scaled(-1.0)
            }
        }
    };
}

coord_type!(Vector);
coord_type!(Covector);

impl Vector {
    /// Euclidean dot product.
    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// The covector with the same coordinates (Euclidean musical isomorphism).
    pub fn flat(&self) -> Covector {
        Covector(self.0.clone())
    }
}

impl Covector {
    /// Contraction `q(v)`.
    pub fn pair(&self, v: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), v.dim());
        self.0.iter().zip(&v.0).map(|(a, b)| a * b).sum()
    }

    /// The vector with the same coordinates (Euclidean musical isomorphism).
    pub fn sharp(&self) -> Vector {
        Vector(self.0.clone())
    }
}
