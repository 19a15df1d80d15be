//! Scalar abstraction, dense complex matrices, seeded randomness and a
//! central-difference gradient checker.
//!
//! Physics kernels are written once against [`Real`] and instantiated with
//! `f64` for evaluation or with [`tape::Var`] when gradients are needed.

pub mod tape;

use std::fmt;
use std::ops::{Index, IndexMut, Neg};

use num_complex::{Complex, Complex64};
use num_traits::Num;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Relative tolerance used by default for matrix comparisons.
pub const REL_TOL: f64 = 1e-9;

/// A real scalar that may carry derivative information.
pub trait Real: Num + Copy + Neg<Output = Self> + PartialOrd + fmt::Debug {
    fn from_f64(v: f64) -> Self;
    fn value(self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;

    fn abs(self) -> Self {
        if self.value() < 0.0 {
            -self
        } else {
            self
        }
    }

    fn max(self, other: Self) -> Self {
        if self.value() >= other.value() {
            self
        } else {
            other
        }
    }

    fn min(self, other: Self) -> Self {
        if self.value() <= other.value() {
            self
        } else {
            other
        }
    }

    fn relu(self) -> Self {
        self.max(Self::zero())
    }

    fn scale(self, s: f64) -> Self {
        self * Self::from_f64(s)
    }

    fn sum(xs: &[Self]) -> Self {
        xs.iter().fold(Self::zero(), |acc, &x| acc + x)
    }

    fn dot(a: &[Self], b: &[Self]) -> Self {
        a.iter()
            .zip(b)
            .fold(Self::zero(), |acc, (&x, &y)| acc + x * y)
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
}

pub type Cx<S> = Complex<S>;
pub type CVec<S> = Vec<Complex<S>>;

pub fn cst<S: Real>(z: Complex64) -> Cx<S> {
    Complex::new(S::from_f64(z.re), S::from_f64(z.im))
}

pub fn cvalue<S: Real>(z: Cx<S>) -> Complex64 {
    Complex64::new(z.re.value(), z.im.value())
}

/// `exp(j theta)`.
pub fn expj<S: Real>(theta: S) -> Cx<S> {
    Complex::new(theta.cos(), theta.sin())
}

pub fn cabs<S: Real>(z: Cx<S>) -> S {
    z.norm_sqr().sqrt()
}

pub fn cscale<S: Real>(z: Cx<S>, s: S) -> Cx<S> {
    Complex::new(z.re * s, z.im * s)
}

/// `a^H b` for column vectors.
pub fn inner<S: Real>(a: &[Cx<S>], b: &[Cx<S>]) -> Cx<S> {
    a.iter()
        .zip(b)
        .fold(Complex::new(S::zero(), S::zero()), |acc, (x, y)| {
            acc + x.conj() * *y
        })
}

pub fn lift_vec<S: Real>(v: &[Complex64]) -> CVec<S> {
    v.iter().map(|&z| cst(z)).collect()
}

pub fn vec_value<S: Real>(v: &[Cx<S>]) -> Vec<Complex64> {
    v.iter().map(|&z| cvalue(z)).collect()
}

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct Mat<S = f64> {
    rows: usize,
    cols: usize,
    data: Vec<Cx<S>>,
}

pub type CMatrix = Mat<f64>;

impl<S: Real> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(S::zero(), S::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(S::one(), S::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cx<S>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Cx<S>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                expected: format!("{} entries", rows * cols),
                got: format!("{} entries", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn column_vector(v: Vec<Cx<S>>) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v,
        }
    }

    pub fn diag(d: &[Cx<S>]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[Cx<S>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Cx<S>] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[Cx<S>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> CVec<S> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Shape {
                expected: format!("{} rows", self.cols),
                got: format!("{} rows", rhs.rows),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..rhs.cols {
                    out[(i, j)] = out[(i, j)] + a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// `self * v` for a column vector `v`.
    pub fn apply(&self, v: &[Cx<S>]) -> CVec<S> {
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(Complex::new(S::zero(), S::zero()), |acc, (a, b)| {
                        acc + *a * *b
                    })
            })
            .collect()
    }

    /// `self * self^H`.
    pub fn gram(&self) -> Self {
        Self::from_fn(self.rows, self.rows, |i, j| {
            self.row(i)
                .iter()
                .zip(self.row(j))
                .fold(Complex::new(S::zero(), S::zero()), |acc, (a, b)| {
                    acc + *a * b.conj()
                })
        })
    }

    pub fn hadamard(&self, rhs: &Self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * rhs[(i, j)])
    }

    pub fn map(&self, f: impl Fn(Cx<S>) -> Cx<S>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: Cx<S>) -> Self {
        self.map(|z| z * s)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] + rhs[(i, j)])
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - rhs[(i, j)])
    }

    pub fn trace(&self) -> Cx<S> {
        (0..self.rows.min(self.cols)).fold(Complex::new(S::zero(), S::zero()), |acc, i| {
            acc + self[(i, i)]
        })
    }

    pub fn frob_norm_sqr(&self) -> S {
        self.data
            .iter()
            .fold(S::zero(), |acc, z| acc + z.norm_sqr())
    }

    pub fn frob_norm(&self) -> S {
        self.frob_norm_sqr().sqrt()
    }

    pub fn lift(m: &CMatrix) -> Self {
        Self {
            rows: m.rows,
            cols: m.cols,
            data: m.data.iter().map(|&z| cst(z)).collect(),
        }
    }

    pub fn value(&self) -> CMatrix {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| cvalue(z)).collect(),
        }
    }
}

impl CMatrix {
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Hermitian within `tol` relative to the Frobenius norm.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.rows == self.cols
            && self.max_abs_diff(&self.adjoint()) <= tol * self.frob_norm().max(f64::MIN_POSITIVE)
    }

    pub fn approx_eq(&self, other: &CMatrix, rel: f64) -> bool {
        self.shape() == other.shape()
            && self.sub(other).frob_norm() <= rel * self.frob_norm().max(other.frob_norm())
    }
}

impl<S> Index<(usize, usize)> for Mat<S> {
    type Output = Cx<S>;
    fn index(&self, (i, j): (usize, usize)) -> &Cx<S> {
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Mat<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cx<S> {
        &mut self.data[i * self.cols + j]
    }
}

impl<S: fmt::Debug> fmt::Debug for Mat<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

pub type SimRng = ChaCha8Rng;

/// Seeded generator; `(seed, stream)` pairs give independent, reproducible
/// sequences.
pub fn rng(seed: u64, stream: u64) -> SimRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn complex_normal(rng: &mut SimRng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Column of i.i.d. circularly-symmetric complex Gaussian entries.
pub fn gaussian_complex(rng: &mut SimRng, n: usize, variance: f64) -> Result<CMatrix> {
    if !(variance > 0.0) {
        return Err(Error::NonPositiveVariance(variance));
    }
    Ok(CMatrix::column_vector(
        (0..n).map(|_| complex_normal(rng, variance)).collect(),
    ))
}

/// Inverse of a 2x2 complex matrix by the adjugate formula.
pub fn herm_inverse_2x2(m: &CMatrix) -> Result<CMatrix> {
    if m.shape() != (2, 2) {
        return Err(Error::Shape {
            expected: "2x2".into(),
            got: format!("{}x{}", m.rows, m.cols),
        });
    }
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let det = a * d - b * c;
    if det.norm() <= 1e-12 * m.frob_norm_sqr() || det.norm() == 0.0 {
        return Err(Error::SingularFim { det: det.norm() });
    }
    let inv = det.inv();
    CMatrix::from_vec(2, 2, vec![d * inv, -b * inv, -c * inv, a * inv])
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step must be positive, got {h}"
        )));
    }
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            if up.is_finite() && down.is_finite() {
                Ok((up - down) / (2.0 * h))
            } else {
                Err(Error::NonFinite { index: i })
            }
        })
        .collect()
}

/// `max |a - b| / max(|b|_inf, floor)` over two gradient vectors.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let num = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let den = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gaussian_sample_mean_is_small() {
        let mut r = rng(0, 0);
        let v = gaussian_complex(&mut r, 100_000, 1.0).unwrap();
        let n = v.rows() as f64;
        let mean = v.as_slice().iter().sum::<Complex64>() / n;
        assert!(mean.re.abs() <= 0.02 && mean.im.abs() <= 0.02);
        let power = v.frob_norm_sqr() / n;
        assert!((power - 1.0).abs() < 0.02);
    }

    #[test]
    fn gaussian_rejects_zero_variance() {
        let mut r = rng(0, 0);
        assert_eq!(
            gaussian_complex(&mut r, 3, 0.0),
            Err(Error::NonPositiveVariance(0.0))
        );
    }

    #[test]
    fn gaussian_is_deterministic_per_seed_and_stream() {
        let a = gaussian_complex(&mut rng(7, 3), 16, 2.0).unwrap();
        let b = gaussian_complex(&mut rng(7, 3), 16, 2.0).unwrap();
        let c = gaussian_complex(&mut rng(7, 4), 16, 2.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    fn real2(a: f64, b: f64, c: f64, d: f64) -> CMatrix {
        CMatrix::from_vec(
            2,
            2,
            [a, b, c, d]
                .iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn inverse_of_identity_and_diagonal() {
        let i2 = CMatrix::identity(2);
        assert_eq!(herm_inverse_2x2(&i2).unwrap(), i2);
        let inv = herm_inverse_2x2(&real2(4.0, 0.0, 0.0, 2.0)).unwrap();
        assert!(inv.approx_eq(&real2(0.25, 0.0, 0.0, 0.5), 1e-15));
    }

    #[test]
    fn inverse_rejects_singular() {
        assert!(matches!(
            herm_inverse_2x2(&real2(1.0, 0.0, 0.0, 0.0)),
            Err(Error::SingularFim { .. })
        ));
    }

    #[test]
    fn fd_gradient_matches_analytic() {
        let g = fd_gradient(|x| x[0] * x[0], &[3.0], 1e-4).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
        let g = fd_gradient(|x| x.iter().map(|v| v * v).sum(), &[1.0, 2.0], 1e-4).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-6 && (g[1] - 4.0).abs() < 1e-6);
        let g = fd_gradient(|_| 5.0, &[1.0, -1.0, 0.5], 1e-3).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fd_gradient_propagates_non_finite() {
        let r = fd_gradient(|x| 1.0 / x[0], &[0.0], 1e-3);
        assert!(r.is_ok());
        let r = fd_gradient(|x| (x[0] - 1e-3).ln(), &[0.0], 1e-3);
        assert!(matches!(r, Err(Error::NonFinite { index: 0 })));
    }

    fn arb_matrix(rows: usize, cols: usize) -> impl Strategy<Value = CMatrix> {
        proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), rows * cols).prop_map(move |v| {
            CMatrix::from_vec(
                rows,
                cols,
                v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn gram_trace_equals_frobenius(m in arb_matrix(3, 4)) {
            let t = m.gram().trace();
            prop_assert!(t.re >= 0.0);
            prop_assert!((t.re - m.frob_norm_sqr()).abs() <= 1e-9 * m.frob_norm_sqr().max(1.0));
            prop_assert!(t.im.abs() <= 1e-9 * m.frob_norm_sqr().max(1.0));
        }

        #[test]
        fn inverse_composes_to_identity(m in arb_matrix(2, 2)) {
            let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).norm();
            prop_assume!(det > 1e-3 * m.frob_norm_sqr());
            let inv = herm_inverse_2x2(&m).unwrap();
            let prod = m.matmul(&inv).unwrap();
            prop_assert!(prod.max_abs_diff(&CMatrix::identity(2)) <= 1e-9);
        }
    }
}
