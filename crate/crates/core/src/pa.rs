//! Third-order memoryless power-amplifier model and its Bussgang
//! decomposition under Gaussian inputs.

use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};

use crate::numerics::{cst, CMatrix, CVec, Mat, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaParams {
    /// Linear gain, shared by every tAP.
    pub beta1: f64,
    /// Third-order coefficient per tAP.
    pub beta3: Vec<Complex64>,
    /// Radius of the coefficient uncertainty disk.
    pub epsilon: f64,
}

impl PaParams {
    pub fn linear(taps: usize) -> Self {
        Self {
            beta1: 1.0,
            beta3: vec![Complex64::new(0.0, 0.0); taps],
            epsilon: 0.0,
        }
    }

    pub fn within_disk(&self) -> bool {
        self.beta3.iter().all(|b| b.norm() <= self.epsilon + 1e-15)
    }
}

pub fn pa_apply(x: Complex64, beta1: f64, beta3: Complex64) -> Complex64 {
    x * beta1 + beta3 * x * x.norm_sqr()
}

/// Diagonal of `W W^H`: per-antenna transmit power.
pub fn gram_diag<S: Real>(w: &Mat<S>) -> Vec<S> {
    (0..w.rows())
        .map(|i| w.row(i).iter().fold(S::zero(), |acc, z| acc + z.norm_sqr()))
        .collect()
}

/// `C ⊙ |C|^2` with `C = W W^H`; the distortion covariance per unit `2|beta3|^2`.
pub fn cubic_moment<S: Real>(w: &Mat<S>) -> Mat<S> {
    w.gram().map(|z| z.scale(z.norm_sqr()))
}

/// Per-tAP Bussgang gain (diagonal entries) and distortion covariance.
#[derive(Debug, Clone)]
pub struct BussgangModel<S = f64> {
    pub gain: Vec<CVec<S>>,
    pub distortion: Vec<Mat<S>>,
}

impl<S: Real> BussgangModel<S> {
    pub fn new(w: &[Mat<S>], beta1: f64, beta3: &[Complex64]) -> Self {
        let mut gain = Vec::with_capacity(w.len());
        let mut distortion = Vec::with_capacity(w.len());
        for (wa, &b3) in w.iter().zip(beta3) {
            let b3s = cst::<S>(b3 * 2.0);
            gain.push(
                gram_diag(wa)
                    .into_iter()
                    .map(|p| b3s.scale(p) + Complex::new(S::from_f64(beta1), S::zero()))
                    .collect(),
            );
            let n = wa.rows();
            distortion.push(if b3 == Complex64::new(0.0, 0.0) {
                Mat::zeros(n, n)
            } else {
                let s = S::from_f64(2.0 * b3.norm_sqr());
                cubic_moment(wa).map(|z| z.scale(s))
            });
        }
        Self { gain, distortion }
    }

    pub fn xi(&self, a: usize) -> Mat<S> {
        Mat::diag(&self.gain[a])
    }
}

pub fn bussgang_gain(w: &CMatrix, beta1: f64, beta3: Complex64) -> CMatrix {
    BussgangModel::new(std::slice::from_ref(w), beta1, &[beta3]).xi(0)
}

pub fn distortion_covariance(w: &CMatrix, beta3: Complex64) -> CMatrix {
    BussgangModel::new(std::slice::from_ref(w), 1.0, &[beta3])
        .distortion
        .remove(0)
}

/// Amplifier output `c` for the precoded signal `s = W x` and the residual
/// `d = c - Xi s`.
pub fn pa_transmit(
    s: &[Complex64],
    w: &CMatrix,
    beta1: f64,
    beta3: Complex64,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let xi = BussgangModel::new(std::slice::from_ref(w), beta1, &[beta3])
        .gain
        .remove(0);
    let c: Vec<Complex64> = s.iter().map(|&x| pa_apply(x, beta1, beta3)).collect();
    let d = c
        .iter()
        .zip(s)
        .zip(&xi)
        .map(|((ci, si), g)| ci - g * si)
        .collect();
    (c, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gaussian_complex, rng};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pa_apply_examples() {
        assert_eq!(pa_apply(c(0.3, 0.4), 1.0, c(0.0, 0.0)), c(0.3, 0.4));
        assert!((pa_apply(c(1.0, 0.0), 1.0, c(-0.1, 0.0)) - c(0.9, 0.0)).norm() < 1e-15);
        assert_eq!(pa_apply(c(0.0, 0.0), 0.7, c(0.2, -0.3)), c(0.0, 0.0));
    }

    #[test]
    fn gain_examples() {
        let w = gaussian_complex(&mut rng(1, 0), 3, 1.0).unwrap();
        let w = CMatrix::from_vec(3, 1, w.as_slice().to_vec()).unwrap();
        assert_eq!(bussgang_gain(&w, 1.0, c(0.0, 0.0)), CMatrix::identity(3));
        let w = CMatrix::from_vec(2, 1, vec![c(0.5f64.sqrt(), 0.0); 2]).unwrap();
        let g = bussgang_gain(&w, 1.0, c(0.1, 0.0));
        assert!(g.approx_eq(&CMatrix::identity(2).scale(c(1.1, 0.0)), 1e-15));
    }

    #[test]
    fn distortion_vanishes_for_linear_pa() {
        let w = CMatrix::from_vec(
            2,
            2,
            vec![c(0.3, 0.1), c(-0.2, 0.4), c(0.5, 0.0), c(0.1, -0.1)],
        )
        .unwrap();
        assert_eq!(distortion_covariance(&w, c(0.0, 0.0)).frob_norm(), 0.0);
    }

    #[test]
    fn transmit_residual_is_zero_for_linear_pa() {
        let w = CMatrix::from_vec(2, 1, vec![c(0.3, 0.1), c(-0.2, 0.4)]).unwrap();
        let s = w.apply(&[c(0.7, -0.2)]);
        let (out, d) = pa_transmit(&s, &w, 1.0, c(0.0, 0.0));
        assert_eq!(out, s);
        assert!(d.iter().all(|z| *z == c(0.0, 0.0)));
    }

    fn arb_w() -> impl Strategy<Value = CMatrix> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6).prop_map(|v| {
            CMatrix::from_vec(3, 2, v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn distortion_is_degree_six_homogeneous(w in arb_w(), s in 0.1f64..3.0, phase in 0.0f64..6.28) {
            let b3 = c(0.05, -0.12);
            let scaled = w.scale(Complex64::from_polar(s, phase));
            let lhs = distortion_covariance(&scaled, b3);
            let rhs = distortion_covariance(&w, b3).scale(c(s.powi(6), 0.0));
            prop_assert!(lhs.approx_eq(&rhs, 1e-12));
        }

        #[test]
        fn distortion_is_hermitian_psd(w in arb_w(), probes in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3 * 20)) {
            let q = distortion_covariance(&w, c(0.1, 0.15));
            prop_assert!(q.is_hermitian(1e-12));
            for v in probes.chunks(3) {
                let v: Vec<Complex64> = v.iter().map(|&(a, b)| c(a, b)).collect();
                let qv = q.apply(&v);
                let r: Complex64 = v.iter().zip(&qv).map(|(x, y)| x.conj() * y).sum();
                prop_assert!(r.re >= -1e-12 * q.frob_norm());
            }
        }

        #[test]
        fn gain_is_linear_in_beta3(w in arb_w(), a in -0.3f64..0.3, b in -0.3f64..0.3) {
            let g = |x: Complex64| bussgang_gain(&w, 1.0, x);
            let base = g(c(0.0, 0.0));
            let lhs = g(c(a, b)).sub(&base);
            let rhs = g(c(1.0, 0.0)).sub(&base).scale(c(a, b));
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }
    }
}
