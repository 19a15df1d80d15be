//! Sample-average estimators of the closed-form statistics. They simulate
//! the amplifier on Gaussian symbols and never use the Bussgang formulas for
//! anything but splitting off the residual.
//!
//! The residual of each tAP is drawn from its own independent symbol copy:
//! the distortion model treats distortion as uncorrelated across tAPs, which
//! a shared symbol vector would not reproduce.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{complex_normal, CMatrix, SimRng};
use crate::pa::{pa_apply, BussgangModel};

fn symbols(rng: &mut SimRng, k: usize) -> Vec<Complex64> {
    (0..k).map(|_| complex_normal(rng, 1.0)).collect()
}

/// Amplifier output and its Bussgang residual for one transmit vector.
fn amplify(s: &[Complex64], gain: &[Complex64], beta1: f64, beta3: Complex64) -> Vec<Complex64> {
    s.iter()
        .zip(gain)
        .map(|(&x, g)| pa_apply(x, beta1, beta3) - g * x)
        .collect()
}

/// `E{c s^H} (E{s s^H})^-1` from `draws` samples; needs `W W^H` invertible.
pub fn bussgang_full(
    rng: &mut SimRng,
    w: &CMatrix,
    beta1: f64,
    beta3: Complex64,
    draws: usize,
) -> Result<CMatrix> {
    let n = w.rows();
    let mut cross = CMatrix::zeros(n, n);
    let mut auto = CMatrix::zeros(n, n);
    for _ in 0..draws {
        let s = w.apply(&symbols(rng, w.cols()));
        let c: Vec<Complex64> = s.iter().map(|&x| pa_apply(x, beta1, beta3)).collect();
        for i in 0..n {
            for j in 0..n {
                cross[(i, j)] += c[i] * s[j].conj();
                auto[(i, j)] += s[i] * s[j].conj();
            }
        }
    }
    cross.matmul(&invert(&auto)?)
}

/// Per-antenna gains `E{c_i s_i^*} / E{|s_i|^2}`.
pub fn bussgang_diag(
    rng: &mut SimRng,
    w: &CMatrix,
    beta1: f64,
    beta3: Complex64,
    draws: usize,
) -> Vec<Complex64> {
    let n = w.rows();
    let mut cross = vec![Complex64::new(0.0, 0.0); n];
    let mut power = vec![0.0; n];
    for _ in 0..draws {
        let s = w.apply(&symbols(rng, w.cols()));
        for i in 0..n {
            cross[i] += pa_apply(s[i], beta1, beta3) * s[i].conj();
            power[i] += s[i].norm_sqr();
        }
    }
    cross.iter().zip(&power).map(|(c, p)| c / p).collect()
}

/// Sample covariance of the residual `c - Xi s`.
pub fn distortion_covariance(
    rng: &mut SimRng,
    w: &CMatrix,
    beta1: f64,
    beta3: Complex64,
    draws: usize,
) -> CMatrix {
    let gain = BussgangModel::new(std::slice::from_ref(w), beta1, &[beta3])
        .gain
        .remove(0);
    let n = w.rows();
    let mut cov = CMatrix::zeros(n, n);
    for _ in 0..draws {
        let s = w.apply(&symbols(rng, w.cols()));
        let d = amplify(&s, &gain, beta1, beta3);
        for i in 0..n {
            for j in 0..n {
                cov[(i, j)] += d[i] * d[j].conj();
            }
        }
    }
    cov.scale(Complex64::new(1.0 / draws as f64, 0.0))
}

/// Transmitted vectors `Xi_a W_a x + d_a` of every tAP for one draw.
fn transmit_all(
    rng: &mut SimRng,
    w: &[CMatrix],
    bm: &BussgangModel,
    beta1: f64,
    beta3: &[Complex64],
) -> Vec<Vec<Complex64>> {
    let x = symbols(rng, w.first().map_or(0, |m| m.cols()));
    w.iter()
        .enumerate()
        .map(|(a, wa)| {
            let linear: Vec<Complex64> = wa
                .apply(&x)
                .iter()
                .zip(&bm.gain[a])
                .map(|(s, g)| g * s)
                .collect();
            let own = wa.apply(&symbols(rng, wa.cols()));
            let d = amplify(&own, &bm.gain[a], beta1, beta3[a]);
            let mut u: Vec<Complex64> = linear.iter().zip(&d).map(|(l, d)| l + d).collect();
            // keep the symbol vector reachable for the desired-signal projection
            u.extend(x.iter().copied());
            u
        })
        .collect()
}

/// SINDR of every UE estimated from received samples, using the projection
/// of the received signal on the intended symbol as the useful part.
pub fn sindr(
    rng: &mut SimRng,
    comm: &[Vec<Vec<Complex64>>],
    w: &[CMatrix],
    beta1: f64,
    beta3: &[Complex64],
    noise: f64,
    draws: usize,
) -> Vec<f64> {
    let bm = BussgangModel::new(w, beta1, beta3);
    let users = w.first().map_or(0, |m| m.cols());
    let mut corr = vec![Complex64::new(0.0, 0.0); users];
    let mut power = vec![0.0; users];
    for _ in 0..draws {
        let u = transmit_all(rng, w, &bm, beta1, beta3);
        let n_t = w[0].rows();
        let x = &u[0][n_t..];
        for k in 0..users {
            let y: Complex64 = u
                .iter()
                .enumerate()
                .map(|(a, ua)| {
                    comm[a][k]
                        .iter()
                        .zip(&ua[..n_t])
                        .map(|(h, v)| h.conj() * v)
                        .sum::<Complex64>()
                })
                .sum::<Complex64>()
                + complex_normal(rng, noise);
            corr[k] += y * x[k].conj();
            power[k] += y.norm_sqr();
        }
    }
    corr.iter()
        .zip(&power)
        .map(|(c, p)| {
            let signal = (c / draws as f64).norm_sqr();
            signal / (p / draws as f64 - signal)
        })
        .collect()
}

/// Sample average of `(2/sigma^2) Re{(dmu/de_n1)^H dmu/de_n2}` for one sAP,
/// where `derivs[a]` holds the two derivative channels from tAP `a`.
pub fn fim(
    rng: &mut SimRng,
    derivs: &[&[CMatrix; 2]],
    w: &[CMatrix],
    beta1: f64,
    beta3: &[Complex64],
    noise: f64,
    draws: usize,
) -> [[f64; 2]; 2] {
    let bm = BussgangModel::new(w, beta1, beta3);
    let n_t = w[0].rows();
    let mut acc = [[0.0; 2]; 2];
    for _ in 0..draws {
        let u = transmit_all(rng, w, &bm, beta1, beta3);
        let grads: Vec<Vec<Complex64>> = (0..2)
            .map(|n| {
                let mut g = vec![Complex64::new(0.0, 0.0); derivs[0][n].rows()];
                for (a, ua) in u.iter().enumerate() {
                    for (gi, v) in g.iter_mut().zip(derivs[a][n].apply(&ua[..n_t])) {
                        *gi += v;
                    }
                }
                g
            })
            .collect();
        for (n1, row) in acc.iter_mut().enumerate() {
            for (n2, cell) in row.iter_mut().enumerate() {
                let ip: Complex64 = grads[n1]
                    .iter()
                    .zip(&grads[n2])
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                *cell += ip.re;
            }
        }
    }
    let s = 2.0 / (noise * draws as f64);
    acc.map(|row| row.map(|x| x * s))
}

/// Gauss-Jordan inverse with partial pivoting, for the small oracle systems.
fn invert(m: &CMatrix) -> Result<CMatrix> {
    let n = m.rows();
    let mut a = m.clone();
    let mut inv = CMatrix::identity(n);
    let scale = m.frob_norm();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[(i, col)].norm().total_cmp(&a[(j, col)].norm()))
            .unwrap_or(col);
        if a[(pivot, col)].norm() <= 1e-12 * scale {
            return Err(Error::InvalidArgument(
                "sample covariance is singular".into(),
            ));
        }
        for j in 0..n {
            let (x, y) = (a[(col, j)], a[(pivot, j)]);
            a[(col, j)] = y;
            a[(pivot, j)] = x;
            let (x, y) = (inv[(col, j)], inv[(pivot, j)]);
            inv[(col, j)] = y;
            inv[(pivot, j)] = x;
        }
        let p = a[(col, col)].inv();
        for j in 0..n {
            a[(col, j)] *= p;
            inv[(col, j)] *= p;
        }
        for i in (0..n).filter(|&i| i != col) {
            let f = a[(i, col)];
            for j in 0..n {
                let (ac, ic) = (a[(col, j)], inv[(col, j)]);
                a[(i, j)] -= f * ac;
                inv[(i, j)] -= f * ic;
            }
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng;

    #[test]
    fn gauss_jordan_inverts() {
        let mut r = rng(0, 0);
        let m = CMatrix::from_fn(4, 4, |_, _| complex_normal(&mut r, 1.0));
        let p = m.matmul(&invert(&m).unwrap()).unwrap();
        assert!(p.max_abs_diff(&CMatrix::identity(4)) < 1e-12);
        assert!(invert(&CMatrix::zeros(2, 2)).is_err());
    }
}
