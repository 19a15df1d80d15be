//! Expected Fisher information for target localisation and the CRLB trace.
//!
//! Each sAP `b` observes `sum_a H_{a,b} u_a` where `u_a = Xi_a x + d_a` is the
//! amplifier output. For a derivative pair `(n1, n2)` and tAP pair `(a, a')`
//! the kernel is `G = (dH_{a',b}/de_{n1})^H dH_{a,b}/de_{n2}`, and
//! `E{u_a u_a'^H}` expands into four traces whose weights are the products
//! of the amplifier coefficients. The split keeps the expected FIM linear in
//! those products so the robust module can bound it term by term.

use num_complex::{Complex, Complex64};

use crate::comm::{LinkBudget, Solution};
use crate::error::{Error, Result};
use crate::geometry::ChannelSet;
use crate::numerics::{cst, Cx, Mat, Real};
use crate::pa::{cubic_moment, gram_diag, PaParams};

/// Entry order used throughout: `(0,0), (0,1), (1,0), (1,1)`.
pub const ENTRIES: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

pub fn entry_index(n1: usize, n2: usize) -> usize {
    2 * n1 + n2
}

/// Traces of one kernel against the four parts of the cross-covariance,
/// already multiplied by `2 / sigma_b^2`.
#[derive(Debug, Clone, Copy)]
pub struct PairTraces<S = f64> {
    /// `Tr(G C)`
    pub plain: Cx<S>,
    /// `Tr(G D_a C)`
    pub left: Cx<S>,
    /// `Tr(G C D_a')`
    pub right: Cx<S>,
    /// `Tr(G D_a C D_a')`
    pub both: Cx<S>,
}

#[derive(Debug, Clone)]
pub struct EntryTerms<S = f64> {
    /// `pairs[a][a']`
    pub pairs: Vec<Vec<PairTraces<S>>>,
    /// `Re Tr(G_aa (C_a ⊙ |C_a|^2))` per tAP.
    pub distortion: Vec<S>,
}

/// All trace terms for one sAP.
#[derive(Debug, Clone)]
pub struct FimTerms<S = f64> {
    pub entries: [EntryTerms<S>; 4],
}

impl<S: Real> FimTerms<S> {
    /// `derivs[a]` are the two derivative channels of tAP `a` toward this sAP.
    pub fn new(derivs: &[&[Mat<S>; 2]], w: &[Mat<S>], noise: f64) -> Self {
        let scale = S::from_f64(2.0 / noise);
        let power: Vec<Vec<S>> = w.iter().map(gram_diag).collect();
        let moments: Vec<Mat<S>> = w.iter().map(cubic_moment).collect();
        let taps = w.len();
        let build = |(n1, n2): (usize, usize)| {
            let mut pairs = Vec::with_capacity(taps);
            let mut distortion = Vec::with_capacity(taps);
            for a in 0..taps {
                let mut row = Vec::with_capacity(taps);
                for ab in 0..taps {
                    let g = derivs[ab][n1]
                        .adjoint()
                        .matmul(&derivs[a][n2])
                        .expect("shape");
                    let c = w[a].matmul(&w[ab].adjoint()).expect("shape");
                    row.push(pair_traces(&g, &c, &power[a], &power[ab], scale));
                    if a == ab {
                        let t = g
                            .hadamard(&moments[a].map(|z| z.conj()))
                            .as_slice()
                            .iter()
                            .fold(S::zero(), |acc, z| acc + z.re);
                        distortion.push(t * scale);
                    }
                }
                pairs.push(row);
            }
            EntryTerms { pairs, distortion }
        };
        Self {
            entries: ENTRIES.map(build),
        }
    }

    pub fn taps(&self) -> usize {
        self.entries[0].distortion.len()
    }

    /// Expected FIM entry for a specific coefficient vector.
    pub fn entry(&self, e: usize, beta1: f64, beta3: &[Complex64]) -> S {
        let terms = &self.entries[e];
        let b3: Vec<Cx<S>> = beta3.iter().map(|&z| cst(z)).collect();
        let b1 = S::from_f64(beta1);
        let mut acc = S::zero();
        for (a, row) in terms.pairs.iter().enumerate() {
            for (ab, t) in row.iter().enumerate() {
                let v = t.plain.scale(b1 * b1)
                    + t.left * b3[a].scale(b1 + b1)
                    + t.right * b3[ab].conj().scale(b1 + b1)
                    + t.both * b3[a] * b3[ab].conj().scale(S::from_f64(4.0));
                acc = acc + v.re;
            }
        }
        terms
            .distortion
            .iter()
            .zip(beta3)
            .fold(acc, |acc, (&d, b)| acc + d.scale(2.0 * b.norm_sqr()))
    }

    /// Symmetrised 2x2 expected FIM.
    pub fn matrix(&self, beta1: f64, beta3: &[Complex64]) -> [[S; 2]; 2] {
        let e = |i| self.entry(i, beta1, beta3);
        let off = (e(1) + e(2)).scale(0.5);
        [[e(0), off], [off, e(3)]]
    }
}

/// `T[j][i] = G[i,j] C[j,i]` summed with the four diagonal weightings.
fn pair_traces<S: Real>(g: &Mat<S>, c: &Mat<S>, da: &[S], db: &[S], scale: S) -> PairTraces<S> {
    let zero = Complex::new(S::zero(), S::zero());
    let (mut plain, mut left, mut right, mut both) = (zero, zero, zero, zero);
    for j in 0..c.rows() {
        let mut row = zero;
        let mut row_right = zero;
        for i in 0..c.cols() {
            let t = g[(i, j)] * c[(j, i)];
            row = row + t;
            row_right = row_right + t.scale(db[i]);
        }
        plain = plain + row;
        left = left + row.scale(da[j]);
        right = right + row_right;
        both = both + row_right.scale(da[j]);
    }
    PairTraces {
        plain: plain.scale(scale),
        left: left.scale(scale),
        right: right.scale(scale),
        both: both.scale(scale),
    }
}

/// Trace terms of every sAP for the given channels and beamformers.
pub fn fim_terms<S: Real>(channels: &ChannelSet<S>, w: &[Mat<S>], noise: f64) -> Vec<FimTerms<S>> {
    let saps = channels.derivs.first().map_or(0, |d| d.len());
    (0..saps)
        .map(|b| {
            let d: Vec<&[Mat<S>; 2]> = channels.derivs.iter().map(|row| &row[b]).collect();
            FimTerms::new(&d, w, noise)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FimMatrix {
    pub entries: [[f64; 2]; 2],
    pub sap: usize,
}

impl FimMatrix {
    pub fn trace(&self) -> f64 {
        self.entries[0][0] + self.entries[1][1]
    }

    pub fn det(&self) -> f64 {
        let m = &self.entries;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

fn sap_terms(
    b: usize,
    channels: &ChannelSet,
    sol: &Solution,
    budget: &LinkBudget,
) -> Result<FimTerms> {
    let derivs = channels
        .derivs
        .iter()
        .map(|row| row.get(b))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::InvalidArgument(format!("no derivative channels for sAP {b}")))?;
    if derivs.len() != sol.w.len() {
        return Err(Error::Shape {
            expected: format!("{} tAPs", sol.w.len()),
            got: format!("{}", derivs.len()),
        });
    }
    Ok(FimTerms::new(&derivs, &sol.w, budget.noise_sap))
}

pub fn fim_entry_expected(
    b: usize,
    n1: usize,
    n2: usize,
    channels: &ChannelSet,
    sol: &Solution,
    params: &PaParams,
    budget: &LinkBudget,
) -> Result<f64> {
    if n1 > 1 || n2 > 1 {
        return Err(Error::InvalidArgument(format!(
            "entry ({n1}, {n2}) out of range"
        )));
    }
    Ok(
        sap_terms(b, channels, sol, budget)?.entry(
            entry_index(n1, n2),
            params.beta1,
            &params.beta3,
        ),
    )
}

pub fn fim_matrix(
    b: usize,
    channels: &ChannelSet,
    sol: &Solution,
    params: &PaParams,
    budget: &LinkBudget,
) -> Result<FimMatrix> {
    let terms = sap_terms(b, channels, sol, budget)?;
    Ok(FimMatrix {
        entries: terms.matrix(params.beta1, &params.beta3),
        sap: b,
    })
}

/// `Tr(J^-1)` of a symmetric 2x2 FIM.
pub fn crlb_trace(fim: &FimMatrix) -> Result<f64> {
    let m = &fim.entries;
    let norm_sqr: f64 = m.iter().flatten().map(|x| x * x).sum();
    let det = fim.det();
    if det.abs() <= 1e-12 * norm_sqr || det == 0.0 || !det.is_finite() {
        return Err(Error::SingularFim { det: det.abs() });
    }
    Ok(fim.trace() / det)
}

pub fn crlb_traces(
    channels: &ChannelSet,
    sol: &Solution,
    params: &PaParams,
    budget: &LinkBudget,
) -> Vec<Result<f64>> {
    (0..channels.derivs.first().map_or(0, |d| d.len()))
        .map(|b| crlb_trace(&fim_matrix(b, channels, sol, params, budget)?))
        .collect()
}

/// Per-sAP check of `Tr(CRLB_b) <= gamma`; a singular FIM counts as infeasible.
pub fn crlb_feasible(
    channels: &ChannelSet,
    sol: &Solution,
    params: &PaParams,
    budget: &LinkBudget,
    gamma: f64,
) -> Vec<bool> {
    crlb_traces(channels, sol, params, budget)
        .into_iter()
        .map(|t| matches!(t, Ok(v) if v <= gamma))
        .collect()
}
