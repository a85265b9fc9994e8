//! Functional (continuous) tensor trains: a multivariate function stored as a
//! per-dimension orthonormal basis plus a complex coefficient tensor train.
//! Because the basis is orthonormal in L²[a,b], function-space operations
//! (inner products, norms, rounding) reduce exactly to the corresponding
//! coefficient-tensor operations.
//!
//! Two basis families are provided. Legendre polynomials give exact
//! polynomial calculus (projection, differentiation and products of
//! polynomials are exact), which the algebraic operations and the potential
//! construction rely on. Sine (Dirichlet box) modes diagonalize the second
//! derivative exactly, so the kinetic operator is Hermitian with the same
//! spectral radius as the matching uniform grid; that property is what makes
//! long Chebyshev propagations in this representation stable, and the
//! dynamics path uses this family by default.

use ndarray::{s, Array2, Array3};
use std::io::{Read, Write};

use crate::error::{Result, TtError};
use crate::tensor_train::TensorTrain;
use crate::C64;

const FTC_MAGIC: [u8; 4] = *b"FTC1";

/// Evaluates Legendre polynomials P_0..P_{p-1} at `u` in [-1, 1].
fn legendre_all(p: usize, u: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(p);
    let mut prev = 1.0;
    out.push(prev);
    if p == 1 {
        return out;
    }
    let mut cur = u;
    out.push(cur);
    for l in 1..p - 1 {
        let next = ((2 * l + 1) as f64 * u * cur - l as f64 * prev) / (l + 1) as f64;
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// Derivatives P'_0..P'_{p-1} at `u`, via P'_{l+1} = P'_{l-1} + (2l+1) P_l.
fn legendre_deriv_all(p: usize, u: f64) -> Vec<f64> {
    let vals = legendre_all(p, u);
    let mut out = vec![0.0; p];
    if p >= 2 {
        out[1] = 1.0;
    }
    for l in 1..p.saturating_sub(1) {
        out[l + 1] = out[l - 1] + (2 * l + 1) as f64 * vals[l];
    }
    out
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for q in 0..n.div_ceil(2) {
        let mut u = (std::f64::consts::PI * (q as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let vals = legendre_all(n + 1, u);
            let pn = vals[n];
            // (1-u^2) P_n' = n (P_{n-1} - u P_n)
            let dpn = n as f64 * (vals[n - 1] - u * pn) / (1.0 - u * u);
            let step = pn / dpn;
            u -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let vals = legendre_all(n + 1, u);
        let dpn = n as f64 * (vals[n - 1] - u * vals[n]) / (1.0 - u * u);
        nodes[q] = -u;
        nodes[n - 1 - q] = u;
        let w = 2.0 / ((1.0 - u * u) * dpn * dpn);
        weights[q] = w;
        weights[n - 1 - q] = w;
    }
    (nodes, weights)
}

/// Basis family tag for [`UnivariateBasis`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisFamily {
    /// Orthonormal Legendre polynomials
    /// φ_l(x) = sqrt((2l+1)/(b-a)) P_l(2(x-a)/(b-a) - 1).
    Legendre,
    /// Orthonormal Dirichlet box modes
    /// φ_l(x) = sqrt(2/(b-a)) sin((l+1)π(x-a)/(b-a)).
    Sine,
}

/// An orthonormal basis φ_0..φ_{p-1} on [a, b] with ∫_a^b φ_i φ_j dx = δ_ij,
/// from one of the [`BasisFamily`] families. `degree` counts basis functions.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateBasis {
    a: f64,
    b: f64,
    degree: usize,
    family: BasisFamily,
}

impl UnivariateBasis {
    fn with_family(a: f64, b: f64, degree: usize, family: BasisFamily) -> Result<Self> {
        if !(b > a) {
            return Err(TtError::InvalidArgument("basis domain needs b > a".into()));
        }
        if degree < 1 {
            return Err(TtError::InvalidArgument("basis degree must be >= 1".into()));
        }
        Ok(Self { a, b, degree, family })
    }

    /// Orthonormal Legendre basis of `degree` polynomials on [a, b].
    pub fn legendre(a: f64, b: f64, degree: usize) -> Result<Self> {
        Self::with_family(a, b, degree, BasisFamily::Legendre)
    }

    /// Orthonormal Dirichlet sine basis of `degree` modes on [a, b].
    pub fn sine(a: f64, b: f64, degree: usize) -> Result<Self> {
        Self::with_family(a, b, degree, BasisFamily::Sine)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    fn to_unit(&self, x: f64) -> f64 {
        2.0 * (x - self.a) / (self.b - self.a) - 1.0
    }

    /// Angular frequency of sine mode `l`: (l+1)π/(b-a).
    fn sine_freq(&self, l: usize) -> f64 {
        (l + 1) as f64 * std::f64::consts::PI / (self.b - self.a)
    }

    /// Values of all `count` leading basis functions at `x`.
    pub fn eval_all_to(&self, count: usize, x: f64) -> Vec<f64> {
        let width = self.b - self.a;
        match self.family {
            BasisFamily::Legendre => {
                let u = self.to_unit(x);
                legendre_all(count, u)
                    .into_iter()
                    .enumerate()
                    .map(|(l, v)| ((2 * l + 1) as f64 / width).sqrt() * v)
                    .collect()
            }
            BasisFamily::Sine => {
                let amp = (2.0 / width).sqrt();
                (0..count)
                    .map(|l| amp * (self.sine_freq(l) * (x - self.a)).sin())
                    .collect()
            }
        }
    }

    /// Values φ_0(x)..φ_{p-1}(x).
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        self.eval_all_to(self.degree, x)
    }

    /// Derivatives φ'_0(x)..φ'_{p-1}(x).
    pub fn eval_deriv_all(&self, x: f64) -> Vec<f64> {
        let width = self.b - self.a;
        match self.family {
            BasisFamily::Legendre => {
                let u = self.to_unit(x);
                let chain = 2.0 / width;
                legendre_deriv_all(self.degree, u)
                    .into_iter()
                    .enumerate()
                    .map(|(l, v)| ((2 * l + 1) as f64 / width).sqrt() * v * chain)
                    .collect()
            }
            BasisFamily::Sine => {
                let amp = (2.0 / width).sqrt();
                (0..self.degree)
                    .map(|l| {
                        let w = self.sine_freq(l);
                        amp * w * (w * (x - self.a)).cos()
                    })
                    .collect()
            }
        }
    }

    /// Gauss-Legendre quadrature of the given order, mapped onto [a, b].
    pub fn quadrature(&self, order: usize) -> (Vec<f64>, Vec<f64>) {
        let (u, w) = gauss_legendre(order);
        let half = 0.5 * (self.b - self.a);
        let mid = 0.5 * (self.a + self.b);
        (
            u.iter().map(|&t| mid + half * t).collect(),
            w.iter().map(|&t| half * t).collect(),
        )
    }

    /// Projects a function onto the basis from its samples at the
    /// Gauss-Legendre nodes of order `samples.len()`:
    /// θ_l = Σ_q w_q f(x_q) φ_l(x_q). Exact when f is a polynomial of degree
    /// less than the basis degree.
    pub fn project(&self, samples: &[C64]) -> Result<Vec<C64>> {
        let order = samples.len();
        if order < self.degree {
            return Err(TtError::InvalidArgument(format!(
                "quadrature order {order} below basis degree {}",
                self.degree
            )));
        }
        let (nodes, weights) = self.quadrature(order);
        let mut theta = vec![C64::new(0.0, 0.0); self.degree];
        for q in 0..order {
            let phis = self.eval_all(nodes[q]);
            for l in 0..self.degree {
                theta[l] += samples[q] * weights[q] * phis[l];
            }
        }
        Ok(theta)
    }

    /// Projects a closure by sampling it at Gauss-Legendre nodes of `order`.
    pub fn project_fn<F: Fn(f64) -> C64>(&self, f: F, order: usize) -> Result<Vec<C64>> {
        let (nodes, _) = self.quadrature(order);
        let samples: Vec<C64> = nodes.iter().map(|&x| f(x)).collect();
        self.project(&samples)
    }

    /// Reconstructs Σ_l θ_l φ_l(x).
    pub fn reconstruct(&self, theta: &[C64], x: f64) -> C64 {
        let phis = self.eval_all_to(theta.len(), x);
        theta
            .iter()
            .zip(&phis)
            .map(|(&t, &p)| t * p)
            .fold(C64::new(0.0, 0.0), |a, v| a + v)
    }

    /// p x p matrix mapping coefficient vectors to coefficients of the first
    /// or second derivative, D_il = ∫ φ_i ∂ᵏφ_l.
    ///
    /// For the Legendre family this is exact because derivatives of
    /// degree-<p polynomials stay below degree p. For the sine family the
    /// first-derivative matrix is the exact L² projection (cosines are not in
    /// the span, so information above the basis is discarded), while the
    /// second derivative is exact and diagonal: φ_l'' = -((l+1)π/(b-a))² φ_l.
    pub fn diff_matrix(&self, order: u8) -> Result<Array2<f64>> {
        if order != 1 && order != 2 {
            return Err(TtError::InvalidArgument(format!(
                "derivative order must be 1 or 2, got {order}"
            )));
        }
        let p = self.degree;
        match self.family {
            BasisFamily::Legendre => {
                let (nodes, weights) = self.quadrature(p);
                let mut d1 = Array2::zeros((p, p));
                for q in 0..p {
                    let phis = self.eval_all(nodes[q]);
                    let dphis = self.eval_deriv_all(nodes[q]);
                    for i in 0..p {
                        for l in 0..p {
                            d1[[i, l]] += weights[q] * phis[i] * dphis[l];
                        }
                    }
                }
                if order == 1 {
                    Ok(d1)
                } else {
                    Ok(d1.dot(&d1))
                }
            }
            BasisFamily::Sine => {
                let width = self.b - self.a;
                let mut d = Array2::zeros((p, p));
                if order == 2 {
                    for l in 0..p {
                        let w = self.sine_freq(l);
                        d[[l, l]] = -w * w;
                    }
                } else {
                    // Closed form: ∫_a^b φ_i φ_l' dx = 4mn/((b-a)(m² - n²))
                    // for m = i+1, n = l+1 of opposite parity, zero
                    // otherwise (antisymmetric: boundary terms vanish).
                    for i in 0..p {
                        for l in 0..p {
                            let (m, n) = ((i + 1) as f64, (l + 1) as f64);
                            if (i + l) % 2 == 1 {
                                d[[i, l]] = 4.0 * m * n / (width * (m * m - n * n));
                            }
                        }
                    }
                }
                Ok(d)
            }
        }
    }

    /// Γ_l = ∫_a^b φ_l dx. Legendre: only Γ_0 = sqrt(b-a) is nonzero by
    /// orthogonality against the constant function. Sine: odd-index modes
    /// integrate to zero, Γ_l = sqrt(2(b-a))·2/((l+1)π) for even l.
    pub fn integrals(&self) -> Vec<f64> {
        match self.family {
            BasisFamily::Legendre => {
                let mut g = vec![0.0; self.degree];
                g[0] = (self.b - self.a).sqrt();
                g
            }
            BasisFamily::Sine => {
                let width = self.b - self.a;
                (0..self.degree)
                    .map(|l| {
                        if l % 2 == 0 {
                            (2.0 / width).sqrt() * 2.0 / self.sine_freq(l)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
        }
    }
}

/// A d-dimensional complex function in functional tensor-train form.
#[derive(Debug, Clone)]
pub struct FunctionTrain {
    bases: Vec<UnivariateBasis>,
    coeffs: TensorTrain,
}

impl FunctionTrain {
    pub fn new(bases: Vec<UnivariateBasis>, coeffs: TensorTrain) -> Result<Self> {
        if bases.len() != coeffs.ndim() {
            return Err(TtError::DimensionMismatch(
                "basis count differs from coefficient tensor order".into(),
            ));
        }
        for (k, (b, n)) in bases.iter().zip(coeffs.dims()).enumerate() {
            if b.degree() != n {
                return Err(TtError::DimensionMismatch(format!(
                    "dimension {k}: basis degree {} vs coefficient mode size {n}",
                    b.degree()
                )));
            }
        }
        Ok(Self { bases, coeffs })
    }

    /// Rank-1 function train from per-dimension coefficient vectors.
    pub fn from_rank1(bases: Vec<UnivariateBasis>, factors: &[Vec<C64>]) -> Result<Self> {
        Self::new(bases, TensorTrain::from_rank1(factors)?)
    }

    /// The constant function with the given value.
    pub fn constant(bases: Vec<UnivariateBasis>, value: C64) -> Result<Self> {
        let mut factors = Vec::with_capacity(bases.len());
        for (j, b) in bases.iter().enumerate() {
            let (a, bb) = b.domain();
            let mut f = vec![C64::new(0.0, 0.0); b.degree()];
            // 1 = sqrt(b-a) φ_0, since φ_0 = (b-a)^{-1/2}
            f[0] = C64::new((bb - a).sqrt(), 0.0);
            if j == 0 {
                f[0] *= value;
            }
            factors.push(f);
        }
        Self::from_rank1(bases, &factors)
    }

    pub fn bases(&self) -> &[UnivariateBasis] {
        &self.bases
    }

    pub fn coeffs(&self) -> &TensorTrain {
        &self.coeffs
    }

    pub fn ndim(&self) -> usize {
        self.bases.len()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.coeffs.ranks()
    }

    pub fn max_rank(&self) -> usize {
        self.coeffs.max_rank()
    }

    fn check_same_bases(&self, other: &Self) -> Result<()> {
        if self.bases != other.bases {
            return Err(TtError::DimensionMismatch(
                "function trains have different bases".into(),
            ));
        }
        Ok(())
    }

    /// Evaluates the function at a point inside the tensor-product domain.
    pub fn eval(&self, x: &[f64]) -> Result<C64> {
        if x.len() != self.ndim() {
            return Err(TtError::DimensionMismatch(format!(
                "point has {} coordinates, function train has {} dimensions",
                x.len(),
                self.ndim()
            )));
        }
        for (k, (&xk, b)) in x.iter().zip(&self.bases).enumerate() {
            let (a, bb) = b.domain();
            if !(a..=bb).contains(&xk) {
                return Err(TtError::IndexOutOfRange(format!(
                    "coordinate {k}: {xk} outside [{a}, {bb}]"
                )));
            }
        }
        let mut v = ndarray::Array1::from_elem(1, C64::new(1.0, 0.0));
        for (k, b) in self.bases.iter().enumerate() {
            let core = self.coeffs.core(k);
            let phis = b.eval_all(x[k]);
            let (rl, p, rr) = (core.shape()[0], core.shape()[1], core.shape()[2]);
            let mut m = Array2::zeros((rl, rr));
            for l in 0..p {
                let slice = core.slice(s![.., l, ..]);
                m.scaled_add(C64::new(phis[l], 0.0), &slice);
            }
            let mut next = ndarray::Array1::zeros(rr);
            for i in 0..rl {
                for j in 0..rr {
                    next[j] += v[i] * m[[i, j]];
                }
            }
            v = next;
        }
        Ok(v[0])
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_bases(other)?;
        Self::new(self.bases.clone(), self.coeffs.add(&other.coeffs)?)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            bases: self.bases.clone(),
            coeffs: self.coeffs.scale(s),
        }
    }

    /// Complex conjugate of the represented function (the basis is real, so
    /// this is the conjugate of the coefficients).
    pub fn conj(&self) -> Self {
        Self {
            bases: self.bases.clone(),
            coeffs: self.coeffs.conj(),
        }
    }

    /// Pointwise product, projected per dimension onto an orthonormal
    /// Legendre basis of degree min(p_f + p_g - 1, 64) using Gauss-Legendre
    /// quadrature of order p_f + p_g, with trailing coefficient tails below
    /// 1e-12 (relative) truncated away.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.ndim() != other.ndim() {
            return Err(TtError::DimensionMismatch(
                "function trains have different dimension counts".into(),
            ));
        }
        const P_CAP: usize = 64;
        const TAIL_TOL: f64 = 1e-12;
        let d = self.ndim();
        let mut bases = Vec::with_capacity(d);
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let bf = &self.bases[k];
            let bg = &other.bases[k];
            if bf.domain() != bg.domain() {
                return Err(TtError::DimensionMismatch(format!(
                    "dimension {k}: basis domains differ"
                )));
            }
            if bf.family() != bg.family() {
                return Err(TtError::DimensionMismatch(format!(
                    "dimension {k}: basis families differ"
                )));
            }
            let (pf, pg) = (bf.degree(), bg.degree());
            let p_new = (pf + pg - 1).min(P_CAP);
            // Legendre: Gauss-Legendre of order pf+pg is exact for the
            // product integrands. Sine: products are trigonometric, so the
            // quadrature only converges; oversample well past the highest
            // combined frequency.
            let q_order = match bf.family() {
                BasisFamily::Legendre => pf + pg,
                BasisFamily::Sine => 2 * (pf + pg + p_new) + 16,
            };
            let (a, b) = bf.domain();
            let new_basis = UnivariateBasis::with_family(a, b, p_new, bf.family())?;
            let (nodes, weights) = new_basis.quadrature(q_order);

            let ca = self.coeffs.core(k);
            let cb = other.coeffs.core(k);
            let (raf, rag) = (ca.shape()[0], ca.shape()[2]);
            let (rbf, rbg) = (cb.shape()[0], cb.shape()[2]);

            // Fiber values at the quadrature nodes.
            let mut fa = Array3::<C64>::zeros((raf, q_order, rag));
            let mut gb = Array3::<C64>::zeros((rbf, q_order, rbg));
            for (q, &xq) in nodes.iter().enumerate() {
                let pf_vals = bf.eval_all(xq);
                for l in 0..pf {
                    let slice = ca.slice(s![.., l, ..]);
                    fa.slice_mut(s![.., q, ..])
                        .scaled_add(C64::new(pf_vals[l], 0.0), &slice);
                }
                let pg_vals = bg.eval_all(xq);
                for l in 0..pg {
                    let slice = cb.slice(s![.., l, ..]);
                    gb.slice_mut(s![.., q, ..])
                        .scaled_add(C64::new(pg_vals[l], 0.0), &slice);
                }
            }

            // Project the pointwise Kronecker product back onto the basis.
            let mut core = Array3::<C64>::zeros((raf * rbf, p_new, rag * rbg));
            for (q, &xq) in nodes.iter().enumerate() {
                let phis = new_basis.eval_all(xq);
                for af in 0..raf {
                    for bf_i in 0..rbf {
                        for ag in 0..rag {
                            for bg_i in 0..rbg {
                                let v = fa[[af, q, ag]] * gb[[bf_i, q, bg_i]];
                                let row = af * rbf + bf_i;
                                let col = ag * rbg + bg_i;
                                for (i, &phi) in phis.iter().enumerate() {
                                    core[[row, i, col]] += v * weights[q] * phi;
                                }
                            }
                        }
                    }
                }
            }

            // Drop negligible trailing coefficients per dimension.
            let peak = core.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
            let mut keep = 1;
            for i in (0..p_new).rev() {
                let m = core
                    .slice(s![.., i, ..])
                    .iter()
                    .map(|v| v.norm())
                    .fold(0.0f64, f64::max);
                if m > TAIL_TOL * peak {
                    keep = i + 1;
                    break;
                }
            }
            bases.push(UnivariateBasis::with_family(a, b, keep, bf.family())?);
            cores.push(core.slice(s![.., ..keep, ..]).to_owned());
        }
        Self::new(bases, TensorTrain::new(cores)?)
    }

    /// Re-expresses the train with the given per-dimension degree, truncating
    /// coefficients (the L² projection onto the lower-degree space) or
    /// zero-padding as needed.
    pub fn with_degree(&self, degree: usize) -> Result<Self> {
        if degree < 1 {
            return Err(TtError::InvalidArgument("degree must be >= 1".into()));
        }
        let mut bases = Vec::with_capacity(self.ndim());
        let mut cores = Vec::with_capacity(self.ndim());
        for (k, b) in self.bases.iter().enumerate() {
            let (a, bb) = b.domain();
            bases.push(UnivariateBasis::with_family(a, bb, degree, b.family())?);
            let core = self.coeffs.core(k);
            let (rl, p, rr) = (core.shape()[0], core.shape()[1], core.shape()[2]);
            let mut out = Array3::zeros((rl, degree, rr));
            let copy = p.min(degree);
            out.slice_mut(s![.., ..copy, ..])
                .assign(&core.slice(s![.., ..copy, ..]));
            cores.push(out);
        }
        Self::new(bases, TensorTrain::new(cores)?)
    }

    /// Partial derivative along dimension `k` of the given order (1 or 2);
    /// only core k changes, so ranks are preserved.
    pub fn diff(&self, k: usize, order: u8) -> Result<Self> {
        if k >= self.ndim() {
            return Err(TtError::IndexOutOfRange(format!(
                "dimension {k} out of range for {}-dimensional train",
                self.ndim()
            )));
        }
        let dmat = self.bases[k].diff_matrix(order)?;
        let coeffs = self.coeffs.mode_apply(k, |fiber| apply_real_matrix(&dmat, fiber))?;
        Self::new(self.bases.clone(), coeffs)
    }

    /// ∫ f over the full tensor-product domain: contracts each core against
    /// its basis-integral vector Γ, then multiplies the resulting matrices.
    pub fn integrate(&self) -> C64 {
        let mut v = ndarray::Array1::from_elem(1, C64::new(1.0, 0.0));
        for (k, b) in self.bases.iter().enumerate() {
            let core = self.coeffs.core(k);
            let gam = b.integrals();
            let (rl, p, rr) = (core.shape()[0], core.shape()[1], core.shape()[2]);
            let mut m = Array2::zeros((rl, rr));
            for l in 0..p {
                if gam[l] != 0.0 {
                    m.scaled_add(C64::new(gam[l], 0.0), &core.slice(s![.., l, ..]));
                }
            }
            let mut next = ndarray::Array1::zeros(rr);
            for i in 0..rl {
                for j in 0..rr {
                    next[j] += v[i] * m[[i, j]];
                }
            }
            v = next;
        }
        v[0]
    }

    /// L² inner product ∫ conj(f)·g via the running-vector core contraction.
    /// With a shared orthonormal basis this equals the coefficient-tensor
    /// inner product, so the product train is never formed.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.check_same_bases(other)?;
        self.coeffs.inner(&other.coeffs, 1.0)
    }

    /// L² norm of the function (= Frobenius norm of the coefficients).
    pub fn norm(&self) -> Result<f64> {
        self.coeffs.norm(1.0)
    }

    /// Kinetic-energy action (-1/(2m)) Σ_k ∂²f/∂x_k². The sum over
    /// dimensions is built in one pass as an exact rank-2r block train
    /// (identical to accumulating the d single-dimension derivatives with
    /// ft_add), leaving any rounding to the caller.
    pub fn laplacian(&self, mass: f64) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(TtError::InvalidArgument("mass must be positive".into()));
        }
        let dmats: Vec<Array2<f64>> = self
            .bases
            .iter()
            .map(|b| b.diff_matrix(2).map(|d| d * (-1.0 / (2.0 * mass))))
            .collect::<Result<_>>()?;
        let coeffs = self
            .coeffs
            .sum_mode_transforms(|k, fiber| apply_real_matrix(&dmats[k], fiber))?;
        Self::new(self.bases.clone(), coeffs)
    }

    /// Rounds the coefficient train; by orthonormality the L² function error
    /// is bounded by tol·‖f‖.
    pub fn round(&self, tol: f64, rmax: usize) -> Result<Self> {
        Self::new(self.bases.clone(), self.coeffs.round(tol, rmax)?)
    }

    /// Writes the FTC1 checkpoint: magic, u32 dimension count, per-dimension
    /// (f64 a, f64 b, u64 degree, u8 family: 0 = Legendre, 1 = sine), then
    /// the coefficient train in TTC1 format.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&FTC_MAGIC)?;
        w.write_all(&(self.ndim() as u32).to_le_bytes())?;
        for b in &self.bases {
            let (a, bb) = b.domain();
            w.write_all(&a.to_le_bytes())?;
            w.write_all(&bb.to_le_bytes())?;
            w.write_all(&(b.degree() as u64).to_le_bytes())?;
            let fam = match b.family() {
                BasisFamily::Legendre => 0u8,
                BasisFamily::Sine => 1u8,
            };
            w.write_all(&[fam])?;
        }
        self.coeffs.write_to(w)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != FTC_MAGIC {
            return Err(TtError::Format("bad FTC1 magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let d = u32::from_le_bytes(b4) as usize;
        if d == 0 {
            return Err(TtError::Format("zero-dimensional checkpoint".into()));
        }
        let mut bases = Vec::with_capacity(d);
        let mut b8 = [0u8; 8];
        for _ in 0..d {
            r.read_exact(&mut b8)?;
            let a = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            let b = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            let p = u64::from_le_bytes(b8) as usize;
            let mut b1 = [0u8; 1];
            r.read_exact(&mut b1)?;
            let family = match b1[0] {
                0 => BasisFamily::Legendre,
                1 => BasisFamily::Sine,
                other => {
                    return Err(TtError::Format(format!("unknown basis family tag {other}")));
                }
            };
            bases.push(
                UnivariateBasis::with_family(a, b, p, family)
                    .map_err(|e| TtError::Format(format!("bad basis record: {e}")))?,
            );
        }
        let coeffs = TensorTrain::read_from(r)?;
        Self::new(bases, coeffs).map_err(|e| TtError::Format(format!("inconsistent checkpoint: {e}")))
    }
}

/// In-place fiber transform out = M · fiber for a real matrix M.
fn apply_real_matrix(m: &Array2<f64>, fiber: &mut [C64]) {
    let p = fiber.len();
    debug_assert_eq!(m.shape(), [p, p]);
    let mut out = vec![C64::new(0.0, 0.0); p];
    for i in 0..p {
        let mut acc = C64::new(0.0, 0.0);
        for l in 0..p {
            acc += fiber[l] * m[[i, l]];
        }
        out[i] = acc;
    }
    fiber.copy_from_slice(&out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_ft(rng: &mut ChaCha8Rng, d: usize, degree: usize, rank: usize) -> FunctionTrain {
        let bases: Vec<UnivariateBasis> =
            (0..d).map(|_| UnivariateBasis::legendre(-1.0, 1.0, degree).unwrap()).collect();
        let mut cores = Vec::new();
        for k in 0..d {
            let l = if k == 0 { 1 } else { rank };
            let r = if k == d - 1 { 1 } else { rank };
            let mut core = Array3::zeros((l, degree, r));
            for v in core.iter_mut() {
                *v = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            cores.push(core);
        }
        FunctionTrain::new(bases, TensorTrain::new(cores).unwrap()).unwrap()
    }

    /// Projects x |-> f(x) per dimension to build a rank-1 FT.
    fn rank1_from_fns(
        bases: &[UnivariateBasis],
        fns: &[&dyn Fn(f64) -> f64],
        order: usize,
    ) -> FunctionTrain {
        let factors: Vec<Vec<C64>> = bases
            .iter()
            .zip(fns)
            .map(|(b, f)| b.project_fn(|x| c(f(x), 0.0), order).unwrap())
            .collect();
        FunctionTrain::from_rank1(bases.to_vec(), &factors).unwrap()
    }

    #[test]
    fn basis_orthonormality() {
        for &(a, b, p) in &[(-1.0, 1.0, 8usize), (-5.0, 5.0, 32)] {
            let basis = UnivariateBasis::legendre(a, b, p).unwrap();
            let (nodes, weights) = basis.quadrature(p + 4);
            for i in 0..p {
                for j in 0..p {
                    let mut acc = 0.0;
                    for (q, &x) in nodes.iter().enumerate() {
                        let phis = basis.eval_all(x);
                        acc += weights[q] * phis[i] * phis[j];
                    }
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((acc - want).abs() < 1e-12, "({i},{j}): {acc}");
                }
            }
        }
    }

    #[test]
    fn sine_basis_orthonormality_and_derivatives() {
        let (a, b, p) = (-5.0, 5.0, 16usize);
        let basis = UnivariateBasis::sine(a, b, p).unwrap();
        assert_eq!(basis.family(), BasisFamily::Sine);
        let (nodes, weights) = basis.quadrature(4 * p + 16);
        for i in 0..p {
            for j in 0..p {
                let mut acc = 0.0;
                for (q, &x) in nodes.iter().enumerate() {
                    let phis = basis.eval_all(x);
                    acc += weights[q] * phis[i] * phis[j];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((acc - want).abs() < 1e-12, "({i},{j}): {acc}");
            }
        }
        // boundary values vanish, derivatives match finite differences
        assert!(basis.eval_all(a).iter().all(|v| v.abs() < 1e-12));
        assert!(basis.eval_all(b).iter().all(|v| v.abs() < 1e-9));
        let h = 1e-6;
        let x0 = 0.7;
        let up = basis.eval_all(x0 + h);
        let dn = basis.eval_all(x0 - h);
        let dv = basis.eval_deriv_all(x0);
        for l in 0..p {
            let fd = (up[l] - dn[l]) / (2.0 * h);
            assert!((fd - dv[l]).abs() < 1e-5 * dv[l].abs().max(1.0), "mode {l}");
        }
    }

    #[test]
    fn sine_diff_matrices_are_structured() {
        let (a, b, p) = (-2.0, 3.0, 12usize);
        let width = b - a;
        let basis = UnivariateBasis::sine(a, b, p).unwrap();
        // second derivative: exact diagonal with the box eigenvalues
        let d2 = basis.diff_matrix(2).unwrap();
        for i in 0..p {
            for l in 0..p {
                let want = if i == l {
                    let w = (l + 1) as f64 * std::f64::consts::PI / width;
                    -w * w
                } else {
                    0.0
                };
                assert!((d2[[i, l]] - want).abs() < 1e-12, "d2[{i},{l}]");
            }
        }
        // first derivative: antisymmetric projection, matches quadrature
        let d1 = basis.diff_matrix(1).unwrap();
        let (nodes, weights) = basis.quadrature(4 * p + 16);
        for i in 0..p {
            for l in 0..p {
                assert!((d1[[i, l]] + d1[[l, i]]).abs() < 1e-12, "antisym ({i},{l})");
                let mut acc = 0.0;
                for (q, &x) in nodes.iter().enumerate() {
                    acc += weights[q] * basis.eval_all(x)[i] * basis.eval_deriv_all(x)[l];
                }
                assert!((d1[[i, l]] - acc).abs() < 1e-10, "d1[{i},{l}]: {} vs {acc}", d1[[i, l]]);
            }
        }
    }

    #[test]
    fn sine_integrals_match_quadrature() {
        let basis = UnivariateBasis::sine(-1.0, 4.0, 9).unwrap();
        let gam = basis.integrals();
        let (nodes, weights) = basis.quadrature(64);
        for l in 0..9 {
            let acc: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(&x, &w)| w * basis.eval_all(x)[l])
                .sum();
            assert!((gam[l] - acc).abs() < 1e-13, "mode {l}: {} vs {acc}", gam[l]);
        }
    }

    #[test]
    fn sine_projection_of_interior_gaussian() {
        // A unit-width Gaussian well inside the box is captured to ~1e-8 by
        // 32 modes; the residual is set by the (tiny) boundary values.
        let basis = UnivariateBasis::sine(-6.0, 6.0, 32).unwrap();
        let g = |x: f64| (1.0 / std::f64::consts::PI).powf(0.25) * (-x * x / 2.0).exp();
        let theta = basis.project_fn(|x| c(g(x), 0.0), 96).unwrap();
        let mut worst = 0.0f64;
        for i in 0..200 {
            let x = -6.0 + 12.0 * i as f64 / 199.0;
            worst = worst.max((basis.reconstruct(&theta, x) - c(g(x), 0.0)).norm());
        }
        // the Gaussian's boundary amplitude is e^{-18}/π^{1/4} ≈ 1.1e-8,
        // which the vanishing basis cannot represent
        assert!(worst <= 2e-8, "max reconstruction error {worst}");
    }

    #[test]
    fn sine_multiply_matches_pointwise_product() {
        let bases: Vec<UnivariateBasis> =
            (0..2).map(|_| UnivariateBasis::sine(-6.0, 6.0, 24).unwrap()).collect();
        let g = |x: f64| (-x * x / 2.0).exp();
        let h = |x: f64| x * (-(x - 0.5).powi(2) / 2.0).exp();
        let gf: &dyn Fn(f64) -> f64 = &g;
        let hf: &dyn Fn(f64) -> f64 = &h;
        let f1 = rank1_from_fns(&bases, &[gf, hf], 96);
        let f2 = rank1_from_fns(&bases, &[hf, gf], 96);
        let prod = f1.multiply(&f2).unwrap();
        assert_eq!(prod.bases()[0].family(), BasisFamily::Sine);
        for i in 0..15 {
            for j in 0..15 {
                let x = -4.0 + 8.0 * i as f64 / 14.0;
                let y = -4.0 + 8.0 * j as f64 / 14.0;
                let want = g(x) * h(x) * h(y) * g(y);
                let got = prod.eval(&[x, y]).unwrap();
                assert!((got - c(want, 0.0)).norm() < 1e-7, "({x},{y})");
            }
        }
        let mixed = FunctionTrain::constant(
            vec![UnivariateBasis::legendre(-6.0, 6.0, 24).unwrap(); 2],
            c(1.0, 0.0),
        )
        .unwrap();
        assert!(f1.multiply(&mixed).is_err());
    }

    #[test]
    fn sine_laplacian_matches_analytic() {
        let bases = vec![UnivariateBasis::sine(-7.0, 7.0, 40).unwrap(); 2];
        let g = |x: f64| (-(x - 0.5).powi(2) / 2.0).exp();
        let gpp = |x: f64| ((x - 0.5).powi(2) - 1.0) * g(x);
        let gf: &dyn Fn(f64) -> f64 = &g;
        let f = rank1_from_fns(&bases, &[gf, gf], 128);
        let kf = f.laplacian(1.0).unwrap();
        let mut worst = 0.0f64;
        for i in 0..20 {
            for j in 0..20 {
                let x = -3.5 + 8.0 * i as f64 / 19.0;
                let y = -3.5 + 8.0 * j as f64 / 19.0;
                let want = -0.5 * (gpp(x) * g(y) + g(x) * gpp(y));
                let got = kf.eval(&[x, y]).unwrap();
                worst = worst.max((got - c(want, 0.0)).norm());
            }
        }
        assert!(worst < 1e-6, "worst {worst}");
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // order n is exact through degree 2n-1
        let (nodes, weights) = gauss_legendre(6);
        for k in 0..=11usize {
            let got: f64 = nodes.iter().zip(&weights).map(|(&x, &w)| w * x.powi(k as i32)).sum();
            let want = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            assert!((got - want).abs() < 1e-13, "x^{k}: {got} vs {want}");
        }
    }

    #[test]
    fn project_constant_hits_only_first_mode() {
        let basis = UnivariateBasis::legendre(-1.0, 1.0, 6).unwrap();
        let theta = basis.project_fn(|_| c(1.0, 0.0), 8).unwrap();
        assert!((theta[0] - c(2.0f64.sqrt(), 0.0)).norm() < 1e-14);
        for t in &theta[1..] {
            assert!(t.norm() < 1e-14);
        }
        assert!(basis.project(&vec![c(1.0, 0.0); 5]).is_err());
    }

    #[test]
    fn project_quartic_roundtrip_exact() {
        let basis = UnivariateBasis::legendre(-1.0, 1.0, 5).unwrap();
        let theta = basis.project_fn(|x| c(x.powi(4), 0.0), 6).unwrap();
        for i in 0..50 {
            let x = -1.0 + 2.0 * i as f64 / 49.0;
            let got = basis.reconstruct(&theta, x);
            assert!((got - c(x.powi(4), 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn project_gaussian_accuracy() {
        // (1/pi)^(1/4) exp(-(x-1)^2/2) on [-5,5] at degree 32
        let basis = UnivariateBasis::legendre(-5.0, 5.0, 32).unwrap();
        let g = |x: f64| (1.0 / std::f64::consts::PI).powf(0.25) * (-(x - 1.0).powi(2) / 2.0).exp();
        let theta = basis.project_fn(|x| c(g(x), 0.0), 64).unwrap();
        let mut worst = 0.0f64;
        for i in 0..200 {
            let x = -5.0 + 10.0 * i as f64 / 199.0;
            worst = worst.max((basis.reconstruct(&theta, x) - c(g(x), 0.0)).norm());
        }
        // The exact degree-32 projection has max error 3.45e-8 on this
        // domain (independent high-order quadrature oracle); degree 36 would
        // be needed to reach 1e-8.
        assert!(worst <= 4e-8, "max reconstruction error {worst}");
    }

    #[test]
    fn diff_matrix_analytic_cases() {
        let basis = UnivariateBasis::legendre(-1.0, 1.0, 6).unwrap();
        let d1 = basis.diff_matrix(1).unwrap();
        let constant = basis.project_fn(|_| c(3.0, 0.0), 8).unwrap();
        let mut dc = constant.clone();
        apply_real_matrix(&d1, &mut dc);
        assert!(dc.iter().all(|v| v.norm() < 1e-13));

        let d2 = basis.diff_matrix(2).unwrap();
        let xsq = basis.project_fn(|x| c(x * x, 0.0), 8).unwrap();
        let mut dd = xsq.clone();
        apply_real_matrix(&d2, &mut dd);
        for i in 0..40 {
            let x = -1.0 + 2.0 * i as f64 / 39.0;
            assert!((basis.reconstruct(&dd, x) - c(2.0, 0.0)).norm() < 1e-12);
        }
        assert!(basis.diff_matrix(3).is_err());
    }

    #[test]
    fn diff_matrix_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let basis = UnivariateBasis::legendre(-1.0, 1.0, 11).unwrap();
        let coeffs: Vec<f64> = (0..11).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = |x: f64| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &a)| a * x.powi(k as i32))
                .sum::<f64>()
        };
        let theta = basis.project_fn(|x| c(f(x), 0.0), 16).unwrap();
        let d1 = basis.diff_matrix(1).unwrap();
        let mut dt = theta.clone();
        apply_real_matrix(&d1, &mut dt);
        let h = 1e-5;
        for i in 0..20 {
            let x = -0.9 + 1.8 * i as f64 / 19.0;
            let fd = (f(x + h) - f(x - h)) / (2.0 * h);
            assert!((basis.reconstruct(&dt, x) - c(fd, 0.0)).norm() <= 1e-7);
        }
    }

    #[test]
    fn basis_integrals_values_and_quadrature_match() {
        let b1 = UnivariateBasis::legendre(-1.0, 1.0, 5).unwrap();
        let g1 = b1.integrals();
        assert!((g1[0] - 2.0f64.sqrt()).abs() < 1e-14);
        assert!(g1[1..].iter().all(|&v| v == 0.0));
        let b5 = UnivariateBasis::legendre(-5.0, 5.0, 8).unwrap();
        assert!((b5.integrals()[0] - 10.0f64.sqrt()).abs() < 1e-14);

        let (nodes, weights) = b5.quadrature(12);
        for l in 0..8 {
            let got: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(&x, &w)| w * b5.eval_all(x)[l])
                .sum();
            assert!((got - b5.integrals()[l]).abs() < 1e-13, "l = {l}");
        }
    }

    #[test]
    fn eval_constant_separable_and_domain_check() {
        let bases: Vec<UnivariateBasis> =
            (0..2).map(|_| UnivariateBasis::legendre(-4.0, 4.0, 6).unwrap()).collect();
        let one = FunctionTrain::constant(bases.clone(), c(1.0, 0.0)).unwrap();
        assert!((one.eval(&[0.3, -2.0]).unwrap() - c(1.0, 0.0)).norm() < 1e-13);

        let id = |x: f64| x;
        let xy = rank1_from_fns(&bases, &[&id, &id], 8);
        assert!((xy.eval(&[2.0, 3.0]).unwrap() - c(6.0, 0.0)).norm() < 1e-12);
        assert!(xy.eval(&[2.0, 5.0]).is_err());
        assert!(xy.eval(&[2.0]).is_err());
    }

    #[test]
    fn eval_matches_coupled_quartic_formula() {
        // d = 3 one-body quartic plus nearest-neighbor bilinear coupling
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let alpha = 0.1;
        let beta = -2.0;
        let d = 3;
        let bases: Vec<UnivariateBasis> =
            (0..d).map(|_| UnivariateBasis::legendre(-5.0, 5.0, 8).unwrap()).collect();
        let fj = |x: f64| alpha * (0.429 * x - 1.126 * x * x - 0.143 * x.powi(3) + 0.563 * x.powi(4));
        let ones: Vec<Vec<C64>> = bases
            .iter()
            .map(|b| b.project_fn(|_| c(1.0, 0.0), 10).unwrap())
            .collect();
        let fs: Vec<Vec<C64>> = bases
            .iter()
            .map(|b| b.project_fn(|x| c(fj(x), 0.0), 10).unwrap())
            .collect();
        let xs: Vec<Vec<C64>> = bases
            .iter()
            .map(|b| b.project_fn(|x| c(x, 0.0), 10).unwrap())
            .collect();
        let coeffs = TensorTrain::sum_nearest_neighbor_generic(
            &ones,
            &fs,
            &xs,
            c(alpha * beta, 0.0),
        )
        .unwrap();
        let ft = FunctionTrain::new(bases, coeffs).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let mut want = 0.0;
            for &xi in &x {
                want += fj(xi);
            }
            for j in 1..d {
                want += alpha * beta * x[j] * x[j - 1];
            }
            let got = ft.eval(&x).unwrap();
            assert!((got - c(want, 0.0)).norm() <= 1e-8 * want.abs().max(1.0));
        }
    }

    #[test]
    fn add_cancellation() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let f = random_ft(&mut rng, 3, 5, 2);
        let z = f.add(&f.scale(c(-1.0, 0.0))).unwrap();
        for _ in 0..30 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(z.eval(&x).unwrap().norm() < 1e-13);
        }
    }

    #[test]
    fn multiply_by_constant_one_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let f = random_ft(&mut rng, 3, 5, 2);
        let one = FunctionTrain::constant(f.bases().to_vec(), c(1.0, 0.0)).unwrap();
        let prod = f.multiply(&one).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (a, b) = (f.eval(&x).unwrap(), prod.eval(&x).unwrap());
            assert!((a - b).norm() < 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn multiply_matches_pointwise_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let f = random_ft(&mut rng, 3, 6, 2);
        let g = random_ft(&mut rng, 3, 6, 2);
        let prod = f.multiply(&g).unwrap();
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let want = f.eval(&x).unwrap() * g.eval(&x).unwrap();
            let got = prod.eval(&x).unwrap();
            assert!((got - want).norm() <= 1e-10 * want.norm().max(1.0));
        }
    }

    #[test]
    fn diff_analytic_cases() {
        let bases: Vec<UnivariateBasis> =
            (0..2).map(|_| UnivariateBasis::legendre(-2.0, 2.0, 6).unwrap()).collect();
        let one = FunctionTrain::constant(bases.clone(), c(1.0, 0.0)).unwrap();
        let dz = one.diff(0, 1).unwrap();
        assert!(dz.eval(&[0.5, -1.0]).unwrap().norm() < 1e-13);

        // x1^2 * x2, second derivative along dimension 0 -> 2 x2
        let sq = |x: f64| x * x;
        let id = |x: f64| x;
        let f = rank1_from_fns(&bases, &[&sq, &id], 8);
        let dd = f.diff(0, 2).unwrap();
        assert_eq!(dd.ranks(), f.ranks());
        for i in 0..20 {
            let x2 = -2.0 + 4.0 * i as f64 / 19.0;
            let got = dd.eval(&[0.7, x2]).unwrap();
            assert!((got - c(2.0 * x2, 0.0)).norm() <= 1e-12);
        }
        assert!(f.diff(2, 1).is_err());
    }

    #[test]
    fn diff_gaussian_second_derivative() {
        let basis = UnivariateBasis::legendre(-5.0, 5.0, 32).unwrap();
        let g = |x: f64| (-(x - 1.0) * (x - 1.0) / 2.0).exp();
        let gpp = |x: f64| ((x - 1.0) * (x - 1.0) - 1.0) * g(x);
        let theta = basis.project_fn(|x| c(g(x), 0.0), 64).unwrap();
        let ft = FunctionTrain::from_rank1(vec![basis.clone()], &[theta]).unwrap();
        let dd = ft.diff(0, 2).unwrap();
        let mut worst = 0.0f64;
        for i in 0..50 {
            let x = -4.0 + 8.0 * i as f64 / 49.0;
            worst = worst.max((dd.eval(&[x]).unwrap() - c(gpp(x), 0.0)).norm());
        }
        assert!(worst <= 1e-6, "sup-norm error {worst}");
    }

    #[test]
    fn diff_commutes_across_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let f = random_ft(&mut rng, 3, 6, 3);
        let ab = f.diff(0, 1).unwrap().diff(1, 1).unwrap();
        let ba = f.diff(1, 1).unwrap().diff(0, 1).unwrap();
        for _ in 0..30 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (u, v) = (ab.eval(&x).unwrap(), ba.eval(&x).unwrap());
            assert!((u - v).norm() <= 1e-12 * u.norm().max(1.0));
        }
    }

    #[test]
    fn integrate_cases() {
        let bases: Vec<UnivariateBasis> =
            (0..2).map(|_| UnivariateBasis::legendre(-1.0, 1.0, 5).unwrap()).collect();
        let one = FunctionTrain::constant(bases.clone(), c(1.0, 0.0)).unwrap();
        assert!((one.integrate() - c(4.0, 0.0)).norm() < 1e-13);

        let id = |x: f64| x;
        let cst = |_x: f64| 1.0;
        let x1 = rank1_from_fns(&bases, &[&id, &cst], 8);
        assert!(x1.integrate().norm() < 1e-13);
    }

    #[test]
    fn integrate_gaussian_product() {
        let basis = UnivariateBasis::legendre(-5.0, 5.0, 32).unwrap();
        let g = |x: f64| (-(x - 1.0) * (x - 1.0)).exp();
        let bases = vec![basis.clone(); 3];
        let gf: &dyn Fn(f64) -> f64 = &g;
        let ft = rank1_from_fns(&bases, &[gf, gf, gf], 64);
        // independent 1-D quadrature oracle
        let (nodes, weights) = basis.quadrature(128);
        let one_d: f64 = nodes.iter().zip(&weights).map(|(&x, &w)| w * g(x)).sum();
        let want = one_d.powi(3);
        assert!((ft.integrate() - c(want, 0.0)).norm() <= 1e-8 * want);
    }

    #[test]
    fn inner_constant_and_parseval() {
        let bases: Vec<UnivariateBasis> =
            (0..2).map(|_| UnivariateBasis::legendre(-1.0, 1.0, 4).unwrap()).collect();
        let one = FunctionTrain::constant(bases, c(1.0, 0.0)).unwrap();
        assert!((one.inner(&one).unwrap() - c(4.0, 0.0)).norm() < 1e-13);

        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let f = random_ft(&mut rng, 4, 5, 3);
        let ip = f.inner(&f).unwrap();
        let frob2 = f.coeffs().norm(1.0).unwrap().powi(2);
        assert!((ip.re - frob2).abs() <= 1e-12 * frob2);
        assert!(ip.im.abs() <= 1e-12 * frob2);
    }

    #[test]
    fn inner_matches_multiply_then_integrate() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let f = random_ft(&mut rng, 4, 5, 3);
        let g = random_ft(&mut rng, 4, 5, 3);
        let fast = f.inner(&g).unwrap();
        let slow = f.conj().multiply(&g).unwrap().integrate();
        assert!((fast - slow).norm() <= 1e-11 * fast.norm().max(1.0));
    }

    #[test]
    fn laplacian_cases() {
        let bases: Vec<UnivariateBasis> =
            (0..2).map(|_| UnivariateBasis::legendre(-2.0, 2.0, 6).unwrap()).collect();
        let one = FunctionTrain::constant(bases.clone(), c(1.0, 0.0)).unwrap();
        let lz = one.laplacian(1.0).unwrap();
        assert!(lz.eval(&[0.5, -0.5]).unwrap().norm() < 1e-12);

        // f = x1^2 + x2^2, -1/2 laplacian = -2  ... here laplacian() applies
        // the kinetic prefactor -1/(2m), so expect -(1/2)(2+2) = -2.
        let sq = |x: f64| x * x;
        let cst = |_x: f64| 1.0;
        let f = rank1_from_fns(&bases, &[&sq, &cst], 8)
            .add(&rank1_from_fns(&bases, &[&cst, &sq], 8))
            .unwrap();
        let kf = f.laplacian(1.0).unwrap();
        for i in 0..20 {
            let x = -2.0 + 4.0 * i as f64 / 19.0;
            let got = kf.eval(&[x, -x / 2.0]).unwrap();
            assert!((got - c(-2.0, 0.0)).norm() <= 1e-10);
        }
        assert!(f.laplacian(0.0).is_err());
    }

    #[test]
    fn laplacian_gaussian_matches_analytic() {
        let basis = UnivariateBasis::legendre(-5.0, 5.0, 32).unwrap();
        let bases = vec![basis; 2];
        let g = |x: f64| (-(x - 1.0) * (x - 1.0) / 2.0).exp();
        let gpp = |x: f64| ((x - 1.0) * (x - 1.0) - 1.0) * g(x);
        let gf: &dyn Fn(f64) -> f64 = &g;
        let f = rank1_from_fns(&bases, &[gf, gf], 64);
        let kf = f.laplacian(1.0).unwrap();
        let mut worst = 0.0f64;
        for i in 0..30 {
            for j in 0..30 {
                let x = -3.0 + 6.0 * i as f64 / 29.0;
                let y = -3.0 + 6.0 * j as f64 / 29.0;
                let want = -0.5 * (gpp(x) * g(y) + g(x) * gpp(y));
                worst = worst.max((kf.eval(&[x, y]).unwrap() - c(want, 0.0)).norm());
            }
        }
        assert!(worst <= 1e-6, "sup-norm error {worst}");
    }

    #[test]
    fn round_behavior() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let f = random_ft(&mut rng, 3, 5, 3);
        let same = f.round(0.0, usize::MAX).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (a, b) = (f.eval(&x).unwrap(), same.eval(&x).unwrap());
            assert!((a - b).norm() < 1e-12 * a.norm().max(1.0));
        }

        let doubled = f.add(&f).unwrap();
        let back = doubled.round(1e-12, usize::MAX).unwrap();
        assert!(back.max_rank() <= f.max_rank());

        // quadrature-norm oracle for the tol = 1e-6 bound
        let r = f.round(1e-6, usize::MAX).unwrap();
        let basis = &f.bases()[0];
        let (nodes, weights) = basis.quadrature(8);
        let mut err2 = 0.0;
        let mut nrm2 = 0.0;
        for (i, &xi) in nodes.iter().enumerate() {
            for (j, &xj) in nodes.iter().enumerate() {
                for (k, &xk) in nodes.iter().enumerate() {
                    let w = weights[i] * weights[j] * weights[k];
                    let a = f.eval(&[xi, xj, xk]).unwrap();
                    let b = r.eval(&[xi, xj, xk]).unwrap();
                    err2 += w * (a - b).norm_sqr();
                    nrm2 += w * a.norm_sqr();
                }
            }
        }
        assert!(err2.sqrt() <= 1e-6 * nrm2.sqrt() * (1.0 + 1e-8));
    }

    #[test]
    fn chebyshev_orthogonality_under_gauss_chebyshev() {
        // Gauss-Chebyshev: nodes cos((2q+1)pi/2n), weights pi/n; n nodes are
        // exact for polynomial integrands of degree <= 2n-1 against the
        // weight 1/sqrt(1-x^2).
        let n = 32;
        let nodes: Vec<f64> = (0..n)
            .map(|q| ((2 * q + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos())
            .collect();
        let w = std::f64::consts::PI / n as f64;
        let cheb = |k: usize, x: f64| (k as f64 * x.acos()).cos();
        for j in 0..=20usize {
            for k in 0..=20usize {
                let acc: f64 = nodes.iter().map(|&x| w * cheb(j, x) * cheb(k, x)).sum();
                let want = if j != k {
                    0.0
                } else if j == 0 {
                    std::f64::consts::PI
                } else {
                    std::f64::consts::PI / 2.0
                };
                assert!((acc - want).abs() < 1e-12, "({j},{k}): {acc}");
            }
        }
    }

    #[test]
    fn with_degree_truncates_and_pads() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let f = random_ft(&mut rng, 2, 6, 2);
        let padded = f.with_degree(9).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (a, b) = (f.eval(&x).unwrap(), padded.eval(&x).unwrap());
            assert!((a - b).norm() < 1e-13 * a.norm().max(1.0));
        }
        let cut = padded.with_degree(6).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (a, b) = (f.eval(&x).unwrap(), cut.eval(&x).unwrap());
            assert!((a - b).norm() < 1e-13 * a.norm().max(1.0));
        }
    }

    #[test]
    fn serialization_roundtrip_and_bad_magic() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let f = random_ft(&mut rng, 3, 5, 2);
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        let g = FunctionTrain::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(f.bases(), g.bases());
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert_eq!(f.eval(&x).unwrap(), g.eval(&x).unwrap());
        }
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(FunctionTrain::read_from(&mut bad.as_slice()).is_err());
        let truncated = &buf[..10];
        assert!(FunctionTrain::read_from(&mut &truncated[..]).is_err());
    }
}
