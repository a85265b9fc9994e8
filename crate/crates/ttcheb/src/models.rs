//! Initial states, the analytic harmonic-oscillator coherent state, and
//! post-processing observables: survival amplitudes, L² errors, and 2-D
//! density slices of high-dimensional wavepackets.

use ndarray::Array2;

use crate::error::{Result, TtError};
use crate::function_train::FunctionTrain;
use crate::hamiltonian::{Discretization, WaveState};
use crate::tensor_train::TensorTrain;
use crate::C64;

/// Product-Gaussian initial state: ∏_j (w/π)^{1/4}
/// exp(−(w/2)(x_j − x₀_j)² + i p₀_j (x_j − x₀_j)).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    width: f64,
    centers: Vec<f64>,
    momenta: Vec<f64>,
}

impl GaussianParams {
    pub fn new(width: f64, centers: Vec<f64>, momenta: Vec<f64>) -> Result<Self> {
        if !(width > 0.0) {
            return Err(TtError::InvalidArgument(format!(
                "Gaussian width must be positive, got {width}"
            )));
        }
        if centers.is_empty() || centers.len() != momenta.len() {
            return Err(TtError::DimensionMismatch(format!(
                "need matching nonempty center/momentum vectors, got {} and {}",
                centers.len(),
                momenta.len()
            )));
        }
        Ok(Self { width, centers, momenta })
    }

    pub fn ndim(&self) -> usize {
        self.centers.len()
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    /// One-dimensional factor of the product Gaussian for coordinate `j`.
    pub fn factor(&self, j: usize, x: f64) -> C64 {
        let w = self.width;
        let dxc = x - self.centers[j];
        let amp = (w / std::f64::consts::PI).powf(0.25) * (-0.5 * w * dxc * dxc).exp();
        let phase = self.momenta[j] * dxc;
        C64::new(amp * phase.cos(), amp * phase.sin())
    }
}

/// Builds the rank-1 initial state in the representation matching the
/// discretization. Returns the state plus human-readable warnings for any
/// center closer than 3/√w to a domain boundary (the Gaussian tail then
/// leaks out of the box).
pub fn initial_gaussian(
    params: &GaussianParams,
    disc: &Discretization,
) -> Result<(WaveState, Vec<String>)> {
    if params.ndim() != disc.ndim() {
        return Err(TtError::DimensionMismatch(format!(
            "initial state has {} dimensions but the discretization has {}",
            params.ndim(),
            disc.ndim()
        )));
    }
    let mut warnings = Vec::new();
    let margin = 3.0 / params.width.sqrt();
    let mut check = |j: usize, a: f64, b: f64| {
        let x0 = params.centers[j];
        if (x0 - a).abs() < margin || (b - x0).abs() < margin {
            warnings.push(format!(
                "dimension {j}: center {x0} is within 3/sqrt(w) = {margin:.3} of the domain [{a}, {b}]"
            ));
        }
    };
    let state = match disc {
        Discretization::Grid(g) => {
            let mut factors = Vec::with_capacity(g.ndim());
            for j in 0..g.ndim() {
                let dim = g.dim(j);
                check(j, dim.x_min, dim.x_max);
                factors.push(dim.nodes().iter().map(|&x| params.factor(j, x)).collect());
            }
            WaveState::Tt(TensorTrain::from_rank1(&factors)?)
        }
        Discretization::Bases(bases) => {
            let mut factors = Vec::with_capacity(bases.len());
            for (j, basis) in bases.iter().enumerate() {
                let (a, b) = basis.domain();
                check(j, a, b);
                // Generous quadrature: the Gaussian is entire, so the error
                // is set by the basis degree, not the quadrature order.
                let order = 2 * basis.degree() + 16;
                factors.push(basis.project_fn(|x| params.factor(j, x), order)?);
            }
            WaveState::Ft(FunctionTrain::from_rank1(bases.clone(), &factors)?)
        }
    };
    Ok((state, warnings))
}

/// Exact time-dependent coherent state of the isotropic harmonic oscillator
/// (ℏ = 1). Each dimension carries displacement α_j(t) = e^{−iωt} α_j(0) with
/// α_j(0) = √(mω/2)·x₀_j + i·p₀_j/√(2mω), and the closed form
///
///   Ψ_j(x,t) = (mω/π)^{1/4} exp(−(mω/2)(x − x_c)² + i p_c (x − x_c)
///              + i p_c x_c / 2 − i ω t / 2),
///
/// where x_c = √(2/(mω))·Re α_j(t) and p_c = √(2mω)·Im α_j(t). The ground
/// state contributes the e^{−iωt/2} zero-point phase per dimension; without
/// it Ψ is not a solution of the Schrödinger equation (the finite-difference
/// residual test below fails by O(ω/2)).
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticCoherentState {
    omega: f64,
    mass: f64,
    alpha0: Vec<C64>,
}

impl AnalyticCoherentState {
    pub fn new(omega: f64, mass: f64, centers: &[f64], momenta: &[f64]) -> Result<Self> {
        if !(omega > 0.0) || !(mass > 0.0) {
            return Err(TtError::InvalidArgument(format!(
                "need positive omega and mass, got {omega} and {mass}"
            )));
        }
        if centers.is_empty() || centers.len() != momenta.len() {
            return Err(TtError::DimensionMismatch(
                "need matching nonempty center/momentum vectors".into(),
            ));
        }
        let mw = mass * omega;
        let alpha0 = centers
            .iter()
            .zip(momenta)
            .map(|(&x0, &p0)| C64::new((0.5 * mw).sqrt() * x0, p0 / (2.0 * mw).sqrt()))
            .collect();
        Ok(Self { omega, mass, alpha0 })
    }

    pub fn ndim(&self) -> usize {
        self.alpha0.len()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// The matching product-Gaussian parameters (width w = mω) for building
    /// the state at t = 0 in either representation.
    pub fn gaussian_params(&self) -> GaussianParams {
        let mw = self.mass * self.omega;
        let centers = self.alpha0.iter().map(|a| (2.0 / mw).sqrt() * a.re).collect();
        let momenta = self.alpha0.iter().map(|a| (2.0 * mw).sqrt() * a.im).collect();
        GaussianParams { width: mw, centers, momenta }
    }

    /// One-dimensional factor Ψ_j(x, t); the full state is the product over j.
    pub fn factor(&self, j: usize, t: f64, x: f64) -> C64 {
        let mw = self.mass * self.omega;
        let rot = C64::from_polar(1.0, -self.omega * t);
        let a = self.alpha0[j] * rot;
        let xc = (2.0 / mw).sqrt() * a.re;
        let pc = (2.0 * mw).sqrt() * a.im;
        let amp = (mw / std::f64::consts::PI).powf(0.25) * (-0.5 * mw * (x - xc).powi(2)).exp();
        // Constant global phase −p₀x₀/2 anchors Ψ(0) to the plain initial
        // Gaussian; p₀x₀ = 2·Re α₀·Im α₀.
        let anchor = self.alpha0[j].re * self.alpha0[j].im;
        let phase = pc * (x - xc) + 0.5 * pc * xc - anchor - 0.5 * self.omega * t;
        C64::from_polar(amp, phase)
    }

    /// Ψ(x, t) = ∏_j Ψ_j(x_j, t).
    pub fn eval(&self, t: f64, x: &[f64]) -> Result<C64> {
        if x.len() != self.ndim() {
            return Err(TtError::DimensionMismatch(format!(
                "coherent state has {} dimensions, point has {}",
                self.ndim(),
                x.len()
            )));
        }
        Ok(x.iter()
            .enumerate()
            .map(|(j, &xj)| self.factor(j, t, xj))
            .product())
    }

    /// Closed-form survival amplitude ⟨Ψ(0)|Ψ(t)⟩ from the coherent-state
    /// overlap ⟨α|β⟩ = exp(ᾱβ − |α|²/2 − |β|²/2), times the zero-point phase.
    pub fn survival(&self, t: f64) -> C64 {
        let rot = C64::from_polar(1.0, -self.omega * t);
        let mut s = C64::new(1.0, 0.0);
        for a in &self.alpha0 {
            s *= (a.norm_sqr() * (rot - 1.0)).exp() * C64::from_polar(1.0, -0.5 * self.omega * t);
        }
        s
    }
}

/// Projects the analytic coherent state at time `t` onto a discretization:
/// rank-1 node samples on the grid path, rank-1 L² projections on the basis
/// path. Used as the reference state in convergence studies.
pub fn coherent_state_on(
    cs: &AnalyticCoherentState,
    disc: &Discretization,
    t: f64,
) -> Result<WaveState> {
    if cs.ndim() != disc.ndim() {
        return Err(TtError::DimensionMismatch(format!(
            "coherent state has {} dimensions but the discretization has {}",
            cs.ndim(),
            disc.ndim()
        )));
    }
    match disc {
        Discretization::Grid(g) => {
            let factors: Vec<Vec<C64>> = (0..g.ndim())
                .map(|j| g.dim(j).nodes().iter().map(|&x| cs.factor(j, t, x)).collect())
                .collect();
            Ok(WaveState::Tt(TensorTrain::from_rank1(&factors)?))
        }
        Discretization::Bases(bases) => {
            let mut factors = Vec::with_capacity(bases.len());
            for (j, basis) in bases.iter().enumerate() {
                let order = 2 * basis.degree() + 16;
                factors.push(basis.project_fn(|x| cs.factor(j, t, x), order)?);
            }
            Ok(WaveState::Ft(FunctionTrain::from_rank1(bases.clone(), &factors)?))
        }
    }
}

/// Survival amplitude S(t) = ⟨ψ₀|ψ(t)⟩ including the volume element on the
/// grid path (the basis path integrates exactly).
pub fn survival_amplitude(psi0: &WaveState, psit: &WaveState, volume: f64) -> Result<C64> {
    psi0.inner(psit, volume)
}

/// ‖ψ_a − ψ_b‖ evaluated through inner products (never forming the dense
/// difference): √(⟨a|a⟩ + ⟨b|b⟩ − 2 Re⟨a|b⟩), clamped at zero.
pub fn l2_error(psi_a: &WaveState, psi_b: &WaveState, volume: f64) -> Result<f64> {
    let aa = psi_a.inner(psi_a, volume)?.re;
    let bb = psi_b.inner(psi_b, volume)?.re;
    let ab = psi_a.inner(psi_b, volume)?.re;
    Ok((aa + bb - 2.0 * ab).max(0.0).sqrt())
}

/// |ψ|² on the 2-D lattice of kept dimensions p < q with every other
/// coordinate fixed. `fixed` gives one coordinate value per dimension
/// (entries at p and q are ignored); the grid path snaps each to the nearest
/// node, the basis path evaluates the expansion at the values directly on a
/// uniform degree-sized lattice. Returns the two axes plus the density
/// matrix indexed [p-node, q-node].
pub fn density_slice2d(
    psi: &WaveState,
    disc: &Discretization,
    p: usize,
    q: usize,
    fixed: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, Array2<f64>)> {
    let d = disc.ndim();
    if p >= q || q >= d {
        return Err(TtError::InvalidArgument(format!(
            "density_slice2d: need p < q < d, got ({p}, {q}) with d = {d}"
        )));
    }
    if fixed.len() != d {
        return Err(TtError::DimensionMismatch(format!(
            "density_slice2d: need {d} fixed coordinates, got {}",
            fixed.len()
        )));
    }
    match (psi, disc) {
        (WaveState::Tt(tt), Discretization::Grid(g)) => {
            let mut indices = vec![0usize; d];
            for (j, &x) in fixed.iter().enumerate() {
                let dim = g.dim(j);
                let k = ((x - dim.x_min) / dim.dx()).round();
                indices[j] = (k.max(0.0) as usize).min(dim.n - 1);
            }
            let amp = tt.slice2d(p, q, &indices)?;
            Ok((g.dim(p).nodes(), g.dim(q).nodes(), amp.mapv(|v| v.norm_sqr())))
        }
        (WaveState::Ft(ft), Discretization::Bases(bases)) => {
            let lattice = |j: usize| -> Vec<f64> {
                let (a, b) = bases[j].domain();
                let n = bases[j].degree();
                let dx = (b - a) / n as f64;
                (0..n).map(|k| a + k as f64 * dx).collect()
            };
            let xs = lattice(p);
            let ys = lattice(q);
            let mut point = fixed.to_vec();
            let mut out = Array2::zeros((xs.len(), ys.len()));
            for (i, &x) in xs.iter().enumerate() {
                point[p] = x;
                for (j, &y) in ys.iter().enumerate() {
                    point[q] = y;
                    out[[i, j]] = ft.eval(&point)?.norm_sqr();
                }
            }
            Ok((xs, ys, out))
        }
        _ => Err(TtError::DimensionMismatch(
            "state format does not match the discretization".into(),
        )),
    }
}

/// Reduced density on dimensions p < q: ∫ |ψ|² over all other coordinates,
/// approximated by the weighted lattice sum on the grid path. Built from the
/// Hadamard square of the train, contracting every unkept mode with its grid
/// spacing. Grid path only.
pub fn reduced_density2d(
    psi: &WaveState,
    disc: &Discretization,
    p: usize,
    q: usize,
) -> Result<(Vec<f64>, Vec<f64>, Array2<f64>)> {
    let (tt, g) = match (psi, disc) {
        (WaveState::Tt(tt), Discretization::Grid(g)) => (tt, g),
        _ => {
            return Err(TtError::InvalidArgument(
                "reduced_density2d supports the discrete-grid path only".into(),
            ))
        }
    };
    let d = g.ndim();
    if p >= q || q >= d {
        return Err(TtError::InvalidArgument(format!(
            "reduced_density2d: need p < q < d, got ({p}, {q}) with d = {d}"
        )));
    }
    let rho = tt.conj().hadamard(tt)?;
    // Transfer matrix for an integrated-out mode: sum the core over its
    // physical index, weighted by the grid spacing.
    let transfer = |k: usize| -> Array2<C64> {
        let core = rho.core(k);
        let (rl, n, rr) = core.dim();
        let mut m = Array2::zeros((rl, rr));
        for i in 0..n {
            m += &core.index_axis(ndarray::Axis(1), i);
        }
        m * C64::new(g.dim(k).dx(), 0.0)
    };
    let mut left = Array2::eye(1);
    for k in 0..p {
        left = left.dot(&transfer(k));
    }
    let mut mid = Array2::eye(rho.ranks()[p + 1]);
    for k in p + 1..q {
        mid = mid.dot(&transfer(k));
    }
    let mut right = Array2::eye(rho.ranks()[q + 1]);
    for k in q + 1..d {
        right = right.dot(&transfer(k));
    }
    let np = g.dim(p).n;
    let nq = g.dim(q).n;
    let mut out = Array2::zeros((np, nq));
    for i in 0..np {
        let row = left.dot(&rho.core(p).index_axis(ndarray::Axis(1), i)).dot(&mid);
        for j in 0..nq {
            let val = row.dot(&rho.core(q).index_axis(ndarray::Axis(1), j)).dot(&right);
            out[[i, j]] = val[[0, 0]].re;
        }
    }
    Ok((g.dim(p).nodes(), g.dim(q).nodes(), out))
}
