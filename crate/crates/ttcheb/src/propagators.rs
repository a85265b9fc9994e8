//! Time-evolution schemes: the Chebyshev expansion of e^{−itĤ} in direct
//! three-term-recurrence and Clenshaw (backward-recurrence) forms, Bessel
//! coefficient generation, a split-operator Fourier (SOFT) baseline, and
//! dense full-grid reference propagators for small dimension counts.

use ndarray_linalg::Eigh;

use crate::error::{Result, TtError};
use crate::fft::{fft_in_place, ifft_in_place, momentum_at};
use crate::hamiltonian::{
    dense_hamiltonian, dense_potential, Discretization, HamiltonianSpec, SpectralBounds, System,
    WaveState,
};
use crate::tensor_train::TensorTrain;
use crate::C64;

/// Threshold below which trailing Bessel coefficients are treated as zero.
const TRIM_EPS: f64 = 1e-16;
/// Consecutive negligible coefficients required before trimming the series.
const TRIM_RUN: usize = 5;

/// First-kind Bessel values J_0(x)..J_{N−1}(x) at a fixed argument.
#[derive(Debug, Clone)]
pub struct BesselTable {
    pub x: f64,
    values: Vec<f64>,
}

impl BesselTable {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }
}

/// Computes J_0(x)..J_{n−1}(x) by Miller's downward recurrence starting at
/// order M = max(n, ⌈x⌉) + 50, normalized with J_0 + 2Σ_{k≥1} J_{2k} = 1.
pub fn bessel_j_sequence(n: usize, x: f64) -> Result<BesselTable> {
    if n < 1 {
        return Err(TtError::InvalidArgument("need at least one Bessel order".into()));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(TtError::InvalidArgument(format!("Bessel argument must be >= 0, got {x}")));
    }
    if x == 0.0 {
        let mut values = vec![0.0; n];
        values[0] = 1.0;
        return Ok(BesselTable { x, values });
    }
    let m = n.max(x.ceil() as usize) + 50;
    let mut f = vec![0.0f64; m + 2];
    f[m + 1] = 0.0;
    f[m] = 1e-300;
    for k in (1..=m).rev() {
        f[k - 1] = (2.0 * k as f64 / x) * f[k] - f[k + 1];
        // The downward recurrence grows rapidly below order ~x; rescale the
        // tail computed so far whenever it threatens overflow.
        if f[k - 1].abs() > 1e260 {
            for v in f[k - 1..].iter_mut() {
                *v *= 1e-260;
            }
        }
    }
    let mut norm = f[0];
    for k in (2..=m).step_by(2) {
        norm += 2.0 * f[k];
    }
    let scale = 1.0 / norm;
    let values: Vec<f64> = f[..n].iter().map(|&v| v * scale).collect();
    if values.iter().any(|v| !v.is_finite() || v.abs() > 1.0 + 1e-12) {
        return Err(TtError::Numerical("Bessel recurrence lost precision".into()));
    }
    Ok(BesselTable { x, values })
}

/// Which Chebyshev evaluation order to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChebyshevScheme {
    Recurrence,
    Clenshaw,
}

/// One Chebyshev propagation request: duration, series length, evaluation
/// scheme, rounding policy, and the spectral bracket.
#[derive(Debug, Clone)]
pub struct ChebyshevPlan {
    pub t: f64,
    pub n_terms: usize,
    pub scheme: ChebyshevScheme,
    pub round_tol: f64,
    pub rmax: usize,
    pub bounds: SpectralBounds,
    pub auto_trim: bool,
}

impl ChebyshevPlan {
    pub fn new(
        t: f64,
        n_terms: usize,
        scheme: ChebyshevScheme,
        round_tol: f64,
        rmax: usize,
        bounds: SpectralBounds,
        auto_trim: bool,
    ) -> Result<Self> {
        if n_terms < 1 {
            return Err(TtError::InvalidArgument("need at least one Chebyshev term".into()));
        }
        if !(t >= 0.0) {
            return Err(TtError::InvalidArgument("propagation time must be >= 0".into()));
        }
        if !(round_tol >= 0.0) {
            return Err(TtError::InvalidArgument("round_tol must be >= 0".into()));
        }
        Ok(Self { t, n_terms, scheme, round_tol, rmax, bounds, auto_trim })
    }
}

/// Instrumentation gathered during one propagation.
#[derive(Debug, Clone, Copy, Default)]
pub struct PropagationStats {
    /// Number of series terms actually applied (≤ plan.n_terms when trimmed).
    pub terms_used: usize,
    /// Largest bond rank reached by any intermediate state.
    pub max_rank: usize,
    /// Peak number of simultaneously held series states (Clenshaw: 3).
    pub live_peak: usize,
}

impl PropagationStats {
    fn see(&mut self, s: &WaveState) {
        self.max_rank = self.max_rank.max(s.max_rank());
    }
}

/// (−i)^k.
fn minus_i_pow(k: usize) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

/// Effective series length after optional trimming of negligible Bessel
/// tails (first index where TRIM_RUN consecutive values drop below TRIM_EPS).
fn effective_terms(bessel: &BesselTable, n: usize, auto_trim: bool) -> usize {
    if !auto_trim {
        return n;
    }
    let mut run = 0;
    for k in 0..n {
        if bessel.get(k).abs() < TRIM_EPS {
            run += 1;
            if run == TRIM_RUN {
                return k + 1 - TRIM_RUN.min(k + 1);
            }
        } else {
            run = 0;
        }
    }
    n
}

/// Divergence detection: outside [−1, 1] the Chebyshev polynomials grow
/// exponentially, so non-bracketing bounds blow the norm up. (A norm
/// *decrease* only means the series was truncated early and is legitimate.)
fn check_norm_drift(before: f64, after: f64) -> Result<()> {
    if !(after.is_finite()) || after - before > 0.5 * before.max(1e-300) {
        return Err(TtError::Divergence(format!(
            "norm drifted from {before} to {after}; spectral bounds likely do not bracket the spectrum"
        )));
    }
    Ok(())
}

/// Direct three-term-recurrence evaluation of
/// e^{−it⁺} Σ_{k<N} (2−δ_{k0})(−i)^k J_k(t⁻) T_k(Ĥ₀) ψ₀.
pub fn chebyshev_propagate_recurrence(
    psi0: &WaveState,
    system: &System,
    plan: &ChebyshevPlan,
) -> Result<(WaveState, PropagationStats)> {
    let mut stats = PropagationStats::default();
    let tol = plan.round_tol;
    let rmax = plan.rmax;
    let bounds = &plan.bounds;
    let t_minus = bounds.t_minus(plan.t);
    let bessel = bessel_j_sequence(plan.n_terms, t_minus)?;
    let n = effective_terms(&bessel, plan.n_terms, plan.auto_trim);
    stats.terms_used = n;
    let vol = system.volume_element();
    let norm0 = psi0.norm(vol)?;

    // k = 0 term: J_0 ψ0
    let mut acc = psi0.scale(C64::new(bessel.get(0), 0.0));
    stats.see(&acc);
    if n > 1 {
        // T_1 = Ĥ₀ ψ0
        let mut prev = psi0.clone();
        let mut cur = system.apply_h0(psi0, bounds, tol, rmax)?;
        stats.see(&cur);
        acc = acc
            .add(&cur.scale(minus_i_pow(1) * 2.0 * bessel.get(1)))?
            .round(tol, rmax)?;
        stats.see(&acc);
        for k in 2..n {
            // T_k = 2 Ĥ₀ T_{k−1} − T_{k−2}
            let h_cur = system.apply_h0(&cur, bounds, tol, rmax)?;
            stats.see(&h_cur);
            let next = h_cur
                .scale(C64::new(2.0, 0.0))
                .add(&prev.scale(C64::new(-1.0, 0.0)))?
                .round(tol, rmax)?;
            stats.see(&next);
            prev = cur;
            cur = next;
            acc = acc
                .add(&cur.scale(minus_i_pow(k) * 2.0 * bessel.get(k)))?
                .round(tol, rmax)?;
            stats.see(&acc);
        }
    }
    let phase = C64::new(0.0, -bounds.t_plus(plan.t)).exp();
    let out = acc.scale(phase);
    check_norm_drift(norm0, out.norm(vol)?)?;
    stats.live_peak = 3;
    Ok((out, stats))
}

/// Clenshaw backward recurrence B_r = 2Ĥ₀B_{r+1} − B_{r+2} + (−i)^r J_r(t⁻)ψ₀
/// from r = N−1 down to 0 with B_N = B_{N+1} = 0; the series value is
/// e^{−it⁺}(B_0 − B_2). At most three series states are live at any time.
pub fn chebyshev_propagate_clenshaw(
    psi0: &WaveState,
    system: &System,
    plan: &ChebyshevPlan,
) -> Result<(WaveState, PropagationStats)> {
    let mut stats = PropagationStats::default();
    let tol = plan.round_tol;
    let rmax = plan.rmax;
    let bounds = &plan.bounds;
    let t_minus = bounds.t_minus(plan.t);
    let bessel = bessel_j_sequence(plan.n_terms, t_minus)?;
    let n = effective_terms(&bessel, plan.n_terms, plan.auto_trim);
    stats.terms_used = n;
    let vol = system.volume_element();
    let norm0 = psi0.norm(vol)?;

    // Live series states, excluding the constant input ψ0.
    let mut peak = 0usize;
    let mut b1: Option<WaveState> = None; // B_{r+1}
    let mut b2: Option<WaveState> = None; // B_{r+2}
    for r in (0..n).rev() {
        let coeff = minus_i_pow(r) * bessel.get(r);
        let b0 = match &b1 {
            Some(prev) => {
                // b1, b2, and the Ĥ₀ workspace are simultaneously live
                peak = peak.max(2 + usize::from(b2.is_some()));
                let h = system.apply_h0(prev, bounds, tol, rmax)?;
                stats.see(&h);
                let mut v = h.scale(C64::new(2.0, 0.0));
                if let Some(pp) = &b2 {
                    v = v.add(&pp.scale(C64::new(-1.0, 0.0)))?;
                }
                v.add(&psi0.scale(coeff))?.round(tol, rmax)?
            }
            None => {
                peak = peak.max(1);
                psi0.scale(coeff)
            }
        };
        stats.see(&b0);
        if r == 0 {
            // series value is B_0 − B_2 (b2 currently holds B_2)
            let result = match &b2 {
                Some(b2v) => b0.add(&b2v.scale(C64::new(-1.0, 0.0)))?.round(tol, rmax)?,
                None => b0,
            };
            b1 = Some(result);
            break;
        }
        b2 = b1.take();
        b1 = Some(b0);
    }
    let result = b1.expect("series has at least one term");
    let phase = C64::new(0.0, -bounds.t_plus(plan.t)).exp();
    let out = result.scale(phase);
    check_norm_drift(norm0, out.norm(vol)?)?;
    stats.live_peak = peak;
    Ok((out, stats))
}

/// Dispatches on the plan's scheme.
pub fn chebyshev_propagate(
    psi0: &WaveState,
    system: &System,
    plan: &ChebyshevPlan,
) -> Result<(WaveState, PropagationStats)> {
    match plan.scheme {
        ChebyshevScheme::Recurrence => chebyshev_propagate_recurrence(psi0, system, plan),
        ChebyshevScheme::Clenshaw => chebyshev_propagate_clenshaw(psi0, system, plan),
    }
}

/// Strang-split split-operator Fourier step on the discrete grid path:
/// e^{−iVdt/2} · e^{−iT̂dt} · e^{−iVdt/2} per step, with the potential phase
/// built once (exact rank-1 when the potential is uncoupled) and the kinetic
/// phase applied per mode in momentum space (rank-preserving).
pub fn soft_propagate(
    psi0: &WaveState,
    system: &System,
    dt: f64,
    steps: usize,
    round_tol: f64,
    rmax: usize,
) -> Result<(WaveState, PropagationStats)> {
    if !(dt > 0.0) {
        return Err(TtError::InvalidArgument("dt must be positive".into()));
    }
    if steps < 1 {
        return Err(TtError::InvalidArgument("need at least one step".into()));
    }
    let spec = system.spec();
    let grid = match &spec.disc {
        Discretization::Grid(g) => g.clone(),
        Discretization::Bases(_) => {
            return Err(TtError::InvalidArgument(
                "split-operator propagation requires the grid path".into(),
            ))
        }
    };
    let psi_tt = psi0.as_tt()?;

    // Magnitude bound for the half-step phase argument, used by the
    // scaling-and-squaring exponential.
    let nodes: Vec<Vec<f64>> = grid.dims().iter().map(|d| d.nodes()).collect();
    let mut vmax = 0.0f64;
    let mut x_b = 0.0f64;
    for xs in &nodes {
        vmax += xs.iter().map(|&x| spec.onebody(x).abs()).fold(0.0, f64::max);
        x_b = x_b.max(xs.iter().fold(0.0f64, |m, &x| m.max(x.abs())));
    }
    vmax += (grid.ndim() as f64 - 1.0) * spec.coupling().abs() * x_b * x_b;
    let arg_bound = 0.5 * dt * vmax;
    if !arg_bound.is_finite() || arg_bound > 1e6 {
        return Err(TtError::Numerical(format!(
            "potential-phase argument bound {arg_bound} too large for dt = {dt}"
        )));
    }

    // Half-step potential phase as a tensor train.
    let half_phase = if spec.coupling() == 0.0 {
        // separable potential: exact rank-1 phase factors per mode
        let factors: Vec<Vec<C64>> = nodes
            .iter()
            .map(|xs| {
                xs.iter()
                    .map(|&x| C64::new(0.0, -0.5 * dt * spec.onebody(x)).exp())
                    .collect()
            })
            .collect();
        TensorTrain::from_rank1(&factors)?
    } else {
        let v = system.potential().as_tt()?;
        v.scale(C64::new(0.0, -0.5 * dt))
            .hadamard_exp(round_tol.max(1e-14), rmax, arg_bound)?
    };

    let dps: Vec<f64> = grid.dims().iter().map(|d| d.dp()).collect();
    let mass = spec.mass;
    let vol = system.volume_element();
    let norm0 = psi_tt.norm(vol)?;

    let mut stats = PropagationStats::default();
    stats.terms_used = steps;
    let mut psi = psi_tt.clone();
    for _ in 0..steps {
        psi = half_phase.hadamard(&psi)?.round(round_tol, rmax)?;
        stats.max_rank = stats.max_rank.max(psi.max_rank());
        for (j, &dp) in dps.iter().enumerate() {
            psi = psi.mode_apply(j, |fiber| {
                let nf = fiber.len();
                fft_in_place(fiber);
                for (k, v) in fiber.iter_mut().enumerate() {
                    let p = momentum_at(k, nf, dp);
                    *v *= C64::new(0.0, -dt * p * p / (2.0 * mass)).exp();
                }
                ifft_in_place(fiber);
            })?;
        }
        psi = half_phase.hadamard(&psi)?.round(round_tol, rmax)?;
        stats.max_rank = stats.max_rank.max(psi.max_rank());
    }
    check_norm_drift(norm0, psi.norm(vol)?)?;
    stats.live_peak = 2;
    Ok((WaveState::Tt(psi), stats))
}

/// Dense full-grid reference method selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DenseMethod {
    Chebyshev { n_terms: usize },
    Clenshaw { n_terms: usize },
    Soft { dt: f64, steps: usize },
    Diagonalize,
}

/// Applies the dense kinetic operator via per-dimension FFTs, adding into
/// `out`.
fn dense_apply_kinetic(spec: &HamiltonianSpec, sizes: &[usize], psi: &[C64], out: &mut [C64]) {
    let grid = match &spec.disc {
        Discretization::Grid(g) => g,
        Discretization::Bases(_) => unreachable!("dense path is grid-only"),
    };
    let total = psi.len();
    for (j, &nj) in sizes.iter().enumerate() {
        let dp = grid.dim(j).dp();
        let inner: usize = sizes[j + 1..].iter().product();
        let outer = total / (nj * inner);
        let mut fiber = vec![C64::new(0.0, 0.0); nj];
        for a in 0..outer {
            for b in 0..inner {
                for k in 0..nj {
                    fiber[k] = psi[a * nj * inner + k * inner + b];
                }
                fft_in_place(&mut fiber);
                for (k, v) in fiber.iter_mut().enumerate() {
                    let p = momentum_at(k, nj, dp);
                    *v *= p * p / (2.0 * spec.mass);
                }
                ifft_in_place(&mut fiber);
                for k in 0..nj {
                    out[a * nj * inner + k * inner + b] += fiber[k];
                }
            }
        }
    }
}

/// Ĥ₀ψ on a dense array.
fn dense_apply_h0(
    spec: &HamiltonianSpec,
    sizes: &[usize],
    v_dense: &[f64],
    bounds: &SpectralBounds,
    psi: &[C64],
) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    dense_apply_kinetic(spec, sizes, psi, &mut out);
    let scale = 2.0 / bounds.delta();
    let mid = bounds.mid();
    for i in 0..psi.len() {
        out[i] = (out[i] + psi[i] * (v_dense[i] - mid)) * scale;
    }
    out
}

/// Dense-array implementation of the same propagation algorithms, used as an
/// oracle for d ≤ 3 (diagonalization limited to d ≤ 2).
pub fn fullgrid_reference(
    psi0: &[C64],
    spec: &HamiltonianSpec,
    bounds: &SpectralBounds,
    method: DenseMethod,
    t: f64,
) -> Result<Vec<C64>> {
    let grid = match &spec.disc {
        Discretization::Grid(g) => g.clone(),
        Discretization::Bases(_) => {
            return Err(TtError::InvalidArgument("dense reference needs a grid".into()))
        }
    };
    if grid.ndim() > 3 {
        return Err(TtError::InvalidArgument("dense reference limited to d <= 3".into()));
    }
    let sizes = grid.mode_sizes();
    let total: usize = sizes.iter().product();
    if psi0.len() != total {
        return Err(TtError::DimensionMismatch(format!(
            "state has {} entries, grid has {total}",
            psi0.len()
        )));
    }
    match method {
        DenseMethod::Diagonalize => {
            if grid.ndim() > 2 {
                return Err(TtError::InvalidArgument("diagonalization limited to d <= 2".into()));
            }
            let h = dense_hamiltonian(spec)?;
            let (eigs, vecs) = h
                .eigh(ndarray_linalg::UPLO::Lower)
                .map_err(|e| TtError::Numerical(format!("eigendecomposition failed: {e}")))?;
            // ψ(t) = U e^{−iλt} U† ψ0
            let mut coeffs = vec![C64::new(0.0, 0.0); total];
            for (m, c) in coeffs.iter_mut().enumerate() {
                for i in 0..total {
                    *c += vecs[[i, m]].conj() * psi0[i];
                }
                *c *= C64::new(0.0, -eigs[m] * t).exp();
            }
            let mut out = vec![C64::new(0.0, 0.0); total];
            for (i, o) in out.iter_mut().enumerate() {
                for (m, c) in coeffs.iter().enumerate() {
                    *o += vecs[[i, m]] * c;
                }
            }
            Ok(out)
        }
        DenseMethod::Chebyshev { n_terms } | DenseMethod::Clenshaw { n_terms } => {
            let v = dense_potential(spec)?;
            let t_minus = bounds.t_minus(t);
            let bessel = bessel_j_sequence(n_terms, t_minus)?;
            let phase = C64::new(0.0, -bounds.t_plus(t)).exp();
            let result = if matches!(method, DenseMethod::Chebyshev { .. }) {
                // forward recurrence with coefficient accumulation
                let mut acc: Vec<C64> =
                    psi0.iter().map(|&p| p * bessel.get(0)).collect();
                if n_terms > 1 {
                    let mut prev = psi0.to_vec();
                    let mut cur = dense_apply_h0(spec, &sizes, &v, bounds, psi0);
                    for (a, &c) in acc.iter_mut().zip(cur.iter()) {
                        *a += c * (minus_i_pow(1) * 2.0 * bessel.get(1));
                    }
                    for k in 2..n_terms {
                        let h = dense_apply_h0(spec, &sizes, &v, bounds, &cur);
                        let next: Vec<C64> = h
                            .iter()
                            .zip(prev.iter())
                            .map(|(&hv, &pv)| hv * 2.0 - pv)
                            .collect();
                        prev = std::mem::replace(&mut cur, next);
                        let w = minus_i_pow(k) * 2.0 * bessel.get(k);
                        for (a, &c) in acc.iter_mut().zip(cur.iter()) {
                            *a += c * w;
                        }
                    }
                }
                acc
            } else {
                // Clenshaw backward recurrence
                let zero = vec![C64::new(0.0, 0.0); total];
                let mut b1 = zero.clone();
                let mut b2 = zero;
                let mut result = Vec::new();
                for r in (0..n_terms).rev() {
                    let coeff = minus_i_pow(r) * bessel.get(r);
                    let h = dense_apply_h0(spec, &sizes, &v, bounds, &b1);
                    let b0: Vec<C64> = (0..total)
                        .map(|i| h[i] * 2.0 - b2[i] + psi0[i] * coeff)
                        .collect();
                    if r == 0 {
                        // series value is B_0 − B_2 (b2 currently holds B_2)
                        result = (0..total).map(|i| b0[i] - b2[i]).collect();
                        break;
                    }
                    b2 = std::mem::replace(&mut b1, b0);
                }
                result
            };
            Ok(result.into_iter().map(|vv| vv * phase).collect())
        }
        DenseMethod::Soft { dt, steps } => {
            let v = dense_potential(spec)?;
            let half: Vec<C64> = v
                .iter()
                .map(|&vi| C64::new(0.0, -0.5 * dt * vi).exp())
                .collect();
            let mut psi = psi0.to_vec();
            for _ in 0..steps {
                for (p, &ph) in psi.iter_mut().zip(half.iter()) {
                    *p *= ph;
                }
                // kinetic full-step phase in momentum space, per dimension
                for (j, &nj) in sizes.iter().enumerate() {
                    let dp = grid.dim(j).dp();
                    let inner: usize = sizes[j + 1..].iter().product();
                    let outer = total / (nj * inner);
                    let mut fiber = vec![C64::new(0.0, 0.0); nj];
                    for a in 0..outer {
                        for b in 0..inner {
                            for k in 0..nj {
                                fiber[k] = psi[a * nj * inner + k * inner + b];
                            }
                            fft_in_place(&mut fiber);
                            for (k, vv) in fiber.iter_mut().enumerate() {
                                let p = momentum_at(k, nj, dp);
                                *vv *= C64::new(0.0, -dt * p * p / (2.0 * spec.mass)).exp();
                            }
                            ifft_in_place(&mut fiber);
                            for k in 0..nj {
                                psi[a * nj * inner + k * inner + b] = fiber[k];
                            }
                        }
                    }
                }
                for (p, &ph) in psi.iter_mut().zip(half.iter()) {
                    *p *= ph;
                }
            }
            Ok(psi)
        }
    }
}

/// Dense L² norm of a difference, with the grid volume element.
pub fn dense_l2_diff(a: &[C64], b: &[C64], volume: f64) -> f64 {
    (a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        * volume)
        .sqrt()
}
