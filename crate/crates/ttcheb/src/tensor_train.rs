//! Discrete tensor trains: a d-way complex array stored as a chain of 3-way
//! cores W_1[k_1] W_2[k_2] ... W_d[k_d], with core k shaped
//! (r_{k-1}, n_k, r_k) and boundary ranks r_0 = r_d = 1.
//!
//! All operations are pure and return new values; a `TensorTrain` is immutable
//! after construction and safe to share across threads.

use ndarray::{s, Array1, Array2, Array3};
use ndarray_linalg::{JobSvd, SVDDC, QR};
use num_complex::ComplexFloat;
use std::io::{Read, Write};

use crate::error::{Result, TtError};
use crate::C64;

const TTC_MAGIC: [u8; 4] = *b"TTC1";

/// One uniform grid direction: nodes x_min + k*dx for k = 0..n-1.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDim {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl GridDim {
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    pub fn dp(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.x_max - self.x_min)
    }

    pub fn nodes(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n).map(|k| self.x_min + k as f64 * dx).collect()
    }
}

/// Per-dimension uniform position grids for the discrete tensor-train path.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    dims: Vec<GridDim>,
}

impl GridSpec {
    pub fn new(dims: Vec<GridDim>) -> Result<Self> {
        if dims.is_empty() {
            return Err(TtError::InvalidArgument("grid needs at least one dimension".into()));
        }
        for (j, g) in dims.iter().enumerate() {
            if !(g.x_max > g.x_min) {
                return Err(TtError::InvalidArgument(format!(
                    "grid dim {j}: x_max must exceed x_min"
                )));
            }
            if g.n < 2 || !g.n.is_power_of_two() {
                return Err(TtError::InvalidArgument(format!(
                    "grid dim {j}: n = {} must be a power of two and >= 2 (FFT pathway)",
                    g.n
                )));
            }
        }
        Ok(Self { dims })
    }

    /// Same interval and point count in every direction.
    pub fn uniform(x_min: f64, x_max: f64, n: usize, d: usize) -> Result<Self> {
        Self::new(vec![GridDim { x_min, x_max, n }; d])
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, j: usize) -> &GridDim {
        &self.dims[j]
    }

    pub fn dims(&self) -> &[GridDim] {
        &self.dims
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.dims.iter().map(|g| g.n).collect()
    }

    /// Product of the grid spacings, the discrete volume element.
    pub fn volume_element(&self) -> f64 {
        self.dims.iter().map(|g| g.dx()).product()
    }
}

/// Discrete tensor train over complex double-precision cores.
#[derive(Debug, Clone)]
pub struct TensorTrain {
    cores: Vec<Array3<C64>>,
}

impl TensorTrain {
    /// Wraps raw cores, validating rank adjacency, boundary ranks, and
    /// finiteness of every stored value.
    pub fn new(cores: Vec<Array3<C64>>) -> Result<Self> {
        if cores.is_empty() {
            return Err(TtError::InvalidArgument("tensor train needs at least one core".into()));
        }
        if cores[0].shape()[0] != 1 || cores.last().unwrap().shape()[2] != 1 {
            return Err(TtError::InvalidArgument("boundary ranks must equal 1".into()));
        }
        for w in cores.windows(2) {
            if w[0].shape()[2] != w[1].shape()[0] {
                return Err(TtError::InvalidArgument("adjacent core ranks do not match".into()));
            }
        }
        for (k, c) in cores.iter().enumerate() {
            if c.shape()[1] == 0 {
                return Err(TtError::InvalidArgument(format!("core {k} has zero mode size")));
            }
            if c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(TtError::Numerical(format!("core {k} contains non-finite values")));
            }
        }
        Ok(Self { cores })
    }

    /// Rank-1 train from per-dimension factor vectors: evaluation at any
    /// index is the product of factor entries.
    pub fn from_rank1(factors: &[Vec<C64>]) -> Result<Self> {
        if factors.is_empty() {
            return Err(TtError::InvalidArgument("empty factor list".into()));
        }
        let mut cores = Vec::with_capacity(factors.len());
        for (j, f) in factors.iter().enumerate() {
            if f.is_empty() {
                return Err(TtError::InvalidArgument(format!("factor {j} has zero length")));
            }
            let mut c = Array3::zeros((1, f.len(), 1));
            for (k, &v) in f.iter().enumerate() {
                c[[0, k, 0]] = v;
            }
            cores.push(c);
        }
        Self::new(cores)
    }

    /// All-zero train (rank-1 zero cores, never empty core lists).
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::from_rank1(&dims.iter().map(|&n| vec![C64::new(0.0, 0.0); n]).collect::<Vec<_>>())
    }

    /// All-ones train.
    pub fn ones(dims: &[usize]) -> Result<Self> {
        Self::from_rank1(&dims.iter().map(|&n| vec![C64::new(1.0, 0.0); n]).collect::<Vec<_>>())
    }

    /// Exact rank-<=3 train for sum_j f_j(x_j) + c * sum_{j>=2} x_j x_{j-1},
    /// given per-dimension samples of the one-body terms and coordinates.
    pub fn sum_nearest_neighbor(
        onebody: &[Vec<f64>],
        coupling: f64,
        coords: &[Vec<f64>],
    ) -> Result<Self> {
        let to_c = |v: &Vec<f64>| v.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>();
        let ones: Vec<Vec<C64>> = onebody.iter().map(|f| vec![C64::new(1.0, 0.0); f.len()]).collect();
        let f: Vec<Vec<C64>> = onebody.iter().map(to_c).collect();
        let x: Vec<Vec<C64>> = coords.iter().map(to_c).collect();
        Self::sum_nearest_neighbor_generic(&ones, &f, &x, C64::new(coupling, 0.0))
    }

    /// Nearest-neighbor sum construction over arbitrary per-dimension vectors.
    /// `ones[j]` must represent the multiplicative identity in dimension j
    /// (grid samples of 1, or coefficients of the constant function).
    pub(crate) fn sum_nearest_neighbor_generic(
        ones: &[Vec<C64>],
        f: &[Vec<C64>],
        x: &[Vec<C64>],
        coupling: C64,
    ) -> Result<Self> {
        let d = f.len();
        if d == 0 {
            return Err(TtError::InvalidArgument("sum_nearest_neighbor: d = 0".into()));
        }
        if ones.len() != d || x.len() != d {
            return Err(TtError::DimensionMismatch("sum_nearest_neighbor: vector count".into()));
        }
        for j in 0..d {
            if ones[j].len() != f[j].len() || x[j].len() != f[j].len() || f[j].is_empty() {
                return Err(TtError::DimensionMismatch(format!(
                    "sum_nearest_neighbor: vector lengths differ in dimension {j}"
                )));
            }
        }
        if d == 1 {
            return Self::from_rank1(&[f[0].clone()]);
        }
        let mut cores = Vec::with_capacity(d);
        // Transfer state (1, x_k, partial sum); see the middle-core matrix below.
        let n0 = f[0].len();
        let mut first = Array3::zeros((1, n0, 3));
        for k in 0..n0 {
            first[[0, k, 0]] = ones[0][k];
            first[[0, k, 1]] = x[0][k];
            first[[0, k, 2]] = f[0][k];
        }
        cores.push(first);
        for j in 1..d - 1 {
            let n = f[j].len();
            let mut c = Array3::zeros((3, n, 3));
            for k in 0..n {
                c[[0, k, 0]] = ones[j][k];
                c[[0, k, 1]] = x[j][k];
                c[[0, k, 2]] = f[j][k];
                c[[1, k, 2]] = coupling * x[j][k];
                c[[2, k, 2]] = ones[j][k];
            }
            cores.push(c);
        }
        let nl = f[d - 1].len();
        let mut last = Array3::zeros((3, nl, 1));
        for k in 0..nl {
            last[[0, k, 0]] = f[d - 1][k];
            last[[1, k, 0]] = coupling * x[d - 1][k];
            last[[2, k, 0]] = ones[d - 1][k];
        }
        cores.push(last);
        Self::new(cores)
    }

    pub fn ndim(&self) -> usize {
        self.cores.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    /// Bond ranks r_0..r_d (boundary entries always 1).
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = Vec::with_capacity(self.ndim() + 1);
        r.push(1);
        for c in &self.cores {
            r.push(c.shape()[2]);
        }
        r
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    pub fn core(&self, k: usize) -> &Array3<C64> {
        &self.cores[k]
    }

    /// Matrix-product evaluation at one grid index, O(d r^2).
    pub fn eval(&self, index: &[usize]) -> Result<C64> {
        if index.len() != self.ndim() {
            return Err(TtError::DimensionMismatch(format!(
                "eval: index length {} vs {} dimensions",
                index.len(),
                self.ndim()
            )));
        }
        let mut v: Array1<C64> = Array1::from_elem(1, C64::new(1.0, 0.0));
        for (k, c) in self.cores.iter().enumerate() {
            let i = index[k];
            if i >= c.shape()[1] {
                return Err(TtError::IndexOutOfRange(format!(
                    "eval: index {i} >= mode size {} in dimension {k}",
                    c.shape()[1]
                )));
            }
            let m = c.slice(s![.., i, ..]);
            v = v.dot(&m);
        }
        Ok(v[0])
    }

    /// Pointwise sum. Interior bond ranks add; boundary ranks stay 1.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dims() != other.dims() {
            return Err(TtError::DimensionMismatch("add: mode sizes differ".into()));
        }
        let d = self.ndim();
        if d == 1 {
            return Self::new(vec![&self.cores[0] + &other.cores[0]]);
        }
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let a = &self.cores[k];
            let b = &other.cores[k];
            let (la, n, ra) = (a.shape()[0], a.shape()[1], a.shape()[2]);
            let (lb, rb) = (b.shape()[0], b.shape()[2]);
            let (lo, ro) = if k == 0 {
                (1, ra + rb)
            } else if k == d - 1 {
                (la + lb, 1)
            } else {
                (la + lb, ra + rb)
            };
            let mut c = Array3::zeros((lo, n, ro));
            if k == 0 {
                c.slice_mut(s![0..1, .., 0..ra]).assign(a);
                c.slice_mut(s![0..1, .., ra..]).assign(b);
            } else if k == d - 1 {
                c.slice_mut(s![0..la, .., 0..1]).assign(a);
                c.slice_mut(s![la.., .., 0..1]).assign(b);
            } else {
                c.slice_mut(s![0..la, .., 0..ra]).assign(a);
                c.slice_mut(s![la.., .., ra..]).assign(b);
            }
            cores.push(c);
        }
        Self::new(cores)
    }

    /// Elementwise (Hadamard) product; interior bond ranks multiply.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        if self.dims() != other.dims() {
            return Err(TtError::DimensionMismatch("hadamard: mode sizes differ".into()));
        }
        let mut cores = Vec::with_capacity(self.ndim());
        for (a, b) in self.cores.iter().zip(&other.cores) {
            let (la, n, ra) = (a.shape()[0], a.shape()[1], a.shape()[2]);
            let (lb, rb) = (b.shape()[0], b.shape()[2]);
            let mut c = Array3::zeros((la * lb, n, ra * rb));
            for i in 0..n {
                for p in 0..la {
                    for q in 0..lb {
                        for u in 0..ra {
                            for v in 0..rb {
                                c[[p * lb + q, i, u * rb + v]] = a[[p, i, u]] * b[[q, i, v]];
                            }
                        }
                    }
                }
            }
            cores.push(c);
        }
        Self::new(cores)
    }

    /// Scalar multiple: scales the first core, ranks unchanged.
    pub fn scale(&self, s: C64) -> Self {
        let mut cores = self.cores.clone();
        cores[0].mapv_inplace(|v| v * s);
        Self { cores }
    }

    /// Complex conjugate of every entry.
    pub fn conj(&self) -> Self {
        Self {
            cores: self.cores.iter().map(|c| c.mapv(|v| v.conj())).collect(),
        }
    }

    /// weight * sum_k conj(self[k]) * other[k], by left-to-right bond
    /// contraction in O(d n r^3).
    pub fn inner(&self, other: &Self, weight: f64) -> Result<C64> {
        if self.dims() != other.dims() {
            return Err(TtError::DimensionMismatch("inner: mode sizes differ".into()));
        }
        let mut y: Array2<C64> = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
        for (a, b) in self.cores.iter().zip(&other.cores) {
            let n = a.shape()[1];
            let mut next = Array2::zeros((a.shape()[2], b.shape()[2]));
            for i in 0..n {
                let am = a.slice(s![.., i, ..]).mapv(|v| v.conj());
                let bm = b.slice(s![.., i, ..]);
                next = next + am.t().dot(&y).dot(&bm);
            }
            y = next;
        }
        Ok(y[[0, 0]] * weight)
    }

    /// sqrt(<self|self>) with the imaginary part discarded after checking it
    /// is negligible; a significantly negative real part signals a
    /// contraction bug and is reported as a numerical failure.
    pub fn norm(&self, weight: f64) -> Result<f64> {
        let ip = self.inner(self, weight)?;
        // Cancellation in the contraction is bounded by the product of core
        // Frobenius norms, so judge the residual imaginary/negative parts
        // against that scale rather than the (possibly tiny) result.
        let bound: f64 = self
            .cores
            .iter()
            .map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
            .product::<f64>()
            .powi(2)
            * weight.abs();
        let slack = 1e-12 * bound.max(ip.re.abs()) + 1e-300;
        if ip.im.abs() > slack {
            return Err(TtError::Numerical(format!(
                "norm: non-real self inner product {ip}"
            )));
        }
        if ip.re < -slack {
            return Err(TtError::Numerical(format!(
                "norm: negative self inner product {}",
                ip.re
            )));
        }
        Ok(ip.re.max(0.0).sqrt())
    }

    /// Rank re-compression: right-to-left orthogonalization followed by a
    /// left-to-right truncated-SVD sweep. Guarantees
    /// ||self - result||_F <= tol * ||self||_F when `rmax` is not binding.
    pub fn round(&self, tol: f64, rmax: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&tol) {
            return Err(TtError::InvalidArgument(format!("round: tol = {tol} outside [0, 1)")));
        }
        if rmax < 1 {
            return Err(TtError::InvalidArgument("round: rmax must be >= 1".into()));
        }
        let d = self.ndim();
        if d == 1 {
            return Ok(self.clone());
        }
        let mut cores = self.cores.clone();
        // Right-to-left LQ sweep leaves core 0 carrying the full norm.
        for k in (1..d).rev() {
            let (l, n, r) = (cores[k].shape()[0], cores[k].shape()[1], cores[k].shape()[2]);
            let m = into_matrix(&cores[k], l, n * r);
            let mh = m.t().mapv(|v| v.conj());
            let (q, rr) = mh
                .qr()
                .map_err(|e| TtError::Numerical(format!("round: QR failed: {e}")))?;
            let lmat = rr.t().mapv(|v| v.conj()); // (l, l')
            let qmat = q.t().mapv(|v| v.conj()); // (l', n*r)
            let lp = qmat.shape()[0];
            cores[k] = from_matrix(&qmat, lp, n, r);
            let prev = &cores[k - 1];
            let (pl, pn, pr) = (prev.shape()[0], prev.shape()[1], prev.shape()[2]);
            debug_assert_eq!(pr, l);
            let pm = into_matrix(prev, pl * pn, pr).dot(&lmat);
            cores[k - 1] = from_matrix(&pm, pl, pn, lp);
        }
        let norm: f64 = cores[0].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Self::zeros(&self.dims());
        }
        let delta = if tol > 0.0 {
            tol * norm / ((d - 1) as f64).sqrt()
        } else {
            0.0
        };
        // Left-to-right truncated SVD sweep.
        for k in 0..d - 1 {
            let (l, n, r) = (cores[k].shape()[0], cores[k].shape()[1], cores[k].shape()[2]);
            let m = into_matrix(&cores[k], l * n, r);
            let (u, sing, vt) = m
                .svddc(JobSvd::Some)
                .map_err(|e| TtError::Numerical(format!("round: SVD failed: {e}")))?;
            let u = u.ok_or_else(|| TtError::Numerical("round: SVD returned no U".into()))?;
            let vt = vt.ok_or_else(|| TtError::Numerical("round: SVD returned no V^H".into()))?;
            let keep = truncation_rank(&sing, delta, rmax);
            let unew = u.slice(s![.., 0..keep]).to_owned();
            cores[k] = from_matrix(&unew, l, n, keep);
            // carry = diag(sigma) V^H into the next core
            let mut carry = vt.slice(s![0..keep, ..]).to_owned();
            for (i, mut row) in carry.outer_iter_mut().enumerate() {
                let sv = C64::new(sing[i], 0.0);
                row.mapv_inplace(|v| v * sv);
            }
            let nxt = &cores[k + 1];
            let (nl, nn, nr) = (nxt.shape()[0], nxt.shape()[1], nxt.shape()[2]);
            let nm = carry.dot(&into_matrix(nxt, nl, nn * nr));
            cores[k + 1] = from_matrix(&nm, keep, nn, nr);
        }
        Self::new(cores)
    }

    /// Dense 2-D slice: keep dimensions p < q, fix all other indices.
    /// Chain segments are pre-contracted so the cost is O(d n r^2), not one
    /// full evaluation per entry.
    pub fn slice2d(&self, p: usize, q: usize, fixed: &[usize]) -> Result<Array2<C64>> {
        let d = self.ndim();
        if p >= q || q >= d {
            return Err(TtError::InvalidArgument(format!("slice2d: need p < q < d, got ({p}, {q})")));
        }
        if fixed.len() != d {
            return Err(TtError::DimensionMismatch(
                "slice2d: fixed index list must cover every dimension".into(),
            ));
        }
        let dims = self.dims();
        for (j, (&i, &n)) in fixed.iter().zip(&dims).enumerate() {
            if j != p && j != q && i >= n {
                return Err(TtError::IndexOutOfRange(format!("slice2d: fixed index in dimension {j}")));
            }
        }
        let seg = |range: std::ops::Range<usize>, empty_size: usize| -> Array2<C64> {
            let mut m: Option<Array2<C64>> = None;
            for k in range {
                let sel = self.cores[k].slice(s![.., fixed[k], ..]).to_owned();
                m = Some(match m {
                    None => sel,
                    Some(acc) => acc.dot(&sel),
                });
            }
            m.unwrap_or_else(|| Array2::eye(empty_size))
        };
        let ranks = self.ranks();
        let left = seg(0..p, 1); // (1, r_{p-1})
        let mid = seg(p + 1..q, ranks[p + 1]);
        let right = seg(q + 1..d, 1); // (r_q, 1)
        let np = dims[p];
        let nq = dims[q];
        let mut out = Array2::zeros((np, nq));
        let mut rows = Vec::with_capacity(np);
        for i in 0..np {
            let u = left.dot(&self.cores[p].slice(s![.., i, ..])).dot(&mid);
            rows.push(u);
        }
        let mut cols = Vec::with_capacity(nq);
        for j in 0..nq {
            let v = self.cores[q].slice(s![.., j, ..]).dot(&right);
            cols.push(v);
        }
        for i in 0..np {
            for j in 0..nq {
                out[[i, j]] = rows[i].dot(&cols[j])[[0, 0]];
            }
        }
        Ok(out)
    }

    /// Applies a linear map to every physical fiber of core `j`; all other
    /// cores and all ranks are untouched.
    pub fn mode_apply<F: FnMut(&mut [C64])>(&self, j: usize, mut op: F) -> Result<Self> {
        if j >= self.ndim() {
            return Err(TtError::IndexOutOfRange(format!("mode_apply: dimension {j}")));
        }
        let mut cores = self.cores.clone();
        apply_to_fibers(&mut cores[j], &mut op);
        Self::new(cores)
    }

    /// Exact representation of sum_j Op_j(self) where Op_j acts on the
    /// fibers of mode j only; interior bond ranks double. The closure
    /// receives (dimension, fiber).
    pub fn sum_mode_transforms<F: FnMut(usize, &mut [C64])>(&self, mut op: F) -> Result<Self> {
        let d = self.ndim();
        if d == 1 {
            let mut cores = self.cores.clone();
            apply_to_fibers(&mut cores[0], &mut |f: &mut [C64]| op(0, f));
            return Self::new(cores);
        }
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let a = &self.cores[k];
            let mut ta = a.clone();
            apply_to_fibers(&mut ta, &mut |f: &mut [C64]| op(k, f));
            let (l, n, r) = (a.shape()[0], a.shape()[1], a.shape()[2]);
            let c = if k == 0 {
                // row [W, Op(W)]
                let mut c = Array3::zeros((1, n, 2 * r));
                c.slice_mut(s![.., .., 0..r]).assign(a);
                c.slice_mut(s![.., .., r..]).assign(&ta);
                c
            } else if k == d - 1 {
                // column [Op(W); W]
                let mut c = Array3::zeros((2 * l, n, 1));
                c.slice_mut(s![0..l, .., ..]).assign(&ta);
                c.slice_mut(s![l.., .., ..]).assign(a);
                c
            } else {
                // [[W, Op(W)], [0, W]]
                let mut c = Array3::zeros((2 * l, n, 2 * r));
                c.slice_mut(s![0..l, .., 0..r]).assign(a);
                c.slice_mut(s![0..l, .., r..]).assign(&ta);
                c.slice_mut(s![l.., .., r..]).assign(a);
                c
            };
            cores.push(c);
        }
        Self::new(cores)
    }

    /// Elementwise exponential by scaling and squaring: `bound` must be an
    /// analytic upper bound on max |self| (a max-norm is not cheaply
    /// computable in this format). m halvings, a degree-8 Hadamard Taylor
    /// polynomial of exp(self / 2^m), then m Hadamard squarings with
    /// rounding after each.
    pub fn hadamard_exp(&self, tol: f64, rmax: usize, bound: f64) -> Result<Self> {
        let dims = self.dims();
        if bound <= 0.0 {
            if self.norm(1.0)? == 0.0 {
                return Self::ones(&dims);
            }
            return Err(TtError::InvalidArgument(
                "hadamard_exp: nonpositive bound for a nonzero argument".into(),
            ));
        }
        let m = (bound.log2().ceil() as i64 + 4).max(0) as u32;
        let y = self.scale(C64::new((0.5f64).powi(m as i32), 0.0));
        let ones = Self::ones(&dims)?;
        // Horner form of the degree-8 Taylor polynomial of exp.
        let mut p = ones.scale(C64::new(1.0 / factorial(8), 0.0));
        for k in (0..8).rev() {
            p = y.hadamard(&p)?.round(tol, rmax)?;
            p = p.add(&ones.scale(C64::new(1.0 / factorial(k), 0.0)))?.round(tol, rmax)?;
        }
        for _ in 0..m {
            p = p.hadamard(&p)?.round(tol, rmax)?;
        }
        Ok(p)
    }

    /// Full dense expansion, guarded to small totals; intended for oracles
    /// and slices in low dimension counts.
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        let total: usize = self.dims().iter().product();
        if total > (1 << 24) {
            return Err(TtError::InvalidArgument(format!(
                "to_dense: {total} entries exceeds the memory guard"
            )));
        }
        // Left-to-right expansion: rows indexed by flattened physical indices.
        let mut acc: Array2<C64> = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
        for c in &self.cores {
            let (l, n, r) = (c.shape()[0], c.shape()[1], c.shape()[2]);
            let m = into_matrix(c, l, n * r);
            let prod = acc.dot(&m); // (rows, n*r)
            let rows = prod.shape()[0];
            let mut next = Array2::zeros((rows * n, r));
            for a in 0..rows {
                for i in 0..n {
                    for b in 0..r {
                        next[[a * n + i, b]] = prod[[a, i * r + b]];
                    }
                }
            }
            acc = next;
        }
        Ok(acc.column(0).to_vec())
    }

    /// Serializes in the TTC1 checkpoint layout (little-endian, complex
    /// values as two f64).
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&TTC_MAGIC)?;
        w.write_all(&(self.ndim() as u32).to_le_bytes())?;
        for n in self.dims() {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for r in self.ranks() {
            w.write_all(&(r as u64).to_le_bytes())?;
        }
        for c in &self.cores {
            for v in c.iter() {
                w.write_all(&v.re.to_le_bytes())?;
                w.write_all(&v.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != TTC_MAGIC {
            return Err(TtError::Format("bad TTC1 magic".into()));
        }
        let d = read_u32(r)? as usize;
        if d == 0 {
            return Err(TtError::Format("TTC1: zero dimensions".into()));
        }
        let dims: Vec<usize> = (0..d).map(|_| read_u64(r).map(|v| v as usize)).collect::<Result<_>>()?;
        let ranks: Vec<usize> = (0..=d).map(|_| read_u64(r).map(|v| v as usize)).collect::<Result<_>>()?;
        if ranks[0] != 1 || ranks[d] != 1 || ranks.iter().any(|&x| x == 0) || dims.iter().any(|&n| n == 0) {
            return Err(TtError::Format("TTC1: inconsistent ranks or mode sizes".into()));
        }
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let (l, n, rr) = (ranks[k], dims[k], ranks[k + 1]);
            let mut c = Array3::zeros((l, n, rr));
            for v in c.iter_mut() {
                let re = read_f64(r)?;
                let im = read_f64(r)?;
                *v = C64::new(re, im);
            }
            cores.push(c);
        }
        Self::new(cores)
    }
}

fn apply_to_fibers<F: FnMut(&mut [C64])>(core: &mut Array3<C64>, op: &mut F) {
    let (l, n, r) = (core.shape()[0], core.shape()[1], core.shape()[2]);
    let mut fiber = vec![C64::new(0.0, 0.0); n];
    for a in 0..l {
        for b in 0..r {
            for i in 0..n {
                fiber[i] = core[[a, i, b]];
            }
            op(&mut fiber);
            for i in 0..n {
                core[[a, i, b]] = fiber[i];
            }
        }
    }
}

fn into_matrix(c: &Array3<C64>, rows: usize, cols: usize) -> Array2<C64> {
    c.to_shape((rows, cols)).expect("core reshape").to_owned()
}

fn from_matrix(m: &Array2<C64>, l: usize, n: usize, r: usize) -> Array3<C64> {
    m.to_shape((l, n, r)).expect("matrix reshape").to_owned()
}

fn truncation_rank(sing: &Array1<f64>, delta: f64, rmax: usize) -> usize {
    let full = sing.len();
    let mut keep = full.min(rmax);
    if delta > 0.0 {
        // Discard the smallest tail with squared sum <= delta^2.
        let budget = delta * delta;
        let mut tail = 0.0;
        let mut cut = full;
        for i in (0..full).rev() {
            tail += sing[i] * sing[i];
            if tail > budget {
                break;
            }
            cut = i;
        }
        keep = keep.min(cut);
    }
    keep.max(1)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product::<f64>().max(1.0)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
