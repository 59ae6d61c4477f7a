//! Gaussian-process regression with a Matérn-5/2 ARD kernel, exact
//! posterior inference, and marginal-likelihood hyperparameter fitting.
//!
//! Inputs are standardized to the unit cube and outputs to zero mean and
//! unit variance internally; every reported quantity is de-standardized.
//! Kernel hyperparameters therefore live in standardized space: length
//! scales are fractions of the domain width, signal/noise variances are
//! relative to the output variance.

use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::afopt;
use crate::domain::BoxDomain;
use crate::error::{ParboError, Result};
use crate::rng;

/// Matérn smoothness, fixed for the whole toolkit.
pub const MATERN_SMOOTHNESS: f64 = 2.5;

/// Fitted noise variance never drops below this fraction of the signal
/// variance; simulator observations are deterministic but exact zero noise
/// risks ill-conditioning.
pub const NOISE_FLOOR_RATIO: f64 = 1e-8;

const LOG_SCALE_LO: f64 = -6.907_755_278_982_137; // ln 1e-3
const LOG_SCALE_HI: f64 = 6.907_755_278_982_137; // ln 1e3
const LOG_NOISE_LO: f64 = -23.025_850_929_940_46; // ln 1e-10
const LOG_NOISE_HI: f64 = 0.0; // ln 1

#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub length_scales: Vec<f64>,
    pub noise_variance: f64,
}

impl KernelParams {
    pub fn new(signal_variance: f64, length_scales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        let p = KernelParams {
            signal_variance,
            length_scales,
            noise_variance,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn isotropic(dim: usize, length_scale: f64) -> Self {
        KernelParams {
            signal_variance: 1.0,
            length_scales: vec![length_scale; dim],
            noise_variance: 1e-6,
        }
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    fn validate(&self) -> Result<()> {
        if !(self.signal_variance > 0.0) || !self.signal_variance.is_finite() {
            return Err(ParboError::InvalidArgument(format!(
                "signal variance must be positive (got {})",
                self.signal_variance
            )));
        }
        if self.length_scales.is_empty()
            || self.length_scales.iter().any(|l| !(*l > 0.0) || !l.is_finite())
        {
            return Err(ParboError::InvalidArgument(
                "all length scales must be positive".into(),
            ));
        }
        if !(self.noise_variance >= 0.0) || !self.noise_variance.is_finite() {
            return Err(ParboError::InvalidArgument(format!(
                "noise variance must be nonnegative (got {})",
                self.noise_variance
            )));
        }
        Ok(())
    }
}

/// Ordered collection of (design point, observation) pairs.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(ParboError::InvalidArgument(format!(
                "points/values length mismatch: {} vs {}",
                points.len(),
                values.len()
            )));
        }
        if let Some(first) = points.first() {
            let d = first.len();
            if points.iter().any(|p| p.len() != d) {
                return Err(ParboError::InvalidArgument(
                    "inconsistent point dimensions".into(),
                ));
            }
        }
        Ok(Dataset { points, values })
    }

    pub fn empty() -> Self {
        Dataset::default()
    }

    pub fn push(&mut self, point: Vec<f64>, value: f64) {
        self.points.push(point);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Best (smallest-value) pair; ties resolved to the earliest entry.
    pub fn incumbent(&self) -> Option<(&[f64], f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            if best.map_or(true, |(_, bv)| v < bv) {
                best = Some((i, v));
            }
        }
        best.map(|(i, v)| (self.points[i].as_slice(), v))
    }

    pub fn check_within(&self, domain: &BoxDomain) -> Result<()> {
        for p in &self.points {
            if !domain.contains(p) {
                return Err(ParboError::InvalidArgument(format!(
                    "training point {:?} outside the box domain",
                    p
                )));
            }
        }
        Ok(())
    }
}

fn scaled_distance(a: &[f64], b: &[f64], scales: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = (a[i] - b[i]) / scales[i];
        s += d * d;
    }
    s.sqrt()
}

fn matern_profile(r: f64) -> f64 {
    let sr = 5.0_f64.sqrt() * r;
    (1.0 + sr + sr * sr / 3.0) * (-sr).exp()
}

/// Matérn-5/2 ARD kernel between two design vectors.
pub fn matern25(a: &[f64], b: &[f64], params: &KernelParams) -> Result<f64> {
    if a.len() != b.len() || a.len() != params.length_scales.len() {
        return Err(ParboError::InvalidArgument(format!(
            "kernel dimension mismatch: |a|={}, |b|={}, |l|={}",
            a.len(),
            b.len(),
            params.length_scales.len()
        )));
    }
    let r = scaled_distance(a, b, &params.length_scales);
    Ok(params.signal_variance * matern_profile(r))
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// First multistart initialization; defaults to a mid-scale guess.
    pub init: Option<KernelParams>,
    /// Total multistart initializations for the marginal-likelihood ascent.
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            init: None,
            restarts: 5,
        }
    }
}

/// Trained Gaussian-process surrogate.
#[derive(Debug, Clone)]
pub struct GpModel {
    params: KernelParams,
    train: Dataset,
    x_std: Vec<Vec<f64>>,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    domain: BoxDomain,
    y_mean: f64,
    y_scale: f64,
    jitter: f64,
}

fn output_transform(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let scale = var.sqrt();
    (mean, if scale > 1e-12 { scale } else { 1.0 })
}

/// Cholesky with diagonal jitter escalation: try exact, then 1e-10 scaled by
/// 10 up to 1e-4.
fn cholesky_with_jitter(k: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = k.nrows();
    let mut jitter = 0.0;
    loop {
        let mut attempt = k.clone();
        if jitter > 0.0 {
            for i in 0..n {
                attempt[(i, i)] += jitter;
            }
        }
        if let Some(c) = attempt.cholesky() {
            return Ok((c.l(), jitter));
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
        if jitter > 1e-4 {
            return Err(ParboError::Numerical(format!(
                "kernel matrix not positive-definite after jitter escalation to 1e-4 (n = {})",
                n
            )));
        }
    }
}

impl GpModel {
    /// Build a model with explicit hyperparameters (no likelihood fit); only
    /// the Cholesky factor is computed.
    pub fn with_params(train: Dataset, domain: &BoxDomain, params: KernelParams) -> Result<Self> {
        params.validate()?;
        if params.dim() != domain.dim() {
            return Err(ParboError::InvalidArgument(format!(
                "kernel dimension {} does not match domain dimension {}",
                params.dim(),
                domain.dim()
            )));
        }
        train.check_within(domain)?;
        let (y_mean, y_scale) = output_transform(train.values());
        Self::assemble(train, domain.clone(), params, y_mean, y_scale)
    }

    /// Prior model (no training data): zero mean, kernel variance everywhere.
    pub fn prior(domain: &BoxDomain, params: KernelParams) -> Result<Self> {
        GpModel::with_params(Dataset::empty(), domain, params)
    }

    fn assemble(
        train: Dataset,
        domain: BoxDomain,
        params: KernelParams,
        y_mean: f64,
        y_scale: f64,
    ) -> Result<Self> {
        let n = train.len();
        let x_std: Vec<Vec<f64>> = train.points().iter().map(|p| domain.to_unit(p)).collect();
        let y_std = DVector::from_iterator(
            n,
            train.values().iter().map(|v| (v - y_mean) / y_scale),
        );
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let r = scaled_distance(&x_std[i], &x_std[j], &params.length_scales);
                let v = params.signal_variance * matern_profile(r);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
            k[(i, i)] += params.noise_variance;
        }
        let (chol, jitter) = if n > 0 {
            cholesky_with_jitter(&k)?
        } else {
            (DMatrix::zeros(0, 0), 0.0)
        };
        let alpha = if n > 0 {
            let mut a = y_std.clone();
            chol.solve_lower_triangular_mut(&mut a);
            chol.transpose().solve_upper_triangular_mut(&mut a);
            a
        } else {
            DVector::zeros(0)
        };
        Ok(GpModel {
            params,
            train,
            x_std,
            chol,
            alpha,
            domain,
            y_mean,
            y_scale,
            jitter,
        })
    }

    /// Fit hyperparameters by multistart maximization of the log marginal
    /// likelihood in log-hyperparameter space.
    pub fn fit(
        train: &Dataset,
        domain: &BoxDomain,
        opts: &FitOptions,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(ParboError::InvalidArgument(
                "cannot fit a GP on an empty dataset".into(),
            ));
        }
        train.check_within(domain)?;
        let d = domain.dim();
        let ws = FitWorkspace::new(train, domain);

        let theta_dim = d + 2;
        let bounds = BoxDomain::new(
            {
                let mut lo = vec![LOG_SCALE_LO; theta_dim];
                lo[theta_dim - 1] = LOG_NOISE_LO;
                lo
            },
            {
                let mut hi = vec![LOG_SCALE_HI; theta_dim];
                hi[theta_dim - 1] = LOG_NOISE_HI;
                hi
            },
        )?;

        // each restart gets a bounded likelihood-evaluation budget; the
        // budget is enforced by turning the objective non-finite, which the
        // descent treats as a rejected step
        let budget = RefCell::new(0usize);
        const EVAL_BUDGET: usize = 240;
        let cache: RefCell<Option<(Vec<f64>, f64, Vec<f64>)>> = RefCell::new(None);
        let eval = |theta: &[f64]| -> (f64, Vec<f64>) {
            if let Some((t, f, g)) = cache.borrow().as_ref() {
                if t.as_slice() == theta {
                    return (*f, g.clone());
                }
            }
            {
                let mut used = budget.borrow_mut();
                if *used >= EVAL_BUDGET {
                    return (f64::INFINITY, vec![0.0; theta.len()]);
                }
                *used += 1;
            }
            let (nll, grad) = ws.nll_with_grad(theta);
            *cache.borrow_mut() = Some((theta.to_vec(), nll, grad.clone()));
            (nll, grad)
        };
        let f = |theta: &[f64]| eval(theta).0;
        let g = |theta: &[f64]| eval(theta).1;

        let init = opts.init.clone().unwrap_or_else(|| KernelParams {
            signal_variance: 1.0,
            length_scales: vec![0.3; d],
            noise_variance: 1e-6,
        });
        let mut theta0 = Vec::with_capacity(theta_dim);
        theta0.push(init.signal_variance.ln());
        for l in &init.length_scales {
            theta0.push(l.ln());
        }
        theta0.push(init.noise_variance.max(1e-10).ln());
        for v in theta0.iter_mut() {
            *v = v.clamp(LOG_SCALE_LO, LOG_SCALE_HI);
        }

        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut offer = |cand: Option<(Vec<f64>, f64)>| {
            if let Some((t, v)) = cand {
                if v.is_finite() && best.as_ref().map_or(true, |(_, bv)| v < *bv) {
                    best = Some((t, v));
                }
            }
        };
        *budget.borrow_mut() = 0;
        offer(afopt::descend_single(&f, Some(&g), &bounds, &theta0, 120));

        if opts.restarts > 1 {
            // Restart draws come from a moderate sub-box; descents still move
            // within the full bounds.
            let start_box = BoxDomain::new(
                {
                    let mut lo = vec![(0.05_f64).ln(); theta_dim];
                    lo[0] = (0.1_f64).ln();
                    lo[theta_dim - 1] = (1e-8_f64).ln();
                    lo
                },
                {
                    let mut hi = vec![(2.0_f64).ln(); theta_dim];
                    hi[0] = (10.0_f64).ln();
                    hi[theta_dim - 1] = (1e-2_f64).ln();
                    hi
                },
            )?;
            for s in start_box.latin_hypercube(opts.restarts - 1, rng) {
                *budget.borrow_mut() = 0;
                offer(afopt::descend_single(&f, Some(&g), &bounds, &s, 120));
            }
        }

        let (theta, _) = best.ok_or_else(|| {
            ParboError::Numerical("marginal-likelihood optimization failed at every start".into())
        })?;
        let sv = theta[0].exp();
        let ls: Vec<f64> = theta[1..=d].iter().map(|t| t.exp()).collect();
        let nv = theta[d + 1].exp().max(NOISE_FLOOR_RATIO * sv);
        let params = KernelParams::new(sv, ls, nv)?;
        let (y_mean, y_scale) = (ws.y_mean, ws.y_scale);
        Self::assemble(train.clone(), domain.clone(), params, y_mean, y_scale)
    }

    /// New model on this model's data plus extra pairs, with hyperparameters
    /// and output transform frozen; only the Cholesky factor is refreshed.
    pub fn extended(&self, points: &[Vec<f64>], values: &[f64]) -> Result<Self> {
        if points.len() != values.len() {
            return Err(ParboError::InvalidArgument(
                "extended: points/values length mismatch".into(),
            ));
        }
        let mut train = self.train.clone();
        for (p, v) in points.iter().zip(values) {
            if !self.domain.contains(p) {
                return Err(ParboError::InvalidArgument(format!(
                    "extension point {:?} outside the box domain",
                    p
                )));
            }
            train.push(p.clone(), *v);
        }
        Self::assemble(
            train,
            self.domain.clone(),
            self.params.clone(),
            self.y_mean,
            self.y_scale,
        )
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn y_scale(&self) -> f64 {
        self.y_scale
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Log marginal likelihood of the training data under the fitted
    /// hyperparameters (standardized outputs).
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.train.len();
        if n == 0 {
            return 0.0;
        }
        let y_std = DVector::from_iterator(
            n,
            self.train
                .values()
                .iter()
                .map(|v| (v - self.y_mean) / self.y_scale),
        );
        let quad = y_std.dot(&self.alpha);
        let logdet: f64 = (0..n).map(|i| self.chol[(i, i)].ln()).sum();
        -0.5 * quad - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    fn kvec_std(&self, q_std: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.x_std.len(),
            self.x_std.iter().map(|x| {
                let r = scaled_distance(q_std, x, &self.params.length_scales);
                self.params.signal_variance * matern_profile(r)
            }),
        )
    }

    /// Posterior mean and standard deviation at a query point (raw units).
    pub fn posterior(&self, query: &[f64]) -> Result<(f64, f64)> {
        if query.len() != self.domain.dim() {
            return Err(ParboError::InvalidArgument(format!(
                "query dimension {} does not match domain dimension {}",
                query.len(),
                self.domain.dim()
            )));
        }
        let (m_std, var_std) = self.posterior_std_units(query);
        Ok((
            self.y_mean + self.y_scale * m_std,
            self.y_scale * var_std.max(0.0).sqrt(),
        ))
    }

    fn posterior_std_units(&self, query: &[f64]) -> (f64, f64) {
        let q_std = self.domain.to_unit(query);
        let prior_var = self.params.signal_variance;
        if self.train.is_empty() {
            return (0.0, prior_var);
        }
        let k = self.kvec_std(&q_std);
        let mean = k.dot(&self.alpha);
        let mut v = k;
        self.chol.solve_lower_triangular_mut(&mut v);
        let var = prior_var - v.dot(&v);
        (mean, var)
    }

    /// Posterior mean only; panics on dimension mismatch (hot path).
    pub fn posterior_mean(&self, query: &[f64]) -> f64 {
        debug_assert_eq!(query.len(), self.domain.dim());
        self.posterior_std_units(query).0 * self.y_scale + self.y_mean
    }

    /// Joint posterior mean vector and covariance matrix at a set of query
    /// points (raw units).
    pub fn posterior_joint(&self, queries: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let q = queries.len();
        for p in queries {
            if p.len() != self.domain.dim() {
                return Err(ParboError::InvalidArgument(
                    "joint query dimension mismatch".into(),
                ));
            }
        }
        let q_std: Vec<Vec<f64>> = queries.iter().map(|p| self.domain.to_unit(p)).collect();
        let mut prior = DMatrix::zeros(q, q);
        for i in 0..q {
            for j in 0..=i {
                let r = scaled_distance(&q_std[i], &q_std[j], &self.params.length_scales);
                let v = self.params.signal_variance * matern_profile(r);
                prior[(i, j)] = v;
                prior[(j, i)] = v;
            }
        }
        if self.train.is_empty() {
            let mean = DVector::from_element(q, self.y_mean);
            return Ok((mean, prior * self.y_scale * self.y_scale));
        }
        let n = self.train.len();
        let mut kxq = DMatrix::zeros(n, q);
        for j in 0..q {
            kxq.set_column(j, &self.kvec_std(&q_std[j]));
        }
        let mean_std = kxq.transpose() * &self.alpha;
        let mut v = kxq;
        self.chol.solve_lower_triangular_mut(&mut v);
        let cov_std = prior - v.transpose() * v;
        let mean = mean_std.map(|m| self.y_mean + self.y_scale * m);
        let cov = cov_std.map(|c| c * self.y_scale * self.y_scale);
        Ok((mean, cov))
    }

    /// One draw from the posterior predictive at a query point.
    pub fn sample(&self, query: &[f64], rng: &mut ChaCha8Rng) -> Result<f64> {
        let (mean, std) = self.posterior(query)?;
        let z: f64 = rng.sample(StandardNormal);
        Ok(mean + std * z)
    }
}

/// Precomputed quantities for likelihood evaluation over one dataset.
pub struct FitWorkspace {
    y_std: DVector<f64>,
    d2: Vec<DMatrix<f64>>,
    n: usize,
    dim: usize,
    pub y_mean: f64,
    pub y_scale: f64,
}

impl FitWorkspace {
    pub fn new(train: &Dataset, domain: &BoxDomain) -> Self {
        let n = train.len();
        let dim = domain.dim();
        let x_std: Vec<Vec<f64>> = train.points().iter().map(|p| domain.to_unit(p)).collect();
        let (y_mean, y_scale) = output_transform(train.values());
        let y_std = DVector::from_iterator(
            n,
            train.values().iter().map(|v| (v - y_mean) / y_scale),
        );
        let mut d2 = Vec::with_capacity(dim);
        for p in 0..dim {
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let d = x_std[i][p] - x_std[j][p];
                    m[(i, j)] = d * d;
                    m[(j, i)] = d * d;
                }
            }
            d2.push(m);
        }
        FitWorkspace {
            y_std,
            d2,
            n,
            dim,
            y_mean,
            y_scale,
        }
    }

    /// Negative log marginal likelihood and its gradient with respect to
    /// `[ln signal_variance, ln l_1..l_d, ln noise_variance]`.
    pub fn nll_with_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let n = self.n;
        let d = self.dim;
        let sv = theta[0].exp();
        let ls: Vec<f64> = theta[1..=d].iter().map(|t| t.exp()).collect();
        let nv = theta[d + 1].exp();
        let inf = (f64::INFINITY, vec![0.0; d + 2]);

        // r matrix and kernel
        let mut r = DMatrix::zeros(n, n);
        for p in 0..d {
            let inv2 = 1.0 / (ls[p] * ls[p]);
            r += &self.d2[p] * inv2;
        }
        let r = r.map(|v| v.max(0.0).sqrt());
        let kf = r.map(|rv| sv * matern_profile(rv));
        let mut k = kf.clone();
        for i in 0..n {
            k[(i, i)] += nv;
        }
        let chol = match k.clone().cholesky() {
            Some(c) => c,
            None => return inf,
        };
        let l = chol.l();
        let mut alpha = self.y_std.clone();
        l.solve_lower_triangular_mut(&mut alpha);
        l.transpose().solve_upper_triangular_mut(&mut alpha);

        let quad = self.y_std.dot(&alpha);
        let logdet: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
        let nll = 0.5 * quad + logdet + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        if !nll.is_finite() {
            return inf;
        }

        // W = alpha alpha^T - K^{-1}; dLML/dtheta = 0.5 tr(W dK/dtheta)
        let kinv = chol.inverse();
        let w = &alpha * alpha.transpose() - kinv;

        let mut grad = vec![0.0; d + 2];
        // d nll / d ln sv = -0.5 tr(W Kf)
        let mut tr_sv = 0.0;
        for i in 0..n {
            for j in 0..n {
                tr_sv += w[(i, j)] * kf[(i, j)];
            }
        }
        grad[0] = -0.5 * tr_sv;

        // length scales: dK_ij/d ln l_p = sv e^{-sqrt5 r} (5/3)(1+sqrt5 r) D2_p / l_p^2
        let sqrt5 = 5.0_f64.sqrt();
        for p in 0..d {
            let inv2 = 1.0 / (ls[p] * ls[p]);
            let mut tr = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let rv = r[(i, j)];
                    let dk = sv
                        * (-sqrt5 * rv).exp()
                        * (5.0 / 3.0)
                        * (1.0 + sqrt5 * rv)
                        * self.d2[p][(i, j)]
                        * inv2;
                    tr += w[(i, j)] * dk;
                }
            }
            grad[1 + p] = -0.5 * tr;
        }

        // noise: dK/d ln nv = nv I
        let mut tr_nv = 0.0;
        for i in 0..n {
            tr_nv += w[(i, i)] * nv;
        }
        grad[d + 1] = -0.5 * tr_nv;

        (nll, grad)
    }
}

/// Log marginal likelihood and gradient at explicit hyperparameters
/// (standardized space), exposed for gradient verification.
pub fn lml_with_grad(
    train: &Dataset,
    domain: &BoxDomain,
    params: &KernelParams,
) -> Result<(f64, Vec<f64>)> {
    params.validate()?;
    if train.is_empty() {
        return Err(ParboError::InvalidArgument("empty dataset".into()));
    }
    let ws = FitWorkspace::new(train, domain);
    let d = domain.dim();
    let mut theta = Vec::with_capacity(d + 2);
    theta.push(params.signal_variance.ln());
    for l in &params.length_scales {
        theta.push(l.ln());
    }
    theta.push(params.noise_variance.max(1e-300).ln());
    let (nll, g) = ws.nll_with_grad(&theta);
    Ok((-nll, g.into_iter().map(|v| -v).collect()))
}

/// Draw a function sample from a GP prior at fixed points (test utility for
/// generate-and-recover experiments).
pub fn sample_prior_function(
    points_std: &[Vec<f64>],
    params: &KernelParams,
    seed: u64,
) -> Vec<f64> {
    let n = points_std.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let r = scaled_distance(&points_std[i], &points_std[j], &params.length_scales);
            let v = params.signal_variance * matern_profile(r);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += 1e-10;
    }
    let l = cholesky_with_jitter(&k).expect("prior covariance").0;
    let mut r = rng::stream(seed, &[rng::role::SAMPLE]);
    let z = DVector::from_iterator(n, (0..n).map(|_| r.sample::<f64, _>(StandardNormal)));
    (l * z).iter().copied().collect()
}
