//! Acquisition-function minimization.
//!
//! All solvers work internally on the unit cube: starting points come from a
//! Latin hypercube, descents use projected Barzilai-Borwein steps with an
//! Armijo backtracking safeguard, and gradients are central differences
//! (step 1e-6 in unit coordinates) unless an analytic gradient is supplied.
//! Level-set constraints are handled with an exact penalty and multiplier
//! escalation.

use std::cell::RefCell;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::domain::{unit_latin_hypercube, BoxDomain};
use crate::error::{ParboError, Result};
use crate::gp::GpModel;

/// Band of a reference surrogate: points whose posterior mean lies in
/// `[alpha_lo, alpha_hi]`.
#[derive(Clone)]
pub struct LevelSetRegion {
    pub surrogate: Arc<GpModel>,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
}

impl LevelSetRegion {
    pub fn new(surrogate: Arc<GpModel>, alpha_lo: f64, alpha_hi: f64) -> Result<Self> {
        if !(alpha_lo <= alpha_hi) {
            return Err(ParboError::InvalidArgument(format!(
                "level-set band requires alpha_lo <= alpha_hi (got {} > {})",
                alpha_lo, alpha_hi
            )));
        }
        Ok(LevelSetRegion {
            surrogate,
            alpha_lo,
            alpha_hi,
        })
    }

    /// Constraint violation of the surrogate posterior mean at `x`; zero
    /// inside the band.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let m = self.surrogate.posterior_mean(x);
        (self.alpha_lo - m).max(m - self.alpha_hi).max(0.0)
    }

    /// Feasibility tolerance: 1e-6 of the band width.
    pub fn tolerance(&self) -> f64 {
        1e-6 * (self.alpha_hi - self.alpha_lo)
    }
}

/// Conventional multistart count for a d-dimensional problem.
pub fn default_starts(dim: usize) -> usize {
    10 * dim
}

const FD_STEP: f64 = 1e-6;
const MAX_ITER: usize = 160;
const ARMIJO_C: f64 = 1e-4;

/// Tracks the best point seen across every objective evaluation, so the
/// returned value can never exceed the value at any evaluated start.
struct BestTracker {
    x: Option<Vec<f64>>,
    value: f64,
}

impl BestTracker {
    fn new() -> Self {
        BestTracker {
            x: None,
            value: f64::INFINITY,
        }
    }

    fn offer(&mut self, x: &[f64], value: f64) {
        if value.is_finite() && value < self.value {
            self.value = value;
            self.x = Some(x.to_vec());
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn clamp_unit(u: &mut [f64]) {
    for v in u.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Boundary-aware central differences on the unit cube.
fn numeric_grad(f: &dyn Fn(&[f64]) -> f64, u: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; u.len()];
    let mut probe = u.to_vec();
    for i in 0..u.len() {
        let up = (u[i] + FD_STEP).min(1.0);
        let um = (u[i] - FD_STEP).max(0.0);
        probe[i] = up;
        let fp = f(&probe);
        probe[i] = um;
        let fm = f(&probe);
        probe[i] = u[i];
        let denom = up - um;
        if fp.is_finite() && fm.is_finite() && denom > 0.0 {
            g[i] = (fp - fm) / denom;
        }
    }
    g
}

fn projected_grad_norm(u: &[f64], g: &[f64]) -> f64 {
    let mut n: f64 = 0.0;
    for i in 0..u.len() {
        let active_low = u[i] <= 0.0 && g[i] > 0.0;
        let active_high = u[i] >= 1.0 && g[i] < 0.0;
        if !(active_low || active_high) {
            n = n.max(g[i].abs());
        }
    }
    n
}

/// Projected-gradient descent from one start. Returns the final iterate and
/// value, or None when the start evaluates non-finite.
fn descend(
    f: &dyn Fn(&[f64]) -> f64,
    grad: Option<&dyn Fn(&[f64]) -> Vec<f64>>,
    u0: Vec<f64>,
    max_iter: usize,
) -> Option<(Vec<f64>, f64)> {
    let eval_grad = |u: &[f64]| match grad {
        Some(gf) => gf(u),
        None => numeric_grad(f, u),
    };

    let mut u = u0;
    clamp_unit(&mut u);
    let mut fu = f(&u);
    if !fu.is_finite() {
        return None;
    }
    let mut g = eval_grad(&u);
    let mut alpha = 0.25;

    for _ in 0..max_iter {
        let mut accepted = false;
        let mut t = alpha;
        for _ in 0..40 {
            let mut u1: Vec<f64> = u.iter().zip(&g).map(|(ui, gi)| ui - t * gi).collect();
            clamp_unit(&mut u1);
            let du: Vec<f64> = u1.iter().zip(&u).map(|(a, b)| a - b).collect();
            let step2 = dot(&du, &du);
            if step2 == 0.0 {
                break;
            }
            let f1 = f(&u1);
            if f1.is_finite() && f1 <= fu + ARMIJO_C * dot(&g, &du) {
                let g1 = eval_grad(&u1);
                let y: Vec<f64> = g1.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&du, &y);
                alpha = if sy > 1e-18 {
                    (step2 / sy).clamp(1e-8, 1e3)
                } else {
                    (t * 4.0).min(1e3)
                };
                u = u1;
                fu = f1;
                g = g1;
                accepted = true;
                break;
            }
            t *= 0.25;
            if t < 1e-18 {
                break;
            }
        }
        if !accepted || projected_grad_norm(&u, &g) < 1e-10 {
            break;
        }
    }
    Some((u, fu))
}

fn run_multistart(
    f: &dyn Fn(&[f64]) -> f64,
    grad: Option<&dyn Fn(&[f64]) -> Vec<f64>>,
    starts: Vec<Vec<f64>>,
    max_iter: usize,
) -> usize {
    let mut finished = 0usize;
    for u0 in starts {
        if descend(f, grad, u0, max_iter).is_some() {
            finished += 1;
        }
    }
    finished
}

/// Single descent from an explicit raw-coordinate start; returns the best
/// point evaluated along the way. Used by the GP hyperparameter fit, which
/// manages its own multistart schedule.
pub(crate) fn descend_single(
    af: &dyn Fn(&[f64]) -> f64,
    grad_raw: Option<&dyn Fn(&[f64]) -> Vec<f64>>,
    domain: &BoxDomain,
    x0: &[f64],
    max_iter: usize,
) -> Option<(Vec<f64>, f64)> {
    let d = domain.dim();
    let tracker = RefCell::new(BestTracker::new());
    let f_unit = |u: &[f64]| {
        let x = domain.from_unit(u);
        let v = af(&x);
        tracker.borrow_mut().offer(&x, v);
        v
    };
    let grad_unit = grad_raw.map(|gf| {
        move |u: &[f64]| -> Vec<f64> {
            let x = domain.from_unit(u);
            let gx = gf(&x);
            (0..d).map(|i| gx[i] * domain.width(i)).collect()
        }
    });
    let u0 = domain.to_unit(x0);
    let res = match &grad_unit {
        Some(g) => descend(&f_unit, Some(g), u0, max_iter),
        None => descend(&f_unit, None, u0, max_iter),
    };
    res?;
    let best = tracker.into_inner();
    best.x.map(|x| (x, best.value))
}

/// Multistart box-constrained minimization with numerical gradients.
///
/// Returns the best point over `starts` Latin-hypercube descents; every
/// evaluation is tracked, so the result is at least as good as any start.
pub fn minimize_box(
    af: &dyn Fn(&[f64]) -> f64,
    domain: &BoxDomain,
    starts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64)> {
    minimize_box_impl(af, None, domain, starts, rng)
}

/// As [`minimize_box`] but with an analytic gradient in raw coordinates.
pub fn minimize_box_grad(
    af: &dyn Fn(&[f64]) -> f64,
    grad_raw: &dyn Fn(&[f64]) -> Vec<f64>,
    domain: &BoxDomain,
    starts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64)> {
    minimize_box_impl(af, Some(grad_raw), domain, starts, rng)
}

fn minimize_box_impl(
    af: &dyn Fn(&[f64]) -> f64,
    grad_raw: Option<&dyn Fn(&[f64]) -> Vec<f64>>,
    domain: &BoxDomain,
    starts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64)> {
    let d = domain.dim();
    let n_starts = if starts == 0 { default_starts(d) } else { starts };
    let tracker = RefCell::new(BestTracker::new());
    let f_unit = |u: &[f64]| {
        let x = domain.from_unit(u);
        let v = af(&x);
        tracker.borrow_mut().offer(&x, v);
        v
    };
    let grad_unit = grad_raw.map(|gf| {
        move |u: &[f64]| -> Vec<f64> {
            let x = domain.from_unit(u);
            let gx = gf(&x);
            (0..d).map(|i| gx[i] * domain.width(i)).collect()
        }
    });
    let start_pts = unit_latin_hypercube(n_starts, d, rng);
    let finished = match &grad_unit {
        Some(g) => run_multistart(&f_unit, Some(g), start_pts, MAX_ITER),
        None => run_multistart(&f_unit, None, start_pts, MAX_ITER),
    };
    let best = tracker.into_inner();
    match best.x {
        Some(x) if finished > 0 => Ok((x, best.value)),
        _ => Err(ParboError::Optimization(
            "objective non-finite at every start".into(),
        )),
    }
}

/// Level-set-constrained minimization: minimize `af` subject to the
/// surrogate posterior mean staying inside the region band.
///
/// Uses an exact penalty `af + rho * violation` with `rho` escalated from
/// 1e3 by factors of 10 until the best descent endpoint is feasible within
/// the band tolerance. Infeasible starts are first repaired by descending
/// the squared violation.
pub fn minimize_levelset(
    af: &dyn Fn(&[f64]) -> f64,
    domain: &BoxDomain,
    region: &LevelSetRegion,
    starts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64)> {
    let d = domain.dim();
    let n_starts = if starts == 0 { default_starts(d) } else { starts };
    let tol = region.tolerance();

    // Feasibility probe on a fixed stream: the probe design is part of the
    // operation's deterministic contract, independent of the caller's rng.
    let mut probe_rng = ChaCha8Rng::seed_from_u64(0x4c45_5653);
    let probes = domain.latin_hypercube(4096, &mut probe_rng);
    let feasible_probes: Vec<&Vec<f64>> = probes
        .iter()
        .filter(|p| region.violation(p) == 0.0)
        .collect();
    if feasible_probes.is_empty() {
        return Err(ParboError::EmptyRegion(format!(
            "no probe of 4096 satisfies {} <= mean <= {}",
            region.alpha_lo, region.alpha_hi
        )));
    }

    // Draw starts exactly as minimize_box would, then repair infeasible ones.
    let raw_starts = unit_latin_hypercube(n_starts, d, rng);
    let mut repaired: Vec<Vec<f64>> = Vec::with_capacity(n_starts);
    for u0 in raw_starts {
        let x0 = domain.from_unit(&u0);
        if region.violation(&x0) > 0.0 {
            let vsq = |u: &[f64]| {
                let x = domain.from_unit(u);
                let v = region.violation(&x);
                v * v
            };
            let fixed = descend(&vsq, None, u0.clone(), 80)
                .filter(|(u, _)| region.violation(&domain.from_unit(u)) <= tol)
                .map(|(u, _)| u);
            match fixed {
                Some(u) => repaired.push(u),
                None => {
                    // fall back to the closest feasible probe
                    let x0 = domain.from_unit(&u0);
                    let nearest = feasible_probes
                        .iter()
                        .enumerate()
                        .min_by(|(ia, a), (ib, b)| {
                            let da = domain.unit_distance(&x0, a);
                            let db = domain.unit_distance(&x0, b);
                            da.partial_cmp(&db).unwrap().then(ia.cmp(ib))
                        })
                        .map(|(_, p)| domain.to_unit(p))
                        .expect("nonempty feasible probe set");
                    repaired.push(nearest);
                }
            }
        } else {
            repaired.push(u0);
        }
    }

    let tracker = RefCell::new(BestTracker::new());
    let mut rho = 1e3;
    for _ in 0..10 {
        let f_pen = |u: &[f64]| {
            let x = domain.from_unit(u);
            let v = af(&x);
            let viol = region.violation(&x);
            if viol <= tol {
                tracker.borrow_mut().offer(&x, v);
            }
            v + rho * viol
        };
        let mut all_endpoints_feasible = true;
        let mut any_finished = false;
        for u0 in repaired.clone() {
            if let Some((u_end, _)) = descend(&f_pen, None, u0, MAX_ITER) {
                any_finished = true;
                let x_end = domain.from_unit(&u_end);
                if region.violation(&x_end) > tol {
                    all_endpoints_feasible = false;
                }
            }
        }
        if !any_finished {
            return Err(ParboError::Optimization(
                "objective non-finite at every start".into(),
            ));
        }
        if all_endpoints_feasible {
            break;
        }
        rho *= 10.0;
    }

    let best = tracker.into_inner();
    match best.x {
        Some(x) => Ok((x, best.value)),
        None => Err(ParboError::EmptyRegion(
            "no feasible point encountered during penalized descent".into(),
        )),
    }
}

/// Embed free-coordinate values and fixed complement values into a full
/// point. `fixed_values` follows the ascending order of the complement
/// indices.
pub fn embed_subspace(dim: usize, free: &[usize], fixed_values: &[f64], x_free: &[f64]) -> Vec<f64> {
    let mut is_free = vec![false; dim];
    for &i in free {
        is_free[i] = true;
    }
    let mut full = vec![0.0; dim];
    let mut fi = 0;
    for i in 0..dim {
        if !is_free[i] {
            full[i] = fixed_values[fi];
            fi += 1;
        }
    }
    for (slot, &i) in free.iter().enumerate() {
        full[i] = x_free[slot];
    }
    full
}

/// Minimize over a coordinate subset with the complement pinned at
/// `fixed_values`. Returns the free-coordinate block of the minimizer.
pub fn minimize_subspace(
    af: &dyn Fn(&[f64]) -> f64,
    domain: &BoxDomain,
    free: &[usize],
    fixed_values: &[f64],
    starts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64)> {
    let d = domain.dim();
    if free.is_empty() {
        return Err(ParboError::InvalidArgument(
            "free coordinate set must be nonempty".into(),
        ));
    }
    let mut seen = vec![false; d];
    for &i in free {
        if i >= d {
            return Err(ParboError::InvalidArgument(format!(
                "free index {} out of range for dimension {}",
                i, d
            )));
        }
        if seen[i] {
            return Err(ParboError::InvalidArgument(format!(
                "duplicate free index {}",
                i
            )));
        }
        seen[i] = true;
    }
    if fixed_values.len() != d - free.len() {
        return Err(ParboError::InvalidArgument(format!(
            "expected {} fixed values, got {}",
            d - free.len(),
            fixed_values.len()
        )));
    }
    let complement: Vec<usize> = (0..d).filter(|i| !seen[*i]).collect();
    for (slot, &i) in complement.iter().enumerate() {
        let v = fixed_values[slot];
        if v < domain.lower()[i] || v > domain.upper()[i] {
            return Err(ParboError::InvalidArgument(format!(
                "fixed value {} for coordinate {} outside domain slice",
                v, i
            )));
        }
    }

    let sub = domain.slice(free)?;
    let af_free = |xf: &[f64]| {
        let full = embed_subspace(d, free, fixed_values, xf);
        af(&full)
    };
    minimize_box(&af_free, &sub, starts, rng)
}
