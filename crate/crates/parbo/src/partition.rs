//! Partition constructions: level-set bands of a reference surrogate,
//! equal overlapping hyperboxes, and variable subsets from ARD importance.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::afopt::{self, LevelSetRegion};
use crate::domain::BoxDomain;
use crate::error::{ParboError, Result};
use crate::gp::GpModel;

/// One of the three partition families. Each constrains the per-subproblem
/// acquisition optimization of a partitioned driver.
#[derive(Clone)]
pub enum PartitionScheme {
    /// Abutting bands `[t_k, t_{k+1}]` of the reference surrogate's
    /// posterior mean; thresholds are nondecreasing.
    LevelSets {
        surrogate: Arc<GpModel>,
        thresholds: Vec<f64>,
    },
    /// Equal base tiling expanded per dimension by the overlap fraction.
    HyperBoxes { boxes: Vec<BoxDomain>, overlap: f64 },
    /// Pairwise-disjoint variable index subsets covering all dimensions.
    Variables { subsets: Vec<Vec<usize>>, dim: usize },
}

impl PartitionScheme {
    pub fn count(&self) -> usize {
        match self {
            PartitionScheme::LevelSets { thresholds, .. } => thresholds.len().saturating_sub(1),
            PartitionScheme::HyperBoxes { boxes, .. } => boxes.len(),
            PartitionScheme::Variables { subsets, .. } => subsets.len(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            PartitionScheme::LevelSets { .. } => "levelset",
            PartitionScheme::HyperBoxes { .. } => "hyperbox",
            PartitionScheme::Variables { .. } => "variable",
        }
    }

    /// Level-set band `k` as a constrained region.
    pub fn levelset_region(&self, k: usize) -> Result<LevelSetRegion> {
        match self {
            PartitionScheme::LevelSets {
                surrogate,
                thresholds,
            } => {
                if k + 1 >= thresholds.len() {
                    return Err(ParboError::InvalidArgument(format!(
                        "band index {} out of range ({} bands)",
                        k,
                        thresholds.len() - 1
                    )));
                }
                LevelSetRegion::new(surrogate.clone(), thresholds[k], thresholds[k + 1])
            }
            _ => Err(ParboError::InvalidArgument(
                "not a level-set partition".into(),
            )),
        }
    }

    /// Index of the band owning `value`; boundary values belong to the band
    /// below. Values outside the threshold range return None.
    pub fn levelset_band_of(&self, value: f64) -> Option<usize> {
        match self {
            PartitionScheme::LevelSets { thresholds, .. } => {
                if value < thresholds[0] || value > *thresholds.last().unwrap() {
                    return None;
                }
                for k in 0..thresholds.len() - 1 {
                    if value <= thresholds[k + 1] {
                        return Some(k);
                    }
                }
                None
            }
            _ => None,
        }
    }
}

/// Uniform level-set partition: the surrogate-mean range is located by
/// Latin-hypercube probing refined with local descent from the extreme
/// probes, then split into `k_count` equal bands.
pub fn levelset_uniform(
    ref_gp: Arc<GpModel>,
    domain: &BoxDomain,
    k_count: usize,
    probe_count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<PartitionScheme> {
    if k_count == 0 {
        return Err(ParboError::InvalidArgument(
            "band count must be at least 1".into(),
        ));
    }
    if probe_count == 0 {
        return Err(ParboError::InvalidArgument(
            "probe count must be at least 1".into(),
        ));
    }
    let probes = domain.latin_hypercube(probe_count, rng);
    let mut lo = (probes[0].clone(), ref_gp.posterior_mean(&probes[0]));
    let mut hi = lo.clone();
    for p in &probes {
        let v = ref_gp.posterior_mean(p);
        if v < lo.1 {
            lo = (p.clone(), v);
        }
        if v > hi.1 {
            hi = (p.clone(), v);
        }
    }
    // refine the extremes by local descent on the posterior mean
    let mean_fn = |x: &[f64]| ref_gp.posterior_mean(x);
    let neg_mean_fn = |x: &[f64]| -ref_gp.posterior_mean(x);
    if let Some((_, v)) = afopt::descend_single(&mean_fn, None, domain, &lo.0, 120) {
        if v < lo.1 {
            lo.1 = v;
        }
    }
    if let Some((_, v)) = afopt::descend_single(&neg_mean_fn, None, domain, &hi.0, 120) {
        if -v > hi.1 {
            hi.1 = -v;
        }
    }
    let (alpha_min, alpha_max) = (lo.1, hi.1);
    if alpha_max - alpha_min < 1e-12 && k_count > 1 {
        return Err(ParboError::DegenerateReference(format!(
            "reference range {} too flat for {} bands",
            alpha_max - alpha_min,
            k_count
        )));
    }
    let delta = (alpha_max - alpha_min) / k_count as f64;
    let thresholds: Vec<f64> = (0..=k_count)
        .map(|k| {
            if k == k_count {
                alpha_max
            } else {
                alpha_min + k as f64 * delta
            }
        })
        .collect();
    Ok(PartitionScheme::LevelSets {
        surrogate: ref_gp,
        thresholds,
    })
}

/// Level-set partition at caller-supplied thresholds (strictly increasing,
/// length K+1).
pub fn levelset_custom(
    ref_gp: Arc<GpModel>,
    thresholds: Vec<f64>,
) -> Result<PartitionScheme> {
    if thresholds.len() < 2 {
        return Err(ParboError::InvalidArgument(
            "need at least two thresholds".into(),
        ));
    }
    for w in thresholds.windows(2) {
        if !(w[0] < w[1]) {
            return Err(ParboError::InvalidArgument(format!(
                "thresholds must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    Ok(PartitionScheme::LevelSets {
        surrogate: ref_gp,
        thresholds,
    })
}

/// Equal hyperbox tiling with `per_dim_splits` blocks per dimension, each
/// expanded toward the domain bounds by the overlap fraction `phi`:
/// `[l - phi (l - x_min), u + phi (x_max - u)]`. `phi = 0` is the base
/// tiling and `phi = 1` makes every box the full domain.
pub fn hyperboxes(domain: &BoxDomain, per_dim_splits: usize, overlap: f64) -> Result<PartitionScheme> {
    if per_dim_splits == 0 {
        return Err(ParboError::InvalidArgument(
            "per-dimension split count must be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&overlap) {
        return Err(ParboError::InvalidArgument(format!(
            "overlap must lie in [0, 1] (got {})",
            overlap
        )));
    }
    let d = domain.dim();
    let k_total = per_dim_splits.pow(d as u32);
    let mut boxes = Vec::with_capacity(k_total);
    let mut idx = vec![0usize; d];
    for _ in 0..k_total {
        let mut lower = Vec::with_capacity(d);
        let mut upper = Vec::with_capacity(d);
        for p in 0..d {
            let x_min = domain.lower()[p];
            let x_max = domain.upper()[p];
            let w = (x_max - x_min) / per_dim_splits as f64;
            let l = x_min + idx[p] as f64 * w;
            let u = if idx[p] + 1 == per_dim_splits {
                x_max
            } else {
                x_min + (idx[p] + 1) as f64 * w
            };
            lower.push(l - overlap * (l - x_min));
            upper.push(u + overlap * (x_max - u));
        }
        boxes.push(BoxDomain::new(lower, upper)?);
        // odometer increment, dimension 0 slowest
        for p in (0..d).rev() {
            idx[p] += 1;
            if idx[p] < per_dim_splits {
                break;
            }
            idx[p] = 0;
        }
    }
    Ok(PartitionScheme::HyperBoxes {
        boxes,
        overlap,
    })
}

/// Assign each design variable to the subsystem where its inverse length
/// scale (importance) is maximal. A variable claimed equally by several
/// subsystems goes to the one with the highest relative importance (its
/// importance over the subsystem's median importance); a full tie falls to
/// the lowest subsystem index and is logged.
pub fn variable_partitions(length_scales: &[Vec<f64>]) -> Result<PartitionScheme> {
    let k_count = length_scales.len();
    if k_count == 0 {
        return Err(ParboError::InvalidArgument("no subsystems".into()));
    }
    let d = length_scales[0].len();
    if d == 0 || length_scales.iter().any(|row| row.len() != d) {
        return Err(ParboError::InvalidArgument(
            "length-scale matrix must be rectangular and nonempty".into(),
        ));
    }
    for row in length_scales {
        if row.iter().any(|l| !(*l > 0.0)) {
            return Err(ParboError::InvalidArgument(
                "all length scales must be positive".into(),
            ));
        }
    }
    let importance: Vec<Vec<f64>> = length_scales
        .iter()
        .map(|row| row.iter().map(|l| 1.0 / l).collect())
        .collect();
    let medians: Vec<f64> = importance.iter().map(|row| median(row)).collect();

    let mut subsets = vec![Vec::new(); k_count];
    for var in 0..d {
        let max_imp = (0..k_count)
            .map(|k| importance[k][var])
            .fold(f64::NEG_INFINITY, f64::max);
        let claimants: Vec<usize> = (0..k_count)
            .filter(|&k| importance[k][var] == max_imp)
            .collect();
        let owner = if claimants.len() == 1 {
            claimants[0]
        } else {
            let best_rel = claimants
                .iter()
                .map(|&k| importance[k][var] / medians[k])
                .fold(f64::NEG_INFINITY, f64::max);
            let finalists: Vec<usize> = claimants
                .iter()
                .copied()
                .filter(|&k| importance[k][var] / medians[k] == best_rel)
                .collect();
            if finalists.len() > 1 {
                eprintln!(
                    "parbo: variable {} importance ties across subsystems {:?}; assigned to {}",
                    var, finalists, finalists[0]
                );
            }
            finalists[0]
        };
        subsets[owner].push(var);
    }
    Ok(PartitionScheme::Variables { subsets, dim: d })
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
