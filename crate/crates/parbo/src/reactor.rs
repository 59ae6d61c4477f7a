//! Two-CSTR benchmark process: serial stirred-tank reactors with a complex
//! reversible reaction network, downstream flash recovery of two products,
//! utility accounting, and an annualized cost objective over the reactor
//! temperatures. A cubic log-rate reference model provides a cheap
//! approximation of the same flowsheet.
//!
//! Species order everywhere: A, P, U, B, E, D.

use nalgebra::{Matrix6, Vector6};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::{ParboError, Result};
use crate::gp::{Dataset, FitOptions, GpModel};

pub const N_SPECIES: usize = 6;
pub const N_REACTIONS: usize = 4;
pub const GAS_CONSTANT: f64 = 8.314;

/// Temperature box of the benchmark problem (kelvin).
pub const T_MIN: f64 = 303.0;
pub const T_MAX: f64 = 423.0;

pub const SPECIES_NAMES: [&str; N_SPECIES] = ["A", "P", "U", "B", "E", "D"];

/// Stoichiometric coefficients, reaction x species.
/// r1: 2A <-> P; r2: P <-> 2U; r3: U + B <-> E; r4: U + D -> 2A.
pub const STOICH: [[f64; N_SPECIES]; N_REACTIONS] = [
    [-2.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, -1.0, 2.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, -1.0, -1.0, 1.0, 0.0],
    [2.0, 0.0, -1.0, 0.0, 0.0, -1.0],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kinetics {
    /// Pre-exponential factors (rate units per reaction order).
    pub k0: [f64; N_REACTIONS],
    /// Activation energies (J/mol).
    pub ea: [f64; N_REACTIONS],
    /// Heats of reaction (J/mol, negative = exothermic).
    pub dh: [f64; N_REACTIONS],
    /// Reverse-rate factor: k_jr = factor * k_j (reaction 4 irreversible).
    pub reverse_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedStream {
    /// Volumetric flow (L/s).
    pub flow: f64,
    /// Feed concentrations (mol/L).
    pub conc: [f64; N_SPECIES],
    /// Feed temperature (K).
    pub temp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermoParams {
    /// Process-fluid density (kg/L).
    pub rho: f64,
    /// Process-fluid heat capacity (J/(kg K)).
    pub cp: f64,
    /// Coolant heat capacity (J/(kg K)).
    pub coolant_cp: f64,
    /// Coolant inlet / outlet temperatures (K).
    pub t_coolant_in: f64,
    pub t_coolant_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlashParams {
    /// Relative volatilities per species.
    pub alpha: [f64; N_SPECIES],
    /// Vapor-liquid equilibrium ratio.
    pub k_p: f64,
    /// Latent molar heats per species (J/mol).
    pub latent: [f64; N_SPECIES],
    /// Latent heat of the steam utility (J/kg).
    pub latent_steam: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Economics {
    /// Species prices (USD/mol); negative values are revenues.
    pub species_price: [f64; N_SPECIES],
    /// Utility prices (USD/kg).
    pub coolant_price: f64,
    pub steam_price: f64,
    /// Annualization factor (operating hours per year).
    pub hours_per_year: f64,
}

/// How the total cost splits into two subsystem contributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubsystemSplit {
    /// Reactor-1-attributable terms (its feeds, its coolant, its outlet
    /// valued at species prices as a transfer stream) versus everything
    /// downstream. Makes f1 a function of T1 only.
    #[default]
    PerReactor,
    /// Product-stream and reagent economics versus utility costs.
    Economics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactorParams {
    pub kinetics: Kinetics,
    /// Reactor volumes (L).
    pub volume1: f64,
    pub volume2: f64,
    /// Fresh feed to reactor 1 (carries A and D).
    pub feed1: FeedStream,
    /// Makeup stream joining the reactor-2 inlet (carries B).
    pub feed_b: FeedStream,
    pub thermo: ThermoParams,
    pub flash: FlashParams,
    pub econ: Economics,
    #[serde(default)]
    pub split: SubsystemSplit,
}

impl ReactorParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| -> Result<()> {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ParboError::InvalidArgument(format!(
                    "{} must be positive (got {})",
                    what, v
                )));
            }
            Ok(())
        };
        for j in 0..N_REACTIONS {
            pos(self.kinetics.k0[j], &format!("k0[{}]", j))?;
            pos(self.kinetics.ea[j], &format!("ea[{}]", j))?;
        }
        if self.kinetics.reverse_factor != 0.01 {
            return Err(ParboError::InvalidArgument(format!(
                "reverse-rate factor must be exactly 0.01 (got {})",
                self.kinetics.reverse_factor
            )));
        }
        pos(self.volume1, "volume1")?;
        pos(self.volume2, "volume2")?;
        pos(self.feed1.flow, "feed1.flow")?;
        pos(self.feed_b.flow, "feed_b.flow")?;
        pos(self.feed1.temp, "feed1.temp")?;
        pos(self.feed_b.temp, "feed_b.temp")?;
        pos(self.thermo.rho, "rho")?;
        pos(self.thermo.cp, "cp")?;
        pos(self.thermo.coolant_cp, "coolant_cp")?;
        if !(self.thermo.t_coolant_out > self.thermo.t_coolant_in) {
            return Err(ParboError::InvalidArgument(
                "coolant outlet temperature must exceed the inlet".into(),
            ));
        }
        for i in 0..N_SPECIES {
            pos(self.flash.alpha[i], &format!("alpha[{}]", i))?;
            pos(self.flash.latent[i], &format!("latent[{}]", i))?;
            if self.feed1.conc[i] < 0.0 || self.feed_b.conc[i] < 0.0 {
                return Err(ParboError::InvalidArgument(
                    "feed concentrations must be nonnegative".into(),
                ));
            }
        }
        pos(self.flash.k_p, "k_p")?;
        pos(self.flash.latent_steam, "latent_steam")?;
        pos(self.econ.hours_per_year, "hours_per_year")?;
        Ok(())
    }

    pub fn domain(&self) -> BoxDomain {
        BoxDomain::new(vec![T_MIN, T_MIN], vec![T_MAX, T_MAX]).expect("temperature box")
    }
}

/// Arrhenius rate constant `k0 exp(-ea / (R T))`.
pub fn arrhenius(k0: f64, ea: f64, t: f64) -> f64 {
    k0 * (-ea / (GAS_CONSTANT * t)).exp()
}

fn rate_constants(kin: &Kinetics, t: f64) -> [f64; N_REACTIONS] {
    let mut k = [0.0; N_REACTIONS];
    for j in 0..N_REACTIONS {
        k[j] = arrhenius(kin.k0[j], kin.ea[j], t);
    }
    k
}

/// Elementary net rates at concentrations `c` and temperature `t`.
/// Reverse rates use k_jr = reverse_factor * k_j; reaction 4 is irreversible.
pub fn reaction_rates(kin: &Kinetics, c: &[f64; N_SPECIES], t: f64) -> [f64; N_REACTIONS] {
    let k = rate_constants(kin, t);
    let rf = kin.reverse_factor;
    [
        k[0] * c[0] * c[0] - rf * k[0] * c[1],
        k[1] * c[1] - rf * k[1] * c[2] * c[2],
        k[2] * c[2] * c[3] - rf * k[2] * c[4],
        k[3] * c[2] * c[5],
    ]
}

/// Forward rate components only (reference-model sampling ignores the
/// comparatively small reverse terms).
pub fn forward_rates(kin: &Kinetics, c: &[f64; N_SPECIES], t: f64) -> [f64; N_REACTIONS] {
    let k = rate_constants(kin, t);
    [
        k[0] * c[0] * c[0],
        k[1] * c[1],
        k[2] * c[2] * c[3],
        k[3] * c[2] * c[5],
    ]
}

fn rate_jacobian(kin: &Kinetics, c: &[f64; N_SPECIES], t: f64) -> [[f64; N_SPECIES]; N_REACTIONS] {
    let k = rate_constants(kin, t);
    let rf = kin.reverse_factor;
    let mut dr = [[0.0; N_SPECIES]; N_REACTIONS];
    dr[0][0] = 2.0 * k[0] * c[0];
    dr[0][1] = -rf * k[0];
    dr[1][1] = k[1];
    dr[1][2] = -2.0 * rf * k[1] * c[2];
    dr[2][2] = k[2] * c[3];
    dr[2][3] = k[2] * c[2];
    dr[2][4] = -rf * k[2];
    dr[3][2] = k[3] * c[5];
    dr[3][5] = k[3] * c[2];
    dr
}

/// Steady-state mass-balance residual in concentration units:
/// `c_in - c + nu(r(c)) V/F` per species.
pub fn mass_balance_residual(
    kin: &Kinetics,
    inlet: &[f64; N_SPECIES],
    flow: f64,
    volume: f64,
    t: f64,
    c: &[f64; N_SPECIES],
) -> [f64; N_SPECIES] {
    let tau = volume / flow;
    let r = reaction_rates(kin, c, t);
    let mut res = [0.0; N_SPECIES];
    for i in 0..N_SPECIES {
        let mut gen = 0.0;
        for j in 0..N_REACTIONS {
            gen += STOICH[j][i] * r[j];
        }
        res[i] = inlet[i] - c[i] + gen * tau;
    }
    res
}

fn residual_norm(res: &[f64; N_SPECIES]) -> f64 {
    res.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

#[derive(Debug, Clone)]
pub struct CstrSolution {
    pub conc: [f64; N_SPECIES],
    pub rates: [f64; N_REACTIONS],
    /// Reaction heat release (W).
    pub heat_duty: f64,
    /// Coolant mass flow required to hold the temperature (kg/s).
    pub coolant_flow: f64,
    pub residual: f64,
}

const NEWTON_TOL: f64 = 1e-12;

/// Solve the six coupled steady-state balances at fixed temperature with a
/// damped Newton iteration (analytic Jacobian) and a damped fixed-point
/// fallback.
pub fn solve_cstr(
    kin: &Kinetics,
    thermo: &ThermoParams,
    inlet: &[f64; N_SPECIES],
    flow: f64,
    t_in: f64,
    volume: f64,
    t: f64,
) -> Result<CstrSolution> {
    if !(T_MIN..=T_MAX).contains(&t) {
        return Err(ParboError::InvalidArgument(format!(
            "reactor temperature {} outside [{}, {}]",
            t, T_MIN, T_MAX
        )));
    }
    if inlet.iter().any(|c| *c < 0.0) {
        return Err(ParboError::InvalidArgument(
            "inlet concentrations must be nonnegative".into(),
        ));
    }

    let mut c = *inlet;
    let mut converged = newton_solve(kin, inlet, flow, volume, t, &mut c);
    if !converged || c.iter().any(|v| *v < -1e-9) {
        // Newton failed or landed on a nonphysical root: walk into the
        // physical basin with the projected fixed point, then polish
        c = *inlet;
        fixed_point_solve(kin, inlet, flow, volume, t, &mut c, 1e-6, 50_000);
        converged = newton_solve(kin, inlet, flow, volume, t, &mut c);
    }
    if !converged || c.iter().any(|v| *v < -1e-9) {
        // rate-loading homotopy: ramp the kinetics up from a trivially
        // solvable load, warm-starting Newton at each step
        c = *inlet;
        converged = true;
        for step in 1..=20 {
            let lambda = (step as f64 / 20.0).powi(2);
            let mut scaled = kin.clone();
            for j in 0..N_REACTIONS {
                scaled.k0[j] = kin.k0[j] * lambda;
            }
            let mut attempt = c;
            if newton_solve(&scaled, inlet, flow, volume, t, &mut attempt)
                && attempt.iter().all(|v| *v > -1e-9)
            {
                c = attempt;
            } else {
                let mut relaxed = c;
                if fixed_point_solve(&scaled, inlet, flow, volume, t, &mut relaxed, NEWTON_TOL, 200_000)
                {
                    c = relaxed;
                } else {
                    converged = false;
                    break;
                }
            }
        }
    }
    if !converged || c.iter().any(|v| *v < -1e-9) {
        c = *inlet;
        converged = fixed_point_solve(kin, inlet, flow, volume, t, &mut c, NEWTON_TOL, 500_000);
    }
    let res = mass_balance_residual(kin, inlet, flow, volume, t, &c);
    let rn = residual_norm(&res);
    if !converged || !rn.is_finite() || rn > NEWTON_TOL * 10.0 {
        return Err(ParboError::Numerical(format!(
            "CSTR solve did not converge at T = {} (residual {:e})",
            t, rn
        )));
    }
    for i in 0..N_SPECIES {
        if c[i] < -1e-9 {
            return Err(ParboError::Infeasible(format!(
                "negative steady-state concentration C_{} = {:e} at T = {}",
                SPECIES_NAMES[i], c[i], t
            )));
        }
        if c[i] < 0.0 {
            c[i] = 0.0;
        }
    }

    let rates = reaction_rates(kin, &c, t);
    let mut heat = 0.0;
    for j in 0..N_REACTIONS {
        heat -= rates[j] * volume * kin.dh[j];
    }
    let coolant = (thermo.rho * thermo.cp * flow * (t_in - t) + heat)
        / (thermo.coolant_cp * (thermo.t_coolant_out - thermo.t_coolant_in));
    Ok(CstrSolution {
        conc: c,
        rates,
        heat_duty: heat,
        coolant_flow: coolant,
        residual: rn,
    })
}

fn newton_solve(
    kin: &Kinetics,
    inlet: &[f64; N_SPECIES],
    flow: f64,
    volume: f64,
    t: f64,
    c: &mut [f64; N_SPECIES],
) -> bool {
    let tau = volume / flow;
    for _ in 0..100 {
        let res = mass_balance_residual(kin, inlet, flow, volume, t, c);
        let rn = residual_norm(&res);
        if rn < NEWTON_TOL {
            return true;
        }
        let dr = rate_jacobian(kin, c, t);
        let mut jac = Matrix6::<f64>::zeros();
        for i in 0..N_SPECIES {
            for l in 0..N_SPECIES {
                let mut v = if i == l { -1.0 } else { 0.0 };
                for j in 0..N_REACTIONS {
                    v += tau * STOICH[j][i] * dr[j][l];
                }
                jac[(i, l)] = v;
            }
        }
        let rhs = -Vector6::from_row_slice(&res);
        let step = match jac.lu().solve(&rhs) {
            Some(s) => s,
            None => return false,
        };
        // backtracking on the residual norm
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut cand = *c;
            for i in 0..N_SPECIES {
                cand[i] += lambda * step[i];
            }
            let r2 = mass_balance_residual(kin, inlet, flow, volume, t, &cand);
            if residual_norm(&r2) < (1.0 - 1e-4 * lambda) * rn {
                *c = cand;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return false;
        }
    }
    let res = mass_balance_residual(kin, inlet, flow, volume, t, c);
    residual_norm(&res) < NEWTON_TOL
}

/// Safeguarded damped fixed point on `c <- c + omega * residual(c)`.
/// Steps that raise the residual are reverted with a smaller damping; the
/// iterate stays projected into a generous physical box.
fn fixed_point_solve(
    kin: &Kinetics,
    inlet: &[f64; N_SPECIES],
    flow: f64,
    volume: f64,
    t: f64,
    c: &mut [f64; N_SPECIES],
    tol: f64,
    max_iter: usize,
) -> bool {
    let c_cap = 10.0 * (1.0 + inlet.iter().sum::<f64>());
    let mut omega: f64 = 0.05;
    let mut rn = residual_norm(&mass_balance_residual(kin, inlet, flow, volume, t, c));
    for _ in 0..max_iter {
        if rn < tol {
            return true;
        }
        let res = mass_balance_residual(kin, inlet, flow, volume, t, c);
        let mut cand = *c;
        for i in 0..N_SPECIES {
            cand[i] = (cand[i] + omega * res[i]).clamp(0.0, c_cap);
        }
        let rn_c = residual_norm(&mass_balance_residual(kin, inlet, flow, volume, t, &cand));
        if rn_c.is_finite() && rn_c < rn {
            *c = cand;
            rn = rn_c;
            omega = (omega * 1.1).min(1.0);
        } else {
            omega *= 0.5;
            if omega < 1e-12 {
                return false;
            }
        }
    }
    rn < tol
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlashMode {
    /// Vapor fraction set to the feed molar fraction of E.
    RecoverE,
    /// Vapor fraction set to one minus the feed molar fraction of P.
    RecoverP,
}

#[derive(Debug, Clone)]
pub struct FlashResult {
    /// Vaporized molar fraction of the feed.
    pub f: f64,
    /// Liquid / vapor compositions (not renormalized).
    pub x: [f64; N_SPECIES],
    pub y: [f64; N_SPECIES],
    /// Molar flows (mol/s).
    pub vapor_flow: f64,
    pub liquid_flow: f64,
    /// Vaporization duty (W) and steam demand (kg/s).
    pub q_vap: f64,
    pub steam_flow: f64,
}

/// Single-stage vapor-liquid split at fixed vaporized fraction.
pub fn flash(
    fp: &FlashParams,
    z: &[f64; N_SPECIES],
    feed_molar_flow: f64,
    mode: FlashMode,
) -> Result<FlashResult> {
    let total: f64 = z.iter().sum();
    if z.iter().any(|v| *v < 0.0) || (total - 1.0).abs() > 1e-8 {
        return Err(ParboError::InvalidArgument(format!(
            "flash feed composition must be a distribution (sum {})",
            total
        )));
    }
    let f = match mode {
        FlashMode::RecoverE => z[4],
        FlashMode::RecoverP => 1.0 - z[1],
    };
    let mut x = [0.0; N_SPECIES];
    let mut y = [0.0; N_SPECIES];
    for i in 0..N_SPECIES {
        let den = f * (fp.k_p * fp.alpha[i] - 1.0) + 1.0;
        if den <= 0.0 {
            return Err(ParboError::InvalidArgument(format!(
                "flash denominator nonpositive for species {} (volatility {})",
                SPECIES_NAMES[i], fp.alpha[i]
            )));
        }
        x[i] = z[i] / den;
        y[i] = fp.k_p * fp.alpha[i] * x[i];
    }
    let vapor_flow = f * feed_molar_flow;
    let liquid_flow = (1.0 - f) * feed_molar_flow;
    let mut q_vap = 0.0;
    for i in 0..N_SPECIES {
        q_vap += fp.latent[i] * y[i] * vapor_flow;
    }
    let steam_flow = q_vap / fp.latent_steam;
    Ok(FlashResult {
        f,
        x,
        y,
        vapor_flow,
        liquid_flow,
        q_vap,
        steam_flow,
    })
}

#[derive(Debug, Clone)]
pub struct Performance {
    /// Annualized cost (USD/yr), `total = f1 + f2`.
    pub total: f64,
    pub f1: f64,
    pub f2: f64,
    pub reactor1: CstrSolution,
    pub reactor2: CstrSolution,
    pub flash1: FlashResult,
    pub flash2: FlashResult,
}

struct FlowsheetState {
    sol1: CstrSolution,
    sol2: CstrSolution,
    fl1: FlashResult,
    fl2: FlashResult,
}

fn mix_reactor2_inlet(
    params: &ReactorParams,
    conc1: &[f64; N_SPECIES],
    t1: f64,
) -> ([f64; N_SPECIES], f64, f64) {
    let f1 = params.feed1.flow;
    let fb = params.feed_b.flow;
    let flow2 = f1 + fb;
    let mut mixed = [0.0; N_SPECIES];
    for i in 0..N_SPECIES {
        mixed[i] = (f1 * conc1[i] + fb * params.feed_b.conc[i]) / flow2;
    }
    let t_in2 = (f1 * t1 + fb * params.feed_b.temp) / flow2;
    (mixed, flow2, t_in2)
}

fn downstream(
    params: &ReactorParams,
    conc2: &[f64; N_SPECIES],
    flow2: f64,
) -> Result<(FlashResult, FlashResult)> {
    let total: f64 = conc2.iter().sum();
    if total <= 0.0 {
        return Err(ParboError::Infeasible(
            "reactor-2 effluent carries no material".into(),
        ));
    }
    let mut z = [0.0; N_SPECIES];
    for i in 0..N_SPECIES {
        z[i] = conc2[i] / total;
    }
    let molar_flow = flow2 * total;
    let fl1 = flash(&params.flash, &z, molar_flow, FlashMode::RecoverE)?;
    // flash-2 feed: flash-1 liquid; its composition re-expressed as a
    // distribution with species flows conserved
    let mut z2 = fl1.x;
    let liquid_total: f64 = z2.iter().sum();
    if liquid_total <= 0.0 {
        return Err(ParboError::Infeasible("flash-1 liquid stream empty".into()));
    }
    for v in z2.iter_mut() {
        *v /= liquid_total;
    }
    let fl2 = flash(
        &params.flash,
        &z2,
        fl1.liquid_flow * liquid_total,
        FlashMode::RecoverP,
    )?;
    Ok((fl1, fl2))
}

/// Nonnegative billing of a utility demand: a reactor whose energy balance
/// admits negative coolant flow draws none. The exact model bills the hard
/// positive part; the reference chain smooths the saturation (softplus,
/// 0.5 kg/s width) so the coarse surface stays differentiable for the GP
/// approximation.
fn billed_demand(flow: f64, smooth: bool) -> f64 {
    if !smooth {
        return flow.max(0.0);
    }
    const WIDTH: f64 = 0.5;
    let x = flow / WIDTH;
    if x > 30.0 {
        flow
    } else if x < -30.0 {
        0.0
    } else {
        WIDTH * (1.0 + x.exp()).ln()
    }
}

fn split_costs(params: &ReactorParams, state: &FlowsheetState, smooth_billing: bool) -> (f64, f64) {
    let w = &params.econ.species_price;
    let f1v = params.feed1.flow;
    let fbv = params.feed_b.flow;

    let mut prod1 = 0.0;
    let mut prod2 = 0.0;
    let mut transfer = 0.0;
    for i in 0..N_SPECIES {
        prod1 += w[i] * state.fl1.y[i] * state.fl1.vapor_flow;
        prod2 += w[i] * state.fl2.x[i] * state.fl2.liquid_flow;
        transfer += w[i] * f1v * state.sol1.conc[i];
    }
    let feed_ad = w[0] * f1v * params.feed1.conc[0] + w[5] * f1v * params.feed1.conc[5];
    let feed_b = w[3] * fbv * params.feed_b.conc[3] + w[5] * fbv * params.feed_b.conc[5];
    // utilities are billed at nonnegative demand: a reactor whose energy
    // balance would admit negative coolant flow draws (essentially) none;
    // the saturation is smoothed so the cost surface stays differentiable
    let coolant1 = params.econ.coolant_price * billed_demand(state.sol1.coolant_flow, smooth_billing);
    let coolant2 = params.econ.coolant_price * billed_demand(state.sol2.coolant_flow, smooth_billing);
    let steam = params.econ.steam_price * (state.fl1.steam_flow + state.fl2.steam_flow);

    let scale = 3600.0 * params.econ.hours_per_year;
    match params.split {
        SubsystemSplit::PerReactor => {
            let f1 = (feed_ad + coolant1 + transfer) * scale;
            let f2 = (prod1 + prod2 + feed_b + coolant2 + steam - transfer) * scale;
            (f1, f2)
        }
        SubsystemSplit::Economics => {
            let f1 = (prod1 + prod2 + feed_ad + feed_b) * scale;
            let f2 = (coolant1 + coolant2 + steam) * scale;
            (f1, f2)
        }
    }
}

/// Full flowsheet evaluation: reactor 1 at `t1`, mixed reactor 2 at `t2`,
/// two flash vessels, annualized economics. The subsystem decomposition
/// follows the configured split.
pub fn performance(params: &ReactorParams, t1: f64, t2: f64) -> Result<Performance> {
    let sol1 = solve_cstr(
        &params.kinetics,
        &params.thermo,
        &params.feed1.conc,
        params.feed1.flow,
        params.feed1.temp,
        params.volume1,
        t1,
    )?;
    let (mixed, flow2, t_in2) = mix_reactor2_inlet(params, &sol1.conc, t1);
    let sol2 = solve_cstr(
        &params.kinetics,
        &params.thermo,
        &mixed,
        flow2,
        t_in2,
        params.volume2,
        t2,
    )?;
    let (fl1, fl2) = downstream(params, &sol2.conc, flow2)?;
    let state = FlowsheetState {
        sol1,
        sol2,
        fl1,
        fl2,
    };
    let (f1, f2) = split_costs(params, &state, false);
    Ok(Performance {
        total: f1 + f2,
        f1,
        f2,
        reactor1: state.sol1,
        reactor2: state.sol2,
        flash1: state.fl1,
        flash2: state.fl2,
    })
}

// ---------------------------------------------------------------------------
// Reference model: cubic polynomial in 1/T for each log forward rate, with
// closed-form concentration balances (no nonlinear solve).
// ---------------------------------------------------------------------------

/// Per-reaction cubic coefficients of `log r` against powers of `1/T`
/// (`theta[0] + theta[1]/T + theta[2]/T^2 + theta[3]/T^3`). `None` encodes a
/// zero-rate reaction.
pub type RatePoly = Option<[f64; 4]>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceModel {
    /// `theta[reactor][reaction]`.
    pub theta: [[RatePoly; N_REACTIONS]; 2],
    /// Nominal temperature the opposite reactor was held at while sampling.
    pub nominal: f64,
}

impl ReferenceModel {
    /// Sentinel model with every rate identically zero.
    pub fn zero_rates() -> Self {
        ReferenceModel {
            theta: [[None; N_REACTIONS]; 2],
            nominal: 0.5 * (T_MIN + T_MAX),
        }
    }

    pub fn rates(&self, reactor: usize, t: f64) -> [f64; N_REACTIONS] {
        let mut r = [0.0; N_REACTIONS];
        for j in 0..N_REACTIONS {
            if let Some(th) = self.theta[reactor][j] {
                let it = 1.0 / t;
                r[j] = (th[0] + th[1] * it + th[2] * it * it + th[3] * it * it * it).exp();
            }
        }
        r
    }
}

/// Fit the cubic log-rate polynomials from exact-model solves at the sample
/// temperatures. Reactor-1 samples vary T1; reactor-2 samples vary T2 with
/// the reactor-1 chain held at the given nominal temperature (typically the
/// intended operating region of reactor 1).
pub fn reference_fit_at(
    params: &ReactorParams,
    temps: &[f64],
    nominal_t1: f64,
) -> Result<ReferenceModel> {
    let mut distinct = temps.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 8 {
        return Err(ParboError::InvalidArgument(format!(
            "need at least 8 distinct sample temperatures (got {})",
            distinct.len()
        )));
    }
    let span = distinct.last().unwrap() - distinct.first().unwrap();
    if span < 0.8 * (T_MAX - T_MIN) {
        return Err(ParboError::InvalidArgument(format!(
            "sample temperatures must span the domain (span {})",
            span
        )));
    }
    if !(T_MIN..=T_MAX).contains(&nominal_t1) {
        return Err(ParboError::InvalidArgument(format!(
            "nominal temperature {} outside the domain",
            nominal_t1
        )));
    }
    let nominal = nominal_t1;

    // reactor-1 nominal solution feeds the reactor-2 sampling chain
    let sol1_nom = solve_cstr(
        &params.kinetics,
        &params.thermo,
        &params.feed1.conc,
        params.feed1.flow,
        params.feed1.temp,
        params.volume1,
        nominal,
    )?;
    let (mixed_nom, flow2, _) = mix_reactor2_inlet(params, &sol1_nom.conc, nominal);

    let mut samples: [[Vec<(f64, f64)>; N_REACTIONS]; 2] = Default::default();
    let mut max_rate = [[0.0_f64; N_REACTIONS]; 2];
    for &t in &distinct {
        let s1 = solve_cstr(
            &params.kinetics,
            &params.thermo,
            &params.feed1.conc,
            params.feed1.flow,
            params.feed1.temp,
            params.volume1,
            t,
        )?;
        let fr1 = forward_rates(&params.kinetics, &s1.conc, t);
        let s2 = solve_cstr(
            &params.kinetics,
            &params.thermo,
            &mixed_nom,
            flow2,
            params.feed_b.temp,
            params.volume2,
            t,
        )?;
        let fr2 = forward_rates(&params.kinetics, &s2.conc, t);
        for (reactor, fr) in [(0usize, fr1), (1, fr2)] {
            for j in 0..N_REACTIONS {
                max_rate[reactor][j] = max_rate[reactor][j].max(fr[j]);
                if fr[j] > 0.0 {
                    samples[reactor][j].push((t, fr[j].ln()));
                } else {
                    eprintln!(
                        "parbo: dropping nonpositive reactor-{} rate sample r{} at T = {}",
                        reactor + 1,
                        j + 1,
                        t
                    );
                }
            }
        }
    }

    let mut theta: [[RatePoly; N_REACTIONS]; 2] = [[None; N_REACTIONS]; 2];
    for reactor in 0..2 {
        for j in 0..N_REACTIONS {
            let pts = &samples[reactor][j];
            if pts.is_empty() {
                // a reaction whose rate is identically zero (a reactant is
                // structurally absent in this reactor) keeps the zero-rate
                // sentinel; a reaction that fired somewhere but lost every
                // sample is a fit error
                if max_rate[reactor][j] == 0.0 {
                    eprintln!(
                        "parbo: reactor-{} reaction r{} is inactive at every sample; using zero rate",
                        reactor + 1,
                        j + 1
                    );
                    continue;
                }
                return Err(ParboError::Numerical(format!(
                    "all rate samples dropped for reactor {} reaction {}",
                    reactor + 1,
                    j + 1
                )));
            }
            theta[reactor][j] = Some(fit_cubic_log_rate(pts)?);
        }
    }
    Ok(ReferenceModel { theta, nominal })
}

/// [`reference_fit_at`] anchored at the domain midpoint.
pub fn reference_fit(params: &ReactorParams, temps: &[f64]) -> Result<ReferenceModel> {
    reference_fit_at(params, temps, 0.5 * (T_MIN + T_MAX))
}

/// Least squares of `log r` on `{1, 1/T, (1/T)^2, (1/T)^3}`. Columns are
/// scaled (s = 1000/T) for conditioning; coefficients are reported against
/// the unscaled powers.
fn fit_cubic_log_rate(points: &[(f64, f64)]) -> Result<[f64; 4]> {
    if points.len() < 4 {
        return Err(ParboError::Numerical(format!(
            "need at least 4 rate samples for a cubic fit (got {})",
            points.len()
        )));
    }
    let n = points.len();
    let mut a = nalgebra::DMatrix::zeros(n, 4);
    let mut b = nalgebra::DVector::zeros(n);
    for (row, (t, logr)) in points.iter().enumerate() {
        let s = 1000.0 / t;
        a[(row, 0)] = 1.0;
        a[(row, 1)] = s;
        a[(row, 2)] = s * s;
        a[(row, 3)] = s * s * s;
        b[row] = *logr;
    }
    let svd = a.svd(true, true);
    let sol = svd
        .solve(&b, 1e-14)
        .map_err(|e| ParboError::Numerical(format!("cubic fit failed: {}", e)))?;
    Ok([
        sol[0],
        sol[1] * 1e3,
        sol[2] * 1e6,
        sol[3] * 1e9,
    ])
}

/// Coefficient of determination of a fitted reference model against the
/// exact forward-rate samples it was built from.
pub fn reference_fit_r2(params: &ReactorParams, model: &ReferenceModel, temps: &[f64]) -> Result<f64> {
    let nominal = model.nominal;
    let sol1_nom = solve_cstr(
        &params.kinetics,
        &params.thermo,
        &params.feed1.conc,
        params.feed1.flow,
        params.feed1.temp,
        params.volume1,
        nominal,
    )?;
    let (mixed_nom, flow2, _) = mix_reactor2_inlet(params, &sol1_nom.conc, nominal);
    let mut observed = Vec::new();
    let mut predicted = Vec::new();
    for &t in temps {
        let s1 = solve_cstr(
            &params.kinetics,
            &params.thermo,
            &params.feed1.conc,
            params.feed1.flow,
            params.feed1.temp,
            params.volume1,
            t,
        )?;
        let fr1 = forward_rates(&params.kinetics, &s1.conc, t);
        let s2 = solve_cstr(
            &params.kinetics,
            &params.thermo,
            &mixed_nom,
            flow2,
            params.feed_b.temp,
            params.volume2,
            t,
        )?;
        let fr2 = forward_rates(&params.kinetics, &s2.conc, t);
        let r1 = model.rates(0, t);
        let r2 = model.rates(1, t);
        for j in 0..N_REACTIONS {
            if fr1[j] > 0.0 && r1[j] > 0.0 {
                observed.push(fr1[j].ln());
                predicted.push(r1[j].ln());
            }
            if fr2[j] > 0.0 && r2[j] > 0.0 {
                observed.push(fr2[j].ln());
                predicted.push(r2[j].ln());
            }
        }
    }
    let n = observed.len() as f64;
    let mean = observed.iter().sum::<f64>() / n;
    let ss_tot: f64 = observed.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = observed
        .iter()
        .zip(&predicted)
        .map(|(o, p)| (o - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot.max(1e-300))
}

/// Closed-form reference concentrations: inlet plus stoichiometric
/// generation at temperature-only rates.
///
/// The temperature-only rates know nothing about reactant availability, so
/// the whole rate vector is scaled down jointly until no concentration goes
/// negative. Scaling (rather than clamping species independently) keeps the
/// outputs stoichiometrically consistent: an exhausted reactant cannot keep
/// generating products.
pub fn reference_concentrations(
    model: &ReferenceModel,
    reactor: usize,
    inlet: &[f64; N_SPECIES],
    flow: f64,
    volume: f64,
    t: f64,
) -> [f64; N_SPECIES] {
    reference_stage(model, reactor, inlet, flow, volume, t).0
}

/// Smooth minimum of two positive numbers (p-norm underestimate).
fn smooth_min(a: f64, b: f64) -> f64 {
    const P: f64 = 3.0;
    (a.powf(-P) + b.powf(-P)).powf(-1.0 / P)
}

/// Closed-form stage evaluation returning concentrations and the
/// load-throttled effective rates (used for the energy balance).
///
/// Temperature-only rates know nothing about reactant availability, so each
/// reaction is throttled smoothly against the budget of the species it
/// consumes (feed plus gross intra-stage production), followed by a joint
/// safety scale so no concentration goes negative. Smooth minima keep the
/// reference surface differentiable for the GP approximation.
pub fn reference_stage(
    model: &ReferenceModel,
    reactor: usize,
    inlet: &[f64; N_SPECIES],
    flow: f64,
    volume: f64,
    t: f64,
) -> ([f64; N_SPECIES], [f64; N_REACTIONS]) {
    let r_raw = model.rates(reactor, t);
    let tau = volume / flow;

    // availability per species: feed plus gross (unthrottled) production
    let mut avail = *inlet;
    let mut consumption = [0.0; N_SPECIES];
    for j in 0..N_REACTIONS {
        for i in 0..N_SPECIES {
            let flux = STOICH[j][i] * r_raw[j] * tau;
            if flux > 0.0 {
                avail[i] += flux;
            } else {
                consumption[i] -= flux;
            }
        }
    }
    let mut species_scale = [1.0_f64; N_SPECIES];
    for i in 0..N_SPECIES {
        if consumption[i] > 0.0 {
            species_scale[i] = smooth_min(1.0, avail[i] / consumption[i]);
        }
    }
    let mut r_eff = r_raw;
    for j in 0..N_REACTIONS {
        for i in 0..N_SPECIES {
            if STOICH[j][i] * r_raw[j] < 0.0 {
                r_eff[j] = r_eff[j].min(r_raw[j] * species_scale[i]);
            }
        }
    }

    let mut gen = [0.0; N_SPECIES];
    for i in 0..N_SPECIES {
        for j in 0..N_REACTIONS {
            gen[i] += STOICH[j][i] * r_eff[j] * tau;
        }
    }
    let mut lambda = 1.0_f64;
    for i in 0..N_SPECIES {
        if gen[i] < 0.0 && inlet[i] < -gen[i] {
            lambda = smooth_min(lambda, inlet[i] / (-gen[i]));
        }
    }
    let mut c = [0.0; N_SPECIES];
    for i in 0..N_SPECIES {
        c[i] = (inlet[i] + lambda * gen[i]).max(0.0);
    }
    let mut scaled = [0.0; N_REACTIONS];
    for j in 0..N_REACTIONS {
        scaled[j] = lambda * r_eff[j];
    }
    (c, scaled)
}

/// Reference flowsheet evaluation: the exact model's chain with closed-form
/// concentration balances in both reactors (no nonlinear solve).
pub fn reference_performance(
    params: &ReactorParams,
    model: &ReferenceModel,
    t1: f64,
    t2: f64,
) -> Result<Performance> {
    if !(T_MIN..=T_MAX).contains(&t1) || !(T_MIN..=T_MAX).contains(&t2) {
        return Err(ParboError::InvalidArgument(format!(
            "temperatures ({}, {}) outside the domain",
            t1, t2
        )));
    }
    let (c1, r1) = reference_stage(
        model,
        0,
        &params.feed1.conc,
        params.feed1.flow,
        params.volume1,
        t1,
    );
    let sol1 = pseudo_solution(
        params,
        &c1,
        &r1,
        params.feed1.flow,
        params.feed1.temp,
        params.volume1,
        t1,
    );
    let (mixed, flow2, t_in2) = mix_reactor2_inlet(params, &sol1.conc, t1);
    let (c2, r2) = reference_stage(model, 1, &mixed, flow2, params.volume2, t2);
    let sol2 = pseudo_solution(params, &c2, &r2, flow2, t_in2, params.volume2, t2);
    let (fl1, fl2) = downstream(params, &sol2.conc, flow2)?;
    let state = FlowsheetState {
        sol1,
        sol2,
        fl1,
        fl2,
    };
    let (f1, f2) = split_costs(params, &state, true);
    Ok(Performance {
        total: f1 + f2,
        f1,
        f2,
        reactor1: state.sol1,
        reactor2: state.sol2,
        flash1: state.fl1,
        flash2: state.fl2,
    })
}

fn pseudo_solution(
    params: &ReactorParams,
    conc: &[f64; N_SPECIES],
    rates: &[f64; N_REACTIONS],
    flow: f64,
    t_in: f64,
    volume: f64,
    t: f64,
) -> CstrSolution {
    let mut heat = 0.0;
    for j in 0..N_REACTIONS {
        heat -= rates[j] * volume * params.kinetics.dh[j];
    }
    let th = &params.thermo;
    let coolant = (th.rho * th.cp * flow * (t_in - t) + heat)
        / (th.coolant_cp * (th.t_coolant_out - th.t_coolant_in));
    CstrSolution {
        conc: *conc,
        rates: *rates,
        heat_duty: heat,
        coolant_flow: coolant,
        residual: 0.0,
    }
}

/// Fit a GP surrogate to the reference cost surface on a full factorial
/// temperature grid.
pub fn fit_reference_gp(
    params: &ReactorParams,
    model: &ReferenceModel,
    grid_resolution: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GpModel> {
    if grid_resolution < 5 {
        return Err(ParboError::InvalidArgument(format!(
            "reference grid resolution must be at least 5 (got {})",
            grid_resolution
        )));
    }
    let domain = params.domain();
    let mut points = Vec::with_capacity(grid_resolution * grid_resolution);
    let mut values = Vec::with_capacity(grid_resolution * grid_resolution);
    for i in 0..grid_resolution {
        for j in 0..grid_resolution {
            let t1 = T_MIN + (T_MAX - T_MIN) * i as f64 / (grid_resolution - 1) as f64;
            let t2 = T_MIN + (T_MAX - T_MIN) * j as f64 / (grid_resolution - 1) as f64;
            points.push(vec![t1, t2]);
            values.push(reference_performance(params, model, t1, t2)?.total);
        }
    }
    let data = Dataset::new(points, values)?;
    // the cost surface carries kinetic ignition fronts; anchor the
    // likelihood ascent in the short-length-scale basin so the fit resolves
    // them instead of smoothing them away
    let opts = FitOptions {
        init: Some(crate::gp::KernelParams::new(1.0, vec![0.07; 2], 1e-6)?),
        restarts: 10,
    };
    GpModel::fit(&data, &domain, &opts, rng)
}

/// Per-subsystem reference values `(g_1, g_2)` on a grid, for ARD-based
/// variable partitioning.
pub fn reference_part_values(
    params: &ReactorParams,
    model: &ReferenceModel,
    t1: f64,
    t2: f64,
) -> Result<(f64, f64)> {
    let p = reference_performance(params, model, t1, t2)?;
    Ok((p.f1, p.f2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn toy_params() -> ReactorParams {
        // small, well-behaved configuration for physics unit tests
        ReactorParams {
            kinetics: Kinetics {
                k0: [6.4e6, 2.4e12, 7.4e8, 5.1e6],
                ea: [55_000.0, 100_000.0, 70_000.0, 60_000.0],
                dh: [-60_000.0, -30_000.0, -50_000.0, -40_000.0],
                reverse_factor: 0.01,
            },
            volume1: 100.0,
            volume2: 150.0,
            feed1: FeedStream {
                flow: 1.0,
                conc: [2.0, 0.0, 0.0, 0.0, 0.0, 0.4],
                temp: 310.0,
            },
            feed_b: FeedStream {
                flow: 0.5,
                conc: [0.0, 0.0, 0.0, 2.0, 0.0, 0.0],
                temp: 310.0,
            },
            thermo: ThermoParams {
                rho: 1.0,
                cp: 4184.0,
                coolant_cp: 4184.0,
                t_coolant_in: 288.0,
                t_coolant_out: 308.0,
            },
            flash: FlashParams {
                alpha: [3.0, 0.25, 1.2, 2.5, 8.0, 1.5],
                k_p: 1.0,
                latent: [30_000.0, 38_000.0, 32_000.0, 28_000.0, 26_000.0, 34_000.0],
                latent_steam: 2.257e6,
            },
            econ: Economics {
                species_price: [0.02, -0.35, 0.05, 0.03, -0.28, 0.04],
                coolant_price: 0.01,
                steam_price: 0.04,
                hours_per_year: 8000.0,
            },
            split: SubsystemSplit::PerReactor,
        }
    }

    #[test]
    fn arrhenius_fixtures() {
        assert_eq!(arrhenius(3.7, 0.0, 350.0), 3.7);
        // monotone increasing in T for positive activation energy
        let a = arrhenius(1.0, 50_000.0, 310.0);
        let b = arrhenius(1.0, 50_000.0, 320.0);
        assert!(b > a);
        // k0 = 1, EA = 8314, T = 1000 -> exp(-1)
        let v = arrhenius(1.0, 8314.0, 1000.0);
        assert!((v - (-1.0_f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn cstr_no_kinetics_passes_feed_through() {
        let mut p = toy_params();
        p.kinetics.k0 = [0.0; 4];
        let sol = solve_cstr(
            &p.kinetics,
            &p.thermo,
            &p.feed1.conc,
            p.feed1.flow,
            p.feed1.temp,
            p.volume1,
            333.0,
        )
        .unwrap();
        for i in 0..N_SPECIES {
            assert!((sol.conc[i] - p.feed1.conc[i]).abs() < 1e-12);
        }
        assert_eq!(sol.heat_duty, 0.0);
        let expect_coolant = p.thermo.rho * p.thermo.cp * p.feed1.flow * (p.feed1.temp - 333.0)
            / (p.thermo.coolant_cp * (p.thermo.t_coolant_out - p.thermo.t_coolant_in));
        assert!((sol.coolant_flow - expect_coolant).abs() < 1e-12);
    }

    #[test]
    fn cstr_residual_replay_below_tolerance() {
        let p = toy_params();
        for t in [303.0, 333.0, 363.0, 393.0, 423.0] {
            let sol = solve_cstr(
                &p.kinetics,
                &p.thermo,
                &p.feed1.conc,
                p.feed1.flow,
                p.feed1.temp,
                p.volume1,
                t,
            )
            .unwrap();
            let res = mass_balance_residual(
                &p.kinetics,
                &p.feed1.conc,
                p.feed1.flow,
                p.volume1,
                t,
                &sol.conc,
            );
            assert!(residual_norm(&res) < 1e-10, "residual at T = {}", t);
        }
    }

    #[test]
    fn cstr_matches_independent_fixed_point_oracle() {
        // brute-force damped fixed point, written independently of the solver
        let p = toy_params();
        let t = 333.0;
        let sol = solve_cstr(
            &p.kinetics,
            &p.thermo,
            &p.feed1.conc,
            p.feed1.flow,
            p.feed1.temp,
            p.volume1,
            t,
        )
        .unwrap();
        let tau = p.volume1 / p.feed1.flow;
        let mut c = p.feed1.conc;
        let omega = 0.002;
        for _ in 0..4_000_000 {
            let r = reaction_rates(&p.kinetics, &c, t);
            let mut done = true;
            for i in 0..N_SPECIES {
                let mut gen = 0.0;
                for j in 0..N_REACTIONS {
                    gen += STOICH[j][i] * r[j];
                }
                let target = p.feed1.conc[i] + gen * tau;
                let delta = target - c[i];
                if delta.abs() > 1e-12 {
                    done = false;
                }
                c[i] += omega * delta;
            }
            if done {
                break;
            }
        }
        for i in 0..N_SPECIES {
            assert!(
                (sol.conc[i] - c[i]).abs() < 1e-8,
                "species {}: newton {} vs oracle {}",
                SPECIES_NAMES[i],
                sol.conc[i],
                c[i]
            );
        }
    }

    #[test]
    fn conservation_of_p_equivalents_without_side_reactions() {
        // with r3, r4, and reverse rates off, C_A/2 + C_P + C_U/2 is conserved
        let mut p = toy_params();
        p.kinetics.k0[2] = 0.0;
        p.kinetics.k0[3] = 0.0;
        p.kinetics.reverse_factor = 0.0;
        let sol = solve_cstr(
            &p.kinetics,
            &p.thermo,
            &p.feed1.conc,
            p.feed1.flow,
            p.feed1.temp,
            p.volume1,
            390.0,
        )
        .unwrap();
        let inv_in = p.feed1.conc[0] / 2.0 + p.feed1.conc[1] + p.feed1.conc[2] / 2.0;
        let inv_out = sol.conc[0] / 2.0 + sol.conc[1] + sol.conc[2] / 2.0;
        assert!((inv_in - inv_out).abs() < 1e-8, "{} vs {}", inv_in, inv_out);
    }

    #[test]
    fn flash_no_separation_when_kp_alpha_unity() {
        let mut fp = toy_params().flash;
        fp.alpha = [1.0; N_SPECIES];
        fp.k_p = 1.0;
        let z = [0.3, 0.2, 0.1, 0.15, 0.15, 0.1];
        let r = flash(&fp, &z, 2.0, FlashMode::RecoverE).unwrap();
        for i in 0..N_SPECIES {
            assert!((r.x[i] - z[i]).abs() < 1e-14);
            assert!((r.y[i] - z[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn flash_two_component_hand_fixture() {
        // z = (0.5, 0.5), alpha = (2, 1), K_P = 1, f = 0.5
        // -> x = (1/3, 1/2), y = (2/3, 1/2)
        let mut fp = toy_params().flash;
        fp.alpha = [2.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        fp.k_p = 1.0;
        let z = [0.5, 0.5, 0.0, 0.0, 0.0, 0.0];
        let r = flash(&fp, &z, 1.0, FlashMode::RecoverP).unwrap();
        assert!((r.f - 0.5).abs() < 1e-15);
        assert!((r.x[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.x[1] - 0.5).abs() < 1e-15);
        assert!((r.y[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.y[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn flash_steam_scales_linearly_with_feed() {
        let fp = toy_params().flash;
        let z = [0.2, 0.2, 0.2, 0.2, 0.1, 0.1];
        let a = flash(&fp, &z, 1.0, FlashMode::RecoverE).unwrap();
        let b = flash(&fp, &z, 3.5, FlashMode::RecoverE).unwrap();
        assert!((b.steam_flow - 3.5 * a.steam_flow).abs() < 1e-12);
    }

    #[test]
    fn performance_zero_prices_gives_zero_cost() {
        let mut p = toy_params();
        p.econ.species_price = [0.0; N_SPECIES];
        p.econ.coolant_price = 0.0;
        p.econ.steam_price = 0.0;
        let perf = performance(&p, 333.0, 322.0).unwrap();
        assert_eq!(perf.total, 0.0);
        assert_eq!(perf.f1, 0.0);
        assert_eq!(perf.f2, 0.0);
    }

    #[test]
    fn performance_split_sums_exactly_under_both_splits() {
        let mut p = toy_params();
        for split in [SubsystemSplit::PerReactor, SubsystemSplit::Economics] {
            p.split = split;
            let perf = performance(&p, 350.0, 340.0).unwrap();
            assert!((perf.total - (perf.f1 + perf.f2)).abs() < 1e-9 * perf.total.abs().max(1.0));
        }
    }

    #[test]
    fn per_reactor_split_f1_depends_only_on_t1() {
        let p = toy_params();
        let a = performance(&p, 350.0, 310.0).unwrap();
        let b = performance(&p, 350.0, 410.0).unwrap();
        assert!((a.f1 - b.f1).abs() < 1e-9 * a.f1.abs().max(1.0));
        let c = performance(&p, 390.0, 310.0).unwrap();
        assert!((a.f1 - c.f1).abs() > 1e-6);
    }

    #[test]
    fn performance_is_deterministic() {
        let p = toy_params();
        let a = performance(&p, 377.3, 341.1).unwrap();
        let b = performance(&p, 377.3, 341.1).unwrap();
        assert_eq!(a.total.to_bits(), b.total.to_bits());
    }

    #[test]
    fn cubic_fit_recovers_exact_cubic() {
        let theta = [4.0, -3_000.0, 2.5e5, -1.9e7];
        let pts: Vec<(f64, f64)> = (0..12)
            .map(|i| {
                let t = 303.0 + 10.0 * i as f64;
                let it = 1.0 / t;
                (
                    t,
                    theta[0] + theta[1] * it + theta[2] * it * it + theta[3] * it * it * it,
                )
            })
            .collect();
        let fit = fit_cubic_log_rate(&pts).unwrap();
        for k in 0..4 {
            let denom = theta[k].abs().max(1.0);
            assert!(
                ((fit[k] - theta[k]) / denom).abs() < 1e-8,
                "theta[{}]: {} vs {}",
                k,
                fit[k],
                theta[k]
            );
        }
        // residual ~ 0
        for (t, logr) in &pts {
            let it = 1.0 / t;
            let pred = fit[0] + fit[1] * it + fit[2] * it * it + fit[3] * it * it * it;
            assert!((pred - logr).abs() < 1e-8);
        }
    }

    #[test]
    fn reference_zero_rates_matches_no_reaction_economics() {
        let mut p = toy_params();
        p.kinetics.k0 = [0.0; 4];
        let exact = performance(&p, 340.0, 330.0).unwrap();
        let p2 = toy_params();
        let model = ReferenceModel::zero_rates();
        let refp = reference_performance(&p2, &model, 340.0, 330.0).unwrap();
        assert!(
            (exact.total - refp.total).abs() < 1e-9 * exact.total.abs().max(1.0),
            "{} vs {}",
            exact.total,
            refp.total
        );
    }

    #[test]
    fn reference_fit_tracks_exact_model() {
        let p = toy_params();
        let temps: Vec<f64> = (0..25).map(|i| 303.0 + 5.0 * i as f64).collect();
        let model = reference_fit(&p, &temps).unwrap();
        let r2 = reference_fit_r2(&p, &model, &temps).unwrap();
        assert!(r2 >= 0.95, "log-rate fit R^2 = {}", r2);
    }

    #[test]
    fn reference_fit_is_stable_under_jackknife() {
        let p = toy_params();
        let temps: Vec<f64> = (0..12).map(|i| 303.0 + 120.0 * i as f64 / 11.0).collect();
        let full = reference_fit(&p, &temps).unwrap();
        let mut reduced_temps = temps.clone();
        reduced_temps.remove(6);
        let reduced = reference_fit(&p, &reduced_temps).unwrap();
        // compare predicted rates rather than raw coefficients: the cubic in
        // 1/T is collinear, so coefficients trade off against each other
        for reactor in 0..2 {
            for t in [310.0, 350.0, 390.0, 420.0] {
                let a = full.rates(reactor, t);
                let b = reduced.rates(reactor, t);
                for j in 0..N_REACTIONS {
                    if a[j] > 1e-12 {
                        assert!(
                            ((a[j] - b[j]) / a[j]).abs() < 0.05,
                            "reactor {} r{} at {}: {} vs {}",
                            reactor,
                            j + 1,
                            t,
                            a[j],
                            b[j]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn reference_fit_input_validation() {
        let p = toy_params();
        assert!(reference_fit(&p, &[303.0, 320.0, 423.0]).is_err());
        let narrow: Vec<f64> = (0..10).map(|i| 330.0 + i as f64).collect();
        assert!(reference_fit(&p, &narrow).is_err());
    }

    #[test]
    fn reference_gp_holdout_accuracy() {
        let p = toy_params();
        let temps: Vec<f64> = (0..25).map(|i| 303.0 + 5.0 * i as f64).collect();
        let model = reference_fit(&p, &temps).unwrap();
        let mut r = rng::stream(77, &[rng::role::PARTITION]);
        let gp = fit_reference_gp(&p, &model, 13, &mut r).unwrap();

        // range of g over the training grid
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..13 {
            for j in 0..13 {
                let t1 = T_MIN + (T_MAX - T_MIN) * i as f64 / 12.0;
                let t2 = T_MIN + (T_MAX - T_MIN) * j as f64 / 12.0;
                let g = reference_performance(&p, &model, t1, t2).unwrap().total;
                lo = lo.min(g);
                hi = hi.max(g);
            }
        }
        let range = hi - lo;
        let mut rr = rng::stream(78, &[rng::role::PARTITION]);
        let holdout = p.domain().latin_hypercube(60, &mut rr);
        let mut sse = 0.0;
        for q in &holdout {
            let g = reference_performance(&p, &model, q[0], q[1]).unwrap().total;
            let (m, _) = gp.posterior(q).unwrap();
            sse += (m - g) * (m - g);
        }
        let rms = (sse / holdout.len() as f64).sqrt();
        assert!(
            rms <= 0.01 * range,
            "holdout RMS {} exceeds 1% of range {}",
            rms,
            range
        );
    }
}
