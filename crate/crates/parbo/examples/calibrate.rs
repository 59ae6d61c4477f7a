//! Landscape calibration helper for the reactor benchmark.
//!
//! Evaluates the cost surface on a grid, reports every grid-local minimum,
//! and checks the structural requirements for the shipped default
//! configuration: exactly three local minima, the global one strictly
//! interior and at lower temperatures than both locals. Run with
//! `cargo run --release --example calibrate [-- search]`.

use parbo::reactor::{
    performance, reference_fit, reference_performance, Economics, FeedStream, FlashParams,
    Kinetics, ReactorParams, SubsystemSplit, ThermoParams, T_MAX, T_MIN,
};

const GRID: usize = 121;

fn candidate() -> ReactorParams {
    ReactorParams {
        kinetics: Kinetics {
            k0: [1.44e9, 2.4e12, 8.0e24, 2.7e13],
            ea: [70_000.0, 100_000.0, 200_000.0, 105_000.0],
            dh: [-300_000.0, -200_000.0, -150_000.0, -120_000.0],
            reverse_factor: 0.01,
        },
        volume1: 100.0,
        volume2: 150.0,
        feed1: FeedStream {
            flow: 1.0,
            conc: [2.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            temp: 310.0,
        },
        feed_b: FeedStream {
            flow: 0.5,
            conc: [0.0, 0.0, 0.0, 2.4, 0.0, 1.2],
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
            alpha: [3.0, 0.05, 1.2, 2.5, 8.0, 1.5],
            k_p: 1.0,
            latent: [30_000.0, 38_000.0, 32_000.0, 28_000.0, 26_000.0, 34_000.0],
            latent_steam: 2.257e6,
        },
        econ: Economics {
            species_price: [0.02, -0.45, 0.03, 0.02, -0.45, 0.03],
            coolant_price: 0.065,
            steam_price: 0.03,
            hours_per_year: 8000.0,
        },
        split: SubsystemSplit::PerReactor,
    }
}

fn breakdown(params: &ReactorParams, t1: f64, t2: f64) {
    match performance(params, t1, t2) {
        Ok(p) => {
            let c2 = &p.reactor2.conc;
            println!(
                "({:6.1},{:6.1}) f={:12.1} f1={:12.1} f2={:12.1} mc=({:8.2},{:8.2}) \
                 C2[A={:.3} P={:.3} U={:.3} B={:.3} E={:.3} D={:.3}]",
                t1, t2, p.total, p.f1, p.f2,
                p.reactor1.coolant_flow, p.reactor2.coolant_flow,
                c2[0], c2[1], c2[2], c2[3], c2[4], c2[5]
            );
        }
        Err(e) => println!("({:6.1},{:6.1}) FAILED: {}", t1, t2, e),
    }
}

struct GridReport {
    minima: Vec<(f64, f64, f64, bool)>, // t1, t2, f, interior
    global_idx: usize,
    negative_coolant: usize,
    failures: usize,
    f_range: (f64, f64),
}

fn analyze(params: &ReactorParams, grid: usize) -> Option<GridReport> {
    let step = (T_MAX - T_MIN) / (grid - 1) as f64;
    let mut f = vec![vec![f64::NAN; grid]; grid];
    let mut negative_coolant = 0usize;
    let mut failures = 0usize;
    for i in 0..grid {
        for j in 0..grid {
            let t1 = T_MIN + i as f64 * step;
            let t2 = T_MIN + j as f64 * step;
            match performance(params, t1, t2) {
                Ok(p) => {
                    f[i][j] = p.total;
                    if p.reactor1.coolant_flow < 0.0 || p.reactor2.coolant_flow < 0.0 {
                        negative_coolant += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
    }
    if failures > 0 {
        return Some(GridReport {
            minima: vec![],
            global_idx: 0,
            negative_coolant,
            failures,
            f_range: (f64::NAN, f64::NAN),
        });
    }
    let mut minima = Vec::new();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..grid {
        for j in 0..grid {
            lo = lo.min(f[i][j]);
            hi = hi.max(f[i][j]);
            let mut is_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ni = i as i64 + di;
                    let nj = j as i64 + dj;
                    if ni < 0 || nj < 0 || ni >= grid as i64 || nj >= grid as i64 {
                        continue;
                    }
                    if f[ni as usize][nj as usize] <= f[i][j] {
                        is_min = false;
                    }
                }
            }
            if is_min {
                let interior = i > 0 && j > 0 && i + 1 < grid && j + 1 < grid;
                minima.push((T_MIN + i as f64 * step, T_MIN + j as f64 * step, f[i][j], interior));
            }
        }
    }
    minima.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
    Some(GridReport {
        minima,
        global_idx: 0,
        negative_coolant,
        failures,
        f_range: (lo, hi),
    })
}

fn structure_ok(r: &GridReport) -> bool {
    if r.failures > 0 || r.minima.len() != 3 {
        return false;
    }
    let g = &r.minima[r.global_idx];
    if !g.3 {
        return false; // global must be interior
    }
    r.minima
        .iter()
        .skip(1)
        .all(|m| g.0 < m.0 && g.1 < m.1)
}

fn report(params: &ReactorParams) {
    match analyze(params, GRID) {
        Some(r) => {
            println!(
                "grid {}x{}: {} failures, {} negative-coolant nodes, f range [{:.1}, {:.1}]",
                GRID, GRID, r.failures, r.negative_coolant, r.f_range.0, r.f_range.1
            );
            println!("{} local minima:", r.minima.len());
            for (t1, t2, fv, interior) in &r.minima {
                println!(
                    "  ({:7.2}, {:7.2})  f = {:14.2}  {}",
                    t1,
                    t2,
                    fv,
                    if *interior { "interior" } else { "boundary" }
                );
            }
            println!("structure ok: {}", structure_ok(&r));

            // reference-model agreement on a 5x5 grid
            let temps: Vec<f64> = (0..25).map(|i| T_MIN + (T_MAX - T_MIN) * i as f64 / 24.0).collect();
            match reference_fit(params, &temps) {
                Ok(model) => {
                    let mut worst: f64 = 0.0;
                    let mut fr = (f64::INFINITY, f64::NEG_INFINITY);
                    let mut cells = Vec::new();
                    for i in 0..5 {
                        for j in 0..5 {
                            let t1 = T_MIN + (T_MAX - T_MIN) * i as f64 / 4.0;
                            let t2 = T_MIN + (T_MAX - T_MIN) * j as f64 / 4.0;
                            let fv = performance(params, t1, t2).unwrap().total;
                            fr.0 = fr.0.min(fv);
                            fr.1 = fr.1.max(fv);
                            cells.push((fv, reference_performance(params, &model, t1, t2).map(|p| p.total)));
                        }
                    }
                    let range = fr.1 - fr.0;
                    let mut bad = 0;
                    for (fv, gv) in cells {
                        match gv {
                            Ok(g) => {
                                let rel = (g - fv).abs() / range.max(1.0);
                                worst = worst.max(rel);
                            }
                            Err(_) => bad += 1,
                        }
                    }
                    println!(
                        "reference |g-f|/range worst = {:.3} ({} reference failures)",
                        worst, bad
                    );
                }
                Err(e) => println!("reference fit failed: {}", e),
            }
        }
        None => println!("analysis failed"),
    }
}

fn slice(params: &ReactorParams, label: &str, fixed: f64, along_t1: bool) {
    let mut line = format!("{:>14}: ", label);
    for i in 0..13 {
        let v = T_MIN + (T_MAX - T_MIN) * i as f64 / 12.0;
        let (t1, t2) = if along_t1 { (v, fixed) } else { (fixed, v) };
        let f = performance(params, t1, t2).map(|p| p.total).unwrap_or(f64::NAN);
        line.push_str(&format!("{:9.0} ", f / 1000.0));
    }
    println!("{}", line);
}

fn main() {
    let params = candidate();
    report(&params);
    println!("--- probes ---");
    for (t1, t2) in [
        (303.0, 303.0),
        (303.0, 423.0),
        (333.0, 322.0),
        (363.0, 363.0),
        (423.0, 303.0),
        (423.0, 340.0),
        (423.0, 380.0),
        (423.0, 423.0),
    ] {
        breakdown(&params, t1, t2);
    }
    println!("--- slices (f in k$, T from 303 to 423 in 10 K steps) ---");
    slice(&params, "T2=340 vs T1", 340.0, true);
    slice(&params, "T2=423 vs T1", 423.0, true);
    slice(&params, "T1=423 vs T2", 423.0, false);
    slice(&params, "T1=333 vs T2", 333.0, false);
}
