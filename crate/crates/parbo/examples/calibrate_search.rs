//! Randomized parameter search for the benchmark landscape structure.

use parbo::reactor::{
    performance, Economics, FeedStream, FlashParams, Kinetics, ReactorParams, SubsystemSplit,
    ThermoParams, T_MAX, T_MIN,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

fn base(rng: &mut ChaCha8Rng) -> ReactorParams {
    let logu = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> f64 {
        (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
    };
    let u = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> f64 { lo + (hi - lo) * rng.random::<f64>() };
    let ea4 = u(rng, 103_000.0, 109_000.0);
    let k4_423 = u(rng, 2.0, 6.0);
    let k04 = k4_423 / (-ea4 / (8.314 * 423.0)).exp();
    ReactorParams {
        kinetics: Kinetics {
            k0: [
                logu(rng, 0.6e12, 1.2e12),
                logu(rng, 1.2e12, 2.2e12),
                logu(rng, 1.2e16, 8e16),
                k04,
            ],
            ea: [85_000.0, 100_000.0, u(rng, 125_000.0, 140_000.0), ea4],
            dh: [
                -u(rng, 0.40e5, 0.50e5),
                -u(rng, 0.15e5, 0.25e5),
                -60_000.0,
                -10_000.0,
            ],
            reverse_factor: 0.01,
        },
        volume1: 100.0,
        volume2: u(rng, 135.0, 155.0),
        feed1: FeedStream {
            flow: 1.0,
            conc: [2.0, 0.0, 0.0, 0.0, 0.0, u(rng, 0.5, 0.65)],
            temp: u(rng, 385.0, 390.0),
        },
        feed_b: FeedStream {
            flow: u(rng, 1.2, 1.4),
            conc: [0.0, 0.0, 0.0, u(rng, 2.1, 2.5), 0.0, u(rng, 0.4, 0.6)],
            temp: 290.0,
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
            species_price: [
                0.00125,
                -u(rng, 0.042, 0.052),
                u(rng, 0.0004, 0.0012),
                0.00125,
                -u(rng, 0.006, 0.010),
                0.00188,
            ],
            coolant_price: u(rng, 0.0025, 0.0040),
            steam_price: 0.00188,
            hours_per_year: 8000.0,
        },
        split: SubsystemSplit::PerReactor,
    }
}

struct Structure {
    minima: Vec<(f64, f64, f64, bool)>,
    neg_coolant: usize,
    failures: usize,
}

fn analyze(params: &ReactorParams, grid: usize) -> Structure {
    let step = (T_MAX - T_MIN) / (grid - 1) as f64;
    let mut f = vec![vec![f64::NAN; grid]; grid];
    let mut neg = 0;
    let mut fail = 0;
    for i in 0..grid {
        for j in 0..grid {
            match performance(params, T_MIN + i as f64 * step, T_MIN + j as f64 * step) {
                Ok(p) => {
                    f[i][j] = p.total;
                    if p.reactor1.coolant_flow < 0.0 || p.reactor2.coolant_flow < 0.0 {
                        neg += 1;
                    }
                }
                Err(_) => fail += 1,
            }
        }
    }
    let mut minima = Vec::new();
    if fail == 0 {
        for i in 0..grid {
            for j in 0..grid {
                let mut is_min = true;
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let (ni, nj) = (i as i64 + di, j as i64 + dj);
                        if ni < 0 || nj < 0 || ni >= grid as i64 || nj >= grid as i64 {
                            continue;
                        }
                        if f[ni as usize][nj as usize] <= f[i][j] {
                            is_min = false;
                        }
                    }
                }
                if is_min {
                    minima.push((
                        T_MIN + i as f64 * step,
                        T_MIN + j as f64 * step,
                        f[i][j],
                        i > 0 && j > 0 && i + 1 < grid && j + 1 < grid,
                    ));
                }
            }
        }
        minima.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
    }
    Structure {
        minima,
        neg_coolant: neg,
        failures: fail,
    }
}

fn score(s: &Structure, grid: usize) -> Option<f64> {
    if s.failures > 0 || s.minima.len() != 3 {
        return None;
    }
    let g = &s.minima[0];
    if !g.3 || g.2 >= 0.0 {
        return None;
    }
    // componentwise strictly lower temperatures than both locals
    if !s.minima.iter().skip(1).all(|m| g.0 < m.0 && g.1 < m.1) {
        return None;
    }
    // locals well separated from the global and from each other
    let l1 = &s.minima[1];
    let l2 = &s.minima[2];
    if l1.0 < g.0 + 6.0 || l2.0 < g.0 + 6.0 {
        return None;
    }
    if l1.1 < g.1 + 3.0 || l2.1 < g.1 + 3.0 {
        return None;
    }
    if (l1.1 - l2.1).abs() < 20.0 && (l1.0 - l2.0).abs() < 20.0 {
        return None;
    }
    let range = s
        .minima
        .iter()
        .map(|m| m.2)
        .fold(f64::NEG_INFINITY, f64::max)
        - g.2;
    let _ = range;
    let _ = s.neg_coolant; // billing clamps negative demand; no structural effect
    // locals relatively close to the global value, so they act as traps
    let depth1 = (l1.2 - g.2) / g.2.abs();
    let depth2 = (l2.2 - g.2) / g.2.abs();
    if !(0.002..=2.0).contains(&depth1) || !(0.002..=2.0).contains(&depth2) {
        return None;
    }
    Some(depth1.max(depth2))
}

fn diagnose(s: &Structure) -> &'static str {
    if s.failures > 0 {
        return "solver-failures";
    }
    match s.minima.len() {
        0 | 1 => "one-minimum",
        2 => "two-minima",
        3 => {
            let g = &s.minima[0];
            if !g.3 {
                "global-on-boundary"
            } else if g.2 >= 0.0 {
                "global-positive"
            } else if !s.minima.iter().skip(1).all(|m| g.0 < m.0 && g.1 < m.1) {
                "ordering"
            } else if s.minima[1].0 < 399.0 || s.minima[2].0 < 399.0 {
                "locals-not-on-edge"
            } else if (s.minima[1].1 - s.minima[2].1).abs() < 25.0 {
                "locals-t2-close"
            } else {
                "depth-or-coolant"
            }
        }
        _ => "too-many-minima",
    }
}

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let n: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(400);
    let dump: Option<usize> = std::env::var("DUMP_TRIAL").ok().and_then(|v| v.parse().ok());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found = 0;
    let mut modes: std::collections::BTreeMap<&'static str, usize> = Default::default();
    for trial in 0..n {
        let params = base(&mut rng);
        if dump == Some(trial) {
            println!("{}", toml::to_string(&params).unwrap());
            return;
        }
        if dump.is_some() {
            continue;
        }
        let s = analyze(&params, 41);
        *modes.entry(diagnose(&s)).or_default() += 1;
        if s.failures == 0 && s.minima.len() == 3 {
            eprintln!("trial {} [{}]:", trial, diagnose(&s));
            for m in &s.minima {
                eprintln!(
                    "    ({:6.1},{:6.1}) f={:13.0} {}",
                    m.0,
                    m.1,
                    m.2,
                    if m.3 { "interior" } else { "boundary" }
                );
            }
        }
        if let Some(sc) = score(&s, 41) {
            let s121 = analyze(&params, 121);
            if let Some(sc121) = score(&s121, 121) {
                found += 1;
                println!(
                    "== trial {} coarse {:.3} fine {:.3} neg {} ==",
                    trial, sc, sc121, s121.neg_coolant
                );
                for m in &s121.minima {
                    println!("   ({:6.1},{:6.1}) f={:14.1} {}", m.0, m.1, m.2, if m.3 {"interior"} else {"boundary"});
                }
                println!("{}", toml::to_string(&params).unwrap());
            }
        }
        if trial % 50 == 49 {
            eprintln!("... {} trials, {} hits", trial + 1, found);
        }
    }
    eprintln!("done: {} hits of {}", found, n);
    for (mode, count) in &modes {
        eprintln!("  {:24} {}", mode, count);
    }
}
