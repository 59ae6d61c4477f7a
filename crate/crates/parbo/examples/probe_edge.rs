//! Term-by-term cost accounting along domain edges for a reactor config.
use parbo::reactor::*;

fn line(p: &ReactorParams, t1: f64, t2: f64) {
    match performance(p, t1, t2) {
        Ok(perf) => {
            let scale = 3600.0 * p.econ.hours_per_year / 1e6;
            let w = &p.econ.species_price;
            let mut prod1 = 0.0;
            let mut prod2 = 0.0;
            for i in 0..N_SPECIES {
                prod1 += w[i] * perf.flash1.y[i] * perf.flash1.vapor_flow;
                prod2 += w[i] * perf.flash2.x[i] * perf.flash2.liquid_flow;
            }
            let cool = p.econ.coolant_price
                * (perf.reactor1.coolant_flow.max(0.0) + perf.reactor2.coolant_flow.max(0.0));
            let steam = p.econ.steam_price * (perf.flash1.steam_flow + perf.flash2.steam_flow);
            println!(
                "({:5.0},{:5.0}) f={:8.2}M prod1={:7.2} prod2={:7.2} cool={:6.2} stm={:5.2} mc=({:6.2},{:6.2}) E2={:.3} P2={:.3} U2={:.3} A2={:.3}",
                t1, t2, perf.total / 1e6,
                prod1 * scale, prod2 * scale, cool * scale, steam * scale,
                perf.reactor1.coolant_flow, perf.reactor2.coolant_flow,
                perf.reactor2.conc[4], perf.reactor2.conc[1], perf.reactor2.conc[2], perf.reactor2.conc[0],
            );
        }
        Err(e) => println!("({:5.0},{:5.0}) FAILED {}", t1, t2, e),
    }
}

fn main() {
    let path = std::env::args().nth(1).expect("usage: probe_edge <params.toml> [t]");
    let text = std::fs::read_to_string(&path).expect("read params");
    let p: ReactorParams = toml::from_str(&text).expect("parse params");
    let fixed: Option<f64> = std::env::args().nth(2).and_then(|s| s.parse().ok());
    let scan_t2 = std::env::args().any(|a| a == "--t2scan");
    match fixed {
        Some(fixed_t) if scan_t2 => {
            println!("== T1={} vs T2 ==", fixed_t);
            for i in 0..25 {
                line(&p, fixed_t, 303.0 + 5.0 * i as f64);
            }
        }
        Some(t2_for_t1_scan) => {
            println!("== T2={} vs T1 ==", t2_for_t1_scan);
            for i in 0..25 {
                line(&p, 303.0 + 5.0 * i as f64, t2_for_t1_scan);
            }
        }
        None => {
            println!("== T2=423 edge ==");
            for i in 0..25 {
                line(&p, 303.0 + 5.0 * i as f64, 423.0);
            }
            println!("== T1=423 edge ==");
            for i in 0..25 {
                line(&p, 423.0, 303.0 + 5.0 * i as f64);
            }
        }
    }
}
