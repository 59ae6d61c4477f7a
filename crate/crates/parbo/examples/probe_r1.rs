//! Reactor-1 outlet profile diagnostics.
use parbo::reactor::*;

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let k01 = args.get(0).copied().unwrap_or(1.4e9);
    let ea1 = args.get(1).copied().unwrap_or(70_000.0);
    let ea4 = args.get(2).copied().unwrap_or(105_000.0);
    let k4_423 = args.get(3).copied().unwrap_or(3.0);
    let d1 = args.get(4).copied().unwrap_or(1.0);
    let k02 = args.get(5).copied().unwrap_or(2.4e12);
    let kin = Kinetics {
        k0: [k01, k02, 8.0e24, k4_423 / (-ea4 / (8.314 * 423.0)).exp()],
        ea: [ea1, 100_000.0, 200_000.0, ea4],
        dh: [-300_000.0, -200_000.0, -150_000.0, -120_000.0],
        reverse_factor: 0.01,
    };
    let thermo = ThermoParams { rho: 1.0, cp: 4184.0, coolant_cp: 4184.0, t_coolant_in: 288.0, t_coolant_out: 308.0 };
    let feed = [2.0, 0.0, 0.0, 0.0, 0.0, d1];
    println!("  T1      A      P      U      D     mc1");
    for i in 0..13 {
        let t = 303.0 + 10.0 * i as f64;
        match solve_cstr(&kin, &thermo, &feed, 1.0, 310.0, 100.0, t) {
            Ok(s) => println!("{:6.0} {:6.3} {:6.3} {:6.3} {:6.3} {:7.2}", t, s.conc[0], s.conc[1], s.conc[2], s.conc[5], s.coolant_flow),
            Err(e) => println!("{:6.0} FAILED {}", t, e),
        }
    }
}
