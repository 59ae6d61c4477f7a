//! Grid-structure verification for a reactor parameter file.
use parbo::reactor::{performance, ReactorParams, T_MAX, T_MIN};

fn main() {
    let path = std::env::args().nth(1).expect("usage: verify_structure <params.toml>");
    let p: ReactorParams = toml::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let grid = 121usize;
    let step = (T_MAX - T_MIN) / (grid - 1) as f64;
    let mut f = vec![vec![f64::NAN; grid]; grid];
    let mut failures = 0;
    for i in 0..grid {
        for j in 0..grid {
            match performance(&p, T_MIN + i as f64 * step, T_MIN + j as f64 * step) {
                Ok(perf) => f[i][j] = perf.total,
                Err(e) => {
                    failures += 1;
                    if failures < 4 {
                        eprintln!("fail at ({}, {}): {}", T_MIN + i as f64 * step, T_MIN + j as f64 * step, e);
                    }
                }
            }
        }
    }
    println!("failures: {}", failures);
    let mut minima = Vec::new();
    for i in 0..grid {
        for j in 0..grid {
            let mut is_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 { continue; }
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni < 0 || nj < 0 || ni >= grid as i64 || nj >= grid as i64 { continue; }
                    if f[ni as usize][nj as usize] <= f[i][j] { is_min = false; }
                }
            }
            if is_min {
                minima.push((T_MIN + i as f64 * step, T_MIN + j as f64 * step, f[i][j],
                             i > 0 && j > 0 && i + 1 < grid && j + 1 < grid, (i, j)));
            }
        }
    }
    minima.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
    for m in &minima {
        println!("min ({:6.1}, {:6.1}) f = {:12.1} {}", m.0, m.1, m.2, if m.3 { "interior" } else { "boundary" });
    }
    // basin volumes by steepest descent
    let mut owner = vec![vec![usize::MAX; grid]; grid];
    fn descend(f: &Vec<Vec<f64>>, owner: &mut Vec<Vec<usize>>, minima: &[(f64, f64, f64, bool, (usize, usize))], i: usize, j: usize, grid: usize) -> usize {
        if owner[i][j] != usize::MAX { return owner[i][j]; }
        let mut best = (i, j);
        let mut bv = f[i][j];
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if ni < 0 || nj < 0 || ni >= grid as i64 || nj >= grid as i64 { continue; }
                let (ni, nj) = (ni as usize, nj as usize);
                if f[ni][nj] < bv { bv = f[ni][nj]; best = (ni, nj); }
            }
        }
        let res = if best == (i, j) {
            minima.iter().position(|m| m.4 == (i, j)).unwrap_or(usize::MAX - 1)
        } else {
            descend(f, owner, minima, best.0, best.1, grid)
        };
        owner[i][j] = res;
        res
    }
    let mut counts = std::collections::BTreeMap::new();
    for i in 0..grid {
        for j in 0..grid {
            let o = descend(&f, &mut owner, &minima, i, j, grid);
            *counts.entry(o).or_insert(0usize) += 1;
        }
    }
    for (k, c) in counts {
        if k < minima.len() {
            println!("basin {} ({:6.1},{:6.1}): {} nodes ({:.1}%)", k, minima[k].0, minima[k].1, c, 100.0 * c as f64 / (grid * grid) as f64);
        } else {
            println!("basin ???: {} nodes", c);
        }
    }
}
