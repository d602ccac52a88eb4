//! Reference implementations used as test oracles. Written for clarity, not
//! speed, and independently of the library code they check.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;

/// O(N^2) DFT straight from the definition.
pub fn naive_dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| {
                    let angle = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                    Complex64::from_polar(v, angle)
                })
                .sum()
        })
        .collect()
}

/// The 40 window features computed the long way: per axis mean, population
/// std, mean absolute deviation, then the mean 3-D norm, then 10 bin
/// fractions per axis where a value belongs to the highest bin whose lower
/// edge `min + i*(max-min)/10` it reaches.
pub fn oracle_features(rows: &[[f64; 3]]) -> Vec<f64> {
    let n = rows.len() as f64;
    let col = |a: usize| rows.iter().map(|r| r[a]).collect::<Vec<f64>>();
    let mut mean = [0.0; 3];
    let mut std = [0.0; 3];
    let mut mad = [0.0; 3];
    let mut bins = vec![[0.0; 10]; 3];
    for a in 0..3 {
        let c = col(a);
        let mut s = 0.0;
        for v in &c {
            s += v;
        }
        mean[a] = s / n;
        let mut ss = 0.0;
        let mut sa = 0.0;
        for v in &c {
            ss += (v - mean[a]).powi(2);
            sa += (v - mean[a]).abs();
        }
        std[a] = (ss / n).sqrt();
        mad[a] = sa / n;
        let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in &c {
            let mut b = 0;
            if hi > lo {
                let w = (hi - lo) / 10.0;
                for i in 1..10 {
                    if *v >= lo + i as f64 * w {
                        b = i;
                    }
                }
            }
            bins[a][b] += 1.0 / n;
        }
    }
    let resultant = rows.iter().map(|r| (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()).sum::<f64>() / n;
    let mut out = Vec::with_capacity(40);
    out.extend(mean);
    out.extend(std);
    out.extend(mad);
    out.push(resultant);
    for b in &bins {
        out.extend(b);
    }
    out
}
