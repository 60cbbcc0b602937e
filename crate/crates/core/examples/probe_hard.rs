//! Scratch experiment: per-configuration solve profiles for candidate hard
//! instances of varying shape/radius classes.

use relusat_core::benchgen::{gen_corpus, GenConfig};
use relusat_core::io::{build_problem, VerificationProblem};
use relusat_core::net::{AffineLayer, Network};
use relusat_core::oracle;
use relusat_core::search::{verify, SearchConfig, Verdict};
use relusat_core::Property;
use relusat_core::io::{Dnf, LinearIneq};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::time::Duration;

fn random_net(rng: &mut ChaCha8Rng, dims: &[usize]) -> Network {
    let layers = dims
        .windows(2)
        .map(|w| {
            let scale = 1.0 / (w[0] as f64).sqrt();
            AffineLayer::new(
                (0..w[1])
                    .map(|_| (0..w[0]).map(|_| rng.gen_range(-1.0..1.0) * scale).collect())
                    .collect(),
                (0..w[1]).map(|_| rng.gen_range(-0.4..0.4)).collect(),
            )
        })
        .collect();
    Network::new(dims[0], layers)
}

fn condition(y0: &[f64]) -> Dnf {
    let (mut a, mut b) = (0usize, 0usize);
    for (i, v) in y0.iter().enumerate() {
        if *v > y0[a] { a = i; }
        if *v < y0[b] { b = i; }
    }
    let mut coeffs = vec![0.0; y0.len()];
    if a != b && (y0[a] - y0[b]) > 1e-6 {
        coeffs[b] = 1.0;
        coeffs[a] = -1.0;
        Dnf(vec![vec![LinearIneq { coeffs, rhs: 0.0, strict: false }]])
    } else {
        coeffs[0] = 1.0;
        Dnf(vec![vec![LinearIneq { coeffs, rhs: y0[0] + 0.15, strict: false }]])
    }
}

fn problem_at(net: &Network, anchor: &[f64], cond: &Dnf, r: f64) -> VerificationProblem {
    let neg = Dnf(cond.0[0].iter().map(|at| vec![at.negated()]).collect());
    let property = Property {
        input_box: anchor.iter().map(|&a| (a - r, a + r)).collect(),
        output_condition: cond.clone(),
        negated_output: neg,
    };
    build_problem(net.clone(), property).unwrap()
}

fn config(name: &str, budget: f64, seed: u64) -> SearchConfig {
    let base = SearchConfig {
        timeout: Some(Duration::from_secs_f64(budget)),
        seed,
        restarts: false,
        ..SearchConfig::default()
    };
    match name {
        "N" => SearchConfig { beam_width: 1, stabilize_k: 0, ..base },
        "S" => SearchConfig { beam_width: 1, stabilize_k: 64, ..base },
        "P" => SearchConfig { beam_width: 512, stabilize_k: 0, ..base },
        "P+S" => SearchConfig { beam_width: 512, stabilize_k: 64, ..base },
        "P+S+R" => SearchConfig { beam_width: 512, stabilize_k: 64, restarts: true, ..base },
        _ => unreachable!(),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let widths: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let layers: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3);
    let mult: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let budget: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(15.0);
    let count: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(8);
    let _ = gen_corpus(&GenConfig { count: 0, ..GenConfig::default() });

    println!("width={widths} layers={layers} radius_mult={mult} budget={budget}");
    println!("{:<4} {:>9} | {}", "idx", "boundary", "N S P P+S P+S+R  (verdict:time)");
    for idx in 0..count {
        let gen_seed: u64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(9000);
        let mut rng = ChaCha8Rng::seed_from_u64(gen_seed + idx as u64);
        let mut dims = vec![rng.gen_range(2..=3usize)];
        for _ in 0..layers {
            dims.push(widths);
        }
        dims.push(2);
        let net = random_net(&mut rng, &dims);
        let anchor: Vec<f64> = (0..net.input_dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let y0 = net.infer(&anchor).unwrap();
        let cond = condition(&y0);
        let mut boundary = None;
        let mut r = 0.05;
        while r <= 6.0 {
            let p = problem_at(&net, &anchor, &cond, r);
            if oracle::sample_falsify(&p, 4000, 77 + idx as u64).is_some() {
                boundary = Some(r);
                break;
            }
            r *= 1.3;
        }
        let Some(boundary) = boundary else {
            println!("{idx:<4} no boundary");
            continue;
        };
        let p = problem_at(&net, &anchor, &cond, boundary * mult);
        print!("{idx:<4} {boundary:>9.3} | ");
        for name in ["N", "S", "P", "P+S", "P+S+R"] {
            let cfg_seed: u64 = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(20260809);
            let res = verify(&p, &config(name, budget, cfg_seed));
            let w = match res.verdict {
                Verdict::Sat { .. } => "sat",
                Verdict::Unsat => "uns",
                Verdict::Unknown { .. } => "unk",
                Verdict::Timeout => "TMO",
            };
            print!("{w}:{:<6.1} ", res.stats.wall_time_ms as f64 / 1000.0);
        }
        println!();
    }
}
