//! Random desk-scale problem corpus: fully-connected nets with properties
//! whose difficulty is controlled by the input-box radius around an anchor
//! input. Every emitted test instance is labeled by the enumeration oracle;
//! radius bisection against the oracle finds near-boundary instances.

use crate::io::{
    build_problem, emit_network, emit_property, Dnf, LinearIneq, Property, VerificationProblem,
};
use crate::net::{AffineLayer, Network};
use crate::oracle;
use crate::search::{verify, SearchConfig, Verdict};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

/// Label assigned by the oracle at generation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Sat,
    Unsat,
    /// Hard instances exceed the oracle cap and carry no label.
    Unlabeled,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Sat => write!(f, "sat"),
            Label::Unsat => write!(f, "unsat"),
            Label::Unlabeled => write!(f, "unknown"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub network: Network,
    pub property: Property,
    pub label: Label,
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub seed: u64,
    pub count: usize,
    /// Inclusive range of input dimensions.
    pub inputs: (usize, usize),
    /// Inclusive range of hidden layer counts.
    pub hidden_layers: (usize, usize),
    /// Inclusive range of hidden layer widths.
    pub width: (usize, usize),
    pub outputs: (usize, usize),
    /// Sat labels are targeted for even instance indices scaled by this
    /// fraction, keeping the parallel generation deterministic.
    pub sat_fraction: f64,
    /// Margin clearance: sat instances must violate with at least this
    /// margin, unsat instances must have no closed-region violation at all.
    pub clearance: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            count: 200,
            inputs: (2, 2),
            hidden_layers: (2, 2),
            width: (2, 4),
            outputs: (2, 2),
            sat_fraction: 0.5,
            clearance: 1e-3,
        }
    }
}

fn random_net(rng: &mut ChaCha8Rng, cfg: &GenConfig) -> Network {
    let inputs = rng.gen_range(cfg.inputs.0..=cfg.inputs.1);
    let n_hidden = rng.gen_range(cfg.hidden_layers.0..=cfg.hidden_layers.1);
    let outputs = rng.gen_range(cfg.outputs.0..=cfg.outputs.1);
    let mut dims = vec![inputs];
    for _ in 0..n_hidden {
        dims.push(rng.gen_range(cfg.width.0..=cfg.width.1));
    }
    dims.push(outputs);
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

/// Output condition that holds at the anchor output: either a comparison
/// `y_a >= y_b` between the extreme outputs or a threshold `y_0 <= t`.
fn anchor_condition(rng: &mut ChaCha8Rng, y0: &[f64]) -> Dnf {
    let dim = y0.len();
    let comparison = dim >= 2 && rng.gen_bool(0.5);
    if comparison {
        let (mut a, mut b) = (0usize, 0usize);
        for (i, v) in y0.iter().enumerate() {
            if *v > y0[a] {
                a = i;
            }
            if *v < y0[b] {
                b = i;
            }
        }
        if a != b && (y0[a] - y0[b]) > 1e-6 {
            // y_a >= y_b  <=>  y_b - y_a <= 0.
            let mut coeffs = vec![0.0; dim];
            coeffs[b] = 1.0;
            coeffs[a] = -1.0;
            return Dnf(vec![vec![LinearIneq {
                coeffs,
                rhs: 0.0,
                strict: false,
            }]]);
        }
    }
    // Threshold: y_0 <= anchor + gap.
    let gap = rng.gen_range(0.05..0.3);
    let mut coeffs = vec![0.0; dim];
    coeffs[0] = 1.0;
    Dnf(vec![vec![LinearIneq {
        coeffs,
        rhs: y0[0] + gap,
        strict: false,
    }]])
}

fn negate_dnf(cond: &Dnf) -> Dnf {
    // Conditions built here are single conjunctions; De Morgan is a single
    // disjunct per atom.
    Dnf(cond.0[0].iter().map(|a| vec![a.negated()]).collect())
}

fn problem_at_radius(net: &Network, anchor: &[f64], cond: &Dnf, radius: f64) -> VerificationProblem {
    let input_box = anchor.iter().map(|&a| (a - radius, a + radius)).collect();
    let property = Property {
        input_box,
        output_condition: cond.clone(),
        negated_output: negate_dnf(cond),
    };
    build_problem(net.clone(), property).expect("generated dims match")
}

/// One labeled instance, or None when no clean-margin radius was found.
fn gen_instance(index: usize, cfg: &GenConfig) -> Option<GeneratedInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(
        cfg.seed ^ (index as u64).wrapping_mul(0x2545_f491_4f6c_dd1d),
    );
    let want_sat = (index as f64 * cfg.sat_fraction).fract() + cfg.sat_fraction > 1.0 - 1e-12;

    for _attempt in 0..8 {
        let net = random_net(&mut rng, cfg);
        let anchor: Vec<f64> = (0..net.input_dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let Ok(y0) = net.infer(&anchor) else { continue };
        if y0.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let cond = anchor_condition(&mut rng, &y0);

        // Bisection on the radius: small radii keep the property valid,
        // large ones violate it. Only the sign of the best violation margin
        // matters here, so the early-exit oracle query suffices.
        let mut lo = 1e-3;
        let mut hi = 4.0;
        let violated = |r: f64, threshold: f64| {
            let p = problem_at_radius(&net, &anchor, &cond, r);
            oracle::margin_exceeds(&p, threshold).ok()
        };
        let instance_at = |r: f64, label: Label| {
            let p = problem_at_radius(&net, &anchor, &cond, r);
            GeneratedInstance {
                network: p.network,
                property: p.property,
                label,
            }
        };
        if violated(lo, 0.0)? {
            // Violated even at a tiny radius: keep as a clear sat if deep.
            if violated(lo, cfg.clearance)? {
                return Some(instance_at(lo, Label::Sat));
            }
            continue;
        }
        if !violated(hi, 0.0)? {
            // Valid even at the radius cap: clear unsat.
            if !want_sat {
                return Some(instance_at(hi, Label::Unsat));
            }
            continue;
        }
        for _ in 0..7 {
            let mid = 0.5 * (lo + hi);
            if violated(mid, 0.0)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // lo: margin <= 0 (clean unsat); hi: violated. Push hi outward until
        // the violation margin clears.
        if want_sat {
            let mut r = hi;
            for _ in 0..8 {
                if violated(r, cfg.clearance)? {
                    return Some(instance_at(r, Label::Sat));
                }
                r *= 1.15;
            }
        } else {
            return Some(instance_at(lo, Label::Unsat));
        }
    }
    None
}

/// Generates the labeled corpus. Deterministic: instance i depends only on
/// (seed, i), so a fixed seed gives a byte-identical corpus.
pub fn gen_corpus(cfg: &GenConfig) -> Vec<GeneratedInstance> {
    use rayon::prelude::*;
    (0..cfg.count)
        .into_par_iter()
        .filter_map(|i| gen_instance(i, cfg))
        .collect()
}

/// Knobs for hard (oracle-uncapped) instances used by ablation runs.
///
/// Following standard benchmark curation, candidates too easy for the
/// sequential no-stabilization baseline are dropped (solved within
/// `easy_cutoff`), as are candidates the full configuration cannot crack
/// within `strong_probe`. To keep a whole ablation pass affordable, at most
/// `hard_cap` instances may defeat the baseline outright at `band_probe`;
/// the rest land in the band where the baseline needs between `easy_cutoff`
/// and `band_probe`. The mix alternates near-boundary satisfiable instances
/// and just-inside unsatisfiable ones.
#[derive(Debug, Clone)]
pub struct HardGenConfig {
    pub seed: u64,
    pub count: usize,
    pub inputs: (usize, usize),
    pub hidden_layers: (usize, usize),
    pub width: (usize, usize),
    /// Radius shrink factor below the sampled violation boundary for the
    /// unsat side of the mix.
    pub shrink: f64,
    /// Fraction of satisfiable-side instances in the mix.
    pub sat_fraction: f64,
    /// Baseline solves faster than this: too easy, rejected.
    pub easy_cutoff: Duration,
    /// Baseline budget separating band instances from hard ones.
    pub band_probe: Duration,
    /// The full configuration must solve within this.
    pub strong_probe: Duration,
    /// Maximum number of instances the baseline fails at `band_probe`.
    pub hard_cap: usize,
    /// Beam width used by the strong probe (and intended for the ablation).
    pub beam: usize,
}

impl Default for HardGenConfig {
    fn default() -> Self {
        HardGenConfig {
            seed: 0,
            count: 20,
            inputs: (2, 3),
            hidden_layers: (3, 3),
            width: (6, 7),
            shrink: 0.9,
            sat_fraction: 0.5,
            easy_cutoff: Duration::from_secs(2),
            band_probe: Duration::from_secs(8),
            strong_probe: Duration::from_secs(6),
            hard_cap: 8,
            beam: 512,
        }
    }
}

/// Generates near-boundary instances that challenge the sequential baseline
/// while remaining tractable for the full configuration.
pub fn gen_hard_corpus(cfg: &HardGenConfig) -> Vec<GeneratedInstance> {
    let baseline = SearchConfig {
        beam_width: 1,
        stabilize_k: 0,
        restarts: false,
        timeout: Some(cfg.band_probe),
        seed: cfg.seed,
        ..SearchConfig::default()
    };
    let strong = SearchConfig {
        beam_width: cfg.beam,
        stabilize_k: 64,
        restarts: true,
        timeout: Some(cfg.strong_probe),
        seed: cfg.seed,
        ..SearchConfig::default()
    };

    let mut kept = Vec::new();
    let mut hard_kept = 0usize;
    let mut index = 0usize;
    while kept.len() < cfg.count && index < cfg.count * 60 {
        let mut rng = ChaCha8Rng::seed_from_u64(
            cfg.seed ^ 0xdead_beef ^ (index as u64).wrapping_mul(0x2545_f491_4f6c_dd1d),
        );
        index += 1;
        let want_sat =
            ((kept.len() as f64) * cfg.sat_fraction).fract() + cfg.sat_fraction > 1.0 - 1e-12;
        let gen = GenConfig {
            inputs: cfg.inputs,
            hidden_layers: cfg.hidden_layers,
            width: cfg.width,
            outputs: (2, 2),
            ..GenConfig::default()
        };
        let net = random_net(&mut rng, &gen);
        let anchor: Vec<f64> = (0..net.input_dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let Ok(y0) = net.infer(&anchor) else { continue };
        let cond = anchor_condition(&mut rng, &y0);

        // Sampled violation boundary: the smallest radius where uniform
        // sampling finds a strict violator.
        let sample_seed = cfg.seed ^ index as u64;
        let mut boundary = None;
        let mut r = 0.05;
        while r <= 6.0 {
            let p = problem_at_radius(&net, &anchor, &cond, r);
            if oracle::sample_falsify(&p, 4000, sample_seed).is_some() {
                boundary = Some(r);
                break;
            }
            r *= 1.3;
        }
        let Some(boundary) = boundary else { continue };

        let radius = if want_sat { boundary } else { boundary * cfg.shrink };
        let p = problem_at_radius(&net, &anchor, &cond, radius);

        let base_run = verify(&p, &baseline);
        let base_solved = matches!(base_run.verdict, Verdict::Sat { .. } | Verdict::Unsat);
        if base_solved && base_run.stats.wall_time_ms <= cfg.easy_cutoff.as_millis() as u64 {
            continue; // too easy
        }
        if !base_solved {
            if hard_kept >= cfg.hard_cap {
                continue;
            }
        }
        if !matches!(verify(&p, &strong).verdict, Verdict::Sat { .. } | Verdict::Unsat) {
            continue; // intractable even for the full configuration
        }
        if !base_solved {
            hard_kept += 1;
        }
        kept.push(GeneratedInstance {
            network: p.network,
            property: p.property,
            label: Label::Unlabeled,
        });
    }
    kept
}

/// Written corpus layout: per-instance network/property files plus a
/// manifest of `net_path,prop_path` lines and a labels file with one
/// `net_path,prop_path,label` line per instance.
#[derive(Debug, Clone)]
pub struct WrittenCorpus {
    pub manifest: PathBuf,
    pub labels: PathBuf,
    pub instances: Vec<(PathBuf, PathBuf)>,
}

pub fn write_corpus(
    dir: &Path,
    instances: &[GeneratedInstance],
) -> Result<WrittenCorpus, std::io::Error> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    let mut labels = String::new();
    let mut paths = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        let net_path = dir.join(format!("inst_{i:04}.net.json"));
        let prop_path = dir.join(format!("inst_{i:04}.vnnlib"));
        std::fs::write(&net_path, emit_network(&inst.network))?;
        std::fs::write(&prop_path, emit_property(&inst.property))?;
        manifest.push_str(&format!("{},{}\n", net_path.display(), prop_path.display()));
        labels.push_str(&format!(
            "{},{},{}\n",
            net_path.display(),
            prop_path.display(),
            inst.label
        ));
        paths.push((net_path, prop_path));
    }
    let manifest_path = dir.join("manifest.csv");
    let labels_path = dir.join("labels.csv");
    std::fs::write(&manifest_path, manifest)?;
    std::fs::write(&labels_path, labels)?;
    Ok(WrittenCorpus {
        manifest: manifest_path,
        labels: labels_path,
        instances: paths,
    })
}
