//! Embedded verification suite behind `ququad validate`.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::witness_value;
use crate::coincidence::{coincidence_probability, quadrature_probability, Overlap};
use crate::config::ExperimentConfig;
use crate::optics::{beam_splitter_block, delay_expansion_matrix, transfer_matrix_with, Block2, ComplexMatrix, OpticalElement, OpticalNetwork};
use crate::scenarios::{run_fig2, Fig2Variant};
use crate::spectral::coherence_length;
use crate::state::{Photon, TwoPhotonPathState};

/// Random lossless 4-mode network of at most 6 elements, delays within
/// `±max_delay_m`.
pub fn random_network(rng: &mut impl Rng, max_delay_m: f64) -> OpticalNetwork {
    let n_el = rng.random_range(0..=6);
    let mut els = Vec::with_capacity(n_el);
    for _ in 0..n_el {
        let el = match rng.random_range(0..3) {
            0 => {
                let x = rng.random_range(0..4);
                let y = (x + rng.random_range(1..4)) % 4;
                OpticalElement::BeamSplitter {
                    mode_x: x,
                    mode_y: y,
                    reflectivity: rng.random::<f64>(),
                    phase: rng.random_range(-PI..PI),
                }
            }
            1 => OpticalElement::Delay { mode: rng.random_range(0..4), length_m: rng.random_range(-max_delay_m..max_delay_m) },
            _ => OpticalElement::PhaseShift { mode: rng.random_range(0..4), phase: rng.random_range(-PI..PI) },
        };
        els.push(el);
    }
    OpticalNetwork::new(4, els).expect("generated elements are valid")
}

pub fn random_state(rng: &mut impl Rng) -> TwoPhotonPathState {
    let amps = std::array::from_fn(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    TwoPhotonPathState::normalized(amps).expect("non-zero amplitudes")
}

/// Uniform or per-arm overlap, redrawn until positive semidefinite.
pub fn random_overlap(rng: &mut impl Rng) -> Overlap {
    if rng.random::<bool>() {
        return Overlap::uniform(rng.random()).expect("uniform overlap in [0, 1]");
    }
    loop {
        if let Ok(o) = Overlap::per_arm(rng.random(), rng.random(), rng.random()) {
            return o;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

/// Knobs of the suite; the beam-splitter block can be swapped to prove the
/// unitarity check bites.
pub struct ValidationOptions {
    pub seed: u64,
    pub configurations: usize,
    pub bs_block: fn(f64, f64) -> Block2,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions { seed: 1, configurations: 100, bs_block: beam_splitter_block }
    }
}

fn unitarity_defect(t: &ComplexMatrix) -> f64 {
    let n = t.nrows();
    (t.adjoint() * t - ComplexMatrix::identity(n, n)).norm()
}

fn timed(name: &str, f: impl FnOnce() -> (bool, String)) -> CheckResult {
    let t0 = Instant::now();
    let (passed, detail) = f();
    CheckResult { name: name.into(), passed, detail, seconds: t0.elapsed().as_secs_f64() }
}

pub fn run_validation(opts: &ValidationOptions) -> Vec<CheckResult> {
    let cfg = ExperimentConfig::calibrated();
    let model = cfg.spectral;
    let lc = coherence_length(&model);
    let mut out = Vec::new();

    out.push(timed("unitarity of random networks", || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut worst = 0.0f64;
        for _ in 0..opts.configurations {
            let net = random_network(&mut rng, lc);
            for _ in 0..100 {
                let nu = rng.random_range(-5.0 * model.sigma_nu()..5.0 * model.sigma_nu());
                match transfer_matrix_with(&net, Photon::A, nu, opts.bs_block) {
                    Ok(t) => worst = worst.max(unitarity_defect(&t)),
                    Err(e) => return (false, e.to_string()),
                }
            }
        }
        (worst <= 1e-12, format!("max ‖T†T − 1‖ = {worst:e}"))
    }));

    out.push(timed("delay expansion matches transfer matrix", || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 1);
        let mut worst = 0.0f64;
        for _ in 0..opts.configurations {
            let net = random_network(&mut rng, lc);
            let Ok(e) = delay_expansion_matrix(&net, Photon::B) else {
                return (false, "expansion failed".into());
            };
            for _ in 0..50 {
                let nu = rng.random_range(-5.0 * model.sigma_nu()..5.0 * model.sigma_nu());
                let t = transfer_matrix_with(&net, Photon::B, nu, beam_splitter_block).expect("valid network");
                worst = worst.max((e.eval(nu) - t).norm());
            }
        }
        (worst <= 1e-12, format!("max deviation {worst:e}"))
    }));

    out.push(timed("analytic engine matches quadrature", || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 2);
        let mut worst = 0.0f64;
        for _ in 0..opts.configurations {
            let a = random_network(&mut rng, 0.5 * lc);
            let b = random_network(&mut rng, 0.5 * lc);
            let st = random_state(&mut rng);
            let ov = random_overlap(&mut rng);
            let x = coincidence_probability(&st, &a, &b, &model, &ov);
            let y = quadrature_probability(&st, &a, &b, &model, &ov, 512);
            match (x, y) {
                (Ok(x), Ok(y)) => worst = worst.max(x.max_abs_diff(&y)),
                (Err(e), _) | (_, Err(e)) => return (false, e.to_string()),
            }
        }
        (worst <= 1e-9, format!("max |ΔP| = {worst:e} over {} configurations", opts.configurations))
    }));

    let scans: Vec<_> = Fig2Variant::ALL.iter().map(|&v| run_fig2(v, &cfg)).collect();

    out.push(timed("normalization on shipped scans", || {
        let mut worst = 0.0f64;
        for r in &scans {
            match r {
                Ok(r) => {
                    for p in &r.scan.points {
                        worst = worst.max((p.total - 1.0).abs());
                    }
                }
                Err(e) => return (false, e.to_string()),
            }
        }
        (worst <= 1e-10, format!("max |ΣP − 1| = {worst:e}"))
    }));

    out.push(timed("envelope FWHM doubling", || match (&scans[0], &scans[1]) {
        (Ok(a), Ok(b)) => {
            let ratio = b.fwhm_m / a.fwhm_m;
            ((ratio - 2.0).abs() <= 0.02, format!("FWHM ratio {ratio}"))
        }
        _ => (false, "scan failed".into()),
    }));

    out.push(timed("witness threshold", || {
        let mut bad = 0;
        for i in 0..=100 {
            for j in 0..=100 {
                let (zz, xx) = (i as f64 / 100.0, j as f64 / 100.0);
                if (witness_value(zz, xx) < 0.0) != (zz + xx > 1.0) {
                    bad += 1;
                }
            }
        }
        let edge = witness_value(1.0, 0.0) == 0.0 && witness_value(0.990, 0.712) < 0.0 && witness_value(0.5, 0.4) > 0.0;
        (bad == 0 && edge, format!("{bad} mismatches on the 101×101 grid"))
    }));

    out
}

/// Beam-splitter block with a slightly lossy transmitted amplitude; used as
/// a negative control for the unitarity check.
pub fn perturbed_block(reflectivity: f64, phase: f64) -> Block2 {
    let mut b = beam_splitter_block(reflectivity, phase);
    b[1][1] *= 1.0 - 1e-6;
    b
}
