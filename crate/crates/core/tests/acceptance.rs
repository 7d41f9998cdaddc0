//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p ququad --test acceptance`.

use std::f64::consts::{LN_2, PI};
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use ququad::analysis::witness_value;
use ququad::coincidence::{
    coincidence_probability, cross_term_carrier_frequency, quadrature_probability, CoincidenceTable, Overlap,
    ScanSpec, ScanVariable,
};
use ququad::config::ExperimentConfig;
use ququad::detection::{expected_rates, simulate_replicates, RateModel};
use ququad::optics::{default_network, OpticalElement, OpticalNetwork, SPEED_OF_LIGHT};
use ququad::scenarios::{run_fig2, run_fig3, run_snr_sweep, run_visibility_matrix, Fig2Variant, Fig3Trace};
use ququad::spectral::SpectralModel;
use ququad::state::TwoPhotonPathState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

type Check = fn() -> Result<Outcome, ququad::Error>;

// ---- independent spectral oracle -------------------------------------------

type M4 = [[Complex64; 4]; 4];

fn identity() -> M4 {
    let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    m
}

fn mul(x: &M4, y: &M4) -> M4 {
    let mut out = [[Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| x[i][k] * y[k][j]).sum();
        }
    }
    out
}

/// Frequency-resolved transfer matrix rebuilt from the element list. Photon A
/// sits at `ω₀ + ν`, photon B at `ω₀ − ν`.
fn oracle_transfer(els: &[OpticalElement], lambda: f64, sign: f64, nu: f64) -> M4 {
    let omega = 2.0 * PI * SPEED_OF_LIGHT / lambda + sign * nu;
    let mut t = identity();
    for el in els {
        let mut m = identity();
        match *el {
            OpticalElement::BeamSplitter { mode_x, mode_y, reflectivity, phase } => {
                let tr = (1.0 - reflectivity).sqrt();
                let r = reflectivity.sqrt();
                m[mode_x][mode_x] = Complex64::new(tr, 0.0);
                m[mode_y][mode_y] = Complex64::new(tr, 0.0);
                m[mode_x][mode_y] = Complex64::new(-r * phase.sin(), r * phase.cos());
                m[mode_y][mode_x] = Complex64::new(r * phase.sin(), r * phase.cos());
            }
            OpticalElement::Delay { mode, length_m } => {
                let ph = omega * length_m / SPEED_OF_LIGHT;
                m[mode][mode] = Complex64::new(ph.cos(), ph.sin());
            }
            OpticalElement::PhaseShift { mode, phase } => {
                m[mode][mode] = Complex64::new(phase.cos(), phase.sin());
            }
        }
        t = mul(&m, &t);
    }
    t
}

/// Trapezoid rule over ±12σ of the Gaussian pair spectrum.
fn oracle_probability(
    amps: &[Complex64; 4],
    a: &[OpticalElement],
    b: &[OpticalElement],
    lambda: f64,
    bandwidth: f64,
    overlap: &[[f64; 4]; 4],
) -> [[f64; 4]; 4] {
    let fwhm = 2.0 * PI * SPEED_OF_LIGHT * bandwidth / (lambda * lambda);
    let sigma = fwhm / (8.0 * LN_2).sqrt();
    let n = 4001;
    let h = 24.0 * sigma / (n - 1) as f64;
    let slot_a = [0, 1, 2, 3];
    let slot_b = [3, 2, 1, 0];
    let mut p = [[0.0; 4]; 4];
    for s in 0..n {
        let nu = -12.0 * sigma + s as f64 * h;
        let w = h * (-(nu * nu) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
        let ta = oracle_transfer(a, lambda, 1.0, nu);
        let tb = oracle_transfer(b, lambda, -1.0, nu);
        for (x, row) in p.iter_mut().enumerate() {
            for (y, cell) in row.iter_mut().enumerate() {
                let u: Vec<Complex64> = (0..4).map(|j| amps[j] * ta[x][slot_a[j]] * tb[y][slot_b[j]]).collect();
                let mut acc = 0.0;
                for j in 0..4 {
                    for k in 0..4 {
                        acc += overlap[j][k] * (u[j] * u[k].conj()).re;
                    }
                }
                *cell += w * acc;
            }
        }
    }
    p
}

fn sample_elements(rng: &mut ChaCha8Rng, max_delay: f64) -> Vec<OpticalElement> {
    (0..rng.random_range(0..=6))
        .map(|_| match rng.random_range(0..4) {
            0 | 1 => {
                let x = rng.random_range(0..4);
                let y = (x + rng.random_range(1..4)) % 4;
                OpticalElement::BeamSplitter {
                    mode_x: x,
                    mode_y: y,
                    reflectivity: rng.random(),
                    phase: rng.random_range(-PI..PI),
                }
            }
            2 => OpticalElement::Delay { mode: rng.random_range(0..4), length_m: rng.random_range(-max_delay..max_delay) },
            _ => OpticalElement::PhaseShift { mode: rng.random_range(0..4), phase: rng.random_range(-PI..PI) },
        })
        .collect()
}

fn sample_overlap(rng: &mut ChaCha8Rng) -> Overlap {
    loop {
        let o = if rng.random::<bool>() {
            Overlap::uniform(rng.random())
        } else {
            Overlap::per_arm(rng.random(), rng.random(), rng.random())
        };
        if let Ok(o) = o {
            return o;
        }
    }
}

fn max_diff(t: &CoincidenceTable, p: &[[f64; 4]; 4]) -> f64 {
    let mut m: f64 = 0.0;
    for (a, row) in p.iter().enumerate() {
        for (b, &v) in row.iter().enumerate() {
            m = m.max((t.get(a, b) - v).abs());
        }
    }
    m
}

// ---- parameter-free criteria -----------------------------------------------

fn engine_equivalence() -> Result<Outcome, ququad::Error> {
    let start = Instant::now();
    let model = SpectralModel::default();
    let lc = model.center_wavelength_m.powi(2) / model.bandwidth_m;
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let (mut vs_quadrature, mut vs_oracle) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let els_a = sample_elements(&mut rng, 0.5 * lc);
        let els_b = sample_elements(&mut rng, 0.5 * lc);
        let amps: [Complex64; 4] =
            std::array::from_fn(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let amps = amps.map(|c| c / norm);
        let state = TwoPhotonPathState::from_amplitudes(amps)?;
        let overlap = sample_overlap(&mut rng);
        let a = OpticalNetwork::new(4, els_a.clone())?;
        let b = OpticalNetwork::new(4, els_b.clone())?;
        let analytic = coincidence_probability(&state, &a, &b, &model, &overlap)?;
        let quad = quadrature_probability(&state, &a, &b, &model, &overlap, 512)?;
        vs_quadrature = vs_quadrature.max(analytic.max_abs_diff(&quad));
        let oracle = oracle_probability(&amps, &els_a, &els_b, model.center_wavelength_m, model.bandwidth_m, &overlap.matrix());
        vs_oracle = vs_oracle.max(max_diff(&analytic, &oracle));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        vs_quadrature <= 1e-9 && vs_oracle <= 1e-9 && secs < 30.0,
        format!(
            "max|ΔP| analytic vs quadrature {vs_quadrature:.1e}, vs trapezoid oracle {vs_oracle:.1e} (tol 1e-9); {secs:.1} s (limit 30 s)"
        ),
    ))
}

fn normalization() -> Result<Outcome, ququad::Error> {
    let cfg = ExperimentConfig::calibrated();
    let mut worst = 0.0f64;
    let mut points = 0;
    for v in Fig2Variant::ALL {
        let st = cfg.state.state().restricted(v.active_paths())?;
        let spec = ScanSpec::symmetric(v.variable(), cfg.fig2.half_range_m, cfg.fig2.steps);
        for d in spec.deltas() {
            let pair = default_network(&v.variable().apply(&cfg.interferometer, d))?;
            let t = coincidence_probability(&st, &pair.a, &pair.b, &cfg.spectral, &cfg.fig2.overlap)?;
            worst = worst.max((t.total() - 1.0).abs());
            points += 1;
        }
        for p in &run_fig2(v, &cfg)?.scan.points {
            worst = worst.max((p.total - 1.0).abs());
        }
    }
    for t in Fig3Trace::ALL {
        let st = cfg.state.state().restricted(t.active_paths())?;
        let pair = default_network(&t.settings(&cfg))?;
        let tab = coincidence_probability(&st, &pair.a, &pair.b, &cfg.spectral, &cfg.fig3.overlap)?;
        worst = worst.max((tab.total() - 1.0).abs());
        points += 1;
    }
    Ok(outcome(worst <= 1e-10, format!("max|ΣP − 1| = {worst:.1e} over {points} points (tol 1e-10)")))
}

fn fwhm_doubling() -> Result<Outcome, ququad::Error> {
    let cfg = ExperimentConfig::calibrated();
    let a = run_fig2(Fig2Variant::A, &cfg)?.fwhm_m;
    let b = run_fig2(Fig2Variant::B, &cfg)?.fwhm_m;
    // Envelope exp(−σ²δ²/2c²) in the single-delay scan has FWHM 2√(2ln2)·c/σ.
    let sigma = 2.0 * PI * SPEED_OF_LIGHT * cfg.spectral.bandwidth_m / cfg.spectral.center_wavelength_m.powi(2)
        / (8.0 * LN_2).sqrt();
    let expected_b = (8.0 * LN_2).sqrt() * SPEED_OF_LIGHT / sigma;
    let ratio = b / a;
    let ok = (ratio - 2.0).abs() <= 0.02 && (b / expected_b - 1.0).abs() <= 0.01;
    Ok(outcome(
        ok,
        format!(
            "FWHM Δx1 {:.2} µm, Δx3 {:.2} µm (oracle {:.2} µm), ratio {ratio:.4} (2.00 ± 1%)",
            a * 1e6,
            b * 1e6,
            expected_b * 1e6
        ),
    ))
}

fn self_stabilization() -> Result<Outcome, ququad::Error> {
    let cfg = ExperimentConfig::calibrated();
    let base = &cfg.interferometer;
    let st = cfg.state.state();
    let k0 = 2.0 * PI / base.wavelength_m;
    let (mut f1, mut f3) = (0.0f64, 0.0f64);
    for &d in &[-100e-6, -20e-6, 0.0, 35e-6, 120e-6] {
        f1 = f1.max(cross_term_carrier_frequency(&st, base, ScanVariable::DeltaX1, (2, 3), d, 1e-6)?.abs());
        let f = cross_term_carrier_frequency(&st, base, ScanVariable::DeltaX3, (1, 4), d, 1e-6)?;
        f3 = f3.max((f.abs() - k0).abs() / k0);
    }
    Ok(outcome(
        f1 == 0.0 && f3 <= 1e-9,
        format!("Δx1 carrier {f1:e} rad/m (exactly 0); Δx3 carrier relative error to 2π/λ0 {f3:.1e} (tol 1e-9)"),
    ))
}

fn witness_threshold() -> Result<Outcome, ququad::Error> {
    let mut mismatches = 0;
    for i in 0..=100 {
        for j in 0..=100 {
            let (zz, xx) = (i as f64 / 100.0, j as f64 / 100.0);
            if (witness_value(zz, xx) < 0.0) != (zz + xx > 1.0) {
                mismatches += 1;
            }
        }
    }
    Ok(outcome(mismatches == 0, format!("{mismatches} mismatches on the 101×101 grid")))
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn snr_scaling() -> Result<Outcome, ququad::Error> {
    let cfg = ExperimentConfig::calibrated();
    let ns = [1u32, 2, 4, 8, 16];
    let r = run_snr_sweep(&cfg, Some(&ns))?;
    let x: Vec<f64> = ns.iter().map(|&n| f64::from(n).ln()).collect();
    let t = slope(&x, &r.rows.iter().map(|row| row.true_hz.ln()).collect::<Vec<_>>());
    let a = slope(&x, &r.rows.iter().map(|row| row.accidental_hz.ln()).collect::<Vec<_>>());
    let ok = (t - 1.0).abs() <= 0.01
        && (a - 2.0).abs() <= 0.01
        && (r.true_slope - t).abs() < 1e-12
        && (r.accidental_slope - a).abs() < 1e-12;
    Ok(outcome(ok, format!("slopes true {t:.4} (1.00 ± 0.01), accidental {a:.4} (2.00 ± 0.01)")))
}

fn monte_carlo() -> Result<Outcome, ququad::Error> {
    let cfg = ExperimentConfig::calibrated();
    let st = cfg.state.state();
    let pair = default_network(&cfg.interferometer)?;
    let table = coincidence_probability(&st, &pair.a, &pair.b, &cfg.spectral, &cfg.fig2.overlap)?;
    let rates = expected_rates(&table, &cfg.rates, 4)?;
    let (da, db) = cfg.interferometer.detector_slots();
    let pr = rates.pair(da, db);
    let n = 1000u64;
    let reps = simulate_replicates(&pr, &cfg.rates, 99, n)?;
    let t = cfg.rates.acquisition_s;
    let checks = [
        ("singles A", pr.singles_a_hz * t, reps.iter().map(|r| r.singles_a as f64).collect::<Vec<_>>()),
        ("singles B", pr.singles_b_hz * t, reps.iter().map(|r| r.singles_b as f64).collect()),
        ("true", pr.true_coinc_hz * t, reps.iter().map(|r| r.true_coinc as f64).collect()),
        ("accidental", pr.accidental_hz * t, reps.iter().map(|r| r.accidental_coinc as f64).collect()),
    ];
    let mut worst = 0.0f64;
    for (_, lambda, xs) in &checks {
        let mean = xs.iter().sum::<f64>() / n as f64;
        worst = worst.max((mean - lambda).abs() / (lambda / n as f64).sqrt());
    }
    let again = simulate_replicates(&pr, &cfg.rates, 99, n)?;
    let fig3_a = serde_json::to_vec(&run_fig3(&cfg)?).expect("serializable");
    let fig3_b = serde_json::to_vec(&run_fig3(&cfg)?).expect("serializable");
    let identical = again == reps && fig3_a == fig3_b;
    Ok(outcome(
        worst <= 4.0 && identical,
        format!("worst |mean − λ| = {worst:.2}σ over {n} replicates (limit 4σ); reruns identical: {identical}"),
    ))
}

// ---- calibrated reproductions ----------------------------------------------

fn standard_basis() -> Result<Outcome, ququad::Error> {
    let cfg = ExperimentConfig::calibrated();
    let r = run_visibility_matrix(&cfg)?;
    let eps = cfg.matrix.crosstalk;
    let ideal = (1.0 - eps) / (1.0 + eps);
    let v = r.v_zz.value;
    Ok(outcome(
        (v - 0.990).abs() <= 0.005 && eps == 0.005,
        format!("V_zz = {v:.4} ± {:.4} (0.990 ± 0.005), noiseless {ideal:.4}, crosstalk {eps}", r.v_zz.uncertainty),
    ))
}

fn fig2_visibilities() -> Result<Outcome, ququad::Error> {
    let cfg = ExperimentConfig::calibrated();
    let targets = [(Fig2Variant::A, 0.73), (Fig2Variant::B, 0.80), (Fig2Variant::C, 0.80)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (v, target) in targets {
        let got = run_fig2(v, &cfg)?.visibility.value;
        ok &= (got - target).abs() <= 0.03;
        parts.push(format!("{} {got:.3} ({target:.2} ± 0.03)", v.name()));
    }
    Ok(outcome(ok, parts.join(", ")))
}

fn fig3_enhancement() -> Result<Outcome, ququad::Error> {
    let cfg = ExperimentConfig::calibrated();
    let r = run_fig3(&cfg)?;
    let peak = r.trace(Fig3Trace::Full).fit.upper();
    let base = r.trace(Fig3Trace::NoBs2).fit.upper();
    let v = r.enhancement.value;
    let ok = (peak / 1130.0 - 1.0).abs() <= 0.05 && (base / 660.0 - 1.0).abs() <= 0.05 && (v - 0.71).abs() <= 0.04;
    Ok(outcome(
        ok,
        format!(
            "fitted upper envelopes {peak:.0} / {base:.0} (1130 / 660 ± 5%), enhancement {v:.3} (0.71 ± 0.04); raw maxima {} / {}",
            r.trace(Fig3Trace::Full).raw_max,
            r.trace(Fig3Trace::NoBs2).raw_max
        ),
    ))
}

fn rate_bookkeeping() -> Result<Outcome, ququad::Error> {
    let cfg = ExperimentConfig::calibrated();
    let rm: &RateModel = &cfg.rates;
    let r = run_snr_sweep(&cfg, Some(&[1]))?;
    let row = r.rows[0];
    let singles = rm.pair_rate_hz * rm.coupling_efficiency * rm.detector_efficiency * rm.transmission;
    let coinc = singles * rm.coupling_efficiency * rm.detector_efficiency * rm.transmission;
    let acc = singles * singles * rm.coincidence_window_s;
    let ratio = row.true_hz / singles;
    let ok = (row.true_hz - 7000.0).abs() <= 70.0
        && (coinc - row.true_hz).abs() < 1e-9
        && (ratio - 0.10).abs() <= 0.01
        && (singles - 7.0e4).abs() <= 700.0
        && (row.accidental_hz - 34.3).abs() <= 0.343
        && (acc - row.accidental_hz).abs() < 1e-9
        && rm.coincidence_window_s == 7e-9;
    Ok(outcome(
        ok,
        format!(
            "coincidences {:.1}/s, singles {singles:.0}/s, ratio {ratio:.4} (0.10 ± 0.01), accidentals {:.3}/s (34.3 ± 1%)",
            row.true_hz, row.accidental_hz
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 11] = [
        ("engine equivalence", engine_equivalence),
        ("normalization", normalization),
        ("FWHM doubling", fwhm_doubling),
        ("self-stabilization", self_stabilization),
        ("witness threshold", witness_threshold),
        ("SNR scaling", snr_scaling),
        ("Monte Carlo consistency", monte_carlo),
        ("standard-basis visibility", standard_basis),
        ("delay-scan visibilities", fig2_visibilities),
        ("drift-trace enhancement", fig3_enhancement),
        ("rate bookkeeping", rate_bookkeeping),
    ];
    let mut failed = 0;
    let mut calibrated_s = 0.0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        if i >= 7 {
            calibrated_s += secs;
        }
        if !o.passed {
            failed += 1;
        }
        println!("{:>2} {:<28} {} {:>7.2}s  {}", i + 1, name, if o.passed { "PASS" } else { "FAIL" }, secs, o.detail);
    }
    let budget_ok = calibrated_s < 300.0;
    if !budget_ok {
        failed += 1;
    }
    println!("calibrated reproductions took {calibrated_s:.2}s (limit 300 s)");
    println!("{} of {} criteria passed", criteria.len() - failed.min(criteria.len()), criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
