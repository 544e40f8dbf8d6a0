//! Acceptance criteria. Every criterion prints one PASS/FAIL line and the
//! process exits non-zero if any criterion failed. Runs without the libtest
//! harness so the report is never captured.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;

use overlap_witness::contextuality::{
    crossover_nu, eta_ideal, eta_nc_bound, h3_robust, hexagon, theta_to_r, worst_case_efficiency,
};
use overlap_witness::graphs::{
    edges, evaluate, evaluate_pure, evaluate_states, hn_plus, make_h_mzi, make_hn, qubit_h4_gap, OverlapSet,
};
use overlap_witness::mesh::{self, AngleNoise, CircuitFamily};
use overlap_witness::optimize::sdp::average_projector;
use overlap_witness::optimize::{
    dimension_thresholds, haar_experiment, maximize_pure_with, sdp_upper_bound, MaximizeConfig, SdpConfig,
    ThresholdConfig,
};
use overlap_witness::state::{haar_random_pure, haar_random_unitary, overlap, DensityMatrix, PureState};
use overlap_witness::Seed;

/// Published maxima of `h_n` for n = 3..=10 (rows) and d = 2..=n (columns).
const TABLE: [&[f64]; 8] = [
    &[1.250, 1.250],
    &[1.000, 1.333, 1.333],
    &[0.250, 1.000, 1.375, 1.375],
    &[-0.999, 0.333, 1.000, 1.400, 1.400],
    &[-2.750, -0.667, 0.375, 1.000, 1.417, 1.417],
    &[-5.000, -2.000, -0.500, 0.400, 1.000, 1.429, 1.417],
    &[-7.750, -3.667, -1.625, -0.400, 0.417, 1.000, 1.428, 1.429],
    &[-11.000, -5.667, -3.000, -1.400, -0.333, 0.429, 1.000, 1.443, 1.437],
];

/// Published cells that are below the true optimum or off by more than the
/// three printed decimals. For these the SDP value is the reference and the
/// computed value only has to be at least the published one.
const FLAGGED: [(usize, usize); 5] = [(8, 8), (9, 8), (9, 9), (10, 9), (10, 10)];

const TABLE_TOL: f64 = 1e-3;
/// The published `h_6`, d = 2 entry is -0.999 against an exact -1.
const H6_D2_TOL: f64 = 2e-3;

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn check(&mut self, id: &str, pass: bool, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id}] {detail}");
        self.lines.push((pass, format!("[{id}] {detail}")));
    }
}

fn table_s1(report: &mut Report) {
    let start = Instant::now();
    let cells = dimension_thresholds(10, 10, &ThresholdConfig::default()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (row, values) in TABLE.iter().enumerate() {
        let n = row + 3;
        for (col, &published) in values.iter().enumerate() {
            let d = col + 2;
            let cell = cells.iter().find(|c| c.n == n && c.d == d).unwrap();
            let value = cell.pure_value.unwrap();
            let ok = if FLAGGED.contains(&(n, d)) {
                let sdp = cell.sdp_value.unwrap();
                (value - sdp).abs() <= TABLE_TOL && value >= published - TABLE_TOL
            } else {
                let tol = if (n, d) == (6, 2) { H6_D2_TOL } else { TABLE_TOL };
                worst = worst.max((value - published).abs());
                (value - published).abs() <= tol
            };
            if !ok {
                failures.push(format!("h{n} d={d}: {value:.6} vs {published}"));
            }
        }
    }
    report.check(
        "1 table",
        failures.is_empty(),
        format!(
            "{} cells, worst unflagged deviation {worst:.2e}, failures {failures:?}",
            cells.len()
        ),
    );
    report.check(
        "1 runtime",
        elapsed < 600.0,
        format!("full table in {elapsed:.1} s (limit 600 s)"),
    );
}

fn sdp_sandwich(report: &mut Report) {
    let sdp = SdpConfig::default();
    let cfg = MaximizeConfig {
        restarts: 24,
        ..MaximizeConfig::default()
    };
    let mut worst_top = 0.0f64;
    let mut worst_one = 0.0f64;
    for n in 4..=19 {
        let spec = make_hn(n).unwrap();
        let top = sdp_upper_bound(n, n - 1, &sdp).unwrap().value;
        let pure = maximize_pure_with(&spec, n - 1, &cfg, Seed(n as u64)).unwrap().value;
        worst_top = worst_top.max((top - pure).abs());
        worst_one = worst_one.max((sdp_upper_bound(n, n - 2, &sdp).unwrap().value - 1.0).abs());
    }
    report.check(
        "2 sandwich d=n-1",
        worst_top <= 1e-3,
        format!("n = 4..19, max |sdp - pure| = {worst_top:.2e} (tol 1e-3)"),
    );
    report.check(
        "2 sandwich d=n-2",
        worst_one <= 1e-4,
        format!("n = 4..19, max |sdp - 1| = {worst_one:.2e} (tol 1e-4)"),
    );

    let mut previous = 1.0;
    let mut increasing = true;
    let mut values = Vec::new();
    let mut worst_one = 0.0f64;
    for n in [32, 64, 128] {
        let top = sdp_upper_bound(n, n - 1, &sdp).unwrap().value;
        increasing &= top > previous && top < 1.5;
        previous = top;
        values.push(top);
        worst_one = worst_one.max((sdp_upper_bound(n, n - 2, &sdp).unwrap().value - 1.0).abs());
    }
    report.check(
        "2 extended",
        increasing && worst_one <= 1e-4,
        format!("d=n-1 values {values:.6?} increasing below 1.5; d=n-2 max |sdp - 1| = {worst_one:.2e}"),
    );
}

fn qubit_theorems(report: &mut Report) {
    let h4 = make_hn(4).unwrap();
    let haar = haar_experiment(&h4, 2, 100_000, Seed(1)).unwrap();
    report.check(
        "3 haar qubit h4",
        haar.max_value <= 1.0 + 1e-9,
        format!("1e5 sets, max {:.12}", haar.max_value),
    );

    let cfg = MaximizeConfig {
        restarts: 1000,
        ..MaximizeConfig::default()
    };
    let opt = maximize_pure_with(&h4, 2, &cfg, Seed(2)).unwrap();
    let opt_max = opt.restart_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    report.check(
        "3 optimized qubit h4",
        opt.restart_values.len() == 1000 && opt_max <= 1.0 + 1e-9,
        format!("{} optimized tuples, max {opt_max:.12}", opt.restart_values.len()),
    );

    let grid = 50;
    let mut g_max = f64::NEG_INFINITY;
    for a in 0..grid {
        for b in 0..grid {
            for c in 0..grid {
                let theta = PI * a as f64 / (grid - 1) as f64;
                let alpha = PI * b as f64 / (grid - 1) as f64;
                let phi = 2.0 * PI * c as f64 / (grid - 1) as f64;
                g_max = g_max.max(qubit_h4_gap(theta, alpha, phi));
            }
        }
    }
    report.check(
        "3 gap grid",
        g_max <= 1e-12,
        format!("125000 grid points, max g = {g_max:.3e}"),
    );

    let h6 = make_hn(6).unwrap();
    let r = haar_experiment(&h6, 4, 100_000, Seed(3)).unwrap();
    report.check(
        "3 haar ququart h6",
        r.violation_count == 0,
        format!("1e5 sets, {} violations, max {:.6}", r.violation_count, r.max_value),
    );
}

fn pentagon(report: &mut Report) {
    let spec = make_h_mzi();
    let (s, c) = (PI / 4.0).sin_cos();
    let states: Vec<DensityMatrix> = (0..5)
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / 5.0;
            let psi = PureState::new(vec![Complex64::new(c, 0.0), Complex64::from_polar(s, phi)]).unwrap();
            DensityMatrix::from_pure(&psi)
        })
        .collect();
    let exact = 5.0 * 5f64.sqrt() / 4.0;
    let value = evaluate_states(&spec, &states).unwrap();
    report.check(
        "4 pentagon exact",
        (value - exact).abs() < 1e-9,
        format!("{value:.12} vs 5 sqrt(5)/4 = {exact:.12}"),
    );

    let set = mesh::pentagon_states();
    let mut upper = Vec::new();
    let mut var = 0.0;
    for (k, (i, j)) in edges(5).enumerate() {
        let r = mesh::overlap_via_counts(&set[i], &set[j], 100_000, Seed(4).derive(k as u64), None).unwrap();
        var += spec.weight(i, j).powi(2) * r.sigma().powi(2);
        upper.push(r.estimate());
    }
    let counted = evaluate(&spec, &OverlapSet::new(5, upper).unwrap()).unwrap();
    let sigma = var.sqrt();
    report.check(
        "4 pentagon counts",
        (counted - exact).abs() < 3.0 * sigma,
        format!("{counted:.5} +- {sigma:.5} (1e5 trials per overlap), within 3 sigma of {exact:.5}"),
    );
}

fn interrogation(report: &mut Report) {
    let theta = 5.0 * PI / 6.0;
    let eta = eta_ideal(theta_to_r(theta)).unwrap();
    report.check(
        "5 eta ideal",
        (eta - 0.428571).abs() < 1e-6,
        format!("{eta:.7} vs 0.428571"),
    );

    let nc0 = eta_nc_bound(theta, 0.0).unwrap();
    report.check(
        "5 eta nc nu=0",
        (nc0 - 0.285714).abs() < 1e-4,
        format!("{nc0:.6} vs 0.285714"),
    );

    let nu_star = crossover_nu(theta).unwrap();
    report.check(
        "5 crossover",
        (nu_star - 0.057).abs() <= 1e-3,
        format!("crossover at nu = {nu_star:.6} vs 0.057 +- 1e-3"),
    );

    // The robustness rows are the efficiency that survives both the quantum
    // prediction and the classical bound; the published 0.057 is the
    // crossover rounded to three decimals.
    let robust = worst_case_efficiency(theta, nu_star).unwrap();
    let literal = worst_case_efficiency(theta, 0.057).unwrap();
    report.check(
        "5 robust row",
        (robust - 0.419385).abs() < 1e-4,
        format!("{robust:.6} at the crossover vs 0.419385 ({literal:.6} at nu = 0.057 literally)"),
    );
    for (nu, expected) in [(0.112, 0.410757), (0.333, 0.379353)] {
        let v = worst_case_efficiency(theta, nu).unwrap();
        report.check(
            &format!("5 row nu={nu}"),
            (v - expected).abs() < 1e-4,
            format!("{v:.6} vs {expected}"),
        );
    }

    let h3 = h3_robust(&hexagon(theta, 0.0).unwrap()).unwrap();
    report.check("5 h3 robust", (h3 - 1.25).abs() <= 1e-12, format!("{h3:.15} vs 1.25"));
}

fn mesh_checks(report: &mut Report) {
    let mut rng = Seed(6).rng();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let u = haar_random_unitary(6, &mut rng);
        let back = mesh::compose(&mesh::decompose(&u).unwrap()).unwrap();
        let inner: Complex64 = u.iter().zip(back.iter()).map(|(a, b)| b.conj() * a).sum();
        let phase = inner / inner.norm();
        worst = worst.max((&u - back.map(|z| z * phase)).norm());
    }
    report.check(
        "6 clements",
        worst < 1e-9,
        format!("100 Haar 6x6, max Frobenius error {worst:.2e}"),
    );

    let truth = mesh::synthetic_model(6, Seed(6)).unwrap();
    for (label, points, noise, scale) in [("noiseless", 200, 0.0, 1.0), ("1% noise", 400, 0.01, 5.0)] {
        let sweeps = mesh::simulate_all_sweeps(&truth, 0.035, points, noise, Seed(60)).unwrap();
        let fit = mesh::calibration_fit(&sweeps, &truth.columns).unwrap();
        let e = mesh::recovery_error(&truth, &fit).unwrap();
        let ok = e.theta0 <= 1e-3 * scale && e.alpha <= 1e-3 * scale && e.beta <= 1e-2 * scale;
        report.check(
            &format!("6 calibration {label}"),
            ok,
            format!(
                "theta0 {:.2e} rad (tol {:.0e}), alpha {:.3}% (tol {:.1}%), beta {:.2}% (tol {:.0}%)",
                e.theta0,
                1e-3 * scale,
                100.0 * e.alpha,
                0.1 * scale,
                100.0 * e.beta,
                scale
            ),
        );
    }

    let study = mesh::perturbed_mesh_study(6, 100, mesh::DEFAULT_PHASE_SIGMA, Seed(7)).unwrap();
    report.check(
        "6 fidelity",
        (0.991..=0.999).contains(&study.mean),
        format!("mean fidelity {:.5} over 100 Haar 6x6", study.mean),
    );
}

fn dispersion(report: &mut Report) {
    let spec = make_hn(5).unwrap();
    let set = mesh::hn_simplex_states(5).unwrap();
    let params: Vec<Vec<f64>> = set
        .iter()
        .map(|s| CircuitFamily::Ququart.params_from_state(s).unwrap())
        .collect();
    let mut var = 0.0;
    for (k, (i, j)) in edges(5).enumerate() {
        let r = mesh::overlap_via_counts(&set[i], &set[j], 100_000, Seed(8).derive(k as u64), None).unwrap();
        var += spec.weight(i, j).powi(2) * r.sigma().powi(2);
    }
    let sigma_c = var.sqrt();
    for (label, noise) in [
        ("eps=0.005", AngleNoise::new(0.005, 0.0).unwrap()),
        ("delta=0.5deg", AngleNoise::new(0.0, 0.5).unwrap()),
    ] {
        let d = mesh::dispersion(&spec, CircuitFamily::Ququart, &params, &noise, 2000, Seed(9)).unwrap();
        report.check(
            &format!("7 dispersion {label}"),
            d.half_width > 2.5 * sigma_c,
            format!("half-width {:.4} vs 2.5 sigma_c = {:.4}", d.half_width, 2.5 * sigma_c),
        );
    }
}

fn states(n: usize, d: usize, seed: Seed) -> Vec<PureState> {
    (0..n)
        .map(|k| haar_random_pure(d, seed.derive(k as u64)).unwrap())
        .collect()
}

fn property_suite(seed: u64) -> Vec<String> {
    let mut failures = Vec::new();
    let root = Seed(seed);
    for case in 0..200u64 {
        let s = root.derive(case);
        let n = 3 + (case % 7) as usize;
        let d = 2 + (case % 4) as usize;
        let spec = make_hn(n).unwrap();

        let psi = states(n, d, s);
        let rhos: Vec<DensityMatrix> = psi.iter().map(DensityMatrix::from_pure).collect();
        for i in 0..n {
            for j in 0..n {
                let a = overlap(&rhos[i], &rhos[j]).unwrap();
                if a != overlap(&rhos[j], &rhos[i]).unwrap() || !(-1e-12..=1.0 + 1e-12).contains(&a) {
                    failures.push(format!("overlap symmetry/range, case {case}"));
                }
            }
        }

        if n >= 4 {
            let small = make_hn(n - 1).unwrap();
            for (i, j) in edges(n) {
                let expected = if j < n - 1 {
                    small.weight(i, j)
                } else if i == 0 {
                    1.0
                } else {
                    -1.0
                };
                if spec.weight(i, j) != expected {
                    failures.push(format!("recursion, n = {n}"));
                }
            }
        }

        // Multilinearity: mixing one node is the weighted sum over its components.
        let other = haar_random_pure(d, s.derive(1000)).unwrap();
        let w = 0.3;
        let mut mixed = rhos.clone();
        mixed[0] = DensityMatrix::mixture(&[w, 1.0 - w], &[psi[0].clone(), other.clone()]).unwrap();
        let mut swapped = psi.clone();
        swapped[0] = other;
        let lhs = evaluate_states(&spec, &mixed).unwrap();
        let rhs = w * evaluate_pure(&spec, &psi).unwrap() + (1.0 - w) * evaluate_pure(&spec, &swapped).unwrap();
        if (lhs - rhs).abs() > 1e-12 {
            failures.push(format!("multilinearity, case {case}"));
        }

        let r = OverlapSet::from_pure(&psi).unwrap();
        let x = average_projector(&psi).unwrap();
        let tr_x2: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let nf = n as f64;
        if (hn_plus(&r) - (nf * nf / 2.0 * tr_x2 - nf / 2.0)).abs() > 1e-10 {
            failures.push(format!("h_n^+ Gram identity, case {case}"));
        }
        if n >= 4 {
            let rest: Vec<usize> = (1..n).collect();
            let h = evaluate(&spec, &r).unwrap();
            let split = hn_plus(&r) - 2.0 * hn_plus(&r.restrict(&rest).unwrap());
            if (h - split).abs() > 1e-10 {
                failures.push(format!("h_n split identity, case {case}"));
            }
        }
    }
    let spec = make_hn(5).unwrap();
    if haar_experiment(&spec, 3, 1000, root).unwrap() != haar_experiment(&spec, 3, 1000, root).unwrap() {
        failures.push("determinism".into());
    }
    failures
}

fn properties(report: &mut Report) {
    for seed in [1, 2, 3] {
        let failures = property_suite(seed);
        report.check(
            &format!("8 properties seed {seed}"),
            failures.is_empty(),
            format!("200 cases, {} failures {:?}", failures.len(), failures),
        );
    }
}

fn main() -> ExitCode {
    let mut report = Report { lines: Vec::new() };
    table_s1(&mut report);
    sdp_sandwich(&mut report);
    qubit_theorems(&mut report);
    pentagon(&mut report);
    interrogation(&mut report);
    mesh_checks(&mut report);
    dispersion(&mut report);
    properties(&mut report);
    let failed: Vec<&String> = report.lines.iter().filter(|(ok, _)| !ok).map(|(_, l)| l).collect();
    println!(
        "{} of {} criteria passed",
        report.lines.len() - failed.len(),
        report.lines.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed criteria: {failed:#?}");
        ExitCode::FAILURE
    }
}
