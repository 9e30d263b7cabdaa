//! Acceptance criteria, one line each.
//!
//! Criteria listed in `KNOWN_RED` are implemented as stated and are known not
//! to hold for this implementation; they print FAIL without failing the run.
//! Any other failure exits nonzero. A known-red criterion that passes is
//! reported so the list can be updated.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use delamina::constructions::{branched_blister, lift_to_3d, mollified_tent, tent_folds};
use delamina::energies::{bonded_energy, energy_3d, eikonal_energy, fold_energy, fvk_energy};
use delamina::optimize::{check_gradient, perturb};
use delamina::scaling::{
    fit_power_law, log_space, lower_bound_value, phase_diagram, run_sweep, upper_bound_value, Regime, SweepMode,
    SweepPoint, SweepRecord, SweepSpec,
};
use delamina::stability::{buckling_estimate, compare_to_experiment, critical_strain, StabilityParams, EXPERIMENT_STRAIN};
use delamina::fields::EdgeCondition;
use delamina::{BoundarySpec, EnergyParams, FunctionalKind, Grid, ScalarField, State, VectorField2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KNOWN_RED: [usize; 4] = [4, 7, 9, 10];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within_budget(o: Outcome, elapsed: Duration, budget: Duration) -> Outcome {
    if elapsed <= budget {
        o
    } else {
        outcome(false, format!("{}; runtime {:.1?} over {:.0?}", o.detail, elapsed, budget))
    }
}

fn points(list: &[(f64, f64)]) -> Vec<SweepPoint> {
    list.iter().map(|&(sigma, gamma)| SweepPoint { sigma, gamma }).collect()
}

fn totals(records: &[SweepRecord]) -> Option<Vec<(f64, f64, f64)>> {
    records.iter().map(|r| Some((r.sigma, r.gamma, r.total()?))).collect()
}

fn random_smooth(g: Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    let c: Vec<f64> = (0..9).map(|_| rng.random_range(-0.5..0.5)).collect();
    ScalarField::from_fn(g, |x, y| {
        let mut v = 0.0;
        for m in 0..3 {
            for n in 0..3 {
                v += c[3 * m + n] * ((m + 1) as f64 * std::f64::consts::PI * x).sin() * ((n + 1) as f64 * std::f64::consts::PI * y).cos();
            }
        }
        v
    })
}

fn c1_flat() -> Outcome {
    let g = Grid::unit(64).unwrap();
    let z = State::zeros(g);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let s = 10f64.powf(rng.random_range(-4.0..0.0));
        let gm = 10f64.powf(rng.random_range(-4.0..4.0));
        let e = bonded_energy(&z.u, &z.w, s, gm, 1e-6).unwrap().total;
        worst = worst.max((e - 2.0).abs());
    }
    outcome(worst <= 1e-10, format!("max |E - 2| = {worst:.1e}"))
}

fn c2_identity() -> Outcome {
    let g = Grid::unit(128).unwrap();
    let u = VectorField2::zeros(g);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let w = random_smooth(g, &mut rng);
        let s = 10f64.powf(rng.random_range(-3.0..0.0));
        let f = fvk_energy(&u, &w, s).unwrap().total;
        let e = eikonal_energy(&w, s).unwrap().total;
        worst = worst.max(((f - e) - 1.0).abs() / f);
    }
    outcome(worst <= 1e-10, format!("max relative error {worst:.1e}"))
}

fn c3_fold() -> Outcome {
    let e = fold_energy(&tent_folds(&Grid::unit(8).unwrap()));
    let err = (e - 8.0 / 3.0).abs();
    outcome(err <= 1e-12, format!("fold energy {e:.15}, error {err:.1e}"))
}

fn c4_blister() -> (Outcome, Vec<(f64, f64, f64)>) {
    let g = Grid::unit(1024).unwrap();
    let mut data = Vec::new();
    for s in [0.04, 0.02, 0.01] {
        let c = match branched_blister(&g, s) {
            Ok(c) => c,
            Err(e) => return (outcome(false, format!("sigma {s}: {e}")), data),
        };
        data.push((s, 1e-3, fvk_energy(&c.u, &c.w, s).unwrap().total));
    }
    let fit = fit_power_law(&data.iter().map(|p| (p.0, p.2)).collect::<Vec<_>>()).unwrap();
    let energies: Vec<String> = data.iter().map(|p| format!("{:.3}", p.2)).collect();
    (
        outcome((fit.slope - 1.0).abs() <= 0.15, format!("slope {:.3} (target 1 ± 0.15); E = {}", fit.slope, energies.join(", "))),
        data,
    )
}

fn c5_laminate() -> (Outcome, Vec<(f64, f64, f64)>) {
    // Along γ = 1.25 σ^{-4/9}, inside regime B, with σγ over one decade.
    let pts: Vec<(f64, f64)> = log_space(0.004, 0.04, 5)
        .into_iter()
        .map(|x| {
            let s = (x / 1.25f64).powf(1.8);
            (s, x / s)
        })
        .collect();
    let spec = SweepSpec { points: points(&pts), grid: 32, ..SweepSpec::default() };
    let res = run_sweep(&spec).unwrap();
    let Some(data) = totals(&res.records) else {
        return (outcome(false, "a laminate point failed"), vec![]);
    };
    let wrong: Vec<_> = res.records.iter().filter(|r| r.regime != Regime::B).collect();
    if !wrong.is_empty() {
        return (outcome(false, "a point left regime B"), data);
    }
    let fit = fit_power_law(&data.iter().map(|p| (p.0 * p.1, p.2)).collect::<Vec<_>>()).unwrap();
    (outcome((fit.slope - 0.4).abs() <= 0.08, format!("slope {:.3} (target 0.40 ± 0.08)", fit.slope)), data)
}

fn c6_tubes() -> (Outcome, Vec<(f64, f64, f64)>) {
    let mut pts: Vec<(f64, f64)> = log_space(1e-4, 1e-3, 5).into_iter().map(|s| (s, 1.0)).collect();
    pts.extend(log_space(1.0, 10.0, 5).into_iter().map(|g| (1e-4, g)));
    let spec = SweepSpec { points: points(&pts), grid: 1024, ..SweepSpec::default() };
    let res = run_sweep(&spec).unwrap();
    let Some(data) = totals(&res.records) else {
        return (outcome(false, "a tube point failed"), vec![]);
    };
    if res.records.iter().any(|r| r.regime != Regime::C) {
        return (outcome(false, "a point left regime C"), data);
    }
    let fs = fit_power_law(&data[..5].iter().map(|p| (p.0, p.2)).collect::<Vec<_>>()).unwrap();
    let fg = fit_power_law(&data[5..].iter().map(|p| (p.1, p.2)).collect::<Vec<_>>()).unwrap();
    let pass = (fs.slope - 0.5).abs() <= 0.1 && (fg.slope - 0.625).abs() <= 0.1;
    (
        outcome(pass, format!("sigma slope {:.3} (0.50 ± 0.10), gamma slope {:.3} (0.625 ± 0.10)", fs.slope, fg.slope)),
        data,
    )
}

fn c7_sandwich(by_regime: &[(Regime, Vec<(f64, f64, f64)>)]) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (regime, data) in by_regime {
        if data.is_empty() {
            pass = false;
            parts.push(format!("{regime}: no data"));
            continue;
        }
        // lower ≤ E/c ≤ upper for one c  ⇔  max E/upper ≤ min E/lower
        let hi = data.iter().map(|&(s, g, e)| e / upper_bound_value(s, g).unwrap()).fold(f64::NEG_INFINITY, f64::max);
        let lo = data.iter().map(|&(s, g, e)| e / lower_bound_value(s, g).unwrap()).fold(f64::INFINITY, f64::min);
        let ok = hi <= lo;
        pass &= ok;
        if ok {
            parts.push(format!("{regime}: c = {:.3}", (hi * lo).sqrt()));
        } else {
            parts.push(format!("{regime}: no constant ({hi:.3} > {lo:.3})"));
        }
    }
    let spec = SweepSpec {
        points: points(&[(0.04, 1e-3), (0.01, 10.0), (0.005, 1.0), (0.2, 100.0)]),
        grid: 64,
        mode: SweepMode::ConstructMinimize,
        minimize_iterations: 30,
        ..SweepSpec::default()
    };
    let res = run_sweep(&spec).unwrap();
    let monotone = res
        .records
        .iter()
        .filter(|r| r.is_ok())
        .all(|r| r.minimized && r.total().unwrap() <= r.constructed_total.unwrap());
    pass &= monotone;
    parts.push(format!("minimized <= constructed: {monotone}"));
    outcome(pass, parts.join("; "))
}

fn c8_phase() -> Outcome {
    let pd = phase_diagram((1e-4, 1e-1), (1e-5, 1e6), 60).unwrap();
    let rank = |r: Regime| match r {
        Regime::D => 0,
        Regime::C => 1,
        Regime::B => 2,
        Regime::A => 3,
    };
    let ordered = pd.labels.iter().all(|col| col.windows(2).all(|w| rank(w[0]) <= rank(w[1])));
    let present: Vec<bool> = Regime::ALL.iter().map(|r| pd.labels.iter().flatten().any(|l| l == r)).collect();
    let every_column = pd.labels.iter().all(|col| Regime::ALL.iter().all(|r| col.contains(r)));
    outcome(
        ordered && present.iter().all(|p| *p) && every_column,
        format!("ordered {ordered}, all regimes present {}, every sigma sees all four {every_column}", present.iter().all(|p| *p)),
    )
}

fn c9_stability() -> Outcome {
    let est = buckling_estimate(20e-9, 10e-6).unwrap();
    let fine = critical_strain(&StabilityParams::experiment()).unwrap();
    let coarse = critical_strain(&StabilityParams { n_points: 256, ..StabilityParams::experiment() }).unwrap();
    let conv = (coarse.prefactor - fine.prefactor).abs() / fine.prefactor;
    let factor = (fine.delta_crit / 4e-6).max(4e-6 / fine.delta_crit);
    let ratio = compare_to_experiment(&StabilityParams::experiment(), EXPERIMENT_STRAIN).unwrap();
    let pass = est == 4e-6 && factor <= 4.0 && conv <= 0.01 && ratio > 1e3;
    outcome(
        pass,
        format!(
            "estimate {est:e}; delta_crit {:.3e} is a factor {factor:.1} from 4e-6 (<= 4); prefactor change {:.2}%; delta_exp/delta_crit {ratio:.0}",
            fine.delta_crit,
            100.0 * conv
        ),
    )
}

fn c10_lift() -> Outcome {
    let g = Grid::unit(128).unwrap();
    let w = mollified_tent(&g, 0.1).unwrap();
    let u = VectorField2::zeros(g);
    let mut ratios = Vec::new();
    for d in [0.1, 0.05, 0.025] {
        let v = lift_to_3d(&u, &w, d, d, 4).unwrap();
        let f = fvk_energy(&u, &w, d / d.sqrt()).unwrap().total;
        ratios.push(energy_3d(&v).unwrap() / (d * d * f));
    }
    let monotone = ratios.windows(2).all(|p| (p[1] - 1.0).abs() < (p[0] - 1.0).abs());
    let last = *ratios.last().unwrap();
    let text: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    outcome(monotone && (last - 1.0).abs() <= 0.25, format!("ratios {} (monotone {monotone}, last within 25%)", text.join(", ")))
}

fn c11_gradients() -> Outcome {
    let g = Grid::unit(64).unwrap();
    let w = ScalarField::from_fn(g, |x, y| 0.2 + 0.3 * (3.0 * x).sin() * (2.0 * y).cos());
    let u = VectorField2::from_fn(g, |x, y| (0.05 * (x * y).sin(), 0.02 * x * x - 0.03 * y));
    let base = State::new(u, w).unwrap();
    let free = BoundarySpec { left: EdgeCondition::Free, ..BoundarySpec::left_only() };
    let p = EnergyParams { sigma: 0.05, gamma: 0.5, eta: 1e-3, nu: 0.277, thickness: 0.05, eigenstrain: 0.02, young: 1.0 };
    let mut worst: f64 = 0.0;
    let mut names = Vec::new();
    for seed in 0..3u64 {
        let s = perturb(&base, &free, 1e-3, seed).unwrap();
        for kind in FunctionalKind::ALL {
            let e = check_gradient(&s, kind, &p, seed).unwrap();
            if e >= 1e-5 {
                names.push(format!("{kind}: {e:.1e}"));
            }
            worst = worst.max(e);
        }
    }
    outcome(names.is_empty(), format!("worst relative error {worst:.1e} over 5 kinds x 3 states {}", names.join(" ")))
}

fn sweep_csv(records: &[SweepRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sigma", "gamma", "regime", "stretch", "bend", "bond", "total", "construction", "converged", "status"]).unwrap();
    for r in records {
        let e = r.energy.unwrap_or_default();
        w.write_record([
            r.sigma.to_string(),
            r.gamma.to_string(),
            r.regime.to_string(),
            e.stretch.to_string(),
            e.bend.to_string(),
            e.bond.to_string(),
            e.total.to_string(),
            r.construction.to_string(),
            r.converged.to_string(),
            r.error.clone().unwrap_or_else(|| "ok".into()),
        ])
        .unwrap();
    }
    w.into_inner().unwrap()
}

fn c12_determinism() -> Outcome {
    let spec = SweepSpec {
        points: points(&[(0.04, 1e-3), (0.01, 10.0), (5e-3, 1.0), (0.2, 100.0)]),
        grid: 64,
        mode: SweepMode::ConstructMinimize,
        minimize_iterations: 20,
        seed: 11,
        ..SweepSpec::default()
    };
    let a = run_sweep(&spec).unwrap();
    let b = run_sweep(&spec).unwrap();
    let same_csv = sweep_csv(&a.records) == sweep_csv(&b.records);
    let same_json = serde_json::to_vec(&a).unwrap() == serde_json::to_vec(&b).unwrap();
    outcome(same_csv && same_json, format!("csv identical {same_csv}, json identical {same_json}"))
}

fn main() -> ExitCode {
    let mins = |m: u64| Duration::from_secs(60 * m);
    let secs = Duration::from_secs;
    let mut results: Vec<(usize, Outcome, Duration)> = Vec::new();
    let mut run = |n: usize, budget: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let el = t.elapsed();
        let o = match budget {
            Some(b) => within_budget(o, el, b),
            None => o,
        };
        let status = match (o.pass, KNOWN_RED.contains(&n)) {
            (true, false) => "PASS",
            (true, true) => "PASS (listed as known-red; update KNOWN_RED)",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {n:>2}: {status} [{el:.1?}] {}", o.detail);
        results.push((n, o, el));
    };

    run(1, Some(secs(1)), &mut c1_flat);
    run(2, Some(secs(10)), &mut c2_identity);
    run(3, Some(secs(1)), &mut c3_fold);
    let mut d = vec![];
    run(4, Some(mins(5)), &mut || {
        let (o, x) = c4_blister();
        d = x;
        o
    });
    let mut b = vec![];
    run(5, Some(mins(5)), &mut || {
        let (o, x) = c5_laminate();
        b = x;
        o
    });
    let mut c = vec![];
    run(6, Some(mins(10)), &mut || {
        let (o, x) = c6_tubes();
        c = x;
        o
    });
    let flat = SweepSpec { points: points(&[(0.5, 10.0), (0.05, 1e3)]), grid: 32, ..SweepSpec::default() };
    let a = totals(&run_sweep(&flat).unwrap().records).unwrap_or_default();
    let groups = vec![(Regime::A, a), (Regime::B, b), (Regime::C, c), (Regime::D, d)];
    run(7, None, &mut || c7_sandwich(&groups));
    run(8, Some(secs(1)), &mut c8_phase);
    run(9, Some(secs(10)), &mut c9_stability);
    run(10, Some(mins(2)), &mut c10_lift);
    run(11, Some(secs(30)), &mut c11_gradients);
    run(12, None, &mut c12_determinism);

    let unexpected: Vec<usize> = results.iter().filter(|(n, o, _)| !o.pass && !KNOWN_RED.contains(n)).map(|r| r.0).collect();
    let passed = results.iter().filter(|r| r.1.pass).count();
    println!("acceptance: {passed}/{} pass; known-red {:?}", results.len(), KNOWN_RED);
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures {unexpected:?}");
        ExitCode::FAILURE
    }
}
