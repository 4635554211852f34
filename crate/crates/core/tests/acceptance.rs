//! The ten acceptance criteria, each at its stated tolerance. Runs without
//! the libtest harness so that the per-criterion lines always print.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use translab::altproj::{estimate_linear_rate, run_ap, run_ap_sets};
use translab::cones::{compare_cones_on_c, sample_relative_cone, sample_restricted_cone, COMPARE_TOL};
use translab::constants::{check_orderings, estimate, ConstantKind};
use translab::constructions::{run_case1_corpus, run_chain_corpus, Fault, FOOT_TOL};
use translab::report::{aggregate_csv, SceneReport};
use translab::{corpus, ConstantEstimate, RadiusSchedule, Scene, SetSpec, Vector};

const SEED: u64 = 20;
const SLACK: f64 = 0.03;

type Estimates = BTreeMap<(String, ConstantKind), (ConstantEstimate, Duration)>;

fn schedule() -> RadiusSchedule {
    RadiusSchedule::geometric(0.5, 0.5, 5, 2000, SEED).unwrap()
}

fn estimate_all(scenes: &[Scene], sched: &RadiusSchedule) -> Estimates {
    let mut out = BTreeMap::new();
    for s in scenes {
        for k in ConstantKind::ALL {
            let t = Instant::now();
            let e = estimate(k, s, sched).unwrap();
            out.insert((s.id.clone(), k), (e, t.elapsed()));
        }
    }
    out
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn in_band(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

fn value(est: &Estimates, id: &str, k: ConstantKind) -> f64 {
    est[&(id.to_string(), k)].0.extrapolated
}

fn axes(est: &Estimates) -> Outcome {
    use ConstantKind::*;
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [Itr, ItrW, ItrC, ItrP, Str] {
        let (e, dt) = &est[&("perpendicular_axes".to_string(), k)];
        let good = in_band(e.extrapolated, 0.68, 0.74) && dt.as_secs_f64() < 60.0;
        ok &= good;
        parts.push(format!("{k}={:.4} ({:.1}s)", e.extrapolated, dt.as_secs_f64()));
    }
    outcome(ok, parts.join(", "))
}

fn lines_pi_3(est: &Estimates) -> Outcome {
    let s = value(est, "lines_pi_3", ConstantKind::Str);
    let c = value(est, "lines_pi_3", ConstantKind::ItrC);
    outcome(in_band(s, 0.47, 0.53) && in_band(c, 0.47, 0.53), format!("str={s:.4}, itr_c={c:.4}"))
}

fn identical(est: &Estimates) -> Outcome {
    let mut ok = true;
    let mut feasible = 0;
    for k in ConstantKind::ALL {
        let e = &est[&("identical_half_planes".to_string(), k)].0;
        ok &= e.extrapolated == 1.0 && e.empty_feasible;
        feasible += e.total_feasible();
    }
    outcome(ok && feasible == 0, format!("all constants 1: {ok}, feasible samples {feasible}"))
}

fn tangential(est: &Estimates) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [ConstantKind::Itr, ConstantKind::ItrC] {
        let v = est[&("tangential_parabola".to_string(), k)].0.values();
        let tail = &v[v.len() - 3..];
        let good = tail[2] <= 0.1 && tail[0] > tail[1] && tail[1] > tail[2];
        ok &= good;
        parts.push(format!("{k} last three {:.2e} {:.2e} {:.2e}", tail[0], tail[1], tail[2]));
    }
    outcome(ok, parts.join("; "))
}

fn ambient(est: &Estimates) -> Outcome {
    let tr = value(est, "axes_in_r3", ConstantKind::Tr);
    let itr = value(est, "axes_in_r3", ConstantKind::Itr);
    outcome(tr <= 0.05 && in_band(itr, 0.68, 0.74), format!("tr={tr:.4}, itr={itr:.4}"))
}

fn orderings(scenes: &[Scene], est: &Estimates) -> Outcome {
    let mut fails = Vec::new();
    for s in scenes {
        let es: Vec<ConstantEstimate> = ConstantKind::ALL.iter().map(|&k| est[&(s.id.clone(), k)].0.clone()).collect();
        let r = check_orderings(&es, SLACK).unwrap();
        for c in r.failures() {
            fails.push(format!("{}: {} ({:.4} vs {:.4})", s.id, c.name, c.lhs, c.rhs));
        }
    }
    let detail = if fails.is_empty() { format!("{} scenes, all checks hold", scenes.len()) } else { fails.join("; ") };
    outcome(fails.is_empty(), detail)
}

fn chain() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for dp in [1e-2, 1e-3] {
        let run = run_chain_corpus(10_000, dp, SEED, Fault::None).unwrap();
        let (c1_fail, _) = run_case1_corpus(10_000, dp, SEED).unwrap();
        let good = run.instances == 10_000
            && run.failures.is_empty()
            && run.max_equidistance < FOOT_TOL
            && run.max_orthogonality < FOOT_TOL
            && c1_fail == 0;
        ok &= good;
        parts.push(format!(
            "delta'={dp:e}: {} chain failures, residuals {:.1e}/{:.1e}, {c1_fail} case-1 failures",
            run.failures.len(),
            run.max_equidistance,
            run.max_orthogonality
        ));
    }
    outcome(ok, parts.join("; "))
}

fn cones(scenes: &[Scene]) -> Outcome {
    let sched = RadiusSchedule::geometric(0.5, 0.5, 6, 600, SEED).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for s in scenes {
        let rel = sample_relative_cone(s, &sched).unwrap();
        let res = sample_restricted_cone(s, &sched).unwrap();
        let c = compare_cones_on_c(&rel, &res, COMPARE_TOL).unwrap();
        let good = c.discrepancy <= COMPARE_TOL && (c.min_relative - c.min_restricted).abs() <= SLACK;
        ok &= good;
        if !good {
            parts.push(format!("{}: discrepancy {:.4}, minima {:.4}/{:.4}", s.id, c.discrepancy, c.min_relative, c.min_restricted));
        }
    }
    let detail = if ok { format!("{} scenes within tolerance", scenes.len()) } else { parts.join("; ") };
    outcome(ok, detail)
}

fn alternating(scenes: &[Scene], est: &Estimates, sched: &RadiusSchedule) -> Outcome {
    let th = PI / 3.0;
    let line = |d: &[f64]| SetSpec::affine(Vector::from_f64(&[0.0, 0.0]), vec![Vector::from_f64(d)]).unwrap();
    let t = run_ap_sets(&line(&[1.0, 0.0]), &line(&[th.cos(), th.sin()]), &Vector::from_f64(&[0.3, -0.2]), 200, 1e-13).unwrap();
    let rate = estimate_linear_rate(&t, 1).unwrap().value();
    let mut ok = in_band(rate, 0.2, 0.3);
    let mut parts = vec![format!("pi/3 rate {rate:.4}")];
    let r = *sched.radii.last().unwrap();
    for s in scenes {
        if value(est, &s.id, ConstantKind::Itr) < 0.2 {
            continue;
        }
        let mut worst: f64 = 0.0;
        for j in 0..8 {
            let ang = 2.0 * PI * (j as f64 + 0.5) / 8.0;
            let mut dir = Vector::zeros(s.dim());
            dir.0[0] = ang.cos();
            dir.0[1] = ang.sin();
            let x0 = s.xbar.add_scaled(r, &dir);
            let t = run_ap(s, &x0, 500, 1e-13).unwrap();
            let rate = match estimate_linear_rate(&t, 1) {
                Ok(l) => l.value(),
                // Fewer than four cycles before reaching the tolerance.
                Err(_) if t.converged => 0.0,
                Err(_) => 1.0,
            };
            worst = worst.max(if t.converged { rate } else { 1.0 });
        }
        ok &= worst < 1.0;
        parts.push(format!("{} worst {worst:.3}", s.id));
    }
    outcome(ok, parts.join(", "))
}

fn reports(scenes: &[Scene], sched: &RadiusSchedule, threads: usize) -> (Vec<String>, String) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let rs: Vec<SceneReport<f64>> = scenes
            .iter()
            .map(|s| {
                let es = ConstantKind::ALL.iter().map(|&k| estimate(k, s, sched).unwrap()).collect();
                SceneReport::new(sched.clone(), es).unwrap()
            })
            .collect();
        (rs.iter().map(|r| r.to_json().unwrap()).collect(), aggregate_csv(&rs).unwrap())
    })
}

fn determinism(scenes: &[Scene], sched: &RadiusSchedule) -> Outcome {
    let one = reports(scenes, sched, 1);
    let four = reports(scenes, sched, 4);
    let same = one == four;
    outcome(same, format!("1 vs 4 threads, {} scene reports + aggregate csv identical: {same}", one.0.len()))
}

fn main() {
    let scenes = corpus::scenes::<f64>().unwrap();
    let sched = schedule();
    let est = estimate_all(&scenes, &sched);
    let results = [
        ("perpendicular axes near 1/sqrt2", axes(&est)),
        ("lines at pi/3 near 1/2", lines_pi_3(&est)),
        ("identical sets give 1", identical(&est)),
        ("tangential scene decays", tangential(&est)),
        ("ambient independence", ambient(&est)),
        ("ordering suite", orderings(&scenes, &est)),
        ("construction chain", chain()),
        ("cone equality on C", cones(&scenes)),
        ("alternating projections", alternating(&scenes, &est, &sched)),
        ("determinism", determinism(&scenes, &sched)),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!("criterion {:>2} [{}] {name}: {}", i + 1, if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += (!o.passed) as usize;
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
