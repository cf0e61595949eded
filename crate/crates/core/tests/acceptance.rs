//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sttmpc::estimation::{matrix_norm_dist, Schedule};
use sttmpc::geometry::{verify_contractive, Hyperbox};
use sttmpc::simulator::{
    calibrate_c3, run_closed_loop, run_oracle, ControllerSetup, PlantConfig, RunConfig, Scenario, SimError, Trace,
    CONSTRAINT_TOL, TAIL_TOL,
};
use sttmpc::solvers::{dlyap, solve_lp, solve_qp, LpProblem, LpSettings, QpProblem, QpSettings};
use sttmpc::tube_mpc::closed_loop;

const DELTAS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
const STEPS: usize = 100;
const PILOT_SEEDS: std::ops::Range<u64> = 1000..1100;
const SHORT_SEEDS: std::ops::Range<u64> = 0..10;
const COVERAGE_SEEDS: std::ops::Range<u64> = 0..200;

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

struct Ctx {
    plant: PlantConfig,
    setup: ControllerSetup,
    x0: DVector<f64>,
    c3: f64,
}

impl Ctx {
    fn schedule(&self, delta: f64) -> Schedule {
        Schedule::new(delta, 0.5, 2.0, 0.3, self.c3, self.plant.sigma).unwrap()
    }

    fn run_config(&self, delta: f64, seed: u64) -> RunConfig {
        RunConfig::new(STEPS, self.schedule(delta), seed, self.x0.clone())
    }

    fn run(&self, delta: f64, seed: u64) -> Result<Trace, SimError> {
        run_closed_loop(&self.plant, &self.run_config(delta, seed), &self.setup)
    }
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = v.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn ln_binom_pmf(n: u64, k: u64, p: f64) -> f64 {
    let lgam = |x: u64| (1..=x).map(|i| (i as f64).ln()).sum::<f64>();
    lgam(n) - lgam(k) - lgam(n - k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()
}

/// One-sided Clopper–Pearson lower confidence bound for a binomial proportion.
fn clopper_pearson_lower(k: u64, n: u64, level: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let upper_tail = |p: f64| (k..=n).map(|j| ln_binom_pmf(n, j, p).exp()).sum::<f64>();
    let (mut lo, mut hi) = (0.0, k as f64 / n as f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if upper_tail(mid) < 1.0 - level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn runs_ok(results: &[Result<Trace, SimError>]) -> Result<Vec<&Trace>, String> {
    results
        .iter()
        .map(|r| r.as_ref().map_err(|e| e.to_string()))
        .collect()
}

fn criterion_1(ctx: &Ctx, short: &[Result<Trace, SimError>]) -> Line {
    let name = "constraint satisfaction";
    let traces = match runs_ok(short) {
        Ok(t) => t,
        Err(e) => return Line { id: 1, name, pass: false, detail: e },
    };
    let d = &ctx.setup.design;
    let g_runs: Vec<_> = traces.iter().filter(|t| t.g_holds()).collect();
    let worst_g = g_runs
        .iter()
        .map(|t| t.constraint_report(&d.f, &d.g).worst)
        .fold(f64::NEG_INFINITY, f64::max);
    let worst_all = traces
        .iter()
        .map(|t| t.constraint_report(&d.f, &d.g).worst)
        .fold(f64::NEG_INFINITY, f64::max);
    Line {
        id: 1,
        name,
        pass: worst_g <= CONSTRAINT_TOL && !g_runs.is_empty(),
        detail: format!(
            "{} of {} runs under monitored event; worst margin {worst_g:.3e} there, {worst_all:.3e} over all runs",
            g_runs.len(),
            traces.len()
        ),
    }
}

fn criterion_2(short: &[Result<Trace, SimError>]) -> Line {
    let name = "per-step feasibility";
    let traces = match runs_ok(short) {
        Ok(t) => t,
        Err(e) => return Line { id: 2, name, pass: false, detail: e },
    };
    let g_runs: Vec<_> = traces.iter().filter(|t| t.g_holds()).collect();
    let all_opt = g_runs.iter().all(|t| t.steps.iter().all(|s| s.feasible_current));
    let fallbacks: usize = g_runs.iter().map(|t| t.fallbacks).sum();
    let tail = g_runs
        .iter()
        .flat_map(|t| t.steps.iter())
        .flat_map(|s| [s.tail_violation, s.tube_violation])
        .flatten()
        .fold(f64::NEG_INFINITY, f64::max);
    let fallbacks_all: usize = traces.iter().map(|t| t.fallbacks).sum();
    Line {
        id: 2,
        name,
        pass: all_opt && fallbacks == 0 && tail <= TAIL_TOL && !g_runs.is_empty(),
        detail: format!(
            "all optimal: {all_opt}; fallbacks {fallbacks} (all runs {fallbacks_all}); worst tail/tube check {tail:.3e}"
        ),
    }
}

fn criterion_3(by_delta: &[(f64, Vec<Result<Trace, SimError>>)]) -> Line {
    let name = "volume decay";
    let mut means = Vec::new();
    let mut monotone = true;
    for (delta, runs) in by_delta {
        let traces = match runs_ok(runs) {
            Ok(t) => t,
            Err(e) => return Line { id: 3, name, pass: false, detail: format!("delta {delta}: {e}") },
        };
        monotone &= traces
            .iter()
            .all(|t| t.steps.windows(2).all(|w| w[1].volume <= w[0].volume));
        let at = |tt: usize| mean(traces.iter().map(|t| t.step(tt).unwrap().volume_ratio));
        means.push([at(5), at(15), at(50), at(100)]);
    }
    let v50 = means[0][2];
    let v100 = means[0][3];
    let ordered = (0..3).all(|k| means.windows(2).all(|w| w[0][k] < w[1][k]));
    Line {
        id: 3,
        name,
        pass: v50 <= 0.01 && v100 <= 0.005 && monotone && ordered,
        detail: format!(
            "delta 0.1: {:.3}% at t=50, {:.3}% at t=100; monotone {monotone}; ordered across delta {ordered} (t=5: {})",
            100.0 * v50,
            100.0 * v100,
            means.iter().map(|m| format!("{:.2}%", 100.0 * m[0])).collect::<Vec<_>>().join(" < ")
        ),
    }
}

fn criterion_4(ctx: &Ctx) -> Line {
    let name = "coverage";
    let clock = Instant::now();
    let mut covered = 0u64;
    let mut errors = 0u64;
    for seed in COVERAGE_SEEDS {
        let mut run = ctx.run_config(0.1, seed);
        run.volume_samples = 1;
        match run_closed_loop(&ctx.plant, &run, &ctx.setup) {
            Ok(t) => covered += t.always_covered() as u64,
            Err(_) => errors += 1,
        }
    }
    let n = COVERAGE_SEEDS.end - COVERAGE_SEEDS.start;
    let lower = clopper_pearson_lower(covered, n, 0.95);
    let elapsed = clock.elapsed();
    Line {
        id: 4,
        name,
        pass: lower >= 0.9 && elapsed < Duration::from_secs(30 * 60),
        detail: format!(
            "{covered}/{n} runs covered, 95% lower bound {lower:.4}; {errors} runs errored; {:.1}s",
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_5(ctx: &Ctx, short: &[Result<Trace, SimError>]) -> Line {
    let name = "ball inclusion";
    let traces = match runs_ok(short) {
        Ok(t) => t,
        Err(e) => return Line { id: 5, name, pass: false, detail: e },
    };
    let par = &ctx.setup.par;
    let theta_star = par.theta_of(&ctx.plant.a_star, &ctx.plant.b_star);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0usize;
    let mut misses = 0usize;
    for tr in traces.iter().filter(|t| t.g_holds()) {
        for t in [tr.t_star, 25, 50, 100] {
            let s = tr.step(t).unwrap();
            for _ in 0..1000 {
                let d = DVector::<f64>::from_fn(theta_star.len(), |_, _| rng.sample(StandardNormal));
                let scale = s.eps / matrix_norm_dist(&(&theta_star + &d), &theta_star, par);
                let p = &theta_star + d * scale;
                checked += 1;
                misses += !s.set.contains(&p, 1e-12) as usize;
            }
        }
    }
    Line {
        id: 5,
        name,
        pass: misses == 0 && checked > 0,
        detail: format!("{checked} ball points checked, {misses} outside the set"),
    }
}

fn criterion_6(ctx: &Ctx, short: &[Result<Trace, SimError>]) -> Line {
    let name = "oracle recovery";
    let traces = match runs_ok(short) {
        Ok(t) => t,
        Err(e) => return Line { id: 6, name, pass: false, detail: e },
    };
    let mut early = Vec::new();
    let mut late = Vec::new();
    for tr in traces {
        let oracle = match run_oracle(&ctx.plant, &ctx.run_config(0.1, tr.seed), &ctx.setup) {
            Ok(o) => o,
            Err(e) => return Line { id: 6, name, pass: false, detail: format!("oracle: {e}") },
        };
        let gap = |a: usize, b: usize| mean((a..=b).map(|t| tr.step(t).unwrap().stage_cost - oracle.step(t).unwrap().stage_cost));
        early.push(gap(20, 40));
        late.push(gap(80, 100));
    }
    let (e, l) = (mean(early), mean(late));
    Line {
        id: 6,
        name,
        pass: l < e,
        detail: format!("mean stage-cost gap {e:.3e} over [20,40], {l:.3e} over [80,100]"),
    }
}

fn random_stable(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let rho = sttmpc::solvers::spectral_radius(&m).max(1e-12);
    m * (rng.gen_range(0.0..0.95) / rho)
}

fn criterion_7(ctx: &Ctx) -> Line {
    let name = "numerical kernels";
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let mut lyap = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=6);
        let phi = random_stable(&mut rng, n);
        let m = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
        let s = &m * m.transpose() + DMatrix::identity(n, n);
        let p = dlyap(&phi, &s).unwrap();
        lyap = lyap.max((&p - phi.transpose() * &p * &phi - &s).amax());
    }

    let mut kkt = 0.0f64;
    let mut solved = 0;
    for _ in 0..50 {
        let n = rng.gen_range(2..=8);
        let m = rng.gen_range(n..=3 * n);
        let a = DMatrix::<f64>::from_fn(m, n, |_, _| rng.sample(StandardNormal));
        let b = DVector::<f64>::from_fn(m, |_, _| rng.gen_range(0.1..2.0));
        let c = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
        let lp = LpProblem::new(c.clone())
            .with_inequalities(a.clone(), b.clone())
            .with_bounds(vec![(-10.0, 10.0); n]);
        let r = solve_lp(&lp, &LpSettings::default()).unwrap();
        if r.is_optimal() {
            solved += 1;
            kkt = kkt.max(r.kkt_residual());
        }
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
        let qp = QpProblem::new(&g * g.transpose() + DMatrix::identity(n, n) * 0.1, c).with_inequalities(a, b);
        let r = solve_qp(&qp, &QpSettings::default()).unwrap();
        if r.is_optimal() {
            solved += 1;
            kkt = kkt.max(r.kkt_residual());
        }
    }

    // Maxima over boxes and linearly transformed simplices against their known vertices.
    let mut brute = 0.0f64;
    for i in 0..50 {
        let n = rng.gen_range(1..=5);
        let c = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
        let (a, b, verts): (DMatrix<f64>, DVector<f64>, Vec<DVector<f64>>) = if i % 2 == 0 {
            let lo = DVector::<f64>::from_fn(n, |_, _| rng.gen_range(-3.0..0.0));
            let hi = DVector::<f64>::from_fn(n, |_, _| rng.gen_range(0.1..3.0));
            let bx = Hyperbox::new(lo, hi).unwrap();
            let h = bx.to_hpolytope();
            (h.a().clone(), h.b().clone(), bx.vertices().unwrap().vertices)
        } else {
            let m = loop {
                let m = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
                if m.determinant().abs() > 0.1 {
                    break m;
                }
            };
            let minv = m.clone().try_inverse().unwrap();
            let r = rng.gen_range(0.5..3.0);
            // {y : -M⁻¹y ≤ 0, 1ᵀM⁻¹y ≤ r}
            let mut a = DMatrix::zeros(n + 1, n);
            a.rows_mut(0, n).copy_from(&(-&minv));
            a.set_row(n, &(DMatrix::from_element(1, n, 1.0) * &minv).row(0));
            let mut b = DVector::zeros(n + 1);
            b[n] = r;
            let mut verts = vec![DVector::zeros(n)];
            verts.extend((0..n).map(|j| m.column(j) * r));
            (a, b, verts)
        };
        let best = verts.iter().map(|v| c.dot(v)).fold(f64::NEG_INFINITY, f64::max);
        let lp = LpProblem::new(-&c).with_inequalities(a, b);
        let r = solve_lp(&lp, &LpSettings::default()).unwrap();
        brute = brute.max((-r.objective - best).abs());
    }

    let d = &ctx.setup.design;
    let vertices = ctx.setup.set0.vertices().unwrap().vertices;
    let phis: Vec<_> = vertices.iter().map(|v| closed_loop(&ctx.setup.par, v, &d.k)).collect();
    let ratio = verify_contractive(&d.t, &phis).unwrap();

    Line {
        id: 7,
        name,
        pass: lyap <= 1e-10 && kkt <= 1e-8 && brute <= 1e-9 && ratio <= d.lambda + 1e-8,
        detail: format!(
            "dlyap residual {lyap:.2e}; KKT {kkt:.2e} over {solved} optimal LP/QP; LP vs vertices {brute:.2e}; contraction {ratio:.6} (λ {})",
            d.lambda
        ),
    }
}

fn criterion_8(ctx: &Ctx, all: &[&Result<Trace, SimError>]) -> Line {
    let name = "H identities";
    let (res_c, min_c) = ctx.setup.design.hc_check();
    let mut res = res_c;
    let mut neg = min_c;
    let mut steps = 0usize;
    for r in all {
        match r {
            Ok(t) => {
                for s in &t.steps {
                    res = res.max(s.h_residual);
                    neg = neg.min(s.h_min);
                    steps += 1;
                }
            }
            Err(e) => return Line { id: 8, name, pass: false, detail: e.to_string() },
        }
    }
    Line {
        id: 8,
        name,
        pass: res <= 1e-8 && neg >= 0.0,
        detail: format!("{steps} steps; worst residual {res:.2e}; smallest entry {neg:.2e}"),
    }
}

fn criterion_9(ctx: &Ctx) -> Line {
    let name = "determinism";
    let csv = |seed| ctx.run(0.1, seed).map(|t| t.to_csv());
    let pass = [3u64, 7]
        .iter()
        .all(|&s| matches!((csv(s), csv(s)), (Ok(a), Ok(b)) if a == b && !a.is_empty()));
    Line {
        id: 9,
        name,
        pass,
        detail: "trace CSVs of two reruns compared byte for byte".into(),
    }
}

fn main() {
    let clock = Instant::now();
    let scenario = Scenario::paper();
    let plant = scenario.plant().unwrap();
    let setup = scenario.setup().unwrap();
    let x0 = scenario.x0();
    let base = RunConfig::new(STEPS, Schedule::new(0.1, 0.5, 2.0, 0.3, 1.0, plant.sigma).unwrap(), 0, x0.clone());
    let pilots: Vec<u64> = PILOT_SEEDS.collect();
    let cal = calibrate_c3(&plant, &base, &setup, &pilots, 0.99, 1.5).unwrap();
    println!("calibrated c3 = {:.4e} on {} pilot seeds", cal.c3, pilots.len());
    let ctx = Ctx { plant, setup, x0, c3: cal.c3 };

    let by_delta: Vec<(f64, Vec<Result<Trace, SimError>>)> = DELTAS
        .iter()
        .map(|&d| (d, SHORT_SEEDS.map(|s| ctx.run(d, s)).collect()))
        .collect();
    let short = &by_delta[0].1;
    let all: Vec<_> = by_delta.iter().flat_map(|(_, r)| r.iter()).collect();

    let lines = [
        criterion_1(&ctx, short),
        criterion_2(short),
        criterion_3(&by_delta),
        criterion_4(&ctx),
        criterion_5(&ctx, short),
        criterion_6(&ctx, short),
        criterion_7(&ctx),
        criterion_8(&ctx, &all),
        criterion_9(&ctx),
    ];
    for l in &lines {
        println!(
            "criterion {} [{}] {}: {}",
            l.id,
            if l.pass { "PASS" } else { "FAIL" },
            l.name,
            l.detail
        );
    }
    println!("acceptance finished in {:.1}s", clock.elapsed().as_secs_f64());
    if lines.iter().any(|l| !l.pass) {
        std::process::exit(1);
    }
}
