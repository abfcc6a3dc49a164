//! Acceptance run: one line per criterion, nonzero exit if any fails.
//!
//! `cargo test -p fluidsched-cli --test acceptance`

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use fluidsched::fluid_model::{
    classify, dropped_volume, dropped_volume_constant_rate, mean_local_delay, predicted_queue_size,
    thresholds,
};
use fluidsched::optimizer::{
    nullification_objective, nullification_stationarity, oracle_minimize, oracle_solve,
    simplex_minimum, solve_minmax_mean_delay, solve_nullification, solve_sum_mean_delay,
    verify_kkt, verify_level_equalization, Aggregate, NullVariant, OracleMode, SeparableObjective,
    SumDelayProblem, Term,
};
use fluidsched::simulator::{generate_trace, run_simulation, Policy, TraceKind, TraceSpec};
use fluidsched::{classify_state, Allocation, BehaviorCase, FeasibleBox, PipeState, SystemState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("closed-form fidelity", closed_form_fidelity),
        ("case-boundary continuity", boundary_continuity),
        ("criteria iff-checks", criteria_witnesses),
        ("solver exactness", solver_exactness),
        ("unconstrained agreement", unconstrained_agreement),
        ("recursion bound", recursion_bound),
        ("problems 2-4", other_problems),
        ("simulator fluid-consistency", fluid_consistency),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!out.pass);
        println!(
            "criterion {} {verdict} {name}: {} [{:.2}s]",
            i + 1,
            out.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
    }
}

/// Adaptive Simpson quadrature.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rule(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn go(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = rule(fa, flm, fm, a, m);
        let right = rule(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth > 60 || (depth > 4 && delta.abs() <= 15.0 * tol) {
            return left + right + delta / 15.0;
        }
        go(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1)
            + go(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    go(f, a, b, fa, fm, fb, rule(fa, fm, fb, a, b), tol, 0)
}

fn random_pipe(rng: &mut ChaCha8Rng, m: f64) -> PipeState {
    PipeState::new(rng.random::<f64>(), rng.random::<f64>() * m)
}

// 1. mean_local_delay and dropped_volume against quadrature of the clamped
// core lines, 10,000 pairs over all three cases, relative error <= 1e-7, < 10 s.
fn closed_form_fidelity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut counts = [0usize; 3];
    let (mut worst_delay, mut worst_drop) = (0.0f64, 0.0f64);
    let mut failures = 0;
    let mut pairs = 0;
    while pairs < 10_000 {
        let t = rng.random_range(1.0..100.0);
        let m = rng.random_range(0.5..50.0);
        let pipe = random_pipe(&mut rng, m);
        let (w_star, w_prime) = thresholds(&pipe, t, m).unwrap();
        let case = pairs % 3;
        let (lo, hi) = match case {
            0 => (0.0, w_star.min(1.0)),
            1 => (w_star.max(0.0), w_prime.min(1.0)),
            _ => (w_prime, 1.0),
        };
        if !(hi > lo && hi > 0.0) {
            continue;
        }
        let w = lo + (hi - lo) * rng.random::<f64>();
        if w <= 0.0 {
            continue;
        }
        pairs += 1;
        counts[match classify(&pipe, w, t, m).unwrap() {
            BehaviorCase::Overfills => 0,
            BehaviorCase::Confined => 1,
            BehaviorCase::Nullifies => 2,
        }] += 1;

        let (a, b) = (pipe.a, pipe.b);
        let delay = |s: f64| (((a - w) / w) * s + b / w).clamp(0.0, m / w);
        let overflow = |s: f64| (b + (a - w) * s - m).max(0.0);
        let scale = (m / w) * t;
        let want_delay = simpson(&delay, 0.0, t, 1e-14 * scale) / t;
        let want_drop = simpson(&overflow, 0.0, t, 1e-14 * (a * t * t).max(1e-300));

        let got_delay = mean_local_delay(&pipe, w, t, m).unwrap();
        let got_drop = dropped_volume(&pipe, w, t, m).unwrap();
        let ed = rel_err(got_delay, want_delay);
        let ex = rel_err(got_drop, want_drop);
        worst_delay = worst_delay.max(ed);
        worst_drop = worst_drop.max(ex);
        if ed > 1e-7 || ex > 1e-7 {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    let all_cases = counts.iter().all(|&c| c > 0);
    outcome(
        failures == 0 && all_cases && elapsed < Duration::from_secs(10),
        format!(
            "{pairs} pairs (overfill/confined/nullify {counts:?}), worst rel. error delay {worst_delay:.1e}, drops {worst_drop:.1e}, {failures} over 1e-7, {:.2}s of 10s",
            elapsed.as_secs_f64()
        ),
    )
}

fn next_up(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

fn next_down(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

// 2. At w_star and w_prime the closed forms on either side agree to 1e-9.
fn boundary_continuity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut pipes = 0;
    while pipes < 1000 {
        let t = rng.random_range(1.0..100.0);
        let m = rng.random_range(0.5..50.0);
        let pipe = random_pipe(&mut rng, m);
        let (w_star, w_prime) = thresholds(&pipe, t, m).unwrap();
        if !(w_star > 0.0 && w_prime < 1.0 && pipe.b > 0.0) {
            continue;
        }
        pipes += 1;
        for (boundary, below, above) in [
            (w_star, BehaviorCase::Overfills, BehaviorCase::Confined),
            (w_prime, BehaviorCase::Confined, BehaviorCase::Nullifies),
        ] {
            let (l, r) = (next_down(boundary), next_up(boundary));
            let sides_ok = classify(&pipe, l, t, m).unwrap() == below
                && classify(&pipe, r, t, m).unwrap() == above;
            let dl = mean_local_delay(&pipe, l, t, m).unwrap();
            let dr = mean_local_delay(&pipe, r, t, m).unwrap();
            let db = mean_local_delay(&pipe, boundary, t, m).unwrap();
            let e = rel_err(dl, dr).max(rel_err(db, dr));
            // drops vanish continuously at w_star
            let drop = dropped_volume(&pipe, l, t, m).unwrap();
            worst = worst.max(e);
            if !sides_ok || e > 1e-9 || drop > 1e-9 * m {
                failures += 1;
            }
        }
    }
    outcome(
        failures == 0,
        format!(
            "{pipes} pipes, 2 boundaries each, worst rel. jump {worst:.1e}, {failures} over 1e-9"
        ),
    )
}

/// Smallest share in `[0, 1]` with `holds`, by bisection; `None` if even
/// the whole processor fails. `holds` must be monotone in the share.
fn least_share(holds: impl Fn(f64) -> bool) -> Option<f64> {
    if !holds(1.0) {
        return None;
    }
    if holds(0.0) {
        return Some(0.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while next_up(lo) < hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Witness for "some allocation gives every pipe the property": each pipe
/// gets its least share, the slack goes to pipe 0. Checked pipe by pipe.
fn witness(n: usize, holds: &dyn Fn(usize, f64) -> bool) -> bool {
    let mut shares = Vec::with_capacity(n);
    for i in 0..n {
        match least_share(|w| holds(i, w)) {
            Some(w) => shares.push(w),
            None => return false,
        }
    }
    let total: f64 = shares.iter().sum();
    if total > 1.0 {
        return false;
    }
    shares[0] += 1.0 - total;
    shares
        .iter()
        .enumerate()
        .all(|(i, &w)| holds(i, w.min(1.0)))
}

// 3. Criteria verdicts equal witness search on 1,000 random states.
fn criteria_witnesses() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    let mut yes = [0usize; 3];
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let t = rng.random_range(1.0..50.0);
        let m = rng.random_range(0.5..20.0);
        let load = rng.random_range(0.2..1.6);
        let pipes: Vec<PipeState> = (0..n)
            .map(|_| {
                let a = (rng.random::<f64>() * 2.0 * load / n as f64).min(1.0);
                PipeState::new(a, rng.random::<f64>() * m)
            })
            .collect();
        let state = SystemState::new(pipes.clone(), t, m).unwrap();
        let class = classify_state(&state);

        let empties =
            |i: usize, w: f64| predicted_queue_size(&pipes[i], w, t, t, m).unwrap() == 0.0;
        let no_drops = |i: usize, w: f64| dropped_volume(&pipes[i], w, t, m).unwrap() == 0.0;
        // growth judged without the buffer cap: a buffer too large to saturate
        let no_growth = |i: usize, w: f64| {
            let roomy = m + t;
            predicted_queue_size(&pipes[i], w, t, t, roomy).unwrap() <= pipes[i].b
        };
        let found = [
            witness(n, &empties),
            witness(n, &no_drops),
            witness(n, &no_growth),
        ];
        let verdicts = [class.decomposable, class.avoidable, class.nonincreasable];
        for k in 0..3 {
            yes[k] += usize::from(verdicts[k]);
        }
        if found != verdicts {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!(
            "1000 states, verdicts true for decomposable/avoidable/nonincreasable {yes:?}, {mismatches} mismatches"
        ),
    )
}

fn random_steady_state(rng: &mut ChaCha8Rng, n: usize) -> SystemState {
    loop {
        let t = rng.random_range(2.0..50.0);
        let m = rng.random_range(1.0..20.0);
        let load = rng.random_range(0.5..1.3);
        let pipes: Vec<PipeState> = (0..n)
            .map(|_| {
                let a = (rng.random::<f64>() * 2.0 * load / n as f64).min(1.0);
                PipeState::new(a, rng.random::<f64>() * m)
            })
            .collect();
        if pipes.iter().any(|p| p.a == 0.0 && p.b == 0.0) {
            continue;
        }
        let state = SystemState::new(pipes, t, m).unwrap();
        if classify_state(&state).steady {
            return state;
        }
    }
}

// 4. Exact objective <= lattice oracle (step 1e-4) and within 1e-5 of it,
// KKT at 1e-8 on every output, 500 steady instances, < 60 s.
fn solver_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut above, mut far, mut kkt_fail) = (0, 0, 0);
    let mut worst_gap = 0.0f64;
    for k in 0..500 {
        let n = 2 + k % 4;
        let state = random_steady_state(&mut rng, n);
        let problem = SumDelayProblem::from_state(&state).unwrap();
        let exact = solve_sum_mean_delay(&problem).unwrap();
        let oracle = oracle_solve(&problem, OracleMode::Lattice { step: 1e-4 }).unwrap();
        let gap = oracle.objective - exact.objective;
        worst_gap = worst_gap.max(gap);
        if exact.objective > oracle.objective * (1.0 + 1e-12) {
            above += 1;
        }
        if gap > 1e-5 {
            far += 1;
        }
        if !verify_kkt(&problem, &exact.w, 1e-8).satisfied {
            kkt_fail += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        above == 0 && far == 0 && kkt_fail == 0 && elapsed < Duration::from_secs(60),
        format!(
            "500 instances N=2..5, {above} above oracle, worst oracle gap {worst_gap:.1e} ({far} over 1e-5), {kkt_fail} KKT failures, {:.2}s of 60s",
            elapsed.as_secs_f64()
        ),
    )
}

// 5. When the simplex minimum is inside the box the solver returns it.
fn unconstrained_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_w, mut worst_obj) = (0.0f64, 0.0f64);
    let mut failures = 0;
    let mut cases = 0;
    while cases < 1000 {
        let n = rng.random_range(1..=8);
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..50.0)).collect();
        let v = simplex_minimum(&c, 1.0).unwrap();
        // half the boxes contain v by construction, the rest are random
        let contain = cases % 2 == 0;
        let (lo, hi): (Vec<f64>, Vec<f64>) = v
            .iter()
            .map(|&vi| {
                if contain {
                    (
                        vi * rng.random::<f64>(),
                        vi + (1.0 - vi) * rng.random::<f64>(),
                    )
                } else {
                    let (x, y) = (rng.random::<f64>() * 0.6, rng.random::<f64>());
                    (x.min(y), x.max(y))
                }
            })
            .unzip();
        let inside = v
            .iter()
            .zip(lo.iter().zip(&hi))
            .all(|(x, (l, h))| l <= x && x <= h);
        let bounds = FeasibleBox::new(lo, hi);
        if !inside || !bounds.meets_budget(1.0) {
            continue;
        }
        cases += 1;
        let problem = SumDelayProblem::new(c.clone(), bounds, 1.0).unwrap();
        let r = solve_sum_mean_delay(&problem).unwrap();
        let dw =
            r.w.iter()
                .zip(&v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
        let cauchy = c.iter().map(|x| x.sqrt()).sum::<f64>().powi(2);
        let eo = rel_err(r.objective, cauchy);
        worst_w = worst_w.max(dw);
        worst_obj = worst_obj.max(eo);
        if dw > 1e-12 || eo > 1e-10 {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("{cases} boxes containing v, worst |w - v| {worst_w:.1e}, worst objective rel. error {worst_obj:.1e}"),
    )
}

fn half_factorial(n: usize) -> usize {
    (1..=n).product::<usize>() / 2
}

/// Box that every coordinate of the simplex minimum violates.
fn adversarial(rng: &mut ChaCha8Rng, n: usize) -> SumDelayProblem {
    loop {
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..50.0)).collect();
        let v = simplex_minimum(&c, 1.0).unwrap();
        let even = 1.0 / n as f64;
        let (lo, hi): (Vec<f64>, Vec<f64>) = v
            .iter()
            .map(|&vi| {
                let cut = vi + (even - vi) * rng.random_range(0.2..0.8);
                if vi > even {
                    (0.0, cut)
                } else {
                    (cut, 1.0)
                }
            })
            .unzip();
        let bounds = FeasibleBox::new(lo, hi);
        let violated = v
            .iter()
            .enumerate()
            .all(|(i, &x)| x < bounds.lo[i] || x > bounds.hi[i]);
        if violated && bounds.meets_budget(1.0) {
            return SumDelayProblem::new(c, bounds, 1.0).unwrap();
        }
    }
}

// 6. nodes_visited <= N!/2 + 1; adversarial N = 10 under 1 s each.
fn recursion_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut over = 0;
    let mut most = (0usize, 0usize);
    for k in 0..2000 {
        let n = 2 + k % 7;
        let problem = if k % 2 == 0 {
            adversarial(&mut rng, n)
        } else {
            SumDelayProblem::from_state(&random_steady_state(&mut rng, n)).unwrap()
        };
        let r = solve_sum_mean_delay(&problem).unwrap();
        if r.nodes_visited > half_factorial(n) + 1 {
            over += 1;
        }
        if r.nodes_visited > most.1 {
            most = (n, r.nodes_visited);
        }
    }
    let mut slowest = Duration::ZERO;
    let mut kkt_fail = 0;
    for _ in 0..20 {
        let problem = adversarial(&mut rng, 10);
        let start = Instant::now();
        let r = solve_sum_mean_delay(&problem).unwrap();
        slowest = slowest.max(start.elapsed());
        if r.nodes_visited > half_factorial(10) + 1 {
            over += 1;
        }
        if !verify_kkt(&problem, &r.w, 1e-8).satisfied {
            kkt_fail += 1;
        }
    }
    outcome(
        over == 0 && kkt_fail == 0 && slowest < Duration::from_secs(1),
        format!(
            "2000 instances N=2..8 and 20 adversarial N=10, {over} over N!/2 + 1 (most nodes {} at N={}), slowest N=10 solve {:.4}s of 1s, {kkt_fail} KKT failures",
            most.1,
            most.0,
            slowest.as_secs_f64()
        ),
    )
}

fn random_decomposable_state(rng: &mut ChaCha8Rng, n: usize) -> SystemState {
    loop {
        let t = rng.random_range(2.0..50.0);
        let m = rng.random_range(1.0..20.0);
        let pipes: Vec<PipeState> = (0..n)
            .map(|_| {
                PipeState::new(
                    rng.random::<f64>() * 0.8 / n as f64,
                    rng.random::<f64>() * m,
                )
            })
            .collect();
        let state = SystemState::new(pipes, t, m).unwrap();
        if classify_state(&state).decomposable {
            return state;
        }
    }
}

// 7. Min-max and nullification solvers: certificates and oracle agreement
// within 1e-5 on N <= 4.
fn other_problems() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    let mut worst = [0.0f64; 3];
    let mut worst_cert = [0.0f64; 3];
    for k in 0..60 {
        let n = 2 + k % 3;

        let state = random_steady_state(&mut rng, n);
        let problem = SumDelayProblem::from_state(&state).unwrap();
        let r = solve_minmax_mean_delay(&problem).unwrap();
        let levels: Vec<f64> = problem.c().iter().zip(&r.w).map(|(c, w)| c / w).collect();
        let b = problem.bounds();
        let cert = verify_level_equalization(&levels, &r.w, &b.lo, &b.hi, 1.0, 1e-8);
        let objective = SeparableObjective {
            terms: problem
                .c()
                .iter()
                .map(|&c| Term::Reciprocal { c })
                .collect(),
            aggregate: Aggregate::Max,
        };
        let oracle = oracle_minimize(
            &objective,
            &b.lo,
            &b.hi,
            1.0,
            OracleMode::Refined { step: 1e-10 },
        )
        .unwrap();
        let gap = oracle.objective - r.objective;
        worst[0] = worst[0].max(gap.abs());
        if !cert.satisfied || gap.abs() > 1e-5 {
            failures.push(format!(
                "minmax k={k}: gap {gap:.1e}, {:?}",
                cert.diagnostic
            ));
        }

        let state = random_decomposable_state(&mut rng, n);
        let r = solve_nullification(NullVariant::Sum, &state).unwrap();
        let pg = nullification_stationarity(&state, &r.w);
        worst_cert[1] = worst_cert[1].max(pg);
        let (objective, lo, hi) = nullification_objective(&state, NullVariant::Sum);
        let oracle = oracle_minimize(
            &objective,
            &lo,
            &hi,
            1.0,
            OracleMode::Refined { step: 1e-10 },
        )
        .unwrap();
        let gap = oracle.objective - r.objective;
        worst[1] = worst[1].max(gap.abs());
        if pg >= 1e-8 || gap.abs() > 1e-5 {
            failures.push(format!("null-sum k={k}: gap {gap:.1e}, pg {pg:.1e}"));
        }

        let r = solve_nullification(NullVariant::MinMax, &state).unwrap();
        let (objective, lo, hi) = nullification_objective(&state, NullVariant::MinMax);
        let cert = verify_level_equalization(&objective.levels(&r.w), &r.w, &lo, &hi, 1.0, 1e-8);
        let oracle = oracle_minimize(
            &objective,
            &lo,
            &hi,
            1.0,
            OracleMode::Refined { step: 1e-10 },
        )
        .unwrap();
        let gap = oracle.objective - r.objective;
        worst[2] = worst[2].max(gap.abs());
        if !cert.satisfied || gap.abs() > 1e-5 {
            failures.push(format!(
                "null-minmax k={k}: gap {gap:.1e}, {:?}",
                cert.diagnostic
            ));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "60 instances each N=2..4, worst |oracle gap| minmax {:.1e} null-sum {:.1e} null-minmax {:.1e}, worst projected gradient {:.1e}{}",
            worst[0],
            worst[1],
            worst[2],
            worst_cert[1],
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn random_allocation(rng: &mut ChaCha8Rng, n: usize) -> Allocation {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let rest: f64 = w[1..].iter().sum();
    w[0] = 1.0 - rest;
    Allocation::new(w).unwrap()
}

// 8. Constant traces: trajectories, delays and constant-rate drops match the
// fluid model to 1e-6 relative; conservation to 1e-9 per epoch.
fn fluid_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut counts = [0usize; 3];
    let (mut worst_traj, mut worst_delay, mut worst_drop, mut worst_cons) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut failures = 0;
    let close = |got: f64, want: f64| (got - want).abs() <= 1e-6 * want.abs() + 1e-12;
    // relative error, absolute below 1e-6 where the tolerance is nearly absolute
    let err = |got: f64, want: f64| (got - want).abs() / want.abs().max(1e-6);
    for k in 0..300 {
        let n = 1 + k % 4;
        let t = [5.0, 10.0, 20.0][k % 3];
        let m = rng.random_range(0.5..10.0);
        let pipes: Vec<PipeState> = (0..n).map(|_| random_pipe(&mut rng, m)).collect();
        let state = SystemState::new(pipes.clone(), t, m).unwrap();
        let dt = t / 100.0;
        let epochs = 3;
        let trace = generate_trace(&TraceSpec {
            kind: TraceKind::Constant {
                rates: pipes.iter().map(|p| p.a).collect(),
            },
            seed: 0,
            duration: epochs as f64 * t,
            resolution: dt,
        })
        .unwrap();
        let policy = if k % 5 == 0 && classify_state(&state).steady {
            Policy::SumOptimal
        } else {
            Policy::Static(random_allocation(&mut rng, n))
        };
        let run = run_simulation(&state, &trace, &policy, epochs).unwrap();
        for e in &run.epochs {
            for (i, p) in e.pipes.iter().enumerate() {
                let w = e.allocation[i];
                let pipe = PipeState::new(pipes[i].a, p.initial_backlog);
                counts[match classify(&pipe, w, t, m).unwrap() {
                    BehaviorCase::Overfills => 0,
                    BehaviorCase::Confined => 1,
                    BehaviorCase::Nullifies => 2,
                }] += 1;
                let mut ok = true;
                for (step, &q) in p.trajectory.iter().enumerate() {
                    let s = step as f64 * dt;
                    let want = (p.initial_backlog + (pipes[i].a - w) * s).clamp(0.0, m);
                    worst_traj = worst_traj.max(err(q, want));
                    ok &= close(q, want) && (0.0..=m).contains(&q);
                }
                let want_delay = mean_local_delay(&pipe, w, t, m).unwrap();
                let want_drop = dropped_volume_constant_rate(&pipe, w, t, m).unwrap();
                worst_delay = worst_delay.max(err(p.realized_delay, want_delay));
                worst_drop = worst_drop.max(err(p.realized_drops, want_drop));
                let balance =
                    p.inflow - (p.final_backlog - p.initial_backlog) - p.served - p.realized_drops;
                let cons = balance.abs() / p.inflow.max(1.0);
                worst_cons = worst_cons.max(cons);
                ok &= close(p.realized_delay, want_delay)
                    && close(p.realized_drops, want_drop)
                    && cons <= 1e-9;
                failures += usize::from(!ok);
            }
        }
    }
    outcome(
        failures == 0 && counts.iter().all(|&c| c > 0),
        format!(
            "300 runs x 3 epochs, pipe-epochs overfill/confined/nullify {counts:?}, worst error trajectory {worst_traj:.1e} delay {worst_delay:.1e} drops {worst_drop:.1e}, worst conservation residual {worst_cons:.1e}, {failures} failures"
        ),
    )
}

// 9. Same seed, byte-identical CSV from two runs of the binary.
fn determinism() -> Outcome {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_fluidsched"))
            .arg("compare")
            .arg(fixtures.join("asymmetric.toml"))
            .arg(fixtures.join("poisson_asymmetric.trace.toml"))
            .args(["--epochs", "5", "--seed", seed])
            .env_remove("FLUIDSCHED_SEED")
            .output()
            .map(|o| (o.status.success(), o.stdout))
    };
    match (run("2024"), run("2024"), run("2025")) {
        (Ok((true, a)), Ok((true, b)), Ok((true, c))) => outcome(
            a == b && !a.is_empty() && a != c,
            format!(
                "two runs with seed 2024: {} bytes, identical {}; seed 2025 differs {}",
                a.len(),
                a == b,
                a != c
            ),
        ),
        _ => outcome(false, "simulation binary failed".to_string()),
    }
}
