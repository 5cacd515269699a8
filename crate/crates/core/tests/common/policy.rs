//! Randomized checks of the scheduling policy functions.

use ncsim::bus::PriorityLevel;
use ncsim::scheduler::{
    allocate_periods, compute_err, modify_priorities, update_utilization, LoopBudget,
    SchedulerParams, SchedulerState,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub type CaseResult = Result<(), TestCaseError>;

/// Runs `test` on `cases` inputs drawn from `strategy` with a fixed seed.
pub fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> CaseResult,
) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn params() -> SchedulerParams {
    SchedulerParams::default()
}

fn levels(v: &[u32]) -> Vec<PriorityLevel> {
    v.iter().map(|&l| PriorityLevel(l)).collect()
}

fn rho_strategy() -> impl Strategy<Value = (f64, f64)> {
    let rho_r = 0.001f64..0.5;
    rho_r.prop_flat_map(|rr| {
        let rho = prop_oneof![
            Just(0.0),
            Just(rr),
            0.0f64..=1.0,
            (0.0f64..1.0).prop_map(move |s| s * rr),
        ];
        (rho, Just(rr))
    })
}

pub fn err_branch_table(cases: u32) -> Result<(), String> {
    check(cases, rho_strategy(), |(rho, rho_r)| {
        let want = if rho == 0.0 {
            rho_r
        } else if rho <= rho_r {
            0.0
        } else {
            -rho
        };
        prop_assert_eq!(compute_err(rho, rho_r).to_bits(), want.to_bits());
        Ok(())
    })
}

pub fn deadzone_double_window(cases: u32) -> Result<(), String> {
    let floor = 0.32;
    let strat = (
        floor..=1.0f64,
        -1.0f64..0.5,
        0.001f64..0.5,
        0.0f64..1.0,
        0.0f64..1.0,
    );
    check(cases, strat, move |(u, err_prev, rho_r, s1, s2)| {
        let p = SchedulerParams { rho_r, ..params() };
        let mut st = SchedulerState {
            u,
            err_prev,
            h: vec![],
            prio: vec![],
            j: vec![],
            jp: vec![],
        };
        // Two windows with rho strictly inside (0, rho_r].
        let rho1 = rho_r * (1.0 - s1).max(f64::MIN_POSITIVE);
        let rho2 = rho_r * (1.0 - s2).max(f64::MIN_POSITIVE);
        let e1 = compute_err(rho1, rho_r);
        let e2 = compute_err(rho2, rho_r);
        prop_assert_eq!(e1, 0.0);
        prop_assert_eq!(e2, 0.0);
        let first = update_utilization(&mut st, e1, &p, floor);
        let literal = (u + p.k_p * (0.0 - err_prev)).clamp(floor, 1.0);
        prop_assert_eq!(first.to_bits(), literal.to_bits());
        let second = update_utilization(&mut st, e2, &p, floor);
        prop_assert_eq!(second.to_bits(), first.to_bits());
        Ok(())
    })
}

#[derive(Debug, Clone)]
pub struct AllocCase {
    pub loops: Vec<LoopBudget>,
    pub j: Vec<f64>,
    pub u_frac: f64,
    pub epsilon: f64,
    pub h_max: f64,
}

fn alloc_strategy() -> impl Strategy<Value = AllocCase> {
    (1usize..=6, 0.005f64..0.05).prop_flat_map(|(n, h_max)| {
        let c_max = h_max / n as f64;
        let loop_strat =
            (1e-5f64..1.0, 0.0f64..1.0, 0.05f64..3.0).prop_map(move |(c_frac, hmin_frac, w)| {
                let c = c_frac * c_max;
                LoopBudget {
                    c,
                    h_min: c + hmin_frac * (h_max - c),
                    w,
                }
            });
        let j_strat = prop_oneof![Just(0.0), 0.0f64..2.0];
        (
            proptest::collection::vec(loop_strat, n),
            proptest::collection::vec(j_strat, n),
            0.0f64..=1.0,
            prop_oneof![Just(0.0), 0.0f64..1.0],
            Just(h_max),
        )
            .prop_map(|(loops, j, u_frac, epsilon, h_max)| AllocCase {
                loops,
                j,
                u_frac,
                epsilon,
                h_max,
            })
    })
}

fn alloc_run(case: &AllocCase) -> (f64, Vec<f64>) {
    let floor: f64 = case.loops.iter().map(|l| l.c / case.h_max).sum();
    let u = floor + case.u_frac * (1.0 - floor);
    let p = SchedulerParams {
        h_max: case.h_max,
        epsilon: case.epsilon,
        ..params()
    };
    let h = allocate_periods(u, &case.j, &case.loops, &p).expect("u above floor");
    (u, h)
}

pub fn allocation_budget(cases: u32) -> Result<(), String> {
    check(cases, alloc_strategy(), |case| {
        let (u, h) = alloc_run(&case);
        let used: f64 = case.loops.iter().zip(&h).map(|(l, h)| l.c / h).sum();
        prop_assert!(used <= u + 1e-12, "used {} > U {}", used, u);
        for (l, &h) in case.loops.iter().zip(&h) {
            prop_assert!(
                h >= l.h_min && h <= case.h_max,
                "h {} outside [{}, {}]",
                h,
                l.h_min,
                case.h_max
            );
        }
        Ok(())
    })
}

pub fn zero_cost_gets_h_max(cases: u32) -> Result<(), String> {
    check(cases, alloc_strategy(), |case| {
        let total: f64 = case.loops.iter().zip(&case.j).map(|(l, j)| l.w * j).sum();
        // A zero total leaves the proportional split undefined.
        if total < case.epsilon || total == 0.0 {
            return Ok(());
        }
        let (_, h) = alloc_run(&case);
        for (i, &j) in case.j.iter().enumerate() {
            if j == 0.0 {
                prop_assert_eq!(h[i].to_bits(), case.h_max.to_bits());
            }
        }
        Ok(())
    })
}

pub fn allocation_monotone_in_cost(cases: u32) -> Result<(), String> {
    let strat = (alloc_strategy(), any::<prop::sample::Index>(), 0.01f64..1.0);
    check(cases, strat, |(mut case, idx, bump)| {
        if case.loops.len() < 2 {
            return Ok(());
        }
        let i = idx.index(case.loops.len());
        case.epsilon = 0.0;
        case.u_frac = case.u_frac.max(0.05);
        case.j.iter_mut().for_each(|j| *j += 0.1);
        let before = alloc_run(&case).1[i];
        case.j[i] += bump;
        let after = alloc_run(&case).1[i];
        // Compare before clamping; both stay strictly inside the band.
        let (lo, hi) = (case.loops[i].h_min, case.h_max);
        if before > lo && before < hi && after > lo && after < hi {
            prop_assert!(after < before);
        }
        Ok(())
    })
}

fn permutation_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<PriorityLevel>)> {
    (1usize..=8).prop_flat_map(|n| {
        let jp = proptest::collection::vec(prop_oneof![Just(0.0), Just(0.5), 0.0f64..2.0], n);
        let prev = Just((1..=n as u32).collect::<Vec<u32>>())
            .prop_shuffle()
            .prop_map(|v| levels(&v));
        (jp, prev)
    })
}

fn is_permutation(levels: &[PriorityLevel]) -> bool {
    let mut v: Vec<u32> = levels.iter().map(|l| l.0).collect();
    v.sort_unstable();
    v.iter().copied().eq(1..=levels.len() as u32)
}

pub fn priorities_are_permutations(cases: u32) -> Result<(), String> {
    let strat = (
        permutation_strategy(),
        prop_oneof![Just(0.0), Just(f64::INFINITY), 0.0f64..1.0],
    );
    check(cases, strat, |((jp, prev), delta)| {
        let out = modify_priorities(&jp, &prev, delta);
        prop_assert!(is_permutation(&out), "{:?}", out);
        Ok(())
    })
}

pub fn infinite_delta_freezes(cases: u32) -> Result<(), String> {
    check(cases, permutation_strategy(), |(jp, prev)| {
        prop_assert_eq!(modify_priorities(&jp, &prev, f64::INFINITY), prev);
        Ok(())
    })
}

pub fn zero_delta_sorts(cases: u32) -> Result<(), String> {
    check(cases, permutation_strategy(), |(jp, prev)| {
        let out = modify_priorities(&jp, &prev, 0.0);
        for m in 0..jp.len() {
            for n in 0..jp.len() {
                if jp[m] > jp[n] {
                    prop_assert!(out[m] > out[n]);
                } else if jp[m] == jp[n] && m != n {
                    prop_assert_eq!(out[m] > out[n], prev[m] > prev[n]);
                }
            }
        }
        Ok(())
    })
}

pub fn deadzone_band_is_idempotent(cases: u32) -> Result<(), String> {
    let strat = (permutation_strategy(), 0.0f64..1.0, 0.01f64..1.0);
    check(cases, strat, |((jp, prev), base, delta)| {
        // Squeeze J' into a band narrower than delta.
        let lo = jp.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = jp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = (hi - lo).max(1.0);
        let jp: Vec<f64> = jp
            .iter()
            .map(|v| base + (v - lo) / span * delta * 0.99)
            .collect();
        let once = modify_priorities(&jp, &prev, delta);
        prop_assert_eq!(&once, &prev);
        prop_assert_eq!(modify_priorities(&jp, &once, delta), prev);
        Ok(())
    })
}

/// The four rule examples, checked verbatim.
pub fn rule_examples() -> Result<(), String> {
    let cases: [(&[f64], &[u32], &[u32]); 4] = [
        // Spread below delta: nothing moves.
        (&[0.50, 0.45, 0.40], &[1, 3, 2], &[1, 3, 2]),
        // m above n already and J'_m > J'_n: kept.
        (&[1.0, 0.3], &[2, 1], &[2, 1]),
        // n above m, gap 0.7 >= delta: m moves up.
        (&[1.0, 0.3], &[1, 2], &[2, 1]),
        // n above m, gap 0.1 < delta, third loop below both: order n, m, l.
        (&[0.5, 0.4, 0.1], &[2, 3, 1], &[2, 3, 1]),
    ];
    for (jp, prev, want) in cases {
        let got = modify_priorities(jp, &levels(prev), 0.2);
        if got != levels(want) {
            return Err(format!(
                "J' {jp:?}, prev {prev:?}: got {got:?}, want {want:?}"
            ));
        }
    }
    Ok(())
}
