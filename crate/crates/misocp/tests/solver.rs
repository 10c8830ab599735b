use misocp::bnb::{self, SolveOptions, SolveStatus};
use misocp::ipm::IpmSettings;
use misocp::relax::{RelaxStatus, Relaxation};
use misocp::{Cone, ConeForm, LinExpr, ProblemIR, Sense, VarKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// LP with a planted optimum: pick x*, make a random subset of `Ax <= b`
/// rows active, pick positive multipliers on them and set `c = -A'π`.
fn planted_lp(seed: u64, n: usize, m: usize) -> (ProblemIR, Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xstar: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut ir = ProblemIR::new();
    for j in 0..n {
        ir.add_var(&format!("x{j}"), VarKind::Continuous, -10.0, 10.0).unwrap();
    }
    let mut c = vec![0.0; n];
    for i in 0..m {
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ax: f64 = a.iter().zip(&xstar).map(|(a, x)| a * x).sum();
        let active = i < n;
        let rhs = if active { ax } else { ax + rng.gen_range(0.1..1.0) };
        if active {
            let pi = rng.gen_range(0.5..2.0);
            for j in 0..n {
                c[j] -= pi * a[j];
            }
        }
        ir.add_row(&format!("r{i}"), a.into_iter().enumerate().collect(), Sense::Le, rhs).unwrap();
    }
    let obj: f64 = c.iter().zip(&xstar).map(|(c, x)| c * x).sum();
    ir.objective = LinExpr {
        terms: c.into_iter().enumerate().collect(),
        constant: 0.0,
    };
    (ir, xstar, obj)
}

#[test]
fn planted_lp_optimum_recovered() {
    for seed in 0..5 {
        let (ir, xstar, obj) = planted_lp(seed, 6, 14);
        let r = Relaxation::of(&ir).unwrap().solve(&IpmSettings::default()).unwrap();
        assert_eq!(r.status, RelaxStatus::Optimal);
        assert!((r.objective - obj).abs() < 1e-7 * (1.0 + obj.abs()), "seed {seed}");
        for (a, b) in r.x.iter().zip(&xstar) {
            assert!((a - b).abs() < 1e-5, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn linear_objective_over_ball() {
    // min c'x s.t. ‖x‖ ≤ 1 has value −‖c‖ at x = −c/‖c‖
    let c = [3.0, -1.0, 2.0, 0.5];
    let mut ir = ProblemIR::new();
    let ids: Vec<usize> = (0..4)
        .map(|j| ir.add_var(&format!("x{j}"), VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY).unwrap())
        .collect();
    ir.add_cone(Cone {
        name: "ball".into(),
        v: ids.iter().map(|&j| LinExpr::var(j)).collect(),
        form: ConeForm::Norm { r: LinExpr::constant(1.0) },
    });
    ir.objective = LinExpr {
        terms: ids.iter().zip(c).map(|(&j, c)| (j, c)).collect(),
        constant: 0.0,
    };
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = bnb::solve(&ir, &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective + norm).abs() < 1e-7);
    for (x, c) in r.primal.iter().zip(c) {
        assert!((x + c / norm).abs() < 1e-6);
    }
}

#[test]
fn one_binary_picks_cheaper_branch() {
    let mut ir = ProblemIR::new();
    let b = ir.add_var("b", VarKind::Binary, 0.0, 1.0).unwrap();
    let x = ir.add_var("x", VarKind::Continuous, 0.0, 1.0).unwrap();
    // x = b, cost 1 per unit of x
    ir.add_row("link", vec![(x, 1.0), (b, -1.0)], Sense::Eq, 0.0).unwrap();
    ir.objective = LinExpr::var(x);
    let r = bnb::solve(&ir, &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!(r.primal[b].abs() < 1e-9);
    assert!(r.objective.abs() < 1e-8);
}

/// Random mixed-binary SOCP: facility-style on/off units with quadratic
/// capability cones and a demand to serve.
fn random_misocp(seed: u64, units: usize) -> ProblemIR {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ir = ProblemIR::new();
    let mut serve = Vec::new();
    for u in 0..units {
        let on = ir.add_var(&format!("on{u}"), VarKind::Binary, 0.0, 1.0).unwrap();
        let p = ir.add_var(&format!("p{u}"), VarKind::Continuous, 0.0, f64::INFINITY).unwrap();
        let q = ir.add_var(&format!("q{u}"), VarKind::Continuous, -5.0, 5.0).unwrap();
        let cap = rng.gen_range(1.0..3.0);
        // ‖(p, q)‖ ≤ cap·on
        ir.add_cone(Cone {
            name: format!("cap{u}"),
            v: vec![LinExpr::var(p), LinExpr::var(q)],
            form: ConeForm::Norm {
                r: LinExpr {
                    terms: vec![(on, cap)],
                    constant: 0.0,
                },
            },
        });
        ir.objective.terms.push((on, rng.gen_range(1.0..5.0)));
        ir.objective.terms.push((p, rng.gen_range(1.0..3.0)));
        serve.push((p, 1.0));
        serve.push((q, rng.gen_range(-0.3..0.3)));
    }
    let demand = rng.gen_range(2.0..4.0);
    ir.add_row("demand", serve, Sense::Ge, demand).unwrap();
    ir
}

fn enumerate(ir: &ProblemIR) -> f64 {
    let bins = ir.binaries();
    let mut best = f64::INFINITY;
    for mask in 0..(1u32 << bins.len()) {
        let assign: Vec<(usize, f64)> = bins.iter().enumerate().map(|(k, &j)| (j, ((mask >> k) & 1) as f64)).collect();
        let r = bnb::fix_binaries_and_resolve(ir, &assign, &IpmSettings::default()).unwrap();
        if r.status == SolveStatus::Optimal {
            best = best.min(r.objective);
        }
    }
    best
}

#[test]
fn branch_and_bound_matches_enumeration() {
    for seed in 0..4 {
        let ir = random_misocp(seed, 5);
        let exact = enumerate(&ir);
        let opts = SolveOptions {
            gap: 1e-9,
            keep_trace: true,
            ..SolveOptions::default()
        };
        let r = bnb::solve(&ir, &opts).unwrap();
        assert!(matches!(r.status, SolveStatus::Optimal | SolveStatus::GapLimit));
        assert!((r.objective - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "seed {seed}: {} vs {exact}", r.objective);
        assert!(ir.violations(&r.primal, 1e-6).unwrap().is_empty());
        // bound never decreases along a branch
        for rec in &r.trace {
            if let Some(p) = rec.parent {
                let parent = r.trace.iter().find(|t| t.id == p).unwrap();
                assert!(rec.relaxation >= parent.relaxation - 1e-6 * (1.0 + parent.relaxation.abs()));
            }
        }
    }
}

#[test]
fn results_independent_of_threads() {
    let ir = random_misocp(11, 7);
    let base = SolveOptions {
        gap: 1e-9,
        keep_trace: true,
        ..SolveOptions::default()
    };
    let one = bnb::solve(&ir, &base).unwrap();
    let three = bnb::solve(&ir, &SolveOptions { threads: 3, ..base }).unwrap();
    assert_eq!(one.objective.to_bits(), three.objective.to_bits());
    assert_eq!(one.primal.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), three.primal.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(one.nodes, three.nodes);
}

#[test]
fn infeasible_mip_reported() {
    let mut ir = ProblemIR::new();
    let a = ir.add_var("a", VarKind::Binary, 0.0, 1.0).unwrap();
    let b = ir.add_var("b", VarKind::Binary, 0.0, 1.0).unwrap();
    ir.add_row("sum", vec![(a, 1.0), (b, 1.0)], Sense::Eq, 1.5).unwrap();
    let r = bnb::solve(&ir, &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);
}

#[test]
fn fixing_incumbent_reproduces_objective() {
    let ir = random_misocp(3, 4);
    let r = bnb::solve(&ir, &SolveOptions::default()).unwrap();
    let assign = bnb::binary_assignment(&ir, &r.primal);
    let again = bnb::fix_binaries_and_resolve(&ir, &assign, &IpmSettings::default()).unwrap();
    assert!((again.objective - r.objective).abs() < 1e-6);
    let partial = &assign[1..];
    assert!(bnb::fix_binaries_and_resolve(&ir, partial, &IpmSettings::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn planted_lps_solve(seed in 0u64..10_000, n in 2usize..8, extra in 0usize..10) {
        let (ir, _, obj) = planted_lp(seed, n, n + extra);
        let r = Relaxation::of(&ir).unwrap().solve(&IpmSettings::default()).unwrap();
        prop_assert_eq!(r.status, RelaxStatus::Optimal);
        prop_assert!((r.objective - obj).abs() < 1e-6 * (1.0 + obj.abs()));
        prop_assert!(ir.violations(&r.x, 1e-7).unwrap().is_empty());
    }
}
