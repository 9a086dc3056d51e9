use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use bracketlab::brackets::antisymmetry_residual;
use bracketlab::calculus::{compressible_part, curl, div, grad, solenoidal_part};
use bracketlab::constraints::frechet_pair_residual;
use bracketlab::fields::{random_state, Field, Grid, Rank, Schema};
use bracketlab::harness::config::parse_grid;
use bracketlab::harness::{CheckResult, Expect, Report};
use bracketlab::systems::{mhd, toy, vorticity};

fn cube(n: usize) -> Arc<Grid> {
    Arc::new(Grid::cubic(3, n, 2.0 * PI).unwrap())
}

fn field(grid: &Arc<Grid>, rank: Rank, seed: u64, band: usize) -> Field {
    let schema = Schema::new(&[("f", rank)]);
    random_state(&schema, grid, seed, band, true).unwrap().field(0).clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn vector_calculus_identities(seed in any::<u64>(), band in 1usize..=3) {
        let grid = cube(8);
        let f = field(&grid, Rank::Scalar, seed, band);
        let v = field(&grid, Rank::Vector(3), seed ^ 1, band);
        prop_assert!(curl(&grad(&f).unwrap()).unwrap().max_abs() <= 1e-12 * v.max_abs().max(1.0));
        prop_assert!(div(&curl(&v).unwrap()).unwrap().max_abs() <= 1e-12 * v.max_abs().max(1.0));
        let s = solenoidal_part(&v).unwrap();
        prop_assert!(div(&s).unwrap().max_abs() <= 1e-12 * v.max_abs());
        let mut sum = s;
        sum.axpy(1.0, &compressible_part(&v).unwrap()).unwrap();
        sum.axpy(-1.0, &v).unwrap();
        prop_assert!(sum.max_abs() <= 1e-12 * v.max_abs());
    }

    #[test]
    fn vorticity_brackets_are_antisymmetric(seed in any::<u64>()) {
        let grid = cube(8);
        let spec = vorticity::vorticity_system(grid.clone()).unwrap();
        let state = random_state(&spec.schema, &grid, seed, 2, false).unwrap();
        let a = random_state(&spec.schema, &grid, seed.wrapping_add(1), 2, true).unwrap();
        let b = random_state(&spec.schema, &grid, seed.wrapping_add(2), 2, true).unwrap();
        for name in ["tainted", "corrected"] {
            let op = spec.bracket(name).unwrap();
            prop_assert!(antisymmetry_residual(op.as_ref(), &state, &a, &b).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn constraint_adjoints_pair_correctly(seed in any::<u64>()) {
        let spec = toy::toy_system().unwrap();
        let q = spec.constraint("gradient").unwrap();
        let state = random_state(&spec.schema, &spec.grid, seed, 3, false).unwrap();
        let u = random_state(&spec.schema, &spec.grid, seed ^ 7, 3, false).unwrap();
        let w = random_state(q.constraint_schema(), &spec.grid, seed ^ 9, 3, false).unwrap();
        prop_assert!(frechet_pair_residual(q.as_ref(), &state, &u, &w).unwrap() <= 1e-12);

        let grid = cube(8);
        let spec = mhd::incompressible_mhd_reduction(grid.clone(), 1.0, mhd::EnergyParams::default()).unwrap();
        let q = spec.constraint("incompressibility").unwrap();
        let state = random_state(&spec.schema, &grid, seed, 2, false).unwrap();
        let u = random_state(&spec.schema, &grid, seed ^ 7, 2, false).unwrap();
        let w = random_state(q.constraint_schema(), &grid, seed ^ 9, 2, false).unwrap();
        prop_assert!(frechet_pair_residual(q.as_ref(), &state, &u, &w).unwrap() <= 1e-12);
    }

    #[test]
    fn grid_strings_round_trip(sizes in prop::collection::vec(2usize..64, 1..=6)) {
        let text = sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",");
        prop_assert_eq!(parse_grid(&text).unwrap(), sizes);
    }

    #[test]
    fn reports_round_trip_through_json(
        residuals in prop::collection::vec(0.0f64..1.0, 1..6),
        seeds in prop::collection::vec(any::<u64>(), 1..4),
    ) {
        let mut report = Report::new("toy", vec![16], seeds);
        for (i, r) in residuals.iter().enumerate() {
            report.checks.push(CheckResult::new(format!("check_{i}"), "anchor", *r, 0.5, Expect::AtMost));
        }
        let back = Report::from_json(&report.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.passed(), residuals.iter().all(|r| *r <= 0.5));
        prop_assert_eq!(back, report);
    }
}
