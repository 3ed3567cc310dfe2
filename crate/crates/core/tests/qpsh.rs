mod common;

use common::*;
use pluripot::qpsh::{chi_eps, sublevel_mask, theta_convex_slack, truncate};
use pluripot::{BackgroundForm, GridTorus, QPshFunction, SymMat};
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

fn with_pole_nodes(g: &GridTorus, mut v: Vec<f64>, poles: &[usize]) -> QPshFunction {
    for &p in poles {
        v[p] = f64::NEG_INFINITY;
    }
    QPshFunction::new(g, v).unwrap()
}

#[test]
fn truncation_is_entrywise_max() {
    let g = GridTorus::new(&[8]).unwrap();
    let table = vec![-1.0, 0.3, -0.7, f64::NEG_INFINITY, 0.0, -0.5, 2.0, -0.51];
    let u = QPshFunction::new(&g, table.clone()).unwrap();
    let t = truncate(&u, 0.5);
    let want: Vec<f64> = table.iter().map(|v| v.max(-0.5)).collect();
    assert_eq!(t.values(), want.as_slice());
}

#[test]
fn masks_of_disjoint_poles_intersect() {
    let g = GridTorus::new(&[6, 6]).unwrap();
    let u = with_pole_nodes(&g, vec![0.0; 36], &[0]);
    let v = with_pole_nodes(&g, vec![0.0; 36], &[g.index(&[3, 3])]);
    let m = sublevel_mask(&[&u, &v], 10.0).unwrap();
    let mu = sublevel_mask(&[&u], 10.0).unwrap();
    let mv = sublevel_mask(&[&v], 10.0).unwrap();
    for x in 0..36 {
        assert_eq!(m.inside[x], mu.inside[x] && mv.inside[x]);
        assert_eq!(m.stencil_inside[x], mu.stencil_inside[x] && mv.stencil_inside[x]);
    }
    assert_eq!(m.inside_count(), 34);
    // Each pole removes itself and its eight-point stencil.
    assert_eq!(m.stencil_inside_count(), 36 - 18);
}

#[test]
fn chi_matches_direct_formula() {
    let g = GridTorus::new(&[6]).unwrap();
    let table = vec![-2.0, -0.25, 0.0, 0.1, 1.0, 3.0];
    let u = QPshFunction::new(&g, table.clone()).unwrap();
    let chi = chi_eps(&u, 0.25).unwrap();
    for (c, v) in chi.iter().zip(&table) {
        let p: f64 = v.max(0.0);
        assert!((c - p / (p + 0.25)).abs() < 1e-15);
    }
}

#[test]
fn slack_of_a_sine_matches_the_discrete_symbol() {
    let n = 32;
    let g = GridTorus::new(&[n]).unwrap();
    let h = 1.0 / n as f64;
    let form = BackgroundForm::constant(&g, SymMat::identity(1)).unwrap();
    for a in [0.001, 0.01, 0.02] {
        let u = QPshFunction::from_fn(&g, |x| a * (TAU * x[0]).sin()).unwrap();
        let slack = theta_convex_slack(&u, &form).unwrap();
        let lo = slack.iter().map(|s| s.unwrap()).fold(f64::INFINITY, f64::min);
        let want = 1.0 - a * (2.0 / (h * h)) * (1.0 - (2.0 * PI * h).cos());
        assert!((lo - want).abs() < 1e-12, "{lo} vs {want}");
    }
}

#[test]
fn slack_is_unevaluated_near_poles() {
    let g = GridTorus::new(&[8, 8]).unwrap();
    let form = BackgroundForm::constant(&g, SymMat::identity(2)).unwrap();
    let u = with_pole_nodes(&g, vec![0.0; 64], &[9]);
    let slack = theta_convex_slack(&u, &form).unwrap();
    let mask = sublevel_mask(&[&u], u.truncation_level()).unwrap();
    for x in 0..64 {
        assert_eq!(slack[x].is_some(), mask.stencil_inside[x]);
    }
}

fn arb_function(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![9 => -5.0f64..5.0, 1 => Just(f64::NEG_INFINITY)], n)
        .prop_filter("at least one finite value", |v| v.iter().any(|x| x.is_finite()))
}

proptest! {
    #[test]
    fn truncate_composes_by_minimum(v in arb_function(12), t in 0.0f64..6.0, s in 0.0f64..6.0) {
        let g = GridTorus::new(&[12]).unwrap();
        let u = QPshFunction::new(&g, v).unwrap();
        prop_assert_eq!(truncate(&truncate(&u, t), s), truncate(&u, t.min(s)));
        let tu = truncate(&u, t);
        prop_assert!(tu.values().iter().zip(u.values()).all(|(a, b)| a >= b && *a >= -t));
    }

    #[test]
    fn sublevel_masks_grow_with_level(v in arb_function(36), t in 0.0f64..6.0, dt in 0.0f64..3.0) {
        let g = GridTorus::new(&[6, 6]).unwrap();
        let u = QPshFunction::new(&g, v).unwrap();
        let a = sublevel_mask(&[&u], t).unwrap();
        let b = sublevel_mask(&[&u], t + dt).unwrap();
        for x in 0..36 {
            prop_assert!(!a.inside[x] || b.inside[x]);
            prop_assert!(!a.stencil_inside[x] || b.stencil_inside[x]);
            prop_assert!(!a.stencil_inside[x] || a.inside[x]);
        }
    }

    #[test]
    fn chi_is_a_decreasing_fraction(v in arb_function(10), e in 0.01f64..2.0, de in 0.0f64..2.0) {
        let g = GridTorus::new(&[10]).unwrap();
        let u = QPshFunction::new(&g, v).unwrap();
        let a = chi_eps(&u, e).unwrap();
        let b = chi_eps(&u, e + de).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((0.0..=1.0).contains(x));
            prop_assert!(x >= y);
        }
    }

    #[test]
    fn max_of_psh_functions_is_psh_on_pure_nodes(seed in any::<u64>()) {
        let g = GridTorus::new(&[8, 8]).unwrap();
        let mut r = rng(seed);
        let form = random_general_form(&g, &mut r);
        let u = theta_psh(&form, &mut r, 0.9);
        let v = theta_psh(&form, &mut r, 0.9);
        let m = u.max_with(&v).unwrap();
        let slack = theta_convex_slack(&m, &form).unwrap();
        for x in 0..g.len() {
            let st = || std::iter::once(x).chain(g.stencil(x));
            if st().all(|y| u.get(y) >= v.get(y)) || st().all(|y| v.get(y) >= u.get(y)) {
                prop_assert!(slack[x].unwrap() >= -1e-9);
            }
        }
    }
}
