use pluripot::verify::{run_suite, Suite};
use pluripot::Tolerances;

fn assert_suite(s: Suite) {
    let rep = run_suite(s, 1, &Tolerances::default());
    for c in &rep.checks {
        println!("{} {} {} {}", rep.suite, c.name, c.passed, c.detail);
    }
    assert!(rep.passed, "{:?}", rep.failures());
}

#[test]
fn geometry() {
    assert_suite(Suite::Geometry);
}

#[test]
fn qpsh() {
    assert_suite(Suite::Qpsh);
}

#[test]
fn ma() {
    assert_suite(Suite::Ma);
}

#[test]
fn envelope() {
    assert_suite(Suite::Envelope);
}

#[test]
fn volumes() {
    assert_suite(Suite::Volumes);
}

#[test]
fn solver() {
    assert_suite(Suite::Solver);
}

#[test]
fn reports_are_seed_deterministic() {
    let tol = Tolerances::default();
    let a = run_suite(Suite::Qpsh, 9, &tol);
    let b = run_suite(Suite::Qpsh, 9, &tol);
    assert_eq!(a, b);
}
