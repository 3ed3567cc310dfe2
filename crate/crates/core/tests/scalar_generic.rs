use pluripot::envelope::{envelope, EnvelopeStatus};
use pluripot::geometry::{self, make_closed_form};
use pluripot::io::{read_node_table, write_node_table};
use pluripot::linalg::SymMat;
use pluripot::ma::{ma, npp_mixed};
use pluripot::qpsh::QPshFunction;
use pluripot::solver::{solve_twisted, SolverSetup};
use pluripot::volumes::vol_big;
use pluripot::{GridTorus, Tolerances};
use std::f64::consts::TAU;

type F32Form = geometry::BackgroundForm<f32>;

fn tol() -> Tolerances {
    Tolerances {
        tol_psh: 1e-4,
        tol_big: 1e-4,
        tol_class: 1e-6,
        envelope_update: 1e-6,
        solve_rel: 1e-5,
        ..Tolerances::default()
    }
}

#[test]
fn single_precision_products_track_double() {
    let g = GridTorus::new(&[16, 16]).unwrap();
    let a = SymMat::<f32>::diag(&[1.0, 2.0]);
    let tau: Vec<f32> = (0..g.len())
        .map(|i| {
            let x = g.position(i);
            (0.01 * (TAU * x[0]).sin() * (TAU * x[1]).cos()) as f32
        })
        .collect();
    let form: F32Form = make_closed_form(&g, a, &tau).unwrap();
    let u = QPshFunction::<f32>::zeros(&g);
    let m32 = ma(&form, &u).unwrap().total_mass();

    let tau64: Vec<f64> = tau.iter().map(|&v| v as f64).collect();
    let form64 = make_closed_form(&g, SymMat::<f64>::diag(&[1.0, 2.0]), &tau64).unwrap();
    let m64 = ma(&form64, &QPshFunction::zeros(&g)).unwrap().total_mass();
    assert!(((m32 as f64) - m64).abs() <= 1e-5 * m64, "{m32} vs {m64}");

    let p = npp_mixed(&[&form, &form], &[&u, &u]).unwrap();
    assert_eq!(p.total_mass(), m32);
}

#[test]
fn single_precision_envelope_volume_and_solve() {
    let g = GridTorus::new(&[24]).unwrap();
    let form = F32Form::constant(&g, SymMat::scalar(1, 10.0f32)).unwrap();
    let f: Vec<f32> = (0..24).map(|i| ((TAU * i as f64 / 24.0).cos() as f32) * 0.5).collect();
    let env = envelope(&form, &f, &tol()).unwrap();
    assert_eq!(env.status, EnvelopeStatus::Converged);
    assert!(env.env.values().iter().zip(&f).all(|(a, b)| a <= b));
    assert_eq!(vol_big(&form, &tol()).unwrap(), 10.0f32);

    let unit = F32Form::constant(&g, SymMat::scalar(1, 1.0f32)).unwrap();
    let s = SolverSetup::simple(unit, vec![std::f32::consts::E; 24], 2.0, &tol()).unwrap();
    let r = solve_twisted(&s, &tol()).unwrap();
    assert!(r.converged);
    assert!(r.phi().values().iter().all(|v| (v + 0.5).abs() <= 1e-5));
}

#[test]
fn node_tables_round_trip_in_both_precisions() {
    let vals = vec![0.1f32, -2.5, f32::NEG_INFINITY, 3.0e-20];
    let mut buf = Vec::new();
    write_node_table(&mut buf, "u", &vals).unwrap();
    let back: Vec<f32> = read_node_table(buf.as_slice(), 4).unwrap();
    assert_eq!(back, vals);
    let wide: Vec<f64> = read_node_table(buf.as_slice(), 4).unwrap();
    assert_eq!(wide[1], -2.5);
    assert!(read_node_table::<f64, _>(buf.as_slice(), 5).is_err());
}
