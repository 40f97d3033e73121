use mras::diag::{vtk_string, write_vtk, ErrorSeries, RunReport};
use mras::fem::{CellField, NodalField};
use mras::mesh::Mesh;

fn two_triangles() -> Mesh {
    Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![[0, 1, 2], [0, 2, 3]]).unwrap()
}

#[test]
fn vtk_matches_golden_file() {
    let mesh = two_triangles();
    let u = NodalField(vec![0.0, 0.5, 1.0, -2.0]);
    let q = CellField(vec![1.0, 0.25]);
    let golden = include_str!("data/two_triangles.vtk");
    assert_eq!(vtk_string(&mesh, "two triangles", &[("u", &u)], &[("q", &q)]).unwrap(), golden);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/out.vtk");
    write_vtk(&path, &mesh, "two triangles", &[("u", &u)], &[("q", &q)]).unwrap();
    assert_eq!(std::fs::read_to_string(path).unwrap(), golden);
}

#[test]
fn vtk_rejects_mismatched_fields() {
    let mesh = two_triangles();
    let short = NodalField(vec![0.0; 3]);
    assert!(vtk_string(&mesh, "x", &[("u", &short)], &[]).is_err());
    let wrong = CellField(vec![0.0; 4]);
    assert!(vtk_string(&mesh, "x", &[], &[("q", &wrong)]).is_err());
}

#[test]
fn csv_file_roundtrip_is_exact() {
    let mut s = ErrorSeries::default();
    for k in 0..50 {
        let t = 0.005 * k as f64;
        s.push(t, (-t).exp() / 3.0, 1e-17 + (7.0 * t).sin().abs());
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a/b/errors.csv");
    s.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("t,eq,eu,energy\n"));
    assert_eq!(text.lines().count(), 51);
    let back = ErrorSeries::from_csv(&text).unwrap();
    assert_eq!(back, s);
    // energy column is eq^2 + eu^2
    let line: Vec<f64> = text.lines().nth(10).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(line[3], line[1] * line[1] + line[2] * line[2]);
}

#[test]
fn csv_errors_name_the_line() {
    let err = ErrorSeries::from_csv("t,eq,eu,energy\n0,1,2,5\n0.1,x,2,3\n").unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
    assert!(ErrorSeries::from_csv("time,a\n").is_err());
    assert!(ErrorSeries::from_csv("t,eq,eu,energy\n1,2,3\n").is_err());
}

#[test]
fn report_lists_every_field() {
    let mut s = ErrorSeries::default();
    for k in 0..20 {
        let t = 0.1 * k as f64;
        s.push(t, (-t).exp(), 0.5 * (-t).exp());
    }
    let mut r = RunReport::from_series(&s, 1e-6);
    r.config = vec![("benchmark".into(), "darcy".into())];
    let text = r.render();
    for key in [
        "config.benchmark = darcy",
        "initial_eq = 1e0",
        "eq_ratio",
        "monotonicity_violations = 0",
        "decay_rate",
        "threshold_step = none",
        "wall_clock_secs",
    ] {
        assert!(text.contains(key), "{key} missing from\n{text}");
    }
    assert!((r.decay_rate.unwrap() - 2.0).abs() < 1e-9);
}
