use molodensky::io::{read_mesh, report_line, write_csv, write_mesh, REPORT_HEADER};
use molodensky_core::driver::ReportRow;
use molodensky_core::mesh::{build_cube_surface, build_icosphere};

#[test]
fn mesh_round_trip() {
    for mesh in [build_icosphere(2).unwrap(), build_cube_surface(1).unwrap()] {
        let mut buf = Vec::new();
        write_mesh(&mesh, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), format!("{} {}", mesh.vertices.len(), mesh.triangles.len()));
        assert_eq!(text.lines().count(), 1 + mesh.vertices.len() + mesh.triangles.len());
        let back = read_mesh(buf.as_slice()).unwrap();
        assert_eq!(back.triangles, mesh.triangles);
        assert_eq!(back.vertices, mesh.vertices);
        assert_eq!(back.edges.len(), mesh.edges.len());
    }
}

#[test]
fn bad_mesh_files_rejected() {
    for text in ["3\n", "1 1\n0 0\n0 0 0\n", "3 1\n0 0 0\n1 0 0\n0 1 0\n0 1 5\n", "3 1\n0 0 0\n1 0 0\n0 1 0\n0 1 2\n"] {
        assert!(read_mesh(text.as_bytes()).is_err(), "{text:?}");
    }
}

#[test]
fn report_csv_layout() {
    let row = ReportRow {
        iter: 3,
        theta: 2.6,
        delta: 0.1,
        radius_mean: 1.05,
        radius_err: 1e-3,
        res_g: 0.5,
        res_w: 0.25,
        a: [1e-9, -2e-9, 0.0],
        a_dirichlet: [0.0; 3],
        total_density: -12.0,
        f_norm: 1.0,
        restart: 0,
        wall_s: 1.5,
    };
    let mut buf = Vec::new();
    write_csv(&mut buf, "# level=2\n", REPORT_HEADER, [report_line(&row)]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# level=2");
    assert_eq!(lines[1], "iter,theta,delta,radius_mean,radius_err,res_G,res_W,a1,a2,a3,wall_s");
    let fields: Vec<f64> = lines[2].split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(fields.len(), 11);
    assert_eq!(fields[0], 3.0);
    assert_eq!(fields[3], 1.05);
    assert_eq!(fields[8], -2e-9);
}
