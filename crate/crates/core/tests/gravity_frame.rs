use molodensky_core::assembly::{assemble_load, assemble_slp, outer_points, AssembledSystem, AuxMode, QuadratureConfig};
use molodensky_core::field::{gravity_frame, point_mass, DensityField, FdConfig};
use molodensky_core::mesh::{build_icosphere, SurfaceMap};
use molodensky_core::solvers::solve_dirichlet;
use molodensky_core::space::p2_dof_layout;

const R: f64 = 1.1;

fn check(level: usize, det_tol: f64) {
    let mesh = build_icosphere(level).unwrap();
    let layout = p2_dof_layout(&mesh);
    let map = SurfaceMap::new(mesh).unwrap();
    let map = map.with_positions(map.positions.iter().map(|p| p * R).collect()).unwrap();
    let cfg = QuadratureConfig::default();
    let slp = assemble_slp(&map, &layout, &cfg).unwrap();
    let data = vec![1.0 / R; outer_points(&map, &cfg).unwrap().len()];
    let load = assemble_load(&map, &layout, &data, &cfg).unwrap();
    let sys = AssembledSystem::dirichlet(&map, &layout, slp, load, AuxMode::Density).unwrap();
    let sol = solve_dirichlet(&sys).unwrap();
    let field = DensityField::from_solution(&map, &layout, &sol).unwrap();
    let frame = gravity_frame(&[&field], &map, &FdConfig::default()).unwrap();

    let det_exact = 2.0 / R.powi(9);
    assert!((det_exact - 0.847).abs() < 2e-3);
    for (v, x) in map.positions.iter().enumerate() {
        let (_, g, _) = point_mass(x);
        assert!((frame.g[v] - g).norm() <= 0.05 * g.norm(), "g at vertex {v}");
        assert!((frame.det[v] - det_exact).abs() <= det_tol * det_exact, "det at vertex {v}: {}", frame.det[v]);
        assert!(frame.grad_g[v].trace().abs() <= 1e-2 * frame.grad_g[v].norm(), "trace at vertex {v}");
    }
    assert!(frame.max_asymmetry <= 1e-3, "asymmetry {}", frame.max_asymmetry);
}

#[test]
fn sphere_frame_level2() {
    check(2, 0.1);
}

#[test]
fn sphere_frame_level3() {
    check(3, 0.1);
}
