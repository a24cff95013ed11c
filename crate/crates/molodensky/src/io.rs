//! Mesh text files and CSV output.

use std::io::{self, BufRead, Write};

use molodensky_core::driver::ReportRow;
use molodensky_core::mesh::TriangleMesh;
use molodensky_core::Vec3;

#[derive(Debug, thiserror::Error)]
pub enum MeshFileError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("mesh: {0}")]
    Mesh(#[from] molodensky_core::Error),
}

/// Writes `V F`, then `V` lines `x y z`, then `F` lines `i j k` (0-based).
pub fn write_mesh(mesh: &TriangleMesh, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{} {}", mesh.vertices.len(), mesh.triangles.len())?;
    for v in &mesh.vertices {
        writeln!(out, "{:e} {:e} {:e}", v.x, v.y, v.z)?;
    }
    for t in &mesh.triangles {
        writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

pub fn read_mesh(input: impl BufRead) -> Result<TriangleMesh, MeshFileError> {
    let mut lines = input.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let mut next = |what: &str| -> Result<(usize, Vec<String>), MeshFileError> {
        match lines.next() {
            Some((n, Ok(s))) => Ok((n, s.split_whitespace().map(str::to_string).collect())),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(MeshFileError::Parse { line: 0, reason: format!("unexpected end of file, expected {what}") }),
        }
    };
    let parse_err = |line: usize, reason: &str| MeshFileError::Parse { line, reason: reason.to_string() };
    let (n, head) = next("header")?;
    let [nv, nf]: [usize; 2] = match head.iter().map(|s| s.parse()).collect::<Result<Vec<usize>, _>>() {
        Ok(v) if v.len() == 2 => [v[0], v[1]],
        _ => return Err(parse_err(n, "header must be \"V F\"")),
    };
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, f) = next("vertex")?;
        match f.iter().map(|s| s.parse()).collect::<Result<Vec<f64>, _>>() {
            Ok(c) if c.len() == 3 => vertices.push(Vec3::new(c[0], c[1], c[2])),
            _ => return Err(parse_err(n, "vertex must be \"x y z\"")),
        }
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (n, f) = next("triangle")?;
        match f.iter().map(|s| s.parse()).collect::<Result<Vec<usize>, _>>() {
            Ok(c) if c.len() == 3 && c.iter().all(|&i| i < nv) => triangles.push([c[0], c[1], c[2]]),
            _ => return Err(parse_err(n, "triangle must be three vertex indices")),
        }
    }
    Ok(TriangleMesh::new(vertices, triangles, 0)?)
}

pub const REPORT_HEADER: &str = "iter,theta,delta,radius_mean,radius_err,res_G,res_W,a1,a2,a3,wall_s";

pub fn report_line(row: &ReportRow) -> String {
    format!(
        "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.3}",
        row.iter, row.theta, row.delta, row.radius_mean, row.radius_err, row.res_g, row.res_w, row.a[0], row.a[1], row.a[2], row.wall_s
    )
}

/// Comment block, header and rows of a CSV table.
pub fn write_csv(mut out: impl Write, comments: &str, header: &str, rows: impl IntoIterator<Item = String>) -> io::Result<()> {
    out.write_all(comments.as_bytes())?;
    writeln!(out, "{header}")?;
    for r in rows {
        writeln!(out, "{r}")?;
    }
    out.flush()
}
