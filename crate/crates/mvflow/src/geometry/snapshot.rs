//! CSV snapshots of a body: one row per node with angles, support value,
//! principal radii, principal curvatures, and quadrature weight.
//!
//! Floats are written with 17 significant digits, so a write/read cycle
//! reproduces the support function bit for bit. Readers reconstruct the
//! grid from the angle columns and the support column alone; the derived
//! columns are for external consumers and are not trusted on input.

use super::{AxisymProfile, CurvatureData, GeomError, GeometryState, SphereGrid2D};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Writes one snapshot. Axisymmetric layout:
/// `theta,h,R_1..R_n,lambda_1..lambda_n,weight`; the 2D grid adds a `phi`
/// column after `theta`.
pub fn write_snapshot(
    path: &Path,
    state: &GeometryState,
    curv: &CurvatureData,
) -> Result<(), GeomError> {
    let n = curv.n;
    let mut out = String::new();
    let two_d = matches!(state, GeometryState::Grid2D(_));
    out.push_str("theta");
    if two_d {
        out.push_str(",phi");
    }
    out.push_str(",h");
    for i in 1..=n {
        let _ = write!(out, ",R_{i}");
    }
    for i in 1..=n {
        let _ = write!(out, ",lambda_{i}");
    }
    out.push_str(",weight\n");
    let h = state.support();
    for node in 0..curv.node_count {
        match state {
            GeometryState::Axisym(p) => {
                let _ = write!(out, "{:.17e}", p.theta(node));
            }
            GeometryState::Grid2D(g) => {
                let (theta, phi) = g.node_angles(node);
                let _ = write!(out, "{theta:.17e},{phi:.17e}");
            }
        }
        let _ = write!(out, ",{:.17e}", h[node]);
        for &r in curv.radii_at(node) {
            let _ = write!(out, ",{r:.17e}");
        }
        for &l in curv.lambda_at(node) {
            let _ = write!(out, ",{l:.17e}");
        }
        let _ = writeln!(out, ",{:.17e}", curv.weight[node]);
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a snapshot back into a body. The hypersurface dimension comes from
/// the number of `R_*` columns, the backend from the presence of a `phi`
/// column, and the grid shape from the angle values.
pub fn read_snapshot(path: &Path) -> Result<GeometryState, GeomError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| GeomError::Parse("empty snapshot".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let two_d = cols.get(1) == Some(&"phi");
    let n = cols.iter().filter(|c| c.starts_with("R_")).count();
    if n == 0 || cols.first() != Some(&"theta") {
        return Err(GeomError::Parse(format!(
            "unrecognized snapshot header: {header}"
        )));
    }
    let expected = cols.len();
    let mut thetas = Vec::new();
    let mut phis = Vec::new();
    let mut h = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected {
            return Err(GeomError::Parse(format!(
                "line {}: expected {expected} fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64, GeomError> {
            s.parse::<f64>()
                .map_err(|e| GeomError::Parse(format!("line {}: {e}: {s:?}", lineno + 1)))
        };
        thetas.push(parse(fields[0])?);
        let mut at = 1;
        if two_d {
            phis.push(parse(fields[1])?);
            at = 2;
        }
        h.push(parse(fields[at])?);
    }
    if two_d {
        if n != 2 {
            return Err(GeomError::Parse(format!(
                "2D snapshots are surfaces in R^3, found {n} radii columns"
            )));
        }
        // Interior rings start at node 1; ring length = run of equal thetas.
        if h.len() < 4 {
            return Err(GeomError::Parse("2D snapshot too short".into()));
        }
        let ring_theta = thetas[1];
        let n_phi = thetas[1..]
            .iter()
            .take_while(|&&t| t == ring_theta)
            .count();
        if n_phi == 0 || (h.len() - 2) % n_phi != 0 {
            return Err(GeomError::Parse(
                "2D snapshot rows do not form complete rings".into(),
            ));
        }
        let n_theta = (h.len() - 2) / n_phi + 1;
        Ok(GeometryState::Grid2D(SphereGrid2D::new(
            n_theta, n_phi, h,
        )?))
    } else {
        Ok(GeometryState::Axisym(AxisymProfile::new(n, h)?))
    }
}
