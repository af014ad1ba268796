use super::{case_index, cell_corners, linear_crossing, tables::EDGE_TABLE, triangulate};
use crate::error::Result;
use crate::field::FieldGrid;
use crate::geometry::TriMesh;

/// Classic marching cubes of a scalar grid at `iso`.
///
/// Vertices lie on grid edges at the linearly interpolated crossing. Faces
/// are wound so normals point toward values above `iso`.
pub fn extract_mesh_scalar(grid: &FieldGrid, iso: f64) -> Result<TriMesh> {
    let values = grid.scalars()?;
    let spec = grid.spec;
    let cell_spec = spec.cells();
    let cells: Vec<usize> = (0..cell_spec.len())
        .filter(|&c| {
            let corners = cell_corners(&spec, cell_spec.coords(c));
            EDGE_TABLE[case_index(&corners.map(|v| values[v]), iso)] != 0
        })
        .collect();
    Ok(triangulate(
        &spec,
        &cells,
        iso,
        |v| values[v],
        |_, _, a, b| linear_crossing(iso, a, b),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::field::{sample_field_grid, FieldKind, FieldOracle, GridSpec};
    use crate::geometry::{shapes, Vec3};

    fn signed_volume(m: &TriMesh) -> f64 {
        m.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| m.vertices[i as usize]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    #[test]
    fn sphere_sdf_gives_closed_outward_mesh() {
        let oracle = FieldOracle::new(shapes::icosphere(0.5, 4)).unwrap();
        let g = sample_field_grid(&oracle, FieldKind::Sdf, &GridSpec::cube(32).unwrap()).unwrap();
        let mesh = extract_mesh_scalar(&g, 0.0).unwrap();
        assert!(mesh.is_watertight());
        assert_eq!(mesh.orientation_conflicts(), 0);
        let v = signed_volume(&mesh);
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 0.125;
        assert!((v - exact).abs() < 0.05 * exact, "volume {v}");
        let h = g.spec.spacing.x;
        for p in &mesh.vertices {
            assert!((p.norm() - 0.5).abs() < h);
        }
    }

    #[test]
    fn all_positive_grid_is_empty() {
        let g =
            FieldGrid::from_fn(FieldKind::Sdf, GridSpec::cube(5).unwrap(), |_| vec![1.0]).unwrap();
        assert!(extract_mesh_scalar(&g, 0.0).unwrap().is_empty());
    }

    #[test]
    fn linear_field_is_reproduced_exactly() {
        let g = FieldGrid::from_fn(FieldKind::Sdf, GridSpec::cube(9).unwrap(), |p| {
            vec![p.z - 0.1]
        })
        .unwrap();
        let mesh = extract_mesh_scalar(&g, 0.0).unwrap();
        assert!(!mesh.is_empty());
        for p in &mesh.vertices {
            assert!((p.z - 0.1).abs() < 1e-6);
        }
        for t in 0..mesh.num_triangles() {
            assert!(mesh.face_normal(t).dot(&Vec3::z()) > 0.99);
        }
    }

    #[test]
    fn vector_grid_rejected() {
        let g = FieldGrid::from_fn(FieldKind::Vt, GridSpec::cube(3).unwrap(), |_| {
            vec![0.0, 0.0, 1.0]
        })
        .unwrap();
        assert!(matches!(
            extract_mesh_scalar(&g, 0.0),
            Err(Error::FieldType(_))
        ));
    }
}
