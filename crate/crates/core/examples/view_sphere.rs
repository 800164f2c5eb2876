//! Icosphere viewpoints and the size of the resulting codebook.

use aae_pose::geom::{inplane_rotations, subdivide_icosahedron, view_rotation_obj2cam, ViewSphere};

fn main() -> aae_pose::Result<()> {
    for level in 0..=4 {
        let sphere = subdivide_icosahedron(level)?;
        assert_eq!(sphere.len(), ViewSphere::expected_count(level));
        println!(
            "level {level}: {:>5} viewpoints, {:>6} codebook entries with 36 in-plane steps",
            sphere.len(),
            sphere.len() * 36
        );
    }

    let sphere = subdivide_icosahedron(1)?;
    let inplane = inplane_rotations(4)?;
    let v = sphere.viewpoints[5];
    for (i, r) in inplane.iter().enumerate() {
        let obj2cam = view_rotation_obj2cam(&v, r);
        // The viewpoint direction points back at the camera for every in-plane angle.
        let axis = obj2cam.apply(&v);
        println!(
            "in-plane {:3} deg: viewpoint -> [{:.3}, {:.3}, {:.3}]",
            90 * i,
            axis.x,
            axis.y,
            axis.z
        );
    }
    Ok(())
}
