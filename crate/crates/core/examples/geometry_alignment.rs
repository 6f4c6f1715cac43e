//! Score a generated solid that is a rotated, scaled and shifted copy of
//! the ground truth; the alignment search undoes the pose.
//!
//!     cargo run --release --example geometry_alignment

use cad_icl::geometry::rotation::{apply, rotations24};
use cad_icl::geometry::shapes::{Primitive, Sampling, Solid};
use cad_icl::geometry::{align_and_score, GeometryArtifact, VoxelSpec};

fn main() -> cad_icl::Result<()> {
    let bracket = Solid {
        add: vec![
            Primitive::Cuboid { center: [0.0, 0.0, 0.5], size: [6.0, 3.0, 1.0] },
            Primitive::Cuboid { center: [2.5, 0.0, 2.5], size: [1.0, 3.0, 3.0] },
        ],
        subtract: vec![Primitive::Cylinder { center: [-1.5, 0.0, 0.5], radius: 0.6, height: 2.0 }],
    };
    let truth = bracket.artifact(&Sampling::default())?;

    let rot = rotations24()[7];
    let (surface, edges) = truth.map_points(|p| {
        let r = apply(&rot, p);
        [3.0 * r[0] + 10.0, 3.0 * r[1] - 4.0, 3.0 * r[2] + 1.0]
    });
    let moved = GeometryArtifact::from_samples(surface, edges, 64, 2)?;

    let spec = VoxelSpec::default();
    let m = align_and_score(&moved, &truth, &spec)?;
    println!("IoU {:.4}  CD {:.2e}  ECD {:.2e}", m.iou, m.cd, m.ecd);
    println!("best of 96 candidates: {:?}", m.best_transform);

    let off = Solid::single(Primitive::Cylinder { center: [0.0; 3], radius: 2.0, height: 1.0 }).artifact(&Sampling::default())?;
    let m = align_and_score(&off, &truth, &spec)?;
    println!("disc vs bracket: IoU {:.4}  CD {:.4}", m.iou, m.cd);

    let m = align_and_score(&GeometryArtifact::invalid_penalty(), &truth, &spec)?;
    println!("invalid output:  IoU {:.4}  CD {:.4}  valid {}", m.iou, m.cd, m.valid);
    Ok(())
}
