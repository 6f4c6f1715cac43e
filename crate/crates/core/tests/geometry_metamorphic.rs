mod common;

use cad_icl::geometry::rotation::{det, mul, raw_products, transpose, IDENTITY};
use cad_icl::geometry::shapes::Sampling;
use cad_icl::geometry::{
    align_and_score, centroid, chamfer_distance, edge_chamfer_distance, gyration_radius, normalize, rotations24,
    voxel_iou, GeometryArtifact, KdTree, Reference, Rot, VoxelGrid, VoxelSpec,
};
use cad_icl::Error;
use common::{bracket, chamfer_oracle, rigid_image};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type P = [f64; 3];

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<P> {
    (0..n)
        .map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])
        .collect()
}

/// Rotation matrix of a random unit quaternion.
fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let mut q = [0.0; 4];
    for v in q.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|v| v / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn rotate(m: &[[f64; 3]; 3], pts: &[P]) -> Vec<P> {
    pts.iter()
        .map(|p| {
            let mut o = [0.0; 3];
            for i in 0..3 {
                o[i] = m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2];
            }
            o
        })
        .collect()
}

#[test]
fn chamfer_hand_values() {
    assert_eq!(chamfer_distance(&[[0.0; 3]], &[[1.0, 0.0, 0.0]]).unwrap(), 1.0);
    assert_eq!(chamfer_distance(&[[0.0; 3], [2.0, 0.0, 0.0]], &[[1.0, 0.0, 0.0]]).unwrap(), 1.0);
    // the penalty singleton against two points at ±x
    let penalty = GeometryArtifact::invalid_penalty();
    assert_eq!(chamfer_distance(&penalty.surface, &[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]).unwrap(), 1.0);
    assert!(matches!(chamfer_distance(&[], &[[0.0; 3]]), Err(Error::Contract(_))));
    assert!(matches!(edge_chamfer_distance(&[[0.0; 3]], &[]), Err(Error::Contract(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chamfer_matches_brute_force(seed in any::<u64>(), n in 1usize..60, m in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, q) = (cloud(&mut rng, n), cloud(&mut rng, m));
        let got = chamfer_distance(&p, &q).unwrap();
        prop_assert!((got - chamfer_oracle(&p, &q)).abs() < 1e-12);
        prop_assert_eq!(got, chamfer_distance(&q, &p).unwrap());
        prop_assert_eq!(chamfer_distance(&p, &p).unwrap(), 0.0);
        prop_assert_eq!(edge_chamfer_distance(&p, &q).unwrap(), got);
    }

    #[test]
    fn chamfer_invariant_under_common_rotation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, q) = (cloud(&mut rng, 40), cloud(&mut rng, 30));
        let r = random_rotation(&mut rng);
        let before = chamfer_distance(&p, &q).unwrap();
        let after = chamfer_distance(&rotate(&r, &p), &rotate(&r, &q)).unwrap();
        prop_assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn kdtree_nearest_is_exact(seed in any::<u64>(), n in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = cloud(&mut rng, n);
        // duplicates and coplanar points stress the splits
        pts.extend_from_within(..n / 3);
        for p in pts.iter_mut().take(n / 4) {
            p[2] = 0.0;
        }
        let tree = KdTree::new(&pts);
        for q in cloud(&mut rng, 20) {
            let want = pts.iter().map(|p| (0..3).map(|a| (p[a] - q[a]).powi(2)).sum::<f64>()).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(tree.nearest_dist2(&q), want);
        }
    }

    #[test]
    fn normalize_postconditions_and_idempotence(seed in any::<u64>(), n in 2usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = cloud(&mut rng, n);
        prop_assume!(gyration_radius(&pts, &centroid(&pts).unwrap()).unwrap() > 1e-6);
        let spec = VoxelSpec { resolution: 16, ..VoxelSpec::default() };
        let a = GeometryArtifact::from_samples(pts.clone(), pts, 16, 1).unwrap();
        let once = normalize(&a, &spec).unwrap();
        for v in centroid(&once.surface).unwrap() {
            prop_assert!(v.abs() < 1e-9);
        }
        prop_assert!((once.stats.gyration_radius - 1.0).abs() < 1e-9);
        let twice = normalize(&once, &spec).unwrap();
        for (x, y) in once.surface.iter().zip(&twice.surface) {
            for k in 0..3 {
                prop_assert!((x[k] - y[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn iou_is_a_bounded_similarity(seed in any::<u64>(), density in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = VoxelGrid::empty([0.0; 3], 1.0, 5);
        let mut b = a.clone();
        for i in 0..125 {
            a.set(i, rng.random_bool(density));
            b.set(i, rng.random_bool(density));
        }
        let iou = voxel_iou(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&iou));
        prop_assert_eq!(iou == 1.0, a == b && a.count() > 0);
        prop_assert_eq!(voxel_iou(&a, &a).unwrap(), if a.count() > 0 { 1.0 } else { 0.0 });
    }
}

#[test]
fn iou_hand_values() {
    let mut a = VoxelGrid::empty([0.0; 3], 1.0, 4);
    let mut b = a.clone();
    assert_eq!(voxel_iou(&a, &b).unwrap(), 0.0);
    a.set(1, true);
    a.set(2, true);
    b.set(2, true);
    b.set(3, true);
    assert_eq!(voxel_iou(&a, &b).unwrap(), 1.0 / 3.0);
    assert_eq!(voxel_iou(&a, &a).unwrap(), 1.0);
    let mut c = VoxelGrid::empty([0.0; 3], 1.0, 4);
    c.set(40, true);
    assert_eq!(voxel_iou(&a, &c).unwrap(), 0.0);
    let other = VoxelGrid::empty([0.0; 3], 1.0, 5);
    assert!(matches!(voxel_iou(&a, &other), Err(Error::Contract(_))));
    let shifted = VoxelGrid::empty([0.5, 0.0, 0.0], 1.0, 4);
    assert!(voxel_iou(&a, &shifted).is_err());
}

/// Independent enumeration over quarter-turn triples, deduplicated.
fn quarter_turns() -> Vec<Rot> {
    fn turn(axis: usize, k: usize) -> Rot {
        let (c, s) = [(1, 0), (0, 1), (-1, 0), (0, -1)][k];
        let mut m = [[0i8; 3]; 3];
        let (i, j) = [(1, 2), (2, 0), (0, 1)][axis];
        m[axis][axis] = 1;
        m[i][i] = c;
        m[j][j] = c;
        m[i][j] = -s;
        m[j][i] = s;
        m
    }
    let mut out: Vec<Rot> = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                let r = mul(&turn(2, c), &mul(&turn(1, b), &turn(0, a)));
                if !out.contains(&r) {
                    out.push(r);
                }
            }
        }
    }
    out
}

#[test]
fn rotations_form_the_cube_group() {
    let rots = rotations24();
    assert_eq!(rots.len(), 24);
    assert_eq!(rots[0], IDENTITY);
    assert_eq!(raw_products().len(), 64);
    let mut mine = quarter_turns();
    let mut theirs = rots.to_vec();
    mine.sort();
    theirs.sort();
    assert_eq!(mine, theirs);
    for r in rots {
        assert_eq!(det(r), 1);
        assert!(r.iter().flatten().all(|v| (-1..=1).contains(v)));
        assert_eq!(mul(r, &transpose(r)), IDENTITY);
    }
    // Cayley table: every row is a permutation of the group
    for a in rots {
        let mut row: Vec<usize> = rots
            .iter()
            .map(|b| rots.iter().position(|x| *x == mul(a, b)).expect("closed under composition"))
            .collect();
        row.sort_unstable();
        assert_eq!(row, (0..24).collect::<Vec<_>>());
    }
}

#[test]
fn centroid_and_gyration_examples() {
    let pair = [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]];
    assert_eq!(centroid(&pair).unwrap(), [0.0; 3]);
    assert_eq!(gyration_radius(&pair, &[0.0; 3]).unwrap(), 1.0);
    let single = [[2.0, -1.0, 0.5]];
    assert_eq!(centroid(&single).unwrap(), single[0]);
    assert_eq!(gyration_radius(&single, &single[0]).unwrap(), 0.0);
    assert!(centroid(&[]).is_err());
    let degenerate = GeometryArtifact::from_samples(vec![[1.0; 3]; 4], vec![], 8, 1).unwrap();
    assert!(matches!(normalize(&degenerate, &VoxelSpec::default()), Err(Error::Normalization(_))));
}

#[test]
fn sphere_shell_gyration_radius() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<P> = (0..20_000)
        .map(|_| loop {
            let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0f64..1.0)];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 1e-3 && n <= 1.0 {
                break [3.0 * v[0] / n, 3.0 * v[1] / n, 3.0 * v[2] / n];
            }
        })
        .collect();
    let r = gyration_radius(&pts, &centroid(&pts).unwrap()).unwrap();
    assert!((r - 3.0).abs() / 3.0 < 0.01, "{r}");
}

#[test]
fn normalize_undoes_scale_and_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts = cloud(&mut rng, 500);
    let moved: Vec<P> = pts.iter().map(|p| [5.0 * p[0] + 1.0, 5.0 * p[1] + 2.0, 5.0 * p[2] + 3.0]).collect();
    let spec = VoxelSpec { resolution: 16, ..VoxelSpec::default() };
    let a = normalize(&GeometryArtifact::from_samples(pts, vec![], 16, 1).unwrap(), &spec).unwrap();
    let b = normalize(&GeometryArtifact::from_samples(moved, vec![], 16, 1).unwrap(), &spec).unwrap();
    for (x, y) in a.surface.iter().zip(&b.surface) {
        for k in 0..3 {
            assert!((x[k] - y[k]).abs() < 1e-9);
        }
    }
    assert_eq!(a.voxels, b.voxels);
}

#[test]
fn identical_solids_score_perfectly() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let q = bracket(&mut rng).artifact(&Sampling::default()).unwrap();
    let m = align_and_score(&q, &q, &VoxelSpec::default()).unwrap();
    assert!(m.valid);
    assert_eq!(m.iou, 1.0);
    assert!(m.cd < 1e-12 && m.ecd < 1e-12);
    let t = m.best_transform.unwrap();
    assert_eq!(t.rotation, 0);
}

#[test]
fn quarter_turn_and_double_scale_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let q = bracket(&mut rng).artifact(&Sampling::default()).unwrap();
    let rz: Rot = [[0, -1, 0], [1, 0, 0], [0, 0, 1]];
    let p = rigid_image(&q, &rz, 2.0, [0.0; 3]);
    let m = align_and_score(&p, &q, &VoxelSpec::default()).unwrap();
    assert!(m.iou >= 0.95, "{m:?}");
    assert!(m.cd <= 1e-6 && m.ecd <= 1e-6, "{m:?}");
    let t = m.best_transform.unwrap();
    assert_eq!(rotations24()[t.rotation], transpose(&rz));
    assert_eq!((t.translation, t.scale), (Reference::Generated, Reference::Generated));
}

#[test]
fn penalty_scores_against_normalized_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let q = bracket(&mut rng).artifact(&Sampling { surface_points: 800, edge_points: 200, ..Sampling::default() }).unwrap();
    let spec = VoxelSpec::default();
    let m = align_and_score(&GeometryArtifact::invalid_penalty(), &q, &spec).unwrap();
    assert!(!m.valid);
    assert_eq!(m.iou, 0.0);
    assert!(m.best_transform.is_none());
    let nq = normalize(&q, &spec).unwrap();
    let norms: Vec<f64> = nq.surface.iter().map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()).collect();
    let want = 0.5 * norms.iter().cloned().fold(f64::INFINITY, f64::min) + 0.5 * norms.iter().sum::<f64>() / norms.len() as f64;
    assert!((m.cd - want).abs() < 1e-12);
    assert!(m.cd.is_finite() && m.ecd.is_finite() && m.ecd >= 0.0);
}

#[test]
fn artifact_round_trips_through_json() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = bracket(&mut rng).artifact(&Sampling { resolution: 20, ..Sampling::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.json");
    a.save(&path).unwrap();
    let b = GeometryArtifact::load(&path).unwrap();
    assert_eq!(a, b);
    assert_eq!(b.voxels.count(), a.voxels.count());
}
