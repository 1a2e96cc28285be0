//! RANSAC ground-plane extraction with least-squares refinement.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{GeometryError, PlaneModel, PointCloud, Vec3};
use crate::scalar::Real;

/// Fit the dominant plane of `cloud` by RANSAC over `iterations` random
/// 3-point hypotheses, then refit on the winning inlier set by least squares.
/// The returned normal is oriented with a non-negative world-up component.
/// Deterministic for a fixed seed.
pub fn fit_ground_plane<F: Real>(
    cloud: &PointCloud<F>,
    iterations: usize,
    inlier_tol: F,
    seed: u64,
) -> Result<PlaneModel<F>, GeometryError> {
    let pts = &cloud.points;
    if pts.len() < 3 {
        return Err(GeometryError::DegenerateCloud);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, Vec3<F>, F)> = None; // (inliers, normal, offset)
    for _ in 0..iterations {
        let (i, j, k) = three_distinct(&mut rng, pts.len());
        let Some((n, d)) = plane_from_points(pts[i], pts[j], pts[k]) else {
            continue;
        };
        let count = pts.iter().filter(|p| (n.dot(**p) + d).abs() <= inlier_tol).count();
        if best.as_ref().map_or(true, |(c, _, _)| count > *c) {
            best = Some((count, n, d));
        }
    }
    let Some((_, n, d)) = best else {
        // every sampled triple was collinear
        return Err(GeometryError::DegenerateCloud);
    };

    let inliers: Vec<usize> = (0..pts.len())
        .filter(|&i| (n.dot(pts[i]) + d).abs() <= inlier_tol)
        .collect();
    let (n, d) = least_squares_plane(pts, &inliers).unwrap_or((n, d));
    let (n, d) = orient_up(n, d);
    // recompute membership against the refined plane so the stored model is
    // self-consistent
    let inliers: Vec<usize> = (0..pts.len())
        .filter(|&i| (n.dot(pts[i]) + d).abs() <= inlier_tol)
        .collect();
    Ok(PlaneModel {
        normal: n,
        offset: d,
        inlier_indices: inliers,
    })
}

fn three_distinct<R: Rng>(rng: &mut R, n: usize) -> (usize, usize, usize) {
    let i = rng.gen_range(0..n);
    let j = loop {
        let j = rng.gen_range(0..n);
        if j != i {
            break j;
        }
    };
    let k = loop {
        let k = rng.gen_range(0..n);
        if k != i && k != j {
            break k;
        }
    };
    (i, j, k)
}

/// Plane through three points as `(unit normal, offset)`; `None` if collinear.
pub fn plane_from_points<F: Real>(a: Vec3<F>, b: Vec3<F>, c: Vec3<F>) -> Option<(Vec3<F>, F)> {
    let n = (b - a).cross(c - a);
    let scale = (b - a).norm().max((c - a).norm());
    if n.norm() <= F::of(1e-9) * scale * scale {
        return None;
    }
    let n = n.normalized()?;
    Some((n, -n.dot(a)))
}

fn orient_up<F: Real>(n: Vec3<F>, d: F) -> (Vec3<F>, F) {
    let flip = n.z < F::zero()
        || (n.z == F::zero() && (n.y < F::zero() || (n.y == F::zero() && n.x < F::zero())));
    if flip {
        (-n, -d)
    } else {
        (n, d)
    }
}

/// Total-least-squares plane through the index subset: centroid plus the
/// scatter matrix's smallest eigenvector.
pub fn least_squares_plane<F: Real>(pts: &[Vec3<F>], subset: &[usize]) -> Option<(Vec3<F>, F)> {
    if subset.len() < 3 {
        return None;
    }
    let inv = F::one() / F::of(subset.len() as f64);
    let mut mean = Vec3::zero();
    for &i in subset {
        mean = mean + pts[i] * inv;
    }
    let mut cov = [[F::zero(); 3]; 3];
    for &i in subset {
        let q = pts[i] - mean;
        let v = [q.x, q.y, q.z];
        for r in 0..3 {
            for c in 0..3 {
                cov[r][c] = cov[r][c] + v[r] * v[c];
            }
        }
    }
    let (vals, vecs) = jacobi_eigen_sym3(cov);
    let mut k = 0;
    for i in 1..3 {
        if vals[i] < vals[k] {
            k = i;
        }
    }
    let n = Vec3::new(vecs[0][k], vecs[1][k], vecs[2][k]).normalized()?;
    Some((n, -n.dot(mean)))
}

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matrix whose columns are the eigenvectors.
pub fn jacobi_eigen_sym3<F: Real>(mut a: [[F; 3]; 3]) -> ([F; 3], [[F; 3]; 3]) {
    let mut v = [
        [F::one(), F::zero(), F::zero()],
        [F::zero(), F::one(), F::zero()],
        [F::zero(), F::zero(), F::one()],
    ];
    for _ in 0..32 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off <= F::of(1e-30) {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q].abs() <= F::of(1e-300) {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (F::two() * a[p][q]);
            let t = {
                let sign = if theta < F::zero() { -F::one() } else { F::one() };
                sign / (theta.abs() + (theta * theta + F::one()).sqrt())
            };
            let c = F::one() / (t * t + F::one()).sqrt();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for k in 0..3 {
                let vkp = v[k][p];
                let vkq = v[k][q];
                v[k][p] = c * vkp - s * vkq;
                v[k][q] = s * vkp + c * vkq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}
