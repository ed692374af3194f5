use serde::{Deserialize, Serialize};

use super::{AnchorSet, UwbError};
use crate::geom::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnOptions {
    pub max_iter: usize,
    /// Stop once the step norm falls below this, meters.
    pub tol: f64,
}

impl Default for GnOptions {
    fn default() -> Self {
        Self { max_iter: 20, tol: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnSolution {
    pub position: Vec2,
    /// Root mean square of the range residuals at `position`, meters.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Levenberg damping was needed on at least one iteration.
    pub damped: bool,
}

fn cost(anchors: &AnchorSet, ranges: &[(usize, f64)], p: Vec2) -> f64 {
    ranges.iter().map(|&(i, r)| (anchors.distance(i, p) - r).powi(2)).sum()
}

/// Minimizes Σᵢ (‖(x, y, h_tag) − aᵢ‖ − rᵢ)² over (x, y) from `x0`. Missing
/// ranges are `None`. Damping λ·I is added to JᵀJ only when it is near
/// singular or the plain step would increase the cost.
pub fn gauss_newton_solve(
    anchors: &AnchorSet,
    ranges: &[Option<f64>; 4],
    x0: Vec2,
    opts: &GnOptions,
) -> Result<GnSolution, UwbError> {
    if !x0.is_finite() {
        return Err(UwbError::NonFinite("initial position"));
    }
    let used: Vec<(usize, f64)> = ranges
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.filter(|r| r.is_finite()).map(|r| (i, r)))
        .collect();
    if used.len() < 3 {
        return Err(UwbError::TooFewRanges(used.len()));
    }

    let mut p = x0;
    let mut c = cost(anchors, &used, p);
    let mut damped = false;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(i, r) in &used {
            let d = anchors.distance(i, p).max(1e-12);
            let a = anchors.xy(i);
            let (jx, jy) = ((p.x - a.x) / d, (p.y - a.y) / d);
            let res = d - r;
            a11 += jx * jx;
            a12 += jx * jy;
            a22 += jy * jy;
            g1 += jx * res;
            g2 += jy * res;
        }
        let trace = a11 + a22;
        if !(trace > 1e-12) {
            return Err(UwbError::DegenerateGeometry);
        }
        let mut lambda = 0.0;
        let mut accepted = None;
        for _ in 0..30 {
            let (b11, b22) = (a11 + lambda, a22 + lambda);
            let det = b11 * b22 - a12 * a12;
            if det > 1e-12 * trace * trace {
                let step = Vec2::new((b22 * g1 - a12 * g2) / det, (b11 * g2 - a12 * g1) / det);
                let q = p - step;
                let cq = cost(anchors, &used, q);
                if cq <= c || step.norm() < opts.tol {
                    accepted = Some((q, cq, step.norm()));
                    break;
                }
            }
            lambda = if lambda == 0.0 { 1e-6 * trace } else { lambda * 10.0 };
            damped = true;
        }
        let Some((q, cq, step)) = accepted else {
            break;
        };
        p = q;
        c = cq;
        if step < opts.tol {
            converged = true;
            break;
        }
    }
    if !p.is_finite() {
        return Err(UwbError::DegenerateGeometry);
    }
    Ok(GnSolution {
        position: p,
        residual: (c / used.len() as f64).sqrt(),
        iterations,
        converged,
        damped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(h: [f64; 4], tag: f64) -> AnchorSet {
        AnchorSet::new(
            [[0.0, 0.0, h[0]], [5.0, 0.0, h[1]], [5.0, 5.0, h[2]], [0.0, 5.0, h[3]]],
            tag,
        )
        .unwrap()
    }

    fn exact(a: &AnchorSet, p: Vec2) -> [Option<f64>; 4] {
        std::array::from_fn(|i| Some(a.distance(i, p)))
    }

    #[test]
    fn centre_of_symmetric_square() {
        let a = square([1.0; 4], 1.0);
        let s = gauss_newton_solve(&a, &exact(&a, Vec2::new(2.5, 2.5)), Vec2::new(2.0, 2.0), &GnOptions::default()).unwrap();
        assert!(s.position.distance(Vec2::new(2.5, 2.5)) < 1e-6 && s.converged);
    }

    #[test]
    fn recovers_from_origin() {
        let a = square([1.5, 1.6, 1.7, 1.8], 0.2);
        let s = gauss_newton_solve(&a, &exact(&a, Vec2::new(1.0, 1.0)), Vec2::ZERO, &GnOptions::default()).unwrap();
        assert!(s.position.distance(Vec2::new(1.0, 1.0)) < 1e-6);
        assert!(s.residual < 1e-6);
    }

    #[test]
    fn three_ranges_suffice_two_do_not() {
        let a = square([1.5, 1.6, 1.7, 1.8], 0.2);
        let mut r = exact(&a, Vec2::new(3.0, 1.0));
        r[1] = None;
        let s = gauss_newton_solve(&a, &r, Vec2::new(2.5, 2.5), &GnOptions::default()).unwrap();
        assert!(s.position.distance(Vec2::new(3.0, 1.0)) < 1e-6);
        r[2] = None;
        assert_eq!(
            gauss_newton_solve(&a, &r, Vec2::new(2.5, 2.5), &GnOptions::default()),
            Err(UwbError::TooFewRanges(2))
        );
    }

    #[test]
    fn outside_the_anchor_rectangle() {
        let a = square([1.5, 1.6, 1.7, 1.8], 0.2);
        for p in [Vec2::new(-0.8, 2.0), Vec2::new(5.9, 5.5), Vec2::new(2.0, -1.0)] {
            let s = gauss_newton_solve(&a, &exact(&a, p), Vec2::new(2.5, 2.5), &GnOptions::default()).unwrap();
            assert!(s.position.distance(p) < 1e-6, "{p:?} -> {:?}", s.position);
        }
    }

    #[test]
    fn non_convergence_returns_best_iterate() {
        let a = square([1.5, 1.6, 1.7, 1.8], 0.2);
        let opts = GnOptions { max_iter: 1, tol: 1e-12 };
        let s = gauss_newton_solve(&a, &exact(&a, Vec2::new(4.0, 4.0)), Vec2::ZERO, &opts).unwrap();
        assert!(!s.converged && s.iterations == 1 && s.position.is_finite());
    }

    proptest! {
        #[test]
        fn exact_ranges_recover_truth(
            corners in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64, 1.0..2.0f64), 4),
            tx in 0.5..4.5f64, ty in 0.5..4.5f64,
            dx in -0.7..0.7f64, dy in -0.7..0.7f64,
        ) {
            let base = [[0.0, 0.0], [5.0, 0.0], [5.0, 5.0], [0.0, 5.0]];
            let pos: [[f64; 3]; 4] = std::array::from_fn(|i| [base[i][0] + corners[i].0, base[i][1] + corners[i].1, corners[i].2]);
            let a = AnchorSet::new(pos, 0.2).unwrap();
            let t = Vec2::new(tx, ty);
            let s = gauss_newton_solve(&a, &exact(&a, t), t + Vec2::new(dx, dy), &GnOptions::default()).unwrap();
            prop_assert!(s.position.distance(t) < 1e-6);
        }
    }
}
