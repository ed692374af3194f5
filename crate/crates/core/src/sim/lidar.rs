use std::f64::consts::PI;

use crate::geom::{Segment, Vec2};

use super::map::WorldMap;
use super::RobotState;

/// Range along `angle` from `origin` to the nearest of `segments`, capped at `max_range`.
pub fn raycast_all<'a, I>(segments: I, origin: Vec2, angle: f64, max_range: f64) -> f64
where
    I: IntoIterator<Item = &'a Segment>,
{
    let dir = Vec2::from_angle(angle);
    segments
        .into_iter()
        .filter_map(|s| s.ray_hit(origin, dir))
        .fold(max_range, f64::min)
}

/// Range to the nearest static map segment, or `max_range` if nothing is hit.
pub fn raycast(map: &WorldMap, origin: Vec2, angle: f64, max_range: f64) -> f64 {
    raycast_all(&map.segments, origin, angle, max_range)
}

/// Dense 360° scan; ray `i` is fired at `theta + 2πi / n_rays`.
pub fn scan_lidar(
    map: &WorldMap,
    obstacles_at_t: &[Segment],
    pose: &RobotState,
    n_rays: usize,
    max_range: f64,
) -> Vec<f64> {
    let origin = pose.position();
    let step = 2.0 * PI / n_rays as f64;
    (0..n_rays)
        .map(|i| {
            let angle = pose.theta + step * i as f64;
            raycast_all(map.segments.iter().chain(obstacles_at_t), origin, angle, max_range)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::map::Bounds;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    fn big_bounds() -> Bounds {
        Bounds::new(Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0))
    }

    #[test]
    fn perpendicular_hit() {
        let map = WorldMap::new(vec![Segment::from_coords(1.0, -1.0, 1.0, 1.0)], big_bounds()).unwrap();
        assert!((raycast(&map, Vec2::ZERO, 0.0, 3.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_map_returns_max_range() {
        let map = WorldMap::empty(big_bounds());
        assert_eq!(raycast(&map, Vec2::ZERO, 1.234, 3.5), 3.5);
        let scan = scan_lidar(&map, &[], &RobotState::at(1.0, 2.0, 0.3), 360, 3.5);
        assert_eq!(scan.len(), 360);
        assert!(scan.iter().all(|&r| r == 3.5));
    }

    #[test]
    fn diagonal_hit() {
        let map = WorldMap::new(vec![Segment::from_coords(1.0, 0.0, 1.0, 2.0)], big_bounds()).unwrap();
        let r = raycast(&map, Vec2::ZERO, FRAC_PI_4, 3.5);
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn square_room_symmetry() {
        let b = Bounds::new(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0));
        let map = WorldMap::room(b);
        let scan = scan_lidar(&map, &[], &RobotState::default(), 360, 3.5);
        for i in [0, 90, 180, 270] {
            assert!((scan[i] - 1.0).abs() < 1e-12, "ray {i} = {}", scan[i]);
        }
    }

    #[test]
    fn moving_obstacle_shadows_wall() {
        let b = Bounds::new(Vec2::new(-2.0, -2.0), Vec2::new(2.0, 2.0));
        let map = WorldMap::room(b);
        let panel = Segment::from_coords(0.7, -0.3, 0.7, 0.3);
        let scan = scan_lidar(&map, &[panel], &RobotState::default(), 360, 3.5);
        let oracle = raycast_all([&panel], Vec2::ZERO, 0.0, 3.5);
        assert!((scan[0] - oracle).abs() < 1e-15);
        assert!((scan[0] - 0.7).abs() < 1e-12);
        assert!((scan[180] - 2.0).abs() < 1e-12);
    }

    /// Root of the segment's line equation along the ray, by bisection.
    fn bisection_hit(s: &Segment, o: Vec2, angle: f64, max_range: f64) -> Option<f64> {
        let d = Vec2::from_angle(angle);
        let e = s.b - s.a;
        let f = |t: f64| e.cross(o + d * t - s.a);
        let (mut lo, mut hi) = (0.0, max_range);
        let (flo, fhi) = (f(lo), f(hi));
        if flo == 0.0 || flo.signum() == fhi.signum() {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        let p = o + d * t;
        let sp = (p - s.a).dot(e) / e.norm_sq();
        (-1e-9..=1.0 + 1e-9).contains(&sp).then_some(t)
    }

    #[test]
    fn raycast_matches_bruteforce_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let segs: Vec<Segment> = (0..8)
                .map(|_| {
                    Segment::from_coords(
                        rng.random_range(-4.0..4.0),
                        rng.random_range(-4.0..4.0),
                        rng.random_range(-4.0..4.0),
                        rng.random_range(-4.0..4.0),
                    )
                })
                .collect();
            let map = WorldMap::new(segs.clone(), big_bounds()).unwrap();
            let o = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            for _ in 0..20 {
                let angle = rng.random_range(-PI..PI);
                let r = raycast(&map, o, angle, 3.5);
                let oracle = segs
                    .iter()
                    .filter_map(|s| bisection_hit(s, o, angle, 3.5))
                    .fold(3.5, f64::min);
                assert!(r <= 3.5 && r > 0.0);
                assert!((r - oracle).abs() < 1e-9, "raycast {r} oracle {oracle}");
            }
        }
    }
}
